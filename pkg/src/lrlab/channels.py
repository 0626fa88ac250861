"""Completely positive maps and local Lindblad terms.

Channels are stored in the Schrodinger picture (maps on states); Lindblad
terms are stored in the Heisenberg picture (generators acting on
observables), following the conventions in :mod:`lrlab.operators`.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .operators import (
    HEISENBERG,
    SCHRODINGER,
    DimensionError,
    Superoperator,
    apply_super,
    as_support,
    conjugation,
    embed_super,
    hs_adjoint,
    identity_super,
    left_multiplication,
    random_hermitian,
    right_multiplication,
    spectral_norm,
    super_from_map,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
)

CP_TOL = 1e-12
TP_TOL = 1e-12
FIXED_POINT_TOL = 1e-9


class NotCompletelyPositiveError(ValueError):
    def __init__(self, message: str, min_eigenvalue: float):
        super().__init__(f"{message} (Choi min eigenvalue {min_eigenvalue:.3e})")
        self.min_eigenvalue = min_eigenvalue


@dataclass(frozen=True)
class ChannelSpec:
    local_dim: int
    schrodinger_action: Superoperator
    label: str = ""

    @property
    def heisenberg_action(self) -> Superoperator:
        return hs_adjoint(self.schrodinger_action)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return apply_super(self.schrodinger_action, rho)


@dataclass(frozen=True)
class LindbladTerm:
    """A local Heisenberg-picture generator ``I_X`` and its support ``X``.

    ``heisenberg_action`` acts on the operator space of the support only.
    """

    support: tuple[int, ...]
    heisenberg_action: Superoperator
    label: str = ""
    local_dim: int = 2
    unique_fixed_point: bool | None = field(default=None, compare=False)

    def __post_init__(self):
        support = as_support(self.support)
        object.__setattr__(self, "support", support)
        if not support:
            raise DimensionError("a Lindblad term needs a non-empty support")
        if self.heisenberg_action.picture != HEISENBERG:
            raise ValueError("LindbladTerm expects a Heisenberg-picture generator")
        if self.heisenberg_action.dim != self.local_dim ** len(support):
            raise DimensionError(
                f"generator dim {self.heisenberg_action.dim} does not match support {support}")

    @property
    def schrodinger_action(self) -> Superoperator:
        return hs_adjoint(self.heisenberg_action)

    @property
    def diameter(self) -> int:
        return self.support[-1] - self.support[0]

    def shifted(self, offset: int) -> "LindbladTerm":
        return LindbladTerm(tuple(s + offset for s in self.support), self.heisenberg_action,
                            self.label, self.local_dim, self.unique_fixed_point)

    def scaled(self, rate: float) -> "LindbladTerm":
        return LindbladTerm(self.support, self.heisenberg_action.scaled(rate), self.label,
                            self.local_dim, self.unique_fixed_point)


def choi(s: Superoperator) -> np.ndarray:
    """Choi matrix ``J = sum_ij E_ij kron S(E_ij)``."""
    dim = s.dim
    # matrix row a + D b, column i + D j reshape to axes (b, a, j, i)
    j = s.matrix.reshape(dim, dim, dim, dim).transpose(3, 1, 2, 0)
    return j.reshape(dim * dim, dim * dim)


def choi_min_eigenvalue(s: Superoperator) -> float:
    j = choi(s)
    return float(np.linalg.eigvalsh((j + j.conj().T) / 2)[0])


def is_completely_positive(s: Superoperator, tol: float = CP_TOL) -> bool:
    j = choi(s)
    if np.max(np.abs(j - j.conj().T), initial=0.0) > tol:
        return False
    return choi_min_eigenvalue(s) >= -tol


def trace_preservation_residual(s: Superoperator) -> float:
    """``max |Tr S(E_ij) - delta_ij|`` for a Schrodinger map."""
    dim = s.dim
    out = s.matrix.reshape(dim, dim, dim * dim)
    traces = np.trace(out, axis1=0, axis2=1)
    return float(np.max(np.abs(traces - np.eye(dim).reshape(-1, order="F"))))


def unitality_residual(s: Superoperator) -> float:
    """``||S(1) - 1||`` in max-entry norm."""
    dim = s.dim
    return float(np.max(np.abs(apply_super(s, np.eye(dim)) - np.eye(dim))))


def _channel(local_dim: int, action: Superoperator, label: str) -> ChannelSpec:
    tp = trace_preservation_residual(action)
    if tp > TP_TOL:
        raise ValueError(f"{label}: not trace preserving (residual {tp:.3e})")
    lam = choi_min_eigenvalue(action)
    if lam < -CP_TOL:
        raise NotCompletelyPositiveError(f"{label}: not completely positive", lam)
    return ChannelSpec(local_dim, action, label)


def phi_matrix(lam: float, t: float) -> Superoperator:
    """Schrodinger superoperator of the qubit map Phi(lambda, t), unchecked.

    ``A -> [[tr/2, t tr/2 + lam A12], [t tr/2 + lam A21, tr/2]]`` with
    ``tr = A11 + A22``.
    """
    def action(a):
        tr = a[0, 0] + a[1, 1]
        return np.array([[tr / 2, t * tr / 2 + lam * a[0, 1]],
                         [t * tr / 2 + lam * a[1, 0], tr / 2]], dtype=complex)

    return super_from_map(action, 2, SCHRODINGER)


def phi_family(lam: float, t: float) -> ChannelSpec:
    """The trace-preserving qubit map Phi(lambda, t).

    Rejected when ``|lambda| + |t| >= 1`` or when the Choi matrix is not
    positive semidefinite. The Choi matrix has eigenvalues
    ``(1 +- lam +- sqrt(lam^2 + t^2)) / 2``, so the map is CP exactly when
    ``2|lambda| + t^2 <= 1``; the linear rule alone does not enforce this.
    """
    if not (-1 <= lam <= 1 and -1 <= t <= 1):
        raise ValueError(f"Phi parameters must lie in [-1, 1], got ({lam}, {t})")
    action = phi_matrix(lam, t)
    label = f"phi({lam:g},{t:g})"
    if abs(lam) + abs(t) >= 1:
        raise NotCompletelyPositiveError(
            f"{label}: |lambda|+|t| = {abs(lam) + abs(t):g} >= 1, not completely positive",
            choi_min_eigenvalue(action))
    return _channel(2, action, label)


def psi_matrix(lam: float, t: float) -> Superoperator:
    """Schrodinger superoperator of the diagonal qubit map Psi(lambda, t), unchecked."""
    def action(a):
        return np.array([
            [(1 + lam + t) / 2 * a[0, 0] + (1 - lam + t) / 2 * a[1, 1], 0],
            [0, (1 - lam - t) / 2 * a[0, 0] + (1 + lam - t) / 2 * a[1, 1]],
        ], dtype=complex)

    return super_from_map(action, 2, SCHRODINGER)


def psi_family(lam: float, t: float, strict: bool = True) -> ChannelSpec:
    """The diagonal qubit map Psi(lambda, t) on the window ``|lambda| + |t| < 1``.

    With ``strict=False`` points on the closed window are accepted with a
    warning (for instance the dephasing map Psi(1, 0)).
    """
    label = f"psi({lam:g},{t:g})"
    inside = -1 < lam < 1 and -1 < t < 1 and 1 - abs(lam) - abs(t) > 0
    if not inside:
        if strict or abs(lam) + abs(t) > 1:
            raise ValueError(f"{label}: outside the window |lambda|+|t| < 1")
        warnings.warn(f"{label} lies on the boundary of the parameter window", stacklevel=2)
    return _channel(2, psi_matrix(lam, t), label)


def _normalized_reps(reps) -> list[tuple[float, np.ndarray]]:
    out = []
    for weight, u in reps:
        u = np.asarray(u, dtype=complex)
        if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) > 1e-12:
            raise ValueError("twirl representation contains a non-unitary element")
        if weight < 0:
            raise ValueError("twirl weights must be nonnegative")
        out.append((float(weight), u))
    if not out:
        raise ValueError("empty representation")
    if abs(sum(w for w, _ in out) - 1) > 1e-12:
        raise ValueError("twirl weights must sum to one")
    if len({u.shape for _, u in out}) != 1:
        raise DimensionError("twirl unitaries differ in dimension")
    return out


def twirl_channel(reps, label: str = "twirl") -> ChannelSpec:
    """Group average ``A -> sum_g mu(g) U_g A U_g^dagger``.

    ``reps`` is a sequence of ``(weight, unitary)`` pairs.
    """
    reps = _normalized_reps(reps)
    dim = reps[0][1].shape[0]
    m = sum(w * conjugation(u, SCHRODINGER).matrix for w, u in reps)
    return _channel(dim, Superoperator(m, SCHRODINGER), label)


def uniform(group: Sequence[np.ndarray]) -> list[tuple[float, np.ndarray]]:
    return [(1.0 / len(group), u) for u in group]


def pauli_group() -> list[np.ndarray]:
    """Pauli matrices modulo phase; a unitary 1-design on one qubit."""
    return [np.eye(2, dtype=complex), SIGMA_X, SIGMA_Y, SIGMA_Z]


def tetrahedral_group() -> list[np.ndarray]:
    """The rotation group A4 as 3x3 signed permutation matrices.

    Irreducible on C^3, and the operator space of a qutrit carries its
    3-dimensional irrep twice, so covariant maps need not commute.
    """
    perms = [(0, 1, 2), (1, 2, 0), (2, 0, 1)]
    signs = [(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)]
    group = []
    for p in perms:
        perm = np.eye(3)[list(p)]
        for s in signs:
            group.append((np.diag(s) @ perm).astype(complex))
    return group


def tensor_super(first: Superoperator, second: Superoperator, local_dims=None) -> Superoperator:
    """Superoperator of ``first kron second`` on a two-factor space."""
    d1, d2 = (first.dim, second.dim) if local_dims is None else local_dims
    if d1 != d2:
        # embed_super works on uniform chains only
        raise DimensionError("tensor_super expects equal local dimensions")
    left = embed_super(first, 0, 2, d1)
    right = embed_super(second, 1, 2, d2)
    return left @ right


def fixed_space_dimension(s: Superoperator, tol: float = FIXED_POINT_TOL) -> int:
    """Number of eigenvalues of ``s`` within ``tol`` of one."""
    evals = np.linalg.eigvals(s.matrix)
    return int(np.sum(np.abs(evals - 1) <= tol))


def mixture_interaction(components, support=(0, 1), require_unique: bool = True,
                        label: str = "mixture") -> LindbladTerm:
    """Two-site term ``I = (sum_k c_k Gamma^k kron Phi^k)^* - id``.

    ``components`` is a sequence of ``(weight, Gamma, Phi)`` with Schrodinger
    channels ``Gamma`` on the left site and ``Phi`` on the right site. The
    Heisenberg generator is obtained through the Hilbert-Schmidt adjoint.
    """
    components = list(components)
    if not components:
        raise ValueError("mixture needs at least one component")
    weights = np.array([c for c, _, _ in components], dtype=float)
    if np.any(weights <= 0) or np.any(weights > 1):
        raise ValueError(f"mixture weights must lie in (0, 1], got {weights}")
    if abs(weights.sum() - 1) > 1e-12:
        raise ValueError(f"mixture weights sum to {weights.sum()}, not 1")
    dims = {ch.local_dim for _, pair_l, pair_r in components for ch in (pair_l, pair_r)}
    if len(dims) != 1:
        raise DimensionError("mixture components act on different local dimensions")
    d = dims.pop()
    for _, gamma, phi in components:
        for ch in (gamma, phi):
            if unitality_residual(ch.schrodinger_action) <= 1e-12:
                warnings.warn(f"component {ch.label} is unital; its adjoint is trace preserving",
                              stacklevel=2)
    composite = sum((tensor_super(g.schrodinger_action, p.schrodinger_action).scaled(c)
                     for c, g, p in components[1:]),
                    start=tensor_super(components[0][1].schrodinger_action,
                                       components[0][2].schrodinger_action)
                    .scaled(components[0][0]))
    n_fixed = fixed_space_dimension(composite)
    if require_unique and n_fixed != 1:
        raise ValueError(f"{label}: composite map has a {n_fixed}-dimensional fixed space")
    heis = hs_adjoint(composite) - identity_super(d * d)
    return LindbladTerm(support, heis, label, d, unique_fixed_point=(n_fixed == 1))


def psi_determinant_matrix(pairs) -> np.ndarray:
    """4x4 matrix whose columns are ``((1+-a1)(1+-a2))`` for each parameter pair."""
    pairs = list(pairs)
    if len(pairs) != 4:
        raise ValueError("need four parameter pairs")
    cols = []
    for a1, a2 in pairs:
        cols.append([(1 + a1) * (1 + a2), (1 + a1) * (1 - a2),
                     (1 - a1) * (1 + a2), (1 - a1) * (1 - a2)])
    return np.array(cols, dtype=float).T


def psi_determinant_check(r, s, t, u, tol: float = 1e-10) -> bool:
    """True when the four Psi-mixture parameter pairs give a nonsingular matrix."""
    return bool(abs(np.linalg.det(psi_determinant_matrix([r, s, t, u]))) > tol)


def phi_mixture_term(lambdas=(0.3, 0.2, 0.3, 0.2, 0.3, 0.2), r: float = 0.2, s: float = 0.2,
                     support=(0, 1), require_unique: bool = True) -> LindbladTerm:
    """Three-component equal-weight Phi mixture.

    The translations are fixed by ``t1 = -(r + s)`` and ``t2 = r - s`` and
    ``r^2 = s^2`` is required. These make the composite map unital. The
    structural equations additionally need the lambda-weighted translation
    sums ``t2 l1 + s l3 - r l5`` and ``t1 l2 + s l4 + r l6`` to vanish, which
    holds e.g. when all left lambdas agree and all right lambdas agree.
    """
    if abs(r * r - s * s) > 1e-12:
        raise ValueError(f"need r^2 = s^2, got r={r}, s={s}")
    l1, l2, l3, l4, l5, l6 = lambdas
    t1, t2 = -(r + s), r - s
    comps = [
        (1 / 3, phi_family(l1, t1), phi_family(l2, t2)),
        (1 / 3, phi_family(l3, s), phi_family(l4, s)),
        (1 / 3, phi_family(l5, r), phi_family(l6, -r)),
    ]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return mixture_interaction(comps, support, require_unique, label="phi-mixture")


def psi_mixture_term(pairs, lambdas, support=(0, 1), require_unique: bool = True) -> LindbladTerm:
    """Four-component Psi mixture with weights solved from the determinant system.

    ``pairs`` holds the translations ``(a1, a2)`` of each component (the
    right factor uses ``a2`` as given) and ``lambdas`` the matching
    ``(l1, l2)``. The weights solve ``D c = (1, 1, 1, 1)`` so that the
    composite map fixes the uniform state; they must land in ``(0, 1]``.
    """
    mat = psi_determinant_matrix(pairs)
    if abs(np.linalg.det(mat)) <= 1e-10:
        raise ValueError("determinant condition fails; weights are not determined")
    weights = np.linalg.solve(mat, np.ones(4))
    comps = []
    for c, (a1, a2), (l1, l2) in zip(weights, pairs, lambdas):
        comps.append((float(c), psi_family(l1, a1), psi_family(l2, a2)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return mixture_interaction(comps, support, require_unique, label="psi-mixture")


def hamiltonian_term(h: np.ndarray, support, local_dim: int = 2, label: str = "hamiltonian") -> LindbladTerm:
    """Heisenberg generator ``A -> i[h, A]``."""
    h = np.asarray(h, dtype=complex)
    if np.max(np.abs(h - h.conj().T)) > 1e-12:
        raise ValueError("Hamiltonian term needs a Hermitian h")
    m = 1j * (left_multiplication(h).matrix - right_multiplication(h).matrix)
    return LindbladTerm(support, Superoperator(m, HEISENBERG), label, local_dim)


def depolarization_term(site, gamma: float, local_dim: int = 2) -> LindbladTerm:
    """One-site generator ``gamma (Tr(A)/d 1 - A)``."""
    if gamma <= 0:
        raise ValueError(f"depolarization rate must be positive, got {gamma}")
    d = local_dim
    full = np.eye(d).reshape(-1, order="F")
    # Tr(A)/d 1 in vec form is |vec 1><vec 1| / d
    m = gamma * (np.outer(full, full) / d - np.eye(d * d))
    return LindbladTerm(as_support(site), Superoperator(m.astype(complex), HEISENBERG),
                        f"depolarize({gamma:g})", d)


def dissipator_term(jumps, support, h=None, local_dim: int = 2, label: str = "dissipator") -> LindbladTerm:
    """Heisenberg Lindblad generator ``i[h, A] + sum_k L_k^+ A L_k - {L_k^+ L_k, A}/2``."""
    support = as_support(support)
    dim = local_dim ** len(support)
    m = np.zeros((dim * dim, dim * dim), dtype=complex)
    if h is not None:
        m += hamiltonian_term(h, support, local_dim).heisenberg_action.matrix
    eye = np.eye(dim)
    for op in jumps:
        op = np.asarray(op, dtype=complex)
        ld = op.conj().T
        m += np.kron(op.T, ld)                      # L^+ A L
        m -= 0.5 * np.kron(eye, ld @ op)            # L^+ L A
        m -= 0.5 * np.kron((ld @ op).T, eye)        # A L^+ L
    return LindbladTerm(support, Superoperator(m, HEISENBERG), label, local_dim)


def kraus_channel(kraus, label: str = "kraus") -> ChannelSpec:
    kraus = [np.asarray(k, dtype=complex) for k in kraus]
    m = sum(np.kron(k.conj(), k) for k in kraus)
    return _channel(kraus[0].shape[0], Superoperator(m, SCHRODINGER), label)


def random_channel(dim: int, n_kraus: int, rng: np.random.Generator) -> ChannelSpec:
    """Random CPTP map from a Gaussian Stinespring isometry."""
    g = rng.normal(size=(n_kraus * dim, dim)) + 1j * rng.normal(size=(n_kraus * dim, dim))
    q, _ = np.linalg.qr(g)
    kraus = [q[k * dim:(k + 1) * dim] for k in range(n_kraus)]
    return kraus_channel(kraus, label=f"random({dim},{n_kraus})")


def channel_term(channel: ChannelSpec, support, rate: float = 1.0, local_dim: int = 2,
                 label: str | None = None) -> LindbladTerm:
    """Generator ``rate (Phi^* - id)`` of a channel applied at a Poisson rate."""
    k = len(as_support(support))
    dim = local_dim**k
    if channel.schrodinger_action.dim != dim:
        raise DimensionError("channel does not act on the whole support")
    heis = (channel.heisenberg_action - identity_super(dim)).scaled(rate)
    return LindbladTerm(support, heis, label or channel.label, local_dim)


def random_lindblad_term(support, rng: np.random.Generator, local_dim: int = 2,
                         n_jumps: int = 2, h_scale: float = 1.0) -> LindbladTerm:
    """Random Hamiltonian plus random jump operators on ``support``."""
    support = as_support(support)
    dim = local_dim ** len(support)
    h = random_hermitian(dim, rng) * h_scale
    jumps = [(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2 * dim)
             for _ in range(n_jumps)]
    return dissipator_term(jumps, support, h, local_dim, label="random-lindblad")


def covariant_random_term(group, support, rng: np.random.Generator, n_kraus: int = 3,
                          rate: float = 1.0) -> LindbladTerm:
    """Twirl a random unital Heisenberg channel over ``group`` on every site.

    The result ``rate (C - id)`` commutes with conjugation by any group
    element on any single site of the support.
    """
    support = as_support(support)
    d = group[0].shape[0]
    k = len(support)
    dim = d**k
    base = random_channel(dim, n_kraus, rng).heisenberg_action.matrix
    acc = np.zeros_like(base)
    for elems in itertools.product(group, repeat=k):
        u = elems[0]
        for e in elems[1:]:
            u = np.kron(u, e)
        w = conjugation(u).matrix
        acc += w.conj().T @ base @ w
    acc /= len(group) ** k
    heis = Superoperator(rate * (acc - np.eye(dim * dim)), HEISENBERG)
    return LindbladTerm(support, heis, "covariant", d)


def term_exponential(term: LindbladTerm, t: float) -> Superoperator:
    return Superoperator(scipy.linalg.expm(t * term.heisenberg_action.matrix), HEISENBERG)


def term_report(term: LindbladTerm, times=(0.1, 1.0)) -> dict:
    """Validity data for a term: CP of ``exp(tI)``, ``I[1]`` and ``I^*[1]`` residuals."""
    dim = term.heisenberg_action.dim
    eye = np.eye(dim)
    cp = min(choi_min_eigenvalue(term_exponential(term, t)) for t in times)
    return {
        "choi_min_eigenvalue": cp,
        "unital_residual": spectral_norm(apply_super(term.heisenberg_action, eye)),
        "adjoint_unital_residual": spectral_norm(apply_super(term.schrodinger_action, eye)),
    }


def is_valid_term(term: LindbladTerm, times=(0.1, 1.0)) -> bool:
    rep = term_report(term, times)
    return rep["choi_min_eigenvalue"] >= -1e-10 and rep["unital_residual"] <= 1e-12
