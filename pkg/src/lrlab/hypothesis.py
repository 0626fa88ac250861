"""Numerical checks of the hypotheses behind the dissipative light-cone bound.

Covers the kernel projectors of ``I_X + I_X^*``, the structural equations
``P_Y I_X (1 - P_Y) = 0`` and ``P_Y P_X (1 - P_Y) = 0``, the decay rate
``nu``, brackets on completely bounded norms, and the ratios ``alpha`` and
``beta`` that enter the time-dependent velocity.
"""
from __future__ import annotations

import itertools
import json
import warnings
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .channels import LindbladTerm, choi, is_completely_positive, _normalized_reps
from .dynamics import LatticeModel, assemble
from .operators import (
    HEISENBERG,
    DimensionError,
    Superoperator,
    apply_super,
    as_support,
    conjugation,
    embed_super_sparse,
    hs_adjoint,
    is_hermiticity_preserving,
    random_unitary,
    spectral_norm,
    trace_norm,
)

DEFAULT_KERNEL_TOL = 1e-9
STRUCTURE_TOL = 1e-10
ZERO_NORM = 1e-12


class NotDissipativeError(ValueError):
    pass


@dataclass(frozen=True)
class KernelProjector:
    support: tuple[int, ...]
    matrix: Superoperator
    rank: int
    tolerance_used: float
    ambiguous: bool = False


def kernel_projector(term: LindbladTerm, tol: float = DEFAULT_KERNEL_TOL) -> KernelProjector:
    """Orthogonal projector onto ``Ker(I + I^*)``.

    Eigenvalues of ``(I + I^*)/2`` with modulus at most ``tol`` span the
    kernel. Eigenvalues in ``(tol, 10 tol)`` make the split ambiguous; they
    are flagged with a warning.
    """
    if not 0 < tol <= 1e-6:
        raise ValueError(f"kernel tolerance must lie in (0, 1e-6], got {tol}")
    m = term.heisenberg_action.matrix
    herm = (m + m.conj().T) / 2
    evals, evecs = scipy.linalg.eigh(herm)
    inside = np.abs(evals) <= tol
    ambiguous = bool(np.any((np.abs(evals) > tol) & (np.abs(evals) < 10 * tol)))
    if ambiguous:
        warnings.warn(f"kernel of term {term.label} on {term.support} is ambiguous at tol={tol}",
                      stacklevel=2)
    basis = evecs[:, inside]
    proj = basis @ basis.conj().T
    return KernelProjector(term.support, Superoperator(proj, HEISENBERG), int(inside.sum()), tol,
                           ambiguous)


def _window_embed(matrix: np.ndarray, support, window, local_dim: int):
    shift = {s: i for i, s in enumerate(window)}
    return embed_super_sparse(matrix, [shift[s] for s in support], len(window), local_dim)


def structure_residuals(terms, projectors, local_dim: int | None = None) -> float:
    """Largest violation of the two structural equations over overlapping pairs.

    Each pair (X, Y) is evaluated on the operator space of ``X | Y``;
    disjoint pairs vanish identically and are skipped.
    """
    terms = list(terms)
    projectors = list(projectors)
    if len(terms) != len(projectors):
        raise ValueError("need one projector per term")
    if not terms:
        return 0.0
    d = local_dim or terms[0].local_dim
    worst = 0.0
    for (tx, px), (ty, py) in itertools.product(zip(terms, projectors), repeat=2):
        if not set(tx.support) & set(ty.support):
            continue
        window = sorted(set(tx.support) | set(ty.support))
        ix = _window_embed(tx.heisenberg_action.matrix, tx.support, window, d).toarray()
        pxm = _window_embed(px.matrix.matrix, px.support, window, d).toarray()
        pym = _window_embed(py.matrix.matrix, py.support, window, d).toarray()
        comp = np.eye(pym.shape[0]) - pym
        worst = max(worst, spectral_norm(pym @ ix @ comp), spectral_norm(pym @ pxm @ comp))
    return worst


def decay_rates(term: LindbladTerm, tol: float = DEFAULT_KERNEL_TOL) -> np.ndarray:
    """Nonzero eigenvalues of ``(I + I^*)/2``, sorted ascending."""
    m = term.heisenberg_action.matrix
    evals = scipy.linalg.eigvalsh((m + m.conj().T) / 2)
    if evals[-1] > 1e-10:
        raise NotDissipativeError(
            f"term {term.label} on {term.support} has (I+I*)/2 eigenvalue {evals[-1]:.3e} > 0")
    return evals[np.abs(evals) > tol]


def nu(terms, tol: float = DEFAULT_KERNEL_TOL) -> float:
    """Slowest local decay rate, ``-max_X`` of the largest nonzero eigenvalue of ``(I_X + I_X^*)/2``.

    Terms with ``I + I^* = 0`` (pure Hamiltonians) carry no rate and are
    skipped; if no term has a rate a :class:`NotDissipativeError` is raised.
    """
    best = None
    for term in terms:
        rates = decay_rates(term, tol)
        if rates.size == 0:
            continue
        top = rates[-1]
        # the largest nonzero eigenvalue is the one closest to zero
        best = top if best is None else max(best, top)
    if best is None:
        raise NotDissipativeError("no term has a nonzero eigenvalue of (I+I*)/2")
    return float(-best)


def _polar_unitary(g: np.ndarray) -> np.ndarray:
    u, _, vh = scipy.linalg.svd(g)
    return u @ vh


def _stabilized_ascent(s: Superoperator, rng: np.random.Generator, restarts: int, aux: int,
                       tol: float = 1e-9, max_iter: int = 1000, seeds=()) -> float:
    """Best ``||(S kron id_aux)(V)||`` found by alternating singular-vector updates.

    For fixed V the best output vectors are the top singular pair of
    ``T(V)``; for fixed vectors (u, w) the best unitary is the polar factor
    of ``T^*(u w^dagger)``. Each half-step cannot decrease the objective.
    """
    d = s.dim
    big = d * aux
    local = s.matrix
    local_adj = s.matrix.conj().T

    def forward(v):
        return _apply_first(local, v, d, aux)

    def backward(v):
        return _apply_first(local_adj, v, d, aux)

    starts = [np.asarray(x, dtype=complex) for x in seeds]
    starts.append(np.eye(big, dtype=complex))
    while len(starts) < restarts:
        starts.append(random_unitary(big, rng))
    best = 0.0
    for v in starts:
        value = 0.0
        for _ in range(max_iter):
            out = forward(v)
            u, svals, wh = scipy.linalg.svd(out)
            new = svals[0]
            g = backward(np.outer(u[:, 0], wh[0]))
            v = _polar_unitary(g)
            if new - value <= tol * max(new, 1.0):
                value = max(value, new)
                break
            value = new
        best = max(best, value)
    return float(best)


def _apply_first(local: np.ndarray, v: np.ndarray, d: int, aux: int) -> np.ndarray:
    """Apply a superoperator on the first tensor factor of a ``(d*aux)``-dim operator."""
    # rows (i, a), cols (j, b); local acts on (i, j) through vec index j*d + i
    t = v.reshape(d, aux, d, aux).transpose(2, 0, 1, 3).reshape(d * d, aux * aux)
    out = (local @ t).reshape(d, d, aux, aux).transpose(1, 2, 0, 3)
    return out.reshape(d * aux, d * aux)


def cb_norm(s: Superoperator, mode: str = "upper_bound", seed: int = 0, restarts: int = 50,
            tol: float = 1e-9) -> float:
    """Bracket on the completely bounded norm of a Heisenberg-picture map.

    ``upper_bound``: ``||S(1)||`` when S is completely positive (exact),
    otherwise the trace norm of the Choi matrix of the Schrodinger adjoint.
    ``lower_estimate``: best value of ``||(S kron id_d)(V)||`` over unitaries V
    found by ascent from ``restarts`` starting points.
    """
    if not is_hermiticity_preserving(s):
        raise ValueError("cb_norm expects a hermiticity-preserving map")
    if not np.any(s.matrix):
        return 0.0
    if mode == "upper_bound":
        if is_completely_positive(s, tol=1e-10):
            return spectral_norm(apply_super(s, np.eye(s.dim)))
        return trace_norm(choi(hs_adjoint(s)))
    if mode == "lower_estimate":
        key = zlib.crc32(np.ascontiguousarray(s.matrix).tobytes())
        rng = np.random.default_rng([seed, key])
        d = s.dim
        # the unstabilized optimum lifted by the identity seeds the stabilized search
        plain = _best_plain(s, rng, max(restarts // 5, 5), tol)
        lifted = [np.kron(plain[1], np.eye(d))]
        stabilized = _stabilized_ascent(s, rng, restarts, d, tol, seeds=lifted)
        return max(stabilized, plain[0])
    raise ValueError(f"unknown cb_norm mode {mode!r}")


def _best_plain(s: Superoperator, rng, restarts: int, tol: float):
    d = s.dim
    best, best_v = -1.0, np.eye(d, dtype=complex)
    starts = [np.eye(d, dtype=complex)] + [random_unitary(d, rng) for _ in range(restarts - 1)]
    for v in starts:
        value = 0.0
        for _ in range(1000):
            out = apply_super(s, v)
            u, svals, wh = scipy.linalg.svd(out)
            g = apply_super(hs_adjoint(s), np.outer(u[:, 0], wh[0]))
            cand = _polar_unitary(g)
            if svals[0] - value <= tol * max(svals[0], 1.0):
                value = max(value, svals[0])
                break
            value = svals[0]
            v = cand
        if value > best:
            best, best_v = value, v
    return best, best_v


@dataclass(frozen=True)
class CbEntry:
    support: tuple[int, ...]
    label: str
    lower_estimate: float
    upper_bound: float


def term_cb_norms(terms, seed: int = 0, restarts: int = 50, threads: int = 1) -> list[CbEntry]:
    """cb-norm bracket for every term; identical generators are computed once."""
    terms = list(terms)
    keys = [t.heisenberg_action.matrix.tobytes() for t in terms]
    unique = {}
    for k, t in zip(keys, terms):
        unique.setdefault(k, t)

    def work(t):
        s = t.heisenberg_action
        return (cb_norm(s, "lower_estimate", seed, restarts), cb_norm(s, "upper_bound"))

    items = list(unique.items())
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            values = list(pool.map(lambda kv: work(kv[1]), items))
    else:
        values = [work(t) for _, t in items]
    table = dict(zip((k for k, _ in items), values))
    return [CbEntry(t.support, t.label, *table[k]) for k, t in zip(keys, terms)]


def alpha_beta(terms, projectors, cb_table=None, seed: int = 0, restarts: int = 50):
    """``alpha = max ||I P||_cb / ||I||_cb`` and ``beta = max ||I (1-P)||_cb / ||I||_cb``.

    Numerators use the cb upper bound and denominators the lower estimate,
    which can only enlarge the ratios. A numerator whose superoperator norm
    is below 1e-12 counts as exactly zero.
    """
    terms = list(terms)
    projectors = list(projectors)
    if cb_table is None:
        cb_table = term_cb_norms(terms, seed, restarts)
    alpha = beta = 0.0
    cache = {}
    for term, proj, entry in zip(terms, projectors, cb_table):
        key = (term.heisenberg_action.matrix.tobytes(), proj.matrix.matrix.tobytes())
        if key not in cache:
            if entry.lower_estimate <= ZERO_NORM:
                raise ValueError(f"term {term.label} on {term.support} has zero cb norm")
            i = term.heisenberg_action
            ip = i @ proj.matrix
            iq = i - ip
            num = []
            for part in (ip, iq):
                if spectral_norm(part.matrix) <= ZERO_NORM:
                    num.append(0.0)
                else:
                    num.append(cb_norm(part, "upper_bound"))
            cache[key] = (num[0] / entry.lower_estimate, num[1] / entry.lower_estimate)
        a, b = cache[key]
        alpha, beta = max(alpha, a), max(beta, b)
    return alpha, beta


def covariance_residual(term: LindbladTerm, reps) -> float:
    """Largest ``||I Ad_g^{(i)} - Ad_g^{(i)} I||`` over group elements and sites of the support."""
    group = [u for _, u in _normalized_reps(_as_reps(reps))]
    d = term.local_dim
    k = len(term.support)
    if group[0].shape != (d, d):
        raise DimensionError("representation does not act on the local site")
    m = term.heisenberg_action.matrix
    worst = 0.0
    for i in range(k):
        for u in group:
            w = embed_super_sparse(conjugation(u).matrix, i, k, d).toarray()
            worst = max(worst, spectral_norm(m @ w - w @ m))
    return worst


def covariance_check(term: LindbladTerm, reps, tol: float = 1e-10) -> bool:
    return covariance_residual(term, reps) <= tol


def _as_reps(reps):
    reps = list(reps)
    if reps and not isinstance(reps[0], tuple):
        return [(1.0 / len(reps), u) for u in reps]
    return reps


def twirl_projector(support, reps, local_dim: int | None = None) -> KernelProjector:
    """Product over the sites of ``support`` of the single-site group averages."""
    support = as_support(support)
    reps = _normalized_reps(_as_reps(reps))
    d = reps[0][1].shape[0]
    if local_dim is not None and local_dim != d:
        raise DimensionError("representation does not match local_dim")
    k = len(support)
    single = sum(w * conjugation(u).matrix for w, u in reps)
    total = np.eye(d ** (2 * k), dtype=complex)
    for i in range(k):
        total = embed_super_sparse(single, i, k, d).toarray() @ total
    rank = int(round(np.trace(total).real))
    return KernelProjector(support, Superoperator(total, HEISENBERG), rank, 0.0)


def _connected_subsets(terms):
    """All subsets of ``terms`` that are connected under support overlap, plus the empty set."""
    yield ()
    idx = range(len(terms))
    for size in range(1, len(terms) + 1):
        for combo in itertools.combinations(idx, size):
            seen = {combo[0]}
            frontier = [combo[0]]
            while frontier:
                cur = frontier.pop()
                for other in combo:
                    if other not in seen and set(terms[cur].support) & set(terms[other].support):
                        seen.add(other)
                        frontier.append(other)
            if len(seen) == size:
                yield combo


def localization_residuals(model: LatticeModel, tol: float = DEFAULT_KERNEL_TOL) -> dict:
    """Residuals of the two localization assumptions on a small window.

    Interaction terms are those with more than one site, dissipators are the
    one-site terms. ``P_j`` projects onto the kernel of the Hermitian part of
    interaction j plus the dissipators on its sites. Returns the commutation
    residual and the worst ``||P^c L^c P^c - P^c L^c||`` over connected runs
    of interactions.
    """
    if model.n_sites > 5:
        raise SizeLimitWindowError(f"window of {model.n_sites} sites is too large for a dense check")
    n, d = model.n_sites, model.local_dim
    inter = [t for t in model.terms if len(t.support) > 1]
    diss = [t for t in model.terms if len(t.support) == 1]
    size = d ** (2 * n)
    eye = np.eye(size)
    projs = []
    for term in inter:
        m = term.heisenberg_action.matrix
        herm = m + m.conj().T
        for dk in diss:
            if dk.support[0] in term.support:
                pos = term.support.index(dk.support[0])
                md = dk.heisenberg_action.matrix
                herm = herm + embed_super_sparse(md + md.conj().T, pos, len(term.support), d).toarray()
        evals, evecs = scipy.linalg.eigh(herm / 2)
        basis = evecs[:, np.abs(evals) <= tol]
        local = basis @ basis.conj().T
        projs.append(embed_super_sparse(local, term.support, n, d).toarray())
    comm = 0.0
    for p, q in itertools.combinations(projs, 2):
        comm = max(comm, spectral_norm(p @ q - q @ p))
    full = assemble(model).matrix
    inter_global = [embed_super_sparse(t.heisenberg_action.matrix, t.support, n, d).toarray()
                    for t in inter]
    reduced = 0.0
    for subset in _connected_subsets(inter):
        sites = set().union(*(inter[j].support for j in subset)) if subset else set()
        pc = eye.copy()
        for j, p in enumerate(projs):
            if j not in subset:
                pc = p @ pc
        lc = full.copy()
        for j, t in enumerate(inter):
            if sites & set(t.support):
                lc = lc - inter_global[j]
        reduced = max(reduced, spectral_norm(pc @ lc @ pc - pc @ lc))
    return {"commutation": comm, "reduced_generator": reduced}


class SizeLimitWindowError(ValueError):
    pass


def localization_assumptions(model: LatticeModel, tol: float = 1e-10) -> bool:
    res = localization_residuals(model)
    return res["commutation"] <= tol and res["reduced_generator"] <= tol


@dataclass
class HypothesisReport:
    structure_residual_max: float
    nu: float
    alpha: float
    beta: float
    cb_norms: list = field(default_factory=list)
    passed: bool = False

    def to_dict(self) -> dict:
        return {
            "structure_residual_max": self.structure_residual_max,
            "nu": self.nu,
            "alpha": self.alpha,
            "beta": self.beta,
            "cb_norms": [
                {"support": list(e.support), "label": e.label,
                 "lower_estimate": e.lower_estimate, "upper_bound": e.upper_bound}
                for e in self.cb_norms
            ],
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def check_model(model: LatticeModel, kernel_tol: float = DEFAULT_KERNEL_TOL,
                structure_tol: float = STRUCTURE_TOL, seed: int = 0, restarts: int = 50,
                threads: int = 1) -> HypothesisReport:
    """Evaluate every hypothesis of the bound on ``model``."""
    terms = sorted(model.terms, key=lambda t: t.support)
    projs = [kernel_projector(t, kernel_tol) for t in terms]
    residual = structure_residuals(terms, projs, model.local_dim)
    try:
        rate = nu(terms, kernel_tol)
    except NotDissipativeError:
        rate = 0.0
    table = term_cb_norms(terms, seed, restarts, threads)
    alpha, beta = alpha_beta(terms, projs, table)
    passed = residual <= structure_tol and rate > 0
    return HypothesisReport(residual, rate, alpha, beta, table, passed)
