"""Generators on finite chains: assembly, evolution and steady-state analysis.

Two evolution routes are available. ``dense_expm`` forms the global
superoperator and exponentiates it (operator-space dimension up to
``DENSE_LIMIT``); ``integrate`` never forms it and applies each local term to
its support factor inside an adaptive Runge-Kutta integrator.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.sparse

from .channels import LindbladTerm, is_valid_term
from .operators import (
    HEISENBERG,
    SCHRODINGER,
    DimensionError,
    Superoperator,
    apply_local_super,
    as_support,
    commutator,
    embed,
    embed_super_sparse,
    spectral_norm,
    trace_norm,
    unvec,
    vec,
)
from .records import PropagationRecord

DENSE_LIMIT = 4096
STEADY_BAND = 1e-10


class SizeLimitError(RuntimeError):
    pass


class IntegrationError(RuntimeError):
    pass


def _region(region) -> set:
    if region is None or (not isinstance(region, (int, np.integer)) and len(region) == 0):
        return set()
    return set(as_support(region))


@dataclass(frozen=True)
class LatticeModel:
    n_sites: int
    local_dim: int
    terms: tuple[LindbladTerm, ...]
    range: int | None = None
    validate: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        terms = tuple(self.terms)
        object.__setattr__(self, "terms", terms)
        rng = self.range
        if rng is None:
            rng = max((t.diameter for t in terms), default=0)
            object.__setattr__(self, "range", rng)
        for t in terms:
            if t.local_dim != self.local_dim:
                raise DimensionError(f"term {t.label} has local_dim {t.local_dim}")
            if t.support[0] < 0 or t.support[-1] >= self.n_sites:
                raise DimensionError(f"term {t.label} support {t.support} leaves the chain")
            if t.diameter > rng:
                raise DimensionError(f"term {t.label} diameter {t.diameter} exceeds range {rng}")
        if self.validate:
            checked = {}
            for t in terms:
                key = t.heisenberg_action.matrix.tobytes()
                if key not in checked:
                    checked[key] = is_valid_term(t)
                if not checked[key]:
                    raise ValueError(f"term {t.label} on {t.support} is not a valid Lindblad term")

    @property
    def dim(self) -> int:
        return self.local_dim**self.n_sites

    @property
    def operator_dim(self) -> int:
        return self.dim**2

    def touching(self, region) -> "LatticeModel":
        region = _region(region)
        kept = [t for t in self.terms if region & set(t.support)]
        return LatticeModel(self.n_sites, self.local_dim, kept, self.range, validate=False)

    def without(self, region) -> "LatticeModel":
        region = _region(region)
        kept = [t for t in self.terms if not region & set(t.support)]
        return LatticeModel(self.n_sites, self.local_dim, kept, self.range, validate=False)

    def scaled(self, rate: float) -> "LatticeModel":
        return LatticeModel(self.n_sites, self.local_dim, [t.scaled(rate) for t in self.terms],
                            self.range, validate=False)


def translate(term: LindbladTerm, n_sites: int, sites: Sequence[int] | None = None) -> list[LindbladTerm]:
    """Copies of ``term`` shifted so its first site runs over ``sites``."""
    width = term.support[-1] - term.support[0]
    if sites is None:
        sites = range(n_sites - width)
    return [term.shifted(s - term.support[0]) for s in sites]


@dataclass(frozen=True)
class EvolutionPlan:
    method: str = "integrate"
    t_grid: tuple[float, ...] = ()
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11

    def __post_init__(self):
        if self.method not in ("dense_expm", "integrate"):
            raise ValueError(f"unknown evolution method {self.method!r}")
        grid = tuple(float(t) for t in self.t_grid)
        if any(t < 0 for t in grid) or list(grid) != sorted(grid):
            raise ValueError("t_grid must be sorted and nonnegative")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        object.__setattr__(self, "t_grid", grid)

    def check(self, model: LatticeModel) -> None:
        if self.method == "dense_expm" and model.operator_dim > DENSE_LIMIT:
            raise SizeLimitError(
                f"dense mode needs operator dimension <= {DENSE_LIMIT}, got {model.operator_dim}")


def assemble(model: LatticeModel, sparse: bool = False):
    """Global Heisenberg generator ``L = sum_X I_X`` as a superoperator.

    With ``sparse=True`` a scipy CSR matrix is returned and no size limit
    applies; otherwise a dense :class:`Superoperator`.
    """
    n, d = model.n_sites, model.local_dim
    size = model.operator_dim
    if not sparse and size > DENSE_LIMIT:
        raise SizeLimitError(f"dense assembly limited to {DENSE_LIMIT}, got {size}")
    total = scipy.sparse.csr_matrix((size, size), dtype=complex)
    for t in model.terms:
        total = total + embed_super_sparse(t.heisenberg_action.matrix, t.support, n, d)
    if sparse:
        return total
    return Superoperator(total.toarray(), HEISENBERG)


def restricted_generator(model: LatticeModel, exclude_region) -> Superoperator:
    """Generator with every term that meets ``exclude_region`` removed."""
    return assemble(model.without(exclude_region))


class MatrixFreeGenerator:
    """Applies ``L`` (or its adjoint) term by term on a chain operator."""

    def __init__(self, model: LatticeModel, picture: str = HEISENBERG):
        self.model = model
        self.picture = picture
        self._terms = []
        for t in model.terms:
            m = t.heisenberg_action.matrix
            if picture == SCHRODINGER:
                m = m.conj().T
            self._terms.append((np.ascontiguousarray(m), t.support))

    def apply_tensor(self, tensor: np.ndarray) -> np.ndarray:
        n, d = self.model.n_sites, self.model.local_dim
        out = np.zeros_like(tensor)
        for m, support in self._terms:
            out += apply_local_super(m, tensor, support, n, d)
        return out

    def __call__(self, a: np.ndarray) -> np.ndarray:
        n, d = self.model.n_sites, self.model.local_dim
        dim = d**n
        return self.apply_tensor(np.asarray(a, dtype=complex).reshape((d,) * (2 * n))).reshape(dim, dim)


def _integrate(gen: MatrixFreeGenerator, a: np.ndarray, times, plan: EvolutionPlan) -> list[np.ndarray]:
    n, d = gen.model.n_sites, gen.model.local_dim
    shape = (d,) * (2 * n)
    dim = d**n

    def rhs(_, y):
        return gen.apply_tensor(y.reshape(shape)).reshape(-1)

    y = np.asarray(a, dtype=complex).reshape(-1).copy()
    current = 0.0
    out = []
    for t in times:
        if t > current:
            sol = scipy.integrate.solve_ivp(rhs, (current, t), y, method="DOP853",
                                            rtol=plan.rel_tol, atol=plan.abs_tol)
            if not sol.success:
                raise IntegrationError(sol.message)
            y = sol.y[:, -1]
            current = t
        out.append(y.reshape(dim, dim).copy())
    return out


def _dense(model: LatticeModel, a: np.ndarray, times, picture: str) -> list[np.ndarray]:
    gen = assemble(model).matrix
    if picture == SCHRODINGER:
        gen = gen.conj().T
    v = vec(a)
    return [unvec(scipy.linalg.expm(t * gen) @ v) for t in times]


def evolve_grid(model: LatticeModel, a: np.ndarray, t_grid, plan: EvolutionPlan | None = None,
                picture: str = HEISENBERG) -> list[np.ndarray]:
    """``exp(tL)[A]`` (or ``exp(tL^*)[A]``) at every time in ``t_grid``."""
    plan = plan or EvolutionPlan()
    plan.check(model)
    times = [float(t) for t in t_grid]
    if any(t < 0 for t in times) or times != sorted(times):
        raise ValueError("evolution times must be sorted and nonnegative")
    a = np.asarray(a, dtype=complex)
    if a.shape != (model.dim, model.dim):
        raise DimensionError(f"operator of shape {a.shape} does not fit a chain of dim {model.dim}")
    if plan.method == "dense_expm":
        return _dense(model, a, times, picture)
    return _integrate(MatrixFreeGenerator(model, picture), a, times, plan)


def evolve(model: LatticeModel, a: np.ndarray, t: float, plan: EvolutionPlan | None = None,
           picture: str = HEISENBERG) -> np.ndarray:
    if t < 0:
        raise ValueError("evolution time must be nonnegative")
    return evolve_grid(model, a, [t], plan, picture)[0]


def support_distance(first, second) -> int:
    return min(abs(x - y) for x in as_support(first) for y in as_support(second))


def commutator_profile(model: LatticeModel, a_op: np.ndarray, a_site, b_op: np.ndarray, b_sites,
                       t_grid, plan: EvolutionPlan | None = None, envelope=None,
                       experiment: str = "lightcone", params_digest: str = "") -> list[PropagationRecord]:
    """``||[exp(tL)A, B]||`` over ``t_grid`` for one or several placements of ``B``.

    ``envelope(t, distance)`` supplies the bound stored next to each sample;
    without it the column holds NaN.
    """
    n, d = model.n_sites, model.local_dim
    a_site = as_support(a_site)
    if isinstance(b_sites, (int, np.integer)):
        b_sites = [b_sites]
    b_supports = [as_support(b) for b in b_sites]
    for b in b_supports:
        if set(b) & set(a_site):
            raise ValueError("commutator_profile needs disjoint supports")
    a_full = embed(a_op, a_site, n, d)
    evolved = evolve_grid(model, a_full, t_grid, plan)
    records = []
    for b in b_supports:
        b_full = embed(b_op, b, n, d)
        dist = support_distance(a_site, b)
        for t, at in zip(t_grid, evolved):
            value = spectral_norm(commutator(at, b_full))
            env = float(envelope(float(t), dist)) if envelope is not None else float("nan")
            records.append(PropagationRecord(experiment, n, a_site[0], b[0], dist, float(t),
                                             value, env, params_digest))
    return records


@dataclass(frozen=True)
class SteadyState:
    rho: np.ndarray
    kernel_dimension: int
    residual: float

    @property
    def unique(self) -> bool:
        return self.kernel_dimension == 1


def _as_state(v: np.ndarray) -> np.ndarray:
    rho = unvec(v)
    tr = np.trace(rho)
    rho = rho / tr
    return (rho + rho.conj().T) / 2


def steady_state(model: LatticeModel, method: str = "auto", kernel_tol: float = 1e-9,
                 gap_estimate: float = 1.0, max_iter: int = 2000) -> SteadyState:
    """Invariant state of the Schrodinger generator ``L^*``.

    Dense mode takes the null space of ``L^*`` from an SVD; matrix-free mode
    iterates ``exp(dt L^*)`` with ``dt = 1 / gap_estimate``.
    """
    if method == "auto":
        method = "dense" if model.operator_dim <= DENSE_LIMIT else "power"
    gen_s = MatrixFreeGenerator(model, SCHRODINGER)
    if method == "dense":
        lstar = assemble(model).matrix.conj().T
        _, svals, vh = scipy.linalg.svd(lstar)
        scale = max(svals[0], 1.0)
        null = vh[svals <= kernel_tol * scale].conj()
        kdim = null.shape[0]
        if kdim == 0:
            raise RuntimeError("generator has no stationary state within tolerance")
        if kdim > 1:
            warnings.warn(f"degenerate steady space of dimension {kdim}", stacklevel=2)
        traces = [abs(np.trace(unvec(v))) for v in null]
        rho = _as_state(null[int(np.argmax(traces))])
    elif method == "power":
        plan = EvolutionPlan("integrate")
        rho = np.eye(model.dim, dtype=complex) / model.dim
        dt = 1.0 / gap_estimate
        for _ in range(max_iter):
            nxt = evolve(model, rho, dt, plan, SCHRODINGER)
            nxt = (nxt + nxt.conj().T) / 2
            nxt /= np.trace(nxt)
            if trace_norm(nxt - rho) <= 1e-12:
                rho = nxt
                break
            rho = nxt
        else:
            raise RuntimeError("power iteration for the steady state did not converge")
        kdim = 1
    else:
        raise ValueError(f"unknown steady-state method {method!r}")
    return SteadyState(rho, kdim, trace_norm(gen_s(rho)))


def dissipative_gap(model: LatticeModel, band: float = STEADY_BAND) -> float:
    """``-max Re`` of the generator spectrum away from the steady band."""
    evals = scipy.linalg.eigvals(assemble(model).matrix)
    decaying = evals[np.abs(evals.real) > band]
    if decaying.size == 0:
        warnings.warn("no dissipative gap: spectrum lies on the imaginary axis", stacklevel=2)
        return 0.0
    return float(-np.max(decaying.real))


def frustration_residuals(model: LatticeModel, rho: np.ndarray) -> list[float]:
    """``||I_X^*[rho]||_1`` for every term, each evaluated on the full chain."""
    n, d = model.n_sites, model.local_dim
    tensor = np.asarray(rho, dtype=complex).reshape((d,) * (2 * n))
    out = []
    for t in model.terms:
        m = t.heisenberg_action.matrix.conj().T
        res = apply_local_super(m, tensor, t.support, n, d).reshape(model.dim, model.dim)
        out.append(trace_norm(res))
    return out


def frustration_free_check(model: LatticeModel, rho: np.ndarray, tol: float = 1e-10) -> bool:
    return all(r <= tol for r in frustration_residuals(model, rho))


def correlation(model: LatticeModel, rho: np.ndarray, a_op, a_site, b_op, b_site) -> float:
    """``|Tr(rho A B) - Tr(rho A) Tr(rho B)|`` for local A and B."""
    n, d = model.n_sites, model.local_dim
    rho = np.asarray(rho)
    if rho.shape != (model.dim, model.dim):
        raise DimensionError("state does not match the chain")
    a = embed(a_op, a_site, n, d)
    b = embed(b_op, b_site, n, d)
    return float(abs(np.trace(rho @ a @ b) - np.trace(rho @ a) * np.trace(rho @ b)))


def ultra_locality_residual(model: LatticeModel, a_op, a_site, t: float,
                            plan: EvolutionPlan | None = None) -> float:
    """``||exp(tL)A - exp(t L_A)A||`` with ``L_A`` the terms touching A's support."""
    n, d = model.n_sites, model.local_dim
    a_full = embed(a_op, a_site, n, d)
    full = evolve(model, a_full, t, plan)
    local = evolve(model.touching(a_site), a_full, t, plan)
    return spectral_norm(full - local)


def generators_commute(model: LatticeModel) -> float:
    """Largest ``||[I_X, I_Y]||`` over overlapping pairs, on the union support."""
    worst = 0.0
    d = model.local_dim
    for x, y in itertools.combinations(model.terms, 2):
        if not set(x.support) & set(y.support):
            continue
        window = sorted(set(x.support) | set(y.support))
        shift = {s: i for i, s in enumerate(window)}
        k = len(window)
        mx = embed_super_sparse(x.heisenberg_action.matrix, [shift[s] for s in x.support], k, d)
        my = embed_super_sparse(y.heisenberg_action.matrix, [shift[s] for s in y.support], k, d)
        worst = max(worst, spectral_norm((mx @ my - my @ mx).toarray()))
    return worst


def ultra_locality_profile(model: LatticeModel, a_op, a_site, t_grid,
                           plan: EvolutionPlan | None = None) -> list[float]:
    """:func:`ultra_locality_residual` over a sorted time grid, one evolution per model."""
    n, d = model.n_sites, model.local_dim
    a_full = embed(a_op, a_site, n, d)
    full = evolve_grid(model, a_full, t_grid, plan)
    local = evolve_grid(model.touching(a_site), a_full, t_grid, plan)
    return [spectral_norm(x - y) for x, y in zip(full, local)]
