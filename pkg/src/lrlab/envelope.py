"""Reproducing functions and the closed-form propagation bounds built from them."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass(frozen=True)
class ReproducingFunction:
    """``F(r) = exp(-a r) (1 + r)^(-p)`` on a chain of ``lattice_size`` sites.

    ``f_norm`` and ``c_mu`` are evaluated once, at construction, for the
    stored ``mu``.
    """

    a: float = 0.5
    p: float = 2.0
    mu: float = 0.25
    lattice_size: int = 7
    f_norm: float = field(init=False)
    c_mu: float = field(init=False)

    def __post_init__(self):
        if self.a < 0 or self.p < 0 or self.mu < 0:
            raise ValueError("rate, power and mu must be nonnegative")
        if self.lattice_size < 1:
            raise ValueError("lattice_size must be at least 1")
        object.__setattr__(self, "f_norm", f_norm(self, self.lattice_size))
        object.__setattr__(self, "c_mu", c_mu(self, self.mu, self.lattice_size))

    @classmethod
    def power(cls, p: float, mu: float = 0.0, lattice_size: int = 7) -> "ReproducingFunction":
        return cls(0.0, p, mu, lattice_size)

    @classmethod
    def exponential(cls, a: float, mu: float = 0.0, lattice_size: int = 7) -> "ReproducingFunction":
        return cls(a, 0.0, mu, lattice_size)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return np.exp(-self.a * r) * (1.0 + r) ** (-self.p)

    def weighted(self, r, mu: float | None = None):
        """``F_mu(r) = exp(-mu r) F(r)``."""
        mu = self.mu if mu is None else mu
        r = np.asarray(r, dtype=float)
        return np.exp(-mu * r) * self(r)

    def with_mu(self, mu: float, lattice_size: int | None = None) -> "ReproducingFunction":
        return ReproducingFunction(self.a, self.p, mu, lattice_size or self.lattice_size)


def _distances(n: int) -> np.ndarray:
    idx = np.arange(n)
    return np.abs(idx[:, None] - idx[None, :]).astype(float)


def f_norm(F: ReproducingFunction, n: int) -> float:
    """``sup_x sum_y F(|x - y|)`` on a chain of n sites."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return float(np.max(F(_distances(n)).sum(axis=1)))


def c_mu(F: ReproducingFunction, mu: float, n: int, literal: bool = False) -> float:
    """Convolution constant ``sup_{x,z} sum_y F_mu(d(x,y)) F_mu(d(y,z)) / F_mu(d(x,z))``.

    ``literal=True`` evaluates the printed variant instead, in which every
    ratio collapses and the result is ``sup_y sum_z F(d(y,z)) exp(-d(y,z))``.
    """
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    dist = _distances(n)
    if literal:
        return float(np.max((F(dist) * np.exp(-dist)).sum(axis=1)))
    g = F.weighted(dist, mu)
    if np.any(g <= 0):
        raise ZeroDivisionError("reproducing function underflows on this chain")
    return float(np.max((g @ g) / g))


def l_mu_norm(model, F: ReproducingFunction, mu: float, cb_norms) -> float:
    """``sup_{x,y} sum_{Z containing x,y} ||I_Z||_cb exp(mu d(x,y)) / F(d(x,y))``.

    ``cb_norms`` holds one value per term of ``model`` in the same order.
    """
    cb_norms = list(cb_norms)
    if len(cb_norms) != len(model.terms):
        raise ValueError(f"need {len(model.terms)} cb norms, got {len(cb_norms)}")
    if any(c is None or not np.isfinite(c) for c in cb_norms):
        raise ValueError("missing cb norm")
    n = model.n_sites
    acc = np.zeros((n, n))
    for term, value in zip(model.terms, cb_norms):
        s = np.asarray(term.support)
        acc[np.ix_(s, s)] += value
    if not acc.any():
        return 0.0
    dist = _distances(n)
    return float(np.max(acc * np.exp(mu * dist) / F(dist)))


@dataclass(frozen=True)
class EnvelopeParams:
    alpha: float
    beta: float
    nu: float
    mu: float
    f_norm: float
    c_mu: float
    l_mu_norm: float
    norm_a: float = 1.0
    norm_b: float = 1.0
    min_support: int = 1

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value < 0:
                raise ValueError(f"{name} must be nonnegative, got {value}")
        if self.beta > 0 and self.nu <= 0:
            raise ValueError("nu must be positive when beta > 0")

    def digest(self) -> str:
        payload = json.dumps({k: repr(v) for k, v in asdict(self).items()}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    @property
    def prefactor(self) -> float:
        return 2 * self.f_norm / self.c_mu * self.norm_a * self.norm_b * self.min_support


def velocity(t: float, p: EnvelopeParams) -> float:
    """``v(t) = (alpha + beta exp(-nu t)) C_mu ||L||_mu``."""
    return (p.alpha + p.beta * math.exp(-p.nu * t)) * p.c_mu * p.l_mu_norm


def integrated_velocity(t: float, p: EnvelopeParams) -> float:
    """``int_0^t v``, using ``(1 - exp(-nu t)) / nu`` in its stable form."""
    decay = -math.expm1(-p.nu * t) / p.nu if p.nu > 0 else t
    return p.c_mu * p.l_mu_norm * (p.alpha * t + p.beta * decay)


def _log_expm1(x: float) -> float:
    if x <= 0:
        return -math.inf
    if x > 30:
        return x + math.log1p(-math.exp(-x))
    return math.log(math.expm1(x))


def log_lr_envelope(t: float, dist: float, p: EnvelopeParams) -> float:
    """Natural log of :func:`lr_envelope`; finite where the envelope itself overflows."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if p.prefactor == 0:
        return -math.inf
    return math.log(p.prefactor) + _log_expm1(integrated_velocity(t, p)) - p.mu * dist


def lr_envelope(t: float, dist: float, p: EnvelopeParams) -> float:
    """Time-dependent-velocity bound on ``||[exp(tL)A, B]||``.

    Returns ``inf`` when the value exceeds the float range;
    :func:`log_lr_envelope` stays finite there.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    x = integrated_velocity(t, p)
    if x == 0:
        return 0.0
    log_value = log_lr_envelope(t, dist, p)
    if log_value > 709.0:
        return math.inf
    return p.prefactor * math.expm1(x) * math.exp(-p.mu * dist)


def horizon_plateau(dist: float, p: EnvelopeParams) -> float:
    """Limit of the envelope as ``t -> inf`` when ``alpha = 0``."""
    if p.alpha > 0:
        return math.inf
    x = p.c_mu * p.l_mu_norm * p.beta / p.nu if p.beta > 0 else 0.0
    if x > 709.0:
        return math.inf
    return p.prefactor * math.expm1(x) * math.exp(-p.mu * dist)


def plateau_time(eps: float, dist: float, p: EnvelopeParams) -> float:
    """Smallest T with ``plateau - envelope(t) <= eps`` for all ``t >= T`` (``alpha = 0``)."""
    if p.alpha > 0:
        raise ValueError("no plateau when alpha > 0")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if p.beta == 0:
        return 0.0
    x_inf = p.c_mu * p.l_mu_norm * p.beta / p.nu
    c = p.prefactor * math.exp(-p.mu * dist)
    # need x(T) >= log(exp(x_inf) - eps / c)
    ratio = eps / c * math.exp(-x_inf)
    if ratio >= 1 - math.exp(-x_inf):
        return 0.0
    target = x_inf + math.log1p(-ratio)
    frac = 1 - target / x_inf
    return -math.log(frac) / p.nu


@dataclass(frozen=True)
class LocalizationParams:
    lam: float
    v: float
    xi: float = 1.0
    c_prime: float = 1.0

    def __post_init__(self):
        if min(self.lam, self.v, self.xi, self.c_prime) <= 0:
            raise ValueError("localization parameters must be positive")

    @classmethod
    def from_model(cls, gamma: float, h_norm_max: float, xi: float = 1.0,
                   c_prime: float = 1.0) -> "LocalizationParams":
        """``lambda = gamma`` and ``v = 2 max ||h||``."""
        return cls(gamma, 2 * h_norm_max, xi, c_prime)


def localization_envelope(t: float, dist: float, p: LocalizationParams, norm_a: float = 1.0,
                          norm_b: float = 1.0) -> float:
    """``C' ||A|| ||B|| exp((-lambda t + v t - d) / xi)``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return p.c_prime * norm_a * norm_b * math.exp((-p.lam * t + p.v * t - dist) / p.xi)


def clustering_envelope(dist: float, xi: float, v: float, lambda_gap: float, norm_a: float = 1.0,
                        norm_b: float = 1.0) -> float:
    """``||A|| ||B|| exp(-d / (xi + v / lambda))``.

    ``xi = v = 0`` (a light cone with no signal at all) gives the limit
    ``||A|| ||B||`` at ``d = 0`` and zero beyond.
    """
    if xi < 0 or v < 0 or lambda_gap <= 0:
        raise ValueError("need xi >= 0, v >= 0 and a positive gap")
    length = xi + v / lambda_gap
    if length == 0:
        return norm_a * norm_b if dist == 0 else 0.0
    return norm_a * norm_b * math.exp(-dist / length)


@dataclass(frozen=True)
class LightConeFit:
    c_prime: float
    v: float
    xi: float
    degenerate: bool = False


def fit_light_cone(t, dist, values, floor: float = 1e-14) -> LightConeFit:
    """Fit ``C' exp((v t - d) / xi)`` to commutator norms, then lift ``C'`` to cover every sample.

    A least-squares plane ``log N = c0 + c1 t + c2 d`` gives ``xi = -1/c2`` and
    ``v = -c1/c2``; samples below ``floor`` are ignored. When no sample
    exceeds ``floor`` the commutator vanishes to working precision and the
    degenerate cone ``C' = v = xi = 0`` is returned.
    """
    t = np.asarray(t, dtype=float)
    dist = np.asarray(dist, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > floor
    if not keep.any():
        return LightConeFit(0.0, 0.0, 0.0, degenerate=True)
    if keep.sum() < 3 or np.unique(dist[keep]).size < 2:
        raise ValueError("not enough informative samples for a light-cone fit")
    design = np.column_stack([np.ones(keep.sum()), t[keep], dist[keep]])
    coef, *_ = np.linalg.lstsq(design, np.log(values[keep]), rcond=None)
    if coef[2] >= 0:
        raise ValueError("commutator norms do not decay with distance")
    xi = -1.0 / coef[2]
    v = max(coef[1] * xi, 0.0)
    log_c = np.max(np.log(values[keep]) - (v * t[keep] - dist[keep]) / xi)
    return LightConeFit(float(math.exp(log_c)), float(v), float(xi))
