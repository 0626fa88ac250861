"""Ready-made chains used by the experiments and the demos."""
from __future__ import annotations

import numpy as np

from .channels import (
    covariant_random_term,
    depolarization_term,
    dissipator_term,
    hamiltonian_term,
    phi_mixture_term,
    psi_mixture_term,
    random_lindblad_term,
    tetrahedral_group,
)
from .dynamics import LatticeModel, translate
from .operators import SIGMA_X, SIGMA_Z, random_hermitian

DEFAULT_PSI_PAIRS = ((0.5, 0.3), (-0.4, 0.2), (0.3, -0.5), (-0.2, -0.3))
DEFAULT_PSI_LAMBDAS = ((0.2, 0.3), (0.3, 0.2), (0.2, 0.2), (0.3, 0.3))


def phi_mixture_chain(n_sites: int, lambdas=(0.3, 0.2, 0.3, 0.2, 0.3, 0.2), r: float = 0.2,
                      s: float = 0.2, rate: float = 1.0) -> LatticeModel:
    """Nearest-neighbour chain of identical Phi-mixture interactions."""
    term = phi_mixture_term(lambdas, r, s)
    if rate != 1.0:
        term = term.scaled(rate)
    return LatticeModel(n_sites, 2, translate(term, n_sites))


def psi_mixture_chain(n_sites: int, pairs=DEFAULT_PSI_PAIRS, lambdas=DEFAULT_PSI_LAMBDAS) -> LatticeModel:
    term = psi_mixture_term(pairs, lambdas)
    return LatticeModel(n_sites, 2, translate(term, n_sites))


def random_bond_hamiltonians(n_sites: int, rng: np.random.Generator, h_norm: float = 1.0,
                             local_dim: int = 2) -> list[np.ndarray]:
    return [random_hermitian(local_dim**2, rng, norm=h_norm) for _ in range(n_sites - 1)]


def localization_chain(n_sites: int, gamma: float, bonds, local_dim: int = 2) -> LatticeModel:
    """``sum_j i[h_{j,j+1}, .] + sum_j D_j`` with one-site depolarizers of rate ``gamma``.

    ``gamma = 0`` leaves the purely Hamiltonian chain.
    """
    bonds = list(bonds)
    if len(bonds) != n_sites - 1:
        raise ValueError(f"need {n_sites - 1} bond Hamiltonians, got {len(bonds)}")
    terms = [hamiltonian_term(h, (j, j + 1), local_dim) for j, h in enumerate(bonds)]
    if gamma > 0:
        terms += [depolarization_term(j, gamma, local_dim) for j in range(n_sites)]
    return LatticeModel(n_sites, local_dim, terms)


def covariant_chain(n_sites: int, rng: np.random.Generator, group=None, n_kraus: int = 3,
                    rate: float = 1.0) -> LatticeModel:
    """Chain of group-covariant nearest-neighbour terms, independent per bond.

    The default group is the tetrahedral group acting on a qutrit.
    """
    group = tetrahedral_group() if group is None else group
    d = group[0].shape[0]
    terms = [covariant_random_term(group, (j, j + 1), rng, n_kraus, rate) for j in range(n_sites - 1)]
    return LatticeModel(n_sites, d, terms)


def clustering_chain(n_sites: int, gamma: float = 0.5, lambdas=(0.3, 0.2, 0.3, 0.2, 0.3, 0.2),
                     r: float = 0.2, s: float = 0.2) -> LatticeModel:
    """Phi-mixture bonds plus single-site depolarizers; every term fixes the uniform state."""
    term = phi_mixture_term(lambdas, r, s)
    terms = translate(term, n_sites) + [depolarization_term(j, gamma) for j in range(n_sites)]
    return LatticeModel(n_sites, 2, terms)


def random_chain(n_sites: int, rng: np.random.Generator, local_dim: int = 2, n_jumps: int = 2,
                 h_scale: float = 1.0) -> LatticeModel:
    """Independent random Lindblad terms on every bond."""
    terms = [random_lindblad_term((j, j + 1), rng, local_dim, n_jumps, h_scale)
             for j in range(n_sites - 1)]
    return LatticeModel(n_sites, local_dim, terms)


def crossed_dissipator_chain(n_sites: int = 4, gamma: float = 1.0) -> LatticeModel:
    """Two-site dissipators with incompatible jump operators on alternating bonds.

    Used as a counterexample to the commuting-projector assumption.
    """
    rot = (SIGMA_X + SIGMA_Z) / np.sqrt(2)
    jumps = [np.kron(SIGMA_X, SIGMA_X), np.kron(SIGMA_Z, rot)]
    terms = []
    for j in range(n_sites - 1):
        terms.append(dissipator_term([np.sqrt(gamma) * jumps[j % 2]], (j, j + 1)))
    return LatticeModel(n_sites, 2, terms)
