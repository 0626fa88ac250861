import warnings

import numpy as np
import pytest
import scipy.linalg

from lrlab.channels import (
    LindbladTerm,
    depolarization_term,
    hamiltonian_term,
    random_channel,
    channel_term,
)
from lrlab.dynamics import (
    DENSE_LIMIT,
    EvolutionPlan,
    LatticeModel,
    MatrixFreeGenerator,
    SizeLimitError,
    assemble,
    commutator_profile,
    correlation,
    dissipative_gap,
    evolve,
    evolve_grid,
    frustration_free_check,
    frustration_residuals,
    restricted_generator,
    steady_state,
    support_distance,
    translate,
    ultra_locality_profile,
    ultra_locality_residual,
)
from lrlab.models import (
    covariant_chain,
    phi_mixture_chain,
    random_bond_hamiltonians,
    random_chain,
    localization_chain,
)
from lrlab.operators import (
    SIGMA_X,
    SIGMA_Z,
    DimensionError,
    embed,
    embed_super,
    random_hermitian,
    spectral_norm,
    trace_norm,
    unvec,
    vec,
)

DENSE = EvolutionPlan("dense_expm")


def random_state(dim, rng):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def test_model_validation():
    term = depolarization_term(0, 1.0)
    with pytest.raises(DimensionError):
        LatticeModel(2, 3, [term])
    with pytest.raises(DimensionError):
        LatticeModel(2, 2, [term.shifted(2)])
    with pytest.raises(DimensionError):
        LatticeModel(3, 2, [hamiltonian_term(np.eye(4), (0, 2))], range=1)
    bad = LindbladTerm((0,), term.scaled(-1.0).heisenberg_action, "anti")
    with pytest.raises(ValueError):
        LatticeModel(2, 2, [bad])


def test_generator_is_unital():
    model = random_chain(3, np.random.default_rng(0))
    l = assemble(model).matrix
    assert np.max(np.abs(l @ vec(np.eye(8)))) <= 1e-12


def test_assemble_empty_and_single_term():
    np.testing.assert_array_equal(assemble(LatticeModel(2, 2, [])).matrix, np.zeros((16, 16)))
    term = depolarization_term(1, 0.4)
    a = np.random.default_rng(1).normal(size=(4, 4))
    got = unvec(assemble(LatticeModel(2, 2, [term])).matrix @ vec(a))
    ref = unvec(embed_super(term.heisenberg_action, (1,), 2).matrix @ vec(a))
    np.testing.assert_allclose(got, ref, atol=1e-14)
    x = np.random.default_rng(2).normal(size=(2, 2))
    y = np.random.default_rng(3).normal(size=(2, 2))
    np.testing.assert_allclose(unvec(assemble(LatticeModel(2, 2, [term])).matrix @ vec(np.kron(x, y))),
                               np.kron(x, -0.4 * (y - np.trace(y) / 2 * np.eye(2))), atol=1e-14)


def test_assemble_is_linear_in_terms():
    rng = np.random.default_rng(4)
    t1 = channel_term(random_channel(4, 2, rng), (0, 1))
    t2 = channel_term(random_channel(4, 2, rng), (1, 2))
    both = assemble(LatticeModel(3, 2, [t1, t2])).matrix
    single = assemble(LatticeModel(3, 2, [t1])).matrix + assemble(LatticeModel(3, 2, [t2])).matrix
    np.testing.assert_allclose(both, single, atol=1e-14)


def test_assemble_size_limit_and_sparse():
    model = phi_mixture_chain(7)
    with pytest.raises(SizeLimitError):
        assemble(model)
    sparse = assemble(phi_mixture_chain(3), sparse=True)
    np.testing.assert_allclose(sparse.toarray(), assemble(phi_mixture_chain(3)).matrix, atol=1e-15)


def test_restricted_generator():
    model = phi_mixture_chain(4)
    np.testing.assert_allclose(restricted_generator(model, []).matrix, assemble(model).matrix)
    assert not restricted_generator(model, range(4)).matrix.any()
    assert len(model.without(0).terms) == len(model.terms) - 1
    assert [t.support for t in model.without([0]).terms] == [(1, 2), (2, 3)]


def test_translate():
    terms = translate(depolarization_term(0, 1.0), 3)
    assert [t.support for t in terms] == [(0,), (1,), (2,)]
    bonds = translate(hamiltonian_term(np.kron(SIGMA_X, SIGMA_X), (0, 1)), 4, [1])
    assert [t.support for t in bonds] == [(1, 2)]


def test_matrix_free_matches_dense_generator():
    model = random_chain(3, np.random.default_rng(5))
    a = np.random.default_rng(6).normal(size=(8, 8)) + 0j
    dense = assemble(model).matrix
    np.testing.assert_allclose(MatrixFreeGenerator(model)(a), unvec(dense @ vec(a)), atol=1e-12)
    np.testing.assert_allclose(MatrixFreeGenerator(model, "schrodinger")(a),
                               unvec(dense.conj().T @ vec(a)), atol=1e-12)


@pytest.mark.parametrize("plan", [EvolutionPlan(), DENSE], ids=["integrate", "dense"])
def test_identity_is_fixed(plan):
    model = random_chain(3, np.random.default_rng(7))
    for t in (0.3, 2.0):
        assert spectral_norm(evolve(model, np.eye(8), t, plan) - np.eye(8)) <= 1e-10


def test_hamiltonian_chain_is_unitary_conjugation():
    rng = np.random.default_rng(8)
    bonds = random_bond_hamiltonians(3, rng)
    model = localization_chain(3, 0.0, bonds)
    h = sum(embed(b, (j, j + 1), 3) for j, b in enumerate(bonds))
    a = embed(SIGMA_Z, 0, 3)
    t = 1.3
    u = scipy.linalg.expm(1j * t * h)
    ref = u @ a @ u.conj().T
    np.testing.assert_allclose(evolve(model, a, t), ref, atol=1e-8)
    np.testing.assert_allclose(evolve(model, a, t, DENSE), ref, atol=1e-12)


def test_dense_and_integrate_agree():
    rng = np.random.default_rng(9)
    model = random_chain(4, rng)
    a = embed(random_hermitian(2, rng), 0, 4)
    diff = evolve(model, a, 2.0) - evolve(model, a, 2.0, DENSE)
    assert spectral_norm(diff) <= 1e-8


def test_evolution_invariants_on_random_models():
    for seed in range(3):
        rng = np.random.default_rng(100 + seed)
        model = random_chain(3, rng)
        a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        a /= spectral_norm(a)
        s, t = 0.4, 0.9
        at = evolve(model, a, t)
        assert spectral_norm(at) <= 1 + 1e-9
        two_step = evolve(model, evolve(model, a, t), s)
        assert spectral_norm(evolve(model, a, s + t) - two_step) <= 1e-8
        rho = random_state(8, rng)
        assert abs(np.trace(evolve(model, rho, t, picture="schrodinger")) - 1) <= 1e-10


def test_evolution_errors():
    model = phi_mixture_chain(3)
    with pytest.raises(ValueError):
        evolve(model, np.eye(8), -1.0)
    with pytest.raises(ValueError):
        evolve_grid(model, np.eye(8), [1.0, 0.5])
    with pytest.raises(DimensionError):
        evolve(model, np.eye(4), 1.0)
    with pytest.raises(SizeLimitError):
        evolve(phi_mixture_chain(7), np.eye(128), 1.0, DENSE)
    with pytest.raises(ValueError):
        EvolutionPlan("rk4")
    assert DENSE_LIMIT == 4096


def test_commutator_profile_basic_bounds():
    rng = np.random.default_rng(10)
    model = random_chain(4, rng)
    recs = commutator_profile(model, SIGMA_X, 0, SIGMA_Z, [2, 3], [0.0, 0.5, 1.0, 2.0])
    assert len(recs) == 8
    for r in recs:
        assert r.empirical_norm <= 2 + 1e-9
        if r.t == 0.0:
            assert r.empirical_norm == 0.0
    assert {r.distance for r in recs} == {2, 3}
    assert max(r.empirical_norm for r in recs) > 1e-6
    with pytest.raises(ValueError, match="disjoint"):
        commutator_profile(model, SIGMA_X, 0, SIGMA_Z, [0], [0.0])


def test_commutator_profile_vanishes_on_mixture_chain():
    # products of unital one-site channels keep every operator on its own support
    model = phi_mixture_chain(5)
    recs = commutator_profile(model, SIGMA_X, 0, SIGMA_X, [2, 4], np.linspace(0, 5, 6))
    assert max(r.empirical_norm for r in recs) <= 1e-12


def test_commutator_profile_envelope_column():
    model = phi_mixture_chain(3)
    recs = commutator_profile(model, SIGMA_Z, 0, SIGMA_Z, 2, [0.0, 1.0], envelope=lambda t, d: t + d)
    assert [r.envelope_value for r in recs] == [2.0, 3.0]
    assert np.isnan(commutator_profile(model, SIGMA_Z, 0, SIGMA_Z, 2, [1.0])[0].envelope_value)


def test_support_distance():
    assert support_distance(0, 3) == 3
    assert support_distance((0, 1), (3, 4)) == 2


def test_steady_state_mixture_is_uniform():
    ss = steady_state(phi_mixture_chain(4))
    assert ss.unique
    np.testing.assert_allclose(ss.rho, np.eye(16) / 16, atol=1e-10)
    assert ss.residual <= 1e-10


def test_steady_state_depolarizer_is_uniform():
    model = LatticeModel(2, 2, [depolarization_term(j, 0.5) for j in range(2)])
    np.testing.assert_allclose(steady_state(model).rho, np.eye(4) / 4, atol=1e-12)


def test_steady_state_dense_matches_long_time_evolution():
    rng = np.random.default_rng(11)
    model = random_chain(3, rng)
    ss = steady_state(model, "dense")
    gap = dissipative_gap(model)
    rho0 = random_state(8, rng)
    late = evolve(model, rho0, 50 / gap, DENSE, picture="schrodinger")
    assert trace_norm(late - ss.rho) <= 1e-6
    power = steady_state(model, "power", gap_estimate=gap)
    assert trace_norm(power.rho - ss.rho) <= 1e-6


def test_steady_state_bad_method():
    with pytest.raises(ValueError):
        steady_state(phi_mixture_chain(2), "magic")


def test_gap_of_single_depolarizer():
    model = LatticeModel(1, 2, [depolarization_term(0, 0.7)])
    assert dissipative_gap(model) == pytest.approx(0.7)


def test_gap_of_hamiltonian_model_is_flagged():
    model = LatticeModel(2, 2, [hamiltonian_term(np.kron(SIGMA_X, SIGMA_Z), (0, 1))])
    with pytest.warns(UserWarning, match="no dissipative gap"):
        assert dissipative_gap(model) == 0.0


def test_gap_scales_with_rates():
    model = random_chain(3, np.random.default_rng(12))
    assert dissipative_gap(model.scaled(3.0)) == pytest.approx(3 * dissipative_gap(model), rel=1e-8)


def test_frustration_freeness():
    model = phi_mixture_chain(3)
    assert frustration_free_check(model, np.eye(8) / 8)
    h = hamiltonian_term(np.kron(SIGMA_X, SIGMA_X), (0, 1))
    rho = np.kron(np.diag([1.0, 0.0]), np.eye(2) / 2)
    hm = LatticeModel(2, 2, [h])
    assert not frustration_free_check(hm, rho)
    assert frustration_residuals(hm, rho)[0] > 0.1
    assert frustration_free_check(LatticeModel(2, 2, []), rho)


def test_correlations():
    model = phi_mixture_chain(3)
    rng = np.random.default_rng(13)
    r1, r2, r3 = (random_state(2, rng) for _ in range(3))
    product = np.kron(np.kron(r1, r2), r3)
    assert correlation(model, product, SIGMA_X, 0, SIGMA_Z, 2) <= 1e-14
    assert correlation(model, np.eye(8) / 8, SIGMA_Z, 0, SIGMA_Z, 1) <= 1e-15
    rho = random_state(8, rng)
    a, b = embed(SIGMA_X, 0, 3), embed(SIGMA_Z, 2, 3)
    ref = abs(np.trace(rho @ a @ b) - np.trace(rho @ a) * np.trace(rho @ b))
    assert correlation(model, rho, SIGMA_X, 0, SIGMA_Z, 2) == pytest.approx(ref, rel=1e-12)
    with pytest.raises(DimensionError):
        correlation(model, np.eye(4), SIGMA_X, 0, SIGMA_Z, 2)


def test_ultra_locality_covariant_chain_small():
    rng = np.random.default_rng(14)
    model = covariant_chain(3, rng)
    a = random_hermitian(3, rng)
    assert ultra_locality_residual(model, a, 0, 0.0) == 0.0
    for t, r in zip([0.5, 2.0], ultra_locality_profile(model, a, 1, [0.5, 2.0])):
        assert r <= 1e-8
        assert ultra_locality_residual(model, a, 1, t) <= 1e-8


def test_ultra_locality_fails_for_generic_hamiltonian():
    rng = np.random.default_rng(15)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model = localization_chain(4, 0.0, random_bond_hamiltonians(4, rng))
    assert ultra_locality_residual(model, SIGMA_Z, 0, 2.0) > 1e-3
