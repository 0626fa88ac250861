import warnings

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from lrlab.channels import (
    NotCompletelyPositiveError,
    channel_term,
    choi,
    choi_min_eigenvalue,
    covariant_random_term,
    depolarization_term,
    fixed_space_dimension,
    hamiltonian_term,
    is_completely_positive,
    kraus_channel,
    mixture_interaction,
    pauli_group,
    phi_family,
    phi_matrix,
    phi_mixture_term,
    psi_determinant_check,
    psi_family,
    psi_mixture_term,
    random_channel,
    tensor_super,
    tetrahedral_group,
    trace_preservation_residual,
    twirl_channel,
    uniform,
)
from lrlab.models import DEFAULT_PSI_LAMBDAS, DEFAULT_PSI_PAIRS
from lrlab.operators import (
    SIGMA_X,
    SIGMA_Z,
    Superoperator,
    apply_super,
    conjugation,
    embed,
    hs_adjoint,
    identity_super,
    random_unitary,
    spectral_norm,
    unvec,
    vec,
)

OMEGA = np.array([1, 0, 0, 1]) / np.sqrt(2)


def test_choi_of_identity():
    np.testing.assert_allclose(choi(identity_super(2, "schrodinger")), 2 * np.outer(OMEGA, OMEGA))


def test_choi_of_fully_depolarizing_channel():
    ch = phi_family(0.0, 0.0)
    np.testing.assert_allclose(choi(ch.schrodinger_action), np.eye(4) / 2, atol=1e-15)


def test_choi_block_structure():
    rng = np.random.default_rng(0)
    ch = random_channel(2, 3, rng)
    j = choi(ch.schrodinger_action)
    e01 = np.zeros((2, 2))
    e01[0, 1] = 1
    np.testing.assert_allclose(j[0:2, 2:4], ch(e01), atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_random_kraus_channel_is_cp_and_tp(seed):
    rng = np.random.default_rng(seed)
    ch = random_channel(3, 2 + seed, rng)
    assert choi_min_eigenvalue(ch.schrodinger_action) >= -1e-12
    assert trace_preservation_residual(ch.schrodinger_action) <= 1e-12


def test_kraus_channel_rejects_non_tp_set():
    with pytest.raises(ValueError, match="trace preserving"):
        kraus_channel([np.eye(2), SIGMA_X])


def test_phi_zero_is_fully_depolarizing():
    ch = phi_family(0.0, 0.0)
    rng = np.random.default_rng(1)
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    np.testing.assert_allclose(ch(a), np.trace(a) / 2 * np.eye(2), atol=1e-15)


def test_phi_inside_is_accepted():
    ch = phi_family(0.4, 0.4)
    assert choi_min_eigenvalue(ch.schrodinger_action) >= 0


def test_phi_outside_is_rejected_with_choi_value():
    with pytest.raises(NotCompletelyPositiveError) as info:
        phi_family(0.6, 0.6)
    assert info.value.min_eigenvalue < 0


def test_phi_boundary_is_rejected():
    with pytest.raises(NotCompletelyPositiveError):
        phi_family(0.5, -0.5)


def test_phi_rule_alone_does_not_give_cp():
    # |lambda| + |t| < 1 but 2|lambda| + t^2 > 1
    with pytest.raises(NotCompletelyPositiveError) as info:
        phi_family(0.6, 0.0)
    assert info.value.min_eigenvalue == pytest.approx(-0.1)


def test_phi_choi_spectrum_closed_form():
    lam, t = 0.3, -0.45
    evals = np.sort(np.linalg.eigvalsh(choi(phi_matrix(lam, t))))
    root = np.hypot(lam, t)
    ref = np.sort([(1 + lam + root) / 2, (1 + lam - root) / 2,
                   (1 - lam + root) / 2, (1 - lam - root) / 2])
    np.testing.assert_allclose(evals, ref, atol=1e-14)


def test_phi_family_acceptance_equals_choi_test_on_grid():
    grid = np.linspace(-1, 1, 41)
    for lam in grid:
        for t in grid:
            if abs(abs(lam) + abs(t) - 1) <= 1e-6:
                continue
            psd = choi_min_eigenvalue(phi_matrix(lam, t)) >= -1e-12
            try:
                phi_family(lam, t)
                accepted = True
            except NotCompletelyPositiveError:
                accepted = False
            assert accepted == psd, (lam, t)


def test_psi_zero_and_dephasing():
    rng = np.random.default_rng(2)
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    np.testing.assert_allclose(psi_family(0.0, 0.0)(a), np.trace(a) / 2 * np.eye(2), atol=1e-15)
    with pytest.warns(UserWarning, match="boundary"):
        deph = psi_family(1.0, 0.0, strict=False)
    np.testing.assert_allclose(deph(a), np.diag(np.diag(a)), atol=1e-15)
    with pytest.raises(ValueError):
        psi_family(1.0, 0.0)


def test_psi_interior_point_is_a_channel():
    ch = psi_family(0.3, 0.2)
    assert trace_preservation_residual(ch.schrodinger_action) <= 1e-12
    assert is_completely_positive(ch.schrodinger_action)


def test_pauli_twirl_is_fully_depolarizing():
    ch = twirl_channel(uniform(pauli_group()))
    for i in range(2):
        for j in range(2):
            e = np.zeros((2, 2))
            e[i, j] = 1
            np.testing.assert_allclose(ch(e), (i == j) * np.eye(2) / 2, atol=1e-15)


def test_single_element_twirl_is_conjugation():
    rng = np.random.default_rng(3)
    u = random_unitary(3, rng)
    ch = twirl_channel([(1.0, u)])
    a = rng.normal(size=(3, 3))
    np.testing.assert_allclose(ch(a), u @ a @ u.conj().T, atol=1e-13)


@pytest.mark.parametrize("group", [pauli_group(), tetrahedral_group()])
def test_group_twirl_is_idempotent(group):
    m = twirl_channel(uniform(group)).schrodinger_action
    np.testing.assert_allclose((m @ m).matrix, m.matrix, atol=1e-13)


def test_twirl_rejects_bad_input():
    with pytest.raises(ValueError, match="non-unitary"):
        twirl_channel([(1.0, 2 * np.eye(2))])
    with pytest.raises(ValueError, match="sum to one"):
        twirl_channel([(0.5, np.eye(2))])


def test_tetrahedral_group_closed_under_products():
    group = tetrahedral_group()
    assert len(group) == 12
    keys = {(np.round(g.real, 12) + 0.0).tobytes() for g in group}
    for a in group:
        for b in group:
            assert (np.round((a @ b).real, 12) + 0.0).tobytes() in keys


def test_tensor_super_factorizes():
    rng = np.random.default_rng(4)
    a, b = random_channel(2, 2, rng), random_channel(2, 2, rng)
    x, y = rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
    out = apply_super(tensor_super(a.schrodinger_action, b.schrodinger_action), np.kron(x, y))
    np.testing.assert_allclose(out, np.kron(a(x), b(y)), atol=1e-13)


def test_phi_mixture_is_unital_with_unique_fixed_point():
    term = phi_mixture_term()
    eye = np.eye(4)
    np.testing.assert_allclose(apply_super(term.heisenberg_action, eye), 0, atol=1e-12)
    np.testing.assert_allclose(apply_super(term.schrodinger_action, eye), 0, atol=1e-12)
    assert term.unique_fixed_point
    composite = term.schrodinger_action + identity_super(4, "schrodinger")
    assert fixed_space_dimension(composite) == 1
    evals, evecs = np.linalg.eig(composite.matrix)
    fixed = unvec(evecs[:, np.argmin(np.abs(evals - 1))])
    fixed /= np.trace(fixed)
    np.testing.assert_allclose(fixed, eye / 4, atol=1e-10)


def test_mixture_terms_are_dissipative():
    for term in [phi_mixture_term(), psi_mixture_term(DEFAULT_PSI_PAIRS, DEFAULT_PSI_LAMBDAS)]:
        m = term.heisenberg_action.matrix
        assert np.max(np.linalg.eigvalsh((m + m.conj().T) / 2)) <= 1e-12


def test_phi_mixture_rejects_bad_constraint():
    with pytest.raises(ValueError, match="r\\^2 = s\\^2"):
        phi_mixture_term(r=0.2, s=0.1)


def test_identity_component_gives_zero_term():
    ident = kraus_channel([np.eye(2)], label="id")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        term = mixture_interaction([(1.0, ident, ident)], require_unique=False)
    np.testing.assert_allclose(term.heisenberg_action.matrix, 0, atol=1e-15)
    assert not term.unique_fixed_point


def test_mixture_weight_errors():
    ch = phi_family(0.2, 0.1)
    with pytest.raises(ValueError, match="sum"):
        mixture_interaction([(0.5, ch, ch)], require_unique=False)
    with pytest.raises(ValueError, match="\\(0, 1\\]"):
        mixture_interaction([(1.5, ch, ch), (-0.5, ch, ch)], require_unique=False)


def test_mixture_uniqueness_error():
    deph = kraus_channel([np.diag([1, 0]), np.diag([0, 1])], label="dephase")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(ValueError, match="fixed space"):
            mixture_interaction([(1.0, deph, deph)])


def test_mixture_warns_on_unital_component():
    ch = phi_family(0.2, 0.0)
    with pytest.warns(UserWarning, match="unital"):
        mixture_interaction([(1.0, ch, ch)])


def test_psi_mixture_accepted_under_determinant_condition():
    assert psi_determinant_check(*DEFAULT_PSI_PAIRS)
    term = psi_mixture_term(DEFAULT_PSI_PAIRS, DEFAULT_PSI_LAMBDAS)
    assert term.unique_fixed_point
    np.testing.assert_allclose(apply_super(term.schrodinger_action, np.eye(4)), 0, atol=1e-12)


def test_psi_determinant_examples():
    zero = (0.0, 0.0)
    assert not psi_determinant_check(zero, zero, zero, zero)
    pairs = [(0.5, 0.5), (-0.5, 0.5), (0.5, -0.5), (-0.5, -0.5)]
    cols = [[(1 + a) * (1 + b), (1 + a) * (1 - b), (1 - a) * (1 + b), (1 - a) * (1 - b)]
            for a, b in pairs]
    expected = abs(np.linalg.det(np.array(cols).T)) > 1e-10
    assert psi_determinant_check(*pairs) == expected
    assert expected
    r = (0.3, -0.2)
    assert not psi_determinant_check(r, r, (0.1, 0.4), (-0.6, 0.2))


def test_hamiltonian_term_properties():
    h = np.kron(SIGMA_Z, SIGMA_Z)
    term = hamiltonian_term(h, (0, 1))
    m = term.heisenberg_action.matrix
    np.testing.assert_allclose(apply_super(term.heisenberg_action, embed(SIGMA_Z, 0, 2)), 0,
                               atol=1e-15)
    np.testing.assert_allclose(m + m.conj().T, 0, atol=1e-15)
    rng = np.random.default_rng(5)
    hr = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    hr = hr + hr.conj().T
    a = rng.normal(size=(4, 4))
    t = 0.7
    evolved = unvec(scipy.linalg.expm(t * hamiltonian_term(hr, (0, 1)).heisenberg_action.matrix)
                    @ vec(a))
    u = scipy.linalg.expm(-1j * t * hr)
    np.testing.assert_allclose(evolved, u.conj().T @ a @ u, atol=1e-12)


def test_hamiltonian_term_rejects_non_hermitian():
    with pytest.raises(ValueError):
        hamiltonian_term(np.array([[0, 1], [0, 0]]), 0)


def test_depolarization_term():
    term = depolarization_term(0, 0.7)
    np.testing.assert_allclose(apply_super(term.heisenberg_action, np.eye(2)), 0, atol=1e-15)
    np.testing.assert_allclose(apply_super(term.heisenberg_action, SIGMA_Z), -0.7 * SIGMA_Z)
    evals, evecs = np.linalg.eig(term.schrodinger_action.matrix)
    null = unvec(evecs[:, np.argmin(np.abs(evals))])
    np.testing.assert_allclose(null / np.trace(null), np.eye(2) / 2, atol=1e-14)
    with pytest.raises(ValueError):
        depolarization_term(0, 0.0)


def test_channel_term_generates_cp_semigroup():
    rng = np.random.default_rng(6)
    term = channel_term(random_channel(4, 2, rng), (0, 1), rate=0.5)
    for t in (0.1, 1.0, 5.0):
        m = Superoperator(scipy.linalg.expm(t * term.heisenberg_action.matrix), "heisenberg")
        assert choi_min_eigenvalue(m) >= -1e-10


@pytest.mark.parametrize("group", [pauli_group(), tetrahedral_group()], ids=["pauli", "A4"])
def test_covariant_random_term_is_covariant(group):
    rng = np.random.default_rng(7)
    term = covariant_random_term(group, (0, 1), rng)
    d = group[0].shape[0]
    m = term.heisenberg_action.matrix
    for g in group:
        for w in (np.kron(g, np.eye(d)), np.kron(np.eye(d), g)):
            c = conjugation(w).matrix
            assert spectral_norm(m @ c - c @ m) <= 1e-10


def test_heisenberg_of_channel_is_unital():
    rng = np.random.default_rng(8)
    ch = random_channel(3, 3, rng)
    np.testing.assert_allclose(apply_super(ch.heisenberg_action, np.eye(3)), np.eye(3), atol=1e-13)
    assert hs_adjoint(ch.heisenberg_action).picture == "schrodinger"


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.99, 0.99), st.floats(-0.99, 0.99))
def test_phi_family_decision_matches_closed_form(lam, t):
    cp = 2 * abs(lam) + t * t <= 1 - 1e-9
    boundary = abs(2 * abs(lam) + t * t - 1) <= 1e-9 or abs(abs(lam) + abs(t) - 1) <= 1e-9
    if boundary:
        return
    try:
        phi_family(lam, t)
        accepted = True
    except NotCompletelyPositiveError:
        accepted = False
    assert accepted == (cp and abs(lam) + abs(t) < 1)
