import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tbqkd.quantum import (
    Convention,
    EveAttack,
    InvalidAttack,
    PreparedState as S,
    SimpleOutcome as B,
    TimebinOutcome as T,
    cond_prob_simple,
    cond_prob_table,
    cond_prob_timebin_direct,
    cond_prob_timebin_scaled,
    make_identity_attack,
    make_intercept_resend_attack,
    make_phase_flip_attack,
    povm_elements,
    povm_prob,
    sample_random_attack,
)

Z_MEAS = (B.B0, B.B1, B.NO_DETECT)
X_MEAS = (B.BPLUS, B.BMINUS, B.NO_DETECT)


def test_identity_attack_layout():
    att = make_identity_attack(1)
    assert att.phi[0, 0] == pytest.approx([1.0])
    assert att.phi[1, 1] == pytest.approx([1.0])
    assert np.count_nonzero(att.phi) == 2


@pytest.mark.parametrize("dim", [1, 2, 5])
def test_identity_residuals_zero(dim):
    assert max(make_identity_attack(dim).unitarity_residuals()) == 0.0


def test_identity_keeps_z_bit():
    assert cond_prob_timebin_direct(make_identity_attack(4), S.Z0, T.T0) == pytest.approx(0.25)
    assert cond_prob_simple(make_identity_attack(4), S.Z0, B.B0) == pytest.approx(1.0)


def test_intercept_resend_basics():
    att = make_intercept_resend_attack()
    assert max(att.unitarity_residuals()) == 0.0
    assert cond_prob_simple(att, S.Z0, B.B0) == 1.0
    assert cond_prob_simple(att, S.Z0, B.B1) == 0.0
    assert cond_prob_simple(att, S.XPLUS, B.BMINUS) == pytest.approx(0.5)


def test_phase_flip_sends_plus_to_minus():
    assert cond_prob_simple(make_phase_flip_attack(), S.XPLUS, B.BMINUS) == pytest.approx(1.0)


def test_identity_plus_never_gives_minus():
    assert cond_prob_simple(make_identity_attack(), S.XPLUS, B.BMINUS) == 0.0


def test_random_attack_is_isometry():
    att = sample_random_attack(4, 0.3, rng_seed=1)
    assert max(att.unitarity_residuals()) <= 1e-12
    att.validate()


def test_random_attack_normalised_outcomes():
    att = sample_random_attack(1, 0.0, rng_seed=7)
    for a in S:
        for meas in (Z_MEAS, X_MEAS):
            assert sum(cond_prob_simple(att, a, b) for b in meas) == pytest.approx(1.0, abs=1e-12)
        timebin = sum(cond_prob_timebin_direct(att, a, b) for b in T)
        assert timebin == pytest.approx(1.0, abs=1e-12)


def test_random_attack_deterministic():
    a = sample_random_attack(3, 0.5, rng_seed=42)
    b = sample_random_attack(3, 0.5, rng_seed=42)
    np.testing.assert_array_equal(a.phi, b.phi)


def test_zero_loss_weight_has_no_loss_block():
    att = sample_random_attack(3, 0.0, rng_seed=3)
    assert np.all(att.phi[:, 2] == 0)


@pytest.mark.parametrize("dim, w", [(0, 0.1), (2, 1.0), (2, -0.1)])
def test_random_attack_rejects_bad_args(dim, w):
    with pytest.raises(InvalidAttack):
        sample_random_attack(dim, w, rng_seed=0)


def test_bad_shape_rejected():
    with pytest.raises(InvalidAttack):
        EveAttack(np.zeros((2, 2, 1)))


def test_non_isometry_rejected():
    with pytest.raises(InvalidAttack):
        EveAttack(np.ones((2, 3, 1))).validate()


def test_timebin_direct_identity_values():
    att = make_identity_attack()
    assert cond_prob_timebin_direct(att, S.XPLUS, T.T1) == pytest.approx(0.0, abs=1e-15)
    assert cond_prob_timebin_direct(att, S.XPLUS, T.T0) == pytest.approx(1 / 8)
    assert cond_prob_timebin_direct(att, S.Z0, T.T0) == pytest.approx(1 / 4)


def test_timebin_scaled_identity_values():
    att = make_identity_attack()
    assert cond_prob_timebin_scaled(att, S.Z0, T.T0) == pytest.approx(0.5)
    assert cond_prob_timebin_scaled(att, S.XPLUS, T.T0) == pytest.approx(0.25)


@pytest.mark.parametrize("seed", range(10))
def test_scaled_is_twice_direct(seed):
    att = sample_random_attack(1 + seed % 5, 0.1 * (seed % 9), rng_seed=seed)
    for a in (S.Z0, S.Z1, S.XPLUS):
        for b in (T.T0, T.T1, T.T2):
            assert cond_prob_timebin_scaled(att, a, b) == pytest.approx(
                2 * cond_prob_timebin_direct(att, a, b), abs=1e-12
            )


def test_scaled_rejects_minus_state():
    with pytest.raises(ValueError):
        cond_prob_timebin_scaled(make_identity_attack(), S.XMINUS, T.T0)


def test_povm_printed_coefficient_and_spectrum():
    povm = povm_elements()
    assert povm.t0[1, 1] == 0.25
    assert np.sort(np.linalg.eigvalsh(povm.t1)) == pytest.approx([0.0, 0.0, 0.5], abs=1e-12)


def test_povm_complete_and_positive():
    povm = povm_elements()
    np.testing.assert_allclose(sum(povm.elements()), np.eye(3), atol=1e-12)
    for m in povm.elements():
        np.testing.assert_allclose(m, m.conj().T, atol=1e-15)
        assert np.linalg.eigvalsh(m).min() >= -1e-12


def test_povm_identity_values():
    att = make_identity_attack()
    assert povm_prob(att, S.Z0, T.T0) == pytest.approx(0.25)
    assert povm_prob(att, S.XPLUS, T.T1) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(
    dim=st.integers(1, 8),
    w=st.floats(0.0, 0.9),
    seed=st.integers(0, 2**32 - 1),
)
def test_povm_matches_amplitudes(dim, w, seed):
    att = sample_random_attack(dim, w, rng_seed=seed)
    for a in S:
        for b in T:
            assert povm_prob(att, a, b) == pytest.approx(cond_prob_timebin_direct(att, a, b), abs=1e-12)


def test_table_row_sums():
    att = sample_random_attack(2, 0.4, rng_seed=11)
    tab = cond_prob_table(att, "timebin", Convention.DIRECT)
    for a in S:
        assert tab.row_sum(a) == pytest.approx(1.0, abs=1e-12)
    simple = cond_prob_table(att, "simple")
    assert simple[(S.Z0, B.B0)] == pytest.approx(cond_prob_simple(att, S.Z0, B.B0))


def test_table_rejects_scaled_simple():
    with pytest.raises(ValueError):
        cond_prob_table(make_identity_attack(), "simple", Convention.SCALED)
