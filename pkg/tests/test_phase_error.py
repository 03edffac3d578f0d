import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tbqkd.phase_error import (
    JointProbSet,
    NoStatistics,
    SimpleProbSet,
    TimebinProbSet,
    basis_probs,
    equivalent_side_relation,
    ex_ideal,
    ex_ideal_closed_form,
    ex_joint,
    ex_simple,
    ex_timebin,
    joint_coefficients,
    pair_sum_identity,
)
from tbqkd.quantum import (
    EveAttack,
    make_identity_attack,
    make_intercept_resend_attack,
    make_phase_flip_attack,
    sample_random_attack,
)

attacks = st.builds(
    sample_random_attack,
    ancilla_dim=st.integers(1, 8),
    loss_weight=st.floats(0.0, 0.9),
    rng_seed=st.integers(0, 2**32 - 1),
)


def _total_loss() -> EveAttack:
    phi = np.zeros((2, 3, 2), dtype=complex)
    phi[0, 2, 0] = 1.0
    phi[1, 2, 1] = 1.0
    return EveAttack(phi)


@pytest.mark.parametrize(
    "make, expected",
    [(make_identity_attack, 0.0), (make_intercept_resend_attack, 0.5), (make_phase_flip_attack, 1.0)],
)
def test_ideal_canonical(make, expected):
    assert ex_ideal(make()).raw == pytest.approx(expected, abs=1e-14)


def test_ideal_total_loss_is_distinct_condition():
    with pytest.raises(NoStatistics):
        ex_ideal(_total_loss())
    with pytest.raises(NoStatistics):
        ex_ideal_closed_form(_total_loss())


@pytest.mark.parametrize("make, expected", [(make_identity_attack, 0.0), (make_intercept_resend_attack, 0.5)])
def test_closed_form_canonical(make, expected):
    assert ex_ideal_closed_form(make()).raw == pytest.approx(expected, abs=1e-14)


@settings(max_examples=100, deadline=None)
@given(attacks)
def test_closed_form_matches_ideal(att):
    assert ex_ideal_closed_form(att).raw == pytest.approx(ex_ideal(att).raw, abs=1e-10)


def test_doubled_closed_form_wrong_for_intercept_resend():
    assert ex_ideal_closed_form(make_intercept_resend_attack(), doubled=True).raw == pytest.approx(1.0)


def test_simple_identity():
    est = ex_simple(SimpleProbSet.from_attack(make_identity_attack()))
    assert est.m_argument == pytest.approx(0.0, abs=1e-15)
    assert est.raw == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize(
    "make, first, m_term", [(make_intercept_resend_attack, 0.25, 0.25), (make_phase_flip_attack, 0.5, 0.5)]
)
def test_simple_hand_values(make, first, m_term):
    est = ex_simple(SimpleProbSet.from_attack(make()))
    assert est.first_term == pytest.approx(first)
    assert est.m_argument == pytest.approx(m_term)
    assert est.raw == pytest.approx(first + m_term)


def test_simple_zero_denominator():
    with pytest.raises(NoStatistics):
        ex_simple(SimpleProbSet.from_attack(_total_loss()))


def test_timebin_identity_table():
    tb = TimebinProbSet.from_attack(make_identity_attack())
    assert tb.side_sum_z == pytest.approx(1.0)
    assert tb.t1_given_z == pytest.approx(1.0)
    assert tb.side_given_plus == pytest.approx(0.5)
    est = ex_timebin(tb)
    assert est.m_argument == pytest.approx(0.0, abs=1e-15)
    assert est.raw == pytest.approx(0.0, abs=1e-15)


def test_timebin_intercept_resend():
    est = ex_timebin(TimebinProbSet.from_attack(make_intercept_resend_attack()))
    assert est.first_term == pytest.approx(0.25)
    assert est.m_argument == pytest.approx(0.25)


def test_timebin_zero_denominator():
    with pytest.raises(NoStatistics):
        ex_timebin(TimebinProbSet.from_attack(_total_loss()))


@settings(max_examples=100, deadline=None)
@given(attacks)
def test_timebin_matches_ideal(att):
    assert ex_timebin(TimebinProbSet.from_attack(att)).raw == pytest.approx(ex_ideal(att).raw, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(attacks, st.sampled_from([0.3, 0.5, 0.9]))
def test_joint_reduces_to_timebin(att, p_z):
    tb = TimebinProbSet.from_attack(att)
    ref = ex_timebin(tb).raw
    joint = JointProbSet.from_timebin(tb, p_z)
    assert ex_joint(joint).raw == pytest.approx(ref, abs=1e-10)


def test_joint_half_identity():
    tb = TimebinProbSet.from_attack(make_identity_attack())
    assert ex_joint(JointProbSet.from_timebin(tb, 0.5)).raw == pytest.approx(0.0, abs=1e-15)


def test_joint_mixed_side_exact_without_z_errors():
    # the mixed pairs reproduce the |+> side peaks only when Z inputs never
    # leak into the wrong side peak
    for att in (make_identity_attack(), make_intercept_resend_attack(), make_phase_flip_attack()):
        tb = TimebinProbSet.from_attack(att)
        for p_z in (0.3, 0.5, 0.9):
            joint = JointProbSet.from_timebin(tb, p_z)
            assert ex_joint(joint, side="mixed").raw == pytest.approx(ex_timebin(tb).raw, abs=1e-12)


def test_joint_first_term_zero_without_late_plus():
    tb = TimebinProbSet.from_attack(make_identity_attack())
    est = ex_joint(JointProbSet.from_timebin(tb, 0.7))
    assert est.first_term == 0.0


def test_joint_reused_alpha_breaks_reduction():
    tb = TimebinProbSet.from_attack(make_identity_attack())
    joint = JointProbSet.from_timebin(tb, 0.3)
    assert ex_joint(joint, reuse_alpha=True).m_argument != pytest.approx(0.0, abs=1e-6)


@pytest.mark.parametrize("p_z", [0.0, 1.0, -0.2])
def test_joint_rejects_bad_pz(p_z):
    with pytest.raises(ValueError):
        joint_coefficients(p_z)
    with pytest.raises(ValueError):
        basis_probs(p_z)


def test_joint_zero_denominator():
    tb = TimebinProbSet.from_attack(_total_loss())
    with pytest.raises(NoStatistics):
        ex_joint(JointProbSet.from_timebin(tb, 0.5))


def test_coefficients():
    alpha, beta, w = joint_coefficients(0.5)
    assert alpha == pytest.approx(0.125)
    assert beta == pytest.approx(0.125)
    assert w == pytest.approx(0.25)
    assert joint_coefficients(0.5, "mixed")[2] == pytest.approx(0.5)


def test_pair_sum_identity_values():
    att = make_identity_attack()
    left, right = pair_sum_identity(att, "0")
    assert left == pytest.approx(right)
    left, right = pair_sum_identity(att, "+")
    assert left == pytest.approx(0.5)
    assert right == pytest.approx(0.5)


@settings(max_examples=60, deadline=None)
@given(attacks, st.sampled_from("01+"))
def test_pair_sum_identity_random(att, state):
    left, right = pair_sum_identity(att, state)
    assert left == pytest.approx(right, abs=1e-12)


def test_side_relation_identity():
    left, right, defect = equivalent_side_relation(make_identity_attack())
    assert left == pytest.approx(0.5)
    assert right == pytest.approx(0.5)
    assert defect == 0.0


def test_side_relation_intercept_resend():
    left, right, defect = equivalent_side_relation(make_intercept_resend_attack())
    assert abs(left - right) <= 1e-12
    assert defect == 0.0


@settings(max_examples=60, deadline=None)
@given(attacks)
def test_side_relation_defect_accounts_for_gap(att):
    left, right, defect = equivalent_side_relation(att)
    assert left + defect == pytest.approx(right, abs=1e-12)
    assert defect >= 0.0
