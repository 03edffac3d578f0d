import math

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from tbqkd.channel import ChannelParams, SourceConfig, simulate_counts
from tbqkd.decoy import (
    FiniteKeyEpsilons,
    InfeasibleCorrection,
    IntensitySettings,
    analyze_decoy,
    binary_entropy,
    d0_upper_from_01,
    d1_lower,
    d1_upper,
    delta,
    ex_upper_decoy,
    gamma,
    key_length,
    n_k_pm,
    security_overhead,
    tau_n,
)
from tbqkd.phase_error import NoStatistics

SET = IntensitySettings(0.5, 0.1, 0.7)
NOISELESS = dict(attenuation_db=10.0, e_mis=0.0)
NOISELESS_SETTINGS = IntensitySettings(0.6, 0.15, 0.75)


class _SingleIntensity:
    def __init__(self, k):
        self.k = k

    def items(self):
        return (("only", self.k, 1.0),)


def test_tau_single_intensity_vacuum():
    assert tau_n(_SingleIntensity(0.3), 0) == pytest.approx(math.exp(-0.3))


def test_tau_values():
    assert tau_n(SET, 0) == pytest.approx(0.7 * math.exp(-0.5) + 0.3 * math.exp(-0.1))
    assert tau_n(SET, 1) == pytest.approx(0.7 * 0.5 * math.exp(-0.5) + 0.3 * 0.1 * math.exp(-0.1))


@pytest.mark.parametrize("mu1, mu2, p", [(0.3, 0.3, 0.5), (0.1, 0.3, 0.5), (0.5, 0.1, 1.0), (0.5, -0.1, 0.5)])
def test_settings_validation(mu1, mu2, p):
    with pytest.raises(ValueError):
        IntensitySettings(mu1, mu2, p)


def test_n_k_pm_no_data():
    assert n_k_pm(0, 0, 0.5, 0.7, 1e-9, +1) == 0.0
    assert n_k_pm(0, 0, 0.5, 0.7, 1e-9, -1) == 0.0


def test_n_k_pm_eps_one():
    for sign in (+1, -1):
        assert n_k_pm(1000, 2000, 0.5, 0.7, 1.0, sign) == pytest.approx(math.exp(0.5) * 1000 / 0.7)


def test_n_k_pm_high_precision():
    mpmath.mp.dps = 50
    corr = mpmath.sqrt(mpmath.mpf(2000) / 2 * mpmath.log(1 / mpmath.mpf("1e-9")))
    scale = mpmath.exp(mpmath.mpf("0.5")) / mpmath.mpf("0.7")
    for sign in (+1, -1):
        ref = float(scale * (1000 + sign * corr))
        assert n_k_pm(1000, 2000, 0.5, 0.7, 1e-9, sign) == pytest.approx(ref, rel=1e-13)


@settings(max_examples=200, deadline=None)
@given(
    n_k=st.floats(0, 1e9),
    extra=st.floats(0, 1e9),
    k=st.floats(0.01, 1.0),
    p=st.floats(0.01, 0.99),
    eps=st.floats(1e-15, 1.0),
)
def test_n_k_pm_ordering(n_k, extra, k, p, eps):
    mid = math.exp(k) * n_k / p
    lo = n_k_pm(n_k, n_k + extra, k, p, eps, -1)
    hi = n_k_pm(n_k, n_k + extra, k, p, eps, +1)
    assert lo <= mid * (1 + 1e-12) and mid <= hi * (1 + 1e-12)


def test_delta_values():
    assert delta(0, 1e-9) == 0.0
    assert delta(1e6, 1.0) == 0.0
    assert delta(200, 1e-9) == pytest.approx(math.sqrt(100 * math.log(1e9)))


def test_d0_from_01():
    assert d0_upper_from_01(0, 0.1, 0.1, 1e-9) == 0.0
    assert d0_upper_from_01(100, 0.1, 0.1, 1e-9) == pytest.approx(100 + delta(100, 1e-9))
    with pytest.raises(ValueError):
        d0_upper_from_01(5, 0.1, 0.0, 1e-9)


def test_d1_bounds_zero_counts():
    assert d1_lower(0, 0, SET, 1e-9, 0.0) == 0.0
    assert d1_upper(0, 0, SET, 1.0) == 0.0


def test_d1_lower_needs_decoy():
    with pytest.raises(ValueError):
        d1_lower(10, 10, IntensitySettings(0.5, 0.0, 0.5), 0.1, 0.0)


@settings(max_examples=200, deadline=None)
@given(
    n1=st.floats(0, 1e8),
    n2=st.floats(0, 1e8),
    d0=st.floats(0, 1e6),
    eps=st.floats(1e-12, 1.0),
)
def test_d1_lower_below_upper(n1, n2, d0, eps):
    assert d1_lower(n1, n2, SET, eps, d0) <= d1_upper(n1, n2, SET, eps) + 1e-6


def _asymptotic(channel, settings, p_z=0.5, rounds=10**8):
    src = SourceConfig("wcp-decoy", p_z, rounds, settings)
    return simulate_counts(channel, src, round_counts=False)


@pytest.mark.parametrize("att, p_dc", [(0.0, 1e-10), (10.0, 1e-6), (30.0, 1e-5)])
def test_d1_asymptotic_brackets_truth(att, p_dc):
    res = _asymptotic(ChannelParams(attenuation_db=att, p_dc=p_dc), SET)
    counts = res.counts
    for events in (("z",), ("l0", "l1"), ("e00", "e11"), ("e0+", "e+1")):
        vac, single, _ = res.truth.split(*events)
        per = counts.per_intensity(*events)
        assert d1_lower(*per, SET, 1.0, vac) <= single * (1 + 1e-9)
        assert d1_upper(*per, SET, 1.0) >= single * (1 - 1e-9)


def test_vacuum_added_overshoots_truth():
    # dark-count heavy link: the vacuum contribution is large, so adding it
    # pushes the lower bound over the true single-photon count
    res = _asymptotic(ChannelParams(attenuation_db=30.0, p_dc=1e-4), SET)
    vac, single, _ = res.truth.split("z")
    per = res.counts.per_intensity("z")
    assert d1_lower(*per, SET, 1.0, vac) <= single
    assert d1_lower(*per, SET, 1.0, vac, add_vacuum=True) > single


def _noiseless_counts(p_z):
    return simulate_counts(
        ChannelParams(**NOISELESS), SourceConfig("wcp-decoy", p_z, 10**8, NOISELESS_SETTINGS)
    ).counts


@pytest.mark.parametrize("p_z", [0.5, 0.65])
def test_noiseless_phase_bound_small(p_z):
    pb = ex_upper_decoy(_noiseless_counts(p_z), NOISELESS_SETTINGS, FiniteKeyEpsilons().hoeffding)
    assert pb.value <= 0.02


def test_no_late_plus_gives_zero_first_term():
    counts = _noiseless_counts(0.5)
    assert counts.total("l+") == 0
    pb = ex_upper_decoy(counts, NOISELESS_SETTINGS, 1.0)
    assert pb.bounds["D1_lplus_upper"] == 0.0


def test_phase_bound_no_statistics():
    counts = simulate_counts(
        ChannelParams(attenuation_db=200.0, p_dc=0.0), SourceConfig("wcp-decoy", 0.5, 10**6, SET)
    ).counts
    with pytest.raises(NoStatistics):
        ex_upper_decoy(counts, SET, 1e-9)
    b = analyze_decoy(counts, SET)
    assert b.aborted and b.key_length == 0.0


def test_entropy_endpoints():
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == 1.0


def test_gamma_limits_and_symmetry():
    assert gamma(1e-9, 0.0, 1e5, 1e5) == 0.0
    assert gamma(1e-9, 1e-300, 1e5, 1e5) < 1e-140
    assert gamma(1e-9, 0.05, 1e4, 3e5) == gamma(1e-9, 0.05, 3e5, 1e4)


def test_gamma_high_precision():
    mpmath.mp.dps = 50
    a, b, c, d = mpmath.mpf("1e-9"), mpmath.mpf("0.05"), mpmath.mpf(10**5), mpmath.mpf(10**5)
    v = (c + d) * (1 - b) * b / (c * d * mpmath.log(2))
    ref = mpmath.sqrt(v * mpmath.log((c + d) / (c * d * (1 - b) * b) * 21**2 / a**2, 2))
    assert gamma(1e-9, 0.05, 1e5, 1e5) == pytest.approx(float(ref), rel=1e-12)


def test_gamma_infeasible():
    with pytest.raises(InfeasibleCorrection):
        gamma(1e-9, 0.05, 0.0, 1e5)
    with pytest.raises(InfeasibleCorrection):
        # log argument below 1 for a huge failure probability and tiny samples
        gamma(1e6, 0.5, 1e3, 1e3)


def test_key_length_zero_bounds():
    assert key_length(0.0, 0.0, 0.0, 0.0, 1e-9, 1e-9) == 0.0


def test_key_length_formula():
    ell = key_length(1e3, 1e6, 0.05, 1e4, 1e-9, 1e-9)
    ref = 1e3 + 1e6 * (1 - binary_entropy(0.05)) - 1e4 - 6 * math.log2(19 / 1e-9) - math.log2(2 / 1e-9)
    assert ell == pytest.approx(ref)
    assert security_overhead(1e-9, 1e-9) == pytest.approx(6 * math.log2(19e9) + math.log2(2e9))


def test_key_length_clamps_large_phase_error():
    assert key_length(0.0, 1e6, 0.7, 0.0, 1e-9, 1e-9) == 0.0


@settings(max_examples=200, deadline=None)
@given(
    d0=st.floats(0, 1e6),
    d1=st.floats(0, 1e8),
    ez=st.floats(0, 0.6),
    lam=st.floats(0, 1e7),
    bump=st.floats(0, 1e5),
    dez=st.floats(0, 0.1),
)
def test_key_length_monotone(d0, d1, ez, lam, bump, dez):
    base = key_length(d0, d1, ez, lam, 1e-9, 1e-9)
    assert key_length(d0 + bump, d1, ez, lam, 1e-9, 1e-9) >= base
    assert key_length(d0, d1 + bump, ez, lam, 1e-9, 1e-9) >= base
    assert key_length(d0, d1, ez + dez, lam, 1e-9, 1e-9) <= base
    assert key_length(d0, d1, ez, lam + bump, 1e-9, 1e-9) <= base
    assert key_length(d0, d1, ez, lam, 1e-12, 1e-9) <= base


def test_noiseless_end_to_end_positive():
    b = analyze_decoy(_noiseless_counts(0.65), NOISELESS_SETTINGS)
    assert not b.aborted
    assert b.key_length > 0


def test_eps_one_removes_corrections():
    res = _asymptotic(ChannelParams(attenuation_db=5.0), SET)
    z = res.counts.per_intensity("z")
    n = sum(z)
    assert n_k_pm(z[0], n, SET.mu1, SET.p_mu1, 1.0, +1) == n_k_pm(z[0], n, SET.mu1, SET.p_mu1, 1.0, -1)
    assert d1_lower(*z, SET, 1.0, 0.0) > d1_lower(*z, SET, 1e-9, 0.0)


def test_epsilons_validation():
    with pytest.raises(ValueError):
        FiniteKeyEpsilons(eps_sec=0.0)
    with pytest.raises(ValueError):
        FiniteKeyEpsilons(eps=1.5)
    assert FiniteKeyEpsilons().hoeffding == pytest.approx(1e-9 / 19)
