"""One-decoy finite-key bounds and secret key length.

Counts enter through :class:`ObservedCounts`.  Hoeffding corrections and
``delta`` use natural logarithms; entropies and the composable security
terms use base 2.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields

from .phase_error import NoStatistics, basis_probs, joint_coefficients

logger = logging.getLogger(__name__)

__all__ = [
    "F_EC",
    "FiniteKeyEpsilons",
    "InfeasibleCorrection",
    "IntensitySettings",
    "KeyRateBreakdown",
    "ObservedCounts",
    "PhaseBound",
    "analyze_bb84_single_photon",
    "analyze_decoy",
    "analyze_three_bin_single_photon",
    "binary_entropy",
    "d0_lower_z",
    "d0_upper_from_01",
    "d0_upper_z",
    "d1_lower",
    "d1_upper",
    "delta",
    "ex_upper_decoy",
    "gamma",
    "key_length",
    "n_k_pm",
    "security_overhead",
    "tau_n",
]

F_EC = 1.16
N_EVENTS = 19


class InfeasibleCorrection(ValueError):
    """Finite-key phase-error correction has no real value."""


@dataclass(frozen=True)
class IntensitySettings:
    mu1: float
    mu2: float
    p_mu1: float

    def __post_init__(self):
        if not (self.mu1 > self.mu2 >= 0.0):
            raise ValueError(f"need mu1 > mu2 >= 0, got mu1={self.mu1}, mu2={self.mu2}")
        if not 0.0 < self.p_mu1 < 1.0:
            raise ValueError(f"p_mu1 must lie in (0, 1), got {self.p_mu1}")

    @property
    def p_mu2(self) -> float:
        return 1.0 - self.p_mu1

    def items(self):
        """``(label, intensity, probability)`` for both intensities."""
        return (("mu1", self.mu1, self.p_mu1), ("mu2", self.mu2, self.p_mu2))


@dataclass(frozen=True)
class FiniteKeyEpsilons:
    eps_sec: float = 1e-9
    eps_cor: float = 1e-9
    eps: float | None = None  # per-bound failure probability, default eps_sec / 19

    def __post_init__(self):
        for name in ("eps_sec", "eps_cor"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.eps is not None and not 0.0 < self.eps <= 1.0:
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")

    @property
    def hoeffding(self) -> float:
        return self.eps_sec / N_EVENTS if self.eps is None else self.eps


@dataclass
class ObservedCounts:
    """Detection counts keyed by intensity label, then event name.

    Event names: ``z`` / ``z_err`` (data line, Z inputs), ``l0``, ``l1``,
    ``l+`` (late monitoring bin), ``e00``, ``e11``, ``e++``, ``e01``,
    ``e0+``, ``e+1`` (early monitoring bin, previous then current state).
    Single-photon references also use ``t{b}|{j}`` and ``x`` / ``x_err``.
    """

    rounds: int
    p_z: float
    counts: dict = field(default_factory=dict)
    intensities: dict = field(default_factory=dict)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.counts)

    def n(self, event: str, label: str | None = None) -> float:
        if label is None:
            return self.total(event)
        return self.counts[label].get(event, 0)

    def total(self, event: str) -> float:
        return sum(c.get(event, 0) for c in self.counts.values())

    def pattern_prob(self, pattern: str) -> float:
        """Probability that Alice sends ``pattern`` (one state or a pair)."""
        pj = basis_probs(self.p_z)
        p = 1.0
        for s in pattern:
            p *= pj[s]
        return p

    def per_intensity(self, *events: str) -> tuple[float, float]:
        return tuple(sum(self.n(e, lab) for e in events) for lab in ("mu1", "mu2"))


def tau_n(settings: IntensitySettings, n: int) -> float:
    """Probability that Alice emits exactly ``n`` photons."""
    return sum(p * math.exp(-k) * k**n / math.factorial(n) for _, k, p in settings.items())


def delta(n: float, eps: float) -> float:
    return math.sqrt(max(n, 0.0) * math.log(1.0 / eps) / 2.0)


def n_k_pm(n_k: float, n_total: float, k: float, p_k: float, eps: float, sign: int) -> float:
    """Hoeffding-corrected, intensity-normalised count ``e^k/p_k (n_k +- delta)``."""
    return math.exp(k) / p_k * (n_k + math.copysign(1.0, sign) * delta(n_total, eps))


def d0_upper_from_01(n_e01: float, p_target: float, p_01: float, eps: float) -> float:
    """Upper bound on vacuum-caused events of a pattern from the (0,1) pair.

    The early bin after a |0>|1> pair receives no photons, so it only sees
    background clicks.
    """
    if p_01 <= 0.0:
        raise ValueError("p(01) must be positive")
    scaled = p_target / p_01 * n_e01
    return scaled + delta(scaled, eps)


def _decoy_terms(n_mu1, n_mu2, settings, eps):
    n = n_mu1 + n_mu2
    up1 = n_k_pm(n_mu1, n, settings.mu1, settings.p_mu1, eps, +1)
    lo2 = n_k_pm(n_mu2, n, settings.mu2, settings.p_mu2, eps, -1)
    return up1, lo2


def d1_lower(
    n_mu1: float,
    n_mu2: float,
    settings: IntensitySettings,
    eps: float,
    d0_upper: float,
    add_vacuum: bool = False,
) -> float:
    """Lower bound on single-photon events.

    The vacuum contribution is subtracted; ``add_vacuum=True`` adds it
    instead, which can exceed the true single-photon count.
    """
    mu1, mu2 = settings.mu1, settings.mu2
    if mu2 <= 0.0:
        raise ValueError("the single-photon lower bound needs mu2 > 0")
    up1, lo2 = _decoy_terms(n_mu1, n_mu2, settings, eps)
    vac = (mu1**2 - mu2**2) / mu1**2 * d0_upper / tau_n(settings, 0)
    if add_vacuum:
        vac = -vac
    raw = tau_n(settings, 1) * mu1 / (mu2 * (mu1 - mu2)) * (lo2 - mu2**2 / mu1**2 * up1 - vac)
    if raw < 0.0:
        logger.debug("single-photon lower bound %.6g clamped to 0", raw)
    upper = d1_upper(n_mu1, n_mu2, settings, eps)
    if raw > upper:
        # only reachable when the decoy gain exceeds the signal gain
        logger.debug("single-photon lower bound %.6g capped at upper bound %.6g", raw, upper)
        return upper
    return max(0.0, raw)


def d1_upper(n_mu1: float, n_mu2: float, settings: IntensitySettings, eps: float) -> float:
    up1, lo2 = _decoy_terms(n_mu1, n_mu2, settings, eps)
    return max(0.0, tau_n(settings, 1) / (settings.mu1 - settings.mu2) * (up1 - lo2))


def d0_lower_z(n_mu1: float, n_mu2: float, settings: IntensitySettings, eps: float) -> float:
    up1, lo2 = _decoy_terms(n_mu1, n_mu2, settings, eps)
    mu1, mu2 = settings.mu1, settings.mu2
    return max(0.0, tau_n(settings, 0) / (mu1 - mu2) * (mu1 * lo2 - mu2 * up1))


def d0_upper_z(m_mu1: float, m_mu2: float, settings: IntensitySettings, eps: float) -> float:
    """Vacuum upper bound on Z detections from the Z error counts.

    A vacuum pulse yields a random bit, so vacuum events are at most twice
    the vacuum errors, which the weaker intensity bounds from above.
    """
    m = m_mu1 + m_mu2
    return 2.0 * tau_n(settings, 0) * n_k_pm(m_mu2, m, settings.mu2, settings.p_mu2, eps, +1)


def binary_entropy(x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def gamma(a: float, b: float, c: float, d: float) -> float:
    """Random-sampling correction from the X-type to the Z-type phase error."""
    if b <= 0.0 or b >= 1.0:
        return 0.0
    if c <= 0.0 or d <= 0.0:
        raise InfeasibleCorrection("sample sizes must be positive")
    v = (c + d) * (1.0 - b) * b / (c * d * math.log(2.0))
    # summed logs: the product overflows for b near 0
    log2_arg = (
        math.log2(c + d) - math.log2(c) - math.log2(d)
        - math.log1p(-b) / math.log(2.0) - math.log2(b)
        + 2.0 * math.log2(21.0) - 2.0 * math.log2(a)
    )
    radicand = v * log2_arg
    if radicand < 0.0:
        raise InfeasibleCorrection(f"negative radicand {radicand:.3g}")
    return math.sqrt(radicand)


def security_overhead(eps_sec: float, eps_cor: float) -> float:
    return 6.0 * math.log2(N_EVENTS / eps_sec) + math.log2(2.0 / eps_cor)


def key_length(
    d0_z_lower: float,
    d1_z_lower: float,
    ez_upper: float,
    lambda_ec: float,
    eps_sec: float,
    eps_cor: float,
) -> float:
    ez = min(max(ez_upper, 0.0), 0.5)
    ell = d0_z_lower + d1_z_lower * (1.0 - binary_entropy(ez)) - lambda_ec
    return max(0.0, ell - security_overhead(eps_sec, eps_cor))


@dataclass
class PhaseBound:
    raw: float
    bounds: dict = field(default_factory=dict)

    @property
    def value(self) -> float:
        return min(0.5, max(0.0, self.raw))


def _phase_bound_from_terms(plus_term, z_term, side_term, denom, p_z, reuse_alpha, side="mixed"):
    """Plug-in phase-error bound, returned with its M argument."""
    if denom <= 0.0:
        raise NoStatistics("single-photon ZZ early-bin bound is zero")
    alpha, beta, w_side = joint_coefficients(p_z, side, reuse_alpha)
    first = 0.5 * alpha * plus_term / denom
    m_arg = 1.0 + first - (beta * z_term + w_side * side_term) / denom
    return first + max(0.0, m_arg), m_arg


def ex_upper_decoy(
    counts: ObservedCounts,
    settings: IntensitySettings,
    eps: float,
    reuse_alpha: bool = False,
    add_vacuum: bool = False,
    require_all_classes: bool = True,
) -> PhaseBound:
    """Upper bound on the single-photon phase error from monitoring counts.

    Raises :class:`NoStatistics` when the ZZ single-photon bound is zero.
    With ``require_all_classes`` a zero lower bound for the late-bin Z or
    mixed side-pair class also raises, since the plug-in cancellation is
    then driven by unresolved statistics.  A zero |+> late-bin count is
    legitimate (perfect interference).
    """
    pp = counts.pattern_prob
    n01 = counts.total("e01")
    p01 = pp("01")

    def lower(events, target):
        d0 = d0_upper_from_01(n01, target, p01, eps)
        return d1_lower(*counts.per_intensity(*events), settings, eps, d0, add_vacuum), d0

    zz, d0_zz = lower(("e00", "e11"), pp("00") + pp("11"))
    lz, _ = lower(("l0", "l1"), pp("0") + pp("1"))
    side, _ = lower(("e0+", "e+1"), pp("0+") + pp("+1"))
    plus = d1_upper(*counts.per_intensity("l+"), settings, eps)
    zz_up = d1_upper(*counts.per_intensity("e00", "e11"), settings, eps)
    if require_all_classes:
        for name, value in (("late-bin Z", lz), ("mixed side-pair", side)):
            if value <= 0.0:
                raise NoStatistics(f"no resolved single-photon {name} events")
    bounds = {
        "D1_ZZ_lower": zz,
        "D1_ZZ_upper": zz_up,
        "D0_ZZ_upper": d0_zz,
        "D1_lZ_lower": lz,
        "D1_side_lower": side,
        "D1_lplus_upper": plus,
    }
    raw, m_arg = _phase_bound_from_terms(plus, lz, side, zz, counts.p_z, reuse_alpha)
    bounds["ex_m_argument"] = m_arg
    return PhaseBound(raw, bounds)


@dataclass
class KeyRateBreakdown:
    d0_z_lower: float = 0.0
    d1_z_lower: float = 0.0
    d1_ex_upper: float = math.nan
    d1_ez_upper: float = math.nan
    gamma_term: float = math.nan
    lambda_ec: float = 0.0
    key_length: float = 0.0
    qber_z: float = math.nan
    n_z: float = 0.0
    rounds: int = 0
    aborted: str = ""
    intermediates: dict = field(default_factory=dict)

    @property
    def key_rate(self) -> float:
        return self.key_length / self.rounds if self.rounds else 0.0

    def as_row(self) -> dict:
        row = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "intermediates"}
        row["key_rate"] = self.key_rate
        row.update(self.intermediates)
        return row


def _finish(b: KeyRateBreakdown, ex: float, d_sample: float, eps_sec: float, eps_cor: float, f_ec: float):
    b.d1_ex_upper = ex
    try:
        b.gamma_term = gamma(eps_sec, ex, b.d1_z_lower, d_sample)
    except InfeasibleCorrection as exc:
        b.aborted = str(exc)
        return b
    b.d1_ez_upper = min(0.5, ex + b.gamma_term)
    b.lambda_ec = f_ec * b.n_z * binary_entropy(b.qber_z) if b.n_z > 0 else 0.0
    b.key_length = key_length(b.d0_z_lower, b.d1_z_lower, b.d1_ez_upper, b.lambda_ec, eps_sec, eps_cor)
    b.intermediates["key_length_raw"] = (
        b.d0_z_lower
        + b.d1_z_lower * (1.0 - binary_entropy(b.d1_ez_upper))
        - b.lambda_ec
        - security_overhead(eps_sec, eps_cor)
    )
    return b


def _z_stats(counts: ObservedCounts, b: KeyRateBreakdown) -> None:
    b.n_z = counts.total("z")
    m_z = counts.total("z_err")
    b.qber_z = m_z / b.n_z if b.n_z > 0 else math.nan


def analyze_decoy(
    counts: ObservedCounts,
    settings: IntensitySettings,
    epsilons: FiniteKeyEpsilons = FiniteKeyEpsilons(),
    f_ec: float = F_EC,
    add_vacuum: bool = False,
    reuse_alpha: bool = False,
) -> KeyRateBreakdown:
    """Full one-decoy pipeline for the three-state time-bin protocol."""
    eps = epsilons.hoeffding
    b = KeyRateBreakdown(rounds=counts.rounds)
    _z_stats(counts, b)
    z = counts.per_intensity("z")
    m = counts.per_intensity("z_err")
    n_z = sum(z)
    for label, k, p in settings.items():
        i = 0 if label == "mu1" else 1
        b.intermediates[f"n_z_{label}_plus"] = n_k_pm(z[i], n_z, k, p, eps, +1)
        b.intermediates[f"n_z_{label}_minus"] = n_k_pm(z[i], n_z, k, p, eps, -1)
    b.d0_z_lower = d0_lower_z(*z, settings, eps)
    d0_z_up = d0_upper_z(*m, settings, eps)
    b.d1_z_lower = d1_lower(*z, settings, eps, d0_z_up, add_vacuum)
    b.intermediates["D0_Z_upper"] = d0_z_up
    try:
        pb = ex_upper_decoy(counts, settings, eps, reuse_alpha, add_vacuum)
    except NoStatistics as exc:
        b.aborted = str(exc)
        return b
    b.intermediates.update(pb.bounds)
    b.intermediates["ex_raw"] = pb.raw
    return _finish(b, pb.value, pb.bounds["D1_ZZ_lower"], epsilons.eps_sec, epsilons.eps_cor, f_ec)


def analyze_three_bin_single_photon(
    counts: ObservedCounts,
    epsilons: FiniteKeyEpsilons = FiniteKeyEpsilons(),
    f_ec: float = F_EC,
    gamma_sample: str = "plus",
) -> KeyRateBreakdown:
    """Key length for the three-state protocol with an ideal single-photon source.

    Uses non-overlapping t0, t1, t2 monitoring bins.  Every detection stems
    from a single-photon emission, so the monitoring-line phase-error
    statistic is taken as observed and only the sampling correction
    ``gamma`` is added, as for :func:`analyze_bb84_single_photon`, with the
    |+> monitoring detections as the sample.  ``gamma_sample="side"`` uses
    the Z-state side-peak detections instead, mirroring the ZZ early-bin
    sample of the decoy pipeline.
    """
    if gamma_sample not in ("plus", "side"):
        raise ValueError(f"gamma_sample must be 'plus' or 'side', got {gamma_sample!r}")
    b = KeyRateBreakdown(rounds=counts.rounds)
    _z_stats(counts, b)
    n = counts.total
    side_z = sum(n(f"t{t}|{j}") for t in (0, 2) for j in "01")
    t1p = n("t1|+")
    t1z = n("t1|0") + n("t1|1")
    side_p = n("t0|+") + n("t2|+")
    b.d1_z_lower = b.n_z
    if side_z <= 0.0:
        b.aborted = "no side-peak detections for Z inputs"
        return b
    # joint -> conditional: Z states are sent with p_z / 2, |+> with 1 - p_z
    r = (counts.p_z / 2.0) / (1.0 - counts.p_z)
    first = r * t1p / (2.0 * side_z)
    m_arg = 1.0 + (0.5 * r * t1p - 0.5 * t1z - r * side_p) / side_z
    raw = first + max(0.0, m_arg)
    n_plus = t1p + side_p
    b.intermediates.update({"side_z": side_z, "n_plus_monitor": n_plus, "ex_raw": raw})
    sample = n_plus if gamma_sample == "plus" else side_z
    return _finish(b, min(0.5, max(0.0, raw)), sample, epsilons.eps_sec, epsilons.eps_cor, f_ec)


def analyze_bb84_single_photon(
    counts: ObservedCounts,
    epsilons: FiniteKeyEpsilons = FiniteKeyEpsilons(),
    f_ec: float = F_EC,
) -> KeyRateBreakdown:
    """Key length for standard four-state BB84 with a single-photon source."""
    b = KeyRateBreakdown(rounds=counts.rounds)
    _z_stats(counts, b)
    b.d1_z_lower = b.n_z
    n_x = counts.total("x")
    if n_x <= 0:
        b.aborted = "no X-basis detections"
        return b
    ex = counts.total("x_err") / n_x
    b.intermediates.update({"n_x": n_x, "ex_raw": ex})
    return _finish(b, min(0.5, ex), n_x, epsilons.eps_sec, epsilons.eps_cor, f_ec)
