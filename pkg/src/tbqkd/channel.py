"""Honest-channel model producing detection counts.

Each photon that reaches Bob is routed independently: with probability
``p_zb`` to the data line (arrival time = bit, flipped with ``e_mis``) and
otherwise to the transmitted port of the monitoring interferometer, whose
bins t0, t1, t2 collect the fractions returned by :func:`bob_fates`.  Every
detector bin also fires on its own with probability ``p_dc``.

Monitoring events use the efficient encoding: the early bin of round ``m``
overlaps t2 of round ``m - 1`` with t0 of round ``m``.  The round sequence
is treated as cyclic so that there are exactly ``rounds`` pair windows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .decoy import IntensitySettings, ObservedCounts
from .phase_error import basis_probs

__all__ = [
    "BinIntensities",
    "ChannelParams",
    "PAIR_EVENTS",
    "SimulationResult",
    "SourceConfig",
    "TruthLedger",
    "bob_fates",
    "expected_bin_intensities",
    "simulate_counts",
    "single_photon_reference_counts",
]

STATES = ("0", "1", "+")
# pattern -> which round's photons reach the early bin (for perfect states)
PAIR_EVENTS = {"00": "cur", "11": "prev", "++": "cur", "01": "cur", "0+": "cur", "+1": "prev"}
_BINS = ("data_early", "data_late", "t0", "t1", "t2")


@dataclass(frozen=True)
class ChannelParams:
    attenuation_db: float = 0.0
    p_dc: float = 1e-10
    e_mis: float = 0.01
    det_eff: float = 1.0
    ir_fraction: float = 0.0  # photons intercepted in Z and resent (test adversary)

    def __post_init__(self):
        if not self.attenuation_db >= 0.0:
            raise ValueError(f"attenuation_db must be >= 0, got {self.attenuation_db}")
        if not 0.0 <= self.p_dc < 1.0:
            raise ValueError(f"p_dc must lie in [0, 1), got {self.p_dc}")
        if not 0.0 <= self.e_mis <= 0.5:
            raise ValueError(f"e_mis must lie in [0, 0.5], got {self.e_mis}")
        if not 0.0 < self.det_eff <= 1.0:
            raise ValueError(f"det_eff must lie in (0, 1], got {self.det_eff}")
        if not 0.0 <= self.ir_fraction <= 1.0:
            raise ValueError(f"ir_fraction must lie in [0, 1], got {self.ir_fraction}")

    @property
    def transmittance(self) -> float:
        if math.isinf(self.attenuation_db):
            return 0.0
        return self.det_eff * 10.0 ** (-self.attenuation_db / 10.0)

    @property
    def visibility(self) -> float:
        return 1.0 - 2.0 * self.e_mis


@dataclass(frozen=True)
class SourceConfig:
    mode: str = "wcp-decoy"
    p_z: float = 0.5
    rounds: int = 10**6
    settings: IntensitySettings | None = None
    p_zb: float | None = None  # Bob's data-line fraction; None couples it to p_z
    seed: int | None = None

    def __post_init__(self):
        if self.mode not in ("single-photon", "wcp-decoy"):
            raise ValueError(f"unknown source mode {self.mode!r}")
        if not 0.0 < self.p_z < 1.0:
            raise ValueError(f"p_z must lie in (0, 1), got {self.p_z}")
        if self.rounds < 1:
            raise ValueError("rounds must be positive")
        if self.mode == "wcp-decoy" and self.settings is None:
            raise ValueError("wcp-decoy mode needs intensity settings")
        if self.p_zb is not None and not 0.0 <= self.p_zb <= 1.0:
            raise ValueError(f"p_zb must lie in [0, 1], got {self.p_zb}")

    @property
    def bob_split(self) -> float:
        return self.p_z if self.p_zb is None else self.p_zb

    def intensity_items(self):
        if self.mode == "single-photon":
            return (("single", 1.0, 1.0),)
        return self.settings.items()


def bob_fates(state: str, e_mis: float, p_zb: float, ir_fraction: float = 0.0) -> np.ndarray:
    """Routing probabilities of one photon that reached Bob.

    Order: data early, data late, t0, t1, t2.  The remainder goes to the
    unmonitored interferometer port.  A fraction ``ir_fraction`` of |+>
    photons is replaced by a random Z state (a Z-basis intercept-resend),
    which leaves Z inputs untouched.
    """
    if state == "+" and ir_fraction > 0.0:
        resent = 0.5 * (bob_fates("0", e_mis, p_zb) + bob_fates("1", e_mis, p_zb))
        return (1.0 - ir_fraction) * bob_fates("+", e_mis, p_zb) + ir_fraction * resent
    mon = 1.0 - p_zb
    if state == "0":
        return np.array([p_zb * (1 - e_mis), p_zb * e_mis, mon / 4, mon / 4, 0.0])
    if state == "1":
        return np.array([p_zb * e_mis, p_zb * (1 - e_mis), 0.0, mon / 4, mon / 4])
    if state == "+":
        visibility = 1.0 - 2.0 * e_mis
        return np.array([p_zb / 2, p_zb / 2, mon / 8, mon * (1 - visibility) / 4, mon / 8])
    raise ValueError(f"unknown state {state!r}")


@dataclass(frozen=True)
class BinIntensities:
    data_early: float
    data_late: float
    t0: float
    t1: float
    t2: float


def expected_bin_intensities(
    state: str, k: float, eta: float, e_mis: float = 0.0, p_zb: float = 0.5
) -> BinIntensities:
    """Mean photon number reaching each detection bin."""
    if k < 0 or not 0.0 <= eta <= 1.0:
        raise ValueError("need k >= 0 and eta in [0, 1]")
    return BinIntensities(*(k * eta * bob_fates(state, e_mis, p_zb)))


# A yield is a list of (coefficient, base) pairs meaning sum_i c_i * base_i**n
# for n emitted photons; Poisson averages are then sum_i c_i exp(-k (1 - base_i)).


def _click_yield(p_dc: float, q: float, other: float = 1.0):
    return [(1.0, 1.0), (-(1.0 - p_dc) * other, 1.0 - q)]


def _pair_yields(p_dc: float, q_c: float, q_w: float):
    """Detection and error yields of a two-bin measurement with random tie-break."""
    s = 1.0 - p_dc
    det = [(1.0, 1.0), (-(s**2), 1.0 - q_c - q_w)]
    err = [(0.5, 1.0), (0.5 * s, 1.0 - q_c), (-0.5 * s, 1.0 - q_w), (-0.5 * s**2, 1.0 - q_c - q_w)]
    return det, err


def _eval_yield(terms, n: int) -> float:
    return sum(c * b**n for c, b in terms)


def _poisson_avg(terms, k: float) -> float:
    return sum(c * math.exp(-k * (1.0 - b)) for c, b in terms)


@dataclass
class TruthLedger:
    """Expected or realised counts split by the emitting round's photon number.

    ``by_event[label][event]`` is ``[vacuum, single, multi]``.
    """

    by_event: dict = field(default_factory=dict)

    def split(self, *events: str) -> np.ndarray:
        out = np.zeros(3)
        for per_label in self.by_event.values():
            for e in events:
                out += per_label.get(e, 0)
        return out

    def vacuum(self, *events: str) -> float:
        return float(self.split(*events)[0])

    def single(self, *events: str) -> float:
        return float(self.split(*events)[1])


@dataclass
class SimulationResult:
    counts: ObservedCounts
    truth: TruthLedger


def _event_yields(channel: ChannelParams, source: SourceConfig):
    """Yield terms per event for the attributed round, keyed by intensity label."""
    eta = channel.transmittance
    p_dc = channel.p_dc
    q = {s: eta * bob_fates(s, channel.e_mis, source.bob_split, channel.ir_fraction) for s in STATES}
    items = source.intensity_items()

    def other_no_photon(state, bin_idx):
        qo = q[state][bin_idx]
        if source.mode == "single-photon":
            return 1.0 - qo
        return sum(p * math.exp(-k * qo) for _, k, p in items)

    events = {}
    for j, (c, w) in (("0", (0, 1)), ("1", (1, 0))):
        det, err = _pair_yields(p_dc, q[j][c], q[j][w])
        events.setdefault("z", []).append((j, det))
        events.setdefault("z_err", []).append((j, err))
    for j in STATES:
        events[f"l{j}"] = [(j, _click_yield(p_dc, q[j][3]))]
    for pattern, who in PAIR_EVENTS.items():
        prev, cur = pattern
        if who == "cur":
            y = _click_yield(p_dc, q[cur][2], other_no_photon(prev, 4))
        else:
            y = _click_yield(p_dc, q[prev][4], other_no_photon(cur, 2))
        events[f"e{pattern}"] = [(pattern, y)]
    return events


def _expected(channel: ChannelParams, source: SourceConfig, round_counts: bool) -> SimulationResult:
    n_rounds = source.rounds
    pj = basis_probs(source.p_z)
    events = _event_yields(channel, source)
    counts, truth = {}, {}
    for label, k, p_k in source.intensity_items():
        counts[label], truth[label] = {}, {}
        for name, parts in events.items():
            total, split = 0.0, np.zeros(3)
            for pattern, terms in parts:
                w = n_rounds * p_k * math.prod(pj[s] for s in pattern)
                if source.mode == "single-photon":
                    total += w * _eval_yield(terms, 1)
                    split[1] += w * _eval_yield(terms, 1)
                else:
                    t = w * _poisson_avg(terms, k)
                    s0 = w * math.exp(-k) * _eval_yield(terms, 0)
                    s1 = w * k * math.exp(-k) * _eval_yield(terms, 1)
                    total += t
                    split += (s0, s1, t - s0 - s1)
            counts[label][name] = int(round(total)) if round_counts else total
            truth[label][name] = split
    intens = {lab: k for lab, k, _ in source.intensity_items()}
    return SimulationResult(ObservedCounts(n_rounds, source.p_z, counts, intens), TruthLedger(truth))


def _monte_carlo(channel: ChannelParams, source: SourceConfig) -> SimulationResult:
    rng = np.random.default_rng(source.seed)
    n = source.rounds
    items = source.intensity_items()
    labels = [lab for lab, _, _ in items]
    ks = np.array([k for _, k, _ in items])

    if source.mode == "wcp-decoy":
        lab = (rng.random(n) >= source.settings.p_mu1).astype(np.intp)
        photons = rng.poisson(ks[lab])
    else:
        lab = np.zeros(n, dtype=np.intp)
        photons = np.ones(n, dtype=np.int64)
    cum = np.cumsum([source.p_z / 2, source.p_z / 2])
    state = np.searchsorted(cum, rng.random(n), side="right")  # 0, 1, 2 = '+'

    arrived = rng.binomial(photons, channel.transmittance)
    owner = np.repeat(np.arange(n), arrived)
    fates = np.array([bob_fates(s, channel.e_mis, source.bob_split, channel.ir_fraction) for s in STATES])
    cdf = np.cumsum(fates, axis=1)
    fate = (rng.random(owner.size)[:, None] >= cdf[state[owner]]).sum(axis=1)
    hit = np.zeros((len(_BINS) + 1, n), dtype=bool)
    hit[fate, owner] = True

    # background clicks in data early, data late, monitor early, monitor late
    n_dark = rng.binomial(4 * n, channel.p_dc)
    pos = rng.choice(4 * n, size=n_dark, replace=False)
    dark = np.zeros((4, n), dtype=bool)
    dark[pos // n, pos % n] = True

    data_e = hit[0] | dark[0]
    data_l = hit[1] | dark[1]
    early = hit[2] | np.roll(hit[4], 1) | dark[2]
    late = hit[3] | dark[3]

    photon_class = np.minimum(photons, 2)
    n_lab = len(labels)
    counts = {l: {} for l in labels}
    truth = {l: {} for l in labels}

    def record(name, mask, which_lab, which_cls):
        c = np.bincount(which_lab[mask] * 3 + which_cls[mask], minlength=3 * n_lab).reshape(n_lab, 3)
        for i, l in enumerate(labels):
            counts[l][name] = int(c[i].sum())
            truth[l][name] = c[i].astype(float)

    is_z = state < 2
    correct = np.where(state == 0, data_e, data_l)
    wrong = np.where(state == 0, data_l, data_e)
    coin = rng.random(n) < 0.5
    record("z", is_z & (data_e | data_l), lab, photon_class)
    record("z_err", is_z & wrong & (~correct | coin), lab, photon_class)
    for i, j in enumerate(STATES):
        record(f"l{j}", (state == i) & late, lab, photon_class)
    prev_state = np.roll(state, 1)
    prev_lab = np.roll(lab, 1)
    prev_cls = np.roll(photon_class, 1)
    for pattern, who in PAIR_EVENTS.items():
        a, b = (STATES.index(s) for s in pattern)
        mask = (prev_state == a) & (state == b) & early
        if who == "cur":
            record(f"e{pattern}", mask, lab, photon_class)
        else:
            record(f"e{pattern}", mask, prev_lab, prev_cls)
    intens = {l: float(k) for l, k in zip(labels, ks)}
    return SimulationResult(ObservedCounts(n, source.p_z, counts, intens), TruthLedger(truth))


def simulate_counts(
    channel: ChannelParams,
    source: SourceConfig,
    mode: str = "expected",
    round_counts: bool = True,
) -> SimulationResult:
    """Counts for the efficient-encoding protocol.

    ``mode="expected"`` returns ``rounds`` times the event probabilities
    (rounded unless ``round_counts`` is false); ``"monte-carlo"`` simulates
    every round and records the true photon number behind each event.
    """
    if mode == "expected":
        return _expected(channel, source, round_counts)
    if mode in ("monte-carlo", "mc"):
        return _monte_carlo(channel, source)
    raise ValueError(f"unknown simulation mode {mode!r}")


def single_photon_reference_counts(
    channel: ChannelParams,
    source: SourceConfig,
    scheme: str = "three-bin",
    round_counts: bool = True,
) -> ObservedCounts:
    """Expected counts for an ideal single-photon source.

    ``scheme="three-bin"`` is the three-state protocol with separated t0,
    t1, t2 monitoring bins.  ``scheme="bb84"`` is four-state BB84 whose X
    measurement watches the central bin of both interferometer ports.
    """
    if source.mode != "single-photon":
        raise ValueError("reference counts need a single-photon source")
    eta = channel.transmittance
    p_dc = channel.p_dc
    p_zb = source.bob_split
    n = source.rounds
    out = {"z": 0.0, "z_err": 0.0}

    for j, (c, w) in (("0", (0, 1)), ("1", (1, 0))):
        q = eta * bob_fates(j, channel.e_mis, p_zb, channel.ir_fraction)
        det, err = _pair_yields(p_dc, q[c], q[w])
        out["z"] += n * source.p_z / 2 * _eval_yield(det, 1)
        out["z_err"] += n * source.p_z / 2 * _eval_yield(err, 1)

    if scheme == "three-bin":
        pj = basis_probs(source.p_z)
        for j in STATES:
            q = eta * bob_fates(j, channel.e_mis, p_zb, channel.ir_fraction)
            for b in range(3):
                out[f"t{b}|{j}"] = n * pj[j] * _eval_yield(_click_yield(p_dc, q[2 + b]), 1)
    elif scheme == "bb84":
        # |+> and |-> each with (1 - p_z) / 2; half of each photon lands in the
        # central bin, split between ports by the visibility
        mon = eta * (1.0 - p_zb)
        # a Z-resent photon lands in either port with equal probability
        e_x = (1.0 - channel.ir_fraction) * channel.e_mis + channel.ir_fraction / 2.0
        q_ok = mon * (1.0 - e_x) / 2.0
        q_bad = mon * e_x / 2.0
        det, err = _pair_yields(p_dc, q_ok, q_bad)
        out["x"] = n * (1.0 - source.p_z) * _eval_yield(det, 1)
        out["x_err"] = n * (1.0 - source.p_z) * _eval_yield(err, 1)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    if round_counts:
        out = {k: int(round(v)) for k, v in out.items()}
    return ObservedCounts(n, source.p_z, {"single": out}, {"single": 1.0})
