"""Oracle suites: estimator agreement over random attacks and decoy-bound coverage."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParams, SourceConfig, simulate_counts
from .decoy import IntensitySettings, d0_upper_from_01, d0_upper_z, d1_lower, d1_upper
from .phase_error import (
    JointProbSet,
    SimpleProbSet,
    TimebinProbSet,
    ex_ideal,
    ex_joint,
    ex_simple,
    ex_timebin,
)
from .quantum import Convention, PreparedState, SimpleOutcome, cond_prob_simple, sample_random_attack

__all__ = [
    "BOUND_CLASSES",
    "BoundReport",
    "EstimatorReport",
    "class_bounds",
    "verify_decoy_bounds",
    "verify_estimators",
]

JOINT_PZ = (0.3, 0.5, 0.9)


@dataclass
class EstimatorReport:
    attacks: int
    max_dev: dict
    tol: float

    @property
    def passed(self) -> bool:
        return all(v <= self.tol for v in self.max_dev.values())

    def lines(self) -> list[str]:
        out = [f"attacks: {self.attacks}"]
        out += [f"max |{k}|: {v:.3e}" for k, v in self.max_dev.items()]
        out.append(f"tolerance: {self.tol:.1e} -> {'PASS' if self.passed else 'FAIL'}")
        return out


def verify_estimators(
    n_attacks: int = 1000,
    seed: int = 0,
    tol: float = 1e-10,
    dims=(1, 8),
    loss_weights=(0.0, 0.9),
) -> EstimatorReport:
    """Compare every measurable-data estimator with the ideal phase error.

    Ancilla dimensions and loss weights are drawn uniformly from the given
    inclusive ranges; each attack gets its own derived seed.
    """
    rng = np.random.default_rng(seed)
    keys = ("simple - ideal", "timebin - ideal", "joint - timebin", "simple M - p(+|-)/sum_Z")
    dev = dict.fromkeys(keys, 0.0)
    for _ in range(n_attacks):
        d = int(rng.integers(dims[0], dims[1] + 1))
        w = float(rng.uniform(*loss_weights))
        attack = sample_random_attack(d, w, int(rng.integers(2**63)))
        ideal = ex_ideal(attack).raw
        simple = SimpleProbSet.from_attack(attack)
        simple_ex = ex_simple(simple)
        tb = TimebinProbSet.from_attack(attack, Convention.SCALED)
        timebin_ex = ex_timebin(tb).raw
        flips = cond_prob_simple(attack, PreparedState.XMINUS, SimpleOutcome.BPLUS)
        dev["simple - ideal"] = max(dev["simple - ideal"], abs(simple_ex.raw - ideal))
        dev["timebin - ideal"] = max(dev["timebin - ideal"], abs(timebin_ex - ideal))
        dev["simple M - p(+|-)/sum_Z"] = max(
            dev["simple M - p(+|-)/sum_Z"], abs(simple_ex.m_argument - flips / float(np.sum(simple.z)))
        )
        for p_z in JOINT_PZ:
            joint_ex = ex_joint(JointProbSet.from_timebin(tb, p_z)).raw
            dev["joint - timebin"] = max(dev["joint - timebin"], abs(joint_ex - timebin_ex))
    return EstimatorReport(n_attacks, dev, tol)


# class name -> (events, pattern used for the vacuum bound or None for Z)
BOUND_CLASSES = {
    "ZZ": (("e00", "e11"), ("00", "11")),
    "lZ": (("l0", "l1"), ("0", "1")),
    "l+": (("l+",), ("+",)),
    "side": (("e0+", "e+1"), ("0+", "+1")),
    "Z": (("z",), None),
}


def class_bounds(counts, settings: IntensitySettings, eps: float, name: str) -> dict:
    """``d0_upper``, ``d1_lower`` and ``d1_upper`` for one event class."""
    events, patterns = BOUND_CLASSES[name]
    if patterns is None:
        d0 = d0_upper_z(*counts.per_intensity("z_err"), settings, eps)
    else:
        target = sum(counts.pattern_prob(p) for p in patterns)
        d0 = d0_upper_from_01(counts.total("e01"), target, counts.pattern_prob("01"), eps)
    per = counts.per_intensity(*events)
    return {
        "d0_upper": d0,
        "d1_lower": d1_lower(*per, settings, eps, d0),
        "d1_upper": d1_upper(*per, settings, eps),
    }


@dataclass
class BoundReport:
    trials: int
    eps: float
    violations: dict = field(default_factory=dict)

    def rate(self, key) -> float:
        return self.violations[key] / self.trials

    @property
    def passed(self) -> bool:
        return all(self.rate(k) <= self.eps for k in self.violations)

    def lines(self) -> list[str]:
        out = [f"trials: {self.trials}, eps: {self.eps}"]
        for (cls, bound), v in self.violations.items():
            out.append(f"{cls:>5} {bound:<9} violations {v:4d} rate {v / self.trials:.4f}")
        out.append("PASS" if self.passed else "FAIL")
        return out


def verify_decoy_bounds(
    channel: ChannelParams,
    settings: IntensitySettings,
    p_z: float,
    rounds: int = 10**6,
    trials: int = 1000,
    eps: float = 0.1,
    seed: int = 0,
) -> BoundReport:
    """Coverage of the vacuum and single-photon bounds over seeded Monte Carlo runs."""
    seeds = np.random.SeedSequence(seed).generate_state(trials, dtype=np.uint64)
    report = BoundReport(trials, eps)
    for cls in BOUND_CLASSES:
        for b in ("d0_upper", "d1_lower", "d1_upper"):
            report.violations[(cls, b)] = 0
    for s in seeds:
        src = SourceConfig("wcp-decoy", p_z, rounds, settings, seed=int(s))
        res = simulate_counts(channel, src, mode="monte-carlo")
        for cls, (events, _) in BOUND_CLASSES.items():
            vac, single, _ = res.truth.split(*events)
            bd = class_bounds(res.counts, settings, eps, cls)
            report.violations[(cls, "d0_upper")] += vac > bd["d0_upper"]
            report.violations[(cls, "d1_lower")] += single < bd["d1_lower"]
            report.violations[(cls, "d1_upper")] += single > bd["d1_upper"]
    return report
