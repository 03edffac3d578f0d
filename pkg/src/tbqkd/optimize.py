"""Key-rate maximisation over source parameters (Expected-mode counts only)."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from .channel import ChannelParams, SourceConfig, simulate_counts, single_photon_reference_counts
from .decoy import (
    F_EC,
    FiniteKeyEpsilons,
    IntensitySettings,
    KeyRateBreakdown,
    analyze_bb84_single_photon,
    analyze_decoy,
    analyze_three_bin_single_photon,
)

__all__ = ["OptimizationResult", "ParamSpace", "SCHEMES", "evaluate", "optimize", "optimize_sweep"]

SCHEMES = ("wcp-decoy", "three-bin", "bb84")


@dataclass(frozen=True)
class ParamSpace:
    mu1: tuple[float, float] = (0.05, 1.0)
    mu2: tuple[float, float] = (0.01, 0.6)
    p_mu1: tuple[float, float] = (0.05, 0.95)
    p_z: tuple[float, float] = (0.05, 0.995)
    grid: int = 8
    refine: int = 2

    def __post_init__(self):
        for name in ("mu1", "mu2", "p_mu1", "p_z"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError(f"empty range for {name}: {lo} > {hi}")
        if not (0.0 < self.mu1[1] <= 1.0 and self.mu1[0] > 0.0):
            raise ValueError("mu1 range must lie in (0, 1]")
        if not 0.0 < self.mu2[0]:
            raise ValueError("mu2 range must be positive")
        if self.mu2[0] >= self.mu1[1]:
            raise ValueError("no mu2 < mu1 pair in the space")
        for name in ("p_mu1", "p_z"):
            lo, hi = getattr(self, name)
            if not (0.0 < lo and hi < 1.0):
                raise ValueError(f"{name} range must lie in (0, 1)")
        if self.grid < 1 or self.refine < 0:
            raise ValueError("grid must be >= 1 and refine >= 0")

    def names(self, scheme: str) -> tuple[str, ...]:
        return ("mu1", "mu2", "p_mu1", "p_z") if scheme == "wcp-decoy" else ("p_z",)

    def bounds(self, scheme: str):
        return [getattr(self, n) for n in self.names(scheme)]


def _feasible(params: dict) -> bool:
    return "mu1" not in params or params["mu2"] < params["mu1"]


def evaluate(
    params: dict,
    channel: ChannelParams,
    rounds: int,
    epsilons: FiniteKeyEpsilons = FiniteKeyEpsilons(),
    scheme: str = "wcp-decoy",
    f_ec: float = F_EC,
) -> KeyRateBreakdown:
    """Deterministic key-rate breakdown at one parameter point."""
    if scheme == "wcp-decoy":
        settings = IntensitySettings(params["mu1"], params["mu2"], params["p_mu1"])
        src = SourceConfig("wcp-decoy", params["p_z"], rounds, settings)
        return analyze_decoy(simulate_counts(channel, src).counts, settings, epsilons, f_ec)
    src = SourceConfig("single-photon", params["p_z"], rounds)
    if scheme == "three-bin":
        return analyze_three_bin_single_photon(
            single_photon_reference_counts(channel, src, "three-bin", round_counts=False), epsilons, f_ec
        )
    if scheme == "bb84":
        return analyze_bb84_single_photon(
            single_photon_reference_counts(channel, src, "bb84", round_counts=False), epsilons, f_ec
        )
    raise ValueError(f"unknown scheme {scheme!r}")


@dataclass
class OptimizationResult:
    params: dict
    breakdown: KeyRateBreakdown
    evaluations: int = 0
    history: list = field(default_factory=list, repr=False)

    @property
    def key_rate(self) -> float:
        return self.breakdown.key_rate


def _score(b: KeyRateBreakdown) -> float:
    """Objective to maximise: the rate when positive, else a feasibility guide."""
    if b.key_length > 0:
        return b.key_length / b.rounds
    if b.aborted:
        return -math.inf
    raw = b.intermediates.get("key_length_raw", -math.inf)
    # strictly below any positive rate, still ordered by how close to feasible
    return -1.0 + math.tanh(raw / max(b.rounds, 1))


def optimize(
    channel: ChannelParams,
    rounds: int,
    epsilons: FiniteKeyEpsilons = FiniteKeyEpsilons(),
    space: ParamSpace = ParamSpace(),
    scheme: str = "wcp-decoy",
    f_ec: float = F_EC,
    extra_starts=(),
) -> OptimizationResult:
    """Coarse grid search followed by Nelder-Mead refinement.

    Grid ties keep the first point in lexicographic parameter order.  The
    refinement can only replace the incumbent with a strictly better point.
    ``extra_starts`` are additional candidate parameter dicts.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    names = space.names(scheme)
    bounds = space.bounds(scheme)
    cache: dict[tuple, tuple[float, KeyRateBreakdown]] = {}

    def run(x) -> tuple[float, KeyRateBreakdown | None]:
        x = tuple(float(min(max(v, lo), hi)) for v, (lo, hi) in zip(x, bounds))
        if x in cache:
            return cache[x]
        params = dict(zip(names, x))
        if not _feasible(params):
            out = (-math.inf, None)
        else:
            b = evaluate(params, channel, rounds, epsilons, scheme, f_ec)
            out = (_score(b), b)
        cache[x] = out
        return out

    axes = [np.linspace(lo, hi, space.grid) for lo, hi in bounds]
    best_x, best_s = None, -math.inf
    for x in itertools.product(*axes):
        s, b = run(x)
        if s > best_s or (best_x is None and b is not None):
            best_x, best_s = tuple(float(v) for v in x), s
    for start in extra_starts:
        x = tuple(float(start[n]) for n in names)
        s, b = run(x)
        if s > best_s or (best_x is None and b is not None):
            best_x, best_s = x, s
    if best_x is None:
        raise ValueError("parameter space has no feasible point")

    lo = np.array([b[0] for b in bounds])
    width = np.array([b[1] - b[0] for b in bounds])
    free = width > 0

    def to_x(u):
        x = lo.copy()
        x[free] += width[free] * expit(u)
        return x

    for _ in range(space.refine if math.isfinite(best_s) else 0):
        # logit coordinates keep the simplex inside the box; clamping at the
        # bounds instead lets it collapse onto an edge
        frac = np.clip((np.array(best_x) - lo)[free] / width[free], 0.01, 0.99)
        if not frac.size:
            break
        u0 = logit(frac)
        # first step points towards the box centre
        simplex = [u0] + [u0 - np.sign(u0 - 1e-12) * np.eye(u0.size)[i] for i in range(u0.size)]
        res = minimize(
            lambda u: -run(to_x(u))[0] if np.isfinite(run(to_x(u))[0]) else 1e3,
            u0,
            method="Nelder-Mead",
            options={"initial_simplex": np.array(simplex), "xatol": 1e-5, "fatol": 1e-12, "maxiter": 400},
        )
        x = tuple(float(min(max(v, lo_), hi)) for v, (lo_, hi) in zip(to_x(res.x), bounds))
        s, _ = run(x)
        if s > best_s:
            best_x, best_s = x, s
        else:
            break
    _, b = run(best_x)
    return OptimizationResult(dict(zip(names, best_x)), b, len(cache))


def optimize_sweep(
    attenuations,
    channel: ChannelParams,
    rounds: int,
    epsilons: FiniteKeyEpsilons = FiniteKeyEpsilons(),
    space: ParamSpace = ParamSpace(),
    scheme: str = "wcp-decoy",
    f_ec: float = F_EC,
) -> list[OptimizationResult]:
    """Optimise every attenuation, then re-offer each optimum to lower attenuations.

    Each point is warm-started from the previous optimum.  The backward pass
    only adds candidates, so no point gets worse.
    """
    results = []
    prev = ()
    for att in attenuations:
        ch = replace(channel, attenuation_db=float(att))
        r = optimize(ch, rounds, epsilons, space, scheme, f_ec, extra_starts=prev)
        results.append(r)
        prev = (r.params,)
    for i in range(len(results) - 2, -1, -1):
        cand = results[i + 1].params
        ch = replace(channel, attenuation_db=float(attenuations[i]))
        b = evaluate(cand, ch, rounds, epsilons, scheme, f_ec)
        if _score(b) > _score(results[i].breakdown):
            results[i] = OptimizationResult(dict(cand), b, results[i].evaluations + 1)
    return results
