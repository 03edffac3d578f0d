"""Phase-error-rate estimators for the three-state protocol.

Every estimator returns a :class:`PhaseErrorEstimate`.  The reference value
is :func:`ex_ideal`, computed from the four X-basis probabilities that the
protocol cannot measure; the others use only measurable quantities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quantum import (
    Convention,
    EveAttack,
    PreparedState as S,
    SimpleOutcome as B,
    TimebinOutcome as T,
    _UBX,
    bob_components,
    cond_prob_simple,
    cond_prob_timebin_direct,
    cond_prob_timebin_scaled,
)

__all__ = [
    "JointProbSet",
    "NoStatistics",
    "PhaseErrorEstimate",
    "SimpleProbSet",
    "TimebinProbSet",
    "equivalent_side_relation",
    "joint_coefficients",
    "ex_joint",
    "ex_simple",
    "ex_timebin",
    "ex_ideal",
    "ex_ideal_closed_form",
    "pair_sum_identity",
    "positive_part",
]


class NoStatistics(ArithmeticError):
    """The estimator denominator vanished (e.g. total loss)."""


def positive_part(y: float) -> float:
    return max(0.0, y)


@dataclass(frozen=True)
class PhaseErrorEstimate:
    raw: float
    first_term: float = math.nan
    m_argument: float = math.nan

    @property
    def value(self) -> float:
        return min(1.0, max(0.0, self.raw))

    def __float__(self) -> float:
        return self.value


def _combine(first: float, m_arg: float) -> PhaseErrorEstimate:
    return PhaseErrorEstimate(first + positive_part(m_arg), first, m_arg)


def ex_ideal(attack: EveAttack) -> PhaseErrorEstimate:
    """Phase error from p(-|+), p(+|-), p(+|+), p(-|-) (brute-force oracle)."""
    mp = cond_prob_simple(attack, S.XPLUS, B.BMINUS)
    pm = cond_prob_simple(attack, S.XMINUS, B.BPLUS)
    pp = cond_prob_simple(attack, S.XPLUS, B.BPLUS)
    mm = cond_prob_simple(attack, S.XMINUS, B.BMINUS)
    denom = mp + pm + pp + mm
    if denom <= 0.0:
        raise NoStatistics("no X-basis detections")
    return PhaseErrorEstimate((mp + pm) / denom)


def ex_ideal_closed_form(attack: EveAttack, doubled: bool = False) -> PhaseErrorEstimate:
    """Phase error from ancilla overlaps.

    ``doubled=True`` evaluates ``1 - 2 Re(...) / sum`` instead of
    ``1/2 - Re(...) / sum``; the former is wrong (it gives 1 for an
    intercept-resend attack) and is kept only for diagnostics.
    """
    v = attack.vector
    total = sum(float(np.vdot(v(i, j), v(i, j)).real) for i in (0, 1) for j in (0, 1))
    if total <= 0.0:
        raise NoStatistics("all Z-component ancilla states vanish")
    cross = (np.vdot(v(0, 0), v(1, 1)) + np.vdot(v(0, 1), v(1, 0))).real
    if doubled:
        return PhaseErrorEstimate(1.0 - 2.0 * cross / total)
    return PhaseErrorEstimate(0.5 - cross / total)


@dataclass(frozen=True)
class SimpleProbSet:
    """Probabilities measurable in the simplified scheme.

    ``z[i, j]`` is p(i|j) for Z states; the rest are projections onto |->
    or Z outcomes for the X input.
    """

    z: np.ndarray
    minus_given_plus: float
    minus_given_z: tuple[float, float]
    z_given_plus: tuple[float, float]

    @classmethod
    def from_attack(cls, attack: EveAttack) -> "SimpleProbSet":
        zs = (S.Z0, S.Z1)
        outs = (B.B0, B.B1)
        z = np.array([[cond_prob_simple(attack, a, b) for a in zs] for b in outs])
        return cls(
            z=z,
            minus_given_plus=cond_prob_simple(attack, S.XPLUS, B.BMINUS),
            minus_given_z=tuple(cond_prob_simple(attack, a, B.BMINUS) for a in zs),
            z_given_plus=tuple(cond_prob_simple(attack, S.XPLUS, b) for b in outs),
        )


def ex_simple(probs: SimpleProbSet) -> PhaseErrorEstimate:
    """Phase error from Z-basis data plus the single |-> projector."""
    sigma_z = float(np.sum(probs.z))
    if sigma_z <= 0.0:
        raise NoStatistics("no Z-basis detections")
    mp = probs.minus_given_plus
    side = sum(probs.minus_given_z) + sum(probs.z_given_plus)
    return _combine(mp / sigma_z, 1.0 + (mp - side) / sigma_z)


@dataclass(frozen=True)
class TimebinProbSet:
    """Monitoring-line probabilities ``t[state][bin]``, states ``0, 1, +``."""

    t: np.ndarray
    convention: Convention = Convention.SCALED

    STATES = (S.Z0, S.Z1, S.XPLUS)
    BINS = (T.T0, T.T1, T.T2)

    @classmethod
    def from_attack(
        cls, attack: EveAttack, convention: Convention = Convention.SCALED
    ) -> "TimebinProbSet":
        fn = cond_prob_timebin_scaled if convention is Convention.SCALED else cond_prob_timebin_direct
        t = np.array([[fn(attack, a, b) for b in cls.BINS] for a in cls.STATES])
        return cls(t, convention)

    def p(self, b: int, state: str) -> float:
        return float(self.t["01+".index(state), b])

    @property
    def t1_given_z(self) -> float:
        return self.p(1, "0") + self.p(1, "1")

    @property
    def side_given_plus(self) -> float:
        return self.p(0, "+") + self.p(2, "+")

    @property
    def side_sum_z(self) -> float:
        return sum(self.p(b, s) for s in "01" for b in (0, 2))


def ex_timebin(probs: TimebinProbSet) -> PhaseErrorEstimate:
    """Phase error from monitoring-line detections only."""
    sigma = probs.side_sum_z
    if sigma <= 0.0:
        raise NoStatistics("no side-peak detections for Z inputs")
    t1p = probs.p(1, "+")
    m_arg = 1.0 + (0.5 * (t1p - probs.t1_given_z) - probs.side_given_plus) / sigma
    return _combine(t1p / (2.0 * sigma), m_arg)


def _check_pz(p_z: float) -> None:
    if not 0.0 < p_z < 1.0:
        raise ValueError(f"p_z must lie in (0, 1), got {p_z}")


def basis_probs(p_z: float) -> dict[str, float]:
    _check_pz(p_z)
    return {"0": p_z / 2.0, "1": p_z / 2.0, "+": 1.0 - p_z}


@dataclass(frozen=True)
class JointProbSet:
    """Joint probabilities of early-bin pair events and late-bin events.

    ``e[(j, k)]`` is p(e, j, k) for previous state ``j`` and current ``k``;
    ``l[j]`` is p(l, j).
    """

    e: dict
    l: dict
    p_z: float

    @classmethod
    def from_timebin(cls, tb: TimebinProbSet, p_z: float) -> "JointProbSet":
        pj = basis_probs(p_z)
        e = {}
        for prev, cur in (("0", "0"), ("1", "1"), ("+", "+"), ("0", "+"), ("+", "1"), ("0", "1")):
            cond = tb.p(2, prev) + tb.p(0, cur)
            e[(prev, cur)] = cond * pj[prev] * pj[cur]
        l = {j: tb.p(1, j) * pj[j] for j in "01+"}
        return cls(e, l, p_z)

    @property
    def l_z(self) -> float:
        return self.l["0"] + self.l["1"]

    @property
    def e_zz(self) -> float:
        return self.e[("0", "0")] + self.e[("1", "1")]


def joint_coefficients(p_z: float, side: str = "pp", reuse_alpha: bool = False) -> tuple[float, float, float]:
    """Weights ``(alpha, beta, side_weight)`` turning joint into conditional ratios.

    ``alpha = p_z^2 / (4 (1 - p_z))`` and ``beta = p_z / 4``.  The side
    weight is ``alpha / (1 - p_z)`` for the (+,+) pair and
    ``p_z / (2 (1 - p_z))`` for the mixed (0,+) + (+,1) pairs; ``reuse_alpha``
    reuses ``alpha`` for the side term, which does not cancel the basis
    probabilities.
    """
    _check_pz(p_z)
    alpha = p_z**2 / (4.0 * (1.0 - p_z))
    beta = p_z / 4.0
    if reuse_alpha:
        return alpha, beta, alpha
    if side == "pp":
        return alpha, beta, alpha / (1.0 - p_z)
    if side == "mixed":
        return alpha, beta, p_z / (2.0 * (1.0 - p_z))
    raise ValueError(f"side must be 'pp' or 'mixed', got {side!r}")


def ex_joint(
    probs: JointProbSet, side: str = "pp", reuse_alpha: bool = False
) -> PhaseErrorEstimate:
    """Phase error from joint early/late probabilities of the efficient encoding."""
    sigma = probs.e_zz
    if sigma <= 0.0:
        raise NoStatistics("no early-bin detections for ZZ pairs")
    alpha, beta, w_side = joint_coefficients(probs.p_z, side, reuse_alpha)
    if side == "pp":
        side_p = probs.e[("+", "+")]
    else:
        side_p = probs.e[("0", "+")] + probs.e[("+", "1")]
    first = 0.5 * alpha * probs.l["+"] / sigma
    m_arg = 1.0 + first - (beta * probs.l_z + w_side * side_p) / sigma
    return _combine(first, m_arg)


def _slot_amplitudes(attack: EveAttack, state: str, offset: int, n_slots: int) -> np.ndarray:
    """Transmitted-port amplitudes of one round placed on a shared time grid.

    Round ``m`` occupies slots ``2m, 2m+1, 2m+2``, so its t2 overlaps the
    t0 of round ``m+1``.
    """
    a = {"0": S.Z0, "1": S.Z1, "+": S.XPLUS}[state]
    t_rows = _UBX[:3] @ bob_components(attack, a)
    out = np.zeros((n_slots, attack.ancilla_dim), dtype=complex)
    out[offset : offset + 3] = t_rows
    return out


def early_bin_pair_prob(attack: EveAttack, prev: str, cur: str) -> float:
    """Mean detection number in the early bin of the current round (doubled scale).

    The two rounds carry independent ancillas, so their contributions add.
    """
    first = _slot_amplitudes(attack, prev, 0, 5)
    second = _slot_amplitudes(attack, cur, 2, 5)
    early = 2
    direct = float(np.vdot(first[early], first[early]).real + np.vdot(second[early], second[early]).real)
    return 2.0 * direct


def pair_sum_identity(attack: EveAttack, state: str) -> tuple[float, float]:
    """``(p(t0|j) + p(t2|j), p(e|j,j))`` for ``state`` in ``'0', '1', '+'``."""
    tb = TimebinProbSet.from_attack(attack)
    left = tb.p(0, state) + tb.p(2, state)
    return left, early_bin_pair_prob(attack, state, state)


def equivalent_side_relation(attack: EveAttack) -> tuple[float, float, float]:
    """``(p(t0|+) + p(t2|+), p(e|0+) + p(e|+1), defect)``.

    ``defect = p(t2|0) + p(t0|1)`` is the bit-error contribution of the Z
    states; the first two values agree exactly when it vanishes.
    """
    tb = TimebinProbSet.from_attack(attack)
    left = tb.side_given_plus
    right = early_bin_pair_prob(attack, "0", "+") + early_bin_pair_prob(attack, "+", "1")
    return left, right, tb.p(2, "0") + tb.p(0, "1")
