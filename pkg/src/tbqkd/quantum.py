"""Collective-attack model and Bob's measurement models.

An attack is stored as six unnormalised ancilla vectors ``phi[i, j]`` where
``i`` is Alice's Z bit and ``j`` indexes the photon state Bob receives
(``0``, ``1`` or the no-photon state).  All probabilities are computed by
brute force from amplitudes and serve as ground truth for the estimators in
:mod:`tbqkd.phase_error`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ATOL",
    "Convention",
    "CondProbTable",
    "EveAttack",
    "InvalidAttack",
    "PovmSet",
    "PreparedState",
    "SimpleOutcome",
    "TimebinOutcome",
    "bob_components",
    "cond_prob_simple",
    "cond_prob_table",
    "cond_prob_timebin_direct",
    "cond_prob_timebin_scaled",
    "make_identity_attack",
    "make_intercept_resend_attack",
    "make_phase_flip_attack",
    "povm_elements",
    "povm_prob",
    "sample_random_attack",
]

ATOL = 1e-12
DEFAULT_ANCILLA_DIM = 4

# Bob-side component index inside EveAttack.phi
BOB_0, BOB_1, BOB_EMPTY = 0, 1, 2


class InvalidAttack(ValueError):
    pass


class PreparedState(enum.Enum):
    Z0 = "0"
    Z1 = "1"
    XPLUS = "+"
    XMINUS = "-"  # oracle only, never sent in the protocol

    @property
    def is_protocol_state(self) -> bool:
        return self is not PreparedState.XMINUS


class SimpleOutcome(enum.Enum):
    B0 = "0"
    B1 = "1"
    BMINUS = "-"
    BPLUS = "+"  # oracle only, Bob has no such projector in the protocol
    NO_DETECT = "empty"


class TimebinOutcome(enum.Enum):
    T0 = "t0"
    T1 = "t1"
    T2 = "t2"
    NO_DETECT = "empty"


MONITOR_OUTCOMES = (TimebinOutcome.T0, TimebinOutcome.T1, TimebinOutcome.T2)


class Convention(enum.Enum):
    DIRECT = "direct"
    SCALED = "scaled"


@dataclass(frozen=True, eq=False)
class EveAttack:
    """Collective attack ``U|i>|phi> = sum_j |j>|phi[i, j]>``.

    ``phi`` has shape ``(2, 3, ancilla_dim)``; axis 1 is ordered
    ``(0, 1, empty)``.
    """

    phi: np.ndarray

    def __post_init__(self):
        phi = np.array(self.phi, dtype=complex)
        if phi.ndim != 3 or phi.shape[:2] != (2, 3) or phi.shape[2] < 1:
            raise InvalidAttack(f"phi must have shape (2, 3, d>=1), got {phi.shape}")
        if not np.all(np.isfinite(phi)):
            raise InvalidAttack("phi contains non-finite amplitudes")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @property
    def ancilla_dim(self) -> int:
        return self.phi.shape[2]

    def vector(self, i: int, j) -> np.ndarray:
        """``phi_i^j``; ``j`` may be 0, 1 or ``"empty"``."""
        jj = BOB_EMPTY if j in ("empty", None) else int(j)
        return self.phi[i, jj]

    def unitarity_residuals(self) -> tuple[float, float, float]:
        a, b = self.phi[0].ravel(), self.phi[1].ravel()
        return (
            abs(np.vdot(a, a) - 1.0),
            abs(np.vdot(b, b) - 1.0),
            abs(np.vdot(a, b)),
        )

    def validate(self, tol: float = ATOL) -> "EveAttack":
        res = self.unitarity_residuals()
        if max(res) > tol:
            raise InvalidAttack(f"attack is not an isometry (residuals {res})")
        return self


def _basis(dim: int, k: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[k] = 1.0
    return v


def make_identity_attack(ancilla_dim: int = DEFAULT_ANCILLA_DIM) -> EveAttack:
    if ancilla_dim < 1:
        raise InvalidAttack("ancilla_dim must be >= 1")
    phi = np.zeros((2, 3, ancilla_dim), dtype=complex)
    phi[0, BOB_0] = _basis(ancilla_dim, 0)
    phi[1, BOB_1] = _basis(ancilla_dim, 0)
    return EveAttack(phi)


def make_intercept_resend_attack(ancilla_dim: int = DEFAULT_ANCILLA_DIM) -> EveAttack:
    """Eve measures in Z and keeps an orthogonal record of the bit."""
    if ancilla_dim < 2:
        raise InvalidAttack("intercept-resend needs ancilla_dim >= 2")
    phi = np.zeros((2, 3, ancilla_dim), dtype=complex)
    phi[0, BOB_0] = _basis(ancilla_dim, 0)
    phi[1, BOB_1] = _basis(ancilla_dim, 1)
    return EveAttack(phi)


def make_phase_flip_attack(ancilla_dim: int = DEFAULT_ANCILLA_DIM) -> EveAttack:
    """Applies Z to the qubit: |+> goes to |->."""
    if ancilla_dim < 1:
        raise InvalidAttack("ancilla_dim must be >= 1")
    phi = np.zeros((2, 3, ancilla_dim), dtype=complex)
    phi[0, BOB_0] = _basis(ancilla_dim, 0)
    phi[1, BOB_1] = -_basis(ancilla_dim, 0)
    return EveAttack(phi)


def sample_random_attack(
    ancilla_dim: int = DEFAULT_ANCILLA_DIM,
    loss_weight: float = 0.0,
    rng_seed: int | np.random.Generator | None = None,
) -> EveAttack:
    """Random isometry from two orthonormalised complex Gaussian columns.

    The no-photon rows are scaled by ``sqrt(2 w / (1 - w))`` before the QR
    step, which puts on average a fraction ``w`` of the norm into the loss
    block.  ``loss_weight = 0`` gives a lossless attack exactly.
    """
    if ancilla_dim < 1:
        raise InvalidAttack("ancilla_dim must be >= 1")
    if not 0.0 <= loss_weight < 1.0:
        raise InvalidAttack("loss_weight must lie in [0, 1)")
    rng = np.random.default_rng(rng_seed)
    d = ancilla_dim
    g = rng.standard_normal((3 * d, 2)) + 1j * rng.standard_normal((3 * d, 2))
    g[2 * d :] *= np.sqrt(2.0 * loss_weight / (1.0 - loss_weight))
    q, _ = np.linalg.qr(g)
    phi = np.stack([q[:, 0].reshape(3, d), q[:, 1].reshape(3, d)])
    return EveAttack(phi)


def bob_components(attack: EveAttack, a: PreparedState) -> np.ndarray:
    """Rows ``(0, 1, empty)`` of ``U_AE |a>|phi>`` as ancilla vectors."""
    phi = attack.phi
    if a is PreparedState.Z0:
        return phi[0]
    if a is PreparedState.Z1:
        return phi[1]
    sign = 1.0 if a is PreparedState.XPLUS else -1.0
    return (phi[0] + sign * phi[1]) / np.sqrt(2.0)


def _norm2(v: np.ndarray) -> float:
    return float(np.vdot(v, v).real)


def cond_prob_simple(attack: EveAttack, a: PreparedState, b: SimpleOutcome) -> float:
    """Projection probability ``|<b| U_AE |a>|phi>|^2`` summed over the ancilla."""
    c = bob_components(attack, a)
    if b is SimpleOutcome.B0:
        return _norm2(c[BOB_0])
    if b is SimpleOutcome.B1:
        return _norm2(c[BOB_1])
    if b is SimpleOutcome.BMINUS:
        return _norm2(c[BOB_0] - c[BOB_1]) / 2.0
    if b is SimpleOutcome.BPLUS:
        return _norm2(c[BOB_0] + c[BOB_1]) / 2.0
    return _norm2(c[BOB_EMPTY])


# Monitoring-line interferometer, rows (t0, t1, t2, r0, r1, r2, empty),
# columns (|0>, |1>, |empty>).
_UBX = np.array(
    [
        [0.5, 0.0, 0.0],
        [-0.5, 0.5, 0.0],
        [0.0, -0.5, 0.0],
        [0.5, 0.0, 0.0],
        [0.5, 0.5, 0.0],
        [0.0, 0.5, 0.0],
        [0.0, 0.0, 1.0],
    ]
)


def monitoring_amplitudes(attack: EveAttack, a: PreparedState) -> np.ndarray:
    """``U_B^X U_AE |a>|phi>`` as a ``(7, ancilla_dim)`` array."""
    return _UBX @ bob_components(attack, a)


def cond_prob_timebin_direct(
    attack: EveAttack, a: PreparedState, b: TimebinOutcome
) -> float:
    amps = monitoring_amplitudes(attack, a)
    probs = np.einsum("ij,ij->i", amps.conj(), amps).real
    if b is TimebinOutcome.NO_DETECT:
        # reflected port and the empty state are both silent
        return float(probs[3:].sum())
    return float(probs[MONITOR_OUTCOMES.index(b)])


def cond_prob_timebin_scaled(
    attack: EveAttack, a: PreparedState, b: TimebinOutcome
) -> float:
    """Closed-form monitoring probabilities in terms of ancilla overlaps.

    These are twice the physically normalised values of
    :func:`cond_prob_timebin_direct` for t0, t1 and t2.
    """

    def ip(i, j, k, l):
        return complex(np.vdot(attack.vector(i, j), attack.vector(k, l)))

    def n(i, j):
        return ip(i, j, i, j).real

    def re(i, j, k, l):
        return ip(i, j, k, l).real

    if a in (PreparedState.Z0, PreparedState.Z1):
        i = 0 if a is PreparedState.Z0 else 1
        if b is TimebinOutcome.T0:
            return 0.5 * n(i, 0)
        if b is TimebinOutcome.T1:
            return 0.5 * (n(i, 0) + n(i, 1) - 2 * re(i, 0, i, 1))
        if b is TimebinOutcome.T2:
            return 0.5 * n(i, 1)
        return n(i, "empty")
    if a is PreparedState.XPLUS:
        if b is TimebinOutcome.T0:
            return 0.25 * (n(0, 0) + n(1, 0) + 2 * re(0, 0, 1, 0))
        if b is TimebinOutcome.T1:
            return 0.25 * (
                n(0, 0) + n(1, 0) + n(0, 1) + n(1, 1)
                - 2 * re(0, 0, 0, 1) + 2 * re(0, 0, 1, 0) - 2 * re(0, 0, 1, 1)
                - 2 * re(0, 1, 1, 0) + 2 * re(0, 1, 1, 1) - 2 * re(1, 0, 1, 1)
            )
        if b is TimebinOutcome.T2:
            return 0.25 * (n(0, 1) + n(1, 1) + 2 * re(0, 1, 1, 1))
        return 0.5 * (n(0, "empty") + n(1, "empty") + 2 * re(0, "empty", 1, "empty"))
    raise ValueError("closed-form monitoring probabilities exist only for 0, 1 and +")


@dataclass(frozen=True)
class CondProbTable:
    convention: Convention
    entries: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.entries[key]

    def row_sum(self, a: PreparedState) -> float:
        return sum(v for (aa, _), v in self.entries.items() if aa is a)


def cond_prob_table(
    attack: EveAttack,
    kind: str = "timebin",
    convention: Convention = Convention.DIRECT,
    states=None,
) -> CondProbTable:
    """Tabulate p(b|a).  ``kind`` is ``"simple"`` or ``"timebin"``."""
    if kind == "simple":
        if convention is not Convention.DIRECT:
            raise ValueError("the simple scheme only has the direct convention")
        states = states or tuple(PreparedState)
        entries = {(a, b): cond_prob_simple(attack, a, b) for a in states for b in SimpleOutcome}
        return CondProbTable(convention, entries)
    if kind != "timebin":
        raise ValueError(f"unknown table kind {kind!r}")
    if convention is Convention.DIRECT:
        states = states or tuple(PreparedState)
        fn = cond_prob_timebin_direct
    else:
        states = states or (PreparedState.Z0, PreparedState.Z1, PreparedState.XPLUS)
        fn = cond_prob_timebin_scaled
    entries = {(a, b): fn(attack, a, b) for a in states for b in TimebinOutcome}
    return CondProbTable(convention, entries)


@dataclass(frozen=True)
class PovmSet:
    """Monitoring-line POVM on span{|0,0>, |1,0>, |0,1>} (in that order)."""

    t0: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    empty: np.ndarray

    def __getitem__(self, b: TimebinOutcome) -> np.ndarray:
        return {
            TimebinOutcome.T0: self.t0,
            TimebinOutcome.T1: self.t1,
            TimebinOutcome.T2: self.t2,
            TimebinOutcome.NO_DETECT: self.empty,
        }[b]

    def elements(self) -> tuple[np.ndarray, ...]:
        return self.t0, self.t1, self.t2, self.empty


# occupation-number basis index for each Bob component
_VAC, _EARLY, _LATE = 0, 1, 2


def povm_elements() -> PovmSet:
    vac = np.zeros(3)
    vac[_VAC] = 1.0
    e = np.zeros(3)
    e[_EARLY] = 1.0
    l = np.zeros(3)
    l[_LATE] = 1.0
    t0 = 0.25 * np.outer(e, e)
    t1 = 0.25 * np.outer(e - l, e - l)
    t2 = 0.25 * np.outer(l, l)
    empty = 0.5 * np.eye(3) + 0.5 * np.outer(vac, vac) + 0.25 * (np.outer(l, e) + np.outer(e, l))
    return PovmSet(t0, t1, t2, empty)


def bob_reduced_state(attack: EveAttack, a: PreparedState) -> np.ndarray:
    """Bob's 3x3 density matrix after tracing out Eve's ancilla."""
    c = bob_components(attack, a)
    embedded = np.zeros_like(c)
    embedded[_EARLY] = c[BOB_0]
    embedded[_LATE] = c[BOB_1]
    embedded[_VAC] = c[BOB_EMPTY]
    return embedded @ embedded.conj().T


def povm_prob(attack: EveAttack, a: PreparedState, b: TimebinOutcome) -> float:
    rho = bob_reduced_state(attack, a)
    return float(np.trace(povm_elements()[b] @ rho).real)
