"""Security analysis toolkit for three-state time-bin QKD with one-decoy finite-key bounds."""
from .channel import ChannelParams, SourceConfig, simulate_counts, single_photon_reference_counts
from .decoy import (
    FiniteKeyEpsilons,
    IntensitySettings,
    KeyRateBreakdown,
    ObservedCounts,
    analyze_bb84_single_photon,
    analyze_decoy,
    analyze_three_bin_single_photon,
)
from .optimize import ParamSpace, optimize, optimize_sweep
from .phase_error import NoStatistics, ex_joint, ex_simple, ex_timebin, ex_ideal
from .quantum import EveAttack, sample_random_attack

__all__ = [
    "ChannelParams",
    "EveAttack",
    "FiniteKeyEpsilons",
    "IntensitySettings",
    "KeyRateBreakdown",
    "NoStatistics",
    "ObservedCounts",
    "ParamSpace",
    "SourceConfig",
    "analyze_bb84_single_photon",
    "analyze_decoy",
    "analyze_three_bin_single_photon",
    "ex_joint",
    "ex_simple",
    "ex_timebin",
    "ex_ideal",
    "optimize",
    "optimize_sweep",
    "sample_random_attack",
    "simulate_counts",
    "single_photon_reference_counts",
]
