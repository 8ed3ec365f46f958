"""Adaptive controllers: adaptive-frequency oscillator, phase-oscillator communities, resonance tracker."""

from .hopf import (
    FeedbackTap,
    HarmonicPlant,
    HopfParams,
    HopfState,
    convergence_time,
    drive_oscillator,
    entrain,
    harmonic_from_hopper,
    hopf_step,
)
from .kuramoto import (
    KuramotoCommunity,
    LeggedBody,
    kuramoto_step,
    lorentzian_frequencies,
    mean_order,
    order_parameter,
    plv,
    quad_community_run,
    run_community,
)
from .tracker import Tunable, TrackerParams, TrackerRun, apply_tunable, read_tunable, resonance_tracker

__all__ = [
    "FeedbackTap", "HarmonicPlant", "HopfParams", "HopfState", "convergence_time", "drive_oscillator",
    "entrain", "harmonic_from_hopper", "hopf_step", "KuramotoCommunity", "LeggedBody", "kuramoto_step",
    "lorentzian_frequencies", "mean_order", "order_parameter", "plv", "quad_community_run", "run_community",
    "Tunable", "TrackerParams", "TrackerRun", "apply_tunable", "read_tunable", "resonance_tracker",
]
