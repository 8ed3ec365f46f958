"""Epoch-wise extremum seeking on a leg tunable at a fixed drive frequency."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..analysis import steady_amplitude
from ..plant import HopperPlant, HybridState, simulate_hopper


class Tunable(str, Enum):
    PRESSURE = "pressure"
    JACK_TAP = "jack_tap"
    COIL_CURRENT = "coil_current"


# sign of d(stiffness)/d(u) for each tunable
STIFFNESS_SIGN = {Tunable.PRESSURE: 1.0, Tunable.JACK_TAP: -1.0, Tunable.COIL_CURRENT: 1.0}


def apply_tunable(plant: HopperPlant, tunable: Tunable, u: float) -> HopperPlant:
    s = plant.spring
    if tunable is Tunable.PRESSURE:
        return plant.with_spring(s.with_pressure(u))
    if tunable is Tunable.JACK_TAP:
        return plant.with_spring(s.with_tap(u))
    return plant.with_spring(s.with_current(u))


_FIELD = {Tunable.PRESSURE: "P_v0", Tunable.JACK_TAP: "tap", Tunable.COIL_CURRENT: "I"}


def read_tunable(plant: HopperPlant, tunable: Tunable) -> float:
    return float(getattr(plant.spring, _FIELD[tunable]))


@dataclass(frozen=True)
class TrackerParams:
    """``probe`` and ``bounds`` are in tunable units (Pa, tap fraction or A).

    Each epoch runs three dwells of ``epoch_cycles`` drive periods (nominal,
    ``+probe``, ``-probe``) and measures the ``channel`` amplitude over the
    last ``measure_cycles`` of each. When ``|A+ - A-|`` exceeds
    ``deadband`` times the nominal amplitude the tunable moves by
    ``gain * probe`` towards the larger amplitude.
    """

    probe: float
    bounds: tuple[float, float]
    epoch_cycles: int = 40
    gain: float = 1.0
    deadband: float = 0.02
    tunable: Tunable = Tunable.PRESSURE
    measure_cycles: int = 8
    channel: str = "leg_length"
    steps_per_cycle: int = 200

    def __post_init__(self):
        if not self.probe > 0:
            raise ValueError("probe must be positive")
        if self.epoch_cycles < 2:
            raise ValueError("epoch must span at least 2 cycles")
        if not self.bounds[0] < self.bounds[1]:
            raise ValueError("bounds must be ordered")
        if not 0 < self.measure_cycles * 3 <= self.epoch_cycles:
            raise ValueError("epoch_cycles must hold three measurement windows")
        object.__setattr__(self, "tunable", Tunable(self.tunable))


@dataclass
class TrackerRun:
    epochs: np.ndarray
    tuning: np.ndarray
    amplitude: np.ndarray
    amplitude_plus: np.ndarray
    amplitude_minus: np.ndarray
    ground_stiffness: np.ndarray
    series_stiffness: np.ndarray
    leg_stiffness: np.ndarray
    saturated: np.ndarray
    frequency: float
    events: list = field(default_factory=list)

    def columns(self) -> dict:
        return {
            "epoch": self.epochs,
            "tuning": self.tuning,
            "amplitude": self.amplitude,
            "amplitude_plus": self.amplitude_plus,
            "amplitude_minus": self.amplitude_minus,
            "ground_stiffness": self.ground_stiffness,
            "series_stiffness": self.series_stiffness,
            "leg_stiffness": self.leg_stiffness,
            "saturated": self.saturated.astype(float),
        }


class _Dweller:
    """Keeps the hopper running across parameter changes (state and drive phase carried)."""

    def __init__(self, f: float, t: TrackerParams):
        self.f = f
        self.t = t
        self.state: HybridState | None = None
        self.phase = 0.0

    def dwell(self, plant: HopperPlant) -> float:
        t = self.t
        ts = simulate_hopper(
            plant,
            self.f,
            t.epoch_cycles / self.f,
            1.0 / (t.steps_per_cycle * self.f),
            state=self.state,
            phase=self.phase,
        )
        self.state = ts.meta["final_state"]
        self.phase = ts.meta["final_phase"]
        return steady_amplitude(ts, t.channel, t.measure_cycles, self.f)


def resonance_tracker(
    plant: HopperPlant,
    t: TrackerParams,
    disturbances: dict[int, float] | None = None,
    epochs: int = 40,
    f: float = 4.8,
    u0: float | None = None,
) -> TrackerRun:
    """Track the amplitude peak through ground-stiffness changes at fixed ``f``.

    ``disturbances`` maps an epoch index to the ground stiffness (N/m) that
    takes effect at the start of that epoch. The drive frequency never
    changes; only the leg tunable does, clamped to ``t.bounds``.
    """
    lo, hi = t.bounds
    u = read_tunable(plant, t.tunable) if u0 is None else u0
    u = min(max(u, lo), hi)
    schedule = dict(disturbances or {})
    run = _Dweller(f, t)
    cols: dict[str, list] = {k: [] for k in ("u", "A", "Ap", "Am", "kg", "ks", "kl", "sat")}
    events = []
    ground = plant.ground
    for e in range(epochs):
        if e in schedule:
            ground = ground.with_stiffness(schedule[e])
            events.append((e, f"ground stiffness -> {schedule[e]:.6g} N/m"))
        base = plant.with_ground(ground)
        nominal = apply_tunable(base, t.tunable, u)
        A = run.dwell(nominal)
        up = min(u + t.probe, hi)
        dn = max(u - t.probe, lo)
        Ap = run.dwell(apply_tunable(base, t.tunable, up))
        Am = run.dwell(apply_tunable(base, t.tunable, dn))
        x = nominal.operating_compression()
        cols["u"].append(u)
        cols["A"].append(A)
        cols["Ap"].append(Ap)
        cols["Am"].append(Am)
        cols["kg"].append(ground.stiffness)
        cols["ks"].append(nominal.series_stiffness(x))
        cols["kl"].append(nominal.leg_stiffness(x))
        sat = False
        if abs(Ap - Am) > t.deadband * A and up > dn:
            step = t.gain * t.probe * math.copysign(1.0, Ap - Am)
            target = u + step
            u = min(max(target, lo), hi)
            sat = u != target
            if sat:
                events.append((e, "tunable saturated"))
        cols["sat"].append(sat)
    return TrackerRun(
        np.arange(epochs),
        np.array(cols["u"]),
        np.array(cols["A"]),
        np.array(cols["Ap"]),
        np.array(cols["Am"]),
        np.array(cols["kg"]),
        np.array(cols["ks"]),
        np.array(cols["kl"]),
        np.array(cols["sat"]),
        f,
        events,
    )
