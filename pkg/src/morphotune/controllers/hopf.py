"""Adaptive-frequency Hopf oscillator and closed-loop entrainment to a plant."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

R_FLOOR = 1e-9


class FeedbackTap(str, Enum):
    POSITION = "position"
    VELOCITY = "velocity"
    ENVELOPE = "envelope"


@dataclass(frozen=True)
class HopfParams:
    mu: float = 1.0
    gamma_relax: float = 5.0
    epsilon: float = 1.0
    omega_init: float = 6.0
    phase_lag: float = 0.0
    feedback_tap: FeedbackTap = FeedbackTap.POSITION
    drive_gain: float = 1.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not self.gamma_relax > 0:
            raise ValueError("gamma_relax must be positive")
        if not self.omega_init > 0:
            raise ValueError("omega_init must be positive")
        if not 0.0 <= self.phase_lag < 2 * math.pi:
            raise ValueError("phase_lag must lie in [0, 2*pi)")
        object.__setattr__(self, "feedback_tap", FeedbackTap(self.feedback_tap))


@dataclass(frozen=True)
class HopfState:
    x: float
    y: float
    omega: float

    @property
    def r(self) -> float:
        return math.hypot(self.x, self.y)

    @classmethod
    def initial(cls, p: HopfParams) -> "HopfState":
        return cls(math.sqrt(p.mu), 0.0, p.omega_init)


def _field(x, y, w, p: HopfParams, F):
    r2 = x * x + y * y
    r = max(math.sqrt(r2), R_FLOOR)
    g = p.gamma_relax * (p.mu - r2)
    return (
        g * x - w * y + p.epsilon * F,
        g * y + w * x,
        -p.epsilon * F * y / r,
    )


def hopf_step(s: HopfState, p: HopfParams, F: float, dt: float) -> HopfState:
    """One RK4 step with the feedback ``F`` held over the step."""
    if not math.isfinite(F):
        raise ValueError("feedback must be finite")
    x, y, w = s.x, s.y, s.omega
    k1 = _field(x, y, w, p, F)
    k2 = _field(x + 0.5 * dt * k1[0], y + 0.5 * dt * k1[1], w + 0.5 * dt * k1[2], p, F)
    k3 = _field(x + 0.5 * dt * k2[0], y + 0.5 * dt * k2[1], w + 0.5 * dt * k2[2], p, F)
    k4 = _field(x + dt * k3[0], y + dt * k3[1], w + dt * k3[2], p, F)
    return HopfState(
        x + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
        y + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
        w + dt / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]),
    )


def drive_oscillator(p: HopfParams, forcing, duration: float, dt: float) -> dict:
    """Open-loop run under a prescribed forcing ``forcing(t)``; returns ``t``, ``x``, ``y``, ``omega``."""
    n = int(round(duration / dt))
    out = np.empty((n + 1, 3))
    s = HopfState.initial(p)
    out[0] = s.x, s.y, s.omega
    for i in range(n):
        s = hopf_step(s, p, float(forcing(i * dt)), dt)
        out[i + 1] = s.x, s.y, s.omega
    return {"t": dt * np.arange(n + 1), "x": out[:, 0], "y": out[:, 1], "omega": out[:, 2]}


@dataclass(frozen=True)
class HarmonicPlant:
    m: float = 1.0
    k: float = 100.0
    c: float = 0.0

    def __post_init__(self):
        if not (self.m > 0 and self.k > 0 and self.c >= 0):
            raise ValueError("harmonic plant needs m > 0, k > 0, c >= 0")

    @property
    def omega0(self) -> float:
        return math.sqrt(self.k / self.m)


class _Delay:
    """Ring buffer returning the input from ``lag`` seconds ago (linear interpolation)."""

    def __init__(self, dt: float, max_lag: float):
        self.dt = dt
        self.buf = np.zeros(int(math.ceil(max_lag / dt)) + 3)
        self.head = 0
        self.count = 0

    def push(self, v: float) -> None:
        self.head = (self.head + 1) % len(self.buf)
        self.buf[self.head] = v
        self.count += 1

    def get(self, lag: float) -> float:
        d = min(lag / self.dt, len(self.buf) - 2, self.count - 1)
        if d <= 0:
            return float(self.buf[self.head])
        i = int(d)
        f = d - i
        a = self.buf[(self.head - i) % len(self.buf)]
        b = self.buf[(self.head - i - 1) % len(self.buf)]
        return float((1 - f) * a + f * b)


def _plant_rhs(z, v, u, pl: HarmonicPlant):
    return v, (u - pl.c * v - pl.k * z) / pl.m


def entrain(
    plant, p: HopfParams, duration: float, dt: float, z0: float = 0.0, record_every: int = 1
) -> dict:
    """Closed loop: plant forced by ``drive_gain * x``, tapped plant signal fed back.

    ``plant`` is a :class:`HarmonicPlant` or a hopper, which is replaced by
    its stance linearization. The feedback is delayed by ``phase_lag / omega``
    through a ring buffer, and the plant is released at rest from ``z0``.

    Converged means the least-squares slope of ``omega`` over the final 10%
    of the run, relative to ``omega``, is below 1e-4 per second. Leaving
    ``[omega_init/10, 10 omega_init]`` stops the run and sets ``diverged``.
    """
    if hasattr(plant, "m_upper"):
        plant = harmonic_from_hopper(plant)
    if dt * max(p.omega_init, plant.omega0) >= 0.1:
        raise ValueError("dt * omega must stay below 0.1")
    n = int(round(duration / dt))
    delay = _Delay(dt, p.phase_lag / (p.omega_init / 10) if p.phase_lag > 0 else dt)
    s = HopfState.initial(p)
    z, v = float(z0), 0.0
    w_lo, w_hi = p.omega_init / 10, p.omega_init * 10
    rec = []
    diverged = False
    for i in range(n):
        fb = _tap(p.feedback_tap, z, v, s.omega)
        delay.push(fb)
        F = delay.get(p.phase_lag / s.omega) if p.phase_lag > 0 else fb
        # plant and oscillator advanced together, drive from the oscillator state
        u0 = p.drive_gain * s.x
        s_new = hopf_step(s, p, F, dt)
        u1 = p.drive_gain * s_new.x
        z, v = _plant_rk4(z, v, u0, u1, plant, dt)
        s = s_new
        if not (math.isfinite(s.omega) and math.isfinite(z)):
            diverged = True
            break
        if i % record_every == 0:
            rec.append((i * dt + dt, s.omega, s.x, z, v, math.hypot(z, v / plant.omega0)))
        if not w_lo <= s.omega <= w_hi:
            diverged = True
            break
    return _entrain_report(np.array(rec), p, diverged)


def _tap(tap: FeedbackTap, z: float, v: float, w: float) -> float:
    if tap is FeedbackTap.POSITION:
        return z
    if tap is FeedbackTap.VELOCITY:
        return v
    return math.hypot(z, v / w)


def _plant_rk4(z, v, u0, u1, pl: HarmonicPlant, dt):
    um = 0.5 * (u0 + u1)
    a1 = _plant_rhs(z, v, u0, pl)
    a2 = _plant_rhs(z + 0.5 * dt * a1[0], v + 0.5 * dt * a1[1], um, pl)
    a3 = _plant_rhs(z + 0.5 * dt * a2[0], v + 0.5 * dt * a2[1], um, pl)
    a4 = _plant_rhs(z + dt * a3[0], v + dt * a3[1], u1, pl)
    return (
        z + dt / 6 * (a1[0] + 2 * a2[0] + 2 * a3[0] + a4[0]),
        v + dt / 6 * (a1[1] + 2 * a2[1] + 2 * a3[1] + a4[1]),
    )


def _entrain_report(rec: np.ndarray, p: HopfParams, diverged: bool) -> dict:
    t, w, x, z, v, amp = (rec[:, j] for j in range(6)) if len(rec) else (np.zeros(0),) * 6
    converged = False
    t_conv = math.inf
    if len(t) >= 10 and not diverged:
        k = max(2, len(t) // 10)
        slope = np.polyfit(t[-k:], w[-k:], 1)[0]
        converged = bool(abs(slope) / w[-1] < 1e-4)
        if converged:
            t_conv = convergence_time(t, w)
    return {
        "t": t,
        "omega": w,
        "x": x,
        "position": z,
        "velocity": v,
        "amplitude": amp,
        "converged": converged,
        "diverged": diverged,
        "omega_final": float(np.mean(w[-max(1, len(w) // 10):])) if len(w) else math.nan,
        "convergence_time": t_conv,
    }


def convergence_time(t: np.ndarray, w: np.ndarray, band: float = 0.01) -> float:
    """First time after which ``omega`` stays within ``band`` of its final mean."""
    w_end = float(np.mean(w[-max(1, len(w) // 10):]))
    outside = np.flatnonzero(np.abs(w - w_end) > band * abs(w_end))
    if len(outside) == 0:
        return float(t[0])
    if outside[-1] == len(w) - 1:
        return math.inf
    return float(t[outside[-1] + 1])


def harmonic_from_hopper(plant) -> HarmonicPlant:
    """Stance linearization of a hopper: upper mass on the series leg-ground stiffness."""
    return HarmonicPlant(plant.m_upper, plant.series_stiffness(), plant.c_spring)
