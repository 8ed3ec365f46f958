"""Hybrid hopper, vibration-driven walker and single-leg step responses."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .springs import (
    LinearSpringParams,
    PneumaticSpringParams,
    SpringDomainError,
    SpringModel,
    equilibrium_compression,
)
from .timeseries import TimeSeries


class SimulationError(RuntimeError):
    """Integration produced a non-finite or inadmissible state."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message if time is None else f"{message} (t={time:.6g} s)")
        self.time = time


class Mode(str, Enum):
    STANCE = "stance"
    FLIGHT = "flight"


# ---------------------------------------------------------------------------
# ground and hopper


@dataclass(frozen=True)
class GroundModel:
    """Beam ground reduced to its tip stiffness ``c_b / L**3``.

    ``c_ground=None`` picks 5% of critical damping for the foot on the ground.
    """

    c_b: float = 20.0
    L: float = 0.2
    c_ground: float | None = None
    surface: float = 0.0

    def __post_init__(self):
        if not self.L > 0 or not self.c_b > 0:
            raise ValueError("ground needs c_b > 0 and L > 0")

    @property
    def stiffness(self) -> float:
        return self.c_b / self.L**3

    def damping(self, m_foot: float) -> float:
        if self.c_ground is not None:
            return self.c_ground
        return 2.0 * 0.05 * math.sqrt(self.stiffness * m_foot)

    def with_stiffness(self, k_g: float) -> "GroundModel":
        """Same beam, support distance moved to reach ``k_g``."""
        return replace(self, L=(self.c_b / k_g) ** (1.0 / 3.0))


def ground_stiffness(ground: GroundModel) -> float:
    return ground.stiffness


@dataclass(frozen=True)
class HopperPlant:
    """Body (with the driven yoke mass) on a spring leg over compliant ground.

    Heights are measured upward from the undeformed ground surface. The leg
    compression is ``leg_length - (y_body - y_foot)``; below the spring's
    working range the piston sits on an extension stop of stiffness
    ``stop_stiffness``.
    """

    spring: SpringModel = field(default_factory=PneumaticSpringParams)
    m_body: float = 0.45
    m_foot: float = 0.05
    m_drive: float = 0.05
    drive_amplitude: float = 0.01
    c_spring: float = 0.5
    ground: GroundModel = field(default_factory=GroundModel)
    gravity: float = 9.81
    leg_length: float = 0.1
    stop_stiffness: float = 5e4

    def __post_init__(self):
        if min(self.m_body, self.m_foot, self.m_drive) <= 0:
            raise ValueError("masses must be positive")
        if self.drive_amplitude < 0:
            raise ValueError("drive_amplitude must be non-negative")

    @property
    def m_upper(self) -> float:
        """Mass above the spring: body frame plus the yoke mass it carries."""
        return self.m_body + self.m_drive

    def with_spring(self, spring: SpringModel) -> "HopperPlant":
        return replace(self, spring=spring)

    def with_ground(self, ground: GroundModel) -> "HopperPlant":
        return replace(self, ground=ground)

    def leg_force(self, x: float) -> float:
        """Elastic leg force at compression ``x`` (stop included)."""
        lo, hi = self.spring.working_range
        if x < lo:
            return self.spring.force(lo) + self.stop_stiffness * (x - lo)
        if x > hi:
            raise SpringDomainError(f"leg over-compressed: x={x:.6g} m > {hi} m")
        return self.spring.force(x)

    def leg_energy(self, x: float) -> float:
        lo, _ = self.spring.working_range
        if x < lo:
            d = x - lo
            return self.spring.energy(lo) + self.spring.force(lo) * d + 0.5 * self.stop_stiffness * d * d
        return self.spring.energy(x)

    def leg_stiffness(self, x: float) -> float:
        lo, _ = self.spring.working_range
        if x < lo:
            return self.stop_stiffness
        return self.spring.stiffness(x)

    def operating_compression(self) -> float:
        """Leg compression at static equilibrium under the upper mass."""
        load = self.m_upper * self.gravity
        lo, _ = self.spring.working_range
        if math.isfinite(lo) and self.spring.force(lo) >= load:
            return lo - (self.spring.force(lo) - load) / self.stop_stiffness
        return equilibrium_compression(self.spring, load)

    def static_state(self) -> "HybridState":
        k_g = self.ground.stiffness
        delta = (self.m_upper + self.m_foot) * self.gravity / k_g
        y_f = self.ground.surface - delta
        y_b = y_f + self.leg_length - self.operating_compression()
        return HybridState(Mode.STANCE, y_b, y_f, 0.0, 0.0, delta, 0.0)

    def series_stiffness(self, x: float | None = None) -> float:
        x = self.operating_compression() if x is None else x
        k_leg = self.leg_stiffness(x)
        return 1.0 / (1.0 / k_leg + 1.0 / self.ground.stiffness)

    def energy(self, s: "HybridState") -> float:
        """Mechanical energy: kinetic + gravitational + leg + ground (stance only)."""
        x = self.leg_length - (s.y_body - s.y_foot)
        e = 0.5 * self.m_upper * s.v_body**2 + 0.5 * self.m_foot * s.v_foot**2
        e += self.gravity * (self.m_upper * s.y_body + self.m_foot * s.y_foot)
        e += self.leg_energy(x)
        if s.mode is Mode.STANCE:
            e += 0.5 * self.ground.stiffness * (self.ground.surface - s.y_foot) ** 2
        return e


@dataclass(frozen=True)
class HybridState:
    mode: Mode
    y_body: float
    y_foot: float
    v_body: float
    v_foot: float
    ground_deflection: float
    time: float


_CHANNELS = (
    "y_body",
    "y_foot",
    "v_body",
    "v_foot",
    "leg_length",
    "leg_force",
    "contact_force",
    "ground_deflection",
    "drive_force",
    "flight",
    "drive_work",
    "dissipated",
)


def simulate_hopper(
    plant: HopperPlant,
    f: float,
    duration: float,
    dt: float,
    state: HybridState | None = None,
    phase: float = 0.0,
    tunable=None,
) -> TimeSeries:
    """Integrate the hopper under a sinusoidal inertial drive at ``f`` Hz.

    Fixed-step RK4; liftoff (contact force reaching zero) and touchdown (foot
    reaching the surface) are located by bisection to ``dt * 1e-3``. The drive
    phase at the start of the run is ``phase``; ``meta`` carries the final
    state and final phase so runs can be chained. ``tunable``, if given, is a
    callable ``t -> HopperPlant`` evaluated once per step (used for on-line
    retuning of the leg).
    """
    if f < 0 or duration <= 0 or dt <= 0:
        raise ValueError("need f >= 0, duration > 0, dt > 0")
    if f > 0 and dt > 1.0 / (200.0 * f) * (1 + 1e-9):
        raise ValueError(f"dt={dt} gives fewer than 200 steps per drive period")

    s = plant.static_state() if state is None else state
    n = int(round(duration / dt))
    omega = 2.0 * math.pi * f
    out = np.empty((n, len(_CHANNELS)))
    events: list[tuple[float, str]] = []

    t = s.time
    yb, vb, yf, vf = s.y_body, s.v_body, s.y_foot, s.v_foot
    delta = s.ground_deflection
    stance = s.mode is Mode.STANCE
    work = 0.0
    diss = 0.0
    t_start = t

    cur = plant
    ctx = _HopperContext(cur, omega, phase, t_start)
    for i in range(n):
        if tunable is not None:
            new = tunable(t)
            if new is not cur:
                cur = new
                ctx = _HopperContext(cur, omega, phase, t_start)
        y = [yb, vb, yf, vf, work, diss]
        h_left = dt
        t_step = t
        while True:
            y_new = ctx.rk4(y, t_step, h_left, stance)
            d_new = delta if stance else ctx.relax(delta, h_left)
            g0 = ctx.guard(y, delta, t_step, stance)
            g1 = ctx.guard(y_new, d_new, t_step + h_left, stance)
            if not (g0 > 0.0 and g1 <= 0.0):
                y = y_new
                delta = d_new
                break
            lo, hi = 0.0, h_left
            tol = dt * 1e-3
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                ym = ctx.rk4(y, t_step, mid, stance)
                dm = delta if stance else ctx.relax(delta, mid)
                if ctx.guard(ym, dm, t_step + mid, stance) > 0.0:
                    lo = mid
                else:
                    hi = mid
            y = ctx.rk4(y, t_step, hi, stance)
            t_step += hi
            h_left -= hi
            if stance:
                delta = cur.ground.surface - y[2]
                y[5] += 0.5 * cur.ground.stiffness * delta * delta
                events.append((t_step, "liftoff"))
                stance = False
            else:
                delta = ctx.relax(delta, hi)
                y[5] -= 0.5 * cur.ground.stiffness * delta * delta
                events.append((t_step, "touchdown"))
                stance = True
            if h_left <= 1e-15:
                break
        yb, vb, yf, vf, work, diss = y
        t += dt
        if stance:
            delta = cur.ground.surface - yf
        if not all(map(math.isfinite, (yb, vb, yf, vf))):
            raise SimulationError("non-finite hopper state", t)
        x = cur.leg_length - (yb - yf)
        try:
            f_leg = cur.leg_force(x)
        except SpringDomainError as exc:
            raise SimulationError(str(exc), t) from exc
        contact = ctx.contact(yf, vf) if stance else 0.0
        out[i] = (
            yb, yf, vb, vf, yb - yf, f_leg, contact, delta,
            ctx.drive(t), 0.0 if stance else 1.0, work, diss,
        )

    final = HybridState(Mode.STANCE if stance else Mode.FLIGHT, yb, yf, vb, vf, delta, t)
    ts = TimeSeries(dt, dict(zip(_CHANNELS, out.T)), events, t0=t_start + dt)
    ts.meta.update(
        final_state=final,
        final_phase=(phase + omega * (t - t_start)) % (2.0 * math.pi),
        drive_frequency=f,
        initial_state=s,
    )
    return ts


class _HopperContext:
    """Precomputed constants and scalar RHS for one plant/drive setting."""

    def __init__(self, plant: HopperPlant, omega: float, phase: float, t_start: float):
        self.plant = plant
        self.M = plant.m_upper
        self.m_f = plant.m_foot
        self.g = plant.gravity
        self.L0 = plant.leg_length
        self.c = plant.c_spring
        self.k_g = plant.ground.stiffness
        self.c_g = plant.ground.damping(plant.m_foot)
        self.surf = plant.ground.surface
        self.omega = omega
        self.phase = phase
        self.t_start = t_start
        self.amp = plant.m_drive * plant.drive_amplitude * omega * omega
        spring = plant.spring
        self.f_spring = getattr(spring, "force_unchecked", spring.force)
        lo, hi = spring.working_range
        self.lo, self.hi = lo, hi
        self.f_lo = spring.force(lo) if math.isfinite(lo) else 0.0
        self.k_stop = plant.stop_stiffness

    def drive(self, t: float) -> float:
        return self.amp * math.sin(self.phase + self.omega * (t - self.t_start))

    def relax(self, delta: float, h: float) -> float:
        if self.c_g <= 0.0:
            return 0.0
        return delta * math.exp(-self.k_g / self.c_g * h)

    def contact(self, yf: float, vf: float) -> float:
        return self.k_g * (self.surf - yf) - self.c_g * vf

    def guard(self, y, delta: float, t: float, stance: bool) -> float:
        if stance:
            return self.contact(y[2], y[3])
        return y[2] - (self.surf - delta)

    def rhs(self, t, yb, vb, yf, vf, stance):
        x = self.L0 - (yb - yf)
        if x < self.lo:
            fs = self.f_lo + self.k_stop * (x - self.lo)
        elif x > self.hi:
            raise SimulationError(f"leg over-compressed: x={x:.6g} m", t)
        else:
            fs = self.f_spring(x)
        xdot = vf - vb
        fleg = fs + self.c * xdot
        fd = self.amp * math.sin(self.phase + self.omega * (t - self.t_start))
        if stance:
            n = self.k_g * (self.surf - yf) - self.c_g * vf
            pd = self.c_g * vf * vf
        else:
            n = 0.0
            pd = 0.0
        ab = (fleg + fd) / self.M - self.g
        af = (n - fleg) / self.m_f - self.g
        return vb, ab, vf, af, fd * vb, self.c * xdot * xdot + pd

    def rk4(self, y, t, h, stance):
        yb, vb, yf, vf, w, d = y
        k1 = self.rhs(t, yb, vb, yf, vf, stance)
        h2 = 0.5 * h
        k2 = self.rhs(t + h2, yb + h2 * k1[0], vb + h2 * k1[1], yf + h2 * k1[2], vf + h2 * k1[3], stance)
        k3 = self.rhs(t + h2, yb + h2 * k2[0], vb + h2 * k2[1], yf + h2 * k2[2], vf + h2 * k2[3], stance)
        k4 = self.rhs(t + h, yb + h * k3[0], vb + h * k3[1], yf + h * k3[2], vf + h * k3[3], stance)
        h6 = h / 6.0
        return [
            yb + h6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            vb + h6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
            yf + h6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]),
            vf + h6 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3]),
            w + h6 * (k1[4] + 2 * k2[4] + 2 * k3[4] + k4[4]),
            d + h6 * (k1[5] + 2 * k2[5] + 2 * k3[5] + k4[5]),
        ]


def linear_two_mass_response(plant: HopperPlant, f: float) -> float:
    """Steady body amplitude (m) of the stance-only linearized chain.

    Closed-form 2x2 frequency response around static equilibrium; used as an
    independent check of the integrator.
    """
    w = 2.0 * math.pi * f
    k_l = plant.leg_stiffness(plant.operating_compression())
    k_g = plant.ground.stiffness
    c_l = plant.c_spring
    c_g = plant.ground.damping(plant.m_foot)
    M, m = plant.m_upper, plant.m_foot
    Z = np.array(
        [
            [-M * w * w + 1j * w * c_l + k_l, -(1j * w * c_l + k_l)],
            [-(1j * w * c_l + k_l), -m * w * w + 1j * w * (c_l + c_g) + k_l + k_g],
        ]
    )
    F = np.array([plant.m_drive * plant.drive_amplitude * w * w, 0.0])
    return float(abs(np.linalg.solve(Z, F)[0]))


# ---------------------------------------------------------------------------
# single-leg step response


@dataclass(frozen=True)
class LegModel:
    """Effective mass on one leg spring with viscous damping.

    ``load`` is a constant force compressing the spring (0 for a free leg).
    """

    m_eff: float
    spring: SpringModel = field(default_factory=lambda: LinearSpringParams())
    damping: float = 0.0
    load: float = 0.0

    def __post_init__(self):
        if not self.m_eff > 0:
            raise ValueError("m_eff must be positive")
        if self.damping < 0:
            raise ValueError("damping must be non-negative")


def step_response(leg: LegModel, x0: float, duration: float, dt: float) -> TimeSeries:
    """Release the leg at rest from compression ``x0`` and record the decay.

    Channels ``x`` (compression, m), ``v`` (m/s) and ``energy`` (J, kinetic
    plus elastic minus load work), RK4 with step ``dt``.
    """
    lo, hi = leg.spring.working_range
    if not lo <= x0 <= hi:
        raise SpringDomainError(f"x0={x0} outside the spring range [{lo}, {hi}]")
    m, c, load = leg.m_eff, leg.damping, leg.load
    force = leg.spring.force

    def acc(x, v):
        return (load - force(x) - c * v) / m

    n = int(round(duration / dt))
    xs = np.empty(n + 1)
    vs = np.empty(n + 1)
    x, v = float(x0), 0.0
    xs[0], vs[0] = x, v
    for i in range(1, n + 1):
        try:
            a1 = acc(x, v)
            x2, v2 = x + 0.5 * dt * v, v + 0.5 * dt * a1
            a2 = acc(x2, v2)
            x3, v3 = x + 0.5 * dt * v2, v + 0.5 * dt * a2
            a3 = acc(x3, v3)
            x4, v4 = x + dt * v3, v + dt * a3
            a4 = acc(x4, v4)
        except SpringDomainError as exc:
            raise SimulationError(str(exc), i * dt) from exc
        x += dt / 6.0 * (v + 2 * v2 + 2 * v3 + v4)
        v += dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
        if not (math.isfinite(x) and math.isfinite(v)):
            raise SimulationError("non-finite leg state", i * dt)
        xs[i], vs[i] = x, v
    energy = 0.5 * m * vs**2 + np.array([leg.spring.energy(xi) for xi in xs]) - load * xs
    return TimeSeries(dt, {"x": xs, "v": vs, "energy": energy}, t0=0.0, meta={"leg": leg})
