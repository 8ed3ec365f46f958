"""Planar vibration-driven walker: rigid foot, springy ankle, shaking body.

Generalized coordinates ``q = (x, y, theta, phi)``: foot centre position,
foot angle and absolute body angle. The body pivots on the foot centre
through a torsional spring (the jack spring) and carries a counter-rotating
rotor pair whose horizontal forces cancel, leaving a vertical shaking force
``imbalance * Omega**2 * sin(Omega t)`` at the body centre of mass. The foot
touches the ground at its two ends with penalty normal forces and
tanh-regularized Coulomb friction.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numba
import numpy as np

from .plant import SimulationError
from .timeseries import TimeSeries

N_STATE = 8


@dataclass(frozen=True)
class VibrobotParams:
    foot_length: float = 0.2
    x_com: float = 0.0
    com_height: float = 0.1
    m_body: float = 0.4
    I_body: float = 1e-3
    m_foot: float = 0.1
    joint_stiffness: float = 20.0
    joint_damping: float = 0.02
    imbalance: float = 8e-4
    spin_frequency: float = 9.0
    friction: float = 0.5
    slip_scale: float = 1e-4
    contact_stiffness: float = 2e4
    contact_damping: float = 20.0
    gravity: float = 9.81

    def __post_init__(self):
        if not self.foot_length > 0:
            raise ValueError("foot_length must be positive")
        if not abs(self.x_com) < self.foot_length / 2:
            raise ValueError("|x_com| must stay below half the foot length")
        if min(self.m_body, self.m_foot, self.I_body) <= 0:
            raise ValueError("masses and inertia must be positive")

    @property
    def body_offset(self) -> float:
        """Horizontal body CoM offset from the joint giving overall ``x_com``."""
        return self.x_com * (self.m_body + self.m_foot) / self.m_body

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.foot_length,
                self.body_offset,
                self.com_height,
                self.m_body,
                self.I_body,
                self.m_foot,
                self.m_foot * self.foot_length**2 / 12.0,
                self.joint_stiffness,
                self.joint_damping,
                self.imbalance * (2 * math.pi * self.spin_frequency) ** 2,
                2 * math.pi * self.spin_frequency,
                self.friction,
                self.slip_scale,
                self.contact_stiffness,
                self.contact_damping,
                self.gravity,
            ]
        )

    def mirrored(self) -> "VibrobotParams":
        from dataclasses import replace

        return replace(self, x_com=-self.x_com)


@numba.njit(cache=True)
def _rhs(t, s, p, out):
    L, bx, h, mb, Ib, mf, If, kj, cj, fe_amp, Om, mu, vs, kc, cc, g = (
        p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7],
        p[8], p[9], p[10], p[11], p[12], p[13], p[14], p[15],
    )
    y, th, ph = s[1], s[2], s[3]
    xd, yd, thd, phd = s[4], s[5], s[6], s[7]

    c, sn = math.cos(ph), math.sin(ph)
    rx = bx * c - h * sn
    ry = bx * sn + h * c

    # generalized forces: gravity and shaking at the body CoM, centripetal
    # term of the body, ankle spring
    fy_body = -mb * g + fe_amp * math.sin(Om * t)
    w2 = mb * phd * phd
    q0 = w2 * rx
    q1 = -mf * g + fy_body + w2 * ry
    tau = -kj * (ph - th) - cj * (phd - thd)
    q2 = -tau
    q3 = rx * fy_body + tau

    ct, st = math.cos(th), math.sin(th)
    for side in (-1.0, 1.0):
        dx = side * 0.5 * L * ct
        dy = side * 0.5 * L * st
        py = y + dy
        if py < 0.0:
            vx = xd - thd * dy
            vy = yd + thd * dx
            n = -kc * py - cc * vy
            if n > 0.0:
                ft = -mu * n * math.tanh(vx / vs)
                q0 += ft
                q1 += n
                q2 += -dy * ft + dx * n

    # mass matrix [[m, 0, 0, a], [0, m, 0, b], [0, 0, If, 0], [a, b, 0, c]]
    m = mf + mb
    a = -mb * ry
    b = mb * rx
    cm = Ib + mb * (rx * rx + ry * ry)
    phdd = (q3 - (a * q0 + b * q1) / m) / (cm - (a * a + b * b) / m)
    out[0] = xd
    out[1] = yd
    out[2] = thd
    out[3] = phd
    out[4] = (q0 - a * phdd) / m
    out[5] = (q1 - b * phdd) / m
    out[6] = q2 / If
    out[7] = phdd


@numba.njit(cache=True)
def _integrate(s0, p, h, n_out, sub, pen_tol):
    n = s0.shape[0]
    traj = np.empty((n_out, n))
    s = s0.copy()
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    t = 0.0
    L = p[0]
    for i in range(n_out):
        for _ in range(sub):
            _rhs(t, s, p, k1)
            for j in range(n):
                tmp[j] = s[j] + 0.5 * h * k1[j]
            _rhs(t + 0.5 * h, tmp, p, k2)
            for j in range(n):
                tmp[j] = s[j] + 0.5 * h * k2[j]
            _rhs(t + 0.5 * h, tmp, p, k3)
            for j in range(n):
                tmp[j] = s[j] + h * k3[j]
            _rhs(t + h, tmp, p, k4)
            for j in range(n):
                s[j] += h / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j])
            t += h
        for j in range(n):
            traj[i, j] = s[j]
        ok = True
        for j in range(n):
            if not math.isfinite(s[j]):
                ok = False
        low = min(s[1] - 0.5 * L * abs(math.sin(s[2])), s[1])
        if not ok or low < -pen_tol:
            return traj[: i + 1], i
    return traj, -1


def _rest_state(p: VibrobotParams) -> np.ndarray:
    """Foot flat, sunk by the static contact deflection; body at spring equilibrium."""
    W = (p.m_body + p.m_foot) * p.gravity
    sink = W / (2.0 * p.contact_stiffness)
    # body equilibrium: k * phi = -m g (bx cos phi - h sin phi), solved by fixed point
    bx, h = p.body_offset, p.com_height
    ph = 0.0
    for _ in range(100):
        ph = -p.m_body * p.gravity * (bx * math.cos(ph) - h * math.sin(ph)) / p.joint_stiffness
    s = np.zeros(N_STATE)
    s[1] = -sink
    s[3] = ph
    return s


def simulate_vibrobot(
    p: VibrobotParams,
    duration: float,
    dt: float,
    substeps: int | None = None,
    transient_fraction: float = 0.2,
    penetration_tolerance: float = 0.01,
) -> dict:
    """Run the walker; returns ``{"series": TimeSeries, "mean_velocity": m/s}``.

    The internal RK4 step is ``dt / substeps``; by default it is chosen to
    keep the friction regularization stable. Mean velocity is the foot
    displacement over the run after discarding the first 20% of samples.
    """
    period = 1.0 / p.spin_frequency
    if dt > period / 200.0 * (1 + 1e-9):
        raise ValueError("dt must resolve the spin period with >= 200 steps")
    if substeps is None:
        m_eff = p.m_body + p.m_foot
        w_fric = p.friction * (p.m_body + p.m_foot) * p.gravity * 2 / (p.slip_scale * m_eff)
        w_cont = math.sqrt(2 * p.contact_stiffness / p.m_foot)
        h_max = min(2.0 / w_fric, 1.0 / w_cont)
        substeps = max(1, math.ceil(dt / h_max))
    h = dt / substeps
    n_out = int(round(duration / dt))
    traj, fail = _integrate(_rest_state(p), p.as_array(), h, n_out, substeps, penetration_tolerance)
    if fail >= 0:
        raise SimulationError("walker state non-finite or foot penetration beyond tolerance", (fail + 1) * dt)
    names = ("x", "y", "theta", "phi", "vx", "vy", "theta_dot", "phi_dot")
    ts = TimeSeries(dt, dict(zip(names, traj.T)), t0=dt, meta={"params": asdict(p), "substeps": substeps})
    k0 = int(transient_fraction * n_out)
    x = ts["x"]
    span = (n_out - 1 - k0) * dt
    mean_v = float((x[-1] - x[k0]) / span) if span > 0 else 0.0
    return {"series": ts, "mean_velocity": mean_v}
