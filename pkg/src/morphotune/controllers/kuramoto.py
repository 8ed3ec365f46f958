"""All-to-all phase-oscillator communities, optionally pulled by a limb phase."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..modes import PlateModel, assemble

TWO_PI = 2.0 * math.pi


def lorentzian_frequencies(
    n: int, omega0: float, width: float, rng: np.random.Generator, cutoff: float = 20.0
) -> np.ndarray:
    """Cauchy draws truncated to ``|w - omega0| <= cutoff * width`` (exact inverse CDF)."""
    a = math.atan(cutoff) / math.pi
    u = rng.uniform(0.5 - a, 0.5 + a, size=n)
    return omega0 + width * np.tan(math.pi * (u - 0.5))


@dataclass(frozen=True)
class KuramotoCommunity:
    theta: np.ndarray
    omega: np.ndarray
    K: float = 1.0
    eta: float = 0.0

    def __post_init__(self):
        theta = np.mod(np.asarray(self.theta, dtype=float), TWO_PI)
        omega = np.asarray(self.omega, dtype=float)
        if theta.ndim != 1 or len(theta) < 1 or theta.shape != omega.shape:
            raise ValueError("theta and omega must be equal-length 1-D arrays with N >= 1")
        if self.K < 0:
            raise ValueError("K must be non-negative")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "omega", omega)

    @property
    def N(self) -> int:
        return len(self.theta)

    @classmethod
    def create(
        cls,
        n: int,
        omega0: float,
        width: float = 0.0,
        K: float = 1.0,
        eta: float = 0.0,
        seed: int = 0,
        distribution: str = "lorentzian",
        phases: str = "random",
    ) -> "KuramotoCommunity":
        """Frequencies ``lorentzian`` (width > 0) or ``identical``; phases ``random`` or ``equal``."""
        rng = np.random.default_rng(seed)
        if distribution == "identical" or width == 0:
            omega = np.full(n, float(omega0))
        elif distribution == "lorentzian":
            omega = lorentzian_frequencies(n, omega0, width, rng)
        else:
            raise ValueError(f"unknown frequency distribution {distribution!r}")
        theta = rng.uniform(0, TWO_PI, n) if phases == "random" else np.zeros(n)
        return cls(theta, omega, K, eta)


def order_parameter(c: KuramotoCommunity | np.ndarray) -> tuple[float, float]:
    """``(r, Psi)`` with ``r exp(i Psi)`` the mean of ``exp(i theta)``; Psi in [0, 2 pi)."""
    theta = c.theta if isinstance(c, KuramotoCommunity) else np.asarray(c, dtype=float)
    z = np.mean(np.exp(1j * theta))
    return float(abs(z)), float(np.mod(np.angle(z), TWO_PI))


def _velocity(theta, omega, K, eta, psi):
    c, s = np.cos(theta), np.sin(theta)
    # (K/N) sum_j sin(theta_j - theta_i) = K (S cos theta_i - C sin theta_i)
    d = omega + K * (s.mean() * c - c.mean() * s)
    if psi is not None:
        d += eta * (math.sin(psi) * c - math.cos(psi) * s)
    return d


def _check_dt(omega: np.ndarray, dt: float) -> None:
    if dt * float(np.max(np.abs(omega))) >= 0.1:
        raise ValueError("dt * max|omega| must stay below 0.1")


def kuramoto_step(c: KuramotoCommunity, psi: float | None, dt: float) -> KuramotoCommunity:
    """RK4 step; ``psi`` is the external (limb) phase, ``None`` drops the pulling term."""
    _check_dt(c.omega, dt)
    th, w = c.theta, c.omega
    k1 = _velocity(th, w, c.K, c.eta, psi)
    k2 = _velocity(th + 0.5 * dt * k1, w, c.K, c.eta, psi)
    k3 = _velocity(th + 0.5 * dt * k2, w, c.K, c.eta, psi)
    k4 = _velocity(th + dt * k3, w, c.K, c.eta, psi)
    return replace(c, theta=th + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))


def run_community(c: KuramotoCommunity, duration: float, dt: float, psi=None, record_every: int = 1) -> dict:
    """Integrate and record ``r(t)`` and ``Psi(t)``; ``psi`` may be a callable of time."""
    _check_dt(c.omega, dt)
    n = int(round(duration / dt))
    th = c.theta.copy()
    ts, rs, ps = [], [], []
    for i in range(n):
        t = i * dt
        p = psi(t) if callable(psi) else psi
        k1 = _velocity(th, c.omega, c.K, c.eta, p)
        k2 = _velocity(th + 0.5 * dt * k1, c.omega, c.K, c.eta, p)
        k3 = _velocity(th + 0.5 * dt * k2, c.omega, c.K, c.eta, p)
        k4 = _velocity(th + dt * k3, c.omega, c.K, c.eta, p)
        th = np.mod(th + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), TWO_PI)
        if (i + 1) % record_every == 0:
            r, ps_ = order_parameter(th)
            ts.append((i + 1) * dt)
            rs.append(r)
            ps.append(ps_)
    return {
        "t": np.array(ts),
        "r": np.array(rs),
        "Psi": np.array(ps),
        "community": replace(c, theta=th),
    }


def mean_order(c: KuramotoCommunity, duration: float, dt: float, average_from: float = 0.5, record_every: int = 10) -> float:
    """Time-averaged ``r`` over the final ``1 - average_from`` of the run."""
    out = run_community(c, duration, dt, record_every=record_every)
    r = out["r"]
    return float(np.mean(r[int(average_from * len(r)):]))


# ---------------------------------------------------------------------------
# four communities on a legged body


@dataclass(frozen=True)
class LeggedBody:
    """Plate on four knee springs; each hip command shifts its leg's rest length.

    The knee angle of leg ``i`` is its vertical deflection over
    ``knee_lever`` (rad per metre of compression).
    """

    plate: PlateModel = field(default_factory=lambda: PlateModel.rectangle(2.0, 0.3, 0.15, 800.0, leg_y=0.1))
    damping: float = 4.0
    hip_amplitude: float = 0.01
    knee_lever: float = 0.1

    def __post_init__(self):
        if len(self.plate.springs) != 4:
            raise ValueError("legged body needs exactly four legs")


def plv(a: np.ndarray, b: np.ndarray) -> float:
    """Phase-locking value ``|<exp(i (a - b))>|``."""
    return float(abs(np.mean(np.exp(1j * (np.asarray(a) - np.asarray(b))))))


def quad_community_run(
    communities: list[KuramotoCommunity],
    body: LeggedBody,
    duration: float,
    dt: float,
    record_every: int = 10,
    average_from: float = 0.5,
) -> dict:
    """Close the loop between four communities and the legged body.

    Community ``i`` drives hip ``i`` with ``A cos(Psi_i)``; its external
    phase is the quadrature phase of knee ``i``: ``atan2(-kappa_dot / w_i,
    kappa)`` with ``w_i`` the community's mean natural frequency. Returns
    the community phases over time and the pairwise PLV matrix over the
    final ``1 - average_from`` of the run.
    """
    if len(communities) != 4:
        raise ValueError("need four communities")
    M, K = assemble(body.plate)
    Minv = np.linalg.inv(M)
    C = np.array([body.plate.lever(i) for i in range(4)])  # 4 x 3
    k = np.array([s[2] for s in body.plate.springs])
    sizes = [c.N for c in communities]
    cuts = np.cumsum([0, *sizes])
    omegas = np.concatenate([c.omega for c in communities])
    Ks = [c.K for c in communities]
    etas = [c.eta for c in communities]
    w_hat = np.array([np.mean(c.omega) for c in communities])
    A = body.hip_amplitude

    def community_phase(th):
        return np.array([np.angle(np.mean(np.exp(1j * th[cuts[i]:cuts[i + 1]]))) for i in range(4)])

    def rhs(state):
        q, qd, th = state[:3], state[3:6], state[6:]
        Psi = community_phase(th)
        u = A * np.cos(Psi)
        d = C @ q
        dd = C @ qd
        f = -k * (d - u) - body.damping * dd
        qdd = Minv @ (C.T @ f)
        kappa, kappa_dot = d / body.knee_lever, dd / body.knee_lever
        psi = np.arctan2(-kappa_dot / w_hat, kappa)
        dth = np.empty_like(th)
        for i in range(4):
            sl = slice(cuts[i], cuts[i + 1])
            dth[sl] = _velocity(th[sl], omegas[sl], Ks[i], etas[i], psi[i] if etas[i] != 0 else None)
        return np.concatenate([qd, qdd, dth])

    state = np.concatenate([np.zeros(6), *[c.theta for c in communities]])
    n = int(round(duration / dt))
    rec_t, rec_psi, rec_q = [], [], []
    for i in range(n):
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * dt * k1)
        k3 = rhs(state + 0.5 * dt * k2)
        k4 = rhs(state + dt * k3)
        state = state + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(state)):
            raise FloatingPointError(f"legged body diverged at t={(i + 1) * dt:.4g} s")
        state[6:] = np.mod(state[6:], TWO_PI)
        if (i + 1) % record_every == 0:
            rec_t.append((i + 1) * dt)
            rec_psi.append(community_phase(state[6:]))
            rec_q.append(state[:3].copy())
    t = np.array(rec_t)
    phases = np.unwrap(np.array(rec_psi), axis=0)
    k0 = int(average_from * len(t))
    P = np.ones((4, 4))
    for a in range(4):
        for b in range(a + 1, 4):
            P[a, b] = P[b, a] = plv(phases[k0:, a], phases[k0:, b])
    return {"t": t, "phases": phases, "body": np.array(rec_q), "plv": P}
