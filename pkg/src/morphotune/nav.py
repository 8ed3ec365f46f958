"""Planar legged dead reckoning: synthetic gait data, strapdown INS, stride
odometer and an error-state Kalman filter fusing the two.

Frames: world x/y with heading psi measured from the x axis; body x forward,
y left. Legs are ordered front-left, front-right, rear-left, rear-right.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter1d

log = logging.getLogger(__name__)

N_LEGS = 4
LEFT = np.array([1.0, 0.0, 1.0, 0.0])
RIGHT = 1.0 - LEFT
N_ERR = 9
# error-state layout
IP, IV, IPSI, IBG, IBA, IS = slice(0, 2), slice(2, 4), 4, 5, slice(6, 8), 8


class InfeasiblePath(ValueError):
    pass


class SilentChannel(ValueError):
    pass


class CovarianceError(FloatingPointError):
    pass


def wrap(a):
    """Wrap to [-pi, pi)."""
    return (np.asarray(a) + math.pi) % (2 * math.pi) - math.pi


def rot(psi: float) -> np.ndarray:
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, -s], [s, c]])


# ---------------------------------------------------------------------------
# records and streams


@dataclass(frozen=True)
class ImuSample:
    t: float
    ax: float
    ay: float
    gz: float


@dataclass(frozen=True)
class GaitSensorFrame:
    t: float
    hip: tuple
    knee: tuple
    pressure: tuple
    fmotor: float


@dataclass
class NavState:
    position: np.ndarray
    velocity: np.ndarray
    psi: float
    t: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).copy()
        self.velocity = np.asarray(self.velocity, dtype=float).copy()
        self.psi = float(wrap(self.psi))

    def copy(self) -> "NavState":
        return NavState(self.position, self.velocity, self.psi, self.t)


@dataclass
class ErrorState:
    """Error estimate (estimate minus truth) and its covariance.

    Order: position (2), velocity (2), heading, gyro bias, accel bias (2),
    odometer scale.
    """

    x: np.ndarray = field(default_factory=lambda: np.zeros(N_ERR))
    P: np.ndarray = field(default_factory=lambda: np.eye(N_ERR))

    def check(self, tol: float = 1e-10) -> None:
        if not np.allclose(self.P, self.P.T, atol=1e-12 * max(1.0, np.abs(self.P).max())):
            raise CovarianceError("covariance lost symmetry")
        if np.linalg.eigvalsh(self.P).min() < -tol:
            raise CovarianceError("covariance lost positive semidefiniteness")


@dataclass
class ImuStream:
    t: np.ndarray
    accel: np.ndarray
    gyro: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, k: int) -> ImuSample:
        return ImuSample(float(self.t[k]), float(self.accel[k, 0]), float(self.accel[k, 1]), float(self.gyro[k]))

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def to_csv(self, path) -> None:
        _write_csv(path, ["t", "ax", "ay", "gz"], [self.t, self.accel[:, 0], self.accel[:, 1], self.gyro])

    @classmethod
    def from_csv(cls, path) -> "ImuStream":
        h, d = _read_csv(path, ["t", "ax", "ay", "gz"])
        return cls(d[:, 0], d[:, 1:3], d[:, 3])


@dataclass
class GaitStream:
    t: np.ndarray
    hip: np.ndarray
    knee: np.ndarray
    pressure: np.ndarray
    fmotor: np.ndarray

    HEADER = (
        ["t"] + [f"hip{i}" for i in range(1, 5)] + [f"knee{i}" for i in range(1, 5)]
        + [f"p{i}" for i in range(1, 5)] + ["fmotor"]
    )

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, k: int) -> GaitSensorFrame:
        return GaitSensorFrame(
            float(self.t[k]), tuple(self.hip[k]), tuple(self.knee[k]), tuple(self.pressure[k]), float(self.fmotor[k])
        )

    def to_csv(self, path) -> None:
        cols = [self.t, *self.hip.T, *self.knee.T, *self.pressure.T, self.fmotor]
        _write_csv(path, self.HEADER, cols)

    @classmethod
    def from_csv(cls, path) -> "GaitStream":
        _, d = _read_csv(path, cls.HEADER)
        return cls(d[:, 0], d[:, 1:5], d[:, 5:9], d[:, 9:13], d[:, 13])


@dataclass
class TruthStream:
    t: np.ndarray
    position: np.ndarray
    psi: np.ndarray
    velocity: np.ndarray

    def state(self, k: int) -> NavState:
        return NavState(self.position[k], self.velocity[k], float(self.psi[k]), float(self.t[k]))

    def to_csv(self, path) -> None:
        _write_csv(path, ["t", "x", "y", "psi"], [self.t, self.position[:, 0], self.position[:, 1], self.psi])


def _write_csv(path, header, cols) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([f"{v:.12g}" for v in row])


def _read_csv(path, header):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != list(header):
        raise ValueError(f"{path}: expected header {','.join(header)}")
    return rows[0], np.array(rows[1:], dtype=float)


# ---------------------------------------------------------------------------
# path geometry


@dataclass(frozen=True)
class _Segment:
    s0: float
    length: float
    p0: tuple
    psi0: float
    kappa: float

    def at(self, s: float):
        u = s - self.s0
        psi = self.psi0 + self.kappa * u
        if self.kappa == 0.0:
            p = (self.p0[0] + u * math.cos(self.psi0), self.p0[1] + u * math.sin(self.psi0))
        else:
            r = 1.0 / self.kappa
            p = (
                self.p0[0] + r * (math.sin(psi) - math.sin(self.psi0)),
                self.p0[1] - r * (math.cos(psi) - math.cos(self.psi0)),
            )
        return p, psi, self.kappa


class Path:
    """Polyline through waypoints with circular fillets of ``radius`` at interior corners."""

    def __init__(self, waypoints, radius: float):
        pts = [np.asarray(p, dtype=float) for p in waypoints]
        self.segments: list[_Segment] = []
        if len(pts) < 2:
            self.start = tuple(pts[0]) if pts else (0.0, 0.0)
            self.psi0 = 0.0
            self.length = 0.0
            return
        dirs = [pts[i + 1] - pts[i] for i in range(len(pts) - 1)]
        if any(np.hypot(*d) == 0 for d in dirs):
            raise InfeasiblePath("repeated waypoint")
        heads = [math.atan2(d[1], d[0]) for d in dirs]
        cur = pts[0]
        s = 0.0
        psi = heads[0]
        for i in range(len(dirs)):
            end = pts[i + 1]
            d_out = 0.0
            turn = 0.0
            if i + 1 < len(dirs):
                turn = float(wrap(heads[i + 1] - heads[i]))
                d_out = radius * math.tan(abs(turn) / 2)
            line_end = end - d_out * np.array([math.cos(heads[i]), math.sin(heads[i])])
            L = float(np.hypot(*(line_end - cur)))
            if np.dot(line_end - cur, dirs[i]) < -1e-12:
                raise InfeasiblePath("corner fillets overlap; waypoints too close for the turn radius")
            if L > 0:
                self.segments.append(_Segment(s, L, tuple(cur), heads[i], 0.0))
                s += L
            if turn != 0.0:
                kappa = math.copysign(1.0 / radius, turn)
                arc = _Segment(s, abs(turn) * radius, tuple(line_end), heads[i], kappa)
                self.segments.append(arc)
                s += arc.length
                cur = np.array(arc.at(s)[0])
            else:
                cur = line_end
            psi = heads[i]
        self.start = tuple(pts[0])
        self.psi0 = heads[0]
        self.length = s
        self._ends = np.array([g.s0 + g.length for g in self.segments])

    def at(self, s: float):
        """``(position, heading, curvature)`` at arc length ``s``."""
        if not self.segments:
            return self.start, self.psi0, 0.0
        k = int(np.searchsorted(self._ends, s, side="right"))
        k = min(k, len(self.segments) - 1)
        return self.segments[k].at(s)

    @property
    def max_curvature(self) -> float:
        return max((abs(g.kappa) for g in self.segments), default=0.0)


# ---------------------------------------------------------------------------
# scenario and generator


@dataclass(frozen=True)
class Scenario:
    """Synthetic walk. The path is traversed exactly once when it has length."""

    waypoints: tuple = ((0.0, 0.0), (4.5, 0.0), (4.5, 4.5), (0.0, 4.5), (0.0, 0.0))
    speed: float = 0.3
    speed_variation: float = 0.2
    turn_radius: float = 0.5
    max_turn_rate: float = 2.0
    duration: float | None = None
    motor_frequency: float = 2.0
    imu_rate: float = 100.0
    gait_decimation: int = 1
    duty: float = 0.6
    duty_jitter: float = 0.05
    leg_phases: tuple = (0.0, 0.5, 0.5, 0.0)
    stride_weight: float = 0.15
    stride_offset: float = 0.03
    heading_weight: float = 1.0
    hip_noise: float = 0.01
    knee_amplitude: float = 0.3
    knee_spread: float = 0.05
    pressure_spread: float = 0.1
    accel_noise: float = 0.0
    gyro_noise: float = 0.0
    accel_bias: tuple = (0.0, 0.0)
    gyro_bias: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.imu_rate <= 0 or self.motor_frequency <= 0:
            raise ValueError("rates must be positive")
        if self.gait_decimation < 1:
            raise ValueError("gait_decimation must be a positive integer")
        if not 0 < self.duty < 1 or not 0 <= self.duty_jitter < min(self.duty, 1 - self.duty):
            raise ValueError("duty must lie in (0, 1) with jitter inside it")
        if not 0 <= self.speed_variation < 1:
            raise ValueError("speed_variation must lie in [0, 1)")

    @classmethod
    def realistic(cls, seed: int = 0, **kw) -> "Scenario":
        """Consumer-grade IMU noise and biases on the default 60 s square."""
        base = dict(accel_noise=0.05, gyro_noise=0.005, accel_bias=(0.05, -0.02), gyro_bias=0.003, seed=seed)
        return cls(**{**base, **kw})


@dataclass
class GaitData:
    imu: ImuStream
    gait: GaitStream
    truth: TruthStream
    strides: dict
    touchdowns: list
    expected_detections: list
    scenario: Scenario


def _speed_profile(sc: Scenario, T: float, rng: np.random.Generator):
    """Mean speed plus two whole-period harmonics, so the path closes at ``T``."""
    phases = rng.uniform(0, 2 * math.pi, 2)
    a = np.array([0.6, 0.4]) * sc.speed_variation
    k = np.array([1.0, 3.0])

    def v(t):
        t = np.asarray(t, dtype=float)
        return sc.speed * (1 + np.sum(a[:, None] * np.sin(2 * math.pi * k[:, None] * t / T + phases[:, None]), axis=0))

    def dv(t):
        t = np.asarray(t, dtype=float)
        w = 2 * math.pi * k[:, None] / T
        return sc.speed * np.sum(a[:, None] * w * np.cos(w * t + phases[:, None]), axis=0)

    def s(t):
        t = np.asarray(t, dtype=float)
        w = 2 * math.pi * k[:, None] / T
        return sc.speed * (t + np.sum(a[:, None] / w * (np.cos(phases[:, None]) - np.cos(w * t + phases[:, None])), axis=0))

    return v, dv, s


def generate_gait_data(sc: Scenario) -> GaitData:
    rng = np.random.default_rng(sc.seed)
    path = Path(sc.waypoints, sc.turn_radius)
    dt = 1.0 / sc.imu_rate
    moving = path.length > 0 and sc.speed > 0
    if moving:
        T = round(path.length / sc.speed / dt) * dt
        vbar = path.length / T
        sc_eff = Scenario(**{**sc.__dict__, "speed": vbar})
        if vbar * (1 + sc.speed_variation) * path.max_curvature > sc.max_turn_rate:
            raise InfeasiblePath(
                f"turn rate {vbar * (1 + sc.speed_variation) * path.max_curvature:.3g} rad/s exceeds the gait limit"
            )
        v_of, dv_of, s_of = _speed_profile(sc_eff, T, rng)
    else:
        if sc.duration is None:
            raise ValueError("stationary scenario needs a duration")
        T = round(sc.duration / dt) * dt
        v_of = lambda t: np.zeros_like(np.asarray(t, dtype=float))  # noqa: E731
        dv_of = v_of
        s_of = v_of
        rng.uniform(size=2)
    n = int(round(T / dt)) + 1
    t = dt * np.arange(n)
    s = s_of(t)
    if moving:
        s[-1] = path.length
    v = v_of(t)
    a_t = dv_of(t)
    pos = np.empty((n, 2))
    psi = np.empty(n)
    kap = np.empty(n)
    for k in range(n):
        p, h, c = path.at(float(s[k]))
        pos[k], psi[k], kap[k] = p, h, c
    vel = v[:, None] * np.column_stack([np.cos(psi), np.sin(psi)])
    truth = TruthStream(t, pos, wrap(psi), vel)

    # IMU in the body frame: tangential and centripetal acceleration, yaw rate
    accel = np.column_stack([a_t, v * v * kap])
    gyro = v * kap
    accel = accel + np.asarray(sc.accel_bias) + sc.accel_noise * rng.standard_normal((n, 2))
    gyro = gyro + sc.gyro_bias + sc.gyro_noise * rng.standard_normal(n)
    imu = ImuStream(t, accel, gyro)

    # strides referenced to leg 1 touchdowns at j / f
    f = sc.motor_frequency
    n_str = int(math.floor(T * f)) + 2
    tb = np.arange(n_str + 1) / f
    s_b = s_of(np.minimum(tb, T))
    if moving:
        s_b = np.where(tb >= T, path.length, s_b)
    psi_b = np.array([path.at(float(x))[1] for x in s_b])
    stride_len = np.diff(s_b)
    dpsi = wrap(np.diff(psi_b))
    hip_sum = np.maximum(
        (stride_len - sc.stride_offset) / sc.stride_weight + sc.hip_noise * rng.standard_normal(n_str), 0.0
    )
    hip_diff = dpsi / sc.heading_weight + sc.hip_noise * rng.standard_normal(n_str)
    amp = np.maximum(hip_sum[:, None] / 4 + np.outer(hip_diff / 4, LEFT - RIGHT), 0.0)
    knee_amp = sc.knee_amplitude + sc.knee_spread * rng.standard_normal((n_str, N_LEGS))
    p_amp = 1.0 + sc.pressure_spread * rng.uniform(-1, 1, (n_str, N_LEGS))
    duty = sc.duty + sc.duty_jitter * rng.uniform(-1, 1, (n_str, N_LEGS))

    tg = t[:: sc.gait_decimation]
    hip = np.empty((len(tg), N_LEGS))
    knee = np.empty_like(hip)
    pres = np.empty_like(hip)
    touchdowns = []
    expected = []
    for i, ph in enumerate(sc.leg_phases):
        cyc = f * tg - ph
        m = np.floor(cyc).astype(int)
        tau = cyc - m
        j = np.clip(m, 0, n_str - 1)
        hip[:, i] = amp[j, i] * np.sin(2 * math.pi * tau)
        knee[:, i] = knee_amp[j, i] * np.sin(2 * math.pi * tau + math.pi / 2)
        d = duty[j, i]
        pres[:, i] = np.where(tau < d, p_amp[j, i] * np.sin(math.pi * np.minimum(tau / d, 1.0)), 0.0)
        td = (np.arange(n_str) + ph) / f
        td = td[td <= tg[-1]]
        touchdowns.append(td)
        # detection fires when the half-sine passes half its peak
        ok = [tt for jj, tt in enumerate(td) if tt + duty[jj, i] / (6 * f) < tg[-1] and tt >= 0]
        expected.append(np.array(ok))
    gait = GaitStream(tg, hip, knee, pres, np.full(len(tg), f))
    keep = tb[1:] <= T + 1e-12
    strides = {
        "t_start": tb[:-1][keep],
        "t_end": tb[1:][keep],
        "stride_length": stride_len[keep],
        "delta_heading": dpsi[keep],
        "hip_sum": hip_sum[keep],
        "hip_diff": hip_diff[keep],
    }
    return GaitData(imu, gait, truth, strides, touchdowns, expected, sc)


# ---------------------------------------------------------------------------
# strapdown mechanization


def strapdown_update(
    s: NavState,
    biases: tuple[float, np.ndarray],
    imu: ImuSample,
    dt: float,
    prev: ImuSample | None = None,
) -> NavState:
    """Advance the planar navigation state across one IMU interval.

    With ``prev`` (the sample at the start of the interval) heading, velocity
    and position use the trapezoidal rule; without it the interval is
    integrated with ``imu`` held constant.
    """
    b_g, b_a = biases
    vals = (imu.ax, imu.ay, imu.gz) + ((prev.ax, prev.ay, prev.gz) if prev else ())
    if not all(map(math.isfinite, vals)):
        raise ValueError("non-finite IMU sample")
    b_a = np.asarray(b_a, dtype=float)
    f1 = np.array([imu.ax, imu.ay]) - b_a
    w1 = imu.gz - b_g
    if prev is None:
        psi1 = s.psi + w1 * dt
        a = rot(s.psi) @ f1
        v1 = s.velocity + a * dt
    else:
        f0 = np.array([prev.ax, prev.ay]) - b_a
        w0 = prev.gz - b_g
        psi1 = s.psi + 0.5 * (w0 + w1) * dt
        a = 0.5 * (rot(s.psi) @ f0 + rot(psi1) @ f1)
        v1 = s.velocity + a * dt
    p1 = s.position + 0.5 * (s.velocity + v1) * dt
    return NavState(p1, v1, psi1, s.t + dt)


def run_ins(imu: ImuStream, initial: NavState, biases=(0.0, (0.0, 0.0))) -> dict:
    """Open-loop strapdown over the whole stream."""
    n = len(imu)
    pos = np.empty((n, 2))
    vel = np.empty((n, 2))
    psi = np.empty(n)
    s = initial.copy()
    pos[0], vel[0], psi[0] = s.position, s.velocity, s.psi
    dt = imu.dt
    prev = imu[0]
    for k in range(1, n):
        cur = imu[k]
        s = strapdown_update(s, biases, cur, dt, prev)
        prev = cur
        pos[k], vel[k], psi[k] = s.position, s.velocity, s.psi
    return {"t": imu.t.copy(), "position": pos, "velocity": vel, "psi": psi}


# ---------------------------------------------------------------------------
# strides and odometer


def detect_strides(gait: GaitStream, leg: int, window: float = 1.0, refractory: float = 0.05) -> np.ndarray:
    """Touchdown times of ``leg`` (0-based): upward crossings of half the rolling maximum.

    The rolling maximum is centred with width ``window`` seconds; crossings
    are linearly interpolated and a new event needs ``refractory`` seconds
    since the previous one.
    """
    p = np.asarray(gait.pressure[:, leg], dtype=float)
    t = gait.t
    dt = float(t[1] - t[0])
    size = max(3, int(round(window / dt)) | 1)
    m = maximum_filter1d(p, size=size, mode="nearest")
    above = (2.0 * p > m) & (m > 0)
    idx = np.flatnonzero(above[1:] & ~above[:-1]) + 1
    if len(idx) == 0:
        raise SilentChannel(f"pressure channel {leg + 1} has no touchdowns")
    events = []
    for k in idx:
        thr = 0.5 * m[k]
        p0, p1 = p[k - 1], p[k]
        frac = (thr - p0) / (p1 - p0) if p1 != p0 else 0.0
        frac = min(max(frac, 0.0), 1.0)
        te = t[k - 1] + frac * dt
        if events and te - events[-1] < refractory:
            continue
        events.append(te)
    return np.array(events)


def stride_windows(gait: GaitStream, events: list[np.ndarray] | None = None) -> list[list[tuple[float, float]]]:
    """Per leg, consecutive touchdown windows aligned to leg 1's stride index."""
    events = events if events is not None else [detect_strides(gait, i) for i in range(N_LEGS)]
    ref = events[0]
    period = float(np.median(np.diff(ref))) if len(ref) > 1 else 0.0
    out = []
    for i in range(N_LEGS):
        ev = events[i]
        wins = []
        for j in range(len(ref) - 1):
            k = int(np.searchsorted(ev, ref[j] - 0.25 * period))
            if k + 1 < len(ev):
                wins.append((ev[k], ev[k + 1]))
            else:
                wins.append((math.nan, math.nan))
        out.append(wins)
    return out


INDICATORS = (
    [f"hip_amp_{i}" for i in range(1, 5)]
    + [f"knee_amp_{i}" for i in range(1, 5)]
    + ["hip_sum", "hip_diff"]
    + [f"duty_{i}" for i in range(1, 5)]
    + [f"impulse_{i}" for i in range(1, 5)]
)


def stride_statistics(gait: GaitStream, events: list[np.ndarray] | None = None) -> dict:
    """Indicator values for every stride of leg 1 (windows between its touchdowns)."""
    events = events if events is not None else [detect_strides(gait, i) for i in range(N_LEGS)]
    wins = stride_windows(gait, events)
    n = len(wins[0])
    t = gait.t
    dt = float(t[1] - t[0])
    stats = {k: np.full(n, math.nan) for k in INDICATORS}
    stats["t_start"] = np.array([w[0] for w in wins[0]])
    stats["t_end"] = np.array([w[1] for w in wins[0]])
    for i in range(N_LEGS):
        for j, (a, b) in enumerate(wins[i]):
            if not math.isfinite(a):
                continue
            sel = (t >= a) & (t < b)
            if sel.sum() < 3:
                continue
            h = gait.hip[sel, i]
            kn = gait.knee[sel, i]
            pr = gait.pressure[sel, i]
            stats[f"hip_amp_{i + 1}"][j] = 0.5 * (h.max() - h.min())
            stats[f"knee_amp_{i + 1}"][j] = 0.5 * (kn.max() - kn.min())
            stats[f"duty_{i + 1}"][j] = float(np.mean(pr > 0))
            stats[f"impulse_{i + 1}"][j] = float(pr.sum() * dt)
    hips = np.array([stats[f"hip_amp_{i}"] for i in range(1, 5)])
    stats["hip_sum"] = hips.sum(axis=0)
    stats["hip_diff"] = (LEFT - RIGHT) @ hips
    stats["fmotor"] = np.array(
        [float(np.mean(gait.fmotor[(t >= a) & (t < b)])) if math.isfinite(a) else math.nan for a, b in wins[0]]
    )
    return stats


@dataclass(frozen=True)
class OdometerModel:
    """Stride length ``w . indicators + w0`` and heading change ``wh . heading_indicators + wh0``."""

    indicators: tuple = ("hip_sum",)
    weights: tuple = (0.15,)
    offset: float = 0.03
    heading_indicators: tuple = ("hip_diff",)
    heading_weights: tuple = (1.0,)
    heading_offset: float = 0.0

    def __post_init__(self):
        if len(self.indicators) != len(self.weights):
            raise ValueError("one weight per indicator")
        if len(self.heading_indicators) != len(self.heading_weights):
            raise ValueError("one heading weight per heading indicator")

    def _get(self, stats: dict, name: str):
        if name not in stats:
            raise KeyError(f"missing indicator {name!r}")
        return np.asarray(stats[name], dtype=float)

    def stride_length(self, stats: dict):
        return self.offset + sum(w * self._get(stats, k) for k, w in zip(self.indicators, self.weights))

    def heading_change(self, stats: dict):
        return self.heading_offset + sum(
            w * self._get(stats, k) for k, w in zip(self.heading_indicators, self.heading_weights)
        )


def odometer_velocity(om: OdometerModel, stats: dict, psi) -> np.ndarray:
    """Planar velocity from stride length times motor frequency along ``psi``.

    ``stats`` holds per-stride indicator values (scalars or arrays) and
    ``fmotor``; the direction is the stride's mean heading, ``psi`` plus half
    the modelled heading change.
    """
    L = om.stride_length(stats)
    f = om._get(stats, "fmotor")
    speed = L * f
    head = np.asarray(psi, dtype=float) + 0.5 * om.heading_change(stats)
    return np.stack([speed * np.cos(head), speed * np.sin(head)], axis=-1)


# ---------------------------------------------------------------------------
# error-state fusion


@dataclass(frozen=True)
class FusionConfig:
    """IMU noises are per-sample standard deviations; walks are per root second."""

    accel_noise: float = 0.05
    gyro_noise: float = 0.005
    accel_bias_walk: float = 1e-4
    gyro_bias_walk: float = 1e-5
    scale_walk: float = 1e-5
    odometer_noise: float = 0.01
    gate_sigma: float = 5.0
    initial_sigma: tuple = (1e-3, 1e-3, 1e-3, 1e-3, 1e-3, 0.02, 0.1, 0.1, 0.05)


def _error_dynamics(psi: float, f_body: np.ndarray) -> np.ndarray:
    F = np.zeros((N_ERR, N_ERR))
    R = rot(psi)
    a = R @ f_body
    F[IP, IV] = np.eye(2)
    F[2:4, IPSI] = np.array([-a[1], a[0]])
    F[IV, IBA] = -R
    F[IPSI, IBG] = -1.0
    return F


def kf_fuse(
    imu: ImuStream,
    gait: GaitStream,
    initial: NavState,
    odometer: OdometerModel,
    config: FusionConfig = FusionConfig(),
    error: ErrorState | None = None,
    events: list[np.ndarray] | None = None,
) -> dict:
    """Strapdown INS corrected at every stride by the virtual odometer.

    The measurement is the INS mean velocity over the stride (displacement
    over duration) minus the odometer speed carried along the INS heading
    through the same stride. Estimated errors are
    subtracted from the navigation state and the biases/odometer scale, then
    reset. Innovations beyond ``gate_sigma`` are skipped and logged.
    """
    err = error if error is not None else ErrorState(np.zeros(N_ERR), np.diag(np.square(config.initial_sigma)))
    P = err.P.copy()
    stats = stride_statistics(gait, events)
    t_end = stats["t_end"]
    speeds = odometer.stride_length(stats) * stats["fmotor"]
    n = len(imu)
    dt = imu.dt
    b_g, b_a, scale = 0.0, np.zeros(2), 1.0
    s = initial.copy()
    pos = np.empty((n, 2))
    vel = np.empty((n, 2))
    psi = np.empty(n)
    pos[0], vel[0], psi[0] = s.position, s.velocity, s.psi
    history = []
    skipped = []
    Q = np.zeros((N_ERR, N_ERR))
    Q[IV, IV] = np.eye(2) * (config.accel_noise * dt) ** 2
    Q[IPSI, IPSI] = (config.gyro_noise * dt) ** 2
    Q[IBG, IBG] = config.gyro_bias_walk**2 * dt
    Q[IBA, IBA] = np.eye(2) * config.accel_bias_walk**2 * dt
    Q[IS, IS] = config.scale_walk**2 * dt
    R_meas = config.odometer_noise**2
    j = 0
    # stride j is measured once the INS reaches its end; its start is then stored
    start_of: dict[int, list] = {}
    order = np.argsort(stats["t_start"])
    starts = stats["t_start"]
    prev = imu[0]
    k_start = 0
    for k in range(1, n):
        cur = imu[k]
        f_b = np.array([cur.ax, cur.ay]) - b_a
        Fm = _error_dynamics(s.psi, f_b)
        Phi = np.eye(N_ERR) + Fm * dt + 0.5 * (Fm @ Fm) * dt * dt
        P = Phi @ P @ Phi.T + Q
        h0 = np.array([math.cos(s.psi), math.sin(s.psi)])
        s = strapdown_update(s, (b_g, b_a), cur, dt, prev)
        prev = cur
        t = imu.t[k]
        h1 = np.array([math.cos(s.psi), math.sin(s.psi)])
        for rec in start_of.values():
            rec[2] += 0.5 * (h0 + h1) * dt
        while j < len(t_end) and t_end[j] <= t + 1e-12:
            if j in start_of and math.isfinite(speeds[j]) and math.isfinite(R_meas):
                p0, t0, hsum = start_of.pop(j)
                T = t - t0
                h = hsum / T
                u = speeds[j] * scale
                v_odo = u * h
                z = (s.position - p0) / T - v_odo
                H = np.zeros((2, N_ERR))
                H[:, IV] = np.eye(2)
                H[:, IPSI] = u * np.array([h[1], -h[0]])
                H[:, IS] = -v_odo
                S = H @ P @ H.T + R_meas * np.eye(2)
                if np.any(np.abs(z) > config.gate_sigma * np.sqrt(np.diag(S))):
                    log.info("stride %d innovation beyond %.1f sigma skipped", j, config.gate_sigma)
                    skipped.append(j)
                else:
                    K = P @ H.T @ np.linalg.inv(S)
                    dx = K @ z
                    A = np.eye(N_ERR) - K @ H
                    P = A @ P @ A.T + R_meas * K @ K.T
                    P = 0.5 * (P + P.T)
                    ErrorState(dx, P).check()
                    s = NavState(s.position - dx[IP], s.velocity - dx[IV], s.psi - dx[IPSI], s.t)
                    b_g -= dx[IBG]
                    b_a = b_a - dx[IBA]
                    scale /= 1.0 + dx[IS]
                    history.append(
                        {"t": float(t), "stride": j, "correction": dx.tolist(), "sigma": np.sqrt(np.diag(P)).tolist()}
                    )
            else:
                start_of.pop(j, None)
            j += 1
        # starts are stored after any correction at this instant
        while k_start < len(order) and starts[order[k_start]] <= t + 1e-12:
            jj = order[k_start]
            start_of[jj] = [s.position.copy(), t, np.zeros(2)]
            k_start += 1
        pos[k], vel[k], psi[k] = s.position, s.velocity, s.psi
    return {
        "t": imu.t.copy(),
        "position": pos,
        "velocity": vel,
        "psi": psi,
        "gyro_bias": b_g,
        "accel_bias": b_a,
        "odometer_scale": scale,
        "history": history,
        "skipped": skipped,
        "error": ErrorState(np.zeros(N_ERR), P),
    }


def build_indicator_table(
    gait: GaitStream,
    truth_strides: dict,
    indicators=INDICATORS,
    events: list[np.ndarray] | None = None,
) -> dict:
    """One row per stride: stride length, heading change, then the chosen indicators.

    Detected strides are matched to the generator's strides by the nearest
    start time; strides missing any value are dropped.
    """
    stats = stride_statistics(gait, events)
    n = len(stats["t_start"])
    if n < 10:
        raise ValueError(f"need at least 10 strides, got {n}")
    ts = np.asarray(truth_strides["t_start"])
    rows = {"stride_length": [], "delta_heading": []} | {k: [] for k in indicators}
    for j in range(n):
        a = stats["t_start"][j]
        if not math.isfinite(a):
            continue
        m = int(np.argmin(np.abs(ts - a)))
        if abs(ts[m] - a) > 0.5 / max(np.median(stats["fmotor"][np.isfinite(stats["fmotor"])]), 1e-9):
            continue
        vals = [stats[k][j] for k in indicators]
        if not all(map(math.isfinite, vals)):
            continue
        rows["stride_length"].append(truth_strides["stride_length"][m])
        rows["delta_heading"].append(truth_strides["delta_heading"][m])
        for k, v in zip(indicators, vals):
            rows[k].append(v)
    if len(rows["stride_length"]) < 10:
        raise ValueError("fewer than 10 complete strides")
    return {k: np.array(v) for k, v in rows.items()}
