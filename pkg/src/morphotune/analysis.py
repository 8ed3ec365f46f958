"""Envelopes, sweeps, resonance maps, damped-oscillation fits and correlations."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np

from .plant import HopperPlant, SimulationError, simulate_hopper
from .springs import SpringDomainError
from .timeseries import TimeSeries

log = logging.getLogger(__name__)

EDGE_FRACTION = 0.05
MIN_ENVELOPE_SAMPLES = 64


class AnalysisError(ValueError):
    pass


# ---------------------------------------------------------------------------
# envelope


def _dominant_period(x: np.ndarray) -> float | None:
    """Dominant period in samples from the Hann-windowed spectrum peak."""
    n = len(x)
    spec = np.abs(np.fft.rfft(x * np.hanning(n)))
    spec[0] = 0.0
    k = int(np.argmax(spec))
    if k == 0 or spec[k] == 0.0:
        return None
    d = 0.0
    if 0 < k < len(spec) - 1:
        a, b, c = (math.log(spec[i] + 1e-300) for i in (k - 1, k, k + 1))
        den = a - 2 * b + c
        if den != 0:
            d = 0.5 * (a - c) / den
    return n / (k + d)


def _continuation(x: np.ndarray, e: int, period: float | None) -> np.ndarray:
    """``e`` samples continuing ``x`` past its end.

    Repeats the tail at the lag (close to a whole number of periods) whose
    shifted copy best matches the last period.
    """
    n = len(x)
    if period is None or period < 2 or period > n / 2:
        return np.zeros(e)
    m = max(1, math.ceil(e / period))
    lag0 = int(round(m * period))
    w = max(2, int(period))
    best, best_lag = math.inf, None
    reach = int(period / 4) + 1
    for lag in range(max(2, lag0 - reach), lag0 + reach + 1):
        if lag + w > n:
            break
        r = float(np.sum((x[n - w:] - x[n - w - lag:n - lag]) ** 2))
        if r < best:
            best, best_lag = r, lag
    if best_lag is None:
        return np.zeros(e)
    tail = x[n - best_lag:]
    return np.resize(tail, e)


def _remove_offset(x: np.ndarray, period: float | None) -> np.ndarray:
    n = len(x)
    if period is not None and 2 <= period <= n:
        span = int(round(math.floor(n / period) * period))
        start = (n - span) // 2
        return x - x[start:start + span].mean()
    return x - x.mean()


def analytic_signal(signal) -> np.ndarray:
    """Discrete analytic signal of a real record.

    The record (offset removed) is extended at both ends by a periodic
    continuation faded out with a cosine taper, zero-padded to a power of
    two, and transformed spectrally. The real part reproduces the detrended
    input.
    """
    x = np.asarray(signal, dtype=float)
    n = len(x)
    period = _dominant_period(x - x.mean()) if np.ptp(x) > 0 else None
    x = _remove_offset(x, period)
    e = max(2, n // 4)
    right = _continuation(x, e, period)
    left = _continuation(x[::-1], e, period)[::-1]
    fade = 0.5 - 0.5 * np.cos(np.pi * np.arange(e) / e)
    ext = np.concatenate([left * fade, x, right * fade[::-1]])
    N = 1 << int(math.ceil(math.log2(len(ext))))
    spec = np.fft.fft(ext, N)
    h = np.zeros(N)
    h[0] = 1.0
    h[1:N // 2] = 2.0
    h[N // 2] = 1.0
    return np.fft.ifft(spec * h)[e:e + n]


@dataclass
class Envelope:
    values: np.ndarray
    reliable: np.ndarray
    dt: float

    @property
    def interior(self) -> np.ndarray:
        return self.values[self.reliable]


def envelope(signal, dt: float) -> Envelope:
    """Instantaneous amplitude via the analytic signal.

    The first and last 5% of samples are flagged unreliable.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1 or len(x) < MIN_ENVELOPE_SAMPLES:
        raise AnalysisError(f"envelope needs >= {MIN_ENVELOPE_SAMPLES} samples")
    values = np.abs(analytic_signal(x))
    n = len(x)
    edge = int(math.ceil(EDGE_FRACTION * n))
    reliable = np.zeros(n, dtype=bool)
    reliable[edge:n - edge] = True
    return Envelope(values, reliable, dt)


def instantaneous_phase(signal) -> np.ndarray:
    return np.angle(analytic_signal(signal))


def steady_amplitude(ts: TimeSeries, channel: str, last_n_cycles: float, f: float) -> float:
    """Median envelope over the final ``last_n_cycles`` drive periods.

    The envelope is taken over the final ``3 * last_n_cycles`` periods so the
    reported window sits in its reliable interior.
    """
    period = 1.0 / f
    need = 3.0 * last_n_cycles * period
    if ts.duration + 1e-9 < need:
        raise AnalysisError(
            f"record of {ts.duration:.4g} s shorter than {need:.4g} s needed"
        )
    x = ts[channel]
    n_seg = int(round(need / ts.dt))
    seg = x[len(x) - n_seg:]
    env = envelope(seg, ts.dt)
    n_win = int(round(last_n_cycles * period / ts.dt))
    edge = int(math.ceil(EDGE_FRACTION * n_seg))
    stop = n_seg - edge
    window = env.values[stop - n_win:stop]
    return float(np.median(window))


# ---------------------------------------------------------------------------
# sweeps and maps


class Direction(str, Enum):
    UP = "up"
    DOWN = "down"


@dataclass
class SweepResult:
    direction: Direction
    frequencies: np.ndarray
    amplitudes: np.ndarray
    flight: np.ndarray
    jump_frequency: float | None

    def to_dict(self) -> dict:
        return {
            "direction": self.direction.value,
            "frequencies": [float(v) for v in self.frequencies],
            "amplitudes": [float(v) for v in self.amplitudes],
            "flight": [bool(v) for v in self.flight],
            "jump_frequency": self.jump_frequency,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _static_deflection(plant: HopperPlant) -> float:
    return plant.m_upper * plant.gravity / plant.series_stiffness()


def _jump(freqs, amps, flight, plant) -> float | None:
    for f, fl in zip(freqs, flight):
        if fl:
            return float(f)
    limit = 3.0 * _static_deflection(plant)
    for f, a in zip(freqs, amps):
        if a > limit:
            return float(f)
    return None


def sweep_frequencies(f_range: tuple[float, float], step: float, direction: Direction) -> np.ndarray:
    lo, hi = f_range
    if not (0 < lo < hi) or step <= 0:
        raise AnalysisError("f_range must be positive and increasing, step > 0")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    freqs = lo + step * np.arange(n)
    return freqs if Direction(direction) is Direction.UP else freqs[::-1]


def frequency_sweep(
    plant: HopperPlant,
    f_range: tuple[float, float],
    step: float,
    direction: Direction | str,
    dwell_cycles: float = 30,
    measure_cycles: float = 8,
    channel: str = "y_body",
    steps_per_cycle: int = 200,
) -> SweepResult:
    """Quasi-static sweep; the hybrid state and drive phase carry over.

    Each frequency dwells ``dwell_cycles`` periods; the amplitude and the
    flight flag come from the last ``measure_cycles`` periods.
    """
    direction = Direction(direction)
    if dwell_cycles < 3 * measure_cycles:
        raise AnalysisError("dwell_cycles must cover 3 * measure_cycles")
    freqs = sweep_frequencies(f_range, step, direction)
    state, phase = None, 0.0
    amps, flight = [], []
    for f in freqs:
        dt = 1.0 / (steps_per_cycle * f)
        try:
            ts = simulate_hopper(plant, f, dwell_cycles / f, dt, state=state, phase=phase)
        except (SimulationError, SpringDomainError) as exc:
            raise SimulationError(f"sweep failed at f={f:.6g} Hz: {exc}") from exc
        state, phase = ts.meta["final_state"], ts.meta["final_phase"]
        amps.append(steady_amplitude(ts, channel, measure_cycles, f))
        tail = ts.window(ts.t[-1] - measure_cycles / f)
        flight.append(bool(tail["flight"].max() > 0))
    amps = np.array(amps)
    flight = np.array(flight)
    return SweepResult(direction, freqs, amps, flight, _jump(freqs, amps, flight, plant))


def hysteresis_width(up: SweepResult, down: SweepResult, rel: float = 0.25) -> float:
    """Frequency span over which the up and down branches disagree.

    Branches disagree at a frequency when their amplitudes differ by more than
    ``rel`` of the larger one. Returns 0 for coincident branches.
    """
    fu = np.asarray(up.frequencies)
    order = np.argsort(down.frequencies)
    fd = np.asarray(down.frequencies)[order]
    if fu.shape != fd.shape or not np.allclose(np.sort(fu), fd):
        raise AnalysisError("sweeps must share a frequency grid")
    iu = np.argsort(fu)
    a_up = np.asarray(up.amplitudes)[iu]
    a_dn = np.asarray(down.amplitudes)[order]
    differ = np.abs(a_up - a_dn) > rel * np.maximum(a_up, a_dn)
    if not differ.any():
        return 0.0
    f = fd[differ]
    step = float(np.median(np.diff(fd))) if len(fd) > 1 else 0.0
    return float(f.max() - f.min() + step)


@dataclass
class ResonanceMap:
    frequencies: np.ndarray
    pressures: np.ndarray
    amplitudes: np.ndarray  # (n_pressure, n_frequency); NaN marks failed cells
    ridge: np.ndarray
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "frequencies": [float(v) for v in self.frequencies],
            "pressures": [float(v) for v in self.pressures],
            "amplitudes": [[None if not np.isfinite(v) else float(v) for v in row] for row in self.amplitudes],
            "ridge": [None if not np.isfinite(v) else float(v) for v in self.ridge],
            "failures": self.failures,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        lines = ["f,P,amplitude"]
        for i, p in enumerate(self.pressures):
            for j, f in enumerate(self.frequencies):
                a = self.amplitudes[i, j]
                lines.append(f"{f:.10g},{p:.10g},{'' if not np.isfinite(a) else format(a, '.10g')}")
        return "\n".join(lines) + "\n"


def ridge_of(freqs, amps) -> np.ndarray:
    ridge = np.full(amps.shape[0], np.nan)
    for i, row in enumerate(amps):
        if np.isfinite(row).any():
            ridge[i] = freqs[int(np.nanargmax(row))]
    return ridge


def pressure_tuner(plant: HopperPlant, P: float) -> HopperPlant:
    return plant.with_spring(plant.spring.with_pressure(P))


def _cell(args):
    plant, f, cycles, measure, channel, spc = args
    try:
        ts = simulate_hopper(plant, f, cycles / f, 1.0 / (spc * f))
        return steady_amplitude(ts, channel, measure, f), None
    except (SimulationError, SpringDomainError) as exc:
        return math.nan, str(exc)


def amplitude_grid(
    plants: Sequence[HopperPlant],
    f_grid: Sequence[float],
    dwell_cycles: float = 40,
    measure_cycles: float = 8,
    channel: str = "y_body",
    steps_per_cycle: int = 200,
    jobs: int = 1,
):
    """Fresh-start steady amplitude for every (plant, frequency) cell."""
    f_grid = np.asarray(f_grid, dtype=float)
    cells = [
        (p, float(f), dwell_cycles, measure_cycles, channel, steps_per_cycle)
        for p in plants
        for f in f_grid
    ]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(_cell, cells, chunksize=4))
    else:
        results = [_cell(c) for c in cells]
    amps = np.array([r[0] for r in results]).reshape(len(plants), len(f_grid))
    failures = [
        {"row": i // len(f_grid), "f": cells[i][1], "error": r[1]}
        for i, r in enumerate(results)
        if r[1] is not None
    ]
    return amps, failures


def resonance_map(
    plant: HopperPlant,
    f_grid: Sequence[float],
    pressure_grid: Sequence[float],
    dwell_cycles: float = 40,
    measure_cycles: float = 8,
    channel: str = "y_body",
    tune: Callable[[HopperPlant, float], HopperPlant] = pressure_tuner,
    jobs: int = 1,
) -> ResonanceMap:
    """Amplitude over the frequency x pressure plane and its per-pressure ridge.

    Every cell starts from static equilibrium; failing cells are recorded and
    left out of the ridge.
    """
    if len(pressure_grid) == 0 or len(f_grid) == 0:
        raise AnalysisError("frequency and pressure grids must be non-empty")
    f_grid = np.asarray(f_grid, dtype=float)
    pressures = np.asarray(pressure_grid, dtype=float)
    plants = [tune(plant, float(P)) for P in pressures]
    amps, failures = amplitude_grid(plants, f_grid, dwell_cycles, measure_cycles, channel, jobs=jobs)
    for fail in failures:
        fail["P"] = float(pressures[fail.pop("row")])
    return ResonanceMap(f_grid, pressures, amps, ridge_of(f_grid, amps), failures)


# ---------------------------------------------------------------------------
# damped oscillation fit


@dataclass
class DampedFit:
    A: float
    sigma: float
    omega_d: float
    phi: float
    offset: float
    rmse: float
    iterations: int = 0

    @property
    def omega_n(self) -> float:
        return math.sqrt(self.omega_d**2 + self.sigma**2)

    def model(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.offset + self.A * np.exp(-self.sigma * t) * np.cos(self.omega_d * t + self.phi)

    def to_dict(self) -> dict:
        return asdict(self)


def _crossings(x: np.ndarray) -> np.ndarray:
    """Fractional sample indices of sign changes."""
    s = np.signbit(x)
    idx = np.flatnonzero(s[1:] != s[:-1])
    frac = x[idx] / (x[idx] - x[idx + 1])
    return idx + frac


def _schmitt_crossings(x: np.ndarray, h: float) -> np.ndarray:
    """Zero crossings confirmed by excursions beyond ``+-h``; noise near zero is ignored."""
    state = 0
    out = []
    zc = _crossings(x)
    for i in np.flatnonzero(np.abs(x) > h):
        s = 1 if x[i] > 0 else -1
        if state and s != state:
            # last plain crossing before the trigger
            k = np.searchsorted(zc, i) - 1
            out.append(zc[k])
        state = s
    return np.array(out)


def _linear_part(t, y, sigma, omega):
    decay = np.exp(-sigma * t)
    B = np.column_stack([np.ones_like(t), decay * np.cos(omega * t), decay * np.sin(omega * t)])
    coef, *_ = np.linalg.lstsq(B, y, rcond=None)
    r = y - B @ coef
    return coef, float(r @ r)


def fit_damped_oscillation(series, dt: float, max_iter: int = 200, tol: float = 1e-9) -> DampedFit:
    """Least-squares fit of ``offset + A exp(-sigma t) cos(omega_d t + phi)``.

    Initial frequency from zero crossings, initial decay from the logarithmic
    decrement of successive envelope peaks, then a small grid around both
    before Gauss-Newton iterations on ``(offset, a, b, sigma, omega)`` with
    ``a cos + b sin`` standing in for amplitude and phase.
    """
    y = np.asarray(series, dtype=float)
    n = len(y)
    t = dt * np.arange(n)
    scale = float(np.max(np.abs(y - np.median(y)))) if n else 0.0
    if n < 8 or scale == 0.0:
        raise AnalysisError("series too short or constant")
    base = float(np.median(y[-max(4, n // 5):]))
    zc = _schmitt_crossings(y - base, 0.1 * scale)
    if len(zc) < 2:
        raise AnalysisError("no oscillation: fewer than two zero crossings (overdamped?)")
    omega0 = math.pi * (len(zc) - 1) / ((zc[-1] - zc[0]) * dt)

    # log decrement from extrema between crossings
    peaks = []
    bounds = np.concatenate([[0], np.ceil(zc).astype(int), [n]])
    for a, b in zip(bounds[:-1], bounds[1:]):
        if b - a >= 1:
            seg = np.abs(y[a:b] - base)
            k = a + int(np.argmax(seg))
            peaks.append((t[k], float(np.abs(y[k] - base))))
    peaks = [p for p in peaks if p[1] > 0]
    sigma0 = 0.0
    if len(peaks) >= 3:
        pt, pa = np.array(peaks).T
        keep = pa > 1e-3 * pa.max()
        if keep.sum() >= 3:
            slope = np.polyfit(pt[keep], np.log(pa[keep]), 1)[0]
            sigma0 = max(0.0, -slope)

    best = None
    for sg in sigma0 * np.array([0.5, 0.75, 1.0, 1.5, 2.0]) if sigma0 > 0 else [0.0]:
        for om in omega0 * np.linspace(0.97, 1.03, 13):
            coef, sse = _linear_part(t, y, sg, om)
            if best is None or sse < best[0]:
                best = (sse, sg, om, coef)
    _, sigma, omega, coef = best
    p = np.array([coef[0], coef[1], coef[2], sigma, omega])

    def residual(p):
        c, a, b, sg, om = p
        decay = np.exp(-sg * t)
        cw, sw = np.cos(om * t), np.sin(om * t)
        model = c + decay * (a * cw + b * sw)
        J = np.empty((n, 5))
        J[:, 0] = 1.0
        J[:, 1] = decay * cw
        J[:, 2] = decay * sw
        J[:, 3] = -t * decay * (a * cw + b * sw)
        J[:, 4] = t * decay * (-a * sw + b * cw)
        return y - model, J

    r, J = residual(p)
    sse = float(r @ r)
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        step, *_ = np.linalg.lstsq(J, r, rcond=None)
        lam = 1.0
        while lam > 1e-6:
            trial = p + lam * step
            r_t, J_t = residual(trial)
            sse_t = float(r_t @ r_t)
            if sse_t <= sse * (1 + 1e-12) + 1e-300:
                break
            lam *= 0.5
        else:
            converged = True
            break
        rel = np.abs(lam * step) / np.maximum(np.abs(trial), np.abs(p).max() * 1e-12 + 1e-300)
        p, r, J, sse = trial, r_t, J_t, sse_t
        if np.max(rel) < tol:
            converged = True
            break
    if not converged:
        raise AnalysisError(f"Gauss-Newton did not converge in {max_iter} iterations")
    c, a, b, sg, om = p
    if om < 0:
        om, b = -om, -b
    A = math.hypot(a, b)
    phi = math.atan2(-b, a)
    return DampedFit(A, float(sg), float(om), phi, float(c), math.sqrt(sse / n), it)


def infer_mass_ratio(fit_a: DampedFit, fit_b: DampedFit) -> float:
    """m_a / m_b for two legs with equal springs, from their natural frequencies."""
    wa = fit_a.omega_d**2 + fit_a.sigma**2
    wb = fit_b.omega_d**2 + fit_b.sigma**2
    if not (wa > 0 and wb > 0 and math.isfinite(wa) and math.isfinite(wb)):
        raise AnalysisError("degenerate fit: natural frequency must be positive")
    return wb / wa


# ---------------------------------------------------------------------------
# correlation


@dataclass
class CorrelationMatrix:
    labels: list[str]
    r: np.ndarray
    n: int

    def __getitem__(self, key: tuple[str, str]) -> float:
        i, j = (self.labels.index(k) for k in key)
        return float(self.r[i, j])

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "r": [[float(v) for v in row] for row in self.r],
            "n": self.n,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def correlation_matrix(table: Mapping[str, Sequence[float]]) -> CorrelationMatrix:
    """Pearson coefficients between all named columns."""
    labels = list(table)
    cols = [np.asarray(table[k], dtype=float) for k in labels]
    if not cols:
        raise AnalysisError("empty table")
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise AnalysisError("columns must have equal length")
    if n < 3:
        raise AnalysisError("need at least 3 rows")
    Z = []
    for name, c in zip(labels, cols):
        d = c - c.mean()
        norm = math.sqrt(float(d @ d))
        if norm == 0.0 or norm <= 1e-14 * max(1.0, float(np.abs(c).max())) * math.sqrt(n):
            raise AnalysisError(f"column {name!r} is constant")
        Z.append(d / norm)
    Z = np.array(Z)
    r = np.clip(Z @ Z.T, -1.0, 1.0)
    r = 0.5 * (r + r.T)
    np.fill_diagonal(r, 1.0)
    return CorrelationMatrix(labels, r, n)
