import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from morphotune.analysis import (
    AnalysisError,
    DampedFit,
    analytic_signal,
    Direction,
    correlation_matrix,
    envelope,
    fit_damped_oscillation,
    frequency_sweep,
    hysteresis_width,
    infer_mass_ratio,
    resonance_map,
    steady_amplitude,
    sweep_frequencies,
)
from morphotune.plant import HopperPlant, linear_two_mass_response, simulate_hopper
from morphotune.springs import LinearSpringParams
from morphotune.timeseries import TimeSeries


def tone(A, f, duration, dt, phase=0.0):
    t = np.arange(int(round(duration / dt))) * dt
    return t, A * np.sin(2 * math.pi * f * t + phase)


class TestEnvelope:
    def test_pure_tone(self):
        _, x = tone(0.7, 3.0, 10.0, 1e-3)
        env = envelope(x, 1e-3)
        assert np.all(np.abs(env.interior - 0.7) < 0.007)

    def test_beat_matches_closed_form(self):
        t = np.arange(10000) * 1e-3
        x = np.sin(2 * math.pi * 5 * t) + np.sin(2 * math.pi * 5.5 * t)
        env = envelope(x, 1e-3)
        ref = np.abs(2 * np.cos(math.pi * 0.5 * t))
        inner = env.reliable
        assert np.max(np.abs(env.values[inner] - ref[inner])) < 0.05
        assert env.interior.max() == pytest.approx(2.0, abs=0.02)
        assert env.interior.min() < 0.05

    def test_zero_signal(self):
        env = envelope(np.zeros(200), 1e-3)
        assert np.all(env.values == 0)

    def test_edges_flagged(self):
        env = envelope(np.ones(1000), 1e-3)
        assert env.reliable.sum() == 900
        assert not env.reliable[:50].any() and not env.reliable[-50:].any()

    def test_too_short(self):
        with pytest.raises(AnalysisError):
            envelope(np.ones(63), 1e-3)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.tuples(st.floats(0.1, 2.0), st.floats(1.0, 40.0), st.floats(0, 2 * math.pi)), min_size=1, max_size=4),
    st.integers(256, 3000),
)
def test_envelope_bounds_signal(components, n):
    t = np.arange(n) * 1e-3
    x = sum(A * np.sin(2 * math.pi * f * t + p) for A, f, p in components)
    env = envelope(x, 1e-3)
    # the analytic signal's real part is the input less a constant offset
    a = analytic_signal(x)
    offset = float(np.mean(x - a.real))
    np.testing.assert_allclose(a.real, x - offset, atol=1e-9 * np.abs(x).max())
    inner = env.reliable
    assert np.all(env.values[inner] >= np.abs(x - offset)[inner] - 1e-9 * np.abs(x).max())


class TestSteadyAmplitude:
    def test_pure_tone(self):
        _, x = tone(0.02, 5.0, 6.0, 1e-3)
        ts = TimeSeries(1e-3, {"y": x})
        assert steady_amplitude(ts, "y", 8, 5.0) == pytest.approx(0.02, rel=0.01)

    def test_locality(self):
        t, x = tone(1.0, 5.0, 12.0, 1e-3)
        x = np.where(t < 6.0, 1.0, 0.3) * x
        ts = TimeSeries(1e-3, {"y": x})
        assert steady_amplitude(ts, "y", 8, 5.0) == pytest.approx(0.3, rel=0.01)

    def test_window_exceeds_data(self):
        ts = TimeSeries(1e-3, {"y": np.zeros(500)})
        with pytest.raises(AnalysisError):
            steady_amplitude(ts, "y", 8, 5.0)

    def test_zero_drive_hopper(self):
        p = HopperPlant(drive_amplitude=0.0)
        ts = simulate_hopper(p, 5.0, 6.0, 1e-3)
        assert steady_amplitude(ts, "y_body", 8, 5.0) == pytest.approx(0.0, abs=1e-6)


def damped_linear():
    return HopperPlant(spring=LinearSpringParams(k=3000.0), m_body=2.0, drive_amplitude=0.001, c_spring=10.0)


@pytest.fixture(scope="module")
def linear_sweeps():
    p = damped_linear()
    kw = dict(dwell_cycles=40, measure_cycles=8)
    return p, frequency_sweep(p, (3.0, 5.0), 0.1, "up", **kw), frequency_sweep(p, (3.0, 5.0), 0.1, "down", **kw)


class TestSweep:
    def test_grid(self):
        up = sweep_frequencies((4.0, 5.0), 0.25, Direction.UP)
        np.testing.assert_allclose(up, [4.0, 4.25, 4.5, 4.75, 5.0])
        np.testing.assert_allclose(sweep_frequencies((4.0, 5.0), 0.25, "down"), up[::-1])
        with pytest.raises(AnalysisError):
            sweep_frequencies((5.0, 4.0), 0.25, "up")
        with pytest.raises(AnalysisError):
            sweep_frequencies((4.0, 5.0), 0.0, "up")

    def test_linear_up_down_agree(self, linear_sweeps):
        _, up, dn = linear_sweeps
        np.testing.assert_allclose(up.amplitudes, dn.amplitudes[::-1], rtol=0.02)
        assert hysteresis_width(up, dn) == 0.0

    def test_linear_peak_at_linearized_resonance(self, linear_sweeps):
        p, up, dn = linear_sweeps
        fine = np.linspace(3.0, 5.0, 2001)
        f_lin = fine[np.argmax([linear_two_mass_response(p, f) for f in fine])]
        for s in (up, dn):
            assert abs(s.frequencies[np.argmax(s.amplitudes)] - f_lin) <= 0.05 + 1e-9

    def test_linear_unimodal(self, linear_sweeps):
        _, up, _ = linear_sweeps
        a = up.amplitudes
        interior_max = [i for i in range(1, len(a) - 1) if a[i] > a[i - 1] and a[i] > a[i + 1]]
        assert len(interior_max) == 1

    def test_invariants_and_json(self, linear_sweeps):
        _, up, dn = linear_sweeps
        assert np.all(np.diff(up.frequencies) > 0) and np.all(np.diff(dn.frequencies) < 0)
        assert np.all(up.amplitudes >= 0)
        assert up.jump_frequency is None  # stance only, small motion
        d = json.loads(up.to_json())
        assert d["direction"] == "up" and len(d["amplitudes"]) == len(up.frequencies)

    def test_dwell_must_cover_measurement(self):
        with pytest.raises(AnalysisError):
            frequency_sweep(damped_linear(), (3.0, 4.0), 0.5, "up", dwell_cycles=10, measure_cycles=8)


class TestResonanceMap:
    def test_single_pressure_matches_sweep(self):
        p = HopperPlant(drive_amplitude=0.001, c_spring=3.0)
        up = frequency_sweep(p, (4.0, 6.0), 0.25, "up", dwell_cycles=40, measure_cycles=8)
        rm = resonance_map(p, up.frequencies, [p.spring.P_v0], dwell_cycles=40, measure_cycles=8)
        np.testing.assert_allclose(rm.amplitudes[0], up.amplitudes, rtol=0.02)
        assert rm.ridge[0] == up.frequencies[np.argmax(up.amplitudes)]

    def test_empty_grid(self):
        with pytest.raises(AnalysisError):
            resonance_map(HopperPlant(), [5.0], [])

    def test_serialization_and_invariants(self):
        p = HopperPlant(drive_amplitude=0.001, c_spring=3.0)
        rm = resonance_map(p, [4.5, 5.0], [2.0e5, 2.5e5], dwell_cycles=24, measure_cycles=8)
        assert rm.amplitudes.shape == (2, 2)
        assert np.all(rm.amplitudes >= 0)
        assert set(rm.ridge) <= {4.5, 5.0}
        lines = rm.to_csv().splitlines()
        assert lines[0] == "f,P,amplitude" and len(lines) == 5
        assert json.loads(rm.to_json())["pressures"] == [2.0e5, 2.5e5]

    def test_failed_cells_skipped_by_ridge(self):
        # at 0.8 bar the 5 Hz cell over-compresses the leg, at 0.5 bar both do
        p = HopperPlant(drive_amplitude=0.05)
        rm = resonance_map(p, [3.0, 5.0], [0.5e5, 0.8e5], dwell_cycles=24, measure_cycles=8)
        assert np.isnan(rm.amplitudes[0]).all()
        assert np.isfinite(rm.amplitudes[1, 0]) and np.isnan(rm.amplitudes[1, 1])
        assert np.isnan(rm.ridge[0]) and rm.ridge[1] == 3.0
        assert {(f["P"], f["f"]) for f in rm.failures} == {(0.5e5, 3.0), (0.5e5, 5.0), (0.8e5, 5.0)}
        assert all("over-compressed" in f["error"] for f in rm.failures)


def decay(A=1.3, sigma=1.2, omega=18.0, phi=0.4, c=0.1, duration=3.0, dt=1e-3):
    t = np.arange(int(round(duration / dt))) * dt
    return c + A * np.exp(-sigma * t) * np.cos(omega * t + phi)


class TestFit:
    def test_noiseless(self):
        fit = fit_damped_oscillation(decay(), 1e-3)
        assert fit.sigma == pytest.approx(1.2, rel=1e-3)
        assert fit.omega_d == pytest.approx(18.0, rel=1e-3)
        assert fit.A == pytest.approx(1.3, rel=1e-6)
        assert fit.phi == pytest.approx(0.4, abs=1e-6)
        assert fit.offset == pytest.approx(0.1, abs=1e-9)
        assert fit.rmse < 1e-9

    def test_undamped(self):
        fit = fit_damped_oscillation(decay(sigma=0.0), 1e-3)
        assert abs(fit.sigma) < 1e-6
        assert fit.omega_d == pytest.approx(18.0, rel=1e-3)

    def test_noisy_median(self):
        rng = np.random.default_rng(3)
        y0 = decay()
        errs = []
        for _ in range(20):
            fit = fit_damped_oscillation(y0 + 0.05 * 1.3 * rng.standard_normal(len(y0)), 1e-3)
            errs.append((abs(fit.sigma / 1.2 - 1), abs(fit.omega_d / 18.0 - 1)))
        med = np.median(errs, axis=0)
        assert med[0] < 0.05 and med[1] < 0.05

    def test_overdamped_rejected(self):
        t = np.arange(3000) * 1e-3
        with pytest.raises(AnalysisError):
            fit_damped_oscillation(np.exp(-2 * t), 1e-3)

    def test_invariants(self):
        fit = fit_damped_oscillation(decay(), 1e-3)
        assert fit.sigma >= 0 and fit.omega_d > 0 and fit.rmse >= 0
        assert fit.omega_n == pytest.approx(math.hypot(18.0, 1.2), rel=1e-3)
        np.testing.assert_allclose(fit.model(np.arange(3000) * 1e-3), decay(), atol=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 100.0), st.floats(0.2, 3.0), st.floats(8.0, 40.0))
def test_fit_scale_equivariant(c, sigma, omega):
    y = decay(sigma=sigma, omega=omega, c=0.05)
    f1 = fit_damped_oscillation(y, 1e-3)
    f2 = fit_damped_oscillation(c * y, 1e-3)
    assert f2.A == pytest.approx(c * f1.A, rel=1e-9)
    assert f2.sigma == pytest.approx(f1.sigma, rel=1e-9, abs=1e-12)
    assert f2.omega_d == pytest.approx(f1.omega_d, rel=1e-9)
    assert f2.phi == pytest.approx(f1.phi, rel=1e-9, abs=1e-9)


class TestMassRatio:
    def fit(self, omega, sigma=0.0):
        return DampedFit(1.0, sigma, omega, 0.0, 0.0, 0.0)

    def test_identical(self):
        assert infer_mass_ratio(self.fit(20.0, 1.0), self.fit(20.0, 1.0)) == 1.0

    def test_point_six(self):
        a = self.fit(20.0 * math.sqrt(1 / 0.6))
        b = self.fit(20.0)
        assert infer_mass_ratio(a, b) == pytest.approx(0.6, rel=1e-12)

    @given(st.floats(1.0, 100.0), st.floats(0.0, 5.0), st.floats(1.0, 100.0), st.floats(0.0, 5.0))
    def test_reciprocity(self, wa, sa, wb, sb):
        a, b = self.fit(wa, sa), self.fit(wb, sb)
        assert infer_mass_ratio(a, b) * infer_mass_ratio(b, a) == pytest.approx(1.0, abs=1e-12)

    def test_degenerate(self):
        with pytest.raises(AnalysisError):
            infer_mass_ratio(self.fit(0.0), self.fit(1.0))


class TestCorrelation:
    def test_self_and_exact_linear(self, rng):
        x = rng.standard_normal(50)
        cm = correlation_matrix({"x": x, "y": -2 * x + 3, "z": x})
        assert cm["x", "x"] == 1.0
        assert cm["x", "z"] == pytest.approx(1.0, abs=1e-12)
        assert cm["x", "y"] == pytest.approx(-1.0, abs=1e-12)

    def test_planted_model(self, rng):
        hip = rng.uniform(0.5, 1.5, 200)
        stride = 0.8 * hip + 0.02 * rng.standard_normal(200)
        assert correlation_matrix({"hip_sum": hip, "stride": stride})["hip_sum", "stride"] > 0.9

    def test_invariants(self, rng):
        cm = correlation_matrix({k: rng.standard_normal(30) for k in "abcd"})
        assert np.allclose(cm.r, cm.r.T)
        assert np.all(np.diag(cm.r) == 1)
        assert np.all(np.abs(cm.r) <= 1)
        assert cm.n == 30
        assert json.loads(cm.to_json())["labels"] == list("abcd")

    def test_constant_column_named(self):
        with pytest.raises(AnalysisError, match="flat"):
            correlation_matrix({"a": [1.0, 2.0, 3.0], "flat": [2.0, 2.0, 2.0]})

    def test_too_few_rows(self):
        with pytest.raises(AnalysisError):
            correlation_matrix({"a": [1.0, 2.0], "b": [2.0, 1.0]})


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.01, 100.0), st.floats(-50.0, 50.0), st.integers(0, 2))
def test_correlation_affine_and_sign(seed, scale, shift, col):
    rng = np.random.default_rng(seed)
    table = {k: rng.standard_normal(20) for k in "abc"}
    base = correlation_matrix(table).r
    key = "abc"[col]
    scaled = correlation_matrix({**table, key: scale * table[key] + shift}).r
    np.testing.assert_allclose(scaled, base, atol=1e-12)
    flipped = correlation_matrix({**table, key: -table[key]}).r
    sign = np.ones(3)
    sign[col] = -1
    np.testing.assert_allclose(flipped, base * np.outer(sign, sign), atol=1e-12)
