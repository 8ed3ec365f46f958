import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from morphotune.analysis import fit_damped_oscillation, steady_amplitude
from morphotune.plant import (
    GroundModel,
    HopperPlant,
    HybridState,
    LegModel,
    Mode,
    SimulationError,
    ground_stiffness,
    linear_two_mass_response,
    simulate_hopper,
    step_response,
)
from morphotune.springs import LinearSpringParams, PneumaticSpringParams
from morphotune.timeseries import TimeSeries
from morphotune.vibrobot import VibrobotParams, simulate_vibrobot


@pytest.fixture(scope="module")
def resonant_run():
    p = HopperPlant()
    return p, simulate_hopper(p, 5.0, 8.0, 1.0 / 1000)


def heavy_linear():
    return HopperPlant(spring=LinearSpringParams(k=3000.0), m_body=2.0, drive_amplitude=0.001, c_spring=2.0)


class TestGround:
    def test_cubic_law(self):
        g = GroundModel(c_b=20.0, L=0.2)
        assert ground_stiffness(replace(g, L=0.1)) == pytest.approx(8 * ground_stiffness(g), rel=1e-14)

    def test_monotone_limit(self):
        k = [ground_stiffness(GroundModel(L=L)) for L in np.geomspace(0.05, 50.0, 40)]
        assert np.all(np.diff(k) < 0)
        assert k[-1] < 1e-3

    def test_with_stiffness_round_trip(self):
        assert GroundModel().with_stiffness(1234.0).stiffness == pytest.approx(1234.0, rel=1e-12)

    def test_equal_stiffness_grounds_give_identical_runs(self):
        a = GroundModel(c_b=20.0, L=0.2, c_ground=1.0)
        b = GroundModel(c_b=20.0 * 8.0, L=0.4, c_ground=1.0)
        assert a.stiffness == b.stiffness
        ra = simulate_hopper(HopperPlant(ground=a), 5.0, 1.0, 1e-3)
        rb = simulate_hopper(HopperPlant(ground=b), 5.0, 1.0, 1e-3)
        for ch in ra.channels:
            np.testing.assert_array_equal(ra[ch], rb[ch])

    def test_invalid(self):
        with pytest.raises(ValueError):
            GroundModel(L=0.0)


class TestHopper:
    def test_zero_drive_settles(self):
        p = HopperPlant(drive_amplitude=0.0)
        s = p.static_state()
        s = replace(s, y_body=s.y_body + 1e-3)
        fs = simulate_hopper(p, 0.0, 20.0, 1e-3, state=s).meta["final_state"]
        ke = 0.5 * p.m_upper * fs.v_body**2 + 0.5 * p.m_foot * fs.v_foot**2
        assert ke < 1e-9

    def test_static_state_is_equilibrium(self):
        p = HopperPlant(drive_amplitude=0.0)
        ts = simulate_hopper(p, 0.0, 1.0, 1e-3)
        assert np.ptp(ts["y_body"]) < 1e-12
        assert steady_amplitude(ts, "y_body", 0.2, 1.0) < 1e-6

    @pytest.mark.parametrize("f", [3.0, 4.0, 5.0, 6.0])
    def test_linear_response_matches_transfer_function(self, f):
        p = heavy_linear()
        ts = simulate_hopper(p, f, 40 / f, 1 / (200 * f))
        assert ts["flight"].max() == 0
        a = steady_amplitude(ts, "y_body", 8, f)
        w = 2 * math.pi * f
        ref = oracles.two_mass_amplitude(
            p.m_upper, p.m_foot, 3000.0, p.c_spring, p.ground.stiffness, p.ground.damping(p.m_foot),
            p.m_drive * p.drive_amplitude * w * w, w,
        )
        assert a == pytest.approx(ref, rel=0.05)
        assert linear_two_mass_response(p, f) == pytest.approx(ref, rel=1e-9)

    def test_flight_each_period_at_resonance(self, resonant_run):
        p, ts = resonant_run
        tail = ts.window(ts.t[-1] - 10 / 5.0)
        liftoffs = [e for e in tail.events if e[1] == "liftoff"]
        assert len(liftoffs) >= 10

    def test_modes_alternate_and_contact_unilateral(self, resonant_run):
        _, ts = resonant_run
        kinds = [k for _, k in ts.events]
        assert kinds, "expected flight phases"
        assert all(a != b for a, b in zip(kinds, kinds[1:]))
        stance = ts["flight"] == 0
        assert ts["contact_force"][stance].min() >= -1e-9
        assert np.all(ts["contact_force"][~stance] == 0)
        assert np.all(ts["ground_deflection"][~stance] >= 0)

    def test_energy_bookkeeping(self):
        # fine step: the extension stop is stiff, RK4 truncation dominates at coarse steps
        p = HopperPlant()
        ts = simulate_hopper(p, 5.0, 8.0, 1 / 4000)
        e0 = p.energy(ts.meta["initial_state"])
        e1 = p.energy(ts.meta["final_state"])
        injected = ts["drive_work"][-1]
        resid = (e1 - e0) - (injected - ts["dissipated"][-1])
        assert abs(resid) < 1e-3 * injected

    def test_dt_halving(self):
        p = HopperPlant()
        a = [steady_amplitude(simulate_hopper(p, 5.0, 8.0, dt), "y_body", 8, 5.0) for dt in (1e-3, 5e-4)]
        assert abs(a[0] - a[1]) < 0.005 * a[1]

    def test_too_coarse_step_rejected(self):
        with pytest.raises(ValueError):
            simulate_hopper(HopperPlant(), 5.0, 1.0, 1e-2)

    def test_over_compression_reported(self):
        soft = PneumaticSpringParams(P_v0=2e4, P_r0=1e3, x_max=0.02)
        p = HopperPlant(spring=soft, drive_amplitude=0.0)
        s = HybridState(Mode.FLIGHT, 0.2, 0.05, -3.0, -3.0, 0.0, 0.0)
        with pytest.raises(SimulationError) as err:
            simulate_hopper(p, 0.0, 1.0, 1e-3, state=s)
        assert err.value.time > 0

    def test_chaining_matches_single_run(self):
        p = HopperPlant()
        whole = simulate_hopper(p, 5.0, 2.0, 1e-3)
        a = simulate_hopper(p, 5.0, 1.0, 1e-3)
        b = simulate_hopper(p, 5.0, 1.0, 1e-3, state=a.meta["final_state"], phase=a.meta["final_phase"])
        np.testing.assert_allclose(b["y_body"], whole["y_body"][1000:], atol=1e-9)

    def test_timeseries_csv_round_trip(self, tmp_path, resonant_run):
        _, ts = resonant_run
        path = tmp_path / "run.csv"
        ts.to_csv(path)
        back = TimeSeries.from_csv(path)
        assert list(back.channels) == list(ts.channels)
        np.testing.assert_allclose(back["y_body"], ts["y_body"], rtol=1e-9)
        manifest = ts.manifest({"f": 5.0}, seed=0)
        assert manifest["events"][0][1] in ("liftoff", "touchdown")


class TestStepResponse:
    def test_undamped_frequency(self):
        leg = LegModel(m_eff=0.2, spring=LinearSpringParams(k=500.0))
        ts = step_response(leg, 0.01, 2.0, 1e-4)
        x = ts["x"]
        up = np.flatnonzero((x[:-1] < 0) & (x[1:] >= 0))
        tc = [ts.t[i] - x[i] * ts.dt / (x[i + 1] - x[i]) for i in up]
        f = 1.0 / np.mean(np.diff(tc))
        assert f == pytest.approx(math.sqrt(500.0 / 0.2) / (2 * math.pi), rel=1e-3)

    def test_energy_decays(self):
        leg = LegModel(m_eff=0.2, spring=LinearSpringParams(k=500.0), damping=0.5)
        e = step_response(leg, 0.01, 2.0, 1e-4)["energy"]
        assert np.all(np.diff(e) <= 1e-15)

    def test_matches_reference_integrator(self):
        leg = LegModel(m_eff=0.2, spring=LinearSpringParams(k=500.0), damping=0.3)
        ts = step_response(leg, 0.01, 1.0, 1e-4)
        ref = oracles.damped_decay(0.2, 500.0, 0.3, 0.01, 1.0, 1e-4)
        np.testing.assert_allclose(ts["x"], ref, atol=1e-10)

    def test_fit_round_trip(self):
        m, k, c = 0.2, 500.0, 0.4
        ts = step_response(LegModel(m_eff=m, spring=LinearSpringParams(k=k), damping=c), 0.01, 2.0, 1e-3)
        fit = fit_damped_oscillation(ts["x"], ts.dt)
        sigma = c / (2 * m)
        assert fit.sigma == pytest.approx(sigma, rel=0.01)
        assert fit.omega_d == pytest.approx(math.sqrt(k / m - sigma**2), rel=0.01)

    def test_domain(self):
        with pytest.raises(Exception):
            step_response(LegModel(m_eff=0.2, spring=PneumaticSpringParams()), 1.0, 1.0, 1e-3)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(0.0, 0.1))
def test_hopper_contact_never_pulls(scale, amp):
    p = HopperPlant(spring=PneumaticSpringParams().with_pressure(2.5e5 * scale), drive_amplitude=amp)
    ts = simulate_hopper(p, 5.0, 0.6, 1e-3)
    stance = ts["flight"] == 0
    assert ts["contact_force"][stance].min() >= -1e-9


@pytest.fixture(scope="module")
def velocities():
    out = {}
    for xc in (-0.04, 0.0, 0.04):
        out[xc] = simulate_vibrobot(replace(VibrobotParams(), x_com=xc), 6.0, 1 / 1800)["mean_velocity"]
    return out


class TestVibrobot:
    def test_direction_opposes_offset(self, velocities):
        assert velocities[-0.04] > 0
        assert velocities[0.04] < 0

    def test_symmetric_case_stands_still(self, velocities):
        assert abs(velocities[0.0]) < 0.01 * abs(velocities[0.04])

    def test_odd_in_offset(self, velocities):
        assert velocities[0.04] == pytest.approx(-velocities[-0.04], rel=0.1)

    def test_params_validated(self):
        with pytest.raises(ValueError):
            VibrobotParams(x_com=0.1)
        assert VibrobotParams(x_com=0.03).mirrored().x_com == -0.03

    def test_series_and_step_check(self):
        with pytest.raises(ValueError):
            simulate_vibrobot(VibrobotParams(), 1.0, 1e-3)
        r = simulate_vibrobot(VibrobotParams(x_com=0.02), 1.0, 1 / 1800)
        assert list(r["series"].channels)[:4] == ["x", "y", "theta", "phi"]
        assert np.all(np.isfinite(r["series"]["x"]))
