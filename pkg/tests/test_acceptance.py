"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

import oracles
from morphotune import cli
from morphotune.analysis import (
    correlation_matrix,
    fit_damped_oscillation,
    frequency_sweep,
    hysteresis_width,
    infer_mass_ratio,
    resonance_map,
    steady_amplitude,
)
from morphotune.controllers import (
    FeedbackTap,
    HarmonicPlant,
    HopfParams,
    KuramotoCommunity,
    TrackerParams,
    entrain,
    mean_order,
    resonance_tracker,
)
from morphotune.modes import ModeLabel, PlateModel, assemble, modal_response, normal_modes
from morphotune.nav import OdometerModel, Scenario, build_indicator_table, generate_gait_data, kf_fuse, run_ins
from morphotune.plant import GroundModel, HopperPlant, simulate_hopper
from morphotune.springs import MagneticSpringParams, PneumaticSpringParams, calibrate_magnetic
from morphotune.vibrobot import VibrobotParams, simulate_vibrobot

P0 = PneumaticSpringParams().P_v0


def verdict(tag: str, ok: bool, detail: str, elapsed: float | None = None, budget: float | None = None):
    within = budget is None or elapsed is None or elapsed < budget
    timing = "" if elapsed is None else f" [{elapsed:.1f} s" + (f" / budget {budget:g} s]" if budget else "]")
    print(f"\n{'PASS' if ok and within else 'FAIL'} {tag}: {detail}{timing}")
    assert ok, detail
    assert within, f"runtime {elapsed:.1f} s exceeds {budget} s"


def test_c01_pneumatic_rest_force_and_concavity():
    t0 = time.perf_counter()
    F0 = PneumaticSpringParams().force(0.0)
    x = np.linspace(0.0, 0.01, 201)
    signs = {}
    for cv in [0.0, *np.geomspace(1e-9, 1e-3, 61)]:
        curv = np.array([PneumaticSpringParams(C_v=float(cv)).curvature(float(v)) for v in x])
        if curv.min() > 0:
            signs.setdefault("positive", cv)
        if curv.max() < 0:
            signs.setdefault("negative", cv)
    ok = abs(F0 - oracles.PNEUMATIC_F0) < 1e-12 and abs(F0) < 0.1 and {"positive", "negative"} <= set(signs)
    verdict(
        "C1 pneumatic spring",
        ok,
        f"F(0)={F0:.4g} N; C_v with all-positive curvature: {signs.get('positive')}, all-negative: {signs.get('negative')}",
        time.perf_counter() - t0,
        1.0,
    )


def test_c02_magnetic_modulation():
    t0 = time.perf_counter()
    p = MagneticSpringParams()
    load = 10.0
    q = MagneticSpringParams(c_I=calibrate_magnetic(p, load, 0.10))
    hi, lo, mid = (q.equilibrium_gap(load, I) for I in (0.4, -0.4, 0.0))
    mod = (hi - lo) / mid
    verdict("C2 magnetic spring", abs(mod - 0.10) <= 0.005, f"peak-to-peak modulation {mod:.5f}", time.perf_counter() - t0, 1.0)


def test_c03_hopper_hysteresis():
    t0 = time.perf_counter()
    widths, jumps = {}, {}
    for scale in (1.0, 1.2):
        plant = HopperPlant().with_spring(PneumaticSpringParams().with_pressure(scale * P0))
        kw = dict(dwell_cycles=24, measure_cycles=8)
        up = frequency_sweep(plant, (4.0, 7.0), 0.25, "up", **kw)
        dn = frequency_sweep(plant, (4.0, 7.0), 0.25, "down", **kw)
        widths[scale] = hysteresis_width(up, dn)
        jumps[scale] = (up.jump_frequency, dn.jump_frequency)
    ju, jd = jumps[1.0]
    sep = abs(ju - jd) / min(ju, jd)
    ok = sep > 0.02 and widths[1.2] > widths[1.0]
    verdict(
        "C3 hopper hysteresis",
        ok,
        f"baseline jumps up {ju:.2f} / down {jd:.2f} Hz ({100 * sep:.1f}%); widths {widths[1.0]:.2f} -> {widths[1.2]:.2f} Hz",
        time.perf_counter() - t0,
    )


def test_c04_resonance_ridge():
    t0 = time.perf_counter()
    f = np.arange(3.5, 7.5, 0.05)
    by_p = resonance_map(HopperPlant(), f, [s * P0 for s in (0.6, 0.8, 1.0, 1.2)])
    kg = [5000.0, 2000.0, 1000.0, 700.0]
    by_g = resonance_map(HopperPlant(), f, kg, tune=lambda p, k: p.with_ground(p.ground.with_stiffness(k)))
    rp, rg = by_p.ridge, by_g.ridge
    ok = (
        np.all(np.isfinite(rp)) and np.all(np.diff(rp) > 0)
        and np.all(np.isfinite(rg)) and np.all(np.diff(rg) < 0)
    )
    verdict(
        "C4 resonance map",
        bool(ok),
        f"ridge vs pressure {np.round(rp, 2).tolist()} Hz; vs softening ground {np.round(rg, 2).tolist()} Hz",
        time.perf_counter() - t0,
    )


def test_c05_resonance_tracker():
    t0 = time.perf_counter()
    base = HopperPlant(drive_amplitude=0.002).with_ground(GroundModel().with_stiffness(2000.0))
    base = base.with_spring(base.spring.with_pressure(0.975 * P0))
    tp = TrackerParams(probe=0.025 * P0, bounds=(0.5 * P0, 1.5 * P0))
    step = 10
    run = resonance_tracker(base, tp, {step: 3000.0}, epochs=step + 30, f=4.8)
    pre_A, pre_ks, pre_u = run.amplitude[step - 1], run.series_stiffness[step - 1], run.tuning[step - 1]
    post = run.amplitude[step:]
    hit = np.flatnonzero(post >= 0.9 * pre_A)
    recovered = len(hit) > 0 and run.amplitude[-1] >= 0.9 * pre_A
    ks_err = abs(run.series_stiffness[-1] / pre_ks - 1)
    ok = run.tuning[-1] < pre_u and recovered and ks_err <= 0.10
    verdict(
        "C5 resonance tracker",
        bool(ok),
        f"pressure {pre_u / P0:.3f} -> {run.tuning[-1] / P0:.3f} P0; amplitude {run.amplitude[-1] / pre_A:.1%} of pre-step"
        f" (first >= 90% after {hit[0] + 1 if len(hit) else 'never'} epochs); series stiffness off by {ks_err:.1%}",
        time.perf_counter() - t0,
    )


def test_c06_vibrobot_direction():
    t0 = time.perf_counter()
    foot = VibrobotParams().foot_length
    v = {}
    for frac in (-0.2, -0.1, 0.0, 0.1, 0.2):
        p = VibrobotParams(x_com=frac * foot)
        v[frac] = simulate_vibrobot(p, 6.0, 1 / 1800)["mean_velocity"]
    signs = all(np.sign(v[s]) == -np.sign(s) for s in (-0.2, -0.1, 0.1, 0.2))
    still = abs(v[0.0]) < 0.1 * abs(v[0.2])
    verdict(
        "C6 vibrobot",
        signs and still,
        "mean velocity (mm/s) " + ", ".join(f"{k:+.0%}: {1e3 * x:+.2f}" for k, x in v.items()),
        time.perf_counter() - t0,
        60.0,
    )


def test_c07_hopf_entrainment():
    t0 = time.perf_counter()
    plant = HarmonicPlant(1.0, 100.0, 0.0)
    finals = {}
    for w0 in (6.0, 8.0, 10.0, 12.0, 15.0):
        out = entrain(plant, HopfParams(epsilon=2.0, drive_gain=1.0, omega_init=w0), 150.0, 2e-3, z0=1.0, record_every=10)
        finals[w0] = out["omega_final"]
    lock = all(abs(w / plant.omega0 - 1) <= 0.02 for w in finals.values())

    damped = HarmonicPlant(1.0, 100.0, 2.0)
    times = {}
    for k in range(8):
        hp = HopfParams(epsilon=1.0, drive_gain=30.0, omega_init=6.0, phase_lag=k * math.pi / 4)
        out = entrain(damped, hp, 100.0, 2e-3, record_every=10)
        # a run that never settles takes at least the whole run
        times[k] = out["convergence_time"] if out["converged"] else 100.0
    finite = [t for t in times.values() if t < 100.0]
    lag_ratio = max(times.values()) / min(times.values())

    taps = {}
    for tap in (FeedbackTap.POSITION, FeedbackTap.VELOCITY):
        hp = HopfParams(epsilon=1.0, drive_gain=10.0, omega_init=6.0, phase_lag=7 * math.pi / 4, feedback_tap=tap)
        taps[tap] = entrain(damped, hp, 200.0, 2e-3, z0=1.0, record_every=10)["omega_final"]
    wp, wv = taps[FeedbackTap.POSITION], taps[FeedbackTap.VELOCITY]
    tap_diff = abs(wp - wv) / min(wp, wv)
    ok = lock and len(finite) >= 1 and lag_ratio >= 2.0 and tap_diff > 0.02
    verdict(
        "C7 Hopf entrainment",
        ok,
        f"omega_final {[round(w, 3) for w in finals.values()]} (target {plant.omega0:g}); "
        f"convergence times by lag {[round(t, 1) for t in times.values()]} s, ratio {lag_ratio:.2f}; "
        f"taps position {wp:.3f} vs velocity {wv:.3f} ({tap_diff:.1%})",
        time.perf_counter() - t0,
        60.0,
    )


def test_c08_kuramoto_transition():
    t0 = time.perf_counter()
    width = 0.5
    Kc = oracles.kuramoto_critical_coupling(width)
    med = {}
    for ratio in (1.0, 4.0):
        rs = [mean_order(KuramotoCommunity.create(2000, 1.0, width, K=ratio * width, seed=s), 40.0, 0.008) for s in range(20)]
        med[ratio] = float(np.median(rs))
    ok = med[1.0] < 0.1 and med[4.0] > 0.5 and width < Kc < 4 * width
    verdict(
        "C8 Kuramoto",
        ok,
        f"median r = {med[1.0]:.3f} at K=gamma, {med[4.0]:.3f} at K=4 gamma; K_c = {Kc:g}",
        time.perf_counter() - t0,
        300.0,
    )


def test_c09_normal_modes():
    t0 = time.perf_counter()
    M, K = assemble(PlateModel.rectangle(2.0, 0.3, 0.15, 800.0, leg_y=0.1))
    ms = normal_modes(M, K)
    w = {m.label: m.omega for m in ms}
    labels_ok = len(ms) == 3 and set(w) == {ModeLabel.STOTT, ModeLabel.BOUND, ModeLabel.ROLL}
    ratio = w[ModeLabel.BOUND] / w[ModeLabel.STOTT] if labels_ok else math.nan
    leak = 0.0
    for j in range(3):
        v, wj = ms[j].shape, ms[j].omega
        E = modal_response(M, K, 0.0, lambda t: (M @ v) * math.sin(wj * t), 5.0, 1e-3)["energy"]
        leak = max(leak, np.delete(E, j, axis=1).max() / E[:, j].max())
    ok = labels_ok and abs(ratio - math.sqrt(3)) < 1e-9 and leak < 1e-6
    verdict(
        "C9 normal modes",
        ok,
        f"labels {sorted(m.value for m in w)}; pitch/heave {ratio:.12f}; worst modal leakage {leak:.2e}",
        time.perf_counter() - t0,
        1.0,
    )


def decay(A, sigma, wd, phi, off, dt=1e-3, T=3.0):
    t = np.arange(int(round(T / dt))) * dt
    return A * np.exp(-sigma * t) * np.cos(wd * t + phi) + off


def test_c10_identification():
    t0 = time.perf_counter()
    A, sigma, wd, phi, off = 1.3, 1.2, 18.0, 0.4, 0.1
    clean = fit_damped_oscillation(decay(A, sigma, wd, phi, off), 1e-3)
    e_clean = max(abs(clean.sigma / sigma - 1), abs(clean.omega_d / wd - 1))
    es, ew = [], []
    for s in range(50):
        rng = np.random.default_rng(s)
        y = decay(A, sigma, wd, phi, off) + 0.05 * A * rng.standard_normal(3000)
        ft = fit_damped_oscillation(y, 1e-3)
        es.append(abs(ft.sigma / sigma - 1))
        ew.append(abs(ft.omega_d / wd - 1))
    wn_rear = math.hypot(wd, sigma)
    wn_front = wn_rear * math.sqrt(1 / 0.6)
    front = fit_damped_oscillation(decay(A, sigma, math.sqrt(wn_front**2 - sigma**2), phi, off), 1e-3)
    ratio = infer_mass_ratio(front, clean)
    ok = e_clean < 1e-3 and np.median(es) < 0.05 and np.median(ew) < 0.05 and abs(ratio - 0.6) <= 1e-3
    verdict(
        "C10 identification",
        bool(ok),
        f"noiseless error {e_clean:.1e}; 5% noise medians sigma {np.median(es):.2%}, omega {np.median(ew):.3%}; mass ratio {ratio:.5f}",
        time.perf_counter() - t0,
        60.0,
    )


def test_c11_dead_reckoning():
    t0 = time.perf_counter()
    ratios, bx, by = [], [], []
    for s in range(20):
        d = generate_gait_data(Scenario.realistic(s))
        end = d.truth.position[-1]
        ins = run_ins(d.imu, d.truth.state(0))
        out = kf_fuse(d.imu, d.gait, d.truth.state(0), OdometerModel())
        ratios.append(np.hypot(*(out["position"][-1] - end)) / np.hypot(*(ins["position"][-1] - end)))
        bx.append(out["accel_bias"][0])
        by.append(out["accel_bias"][1])
    planted = Scenario.realistic().accel_bias
    bias_err = max(abs(np.median(bx) / planted[0] - 1), abs(np.median(by) / planted[1] - 1))
    d = generate_gait_data(Scenario(hip_noise=0.01, seed=4))
    cm = correlation_matrix(build_indicator_table(d.gait, d.strides, ["hip_sum", "knee_amp_1", "duty_1"]))
    r = cm["hip_sum", "stride_length"]
    duration = d.truth.t[-1]
    ok = abs(duration - 60.0) < 3.0 and np.median(ratios) <= 0.2 and bias_err <= 0.10 and r > 0.9
    verdict(
        "C11 dead reckoning",
        bool(ok),
        f"{duration:.1f} s walk; median fused/INS error {np.median(ratios):.3f}; "
        f"accel bias ({np.median(bx):.4f}, {np.median(by):.4f}) vs {planted} ({bias_err:.1%}); r(hip_sum, stride) = {r:.3f}",
        time.perf_counter() - t0,
        120.0,
    )


def _artifacts(root: Path) -> dict:
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file():
            data = p.read_bytes()
            if p.name == "manifest.json":
                m = json.loads(data)
                m.pop("wall_time_s")
                data = json.dumps(m, sort_keys=True).encode()
            out[str(p.relative_to(root))] = data
    return out


def test_c12_reproducibility_and_convergence(tmp_path, capsys):
    t0 = time.perf_counter()
    runs = []
    for rep in ("a", "b"):
        for name in cli.EXPERIMENTS:
            assert cli.main([name, "--config", f"{name}.demo", "--out", str(tmp_path / rep)]) == 0
        runs.append(_artifacts(tmp_path / rep))
    differing = sorted(k for k in runs[0] if runs[0][k] != runs[1].get(k)) + sorted(set(runs[1]) - set(runs[0]))
    plant = HopperPlant()
    amps = [steady_amplitude(simulate_hopper(plant, 5.0, 8.0, dt), "y_body", 8, 5.0) for dt in (1e-3, 5e-4)]
    change = abs(amps[0] / amps[1] - 1)
    ok = not differing and change < 0.005
    with capsys.disabled():
        verdict(
            "C12 infrastructure",
            ok,
            f"{len(cli.EXPERIMENTS)} demos, {len(runs[0])} artifacts, differing: {differing or 'none'}; "
            f"dt-halving amplitude change {change:.3%}",
            time.perf_counter() - t0,
        )
