"""Experiment runner: ``morphotune <experiment> --config FILE [--out DIR] ...``.

A config is a YAML mapping with ``experiment``, optional ``seed`` and
``output``, and one block per parameter group. Every key must be known to
the experiment's schema; missing optional blocks take their defaults.
Artifacts land in ``<out>/<experiment>/`` together with ``manifest.json``.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import __version__, svg
from .analysis import (
    correlation_matrix,
    fit_damped_oscillation,
    frequency_sweep,
    hysteresis_width,
    infer_mass_ratio,
    resonance_map,
)
from .controllers import (
    HarmonicPlant,
    HopfParams,
    KuramotoCommunity,
    LeggedBody,
    TrackerParams,
    entrain,
    mean_order,
    quad_community_run,
    resonance_tracker,
)
from .modes import PlateModel, assemble, modal_response, normal_modes
from .nav import (
    FusionConfig,
    OdometerModel,
    Scenario,
    build_indicator_table,
    generate_gait_data,
    kf_fuse,
    run_ins,
)
from .plant import GroundModel, HopperPlant
from .springs import PneumaticSpringParams
from .vibrobot import VibrobotParams, simulate_vibrobot


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# schema


def _dc_defaults(cls, skip=()) -> dict:
    out = {}
    for f in fields(cls):
        if f.name in skip:
            continue
        v = getattr(cls(), f.name)
        out[f.name] = list(map(list, v)) if isinstance(v, tuple) and v and isinstance(v[0], tuple) else (
            list(v) if isinstance(v, tuple) else (v.value if hasattr(v, "value") else v)
        )
    return out


P0 = PneumaticSpringParams().P_v0

HOPPER = {
    "m_body": 0.45,
    "m_foot": 0.05,
    "m_drive": 0.05,
    "drive_amplitude": 0.01,
    "c_spring": 0.5,
    "leg_length": 0.1,
    "pressure": P0,
    "ground_stiffness": GroundModel().stiffness,
}

SCENARIO = _dc_defaults(Scenario)

EXPERIMENTS: dict[str, dict] = {
    "spring-curves": {
        "figure": "Fig. 6 analogue: pneumatic force vs compression for several dead volumes",
        "required": ["curves"],
        "blocks": {
            "spring": _dc_defaults(PneumaticSpringParams),
            "curves": {"dead_volumes": [0.0, 2.0e-6, 6.3e-6, 1.5e-5], "x_max": 0.01, "points": 41},
        },
    },
    "hopper-sweep": {
        "figure": "Fig. 8 analogue: up and down frequency sweeps with hysteresis",
        "required": ["sweep"],
        "blocks": {
            "hopper": dict(HOPPER),
            "sweep": {
                "f_min": 3.0,
                "f_max": 9.0,
                "step": 0.1,
                "dwell_cycles": 30,
                "measure_cycles": 10,
                "pressure_scales": [1.0, 1.2],
            },
        },
    },
    "resonance-map": {
        "figure": "Fig. 9 analogue: amplitude over frequency and pressure with ridge (Fig. 10 for ground)",
        "required": ["grid"],
        "blocks": {
            "hopper": dict(HOPPER),
            "grid": {
                "f_min": 3.5,
                "f_max": 7.5,
                "f_step": 0.05,
                "pressure_scales": [0.6, 0.8, 1.0, 1.2],
                "ground_stiffnesses": [5000.0, 3000.0, 2000.0, 1400.0, 1000.0, 700.0],
                "dwell_cycles": 40,
                "measure_cycles": 8,
            },
        },
    },
    "track": {
        "figure": "Fig. 10 strategy: leg tuning follows a ground-stiffness step at fixed drive",
        "required": ["tracker"],
        "blocks": {
            "hopper": {**HOPPER, "drive_amplitude": 0.002, "ground_stiffness": 2000.0, "pressure": 0.975 * P0},
            "tracker": {
                "frequency": 4.8,
                "epochs": 40,
                "epoch_cycles": 40,
                "measure_cycles": 8,
                "probe_fraction": 0.025,
                "bounds_fraction": [0.5, 1.5],
                "gain": 1.0,
                "deadband": 0.02,
                "step_epoch": 10,
                "ground_after": 3000.0,
            },
        },
    },
    "vibrobot": {
        "figure": "Fig. 11 analogue: vibration walker travel direction vs centre-of-mass offset",
        "required": ["vibrobot"],
        "blocks": {
            "vibrobot": {
                **{k: v for k, v in _dc_defaults(VibrobotParams).items() if k != "x_com"},
                "x_com_fractions": [-0.2, -0.1, 0.0, 0.1, 0.2],
                "duration": 6.0,
                "dt": 1.0 / 1800.0,
            }
        },
    },
    "entrain": {
        "figure": "Fig. 15 analogue: adaptive oscillator frequency converging to the plant",
        "required": ["hopf"],
        "blocks": {
            "plant": {"m": 1.0, "k": 100.0, "c": 0.0},
            "hopf": {k: v for k, v in _dc_defaults(HopfParams).items() if k != "omega_init"},
            "run": {"duration": 150.0, "dt": 2e-3, "z0": 1.0, "omega_inits": [6.0, 8.0, 10.0, 12.0, 15.0], "record_every": 50},
        },
    },
    "kuramoto": {
        "figure": "Fig. 16 analogue: order parameter vs coupling for a Lorentzian community",
        "required": ["kuramoto"],
        "blocks": {
            "kuramoto": {
                "n": 2000,
                "width": 0.5,
                "omega0": 1.0,
                "coupling_ratios": [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0],
                "seeds": 3,
                "duration": 40.0,
                "dt": 0.008,
                "average_from": 0.5,
            }
        },
    },
    "quad-communities": {
        "figure": "Fig. 17 analogue: four communities on a legged body, phase-locking map",
        "required": ["communities"],
        "blocks": {
            "communities": {
                "n": 50,
                "K": 2.0,
                "eta": 1.0,
                "width": 0.2,
                "frequencies_hz": [1.0, 1.05, 1.1, 1.15],
            },
            "body": {"m": 2.0, "a": 0.3, "b": 0.15, "k": 800.0, "leg_y": 0.1, "damping": 4.0, "hip_amplitude": 0.01, "knee_lever": 0.1},
            "run": {"duration": 60.0, "dt": 0.005, "record_every": 10},
        },
    },
    "modes": {
        "figure": "Fig. 18 analogue: heave, pitch and roll modes of a plate on four legs",
        "required": ["plate"],
        "blocks": {
            "plate": {"m": 2.0, "a": 0.3, "b": 0.15, "k": 800.0, "leg_x": None, "leg_y": 0.1},
            "forcing": {"mode": 0, "amplitude": 1.0, "zeta": 0.0, "duration": 5.0, "dt": 1e-3},
        },
    },
    "identify": {
        "figure": "Fig. 19 analogue: damped-oscillation fits and front/rear mass ratio",
        "required": ["identify"],
        "blocks": {
            "identify": {
                "A": 1.3,
                "sigma": 1.2,
                "omega_d": 18.0,
                "phase": 0.4,
                "offset": 0.1,
                "noise": 0.05,
                "seeds": 50,
                "duration": 3.0,
                "dt": 1e-3,
                "mass_ratio": 0.6,
            }
        },
    },
    "nav-sim": {
        "figure": "Fig. 20 analogue: synthetic IMU, gait and ground-truth streams",
        "required": ["scenario"],
        "blocks": {"scenario": dict(SCENARIO)},
    },
    "nav-fuse": {
        "figure": "Fig. 20(b) analogue: INS plus virtual odometer error-state fusion",
        "required": ["scenario"],
        "blocks": {
            "scenario": {**SCENARIO, "accel_noise": 0.05, "gyro_noise": 0.005, "accel_bias": [0.05, -0.02], "gyro_bias": 0.003},
            "odometer": _dc_defaults(OdometerModel),
            "fusion": _dc_defaults(FusionConfig),
            "monte_carlo": {"seeds": 20},
        },
    },
    "correlate": {
        "figure": "Fig. 21 analogue: correlation of gait indicators with stride length and heading change",
        "required": ["scenario"],
        "blocks": {
            "scenario": {**SCENARIO, "hip_noise": 0.01},
            "indicators": {"names": ["hip_amp_1", "hip_amp_2", "knee_amp_1", "hip_sum", "hip_diff", "duty_1", "impulse_1"]},
        },
    },
}

OUT_OF_SCOPE = "Out of scope: swimming robots and morphology co-evolution experiments have no runner here."

TOP_LEVEL = {"experiment", "seed", "output"}


def list_experiments() -> str:
    lines = [f"{name:<17} {spec['figure']}" for name, spec in EXPERIMENTS.items()]
    return "\n".join(lines + ["", OUT_OF_SCOPE]) + "\n"


def _coerce(key: str, default, value):
    if default is None or value is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false")
        return value
    if isinstance(default, (int, float)) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number")
        return type(default)(value) if isinstance(default, float) or float(value).is_integer() else value
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{key}: expected a list")
        return value
    return value


def resolve(raw: dict, experiment: str | None = None) -> dict:
    """Validate a raw config against its experiment schema and fill defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    name = raw.get("experiment", experiment)
    if experiment is not None and name != experiment:
        raise ConfigError(f"experiment: config names {name!r} but {experiment!r} was requested")
    if name not in EXPERIMENTS:
        raise ConfigError(f"experiment: unknown experiment {name!r}")
    spec = EXPERIMENTS[name]
    blocks = spec["blocks"]
    for key in raw:
        if key not in TOP_LEVEL and key not in blocks:
            raise ConfigError(f"{key}: unknown key")
    for b in spec["required"]:
        if b not in raw:
            raise ConfigError(f"{b}: missing required block")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed: expected a non-negative integer")
    out = {"experiment": name, "seed": seed, "output": str(raw.get("output", "out"))}
    for b, defaults in blocks.items():
        given = raw.get(b) or {}
        if not isinstance(given, dict):
            raise ConfigError(f"{b}: expected a block of key: value pairs")
        res = copy.deepcopy(defaults)
        for k, v in given.items():
            if k not in defaults:
                raise ConfigError(f"{b}.{k}: unknown key")
            res[k] = _coerce(f"{b}.{k}", defaults[k], v)
        out[b] = res
    return out


def apply_override(raw: dict, item: str) -> None:
    if "=" not in item:
        raise ConfigError(f"{item}: override must be key=value")
    key, text = item.split("=", 1)
    value = yaml.safe_load(text)
    parts = key.strip().split(".")
    node = raw
    for p in parts[:-1]:
        nxt = node.setdefault(p, {})
        if not isinstance(nxt, dict):
            raise ConfigError(f"{key}: not a block")
        node = nxt
    node[parts[-1]] = value


def load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        bundled = resources.files("morphotune") / "configs" / f"{path}.yaml"
        if bundled.is_file():
            return yaml.safe_load(bundled.read_text()) or {}
        raise ConfigError(f"config: file {path!r} not found")
    try:
        return yaml.safe_load(p.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: cannot parse ({exc})") from None


# ---------------------------------------------------------------------------
# artifacts


class Artifacts:
    def __init__(self):
        self.files: dict[str, str] = {}
        self.units: dict[str, dict] = {}

    def csv(self, name: str, columns: dict, units: dict | None = None) -> None:
        buf = io.StringIO()
        keys = list(columns)
        cols = [np.asarray(columns[k]) for k in keys]
        buf.write(",".join(keys) + "\n")
        for row in zip(*cols):
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        self.files[f"{name}.csv"] = buf.getvalue()
        self.units[f"{name}.csv"] = {k: (units or {}).get(k, "1") for k in keys}

    def json(self, name: str, obj) -> None:
        self.files[f"{name}.json"] = json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"

    def svg(self, name: str, text: str) -> None:
        self.files[f"{name}.svg"] = text


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, str):
        return v
    v = float(v)
    return "" if not math.isfinite(v) else format(v, ".10g")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# experiments


def _hopper(h: dict) -> HopperPlant:
    spring = PneumaticSpringParams().with_pressure(h["pressure"])
    return HopperPlant(
        spring=spring,
        m_body=h["m_body"],
        m_foot=h["m_foot"],
        m_drive=h["m_drive"],
        drive_amplitude=h["drive_amplitude"],
        c_spring=h["c_spring"],
        leg_length=h["leg_length"],
        ground=GroundModel().with_stiffness(h["ground_stiffness"]),
    )


def exp_spring_curves(cfg, art: Artifacts, jobs: int) -> None:
    base = PneumaticSpringParams(**cfg["spring"])
    c = cfg["curves"]
    x = np.linspace(0.0, c["x_max"], int(c["points"]))
    cols = {"x": x}
    summary = []
    for cv in c["dead_volumes"]:
        p = base.with_dead_volume(float(cv))
        F = np.array([p.force(float(v)) for v in x])
        curv = np.array([p.curvature(float(v)) for v in x])
        cols[f"F_Cv_{float(cv):.4g}"] = F
        summary.append(
            {"C_v": float(cv), "F0": float(F[0]), "curvature_min": float(curv.min()), "curvature_max": float(curv.max())}
        )
    art.csv("force", cols, {"x": "m", **{k: "N" for k in cols if k != "x"}})
    art.json("concavity", {"curves": summary})
    art.svg("force", svg.line_plot(x * 1e3, {k: v for k, v in cols.items() if k != "x"}, "Pneumatic spring force", "x (mm)", "F (N)"))


def exp_hopper_sweep(cfg, art: Artifacts, jobs: int) -> None:
    s = cfg["sweep"]
    base = _hopper(cfg["hopper"])
    widths = {}
    for scale in s["pressure_scales"]:
        plant = base.with_spring(base.spring.with_pressure(cfg["hopper"]["pressure"] * scale))
        args = ((s["f_min"], s["f_max"]), s["step"])
        kw = dict(dwell_cycles=s["dwell_cycles"], measure_cycles=s["measure_cycles"])
        up = frequency_sweep(plant, *args, "up", **kw)
        dn = frequency_sweep(plant, *args, "down", **kw)
        tag = f"{scale:g}"
        art.csv(
            f"sweep_P{tag}",
            {
                "f": up.frequencies,
                "amplitude_up": up.amplitudes,
                "amplitude_down": dn.amplitudes[::-1],
                "flight_up": up.flight,
                "flight_down": dn.flight[::-1],
            },
            {"f": "Hz", "amplitude_up": "m", "amplitude_down": "m"},
        )
        art.svg(
            f"sweep_P{tag}",
            svg.line_plot(up.frequencies, {"up": up.amplitudes, "down": dn.amplitudes[::-1]}, f"Sweep at {tag} x pressure", "f (Hz)", "amplitude (m)"),
        )
        widths[tag] = {
            "jump_up": up.jump_frequency,
            "jump_down": dn.jump_frequency,
            "width": hysteresis_width(up, dn),
        }
    art.json("hysteresis", widths)


def _ground_tuner(plant: HopperPlant, k_g: float) -> HopperPlant:
    return plant.with_ground(plant.ground.with_stiffness(k_g))


def exp_resonance_map(cfg, art: Artifacts, jobs: int) -> None:
    g = cfg["grid"]
    base = _hopper(cfg["hopper"])
    f = np.arange(g["f_min"], g["f_max"] + 0.5 * g["f_step"], g["f_step"])
    pressures = [cfg["hopper"]["pressure"] * s for s in g["pressure_scales"]]
    kw = dict(dwell_cycles=g["dwell_cycles"], measure_cycles=g["measure_cycles"], jobs=jobs)
    rm = resonance_map(base, f, pressures, **kw)
    art.files["map.csv"] = rm.to_csv()
    art.units["map.csv"] = {"f": "Hz", "P": "Pa", "amplitude": "m"}
    art.json("map", rm.to_dict())
    art.svg("map", svg.heat_map(f, np.array(pressures) / 1e5, rm.amplitudes, rm.ridge, "Amplitude map", "f (Hz)", "P (bar)"))
    if g["ground_stiffnesses"]:
        kg = [float(v) for v in g["ground_stiffnesses"]]
        gm = resonance_map(base, f, kg, tune=_ground_tuner, **kw)
        ff, kk = np.meshgrid(f, kg)
        art.csv("ground_map", {"f": ff.ravel(), "k_g": kk.ravel(), "amplitude": gm.amplitudes.ravel()}, {"f": "Hz", "k_g": "N/m", "amplitude": "m"})
        art.json("ground_map", {"frequencies": f, "ground_stiffness": kg, "amplitudes": gm.amplitudes, "ridge": gm.ridge, "failures": gm.failures})
        order = np.argsort(kg)
        art.svg("ground_map", svg.heat_map(f, np.array(kg)[order], gm.amplitudes[order], gm.ridge[order], "Amplitude vs ground stiffness", "f (Hz)", "k_g (N/m)"))


def exp_track(cfg, art: Artifacts, jobs: int) -> None:
    t = cfg["tracker"]
    plant = _hopper(cfg["hopper"])
    P = cfg["hopper"]["pressure"]
    P_nom = PneumaticSpringParams().P_v0
    lo, hi = (b * P_nom for b in t["bounds_fraction"])
    tp = TrackerParams(
        probe=t["probe_fraction"] * P_nom,
        bounds=(lo, hi),
        epoch_cycles=int(t["epoch_cycles"]),
        gain=t["gain"],
        deadband=t["deadband"],
        measure_cycles=int(t["measure_cycles"]),
    )
    run = resonance_tracker(plant, tp, {int(t["step_epoch"]): t["ground_after"]}, epochs=int(t["epochs"]), f=t["frequency"], u0=P)
    cols = run.columns()
    art.csv("trajectory", cols, {"tuning": "Pa", "amplitude": "m", "amplitude_plus": "m", "amplitude_minus": "m", "ground_stiffness": "N/m", "series_stiffness": "N/m", "leg_stiffness": "N/m"})
    art.json("events", {"frequency": run.frequency, "events": [{"epoch": e, "message": m} for e, m in run.events]})
    art.svg("trajectory", svg.line_plot(run.epochs, {"tuning / P0": run.tuning / P_nom, "amplitude / max": run.amplitude / run.amplitude.max()}, "Resonance tracking", "epoch", "normalized"))


def _vibro_cell(args):
    params, duration, dt = args
    return simulate_vibrobot(params, duration, dt)["mean_velocity"]


def exp_vibrobot(cfg, art: Artifacts, jobs: int) -> None:
    v = dict(cfg["vibrobot"])
    fr = v.pop("x_com_fractions")
    duration, dt = v.pop("duration"), v.pop("dt")
    base = VibrobotParams(**v)
    cells = [(replace(base, x_com=float(x) * base.foot_length), duration, dt) for x in fr]
    vel = _map(_vibro_cell, cells, jobs)
    art.csv("velocity", {"x_com_fraction": fr, "x_com": [c[0].x_com for c in cells], "mean_velocity": vel}, {"x_com": "m", "mean_velocity": "m/s"})
    art.svg("velocity", svg.line_plot(fr, {"mean velocity (mm/s)": np.array(vel) * 1e3}, "Walker velocity vs CoM offset", "x_com / foot length", "mm/s"))


def exp_entrain(cfg, art: Artifacts, jobs: int) -> None:
    pl = HarmonicPlant(**cfg["plant"])
    r = cfg["run"]
    cols = {}
    summary = []
    for w0 in r["omega_inits"]:
        hp = HopfParams(**cfg["hopf"], omega_init=float(w0))
        out = entrain(pl, hp, r["duration"], r["dt"], z0=r["z0"], record_every=int(r["record_every"]))
        if "t" not in cols:
            cols["t"] = out["t"]
        w = np.full(len(cols["t"]), math.nan)
        w[: len(out["omega"])] = out["omega"][: len(w)]
        cols[f"omega_init_{float(w0):g}"] = w
        summary.append(
            {
                "omega_init": float(w0),
                "omega_final": out["omega_final"],
                "converged": bool(out["converged"]),
                "diverged": bool(out["diverged"]),
                "convergence_time": out["convergence_time"],
            }
        )
    art.csv("omega", cols, {"t": "s", **{k: "rad/s" for k in cols if k != "t"}})
    art.json("summary", {"plant_omega0": pl.omega0, "runs": summary})
    art.svg("omega", svg.line_plot(cols["t"], {k: v for k, v in cols.items() if k != "t"}, "Oscillator frequency", "t (s)", "omega (rad/s)"))


def _kuramoto_cell(args):
    n, omega0, width, K, seed, duration, dt, avg = args
    c = KuramotoCommunity.create(n, omega0, width, K=K, seed=seed)
    return mean_order(c, duration, dt, average_from=avg)


def exp_kuramoto(cfg, art: Artifacts, jobs: int) -> None:
    k = cfg["kuramoto"]
    seeds = [cfg["seed"] + i for i in range(int(k["seeds"]))]
    cells = [
        (int(k["n"]), k["omega0"], k["width"], ratio * k["width"], s, k["duration"], k["dt"], k["average_from"])
        for ratio in k["coupling_ratios"]
        for s in seeds
    ]
    r = np.array(_map(_kuramoto_cell, cells, jobs)).reshape(len(k["coupling_ratios"]), len(seeds))
    cols = {"K_over_width": k["coupling_ratios"], "K": [x * k["width"] for x in k["coupling_ratios"]], "r_median": np.median(r, axis=1)}
    for j, s in enumerate(seeds):
        cols[f"r_seed_{s}"] = r[:, j]
    art.csv("order", cols, {"K": "rad/s"})
    art.json("order", {"critical_coupling": 2 * k["width"], "K": cols["K"], "r_median": cols["r_median"], "r": r})
    art.svg("order", svg.line_plot(k["coupling_ratios"], {"median r": cols["r_median"]}, "Order parameter vs coupling", "K / width", "r"))


def exp_quad(cfg, art: Artifacts, jobs: int) -> None:
    c = cfg["communities"]
    b = cfg["body"]
    r = cfg["run"]
    body = LeggedBody(
        PlateModel.rectangle(b["m"], b["a"], b["b"], b["k"], leg_y=b["leg_y"]),
        damping=b["damping"],
        hip_amplitude=b["hip_amplitude"],
        knee_lever=b["knee_lever"],
    )
    comms = [
        KuramotoCommunity.create(int(c["n"]), 2 * math.pi * fhz, c["width"], K=c["K"], eta=c["eta"], seed=cfg["seed"] + i)
        for i, fhz in enumerate(c["frequencies_hz"])
    ]
    out = quad_community_run(comms, body, r["duration"], r["dt"], record_every=int(r["record_every"]))
    legs = ["FL", "FR", "RL", "RR"]
    art.csv("phases", {"t": out["t"], **{f"Psi_{n}": out["phases"][:, i] for i, n in enumerate(legs)}}, {"t": "s", **{f"Psi_{n}": "rad" for n in legs}})
    art.json("plv", {"legs": legs, "plv": out["plv"]})
    art.svg("plv", svg.matrix_map(legs, out["plv"], "Phase-locking values"))


def exp_modes(cfg, art: Artifacts, jobs: int) -> None:
    p = cfg["plate"]
    plate = PlateModel.rectangle(p["m"], p["a"], p["b"], p["k"], leg_x=p["leg_x"], leg_y=p["leg_y"])
    M, K = assemble(plate)
    ms = normal_modes(M, K)
    art.json("modes", ms.to_dict())
    art.svg("modes", svg.mode_sketch(plate, ms, "Normal modes"))
    f = cfg["forcing"]
    j = int(f["mode"])
    if not 0 <= j < len(ms):
        raise ValueError(f"forcing.mode must be in 0..{len(ms) - 1}")
    shape = M @ ms[j].shape
    w = ms[j].omega
    out = modal_response(M, K, f["zeta"], lambda t: f["amplitude"] * math.sin(w * t) * shape, f["duration"], f["dt"])
    cols = {"t": out["t"], **{f"energy_{m.label.value}_{i}": out["energy"][:, i] for i, m in enumerate(ms)}}
    art.csv("modal_energy", cols, {"t": "s", **{k: "J" for k in cols if k != "t"}})


def _synth(cfg_i, omega_d, rng):
    t = np.arange(int(round(cfg_i["duration"] / cfg_i["dt"]))) * cfg_i["dt"]
    y = cfg_i["A"] * np.exp(-cfg_i["sigma"] * t) * np.cos(omega_d * t + cfg_i["phase"]) + cfg_i["offset"]
    if rng is not None:
        y = y + cfg_i["noise"] * cfg_i["A"] * rng.standard_normal(len(t))
    return y


def exp_identify(cfg, art: Artifacts, jobs: int) -> None:
    c = cfg["identify"]
    clean = fit_damped_oscillation(_synth(c, c["omega_d"], None), c["dt"])
    rows = []
    for s in range(int(c["seeds"])):
        rng = np.random.default_rng(cfg["seed"] + s)
        ft = fit_damped_oscillation(_synth(c, c["omega_d"], rng), c["dt"])
        rows.append((cfg["seed"] + s, ft.sigma, ft.omega_d))
    rows = np.array(rows)
    # the front leg carries mass_ratio times the rear mass on an equal spring
    wn = math.hypot(c["omega_d"], c["sigma"])
    w_front = wn * math.sqrt(1.0 / c["mass_ratio"])
    cf = dict(c, omega_d=math.sqrt(w_front**2 - c["sigma"] ** 2))
    fit_front = fit_damped_oscillation(_synth(cf, cf["omega_d"], None), c["dt"])
    ratio = infer_mass_ratio(fit_front, clean)
    art.csv("fits", {"seed": rows[:, 0], "sigma": rows[:, 1], "omega_d": rows[:, 2]}, {"sigma": "1/s", "omega_d": "rad/s"})
    art.json(
        "summary",
        {
            "noiseless": clean.to_dict(),
            "median_sigma": float(np.median(rows[:, 1])),
            "median_omega_d": float(np.median(rows[:, 2])),
            "median_sigma_error": float(np.median(np.abs(rows[:, 1] - c["sigma"]) / c["sigma"])),
            "median_omega_error": float(np.median(np.abs(rows[:, 2] - c["omega_d"]) / c["omega_d"])),
            "inferred_mass_ratio": ratio,
        },
    )


def _scenario(block: dict, seed: int) -> Scenario:
    b = dict(block)
    b["waypoints"] = tuple(tuple(map(float, p)) for p in b["waypoints"])
    b["accel_bias"] = tuple(map(float, b["accel_bias"]))
    b["leg_phases"] = tuple(map(float, b["leg_phases"]))
    b["seed"] = seed
    return Scenario(**b)


def exp_nav_sim(cfg, art: Artifacts, jobs: int) -> None:
    d = generate_gait_data(_scenario(cfg["scenario"], cfg["seed"] + cfg["scenario"]["seed"]))
    art.csv("imu", {"t": d.imu.t, "ax": d.imu.accel[:, 0], "ay": d.imu.accel[:, 1], "gz": d.imu.gyro}, {"t": "s", "ax": "m/s^2", "ay": "m/s^2", "gz": "rad/s"})
    g = d.gait
    gcols = {"t": g.t}
    for i in range(4):
        gcols[f"hip{i + 1}"] = g.hip[:, i]
    for i in range(4):
        gcols[f"knee{i + 1}"] = g.knee[:, i]
    for i in range(4):
        gcols[f"p{i + 1}"] = g.pressure[:, i]
    gcols["fmotor"] = g.fmotor
    art.csv("gait", gcols, {"t": "s", "fmotor": "Hz", **{k: "rad" for k in gcols if k[:3] in ("hip", "kne")}})
    tr = d.truth
    art.csv("truth", {"t": tr.t, "x": tr.position[:, 0], "y": tr.position[:, 1], "psi": tr.psi}, {"t": "s", "x": "m", "y": "m", "psi": "rad"})
    art.csv("strides", d.strides, {"t_start": "s", "t_end": "s", "stride_length": "m", "delta_heading": "rad", "hip_sum": "rad", "hip_diff": "rad"})
    art.svg("truth", svg.trajectory_plot({"truth": tr.position}, "Ground-truth path"))


def _fuse_cell(args):
    scenario, odo, fusion, keep_paths_seed = args
    d = generate_gait_data(scenario)
    init = d.truth.state(0)
    ins = run_ins(d.imu, init)
    out = kf_fuse(d.imu, d.gait, init, odo, fusion)
    end = d.truth.position[-1]
    return {
        "seed": scenario.seed,
        "ins_error": float(np.hypot(*(ins["position"][-1] - end))),
        "fused_error": float(np.hypot(*(out["position"][-1] - end))),
        "accel_bias": [float(v) for v in out["accel_bias"]],
        "gyro_bias": float(out["gyro_bias"]),
        "odometer_scale": float(out["odometer_scale"]),
        "skipped": len(out["skipped"]),
        "_paths": (d.truth.position, ins["position"], out["position"]) if scenario.seed == keep_paths_seed else None,
    }


def _odometer(b: dict) -> OdometerModel:
    return OdometerModel(**{k: tuple(v) if isinstance(v, list) else v for k, v in b.items()})


def exp_nav_fuse(cfg, art: Artifacts, jobs: int) -> None:
    base_seed = cfg["seed"] + cfg["scenario"]["seed"]
    odo = _odometer(cfg["odometer"])
    fb = dict(cfg["fusion"])
    fb["initial_sigma"] = tuple(fb["initial_sigma"])
    fusion = FusionConfig(**fb)
    cells = [
        (_scenario(cfg["scenario"], base_seed + i), odo, fusion, base_seed)
        for i in range(int(cfg["monte_carlo"]["seeds"]))
    ]
    rows = _map(_fuse_cell, cells, jobs)
    paths = rows[0].pop("_paths")
    for r in rows[1:]:
        r.pop("_paths")
    ratio = [r["fused_error"] / r["ins_error"] for r in rows]
    report = {
        "runs": rows,
        "median_ins_error": float(np.median([r["ins_error"] for r in rows])),
        "median_fused_error": float(np.median([r["fused_error"] for r in rows])),
        "median_ratio": float(np.median(ratio)),
        "planted_accel_bias": list(cfg["scenario"]["accel_bias"]),
        "planted_gyro_bias": cfg["scenario"]["gyro_bias"],
    }
    art.json("report", report)
    truth, ins, fused = paths
    art.csv(
        "trajectory",
        {"x_true": truth[:, 0], "y_true": truth[:, 1], "x_ins": ins[:, 0], "y_ins": ins[:, 1], "x_fused": fused[:, 0], "y_fused": fused[:, 1]},
        {k: "m" for k in ("x_true", "y_true", "x_ins", "y_ins", "x_fused", "y_fused")},
    )
    art.svg("trajectory", svg.trajectory_plot({"truth": truth, "fused": fused}, f"Dead reckoning, seed {base_seed}"))


def exp_correlate(cfg, art: Artifacts, jobs: int) -> None:
    d = generate_gait_data(_scenario(cfg["scenario"], cfg["seed"] + cfg["scenario"]["seed"]))
    names = list(cfg["indicators"]["names"])
    table = build_indicator_table(d.gait, d.strides, names)
    cm = correlation_matrix(table)
    art.csv("table", table, {"stride_length": "m", "delta_heading": "rad"})
    art.json("correlation", cm.to_dict())
    art.svg("correlation", svg.hinton(cm.labels, cm.r, "Indicator correlations"))


RUNNERS = {
    "spring-curves": exp_spring_curves,
    "hopper-sweep": exp_hopper_sweep,
    "resonance-map": exp_resonance_map,
    "track": exp_track,
    "vibrobot": exp_vibrobot,
    "entrain": exp_entrain,
    "kuramoto": exp_kuramoto,
    "quad-communities": exp_quad,
    "modes": exp_modes,
    "identify": exp_identify,
    "nav-sim": exp_nav_sim,
    "nav-fuse": exp_nav_fuse,
    "correlate": exp_correlate,
}


def _map(fn, cells, jobs: int):
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(jobs) as ex:
            return list(ex.map(fn, cells))
    return [fn(c) for c in cells]


# ---------------------------------------------------------------------------
# entry points


def run(cfg: dict, out_dir: str | Path, jobs: int = 1) -> Path:
    """Execute a resolved config and write its artifacts; returns the directory."""
    name = cfg["experiment"]
    target = Path(out_dir) / name
    t0 = time.perf_counter()
    art = Artifacts()
    RUNNERS[name](cfg, art, jobs)
    wall = time.perf_counter() - t0
    target.mkdir(parents=True, exist_ok=True)
    hashes = {}
    for fname in sorted(art.files):
        data = art.files[fname].encode()
        (target / fname).write_bytes(data)
        hashes[fname] = hashlib.sha256(data).hexdigest()
    manifest = {
        "experiment": name,
        "seed": cfg["seed"],
        "config": cfg,
        "version": __version__,
        "wall_time_s": round(wall, 3),
        "artifacts": hashes,
        "units": art.units,
    }
    (target / "manifest.json").write_text(json.dumps(_plain(manifest), indent=2, sort_keys=True) + "\n")
    return target


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="morphotune", description="Run morphological-computation experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list experiments and the figure each reproduces")
    for name in ["run", *EXPERIMENTS]:
        p = sub.add_parser(name, help="run the experiment named in the config" if name == "run" else EXPERIMENTS[name]["figure"])
        p.add_argument("--config", required=True, help="YAML file, or the name of a bundled demo such as spring-curves.demo")
        p.add_argument("--out", default=None, help="output directory (default: config 'output' or ./out)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list":
        sys.stdout.write(list_experiments())
        return 0
    try:
        raw = load_config(args.config)
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
        for item in args.override:
            apply_override(raw, item)
        if args.seed is not None:
            raw["seed"] = args.seed
        cfg = resolve(raw, None if args.command == "run" else args.command)
        if args.jobs < 1:
            raise ConfigError("jobs: must be at least 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = args.out if args.out is not None else cfg["output"]
    try:
        target = run(cfg, out, args.jobs)
    except Exception as exc:  # runtime failures map to exit code 1
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(target)
    return 0


if __name__ == "__main__":
    sys.exit(main())
