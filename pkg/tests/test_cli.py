import csv
import json
import math
from pathlib import Path

import pytest

import oracles
from morphotune import cli
from morphotune.cli import EXPERIMENTS, ConfigError, list_experiments, main, resolve

GOLDEN = Path(__file__).parent / "golden" / "spring-curves" / "force.csv"


def write_cfg(tmp_path, text):
    p = tmp_path / "cfg.yaml"
    p.write_text(text)
    return str(p)


def snapshot(root: Path) -> dict:
    return {p: p.stat().st_mtime_ns for p in root.rglob("*")}


class TestList:
    def test_lists_every_experiment_with_figure(self, capsys):
        assert main(["list"]) == 0
        out = capsys.readouterr().out
        lines = [ln for ln in out.splitlines() if ln.strip()]
        names = [ln.split()[0] for ln in lines[: len(EXPERIMENTS)]]
        assert names == list(EXPERIMENTS)
        assert len(names) == 13
        assert all("Fig." in ln for ln in lines[: len(EXPERIMENTS)])
        assert "swimming" in out and "co-evolution" in out

    def test_stable(self):
        assert list_experiments() == list_experiments()

    def test_every_experiment_has_runner_and_demo(self):
        bundled = Path(cli.__file__).parent / "configs"
        for name in EXPERIMENTS:
            assert name in cli.RUNNERS
            assert (bundled / f"{name}.demo.yaml").is_file()
            resolve(cli.load_config(f"{name}.demo"))


class TestConfigErrors:
    @pytest.mark.parametrize(
        "text, needle",
        [
            ("experiment: spring-curves\ncurves: {x_max: 0.01}\nbogus: 1\n", "bogus"),
            ("experiment: spring-curves\ncurves: {x_maxx: 0.01}\n", "curves.x_maxx"),
            ("experiment: spring-curves\n", "curves"),
            ("experiment: spring-curves\ncurves: {points: fast}\n", "curves.points"),
            ("experiment: warp-drive\n", "experiment"),
            ("experiment: spring-curves\nseed: -1\ncurves: {}\n", "seed"),
        ],
    )
    def test_exit_2_names_the_key(self, tmp_path, capsys, text, needle):
        assert main(["run", "--config", write_cfg(tmp_path, text), "--out", str(tmp_path / "o")]) == 2
        err = capsys.readouterr().err
        assert needle in err
        assert not (tmp_path / "o").exists()

    def test_missing_file(self, tmp_path, capsys):
        assert main(["run", "--config", str(tmp_path / "nope.yaml")]) == 2

    def test_subcommand_must_match_config(self, capsys):
        assert main(["modes", "--config", "spring-curves.demo"]) == 2

    def test_override_syntax(self):
        with pytest.raises(ConfigError):
            cli.apply_override({}, "no_equals")

    def test_runtime_failure_exits_1(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "experiment: spring-curves\ncurves: {x_max: 0.5}\n")
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
        assert "runtime error" in capsys.readouterr().err


class TestRun:
    def test_spring_curves_golden(self, tmp_path, capsys):
        assert main(["spring-curves", "--config", "spring-curves.demo", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "spring-curves" / "force.csv").read_bytes() == GOLDEN.read_bytes()

    def test_golden_matches_high_precision_law(self):
        with open(GOLDEN, newline="") as fh:
            rows = list(csv.reader(fh))
        head = rows[0]
        assert head[0] == "x"
        for row in rows[1:]:
            x = float(row[0])
            for name, val in zip(head[1:], row[1:]):
                cv = float(name.removeprefix("F_Cv_"))
                ref = float(oracles.pneumatic_mp(x, cv))
                assert float(val) == pytest.approx(ref, rel=1e-9, abs=1e-12)

    def test_deterministic_and_contained(self, tmp_path, capsys):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        before = snapshot(tmp_path)
        for out in (out_a, out_b):
            assert main(["modes", "--config", "modes.demo", "--out", str(out)]) == 0
        created = set(snapshot(tmp_path)) - set(before)
        assert all(out_a in p.parents or out_b in p.parents or p in (out_a, out_b) for p in created)
        files_a = sorted(p.name for p in (out_a / "modes").iterdir())
        files_b = sorted(p.name for p in (out_b / "modes").iterdir())
        assert files_a == files_b
        for name in files_a:
            a = (out_a / "modes" / name).read_bytes()
            b = (out_b / "modes" / name).read_bytes()
            if name == "manifest.json":
                ja, jb = json.loads(a), json.loads(b)
                ja.pop("wall_time_s"), jb.pop("wall_time_s")
                assert ja == jb
            else:
                assert a == b, name

    def test_manifest_records_units_and_hashes(self, tmp_path, capsys):
        assert main(["spring-curves", "--config", "spring-curves.demo", "--out", str(tmp_path)]) == 0
        m = json.loads((tmp_path / "spring-curves" / "manifest.json").read_text())
        assert m["experiment"] == "spring-curves" and m["seed"] == 0
        assert m["units"]["force.csv"]["x"] == "m"
        assert set(m["units"]["force.csv"].values()) == {"m", "N"}
        assert set(m["artifacts"]) == {"force.csv", "force.svg", "concavity.json"}
        header = (tmp_path / "spring-curves" / "force.csv").read_text().splitlines()[0].split(",")
        assert set(header) == set(m["units"]["force.csv"])

    def test_override_and_seed(self, tmp_path, capsys):
        args = ["spring-curves", "--config", "spring-curves.demo", "--out", str(tmp_path), "--seed", "7"]
        assert main(args + ["--override", "curves.points=5"]) == 0
        m = json.loads((tmp_path / "spring-curves" / "manifest.json").read_text())
        assert m["seed"] == 7
        assert m["config"]["curves"]["points"] == 5
        assert len((tmp_path / "spring-curves" / "force.csv").read_text().splitlines()) == 6

    def test_csv_blank_for_nonfinite(self):
        assert cli._fmt(math.nan) == ""
        assert cli._fmt(True) == "1"


def test_console_entry_point_declared():
    text = (Path(__file__).parents[1] / "pyproject.toml").read_text()
    assert 'morphotune = "morphotune.cli:main"' in text
