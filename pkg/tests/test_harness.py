import json
import subprocess
import sys
from pathlib import Path

import pytest

from pinchflow import cli
from pinchflow.cli import cmd_simulate, cmd_sweep, main, parse_grid
from pinchflow.config import (
    RunConfig,
    load_config,
    parse_config,
    serialize_config,
    shipped_config,
    shipped_names,
)
from pinchflow.errors import ConfigError
from pinchflow.store import write_run
from pinchflow.synthetic import ansatz_record

SMALL = {"solver.grid_size": 256}


def tree_bytes(root: Path) -> dict:
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


def write_conf(path: Path, **overrides) -> Path:
    cfg = RunConfig().replace(**{**SMALL, **overrides})
    path.write_text(serialize_config(cfg), encoding="utf-8")
    return path


@pytest.fixture(autouse=True)
def no_env_override(monkeypatch):
    monkeypatch.delenv("PINCHFLOW_OUT", raising=False)


class TestConfigText:
    @pytest.mark.parametrize("name", shipped_names())
    def test_shipped_round_trip(self, name):
        text = shipped_config(name).read_text(encoding="utf-8")
        assert serialize_config(parse_config(text)) == text

    def test_shipped_set(self):
        assert {"default", "cylinder", "tiny_domain"} <= set(shipped_names())

    def test_default_matches_dataclass(self):
        assert load_config(shipped_config("default")) == RunConfig()

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError) as exc:
            parse_config("geometry.m = 3\nfoo = 1\n")
        assert exc.value.field == "foo"
        assert "foo" in str(exc.value)
        assert (exc.value.line, exc.value.column) == (2, 1)

    def test_validation_names_field(self):
        with pytest.raises(ConfigError) as exc:
            parse_config("geometry.m = 0\n")
        assert exc.value.field == "geometry.m"

    def test_bad_value_location(self):
        with pytest.raises(ConfigError) as exc:
            parse_config("# header\n\nsolver.grid_size = lots\n")
        assert exc.value.line == 3
        assert exc.value.column == 20

    @pytest.mark.parametrize("text", ["geometry.m 3\n", "seed = 1\nseed = 2\n"])
    def test_malformed(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_float_repr_survives(self):
        cfg = RunConfig().replace(**{"initial.c2": 0.1 + 0.2})
        assert parse_config(serialize_config(cfg)).initial.c2 == 0.1 + 0.2


class TestExitCodes:
    def test_ok_analyze_verify_plot(self, tmp_path):
        conf = write_conf(tmp_path / "run.conf")
        out = tmp_path / "run"
        assert main(["simulate", "--config", str(conf), "--out", str(out)]) == 0
        assert main(["analyze", str(out)]) == 0
        assert main(["verify", str(out)]) == 0
        assert main(["plot", str(out)]) == 0
        assert len(list((out / "plots").glob("*.py"))) == 5
        assert (out / "reports" / "summary.txt").is_file()

    def test_config_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.conf"
        bad.write_text("foo = 1\n")
        assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
        assert "foo" in capsys.readouterr().err
        assert main(["simulate", "--config", str(tmp_path / "missing.conf"),
                     "--out", str(tmp_path / "x")]) == 2
        assert main(["verify", str(tmp_path), "--claims", "bogus"]) == 2

    def test_boundary_contaminated(self, tmp_path):
        conf = write_conf(tmp_path / "c.conf", **{"solver.domain_radius": 1.0})
        assert main(["simulate", "--config", str(conf), "--out", str(tmp_path / "r")]) == 3

    def test_gradient_blowup(self, tmp_path):
        conf = write_conf(tmp_path / "c.conf", **{"solver.gradient_abort": 0.2})
        assert main(["simulate", "--config", str(conf), "--out", str(tmp_path / "r")]) == 4

    def test_max_steps(self, tmp_path):
        conf = write_conf(tmp_path / "c.conf", **{"solver.max_steps": 50})
        out = tmp_path / "r"
        assert main(["simulate", "--config", str(conf), "--out", str(out)]) == 5
        assert json.loads((out / "manifest.json").read_text())["status"] == "max_steps"

    def test_claim_failure(self, tmp_path):
        # frozen ansatz: the final-profile ratio moves away from 1 as x shrinks
        out = tmp_path / "frozen"
        write_run(ansatz_record(frozen=True), RunConfig(), out)
        assert main(["verify", str(out), "--claims", "final_profile"]) == 6
        rep = json.loads((out / "reports" / "final_profile.json").read_text())
        assert rep["verdict"] == "fail"

    def test_cylinder_is_flagged_not_failed(self, tmp_path):
        out = tmp_path / "cyl"
        cfg = load_config(shipped_config("cylinder")).replace(**SMALL)
        assert cmd_simulate(cfg, out) == 0
        assert json.loads((out / "manifest.json").read_text())["degenerate"] is True
        assert main(["verify", str(out)]) == 0
        summary = (out / "reports" / "summary.txt").read_text()
        assert "degenerate-run" in summary

    def test_run_data_missing(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert main(["analyze", str(empty)]) == 7
        assert main(["verify", str(empty)]) == 7
        conf = write_conf(tmp_path / "c.conf")
        out = tmp_path / "r"
        assert main(["simulate", "--config", str(conf), "--out", str(out)]) == 0
        assert main(["plot", str(out)]) == 7

    def test_sweep_partial(self, tmp_path):
        conf = write_conf(tmp_path / "c.conf")
        code = main(["sweep", "--config", str(conf), "--out", str(tmp_path / "sw"),
                     "--grid", "solver.domain_radius=20,1"])
        assert code == 8
        cells = json.loads((tmp_path / "sw" / "sweep.json").read_text())["cells"]
        assert [c["exit_code"] for c in cells] == [0, 3]


class TestDeterminism:
    def test_byte_identical_reruns(self, tmp_path):
        cfg = RunConfig().replace(**SMALL)
        for name in ("a", "b"):
            out = tmp_path / name
            assert cmd_simulate(cfg, out) == 0
            assert main(["analyze", str(out)]) == 0
            assert main(["verify", str(out)]) == 0
        a, b = tree_bytes(tmp_path / "a"), tree_bytes(tmp_path / "b")
        assert a.keys() == b.keys()
        assert a == b

    def test_rerun_into_same_dir(self, tmp_path):
        cfg = RunConfig().replace(**SMALL)
        out = tmp_path / "r"
        cmd_simulate(cfg, out)
        first = tree_bytes(out)
        cmd_simulate(cfg, out)
        assert tree_bytes(out) == first

    def test_output_dir_not_in_identity(self, tmp_path):
        base = RunConfig().replace(**SMALL)
        cmd_simulate(base.replace(**{"output.dir": "x"}), tmp_path / "x")
        cmd_simulate(base.replace(**{"output.dir": "y"}), tmp_path / "y")
        assert tree_bytes(tmp_path / "x") == tree_bytes(tmp_path / "y")


class TestSweep:
    def test_single_cell_equals_simulate(self, tmp_path):
        base = RunConfig()
        assert cmd_sweep(base, parse_grid(["solver.grid_size=256"]), tmp_path / "sw") == 0
        assert cmd_simulate(base.replace(**SMALL), tmp_path / "direct") == 0
        assert tree_bytes(tmp_path / "sw" / "cell_0000") == tree_bytes(tmp_path / "direct")

    def test_parse_grid(self):
        grid = parse_grid(["initial.c2=0.05,0.08,0.05", "geometry.m=3"])
        assert grid == {"initial.c2": [0.05, 0.08], "geometry.m": [3]}
        for bad in ([], ["initial.c2="], ["output.dir=a,b"], ["nokey"], ["bogus.key=1"]):
            with pytest.raises(ConfigError):
                parse_grid(bad)

    def test_three_by_three(self, tmp_path):
        grid = parse_grid(["solver.grid_size=128,192,256", "initial.c2=0.06,0.08,0.1"])
        code = cmd_sweep(RunConfig(), grid, tmp_path / "sw", jobs=2)
        doc = json.loads((tmp_path / "sw" / "sweep.json").read_text())
        assert len(doc["cells"]) == 9
        assert [c["dir"] for c in doc["cells"]] == [f"cell_{i:04d}" for i in range(9)]
        assert doc["cells"][5]["params"] == {"solver.grid_size": 192, "initial.c2": 0.1}
        for cell in doc["cells"]:
            assert (tmp_path / "sw" / cell["dir"] / "manifest.json").is_file()
        codes = {c["exit_code"] for c in doc["cells"]}
        assert code == (0 if codes == {0} else 8)

    def test_parallel_matches_serial(self, tmp_path):
        grid = parse_grid(["initial.c2=0.07,0.09"])
        base = RunConfig().replace(**SMALL)
        cmd_sweep(base, grid, tmp_path / "s1", jobs=1)
        cmd_sweep(base, grid, tmp_path / "s2", jobs=2)
        one, two = tree_bytes(tmp_path / "s1"), tree_bytes(tmp_path / "s2")
        one.pop("sweep.json"), two.pop("sweep.json")
        assert one == two


class TestOutputs:
    def test_env_override(self, tmp_path, monkeypatch):
        conf = write_conf(tmp_path / "c.conf")
        monkeypatch.setenv("PINCHFLOW_OUT", str(tmp_path / "env"))
        assert main(["simulate", "--config", str(conf), "--out", str(tmp_path / "flag")]) == 0
        assert (tmp_path / "env" / "manifest.json").is_file()
        assert not (tmp_path / "flag").exists()

    def test_plot_scripts_relative(self, analyzed_dir, tmp_path):
        assert cli.cmd_plot(analyzed_dir) == 0
        scripts = sorted((analyzed_dir / "plots").glob("*.py"))
        assert [s.stem for s in scripts] == sorted(
            ["profile_evolution", "a_tau", "tau_b", "eta_norms", "final_ratio"])
        for s in scripts:
            assert str(analyzed_dir) not in s.read_text()
        # the scripts run from any working directory
        pytest.importorskip("matplotlib")
        res = subprocess.run([sys.executable, str(scripts[0])], cwd=tmp_path,
                             capture_output=True, text=True, timeout=120)
        assert res.returncode == 0, res.stderr

    def test_manifest_contents(self, analyzed_dir):
        man = json.loads((analyzed_dir / "manifest.json").read_text())
        assert man["status"] == "pinched"
        assert man["degenerate"] is False
        assert "output.dir" not in man["config"]
        assert len(man["snapshots"]) > 100
        assert (analyzed_dir / "series" / "fit_series.csv").is_file()
