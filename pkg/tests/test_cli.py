import csv
import json
import shutil
import subprocess

import pytest

from steerlab import __version__
from steerlab.cli import EXIT_ARGS, EXIT_NUMERIC, main
from steerlab.tomo import COUNTS_COLUMNS


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def manifest(path):
    return json.loads(open(f"{path}.manifest.json").read())


class TestRegion:
    def test_steps_three(self, tmp_path):
        out = tmp_path / "region.csv"
        assert main(["region", "--steps", "3", "--out", str(out)]) == 0
        rows = read_csv(out)
        assert rows[0] == ["mu", "p_proj_boundary", "p_povm_boundary"]
        assert rows[1:] == [["0.5", "0", "0.666666666667"], ["0.75", "0.5", "0.833333333333"], ["1", "1", "1"]]
        assert b"\r\n" not in out.read_bytes()

    @pytest.mark.parametrize("point,label", [
        ("0.978,0.995", "ONE_WAY_POVM"),
        ("0.991,0.99", "ONE_WAY_PROJECTIVE"),
        ("1,0", "TWO_WAY"),
        ("0.4,0.1", "NO_PROJECTIVE_STEERING"),
    ])
    def test_point(self, point, label, capsys):
        assert main(["region", "--point", point]) == 0
        assert capsys.readouterr().out.strip() == label

    @pytest.mark.parametrize("argv", [
        ["region", "--mu-min", "0.2"],
        ["region", "--steps", "1"],
        ["region", "--point", "0.5"],
        ["region", "--point", "0.5,1.5"],
    ])
    def test_argument_errors(self, argv, capsys):
        assert main(argv) == EXIT_ARGS
        assert "error" in capsys.readouterr().err

    def test_parser_error_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["region", "--steps", "many"])
        assert exc.value.code == EXIT_ARGS


class TestBound:
    def test_table(self, tmp_path):
        out = tmp_path / "bound.csv"
        assert main(["bound", "--n", "16", "--eta-grid", "0.0625,0.17,1", "--out", str(out), "--seed", "3"]) == 0
        rows = read_csv(out)
        assert rows[0] == ["n", "eta", "c_n", "c_inf"]
        assert rows[1] == ["16", "0.0625", "1", "0.96875"]
        assert rows[2][2] == "0.928091604255"
        assert rows[3][2:] == ["0.511425551039", "0.5"]

    def test_range_grid(self, capsys):
        assert main(["bound", "--n", "6", "--eta-grid", "0.5:1:3"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 4 and lines[0] == "n,eta,c_n,c_inf"

    @pytest.mark.parametrize("argv", [
        ["bound", "--n", "12"], ["bound", "--eta-grid", "0,0.5"], ["bound", "--eta-grid", "a:b:c"],
    ])
    def test_errors(self, argv):
        assert main(argv) == EXIT_ARGS


class TestManifest:
    def test_contents(self, tmp_path):
        out = tmp_path / "r.csv"
        assert main(["region", "--steps", "4", "--out", str(out), "--seed", "99"]) == 0
        m = manifest(out)
        assert set(m) == {"subcommand", "parameters", "outputs", "seed", "version", "wall_clock_seconds"}
        assert m["subcommand"] == "region"
        assert m["seed"] == 99
        assert m["version"] == __version__
        assert m["outputs"] == [str(out)]
        assert m["parameters"]["steps"] == 4

    def test_entropy_seed_recorded(self, tmp_path):
        out = tmp_path / "r.csv"
        assert main(["region", "--steps", "2", "--out", str(out)]) == 0
        assert isinstance(manifest(out)["seed"], int)


class TestSimulate:
    def write_config(self, tmp_path, **kw):
        cfg = dict(mu=0.991, eta_detector=0.17, rounds=20_000, seed=4, **kw)
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        return path

    def test_record(self, tmp_path):
        cfg = self.write_config(tmp_path)
        out = tmp_path / "rec.json"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        rec = json.loads(out.read_text())
        assert rec["config"]["seed"] == 4
        assert 0 < rec["eta_observed"] < 1
        assert manifest(out)["seed"] == 4

    def test_deterministic(self, tmp_path):
        cfg = self.write_config(tmp_path)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        main(["simulate", "--config", str(cfg), "--out", str(a)])
        main(["simulate", "--config", str(cfg), "--out", str(b)])
        assert a.read_text() == b.read_text()

    def test_seed_flag_overrides(self, tmp_path):
        cfg = self.write_config(tmp_path)
        out = tmp_path / "rec.json"
        assert main(["simulate", "--config", str(cfg), "--seed", "17", "--out", str(out)]) == 0
        assert json.loads(out.read_text())["config"]["seed"] == 17

    def test_bad_config(self, tmp_path):
        cfg = self.write_config(tmp_path, colour="red")
        assert main(["simulate", "--config", str(cfg)]) == EXIT_ARGS
        assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == EXIT_ARGS


class TestCv:
    def test_sweep(self, tmp_path):
        out = tmp_path / "cv.csv"
        assert main(["cv", "--vsq", "2", "--t-grid", "0.5,1", "--n-trunc", "12", "--out", str(out)]) == 0
        rows = read_csv(out)
        assert rows[0] == ["T", "lhs", "rhs_ab", "rhs_ba", "reid_ab", "reid_ba"]
        assert len(rows) == 3
        assert float(rows[1][5]) == pytest.approx(1, abs=1e-11)

    def test_non_convergence(self, capsys):
        assert main(["cv", "--vsq", "10", "--t-grid", "0.8", "--n-trunc", "6"]) == EXIT_NUMERIC
        assert "numeric failure" in capsys.readouterr().err

    @pytest.mark.parametrize("argv", [["cv", "--vsq", "0.5"], ["cv", "--t-grid", "0,1.5"]])
    def test_errors(self, argv):
        assert main(argv) == EXIT_ARGS


class TestTomography:
    def test_sim_then_fit(self, tmp_path):
        counts = tmp_path / "counts.csv"
        assert main(["tomo-sim", "--mu", "0.7", "--shots", "100000", "--rotate", "--seed", "2",
                     "--out", str(counts)]) == 0
        assert read_csv(counts)[0] == list(COUNTS_COLUMNS)
        fit = tmp_path / "fit.json"
        assert main(["fit", "--counts", str(counts), "--restarts", "4", "--seed", "0", "--out", str(fit)]) == 0
        data = json.loads(fit.read_text())
        assert set(data) == {"mu", "unitary_re", "unitary_im", "fidelity", "cost"}
        assert data["mu"] == pytest.approx(0.7, abs=0.02)
        assert manifest(fit)["subcommand"] == "fit"

    def test_noiseless(self, tmp_path, capsys):
        counts = tmp_path / "counts.csv"
        assert main(["tomo-sim", "--mu", "0.3", "--noiseless", "--out", str(counts)]) == 0
        assert main(["fit", "--counts", str(counts), "--restarts", "2"]) == 0
        assert json.loads(capsys.readouterr().out)["mu"] == pytest.approx(0.3, abs=1e-6)

    def test_bad_counts(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("x,y\n1,2\n")
        assert main(["fit", "--counts", str(bad)]) == EXIT_ARGS

    def test_out_required(self):
        with pytest.raises(SystemExit):
            main(["tomo-sim", "--mu", "0.5"])


class TestCheck:
    def test_passes(self, capsys):
        assert main(["check"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out and out.count("PASS") >= 10


@pytest.mark.skipif(shutil.which("steerlab") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["steerlab", "region", "--point", "0.978,0.995"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.strip() == "ONE_WAY_POVM"
