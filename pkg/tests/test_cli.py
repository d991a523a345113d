import json

import numpy as np
import pytest

from isoproj.cli import main


@pytest.fixture
def data_csv(write_csv):
    gen = np.random.default_rng(1)
    xs = np.round(gen.uniform(size=300), 6)
    ys = np.round(xs + 0.5 * gen.normal(size=300), 6)
    return write_csv(zip(xs, ys), name="d.csv")


@pytest.fixture
def config(tmp_path):
    def _write(text):
        path = tmp_path / "sim.cfg"
        path.write_text(text, encoding="utf-8")
        return path

    return _write


class TestFit:
    def test_happy_path(self, data_csv, tmp_path):
        out = tmp_path / "r.json"
        code = main(["fit", "--data", str(data_csv), "--J", "auto", "--sigma", "plugin",
                     "--samples", "200", "--seed", "7", "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["schema"] == 1 and doc["seed"] == 7
        curves = doc["summary"]
        assert len(curves["x"]) == 101
        assert np.all(np.diff(curves["median"]) >= 0)
        assert "timing" not in doc

    def test_csv_and_figure(self, data_csv, tmp_path):
        csv_path = tmp_path / "curve.csv"
        code = main(["fit", "--data", str(data_csv), "--samples", "50", "--csv", str(csv_path),
                     "--out", str(tmp_path / "r.json"), "--grid-size", "11"])
        assert code == 0
        lines = csv_path.read_bytes().split(b"\r\n")
        assert lines[0] == b"x,mean,median,lo,hi"
        assert len([ln for ln in lines if ln]) == 12
        assert (tmp_path / "curve.png").read_bytes()[:4] == b"\x89PNG"

    @pytest.mark.parametrize("extra", [["--prior", "type2"], ["--prior", "type3", "--sigma", "ig"],
                                       ["--sigma", "grid", "--metric", "L1"], ["--sigma", "0.5", "--J", "4"]])
    def test_prior_options(self, data_csv, tmp_path, extra):
        out = tmp_path / "r.json"
        assert main(["fit", "--data", str(data_csv), "--samples", "30", "--out", str(out), *extra]) == 0
        assert json.loads(out.read_text())["summary"]

    def test_timing_opt_in(self, data_csv, tmp_path, capsys):
        assert main(["fit", "--data", str(data_csv), "--samples", "20", "--timing"]) == 0
        assert "timing" in json.loads(capsys.readouterr().out)

    def test_missing_data(self, tmp_path, capsys):
        assert main(["fit", "--data", str(tmp_path / "missing.csv")]) == 2
        assert "missing.csv" in capsys.readouterr().err

    def test_bad_data(self, write_csv, capsys):
        path = write_csv([(0.1, 1), (2.0, 1)], name="bad.csv")
        assert main(["fit", "--data", str(path)]) == 2
        assert "line 3" in capsys.readouterr().err

    @pytest.mark.parametrize("argv", [["fit"], ["fit", "--bogus"], ["nope"], []])
    def test_usage_errors(self, argv):
        assert main(argv) == 1

    def test_bad_sigma(self, data_csv, capsys):
        assert main(["fit", "--data", str(data_csv), "--sigma", "lots"]) == 1
        assert "sigma" in capsys.readouterr().err


class TestTestCommand:
    def test_adaptive_prints_report(self, data_csv, capsys):
        assert main(["test", "--data", str(data_csv), "--mode", "adaptive", "--gamma", "0.5", "--seed", "7",
                     "--samples", "100"]) == 0
        doc = json.loads(capsys.readouterr().out)
        for key in ("mode", "n", "gamma", "tau", "prob", "mc_se", "reject", "seed", "J_posterior"):
            assert key in doc
        assert doc["reject"] is False

    def test_fixed(self, data_csv, capsys):
        assert main(["test", "--data", str(data_csv), "--samples", "100"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["mode"] == "fixed" and doc["J"] == 7

    def test_calibrate(self, data_csv, capsys):
        assert main(["test", "--data", str(data_csv), "--mode", "adaptive", "--m0", "calibrate",
                     "--calibration-reps", "3", "--samples", "50"]) == 0
        assert json.loads(capsys.readouterr().out)["m0"] > 0

    def test_bad_gamma(self, data_csv):
        assert main(["test", "--data", str(data_csv), "--gamma", "1.5"]) == 1


class TestSimulate:
    def test_power_from_config(self, config, tmp_path):
        cfg = config("truth = linear; neglinear\nn_grid = 2000\nreps = 50\nsamples = 50\n# comment\n")
        out, csv_path = tmp_path / "p.json", tmp_path / "p.csv"
        assert main(["simulate", "--config", str(cfg), "--out", str(out), "--csv", str(csv_path)]) == 0
        rows = json.loads(out.read_text())["rows"]
        assert [r["truth"] for r in rows] == ["linear", "neglinear"]
        assert csv_path.read_text().startswith("truth,n,mode,rejection_rate,mc_se")
        assert (tmp_path / "p.png").exists()

    def test_flag_overrides_config(self, config, capsys):
        cfg = config("truth = linear\nn_grid = 300\nreps = 10\nsamples = 20\n")
        assert main(["simulate", "--config", str(cfg), "--reps", "50"]) == 0
        assert json.loads(capsys.readouterr().out)["config"]["reps"] == 50

    def test_separation(self, config, tmp_path):
        cfg = config("study = separation\nn_grid = 500\nreps = 5\nsamples = 50\nseparations = 0, 0.5\n")
        out = tmp_path / "s.json"
        assert main(["simulate", "--config", str(cfg), "--out", str(out), "--no-figure"]) == 0
        doc = json.loads(out.read_text())
        assert [r["separation"] for r in doc["rows"]] == [0, 0.5]
        assert doc["tau"] > 0

    @pytest.mark.parametrize("text,field", [("reps = many\n", "reps"), ("colour = red\n", "colour"),
                                            ("truth = wiggle\nreps = 50\n", "truth"),
                                            ("reps = 10\n", "reps"), ("study = both\nreps = 50\n", "study"),
                                            ("error_dist = cauchy\nreps = 50\n", "error_dist")])
    def test_config_errors_name_field(self, config, capsys, text, field):
        assert main(["simulate", "--config", str(config(text))]) == 1
        assert field in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "none.cfg")]) == 1

    def test_malformed_line(self, config, capsys):
        assert main(["simulate", "--config", str(config("just words\n"))]) == 1
        assert "key = value" in capsys.readouterr().err


class TestRates:
    def test_rates(self, config, tmp_path):
        cfg = config("n_grid = 100, 400, 1600\nreps = 3\ndraws = 30\n")
        out, csv_path = tmp_path / "r.json", tmp_path / "r.csv"
        assert main(["rates", "--config", str(cfg), "--out", str(out), "--csv", str(csv_path)]) == 0
        doc = json.loads(out.read_text())
        assert doc["slope"] < 0 and len(doc["rows"]) == 3
        assert csv_path.read_text().splitlines()[0] == "n,mean_J,median_error,q25,q75,median_draw_error"
        assert (tmp_path / "r.png").exists()

    def test_short_grid(self, config):
        assert main(["rates", "--config", str(config("n_grid = 100, 200, 400\nreps = 2\n"))]) == 1

    def test_bad_metric(self, config):
        assert main(["rates", "--config", str(config("n_grid = 100, 400, 1600\nmetric = sup\n"))]) == 1
