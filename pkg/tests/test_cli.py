import json

import numpy as np
import pytest
import yaml

from ncvaic import cli
from ncvaic.aic import MonteCarlo, aic_value
from ncvaic.errors import ConfigError, DataParseError
from ncvaic.glm import GAUSSIAN, Dataset
from ncvaic.io import (dumps, fit_result_from_record, fit_result_record, read_csv, to_plain,
                       write_csv)
from ncvaic.penalties import PenaltySpec
from ncvaic.solver import FitOptions, fit


def write_config(tmp_path, name="run.yaml", **cfg):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return p


def run_cli(argv):
    status = cli.main([str(a) for a in argv])
    return status


@pytest.fixture
def small_csv(tmp_path):
    p = tmp_path / "tiny.csv"
    p.write_text("y,x1,x2\n1.0,1.0,0.5\n2.0,0.2,-1.0\n0.5,-0.7,0.3\n")
    return p


class TestFit:
    def test_normal_equations(self, tmp_path, small_csv):
        cfg = write_config(tmp_path, command="fit", data="tiny.csv", family="gaussian",
                           penalty="scad", gamma0=1.5, **{"lambda": 0.0})
        out = tmp_path / "fit.json"
        assert run_cli(["--config", cfg, "--out", out]) == 0
        rec = json.loads(out.read_text())
        X = np.array([[1.0, 0.5], [0.2, -1.0], [-0.7, 0.3]])
        y = np.array([1.0, 2.0, 0.5])
        expected = np.linalg.solve(X.T @ X, X.T @ y)
        got = np.array(rec["fit"]["beta_hat"])
        assert [f"{v:.6g}" for v in got] == [f"{v:.6g}" for v in expected]
        assert rec["schema"] == "ncvaic.report/1" and rec["command"] == "fit"

    def test_lambda_override(self, tmp_path, small_csv):
        cfg = write_config(tmp_path, command="fit", data="tiny.csv", penalty="lasso", gamma0=1.0,
                           **{"lambda": 0.0})
        out = tmp_path / "fit.json"
        assert run_cli(["--config", cfg, "--lambda", "100", "--out", out]) == 0
        rec = json.loads(out.read_text())
        assert rec["fit"]["active"] == [] and rec["penalty"]["lambda"] == 100.0

    def test_rerun_byte_identical(self, tmp_path, small_csv):
        cfg = write_config(tmp_path, command="fit", data="tiny.csv", penalty="mcp", gamma0=1.0,
                           **{"lambda": 0.3})
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert run_cli(["--config", cfg, "--out", a, "--seed", "4"]) == 0
        assert run_cli(["--config", cfg, "--out", b, "--seed", "4"]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestPath:
    def test_single_lambda_matches_composition(self, tmp_path, rng):
        X = rng.uniform(-1, 1, size=(60, 3))
        data = Dataset(X @ np.array([1.0, 0.0, -0.5]) + rng.standard_normal(60), X)
        write_csv(tmp_path / "d.csv", data)
        cfg = write_config(tmp_path, command="path", data="d.csv", penalty="scad", gamma0=1.0,
                           grid=[0.8], mc={"draws": 500, "seed": 3})
        out = tmp_path / "path.json"
        assert run_cli(["--config", cfg, "--out", out]) == 0
        rec = json.loads(out.read_text())
        spec = PenaltySpec("scad", 0.8, 1.0, n=60)
        data2, _ = read_csv(tmp_path / "d.csv")
        manual = aic_value(fit(data2, GAUSSIAN, spec, FitOptions()), data2, GAUSSIAN, spec,
                           MonteCarlo(draws=500, seed=3))
        assert rec["path"][0] == json.loads(dumps(manual))
        assert rec["selected_lambda"] == 0.8

    def test_grid_mapping(self, tmp_path):
        assert cli._grid({"min": 0.1, "max": 10, "num": 3}) == pytest.approx([0.1, 1.0, 10.0])
        with pytest.raises(ConfigError):
            cli._grid({"min": 0.1})


class TestSimulationCommands:
    def test_verify_bias_row(self, tmp_path):
        cfg = write_config(tmp_path, command="verify-bias", penalty="scad", gamma0=1.5,
                           design={"beta_star": [3, 1.5, 0, 0, 2, 0, 0, 0], "n": 200},
                           options={"restarts": 2}, verify={"reps": 200, "seed": 1},
                           **{"lambda": 1.0})
        out = tmp_path / "vb.json"
        assert run_cli(["--config", cfg, "--out", out]) == 0
        row = json.loads(out.read_text())["table"][0]
        for key in ("oracle_mean", "oracle_se", "mean_active", "pass", "combined_se"):
            assert key in row
        assert row["reps"] == 200 and isinstance(row["pass"], bool)
        assert row["pass"] == (abs(row["oracle_mean"] - row["correction_mean"])
                               <= 2 * row["combined_se"])

    def test_simulate_parallel_identical(self, tmp_path):
        base = dict(command="simulate", penalty="scad", gamma0=1.5, options={"restarts": 2},
                    design={"beta_star": [1.0, 0.0, 0.5], "n": 100},
                    simulate={"n_values": [50, 100], "reps": 100, "seed": 2},
                    **{"lambda": 1.0})
        a = write_config(tmp_path, "a.yaml", workers=1, **base)
        b = write_config(tmp_path, "b.yaml", workers=2, **base)
        oa, ob = tmp_path / "a.json", tmp_path / "b.json"
        assert run_cli(["--config", a, "--out", oa]) == 0
        assert run_cli(["--config", b, "--out", ob]) == 0
        assert oa.read_bytes() == ob.read_bytes()
        rec = json.loads(oa.read_text())
        assert [r["n"] for r in rec["rates"]] == [50, 100]

    def test_reps_override(self, tmp_path):
        cfg = write_config(tmp_path, command="simulate", penalty="scad", gamma0=1.5,
                           design={"beta_star": [1.0, 0.0], "n": 60},
                           simulate={"reps": 500}, **{"lambda": 1.0})
        c = cli.load_config(cfg, overrides={"reps": 100, "seed": 7})
        assert c.simulate == {"reps": 100, "seed": 7}
        assert c.options.seed == 7 and c.mc.seed == 7


class TestErrors:
    def test_ragged_row(self, tmp_path):
        (tmp_path / "bad.csv").write_text("y,x1\n1,2\n3\n")
        with pytest.raises(DataParseError) as ei:
            read_csv(tmp_path / "bad.csv")
        assert ei.value.row == 3

    def test_non_numeric(self, tmp_path):
        (tmp_path / "bad.csv").write_text("y,x1,x2\n1,2,3\n4,oops,6\n")
        with pytest.raises(DataParseError) as ei:
            read_csv(tmp_path / "bad.csv")
        assert (ei.value.row, ei.value.column) == (3, "x1")

    def test_header(self, tmp_path):
        (tmp_path / "bad.csv").write_text("y,x1,x3\n1,2,3\n")
        with pytest.raises(DataParseError):
            read_csv(tmp_path / "bad.csv")
        (tmp_path / "bad2.csv").write_text("x1,x2\n1,2\n")
        with pytest.raises(DataParseError):
            read_csv(tmp_path / "bad2.csv")

    def test_error_record(self, tmp_path, capsys):
        (tmp_path / "bad.csv").write_text("y,x1\n1,2\nz,3\n")
        cfg = write_config(tmp_path, command="fit", data="bad.csv", **{"lambda": 1.0})
        out = tmp_path / "err.json"
        status = run_cli(["--config", cfg, "--out", out])
        assert status != 0
        err = json.loads(out.read_text())["error"]
        assert err["code"] == "parse_error" and err["row"] == 3 and err["column"] == "y"
        assert json.loads(capsys.readouterr().err)["error"]["type"] == "DataParseError"

    def test_unsupported_regime_verbatim(self, tmp_path, capsys, small_csv):
        cfg = write_config(tmp_path, command="path", data="tiny.csv", penalty="lasso",
                           gamma0=1.5, grid=[1.0])
        assert run_cli(["--config", cfg]) == 3
        err = json.loads(capsys.readouterr().err)["error"]
        assert err["type"] == "UnsupportedRegimeError" and "P4" in err["message"]

    @pytest.mark.parametrize("cfg", [
        {"command": "fit", "lambda": 1.0},
        {"command": "fit", "data": "x.csv", "lambda": 1.0, "design": {"beta_star": [1], "n": 5}},
        {"command": "verify-bias", "lambda": 1.0},
        {"command": "fit", "data": "x.csv", "lambda": 1.0, "gamma0": 2.5},
        {"command": "fit", "data": "x.csv", "lambda": 1.0, "bogus": 1},
        {"command": "fit", "data": "x.csv", "lambda": 1.0, "options": {"tol": -1}},
        {"command": "nope"},
    ])
    def test_config_validation(self, tmp_path, cfg):
        with pytest.raises(ConfigError):
            cli.load_config(write_config(tmp_path, **cfg))

    def test_config_exit_status(self, tmp_path, capsys):
        cfg = write_config(tmp_path, command="fit", **{"lambda": 1.0})
        assert run_cli(["--config", cfg]) == 2


class TestRoundTrip:
    def test_beta_bit_exact(self, rng, tmp_path):
        data = Dataset(rng.standard_normal(40), rng.uniform(-1, 1, size=(40, 4)))
        res = fit(data, GAUSSIAN, PenaltySpec("scad", 0.2, 1.5))
        text = dumps(fit_result_record(res))
        back = fit_result_from_record(json.loads(text))
        assert back.beta_hat.tobytes() == res.beta_hat.tobytes()
        assert back.objective == res.objective

    def test_awkward_floats(self):
        vals = np.array([0.1, 1 / 3, np.nextafter(1.0, 2.0), 5e-324, -1.7976931348623157e308])
        assert np.array(json.loads(dumps(vals))).tobytes() == vals.tobytes()

    def test_csv_round_trip(self, rng, tmp_path):
        data = Dataset(rng.standard_normal(10), rng.standard_normal((10, 3)))
        write_csv(tmp_path / "d.csv", data)
        back, names = read_csv(tmp_path / "d.csv")
        assert names == ["x1", "x2", "x3"]
        assert back.X.tobytes() == data.X.tobytes() and back.y.tobytes() == data.y.tobytes()

    def test_non_finite_to_null(self):
        assert to_plain({"a": np.nan, "b": np.float32(2.5), "c": (np.int64(3),)}) == {
            "a": None, "b": 2.5, "c": [3]}
