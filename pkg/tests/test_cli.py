import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from fpclasso.cli import (
    EXIT_ABOVE_MAX,
    EXIT_DEGENERATE,
    EXIT_INPUT,
    EXIT_OK,
    main,
)
from fpclasso.fpc import FpcTarget, solve_fpc
from fpclasso.glm import Dataset
from fpclasso.preprocess import PreprocessRecord
from fpclasso.schemas import DiagnoseReport, FitReport, QqReport

CONFIGS = Path(__file__).resolve().parents[1] / "src" / "fpclasso" / "configs"


def _table(n=80, p=12, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    X[:, 1] = rng.exponential(size=n)
    y = X[:, 0] - 0.8 * X[:, 2] + rng.standard_normal(n)
    df = pd.DataFrame(X, columns=[f"x{j}" for j in range(p)])
    df["y"] = y
    return df


@pytest.fixture
def csv(tmp_path):
    path = tmp_path / "data.csv"
    _table().to_csv(path, index=False)
    return path


def _run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


class TestFit:
    def test_report(self, csv, capsys):
        code, out, _ = _run(["fit", "--input", csv, "--family", "gaussian", "--response", "y", "--expected-fp", 1], capsys)
        assert code == EXIT_OK
        rep = FitReport.model_validate_json(out)
        assert rep.status == "ok"
        assert rep.p == 12 and rep.n == 80
        assert rep.solution.fp_bound == pytest.approx(1.0, abs=1e-3)
        assert {a.name for a in rep.solution.active} >= {"x0", "x2"}
        assert rep.regularity.monotone
        assert rep.timing_seconds is None
        assert json.loads(rep.model_dump_json()) == json.loads(out)

    def test_original_scale_predictions(self, csv, capsys):
        _, out, _ = _run(["fit", "--input", csv, "--family", "gaussian", "--response", "y", "--expected-fp", 2], capsys)
        rep = FitReport.model_validate_json(out)
        record = PreprocessRecord.from_dict({"columns": [c.model_dump() for c in rep.preprocessing]})
        full = np.zeros(rep.p)
        for a in rep.solution.active:
            full[a.index] = a.coefficient
        df = _table()
        X = df.drop(columns="y").to_numpy()
        ours = record.linear_predictor(X, rep.solution.intercept, full)
        sol = solve_fpc(Dataset(X, df["y"].to_numpy()), "gaussian", FpcTarget(expected_fp=2))
        ref = sol.coef.intercept + sol.data.X @ sol.coef.beta
        np.testing.assert_allclose(ours, ref, atol=1e-8)

    def test_skew_recorded(self, csv, capsys):
        _, out, _ = _run(["fit", "--input", csv, "--family", "gaussian", "--response", "y", "--expected-fp", 1], capsys)
        cols = {c.name: c for c in FitReport.model_validate_json(out).preprocessing}
        assert cols["x1"].transform_applied
        assert abs(cols["x1"].skew_after) < abs(cols["x1"].skew_before)

    def test_timing_opt_in(self, csv, capsys):
        _, out, _ = _run(["fit", "--input", csv, "--family", "gaussian", "--response", "y", "--expected-fp", 1, "--timing"], capsys)
        assert FitReport.model_validate_json(out).timing_seconds > 0

    def test_output_file(self, csv, tmp_path, capsys):
        dest = tmp_path / "out" / "fit.json"
        code, out, _ = _run(["--output", dest, "fit", "--input", csv, "--family", "gaussian", "--response", "y", "--expected-fp", 1], capsys)
        assert code == EXIT_OK and out == ""
        assert FitReport.model_validate_json(dest.read_text()).status == "ok"

    @pytest.mark.parametrize("fp", [0, 24, 30])
    def test_target_out_of_range(self, csv, fp, capsys):
        code, _, err = _run(["fit", "--input", csv, "--family", "gaussian", "--response", "y", "--expected-fp", fp], capsys)
        assert code == EXIT_INPUT
        assert "OutOfRange" in err

    def test_above_max(self, csv, capsys):
        code, out, _ = _run(["fit", "--input", csv, "--family", "gaussian", "--response", "y", "--lambda-fpc", 50], capsys)
        assert code == EXIT_ABOVE_MAX
        rep = FitReport.model_validate_json(out)
        assert rep.status == "target_above_max"
        assert rep.solution.active == []

    @pytest.mark.parametrize("extra", [
        [],
        ["--expected-fp", 1, "--lambda-fpc", 2],
    ])
    def test_target_required_once(self, csv, extra, capsys):
        code, _, _ = _run(["fit", "--input", csv, "--family", "gaussian", "--response", "y", *extra], capsys)
        assert code == EXIT_INPUT

    def test_missing_column(self, csv, capsys):
        code, _, err = _run(["fit", "--input", csv, "--family", "gaussian", "--response", "nope", "--expected-fp", 1], capsys)
        assert code == EXIT_INPUT and "nope" in err

    def test_constant_response(self, tmp_path, capsys):
        df = _table()
        df["y"] = 3.0
        path = tmp_path / "flat.csv"
        df.to_csv(path, index=False)
        code, _, _ = _run(["fit", "--input", path, "--family", "gaussian", "--response", "y", "--expected-fp", 1], capsys)
        assert code == EXIT_DEGENERATE

    def test_logistic_domain(self, csv, capsys):
        code, _, _ = _run(["fit", "--input", csv, "--family", "logistic", "--response", "y", "--expected-fp", 1], capsys)
        assert code == EXIT_INPUT

    def test_cox(self, tmp_path, capsys):
        df = _table(seed=3)
        rng = np.random.default_rng(3)
        df["time"] = rng.exponential(np.exp(-df["x0"].to_numpy()))
        df["status"] = (rng.random(len(df)) < 0.75).astype(int)
        path = tmp_path / "surv.csv"
        df.drop(columns="y").to_csv(path, index=False)
        code, out, _ = _run(
            ["fit", "--input", path, "--family", "cox", "--time-col", "time", "--event-col", "status", "--expected-fp", 2],
            capsys,
        )
        assert code == EXIT_OK
        rep = FitReport.model_validate_json(out)
        assert rep.solution.intercept == 0.0
        assert rep.p == 12

    def test_bad_seed(self, csv, capsys):
        code, _, _ = _run(["--seed", -1, "fit", "--input", csv, "--family", "gaussian", "--response", "y", "--expected-fp", 1], capsys)
        assert code == EXIT_INPUT


class TestDiagnose:
    def test_table(self, csv, capsys):
        code, out, _ = _run(["diagnose", "--input", csv, "--family", "gaussian", "--response", "y", "--n-lambda", 30], capsys)
        assert code == EXIT_OK
        rep = DiagnoseReport.model_validate_json(out)
        assert len(rep.table) == 30
        assert rep.table[0].n_active == 0

    def test_single_column(self, tmp_path, capsys):
        df = _table()[["x0", "y"]]
        path = tmp_path / "one.csv"
        df.to_csv(path, index=False)
        code, out, _ = _run(["diagnose", "--input", path, "--family", "gaussian", "--response", "y"], capsys)
        assert code == EXIT_OK
        assert len(DiagnoseReport.model_validate_json(out).table) >= 2

    def test_lambda_min_range(self, csv, capsys):
        code, _, _ = _run(["diagnose", "--input", csv, "--family", "gaussian", "--response", "y", "--lambda-min", 1e6], capsys)
        assert code == EXIT_INPUT


class TestQq:
    def test_report(self, capsys):
        code, out, _ = _run(["--seed", 3, "qq", "--b-dist", "exponential_log", "--m", 10, "--mc-reps", 1000], capsys)
        assert code == EXIT_OK
        rep = QqReport.model_validate_json(out)
        assert len(rep.quantiles) == 10
        assert rep.seed == 3

    def test_unknown_distribution(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["qq", "--b-dist", "cauchy"])
        assert info.value.code == EXIT_INPUT


def _campaign(tmp_path, body):
    path = tmp_path / "c.toml"
    path.write_text(body)
    return path


SMALL = """
experiment = "fp"
replicates = 3
targets = [1, 3]
[design]
n = 50
p = [30]
[path]
n_lambda = 20
"""


class TestSimulate:
    def test_outputs(self, tmp_path, capsys):
        out = tmp_path / "res"
        code, _, _ = _run(["--seed", 5, "--output", out, "simulate", _campaign(tmp_path, SMALL)], capsys)
        assert code == EXIT_OK
        res = json.loads((out / "result.json").read_text())
        assert res["meta"]["seed"] == 5
        assert len(res["aggregates"]) == 2
        cells = pd.read_csv(out / "cells.csv")
        assert len(cells) == 6
        assert (cells["observed_fp"] + cells["observed_tp"] == cells["active_size"]).all()
        long = pd.read_csv(out / "long.csv")
        assert set(long["metric"]) == {"fp", "tp"}

    def test_shipped_config_parses(self):
        from fpclasso.cli import load_campaign

        cfg = load_campaign(CONFIGS / "fig2_small.toml")
        assert cfg.seed == 2024 and cfg.design.p == [100]
        assert load_campaign(CONFIGS / "fig4_corr.toml").design.noise_corr == [0.0, 0.25, 0.5]

    @pytest.mark.parametrize("body", [
        SMALL + "bogus = 1\n",
        SMALL.replace("replicates = 3", "replicates = 0"),
        SMALL.replace("targets = [1, 3]", "targets = [40]"),
        "not toml [",
    ])
    def test_bad_config(self, tmp_path, body, capsys):
        code, _, err = _run(["--output", tmp_path / "o", "simulate", _campaign(tmp_path, body)], capsys)
        assert code == EXIT_INPUT
        assert err.startswith("error:")

    def test_correlated_exponential_rejected(self, tmp_path, capsys):
        body = SMALL.replace("p = [30]", 'p = [30]\ncolumn_dist = "exponential"\nnoise_corr = [0.3]')
        code, _, err = _run(["--output", tmp_path / "o", "simulate", _campaign(tmp_path, body)], capsys)
        assert code == EXIT_INPUT
        assert "UnsupportedCorrelation" in err


class TestReproducible:
    """The same command with the same seed writes byte-identical output."""

    def _twice(self, tmp_path, argv, capsys):
        outs = []
        for k in range(2):
            dest = tmp_path / f"run{k}"
            assert main([str(a) for a in ["--seed", 11, "--output", dest, *argv]]) == EXIT_OK
            capsys.readouterr()
            outs.append(dest)
        return outs

    def test_fit(self, csv, tmp_path, capsys):
        a, b = self._twice(tmp_path, ["fit", "--input", csv, "--family", "gaussian", "--response", "y", "--expected-fp", 2], capsys)
        assert a.read_bytes() == b.read_bytes()

    def test_diagnose(self, csv, tmp_path, capsys):
        a, b = self._twice(tmp_path, ["diagnose", "--input", csv, "--family", "gaussian", "--response", "y"], capsys)
        assert a.read_bytes() == b.read_bytes()

    def test_qq(self, tmp_path, capsys):
        a, b = self._twice(tmp_path, ["qq", "--b-dist", "bernoulli", "--m", 200, "--mc-reps", 1000], capsys)
        assert a.read_bytes() == b.read_bytes()

    def test_simulate(self, tmp_path, capsys):
        a, b = self._twice(tmp_path, ["simulate", _campaign(tmp_path, SMALL)], capsys)
        for name in ("result.json", "cells.csv", "long.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()
