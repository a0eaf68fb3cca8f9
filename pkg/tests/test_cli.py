"""Command-line interface: subcommands, artifacts, exit codes."""

import csv
import json

import numpy as np
import pytest

import distillaudit as da
from distillaudit.cli import (
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_DEGENERATE,
    main,
)


def run(argv):
    return main(argv)


def write_kinked(tmp_path, rows=2500, seed=0):
    path = tmp_path / "kinked.csv"
    assert run(["gen-synthetic", "--kind", "kinked-score", "--rows", str(rows),
                "--seed", str(seed), "--out", str(path)]) == 0
    return path


def small_train_config(tmp_path, max_bins=16, **train):
    cfg = {"load": {"max_bins": max_bins},
           "train": {"learning_rate": 0.15, "max_rounds": 150, **train}}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


class TestGenSynthetic:
    def test_writes_loadable_csv_and_truth(self, tmp_path, capsys):
        out = tmp_path / "data.csv"
        truth_out = tmp_path / "truth.json"
        code = run(["gen-synthetic", "--kind", "linear-score", "--rows", "500",
                    "--out", str(out), "--truth-out", str(truth_out)])
        assert code == 0
        assert "wrote 500 rows" in capsys.readouterr().out
        data = da.load_csv(out)
        assert data.n_rows == 500
        assert data.meta["rejected_rows"] == 0
        truth = json.loads(truth_out.read_text())
        assert truth["weights"]["f00"] == 3.0

    def test_control_flag_breaks_hidden_link(self, tmp_path):
        hid = tmp_path / "hid.csv"
        ctl = tmp_path / "ctl.csv"
        run(["gen-synthetic", "--kind", "hidden-feature", "--rows", "400", "--out", str(hid)])
        run(["gen-synthetic", "--kind", "hidden-feature", "--rows", "400", "--control",
             "--out", str(ctl)])
        a = da.load_csv(hid)
        b = da.load_csv(ctl)
        np.testing.assert_array_equal(a.score, b.score)
        assert not np.array_equal(a.outcome, b.outcome)

    def test_unknown_kind_rejected_by_parser(self, tmp_path):
        with pytest.raises(SystemExit):
            run(["gen-synthetic", "--kind", "no-such", "--out", str(tmp_path / "x.csv")])


class TestCalibrate:
    def test_kinked_scores_get_calibrated(self, tmp_path, capsys):
        data = write_kinked(tmp_path)
        out = tmp_path / "cal"
        assert run(["calibrate", "--data", str(data), "--out", str(out)]) == 0
        stdout = capsys.readouterr().out
        assert "calibration: calibrated" in stdout
        blob = json.loads((out / "calibration.json").read_text())
        assert blob["decision"]["applied"] is True
        assert blob["decision"]["mode"] == "auto"
        assert (out / "calibration_diagnostics.csv").exists()
        assert (out / "run_meta.json").exists()

    def test_logit_linear_scores_left_alone(self, tmp_path, capsys):
        data = tmp_path / "lin.csv"
        run(["gen-synthetic", "--kind", "linear-score", "--rows", "4000", "--out", str(data)])
        out = tmp_path / "cal"
        assert run(["calibrate", "--data", str(data), "--out", str(out)]) == 0
        assert "not calibrated" in capsys.readouterr().out
        blob = json.loads((out / "calibration.json").read_text())
        assert blob["decision"]["applied"] is False

    def test_forcing_off_on_kinked_scores_records_warning(self, tmp_path, capsys):
        data = write_kinked(tmp_path)
        out = tmp_path / "cal"
        assert run(["calibrate", "--data", str(data), "--calibration", "off",
                    "--out", str(out)]) == 0
        captured = capsys.readouterr()
        blob = json.loads((out / "calibration.json").read_text())
        assert blob["decision"]["applied"] is False
        assert "warning" in blob
        assert "warning" in captured.err.lower()


@pytest.fixture(scope="module")
def audit_run(tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("audit")
    data = tmp_path / "data.csv"
    run(["gen-synthetic", "--kind", "partial-use", "--rows", "900",
         "--seed", "1", "--out", str(data)])
    cfg = small_train_config(tmp_path)
    out = tmp_path / "out"
    code = run(["audit", "--data", str(data), "--config", str(cfg),
                "--K", "2", "--L", "2", "--seed", "1", "--out", str(out)])
    return code, out


class TestAudit:

    def test_exit_zero_and_report_written(self, audit_run):
        code, out = audit_run
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["run"]["n_rows"] == 900
        names = {f["model"] for f in report["fidelity"]}
        assert names == {"additive", "linear"}
        assert "discrepancy_ranking" in report["comparison"]
        assert "verdict" in report["missing_feature_test"] or "skipped" in report["missing_feature_test"]

    def test_artifact_tree_complete(self, audit_run):
        _, out = audit_run
        report = json.loads((out / "report.json").read_text())
        for group in report["artifacts"].values():
            for rel in group:
                assert (out / rel).exists(), rel
        assert any((out / "models").glob("mimic_k*.json"))
        assert any((out / "models").glob("linear_mimic_k*.json"))
        assert any((out / "curves").glob("*.csv"))
        assert any((out / "plots").glob("*.svg"))

    def test_curve_csv_parses(self, audit_run):
        _, out = audit_run
        path = sorted((out / "curves").glob("*.csv"))[0]
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert {"bin", "mass", "mimic_mean", "outcome_mean", "diff_lower"} <= set(rows[0])
        float(rows[0]["mimic_mean"])

    def test_interactions_add_surface_artifacts(self, tmp_path):
        data = tmp_path / "inter.csv"
        run(["gen-synthetic", "--kind", "interaction", "--rows", "800",
             "--out", str(data)])
        cfg = small_train_config(tmp_path)
        out = tmp_path / "out"
        code = run(["audit", "--data", str(data), "--config", str(cfg), "--K", "2",
                    "--L", "2", "--pairs", "1", "--out", str(out)])
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        names = {f["model"] for f in report["fidelity"]}
        assert "additive_interactions" in names
        assert len(report["comparison"]["surfaces"]) == 1
        assert any("surface" in p for p in report["artifacts"]["plots"])

    def test_repeat_run_is_byte_identical(self, tmp_path):
        data = tmp_path / "data.csv"
        run(["gen-synthetic", "--kind", "kinked-score", "--rows", "700", "--out", str(data)])
        cfg = small_train_config(tmp_path)
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            assert run(["audit", "--data", str(data), "--config", str(cfg), "--K", "2",
                        "--L", "2", "--seed", "3", "--out", str(out)]) == 0
            outs.append((out / "report.json").read_bytes())
        assert outs[0] == outs[1]


class TestExitCodes:
    def test_missing_data_file(self, tmp_path, capsys):
        code = run(["calibrate", "--data", str(tmp_path / "absent.csv"),
                    "--out", str(tmp_path / "o")])
        assert code == EXIT_DATA
        assert "error[load]" in capsys.readouterr().err

    def test_bad_config_json(self, tmp_path, capsys):
        data = write_kinked(tmp_path, rows=600)
        cfg = tmp_path / "bad.json"
        cfg.write_text("{not json")
        code = run(["calibrate", "--data", str(data), "--config", str(cfg),
                    "--out", str(tmp_path / "o")])
        assert code == EXIT_CONFIG
        assert "error[config]" in capsys.readouterr().err

    def test_unknown_config_section(self, tmp_path):
        data = write_kinked(tmp_path, rows=600)
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"loda": {"max_bins": 8}}))
        assert run(["calibrate", "--data", str(data), "--config", str(cfg),
                    "--out", str(tmp_path / "o")]) == EXIT_CONFIG

    def test_missing_score_column(self, tmp_path, capsys):
        path = tmp_path / "noscore.csv"
        path.write_text("a,outcome\n1,0\n2,1\n")
        code = run(["calibrate", "--data", str(path), "--out", str(tmp_path / "o")])
        assert code == EXIT_DATA

    def test_score_col_override_fixes_it(self, tmp_path):
        path = tmp_path / "renamed.csv"
        rows = ["points,outcome"] + [f"{300 + i},{i % 2}" for i in range(200)]
        path.write_text("\n".join(rows) + "\n")
        assert run(["calibrate", "--data", str(path), "--score-col", "points",
                    "--out", str(tmp_path / "o")]) == 0

    def test_too_few_error_pairs_is_degenerate(self, tmp_path, capsys):
        path = tmp_path / "pairs.csv"
        lines = ["fold,mimic_abs_error,outcome_abs_error"]
        lines += [f"0,{i / 10},{i / 7}" for i in range(10)]
        path.write_text("\n".join(lines) + "\n")
        code = run(["test-missing", "--data", str(path), "--out", str(tmp_path / "o")])
        assert code == EXIT_DEGENERATE
        assert "error[missing-test]" in capsys.readouterr().err

    def test_audit_k_too_small(self, tmp_path, capsys):
        data = write_kinked(tmp_path, rows=600)
        code = run(["audit", "--data", str(data), "--K", "1", "--L", "2",
                    "--out", str(tmp_path / "o")])
        assert code == EXIT_CONFIG


class TestTestMissing:
    def test_identical_columns_give_unit_estimates(self, tmp_path, capsys):
        path = tmp_path / "pairs.csv"
        rng = np.random.default_rng(0)
        e = rng.exponential(size=100)
        lines = ["fold,mimic_abs_error,outcome_abs_error"]
        lines += [f"0,{float(v)!r},{float(v)!r}" for v in e]
        path.write_text("\n".join(lines) + "\n")
        out = tmp_path / "o"
        code = run(["test-missing", "--data", str(path), "--resamples", "200",
                    "--out", str(out)])
        assert code == 0
        blob = json.loads((out / "missing_test.json").read_text())
        assert blob["pearson"]["estimate"] == pytest.approx(1.0)
        assert blob["verdict"] == "evidence"
        assert "verdict: evidence" in capsys.readouterr().out

    def test_audit_error_pairs_feed_back_in(self, tmp_path):
        data = tmp_path / "data.csv"
        run(["gen-synthetic", "--kind", "hidden-feature", "--rows", "800", "--out", str(data)])
        cfg = small_train_config(tmp_path)
        out = tmp_path / "audit"
        assert run(["audit", "--data", str(data), "--config", str(cfg), "--K", "2",
                    "--L", "2", "--out", str(out)]) == 0
        second = tmp_path / "retest"
        assert run(["test-missing", "--data", str(out / "error_pairs.csv"),
                    "--resamples", "200", "--out", str(second)]) == 0
        assert (second / "missing_test.json").exists()


class TestParser:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["--version"])
        assert exc.value.code == 0
        assert da.__version__ in capsys.readouterr().out

    def test_subcommand_required(self):
        with pytest.raises(SystemExit):
            run([])
