import hashlib
import json
import math

import numpy as np
import pytest

from groupdyn.cli import EXIT_INPUT, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main


def run(args):
    return main(args)


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def tree_digest(root):
    return {p.name: digest(p) for p in sorted(root.iterdir()) if p.is_file()}


class TestVerifyTheorems:
    def test_quick_mode_prints_table_and_passes(self, tmp_path, capsys):
        code = run(["verify-theorems", "--quick", "--seed", "42", "--out", str(tmp_path)])
        out = capsys.readouterr().out
        assert code == EXIT_OK
        for row in ("lognormal emergence", "power-law emergence",
                    "exponent oracle", "winner-take-all threshold"):
            assert f"PASS  {row}" in out
        report = json.loads((tmp_path / "verify_theorems.json").read_text())
        assert all(entry["passed"] for entry in report)


class TestEnvironmentOverrides:
    def test_out_dir_env_var(self, tmp_path, monkeypatch):
        target = tmp_path / "env_out"
        monkeypatch.setenv("GROUPDYN_OUT", str(target))
        argv = [
            "simulate", "--users", "10", "--p", "0.3", "--lambda", "0.5",
            "--actions", "5", "--max-ticks", "10", "--seed", "1",
        ]
        assert run(argv) == EXIT_OK
        assert (target / "trajectories.jsonl").exists()


class TestExitCodes:
    def test_unknown_subcommand_is_usage_error(self, capsys):
        assert run(["frobnicate"]) == EXIT_USAGE
        capsys.readouterr()

    def test_missing_input_file(self, tmp_path):
        code = run(
            ["fit-powerlaw", "--input", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]
        )
        assert code == EXIT_INPUT

    def test_bad_config_is_input_error(self, tmp_path):
        code = run(
            ["simulate", "--users", "10", "--lambda", "0.5", "--out", str(tmp_path)]
        )  # no mu source
        assert code == EXIT_INPUT

    def test_numerical_failure_exit(self, tmp_path):
        samples = tmp_path / "tiny.csv"
        samples.write_text("\n".join(str(v) for v in range(1, 11)))
        code = run(["fit-powerlaw", "--input", str(samples), "--out", str(tmp_path)])
        assert code == EXIT_NUMERIC  # fewer samples than the fitting floor


class TestSimulate:
    def args(self, out, seed="42", threads=None):
        argv = [
            "simulate", "--users", "40", "--p", "0.3", "--lambda", "0.4",
            "--actions", "50", "--max-ticks", "30", "--seed", seed,
            "--tallies", "--out", str(out),
        ]
        if threads:
            argv += ["--threads", threads]
        return argv

    def test_same_seed_byte_identical(self, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert run(self.args(out1)) == EXIT_OK
        assert run(self.args(out2)) == EXIT_OK
        assert tree_digest(out1) == tree_digest(out2)

    def test_thread_cap_does_not_change_artifacts(self, tmp_path):
        out1, out2 = tmp_path / "t1", tmp_path / "t4"
        assert run(self.args(out1, threads="1")) == EXIT_OK
        assert run(self.args(out2, threads="4")) == EXIT_OK
        assert tree_digest(out1) == tree_digest(out2)

    def test_different_seed_changes_artifacts(self, tmp_path):
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        run(self.args(out1, seed="1"))
        run(self.args(out2, seed="2"))
        assert tree_digest(out1) != tree_digest(out2)


class TestSynthCli:
    def test_determinism_across_scenarios(self, tmp_path):
        for scenario, extra in [
            ("homogeneous", ["--p", "0.4"]),
            ("heterogeneous", ["--mu-range", "0.0,0.1"]),
            ("burst-injected", ["--ticks", "100", "--actions", "4"]),
        ]:
            outs = []
            for run_dir in ("a", "b"):
                out = tmp_path / scenario / run_dir
                argv = [
                    "synth", "--scenario", scenario, "--users", "25", "--actions", "6",
                    "--seed", "5", "--out", str(out),
                ] + extra
                assert run(argv) == EXIT_OK
                outs.append(tree_digest(out))
            assert outs[0] == outs[1]


class TestFitPipeline:
    @pytest.fixture()
    def corpus(self, tmp_path):
        out = tmp_path / "corpus"
        argv = [
            "synth", "--scenario", "homogeneous", "--users", "30", "--actions", "120",
            "--p", "0.4", "--lambda", "0.3", "--max-ticks", "40",
            "--seed", "11", "--out", str(out),
        ]
        assert run(argv) == EXIT_OK
        return out

    def test_fit_powerlaw_bootstrap_zero_marks_undefined(self, corpus, tmp_path, capsys):
        out = tmp_path / "fit"
        argv = [
            "fit-powerlaw", "--trajectories", str(corpus / "trajectories.jsonl"),
            "--bootstrap", "0", "--out", str(out),
        ]
        assert run(argv) == EXIT_OK
        captured = capsys.readouterr().out
        assert "undefined" in captured
        record = json.loads((out / "powerlaw_fit.json").read_text())
        assert record["p_value"] is None

    def test_fit_mu_runs(self, corpus, tmp_path, capsys):
        out = tmp_path / "mu"
        argv = [
            "fit-mu", "--events", str(corpus / "events.csv"),
            "--edges", str(corpus / "edges.csv"), "--out", str(out),
        ]
        assert run(argv) == EXIT_OK
        assert (out / "mu_estimates.csv").exists()

    def test_fit_mu_emits_parameter_record(self, corpus, tmp_path):
        out = tmp_path / "mu2"
        argv = [
            "fit-mu", "--events", str(corpus / "events.csv"),
            "--edges", str(corpus / "edges.csv"), "--lambda", "0.1",
            "--out", str(out),
        ]
        assert run(argv) == EXIT_OK
        record = json.loads((out / "group_params.json").read_text())
        assert set(record) == {"tau", "delta_sq", "lambda", "alpha", "C", "alpha_alt"}
        assert record["lambda"] == 0.1
        assert record["alpha"] < 0

    def test_config_file_expansion(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "users": 20, "p": 0.4, "lambda": 0.5, "actions": 10, "seed": 3,
            "max_ticks": 20, "tallies": True,
        }))
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert run(["simulate", "--config", str(cfg), "--out", str(out1)]) == EXIT_OK
        # explicit flag beats the config file
        assert run(["simulate", "--config", str(cfg), "--seed", "4", "--out", str(out2)]) == EXIT_OK
        assert tree_digest(out1) != tree_digest(out2)

    def test_fit_factors_recovers_generator(self, corpus, tmp_path):
        out = tmp_path / "factors"
        argv = [
            "fit-factors", "--trajectories", str(corpus / "trajectories.jsonl"),
            "--out", str(out),
        ]
        assert run(argv) == EXIT_OK
        records = json.loads((out / "factors.json").read_text())
        fitted = [r for r in records if "up" in r]
        assert fitted
        for r in fitted:
            assert r["up"] == pytest.approx(math.e, rel=1e-6)
            assert r["down"] == pytest.approx(1.0, rel=1e-6)

    def test_fit_lognormal_at_tick(self, corpus, tmp_path):
        out = tmp_path / "ln"
        argv = [
            "fit-lognormal", "--trajectories", str(corpus / "trajectories.jsonl"),
            "--tick", "5", "--out", str(out),
        ]
        assert run(argv) == EXIT_OK
        record = json.loads((out / "lognormal_fit.json").read_text())
        assert record["n"] > 10
        assert (out / "qq_points.csv").exists()

    def test_predict_group(self, corpus, tmp_path, capsys):
        out = tmp_path / "pred"
        argv = [
            "predict-group", "--trajectories", str(corpus / "trajectories.jsonl"),
            "--train-window", "5", "--out", str(out),
        ]
        assert run(argv) == EXIT_OK
        rows = json.loads((out / "group_predictions.json").read_text())
        assert rows
        # generator has constant factors, so held-out prediction is exact
        for r in rows:
            assert r["mean_abs_log_error_one_step"] < 1e-9


class TestBurstCli:
    @pytest.fixture()
    def corpus(self, tmp_path):
        out = tmp_path / "bcorpus"
        argv = [
            "synth", "--scenario", "burst-injected", "--users", "100", "--actions", "20",
            "--ticks", "160", "--radius", "4", "--seed", "9", "--out", str(out),
        ]
        assert run(argv) == EXIT_OK
        return out

    def test_detect_bursts_matches_sidecar(self, corpus, tmp_path):
        out = tmp_path / "det"
        argv = [
            "detect-bursts", "--trajectories", str(corpus / "trajectories.jsonl"),
            "--radius", "4", "--out", str(out),
        ]
        assert run(argv) == EXIT_OK
        truth = json.loads((corpus / "truth.json").read_text())
        expected = {
            (a["action_id"], t) for a in truth["actions_truth"] for t in a["burst_ticks"]
        }
        got = set()
        for line in (out / "bursts.csv").read_text().splitlines()[1:]:
            action, tick = line.split(",")
            got.add((action, int(tick)))
        assert got == expected

    def test_predict_bursts_and_sweep(self, corpus, tmp_path):
        out = tmp_path / "pb"
        argv = [
            "predict-bursts", "--trajectories", str(corpus / "trajectories.jsonl"),
            "--kind", "factor", "--window", "5", "--radius", "4", "--out", str(out),
        ]
        assert run(argv) == EXIT_OK
        record = json.loads((out / "burst_prediction_factor.json").read_text())
        assert record["f1"] > 0.5
        dataset_lines = (out / "burst_dataset_factor.csv").read_text().splitlines()
        assert dataset_lines[0] == (
            "action_id,tick,factor_lag4,factor_lag3,factor_lag2,factor_lag1,"
            "factor_lag0,label"
        )
        assert len(dataset_lines) > 100

        argv = [
            "sweep", "--trajectories", str(corpus / "trajectories.jsonl"),
            "--windows", "4,6", "--kind", "both", "--radius", "4", "--out", str(out),
        ]
        assert run(argv) == EXIT_OK
        lines = (out / "sweep.csv").read_text().strip().splitlines()
        assert lines[0] == "kind,window,precision,recall,f1"
        assert len(lines) == 5
