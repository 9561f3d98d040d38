"""Acceptance suite.

One test per acceptance criterion, each printing a single PASS line with the
measured numbers (run with ``pytest tests/test_acceptance.py -v -s``).
Tolerances are fixed here, not tuned at runtime.
"""

import hashlib

import numpy as np
import pytest
from scipy import special

from groupdyn import (
    FactorPair,
    GroupModelParams,
    GroupTrajectory,
    IndividualModel,
    TickTally,
    dataio,
    estimate_factors,
    lognormal_mle,
    meso_to_macro,
    micro_to_meso,
    mixture_log_slope,
    powerlaw_fit,
    non_radical_exponent,
    window_sweep,
)
from groupdyn.burst import logistic_gradient, logistic_loss, train_logreg
from groupdyn.cli import EXIT_OK, main
from groupdyn.simulator import substream
from groupdyn.verification import (
    check_lognormal_emergence,
    check_power_law_emergence,
    check_winner_threshold,
)


def report(name, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'}  criterion {name}: {detail}"
    print(line)
    assert passed, line


def test_criterion_1_lognormal_emergence():
    # 1000 users, adoption probabilities ~ U(0, 0.1), 5000 actions, tick 200.
    result = check_lognormal_emergence(
        seed=42, users=1000, actions=5000, inspect_tick=200, window_rate=0.008
    )
    d = result.details
    report(
        "1 (lognormal emergence)",
        result.passed,
        f"qq_slope={d['qq_slope']:.4f} (1+-0.05), r2={d['qq_r2']:.4f} (>=0.98), "
        f"mean_err={d['mean_err_sigma']:.2f} sigma (<=3), var_ratio={d['var_ratio']:.4f}",
    )


def test_criterion_2_power_law_emergence():
    # 20000 actions, shared p=0.5, 100 users, window rate 0.5.
    result = check_power_law_emergence(
        seed=8, users=100, actions=20000, p=0.5, window_rate=0.5, n_boot=300
    )
    d = result.details
    report(
        "2 (power-law emergence)",
        result.passed,
        f"predicted={d['predicted_exponent']:.4f}, fitted={d['fitted_exponent']:.4f} "
        f"(err {d['slope_err']:.4f} <= 0.15), p_value={d['p_value']:.3f} (> 0.1)",
    )


def test_criterion_3_exponent_oracle():
    totals = np.logspace(2, 5, 25)
    max_err = 0.0
    max_alt_gap = 0.0
    for tau in (0.5, 1.0, 2.0):
        for var in (0.5, 1.0, 2.0):
            for lam in (0.1, 0.5, 1.0):
                params = GroupModelParams(tau, var)
                slope = mixture_log_slope(params, lam, totals)
                max_err = max(max_err, abs(slope - meso_to_macro(params, lam).exponent))
                max_alt_gap = max(
                    max_alt_gap, abs(slope - non_radical_exponent(params, lam))
                )
    passed = max_err <= 0.01 and max_alt_gap > 0.05
    report(
        "3 (quadrature oracle, 27-point grid)",
        passed,
        f"max |slope - closed form| = {max_err:.2e} (<= 0.01); "
        f"max gap to non-radical variant = {max_alt_gap:.3f} (> 0.05)",
    )


def test_criterion_4_winner_threshold():
    result = check_winner_threshold(
        seed=12, users=100, actions=20000, window_rate=0.5, n_boot=200
    )
    d = result.details
    report(
        "4 (winner-take-all threshold)",
        result.passed,
        f"threshold={d['threshold']:.4f}; p=1.5x: p_value={d['p_value_above']:.3f} (> 0.1); "
        f"p=1e-4: p_value={d['p_value_below']:.3f} (< 0.1)",
    )


def _sample_discrete_powerlaw(alpha, x_min, n, seed, top=2_000_000):
    # Independent oracle: exact inverse CDF through a Hurwitz-zeta table.
    rng = np.random.default_rng(seed)
    support = np.arange(x_min, top)
    ccdf = special.zeta(alpha, support) / special.zeta(alpha, x_min)
    u = rng.random(n)
    idx = np.searchsorted(-ccdf, -u, side="right") - 1
    return support[np.clip(idx, 0, len(support) - 1)]


def _synthetic_trajectory(factors, adopters, users, noise_sd=0.0, rng=None, action_id="s"):
    tallies = [
        TickTally(tick=i + 1, adopters=int(a), non_adopters=users - int(a))
        for i, a in enumerate(adopters)
    ]
    log_counts = [0.0]
    for t in tallies:
        log_counts.append(
            log_counts[-1] + t.adopters * factors.log_up - t.non_adopters * factors.log_down
        )
    log_counts = np.array(log_counts)
    if noise_sd:
        log_counts = log_counts + rng.normal(0.0, noise_sd, size=log_counts.size)
        log_counts[0] = 0.0
    return GroupTrajectory(
        action_id=action_id,
        log_counts=log_counts,
        duration=float(len(tallies)),
        tallies=tallies,
    )


def test_criterion_5_estimator_recovery():
    # (a) power-law fitter on 1e5 exact discrete samples
    samples = _sample_discrete_powerlaw(2.5, 10, 100_000, seed=11)
    fit = powerlaw_fit(samples, max_candidates=None)
    ok_a = abs(fit.exponent - 2.5) <= 0.05 and 8 <= fit.x_min <= 13

    # (b) factor estimator on noiseless synthetic trajectories
    rng = substream(77, 9)
    ok_b = True
    worst_rel = 0.0
    for i in range(10):
        traj = _synthetic_trajectory(
            FactorPair(1.5, 1.2), rng.integers(1, 10, size=12), users=10, action_id=f"b{i}"
        )
        est = estimate_factors(traj).factors
        rel = max(abs(est.up - 1.5) / 1.5, abs(est.down - 1.2) / 1.2)
        worst_rel = max(worst_rel, rel)
        ok_b &= rel <= 1e-9

    # (c) lognormal MLE on 1e5 known-generator samples
    draws = substream(99, 9).lognormal(mean=2.0, sigma=0.5, size=100_000)
    ln_fit = lognormal_mle(draws)
    ok_c = abs(ln_fit.mean - 2.0) <= 0.01 and abs(ln_fit.variance - 0.25) <= 0.01

    report(
        "5 (estimator recovery)",
        ok_a and ok_b and ok_c,
        f"(a) exponent={fit.exponent:.4f} (2.5+-0.05), x_min={fit.x_min:.0f} (in [8,13]); "
        f"(b) worst factor rel err={worst_rel:.2e} (<= 1e-9); "
        f"(c) mean={ln_fit.mean:.4f} (2+-0.01), var={ln_fit.variance:.4f} (0.25+-0.01)",
    )


def test_criterion_6_group_prediction():
    factors = FactorPair(1.5, 1.2)
    rng = substream(123, 9)

    def one_step_errors(noise_sd, n_traj):
        errors = []
        for i in range(n_traj):
            traj = _synthetic_trajectory(
                factors, rng.integers(1, 10, size=40), users=10,
                noise_sd=noise_sd, rng=rng, action_id=f"p{i}",
            )
            est = estimate_factors(traj, window=20).factors
            for t in range(20, 39):
                predicted = (
                    traj.log_counts[t]
                    + traj.tallies[t].adopters * est.log_up
                    - traj.tallies[t].non_adopters * est.log_down
                )
                errors.append(abs(predicted - traj.log_counts[t + 1]))
        return np.array(errors)

    noisy = one_step_errors(0.05, 20)
    clean = one_step_errors(0.0, 5)
    ok = float(np.max(clean)) <= 1e-9 and float(np.mean(noisy)) < 0.1
    report(
        "6 (group prediction)",
        ok,
        f"noiseless max |log err|={np.max(clean):.2e} (<= 1e-9); "
        f"5% noise mean |log err|={np.mean(noisy):.4f} (< 0.1)",
    )


def test_criterion_7_burst_prediction(tmp_path):
    paths = dataio.synth_corpus(
        tmp_path / "bursts", "burst-injected", users=200, actions=60, seed=3,
        ticks=240, radius=5, spacing=30,
    )
    trajs = dataio.read_trajectories(paths.trajectories)
    windows = [4, 6, 8]
    factor_entries = window_sweep(trajs, radius=5, windows=windows, kind="factor")
    count_entries = window_sweep(trajs, radius=5, windows=windows, kind="count")
    factor_f1 = {e.window: e.metrics.f1 for e in factor_entries}
    count_f1 = {e.window: e.metrics.f1 for e in count_entries}
    best_k = max(factor_f1, key=factor_f1.get)
    ok = factor_f1[best_k] >= 0.7 and factor_f1[best_k] > count_f1[best_k]
    report(
        "7 (burst prediction)",
        ok,
        f"best k={best_k}: factor F1={factor_f1[best_k]:.3f} (>= 0.7) "
        f"> count F1={count_f1[best_k]:.3f}; all k: "
        + ", ".join(f"k={k}: {factor_f1[k]:.2f}/{count_f1[k]:.2f}" for k in windows),
    )


def test_criterion_8_classifier_correctness():
    rng = substream(7, 9)
    # analytic gradient vs central differences on random batches
    max_diff = 0.0
    for _ in range(5):
        x = rng.normal(size=(40, 5))
        y = (rng.random(40) > 0.5).astype(float)
        w = rng.normal(size=5)
        b = float(rng.normal())
        grad_w, grad_b = logistic_gradient(x, y, w, b, l2=0.01)
        eps = 1e-5
        for j in range(5):
            dw = np.zeros(5)
            dw[j] = eps
            numeric = (
                logistic_loss(x, y, w + dw, b, 0.01) - logistic_loss(x, y, w - dw, b, 0.01)
            ) / (2 * eps)
            max_diff = max(max_diff, abs(numeric - grad_w[j]))
        numeric_b = (
            logistic_loss(x, y, w, b + eps, 0.01) - logistic_loss(x, y, w, b - eps, 0.01)
        ) / (2 * eps)
        max_diff = max(max_diff, abs(numeric_b - grad_b))

    # convex retraining from different initializations
    x = rng.normal(size=(150, 4))
    y = x @ np.array([1.0, -2.0, 0.5, 0.0]) + 0.5 * rng.normal(size=150) > 0
    m1 = train_logreg((x, y), l2=0.01, tol=1e-10)
    m2 = train_logreg((x, y), l2=0.01, tol=1e-10, init=(rng.normal(size=4), -0.7))
    loss_gap = abs(m1.final_loss - m2.final_loss)

    ok = max_diff < 1e-6 and loss_gap < 1e-6
    report(
        "8 (classifier correctness)",
        ok,
        f"max |gradient - finite difference|={max_diff:.2e} (< 1e-6); "
        f"retrain loss gap={loss_gap:.2e} (< 1e-6)",
    )


def _tree_digest(root):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.iterdir()) if p.is_file()}


def test_criterion_9_determinism(tmp_path):
    runs = {
        "simulate": lambda out, threads: [
            "simulate", "--users", "50", "--p", "0.4", "--lambda", "0.3",
            "--actions", "80", "--max-ticks", "40", "--seed", "21", "--tallies",
            "--threads", threads, "--out", out,
        ],
        "synth": lambda out, threads: [
            "synth", "--scenario", "heterogeneous", "--users", "40", "--actions", "30",
            "--mu-range", "0.0,0.1", "--seed", "13", "--threads", threads, "--out", out,
        ],
        "fit-powerlaw": None,  # built below, needs input
    }
    results = {}
    for name, argv_fn in runs.items():
        if argv_fn is None:
            continue
        digests = []
        for label, threads in (("a", "1"), ("b", "4"), ("c", "1")):
            out = tmp_path / name / label
            assert main(argv_fn(str(out), threads)) == EXIT_OK
            digests.append(_tree_digest(out))
        results[name] = digests[0] == digests[1] == digests[2]

    # stochastic bootstrap subcommand on a fixed input
    src = tmp_path / "samples.csv"
    samples = _sample_discrete_powerlaw(2.3, 5, 4000, seed=2)
    src.write_text("\n".join(str(int(v)) for v in samples) + "\n")
    digests = []
    for label, threads in (("a", "1"), ("b", "4"), ("c", "1")):
        out = tmp_path / "fitpl" / label
        argv = [
            "fit-powerlaw", "--input", str(src), "--bootstrap", "60",
            "--seed", "5", "--threads", threads, "--out", str(out),
        ]
        assert main(argv) == EXIT_OK
        digests.append(_tree_digest(out))
    results["fit-powerlaw"] = digests[0] == digests[1] == digests[2]

    ok = all(results.values())
    report(
        "9 (determinism)",
        ok,
        "byte-identical artifacts across reruns and thread caps: "
        + ", ".join(f"{k}={'yes' if v else 'NO'}" for k, v in results.items()),
    )
