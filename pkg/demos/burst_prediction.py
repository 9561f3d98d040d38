#!/usr/bin/env python3
"""Predicting bursts from upward factors instead of raw counts.

A burst is a tick whose count strictly tops everything within +-radius
ticks.  In the synthetic burst corpus the upward factor spikes two ticks
before each count peak, so factor features carry advance warning while raw
count levels are confounded by each trajectory's drifting scale.  The script
sweeps the observation-window length for both feature kinds and prints the
test-set scores side by side.

Run:  python3 demos/burst_prediction.py
"""

import tempfile
from pathlib import Path

from groupdyn import dataio, window_sweep

RADIUS = 5
WINDOWS = [3, 4, 6, 8, 10]


def main():
    corpus_dir = Path(tempfile.mkdtemp(prefix="burst_demo_")) / "corpus"
    print("writing the burst-injected corpus ...")
    paths = dataio.synth_corpus(
        corpus_dir, "burst-injected", users=200, actions=40, seed=3,
        ticks=240, radius=RADIUS, spacing=30,
    )
    trajs = dataio.read_trajectories(paths.trajectories)
    truth = dataio.read_json(paths.truth)
    n_bursts = sum(len(a["burst_ticks"]) for a in truth["actions_truth"])
    print(f"{len(trajs)} trajectories, {n_bursts} injected bursts "
          f"(label radius {RADIUS} ticks)\n")

    results = {}
    for kind in ("factor", "count"):
        results[kind] = {
            e.window: e.metrics for e in window_sweep(trajs, RADIUS, WINDOWS, kind)
        }

    print(f"{'window':>7} | {'factor F1':>10} {'P':>6} {'R':>6} | {'count F1':>9} {'P':>6} {'R':>6}")
    print("-" * 63)
    for k in WINDOWS:
        f, c = results["factor"][k], results["count"][k]
        print(
            f"{k:>7} | {f.f1:>10.3f} {f.precision:>6.2f} {f.recall:>6.2f} "
            f"| {c.f1:>9.3f} {c.precision:>6.2f} {c.recall:>6.2f}"
        )
    best = max(WINDOWS, key=lambda k: results["factor"][k].f1)
    print(
        f"\nbest window k={best}: factor F1 {results['factor'][best].f1:.3f} vs "
        f"count F1 {results['count'][best].f1:.3f} -- the factor features "
        "see the spike before the peak arrives."
    )


if __name__ == "__main__":
    main()
