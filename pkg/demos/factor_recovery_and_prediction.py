#!/usr/bin/env python3
"""Recovering the influence factors and predicting the next tick.

Two transitions with non-proportional tallies pin down (ln up, ln down)
exactly, so averaging the pairwise solutions over a training window recovers
the factors from noiseless data to machine precision.  With 5% multiplicative
observation noise the averaged estimate still predicts held-out one-step
counts to within a few percent.

Run:  python3 demos/factor_recovery_and_prediction.py
"""

import numpy as np

from groupdyn import FactorPair, GroupTrajectory, TickTally, estimate_factors
from groupdyn.simulator import substream

USERS = 10
TICKS = 40
TRAIN = 20
TRUE = FactorPair(up=1.5, down=1.2)


def make_trajectory(rng, noise_sd=0.0, action_id="demo"):
    adopters = rng.integers(1, USERS, size=TICKS)
    tallies = [
        TickTally(tick=i + 1, adopters=int(a), non_adopters=USERS - int(a))
        for i, a in enumerate(adopters)
    ]
    log_counts = [0.0]
    for t in tallies:
        log_counts.append(
            log_counts[-1] + t.adopters * TRUE.log_up - t.non_adopters * TRUE.log_down
        )
    log_counts = np.array(log_counts)
    if noise_sd:
        log_counts = log_counts + rng.normal(0.0, noise_sd, size=log_counts.size)
        log_counts[0] = 0.0
    return GroupTrajectory(
        action_id=action_id, log_counts=log_counts, duration=float(TICKS), tallies=tallies
    )


def one_step_errors(traj, factors):
    errors = []
    for t in range(TRAIN, TICKS - 1):
        predicted = (
            traj.log_counts[t]
            + traj.tallies[t].adopters * factors.log_up
            - traj.tallies[t].non_adopters * factors.log_down
        )
        errors.append(abs(predicted - traj.log_counts[t + 1]))
    return np.array(errors)


def main():
    rng = substream(2024, 9)
    print(f"true factors: up={TRUE.up}, down={TRUE.down}")
    print(f"training on the first {TRAIN} of {TICKS} transitions\n")

    clean = make_trajectory(rng)
    est = estimate_factors(clean, window=TRAIN)
    err = one_step_errors(clean, est.factors)
    print("noiseless trajectory:")
    print(f"  estimated up={est.factors.up:.12f}, down={est.factors.down:.12f}")
    print(f"  ({est.pairs_used} tick pairs used, {est.pairs_skipped} degenerate skipped)")
    print(f"  held-out one-step |log error|: max {err.max():.2e}\n")

    noisy = make_trajectory(rng, noise_sd=0.05, action_id="noisy")
    est = estimate_factors(noisy, window=TRAIN)
    err = one_step_errors(noisy, est.factors)
    print("with 5% multiplicative observation noise:")
    print(f"  estimated up={est.factors.up:.4f}, down={est.factors.down:.4f}")
    print(f"  held-out one-step |log error|: mean {err.mean():.4f}, max {err.max():.4f}")


if __name__ == "__main__":
    main()
