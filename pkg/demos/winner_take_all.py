#!/usr/bin/env python3
"""When does the winner take all?

With a shared adoption probability p, the total-adopter distribution is
heavy-tailed only when p exceeds (2*rate + 2) / (users + 1).  Far below that
bound (p << 1/users) almost nothing happens and totals just track window
lengths.  This script sweeps p across the boundary and reports whether a
power-law fit of the simulated totals survives its bootstrap test.

Run:  python3 demos/winner_take_all.py
"""

import math

from groupdyn import (
    FactorPair,
    SimulationConfig,
    powerlaw_fit,
    powerlaw_pvalue,
    simulate_ensemble,
    winner_threshold,
)

USERS = 100
RATE = 0.5
ACTIONS = 8000
SEED = 12


def main():
    threshold = winner_threshold(USERS, RATE)
    print(f"threshold: ({2 * RATE} + 2) / ({USERS} + 1) = {threshold:.4f}  "
          f"(1/users = {1 / USERS:.4f})")
    print(f"\n{'p':>10} {'vs threshold':>14} {'p-value':>9}  verdict")
    for mult, p in [
        ("0.003x", 1e-4),
        ("0.5x", 0.5 * threshold),
        ("1.5x", 1.5 * threshold),
        ("3x", 3.0 * threshold),
    ]:
        config = SimulationConfig(
            users=USERS,
            factors=FactorPair(up=math.e, down=1.0),
            window_rate=RATE,
            max_ticks=100,
            actions=ACTIONS,
            seed=SEED,
            p=p,
        )
        log_totals = simulate_ensemble(config).log_totals()
        drift = USERS * p
        bounds = (3 * drift, None) if 3 * drift > float(log_totals.min()) else None
        fit = powerlaw_fit(log_totals, log_input=True, x_min_bounds=bounds)
        p_value = powerlaw_pvalue(log_totals, fit, n_boot=120, seed=5)
        verdict = "power law" if p_value > 0.1 else "rejected"
        print(f"{p:10.5f} {mult:>14} {p_value:9.3f}  {verdict}")
    print("\nAbove the threshold the fit survives; far below, it is rejected.")


if __name__ == "__main__":
    main()
