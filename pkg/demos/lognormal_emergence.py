#!/usr/bin/env python3
"""How group counts become lognormal.

Every tick, each user flips its own adoption coin; each adopter multiplies
the group count by e while non-adopters leave it alone.  The log count is
then a sum of independent Bernoulli-sum increments, so at a late tick it is
normal with mean t * sum(mu) and variance t * sum(mu * (1 - mu)) -- no free
parameters.  This script simulates an ensemble, compares the observed
moments with that closed form, and reports the quantile-quantile line.

Run:  python3 demos/lognormal_emergence.py [--plot out.png]
"""

import argparse
import math

import numpy as np

from groupdyn import (
    FactorPair,
    LognormalFit,
    SimulationConfig,
    micro_to_meso,
    qq_points,
    simulate_ensemble,
)

USERS = 500
ACTIONS = 2500
INSPECT_TICK = 120
WINDOW_RATE = 0.01
SEED = 7


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--plot", default=None, help="write a QQ plot to this PNG path")
    args = parser.parse_args()

    config = SimulationConfig(
        users=USERS,
        factors=FactorPair(up=math.e, down=1.0),
        window_rate=WINDOW_RATE,
        max_ticks=INSPECT_TICK + 1,
        actions=ACTIONS,
        seed=SEED,
        mu_range=(0.0, 0.1),
    )
    print(f"simulating {ACTIONS} actions over {USERS} users ...")
    result = simulate_ensemble(config)
    params = micro_to_meso(config.resolve_model())
    values = result.log_counts_at(INSPECT_TICK)

    theo_mean = INSPECT_TICK * params.drift
    theo_var = INSPECT_TICK * params.variance
    print(f"\n{values.size} trajectories reached tick {INSPECT_TICK}")
    print(f"{'':>14} {'predicted':>12} {'observed':>12}")
    print(f"{'mean ln n':>14} {theo_mean:12.2f} {values.mean():12.2f}")
    print(f"{'var  ln n':>14} {theo_var:12.2f} {values.var(ddof=1):12.2f}")

    fit = LognormalFit(mean=theo_mean, variance=theo_var, n_samples=values.size)
    qq = qq_points(values, fit, log_input=True)
    print(f"\nQQ line against the predicted normal law:")
    print(f"  slope     {qq.slope:8.4f}   (1 when the law holds)")
    print(f"  intercept {qq.intercept:8.4f}")
    print(f"  R^2       {qq.r_squared:8.4f}")

    if args.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5, 5))
        ax.plot(qq.theoretical, qq.empirical, ".", ms=3, alpha=0.6)
        lo, hi = qq.theoretical[0], qq.theoretical[-1]
        ax.plot([lo, hi], [lo, hi], "r-", lw=1)
        ax.set_xlabel("predicted quantile of ln n(t)")
        ax.set_ylabel("observed quantile")
        ax.set_title(f"QQ at tick {INSPECT_TICK}")
        fig.tight_layout()
        fig.savefig(args.plot, dpi=120)
        print(f"\nwrote {args.plot}")


if __name__ == "__main__":
    main()
