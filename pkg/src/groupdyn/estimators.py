"""Closed-form maps and estimators connecting the three model levels.

Micro -> meso: adoption probabilities give the drift and variance rates of
the log group count.  Meso -> macro: exponentially weighted observation
windows turn the lognormal group counts into a power-law total-adopter
distribution.  The numerical mixture integral acts as the ground-truth
oracle for the closed-form exponent, and the factor estimator inverts the
multiplicative update from observed trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import integrate

from .errors import (
    ConfigError,
    DegenerateModelError,
    DegeneratePairError,
    EstimationError,
    NumericalError,
)
from .simulator import FactorPair, log_step


@dataclass(frozen=True)
class GroupModelParams:
    """Per-tick drift and variance of the log group count."""

    drift: float
    variance: float

    def __post_init__(self):
        if not self.variance > 0.0:
            raise DegenerateModelError(
                f"variance rate must be positive, got {self.variance}"
            )


@dataclass(frozen=True)
class PowerLawParams:
    """Closed-form macro distribution P(N) = amplitude * N^exponent."""

    amplitude: float
    exponent: float
    window_rate: float


def micro_to_meso(model):
    """Sum the per-user Bernoulli moments into group-model rates.

    drift = sum(mu), variance = sum(mu * (1 - mu)).  A model in which every
    probability is 0 or 1 has no variance and is rejected.
    """
    mu = model.mu
    drift = float(np.sum(mu))
    variance = float(np.sum(mu * (1.0 - mu)))
    if variance <= 0.0:
        raise DegenerateModelError("every adoption probability is 0 or 1")
    return GroupModelParams(drift=drift, variance=variance)


def meso_to_macro(params, window_rate):
    """Map group-model rates and the window rate to the power-law parameters.

    exponent = -1 + drift/variance - sqrt(drift^2 + 2*rate*variance)/variance
    amplitude = rate / sqrt(drift^2 + 2*rate*variance)

    This is the form certified by the quadrature oracle (`mixture_density`);
    see `non_radical_exponent` for the variant form the oracle rejects.
    """
    if not window_rate > 0.0:
        raise ConfigError("window rate must be positive")
    tau, var = params.drift, params.variance
    root = math.sqrt(tau * tau + 2.0 * window_rate * var)
    return PowerLawParams(
        amplitude=window_rate / root,
        exponent=-1.0 + tau / var - root / var,
        window_rate=window_rate,
    )


def non_radical_exponent(params, window_rate):
    """Variant exponent without the square root:
    -1 + drift/var - (drift^2 - 2*rate*var)/var.

    Kept only for comparison; the quadrature oracle shows it does not
    reproduce the mixture's log-log slope.
    """
    tau, var = params.drift, params.variance
    return -1.0 + tau / var - (tau * tau - 2.0 * window_rate * var) / var


def mixture_density(params, window_rate, total):
    """Numerically integrate the exponentially weighted lognormal mixture.

    density(N) = integral_0^inf rate*exp(-rate*t)
                 * exp(-(ln N - drift*t)^2 / (2*var*t)) / (N*sqrt(2*pi*var*t)) dt

    Adaptive quadrature to relative tolerance 1e-8.  Serves as the
    independent oracle for `meso_to_macro`.
    """
    if not total > 0.0:
        raise ConfigError("total must be positive")
    tau, var = params.drift, params.variance
    lam = window_rate
    log_n = math.log(total)

    def integrand(t):
        return (
            lam
            * math.exp(-lam * t - (log_n - tau * t) ** 2 / (2.0 * var * t))
            / (total * math.sqrt(2.0 * math.pi * var * t))
        )

    # The integrand peaks near the saddle point; splitting there keeps the
    # adaptive rule from missing a narrow peak at large ln N.
    t_star = max(abs(log_n) / math.sqrt(tau * tau + 2.0 * lam * var), 1e-6)
    try:
        left, left_err = integrate.quad(integrand, 0.0, t_star, epsrel=1e-10, epsabs=0.0, limit=200)
        right, right_err = integrate.quad(integrand, t_star, np.inf, epsrel=1e-10, epsabs=0.0, limit=200)
    except Exception as exc:  # pragma: no cover - quad failures are rare
        raise NumericalError(f"mixture quadrature failed at N={total}: {exc}") from exc
    value = left + right
    err = left_err + right_err
    if value <= 0.0 or not math.isfinite(value) or err > 1e-8 * value + 1e-300:
        raise NumericalError(
            f"mixture quadrature did not converge at N={total} "
            f"(value {value:.3g}, error {err:.3g})"
        )
    return value


def mixture_log_slope(params, window_rate, totals):
    """Least-squares slope of ln density vs ln N over a grid of totals."""
    totals = np.asarray(totals, dtype=np.float64)
    log_n = np.log(totals)
    log_density = np.array(
        [math.log(mixture_density(params, window_rate, n)) for n in totals]
    )
    slope, _ = np.polyfit(log_n, log_density, 1)
    return float(slope)


def winner_threshold(users, window_rate):
    """Minimum shared adoption probability for a heavy-tailed total distribution.

    Returns (2*rate + 2) / (users + 1), which always exceeds 1/users.
    """
    if users < 1:
        raise ConfigError("need at least one user")
    if not window_rate > 0.0:
        raise ConfigError("window rate must be positive")
    return (2.0 * window_rate + 2.0) / (users + 1.0)


# ---------------------------------------------------------------------------
# Adoption-probability estimation from partially observed event logs.
# ---------------------------------------------------------------------------


class ObservedActions:
    """Event log plus directed follow graph, indexed for ratio estimation.

    Edges point from a user to the accounts it follows; exposure of user v is
    the adoption activity of v's out-neighbors.
    """

    def __init__(self, users, edges, events):
        self.users = set(users)
        self.out_neighbors = {u: set() for u in self.users}
        for src, dst in edges:
            if src not in self.users or dst not in self.users:
                raise ConfigError(f"edge ({src}, {dst}) references an unknown user")
            self.out_neighbors[src].add(dst)
        # adoption_counts[action][user] = number of +1 events
        self.adoption_counts: dict[str, dict[str, int]] = {}
        for ev in events:
            if ev.user not in self.users:
                raise ConfigError(f"event references unknown user {ev.user!r}")
            if ev.tick < 0:
                raise ConfigError("event ticks must be non-negative")
            if ev.value == 1:
                per_action = self.adoption_counts.setdefault(ev.action, {})
                per_action[ev.user] = per_action.get(ev.user, 0) + 1

    @property
    def actions(self):
        return sorted(self.adoption_counts)

    def adoptions(self, action, user):
        return self.adoption_counts.get(action, {}).get(user, 0)

    def exposure(self, action, user):
        counts = self.adoption_counts.get(action, {})
        return sum(counts.get(u, 0) for u in self.out_neighbors[user])


@dataclass(frozen=True)
class MuEstimate:
    """Ratio estimate of one user's adoption probability.

    ``exposed`` is False when the user's neighborhood showed no adoptions,
    in which case ``value`` is the configured floor.  ``clamped`` marks raw
    ratios above 1 that were cut back.
    """

    value: float
    exposed: bool
    clamped: bool = False


def estimate_mu(obs, action, user, floor=0.0):
    """Adoptions by the user divided by adoptions in its out-neighborhood."""
    if user not in obs.users:
        raise ConfigError(f"unknown user {user!r}")
    num = obs.adoptions(action, user)
    den = obs.exposure(action, user)
    if den == 0:
        return MuEstimate(value=floor, exposed=False)
    ratio = num / den
    if ratio > 1.0:
        return MuEstimate(value=1.0, exposed=True, clamped=True)
    return MuEstimate(value=ratio, exposed=True)


def estimate_individual_model(obs, actions=None, floor=0.0):
    """Estimate the whole probability vector, pooling counts over actions.

    Returns (model, stats) where stats counts clamped and unexposed users.
    """
    from .simulator import IndividualModel

    if actions is None:
        actions = obs.actions
    users = sorted(obs.users)
    values = np.empty(len(users))
    clamped = 0
    unexposed = 0
    for i, user in enumerate(users):
        num = sum(obs.adoptions(a, user) for a in actions)
        den = sum(obs.exposure(a, user) for a in actions)
        if den == 0:
            values[i] = floor
            unexposed += 1
        else:
            ratio = num / den
            if ratio > 1.0:
                ratio = 1.0
                clamped += 1
            values[i] = ratio
    model = IndividualModel(values, user_ids=users)
    return model, {"clamped": clamped, "unexposed": unexposed}


# ---------------------------------------------------------------------------
# Upward/downward factor estimation from a trajectory and its tallies.
# ---------------------------------------------------------------------------


def _pair_solve(d1, a1, b1, d2, a2, b2):
    # Two-equation linear system in (ln up, ln down):
    #   a_i * ln_up - b_i * ln_down = d_i
    det = a2 * b1 - a1 * b2  # exact in integer tally arithmetic
    if det == 0:
        raise DegeneratePairError(
            f"proportional tallies ({a1},{b1}) and ({a2},{b2})"
        )
    log_up = (d2 * b1 - d1 * b2) / det
    log_down = (a1 * d2 - a2 * d1) / det
    return log_up, log_down


def _transition_arrays(traj, tallies=None):
    if tallies is None:
        tallies = traj.tallies
    if tallies is None:
        raise EstimationError("trajectory carries no tallies and none were given")
    deltas = traj.log_increments()
    n = min(len(deltas), len(tallies))
    adopters = np.array([t.adopters for t in tallies[:n]], dtype=np.float64)
    non_adopters = np.array([t.non_adopters for t in tallies[:n]], dtype=np.float64)
    return deltas[:n], adopters, non_adopters


def estimate_factors_pair(traj, t1, t2, tallies=None):
    """Invert the group update from two transitions starting at ticks t1, t2."""
    if t1 == t2:
        raise ConfigError("the two ticks must differ")
    deltas, adopters, non_adopters = _transition_arrays(traj, tallies)
    for t in (t1, t2):
        if not 0 <= t < len(deltas):
            raise ConfigError(f"tick {t} has no following transition in the trajectory")
    log_up, log_down = _pair_solve(
        deltas[t1], adopters[t1], non_adopters[t1],
        deltas[t2], adopters[t2], non_adopters[t2],
    )
    return FactorPair(up=math.exp(log_up), down=math.exp(log_down))


@dataclass
class FactorEstimate:
    """Averaged factor estimate with bookkeeping about skipped pairs."""

    factors: FactorPair
    pairs_used: int
    pairs_skipped: int


def estimate_factors(traj, window=None, tallies=None):
    """Average the pairwise factor solutions over every usable tick pair.

    ``window`` limits estimation to the first `window` transitions (the
    training prefix).  Degenerate pairs are skipped and counted; if none are
    usable the estimation fails.
    """
    deltas, adopters, non_adopters = _transition_arrays(traj, tallies)
    if window is not None:
        deltas = deltas[:window]
        adopters = adopters[:window]
        non_adopters = non_adopters[:window]
    n = len(deltas)
    if n < 2:
        raise EstimationError("need at least two transitions to estimate factors")

    idx1, idx2 = np.array(list(combinations(range(n), 2))).T
    det = adopters[idx2] * non_adopters[idx1] - adopters[idx1] * non_adopters[idx2]
    usable = det != 0.0
    skipped = int(np.count_nonzero(~usable))
    if not np.any(usable):
        raise EstimationError("all tick pairs are degenerate")

    i1, i2, d = idx1[usable], idx2[usable], det[usable]
    log_up = (deltas[i2] * non_adopters[i1] - deltas[i1] * non_adopters[i2]) / d
    log_down = (adopters[i1] * deltas[i2] - adopters[i2] * deltas[i1]) / d
    factors = FactorPair(
        up=float(np.mean(np.exp(log_up))),
        down=float(np.mean(np.exp(log_down))),
    )
    return FactorEstimate(factors=factors, pairs_used=int(len(d)), pairs_skipped=skipped)


def predict_group_next(n_current, tally, factors):
    """One-step-ahead group count under estimated factors (the group update itself)."""
    from .simulator import step_group

    return step_group(n_current, tally, factors)


def predict_log_counts(log_start, tallies, factors, weights=None):
    """Iterate the update in log space over a test window of tallies."""
    out = np.empty(len(tallies))
    log_n = log_start
    for i, tally in enumerate(tallies):
        w = 1.0 if weights is None else weights[i]
        log_n = log_step(log_n, tally, factors, w)
        out[i] = log_n
    return out
