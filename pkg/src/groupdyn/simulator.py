"""Group-behavior simulator.

Individual users act as independent Bernoulli variables at every tick; the
group count evolves multiplicatively: each adopter multiplies the count by
the upward factor, each non-adopter divides it by the downward factor.
Observation windows are exponentially distributed, so an ensemble of actions
mixes trajectories of random durations.

All counts are carried as natural logs internally; linear counts only appear
on export, so trajectories survive log-count scales of several hundred.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, OverflowTickError

# Largest log count whose exponential is still a finite float64.
LOG_COUNT_MAX = math.log(np.finfo(np.float64).max)

# Purpose tags for deriving independent substreams from one seed.
_STREAM_MU = 0
_STREAM_ACTION = 1
_STREAM_BOOT = 2
_STREAM_CORPUS = 3


def substream(seed, purpose, index=0):
    """Deterministic, order-independent child RNG keyed by (seed, purpose, index)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(purpose, index))
    return np.random.default_rng(ss)


@dataclass(frozen=True)
class FactorPair:
    """Multiplicative influence coefficients (both strictly positive)."""

    up: float
    down: float

    def __post_init__(self):
        if not (self.up > 0.0 and self.down > 0.0):
            raise ConfigError(f"factors must be positive, got ({self.up}, {self.down})")

    @property
    def log_up(self):
        return math.log(self.up)

    @property
    def log_down(self):
        return math.log(self.down)


@dataclass
class IndividualModel:
    """Per-user adoption probabilities over the observed user set."""

    mu: np.ndarray
    user_ids: list[str] | None = None

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        if self.mu.ndim != 1 or self.mu.size == 0:
            raise ConfigError("individual model needs a non-empty 1-d probability vector")
        if np.any(self.mu < 0.0) or np.any(self.mu > 1.0):
            raise ConfigError("adoption probabilities must lie in [0, 1]")
        if self.user_ids is not None and len(self.user_ids) != self.mu.size:
            raise ConfigError("user id list does not match the probability vector")

    @property
    def size(self):
        return int(self.mu.size)

    @classmethod
    def homogeneous(cls, users, p):
        return cls(np.full(users, float(p)))

    @classmethod
    def uniform(cls, users, low, high, rng):
        if not (0.0 <= low <= high <= 1.0):
            raise ConfigError(f"uniform range ({low}, {high}) must sit inside [0, 1]")
        return cls(rng.uniform(low, high, size=users))


@dataclass(frozen=True)
class TickTally:
    """Outcome of one tick: how many users adopted and how many did not."""

    tick: int
    adopters: int
    non_adopters: int

    def __post_init__(self):
        if self.adopters < 0 or self.non_adopters < 0:
            raise ConfigError("tally counts must be non-negative")

    @property
    def users(self):
        return self.adopters + self.non_adopters


@dataclass
class GroupTrajectory:
    """One action's group-count series.

    ``log_counts[i]`` is ln n at the i-th grid point.  Grid points are the
    integer ticks 0..floor(duration) plus, when the duration is fractional,
    a final point at t = duration whose step is weighted pro rata.
    """

    action_id: str
    log_counts: np.ndarray
    duration: float
    step_weights: np.ndarray = None
    t0: int = 0
    tallies: list[TickTally] | None = None

    def __post_init__(self):
        self.log_counts = np.asarray(self.log_counts, dtype=np.float64)
        if self.step_weights is None:
            self.step_weights = np.ones(len(self.log_counts) - 1)
        self.step_weights = np.asarray(self.step_weights, dtype=np.float64)

    @property
    def counts(self):
        """Linear counts at the grid points (inf where the float range ends)."""
        with np.errstate(over="ignore"):
            return np.exp(self.log_counts)

    def check_exportable(self):
        """Raise OverflowTickError if the linear counts or total exceed float range."""
        over = np.nonzero(self.log_counts > LOG_COUNT_MAX)[0]
        if over.size:
            tick = int(over[0])
            raise OverflowTickError(self.action_id, tick, float(self.log_counts[tick]))
        if self.log_total > LOG_COUNT_MAX:  # the sum can overflow before any count does
            tick = int(np.argmax(self.log_counts))
            raise OverflowTickError(self.action_id, tick, self.log_total)

    @property
    def full_ticks(self):
        """Number of whole ticks simulated (grid indices 0..full_ticks are integers)."""
        return int(math.floor(self.duration + 1e-12))

    @property
    def log_total(self):
        """ln of the cumulative total N = sum of counts over the grid."""
        m = float(np.max(self.log_counts))
        return m + math.log(np.sum(np.exp(self.log_counts - m)))

    @property
    def total(self):
        return math.exp(self.log_total)

    @classmethod
    def from_counts(cls, counts, action_id="action", tallies=None):
        """Build a whole-tick trajectory from linear counts."""
        counts = np.asarray(counts, dtype=np.float64)
        if np.any(counts <= 0.0):
            raise ConfigError("counts must be positive")
        return cls(
            action_id=action_id,
            log_counts=np.log(counts),
            duration=float(len(counts) - 1),
            tallies=tallies,
        )

    def log_count_at(self, tick):
        """ln n at an integer tick; raises if the trajectory is too short."""
        if not 0 <= tick <= self.full_ticks:
            raise IndexError(f"tick {tick} outside simulated range 0..{self.full_ticks}")
        return float(self.log_counts[tick])

    def log_increments(self):
        """Per-step log increments normalized by step weight."""
        return np.diff(self.log_counts) / self.step_weights


@dataclass
class SimulationConfig:
    """Everything needed to simulate an ensemble of actions.

    Exactly one of ``mu`` (explicit vector), ``p`` (shared scalar) or
    ``mu_range`` (uniform sampling bounds) selects the individual model.
    """

    users: int
    factors: FactorPair
    window_rate: float
    max_ticks: int
    actions: int = 1
    seed: int = 0
    mu: np.ndarray | None = None
    p: float | None = None
    mu_range: tuple[float, float] | None = None
    record_tallies: bool = False

    def __post_init__(self):
        if self.users < 1:
            raise ConfigError("need at least one user")
        if not self.window_rate > 0.0:
            raise ConfigError("window rate must be positive")
        if self.max_ticks < 1:
            raise ConfigError("max_ticks must be at least 1")
        if self.actions < 1:
            raise ConfigError("ensemble size must be at least 1")
        sources = sum(x is not None for x in (self.mu, self.p, self.mu_range))
        if sources != 1:
            raise ConfigError("exactly one of mu, p, mu_range must be given")

    def resolve_model(self):
        """Materialize the individual model (uniform ranges use a dedicated substream)."""
        if self.mu is not None:
            model = IndividualModel(np.asarray(self.mu, dtype=np.float64))
            if model.size != self.users:
                raise ConfigError("mu vector length does not match user count")
            return model
        if self.p is not None:
            if not 0.0 <= self.p <= 1.0:
                raise ConfigError("p must lie in [0, 1]")
            return IndividualModel.homogeneous(self.users, self.p)
        low, high = self.mu_range
        return IndividualModel.uniform(self.users, low, high, substream(self.seed, _STREAM_MU))


@dataclass
class EnsembleResult:
    """Successful trajectories plus the ids of actions that overflowed."""

    trajectories: list[GroupTrajectory]
    failures: list[tuple[str, str]] = field(default_factory=list)

    def log_totals(self):
        return np.array([t.log_total for t in self.trajectories])

    def log_counts_at(self, tick):
        """ln n(tick) across all trajectories that reached that integer tick."""
        vals = [t.log_count_at(tick) for t in self.trajectories if t.full_ticks >= tick]
        return np.array(vals)


def draw_tick(model, rng, tick=0):
    """Draw one tick: every user adopts independently with its own probability."""
    adopters = int(np.count_nonzero(rng.random(model.size) < model.mu))
    return TickTally(tick=tick, adopters=adopters, non_adopters=model.size - adopters)


def log_step(log_n, tally, factors, weight=1.0):
    """Log-space group update; ``weight`` pro-rates a partial observation interval."""
    return log_n + weight * (
        tally.adopters * factors.log_up - tally.non_adopters * factors.log_down
    )


def step_group(n_prev, tally, factors):
    """Advance the group count one tick: n * up^adopters / down^non_adopters.

    Computed in log space; raises OverflowTickError when the result is not a
    finite positive float.
    """
    if not n_prev > 0.0:
        raise ConfigError(f"previous count must be positive, got {n_prev}")
    increment = tally.adopters * factors.log_up - tally.non_adopters * factors.log_down
    if increment == 0.0:
        return n_prev  # exact identity, no log/exp roundtrip
    log_next = math.log(n_prev) + increment
    if not math.isfinite(log_next) or log_next > LOG_COUNT_MAX:
        raise OverflowTickError("<direct>", tally.tick, log_next)
    return math.exp(log_next)


def _draw_duration(rng, window_rate, max_ticks):
    # Continuous duration, rounded up to at least one whole tick and capped at
    # max_ticks; a fractional remainder becomes a pro-rated final step.
    t = rng.exponential(scale=1.0 / window_rate)
    return max(min(t, float(max_ticks)), 1.0)


def simulate_action(config, action_index=0, model=None, rng=None, action_id=None):
    """Simulate one action's trajectory from n(0) = 1.

    The RNG stream is derived from (seed, action_index) unless one is passed,
    so ensemble members are independent of execution order.
    """
    if model is None:
        model = config.resolve_model()
    if rng is None:
        rng = substream(config.seed, _STREAM_ACTION, action_index)
    if action_id is None:
        action_id = f"a{action_index}"

    duration = _draw_duration(rng, config.window_rate, config.max_ticks)
    full = int(math.floor(duration))
    frac = duration - full
    n_steps = full + (1 if frac > 0.0 else 0)

    log_counts = np.empty(n_steps + 1)
    weights = np.ones(n_steps)
    log_counts[0] = 0.0
    tallies = [] if config.record_tallies else None

    log_n = 0.0
    for step in range(1, n_steps + 1):
        weight = 1.0 if step <= full else frac
        tally = draw_tick(model, rng, tick=step)
        log_n = log_step(log_n, tally, config.factors, weight)
        # Counts live in log space, so only a non-finite log count is fatal
        # here; linear-range overflow is checked on export.
        if not math.isfinite(log_n):
            raise OverflowTickError(action_id, step, log_n)
        log_counts[step] = log_n
        weights[step - 1] = weight
        if tallies is not None:
            tallies.append(tally)

    return GroupTrajectory(
        action_id=action_id,
        log_counts=log_counts,
        duration=duration,
        step_weights=weights,
        tallies=tallies,
    )


def _simulate_range(config, model, indices):
    out = []
    for i in indices:
        try:
            out.append((i, simulate_action(config, i, model=model), None))
        except OverflowTickError as exc:
            out.append((i, None, str(exc)))
    return out


def simulate_ensemble(config, threads=None):
    """Simulate every action in the config.

    Per-action failures (overflow) are collected, not raised; results are
    merged in action order, so the thread count never changes the output.
    """
    model = config.resolve_model()
    indices = range(config.actions)

    if threads is None or threads <= 1 or config.actions == 1:
        results = _simulate_range(config, model, indices)
    else:
        chunks = np.array_split(np.asarray(indices), min(threads, config.actions))
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = pool.map(lambda c: _simulate_range(config, model, c), chunks)
        results = [item for part in parts for item in part]

    results.sort(key=lambda item: item[0])
    trajectories = [traj for _, traj, _ in results if traj is not None]
    failures = [(f"a{i}", err) for i, _, err in results if err is not None]
    return EnsembleResult(trajectories=trajectories, failures=failures)
