"""File formats and synthetic corpora.

All formats are delimited text with headers or line-delimited JSON:

* events:        ``action_id,user_id,tick,value`` (CSV; the value column may
                 be omitted entirely, in which case every row is an adoption
                 and absence of a row means non-adoption)
* edges:         ``src,dst`` (CSV, directed: src follows dst)
* trajectories:  one JSON object per line with ``action_id``, ``t0``,
                 ``counts``, ``total`` plus exact ``log_counts``,
                 ``step_weights``, ``duration`` and optional ``tallies``
* sidecar:       single JSON object of ground-truth parameters
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .burst import detect_bursts
from .errors import ConfigError, DataFormatError, OverflowTickError
from .fitting import geometric_bin_edges
from .simulator import (
    _STREAM_ACTION,
    _STREAM_CORPUS,
    FactorPair,
    GroupTrajectory,
    TickTally,
    _draw_duration,
    substream,
)


@dataclass(frozen=True)
class EventRecord:
    tick: int
    user: str
    action: str
    value: int


@dataclass(frozen=True)
class EdgeRecord:
    src: str
    dst: str


@dataclass
class EventLog:
    records: list[EventRecord]
    adoption_only: bool
    duplicates_dropped: int = 0


@dataclass
class EdgeList:
    edges: list[EdgeRecord]
    self_loops_dropped: int = 0
    duplicates_dropped: int = 0

    @property
    def users(self):
        seen = set()
        for e in self.edges:
            seen.add(e.src)
            seen.add(e.dst)
        return seen


def _open_text(source):
    if isinstance(source, (str, Path)):
        return open(source, "r", newline="")
    return io.StringIO(source.read()) if hasattr(source, "read") else source


def parse_event_log(source):
    """Parse an event CSV; duplicate (action, user, tick) keys keep the last row."""
    fh = _open_text(source)
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError("empty file: header row required") from None
        header = [h.strip() for h in header]
        if header == ["action_id", "user_id", "tick", "value"]:
            adoption_only = False
        elif header == ["action_id", "user_id", "tick"]:
            adoption_only = True
        else:
            raise DataFormatError(f"unexpected header {header}", line=1)
        by_key: dict[tuple, EventRecord] = {}
        duplicates = 0
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            expected = 3 if adoption_only else 4
            if len(row) != expected:
                raise DataFormatError(f"expected {expected} columns, got {len(row)}", line=lineno)
            action, user = row[0].strip(), row[1].strip()
            if not action or not user:
                raise DataFormatError("empty action or user id", line=lineno)
            try:
                tick = int(row[2])
            except ValueError:
                raise DataFormatError(f"bad tick {row[2]!r}", line=lineno) from None
            if tick < 0:
                raise DataFormatError(f"negative tick {tick}", line=lineno)
            if adoption_only:
                value = 1
            else:
                try:
                    value = int(row[3])
                except ValueError:
                    raise DataFormatError(f"bad value {row[3]!r}", line=lineno) from None
                if value not in (1, -1):
                    raise DataFormatError(f"value must be +1 or -1, got {value}", line=lineno)
            key = (action, user, tick)
            if key in by_key:
                duplicates += 1
            by_key[key] = EventRecord(tick=tick, user=user, action=action, value=value)
        return EventLog(
            records=list(by_key.values()),
            adoption_only=adoption_only,
            duplicates_dropped=duplicates,
        )


def parse_edge_list(source):
    """Parse a directed edge CSV; duplicates and self-loops are dropped with counts."""
    fh = _open_text(source)
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError("empty file: header row required") from None
        if [h.strip() for h in header] != ["src", "dst"]:
            raise DataFormatError(f"unexpected header {header}", line=1)
        seen = set()
        edges = []
        loops = 0
        duplicates = 0
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataFormatError(f"expected 2 columns, got {len(row)}", line=lineno)
            src, dst = row[0].strip(), row[1].strip()
            if not src or not dst:
                raise DataFormatError("empty user id", line=lineno)
            if src == dst:
                loops += 1
                continue
            if (src, dst) in seen:
                duplicates += 1
                continue
            seen.add((src, dst))
            edges.append(EdgeRecord(src=src, dst=dst))
        return EdgeList(edges=edges, self_loops_dropped=loops, duplicates_dropped=duplicates)


def write_event_log(path, records, adoption_only=True):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if adoption_only:
            writer.writerow(["action_id", "user_id", "tick"])
            for r in records:
                if r.value == 1:
                    writer.writerow([r.action, r.user, r.tick])
        else:
            writer.writerow(["action_id", "user_id", "tick", "value"])
            for r in records:
                writer.writerow([r.action, r.user, r.tick, r.value])


def write_edge_list(path, edges):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["src", "dst"])
        for e in edges:
            writer.writerow([e.src, e.dst])


# ---------------------------------------------------------------------------
# Trajectory serialization (line-delimited JSON).
# ---------------------------------------------------------------------------


def trajectory_to_record(traj):
    traj.check_exportable()  # the linear count fields cannot hold inf
    record = {
        "action_id": traj.action_id,
        "t0": traj.t0,
        "counts": [float(c) for c in np.exp(traj.log_counts)],
        "total": traj.total,
        "duration": traj.duration,
        "log_counts": [float(v) for v in traj.log_counts],
        "step_weights": [float(w) for w in traj.step_weights],
    }
    if traj.tallies is not None:
        record["tallies"] = [[t.adopters, t.non_adopters] for t in traj.tallies]
    return record


def trajectory_from_record(record, lineno=None):
    try:
        if "log_counts" in record:
            log_counts = np.asarray(record["log_counts"], dtype=np.float64)
        else:
            counts = np.asarray(record["counts"], dtype=np.float64)
            if np.any(counts <= 0.0):
                raise DataFormatError("counts must be positive", line=lineno)
            log_counts = np.log(counts)
        tallies = None
        if record.get("tallies") is not None:
            tallies = [
                TickTally(tick=i + 1, adopters=int(a), non_adopters=int(b))
                for i, (a, b) in enumerate(record["tallies"])
            ]
        weights = record.get("step_weights")
        return GroupTrajectory(
            action_id=str(record["action_id"]),
            log_counts=log_counts,
            duration=float(record.get("duration", len(log_counts) - 1)),
            step_weights=None if weights is None else np.asarray(weights, dtype=np.float64),
            t0=int(record.get("t0", 0)),
            tallies=tallies,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"bad trajectory record: {exc}", line=lineno) from None


def write_trajectories(path, trajectories, on_overflow="error"):
    """Write line-delimited trajectory records.

    ``on_overflow`` chooses between raising on the first trajectory whose
    linear counts exceed the float range ("error") or skipping it ("skip");
    skipped (action_id, message) pairs are returned either way.
    """
    if on_overflow not in ("error", "skip"):
        raise ConfigError("on_overflow must be 'error' or 'skip'")
    skipped = []
    with open(path, "w", newline="") as fh:
        for traj in trajectories:
            try:
                record = trajectory_to_record(traj)
            except OverflowTickError as exc:
                if on_overflow == "error":
                    raise
                skipped.append((traj.action_id, str(exc)))
                continue
            fh.write(json.dumps(record) + "\n")
    return skipped


def read_trajectories(path):
    out = []
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"bad JSON: {exc}", line=lineno) from None
            out.append(trajectory_from_record(record, lineno))
    return out


def write_json(path, obj):
    with open(path, "w", newline="") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path, "r") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# Synthetic corpora.
# ---------------------------------------------------------------------------


@dataclass
class CorpusPaths:
    root: Path
    events: Path
    edges: Path
    trajectories: Path
    mu: Path
    truth: Path


SCENARIOS = ("homogeneous", "heterogeneous", "burst-injected")


def _random_graph(users, out_degree, rng):
    """Each user follows ``out_degree`` distinct others (no self-loops)."""
    edges = []
    m = len(users)
    if out_degree >= m:
        raise ConfigError("out_degree must be smaller than the user count")
    for i, u in enumerate(users):
        others = rng.choice(m - 1, size=out_degree, replace=False)
        for o in others:
            j = int(o) + (1 if int(o) >= i else 0)
            edges.append(EdgeRecord(src=u, dst=users[j]))
    return edges


def write_mu(path, users, mu):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["user_id", "mu"])
        for u, value in zip(users, mu):
            writer.writerow([u, repr(float(value))])


def read_mu(path):
    users, values = [], []
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != ["user_id", "mu"]:
            raise DataFormatError(f"unexpected header {header}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataFormatError("expected 2 columns", line=lineno)
            users.append(row[0])
            try:
                values.append(float(row[1]))
            except ValueError:
                raise DataFormatError(f"bad probability {row[1]!r}", line=lineno) from None
    return users, np.asarray(values)


def _simulate_with_events(config, model, users, action_index, action_id):
    """Tick loop identical to simulate_action, with per-user adoption events kept.

    Consumes the RNG stream exactly like the simulator (duration first, one
    uniform vector per tick), so trajectories regenerate bit-identically from
    the sidecar seed.
    """
    rng = substream(config.seed, _STREAM_ACTION, action_index)
    duration = _draw_duration(rng, config.window_rate, config.max_ticks)
    full = int(math.floor(duration))
    frac = duration - full
    n_steps = full + (1 if frac > 0.0 else 0)

    log_counts = np.zeros(n_steps + 1)
    weights = np.ones(n_steps)
    tallies = []
    events = []
    log_n = 0.0
    for step in range(1, n_steps + 1):
        weight = 1.0 if step <= full else frac
        mask = rng.random(model.size) < model.mu
        adopters = int(np.count_nonzero(mask))
        tally = TickTally(tick=step, adopters=adopters, non_adopters=model.size - adopters)
        log_n += weight * (
            tally.adopters * config.factors.log_up
            - tally.non_adopters * config.factors.log_down
        )
        log_counts[step] = log_n
        weights[step - 1] = weight
        tallies.append(tally)
        for idx in np.nonzero(mask)[0]:
            events.append(EventRecord(tick=step, user=users[idx], action=action_id, value=1))
    traj = GroupTrajectory(
        action_id=action_id,
        log_counts=log_counts,
        duration=duration,
        step_weights=weights,
        tallies=tallies,
    )
    return traj, events


def _burst_injected_action(users, action_index, seed, ticks, radius, spacing):
    """Craft a trajectory whose upward factor spikes two ticks before each count peak.

    Tallies alternate between a low and a high adopter count (jittered), so
    every adjacent transition pair is well-conditioned.  Per-tick upward
    factors are derived from target log increments: a slow sawtooth baseline,
    a large spike followed by two small rises (the burst peak), then a forced
    decline.
    """
    m = len(users)
    rng = substream(seed, _STREAM_CORPUS, 100 + action_index)
    lo, hi = round(0.2 * m), round(0.3 * m)
    log_down = 0.2 / m

    # Target per-step log increments: a gently decaying sawtooth baseline,
    # spike episodes whose decline gives back only half of the jump (so count
    # levels staircase upward and are not comparable across episodes).
    increments = np.where(np.arange(1, ticks + 1) % 2 == 0, 0.03, -0.05)
    spike_ticks = []
    t = spacing + int(rng.integers(0, 5))
    while t + 8 + radius < ticks:
        t += t % 2  # spike lands on a high-tally tick, keeping blends one-sided
        spike_ticks.append(t)
        size = 2.0 + 0.4 * float(rng.random())
        increments[t - 1] = size          # step into tick t
        increments[t] = 0.10              # rise
        increments[t + 1] = 0.06          # rise; peak lands at tick t + 2
        increments[t + 2 : t + 5] = -0.35
        t += spacing + int(rng.integers(0, 7))

    adopters = np.where(np.arange(1, ticks + 1) % 2 == 0, hi, lo)
    adopters = adopters + rng.integers(-2, 3, size=ticks)
    adopters = np.clip(adopters, 1, m - 1)

    log_counts = np.concatenate([[0.0], np.cumsum(increments)])
    tallies = []
    events = []
    log_ups = np.empty(ticks)
    offset = 0
    action_id = f"a{action_index}"
    for step in range(1, ticks + 1):
        y_plus = int(adopters[step - 1])
        y_minus = m - y_plus
        # Upward factor that realizes the target increment at this tally.
        log_up = (increments[step - 1] + y_minus * log_down) / y_plus
        log_ups[step - 1] = log_up
        tallies.append(TickTally(tick=step, adopters=y_plus, non_adopters=y_minus))
        for i in range(y_plus):
            events.append(
                EventRecord(tick=step, user=users[(offset + i) % m], action=action_id, value=1)
            )
        offset = (offset + y_plus) % m
    traj = GroupTrajectory(
        action_id=action_id,
        log_counts=log_counts,
        duration=float(ticks),
        step_weights=np.ones(ticks),
        tallies=tallies,
    )
    burst_ticks = [int(i) for i in np.nonzero(detect_bursts(traj, radius).labels)[0]]
    truth = {
        "spike_ticks": [int(s) for s in spike_ticks],
        "burst_ticks": burst_ticks,
        "log_up_series": [float(v) for v in log_ups],
        "log_down": log_down,
    }
    return traj, events, truth


def synth_corpus(
    out_dir,
    scenario,
    users=100,
    actions=200,
    seed=0,
    window_rate=0.1,
    max_ticks=200,
    p=0.3,
    mu_range=(0.0, 0.1),
    factors=None,
    out_degree=5,
    ticks=240,
    radius=5,
    spacing=30,
    tick_duration="10min",
):
    """Write a self-consistent corpus (edges, events, mu, trajectories, sidecar)."""
    from .estimators import micro_to_meso
    from .simulator import IndividualModel, SimulationConfig

    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; pick one of {SCENARIOS}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = CorpusPaths(
        root=out_dir,
        events=out_dir / "events.csv",
        edges=out_dir / "edges.csv",
        trajectories=out_dir / "trajectories.jsonl",
        mu=out_dir / "mu.csv",
        truth=out_dir / "truth.json",
    )
    user_ids = [f"u{i}" for i in range(users)]
    graph_rng = substream(seed, _STREAM_CORPUS, 0)
    edges = _random_graph(user_ids, out_degree, graph_rng)

    truth = {
        "scenario": scenario,
        "seed": seed,
        "users": users,
        "actions": actions,
        "tick_duration": tick_duration,
    }
    all_events = []
    trajectories = []

    if scenario in ("homogeneous", "heterogeneous"):
        if factors is None:
            factors = FactorPair(up=math.e, down=1.0)
        if scenario == "homogeneous":
            mu = np.full(users, float(p))
        else:
            low, high = mu_range
            mu = substream(seed, _STREAM_CORPUS, 1).uniform(low, high, size=users)
        model = IndividualModel(mu, user_ids=user_ids)
        config = SimulationConfig(
            users=users,
            factors=factors,
            window_rate=window_rate,
            max_ticks=max_ticks,
            actions=actions,
            seed=seed,
            mu=mu,
            record_tallies=True,
        )
        overflowed = []
        for i in range(actions):
            traj, events = _simulate_with_events(config, model, user_ids, i, f"a{i}")
            try:
                # Drop the whole action when its linear counts cannot be
                # written, so events and trajectories stay in step.
                traj.check_exportable()
            except OverflowTickError:
                overflowed.append(traj.action_id)
                continue
            trajectories.append(traj)
            all_events.extend(events)
        params = micro_to_meso(model)
        truth.update(
            {
                "window_rate": window_rate,
                "max_ticks": max_ticks,
                "up": factors.up,
                "down": factors.down,
                "tau": params.drift,
                "delta_sq": params.variance,
                "overflowed": overflowed,
            }
        )
    else:
        mu = np.full(users, 0.25)  # nominal; burst tallies are crafted, not drawn
        per_action = []
        for i in range(actions):
            traj, events, action_truth = _burst_injected_action(
                user_ids, i, seed, ticks, radius, spacing
            )
            trajectories.append(traj)
            all_events.extend(events)
            per_action.append({"action_id": traj.action_id, **action_truth})
        truth.update({"radius": radius, "ticks": ticks, "actions_truth": per_action})

    write_mu(paths.mu, user_ids, mu)
    write_edge_list(paths.edges, edges)
    write_event_log(paths.events, all_events, adoption_only=True)
    write_trajectories(paths.trajectories, trajectories)
    write_json(paths.truth, truth)
    return paths


def write_burst_dataset(path, dataset):
    """Persist a windowed burst dataset with named feature columns."""
    k = dataset.window
    columns = [f"{dataset.kind}_lag{k - 1 - j}" for j in range(k)]
    with open(path, "w", newline="") as fh:
        fh.write("action_id,tick," + ",".join(columns) + ",label\n")
        for (action, tick), row, label in zip(
            dataset.row_index, dataset.features, dataset.labels
        ):
            values = ",".join(repr(float(v)) for v in row)
            fh.write(f"{action},{tick},{values},{int(label)}\n")
    return path


# ---------------------------------------------------------------------------
# Plot-point exports (two-column delimited text).
# ---------------------------------------------------------------------------


PLOT_KINDS = ("pdf-loglog", "ccdf-loglog", "qq", "trajectory")


def export_plot_points(path, kind, data, x_min=None):
    """Write two-column numeric points for external plotting tools.

    pdf-loglog: (geometric bin center, empirical density) using ratio-2 bins;
    ccdf-loglog: (value, fraction >= value); qq: (theoretical, empirical)
    from a QQPoints; trajectory: (tick, count) from a GroupTrajectory.
    """
    if kind not in PLOT_KINDS:
        raise ConfigError(f"unknown plot kind {kind!r}; pick one of {PLOT_KINDS}")
    rows = []
    if kind == "trajectory":
        grid = list(range(data.full_ticks + 1))
        if len(data.log_counts) > data.full_ticks + 1:
            grid.append(data.duration)
        for t, log_c in zip(grid, data.log_counts):
            rows.append((t, math.exp(log_c)))
    elif kind == "qq":
        rows = list(zip(data.theoretical, data.empirical))
    else:
        samples = np.asarray(data, dtype=np.float64)
        if samples.size == 0:
            raise ConfigError("no samples to export")
        if kind == "ccdf-loglog":
            values = np.unique(samples)
            n = samples.size
            for v in values:
                rows.append((v, float(np.count_nonzero(samples >= v)) / n))
        else:
            if x_min is None:
                x_min = float(np.min(samples))
            tail = samples[samples >= x_min]
            if tail.size == 0:
                raise ConfigError("no samples at or above x_min")
            edges = geometric_bin_edges(x_min, float(np.max(tail)))
            counts, _ = np.histogram(tail, bins=edges)
            widths = np.diff(edges)
            centers = np.sqrt(edges[:-1] * edges[1:])
            density = counts / tail.size / widths
            for c, d, k in zip(centers, density, counts):
                if k > 0:
                    rows.append((c, d))
    if not rows:
        raise ConfigError("nothing to export")
    with open(path, "w", newline="") as fh:
        for x, y in rows:
            fh.write(f"{_fmt(x)},{_fmt(y)}\n")
    return path


def _fmt(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))
