"""Burst labeling and one-step-ahead burst prediction.

A burst is a tick whose count strictly exceeds every other count within a
+-radius window (truncated at the series boundaries).  Prediction builds
sliding-window feature rows, either raw counts or per-tick upward-factor
estimates, and trains an L2-regularized logistic regression by gradient
descent with backtracking line search.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import ConfigError, DegeneratePairError, EstimationError, TrainingError
from .estimators import _pair_solve, _transition_arrays


@dataclass
class BurstLabelSeries:
    action_id: str
    labels: np.ndarray
    radius: int


def _strict_window_max_labels(counts, radius):
    n = counts.size
    neighbor_max = np.full(n, -np.inf)
    for off in range(1, radius + 1):
        shifted = np.full(n, -np.inf)
        shifted[off:] = counts[:-off]  # value `off` ticks earlier
        neighbor_max = np.maximum(neighbor_max, shifted)
        shifted = np.full(n, -np.inf)
        shifted[:-off] = counts[off:]  # value `off` ticks later
        neighbor_max = np.maximum(neighbor_max, shifted)
    return counts > neighbor_max


def detect_bursts(traj, radius):
    """Label every integer tick whose count is a strict local maximum.

    Windows are truncated at the boundaries, so an early or final peak is
    still labelable.  Requires more ticks than the window spans.
    """
    if radius < 1:
        raise ConfigError("radius must be at least 1")
    counts = traj.log_counts[: traj.full_ticks + 1]
    if counts.size <= 2 * radius:
        raise ConfigError(
            f"trajectory has {counts.size} ticks; need more than {2 * radius}"
        )
    # Strict comparisons are order-based, so log counts are equivalent to
    # linear counts and immune to overflow.
    labels = _strict_window_max_labels(counts, radius)
    return BurstLabelSeries(action_id=traj.action_id, labels=labels, radius=radius)


def upward_factor_series(traj, tallies=None, log_clip=30.0):
    """Per-tick upward-factor estimates from the two latest completed transitions.

    The value at tick t solves the two-transition system ending at ticks t-1
    and t, so it never looks past t.  Degenerate or unavailable ticks carry
    the previous value forward (neutral 1.0 before the first solvable tick).
    """
    deltas, adopters, non_adopters = _transition_arrays(traj, tallies)
    n_ticks = traj.full_ticks + 1
    out = np.ones(n_ticks)
    current = None
    first_solved = None
    for t in range(n_ticks):
        j1, j2 = t - 2, t - 1  # transition start indices feeding tick t
        if j1 >= 0 and j2 < len(deltas):
            try:
                log_up, _ = _pair_solve(
                    deltas[j1], adopters[j1], non_adopters[j1],
                    deltas[j2], adopters[j2], non_adopters[j2],
                )
                current = math.exp(max(-log_clip, min(log_clip, log_up)))
                if first_solved is None:
                    first_solved = (t, current)
            except DegeneratePairError:
                pass
        out[t] = current if current is not None else 1.0
    if first_solved is not None:
        out[: first_solved[0]] = first_solved[1]
    return out


@dataclass
class BurstDataset:
    """Windowed feature rows with one-step-ahead burst labels.

    Features are standardized per column; the transforms are stored so the
    same scaling can be applied to new rows.
    """

    features: np.ndarray
    labels: np.ndarray
    kind: str
    window: int
    radius: int
    feature_means: np.ndarray
    feature_scales: np.ndarray
    row_index: list[tuple[str, int]]
    skipped_rows: int


def build_dataset(trajectories, radius, window, kind="factor"):
    """Assemble feature rows over all trajectories.

    Row at (action, t) holds the ``window`` most recent per-tick values
    (upward factors or raw counts) and is labeled with whether tick t+1 is a
    burst.  Ticks without a full window of history are skipped and counted.
    """
    if window < 2:
        raise ConfigError("window must be at least 2")
    if kind not in ("factor", "count"):
        raise ConfigError(f"unknown feature kind {kind!r}")
    rows, labels, index = [], [], []
    skipped = 0
    for traj in trajectories:
        series = detect_bursts(traj, radius)
        n_ticks = traj.full_ticks + 1
        if kind == "factor":
            values = upward_factor_series(traj)
        else:
            values = np.exp(traj.log_counts[:n_ticks])
        for t in range(n_ticks - 1):
            if t - window + 1 < 0:
                skipped += 1
                continue
            rows.append(values[t - window + 1 : t + 1])
            labels.append(bool(series.labels[t + 1]))
            index.append((traj.action_id, t))
    if not rows:
        raise EstimationError("no trajectory is long enough for the requested window")
    features = np.asarray(rows, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    means = features.mean(axis=0)
    scales = features.std(axis=0)
    scales[scales == 0.0] = 1.0
    features = (features - means) / scales
    return BurstDataset(
        features=features,
        labels=labels,
        kind=kind,
        window=window,
        radius=radius,
        feature_means=means,
        feature_scales=scales,
        row_index=index,
        skipped_rows=skipped,
    )


# ---------------------------------------------------------------------------
# Logistic regression trained by gradient descent with backtracking.
# ---------------------------------------------------------------------------


@dataclass
class ClassifierModel:
    weights: np.ndarray
    bias: float
    l2: float
    iterations: int
    final_loss: float
    converged: bool
    loss_history: np.ndarray = field(repr=False, default=None)


def _loss_and_grad(features, targets, weights, bias, l2):
    z = features @ weights + bias
    # log(1 + e^z) - y*z, computed stably.
    loss = float(np.mean(np.logaddexp(0.0, z) - targets * z))
    loss += 0.5 * l2 * float(weights @ weights)
    p = expit(z)
    resid = (p - targets) / targets.size
    grad_w = features.T @ resid + l2 * weights
    grad_b = float(np.sum(resid))
    return loss, grad_w, grad_b


def logistic_gradient(features, targets, weights, bias, l2=0.0):
    """Analytic gradient of the regularized logistic loss (for verification)."""
    _, grad_w, grad_b = _loss_and_grad(features, targets, weights, bias, l2)
    return grad_w, grad_b


def logistic_loss(features, targets, weights, bias, l2=0.0):
    loss, _, _ = _loss_and_grad(features, targets, weights, bias, l2)
    return loss


def train_logreg(dataset, l2=1e-4, max_iter=2000, tol=1e-8, init=None):
    """Minimize the L2-regularized logistic loss by backtracking gradient descent.

    Accepts a BurstDataset or an (features, labels) tuple.  Training stops
    when the gradient norm drops below ``tol``; the bias is not regularized.
    """
    if isinstance(dataset, tuple):
        features, labels = dataset
    else:
        features, labels = dataset.features, dataset.labels
    targets = np.asarray(labels, dtype=np.float64)
    features = np.asarray(features, dtype=np.float64)
    if targets.min() == targets.max():
        raise TrainingError("training data contains a single class")

    if init is None:
        weights = np.zeros(features.shape[1])
        bias = 0.0
    else:
        weights = np.asarray(init[0], dtype=np.float64).copy()
        bias = float(init[1])

    loss, grad_w, grad_b = _loss_and_grad(features, targets, weights, bias, l2)
    history = [loss]
    step = 1.0
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        grad_sq = float(grad_w @ grad_w) + grad_b * grad_b
        if math.sqrt(grad_sq) < tol:
            converged = True
            iterations -= 1
            break
        step = min(step * 2.0, 1e4)
        while True:
            new_w = weights - step * grad_w
            new_b = bias - step * grad_b
            new_loss, new_gw, new_gb = _loss_and_grad(features, targets, new_w, new_b, l2)
            if new_loss <= loss - 1e-4 * step * grad_sq or step < 1e-18:
                break
            step *= 0.5
        weights, bias = new_w, new_b
        loss, grad_w, grad_b = new_loss, new_gw, new_gb
        history.append(loss)
    return ClassifierModel(
        weights=weights,
        bias=bias,
        l2=l2,
        iterations=iterations,
        final_loss=loss,
        converged=converged,
        loss_history=np.asarray(history),
    )


def predict_proba(model, features):
    z = np.asarray(features) @ model.weights + model.bias
    return expit(z)


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    accuracy: float


def evaluate(model, dataset, threshold=0.5):
    """Precision/recall/F1/accuracy at the fixed decision threshold."""
    if isinstance(dataset, tuple):
        features, labels = dataset
    else:
        features, labels = dataset.features, dataset.labels
    labels = np.asarray(labels, dtype=bool)
    predicted = predict_proba(model, features) >= threshold
    tp = int(np.sum(predicted & labels))
    fp = int(np.sum(predicted & ~labels))
    fn = int(np.sum(~predicted & labels))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall
        else 0.0
    )
    accuracy = float(np.mean(predicted == labels))
    return Metrics(precision=precision, recall=recall, f1=f1, accuracy=accuracy)


# ---------------------------------------------------------------------------
# Observation-window sweep.
# ---------------------------------------------------------------------------


@dataclass
class SweepEntry:
    window: int
    metrics: Metrics | None
    train_rows: int = 0
    test_rows: int = 0
    error: str | None = None


def chronological_split(dataset, train_frac=0.7):
    """Per-action time split: the earliest rows of each action train the model."""
    by_action: dict[str, list[int]] = {}
    for i, (action, _) in enumerate(dataset.row_index):
        by_action.setdefault(action, []).append(i)
    train_idx, test_idx = [], []
    for action, idx in by_action.items():
        cut = int(math.ceil(train_frac * len(idx)))
        train_idx.extend(idx[:cut])
        test_idx.extend(idx[cut:])
    return np.asarray(train_idx, dtype=int), np.asarray(test_idx, dtype=int)


def window_sweep(trajectories, radius, windows, kind="factor", train_frac=0.7, l2=1e-4):
    """Train and score one model per observation-window length.

    Duplicate window values are dropped (first occurrence wins).  Failures for
    individual windows are recorded in the corresponding entry and the sweep
    continues.
    """
    seen = []
    for w in windows:
        if w not in seen:
            seen.append(w)
    if len(seen) < len(list(windows)):
        warnings.warn("duplicate window values were dropped", stacklevel=2)
    if len(seen) < 1:
        raise ConfigError("need at least one window value")
    entries = []
    for w in seen:
        try:
            dataset = build_dataset(trajectories, radius, w, kind)
            train_idx, test_idx = chronological_split(dataset, train_frac)
            if test_idx.size == 0:
                raise EstimationError("no test rows after the chronological split")
            model = train_logreg(
                (dataset.features[train_idx], dataset.labels[train_idx]), l2=l2
            )
            metrics = evaluate(
                model, (dataset.features[test_idx], dataset.labels[test_idx])
            )
            entries.append(
                SweepEntry(
                    window=w,
                    metrics=metrics,
                    train_rows=int(train_idx.size),
                    test_rows=int(test_idx.size),
                )
            )
        except (ConfigError, EstimationError, TrainingError) as exc:
            entries.append(SweepEntry(window=w, metrics=None, error=str(exc)))
    return entries
