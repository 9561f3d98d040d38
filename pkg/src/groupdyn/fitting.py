"""Lognormal and power-law fitting with goodness-of-fit machinery.

The power-law fitter follows the standard truncation-point recipe: for every
candidate lower bound, estimate the tail exponent by maximum likelihood and
keep the bound that minimizes the Kolmogorov-Smirnov distance between the
tail and the fitted law.  Integer samples use the discrete estimator with the
half-step offset; real samples use the continuous estimator.  Continuous fits
can run directly on log-valued samples, which keeps totals far beyond the
float range fittable (the KS statistic is invariant under the log transform).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import integrate, special, stats

from .errors import ConfigError, FitError
from .simulator import substream, _STREAM_BOOT


# ---------------------------------------------------------------------------
# Lognormal MLE and QQ diagnostics.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LognormalFit:
    """MLE of the normal distribution of log samples (population variance)."""

    mean: float
    variance: float
    n_samples: int
    tick: int | None = None


def lognormal_mle(samples, tick=None):
    """Fit mean and population variance of ln(samples)."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 2:
        raise FitError("need at least two samples")
    if np.any(x <= 0.0) or not np.all(np.isfinite(x)):
        raise FitError("samples must be positive and finite")
    logs = np.log(x)
    return LognormalFit(
        mean=float(np.mean(logs)),
        variance=float(np.var(logs)),
        n_samples=int(x.size),
        tick=tick,
    )


@dataclass
class QQPoints:
    """Quantile pairs of log samples against a fitted normal, plus the LS line."""

    theoretical: np.ndarray
    empirical: np.ndarray
    slope: float
    intercept: float
    r_squared: float


def qq_points(samples, fit, log_input=False):
    """Empirical log-sample quantiles against the fitted normal quantiles.

    Plotting positions (i - 0.5) / n.  Reports the least-squares line through
    the points; for well-matched samples slope ~ 1 and intercept ~ 0.
    """
    if fit.variance <= 0.0:
        raise FitError("fit variance is zero; QQ comparison is degenerate")
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 2:
        raise FitError("need at least two samples")
    if log_input:
        emp = np.sort(x)
    else:
        if np.any(x <= 0.0):
            raise FitError("samples must be positive")
        emp = np.sort(np.log(x))
    n = emp.size
    positions = (np.arange(1, n + 1) - 0.5) / n
    theo = stats.norm.ppf(positions) * math.sqrt(fit.variance) + fit.mean
    res = stats.linregress(theo, emp)
    return QQPoints(
        theoretical=theo,
        empirical=emp,
        slope=float(res.slope),
        intercept=float(res.intercept),
        r_squared=float(res.rvalue**2),
    )


# ---------------------------------------------------------------------------
# Power-law fitting with truncation point.
# ---------------------------------------------------------------------------


@dataclass
class PowerLawFit:
    """Fitted tail law: density proportional to x^(-exponent) for x >= x_min.

    ``exponent`` follows the tail-fitting convention (> 1); the macro model's
    signed exponent is its negation (`model_exponent`).  For fits performed in
    log space, ``x_min`` may overflow to inf; ``log_x_min`` is authoritative.
    """

    exponent: float
    x_min: float
    log_x_min: float
    amplitude: float
    log_amplitude: float
    ks: float
    n_tail: int
    n_samples: int
    discrete: bool
    log_space: bool
    min_tail: int
    max_candidates: int | None
    x_min_bounds: tuple | None = None
    p_value: float | None = None
    rss: float | None = None

    @property
    def model_exponent(self):
        return -self.exponent


def _candidate_indices(n_unique, max_candidates):
    if max_candidates is None or n_unique <= max_candidates:
        return np.arange(n_unique)
    # Evenly spaced over the unique-value index range, endpoints kept.
    return np.unique(np.linspace(0, n_unique - 1, max_candidates).round().astype(int))


def _ks_discrete(tail, x_min, alpha):
    # Fitted CDF with the half-step continuity correction:
    # P(X <= v) = 1 - ((v + 0.5) / (x_min - 0.5))^(1 - alpha)
    values, counts = np.unique(tail, return_counts=True)
    n = tail.size
    emp_hi = np.cumsum(counts) / n
    emp_lo = emp_hi - counts / n
    scale = x_min - 0.5
    fit_at = 1.0 - ((values + 0.5) / scale) ** (1.0 - alpha)
    fit_before = 1.0 - ((values - 0.5) / scale) ** (1.0 - alpha)
    return float(
        max(np.max(np.abs(emp_hi - fit_at)), np.max(np.abs(emp_lo - fit_before)))
    )


def _ks_continuous(tail_logs, log_x_min, alpha, ranks=None):
    # In log space the tail law is exponential: F(L) = 1 - exp(-(alpha-1)(L - L0)).
    # diff = ECDF_hi - F; the lower-step deviation is 1/n - min(diff).
    n = tail_logs.size
    if ranks is None:
        ranks = np.arange(1, n + 1, dtype=np.float64)
    diff = ranks / n + np.expm1(-(alpha - 1.0) * (tail_logs - log_x_min))
    return float(max(diff.max(), 1.0 / n - diff.min()))


def powerlaw_fit(
    samples,
    discrete=None,
    log_input=False,
    min_samples=50,
    min_tail="auto",
    max_candidates=500,
    x_min_bounds=None,
):
    """Fit a power law with automatic truncation point.

    ``discrete`` defaults to auto-detection (integral samples use the discrete
    estimator).  ``log_input=True`` declares that ``samples`` are already
    natural logs; the fit then runs entirely in log space (continuous only).
    Candidate truncation points are the distinct sample values, thinned to at
    most ``max_candidates``; candidates whose tail holds fewer than
    ``min_tail`` points are skipped ("auto" keeps at least 1/40th of the data
    in the tail, so the search cannot retreat into a vacuously small tail
    that any law would fit).  ``x_min_bounds=(lo, hi)`` restricts the
    candidate search to that range (on the same axis as the samples), the
    usual way to keep the truncation point out of a known non-power-law body.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.size < min_samples:
        raise FitError(f"need at least {min_samples} samples, got {x.size}")
    if min_tail == "auto":
        min_tail = max(50, x.size // 40)
    if not np.all(np.isfinite(x)):
        raise FitError("samples must be finite")
    if log_input:
        if discrete:
            raise ConfigError("log-space fitting is continuous only")
        discrete = False
    else:
        if np.any(x <= 0.0):
            raise FitError("samples must be positive")
        if discrete is None:
            discrete = bool(np.all(x == np.floor(x)))
        if discrete and np.any(x < 1.0):
            raise FitError("discrete fitting needs integer samples >= 1")

    # ``values`` is the sorted working axis (linear for discrete fits, log
    # otherwise); the MLE always needs suffix sums of logs.
    if discrete:
        values = np.sort(x)
        log_values = np.log(values)
    else:
        values = np.sort(x) if log_input else np.sort(np.log(x))
        log_values = values

    uniques = np.unique(values)
    if uniques.size < 2:
        raise FitError("samples show no variation; nothing to fit")
    cand_values = uniques[:-1]
    if x_min_bounds is not None:
        lo, hi = x_min_bounds
        if not discrete and not log_input:
            # Bounds arrive on the sample axis; the working axis is log.
            lo = None if lo is None else math.log(lo)
            hi = None if hi is None else math.log(hi)
        x_min_bounds = (lo, hi)
        keep = np.ones(cand_values.size, dtype=bool)
        if lo is not None:
            keep &= cand_values >= lo
        if hi is not None:
            keep &= cand_values <= hi
        cand_values = cand_values[keep]
        if cand_values.size == 0:
            raise FitError("x_min_bounds excludes every candidate truncation point")
    cand_values = cand_values[_candidate_indices(cand_values.size, max_candidates)]

    n = values.size
    suffix_log_sum = np.concatenate([np.cumsum(log_values[::-1])[::-1], [0.0]])
    rank_unit = np.arange(1, n + 1, dtype=np.float64)
    best = None
    for c in cand_values:
        start = int(np.searchsorted(values, c, side="left"))
        n_tail = n - start
        if n_tail < max(min_tail, 2):
            continue
        tail = values[start:]
        tail_log_sum = suffix_log_sum[start]
        if discrete:
            denom = tail_log_sum - n_tail * math.log(c - 0.5)
            alpha = 1.0 + n_tail / denom
            ks = _ks_discrete(tail, c, alpha)
        else:
            denom = tail_log_sum - n_tail * c
            if denom <= 0.0:
                continue
            alpha = 1.0 + n_tail / denom
            ks = _ks_continuous(tail, c, alpha, ranks=rank_unit[:n_tail])
        if best is None or ks < best[0]:
            best = (ks, c, alpha, n_tail)
    if best is None:
        raise FitError("no truncation candidate leaves a large enough tail")

    ks, c, alpha, n_tail = best
    if discrete:
        x_min, log_x_min = float(c), math.log(c)
        log_amplitude = -math.log(float(special.zeta(alpha, c)))
    else:
        log_x_min = float(c)
        x_min = math.exp(log_x_min) if log_x_min < 700 else math.inf
        # Continuous density (alpha-1)/x_min * (x/x_min)^(-alpha).
        log_amplitude = math.log(alpha - 1.0) + (alpha - 1.0) * log_x_min
    amplitude = math.exp(log_amplitude) if log_amplitude < 700 else math.inf

    return PowerLawFit(
        exponent=float(alpha),
        x_min=x_min,
        log_x_min=log_x_min,
        amplitude=amplitude,
        log_amplitude=float(log_amplitude),
        ks=float(ks),
        n_tail=int(n_tail),
        n_samples=int(n),
        discrete=bool(discrete),
        log_space=bool(log_input),
        min_tail=min_tail,
        max_candidates=max_candidates,
        x_min_bounds=x_min_bounds,
    )


def _synthesize_replicate(rng, body, fit, n):
    """Semi-parametric bootstrap sample: body resampled, tail from the fitted law."""
    p_tail = fit.n_tail / fit.n_samples
    n_tail = int(rng.binomial(n, p_tail)) if body.size else n
    n_body = n - n_tail
    parts = []
    if n_body:
        parts.append(rng.choice(body, size=n_body, replace=True))
    u = rng.random(n_tail)
    if fit.discrete:
        scale = fit.x_min - 0.5
        tail = np.floor(scale * (1.0 - u) ** (-1.0 / (fit.exponent - 1.0)) + 0.5)
    else:
        tail = fit.log_x_min - np.log1p(-u) / (fit.exponent - 1.0)
    parts.append(tail)
    return np.concatenate(parts)


def powerlaw_pvalue(samples, fit, n_boot=1000, seed=0, threads=None):
    """Semi-parametric bootstrap p-value for a prior power-law fit.

    Each replicate redraws the below-truncation part from the data and the
    tail from the fitted law, refits with the same settings, and records its
    KS distance; p is the fraction of replicates at least as far from their
    own fit as the data was.  Returns None when n_boot is 0 (undefined).
    """
    if n_boot == 0:
        return None
    if n_boot < 0:
        raise ConfigError("n_boot must be non-negative")
    x = np.asarray(samples, dtype=np.float64)
    work = x if (fit.discrete or fit.log_space) else np.log(x)
    threshold = fit.x_min if fit.discrete else fit.log_x_min
    body = work[work < threshold]

    def one(i):
        rng = substream(seed, _STREAM_BOOT, i)
        synth = _synthesize_replicate(rng, body, fit, x.size)
        try:
            # Continuous replicates are synthesized in log space regardless of
            # how the original samples arrived.
            refit = powerlaw_fit(
                synth,
                discrete=fit.discrete,
                log_input=not fit.discrete,
                min_samples=2,
                min_tail=fit.min_tail,
                max_candidates=fit.max_candidates,
                x_min_bounds=fit.x_min_bounds,
            )
            return refit.ks
        except FitError:
            return math.inf

    if threads is None or threads <= 1:
        ks_values = [one(i) for i in range(n_boot)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            ks_values = list(pool.map(one, range(n_boot)))
    exceed = sum(1 for k in ks_values if k >= fit.ks)
    return exceed / n_boot


# ---------------------------------------------------------------------------
# Residual sum of squares under ratio-2 geometric binning.
# ---------------------------------------------------------------------------


def geometric_bin_edges(x_min, x_max):
    """Edges x_min * 2^i, extended one past the largest sample."""
    if not 0 < x_min <= x_max:
        raise ConfigError("need 0 < x_min <= max sample")
    edges = [float(x_min)]
    while edges[-1] <= x_max:
        edges.append(edges[-1] * 2.0)
    return np.array(edges)


def _model_bin_mass(model, lo, hi, x_min):
    if isinstance(model, PowerLawFit):
        a = model.exponent
        if model.discrete:
            z_min = float(special.zeta(a, math.ceil(x_min)))
            return (
                float(special.zeta(a, math.ceil(lo))) - float(special.zeta(a, math.ceil(hi)))
            ) / z_min
        return (lo / x_min) ** (1.0 - a) - (hi / x_min) ** (1.0 - a)
    mass, _ = integrate.quad(model, lo, hi, limit=200)
    return mass


def rss_geometric(samples, model, x_min):
    """Residual sum of squares between binned empirical and model densities.

    Bins are [x_min * 2^i, x_min * 2^(i+1)); both sides are converted to
    probability mass per unit width over the tail; only non-empty bins enter
    the sum.  ``model`` is a PowerLawFit or a density callable normalized
    over x >= x_min.
    """
    x = np.asarray(samples, dtype=np.float64)
    tail = x[x >= x_min]
    if tail.size == 0:
        raise FitError(f"no samples at or above x_min={x_min}")
    edges = geometric_bin_edges(x_min, float(np.max(tail)))
    counts, _ = np.histogram(tail, bins=edges)
    widths = np.diff(edges)
    emp_density = counts / tail.size / widths
    model_density = np.array(
        [
            _model_bin_mass(model, edges[i], edges[i + 1], x_min) / widths[i]
            for i in range(len(widths))
        ]
    )
    nonempty = counts > 0
    return float(np.sum((emp_density[nonempty] - model_density[nonempty]) ** 2))
