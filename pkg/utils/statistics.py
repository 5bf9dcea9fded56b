"""Goodness-of-fit and z statistics used to compare theory with Monte Carlo."""
import logging
import math

import numpy as np
from scipy import stats

from utils.errors import InsufficientSamplesError
from utils.helpers import geometric_quantile

logger = logging.getLogger(__name__)

MIN_SAMPLES = 100
MIN_EXPECTED = 5.0


def _require_samples(samples, minimum=MIN_SAMPLES):
    samples = np.asarray(samples)
    if samples.size < minimum:
        raise InsufficientSamplesError(f"need at least {minimum} samples, got {samples.size}")
    return samples


def _pool_bins(observed, expected, minimum):
    """Merge adjacent bins, right to left, until every expected count reaches minimum."""
    observed = [float(x) for x in observed]
    expected = [float(x) for x in expected]
    i = len(expected) - 1
    while i > 0:
        if expected[i] < minimum:
            expected[i - 1] += expected.pop(i)
            observed[i - 1] += observed.pop(i)
        i -= 1
    while len(expected) > 1 and expected[0] < minimum:
        expected[1] += expected.pop(0)
        observed[1] += observed.pop(0)
    return np.array(observed), np.array(expected)


def gof_discrete(samples, probabilities, start=0):
    """Chi-square p-value of integer samples against a pmf given on start, start+1, ...

    Mass not covered by ``probabilities`` forms a pooled upper tail bin.
    """
    samples = _require_samples(samples).astype(np.int64)
    probabilities = np.clip(np.asarray(probabilities, dtype=float), 0.0, None)
    values = samples - start
    if np.any(values < 0):
        return 0.0

    head = probabilities.size
    tail = max(0.0, 1.0 - probabilities.sum())
    counts = np.bincount(np.minimum(values, head), minlength=head + 1).astype(float)
    expected = np.append(probabilities, tail) * samples.size
    observed, expected = _pool_bins(counts, expected, MIN_EXPECTED)
    if observed.size < 2:
        return 1.0
    expected *= observed.sum() / expected.sum()
    return float(stats.chisquare(observed, expected).pvalue)


def gof_geometric(samples, p):
    """Chi-square p-value of samples against the geometric law p(1-p)^(k-1) on {1, 2, ...}"""
    size = geometric_quantile(p, 1e-12)
    k = np.arange(1, size + 1)
    return gof_discrete(samples, p * (1.0 - p) ** (k - 1), start=1)


def ks_exponential(samples, scale=1.0):
    """Kolmogorov-Smirnov p-value against the exponential law with the given mean"""
    samples = _require_samples(samples)
    return float(stats.kstest(samples, 'expon', args=(0.0, scale)).pvalue)


def geometric_to_exponential(counts, p, uniforms):
    """Spread geometric(p) counts on {1, 2, ...} into exact Exp(1) variables.

    With lam = -log(1 - p), a count n maps to lam (n - 1) plus an Exp(lam) draw truncated
    to [0, 1) and rescaled by lam; the result is Exp(1) iff the counts are geometric(p).
    For p = e^{-alpha t} this is e^{-alpha t} n up to a lattice correction of order p.
    """
    counts = np.asarray(counts, dtype=float)
    uniforms = np.asarray(uniforms, dtype=float)
    if counts.shape != uniforms.shape:
        raise ValueError("counts and uniforms must have the same shape")
    rate = -math.log1p(-p)
    return rate * (counts - 1.0) - np.log1p(-uniforms * p)


def ks_statistic(samples, scale=1.0):
    """Kolmogorov-Smirnov distance to the exponential law with the given mean"""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        return math.nan
    return float(stats.kstest(samples, 'expon', args=(0.0, scale)).statistic)


def two_sample_chisquare(first, second):
    """Chi-square homogeneity p-value for two samples of nonnegative integers"""
    first = _require_samples(first).astype(np.int64)
    second = _require_samples(second).astype(np.int64)
    low = min(first.min(), second.min())
    size = max(first.max(), second.max()) - low + 1
    table = np.vstack([
        np.bincount(first - low, minlength=size),
        np.bincount(second - low, minlength=size),
    ]).astype(float)

    # pool sparse columns from the right
    columns = [table[:, i].copy() for i in range(size)]
    i = len(columns) - 1
    while i > 0:
        if columns[i].sum() < 2 * MIN_EXPECTED:
            columns[i - 1] += columns.pop(i)
        i -= 1
    while len(columns) > 1 and columns[0].sum() < 2 * MIN_EXPECTED:
        columns[1] += columns.pop(0)
    if len(columns) < 2:
        return 1.0
    return float(stats.chi2_contingency(np.column_stack(columns), correction=False).pvalue)


def mean_and_se(values):
    """Sample mean and its standard error"""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return math.nan, math.nan
    if values.size == 1:
        return float(values[0]), math.nan
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def welch_z(estimate, se, theory):
    """z statistic (estimate - theory) / se; zero-variance estimates give 0 or +-inf"""
    difference = estimate - theory
    if not se or math.isnan(se) or se <= 0.0:
        if difference == 0.0:
            return 0.0
        return math.copysign(math.inf, difference)
    return difference / se


def binomial_z(successes, trials, p):
    """z statistic of an observed success fraction against probability p"""
    if trials <= 0:
        raise InsufficientSamplesError("no trials")
    se = math.sqrt(p * (1.0 - p) / trials)
    return welch_z(successes / trials, se, p)


def total_variation(probabilities, pairs):
    """Total variation distance between a 2D pmf table and the histogram of (row, col) pairs"""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.shape[0] == 0:
        raise InsufficientSamplesError("no samples")
    rows, cols = probabilities.shape
    inside = (pairs[:, 0] < rows) & (pairs[:, 1] < cols)
    histogram = np.zeros_like(probabilities, dtype=float)
    np.add.at(histogram, (pairs[inside, 0], pairs[inside, 1]), 1.0)
    histogram /= pairs.shape[0]
    outside = abs((1.0 - inside.mean()) - max(0.0, 1.0 - probabilities.sum()))
    return 0.5 * (float(np.abs(histogram - probabilities).sum()) + outside)
