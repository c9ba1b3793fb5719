"""Monte Carlo summary statistics shared by the experiment modules."""

from __future__ import annotations

import math

import numpy as np

N_BATCHES = 32


def mean_se(values, batches: int = N_BATCHES) -> tuple[float, float]:
    """Sample mean and batch-means standard error.

    Values are split, in order, into ``batches`` contiguous groups; the standard
    error is the spread of the group means divided by sqrt(batches).
    """
    values = np.asarray(values, dtype=float).ravel()
    mean = float(values.mean())
    if values.size < 2 * batches:
        return mean, float(values.std(ddof=1) / math.sqrt(values.size))
    groups = np.array_split(values, batches)
    means = np.array([g.mean() for g in groups])
    return mean, float(means.std(ddof=1) / math.sqrt(batches))


def variance_se(values) -> tuple[float, float]:
    """Unbiased sample variance and its standard error from the fourth central moment."""
    x = np.asarray(values, dtype=float).ravel()
    n = x.size
    c = x - x.mean()
    m2 = float(np.mean(c**2))
    m4 = float(np.mean(c**4))
    var = m2 * n / (n - 1)
    se = math.sqrt(max(m4 - m2 * m2 * (n - 3) / (n - 1), 0.0) / n)
    return var, se
