"""Empirical survival curves and log-log tail slopes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import WindowEmpty

T_MIN = 100.0
MIN_SURVIVORS = 30


@dataclass(frozen=True)
class TailFit:
    exponent_hat: float
    stderr: float
    fit_window: tuple
    n_samples: int
    n_points: int = 0

    def to_dict(self):
        return {"exponent_hat": self.exponent_hat, "stderr": self.stderr,
                "window": list(self.fit_window), "n": self.n_samples}


def geometric_grid(t_lo, t_hi, per_decade=10):
    n = int(round(np.log10(t_hi / t_lo) * per_decade)) + 1
    return np.unique(np.geomspace(t_lo, t_hi, n))


def survivor_counts(times, censored, grid):
    """Number of samples with ``T > t`` at each grid point.

    Censored samples count as surviving every grid point; callers keep the
    grid below the censoring horizon.
    """
    times = np.asarray(times, dtype=float)
    censored = np.zeros(times.shape, bool) if censored is None else np.asarray(censored, bool)
    done = np.sort(times[~censored])
    grid = np.asarray(grid, dtype=float)
    dead = np.searchsorted(done, grid, side="right")
    return times.size - dead


def loglog_fit(times, censored, grid, t_min=T_MIN, min_survivors=MIN_SURVIVORS, window=None):
    """OLS slope of log survival vs log t over the usable window.

    ``window=(t_lo, t_hi)`` pins the grid points instead of selecting them by
    survivor count (points with no survivors are still dropped).
    """
    grid = np.asarray(grid, dtype=float)
    times = np.asarray(times, dtype=float)
    censored = np.zeros(times.shape, bool) if censored is None else np.asarray(censored, bool)
    if censored.all():
        raise WindowEmpty("no uncensored samples")
    counts = survivor_counts(times, censored, grid)
    n = times.size
    # survival is unknown at and beyond the earliest censoring time
    horizon = times[censored].min() if censored.any() else np.inf
    if window is None:
        use = (grid >= t_min) & (grid < horizon) & (counts >= min_survivors)
    else:
        use = (grid >= window[0]) & (grid <= window[1]) & (grid < horizon) & (counts > 0)
    if use.sum() < 2:
        raise WindowEmpty(
            f"fewer than 2 grid points with t >= {t_min} and >= {min_survivors} survivors")
    x = np.log(grid[use])
    y = np.log(counts[use] / n)
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope = coef[0]
    m = len(x)
    if m > 2:
        resid = y - A @ coef
        s2 = float(resid @ resid) / (m - 2)
        se = float(np.sqrt(s2 / np.sum((x - x.mean()) ** 2)))
    else:
        se = float("nan")
    return TailFit(float(-slope), se, (float(grid[use][0]), float(grid[use][-1])), n, m)


def batch_stderr(times, censored, grid, batches=10, t_min=T_MIN, min_survivors=MIN_SURVIVORS):
    """Batch-means standard error of the tail exponent.

    The regression stderr of :func:`loglog_fit` treats the points of a
    cumulative survival curve as independent and understates the sampling
    error. Here the sample is split into ``batches`` disjoint parts, each is
    fitted over the full-sample window, and the spread of those exponents
    gives the error of the pooled estimate.
    """
    times = np.asarray(times, dtype=float)
    censored = np.zeros(times.shape, bool) if censored is None else np.asarray(censored, bool)
    full = loglog_fit(times, censored, grid, t_min, min_survivors)
    parts = np.array_split(np.arange(times.size), batches)
    ex = [loglog_fit(times[p], censored[p], grid, window=full.fit_window).exponent_hat for p in parts]
    return float(np.std(ex, ddof=1) / np.sqrt(batches))
