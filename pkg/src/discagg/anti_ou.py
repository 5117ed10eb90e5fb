"""First-passage times of dX = (sigma/t) dW + (mu X / t) dt from X(1) = 0.

Two independent simulators:

* ``euler``: Euler-Maruyama on the geometric grid ``t_k = (1 + h)^k``.
* ``exact_bridge``: with ``s = log t`` the rescaled process
  ``exp(-mu s) X(e^s)`` is the Brownian motion ``B`` run on the clock
  ``c* (1 - exp(-(2 mu + 1) s))``, ``c* = sigma^2 / (2 mu + 1)``. Sampling
  ``B`` exactly on a uniform ``s`` grid and testing it against the moving
  barrier ``a exp(-mu s)`` has no time-stepping error, only grid monitoring.

Both monitor the barrier at grid points only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit
from scipy import stats

from .errors import ConfigurationError, InsufficientData, InsufficientSurvivors
from .rng import block_ranges, derive_seed, replica_rng
from .tails import TailFit, geometric_grid, loglog_fit, survivor_counts
from .vertex_growth import asymptotic_params

METHODS = ("euler", "exact_bridge")
H_DEFAULT = 1e-3
T_MAX = 1e6
MIN_TAIL_SAMPLES = 10_000
MIN_SURVIVORS = 1000


@dataclass(frozen=True)
class SdeConfig:
    mu: float
    sigma: float
    a: float
    t_max: float = T_MAX
    method: str = "exact_bridge"
    h: float = H_DEFAULT
    t0: float = 1.0

    def __post_init__(self):
        if self.mu < 0 or self.sigma < 0 or self.a <= 0:
            raise ConfigurationError("need mu >= 0, sigma >= 0, a > 0")
        if self.t_max <= self.t0:
            raise ConfigurationError("t_max must exceed t0")
        if self.method not in METHODS:
            raise ConfigurationError(f"method must be one of {METHODS}")
        if not 0 < self.h <= 1e-2:
            raise ConfigurationError("h must lie in (0, 1e-2]")
        if self.t0 != 1.0:
            raise ConfigurationError("the process starts at t0 = 1")

    @classmethod
    def from_theta(cls, theta, a, **kw):
        p = asymptotic_params(theta)
        return cls(mu=p["mu"], sigma=p["sigma"], a=a, **kw)

    @property
    def c_star(self):
        return self.sigma ** 2 / (2 * self.mu + 1)

    def to_dict(self):
        return {"mu": self.mu, "sigma": self.sigma, "a": self.a, "t_max": self.t_max,
                "method": self.method, "h": self.h, "t0": self.t0}


@dataclass(frozen=True)
class EscapeSample:
    T: float
    censored: bool


###############################################################################
# Kernels. Each returns T (grid time of the first |X| >= a) and a censored flag.
###############################################################################


@njit(cache=True)
def _euler_block(mu, a, noise, h, rng, T, cens, tk):
    K = noise.shape[0]
    for i in range(T.shape[0]):
        x = 0.0
        T[i] = tk[K]
        cens[i] = True
        for k in range(K):
            x += mu * x * h + noise[k] * rng.standard_normal()
            if abs(x) >= a:
                T[i] = tk[k + 1]
                cens[i] = False
                break


@njit(cache=True)
def _bridge_block(sd, barrier, rng, T, cens, tk, probe_k, probe_gain, rec):
    K = sd.shape[0]
    n_probe = probe_k.shape[0]
    for i in range(T.shape[0]):
        b = 0.0
        T[i] = tk[K]
        cens[i] = True
        p = 0
        for k in range(K):
            b += sd[k] * rng.standard_normal()
            if abs(b) >= barrier[k + 1]:
                T[i] = tk[k + 1]
                cens[i] = False
                break
            while p < n_probe and probe_k[p] == k + 1:
                rec[i, p] = probe_gain[p] * b
                p += 1


@njit(cache=True)
def _bridge_pair_block(sd_fine, barrier_fine, rng, T_fine, T_coarse, c_fine, c_coarse, tk_fine):
    # one Brownian path per replica; the coarse grid watches every other fine point
    K = sd_fine.shape[0]
    for i in range(T_fine.shape[0]):
        b = 0.0
        T_fine[i] = tk_fine[K]
        c_fine[i] = True
        T_coarse[i] = tk_fine[K - (K % 2)]
        c_coarse[i] = True
        hit_fine = False
        for k in range(K):
            b += sd_fine[k] * rng.standard_normal()
            if abs(b) >= barrier_fine[k + 1]:
                if not hit_fine:
                    T_fine[i] = tk_fine[k + 1]
                    c_fine[i] = False
                    hit_fine = True
                if (k + 1) % 2 == 0:
                    T_coarse[i] = tk_fine[k + 1]
                    c_coarse[i] = False
                    break


def _euler_grid(cfg):
    K = int(math.floor(math.log(cfg.t_max) / math.log1p(cfg.h)))
    tk = np.exp(np.arange(K + 1) * math.log1p(cfg.h))
    noise = cfg.sigma * np.sqrt(cfg.h / tk[:-1])
    return tk, noise


def _bridge_grid(cfg):
    K = int(math.floor(math.log(cfg.t_max) / cfg.h + 1e-9))
    s = np.arange(K + 1) * cfg.h
    k2 = 2 * cfg.mu + 1
    # variance of B over [tau(s_k), tau(s_{k+1})]
    sd = np.sqrt(cfg.c_star * np.exp(-k2 * s[:-1]) * -np.expm1(-k2 * cfg.h))
    barrier = cfg.a * np.exp(-cfg.mu * s)
    return np.exp(s), s, sd, barrier


def escape_times(cfg: SdeConfig, n, seed=0, method=None):
    """``n`` escape times as arrays ``(T, censored)``; censored ``T`` = horizon."""
    method = method or cfg.method
    n = int(n)
    T = np.empty(n)
    cens = np.empty(n, dtype=np.bool_)
    if method == "euler":
        tk, noise = _euler_grid(cfg)
        for b, lo, hi in block_ranges(n):
            _euler_block(cfg.mu, cfg.a, noise, cfg.h, replica_rng(seed, b),
                         T[lo:hi], cens[lo:hi], tk)
    elif method == "exact_bridge":
        tk, _, sd, barrier = _bridge_grid(cfg)
        no_k = np.zeros(0, dtype=np.int64)
        no_g = np.zeros(0)
        rec = np.zeros((1, 0))
        for b, lo, hi in block_ranges(n):
            _bridge_block(sd, barrier, replica_rng(seed, b), T[lo:hi], cens[lo:hi], tk,
                          no_k, no_g, rec)
    else:
        raise ConfigurationError(f"unknown method {method!r}")
    return T, cens


def escape_times_grid_pair(cfg: SdeConfig, n, seed=0):
    """Exact-bridge escape times on step ``h/2`` and on step ``h`` from the same paths.

    Returns ``((T_fine, cens_fine), (T_coarse, cens_coarse))``. The coarse
    result is what ``escape_times`` would give with step ``h`` for the same
    Brownian path, so the difference isolates the grid-monitoring bias.
    """
    fine = replace(cfg, h=cfg.h / 2)
    tk, _, sd, barrier = _bridge_grid(fine)
    n = int(n)
    Tf, Tc = np.empty(n), np.empty(n)
    cf, cc = np.empty(n, dtype=np.bool_), np.empty(n, dtype=np.bool_)
    for b, lo, hi in block_ranges(n):
        _bridge_pair_block(sd, barrier, replica_rng(seed, b), Tf[lo:hi], Tc[lo:hi],
                           cf[lo:hi], cc[lo:hi], tk)
    return (Tf, cf), (Tc, cc)


def simulate_escape_euler(cfg: SdeConfig, rng) -> EscapeSample:
    tk, noise = _euler_grid(cfg)
    T = np.empty(1)
    cens = np.empty(1, dtype=np.bool_)
    _euler_block(cfg.mu, cfg.a, noise, cfg.h, rng, T, cens, tk)
    return EscapeSample(float(T[0]), bool(cens[0]))


def simulate_escape_bridge(cfg: SdeConfig, rng) -> EscapeSample:
    tk, _, sd, barrier = _bridge_grid(cfg)
    T = np.empty(1)
    cens = np.empty(1, dtype=np.bool_)
    _bridge_block(sd, barrier, rng, T, cens, tk, np.zeros(0, dtype=np.int64), np.zeros(0),
                  np.zeros((1, 0)))
    return EscapeSample(float(T[0]), bool(cens[0]))


###############################################################################
# Analysis
###############################################################################


def _columns(samples):
    if isinstance(samples, tuple) and len(samples) == 2:
        return np.asarray(samples[0], float), np.asarray(samples[1], bool)
    return (np.array([s.T for s in samples], float),
            np.array([s.censored for s in samples], bool))


def tail_fit(samples, grid=None, t_max=T_MAX) -> TailFit:
    """Fit ``P(T > t) ~ t^-mu`` over grid points with t >= 100 and >= 30 survivors."""
    T, cens = _columns(samples)
    if T.size < MIN_TAIL_SAMPLES:
        raise InsufficientData(f"need >= {MIN_TAIL_SAMPLES} samples, got {T.size}")
    if grid is None:
        grid = geometric_grid(1.0, t_max)
    return loglog_fit(T, cens, grid)


def survival_curve(samples, grid):
    T, cens = _columns(samples)
    return [(float(g), float(c) / T.size) for g, c in zip(grid, survivor_counts(T, cens, grid))]


def method_agreement(cfg: SdeConfig, n, seed=0):
    """Two-sample KS test on log T between the two simulators (independent streams)."""
    te, ce = escape_times(cfg, n, seed=seed, method="euler")
    tb, cb = escape_times(cfg, n, seed=derive_seed(seed, 1), method="exact_bridge")
    return ks_log_times((te, ce), (tb, cb), cfg.t_max)


def ks_log_times(first, second, t_max=T_MAX):
    """KS test on log T; censored samples of both sets share one value above the horizon."""
    cap = math.log(t_max) + 1.0
    x = np.where(first[1], cap, np.log(first[0]))
    y = np.where(second[1], cap, np.log(second[0]))
    res = stats.ks_2samp(x, y)
    return {"ks_stat": float(res.statistic), "ks_p": float(res.pvalue)}


def survivor_diagnostics(cfg: SdeConfig, t_probe, s_condition, n, seed=0, bins=20) -> dict:
    """Statistics of paths that have not escaped by ``s_condition``.

    Returns the histogram of ``X(s_condition)/a`` among survivors, its KS
    distance from Uniform[-1, 1], the survivor std of ``X`` at each probe time,
    and the log-log slope of that std against ``t_probe``.
    """
    t_probe = np.sort(np.asarray(t_probe, dtype=float))
    if not t_probe[-1] < s_condition:
        raise ConfigurationError("need t_probe < s_condition")
    cfg = replace(cfg, t_max=float(s_condition))
    tk, s, sd, barrier = _bridge_grid(cfg)
    times = np.append(t_probe, tk[-1])
    probe_k = np.searchsorted(tk, times).astype(np.int64)
    probe_k = np.minimum(probe_k, len(tk) - 1)
    gain = np.exp(cfg.mu * s[probe_k])
    n = int(n)
    T = np.empty(n)
    cens = np.empty(n, dtype=np.bool_)
    rec = np.zeros((n, len(probe_k)))
    for b, lo, hi in block_ranges(n):
        _bridge_block(sd, barrier, replica_rng(seed, b), T[lo:hi], cens[lo:hi], tk,
                      probe_k, gain, rec[lo:hi])
    alive = cens
    n_alive = int(alive.sum())
    if n_alive < MIN_SURVIVORS:
        raise InsufficientSurvivors(f"{n_alive} survivors < {MIN_SURVIVORS}")
    end = rec[alive, -1] / cfg.a
    counts, edges = np.histogram(end, bins=bins, range=(-1.0, 1.0))
    ks = stats.kstest(end, stats.uniform(loc=-1, scale=2).cdf).statistic
    std = rec[alive, :-1].std(axis=0, ddof=1)
    t_used = tk[probe_k[:-1]]
    slope = float(np.polyfit(np.log(t_used), np.log(std), 1)[0]) if len(t_used) > 1 else float("nan")
    return {
        "survivors": n_alive,
        "conditional_histogram": {"counts": counts.tolist(), "edges": edges.tolist()},
        "ks_uniform": float(ks),
        "t_probe": t_used.tolist(),
        "conditional_std": std.tolist(),
        "std_slope": slope,
        "end_values": end,
    }


def two_sided_survival_bm(a, tau, terms=200):
    """P(sup_{u <= tau} |B_u| < a) for standard Brownian motion (series form)."""
    if tau <= 0:
        return 1.0
    k = np.arange(terms)
    m = 2 * k + 1
    return float(4 / math.pi * np.sum((-1.0) ** k / m * np.exp(-(m ** 2) * math.pi ** 2 * tau / (8 * a * a))))
