"""Directional growth at a single hull vertex.

Two extremal discs (the fork tips) sit at a vertex whose outer edges keep a
fixed angle ``pi/2 - theta`` with the growth axis. ``Z`` is the horizontal
gap between the tip centers, ``Y`` the vertical offset, ``X = Y / Z`` the
slope of the line through them. A new disc attaches to the right tip at an
angle ``alpha`` from the vertical drawn from ``[-arctan x, theta]``, or to the
left tip from ``[arctan x, theta]`` (``x = |X|``), uniformly over the union of
both arcs, which always has measure ``2 theta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit
from scipy import integrate

from .errors import ArcCollapse, DomainError, InsufficientData, QuadratureFailure
from .rng import block_ranges, replica_rng
from .tails import loglog_fit, survivor_counts

A_DEFAULT = 0.5
Z0_DEFAULT = 1.0
STEP_CAP = 10**6
QUAD_TOL = 1e-12

THRESHOLD, ARC_COLLAPSE, CENSORED = 0, 1, 2
CAUSES = ("threshold", "arc_collapse", "censored")

RIGHT, LEFT = 1, -1


@dataclass(frozen=True)
class VertexChainState:
    Y: float
    Z: float
    n: int
    theta: float

    @property
    def X(self):
        return self.Y / self.Z


@dataclass(frozen=True)
class ForkLifetimeSample:
    theta: float
    a: float
    T: int
    cause: str


def _check_theta(theta):
    if not 0.0 < theta < math.pi / 2:
        raise DomainError(f"theta must lie in (0, pi/2), got {theta}")


def asymptotic_params(theta) -> dict:
    """Closed-form large-``z`` one-step coefficients and the diffusion limit."""
    if not 0.0 < theta <= math.pi / 2:
        raise DomainError(f"theta must lie in (0, pi/2], got {theta}")
    s, c = math.sin(theta), math.cos(theta)
    t2 = theta * theta

    def var_coef(x):
        return ((x * x + 1) * t2 - 2 * x * x * c * c - (x * x - 1) * theta * s * c) / (2 * t2)

    var0 = (t2 + theta * s * c) / (2 * t2)
    return {
        "drift_coef": c / theta,
        "var_coef_at_0": var0,
        "var_coef": var_coef,
        "dz_mean": (1 - c) / theta,
        "mu": c / (1 - c),
        "sigma": math.sqrt((t2 + theta * s * c) / 2) / (1 - c),
    }


###############################################################################
# Chain dynamics
###############################################################################


@njit(cache=True)
def _step(y, z, theta, u):
    """One attachment from (y, z) using uniform ``u``; status 1 on arc collapse."""
    sgn = 1.0 if y >= 0.0 else -1.0
    ay = abs(y)
    at = math.atan(ay / z)
    if at >= theta:
        return y, z, 1
    target = u * 2.0 * theta
    if target < theta + at:
        alpha = target - at
        ay = ay + math.cos(alpha)
    else:
        alpha = at + (target - theta - at)
        ay = ay - math.cos(alpha)
    return sgn * ay, z + math.sin(alpha), 0


@njit(cache=True)
def _one_step_draws(x, z, theta, rng, n, dx, dz):
    y0 = x * z
    for i in range(n):
        y1, z1, _ = _step(y0, z, theta, rng.random())
        dx[i] = y1 / z1 - x
        dz[i] = z1 - z


@njit(cache=True)
def _fork_block(theta, a, z0, cap, rng, T, cause):
    for i in range(T.shape[0]):
        y = 0.0
        z = z0
        T[i] = cap
        cause[i] = 2
        for n in range(1, cap + 1):
            y, z, st = _step(y, z, theta, rng.random())
            if st == 1:
                T[i] = n
                cause[i] = 1
                break
            if abs(y) >= a * z:
                T[i] = n
                cause[i] = 0
                break


def apply_attachment(state: VertexChainState, side: int, alpha: float) -> VertexChainState:
    """Deterministic update for a disc attached to ``side`` at angle ``alpha``.

    ``side`` refers to the reflected frame where ``X >= 0``.
    """
    sgn = 1.0 if state.Y >= 0 else -1.0
    ay = abs(state.Y) + side * math.cos(alpha)
    return replace(state, Y=sgn * ay, Z=state.Z + math.sin(alpha), n=state.n + 1)


def chain_step(state: VertexChainState, rng) -> VertexChainState:
    y, z, status = _step(state.Y, state.Z, state.theta, rng.random())
    if status:
        raise ArcCollapse(f"arctan|X| = {math.atan(abs(state.X)):.6g} >= theta = {state.theta:.6g}")
    return replace(state, Y=y, Z=z, n=state.n + 1)


def one_step_samples(x, z, theta, n, rng):
    """``n`` independent one-step increments ``(dX, dZ)`` from state ``X=x, Z=z``."""
    _check_theta(theta)
    if math.atan(abs(x)) >= theta:
        raise ArcCollapse("left arc is empty at this state")
    dx = np.empty(int(n))
    dz = np.empty(int(n))
    _one_step_draws(float(x), float(z), float(theta), rng, int(n), dx, dz)
    return dx, dz


###############################################################################
# Quadrature of the exact one-step moments
###############################################################################


def _quad(f, lo, hi):
    val, err = integrate.quad(f, lo, hi, epsabs=QUAD_TOL, epsrel=1e-13, limit=200)
    if not err <= QUAD_TOL:
        raise QuadratureFailure(f"quad error estimate {err:.3g} over [{lo}, {hi}]")
    return val


def one_step_moments_quadrature(x, z, theta) -> dict:
    """Exact E[dX], E[dX^2] and Var(dX) from state ``X=x >= 0, Z=z``.

    The integrands are rewritten as ``(±cos a - x sin a) / (z + sin a)`` to
    avoid cancelling ``x`` against ``(xz ± cos a)/(z + sin a)``, and are
    integrated after scaling by ``z`` (``z^2`` for the second moment), so the
    absolute tolerance applies to the O(1) quantities.
    """
    _check_theta(theta)
    if x < 0 or z <= 1:
        raise DomainError("need x >= 0 and z > 1")
    at = math.atan(x)
    if at >= theta:
        raise ArcCollapse("left arc is empty at this state")

    def right(a):
        return z * (math.cos(a) - x * math.sin(a)) / (z + math.sin(a))

    def left(a):
        return z * (-math.cos(a) - x * math.sin(a)) / (z + math.sin(a))

    norm = 1.0 / (2.0 * theta)
    m1 = norm * (_quad(right, -at, theta) + _quad(left, at, theta))
    m2 = norm * (_quad(lambda a: right(a) ** 2, -at, theta)
                 + _quad(lambda a: left(a) ** 2, at, theta))
    return {
        "drift": m1 / z,
        "second_moment": m2 / (z * z),
        "variance": (m2 - m1 * m1) / (z * z),
        "z_drift": m1,
        "z2_variance": m2 - m1 * m1,
    }


def dz_mean_quadrature(x, theta):
    at = math.atan(abs(x))
    return (_quad(math.sin, -at, theta) + _quad(math.sin, at, theta)) / (2.0 * theta)


###############################################################################
# Fork lifetimes
###############################################################################


def _validate_fork(theta, a, z0, step_cap):
    _check_theta(theta)
    if not 0.0 < a < math.tan(theta):
        raise DomainError(f"need 0 < a < tan(theta) = {math.tan(theta):.6g}, got a={a}")
    if z0 < 1:
        raise DomainError("z0 must be >= 1")
    if step_cap < 1:
        raise DomainError("step_cap must be >= 1")


def fork_lifetime(theta, a=A_DEFAULT, z0=Z0_DEFAULT, step_cap=STEP_CAP, rng=None) -> ForkLifetimeSample:
    _validate_fork(theta, a, z0, step_cap)
    T = np.empty(1, dtype=np.int64)
    cause = np.empty(1, dtype=np.int64)
    _fork_block(float(theta), float(a), float(z0), int(step_cap), rng, T, cause)
    return ForkLifetimeSample(theta, a, int(T[0]), CAUSES[cause[0]])


def fork_lifetimes(theta, a=A_DEFAULT, n=1000, z0=Z0_DEFAULT, step_cap=STEP_CAP, seed=0):
    """Ensemble of fork lifetimes as arrays ``(T, cause_code)``.

    Replicas run in blocks of :data:`~discagg.rng.BLOCK_SIZE`; block ``b``
    uses the stream of replica ``b`` of ``seed``.
    """
    _validate_fork(theta, a, z0, step_cap)
    T = np.empty(int(n), dtype=np.int64)
    cause = np.empty(int(n), dtype=np.int64)
    for b, lo, hi in block_ranges(int(n)):
        _fork_block(float(theta), float(a), float(z0), int(step_cap), replica_rng(seed, b),
                    T[lo:hi], cause[lo:hi])
    return T, cause


def as_samples(theta, a, T, cause):
    return [ForkLifetimeSample(theta, a, int(t), CAUSES[c]) for t, c in zip(T, cause)]


def _columns(samples):
    if isinstance(samples, tuple) and len(samples) == 2:
        T, cause = samples
        return np.asarray(T, float), np.asarray(cause) == CENSORED
    T = np.array([s.T for s in samples], dtype=float)
    cens = np.array([s.cause == "censored" for s in samples], dtype=bool)
    return T, cens


def lifetime_tail_curve(samples, grid) -> list:
    """``[(n, P(T > n))]`` with censored samples counted as surviving."""
    T, cens = _columns(samples)
    if T.size < 1000:
        raise InsufficientData(f"need >= 1000 samples, got {T.size}")
    counts = survivor_counts(T, cens, grid)
    return [(float(g), float(c) / T.size) for g, c in zip(grid, counts)]


def lifetime_tail_fit(samples, grid, t_min=100.0, min_survivors=30):
    """Log-log tail exponent of fork lifetimes (same window rule as the SDE fit)."""
    T, cens = _columns(samples)
    return loglog_fit(T, cens, grid, t_min=t_min, min_survivors=min_survivors)
