"""Deterministic mean-flow dynamics of a polygonal hull.

Every vertex with exterior angle ``2 theta`` moves along the bisector of its
normal cone at speed ``sin(theta) / pi`` per attachment step. A vertex whose
exterior angle drops below ``EPS_MERGE`` has become a straight angle and is
removed (a merge event).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegeneratePolygon

EPS_MERGE = 1e-6
DN_MAX = 0.1
DN_EDGE_FRACTION = 0.01
_BISECT_ITERS = 80


@dataclass
class PolygonState:
    """CCW polygon vertices (shape ``(k, 2)``) at continuous step-time ``n``."""

    vertices: np.ndarray
    n: float = 0.0
    merges: list = field(default_factory=list)

    @classmethod
    def from_vertices(cls, pts, n=0.0):
        """Validate and orient counter-clockwise."""
        P = np.array(pts, dtype=float)
        if P.ndim != 2 or P.shape[1] != 2 or len(P) < 3:
            raise DegeneratePolygon("need at least 3 vertices")
        if _signed_area(P) < 0:
            P = P[::-1].copy()
        ext = exterior_angles(P)
        if not np.all(ext > 0):
            raise DegeneratePolygon("polygon is not strictly convex")
        if abs(ext.sum() - 2 * math.pi) > 1e-9:
            raise DegeneratePolygon("vertices do not trace a simple convex polygon")
        return cls(P, float(n))

    @property
    def k(self):
        return len(self.vertices)

    def exterior_angles(self):
        return exterior_angles(self.vertices)

    def interior_angles(self):
        return math.pi - exterior_angles(self.vertices)

    def edge_lengths(self):
        d = np.roll(self.vertices, -1, axis=0) - self.vertices
        return np.hypot(d[:, 0], d[:, 1])


def _signed_area(P):
    x, y = P[:, 0], P[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _outward_normals(P):
    """Unit outward normal of edge ``i -> i+1`` of a CCW polygon."""
    d = np.roll(P, -1, axis=0) - P
    L = np.hypot(d[:, 0], d[:, 1])
    return np.column_stack([d[:, 1], -d[:, 0]]) / L[:, None]


def _turn(n_in, n_out):
    cross = n_in[:, 0] * n_out[:, 1] - n_in[:, 1] * n_out[:, 0]
    return np.arctan2(cross, np.sum(n_in * n_out, axis=1))


def exterior_angles(P):
    """Signed exterior angles; negative values mean a reflex vertex."""
    nrm = _outward_normals(np.asarray(P, dtype=float))
    return _turn(np.roll(nrm, 1, axis=0), nrm)


def _chain_velocity(prev, cur, nxt):
    """Velocity of ``cur`` given its neighbours (rows are vertices)."""
    def normal(a, b):
        d = b - a
        return np.column_stack([d[:, 1], -d[:, 0]]) / np.hypot(d[:, 0], d[:, 1])[:, None]

    n_in = normal(prev, cur)
    n_out = normal(cur, nxt)
    half = 0.5 * _turn(n_in, n_out)
    bis = n_in + n_out
    bis /= np.hypot(bis[:, 0], bis[:, 1])[:, None]
    return (np.sin(half) / math.pi)[:, None] * bis


def vertex_velocities(P):
    P = np.asarray(P, dtype=float)
    return _chain_velocity(np.roll(P, 1, axis=0), P, np.roll(P, -1, axis=0))


def _rk4(P, h):
    k1 = vertex_velocities(P)
    k2 = vertex_velocities(P + 0.5 * h * k1)
    k3 = vertex_velocities(P + 0.5 * h * k2)
    k4 = vertex_velocities(P + h * k3)
    return P + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def default_dn(state: PolygonState):
    return min(DN_EDGE_FRACTION * float(state.edge_lengths().min()), DN_MAX)


def flow_step(state: PolygonState, dn=None, eps_merge=EPS_MERGE) -> PolygonState:
    """Advance by ``dn`` (one RK4 step).

    If some exterior angle would fall below ``eps_merge`` during the step,
    the step is shortened by bisection to the moment it does, that vertex is
    removed and the merge is appended to ``merges``. The returned state may
    therefore have advanced by less than ``dn``.
    """
    if state.k < 3:
        raise DegeneratePolygon(f"{state.k} vertices left")
    dn = default_dn(state) if dn is None else float(dn)
    if not dn > 0:
        raise ConfigurationError("dn must be positive")
    P = _rk4(state.vertices, dn)
    ext = exterior_angles(P)
    if ext.min() >= eps_merge:
        return PolygonState(P, state.n + dn, list(state.merges))

    # ext.min() decreases through eps_merge somewhere in (0, dn]
    lo, hi = 0.0, dn
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if exterior_angles(_rk4(state.vertices, mid)).min() >= eps_merge:
            lo = mid
        else:
            hi = mid
    P = _rk4(state.vertices, hi)
    ext = exterior_angles(P)
    i = int(np.argmin(ext))
    merges = list(state.merges)
    merges.append({"n": state.n + hi, "vertex": i, "position": P[i].tolist(),
                   "exterior_angle": float(ext[i]), "vertex_count_after": len(P) - 1})
    P = np.delete(P, i, axis=0)
    if len(P) < 3:
        raise DegeneratePolygon("fewer than 3 vertices after merge")
    return PolygonState(P, state.n + hi, merges)


def run_flow(state: PolygonState, steps, dn=None, stop_at_merge=False):
    """Apply ``steps`` flow steps; returns ``(state, trajectory)``.

    ``trajectory`` rows are ``(n, vertex_count, sorted interior angles)``,
    starting with the initial state. With ``dn=None`` each step uses
    :func:`default_dn` of the current polygon.
    """
    traj = [(state.n, state.k, np.sort(state.interior_angles()))]
    for _ in range(int(steps)):
        before = len(state.merges)
        state = flow_step(state, dn)
        traj.append((state.n, state.k, np.sort(state.interior_angles())))
        if stop_at_merge and len(state.merges) > before:
            break
    return state, traj


def regular_polygon(k, circumradius=1.0, phase=0.0):
    a = phase + 2 * math.pi * np.arange(k) / k
    return PolygonState.from_vertices(circumradius * np.column_stack([np.cos(a), np.sin(a)]))


def random_obtuse_pentagon(rng, scale=1.0, min_gap=1e-2, max_tries=100_000):
    """Convex pentagon with all interior angles obtuse and pairwise at least ``min_gap`` apart.

    Vertices are uniform angles on a circle; draws are rejected until the
    angle conditions hold.
    """
    for _ in range(max_tries):
        a = np.sort(rng.uniform(0.0, 2 * math.pi, 5))
        P = scale * np.column_stack([np.cos(a), np.sin(a)])
        inner = math.pi - exterior_angles(P)
        if inner.min() > math.pi / 2 and np.diff(np.sort(inner)).min() > min_gap:
            return PolygonState.from_vertices(P)
    raise ConfigurationError("rejection sampling did not find a pentagon")


def beta_rate_check(r, beta, gamma, theta1, theta2, h=1e-4, tol=1e-9) -> dict:
    """Finite-difference rotation rate of the edge between two adjacent vertices.

    The local chain ``p0, x1, x2, p3`` has edge ``x1 x2`` of length ``r`` and
    exterior angles ``2 theta1`` at ``x1`` and ``2 theta2`` at ``x2``. Both
    vertices move with the flow's velocity field; ``beta`` counts positive
    when ``x2`` advances faster than ``x1`` along the edge normal.
    """
    if abs(2 * theta1 - (math.pi / 2 - beta - gamma)) > tol:
        raise ConfigurationError("need 2 theta1 = pi/2 - beta - gamma")
    if abs(2 * theta2 - (math.pi / 2 + beta - gamma)) > tol:
        raise ConfigurationError("need 2 theta2 = pi/2 + beta - gamma")
    if not (0 < theta1 < math.pi / 2 and 0 < theta2 < math.pi / 2 and r > 0):
        raise ConfigurationError("exterior angles must lie in (0, pi) and r > 0")
    arm = max(r, 1.0)
    x1 = np.array([0.0, 0.0])
    x2 = np.array([float(r), 0.0])
    p0 = x1 - arm * np.array([math.cos(-2 * theta1), math.sin(-2 * theta1)])
    p3 = x2 + arm * np.array([math.cos(2 * theta2), math.sin(2 * theta2)])
    v = _chain_velocity(np.array([p0, x1]), np.array([x1, x2]), np.array([x2, p3]))

    def angle(step):
        d = (x2 + step * v[1]) - (x1 + step * v[0])
        return math.atan2(d[1], d[0])

    # outward normal is -y here, so advancing x2 turns the edge clockwise
    fd = -(angle(h) - angle(-h)) / (2 * h)
    formula = math.sin(beta) * math.sin(gamma) / (math.pi * r)
    return {"fd_rate": fd, "formula_rate": formula,
            "normal_speed_1": float(-v[0, 1]), "normal_speed_2": float(-v[1, 1])}
