"""Convex hull of unit-diameter discs, stored as the polygon of centers.

All discs share the radius 1/2, so the hull of the discs is the hull of the
centers dilated by a disc of radius 1/2. The exposed boundary arc of an
extremal disc is then exactly the cone of outward normals at the matching
polygon vertex, and its measure is the exterior angle there. Sampling a
boundary point proportional to arc measure becomes sampling a direction
uniformly on the circle and looking up which normal cone contains it.

The ring is a CCW array of disc ids. Vertex ``i`` owns the half-open normal
interval ``[lo[i], lo[i+1])`` (mod 2*pi), where ``lo[i]`` is the outward
normal direction of the edge entering vertex ``i``. Storing only ``lo`` makes
the angle sum telescope, so it stays 2*pi up to rounding.

The hot paths are numba kernels over plain arrays; :class:`HullState` and
:class:`DiscStore` are thin wrappers used by tests, replay and the CLI.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numba import njit
from scipy.spatial import cKDTree

from .errors import EmptyInput, InternalInvariantError, OverlapError

RADIUS = 0.5
EPS_GEOM = 1e-9
TWO_PI = 2.0 * math.pi

# kernel status codes
OK = 0
NOT_OUTSIDE = 1
WALK_WRAPPED = 2
RING_OVERFLOW = 3
BAD_ANGLE_SUM = 4


###############################################################################
# Kernels
###############################################################################


@njit(cache=True)
def _edge_normal(xs, ys, i, j):
    # outward normal direction of the CCW edge i -> j
    return math.atan2(-(xs[j] - xs[i]), ys[j] - ys[i])


@njit(cache=True)
def _side(xs, ys, i, j, px, py):
    # signed distance of p from the line i -> j, positive on the left
    dx = xs[j] - xs[i]
    dy = ys[j] - ys[i]
    return (dx * (py - ys[i]) - dy * (px - xs[i])) / math.hypot(dx, dy)


@njit(cache=True)
def _wrap(d):
    while d < 0.0:
        d += TWO_PI
    while d >= TWO_PI:
        d -= TWO_PI
    return d


@njit(cache=True)
def _measure(lo, k, i):
    if k == 1:
        return TWO_PI
    return _wrap(lo[(i + 1) % k] - lo[i])


@njit(cache=True)
def _recompute_lo(xs, ys, ring, lo, k):
    if k == 1:
        lo[0] = 0.0
        return
    for i in range(k):
        lo[i] = _edge_normal(xs, ys, ring[(i - 1) % k], ring[i])


@njit(cache=True)
def _sample(lo, k, u):
    """Map a uniform ``u`` in [0, 1) to (ring position, global normal angle)."""
    target = u * TWO_PI
    if k == 1:
        return 0, target
    acc = 0.0
    for i in range(k):
        w = _measure(lo, k, i)
        if target < acc + w or i == k - 1:
            off = target - acc
            if off >= w:
                # rounding left a sliver past the last interval
                off = w * (1.0 - 1e-16)
            if off < 0.0:
                off = 0.0
            return i, _wrap(lo[i] + off)
        acc += w
    return k - 1, lo[k - 1]


@njit(cache=True)
def _angle_sum(lo, k):
    s = 0.0
    for i in range(k):
        s += _measure(lo, k, i)
    return s


@njit(cache=True)
def _insert(xs, ys, ring, lo, k, pos, new, evicted, tmp_ring, tmp_lo, eps):
    """Insert point ``new`` (already stored in xs/ys) next to ring[pos].

    Returns ``(new_k, n_evicted, status)``. Evicted ids are written to
    ``evicted``.
    """
    px = xs[new]
    py = ys[new]
    if k == 1:
        ring[1] = new
        _recompute_lo(xs, ys, ring, lo, 2)
        return 2, 0, OK
    if k == 2:
        a = ring[0]
        b = ring[1]
        s = _side(xs, ys, a, b, px, py)
        if abs(s) <= eps:
            dx = xs[b] - xs[a]
            dy = ys[b] - ys[a]
            t = (px - xs[a]) * dx + (py - ys[a]) * dy
            if t > dx * dx + dy * dy:
                ring[1] = new
                evicted[0] = b
            elif t < 0.0:
                ring[0] = new
                evicted[0] = a
            else:
                return 2, 0, NOT_OUTSIDE
            _recompute_lo(xs, ys, ring, lo, 2)
            return 2, 1, OK
        if s > 0.0:
            ring[2] = new
        else:
            ring[2] = b
            ring[1] = new
        _recompute_lo(xs, ys, ring, lo, 3)
        return 3, 0, OK

    # walk both ways from pos over edges that p sees (or is collinear with);
    # at least one edge must be seen strictly, otherwise p is on the boundary
    steps = 0
    strict = False
    r = pos
    while True:
        s = _side(xs, ys, ring[r], ring[(r + 1) % k], px, py)
        if s > eps:
            break
        strict = strict or s < -eps
        r = (r + 1) % k
        steps += 1
        if steps >= k:
            return k, 0, WALK_WRAPPED
    l = pos
    while True:
        s = _side(xs, ys, ring[(l - 1) % k], ring[l], px, py)
        if s > eps:
            break
        strict = strict or s < -eps
        l = (l - 1) % k
        steps += 1
        if steps >= k:
            return k, 0, WALK_WRAPPED
    if not strict:
        return k, 0, NOT_OUTSIDE

    ne = 0
    j = (l + 1) % k
    while j != r:
        evicted[ne] = ring[j]
        ne += 1
        j = (j + 1) % k
    # rebuild starting at r so the new point lands at the end
    m = 0
    j = r
    while True:
        tmp_ring[m] = ring[j]
        tmp_lo[m] = lo[j]
        m += 1
        if j == l:
            break
        j = (j + 1) % k
    tmp_ring[m] = new
    m += 1
    for i in range(m):
        ring[i] = tmp_ring[i]
        lo[i] = tmp_lo[i]
    lo[0] = _edge_normal(xs, ys, new, ring[0])
    lo[m - 1] = _edge_normal(xs, ys, ring[m - 2], new)
    return m, ne, OK


@njit(cache=True)
def _diameter(xs, ys, ring, k):
    best = 0.0
    for i in range(k):
        for j in range(i + 1, k):
            d = math.hypot(xs[ring[i]] - xs[ring[j]], ys[ring[i]] - ys[ring[j]])
            if d > best:
                best = d
    return best + 2.0 * RADIUS


@njit(cache=True)
def _grow(xs, ys, parent, ring, lo, k, n_init, n_steps, rng,
          phis, ext_count, evicted_flat, evicted_off,
          ck_steps, ck_diam, ck_k, ck_ring, audit, eps):
    """Run ``n_steps`` attachments in place.

    Returns ``(k, status, failed_step, max_angle_sum_error, min_measure)``;
    the two audit numbers are only tracked when ``audit`` is true.
    """
    tmp_ring = np.empty_like(ring)
    tmp_lo = np.empty_like(lo)
    evicted = np.empty_like(ring)
    n_ev = 0
    ci = 0
    n_ck = ck_steps.shape[0]
    cap_k = ck_ring.shape[1]
    max_err = 0.0
    min_w = TWO_PI
    evicted_off[0] = 0
    for step in range(1, n_steps + 1):
        pos, phi = _sample(lo, k, rng.random())
        v = ring[pos]
        new = n_init + step - 1
        xs[new] = xs[v] + math.cos(phi)
        ys[new] = ys[v] + math.sin(phi)
        parent[new] = v
        k, ne, status = _insert(xs, ys, ring, lo, k, pos, new, evicted,
                                tmp_ring, tmp_lo, eps)
        if status != OK:
            return k, status, step, max_err, min_w
        phis[step - 1] = phi
        for j in range(ne):
            evicted_flat[n_ev + j] = evicted[j]
        n_ev += ne
        evicted_off[step] = n_ev
        ext_count[step - 1] = k
        if audit:
            err = abs(_angle_sum(lo, k) - TWO_PI)
            if err > max_err:
                max_err = err
            for i in range(k):
                w = _measure(lo, k, i)
                if w < min_w:
                    min_w = w
        while ci < n_ck and ck_steps[ci] == step:
            if k > cap_k:
                return k, RING_OVERFLOW, step, max_err, min_w
            ck_diam[ci] = _diameter(xs, ys, ring, k)
            ck_k[ci] = k
            for i in range(k):
                ck_ring[ci, i] = ring[i]
            ci += 1
    return k, OK, 0, max_err, min_w


###############################################################################
# Python-level types
###############################################################################


@dataclass(frozen=True)
class Disc:
    id: int
    center: tuple
    birth: int
    parent: Optional[int] = None

    @property
    def radius(self):
        return RADIUS


class DiscStore:
    """Growable columnar store of disc centers and parent links."""

    def __init__(self, capacity=16):
        capacity = max(int(capacity), 4)
        self.xs = np.empty(capacity)
        self.ys = np.empty(capacity)
        self.parent = np.full(capacity, -1, dtype=np.int64)
        self.birth = np.zeros(capacity, dtype=np.int64)
        self.count = 0
        self.n_initial = 0

    @classmethod
    def from_centers(cls, centers, capacity=None):
        pts = np.asarray(centers, dtype=float).reshape(-1, 2)
        store = cls(capacity or 2 * len(pts) + 16)
        for p in pts:
            store.add(p, birth=0)
        store.n_initial = len(pts)
        return store

    def __len__(self):
        return self.count

    @property
    def capacity(self):
        return self.xs.shape[0]

    def reserve(self, n):
        if n <= self.capacity:
            return
        cap = max(n, 2 * self.capacity)
        for name in ("xs", "ys", "parent", "birth"):
            old = getattr(self, name)
            new = np.full(cap, -1, dtype=old.dtype) if name == "parent" else np.zeros(cap, dtype=old.dtype)
            new[: self.count] = old[: self.count]
            setattr(self, name, new)

    def add(self, center, birth, parent=None):
        self.reserve(self.count + 1)
        i = self.count
        self.xs[i], self.ys[i] = float(center[0]), float(center[1])
        self.birth[i] = birth
        self.parent[i] = -1 if parent is None else parent
        self.count += 1
        return i

    def __getitem__(self, i):
        if not 0 <= i < self.count:
            raise IndexError(i)
        p = int(self.parent[i])
        return Disc(i, (float(self.xs[i]), float(self.ys[i])), int(self.birth[i]),
                    None if p < 0 else p)

    def centers(self):
        return np.column_stack([self.xs[: self.count], self.ys[: self.count]])


@dataclass
class AttachmentOutcome:
    new_disc: int
    parent: int
    phi: float
    evicted: tuple = ()


class HullState:
    """CCW ring of extremal disc ids with per-vertex normal intervals."""

    def __init__(self, discs: DiscStore, ring_ids: Sequence[int]):
        self.discs = discs
        cap = max(discs.capacity, len(ring_ids) + 2)
        self._ring = np.zeros(cap, dtype=np.int64)
        self._lo = np.zeros(cap)
        self.k = len(ring_ids)
        self._ring[: self.k] = ring_ids
        self.angles_dirty = False
        _recompute_lo(discs.xs, discs.ys, self._ring, self._lo, self.k)

    def _ensure_capacity(self):
        need = self.k + 2
        cap = max(self._ring.shape[0], self.discs.capacity)
        if need > cap:
            cap = 2 * need
        if cap > self._ring.shape[0]:
            ring = np.zeros(cap, dtype=np.int64)
            lo = np.zeros(cap)
            ring[: self.k] = self._ring[: self.k]
            lo[: self.k] = self._lo[: self.k]
            self._ring, self._lo = ring, lo

    @property
    def ring(self):
        return [int(i) for i in self._ring[: self.k]]

    @property
    def normal_lo(self):
        return self._lo[: self.k].copy()

    @property
    def normal_hi(self):
        if self.k == 1:
            return np.array([TWO_PI])
        return np.roll(self._lo[: self.k], -1)

    @property
    def measures(self):
        return np.array([_measure(self._lo, self.k, i) for i in range(self.k)])

    def vertices(self):
        ids = self._ring[: self.k]
        return np.column_stack([self.discs.xs[ids], self.discs.ys[ids]])

    def position(self, vertex_id):
        hits = np.flatnonzero(self._ring[: self.k] == vertex_id)
        if hits.size == 0:
            raise KeyError(f"disc {vertex_id} is not extremal")
        return int(hits[0])

    def angle_sum(self):
        return float(_angle_sum(self._lo, self.k))

    def __len__(self):
        return self.k

    def __repr__(self):
        return f"HullState(ring={self.ring})"


###############################################################################
# Operations
###############################################################################


def batch_ring(pts, eps=EPS_GEOM):
    """Indices of the strict hull vertices of ``pts`` in CCW order.

    Andrew's monotone chain; points within ``eps`` of a hull edge are dropped.
    """
    n = len(pts)
    order = sorted(range(n), key=lambda i: (pts[i][0], pts[i][1]))
    # drop exact duplicates
    uniq = []
    for i in order:
        if not uniq or tuple(pts[i]) != tuple(pts[uniq[-1]]):
            uniq.append(i)
    if len(uniq) <= 2:
        if len(uniq) == 2 and math.dist(pts[uniq[0]], pts[uniq[1]]) == 0.0:
            return [uniq[0]]
        return uniq

    def dist_left(o, a, b):
        dx, dy = pts[a][0] - pts[o][0], pts[a][1] - pts[o][1]
        return (dx * (pts[b][1] - pts[o][1]) - dy * (pts[b][0] - pts[o][0])) / math.hypot(dx, dy)

    def chain(seq):
        out = []
        for i in seq:
            while len(out) >= 2 and dist_left(out[-2], out[-1], i) <= eps:
                out.pop()
            out.append(i)
        return out

    lower = chain(uniq)
    upper = chain(reversed(uniq))
    ring = lower[:-1] + upper[:-1]
    if len(ring) == 2 and ring[0] == ring[1]:
        ring = ring[:1]
    return ring


def build_hull(centers) -> HullState:
    """Hull over an initial set of disjoint discs; returns a fresh HullState.

    The new state owns a :class:`DiscStore` (``hull.discs``) holding all the
    given centers with ids in input order.
    """
    pts = np.asarray(centers, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise EmptyInput("at least one disc center is required")
    if len(pts) > 1:
        close = cKDTree(pts).query_pairs(1.0 - EPS_GEOM)
        if close:
            i, j = min(close)
            raise OverlapError(
                f"discs {i} and {j} overlap (center distance "
                f"{np.linalg.norm(pts[i] - pts[j]):.6g} < 1)")
    store = DiscStore.from_centers(pts)
    ring = batch_ring([tuple(p) for p in pts])
    return HullState(store, ring)


def sample_attachment(hull: HullState, rng) -> tuple:
    """Pick ``(vertex_id, phi)``: vertex with probability measure/2pi, phi uniform in its interval."""
    pos, phi = _sample(hull._lo, hull.k, rng.random())
    return int(hull._ring[pos]), float(phi)


def attach(hull: HullState, discs: DiscStore, vertex_id: int, phi: float) -> AttachmentOutcome:
    """Attach a disc tangent to ``vertex_id`` in outward direction ``phi``."""
    pos = hull.position(vertex_id)
    new = discs.add(
        (discs.xs[vertex_id] + math.cos(phi), discs.ys[vertex_id] + math.sin(phi)),
        birth=discs.count - discs.n_initial + 1, parent=vertex_id)
    hull._ensure_capacity()
    evicted = np.empty(hull.k + 1, dtype=np.int64)
    tmp_ring = np.empty_like(hull._ring)
    tmp_lo = np.empty_like(hull._lo)
    k, ne, status = _insert(discs.xs, discs.ys, hull._ring, hull._lo, hull.k, pos, new,
                            evicted, tmp_ring, tmp_lo, EPS_GEOM)
    if status != OK:
        raise InternalInvariantError(
            f"new disc {new} at ({discs.xs[new]:.17g}, {discs.ys[new]:.17g}) is not "
            f"strictly outside the hull (status {status})")
    hull.k = k
    return AttachmentOutcome(new, vertex_id, float(phi), tuple(int(e) for e in evicted[:ne]))


def hull_metrics(hull: HullState) -> dict:
    verts = hull.vertices()
    k = len(verts)
    if k >= 2:
        edges = np.roll(verts, -1, axis=0) - verts
        lengths = np.hypot(edges[:, 0], edges[:, 1])
        if k == 2:
            lengths = lengths[:1].repeat(2)
    else:
        lengths = np.zeros(0)
    return {
        "diameter": float(_diameter(hull.discs.xs, hull.discs.ys, hull._ring, hull.k)),
        "extremal_count": k,
        "edge_lengths": lengths.tolist(),
        "exterior_angles": hull.measures.tolist(),
    }
