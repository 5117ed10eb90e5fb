"""Full-cluster growth runs, the event log, and time-series metrics."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import geometry as geo
from .errors import InsufficientData, InternalInvariantError
from .rng import make_rng

F_MACRO = 0.2
CHECKPOINT_START = 10
CHECKPOINT_RATIO = 1.1
LINEAR_CHECKPOINTS = 50

_STATUS_TEXT = {
    geo.NOT_OUTSIDE: "new center not strictly outside the hull",
    geo.WALK_WRAPPED: "visibility walk wrapped around the whole ring",
    geo.RING_OVERFLOW: "ring larger than the checkpoint snapshot capacity",
}


@dataclass(frozen=True)
class AttachmentEvent:
    step: int
    new_disc: int
    parent: int
    phi: float
    evicted: tuple
    extremal_count_after: int

    def to_dict(self):
        return {
            "step": self.step,
            "new_disc": self.new_disc,
            "parent": self.parent,
            "phi": self.phi,
            "evicted": list(self.evicted),
            "extremal_count_after": self.extremal_count_after,
        }


@dataclass(frozen=True)
class ShapeClass:
    cls: str
    macroscopic_edges: int
    edge_fractions: tuple

    def to_dict(self):
        return {"class": self.cls, "macroscopic_edges": self.macroscopic_edges,
                "edge_fractions": list(self.edge_fractions)}


@dataclass
class RunRecord:
    """Columnar event log of one run plus checkpoint snapshots.

    Disc ``i`` for ``i >= n_initial`` was born at step ``i - n_initial + 1``.
    ``parent`` is -1 for initial discs. Evicted ids of step ``s`` are
    ``evicted_flat[evicted_offsets[s-1]:evicted_offsets[s]]``.
    """

    seed: int
    n_steps: int
    n_initial: int
    xs: np.ndarray
    ys: np.ndarray
    parent: np.ndarray
    phi: np.ndarray
    extremal_count: np.ndarray
    evicted_flat: np.ndarray
    evicted_offsets: np.ndarray
    checkpoint_steps: np.ndarray
    diameters: np.ndarray
    checkpoint_extremal: np.ndarray
    checkpoint_rings: list
    final_ring: list
    model: str = "full"
    max_angle_sum_error: Optional[float] = None
    min_exterior_angle: Optional[float] = None

    @property
    def n_discs(self):
        return self.n_initial + self.n_steps

    def centers(self):
        return np.column_stack([self.xs, self.ys])

    def event(self, step):
        i = step - 1
        lo, hi = self.evicted_offsets[i], self.evicted_offsets[i + 1]
        new = self.n_initial + i
        return AttachmentEvent(step, new, int(self.parent[new]), float(self.phi[i]),
                               tuple(int(e) for e in self.evicted_flat[lo:hi]),
                               int(self.extremal_count[i]))

    @property
    def events(self):
        return (self.event(s) for s in range(1, self.n_steps + 1))

    def metric_samples(self):
        return list(zip(self.checkpoint_steps.tolist(), self.diameters.tolist(),
                        self.checkpoint_extremal.tolist()))

    def hull_at(self, checkpoint_index):
        """HullState snapshot at a checkpoint (shares this record's centers)."""
        store = geo.DiscStore(1)
        store.xs, store.ys = self.xs, self.ys
        store.count = len(self.xs)
        store.n_initial = self.n_initial
        return geo.HullState(store, self.checkpoint_rings[checkpoint_index])

    def final_hull(self):
        store = geo.DiscStore(1)
        store.xs, store.ys = self.xs, self.ys
        store.count = len(self.xs)
        store.n_initial = self.n_initial
        return geo.HullState(store, self.final_ring)


def geometric_checkpoints(n_steps, start=CHECKPOINT_START, ratio=CHECKPOINT_RATIO):
    steps = []
    c = start
    while c <= n_steps:
        steps.append(c)
        c = max(c + 1, int(round(c * ratio)))
    if not steps or steps[-1] != n_steps:
        steps.append(n_steps)
    return steps


def default_checkpoints(n_steps, linear=LINEAR_CHECKPOINTS):
    """Geometric checkpoints plus ``linear`` evenly spaced ones over the second half.

    The dense second half feeds the linear-growth fit of the diameter.
    """
    half = np.linspace(n_steps / 2, n_steps, linear + 1).round().astype(int)
    return sorted(set(geometric_checkpoints(n_steps)) | {int(c) for c in half if c >= 1})


def run_cluster(n_steps, seed=0, checkpoints=None, initial_centers=((0.0, 0.0),),
                audit=False, rng=None) -> RunRecord:
    """Grow a cluster for ``n_steps`` attachments.

    ``checkpoints`` defaults to :func:`default_checkpoints`; ``audit`` tracks the
    angle-sum error and the smallest exterior angle after every step.
    """
    n_steps = int(n_steps)
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    rng = make_rng(seed) if rng is None else rng
    hull = geo.build_hull(initial_centers)
    n_init = len(hull.discs)
    n_total = n_init + n_steps
    xs = np.empty(n_total)
    ys = np.empty(n_total)
    parent = np.full(n_total, -1, dtype=np.int64)
    xs[:n_init] = hull.discs.xs[:n_init]
    ys[:n_init] = hull.discs.ys[:n_init]
    ring = np.zeros(n_total + 2, dtype=np.int64)
    lo = np.zeros(n_total + 2)
    k = hull.k
    ring[:k] = hull._ring[:k]
    lo[:k] = hull._lo[:k]

    ck = np.array(sorted(set(default_checkpoints(n_steps) if checkpoints is None
                             else (int(c) for c in checkpoints if 1 <= c <= n_steps))),
                  dtype=np.int64)
    cap_k = max(256, n_init + 8)
    ck_diam = np.zeros(len(ck))
    ck_k = np.zeros(len(ck), dtype=np.int64)
    ck_ring = np.zeros((len(ck), cap_k), dtype=np.int64)
    phis = np.zeros(n_steps)
    ext = np.zeros(n_steps, dtype=np.int64)
    ev_flat = np.zeros(n_total, dtype=np.int64)
    ev_off = np.zeros(n_steps + 1, dtype=np.int64)

    k, status, failed, max_err, min_w = geo._grow(
        xs, ys, parent, ring, lo, k, n_init, n_steps, rng, phis, ext, ev_flat, ev_off,
        ck, ck_diam, ck_k, ck_ring, bool(audit), geo.EPS_GEOM)
    if status != geo.OK:
        partial = RunRecord(int(seed), failed - 1, n_init, xs, ys, parent, phis, ext,
                            ev_flat, ev_off, ck, ck_diam, ck_k, [], [])
        tail = [partial.event(s).to_dict() for s in range(max(1, failed - 100), failed)]
        raise InternalInvariantError(
            f"step {failed}: {_STATUS_TEXT.get(status, status)}", events=tail)
    return RunRecord(
        seed=int(seed), n_steps=n_steps, n_initial=n_init, xs=xs, ys=ys, parent=parent,
        phi=phis, extremal_count=ext, evicted_flat=ev_flat[: ev_off[-1]].copy(),
        evicted_offsets=ev_off, checkpoint_steps=ck, diameters=ck_diam,
        checkpoint_extremal=ck_k,
        checkpoint_rings=[ck_ring[i, : ck_k[i]].tolist() for i in range(len(ck))],
        final_ring=ring[:k].tolist(),
        max_angle_sum_error=float(max_err) if audit else None,
        min_exterior_angle=float(min_w) if audit else None)


def _run_one(args):
    n_steps, seed, kw = args
    return run_cluster(n_steps, seed=seed, **kw)


def run_ensemble(n_steps, seeds, workers=None, **kw):
    """Run one cluster per seed; results come back in seed order.

    Runs fan out to a process pool when more than one CPU is available.
    """
    seeds = list(seeds)
    workers = workers or os.cpu_count() or 1
    jobs = [(n_steps, s, kw) for s in seeds]
    if workers <= 1 or len(seeds) <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))


def replay(record: RunRecord) -> geo.HullState:
    """Rebuild the final hull by re-applying every logged attachment."""
    init = np.column_stack([record.xs[: record.n_initial], record.ys[: record.n_initial]])
    hull = geo.build_hull(init)
    hull.discs.reserve(record.n_discs)
    for ev in record.events:
        out = geo.attach(hull, hull.discs, ev.parent, ev.phi)
        if out.evicted != ev.evicted:
            raise InternalInvariantError(
                f"replay diverged at step {ev.step}: evicted {out.evicted} != {ev.evicted}")
    return hull


def run_cluster_reference(n_steps, seed=0, initial_centers=((0.0, 0.0),)):
    """Slow step-by-step run through the public HullState API.

    Consumes the random stream exactly like :func:`run_cluster`; used to
    cross-check the compiled loop.
    """
    rng = make_rng(seed)
    hull = geo.build_hull(initial_centers)
    events = []
    for step in range(1, int(n_steps) + 1):
        v, phi = geo.sample_attachment(hull, rng)
        out = geo.attach(hull, hull.discs, v, phi)
        events.append(AttachmentEvent(step, out.new_disc, v, phi, out.evicted, hull.k))
    return hull, events


###############################################################################
# Metrics
###############################################################################


def _edge_data(hull):
    verts = hull.vertices()
    edges = np.roll(verts, -1, axis=0) - verts
    return np.hypot(edges[:, 0], edges[:, 1])


def classify_shape(hull: geo.HullState, f_macro=F_MACRO) -> ShapeClass:
    if hull.k < 3:
        return ShapeClass("other", 0, ())
    diam = geo.hull_metrics(hull)["diameter"]
    fr = _edge_data(hull) / diam
    n_macro = int(np.count_nonzero(fr >= f_macro))
    cls = {3: "triangle", 4: "quadrangle"}.get(n_macro, "other")
    return ShapeClass(cls, n_macro, tuple(float(f) for f in fr))


def corner_angles(hull: geo.HullState, f_macro=F_MACRO):
    """Exterior angles of the corners between consecutive macroscopic edges.

    A corner collects every ring vertex between two macroscopic edges (the
    rounded tip of an arm), so its angle is the sum of their exterior angles.
    Returns an empty list when fewer than two macroscopic edges exist.
    """
    if hull.k < 3:
        return []
    diam = geo.hull_metrics(hull)["diameter"]
    macro = _edge_data(hull) / diam >= f_macro
    if macro.sum() < 2:
        return []
    w = hull.measures
    k = hull.k
    first = int(np.flatnonzero(macro)[0])
    corners = []
    acc = 0.0
    # edge j runs from vertex j to vertex j+1
    for t in range(1, k + 1):
        j = (first + t) % k
        acc += w[j]
        if macro[j]:
            corners.append(acc)
            acc = 0.0
    return corners


def vertex_angle_series(record: RunRecord, f_macro=F_MACRO):
    """Per checkpoint: ``(step, corner exterior angles)``."""
    return [(int(s), corner_angles(record.hull_at(i), f_macro))
            for i, s in enumerate(record.checkpoint_steps)]


def diameter_growth_rate(record) -> dict:
    """Least-squares slope of diameter vs step over the second half of the run.

    Uses the checkpoints with step >= half the final step. Accepts a
    :class:`RunRecord` or any object with ``checkpoint_steps`` and
    ``diameters`` arrays.
    """
    steps = np.asarray(record.checkpoint_steps, dtype=float)
    diam = np.asarray(record.diameters, dtype=float)
    use = steps >= steps.max() / 2 if len(steps) else steps > 0
    if use.sum() < 10:
        raise InsufficientData(f"need >= 10 checkpoints in the second half, got {int(use.sum())}")
    x, y = steps[use], diam[use]
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(slope), "r2": r2, "points": int(use.sum())}


def summarize(record: RunRecord, f_macro=F_MACRO) -> dict:
    hull = record.final_hull()
    m = geo.hull_metrics(hull)
    out = {
        "seed": record.seed,
        "n_steps": record.n_steps,
        "model": record.model,
        "diameter": m["diameter"],
        "extremal_count": m["extremal_count"],
        "shape": classify_shape(hull, f_macro).to_dict(),
    }
    try:
        out["diameter_growth"] = diameter_growth_rate(record)
    except InsufficientData:
        out["diameter_growth"] = None
    return out
