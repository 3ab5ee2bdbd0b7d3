"""Joint detection, new-curve spawning and the network build loop."""

from __future__ import annotations

import cmath
import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from typing import Sequence

import numpy as np

from camnet.errors import InputError, NonConvexJoint
from camnet.wkb.curve import INF, HitchinPoint, branch_points, condition_R, residue, truncation_disc
from camnet.wkb.trace import (
    ENDED_AT_DISC,
    CurveSegment,
    Tolerances,
    Tracer,
)


@dataclass
class Crossing:
    """Transversal intersection of two polylines at edge ka of a and edge kb of b."""

    a: int
    ka: int
    ta: float
    b: int
    kb: int
    tb: float
    z: complex


@dataclass
class Joint:
    id: int
    z: complex
    members: list[tuple[int, int, float]]  # (segment id, edge index, fraction along edge)
    spawned: list[int] = field(default_factory=list)
    iteration: int = 0
    labels: list[tuple[int, int]] = field(default_factory=list)  # per member, sheet pair at the joint
    tangents: list[complex] = field(default_factory=list)  # per member, unit tangent at the joint

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "z": [self.z.real, self.z.imag],
            "members": [list(m) for m in self.members],
            "spawned": list(self.spawned),
            "iteration": self.iteration,
            "labels": [list(x) for x in self.labels],
            "tangents": [[t.real, t.imag] for t in self.tangents],
        }


@dataclass
class Network:
    hitchin: HitchinPoint
    branch_points: list[complex]
    discs: dict
    segments: list[CurveSegment]
    joints: list[Joint]
    cut_points: list[complex]
    cut_perms: list[tuple[int, ...]]
    errors: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    order: list[int] = field(default_factory=list)  # joint ids in a topological order
    iterations: int = 0

    def segment(self, sid: int) -> CurveSegment:
        return self.segments[sid]

    def joints_on(self, sid: int) -> list[tuple[float, Joint]]:
        """Joints along a segment, sorted by polyline parameter (edge index + fraction)."""
        out = []
        for j in self.joints:
            for s, k, t in j.members:
                if s == sid:
                    out.append((k + t, j))
        out.sort(key=lambda x: x[0])
        return out

    def primaries(self) -> list[CurveSegment]:
        return [s for s in self.segments if s.origin[0] == "bp"]


# ---------------------------------------------------------------------------
# Polyline intersections with a spatial hash
# ---------------------------------------------------------------------------


def _seg_intersect(p0: complex, p1: complex, q0: complex, q1: complex):
    r = p1 - p0
    s = q1 - q0
    den = (r.conjugate() * s).imag
    if den == 0:
        return None
    w = q0 - p0
    t = (w.conjugate() * s).imag / den
    u = (w.conjugate() * r).imag / den
    if 0 <= t < 1 and 0 <= u < 1:
        return t, u
    return None


def polyline_intersections(a: Sequence[complex], b: Sequence[complex], cell: float | None = None, same: bool = False):
    """All (edge of a, t, edge of b, u, point) intersections, spatial-hash accelerated."""
    a = list(a)
    b = list(b)
    if len(a) < 2 or len(b) < 2:
        return []
    if cell is None:
        # size cells by the coarser polyline so long edges do not span huge numbers of cells
        la = np.median([abs(a[k + 1] - a[k]) for k in range(len(a) - 1)])
        lb = np.median([abs(b[k + 1] - b[k]) for k in range(len(b) - 1)])
        cell = max(4 * max(la, lb), 1e-9)
    grid: dict = defaultdict(list)

    def cells(p, q):
        x0, x1 = sorted((p.real, q.real))
        y0, y1 = sorted((p.imag, q.imag))
        for i in range(int(math.floor(x0 / cell)), int(math.floor(x1 / cell)) + 1):
            for j in range(int(math.floor(y0 / cell)), int(math.floor(y1 / cell)) + 1):
                yield i, j

    for k in range(len(a) - 1):
        for c in cells(a[k], a[k + 1]):
            grid[c].append(k)
    out = []
    seen = set()
    for m in range(len(b) - 1):
        for c in cells(b[m], b[m + 1]):
            for k in grid.get(c, ()):
                if (k, m) in seen:
                    continue
                seen.add((k, m))
                if same and abs(k - m) <= 1:
                    continue
                hit = _seg_intersect(a[k], a[k + 1], b[m], b[m + 1])
                if hit:
                    t, u = hit
                    out.append((k, t, m, u, a[k] + t * (a[k + 1] - a[k])))
    out.sort(key=lambda x: (x[0] + x[1]))
    return out


# ---------------------------------------------------------------------------
# Label algebra for GL(n): sheet pair (i, j) <-> root e_i - e_j
# ---------------------------------------------------------------------------


def pair_vector(label: tuple[int, int], n: int) -> tuple[int, ...]:
    v = [0] * n
    v[label[0]] += 1
    v[label[1]] -= 1
    return tuple(v)


def spawned_labels(labels: Sequence[tuple[int, int]]) -> list[tuple[int, int]]:
    """Sheet pairs in the restricted convex hull of the incoming pairs, minus the incoming ones.

    Raises NonConvexJoint if the incoming roots lie in no positive system,
    which for sheet pairs means some ordering of sheets is not compatible
    with all of them (a directed cycle i -> j -> ... -> i).
    """
    labels = list(dict.fromkeys(tuple(x) for x in labels))
    nodes = sorted({i for p in labels for i in p})
    ts = TopologicalSorter({v: set() for v in nodes})
    for i, j in labels:
        ts.add(j, i)
    try:
        tuple(ts.static_order())
    except CycleError as exc:
        raise NonConvexJoint(f"incoming labels {labels} are not convex") from exc
    # Conv^N for type A: e_i - e_k is reachable iff there is a directed path i -> ... -> k
    succ = defaultdict(set)
    for i, j in labels:
        succ[i].add(j)
    hull = set()
    for s in nodes:
        stack = [s]
        seen = set()
        while stack:
            v = stack.pop()
            for w in succ[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        hull.update((s, w) for w in seen)
    return sorted(hull - set(labels))


def in_positive_cone(t1: complex, t2: complex, t: complex, tol: float = 1e-9) -> bool:
    """True if t = c1 t1 + c2 t2 with c1, c2 > 0."""
    m = np.array([[t1.real, t2.real], [t1.imag, t2.imag]])
    if abs(np.linalg.det(m)) < 1e-14:
        return False
    c = np.linalg.solve(m, np.array([t.real, t.imag]))
    return bool(c[0] > -tol and c[1] > -tol)


# ---------------------------------------------------------------------------
# Build loop
# ---------------------------------------------------------------------------


class NetworkBuilder:
    def __init__(self, h: HitchinPoint, tol: Tolerances | None = None, max_iterations: int = 6):
        self.h = h
        self.tol = tol or Tolerances()
        self.max_iterations = max_iterations
        self.errors: list[str] = []
        self.notes: list[str] = []
        self.bps = branch_points(h)
        self.discs = self._discs()
        self.tracer = Tracer(h, self.bps, self.discs, self.tol)
        self.segments: list[CurveSegment] = []
        self.joints: list[Joint] = []
        self.scale = self.tracer.scale

    def _discs(self) -> dict:
        out = {}
        for d in self.h.punctures:
            try:
                out[d] = truncation_disc(self.h, d, threshold=self.tol.disc_threshold)
            except Exception as exc:  # irregular infinity: fall back to the working radius
                if d != INF:
                    raise
                scale = max([abs(p) for p in self.bps + self.h.finite_punctures] + [1.0])
                out[d] = self.tol.working_radius or 20.0 * scale
                self.notes.append(f"infinity: {exc.__class__.__name__}; using working radius {out[d]:.6g}")
        return out

    def primary_curves(self, k: int) -> list[CurveSegment]:
        b = self.bps[k]
        out = []
        for z, vals in self.tracer.primary_seeds(b):
            label = self.tracer.global_pair(z, *vals)
            seg = CurveSegment(len(self.segments), label, [z], ("bp", k), iteration=0)
            self.segments.append(seg)
            self.tracer.trace(seg, vals)
            out.append(seg)
        return out

    def _label_at(self, seg: CurveSegment, k: int) -> tuple[int, int]:
        return seg.label_at(k, self.tracer.cut_perms)

    def _near_joint(self, z: complex, a: int, b: int) -> bool:
        eps = max(self.tol.eps_merge * self.scale, 1e-9)
        for j in self.joints:
            ids = {m[0] for m in j.members} | set(j.spawned)
            if a in ids and b in ids and abs(j.z - z) < 1e3 * eps:
                return True
        return False

    def _tangent(self, seg: CurveSegment, k: int) -> complex:
        d = seg.points[k + 1] - seg.points[k]
        return d / abs(d)

    def detect_joints(self, fresh: set[int]) -> list[Crossing]:
        found = []
        ids = list(range(len(self.segments)))
        for a, b in itertools.combinations(ids, 2):
            if a not in fresh and b not in fresh:
                continue
            sa, sb = self.segments[a], self.segments[b]
            for ka, ta, kb, tb, z in polyline_intersections(sa.points, sb.points):
                if self._near_joint(z, a, b):
                    continue
                if self._inside_disc(z):
                    continue
                found.append(Crossing(a, ka, ta, b, kb, tb, z))
        return found

    def _inside_disc(self, z: complex) -> bool:
        for d, r in self.discs.items():
            if d == INF:
                if abs(z) > r:
                    return True
            elif abs(z - complex(d)) < r:
                return True
        return False

    def _refine(self, c: Crossing) -> complex:
        """Re-trace both curves near the crossing with a fine step and intersect again."""
        fine = []
        for sid, k in ((c.a, c.ka), (c.b, c.kb)):
            seg = self.segments[sid]
            p0 = seg.points[k]
            length = 2.0 * abs(seg.points[k + 1] - p0)
            lab = self._label_at(seg, k)
            lam = self.tracer.sheets.labels(p0) if not self._on_cut(p0) else None
            if lam is None:
                return c.z
            pts = self._local_trace(p0, (lam[lab[0]], lam[lab[1]]), length)
            fine.append(pts)
        hits = polyline_intersections(fine[0], fine[1])
        if not hits:
            return c.z
        return min((h[4] for h in hits), key=lambda z: abs(z - c.z))

    def _on_cut(self, z: complex) -> bool:
        return any(abs(z.real - p.real) < 1e-12 and z.imag >= p.imag for p in self.tracer.sheets.cut_points)

    def _local_trace(self, z0: complex, vals, length: float) -> list[complex]:
        return self.tracer.flow(z0, vals, length, max_step=max(length / 400.0, 1e-9)).points

    def register(self, c: Crossing, iteration: int) -> Joint | None:
        z = self._refine(c)
        sa, sb = self.segments[c.a], self.segments[c.b]
        la, lb = self._label_at(sa, c.ka), self._label_at(sb, c.kb)
        eps = max(self.tol.eps_merge * self.scale, 1e-9)
        for j in self.joints:
            if abs(j.z - z) < eps:
                for sid, k, t, lab, tan in ((c.a, c.ka, c.ta, la, self._tangent(sa, c.ka)), (c.b, c.kb, c.tb, lb, self._tangent(sb, c.kb))):
                    if sid not in [m[0] for m in j.members]:
                        j.members.append((sid, k, t))
                        j.labels.append(lab)
                        j.tangents.append(tan)
                return None
        if la == lb or la == (lb[1], lb[0]):
            self.errors.append(f"curves {c.a} and {c.b} with labels {la}, {lb} cross at {z:.6g}; tangent rays are not distinct")
            return None
        j = Joint(
            len(self.joints),
            z,
            [(c.a, c.ka, c.ta), (c.b, c.kb, c.tb)],
            iteration=iteration,
            labels=[la, lb],
            tangents=[self._tangent(sa, c.ka), self._tangent(sb, c.kb)],
        )
        if abs((j.tangents[0].conjugate() * j.tangents[1]).imag) < 1e-8:
            self.errors.append(f"joint at {z:.6g}: incoming tangents are parallel")
        self.joints.append(j)
        return j

    def spawn_new_curves(self, j: Joint, iteration: int) -> list[CurveSegment]:
        new = spawned_labels(j.labels)
        out = []
        if not new:
            return out
        lam = self.tracer.sheets.labels(j.z)
        for i, k in new:
            vals = (lam[i], lam[k])
            seg = CurveSegment(len(self.segments), (i, k), [j.z], ("joint", j.id), iteration=iteration)
            self.segments.append(seg)
            self.tracer.trace(seg, vals)
            j.spawned.append(seg.id)
            out.append(seg)
            if len(seg.points) > 1 and len(j.tangents) >= 2:
                t = self._tangent(seg, 0)
                if not in_positive_cone(j.tangents[0], j.tangents[1], t, tol=1e-3):
                    self.errors.append(f"joint {j.id}: new curve tangent outside the parents' cone")
        return out

    def build(self) -> Network:
        fresh = set()
        for k in range(len(self.bps)):
            fresh.update(s.id for s in self.primary_curves(k))
        it = 0
        while fresh and it < self.max_iterations:
            it += 1
            crossings = self.detect_joints(fresh)
            crossings.sort(key=lambda c: (c.z.real, c.z.imag))
            fresh = set()
            for c in crossings:
                try:
                    j = self.register(c, it)
                except NonConvexJoint as exc:
                    self.errors.append(str(exc))
                    continue
                if j is None:
                    continue
                try:
                    fresh.update(s.id for s in self.spawn_new_curves(j, it))
                except NonConvexJoint as exc:
                    self.errors.append(f"joint {j.id}: {exc}")
        if fresh:
            self.errors.append(f"iteration bound {self.max_iterations} reached with new curves still appearing")
        for s in self.segments:
            if s.status.startswith("error"):
                self.errors.append(f"segment {s.id}: {s.status}")
        net = Network(
            self.h,
            self.bps,
            self.discs,
            self.segments,
            self.joints,
            list(self.tracer.sheets.cut_points),
            list(self.tracer.cut_perms),
            self.errors,
            self.notes,
            iterations=it,
        )
        try:
            net.order = joint_order(net)
        except CycleError:
            net.errors.append("network graph contains an oriented cycle")
        return net


def condition_R_blockers(h: HitchinPoint) -> list:
    """Punctures where Condition R fails; an irregular infinity is handled by the working radius."""
    rep = condition_R(h)
    return [d for d, res, worst, ok, msg in rep.details if not ok and not (d == INF and res is None)]


def build_network(h: HitchinPoint, tol: Tolerances | None = None, max_iterations: int = 6) -> Network:
    bad = condition_R_blockers(h)
    if bad:
        raise InputError(f"Condition R fails at punctures {bad}")
    return NetworkBuilder(h, tol, max_iterations).build()


# ---------------------------------------------------------------------------
# Graph structure
# ---------------------------------------------------------------------------


def network_edges(net: Network) -> list[tuple[tuple, tuple, int]]:
    """Directed edges (tail vertex, head vertex, segment id) after splitting at joints."""
    edges = []
    for s in net.segments:
        tail = ("bp", s.origin[1]) if s.origin[0] == "bp" else ("joint", s.origin[1])
        for _, j in net.joints_on(s.id):
            edges.append((tail, ("joint", j.id), s.id))
            tail = ("joint", j.id)
        if s.status == ENDED_AT_DISC:
            head = ("disc", _vertex_name(s.end[1]))
        else:
            head = ("end", s.id)
        edges.append((tail, head, s.id))
    return edges


def _vertex_name(p):
    if p == INF:
        return INF
    p = complex(p)
    return f"{p.real:.12g}{p.imag:+.12g}i"


def joint_order(net: Network) -> list[int]:
    ts = TopologicalSorter()
    for tail, head, _ in network_edges(net):
        ts.add(head, tail)
    order = [v for v in ts.static_order() if v[0] == "joint"]
    return [v[1] for v in order]


def is_acyclic(net: Network) -> bool:
    try:
        joint_order(net)
        return True
    except CycleError:
        return False


BRANCH_TO_PUNCTURE = "branch->puncture"
JOINT_TO_PUNCTURE = "joint->puncture"
JOINT_TO_BRANCH = "joint->branch(error)"
OTHER = "other"


def classify_ends(net: Network) -> dict[int, str]:
    out = {}
    for s in net.segments:
        if s.status == ENDED_AT_DISC:
            out[s.id] = BRANCH_TO_PUNCTURE if s.origin[0] == "bp" else JOINT_TO_PUNCTURE
        elif s.status == "error-ran-into-branch-point" and s.origin[0] == "joint":
            out[s.id] = JOINT_TO_BRANCH
        else:
            out[s.id] = OTHER
    return out


def census(net: Network) -> dict[str, int]:
    counts: dict[str, int] = defaultdict(int)
    for v in classify_ends(net).values():
        counts[v] += 1
    return dict(counts)
