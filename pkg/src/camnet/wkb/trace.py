"""Stokes-curve seeding and trajectory integration.

A curve labelled by the sheet pair (i, j) follows the direction field

    dz/ds = conj(D) / |D|,    D = lambda_i(z) - lambda_j(z),

so that D * dz/ds is real and positive and s is arc length.  The two sheets are
followed by nearest-eigenvalue matching; their global indices change only
when the curve crosses a vertical cut, by the permutation of that cut.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import RK45
from scipy.optimize import brentq

from camnet.errors import SeedFailure, SheetTrackingLost
from camnet.wkb.curve import INF, HitchinPoint, SheetField

ACTIVE = "active"
ENDED_AT_DISC = "ended-at-disc"
ENDED_LEFT_CHART = "ended-left-chart"
ERROR_BRANCH = "error-ran-into-branch-point"
ERROR_DENSE = "error-dense"
ERROR_TRACKING = "error-sheet-tracking"


@dataclass
class Tolerances:
    rtol: float = 1e-8
    atol: float = 1e-10
    eps_bp: float = 1e-4  # times the domain scale
    eps_merge: float = 1e-5  # times the domain scale
    seed_radius: float = 1e-3  # times the domain scale
    max_step: float = 0.05  # times the domain scale
    length_cap: float = 50.0  # times the domain diameter
    disc_threshold: float = 0.1
    working_radius: float | None = None

    @classmethod
    def from_mapping(cls, data) -> "Tolerances":
        t = cls()
        for k, v in (data or {}).items():
            if not hasattr(t, k):
                raise KeyError(f"unknown tolerance {k!r}")
            if v is not None and float(v) <= 0:
                raise ValueError(f"tolerance {k} must be positive")
            setattr(t, k, None if v is None else float(v))
        return t


@dataclass
class CurveSegment:
    id: int
    label: tuple[int, int]  # global sheet pair at the first point
    points: list[complex]
    origin: tuple  # ("bp", index) or ("joint", id)
    iteration: int = 0
    status: str = ACTIVE
    end: tuple | None = None  # ("disc", puncture) or ("point", z)
    crossings: list = field(default_factory=list)  # (point index, cut index, +1 left->right / -1)
    residual: float = 0.0  # worst |Im(D zdot)| / |D| over accepted steps
    values: tuple = ()  # tracked (lambda_i, lambda_j) at the last point

    @property
    def length(self) -> float:
        pts = np.asarray(self.points)
        return float(np.sum(np.abs(np.diff(pts)))) if len(pts) > 1 else 0.0

    def label_at(self, k: int, cut_perms) -> tuple[int, int]:
        """Global label on the piece containing polyline edge k -> k+1."""
        i, j = self.label
        for idx, cut, sign in self.crossings:
            if idx > k:
                break
            perm = cut_perms[cut] if sign > 0 else _inverse(cut_perms[cut])
            i, j = perm[i], perm[j]
        return i, j

    def pieces(self, cut_perms) -> list[tuple[int, int, tuple[int, int]]]:
        """(first point, last point, label) for each cut-free piece of the polyline."""
        out = []
        start = 0
        i, j = self.label
        for idx, cut, sign in self.crossings:
            out.append((start, idx, (i, j)))
            perm = cut_perms[cut] if sign > 0 else _inverse(cut_perms[cut])
            i, j = perm[i], perm[j]
            start = idx
        out.append((start, len(self.points) - 1, (i, j)))
        return out

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "label": list(self.label),
            "origin": list(self.origin),
            "iteration": self.iteration,
            "status": self.status,
            "end": None if self.end is None else [self.end[0], _pt_json(self.end[1])],
            "crossings": [list(c) for c in self.crossings],
            "points": [[p.real, p.imag] for p in self.points],
            "residual": self.residual,
        }


def _pt_json(p):
    if p == INF:
        return INF
    p = complex(p)
    return [p.real, p.imag]


def _inverse(perm):
    inv = [0] * len(perm)
    for a, b in enumerate(perm):
        inv[b] = a
    return tuple(inv)


class Tracer:
    """Holds everything needed to seed and integrate curves of one Hitchin point."""

    def __init__(self, h: HitchinPoint, bps, discs: dict, tol: Tolerances | None = None):
        self.h = h
        self.bps = list(bps)
        self.discs = dict(discs)  # puncture -> radius (for INF: |z| > radius)
        self.tol = tol or Tolerances()
        pts = self.bps + h.finite_punctures
        self.scale = max([abs(p) for p in pts] + [1.0])
        diam = max([abs(a - b) for a, b in itertools.combinations(pts, 2)] + [1.0])
        self.diameter = diam
        self.sheets = SheetField(h, self.bps)
        self.cut_perms = [self._cut_permutation(c) for c in range(len(self.sheets.cut_points))]
        if INF in self.discs:
            self.chart_radius = self.discs[INF]
        else:
            self.chart_radius = self.tol.working_radius or 1e3 * self.scale
        self.length_cap = self.tol.length_cap * max(diam, 1.0)

    # -- sheets -----------------------------------------------------------

    def _cut_permutation(self, c: int) -> tuple[int, ...]:
        """perm[a] = global index just right of cut c of the sheet labelled a just left of it."""
        p = self.sheets.cut_points[c]
        others = [q for q in self.sheets.cut_points if q != p]
        dx = min([abs(q.real - p.real) for q in others if abs(q.real - p.real) > 0] + [self.scale])
        delta = 1e-3 * dx
        z = complex(p.real, p.imag + 0.5 * self.scale)
        left = self.sheets.labels(z - delta)
        right = self.sheets.labels(z + delta)
        return tuple(int(np.argmin(np.abs(right - v))) for v in left)

    def global_pair(self, z: complex, vi: complex, vj: complex) -> tuple[int, int]:
        lam = self.sheets.labels(z)
        i = int(np.argmin(np.abs(lam - vi)))
        j = int(np.argmin(np.abs(lam - vj)))
        if i == j:
            raise SheetTrackingLost(f"both tracked sheets match the same global sheet at {z}")
        return i, j

    # -- seeds ------------------------------------------------------------

    def primary_seeds(self, b: complex) -> list[tuple[complex, tuple[complex, complex]]]:
        """Three (start point, (lambda_i, lambda_j)) pairs around the branch point b."""
        r = self.tol.seed_radius * self.scale
        others = [abs(b - q) for q in self.bps + self.h.finite_punctures if abs(b - q) > 1e-9 * self.scale]
        if others:
            r = min(r, 0.01 * min(others))

        def pair(theta):
            z = b + r * cmath.exp(1j * theta)
            lam = self.h.eigenvalues(z)
            p, q = min(itertools.combinations(range(len(lam)), 2), key=lambda t: abs(lam[t[0]] - lam[t[1]]))
            return z, lam[p], lam[q]

        def f(theta):
            _, a, c = pair(theta)
            return ((a - c) * cmath.exp(1j * theta)) ** 2

        n = 720
        grid = [2 * math.pi * k / n for k in range(n + 1)]
        vals = [f(t) for t in grid]
        roots: list[float] = []
        for k in range(n):
            t0 = grid[k]
            t1 = grid[k + 1]
            v0, v1 = vals[k], vals[k + 1]
            if v0.imag == 0:
                if v0.real > 0:
                    roots.append(t0)
            elif v1.imag != 0 and v0.imag * v1.imag < 0:
                t = brentq(lambda th: f(th).imag, t0, t1, xtol=1e-14)
                if f(t).real > 0:
                    roots.append(t % (2 * math.pi))
        roots.sort()
        merged: list[float] = []
        for t in roots:
            if not merged or abs(cmath.exp(1j * t) - cmath.exp(1j * merged[-1])) > 1e-9:
                merged.append(t)
        if len(merged) > 1 and abs(cmath.exp(1j * merged[0]) - cmath.exp(1j * merged[-1])) <= 1e-9:
            merged.pop()
        roots = merged
        if len(roots) != 3:
            raise SeedFailure(f"found {len(roots)} seed directions at branch point {b}")
        out = []
        for t in roots:
            z, a, c = pair(t)
            if ((a - c) * cmath.exp(1j * t)).real < 0:
                a, c = c, a
            out.append((z, (a, c)))
        return out

    # -- integration ------------------------------------------------------

    def _singular_distance(self, z: complex) -> float:
        pts = self.bps + self.h.finite_punctures
        return min([abs(z - p) for p in pts] + [math.inf])

    def _step_cap(self, z: complex) -> float:
        cap = self.tol.max_step * self.scale
        d = self._singular_distance(z)
        cap = min(cap, max(0.1 * d, 1e-7 * self.scale))
        if abs(z) > 2 * self.scale:
            cap = max(cap, min(0.05 * abs(z), self.tol.max_step * abs(z)))
        return cap

    def _match(self, z: complex, ref: tuple[complex, complex]):
        lam = self.h.eigenvalues(z)
        i = int(np.argmin(np.abs(lam - ref[0])))
        j = int(np.argmin(np.abs(lam - ref[1])))
        return lam, i, j

    def _stop_reason(self, seg: CurveSegment, z: complex, travelled: float):
        for d, rad in self.discs.items():
            if d == INF:
                if abs(z) > rad:
                    return ENDED_AT_DISC, ("disc", INF)
            elif abs(z - complex(d)) < rad:
                return ENDED_AT_DISC, ("disc", d)
        if INF not in self.discs and abs(z) > self.chart_radius:
            return ENDED_LEFT_CHART, ("point", z)
        eps = self.tol.eps_bp * self.scale
        for k, b in enumerate(self.bps):
            if seg.origin == ("bp", k) and travelled < 4 * self.tol.seed_radius * self.scale:
                continue
            if abs(z - b) < max(eps, 0.5 * self.tol.seed_radius * self.scale):
                return ERROR_BRANCH, ("point", b)
        if travelled > self.length_cap:
            return ERROR_DENSE, ("point", z)
        return None

    def trace(self, seg: CurveSegment, values: tuple[complex, complex]) -> CurveSegment:
        """Integrate ``seg`` from its last point until a stopping condition."""

        def stop(z, travelled):
            return self._stop_reason(seg, z, travelled)

        self._integrate(seg, values, stop)
        if seg.status == ENDED_AT_DISC:
            self._clip_to_disc(seg, seg.points[-2], seg.points[-1])
        return seg

    def flow(self, z0: complex, values, length: float, stop=None, max_step: float | None = None) -> CurveSegment:
        """Follow the field of the tracked pair from z0 for a given arc length.

        ``stop(z, travelled)`` may end the flow early by returning a
        (status, end) pair.  Puncture discs and branch points are ignored
        unless ``stop`` checks them.
        """
        seg = CurveSegment(-1, (-1, -1), [z0], ("point", z0))

        def _stop(z, travelled):
            if stop is not None:
                hit = stop(z, travelled)
                if hit:
                    return hit
            return None

        self._integrate(seg, values, _stop, max_step=max_step, t_bound=length)
        if seg.status == ACTIVE:
            seg.status, seg.end = "ended-length", ("point", seg.points[-1])
        return seg

    def _integrate(
        self, seg: CurveSegment, values, stop, max_step: float | None = None, t_bound: float = np.inf
    ) -> None:
        ref = list(values)
        z0 = seg.points[-1]
        travelled = seg.length

        def cap(z):
            c = self._step_cap(z)
            return min(c, max_step) if max_step else c

        def rhs(_s, y):
            z = complex(y[0], y[1])
            lam = self.h.eigenvalues(z)
            a = lam[int(np.argmin(np.abs(lam - ref[0])))]
            c = lam[int(np.argmin(np.abs(lam - ref[1])))]
            dlt = a - c
            if dlt == 0:
                return np.zeros(2)
            v = dlt.conjugate() / abs(dlt)
            return np.array([v.real, v.imag])

        def new_solver(z, s):
            return RK45(
                rhs,
                s,
                np.array([z.real, z.imag]),
                t_bound=t_bound,
                max_step=cap(z),
                rtol=self.tol.rtol,
                atol=self.tol.atol * self.scale,
            )

        solver = new_solver(z0, travelled)
        retries = 0
        while True:
            prev_z = complex(solver.y[0], solver.y[1])
            solver.max_step = cap(prev_z)
            solver.step()
            if solver.status == "failed":
                seg.status = ERROR_TRACKING
                seg.end = ("point", prev_z)
                break
            z = complex(solver.y[0], solver.y[1])
            lam, i, j = self._match(z, ref)
            gaps = sorted(abs(lam - ref[0]))
            gaps2 = sorted(abs(lam - ref[1]))
            ambiguous = i == j or gaps[0] > 0.3 * gaps[1] or gaps2[0] > 0.3 * gaps2[1]
            if ambiguous:
                retries += 1
                if retries > 40:
                    seg.status = ERROR_TRACKING
                    seg.end = ("point", prev_z)
                    break
                solver = new_solver(prev_z, solver.t_old if solver.t_old is not None else travelled)
                solver.max_step = max(abs(z - prev_z) * 0.25, 1e-12)
                solver.h_abs = solver.max_step
                continue
            retries = 0
            ref = [lam[i], lam[j]]
            dlt = ref[0] - ref[1]
            f = solver.f
            zdot = complex(f[0], f[1])
            if abs(dlt) > 0:
                seg.residual = max(seg.residual, abs((dlt * zdot).imag) / abs(dlt))
            for _t, cut in self.sheets.cuts_crossed(prev_z, z):
                sign = 1 if z.real > prev_z.real else -1
                seg.crossings.append((len(seg.points), cut, sign))
            travelled += abs(z - prev_z)
            seg.points.append(z)
            hit = stop(z, travelled)
            if hit:
                seg.status, seg.end = hit
                break
            if solver.status == "finished":
                break
        seg.values = tuple(ref)

    def _clip_to_disc(self, seg: CurveSegment, z0: complex, z1: complex) -> None:
        d = seg.end[1]
        if d == INF:
            inside = lambda w: abs(w) > self.discs[INF]
        else:
            inside = lambda w: abs(w - complex(d)) < self.discs[d]
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if inside(z0 + mid * (z1 - z0)):
                hi = mid
            else:
                lo = mid
        seg.points[-1] = z0 + hi * (z1 - z0)


def trace_trajectory(tracer: Tracer, seg: CurveSegment, values) -> CurveSegment:
    return tracer.trace(seg, values)
