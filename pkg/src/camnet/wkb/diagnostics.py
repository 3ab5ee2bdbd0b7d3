"""Numerical checks on traced trajectories: disc trapping, orientation reversal, phase covariance."""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass

import numpy as np

from camnet.wkb.curve import INF, HitchinPoint, branch_points, residue, truncation_disc
from camnet.wkb.trace import Tolerances, Tracer


@dataclass(frozen=True)
class TrappingResult:
    puncture: object
    radius: float
    worst_ratio: float  # max |z - d| / radius after the start, over all trajectories
    count: int
    trapped: bool
    lengths: tuple


def _matched_residues(h: HitchinPoint, d, z: complex, res) -> list[complex]:
    lam = h.eigenvalues(z)
    scaled = lam * (z - complex(d))
    best = min(itertools.permutations(range(len(lam))), key=lambda p: sum(abs(scaled[p[i]] - res[i]) for i in range(len(res))))
    return [lam[best[i]] for i in range(len(res))]


def trapping_test(
    h: HitchinPoint,
    d,
    count: int = 50,
    length_factor: float = 10.0,
    tol: Tolerances | None = None,
    radius: float | None = None,
) -> TrappingResult:
    """Start ``count`` trajectories on the boundary of the truncation disc at a finite
    puncture, flowing inward, and follow each for ``length_factor`` times the radius."""
    if d == INF:
        raise ValueError("trapping_test works at finite punctures")
    res = residue(h, d)
    r = radius if radius is not None else truncation_disc(h, d)
    tracer = Tracer(h, branch_points(h), {}, tol)
    inward = [(i, j) for i, j in itertools.permutations(range(len(res)), 2) if (res[i] - res[j]).real < 0]
    center = complex(d)
    worst = 0.0
    lengths = []
    for k in range(count):
        phi = 2 * math.pi * (k + 0.5) / count
        z0 = center + r * cmath.exp(1j * phi)
        i, j = inward[k % len(inward)]
        lam = _matched_residues(h, d, z0, res)

        def stop(z, travelled):
            if abs(z - center) < 1e-6 * r:
                return "reached-puncture", ("point", z)
            return None

        seg = tracer.flow(z0, (lam[i], lam[j]), length_factor * r, stop=stop, max_step=0.05 * r)
        pts = np.asarray(seg.points[1:])
        if len(pts):
            worst = max(worst, float(np.max(np.abs(pts - center))) / r)
        lengths.append(seg.length)
    return TrappingResult(d, r, worst, count, worst <= 1.0 + 1e-9, tuple(lengths))


def orientation_reversal_gap(h: HitchinPoint, z0: complex, pair: tuple[int, int], length: float = 0.5) -> float:
    """Flow (i, j) forward from z0, then flow (j, i) back from the end point; return the miss distance."""
    tracer = Tracer(h, branch_points(h), {})
    lam = tracer.sheets.labels(z0)
    i, j = pair
    fwd = tracer.flow(z0, (lam[i], lam[j]), length)
    # integrate back for the same parameter length; the polyline length is a chord sum and runs short
    back = tracer.flow(fwd.points[-1], (fwd.values[1], fwd.values[0]), length)
    return abs(back.points[-1] - z0)


def phase_covariance_gap(h: HitchinPoint, theta: float, samples=None) -> float:
    """Compare h with its phase rotation a_k -> e^{ik theta} a_k.

    Two things must match: the rotated direction field equals the original one
    times e^{-i theta} at sample points (for every sheet pair), and the primary
    seed directions at each branch point move by -2 theta / 3.  Returns the
    worst discrepancy.
    """
    hr = h.rotate_phase(theta)
    bps = branch_points(h)
    worst = 0.0
    if samples is None:
        samples = [complex(x, y) for x in (-1.7, 0.3, 2.1) for y in (-1.3, 0.45, 1.9)]
    rot = cmath.exp(-1j * theta)
    for z in samples:
        if min([abs(z - b) for b in bps] + [1.0]) < 1e-3:
            continue
        lam = h.eigenvalues(z)
        lam_r = hr.eigenvalues(z)
        for i, j in itertools.permutations(range(len(lam)), 2):
            d0 = lam[i] - lam[j]
            # the matching rotated eigenvalues are e^{i theta} lam
            a = lam_r[int(np.argmin(np.abs(lam_r - cmath.exp(1j * theta) * lam[i])))]
            c = lam_r[int(np.argmin(np.abs(lam_r - cmath.exp(1j * theta) * lam[j])))]
            d1 = a - c
            v0 = d0.conjugate() / abs(d0)
            v1 = d1.conjugate() / abs(d1)
            worst = max(worst, abs(v1 - rot * v0))
    for b in bps:
        orig = seed_directions(h, b)
        new = seed_directions(hr, b)
        for x in orig:
            target = x - 2 * theta / 3
            worst = max(worst, min(abs(cmath.exp(1j * target) - cmath.exp(1j * y)) for y in new))
    return worst


def seed_directions(h: HitchinPoint, b: complex) -> list[float]:
    tracer = Tracer(h, branch_points(h), {})
    return sorted(cmath.phase(z - b) % (2 * math.pi) for z, _ in tracer.primary_seeds(b))
