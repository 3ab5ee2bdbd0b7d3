"""Non-abelianization of N-local systems along a traced network.

Gauge and loop conventions
--------------------------
Everything is written in the *cut gauge* of the network: on the complement of
the vertical upward cuts the bundle is trivialized by the globally labelled
sheet frame, so ordinary parallel transport is the identity away from cuts.
Crossing cut k from left to right applies the monomial matrix G_k, which
sends the left sheet a to the right sheet perm_k(a).

Loops are based at a point far below every vertex.  The generator attached to
a cut point (branch point or finite puncture) is the keyhole loop that goes
straight up to just below that point and circles it counterclockwise; in the
cut gauge its monodromy is exactly G_k^{-1}.  The loop around infinity is the
big clockwise circle through the base point, so that for genus zero

    M_inf * M_leftmost * ... * M_rightmost = I.

A network curve labelled (i, j) carries a factor I + c E_ij.  A path that
crosses it from the curve's right side to its left side picks up the factor,
the opposite crossing picks up the inverse.  With these conventions a small
counterclockwise loop around a branch point reads M * S3 * S2 * S1, where S1,
S2, S3 are the primary curves in counterclockwise order starting next to the
cut, and the clockwise word of factors around a joint is the word the
scattering solver makes trivial.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import expm

from camnet.errors import (
    BadShape,
    FlatnessViolation,
    InconsistentCoverData,
    InputError,
    PathTouchesNetworkVertex,
    TransportInconsistent,
    VerificationFailure,
    WrongRamificationMonodromy,
)
from camnet.liealg import build_chevalley_table
from camnet.scattering import make_diagram, solve, verify_solution
from camnet.unipotent import NilElement
from camnet.wkb.curve import GROUPS, INF
from camnet.wkb.network import Network

SCHEMA = "camnet/1"


# ---------------------------------------------------------------------------
# Representation
# ---------------------------------------------------------------------------


def unit(n: int, i: int, j: int) -> np.ndarray:
    m = np.zeros((n, n), dtype=complex)
    m[i, j] = 1.0
    return m


@dataclass
class GroupRep:
    """Defining representation of SL(n) or GL(n) with its Chevalley generators."""

    group: str

    def __post_init__(self):
        if self.group not in GROUPS:
            raise InputError(f"unsupported group {self.group!r}")
        self.n = GROUPS[self.group]
        self.table = build_chevalley_table(f"A{self.n - 1}")
        self._root_of: dict[tuple[int, int], tuple[int, int]] = {}
        for g, mat in self.table.matrices.items():
            nz = [(i, j) for i in range(self.n) for j in range(self.n) if mat[i][j] != 0]
            if len(nz) != 1:
                raise AssertionError("type A root vectors should be single matrix units")
            i, j = nz[0]
            self._root_of[(i, j)] = (g, int(mat[i][j]))

    def root(self, i: int, j: int) -> int:
        """Root index whose root space is spanned by E_ij."""
        return self._root_of[(i, j)][0]

    def sign(self, i: int, j: int) -> int:
        """rho(e_root) = sign * E_ij."""
        return self._root_of[(i, j)][1]

    def pair_of(self, g: int) -> tuple[int, int]:
        for pair, (h, _) in self._root_of.items():
            if h == g:
                return pair
        raise KeyError(g)

    def e(self, i: int, j: int) -> np.ndarray:
        return self.sign(i, j) * unit(self.n, i, j)

    def n_alpha(self, i: int, j: int) -> np.ndarray:
        """exp(e_a) exp(e_-a) exp(e_a) for the root a of E_ij."""
        ea, ef = self.e(i, j), self.e(j, i)
        return expm(ea) @ expm(ef) @ expm(ea)

    def alpha_torus(self, i: int, j: int, tau: complex) -> np.ndarray:
        t = np.eye(self.n, dtype=complex)
        t[i, i] = tau
        t[j, j] = 1 / tau
        return t


def _norm(m: np.ndarray) -> float:
    return float(np.max(np.abs(m))) if m.size else 0.0


# ---------------------------------------------------------------------------
# Local systems
# ---------------------------------------------------------------------------


@dataclass
class LocalSystemData:
    """Monodromies of keyhole loops, named ``branch:k`` / ``puncture:k`` / ``puncture:inf``."""

    rep: GroupRep
    generators: dict[str, np.ndarray]
    relation_tolerance: float = 1e-8
    convention: str = "base-below/keyhole-ccw/inf-cw"

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "rep": self.rep.group,
            "convention": self.convention,
            "relationTolerance": self.relation_tolerance,
            "generators": [{"name": k, "matrix": matrix_to_json(v)} for k, v in self.generators.items()],
        }


def matrix_to_json(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def matrix_from_json(rows) -> np.ndarray:
    try:
        return np.array([[complex(float(x[0]), float(x[1])) for x in row] for row in rows], dtype=complex)
    except (TypeError, IndexError, ValueError) as exc:
        raise InputError(f"bad matrix entry: {exc}") from exc


def local_system_from_json(data: Mapping) -> LocalSystemData:
    try:
        rep = GroupRep(str(data["rep"]))
        gens = {}
        for g in data["generators"]:
            m = matrix_from_json(g["matrix"])
            if m.shape != (rep.n, rep.n):
                raise InputError(f"generator {g['name']} has shape {m.shape}, expected {(rep.n, rep.n)}")
            gens[str(g["name"])] = m
        return LocalSystemData(rep, gens, float(data.get("relationTolerance", 1e-8)))
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed local system: {exc}") from exc


def cut_name(net: Network, k: int) -> str:
    nb = len(net.branch_points)
    return f"branch:{k}" if k < nb else f"puncture:{k - nb}"


def _transposition(perm: Sequence[int]) -> tuple[int, int] | None:
    moved = [a for a, b in enumerate(perm) if a != b]
    if len(moved) == 2 and perm[moved[0]] == moved[1]:
        return moved[0], moved[1]
    return None


@dataclass
class SReport:
    ok: bool
    details: list[tuple[str, str]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"ok": self.ok, "details": [{"loop": k, "problem": v} for k, v in self.details]}


def check_S_monodromy(ls: LocalSystemData, net: Network, tol: float = 1e-9) -> SReport:
    """Branch monodromies must be the identity off the colliding pair and [[0, a], [-1/a, 0]] on it."""
    details = []
    n = ls.rep.n
    for k in range(len(net.cut_points)):
        name = cut_name(net, k)
        m = ls.generators.get(name)
        if m is None:
            details.append((name, "missing generator"))
            continue
        perm = net.cut_perms[k]
        # M = G^{-1} maps the right sheet perm(a) back to a
        shape_ok = all(
            abs(m[a, b]) <= tol for b in range(n) for a in range(n) if a != _inv(perm)[b]
        )
        if not shape_ok:
            details.append((name, f"not monomial with the cut permutation {list(perm)}"))
            continue
        if k >= len(net.branch_points):
            continue
        pair = _transposition(perm)
        if pair is None:
            details.append((name, f"cut permutation {list(perm)} is not a transposition"))
            continue
        p, q = pair
        for c in range(n):
            if c not in pair and abs(m[c, c] - 1) > tol:
                details.append((name, f"non-colliding sheet {c} has monodromy {m[c, c]:.6g}, expected 1"))
        prod = m[p, q] * m[q, p]
        if abs(prod + 1) > tol * max(1.0, abs(m[p, q]), abs(m[q, p])):
            details.append((name, f"block [[0, {m[p, q]:.6g}], [{m[q, p]:.6g}, 0]] has off-diagonal product {prod:.6g}, expected -1"))
    return SReport(not details, details)


def _inv(perm: Sequence[int]) -> tuple[int, ...]:
    out = [0] * len(perm)
    for a, b in enumerate(perm):
        out[b] = a
    return tuple(out)


def cut_transports(ls: LocalSystemData, net: Network) -> list[np.ndarray]:
    return [np.linalg.inv(ls.generators[cut_name(net, k)]) for k in range(len(net.cut_points))]


# ---------------------------------------------------------------------------
# Branch points
# ---------------------------------------------------------------------------


def primary_factors(
    m: np.ndarray, pair: tuple[int, int], rep: GroupRep, branch: int = 1, tol: float = 1e-9
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(u_a, u_-a, u_a) with M u_a u_-a u_a = I, where a is the root of E_pq.

    M = n_a t_a with t_a = diag(tau, 1/tau) on the pair; the factors are
    Ad_{t^{-1/2}} exp(-e_{+-a}).  ``branch`` picks the sign of the square root.
    """
    p, q = pair
    t = np.linalg.solve(rep.n_alpha(p, q), m)
    off = t - np.diag(np.diag(t))
    if _norm(off) > tol * max(1.0, _norm(m)):
        raise BadShape(f"n_a^-1 M is not diagonal (off-diagonal size {_norm(off):.3g})")
    for c in range(rep.n):
        if c not in pair and abs(t[c, c] - 1) > tol:
            raise BadShape(f"monodromy moves the non-colliding sheet {c}")
    tau = t[p, p]
    if abs(tau * t[q, q] - 1) > tol * max(1.0, abs(tau), abs(t[q, q])):
        raise BadShape("the torus part is not in the coroot torus of the pair")
    s = branch * cmath.sqrt(tau)
    half = rep.alpha_torus(p, q, s)
    half_inv = rep.alpha_torus(p, q, 1 / s)
    u_plus = half_inv @ expm(-rep.e(p, q)) @ half
    u_minus = half_inv @ expm(-rep.e(q, p)) @ half
    return u_plus, u_minus, u_plus


def _loop_order(net: Network, k: int) -> list[int]:
    """Primary segments of branch point k, counterclockwise starting next to the upward cut."""
    b = net.branch_points[k]
    segs = [s for s in net.segments if s.origin == ("bp", k)]
    return [s.id for s in sorted(segs, key=lambda s: (cmath.phase(s.points[0] - b) - math.pi / 2) % (2 * math.pi))]


# ---------------------------------------------------------------------------
# Segment geometry in the cut gauge
# ---------------------------------------------------------------------------


def _cuts_on_step(cut_points: Sequence[complex], z0: complex, z1: complex) -> list[tuple[float, int, int]]:
    """(fraction, cut, +1 left->right / -1) for the straight step z0 -> z1."""
    out = []
    dx = z1.real - z0.real
    if dx == 0:
        return out
    for c, p in enumerate(cut_points):
        t = (p.real - z0.real) / dx
        if 0 <= t < 1:
            y = z0.imag + t * (z1.imag - z0.imag)
            if y > p.imag:
                out.append((t, c, 1 if dx > 0 else -1))
    out.sort()
    return out


def segment_cut_crossings(net: Network, sid: int) -> list[tuple[float, int, int]]:
    """(polyline parameter, cut, sign) along a segment; the parameter is edge index + fraction."""
    pts = net.segments[sid].points
    out = []
    for k in range(len(pts) - 1):
        for t, c, sgn in _cuts_on_step(net.cut_points, pts[k], pts[k + 1]):
            out.append((k + t, c, sgn))
    return out


def segment_point(net: Network, sid: int, param: float) -> complex:
    pts = net.segments[sid].points
    k = min(int(math.floor(param)), len(pts) - 2)
    t = param - k
    return pts[k] + t * (pts[k + 1] - pts[k])


def segment_label(net: Network, sid: int, param: float) -> tuple[int, int]:
    i, j = net.segments[sid].label
    for p, c, sgn in segment_cut_crossings(net, sid):
        if p > param:
            break
        perm = net.cut_perms[c] if sgn > 0 else _inv(net.cut_perms[c])
        i, j = perm[i], perm[j]
    return i, j


# ---------------------------------------------------------------------------
# Stokes assignment via the scattering solver
# ---------------------------------------------------------------------------


@dataclass
class StokesAssignment:
    """Per segment: factor events (parameter, matrix in the frame at that point)."""

    net: Network
    cuts: list[np.ndarray]
    events: dict[int, list[tuple[float, np.ndarray]]]
    joints: dict[int, dict] = field(default_factory=dict)

    def factor_at(self, sid: int, param: float) -> np.ndarray:
        evs = self.events.get(sid)
        if not evs:
            raise VerificationFailure(f"segment {sid} has no Stokes factor")
        start, mat = evs[0]
        for p, m in evs:
            if p <= param:
                start, mat = p, m
        g = np.eye(mat.shape[0], dtype=complex)
        for p, c, sgn in segment_cut_crossings(self.net, sid):
            if start < p <= param:
                step = self.cuts[c] if sgn > 0 else np.linalg.inv(self.cuts[c])
                g = step @ g
        return g @ mat @ np.linalg.inv(g)

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "segments": [
                {"segment": sid, "events": [{"param": p, "matrix": matrix_to_json(m)} for p, m in evs]}
                for sid, evs in sorted(self.events.items())
            ],
            "joints": [dict(v, joint=k) for k, v in sorted(self.joints.items())],
        }


def _coefficient(mat: np.ndarray, label: tuple[int, int], tol: float = 1e-9) -> complex:
    i, j = label
    n = mat.shape[0]
    rest = mat - np.eye(n) - mat[i, j] * unit(n, i, j)
    if _norm(rest) > tol * max(1.0, abs(mat[i, j])):
        raise TransportInconsistent(f"factor is not in the root space of the label {label}")
    return complex(mat[i, j])


def _check_network(net: Network) -> None:
    bad = [s.id for s in net.segments if s.status.startswith("error")]
    if bad or any("cycle" in e for e in net.errors):
        raise VerificationFailure(f"network carries errors (segments {bad}); non-abelianization needs a clean network")
    if len(net.order) != len(net.joints):
        raise VerificationFailure("joints are not totally ordered")


def _joint_rays(net: Network, jid: int):
    """(direction, sheet pair, role, segment id, parameter) for every ray at a joint."""
    j = net.joints[jid]
    rays = []
    for sid, k, t in j.members:
        seg = net.segments[sid]
        tan = seg.points[k + 1] - seg.points[k]
        tan /= abs(tan)
        label = segment_label(net, sid, k + t)
        rays.append((-tan, label, "in", sid, k + t))
        rays.append((tan, label, "out", sid, k + t))
    for sid in j.spawned:
        seg = net.segments[sid]
        if len(seg.points) < 2:
            raise VerificationFailure(f"spawned segment {sid} has no extent")
        tan = seg.points[1] - seg.points[0]
        rays.append((tan / abs(tan), seg.label, "out", sid, 0.0))
    return rays


def _clockwise_pos(direction: complex) -> float:
    return (-cmath.phase(direction) / (2 * math.pi)) % 1.0


def assign_all_factors(ls: LocalSystemData, net: Network) -> StokesAssignment:
    _check_network(net)
    rep = ls.rep
    s_rep = check_S_monodromy(ls, net)
    if not s_rep.ok:
        raise BadShape("; ".join(f"{a}: {b}" for a, b in s_rep.details))
    cuts = cut_transports(ls, net)
    asg = StokesAssignment(net, cuts, {})
    for k in range(len(net.branch_points)):
        order = _loop_order(net, k)
        if len(order) != 3:
            raise VerificationFailure(f"branch point {k} has {len(order)} primary curves")
        labels = [net.segments[s].label for s in order]
        p, q = labels[0]
        if labels[2] != (p, q) or labels[1] != (q, p):
            raise VerificationFailure(f"primary labels {labels} at branch point {k} do not alternate")
        ua, um, _ = primary_factors(ls.generators[cut_name(net, k)], (p, q), rep)
        for sid, mat in zip(order, (ua, um, ua)):
            asg.events[sid] = [(0.0, mat)]
    for jid in net.order:
        _solve_joint(asg, rep, jid)
    return asg


def _solve_joint(asg: StokesAssignment, rep: GroupRep, jid: int) -> None:
    net = asg.net
    rays = _joint_rays(net, jid)
    spec = [(_clockwise_pos(d), role, rep.root(*label)) for d, label, role, _, _ in rays]
    diagram = make_diagram(rep.table, spec)
    incoming = {}
    for idx, (_, label, role, sid, param) in enumerate(rays):
        if role == "in":
            c = _coefficient(asg.factor_at(sid, param), label)
            incoming[idx] = NilElement.single(rep.table, rep.root(*label), c * rep.sign(*label))
    out = solve(diagram, incoming)
    residual = verify_solution(diagram, {**incoming, **out})
    coeffs = []
    for idx, (_, label, role, sid, param) in enumerate(rays):
        if role != "out":
            continue
        x = out[idx]
        g = rep.root(*label)
        if x.support - {g}:
            raise VerificationFailure(f"joint {jid}: outgoing factor leaves its root space")
        c = complex(x[g]) * rep.sign(*label)
        mat = np.eye(rep.n, dtype=complex) + c * unit(rep.n, *label)
        asg.events.setdefault(sid, []).append((param, mat))
        asg.events[sid].sort(key=lambda e: e[0])
        coeffs.append({"segment": sid, "label": list(label), "coefficient": [c.real, c.imag]})
    asg.joints[jid] = {
        "residual": max([abs(complex(v)) for v in residual.coeffs.values()] + [0.0]),
        "outgoing": coeffs,
    }


# ---------------------------------------------------------------------------
# Regluing
# ---------------------------------------------------------------------------


def _scale(net: Network) -> float:
    pts = list(net.branch_points) + [j.z for j in net.joints] + [complex(d) for d in net.discs if d != INF]
    return max([abs(p) for p in pts] + [1.0])


def _check_path(net: Network, path: Sequence[complex], tol: float) -> None:
    vertices = [("branch point", b) for b in net.branch_points] + [("joint", j.z) for j in net.joints]
    for kind, v in vertices:
        for k in range(len(path) - 1):
            a, b = path[k], path[k + 1]
            d = b - a
            t = 0.0 if d == 0 else min(1.0, max(0.0, ((v - a) * d.conjugate()).real / abs(d) ** 2))
            if abs(a + t * d - v) < tol:
                raise PathTouchesNetworkVertex(f"path passes within {tol:g} of the {kind} at {v:.6g}")


def crossings(a: Sequence[complex], b: Sequence[complex]) -> list[tuple[int, float, int, float]]:
    """All (edge of a, fraction, edge of b, fraction) where two polylines cross."""
    pa = np.asarray(a, dtype=complex)
    pb = np.asarray(b, dtype=complex)
    a0, a1 = pa[:-1], pa[1:]
    b0, b1 = pb[:-1], pb[1:]
    lo = np.minimum(a0.real, a1.real).min(), np.minimum(a0.imag, a1.imag).min()
    hi = np.maximum(a0.real, a1.real).max(), np.maximum(a0.imag, a1.imag).max()
    keep = np.nonzero(
        (np.maximum(b0.real, b1.real) >= lo[0])
        & (np.minimum(b0.real, b1.real) <= hi[0])
        & (np.maximum(b0.imag, b1.imag) >= lo[1])
        & (np.minimum(b0.imag, b1.imag) <= hi[1])
    )[0]
    if not len(keep):
        return []
    r = (a1 - a0)[:, None]
    s = (b1 - b0)[keep][None, :]
    w = b0[keep][None, :] - a0[:, None]
    den = (r.conj() * s).imag
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (w.conj() * s).imag / den
        u = (w.conj() * r).imag / den
    hit = (den != 0) & (t >= 0) & (t < 1) & (u >= 0) & (u < 1)
    ia, ib = np.nonzero(hit)
    return [(int(i), float(t[i, j]), int(keep[j]), float(u[i, j])) for i, j in zip(ia, ib)]


def reglue_transport(
    net: Network, cuts: Sequence[np.ndarray], factors, path: Sequence[complex], vertex_tol: float | None = None
) -> np.ndarray:
    """Transport along a polyline: cut matrices interleaved with Stokes factors (or their inverses)."""
    path = [complex(z) for z in path]
    if vertex_tol is None:
        vertex_tol = 1e-6 * _scale(net)
    _check_path(net, path, vertex_tol)
    n = cuts[0].shape[0]
    events = []
    for k in range(len(path) - 1):
        for t, c, sgn in _cuts_on_step(net.cut_points, path[k], path[k + 1]):
            events.append((k + t, cuts[c] if sgn > 0 else np.linalg.inv(cuts[c])))
    for seg in net.segments:
        if len(seg.points) < 2:
            continue
        for ka, ta, kb, tb in crossings(path, seg.points):
            tau = seg.points[kb + 1] - seg.points[kb]
            delta = path[ka + 1] - path[ka]
            s = factors.factor_at(seg.id, kb + tb)
            right_to_left = (tau.conjugate() * delta).imag > 0
            events.append((ka + ta, s if right_to_left else np.linalg.inv(s)))
    events.sort(key=lambda e: e[0])
    out = np.eye(n, dtype=complex)
    for _, m in events:
        out = m @ out
    return out


def circle(center: complex, radius: float, start: float = -math.pi / 2, clockwise: bool = False, count: int = 720) -> list[complex]:
    sgn = -1 if clockwise else 1
    return [center + radius * cmath.exp(1j * (start + sgn * 2 * math.pi * k / count)) for k in range(count + 1)]


def _vertex_gap(net: Network, z: complex, exclude: complex | None = None) -> float:
    pts = list(net.branch_points) + [j.z for j in net.joints]
    gaps = [abs(z - p) for p in pts if exclude is None or abs(p - exclude) > 1e-12]
    for d, r in net.discs.items():
        if d != INF and (exclude is None or abs(complex(d) - exclude) > 1e-12):
            gaps.append(abs(z - complex(d)) - r)
    return min(gaps + [math.inf])


@dataclass
class Loops:
    base: complex
    radius: float  # big circle through the base point
    keyholes: dict[str, list[complex]]
    order: list[str]  # finite punctures from left to right
    infinity: list[complex] | None


def standard_loops(net: Network) -> Loops:
    """Base point and generator loops (see the module docstring)."""
    reach = max(
        [abs(b) for b in net.branch_points]
        + [abs(j.z) for j in net.joints]
        + [abs(complex(d)) + r for d, r in net.discs.items() if d != INF]
        + [1.0]
    )
    R = 1.5 * reach + 0.5
    if INF in net.discs:
        R = min(R, 0.5 * (reach + net.discs[INF]))
        if not reach < R < net.discs[INF]:
            raise InputError("no room for a base circle between the finite vertices and the disc at infinity")
    base = complex(0.0, -R)
    keyholes = {}
    finite = [complex(p) for p in net.hitchin.finite_punctures]
    xs = [p.real for p in finite]
    for idx, d in enumerate(finite):
        r_d = _disc_of(net, d)
        rho = min(1.5 * r_d, 0.5 * (_vertex_gap(net, d, exclude=d) + r_d))
        if any(abs(x - d.real) < 1e-12 and o.imag < d.imag for x, o in zip(xs, finite) if o != d):
            raise PathTouchesNetworkVertex(f"keyhole stem to {d} runs into another puncture")
        stem = [base, complex(d.real, -R), complex(d.real, d.imag - rho)]
        ring = circle(d, rho)
        keyholes[f"puncture:{idx}"] = stem + ring[1:] + stem[::-1][1:]
    order = [f"puncture:{i}" for i in sorted(range(len(finite)), key=lambda i: finite[i].real)]
    infinity = circle(0j, R, clockwise=True) if INF in net.hitchin.punctures else None
    return Loops(base, R, keyholes, order, infinity)


def _disc_of(net: Network, d: complex) -> float:
    for p, r in net.discs.items():
        if p != INF and abs(complex(p) - d) < 1e-9:
            return r
    raise InputError(f"no truncation disc recorded for the puncture {d}")


@dataclass
class NonabResult:
    generators: dict[str, np.ndarray]
    flatness: dict[str, float]
    relation_residual: float
    worst: float
    factors: object = None

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "generators": [{"name": k, "matrix": matrix_to_json(v)} for k, v in self.generators.items()],
            "flatness": dict(sorted(self.flatness.items())),
            "relation_residual": self.relation_residual,
            "worst": self.worst,
        }


# flatness circles start away from the symmetry axes, where curves often run exactly vertically
_GENERIC_START = -math.pi / 2 + 0.3183


def flatness_loops(net: Network) -> dict[str, list[complex]]:
    """Small counterclockwise circles around every branch point and joint."""
    scale = _scale(net)
    loops = {}
    for k, b in enumerate(net.branch_points):
        r = min(0.1 * scale, 0.4 * _vertex_gap(net, b, exclude=b))
        loops[f"branch:{k}"] = circle(b, r, start=_GENERIC_START)
    for j in net.joints:
        r = min(0.01 * scale, 0.4 * _vertex_gap(net, j.z, exclude=j.z))
        loops[f"joint:{j.id}"] = circle(j.z, r, start=_GENERIC_START)
    return loops


def _assemble(net: Network, cuts, factors, tol: float, strict: bool) -> NonabResult:
    flat = {}
    eye = np.eye(cuts[0].shape[0]) if cuts else None
    for name, loop in flatness_loops(net).items():
        flat[name] = _norm(reglue_transport(net, cuts, factors, loop) - eye)
    loops = standard_loops(net)
    gens = {}
    for name in loops.order:
        gens[name] = reglue_transport(net, cuts, factors, loops.keyholes[name])
    prod = np.eye(eye.shape[0], dtype=complex)
    for name in loops.order:  # left to right: M_leftmost ... M_rightmost
        prod = prod @ gens[name]
    if loops.infinity is not None:
        gens["puncture:inf"] = reglue_transport(net, cuts, factors, loops.infinity)
        prod = gens["puncture:inf"] @ prod
    relation = _norm(prod - eye)
    worst = max(list(flat.values()) + [relation])
    res = NonabResult(gens, flat, relation, worst, factors)
    if strict and worst > tol:
        raise FlatnessViolation(f"worst flatness residual {worst:.3g} exceeds {tol:g}")
    return res


def nonabelianize(ls: LocalSystemData, net: Network, tol: float = 1e-8, strict: bool = False) -> NonabResult:
    """Reglued monodromies of the puncture generators plus a flatness report."""
    if not net.branch_points:
        # nothing to reglue: the system extends as it is
        gens = {k: v.copy() for k, v in ls.generators.items()}
        return NonabResult(gens, {}, 0.0, 0.0)
    asg = assign_all_factors(ls, net)
    return _assemble(net, asg.cuts, asg, tol, strict)


# ---------------------------------------------------------------------------
# Spectral cover data and the path-detour rule
# ---------------------------------------------------------------------------


@dataclass
class CoverData:
    """Rank-one system on the punctured spectral cover in the cut gauge.

    ``weights[k][a]`` is the scalar picked up by sheet a when it crosses cut k
    from left to right (it lands on sheet perm_k(a)).
    """

    group: str
    weights: list[tuple[complex, ...]]

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "rep": self.group,
            "cuts": [{"cut": k, "weights": [[w.real, w.imag] for w in ws]} for k, ws in enumerate(self.weights)],
        }


def cover_from_json(data: Mapping) -> CoverData:
    try:
        cuts = sorted(data["cuts"], key=lambda c: int(c["cut"]))
        return CoverData(str(data["rep"]), [tuple(complex(float(w[0]), float(w[1])) for w in c["weights"]) for c in cuts])
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise InputError(f"malformed cover data: {exc}") from exc


def pushforward_matrix(perm: Sequence[int], weights: Sequence[complex]) -> np.ndarray:
    """Monomial matrix G with G e_a = w_a e_perm(a)."""
    n = len(perm)
    g = np.zeros((n, n), dtype=complex)
    for a in range(n):
        g[perm[a], a] = weights[a]
    return g


def validate_cover(cover: CoverData, net: Network, tol: float = 1e-9) -> None:
    n = GROUPS[cover.group]
    if len(cover.weights) != len(net.cut_points):
        raise InconsistentCoverData(f"{len(cover.weights)} cut weight lists for {len(net.cut_points)} cuts")
    for k, ws in enumerate(cover.weights):
        if len(ws) != n or any(w == 0 for w in ws):
            raise InconsistentCoverData(f"cut {k}: need {n} nonzero sheet weights")
        if k < len(net.branch_points):
            pair = _transposition(net.cut_perms[k])
            if pair is None:
                raise InconsistentCoverData(f"cut {k} is not a simple branch cut")
            p, q = pair
            for c in range(n):
                if c not in pair and abs(ws[c] - 1) > tol:
                    raise InconsistentCoverData(f"cut {k}: sheet {c} does not ramify but has weight {ws[c]}")
            if abs(ws[p] * ws[q] + 1) > tol:
                raise WrongRamificationMonodromy(
                    f"cut {k}: monodromy around the ramification point is {ws[p] * ws[q]:.6g}, expected -1"
                )


def pushforward(cover: CoverData, net: Network) -> LocalSystemData:
    validate_cover(cover, net)
    rep = GroupRep(cover.group)
    gens = {}
    for k, ws in enumerate(cover.weights):
        gens[cut_name(net, k)] = np.linalg.inv(pushforward_matrix(net.cut_perms[k], ws))
    return LocalSystemData(rep, gens)


def random_cover_data(net: Network, group: str, rng: np.random.Generator) -> CoverData:
    """Random cover data obeying the ramification and (if needed) the infinity constraint."""
    n = GROUPS[group]
    nb = len(net.branch_points)

    def rnd():
        return complex(*rng.uniform(0.5, 1.5, 2)) * cmath.exp(1j * rng.uniform(0, 2 * math.pi)) / math.sqrt(2)

    weights = []
    for k in range(len(net.cut_points)):
        ws = [1.0 + 0j] * n
        if k < nb:
            p, q = _transposition(net.cut_perms[k])
            ws[p] = rnd()
            ws[q] = -1 / ws[p]
        else:
            ws = [rnd() for _ in range(n)]
            if group.startswith("SL"):
                ws[-1] = 1 / np.prod(ws[:-1])
        weights.append(tuple(ws))
    cover = CoverData(group, weights)
    if INF not in net.hitchin.punctures and len(net.cut_points) > nb:
        # infinity is an ordinary point: the product of all keyhole loops must be trivial
        ls = pushforward(cover, net)
        loops_order = sorted(range(len(net.cut_points)), key=lambda k: net.cut_points[k].real)
        last = max(range(nb, len(net.cut_points)))
        # solve M_last from left * M_last * right = I
        left = np.eye(n, dtype=complex)
        right = np.eye(n, dtype=complex)
        seen = False
        for k in loops_order:
            if k == last:
                seen = True
                continue
            m = ls.generators[cut_name(net, k)]
            if seen:
                right = right @ m
            else:
                left = left @ m
        m_last = np.linalg.inv(left) @ np.linalg.inv(right)
        g_last = np.linalg.inv(m_last)
        perm = net.cut_perms[last]
        ws = tuple(complex(g_last[perm[a], a]) for a in range(n))
        if _norm(pushforward_matrix(perm, ws) - g_last) > 1e-9:
            raise InconsistentCoverData("cannot close the cover data at infinity with a monomial puncture weight")
        weights[last] = ws
        cover = CoverData(group, weights)
    return cover


def random_s_valid_system(net: Network, group: str, rng: np.random.Generator) -> LocalSystemData:
    return pushforward(random_cover_data(net, group, rng), net)


class PathDetourFactors:
    """Stokes factors from the path-detour rule, carried by scalars on the cover."""

    def __init__(self, cover: CoverData, net: Network, corrupt: int | None = None):
        validate_cover(cover, net)
        self.cover = cover
        self.net = net
        self.n = GROUPS[cover.group]
        self.corrupt = corrupt
        # joint events: sid -> [(param, label, coefficient)]
        self.events: dict[int, list[tuple[float, tuple[int, int], complex]]] = {}

    def _carry(self, sid: int, i: int, j: int, c: complex, p0: float, p1: float):
        """Carry the coefficient of E_ij along the segment from parameter p0 to p1 (p0 <= p1)."""
        w = self.cover.weights
        for p, cut, sgn in segment_cut_crossings(self.net, sid):
            if p0 < p <= p1:
                perm = self.net.cut_perms[cut]
                if sgn > 0:
                    c = c * w[cut][i] / w[cut][j]
                    i, j = perm[i], perm[j]
                else:
                    inv = _inv(perm)
                    i, j = inv[i], inv[j]
                    c = c * w[cut][j] / w[cut][i]
        return i, j, c

    def detour(self, sid: int, param: float) -> tuple[tuple[int, int], complex]:
        """Sheet pair and transport scalar of the detour at a point of a primary curve."""
        seg = self.net.segments[sid]
        k = seg.origin[1]
        w = self.cover.weights
        crossings = [x for x in segment_cut_crossings(self.net, sid) if x[0] <= param]
        i, j = segment_label(self.net, sid, param)
        # back along the curve on sheet j
        sheet, x = j, 1.0 + 0j
        for p, cut, sgn in reversed(crossings):
            perm = self.net.cut_perms[cut]
            if sgn > 0:  # reversed: right to left
                prev = _inv(perm)[sheet]
                x /= w[cut][prev]
                sheet = prev
            else:
                x *= w[cut][sheet]
                sheet = perm[sheet]
        # once around the branch point, clockwise: the cut is crossed left to right
        x *= w[k][sheet]
        sheet = self.net.cut_perms[k][sheet]
        # forward again on the other sheet
        for p, cut, sgn in crossings:
            perm = self.net.cut_perms[cut]
            if sgn > 0:
                x *= w[cut][sheet]
                sheet = perm[sheet]
            else:
                prev = _inv(perm)[sheet]
                x /= w[cut][prev]
                sheet = prev
        if sheet != i:
            raise TransportInconsistent(f"detour on segment {sid} returns on sheet {sheet}, expected {i}")
        if self.corrupt == sid:
            x *= 1.5
        return (i, j), x

    def factor_at(self, sid: int, param: float) -> np.ndarray:
        seg = self.net.segments[sid]
        if seg.origin[0] == "bp":
            (i, j), c = self.detour(sid, param)
            start = 0.0
        else:
            start, (i, j), c = None, (None, None), None
        for p, lab, cc in self.events.get(sid, []):
            if p <= param:
                start, (i, j), c = p, lab, cc
        if start is None:
            raise VerificationFailure(f"segment {sid} has no factor yet")
        if seg.origin[0] != "bp" or start > 0:
            i, j, c = self._carry(sid, i, j, c, start, param)
        return np.eye(self.n, dtype=complex) + c * unit(self.n, i, j)


def solve_joint_by_residual(
    rays: Sequence[tuple[float, str, tuple[int, int], np.ndarray | None]], n: int
) -> list[complex]:
    """Outgoing coefficients making the clockwise product trivial, solved height by height in matrices.

    ``rays`` holds (clockwise position, role, sheet pair, factor or None); the
    word multiplies out-factors and inverse in-factors in clockwise order.
    """
    ordered = sorted(range(len(rays)), key=lambda r: rays[r][0])
    outs = [r for r in ordered if rays[r][1] == "out"]
    labels = [rays[r][2] for r in outs]
    # a sheet order in which every outgoing pair is increasing
    rank = None
    for perm in itertools.permutations(range(n)):
        pos = {s: k for k, s in enumerate(perm)}
        if all(pos[i] < pos[j] for i, j in labels):
            rank = pos
            break
    if rank is None:
        raise VerificationFailure("outgoing labels are not convex")
    coeffs = {r: 0j for r in outs}

    def word() -> np.ndarray:
        m = np.eye(n, dtype=complex)
        for r in ordered:
            _, role, (i, j), fac = rays[r]
            if role == "out":
                f = np.eye(n, dtype=complex) + coeffs[r] * unit(n, i, j)
            else:
                f = np.linalg.inv(fac)
            m = m @ f
        return m

    for h in range(1, n):
        level = [r for r in outs if rank[rays[r][2][1]] - rank[rays[r][2][0]] == h]
        for r in level:
            coeffs[r] = 0j
        base = word()
        for r in level:
            i, j = rays[r][2]
            coeffs[r] = 1.0
            slope = word()[i, j] - base[i, j]
            coeffs[r] = 0j
            if abs(slope) < 1e-12:
                raise VerificationFailure("degenerate joint equation")
            coeffs[r] = -base[i, j] / slope
    return [coeffs[r] for r in range(len(rays)) if r in coeffs]


def nonab_PD(cover: CoverData, net: Network, tol: float = 1e-8, corrupt: int | None = None) -> NonabResult:
    """Non-abelianization with path-detour primary factors and matrix-residual joint factors."""
    if not net.branch_points:
        ls = pushforward(cover, net)
        return NonabResult({k: v.copy() for k, v in ls.generators.items()}, {}, 0.0, 0.0)
    _check_network(net)
    pd = PathDetourFactors(cover, net, corrupt)
    n = pd.n
    for jid in net.order:
        rays = _joint_rays(net, jid)
        spec = []
        for d, label, role, sid, param in rays:
            fac = pd.factor_at(sid, param) if role == "in" else None
            spec.append((_clockwise_pos(d), role, label, fac))
        coeffs = solve_joint_by_residual(spec, n)
        outs = [r for r in range(len(rays)) if rays[r][2] == "out"]
        for r, c in zip(outs, coeffs):
            _, label, _, sid, param = rays[r]
            pd.events.setdefault(sid, []).append((param, label, c))
            pd.events[sid].sort(key=lambda e: e[0])
    cuts = [pushforward_matrix(net.cut_perms[k], ws) for k, ws in enumerate(cover.weights)]
    return _assemble(net, cuts, pd, tol, strict=False)


def path_detour_factor(cover: CoverData, net: Network, sid: int, param: float) -> np.ndarray:
    """S_PD = exp(d) = I + d for the single detour nilpotent d on a primary curve."""
    (i, j), x = PathDetourFactors(cover, net).detour(sid, param)
    n = GROUPS[cover.group]
    return expm(x * unit(n, i, j))


# ---------------------------------------------------------------------------
# Equivalence check
# ---------------------------------------------------------------------------


def best_conjugator(a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> np.ndarray:
    """g minimizing sum |g A_k - B_k g| (least squares over the stacked linear system)."""
    if not a:
        raise ValueError("need at least one matrix pair")
    n = a[0].shape[0]
    eye = np.eye(n)
    rows = [np.kron(eye, ak.T) - np.kron(bk, eye) for ak, bk in zip(a, b)]
    _, sv, vh = np.linalg.svd(np.vstack(rows))
    # the near-null space can be more than one-dimensional (e.g. commuting data);
    # take the point of it closest to the identity so trivial inputs give g = I
    cutoff = max(1e-9 * sv[0], 1e-12)
    null = vh[sv <= cutoff] if np.any(sv <= cutoff) else vh[-1:]
    basis = null.conj()
    g = (basis.T @ (basis.conj() @ eye.reshape(-1))).reshape(n, n)
    if np.linalg.norm(g) < 1e-9:
        g = basis[-1].reshape(n, n)
    det = np.linalg.det(g)
    if abs(det) < 1e-12:
        return g / np.linalg.norm(g)
    return g / (det ** (1.0 / n))


@dataclass
class PDReport:
    deviation: float
    monodromy_deviation: float
    path_deviation: float
    conjugator: np.ndarray

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "deviation": self.deviation,
            "monodromy_deviation": self.monodromy_deviation,
            "path_deviation": self.path_deviation,
            "conjugator": matrix_to_json(self.conjugator),
        }


def probe_paths(net: Network) -> list[list[complex]]:
    """Vertical paths between the vertices, from below everything to above it."""
    loops = standard_loops(net)
    R = loops.radius
    xs = sorted({round(p.real, 9) for p in list(net.branch_points) + [j.z for j in net.joints] + list(net.hitchin.finite_punctures)})
    cands = [xs[0] - 0.5] + [(a + b) / 2 for a, b in zip(xs, xs[1:])] + [xs[-1] + 0.5] if xs else [0.5]
    paths = []
    for x in cands:
        if abs(x) >= R:
            continue
        h = math.sqrt(R * R - x * x)
        paths.append([loops.base, complex(x, -h), complex(x, 0.95 * h)])
    return paths


def pd_equivalence_check(cover: CoverData, net: Network, corrupt: int | None = None) -> PDReport:
    ls = pushforward(cover, net)
    a = nonabelianize(ls, net)
    b = nonab_PD(cover, net, corrupt=corrupt)
    names = sorted(a.generators)
    n = GROUPS[cover.group]
    mats_a = [a.generators[k] for k in names]
    mats_b = [b.generators[k] for k in names]
    g = best_conjugator(mats_a, mats_b) if mats_a else np.eye(n, dtype=complex)
    mono = max([_norm(g @ x @ np.linalg.inv(g) - y) for x, y in zip(mats_a, mats_b)] + [0.0])
    path_dev = 0.0
    if net.branch_points:
        cuts = cut_transports(ls, net)
        for path in probe_paths(net):
            ta = reglue_transport(net, cuts, a.factors, path)
            tb = reglue_transport(net, cuts, b.factors, path)
            path_dev = max(path_dev, _norm(ta - tb))
    return PDReport(max(mono, path_dev), mono, path_dev, g)
