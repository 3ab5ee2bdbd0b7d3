"""Spectral curves of GL(n)/SL(n) Hitchin points on the punctured sphere.

The characteristic polynomial is

    lambda^n + a_1(z) lambda^(n-1) + ... + a_n(z),

each a_k a rational function given by ascending coefficient lists of a
numerator and a denominator.  Exact coefficients (Gaussian rationals) are
kept for the discriminant; evaluation uses complex doubles.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import sympy as sp

from camnet.errors import (
    DegenerateCurve,
    HigherOrderPole,
    InputError,
    NoValidRadius,
    NonSimpleBranching,
)
from camnet.scalars import GaussQ, format_scalar, parse_scalar

GROUPS = {"SL2": 2, "SL3": 3, "GL2": 2, "GL3": 3}
INF = "inf"

_Z = sp.Symbol("z")
_LAM = sp.Symbol("lam")


def _to_sympy(x) -> sp.Expr:
    x = parse_scalar(x)
    if isinstance(x, GaussQ):
        return sp.Rational(x.re.numerator, x.re.denominator) + sp.I * sp.Rational(x.im.numerator, x.im.denominator)
    return sp.Rational(x.numerator, x.denominator)


@dataclass(frozen=True)
class RationalCoeff:
    """a(z) = num(z) / den(z), both as ascending coefficient tuples."""

    num: tuple
    den: tuple = ("1",)

    def __post_init__(self):
        if not self.den or all(_to_sympy(c) == 0 for c in self.den):
            raise InputError("zero denominator polynomial")

    @property
    def num_c(self) -> np.ndarray:
        return np.array([complex(_to_sympy(c)) for c in self.num] or [0j])

    @property
    def den_c(self) -> np.ndarray:
        return np.array([complex(_to_sympy(c)) for c in self.den])

    def sym(self) -> sp.Expr:
        num = sum(_to_sympy(c) * _Z**k for k, c in enumerate(self.num))
        den = sum(_to_sympy(c) * _Z**k for k, c in enumerate(self.den))
        return sp.cancel(num / den)

    def is_zero(self) -> bool:
        return all(_to_sympy(c) == 0 for c in self.num)


def _polyval_asc(coeffs: np.ndarray, z: complex) -> complex:
    return complex(np.polyval(coeffs[::-1], z))


@dataclass
class HitchinPoint:
    group: str
    coeffs: tuple[RationalCoeff, ...]  # a_1 .. a_n
    punctures: tuple = ()  # finite complex points, plus INF if present
    _num: list = field(default_factory=list, repr=False)
    _den: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.group not in GROUPS:
            raise InputError(f"unsupported group {self.group!r}; expected one of {sorted(GROUPS)}")
        n = GROUPS[self.group]
        if len(self.coeffs) != n:
            raise InputError(f"{self.group} needs {n} coefficient functions")
        if self.group.startswith("SL") and not self.coeffs[0].is_zero():
            raise InputError("SL groups require a_1 = 0")
        self._num = [c.num_c for c in self.coeffs]
        self._den = [c.den_c for c in self.coeffs]

    @property
    def n(self) -> int:
        return GROUPS[self.group]

    @property
    def finite_punctures(self) -> list[complex]:
        return [complex(p) for p in self.punctures if p != INF]

    @property
    def has_infinity(self) -> bool:
        return INF in self.punctures

    def char_coeffs(self, z: complex) -> np.ndarray:
        """Monic coefficient vector in descending powers of lambda."""
        out = [1.0 + 0j]
        for num, den in zip(self._num, self._den):
            out.append(_polyval_asc(num, z) / _polyval_asc(den, z))
        return np.array(out)

    def eigenvalues(self, z: complex) -> np.ndarray:
        return np.roots(self.char_coeffs(z)).astype(complex)

    def sym_poly(self) -> sp.Expr:
        n = self.n
        expr = _LAM**n
        for k, c in enumerate(self.coeffs, start=1):
            expr += c.sym() * _LAM ** (n - k)
        return expr

    def rotate_phase(self, theta: float) -> "HitchinPoint":
        """a_k -> e^{ik theta} a_k, i.e. every eigenvalue is multiplied by e^{i theta}.

        Only exact for rational multiples of pi where cos and sin are
        rational; otherwise the rotated coefficients are rationalized doubles.
        """
        from camnet.scalars import rationalize

        coeffs = []
        for k, c in enumerate(self.coeffs, start=1):
            ph = cmath.exp(1j * k * theta)
            num = tuple(format_scalar(rationalize(complex(_to_sympy(x)) * ph)) for x in c.num)
            coeffs.append(RationalCoeff(num, c.den))
        return HitchinPoint(self.group, tuple(coeffs), self.punctures)


def _parse_coeff(spec) -> RationalCoeff:
    if isinstance(spec, Mapping):
        return RationalCoeff(tuple(str(x) for x in spec["num"]), tuple(str(x) for x in spec.get("den", ["1"])))
    if isinstance(spec, (list, tuple)):
        return RationalCoeff(tuple(str(x) for x in spec))
    return RationalCoeff((str(spec),))


def _parse_point(p):
    if isinstance(p, str) and p.strip().lower() in ("inf", "infinity", "oo"):
        return INF
    v = parse_scalar(p)
    return complex(v) if isinstance(v, GaussQ) else complex(float(v))


def hitchin_from_config(cfg: Mapping) -> HitchinPoint:
    """Parse the ``group`` / ``char_poly`` / ``punctures`` part of a config."""
    try:
        group = str(cfg["group"])
        n = GROUPS.get(group)
        if n is None:
            raise InputError(f"unsupported group {group!r}")
        cp = cfg["char_poly"]
        coeffs = tuple(_parse_coeff(cp.get(f"a{k}", ["0"])) for k in range(1, n + 1))
        punctures = cfg.get("punctures")
    except (KeyError, TypeError, AttributeError) as exc:
        raise InputError(f"malformed Hitchin point config: {exc}") from exc
    h = HitchinPoint(group, coeffs, ())
    if punctures is None:
        punctures = detect_poles(h)
    else:
        punctures = tuple(_parse_point(p) for p in punctures)
    h = HitchinPoint(group, coeffs, tuple(punctures))
    missing = [p for p in detect_poles(h) if not any(_same_point(p, q) for q in h.punctures)]
    if missing:
        raise InputError(f"coefficients have poles outside the puncture list: {missing}")
    return h


def _same_point(p, q, tol=1e-9) -> bool:
    if p == INF or q == INF:
        return p == q
    return abs(complex(p) - complex(q)) < tol


def pole_order_at_infinity(c: RationalCoeff, k: int) -> int:
    """Order of the pole at infinity of a_k dz^k in the chart w = 1/z (<= 0 means regular)."""
    num = [x for x in c.num]
    while num and _to_sympy(num[-1]) == 0:
        num.pop()
    if not num:
        return -10**6
    den = list(c.den)
    while den and _to_sympy(den[-1]) == 0:
        den.pop()
    return (len(num) - 1) - (len(den) - 1) + 2 * k


def detect_poles(h: HitchinPoint) -> tuple:
    """Finite poles of the coefficients plus INF when some a_k dz^k has a pole there."""
    found: list = []
    for c in h.coeffs:
        expr = c.sym()
        _, den = sp.fraction(sp.together(expr))
        for r, _ in poly_roots(sp.Poly(den, _Z)):
            if not any(_same_point(r, q, 1e-8) for q in found):
                found.append(r)
    if any(pole_order_at_infinity(c, k) > 0 for k, c in enumerate(h.coeffs, start=1) if not c.is_zero()):
        found.append(INF)
    return tuple(found)


# ---------------------------------------------------------------------------
# Branch points
# ---------------------------------------------------------------------------


def discriminant(h: HitchinPoint) -> tuple[sp.Poly, sp.Poly]:
    """Numerator and denominator of the lambda-discriminant as polynomials in z."""
    disc = sp.discriminant(sp.Poly(h.sym_poly(), _LAM), _LAM)
    disc = sp.together(disc.as_expr() if isinstance(disc, sp.Poly) else disc)
    num, den = sp.fraction(disc)
    return sp.Poly(sp.expand(num), _Z), sp.Poly(sp.expand(den), _Z)


def poly_roots(poly: sp.Poly, digits: int = 30) -> list[tuple[complex, int]]:
    """Roots with multiplicity, via a square-free decomposition over Q(i)."""
    out = []
    if poly.degree() <= 0:
        return out
    _, factors = sp.sqf_list(poly)
    for fac, mult in factors:
        fac = sp.Poly(fac, _Z)
        if fac.degree() == 0:
            continue
        for r in fac.nroots(n=digits, maxsteps=500):
            out.append((complex(r), mult))
    return out


def branch_points(h: HitchinPoint, digits: int = 30) -> list[complex]:
    """Simple zeros of the discriminant away from the punctures."""
    num, _ = discriminant(h)
    if num.is_zero:
        raise DegenerateCurve("discriminant vanishes identically")
    out: list[complex] = []
    for r, mult in poly_roots(num, digits):
        if any(_same_point(r, p, 1e-8) for p in h.finite_punctures):
            continue
        if mult > 1:
            raise NonSimpleBranching(f"discriminant has a zero of order {mult} at {r:.6g}")
        out.append(r)
    out.sort(key=lambda z: (round(z.real, 9), round(z.imag, 9)))
    return out


def colliding_pair(h: HitchinPoint, b: complex, r: float) -> tuple[int, int]:
    """Indices (into ``h.eigenvalues(z)``) of the two sheets meeting at b, sampled at b + r."""
    lam = h.eigenvalues(b + r)
    best = min(itertools.combinations(range(len(lam)), 2), key=lambda p: abs(lam[p[0]] - lam[p[1]]))
    return best


# ---------------------------------------------------------------------------
# Residues and Condition R
# ---------------------------------------------------------------------------


def residue(h: HitchinPoint, d) -> list[complex]:
    """Eigenvalue residues r_i at a puncture, i.e. lambda ~ r_i dz/(z-d).

    At infinity the chart w = 1/z is used, so lambda dz ~ r_i dw / w.
    """
    n = h.n
    rho = [sp.Integer(1)]
    for k, c in enumerate(h.coeffs, start=1):
        expr = c.sym()
        if d == INF:
            lim = sp.limit(expr * _Z**k, _Z, sp.oo) * (-1) ** k
        else:
            dd = sp.nsimplify(complex(d).real, rational=True) + sp.I * sp.nsimplify(complex(d).imag, rational=True)
            lim = sp.limit(sp.cancel(expr * (_Z - dd) ** k), _Z, dd)
        if lim.has(sp.oo, sp.zoo, sp.nan) or not lim.is_finite:
            raise HigherOrderPole(f"pole of a_{k} at {d} is of order > {k}")
        rho.append(lim)
    poly = np.array([complex(x) for x in rho])
    return sorted((complex(r) for r in np.roots(poly)) if n > 0 else [], key=lambda x: (x.real, x.imag))


@dataclass(frozen=True)
class ConditionRReport:
    ok: bool
    details: tuple  # (puncture, residues, min |Re diff|, passed)


def condition_R(h: HitchinPoint, tol: float = 1e-9, residues: Mapping | None = None) -> ConditionRReport:
    details = []
    ok = True
    for d in h.punctures:
        try:
            res = residues[d] if residues and d in residues else residue(h, d)
        except HigherOrderPole as exc:
            details.append((d, None, None, False, str(exc)))
            ok = False
            continue
        gaps = [abs((a - b).real) for a, b in itertools.combinations(res, 2)]
        worst = min(gaps) if gaps else math.inf
        passed = worst > tol
        ok = ok and passed
        details.append((d, tuple(res), worst, passed, ""))
    return ConditionRReport(ok, tuple(details))


# ---------------------------------------------------------------------------
# Truncation discs
# ---------------------------------------------------------------------------


def _deviation(h: HitchinPoint, d, res: Sequence[complex], z: complex) -> float:
    lam = h.eigenvalues(z)
    if d == INF:
        scaled = -lam * z
    else:
        scaled = lam * (z - complex(d))
    n = len(res)
    best_perm, best_err = None, math.inf
    for perm in itertools.permutations(range(n)):
        err = sum(abs(scaled[perm[i]] - res[i]) for i in range(n))
        if err < best_err:
            best_perm, best_err = perm, err
    worst = 0.0
    for i, j in itertools.combinations(range(n), 2):
        exact = scaled[best_perm[i]] - scaled[best_perm[j]]
        asym = res[i] - res[j]
        if abs(asym) == 0 or abs(exact) == 0:
            return math.inf
        worst = max(worst, abs(cmath.phase(exact / asym)))
    return worst


def truncation_disc(
    h: HitchinPoint,
    d,
    threshold: float = 0.1,
    samples: int = 64,
    max_halvings: int = 40,
    start: float | None = None,
) -> float:
    """Largest radius of the sweep r0 * 2^-k whose circle keeps every pair field within
    ``threshold`` radians of its log-spiral asymptote.

    At infinity the sweep is over R0 * 2^k and the disc is {|z| > R}.
    """
    res = residue(h, d)
    others = [p for p in h.finite_punctures if d == INF or abs(p - complex(d)) > 1e-12]
    bps = branch_points(h)
    if d == INF:
        scale = max([abs(p) for p in others + bps] + [1.0])
        r = start or 2.0 * scale
        for _ in range(max_halvings):
            if all(_deviation(h, d, res, r * cmath.exp(2j * math.pi * k / samples)) < threshold for k in range(samples)):
                return r
            r *= 2.0
        raise NoValidRadius("no radius at infinity passed the deviation test")
    center = complex(d)
    near = [abs(p - center) for p in others + bps]
    r = start or 0.5 * (min(near) if near else 1.0)
    for _ in range(max_halvings):
        if all(_deviation(h, d, res, center + r * cmath.exp(2j * math.pi * k / samples)) < threshold for k in range(samples)):
            return r
        r *= 0.5
    raise NoValidRadius(f"no radius around {d} passed the deviation test")


# ---------------------------------------------------------------------------
# Global sheet labels
# ---------------------------------------------------------------------------


class SheetField:
    """Consistent sheet labels on the complement of vertical upward cuts.

    Cuts run straight up from every branch point and finite puncture.  The
    label of an eigenvalue at z is obtained by continuing the sorted sheet
    order from a base line far below all cuts: first horizontally along that
    line, then vertically up to z.  Neither leg crosses a cut.
    """

    def __init__(self, h: HitchinPoint, bps: Sequence[complex] | None = None, step: float = 0.02):
        self.h = h
        self.bps = list(branch_points(h) if bps is None else bps)
        self.cut_points = self.bps + h.finite_punctures
        ys = [p.imag for p in self.cut_points] or [0.0]
        scale = max([abs(p) for p in self.cut_points] + [1.0])
        self.y_base = min(ys) - 2.0 * scale
        self.x_base = 0.0
        self.step = step * scale
        self._base = self._sorted(h.eigenvalues(complex(self.x_base, self.y_base)))

    @staticmethod
    def _sorted(lam: np.ndarray) -> np.ndarray:
        return np.array(sorted(lam, key=lambda v: (round(v.real, 12), round(v.imag, 12))))

    def _continue(self, lam: np.ndarray, z0: complex, z1: complex) -> np.ndarray:
        """Carry the ordered eigenvalue tuple along the straight segment z0 -> z1."""
        length = abs(z1 - z0)
        if length == 0:
            return lam
        t = 0.0
        h = min(self.step, length)
        cur = lam
        while t < 1.0 - 1e-15:
            dt = min(h / length, 1.0 - t)
            z = z0 + (t + dt) * (z1 - z0)
            new = self.h.eigenvalues(z)
            matched, ok = match_sheets(cur, new)
            if not ok and dt * length > 1e-9:
                h *= 0.5
                continue
            cur = matched
            t += dt
            h = min(self.step, 2 * h)
        return cur

    def labels(self, z: complex) -> np.ndarray:
        """Eigenvalues at z ordered by global sheet index."""
        for p in self.cut_points:
            if abs(z.real - p.real) < 1e-12 and z.imag >= p.imag:
                raise InputError(f"point {z} lies on a branch cut")
        corner = complex(z.real, self.y_base)
        lam = self._continue(self._base, complex(self.x_base, self.y_base), corner)
        return self._continue(lam, corner, z)

    def index_of(self, z: complex, value: complex) -> int:
        lam = self.labels(z)
        return int(np.argmin(np.abs(lam - value)))

    def cuts_crossed(self, z0: complex, z1: complex) -> list[tuple[float, int]]:
        """Cut crossings of the straight step z0 -> z1 as (fraction along step, cut index)."""
        out = []
        for c, p in enumerate(self.cut_points):
            dx = z1.real - z0.real
            if dx == 0:
                continue
            t = (p.real - z0.real) / dx
            if 0 <= t < 1:
                y = z0.imag + t * (z1.imag - z0.imag)
                if y > p.imag:
                    out.append((t, c))
        out.sort()
        return out


def match_sheets(prev: np.ndarray, new: np.ndarray, ratio: float = 0.3) -> tuple[np.ndarray, bool]:
    """Reorder ``new`` to follow ``prev``; ok is False if the match is ambiguous."""
    n = len(prev)
    best, best_cost, second = None, math.inf, math.inf
    for perm in itertools.permutations(range(n)):
        cost = max(abs(new[perm[i]] - prev[i]) for i in range(n))
        if cost < best_cost:
            best, best_cost, second = perm, cost, best_cost
        elif cost < second:
            second = cost
    gaps = [abs(a - b) for a, b in itertools.combinations(new, 2)]
    min_gap = min(gaps) if gaps else math.inf
    ok = best_cost < ratio * min_gap
    return np.array([new[best[i]] for i in range(n)]), ok
