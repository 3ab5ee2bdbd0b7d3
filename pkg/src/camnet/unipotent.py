"""Exact calculus in nilpotent subalgebras u_C and unipotent groups U_C.

Elements are sparse maps from root indices to exact scalars (Fraction or
GaussQ).  Group elements are handled through their logarithms: the product
exp(x) exp(y) is represented by the truncated Baker-Campbell-Hausdorff series
in Dynkin's form, which is finite because u_C is nilpotent.

The adjoint representation on the full Lie algebra serves as an independent
oracle: ``adjoint_exp`` builds exact unipotent matrices (entries in gmpy2
rationals) so that group identities can be checked by plain matrix products.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import gmpy2
import numpy as np

from camnet.errors import InputError, NotAFace, NotConvex
from camnet.liealg import (
    ChevalleyTable,
    Polarization,
    basis_bracket,
    build_chevalley_table,
    faces_of_cone,
    find_polarization,
    restricted_convex_hull,
)
from camnet.scalars import GaussQ, format_scalar, parse_scalar


class NilElement:
    """Element of u_C: a sparse root-indexed coefficient map with exact scalars."""

    __slots__ = ("table", "coeffs")

    def __init__(self, table: ChevalleyTable, coeffs: Mapping[int, object] | None = None):
        self.table = table
        self.coeffs = {k: v for k, v in (coeffs or {}).items() if v}

    @classmethod
    def single(cls, table: ChevalleyTable, root: int, value) -> "NilElement":
        return cls(table, {root: value})

    @property
    def support(self) -> frozenset[int]:
        return frozenset(self.coeffs)

    def __getitem__(self, root: int):
        return self.coeffs.get(root, Fraction(0))

    def __add__(self, other: "NilElement") -> "NilElement":
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0) + v
        return NilElement(self.table, out)

    def __sub__(self, other: "NilElement") -> "NilElement":
        return self + (-other)

    def __neg__(self) -> "NilElement":
        return NilElement(self.table, {k: -v for k, v in self.coeffs.items()})

    def scale(self, c) -> "NilElement":
        return NilElement(self.table, {k: c * v for k, v in self.coeffs.items()})

    def __mul__(self, c) -> "NilElement":
        return self.scale(c)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, NilElement):
            return NotImplemented
        return self.table.rootsys == other.table.rootsys and self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.table.rootsys.code, frozenset(self.coeffs.items())))

    def __bool__(self) -> bool:
        return bool(self.coeffs)

    def __repr__(self) -> str:
        rs = self.table.rootsys
        terms = ", ".join(f"{rs.name(k)}: {format_scalar(v)}" for k, v in sorted(self.coeffs.items()))
        return f"NilElement({rs.code}; {terms})"

    def restrict(self, roots: Iterable[int]) -> "NilElement":
        keep = set(roots)
        return NilElement(self.table, {k: v for k, v in self.coeffs.items() if k in keep})

    def to_json(self) -> dict:
        return {
            "system": self.table.rootsys.code,
            "coeffs": {str(k): format_scalar(v) for k, v in sorted(self.coeffs.items())},
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "NilElement":
        try:
            table = build_chevalley_table(str(data["system"]))
            n = len(table.rootsys)
            coeffs = {}
            for k, v in dict(data.get("coeffs", {})).items():
                idx = int(k)
                if not 0 <= idx < n:
                    raise InputError(f"root index {idx} out of range for {table.rootsys.code}")
                coeffs[idx] = parse_scalar(v)
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed NilElement JSON: {exc}") from exc
        return cls(table, coeffs)


def zero(table: ChevalleyTable) -> NilElement:
    return NilElement(table)


def _require_convex(table: ChevalleyTable, roots: Iterable[int]) -> Polarization:
    roots = frozenset(roots)
    pol = find_polarization(table.rootsys, roots)
    if pol is None:
        raise NotConvex(f"support {sorted(table.rootsys.roots[i] for i in roots)} is not convex")
    return pol


def _bracket_raw(table: ChevalleyTable, x: Mapping[int, object], y: Mapping[int, object]) -> dict:
    rs = table.rootsys
    N = table.N
    out: dict = {}
    for a, xa in x.items():
        for b, yb in y.items():
            c = rs.add(a, b)
            if c is None:
                continue
            out[c] = out.get(c, 0) + N[(a, b)] * xa * yb
    return {k: v for k, v in out.items() if v}


def bracket(x: NilElement, y: NilElement) -> NilElement:
    """Lie bracket of two elements whose supports lie in a common positive system."""
    _require_convex(x.table, x.support | y.support)
    return NilElement(x.table, _bracket_raw(x.table, x.coeffs, y.coeffs))


def iterated_bracket(x: NilElement, y: NilElement, n: int) -> NilElement:
    """[x, [x, ..., [x, y]]] with ``n`` copies of x."""
    out = y
    for _ in range(n):
        out = bracket(x, out)
    return out


# ---------------------------------------------------------------------------
# Baker-Campbell-Hausdorff in Dynkin's form
# ---------------------------------------------------------------------------

MAX_WORD = 5  # nilpotency class bound: highest root height is at most 5 for supported systems


@lru_cache(maxsize=None)
def dynkin_coefficients(max_len: int = MAX_WORD) -> dict[tuple[int, ...], Fraction]:
    """Coefficient of each right-nested bracket word in log(e^X e^Y).

    Words are tuples over {0, 1} (0 for X, 1 for Y); the word (w1, ..., wm)
    stands for [w1, [w2, [..., wm]]].  Words whose right-nested bracket
    vanishes identically (last two letters equal) are dropped.
    """
    table: dict[tuple[int, ...], Fraction] = {}

    def blocks(length: int):
        # all ways to write a word of the given total length as nonempty blocks X^r Y^s
        if length == 0:
            yield ()
            return
        for r in range(length + 1):
            for s in range(length - r + 1):
                if r + s == 0:
                    continue
                for rest in blocks(length - r - s):
                    yield ((r, s),) + rest

    for m in range(1, max_len + 1):
        for seq in blocks(m):
            n = len(seq)
            word = tuple(itertools.chain.from_iterable((0,) * r + (1,) * s for r, s in seq))
            denom = m
            for r, s in seq:
                denom *= math.factorial(r) * math.factorial(s)
            coeff = Fraction((-1) ** (n - 1), n * denom)
            table[word] = table.get(word, Fraction(0)) + coeff
    return {w: c for w, c in table.items() if c and (len(w) == 1 or w[-1] != w[-2])}


def _truncate(d: Mapping[int, object], heights: Mapping[int, int], max_height: int | None) -> dict:
    if max_height is None:
        return dict(d)
    return {k: v for k, v in d.items() if heights[k] <= max_height}


def _heights_for(table: ChevalleyTable, pol: Polarization) -> dict[int, int]:
    return {g: pol.height(g) for g in pol.positive}


def bch_raw(
    table: ChevalleyTable,
    x: Mapping[int, object],
    y: Mapping[int, object],
    heights: Mapping[int, int],
    max_height: int | None = None,
) -> dict:
    """log(exp x exp y) on coefficient maps; components above ``max_height`` are dropped."""
    if not x:
        return _truncate(y, heights, max_height)
    if not y:
        return _truncate(x, heights, max_height)
    top = max_height if max_height is not None else max(heights.values())
    min_h = min(heights[k] for k in itertools.chain(x, y))
    max_len = min(MAX_WORD, top // min_h)
    letters = (_truncate(x, heights, max_height), _truncate(y, heights, max_height))
    memo: dict[tuple[int, ...], dict] = {}

    def nested(word: tuple[int, ...]) -> dict:
        got = memo.get(word)
        if got is not None:
            return got
        if len(word) == 1:
            val = letters[word[0]]
        else:
            inner = nested(word[1:])
            val = _truncate(_bracket_raw(table, letters[word[0]], inner), heights, max_height) if inner else {}
        memo[word] = val
        return val

    out: dict = {}
    for word, coeff in dynkin_coefficients(MAX_WORD).items():
        if len(word) > max_len:
            continue
        term = nested(word)
        for k, v in term.items():
            out[k] = out.get(k, 0) + coeff * v
    return {k: v for k, v in out.items() if v}


def bch_log_pair(x: NilElement, y: NilElement) -> NilElement:
    """log(exp(x) exp(y)), exact."""
    table = x.table
    pol = _require_convex(table, x.support | y.support)
    return NilElement(table, bch_raw(table, x.coeffs, y.coeffs, _heights_for(table, pol)))


def bch_product(elements: Sequence[NilElement], polarization: Polarization | None = None) -> NilElement:
    """log(exp(x1) exp(x2) ... exp(xk)) by a left fold of the pairwise formula."""
    if not elements:
        raise ValueError("empty product")
    table = elements[0].table
    support = frozenset().union(*(e.support for e in elements))
    pol = polarization or _require_convex(table, support)
    heights = _heights_for(table, pol)
    acc: dict = {}
    for e in elements:
        acc = bch_raw(table, acc, e.coeffs, heights)
    return NilElement(table, acc)


# ---------------------------------------------------------------------------
# Multiplication map and its inverse
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UnipotentCoords:
    """The ordered product of exp(X_g e_g) over ``order``."""

    table: ChevalleyTable
    order: tuple[int, ...]
    values: tuple

    def __post_init__(self):
        if len(self.order) != len(self.values):
            raise ValueError("order and values differ in length")
        if len(set(self.order)) != len(self.order):
            raise ValueError("order repeats a root")

    def as_dict(self) -> dict:
        return dict(zip(self.order, self.values))


def canonical_order(table: ChevalleyTable, roots: Iterable[int], polarization: Polarization | None = None) -> tuple[int, ...]:
    """Increasing height, ties broken lexicographically on root coordinates."""
    roots = frozenset(roots)
    pol = polarization or _require_convex(table, roots)
    rs = table.rootsys
    return tuple(sorted(roots, key=lambda g: (pol.height(g), rs.roots[g])))


def mult_map(t: UnipotentCoords) -> NilElement:
    table = t.table
    _require_convex(table, t.order)
    return bch_product([NilElement.single(table, g, v) for g, v in zip(t.order, t.values)])


def mult_map_inverse(u: NilElement, order: Sequence[int]) -> UnipotentCoords:
    """Unique coordinates in the given order whose ordered product is exp(u)."""
    table = u.table
    order = tuple(order)
    if not u.support <= frozenset(order):
        raise NotConvex("support of u is not inside the ordered root set")
    pol = _require_convex(table, order)
    heights = _heights_for(table, pol)
    values: dict = {g: Fraction(0) for g in order}
    for h in sorted({heights[g] for g in order}):
        layer = [g for g in order if heights[g] == h]
        acc: dict = {}
        for g in order:
            if values[g]:
                acc = bch_raw(table, acc, {g: values[g]}, heights, max_height=h)
        for g in layer:
            values[g] = u[g] - acc.get(g, 0)
    return UnipotentCoords(table, order, tuple(values[g] for g in order))


# ---------------------------------------------------------------------------
# Faces
# ---------------------------------------------------------------------------


def face_project(u: NilElement, face: Iterable[int], cone: Iterable[int] | None = None) -> NilElement:
    """Drop all coefficients off a face of the cone spanned by the support."""
    face = frozenset(face)
    rs = u.table.rootsys
    cone = frozenset(cone) if cone is not None else restricted_convex_hull(rs, u.support | face)
    if face != cone and face not in faces_of_cone(rs, cone).faces:
        raise NotAFace(f"{sorted(rs.roots[g] for g in face)} is not a face of the cone")
    return u.restrict(face)


# ---------------------------------------------------------------------------
# Adjoint oracle
# ---------------------------------------------------------------------------


def _mpq(x) -> gmpy2.mpq:
    x = Fraction(x)
    return gmpy2.mpq(x.numerator, x.denominator)


class ExactMatrix:
    """Square matrix over Q(i) stored as a pair of gmpy2 rational arrays."""

    __slots__ = ("re", "im")

    def __init__(self, re: np.ndarray, im: np.ndarray | None = None):
        self.re = re
        self.im = im

    @classmethod
    def identity(cls, n: int) -> "ExactMatrix":
        m = np.array([[gmpy2.mpq(int(i == j)) for j in range(n)] for i in range(n)], dtype=object)
        return cls(m)

    @property
    def shape(self):
        return self.re.shape

    def __matmul__(self, other: "ExactMatrix") -> "ExactMatrix":
        re = self.re.dot(other.re)
        if self.im is None and other.im is None:
            return ExactMatrix(re)
        im = None
        if self.im is not None and other.im is not None:
            re = re - self.im.dot(other.im)
        if self.im is not None:
            im = self.im.dot(other.re)
        if other.im is not None:
            t = self.re.dot(other.im)
            im = t if im is None else im + t
        return ExactMatrix(re, im)

    def __add__(self, other: "ExactMatrix") -> "ExactMatrix":
        if self.im is None and other.im is None:
            im = None
        else:
            im = (self.im if self.im is not None else 0) + (other.im if other.im is not None else 0)
        return ExactMatrix(self.re + other.re, im)

    def scale(self, c) -> "ExactMatrix":
        if isinstance(c, GaussQ):
            a, b = _mpq(c.re), _mpq(c.im)
            im_part = self.im if self.im is not None else None
            re = self.re * a - (im_part * b if im_part is not None else 0)
            im = self.re * b + (im_part * a if im_part is not None else 0)
            return ExactMatrix(re, im)
        q = _mpq(c)
        return ExactMatrix(self.re * q, None if self.im is None else self.im * q)

    def is_zero(self) -> bool:
        if any(v != 0 for v in self.re.flat):
            return False
        return self.im is None or not any(v != 0 for v in self.im.flat)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExactMatrix):
            return NotImplemented
        diff_re = self.re - other.re
        if any(v != 0 for v in diff_re.flat):
            return False
        a = self.im if self.im is not None else None
        b = other.im if other.im is not None else None
        if a is None and b is None:
            return True
        if a is None:
            return not any(v != 0 for v in b.flat)
        if b is None:
            return not any(v != 0 for v in a.flat)
        return not any(v != 0 for v in (a - b).flat)

    def entry(self, i: int, j: int):
        re = Fraction(int(self.re[i, j].numerator), int(self.re[i, j].denominator))
        if self.im is None:
            return re
        im = Fraction(int(self.im[i, j].numerator), int(self.im[i, j].denominator))
        return re if im == 0 else GaussQ(re, im)

    def to_complex(self) -> np.ndarray:
        out = np.array([[float(v) for v in row] for row in self.re], dtype=complex)
        if self.im is not None:
            out = out + 1j * np.array([[float(v) for v in row] for row in self.im], dtype=float)
        return out


def ad_matrix(x: NilElement) -> ExactMatrix:
    """Matrix of ad x on the basis (e_g for all roots, then simple coroots)."""
    table = x.table
    dim = table.dim
    re = np.array([[gmpy2.mpq(0)] * dim for _ in range(dim)], dtype=object)
    im = None
    complex_input = any(isinstance(v, GaussQ) for v in x.coeffs.values())
    if complex_input:
        im = np.array([[gmpy2.mpq(0)] * dim for _ in range(dim)], dtype=object)
    for a, xa in x.coeffs.items():
        ra, ia = (xa.re, xa.im) if isinstance(xa, GaussQ) else (Fraction(xa), Fraction(0))
        qa, qi = _mpq(ra), _mpq(ia)
        for j in range(dim):
            for k, c in basis_bracket(table, a, j).items():
                re[k, j] += qa * c
                if complex_input:
                    im[k, j] += qi * c
    return ExactMatrix(re, im)


def _exp_nilpotent(m: ExactMatrix) -> ExactMatrix:
    n = m.shape[0]
    out = ExactMatrix.identity(n)
    term = ExactMatrix.identity(n)
    for k in range(1, n + 1):
        term = (term @ m).scale(Fraction(1, k))
        if term.is_zero():
            return out
        out = out + term
    if not (term @ m).is_zero():
        raise ArithmeticError("matrix is not nilpotent")
    return out


def adjoint_exp(x: NilElement) -> ExactMatrix:
    """exp(ad x) exactly; x must be supported in a positive system."""
    _require_convex(x.table, x.support)
    return _exp_nilpotent(ad_matrix(x))


def adjoint_product(elements: Sequence[NilElement]) -> ExactMatrix:
    if not elements:
        raise ValueError("empty product")
    out = ExactMatrix.identity(elements[0].table.dim)
    for e in elements:
        out = out @ adjoint_exp(e)
    return out


def adjoint_exp_any(x: NilElement) -> ExactMatrix:
    """exp(ad x) for any ad-nilpotent x (no convexity requirement), e.g. x = e_{-a}."""
    return _exp_nilpotent(ad_matrix(x))
