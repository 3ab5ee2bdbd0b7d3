"""Two-dimensional scattering diagrams and their unique Stokes-factor solution.

A diagram is a cyclically ordered set of rays at a point.  Incoming rays carry
known unipotent factors exp(X) with X in a single root space; the outgoing
factors are determined by requiring that the clockwise ordered product (with
exponent -1 on incoming and +1 on outgoing rays) is the identity.

The solver works level by level in the height grading of a polarization that
contains every label.  At height h the unknown outgoing coefficient for a
root of that height enters the logarithm of the product linearly with
coefficient +1, and everything else contributing at height h comes from
brackets of strictly lower heights, which are already fixed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from camnet.errors import (
    CoincidentRays,
    DuplicateIncomingRoot,
    InputError,
    NonConvexIncoming,
    OutgoingMismatch,
    UnsupportedKind,
)
from camnet.liealg import (
    ChevalleyTable,
    build_chevalley_table,
    find_polarization,
    restricted_convex_hull,
    weyl_from_word,
)
from camnet.scalars import format_scalar, parse_rational, parse_scalar
from camnet.unipotent import (
    ExactMatrix,
    NilElement,
    adjoint_exp,
    adjoint_exp_any,
    adjoint_product,
    bch_product,
    bch_raw,
    bracket,
    iterated_bracket,
)

IN = "in"
OUT = "out"


@dataclass(frozen=True)
class Ray:
    pos: Fraction  # fraction of a full turn, measured clockwise, in [0, 1)
    direction: str  # "in" or "out"
    root: int

    @property
    def incoming(self) -> bool:
        return self.direction == IN


@dataclass(frozen=True)
class ScatteringDiagram:
    table: ChevalleyTable
    rays: tuple[Ray, ...]

    @property
    def c_in(self) -> tuple[int, ...]:
        return tuple(r.root for r in self.rays if r.incoming)

    @property
    def c_out(self) -> tuple[int, ...]:
        return tuple(r.root for r in self.rays if not r.incoming)

    def incoming_indices(self) -> list[int]:
        return [i for i, r in enumerate(self.rays) if r.incoming]

    def outgoing_indices(self) -> list[int]:
        return [i for i, r in enumerate(self.rays) if not r.incoming]

    def to_json(self, decoration: Mapping[int, NilElement] | None = None) -> dict:
        rays = []
        for i, r in enumerate(self.rays):
            entry = {"pos": str(r.pos), "dir": r.direction, "root": r.root}
            if decoration and i in decoration and decoration[i]:
                entry["coeff"] = format_scalar(decoration[i][r.root])
            rays.append(entry)
        return {"schema": "camnet/1", "system": self.table.rootsys.code, "rays": rays}


def make_diagram(table: ChevalleyTable | str, rays: Sequence) -> ScatteringDiagram:
    """Build a diagram from (pos, direction, root) triples or Ray objects."""
    if isinstance(table, str):
        table = build_chevalley_table(table)
    out = []
    for r in rays:
        if isinstance(r, Ray):
            out.append(r)
        else:
            pos, direction, root = r
            out.append(Ray(Fraction(pos) % 1, direction, int(root)))
    return ScatteringDiagram(table, tuple(out))


def diagram_from_json(data: Mapping) -> tuple[ScatteringDiagram, dict[int, NilElement]]:
    """Parse diagram JSON; returns the diagram and the incoming decoration."""
    try:
        table = build_chevalley_table(str(data["system"]))
        n = len(table.rootsys)
        rays = []
        deco = {}
        for i, entry in enumerate(data["rays"]):
            direction = str(entry["dir"])
            if direction not in (IN, OUT):
                raise InputError(f"ray {i}: dir must be 'in' or 'out'")
            root = int(entry["root"])
            if not 0 <= root < n:
                raise InputError(f"ray {i}: root index {root} out of range")
            rays.append(Ray(parse_rational(entry["pos"]) % 1, direction, root))
            if "coeff" in entry and direction == IN:
                deco[i] = NilElement.single(table, root, parse_scalar(entry["coeff"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed diagram JSON: {exc}") from exc
    return ScatteringDiagram(table, tuple(rays)), deco


def validate_diagram(d: ScatteringDiagram) -> None:
    rs = d.table.rootsys
    positions = [r.pos for r in d.rays]
    if len(set(positions)) != len(positions):
        raise CoincidentRays("two rays share a cyclic position")
    c_in = d.c_in
    if len(set(c_in)) != len(c_in):
        raise DuplicateIncomingRoot("an incoming root label repeats")
    if find_polarization(rs, c_in) is None:
        raise NonConvexIncoming(f"incoming labels {[rs.roots[g] for g in c_in]} lie in no positive system")
    hull = restricted_convex_hull(rs, c_in)
    c_out = d.c_out
    if len(set(c_out)) != len(c_out) or set(c_out) != set(hull):
        raise OutgoingMismatch(
            f"outgoing labels {sorted(rs.roots[g] for g in c_out)} differ from the hull {sorted(rs.roots[g] for g in hull)}"
        )


def cyclic_order(d: ScatteringDiagram) -> list[int]:
    """Ray indices clockwise, starting at the outgoing ray of smallest position."""
    ordered = sorted(range(len(d.rays)), key=lambda i: d.rays[i].pos)
    outs = [i for i in ordered if not d.rays[i].incoming]
    if not outs:
        return ordered
    k = ordered.index(outs[0])
    return ordered[k:] + ordered[:k]


def cyclic_word(d: ScatteringDiagram, decoration: Mapping[int, NilElement] | None = None) -> list[tuple[int, int, NilElement | None]]:
    """Clockwise word as (ray index, exponent, factor log) triples."""
    decoration = decoration or {}
    return [(i, -1 if d.rays[i].incoming else 1, decoration.get(i)) for i in cyclic_order(d)]


def _coerce(table: ChevalleyTable, ray: Ray, value) -> NilElement:
    if isinstance(value, NilElement):
        if value.support - {ray.root}:
            raise InputError("a ray factor must live in the root space of its label")
        return value
    return NilElement.single(table, ray.root, parse_scalar(value))


def solve(d: ScatteringDiagram, incoming: Mapping[int, object]) -> dict[int, NilElement]:
    """Unique outgoing decoration making the clockwise product trivial."""
    validate_diagram(d)
    table = d.table
    rs = table.rootsys
    inc = {i: _coerce(table, d.rays[i], v) for i, v in incoming.items() if d.rays[i].incoming}
    outs = d.outgoing_indices()
    if not outs:
        return {}
    pol = find_polarization(rs, d.c_out)
    heights = {g: pol.height(g) for g in pol.positive}
    word = cyclic_order(d)
    values: dict[int, object] = {i: Fraction(0) for i in outs}
    for h in sorted({heights[d.rays[i].root] for i in outs}):
        acc: dict = {}
        for i in word:
            ray = d.rays[i]
            if ray.incoming:
                x = inc.get(i)
                if x is None or not x:
                    continue
                acc = bch_raw(table, acc, {k: -v for k, v in x.coeffs.items()}, heights, max_height=h)
            else:
                v = values[i]
                if v:
                    acc = bch_raw(table, acc, {ray.root: v}, heights, max_height=h)
        for i in outs:
            g = d.rays[i].root
            if heights[g] == h:
                values[i] = -acc.get(g, 0)
    return {i: NilElement.single(table, d.rays[i].root, values[i]) for i in outs}


def solve_decoration(d: ScatteringDiagram, incoming: Mapping[int, object]) -> dict[int, NilElement]:
    """Incoming decoration (coerced) together with the solved outgoing factors."""
    full = {i: _coerce(d.table, d.rays[i], v) for i, v in incoming.items()}
    full.update(solve(d, incoming))
    return full


def word_factors(d: ScatteringDiagram, decoration: Mapping[int, NilElement], start: int = 0) -> list[NilElement]:
    """Signed factor logs in clockwise order, rotated by ``start`` places."""
    word = cyclic_order(d)
    word = word[start:] + word[:start]
    table = d.table
    out = []
    for i in word:
        x = decoration.get(i)
        if x is None:
            x = NilElement(table)
        out.append(-x if d.rays[i].incoming else x)
    return out


def verify_solution(d: ScatteringDiagram, decoration: Mapping[int, NilElement], start: int = 0) -> NilElement:
    """log of the clockwise product; zero iff the decorated diagram is consistent."""
    factors = word_factors(d, decoration, start)
    pol = find_polarization(d.table.rootsys, d.c_out or d.c_in)
    return bch_product(factors, polarization=pol)


def verify_solution_oracle(d: ScatteringDiagram, decoration: Mapping[int, NilElement], start: int = 0) -> bool:
    """Same check as an exact matrix product in the adjoint representation."""
    factors = word_factors(d, decoration, start)
    prod = adjoint_product(factors)
    return prod == ExactMatrix.identity(d.table.dim)


# ---------------------------------------------------------------------------
# Planar closed forms
# ---------------------------------------------------------------------------

PLANAR_KINDS = ("A1xA1", "A2", "B2", "G2", "swap-sum")


def planar_closed_form(kind: str, x: NilElement, y: NilElement) -> list[tuple[int, NilElement]]:
    """Explicit reordering of exp(x) exp(y) into factors over the hull, as (root, log) pairs.

    For kinds A1xA1, A2, B2, G2 the labels are (a, b) with a the shorter
    root when lengths differ; the result lists exp(y) first and exp(x) last,
    with intermediate factors in between.  The kind ``swap-sum`` covers two
    labels (d, g) whose hull lies in {g, 2g+d, g+d, g+2d, d}, with x in the d
    root space and y in the g root space.
    """
    if kind not in PLANAR_KINDS:
        raise UnsupportedKind(f"unknown planar kind {kind!r}")
    table = x.table
    rs = table.rootsys
    (a,) = tuple(x.support) or (None,)
    (b,) = tuple(y.support) or (None,)
    if a is None or b is None:
        raise InputError("planar_closed_form needs nonzero single-root inputs")
    hull = restricted_convex_hull(rs, {a, b})
    expected = {"A1xA1": 2, "A2": 3, "B2": 4, "G2": 6}
    if kind in expected and len(hull) != expected[kind]:
        raise UnsupportedKind(f"labels span a hull of size {len(hull)}, not of kind {kind}")
    if kind == "swap-sum":
        full = [
            (y, None),
            (iterated_bracket(y, x, 2).scale(Fraction(1, 2)), None),
            (bracket(x, y), None),
            (iterated_bracket(x, y, 2).scale(Fraction(1, 2)), None),
            (x, None),
        ]
        combos = [(0, 1), (1, 2), (1, 1), (2, 1), (1, 0)]  # (multiple of d, multiple of g)
        roots = [rs.find(tuple(p * u + q * v for u, v in zip(rs.roots[a], rs.roots[b]))) for p, q in combos]
    else:
        xy = bracket(x, y)
        xy2 = iterated_bracket(x, y, 2)
        xy3 = iterated_bracket(x, y, 3)
        full = [
            (y, None),
            (xy, None),
            (bracket(xy2, xy).scale(Fraction(1, 6)), None),
            (xy2.scale(Fraction(1, 2)), None),
            (xy3.scale(Fraction(1, 6)), None),
            (x, None),
        ]
        combos = [(0, 1), (1, 1), (3, 2), (2, 1), (3, 1), (1, 0)]  # (multiple of a, multiple of b)
        roots = [rs.find(tuple(p * u + q * v for u, v in zip(rs.roots[a], rs.roots[b]))) for p, q in combos]
    if not set(hull) <= set(roots):
        raise UnsupportedKind(f"labels span a hull of size {len(hull)} not covered by kind {kind}")
    out = []
    for (elem, _), g in zip(full, roots):
        if g is not None and g in hull:
            out.append((g, elem))
        elif elem:
            raise ArithmeticError("closed form produced a factor outside the hull")
    return out


def planar_closed_form_check(kind: str, x: NilElement, y: NilElement) -> bool:
    """exp(x) exp(y) equals the closed-form product, in the adjoint oracle."""
    lhs = adjoint_exp(x) @ adjoint_exp(y)
    rhs = adjoint_product([e for _, e in planar_closed_form(kind, x, y)])
    return lhs == rhs


# ---------------------------------------------------------------------------
# Cecotti-Vafa type identities
# ---------------------------------------------------------------------------

# left hand side orders as (multiple of the short simple root, multiple of the long one)
CV_ORDERS = {
    "A2": ((1, 0), (1, 1), (0, 1)),
    "B2": ((1, 0), (2, 1), (1, 1), (0, 1)),
    "G2": ((1, 0), (3, 1), (2, 1), (3, 2), (1, 1), (0, 1)),
}


def cecotti_vafa_sides(kind: str, coefficients: Sequence, as_stated: bool = False) -> tuple[list[NilElement], list[NilElement]]:
    """Both sides of the wall-crossing identity as lists of factor logs.

    For G2 the degree five term of the 3a+2b factor is 1/6 [[Xa,Xb]^[2],[Xa,Xb]],
    matching the planar swap formula.  ``as_stated=True`` instead uses the
    commonly quoted ordering 1/6 [[Xa,Xb],[Xa,Xb]^[2]], which has the opposite
    sign and does not give a true identity; it exists so that this can be
    demonstrated.
    """
    if kind not in CV_ORDERS:
        raise UnsupportedKind(f"no wall-crossing identity for {kind!r}")
    table = build_chevalley_table(kind)
    rs = table.rootsys
    order = CV_ORDERS[kind]
    if len(coefficients) != len(order):
        raise InputError(f"{kind} needs {len(order)} coefficients")
    X = {pq: NilElement.single(table, rs.index(pq), parse_scalar(c)) for pq, c in zip(order, coefficients)}
    lhs = [X[pq] for pq in order]
    a, b = X[(1, 0)], X[(0, 1)]
    br = bracket
    if kind == "A2":
        rhs = [b, X[(1, 1)] + br(a, b), a]
    elif kind == "B2":
        rhs = [
            b,
            X[(1, 1)] + br(a, b),
            X[(2, 1)] + br(a, X[(1, 1)]) + iterated_bracket(a, b, 2).scale(Fraction(1, 2)),
            a,
        ]
    else:
        ab = br(a, b)
        ab2 = iterated_bracket(a, b, 2)
        rhs = [
            b,
            X[(1, 1)] + ab,
            X[(3, 2)]
            + br(X[(3, 1)], b)
            + br(X[(2, 1)], X[(1, 1)])
            + br(ab2, X[(1, 1)]).scale(Fraction(1, 2))
            + (br(ab, ab2) if as_stated else br(ab2, ab)).scale(Fraction(1, 6))
            + iterated_bracket(X[(1, 1)], a, 2).scale(Fraction(1, 2)),
            X[(2, 1)] + br(a, X[(1, 1)]) + ab2.scale(Fraction(1, 2)),
            X[(3, 1)]
            + br(a, X[(2, 1)])
            + iterated_bracket(a, b, 3).scale(Fraction(1, 6))
            + iterated_bracket(a, X[(1, 1)], 2).scale(Fraction(1, 2)),
            a,
        ]
    return lhs, rhs


def cecotti_vafa_identity_check(kind: str, coefficients: Sequence, as_stated: bool = False) -> bool:
    lhs, rhs = cecotti_vafa_sides(kind, coefficients, as_stated)
    return adjoint_product(lhs) == adjoint_product(rhs)


# ---------------------------------------------------------------------------
# Equivariance under N = normalizer of the torus
# ---------------------------------------------------------------------------


def _weyl_signs(table: ChevalleyTable, k: int) -> dict[int, int]:
    """Signs c with Ad(n_k) e_g = c e_{s_k g} for the k-th simple reflection."""
    rs = table.rootsys
    s = rs.simple[k]
    e = NilElement.single(table, s, 1)
    f = NilElement.single(table, rs.neg(s), 1)
    m = adjoint_exp_any(e) @ adjoint_exp_any(f) @ adjoint_exp_any(e)
    signs = {}
    for g in range(len(rs)):
        tgt = rs.reflect(s, g)
        c = m.entry(tgt, g)
        if c not in (1, -1):
            raise ArithmeticError("Weyl lift does not permute the Chevalley basis up to sign")
        signs[g] = int(c)
    return signs


_SIGN_CACHE: dict = {}


def weyl_signs(table: ChevalleyTable, k: int) -> dict[int, int]:
    key = (table.rootsys.code, k)
    if key not in _SIGN_CACHE:
        _SIGN_CACHE[key] = _weyl_signs(table, k)
    return _SIGN_CACHE[key]


def _character(ts: Sequence, exponents: Sequence[int]):
    chi = Fraction(1)
    for t, m in zip(ts, exponents):
        for _ in range(abs(m)):
            chi = chi * t if m > 0 else chi / t
    return chi


def transform_element(x: NilElement, word: Sequence[int] = (), torus: Sequence | None = None) -> NilElement:
    """Apply Ad(t) then Ad(n_w), with n_w the product of simple lifts along ``word``."""
    table = x.table
    rs = table.rootsys
    coeffs = dict(x.coeffs)
    if torus is not None:
        ts = [parse_scalar(t) for t in torus]
        if any(not t for t in ts):
            raise InputError("torus entries must be nonzero")
        coeffs = {g: _character(ts, rs.roots[g]) * v for g, v in coeffs.items()}
    for k in reversed(tuple(word)):
        signs = weyl_signs(table, k)
        s = rs.simple[k]
        coeffs = {rs.reflect(s, g): signs[g] * v for g, v in coeffs.items()}
    return NilElement(table, coeffs)


def adjoint_transform(
    d: ScatteringDiagram,
    decoration: Mapping[int, NilElement],
    word: Sequence[int] = (),
    torus: Sequence | None = None,
) -> tuple[ScatteringDiagram, dict[int, NilElement]]:
    """Relabel every ray by the Weyl element and transform its factor accordingly."""
    w = weyl_from_word(d.table.rootsys, word)
    rays = tuple(Ray(r.pos, r.direction, w(r.root)) for r in d.rays)
    new = {i: transform_element(x, word, torus) for i, x in decoration.items()}
    return ScatteringDiagram(d.table, rays), new


# ---------------------------------------------------------------------------
# Worked joints
# ---------------------------------------------------------------------------

# clockwise ray sequence of the interleaved A3 joint, as (direction, root vector)
A3_INTERLEAVED = (
    (IN, (1, 0, 0)),
    (OUT, (0, 0, 1)),
    (IN, (0, 1, 0)),
    (OUT, (1, 0, 0)),
    (OUT, (1, 1, 1)),
    (OUT, (1, 1, 0)),
    (IN, (0, 0, 1)),
    (OUT, (0, 1, 0)),
    (OUT, (0, 1, 1)),
)


def a3_interleaved_diagram() -> ScatteringDiagram:
    """Three simple incoming rays interleaved with the six outgoing ones, equally spaced."""
    table = build_chevalley_table("A3")
    rs = table.rootsys
    k = len(A3_INTERLEAVED)
    return make_diagram(table, [(Fraction(i, k), dr, rs.index(v)) for i, (dr, v) in enumerate(A3_INTERLEAVED)])


def a3_closed_form_report(d: ScatteringDiagram, decoration: Mapping[int, NilElement]) -> dict[str, bool]:
    """Compare a solved interleaved A3 joint with the commutator closed forms.

    Writing a, b, c for the incoming factors on the three simple roots:

    * the a+b factor is a^-1 b a b^-1 and the b+c factor is b^-1 c b c^-1;
    * the a+b+c factor is a^-1 b c^-1 a X b^-1 c Y with Y = (a+b factor)^-1.

    ``triple_as_stated`` takes X = b^-1 c b c^-1 (the b+c factor itself);
    ``triple_corrected`` takes X = c b^-1 c^-1 b (its inverse), which is what
    solving the cyclic word gives.  All products are exact adjoint matrices.
    """
    rs = d.table.rootsys
    if rs.code != "A3" or sorted((r.direction, rs.roots[r.root]) for r in d.rays) != sorted(A3_INTERLEAVED):
        raise InputError("not an interleaved A3 joint")
    idx = {}
    for i, r in enumerate(d.rays):
        v = rs.roots[r.root]
        # simple roots are read on their incoming rays, composite roots on their outgoing ones
        if r.incoming == (sum(v) == 1):
            idx[v] = i

    def fwd(v):
        return adjoint_exp_any(decoration[idx[v]])

    def inv(v):
        return adjoint_exp_any(-decoration[idx[v]])

    A, B, C = (1, 0, 0), (0, 1, 0), (0, 0, 1)
    AB, BC, ABC = (1, 1, 0), (0, 1, 1), (1, 1, 1)
    ab = inv(A) @ fwd(B) @ fwd(A) @ inv(B)
    bc = inv(B) @ fwd(C) @ fwd(B) @ inv(C)
    head = inv(A) @ fwd(B) @ inv(C) @ fwd(A)
    tail = inv(B) @ fwd(C) @ fwd(B) @ inv(A) @ inv(B) @ fwd(A)
    stated = head @ bc @ tail
    corrected = head @ (fwd(C) @ inv(B) @ inv(C) @ fwd(B)) @ tail
    return {
        "commutator_ab": fwd(AB) == ab,
        "commutator_bc": fwd(BC) == bc,
        "triple_as_stated": fwd(ABC) == stated,
        "triple_corrected": fwd(ABC) == corrected,
    }


def simple_root_joint(code: str, rng, spread: int = 1000) -> ScatteringDiagram:
    """Random joint with the simple roots incoming and their whole restricted hull outgoing."""
    table = build_chevalley_table(code)
    rs = table.rootsys
    cin = list(rs.simple)
    labels = [(IN, g) for g in cin] + [(OUT, g) for g in sorted(restricted_convex_hull(rs, cin))]
    rng.shuffle(labels)
    pos = sorted(rng.sample(range(spread), len(labels)))
    return make_diagram(table, [(Fraction(p, spread), dr, g) for p, (dr, g) in zip(pos, labels)])


def solution_to_json(d: ScatteringDiagram, incoming: Mapping[int, NilElement], outgoing: Mapping[int, NilElement]) -> dict:
    full = dict(incoming)
    full.update(outgoing)
    residual = verify_solution(d, full)
    return {
        "schema": "camnet/1",
        "system": d.table.rootsys.code,
        "rays": [
            {
                "pos": str(r.pos),
                "dir": r.direction,
                "root": r.root,
                "rootVector": list(d.table.rootsys.roots[r.root]),
                "coeff": format_scalar(full[i][r.root]) if i in full else "0",
            }
            for i, r in enumerate(d.rays)
        ],
        "residual": residual.to_json(),
        "residualZero": not residual,
    }


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)
