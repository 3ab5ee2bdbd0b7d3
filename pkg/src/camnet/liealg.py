"""Root systems, Weyl group actions and Chevalley bases.

Every supported algebra is realized concretely as a Lie algebra of matrices:
traceless matrices for type A, the stabilizer of a symmetric or symplectic
form for types B, C and D, and the stabilizer of a generic three-form on a
seven dimensional space for G2.  In each case the diagonal matrices form a
Cartan subalgebra, so root spaces are spanned by combinations of matrix units
of a fixed weight and can be found by exact linear algebra.

A Chevalley basis is then produced by the classical recipe (normalize simple
root vectors, build the other positive root vectors by brackets, and obtain
negative root vectors through the Chevalley involution).  Finally the signs
of negative root vectors are flipped so that

    [e_a, e_{-a}] = -h_a,

which is the sign convention used throughout camnet.  Structure constants are
read off from the matrices and stored as plain integers; the matrices are
kept so that downstream code has a faithful representation at hand.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
import sympy

from camnet.errors import NegativeRoot, NotConvex, UnsupportedSeries

SUPPORTED_CODES = ("A1", "A2", "A3", "A4", "B2", "C2", "D4", "G2")

# Cartan matrices in the form cartan[i][j] = 2 (a_i, a_j) / (a_j, a_j).
# For the rank two non simply laced systems the first simple root is the
# short one; for D4 the second simple root is the central node.
_TARGET_CARTAN = {
    "B2": ((2, -1), (-2, 2)),
    "C2": ((2, -1), (-2, 2)),
    "G2": ((2, -1), (-3, 2)),
    "D4": ((2, -1, 0, 0), (-1, 2, -1, -1), (0, -1, 2, 0), (0, -1, 0, 2)),
}

Vec = tuple[int, ...]


def _a_cartan(rank: int) -> tuple[tuple[int, ...], ...]:
    rows = []
    for i in range(rank):
        rows.append(tuple(2 if i == j else (-1 if abs(i - j) == 1 else 0) for j in range(rank)))
    return tuple(rows)


def parse_code(code: str) -> tuple[str, int]:
    code = str(code).strip().upper()
    if code not in SUPPORTED_CODES:
        raise UnsupportedSeries(f"unsupported root system {code!r}; expected one of {SUPPORTED_CODES}")
    return code[0], int(code[1:])


# ---------------------------------------------------------------------------
# Root systems and Weyl group
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeylWord:
    """A Weyl group element as a word in simple reflections.

    ``perm[i]`` is the index of the image of root ``i``.
    """

    word: tuple[int, ...]
    perm: tuple[int, ...]

    def __call__(self, root_index: int) -> int:
        return self.perm[root_index]

    def inverse_perm(self) -> tuple[int, ...]:
        inv = [0] * len(self.perm)
        for i, j in enumerate(self.perm):
            inv[j] = i
        return tuple(inv)


@dataclass(frozen=True, eq=False)
class RootSystem:
    code: str
    series: str
    rank: int
    roots: tuple[Vec, ...]
    cartan: tuple[tuple[int, ...], ...]
    gram: tuple[tuple[Fraction, ...], ...]
    _index: dict = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        self._index.update({r: i for i, r in enumerate(self.roots)})

    def __len__(self) -> int:
        return len(self.roots)

    def __eq__(self, other) -> bool:
        return isinstance(other, RootSystem) and other.code == self.code

    def __hash__(self) -> int:
        return hash(self.code)

    def index(self, vec: Sequence[int]) -> int:
        try:
            return self._index[tuple(vec)]
        except KeyError:
            raise KeyError(f"{tuple(vec)} is not a root of {self.code}") from None

    def find(self, vec: Sequence[int]) -> int | None:
        return self._index.get(tuple(vec))

    @property
    def simple(self) -> tuple[int, ...]:
        return tuple(self.index(tuple(1 if k == i else 0 for k in range(self.rank))) for i in range(self.rank))

    @property
    def positive(self) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.roots) if sum(r) > 0)

    def is_positive(self, i: int) -> bool:
        return sum(self.roots[i]) > 0

    def neg(self, i: int) -> int:
        return self._index[tuple(-c for c in self.roots[i])]

    def add(self, i: int, j: int) -> int | None:
        """Index of root_i + root_j, or None when the sum is not a root."""
        return self._index.get(tuple(a + b for a, b in zip(self.roots[i], self.roots[j])))

    def pairing_vec(self, u: Sequence, v: Sequence) -> Fraction:
        total = Fraction(0)
        for a in range(self.rank):
            if u[a] == 0:
                continue
            for b in range(self.rank):
                if v[b]:
                    total += u[a] * self.gram[a][b] * v[b]
        return total

    def pairing(self, i: int, j: int) -> Fraction:
        return self.pairing_vec(self.roots[i], self.roots[j])

    def cartan_int(self, i: int, j: int) -> int:
        """The integer 2(a_i, a_j)/(a_i, a_i) (pairing of root j with coroot i)."""
        val = 2 * self.pairing(i, j) / self.pairing(i, i)
        assert val.denominator == 1
        return int(val)

    def reflect(self, i: int, j: int) -> int:
        """Index of s_{root_i}(root_j)."""
        c = self.cartan_int(i, j)
        return self.index(tuple(b - c * a for a, b in zip(self.roots[i], self.roots[j])))

    def height(self, i: int) -> int:
        return sum(self.roots[i])

    def name(self, i: int) -> str:
        """Readable name such as ``a1+2a2`` (``-`` prefix for negative roots)."""
        r = self.roots[i]
        sign = "-" if sum(r) < 0 else ""
        parts = []
        for k, c in enumerate(r):
            c = abs(c)
            if c:
                parts.append(f"{'' if c == 1 else c}a{k + 1}")
        return sign + ("+".join(parts) if not sign else "(" + "+".join(parts) + ")" if len(parts) > 1 else parts[0])


@lru_cache(maxsize=None)
def weyl_group(rs: RootSystem) -> tuple[WeylWord, ...]:
    """All Weyl group elements as permutations of roots, breadth first by length."""
    n = len(rs)
    simple_perms = []
    for s in rs.simple:
        simple_perms.append(tuple(rs.reflect(s, j) for j in range(n)))
    identity = tuple(range(n))
    seen = {identity: ()}
    order = [identity]
    queue = deque([identity])
    while queue:
        p = queue.popleft()
        for k, sp in enumerate(simple_perms):
            # (s_k . w)(root) = s_k(w(root))
            q = tuple(sp[p[j]] for j in range(n))
            if q not in seen:
                seen[q] = (k,) + seen[p]
                order.append(q)
                queue.append(q)
    return tuple(WeylWord(seen[p], p) for p in order)


def weyl_from_word(rs: RootSystem, word: Sequence[int]) -> WeylWord:
    n = len(rs)
    perm = tuple(range(n))
    for k in reversed(tuple(word)):
        s = rs.simple[k]
        perm = tuple(rs.reflect(s, perm[j]) for j in range(n))
    return WeylWord(tuple(word), perm)


@dataclass(frozen=True)
class Polarization:
    """A positive system w(Phi+) described by the Weyl element w."""

    rootsys: RootSystem
    weyl: WeylWord

    @property
    def positive(self) -> frozenset[int]:
        return frozenset(self.weyl.perm[i] for i in self.rootsys.positive)

    def height(self, i: int) -> int:
        inv = self.weyl.inverse_perm()
        return self.rootsys.height(inv[i])


def standard_polarization(rs: RootSystem) -> Polarization:
    return Polarization(rs, weyl_group(rs)[0])


def find_polarization(rs: RootSystem, roots: Iterable[int]) -> Polarization | None:
    """A polarization whose positive roots contain ``roots``, or None."""
    roots = frozenset(roots)
    return _find_polarization_cached(rs, roots)


@lru_cache(maxsize=4096)
def _find_polarization_cached(rs: RootSystem, roots: frozenset[int]) -> Polarization | None:
    for w in weyl_group(rs):
        inv = w.inverse_perm()
        if all(rs.is_positive(inv[i]) for i in roots):
            return Polarization(rs, w)
    return None


def is_convex(rs: RootSystem, roots: Iterable[int]) -> bool:
    return find_polarization(rs, roots) is not None


def height(rs: RootSystem, polarization: Polarization | None, gamma: int) -> int:
    """Height of ``gamma`` for the given polarization (standard one if None)."""
    pol = polarization or standard_polarization(rs)
    if gamma not in pol.positive:
        raise NegativeRoot(f"root {rs.roots[gamma]} is not positive for the chosen polarization")
    return pol.height(gamma)


def restricted_convex_hull(rs: RootSystem, roots: Iterable[int]) -> frozenset[int]:
    """All roots that are non-negative integer combinations of ``roots``."""
    roots = frozenset(roots)
    pol = find_polarization(rs, roots)
    if pol is None:
        raise NotConvex(f"{sorted(rs.roots[i] for i in roots)} lies in no positive system")
    if not roots:
        return frozenset()
    gens = [rs.roots[i] for i in roots]
    inv = pol.weyl.inverse_perm()
    heights = {rs.roots[i]: rs.height(inv[i]) for i in roots}

    # heights w.r.t. pol are additive and strictly positive on generators, so a
    # representation of a root uses at most ht(root) generators
    @lru_cache(maxsize=None)
    def representable(vec: Vec, budget: int) -> bool:
        if not any(vec):
            return True
        if budget <= 0:
            return False
        return any(
            representable(tuple(a - b for a, b in zip(vec, g)), budget - heights[g]) for g in gens if heights[g] <= budget
        )

    out = set()
    for j in pol.positive:
        if representable(rs.roots[j], pol.height(j)):
            out.add(j)
    return frozenset(out)


def _rank_of(vectors: Sequence[Sequence]) -> int:
    if not vectors:
        return 0
    return sympy.Matrix([list(v) for v in vectors]).rank()


@dataclass(frozen=True)
class Faces:
    faces: tuple[frozenset[int], ...]
    interior: frozenset[int]


def faces_of_cone(rs: RootSystem, cone: Iterable[int]) -> Faces:
    """Proper nonempty faces of the cone spanned by a closed convex root set.

    A face is reported as the set of generators lying on it.  The interior set
    holds the generators that lie on no proper face.
    """
    cone = sorted(frozenset(cone))
    if not cone:
        return Faces((), frozenset())
    vecs = {i: sympy.Matrix(rs.roots[i]) for i in cone}
    dim = _rank_of([rs.roots[i] for i in cone])
    # coordinates inside the span of the cone
    basis = []
    for i in cone:
        cand = basis + [rs.roots[i]]
        if _rank_of(cand) > len(basis):
            basis.append(rs.roots[i])
        if len(basis) == dim:
            break
    B = sympy.Matrix([list(b) for b in basis]).T
    coords = {}
    for i in cone:
        sol = (B.T * B).inv() * B.T * vecs[i]
        coords[i] = tuple(sympy.Rational(x) for x in sol)
    facets: set[frozenset[int]] = set()
    if dim == 1:
        return Faces((), frozenset(cone))
    for combo in itertools.combinations(cone, dim - 1):
        M = sympy.Matrix([list(coords[i]) for i in combo])
        if M.rank() != dim - 1:
            continue
        normal = M.nullspace()[0]
        values = {i: (sympy.Matrix([list(coords[i])]) * normal)[0] for i in cone}
        if all(v >= 0 for v in values.values()):
            pass
        elif all(v <= 0 for v in values.values()):
            values = {i: -v for i, v in values.items()}
        else:
            continue
        facets.add(frozenset(i for i, v in values.items() if v == 0))
    faces = set(facets)
    frontier = set(facets)
    while frontier:
        new = set()
        for f in frontier:
            for g in facets:
                h = f & g
                if h and h not in faces:
                    new.add(h)
        faces |= new
        frontier = new
    covered = set().union(*faces) if faces else set()
    ordered = tuple(sorted(faces, key=lambda f: (len(f), sorted(f))))
    return Faces(ordered, frozenset(i for i in cone if i not in covered))


# ---------------------------------------------------------------------------
# Matrix models
# ---------------------------------------------------------------------------


def _frac_matrix(rows) -> np.ndarray:
    return np.array([[Fraction(x) for x in row] for row in rows], dtype=object)


def _zeros(n: int) -> np.ndarray:
    return np.array([[Fraction(0)] * n for _ in range(n)], dtype=object)


def _comm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a.dot(b) - b.dot(a)


def _ratio(a: np.ndarray, b: np.ndarray) -> Fraction:
    """The scalar c with a == c*b (b nonzero); raises if not proportional."""
    idx = next(k for k, v in np.ndenumerate(b) if v != 0)
    c = a[idx] / b[idx]
    if not all(a[k] == c * b[k] for k, _ in np.ndenumerate(b)):
        raise ArithmeticError("matrices are not proportional")
    return c


def _matrix_model(series: str, rank: int):
    """Ambient weights of the standard basis vectors plus invariant tensors."""
    F = Fraction
    if series == "A":
        n = rank + 1
        weights = [tuple(F(int(i == k)) for k in range(n)) for i in range(n)]
        return weights, []
    if series in ("B", "D"):
        m = rank
        pos = [tuple(F(int(i == k)) for k in range(m)) for i in range(m)]
        zero = [tuple(F(0) for _ in range(m))] if series == "B" else []
        weights = pos + zero + [tuple(-x for x in w) for w in reversed(pos)]
        n = len(weights)
        form = {(i, n - 1 - i): F(1) for i in range(n)}
        return weights, [(2, form)]
    if series == "C":
        m = rank
        pos = [tuple(F(int(i == k)) for k in range(m)) for i in range(m)]
        weights = pos + [tuple(-x for x in w) for w in reversed(pos)]
        n = len(weights)
        form = {}
        for i in range(n):
            form[(i, n - 1 - i)] = F(1) if i < m else F(-1)
        return weights, [(2, form)]
    if series == "G":
        e = [tuple(F(int(i == k)) for k in range(3)) for i in range(3)]
        weights = [(F(0),) * 3] + e + [tuple(-x for x in w) for w in e]
        # basis: v0, w1, w2, w3, w1*, w2*, w3*
        phi = {}

        def put(a, b, c, val):
            for perm, sgn in (((a, b, c), 1), ((b, c, a), 1), ((c, a, b), 1), ((b, a, c), -1), ((a, c, b), -1), ((c, b, a), -1)):
                phi[perm] = F(sgn) * val

        put(1, 2, 3, F(1))
        put(4, 5, 6, F(1))
        for i in range(3):
            put(0, 1 + i, 4 + i, F(1))
        return weights, [(3, phi)]
    raise UnsupportedSeries(series)


def _root_spaces(weights, tensors):
    """Map ambient root vector -> matrix spanning its root space."""
    n = len(weights)
    groups: dict[tuple, list[tuple[int, int]]] = {}
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            d = tuple(x - y for x, y in zip(weights[a], weights[b]))
            if any(d):
                groups.setdefault(d, []).append((a, b))
    spaces = {}
    for d, pairs in sorted(groups.items()):
        rows = []
        for arity, tensor in tensors:
            for idx in itertools.product(range(n), repeat=arity):
                row = []
                for a, b in pairs:
                    coeff = Fraction(0)
                    for slot in range(arity):
                        if idx[slot] == b:
                            j = list(idx)
                            j[slot] = a
                            coeff += tensor.get(tuple(j), 0)
                    row.append(coeff)
                if any(row):
                    rows.append(row)
        if rows:
            null = sympy.Matrix(rows).nullspace()
        else:
            null = [sympy.Matrix([1 if k == 0 else 0 for k in range(len(pairs))])] if len(pairs) == 1 else None
            if null is None:
                raise AssertionError("unconstrained multi-entry weight space")
        if not null:
            continue
        if len(null) != 1:
            raise AssertionError(f"root space for {d} has dimension {len(null)}")
        mat = _zeros(n)
        for (a, b), val in zip(pairs, null[0]):
            mat[a, b] = Fraction(int(sympy.fraction(val)[0]), int(sympy.fraction(val)[1]))
        spaces[d] = mat
    return spaces


def _project(series: str, v: Sequence[Fraction]) -> tuple[Fraction, ...]:
    if series in ("A", "G"):
        mean = sum(v, Fraction(0)) / len(v)
        return tuple(x - mean for x in v)
    return tuple(v)


def _dot(u, v) -> Fraction:
    return sum((a * b for a, b in zip(u, v)), Fraction(0))


@dataclass(frozen=True, eq=False)
class ChevalleyTable:
    """Chevalley basis data for a root system.

    ``N[(a, b)]`` is the integer with [e_a, e_b] = N e_{a+b}.  ``coroot[a]``
    expresses h_a = -[e_a, e_{-a}] in the basis of simple coroots.
    ``matrices[a]`` is e_a in the defining matrix model and ``h_matrices[k]``
    is the k-th simple coroot there.
    """

    rootsys: RootSystem
    N: dict
    coroot: dict
    cartan_pairing: dict
    matrices: dict = field(repr=False)
    h_matrices: tuple = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.rootsys) + self.rootsys.rank

    def structure_constant(self, a: int, b: int) -> int:
        return self.N.get((a, b), 0)


@lru_cache(maxsize=None)
def build_root_system(series: str, rank: int | None = None) -> RootSystem:
    """Root system for a code like ``"B2"`` or a pair ``("B", 2)``."""
    code = f"{series}{rank}" if rank is not None else str(series)
    return _build(code)[0]


@lru_cache(maxsize=None)
def build_chevalley_table(rs: RootSystem | str) -> ChevalleyTable:
    code = rs.code if isinstance(rs, RootSystem) else str(rs)
    return _build(code)[1]


@lru_cache(maxsize=None)
def _build(code: str) -> tuple[RootSystem, ChevalleyTable]:
    series, rank = parse_code(code)
    code = f"{series}{rank}"
    weights, tensors = _matrix_model(series, rank)
    weights = [_project(series, w) for w in weights]
    spaces = _root_spaces(weights, tensors)
    ambient = sorted(spaces)
    proj = {d: _project(series, d) for d in ambient}

    # positivity from a generic functional, then simple roots
    functional = [Fraction(1000 ** (len(ambient[0]) - k)) + Fraction(k, 7) for k in range(len(ambient[0]))]
    pos = [d for d in ambient if _dot(functional, proj[d]) > 0]
    assert len(pos) * 2 == len(ambient)
    pos_set = set(pos)
    sums = {tuple(a + b for a, b in zip(x, y)) for x in pos for y in pos}
    simple = [d for d in pos if d not in sums]
    if len(simple) != rank:
        raise AssertionError(f"{code}: found {len(simple)} simple roots")

    target = _TARGET_CARTAN.get(code, _a_cartan(rank) if series == "A" else None)
    best = None
    for perm in itertools.permutations(simple):
        cart = tuple(
            tuple(int(2 * _dot(proj[perm[i]], proj[perm[j]]) / _dot(proj[perm[j]], proj[perm[j]])) for j in range(rank))
            for i in range(rank)
        )
        if cart == target:
            best = perm
            break
    if best is None:
        raise AssertionError(f"{code}: could not match the Cartan matrix")
    simple = list(best)

    S = sympy.Matrix([[sympy.Rational(x.numerator, x.denominator) for x in proj[s]] for s in simple]).T
    coords: dict[tuple, Vec] = {}
    for d in ambient:
        v = sympy.Matrix([sympy.Rational(x.numerator, x.denominator) for x in proj[d]])
        sol = (S.T * S).inv() * S.T * v
        if S * sol != v:
            raise AssertionError("root outside the span of the simple roots")
        coords[d] = tuple(int(x) for x in sol)

    gram_raw = [[_dot(proj[a], proj[b]) for b in simple] for a in simple]
    longest = max(_dot(proj[d], proj[d]) for d in ambient)
    scale = Fraction(2) / longest
    gram = tuple(tuple(x * scale for x in row) for row in gram_raw)

    positive = sorted((coords[d] for d in pos), key=lambda c: (sum(c), c))
    roots = tuple(positive) + tuple(tuple(-x for x in c) for c in positive)
    cart = tuple(
        tuple(int(2 * gram[i][j] / gram[j][j]) for j in range(rank)) for i in range(rank)
    )
    rs = RootSystem(code=code, series=series, rank=rank, roots=roots, cartan=cart, gram=gram)
    by_coords = {coords[d]: spaces[d] for d in ambient}
    return rs, _chevalley(rs, by_coords, pos_set, coords)


def _chevalley(rs: RootSystem, spaces: dict, pos_set, coords) -> ChevalleyTable:
    n_roots = len(rs)
    simple = rs.simple
    X: dict[int, np.ndarray] = {}  # standard Chevalley basis X_gamma
    W: dict[int, np.ndarray] = {}  # omega(X_gamma) for positive gamma
    H: list[np.ndarray] = []
    for k, s in enumerate(simple):
        x = spaces[rs.roots[s]]
        y = spaces[rs.roots[rs.neg(s)]]
        h = _comm(x, y)
        c = _ratio(_comm(h, x), x)  # = a_s(h)
        y = y * (Fraction(2) / c)
        X[s] = x
        X[rs.neg(s)] = y
        W[s] = -y
        H.append(_comm(x, y))
    for g in sorted(rs.positive, key=rs.height):
        if g in X:
            continue
        for k, s in enumerate(simple):
            b = rs.find(tuple(a - (1 if i == k else 0) for i, a in enumerate(rs.roots[g])))
            if b is not None and rs.is_positive(b):
                break
        p = 0
        while rs.find(tuple(bb - (p + 1) * (1 if i == k else 0) for i, bb in enumerate(rs.roots[b]))) is not None:
            p += 1
        X[g] = _comm(X[s], X[b]) * Fraction(1, p + 1)
        W[g] = _comm(W[s], W[b]) * Fraction(1, p + 1)
        X[rs.neg(g)] = -W[g]

    e = {}
    for g in range(n_roots):
        e[g] = X[g] if rs.is_positive(g) else -X[g]

    # simple coroot matrices are diagonal; solve for coroot coordinates
    diag_h = [tuple(h[i, i] for i in range(h.shape[0])) for h in H]
    Hm = sympy.Matrix([[sympy.Rational(x.numerator, x.denominator) for x in d] for d in diag_h]).T
    coroot = {}
    for g in range(n_roots):
        hg = -_comm(e[g], e[rs.neg(g)])
        d = sympy.Matrix([sympy.Rational(hg[i, i].numerator, hg[i, i].denominator) for i in range(hg.shape[0])])
        sol = (Hm.T * Hm).inv() * Hm.T * d
        if Hm * sol != d:
            raise AssertionError("coroot outside the span of simple coroots")
        coroot[g] = tuple(int(x) for x in sol)

    N = {}
    for a in range(n_roots):
        for b in range(n_roots):
            c = rs.add(a, b)
            if c is None:
                continue
            val = _ratio(_comm(e[a], e[b]), e[c])
            assert val.denominator == 1
            N[(a, b)] = int(val)
    cartan_pairing = {(a, b): rs.cartan_int(a, b) for a in range(n_roots) for b in range(n_roots)}
    return ChevalleyTable(
        rootsys=rs,
        N=N,
        coroot=coroot,
        cartan_pairing=cartan_pairing,
        matrices=e,
        h_matrices=tuple(H),
    )


# ---------------------------------------------------------------------------
# Full Lie algebra bracket from the table (used by the oracle and the checks)
# ---------------------------------------------------------------------------


def basis_bracket(table: ChevalleyTable, i: int, j: int) -> dict[int, int]:
    """[b_i, b_j] for basis elements of g, indexed roots first then simple coroots."""
    rs = table.rootsys
    nr = len(rs)
    out: dict[int, int] = {}
    if i < nr and j < nr:
        c = rs.add(i, j)
        if c is not None:
            out[c] = table.N[(i, j)]
        elif rs.roots[i] == tuple(-x for x in rs.roots[j]):
            for k, v in enumerate(table.coroot[i]):
                if v:
                    out[nr + k] = -v
        return out
    if i >= nr and j >= nr:
        return out
    if i >= nr:
        s = rs.simple[i - nr]
        return {j: table.cartan_pairing[(s, j)]} if table.cartan_pairing[(s, j)] else {}
    s = rs.simple[j - nr]
    return {i: -table.cartan_pairing[(s, i)]} if table.cartan_pairing[(s, i)] else {}


def _bracket_vec(table: ChevalleyTable, x: dict, y: dict) -> dict:
    out: dict[int, int] = {}
    for i, a in x.items():
        for j, b in y.items():
            for k, c in basis_bracket(table, i, j).items():
                out[k] = out.get(k, 0) + a * b * c
    return {k: v for k, v in out.items() if v}


@dataclass
class ChevalleyReport:
    system: str
    checks: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def verify_chevalley_table(table: ChevalleyTable, check_matrices: bool = True) -> ChevalleyReport:
    """Check the defining relations, the |N| = p+1 rule, antisymmetry and Jacobi."""
    rs = table.rootsys
    nr = len(rs)
    rep = ChevalleyReport(rs.code)

    def tick(name, ok, detail=None):
        rep.checks[name] = rep.checks.get(name, 0) + 1
        if not ok:
            rep.failures.append((name, detail))

    # [h_a, e_g] = 2(a,g)/(a,a) e_g: h_a in coroot coordinates acts through the simple pairings
    for a in range(nr):
        for g in range(nr):
            val = sum(c * table.cartan_pairing[(rs.simple[k], g)] for k, c in enumerate(table.coroot[a]))
            tick("h_a e_g", val == 2 * rs.pairing(a, g) / rs.pairing(a, a), (a, g))
    # [e_a, e_-a] = -h_a and coroots negate
    for a in range(nr):
        br = basis_bracket(table, a, rs.neg(a))
        expect = {nr + k: -v for k, v in enumerate(table.coroot[a]) if v}
        tick("e_a e_-a", br == expect, a)
    for (a, b), v in table.N.items():
        p = 0
        while rs.find(tuple(x - (p + 1) * y for x, y in zip(rs.roots[a], rs.roots[b]))) is not None:
            p += 1
        tick("|N|=p+1", abs(v) == p + 1, (a, b, v, p))
        tick("antisymmetry", table.N[(b, a)] == -v, (a, b))
    dim = table.dim
    for i in range(dim):
        for j in range(i, dim):
            bij = basis_bracket(table, i, j)
            for k in range(j, dim):
                total: dict[int, int] = {}
                for x, y, z, bxy in ((i, j, k, bij), (j, k, i, None), (k, i, j, None)):
                    inner = bxy if bxy is not None else basis_bracket(table, x, y)
                    for key, val in _bracket_vec(table, {z: 1}, inner).items():
                        total[key] = total.get(key, 0) + val
                tick("jacobi", not any(total.values()), (i, j, k))
    if check_matrices:
        e = table.matrices
        for a in range(nr):
            for b in range(nr):
                lhs = _comm(e[a], e[b])
                c = rs.add(a, b)
                if c is not None:
                    ok = (lhs == e[c] * table.N[(a, b)]).all()
                elif rs.roots[a] == tuple(-x for x in rs.roots[b]):
                    h = _zeros(lhs.shape[0])
                    for k, v in enumerate(table.coroot[a]):
                        h = h + table.h_matrices[k] * v
                    ok = (lhs == -h).all()
                else:
                    ok = not any(v != 0 for v in lhs.flat)
                tick("matrix bracket", ok, (a, b))
    return rep


def n_alpha_matrix(table: ChevalleyTable, a: int) -> np.ndarray:
    """exp(e_a) exp(e_-a) exp(e_a) in the matrix model (exact)."""
    ea = table.matrices[a]
    fa = table.matrices[table.rootsys.neg(a)]

    def expm_nil(m):
        n = m.shape[0]
        out = np.identity(n, dtype=object) * Fraction(1)
        term = out
        for k in range(1, n + 1):
            term = term.dot(m) * Fraction(1, k)
            if not any(v != 0 for v in term.flat):
                break
            out = out + term
        return out

    return expm_nil(ea).dot(expm_nil(fa)).dot(expm_nil(ea))
