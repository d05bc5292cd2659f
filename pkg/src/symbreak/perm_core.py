"""Permutations, the product group S_k x S_d and its action on index pairs / matrices.

Indices are 0-based internally. Cycle notation is rendered and parsed with
1-based labels, e.g. ``"(1 2)(3 4)"``.

Conventions
-----------
``compose(a, b)(j) = a(b(j))``.  A :class:`GroupElement` ``(pi, rho)`` sends the
cell ``(i, j)`` to ``(pi^-1(i), rho^-1(j))`` and acts on matrices by
``W -> P_pi W P_rho^T``, i.e. ``(g W)[i, j] = W[pi^-1(i), rho^-1(j)]``, where
``(P_pi)[i, j] = 1`` iff ``i = pi(j)``.  The matrix action is a left action.
The index map is the pull-back used by the matrix action, so it composes the
other way round: ``act_on_index(g * h, c) == act_on_index(h, act_on_index(g, c))``.
"""
from __future__ import annotations

import itertools
import math
import re
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Permutation",
    "GroupElement",
    "SignedPermutation",
    "PermGroup",
    "OrbitPartition",
    "ConjugacyVerdict",
    "GroupOrderExceeded",
    "compose",
    "act_on_index",
    "act_on_matrix",
    "closure",
    "orbits",
    "projections",
    "is_transitive",
    "is_doubly_transitive",
    "are_conjugate",
    "symmetric_group",
    "diagonal_group",
    "product_group",
    "wreath_generators",
    "hyperoctahedral_group",
    "permutation_matrix",
]


class GroupOrderExceeded(RuntimeError):
    """Raised when an enumeration would exceed the caller-supplied cap."""


@dataclass(frozen=True)
class Permutation:
    """A bijection of ``{0, ..., n-1}`` stored as its image array."""

    images: tuple[int, ...]

    def __post_init__(self):
        images = tuple(int(x) for x in self.images)
        if sorted(images) != list(range(len(images))):
            raise ValueError(f"not a permutation: {images}")
        object.__setattr__(self, "images", images)

    @classmethod
    def identity(cls, n: int) -> Permutation:
        return cls(tuple(range(n)))

    @classmethod
    def from_cycles(cls, cycles: Iterable[Sequence[int]], n: int, one_based: bool = True) -> Permutation:
        images = list(range(n))
        off = 1 if one_based else 0
        seen: set[int] = set()
        for cyc in cycles:
            cyc = [c - off for c in cyc]
            if seen.intersection(cyc) or len(set(cyc)) != len(cyc):
                raise ValueError("cycles must be disjoint")
            seen.update(cyc)
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                if not 0 <= a < n:
                    raise ValueError(f"point {a + off} out of range for degree {n}")
                images[a] = b
        return cls(tuple(images))

    @classmethod
    def parse(cls, text: str, n: int) -> Permutation:
        """Parse 1-based cycle notation such as ``"(1 2)(3 4)"``; ``"()"`` is the identity."""
        text = text.strip()
        if not re.fullmatch(r"(\(\s*(\d+([\s,]+\d+)*)?\s*\))*", text):
            raise ValueError(f"bad cycle notation: {text!r}")
        cycles = [[int(t) for t in re.split(r"[\s,]+", body.strip())]
                  for body in re.findall(r"\(([^)]*)\)", text) if body.strip()]
        return cls.from_cycles(cycles, n)

    @property
    def degree(self) -> int:
        return len(self.images)

    def __call__(self, j: int) -> int:
        return self.images[j]

    def __mul__(self, other: Permutation) -> Permutation:
        return compose(self, other)

    def inverse(self) -> Permutation:
        inv = [0] * self.degree
        for j, pj in enumerate(self.images):
            inv[pj] = j
        return Permutation(tuple(inv))

    def is_identity(self) -> bool:
        return all(j == pj for j, pj in enumerate(self.images))

    def key(self) -> tuple[int, ...]:
        return self.images

    def order(self) -> int:
        out = 1
        for cyc in self.cycles():
            out = math.lcm(out, len(cyc))
        return out

    def cycles(self) -> list[tuple[int, ...]]:
        """Nontrivial cycles, 0-based, each starting at its smallest point."""
        seen = [False] * self.degree
        out = []
        for start in range(self.degree):
            if seen[start]:
                continue
            cyc = [start]
            seen[start] = True
            j = self.images[start]
            while j != start:
                cyc.append(j)
                seen[j] = True
                j = self.images[j]
            if len(cyc) > 1:
                out.append(tuple(cyc))
        return out

    def to_cycle_string(self) -> str:
        cycles = self.cycles()
        if not cycles:
            return "()"
        return "".join("(" + " ".join(str(c + 1) for c in cyc) + ")" for cyc in cycles)

    def matrix(self) -> np.ndarray:
        return permutation_matrix(self)

    def __repr__(self) -> str:
        return f"Permutation({self.to_cycle_string()}, n={self.degree})"


def compose(a: Permutation, b: Permutation) -> Permutation:
    """Return ``a o b``: first apply ``b``, then ``a``."""
    if a.degree != b.degree:
        raise ValueError(f"degree mismatch: {a.degree} vs {b.degree}")
    return Permutation(tuple(a.images[j] for j in b.images))


def permutation_matrix(p: Permutation) -> np.ndarray:
    """``P[i, j] = 1`` iff ``i = p(j)``."""
    n = p.degree
    P = np.zeros((n, n))
    P[list(p.images), list(range(n))] = 1.0
    return P


@dataclass(frozen=True)
class GroupElement:
    """A pair ``(row, col)`` in S_k x S_d."""

    row: Permutation
    col: Permutation

    @classmethod
    def identity(cls, k: int, d: int) -> GroupElement:
        return cls(Permutation.identity(k), Permutation.identity(d))

    @classmethod
    def diagonal(cls, p: Permutation) -> GroupElement:
        return cls(p, p)

    @property
    def degree(self) -> tuple[int, int]:
        return (self.row.degree, self.col.degree)

    def __mul__(self, other: GroupElement) -> GroupElement:
        return GroupElement(compose(self.row, other.row), compose(self.col, other.col))

    def inverse(self) -> GroupElement:
        return GroupElement(self.row.inverse(), self.col.inverse())

    def is_identity(self) -> bool:
        return self.row.is_identity() and self.col.is_identity()

    def key(self) -> tuple[int, ...]:
        return self.row.images + self.col.images

    def order(self) -> int:
        return math.lcm(self.row.order(), self.col.order())

    def to_json(self) -> dict:
        return {"row": list(self.row.images), "col": list(self.col.images)}

    @classmethod
    def from_json(cls, obj: dict) -> GroupElement:
        return cls(Permutation(tuple(obj["row"])), Permutation(tuple(obj["col"])))

    def __repr__(self) -> str:
        return f"({self.row.to_cycle_string()}^r, {self.col.to_cycle_string()}^c)"


def act_on_index(g: GroupElement, cell: tuple[int, int]) -> tuple[int, int]:
    """``(pi, rho)(i, j) = (pi^-1(i), rho^-1(j))``."""
    i, j = cell
    k, d = g.degree
    if not (0 <= i < k and 0 <= j < d):
        raise IndexError(f"cell {cell} outside {k}x{d}")
    return (g.row.inverse()(i), g.col.inverse()(j))


def act_on_matrix(g: GroupElement, W: np.ndarray) -> np.ndarray:
    """Return ``P_pi W P_rho^T``."""
    W = np.asarray(W)
    if W.shape != g.degree:
        raise ValueError(f"shape {W.shape} does not match group degree {g.degree}")
    rinv = np.array(g.row.inverse().images, dtype=int)
    cinv = np.array(g.col.inverse().images, dtype=int)
    return W[np.ix_(rinv, cinv)]


@dataclass(frozen=True)
class SignedPermutation:
    """Signed permutation matrix ``D_signs P_perm``: ``(g x)[i] = signs[i] * x[perm^-1(i)]``."""

    perm: Permutation
    signs: tuple[int, ...]

    def __post_init__(self):
        signs = tuple(int(s) for s in self.signs)
        if len(signs) != self.perm.degree or any(s not in (-1, 1) for s in signs):
            raise ValueError("signs must be +-1, one per coordinate")
        object.__setattr__(self, "signs", signs)

    @property
    def degree(self) -> int:
        return self.perm.degree

    def matrix(self) -> np.ndarray:
        return np.diag(self.signs).astype(float) @ permutation_matrix(self.perm)

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        inv = np.array(self.perm.inverse().images, dtype=int)
        return np.array(self.signs, dtype=float) * x[inv]

    def __mul__(self, other: SignedPermutation) -> SignedPermutation:
        # D1 P1 D2 P2 = D1 (P1 D2 P1^T) P1 P2
        conj = [other.signs[self.perm.inverse()(i)] for i in range(self.degree)]
        return SignedPermutation(compose(self.perm, other.perm),
                                 tuple(a * b for a, b in zip(self.signs, conj)))

    def inverse(self) -> SignedPermutation:
        inv = self.perm.inverse()
        return SignedPermutation(inv, tuple(self.signs[self.perm(i)] for i in range(self.degree)))

    def is_identity(self) -> bool:
        return self.perm.is_identity() and all(s == 1 for s in self.signs)

    def key(self) -> tuple[int, ...]:
        return self.perm.images + self.signs


def hyperoctahedral_group(n: int) -> list[SignedPermutation]:
    """All ``2^n n!`` signed permutations of degree ``n``."""
    return [SignedPermutation(Permutation(p), s)
            for p in itertools.permutations(range(n))
            for s in itertools.product((1, -1), repeat=n)]


@dataclass
class PermGroup:
    """A finite group given by generators.

    ``degree`` is ``(k, d)`` for subgroups of S_k x S_d and ``(n,)`` for
    subgroups of S_n.  ``order`` may be supplied by a search that proves it;
    otherwise it is computed by enumeration.
    """

    degree: tuple[int, ...]
    generators: list = field(default_factory=list)
    _order: int | None = None
    _elements: list | None = None

    def identity(self):
        if len(self.degree) == 2:
            return GroupElement.identity(*self.degree)
        return Permutation.identity(self.degree[0])

    @property
    def order(self) -> int:
        if self._order is None:
            self._order = len(self.elements())
        return self._order

    def elements(self, cap: int | None = None) -> list:
        """Full element list, lexicographic by image arrays."""
        if self._elements is None:
            if cap is None:
                cap = default_cap(self.degree)
            if self._order is not None and self._order > cap:
                raise GroupOrderExceeded(f"group of order {self._order} exceeds cap {cap}")
            self._elements = _enumerate(self.identity(), self.generators, cap)
            if self._order is not None and self._order != len(self._elements):
                raise AssertionError("closure disagrees with recorded order")
            self._order = len(self._elements)
        return self._elements

    def is_enumerated(self) -> bool:
        return self._elements is not None

    def contains(self, g) -> bool:
        return g.key() in {e.key() for e in self.elements()}

    def __len__(self) -> int:
        return self.order

    def __repr__(self) -> str:
        o = self._order if self._order is not None else "?"
        return f"PermGroup(degree={self.degree}, order={o}, ngens={len(self.generators)})"


def default_cap(degree: tuple[int, ...]) -> int:
    """10 d! for subgroups of S_d; for S_k x S_d the full order k! d!, at most 10^7."""
    if len(degree) == 1:
        return 10 * math.factorial(degree[0])
    return min(math.prod(math.factorial(n) for n in degree), 10**7)


def _enumerate(identity, generators: Sequence, cap: int) -> list:
    seen = {identity.key(): identity}
    queue = deque([identity])
    gens = [g for g in generators if not g.is_identity()]
    while queue:
        x = queue.popleft()
        for g in gens:
            y = g * x
            ky = y.key()
            if ky not in seen:
                seen[ky] = y
                if len(seen) > cap:
                    raise GroupOrderExceeded(f"group order exceeds cap {cap}")
                queue.append(y)
    return [seen[key] for key in sorted(seen)]


def closure(generators: Sequence, cap: int | None = None, degree: tuple[int, ...] | None = None) -> PermGroup:
    """Enumerate the group generated by ``generators`` (raises past ``cap`` elements)."""
    generators = list(generators)
    if degree is None:
        if not generators:
            raise ValueError("degree is required for an empty generating set")
        g0 = generators[0]
        degree = g0.degree if isinstance(g0, GroupElement) else (g0.degree,)
    for g in generators:
        gdeg = g.degree if isinstance(g, GroupElement) else (g.degree,)
        if gdeg != tuple(degree):
            raise ValueError(f"generator degree {gdeg} != {degree}")
    G = PermGroup(tuple(degree), generators)
    G.elements(cap if cap is not None else default_cap(tuple(degree)))
    return G


@dataclass(frozen=True)
class OrbitPartition:
    """Disjoint blocks covering ``domain``; blocks sorted, ordered by their first point."""

    domain: tuple
    blocks: tuple[tuple, ...]

    def block_of(self, x) -> tuple:
        for b in self.blocks:
            if x in b:
                return b
        raise KeyError(x)

    def sizes(self) -> list[int]:
        return [len(b) for b in self.blocks]

    def __len__(self) -> int:
        return len(self.blocks)


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if rb < ra:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True

    def groups(self) -> list[tuple]:
        out: dict = {}
        for x in self.parent:
            out.setdefault(self.find(x), []).append(x)
        return sorted(tuple(sorted(v)) for v in out.values())


def _point_maps(G: PermGroup, domain: str):
    """(domain points, list of point maps) for the generator action on ``domain``."""
    if len(G.degree) == 1:
        if domain not in ("points", "rows"):
            raise ValueError(f"domain {domain!r} invalid for a group of degree {G.degree}")
        n = G.degree[0]
        return list(range(n)), [list(g.images) for g in G.generators]
    k, d = G.degree
    if domain == "rows":
        return list(range(k)), [list(g.row.images) for g in G.generators]
    if domain == "cols":
        return list(range(d)), [list(g.col.images) for g in G.generators]
    if domain == "cells":
        pts = [(i, j) for i in range(k) for j in range(d)]
        maps = [{(i, j): (g.row(i), g.col(j)) for (i, j) in pts} for g in G.generators]
        return pts, maps
    raise ValueError(f"unknown domain {domain!r}")


def orbits(G: PermGroup, domain: str = "cells") -> OrbitPartition:
    """G-orbits on ``"cells"`` ([k]x[d]), ``"rows"``, ``"cols"`` or ``"points"``.

    Driven by generators; no enumeration needed.
    """
    pts, maps = _point_maps(G, domain)
    uf = _UnionFind(pts)
    for m in maps:
        for x in pts:
            uf.union(x, m[x])
    return OrbitPartition(tuple(pts), tuple(uf.groups()))


def projections(H: PermGroup) -> tuple[PermGroup, PermGroup]:
    """Row (H1) and column (H2) projections of a subgroup of S_k x S_d."""
    if len(H.degree) != 2:
        raise ValueError("projections need a subgroup of S_k x S_d")
    k, d = H.degree
    rows = _dedupe([g.row for g in H.generators if not g.row.is_identity()])
    cols = _dedupe([g.col for g in H.generators if not g.col.is_identity()])
    H1, H2 = PermGroup((k,), rows), PermGroup((d,), cols)
    if H.is_enumerated():
        H1._elements = sorted({g.row.key(): g.row for g in H.elements()}.values(), key=Permutation.key)
        H2._elements = sorted({g.col.key(): g.col for g in H.elements()}.values(), key=Permutation.key)
        H1._order, H2._order = len(H1._elements), len(H2._elements)
    return H1, H2


def _dedupe(perms):
    seen = {}
    for p in perms:
        seen.setdefault(p.key(), p)
    return list(seen.values())


def is_transitive(G: PermGroup, domain: str = "points") -> bool:
    return len(orbits(G, domain)) == 1


def is_doubly_transitive(G: PermGroup, domain: str = "points") -> bool:
    """Single orbit on ordered pairs of distinct points."""
    pts, maps = _point_maps(G, domain)
    if len(pts) < 2:
        return True
    pairs = [(a, b) for a in pts for b in pts if a != b]
    uf = _UnionFind(pairs)
    for m in maps:
        for a, b in pairs:
            uf.union((a, b), (m[a], m[b]))
    return len(uf.groups()) == 1


def symmetric_group(n: int) -> PermGroup:
    """S_n generated by a transposition and an n-cycle."""
    gens = []
    if n >= 2:
        gens.append(Permutation.from_cycles([(0, 1)], n, one_based=False))
    if n >= 3:
        gens.append(Permutation(tuple(list(range(1, n)) + [0])))
    return PermGroup((n,), gens, _order=math.factorial(n))


def diagonal_group(K: PermGroup) -> PermGroup:
    """Delta K = {(p, p) : p in K} inside S_n x S_n."""
    n = K.degree[0]
    D = PermGroup((n, n), [GroupElement.diagonal(p) for p in K.generators], _order=K._order)
    if K.is_enumerated():
        D._elements = [GroupElement.diagonal(p) for p in K.elements()]
        D._order = len(D._elements)
    return D


def product_group(A: PermGroup, B: PermGroup) -> PermGroup:
    """A x B inside S_k x S_d (rows by A, columns by B)."""
    k, d = A.degree[0], B.degree[0]
    gens = [GroupElement(a, Permutation.identity(d)) for a in A.generators]
    gens += [GroupElement(Permutation.identity(k), b) for b in B.generators]
    return PermGroup((k, d), gens, _order=A.order * B.order)


def block_sum(blocks: Sequence[PermGroup]) -> PermGroup:
    """Direct product of permutation groups acting on consecutive blocks of points."""
    n = sum(B.degree[0] for B in blocks)
    gens, off, order = [], 0, 1
    for B in blocks:
        m = B.degree[0]
        for g in B.generators:
            images = list(range(n))
            for j in range(m):
                images[off + j] = off + g(j)
            gens.append(Permutation(tuple(images)))
        order *= B.order
        off += m
    return PermGroup((n,), gens, _order=order)


def wreath_generators(m: int, n: int) -> list[Permutation]:
    """Generators of S_m wr S_n on ``m*n`` points: n blocks of size m, block b = {b*m, ..., b*m+m-1}."""
    d = m * n
    gens = []
    for g in symmetric_group(m).generators:
        images = list(range(d))
        for j in range(m):
            images[j] = g(j)
        gens.append(Permutation(tuple(images)))
    for h in symmetric_group(n).generators:
        images = [h(j // m) * m + j % m for j in range(d)]
        gens.append(Permutation(tuple(images)))
    return gens


@dataclass(frozen=True)
class ConjugacyVerdict:
    status: str  # "yes" | "no" | "unknown"
    witness: GroupElement | None = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.status == "yes"


def _invariants(H: PermGroup) -> tuple:
    H1, H2 = projections(H)
    return (
        H.order,
        tuple(sorted(orbits(H1, "points").sizes())),
        tuple(sorted(orbits(H2, "points").sizes())),
        tuple(sorted(orbits(H, "cells").sizes())),
        tuple(sorted(Counter(g.order() for g in H.elements()).items())),
    )


def are_conjugate(H: PermGroup, K: PermGroup, search_bound: int = 6, cap: int | None = None) -> ConjugacyVerdict:
    """Decide whether g H g^-1 = K for some g in S_k x S_d.

    Necessary invariants are compared first.  If they agree and both degrees
    are at most ``search_bound``, conjugators are searched exhaustively,
    rows and columns filtered separately through the projections.
    """
    if H.degree != K.degree:
        return ConjugacyVerdict("no", reason="degree mismatch")
    k, d = H.degree
    if {g.key() for g in H.elements(cap)} == {g.key() for g in K.elements(cap)}:
        return ConjugacyVerdict("yes", GroupElement.identity(k, d), "equal")
    if _invariants(H) != _invariants(K):
        return ConjugacyVerdict("no", reason="invariants differ")
    if max(k, d) > search_bound:
        return ConjugacyVerdict("unknown", reason="degree above search bound")
    H1, H2 = projections(H)
    K1, K2 = projections(K)
    target = {g.key() for g in K.elements()}

    def candidates(A: PermGroup, B: PermGroup, n: int):
        want = {p.key() for p in B.elements()}
        for images in itertools.permutations(range(n)):
            a = Permutation(images)
            ainv = a.inverse()
            if {(a * p * ainv).key() for p in A.elements()} == want:
                yield a

    col_cands = list(candidates(H2, K2, d))
    for a in candidates(H1, K1, k):
        for b in col_cands:
            g = GroupElement(a, b)
            ginv = g.inverse()
            if all((g * h * ginv).key() in target for h in H.generators):
                return ConjugacyVerdict("yes", g, "search")
    return ConjugacyVerdict("no", reason="exhaustive search")
