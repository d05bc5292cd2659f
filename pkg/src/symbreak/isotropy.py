"""Equality patterns of weight matrices, their isotropy groups and catalog classification.

A real matrix is first reduced to a :class:`PatternMatrix` by single-linkage
clustering of its entries.  Everything downstream is exact combinatorics on
the integer labels.
"""
from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .perm_core import (
    GroupElement,
    OrbitPartition,
    PermGroup,
    Permutation,
    act_on_matrix,
    block_sum,
    diagonal_group,
    orbits,
    projections,
    symmetric_group,
    wreath_generators,
)
from .refine import BipartiteStructure, DiagonalStructure, SearchBudgetExceeded, automorphism_group

__all__ = [
    "PatternMatrix",
    "quantize",
    "isotropy_group",
    "diagonal_isotropy_group",
    "brute_force_isotropy",
    "RectanglePartition",
    "rectangle_partition",
    "BalanceReport",
    "check_row_col_balance",
    "DiagonalTypeVerdict",
    "check_diagonal_type",
    "fixed_subspace_basis",
    "fixed_subspace_dim",
    "fixed_subspace_dim_linear",
    "SubgroupDescriptor",
    "catalog_maximal_diagonal",
    "IsotropyReport",
    "classify",
    "SearchBudgetExceeded",
]

DEFAULT_BUDGET = 10**6


@dataclass(frozen=True)
class PatternMatrix:
    """Integer equality pattern; labels are numbered by first appearance in row-major order."""

    labels: np.ndarray
    class_values: np.ndarray
    tol: float = 0.0
    warnings: tuple[str, ...] = ()

    @classmethod
    def from_labels(cls, labels, values=None) -> PatternMatrix:
        """Build a pattern from arbitrary hashable symbols, e.g. ``[["a", "b"], ["b", "a"]]``."""
        arr = np.asarray(labels, dtype=object)
        mapping: dict = {}
        out = np.empty(arr.shape, dtype=np.int64)
        for idx, sym in np.ndenumerate(arr):
            out[idx] = mapping.setdefault(sym, len(mapping))
        if values is None:
            values = np.arange(len(mapping), dtype=float)
        return cls(out, np.asarray(values, dtype=float))

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    @property
    def num_classes(self) -> int:
        return len(self.class_values)

    def value_ranks(self) -> np.ndarray:
        """Rank of each class by its representative value (0 = smallest)."""
        ranks = np.empty(self.num_classes, dtype=np.int64)
        ranks[np.argsort(self.class_values, kind="stable")] = np.arange(self.num_classes)
        return ranks

    def permuted(self, row_order, col_order) -> PatternMatrix:
        """Pattern of ``W[np.ix_(row_order, col_order)]`` (labels re-canonicalized)."""
        sub = self.labels[np.ix_(np.asarray(row_order), np.asarray(col_order))]
        p = PatternMatrix.from_labels(sub)
        first = {}
        for old, new in zip(sub.ravel(), p.labels.ravel()):
            first.setdefault(int(new), int(old))
        vals = np.array([self.class_values[first[i]] for i in range(p.num_classes)])
        return PatternMatrix(p.labels, vals, self.tol)


def quantize(W, tol: float) -> PatternMatrix:
    """Cluster entries of ``W`` whose sorted neighbours differ by at most ``tol``."""
    W = np.asarray(W, dtype=float)
    if W.ndim != 2:
        raise ValueError("expected a matrix")
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    if not np.isfinite(W).all():
        raise ValueError("matrix has non-finite entries")
    flat = W.ravel()
    order = np.argsort(flat, kind="stable")
    srt = flat[order]
    cluster = np.concatenate([[0], np.cumsum(np.diff(srt) > tol)]) if flat.size else np.zeros(0, int)
    raw = np.empty(flat.size, dtype=np.int64)
    raw[order] = cluster
    _, first_idx, inv = np.unique(raw, return_index=True, return_inverse=True)
    # relabel clusters by first row-major appearance
    rank = np.empty(len(first_idx), dtype=np.int64)
    rank[np.argsort(first_idx)] = np.arange(len(first_idx))
    labels = rank[inv.reshape(-1)]
    m = len(first_idx)
    values = np.array([flat[labels == c].mean() for c in range(m)])
    warnings = []
    if tol > 0:
        for c in range(m):
            members = flat[labels == c]
            spread = members.max() - members.min()
            if spread > 3 * tol:
                warnings.append(f"class {c} spans {spread:.3g} > 3*tol (chaining)")
    return PatternMatrix(labels.reshape(W.shape), values, float(tol), tuple(warnings))


def _as_pattern(pattern) -> PatternMatrix:
    if isinstance(pattern, PatternMatrix):
        return pattern
    return PatternMatrix.from_labels(pattern)


def isotropy_group(pattern, budget: int = DEFAULT_BUDGET) -> PermGroup:
    """Gamma_W = {(pi, rho) : P_pi W P_rho^T = W} as generators plus proven order.

    Raises :class:`SearchBudgetExceeded` rather than returning a partial group.
    """
    pattern = _as_pattern(pattern)
    k, d = pattern.shape
    gens, order, _ = automorphism_group(BipartiteStructure(pattern.labels), budget)
    elems = [GroupElement(Permutation(tuple(g[:k])), Permutation(tuple(int(x) - k for x in g[k:]))) for g in gens]
    return PermGroup((k, d), elems, _order=order)


def diagonal_isotropy_group(pattern, budget: int = DEFAULT_BUDGET) -> PermGroup:
    """Gamma_W intersected with Delta S_d, returned as a subgroup of S_d x S_d."""
    pattern = _as_pattern(pattern)
    gens, order, _ = automorphism_group(DiagonalStructure(pattern.labels), budget)
    K = PermGroup((pattern.shape[0],), [Permutation(tuple(g)) for g in gens], _order=order)
    return diagonal_group(K)


def brute_force_isotropy(pattern, max_degree: int = 5) -> PermGroup:
    """Filter every element of S_k x S_d by the fixing condition (test oracle)."""
    pattern = _as_pattern(pattern)
    L = pattern.labels
    k, d = L.shape
    if max(k, d) > max_degree:
        raise ValueError(f"brute force limited to degree {max_degree}")
    col_perms = np.array(list(itertools.permutations(range(d))), dtype=int)
    col_inv = np.argsort(col_perms, axis=1)
    found = []
    for rp in itertools.permutations(range(k)):
        rinv = np.argsort(rp)
        Lr = L[rinv]  # rows of P_pi W
        ok = (Lr[:, col_inv] == L[:, None, :]).all(axis=(0, 2))
        for idx in np.flatnonzero(ok):
            found.append(GroupElement(Permutation(rp), Permutation(tuple(col_perms[idx]))))
    found.sort(key=GroupElement.key)
    return PermGroup((k, d), found, _order=len(found), _elements=found)


# --------------------------------------------------------------------------- rectangles


@dataclass(frozen=True)
class RectanglePartition:
    """Row blocks P, column blocks Q and the H-orbits of cells inside each rectangle.

    Blocks are in original indices.  ``row_order``/``col_order`` list the
    original indices in normalized order, so that the blocks become
    contiguous intervals.
    """

    row_blocks: tuple[tuple[int, ...], ...]
    col_blocks: tuple[tuple[int, ...], ...]
    row_order: tuple[int, ...]
    col_order: tuple[int, ...]
    cell_orbits: dict

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.row_blocks), len(self.col_blocks))

    def rectangles(self):
        for a, P in enumerate(self.row_blocks):
            for b, Q in enumerate(self.col_blocks):
                yield (a, b), P, Q, self.cell_orbits[(a, b)]


def _block_order(blocks) -> tuple[int, ...]:
    return tuple(i for b in blocks for i in b)


def rectangle_partition(H: PermGroup) -> RectanglePartition:
    H1, H2 = projections(H)
    P = orbits(H1, "points").blocks
    Q = orbits(H2, "points").blocks
    row_block = {i: a for a, blk in enumerate(P) for i in blk}
    col_block = {j: b for b, blk in enumerate(Q) for j in blk}
    cells: dict = {(a, b): [] for a in range(len(P)) for b in range(len(Q))}
    for orb in orbits(H, "cells").blocks:
        i, j = orb[0]
        cells[(row_block[i], col_block[j])].append(orb)
    return RectanglePartition(P, Q, _block_order(P), _block_order(Q),
                              {key: tuple(v) for key, v in cells.items()})


@dataclass
class BalanceReport:
    ok: bool
    violations: list = field(default_factory=list)


def check_row_col_balance(rp: RectanglePartition, W, rtol: float = 1e-12) -> BalanceReport:
    """Each cell orbit meets every row/column of its rectangle equally often, so
    row sums (and column sums) of each submatrix coincide."""
    W = np.asarray(W, dtype=float)
    report = BalanceReport(True)
    for key, P, Q, orbs in rp.rectangles():
        for orb in orbs:
            rows = np.bincount([i for i, _ in orb], minlength=W.shape[0])[list(P)]
            cols = np.bincount([j for _, j in orb], minlength=W.shape[1])[list(Q)]
            if len(set(rows)) > 1 or len(set(cols)) > 1:
                report.ok = False
                report.violations.append({"rectangle": key, "kind": "orbit-count", "orbit": orb[:4]})
        sub = W[np.ix_(P, Q)]
        scale = max(1.0, float(np.abs(sub).sum(axis=1).max(initial=0)), float(np.abs(sub).sum(axis=0).max(initial=0)))
        for axis, kind in ((1, "row-sum"), (0, "col-sum")):
            sums = sub.sum(axis=axis)
            if sums.size and sums.max() - sums.min() > rtol * scale:
                report.ok = False
                report.violations.append({"rectangle": key, "kind": kind,
                                          "spread": float(sums.max() - sums.min())})
    return report


# --------------------------------------------------------------------------- diagonal type


@dataclass
class DiagonalTypeVerdict:
    constant_diagonal: bool
    transitive_diagonal_subgroup: bool
    single_rectangle: bool
    conjugate_to_transitive_diagonal: bool
    normalizing_col_order: tuple[int, ...] | None
    transitive_group_order: int | None
    is_delta_sd: bool

    @property
    def diagonal_constraint_holds(self) -> bool:
        """A transitive diagonal subgroup in the isotropy forces a constant diagonal."""
        return self.constant_diagonal or not self.transitive_diagonal_subgroup


def check_diagonal_type(pattern, budget: int = DEFAULT_BUDGET) -> DiagonalTypeVerdict:
    pattern = _as_pattern(pattern)
    L = pattern.labels
    d = L.shape[0]
    if L.shape != (d, d):
        raise ValueError("square pattern required")
    diag = np.diag(L)
    constant_diag = bool((diag == diag[0]).all())
    D = diagonal_isotropy_group(pattern, budget)
    transitive = len(orbits(projections(D)[0], "points")) == 1
    G = isotropy_group(pattern, budget)
    rp = rectangle_partition(G)
    single = rp.shape == (1, 1)
    col_order, kord = None, None
    if single:
        for orb in rp.cell_orbits[(0, 0)]:
            if len(orb) == d:
                sigma = [0] * d
                for i, j in orb:
                    sigma[i] = j
                col_order = tuple(sigma)
                kord = G.order
                break
    off = L[~np.eye(d, dtype=bool)]
    is_dsd = constant_diag and d > 1 and bool((off == off[0]).all()) and off[0] != diag[0]
    return DiagonalTypeVerdict(constant_diag, transitive, single, col_order is not None,
                               col_order, kord, is_dsd)


# --------------------------------------------------------------------------- fixed subspaces


def fixed_subspace_basis(H: PermGroup) -> list[np.ndarray]:
    """0/1 indicator matrices of the H-orbits on cells; a basis of M(k,d)^H."""
    k, d = H.degree
    basis = []
    for orb in orbits(H, "cells").blocks:
        B = np.zeros((k, d))
        for i, j in orb:
            B[i, j] = 1.0
        basis.append(B)
    return basis


def fixed_subspace_dim(H: PermGroup) -> int:
    return len(orbits(H, "cells"))


def _action_matrix(g: GroupElement) -> np.ndarray:
    k, d = g.degree
    R = np.zeros((k * d, k * d))
    for idx in range(k * d):
        E = np.zeros(k * d)
        E[idx] = 1.0
        R[:, idx] = act_on_matrix(g, E.reshape(k, d)).ravel()
    return R


def fixed_subspace_dim_linear(H: PermGroup, method: str = "generators") -> int:
    """Dimension of M(k,d)^H from linear algebra, independent of orbit counting.

    ``"generators"``: nullity of the stacked system (R(g) - I) vec(W) = 0.
    ``"projector"``: rank of the group average of R(h) (needs enumeration).
    """
    k, d = H.degree
    n = k * d
    if method == "generators":
        if not H.generators:
            return n
        A = np.vstack([_action_matrix(g) - np.eye(n) for g in H.generators])
        return n - int(np.linalg.matrix_rank(A))
    if method == "projector":
        P = sum(_action_matrix(h) for h in H.elements()) / H.order
        return int(np.linalg.matrix_rank(P))
    raise ValueError(method)


# --------------------------------------------------------------------------- catalog


@dataclass(frozen=True)
class SubgroupDescriptor:
    """A named subgroup type ``Delta K`` of S_d x S_d.

    kinds: ``DeltaS`` (d,), ``DeltaProduct`` (p, q), ``DeltaWreath`` (m, n) with
    n blocks of size m, ``Product`` (block sizes of a Young subgroup, K =
    S_a x S_b x ...), ``Other`` (order,).
    """

    kind: str
    params: tuple[int, ...]
    d: int

    def __post_init__(self):
        if self.kind == "DeltaProduct":
            p, q = self.params
            if p + q != self.d:
                raise ValueError("DeltaProduct needs p + q = d")
        elif self.kind == "DeltaWreath":
            m, n = self.params
            if m * n != self.d or m < 2 or n < 2:
                raise ValueError("DeltaWreath needs m*n = d with m, n > 1")

    @property
    def name(self) -> str:
        if self.kind == "DeltaS":
            return f"ΔS_{self.d}"
        if self.kind == "DeltaProduct":
            return f"ΔS_{self.params[0]} × ΔS_{self.params[1]}"
        if self.kind == "DeltaWreath":
            return f"Δ(S_{self.params[0]} ≀ S_{self.params[1]})"
        if self.kind == "Product":
            if all(s == 1 for s in self.params):
                return "trivial"
            return " × ".join(f"ΔS_{s}" for s in self.params)
        return f"ΔK(order={self.params[0]})"

    @property
    def order(self) -> int:
        f = math.factorial
        if self.kind == "DeltaS":
            return f(self.d)
        if self.kind in ("DeltaProduct", "Product"):
            return math.prod(f(s) for s in self.params)
        if self.kind == "DeltaWreath":
            m, n = self.params
            return f(m) ** n * f(n)
        return self.params[0]

    def block_sizes(self) -> tuple[int, ...]:
        if self.kind == "DeltaS":
            return (self.d,)
        if self.kind in ("DeltaProduct", "Product"):
            return tuple(s for s in self.params if s > 0)
        raise ValueError(f"{self.kind} has no block sizes")

    def row_group(self) -> PermGroup:
        """K in standard position (blocks contiguous, largest first)."""
        if self.kind == "DeltaWreath":
            m, n = self.params
            return PermGroup((self.d,), wreath_generators(m, n), _order=self.order)
        if self.kind == "Other":
            raise ValueError("no standard form for an unrecognised group")
        return block_sum([symmetric_group(s) for s in self.block_sizes()])

    def group(self) -> PermGroup:
        return diagonal_group(self.row_group())

    def template(self) -> np.ndarray:
        """Orbit labels of the group on cells (the block schematic)."""
        d = self.d
        T = np.empty((d, d), dtype=np.int64)
        for lab, orb in enumerate(orbits(self.group(), "cells").blocks):
            for i, j in orb:
                T[i, j] = lab
        return PatternMatrix.from_labels(T).labels

    @property
    def fixed_dim(self) -> int:
        return fixed_subspace_dim(self.group())

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": list(self.params), "d": self.d,
                "name": self.name, "order": self.order}


def catalog_maximal_diagonal(d: int) -> list[SubgroupDescriptor]:
    """Intransitive Delta S_{p,q} (0 <= q < d/2) and imprimitive Delta(S_m wr S_n), m*n = d."""
    if d < 2:
        raise ValueError("d >= 2 required")
    out = [SubgroupDescriptor("DeltaS", (d,), d)]
    out += [SubgroupDescriptor("DeltaProduct", (d - q, q), d) for q in range(1, (d + 1) // 2)]
    out += [SubgroupDescriptor("DeltaWreath", (m, d // m), d) for m in range(2, d // 2 + 1) if d % m == 0]
    return out


# --------------------------------------------------------------------------- classification


def _intertwiner(H: PermGroup, budget: int = 10**5) -> list[int] | None:
    """A bijection sigma: rows -> cols with sigma o pi = rho o sigma for all generators
    (pi, rho) of H, or None.  It exists iff H is conjugate to a diagonal group."""
    k, d = H.degree
    if k != d:
        return None
    gens = [(g.row.images, g.col.images) for g in H.generators]
    H1, H2 = projections(H)
    row_orbs = orbits(H1, "points").blocks
    col_orbs = orbits(H2, "points").blocks
    steps = [0]

    def extend(a: int, c: int) -> dict | None:
        sig = {a: c}
        stack = [a]
        while stack:
            x = stack.pop()
            for pi, rho in gens:
                y, want = pi[x], rho[sig[x]]
                if y in sig:
                    if sig[y] != want:
                        return None
                else:
                    sig[y] = want
                    stack.append(y)
        return sig

    def solve(idx: int, used: frozenset, acc: dict) -> dict | None:
        if idx == len(row_orbs):
            return acc
        orb = row_orbs[idx]
        for q, cands in enumerate(col_orbs):
            if q in used or len(cands) != len(orb):
                continue
            for c in cands:
                steps[0] += 1
                if steps[0] > budget:
                    raise SearchBudgetExceeded("intertwiner search budget exceeded")
                sig = extend(orb[0], c)
                if sig is not None:
                    res = solve(idx + 1, used | {q}, {**acc, **sig})
                    if res is not None:
                        return res
        return None

    sol = solve(0, frozenset(), {})
    return None if sol is None else [sol[i] for i in range(d)]


def _minimal_block(K: PermGroup, a: int, b: int) -> tuple[int, ...]:
    n = K.degree[0]
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    pairs = [(a, b)]
    parent[find(b)] = find(a)
    while pairs:
        x, y = pairs.pop()
        for g in K.generators:
            gx, gy = find(g(x)), find(g(y))
            if gx != gy:
                parent[gy] = gx
                pairs.append((g(x), g(y)))
    root = find(a)
    return tuple(i for i in range(n) if find(i) == root)


def _identify(K: PermGroup) -> tuple[SubgroupDescriptor, list[int]]:
    """Descriptor of K <= S_d (order must be known) and the point order putting it in standard form."""
    d = K.degree[0]
    f = math.factorial
    orbs = sorted(orbits(K, "points").blocks, key=lambda b: (-len(b), b[0]))
    if len(orbs) == 1:
        if K.order == f(d):
            return SubgroupDescriptor("DeltaS", (d,), d), list(range(d))
        for b in range(1, d):
            blk = _minimal_block(K, 0, b)
            m = len(blk)
            if 1 < m < d:
                n = d // m
                if K.order == f(m) ** n * f(n):
                    blocks = _block_system(K, blk)
                    return SubgroupDescriptor("DeltaWreath", (m, n), d), [i for bl in blocks for i in bl]
        return SubgroupDescriptor("Other", (K.order,), d), list(range(d))
    sizes = tuple(len(b) for b in orbs)
    order = [i for b in orbs for i in b]
    if K.order == math.prod(f(s) for s in sizes):
        if len(sizes) == 2 and sizes[0] != sizes[1]:
            return SubgroupDescriptor("DeltaProduct", sizes, d), order
        return SubgroupDescriptor("Product", sizes, d), order
    return SubgroupDescriptor("Other", (K.order,), d), order


def _block_system(K: PermGroup, blk: tuple[int, ...]) -> list[tuple[int, ...]]:
    """Images of the block ``blk`` under K, sorted by smallest point."""
    seen, frontier = {blk}, [blk]
    while frontier:
        b = frontier.pop()
        for g in K.generators:
            nb = tuple(sorted(g(y) for y in b))
            if nb not in seen:
                seen.add(nb)
                frontier.append(nb)
    return sorted(seen)


@dataclass
class IsotropyReport:
    matrix_sha256: str
    shape: tuple[int, int]
    tol: float
    labels: np.ndarray
    class_values: np.ndarray
    warnings: tuple[str, ...]
    isotropy_order: int | None
    generators: list
    fixed_subspace_dim: int | None
    diagonal_type: bool
    structure: SubgroupDescriptor | None
    catalog_match: SubgroupDescriptor | None
    row_order: tuple[int, ...] | None
    col_order: tuple[int, ...] | None
    extra_rows: tuple = ()
    status: str = "ok"

    @property
    def match_name(self) -> str:
        return self.catalog_match.name if self.catalog_match else "unclassified"

    @property
    def structure_name(self) -> str:
        return self.structure.name if self.structure else "unclassified"

    def to_json(self) -> dict:
        """Stable field order."""
        return {
            "matrix_sha256": self.matrix_sha256,
            "shape": list(self.shape),
            "tol": self.tol,
            "num_classes": int(len(self.class_values)),
            "pattern": self.labels.tolist(),
            "class_values": [float(v) for v in self.class_values],
            "warnings": list(self.warnings),
            "isotropy_order": self.isotropy_order,
            "generators": [g.to_json() for g in self.generators],
            "fixed_subspace_dim": self.fixed_subspace_dim,
            "diagonal_type": self.diagonal_type,
            "structure": self.structure.to_json() if self.structure else None,
            "catalog_match": self.catalog_match.to_json() if self.catalog_match else "unclassified",
            "row_order": list(self.row_order) if self.row_order is not None else None,
            "col_order": list(self.col_order) if self.col_order is not None else None,
            "extra_rows": [dict(r) for r in self.extra_rows],
            "status": self.status,
        }


def matrix_hash(W: np.ndarray) -> str:
    W = np.ascontiguousarray(np.asarray(W, dtype=np.float64))
    h = hashlib.sha256(repr(W.shape).encode())
    h.update(W.tobytes())
    return h.hexdigest()


def _drop_extra_rows(L: np.ndarray) -> tuple[list[int], list[dict]] | None:
    """Choose k - d rows to set aside, each a duplicate of a kept row or all-constant."""
    k, d = L.shape
    extra = k - d
    if extra > 2:
        return None
    rows = [tuple(r) for r in L]
    removable = []
    for i in range(k):
        if rows[i] in rows[:i]:
            removable.append((i, {"row": i, "kind": "duplicate", "of": rows.index(rows[i])}))
    for i in range(k):
        if len(set(rows[i])) == 1 and all(i != r for r, _ in removable):
            removable.append((i, {"row": i, "kind": "constant"}))
    if len(removable) < extra:
        return None
    drop = removable[:extra]
    keep = [i for i in range(k) if i not in {r for r, _ in drop}]
    return keep, [info for _, info in drop]


def classify(W, tol: float = 0.05, catalog: list[SubgroupDescriptor] | None = None,
             budget: int = DEFAULT_BUDGET) -> IsotropyReport:
    """Quantize ``W``, compute Gamma_W and match it against catalog templates.

    A match means Gamma_W is conjugate to exactly the catalog group: Gamma_W is
    of diagonal type, its row group has the catalog group's order and
    structure, and the normalized pattern is constant on every template class.
    """
    W = np.asarray(W, dtype=float)
    pattern = quantize(W, tol)
    k, d = W.shape
    report = IsotropyReport(matrix_hash(W), (k, d), float(tol), pattern.labels, pattern.class_values,
                            pattern.warnings, None, [], None, False, None, None, None, None)
    try:
        G = isotropy_group(pattern, budget)
    except SearchBudgetExceeded:
        report.status = "budget-exceeded"
        return report
    report.isotropy_order = G.order
    report.generators = G.generators
    report.fixed_subspace_dim = fixed_subspace_dim(G)

    sub_pattern, row_ids = pattern, list(range(k))
    if k > d:
        dropped = _drop_extra_rows(pattern.labels)
        if dropped is None:
            return report
        row_ids, report.extra_rows = dropped
        sub_pattern = pattern.permuted(row_ids, list(range(d)))
        G = isotropy_group(sub_pattern, budget)
    elif k < d:
        return report

    try:
        sigma = _intertwiner(G)
    except SearchBudgetExceeded:
        report.status = "budget-exceeded"
        return report
    if sigma is None:
        return report
    report.diagonal_type = True
    K = projections(G)[0]
    K._order = G.order
    desc, tau = _identify(K)
    report.structure = desc
    report.row_order = tuple(row_ids[t] for t in tau)
    report.col_order = tuple(sigma[t] for t in tau)
    if desc.kind == "Other":
        return report
    norm = pattern.labels[np.ix_(report.row_order, report.col_order)]
    T = desc.template()
    consistent = all(len(np.unique(norm[T == c])) == 1 for c in range(T.max() + 1))
    if not consistent:
        raise AssertionError("normalized pattern does not fit its own template")
    if catalog is None:
        catalog = catalog_maximal_diagonal(d) if d >= 2 else []
    if any(desc == c for c in catalog):
        report.catalog_match = desc
    return report
