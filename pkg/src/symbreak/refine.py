"""Individualization-refinement search for automorphism groups of label matrices.

Two structures are supported:

* :class:`BipartiteStructure` -- rows and columns permuted independently
  (the S_k x S_d action), vertices ``0..k-1`` are rows, ``k..k+d-1`` columns.
* :class:`DiagonalStructure` -- one permutation applied to rows and columns
  simultaneously (the diagonal action of S_d on a square matrix).

The search walks the leftmost path of the search tree and, level by level
from the bottom, determines the orbit of the individualized vertex under the
pointwise stabilizer of the prefix.  The group order is the product of those
orbit sizes; the automorphisms found along the way generate the group.
"""
from __future__ import annotations

import numpy as np

__all__ = ["SearchBudgetExceeded", "BipartiteStructure", "DiagonalStructure", "automorphism_group"]


class SearchBudgetExceeded(RuntimeError):
    """The node budget ran out before the search finished."""


def _rank_rows(keys: np.ndarray) -> np.ndarray:
    _, inv = np.unique(keys, axis=0, return_inverse=True)
    return inv.reshape(-1).astype(np.int64)


class BipartiteStructure:
    def __init__(self, labels: np.ndarray):
        self.L = np.asarray(labels, dtype=np.int64)
        self.k, self.d = self.L.shape
        self.n = self.k + self.d

    def initial(self) -> np.ndarray:
        return np.concatenate([np.zeros(self.k, np.int64), np.ones(self.d, np.int64)])

    def refine(self, c: np.ndarray) -> np.ndarray:
        k, L = self.k, self.L
        ncolors = len(np.unique(c))
        while True:
            base = int(c.max()) + 1
            rc, cc = c[:k], c[k:]
            row_keys = np.hstack([rc[:, None], np.sort(L * base + cc[None, :], axis=1)])
            col_keys = np.hstack([cc[:, None], np.sort(L.T * base + rc[None, :], axis=1)])
            new_r = _rank_rows(row_keys)
            new_c = _rank_rows(col_keys) + (new_r.max() + 1 if k else 0)
            c = np.concatenate([new_r, new_c])
            m = len(np.unique(c))
            if m == ncolors:
                return c
            ncolors = m

    def is_automorphism(self, perm: np.ndarray) -> bool:
        rows, cols = perm[:self.k], perm[self.k:] - self.k
        if rows.min(initial=0) < 0 or (self.d and cols.min() < 0) or (rows >= self.k).any():
            return False
        return bool(np.array_equal(self.L[np.ix_(rows, cols)], self.L))


class DiagonalStructure:
    def __init__(self, labels: np.ndarray):
        self.L = np.asarray(labels, dtype=np.int64)
        if self.L.shape[0] != self.L.shape[1]:
            raise ValueError("diagonal action needs a square matrix")
        self.n = self.L.shape[0]

    def initial(self) -> np.ndarray:
        return _rank_rows(np.diag(self.L)[:, None])

    def refine(self, c: np.ndarray) -> np.ndarray:
        L = self.L
        ncolors = len(np.unique(c))
        while True:
            base = int(c.max()) + 1
            keys = np.hstack([c[:, None], np.diag(L)[:, None],
                              np.sort(L * base + c[None, :], axis=1),
                              np.sort(L.T * base + c[None, :], axis=1)])
            c = _rank_rows(keys)
            m = len(np.unique(c))
            if m == ncolors:
                return c
            ncolors = m

    def is_automorphism(self, perm: np.ndarray) -> bool:
        return bool(np.array_equal(self.L[np.ix_(perm, perm)], self.L))


def _individualize(c: np.ndarray, v: int) -> np.ndarray:
    out = 2 * c + 1
    out[v] = 2 * c[v]
    return _rank_rows(out[:, None])


def _target_cell(c: np.ndarray) -> np.ndarray | None:
    counts = np.bincount(c)
    big = np.flatnonzero(counts > 1)
    if big.size == 0:
        return None
    return np.flatnonzero(c == big[0])


class _Counter:
    def __init__(self, budget: int):
        self.budget = budget
        self.nodes = 0

    def tick(self):
        self.nodes += 1
        if self.nodes > self.budget:
            raise SearchBudgetExceeded(f"search exceeded {self.budget} nodes")


def _orbit(v: int, gens: list[np.ndarray]) -> set[int]:
    orb, stack = {v}, [v]
    while stack:
        x = stack.pop()
        for g in gens:
            y = int(g[x])
            if y not in orb:
                orb.add(y)
                stack.append(y)
    return orb


def automorphism_group(struct, budget: int = 10**6) -> tuple[list[np.ndarray], int, int]:
    """Return ``(generators, order, nodes)``; generators are vertex maps as int arrays."""
    counter = _Counter(budget)
    c = struct.refine(struct.initial())
    counter.tick()
    path = []  # (coloring, target cell)
    while True:
        cell = _target_cell(c)
        if cell is None:
            break
        path.append((c, cell))
        c = struct.refine(_individualize(c, int(cell[0])))
        counter.tick()
    leaf = c

    def leaf_map(other_leaf: np.ndarray) -> np.ndarray:
        inv = np.empty_like(other_leaf)
        inv[other_leaf] = np.arange(len(other_leaf))
        return inv[leaf]

    def compatible(c1: np.ndarray, c2: np.ndarray) -> bool:
        return np.array_equal(np.bincount(c1, minlength=struct.n), np.bincount(c2, minlength=struct.n))

    def descend(cw: np.ndarray, depth: int) -> np.ndarray | None:
        ref = path[depth][0] if depth < len(path) else leaf
        if not compatible(cw, ref):
            return None
        if depth == len(path):
            perm = leaf_map(cw)
            return perm if struct.is_automorphism(perm) else None
        cell = _target_cell(cw)
        if cell is None or not np.array_equal(np.unique(cw[cell]), np.unique(ref[path[depth][1]])):
            return None
        for x in cell:
            counter.tick()
            found = descend(struct.refine(_individualize(cw, int(x))), depth + 1)
            if found is not None:
                return found
        return None

    gens: list[np.ndarray] = []
    order = 1
    for level in range(len(path) - 1, -1, -1):
        cl, cell = path[level]
        v = int(cell[0])
        orb = _orbit(v, gens)
        for w in cell[1:]:
            w = int(w)
            if w in orb:
                continue
            counter.tick()
            found = descend(struct.refine(_individualize(cl, w)), level + 1)
            if found is not None:
                gens.append(found)
                orb = _orbit(v, gens)
        order *= len(orb)
    return gens, order, counter.nodes
