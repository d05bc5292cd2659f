import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symbreak.isotropy import (
    PatternMatrix,
    SearchBudgetExceeded,
    SubgroupDescriptor,
    brute_force_isotropy,
    catalog_maximal_diagonal,
    check_diagonal_type,
    check_row_col_balance,
    classify,
    fixed_subspace_basis,
    fixed_subspace_dim,
    fixed_subspace_dim_linear,
    isotropy_group,
    quantize,
    rectangle_partition,
)
from symbreak.perm_core import (
    GroupElement,
    PermGroup,
    Permutation,
    act_on_matrix,
    are_conjugate,
    block_sum,
    closure,
    diagonal_group,
    orbits,
    symmetric_group,
)

from .reference_examples import CIRCULANT, PRODUCT_EXAMPLES, SPURIOUS_PATTERN, WREATH_6


def pat(rows):
    return PatternMatrix.from_labels([list(r) for r in rows])


def group_keys(G):
    return {g.key() for g in G.elements()}


def generated_keys(G):
    return group_keys(closure(G.generators, degree=G.degree))


# ----------------------------------------------------------------- quantize


def test_quantize_identity():
    p = quantize(np.eye(3), 1e-6)
    assert p.num_classes == 2
    assert np.array_equal(p.labels, 1 - np.eye(3, dtype=int))


def test_quantize_gap_rule():
    p = quantize(np.array([[0.0, 0.004, 0.1]]), 0.01)
    assert p.labels.tolist() == [[0, 0, 1]]


def test_quantize_chaining_warning():
    p = quantize(np.array([[0.0, 0.01, 0.02, 0.03, 0.04]]), 0.011)
    assert p.num_classes == 1 and p.warnings


def test_quantize_spurious_matrix():
    W = np.array(SPURIOUS_PATTERN["values"])
    p = quantize(W, 1e-6)
    assert p.num_classes == 5
    assert np.array_equal(p.labels, pat(SPURIOUS_PATTERN["symbols"]).labels)


@settings(max_examples=50)
@given(st.integers(0, 10**6))
def test_quantize_monotone_relabel_stable(seed):
    rng = np.random.default_rng(seed)
    vals = np.sort(rng.choice(20, size=5, replace=False)).astype(float)
    W = vals[rng.integers(0, 5, size=(4, 5))]
    p = quantize(W, 0.5)
    q = quantize(np.exp(W / 3.0) * 7 - 2, 1e-9)
    assert np.array_equal(p.labels, q.labels)


# ----------------------------------------------------------------- isotropy group


def test_isotropy_identity_and_constant():
    assert isotropy_group(quantize(np.eye(5), 0)).order == 120
    assert isotropy_group(quantize(np.ones((3, 4)), 0)).order == 6 * 24


def test_product_examples_orders_and_structure():
    K1, K2, K3 = (isotropy_group(pat(m)) for m in PRODUCT_EXAMPLES)
    assert (K1.order, K2.order, K3.order) == (96, 24, 8)
    for m, G in zip(PRODUCT_EXAMPLES, (K1, K2, K3)):
        B = brute_force_isotropy(pat(m))
        assert generated_keys(G) == group_keys(B)
    # K_1 = <(12),(34)> x S_4 and K_2 = <(12),(34)> x ({1} x S_3) as subgroups
    V4 = PermGroup((4,), [Permutation.parse("(1 2)", 4), Permutation.parse("(3 4)", 4)])
    S4 = symmetric_group(4)
    S3 = block_sum([symmetric_group(1), symmetric_group(3)])
    from symbreak.perm_core import product_group

    assert generated_keys(K1) == group_keys(closure(product_group(V4, S4).generators, degree=(4, 4)))
    assert generated_keys(K2) == group_keys(closure(product_group(V4, S3).generators, degree=(4, 4)))


def test_third_example_not_a_product():
    G = closure(isotropy_group(pat(PRODUCT_EXAMPLES[2])).generators, degree=(4, 4))
    from symbreak.perm_core import projections

    H1, H2 = projections(G)
    assert H1.order * H2.order > G.order  # a product would have order |H1||H2|
    # dihedral of order 8: one involution-free pair of elements of order 4
    orders = sorted(g.order() for g in G.elements())
    assert orders == [1, 2, 2, 2, 2, 2, 4, 4]


def test_circulant_is_delta_z4():
    G = isotropy_group(pat(CIRCULANT))
    assert G.order == 4
    Z4 = diagonal_group(PermGroup((4,), [Permutation.parse("(1 2 3 4)", 4)]))
    assert are_conjugate(closure(G.generators, degree=(4, 4)), Z4).status == "yes"


def test_brute_force_small_cases():
    assert brute_force_isotropy(quantize(np.eye(4), 0)).order == 24
    rng = np.random.default_rng(3)
    assert brute_force_isotropy(quantize(rng.standard_normal((4, 4)), 0)).order == 1
    with pytest.raises(ValueError):
        brute_force_isotropy(quantize(np.eye(6), 0))


@settings(max_examples=150, deadline=None)
@given(st.integers(2, 4), st.integers(2, 4), st.integers(1, 4), st.integers(0, 2**31))
def test_backtracking_matches_brute_force(k, d, m, seed):
    L = np.random.default_rng(seed).integers(0, m, size=(k, d))
    p = pat(L)
    G, B = isotropy_group(p), brute_force_isotropy(p)
    assert G.order == B.order
    assert generated_keys(G) == group_keys(B)


def test_generated_group_fixes_pattern():
    p = pat(WREATH_6)
    G = isotropy_group(p)
    for g in G.generators:
        assert np.array_equal(act_on_matrix(g, p.labels), p.labels)


def test_budget_exceeded_is_explicit():
    with pytest.raises(SearchBudgetExceeded):
        isotropy_group(quantize(np.eye(8), 0), budget=3)


def test_large_identity_fast():
    import time

    t = time.perf_counter()
    G = isotropy_group(quantize(np.eye(20), 0))
    assert G.order == math.factorial(20)
    assert time.perf_counter() - t < 5


# ----------------------------------------------------------------- rectangles, balance, diagonal type


def test_rectangle_partition_examples():
    D = diagonal_group(symmetric_group(4))
    rp = rectangle_partition(D)
    assert rp.shape == (1, 1) and len(rp.cell_orbits[(0, 0)]) == 2
    G = closure(isotropy_group(pat(PRODUCT_EXAMPLES[0])).generators, degree=(4, 4))
    rp = rectangle_partition(G)
    assert rp.shape == (2, 1)
    triv = PermGroup((3, 3), [])
    rp = rectangle_partition(triv)
    assert rp.shape == (3, 3) and all(len(o) == 1 for o in rp.cell_orbits.values())


def test_rectangles_tile_and_are_normalized():
    G = closure(isotropy_group(pat(PRODUCT_EXAMPLES[1])).generators, degree=(4, 4))
    rp = rectangle_partition(G)
    cells = [c for _, _, _, orbs in rp.rectangles() for o in orbs for c in o]
    assert sorted(cells) == [(i, j) for i in range(4) for j in range(4)]
    assert sorted(rp.row_order) == list(range(4)) and sorted(rp.col_order) == list(range(4))


def test_row_col_balance():
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal(2)
    W = np.full((5, 5), b) + (a - b) * np.eye(5)
    rp = rectangle_partition(diagonal_group(symmetric_group(5)))
    assert check_row_col_balance(rp, W).ok
    W1 = np.array([[1.0] * 4] * 2 + [[2.0] * 4] * 2)
    G = closure(isotropy_group(quantize(W1, 0)).generators, degree=(4, 4))
    assert check_row_col_balance(rectangle_partition(G), W1).ok
    bad = W.copy()
    bad[0, 1] += 0.3
    rep = check_row_col_balance(rp, bad)
    assert not rep.ok and rep.violations


def test_diagonal_type_examples():
    v = check_diagonal_type(quantize(np.eye(5), 0))
    assert v.is_delta_sd and v.constant_diagonal and v.diagonal_constraint_holds
    v = check_diagonal_type(pat(CIRCULANT))
    assert v.conjugate_to_transitive_diagonal and v.transitive_group_order == 4 and v.diagonal_constraint_holds
    v = check_diagonal_type(pat(PRODUCT_EXAMPLES[0]))
    assert not v.single_rectangle and not v.conjugate_to_transitive_diagonal


def test_double_transitivity_collapse():
    A4 = PermGroup((4,), [Permutation.parse("(1 2 3)", 4), Permutation.parse("(2 3 4)", 4)])
    D = diagonal_group(A4)
    rng = np.random.default_rng(5)
    W = np.zeros((4, 4))
    for orb in orbits(D, "cells").blocks:
        v = rng.standard_normal()
        for c in orb:
            W[c] = v
    G = closure(isotropy_group(quantize(W, 0)).generators, degree=(4, 4))
    assert group_keys(diagonal_group(symmetric_group(4))).issubset(group_keys(G))


# ----------------------------------------------------------------- fixed subspaces and catalog


@pytest.mark.parametrize("d", [4, 5, 6, 10])
def test_fixed_dims_pq(d):
    dims = {}
    for c in catalog_maximal_diagonal(d):
        if c.kind == "DeltaS":
            dims[0] = c.fixed_dim
        elif c.kind == "DeltaProduct":
            dims[c.params[1]] = c.fixed_dim
    assert dims[0] == 2 and dims[1] == 5
    assert all(v == 6 for q, v in dims.items() if 1 < q)


def test_fixed_dim_wreath_and_trivial():
    W = SubgroupDescriptor("DeltaWreath", (2, 3), 6)
    assert W.order == 48 and W.fixed_dim == 3
    assert fixed_subspace_dim(PermGroup((3, 4), [])) == 12


@pytest.mark.parametrize("d", range(2, 9))
def test_orbit_count_equals_linear_rank(d):
    for c in catalog_maximal_diagonal(d):
        H = c.group()
        dim = fixed_subspace_dim(H)
        assert fixed_subspace_dim_linear(H, "generators") == dim
        if c.order <= 720:
            assert fixed_subspace_dim_linear(H, "projector") == dim


def test_fixed_basis_is_invariant():
    for c in catalog_maximal_diagonal(6):
        H = c.group()
        basis = fixed_subspace_basis(H)
        assert np.array_equal(sum(basis), np.ones((6, 6)))
        for B in basis:
            for h in H.generators:
                assert np.array_equal(act_on_matrix(h, B), B)


def test_catalog_contents():
    names = lambda d: [c.name for c in catalog_maximal_diagonal(d)]
    assert names(5) == ["ΔS_5", "ΔS_4 × ΔS_1", "ΔS_3 × ΔS_2"]
    assert [c.fixed_dim for c in catalog_maximal_diagonal(5)] == [2, 5, 6]
    six = names(6)
    assert "Δ(S_2 ≀ S_3)" in six and "Δ(S_3 ≀ S_2)" in six
    assert names(2) == ["ΔS_2"]
    with pytest.raises(ValueError):
        SubgroupDescriptor("DeltaProduct", (3, 1), 5)
    with pytest.raises(ValueError):
        SubgroupDescriptor("DeltaWreath", (1, 5), 5)


def test_catalog_templates_block_schematic():
    T = SubgroupDescriptor("DeltaProduct", (3, 2), 5).template()
    # diagonal of A, off-diagonal of A, b, c, diagonal of D, off-diagonal of D
    assert len(np.unique(T)) == 6
    assert len({T[i, i] for i in range(3)}) == 1 and len({T[3, 3], T[4, 4]}) == 1


# ----------------------------------------------------------------- classify


def test_classify_spurious_pattern():
    rep = classify(np.array(SPURIOUS_PATTERN["values"]), 1e-6)
    assert rep.match_name == "ΔS_5 × ΔS_1" and rep.isotropy_order == 120


def test_classify_identity_and_random():
    assert classify(np.eye(20), 1e-9).match_name == "ΔS_20"
    rep = classify(np.random.default_rng(0).standard_normal((6, 6)), 1e-9)
    assert rep.match_name == "unclassified" and rep.isotropy_order == 1


def test_classify_wreath():
    rep = classify(np.array(WREATH_6, dtype=float), 1e-9)
    assert rep.isotropy_order == 48 and rep.match_name == "Δ(S_2 ≀ S_3)"


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["spurious", "wreath", "pq"]))
def test_classify_invariant_under_permutations(seed, which):
    rng = np.random.default_rng(seed)
    if which == "spurious":
        W = np.array(SPURIOUS_PATTERN["values"])
    elif which == "wreath":
        W = np.array(WREATH_6, dtype=float)
    else:
        W = np.full((6, 6), -0.3)
        W[:4, :4] = 0.2
        W[4:, 4:] = 0.5
        W[:4, 4:] = 0.7
        np.fill_diagonal(W, [1.0] * 4 + [1.5] * 2)
    base = classify(W, 1e-9)
    Wp = W[np.ix_(rng.permutation(6), rng.permutation(6))]
    rep = classify(Wp, 1e-9)
    assert rep.match_name == base.match_name != "unclassified"
    # the normalizing permutation brings the matrix to the template
    T = rep.catalog_match.template()
    Wn = Wp[np.ix_(rep.row_order, rep.col_order)]
    for c in range(T.max() + 1):
        assert np.ptp(Wn[T == c]) == 0


def test_classify_overspecified_rows():
    W = np.full((7, 6), -0.1) + np.vstack([np.eye(6), np.zeros((1, 6))])
    W[6] = 0.25
    rep = classify(W, 1e-9)
    assert rep.match_name == "ΔS_6" and rep.extra_rows[0]["kind"] == "constant"
    W2 = np.vstack([np.eye(6), np.eye(6)[:1]])
    rep2 = classify(W2, 1e-9)
    # the square part is I_6; the whole 7x6 group also swaps the two equal rows
    assert rep2.extra_rows[0]["kind"] == "duplicate" and rep2.match_name == "ΔS_6"
    assert rep2.isotropy_order == 120 * 2


def test_report_json_is_stable():
    rep = classify(np.eye(4), 1e-9)
    j = rep.to_json()
    assert list(j)[:4] == ["matrix_sha256", "shape", "tol", "num_classes"]
    assert j["catalog_match"]["name"] == "ΔS_4"
    assert classify(np.eye(4), 1e-9).to_json() == j
