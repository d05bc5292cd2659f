"""Acceptance criteria 1-10.

Each test records one ``ACCEPTANCE n: PASS|FAIL`` line, printed in the pytest
terminal summary.  Criteria 7 and 8 are stochastic with a fixed list of three
ensemble seeds; they stop at the first seed that satisfies the criterion.
"""
import time

import numpy as np
import pytest

from symbreak.conservation import ConservedQuantity, drift_scaling
from symbreak.eta import EtaParams, enumerate_critical_points, eta_hessian
from symbreak.isotropy import (
    PatternMatrix,
    SubgroupDescriptor,
    brute_force_isotropy,
    catalog_maximal_diagonal,
    fixed_subspace_dim,
    fixed_subspace_dim_linear,
    isotropy_group,
)
from symbreak.perm_core import GroupElement, Permutation, act_on_matrix, closure, orbits, permutation_matrix
from symbreak.presets import get_preset, problem_with_shift
from symbreak.relu_loss import (
    DistributionSpec,
    LossProblem,
    NetworkSpec,
    analytic_grad_gaussian,
    analytic_loss_gaussian,
    mc_loss_with_se,
    problem_from_config,
    sample_batch,
)
from symbreak.trainer import run_ensemble, with_overrides

from .conftest import ACCEPTANCE_LINES
from .reference_examples import CIRCULANT, PRODUCT_EXAMPLES, SPURIOUS_PATTERN, WREATH_6

ENSEMBLE_SEEDS = (0, 1, 2)


def record(n: int, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pat(rows):
    return PatternMatrix.from_labels([list(r) for r in rows])


def keys(G):
    return {g.key() for g in G.elements()}


def test_1_fixed_subspace_dimensions():
    t = time.perf_counter()
    groups = {c.name: c.group() for c in catalog_maximal_diagonal(10)}
    want = {"ΔS_10": 2, "ΔS_9 × ΔS_1": 5, "ΔS_7 × ΔS_3": 6}
    got = {name: (fixed_subspace_dim(groups[name]), fixed_subspace_dim_linear(groups[name])) for name in want}
    elapsed = time.perf_counter() - t
    ok = all(got[n] == (v, v) for n, v in want.items()) and elapsed < 1.0
    record(1, ok, f"(orbit count, linear rank) = {got}, {elapsed:.3f}s")
    assert ok


def test_2_wreath_dimension():
    D = SubgroupDescriptor("DeltaWreath", (2, 3), 6)
    H = D.group()
    dims = (fixed_subspace_dim(H), fixed_subspace_dim_linear(H))
    p = pat(WREATH_6)
    fixes = all(np.array_equal(act_on_matrix(g, p.labels), p.labels) for g in H.generators)
    G = isotropy_group(p)
    ok = dims == (3, 3) and fixes and G.order >= 48 and p.num_classes == 3
    record(2, ok, f"dim = {dims}, block matrix isotropy order {G.order}, contains the wreath group: {fixes}")
    assert ok


def test_3_order_8_group_and_products():
    orders = []
    agree = True
    for m in PRODUCT_EXAMPLES:
        B = brute_force_isotropy(pat(m))
        G = isotropy_group(pat(m))
        orders.append(B.order)
        agree &= keys(closure(G.generators, degree=(4, 4))) == keys(B)
    V4 = [GroupElement(Permutation.parse(c, 4), Permutation.identity(4)) for c in ("(1 2)", "(3 4)")]
    S4 = [GroupElement(Permutation.identity(4), Permutation.parse(c, 4)) for c in ("(1 2)", "(1 2 3 4)")]
    S3 = [GroupElement(Permutation.identity(4), Permutation.parse(c, 4)) for c in ("(2 3)", "(2 3 4)")]
    K1 = keys(closure(V4 + S4)) == keys(brute_force_isotropy(pat(PRODUCT_EXAMPLES[0])))
    K2 = keys(closure(V4 + S3)) == keys(brute_force_isotropy(pat(PRODUCT_EXAMPLES[1])))
    ok = orders == [96, 24, 8] and agree and K1 and K2
    record(3, ok, f"brute-force orders {orders}, backtracking agrees: {agree}, "
                  f"K1 = V4 x S4: {K1}, K2 = V4 x ({{1}} x S3): {K2}")
    assert ok


def test_4_eta_testbed():
    t = time.perf_counter()
    details, ok = [], True
    for n in (3, 4, 5):
        params = EtaParams(-1.0, 1.0, 1.0, n)
        res = enumerate_critical_points(params)
        worst_g = max(pt.grad_norm for pt in res)
        worst_s = max(np.abs(np.sort(np.linalg.eigvalsh(eta_hessian(params, pt.x))) - pt.spectrum).max() for pt in res)
        census = res.census()
        good = (len(res) == 3 ** n and worst_g < 1e-10 and worst_s < 1e-9 and census["min"] == 2 ** n
                and census["max"] == 1 and census["saddle"] == 3 ** n - 2 ** n - 1 and census["degenerate"] == 0)
        ok &= good
        details.append(f"n={n}: {len(res)} points, {census['min']} min / {census['max']} max / "
                       f"{census['saddle']} saddle, max |grad| {worst_g:.1e}, spectrum err {worst_s:.1e}")
    elapsed = time.perf_counter() - t
    ok &= elapsed < 10
    record(4, ok, "; ".join(details) + f"; {elapsed:.2f}s")
    assert ok


def test_5_conservation_drift_halves():
    t = time.perf_counter()
    relu = LossProblem(NetworkSpec.multilayer((6, 6, 1)), (np.eye(6), np.ones((1, 6))), DistributionSpec.gaussian(6))
    rng = np.random.default_rng(0)
    x0 = tuple(0.5 * rng.standard_normal(s) for s in relu.student.weight_shapes())
    a = drift_scaling(relu, ConservedQuantity.scalar(1, 2), x0)
    lin_net = NetworkSpec.multilayer((6, 6, 6, 1), "linear")
    teacher = tuple(rng.standard_normal(s) for s in lin_net.weight_shapes())
    lin = LossProblem(lin_net, teacher, DistributionSpec.gaussian(6))
    y0 = tuple(0.5 * rng.standard_normal(s) for s in lin_net.weight_shapes())
    b = drift_scaling(lin, ConservedQuantity.matrix(1), y0)
    elapsed = time.perf_counter() - t
    ok = all(0 < r <= 0.6 for r in a["ratios"] + b["ratios"]) and elapsed < 30
    record(5, ok, f"ReLU scalar drifts {['%.2e' % d for d in a['drifts']]} ratios {['%.3f' % r for r in a['ratios']]}; "
                  f"linear matrix drifts {['%.2e' % d for d in b['drifts']]} ratios {['%.3f' % r for r in b['ratios']]}; "
                  f"{elapsed:.1f}s")
    assert ok


def test_6_gradient_equivariance():
    rng = np.random.default_rng(6)
    V = np.eye(6)
    worst = 0.0
    for _ in range(100):
        P = permutation_matrix(Permutation(tuple(int(x) for x in rng.permutation(6))))
        Q = permutation_matrix(Permutation(tuple(int(x) for x in rng.permutation(6))))
        W = rng.standard_normal((6, 6))
        r = np.linalg.norm(analytic_grad_gaussian(P @ W @ Q.T, V) - P @ analytic_grad_gaussian(W, V) @ Q.T)
        worst = max(worst, r)
    ok = worst < 1e-10
    record(6, ok, f"max Frobenius residual over 100 triples {worst:.2e}")
    assert ok


def test_7_spurious_minimum_symmetry():
    preset = get_preset("identity-d6")
    problem = problem_from_config(preset.problem)
    target = "ΔS_5 × ΔS_1"
    t = time.perf_counter()
    tried, found = [], None
    for seed in ENSEMBLE_SEEDS:
        ens = run_ensemble(problem, with_overrides(preset.train, master_seed=seed, classify_tol=1e-6))
        ng = [r for r in ens.runs if r.non_global]
        tried.append(f"seed {seed}: {len(ng)}/{len(ens.runs)} non-global {ens.non_global_histogram}")
        if any(r.report.match_name == target for r in ng):
            found = seed
            break
    elapsed = time.perf_counter() - t
    ok = found is not None and elapsed < 600
    record(7, ok, "; ".join(tried) + f"; {elapsed:.0f}s")
    assert ok


def _median_orders(problem_cfg, train, seed):
    out = {}
    for C in (0.0, 0.5, 1.0):
        problem = problem_from_config(problem_with_shift(problem_cfg, C))
        ens = run_ensemble(problem, with_overrides(train, master_seed=seed))
        # zero-loss endpoints off the teacher orbit count: at C = 1 the global minimum set is larger
        orders = ens.off_teacher_orders(problem.teacher)
        out[C] = (float(np.median(orders)) if orders else None, len(orders))
    return out


def test_8_symmetry_decay_under_shift():
    preset = get_preset("uniform-shift")
    tried, ok = [], False
    t = time.perf_counter()
    for seed in ENSEMBLE_SEEDS:
        med = _median_orders(preset.problem, preset.train, seed)
        # a shift with no non-global endpoint has no median and does not constrain the ordering
        defined = [med[C][0] for C in (0.0, 0.5, 1.0) if med[C][0] is not None]
        monotone = all(a >= b for a, b in zip(defined, defined[1:]))
        ok = monotone and med[1.0][0] == 1.0
        tried.append(f"seed {seed}: " + ", ".join(f"C={C:g} median {m} of {n}" for C, (m, n) in med.items()))
        if ok:
            break
    record(8, ok, "; ".join(tried) + f"; {time.perf_counter() - t:.0f}s")
    assert ok


def _corpus(n=1000, seed=9):
    """Seeded 4x4 patterns: half i.i.d. labels, half orbit patterns of random subgroups."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        if i % 2 == 0:
            out.append(rng.integers(0, int(rng.integers(1, 5)), size=(4, 4)))
            continue
        gens = [GroupElement(Permutation(tuple(int(x) for x in rng.permutation(4))),
                             Permutation(tuple(int(x) for x in rng.permutation(4))))
                for _ in range(int(rng.integers(1, 3)))]
        H = closure(gens)
        L = np.empty((4, 4), dtype=int)
        blocks = orbits(H, "cells").blocks
        # merge some orbits at random so the pattern is fixed by H and maybe more
        labels = rng.integers(0, max(1, len(blocks) - int(rng.integers(0, 3))), size=len(blocks))
        for lab, B in zip(labels, blocks):
            for c in B:
                L[c] = lab
        out.append(L)
    return out


def test_9_oracle_equivalence():
    listed = [[0, 0, 1, 1], [1, 1, 0, 0], [0, 1, 0, 1], [1, 0, 1, 0]]
    examples = [pat(m) for m in PRODUCT_EXAMPLES] + [pat(CIRCULANT), pat(listed), pat(WREATH_6), pat(SPURIOUS_PATTERN["symbols"])]
    mismatches, orders = 0, []
    for p in [PatternMatrix.from_labels(L) for L in _corpus()] + examples:
        G = isotropy_group(p)
        B = brute_force_isotropy(p, max_degree=6)
        orders.append(B.order)
        if G.order != B.order or keys(closure(G.generators, degree=p.shape)) != keys(B):
            mismatches += 1
    nontrivial = sum(o > 1 for o in orders)
    ok = mismatches == 0
    record(9, ok, f"{len(orders)} patterns ({nontrivial} with nontrivial isotropy), {mismatches} mismatches")
    assert ok


def test_10_analytic_vs_monte_carlo():
    rng = np.random.default_rng(10)
    worst = 0.0
    for i in range(20):
        W, V = rng.standard_normal((4, 4)), rng.standard_normal((4, 4))
        p = LossProblem(NetworkSpec.two_layer(4, 4), V, DistributionSpec.gaussian(4))
        m, se = mc_loss_with_se(p, W, sample_batch(p.distribution, 10**6, 1000 + i))
        worst = max(worst, abs(analytic_loss_gaussian(W, V) - m) / se)
    ok = worst <= 5
    record(10, ok, f"max |analytic - MC| / SE over 20 pairs = {worst:.2f}")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
