"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line.

Run just these with ``python3 -m pytest tests/test_acceptance.py -v``. The
result lines go straight to the terminal even when output is captured.
"""

from __future__ import annotations

import subprocess
import sys
import warnings
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from gmc.catalog import KERNELS, max_alpha
from gmc.costmodel import CostModel, parse_timing_table, synthetic_table
from gmc.emit import build_plan, dispatch, dispatch_batch
from gmc.experiments import bench, random_shape
from gmc.frontend import (
    Factor,
    MatrixDecl,
    Property,
    Shape,
    Structure,
    UnaryOp,
    normalize,
    parse,
    sample_instance,
    sample_instances,
)
from gmc.oracle import (
    condition_product,
    evaluate_variant,
    generate_test_matrices,
    reference_evaluate,
    relative_error,
)
from gmc.polynomial import Poly
from gmc.selection import (
    alpha_hat,
    base_set,
    cost_table,
    expand_indices,
    fanning_out_set,
    objective,
    optimum_costs,
    penalties,
)
from gmc.variants import all_variants, build_variant, fanning_out_tree, left_to_right

from .conftest import MIXED_CHAIN, general_chain
from .test_catalog import TABLE, as_sympy

F = Fraction


@pytest.fixture
def verdict(capsys):
    def emit(number: int, title: str, ok: bool, detail: str = "") -> None:
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}: {title}"
                  + (f" ({detail})" if detail else ""))
    return emit


def _broad_shape(n: int, rng: np.random.Generator) -> Shape:
    """Any legal feature/operator combination except explicit identities."""
    factors = []
    for i in range(1, n + 1):
        while True:
            s = Structure(rng.choice([x.value for x in Structure]))
            p = Property(rng.choice([x.value for x in Property]))
            op = UnaryOp(rng.choice([x.value for x in UnaryOp]))
            if p is Property.SPD and s is not Structure.SYMMETRIC:
                continue
            if op.inverted and p is Property.SINGULAR:
                continue
            if s.triangular and p is Property.ORTHOGONAL:
                continue
            break
        factors.append(Factor(MatrixDecl(f"M{i}", s, p), op))
    return normalize(Shape(tuple(factors)))


# 1 --------------------------------------------------------------------------


def test_criterion_1_worked_cost_example(verdict):
    shape = normalize(parse(
        "Matrix L1 <LowerTri, Invertible>; Matrix G2 <General, Invertible>;"
        "Matrix G3 <General, Singular>; X := L1 * G2^-1 * G3;"
    ))
    tree = ((1, 2), 3)
    prop = build_variant(tree, shape).symbolic_cost
    naive = build_variant(tree, shape, propagate_inversion=False).symbolic_cost
    # q0 = q1 = q2 = m share one class, q3 = n; polynomials are over class representatives
    want_prop = Poly(4, {(3, 0, 0, 0): F(5, 3), (2, 0, 0, 1): F(2)})
    want_naive = Poly(4, {(3, 0, 0, 0): F(8, 3), (2, 0, 0, 1): F(2)})
    q = (100, 100, 100, 40)
    ok = (
        prop == want_prop
        and naive == want_naive
        and prop(q) == F(5, 3) * 100**3 + 2 * 100**2 * 40
        and naive(q) == F(8, 3) * 100**3 + 2 * 100**2 * 40
    )
    verdict(1, "worked cost example", ok, f"{prop.format(['m', 'x', 'y', 'n'])} at m=100,n=40 -> {prop(q)}")
    assert ok


# 2 --------------------------------------------------------------------------


def test_criterion_2_catalog_conformance(verdict):
    mismatched = [key for key, want in TABLE.items()
                  if sp.simplify(as_sympy(KERNELS[key[0]].costs[key[1]]) - want) != 0]
    listed = {(kid, b) for kid, k in KERNELS.items() for b in k.costs if not k.pseudo}
    alphas = (max_alpha(["gemm"]), max_alpha(["gemm", "trmm"]), max_alpha())
    ok = not mismatched and listed == set(TABLE) and alphas == (1, 2, 8)
    verdict(2, "catalog conformance", ok,
            f"{len(TABLE)} branches, {len(mismatched)} mismatched, alpha={tuple(int(a) for a in alphas)}")
    assert ok


# 3 --------------------------------------------------------------------------


def _theory_violations(shape: Shape, Q: np.ndarray, general: bool) -> tuple[int, float]:
    vs = all_variants(shape)
    ahat = F(1) if general else alpha_hat(shape)
    fans = fanning_out_set(shape)
    bad, worst = 0, 0.0
    for q in Q:
        q = tuple(int(x) for x in q)
        opt = min(v.eval_cost(q) for v in vs)
        best_fan = min(v.eval_cost(q) for v in fans)
        m = int(np.argmin(q))
        em = build_variant(fanning_out_tree(shape.n, m), shape).eval_cost(q)
        p = best_fan / opt - 1
        worst = max(worst, float(p))
        if p > 15 or not em < 2 * ahat * opt:
            bad += 1
    return bad, worst


def test_criterion_3_theory_bounds(verdict):
    rng = np.random.default_rng(2024)
    shapes = []
    for i in range(30):
        shapes.append((random_shape(5 + i % 2, rng), False))
    for i in range(30):
        shapes.append((_broad_shape(5 + i % 2, rng), False))
    for n in (5, 6):
        for _ in range(5):
            shapes.append((parse(general_chain(n)), True))
    violations, worst = 0, 0.0
    for shape, general in shapes:
        Q = sample_instances(shape.classes, 200, 2, 1000, rng)
        bad, w = _theory_violations(shape, Q, general)
        violations += bad
        worst = max(worst, w)
    ok = violations == 0 and len(shapes) >= 50
    verdict(3, "fanning-out penalty and E^m bounds", ok,
            f"{len(shapes)} shapes x 200 instances, {violations} violations, worst penalty {worst:.3f}")
    assert ok


# 4 --------------------------------------------------------------------------


def test_criterion_4_flop_distribution(verdict):
    results = bench(5, 200, train=1000, validate=200, expand=2, seed=42)
    base = np.concatenate([r.ratios["base"] for r in results])
    exp2 = np.concatenate([r.ratios["expand2"] for r in results])
    below_21 = bool(np.all(base < 2.1))
    within_12 = float(np.mean(base <= 1.2))
    within_105 = float(np.mean(exp2 <= 1.05))
    ok = below_21 and within_12 >= 0.90 and within_105 >= 0.95
    verdict(4, "base and expanded set FLOP ratios", ok,
            f"{len(base)} instances: base max {base.max():.4f}, "
            f"base<=1.2 on {within_12:.2%}, expand2<=1.05 on {within_105:.2%}")
    assert ok


# 5 --------------------------------------------------------------------------


def test_criterion_5_left_to_right_pathology(verdict):
    shape = parse(general_chain(3))
    s = 1000
    q = (s, 1, s, 1)
    ltr = build_variant(left_to_right(1, 3), shape).eval_cost(q)
    opt = min(v.eval_cost(q) for v in all_variants(shape))
    ratio = ltr / opt
    # left-to-right over right-to-left is q0 q2 (q1 + q3) / (q1 q3 (q0 + q2))
    derived = F(q[0] * q[2] * (q[1] + q[3]), q[1] * q[3] * (q[0] + q[2]))
    ok = ratio >= 100 and ratio == 1000 == derived
    verdict(5, "left-to-right ratio on (s,1,s,1)", ok, f"ratio {ratio}")
    assert ok


# 6 --------------------------------------------------------------------------


def test_criterion_6_algebraic_soundness(verdict):
    rng = np.random.default_rng(6)
    triples = failures = evaluations = 0
    worst = 0.0
    while triples < 300:
        n = int(rng.integers(2, 6))
        shape = _broad_shape(n, rng) if triples % 2 else random_shape(n, rng)
        q = sample_instance(shape.classes, 2, 30, int(rng.integers(2**31)))
        mats = generate_test_matrices(shape, q, rng)
        kappa = condition_product(mats)
        ref = reference_evaluate(shape, mats)
        for v in all_variants(shape):
            err = relative_error(evaluate_variant(v, mats), ref)
            worst = max(worst, err / kappa)
            evaluations += 1
            if not err <= 1e-8 * kappa:
                failures += 1
        triples += 1
    ok = failures == 0
    verdict(6, "algebraic soundness", ok,
            f"{triples} triples, {evaluations} variant evaluations, {failures} failures, "
            f"worst err/kappa {worst:.2e}")
    assert ok


# 7 --------------------------------------------------------------------------


def _f(costs: np.ndarray, members, opt: np.ndarray, kind: str) -> float:
    if not members:
        return float("inf")
    return objective(penalties(costs[list(members)], opt), kind)


def test_criterion_7_expansion_contract(verdict):
    rng = np.random.default_rng(7)
    problems = []
    early_exits = 0
    for run in range(100):
        shape = random_shape(int(rng.integers(3, 6)), rng) if run % 2 else _broad_shape(int(rng.integers(3, 6)), rng)
        pool = all_variants(shape)
        Q = sample_instances(shape.classes, 60, 2, 1000, rng)
        costs = cost_table(pool, Q)
        opt = optimum_costs(shape, Q)
        kind = ("avg", "max")[run % 2]
        z0 = [int(x) for x in rng.choice(len(pool), size=int(rng.integers(0, min(3, len(pool)) + 1)),
                                         replace=False)]
        K = len(z0) + int(rng.integers(0, 5))
        e = expand_indices(costs, opt, kind, K, z0)
        Z = e.members
        hist = e.history
        if Z[: len(z0)] != z0 or not set(Z) <= set(range(len(pool))) or len(Z) > K:
            problems.append(f"run {run}: membership")
        if any(not b < a for a, b in zip(hist, hist[1:])):
            problems.append(f"run {run}: objective not strictly improving")
        # each recorded value is the objective of the prefix it describes
        for i, h in enumerate(hist):
            if h != _f(costs, Z[: len(z0) + i], opt, kind):
                problems.append(f"run {run}: history mismatch")
        if len(Z) < K:
            early_exits += 1
            current = _f(costs, Z, opt, kind)
            rest = [d for d in range(len(pool)) if d not in Z]
            if any(_f(costs, Z + [d], opt, kind) < current for d in rest):
                problems.append(f"run {run}: exited while a strict improver existed")
    ok = not problems
    verdict(7, "greedy expansion contract", ok,
            f"100 runs, {early_exits} early exits, {len(problems)} problems")
    assert ok, problems[:5]


# 8 --------------------------------------------------------------------------


def test_criterion_8_dispatch(verdict):
    rng = np.random.default_rng(8)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        timed = CostModel.from_grids(parse_timing_table(synthetic_table(seed=8)))
    plans = []
    mixed = normalize(parse(MIXED_CHAIN))
    plans.append(build_plan(mixed, all_variants(mixed)))
    plans.append(build_plan(mixed, all_variants(mixed), timed))
    for _ in range(4):
        shape = random_shape(5, rng)
        Q = sample_instances(shape.classes, 300, 2, 1000, rng)
        plans.append(build_plan(shape, base_set(shape, Q)))
    mismatches = scaling = 0
    checked = 0
    for plan in plans:
        Q = sample_instances(plan.shape.classes, 1000, 2, 1000, rng)
        got = dispatch_batch(plan, Q)
        scaled = [build_plan(plan.shape, plan.variants, plan.model.scaled(c)) for c in (2.0, 0.5, 3.7)]
        for row, g in zip(Q, got):
            q = tuple(int(x) for x in row)
            costs = [plan.model.variant_cost(v, q) for v in plan.variants]
            want = costs.index(min(costs))
            if dispatch(plan, q) != want or g != want:
                mismatches += 1
            if any(dispatch(s, q) != want for s in scaled):
                scaling += 1
            checked += 1
    # exact ties go to the lowest index
    tie_plan = build_plan(parse(general_chain(3)),
                          [build_variant(fanning_out_tree(3, h), parse(general_chain(3))) for h in (0, 1)])
    ties_ok = all(dispatch(tie_plan, (s, s, s, s)) == 0 for s in (2, 17, 1000))
    ok = mismatches == 0 and scaling == 0 and ties_ok
    verdict(8, "dispatch argmin, ties, rate scaling", ok,
            f"{len(plans)} plans, {checked} instances, {mismatches} argmin mismatches, "
            f"{scaling} scaling changes, ties {'ok' if ties_ok else 'broken'}")
    assert ok


# 9 --------------------------------------------------------------------------


def test_criterion_9_determinism(verdict, tmp_path):
    src = tmp_path / "chain.gmc"
    src.write_text(MIXED_CHAIN)
    outputs = []
    for run in ("a", "b"):
        plan, rep = tmp_path / f"{run}.gmcplan", tmp_path / f"{run}.csv"
        for argv in (["compile", str(src), "-o", str(plan), "--expand", "1", "--seed", "42"],
                     ["report", str(plan), "-o", str(rep), "--seed", "42"]):
            r = subprocess.run([sys.executable, "-m", "gmc", *argv], capture_output=True)
            assert r.returncode == 0, r.stderr
        outputs.append((plan.read_bytes(), rep.read_bytes()))
    ok = outputs[0] == outputs[1]
    verdict(9, "byte-identical compile and report", ok,
            f"plan {len(outputs[0][0])} bytes, csv {len(outputs[0][1])} bytes")
    assert ok
