"""Random-shape FLOP study and per-plan validation sweeps."""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .costmodel import CostModel
from .frontend import Shape, normalize, parse, sample_instances
from .selection import (
    PenaltyReport,
    base_set,
    cost_table,
    expand_indices,
    optimum_costs,
    penalties,
)
from .variants import all_variants, build_variant, left_to_right

# (structure, property, operator, rectangular); nine of ten force a square matrix
FEATURE_OPTIONS: tuple[tuple[str, str, str, bool], ...] = (
    ("General", "Singular", "", True),
    ("General", "Invertible", "^-1", False),
    ("Symmetric", "SPD", "", False),
    ("Symmetric", "SPD", "^-1", False),
    ("LowerTri", "Singular", "", False),
    ("LowerTri", "Invertible", "", False),
    ("LowerTri", "Invertible", "^-1", False),
    ("UpperTri", "Singular", "", False),
    ("UpperTri", "Invertible", "", False),
    ("UpperTri", "Invertible", "^-1", False),
)


def shape_from_options(options: Sequence[int]) -> Shape:
    lines, operands = [], []
    for i, o in enumerate(options, start=1):
        s, p, op, _ = FEATURE_OPTIONS[o]
        lines.append(f"Matrix M{i} <{s}, {p}>;")
        operands.append(f"M{i}{op}")
    lines.append("X := " + " * ".join(operands) + ";")
    return normalize(parse("\n".join(lines)))


def random_options(n: int, rng: np.random.Generator, p_rect: float | None = None) -> list[int]:
    """Feature options for one chain with at least one rectangular matrix.

    ``p_rect=None`` draws the ten options uniformly (rejecting all-square
    chains); otherwise each matrix is rectangular with probability ``p_rect``
    and the square options share the rest equally.
    """
    while True:
        if p_rect is None:
            opts = [int(x) for x in rng.integers(len(FEATURE_OPTIONS), size=n)]
        else:
            rect = rng.random(n) < p_rect
            opts = [0 if r else int(rng.integers(1, len(FEATURE_OPTIONS))) for r in rect]
        if any(FEATURE_OPTIONS[o][3] for o in opts):
            return opts


def random_shape(n: int, rng: np.random.Generator, p_rect: float | None = None) -> Shape:
    return shape_from_options(random_options(n, rng, p_rect))


@dataclass
class ShapeResult:
    shape: str
    n_classes: int
    set_sizes: list[int]  # base set, then each expansion step
    ratios: dict[str, np.ndarray]  # set label -> per-instance ratio over optimum


def study_shape(shape: Shape, train: int, validate: int, expand: int = 2, lo: int = 2,
                hi: int = 1000, seed: int = 0, kind: str = "avg",
                model: CostModel | None = None) -> ShapeResult:
    """Base set, its greedy expansions, and left-to-right on fresh instances."""
    rng = np.random.default_rng(seed)
    Qt = sample_instances(shape.classes, train, lo, hi, rng)
    Qv = sample_instances(shape.classes, validate, lo, hi, rng)
    pool = all_variants(shape)
    trees = [v.tree for v in pool]

    train_costs = cost_table(pool, Qt, model)
    train_opt = train_costs.min(axis=0)
    val_costs = cost_table(pool, Qv, model)
    val_opt = val_costs.min(axis=0)

    base = base_set(shape, Qt, model, optimum=train_opt)
    z0 = [trees.index(v.tree) for v in base]
    ratios = {"base": penalties(val_costs[z0], val_opt) + 1.0}
    sizes = [len(z0)]
    for step in range(1, expand + 1):
        members = expand_indices(train_costs, train_opt, kind, len(z0) + step, z0).members
        ratios[f"expand{step}"] = penalties(val_costs[members], val_opt) + 1.0
        sizes.append(len(members))
    ltr = trees.index(left_to_right(1, shape.n))
    ratios["ltr"] = penalties(val_costs[[ltr]], val_opt) + 1.0
    return ShapeResult(str(shape), len(shape.classes), sizes, ratios)


def _study_job(args) -> ShapeResult:
    options, train, validate, expand, lo, hi, seed = args
    return study_shape(shape_from_options(options), train, validate, expand, lo, hi, seed)


def bench(n: int, shapes: int, train: int = 1000, validate: int = 100, expand: int = 2,
          lo: int = 2, hi: int = 1000, seed: int = 42, jobs: int = 1) -> list[ShapeResult]:
    """FLOP study over random shapes; each shape gets its own child seed."""
    root = np.random.SeedSequence(seed)
    shape_rng = np.random.default_rng(root.spawn(1)[0])
    children = root.spawn(shapes)
    tasks = [
        (random_options(n, shape_rng), train, validate, expand, lo, hi,
         int(c.generate_state(1)[0]))
        for c in children
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_study_job, tasks))
    return [_study_job(t) for t in tasks]


def write_bench_csv(results: Sequence[ShapeResult], out) -> None:
    w = csv.writer(out, lineterminator="\n")
    labels = list(results[0].ratios) if results else []
    w.writerow(["shape", "instance"] + labels)
    for r in results:
        for j in range(len(r.ratios[labels[0]])):
            w.writerow([r.shape, j] + [repr(float(r.ratios[k][j])) for k in labels])


def bench_summary(results: Sequence[ShapeResult]) -> dict[str, dict[str, float]]:
    out = {}
    for label in results[0].ratios:
        x = np.concatenate([r.ratios[label] for r in results])
        out[label] = {
            "max": float(x.max()),
            "mean": float(x.mean()),
            "le_1.05": float(np.mean(x <= 1.05)),
            "le_1.2": float(np.mean(x <= 1.2)),
            "le_1.5": float(np.mean(x <= 1.5)),
        }
    return out


# --- validation of a compiled set ------------------------------------------


@dataclass
class SweepResult:
    instances: np.ndarray
    optimum: np.ndarray
    plan_ratio: np.ndarray
    ltr_ratio: np.ndarray

    def reports(self) -> dict[str, PenaltyReport]:
        return {
            "plan": PenaltyReport(self.plan_ratio - 1.0, self.instances),
            "ltr": PenaltyReport(self.ltr_ratio - 1.0, self.instances),
        }

    def write_csv(self, out) -> None:
        w = csv.writer(out, lineterminator="\n")
        nq = self.instances.shape[1]
        w.writerow([f"q{i}" for i in range(nq)] + ["optimum", "ratio_plan", "ratio_ltr"])
        for q, o, a, b in zip(self.instances, self.optimum, self.plan_ratio, self.ltr_ratio):
            w.writerow([int(x) for x in q] + [repr(float(o)), repr(float(a)), repr(float(b))])


def validation_sweep(shape: Shape, variants, Q: np.ndarray,
                     model: CostModel | None = None) -> SweepResult:
    """Plan set and left-to-right against the exhaustive optimum."""
    opt = optimum_costs(shape, Q, model)
    plan_costs = cost_table(list(variants), Q, model)
    ltr = build_variant(left_to_right(1, shape.n), shape)
    ltr_costs = cost_table([ltr], Q, model)
    return SweepResult(
        np.asarray(Q), opt,
        penalties(plan_costs, opt) + 1.0,
        penalties(ltr_costs, opt) + 1.0,
    )


__all__ = [
    "FEATURE_OPTIONS",
    "ShapeResult",
    "SweepResult",
    "bench",
    "bench_summary",
    "random_options",
    "random_shape",
    "shape_from_options",
    "study_shape",
    "validation_sweep",
    "write_bench_csv",
]
