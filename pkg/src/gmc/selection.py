"""Choosing a small variant set: penalties, the fanning-out base set and
greedy expansion against a sampled objective.

Most functions work on a cost table (variants x instances) so that every
candidate set is scored by cheap row minima rather than by rebuilding
variants.
"""

from __future__ import annotations

import csv
import itertools
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import catalog
from .costmodel import CostModel
from .frontend import Shape
from .variants import (
    EnumerationLimitError,
    Tree,
    Variant,
    all_variants,
    build_variant,
    catalan,
    enum_limit,
    fanning_out_tree,
    fanning_out_trees,
    iter_trees_sample,
)

POOL_FULL_MAX = 16796  # enumerate every tree up to this many (n <= 11)
EXHAUSTIVE_COMBOS = 10_000
RHO = 15  # worst-case penalty over the whole catalog

OBJECTIVES = ("max", "avg")


# --- penalties ------------------------------------------------------------


def penalty(Z: Sequence[Variant], q: Sequence[int], shape: Shape, model: CostModel | None = None,
            variants: Sequence[Variant] | None = None):
    """Relative cost increase of the best member of ``Z`` over the optimum at ``q``.

    Exact (``Fraction``) under the FLOP model; ``inf`` for an empty set.
    """
    from .oracle import optimal_cost

    if not Z:
        return math.inf
    best = min(v.eval_cost(q, model) for v in Z)
    opt, _ = optimal_cost(shape, q, model, variants)
    if opt == 0:
        return Fraction(0) if best == 0 else math.inf
    return best / opt - 1


def penalties(set_costs: np.ndarray, optimum: np.ndarray) -> np.ndarray:
    """Per-instance penalties from a (members x instances) cost table."""
    set_costs = np.atleast_2d(set_costs)
    if set_costs.shape[0] == 0:
        return np.full(len(optimum), math.inf)
    best = set_costs.min(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(optimum > 0, best / np.where(optimum > 0, optimum, 1) - 1.0,
                     np.where(best > 0, math.inf, 0.0))
    return p


def objective(p: np.ndarray, kind: str = "avg") -> float:
    """F_max or F_avg over a penalty vector."""
    p = np.asarray(p, dtype=float)
    if len(p) == 0:
        raise ValueError("objective needs at least one instance")
    if kind == "max":
        return float(p.max())
    if kind == "avg":
        return float(p.mean())
    raise ValueError(f"unknown objective {kind!r}")


def cost_table(variants: Sequence[Variant], Q: np.ndarray, model: CostModel | None = None) -> np.ndarray:
    model = model or CostModel.flops()
    Q = np.asarray(Q)
    if not variants:
        return np.zeros((0, len(Q)))
    return np.vstack([model.variant_costs(v, Q) for v in variants])


def optimum_costs(shape: Shape, Q: np.ndarray, model: CostModel | None = None,
                  limit: int | None = None) -> np.ndarray:
    """Exact per-instance optimum by enumerating every tree."""
    return cost_table(all_variants(shape, limit), Q, model).min(axis=0)


@dataclass
class PenaltyReport:
    penalties: np.ndarray
    instances: np.ndarray
    max: float = field(init=False)
    mean: float = field(init=False)
    quantiles: dict[float, float] = field(init=False)
    argmax: tuple[int, ...] = field(init=False)

    QUANTILES = (0.5, 0.9, 0.95, 0.99)

    def __post_init__(self):
        p = np.asarray(self.penalties, dtype=float)
        self.penalties = p
        self.max = float(p.max())
        self.mean = float(p.mean())
        self.quantiles = {x: float(np.quantile(p, x)) for x in self.QUANTILES}
        self.argmax = tuple(int(v) for v in self.instances[int(np.argmax(p))])

    def fraction_within(self, bound: float) -> float:
        return float(np.mean(self.penalties <= bound))

    def summary(self) -> str:
        qs = "  ".join(f"p{int(x * 100)}={v:.4g}" for x, v in self.quantiles.items())
        return f"max={self.max:.4g}  mean={self.mean:.4g}  {qs}  argmax={self.argmax}"

    def write_csv(self, out) -> None:
        w = csv.writer(out, lineterminator="\n")
        nq = self.instances.shape[1]
        w.writerow([f"q{i}" for i in range(nq)] + ["penalty"])
        for q, p in zip(self.instances, self.penalties):
            w.writerow([int(x) for x in q] + [repr(float(p))])


# --- base set -------------------------------------------------------------


def _mean_penalty(rows: np.ndarray, optimum: np.ndarray) -> float:
    return objective(penalties(rows, optimum), "avg")


def choose_representatives(classes: Sequence[Sequence[int]], fan_costs: np.ndarray,
                           optimum: np.ndarray) -> tuple[int, ...]:
    """Pick one size index per class so that {E^h} minimizes F_avg.

    ``fan_costs[h]`` is the cost row of E^h. Exhaustive when the number of
    combinations is small, otherwise coordinate descent sweeping classes in
    order. Ties keep the lexicographically first choice.
    """
    if math.prod(len(c) for c in classes) <= EXHAUSTIVE_COMBOS:
        best, best_v = None, math.inf
        for combo in itertools.product(*classes):
            v = _mean_penalty(fan_costs[list(combo)], optimum)
            if v < best_v:
                best, best_v = combo, v
        return tuple(best) if best is not None else tuple(c[0] for c in classes)

    combo = [c[0] for c in classes]
    best_v = _mean_penalty(fan_costs[combo], optimum)
    improved = True
    while improved:
        improved = False
        for j, cls in enumerate(classes):
            for h in cls:
                trial = combo[:j] + [h] + combo[j + 1:]
                v = _mean_penalty(fan_costs[trial], optimum)
                if v < best_v:
                    combo, best_v, improved = trial, v, True
    return tuple(combo)


def base_set(shape: Shape, Q: np.ndarray, model: CostModel | None = None,
             optimum: np.ndarray | None = None) -> list[Variant]:
    """One fanning-out variant per equivalence class, duplicates removed."""
    n = shape.n
    classes = shape.classes
    fans = [build_variant(fanning_out_tree(n, h), shape) for h in range(n + 1)]
    if len(classes) == 1:
        reps: tuple[int, ...] = (classes[0][0],)
    else:
        fan_costs = cost_table(fans, Q, model)
        if optimum is None:
            optimum = reference_optimum(shape, Q, model)
        reps = choose_representatives(classes, fan_costs, optimum)
    out: list[Variant] = []
    for h in reps:
        if all(v.tree != fans[h].tree for v in out):
            out.append(fans[h])
    return out


def reference_optimum(shape: Shape, Q: np.ndarray, model: CostModel | None = None) -> np.ndarray:
    """Exact optimum when enumerable, otherwise the best over the candidate pool."""
    if shape.n <= enum_limit():
        return optimum_costs(shape, Q, model)
    warnings.warn(
        f"chain of {shape.n} exceeds the enumeration limit; penalties are relative "
        "to the best sampled variant", stacklevel=2,
    )
    return cost_table(candidate_pool(shape), Q, model).min(axis=0)


# --- expansion ------------------------------------------------------------


@dataclass
class Expansion:
    members: list[int]  # pool indices, in insertion order
    history: list[float]  # objective after Z0 and after each addition


def expand_indices(pool_costs: np.ndarray, optimum: np.ndarray, kind: str, K: int,
                   z0: Sequence[int] = ()) -> Expansion:
    """Greedy expansion over pool indices.

    While |Z| < K: score every pool member not in Z, keep the strictly best
    (lowest index on ties), and stop as soon as it fails to improve on the
    current objective.
    """
    Z = list(dict.fromkeys(z0))
    if Z:
        current = pool_costs[Z].min(axis=0)
        v_min = objective(penalties(current, optimum), kind)
    else:
        current = np.full(pool_costs.shape[1], math.inf)
        v_min = math.inf
    history = [v_min]
    while len(Z) < K:
        best, v_star = None, math.inf
        members = set(Z)
        for d in range(len(pool_costs)):
            if d in members:
                continue
            v = objective(penalties(np.minimum(current, pool_costs[d]), optimum), kind)
            if v < v_star:
                best, v_star = d, v
        if best is None or v_star >= v_min:
            break
        Z.append(best)
        current = np.minimum(current, pool_costs[best])
        v_min = v_star
        history.append(v_min)
    return Expansion(Z, history)


def expand_set(pool: Sequence[Variant], Q: np.ndarray, kind: str, K: int,
               Z0: Sequence[Variant] = (), model: CostModel | None = None,
               optimum: np.ndarray | None = None, shape: Shape | None = None) -> list[Variant]:
    """Grow ``Z0`` to at most ``K`` members drawn from ``pool``.

    Members of ``Z0`` missing from the pool are added to it (matched by tree).
    """
    pool = list(pool)
    trees = [v.tree for v in pool]
    z0 = []
    for v in Z0:
        if v.tree not in trees:
            pool.append(v)
            trees.append(v.tree)
        z0.append(trees.index(v.tree))
    costs = cost_table(pool, Q, model)
    if optimum is None:
        optimum = reference_optimum(shape, Q, model) if shape is not None else costs.min(axis=0)
    result = expand_indices(costs, optimum, kind, K, z0)
    return [pool[i] for i in result.members]


def candidate_pool(shape: Shape, sample: int = 1000, rng=0) -> list[Variant]:
    """Every variant for short chains; fanning-out plus random trees otherwise."""
    n = shape.n
    if n <= enum_limit() and catalan(n - 1) <= POOL_FULL_MAX:
        return all_variants(shape, limit=max(n, enum_limit()))
    trees: list[Tree] = list(fanning_out_trees(n))
    seen = set(trees)
    for t in iter_trees_sample(n, sample, np.random.default_rng(rng)):
        if t not in seen:
            seen.add(t)
            trees.append(t)
    return [build_variant(t, shape) for t in trees]


# --- bounds ---------------------------------------------------------------


def reachable_kernels(shape: Shape) -> set[str]:
    kernels: set[str] = set()
    for v in candidate_pool(shape):
        kernels.update(v.kernels)
    return kernels - set(catalog.PSEUDO_KERNELS)


def alpha_hat(shape: Shape) -> Fraction:
    kernels = reachable_kernels(shape)
    return catalog.max_alpha(sorted(kernels)) if kernels else Fraction(1)


def penalty_bound(shape: Shape) -> Fraction:
    """Guaranteed worst-case penalty of the fanning-out set for this shape."""
    return min(Fraction(RHO), 2 * alpha_hat(shape) - 1)


def fanning_out_set(shape: Shape) -> list[Variant]:
    return [build_variant(t, shape) for t in fanning_out_trees(shape.n)]


def min_size_variant(shape: Shape, q: Sequence[int]) -> Variant:
    """E^m with m the index of the smallest size (first on ties)."""
    m = int(np.argmin(q))
    return build_variant(fanning_out_tree(shape.n, m), shape)


__all__ = [
    "EnumerationLimitError",
    "Expansion",
    "PenaltyReport",
    "alpha_hat",
    "base_set",
    "candidate_pool",
    "choose_representatives",
    "cost_table",
    "expand_indices",
    "expand_set",
    "fanning_out_set",
    "min_size_variant",
    "objective",
    "optimum_costs",
    "penalties",
    "penalty",
    "penalty_bound",
    "reachable_kernels",
    "reference_optimum",
]
