"""Exhaustive optimum over all parenthesizations."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..frontend import Shape
from ..variants import Tree, Variant, all_variants


def optimal_cost(shape: Shape, q: Sequence[int], model=None,
                 variants: Sequence[Variant] | None = None) -> tuple[object, Tree]:
    """Cheapest variant over every parenthesization; ties go to the first
    tree in enumeration order."""
    variants = all_variants(shape) if variants is None else variants
    best, best_tree = None, None
    for v in variants:
        cost = v.eval_cost(q, model)
        if best is None or cost < best:
            best, best_tree = cost, v.tree
    return best, best_tree


def optimal_costs(variants: Sequence[Variant], Q: np.ndarray, model=None) -> np.ndarray:
    """Per-instance optimum for a batch of instances."""
    from ..costmodel import CostModel

    model = model or CostModel.flops()
    return np.min([model.variant_costs(v, Q) for v in variants], axis=0)


def matrix_chain_dp(dims: Sequence[int]) -> tuple[int, Tree]:
    """Classical O(n^3) matrix-chain program with gemm's 2*m*k*n cost."""
    n = len(dims) - 1
    cost = [[0] * (n + 1) for _ in range(n + 1)]
    split = [[0] * (n + 1) for _ in range(n + 1)]
    for length in range(2, n + 1):
        for i in range(1, n - length + 2):
            j = i + length - 1
            cost[i][j] = None
            for s in range(i, j):
                c = cost[i][s] + cost[s + 1][j] + 2 * dims[i - 1] * dims[s] * dims[j]
                if cost[i][j] is None or c < cost[i][j]:
                    cost[i][j], split[i][j] = c, s

    def tree(i: int, j: int) -> Tree:
        if i == j:
            return i
        s = split[i][j]
        return (tree(i, s), tree(s + 1, j))

    return cost[1][n], tree(1, n)
