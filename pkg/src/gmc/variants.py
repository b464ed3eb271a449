"""Parenthesizations and the code variant built for each of them.

A parenthesization is a binary tree whose leaves are the chain positions
``1..n``: a leaf is an ``int``, an inner node a ``(left, right)`` tuple.
"""

from __future__ import annotations

import functools
import math
import os
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence, Union

from . import catalog
from .catalog import Features
from .frontend import Property, Shape, Structure
from .polynomial import Poly

Tree = Union[int, tuple]

DEFAULT_ENUM_LIMIT = 12


class EnumerationLimitError(RuntimeError):
    pass


def enum_limit() -> int:
    return int(os.environ.get("GMC_ENUM_LIMIT", DEFAULT_ENUM_LIMIT))


def catalan(k: int) -> int:
    return math.comb(2 * k, k) // (k + 1)


@functools.lru_cache(maxsize=None)
def _trees(i: int, j: int) -> tuple:
    if i == j:
        return (i,)
    out = []
    for s in range(i, j):
        for left in _trees(i, s):
            for right in _trees(s + 1, j):
                out.append((left, right))
    return tuple(out)


def enumerate_trees(n: int, limit: int | None = None) -> list[Tree]:
    """All ``C(n-1)`` parenthesizations of an n-chain, in a fixed order."""
    limit = enum_limit() if limit is None else limit
    if n < 1:
        raise ValueError("chain must have at least one matrix")
    if n > limit:
        raise EnumerationLimitError(f"n={n} exceeds the enumeration limit {limit}")
    return list(_trees(1, n))


def span(tree: Tree) -> tuple[int, int]:
    """First and last leaf of a (sub)tree."""
    lo = hi = tree
    while not isinstance(lo, int):
        lo = lo[0]
    while not isinstance(hi, int):
        hi = hi[1]
    return lo, hi


def left_to_right(lo: int, hi: int) -> Tree:
    t: Tree = lo
    for i in range(lo + 1, hi + 1):
        t = (t, i)
    return t


def right_to_left(lo: int, hi: int) -> Tree:
    t: Tree = hi
    for i in range(hi - 1, lo - 1, -1):
        t = (i, t)
    return t


def fanning_out_tree(n: int, h: int) -> Tree:
    """Prefix ``1..h`` right-to-left, suffix ``h+1..n`` left-to-right, then joined."""
    if not 0 <= h <= n:
        raise ValueError(f"h must be in [0, {n}], got {h}")
    if h == 0:
        return left_to_right(1, n)
    if h == n:
        return right_to_left(1, n)
    return (right_to_left(1, h), left_to_right(h + 1, n))


def fanning_out_trees(n: int) -> list[Tree]:
    """Distinct fanning-out trees, in order of first occurrence over h."""
    seen: list[Tree] = []
    for h in range(n + 1):
        t = fanning_out_tree(n, h)
        if t not in seen:
            seen.append(t)
    return seen


def linearize(tree: Tree) -> list[tuple[Tree, tuple[int, int, int]]]:
    """Associations in issue order with their ``(a, b, c)`` triplets.

    Leftmost-available-first is a post-order walk: every node of a left
    subtree starts left of every node in the sibling subtree.
    """
    out: list[tuple[Tree, tuple[int, int, int]]] = []

    def walk(t: Tree) -> None:
        if isinstance(t, int):
            return
        walk(t[0])
        walk(t[1])
        lo, mid = span(t[0])
        _, hi = span(t[1])
        out.append((t, (lo - 1, mid, hi)))

    walk(tree)
    return out


def format_tree(tree: Tree) -> str:
    if isinstance(tree, int):
        return f"M{tree}"
    return f"({format_tree(tree[0])} {format_tree(tree[1])})"


def parse_tree(text: str) -> Tree:
    """Inverse of :func:`format_tree`."""
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    pos = 0

    def node() -> Tree:
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            left = node()
            right = node()
            if tokens[pos] != ")":
                raise ValueError(f"malformed tree {text!r}")
            pos += 1
            return (left, right)
        if not tok.startswith("M"):
            raise ValueError(f"malformed tree {text!r}")
        return int(tok[1:])

    t = node()
    if pos != len(tokens):
        raise ValueError(f"malformed tree {text!r}")
    return t


# --- operands and kernel calls -------------------------------------------


@dataclass(frozen=True)
class OperandRef:
    """How a kernel reads a buffer: value = op(buffer)."""

    buffer: str
    structure: Structure
    prop: Property
    transpose: bool = False
    inverse: bool = False

    @property
    def features(self) -> Features:
        return Features(self.structure, self.prop, self.transpose, self.inverse)

    def __str__(self) -> str:
        suffix = {(False, False): "", (True, False): "^T", (False, True): "^-1", (True, True): "^-T"}
        return self.buffer + suffix[(self.transpose, self.inverse)]


@dataclass(frozen=True)
class _Operand:
    ref: OperandRef
    rows: int  # size index of the value's rows
    cols: int

    @classmethod
    def make(cls, buffer, structure, prop, transpose, inverse, rows, cols) -> "_Operand":
        if structure is Structure.SYMMETRIC:
            transpose = False
        if prop is Property.ORTHOGONAL and inverse:
            inverse, transpose = False, not transpose
        return cls(OperandRef(buffer, structure, prop, transpose, inverse), rows, cols)

    def T(self) -> "_Operand":
        r = self.ref
        return _Operand.make(r.buffer, r.structure, r.prop, not r.transpose, r.inverse, self.cols, self.rows)

    def I(self) -> "_Operand":
        r = self.ref
        return _Operand.make(r.buffer, r.structure, r.prop, r.transpose, not r.inverse, self.cols, self.rows)

    @property
    def features(self) -> Features:
        return self.ref.features


@dataclass(frozen=True)
class KernelCall:
    kernel: str
    side: str | None
    branch: str
    triplet: tuple[int, int, int] | None  # None for pseudo-calls
    left: OperandRef
    right: OperandRef | None
    dims: tuple[int, int, int]  # size indices (m, k, n) of the computed association
    out: str
    out_structure: Structure
    out_prop: Property
    out_rows: int
    out_cols: int
    result_transpose: bool = False  # operators left pending on the output
    result_inverse: bool = False

    @property
    def pseudo(self) -> bool:
        return self.kernel in catalog.PSEUDO_KERNELS

    def cost(self, nvars: int, rep: Sequence[int] | None = None) -> Poly:
        rep = rep if rep is not None else range(nvars)
        targets = [rep[d] for d in self.dims]
        return catalog.cost_polynomial(self.kernel, self.branch).substitute(targets, nvars)

    def describe(self) -> str:
        cfg = [f"branch={self.branch}"]
        if self.side:
            cfg.insert(0, f"side={self.side}")
        pending = "".join(
            s for s, on in (("^T", self.result_transpose), ("^-1", self.result_inverse)) if on
        )
        rhs = f"{self.left} * {self.right}" if self.right is not None else str(self.left)
        trip = "(%d,%d,%d)" % self.triplet if self.triplet else "(final)"
        return (
            f"{self.kernel:<9} {' '.join(cfg):<26} {trip:<9} "
            f"{self.out}[q{self.out_rows} x q{self.out_cols}] := {rhs}"
            + (f"   -> pending {pending}" if pending else "")
        )


@dataclass(frozen=True)
class Variant:
    tree: Tree
    calls: tuple[KernelCall, ...]
    n: int
    rep: tuple[int, ...] = field(repr=False)  # size index -> class representative
    result: str = ""

    @property
    def triplets(self) -> list[tuple[int, int, int]]:
        return [c.triplet for c in self.calls if c.triplet is not None]

    @functools.cached_property
    def symbolic_cost(self) -> Poly:
        total = Poly(self.n + 1)
        for c in self.calls:
            total = total + c.cost(self.n + 1, self.rep)
        return total

    def eval_cost(self, q: Sequence[int], model=None):
        """Cost at concrete sizes; exact ``Fraction`` under the FLOP model."""
        if model is None or model.mode == "flops":
            return self.symbolic_cost(q)
        return model.variant_cost(self, q)

    @property
    def kernels(self) -> list[str]:
        return [c.kernel for c in self.calls]

    def listing(self) -> str:
        lines = [f"variant {format_tree(self.tree)}"]
        for i, c in enumerate(self.calls, start=1):
            lines.append(f"  {i:>2}: {c.describe()}")
        return "\n".join(lines)


def _leaf(shape: Shape, i: int) -> _Operand:
    f = shape.factors[i - 1]
    return _Operand.make(
        f"A{i}", f.decl.structure, f.decl.prop, f.op.transposed, f.op.inverted, i - 1, i
    )


def _propagates(inverted: _Operand, other: _Operand) -> bool:
    if inverted.ref.structure not in (Structure.GENERAL, Structure.SYMMETRIC):
        return False
    o = other.ref
    return o.prop is Property.ORTHOGONAL or (o.structure.triangular and o.prop.invertible)


def build_variant(tree: Tree, shape: Shape, propagate_inversion: bool = True) -> Variant:
    """Construct the code variant of a parenthesization.

    Per association, in issue order: propagate inversion, pick a kernel,
    legalize transposition, infer the result's features.  With
    ``propagate_inversion=False`` only the mandatory two-inverse rewrite is
    applied (useful to measure what the heuristic buys).
    """
    n = shape.n
    if span(tree) != (1, n):
        raise ValueError(f"tree {format_tree(tree)} does not cover a chain of {n}")
    rep = tuple(shape.class_of)
    values: dict[tuple[int, int], _Operand] = {(i - 1, i): _leaf(shape, i) for i in range(1, n + 1)}
    calls: list[KernelCall] = []

    for tmp_id, (_, (a, b, c)) in enumerate(linearize(tree), start=1):
        left, right = values.pop((a, b)), values.pop((b, c))
        pend_t = pend_i = False

        li, ri = left.ref.inverse, right.ref.inverse
        if (li and ri) or (
            propagate_inversion
            and li != ri
            and (_propagates(left, right) if li else _propagates(right, left))
        ):
            # A B = (B^-1 A^-1)^-1
            left, right = right.I(), left.I()
            pend_i = True

        kernel, side = catalog.kernel_for(left.features, right.features)

        if catalog.needs_transpose_rewrite(kernel, left.features, right.features):
            # A B = (B^T A^T)^T
            left, right = right.T(), left.T()
            pend_t = True
            kernel2, side = catalog.kernel_for(left.features, right.features)
            assert kernel2 == kernel, (kernel, kernel2)
            assert not catalog.needs_transpose_rewrite(kernel, left.features, right.features)

        branch = catalog.cost_branch(kernel, side, left.features, right.features)
        square = rep[left.rows] == rep[right.cols]
        feats = catalog.infer_result_features(left.features, right.features, square)
        out = f"X{tmp_id}"
        calls.append(KernelCall(
            kernel=kernel, side=side, branch=branch, triplet=(a, b, c),
            left=left.ref, right=right.ref, dims=(left.rows, left.cols, right.cols),
            out=out, out_structure=feats.structure, out_prop=feats.prop,
            out_rows=left.rows, out_cols=right.cols,
            result_transpose=pend_t, result_inverse=pend_i,
        ))
        rows, cols = (right.cols, left.rows) if pend_t != pend_i else (left.rows, right.cols)
        result = _Operand.make(out, feats.structure, feats.prop, pend_t, pend_i, rows, cols)
        assert (result.rows, result.cols) == (a, c)
        values[(a, c)] = result

    (final,) = values.values()
    result_buffer = final.ref.buffer
    if final.ref.inverse or final.ref.transpose:
        r = final.ref
        kernel = "inverse" if r.inverse else "transpose"
        src = replace(r, inverse=False)
        out = f"X{len(calls) + 1}"
        calls.append(KernelCall(
            kernel=kernel, side=None, branch="default", triplet=None,
            left=src, right=None, dims=(0, 0, n),
            out=out, out_structure=src.features.effective_structure, out_prop=r.prop,
            out_rows=0, out_cols=n,
        ))
        result_buffer = out
    return Variant(tree=tree, calls=tuple(calls), n=n, rep=rep, result=result_buffer)


def all_variants(shape: Shape, limit: int | None = None) -> list[Variant]:
    return [build_variant(t, shape) for t in enumerate_trees(shape.n, limit)]


def fanning_out_variant(shape: Shape, h: int) -> Variant:
    return build_variant(fanning_out_tree(shape.n, h), shape)


def symbolic_cost(variant: Variant) -> Poly:
    return variant.symbolic_cost


def eval_cost(variant: Variant, q: Sequence[int], model=None):
    return variant.eval_cost(q, model)


def iter_trees_sample(n: int, count: int, rng) -> Iterator[Tree]:
    """Uniformly random parenthesizations (for chains too long to enumerate)."""
    for _ in range(count):
        yield _random_tree(1, n, rng)


@functools.lru_cache(maxsize=None)
def _count(i: int, j: int) -> int:
    return catalan(j - i)


def _random_tree(i: int, j: int, rng) -> Tree:
    if i == j:
        return i
    weights = [_count(i, s) * _count(s + 1, j) for s in range(i, j)]
    total = sum(weights)
    r = int(rng.integers(total))
    for s, w in zip(range(i, j), weights):
        if r < w:
            return (_random_tree(i, s, rng), _random_tree(s + 1, j, rng))
        r -= w
    raise AssertionError("unreachable")
