"""Reference interpreter: runs a variant's kernel calls with plain dense code.

Kernels read only the part of a buffer that its recorded structure allows
(one triangle for triangular and symmetric buffers), so a wrong feature
inference shows up as a wrong result.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..catalog import LEFT, PRODUCT_KERNELS, SOLVE_KERNELS
from ..frontend import Property, Shape, Structure
from ..variants import KernelCall, OperandRef, Variant

PIVOT_TOL = 1e-12


class SingularMatrixError(ArithmeticError):
    pass


def structured(buf: np.ndarray, structure: Structure) -> np.ndarray:
    if structure is Structure.LOWER:
        return np.tril(buf)
    if structure is Structure.UPPER:
        return np.triu(buf)
    if structure is Structure.SYMMETRIC:
        low = np.tril(buf)
        return low + np.tril(buf, -1).T
    return buf


def read(buffers: dict[str, np.ndarray], ref: OperandRef) -> np.ndarray:
    """op(buffer) restricted to its structure; inversion is NOT applied."""
    a = structured(buffers[ref.buffer], ref.structure)
    return a.T if ref.transpose else a


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Sum of rank-1 updates over the inner dimension."""
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"shape mismatch {a.shape} x {b.shape}")
    out = np.zeros((a.shape[0], b.shape[1]))
    for p in range(a.shape[1]):
        out += np.outer(a[:, p], b[p, :])
    return out


def lu_factor(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Doolittle LU with partial pivoting, packed in one array."""
    lu = np.array(a, dtype=float)
    n = lu.shape[0]
    if lu.shape != (n, n):
        raise ValueError("LU needs a square matrix")
    scale = np.max(np.abs(lu), axis=1)
    if np.any(scale == 0):
        raise SingularMatrixError("zero row")
    piv = np.arange(n)
    for j in range(n):
        p = j + int(np.argmax(np.abs(lu[j:, j])))
        if abs(lu[p, j]) < PIVOT_TOL * scale[piv[p]]:
            raise SingularMatrixError(f"pivot {lu[p, j]:.3g} in column {j}")
        if p != j:
            lu[[j, p]] = lu[[p, j]]
            piv[[j, p]] = piv[[p, j]]
        lu[j + 1:, j] /= lu[j, j]
        lu[j + 1:, j + 1:] -= np.outer(lu[j + 1:, j], lu[j, j + 1:])
    return lu, piv


def forward_substitution(l: np.ndarray, b: np.ndarray, unit: bool = False) -> np.ndarray:
    x = np.array(b, dtype=float)
    for i in range(l.shape[0]):
        x[i] -= l[i, :i] @ x[:i]
        if not unit:
            if abs(l[i, i]) < PIVOT_TOL * max(np.max(np.abs(l[i])), 1e-300):
                raise SingularMatrixError(f"zero diagonal at {i}")
            x[i] /= l[i, i]
    return x


def back_substitution(u: np.ndarray, b: np.ndarray) -> np.ndarray:
    x = np.array(b, dtype=float)
    for i in range(u.shape[0] - 1, -1, -1):
        x[i] -= u[i, i + 1:] @ x[i + 1:]
        if abs(u[i, i]) < PIVOT_TOL * max(np.max(np.abs(u[i])), 1e-300):
            raise SingularMatrixError(f"zero diagonal at {i}")
        x[i] /= u[i, i]
    return x


def lu_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    lu, piv = lu_factor(a)
    y = forward_substitution(np.tril(lu, -1) + np.eye(len(lu)), b[piv], unit=True)
    return back_substitution(np.triu(lu), y)


def cholesky(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    l = np.zeros_like(a, dtype=float)
    for j in range(n):
        d = a[j, j] - l[j, :j] @ l[j, :j]
        if d <= PIVOT_TOL * abs(a[j, j]):
            raise SingularMatrixError(f"matrix not positive definite at {j}")
        l[j, j] = np.sqrt(d)
        l[j + 1:, j] = (a[j + 1:, j] - l[j + 1:, :j] @ l[j, :j]) / l[j, j]
    return l


def solve_left(coef: np.ndarray, kind: str, rhs: np.ndarray) -> np.ndarray:
    """X = coef^-1 rhs. ``kind`` picks the algorithm: lower, upper, spd, lu."""
    if kind == "lower":
        return forward_substitution(coef, rhs)
    if kind == "upper":
        return back_substitution(coef, rhs)
    if kind == "spd":
        l = cholesky(coef)
        return back_substitution(l.T, forward_substitution(l, rhs))
    return lu_solve(coef, rhs)


def _solver_kind(ref: OperandRef) -> str:
    s = ref.structure.flipped() if ref.transpose else ref.structure
    if s is Structure.LOWER:
        return "lower"
    if s is Structure.UPPER:
        return "upper"
    if ref.prop is Property.SPD:
        return "spd"
    return "lu"


def execute(call: KernelCall, buffers: dict[str, np.ndarray]) -> np.ndarray:
    k = call.kernel
    if k in PRODUCT_KERNELS:
        return matmul(read(buffers, call.left), read(buffers, call.right))
    if k in SOLVE_KERNELS:
        coef_ref, rhs_ref = (call.left, call.right) if call.side == LEFT else (call.right, call.left)
        assert coef_ref.inverse and not rhs_ref.inverse
        coef, rhs = read(buffers, coef_ref), read(buffers, rhs_ref)
        kind = _solver_kind(coef_ref)
        if call.side == LEFT:
            return solve_left(coef, kind, rhs)
        # X coef = rhs  <=>  coef^T X^T = rhs^T
        flipped = {"lower": "upper", "upper": "lower"}.get(kind, kind)
        return solve_left(coef.T, flipped, rhs.T).T
    if k == "inverse":
        a = read(buffers, call.left)
        return solve_left(a, _solver_kind(call.left), np.eye(a.shape[0]))
    if k == "transpose":
        return np.array(read(buffers, call.left))
    raise KeyError(f"no reference implementation for {k}")


def evaluate_variant(variant: Variant, matrices: Sequence[np.ndarray]) -> np.ndarray:
    """Run a variant on per-position input matrices (stored, before operators)."""
    buffers = {f"A{i}": np.asarray(m, dtype=float) for i, m in enumerate(matrices, start=1)}
    for call in variant.calls:
        buffers[call.out] = execute(call, buffers)
    if variant.result.startswith("A"):
        # single-matrix chain without pending operators: the input itself
        return np.array(read(buffers, OperandRef(variant.result, Structure.GENERAL, Property.SINGULAR)))
    return buffers[variant.result]


def reference_evaluate(shape: Shape, matrices: Sequence[np.ndarray]) -> np.ndarray:
    """Left-to-right with explicit inverses; no structure is exploited."""
    result = None
    for f, m in zip(shape.factors, matrices):
        v = np.asarray(m, dtype=float)
        if f.op.inverted:
            v = np.linalg.inv(v)
        if f.op.transposed:
            v = v.T
        result = v if result is None else result @ v
    return result
