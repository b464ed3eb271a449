"""Random test inputs that honour declared features."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..frontend import MatrixDecl, Property, Shape, Structure


def _dominant_diagonal(a: np.ndarray, rng) -> np.ndarray:
    a = a.copy()
    signs = rng.choice([-1.0, 1.0], size=len(a))
    np.fill_diagonal(a, signs * (np.sum(np.abs(a), axis=1) + 1.0))
    return a


def random_matrix(decl: MatrixDecl, rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    s, p = decl.structure, decl.prop
    if decl.square and rows != cols:
        raise ValueError(f"{decl.name} must be square, got {rows}x{cols}")
    a = rng.uniform(-1.0, 1.0, size=(rows, cols))
    if p is Property.ORTHOGONAL:
        if s is Structure.SYMMETRIC:
            v = rng.uniform(-1.0, 1.0, size=(rows, 1))
            q = np.eye(rows) - 2.0 * (v @ v.T) / float(np.sum(v * v))
        else:
            q, r = np.linalg.qr(a)
            q = q * np.sign(np.diag(r))
        err = np.max(np.abs(q.T @ q - np.eye(rows)))
        assert err < 1e-10, err
        return q
    if p is Property.SPD:
        spd = a.T @ a + rows * np.eye(rows)
        np.linalg.cholesky(spd)
        return spd
    if s is Structure.SYMMETRIC:
        a = (a + a.T) / 2.0
    if p is Property.INVERTIBLE:
        a = _dominant_diagonal(a, rng)
        if s is Structure.SYMMETRIC:
            a = (a + a.T) / 2.0
    if s is Structure.LOWER:
        a = np.tril(a)
    elif s is Structure.UPPER:
        a = np.triu(a)
    return a


def generate_test_matrices(shape: Shape, q: Sequence[int], rng=None) -> list[np.ndarray]:
    """One stored matrix per chain position (each occurrence independent)."""
    rng = np.random.default_rng(rng)
    out = []
    for i, f in enumerate(shape.factors, start=1):
        rows, cols = q[i - 1], q[i]
        if f.op.transposed:
            rows, cols = cols, rows
        out.append(random_matrix(f.decl, rows, cols, rng))
    return out


def condition_product(matrices: Sequence[np.ndarray]) -> float:
    return float(np.prod([np.linalg.cond(m) for m in matrices]))


def relative_error(x: np.ndarray, ref: np.ndarray) -> float:
    denom = np.linalg.norm(ref)
    return float(np.linalg.norm(x - ref) / (denom if denom else 1.0))
