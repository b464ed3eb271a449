"""Cost models: exact FLOP counts, or time estimates from measured rate grids.

A timing table is CSV with header ``kernel,d1,d2,d3,flops_per_sec``. The
kernel column is a catalog id, optionally suffixed with a cost branch
(``trmm:left``) when the branches were timed separately. Unused size
columns are left blank. Each kernel's rows must cover a full Cartesian grid.
"""

from __future__ import annotations

import csv
import io
import itertools
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import catalog

DEFAULT_POINTS = (50, 100, 300, 500, 700, 1000)
DEFAULT_RATE = 1.0e10

# which of the (m, k, n) sizes index each grid axis
AXES: dict[str, tuple[int, ...]] = {"gemm": (0, 1, 2)}
for _k in ("symm", "trmm", "trsm", "gegesv", "sygesv", "pogesv"):
    AXES[_k] = (0, 2)
for _k in ("sysymm", "trsymm", "trtrmm", "gesysv", "getrsv", "sysysv", "sytrsv",
           "posysv", "potrsv", "trsysv", "trtrsv", "inverse"):
    AXES[_k] = (0,)


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class TimingGrid:
    kernel: str  # catalog id, or "id:branch"
    points: tuple[tuple[float, ...], ...]  # per-axis grid points
    rates: np.ndarray  # FLOP/s, shape = tuple(len(p) for p in points)

    def __post_init__(self):
        for p in self.points:
            if any(b <= a for a, b in zip(p, p[1:])):
                raise GridError(f"{self.kernel}: grid points must be strictly increasing")
        rates = np.asarray(self.rates, dtype=float)
        if rates.shape != tuple(len(p) for p in self.points):
            raise GridError(f"{self.kernel}: rate array does not match the grid")
        if not np.all(rates > 0):
            raise GridError(f"{self.kernel}: rates must be positive")
        object.__setattr__(self, "rates", rates)

    @property
    def base_kernel(self) -> str:
        return self.kernel.split(":")[0]

    def interpolate(self, sizes: np.ndarray) -> np.ndarray:
        """Multilinear rate estimate, clamped to the grid hull."""
        sizes = np.atleast_2d(np.asarray(sizes, dtype=float))
        clamped = np.column_stack([
            np.clip(sizes[:, i], p[0], p[-1]) for i, p in enumerate(self.points)
        ])
        interp = RegularGridInterpolator(self.points, self.rates, method="linear")
        return interp(clamped)

    def scaled(self, c: float) -> "TimingGrid":
        return TimingGrid(self.kernel, self.points, self.rates * c)


def _parse_rows(text: str) -> dict[str, list[tuple[tuple[float, ...], float]]]:
    reader = csv.DictReader(io.StringIO(text))
    expected = ["kernel", "d1", "d2", "d3", "flops_per_sec"]
    if reader.fieldnames != expected:
        raise GridError(f"timing table header must be {','.join(expected)}")
    rows: dict[str, list] = {}
    for lineno, rec in enumerate(reader, start=2):
        kernel = rec["kernel"].strip()
        base = kernel.split(":")[0]
        if base not in AXES:
            raise GridError(f"line {lineno}: unknown kernel id {kernel!r}")
        dims = tuple(float(rec[d]) for d in ("d1", "d2", "d3") if rec[d] and rec[d].strip())
        if len(dims) != len(AXES[base]):
            raise GridError(f"line {lineno}: {base} takes {len(AXES[base])} sizes, got {len(dims)}")
        rate = float(rec["flops_per_sec"])
        if not rate > 0:
            raise GridError(f"line {lineno}: non-positive rate {rate}")
        rows.setdefault(kernel, []).append((dims, rate))
    return rows


def _grid_from_rows(kernel: str, rows) -> TimingGrid:
    ndim = len(rows[0][0])
    points = tuple(tuple(sorted({r[0][i] for r in rows})) for i in range(ndim))
    shape = tuple(len(p) for p in points)
    if len(rows) != int(np.prod(shape)):
        raise GridError(f"{kernel}: ragged grid ({len(rows)} rows for a {shape} grid)")
    index = [{v: j for j, v in enumerate(p)} for p in points]
    rates = np.full(shape, np.nan)
    for dims, rate in rows:
        pos = tuple(index[i][v] for i, v in enumerate(dims))
        if not np.isnan(rates[pos]):
            raise GridError(f"{kernel}: duplicate grid point {dims}")
        rates[pos] = rate
    return TimingGrid(kernel, points, rates)


def parse_timing_table(text: str) -> dict[str, TimingGrid]:
    return {k: _grid_from_rows(k, rows) for k, rows in _parse_rows(text).items()}


def load_timing_grids(path: str | Path) -> dict[str, TimingGrid]:
    return parse_timing_table(Path(path).read_text())


@dataclass(frozen=True)
class CostModel:
    mode: str = "flops"  # "flops" or "time"
    grids: dict[str, TimingGrid] = field(default_factory=dict)
    default_rate: float = DEFAULT_RATE

    def __post_init__(self):
        if self.mode not in ("flops", "time"):
            raise ValueError(f"unknown cost model {self.mode!r}")

    @classmethod
    def flops(cls) -> "CostModel":
        return cls()

    @classmethod
    def from_grids(cls, grids: dict[str, TimingGrid], default_rate: float = DEFAULT_RATE,
                   warn: bool = True) -> "CostModel":
        model = cls("time", dict(grids), default_rate)
        if warn:
            covered = {g.base_kernel for g in grids.values()}
            missing = sorted(set(AXES) - covered)
            if missing:
                warnings.warn(
                    f"no timing grid for {', '.join(missing)}; using default rate {default_rate:g}",
                    stacklevel=2,
                )
        return model

    def grid_for(self, kernel: str, branch: str) -> TimingGrid | None:
        return self.grids.get(f"{kernel}:{branch}") or self.grids.get(kernel)

    def scaled(self, c: float) -> "CostModel":
        """Every rate multiplied by ``c``."""
        if self.mode == "flops":
            return self
        return CostModel("time", {k: g.scaled(c) for k, g in self.grids.items()}, self.default_rate * c)

    # -- estimation --

    def rates(self, kernel: str, branch: str, sizes: np.ndarray) -> np.ndarray:
        grid = self.grid_for(kernel, branch)
        if grid is None:
            return np.full(len(sizes), self.default_rate)
        return grid.interpolate(sizes[:, list(AXES[kernel])])

    def call_costs(self, kernel: str, branch: str, sizes: np.ndarray) -> np.ndarray:
        """Cost of one call for each row of ``sizes`` = (m, k, n)."""
        sizes = np.atleast_2d(np.asarray(sizes))
        flops = catalog.cost_polynomial(kernel, branch).evaluate_batch(sizes)
        if self.mode == "flops" or kernel == "transpose":
            return flops
        return flops / self.rates(kernel, branch, sizes)

    def estimate_call(self, kernel: str, branch: str, sizes: Sequence[int]):
        if self.mode == "flops":
            return catalog.cost_polynomial(kernel, branch)(sizes)
        return float(self.call_costs(kernel, branch, np.asarray([sizes]))[0])

    def variant_cost(self, variant, q: Sequence[int]):
        if self.mode == "flops":
            return variant.symbolic_cost(q)
        return float(self.variant_costs(variant, np.asarray([q]))[0])

    def variant_costs(self, variant, Q: np.ndarray) -> np.ndarray:
        """Cost of a variant on each instance (row) of ``Q``."""
        Q = np.asarray(Q)
        if self.mode == "flops":
            return variant.symbolic_cost.evaluate_batch(Q)
        total = np.zeros(len(Q))
        for call in variant.calls:
            total += self.call_costs(call.kernel, call.branch, Q[:, list(call.dims)])
        return total

    # -- serialization --

    def to_dict(self) -> dict:
        if self.mode == "flops":
            return {"mode": "flops"}
        return {
            "mode": "time",
            "default_rate": self.default_rate,
            "grids": [
                {"kernel": g.kernel, "points": [list(p) for p in g.points], "rates": g.rates.tolist()}
                for _, g in sorted(self.grids.items())
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CostModel":
        if d["mode"] == "flops":
            return cls()
        grids = {
            g["kernel"]: TimingGrid(g["kernel"], tuple(tuple(p) for p in g["points"]), np.asarray(g["rates"]))
            for g in d["grids"]
        }
        return cls("time", grids, float(d["default_rate"]))


def estimate_call(model: CostModel, kernel: str, branch: str, sizes: Sequence[int]):
    return model.estimate_call(kernel, branch, sizes)


# rough single-node peak FLOP/s per kernel for the synthetic generator
_PEAKS = {
    "gemm": 8e10, "symm": 6e10, "trmm": 5e10, "sysymm": 4e10, "trsymm": 3e10,
    "trtrmm": 2e10, "gegesv": 3e10, "gesysv": 2e10, "getrsv": 2e10, "sygesv": 2.5e10,
    "sysysv": 1.5e10, "sytrsv": 1.5e10, "pogesv": 3e10, "posysv": 2e10, "potrsv": 2e10,
    "trsm": 4e10, "trsysv": 2e10, "trtrsv": 1.5e10, "inverse": 1e10,
}


def synthetic_grid_rows(points: Sequence[int] = DEFAULT_POINTS, seed: int = 0,
                        noise: float = 0.05) -> list[tuple[str, tuple[int, ...], float]]:
    """Saturating-rate grid: small sizes run far below peak."""
    rng = np.random.default_rng(seed)
    rows = []
    for kernel in sorted(AXES):
        peak = _PEAKS[kernel]
        for dims in itertools.product(points, repeat=len(AXES[kernel])):
            eff = np.prod([d / (d + 150.0) for d in dims])
            rate = peak * eff * (1.0 + noise * rng.uniform(-1, 1))
            rows.append((kernel, dims, float(f"{rate:.6g}")))
    return rows


def write_timing_table(rows, out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["kernel", "d1", "d2", "d3", "flops_per_sec"])
    for kernel, dims, rate in rows:
        cells = [str(d) for d in dims] + [""] * (3 - len(dims))
        w.writerow([kernel, *cells, repr(rate)])


def synthetic_table(points: Sequence[int] = DEFAULT_POINTS, seed: int = 0) -> str:
    buf = io.StringIO()
    write_timing_table(synthetic_grid_rows(points, seed), buf)
    return buf.getvalue()
