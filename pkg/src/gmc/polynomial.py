"""Sparse multivariate polynomials with exact rational coefficients."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np


class Poly:
    """Polynomial over a fixed number of variables.

    Terms are stored as ``{exponent tuple: Fraction}``; zero coefficients are
    dropped so equal polynomials compare equal.
    """

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Mapping[tuple[int, ...], Fraction | int] | None = None):
        self.nvars = nvars
        clean: dict[tuple[int, ...], Fraction] = {}
        for exps, coef in (terms or {}).items():
            if len(exps) != nvars:
                raise ValueError(f"exponent {exps} does not match {nvars} variables")
            coef = Fraction(coef)
            if coef:
                clean[tuple(exps)] = clean.get(tuple(exps), Fraction(0)) + coef
        self.terms = {e: c for e, c in sorted(clean.items(), reverse=True) if c}

    @classmethod
    def term(cls, coef, exps: Sequence[int]) -> "Poly":
        return cls(len(exps), {tuple(exps): Fraction(coef)})

    @classmethod
    def zero(cls, nvars: int) -> "Poly":
        return cls(nvars)

    def __add__(self, other: "Poly") -> "Poly":
        if self.nvars != other.nvars:
            raise ValueError("variable count mismatch")
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, Fraction(0)) + c
        return Poly(self.nvars, terms)

    def __mul__(self, scalar) -> "Poly":
        s = Fraction(scalar)
        return Poly(self.nvars, {e: c * s for e, c in self.terms.items()})

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, Poly) and self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, tuple(self.terms.items())))

    def __bool__(self) -> bool:
        return bool(self.terms)

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def substitute(self, targets: Sequence[int], nvars: int) -> "Poly":
        """Rename variable i to variable ``targets[i]`` of an ``nvars`` ring."""
        out: dict[tuple[int, ...], Fraction] = {}
        for exps, coef in self.terms.items():
            new = [0] * nvars
            for var, power in enumerate(exps):
                if power:
                    new[targets[var]] += power
            key = tuple(new)
            out[key] = out.get(key, Fraction(0)) + coef
        return Poly(nvars, out)

    def __call__(self, values: Sequence) -> Fraction:
        total = Fraction(0)
        for exps, coef in self.terms.items():
            prod = coef
            for v, p in zip(values, exps):
                if p:
                    prod *= Fraction(v) ** p
            total += prod
        return total

    @property
    def denominator(self) -> int:
        return math.lcm(*(c.denominator for c in self.terms.values())) if self.terms else 1

    def evaluate_batch(self, values: np.ndarray) -> np.ndarray:
        """Evaluate at each row of ``values`` (float result).

        Integer sizes are evaluated on integer numerators (scaled by the
        common denominator), so the only rounding is the final division.
        """
        values = np.asarray(values)
        den = self.denominator
        if np.issubdtype(values.dtype, np.integer) and len(values):
            top = [int(x) for x in np.abs(values).max(axis=0)]
            bound = sum(
                abs(int(c * den)) * math.prod(t**p for t, p in zip(top, e))
                for e, c in self.terms.items()
            )
            # int64 while the numerator sum provably fits, Python ints beyond
            dtype = np.int64 if bound < 2**62 else object
            acc = np.zeros(values.shape[0], dtype=dtype)
            cols = values.astype(dtype)
            for exps, coef in self.terms.items():
                t = np.full(values.shape[0], int(coef * den), dtype=dtype)
                for var, p in enumerate(exps):
                    if p:
                        t = t * cols[:, var] ** p
                acc = acc + t
            return np.array([float(Fraction(int(a), den)) for a in acc]) if dtype is object \
                else acc.astype(np.float64) / den
        acc = np.zeros(values.shape[0])
        for exps, coef in self.terms.items():
            t = np.full(values.shape[0], float(coef))
            for var, p in enumerate(exps):
                if p:
                    t = t * values[:, var] ** p
            acc += t
        return acc

    def sorted_terms(self) -> list[tuple[tuple[int, ...], Fraction]]:
        """Terms by descending total degree, then descending exponents."""
        return sorted(self.terms.items(), key=lambda t: (-sum(t[0]), tuple(-x for x in t[0])))

    def to_terms(self) -> list[dict]:
        return [{"coef": str(c), "exp": list(e)} for e, c in self.sorted_terms()]

    @classmethod
    def from_terms(cls, nvars: int, items: Iterable[Mapping]) -> "Poly":
        return cls(nvars, {tuple(t["exp"]): Fraction(t["coef"]) for t in items})

    def format(self, names: Sequence[str], power: str = "^") -> str:
        if not self.terms:
            return "0"
        parts = []
        for exps, coef in self.sorted_terms():
            factors = []
            for name, p in zip(names, exps):
                if p == 1:
                    factors.append(name)
                elif p:
                    factors.append(f"{name}{power}{p}")
            c = str(coef)
            if factors:
                parts.append("*".join(([c] if coef != 1 else []) + factors))
            else:
                parts.append(c)
        return " + ".join(parts)

    def __repr__(self) -> str:
        names = [f"x{i}" for i in range(self.nvars)]
        return f"Poly({self.format(names)})"
