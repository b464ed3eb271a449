"""Shape descriptions: parsing, validation, normalization and size classes.

A shape file looks like::

    Matrix G1 <General, Singular>;
    Matrix L  <LowerTri, Invertible>;
    X := G1 * L^-1;

Each operand of the product is an independent factor, even when the same
matrix name appears twice.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np


class Structure(str, enum.Enum):
    GENERAL = "General"
    SYMMETRIC = "Symmetric"
    LOWER = "LowerTri"
    UPPER = "UpperTri"

    @property
    def triangular(self) -> bool:
        return self in (Structure.LOWER, Structure.UPPER)

    def flipped(self) -> "Structure":
        """Structure of the transpose."""
        if self is Structure.LOWER:
            return Structure.UPPER
        if self is Structure.UPPER:
            return Structure.LOWER
        return self

    @property
    def letter(self) -> str:
        return {"General": "G", "Symmetric": "S", "LowerTri": "L", "UpperTri": "U"}[self.value]


class Property(str, enum.Enum):
    SINGULAR = "Singular"
    INVERTIBLE = "Invertible"
    SPD = "SPD"
    ORTHOGONAL = "Orthogonal"

    @property
    def invertible(self) -> bool:
        return self is not Property.SINGULAR


class UnaryOp(str, enum.Enum):
    NONE = ""
    TRANSPOSE = "^T"
    INVERSE = "^-1"
    INVERSE_TRANSPOSE = "^-T"

    @property
    def transposed(self) -> bool:
        return self in (UnaryOp.TRANSPOSE, UnaryOp.INVERSE_TRANSPOSE)

    @property
    def inverted(self) -> bool:
        return self in (UnaryOp.INVERSE, UnaryOp.INVERSE_TRANSPOSE)

    @classmethod
    def from_flags(cls, transposed: bool, inverted: bool) -> "UnaryOp":
        if inverted:
            return cls.INVERSE_TRANSPOSE if transposed else cls.INVERSE
        return cls.TRANSPOSE if transposed else cls.NONE


class ShapeError(ValueError):
    """Base class for every problem with a shape description."""


class GrammarError(ShapeError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class UndefinedMatrixError(ShapeError):
    pass


class InvalidFeaturesError(ShapeError):
    pass


class SingularInversionError(ShapeError):
    pass


class DegenerateChainError(ShapeError):
    pass


@dataclass(frozen=True)
class MatrixDecl:
    name: str
    structure: Structure
    prop: Property

    @property
    def square(self) -> bool:
        # any property other than Singular asserts invertibility, hence squareness
        return self.structure is not Structure.GENERAL or self.prop.invertible

    @property
    def identity(self) -> bool:
        return self.structure.triangular and self.prop is Property.ORTHOGONAL


@dataclass(frozen=True)
class Factor:
    """One operand of the chain: a declared matrix with a unary operator."""

    decl: MatrixDecl
    op: UnaryOp = UnaryOp.NONE

    @property
    def square(self) -> bool:
        return self.decl.square or self.op.inverted

    def __str__(self) -> str:
        return f"{self.decl.name}{self.op.value}"


def validate_decl(decl: MatrixDecl) -> None:
    if decl.prop is Property.SPD and decl.structure is not Structure.SYMMETRIC:
        raise InvalidFeaturesError(
            f"matrix {decl.name}: SPD requires Symmetric structure, got {decl.structure.value}"
        )


def validate_factor(factor: Factor) -> None:
    validate_decl(factor.decl)
    if factor.op.inverted and factor.decl.prop is Property.SINGULAR:
        raise SingularInversionError(f"cannot invert singular matrix {factor.decl.name}")


@dataclass(frozen=True)
class Shape:
    factors: tuple[Factor, ...]
    lhs: str = "X"
    normalized: bool = field(default=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        for f in self.factors:
            validate_factor(f)

    @property
    def n(self) -> int:
        return len(self.factors)

    @property
    def size_symbols(self) -> list[str]:
        return [f"q{i}" for i in range(self.n + 1)]

    @property
    def classes(self) -> list[list[int]]:
        return equivalence_classes(self)

    @property
    def class_of(self) -> list[int]:
        """Map each size index to the smallest index of its class."""
        rep = list(range(self.n + 1))
        for cls in self.classes:
            for i in cls:
                rep[i] = cls[0]
        return rep

    @property
    def n_square(self) -> int:
        return sum(f.square for f in self.factors)

    def decls(self) -> list[MatrixDecl]:
        seen: dict[str, MatrixDecl] = {}
        for f in self.factors:
            seen.setdefault(f.decl.name, f.decl)
        return list(seen.values())

    def __str__(self) -> str:
        return " * ".join(str(f) for f in self.factors)


def format_shape(shape: Shape) -> str:
    """Render a shape back into the input grammar."""
    lines = [
        f"Matrix {d.name} <{d.structure.value}, {d.prop.value}>;" for d in shape.decls()
    ]
    lines.append(f"{shape.lhs} := {shape};")
    return "\n".join(lines) + "\n"


# --- lexer / parser -------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<assign>:=)
  | (?P<op>\^-T|\^-1|\^T)
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*)
  | (?P<punct>[<>,;*])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str) -> Iterator[Token]:
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise GrammarError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        value = m.group()
        if kind not in ("ws", "comment"):
            yield Token(kind, value, line, pos - line_start + 1)
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = pos + value.rindex("\n") + 1
        pos = m.end()
    yield Token("eof", "", line, pos - line_start + 1)


class _Parser:
    def __init__(self, text: str):
        self.tokens = list(tokenize(text))
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def fail(self, expected: str):
        t = self.tok
        found = t.text or "end of input"
        raise GrammarError(f"expected {expected}, found {found!r}", t.line, t.column)

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.tok
        if t.kind != kind or (text is not None and t.text != text):
            self.fail(repr(text) if text else kind)
        self.i += 1
        return t

    def enum_value(self, enum_cls, what: str):
        t = self.expect("ident")
        try:
            return enum_cls(t.text)
        except ValueError:
            options = ", ".join(e.value for e in enum_cls if e.value)
            raise GrammarError(f"unknown {what} {t.text!r} (one of {options})", t.line, t.column)

    def program(self) -> Shape:
        decls: dict[str, MatrixDecl] = {}
        while self.tok.kind == "ident" and self.tok.text == "Matrix":
            start = self.tok
            self.i += 1
            name = self.expect("ident").text
            self.expect("punct", "<")
            structure = self.enum_value(Structure, "structure")
            self.expect("punct", ",")
            prop = self.enum_value(Property, "property")
            self.expect("punct", ">")
            self.expect("punct", ";")
            if name in decls:
                raise GrammarError(f"matrix {name} defined twice", start.line, start.column)
            decl = MatrixDecl(name, structure, prop)
            validate_decl(decl)
            decls[name] = decl
        if not decls:
            self.fail("'Matrix' definition")
        lhs = self.expect("ident").text
        self.expect("assign")
        factors = [self.operand(decls)]
        while self.tok.kind == "punct" and self.tok.text == "*":
            self.i += 1
            factors.append(self.operand(decls))
        end = self.expect("punct", ";")
        self.expect("eof")
        if len(factors) < 2:
            raise GrammarError("a chain needs at least two operands", end.line, end.column)
        return Shape(tuple(factors), lhs=lhs)

    def operand(self, decls: dict[str, MatrixDecl]) -> Factor:
        t = self.expect("ident")
        if t.text not in decls:
            raise UndefinedMatrixError(f"{t.line}:{t.column}: matrix {t.text!r} is not defined")
        op = UnaryOp.NONE
        if self.tok.kind == "op":
            op = UnaryOp(self.tok.text)
            self.i += 1
        factor = Factor(decls[t.text], op)
        validate_factor(factor)
        return factor


def parse(text: str) -> Shape:
    """Parse a shape description. The result is not normalized."""
    return _Parser(text).program()


# --- normalization --------------------------------------------------------


def normalize(shape: Shape) -> Shape:
    factors = []
    for f in shape.factors:
        d, op = f.decl, f.op
        if d.identity:
            continue
        transposed, inverted = op.transposed, op.inverted
        if d.prop is Property.ORTHOGONAL and inverted:
            inverted, transposed = False, not transposed
        if d.structure is Structure.SYMMETRIC:
            transposed = False
        factors.append(Factor(d, UnaryOp.from_flags(transposed, inverted)))
    if not factors:
        raise DegenerateChainError("chain reduces to the identity")
    return Shape(tuple(factors), lhs=shape.lhs, normalized=True)


def equivalence_classes(shape: Shape) -> list[list[int]]:
    """Partition of size indices 0..n forced equal by square factors."""
    parent = list(range(shape.n + 1))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, f in enumerate(shape.factors, start=1):
        if f.square:
            a, b = find(i - 1), find(i)
            if a != b:
                parent[max(a, b)] = min(a, b)
    groups: dict[int, list[int]] = {}
    for i in range(shape.n + 1):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values())


# --- instances ------------------------------------------------------------


def broadcast_classes(classes: Sequence[Sequence[int]], values: np.ndarray) -> np.ndarray:
    """Expand per-class values (last axis) to per-size values."""
    values = np.asarray(values)
    n_sizes = sum(len(c) for c in classes)
    out = np.empty(values.shape[:-1] + (n_sizes,), dtype=values.dtype)
    for j, cls in enumerate(classes):
        out[..., list(cls)] = values[..., j : j + 1]
    return out


def sample_instances(
    classes: Sequence[Sequence[int]],
    count: int,
    lo: int = 2,
    hi: int = 1000,
    rng: np.random.Generator | int | None = None,
) -> np.ndarray:
    """Draw `count` instances, one uniform integer in [lo, hi] per class."""
    if lo < 1 or hi < lo:
        raise ValueError(f"need 1 <= lo <= hi, got lo={lo}, hi={hi}")
    rng = np.random.default_rng(rng)
    per_class = rng.integers(lo, hi, size=(count, len(classes)), endpoint=True)
    return broadcast_classes(classes, per_class)


def sample_instance(classes, lo: int, hi: int, seed=None) -> tuple[int, ...]:
    return tuple(int(x) for x in sample_instances(classes, 1, lo, hi, seed)[0])


def check_instance(shape: Shape, q: Sequence[int]) -> None:
    if len(q) != shape.n + 1:
        raise ValueError(f"expected {shape.n + 1} sizes, got {len(q)}")
    for cls in shape.classes:
        vals = {q[i] for i in cls}
        if len(vals) > 1:
            names = ", ".join(f"q{i}" for i in cls)
            raise ValueError(f"sizes {names} must be equal, got {sorted(vals)}")
    if any(int(x) < 1 for x in q):
        raise ValueError("sizes must be positive")
