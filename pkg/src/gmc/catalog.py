"""Kernel catalog: association patterns, FLOP cost formulas, feature inference.

Cost polynomials are written over three variables ``(m, k, n)``: the left
operand of the computed association is ``m x k`` and the right one is
``k x n``. Kernels with a square operand use only ``m`` and ``n`` in the
same way as the usual BLAS/LAPACK conventions, so e.g. ``symm`` with the
symmetric matrix on the left costs ``2 m^2 n``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .frontend import Property, Structure
from .polynomial import Poly

F = Fraction
LEFT, RIGHT = "left", "right"

PRODUCT_KERNELS = ("gemm", "symm", "trmm", "sysymm", "trsymm", "trtrmm")
SOLVE_KERNELS = (
    "gegesv", "gesysv", "getrsv",
    "sygesv", "sysysv", "sytrsv",
    "pogesv", "posysv", "potrsv",
    "trsm", "trsysv", "trtrsv",
)
PSEUDO_KERNELS = ("inverse", "transpose")


class KernelError(LookupError):
    """No kernel matches an association (means the catalog is incomplete)."""


@dataclass(frozen=True)
class Features:
    """Features of an operand value.

    ``structure`` and ``prop`` describe the stored matrix; the pending flags
    say which operators still have to be applied to it.
    """

    structure: Structure
    prop: Property
    pending_transpose: bool = False
    pending_inverse: bool = False

    @property
    def effective_structure(self) -> Structure:
        s = self.structure
        return s.flipped() if self.pending_transpose else s


@dataclass(frozen=True)
class CostForm:
    """Cost class of one kernel branch.

    ``kind`` is ``"I"`` (beta*a*b*c), ``"IIa"`` (b1*a^3 + b2*a^2*c) or
    ``"IIb"`` (b1*c^3 + b2*c^2*a).
    """

    kernel: str
    branch: str
    kind: str
    betas: tuple[Fraction, ...]


@dataclass(frozen=True)
class KernelSpec:
    id: str
    computation: str
    associations: tuple[str, ...]
    costs: dict[str, Poly]
    forms: dict[str, CostForm] = field(default_factory=dict)
    transposable: tuple[str, ...] = ()
    cost_text: str = ""

    @property
    def pseudo(self) -> bool:
        return self.id in PSEUDO_KERNELS

    @property
    def solve(self) -> bool:
        return self.id in SOLVE_KERNELS


def _p(**terms) -> Poly:
    # keys like m3, m2n, mkn, n3, mn2
    exps = {
        "mkn": (1, 1, 1), "m3": (3, 0, 0), "n3": (0, 0, 3),
        "m2n": (2, 0, 1), "mn2": (1, 0, 2),
    }
    return Poly(3, {exps[k]: v for k, v in terms.items()})


def _type1(kernel, branch, poly: Poly) -> CostForm:
    (coef,) = poly.terms.values()
    return CostForm(kernel, branch, "I", (coef,))


def _spec(id, computation, associations, costs, transposable=(), kinds=None, cost_text=""):
    forms = {}
    for branch, poly in costs.items():
        kind = (kinds or {}).get(branch, "I")
        if kind == "I":
            forms[branch] = _type1(id, branch, poly)
        elif kind == "IIa":
            forms[branch] = CostForm(id, branch, kind, (poly.terms[(3, 0, 0)], poly.terms[(2, 0, 1)]))
        else:
            forms[branch] = CostForm(id, branch, kind, (poly.terms[(0, 0, 3)], poly.terms[(1, 0, 2)]))
    return KernelSpec(id, computation, tuple(associations), dict(costs), forms, tuple(transposable), cost_text)


_SPECS = [
    _spec("gemm", "C := Op(A) Op(B)", ["Op(G1) Op(G2)"],
          {"default": _p(mkn=2)}, ("left", "right"), cost_text="2mkn"),
    _spec("symm", "C := A Op(B), A symmetric", ["S Op(G)", "Op(G) S"],
          {LEFT: _p(m2n=2), RIGHT: _p(mn2=2)}, ("general",),
          cost_text="2m^2n if A is on the left; otherwise 2mn^2"),
    _spec("trmm", "B := Op(A) B or B := B Op(A), A triangular", ["Op(L) Op(G)", "Op(G) Op(L)"],
          {LEFT: _p(m2n=1), RIGHT: _p(mn2=1)}, ("triangular",),
          cost_text="m^2n if A is on the left; otherwise mn^2"),
    _spec("sysymm", "C := A B, A and B symmetric", ["S1 S2"],
          {"default": _p(m3=2)}, cost_text="2m^3"),
    _spec("trsymm", "B := Op(A) B or B := B Op(A), A triangular, B symmetric", ["Op(L) S", "S Op(L)"],
          {"default": _p(m3=1)}, ("triangular",), cost_text="m^3"),
    _spec("trtrmm", "C := Op(A) Op(B), A and B triangular", ["Op(L1) Op(L2)"],
          {"same": _p(m3=F(1, 3)), "opposite": _p(m3=F(2, 3))}, ("left", "right"),
          cost_text="m^3/3 if Op(A) and Op(B) have the same triangularity; otherwise 2m^3/3"),
    _spec("gegesv", "solve Op(A) X = B or X Op(A) = B, A and B general",
          ["Op(G1^-1) Op(G2)", "Op(G2) Op(G1^-1)"],
          {LEFT: _p(m3=F(2, 3), m2n=2), RIGHT: _p(n3=F(2, 3), mn2=2)}, ("coefficient",),
          kinds={LEFT: "IIa", RIGHT: "IIb"},
          cost_text="2m^3/3 + 2m^2n if A is on the left; otherwise 2n^3/3 + 2n^2m"),
    _spec("gesysv", "solve Op(A) X = B or X Op(A) = B, A general, B symmetric",
          ["Op(G^-1) S", "S Op(G^-1)"],
          {"default": _p(m3=F(8, 3))}, ("coefficient",), cost_text="8m^3/3"),
    _spec("getrsv", "solve Op(A) X = B or X Op(A) = B, A general, B triangular",
          ["Op(G^-1) Op(L)", "Op(L) Op(G^-1)"],
          {"fast": _p(m3=2), "slow": _p(m3=F(8, 3))}, ("coefficient",),
          cost_text="2m^3 if A is on the left and B is lower or A is on the right and B is upper; "
                    "otherwise 8m^3/3"),
    _spec("sygesv", "solve A X = B or X A = B, A symmetric, B general",
          ["S^-1 Op(G)", "Op(G) S^-1"],
          {LEFT: _p(m3=F(1, 3), m2n=2), RIGHT: _p(n3=F(1, 3), mn2=2)},
          kinds={LEFT: "IIa", RIGHT: "IIb"},
          cost_text="m^3/3 + 2m^2n if A is on the left; otherwise n^3/3 + 2mn^2"),
    _spec("sysysv", "solve A X = B or X A = B, A and B symmetric", ["S1^-1 S2", "S2 S1^-1"],
          {"default": _p(m3=F(7, 3))}, cost_text="7m^3/3"),
    _spec("sytrsv", "solve A X = B or X A = B, A symmetric, B triangular",
          ["S^-1 Op(L)", "Op(L) S^-1"],
          {"default": _p(m3=F(7, 3))}, cost_text="7m^3/3"),
    _spec("pogesv", "solve A X = B or X A = B, A SPD, B general",
          ["P^-1 Op(G)", "Op(G) P^-1"],
          {LEFT: _p(m3=F(1, 3), m2n=2), RIGHT: _p(n3=F(1, 3), mn2=2)},
          kinds={LEFT: "IIa", RIGHT: "IIb"},
          cost_text="m^3/3 + 2m^2n if A is on the left; otherwise n^3/3 + 2mn^2"),
    _spec("posysv", "solve A X = B or X A = B, A SPD, B symmetric", ["P^-1 S", "S P^-1"],
          {"default": _p(m3=F(7, 3))}, cost_text="7m^3/3"),
    _spec("potrsv", "solve A X = B or X A = B, A SPD, B triangular",
          ["P^-1 Op(L)", "Op(L) P^-1"],
          {"fast": _p(m3=F(5, 3)), "slow": _p(m3=F(7, 3))},
          cost_text="5m^3/3 if A is on the left and B is lower or A is on the right and B is upper; "
                    "otherwise 7m^3/3"),
    _spec("trsm", "solve Op(A) X = B or X Op(A) = B, A triangular, B general",
          ["Op(L^-1) Op(G)", "Op(G) Op(L^-1)"],
          {LEFT: _p(m2n=1), RIGHT: _p(mn2=1)}, ("coefficient",),
          cost_text="m^2n if A is on the left; otherwise mn^2"),
    _spec("trsysv", "solve Op(A) X = B or X Op(A) = B, A triangular, B symmetric",
          ["Op(L^-1) S", "S Op(L^-1)"],
          {"default": _p(m3=1)}, ("coefficient",), cost_text="m^3"),
    _spec("trtrsv", "solve Op(A) X = B or X Op(A) = B, A and B triangular",
          ["Op(L1^-1) Op(L2)", "Op(L2) Op(L1^-1)"],
          {"same": _p(m3=F(1, 3)), "opposite": _p(m3=1)}, ("coefficient",),
          cost_text="m^3/3 if Op(A) and B have the same triangularity; otherwise m^3"),
    # forced by an operator left pending on the end result; m x m operand
    _spec("inverse", "X := Op(A)^-1 (LU based)", [], {"default": _p(m3=2)}, cost_text="2m^3"),
]

KERNELS: dict[str, KernelSpec] = {s.id: s for s in _SPECS}
KERNELS["transpose"] = KernelSpec(
    "transpose", "X := A^T", (), {"default": Poly(3)}, {}, (), "0"
)


def _kind(structure: Structure) -> str:
    if structure is Structure.GENERAL:
        return "ge"
    if structure is Structure.SYMMETRIC:
        return "sy"
    return "tr"


def kernel_for(left: Features, right: Features) -> tuple[str, str | None]:
    """Most specialized kernel for ``left * right`` and the side of the
    structured (product) or coefficient (solve) operand."""
    if left.pending_inverse and right.pending_inverse:
        raise KernelError("both operands inverted; inversion must be propagated first")
    ls, rs = left.effective_structure, right.effective_structure
    lk, rk = _kind(ls), _kind(rs)
    if not (left.pending_inverse or right.pending_inverse):
        pair = {lk, rk}
        if pair == {"ge"}:
            return "gemm", None
        if pair == {"ge", "sy"}:
            return "symm", LEFT if lk == "sy" else RIGHT
        if pair == {"ge", "tr"}:
            return "trmm", LEFT if lk == "tr" else RIGHT
        if pair == {"sy"}:
            return "sysymm", None
        if pair == {"sy", "tr"}:
            return "trsymm", LEFT if lk == "tr" else RIGHT
        if pair == {"tr"}:
            return "trtrmm", None
        raise KernelError(f"no product kernel for {ls.value} x {rs.value}")
    if left.pending_inverse:
        coef, rhs, side = left, right, LEFT
    else:
        coef, rhs, side = right, left, RIGHT
    ck = _kind(coef.effective_structure)
    if ck == "sy" and coef.prop is Property.SPD:
        ck = "po"
    rkind = _kind(rhs.effective_structure)
    name = "trsm" if (ck, rkind) == ("tr", "ge") else f"{ck}{rkind}sv"
    if name not in KERNELS:
        raise KernelError(f"no solve kernel for {ck}/{rkind}")
    return name, side


def needs_transpose_rewrite(kernel: str, left: Features, right: Features) -> bool:
    """True when the kernel cannot take the association's transposition pattern."""
    if kernel == "trmm":
        general = left if left.structure is Structure.GENERAL else right
        return general.pending_transpose
    if kernel in SOLVE_KERNELS:
        rhs = right if left.pending_inverse else left
        return rhs.pending_transpose and rhs.structure is not Structure.SYMMETRIC
    return False


def cost_branch(kernel: str, side: str | None, left: Features, right: Features) -> str:
    if kernel in ("symm", "trmm", "trsm", "gegesv", "sygesv", "pogesv"):
        return side
    if kernel in ("trtrmm", "trtrsv"):
        same = left.effective_structure is right.effective_structure
        return "same" if same else "opposite"
    if kernel in ("getrsv", "potrsv"):
        rhs = right if side == LEFT else left
        tri = rhs.effective_structure
        fast = (side == LEFT and tri is Structure.LOWER) or (side == RIGHT and tri is Structure.UPPER)
        return "fast" if fast else "slow"
    return "default"


def cost_polynomial(kernel: str, branch: str = "default") -> Poly:
    return KERNELS[kernel].costs[branch]


def infer_result_features(left: Features, right: Features, square: bool) -> Features:
    """Structure and property of ``left * right`` (both values, operators applied).

    ``square`` says whether the result is necessarily square.
    """
    ls, rs = left.effective_structure, right.effective_structure
    structure = ls if ls.triangular and ls is rs else Structure.GENERAL
    if Property.SINGULAR in (left.prop, right.prop) or not square:
        prop = Property.SINGULAR
    elif left.prop is Property.ORTHOGONAL and right.prop is Property.ORTHOGONAL:
        prop = Property.ORTHOGONAL
    else:
        prop = Property.INVERTIBLE
    if structure.triangular and prop is Property.ORTHOGONAL:
        prop = Property.INVERTIBLE  # unreachable with valid inputs; keeps decls valid
    return Features(structure, prop)


# --- alpha analysis ------------------------------------------------------


def pair_alpha(te: CostForm, to: CostForm) -> Fraction:
    """Constant alpha with t_e <= alpha * t_o for two cost forms sharing a factor."""
    e1 = te.kind == "I"
    o1 = to.kind == "I"
    if e1 and o1:
        return te.betas[0] / to.betas[0]
    if e1:
        b1 = te.betas[0]
        b2, b3 = to.betas
        # subcases give b1/(b2+b3) or b1/b3; the latter dominates
        return max(b1 / (b2 + b3), b1 / b3)
    if o1:
        b1, b2 = te.betas
        return (b1 + b2) / to.betas[0]
    b1, b2 = te.betas
    b3, b4 = to.betas
    return b1 / b3 + b2 / b4


def cost_forms(kernels: Iterable[str] | None = None) -> list[CostForm]:
    ids = [k for k in (kernels or KERNELS) if k not in PSEUDO_KERNELS]
    return [f for k in ids for f in KERNELS[k].forms.values()]


def max_alpha(forms: Iterable[CostForm] | Iterable[str] | None = None) -> Fraction:
    """Largest alpha over all ordered pairs of cost forms.

    Accepts cost forms or kernel ids; ``None`` means the full catalog.
    """
    forms = list(forms) if forms is not None else None
    if forms is None or (forms and isinstance(forms[0], str)):
        forms = cost_forms(forms)
    if not forms:
        return Fraction(0)
    return max(pair_alpha(a, b) for a, b in itertools.product(forms, repeat=2))


def dump_catalog() -> list[dict]:
    """Machine-readable catalog, one record per kernel."""
    names = ["m", "k", "n"]
    out = []
    for k in KERNELS.values():
        out.append({
            "id": k.id,
            "computation": k.computation,
            "associations": list(k.associations),
            "cost": {b: p.format(names) for b, p in k.costs.items()},
            "cost_text": k.cost_text,
            "type": {b: f.kind for b, f in k.forms.items()},
            "transposable": list(k.transposable),
            "pseudo": k.pseudo,
        })
    return out
