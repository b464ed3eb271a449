"""Plan documents, the run-time dispatch rule, and template-driven rendering."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .costmodel import CostModel
from .frontend import Shape, check_instance, format_shape, normalize, parse
from .polynomial import Poly
from .variants import KernelCall, OperandRef, Variant, build_variant, format_tree, parse_tree

PLAN_VERSION = 1


class PlanError(ValueError):
    pass


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class Plan:
    shape: Shape
    variants: tuple[Variant, ...]
    model: CostModel = field(default_factory=CostModel.flops)
    info: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "variants", tuple(self.variants))
        if not self.variants:
            raise PlanError("a plan needs at least one variant")
        trees = [v.tree for v in self.variants]
        if len(set(trees)) != len(trees):
            raise PlanError("duplicate variants in plan")

    @property
    def costs(self) -> list[Poly]:
        return [v.symbolic_cost for v in self.variants]

    def to_dict(self) -> dict:
        s = self.shape
        return {
            "version": PLAN_VERSION,
            "shape": {
                "source": format_shape(s),
                "n": s.n,
                "sizes": s.size_symbols,
                "classes": s.classes,
            },
            "cost_model": self.model.to_dict(),
            "dispatch": {"rule": "argmin", "ties": "lowest-index"},
            "info": self.info,
            "variants": [_variant_dict(v) for v in self.variants],
        }

    def __eq__(self, other) -> bool:
        return isinstance(other, Plan) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(emit_plan(self))


def _ref_dict(r: OperandRef | None) -> dict | None:
    if r is None:
        return None
    return {
        "buffer": r.buffer,
        "structure": r.structure.value,
        "property": r.prop.value,
        "transpose": r.transpose,
        "inverse": r.inverse,
    }


def _call_dict(c: KernelCall) -> dict:
    return {
        "kernel": c.kernel,
        "side": c.side,
        "branch": c.branch,
        "triplet": list(c.triplet) if c.triplet else None,
        "left": _ref_dict(c.left),
        "right": _ref_dict(c.right),
        "dims": list(c.dims),
        "out": c.out,
        "out_structure": c.out_structure.value,
        "out_property": c.out_prop.value,
        "out_size": [c.out_rows, c.out_cols],
        "pending": {"transpose": c.result_transpose, "inverse": c.result_inverse},
    }


def _variant_dict(v: Variant) -> dict:
    return {
        "tree": format_tree(v.tree),
        "result": v.result,
        "calls": [_call_dict(c) for c in v.calls],
        "cost": v.symbolic_cost.to_terms(),
    }


def build_plan(shape: Shape, variants: Sequence[Variant], model: CostModel | None = None,
               info: dict | None = None) -> Plan:
    return Plan(shape, tuple(variants), model or CostModel.flops(), dict(info or {}))


def emit_plan(plan: Plan) -> str:
    """Deterministic JSON text (sorted keys, one trailing newline)."""
    return json.dumps(plan.to_dict(), indent=1, sort_keys=True) + "\n"


def load_plan(text: str) -> Plan:
    """Parse a plan document; the variants are rebuilt and checked against it."""
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise PlanError(f"plan is not valid JSON: {e}") from e
    version = d.get("version") if isinstance(d, dict) else None
    if version != PLAN_VERSION:
        raise PlanError(f"unsupported plan version {version!r} (expected {PLAN_VERSION})")
    try:
        shape = normalize(parse(d["shape"]["source"]))
        model = CostModel.from_dict(d["cost_model"])
        variants = []
        for vd in d["variants"]:
            v = build_variant(parse_tree(vd["tree"]), shape)
            if _variant_dict(v) != vd:
                raise PlanError(f"variant {vd['tree']} does not match its rebuilt calls or cost")
            variants.append(v)
        plan = Plan(shape, tuple(variants), model, d.get("info", {}))
    except (KeyError, TypeError) as e:
        raise PlanError(f"malformed plan: {e!r}") from e
    if plan.to_dict() != d:
        raise PlanError("plan does not round-trip; was it edited by hand?")
    return plan


def read_plan(path: str | Path) -> Plan:
    return load_plan(Path(path).read_text())


# --- dispatch -------------------------------------------------------------


def variant_costs_at(plan: Plan, q: Sequence[int]) -> list:
    check_instance(plan.shape, q)
    if plan.model.mode == "flops":
        return [p(q) for p in plan.costs]
    return [plan.model.variant_cost(v, q) for v in plan.variants]


def dispatch(plan: Plan, q: Sequence[int]) -> int:
    """Index of the cheapest variant at ``q``; the lowest index wins ties."""
    costs = variant_costs_at(plan, q)
    best = 0
    for i, c in enumerate(costs):
        if c < costs[best]:
            best = i
    return best


def dispatch_batch(plan: Plan, Q: np.ndarray) -> np.ndarray:
    """Vectorized dispatch; np.argmin already returns the first minimum."""
    Q = np.asarray(Q)
    table = np.vstack([plan.model.variant_costs(v, Q) for v in plan.variants])
    return np.argmin(table, axis=0)


# --- rendering ------------------------------------------------------------


def load_profile(name_or_path: str | Path) -> dict:
    """A bundled profile by name (``default``) or a ``.profile`` file path."""
    p = Path(name_or_path)
    if p.suffix == ".profile" or p.exists():
        text = p.read_text()
    else:
        try:
            text = resources.files("gmc.profiles").joinpath(f"{name_or_path}.profile").read_text()
        except FileNotFoundError as e:
            raise ProfileError(f"no bundled profile named {name_or_path!r}") from e
    prof = json.loads(text)
    missing = [k for k in _PROFILE_KEYS if k not in prof]
    if missing:
        raise ProfileError(f"profile lacks {', '.join(missing)}")
    return prof


_PROFILE_KEYS = (
    "comment", "indent", "power", "alloc", "free", "cost_begin", "cost_return",
    "variant_begin", "variant_return", "dispatch_begin", "dispatch_cost",
    "dispatch_select", "dispatch_case", "dispatch_single", "kernels",
)


def _op_flag(r: OperandRef) -> str:
    return {(False, False): "N", (True, False): "T", (False, True): "I", (True, True): "IT"}[
        (r.transpose, r.inverse)
    ]


def _call_flags(c: KernelCall) -> str:
    flags = []
    if c.side:
        flags.append(f"side={c.side}")
    if c.branch not in ("default", c.side):
        flags.append(f"branch={c.branch}")
    flags.append(f"opA={_op_flag(c.left)}")
    if c.right is not None:
        flags.append(f"opB={_op_flag(c.right)}")
    return ",".join(flags)


def render(plan: Plan, profile: dict | str = "default") -> str:
    """Source text: a cost function and a routine per variant plus a dispatcher."""
    prof = load_profile(profile) if isinstance(profile, (str, Path)) else profile
    templates = prof["kernels"]
    used = sorted({c.kernel for v in plan.variants for c in v.calls})
    missing = [k for k in used if k not in templates]
    if missing:
        raise ProfileError(f"profile has no template for {', '.join(missing)}")

    shape = plan.shape
    ind, cm = prof["indent"], prof["comment"]
    names = shape.size_symbols
    rep = shape.class_of
    sizes = ", ".join(names)
    mats = ", ".join(f"A{i}" for i in range(1, shape.n + 1))
    args = f"{mats}, {sizes}"
    out: list[str] = []

    out.append(f"{cm}generated from:")
    out += [f"{cm}  {line}" for line in format_shape(shape).splitlines()]
    classes = " ".join("{" + ",".join(names[i] for i in c) + "}" for c in shape.classes)
    out.append(f"{cm}size classes: {classes}")
    out.append("")

    for i, v in enumerate(plan.variants):
        expr = v.symbolic_cost.format(names, power=prof["power"])
        out.append(prof["cost_begin"].format(index=i, sizes=sizes))
        out.append(ind + prof["cost_return"].format(expr=expr))
        out.append("")

    for i, v in enumerate(plan.variants):
        out.append(f"{cm}{format_tree(v.tree)}")
        out.append(prof["variant_begin"].format(index=i, args=args))
        for c in v.calls:
            out.append(ind + prof["alloc"].format(
                buf=c.out, rows=names[rep[c.out_rows]], cols=names[rep[c.out_cols]]))
            m, k, n = (names[rep[d]] for d in c.dims)
            out.append(ind + templates[c.kernel].format(
                out=c.out, a=c.left.buffer, b=c.right.buffer if c.right else "",
                m=m, n=n, k=k, flags=_call_flags(c)))
        for c in v.calls:
            if c.out != v.result:
                out.append(ind + prof["free"].format(buf=c.out))
        out.append(ind + prof["variant_return"].format(result=v.result))
        out.append("")

    out.append(prof["dispatch_begin"].format(args=args))
    if len(plan.variants) == 1:
        out.append(ind + prof["dispatch_single"].format(index=0, args=args))
    else:
        for i in range(len(plan.variants)):
            out.append(ind + prof["dispatch_cost"].format(index=i, sizes=sizes))
        costs = ", ".join(f"c{i}" for i in range(len(plan.variants)))
        out.append(ind + prof["dispatch_select"].format(costs=costs))
        for i in range(len(plan.variants)):
            out.append(ind + prof["dispatch_case"].format(index=i, args=args))
    out.append("")
    return "\n".join(out)


def rendered_costs(text: str, profile: dict | str = "default") -> list[str]:
    """Cost expressions of the rendered cost functions, in variant order."""
    prof = load_profile(profile) if isinstance(profile, (str, Path)) else profile
    begin = prof["cost_begin"].split("{index}")[0]
    head, _, tail = prof["cost_return"].partition("{expr}")
    lines = text.splitlines()
    exprs = []
    for i, line in enumerate(lines):
        if line.startswith(begin):
            body = lines[i + 1].strip()
            assert body.startswith(head.strip()) and body.endswith(tail), body
            exprs.append(body[len(head.strip()): len(body) - len(tail)].strip())
    return exprs


def exact_cost(expr: str, q: Sequence[int], power: str = "^") -> Fraction:
    """Evaluate a rendered cost expression exactly (sums of products only)."""
    total = Fraction(0)
    for term in expr.split(" + "):
        value = Fraction(1)
        for factor in term.split("*"):
            base, _, exp = factor.partition(power)
            if base.startswith("q"):
                x = Fraction(q[int(base[1:])])
            else:
                x = Fraction(base)
            value *= x ** int(exp or 1)
        total += value
    return total
