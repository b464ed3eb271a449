from __future__ import annotations

from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from gmc.frontend import Factor, MatrixDecl, Property, Shape, Structure, UnaryOp

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

MIXED_CHAIN = """
Matrix G1 <General, Singular>;
Matrix L <LowerTri, Invertible>;
Matrix U <UpperTri, Singular>;
Matrix G2 <General, Singular>;
X := G1 * L^-1 * U * G2^T;
"""

CLASS_EXAMPLE = """
Matrix S1 <Symmetric, Singular>;
Matrix G2 <General, Singular>;
Matrix S3 <Symmetric, Singular>;
Matrix L4 <LowerTri, Singular>;
Matrix G5 <General, Singular>;
X := S1 * G2 * S3 * L4 * G5;
"""


def general_chain(n: int) -> str:
    decls = "".join(f"Matrix G{i} <General, Singular>;\n" for i in range(1, n + 1))
    return decls + "X := " + " * ".join(f"G{i}" for i in range(1, n + 1)) + ";\n"


def _valid_factor(structure, prop, op) -> bool:
    if prop is Property.SPD and structure is not Structure.SYMMETRIC:
        return False
    if op.inverted and prop is Property.SINGULAR:
        return False
    return True


@st.composite
def factors(draw, allow_identity: bool = True):
    structure = draw(st.sampled_from(list(Structure)))
    prop = draw(st.sampled_from(list(Property)))
    op = draw(st.sampled_from(list(UnaryOp)))
    if not _valid_factor(structure, prop, op):
        prop = Property.INVERTIBLE if structure is not Structure.SYMMETRIC or op.inverted else prop
        if prop is Property.SPD and structure is not Structure.SYMMETRIC:
            prop = Property.INVERTIBLE
    if not allow_identity and structure.triangular and prop is Property.ORTHOGONAL:
        prop = Property.INVERTIBLE
    return structure, prop, op


@st.composite
def shapes(draw, min_n: int = 2, max_n: int = 6, allow_identity: bool = True):
    """Valid parsed (un-normalized) shapes with distinct matrix names."""
    n = draw(st.integers(min_n, max_n))
    fs = []
    for i in range(1, n + 1):
        s, p, op = draw(factors(allow_identity))
        fs.append(Factor(MatrixDecl(f"M{i}", s, p), op))
    return Shape(tuple(fs))
