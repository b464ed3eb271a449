from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gmc.frontend import (
    DegenerateChainError,
    GrammarError,
    InvalidFeaturesError,
    Property,
    SingularInversionError,
    Structure,
    UnaryOp,
    UndefinedMatrixError,
    check_instance,
    equivalence_classes,
    format_shape,
    normalize,
    parse,
    sample_instance,
    sample_instances,
)

from .conftest import CLASS_EXAMPLE, MIXED_CHAIN, general_chain, shapes


def test_parse_four_operand_chain():
    s = parse(MIXED_CHAIN)
    assert s.n == 4
    assert [f.op for f in s.factors] == [UnaryOp.NONE, UnaryOp.INVERSE, UnaryOp.NONE, UnaryOp.TRANSPOSE]
    assert [f.decl.name for f in s.factors] == ["G1", "L", "U", "G2"]
    assert s.factors[1].decl.structure is Structure.LOWER


def test_parse_is_whitespace_insensitive_and_allows_comments():
    a = parse("Matrix A<General,Singular>;Matrix B<General,Singular>;X:=A*B^T;")
    b = parse("# two matrices\nMatrix A < General , Singular > ;\n Matrix B <General, Singular>;\nX := A *\n B^T ;")
    assert a == b


def test_duplicate_use_is_independent_operands():
    s = parse("Matrix A <General, Singular>; X := A * A^T * A;")
    assert s.n == 3
    assert s.factors[0].decl is s.factors[1].decl


def test_general_spd_rejected():
    with pytest.raises(InvalidFeaturesError):
        parse("Matrix A <General, SPD>; X := A * A;")


def test_triangular_spd_rejected():
    with pytest.raises(InvalidFeaturesError):
        parse("Matrix A <LowerTri, SPD>; X := A * A;")


def test_inverting_singular_rejected():
    with pytest.raises(SingularInversionError):
        parse("Matrix A <General, Singular>; X := A^-1 * A;")
    with pytest.raises(SingularInversionError):
        parse("Matrix A <LowerTri, Singular>; X := A * A^-T;")


def test_undefined_identifier():
    with pytest.raises(UndefinedMatrixError):
        parse("Matrix A <General, Singular>; X := A * B;")


def test_single_operand_rejected():
    with pytest.raises(GrammarError):
        parse("Matrix A <General, Singular>; X := A;")


@pytest.mark.parametrize("text,line,column", [
    ("Matrix A <General, Singular>\nX := A * A;", 2, 1),
    ("Matrix A <Generall, Singular>; X := A * A;", 1, 11),
    ("Matrix A <General, Singular>;\nX := A * $;", 2, 10),
    ("Matrix A <General, Singular>;\n  X = A * A;", 2, 5),
])
def test_syntax_errors_carry_position(text, line, column):
    with pytest.raises(GrammarError) as e:
        parse(text)
    assert (e.value.line, e.value.column) == (line, column)


def test_normalize_removes_identity():
    s = normalize(parse(
        "Matrix G <General, Singular>; Matrix Q <LowerTri, Orthogonal>; Matrix H <General, Singular>;"
        "X := G * Q^-1 * H;"
    ))
    assert [f.decl.name for f in s.factors] == ["G", "H"]


def test_normalize_operator_rewrites():
    s = normalize(parse(
        "Matrix S <Symmetric, Invertible>; Matrix Q <General, Orthogonal>; Matrix P <Symmetric, Orthogonal>;"
        "X := S^T * S^-T * Q^-1 * Q^-T * P^-1;"
    ))
    assert [f.op for f in s.factors] == [
        UnaryOp.NONE, UnaryOp.INVERSE, UnaryOp.TRANSPOSE, UnaryOp.NONE, UnaryOp.NONE
    ]


def test_all_identity_chain_is_degenerate():
    with pytest.raises(DegenerateChainError):
        normalize(parse("Matrix Q <UpperTri, Orthogonal>; X := Q * Q^T;"))


def test_chain_can_normalize_to_one_matrix():
    s = normalize(parse("Matrix Q <UpperTri, Orthogonal>; Matrix G <General, Singular>; X := Q * G;"))
    assert s.n == 1
    assert s.classes == [[0], [1]]


def test_class_example():
    assert equivalence_classes(normalize(parse(CLASS_EXAMPLE))) == [[0, 1], [2, 3, 4], [5]]


def test_all_general_has_singleton_classes():
    s = parse(general_chain(4))
    assert s.classes == [[0], [1], [2], [3], [4]]


def test_inversion_forces_square():
    s = parse("Matrix G1 <General, Singular>; Matrix G2 <General, Invertible>; Matrix G3 <General, Singular>;"
              "X := G1 * G2^-1 * G3;")
    assert s.classes == [[0], [1, 2], [3]]


def test_sample_respects_classes():
    s = normalize(parse(CLASS_EXAMPLE))
    q = sample_instance(s.classes, 2, 1000, seed=7)
    assert q[0] == q[1] and q[2] == q[3] == q[4]
    check_instance(s, q)
    assert sample_instance(s.classes, 2, 1000, seed=7) == q


def test_sample_degenerate_range():
    s = normalize(parse(CLASS_EXAMPLE))
    assert set(sample_instance(s.classes, 7, 7, seed=1)) == {7}


def test_sample_mean_is_uniform_midpoint():
    s = normalize(parse(CLASS_EXAMPLE))
    Q = sample_instances(s.classes, 10_000, 2, 1000, rng=0)
    for cls in s.classes:
        mean = Q[:, cls[0]].mean()
        assert abs(mean - 501) / 501 < 0.05


def test_sample_rejects_bad_range():
    with pytest.raises(ValueError):
        sample_instances([[0]], 1, 0, 5)
    with pytest.raises(ValueError):
        sample_instances([[0]], 1, 5, 4)


def test_check_instance_violation():
    s = normalize(parse(CLASS_EXAMPLE))
    with pytest.raises(ValueError):
        check_instance(s, (3, 4, 5, 5, 5, 6))


@given(shapes())
def test_round_trip(shape):
    assert parse(format_shape(shape)) == shape


@given(shapes())
def test_normalize_idempotent_and_shrinking(shape):
    try:
        once = normalize(shape)
    except DegenerateChainError:
        assert all(f.decl.identity for f in shape.factors)
        return
    assert normalize(once) == once
    assert once.n <= shape.n
    assert not any(f.decl.identity for f in once.factors)


@given(shapes(allow_identity=False))
def test_class_count_formula(shape):
    s = normalize(shape)
    assert len(s.classes) == s.n - s.n_square + 1
    for i, f in enumerate(s.factors, start=1):
        if f.square:
            assert s.class_of[i - 1] == s.class_of[i]


@given(shapes(allow_identity=False), st.integers(0, 2**32 - 1), st.integers(1, 50), st.integers(0, 50))
def test_samples_satisfy_constraints(shape, seed, lo, span):
    s = normalize(shape)
    Q = sample_instances(s.classes, 20, lo, lo + span, seed)
    assert Q.min() >= lo and Q.max() <= lo + span
    for q in Q:
        check_instance(s, q)


def test_property_enum_invertibility():
    assert not Property.SINGULAR.invertible
    assert all(p.invertible for p in (Property.INVERTIBLE, Property.SPD, Property.ORTHOGONAL))


def test_broadcast_keeps_dtype():
    s = normalize(parse(CLASS_EXAMPLE))
    Q = sample_instances(s.classes, 3, rng=0)
    assert np.issubdtype(Q.dtype, np.integer) and Q.shape == (3, 6)
