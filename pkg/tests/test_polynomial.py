from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gmc.polynomial import Poly

F = Fraction


def test_zero_terms_dropped():
    p = Poly(2, {(1, 0): F(1), (0, 1): F(0)})
    assert p.terms == {(1, 0): F(1)}
    assert not Poly.zero(3)


def test_add_and_scale():
    a = Poly(2, {(2, 0): F(1, 3)})
    b = Poly(2, {(2, 0): F(2, 3), (1, 1): 2})
    assert a + b == Poly(2, {(2, 0): 1, (1, 1): 2})
    assert (a * 3) == Poly(2, {(2, 0): 1})


def test_exact_evaluation():
    p = Poly(2, {(3, 0): F(5, 3), (2, 1): 2})
    assert p((100, 40)) == F(5, 3) * 100**3 + 2 * 100**2 * 40


def test_substitute_merges_variables():
    # m*k*n with (m, k, n) -> (x0, x1, x0)
    p = Poly(3, {(1, 1, 1): 2})
    assert p.substitute([0, 1, 0], 2) == Poly(2, {(2, 1): 2})


def test_terms_round_trip_and_canonical_order():
    p = Poly(3, {(0, 0, 1): 1, (3, 0, 0): F(2, 3), (1, 1, 1): 4})
    terms = p.to_terms()
    assert [t["exp"] for t in terms] == [[3, 0, 0], [1, 1, 1], [0, 0, 1]]
    assert terms[0]["coef"] == "2/3"
    assert Poly.from_terms(3, terms) == p


def test_format():
    p = Poly(2, {(3, 0): F(5, 3), (2, 1): 2, (0, 0): 1})
    assert p.format(["m", "n"]) == "5/3*m^3 + 2*m^2*n + 1"
    assert p.format(["m", "n"], power="**") == "5/3*m**3 + 2*m**2*n + 1"


def test_batch_matches_exact_for_integers():
    p = Poly(3, {(3, 0, 0): F(1, 3), (1, 1, 1): 2, (0, 2, 1): F(7, 3)})
    Q = np.array([[1, 2, 3], [999, 1000, 17], [2, 2, 2]])
    got = p.evaluate_batch(Q)
    for row, g in zip(Q, got):
        assert g == float(p(tuple(int(x) for x in row)))


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3), st.fractions(max_denominator=6)),
                min_size=0, max_size=5),
       st.tuples(st.integers(1, 1000), st.integers(1, 1000)))
def test_batch_float_close_to_exact(items, q):
    terms = {}
    for a, b, c in items:
        terms[(a, b)] = terms.get((a, b), 0) + c
    p = Poly(2, terms)
    exact = p(q)
    got = p.evaluate_batch(np.array([q]))[0]
    assert got == pytest.approx(float(exact), rel=1e-12, abs=1e-9)
