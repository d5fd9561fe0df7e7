import itertools

import numpy as np
import pytest

from msbn.factors import (CellMeter, Factor, FactorError, ScopeOverflow,
                          VariableAbsent, indicator, product, unit_factor)


def test_flat_order_is_row_major_first_variable_most_significant():
    # [TRIVIAL] scope (b, a): flat index runs a fastest.
    f = Factor(("b", "a"), (2, 2), [0.7, 0.2, 0.3, 0.8])
    assert f.values[0, 1] == 0.2
    assert f.values[1, 0] == 0.3


def test_multiply_known_tables():
    # [DERIVED] 2x2 product checked cell by cell by hand.
    f = Factor(("a",), (2,), [0.6, 0.4])
    g = Factor(("b", "a"), (2, 2), [0.7, 0.2, 0.3, 0.8])
    h = f.multiply(g)
    assert h.scope == ("a", "b")
    assert np.allclose(h.values, [[0.6 * 0.7, 0.6 * 0.3], [0.4 * 0.2, 0.4 * 0.8]])


def test_multiply_matches_nested_loop_oracle():
    # [DERIVED] broadcasting vs an independent index-by-index computation.
    rng = np.random.default_rng(3)
    f = Factor(("a", "c"), (2, 3), rng.random((2, 3)))
    g = Factor(("b", "a"), (4, 2), rng.random((4, 2)))
    h = f.multiply(g)
    assert h.scope == ("a", "b", "c")
    for a, b, c in itertools.product(range(2), range(4), range(3)):
        assert h.values[a, b, c] == pytest.approx(f.values[a, c] * g.values[b, a])


def test_multiply_cardinality_mismatch():
    f = Factor(("a",), (2,), [0.5, 0.5])
    g = Factor(("a",), (3,), [0.2, 0.3, 0.5])
    with pytest.raises(FactorError):
        f.multiply(g)


def test_marginalize_out_and_onto():
    g = Factor(("b", "a"), (2, 2), [0.7, 0.2, 0.3, 0.8])
    m = g.marginalize_out({"a"})
    assert m.scope == ("b",)
    assert np.allclose(m.values, [0.9, 1.1])
    assert g.marginalize_onto({"a"}).scope == ("a",)
    with pytest.raises(VariableAbsent):
        g.marginalize_out({"zz"})


def test_normalized_and_zero_rejection():
    f = Factor(("a",), (2,), [1.0, 3.0])
    assert np.allclose(f.normalized().values, [0.25, 0.75])
    with pytest.raises(FactorError):
        Factor(("a",), (2,), [0.0, 0.0]).normalized()


def test_negative_values_rejected():
    with pytest.raises(FactorError):
        Factor(("a",), (2,), [-0.1, 1.1])


def test_reorder_round_trip():
    rng = np.random.default_rng(0)
    f = Factor(("a", "b", "c"), (2, 3, 2), rng.random((2, 3, 2)))
    g = f.reorder(("c", "a", "b"))
    assert g.values[1, 0, 2] == f.values[0, 2, 1]
    assert g.reorder(("a", "b", "c")).allclose(f, atol=0)


def test_unit_and_indicator():
    assert unit_factor().total() == 1.0
    ind = indicator("x", 3, 1)
    assert list(ind.values) == [0.0, 1.0, 0.0]


def test_product_fold():
    fs = [Factor((n,), (2,), [0.5, 0.5]) for n in "abc"]
    p = product(fs)
    assert p.scope == ("a", "b", "c")
    assert p.total() == pytest.approx(1.0)


def test_scope_overflow_budget():
    fs = [Factor((("v%d" % i),), (2,), [1.0, 1.0]) for i in range(6)]
    with pytest.raises(ScopeOverflow):
        product(fs, budget=16)
    product(fs, budget=64)  # exactly at the limit passes


def test_cell_meter_tracks_peak():
    m = CellMeter()
    m.hold(10)
    m.hold(5)
    m.drop(10)
    m.hold(3)
    assert m.peak == 15
    assert m.current == 8


# ---------------------------------------------------------------------------
# Property-based checks
# ---------------------------------------------------------------------------

from hypothesis import given, settings
from hypothesis import strategies as st


@st.composite
def _factors(draw, names="abcd"):
    scope = tuple(sorted(draw(st.sets(st.sampled_from(list(names)),
                                      min_size=1, max_size=3))))
    cards = tuple(draw(st.integers(2, 3)) for _ in scope)
    size = int(np.prod(cards))
    values = draw(st.lists(st.floats(0.0, 10.0, allow_nan=False),
                           min_size=size, max_size=size))
    return Factor(scope, cards, np.array(values).reshape(cards))


@settings(max_examples=60, deadline=None)
@given(_factors(), _factors("abc"))
def test_multiply_commutes(f, g):
    try:
        fg = f.multiply(g)
        gf = g.multiply(f)
    except FactorError:
        return  # incompatible cardinalities for a shared name
    assert fg.allclose(gf, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(_factors())
def test_marginalization_order_irrelevant(f):
    if len(f.scope) < 2:
        return
    a, b = f.scope[0], f.scope[1]
    one = f.marginalize_out({a}).marginalize_out({b})
    other = f.marginalize_out({b}).marginalize_out({a})
    both = f.marginalize_out({a, b})
    assert one.allclose(other, atol=1e-9)
    assert one.allclose(both, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(_factors(), _factors("abc"))
def test_total_of_product_of_disjoint_scopes(f, g):
    if set(f.scope) & set(g.scope):
        return
    assert f.multiply(g).total() == pytest.approx(f.total() * g.total(), rel=1e-9)
