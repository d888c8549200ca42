import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lvnonlocal.domain import build_grid
from lvnonlocal.errors import NonFiniteError, ValidationError
from lvnonlocal.fields import (
    CoefficientBounds,
    CoefficientField,
    StateField,
    as_field,
    compute_bounds,
    order_compare,
    parse_expression,
    time_average,
    time_mesh,
)

GRID = build_grid(1, 2.0, 16, "neumann")
GRID2 = build_grid(2, [2.0, 2.0], [4, 4], "periodic")


def test_expression_values():
    f = CoefficientField.from_expression("1 + 0.5*sin(2*pi*t/T) + x**2", 2.0)
    vals = f.values(0.5, GRID.coords)
    assert np.allclose(vals, 1.5 + GRID.coords[:, 0] ** 2)
    assert not f.time_independent
    samp = f.sample(GRID.coords, [0.0, 0.5, 1.0])
    assert samp.shape == (3, 16)
    assert np.allclose(samp[1], vals)


def test_expression_y_and_constants():
    func, used = parse_expression("exp(-y) * cos(pi*x/L)", {"L": 2.0})
    assert used == {"x", "y"}
    c = GRID2.coords
    assert np.allclose(func(0.0, c), np.exp(-c[:, 1]) * np.cos(np.pi * c[:, 0] / 2))


@pytest.mark.parametrize("text", [
    "__import__('os')", "x.real", "open(1)", "t if x else 1", "z + 1", "sin(x, t)",
    "1 +", "'a'", "True", "[1, 2]", "lambda: 1",
])
def test_expression_rejects(text):
    with pytest.raises(ValidationError):
        parse_expression(text)


def test_constant_and_values_fields():
    c = CoefficientField.constant(2.5, 1.0)
    assert c.time_independent
    assert np.all(c.sample(GRID.coords, time_mesh(1.0, 4)) == 2.5)
    v = as_field(np.arange(16.0), 1.0)
    assert np.array_equal(v.values(0.3, GRID.coords), np.arange(16.0))
    assert as_field(c, 1.0) is c


def test_shift_and_scale():
    f = CoefficientField.from_expression("sin(2*pi*t)", 1.0)
    g = f.shifted(1.0).scaled(2.0)
    assert np.allclose(g.values(0.25, GRID.coords), 4.0)


def test_period_must_be_positive():
    with pytest.raises(ValidationError):
        CoefficientField.constant(1.0, 0.0)


def test_compute_bounds_and_overrides():
    coefs = {n: CoefficientField.constant(1.0, 1.0) for n in ("a2", "b1", "b2", "c1", "c2")}
    coefs["a1"] = CoefficientField.from_expression("1 + 0.2*sin(2*pi*t) + 0.1*x", 1.0)
    b = compute_bounds(coefs, GRID)
    xmax = GRID.coords[:, 0].max()
    assert b.a1M == pytest.approx(1.2 + 0.1 * xmax)
    assert b.a1L == pytest.approx(0.8 - 0.1 * xmax)
    assert b.source == "mesh"
    b2 = compute_bounds(coefs, GRID, overrides={"a1": (0.7, 1.3)})
    assert b2.pair("a1") == (0.7, 1.3) and b2.source == "mesh+exact"
    with pytest.raises(ValidationError):
        compute_bounds(coefs, GRID, time_samples=16)


def test_bounds_validation():
    pairs = {n: (1.0, 2.0) for n in ("a1", "a2", "b1", "b2", "c1", "c2")}
    CoefficientBounds.from_pairs(pairs)
    with pytest.raises(ValidationError):
        CoefficientBounds.from_pairs({**pairs, "b2": (0.0, 1.0)})
    with pytest.raises(ValidationError):
        CoefficientBounds.from_pairs({**pairs, "a1": (2.0, 1.0)})
    with pytest.raises(NonFiniteError):
        CoefficientBounds.from_pairs({**pairs, "c1": (1.0, math.inf)})


def test_time_average():
    f = CoefficientField.from_expression("3*sin(2*pi*t) + x", 1.0)
    assert np.allclose(time_average(f, GRID), GRID.coords[:, 0], atol=1e-14)
    bad = CoefficientField(lambda t, x: np.inf + 0 * t + 0 * x[:, 0], 1.0)
    with pytest.raises(NonFiniteError):
        time_average(bad, GRID)


def test_state_field():
    s = StateField([1.0, 2.0], [0.5, -3.0])
    assert s.sup_norm() == 3.0
    assert np.array_equal(StateField.from_array(s.as_array()).v, s.v)
    with pytest.raises(ValidationError):
        StateField([1.0], [1.0, 2.0])
    with pytest.raises(NonFiniteError):
        StateField([np.nan], [1.0])


def test_order_compare_examples():
    p1 = np.array([[0.0, 1.0], [2.0, 2.0]])
    p2 = np.array([[1.0, 1.0], [1.0, 2.0]])
    assert order_compare(p1, p2, "order2")
    assert not order_compare(p1, p2, "strict2")
    r = order_compare(p2, p1, "order2")
    assert not r and r.fails_at == 0 and r.component == "u"
    assert order_compare(p1, p1 + 1, "strict1")
    with pytest.raises(ValidationError):
        order_compare(p1, p2, "order3")
    with pytest.raises(ValidationError):
        order_compare(p1, np.zeros((2, 3)))


pairs = arrays(np.float64, (2, 6), elements=st.floats(-5, 5, allow_nan=False))


@settings(max_examples=60, deadline=None)
@given(p=pairs, q=pairs)
def test_order_properties(p, q):
    assert order_compare(p, p, "order1") and order_compare(p, p, "order2")
    # <=_2 is <=_1 after flipping the sign of v
    flip = np.array([[1.0], [-1.0]])
    assert bool(order_compare(p, q, "order2")) == bool(order_compare(p * flip, q * flip, "order1"))
    if order_compare(p, q, "strict2"):
        assert order_compare(p, q, "order2")
    if order_compare(p, q, "order1") and order_compare(q, p, "order1"):
        assert np.array_equal(p, q)
