import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fingeo import adnum as ad
from fingeo import exprlang as ex


def ev(text, x=(0.0, 0.0, 0.0, 0.0), params=None):
    return ex.eval_expr(ex.parse_expr(text, (params or {}).keys()), list(x), params)


@pytest.mark.parametrize("text,value", [
    ("1 + 2 * 3", 7.0),
    ("-2^2", -4.0),
    ("2^3^2", 512.0),
    ("(1 + 2) * 3", 9.0),
    ("8 / 4 / 2", 1.0),
    ("pow(2, 10)", 1024.0),
    ("min(3, -1) + max(2, 5)", 4.0),
    ("1e-3 * 1000", 1.0),
])
def test_precedence_and_literals(text, value):
    assert ev(text) == value


def test_coordinates_and_params():
    assert ev("x0 + 2*x3 + k", (1, 0, 0, 3), {"k": 0.5}) == 7.5


@pytest.mark.parametrize("text,offset", [("1 + * 2", 4), ("sin(x0", 6), ("x0 $ 1", 3)])
def test_syntax_error_location(text, offset):
    with pytest.raises(ex.ExprSyntaxError) as err:
        ex.parse_expr(text)
    assert err.value.offset == offset


def test_unknown_identifier_named():
    with pytest.raises(ex.UnknownIdentifier) as err:
        ex.parse_expr("1 + phi * x0")
    assert err.value.name == "phi"


def test_arity_mismatch():
    with pytest.raises(ex.ArityMismatch):
        ex.parse_expr("sin(x0, x1)")


def test_division_by_zero_is_domain_error():
    with pytest.raises(ad.DomainError):
        ev("1 / (x0 - x0)")


names = st.sampled_from(["x0", "x1", "x2", "x3", "1.5", "0.25"])


@st.composite
def expressions(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(names)
    a = draw(expressions(depth=depth - 1))
    b = draw(expressions(depth=depth - 1))
    form = draw(st.sampled_from(["({} + {})", "({} - {})", "({} * {})", "sin({})*{}", "-{}^2 + {}"]))
    return form.format(a, b)


@settings(max_examples=80, deadline=None)
@given(expressions(), st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_source_roundtrip(text, x):
    node = ex.parse_expr(text)
    again = ex.parse_expr(ex.to_source(node))
    assert ex.eval_expr(again, x) == ex.eval_expr(node, x)


@settings(max_examples=60, deadline=None)
@given(expressions(), st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_compiled_gradient_matches_jets(text, x):
    node = ex.parse_expr(text)
    val, grad = ex.compile_gradient(node)(*x)
    sp = ad.space([("x", 4, 1)])
    X = ad.variables(np.array(x), sp, "x")
    J = ex.eval_expr(node, [X[k] for k in range(4)])
    jv = ad.value_of(J) if isinstance(J, ad.Jet) else J
    jg = ad.taylor_tensor(J, "x", 1)
    assert math.isclose(val, float(jv), rel_tol=1e-14, abs_tol=1e-14)
    assert np.allclose(grad, jg, rtol=1e-13, atol=1e-13)
