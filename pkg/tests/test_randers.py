import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from fingeo import background as bgm
from fingeo import randers as rd

from conftest import SHIPPED, probes, scenario


def L_numpy(bg, x, y):
    gt = bg.metric(x)
    return bg.m * np.sqrt(y @ gt @ y) + bg.e * bg.potential(x) @ y


def hessian_fd(f, y, h=1e-4):
    """Central-difference Hessian of a scalar function."""
    n = len(y)
    H = np.zeros((n, n))
    E = np.eye(n) * h
    for i in range(n):
        for j in range(n):
            H[i, j] = (f(y + E[i] + E[j]) - f(y + E[i] - E[j]) - f(y - E[i] + E[j]) + f(y - E[i] - E[j])) / (4 * h * h)
    return H


def closed_form(bg, x, y):
    """g = (L/alpha)(m^2 gt - l l) + (l + b)(l + b) with l = m^2 gt y / alpha."""
    gt = bg.metric(x)
    b = bg.e * bg.potential(x)
    alpha = bg.m * np.sqrt(y @ gt @ y)
    L = alpha + b @ y
    ell = bg.m ** 2 * gt @ y / alpha
    return (L / alpha) * (bg.m ** 2 * gt - np.outer(ell, ell)) + np.outer(ell + b, ell + b)


@pytest.mark.parametrize("name", SHIPPED)
def test_hessian_matches_fd_and_closed_form(name):
    bg = scenario(name).background
    for x, y in probes(name, 4):
        g = rd.fundamental_tensor_hessian(bg, (x, y))
        fd = 0.5 * hessian_fd(lambda v: L_numpy(bg, x, v) ** 2, y)
        assert np.allclose(g, fd, atol=1e-6)
        assert np.allclose(g, closed_form(bg, x, y), atol=1e-13)


def test_closed_metric_weight():
    bg = scenario("coupled_weakfield").background
    x, y = probes("coupled_weakfield", 1)[0]
    g = rd.fundamental_tensor_hessian(bg, (x, y))
    _, gap_full = rd.fundamental_tensor_closed(bg, (x, y), prefactor=1.0)
    _, gap_half = rd.fundamental_tensor_closed(bg, (x, y), prefactor=0.5)
    assert gap_full < 1e-13
    # halving the L/alpha weight gives a visibly different tensor
    assert gap_half > 1e-2 * np.abs(g).max()


@pytest.mark.parametrize("m,agree", [(1.0, True), (1.3, False)])
def test_inverse_weight(m, agree):
    bg = bgm.minkowski(A=[0.2, 0.1, 0, 0.05], m=m, e=0.6)
    x, y = np.zeros(4), np.array([1.3, 0.2, -0.1, 0.3])
    ginv_direct = np.linalg.inv(rd.fundamental_tensor_hessian(bg, (x, y)))
    L, alpha, beta, _ = rd.finsler_function(bg, (x, y))
    b = bg.e * bg.potential(x)
    gi = np.linalg.inv(bg.metric(x))
    fixed = rd.randers_inverse(m, gi, b, y, L, alpha, beta)
    literal = rd.randers_inverse(m, gi, b, y, L, alpha, beta, literal=True)
    assert np.allclose(fixed, ginv_direct, atol=1e-12)
    assert np.allclose(literal, ginv_direct, atol=1e-12) == agree


@pytest.mark.parametrize("name", SHIPPED)
def test_cartan_is_half_y_derivative_of_g(name):
    bg = scenario(name).background
    x, y = probes(name, 1)[0]
    C = rd.cartan_tensor(bg, (x, y))
    h = 1e-5
    for c in range(4):
        e = np.zeros(4)
        e[c] = h
        dg = (closed_form(bg, x, y + e) - closed_form(bg, x, y - e)) / (2 * h)
        assert np.allclose(C[..., c], 0.5 * dg, atol=1e-8)
    assert np.abs(np.einsum("abc,c->ab", C, y)).max() < 1e-13
    assert np.allclose(C, C.transpose(1, 0, 2)) and np.allclose(C, C.transpose(2, 1, 0))


def test_riemannian_limit():
    bg = scenario("vacuum_weakfield").background
    for x, y in probes("vacuum_weakfield", 3):
        fe = rd.finsler_eval(bg, (x, y))
        assert np.allclose(fe.g, bg.metric(x), atol=1e-14)
        assert np.abs(fe.cartan).max() < 1e-14


timelike = st.tuples(st.floats(1.0, 2.0), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
potentials = st.tuples(*[st.floats(-0.55, 0.55)] * 4)


@settings(max_examples=150, deadline=None)
@given(timelike, potentials, st.floats(0.5, 2.0))
def test_homogeneity_and_signature(y, A, lam):
    y = np.array(y)
    bg = bgm.minkowski(A=list(A), e=1.0)
    L = L_numpy(bg, np.zeros(4), y)
    assume(L > 1e-3)
    fe = rd.finsler_eval(bg, (np.zeros(4), y))
    fl = rd.finsler_eval(bg, (np.zeros(4), lam * y))
    assert np.isclose(fl.L, lam * fe.L, rtol=1e-13)
    assert np.allclose(fl.g, fe.g, rtol=1e-10, atol=1e-12)
    assert np.isclose(y @ fe.g @ y, fe.L ** 2, rtol=1e-12)
    # |A| < 1 keeps the Hessian Lorentzian wherever L > 0
    assert fe.signature_ok


def test_errors_outside_domain():
    bg = bgm.minkowski(A=[-0.99, 0, 0, 0], e=1.0)
    with pytest.raises(rd.NonTimelike):
        rd.finsler_eval(bg, (np.zeros(4), np.array([0.1, 1.0, 0, 0])))
    with pytest.raises(rd.NonPositiveFinsler):
        rd.finsler_eval(bg, (np.zeros(4), np.array([1.0, 0.2, 0, 0])))


@pytest.mark.parametrize("name", SHIPPED)
def test_determinant_identity(name):
    # det g = (L/alpha)^5 det(m^2 gtilde): never zero while L > 0, so the
    # signature cannot change along b -> t b, t in [0, 1]
    bg = scenario(name).background
    for x, y in probes(name, 3):
        fe = rd.finsler_eval(bg, (x, y))
        ref = (fe.L / fe.alpha) ** 5 * np.linalg.det(bg.m ** 2 * bg.metric(x))
        assert np.isclose(np.linalg.det(fe.g), ref, rtol=1e-12)
