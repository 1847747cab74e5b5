import numpy as np
import pytest

from fingeo import adnum as ad
from fingeo import background as bgm

from conftest import SHIPPED, scenario


def test_minkowski_values():
    bg = bgm.minkowski(A=[0.1, 0, 0, 0.2], m=1.5, e=0.3)
    x = np.array([0.3, 0.1, -0.2, 0.5])
    assert np.array_equal(bg.metric(x), np.diag([1.0, -1, -1, -1]))
    assert np.allclose(bg.potential(x), [0.1, 0, 0, 0.2])
    assert bgm.signature_check(bg, x).signs == (1, -1, -1, -1)


@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_metrics_symmetric_lorentzian(name):
    bg = scenario(name).background
    for x in np.random.default_rng(0).uniform(-1, 1, (5, 4)):
        g = bg.metric(x)
        assert np.array_equal(g, g.T)
        assert sorted(bgm.signature_check(bg, x).signs) == [-1, -1, -1, 1]


def test_weak_field_form():
    bg = bgm.weak_field("eps*sin(x1)", params={"eps": 0.1})
    x = np.array([0, 0.4, 0, 0])
    phi = 0.1 * np.sin(0.4)
    assert np.allclose(bg.metric(x), np.diag([1 + 2 * phi] + [-(1 - 2 * phi)] * 3), atol=1e-15)


def test_background_at_derivatives_match_fd():
    bg = scenario("coupled_weakfield").background
    x = np.array([0.2, -0.3, 0.5, 0.1])
    at = bgm.background_at(bg, x, 2)
    h = 1e-5
    for c in range(4):
        e = np.zeros(4)
        e[c] = h
        dg = (bg.metric(x + e) - bg.metric(x - e)) / (2 * h)
        dA = (bg.potential(x + e) - bg.potential(x - e)) / (2 * h)
        assert np.allclose(at.dgtilde[..., c], dg, atol=1e-9)
        assert np.allclose(at.dA[..., c], dA, atol=1e-9)
    assert np.allclose(at.d2gtilde, at.d2gtilde.transpose(0, 1, 3, 2))


def test_asymmetric_components_rejected():
    rows = [["1", "0", "0", "0"], ["x1", "-1", "0", "0"], ["0", "0", "-1", "0"], ["0", "0", "0", "-1"]]
    with pytest.raises(ValueError, match=r"\(0,1\)"):
        bgm.general(rows)


def test_degenerate_metric_detected():
    with pytest.raises(bgm.DegenerateMetric):
        bgm.matrix_signature(np.diag([1.0, -1.0, 0.0, -1.0]))


def test_jacobi_eigenvalues_match_numpy():
    a = np.random.default_rng(3).normal(size=(4, 4))
    a = a + a.T
    assert np.allclose(sorted(bgm.jacobi_eigenvalues(a)), np.linalg.eigvalsh(a), atol=1e-12)


def test_metric_accepts_jets():
    bg = scenario("berwald_curved").background
    X = bgm.x_jets(np.array([0.1, 0.2, 0.3, 0.4]), 1)
    g = bg.metric(X)
    assert isinstance(g, ad.Jet) and g.shape == (4, 4)
