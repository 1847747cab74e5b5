import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from fingeo import background as bgm
from fingeo import spray as sp
from fingeo.adnum import DomainError

from conftest import A_ZERO, SHIPPED, probes, scenario
from test_randers import L_numpy


def spray_fd(bg, x, y, h=1e-4):
    """G^mu = (1/4) g^{mu nu} (d2L2/dy^nu dx^l y^l - dL2/dx^nu), all by finite differences."""
    L2 = lambda xx, yy: L_numpy(bg, xx, yy) ** 2
    E = np.eye(4) * h
    dx = np.array([(L2(x + E[k], y) - L2(x - E[k], y)) / (2 * h) for k in range(4)])
    mixed = np.zeros((4, 4))
    for n in range(4):
        for l in range(4):
            mixed[n, l] = (L2(x + E[l], y + E[n]) - L2(x + E[l], y - E[n])
                           - L2(x - E[l], y + E[n]) + L2(x - E[l], y - E[n])) / (4 * h * h)
    hess = np.array([[(L2(x, y + E[a] + E[b]) - L2(x, y + E[a] - E[b]) - L2(x, y - E[a] + E[b])
                       + L2(x, y - E[a] - E[b])) / (4 * h * h) for b in range(4)] for a in range(4)])
    return 0.25 * np.linalg.solve(0.5 * hess, mixed @ y - dx)


@pytest.mark.parametrize("name", SHIPPED)
def test_routes_agree(name):
    bg = scenario(name).background
    for x, y in probes(name, 3):
        sb = sp.spray_decomposed(bg, (x, y))
        assert sb.route_spread < 1e-10
        assert np.allclose(sb.G_general, spray_fd(bg, x, y), atol=1e-6)
        G_fast, _ = sp.fast_spray(bg, x, y)
        assert np.allclose(G_fast, sb.G_general, rtol=1e-10, atol=1e-13)


@pytest.mark.parametrize("name", ["coupled_weakfield", "flat_wave_A"])
def test_mutated_s_coefficient_breaks_route_equivalence(name, monkeypatch):
    bg = scenario(name).background
    x, y = probes(name, 1)[0]
    assert sp.spray_decomposed(bg, (x, y)).route_spread < 1e-10
    monkeypatch.setattr(sp, "S_COEFFICIENTS", (2.0, -1.0, 1.0))
    assert sp.spray_decomposed(bg, (x, y)).route_spread > 1e-4


@pytest.mark.parametrize("name", A_ZERO)
def test_vacuum_spray_is_riemannian(name):
    bg = scenario(name).background
    for x, y in probes(name, 3):
        sb = sp.spray_decomposed(bg, (x, y))
        assert np.allclose(sb.G, 0.5 * np.einsum("lmn,m,n->l", sb.gamma_tilde, y, y), atol=1e-14)
        for t in (sb.F_em, sb.S, sb.M):
            assert np.abs(t).max() == 0.0


@settings(max_examples=40, deadline=None)
@given(st.floats(0.3, 3.0), st.integers(0, 4))
def test_spray_two_homogeneous(lam, k):
    x, y = probes("coupled_weakfield", 5)[k]
    bg = scenario("coupled_weakfield").background
    G = sp.spray_general(bg, (x, y))
    assert np.allclose(sp.spray_general(bg, (x, lam * y)), lam ** 2 * G, rtol=1e-11, atol=1e-15)


def test_constant_potential_flat_spray_vanishes():
    bg = scenario("flat_constant_A").background
    for x, y in probes("flat_constant_A", 3):
        assert np.abs(sp.spray_general(bg, (x, y))).max() < 1e-15


def test_effective_dynamics_identities():
    bg = scenario("coupled_weakfield").background
    x, y = probes("coupled_weakfield", 1)[0]
    ed = sp.effective_dynamics(bg, (x, y))
    assert ed.force_gap < 1e-12
    em = ed.F_total - ed.F_geom
    assert np.abs(em + em.T).max() < 1e-15
    dropped = sp.effective_dynamics(bg, (x, y), drop_beta_over_L=True)
    assert np.abs(dropped.F_total - ed.F_total).max() > 1e-6


@pytest.mark.parametrize("name,expected", [("flat_constant_A", True), ("berwald_curved", True),
                                           ("vacuum_weakfield", True), ("coupled_weakfield", False),
                                           ("flat_wave_A", False)])
def test_berwald_classification(name, expected):
    bg = scenario(name).background
    x, y = probes(name, 1)[0]
    br = sp.berwald_report(bg, (x, y))
    assert br.is_berwald == expected
    assert br.identity_gap < 1e-10
    if expected:
        assert np.abs(br.F_reconstructed).max() < 1e-10
        assert np.abs(br.deviation).max() < 1e-9


def test_straight_line_in_flat_vacuum():
    bg = scenario("flat_vacuum").background
    x0, y0 = np.array([0.1, 0.2, 0.3, 0.4]), np.array([1.2, 0.3, -0.2, 0.1])
    tr = sp.integrate_geodesic(bg, (x0, y0), 10.0)
    assert np.abs(tr.x - (x0 + np.outer(tr.tau, y0))).max() < 1e-10
    assert tr.conservation_drift < 1e-12


def test_zero_span_single_sample():
    tr = sp.integrate_geodesic(scenario("flat_vacuum").background, (np.zeros(4), np.array([1.0, 0, 0, 0])), 0.0)
    assert len(tr.tau) == 1 and not tr.domain_exit


def test_integrator_matches_reference_solver():
    bg = scenario("coupled_weakfield").background
    x0, y0 = np.array([0.2, -0.1, 0.3, 0.0]), np.array([1.5, 0.2, -0.3, 0.1])
    tr = sp.integrate_geodesic(bg, (x0, y0), 4.0)
    rhs = lambda t, s: np.concatenate([s[4:], -2 * sp.fast_spray(bg, s[:4], s[4:])[0]])
    ref = solve_ivp(rhs, (0, 4.0), np.concatenate([x0, y0]), method="DOP853", rtol=1e-12, atol=1e-12)
    assert np.abs(tr.x[-1] - ref.y[:4, -1]).max() < 1e-8
    assert np.abs(tr.y[-1] - ref.y[4:, -1]).max() < 1e-8


def test_domain_exit_truncates():
    bg = scenario("flat_vacuum").background

    def spray(x, y):
        if x[0] > 1.0:
            raise DomainError("left the chart")
        return np.zeros(4)

    tr = sp.integrate_geodesic(bg, (np.zeros(4), np.array([1.0, 0, 0, 0])), 5.0, spray=spray)
    assert tr.domain_exit
    assert tr.x[-1, 0] <= 1.0 + 1e-9
    assert tr.tau[-1] < 5.0
