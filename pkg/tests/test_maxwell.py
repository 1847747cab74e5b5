import copy

import numpy as np
import pytest
import sympy

from fingeo import maxwell as mx
from fingeo import scenario as scn

import oracles
from conftest import SHIPPED, probes, scenario

STATIC = mx.Section.static()
NO_GEOM = mx.Toggles(geometric_terms=False)


def classical_divergence(potential):
    """d_nu F^{mu nu} in Minkowski space with F_{ab} = d_a A_b - d_b A_a, symbolically."""
    X = oracles.X
    A = [sympy.sympify(a, locals=dict(zip(oracles._LEAVES, X)), convert_xor=True) for a in potential]
    eta = sympy.diag(1, -1, -1, -1)
    F = sympy.Matrix(4, 4, lambda a, b: sympy.diff(A[b], X[a]) - sympy.diff(A[a], X[b]))
    Fup = eta * F * eta
    div = [sum(sympy.diff(Fup[m, n], X[n]) for n in range(4)) for m in range(4)]
    f = sympy.lambdify(X, div, "numpy")
    return lambda x: np.array(f(*x), dtype=float)


def wave_without_current():
    doc = copy.deepcopy(scenario("flat_wave_A").raw)
    doc.pop("current", None)
    return scn.parse_scenario(doc).background


def test_classical_oracle_flat_wave():
    s = scenario("flat_wave_A")
    div = classical_divergence(s.raw["potential"])
    bare = wave_without_current()
    for x, _ in probes("flat_wave_A", 5):
        # the shipped current is the analytic divergence
        assert np.allclose(s.background.current(x), div(x), atol=1e-14)
        r = mx.maxwell_residual(s.background, STATIC, x, NO_GEOM)
        assert np.abs(r.source_eq).max() < 1e-12
        r0 = mx.maxwell_residual(bare, STATIC, x, NO_GEOM)
        assert np.allclose(r0.source_eq, div(x), atol=1e-12)


@pytest.mark.parametrize("name", SHIPPED)
@pytest.mark.parametrize("toggles", [(), ("connection_corrected_maxwell",), ("drop_beta_over_L",)])
def test_bianchi_identity(name, toggles):
    s = scenario(name)
    for x, _ in probes(name, 2):
        folded, bmax, _ = mx.bianchi_residual(s.background, STATIC, x, toggles)
        assert bmax < 1e-12 and np.abs(folded).max() < 1e-12


def fd_field(bg, x, h=1e-4):
    """dF[mu, nu, l] = d_l F^{G mu nu} along the static section, by central differences."""
    out = np.zeros((4, 4, 4))
    for l in range(4):
        e = np.zeros(4)
        e[l] = h
        up = mx.raise_geometric_field(bg, (x + e, STATIC(x + e)))
        dn = mx.raise_geometric_field(bg, (x - e, STATIC(x - e)))
        out[..., l] = (up - dn) / (2 * h)
    return out


@pytest.mark.parametrize("name", ["coupled_weakfield", "flat_wave_A"])
def test_effective_sources_match_fd(name):
    bg = scenario(name).background
    x, _ = probes(name, 1)[0]
    es = mx.effective_sources(bg, STATIC, x)
    d = fd_field(bg, x)
    rho = 0.5 * sum(d[j, 0, j] - d[0, j, j] for j in (1, 2, 3))
    J_E = 0.5 * np.array([d[0, j, 0] - d[j, 0, 0] for j in (1, 2, 3)])
    W = lambda a, b: d[a, b] - d[b, a]  # antisymmetric part, all derivative slots
    V = np.array([W(2, 3), W(3, 1), W(1, 2)])  # calB^T - calB components
    J_B = 0.5 * np.array([V[2, 2] - V[1, 3], V[0, 3] - V[2, 1], V[1, 1] - V[0, 2]])
    assert np.isclose(es.rho_E, rho, atol=1e-8)
    assert np.allclose(es.J_E, J_E, atol=1e-8)
    assert np.allclose(es.J_B, J_B, atol=1e-8)
    assert np.isclose(es.rho_G, bg.current(x)[0] + rho, atol=1e-8)


def test_gauge_curl_matches_fd():
    bg = scenario("coupled_weakfield").background
    x, _ = probes("coupled_weakfield", 1)[0]
    _, rhs_B, gauge, _ = mx.wave_sources(bg, STATIC, x)
    assert gauge.shape == (2, 3)
    h = 1e-4
    dJ = np.zeros((3, 4))
    drho = np.zeros(4)
    for l in range(4):
        e = np.zeros(4)
        e[l] = h
        up, dn = mx.effective_sources(bg, STATIC, x + e), mx.effective_sources(bg, STATIC, x - e)
        dJ[:, l] = (up.J_G - dn.J_G) / (2 * h)
        drho[l] = (up.rho_G - dn.rho_G) / (2 * h)
    curl = np.array([dJ[2, 2] - dJ[1, 3], dJ[0, 3] - dJ[2, 1], dJ[1, 1] - dJ[0, 2]])
    assert np.allclose(gauge[1], curl, atol=1e-7)
    assert np.allclose(rhs_B, -curl, atol=1e-7)
    assert np.allclose(gauge[0], dJ[:, 0] + drho[1:], atol=1e-7)


def test_eb_roundtrip_and_slots():
    F = np.arange(16.0).reshape(4, 4)
    eb = mx.eb_decompose(F)
    assert np.array_equal(mx.eb_reassemble(eb), F)
    assert np.array_equal(eb.calE, F[0, 1:]) and np.array_equal(eb.calE_T, F[1:, 0])
    assert eb.E00 == 0.0 and np.array_equal(eb.diag, [5.0, 10.0, 15.0])


def test_non_antisymmetric_rejected_for_plain_fields():
    with pytest.raises(mx.NonAntisymmetric):
        mx.eb_decompose(np.eye(4), is_geometric=False)
    F = np.zeros((4, 4))
    F[0, 1], F[1, 0] = 0.3, -0.3
    assert np.allclose(mx.eb_decompose(F, is_geometric=False).E, [-0.3, 0, 0])


def test_vacuum_constraint():
    flat = scenario("flat_vacuum").background
    x, y = probes("flat_vacuum", 1)[0]
    terms, vec = mx.vacuum_constraint_residual(flat, (x, y))
    assert terms.shape == (4, 4) and np.abs(vec).max() == 0.0
    bg = scenario("vacuum_weakfield").background
    x, y = probes("vacuum_weakfield", 1)[0]
    terms, vec = mx.vacuum_constraint_residual(bg, (x, y))
    assert np.allclose(terms.sum(axis=1), vec)
    # rescaling y does not matter: the constraint lives on L = 1
    assert np.allclose(mx.vacuum_constraint_residual(bg, (x, 2.5 * y))[1], vec, atol=1e-14)
    with pytest.raises(mx.NotVacuum):
        mx.vacuum_constraint_residual(scenario("coupled_weakfield").background, probes("coupled_weakfield", 1)[0])


def test_berwald_form():
    bg = scenario("flat_constant_A").background
    x, _ = probes("flat_constant_A", 1)[0]
    assert np.abs(mx.berwald_maxwell_residual(bg, STATIC, x)).max() < 1e-14
    with pytest.raises(mx.NotBerwald):
        mx.berwald_maxwell_residual(scenario("coupled_weakfield").background, STATIC, x)


def test_section_parsing():
    s = mx.Section.parse("expr:1;0.1*x1;0;0")
    assert np.allclose(s(np.array([0, 2.0, 0, 0])), [1, 0.2, 0, 0])
    assert mx.Section.parse("const:1,0,0,0").is_constant
    with pytest.raises(ValueError):
        mx.Section.parse("vec:1,0,0,0")
    with pytest.raises(ValueError):
        mx.Toggles.from_names(["bogus"])


def test_varying_section_total_derivative():
    # along y = (1, 0.1 x1, 0, 0) the x-derivative includes the section's slope
    bg = scenario("coupled_weakfield").background
    x, _ = probes("coupled_weakfield", 1)[0]
    sec = mx.Section.parse("expr:1;0.1*x1;0;0")
    es = mx.effective_sources(bg, sec, x)
    h = 1e-4
    d = np.zeros((4, 4, 4))
    for l in range(4):
        e = np.zeros(4)
        e[l] = h
        d[..., l] = (mx.raise_geometric_field(bg, (x + e, sec(x + e)))
                     - mx.raise_geometric_field(bg, (x - e, sec(x - e)))) / (2 * h)
    rho = 0.5 * sum(d[j, 0, j] - d[0, j, j] for j in (1, 2, 3))
    assert np.isclose(es.rho_E, rho, atol=1e-8)
