"""Generalized Maxwell equations with the geometric field.

F^G depends on velocity, so field equations are evaluated along a velocity
section ``x ↦ y(x)``.  Everything is one jet pass over the joint space

* ``x``: position, tracked to the order the residual needs,
* ``y``: a velocity shift ``t_y`` around the section (degree 2 for the
  Finsler metric, 3 when horizontal derivatives are required),
* ``a``: 16 shifts of the potential gradient ``∂_ν A_μ`` (degree 1), which
  yields ``D[ρ, σ, μ, ν] = ∂F^G_{ρσ}/∂(∂_ν A_μ)`` exactly.

x-derivatives are total derivatives through the composite map
``x ↦ T(x, y(x))``.  Spatial vector calculus uses x1..x3 with x0 as time.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import adnum as ad
from . import exprlang as ex
from .background import ScenarioBackground, x_jets
from .randers import NonPositiveFinsler, NonTimelike
from .spray import bracket_tensors, berwald_report, field_strength, geometric_field

__all__ = [
    "Section",
    "Toggles",
    "GeometricEB",
    "EffectiveSources",
    "MaxwellResidual",
    "NonAntisymmetric",
    "NotVacuum",
    "NotBerwald",
    "raise_geometric_field",
    "eb_decompose",
    "eb_reassemble",
    "effective_sources",
    "maxwell_residual",
    "source_residual",
    "bianchi_residual",
    "vacuum_constraint_residual",
    "berwald_maxwell_residual",
    "wave_sources",
    "LEVI_CIVITA",
]


class NonAntisymmetric(ValueError):
    """An electromagnetic field tensor is not antisymmetric."""


class NotVacuum(ValueError):
    """The vacuum constraint was requested where A does not vanish."""


class NotBerwald(ValueError):
    """The Berwald form was requested at a non-Berwald point."""


def _levi_civita():
    eps = np.zeros((4, 4, 4, 4))
    for perm in itertools.permutations(range(4)):
        inversions = sum(1 for i in range(4) for j in range(i + 1, 4) if perm[i] > perm[j])
        eps[perm] = -1.0 if inversions % 2 else 1.0
    return eps


LEVI_CIVITA = _levi_civita()
EPS3 = LEVI_CIVITA[0, 1:, 1:, 1:]


# ---------------------------------------------------------------------------
# sections and toggles
# ---------------------------------------------------------------------------


class Section:
    """Velocity field ``y(x)`` given by four expressions (or constants)."""

    def __init__(self, components, params=None, text=None):
        params = dict(params or {})
        nodes = []
        for c in components:
            if isinstance(c, (int, float)):
                nodes.append(ex.Const(float(c)))
            elif isinstance(c, str):
                nodes.append(ex.parse_expr(c, params))
            else:
                nodes.append(c)
        if len(nodes) != 4:
            raise ValueError("a section has four components")
        self.nodes = tuple(nodes)
        self.params = params
        self.text = text or self._describe()

    @classmethod
    def static(cls):
        return cls((1.0, 0.0, 0.0, 0.0), text="const:1,0,0,0")

    @classmethod
    def parse(cls, text: str, params=None):
        """``const:v0,v1,v2,v3`` or ``expr:e0;e1;e2;e3``."""
        kind, _, body = text.partition(":")
        if kind == "const":
            vals = [float(v) for v in body.split(",")]
            return cls(vals, params, text=text)
        if kind == "expr":
            return cls(body.split(";"), params, text=text)
        raise ValueError(f"section must start with 'const:' or 'expr:', got {text!r}")

    def _describe(self):
        if all(isinstance(n, ex.Const) for n in self.nodes):
            return "const:" + ",".join(repr(n.value) for n in self.nodes)
        return "expr:" + ";".join(ex.to_source(n) for n in self.nodes)

    @property
    def is_constant(self):
        return all(isinstance(n, ex.Const) for n in self.nodes)

    def __call__(self, X):
        if isinstance(X, ad.Jet):
            X = [X[k] for k in range(4)]
        vals = [n.value if isinstance(n, ex.Const) else ex.eval_expr(n, X, self.params)
                for n in self.nodes]
        if any(isinstance(v, ad.Jet) for v in vals):
            return ad.stack(vals)
        return np.array(vals, dtype=float)


def _section(section, bg=None):
    if section is None:
        return Section.static()
    if isinstance(section, Section):
        return section
    if isinstance(section, str):
        return Section.parse(section, bg.params if bg is not None else None)
    return Section(list(np.asarray(section, dtype=float)))


@dataclass(frozen=True)
class Toggles:
    """Switches of the Maxwell residual.

    ``drop_beta_over_L`` replaces (1 − β/L) by 1 in 𝓕;
    ``connection_corrected_maxwell`` uses horizontal derivatives plus Chern
    connection terms in the divergences; ``geometric_terms=False`` zeroes F^G
    and raises indices with g̃.
    """

    drop_beta_over_L: bool = False
    connection_corrected_maxwell: bool = False
    geometric_terms: bool = True

    NAMES = ("drop_beta_over_L", "connection_corrected_maxwell", "no_geometric_terms")

    @classmethod
    def from_names(cls, names):
        flags = {}
        for n in names or ():
            if n == "drop_beta_over_L":
                flags["drop_beta_over_L"] = True
            elif n == "connection_corrected_maxwell":
                flags["connection_corrected_maxwell"] = True
            elif n == "no_geometric_terms":
                flags["geometric_terms"] = False
            else:
                raise ValueError(f"unknown toggle {n!r}; known: {', '.join(cls.NAMES)}")
        return cls(**flags)

    def names(self):
        out = []
        if self.drop_beta_over_L:
            out.append("drop_beta_over_L")
        if self.connection_corrected_maxwell:
            out.append("connection_corrected_maxwell")
        if not self.geometric_terms:
            out.append("no_geometric_terms")
        return out


def _toggles(t):
    if t is None:
        return Toggles()
    if isinstance(t, Toggles):
        return t
    return Toggles.from_names(t)


# ---------------------------------------------------------------------------
# jet state along a section
# ---------------------------------------------------------------------------


def _val(v):
    return np.asarray(v.value if isinstance(v, ad.Jet) else v, dtype=float)


def _keep(v, names):
    return ad.restrict(v, names) if isinstance(v, ad.Jet) else v


class _SectionState:
    """Fields along the section at x as jets over (x, y-shift, a-shift)."""

    def __init__(self, bg, section, x, xdeg, toggles, seed_gradients=False, ydeg=2):
        self.bg = bg
        self.x = np.asarray(x, dtype=float)
        self.toggles = toggles
        self.section = section
        groups = [("x", 4, xdeg), ("y", 4, ydeg)]
        if seed_gradients:
            groups.append(("a", 16, 1))
        self.space = ad.space(groups)
        self.along = ["x", "a"] if seed_gradients else ["x"]
        X = ad.variables(self.x, self.space, "x")
        Xb = x_jets(self.x, xdeg + 1)
        gt_full, A_full = bg.metric(Xb), bg.potential(Xb)
        dg = _grad_x(gt_full, (4, 4), xdeg)
        dA = _grad_x(A_full, (4,), xdeg)
        gt = _trunc_x(gt_full, xdeg)
        A = _trunc_x(A_full, xdeg)
        self.gt, self.A, self.dA = gt, A, dA
        Y = section(X) + ad.variables(np.zeros(4), self.space, "y")
        self.y = _val(Y)
        a2 = ad.einsum("ij,i,j->", gt, Y, Y)
        if not float(_val(a2)) > 0.0:
            raise NonTimelike(f"section velocity is not timelike at x={list(self.x)}")
        alpha = bg.m * ad.sqrt(a2)
        beta = bg.e * ad.einsum("i,i->", A, Y)
        L = alpha + beta
        if not float(_val(L)) > 0.0:
            raise NonPositiveFinsler(f"L = {float(_val(L)):.6g} along the section")
        L2 = L * L
        g = 0.5 * ad.grad(ad.grad(L2, "y"), "y")
        self.Lfull, self.betafull = L, beta
        self.g = _keep(g, ["x"] + (["y"] if ydeg > 2 else []))
        self.ginv = ad.inv(self.g)
        self.L = _keep(L, ["x"])
        self.beta = _keep(beta, ["x"])
        self.F_em = field_strength(dA)  # depends on x only
        if toggles.geometric_terms:
            dAs = dA
            if seed_gradients:
                a = ad.variables(np.zeros(16), self.space, "a").reshape(4, 4)
                dAs = dA + a
            _, S, Q, M = bracket_tensors(bg.m, bg.e, gt, dg, A, dAs, Y, alpha)
            self.FG_full = geometric_field(S + Q + M, Y, L)
        else:
            self.FG_full = np.zeros((4, 4))
        # geometric field on the section with a = 0, keeping y only when needed
        keep_y = ["y"] if ydeg > 2 else []
        self.FG = _keep(self.FG_full, ["x"] + keep_y)
        self.raising = self.ginv if toggles.geometric_terms else ad.inv(gt)

    def raise2(self, T, inv=None):
        inv = self.raising if inv is None else inv
        return ad.einsum("ma,nb,ab->mn", inv, inv, T)

    @property
    def F_total(self):
        w = 1.0 if self.toggles.drop_beta_over_L else (1.0 - self.beta / self.L)
        return w * (self.bg.e * self.F_em) + self.FG

    def D(self):
        """D[ρ, σ, μ, ν] = ∂F^G_{ρσ}/∂(∂_ν A_μ) as a jet along the section."""
        if not isinstance(self.FG_full, ad.Jet) or "a" not in self.FG_full.space.names:
            return np.zeros((4, 4, 4, 4))
        d = ad.grad(self.FG_full, "a")
        keep = ["x"] + (["y"] if "y" in _names(self.FG) else [])
        return _keep(d, keep).reshape(4, 4, 4, 4)


def _names(v):
    return v.space.names if isinstance(v, ad.Jet) else ()


def _grad_x(v, shape, deg):
    if isinstance(v, ad.Jet):
        return _trunc_x(ad.grad(v, "x"), deg)
    return np.zeros(shape + (4,))


def _trunc_x(v, deg):
    if not isinstance(v, ad.Jet):
        return v
    return ad.convert(v, ad.space([(n, s, min(d, deg)) for n, s, d in v.space.groups]))


class _Deriv:
    """First derivatives along x at the section point.

    Plain mode: total derivative d/dx^ν of the composite x ↦ T(x, y(x)).
    Horizontal mode: δ/δx^ν = d/dx^ν − (∂_ν y^κ + N^κ_ν) ∂/∂y^κ.
    """

    def __init__(self, state: _SectionState, horizontal=False):
        self.horizontal = horizontal
        if horizontal:
            from .curvature import Pipeline
            pl = Pipeline(state.bg, (state.x, state.y), 1, 3)
            self.N = _val(pl.N)
            self.Gamma = _val(pl.Gamma)
            self.ds = ad.taylor_tensor(state.section(x_jets(state.x, 1)), "x", 1)

    def __call__(self, T):
        if not isinstance(T, ad.Jet):
            return np.zeros(np.shape(T) + (4,))
        on = _keep(T, ["x"])
        d = ad.taylor_tensor(on, "x", 1) if "x" in on.space.names else np.zeros(T.shape + (4,))
        if not self.horizontal:
            return d
        dy = ad.taylor_tensor(_keep(T, ["y"]), "y", 1) if "y" in T.space.names \
            else np.zeros(T.shape + (4,))
        return d - np.einsum("...k,kn->...n", dy, self.ds + self.N)


# ---------------------------------------------------------------------------
# pointwise operations
# ---------------------------------------------------------------------------


def raise_geometric_field(bg: ScenarioBackground, p):
    """F^{Gμν} = g^{μα} g^{νβ} F^G_{αβ} with the Finsler inverse."""
    from .spray import effective_dynamics
    ed = effective_dynamics(bg, p)
    ginv = np.linalg.inv(ed.m_eff * 0.5 * _finsler_L(bg, p))
    return ginv @ ed.F_geom @ ginv.T


def _finsler_L(bg, p):
    from .randers import finsler_function
    return finsler_function(bg, p)[0]


@dataclass(frozen=True)
class GeometricEB:
    E: np.ndarray
    B: np.ndarray
    calE: np.ndarray
    calE_T: np.ndarray
    calB: np.ndarray
    calB_T: np.ndarray
    E00: float
    diag: np.ndarray


def eb_decompose(F_up, is_geometric: bool = True) -> GeometricEB:
    """Named slots of a contravariant 4×4 field.

    E^j = F^{j0}; B from F^{jk} = −ε^{jkl}B^l (the antisymmetric part);
    𝓔^j = F^{0j}, 𝓔ᵀ^j = F^{j0}, 𝓑 = (F^{32}, F^{13}, F^{21}),
    𝓑ᵀ = (F^{23}, F^{31}, F^{12}), E00 = F^{00}, diag = F^{jj}.
    """
    F = np.asarray(F_up, dtype=float)
    if not is_geometric and np.abs(F + F.T).max() > 1e-10:
        raise NonAntisymmetric(f"‖F + Fᵀ‖ = {np.abs(F + F.T).max():.3g}")
    E = F[1:, 0].copy()
    B = -0.5 * np.einsum("jkl,jk->l", EPS3, F[1:, 1:])
    calB = np.array([F[3, 2], F[1, 3], F[2, 1]])
    calB_T = np.array([F[2, 3], F[3, 1], F[1, 2]])
    return GeometricEB(E, B, F[0, 1:].copy(), F[1:, 0].copy(), calB, calB_T,
                       float(F[0, 0]), np.diag(F)[1:].copy())


def eb_reassemble(eb: GeometricEB):
    """Inverse of :func:`eb_decompose` for geometric fields."""
    F = np.empty((4, 4))
    F[0, 0] = eb.E00
    F[0, 1:] = eb.calE
    F[1:, 0] = eb.calE_T
    F[1, 1], F[2, 2], F[3, 3] = eb.diag
    F[3, 2], F[1, 3], F[2, 1] = eb.calB
    F[2, 3], F[3, 1], F[1, 2] = eb.calB_T
    return F


# ---------------------------------------------------------------------------
# effective sources and wave equation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EffectiveSources:
    rho_E: float
    J_E: np.ndarray
    J_B: np.ndarray
    rho_G: float
    J_G: np.ndarray
    J: np.ndarray


def _div(dV):
    """∇·V from dV[j, ν] = ∂_ν V^j (spatial j)."""
    return dV[0, 1] + dV[1, 2] + dV[2, 3]


def _curl(dV):
    """(∇×V)_i = ε_{ijk} ∂_j V_k from dV[k, ν] = ∂_ν V_k."""
    return np.einsum("ijk,kj->i", EPS3, dV[:, 1:])


def _sources_from(dFG, J):
    """Effective sources from dFG[μ, ν, λ] = ∂_λ F^{Gμν} and J^μ."""
    d_calE = dFG[0, 1:, :]
    d_calE_T = dFG[1:, 0, :]
    d_calB = np.stack([dFG[3, 2], dFG[1, 3], dFG[2, 1]])
    d_calB_T = np.stack([dFG[2, 3], dFG[3, 1], dFG[1, 2]])
    rho_E = 0.5 * _div(d_calE_T - d_calE)
    J_E = 0.5 * (d_calE - d_calE_T)[:, 0]
    J_B = 0.5 * _curl(d_calB_T - d_calB)
    return EffectiveSources(float(rho_E), J_E, J_B, float(J[0] + rho_E),
                            J[1:] + J_E + J_B, np.asarray(J, dtype=float))


def effective_sources(bg: ScenarioBackground, section, x, toggles=None) -> EffectiveSources:
    """ρ_𝓔 = ½∇·(𝓔ᵀ − 𝓔), J_𝓔 = ½∂₀(𝓔 − 𝓔ᵀ), J_𝓑 = ½∇×(𝓑ᵀ − 𝓑) and totals.

    ``rho_G = J⁰ + ρ_𝓔`` uses the contravariant current.
    """
    st = _SectionState(bg, _section(section, bg), x, 1, _toggles(toggles))
    dFG = _Deriv(st)(st.raise2(st.FG))
    return _sources_from(dFG, _val(bg.current(np.asarray(x, dtype=float))))


def wave_sources(bg: ScenarioBackground, section, x, toggles=None):
    """(rhs_E, rhs_B, gauge) of the wave equations with the effective sources.

    ``rhs_E = ∂₀J^G + ∇ρ^G``, ``rhs_B = −∇×J^G``; ``gauge`` stacks the two
    gauge-condition residuals ``[∂₀J^G + ∇ρ^G, ∇×J^G]`` as a 2×3 array.
    """
    x = np.asarray(x, dtype=float)
    st = _SectionState(bg, _section(section, bg), x, 2, _toggles(toggles))
    FGup = _keep(st.raise2(st.FG), ["x"])
    # second derivatives of F^{Gμν}: [μ, ν, λ, κ]
    d1 = ad.taylor_tensor(FGup, "x", 1)
    d2 = ad.taylor_tensor(FGup, "x", 2)
    Jj = bg.current(x_jets(x, 1))
    J = _val(Jj)
    dJ = ad.taylor_tensor(Jj, "x", 1)
    src = _sources_from(d1, J)
    # derivative of each source along κ
    d_rho = np.empty(4)
    d_JG = np.empty((3, 4))
    for k in range(4):
        s = _sources_from(d2[..., k], dJ[:, k])
        d_rho[k] = s.rho_G
        d_JG[:, k] = s.J_G
    rhs_E = d_JG[:, 0] + d_rho[1:]
    curl = _curl(d_JG)
    gauge = np.stack([rhs_E, curl])
    return rhs_E, -curl, gauge, src


# ---------------------------------------------------------------------------
# field equations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MaxwellResidual:
    source_eq: np.ndarray
    bianchi: np.ndarray
    vacuum_constraint: np.ndarray | None
    berwald_eq: np.ndarray | None
    gauge: np.ndarray | None
    bianchi_max: float = 0.0
    bianchi_upper: float = 0.0
    terms: dict | None = None

    @property
    def gauss(self):
        return float(self.source_eq[0])

    @property
    def ampere(self):
        return self.source_eq[1:]


def _divergence_terms(st: _SectionState, deriv: _Deriv, T_up):
    """∂_ν T^{μν}, with connection terms in horizontal mode."""
    dT = deriv(T_up)
    div = np.einsum("mnn->m", dT)
    if deriv.horizontal:
        Tv = _val(_keep(T_up, ["x"]))
        G = deriv.Gamma
        div = div + np.einsum("mkn,kn->m", G, Tv) + np.einsum("nkn,mk->m", G, Tv)
    return div


def source_residual(bg: ScenarioBackground, section, x, toggles=None, berwald_form=False):
    """Four-vector residual of the sourced Maxwell equation, with its terms.

    ``∂_ν F^{μν} + ∂_ν F^{G[μν]} − ½𝓕^{ρσ}∂_ν D_{ρσ}^{μν}
    − ¼(∂_ν𝓕^{ρσ} D_{ρσ}^{μν} + ∂_ν𝓕_{ρσ} D^{ρσμν}) − J^μ``
    with ``D_{ρσ}^{μν} = ∂F^G_{ρσ}/∂(∂_ν A_μ)``.  ``berwald_form`` keeps only
    the geometric field (no F, and 𝓕 replaced by F^G).
    """
    tg = _toggles(toggles)
    x = np.asarray(x, dtype=float)
    sec = _section(section, bg)
    horizontal = tg.connection_corrected_maxwell
    st = _SectionState(bg, sec, x, 1, tg, seed_gradients=tg.geometric_terms,
                       ydeg=3 if horizontal else 2)
    deriv = _Deriv(st, horizontal)
    terms = {}
    F_up = st.raise2(st.F_em)
    terms["dF"] = np.zeros(4) if berwald_form else _divergence_terms(st, deriv, F_up)
    FG_up = st.raise2(st.FG)
    anti = 0.5 * (FG_up - ad.einsum("mn->nm", FG_up)) if isinstance(FG_up, ad.Jet) else FG_up
    terms["dFG"] = _divergence_terms(st, deriv, anti)
    Ftot = st.FG if berwald_form else st.F_total
    Ftot_up = st.raise2(Ftot)
    D = st.D()
    Dv = _val(D)
    if not isinstance(D, ad.Jet):
        dD = np.zeros((4,) * 5)
    else:
        dD = deriv(D)
    ginv_v = _val(_keep(st.raising, ["x"]))
    Dup = np.einsum("ra,sb,abmn->rsmn", ginv_v, ginv_v, Dv)
    Ftot_up_v = _val(_keep(Ftot_up, ["x"]))
    terms["coupling_dD"] = -0.5 * np.einsum("rs,rsmnn->m", Ftot_up_v, dD)
    terms["coupling_dF"] = -0.25 * (np.einsum("rsn,rsmn->m", deriv(Ftot_up), Dv)
                                    + np.einsum("rsn,rsmn->m", deriv(Ftot), Dup))
    J = _val(bg.current(x))
    terms["J"] = J
    res = terms["dF"] + terms["dFG"] + terms["coupling_dD"] + terms["coupling_dF"] - J
    return res, terms, st


def bianchi_residual(bg: ScenarioBackground, section, x, toggles=None):
    """(folded, max_lower, max_upper).

    ``folded^α = ½ε^{αλμν}∂_λF_{μν}`` vanishes exactly when every cyclic sum
    ``∂_λF_{μν} + ∂_μF_{νλ} + ∂_νF_{λμ}`` does; ``max_lower`` is the largest
    cyclic sum over all index triples.  ``max_upper`` is the same cyclic sum
    for the contravariant F^{μν}, which is not a closed form on a curved
    background and is only reported.
    """
    x = np.asarray(x, dtype=float)
    Xb = x_jets(x, 2)
    A = bg.potential(Xb)
    d2A = ad.taylor_tensor(A, "x", 2)  # [a, c, d] = ∂_c∂_d A_a
    # ∂_λ F_{μν} = ∂_λ∂_μ A_ν − ∂_λ∂_ν A_μ, stored [μ, ν, λ]
    dF = np.einsum("nml->mnl", d2A) - d2A
    cyc = dF + np.einsum("nlm->mnl", dF) + np.einsum("lmn->mnl", dF)
    folded = 0.5 * np.einsum("almn,mnl->a", LEVI_CIVITA, dF)
    st = _SectionState(bg, _section(section, bg), x, 1, _toggles(toggles))
    dFu = _Deriv(st)(st.raise2(st.F_em))
    cyc_u = dFu + np.einsum("nlm->mnl", dFu) + np.einsum("lmn->mnl", dFu)
    return folded, float(np.abs(cyc).max()), float(np.abs(cyc_u).max())


def maxwell_residual(bg: ScenarioBackground, section=None, x=None, toggles=None,
                     with_gauge: bool = True) -> MaxwellResidual:
    """All Maxwell residuals at x along ``section`` (default: static observer)."""
    x = np.asarray(x, dtype=float)
    sec = _section(section, bg)
    tg = _toggles(toggles)
    res, terms, st = source_residual(bg, sec, x, tg)
    folded, bmax, bup = bianchi_residual(bg, sec, x, tg)
    vac = None
    if not bg.has_potential:
        vac = vacuum_constraint_residual(bg, (x, st.y))[0]
    bw = None
    if berwald_report(bg, (x, st.y)).is_berwald:
        bw = berwald_maxwell_residual(bg, sec, x, tg, check=False)
    gauge = wave_sources(bg, sec, x, tg)[2] if with_gauge else None
    return MaxwellResidual(res, folded, vac, bw, gauge, bmax, bup, terms)


def berwald_maxwell_residual(bg: ScenarioBackground, section, x, toggles=None, check=True):
    """Residual of the sourced equation keeping only the geometric field."""
    x = np.asarray(x, dtype=float)
    sec = _section(section, bg)
    if check:
        y = sec(x)
        if not berwald_report(bg, (x, y)).is_berwald:
            raise NotBerwald(f"B_j|k does not vanish at x={list(x)}")
    return source_residual(bg, sec, x, toggles, berwald_form=True)[0]


def vacuum_constraint_residual(bg: ScenarioBackground, p):
    """(terms[μ, ν], vector[μ]) of the vacuum constraint on L = 1.

    With y rescaled to L(x, y) = 1 and h^{νρμσ} = g^{νρ} g^{μσ}::

        y^κ h^{νρμσ}(∂_ν∂_σ g̃_{ρκ} − ∂_ν∂_ρ g̃_{σκ})
          + y^κ(∂_σ g̃_{ρκ} − ∂_ρ g̃_{σκ}) ∂_ν h^{νρμσ}

    where ∂_ν acts at fixed y; ``terms`` holds the summand for each ν and
    ``vector`` its sum over ν.
    """
    from .randers import _point
    x, y = _point(p)
    if bg.has_potential and np.any(bg.potential(x) != 0.0):
        raise NotVacuum(f"A does not vanish at x={list(x)}")
    from .randers import finsler_function
    y = y / finsler_function(bg, (x, y))[0]
    sp = ad.space([("x", 4, 1), ("y", 4, 2)])
    Xs = x_jets(x, 2)
    gt = bg.metric(Xs)
    d1 = ad.taylor_tensor(gt, "x", 1)  # [a, b, c]
    d2 = ad.taylor_tensor(gt, "x", 2)  # [a, b, c, d]
    Y = ad.variables(y, sp, "y")
    gt1 = _trunc_x(gt, 1)
    a2 = ad.einsum("ij,i,j->", gt1, Y, Y)
    L = bg.m * ad.sqrt(a2)
    g = 0.5 * ad.grad(ad.grad(L * L, "y"), "y")
    g = _keep(g, ["x"])
    ginv = ad.inv(g) if isinstance(g, ad.Jet) else np.linalg.inv(g)
    gi = _val(ginv)
    dgi = ad.taylor_tensor(ginv, "x", 1)  # [a, b, c]
    # first part, [μ, ν]
    # second[ρ, ν, σ] = ∂_ν∂_σ g̃_{ρκ}y^κ − ∂_ν∂_ρ g̃_{σκ}y^κ
    second = np.einsum("rkns,k->rns", d2, y) - np.einsum("sknr,k->rns", d2, y)
    part1 = np.einsum("nr,ms,rns->mn", gi, gi, second)
    first = np.einsum("rks,k->rs", d1, y) - np.einsum("skr,k->rs", d1, y)
    # ∂_ν(g^{νρ} g^{μσ}) with the derivative index ν shared
    dh = np.einsum("nrn,ms->mnrs", dgi, gi) + np.einsum("nr,msn->mnrs", gi, dgi)
    part2 = np.einsum("rs,mnrs->mn", first, dh)
    terms = part1 + part2
    return terms, terms.sum(axis=1)
