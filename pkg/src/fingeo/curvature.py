"""Connections, curvature, Einstein and stress-energy tensors.

Everything is derived from ``L²`` as a jet over independent position and
velocity groups.  A :class:`Pipeline` fixes the jet budget: ``xd``
x-derivatives and ``yd`` y-derivatives of ``L²``.  Each derived object loses
degrees as it is differentiated:

=====================  ==================
object                 (x, y) degrees
=====================  ==================
L²                     (xd, yd)
g, g⁻¹                 (xd, yd − 2)
G                      (xd − 1, yd − 2)
N                      (xd − 1, yd − 3)
δT/δx                  one less in each
=====================  ==================

so Γ at a point needs (1, 3), curvature (2, 4), the Ricci tensor (2, 6) and
the divergence of the Einstein tensor (3, 7).

Index conventions: derivative indices are appended last; ``Gamma[λ, μ, ν]``
is Γ^λ_{μν}; ``R_full[μ, λ, σ, ν]`` is R_μ^λ_{σν}; ``R_hv[μ, ν, κ]`` is
R^μ_{νκ}.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from . import adnum as ad
from .background import ScenarioBackground, x_jets
from .randers import NonPositiveFinsler, NonTimelike, _point
from .spray import christoffel, effective_dynamics, berwald_report, BERWALD_TOL

__all__ = [
    "Pipeline",
    "ConnectionBundle",
    "CurvatureBundle",
    "DivergenceReport",
    "nonlinear_connection",
    "chern_connection",
    "chern_riemann",
    "ricci",
    "ricci_scalars",
    "lambda_and_einstein",
    "stress_energy",
    "covariant_derivative",
    "metric_sampler",
    "divergence_probe",
    "curvature_bundle",
]


def _value(v):
    return np.asarray(v.value if isinstance(v, ad.Jet) else v, dtype=float)


def _truncate(v, xd, yd):
    """Drop Taylor terms above (xd, yd); plain arrays pass through."""
    if not isinstance(v, ad.Jet):
        return v
    groups = []
    for n, s, d in v.space.groups:
        if n == "x":
            d = min(d, xd)
        elif n == "y":
            d = min(d, yd)
        groups.append((n, s, d))
    return ad.convert(v, ad.space(groups))


class Pipeline:
    """Lazily evaluated jet quantities at one tangent point.

    ``xd`` and ``yd`` are the x- and y-degrees carried by ``L²``.
    """

    def __init__(self, bg: ScenarioBackground, p, xd: int, yd: int):
        if xd < 1 or yd < 3:
            raise ValueError("a pipeline needs at least (1, 3) degrees")
        self.bg = bg
        self.x, self.y = _point(p)
        self.xd, self.yd = xd, yd
        self.space = ad.space([("x", 4, xd), ("y", 4, yd)])
        self.X = ad.variables(self.x, self.space, "x")
        self.Y = ad.variables(self.y, self.space, "y")

    # -- Finsler function ---------------------------------------------------
    @functools.cached_property
    def fields(self):
        # background fields only depend on x, so evaluate them on a small
        # x-only space and let products embed them
        Xs = x_jets(self.x, self.xd)
        return self.bg.metric(Xs), self.bg.potential(Xs)

    @functools.cached_property
    def scalars(self):
        gt, A = self.fields
        a2 = ad.einsum("ij,i,j->", gt, self.Y, self.Y)
        if not float(_value(a2)) > 0.0:
            raise NonTimelike(f"g̃(y, y) = {float(_value(a2)):.6g} is not positive")
        alpha = self.bg.m * ad.sqrt(a2)
        beta = self.bg.e * ad.einsum("i,i->", A, self.Y)
        L = alpha + beta
        if not float(_value(L)) > 0.0:
            raise NonPositiveFinsler(f"L = {float(_value(L)):.6g} is not positive")
        return L, alpha, beta

    @property
    def L(self):
        return self.scalars[0]

    @functools.cached_property
    def L2(self):
        return self.L * self.L

    @functools.cached_property
    def dyL2(self):
        return ad.grad(self.L2, "y")

    @functools.cached_property
    def g(self):
        return 0.5 * ad.grad(self.dyL2, "y")

    @functools.cached_property
    def ginv(self):
        return ad.inv(self.g)

    @functools.cached_property
    def G(self):
        H = ad.grad(self.dyL2, "x")
        W = ad.einsum("nk,k->n", H, self.Y) - ad.grad(self.L2, "x")
        return 0.25 * ad.einsum("mn,n->m", self.ginv, W)

    @functools.cached_property
    def N(self):
        """N[μ, ν] = ∂G^μ/∂y^ν."""
        return ad.grad(self.G, "y")

    def delta(self, T):
        """Horizontal derivative δT/δx^c = ∂_c T − N^s_c ∂T/∂y^s, new last axis."""
        if not isinstance(T, ad.Jet):
            return np.zeros(np.shape(T) + (4,))
        dx = ad.grad(T, "x")
        dy = ad.grad(T, "y")
        sub = "ABCDEFGH"[:T.ndim]
        return dx - ad.einsum(f"{sub}s,sc->{sub}c", dy, self.N)

    # -- connections ----------------------------------------------------------
    @functools.cached_property
    def dg(self):
        """δg[a, b, c] = δ_c g_ab."""
        return self.delta(self.g)

    @functools.cached_property
    def Gamma(self):
        """Chern connection by the Christoffel trick on δg."""
        dg = self.dg
        low = (ad.einsum("srn->snr", dg) + ad.einsum("snr->snr", dg)
               - ad.einsum("nrs->snr", dg))
        return 0.5 * ad.einsum("ms,snr->mnr", self.ginv, low)

    @functools.cached_property
    def R_full(self):
        Gam = self.Gamma
        dGam = self.delta(Gam)
        return (ad.einsum("lmns->mlsn", dGam) - ad.einsum("lmsn->mlsn", dGam)
                + ad.einsum("lrs,rmn->mlsn", Gam, Gam)
                - ad.einsum("lrn,rms->mlsn", Gam, Gam))

    @functools.cached_property
    def R_hv(self):
        N = self.N
        dxN = ad.grad(N, "x")  # [μ, κ, ν] = ∂_ν N^μ_κ
        dyN = ad.grad(N, "y")  # [μ, ν, σ] = ∂N^μ_ν/∂y^σ
        return (ad.einsum("mkn->mnk", dxN) - ad.einsum("mnk->mnk", dxN)
                + ad.einsum("sk,mns->mnk", N, dyN)
                - ad.einsum("sn,mks->mnk", N, dyN))

    # -- Ricci ------------------------------------------------------------------
    @functools.cached_property
    def Ric(self):
        """Scalar Ricci curvature from the spray."""
        G = self.G
        Y = self.Y
        dxG = ad.grad(G, "x")            # [μ, κ]
        dyG = self.N                      # [μ, κ]
        div_y = ad.einsum("mm->", dyG)
        t1 = 2.0 * ad.einsum("mm->", dxG)
        t2 = ad.einsum("k,k->", Y, ad.grad(div_y, "x"))
        t3 = 2.0 * ad.einsum("k,k->", G, ad.grad(div_y, "y"))
        t4 = ad.einsum("mk,km->", dyG, dyG)
        return t1 - t2 + t3 - t4

    @functools.cached_property
    def Ric_contracted(self):
        return ad.einsum("r,rmms,s->", self.Y, self.R_full, self.Y)

    @functools.cached_property
    def Ric_tensor(self):
        return 0.5 * ad.grad(ad.grad(self.Ric, "y"), "y")

    @functools.cached_property
    def cartan_A(self):
        """A_{κλσ} = (L/2) ∂g_{κλ}/∂y^σ."""
        return 0.5 * self.L * ad.grad(self.g, "y")

    @functools.cached_property
    def Lambda(self):
        R = self.R_hv / self.L
        B = -ad.einsum("kls,smn->klmn", self.cartan_A, R)
        ginv = self.ginv
        return (0.5 * ad.einsum("kl,klmn->mn", ginv, B)
                + ad.einsum("kl,mlnk->mn", ginv, B))

    @functools.cached_property
    def S_scalar(self):
        return ad.einsum("mn,mn->", self.ginv, self.Ric_tensor)

    @functools.cached_property
    def Einstein(self):
        return self.Ric_tensor - 0.5 * self.S_scalar * self.g + self.Lambda

    def at(self, name, xd=0, yd=0):
        """Attribute ``name`` truncated to the given degrees."""
        return _truncate(getattr(self, name), xd, yd)


def _plain(v):
    return _value(v).copy()


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConnectionBundle:
    N: np.ndarray
    Gamma: np.ndarray
    gamma: np.ndarray
    gamma_tilde: np.ndarray
    cross_check_gap: float


def nonlinear_connection(bg: ScenarioBackground, p):
    """N^μ_ν = ∂G^μ/∂y^ν."""
    return _plain(Pipeline(bg, p, 1, 3).N)


def _gamma_fixed_y(pl: Pipeline):
    g = _truncate(pl.g, 1, 0)
    dg = ad.taylor_tensor(g, "x", 1)
    return christoffel(_plain(pl.ginv), dg)


def chern_connection(bg: ScenarioBackground, p):
    """(Γ, cross_check_gap).

    Γ comes from the Christoffel trick with horizontal derivatives of g;
    the cross-check rebuilds it as γ minus Cartan-tensor corrections,
    ``Γ^μ_{νρ} = γ^μ_{νρ} − g^{μσ}(C_{σρκ}N^κ_ν + C_{σνκ}N^κ_ρ − C_{νρκ}N^κ_σ)``.
    """
    pl = Pipeline(bg, p, 1, 3)
    Gam = _plain(pl.Gamma)
    gamma = _gamma_fixed_y(pl)
    ginv = _plain(pl.ginv)
    C = 0.5 * ad.taylor_tensor(_truncate(pl.g, 0, 1), "y", 1)
    N = _plain(pl.N)
    corr = (np.einsum("srk,kn->snr", C, N) + np.einsum("snk,kr->snr", C, N)
            - np.einsum("nrk,ks->snr", C, N))
    alt = gamma - np.einsum("ms,snr->mnr", ginv, corr)
    return Gam, float(np.abs(Gam - alt).max())


def connection_bundle(bg: ScenarioBackground, p) -> ConnectionBundle:
    pl = Pipeline(bg, p, 1, 3)
    Gam, gap = chern_connection(bg, p)
    x, _ = _point(p)
    gt = bg.metric(x_jets(x, 1))
    gamma_t = christoffel(np.linalg.inv(_value(gt)), ad.taylor_tensor(gt, "x", 1))
    return ConnectionBundle(_plain(pl.N), Gam, _gamma_fixed_y(pl), gamma_t, gap)


def chern_riemann(bg: ScenarioBackground, p):
    """(R_full, R_hv, contraction_gap) with the gap max|y^ρ R_ρ^μ_{νκ} − R^μ_{νκ}|."""
    pl = Pipeline(bg, p, 2, 4)
    R_full = _plain(pl.R_full)
    R_hv = _plain(pl.R_hv)
    gap = float(np.abs(np.einsum("r,rmnk->mnk", pl.y, R_full) - R_hv).max())
    return R_full, R_hv, gap


def ricci_scalars(bg: ScenarioBackground, p):
    """(Ric from the spray formula, Ric from y R y) at the cheaper (2, 4) budget."""
    pl = Pipeline(bg, p, 2, 4)
    return float(_value(pl.Ric)), float(_value(pl.Ric_contracted))


def ricci(bg: ScenarioBackground, p):
    """(R_map, Ric, Ric_tensor, S_scalar, Ric_contracted)."""
    pl = Pipeline(bg, p, 2, 6)
    R_map = np.einsum("mnk,k->mn", _plain(pl.R_hv), pl.y)
    return (R_map, float(_value(pl.Ric)), _plain(pl.Ric_tensor),
            float(_value(pl.S_scalar)), float(_value(pl.Ric_contracted)))


def lambda_and_einstein(bg: ScenarioBackground, p):
    """(A_cartan, Λ, Einstein)."""
    pl = Pipeline(bg, p, 2, 6)
    return _plain(pl.cartan_A), _plain(pl.Lambda), _plain(pl.Einstein)


def stress_energy(bg: ScenarioBackground, p, convention: str = "trace-free"):
    """T_{μν} = 𝓕_{μσ}𝓕^σ_ν + ¼ g_{μν} 𝓕_{αβ}𝓕^{αβ}, raised with g⁻¹.

    This sign gives T₀₀ = ½(E² + B²) in flat spacetime and a vanishing trace
    for antisymmetric 𝓕.  ``convention="minus-quarter"`` flips the sign of the trace
    term.
    """
    x, y = _point(p)
    ed = effective_dynamics(bg, (x, y))
    g = ed.m_eff * 0.5 * float(_value(Pipeline(bg, p, 1, 3).L))
    return _stress_from(ed.F_total, g, np.linalg.inv(g), convention)


def _stress_from(F, g, ginv, convention="trace-free"):
    if convention not in ("trace-free", "minus-quarter"):
        raise ValueError(f"unknown convention {convention!r}")
    sign = 0.25 if convention == "trace-free" else -0.25
    Fmix = ad.einsum("sa,an->sn", ginv, F)
    Fup = ad.einsum("ma,nb,ab->mn", ginv, ginv, F)
    FF = ad.einsum("ab,ab->", F, Fup)
    return ad.einsum("ms,sn->mn", F, Fmix) + sign * FF * g


@dataclass(frozen=True)
class CurvatureBundle:
    R_full: np.ndarray
    R_hv: np.ndarray
    R_map: np.ndarray
    Ric: float
    Ric_contracted: float
    Ric_tensor: np.ndarray
    S_scalar: float
    A_cartan: np.ndarray
    Lambda: np.ndarray
    Einstein: np.ndarray
    T: np.ndarray
    is_berwald: bool

    @property
    def einstein_antisymmetry(self):
        return float(np.abs(self.Einstein - self.Einstein.T).max())


def curvature_bundle(bg: ScenarioBackground, p) -> CurvatureBundle:
    """Every curvature object at one point from a single (2, 6) pipeline."""
    pl = Pipeline(bg, p, 2, 6)
    R_hv = _plain(pl.R_hv)
    return CurvatureBundle(
        _plain(pl.R_full), R_hv, np.einsum("mnk,k->mn", R_hv, pl.y),
        float(_value(pl.Ric)), float(_value(pl.Ric_contracted)),
        _plain(pl.Ric_tensor), float(_value(pl.S_scalar)), _plain(pl.cartan_A),
        _plain(pl.Lambda), _plain(pl.Einstein), stress_energy(bg, p),
        berwald_report(bg, p).is_berwald)


# ---------------------------------------------------------------------------
# covariant derivatives and divergence
# ---------------------------------------------------------------------------


def metric_sampler(pl: Pipeline):
    """Sampler returning the fundamental tensor of the pipeline."""
    return pl.g


def covariant_derivative(sampler, bg: ScenarioBackground, p, kind: str = "02",
                         y_extra: int = 2):
    """(horizontal, vertical) derivatives of a tensor field at p.

    ``sampler(pipeline)`` returns the field as a jet over the pipeline's
    (x, y) space; it must keep at least one x- and one y-degree after the
    ``y_extra`` y-derivatives it takes internally.  ``kind`` is ``"02"`` for
    T_{μν} or ``"11"`` for T^ν_μ stored as ``T[μ, ν]``.  The horizontal slot
    is ``δT/δx`` plus Chern connection terms, the vertical slot the plain
    y-derivative; both append the new index last.
    """
    pl = Pipeline(bg, p, 1, max(3, 1 + y_extra))
    T = sampler(pl)
    Gam = _plain(pl.Gamma) if isinstance(T, ad.Jet) else None
    dT = _plain(pl.delta(T))
    Tv = _value(T)
    vert = ad.taylor_tensor(_truncate(T, 0, 1), "y", 1)
    if Gam is None:
        return dT, vert
    if kind == "02":
        horiz = (dT - np.einsum("kn,kml->mnl", Tv, Gam)
                 - np.einsum("mk,knl->mnl", Tv, Gam))
    elif kind == "11":
        horiz = (dT + np.einsum("mk,nkl->mnl", Tv, Gam)
                 - np.einsum("kn,kml->mnl", Tv, Gam))
    else:
        raise ValueError("kind must be '02' or '11'")
    return horiz, vert


@dataclass(frozen=True)
class DivergenceReport:
    div_Einstein_h: np.ndarray
    div_T_h: np.ndarray
    div_Einstein_v: np.ndarray
    einstein_norm: float
    is_berwald: bool

    @property
    def relative(self):
        return float(np.abs(self.div_Einstein_h).max() / max(self.einstein_norm, 1e-12))


def _divergence(pl: Pipeline, E):
    """g^{μλ}(δE_{μν}/δx^λ − E_{κν}Γ^κ_{μλ} − E_{μκ}Γ^κ_{νλ}) at the point."""
    ginv = _plain(pl.ginv)
    Gam = _plain(_truncate(pl.Gamma, 0, 0))
    Ev = _value(E)
    dE = _plain(pl.delta(E))
    h = (dE - np.einsum("kn,kml->mnl", Ev, Gam) - np.einsum("mk,knl->mnl", Ev, Gam))
    return np.einsum("ml,mnl->n", ginv, h)


def divergence_probe(bg: ScenarioBackground, p) -> DivergenceReport:
    """Horizontal divergence of the Einstein tensor and of T.

    Runs a (3, 7) pipeline so the Einstein tensor is available with one x-
    and one y-derivative.  The vertical divergence ``g^{μλ}∂E_{μν}/∂y^λ`` is
    reported alongside.
    """
    pl = Pipeline(bg, p, 3, 7)
    E = _truncate(pl.Einstein, 1, 1)
    div_E = _divergence(pl, E)
    dEv = ad.taylor_tensor(_truncate(E, 0, 1), "y", 1)
    div_v = np.einsum("ml,mnl->n", _plain(pl.ginv), dEv)
    T = _stress_jet(bg, pl)
    div_T = _divergence(pl, T)
    return DivergenceReport(div_E, div_T, div_v, float(np.abs(_value(E)).max()),
                            berwald_report(bg, p).is_berwald)


def _stress_jet(bg, pl: Pipeline):
    """Stress-energy as a (1, 1) jet over the pipeline space."""
    from .spray import bracket_tensors, field_strength, geometric_field

    gt, A = pl.fields
    Xs = x_jets(pl.x, 2)
    gt2, A2 = bg.metric(Xs), bg.potential(Xs)
    dg = _grad_or_zero(gt2, (4, 4))
    dA = _grad_or_zero(A2, (4,))
    Y = _truncate(pl.Y, 1, 1)
    L, alpha, beta = (_truncate(v, 1, 1) for v in pl.scalars)
    F, S, Q, M = bracket_tensors(bg.m, bg.e, _truncate(gt, 1, 1), dg, _truncate(A, 1, 1),
                                 dA, Y, alpha)
    FG = geometric_field(S + Q + M, Y, L)
    Ftot = (1.0 - beta / L) * (bg.e * F) + FG
    g = _truncate(pl.g, 1, 1)
    ginv = _truncate(pl.ginv, 1, 1)
    return _stress_from(Ftot, g, ginv)


def _grad_or_zero(v, shape):
    if isinstance(v, ad.Jet):
        return _truncate(ad.grad(v, "x"), 1, 1)
    return np.zeros(shape + (4,))
