"""Geodesic coefficients, their F/S/Q/M decomposition, effective dynamics,
Berwald diagnostics and the geodesic integrator.

Three independent routes to the spray ``G^μ``:

* general:     ``G = ¼ g⁻¹ (∂_y∂_x L² · y − ∂_x L²)`` from mixed (x, y) jets;
* decomposed:  ``G = ¼ g⁻¹ (−2eαF·y + (S + Q + M)·y·y)`` from background
  first derivatives;
* Christoffel: ``G = ½ γ y y`` with γ built from ``∂_x g`` at fixed y.

Index conventions: derivative indices are appended last for background
fields; ``S[ν, λ, σ]`` etc. follow the written index order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import adnum as ad
from .adnum import DomainError
from .background import ScenarioBackground, x_jets
from .randers import (
    TangentPoint,
    _point,
    closed_metric,
    finsler_scalars,
    randers_inverse,
    xy_jets,
)

__all__ = [
    "S_COEFFICIENTS",
    "SprayBundle",
    "EffectiveDynamics",
    "BerwaldReport",
    "GeodesicTrajectory",
    "DomainExit",
    "BERWALD_TOL",
    "christoffel",
    "field_strength",
    "bracket_tensors",
    "geometric_field",
    "spray_jet",
    "spray_general",
    "spray_decomposed",
    "spray_christoffel",
    "effective_dynamics",
    "berwald_report",
    "integrate_geodesic",
    "fast_spray",
]

# weights of the three S-tensor terms (in units of e², e², e)
S_COEFFICIENTS = (2.0, -1.0, 2.0)

BERWALD_TOL = 1e-9


class DomainExit(DomainError):
    """A trajectory left the timelike cone or the expressions' domain."""


# ---------------------------------------------------------------------------
# tensor building blocks (floats or jets)
# ---------------------------------------------------------------------------


def christoffel(ginv, dg):
    """γ^λ_{μν} = ½ g^{λσ}(∂_μ g_{σν} + ∂_ν g_{μσ} − ∂_σ g_{μν}).

    ``dg[a, b, c] = ∂_c g_ab``; the result is indexed ``[λ, μ, ν]``.
    """
    low = (ad.einsum("snm->smn", dg) + ad.einsum("msn->smn", dg)
           - ad.einsum("mns->smn", dg))
    return 0.5 * ad.einsum("ls,smn->lmn", ginv, low)


def field_strength(dA):
    """F_{νσ} = ∂_ν A_σ − ∂_σ A_ν from ``dA[a, c] = ∂_c A_a``."""
    return ad.einsum("sn->ns", dA) - dA


def bracket_tensors(m, e, gt, dg, A, dA, y, alpha, a_tilde=None):
    """F, S, Q, M at one point (floats or jets).

    ``S_{νλσ} = 2e²∂_λ(A_νA_σ) − e²∂_ν(A_λA_σ) + 2e∂_σ(A_λℓ_ν)`` with the ℓ
    derivative taken at fixed y, ``Q_{νλσ} = m²(2∂_σg̃_{νλ} − ∂_νg̃_{λσ})`` and
    ``M_{νλσ} = (em/α̃)(A_ν ∂_κg̃_{λσ} − A_κ ∂_νg̃_{λσ}) y^κ``.
    """
    c1, c2, c3 = S_COEFFICIENTS
    if a_tilde is None:
        a_tilde = alpha / m
    F = field_strength(dA)
    # ∂_λ(A_ν A_σ) indexed [ν, σ, λ]
    dAA = ad.einsum("nl,s->nsl", dA, A) + ad.einsum("n,sl->nsl", A, dA)
    ell = (m ** 2 / alpha) * ad.einsum("nr,r->n", gt, y)
    dgyy = ad.einsum("abs,a,b->s", dg, y, y)
    d_alpha = (m ** 2 / (2.0 * alpha)) * dgyy
    # ∂_σ ℓ_ν at fixed y, indexed [ν, σ]
    d_ell = ((m ** 2 / alpha) * ad.einsum("nrs,r->ns", dg, y)
             - ad.einsum("n,s->ns", ell, d_alpha) / alpha)
    # ∂_σ(A_λ ℓ_ν) indexed [λ, ν, σ]
    dAl = ad.einsum("ls,n->lns", dA, ell) + ad.einsum("l,ns->lns", A, d_ell)
    S = (c1 * e ** 2 * ad.einsum("nsl->nls", dAA)
         + c2 * e ** 2 * ad.einsum("lsn->nls", dAA)
         + c3 * e * ad.einsum("lns->nls", dAl))
    Q = m ** 2 * (2.0 * ad.einsum("nls->nls", dg) - ad.einsum("lsn->nls", dg))
    dgy = ad.einsum("lsk,k->ls", dg, y)
    Ay = ad.einsum("k,k->", A, y)
    M = (e * m / a_tilde) * (ad.einsum("n,ls->nls", A, dgy) - Ay * ad.einsum("lsn->nls", dg))
    return F, S, Q, M


def spray_bracket(e, alpha, F, T, y):
    """``(−2eαF_{νσ} + T_{νλσ} y^λ) y^σ`` with ``T = S + Q + M``."""
    return (-2.0 * e) * alpha * ad.einsum("ns,s->n", F, y) + ad.einsum("nls,l,s->n", T, y, y)


def geometric_field(T, y, L):
    """F^G_{μν} = −(y^λ / 2L) T_{μλν}."""
    return (-0.5 / L) * ad.einsum("mln,l->mn", T, y)


# ---------------------------------------------------------------------------
# spray routes
# ---------------------------------------------------------------------------


def spray_jet(bg: ScenarioBackground, X, Y, return_parts=False):
    """Spray as a jet over the joint (x, y) space of ``X`` and ``Y``.

    Needs x-degree ≥ 1 and y-degree ≥ 2; the result loses one x-degree and
    two y-degrees.
    """
    L, alpha, beta, _ = finsler_scalars(bg, X, Y)
    L2 = L * L
    dy = ad.grad(L2, "y")
    g = 0.5 * ad.grad(dy, "y")
    H = ad.grad(dy, "x")  # H[ν, κ] = ∂_{x^κ} ∂_{y^ν} L²
    W = ad.einsum("nk,k->n", H, Y) - ad.grad(L2, "x")
    ginv = ad.inv(g)
    G = 0.25 * ad.einsum("mn,n->m", ginv, W)
    if return_parts:
        return G, {"L": L, "alpha": alpha, "beta": beta, "g": g, "ginv": ginv, "L2": L2}
    return G


def spray_general(bg: ScenarioBackground, p):
    """G^μ by the general mixed-derivative formula (authoritative)."""
    x, y = _point(p)
    X, Y = xy_jets(x, y, 1, 2)
    return np.asarray(spray_jet(bg, X, Y).value)


def _fields_d1(bg, x):
    X = x_jets(x, 1)
    gtj = bg.metric(X)
    Aj = bg.potential(X)
    gt = np.asarray(ad.value_of(gtj), dtype=float) if isinstance(gtj, ad.Jet) else gtj
    A = np.asarray(ad.value_of(Aj), dtype=float) if isinstance(Aj, ad.Jet) else Aj
    return gt, ad.taylor_tensor(gtj, "x", 1), A, ad.taylor_tensor(Aj, "x", 1)


def _hessian_metric(bg, x, y):
    from .randers import fundamental_tensor_hessian
    return fundamental_tensor_hessian(bg, (x, y))


def spray_christoffel(bg: ScenarioBackground, p):
    """(G, γ) with γ the Christoffel symbols of g(x, y) at fixed y."""
    x, y = _point(p)
    X, Y0 = xy_jets(x, y, 1, 2)
    L, _, _, _ = finsler_scalars(bg, X, Y0)
    L2 = L * L
    g = 0.5 * ad.grad(ad.grad(L2, "y"), "y")  # jet in (x:1, y:0)
    gv = np.asarray(g.value)
    dg = ad.taylor_tensor(g, "x", 1)
    gamma = christoffel(ad.inv(gv), dg)
    G = 0.5 * np.einsum("lmn,m,n->l", gamma, y, y)
    return G, gamma


@dataclass(frozen=True)
class SprayBundle:
    G: np.ndarray
    F_em: np.ndarray
    S: np.ndarray
    Q: np.ndarray
    M: np.ndarray
    gamma: np.ndarray
    gamma_tilde: np.ndarray
    route_spread: float
    G_general: np.ndarray
    G_christoffel: np.ndarray
    term_contributions: dict = field(default_factory=dict)


def _rel_spread(*vectors):
    scale = max(max(float(np.abs(v).max()) for v in vectors), 1e-300)
    spread = 0.0
    for i in range(len(vectors)):
        for j in range(i + 1, len(vectors)):
            spread = max(spread, float(np.abs(vectors[i] - vectors[j]).max()))
    return spread / scale if spread else 0.0


def spray_decomposed(bg: ScenarioBackground, p) -> SprayBundle:
    """Assemble G from F, S, Q, M and compare with the other two routes.

    ``route_spread`` is the largest pairwise deviation among the three
    routes relative to the largest |G| entry; ``term_contributions`` splits
    ``G`` into the parts carried by each tensor.
    """
    x, y = _point(p)
    gt, dg, A, dA = _fields_d1(bg, x)
    L, alpha, beta, _ = finsler_scalars(bg, x, y, gt=gt, A=A)
    g = _hessian_metric(bg, x, y)
    ginv = ad.inv(g)
    F, S, Q, M = bracket_tensors(bg.m, bg.e, gt, dg, A, dA, y, alpha)
    W = spray_bracket(bg.e, alpha, F, S + Q + M, y)
    G = 0.25 * ginv @ W
    parts = {
        "F": 0.25 * ginv @ (-2.0 * bg.e * alpha * F @ y),
        "S": 0.25 * ginv @ np.einsum("nls,l,s->n", S, y, y),
        "Q": 0.25 * ginv @ np.einsum("nls,l,s->n", Q, y, y),
        "M": 0.25 * ginv @ np.einsum("nls,l,s->n", M, y, y),
    }
    Gg = spray_general(bg, (x, y))
    Gc, gamma = spray_christoffel(bg, (x, y))
    gamma_t = christoffel(np.linalg.inv(gt), dg)
    return SprayBundle(G, F, S, Q, M, gamma, gamma_t, _rel_spread(G, Gg, Gc), Gg, Gc, parts)


# ---------------------------------------------------------------------------
# effective dynamics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EffectiveDynamics:
    m_eff: np.ndarray
    f: np.ndarray
    F_total: np.ndarray
    F_geom: np.ndarray
    force_gap: float


def effective_dynamics(bg: ScenarioBackground, p, drop_beta_over_L: bool = False) -> EffectiveDynamics:
    """m^E = 2g/L, f = −2gG/L, F^G and the total field 𝓕.

    The electromagnetic part of 𝓕 is the field strength of the one-form
    ``b = eA``, i.e. ``𝓕 = (1 − β/L)·eF + F^G``, which makes ``f = 𝓕·y``
    hold identically.  ``drop_beta_over_L`` removes the β/L factor.
    """
    x, y = _point(p)
    gt, dg, A, dA = _fields_d1(bg, x)
    L, alpha, beta, _ = finsler_scalars(bg, x, y, gt=gt, A=A)
    g = _hessian_metric(bg, x, y)
    F, S, Q, M = bracket_tensors(bg.m, bg.e, gt, dg, A, dA, y, alpha)
    FG = geometric_field(S + Q + M, y, L)
    weight = 1.0 if drop_beta_over_L else (1.0 - beta / L)
    Ftot = weight * bg.e * F + FG
    G = spray_general(bg, (x, y))
    f = -2.0 * g @ G / L
    gap = float(np.abs(f - Ftot @ y).max())
    return EffectiveDynamics(2.0 * g / L, f, Ftot, FG, gap)


# ---------------------------------------------------------------------------
# Berwald diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BerwaldReport:
    B_cov: np.ndarray
    deviation: np.ndarray
    deviation_literal: np.ndarray
    christoffel_gap: float
    identity_gap: float
    is_berwald: bool
    F_reconstructed: np.ndarray
    torsion_gap: float


def berwald_report(bg: ScenarioBackground, p, tol: float = BERWALD_TOL) -> BerwaldReport:
    """B_{j|k}, the deviation vector 𝓑 and the Christoffel-contraction gap.

    ``B_{j|k} = ∂_k b_j − b_σ γ̃^σ_{jk}`` with ``b = eA``.  The deviation is

        𝓑^i = −(α/m²) g̃^{ij}(B_{j|k} − B_{k|j}) y^k
              − ℓ^i [B_{j|k} y^j y^k + α (y^j b̃^k − y^k b̃^j) B_{j|k}]

    with ``ℓ^i = y^i/L`` and ``b̃ = g̃⁻¹b/m²``, so that
    ``γ y y − γ̃ y y + 𝓑 = 0``.  ``deviation_literal`` uses an ``m²α``
    weight on the first term instead (equal for m = 1).
    """
    x, y = _point(p)
    gt, dg, A, dA = _fields_d1(bg, x)
    L, alpha, beta, _ = finsler_scalars(bg, x, y, gt=gt, A=A)
    m, e = bg.m, bg.e
    gti = np.linalg.inv(gt)
    gamma_t = christoffel(gti, dg)
    b = e * A
    B = e * dA - np.einsum("s,sjk->jk", b, gamma_t)
    bt = gti @ b / m ** 2
    ell_up = y / L
    asym = B - B.T
    second = ell_up * (y @ B @ y + alpha * (y @ B @ bt - bt @ B @ y))
    first = gti @ asym @ y
    dev = -(alpha / m ** 2) * first - second
    dev_lit = -(m ** 2 * alpha) * first - second
    _, gamma = spray_christoffel(bg, (x, y))
    gyy = np.einsum("lmn,m,n->l", gamma, y, y)
    gtyy = np.einsum("lmn,m,n->l", gamma_t, y, y)
    gap = float(np.abs(gyy - gtyy).max())
    ident = float(np.abs(gyy - gtyy + dev).max())
    F_rec = np.einsum("s,snm->mn", A, gamma_t) - np.einsum("s,smn->mn", A, gamma_t)
    F_em = field_strength(dA)
    # B_{ν|μ} − B_{μ|ν} = e F_{μν} + b_σ(γ̃^σ_{νμ} − γ̃^σ_{μν})
    torsion = float(np.abs(B.T - B - e * F_em - e * F_rec).max())
    return BerwaldReport(B, dev, dev_lit, gap, ident, bool(np.abs(B).max() < tol),
                         F_rec, torsion)


# ---------------------------------------------------------------------------
# geodesic integrator
# ---------------------------------------------------------------------------


def fast_spray(bg: ScenarioBackground, x, y):
    """(G, L) on the float path: compiled first derivatives, closed-form
    metric inverse and the F/S/Q/M bracket."""
    gt, dg, A, dA = bg.fields_with_gradient(x)
    m, e = bg.m, bg.e
    a2 = float(y @ gt @ y)
    if not a2 > 0.0:
        raise DomainExit(f"g̃(y, y) = {a2:.6g} is not positive")
    a_tilde = math.sqrt(a2)
    alpha = m * a_tilde
    beta = e * float(A @ y)
    L = alpha + beta
    if not L > 0.0:
        raise DomainExit(f"L = {L:.6g} is not positive")
    F, S, Q, M = bracket_tensors(m, e, gt, dg, A, dA, y, alpha, a_tilde)
    W = spray_bracket(e, alpha, F, S + Q + M, y)
    ginv = randers_inverse(m, np.linalg.inv(gt), e * A, y, L, alpha, beta)
    return 0.25 * ginv @ W, L


def fast_L(bg: ScenarioBackground, x, y):
    gt = bg.metric(x)
    A = bg.potential(x)
    a2 = float(y @ gt @ y)
    if not a2 > 0.0:
        raise DomainExit(f"g̃(y, y) = {a2:.6g} is not positive")
    return bg.m * math.sqrt(a2) + bg.e * float(A @ y)


@dataclass
class GeodesicTrajectory:
    tau: np.ndarray
    x: np.ndarray
    y: np.ndarray
    L: np.ndarray
    accepted: int
    rejected: int
    conservation_drift: float
    domain_exit: bool = False
    message: str = ""

    @property
    def samples(self):
        return list(zip(self.tau, self.x, self.y, self.L))


def integrate_geodesic(bg: ScenarioBackground, init, tau_end: float,
                       rtol: float = 1e-10, atol: float = 1e-10,
                       h0: float | None = None, max_steps: int = 1_000_000,
                       spray=None) -> GeodesicTrajectory:
    """Integrate ``ẋ = y, ẏ = −2G(x, y)`` with RK4 and step doubling.

    Each step compares one full step against two half steps; the two-half
    result is kept when the scaled difference passes.  A domain violation
    truncates the trajectory at the last valid sample and sets
    ``domain_exit``.
    """
    x0, y0 = _point(init)
    if tau_end < 0:
        raise ValueError("tau_end must be non-negative")
    spray = spray or (lambda x, y: fast_spray(bg, x, y)[0])

    def rhs(state):
        x, y = state[:4], state[4:]
        return np.concatenate([y, -2.0 * spray(x, y)])

    def rk4(state, h):
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * h * k1)
        k3 = rhs(state + 0.5 * h * k2)
        k4 = rhs(state + h * k3)
        return state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    state = np.concatenate([x0, y0])
    try:
        L0 = fast_L(bg, x0, y0)
        if not L0 > 0:
            raise DomainExit(f"L = {L0:.6g} is not positive")
    except DomainError as exc:
        raise DomainExit(f"initial point invalid: {exc}") from exc
    taus, states, Ls = [0.0], [state.copy()], [L0]
    tau = 0.0
    h = h0 if h0 is not None else min(0.1, tau_end) if tau_end > 0 else 0.0
    accepted = rejected = 0
    exit_flag, message = False, ""
    while tau < tau_end:
        if accepted + rejected >= max_steps:
            message = "step limit reached"
            break
        h = min(h, tau_end - tau)
        try:
            full = rk4(state, h)
            half = rk4(rk4(state, 0.5 * h), 0.5 * h)
            err_vec = np.abs(half - full) / 15.0
            scale = atol + rtol * np.maximum(np.abs(state), np.abs(half))
            err = float(np.max(err_vec / scale))
            Lnew = fast_L(bg, half[:4], half[4:]) if err <= 1.0 else None
        except DomainError as exc:
            if h > 1e-12 * max(1.0, tau_end):
                h *= 0.25
                rejected += 1
                continue
            exit_flag, message = True, str(exc)
            break
        if err <= 1.0:
            tau = tau_end if tau_end - (tau + h) <= 1e-14 * max(1.0, tau_end) else tau + h
            state = half
            taus.append(tau)
            states.append(state.copy())
            Ls.append(Lnew)
            accepted += 1
        else:
            rejected += 1
        factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        h *= factor
    states = np.array(states)
    Ls = np.array(Ls)
    drift = float(np.max(np.abs(Ls - L0)) / L0)
    return GeodesicTrajectory(np.array(taus), states[:, :4], states[:, 4:], Ls,
                              accepted, rejected, drift, exit_flag, message)
