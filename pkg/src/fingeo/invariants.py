"""Per-probe invariant checks shared by ``validate`` and the test-suite.

Each check returns :class:`Check` rows: an identifier, the measured
residual, the tolerance and whether it passed.  Relative measures divide by
a scale and fall back to the absolute residual when the scale vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import curvature as cv
from . import maxwell as mx
from . import randers as rd
from . import spray as sp
from .adnum import DomainError

__all__ = ["Check", "probe_checks", "summarize", "rel", "LEVELS"]

# pipeline depth: 1 = pointwise Finsler, spray and connection;
# 2 = adds curvature and Maxwell; 3 = adds the divergence probe
LEVELS = (1, 2, 3)


@dataclass(frozen=True)
class Check:
    id: str
    measured: float
    tolerance: float
    passed: bool

    @classmethod
    def le(cls, id, measured, tol):
        m = float(measured)
        return cls(id, m, float(tol), bool(m <= tol))

    @classmethod
    def flag(cls, id, ok):
        return cls(id, 0.0 if ok else 1.0, 0.0, bool(ok))


def rel(diff, scale):
    diff = float(np.max(np.abs(diff)))
    scale = float(np.max(np.abs(scale)))
    return diff / scale if scale > 0 else diff


def _randers_checks(bg, x, y):
    out = []
    fe = rd.finsler_eval(bg, (x, y))
    for lam in (0.5, 2.0):
        L_l = rd.finsler_function(bg, (x, lam * y))[0]
        out.append(Check.le(f"randers.L_homogeneity[{lam}]", rel(L_l - lam * fe.L, fe.L), 1e-12))
        g_l = rd.fundamental_tensor_hessian(bg, (x, lam * y))
        out.append(Check.le(f"randers.g_homogeneity[{lam}]", rel(g_l - fe.g, fe.g), 1e-10))
    out.append(Check.le("randers.euler_yGy", rel(y @ fe.g @ y - fe.L ** 2, fe.L ** 2), 1e-12))
    out.append(Check.le("randers.cartan_y", rel(np.einsum("abc,c->ab", fe.cartan, y), fe.g), 1e-12))
    b = bg.e * bg.potential(x)
    gt = bg.metric(x)
    gc = rd.closed_metric(bg.m, gt, fe.ell, b, fe.L, fe.alpha, 1.0)
    out.append(Check.le("randers.closed_metric", rel(gc - fe.g, fe.g), 1e-10))
    gi = rd.randers_inverse(bg.m, np.linalg.inv(gt), b, y, fe.L, fe.alpha, fe.beta)
    out.append(Check.le("randers.closed_inverse", rel(gi - fe.ginv, fe.ginv), 1e-10))
    out.append(Check.flag("randers.signature", fe.signature_ok))
    return out, fe


def _spray_checks(bg, x, y, fe):
    out = []
    sb = sp.spray_decomposed(bg, (x, y))
    G = sb.G_general
    out.append(Check.le("spray.route_spread", sb.route_spread, 1e-8))
    for lam in (0.5, 2.0):
        Gl = sp.spray_general(bg, (x, lam * y))
        out.append(Check.le(f"spray.G_homogeneity[{lam}]", rel(Gl - lam ** 2 * G, lam ** 2 * G), 1e-10))
    out.append(Check.le("spray.F_antisymmetry", np.abs(sb.F_em + sb.F_em.T).max(), 0.0))
    out.append(Check.le("spray.gamma_symmetry", np.abs(sb.gamma - sb.gamma.transpose(0, 2, 1)).max(), 1e-14))
    ed = sp.effective_dynamics(bg, (x, y))
    out.append(Check.le("spray.force_identity", ed.force_gap, 1e-10))
    out.append(Check.le("spray.m_eff", rel(ed.m_eff - 2 * fe.g / fe.L, fe.g), 1e-12))
    br = sp.berwald_report(bg, (x, y))
    out.append(Check.le("spray.deviation_identity", br.identity_gap, 1e-8))
    if br.is_berwald:
        out.append(Check.le("spray.berwald_F_reconstructed", np.abs(br.F_reconstructed).max(), 1e-10))
        out.append(Check.le("spray.berwald_christoffel_gap", br.christoffel_gap, 1e-8))
        out.append(Check.le("spray.berwald_deviation", np.abs(br.deviation).max(), 1e-8))
    return out, sb, br


def _connection_checks(bg, x, y, G, A_zero):
    out = []
    pl = cv.Pipeline(bg, (x, y), 1, 3)
    N = np.asarray(pl.N.value)
    out.append(Check.le("curvature.N_euler", rel(N @ y - 2 * G, G), 1e-10))
    Gam, gap = cv.chern_connection(bg, (x, y))
    out.append(Check.le("curvature.chern_cross_check", gap, 1e-8))
    out.append(Check.le("curvature.Gamma_symmetry", np.abs(Gam - Gam.transpose(0, 2, 1)).max(), 1e-14))
    if A_zero:
        cb = cv.connection_bundle(bg, (x, y))
        out.append(Check.le("curvature.riemannian_limit_Gamma", np.abs(Gam - cb.gamma_tilde).max(), 1e-8))
    h, v = cv.covariant_derivative(cv.metric_sampler, bg, (x, y))
    dxg = cv.ad.taylor_tensor(cv._truncate(pl.g, 1, 0), "x", 1)
    scale = float(np.abs(dxg).max())
    hm = float(np.abs(h).max())
    out.append(Check.le("curvature.metricity_horizontal", hm / scale if scale > 0 else hm,
                        1e-8 if scale > 0 else 0.0))
    C = rd.cartan_tensor(bg, (x, y))
    out.append(Check.le("curvature.metricity_vertical", np.abs(v - 2 * C).max(), 1e-10))
    return out


def _curvature_checks(bg, x, y, A_zero, flat_vacuum):
    out = []
    pl = cv.Pipeline(bg, (x, y), 2, 6)
    val = cv._value
    Ric, Ric2 = float(val(pl.Ric)), float(val(pl.Ric_contracted))
    R_hv, R_full = val(pl.R_hv), val(pl.R_full)
    Rt = val(pl.Ric_tensor)
    out.append(Check.le("curvature.ricci_routes", rel(Ric - Ric2, Ric), 1e-7))
    out.append(Check.le("curvature.ricci_euler", rel(y @ Rt @ y - Ric, Ric), 1e-8))
    R_map = np.einsum("mnk,k->mn", R_hv, y)
    out.append(Check.le("curvature.R_map_trace", rel(np.trace(R_map) - Ric, Ric), 1e-8))
    out.append(Check.le("curvature.R_hv_antisymmetry", np.abs(R_hv + R_hv.transpose(0, 2, 1)).max(), 1e-10))
    out.append(Check.le("curvature.R_contraction", rel(np.einsum("r,rmnk->mnk", y, R_full) - R_hv, R_hv), 1e-8))
    L = float(val(pl.L))
    Ac = val(pl.cartan_A)
    C = rd.cartan_tensor(bg, (x, y))
    out.append(Check.le("curvature.cartan_A", np.abs(Ac - L * C).max(), 1e-10))
    out.append(Check.le("curvature.cartan_A_y", np.abs(Ac @ y).max(), 1e-10))
    Lam = val(pl.Lambda)
    if A_zero:
        out.append(Check.le("curvature.riemannian_limit_Lambda", np.abs(Lam).max(), 1e-10))
    if flat_vacuum:
        worst = max(np.abs(t).max() for t in (R_full, R_hv, Rt, Lam, val(pl.Einstein)))
        out.append(Check.le("curvature.flat_vacuum_zero", worst, 1e-12))
    return out


def _maxwell_checks(bg, section, x, toggles):
    out = []
    folded, bmax, _ = mx.bianchi_residual(bg, section, x, toggles)
    out.append(Check.le("maxwell.bianchi", max(bmax, np.abs(folded).max()), 1e-9))
    st = mx._SectionState(bg, mx._section(section, bg), x, 1, mx._toggles(toggles))
    FGup = st.raise2(st.FG)
    F = mx._val(mx._keep(FGup, ["x"]))
    eb = mx.eb_decompose(F)
    out.append(Check.le("maxwell.eb_roundtrip", np.abs(mx.eb_reassemble(eb) - F).max(), 0.0))
    dFG = mx._Deriv(st)(FGup)
    src = mx._sources_from(dFG, np.zeros(4))
    anti = 0.5 * (dFG - dFG.transpose(1, 0, 2))
    direct = np.einsum("mnn->m", anti)
    from_slots = np.concatenate([[-src.rho_E], -src.J_E + src.J_B])
    out.append(Check.le("maxwell.antisymmetric_consistency", rel(direct - from_slots, direct), 1e-8))
    return out


def probe_checks(scn, x, y, level: int = 2):
    """All invariant checks at one probe; raises DomainError for skips."""
    bg = scn.background
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A_zero = not bg.has_potential
    flat_vacuum = bg.catalog == "minkowski" and A_zero
    out, fe = _randers_checks(bg, x, y)
    s_checks, sb, br = _spray_checks(bg, x, y, fe)
    out += s_checks
    out += _connection_checks(bg, x, y, sb.G_general, A_zero)
    if level >= 2:
        out += _curvature_checks(bg, x, y, A_zero, flat_vacuum)
        out += _maxwell_checks(bg, scn.section, x, scn.toggles)
    if level >= 3 and br.is_berwald:
        dv = cv.divergence_probe(bg, (x, y))
        out.append(Check.le("curvature.berwald_divergence",
                            np.abs(dv.div_Einstein_h).max(), 1e-6 * max(dv.einstein_norm, 1e-12)))
    return out


def summarize(rows):
    """Collapse per-probe rows into worst-case rows per invariant id."""
    worst = {}
    for r in rows:
        cur = worst.get(r.id)
        if cur is None or (not r.passed and cur.passed) or (r.passed == cur.passed and r.measured > cur.measured):
            worst[r.id] = r
    return [worst[k] for k in sorted(worst)]


def is_domain_skip(exc):
    return isinstance(exc, DomainError)
