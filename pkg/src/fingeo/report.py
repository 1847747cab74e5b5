"""Report payloads and deterministic JSON/CSV emission.

Every tensor in a payload is wrapped as ``{"index": ..., "route": ...,
"value": ...}`` so readers know its index placement and how it was produced.
Numbers are written with Python's shortest round-trip ``repr``; key order is
fixed by construction, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from . import curvature as cv
from . import maxwell as mx
from . import randers as rd
from . import spray as sp

__all__ = ["tensor", "probe_payload", "dumps", "write_json", "write_csv", "tool_info"]


def tool_info():
    return {"name": "fingeo", "version": __version__}


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(w) for k, w in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(w) for w in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if not math.isfinite(f):
            return None
        # normalise negative zero so equal runs print equal bytes
        return 0.0 if f == 0.0 else f
    return v


def tensor(value, index: str, route: str):
    return {"index": index, "route": route, "value": _plain(np.asarray(value, dtype=float))}


def dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=1, ensure_ascii=False, allow_nan=False) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(repr(float(v)) for v in r))
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# per-probe payloads
# ---------------------------------------------------------------------------


def finsler_payload(bg, x, y):
    fe = rd.finsler_eval(bg, (x, y))
    _, half_gap = rd.fundamental_tensor_closed(bg, (x, y), prefactor=0.5)
    _, _, lit_gap = rd.inverse_metric(bg, (x, y), literal=True)
    return {
        "L": fe.L, "alpha": fe.alpha, "beta": fe.beta,
        "ell": tensor(fe.ell, "ell[mu] = ell_mu", "m^2 gtilde y / alpha"),
        "g": tensor(fe.g, "g[mu][nu] = g_{mu nu}", "y-Hessian of L^2/2 (jets)"),
        "ginv": tensor(fe.ginv, "ginv[mu][nu] = g^{mu nu}", "direct inverse"),
        "det_g": fe.detg,
        "cartan": tensor(fe.cartan, "C[mu][nu][rho] = C_{mu nu rho}", "third y-derivative of L^2/4"),
        "lorentz_ratio": fe.lorentz_ratio,
        "signature_ok": fe.signature_ok,
        "closed_metric_half_weight_gap": half_gap,
        "closed_inverse_literal_gap": lit_gap,
    }


def spray_payload(bg, x, y):
    sb = sp.spray_decomposed(bg, (x, y))
    ed = sp.effective_dynamics(bg, (x, y))
    br = sp.berwald_report(bg, (x, y))
    return {
        "spray": {
            "G": tensor(sb.G_general, "G[mu] = G^mu", "general mixed-derivative formula"),
            "G_decomposed": tensor(sb.G, "G[mu] = G^mu", "F/S/Q/M bracket"),
            "G_christoffel": tensor(sb.G_christoffel, "G[mu] = G^mu", "gamma y y / 2"),
            "route_spread": sb.route_spread,
            "F_em": tensor(sb.F_em, "F[nu][sigma] = F_{nu sigma}", "dA antisymmetrised"),
            "S": tensor(sb.S, "S[nu][lambda][sigma]", "bracket S-tensor"),
            "Q": tensor(sb.Q, "Q[nu][lambda][sigma]", "bracket Q-tensor"),
            "M": tensor(sb.M, "M[nu][lambda][sigma]", "bracket M-tensor"),
            "gamma": tensor(sb.gamma, "gamma[l][m][n] = gamma^l_{mn}", "Christoffel of g at fixed y"),
            "gamma_tilde": tensor(sb.gamma_tilde, "gamma[l][m][n] = gamma~^l_{mn}", "Christoffel of gtilde"),
            "term_contributions": {k: tensor(v, "G[mu]", f"{k}-part of the bracket")
                                   for k, v in sb.term_contributions.items()},
        },
        "effective": {
            "m_eff": tensor(ed.m_eff, "m[mu][nu] = m^E_{mu nu}", "2 g / L"),
            "f": tensor(ed.f, "f[mu] = f_mu", "-2 g G / L"),
            "F_total": tensor(ed.F_total, "F[mu][nu] = calF_{mu nu}", "(1 - beta/L) e F + F^G"),
            "F_geom": tensor(ed.F_geom, "F[mu][nu] = F^G_{mu nu}", "-(y/2L)(S+Q+M)"),
            "force_gap": ed.force_gap,
        },
        "berwald": {
            "B_cov": tensor(br.B_cov, "B[j][k] = B_{j|k}", "e dA - b gamma~"),
            "deviation": tensor(br.deviation, "D[mu] = calB^mu", "corrected alpha/m^2 weight"),
            "deviation_literal": tensor(br.deviation_literal, "D[mu] = calB^mu", "m^2 alpha weight"),
            "christoffel_gap": br.christoffel_gap,
            "identity_gap": br.identity_gap,
            "is_berwald": br.is_berwald,
            "F_reconstructed": tensor(br.F_reconstructed, "F[mu][nu]", "A (gamma~_{nu mu} - gamma~_{mu nu})"),
        },
    }, br.is_berwald


def connection_payload(bg, x, y):
    cb = cv.connection_bundle(bg, (x, y))
    return {
        "N": tensor(cb.N, "N[mu][nu] = N^mu_nu", "y-gradient of G"),
        "Gamma": tensor(cb.Gamma, "Gamma[l][m][n] = Gamma^l_{mn}", "Christoffel trick on delta g"),
        "cross_check_gap": cb.cross_check_gap,
    }


def curvature_payload(bg, x, y, is_berwald):
    b = cv.curvature_bundle(bg, (x, y))
    return {
        "R_full": tensor(b.R_full, "R[m][l][s][n] = R_m^l_{sn}", "delta Gamma + Gamma Gamma"),
        "R_hv": tensor(b.R_hv, "R[m][n][k] = R^m_{nk}", "from N"),
        "R_map": tensor(b.R_map, "R[m][n] = R^m_n", "R_hv y"),
        "Ric": b.Ric,
        "Ric_contracted": b.Ric_contracted,
        "Ric_tensor": tensor(b.Ric_tensor, "Ric[m][n] = Ric_{mn}", "y-Hessian of Ric / 2"),
        "S_scalar": b.S_scalar,
        "A_cartan": tensor(b.A_cartan, "A[k][l][s] = A_{kls}", "(L/2) dg/dy"),
        "Lambda": tensor(b.Lambda, "Lambda[m][n] = Lambda_{mn}", "Cartan-curvature correction"),
        "Lambda_scope": "berwald" if is_berwald else "outside the Berwald case it was derived for",
        "Einstein": tensor(b.Einstein, "E[m][n] = G_{mn}", "Ric - g S/2 + Lambda"),
        "einstein_antisymmetry": b.einstein_antisymmetry,
        "T": tensor(b.T, "T[m][n] = T_{mn}", "trace-free sign, Finsler raising"),
    }


def maxwell_payload(bg, section, x, toggles):
    r = mx.maxwell_residual(bg, section, x, toggles)
    st = mx._SectionState(bg, mx._section(section, bg), x, 1, mx._toggles(toggles))
    FGup = mx._val(mx._keep(st.raise2(st.FG), ["x"]))
    eb = mx.eb_decompose(FGup)
    es = mx.effective_sources(bg, section, x, toggles)
    return {
        "section_velocity": tensor(st.y, "y[mu] = y^mu", "section at x"),
        "F_geom_up": tensor(FGup, "F[m][n] = F^{G mn}", "Finsler raising along the section"),
        "geometric_eb": {k: _plain(getattr(eb, k)) for k in
                         ("calE", "calE_T", "calB", "calB_T", "E00", "diag")},
        "effective_sources": {
            "rho_E": es.rho_E, "J_E": _plain(es.J_E), "J_B": _plain(es.J_B),
            "rho_G": es.rho_G, "J_G": _plain(es.J_G), "rho_convention": "J^0 (contravariant)",
        },
        "residual": {
            "source_eq": tensor(r.source_eq, "r[mu]", "sourced equation minus J"),
            "terms": {k: _plain(v) for k, v in (r.terms or {}).items()},
            "bianchi": tensor(r.bianchi, "b[alpha] = eps^{alpha l m n} d_l F_mn / 2", "lower-index cyclic sum"),
            "bianchi_max": r.bianchi_max,
            "bianchi_upper_index": r.bianchi_upper,
            "vacuum_constraint": None if r.vacuum_constraint is None
            else tensor(r.vacuum_constraint, "V[mu][nu]", "summand per nu on L = 1"),
            "berwald_eq": None if r.berwald_eq is None
            else tensor(r.berwald_eq, "r[mu]", "geometric-field-only equation minus J"),
            "gauge": tensor(r.gauge, "[condition][i]", "[dJ^G/dt + grad rho^G, curl J^G]"),
        },
    }


def divergence_payload(bg, x, y):
    d = cv.divergence_probe(bg, (x, y))
    return {
        "div_Einstein_h": tensor(d.div_Einstein_h, "d[nu]", "horizontal, Finsler raising"),
        "div_T_h": tensor(d.div_T_h, "d[nu]", "horizontal, Finsler raising"),
        "div_Einstein_v": tensor(d.div_Einstein_v, "d[nu]", "vertical"),
        "einstein_norm": d.einstein_norm,
        "relative": d.relative,
        "is_berwald": d.is_berwald,
    }


def probe_payload(scn, x, y, level=2, section=None, toggles=None):
    """Full payload for one probe at pipeline depth ``level``."""
    bg = scn.background
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    section = scn.section if section is None else section
    toggles = scn.toggles if toggles is None else toggles
    out = {"x": _plain(x), "y": _plain(y), "status": "ok"}
    out["finsler"] = finsler_payload(bg, x, y)
    sp_pay, is_b = spray_payload(bg, x, y)
    out.update(sp_pay)
    out["connection"] = connection_payload(bg, x, y)
    if level >= 2:
        out["curvature"] = curvature_payload(bg, x, y, is_b)
        out["maxwell"] = maxwell_payload(bg, section, x, toggles)
    if level >= 3:
        out["divergence"] = divergence_payload(bg, x, y)
    return out
