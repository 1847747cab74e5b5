"""Pointwise Randers–Finsler data.

The Finsler function is ``L = α + β`` with ``α = m·sqrt(g̃_{μν} y^μ y^ν)`` and
``β = e·A_μ y^μ``.  The fundamental tensor is the y-Hessian of ``L²/2``,
obtained exactly from second-order jets; closed forms are provided for
comparison and for the fast float path used by the geodesic integrator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import adnum as ad
from .adnum import DomainError
from .background import ScenarioBackground, matrix_signature, DegenerateMetric

__all__ = [
    "NonTimelike",
    "NonPositiveFinsler",
    "SingularMetric",
    "TangentPoint",
    "FinslerEval",
    "finsler_scalars",
    "finsler_function",
    "fundamental_tensor_hessian",
    "fundamental_tensor_closed",
    "closed_metric",
    "inverse_metric",
    "randers_inverse",
    "rank_one_inverse",
    "cartan_tensor",
    "lorentz_domain_check",
    "finsler_eval",
    "y_jets",
    "xy_jets",
]


class NonTimelike(DomainError):
    """g̃(y, y) ≤ 0: the velocity is outside the timelike cone."""


class NonPositiveFinsler(DomainError):
    """L ≤ 0."""


class SingularMetric(DomainError):
    """The fundamental tensor is numerically singular."""


@dataclass(frozen=True)
class TangentPoint:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).reshape(4))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float).reshape(4))
        if not np.any(self.y):
            raise ValueError("velocity must be nonzero")


def _point(p):
    if isinstance(p, TangentPoint):
        return p.x, p.y
    x, y = p
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def y_jets(y, degree):
    sp = ad.space([("y", 4, degree)])
    return ad.variables(np.asarray(y, dtype=float), sp, "y")


def xy_jets(x, y, x_degree, y_degree):
    """Coordinate and velocity jets in the joint (x, y) space."""
    sp = ad.space([("x", 4, x_degree), ("y", 4, y_degree)])
    return (ad.variables(np.asarray(x, dtype=float), sp, "x"),
            ad.variables(np.asarray(y, dtype=float), sp, "y"))


def finsler_scalars(bg: ScenarioBackground, X, Y, gt=None, A=None):
    """(L, α, β, α̃²) for floats or jets, with domain checks on the values.

    ``gt`` and ``A`` may be supplied when already evaluated at ``X``.
    """
    if gt is None:
        gt = bg.metric(X)
    if A is None:
        A = bg.potential(X)
    a2 = ad.einsum("ij,i,j->", gt, Y, Y)
    a2v = float(ad.value_of(a2))
    if not a2v > 0.0:
        raise NonTimelike(f"g̃(y, y) = {a2v:.6g} is not positive")
    alpha = bg.m * ad.sqrt(a2)
    beta = bg.e * ad.einsum("i,i->", A, Y)
    L = alpha + beta
    Lv = float(ad.value_of(L))
    if not Lv > 0.0:
        raise NonPositiveFinsler(f"L = {Lv:.6g} is not positive")
    return L, alpha, beta, a2


def finsler_function(bg: ScenarioBackground, p):
    """(L, α, β, ℓ) with ``ℓ_μ = ∂α/∂y^μ = m² g̃_{μν} y^ν / α``."""
    x, y = _point(p)
    gt = bg.metric(x)
    L, alpha, beta, _ = finsler_scalars(bg, x, y, gt=gt)
    ell = bg.m ** 2 * gt @ y / alpha
    return float(L), float(alpha), float(beta), ell


def _l2_jet(bg, x, y, degree):
    Y = y_jets(y, degree)
    L, _, _, _ = finsler_scalars(bg, x, Y)
    return L * L


def fundamental_tensor_hessian(bg: ScenarioBackground, p):
    """g_{μν} = ½ ∂²L²/∂y^μ∂y^ν from exact second-order jets."""
    x, y = _point(p)
    return 0.5 * ad.taylor_tensor(_l2_jet(bg, x, y, 2), "y", 2)


def closed_metric(m, gt, ell, b, L, alpha, prefactor=1.0):
    """``prefactor·(L/α)(m²g̃ − ℓℓ) + (ℓ + b)(ℓ + b)``; works on floats or jets.

    ``prefactor = 1`` is the metric that agrees with the Hessian definition.
    """
    lb = ell + b
    return (prefactor * L / alpha) * (m ** 2 * gt - ad.einsum("i,j->ij", ell, ell)) \
        + ad.einsum("i,j->ij", lb, lb)


def fundamental_tensor_closed(bg: ScenarioBackground, p, prefactor: float = 0.5):
    """Closed-form metric and its max deviation from the Hessian route.

    The default ``prefactor = 0.5`` evaluates the half-weighted form
    ``(L/2α)(m²g̃ − ℓℓ) + (ℓ+b)(ℓ+b)``; ``prefactor = 1`` gives the variant
    consistent with the Hessian.  The deviation is reported, not asserted.
    """
    x, y = _point(p)
    L, alpha, beta, ell = finsler_function(bg, (x, y))
    b = bg.e * bg.potential(x)
    g_closed = closed_metric(bg.m, bg.metric(x), ell, b, L, alpha, prefactor)
    g_hess = fundamental_tensor_hessian(bg, (x, y))
    return g_closed, float(np.abs(g_closed - g_hess).max())


def _adjugate_inverse(g):
    # LU on entries near the underflow threshold raises spurious FP flags
    with np.errstate(divide="ignore", under="ignore", invalid="ignore"):
        det = float(np.linalg.det(g))
    if not np.isfinite(det) or abs(det) < 1e-14 * float(np.abs(g).max()) ** 4:
        raise SingularMetric(f"det g = {det:.3g}")
    return ad.inv(g), det


def randers_inverse(m, gt_inv, b, y, L, alpha, beta, literal=False):
    """Closed-form inverse of the Randers fundamental tensor.

    With ``b̃^μ = g̃^{μν} b_ν / m²`` and ``b² = b_μ b̃^μ``::

        g^{μν} = c·g̃^{μν} − (α/L²)(b̃^μ y^ν + b̃^ν y^μ) + ((b²α + β)/L³) y^μ y^ν

    where ``c = α/(m²L)``.  ``literal=True`` uses ``c = m²α/L`` instead,
    which agrees only for ``m = 1``.
    """
    bt = gt_inv @ b / m ** 2
    b2 = float(b @ bt)
    c = (m ** 2 * alpha / L) if literal else (alpha / (m ** 2 * L))
    return (c * gt_inv
            - (alpha / L ** 2) * (np.outer(bt, y) + np.outer(y, bt))
            + ((b2 * alpha + beta) / L ** 3) * np.outer(y, y))


def inverse_metric(bg: ScenarioBackground, p, literal: bool = True):
    """(ginv_direct, ginv_randers, discrepancy).

    ``ginv_direct`` inverts the Hessian metric by cofactors and is
    authoritative; ``ginv_randers`` is the closed form of
    :func:`randers_inverse` (by default with the literal ``m²α/L`` weight).
    """
    x, y = _point(p)
    g = fundamental_tensor_hessian(bg, (x, y))
    ginv, _ = _adjugate_inverse(g)
    L, alpha, beta, _ = finsler_function(bg, (x, y))
    gt_inv = np.linalg.inv(bg.metric(x))
    b = bg.e * bg.potential(x)
    gr = randers_inverse(bg.m, gt_inv, b, y, L, alpha, beta, literal=literal)
    return ginv, gr, float(np.abs(ginv - gr).max())


def rank_one_inverse(A, lam, B):
    """Inverse of ``A + λ B Bᵀ`` via ``A⁻¹ − λ/(1 + λB²) B^i B^j``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    Ainv = np.linalg.inv(A)
    Bup = Ainv @ B
    B2 = float(B @ Bup)
    denom = 1.0 + lam * B2
    if denom == 0.0:
        raise SingularMetric("1 + λB² vanishes")
    return Ainv - (lam / denom) * np.outer(Bup, Bup)


def cartan_tensor(bg: ScenarioBackground, p):
    """C_{μνρ} = ¼ ∂³L²/∂y^μ∂y^ν∂y^ρ."""
    x, y = _point(p)
    return 0.25 * ad.taylor_tensor(_l2_jet(bg, x, y, 3), "y", 3)


def lorentz_domain_check(bg: ScenarioBackground, p):
    """(θ, lorentz_ratio, signature_ok).

    θ is the deviation of g from ½(1 + β/α)m²g̃ in the split
    ``θ = ½(1 − β/α)ℓℓ + ℓb + bℓ + bb``; the ratio compares its largest entry
    with the smallest nonzero entry of ½(1 + β/α)m²|g̃|.  ``signature_ok``
    checks the eigenvalue signs of the Hessian metric.
    """
    x, y = _point(p)
    L, alpha, beta, ell = finsler_function(bg, (x, y))
    b = bg.e * bg.potential(x)
    theta = (0.5 * (1.0 - beta / alpha) * np.outer(ell, ell)
             + np.outer(ell, b) + np.outer(b, ell) + np.outer(b, b))
    ref = 0.5 * (1.0 + beta / alpha) * bg.m ** 2 * np.abs(bg.metric(x))
    nz = ref[ref > 1e-300]
    ratio = float(np.abs(theta).max() / nz.min()) if nz.size else float("inf")
    g = fundamental_tensor_hessian(bg, (x, y))
    try:
        ok = matrix_signature(g).lorentzian
    except DegenerateMetric:
        ok = False
    return theta, ratio, ok


@dataclass(frozen=True)
class FinslerEval:
    """All pointwise Randers data at (x, y); tensors carry lower indices
    except ``ginv``."""

    L: float
    alpha: float
    beta: float
    ell: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    detg: float
    cartan: np.ndarray
    theta: np.ndarray
    lorentz_ratio: float
    signature_ok: bool
    dL: np.ndarray



def finsler_eval(bg: ScenarioBackground, p) -> FinslerEval:
    """One third-order y-jet pass giving L, ∂L, g, C and the diagnostics."""
    x, y = _point(p)
    gt = bg.metric(x)
    A = bg.potential(x)
    Y = y_jets(y, 3)
    L, alpha, beta, _ = finsler_scalars(bg, x, Y, gt=gt, A=A)
    L2 = L * L
    g = 0.5 * ad.taylor_tensor(L2, "y", 2)
    C = 0.25 * ad.taylor_tensor(L2, "y", 3)
    ginv, det = _adjugate_inverse(g)
    Lv, av, bv = float(L.value), float(alpha.value), float(beta.value)
    ell = bg.m ** 2 * gt @ y / av
    theta, ratio, ok = lorentz_domain_check(bg, (x, y))
    return FinslerEval(Lv, av, bv, ell, g, ginv, det, C, theta, ratio, ok,
                       ad.taylor_tensor(L, "y", 1))
