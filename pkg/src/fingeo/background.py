"""Spacetime backgrounds: metric g̃(x), potential A(x), current J(x).

Every field is an analytic expression in the coordinates ``x0..x3``, so
derivatives of any order come out of jet evaluation exactly.  Derivative
indices are always appended last: ``dgtilde[a, b, c] = ∂_c g̃_ab`` and
``dA[a, c] = ∂_c A_a``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import adnum as ad
from . import exprlang as ex
from .adnum import DomainError

__all__ = [
    "ScenarioBackground",
    "BackgroundAt",
    "DegenerateMetric",
    "Signature",
    "minkowski",
    "weak_field",
    "general",
    "background_at",
    "signature_check",
    "jacobi_eigenvalues",
    "x_jets",
]

ETA = np.diag([1.0, -1.0, -1.0, -1.0])

_ZERO = ex.Const(0.0)
_ONE = ex.Const(1.0)


class DegenerateMetric(ArithmeticError):
    """A metric eigenvalue is numerically zero."""


def _const(v):
    return ex.Const(float(v))


@dataclass(frozen=True, eq=False)
class ScenarioBackground:
    """Analytic background fields and coupling constants.

    ``gtilde`` is a 4×4 tuple of expression trees in which ``gtilde[i][j]``
    and ``gtilde[j][i]`` are the same object, so the matrix is symmetric by
    construction.
    """

    gtilde: tuple
    A: tuple
    m: float = 1.0
    e: float = 0.0
    kappa: float = 1.0
    J: tuple = (_ZERO, _ZERO, _ZERO, _ZERO)
    params: Mapping[str, float] = field(default_factory=dict)
    catalog: str = "general"
    sources: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("mass m must be positive")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        for i in range(4):
            for j in range(4):
                if self.gtilde[i][j] is not self.gtilde[j][i]:
                    if ex.structure(self.gtilde[i][j]) != ex.structure(self.gtilde[j][i]):
                        raise ValueError(f"metric entries ({i},{j}) and ({j},{i}) differ")
        missing = set()
        for node in self._all_nodes():
            missing |= ex.free_params(node) - set(self.params)
        if missing:
            raise ex.UnknownIdentifier(sorted(missing)[0])

    def _all_nodes(self):
        for i in range(4):
            for j in range(i, 4):
                yield self.gtilde[i][j]
        yield from self.A
        yield from self.J

    # -- pointwise evaluation ------------------------------------------------
    def _eval(self, node, X, label):
        if isinstance(node, ex.Const):
            return node.value
        try:
            return ex.eval_expr(node, X, self.params)
        except DomainError as exc:
            xv = [float(ad.value_of(c)) for c in X]
            raise DomainError(f"{label} at x={xv}: {exc}") from exc

    def metric(self, X):
        """g̃ at ``X`` (four floats or jets): a 4×4 array or matrix jet."""
        X = _x_point(X)
        vals = {}
        for i in range(4):
            for j in range(i, 4):
                vals[i, j] = self._eval(self.gtilde[i][j], X, f"gtilde[{i}][{j}]")
        rows = [[vals[min(i, j), max(i, j)] for j in range(4)] for i in range(4)]
        return _assemble(rows)

    def potential(self, X):
        X = _x_point(X)
        return _assemble([self._eval(n, X, f"A[{k}]") for k, n in enumerate(self.A)])

    def current(self, X):
        X = _x_point(X)
        return _assemble([self._eval(n, X, f"J[{k}]") for k, n in enumerate(self.J)])

    @property
    def has_potential(self):
        return any(not (isinstance(n, ex.Const) and n.value == 0.0) for n in self.A)

    # -- compiled first-order path --------------------------------------------
    @functools.cached_property
    def _compiled(self):
        gt = {}
        for i in range(4):
            for j in range(i, 4):
                gt[i, j] = ex.compile_gradient(self.gtilde[i][j], self.params)
        A = [ex.compile_gradient(n, self.params) for n in self.A]
        return gt, A

    def fields_with_gradient(self, x):
        """(g̃, ∂g̃, A, ∂A) at a float point via compiled expressions."""
        gt_f, A_f = self._compiled
        g = np.empty((4, 4))
        dg = np.empty((4, 4, 4))
        for (i, j), f in gt_f.items():
            try:
                v, d = f(*x)
            except DomainError as exc:
                raise DomainError(f"gtilde[{i}][{j}] at x={list(x)}: {exc}") from exc
            g[i, j] = g[j, i] = v
            dg[i, j] = dg[j, i] = d
        A = np.empty(4)
        dA = np.empty((4, 4))
        for k, f in enumerate(A_f):
            try:
                A[k], dA[k] = f(*x)
            except DomainError as exc:
                raise DomainError(f"A[{k}] at x={list(x)}: {exc}") from exc
        return g, dg, A, dA


def _x_point(X):
    if isinstance(X, ad.Jet):
        return [X[k] for k in range(4)]
    if len(X) != 4:
        raise ValueError("a spacetime point has four coordinates")
    return list(X)


def _assemble(rows):
    flat = np.array(rows, dtype=object).ravel()
    if not any(isinstance(v, ad.Jet) for v in flat):
        return np.array(rows, dtype=float)
    shape = np.array(rows, dtype=object).shape
    return ad.stack(list(flat)).reshape(shape)


def _vec(exprs, params, label):
    if exprs is None:
        return (_ZERO,) * 4
    if len(exprs) != 4:
        raise ValueError(f"{label} needs four components")
    return tuple(_node(e, params) for e in exprs)


def _node(e, params):
    if isinstance(e, (int, float)):
        return _const(e)
    if isinstance(e, str):
        return ex.parse_expr(e, params)
    return e


def minkowski(A=None, m=1.0, e=0.0, kappa=1.0, J=None, params=None):
    """Flat background η = diag(1, −1, −1, −1)."""
    params = dict(params or {})
    rows = [[_const(ETA[i, j]) for j in range(4)] for i in range(4)]
    sym = _symmetrize(rows)
    return ScenarioBackground(sym, _vec(A, params, "A"), m, e, kappa,
                              _vec(J, params, "J"), params, "minkowski",
                              {"metric": {"catalog": "minkowski"}})


def weak_field(phi, A=None, m=1.0, e=0.0, kappa=1.0, J=None, params=None):
    """Diagonal weak field g̃ = diag(1 + 2Φ, −(1 − 2Φ), −(1 − 2Φ), −(1 − 2Φ))."""
    params = dict(params or {})
    p = _node(phi, params)
    two_phi = ex.Binary("*", ex.Const(2.0), p)
    g00 = ex.Binary("+", _ONE, two_phi)
    gii = ex.Unary("-", ex.Binary("-", _ONE, two_phi))
    rows = [[_ZERO] * 4 for _ in range(4)]
    rows[0][0] = g00
    for k in range(1, 4):
        rows[k][k] = gii
    src = {"metric": {"catalog": "weak_field", "phi": phi if isinstance(phi, str) else ex.to_source(p)}}
    return ScenarioBackground(_symmetrize(rows), _vec(A, params, "A"), m, e, kappa,
                              _vec(J, params, "J"), params, "weak_field", src)


def general(components, A=None, m=1.0, e=0.0, kappa=1.0, J=None, params=None):
    """User-specified symmetric metric.

    ``components`` is either a 4×4 nested sequence of expressions (checked
    for symmetry) or a mapping ``"ij" -> expr`` over the ten pairs i ≤ j.
    """
    params = dict(params or {})
    if isinstance(components, Mapping):
        rows = [[None] * 4 for _ in range(4)]
        for key, val in components.items():
            i, j = int(key[0]), int(key[1])
            if i > j:
                i, j = j, i
            rows[i][j] = _node(val, params)
        for i in range(4):
            for j in range(i, 4):
                if rows[i][j] is None:
                    rows[i][j] = _ZERO
    else:
        if len(components) != 4 or any(len(r) != 4 for r in components):
            raise ValueError("metric needs a 4×4 block")
        rows = [[_node(components[i][j], params) for j in range(4)] for i in range(4)]
        for i in range(4):
            for j in range(i + 1, 4):
                if ex.structure(rows[i][j]) != ex.structure(rows[j][i]):
                    raise ValueError(f"metric entries ({i},{j}) and ({j},{i}) differ")
    return ScenarioBackground(_symmetrize(rows), _vec(A, params, "A"), m, e, kappa,
                              _vec(J, params, "J"), params, "general",
                              {"metric": {"catalog": "general"}})


def _symmetrize(rows):
    out = [[None] * 4 for _ in range(4)]
    for i in range(4):
        for j in range(i, 4):
            out[i][j] = out[j][i] = rows[i][j]
    return tuple(tuple(r) for r in out)


# ---------------------------------------------------------------------------
# derivative slots
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BackgroundAt:
    """Background values and x-derivatives at one point (derivative indices last)."""

    x: np.ndarray
    order: int
    gtilde_val: np.ndarray
    A_val: np.ndarray
    J_val: np.ndarray
    dgtilde: np.ndarray | None = None
    d2gtilde: np.ndarray | None = None
    d3gtilde: np.ndarray | None = None
    dA: np.ndarray | None = None
    d2A: np.ndarray | None = None
    d3A: np.ndarray | None = None


def x_jets(x, degree):
    """Coordinate jets ``x + t`` tracked to ``degree``."""
    sp = ad.space([("x", 4, degree)])
    return ad.variables(np.asarray(x, dtype=float), sp, "x")


def background_at(bg: ScenarioBackground, x, order: int = 2) -> BackgroundAt:
    """Fill the derivative slots of g̃ and A up to ``order`` (0..3)."""
    if not 0 <= order <= 3:
        raise ValueError("order must be in 0..3")
    x = np.asarray(x, dtype=float)
    if order == 0:
        return BackgroundAt(x, 0, bg.metric(x), bg.potential(x), bg.current(x))
    X = x_jets(x, order)
    g = bg.metric(X)
    A = bg.potential(X)
    J = bg.current(x)
    slots = {}
    for k in range(1, order + 1):
        suffix = "" if k == 1 else str(k)
        slots[f"d{suffix}gtilde"] = ad.taylor_tensor(g, "x", k)
        slots[f"d{suffix}A"] = ad.taylor_tensor(A, "x", k)
    return BackgroundAt(x, order, np.asarray(ad.value_of(g)) if isinstance(g, ad.Jet) else g,
                        np.asarray(ad.value_of(A)) if isinstance(A, ad.Jet) else A, J, **slots)


# ---------------------------------------------------------------------------
# signature
# ---------------------------------------------------------------------------


def jacobi_eigenvalues(a, tol: float = 1e-13, max_sweeps: int = 100):
    """Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations,
    sorted descending."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("square matrix required")
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-14 * max(1.0, np.abs(a).max())):
        raise ValueError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    scale = max(np.abs(a).max(), 1e-300)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                a[p, q] = a[q, p] = 0.0
    return np.sort(np.diag(a))[::-1]


@dataclass(frozen=True)
class Signature:
    signs: tuple
    eigenvalues: np.ndarray

    @property
    def lorentzian(self):
        return self.signs == (1, -1, -1, -1)


def matrix_signature(g, threshold: float = 1e-12) -> Signature:
    ev = jacobi_eigenvalues(g)
    if np.any(np.abs(ev) < threshold):
        raise DegenerateMetric(f"eigenvalue below {threshold}: {ev.tolist()}")
    return Signature(tuple(int(np.sign(v)) for v in ev), ev)


def signature_check(bg: ScenarioBackground, x) -> Signature:
    """Signs of the eigenvalues of g̃(x), sorted descending."""
    return matrix_signature(bg.metric(np.asarray(x, dtype=float)))
