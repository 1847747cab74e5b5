"""Forward-mode truncated Taylor jets.

A :class:`Jet` holds the truncated multivariate Taylor expansion of a
quantity (or of an array of quantities) around a base point.  Variables are
organised in named *groups*; each group carries its own maximum total degree,
so a jet over positions ``x`` and velocities ``y`` can track, say, three
``x``-derivatives and seven ``y``-derivatives without paying for the mixed
monomials it will never need.

Coefficients are stored densely in graded-lexicographic order per group, as
Taylor coefficients (``partial / multi_index!``).  The leading axis of
``Jet.coef`` indexes monomials, any further axes are batch axes, which makes
tensor algebra on jets a matter of numpy broadcasting and ``einsum``.

Typical use::

    >>> x = seed(2.0, 0, order=3)
    >>> (x * x * x).partial((0, 0, 0))
    6.0
"""

from __future__ import annotations

import functools
import itertools
import math
import string
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DomainError",
    "Jet",
    "JetSpace",
    "space",
    "seed",
    "constant",
    "variables",
    "primitive",
    "sqrt",
    "exp",
    "log",
    "sin",
    "cos",
    "tan",
    "tanh",
    "absolute",
    "power",
    "minimum",
    "maximum",
    "derivative",
    "grad",
    "taylor_tensor",
    "restrict",
    "convert",
    "einsum",
    "matmul",
    "inv",
    "stack",
    "value_of",
    "MAX_DIRECTIONS",
]

MAX_DIRECTIONS = 8
MAX_SEED_ORDER = 3

# groups are kept in this canonical order inside a space
_GROUP_ORDER = ("d", "x", "y", "a")

# cap on elements materialised per chunk of a product (memory bound)
_CHUNK_ELEMENTS = 1 << 23


class DomainError(ArithmeticError):
    """Evaluation left the domain of a primitive (sqrt/log of a non-positive
    value, division by zero, |.| at a kink)."""


# ---------------------------------------------------------------------------
# spaces
# ---------------------------------------------------------------------------


def _group_rank(name):
    try:
        return (_GROUP_ORDER.index(name), name)
    except ValueError:
        return (len(_GROUP_ORDER), name)


@functools.lru_cache(maxsize=None)
def _monomials(size, degree):
    """Exponent tuples of ``size`` variables with total degree <= degree,
    graded-lexicographic."""
    out = []
    for d in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(size), d):
            e = [0] * size
            for v in combo:
                e[v] += 1
            out.append(tuple(e))
    # combinations_with_replacement yields lex order on sorted combos, which
    # is reverse-lex on exponent vectors; sort explicitly for a stable order
    out.sort(key=lambda e: (sum(e), tuple(-v for v in e)))
    return tuple(out)


@functools.lru_cache(maxsize=None)
def _group_pairs(size, degree):
    """All (a, b, c) monomial index triples with a + b = c in one group."""
    mons = _monomials(size, degree)
    index = {m: i for i, m in enumerate(mons)}
    ia, ib, ic = [], [], []
    for c, mc in enumerate(mons):
        for ranges in itertools.product(*(range(v + 1) for v in mc)):
            mb = tuple(v - w for v, w in zip(mc, ranges))
            ia.append(index[ranges])
            ib.append(index[mb])
            ic.append(c)
    return (np.array(ia, dtype=np.intp), np.array(ib, dtype=np.intp),
            np.array(ic, dtype=np.intp))


class JetSpace:
    """Truncation pattern shared by a family of jets.

    ``groups`` is a sequence of ``(name, size, degree)``.  Instances are
    interned; build them with :func:`space`.
    """

    def __init__(self, groups):
        self.groups = tuple(groups)
        self.names = tuple(g[0] for g in self.groups)
        self.nvars = sum(g[1] for g in self.groups)
        self.total_degree = sum(g[2] for g in self.groups)
        self._group_mons = [_monomials(s, d) for _, s, d in self.groups]
        counts = [len(m) for m in self._group_mons]
        self.size = int(np.prod(counts)) if counts else 1
        self._counts = counts
        strides = []
        acc = 1
        for c in reversed(counts):
            strides.append(acc)
            acc *= c
        self._strides = tuple(reversed(strides))
        exps = []
        for combo in itertools.product(*self._group_mons):
            exps.append(tuple(itertools.chain.from_iterable(combo)))
        if not exps:
            exps = [()]
        self.exponents = np.array(exps, dtype=np.intp).reshape(self.size, self.nvars)
        self.index = {e: i for i, e in enumerate(exps)}
        self.degrees = self.exponents.sum(axis=1)
        fact = np.array([math.prod(math.factorial(int(v)) for v in row)
                         for row in self.exponents], dtype=float)
        self.factorials = fact
        self._pairs = None

    def __repr__(self):
        inner = ", ".join(f"{n}:{s}@{d}" for n, s, d in self.groups)
        return f"JetSpace({inner})"

    def group(self, name):
        for i, g in enumerate(self.groups):
            if g[0] == name:
                return i, g
        raise KeyError(name)

    def var_index(self, name, k):
        """Global variable index of the k-th variable of group ``name``."""
        off = 0
        for g in self.groups:
            if g[0] == name:
                if not 0 <= k < g[1]:
                    raise IndexError(f"variable {k} outside group {name!r}")
                return off + k
            off += g[1]
        raise KeyError(name)

    def var_group(self, var):
        off = 0
        for i, g in enumerate(self.groups):
            if var < off + g[1]:
                return i, var - off
            off += g[1]
        raise IndexError(var)

    @property
    def pairs(self):
        """(ia, ib, offsets): monomial pairs sorted by product monomial."""
        if self._pairs is None:
            per = [_group_pairs(s, d) for _, s, d in self.groups]
            if not per:
                z = np.zeros(1, dtype=np.intp)
                self._pairs = (z, z, z)
                return self._pairs
            ia = np.zeros(1, dtype=np.intp)
            ib = np.zeros(1, dtype=np.intp)
            ic = np.zeros(1, dtype=np.intp)
            for (ga, gb, gc), stride in zip(per, self._strides):
                ia = (ia[:, None] + stride * ga[None, :]).ravel()
                ib = (ib[:, None] + stride * gb[None, :]).ravel()
                ic = (ic[:, None] + stride * gc[None, :]).ravel()
            order = np.argsort(ic, kind="stable")
            ia, ib, ic = ia[order], ib[order], ic[order]
            offsets = np.flatnonzero(np.r_[True, ic[1:] != ic[:-1]])
            self._pairs = (ia, ib, offsets)
        return self._pairs

    def reduced(self, name):
        """Same space with group ``name`` one degree lower."""
        gs = []
        for n, s, d in self.groups:
            if n == name:
                if d == 0:
                    raise ValueError(f"group {name!r} has no derivative left")
                d -= 1
            gs.append((n, s, d))
        return space(gs)


@functools.lru_cache(maxsize=None)
def _space_cached(groups):
    return JetSpace(groups)


def space(groups) -> JetSpace:
    """Interned :class:`JetSpace` for ``[(name, size, degree), ...]``.

    Groups of size zero are dropped; order is canonicalised.
    """
    gs = tuple(sorted(((str(n), int(s), int(d)) for n, s, d in groups if s > 0),
                      key=lambda g: _group_rank(g[0])))
    names = [g[0] for g in gs]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate group names in {names}")
    if any(d < 0 for _, _, d in gs):
        raise ValueError("negative degree")
    return _space_cached(gs)


def _join(a: JetSpace, b: JetSpace) -> JetSpace:
    """Smallest space both operands embed into exactly.

    A group missing from one operand means no dependence on it, so the other
    operand's degree is kept; shared groups use the lower degree.
    """
    if a is b:
        return a
    groups = {}
    for n, s, d in a.groups:
        groups[n] = (s, d)
    for n, s, d in b.groups:
        if n in groups:
            s0, d0 = groups[n]
            if s0 != s:
                raise ValueError(f"group {n!r} has sizes {s0} and {s}")
            groups[n] = (s, min(d, d0))
        else:
            groups[n] = (s, d)
    return space([(n, s, d) for n, (s, d) in groups.items()])


@functools.lru_cache(maxsize=None)
def _convert_map(src: JetSpace, dst: JetSpace):
    src_idx, dst_idx = [], []
    dst_groups = {n: (s, d) for n, s, d in dst.groups}
    for i, e in enumerate(src.exponents):
        pieces = []
        ok = True
        off = 0
        parts = {}
        for n, s, d in src.groups:
            parts[n] = tuple(int(v) for v in e[off:off + s])
            off += s
        for n, (s, d) in dst_groups.items():
            p = parts.get(n, (0,) * s)
            if sum(p) > d:
                ok = False
                break
        for n, p in parts.items():
            if n not in dst_groups and any(p):
                ok = False
        if not ok:
            continue
        for n, s, d in dst.groups:
            pieces.extend(parts.get(n, (0,) * s))
        src_idx.append(i)
        dst_idx.append(dst.index[tuple(pieces)])
    return np.array(src_idx, dtype=np.intp), np.array(dst_idx, dtype=np.intp)


@functools.lru_cache(maxsize=None)
def _derivative_map(src: JetSpace, var: int):
    gi, _ = src.var_group(var)
    name = src.groups[gi][0]
    dst = src.reduced(name)
    # position of var inside the global exponent vector is the same in dst
    src_idx = np.empty(dst.size, dtype=np.intp)
    factor = np.empty(dst.size, dtype=float)
    for j, e in enumerate(dst.exponents):
        f = list(e)
        f[var] += 1
        src_idx[j] = src.index[tuple(f)]
        factor[j] = f[var]
    return dst, src_idx, factor


# ---------------------------------------------------------------------------
# the jet type
# ---------------------------------------------------------------------------


def _expand_batch(c, ndim):
    """Insert unit batch axes so ``c`` (monomials first) has ``ndim`` batch dims."""
    extra = ndim - (c.ndim - 1)
    if extra > 0:
        c = c.reshape(c.shape[:1] + (1,) * extra + c.shape[1:])
    return c


def _pair_reduce(sp: JetSpace, product, batch):
    """Sum ``product(ia_chunk, ib_chunk)`` over monomial pairs, chunked."""
    ia, ib, offsets = sp.pairs
    per = max(1, int(np.prod(batch)))
    if len(ia) * per <= _CHUNK_ELEMENTS:
        return np.add.reduceat(product(ia, ib), offsets, axis=0)
    out = np.empty((sp.size,) + tuple(batch))
    step = max(1, _CHUNK_ELEMENTS // per)
    bounds = np.r_[offsets, len(ia)]
    c0 = 0
    while c0 < sp.size:
        c1 = int(np.searchsorted(bounds, bounds[c0] + step, side="right")) - 1
        c1 = min(max(c1, c0 + 1), sp.size)
        lo, hi = bounds[c0], bounds[c1]
        seg = product(ia[lo:hi], ib[lo:hi])
        out[c0:c1] = np.add.reduceat(seg, offsets[c0:c1] - lo, axis=0)
        c0 = c1
    return out


def _mul_coef(sp: JetSpace, a, b):
    nd = max(a.ndim, b.ndim) - 1
    a = _expand_batch(a, nd)
    b = _expand_batch(b, nd)
    if sp.size == 1:
        return a * b
    batch = np.broadcast_shapes(a.shape[1:], b.shape[1:])
    return _pair_reduce(sp, lambda i, j: a[i] * b[j], batch)


class Jet:
    """Truncated Taylor expansion, possibly of an array of quantities.

    ``coef[k]`` is the Taylor coefficient of monomial ``space.exponents[k]``;
    trailing axes of ``coef`` are batch axes (``jet.shape``).
    """

    __slots__ = ("space", "coef")
    __array_priority__ = 1000

    def __init__(self, sp: JetSpace, coef):
        coef = np.asarray(coef, dtype=float)
        if coef.shape[:1] != (sp.size,):
            raise ValueError(f"coefficient array {coef.shape} does not fit {sp}")
        self.space = sp
        self.coef = coef

    # -- inspection -----------------------------------------------------
    @property
    def shape(self):
        return self.coef.shape[1:]

    @property
    def ndim(self):
        return self.coef.ndim - 1

    @property
    def value(self):
        v = self.coef[0]
        return float(v) if v.ndim == 0 else v

    @property
    def order(self):
        return self.space.total_degree

    def partial(self, directions: Iterable[int] = ()):
        """Partial derivative along the listed variable indices.

        ``partial((0, 1))`` and ``partial((1, 0))`` read the same
        coefficient, so mixed partials are symmetric by construction.
        """
        e = [0] * self.space.nvars
        for d in directions:
            if not 0 <= d < self.space.nvars:
                raise IndexError(f"direction {d} outside 0..{self.space.nvars - 1}")
            e[d] += 1
        k = self.space.index.get(tuple(e))
        if k is None:
            v = np.zeros(self.shape)
        else:
            v = self.coef[k] * self.space.factorials[k]
        return float(v) if np.ndim(v) == 0 else v

    def partials(self):
        """Mapping ``exponent tuple -> derivative value`` for every tracked monomial."""
        out = {}
        for k, e in enumerate(self.space.exponents):
            v = self.coef[k] * self.space.factorials[k]
            out[tuple(int(t) for t in e)] = float(v) if np.ndim(v) == 0 else v
        return out

    def gradient(self, name=None):
        """First partials, stacked along a new leading axis."""
        sp = self.space
        if name is None:
            idx = range(sp.nvars)
        else:
            _, (_, size, _) = sp.group(name)
            idx = [sp.var_index(name, k) for k in range(size)]
        return np.stack([np.asarray(self.partial((i,))) for i in idx])

    def __repr__(self):
        return f"Jet(value={self.value!r}, space={self.space!r})"

    # -- array protocol ---------------------------------------------------
    def __getitem__(self, key):
        if not isinstance(key, tuple):
            key = (key,)
        return Jet(self.space, self.coef[(slice(None),) + key])

    def __len__(self):
        return self.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def transpose(self, *axes):
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        elif len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return Jet(self.space, self.coef.transpose((0,) + tuple(a + 1 for a in axes)))

    @property
    def T(self):
        return self.transpose()

    def swapaxes(self, a, b):
        return Jet(self.space, np.swapaxes(self.coef, a + 1 if a >= 0 else a,
                                           b + 1 if b >= 0 else b))

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return Jet(self.space, self.coef.reshape((self.space.size,) + tuple(shape)))

    def sum(self, axis=None):
        if axis is None:
            axis = tuple(range(self.ndim))
        elif isinstance(axis, int):
            axis = (axis,)
        axis = tuple((a % self.ndim) + 1 for a in axis)
        return Jet(self.space, self.coef.sum(axis=axis))

    def diagonal(self, axis1=0, axis2=1):
        return Jet(self.space, np.diagonal(self.coef, axis1=axis1 + 1, axis2=axis2 + 1))

    def trace(self):
        return self.diagonal().sum(-1)

    # -- arithmetic -------------------------------------------------------
    def _lift(self, other):
        if isinstance(other, Jet):
            sp = _join(self.space, other.space)
            return convert(self, sp), convert(other, sp)
        return self, None

    def __neg__(self):
        return Jet(self.space, -self.coef)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b = self._lift(other)
            nd = max(a.ndim, b.ndim)
            return Jet(a.space, _expand_batch(a.coef, nd) + _expand_batch(b.coef, nd))
        other = np.asarray(other, dtype=float)
        if other.ndim > self.ndim:
            coef = np.broadcast_to(_expand_batch(self.coef, other.ndim),
                                   (self.space.size,) + np.broadcast_shapes(self.shape, other.shape)).copy()
        else:
            coef = self.coef.copy()
        coef[0] = coef[0] + other
        return Jet(self.space, coef)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b = self._lift(other)
            return Jet(a.space, _mul_coef(a.space, a.coef, b.coef))
        other = np.asarray(other, dtype=float)
        return Jet(self.space, _expand_batch(self.coef, other.ndim) * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            a, b = self._lift(other)
            q = a * reciprocal(b)
            coef = q.coef.copy()
            nd = coef.ndim - 1
            coef[0] = _expand_batch(a.coef, nd)[0] / _expand_batch(b.coef, nd)[0]
            return Jet(q.space, coef)
        other = np.asarray(other, dtype=float)
        if np.any(other == 0):
            raise DomainError("division by zero")
        return Jet(self.space, _expand_batch(self.coef, other.ndim) / other)

    def __rtruediv__(self, other):
        r = reciprocal(self)
        out = r * other
        coef = out.coef.copy()
        coef[0] = np.asarray(other, dtype=float) / self.coef[0]
        return Jet(out.space, coef)

    def __pow__(self, p):
        return power(self, p)

    def __rpow__(self, base):
        return power(base, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def constant(value, sp: JetSpace) -> Jet:
    value = np.asarray(value, dtype=float)
    coef = np.zeros((sp.size,) + value.shape)
    coef[0] = value
    return Jet(sp, coef)


def seed(value: float, direction: int, order: int, ndirs: int = MAX_DIRECTIONS) -> Jet:
    """Independent variable ``direction`` at ``value``, tracked to ``order``."""
    if not 1 <= ndirs <= MAX_DIRECTIONS:
        raise ValueError(f"direction count {ndirs} outside 1..{MAX_DIRECTIONS}")
    if not 0 <= direction < ndirs:
        raise ValueError(f"direction {direction} outside 0..{ndirs - 1}")
    if not 1 <= order <= MAX_SEED_ORDER:
        raise ValueError(f"order {order} outside 1..{MAX_SEED_ORDER}")
    sp = space([("d", ndirs, order)])
    j = constant(value, sp)
    e = [0] * ndirs
    e[direction] = 1
    j.coef[sp.index[tuple(e)]] = 1.0
    return j


def variables(values, sp: JetSpace, name: str) -> Jet:
    """Vector jet ``values + t`` over every variable of group ``name``."""
    _, (_, size, degree) = sp.group(name)
    values = np.asarray(values, dtype=float)
    if values.shape != (size,):
        raise ValueError(f"need {size} values for group {name!r}")
    coef = np.zeros((sp.size, size))
    coef[0] = values
    if degree > 0:
        for k in range(size):
            e = [0] * sp.nvars
            e[sp.var_index(name, k)] = 1
            coef[sp.index[tuple(e)], k] = 1.0
    return Jet(sp, coef)


def value_of(x):
    """Plain value of a jet, or the input itself."""
    if isinstance(x, Jet):
        return x.value
    return x


# ---------------------------------------------------------------------------
# structural operations
# ---------------------------------------------------------------------------


def convert(jet: Jet, target: JetSpace) -> Jet:
    """Re-express ``jet`` in ``target``.

    Groups absent from ``target`` are evaluated at their base point; groups
    absent from ``jet`` contribute nothing; degrees are truncated.
    """
    if jet.space is target:
        return jet
    src_idx, dst_idx = _convert_map(jet.space, target)
    coef = np.zeros((target.size,) + jet.shape)
    coef[dst_idx] = jet.coef[src_idx]
    return Jet(target, coef)


def derivative(jet: Jet, var: int) -> Jet:
    """Partial derivative along global variable ``var``; the variable's
    group loses one degree."""
    dst, src_idx, factor = _derivative_map(jet.space, var)
    f = factor.reshape((-1,) + (1,) * jet.ndim)
    return Jet(dst, jet.coef[src_idx] * f)


def grad(jet: Jet, name: str) -> Jet:
    """Derivatives along every variable of group ``name``, new last axis."""
    _, (_, size, _) = jet.space.group(name)
    parts = [derivative(jet, jet.space.var_index(name, k)) for k in range(size)]
    return stack(parts, axis=-1)


def taylor_tensor(jet, name: str, k: int):
    """k-th partial derivatives along group ``name`` as a plain array.

    The derivative indices are appended after the jet's own axes; the result
    is symmetric in them.  Plain arrays are treated as constants.
    """
    if not isinstance(jet, Jet):
        base = np.asarray(jet, dtype=float)
        return np.zeros(base.shape + (4,) * k) if k else base
    sp = jet.space
    _, (_, size, degree) = sp.group(name)
    out = np.zeros(jet.shape + (size,) * k)
    if k > degree:
        return out
    first = sp.var_index(name, 0)
    for combo in itertools.combinations_with_replacement(range(size), k):
        e = [0] * sp.nvars
        for v in combo:
            e[first + v] += 1
        idx = sp.index[tuple(e)]
        val = jet.coef[idx] * sp.factorials[idx]
        for perm in set(itertools.permutations(combo)):
            out[(Ellipsis,) + perm] = val
    return out


def restrict(jet, names):
    """Keep only the listed groups (the others are evaluated at zero)."""
    if not isinstance(jet, Jet):
        return jet
    keep = [g for g in jet.space.groups if g[0] in names]
    return convert(jet, space(keep))


def stack(items: Sequence, axis: int = 0) -> Jet:
    jets = [x for x in items if isinstance(x, Jet)]
    if not jets:
        raise TypeError("stack needs at least one Jet")
    sp = jets[0].space
    for j in jets[1:]:
        sp = _join(sp, j.space)
    coefs = []
    shape = None
    for x in items:
        if isinstance(x, Jet):
            c = convert(x, sp).coef
        else:
            c = constant(x, sp).coef
        coefs.append(c)
        shape = c.shape if shape is None else np.broadcast_shapes(shape, c.shape)
    coefs = [np.broadcast_to(c, shape) for c in coefs]
    ax = axis + 1 if axis >= 0 else axis
    return Jet(sp, np.stack(coefs, axis=ax))


def _free_letter(used):
    for ch in string.ascii_letters:
        if ch not in used:
            return ch
    raise ValueError("einsum ran out of index letters")


def _einsum2(sa, sb, so, a, b):
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        return np.einsum(f"{sa},{sb}->{so}", a, b)
    p = _free_letter(sa + sb + so)
    if isinstance(a, Jet) and isinstance(b, Jet):
        sp = _join(a.space, b.space)
        ac = convert(a, sp).coef
        bc = convert(b, sp).coef
        if sp.size == 1:
            return Jet(sp, np.einsum(f"{p}{sa},{p}{sb}->{p}{so}", ac, bc))
        sizes = {}
        for ch, n in zip(sa, ac.shape[1:]):
            sizes[ch] = n
        for ch, n in zip(sb, bc.shape[1:]):
            sizes[ch] = n
        batch = tuple(sizes[ch] for ch in so)
        expr = f"{p}{sa},{p}{sb}->{p}{so}"
        return Jet(sp, _pair_reduce(
            sp, lambda i, j: np.einsum(expr, ac[i], bc[j]), batch))
    if isinstance(a, Jet):
        return Jet(a.space, np.einsum(f"{p}{sa},{sb}->{p}{so}", a.coef, np.asarray(b, dtype=float)))
    return Jet(b.space, np.einsum(f"{sa},{p}{sb}->{p}{so}", np.asarray(a, dtype=float), b.coef))


def einsum(subscripts: str, *operands):
    """``numpy.einsum`` over any mix of jets and arrays (explicit ``->`` form)."""
    if "->" not in subscripts:
        raise ValueError("einsum needs an explicit output, e.g. 'ij,j->i'")
    lhs, out = subscripts.replace(" ", "").split("->")
    subs = lhs.split(",")
    if len(subs) != len(operands):
        raise ValueError("operand count does not match subscripts")
    if len(operands) == 1:
        (a,) = operands
        if isinstance(a, Jet):
            p = _free_letter(subs[0] + out)
            return Jet(a.space, np.einsum(f"{p}{subs[0]}->{p}{out}", a.coef))
        return np.einsum(f"{subs[0]}->{out}", a)
    acc, acc_s = operands[0], subs[0]
    for k in range(1, len(operands)):
        later = "".join(subs[k + 1:]) + out
        keep = "".join(ch for ch in dict.fromkeys(acc_s + subs[k]) if ch in later)
        acc = _einsum2(acc_s, subs[k], keep, acc, operands[k])
        acc_s = keep
    if acc_s != out:
        if isinstance(acc, Jet):
            p = _free_letter(acc_s + out)
            acc = Jet(acc.space, np.einsum(f"{p}{acc_s}->{p}{out}", acc.coef))
        else:
            acc = np.einsum(f"{acc_s}->{out}", acc)
    return acc


def matmul(a, b):
    """Matrix product for 1-d/2-d jets and arrays."""
    na = np.ndim(value_of(a))
    nb = np.ndim(value_of(b))
    patterns = {(2, 2): "ij,jk->ik", (2, 1): "ij,j->i", (1, 2): "i,ij->j", (1, 1): "i,i->"}
    if (na, nb) not in patterns:
        raise ValueError("matmul supports 1-d and 2-d operands only")
    return einsum(patterns[(na, nb)], a, b)


def _adjugate_inverse(m):
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    cof = np.empty_like(m)
    # LU on nearly singular minors can raise FP flags; singularity is judged below
    with np.errstate(divide="ignore", under="ignore", invalid="ignore", over="ignore"):
        for i in range(n):
            for j in range(n):
                minor = np.delete(np.delete(m, i, axis=0), j, axis=1)
                cof[i, j] = (-1) ** (i + j) * np.linalg.det(minor)
        det = float(m[0] @ cof[0])
    if det == 0.0 or not np.isfinite(det) or not np.all(np.isfinite(cof)):
        raise DomainError("singular matrix")
    return cof.T / det, det


def inv(m):
    """Inverse of a square matrix (plain or jet).

    The base value is inverted through the adjugate; the jet part follows
    from the terminating Neumann series in the nilpotent perturbation.
    """
    if not isinstance(m, Jet):
        return _adjugate_inverse(m)[0]
    x0, _ = _adjugate_inverse(m.coef[0])
    h = Jet(m.space, m.coef.copy())
    h.coef[0] = 0.0
    p = -einsum("ij,jk->ik", x0, h)
    term = constant(x0, m.space)
    acc = term
    for _ in range(m.space.total_degree):
        term = einsum("ij,jk->ik", p, term)
        acc = acc + term
    acc.coef[0] = x0
    return acc


# ---------------------------------------------------------------------------
# elementwise primitives
# ---------------------------------------------------------------------------


def _compose(x: Jet, coeffs, value):
    """Evaluate ``sum_k coeffs[k] * h**k`` where ``h = x - x.value``.

    ``coeffs[k]`` are Taylor coefficients f^(k)(x0)/k! (arrays broadcast
    over the batch); ``value`` is written to the constant slot verbatim so
    plain-float evaluation is reproduced bit for bit.
    """
    sp = x.space
    h = Jet(sp, x.coef.copy())
    h.coef[0] = 0.0
    K = min(len(coeffs) - 1, sp.total_degree)
    res = constant(coeffs[K], sp)
    for k in range(K - 1, -1, -1):
        res = res * h + coeffs[k]
    res.coef[0] = value
    return res


def _ncoef(x: Jet):
    return x.space.total_degree + 1


def reciprocal(x):
    if not isinstance(x, Jet):
        x = np.asarray(x, dtype=float)
        if np.any(x == 0):
            raise DomainError("division by zero")
        return 1.0 / x
    a0 = x.coef[0]
    if np.any(a0 == 0):
        raise DomainError("division by zero")
    inv_a = 1.0 / a0
    coeffs = [inv_a]
    for _ in range(1, _ncoef(x)):
        coeffs.append(-coeffs[-1] * inv_a)
    return _compose(x, coeffs, inv_a)


def _real_power(x: Jet, p: float, value):
    a0 = x.coef[0]
    coeffs = []
    binom = 1.0
    for k in range(_ncoef(x)):
        coeffs.append(binom * a0 ** (p - k))
        binom *= (p - k) / (k + 1)
    return _compose(x, coeffs, value)


def sqrt(x):
    if not isinstance(x, Jet):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise DomainError("sqrt of a negative value")
        return np.sqrt(x) if x.ndim else float(np.sqrt(x))
    a0 = x.coef[0]
    if np.any(a0 <= 0):
        raise DomainError("sqrt of a non-positive value")
    return _real_power(x, 0.5, np.sqrt(a0))


def exp(x):
    if not isinstance(x, Jet):
        r = np.exp(np.asarray(x, dtype=float))
        return r if np.ndim(r) else float(r)
    e0 = np.exp(x.coef[0])
    coeffs = [e0 / math.factorial(k) for k in range(_ncoef(x))]
    return _compose(x, coeffs, e0)


def log(x):
    if not isinstance(x, Jet):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise DomainError("log of a non-positive value")
        r = np.log(x)
        return r if r.ndim else float(r)
    a0 = x.coef[0]
    if np.any(a0 <= 0):
        raise DomainError("log of a non-positive value")
    coeffs = [np.log(a0)]
    for k in range(1, _ncoef(x)):
        coeffs.append((-1.0) ** (k + 1) / (k * a0 ** k))
    return _compose(x, coeffs, coeffs[0])


def _trig(x: Jet, cyc, value):
    coeffs = [cyc[k % 4] / math.factorial(k) for k in range(_ncoef(x))]
    return _compose(x, coeffs, value)


def sin(x):
    if not isinstance(x, Jet):
        r = np.sin(np.asarray(x, dtype=float))
        return r if np.ndim(r) else float(r)
    s, c = np.sin(x.coef[0]), np.cos(x.coef[0])
    return _trig(x, (s, c, -s, -c), s)


def cos(x):
    if not isinstance(x, Jet):
        r = np.cos(np.asarray(x, dtype=float))
        return r if np.ndim(r) else float(r)
    s, c = np.sin(x.coef[0]), np.cos(x.coef[0])
    return _trig(x, (c, -s, -c, s), c)


def tan(x):
    if not isinstance(x, Jet):
        r = np.tan(np.asarray(x, dtype=float))
        return r if np.ndim(r) else float(r)
    out = sin(x) / cos(x)
    out.coef[0] = np.tan(x.coef[0])
    return out


def tanh(x):
    if not isinstance(x, Jet):
        r = np.tanh(np.asarray(x, dtype=float))
        return r if np.ndim(r) else float(r)
    sh, ch = np.sinh(x.coef[0]), np.cosh(x.coef[0])
    num = _trig(x, (sh, ch, sh, ch), sh)
    den = _trig(x, (ch, sh, ch, sh), ch)
    out = num / den
    out.coef[0] = np.tanh(x.coef[0])
    return out


def absolute(x):
    if not isinstance(x, Jet):
        r = np.abs(np.asarray(x, dtype=float))
        return r if np.ndim(r) else float(r)
    a0 = x.coef[0]
    if x.space.total_degree > 0 and np.any(a0 == 0):
        raise DomainError("abs is not differentiable at 0")
    return Jet(x.space, x.coef * _expand_batch(np.sign(a0)[None], x.ndim))


def _is_integer(p):
    return float(p).is_integer()


def _int_power(x: Jet, n: int):
    if n == 0:
        return constant(np.ones(x.shape), x.space)
    if n < 0:
        out = reciprocal(_int_power(x, -n))
        out.coef[0] = x.coef[0] ** n
        return out
    result = None
    base = x
    k = n
    while k:
        if k & 1:
            result = base if result is None else result * base
        k >>= 1
        if k:
            base = base * base
    out = Jet(result.space, result.coef.copy())
    out.coef[0] = x.coef[0] ** n
    return out


def power(x, p):
    """``x ** p``.  Integer exponents work for any base; other exponents
    need a positive base."""
    if isinstance(p, Jet):
        if not isinstance(x, Jet) and np.all(np.asarray(x) > 0):
            out = exp(p * np.log(x))
            out.coef[0] = np.asarray(x, dtype=float) ** p.coef[0]
            return out
        xv = value_of(x)
        if np.any(np.asarray(xv) <= 0):
            raise DomainError("non-integer power of a non-positive base")
        out = exp(p * log(x))
        out.coef[0] = np.asarray(xv) ** p.coef[0]
        return out
    pv = float(p)
    if not isinstance(x, Jet):
        xv = np.asarray(x, dtype=float)
        if not _is_integer(pv) and np.any(xv <= 0):
            raise DomainError("non-integer power of a non-positive base")
        if _is_integer(pv) and pv < 0 and np.any(xv == 0):
            raise DomainError("division by zero")
        r = xv ** int(pv) if _is_integer(pv) else xv ** pv
        return r if np.ndim(r) else float(r)
    if _is_integer(pv):
        if pv < 0 and np.any(x.coef[0] == 0):
            raise DomainError("division by zero")
        return _int_power(x, int(pv))
    if np.any(x.coef[0] <= 0):
        raise DomainError("non-integer power of a non-positive base")
    return _real_power(x, pv, x.coef[0] ** pv)


def minimum(a, b):
    av, bv = value_of(a), value_of(b)
    if np.ndim(av) or np.ndim(bv):
        raise ValueError("min/max operate on scalars")
    return a if av <= bv else b


def maximum(a, b):
    av, bv = value_of(a), value_of(b)
    if np.ndim(av) or np.ndim(bv):
        raise ValueError("min/max operate on scalars")
    return a if av >= bv else b


def _add(a, b):
    return a + b


def _sub(a, b):
    return a - b


def _mul(a, b):
    return a * b


def _div(a, b):
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        if np.any(np.asarray(b) == 0):
            raise DomainError("division by zero")
    return a / b


def _neg(a):
    return -a


def _pow_int(a, n):
    if isinstance(n, Jet) or not _is_integer(float(n)):
        raise ValueError("pow_int needs an integer exponent")
    return power(a, int(n))


_PRIMITIVES = {
    "add": (_add, 2),
    "sub": (_sub, 2),
    "mul": (_mul, 2),
    "div": (_div, 2),
    "neg": (_neg, 1),
    "sqrt": (sqrt, 1),
    "pow_int": (_pow_int, 2),
    "sin": (sin, 1),
    "cos": (cos, 1),
    "exp": (exp, 1),
    "log": (log, 1),
    "abs": (absolute, 1),
}


def primitive(op: str, *args):
    """Apply a named primitive (``add``, ``sqrt``, ``pow_int`` ...)."""
    try:
        fn, arity = _PRIMITIVES[op]
    except KeyError:
        raise ValueError(f"unknown primitive {op!r}") from None
    if len(args) != arity:
        raise ValueError(f"{op} takes {arity} argument(s), got {len(args)}")
    return fn(*args)
