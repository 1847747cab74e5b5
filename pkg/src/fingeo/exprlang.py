"""Analytic expression language for scenario fields.

Grammar (``^`` binds tightest and is right-associative; unary minus sits
between ``*`` and ``^`` so ``-x^2`` is ``-(x^2)``)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Names are the coordinates ``x0``..``x3``, declared parameters, or one of the
functions ``sqrt sin cos tan exp log tanh`` (one argument) and
``pow min max`` (two arguments).

Expressions evaluate over plain floats or :class:`fingeo.adnum.Jet` values;
:func:`compile_gradient` additionally emits a fast float routine returning
the value and its four coordinate derivatives.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import adnum as ad
from .adnum import DomainError

__all__ = [
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifier",
    "ArityMismatch",
    "Const",
    "Var",
    "Param",
    "Unary",
    "Binary",
    "Call",
    "parse_expr",
    "eval_expr",
    "to_source",
    "structure",
    "free_params",
    "is_constant",
    "compile_gradient",
    "FUNCTIONS",
]


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    """Malformed expression; ``offset`` is the byte offset of the problem."""

    def __init__(self, message, offset, text=""):
        super().__init__(f"{message} at offset {offset}")
        self.message = message
        self.offset = offset
        self.text = text


class UnknownIdentifier(ExprError):
    def __init__(self, name, offset=None):
        where = "" if offset is None else f" at offset {offset}"
        super().__init__(f"unknown identifier {name!r}{where}")
        self.name = name
        self.offset = offset


class ArityMismatch(ExprError):
    def __init__(self, name, expected, got, offset=None):
        super().__init__(f"{name}() takes {expected} argument(s), got {got}")
        self.name = name
        self.expected = expected
        self.got = got
        self.offset = offset


FUNCTIONS = {
    "sqrt": 1,
    "sin": 1,
    "cos": 1,
    "tan": 1,
    "exp": 1,
    "log": 1,
    "tanh": 1,
    "pow": 2,
    "min": 2,
    "max": 2,
}

_VARIABLES = {"x0": 0, "x1": 1, "x2": 2, "x3": 3}


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float
    span: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Var:
    index: int
    span: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Param:
    name: str
    span: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Unary:
    op: str
    child: object
    span: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object
    span: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple
    span: tuple = field(default=(0, 0), compare=False)


# ---------------------------------------------------------------------------
# tokenizer / parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def _tokenize(text):
    raw = text.encode("utf-8")
    # byte offsets: map char index -> byte index
    byte_at = np.cumsum([0] + [len(ch.encode("utf-8")) for ch in text]).tolist()
    tokens = []
    i = 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[i]!r}", byte_at[i], text)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), byte_at[m.start()], byte_at[m.end()]))
        i = m.end()
    tokens.append(("end", "", len(raw), len(raw)))
    return tokens


class _Parser:
    def __init__(self, text, params):
        self.text = text
        self.params = frozenset(params)
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] not in ("op",):
            found = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ExprSyntaxError(f"expected {value!r}, found {found}", tok[2], self.text)
        return self.take()

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExprSyntaxError(f"unexpected {tok[1]!r}", tok[2], self.text)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            node = Binary(op, node, rhs, (node.span[0], rhs.span[1]))
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            rhs = self.unary()
            node = Binary(op, node, rhs, (node.span[0], rhs.span[1]))
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] in "+-":
            self.take()
            child = self.unary()
            if tok[1] == "+":
                return child
            return Unary("-", child, (tok[2], child.span[1]))
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            exponent = self.unary()
            return Binary("^", base, exponent, (base.span[0], exponent.span[1]))
        return base

    def atom(self):
        tok = self.take()
        kind, text, start, end = tok
        if kind == "num":
            return Const(float(text), (start, end))
        if kind == "name":
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                if text not in FUNCTIONS:
                    raise UnknownIdentifier(text, start)
                self.take()
                args = [self.expr()]
                while self.peek()[0] == "op" and self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                close = self.expect(")")
                if len(args) != FUNCTIONS[text]:
                    raise ArityMismatch(text, FUNCTIONS[text], len(args), start)
                return Call(text, tuple(args), (start, close[3]))
            if text in _VARIABLES:
                return Var(_VARIABLES[text], (start, end))
            if text in self.params:
                return Param(text, (start, end))
            if text in FUNCTIONS:
                raise ExprSyntaxError(f"function {text!r} needs an argument list",
                                      end, self.text)
            raise UnknownIdentifier(text, start)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", start, self.text)
        raise ExprSyntaxError(f"unexpected {text!r}", start, self.text)


def parse_expr(text: str, params: Iterable[str] = ()):
    """Parse ``text`` into an AST; ``params`` are the declared parameter names."""
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", 0, text if isinstance(text, str) else "")
    for p in params:
        if p in _VARIABLES or p in FUNCTIONS:
            raise ExprError(f"parameter name {p!r} shadows a built-in name")
    return _Parser(text, params).parse()


# ---------------------------------------------------------------------------
# inspection
# ---------------------------------------------------------------------------


def _children(node):
    if isinstance(node, Unary):
        return (node.child,)
    if isinstance(node, Binary):
        return (node.left, node.right)
    if isinstance(node, Call):
        return node.args
    return ()


def free_params(node) -> set:
    out = set()
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Param):
            out.add(n.name)
        stack.extend(_children(n))
    return out


def is_constant(node) -> bool:
    """True if the expression has no coordinate dependence."""
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Var):
            return False
        stack.extend(_children(n))
    return True


def structure(node):
    """Span-free nested tuple describing the tree."""
    if isinstance(node, Const):
        return ("const", node.value)
    if isinstance(node, Var):
        return ("var", node.index)
    if isinstance(node, Param):
        return ("param", node.name)
    if isinstance(node, Unary):
        return ("unary", node.op, structure(node.child))
    if isinstance(node, Binary):
        return ("binary", node.op, structure(node.left), structure(node.right))
    if isinstance(node, Call):
        return ("call", node.name) + tuple(structure(a) for a in node.args)
    raise TypeError(node)


def to_source(node) -> str:
    """Fully parenthesised source text that parses back to the same tree."""
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Param):
        return node.name
    if isinstance(node, Unary):
        return f"(-{to_source(node.child)})"
    if isinstance(node, Binary):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_source(a) for a in node.args)})"
    raise TypeError(node)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def _integer_exponent(value):
    if isinstance(value, ad.Jet):
        return None
    v = float(value)
    if v.is_integer() and abs(v) <= 64:
        return int(v)
    return None


def _power(base, exponent):
    n = _integer_exponent(exponent)
    if n is not None:
        return ad.power(base, n)
    return ad.power(base, exponent)


def _divide(a, b):
    if not isinstance(b, ad.Jet):
        if float(b) == 0.0:
            raise DomainError("division by zero")
        if not isinstance(a, ad.Jet):
            return float(np.float64(a) / np.float64(b))
    return a / b


_UNARY_FUNCS = {
    "sqrt": ad.sqrt,
    "sin": ad.sin,
    "cos": ad.cos,
    "tan": ad.tan,
    "exp": ad.exp,
    "log": ad.log,
    "tanh": ad.tanh,
}


def _as_float(v):
    return v if isinstance(v, ad.Jet) else float(v)


def eval_expr(node, point: Sequence, params: Mapping[str, float] | None = None):
    """Evaluate ``node`` at ``point`` (four floats or jets).

    The result is a float when every input is a float and a jet otherwise.
    """
    params = params or {}
    if len(point) != 4:
        raise ValueError("point needs four coordinates")

    def ev(n):
        if isinstance(n, Const):
            return n.value
        if isinstance(n, Var):
            return point[n.index]
        if isinstance(n, Param):
            try:
                return float(params[n.name])
            except KeyError:
                raise UnknownIdentifier(n.name, n.span[0]) from None
        if isinstance(n, Unary):
            return -ev(n.child)
        if isinstance(n, Binary):
            a = ev(n.left)
            b = ev(n.right)
            if n.op == "+":
                return a + b
            if n.op == "-":
                return a - b
            if n.op == "*":
                return a * b
            if n.op == "/":
                return _divide(a, b)
            return _power(a, b)
        if isinstance(n, Call):
            args = [ev(a) for a in n.args]
            if n.name in _UNARY_FUNCS:
                return _UNARY_FUNCS[n.name](args[0])
            if n.name == "pow":
                return _power(args[0], args[1])
            if n.name == "min":
                return ad.minimum(args[0], args[1])
            return ad.maximum(args[0], args[1])
        raise TypeError(n)

    out = ev(node)
    if not isinstance(out, ad.Jet):
        out = float(out)
    return out


# ---------------------------------------------------------------------------
# compiled value + gradient (fast float path)
# ---------------------------------------------------------------------------


def _g_sqrt(v):
    if v <= 0.0:
        raise DomainError("sqrt of a non-positive value")
    return math.sqrt(v)


def _g_log(v):
    if v <= 0.0:
        raise DomainError("log of a non-positive value")
    return math.log(v)


def _g_div(a, b):
    if b == 0.0:
        raise DomainError("division by zero")
    return a / b


def _g_rpow(a, p):
    if a <= 0.0:
        raise DomainError("non-integer power of a non-positive base")
    return a ** p


_GRAD_ENV = {
    "math": math,
    "_sqrt": _g_sqrt,
    "_log": _g_log,
    "_div": _g_div,
    "_rpow": _g_rpow,
    "DomainError": DomainError,
}


class _GradCompiler:
    """Emits straight-line Python computing a value and its x-gradient.

    Gradients known to vanish are tracked symbolically (``None``) so constant
    subtrees cost a single assignment.
    """

    def __init__(self, params):
        self.params = params
        self.lines = []
        self.count = 0

    def fresh(self):
        self.count += 1
        return f"t{self.count}"

    def emit(self, line):
        self.lines.append("    " + line)

    def scale(self, factor, grad):
        if grad is None:
            return None
        out = []
        for gk in grad:
            if gk == "0.0":
                out.append("0.0")
            else:
                out.append(f"({factor})*{gk}")
        return out

    def combine(self, ga, gb, sign):
        if ga is None and gb is None:
            return None
        if ga is None:
            return gb if sign == "+" else [f"-{g}" for g in gb]
        if gb is None:
            return ga
        return [f"{a}{sign}{b}" for a, b in zip(ga, gb)]

    def bind(self, grad):
        if grad is None:
            return None
        names = []
        for gk in grad:
            if gk == "0.0":
                names.append("0.0")
                continue
            t = self.fresh()
            self.emit(f"{t} = {gk}")
            names.append(t)
        return names

    def node(self, n):
        if isinstance(n, Const):
            return repr(float(n.value)), None
        if isinstance(n, Param):
            if n.name not in self.params:
                raise UnknownIdentifier(n.name, n.span[0])
            return repr(float(self.params[n.name])), None
        if isinstance(n, Var):
            g = ["0.0"] * 4
            g[n.index] = "1.0"
            return f"x{n.index}", g
        if isinstance(n, Unary):
            v, g = self.node(n.child)
            t = self.fresh()
            self.emit(f"{t} = -{v}")
            return t, self.bind(self.scale("-1.0", g))
        if isinstance(n, Binary):
            a, ga = self.node(n.left)
            b, gb = self.node(n.right)
            t = self.fresh()
            if n.op in "+-":
                self.emit(f"{t} = {a} {n.op} {b}")
                return t, self.bind(self.combine(ga, gb, n.op))
            if n.op == "*":
                self.emit(f"{t} = {a} * {b}")
                return t, self.bind(self.combine(self.scale(b, ga), self.scale(a, gb), "+"))
            if n.op == "/":
                self.emit(f"{t} = _div({a}, {b})")
                g = self.combine(self.scale(f"1.0/{b}", ga), self.scale(f"-{t}/{b}", gb), "+")
                return t, self.bind(g)
            return self.power(a, ga, b, gb, n.right)
        if isinstance(n, Call):
            args = [self.node(a) for a in n.args]
            t = self.fresh()
            if n.name == "pow":
                (a, ga), (b, gb) = args
                self.count -= 1
                return self.power(a, ga, b, gb, n.args[1])
            if n.name in ("min", "max"):
                (a, ga), (b, gb) = args
                cmp = "<=" if n.name == "min" else ">="
                self.emit(f"_pick = {a} {cmp} {b}")
                self.emit(f"{t} = {a} if _pick else {b}")
                if ga is None and gb is None:
                    return t, None
                ga = ga or ["0.0"] * 4
                gb = gb or ["0.0"] * 4
                return t, self.bind([f"({x} if _pick else {y})" for x, y in zip(ga, gb)])
            (a, ga), = args
            if n.name == "sqrt":
                self.emit(f"{t} = _sqrt({a})")
                d = f"0.5/{t}"
            elif n.name == "sin":
                self.emit(f"{t} = math.sin({a})")
                d = f"math.cos({a})"
            elif n.name == "cos":
                self.emit(f"{t} = math.cos({a})")
                d = f"-math.sin({a})"
            elif n.name == "tan":
                self.emit(f"{t} = math.tan({a})")
                d = f"1.0 + {t}*{t}"
            elif n.name == "exp":
                self.emit(f"{t} = math.exp({a})")
                d = t
            elif n.name == "log":
                self.emit(f"{t} = _log({a})")
                d = f"1.0/{a}"
            elif n.name == "tanh":
                self.emit(f"{t} = math.tanh({a})")
                d = f"1.0 - {t}*{t}"
            else:  # pragma: no cover - parser guarantees the name set
                raise UnknownIdentifier(n.name)
            if ga is None:
                return t, None
            dn = self.fresh()
            self.emit(f"{dn} = {d}")
            return t, self.bind(self.scale(dn, ga))
        raise TypeError(n)

    def power(self, a, ga, b, gb, exponent_node):
        t = self.fresh()
        if gb is None and is_constant(exponent_node):
            # exponent value is fixed; pick the integer path when possible
            self.emit(f"_e = {b}")
            self.emit(f"_ie = int(_e) if float(_e).is_integer() and abs(_e) <= 64 else None")
            self.emit(f"if _ie is not None and _ie < 0 and {a} == 0.0: raise DomainError('division by zero')")
            self.emit(f"{t} = {a} ** _ie if _ie is not None else _rpow({a}, _e)")
            if ga is None:
                return t, None
            dn = self.fresh()
            self.emit(f"{dn} = (_e * {a} ** (_ie - 1) if _ie is not None else _e * _rpow({a}, _e - 1.0))")
            return t, self.bind(self.scale(dn, ga))
        self.emit(f"{t} = _rpow({a}, {b})")
        da = self.fresh()
        self.emit(f"{da} = {b} * _rpow({a}, {b} - 1.0)")
        lb = self.fresh()
        self.emit(f"{lb} = {t} * math.log({a})")
        g = self.combine(self.scale(da, ga), self.scale(lb, gb), "+")
        return t, self.bind(g)


def compile_gradient(node, params: Mapping[str, float] | None = None) -> Callable:
    """Compile ``node`` to ``f(x0, x1, x2, x3) -> (value, (d0, d1, d2, d3))``.

    Parameters are frozen into the generated code.  Domain violations raise
    :class:`DomainError` like the jet evaluator.
    """
    comp = _GradCompiler(dict(params or {}))
    v, g = comp.node(node)
    g = g or ["0.0"] * 4
    body = "\n".join(comp.lines)
    src = (f"def _f(x0, x1, x2, x3):\n{body}\n"
           f"    return {v}, ({g[0]}, {g[1]}, {g[2]}, {g[3]})\n")
    env = dict(_GRAD_ENV)
    exec(compile(src, "<expr>", "exec"), env)
    fn = env["_f"]
    fn.source = src
    return fn
