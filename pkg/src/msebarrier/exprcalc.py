"""Scalar math expressions in named variables, evaluated with exact first and
second derivatives.

Expressions are parsed once into an immutable AST and evaluated by propagating
second-order forward jets (value, gradient, Hessian) through every node, so
derivatives are exact to machine precision for the composed elementary
functions.  Evaluation is vectorized: a batch of points is processed in one
pass with numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Expr",
    "Jet2",
    "CurveJet",
    "ExprError",
    "ParseError",
    "UnknownVariableError",
    "UnknownFunctionError",
    "DomainError",
    "parse",
    "eval_jet2",
    "eval_jet2_many",
    "eval_curve_jet",
    "eval_curve_jet_many",
]


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    def __init__(self, position: int, message: str):
        super().__init__(f"{message} (at position {position})")
        self.position = position
        self.reason = message


class UnknownVariableError(ExprError):
    def __init__(self, name: str, position: int = -1):
        super().__init__(f"unknown variable '{name}'")
        self.name = name
        self.position = position


class UnknownFunctionError(ExprError):
    def __init__(self, name: str, position: int = -1):
        super().__init__(f"unknown function '{name}'")
        self.name = name
        self.position = position


class DomainError(ExprError):
    """Evaluation left the natural domain of a sub-expression."""

    def __init__(self, message: str, subtree: str):
        super().__init__(f"{message} in '{subtree}'")
        self.subtree = subtree


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str
    index: int


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


# Functions with their value / first / second derivative rules.  All are C^2
# on their natural domain except abs, whose kink at 0 is only flagged (see
# Expr.c2_smooth); away from 0 its derivatives are exact.
_FUNCTIONS = ("sin", "cos", "tan", "exp", "ln", "sqrt", "abs")

_ADD_PREC = 10
_MUL_PREC = 20
_UNARY_PREC = 30
_POW_PREC = 40


@dataclass(frozen=True)
class Expr:
    """A parsed expression over a fixed tuple of variables."""

    root: object
    variables: tuple[str, ...]

    @property
    def c2_smooth(self) -> bool:
        """False when the tree contains abs, which is not C^2 at its kink."""
        return not _contains_abs(self.root)

    def __str__(self) -> str:
        return _to_str(self.root, 0)


def _contains_abs(node) -> bool:
    if isinstance(node, Call):
        return node.func == "abs" or _contains_abs(node.arg)
    if isinstance(node, Neg):
        return _contains_abs(node.arg)
    if isinstance(node, BinOp):
        return _contains_abs(node.left) or _contains_abs(node.right)
    return False


def _to_str(node, parent_prec: int) -> str:
    if isinstance(node, Num):
        s = repr(node.value)
        return s
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({_to_str(node.arg, 0)})"
    if isinstance(node, Neg):
        s = "-" + _to_str(node.arg, _UNARY_PREC)
        return f"({s})" if parent_prec > _UNARY_PREC else s
    if isinstance(node, BinOp):
        if node.op in "+-":
            prec, lp, rp = _ADD_PREC, _ADD_PREC, _ADD_PREC + 1
        elif node.op in "*/":
            prec, lp, rp = _MUL_PREC, _MUL_PREC, _MUL_PREC + 1
        else:  # ^ is right-associative
            prec, lp, rp = _POW_PREC, _POW_PREC + 1, _POW_PREC
        if node.op == "^":
            s = f"{_to_str(node.left, lp)}^{_to_str(node.right, rp)}"
        else:
            s = f"{_to_str(node.left, lp)} {node.op} {_to_str(node.right, rp)}"
        return f"({s})" if parent_prec > prec else s
    raise TypeError(f"unexpected node {node!r}")


# ---------------------------------------------------------------------------
# Tokenizer / parser (precedence climbing)
# ---------------------------------------------------------------------------

def _tokenize(src: str):
    tokens = []  # (kind, text, position)
    i, n = 0, len(src)
    while i < n:
        ch = src[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and src[i + 1].isdigit()):
            j = i
            while j < n and (src[j].isdigit() or src[j] == "."):
                j += 1
            if j < n and src[j] in "eE":
                k = j + 1
                if k < n and src[k] in "+-":
                    k += 1
                if k < n and src[k].isdigit():
                    j = k
                    while j < n and src[j].isdigit():
                        j += 1
            text = src[i:j]
            try:
                value = float(text)
            except ValueError:
                raise ParseError(i, f"bad number literal '{text}'") from None
            tokens.append(("num", value, i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            tokens.append(("name", src[i:j], i))
            i = j
            continue
        if ch in "+-*/^(),":
            tokens.append((ch, ch, i))
            i += 1
            continue
        raise ParseError(i, f"unexpected character '{ch}'")
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens, variables: tuple[str, ...]):
        self.tokens = tokens
        self.pos = 0
        self.variables = variables
        self.var_index = {name: k for k, name in enumerate(variables)}

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str):
        tok = self.advance()
        if tok[0] != kind:
            raise ParseError(tok[2], f"expected '{kind}', found '{tok[1] or 'end of input'}'")
        return tok

    def parse_expr(self, min_prec: int):
        left = self.parse_atom()
        while True:
            kind, _, _ = self.peek()
            if kind in "+-":
                prec = _ADD_PREC
            elif kind in "*/":
                prec = _MUL_PREC
            elif kind == "^":
                prec = _POW_PREC
            else:
                break
            if prec < min_prec:
                break
            self.advance()
            # ^ is right-associative: the right operand reabsorbs ^ itself
            right = self.parse_expr(prec if kind == "^" else prec + 1)
            left = BinOp(kind, left, right)
        return left

    def parse_atom(self):
        kind, text, pos = self.advance()
        if kind == "num":
            return Num(text)
        if kind == "-":
            # unary minus binds looser than ^, so -x^2 is -(x^2)
            return Neg(self.parse_expr(_UNARY_PREC))
        if kind == "(":
            inner = self.parse_expr(0)
            self.expect(")")
            return inner
        if kind == "name":
            if self.peek()[0] == "(":
                if text not in _FUNCTIONS:
                    raise UnknownFunctionError(text, pos)
                self.advance()
                arg = self.parse_expr(0)
                nxt = self.advance()
                if nxt[0] == ",":
                    raise ParseError(nxt[2], f"function '{text}' takes one argument")
                if nxt[0] != ")":
                    raise ParseError(nxt[2], "expected ')'")
                return Call(text, arg)
            if text not in self.var_index:
                raise UnknownVariableError(text, pos)
            return Var(text, self.var_index[text])
        raise ParseError(pos, f"unexpected '{text or 'end of input'}'")


def parse(src: str, variables) -> Expr:
    """Parse ``src`` over the declared variable names.

    Grammar: infix with + - * / and ^ (right-associative, binding tighter
    than unary minus), parentheses, real literals, and the one-argument
    functions sin, cos, tan, exp, ln, sqrt, abs.
    """
    variables = tuple(variables)
    if len(set(variables)) != len(variables):
        raise ValueError(f"duplicate variable names in {variables}")
    if not src or not src.strip():
        raise ParseError(0, "empty expression")
    parser = _Parser(_tokenize(src), variables)
    root = parser.parse_expr(0)
    end = parser.advance()
    if end[0] != "end":
        raise ParseError(end[2], f"unexpected trailing '{end[1]}'")
    return Expr(root, variables)


# ---------------------------------------------------------------------------
# Jet evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Jet2:
    """Second-order Taylor data of a scalar field at one point.

    The Hessian is stored (and produced) exactly symmetric.
    """

    value: float
    gradient: np.ndarray  # (n,)
    hessian: np.ndarray   # (n, n)

    @property
    def laplacian(self) -> float:
        return float(np.trace(self.hessian))


@dataclass(frozen=True)
class CurveJet:
    """Position, velocity and acceleration of a parametric plane curve."""

    position: np.ndarray      # (2,)
    velocity: np.ndarray      # (2,)
    acceleration: np.ndarray  # (2,)


def _outer_sym(ga, gb):
    # symmetric part of ga (x) gb + gb (x) ga; shapes (n, m)
    return ga[:, None, :] * gb[None, :, :] + gb[:, None, :] * ga[None, :, :]


def _lift(node, f, f1, f2):
    """Chain rule for a scalar function applied to jet (v, g, H)."""
    v, g, H = node
    fv, d1, d2 = f(v), f1(v), f2(v)
    ng = d1[None, :] * g
    nH = d1[None, None, :] * H + d2[None, None, :] * (g[:, None, :] * g[None, :, :])
    return fv, ng, nH


def _jet(node, pts: np.ndarray):
    """Evaluate one AST node over points ``pts`` of shape (n_vars, m).

    Returns (value (m,), gradient (n, m), hessian (n, n, m)).
    """
    n, m = pts.shape
    if isinstance(node, Num):
        return (np.full(m, node.value), np.zeros((n, m)), np.zeros((n, n, m)))
    if isinstance(node, Var):
        g = np.zeros((n, m))
        g[node.index] = 1.0
        return (pts[node.index].copy(), g, np.zeros((n, n, m)))
    if isinstance(node, Neg):
        v, g, H = _jet(node.arg, pts)
        return (-v, -g, -H)
    if isinstance(node, BinOp):
        return _jet_binop(node, pts)
    if isinstance(node, Call):
        return _jet_call(node, pts)
    raise TypeError(f"unexpected node {node!r}")


def _jet_binop(node: BinOp, pts):
    op = node.op
    if op == "^":
        return _jet_pow(node, pts)
    av, ag, aH = _jet(node.left, pts)
    bv, bg, bH = _jet(node.right, pts)
    if op == "+":
        return (av + bv, ag + bg, aH + bH)
    if op == "-":
        return (av - bv, ag - bg, aH - bH)
    if op == "*":
        v = av * bv
        g = ag * bv[None, :] + bg * av[None, :]
        H = aH * bv[None, None, :] + bH * av[None, None, :] + _outer_sym(ag, bg)
        return (v, g, H)
    if op == "/":
        if np.any(bv == 0.0):
            raise DomainError("division by zero", _to_str(node.right, 0))
        iv, ig, iH = _lift((bv, bg, bH), lambda x: 1.0 / x,
                           lambda x: -1.0 / x ** 2, lambda x: 2.0 / x ** 3)
        v = av * iv
        g = ag * iv[None, :] + ig * av[None, :]
        H = aH * iv[None, None, :] + iH * av[None, None, :] + _outer_sym(ag, ig)
        return (v, g, H)
    raise ValueError(f"unknown operator {op}")


def _jet_pow(node: BinOp, pts):
    base = _jet(node.left, pts)
    exp_node = node.right
    neg = False
    if isinstance(exp_node, Neg) and isinstance(exp_node.arg, Num):
        exp_node, neg = exp_node.arg, True
    if isinstance(exp_node, Num):
        p = -exp_node.value if neg else exp_node.value
        bv = base[0]
        if p == int(p):
            # integer exponents do not require a positive base
            k = int(p)
            if k < 0 and np.any(bv == 0.0):
                raise DomainError("zero base with negative exponent", _to_str(node, 0))
            return _lift(base,
                         lambda x: x ** k,
                         lambda x: k * x ** (k - 1) if k != 0 else np.zeros_like(x),
                         lambda x: k * (k - 1) * x ** (k - 2) if k not in (0, 1)
                         else np.zeros_like(x))
        if np.any(bv <= 0.0):
            raise DomainError("non-integer power of a non-positive base", _to_str(node, 0))
        return _lift(base,
                     lambda x: x ** p,
                     lambda x: p * x ** (p - 1),
                     lambda x: p * (p - 1) * x ** (p - 2))
    # general exponent: a^b = exp(b * ln a), base must be positive
    if np.any(base[0] <= 0.0):
        raise DomainError("non-positive base of a variable power", _to_str(node, 0))
    la = _lift(base, np.log, lambda x: 1.0 / x, lambda x: -1.0 / x ** 2)
    ev, eg, eH = _jet(node.right, pts)
    pv = ev * la[0]
    pg = eg * la[0][None, :] + la[1] * ev[None, :]
    pH = eH * la[0][None, None, :] + la[2] * ev[None, None, :] + _outer_sym(eg, la[1])
    return _lift((pv, pg, pH), np.exp, np.exp, np.exp)


def _jet_call(node: Call, pts):
    arg = _jet(node.arg, pts)
    sub = _to_str(node, 0)
    f = node.func
    if f == "sin":
        return _lift(arg, np.sin, np.cos, lambda x: -np.sin(x))
    if f == "cos":
        return _lift(arg, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x))
    if f == "tan":
        return _lift(arg, np.tan,
                     lambda x: 1.0 + np.tan(x) ** 2,
                     lambda x: 2.0 * np.tan(x) * (1.0 + np.tan(x) ** 2))
    if f == "exp":
        return _lift(arg, np.exp, np.exp, np.exp)
    if f == "ln":
        if np.any(arg[0] <= 0.0):
            raise DomainError("logarithm of a non-positive value", sub)
        return _lift(arg, np.log, lambda x: 1.0 / x, lambda x: -1.0 / x ** 2)
    if f == "sqrt":
        if np.any(arg[0] <= 0.0):
            raise DomainError("sqrt of a non-positive value (derivative singular at 0)", sub)
        return _lift(arg, np.sqrt,
                     lambda x: 0.5 / np.sqrt(x),
                     lambda x: -0.25 / x ** 1.5)
    if f == "abs":
        # kink at 0: value/derivatives of the two-sided limit, flagged via c2_smooth
        return _lift(arg, np.abs, np.sign, lambda x: np.zeros_like(x))
    raise UnknownFunctionError(f)


def eval_jet2_many(expr: Expr, points: np.ndarray):
    """Evaluate value, gradient and Hessian at many points.

    ``points`` has shape (n_vars, m); returns arrays of shapes (m,), (n, m)
    and (n, n, m).  The Hessian is symmetrized exactly (it is built from
    symmetric updates only, the final symmetrization removes roundoff skew).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] != len(expr.variables):
        raise ValueError(
            f"points must have shape ({len(expr.variables)}, m), got {pts.shape}")
    v, g, H = _jet(expr.root, pts)
    H = 0.5 * (H + np.swapaxes(H, 0, 1))
    return v, g, H


def eval_jet2(expr: Expr, point) -> Jet2:
    """Evaluate the second-order jet of ``expr`` at a single point."""
    pt = np.atleast_1d(np.asarray(point, dtype=float))
    if pt.shape != (len(expr.variables),):
        raise ValueError(
            f"point must have length {len(expr.variables)}, got shape {pt.shape}")
    v, g, H = eval_jet2_many(expr, pt[:, None])
    return Jet2(float(v[0]), g[:, 0].copy(), H[:, :, 0].copy())


def eval_curve_jet_many(x_expr: Expr, y_expr: Expr, ts: np.ndarray):
    """Position, velocity, acceleration arrays (each (2, m)) along a curve."""
    for e in (x_expr, y_expr):
        if len(e.variables) != 1:
            raise ValueError("curve expressions must have exactly one variable")
    ts = np.asarray(ts, dtype=float).ravel()
    xv, xg, xH = eval_jet2_many(x_expr, ts[None, :])
    yv, yg, yH = eval_jet2_many(y_expr, ts[None, :])
    pos = np.stack([xv, yv])
    vel = np.stack([xg[0], yg[0]])
    acc = np.stack([xH[0, 0], yH[0, 0]])
    return pos, vel, acc


def eval_curve_jet(x_expr: Expr, y_expr: Expr, t: float) -> CurveJet:
    pos, vel, acc = eval_curve_jet_many(x_expr, y_expr, np.array([t]))
    return CurveJet(pos[:, 0].copy(), vel[:, 0].copy(), acc[:, 0].copy())
