"""Extended-precision value evaluator over the expression AST, used to build
finite-difference oracles whose roundoff is negligible against the stated
tolerances (the comparison step stays at the stated 1e-5)."""
import mpmath as mp
import numpy as np

from msebarrier.exprcalc import BinOp, Call, Expr, Neg, Num, Var

mp.mp.dps = 30

_FUNCS = {
    "sin": mp.sin, "cos": mp.cos, "tan": mp.tan, "exp": mp.exp,
    "ln": mp.log, "sqrt": mp.sqrt, "abs": abs,
}


def mp_value(node, point):
    if isinstance(node, Num):
        return mp.mpf(node.value)
    if isinstance(node, Var):
        return point[node.index]
    if isinstance(node, Neg):
        return -mp_value(node.arg, point)
    if isinstance(node, Call):
        return _FUNCS[node.func](mp_value(node.arg, point))
    if isinstance(node, BinOp):
        a = mp_value(node.left, point)
        if node.op == "^":
            b = mp_value(node.right, point)
            if b == int(b):
                return a ** int(b)
            return a ** b
        b = mp_value(node.right, point)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        return a / b
    raise TypeError(node)


def fd_jet(expr: Expr, point, h: float = 1e-5):
    """Central-difference value/gradient/Hessian oracle at step h, with the
    stencil evaluated in extended precision."""
    n = len(expr.variables)
    x = [mp.mpf(v) for v in np.asarray(point, dtype=float)]
    hh = mp.mpf(h)

    def f(shift):
        pt = [x[i] + shift.get(i, 0) * hh for i in range(n)]
        return mp_value(expr.root, pt)

    f0 = f({})
    grad = np.empty(n)
    hess = np.empty((n, n))
    for i in range(n):
        fp, fm = f({i: 1}), f({i: -1})
        grad[i] = float((fp - fm) / (2 * hh))
        hess[i, i] = float((fp - 2 * f0 + fm) / hh ** 2)
    for i in range(n):
        for j in range(i + 1, n):
            fpp = f({i: 1, j: 1})
            fpm = f({i: 1, j: -1})
            fmp = f({i: -1, j: 1})
            fmm = f({i: -1, j: -1})
            hess[i, j] = hess[j, i] = float((fpp - fpm - fmp + fmm) / (4 * hh ** 2))
    return float(f0), grad, hess
