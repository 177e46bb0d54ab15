"""Deterministic random expression generator for the AD-vs-FD property suite.

Expressions stay within safe sub-domains by construction: ln and sqrt only see
strictly positive arguments, denominators are bounded away from zero, and
constant offsets stay small so finite differences are well conditioned.
"""
import numpy as np

from msebarrier.exprcalc import parse


def _gen(rng: np.random.Generator, variables, depth: int) -> str:
    if depth <= 0 or rng.random() < 0.25:
        if rng.random() < 0.65:
            return rng.choice(variables)
        return f"{rng.uniform(-1.5, 1.5):.4f}"
    roll = rng.random()
    a = _gen(rng, variables, depth - 1)
    if roll < 0.16:
        return f"({a} + {_gen(rng, variables, depth - 1)})"
    if roll < 0.32:
        return f"({a} - {_gen(rng, variables, depth - 1)})"
    if roll < 0.48:
        return f"({a} * {_gen(rng, variables, depth - 1)})"
    if roll < 0.56:
        # denominator bounded away from zero
        return f"({a} / (({_gen(rng, variables, depth - 1)})^2 + {rng.uniform(0.6, 2.0):.4f}))"
    if roll < 0.64:
        return f"sin({a})"
    if roll < 0.72:
        return f"cos({a})"
    if roll < 0.80:
        return f"exp(0.5 * {a})"
    if roll < 0.86:
        return f"ln(({a})^2 + {rng.uniform(0.6, 2.0):.4f})"
    if roll < 0.92:
        return f"sqrt(({a})^2 + {rng.uniform(0.6, 2.0):.4f})"
    return f"({a})^{int(rng.integers(2, 4))}"


def random_cases(seed: int, count: int, variables=("x", "y"), depth: int = 3):
    """Yield (expr, point) pairs with bounded values and derivatives."""
    rng = np.random.default_rng(seed)
    produced = 0
    while produced < count:
        src = _gen(rng, list(variables), depth)
        expr = parse(src, variables)
        point = rng.uniform(-1.2, 1.2, size=len(variables))
        from msebarrier.exprcalc import eval_jet2
        jet = eval_jet2(expr, point)
        scale = max(abs(jet.value), np.abs(jet.gradient).max(),
                    np.abs(jet.hessian).max())
        if not np.isfinite(scale) or scale > 50.0:
            continue
        produced += 1
        yield expr, point, jet
