"""Small numerical kernels shared across the package."""

import math
from functools import lru_cache

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@lru_cache(maxsize=None)
def gauss_legendre(order: int):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return (x + 1.0) / 2.0, w / 2.0


def composite_rule(lo: float, hi: float, panels: int, order: int):
    """Composite Gauss-Legendre rule on [lo, hi].

    Returns ``(nodes, weights)`` with ``panels * order`` entries; the weights
    sum to ``hi - lo``.
    """
    x, w = gauss_legendre(order)
    edges = np.linspace(lo, hi, panels + 1)
    width = np.diff(edges)
    nodes = edges[:-1, None] + width[:, None] * x[None, :]
    weights = width[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def compensated_cumsum(values: np.ndarray) -> np.ndarray:
    """Prefix sums with a TwoSum correction of each partial sum.

    The error of every floating-point addition in ``np.cumsum`` is recovered
    exactly and accumulated separately, which keeps the prefix sums accurate
    to about one ulp of the running total times the condition number.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return values.copy()
    sums = np.cumsum(values)
    prev = np.concatenate(([0.0], sums[:-1]))
    bb = sums - prev
    err = (prev - (sums - bb)) + (values - bb)
    return sums + np.cumsum(err)


def golden_section_max(fun, lo: float, hi: float, xtol: float = 1e-12, max_iter: int = 200):
    """Maximize a unimodal ``fun`` on [lo, hi]; returns ``(x, fun(x))``."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(max_iter):
        if b - a <= xtol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = fun(d)
    if fc >= fd:
        return c, fc
    return d, fd


def richardson_derivative(fun, x: float, h: float, order: int = 1, levels: int = 2) -> float:
    """Central finite difference of ``fun`` at ``x`` with Richardson extrapolation.

    ``order`` is 1 or 2 (first or second derivative); each extrapolation level
    halves the step and removes the next even power of ``h``.
    """
    def central(step):
        if order == 1:
            return (fun(x + step) - fun(x - step)) / (2.0 * step)
        if order == 2:
            return (fun(x + step) - 2.0 * fun(x) + fun(x - step)) / (step * step)
        raise ValueError("order must be 1 or 2")

    table = [central(h / 2.0**k) for k in range(levels + 1)]
    for level in range(1, levels + 1):
        factor = 4.0**level
        table = [(factor * table[k + 1] - table[k]) / (factor - 1.0) for k in range(len(table) - 1)]
    return table[0]
