"""Quantile envelopes: bounds on node-conditional quantiles that turn probability
statements about optimal splits into distance statements."""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..distributions import SUPPORTED, UnsupportedDistribution, get_marginal


@dataclass(frozen=True)
class QuantileEnvelope:
    distribution: str
    q1: Callable
    q2: Callable
    q1_inv: Callable
    q2_inv: Callable

    @staticmethod
    def psi(lam: float) -> float:
        if not 0 <= lam <= 1:
            raise ValueError("balancedness must lie in [0, 1]")
        return 1.0 - math.sqrt(1.0 - lam)

    def gamma(self, lam: float) -> float:
        psi = self.psi(lam)
        return 2.0 * min(float(self.q1(psi / 2)), 1.0 - float(self.q2(1.0 - psi / 2)))

    def p_left(self, lam: float) -> float:
        return float(self.q2_inv(self.gamma(lam) ** 2 / 2))

    def p_right(self, lam: float) -> float:
        return 1.0 - float(self.q1_inv(1.0 - self.gamma(lam) ** 2 / 2))

    def p(self, lam: float) -> float:
        return min(self.p_left(lam), self.p_right(lam))

    def split_interval(self, lam: float, a: float = 0.0, b: float = 1.0):
        """Where an empirical split must fall: [a + (b-a) G^2/2, b - (b-a) G^2/2]."""
        c = (b - a) * self.gamma(lam) ** 2 / 2
        return a + c, b - c

    def violation(self, grid: int = 50) -> float:
        """Largest breach of q1(p) <= (Q(p) - a)/(b - a) <= q2(p) over an (a, b) x p grid."""
        marg = get_marginal(self.distribution)
        pts = np.linspace(0.0, 1.0, grid)
        p = np.linspace(0.0, 1.0, grid)
        worst = 0.0
        for a in pts:
            for b in pts[pts > a]:
                rel = (marg.conditional_ppf(p, a, b) - a) / (b - a)
                worst = max(worst, float(np.max(self.q1(p) - rel)), float(np.max(rel - self.q2(p))))
        return worst


def _ident(p):
    return np.asarray(p, dtype=float)


def quantile_envelope(distribution: str) -> QuantileEnvelope:
    name = get_marginal(distribution).name
    if name == "uniform":
        return QuantileEnvelope(name, _ident, _ident, _ident, _ident)
    if name == "beta(2,1)":
        return QuantileEnvelope(name, _ident, np.sqrt, _ident, np.square)
    if name == "beta(1/2,1)":
        return QuantileEnvelope(name, np.square, _ident, np.sqrt, _ident)
    raise UnsupportedDistribution(f"no envelope for {distribution!r}; supported: {SUPPORTED}")
