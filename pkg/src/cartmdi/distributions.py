"""Marginal input distributions on [0, 1] with closed-form CDF and quantile.

Every marginal also provides a quadrature rule for expectations restricted to
a subinterval ``[a, b]``.  The rule is built in whichever variable keeps the
integrand smooth: ``x`` itself when the density is smooth, the square-root
variable for Beta(1/2, 1) whose density blows up at zero.
"""

from dataclasses import dataclass

import numpy as np

from .numerics import composite_rule


class UnsupportedDistribution(ValueError):
    pass


@dataclass(frozen=True)
class Marginal:
    name: str

    def cdf(self, x):
        x = np.clip(x, 0.0, 1.0)
        if self.name == "uniform":
            return x
        if self.name == "beta(2,1)":
            return x * x
        return np.sqrt(x)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.name == "uniform":
            return np.ones_like(x)
        if self.name == "beta(2,1)":
            return 2.0 * x
        with np.errstate(divide="ignore"):
            return 0.5 / np.sqrt(x)

    def ppf(self, u):
        u = np.clip(u, 0.0, 1.0)
        if self.name == "uniform":
            return u
        if self.name == "beta(2,1)":
            return np.sqrt(u)
        return u * u

    def sample(self, rng: np.random.Generator, size):
        return self.ppf(rng.random(size))

    def mass(self, a: float, b: float) -> float:
        return float(self.cdf(b) - self.cdf(a))

    # Node-conditional quantities -------------------------------------------------

    def conditional_cdf(self, s, a: float, b: float):
        """P[X <= s | a <= X <= b]."""
        return (self.cdf(s) - self.cdf(a)) / (self.cdf(b) - self.cdf(a))

    def conditional_pdf(self, s, a: float, b: float):
        return self.pdf(s) / (self.cdf(b) - self.cdf(a))

    def conditional_ppf(self, p, a: float, b: float):
        lo, hi = self.cdf(a), self.cdf(b)
        return self.ppf(lo + np.asarray(p) * (hi - lo))

    def to_param(self, x, a: float, b: float):
        """Map ``x`` in [a, b] to the integration variable on [0, 1]."""
        x = np.asarray(x, dtype=float)
        if self.name == "beta(1/2,1)":
            ra, rb = np.sqrt(a), np.sqrt(b)
            return (np.sqrt(np.clip(x, 0.0, None)) - ra) / (rb - ra)
        return (x - a) / (b - a)

    def from_param(self, tau, a: float, b: float):
        tau = np.asarray(tau, dtype=float)
        if self.name == "beta(1/2,1)":
            ra, rb = np.sqrt(a), np.sqrt(b)
            r = ra + tau * (rb - ra)
            return r * r
        return a + tau * (b - a)

    def param_weight(self, tau, a: float, b: float):
        """Conditional density in the integration variable: dP/dtau on [0, 1]."""
        tau = np.asarray(tau, dtype=float)
        if self.name == "uniform":
            return np.ones_like(tau)
        if self.name == "beta(2,1)":
            x = a + tau * (b - a)
            return 2.0 * x * (b - a) / (b * b - a * a)
        return np.ones_like(tau)

    def rule(self, a: float, b: float, panels: int = 4, order: int = 16):
        """Nodes/weights with ``sum(w * h(x)) ~= E[h(X) | a <= X <= b]``."""
        tau, w = composite_rule(0.0, 1.0, panels, order)
        return self.from_param(tau, a, b), w * self.param_weight(tau, a, b)


SUPPORTED = ("uniform", "beta(2,1)", "beta(1/2,1)")

_ALIASES = {
    "uniform": "uniform",
    "beta(1,1)": "uniform",
    "beta(2,1)": "beta(2,1)",
    "beta(2, 1)": "beta(2,1)",
    "beta(1/2,1)": "beta(1/2,1)",
    "beta(0.5,1)": "beta(1/2,1)",
    "beta(1/2, 1)": "beta(1/2,1)",
}


def get_marginal(name: str) -> Marginal:
    key = _ALIASES.get(str(name).strip().lower())
    if key is None:
        raise UnsupportedDistribution(f"unsupported distribution {name!r}; expected one of {SUPPORTED}")
    return Marginal(key)
