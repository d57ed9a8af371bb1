"""Identities and lower bounds satisfied at population-optimal splits."""

import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np
from scipy import integrate, optimize

from ..distributions import UnsupportedDistribution
from ..numerics import composite_rule, richardson_derivative
from .model import PopulationModel
from .split import PopulationSplitAnalysis, SplitProblem


class DegenerateSplit(ValueError):
    """The criterion is identically zero in this direction."""


def _require(analysis: PopulationSplitAnalysis):
    if analysis.degenerate or not analysis.delta > 0:
        raise DegenerateSplit(f"no signal along feature {analysis.feature}")
    return analysis.problem


@dataclass
class FixedPointReport:
    residual_p: float
    residual_lambda: float
    sign: int
    tol: float = 1e-6

    @property
    def passed(self) -> bool:
        return self.residual_p <= self.tol and self.residual_lambda <= self.tol


def verify_fixed_point(analysis: PopulationSplitAnalysis, tol: float = 1e-6) -> FixedPointReport:
    """Residuals of P_L = (1 +- sqrt(G^2 / (G^2 + Delta))) / 2 and lambda = Delta / (G^2 + Delta)."""
    _require(analysis)
    g2, d = analysis.g ** 2, analysis.delta
    root = math.sqrt(g2 / (g2 + d))
    res = {sg: abs(analysis.p_left - 0.5 * (1.0 + sg * root)) for sg in (1, -1)}
    sign = min(res, key=res.get)
    return FixedPointReport(res[sign], abs(analysis.lam - d / (g2 + d)), sign, tol)


def oscillation(prob: SplitProblem) -> float:
    """max F - min F over [a, b]: dense grid plus bounded polishing of both extremes."""
    x = np.concatenate(([prob.a], prob._x_nodes, [prob.b]))
    F = np.concatenate((prob.pd([prob.a, prob.b])[:1], prob._F_nodes, prob.pd([prob.b])))
    ext = []
    for sgn in (1.0, -1.0):
        k = int(np.argmax(sgn * F))
        lo, hi = x[max(k - 1, 0)], x[min(k + 1, x.size - 1)]
        best = sgn * F[k]
        if hi > lo:
            r = optimize.minimize_scalar(lambda v: -sgn * prob.pd(v)[0], bounds=(lo, hi), method="bounded",
                                         options={"xatol": 1e-12 * (prob.b - prob.a)})
            best = max(best, -r.fun)
        ext.append(sgn * best)
    return float(ext[0] - ext[1])


def total_variation(prob: SplitProblem, panels: int = 512, order: int = 8) -> float:
    x, w = composite_rule(prob.a, prob.b, panels, order)
    return float(w @ np.abs(prob.pd_derivative(x)))


@dataclass
class BalanceBounds:
    lam: float
    oscillation_bound: float
    second_order_bound: float
    omega: float
    total_variation: float
    g2_plus_delta: float
    tol: float = 1e-9
    flags: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.flags

    def to_dict(self) -> dict:
        return asdict(self) | {"passed": self.passed}


def balancedness_bounds(analysis: PopulationSplitAnalysis, model: Optional[PopulationModel] = None,
                        tol: float = 1e-9) -> BalanceBounds:
    """lambda against Delta / omega^2 and (4 p^2 Delta / F'^2)^(1/3), plus G^2 + Delta <= omega^2 <= TV^2."""
    prob = _require(analysis)
    omega = oscillation(prob)
    tv = total_variation(prob)
    d, fp, p = analysis.delta, analysis.pd_derivative, analysis.density
    osc = d / omega ** 2
    gd = analysis.g ** 2 + d
    flags = []
    if abs(fp) < 1e-12 * max(1.0, abs(analysis.pd)):
        flags.append("vanishing derivative at a split with positive decrease")
        second = float("nan")
    else:
        second = (4.0 * p * p * d / fp ** 2) ** (1.0 / 3.0)
        if analysis.lam < second - tol:
            flags.append("second-order bound violated")
    if analysis.lam < osc - tol:
        flags.append("oscillation bound violated")
    scale = max(1.0, omega ** 2)
    if gd > omega ** 2 * (1 + 1e-9) + tol * scale:
        flags.append("G^2 + Delta exceeds squared oscillation")
    if omega > tv * (1 + 1e-7) + tol:
        flags.append("oscillation exceeds total variation")
    return BalanceBounds(analysis.lam, osc, second, omega, tv, gd, tol, flags)


def w1_weight(analysis: PopulationSplitAnalysis) -> float:
    """1 / (G^2 + Delta) at the optimal split."""
    _require(analysis)
    return 1.0 / (analysis.g ** 2 + analysis.delta)


def w2_lower(analysis: PopulationSplitAnalysis) -> float:
    """(2 p / (|F'| Delta))^(2/3); infinite when F' vanishes."""
    _require(analysis)
    fp = abs(analysis.pd_derivative)
    if fp == 0:
        return float("inf")
    return (2.0 * analysis.density / (fp * analysis.delta)) ** (2.0 / 3.0)


def penalized_bounds(analysis: PopulationSplitAnalysis):
    """Lower bounds on lambda_alpha: the first-order one, and for alpha < 1 the second-order one."""
    _require(analysis)
    al, da, g2 = analysis.alpha, analysis.delta_alpha, analysis.g ** 2
    c = (1.0 - al) ** 2 * da
    first = (2.0 ** -al * c / (g2 + c)) ** (1.0 / (al + 1.0)) if g2 + c > 0 else 0.0
    second = None
    if al < 1 and analysis.pd_derivative != 0:
        second = (4.0 ** (1 - al) * c * analysis.density ** 2 / analysis.pd_derivative ** 2) ** (1.0 / (3.0 + al))
    return first, second


@dataclass
class SecondDerivativeReport:
    first_derivative: float
    second_fd: float
    second_formula: float
    relative_error: float
    xi_prime_fd: Optional[float] = None
    xi_prime_formula: Optional[float] = None
    skipped: Optional[str] = None

    def passed(self, rtol: float = 1e-4, fd_tol: float = 1e-4, xi_tol: float = 1e-6) -> bool:
        if self.skipped:
            return True
        ok = self.relative_error <= rtol and abs(self.first_derivative) <= fd_tol
        if self.xi_prime_fd is not None:
            ok &= abs(self.xi_prime_fd - self.xi_prime_formula) <= xi_tol
        return bool(ok)


def second_derivative_check(analysis: PopulationSplitAnalysis, model: Optional[PopulationModel] = None,
                            xi_at: Optional[float] = None) -> SecondDerivativeReport:
    """Finite differences of the criterion at s* against the closed-form second derivative.

    Optionally compares the derivative of Xi at ``xi_at`` with p(s|t) G(s).
    """
    prob = _require(analysis)
    model = model or prob.model
    if any(b.grad is None for b in model.blocks):
        return SecondDerivativeReport(*(float("nan"),) * 4, skipped="no analytic partial derivatives")
    s, h = analysis.s_star, 1e-4 * (prob.b - prob.a)
    if not prob.a + 2 * h < s < prob.b - 2 * h:
        return SecondDerivativeReport(*(float("nan"),) * 4, skipped="optimum too close to the edge")
    delta = lambda v: float(prob.delta(v)[0])  # noqa: E731
    d1 = richardson_derivative(delta, s, h, order=1, levels=2)
    d2 = richardson_derivative(delta, s, h, order=2, levels=2)
    p, pl = analysis.density, analysis.p_left
    rhs = 2.0 * p * p / (pl * (1 - pl)) * (analysis.g ** 2 + analysis.delta + analysis.pd_derivative * analysis.xi / p)
    rel = abs(d2 - rhs) / max(abs(rhs), 1e-300)
    rep = SecondDerivativeReport(d1, d2, rhs, rel)
    if xi_at is not None:
        hx = 1e-4 * (prob.b - prob.a)
        rep.xi_prime_fd = richardson_derivative(lambda v: float(prob.xi(v)[0]), xi_at, hx, order=1, levels=2)
        rep.xi_prime_formula = float(prob.density(xi_at) * prob.g(xi_at)[0])
    return rep


def fourier_coefficients(model: PopulationModel, node, feature: int, kmax: int, panels: int = 256):
    """c_k of the partial dependence on the node's interval, k = 1..kmax (c_{-k} is the conjugate)."""
    prob = SplitProblem(model, node, feature, intervals=64)
    if prob.marg.name != "uniform":
        raise UnsupportedDistribution("Fourier bound requires a uniform marginal")
    u, w = composite_rule(0.0, 1.0, panels, 16)
    F = prob.pd(prob.a + (prob.b - prob.a) * u)
    k = np.arange(1, kmax + 1)
    return (np.exp(-2j * np.pi * np.outer(k, u)) * F[None, :]) @ w


def fourier_lower_bound(coefficients, analysis: Optional[PopulationSplitAnalysis] = None, tol: float = 1e-9):
    """pi^-2 sum_{k != 0} |c_k|^2 / k^2.

    ``coefficients`` is either a mapping ``k -> c_k`` over nonzero ``k`` or a
    sequence ``c_1, c_2, ...`` of a real function (negative indices mirrored).
    With ``analysis`` the bound is also checked against Delta(s*).
    """
    if isinstance(coefficients, dict):
        total = sum(abs(c) ** 2 / k ** 2 for k, c in coefficients.items() if k != 0)
    else:
        total = 2.0 * sum(abs(c) ** 2 / k ** 2 for k, c in enumerate(coefficients, start=1))
    bound = float(total / math.pi ** 2)
    if analysis is not None:
        if analysis.problem is not None and analysis.problem.marg.name != "uniform":
            raise UnsupportedDistribution("Fourier bound requires a uniform marginal")
        if analysis.delta < bound - tol:
            raise AssertionError(f"Delta(s*) = {analysis.delta} below Fourier bound {bound}")
    return bound


def _xi_power(s, R):
    mean = (0.5 ** (R + 1) - (-0.5) ** (R + 1)) / (R + 1)
    return ((s - 0.5) ** (R + 1) - (-0.5) ** (R + 1)) / (R + 1) - s * mean


def delta_R(R: int) -> float:
    """Integral over s in [0, 1] of the uniform-input criterion for f(x) = (x - 1/2)^R."""
    if R < 1:
        raise ValueError("R must be >= 1")
    val, _ = integrate.quad(lambda s: _xi_power(s, R) ** 2 / (s * (1.0 - s)), 0.0, 1.0,
                            epsabs=1e-14, epsrel=1e-12, limit=200)
    return float(val)
