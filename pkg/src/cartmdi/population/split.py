"""Population split criterion for one feature inside one node, and its optimiser.

With ``G(x) = F(x) - E[Y | t]`` the centered partial dependence and
``Xi(s) = int_a^s G(x) p(x | t) dx``, the decrease in impurity is
``Xi(s)^2 / (P_L P_R)``.  ``Xi`` is tabulated on a dense grid of panels
(Gauss-Legendre inside each panel, cumulative sums across panels) in the
variable in which the conditional marginal is smooth.
"""

from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from ..numerics import gauss_legendre, golden_section_max
from .model import NumericalError, PopulationModel, node_bounds

MIN_MASS = 1e-6
TIE_RTOL = 1e-9
FLAT_RTOL = 1e-12


class SplitProblem:
    """Tabulated quantities for ``(model, node, feature)``."""

    def __init__(self, model: PopulationModel, node, feature: int, intervals: int = 512, order: int = 8):
        self.model = model
        self.j = int(feature)
        self.lo, self.hi = node_bounds(node, model.d)
        self.a, self.b = float(self.lo[self.j]), float(self.hi[self.j])
        self.marg = model.marginals[self.j]
        self.order = order
        self._gx, self._gw = gauss_legendre(order)

        edges = np.linspace(0.0, 1.0, intervals + 1)
        tau = (edges[:-1, None] + np.diff(edges)[:, None] * self._gx[None, :]).ravel()
        w = (np.diff(edges)[:, None] * self._gw[None, :]).ravel() * self.marg.param_weight(tau, self.a, self.b)
        x = self.marg.from_param(tau, self.a, self.b)
        self.const = model._others(self.j, self.lo, self.hi)[0]
        F = self.pd(x)
        self.mean = float(w @ F)
        G = F - self.mean
        self.tau_edges = edges
        self.s_edges = self.marg.from_param(edges, self.a, self.b)
        self.xi_edges = np.concatenate(([0.0], np.cumsum((w * G).reshape(intervals, order).sum(axis=1))))
        self.pl_edges = self.p_left(self.s_edges)
        self._F_nodes, self._w_nodes, self._x_nodes = F, w, x

    # Pointwise quantities -----------------------------------------------------------

    def pd(self, s):
        return self.model._block_conditional(self.j, s, self.lo, self.hi) + self.const

    def g(self, s):
        return self.pd(s) - self.mean

    def pd_derivative(self, s):
        return self.model.pd_derivative((self.lo, self.hi), self.j, s)

    def density(self, s):
        return self.marg.conditional_pdf(s, self.a, self.b)

    def p_left(self, s):
        return np.clip(self.marg.conditional_cdf(s, self.a, self.b), 0.0, 1.0)

    def xi(self, s):
        """Xi(s): tabulated prefix plus a Gauss-Legendre integral over the last partial panel."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        tau = np.clip(self.marg.to_param(s, self.a, self.b), 0.0, 1.0)
        k = np.clip(np.searchsorted(self.tau_edges, tau, side="right") - 1, 0, self.tau_edges.size - 2)
        t0 = self.tau_edges[k]
        width = tau - t0
        nodes = t0[:, None] + width[:, None] * self._gx[None, :]
        x = self.marg.from_param(nodes.ravel(), self.a, self.b)
        vals = (self.g(x) * self.marg.param_weight(nodes.ravel(), self.a, self.b)).reshape(nodes.shape)
        return self.xi_edges[k] + width * (vals @ self._gw)

    def delta(self, s, alpha: float = 0.0):
        """Penalised criterion (4 P_L P_R)^alpha * Xi^2 / (P_L P_R); zero where a daughter is too light."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        pl = self.p_left(s)
        pr = 1.0 - pl
        ok = (pl >= MIN_MASS) & (pr >= MIN_MASS)
        out = np.zeros_like(s)
        if np.any(ok):
            x = self.xi(s[ok])
            q = pl[ok] * pr[ok]
            out[ok] = (4.0 * q) ** alpha * (x * x / q)
        return out

    def delta_infinite(self, s):
        """Var(Y|t) - P_L Var(Y|t_L) - P_R Var(Y|t_R) from conditional first and second moments."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        x, w = self._x_nodes, self._w_nodes
        H = self.model.pd_second_moment((self.lo, self.hi), self.j, x)
        F = self._F_nodes
        EY, EY2 = float(w @ F), float(w @ H)
        out = np.zeros_like(s)
        for i, si in enumerate(s):
            pl = float(self.p_left(si))
            pr = 1.0 - pl
            if pl < MIN_MASS or pr < MIN_MASS:
                continue
            c1l = float(self.xi(si)[0]) + pl * self.mean  # int_a^s F p
            c2l = self._partial(H, si)
            c1r, c2r = EY - c1l, EY2 - c2l
            var = EY2 - EY * EY
            var_l = c2l / pl - (c1l / pl) ** 2
            var_r = c2r / pr - (c1r / pr) ** 2
            out[i] = var - pl * var_l - pr * var_r
        return out

    def _partial(self, H, s):
        """int_a^s H(x) p(x|t) dx using the same panel layout as ``xi``."""
        tau = float(np.clip(self.marg.to_param(s, self.a, self.b), 0.0, 1.0))
        k = int(np.clip(np.searchsorted(self.tau_edges, tau, side="right") - 1, 0, self.tau_edges.size - 2))
        full = float(self._w_nodes[: k * self.order] @ H[: k * self.order])
        t0 = self.tau_edges[k]
        nodes = t0 + (tau - t0) * self._gx
        x = self.marg.from_param(nodes, self.a, self.b)
        Hp = self.model.pd_second_moment((self.lo, self.hi), self.j, x)
        return full + (tau - t0) * float((Hp * self.marg.param_weight(nodes, self.a, self.b)) @ self._gw)

    def phi(self, s, alpha: float = 0.0):
        """Numerator of the first derivative: 2 P_L P_R G - (1 - alpha)(1 - 2 P_L) Xi."""
        pl = self.p_left(s)
        return 2.0 * pl * (1.0 - pl) * self.g(s) - (1.0 - alpha) * (1.0 - 2.0 * pl) * self.xi(s)


@dataclass
class PopulationSplitAnalysis:
    feature: int
    lower: list
    upper: list
    alpha: float
    degenerate: bool
    s_star: float = float("nan")
    delta: float = 0.0
    delta_alpha: float = 0.0
    pd: float = float("nan")
    g: float = float("nan")
    xi: float = float("nan")
    density: float = float("nan")
    p_left: float = float("nan")
    lam: float = float("nan")
    pd_derivative: float = float("nan")
    near_ties: list = field(default_factory=list)
    curve_s: list = field(default_factory=list, repr=False)
    curve_delta: list = field(default_factory=list, repr=False)
    problem: Optional[SplitProblem] = field(default=None, repr=False, compare=False)

    @property
    def a(self) -> float:
        return self.lower[self.feature]

    @property
    def b(self) -> float:
        return self.upper[self.feature]

    def to_dict(self, curve: bool = True) -> dict:
        doc = asdict(self)
        doc.pop("problem")
        if not curve:
            doc.pop("curve_s")
            doc.pop("curve_delta")
        return doc


def _refine(prob: SplitProblem, lo: float, hi: float, alpha: float) -> float:
    """Golden section on the bracket, then a root polish of the first-order condition."""
    s, _ = golden_section_max(lambda v: float(prob.delta(v, alpha)[0]), lo, hi, xtol=1e-8 * (prob.b - prob.a))
    # sign of d(Delta_alpha)/ds equals sign(Xi * phi_alpha)
    dsign = lambda v: float(prob.xi(v)[0] * prob.phi(v, alpha)[0])  # noqa: E731
    h = 1e-6 * (prob.b - prob.a)
    left, right = max(lo, s - h), min(hi, s + h)
    try:
        fl, fr = dsign(left), dsign(right)
        if fl > 0 > fr:
            root = brentq(dsign, left, right, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
            # the polished root may lose a few ulps of the (flat) maximum value
            if prob.delta(root, alpha)[0] >= prob.delta(s, alpha)[0] * (1.0 - 1e-12):
                return float(root)
    except (ValueError, RuntimeError):
        pass
    return float(s)


def penalized_optimal_split(model: PopulationModel, node, feature: int, alpha: float = 0.0,
                            grid: int = 512, keep_curve: bool = False,
                            problem: Optional[SplitProblem] = None) -> PopulationSplitAnalysis:
    """Maximise (4 P_L P_R)^alpha Delta(s) over the feature's interval in ``node``.

    A dense grid locates candidate maxima; every local maximum within a factor
    of the best is refined.  Among refined maxima whose values agree to a
    relative 1e-9 the smallest ``s`` wins.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    prob = problem or SplitProblem(model, node, feature, intervals=max(grid, 64))
    tau = (np.arange(grid + 1)) / grid
    s_grid = prob.marg.from_param(tau, prob.a, prob.b)
    d_grid = prob.delta(s_grid, alpha)
    lower, upper = prob.lo.tolist(), prob.hi.tolist()
    best = float(d_grid.max())
    scale = float(np.max(np.abs(prob._F_nodes))) ** 2 + 1e-300
    out = PopulationSplitAnalysis(prob.j, lower, upper, float(alpha), degenerate=True)
    out.problem = prob
    if keep_curve:
        out.curve_s, out.curve_delta = s_grid.tolist(), d_grid.tolist()
    if best <= FLAT_RTOL * scale:
        out.delta = out.delta_alpha = best
        return out

    interior = np.arange(1, grid)
    is_peak = (d_grid[interior] >= d_grid[interior - 1]) & (d_grid[interior] >= d_grid[interior + 1])
    peaks = interior[is_peak & (d_grid[interior] >= 0.5 * best)]
    if peaks.size == 0:
        peaks = np.array([int(np.argmax(d_grid))])
    cands = []
    for k in peaks:
        lo_k, hi_k = s_grid[max(k - 1, 0)], s_grid[min(k + 1, grid)]
        s = _refine(prob, lo_k, hi_k, alpha)
        cands.append((s, float(prob.delta(s, alpha)[0])))
    top = max(v for _, v in cands)
    ties = sorted(s for s, v in cands if v >= top - TIE_RTOL * top)
    s_star = ties[0]

    pl = float(prob.p_left(s_star))
    d0 = float(prob.delta(s_star)[0])
    out.degenerate = False
    out.s_star = s_star
    out.delta = d0
    out.delta_alpha = float(prob.delta(s_star, alpha)[0])
    out.pd = float(prob.pd(s_star)[0])
    out.g = out.pd - prob.mean
    out.xi = float(prob.xi(s_star)[0])
    out.density = float(prob.density(s_star))
    out.p_left = pl
    out.lam = 4.0 * pl * (1.0 - pl)
    out.pd_derivative = float(prob.pd_derivative(s_star)[0])
    out.near_ties = ties
    return out


def optimal_split(model: PopulationModel, node, feature: int, grid: int = 512,
                  keep_curve: bool = False) -> PopulationSplitAnalysis:
    return penalized_optimal_split(model, node, feature, 0.0, grid, keep_curve)


def pd_function(model: PopulationModel, node, feature: int, x):
    lo, hi = node_bounds(node, model.d)
    x = np.asarray(x, dtype=float)
    if np.any(x < lo[feature]) or np.any(x > hi[feature]):
        raise ValueError(f"x_j must lie in [{lo[feature]}, {hi[feature]}]")
    return model.pd((lo, hi), feature, x)


def delta_curve(model: PopulationModel, node, feature: int, grid, tol: float = 1e-8):
    """Criterion at ``grid`` points in both forms; raises if they disagree by more than ``tol``."""
    prob = SplitProblem(model, node, feature)
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= prob.a) or np.any(grid >= prob.b):
        raise ValueError("grid points must lie strictly inside the node")
    simple = prob.delta(grid)
    infinite = prob.delta_infinite(grid)
    gap = float(np.max(np.abs(simple - infinite))) if grid.size else 0.0
    if gap > tol:
        worst = float(grid[int(np.argmax(np.abs(simple - infinite)))])
        raise NumericalError(f"criterion forms disagree by {gap:.3e} at s={worst:.6g} (feature {feature})")
    return simple, infinite
