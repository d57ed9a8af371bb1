"""Population models: an additive set of blocks over independent coordinates.

Every regression function handled here is a sum of blocks acting on disjoint
coordinate sets, so conditional expectations over a box factor into small
tensor-product quadratures over the coordinates of a single block.
"""

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..dataspace import Block, NodeRegion, SyntheticModelSpec, _offset, model_blocks
from ..distributions import Marginal, get_marginal


class NumericalError(RuntimeError):
    """Quadrature or optimisation failed to meet its tolerance."""


def node_bounds(node, d: int):
    """(lower, upper) arrays for a NodeRegion, a (lower, upper) pair, or None (unit cube)."""
    if node is None:
        return np.zeros(d), np.ones(d)
    if isinstance(node, NodeRegion):
        return np.asarray(node.lower, float), np.asarray(node.upper, float)
    lo, hi = node
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    if lo.shape != (d,) or hi.shape != (d,) or np.any(lo >= hi) or np.any(lo < 0) or np.any(hi > 1):
        raise ValueError("node must satisfy 0 <= lower < upper <= 1 in every coordinate")
    return lo, hi


@dataclass
class PopulationModel:
    blocks: list
    marginals: tuple
    noise: float = 0.0
    classification: bool = False
    offset: float = 0.0
    eta: float = 1.0
    spec: Optional[SyntheticModelSpec] = None
    panels: int = 4
    order: int = 16
    _owner: dict = field(default_factory=dict, repr=False)
    _rules: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.marginals = tuple(m if isinstance(m, Marginal) else get_marginal(m) for m in self.marginals)
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        seen = set()
        for i, b in enumerate(self.blocks):
            for c in b.coords:
                if c in seen or not 0 <= c < self.d:
                    raise ValueError("blocks must act on disjoint, valid coordinates")
                seen.add(c)
                self._owner[c] = i

    @classmethod
    def from_spec(cls, spec: SyntheticModelSpec, **kw) -> "PopulationModel":
        return cls(model_blocks(spec), spec.marginals, spec.noise, spec.family == "logistic",
                   _offset(spec), spec=spec, **kw)

    @classmethod
    def from_function(cls, fn: Callable, d: int, grad: Optional[Callable] = None,
                      distribution="uniform", noise: float = 0.0, **kw) -> "PopulationModel":
        """Wrap an arbitrary ``fn(X) -> values`` acting on all ``d`` coordinates."""
        dist = (distribution,) * d if isinstance(distribution, str) else tuple(distribution)
        return cls([Block(tuple(range(d)), fn, grad)], dist, noise, **kw)

    @property
    def d(self) -> int:
        return len(self.marginals)

    def f(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.full(X.shape[0], self.offset)
        for b in self.blocks:
            out += b.fn(X[:, list(b.coords)])
        return out

    def block_of(self, j: int) -> Optional[Block]:
        i = self._owner.get(j)
        return None if i is None else self.blocks[i]

    # Quadrature -----------------------------------------------------------------

    def _tensor_rule(self, coords, lo, hi):
        """Nodes (q, k) and weights (q,) for E[. | X_coords in box] over ``coords``."""
        if not coords:
            return np.zeros((1, 0)), np.ones(1)
        key = (tuple(coords), tuple(float(lo[c]) for c in coords), tuple(float(hi[c]) for c in coords))
        hit = self._rules.get(key)
        if hit is not None:
            return hit
        if len(self._rules) > 4096:
            self._rules.clear()
        rules = [self.marginals[c].rule(lo[c], hi[c], self.panels, self.order) for c in coords]
        nodes = np.stack(np.meshgrid(*[r[0] for r in rules], indexing="ij"), axis=-1).reshape(-1, len(coords))
        w = rules[0][1]
        for r in rules[1:]:
            w = np.multiply.outer(w, r[1])
        self._rules[key] = (nodes, w.ravel())
        return self._rules[key]

    def block_moments(self, block: Block, lo, hi):
        """Conditional mean and second moment of ``block.fn`` over the box."""
        nodes, w = self._tensor_rule(block.coords, lo, hi)
        v = block.fn(nodes)
        return float(w @ v), float(w @ (v * v))

    def _others(self, j: Optional[int], lo, hi):
        """Sum of means and of variances of all blocks not containing ``j``."""
        mean, var = self.offset, 0.0
        for b in self.blocks:
            if j is not None and j in b.coords:
                continue
            m1, m2 = self.block_moments(b, lo, hi)
            mean += m1
            var += max(m2 - m1 * m1, 0.0)
        return mean, var

    def node_mean(self, node=None) -> float:
        lo, hi = node_bounds(node, self.d)
        return self._others(None, lo, hi)[0]

    def _block_conditional(self, j, x, lo, hi, kind="value"):
        """E[h | X_j = x, X in box] for h = block value, its square or its j-partial."""
        b = self.block_of(j)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if b is None:
            return np.zeros_like(x)
        pos = b.coords.index(j)
        rest = [c for c in b.coords if c != j]
        nodes, w = self._tensor_rule(rest, lo, hi)
        q, k = nodes.shape[0], len(b.coords)
        Z = np.empty((x.size, q, k))
        Z[:, :, pos] = x[:, None]
        for i, c in enumerate(b.coords):
            if c != j:
                Z[:, :, i] = nodes[None, :, rest.index(c)]
        Z = Z.reshape(-1, k)
        if kind == "value":
            v = b.fn(Z)
        elif kind == "square":
            v = b.fn(Z) ** 2
        elif kind == "grad":
            if b.grad is None:
                raise NotImplementedError
            v = b.grad(Z, pos)
        else:
            raise ValueError(kind)
        return v.reshape(x.size, q) @ w

    def pd(self, node, j: int, x) -> np.ndarray:
        """Partial dependence E[Y | X_j = x, X in node] (vectorised in ``x``)."""
        lo, hi = node_bounds(node, self.d)
        const, _ = self._others(j, lo, hi)
        return self._block_conditional(j, x, lo, hi) + const

    def pd_derivative(self, node, j: int, x) -> np.ndarray:
        lo, hi = node_bounds(node, self.d)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        try:
            return self._block_conditional(j, x, lo, hi, "grad")
        except NotImplementedError:
            h = 1e-5 * (hi[j] - lo[j])
            xp, xm = np.minimum(x + h, hi[j]), np.maximum(x - h, lo[j])
            return (self._block_conditional(j, xp, lo, hi) - self._block_conditional(j, xm, lo, hi)) / (xp - xm)

    def pd_second_moment(self, node, j: int, x) -> np.ndarray:
        """E[Y^2 | X_j = x, X in node], assembled from block moments plus noise."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.classification:
            return np.ones_like(x)
        lo, hi = node_bounds(node, self.d)
        mean_o, var_o = self._others(j, lo, hi)
        b1 = self._block_conditional(j, x, lo, hi)
        b2 = self._block_conditional(j, x, lo, hi, "square")
        return b2 + 2.0 * b1 * mean_o + mean_o * mean_o + var_o + self.noise ** 2

    def mass(self, node=None) -> float:
        lo, hi = node_bounds(node, self.d)
        return float(np.prod([m.mass(a, b) for m, a, b in zip(self.marginals, lo, hi)]))

    def coordinate_mass(self, node, j: int) -> float:
        lo, hi = node_bounds(node, self.d)
        return self.marginals[j].mass(lo[j], hi[j])

    def strong_set(self) -> tuple:
        return tuple(sorted(self._owner))

    def to_dict(self) -> dict:
        if self.spec is not None:
            return self.spec.to_dict()
        return {"custom": True, "d": self.d, "distribution": [m.name for m in self.marginals], "noise": self.noise}


def interval_grid(resolution: int = 32, min_width: Optional[float] = None):
    """All (a, b) with a, b multiples of 1/resolution and b - a >= min_width."""
    min_width = 1.0 / resolution if min_width is None else min_width
    pts = np.arange(resolution + 1) / resolution
    return [(a, b) for a, b in itertools.combinations(pts, 2) if b - a >= min_width - 1e-15]


def node_grid(d: int, coords: Sequence[int], resolution: int = 32, base=None):
    """Boxes varying the intervals of ``coords`` over ``interval_grid``; other coordinates from ``base``."""
    lo0, hi0 = node_bounds(base, d)
    ivs = interval_grid(resolution)
    out = []
    for combo in itertools.product(ivs, repeat=len(coords)):
        lo, hi = lo0.copy(), hi0.copy()
        for c, (a, b) in zip(coords, combo):
            lo[c], hi[c] = a, b
        out.append((lo, hi))
    return out
