"""Grid scans of node balancedness (a lower estimate of its infimum)."""

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .model import PopulationModel, node_grid
from .split import penalized_optimal_split


@dataclass
class ScanResult:
    feature: int
    lam_min: float
    argmin: Optional[tuple]
    n_nodes: int
    excluded: int
    lams: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        lo, hi = self.argmin if self.argmin is not None else (None, None)
        return {
            "feature": self.feature, "lambda_min": self.lam_min, "nodes": self.n_nodes, "excluded": self.excluded,
            "argmin_lower": None if lo is None else list(map(float, lo)),
            "argmin_upper": None if hi is None else list(map(float, hi)),
        }


def default_nodes(model: PopulationModel, feature: int, resolution: int = 32, partner_resolution: int = 8):
    """Vary the feature's interval; when the feature shares a block with other
    coordinates, vary theirs too (at a coarser resolution)."""
    block = model.block_of(feature)
    partners = [c for c in (block.coords if block else ()) if c != feature]
    if not partners:
        return node_grid(model.d, [feature], resolution)
    return node_grid(model.d, [feature] + partners, partner_resolution)


def global_balancedness_scan(model: PopulationModel, feature: int, nodes: Optional[Sequence] = None,
                             alpha: float = 0.0, resolution: int = 32,
                             callback: Optional[Callable] = None, grid: int = 512) -> ScanResult:
    """min over ``nodes`` of lambda at the optimal split; degenerate nodes are excluded."""
    nodes = default_nodes(model, feature, resolution) if nodes is None else list(nodes)
    lams, best, arg, excluded = [], np.inf, None, 0
    for node in nodes:
        an = penalized_optimal_split(model, node, feature, alpha, grid)
        if an.degenerate:
            excluded += 1
            continue
        if callback is not None:
            callback(an)
        lams.append(an.lam)
        if an.lam < best:
            best, arg = an.lam, (np.array(an.lower), np.array(an.upper))
    if excluded:
        warnings.warn(f"{excluded} degenerate node(s) excluded from the scan of feature {feature}", RuntimeWarning)
    return ScanResult(feature, float(best) if lams else float("nan"), arg, len(nodes), excluded, lams)
