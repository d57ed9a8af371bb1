"""MDI importances, selection counts, end-cut statistic and tree-walk partial dependence."""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.stats import spearmanr

from .cart import SplitEvaluation, Tree, TreeNode
from .dataspace import Dataset, NodeRegion


def mdi_tree(tree: Tree) -> np.ndarray:
    out = np.zeros(tree.d)
    for nd in tree.internal():
        out[nd.split.feature] += nd.weight * nd.split.decrease
    return out


def mdi_global(trees: Sequence[Tree]) -> np.ndarray:
    """Node-weighted impurity decreases summed per feature, averaged over trees."""
    trees = [trees] if isinstance(trees, Tree) else list(trees)
    if not trees:
        raise ValueError("at least one tree is required")
    return np.mean([mdi_tree(t) for t in trees], axis=0)


def impurity_drop(tree: Tree) -> float:
    """Root impurity minus the weighted impurity of the leaves."""
    return tree.root.impurity - sum(nd.weight * nd.impurity for nd in tree.leaves())


def selection_counts(tree: Tree, leaf_id: int) -> np.ndarray:
    """Number of ancestors of ``leaf_id`` splitting on each feature."""
    k = np.zeros(tree.d, dtype=int)
    for nd in tree.ancestors(leaf_id):
        k[nd.split.feature] += 1
    return k


def nearest_response_gap(node: TreeNode, data: Dataset, feature: int, threshold: float,
                         k: Optional[int] = None) -> float:
    """Plug-in estimate of the centered partial dependence at the split point.

    Averages the ``k`` responses whose feature value is closest to the
    threshold (default ``ceil(sqrt(N))``) and subtracts the node mean.
    """
    rows = node.region.rows
    if rows.size == 0:
        raise ValueError("node carries no training rows; plug-in weights need the tree's data")
    y = data.response[rows]
    k = k or math.ceil(math.sqrt(rows.size))
    dist = np.abs(data.features[rows, feature] - threshold)
    near = np.argsort(dist, kind="stable")[:k]
    return float(y[near].mean() - y.mean())


def w1_plugin_weight(node: TreeNode, data: Dataset) -> float:
    s = node.split
    g = nearest_response_gap(node, data, s.feature, s.threshold)
    denom = g * g + s.decrease
    return 1.0 / denom if denom > 0 else 0.0


WeightScheme = Union[str, Callable]


def mdi_conditional(tree: Tree, leaf_id: int, weights: WeightScheme = "unit",
                    data: Optional[Dataset] = None) -> np.ndarray:
    """Weighted decreases of the leaf's ancestors, summed per split feature.

    ``weights`` is ``"unit"``, ``"w1-plugin"`` (an estimate built from
    nearest responses around each threshold), or a callable
    ``(node, data) -> weight``.
    """
    if not 0 <= leaf_id < len(tree.nodes) or not tree.nodes[leaf_id].is_leaf:
        raise KeyError(f"unknown leaf id {leaf_id}")
    if weights == "unit":
        wfun = lambda nd, data: 1.0  # noqa: E731
    elif weights == "w1-plugin":
        wfun = w1_plugin_weight
    elif callable(weights):
        wfun = weights
    else:
        raise ValueError(f"unknown weight scheme {weights!r}")
    data = data if data is not None else tree.data
    out = np.zeros(tree.d)
    for nd in tree.ancestors(leaf_id):
        out[nd.split.feature] += wfun(nd, data) * nd.split.decrease
    return out


def edge_cut_preference(split: Union[SplitEvaluation, float], node_count: Optional[int] = None) -> float:
    """(N/(N-1)) |P_L - P_R| / 2; zero for a balanced split.

    Accepts a split record, or a left fraction together with ``node_count``.
    """
    if isinstance(split, SplitEvaluation):
        n = split.count if node_count is None else node_count
        pl = split.left_count / n
    else:
        n, pl = node_count, float(split)
    if n is None or n < 2:
        raise ValueError("edge-cut preference needs N >= 2")
    return n / (n - 1) * abs(2.0 * pl - 1.0) / 2.0


def median_subnode_lengths(tree: Tree) -> np.ndarray:
    lengths = np.array([nd.region.upper - nd.region.lower for nd in tree.leaves()])
    return np.median(lengths, axis=0)


# Partial dependence ---------------------------------------------------------------


@dataclass
class PartialDependence:
    """Tree partial dependence in one feature, tabulated per threshold cell.

    ``cuts`` are the sorted distinct thresholds the tree uses on the feature;
    cell ``c`` covers ``(cuts[c-1], cuts[c]]`` and ``values[c]`` is the
    average prediction over the node's rows with the feature set to any
    value in that cell.
    """

    feature: int
    cuts: np.ndarray
    values: np.ndarray
    count: int

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.values[np.searchsorted(self.cuts, x, side="left")]


def tabulate_partial_dependence(tree: Tree, feature: int, data: Optional[Dataset] = None,
                                node: Optional[NodeRegion] = None) -> PartialDependence:
    """One traversal of the tree that carries the node's rows along.

    Splits on ``feature`` send every row both ways but restrict the range of
    cells; other splits partition the rows by their own values.
    """
    data = data if data is not None else tree.data
    if data is None:
        raise ValueError("partial dependence needs the rows to average over")
    rows = node.members(data) if node is not None else np.arange(data.n)
    if rows.size == 0:
        raise ValueError("node contains no rows")
    cuts = np.unique([nd.split.threshold for nd in tree.internal() if nd.split.feature == feature])
    sums = np.zeros(cuts.size + 1)
    X = data.features
    stack = [(0, rows, 0, cuts.size + 1)]
    while stack:
        nid, r, lo, hi = stack.pop()
        nd = tree.nodes[nid]
        if nd.is_leaf:
            sums[lo:hi] += nd.value * r.size
            continue
        s = nd.split
        if s.feature == feature:
            k = int(np.searchsorted(cuts, s.threshold)) + 1
            if lo < min(hi, k):
                stack.append((nd.left, r, lo, min(hi, k)))
            if max(lo, k) < hi:
                stack.append((nd.right, r, max(lo, k), hi))
        else:
            go = X[r, s.feature] <= s.threshold
            if go.any():
                stack.append((nd.left, r[go], lo, hi))
            if not go.all():
                stack.append((nd.right, r[~go], lo, hi))
    return PartialDependence(int(feature), cuts, sums / rows.size, int(rows.size))


def partial_dependence_treewalk(tree: Tree, feature: int, x_j, data: Optional[Dataset] = None,
                                node: Optional[NodeRegion] = None):
    x_j = np.asarray(x_j, dtype=float)
    if np.any((x_j < 0) | (x_j > 1)):
        raise ValueError("evaluation points must lie in [0, 1]")
    return tabulate_partial_dependence(tree, feature, data, node)(x_j)


# Reports ----------------------------------------------------------------------------


@dataclass
class ImportanceReport:
    columns: tuple
    mdi: np.ndarray
    sublen: np.ndarray
    leaves: list = field(default_factory=list)
    weights: str = "unit"

    def to_dict(self) -> dict:
        return {
            "columns": list(self.columns),
            "mdi": self.mdi.tolist(),
            "median_subnode_length": self.sublen.tolist(),
            "weights": self.weights,
            "weights_are_estimates": self.weights == "w1-plugin",
            "leaves": self.leaves,
        }

    def tidy_rows(self):
        for name, m, s in zip(self.columns, self.mdi, self.sublen):
            yield (name, "mdi", float(m))
            yield (name, "median_subnode_length", float(s))
        for leaf in self.leaves:
            for name, v, k in zip(self.columns, leaf["mdi"], leaf["counts"]):
                yield (name, f"leaf{leaf['id']}_mdi", float(v))
                yield (name, f"leaf{leaf['id']}_count", float(k))


def importance_report(tree: Tree, weights: WeightScheme = "unit", columns=None) -> ImportanceReport:
    columns = tuple(columns) if columns else (tree.data.columns if tree.data is not None else
                                              tuple(f"x{j + 1}" for j in range(tree.d)))
    leaves = []
    for nd in tree.leaves():
        leaves.append({
            "id": nd.id,
            "depth": nd.depth,
            "mdi": mdi_conditional(tree, nd.id, weights).tolist(),
            "counts": selection_counts(tree, nd.id).tolist(),
        })
    return ImportanceReport(columns, mdi_global([tree]), median_subnode_lengths(tree), leaves,
                            weights if isinstance(weights, str) else "custom")


def scale_to_100(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    top = v.max()
    return 100.0 * v / top if top > 0 else np.zeros_like(v)


def figure1_table(mdi, sublen, columns) -> list:
    """Rows ``(feature, mdi, sublen)`` scaled to a maximum of 100, by increasing MDI."""
    m, s = scale_to_100(mdi), scale_to_100(sublen)
    order = np.argsort(m, kind="stable")
    return [(columns[j], float(m[j]), float(s[j])) for j in order]


def spearman(a, b) -> float:
    return float(spearmanr(a, b).statistic)
