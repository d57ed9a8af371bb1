"""CART trees: impurity, exact single-pass split search, growth and prediction."""

import heapq
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .dataspace import BINARY, CONTINUOUS, Dataset, NodeRegion
from .numerics import compensated_cumsum

# Candidates whose decrease is within this fraction of the node impurity of
# the best one are treated as tied.
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class SplitEvaluation:
    feature: int
    threshold: float
    decrease: float
    left_count: int
    right_count: int

    def __post_init__(self):
        if self.left_count < 1 or self.right_count < 1:
            raise ValueError("both daughters must be non-empty")
        if self.decrease < 0:
            raise ValueError("impurity decrease must be non-negative")

    @property
    def count(self) -> int:
        return self.left_count + self.right_count

    @property
    def left_fraction(self) -> float:
        return self.left_count / self.count


@dataclass
class ScanCounter:
    """Operation counts of the split search (used to check its complexity)."""

    sorts: int = 0
    sorted_elements: int = 0
    scanned: int = 0
    calls: int = 0


@dataclass(frozen=True)
class GrowthConfig:
    max_depth: Optional[int] = None
    min_node_size: int = 1
    min_relative_decrease: float = 0.001
    maxnodes: Optional[int] = None

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_node_size < 1:
            raise ValueError("min_node_size must be >= 1")
        if self.min_relative_decrease < 0:
            raise ValueError("min_relative_decrease must be >= 0")
        if self.maxnodes is not None and self.maxnodes < 1:
            raise ValueError("maxnodes must be >= 1")


def _responses(node, data: Dataset) -> np.ndarray:
    rows = node.rows if isinstance(node, NodeRegion) else np.asarray(node)
    return data.response[rows]


def impurity_of(y: np.ndarray, kind: str = CONTINUOUS) -> float:
    if y.size == 0:
        raise ValueError("impurity of an empty node is undefined")
    if kind == BINARY:
        p = np.count_nonzero(y > 0) / y.size
        return 4.0 * p * (1.0 - p)
    return float(np.mean((y - y.mean()) ** 2))


def node_impurity(node, data: Dataset) -> float:
    """Within-node variance (divisor N) or Gini index 4 p+ p-."""
    return impurity_of(_responses(node, data), data.kind)


def leaf_value(y: np.ndarray, kind: str = CONTINUOUS) -> float:
    if kind == BINARY:
        return 1.0 if np.count_nonzero(y > 0) * 2 >= y.size else -1.0
    return float(y.mean())


def _scan(x: np.ndarray, y: np.ndarray, min_leaf: int, counter: Optional[ScanCounter]):
    """All admissible candidates for one feature: (thresholds, decreases, left counts)."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    n = xs.size
    if counter is not None:
        counter.calls += 1
        counter.sorts += 1
        counter.sorted_elements += n
        counter.scanned += n
    centered = y[order] - y.mean()
    csum = compensated_cumsum(centered)
    n_left = np.arange(1, n)
    # the stored mean is off by up to an ulp; remove the residual offset exactly
    left_sum = csum[:-1] - n_left * (csum[-1] / n)
    ok = xs[1:] > xs[:-1]
    if min_leaf > 1:
        ok &= (n_left >= min_leaf) & (n - n_left >= min_leaf)
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        return None
    nl = n_left[idx].astype(np.float64)
    dec = left_sum[idx] ** 2 / (nl * (n - nl))
    lo, hi = xs[idx], xs[idx + 1]
    thr = 0.5 * (lo + hi)
    # midpoint of adjacent floats can round up onto the right value
    thr = np.where(thr < hi, thr, lo)
    return thr, dec, n_left[idx]


def best_split_single_pass(node, data: Dataset, feature: int, min_leaf: int = 1,
                           counter: Optional[ScanCounter] = None) -> Optional[SplitEvaluation]:
    """Maximize P_L P_R (mean_L - mean_R)^2 over midpoints of one feature.

    Returns ``None`` when the feature takes a single value in the node (or no
    candidate leaves ``min_leaf`` rows on each side).  Ties go to the smallest
    threshold.
    """
    rows = node.rows if isinstance(node, NodeRegion) else np.asarray(node)
    y = data.response[rows]
    res = _scan(data.features[rows, feature], y, min_leaf, counter)
    if res is None:
        return None
    thr, dec, nl = res
    tol = TIE_RTOL * max(impurity_of(y), np.finfo(float).tiny)
    i = int(np.flatnonzero(dec >= dec.max() - tol)[0])
    return SplitEvaluation(int(feature), float(thr[i]), float(dec[i]), int(nl[i]), int(rows.size - nl[i]))


def best_split(node, data: Dataset, features=None, min_leaf: int = 1, rng=None,
               counter: Optional[ScanCounter] = None) -> Optional[SplitEvaluation]:
    """Best split over ``features``; ties go to the smallest feature index
    unless ``rng`` is given, in which case a tied feature is drawn at random."""
    features = range(data.d) if features is None else sorted(int(j) for j in features)
    cands = [s for j in features if (s := best_split_single_pass(node, data, j, min_leaf, counter)) is not None]
    if not cands:
        return None
    dec = np.array([c.decrease for c in cands])
    tol = TIE_RTOL * max(node_impurity(node, data), np.finfo(float).tiny)
    tied = np.flatnonzero(dec >= dec.max() - tol)
    if rng is not None and tied.size > 1:
        return cands[int(rng.choice(tied))]
    return cands[int(tied[0])]


@dataclass
class TreeNode:
    id: int
    depth: int
    region: NodeRegion
    count: int
    weight: float
    impurity: float
    value: float
    split: Optional[SplitEvaluation] = None
    left: int = -1
    right: int = -1
    parent: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.split is None


@dataclass(eq=False)
class Tree:
    nodes: list
    n: int
    d: int
    kind: str = CONTINUOUS
    config: GrowthConfig = field(default_factory=GrowthConfig)
    data: Optional[Dataset] = None

    def __post_init__(self):
        self._compile()

    def _compile(self):
        m = len(self.nodes)
        self._feature = np.full(m, -1, dtype=np.intp)
        self._threshold = np.zeros(m)
        self._left = np.full(m, -1, dtype=np.intp)
        self._right = np.full(m, -1, dtype=np.intp)
        self._value = np.array([nd.value for nd in self.nodes], dtype=float)
        for nd in self.nodes:
            if nd.split is not None:
                self._feature[nd.id] = nd.split.feature
                self._threshold[nd.id] = nd.split.threshold
                self._left[nd.id] = nd.left
                self._right[nd.id] = nd.right

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    def leaves(self) -> list:
        return [nd for nd in self.nodes if nd.is_leaf]

    def internal(self) -> list:
        return [nd for nd in self.nodes if not nd.is_leaf]

    @property
    def depth(self) -> int:
        return max(nd.depth for nd in self.nodes)

    def ancestors(self, node_id: int) -> list:
        """Ancestors of a node from the root down (excluding the node)."""
        if not 0 <= node_id < len(self.nodes):
            raise KeyError(f"unknown node id {node_id}")
        out = []
        p = self.nodes[node_id].parent
        while p >= 0:
            out.append(self.nodes[p])
            p = self.nodes[p].parent
        return out[::-1]

    def apply(self, X) -> np.ndarray:
        """Leaf id reached by each row of ``X`` (``x <= s`` goes left)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        at = np.zeros(X.shape[0], dtype=np.intp)
        active = np.flatnonzero(self._feature[at] >= 0)
        while active.size:
            cur = at[active]
            go_left = X[active, self._feature[cur]] <= self._threshold[cur]
            at[active] = np.where(go_left, self._left[cur], self._right[cur])
            active = active[self._feature[at[active]] >= 0]
        return at

    def predict(self, X) -> np.ndarray:
        return self._value[self.apply(X)]

    def attach(self, data: Dataset) -> "Tree":
        """Route ``data`` through the tree and store the rows each node holds."""
        if data.d != self.d:
            raise ValueError(f"data has {data.d} features, tree expects {self.d}")
        rows = {0: np.arange(data.n)}
        for nd in self.nodes:
            r = rows.pop(nd.id)
            nd.region = NodeRegion(nd.region.lower, nd.region.upper, r)
            if nd.split is not None:
                go_left = data.features[r, nd.split.feature] <= nd.split.threshold
                rows[nd.left], rows[nd.right] = r[go_left], r[~go_left]
        self.data = data
        return self

    def weighted_leaf_impurity(self, depth: Optional[int] = None) -> float:
        """Sum of P(t) * impurity(t) over the leaves of the tree cut at ``depth``."""
        total = 0.0
        for nd in self.nodes:
            if (depth is None and nd.is_leaf) or (depth is not None and (nd.depth == depth or (nd.is_leaf and nd.depth < depth))):
                total += nd.weight * nd.impurity
        return total

    def to_dict(self) -> dict:
        nodes = []
        for nd in self.nodes:
            doc = {
                "id": nd.id, "depth": nd.depth, "parent": nd.parent,
                "count": nd.count, "weight": nd.weight, "impurity": nd.impurity, "value": nd.value,
                "lower": nd.region.lower.tolist(), "upper": nd.region.upper.tolist(),
            }
            if nd.split is not None:
                doc.update(feature=nd.split.feature, threshold=nd.split.threshold, decrease=nd.split.decrease,
                           left_count=nd.split.left_count, right_count=nd.split.right_count,
                           left=nd.left, right=nd.right)
            nodes.append(doc)
        return {"n": self.n, "d": self.d, "kind": self.kind, "config": asdict(self.config), "nodes": nodes}

    @classmethod
    def from_dict(cls, doc: dict) -> "Tree":
        nodes = []
        for nd in doc["nodes"]:
            split = None
            if "feature" in nd:
                split = SplitEvaluation(nd["feature"], nd["threshold"], nd["decrease"], nd["left_count"], nd["right_count"])
            nodes.append(TreeNode(nd["id"], nd["depth"], NodeRegion(nd["lower"], nd["upper"]), nd["count"],
                                  nd["weight"], nd["impurity"], nd["value"], split,
                                  nd.get("left", -1), nd.get("right", -1), nd["parent"]))
        return cls(nodes, doc["n"], doc["d"], doc["kind"], GrowthConfig(**doc["config"]))


def node_rng(seed, path: int) -> np.random.Generator:
    """Generator for the node at heap position ``path`` (root 1, children 2i, 2i+1)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(path)]))


def grow_tree(data: Dataset, config: Optional[GrowthConfig] = None, seed: int = 0,
              mtry: Optional[int] = None, random_ties: bool = False,
              counter: Optional[ScanCounter] = None) -> Tree:
    """Grow a CART tree.

    Nodes are expanded best-first by weighted decrease, which only matters
    when ``maxnodes`` binds.  Randomness (the ``mtry`` feature subset and,
    with ``random_ties``, tie-breaking among features) comes from a per-node
    generator keyed by the node's position, so the result does not depend on
    expansion order.
    """
    config = config or GrowthConfig()
    if mtry is not None and not 1 <= mtry <= data.d:
        raise ValueError(f"mtry must lie in [1, {data.d}]")
    n = data.n
    y = data.response
    root_region = NodeRegion.root(data)
    root_impurity = impurity_of(y, data.kind)
    nodes: list = []
    heap: list = []
    paths: dict = {}
    pending: dict = {}

    def add(region: NodeRegion, depth: int, parent: int, path: int) -> int:
        ys = y[region.rows]
        nd = TreeNode(len(nodes), depth, region, region.size, region.size / n,
                      impurity_of(ys, data.kind), leaf_value(ys, data.kind), parent=parent)
        nodes.append(nd)
        paths[nd.id] = path
        if config.max_depth is not None and depth >= config.max_depth:
            return nd.id
        if region.size < 2 * config.min_node_size or np.ptp(ys) == 0:
            return nd.id
        rng = None
        feats = None
        if (mtry is not None and mtry < data.d) or random_ties:
            rng = node_rng(seed, path)
            if mtry is not None and mtry < data.d:
                feats = rng.choice(data.d, size=mtry, replace=False)
        split = best_split(region, data, feats, config.min_node_size, rng if random_ties else None, counter)
        if split is None or split.decrease <= 0:
            return nd.id
        gain = nd.weight * split.decrease
        if gain < config.min_relative_decrease * root_impurity:
            return nd.id
        pending[nd.id] = split
        heapq.heappush(heap, (-gain, nd.id))
        return nd.id

    add(root_region, 0, -1, 1)
    n_leaves = 1
    cap = config.maxnodes if config.maxnodes is not None else np.inf
    while heap and n_leaves < cap:
        _, nid = heapq.heappop(heap)
        nd = nodes[nid]
        split = pending.pop(nid)
        left, right = nd.region.split(data, split.feature, split.threshold)
        nd.split = split
        nd.left = add(left, nd.depth + 1, nid, 2 * paths[nid])
        nd.right = add(right, nd.depth + 1, nid, 2 * paths[nid] + 1)
        n_leaves += 1
    return Tree(nodes, n, data.d, data.kind, config, data)


def predict(tree: Tree, x) -> np.ndarray:
    return tree.predict(x)
