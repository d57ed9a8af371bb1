"""Guarantee checks built on population-optimal trees and Monte Carlo replications."""

import math
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np

from .cart import best_split_single_pass
from .dataspace import Dataset, NodeRegion, SyntheticModelSpec
from .population.bounds import w1_weight, w2_lower
from .population.envelope import quantile_envelope
from .population.model import PopulationModel, node_bounds
from .population.split import optimal_split


@dataclass(frozen=True)
class VerificationConfig:
    eta: float = 1.0
    depth: int = 4
    resolution: int = 32
    replications: int = 500
    delta: float = 0.01
    seed: int = 0
    policy: str = "greedy"
    n: int = 2000

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.policy not in ("greedy", "round-robin"):
            raise ValueError("policy must be 'greedy' or 'round-robin'")


# Population trees -----------------------------------------------------------------


@dataclass
class PopNode:
    id: int
    depth: int
    lower: np.ndarray
    upper: np.ndarray
    parent: int = -1
    feature: int = -1
    threshold: float = float("nan")
    analysis: object = None
    left: int = -1
    right: int = -1
    flat: bool = False

    @property
    def is_leaf(self) -> bool:
        return self.left < 0


@dataclass
class PopulationTree:
    model: PopulationModel
    nodes: list

    def leaves(self):
        return [nd for nd in self.nodes if nd.is_leaf]

    def ancestors(self, node_id: int):
        out, p = [], self.nodes[node_id].parent
        while p >= 0:
            out.append(self.nodes[p])
            p = self.nodes[p].parent
        return out[::-1]

    def is_left_child(self, nd: PopNode) -> bool:
        return self.nodes[nd.parent].left == nd.id


def grow_population_tree(model: PopulationModel, depth: int, policy: str = "greedy",
                         features: Optional[Sequence[int]] = None) -> PopulationTree:
    """Split every node at its population-optimal point down to ``depth``.

    ``greedy`` picks the feature with the largest decrease (smallest index on
    ties); ``round-robin`` cycles through ``features`` (default: the model's
    strong set), skipping directions with no signal.  A node where every
    candidate direction is flat becomes a leaf marked ``flat``.
    """
    features = list(features) if features is not None else list(model.strong_set()) or list(range(model.d))
    lo, hi = node_bounds(None, model.d)
    nodes = [PopNode(0, 0, lo, hi)]
    queue = [0]
    while queue:
        nd = nodes[queue.pop(0)]
        if nd.depth >= depth:
            continue
        box = (nd.lower, nd.upper)
        if policy == "greedy":
            order = features
        else:
            k = nd.depth % len(features)
            order = features[k:] + features[:k]
        best = None
        for j in order:
            an = optimal_split(model, box, j)
            if an.degenerate:
                continue
            if policy == "round-robin":
                best = an
                break
            if best is None or an.delta > best.delta:
                best = an
        if best is None:
            nd.flat = True
            continue
        nd.feature, nd.threshold, nd.analysis = best.feature, best.s_star, best
        best.problem = None
        j, s = best.feature, best.s_star
        lu, rl = nd.upper.copy(), nd.lower.copy()
        lu[j], rl[j] = s, s
        for lower, upper in ((nd.lower, lu), (rl, nd.upper)):
            child = PopNode(len(nodes), nd.depth + 1, lower, upper, nd.id)
            nodes.append(child)
            queue.append(child.id)
        nd.left, nd.right = len(nodes) - 2, len(nodes) - 1
    return PopulationTree(model, nodes)


# Checks ------------------------------------------------------------------------------


@dataclass
class Theorem1Report:
    rows: list
    weight_rows: list
    violations: int
    weight_violations: int
    flat_leaves: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.weight_violations == 0


def population_mdi(tree: PopulationTree, leaf_id: int, weights: str = "w1") -> np.ndarray:
    out = np.zeros(tree.model.d)
    for nd in tree.ancestors(leaf_id):
        an = nd.analysis
        w = w1_weight(an) if weights == "w1" else 1.0
        out[nd.feature] += w * an.delta
    return out


def selection_counts(tree: PopulationTree, leaf_id: int) -> np.ndarray:
    k = np.zeros(tree.model.d, dtype=int)
    for nd in tree.ancestors(leaf_id):
        k[nd.feature] += 1
    return k


def check_theorem1(model: PopulationModel, config: VerificationConfig = VerificationConfig(),
                   tree: Optional[PopulationTree] = None, tol: float = 1e-9) -> Theorem1Report:
    """P[a_j <= X_j <= b_j] <= exp(-eta/4 MDI_j) at every leaf and feature, and w1 >= w2 at every split."""
    tree = tree or grow_population_tree(model, config.depth, config.policy)
    rows, wrows = [], []
    for leaf in tree.leaves():
        mdi = population_mdi(tree, leaf.id)
        for j in range(model.d):
            prob = model.marginals[j].mass(leaf.lower[j], leaf.upper[j])
            bound = math.exp(-config.eta / 4.0 * mdi[j])
            rows.append({"leaf": leaf.id, "feature": j, "probability": prob, "mdi": float(mdi[j]),
                         "bound": bound, "ok": prob <= bound + tol})
    for nd in tree.nodes:
        if nd.analysis is not None:
            w1, w2 = w1_weight(nd.analysis), w2_lower(nd.analysis)
            wrows.append({"node": nd.id, "feature": nd.feature, "w1": w1, "w2": w2,
                          "ok": w1 >= w2 * (1 - 1e-9) - tol})
    return Theorem1Report(rows, wrows, sum(not r["ok"] for r in rows), sum(not r["ok"] for r in wrows),
                          sum(nd.flat for nd in tree.leaves()), tol)


def eta_sign(tree: PopulationTree, nd: PopNode) -> int:
    """+1 for (right, s* below the median) or (left, s* not below); -1 otherwise."""
    parent = tree.nodes[nd.parent]
    marg = tree.model.marginals[parent.feature]
    median = float(marg.conditional_ppf(0.5, parent.lower[parent.feature], parent.upper[parent.feature]))
    below = parent.threshold < median
    left = tree.is_left_child(nd)
    return 1 if (not left and below) or (left and not below) else -1


def check_product_formula(model: PopulationModel, tree: PopulationTree) -> float:
    """Largest gap between the per-ancestor product formula and the direct box probability."""
    worst = 0.0
    for leaf in tree.leaves():
        prod = 1.0
        for nd in (tree.ancestors(leaf.id) + [leaf])[1:]:
            an = tree.nodes[nd.parent].analysis
            g2 = an.g ** 2
            prod *= 0.5 * (1.0 + eta_sign(tree, nd) * math.sqrt(g2 / (g2 + an.delta)))
        direct = model.mass((leaf.lower, leaf.upper))
        worst = max(worst, abs(prod - direct))
    return worst


@dataclass
class SelectionReport:
    rows: list
    violations: int
    kind: str = "consistency check: scanned balancedness over-estimates the infimum"

    @property
    def passed(self) -> bool:
        return self.violations == 0


def check_mdi_selection_bound(model: PopulationModel, tree: PopulationTree, lam_hat, tol: float = 1e-9) -> SelectionReport:
    """MDI_j(t) >= lam_hat_j K_j(t) at every leaf."""
    lam_hat = np.broadcast_to(np.asarray(lam_hat, dtype=float), (model.d,))
    rows = []
    for leaf in tree.leaves():
        mdi, k = population_mdi(tree, leaf.id), selection_counts(tree, leaf.id)
        for j in range(model.d):
            lhs, rhs = float(mdi[j]), float(lam_hat[j] * k[j])
            rows.append({"leaf": leaf.id, "feature": j, "mdi": lhs, "bound": rhs, "count": int(k[j]),
                         "ok": lhs >= rhs - tol})
    return SelectionReport(rows, sum(not r["ok"] for r in rows))


@dataclass
class FiniteSampleReport:
    n: int
    replications: int
    gamma: float
    p_left: float
    p_right: float
    interval: tuple
    interval_failure: float
    count_failure: float
    left_count_failure: float
    right_count_failure: float
    allowed: float
    skipped: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.skipped is not None or self.count_failure <= self.allowed

    def to_dict(self) -> dict:
        return asdict(self) | {"passed": self.passed}


MIN_SAMPLE = 50


def check_finite_sample_counts(spec: SyntheticModelSpec, config: VerificationConfig, lam: float,
                               feature: int = 0, node=None) -> FiniteSampleReport:
    """Replicate: draw ``n`` points inside ``node``, split empirically, and test
    the split location and both daughter counts against the envelope bounds.

    The allowed failure frequency is ``delta`` plus three binomial standard
    errors.  The split-location frequency is reported alongside; it is only
    meaningful when the envelope leaves room, i.e. when Gamma < 1.
    """
    env = quantile_envelope(spec.distribution[feature])
    gam = env.gamma(lam)
    pl, pr = env.p_left(lam), env.p_right(lam)
    reps, n = config.replications, config.n
    allowed = config.delta + 3.0 * math.sqrt(config.delta * (1 - config.delta) / reps)
    lo, hi = node_bounds(node, spec.d)
    a, b = lo[feature], hi[feature]
    interval = env.split_interval(lam, a, b)
    if n < MIN_SAMPLE:
        return FiniteSampleReport(n, reps, gam, pl, pr, interval, float("nan"), float("nan"),
                                  float("nan"), float("nan"), allowed, skipped="insufficient n")
    ss = np.random.SeedSequence(config.seed)
    bad_i = bad_l = bad_r = bad_any = 0
    for child in ss.spawn(reps):
        rng = np.random.default_rng(child)
        X = np.empty((n, spec.d))
        for j, m in enumerate(spec.marginals):
            X[:, j] = m.conditional_ppf(rng.random(n), lo[j], hi[j])
        if spec.kind == "binary":
            y = np.where(rng.random(n) < spec.probability(X), 1.0, -1.0)
        else:
            y = spec.regression(X) + spec.noise * rng.standard_normal(n)
        data = Dataset(X, y, spec.kind)
        sp = best_split_single_pass(np.arange(n), data, feature)
        if sp is None:
            bad_i += 1
            bad_any += 1
            continue
        bad_i += not (interval[0] <= sp.threshold <= interval[1])
        low_l = sp.left_count < n * pl / 2
        low_r = sp.right_count < n * pr / 2
        bad_l += low_l
        bad_r += low_r
        bad_any += low_l or low_r
    return FiniteSampleReport(n, reps, gam, pl, pr, tuple(map(float, interval)), bad_i / reps, bad_any / reps,
                              bad_l / reps, bad_r / reps, allowed)


def diameter_diagnostic(tree, strong_set: Sequence[int]) -> list:
    """Max over the depth-``k`` frontier of the diameter restricted to ``strong_set``, for k = 0..depth.

    Works for CART trees and population trees alike; leaves shallower than
    ``k`` stay in the frontier.
    """
    coords = list(strong_set)
    nodes = tree.nodes

    def box(nd):
        if hasattr(nd, "region"):
            return nd.region.lower, nd.region.upper
        return nd.lower, nd.upper

    def is_leaf(nd):
        return nd.is_leaf

    max_depth = max(nd.depth for nd in nodes)
    out = []
    for k in range(max_depth + 1):
        diam = 0.0
        for nd in nodes:
            if nd.depth == k or (nd.depth < k and is_leaf(nd)):
                lo, hi = box(nd)
                diam = max(diam, float(np.sqrt(np.sum((np.asarray(hi)[coords] - np.asarray(lo)[coords]) ** 2))))
        out.append(diam)
    return out
