"""Bagged CART forests with per-node feature subsampling."""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np

from .cart import GrowthConfig, Tree, grow_tree
from .dataspace import BINARY, Dataset, SyntheticModelSpec, generate
from .importance import figure1_table, median_subnode_lengths, mdi_tree

WORKERS_ENV = "CARTMDI_WORKERS"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class ForestConfig:
    ntree: int = 100
    mtry: Optional[int] = None
    nodesize: int = 5
    maxnodes: Optional[int] = None
    max_depth: Optional[int] = None
    min_relative_decrease: float = 0.0
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.ntree < 1:
            raise ValueError("ntree must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be >= 1")
        if self.nodesize < 1:
            raise ValueError("nodesize must be >= 1")

    def resolved_mtry(self, d: int, kind: str = "continuous") -> int:
        if self.mtry is not None:
            if self.mtry > d:
                raise ValueError(f"mtry must lie in [1, {d}]")
            return self.mtry
        if kind == BINARY:
            return max(1, int(np.sqrt(d)))
        return max(1, d // 3)

    def growth(self) -> GrowthConfig:
        return GrowthConfig(self.max_depth, self.nodesize, self.min_relative_decrease, self.maxnodes)


def tree_streams(seed: int, ntree: int):
    """(bootstrap generator, node seed) for each tree, derived from the master seed only."""
    out = []
    for child in np.random.SeedSequence(seed).spawn(ntree):
        boot, node = child.spawn(2)
        out.append((np.random.default_rng(boot), int(node.generate_state(1, np.uint64)[0])))
    return out


def bootstrap_rows(rng: np.random.Generator, n: int) -> np.ndarray:
    return np.sort(rng.integers(0, n, size=n))


def _fit_one(args):
    data, config, mtry, rng, node_seed = args
    rows = bootstrap_rows(rng, data.n) if config.bootstrap else np.arange(data.n)
    sample = data.subset(rows) if config.bootstrap else data
    return grow_tree(sample, config.growth(), node_seed, mtry=mtry, random_ties=True)


@dataclass(eq=False)
class Forest:
    trees: list
    config: ForestConfig
    d: int
    kind: str = "continuous"

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        mean = np.mean([t.predict(X) for t in self.trees], axis=0)
        if self.kind == BINARY:
            return np.where(mean >= 0, 1.0, -1.0)
        return mean

    def to_dict(self) -> dict:
        return {"config": asdict(self.config), "d": self.d, "kind": self.kind,
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, doc: dict) -> "Forest":
        return cls([Tree.from_dict(t) for t in doc["trees"]], ForestConfig(**doc["config"]), doc["d"], doc["kind"])


def fit_forest(data: Dataset, config: ForestConfig = ForestConfig(), workers: Optional[int] = None) -> Forest:
    """Fit ``ntree`` trees; the result depends only on ``config.seed``, not on ``workers``."""
    mtry = config.resolved_mtry(data.d, data.kind)
    jobs = [(data, config, mtry, rng, s) for rng, s in tree_streams(config.seed, config.ntree)]
    workers = default_workers() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            trees = list(pool.map(_fit_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        trees = [_fit_one(j) for j in jobs]
    return Forest(trees, config, data.d, data.kind)


def predict_forest(forest: Forest, x) -> np.ndarray:
    return forest.predict(x)


@dataclass
class RiskCurve:
    n: list
    risk: list
    per_replication: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def risk_curve(spec: SyntheticModelSpec, n_list: Sequence[int], config: ForestConfig = ForestConfig(),
               test_size: int = 2000, replications: int = 5, seed: int = 0) -> RiskCurve:
    """Mean over replications of the L2 distance between the regression function and the forest."""
    ss = np.random.SeedSequence(seed)
    test_rng = np.random.default_rng(ss.spawn(1)[0])
    Xt = np.column_stack([m.sample(test_rng, test_size) for m in spec.marginals])
    ft = spec.regression(Xt)
    risks, reps = [], []
    for i, n in enumerate(n_list):
        vals = []
        for r in range(replications):
            data = generate(spec, int(n), seed=int(np.random.SeedSequence([seed, i, r]).generate_state(1)[0]))
            forest = fit_forest(data, ForestConfig(**{**asdict(config), "seed": config.seed + 1000 * i + r}))
            vals.append(float(np.mean((ft - forest.predict(Xt)) ** 2)))
        reps.append(vals)
        risks.append(float(np.mean(vals)))
    return RiskCurve(list(map(int, n_list)), risks, reps)


@dataclass
class Figure1Result:
    columns: tuple
    mdi: np.ndarray
    sublen: np.ndarray
    trees: int

    def table(self) -> list:
        return figure1_table(self.mdi, self.sublen, self.columns)


def figure1(data: Dataset, B: int = 1000, seed: int = 0, min_relative_decrease: float = 0.001,
            max_depth: Optional[int] = None, nodesize: int = 1) -> Figure1Result:
    """Average global MDI and median terminal subnode length over ``B`` bootstrap trees.

    Trees use every feature at every node and are discarded after their
    statistics are accumulated.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    growth = GrowthConfig(max_depth, nodesize, min_relative_decrease)
    mdi = np.zeros(data.d)
    sub = np.zeros(data.d)
    for rng, node_seed in tree_streams(seed, B):
        tree = grow_tree(data.subset(bootstrap_rows(rng, data.n)), growth, node_seed)
        mdi += mdi_tree(tree)
        sub += median_subnode_lengths(tree)
    return Figure1Result(data.columns, mdi / B, sub / B, B)
