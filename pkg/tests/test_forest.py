import math

import numpy as np
import pytest

from cartmdi.cart import GrowthConfig, grow_tree
from cartmdi.dataspace import Dataset, SyntheticModelSpec, generate
from cartmdi.forest import (
    Forest, ForestConfig, bootstrap_rows, figure1, fit_forest, predict_forest, risk_curve, tree_streams,
)
from cartmdi.importance import mdi_tree, median_subnode_lengths


@pytest.fixture(scope="module")
def friedman():
    return generate(SyntheticModelSpec("friedman1", d=10, noise=1.0), 400, 0)


def test_config_defaults_and_validation():
    cfg = ForestConfig()
    assert cfg.resolved_mtry(10) == 3 and cfg.resolved_mtry(2) == 1
    assert cfg.resolved_mtry(9, "binary") == 3
    for kw in (dict(ntree=0), dict(mtry=0), dict(nodesize=0)):
        with pytest.raises(ValueError):
            ForestConfig(**kw)
    with pytest.raises(ValueError):
        ForestConfig(mtry=5).resolved_mtry(4)


def test_no_randomization_reduces_to_cart(friedman):
    cfg = ForestConfig(ntree=1, mtry=10, bootstrap=False, nodesize=3)
    forest = fit_forest(friedman, cfg)
    (_, node_seed), = tree_streams(0, 1)
    tree = grow_tree(friedman, GrowthConfig(None, 3, 0.0), node_seed, random_ties=True)
    assert forest.trees[0].to_dict() == tree.to_dict()
    Q = np.random.default_rng(1).random((50, 10))
    assert np.array_equal(predict_forest(forest, Q), tree.predict(Q))
    # feature ties only arise in tiny nodes, so the root agrees with deterministic CART
    plain = grow_tree(friedman, GrowthConfig(None, 3, 0.0))
    assert forest.trees[0].root.split == plain.root.split


def test_same_seed_is_bitwise_identical(friedman):
    a = fit_forest(friedman, ForestConfig(ntree=5, seed=3))
    b = fit_forest(friedman, ForestConfig(ntree=5, seed=3))
    assert a.to_dict() == b.to_dict()
    c = fit_forest(friedman, ForestConfig(ntree=5, seed=4))
    assert a.to_dict() != c.to_dict()


def test_parallel_schedule_does_not_matter(friedman):
    cfg = ForestConfig(ntree=4, seed=9)
    assert fit_forest(friedman, cfg, workers=1).to_dict() == fit_forest(friedman, cfg, workers=2).to_dict()


def test_roundtrip(friedman):
    forest = fit_forest(friedman, ForestConfig(ntree=3, seed=2))
    back = Forest.from_dict(forest.to_dict())
    Q = np.random.default_rng(2).random((30, 10))
    assert np.array_equal(back.predict(Q), forest.predict(Q))


def test_single_tree_and_averaging(friedman):
    forest = fit_forest(friedman, ForestConfig(ntree=1, seed=5))
    Q = np.random.default_rng(3).random((20, 10))
    assert np.array_equal(forest.predict(Q), forest.trees[0].predict(Q))
    x = np.array([[0.2], [0.8]])
    zero = grow_tree(Dataset(x, np.zeros(2)))
    one = grow_tree(Dataset(x, np.ones(2)))
    assert Forest([zero, one], ForestConfig(ntree=2), 1).predict([[0.5]])[0] == 0.5


def test_classification_votes():
    data = generate(SyntheticModelSpec("logistic", d=2, beta=(6, -3)), 300, 1)
    forest = fit_forest(data, ForestConfig(ntree=7, seed=1))
    assert set(np.unique(forest.predict(data.features))) <= {-1.0, 1.0}


def test_bootstrap_unique_fraction():
    fr = [np.unique(bootstrap_rows(rng, 1000)).size / 1000 for rng, _ in tree_streams(0, 200)]
    assert abs(np.mean(fr) - (1 - math.exp(-1))) < 0.02
    assert all(bootstrap_rows(rng, 50).size == 50 for rng, _ in tree_streams(1, 5))


def test_strong_features_selected_more_often():
    spec = SyntheticModelSpec("friedman1", d=10, noise=1.0)
    counts = np.zeros(10)
    for seed in range(20):
        forest = fit_forest(generate(spec, 2000, seed), ForestConfig(ntree=1, seed=seed, maxnodes=64))
        for t in forest.trees:
            for nd in t.internal():
                counts[nd.split.feature] += 1
    assert counts[:5].min() > counts[5:].max()


def test_variance_shrinks_with_more_trees():
    data = generate(SyntheticModelSpec("friedman1", d=5, noise=1.0), 60, 0)
    x = np.full((1, 5), 0.5)
    var = {nt: np.var([fit_forest(data, ForestConfig(ntree=nt, seed=s)).predict(x)[0] for s in range(16)])
           for nt in (10, 200)}
    assert var[10] >= 3 * var[200]


def test_constant_function_has_zero_risk():
    rc = risk_curve(SyntheticModelSpec("polynomial", k=0, beta=2.0), [50, 200], ForestConfig(ntree=3),
                    test_size=200, replications=2)
    assert max(rc.risk) <= 1e-20


def test_linear_risk_drops():
    # a leaf budget lets leaves grow with n; fully grown trees keep a noise floor near sigma^2 / nodesize
    rc = risk_curve(SyntheticModelSpec("linear", noise=0.1), [250, 4000], ForestConfig(ntree=50, maxnodes=32),
                    test_size=1000, replications=2)
    assert rc.risk[1] * 2 <= rc.risk[0]
    assert rc.to_dict()["n"] == [250, 4000]


def test_figure1_single_tree_matches_statistics():
    data = generate(SyntheticModelSpec("friedman1", d=6, noise=0.5), 300, 2)
    res = figure1(data, B=1, seed=4)
    (rng, node_seed), = tree_streams(4, 1)
    tree = grow_tree(data.subset(bootstrap_rows(rng, data.n)), GrowthConfig(None, 1, 0.001), node_seed)
    assert np.array_equal(res.mdi, mdi_tree(tree))
    assert np.array_equal(res.sublen, median_subnode_lengths(tree))


def test_figure1_single_feature():
    data = generate(SyntheticModelSpec("sine", m=2, noise=0.3), 200, 3)
    assert figure1(data, B=3).table() == [("x1", 100.0, 100.0)]
    with pytest.raises(ValueError):
        figure1(data, B=0)
