import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cartmdi.cart import GrowthConfig, SplitEvaluation, grow_tree
from cartmdi.dataspace import Dataset, NodeRegion, SyntheticModelSpec, generate
from cartmdi.importance import (
    edge_cut_preference, figure1_table, impurity_drop, importance_report, mdi_conditional, mdi_global, mdi_tree,
    median_subnode_lengths, partial_dependence_treewalk, scale_to_100, selection_counts, spearman,
    tabulate_partial_dependence,
)
from cartmdi.population import PopulationModel, optimal_split


def stump_data():
    return Dataset(np.array([[0.1, 0.5], [0.2, 0.5], [0.9, 0.5]]), np.array([0.1, 0.2, 0.9]))


def test_stump_mdi():
    tree = grow_tree(stump_data(), GrowthConfig(max_depth=1))
    assert np.allclose(mdi_global([tree]), [0.125, 0.0])


def test_never_selected_feature_has_zero_mdi():
    data = generate(SyntheticModelSpec("polynomial", d=3, k=(1, 2, 0)), 200, 1)
    tree = grow_tree(data, GrowthConfig(max_depth=4))
    assert mdi_tree(tree)[2] == 0.0


@pytest.mark.parametrize("spec", [
    SyntheticModelSpec("linear", noise=0.1),
    SyntheticModelSpec("friedman1", d=7, noise=1.0),
    SyntheticModelSpec("logistic", d=2, beta=(3, -2)),
])
def test_mdi_additivity(spec):
    data = generate(spec, 400, 2)
    tree = grow_tree(data, GrowthConfig(min_relative_decrease=0.0, min_node_size=2))
    assert np.all(mdi_tree(tree) >= 0)
    assert abs(mdi_tree(tree).sum() - impurity_drop(tree)) <= 1e-10


def test_conditional_mdi_unit_weights():
    tree = grow_tree(stump_data(), GrowthConfig(max_depth=1))
    leaf = tree.leaves()[0].id
    assert np.allclose(mdi_conditional(tree, leaf), [0.125, 0.0])
    with pytest.raises(KeyError):
        mdi_conditional(tree, 0)
    with pytest.raises(ValueError):
        mdi_conditional(tree, leaf, "bogus")


def test_selection_counts_sum_to_depth():
    data = generate(SyntheticModelSpec("sine", d=3, m=(1, 2, 1), noise=0.2), 500, 3)
    tree = grow_tree(data, GrowthConfig(max_depth=6))
    for leaf in tree.leaves():
        assert selection_counts(tree, leaf.id).sum() == leaf.depth


def test_selection_count_on_a_chain():
    # splits on x1, x2, x1, x2, x1 along the left-most path
    x1 = np.array([0.05, 0.15, 0.3, 0.6, 0.9, 0.95])
    X = np.column_stack([x1, x1[::-1]])
    tree = grow_tree(Dataset(X, np.arange(6.0) ** 3), GrowthConfig(min_relative_decrease=0.0))
    deepest = max(tree.leaves(), key=lambda nd: nd.depth)
    assert selection_counts(tree, deepest.id).sum() == deepest.depth


def test_w1_plugin_weights_positive():
    data = generate(SyntheticModelSpec("polynomial", k=2, noise=0.05), 400, 4)
    tree = grow_tree(data, GrowthConfig(max_depth=3))
    for leaf in tree.leaves():
        w = mdi_conditional(tree, leaf.id, "w1-plugin")
        assert w[0] > 0
    rep = importance_report(tree, "w1-plugin")
    assert rep.to_dict()["weights_are_estimates"] is True


def test_population_w1_weights_count_splits():
    from cartmdi.verify import grow_population_tree, population_mdi
    model = PopulationModel.from_spec(SyntheticModelSpec("linear"))
    tree = grow_population_tree(model, 5)
    for leaf in tree.leaves():
        assert population_mdi(tree, leaf.id)[0] == pytest.approx(5.0, abs=1e-10)


@pytest.mark.parametrize("left,n,expected", [(5, 10, 0.0), (9, 10, 10 / 9 * 0.8 / 2)])
def test_edge_cut_preference(left, n, expected):
    sp = SplitEvaluation(0, 0.5, 0.1, left, n - left)
    assert edge_cut_preference(sp) == pytest.approx(expected)
    assert edge_cut_preference(left / n, n) == pytest.approx(expected)
    assert round(edge_cut_preference(sp), 4) == round(expected, 4)


def test_population_edge_cut_identity():
    an = optimal_split(PopulationModel.from_spec(SyntheticModelSpec("polynomial", k=2)), None, 0)
    pop = abs(2 * an.p_left - 1) / 2
    assert pop == pytest.approx(0.5 * math.sqrt(1 - an.lam), abs=1e-10)
    assert round(pop, 4) == 0.1404


def test_median_subnode_lengths():
    x = (np.arange(8) + 0.5) / 8
    tree = grow_tree(Dataset(x[:, None], x), GrowthConfig(max_depth=3, min_relative_decrease=0.0))
    assert np.allclose([nd.region.upper[0] - nd.region.lower[0] for nd in tree.leaves()], 1 / 8)
    assert median_subnode_lengths(tree) == pytest.approx([1 / 8])
    single = grow_tree(Dataset(np.array([[0.2, 0.4]]), np.array([1.0])))
    assert np.array_equal(median_subnode_lengths(single), [1.0, 1.0])


def naive_pd(tree, data, j, x, rows):
    Z = data.features[rows].copy()
    Z[:, j] = x
    return tree.predict(Z).mean()


@given(st.integers(0, 10 ** 6), st.integers(0, 2))
def test_treewalk_pd_matches_naive(seed, j):
    rng = np.random.default_rng(seed)
    data = Dataset(rng.random((120, 3)), rng.normal(size=120))
    tree = grow_tree(data, GrowthConfig(max_depth=int(rng.integers(1, 7)), min_relative_decrease=0.0))
    xs = np.concatenate([rng.random(10), [0.0, 1.0], [nd.split.threshold for nd in tree.internal()
                                                      if nd.split.feature == j]])
    pd = partial_dependence_treewalk(tree, j, xs)
    rows = np.arange(data.n)
    for x, v in zip(xs, pd):
        assert abs(v - naive_pd(tree, data, j, x, rows)) <= 1e-12
    node = NodeRegion([0.2, 0.0, 0.1], [0.9, 0.8, 1.0])
    rows = node.members(data)
    if rows.size:
        sub = partial_dependence_treewalk(tree, j, xs, node=node)
        for x, v in zip(xs, sub):
            assert abs(v - naive_pd(tree, data, j, x, rows)) <= 1e-12


def test_pd_without_splits_is_constant_and_step():
    x = np.linspace(0.05, 0.95, 10)
    data = Dataset(np.column_stack([x, x[::-1]]), (x > 0.5).astype(float))
    tree = grow_tree(data, GrowthConfig(max_depth=1))
    assert tree.root.split.feature == 0
    other = partial_dependence_treewalk(tree, 1, [0.0, 0.3, 1.0])
    assert np.allclose(other, tree.predict(data.features).mean())
    step = tabulate_partial_dependence(tree, 0)
    assert np.array_equal(step([0.2, 0.7]), [0.0, 1.0])
    with pytest.raises(ValueError):
        partial_dependence_treewalk(tree, 0, [1.5])


def test_scaling_and_table():
    assert np.array_equal(scale_to_100([1.0, 4.0, 2.0]), [25.0, 100.0, 50.0])
    assert np.array_equal(scale_to_100([0.0, 0.0]), [0.0, 0.0])
    rows = figure1_table([3.0, 1.0, 2.0], [0.1, 0.4, 0.2], ("a", "b", "c"))
    assert [r[0] for r in rows] == ["b", "c", "a"]
    assert rows[-1][1] == 100.0 and rows[0][2] == 100.0
    assert figure1_table([0.7], [0.2], ("x",)) == [("x", 100.0, 100.0)]
    assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)


def test_report_tidy_rows():
    data = generate(SyntheticModelSpec("linear", d=2, beta=(1, 0.5)), 100, 9)
    rep = importance_report(grow_tree(data, GrowthConfig(max_depth=2)))
    rows = list(rep.tidy_rows())
    assert {r[1] for r in rows} >= {"mdi", "median_subnode_length"}
    assert rep.columns == ("x1", "x2")
