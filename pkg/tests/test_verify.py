import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cartmdi.cart import GrowthConfig, grow_tree
from cartmdi.dataspace import SyntheticModelSpec, generate
from cartmdi.population import PopulationModel
from cartmdi.verify import (
    VerificationConfig, check_finite_sample_counts, check_mdi_selection_bound, check_product_formula,
    check_theorem1, diameter_diagnostic, grow_population_tree, population_mdi, selection_counts,
)


def spec_model(**kw):
    return PopulationModel.from_spec(SyntheticModelSpec(**kw))


@pytest.mark.parametrize("K", [1, 4, 7])
def test_linear_chain(K):
    model = spec_model(family="linear")
    rep = check_theorem1(model, VerificationConfig(depth=K))
    assert rep.passed and len(rep.rows) == 2 ** K
    for row in rep.rows:
        assert row["probability"] == pytest.approx(2.0 ** -K)
        assert row["mdi"] == pytest.approx(K, abs=1e-10)
        assert row["bound"] == pytest.approx(math.exp(-K / 4))
    if K == 4:
        assert round(rep.rows[0]["bound"], 4) == 0.3679


@pytest.mark.parametrize("policy", ["greedy", "round-robin"])
def test_theorem1_on_friedman(policy):
    model = spec_model(family="friedman1", d=6)
    rep = check_theorem1(model, VerificationConfig(depth=4, policy=policy))
    assert rep.passed and rep.weight_violations == 0


def test_flat_direction_is_vacuous():
    model = PopulationModel.from_function(lambda X: X[:, 0] + X[:, 1] - 2 * X[:, 0] * X[:, 1], 2)
    tree = grow_population_tree(model, 3)
    rep = check_theorem1(model, VerificationConfig(depth=3), tree)
    assert len(tree.nodes) == 1 and rep.flat_leaves == 1
    assert all(r["mdi"] == 0 and r["bound"] == 1.0 and r["ok"] for r in rep.rows)


def test_product_formula_small_cases():
    lin = spec_model(family="linear")
    t1 = grow_population_tree(lin, 1)
    assert [lf.upper[0] - lf.lower[0] for lf in t1.leaves()] == pytest.approx([0.5, 0.5], abs=1e-12)
    assert check_product_formula(lin, t1) < 1e-15
    x2 = spec_model(family="polynomial", k=2)
    t2 = grow_population_tree(x2, 2)
    assert t2.nodes[0].threshold == pytest.approx(0.6403882032, abs=1e-9)
    assert check_product_formula(x2, t2) <= 1e-8
    assert check_product_formula(x2, grow_population_tree(x2, 0)) == 0.0


@settings(max_examples=8)
@given(st.lists(st.integers(1, 3), min_size=2, max_size=3), st.integers(1, 4), st.sampled_from(["greedy", "round-robin"]))
def test_product_formula_random_trees(ks, depth, policy):
    model = spec_model(family="polynomial", d=len(ks), k=tuple(ks), distribution="beta(2,1)")
    tree = grow_population_tree(model, depth, policy)
    assert check_product_formula(model, tree) <= 1e-8


def test_selection_bound():
    lin = spec_model(family="linear")
    rep = check_mdi_selection_bound(lin, grow_population_tree(lin, 4), 1.0)
    assert rep.passed and "consistency" in rep.kind
    assert all(r["mdi"] == pytest.approx(r["bound"], abs=1e-10) for r in rep.rows)
    x2 = spec_model(family="polynomial", k=2)
    tree = grow_population_tree(x2, 5)
    rep = check_mdi_selection_bound(x2, tree, (1 / 6) ** (2 / 3))
    assert rep.passed
    for leaf in tree.leaves():
        assert population_mdi(tree, leaf.id)[0] >= 5 * 0.30285
    two = spec_model(family="polynomial", d=2, k=(2, 0))
    rep = check_mdi_selection_bound(two, grow_population_tree(two, 3), [0.3, 0.3])
    assert all(r["mdi"] == 0 and r["count"] == 0 for r in rep.rows if r["feature"] == 1)


def test_selection_counts_population():
    model = spec_model(family="polynomial", d=2, k=(1, 2))
    tree = grow_population_tree(model, 4, "round-robin")
    for leaf in tree.leaves():
        assert selection_counts(tree, leaf.id).tolist() == [2, 2]


def test_finite_sample_linear():
    rep = check_finite_sample_counts(SyntheticModelSpec("linear"), VerificationConfig(replications=200, n=2000), 1.0)
    assert (rep.gamma, rep.p_left, rep.p_right) == (1.0, 0.5, 0.5)
    assert rep.passed and rep.count_failure <= 0.01


def test_finite_sample_tiny_n_skipped():
    rep = check_finite_sample_counts(SyntheticModelSpec("linear"), VerificationConfig(n=10), 1.0)
    assert rep.skipped == "insufficient n" and rep.passed


def test_finite_sample_sine_interval():
    from cartmdi.population import global_balancedness_scan
    lam = global_balancedness_scan(spec_model(family="sine", m=1), 0, resolution=16).lam_min
    rep = check_finite_sample_counts(SyntheticModelSpec("sine", m=1), VerificationConfig(replications=100), lam)
    assert rep.interval[0] < 0.5 < rep.interval[1]
    assert rep.interval_failure <= rep.allowed and rep.passed


def test_finite_sample_is_seeded():
    cfg = VerificationConfig(replications=30, n=300, seed=4)
    a = check_finite_sample_counts(SyntheticModelSpec("polynomial", k=2, noise=0.5), cfg, 0.9)
    b = check_finite_sample_counts(SyntheticModelSpec("polynomial", k=2, noise=0.5), cfg, 0.9)
    assert a.to_dict() == b.to_dict()


@pytest.mark.parametrize("K", [0, 3, 6])
def test_diameter_linear(K):
    model = spec_model(family="linear")
    diam = diameter_diagnostic(grow_population_tree(model, K), [0])
    assert diam == pytest.approx([2.0 ** -k for k in range(K + 1)])


def test_diameter_single_leaf_and_cart():
    data = generate(SyntheticModelSpec("friedman1", d=8), 300, 1)
    single = grow_tree(data, GrowthConfig(max_depth=0))
    assert diameter_diagnostic(single, range(5)) == [pytest.approx(math.sqrt(5))]
    tree = grow_tree(data, GrowthConfig(max_depth=6))
    diam = diameter_diagnostic(tree, range(5))
    assert all(b <= a for a, b in zip(diam, diam[1:]))


def test_diameter_friedman_strictly_decreasing():
    model = spec_model(family="friedman1", d=5)
    diam = diameter_diagnostic(grow_population_tree(model, 8), model.strong_set())
    assert all(b < a for a, b in zip(diam[1:], diam[2:]))


@pytest.mark.parametrize("kw", [dict(eta=0.0), dict(eta=1.5), dict(depth=0), dict(replications=0), dict(policy="x")])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        VerificationConfig(**kw)
