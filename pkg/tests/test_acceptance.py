"""End-to-end acceptance checks at their stated tolerances and time budgets.

Each test prints one PASS/FAIL line.  Scan caches are not shared between
criteria so every runtime is measured from a cold start.
"""

import time

import numpy as np
import pytest

from cartmdi.cart import best_split, best_split_single_pass
from cartmdi.dataspace import Dataset, NodeRegion, SyntheticModelSpec, generate
from cartmdi.forest import ForestConfig, figure1, risk_curve
from cartmdi.importance import spearman
from cartmdi.suites import (
    ScanStore, bounds_claims, delta_r_claims, example_claims, fixed_point_claims, fourier_claims,
    penalized_edge_claims, theorem1_claims,
)
from cartmdi.verify import VerificationConfig

from oracles import brute_force_split

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def emit(number, title, passed, detail, seconds, limit=None):
        budget = "" if limit is None else f" (limit {limit:.0f} s)"
        with capsys.disabled():
            print(f"\n{'PASS' if passed else 'FAIL'} criterion {number}: {title}: {detail}; {seconds:.1f} s{budget}")
    return emit


def _failures(claims):
    return [c.id for c in claims if not c.passed]


def test_split_equivalence(report):
    rng = np.random.default_rng(2024)
    cases = []
    for i in range(500):
        n, d = int(rng.integers(2, 201)), int(rng.integers(1, 9))
        X = rng.random((n, d))
        if i % 3 == 0:
            X = np.round(X * rng.integers(2, 10)) / 10
        cases.append((X, rng.normal(size=n) * rng.exponential()))
    t = time.perf_counter()
    ours = [best_split(NodeRegion.root(Dataset(X, y)), Dataset(X, y)) for X, y in cases]
    seconds = time.perf_counter() - t
    mismatches, worst = 0, 0.0
    for (X, y), sp in zip(cases, ours):
        ref = brute_force_split(X, y)
        if ref is None or sp is None:
            mismatches += (ref is None) != (sp is None)
            continue
        mismatches += (sp.feature, sp.threshold) != (ref[0], ref[1])
        worst = max(worst, abs(sp.decrease - ref[2]))
    ok = mismatches == 0 and worst <= 1e-10 and seconds < 10
    report(1, "single-pass split equals brute force", ok, f"{mismatches} mismatches, max gap {worst:.2e}",
           seconds, 10)
    assert ok


def test_fixed_point_identity(report):
    t = time.perf_counter()
    claims = fixed_point_claims(ScanStore())
    seconds = time.perf_counter() - t
    worst = max(c.value for c in claims)
    ok = not _failures(claims) and seconds < 120
    report(2, "fixed-point residual at the optimal split", ok,
           f"{len(claims)} models, max residual {worst:.2e}, failed {_failures(claims)}", seconds, 120)
    assert ok


def test_balancedness_bounds(report):
    t = time.perf_counter()
    claims = bounds_claims(ScanStore())
    seconds = time.perf_counter() - t
    nodes = sum(c.details["nodes"] for c in claims if c.id.startswith("balancedness"))
    ok = not _failures(claims)
    report(3, "balancedness bounds and weight order", ok, f"{nodes} node analyses, failed {_failures(claims)}",
           seconds)
    assert ok


def test_example_bounds(report):
    t = time.perf_counter()
    claims = example_claims(ScanStore())
    seconds = time.perf_counter() - t
    ok = not _failures(claims) and seconds < 600
    report(4, "example balancedness bounds", ok, f"{len(claims)} bounds, failed {_failures(claims)}", seconds, 600)
    assert ok


def test_theorem1_bound(report):
    t = time.perf_counter()
    claims = [c for c in theorem1_claims(VerificationConfig(depth=8)) if c.id.startswith("theorem1/")]
    seconds = time.perf_counter() - t
    trees = [c for c in claims if c.id != "theorem1/linear-chain"]
    chain = next(c for c in claims if c.id == "theorem1/linear-chain")
    ok = not _failures(claims)
    report(5, "leaf side probability below exp(-MDI/4), depth 8", ok,
           f"{len(trees)} trees, {sum(c.value for c in trees)} violations, dyadic chain gap {chain.value:.1e}", seconds)
    assert ok


def test_delta_r_and_fourier(report):
    t = time.perf_counter()
    claims = delta_r_claims() + fourier_claims()
    seconds = time.perf_counter() - t
    ok = not _failures(claims)
    report(6, "closed-form decrease constants", ok, f"failed {_failures(claims)}", seconds)
    assert ok


def test_penalized_edge(report):
    t = time.perf_counter()
    claims = penalized_edge_claims()
    seconds = time.perf_counter() - t
    edge = claims[0].details
    ok = not _failures(claims)
    report(7, "penalty moves the split off the edge", ok,
           f"edge distance {edge['edge_alpha0']:.4f} -> {edge['edge_alpha']:.4f}, alpha=0 bitwise {claims[1].passed}",
           seconds)
    assert ok


def test_finite_sample_counts(report):
    n, reps = 2000, 500
    t = time.perf_counter()
    rates = {}
    for sigma in (0.0, 1.0):
        spec = SyntheticModelSpec("linear", noise=sigma)
        good = 0
        for r in range(reps):
            sp = best_split_single_pass(np.arange(n), generate(spec, n, seed=r), 0)
            good += sp is not None and min(sp.left_count, sp.right_count) >= n / 4
        rates[sigma] = good / reps
    seconds = time.perf_counter() - t
    ok = min(rates.values()) >= 0.99 and seconds < 60
    report(8, "both daughters hold a quarter of the sample", ok,
           ", ".join(f"noise {s:g}: rate {r:.3f} over {reps} replications" for s, r in rates.items()), seconds, 60)
    assert ok


def test_importance_against_subnode_length(report):
    t = time.perf_counter()
    data = generate(SyntheticModelSpec("friedman1", d=10, noise=1.0), 2000, 0)
    res = figure1(data, B=200, seed=0)
    rho = spearman(res.mdi, res.sublen)
    seconds = time.perf_counter() - t
    ok = rho <= -0.8
    report(9, "averaged MDI falls as median subnode length grows", ok, f"Spearman {rho:.3f}", seconds)
    assert ok


def test_forest_risk_trend(report):
    t = time.perf_counter()
    rc = risk_curve(SyntheticModelSpec("friedman1", d=5, noise=1.0), [250, 1000, 4000], ForestConfig(),
                    replications=5, seed=0)
    seconds = time.perf_counter() - t
    ok = all(a > b for a, b in zip(rc.risk, rc.risk[1:])) and seconds < 300
    report(10, "forest L2 risk decreases with n", ok, ", ".join(f"n={n}: {r:.4f}" for n, r in zip(rc.n, rc.risk)),
           seconds, 300)
    assert ok
