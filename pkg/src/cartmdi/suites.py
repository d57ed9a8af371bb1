"""Named verification suites: collections of claims with pass/fail status.

Each claim records an id, a one-line statement, the measured value and the
tolerance it was held to.  Suites share grid scans through a ``ScanStore`` so
``all`` does not repeat work.
"""

import json
import math
import time
import warnings
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional

import numpy as np

from .dataspace import SyntheticModelSpec
from .population import (
    PopulationModel, balancedness_bounds, delta_R, fourier_coefficients, fourier_lower_bound,
    global_balancedness_scan, node_grid, optimal_split, penalized_bounds, penalized_optimal_split,
    verify_fixed_point, w1_weight, w2_lower,
)
from .population.bounds import _xi_power
from .population.scan import default_nodes
from .verify import (
    VerificationConfig, check_finite_sample_counts, check_mdi_selection_bound, check_product_formula,
    check_theorem1, diameter_diagnostic, grow_population_tree, population_mdi,
)

SUITES = ("identities", "bounds", "theorem1", "finite-sample", "examples")

FRIEDMAN_TABLE = (0.050661, 0.050661, 0.19079, 0.62996, 0.62996)


@dataclass
class Claim:
    id: str
    claim: str
    passed: bool
    value: Optional[float] = None
    tolerance: Optional[float] = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        self.passed = bool(self.passed)

    def to_dict(self) -> dict:
        return asdict(self) | {"status": "pass" if self.passed else "fail"}


@dataclass
class SuiteResult:
    name: str
    claims: list
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.claims)

    def failed_ids(self) -> list:
        return [c.id for c in self.claims if not c.passed]

    def to_dict(self) -> dict:
        return {"suite": self.name, "passed": self.passed, "seconds": self.seconds,
                "claims": [c.to_dict() for c in self.claims]}


# Example families -------------------------------------------------------------------


def example_specs() -> dict:
    """Named one-block example models used throughout the suites."""
    out = {"linear": SyntheticModelSpec("linear")}
    for k in range(1, 7):
        out[f"poly{k}"] = SyntheticModelSpec("polynomial", k=k)
    for m in range(1, 9):
        out[f"sine{m}"] = SyntheticModelSpec("sine", m=m)
    out["friedman1"] = SyntheticModelSpec("friedman1", d=5)
    for b in (1, 5, 10):
        out[f"logistic{b}"] = SyntheticModelSpec("logistic", beta=b)
    return out


def _model(name: str) -> PopulationModel:
    return PopulationModel.from_spec(example_specs()[name])


@dataclass
class ScanRecord:
    lam_min: float
    nodes: int
    excluded: int
    max_residual: float
    bound_flags: int = 0
    weight_violations: int = 0
    analysed: int = 0
    with_bounds: bool = False


class ScanStore:
    """Caches grid scans keyed by (model, feature, grid)."""

    def __init__(self):
        self._data = {}

    def get(self, name: str, feature: int, grid: str = "default", bounds: bool = False) -> ScanRecord:
        key = (name, feature, grid)
        rec = self._data.get(key)
        if rec is not None and (rec.with_bounds or not bounds):
            return rec
        model = _model(name)
        nodes = node_grid(model.d, [feature], 32) if grid == "line" else default_nodes(model, feature)
        acc = {"res": 0.0, "flags": 0, "wv": 0, "n": 0}

        def visit(an):
            fp = verify_fixed_point(an)
            acc["res"] = max(acc["res"], fp.residual_p, fp.residual_lambda)
            acc["n"] += 1
            if bounds:
                acc["flags"] += bool(balancedness_bounds(an).flags)
                acc["wv"] += not (w1_weight(an) >= w2_lower(an) * (1 - 1e-9) - 1e-9)

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            scan = global_balancedness_scan(model, feature, nodes, callback=visit)
        rec = ScanRecord(scan.lam_min, scan.n_nodes, scan.excluded, acc["res"], acc["flags"], acc["wv"],
                         acc["n"], bounds)
        self._data[key] = rec
        return rec


def _strong(name: str):
    return example_specs()[name].strong_set


# Claims -----------------------------------------------------------------------------


def fixed_point_claims(store: ScanStore, names=None, tol: float = 1e-6) -> list:
    out = []
    for name in names or example_specs():
        worst, nodes = 0.0, 0
        for j in _strong(name):
            rec = store.get(name, j, "line")
            worst, nodes = max(worst, rec.max_residual), nodes + rec.analysed
        out.append(Claim(f"fixed-point/{name}", "split probability and balancedness solve the fixed-point identity",
                         worst <= tol, worst, tol, {"nodes": nodes}))
    return out


def product_formula_claims(depth: int = 6, tol: float = 1e-8) -> list:
    out = []
    for name in ("linear", "poly2", "sine4", "friedman1", "logistic5"):
        model = _model(name)
        worst = check_product_formula(model, grow_population_tree(model, depth))
        out.append(Claim(f"product-formula/{name}", "leaf probability equals the product of per-split factors",
                         worst <= tol, worst, tol, {"depth": depth}))
    return out


def bounds_claims(store: ScanStore, names=None) -> list:
    out = []
    for name in names or example_specs():
        flags = wv = nodes = 0
        for j in _strong(name):
            rec = store.get(name, j, "default", bounds=True)
            flags, wv, nodes = flags + rec.bound_flags, wv + rec.weight_violations, nodes + rec.analysed
        out.append(Claim(f"balancedness-bounds/{name}", "lambda exceeds the oscillation and second-order bounds",
                         flags == 0, flags, 0, {"nodes": nodes}))
        out.append(Claim(f"weight-order/{name}", "first importance weight dominates the second-order lower bound",
                         wv == 0, wv, 0, {"nodes": nodes}))
    return out


def penalized_claims(alphas=(0.5, 1.1, 2.0), tol: float = 1e-9) -> list:
    out = []
    for name in ("sine8", "poly3", "friedman1"):
        model = _model(name)
        bad, rows = 0, []
        for j in _strong(name):
            for lo, hi in node_grid(model.d, [j], 4):
                for al in alphas:
                    an = penalized_optimal_split(model, (lo, hi), j, al)
                    if an.degenerate:
                        continue
                    first, second = penalized_bounds(an)
                    ok = an.lam >= first - tol and (second is None or an.lam >= second - tol)
                    bad += not ok
                    rows.append(ok)
        out.append(Claim(f"penalized-bounds/{name}", "penalized balancedness exceeds its lower bounds",
                         bad == 0, bad, 0, {"analyses": len(rows)}))
    return out


def penalized_edge_claims() -> list:
    model = PopulationModel.from_spec(SyntheticModelSpec("sine", m=10))
    a0 = optimal_split(model, None, 0)
    a1 = penalized_optimal_split(model, None, 0, alpha=1.1)
    e0, e1 = min(a0.s_star, 1 - a0.s_star), min(a1.s_star, 1 - a1.s_star)
    p0 = penalized_optimal_split(model, None, 0, alpha=0.0)
    same = json.dumps(p0.to_dict()) == json.dumps(a0.to_dict())
    return [
        Claim("penalized-edge/sine10", "the penalty moves the optimal split away from the edge",
              e1 > e0, e1 - e0, 0.0, {"edge_alpha0": e0, "edge_alpha": e1, "alpha": 1.1}),
        Claim("penalized-identity/sine10", "alpha = 0 reproduces the unpenalized analysis bitwise",
              same, None, None),
    ]


def delta_r_claims(mc_draws: int = 2_000_000, seed: int = 0) -> list:
    out = []
    v1 = delta_R(1)
    out.append(Claim("delta-r/1", "closed form at R = 1", abs(v1 - 1 / 24) <= 1e-9, abs(v1 - 1 / 24), 1e-9))
    rng = np.random.default_rng(seed)
    s = rng.random(mc_draws)
    for R in range(1, 7):
        exact = delta_R(R)
        mc = float(np.mean(_xi_power(s, R) ** 2 / (s * (1 - s))))
        out.append(Claim(f"delta-r/mc{R}", "positive and matches Monte Carlo",
                         exact > 0 and abs(exact - mc) <= 1e-3, abs(exact - mc), 1e-3, {"exact": exact, "mc": mc}))
    return out


def fourier_claims(tol: float = 1e-9) -> list:
    model = PopulationModel.from_spec(SyntheticModelSpec("sine", m=1))
    an = optimal_split(model, None, 0)
    bound = fourier_lower_bound(fourier_coefficients(model, None, 0, 8))
    err_b, err_d = abs(bound - 1 / (2 * math.pi ** 2)), abs(an.delta - 4 / math.pi ** 2)
    ok = err_b <= tol and err_d <= tol and bound <= an.delta + tol
    return [Claim("fourier/sine1", "Fourier lower bound on the optimal decrease", ok, max(err_b, err_d), tol,
                  {"bound": bound, "delta": an.delta})]


def sine_trend(lams: dict, power: float = -4.0 / 3.0):
    """Constant fitted at the smallest frequency and the normalised ratios lam_m / (c m^power)."""
    m0 = min(lams)
    c = lams[m0] / m0 ** power
    return c, {m: lams[m] / (c * m ** power) for m in sorted(lams)}


def example_claims(store: ScanStore) -> list:
    out = []
    for k in (1, 2, 3, 4):
        lam, bound = store.get(f"poly{k}", 0).lam_min, (1.0 / (k * (k + 1))) ** (2.0 / 3.0)
        out.append(Claim(f"example/poly{k}", "scanned balancedness exceeds the polynomial bound",
                         lam >= bound, lam, bound))
    lams = {m: store.get(f"sine{m}", 0).lam_min for m in (1, 2, 4, 8)}
    c, ratios = sine_trend(lams)
    for m, r in ratios.items():
        out.append(Claim(f"example/sine{m}", "scanned balancedness at least half of c m^(-4/3)",
                         r >= 0.5, lams[m], c / 2 * m ** (-4 / 3), {"fitted_c": c, "ratio": r}))
    for j, bound in enumerate(FRIEDMAN_TABLE):
        lam = store.get("friedman1", j).lam_min
        out.append(Claim(f"example/friedman1/x{j + 1}", "scanned balancedness exceeds the tabulated bound",
                         lam >= bound - 1e-6, lam, bound))
    for b in (1, 5, 10):
        lam, bound = store.get(f"logistic{b}", 0).lam_min, min(b ** (-4.0 / 3.0), 0.125 ** (2.0 / 3.0))
        out.append(Claim(f"example/logistic{b}", "scanned balancedness exceeds the logistic bound",
                         lam >= bound, lam, bound))
    return out


def theorem1_claims(config: VerificationConfig = VerificationConfig(depth=8), store: Optional[ScanStore] = None) -> list:
    out = []
    for name in example_specs():
        model = _model(name)
        for policy in ("greedy", "round-robin") if model.d > 1 else ("greedy",):
            tree = grow_population_tree(model, config.depth, policy)
            rep = check_theorem1(model, config, tree)
            out.append(Claim(f"theorem1/{name}/{policy}", "leaf side probability below exp(-eta MDI / 4)",
                             rep.passed, rep.violations + rep.weight_violations, 0,
                             {"leaves": len(tree.leaves()), "flat_leaves": rep.flat_leaves}))
            diam = diameter_diagnostic(tree, model.strong_set())
            mono = all(b <= a + 1e-12 for a, b in zip(diam, diam[1:]))
            out.append(Claim(f"diameter/{name}/{policy}", "strong-set diameter is non-increasing in depth",
                             mono, diam[-1], None, {"diameters": diam}))
    model = _model("linear")
    worst = 0.0
    ok = True
    for K in range(1, 11):
        tree = grow_population_tree(model, K)
        for leaf in tree.leaves():
            p = leaf.upper[0] - leaf.lower[0]
            mdi = population_mdi(tree, leaf.id)[0]
            worst = max(worst, abs(p - 2.0 ** -K), abs(mdi - K))
            ok &= p <= math.exp(-K / 4) and p <= math.exp(-mdi / 4) + 1e-9
    out.append(Claim("theorem1/linear-chain", "dyadic leaves with MDI equal to depth, below exp(-K/4)",
                     ok and worst <= 1e-9, worst, 1e-9, {"depths": 10}))
    if store is not None:
        for name in ("linear", "poly2"):
            model = _model(name)
            lam = store.get(name, 0).lam_min
            rep = check_mdi_selection_bound(model, grow_population_tree(model, 5), lam)
            out.append(Claim(f"selection-bound/{name}", "MDI at least scanned balancedness times selection count",
                             rep.passed, rep.violations, 0, {"lambda_hat": lam, "kind": rep.kind}))
    return out


def finite_sample_claims(config: VerificationConfig = VerificationConfig(), store: Optional[ScanStore] = None) -> list:
    out = []
    rep = check_finite_sample_counts(SyntheticModelSpec("linear"), config, 1.0)
    out.append(Claim("finite-sample/linear", "both daughter counts at least n p / 2",
                     rep.passed, rep.count_failure, rep.allowed, rep.to_dict()))
    lam = store.get("sine1", 0).lam_min if store is not None else 0.5
    rep = check_finite_sample_counts(SyntheticModelSpec("sine", m=1), config, lam)
    ok = rep.passed and rep.interval_failure <= rep.allowed
    out.append(Claim("finite-sample/sine1", "empirical split inside the envelope interval and counts large",
                     ok, max(rep.count_failure, rep.interval_failure), rep.allowed, rep.to_dict()))
    return out


# Driver -----------------------------------------------------------------------------


def run_suite(name: str, store: Optional[ScanStore] = None, config: Optional[VerificationConfig] = None,
              progress: Optional[Callable[[str], None]] = None) -> list:
    """Run ``name`` (or ``all``) and return a list of SuiteResult."""
    if name != "all" and name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; expected one of {SUITES + ('all',)}")
    store = store or ScanStore()
    config = config or VerificationConfig()
    builders = {
        "identities": lambda: fixed_point_claims(store) + product_formula_claims(),
        "bounds": lambda: bounds_claims(store) + penalized_claims(),
        "theorem1": lambda: theorem1_claims(VerificationConfig(**{**asdict(config), "depth": max(config.depth, 8)}),
                                            store),
        "finite-sample": lambda: finite_sample_claims(config, store),
        "examples": lambda: example_claims(store) + delta_r_claims() + fourier_claims() + penalized_edge_claims(),
    }
    results = []
    for s in SUITES if name == "all" else (name,):
        if progress:
            progress(s)
        t = time.perf_counter()
        claims = builders[s]()
        results.append(SuiteResult(s, claims, time.perf_counter() - t))
    return results
