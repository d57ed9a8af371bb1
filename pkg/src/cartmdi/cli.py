"""Command-line entry point: ``cartmdi <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data or model-spec error,
3 verification failure.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .cart import GrowthConfig, Tree, grow_tree
from .dataspace import (
    CONTINUOUS, DataError, Dataset, MinMaxScaling, SpecError, SyntheticModelSpec, generate, load_csv, read_table,
)
from .forest import Forest, ForestConfig, figure1, fit_forest
from .importance import importance_report, spearman
from .io import RunManifest, write_csv, write_json
from .population import (
    NumericalError, PopulationModel, balancedness_bounds, delta_curve, penalized_bounds, penalized_optimal_split,
    verify_fixed_point,
)
from .population.model import node_bounds
from .suites import SUITES, run_suite
from .verify import VerificationConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def _finish(manifest: RunManifest, start: float, outputs, quiet: bool = False):
    manifest.outputs = [str(p) for p in outputs]
    manifest.wall_time = time.perf_counter() - start
    manifest.write(_manifest_path(Path(outputs[0])))
    if not quiet:
        for p in outputs:
            print(p)


def _load_spec(text: str) -> SyntheticModelSpec:
    p = Path(text)
    try:
        doc = json.loads(p.read_text(encoding="utf-8") if p.exists() else text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"model spec is neither a JSON file nor inline JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SpecError("model spec must be a JSON object")
    return SyntheticModelSpec.from_dict(doc)


# fit / predict ----------------------------------------------------------------------


def _load_training(args):
    raw = load_csv(args.data, args.response, standardize_features=False, kind=args.kind)
    scaling = MinMaxScaling.fit(raw.features)
    return Dataset(scaling.transform(raw.features), raw.response, raw.kind, raw.columns), scaling


def cmd_fit(args) -> int:
    start = time.perf_counter()
    data, scaling = _load_training(args)
    if args.forest:
        if args.mtry is not None and not 1 <= args.mtry <= data.d:
            raise UsageError(f"--mtry must lie in [1, {data.d}]")
        config = ForestConfig(ntree=args.ntree, mtry=args.mtry, nodesize=args.nodesize or 5,
                              maxnodes=args.maxnodes, max_depth=args.max_depth,
                              min_relative_decrease=args.min_decrease or 0.0,
                              bootstrap=not args.no_bootstrap, seed=args.seed)
        model = fit_forest(data, config)
        doc = {"type": "forest", "model": model.to_dict()}
        cfg = {"forest": True, **config.__dict__}
        default = "forest.json"
    else:
        config = GrowthConfig(args.max_depth, args.nodesize or 1,
                              0.001 if args.min_decrease is None else args.min_decrease, args.maxnodes)
        model = grow_tree(data, config, args.seed)
        doc = {"type": "tree", "model": model.to_dict()}
        cfg = {"forest": False, **config.__dict__}
        default = "tree.json"
    doc.update(columns=list(data.columns), response=args.response, scaling=scaling.to_dict(), version=__version__)
    out = Path(args.out or default)
    write_json(out, doc)
    manifest = RunManifest("fit", cfg, args.seed)
    manifest.add_input(args.data)
    _finish(manifest, start, [out])
    return EXIT_OK


def load_model(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        model = Forest.from_dict(doc["model"]) if doc["type"] == "forest" else Tree.from_dict(doc["model"])
        return doc, model, MinMaxScaling.from_dict(doc["scaling"])
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: not a model file ({exc})") from None


def _feature_matrix(path, columns, response=None):
    header, table = read_table(path)
    missing = [c for c in columns if c not in header]
    if missing:
        raise DataError(f"{path}: missing feature columns {missing}")
    X = table[:, [header.index(c) for c in columns]]
    y = table[:, header.index(response)] if response and response in header else None
    return X, y


def cmd_predict(args) -> int:
    start = time.perf_counter()
    doc, model, scaling = load_model(args.model)
    X, _ = _feature_matrix(args.data, doc["columns"])
    pred = model.predict(scaling.transform(X))
    out = Path(args.out or "predictions.csv")
    write_csv(out, ["row", "prediction"], ((i, float(v)) for i, v in enumerate(pred)))
    manifest = RunManifest("predict", {"model": str(args.model)})
    manifest.add_input(args.model)
    manifest.add_input(args.data)
    _finish(manifest, start, [out])
    return EXIT_OK


# importance / figure1 ---------------------------------------------------------------


def cmd_importance(args) -> int:
    start = time.perf_counter()
    doc, model, scaling = load_model(args.model)
    if doc["type"] != "tree":
        raise UsageError("importance reports are per tree; fit without --forest or use figure1")
    if args.weights == "w1-plugin":
        if not args.data:
            raise UsageError("--weights w1-plugin needs the training data (--data)")
        X, y = _feature_matrix(args.data, doc["columns"], doc["response"])
        if y is None:
            raise DataError(f"{args.data}: response column {doc['response']!r} missing")
        if doc["model"]["kind"] != CONTINUOUS and set(np.unique(y)) <= {0.0, 1.0}:
            y = 2 * y - 1
        model.attach(Dataset(scaling.transform(X), y, doc["model"]["kind"], tuple(doc["columns"])))
    rep = importance_report(model, args.weights, doc["columns"])
    out = Path(args.out or "importance.json")
    write_json(out, rep.to_dict())
    tidy = out.with_suffix(".csv")
    write_csv(tidy, ["feature", "quantity", "value"], rep.tidy_rows())
    manifest = RunManifest("importance", {"weights": args.weights})
    manifest.add_input(args.model)
    _finish(manifest, start, [out, tidy])
    return EXIT_OK


def cmd_figure1(args) -> int:
    start = time.perf_counter()
    if bool(args.data) == bool(args.spec):
        raise UsageError("give exactly one of --data (with --response) or --spec (with --n)")
    if args.data:
        if not args.response:
            raise UsageError("--response is required with --data")
        data = load_csv(args.data, args.response, kind=args.kind)
    else:
        data = generate(_load_spec(args.spec), args.n, args.seed)
    if args.B < 1:
        raise UsageError("-B must be >= 1")
    res = figure1(data, B=args.B, seed=args.seed,
                  min_relative_decrease=0.001 if args.min_decrease is None else args.min_decrease,
                  max_depth=args.max_depth, nodesize=args.nodesize or 1)
    rows = res.table()
    out = Path(args.out or "figure1.csv")
    write_csv(out, ["feature", "mdi", "sublen"], rows)
    rho = spearman(res.mdi, res.sublen) if data.d > 1 else float("nan")
    summary = out.with_suffix(".json")
    write_json(summary, {"trees": res.trees, "spearman": rho, "columns": list(res.columns),
                         "mdi_raw": res.mdi, "sublen_raw": res.sublen})
    manifest = RunManifest("figure1", {"B": args.B, "min_decrease": args.min_decrease, "n": args.n}, args.seed)
    if args.data:
        manifest.add_input(args.data)
    _finish(manifest, start, [out, summary])
    return EXIT_OK


# population -------------------------------------------------------------------------


def cmd_population(args) -> int:
    start = time.perf_counter()
    spec = _load_spec(args.spec)
    model = PopulationModel.from_spec(spec)
    if not 0 <= args.feature < spec.d:
        raise UsageError(f"--feature must lie in [0, {spec.d - 1}]")
    lower = np.zeros(spec.d) if args.lower is None else np.asarray(args.lower, float)
    upper = np.ones(spec.d) if args.upper is None else np.asarray(args.upper, float)
    try:
        node = node_bounds((lower, upper), spec.d)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    an = penalized_optimal_split(model, node, args.feature, args.alpha, grid=args.grid, keep_curve=True)
    doc = an.to_dict(curve=False) | {"spec": spec.to_dict()}
    if not an.degenerate:
        fp = verify_fixed_point(an)
        doc["fixed_point"] = {"residual_p": fp.residual_p, "residual_lambda": fp.residual_lambda}
        first, second = penalized_bounds(an)
        doc["penalized_bounds"] = {"first": first, "second": second}
        if args.alpha == 0:
            doc["balancedness_bounds"] = balancedness_bounds(an).to_dict()
    out = Path(args.out or "population.json")
    write_json(out, doc)
    curve = out.with_suffix(".csv")
    s = np.linspace(node[0][args.feature], node[1][args.feature], args.curve_points + 2)[1:-1]
    try:
        d, _ = delta_curve(model, node, args.feature, s)
    except NumericalError as exc:
        print(f"warning: {exc}", file=sys.stderr)
        d = np.full_like(s, np.nan)
    write_csv(curve, ["s", "delta"], zip(s, d))
    manifest = RunManifest("population", {"spec": spec.to_dict(), "feature": args.feature, "alpha": args.alpha,
                                          "lower": lower, "upper": upper, "grid": args.grid})
    _finish(manifest, start, [out, curve])
    return EXIT_OK


# verify / generate ------------------------------------------------------------------


def cmd_verify(args) -> int:
    start = time.perf_counter()
    suite = args.suite_pos or args.suite
    if suite not in SUITES + ("all",):
        raise UsageError(f"unknown suite {suite!r}; expected one of {', '.join(SUITES + ('all',))}")
    config = VerificationConfig(seed=args.seed, replications=args.replications)
    results = run_suite(suite, config=config,
                        progress=lambda s: print(f"running {s} ...", file=sys.stderr, flush=True))
    failed = []
    for r in results:
        for c in r.claims:
            val = "" if c.value is None else f" value={c.value:.6g}"
            print(f"{'PASS' if c.passed else 'FAIL'} {c.id}{val}")
        failed += r.failed_ids()
    out = Path(args.out or "verify.json")
    write_json(out, {"suite": suite, "passed": not failed, "failed": failed,
                     "suites": [r.to_dict() for r in results]})
    _finish(RunManifest("verify", {"suite": suite, "replications": args.replications}, args.seed), start, [out])
    if failed:
        print("failed claims: " + ", ".join(failed), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_generate(args) -> int:
    start = time.perf_counter()
    spec = _load_spec(args.spec)
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    data = generate(spec, args.n, args.seed)
    out = Path(args.out or "data.csv")
    write_csv(out, list(data.columns) + ["y"], (list(map(float, x)) + [float(y)]
                                               for x, y in zip(data.features, data.response)))
    _finish(RunManifest("generate", {"spec": spec.to_dict(), "n": args.n}, args.seed), start, [out])
    return EXIT_OK


# parser -----------------------------------------------------------------------------


def _growth_flags(p, forest: bool = True):
    p.add_argument("--nodesize", type=int, help="minimum leaf size")
    p.add_argument("--maxnodes", type=int, help="maximum number of leaves")
    p.add_argument("--max-depth", type=int)
    p.add_argument("--min-decrease", type=float, help="minimum decrease relative to the root impurity")
    if forest:
        p.add_argument("--forest", action="store_true", help="fit a bagged forest instead of one tree")
        p.add_argument("--ntree", type=int, default=100)
        p.add_argument("--mtry", type=int)
        p.add_argument("--no-bootstrap", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cartmdi", description="CART trees, impurity-based importance and population split analysis.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit a tree or forest to a CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--kind", choices=("auto", "continuous", "binary"), default="auto")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    _growth_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict with a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("importance", help="global and per-leaf importance of a fitted tree")
    p.add_argument("--model", required=True)
    p.add_argument("--weights", choices=("unit", "w1-plugin"), default="unit")
    p.add_argument("--data", help="training CSV (needed for plug-in weights)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_importance)

    p = sub.add_parser("figure1", help="bootstrap-averaged importance against median subnode length")
    p.add_argument("--data")
    p.add_argument("--response")
    p.add_argument("--kind", choices=("auto", "continuous", "binary"), default="auto")
    p.add_argument("--spec", help="synthetic model spec (JSON file or inline) instead of --data")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("-B", "--trees", dest="B", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    _growth_flags(p, forest=False)
    p.set_defaults(func=cmd_figure1)

    p = sub.add_parser("population", help="population-optimal split analysis")
    p.add_argument("--spec", required=True, help="model spec JSON file or inline JSON")
    p.add_argument("--feature", type=int, default=0)
    p.add_argument("--lower", type=float, nargs="+")
    p.add_argument("--upper", type=float, nargs="+")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--grid", type=int, default=512)
    p.add_argument("--curve-points", type=int, default=400)
    p.add_argument("--out")
    p.set_defaults(func=cmd_population)

    p = sub.add_parser("verify", help="run verification suites")
    p.add_argument("suite_pos", nargs="?", metavar="SUITE")
    p.add_argument("--suite", default="all", help=f"one of {', '.join(SUITES + ('all',))}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replications", type=int, default=500)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("generate", help="sample a synthetic dataset")
    p.add_argument("--spec", required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"cartmdi {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, SpecError) as exc:
        print(f"cartmdi {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"cartmdi {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
