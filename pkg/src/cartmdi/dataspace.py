"""Datasets, hyperrectangle nodes, CSV ingestion and synthetic generators."""

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .distributions import Marginal, get_marginal

CONTINUOUS = "continuous"
BINARY = "binary"


class DataError(ValueError):
    """Malformed input data (parse failures, bad labels)."""


class SpecError(ValueError):
    """Invalid synthetic model specification."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    response: np.ndarray
    kind: str = CONTINUOUS
    columns: tuple = ()

    def __post_init__(self):
        X = np.asfortranarray(np.array(self.features, dtype=np.float64, ndmin=2))
        y = np.array(self.response, dtype=np.float64).ravel()
        n, d = X.shape
        if n < 1 or d < 1:
            raise DataError("dataset needs at least one row and one feature")
        if y.shape[0] != n:
            raise DataError(f"response length {y.shape[0]} does not match {n} rows")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise DataError("features and response must be finite")
        if X.min() < 0.0 or X.max() > 1.0:
            raise DataError("features must lie in [0, 1]; standardize first")
        if self.kind not in (CONTINUOUS, BINARY):
            raise DataError(f"unknown response kind {self.kind!r}")
        if self.kind == BINARY and not np.all(np.isin(y, (-1.0, 1.0))):
            raise DataError("binary responses must be -1 or +1")
        columns = tuple(self.columns) or tuple(f"x{j + 1}" for j in range(d))
        if len(columns) != d:
            raise DataError("one column name per feature is required")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "response", _frozen(y))
        object.__setattr__(self, "columns", columns)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.intp)
        return Dataset(self.features[rows], self.response[rows], self.kind, self.columns)


@dataclass(frozen=True, eq=False)
class NodeRegion:
    """Axis-aligned box ``prod [lower_j, upper_j]`` plus the rows it holds."""

    lower: np.ndarray
    upper: np.ndarray
    rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.intp))

    def __post_init__(self):
        lower = np.array(self.lower, dtype=np.float64)
        upper = np.array(self.upper, dtype=np.float64)
        rows = np.array(self.rows, dtype=np.intp).ravel()
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("lower and upper must be vectors of equal length")
        if np.any(lower >= upper):
            raise ValueError("degenerate region: need lower < upper in every coordinate")
        if rows.size > 1 and np.any(np.diff(rows) <= 0):
            raise ValueError("rows must be sorted and duplicate-free")
        object.__setattr__(self, "lower", _frozen(lower))
        object.__setattr__(self, "upper", _frozen(upper))
        object.__setattr__(self, "rows", _frozen(rows))

    @classmethod
    def root(cls, data: Optional[Dataset] = None, d: Optional[int] = None) -> "NodeRegion":
        d = data.d if data is not None else d
        rows = np.arange(data.n) if data is not None else np.zeros(0, dtype=np.intp)
        return cls(np.zeros(d), np.ones(d), rows)

    @property
    def size(self) -> int:
        return self.rows.size

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.all((x >= self.lower) & (x <= self.upper), axis=1)

    def split(self, data: Dataset, feature: int, threshold: float):
        """Children ``{x_j <= s}`` and ``{x_j > s}``; raises if either would be degenerate."""
        col = data.features[self.rows, feature]
        go_left = col <= threshold
        left_upper = self.upper.copy()
        left_upper[feature] = threshold
        right_lower = self.lower.copy()
        right_lower[feature] = threshold
        left = NodeRegion(self.lower, left_upper, self.rows[go_left])
        right = NodeRegion(right_lower, self.upper, self.rows[~go_left])
        return left, right

    def members(self, data: Dataset) -> np.ndarray:
        """Rows of ``data`` inside the box (recomputed from the bounds)."""
        return np.flatnonzero(self.contains(data.features))


# CSV ingestion -------------------------------------------------------------------


@dataclass(frozen=True)
class MinMaxScaling:
    """Column-wise map onto [0, 1] learned from training features; constant columns map to 0."""

    lower: tuple
    span: tuple

    @classmethod
    def fit(cls, X) -> "MinMaxScaling":
        X = np.asarray(X, dtype=np.float64)
        lo = X.min(axis=0)
        return cls(tuple(lo.tolist()), tuple((X.max(axis=0) - lo).tolist()))

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        lo, span = np.asarray(self.lower), np.asarray(self.span)
        if X.shape[1] != lo.size:
            raise DataError(f"expected {lo.size} feature columns, got {X.shape[1]}")
        out = np.zeros_like(X)
        ok = span > 0
        out[:, ok] = (X[:, ok] - lo[ok]) / span[ok]
        return np.clip(out, 0.0, 1.0)

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "span": list(self.span)}

    @classmethod
    def from_dict(cls, doc: dict) -> "MinMaxScaling":
        return cls(tuple(doc["lower"]), tuple(doc["span"]))


def standardize(X: np.ndarray) -> np.ndarray:
    """Column-wise min-max scaling to [0, 1]; constant columns map to 0."""
    return MinMaxScaling.fit(X).transform(X)


def read_table(path) -> tuple:
    """(header, values) of a numeric CSV with a header row; errors name the row and column."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = []
        for lineno, record in enumerate(reader, start=2):
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != len(header):
                raise DataError(f"{path}: row {lineno} has {len(record)} cells, expected {len(header)}")
            values = []
            for col, cell in zip(header, record):
                cell = cell.strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"{path}: row {lineno}, column {col!r}: non-numeric value {cell!r}") from None
                if not math.isfinite(v):
                    raise DataError(f"{path}: row {lineno}, column {col!r}: missing or non-finite value")
                values.append(v)
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return header, np.array(rows)


def load_csv(path, response_column: str, standardize_features: bool = True, kind: str = "auto") -> Dataset:
    """Read a numeric CSV with a header row.

    ``kind`` is ``"continuous"``, ``"binary"`` or ``"auto"`` (binary when every
    label is -1/+1 and both occur).  Binary labels coded 0/1 are mapped to -1/+1.
    """
    header, table = read_table(path)
    if response_column not in header:
        raise DataError(f"{path}: response column {response_column!r} not in header {header}")
    yi = header.index(response_column)
    y = table[:, yi]
    X = np.delete(table, yi, axis=1)
    columns = tuple(h for i, h in enumerate(header) if i != yi)
    if X.shape[1] == 0:
        raise DataError(f"{path}: no feature columns")
    if standardize_features:
        X = standardize(X)

    labels = set(np.unique(y).tolist())
    if kind == "auto":
        kind = BINARY if labels == {-1.0, 1.0} else CONTINUOUS
    if kind == BINARY:
        if labels <= {0.0, 1.0}:
            y = 2.0 * y - 1.0
            labels = set(np.unique(y).tolist())
        if not labels <= {-1.0, 1.0}:
            raise DataError(f"{path}: binary response must be coded -1/+1 (or 0/1), got {sorted(labels)}")
        if len(labels) < 2:
            raise DataError(f"{path}: binary response is constant; both classes are required")
    return Dataset(X, y, kind, columns)


# Synthetic models ----------------------------------------------------------------

FAMILIES = ("polynomial", "shifted-polynomial", "sine", "friedman1", "logistic", "linear")


@dataclass(frozen=True)
class Block:
    """An additive component of the regression function acting on ``coords``.

    ``fn`` maps an ``(m, len(coords))`` array to ``m`` values; ``grad(X, i)``
    is the partial derivative with respect to ``coords[i]``.
    """

    coords: tuple
    fn: Callable
    grad: Optional[Callable] = None


def _vec(value, d: int, name: str):
    if value is None:
        raise SpecError(f"missing parameter {name!r}")
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.repeat(arr, d)
    if arr.size != d:
        raise SpecError(f"parameter {name!r} needs {d} entries, got {arr.size}")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class SyntheticModelSpec:
    family: str
    d: int = 1
    beta: tuple = ()
    k: tuple = ()
    shift: tuple = ()
    m: tuple = ()
    beta0: float = 0.0
    noise: float = 0.0
    distribution: tuple = ("uniform",)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise SpecError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if int(self.d) < 1:
            raise SpecError("d must be >= 1")
        d = int(self.d)
        object.__setattr__(self, "d", d)
        if self.family == "friedman1" and d < 5:
            raise SpecError("friedman1 requires d >= 5")
        if not (self.noise >= 0.0 and math.isfinite(self.noise)):
            raise SpecError("noise standard deviation must be >= 0")
        dist = self.distribution
        if isinstance(dist, str):
            dist = (dist,)
        dist = tuple(get_marginal(x).name for x in dist)
        if len(dist) == 1:
            dist = dist * d
        if len(dist) != d:
            raise SpecError(f"distribution needs 1 or {d} entries")
        object.__setattr__(self, "distribution", dist)

        for key in ("beta", "k", "shift", "m"):
            val = getattr(self, key)
            if not isinstance(val, tuple):
                object.__setattr__(self, key, tuple(np.atleast_1d(np.asarray(val, dtype=float)).tolist()))
        fam = self.family
        if fam in ("polynomial", "shifted-polynomial", "sine", "linear", "logistic"):
            object.__setattr__(self, "beta", _vec(self.beta if len(self.beta) else 1.0, d, "beta"))
        if fam in ("polynomial", "shifted-polynomial"):
            k = _vec(self.k, d, "k")
            if any(v < 0 or v != int(v) for v in k):
                raise SpecError("polynomial degrees must be non-negative integers")
            object.__setattr__(self, "k", tuple(int(v) for v in k))
        if fam == "shifted-polynomial":
            object.__setattr__(self, "shift", _vec(self.shift, d, "shift"))
        if fam == "sine":
            m = _vec(self.m, d, "m")
            if any(v < 0 or v != int(v) for v in m):
                raise SpecError("sine frequencies must be non-negative integers")
            object.__setattr__(self, "m", tuple(int(v) for v in m))

    @property
    def kind(self) -> str:
        return BINARY if self.family == "logistic" else CONTINUOUS

    @property
    def marginals(self):
        return tuple(get_marginal(x) for x in self.distribution)

    @property
    def strong_set(self) -> tuple:
        """Coordinates the regression function actually depends on."""
        return tuple(sorted({c for b in model_blocks(self) for c in b.coords}))

    def to_dict(self) -> dict:
        out = {"family": self.family, "d": self.d, "noise": self.noise, "distribution": list(self.distribution)}
        for key in ("beta", "k", "shift", "m"):
            val = getattr(self, key)
            if len(val):
                out[key] = list(val)
        if self.family == "logistic":
            out["beta0"] = self.beta0
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "SyntheticModelSpec":
        allowed = {"family", "d", "beta", "k", "shift", "m", "beta0", "noise", "distribution"}
        unknown = set(doc) - allowed
        if unknown:
            raise SpecError(f"unknown spec fields {sorted(unknown)}")
        kw = dict(doc)
        for key in ("beta", "k", "shift", "m"):
            if key in kw:
                kw[key] = tuple(np.atleast_1d(kw[key]).tolist())
        if "distribution" in kw and not isinstance(kw["distribution"], str):
            kw["distribution"] = tuple(kw["distribution"])
        return cls(**kw)

    @classmethod
    def from_json(cls, text: str) -> "SyntheticModelSpec":
        return cls.from_dict(json.loads(text))

    def regression(self, X) -> np.ndarray:
        """E[Y | X]; for the logistic family this is 2 P[Y=+1|X] - 1."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.zeros(X.shape[0])
        for b in model_blocks(self):
            out += b.fn(X[:, list(b.coords)])
        return out + _offset(self)

    def probability(self, X) -> np.ndarray:
        if self.family != "logistic":
            raise SpecError("class probabilities exist only for the logistic family")
        return 0.5 * (self.regression(X) + 1.0)


def _offset(spec: SyntheticModelSpec) -> float:
    """Constant part dropped from the blocks (degree-0 terms)."""
    if spec.family == "polynomial":
        return sum(b for b, k in zip(spec.beta, spec.k) if k == 0)
    if spec.family == "shifted-polynomial":
        return sum(b for b, k in zip(spec.beta, spec.k) if k == 0)
    return 0.0


def _power_block(j, beta, k, shift=0.0):
    return Block(
        (j,),
        lambda X: beta * (X[:, 0] - shift) ** k,
        lambda X, i: beta * k * (X[:, 0] - shift) ** (k - 1),
    )


def _sine_block(j, beta, m):
    w = 2.0 * math.pi * m
    return Block((j,), lambda X: beta * np.sin(w * X[:, 0]), lambda X, i: beta * w * np.cos(w * X[:, 0]))


def _friedman_blocks():
    def f12(X):
        return 10.0 * np.sin(math.pi * X[:, 0] * X[:, 1])

    def g12(X, i):
        return 10.0 * math.pi * X[:, 1 - i] * np.cos(math.pi * X[:, 0] * X[:, 1])

    return [
        Block((0, 1), f12, g12),
        _power_block(2, 20.0, 2, 0.5),
        _power_block(3, 10.0, 1),
        _power_block(4, 5.0, 1),
    ]


def _logistic_block(spec):
    coords = tuple(j for j, b in enumerate(spec.beta) if b != 0.0)
    beta = np.array([spec.beta[j] for j in coords])
    b0 = spec.beta0

    def prob(X):
        return 1.0 / (1.0 + np.exp(-(b0 + X @ beta)))

    return Block(
        coords,
        lambda X: 2.0 * prob(X) - 1.0,
        lambda X, i: 2.0 * beta[i] * prob(X) * (1.0 - prob(X)),
    )


def model_blocks(spec: SyntheticModelSpec) -> list:
    fam = spec.family
    if fam == "friedman1":
        return _friedman_blocks()
    if fam == "logistic":
        return [_logistic_block(spec)] if any(spec.beta) else []
    blocks = []
    for j in range(spec.d):
        beta = spec.beta[j]
        if beta == 0.0:
            continue
        if fam == "linear":
            blocks.append(_power_block(j, beta, 1))
        elif fam == "polynomial" and spec.k[j] > 0:
            blocks.append(_power_block(j, beta, spec.k[j]))
        elif fam == "shifted-polynomial" and spec.k[j] > 0:
            blocks.append(_power_block(j, beta, spec.k[j], spec.shift[j]))
        elif fam == "sine" and spec.m[j] > 0:
            blocks.append(_sine_block(j, beta, spec.m[j]))
    return blocks


def generate(spec: SyntheticModelSpec, n: int, seed: int) -> Dataset:
    """Draw ``n`` i.i.d. samples; deterministic given ``seed``."""
    if n < 1:
        raise SpecError("n must be >= 1")
    rng = np.random.default_rng(seed)
    X = np.empty((n, spec.d))
    for j, marg in enumerate(spec.marginals):
        X[:, j] = marg.sample(rng, n)
    if spec.kind == BINARY:
        p = spec.probability(X)
        y = np.where(rng.random(n) < p, 1.0, -1.0)
    else:
        y = spec.regression(X)
        if spec.noise > 0:
            y = y + spec.noise * rng.standard_normal(n)
    columns = tuple(f"x{j + 1}" for j in range(spec.d))
    return Dataset(X, y, spec.kind, columns)


def marginals_for(spec_or_names: Sequence) -> tuple:
    if isinstance(spec_or_names, SyntheticModelSpec):
        return spec_or_names.marginals
    return tuple(m if isinstance(m, Marginal) else get_marginal(m) for m in spec_or_names)
