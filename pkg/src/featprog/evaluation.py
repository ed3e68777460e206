"""Desk-scale evaluation: chronological split, pooled ridge, R^2 and Pearson."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dsl import FeatureProgram
from .engine import generate
from .errors import InsufficientDataError, ParameterError, ProtocolError, SolverError, UndefinedMetricError
from .kernels import WindowStat, difference, shift, window
from .series import FeatureMatrix, Panel, make_panel, series_from_row
from .spin import SpinGasParams, random_params, simulate_panel

log = logging.getLogger(__name__)

DEFAULT_LAMBDA = 1e-3
MIN_ROWS = 10


@dataclass(frozen=True, eq=False)
class SupervisedTable:
    variate: np.ndarray     # (R,) int
    time: np.ndarray        # (R,) int, position in the panel
    X: np.ndarray           # (R, K)
    y: np.ndarray           # (R,)
    train: np.ndarray       # (R,) bool; False means test
    feature_names: tuple
    program_hash: str = ""

    @property
    def n_train(self) -> int:
        return int(self.train.sum())

    @property
    def n_test(self) -> int:
        return int((~self.train).sum())

    def part(self, train: bool) -> tuple[np.ndarray, np.ndarray]:
        m = self.train if train else ~self.train
        return self.X[m], self.y[m]

    def test_keys(self) -> np.ndarray:
        m = ~self.train
        return np.stack([self.variate[m], self.time[m]], axis=1)


def split_point(n_usable: int, split: float) -> int:
    """Number of leading usable time steps that go to training."""
    if not 0 < split < 1:
        raise ParameterError(f"split must lie in (0, 1), got {split}")
    # rounding guards against 0.7 * 100 == 70.00000000000001
    return math.ceil(round(split * n_usable, 9))


def build_table(panel: Panel, matrix: FeatureMatrix, split: float = 0.8,
                targets: Panel | None = None, start: int | None = None) -> SupervisedTable:
    """Pool (variate, t) rows with features at ``t`` and the one-step-ahead target.

    The target is ``panel[i, t+1]`` unless an aligned ``targets`` panel is
    given, in which case it is ``targets[i, t]``. Usable times run from the
    warmup (or ``start``) to ``T-2``; the first ``ceil(split * T_usable)`` of
    them are train, the rest test. Rows with any missing value are dropped
    after the split is fixed, so membership depends only on the shape.
    """
    T = panel.length
    if matrix.length != T:
        raise ProtocolError("feature matrix and panel lengths differ")
    if targets is not None and (targets.length != T or targets.n_variates != panel.n_variates):
        raise ProtocolError("targets panel must match the input panel shape")
    start = matrix.max_warmup if start is None else start
    n_usable = max(0, T - 1 - start)
    cut = start + split_point(n_usable, split)

    vals, pres = matrix.tensor()        # (N, K, T)
    times = np.arange(start, T - 1)
    rows_v, rows_t, Xs, ys = [], [], [], []
    for i in range(panel.n_variates):
        if targets is None:
            y, yp = panel.values[i, times + 1], panel.present[i, times + 1]
        else:
            y, yp = targets.values[i, times], targets.present[i, times]
        X = vals[i][:, times].T
        ok = yp & pres[i][:, times].all(axis=0)
        rows_v.append(np.full(ok.sum(), i))
        rows_t.append(times[ok])
        Xs.append(X[ok])
        ys.append(y[ok])
    variate = np.concatenate(rows_v) if rows_v else np.zeros(0, int)
    time_ = np.concatenate(rows_t) if rows_t else np.zeros(0, int)
    X = np.concatenate(Xs) if Xs else np.zeros((0, matrix.n_features))
    y = np.concatenate(ys) if ys else np.zeros(0)
    train = time_ < cut
    if len(y) < MIN_ROWS or not train.any() or train.all():
        raise InsufficientDataError(f"only {len(y)} usable rows ({int(train.sum())} train) "
                                    f"after dropping warmup and missing samples")
    return SupervisedTable(variate, time_, X, y, train, matrix.feature_names, matrix.program_hash)


# -- ridge -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RidgeModel:
    weights: np.ndarray       # on standardized features
    intercept: float
    lam: float
    mean: np.ndarray
    scale: np.ndarray

    def coefficients(self) -> tuple[np.ndarray, float]:
        """Weights and intercept expressed on the original feature scale."""
        w = self.weights / self.scale
        return w, self.intercept - float(self.mean @ w)


def ridge_fit(X: np.ndarray, y: np.ndarray, lam: float = DEFAULT_LAMBDA) -> RidgeModel:
    """Closed-form ridge on train-standardized features with an unpenalized intercept."""
    if lam < 0 or not np.isfinite(lam):
        raise ParameterError(f"lambda must be >= 0, got {lam}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    if n < k:
        log.warning("ridge: %d training rows for %d features", n, k)
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    Z = (X - mean) / scale
    ybar = float(y.mean())
    gram = Z.T @ Z + lam * np.eye(k)
    if lam == 0 and np.linalg.matrix_rank(gram) < k:
        raise SolverError("normal matrix is singular at lambda=0; use lambda > 0")
    try:
        w = np.linalg.solve(gram, Z.T @ (y - ybar))
    except np.linalg.LinAlgError:
        raise SolverError("normal matrix is singular; use lambda > 0") from None
    return RidgeModel(w, ybar, lam, mean, scale)


def ridge_predict(model: RidgeModel, X: np.ndarray) -> np.ndarray:
    return ((np.asarray(X, dtype=float) - model.mean) / model.scale) @ model.weights + model.intercept


# -- metrics -----------------------------------------------------------------

def _pair(actual, predicted) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape or a.ndim != 1 or len(a) < 2:
        raise UndefinedMetricError("metrics need two equal-length sequences of at least 2 samples")
    return a, p


def r2(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0:
        raise UndefinedMetricError("R^2 undefined for constant actual values")
    return 1.0 - float(np.sum((a - p) ** 2)) / ss_tot


def pearson(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    da, dp = a - a.mean(), p - p.mean()
    saa, spp = float(da @ da), float(dp @ dp)
    if saa == 0:
        raise UndefinedMetricError("Pearson correlation undefined for constant actual values")
    if spp == 0:
        raise UndefinedMetricError("Pearson correlation undefined for constant predictions")
    # one square root of the product is exact when a == p
    return max(-1.0, min(1.0, float(da @ dp) / math.sqrt(saa * spp)))


# -- comparison --------------------------------------------------------------

@dataclass
class EvalResult:
    r2: float
    pearson: float
    n_train: int
    n_test: int
    n_features: int
    program_hash: str
    test_keys: np.ndarray


def evaluate_table(table: SupervisedTable, lam: float = DEFAULT_LAMBDA) -> EvalResult:
    model = ridge_fit(*table.part(True), lam=lam)
    Xte, yte = table.part(False)
    pred = ridge_predict(model, Xte)
    return EvalResult(r2(yte, pred), pearson(yte, pred), table.n_train, table.n_test,
                      table.X.shape[1], table.program_hash, table.test_keys())


def compare(basic: EvalResult, extended: EvalResult, lam: float = DEFAULT_LAMBDA) -> dict:
    """Side-by-side report; both results must cover the same test rows."""
    if not np.array_equal(basic.test_keys, extended.test_keys):
        raise ProtocolError("basic and extended results were evaluated on different test rows")
    return {
        "r2_basic": basic.r2, "r2_ext": extended.r2,
        "pearson_basic": basic.pearson, "pearson_ext": extended.pearson,
        "delta_r2": extended.r2 - basic.r2,
        "delta_pearson": extended.pearson - basic.pearson,
        "n_train": extended.n_train, "n_test": extended.n_test,
        "k_basic": basic.n_features, "k_ext": extended.n_features,
        "lambda": lam,
        "program_hash": extended.program_hash,
        "program_hash_basic": basic.program_hash,
    }


def format_report(report: dict) -> str:
    lines = [f"{'':10s}{'basic':>12s}{'extended':>12s}{'delta':>12s}"]
    for label, key in (("R2", "r2"), ("Pearson", "pearson")):
        b, e = report[f"{key}_basic"], report[f"{key}_ext"]
        lines.append(f"{label:10s}{b:12.6f}{e:12.6f}{e - b:+12.6f}")
    lines.append(f"rows: train={report['n_train']} test={report['n_test']}  "
                 f"K: basic={report['k_basic']} ext={report['k_ext']}  lambda={report['lambda']:g}")
    return "\n".join(lines)


def run_comparison(panel: Panel, basic: FeatureProgram, extended: FeatureProgram,
                   split: float = 0.8, lam: float = DEFAULT_LAMBDA,
                   targets: Panel | None = None) -> dict:
    """Evaluate two programs on identical rows (the later of their two warmups)."""
    mb, _ = generate(panel, basic)
    me, _ = generate(panel, extended)
    start = max(mb.max_warmup, me.max_warmup)
    tb = build_table(panel, mb, split, targets, start)
    te = build_table(panel, me, split, targets, start)
    # rows with interior gaps in one feature set must be dropped from both
    kb = {tuple(k) for k in zip(tb.variate, tb.time)}
    ke = {tuple(k) for k in zip(te.variate, te.time)}
    common = kb & ke
    if common != kb or common != ke:
        tb, te = _restrict(tb, common), _restrict(te, common)
    return compare(evaluate_table(tb, lam), evaluate_table(te, lam), lam)


def _restrict(t: SupervisedTable, keys: set) -> SupervisedTable:
    m = np.array([(v, s) in keys for v, s in zip(t.variate, t.time)], dtype=bool)
    return SupervisedTable(t.variate[m], t.time[m], t.X[m], t.y[m], t.train[m],
                           t.feature_names, t.program_hash)


# -- synthetic data ----------------------------------------------------------

class SyntheticData(NamedTuple):
    inputs: Panel
    targets: Panel
    base: Panel


# input = ma7(base) + 8 * d1(base) + 8 * d2(base)
INPUT_MIX = ((("wmean", 7), 1.0), (("d1",), 8.0), (("d2",), 8.0))
TARGET_CHOICES = (("ewm", 7), ("ewm", 25), ("std", 7), ("std", 25))


def _target_series(base_row, kind: str, w: int):
    stat = WindowStat.EWM if kind == "ewm" else WindowStat.STD
    return window(base_row, w, stat)


def make_synthetic(rng: np.random.Generator, n: int, length: int,
                   params: SpinGasParams | None = None,
                   target_spec: tuple | str = ("ewm", 7)) -> SyntheticData:
    """Synthetic panel whose inputs are a fixed mix of 0th/1st/2nd order views of a hidden base.

    The base is a spin-gas path sum. Inputs are ``ma7 + 8*d1 + 8*d2`` of the
    base; targets are a 0th-order summary of the base (``ewm`` or ``std``
    over a lookback) taken one step ahead, so ``targets[t]`` is the summary
    at ``t+1`` and the last target is missing. ``target_spec="random"`` draws
    the summary from a small menu using ``rng``.
    """
    if target_spec == "random":
        target_spec = TARGET_CHOICES[int(rng.integers(len(TARGET_CHOICES)))]
    kind, w = target_spec
    if kind not in ("ewm", "std"):
        raise ParameterError(f"target kind must be 'ewm' or 'std', got {kind!r}")
    if params is None:
        params = random_params(rng, n, scale=0.3 / math.sqrt(n))
    elif params.n != n:
        raise ParameterError(f"params describe {params.n} spins, expected {n}")
    trim = max(7 - 1, 2, w - 1)
    x0 = rng.normal(0.0, 5.0, n)
    base = simulate_panel(rng, params, x0, length + trim - 1)

    inputs, targets = [], []
    for i in range(n):
        b = series_from_row(*base.row(i))
        d1 = difference(b, shift(b, 1))
        d2 = difference(d1, shift(d1, 1))
        mix = np.zeros(base.length)
        for (spec, coef) in INPUT_MIX:
            part = {"wmean": lambda: window(b, spec[-1], WindowStat.MEAN),
                    "d1": lambda: d1, "d2": lambda: d2}[spec[0]]()
            mix = mix + coef * part.values
        tgt = _target_series(b, kind, w)
        ahead = np.full(base.length, np.nan)
        ahead[:-1] = tgt.values[1:]
        inputs.append(mix[trim:])
        targets.append(ahead[trim:])
    names = [f"s{i}" for i in range(n)]
    return SyntheticData(make_panel(inputs, names=names), make_panel(targets, names=names),
                         base.slice_time(trim))
