"""Order-by-order execution of a feature program over a panel."""

from __future__ import annotations

import json
import logging
import os
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .dsl import Call, Expr, FeatureProgram, Raw, Ref, parse_expr
from .errors import EmptyContentError, EmptyOutputError, ResolutionError
from .series import FeatureMatrix, FeatureSeries, Panel, drop_warmup, series_from_row, write_csv

log = logging.getLogger(__name__)


@dataclass
class GenerationReport:
    counts_by_order: dict[int, int]
    n_features: int
    max_warmup: int
    duration_s: float
    program_hash: str
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        d = asdict(self)
        d["counts_by_order"] = {str(k): v for k, v in sorted(self.counts_by_order.items())}
        return json.dumps(d, indent=2)


def _missing_like(T: int, order: int, warmup: int, lineage: str) -> FeatureSeries:
    return FeatureSeries(lineage, order, np.full(T, np.nan), np.zeros(T, dtype=bool),
                         warmup, lineage)


def evaluate(expr: Expr, raw: FeatureSeries, env: dict[str, FeatureSeries],
             cache: dict | None = None) -> FeatureSeries:
    """Evaluate one expression against a raw series and already-computed named features."""
    if cache is not None and expr in cache:
        return cache[expr]
    if isinstance(expr, Raw):
        out = raw
    elif isinstance(expr, Ref):
        try:
            out = env[expr.name]
        except KeyError:
            raise ResolutionError(f"unresolved reference {expr.name!r}") from None
    else:
        ins = [evaluate(c, raw, env, cache) for c in expr.exprs]
        ints = expr.ints
        f = expr.func
        if f == "shift":
            try:
                out = kernels.shift(ins[0], ints[0])
            except EmptyContentError:
                s = ins[0]
                out = _missing_like(len(s), s.order, s.warmup + ints[0],
                                    f"shift({s.lineage},{ints[0]})")
        elif f in kernels.WINDOW_FUNCS:
            out = kernels.window(ins[0], ints[0], kernels.WINDOW_FUNCS[f])
        elif f == "diff":
            out = kernels.difference(ins[0], ins[1], ints[0] if ints else 1)
        elif f == "ratio":
            out = kernels.ratio(ins[0], ins[1])
        elif f == "square":
            out = kernels.square(ins[0])
        else:   # parser rejects unknown functions; keep the evaluator total anyway
            raise ResolutionError(f"no kernel for {f!r}")
    if cache is not None:
        cache[expr] = out
    return out


def evaluate_lineage(lineage: str, values: np.ndarray, present: np.ndarray) -> FeatureSeries:
    """Rebuild a feature from its lineage string alone."""
    return evaluate(parse_expr(lineage), series_from_row(values, present), {}, {})


def _generate_variate(panel: Panel, i: int, program: FeatureProgram) -> list[FeatureSeries]:
    raw = series_from_row(*panel.row(i))
    env: dict[str, FeatureSeries] = {}
    cache: dict = {}
    out = []
    for feat in program.plan:
        try:
            s = evaluate(feat.expr, raw, env, cache)
        except ResolutionError as exc:
            raise ResolutionError(f"feature {feat.name!r} (order {feat.order}): {exc}") from None
        s = s.renamed(feat.name)
        env[feat.name] = s
        out.append(s)
    return out


def _threads(requested: int | None) -> int:
    if requested is not None:
        return max(1, requested)
    try:
        return max(1, int(os.environ.get("FEATPROG_THREADS", "1")))
    except ValueError:
        return 1


def generate(panel: Panel, program: FeatureProgram,
             threads: int | None = None) -> tuple[FeatureMatrix, GenerationReport]:
    """Run ``program`` on every variate of ``panel``.

    Variates are independent; with ``threads > 1`` (or ``FEATPROG_THREADS``)
    they are computed concurrently, but results are assembled in variate
    order so the output does not depend on scheduling.
    """
    t0 = time.perf_counter()
    n = _threads(threads)
    if n > 1 and panel.n_variates > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(lambda i: _generate_variate(panel, i, program),
                                 range(panel.n_variates)))
    else:
        rows = [_generate_variate(panel, i, program) for i in range(panel.n_variates)]
    matrix = FeatureMatrix(panel, tuple(tuple(r) for r in rows), program.hash)

    warnings = []
    T = panel.length
    for s in rows[0] if rows else []:
        if s.warmup >= T:
            warnings.append(f"feature {s.name!r} has warmup {s.warmup} >= T={T}; emitted fully missing")
    for w in warnings:
        log.warning(w)
    report = GenerationReport(
        counts_by_order=dict(sorted(Counter(p.order for p in program.plan).items())),
        n_features=len(program.plan),
        max_warmup=matrix.max_warmup,
        duration_s=time.perf_counter() - t0,
        program_hash=program.hash,
        warnings=warnings)
    return matrix, report


def export_features(matrix: FeatureMatrix, drop_warmup_rows: bool = False) -> str:
    """Wide CSV with ``<variate>::<feature>`` columns, variate-major."""
    if drop_warmup_rows:
        matrix = drop_warmup(matrix)
    if matrix.n_features == 0 or matrix.length == 0:
        raise EmptyOutputError("feature matrix is empty")
    header, cols = [], []
    for vname, feats in zip(matrix.panel.names, matrix.features):
        for f in feats:
            header.append(f"{vname}::{f.name}")
            cols.append((f.values, f.present))
    return write_csv(header, matrix.panel.time_index, cols)
