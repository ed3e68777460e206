"""Difference, Window and Shift operators plus the ratio/square helpers.

All kernels are pure functions of :class:`FeatureSeries`. Warmup and order are
propagated analytically; presence is propagated from the input masks. Sums
inside windows are correctly rounded (``math.fsum``) so results do not depend
on summation order.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import EmptyContentError, ParameterError, ShapeError
from .series import FeatureSeries


class WindowStat(str, Enum):
    MEAN = "mean"
    MAX = "max"
    MIN = "min"
    SUM = "sum"
    STD = "std"
    EWM = "ewm"

    @property
    def func_name(self) -> str:
        return "ewm" if self is WindowStat.EWM else "w" + self.value


WINDOW_FUNCS = {s.func_name: s for s in WindowStat}


def _check_positive(name: str, k) -> int:
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 1:
        raise ParameterError(f"{name} must be a positive integer, got {k!r}")
    return int(k)


def _check_same_length(a: FeatureSeries, b: FeatureSeries) -> None:
    if len(a) != len(b):
        raise ShapeError(f"length mismatch: {len(a)} vs {len(b)}")


def _finish(values: np.ndarray, present: np.ndarray, *, name: str | None,
            order: int, warmup: int, lineage: str) -> FeatureSeries:
    present = present & np.isfinite(values)
    present[:min(warmup, len(present))] = False
    out = np.where(present, values, np.nan)
    return FeatureSeries(name or lineage, order, out, present, warmup, lineage)


def ewm_weights(w: int) -> np.ndarray:
    """Normalised weights for lags 0..w-1 (index 0 is the newest sample)."""
    alpha = 2.0 / (w + 1)
    raw = [(1.0 - alpha) ** j for j in range(w)]
    total = math.fsum(raw)
    return np.array([r / total for r in raw])


def shift(s: FeatureSeries, k: int, name: str | None = None) -> FeatureSeries:
    """``out[t] = s[t-k]``; only backward (lagging) shifts are allowed."""
    k = _check_positive("shift", k)
    T = len(s)
    if k >= T:
        raise EmptyContentError(f"shift by {k} leaves no samples of a length-{T} series")
    values = np.full(T, np.nan)
    present = np.zeros(T, dtype=bool)
    values[k:] = s.values[:-k]
    present[k:] = s.present[:-k]
    return _finish(values, present, name=name, order=s.order,
                   warmup=s.warmup + k, lineage=f"shift({s.lineage},{k})")


def _window_stat(rows: list[list[float]], stat: WindowStat, w: int) -> list[float]:
    if stat is WindowStat.SUM:
        return [math.fsum(r) for r in rows]
    if stat is WindowStat.MEAN:
        return [math.fsum(r) / w for r in rows]
    if stat is WindowStat.MAX:
        return [max(r) for r in rows]
    if stat is WindowStat.MIN:
        return [min(r) for r in rows]
    if stat is WindowStat.STD:
        out = []
        for r in rows:
            m = math.fsum(r) / w
            out.append(math.sqrt(math.fsum((x - m) ** 2 for x in r) / w))
        return out
    if stat is WindowStat.EWM:
        wts = ewm_weights(w)[::-1].tolist()   # rows run oldest -> newest
        return [math.fsum(x * c for x, c in zip(r, wts)) for r in rows]
    raise ParameterError(f"unknown window statistic {stat!r}")


def window(s: FeatureSeries, w: int, stat: WindowStat | str = WindowStat.MEAN,
           name: str | None = None) -> FeatureSeries:
    """Summary statistic over the trailing ``w`` samples ``s[t-w+1..t]``.

    Defined only where all ``w`` samples are present. ``std`` uses the
    population divisor ``w``; ``ewm`` uses weights ``(1-a)**lag`` with
    ``a = 2/(w+1)``, normalised inside the window.
    """
    w = _check_positive("window lookback", w)
    stat = WindowStat(stat)
    T = len(s)
    values = np.full(T, np.nan)
    present = np.zeros(T, dtype=bool)
    if w <= T:
        gaps = np.concatenate([[0], np.cumsum(~s.present)])
        full = (gaps[w:] - gaps[:-w]) == 0          # window ending at t = w-1 .. T-1
        idx = np.flatnonzero(full)
        if idx.size:
            rows = sliding_window_view(s.values, w)[idx].tolist()
            values[idx + w - 1] = _window_stat(rows, stat, w)
            present[idx + w - 1] = True
    return _finish(values, present, name=name, order=s.order, warmup=s.warmup + w - 1,
                   lineage=f"{stat.func_name}({s.lineage},{w})")


def difference(a: FeatureSeries, b: FeatureSeries, smoothing: int = 1,
               name: str | None = None) -> FeatureSeries:
    """Smooth both inputs with a trailing mean, then subtract. Raises the order by one."""
    _check_same_length(a, b)
    smoothing = _check_positive("difference smoothing", smoothing)
    if smoothing > 1:
        a_s, b_s = window(a, smoothing, WindowStat.MEAN), window(b, smoothing, WindowStat.MEAN)
        lineage = f"diff({a.lineage},{b.lineage},{smoothing})"
    else:
        a_s, b_s = a, b
        lineage = f"diff({a.lineage},{b.lineage})"
    present = a_s.present & b_s.present
    values = np.where(present, a_s.values - b_s.values, np.nan)
    return _finish(values, present, name=name, order=max(a.order, b.order) + 1,
                   warmup=max(a.warmup, b.warmup) + smoothing - 1, lineage=lineage)


def ratio(a: FeatureSeries, b: FeatureSeries, name: str | None = None) -> FeatureSeries:
    """``a / b``; missing wherever ``b`` is exactly zero."""
    _check_same_length(a, b)
    present = a.present & b.present & (b.values != 0)
    with np.errstate(all="ignore"):
        values = np.where(present, a.values / np.where(present, b.values, 1.0), np.nan)
    return _finish(values, present, name=name, order=max(a.order, b.order),
                   warmup=max(a.warmup, b.warmup), lineage=f"ratio({a.lineage},{b.lineage})")


def square(a: FeatureSeries, name: str | None = None) -> FeatureSeries:
    with np.errstate(over="ignore"):
        values = np.where(a.present, a.values * a.values, np.nan)
    return _finish(values, a.present.copy(), name=name, order=a.order,
                   warmup=a.warmup, lineage=f"square({a.lineage})")
