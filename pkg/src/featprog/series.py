"""Containers for aligned multivariate series and the features derived from them.

Missing samples are tracked with an explicit boolean ``present`` mask. The
``values`` array holds NaN at missing positions only so that accidental use
shows up loudly; no code path treats NaN as the marker.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyOutputError, IndexOrderError, ShapeError


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Panel:
    """N aligned scalar series of length T."""

    values: np.ndarray          # (N, T) float64, NaN where missing
    present: np.ndarray         # (N, T) bool
    names: tuple[str, ...]
    time_index: tuple = ()

    @property
    def n_variates(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        return self.values[i], self.present[i]

    def select(self, indices: Sequence[int]) -> "Panel":
        idx = list(indices)
        return Panel(_frozen(self.values[idx]), _frozen(self.present[idx]),
                     tuple(self.names[i] for i in idx), self.time_index)

    def slice_time(self, start: int, stop: int | None = None) -> "Panel":
        stop = self.length if stop is None else stop
        return Panel(_frozen(self.values[:, start:stop]),
                     _frozen(self.present[:, start:stop]),
                     self.names, tuple(self.time_index[start:stop]))

    def equals(self, other: "Panel") -> bool:
        return (self.names == other.names
                and self.time_index == other.time_index
                and np.array_equal(self.present, other.present)
                and np.array_equal(self.values[self.present],
                                   other.values[other.present]))


def make_panel(raw, time_index: Iterable | None = None,
               names: Sequence[str] | None = None) -> Panel:
    """Validate an N x T block of samples and wrap it as a :class:`Panel`.

    Non-finite samples (NaN, +-inf, None) become missing. A time index, when
    given, must be strictly increasing.
    """
    rows = [list(r) for r in raw]
    if not rows:
        raise ShapeError("panel needs at least one variate")
    lengths = {len(r) for r in rows}
    if len(lengths) != 1:
        raise ShapeError(f"ragged rows: lengths {sorted(lengths)}")
    T = lengths.pop()
    if T < 1:
        raise ShapeError("panel needs at least one time step")

    values = np.full((len(rows), T), np.nan)
    for i, r in enumerate(rows):
        for t, v in enumerate(r):
            if v is None:
                continue
            v = float(v)
            if math.isfinite(v):
                values[i, t] = v
    present = np.isfinite(values)

    if time_index is None:
        index = tuple(range(T))
    else:
        index = tuple(time_index)
        if len(index) != T:
            raise ShapeError(f"time index has {len(index)} labels for {T} steps")
        for a, b in zip(index, index[1:]):
            if not a < b:
                raise IndexOrderError(f"time index not strictly increasing at {a!r} -> {b!r}")

    if names is None:
        names = tuple(f"x{i}" for i in range(len(rows)))
    else:
        names = tuple(str(n) for n in names)
        if len(names) != len(rows):
            raise ShapeError(f"{len(names)} names for {len(rows)} variates")
        if len(set(names)) != len(names):
            raise ShapeError("variate names must be unique")
    return Panel(_frozen(values), _frozen(present), names, index)


@dataclass(frozen=True, eq=False)
class FeatureSeries:
    name: str
    order: int
    values: np.ndarray
    present: np.ndarray
    warmup: int
    lineage: str

    def __post_init__(self):
        if self.values.flags.writeable:
            object.__setattr__(self, "values", _frozen(self.values))
        if self.present.flags.writeable:
            object.__setattr__(self, "present", _frozen(self.present))

    def __len__(self) -> int:
        return len(self.values)

    def renamed(self, name: str) -> "FeatureSeries":
        return FeatureSeries(name, self.order, self.values, self.present,
                             self.warmup, self.lineage)

    def identical(self, other: "FeatureSeries") -> bool:
        """Bit-level equality of samples, mask and bookkeeping."""
        return (self.warmup == other.warmup
                and self.order == other.order
                and np.array_equal(self.present, other.present)
                and self.values[self.present].tobytes()
                == other.values[other.present].tobytes())

    def as_list(self) -> list[float | None]:
        return [float(v) if p else None for v, p in zip(self.values, self.present)]


def series_from_row(values: np.ndarray, present: np.ndarray, name: str = "raw") -> FeatureSeries:
    """Wrap one panel row as the order-0 ``raw`` series."""
    return FeatureSeries(name, 0, values, present, 0, "raw")


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    panel: Panel
    features: tuple[tuple[FeatureSeries, ...], ...]   # per variate, K each
    program_hash: str = ""
    created: float = field(default_factory=time.time)

    def __post_init__(self):
        if len(self.features) != self.panel.n_variates:
            raise ShapeError("one feature list per variate required")
        names = None
        for feats in self.features:
            these = tuple(f.name for f in feats)
            if len(set(these)) != len(these):
                raise ShapeError("feature names must be unique within a variate")
            if names is None:
                names = these
            elif these != names:
                raise ShapeError("every variate must carry the same features")

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features[0]) if self.features else ()

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def length(self) -> int:
        return self.panel.length

    @property
    def max_warmup(self) -> int:
        return max((f.warmup for feats in self.features for f in feats), default=0)

    def column(self, name: str) -> list[FeatureSeries]:
        k = self.feature_names.index(name)
        return [feats[k] for feats in self.features]

    def tensor(self) -> tuple[np.ndarray, np.ndarray]:
        """(N, K, T) values and presence mask."""
        vals = np.stack([np.stack([f.values for f in feats]) for feats in self.features])
        pres = np.stack([np.stack([f.present for f in feats]) for feats in self.features])
        return vals, pres


def drop_warmup(matrix: FeatureMatrix) -> FeatureMatrix:
    """Truncate every series to ``t >= max warmup`` across all features."""
    start = matrix.max_warmup
    if start >= matrix.length:
        raise EmptyOutputError(f"max warmup {start} leaves nothing of T={matrix.length}")
    if start == 0:
        return matrix
    feats = tuple(
        tuple(FeatureSeries(f.name, f.order, f.values[start:], f.present[start:],
                            max(0, f.warmup - start), f.lineage) for f in row)
        for row in matrix.features)
    return FeatureMatrix(matrix.panel.slice_time(start), feats,
                         matrix.program_hash, matrix.created)


# -- CSV ---------------------------------------------------------------------

def _parse_cell(cell: str) -> float | None:
    cell = cell.strip()
    if cell == "" or cell.lower() == "nan":
        return None
    return float(cell)


def _parse_label(label: str):
    label = label.strip()
    for conv in (int, float):
        try:
            return conv(label)
        except ValueError:
            pass
    return label


def read_panel_csv(text: str) -> Panel:
    """Parse the wide CSV layout: optional leading ``time`` column, one column per variate."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ShapeError("empty CSV: header row required") from None
    header = [h.strip() for h in header]
    has_time = bool(header) and header[0].lower() == "time"
    names = header[1:] if has_time else header
    if not names:
        raise ShapeError("CSV has no variate columns")

    cols: list[list[float | None]] = [[] for _ in names]
    index = []
    for lineno, rec in enumerate(reader, start=2):
        if not rec or all(not c.strip() for c in rec):
            continue
        if len(rec) != len(header):
            raise ShapeError(f"line {lineno}: expected {len(header)} cells, got {len(rec)}")
        if has_time:
            index.append(_parse_label(rec[0]))
            rec = rec[1:]
        try:
            for j, cell in enumerate(rec):
                cols[j].append(_parse_cell(cell))
        except ValueError as exc:
            raise ShapeError(f"line {lineno}: {exc}") from None
    return make_panel(cols, time_index=index if has_time else None, names=names)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_csv(header: Sequence[str], index: Sequence, columns: Sequence[tuple[np.ndarray, np.ndarray]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", *header])
    for t, label in enumerate(index):
        w.writerow([label, *(_fmt(v[t]) if p[t] else "" for v, p in columns)])
    return buf.getvalue()


def panel_to_csv(panel: Panel) -> str:
    return write_csv(panel.names, panel.time_index,
                     [(panel.values[i], panel.present[i]) for i in range(panel.n_variates)])
