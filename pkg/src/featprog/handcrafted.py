"""Reference implementations of MoM, Bias and AbsEnergy, written directly from their formulas.

These deliberately share no code with the operator kernels: every step is a
plain loop over Python floats, and window sums are correctly rounded
(``math.fsum``) so the result does not depend on summation order. They are
the oracle side of the resemblance check.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .engine import generate
from .errors import ParameterError
from .evaluation import pearson, r2
from .programs import RESEMBLANCE, resemblance_program
from .series import Panel

Maybe = list   # of float | None


def momentum_pct(x: Sequence[float | None], dtau: int) -> Maybe:
    """(x_t - x_{t-dtau}) / x_{t-dtau}."""
    out = []
    for t in range(len(x)):
        if t < dtau or x[t] is None or x[t - dtau] is None or x[t - dtau] == 0:
            out.append(None)
        else:
            out.append((x[t] - x[t - dtau]) / x[t - dtau])
    return out


def bias(x: Sequence[float | None], dtau: int) -> Maybe:
    """(x_t - SMA_t) / SMA_t with SMA the trailing mean of dtau samples."""
    out = []
    for t in range(len(x)):
        window = x[t - dtau + 1:t + 1] if t >= dtau - 1 else []
        if len(window) < dtau or any(v is None for v in window):
            out.append(None)
            continue
        sma = math.fsum(window) / dtau
        out.append(None if sma == 0 else (x[t] - sma) / sma)
    return out


def abs_energy(x: Sequence[float | None], dtau: int) -> Maybe:
    """Sum of squares over the trailing dtau samples."""
    out = []
    for t in range(len(x)):
        window = x[t - dtau + 1:t + 1] if t >= dtau - 1 else []
        if len(window) < dtau or any(v is None for v in window):
            out.append(None)
        else:
            out.append(math.fsum(v * v for v in window))
    return out


HANDCRAFTED = {"mom": momentum_pct, "bias": bias, "absenergy": abs_energy}


def score_resemblance(panel: Panel, which: str, dtau: int) -> dict:
    """Compare the programmed feature with the hand-crafted one on every variate.

    Relative error is ``|a-b| / max(|a|, |b|)`` (zero when both are zero).
    R^2 and Pearson are undefined for a constant reference; when the two
    series are then also identical (Bias with dtau=1 is identically 0) both
    are reported as 1.
    """
    if which not in RESEMBLANCE:
        raise ParameterError(f"unknown resemblance target {which!r}; choose from {RESEMBLANCE}")
    program = resemblance_program(which, dtau)
    matrix, _ = generate(panel, program)
    ref_fn = HANDCRAFTED[which]

    prog_vals, ref_vals = [], []
    mismatched_support = 0
    for i, series in enumerate(matrix.column(which)):
        x = [float(v) if p else None for v, p in zip(*panel.row(i))]
        ref = ref_fn(x, dtau)
        for a, ok, b in zip(series.values, series.present, ref):
            if ok and b is not None:
                prog_vals.append(float(a))
                ref_vals.append(b)
            elif ok != (b is not None):
                mismatched_support += 1
    a = np.array(prog_vals)
    b = np.array(ref_vals)
    if len(a) == 0:
        raise ParameterError("no samples where both features are defined")
    abs_err = np.abs(a - b)
    denom = np.maximum(np.abs(a), np.abs(b))
    rel = np.divide(abs_err, denom, out=np.zeros_like(abs_err), where=denom > 0)
    if np.ptp(b) == 0 and not abs_err.any():
        r2_v = pear_v = 1.0
    else:
        r2_v, pear_v = r2(b, a), pearson(b, a)
    return {"which": which, "dtau": dtau, "n_compared": int(len(a)),
            "support_mismatch": mismatched_support,
            "max_abs_error": float(abs_err.max()), "max_rel_error": float(rel.max()),
            "r2": r2_v, "pearson": pear_v, "program_hash": program.hash}
