"""Spin-gas Glauber dynamics: sampling, path sums and the two-slice joint model.

Spins take values in {+1, -1}. The local field of spin ``i`` is

    Gamma_i = sum_j J_ij s_j + h_i + sum_j G1_ij p_j + sum_j G2_ij a_j

with the discrete momentum ``p = c (s_t - s_prev) / dt`` and acceleration
``a = (p_t - p_prev) / dt``, and each spin flips up with probability
``exp(Gamma) / (2 cosh Gamma)``. Optional third-order tensors add the
``sum_mn G[i, m, n] p_m p_n`` (and the ``a`` analogue) terms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import CapacityError, ParameterError
from .series import Panel, make_panel

PATH_ENUM_LIMIT = 20     # max N*(L-1) for exhaustive path enumeration
JOINT_MAX_N = 6          # 2^(2N) table


def _matrix(x, n: int, name: str) -> np.ndarray:
    a = np.zeros((n, n)) if x is None else np.asarray(x, dtype=float)
    if a.shape != (n, n):
        raise ParameterError(f"{name} must be {n}x{n}, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ParameterError(f"{name} has non-finite entries")
    return a


def _tensor(x, n: int, name: str) -> np.ndarray | None:
    if x is None:
        return None
    a = np.asarray(x, dtype=float)
    if a.shape != (n, n, n) or not np.all(np.isfinite(a)):
        raise ParameterError(f"{name} must be a finite {n}x{n}x{n} tensor")
    return a


@dataclass(frozen=True, eq=False)
class SpinGasParams:
    n: int
    J: np.ndarray
    h: np.ndarray
    G1: np.ndarray
    G2: np.ndarray
    c: float = 0.1
    dt: float = 1.0
    G1_3: np.ndarray | None = None      # third-order momentum couplings (k=3 cliques)
    G2_3: np.ndarray | None = None

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ParameterError(f"n must be a positive integer, got {n!r}")
        J = _matrix(self.J, n, "J")
        if not np.allclose(J, J.T, rtol=0, atol=0) or np.any(np.diag(J) != 0):
            raise ParameterError("J must be symmetric with a zero diagonal")
        h = np.zeros(n) if self.h is None else np.asarray(self.h, dtype=float).reshape(-1)
        if h.shape != (n,) or not np.all(np.isfinite(h)):
            raise ParameterError(f"h must be a finite vector of length {n}")
        if not (np.isfinite(self.c) and self.c >= 0):
            raise ParameterError("c must be a non-negative finite number")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ParameterError("dt must be a positive finite number")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "G1", _matrix(self.G1, n, "G1"))
        object.__setattr__(self, "G2", _matrix(self.G2, n, "G2"))
        object.__setattr__(self, "G1_3", _tensor(self.G1_3, n, "G1_3"))
        object.__setattr__(self, "G2_3", _tensor(self.G2_3, n, "G2_3"))

    @property
    def gas_free(self) -> bool:
        """True when no momentum/acceleration coupling is present (first-order Markov chain)."""
        return (not self.G1.any() and not self.G2.any()
                and (self.G1_3 is None or not self.G1_3.any())
                and (self.G2_3 is None or not self.G2_3.any()))

    @property
    def field_only(self) -> bool:
        return self.gas_free and not self.J.any()

    def with_overrides(self, **kw) -> "SpinGasParams":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = {"n": int(self.n), "J": self.J.tolist(), "h": self.h.tolist(),
             "G1": self.G1.tolist(), "G2": self.G2.tolist(), "c": self.c, "dt": self.dt}
        if self.G1_3 is not None:
            d["G1_3"] = self.G1_3.tolist()
        if self.G2_3 is not None:
            d["G2_3"] = self.G2_3.tolist()
        return d

    @classmethod
    def zeros(cls, n: int, **kw) -> "SpinGasParams":
        return cls(n, None, None, None, None, **kw)


def random_params(rng: np.random.Generator, n: int, scale: float = 0.5,
                  gas: bool = True, c: float = 0.1, dt: float = 1.0) -> SpinGasParams:
    """Random couplings of magnitude ~``scale``; ``gas=False`` zeroes G1 and G2."""
    J = rng.normal(0, scale, (n, n))
    J = np.triu(J, 1)
    J = J + J.T
    h = rng.normal(0, scale, n)
    G1 = rng.normal(0, scale, (n, n)) if gas else None
    G2 = rng.normal(0, scale, (n, n)) if gas else None
    return SpinGasParams(n, J, h, G1, G2, c=c, dt=dt)


# -- history -----------------------------------------------------------------

def _spins(x, n: int, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=float).reshape(-1)
    if a.shape != (n,) or not np.all(np.abs(a) == 1):
        raise ParameterError(f"{name} must be {n} entries of +1/-1")
    return a


@dataclass(frozen=True, eq=False)
class SpinHistory:
    sigma_t: np.ndarray
    sigma_prev: np.ndarray
    sigma_prev2: np.ndarray

    def __post_init__(self):
        n = len(np.asarray(self.sigma_t).reshape(-1))
        for name in ("sigma_t", "sigma_prev", "sigma_prev2"):
            object.__setattr__(self, name, _spins(getattr(self, name), n, name))

    @classmethod
    def ones(cls, n: int) -> "SpinHistory":
        return cls(np.ones(n), np.ones(n), np.ones(n))

    def advance(self, sigma_next: np.ndarray) -> "SpinHistory":
        """Shift the history by one step; ``sigma_next`` is trusted to be a +-1 vector."""
        out = object.__new__(SpinHistory)
        for name, value in zip(("sigma_t", "sigma_prev", "sigma_prev2"),
                               (np.asarray(sigma_next, dtype=float), self.sigma_t, self.sigma_prev)):
            object.__setattr__(out, name, value)
        return out


def momentum(s_t, s_prev, s_prev2, c: float, dt: float):
    """Discrete momentum and acceleration; works on vectors or stacked (M, N) arrays."""
    p = c * (s_t - s_prev) / dt
    p_prev = c * (s_prev - s_prev2) / dt
    return p, (p - p_prev) / dt


def local_field_batch(params: SpinGasParams, s_t, s_prev, s_prev2) -> np.ndarray:
    """Local fields for stacked histories: each argument is (N,) or (M, N)."""
    p, a = momentum(s_t, s_prev, s_prev2, params.c, params.dt)
    g = s_t @ params.J.T + params.h + p @ params.G1.T + a @ params.G2.T
    if params.G1_3 is not None:
        g = g + np.einsum("imn,...m,...n->...i", params.G1_3, p, p)
    if params.G2_3 is not None:
        g = g + np.einsum("imn,...m,...n->...i", params.G2_3, a, a)
    return g


def local_field(params: SpinGasParams, history: SpinHistory) -> np.ndarray:
    return local_field_batch(params, history.sigma_t, history.sigma_prev, history.sigma_prev2)


def spin_probabilities(gamma) -> tuple[np.ndarray, np.ndarray]:
    """``(P(+1), P(-1))`` for local field(s) ``gamma``.

    The larger of the two is computed directly and the other as its
    complement, so the pair sums to exactly 1.0 in floating point.
    """
    g = np.asarray(gamma, dtype=float)
    big = 1.0 / (1.0 + np.exp(-2.0 * np.abs(g)))
    small = 1.0 - big
    pos = g >= 0
    return np.where(pos, big, small), np.where(pos, small, big)


def spin_conditional(sigma, gamma) -> np.ndarray:
    """``exp(sigma * gamma) / (2 cosh gamma)`` elementwise."""
    up, down = spin_probabilities(gamma)
    return np.where(np.asarray(sigma) > 0, up, down)


def step_sample(rng: np.random.Generator, params: SpinGasParams, history: SpinHistory) -> np.ndarray:
    """Draw the next spin vector; spins update independently given the history."""
    up, _ = spin_probabilities(local_field(params, history))
    return np.where(rng.random(params.n) < up, 1.0, -1.0)


def simulate_panel(rng: np.random.Generator, params: SpinGasParams, x0: Sequence[float], steps: int,
                   history: SpinHistory | None = None, schedule: Sequence[dict] | None = None,
                   names: Sequence[str] | None = None) -> Panel:
    """Path-sum ``X_l = X_{l-1} + c * sigma_l`` for ``steps`` micro-steps (length ``steps + 1``).

    ``schedule[l]``, if given, overrides parameter fields (e.g. ``J``, ``h``)
    for step ``l``; steps past its end reuse the last entry.
    """
    if not isinstance(steps, (int, np.integer)) or steps < 1:
        raise ParameterError(f"steps must be a positive integer, got {steps!r}")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (params.n,):
        raise ParameterError(f"x0 must have {params.n} entries")
    hist = history or SpinHistory.ones(params.n)
    staged = [params.with_overrides(**entry) for entry in schedule] if schedule else None

    X = np.empty((params.n, steps + 1))
    X[:, 0] = x0
    for l in range(1, steps + 1):
        p = staged[min(l - 1, len(staged) - 1)] if staged else params
        sigma = step_sample(rng, p, hist)
        X[:, l] = X[:, l - 1] + p.c * sigma
        hist = hist.advance(sigma)
    return make_panel(X, names=names)


# -- exact enumeration -------------------------------------------------------

def configurations(n: int) -> np.ndarray:
    """All 2^n spin vectors; row k has spin q = +1 iff bit q of k is set."""
    k = np.arange(2 ** n)[:, None]
    bits = (k >> np.arange(n)[None, :]) & 1
    return np.where(bits == 1, 1.0, -1.0)


def _config_index(sigma: np.ndarray) -> int:
    return int(sum(1 << q for q, s in enumerate(sigma) if s > 0))


def endpoint_distribution(params: SpinGasParams, sigma_start, steps: int,
                          prev=None, prev2=None) -> np.ndarray:
    """``P(sigma_{t+L} = c_k | sigma_t, history)`` for every configuration ``c_k``.

    Sums the product of one-step conditionals over every intermediate path,
    rolling the momentum/acceleration history along each path.
    """
    n = params.n
    if not isinstance(steps, (int, np.integer)) or steps < 1:
        raise ParameterError("L must be a positive integer")
    if n * (steps - 1) > PATH_ENUM_LIMIT:
        raise CapacityError(f"N*(L-1) = {n * (steps - 1)} exceeds enumeration bound {PATH_ENUM_LIMIT}")
    start = _spins(sigma_start, n, "sigma_start")
    prev = np.ones(n) if prev is None else _spins(prev, n, "prev")
    prev2 = np.ones(n) if prev2 is None else _spins(prev2, n, "prev2")
    confs = configurations(n)

    cur, p1, p2 = start[None, :], prev[None, :], prev2[None, :]
    weight = np.ones(1)
    for _ in range(steps - 1):
        up, down = spin_probabilities(local_field_batch(params, cur, p1, p2))          # (M, N)
        # P(next = conf | path) for every path m and configuration k: (M, K)
        trans = np.prod(np.where(confs[None, :, :] > 0, up[:, None, :], down[:, None, :]), axis=2)
        weight = (weight[:, None] * trans).reshape(-1)
        M = cur.shape[0]
        p2 = np.repeat(p1, len(confs), axis=0)
        p1 = np.repeat(cur, len(confs), axis=0)
        cur = np.tile(confs, (M, 1))
    up, down = spin_probabilities(local_field_batch(params, cur, p1, p2))
    trans = np.prod(np.where(confs[None, :, :] > 0, up[:, None, :], down[:, None, :]), axis=2)
    return weight @ trans


def path_probability(params: SpinGasParams, sigma_start, sigma_end, steps: int,
                     prev=None, prev2=None) -> float:
    """Exact ``P(sigma_end after L steps | sigma_start, history)`` by path enumeration."""
    end = _spins(sigma_end, params.n, "sigma_end")
    dist = endpoint_distribution(params, sigma_start, steps, prev, prev2)
    return float(dist[_config_index(end)])


def transition_matrix(params: SpinGasParams) -> np.ndarray:
    """One-step 2^N x 2^N matrix; only meaningful when the chain is first-order (no gas terms)."""
    if not params.gas_free:
        raise ParameterError("transition matrix needs G1 = G2 = 0 (history-free chain)")
    if params.n > 10:
        raise CapacityError("transition matrix limited to N <= 10")
    confs = configurations(params.n)
    up, down = spin_probabilities(confs @ params.J.T + params.h)
    return np.prod(np.where(confs[None, :, :] > 0, up[:, None, :], down[:, None, :]), axis=2)


# -- two-slice joint model ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class JointModel:
    """Enumerated ``P(sigma_t, sigma_{t+dt})`` given the two previous slices.

    Row ``k`` of ``configs`` holds ``(sigma_t, sigma_next)``; node q < N is
    spin q of ``sigma_t`` and node N + i is spin i of ``sigma_next``. The
    derivative-extended statistics of the current slice (value, momentum,
    acceleration) are stored per row in ``stats``.
    """

    params: SpinGasParams
    prev: np.ndarray
    prev2: np.ndarray
    configs: np.ndarray          # (2^(2N), 2N)
    table: np.ndarray            # (2^(2N),)
    log_partition: float
    stats: np.ndarray = field(repr=False, default=None)   # (2^(2N), N, 3)

    @property
    def n(self) -> int:
        return self.params.n

    def conditional(self, q: int) -> tuple[np.ndarray, np.ndarray]:
        """P(node q = +1 | all other nodes), for every row where node q = +1; with those rows."""
        rows = np.flatnonzero(self.configs[:, q] > 0)
        partner = rows ^ (1 << q)
        return self.table[rows] / (self.table[rows] + self.table[partner]), rows

    def next_given_current(self) -> np.ndarray:
        """(2^N, 2^N) matrix of ``P(sigma_next | sigma_t)`` read off the table."""
        n = self.n
        grid = self.table.reshape(2 ** n, 2 ** n)      # [next_index, current_index]
        return (grid / grid.sum(axis=0, keepdims=True)).T


def build_joint(params: SpinGasParams, prev=None, prev2=None) -> JointModel:
    """Enumerate the pairwise two-slice model.

    Energy: sum_{i<j} J_ij s_i s_j + h . s + sum_i s'_i Gamma_i(s, prev, prev2),
    with ``s`` the current slice and ``s'`` the next one.
    """
    n = params.n
    if n > JOINT_MAX_N:
        raise CapacityError(f"joint enumeration limited to N <= {JOINT_MAX_N}, got {n}")
    prev = np.ones(n) if prev is None else _spins(prev, n, "prev")
    prev2 = np.ones(n) if prev2 is None else _spins(prev2, n, "prev2")
    configs = configurations(2 * n)
    cur, nxt = configs[:, :n], configs[:, n:]
    P1 = np.broadcast_to(prev, cur.shape)
    P2 = np.broadcast_to(prev2, cur.shape)
    gamma = local_field_batch(params, cur, P1, P2)
    pair = 0.5 * np.einsum("ki,ij,kj->k", cur, params.J, cur)
    energy = pair + cur @ params.h + np.sum(nxt * gamma, axis=1)
    A = float(logsumexp(energy))
    table = np.exp(energy - A)
    p, a = momentum(cur, P1, P2, params.c, params.dt)
    stats = np.stack([cur, p, a], axis=2)
    return JointModel(params, prev, prev2, configs, table, A, stats)


@dataclass
class ConditionalReport:
    max_dev_next: float          # asserted
    max_dev_current: float       # diagnostic unless field-only
    field_only: bool
    normalization_error: float
    tolerance: float = 1e-10

    @property
    def passed(self) -> bool:
        ok = self.max_dev_next < self.tolerance and self.normalization_error < 1e-12
        if self.field_only:
            ok = ok and self.max_dev_current < self.tolerance
        return ok

    def to_dict(self) -> dict:
        return {"max_dev_next": self.max_dev_next, "max_dev_current": self.max_dev_current,
                "field_only": self.field_only, "normalization_error": self.normalization_error,
                "tolerance": self.tolerance, "passed": self.passed}


def check_node_conditionals(joint: JointModel, tolerance: float = 1e-10) -> ConditionalReport:
    """Compare every node-conditional of the table with the Glauber form.

    Next-slice nodes are compared with the local field computed from the
    current slice and history. Current-slice nodes are compared with the
    plain Ising field ``J s + h``; that comparison is only expected to hold
    when ``J = G1 = G2 = 0``.
    """
    n = joint.n
    params = joint.params
    cur = joint.configs[:, :n]
    gamma = local_field_batch(params, cur, np.broadcast_to(joint.prev, cur.shape),
                   np.broadcast_to(joint.prev2, cur.shape))
    dev_next = 0.0
    for i in range(n):
        cond, rows = joint.conditional(n + i)
        up, _ = spin_probabilities(gamma[rows, i])
        dev_next = max(dev_next, float(np.max(np.abs(cond - up))))
    ising = cur @ params.J.T + params.h
    dev_cur = 0.0
    for i in range(n):
        cond, rows = joint.conditional(i)
        up, _ = spin_probabilities(ising[rows, i])
        dev_cur = max(dev_cur, float(np.max(np.abs(cond - up))))
    return ConditionalReport(dev_next, dev_cur, params.field_only,
                             abs(float(joint.table.sum()) - 1.0), tolerance)


# -- params file ---------------------------------------------------------------

@dataclass
class SimulationConfig:
    params: SpinGasParams
    seed: int | None = None
    history: SpinHistory | None = None
    schedule: list = field(default_factory=list)


def load_params(text: str) -> SimulationConfig:
    """Parse a params JSON document (see README for the schema)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParameterError(f"invalid params JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})") from None
    if not isinstance(doc, dict) or "n" not in doc:
        raise ParameterError("params document must be an object with 'n'")
    n = doc["n"]
    params = SpinGasParams(n, doc.get("J"), doc.get("h"), doc.get("G1"), doc.get("G2"),
                           c=float(doc.get("c", 0.1)), dt=float(doc.get("dt", 1.0)),
                           G1_3=doc.get("G1_3"), G2_3=doc.get("G2_3"))
    history = None
    if doc.get("history"):
        hd = doc["history"]
        history = SpinHistory(hd.get("current", np.ones(n)), hd.get("prev", np.ones(n)),
                              hd.get("prev2", np.ones(n)))
    schedule = []
    for entry in doc.get("schedule") or []:
        allowed = {"J", "h", "G1", "G2"}
        if not isinstance(entry, dict) or set(entry) - allowed:
            raise ParameterError(f"schedule entries may only override {sorted(allowed)}")
        schedule.append({k: np.asarray(v, dtype=float) for k, v in entry.items()})
    seed = doc.get("seed")
    return SimulationConfig(params, seed, history, schedule)
