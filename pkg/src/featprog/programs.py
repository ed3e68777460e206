"""Builtin feature programs."""

from __future__ import annotations

from .dsl import RAW, Call, FeatureProgram, OrderBlock, Ref
from .errors import InvalidParameterError, ParameterError
from .kernels import WindowStat

DEFAULT_LOOKBACKS = (7, 25)
_SUMMARY = (("ma", "wmean"), ("mx", "wmax"), ("mn", "wmin"))


def _d1(name: str) -> Call:
    """First difference of a named feature: x - shift(x, 1)."""
    x = RAW if name == "raw" else Ref(name)
    return Call("diff", (x, Call("shift", (x, 1))))


def default_program() -> FeatureProgram:
    """The 45-feature default: 9 order-0, 18 order-1, 18 order-2 features per variate.

    order 0: raw, trailing mean/max/min at 7 and 25, lags 7 and 25.
    order 1: first difference of each order-0 feature; raw-ma7, raw-ma25,
             ma7-ma25; mean/max/min of d1(raw) at 7 and 25.
    order 2: first difference of each order-1 first difference; pairwise
             differences of d1(raw), ma7(d1(raw)), ma25(d1(raw)); mean/max/min
             of d2(raw) at 7 and 25.
    """
    lb = DEFAULT_LOOKBACKS

    zero = []
    for prefix, fn in _SUMMARY:
        for w in lb:
            zero.append((f"{prefix}{w}", Call(fn, (RAW, w))))
    for w in lb:
        zero.append((f"lag{w}", Call("shift", (RAW, w))))
    zero_names = ["raw"] + [n for n, _ in zero]

    one = [(f"d1_{n}", _d1(n)) for n in zero_names]
    one += [("raw_ma7", Call("diff", (RAW, Ref("ma7")))),
            ("raw_ma25", Call("diff", (RAW, Ref("ma25")))),
            ("ma7_ma25", Call("diff", (Ref("ma7"), Ref("ma25"))))]
    for prefix, fn in _SUMMARY:
        for w in lb:
            one.append((f"{prefix}{w}_d1_raw", Call(fn, (Ref("d1_raw"), w))))

    two = [(f"d2_{n[3:]}", _d1(n)) for n, _ in one[:len(zero_names)]]
    two += [("d1_raw_ma7d1", Call("diff", (Ref("d1_raw"), Ref("ma7_d1_raw")))),
            ("d1_raw_ma25d1", Call("diff", (Ref("d1_raw"), Ref("ma25_d1_raw")))),
            ("ma7d1_ma25d1", Call("diff", (Ref("ma7_d1_raw"), Ref("ma25_d1_raw"))))]
    for prefix, fn in _SUMMARY:
        for w in lb:
            two.append((f"{prefix}{w}_d2_raw", Call(fn, (Ref("d2_raw"), w))))

    return FeatureProgram(
        orders=(OrderBlock(0, (RAW,), tuple(zero)),
                OrderBlock(1, (), tuple(one)),
                OrderBlock(2, (), tuple(two))),
        lookbacks=lb,
        stats=(WindowStat.MEAN, WindowStat.MAX, WindowStat.MIN),
        flow="all")


def identity_program() -> FeatureProgram:
    """Only the raw series: the "basic features" baseline."""
    return FeatureProgram(orders=(OrderBlock(0, (RAW,)),), stats=(), flow="all")


RESEMBLANCE = ("mom", "bias", "absenergy")


def resemblance_program(which: str, dtau: int) -> FeatureProgram:
    """Programs that rebuild MoM, Bias and AbsEnergy exactly.

    The rebuilt feature is the custom feature named after ``which``.
    AbsEnergy is a window of an order-0 series and therefore lands in the
    order-0 block.
    """
    if which not in RESEMBLANCE:
        raise ParameterError(f"unknown resemblance target {which!r}; choose from {RESEMBLANCE}")
    if isinstance(dtau, bool) or not isinstance(dtau, int) or dtau < 1:
        raise InvalidParameterError(f"dtau must be a positive integer, got {dtau!r}")

    if which == "mom":
        lag = Call("shift", (RAW, dtau))
        expr = Call("ratio", (Call("diff", (RAW, lag)), lag))
        blocks = (OrderBlock(0), OrderBlock(1, (), (("mom", expr),)))
        return FeatureProgram(orders=blocks, lookbacks=(), stats=(), flow="all")
    if which == "bias":
        sma = Call("wmean", (RAW, dtau))
        expr = Call("ratio", (Call("diff", (RAW, Ref("sma"))), Ref("sma")))
        blocks = (OrderBlock(0, (), (("sma", sma),)),
                  OrderBlock(1, (), (("bias", expr),)))
        return FeatureProgram(orders=blocks, lookbacks=(dtau,), stats=(WindowStat.MEAN,),
                              flow="all")
    expr = Call("wsum", (Call("square", (RAW,)), dtau))
    return FeatureProgram(orders=(OrderBlock(0, (), (("absenergy", expr),)),),
                          lookbacks=(dtau,), stats=(WindowStat.SUM,), flow="all")
