"""Feature programs: the expression mini-language and the JSON program format.

Expression grammar::

    expr := "raw" | IDENT | FUNC "(" expr ("," (expr | INT))* ")"

Canonical printing is whitespace-free and parses back to an equal tree.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from typing import Mapping, Union

from .errors import (ArityError, DuplicateNameError, InvalidParameterError, OrderMismatchError,
                     ProgramError, ProgramSyntaxError, ResolutionError, UnknownFunctionError)
from .kernels import WINDOW_FUNCS, WindowStat

DEFAULT_MAX_ORDER = 2


# -- expression tree ---------------------------------------------------------

@dataclass(frozen=True)
class Raw:
    def __str__(self) -> str:
        return "raw"


@dataclass(frozen=True)
class Ref:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple

    def __str__(self) -> str:
        return f"{self.func}({','.join(str(a) for a in self.args)})"

    @property
    def exprs(self) -> tuple:
        return tuple(a for a in self.args if not isinstance(a, int))

    @property
    def ints(self) -> tuple:
        return tuple(a for a in self.args if isinstance(a, int))


Expr = Union[Raw, Ref, Call]

RAW = Raw()

# argument kinds: "e" expression, "i" positive integer, "i?" optional trailing integer
SIGNATURES: dict[str, tuple[str, ...]] = {
    "shift": ("e", "i"),
    **{fn: ("e", "i") for fn in WINDOW_FUNCS},
    "diff": ("e", "e", "i?"),
    "ratio": ("e", "e"),
    "square": ("e",),
}

RESERVED = frozenset(SIGNATURES) | {"raw"}
IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def canonical(e: Expr) -> str:
    return str(e)


# -- tokenizer / parser ------------------------------------------------------

_TOKEN_RE = re.compile(r"\s*(?:(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<int>[0-9]+)|(?P<punct>[(),]))")


@dataclass
class _Tok:
    kind: str       # ident | int | ( | ) | , | eof
    text: str
    pos: int


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    pos = 0
    while True:
        while pos < len(src) and src[pos].isspace():
            pos += 1
        if pos == len(src):
            toks.append(_Tok("eof", "", pos))
            return toks
        m = _TOKEN_RE.match(src, pos)
        if not m or m.end() == pos:
            raise ProgramSyntaxError(f"unexpected character {src[pos]!r}", offset=pos)
        start = m.start(m.lastgroup)
        text = m.group(m.lastgroup)
        kind = m.lastgroup if m.lastgroup != "punct" else text
        toks.append(_Tok(kind, text, start))
        pos = m.end()


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, kind: str) -> _Tok:
        if self.tok.kind != kind:
            found = self.tok.text or "end of input"
            raise ProgramSyntaxError(f"expected {kind!r}, found {found!r}", offset=self.tok.pos)
        return self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "eof":
            raise ProgramSyntaxError(f"unexpected trailing {self.tok.text!r}", offset=self.tok.pos)
        return e

    def arg(self):
        if self.tok.kind == "int":
            t = self.advance()
            return int(t.text), t.pos
        pos = self.tok.pos
        return self.expr(), pos

    def expr(self) -> Expr:
        t = self.tok
        if t.kind == "int":
            raise ProgramSyntaxError("an integer cannot start an expression", offset=t.pos)
        name = self.expect("ident")
        if self.tok.kind != "(":
            return RAW if name.text == "raw" else Ref(name.text)
        if name.text not in SIGNATURES:
            raise UnknownFunctionError(f"unknown function {name.text!r}", offset=name.pos)
        self.advance()
        first_pos = self.tok.pos
        first = self.expr()
        args = [(first, first_pos)]
        while self.tok.kind == ",":
            self.advance()
            args.append(self.arg())
        self.expect(")")
        return _typecheck(name.text, args, name.pos)


def _typecheck(func: str, args: list, pos: int) -> Call:
    sig = SIGNATURES[func]
    required = sum(1 for k in sig if not k.endswith("?"))
    if not required <= len(args) <= len(sig):
        want = str(required) if required == len(sig) else f"{required}-{len(sig)}"
        raise ArityError(f"{func} takes {want} arguments, got {len(args)}", offset=pos)
    for kind, (a, apos) in zip(sig, args):
        if kind == "e" and isinstance(a, int):
            raise ArityError(f"{func}: expected a series expression, got integer {a}", offset=apos)
        if kind.startswith("i"):
            if not isinstance(a, int):
                raise ArityError(f"{func}: expected an integer parameter", offset=apos)
            if a < 1:
                raise InvalidParameterError(f"{func}: integer parameter must be positive, got {a}",
                                            offset=apos)
    vals = [a for a, _ in args]
    if func == "diff" and len(vals) == 3 and vals[2] == 1:
        vals = vals[:2]   # smoothing 1 is the identity; keep one canonical form
    return Call(func, tuple(vals))


def parse_expr(src: str) -> Expr:
    """Parse one expression string; errors carry a 0-based ``offset``."""
    return _Parser(src).parse()


# -- order -------------------------------------------------------------------

def order_of(e: Expr, env: Mapping[str, int] | None = None) -> int:
    """Derivative order: ``diff`` adds one to the max child order, everything else preserves it."""
    if isinstance(e, Raw):
        return 0
    if isinstance(e, Ref):
        if env is None or e.name not in env:
            raise ResolutionError(f"unresolved reference {e.name!r}")
        return env[e.name]
    child = max(order_of(c, env) for c in e.exprs)
    return child + 1 if e.func == "diff" else child


def references(e: Expr) -> set[str]:
    if isinstance(e, Ref):
        return {e.name}
    if isinstance(e, Call):
        return set().union(*(references(c) for c in e.exprs))
    return set()


def _walk_calls(e: Expr):
    if isinstance(e, Call):
        yield e
        for c in e.exprs:
            yield from _walk_calls(c)


# -- programs ----------------------------------------------------------------

@dataclass(frozen=True)
class OrderBlock:
    order: int
    basic: tuple = ()          # tuple[Expr, ...]
    custom: tuple = ()         # tuple[tuple[str, Expr], ...]


@dataclass(frozen=True)
class PlannedFeature:
    name: str
    expr: Expr
    order: int
    custom: bool


@dataclass(frozen=True)
class FeatureProgram:
    orders: tuple
    lookbacks: tuple = ()
    stats: tuple = tuple(WindowStat)
    flow: str = "all"
    max_order: int = DEFAULT_MAX_ORDER
    version: int = 1
    _plan: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_plan", tuple(validate(self)))

    @property
    def plan(self) -> tuple[PlannedFeature, ...]:
        """Features in evaluation (and output) order."""
        return self._plan

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self._plan)

    def to_dict(self) -> dict:
        d = {"version": self.version,
             "lookbacks": list(self.lookbacks),
             "stats": [WindowStat(s).value for s in self.stats],
             "flow": self.flow}
        if self.max_order != DEFAULT_MAX_ORDER:
            d["max_order"] = self.max_order
        d["orders"] = [{"order": b.order,
                        "basic": [canonical(e) for e in b.basic],
                        "custom": [{"name": n, "expr": canonical(e)} for n, e in b.custom]}
                       for b in self.orders]
        return d

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @property
    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def validate(program: FeatureProgram) -> list[PlannedFeature]:
    """Type-check a program and return its evaluation plan.

    Names visible to a block are its own earlier features plus, with
    ``flow == "all"``, every feature of the blocks before it.
    """
    if program.flow not in ("all", "none"):
        raise ProgramError(f"flow must be 'all' or 'none', got {program.flow!r}", where="flow")
    if not isinstance(program.max_order, int) or program.max_order < 0:
        raise ProgramError("max_order must be a non-negative integer", where="max_order")
    stats = {WindowStat(s) for s in program.stats}
    lookbacks = set(program.lookbacks)
    for lb in lookbacks:
        if not isinstance(lb, int) or isinstance(lb, bool) or lb < 1:
            raise InvalidParameterError(f"lookbacks must be positive integers, got {lb!r}",
                                        where="lookbacks")

    plan: list[PlannedFeature] = []
    seen: dict[str, str] = {}
    inherited: dict[str, int] = {}
    for bi, block in enumerate(program.orders):
        if block.order != bi:
            raise ProgramError(f"order blocks must be sorted and contiguous from 0; "
                               f"block {bi} declares order {block.order}", where=f"orders[{bi}]")
        if block.order > program.max_order:
            raise ProgramError(f"order {block.order} exceeds max_order {program.max_order}",
                               where=f"orders[{bi}]")
        env = dict(inherited) if program.flow == "all" else {}
        entries = [(f"orders[{bi}].basic[{j}]", canonical(e), e, False)
                   for j, e in enumerate(block.basic)]
        entries += [(f"orders[{bi}].custom[{j}]", n, e, True)
                    for j, (n, e) in enumerate(block.custom)]
        for where, name, expr, is_custom in entries:
            if is_custom and (not IDENT_RE.match(name) or name in RESERVED):
                raise ProgramError(f"invalid custom feature name {name!r}", where=where)
            for ref in sorted(references(expr)):
                if ref not in env:
                    raise ResolutionError(f"feature {name!r} at order {block.order} references "
                                          f"unavailable name {ref!r}", where=where)
            for call in _walk_calls(expr):
                stat = WINDOW_FUNCS.get(call.func)
                if stat is None:
                    continue
                if stat not in stats:
                    raise ProgramError(f"{call.func} uses statistic {stat.value!r} not listed in stats",
                                       where=where)
                if lookbacks and call.ints[0] not in lookbacks:
                    raise ProgramError(f"{call.func} lookback {call.ints[0]} not listed in lookbacks",
                                       where=where)
            k = order_of(expr, env)
            if k != block.order:
                raise OrderMismatchError(f"{name!r} has computed order {k} but is declared in the "
                                         f"order-{block.order} block", where=where)
            if name in seen:
                raise DuplicateNameError(f"duplicate feature name {name!r} (also at {seen[name]})",
                                         where=where)
            seen[name] = where
            env[name] = k
            plan.append(PlannedFeature(name, expr, k, is_custom))
        if program.flow == "all":
            inherited.update(env)
    return plan


# -- JSON --------------------------------------------------------------------

_TOP_KEYS = {"version", "lookbacks", "stats", "flow", "max_order", "orders"}


def _locate(text: str, src: str, offset: int | None) -> dict:
    """Best-effort line/column of an expression error inside the JSON document."""
    needle = json.dumps(src)
    at = text.find(needle)
    if at < 0:
        return {}
    at += 1 + (offset or 0)
    line = text.count("\n", 0, at) + 1
    column = at - (text.rfind("\n", 0, at) + 1) + 1
    return {"line": line, "column": column}


def _expr_at(text: str, src, where: str) -> Expr:
    if not isinstance(src, str):
        raise ProgramError("expression must be a string", where=where)
    try:
        return parse_expr(src)
    except ProgramError as exc:
        raise exc.located(where=where, **_locate(text, src, exc.offset)) from None


def _int_list(value, where: str) -> tuple:
    if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool)
                                              for v in value):
        raise ProgramError("expected a list of integers", where=where)
    return tuple(value)


def parse_program(text: str) -> FeatureProgram:
    """Parse and validate a JSON program document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProgramSyntaxError(f"invalid JSON: {exc.msg}", line=exc.lineno,
                                 column=exc.colno) from None
    if not isinstance(doc, dict):
        raise ProgramError("program must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ProgramError(f"unknown keys {sorted(unknown)}")
    version = doc.get("version", 1)
    if version != 1:
        raise ProgramError(f"unsupported version {version!r}", where="version")
    lookbacks = _int_list(doc.get("lookbacks", []), "lookbacks")
    try:
        stats = tuple(WindowStat(s) for s in doc.get("stats", [s.value for s in WindowStat]))
    except (ValueError, TypeError):
        raise ProgramError(f"unknown statistic in {doc.get('stats')!r}", where="stats") from None
    orders_doc = doc.get("orders")
    if not isinstance(orders_doc, list):
        raise ProgramError("'orders' must be a list", where="orders")

    blocks = []
    for bi, b in enumerate(orders_doc):
        where = f"orders[{bi}]"
        if not isinstance(b, dict) or not isinstance(b.get("order"), int):
            raise ProgramError("order block needs an integer 'order'", where=where)
        extra = set(b) - {"order", "basic", "custom"}
        if extra:
            raise ProgramError(f"unknown keys {sorted(extra)}", where=where)
        basic_doc = b.get("basic", [])
        custom_doc = b.get("custom", [])
        if not isinstance(basic_doc, list) or not isinstance(custom_doc, list):
            raise ProgramError("'basic' and 'custom' must be lists", where=where)
        basic = tuple(_expr_at(text, s, f"{where}.basic[{j}]") for j, s in enumerate(basic_doc))
        custom = []
        for j, c in enumerate(custom_doc):
            cw = f"{where}.custom[{j}]"
            if not isinstance(c, dict) or set(c) != {"name", "expr"} or not isinstance(c["name"], str):
                raise ProgramError("custom entry must be {\"name\": str, \"expr\": str}", where=cw)
            custom.append((c["name"], _expr_at(text, c["expr"], cw + ".expr")))
        blocks.append(OrderBlock(b["order"], basic, tuple(custom)))

    max_order = doc.get("max_order", DEFAULT_MAX_ORDER)
    return FeatureProgram(orders=tuple(blocks), lookbacks=lookbacks, stats=stats,
                          flow=doc.get("flow", "all"), max_order=max_order)
