import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featprog.dsl import (RAW, Call, FeatureProgram, OrderBlock, Ref, canonical, order_of,
                          parse_expr, parse_program, references)
from featprog.errors import (ArityError, DuplicateNameError, InvalidParameterError,
                             OrderMismatchError, ProgramError, ProgramSyntaxError,
                             ResolutionError, UnknownFunctionError)
from featprog.programs import default_program, identity_program, resemblance_program

from gen import random_expr, random_program


def program_doc(*blocks, flow="all", **extra):
    return json.dumps({"flow": flow, "orders": [
        {"order": k, "basic": b, "custom": [{"name": n, "expr": e} for n, e in c]}
        for k, (b, c) in enumerate(blocks)], **extra}, indent=2)


class TestParseExpr:
    def test_nested(self):
        e = parse_expr("diff( wmean(raw, 7), shift(raw,1) )")
        assert e == Call("diff", (Call("wmean", (RAW, 7)), Call("shift", (RAW, 1))))
        assert canonical(e) == "diff(wmean(raw,7),shift(raw,1))"

    def test_reference(self):
        assert parse_expr("ratio(x, raw)") == Call("ratio", (Ref("x"), RAW))
        assert references(parse_expr("diff(a,wmax(b,3))")) == {"a", "b"}

    def test_unit_smoothing_is_canonicalised(self):
        assert canonical(parse_expr("diff(a,b,1)")) == "diff(a,b)"
        assert canonical(parse_expr("diff(a,b,3)")) == "diff(a,b,3)"

    @pytest.mark.parametrize("src, exc, offset", [
        ("wmean(raw,)", ProgramSyntaxError, 10),
        ("wmean(raw,7", ProgramSyntaxError, 11),
        ("raw)", ProgramSyntaxError, 3),
        ("foo(raw)", UnknownFunctionError, 0),
        ("shift(raw)", ArityError, 0),
        ("square(raw,2)", ArityError, 0),
        ("wmean(raw,0)", InvalidParameterError, 10),
        ("diff(raw, 3)", ArityError, 10),
        ("raw $", ProgramSyntaxError, 4),
    ])
    def test_errors_are_located(self, src, exc, offset):
        with pytest.raises(exc) as info:
            parse_expr(src)
        assert info.value.offset == offset


class TestOrder:
    @pytest.mark.parametrize("src, k", [
        ("raw", 0),
        ("wmean(raw,7)", 0),
        ("shift(square(raw),2)", 0),
        ("diff(raw,shift(raw,1))", 1),
        ("diff(diff(raw,shift(raw,1)),raw)", 2),
        ("ratio(diff(raw,shift(raw,5)),shift(raw,5))", 1),
        ("wstd(diff(raw,wmean(raw,3)),4)", 1),
    ])
    def test_examples(self, src, k):
        assert order_of(parse_expr(src)) == k

    def test_reference_uses_env(self):
        assert order_of(parse_expr("diff(v,raw)"), {"v": 1}) == 2

    def test_unresolved(self):
        with pytest.raises(ResolutionError):
            order_of(parse_expr("wmean(q,3)"), {})

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 3), st.integers(0, 10 ** 6))
    def test_generated_expression_has_target_order(self, k, seed):
        e = random_expr(random.Random(seed), k, {})
        assert order_of(e) == k
        assert parse_expr(canonical(e)) == e


class TestProgram:
    def test_minimal(self):
        p = parse_program(program_doc((["raw", "wmean(raw,3)"], [])))
        assert p.feature_names == ("raw", "wmean(raw,3)")

    def test_diff_in_order_zero_block(self):
        with pytest.raises(OrderMismatchError):
            parse_program(program_doc((["diff(raw,shift(raw,1))"], [])))

    def test_duplicate_name(self):
        with pytest.raises(DuplicateNameError):
            parse_program(program_doc((["raw"], [("a", "raw"), ("a", "square(raw)")])))

    def test_flow_all_exposes_earlier_blocks(self):
        doc = program_doc(([], [("m", "wmean(raw,3)")]), ([], [("d", "diff(raw,m)")]))
        assert parse_program(doc).plan[-1].order == 1

    def test_flow_none_hides_earlier_blocks(self):
        doc = program_doc(([], [("m", "wmean(raw,3)")]), ([], [("d", "diff(raw,m)")]),
                          flow="none")
        with pytest.raises(ResolutionError):
            parse_program(doc)

    def test_forward_reference_rejected(self):
        with pytest.raises(ResolutionError):
            parse_program(program_doc(([], [("a", "square(b)"), ("b", "raw")])))

    def test_reserved_custom_name(self):
        with pytest.raises(ProgramError):
            parse_program(program_doc(([], [("wmean", "raw")])))

    def test_stats_and_lookbacks_palette(self):
        doc = program_doc((["wmax(raw,3)"], []), stats=["mean"])
        with pytest.raises(ProgramError, match="not listed in stats"):
            parse_program(doc)
        doc = program_doc((["wmean(raw,3)"], []), lookbacks=[7, 25])
        with pytest.raises(ProgramError, match="not listed in lookbacks"):
            parse_program(doc)

    def test_order_above_max(self):
        doc = program_doc((["raw"], []), ([], [("d", "diff(raw,shift(raw,1))")]), max_order=0)
        with pytest.raises(ProgramError, match="max_order"):
            parse_program(doc)

    def test_json_error_has_line_and_column(self):
        with pytest.raises(ProgramSyntaxError) as info:
            parse_program('{\n  "orders": [\n    {"order": 0,, "basic": []}\n  ]\n}')
        assert (info.value.line, info.value.column) == (3, 17)

    def test_expression_error_located_in_document(self):
        text = program_doc((["raw", "wmean(raw,)"], []))
        with pytest.raises(ProgramSyntaxError) as info:
            parse_program(text)
        line = text.splitlines()[info.value.line - 1]
        assert line[info.value.column - 1] == ")"
        assert info.value.where == "orders[0].basic[1]"

    def test_unknown_keys(self):
        with pytest.raises(ProgramError):
            parse_program('{"orders": [], "colour": 1}')

    def test_hash_is_stable_and_content_based(self):
        a = parse_program(program_doc((["raw"], [])))
        b = parse_program(program_doc((["raw"], [])))
        c = parse_program(program_doc((["square(raw)"], [])))
        assert a.hash == b.hash != c.hash
        assert len(a.hash) == 16


class TestBuiltins:
    def test_default_census(self):
        p = default_program()
        counts = {k: sum(f.order == k for f in p.plan) for k in range(3)}
        # order 0: raw + 3 stats x 2 lookbacks + 2 lags
        # orders 1 and 2: 9 differences + 3 pairwise + 3 stats x 2 lookbacks
        assert counts == {0: 1 + 3 * 2 + 2, 1: 9 + 3 + 3 * 2, 2: 9 + 3 + 3 * 2}
        assert len(p.plan) == 45

    def test_default_round_trip(self):
        p = default_program()
        assert parse_program(p.to_json()) == p

    def test_identity(self):
        assert identity_program().feature_names == ("raw",)

    def test_momentum_program_is_order_one(self):
        p = resemblance_program("mom", 5)
        assert {f.name: f.order for f in p.plan} == {"mom": 1}
        assert canonical(p.plan[0].expr) == "ratio(diff(raw,shift(raw,5)),shift(raw,5))"

    def test_bias_and_energy(self):
        assert {f.name: f.order for f in resemblance_program("bias", 3).plan} == {"sma": 0, "bias": 1}
        assert {f.name: f.order for f in resemblance_program("absenergy", 3).plan} == {"absenergy": 0}

    def test_bad_dtau(self):
        with pytest.raises(InvalidParameterError):
            resemblance_program("mom", 0)


class TestRoundTrip:
    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2 ** 32))
    def test_print_parse(self, seed):
        p = random_program(random.Random(seed))
        q = parse_program(p.to_json())
        assert q == p
        assert q.to_json() == p.to_json()
        assert q.hash == p.hash

    def test_constructed_program_validates(self):
        p = FeatureProgram(orders=(OrderBlock(0, (RAW,), (("m", Call("wmean", (RAW, 3))),)),))
        assert p.feature_names == ("raw", "m")
