from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from disambig.model import (
    Doctest,
    DoctestCall,
    DoctestOrigin,
    ExecutionOutcome,
    ExpectedOutcome,
    HintKind,
    InputSource,
    MalformedSpec,
    Parameter,
    TaskSpecification,
    TypeHint,
    ValueLiteral,
    inputs_from_doctests,
    outcome_matches,
    outcome_to_expected,
    outcomes_equal,
    parse_specification,
    render_doctest,
    render_specification,
)

MIN_INDEX_SPEC = '''def min_index(s: str) -> int:
    """Find the index of the smallest digit ('0' to '9') in s.
    >>> min_index('2025')
    1
    """
'''

MIN_FREQ_SPEC = '''def min_freq(data: list[int]) -> int:
    """Find the minimum frequency. Return None if data is empty.
    >>> min_freq([1, 2, 1])
    2
    """
'''


def lit(value) -> ValueLiteral:
    return ValueLiteral(value)


class TestValueLiteral:
    def test_canonical_string_uses_single_quotes(self):
        assert lit("2025").canonical_text == "'2025'"

    def test_canonical_list_and_tuple_spacing(self):
        assert lit([1, 2, 1]).canonical_text == "[1, 2, 1]"
        assert lit((1, 2)).canonical_text == "(1, 2)"
        assert lit(("",)).canonical_text == "('',)"

    def test_bool_and_int_are_distinct(self):
        assert lit(True).canonical_text == "True"
        assert lit(1).canonical_text == "1"
        assert lit(True) != lit(1)

    def test_none_and_float(self):
        assert lit(None).canonical_text == "None"
        assert lit(2.5).canonical_text == "2.5"

    def test_rejects_outside_grammar(self):
        with pytest.raises(ValueError):
            ValueLiteral({"a": 1})
        with pytest.raises(ValueError):
            ValueLiteral(float("nan"))
        with pytest.raises(ValueError):
            ValueLiteral.parse("min_index('x')")

    def test_parse_round_trips_examples(self):
        for text in ["'2025'", "1", "-1", "None", "[1, 2, 1]", "('a', [1])", "True"]:
            parsed = ValueLiteral.parse(text)
            assert parsed.canonical_text == text

    @given(
        st.recursive(
            st.one_of(
                st.none(),
                st.booleans(),
                st.integers(),
                st.floats(allow_nan=False, allow_infinity=False),
                st.text(),
            ),
            lambda children: st.one_of(
                st.lists(children, max_size=3),
                st.lists(children, max_size=3).map(tuple),
            ),
            max_leaves=8,
        )
    )
    def test_render_parse_round_trip(self, value):
        original = ValueLiteral(value)
        reparsed = ValueLiteral.parse(original.canonical_text)
        assert reparsed == original
        assert reparsed.canonical_text == original.canonical_text


class TestTypeHint:
    def test_simple_kinds(self):
        assert TypeHint.parse("str").kind is HintKind.STRING
        assert TypeHint.parse("int").kind is HintKind.INTEGER
        assert TypeHint.parse("bool").kind is HintKind.BOOLEAN
        assert TypeHint.parse("float").kind is HintKind.FLOAT
        assert TypeHint.parse("None").kind is HintKind.NONE

    def test_list_carries_element(self):
        hint = TypeHint.parse("list[int]")
        assert hint.kind is HintKind.LIST
        assert hint.element is not None and hint.element.kind is HintKind.INTEGER
        bare = TypeHint.parse("list")
        assert bare.kind is HintKind.LIST
        assert bare.element is not None and bare.element.kind is HintKind.UNKNOWN

    def test_unknown_keeps_text(self):
        hint = TypeHint.parse("Sequence[int]")
        assert hint.kind is HintKind.UNKNOWN
        assert hint.render() == "Sequence[int]"


class TestParseSpecification:
    def test_parses_min_index(self):
        spec = parse_specification(MIN_INDEX_SPEC)
        assert spec.function_name == "min_index"
        assert [p.name for p in spec.parameters] == ["s"]
        assert spec.parameters[0].hint.kind is HintKind.STRING
        assert spec.return_hint.kind is HintKind.INTEGER
        assert spec.docstring == "Find the index of the smallest digit ('0' to '9') in s."
        assert len(spec.doctests) == 1
        dt = spec.doctests[0]
        assert dt.origin is DoctestOrigin.GIVEN
        assert dt.call.render() == "min_index('2025')"
        assert dt.expected.value == lit(1)

    def test_parses_min_freq(self):
        spec = parse_specification(MIN_FREQ_SPEC)
        assert spec.function_name == "min_freq"
        dt = spec.doctests[0]
        assert dt.call.args == (lit([1, 2, 1]),)
        assert dt.expected.value == lit(2)

    def test_docstring_without_doctest_is_rejected(self):
        source = 'def f(x: int) -> int:\n    """Just a purpose line."""\n'
        with pytest.raises(MalformedSpec):
            parse_specification(source)

    def test_missing_docstring_is_rejected(self):
        with pytest.raises(MalformedSpec):
            parse_specification("def f(x):\n    pass\n")

    def test_missing_header_is_rejected(self):
        with pytest.raises(MalformedSpec):
            parse_specification("x = 1\n")

    def test_doctest_arity_mismatch_is_rejected(self):
        source = 'def f(x: int, y: int) -> int:\n    """Add.\n    >>> f(1)\n    1\n    """\n'
        with pytest.raises(MalformedSpec):
            parse_specification(source)

    def test_doctest_for_other_function_is_rejected(self):
        source = 'def f(x: int) -> int:\n    """Do.\n    >>> g(1)\n    1\n    """\n'
        with pytest.raises(MalformedSpec):
            parse_specification(source)

    def test_none_expectation_is_empty_block(self):
        source = 'def f(x: int) -> int:\n    """Do.\n    >>> f(1)\n    >>> f(2)\n    3\n    """\n'
        spec = parse_specification(source)
        assert spec.doctests[0].expected.value == lit(None)
        assert spec.doctests[1].expected.value == lit(3)

    def test_exception_expectation(self):
        source = (
            'def f(x: int) -> int:\n'
            '    """Do.\n'
            '    >>> f(1)\n'
            '    Traceback (most recent call last):\n'
            '      ...\n'
            '    ValueError: bad input\n'
            '    """\n'
        )
        spec = parse_specification(source)
        expected = spec.doctests[0].expected
        assert expected.is_exception
        assert expected.exception_name == "ValueError"
        assert expected.exception_message == "bad input"

    def test_render_parse_round_trip(self):
        for source in (MIN_INDEX_SPEC, MIN_FREQ_SPEC):
            spec = parse_specification(source)
            assert parse_specification(render_specification(spec)) == spec

    def test_rendered_form_matches_source(self):
        spec = parse_specification(MIN_INDEX_SPEC)
        assert render_specification(spec) == MIN_INDEX_SPEC


class TestRenderDoctest:
    def test_value_pair(self):
        call = DoctestCall("min_index", (lit("2025"),))
        assert render_doctest(call, ExpectedOutcome.of_value(1)) == ">>> min_index('2025')\n1"

    def test_empty_string_input(self):
        call = DoctestCall("min_index", (lit(""),))
        assert render_doctest(call, ExpectedOutcome.of_value(0)) == ">>> min_index('')\n0"

    def test_none_renders_as_empty_expected_block(self):
        call = DoctestCall("min_freq", (lit([]),))
        assert render_doctest(call, ExpectedOutcome.of_value(None)) == ">>> min_freq([])"

    def test_exception_renders_in_traceback_form(self):
        call = DoctestCall("f", ())
        rendered = render_doctest(call, ExpectedOutcome.of_exception("ValueError", "bad"))
        assert rendered.startswith(">>> f()\nTraceback (most recent call last):")
        assert rendered.endswith("ValueError: bad")

    def test_execution_outcome_is_accepted(self):
        call = DoctestCall("f", (lit(1),))
        rendered = render_doctest(call, ExecutionOutcome.of_value(2))
        assert rendered == ">>> f(1)\n2"
        assert render_doctest(call, ExecutionOutcome.timeout()) == ">>> f(1)\n# timeout"


class TestOutcomeMatching:
    def test_equal_values_match(self):
        assert outcome_matches(ExpectedOutcome.of_value(1), ExecutionOutcome.of_value(1))

    def test_different_values_do_not_match(self):
        assert not outcome_matches(ExpectedOutcome.of_value(-1), ExecutionOutcome.of_value(0))

    def test_kind_mismatch_never_matches(self):
        assert not outcome_matches(ExpectedOutcome.of_value(2), ExecutionOutcome.timeout())
        assert not outcome_matches(
            ExpectedOutcome.of_exception("ValueError"), ExecutionOutcome.of_value(2)
        )

    def test_exception_message_ignored_by_default(self):
        expected = ExpectedOutcome.of_exception("ValueError", "one")
        actual = ExecutionOutcome.of_exception("ValueError", "two")
        assert outcome_matches(expected, actual)
        assert not outcome_matches(expected, actual, compare_messages=True)

    def test_reflexive_on_values(self):
        for value in (0, "x", [1, 2], None, True):
            assert outcome_matches(
                ExpectedOutcome.of_value(value), ExecutionOutcome.of_value(value)
            )

    def test_outcomes_equal_agreement(self):
        a = ExecutionOutcome.of_value(1, wall_time_ms=5.0)
        b = ExecutionOutcome.of_value(1, wall_time_ms=9.0)
        assert outcomes_equal(a, b)
        assert outcomes_equal(b, a)
        assert not outcomes_equal(a, ExecutionOutcome.of_value(2))
        assert not outcomes_equal(a, ExecutionOutcome.timeout())
        assert outcomes_equal(ExecutionOutcome.timeout(), ExecutionOutcome.timeout())

    def test_outcome_to_expected(self):
        assert outcome_to_expected(ExecutionOutcome.of_value(3)).value == lit(3)
        exc = outcome_to_expected(ExecutionOutcome.of_exception("KeyError", "k"))
        assert exc.exception_name == "KeyError"
        with pytest.raises(ValueError):
            outcome_to_expected(ExecutionOutcome.timeout())


class TestSpecInvariants:
    def test_given_doctest_inputs(self):
        spec = parse_specification(MIN_INDEX_SPEC)
        inputs = inputs_from_doctests(spec.given_doctests())
        assert len(inputs) == 1
        assert inputs[0].source is InputSource.GIVEN_DOCTEST
        assert inputs[0].render() == "('2025',)"

    def test_duplicate_parameter_names_rejected(self):
        with pytest.raises(MalformedSpec):
            TaskSpecification(
                function_name="f",
                parameters=(
                    Parameter("x", TypeHint.parse("int")),
                    Parameter("x", TypeHint.parse("int")),
                ),
                return_hint=TypeHint.parse("int"),
                docstring="d",
                doctests=(
                    Doctest(
                        DoctestCall("f", (lit(1), lit(2))),
                        ExpectedOutcome.of_value(3),
                    ),
                ),
            )
