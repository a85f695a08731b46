"""Core value model: task specifications, doctests, literals, and outcomes.

A task specification is the textual artifact the whole pipeline revolves
around: a single function header, a docstring explaining the purpose, and
one or more doctests pinning concrete input/output pairs. Everything that
flows between the other modules (probe inputs, execution results, proposed
doctests, human corrections) is expressed with the value types defined
here, so rendering and comparison stay canonical in exactly one place.

The literal grammar is deliberately closed: int, float (finite only),
str, bool, None, and lists/tuples thereof. Values outside the grammar are
rejected at construction time rather than silently compared by object
identity later.
"""

from __future__ import annotations

import ast
import enum
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence, Union


class MalformedSpec(Exception):
    """The specification text violates the expected shape or invariants."""


# ---------------------------------------------------------------------------
# Literals
# ---------------------------------------------------------------------------

_STR_ESCAPES = {"\\": "\\\\", "'": "\\'", "\n": "\\n", "\r": "\\r", "\t": "\\t"}


def _render_str(s: str) -> str:
    out = []
    for ch in s:
        if ch in _STR_ESCAPES:
            out.append(_STR_ESCAPES[ch])
        elif ord(ch) < 0x20 or ord(ch) == 0x7F:
            out.append(f"\\x{ord(ch):02x}")
        else:
            out.append(ch)
    return "'" + "".join(out) + "'"


def _check_literal(value: Any) -> None:
    if value is None or isinstance(value, (bool, int, str)):
        return
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError("non-finite floats are outside the literal grammar")
        return
    if isinstance(value, (list, tuple)):
        for item in value:
            _check_literal(item)
        return
    raise ValueError(f"unsupported literal type: {type(value).__name__}")


def _render_value(value: Any) -> str:
    if value is None:
        return "None"
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return _render_str(value)
    if isinstance(value, list):
        return "[" + ", ".join(_render_value(v) for v in value) + "]"
    if isinstance(value, tuple):
        inner = ", ".join(_render_value(v) for v in value)
        return f"({inner},)" if len(value) == 1 else f"({inner})"
    raise ValueError(f"unsupported literal type: {type(value).__name__}")


class ValueLiteral:
    """A concrete value with a deterministic canonical rendering.

    Two literals are equal exactly when their canonical texts are equal;
    parsing the canonical text yields an equal literal. Strings render
    single-quoted, list/tuple elements are comma-space separated, and a
    one-element tuple keeps its trailing comma.
    """

    __slots__ = ("value", "canonical_text")

    def __init__(self, value: Any) -> None:
        _check_literal(value)
        self.value = value
        self.canonical_text = _render_value(value)

    @classmethod
    def parse(cls, text: str) -> "ValueLiteral":
        """Parse a literal from source text.

        Raises ValueError when the text is not a closed-grammar literal.
        """
        try:
            value = ast.literal_eval(text.strip())
        except (ValueError, SyntaxError, MemoryError, RecursionError) as exc:
            raise ValueError(f"not a literal: {text!r}") from exc
        return cls(value)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ValueLiteral):
            return NotImplemented
        return self.canonical_text == other.canonical_text

    def __hash__(self) -> int:
        return hash(self.canonical_text)

    def __repr__(self) -> str:
        return f"ValueLiteral({self.canonical_text})"


# ---------------------------------------------------------------------------
# Type hints
# ---------------------------------------------------------------------------


class HintKind(enum.Enum):
    STRING = "string"
    INTEGER = "integer"
    BOOLEAN = "boolean"
    FLOAT = "float"
    LIST = "list"
    NONE = "none"
    UNKNOWN = "unknown"


_SIMPLE_HINTS = {
    "str": HintKind.STRING,
    "int": HintKind.INTEGER,
    "bool": HintKind.BOOLEAN,
    "float": HintKind.FLOAT,
    "None": HintKind.NONE,
}


@dataclass(frozen=True)
class TypeHint:
    """A parsed annotation. ``element`` is populated only for list kinds."""

    kind: HintKind
    element: Union["TypeHint", None] = None
    text: str = ""

    @classmethod
    def parse(cls, text: str) -> "TypeHint":
        raw = text.strip()
        if raw in _SIMPLE_HINTS:
            return cls(_SIMPLE_HINTS[raw], text=raw)
        lowered = raw.lower()
        if lowered in ("list", "list[]"):
            return cls(HintKind.LIST, element=cls(HintKind.UNKNOWN), text=raw)
        if lowered.startswith("list[") and raw.endswith("]"):
            inner = raw[raw.index("[") + 1 : -1]
            return cls(HintKind.LIST, element=cls.parse(inner), text=raw)
        return cls(HintKind.UNKNOWN, text=raw)

    def render(self) -> str:
        return self.text


UNKNOWN_HINT = TypeHint(HintKind.UNKNOWN)


# ---------------------------------------------------------------------------
# Doctests and outcomes
# ---------------------------------------------------------------------------


class DoctestOrigin(enum.Enum):
    GIVEN = "given"
    SYSTEM_PROPOSED = "system_proposed"
    HUMAN_CORRECTED = "human_corrected"


@dataclass(frozen=True)
class DoctestCall:
    function_name: str
    args: tuple[ValueLiteral, ...]

    def render(self) -> str:
        return f"{self.function_name}({', '.join(a.canonical_text for a in self.args)})"


@dataclass(frozen=True)
class ExpectedOutcome:
    """Either an expected return value or an expected exception."""

    value: ValueLiteral | None = None
    exception_name: str | None = None
    exception_message: str = ""

    def __post_init__(self) -> None:
        if (self.value is None) == (self.exception_name is None):
            raise ValueError("exactly one of value/exception must be populated")

    @classmethod
    def of_value(cls, value: Any) -> "ExpectedOutcome":
        lit = value if isinstance(value, ValueLiteral) else ValueLiteral(value)
        return cls(value=lit)

    @classmethod
    def of_exception(cls, name: str, message: str = "") -> "ExpectedOutcome":
        return cls(exception_name=name, exception_message=message)

    @property
    def is_exception(self) -> bool:
        return self.exception_name is not None

    def matching_key(self) -> tuple[str, str]:
        """Key under the default matching semantics (exception messages ignored)."""
        if self.is_exception:
            return ("exception", self.exception_name or "")
        assert self.value is not None
        return ("value", self.value.canonical_text)


@dataclass(frozen=True)
class Doctest:
    call: DoctestCall
    expected: ExpectedOutcome
    origin: DoctestOrigin = DoctestOrigin.GIVEN

    def render(self) -> str:
        return render_doctest(self.call, self.expected)

    def content_key(self) -> tuple[str, tuple[str, str]]:
        """Identity of the doctest ignoring its origin."""
        return (self.call.render(), self.expected.matching_key())


class OutcomeKind(enum.Enum):
    VALUE = "value"
    EXCEPTION = "exception"
    TIMEOUT = "timeout"
    RESOURCE_EXCEEDED = "resource_exceeded"
    SANDBOX_ERROR = "sandbox_error"


@dataclass(frozen=True)
class ExecutionOutcome:
    """Observable result of running a candidate on one input."""

    kind: OutcomeKind
    value: ValueLiteral | None = None
    exception_name: str | None = None
    exception_message: str = ""
    detail: str = ""
    wall_time_ms: float = field(default=0.0, compare=False)

    @classmethod
    def of_value(cls, value: Any, wall_time_ms: float = 0.0) -> "ExecutionOutcome":
        lit = value if isinstance(value, ValueLiteral) else ValueLiteral(value)
        return cls(OutcomeKind.VALUE, value=lit, wall_time_ms=wall_time_ms)

    @classmethod
    def of_exception(
        cls, name: str, message: str = "", wall_time_ms: float = 0.0
    ) -> "ExecutionOutcome":
        return cls(
            OutcomeKind.EXCEPTION,
            exception_name=name,
            exception_message=message,
            wall_time_ms=wall_time_ms,
        )

    @classmethod
    def timeout(cls, wall_time_ms: float = 0.0) -> "ExecutionOutcome":
        return cls(OutcomeKind.TIMEOUT, wall_time_ms=wall_time_ms)

    @classmethod
    def resource_exceeded(cls, wall_time_ms: float = 0.0) -> "ExecutionOutcome":
        return cls(OutcomeKind.RESOURCE_EXCEEDED, wall_time_ms=wall_time_ms)

    @classmethod
    def sandbox_error(cls, detail: str, wall_time_ms: float = 0.0) -> "ExecutionOutcome":
        return cls(OutcomeKind.SANDBOX_ERROR, detail=detail, wall_time_ms=wall_time_ms)

    def observable_key(self) -> tuple[str, str]:
        """Identity used when two executions are compared for agreement.

        Values compare by canonical text, exceptions by name; timeouts and
        resource blowups agree only with the same kind.
        """
        if self.kind is OutcomeKind.VALUE:
            assert self.value is not None
            return ("value", self.value.canonical_text)
        if self.kind is OutcomeKind.EXCEPTION:
            return ("exception", self.exception_name or "")
        return (self.kind.value, "")


def outcome_matches(
    expected: ExpectedOutcome,
    actual: ExecutionOutcome,
    *,
    compare_messages: bool = False,
) -> bool:
    """Does an execution outcome satisfy an expected outcome?

    Value expectations match value outcomes with equal canonical text.
    Exception expectations match exception outcomes with the same name;
    messages take part only when ``compare_messages`` is set. Timeouts,
    resource blowups, and sandbox failures never match anything.
    """
    if expected.is_exception:
        if actual.kind is not OutcomeKind.EXCEPTION:
            return False
        if expected.exception_name != actual.exception_name:
            return False
        return not compare_messages or expected.exception_message == actual.exception_message
    if actual.kind is not OutcomeKind.VALUE:
        return False
    assert expected.value is not None and actual.value is not None
    return expected.value.canonical_text == actual.value.canonical_text


def outcomes_equal(a: ExecutionOutcome, b: ExecutionOutcome) -> bool:
    """Observable agreement between two executions (differential testing)."""
    return a.observable_key() == b.observable_key()


def outcome_to_expected(outcome: ExecutionOutcome) -> ExpectedOutcome:
    """Freeze an execution outcome into a doctest expectation.

    Only value and exception outcomes are expressible as doctests.
    """
    if outcome.kind is OutcomeKind.VALUE:
        assert outcome.value is not None
        return ExpectedOutcome.of_value(outcome.value)
    if outcome.kind is OutcomeKind.EXCEPTION:
        return ExpectedOutcome.of_exception(
            outcome.exception_name or "Exception", outcome.exception_message
        )
    raise ValueError(f"{outcome.kind.value} outcomes cannot become doctests")


# ---------------------------------------------------------------------------
# Input tuples
# ---------------------------------------------------------------------------


class InputSource(enum.Enum):
    LLM = "llm"
    EDGE_GENERATOR = "edge_generator"
    GIVEN_DOCTEST = "given_doctest"
    DOMAIN = "domain"


@dataclass(frozen=True)
class InputTuple:
    """One concrete argument tuple for the function under test."""

    args: tuple[ValueLiteral, ...]
    source: InputSource

    def render(self) -> str:
        inner = ", ".join(a.canonical_text for a in self.args)
        return f"({inner},)" if len(self.args) == 1 else f"({inner})"


# ---------------------------------------------------------------------------
# Task specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Parameter:
    name: str
    hint: TypeHint


@dataclass(frozen=True)
class TaskSpecification:
    """A function signature, purpose docstring, and at least one doctest.

    ``docstring`` holds the purpose text only; the doctest pairs are kept
    structured in ``doctests`` and recombined by :func:`render_specification`.
    """

    function_name: str
    parameters: tuple[Parameter, ...]
    return_hint: TypeHint
    docstring: str
    doctests: tuple[Doctest, ...]

    def __post_init__(self) -> None:
        if not self.function_name:
            raise MalformedSpec("function name must be non-empty")
        names = [p.name for p in self.parameters]
        if len(set(names)) != len(names):
            raise MalformedSpec("parameter names must be unique")
        if not self.doctests:
            raise MalformedSpec("at least one doctest is required")
        for dt in self.doctests:
            if dt.call.function_name != self.function_name:
                raise MalformedSpec(
                    f"doctest calls {dt.call.function_name!r}, expected {self.function_name!r}"
                )
            if len(dt.call.args) != len(self.parameters):
                raise MalformedSpec(
                    f"doctest {dt.call.render()} has arity {len(dt.call.args)}, "
                    f"expected {len(self.parameters)}"
                )

    @property
    def arity(self) -> int:
        return len(self.parameters)

    def signature(self) -> str:
        params = []
        for p in self.parameters:
            hint = p.hint.render()
            params.append(f"{p.name}: {hint}" if hint else p.name)
        ret = self.return_hint.render()
        arrow = f" -> {ret}" if ret else ""
        return f"def {self.function_name}({', '.join(params)}){arrow}:"

    def given_doctests(self) -> tuple[Doctest, ...]:
        return tuple(d for d in self.doctests if d.origin is DoctestOrigin.GIVEN)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

_TRACEBACK_HEADER = "Traceback (most recent call last):"


def render_doctest(
    call: DoctestCall, outcome: ExpectedOutcome | ExecutionOutcome
) -> str:
    """Render a call/outcome pair as a doctest block.

    A ``None`` value renders as an empty expected block, matching doctest
    convention; exceptions render in traceback form. Execution outcomes
    that cannot occur in a doctest (timeout and friends) render as a
    comment line so they remain displayable in review lists.
    """
    head = f">>> {call.render()}"
    if isinstance(outcome, ExecutionOutcome):
        if outcome.kind is OutcomeKind.VALUE:
            outcome = ExpectedOutcome.of_value(outcome.value)
        elif outcome.kind is OutcomeKind.EXCEPTION:
            outcome = ExpectedOutcome.of_exception(
                outcome.exception_name or "Exception", outcome.exception_message
            )
        else:
            return f"{head}\n# {outcome.kind.value}"
    if outcome.is_exception:
        last = outcome.exception_name or "Exception"
        if outcome.exception_message:
            last = f"{last}: {outcome.exception_message}"
        return f"{head}\n{_TRACEBACK_HEADER}\n  ...\n{last}"
    assert outcome.value is not None
    if outcome.value.value is None:
        return head
    return f"{head}\n{outcome.value.canonical_text}"


def render_specification(
    spec: TaskSpecification, doctests: Sequence[Doctest] | None = None
) -> str:
    """Render a specification in its canonical source form.

    The inverse of :func:`parse_specification` for specifications that
    were produced by it.  Passing ``doctests`` substitutes a different
    set of doctests into the docstring (possibly none).
    """
    shown = spec.doctests if doctests is None else tuple(doctests)
    lines = [spec.signature()]
    doc_lines = spec.docstring.splitlines() or [""]
    lines.append(f'    """{doc_lines[0]}')
    for extra in doc_lines[1:]:
        lines.append(f"    {extra}" if extra else "")
    for dt in shown:
        for dt_line in dt.render().splitlines():
            lines.append(f"    {dt_line}")
    lines.append('    """')
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _parse_call_line(line: str) -> DoctestCall:
    source = line[len(">>>") :].strip()
    try:
        expr = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise MalformedSpec(f"unparseable doctest call: {source!r}") from exc
    call = expr.body
    if not isinstance(call, ast.Call) or not isinstance(call.func, ast.Name):
        raise MalformedSpec(f"doctest line is not a plain function call: {source!r}")
    if call.keywords:
        raise MalformedSpec(f"keyword arguments are not supported: {source!r}")
    args = []
    for node in call.args:
        try:
            args.append(ValueLiteral(ast.literal_eval(node)))
        except ValueError as exc:
            raise MalformedSpec(f"doctest argument is not a literal: {source!r}") from exc
    return DoctestCall(call.func.id, tuple(args))


def _parse_expected_block(lines: list[str]) -> ExpectedOutcome:
    if not lines:
        return ExpectedOutcome.of_value(None)
    if lines[0].strip() == _TRACEBACK_HEADER:
        last = lines[-1].strip()
        name, _, message = last.partition(":")
        if not name.isidentifier():
            raise MalformedSpec(f"malformed doctest traceback tail: {last!r}")
        return ExpectedOutcome.of_exception(name, message.strip())
    if len(lines) > 1:
        raise MalformedSpec(f"multi-line doctest expectations are not supported: {lines!r}")
    try:
        return ExpectedOutcome.of_value(ValueLiteral.parse(lines[0]))
    except ValueError as exc:
        raise MalformedSpec(f"doctest expectation is not a literal: {lines[0]!r}") from exc


def split_docstring(docstring: str) -> tuple[str, list[Doctest]]:
    """Split a cleaned docstring into purpose text and doctest pairs."""
    lines = docstring.splitlines()
    purpose: list[str] = []
    doctests: list[Doctest] = []
    i = 0
    while i < len(lines) and not lines[i].lstrip().startswith(">>>"):
        purpose.append(lines[i])
        i += 1
    while i < len(lines):
        line = lines[i].strip()
        if not line:
            i += 1
            continue
        if not line.startswith(">>>"):
            raise MalformedSpec(f"unexpected text after doctests: {line!r}")
        call = _parse_call_line(line)
        i += 1
        expected_lines: list[str] = []
        while i < len(lines) and not lines[i].lstrip().startswith(">>>"):
            stripped = lines[i].strip()
            if stripped:
                expected_lines.append(stripped)
            i += 1
        doctests.append(
            Doctest(call, _parse_expected_block(expected_lines), DoctestOrigin.GIVEN)
        )
    while purpose and not purpose[-1].strip():
        purpose.pop()
    return "\n".join(purpose), doctests


def parse_specification(text: str) -> TaskSpecification:
    """Parse a specification source block.

    The block must contain a single function header, a docstring, and at
    least one doctest pair in the docstring's final lines. Raises
    :class:`MalformedSpec` otherwise.
    """
    try:
        module = ast.parse(text)
    except SyntaxError as exc:
        raise MalformedSpec(f"specification does not parse: {exc}") from exc
    defs = [n for n in module.body if isinstance(n, ast.FunctionDef)]
    if len(defs) != 1:
        raise MalformedSpec(f"expected exactly one function definition, found {len(defs)}")
    fn = defs[0]
    arg_nodes = fn.args
    if arg_nodes.posonlyargs or arg_nodes.kwonlyargs or arg_nodes.vararg or arg_nodes.kwarg:
        raise MalformedSpec("only plain positional parameters are supported")
    parameters = tuple(
        Parameter(
            a.arg,
            TypeHint.parse(ast.unparse(a.annotation)) if a.annotation else UNKNOWN_HINT,
        )
        for a in arg_nodes.args
    )
    return_hint = TypeHint.parse(ast.unparse(fn.returns)) if fn.returns else UNKNOWN_HINT
    raw_doc = ast.get_docstring(fn, clean=True)
    if raw_doc is None:
        raise MalformedSpec("specification has no docstring")
    purpose, doctests = split_docstring(raw_doc)
    if not doctests:
        raise MalformedSpec("specification has no doctests")
    return TaskSpecification(
        function_name=fn.name,
        parameters=parameters,
        return_hint=return_hint,
        docstring=purpose,
        doctests=tuple(doctests),
    )


def inputs_from_doctests(doctests: Iterable[Doctest]) -> list[InputTuple]:
    """Lift doctest call arguments into input tuples."""
    return [InputTuple(dt.call.args, InputSource.GIVEN_DOCTEST) for dt in doctests]
