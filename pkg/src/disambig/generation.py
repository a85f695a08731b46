"""Prompt construction, generator backends, and completion parsing.

Three prompt templates drive the pipeline: initial code generation,
probe input suggestion, and code correction.  A pluggable backend turns
a prompt into a completion; completions are then normalized back into
function source or literal input tuples.
"""

from __future__ import annotations

import abc
import ast
import enum
import json
import logging
import textwrap
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import requests

from .model import (
    Doctest,
    InputSource,
    InputTuple,
    TaskSpecification,
    ValueLiteral,
    render_specification,
)

logger = logging.getLogger(__name__)

FIXTURE_VERSION = 1


class NoCodeFound(Exception):
    """The completion contained no usable function definition."""


class UnparseableList(Exception):
    """The completion contained no parseable list of test inputs."""


class EmptyFailingSet(Exception):
    """Correction requires at least one failing doctest."""


class GenerationTransportError(Exception):
    """The backend could not produce a completion."""


class FixtureExhausted(GenerationTransportError):
    """The scripted backend ran out of recorded completions."""


class GenerationRole(enum.Enum):
    INITIAL_CODEGEN = "initial_codegen"
    INPUT_GEN = "input_gen"
    CORRECTION = "correction"


@dataclass(frozen=True)
class GenerationParams:
    """Sampling parameters passed to the generator backend."""

    temperature: float = 0.7
    top_p: float = 0.8
    top_k: int = 20
    max_tokens: int = 1024

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.top_k < 0:
            raise ValueError("top_k must be >= 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class Provenance:
    """Where a candidate implementation came from."""

    kind: str  # one of: initial, corrected, reference
    attempt: int | None = None

    @classmethod
    def initial(cls) -> "Provenance":
        return cls("initial")

    @classmethod
    def corrected(cls, attempt: int) -> "Provenance":
        return cls("corrected", attempt)

    @classmethod
    def reference(cls) -> "Provenance":
        return cls("reference")

    def render(self) -> str:
        if self.kind == "corrected":
            return f"corrected({self.attempt})"
        return self.kind


@dataclass
class CandidateImplementation:
    """A generated (or reference) implementation under evaluation."""

    source: str
    provenance: Provenance
    doctest_results: dict[Doctest, bool] = field(default_factory=dict)

    def passed_count(self) -> int:
        return sum(1 for ok in self.doctest_results.values() if ok)


class GeneratorBackend(abc.ABC):
    """Produces one completion per call for a role-tagged prompt."""

    @abc.abstractmethod
    def complete(self, role: GenerationRole, prompt: str, params: GenerationParams) -> str:
        raise NotImplementedError


class ScriptedBackend(GeneratorBackend):
    """Replays completions from a fixture, keyed by (role, call index).

    Deterministic: the n-th call for a given role always returns the
    n-th recorded completion for that role.
    """

    def __init__(self, completions: Mapping[str, Sequence[str]]) -> None:
        self._completions = {role: list(texts) for role, texts in completions.items()}
        self._counters: dict[str, int] = {}
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        document = json.loads(Path(path).read_text())
        version = document.get("version")
        if version != FIXTURE_VERSION:
            raise ValueError(f"unsupported fixture version: {version!r}")
        completions = document.get("completions", {})
        unknown = set(completions) - {role.value for role in GenerationRole}
        if unknown:
            raise ValueError(f"unknown fixture roles: {sorted(unknown)}")
        return cls(completions)

    def complete(self, role: GenerationRole, prompt: str, params: GenerationParams) -> str:
        with self._lock:
            index = self._counters.get(role.value, 0)
            self._counters[role.value] = index + 1
        recorded = self._completions.get(role.value, [])
        if index >= len(recorded):
            raise FixtureExhausted(
                f"no recorded completion for role {role.value!r} call #{index}"
            )
        return recorded[index]

    def calls(self, role: GenerationRole) -> int:
        """How many completions have been requested for a role."""
        with self._lock:
            return self._counters.get(role.value, 0)


@dataclass(frozen=True)
class HttpBackendConfig:
    """Connection settings for a chat-completions endpoint."""

    endpoint: str
    model: str
    api_key: str | None = None
    timeout_s: float = 60.0
    max_retries: int = 2
    backoff_s: float = 0.5


class HttpChatBackend(GeneratorBackend):
    """Calls a remote chat-completions endpoint over HTTP.

    Request and response bodies follow the common chat-completions JSON
    convention, so any compatible endpoint works.  Retries transient
    failures at most ``max_retries`` times, never silently beyond that.
    """

    def __init__(self, config: HttpBackendConfig, session: requests.Session | None = None):
        self._config = config
        self._session = session or requests.Session()

    def complete(self, role: GenerationRole, prompt: str, params: GenerationParams) -> str:
        payload = {
            "model": self._config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "top_p": params.top_p,
            "top_k": params.top_k,
            "max_tokens": params.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self._config.api_key:
            headers["Authorization"] = f"Bearer {self._config.api_key}"
        last_error: Exception | None = None
        for attempt in range(self._config.max_retries + 1):
            if attempt:
                time.sleep(self._config.backoff_s * attempt)
            try:
                response = self._session.post(
                    self._config.endpoint,
                    json=payload,
                    headers=headers,
                    timeout=self._config.timeout_s,
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = GenerationTransportError(
                    f"server error {response.status_code} from {self._config.endpoint}"
                )
                continue
            if response.status_code != 200:
                raise GenerationTransportError(
                    f"request failed with status {response.status_code}: {response.text[:200]}"
                )
            return self._extract_text(response)
        raise GenerationTransportError(
            f"no completion after {self._config.max_retries + 1} attempts"
        ) from last_error

    @staticmethod
    def _extract_text(response: requests.Response) -> str:
        try:
            body = response.json()
            choice = body["choices"][0]
        except (ValueError, LookupError, TypeError) as exc:
            raise GenerationTransportError("malformed completion response") from exc
        message = choice.get("message")
        if isinstance(message, dict) and isinstance(message.get("content"), str):
            return message["content"]
        if isinstance(choice.get("text"), str):
            return choice["text"]
        raise GenerationTransportError("completion response carries no text")


# ---------------------------------------------------------------------------
# Prompt templates
# ---------------------------------------------------------------------------


def build_initial_prompt(spec: TaskSpecification) -> str:
    """Prompt asking the backend to write the function body."""
    listing = render_specification(spec).rstrip("\n")
    return (
        "Consider the following Python function signature, docstring, and doctests:\n"
        "\n"
        f"{listing}\n"
        "\n"
        "Write ONLY the code for the function body. "
        "Ensure that the resulting function passes ALL doctests."
    )


def build_inputgen_prompt(spec: TaskSpecification) -> str:
    """Prompt asking the backend to suggest ambiguity-probing inputs."""
    listing = render_specification(spec).rstrip("\n")
    return (
        "You are an expert at designing test inputs to discover potential "
        "ambiguities in the docstring of a Python function. Consider the "
        "following Python function signature and docstring, which may "
        "include doctests:\n"
        "\n"
        f"{listing}\n"
        "\n"
        "Generate a list `test_inputs`, where each list item is a tuple "
        "corresponding to the function's arguments. The inputs you generate "
        "must explore the space of legal inputs thoroughly enough to "
        "discover potential ambiguities. DO NOT generate the function's "
        "expected outputs for the inputs in `test_inputs`.\n"
        "\n"
        "test_inputs = ["
    )


def build_correction_prompt(
    spec: TaskSpecification,
    passing: Sequence[Doctest],
    failing: Sequence[Doctest],
    buggy: CandidateImplementation,
) -> str:
    """Prompt asking the backend to repair a buggy candidate.

    The buggy function is shown with the passing doctests folded into
    its docstring, followed by the doctests it fails.
    """
    if not failing:
        raise EmptyFailingSet("correction needs at least one failing doctest")
    header = render_specification(spec, doctests=passing).rstrip("\n")
    body = candidate_body(buggy.source, spec.function_name)
    failing_block = "\n".join(dt.render() for dt in failing)
    return (
        "Although the following Python function passes the given doctests, "
        "it is BUGGY because the docstring is ambiguous i.e., it does not "
        "fully clarify the intended purpose:\n"
        "\n"
        f"{header}\n"
        f"{body}\n"
        "\n"
        "The above function FAILS the following doctests, which help "
        "clarify the function's intended purpose:\n"
        "\n"
        f"{failing_block}\n"
        "\n"
        "Rewrite or modify the function so that it satisfies ALL doctests. "
        "Remember that:\n"
        "• Some doctests fail because they correspond to edge cases. "
        "If necessary, modify the code to handle these cases separately.\n"
        "• Other doctests fail because the above code incorrectly "
        "generalizes the intended purpose. You must infer the intended "
        "general purpose from these doctests."
    )


# ---------------------------------------------------------------------------
# Completion parsing
# ---------------------------------------------------------------------------


def _fenced_blocks(text: str) -> list[str]:
    blocks = []
    lines = text.splitlines()
    inside = False
    current: list[str] = []
    for line in lines:
        if line.lstrip().startswith("```"):
            if inside:
                blocks.append("\n".join(current))
                current = []
            inside = not inside
            continue
        if inside:
            current.append(line)
    return blocks


def _trim_leading_prose(text: str) -> str:
    lines = text.splitlines()
    for i, line in enumerate(lines):
        stripped = line.strip()
        if stripped.startswith(("def ", "@", "import ", "from ", "#")):
            return "\n".join(lines[i:])
    return text


def _parse_longest_prefix(text: str) -> ast.Module | None:
    """Parse text as a module, truncating at the first syntax error.

    Trailing prose after valid code is dropped line by line.
    """
    lines = text.splitlines()
    while lines:
        try:
            return ast.parse("\n".join(lines))
        except SyntaxError as exc:
            cut = (exc.lineno or 1) - 1
            if cut >= len(lines):
                cut = len(lines) - 1
            if cut <= 0:
                return None
            lines = lines[:cut]
    return None


_KEEPABLE = (ast.Import, ast.ImportFrom, ast.FunctionDef, ast.ClassDef, ast.Assign, ast.AnnAssign)


def _function_from_module(text: str, name: str) -> str | None:
    trimmed = _trim_leading_prose(text)
    module = _parse_longest_prefix(trimmed)
    if module is None:
        return None
    matches = [
        node
        for node in module.body
        if isinstance(node, ast.FunctionDef) and node.name == name
    ]
    if len(matches) != 1:
        return None
    # Keep imports, helper definitions, and constants; drop loose
    # statements such as example calls that would run at load time.
    lines = trimmed.splitlines()
    keep: list[str] = []
    for node in module.body:
        if not isinstance(node, _KEEPABLE):
            continue
        end = node.end_lineno or node.lineno
        keep.extend(lines[node.lineno - 1 : end])
    source = "\n".join(keep) + "\n"
    try:
        ast.parse(source)
    except SyntaxError:
        return None
    return source


def _reattach_body(text: str, spec: TaskSpecification) -> str | None:
    body = textwrap.dedent(text).strip("\n")
    if not body.strip():
        return None
    if body.lstrip().startswith("def "):
        return None  # a full definition, not a body; handled elsewhere
    indented = textwrap.indent(body, "    ")
    candidate = render_specification(spec) + indented + "\n"
    try:
        module = ast.parse(candidate)
    except SyntaxError:
        module = _parse_longest_prefix(candidate)
    if module is None:
        return None
    fn = next(
        (
            node
            for node in module.body
            if isinstance(node, ast.FunctionDef) and node.name == spec.function_name
        ),
        None,
    )
    # The docstring is one statement; require real code to survive too.
    if fn is None or len(fn.body) < 2:
        return None
    lines = candidate.splitlines()
    end = fn.end_lineno or fn.lineno
    return "\n".join(lines[fn.lineno - 1 : end]) + "\n"


def extract_code(
    completion: str,
    spec: TaskSpecification,
    provenance: Provenance | None = None,
) -> CandidateImplementation:
    """Turn a completion into a candidate implementation.

    Accepts fenced code blocks, bare full definitions, and bare function
    bodies (which get the spec's header and docstring re-attached).
    """
    texts = _fenced_blocks(completion) or [completion]
    for text in texts:
        source = _function_from_module(text, spec.function_name)
        if source is not None:
            return CandidateImplementation(source, provenance or Provenance.initial())
    for text in texts:
        source = _reattach_body(text, spec)
        if source is not None:
            return CandidateImplementation(source, provenance or Provenance.initial())
    raise NoCodeFound(f"no {spec.function_name} definition found in completion")


def candidate_body(source: str, function_name: str) -> str:
    """Return the statement lines of a function, minus its docstring."""
    module = ast.parse(source)
    fn = next(
        node
        for node in module.body
        if isinstance(node, ast.FunctionDef) and node.name == function_name
    )
    body = fn.body
    if (
        body
        and isinstance(body[0], ast.Expr)
        and isinstance(body[0].value, ast.Constant)
        and isinstance(body[0].value.value, str)
    ):
        body = body[1:]
    if not body:
        return "    pass"
    lines = source.splitlines()
    start = body[0].lineno - 1
    end = body[-1].end_lineno or body[-1].lineno
    return "\n".join(lines[start:end])


def parse_test_inputs(completion: str, arity: int) -> list[InputTuple]:
    """Parse the ``test_inputs`` list from a completion.

    The prompt ends with the line ``test_inputs = [`` so completions
    usually continue the literal; a restated full assignment works too.
    Entries that are not literals of the right shape are skipped.
    """
    if arity < 1:
        raise ValueError("arity must be >= 1")
    texts = _fenced_blocks(completion) or [completion]
    for text in texts:
        node = _locate_inputs_list(text)
        if node is not None:
            return _coerce_entries(node, arity)
    raise UnparseableList("no test_inputs list found in completion")


def _locate_inputs_list(text: str) -> ast.List | None:
    candidates = []
    if "test_inputs" in text:
        candidates.append(text[text.index("test_inputs") :])
    candidates.append("test_inputs = [\n" + text)
    candidates.append("test_inputs = [\n" + text + "\n]")
    if "]" in text:
        # Trailing prose after the final bracket confuses a plain parse.
        candidates.append("test_inputs = [\n" + text[: text.rindex("]") + 1])
    for candidate in candidates:
        module = _parse_longest_prefix(candidate)
        if module is None:
            continue
        for node in module.body:
            if (
                isinstance(node, ast.Assign)
                and len(node.targets) == 1
                and isinstance(node.targets[0], ast.Name)
                and node.targets[0].id == "test_inputs"
                and isinstance(node.value, ast.List)
            ):
                return node.value
    return None


def _coerce_entries(node: ast.List, arity: int) -> list[InputTuple]:
    inputs: list[InputTuple] = []
    skipped = 0
    for element in node.elts:
        try:
            value = ast.literal_eval(element)
        except (ValueError, SyntaxError, TypeError):
            skipped += 1
            continue
        if not isinstance(value, tuple):
            if arity == 1:
                value = (value,)
            else:
                skipped += 1
                continue
        if len(value) != arity:
            skipped += 1
            continue
        try:
            args = tuple(ValueLiteral(item) for item in value)
        except ValueError:
            skipped += 1
            continue
        inputs.append(InputTuple(args=args, source=InputSource.LLM))
    if skipped:
        logger.warning("skipped %d malformed test_inputs entries", skipped)
    return inputs
