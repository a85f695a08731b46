"""The feedback loop: candidate → probe doctests → verdicts → reveal.

A session walks the state machine

    created → candidate_ready → awaiting_feedback → (revealed | correcting)
    correcting → (revealed | failed)

driven by three operations: ``start_session`` generates the initial
candidate and the proposed doctests, ``apply_feedback`` folds in the
human verdicts, and ``correct_and_select`` runs the repair loop and
reveals the best candidate seen.
"""

from __future__ import annotations

import ast
import enum
import secrets
import time
from dataclasses import dataclass, field
from typing import Sequence

from .executor import Sandbox, SandboxLimits, check_doctests
from .generation import (
    CandidateImplementation,
    GenerationParams,
    GenerationRole,
    GenerationTransportError,
    GeneratorBackend,
    NoCodeFound,
    Provenance,
    build_correction_prompt,
    build_initial_prompt,
    extract_code,
)
from .inputs import DEFAULT_CORPUS_CAP, EdgeCaseGenerator, build_corpus
from .model import (
    Doctest,
    DoctestCall,
    DoctestOrigin,
    ExecutionOutcome,
    ExpectedOutcome,
    InputSource,
    InputTuple,
    OutcomeKind,
    TaskSpecification,
    ValueLiteral,
    outcome_matches,
    outcome_to_expected,
    outcomes_equal,
    parse_specification,
    render_specification,
)

DOCUMENT_VERSION = 1


class GenerationFailed(Exception):
    """No usable candidate after the configured number of attempts."""


class VerdictCountMismatch(Exception):
    """Feedback must address each proposed doctest exactly once."""


class InvalidCorrection(Exception):
    """A rejection carried no usable corrected outcome."""


class WrongState(Exception):
    """The operation is not legal in the session's current state."""


class SessionState(enum.Enum):
    CREATED = "created"
    CANDIDATE_READY = "candidate_ready"
    AWAITING_FEEDBACK = "awaiting_feedback"
    CORRECTING = "correcting"
    REVEALED = "revealed"
    FAILED = "failed"


class Verdict(enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"


@dataclass(frozen=True)
class FeedbackItem:
    """One human verdict on one proposed doctest."""

    input: InputTuple
    shown_outcome: ExecutionOutcome
    verdict: Verdict
    corrected: ExpectedOutcome | None = None

    def __post_init__(self) -> None:
        if self.verdict is Verdict.ACCEPT:
            if self.corrected is not None:
                raise InvalidCorrection("accepted items carry no correction")
            return
        if self.corrected is None:
            raise InvalidCorrection("rejected items need a corrected outcome")
        if outcome_matches(self.corrected, self.shown_outcome):
            raise InvalidCorrection("correction equals the shown outcome")


@dataclass(frozen=True)
class ProposedDoctest:
    """A doctest rendered from the candidate's output on one input.

    ``doctest`` is None when the outcome cannot be written as a doctest
    (timeouts and sandbox faults); such rows can still be rejected.
    ``is_given`` marks the row that restates a given doctest verbatim;
    those rows are immutable.
    """

    input: InputTuple
    shown_outcome: ExecutionOutcome
    doctest: Doctest | None
    is_given: bool


@dataclass(frozen=True)
class SessionConfig:
    max_correction_attempts: int = 1
    corpus_cap: int = DEFAULT_CORPUS_CAP
    generation_retries: int = 0
    limits: SandboxLimits = field(default_factory=SandboxLimits)
    params: GenerationParams = field(default_factory=GenerationParams)

    def __post_init__(self) -> None:
        if self.max_correction_attempts < 1:
            raise ValueError("max_correction_attempts must be >= 1")
        if self.corpus_cap < 1:
            raise ValueError("corpus_cap must be >= 1")
        if self.generation_retries < 0:
            raise ValueError("generation_retries must be >= 0")


@dataclass
class Session:
    id: str
    spec: TaskSpecification
    config: SessionConfig
    state: SessionState = SessionState.CREATED
    candidates: list[CandidateImplementation] = field(default_factory=list)
    proposed: list[ProposedDoctest] = field(default_factory=list)
    feedback: list[FeedbackItem] = field(default_factory=list)
    given_doctest_failures: list[Doctest] = field(default_factory=list)
    accepted_doctests: list[Doctest] = field(default_factory=list)
    corrected_doctests: list[Doctest] = field(default_factory=list)
    revealed: CandidateImplementation | None = None
    failure_reason: str = ""
    attempts_used: int = 0
    created_at: float = field(default_factory=time.time)
    updated_at: float = field(default_factory=time.time)

    def all_doctests(self) -> list[Doctest]:
        """Given, accepted, and corrected doctests, deduplicated."""
        merged: dict = {}
        for dt in (*self.spec.given_doctests(), *self.accepted_doctests, *self.corrected_doctests):
            merged.setdefault(dt.content_key(), dt)
        return list(merged.values())

    def _touch(self) -> None:
        self.updated_at = time.time()


def new_session_id() -> str:
    return secrets.token_hex(16)


def start_session(
    spec: TaskSpecification,
    backend: GeneratorBackend,
    edge_gen: EdgeCaseGenerator,
    config: SessionConfig | None = None,
    session_id: str | None = None,
) -> Session:
    """Generate the initial candidate and propose doctests for review."""
    config = config or SessionConfig()
    session = Session(id=session_id or new_session_id(), spec=spec, config=config)
    candidate = _generate_initial(spec, backend, config)
    session.candidates.append(candidate)
    session.state = SessionState.CANDIDATE_READY
    with Sandbox(config.limits) as sandbox:
        given_results = check_doctests(
            candidate,
            spec.given_doctests(),
            function_name=spec.function_name,
            sandbox=sandbox,
        )
        session.given_doctest_failures = [dt for dt, ok in given_results.items() if not ok]
        corpus = build_corpus(
            spec, candidate, backend, edge_gen, cap=config.corpus_cap, params=config.params
        )
        given_by_args = {
            dt.call.args: dt for dt in spec.given_doctests()
        }
        for item in corpus:
            outcome = sandbox.run(candidate.source, spec.function_name, item.args)
            session.proposed.append(_propose(spec, item, outcome, given_by_args))
    session.state = SessionState.AWAITING_FEEDBACK
    session._touch()
    return session


def _generate_initial(
    spec: TaskSpecification, backend: GeneratorBackend, config: SessionConfig
) -> CandidateImplementation:
    attempts = 1 + config.generation_retries
    last_error: Exception | None = None
    for _ in range(attempts):
        completion = backend.complete(
            GenerationRole.INITIAL_CODEGEN, build_initial_prompt(spec), config.params
        )
        try:
            return extract_code(completion, spec, Provenance.initial())
        except NoCodeFound as exc:
            last_error = exc
    raise GenerationFailed(
        f"no usable candidate after {attempts} attempt(s)"
    ) from last_error


def _propose(
    spec: TaskSpecification,
    item: InputTuple,
    outcome: ExecutionOutcome,
    given_by_args: dict,
) -> ProposedDoctest:
    given = given_by_args.get(item.args)
    if given is not None and outcome_matches(given.expected, outcome):
        return ProposedDoctest(item, outcome, given, is_given=True)
    try:
        expected = outcome_to_expected(outcome)
    except ValueError:
        return ProposedDoctest(item, outcome, None, is_given=False)
    doctest = Doctest(
        DoctestCall(spec.function_name, item.args),
        expected,
        DoctestOrigin.SYSTEM_PROPOSED,
    )
    return ProposedDoctest(item, outcome, doctest, is_given=False)


def apply_feedback(session: Session, verdicts: Sequence[FeedbackItem]) -> Session:
    """Fold human verdicts into the session; decide reveal vs repair."""
    if session.state is not SessionState.AWAITING_FEEDBACK:
        raise WrongState(f"cannot apply feedback in state {session.state.value}")
    if len(verdicts) != len(session.proposed):
        raise VerdictCountMismatch(
            f"expected {len(session.proposed)} verdicts, got {len(verdicts)}"
        )
    for row, item in zip(session.proposed, verdicts):
        if item.input.render() != row.input.render():
            raise VerdictCountMismatch(
                f"verdict input {item.input.render()} does not match "
                f"proposed input {row.input.render()}"
            )
        if not outcomes_equal(item.shown_outcome, row.shown_outcome):
            raise VerdictCountMismatch(
                f"verdict for {item.input.render()} cites a different shown outcome"
            )
        if item.verdict is Verdict.REJECT and row.is_given:
            raise InvalidCorrection("the given doctest is immutable")
    accepted: list[Doctest] = []
    corrected: list[Doctest] = []
    for row, item in zip(session.proposed, verdicts):
        if item.verdict is Verdict.ACCEPT:
            if row.doctest is not None:
                accepted.append(row.doctest)
        else:
            assert item.corrected is not None
            corrected.append(
                Doctest(
                    DoctestCall(session.spec.function_name, row.input.args),
                    item.corrected,
                    DoctestOrigin.HUMAN_CORRECTED,
                )
            )
    session.feedback = list(verdicts)
    session.accepted_doctests = _dedupe(accepted)
    failing = _dedupe(corrected + session.given_doctest_failures)
    session.corrected_doctests = _dedupe(corrected)
    if not failing:
        session.revealed = session.candidates[-1]
        session.state = SessionState.REVEALED
    else:
        session.state = SessionState.CORRECTING
    session._touch()
    return session


def _dedupe(doctests: Sequence[Doctest]) -> list[Doctest]:
    merged: dict = {}
    for dt in doctests:
        merged.setdefault(dt.content_key(), dt)
    return list(merged.values())


def correct_and_select(session: Session, backend: GeneratorBackend) -> Session:
    """Run the repair loop, then reveal the best candidate seen."""
    if session.state is not SessionState.CORRECTING:
        raise WrongState(f"cannot correct in state {session.state.value}")
    spec = session.spec
    config = session.config
    all_doctests = session.all_doctests()
    corrections_extracted = 0
    with Sandbox(config.limits) as sandbox:
        latest = session.candidates[-1]
        results = check_doctests(
            latest, all_doctests, function_name=spec.function_name, sandbox=sandbox
        )
        failing = [dt for dt in all_doctests if not results[dt]]
        for attempt in range(1, config.max_correction_attempts + 1):
            if not failing:
                break
            passing = [dt for dt in all_doctests if results[dt]]
            prompt = build_correction_prompt(spec, passing, failing, latest)
            session.attempts_used = attempt
            try:
                completion = backend.complete(GenerationRole.CORRECTION, prompt, config.params)
            except GenerationTransportError as exc:
                session.state = SessionState.FAILED
                session.failure_reason = f"correction backend failed: {exc}"
                session._touch()
                return session
            try:
                candidate = extract_code(completion, spec, Provenance.corrected(attempt))
            except NoCodeFound:
                continue
            corrections_extracted += 1
            session.candidates.append(candidate)
            latest = candidate
            results = check_doctests(
                latest, all_doctests, function_name=spec.function_name, sandbox=sandbox
            )
            failing = [dt for dt in all_doctests if not results[dt]]
    if session.attempts_used and corrections_extracted == 0:
        session.state = SessionState.FAILED
        session.failure_reason = "every correction attempt produced no code"
        session._touch()
        return session
    session.revealed = select_best_candidate(session.candidates, all_doctests)
    session.state = SessionState.REVEALED
    session._touch()
    return session


def select_best_candidate(
    candidates: Sequence[CandidateImplementation], doctests: Sequence[Doctest]
) -> CandidateImplementation:
    """Most doctests passed; ties go to the most recently generated."""
    if not candidates:
        raise ValueError("no candidates to select from")
    best = candidates[0]
    best_count = -1
    for candidate in candidates:
        count = sum(1 for dt in doctests if candidate.doctest_results.get(dt, False))
        if count >= best_count:
            best, best_count = candidate, count
    return best


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _expected_to_doc(expected: ExpectedOutcome) -> dict:
    if expected.is_exception:
        return {
            "kind": "exception",
            "name": expected.exception_name,
            "message": expected.exception_message,
        }
    assert expected.value is not None
    return {"kind": "value", "text": expected.value.canonical_text}


def _expected_from_doc(doc: dict) -> ExpectedOutcome:
    if doc["kind"] == "exception":
        return ExpectedOutcome.of_exception(doc["name"], doc.get("message", ""))
    return ExpectedOutcome.of_value(ValueLiteral.parse(doc["text"]))


def _outcome_to_doc(outcome: ExecutionOutcome) -> dict:
    doc: dict = {"kind": outcome.kind.value, "wall_time_ms": outcome.wall_time_ms}
    if outcome.kind is OutcomeKind.VALUE:
        assert outcome.value is not None
        doc["value_text"] = outcome.value.canonical_text
    elif outcome.kind is OutcomeKind.EXCEPTION:
        doc["exception_name"] = outcome.exception_name
        doc["exception_message"] = outcome.exception_message
    elif outcome.kind is OutcomeKind.SANDBOX_ERROR:
        doc["detail"] = outcome.detail
    return doc


def _outcome_from_doc(doc: dict) -> ExecutionOutcome:
    kind = doc["kind"]
    wall = doc.get("wall_time_ms", 0.0)
    if kind == "value":
        return ExecutionOutcome.of_value(ValueLiteral.parse(doc["value_text"]), wall_time_ms=wall)
    if kind == "exception":
        return ExecutionOutcome.of_exception(
            doc.get("exception_name", "Exception"),
            doc.get("exception_message", ""),
            wall_time_ms=wall,
        )
    if kind == "timeout":
        return ExecutionOutcome.timeout(wall_time_ms=wall)
    if kind == "resource_exceeded":
        return ExecutionOutcome.resource_exceeded(wall_time_ms=wall)
    return ExecutionOutcome.sandbox_error(doc.get("detail", ""), wall_time_ms=wall)


def _doctest_to_doc(dt: Doctest) -> dict:
    return {
        "args_text": _args_text(dt.call.args),
        "expected": _expected_to_doc(dt.expected),
        "origin": dt.origin.value,
    }


def _doctest_from_doc(doc: dict, function_name: str) -> Doctest:
    return Doctest(
        DoctestCall(function_name, _args_from_text(doc["args_text"])),
        _expected_from_doc(doc["expected"]),
        DoctestOrigin(doc["origin"]),
    )


def _args_text(args: tuple[ValueLiteral, ...]) -> str:
    if len(args) == 1:
        return f"({args[0].canonical_text},)"
    return "(" + ", ".join(a.canonical_text for a in args) + ")"


def _args_from_text(text: str) -> tuple[ValueLiteral, ...]:
    values = ast.literal_eval(text)
    return tuple(ValueLiteral(v) for v in values)


def _input_to_doc(item: InputTuple) -> dict:
    return {"args_text": _args_text(item.args), "source": item.source.value}


def _input_from_doc(doc: dict) -> InputTuple:
    return InputTuple(_args_from_text(doc["args_text"]), InputSource(doc["source"]))


def _candidate_to_doc(candidate: CandidateImplementation) -> dict:
    return {
        "source": candidate.source,
        "provenance": {
            "kind": candidate.provenance.kind,
            "attempt": candidate.provenance.attempt,
        },
        "doctest_results": [
            [_doctest_to_doc(dt), ok] for dt, ok in candidate.doctest_results.items()
        ],
    }


def _candidate_from_doc(doc: dict, function_name: str) -> CandidateImplementation:
    provenance = Provenance(doc["provenance"]["kind"], doc["provenance"]["attempt"])
    candidate = CandidateImplementation(doc["source"], provenance)
    for dt_doc, ok in doc.get("doctest_results", []):
        candidate.doctest_results[_doctest_from_doc(dt_doc, function_name)] = ok
    return candidate


def to_document(session: Session) -> dict:
    """Serialize a session to a plain-JSON document."""
    revealed_index = None
    if session.revealed is not None:
        revealed_index = next(
            i for i, c in enumerate(session.candidates) if c is session.revealed
        )
    return {
        "version": DOCUMENT_VERSION,
        "id": session.id,
        "state": session.state.value,
        "spec_text": render_specification(session.spec),
        "config": {
            "max_correction_attempts": session.config.max_correction_attempts,
            "corpus_cap": session.config.corpus_cap,
            "generation_retries": session.config.generation_retries,
            "wall_time_ms": session.config.limits.wall_time_ms,
            "memory_bytes": session.config.limits.memory_bytes,
            "temperature": session.config.params.temperature,
            "top_p": session.config.params.top_p,
            "top_k": session.config.params.top_k,
            "max_tokens": session.config.params.max_tokens,
        },
        "candidates": [_candidate_to_doc(c) for c in session.candidates],
        "proposed": [
            {
                "input": _input_to_doc(row.input),
                "shown_outcome": _outcome_to_doc(row.shown_outcome),
                "doctest": _doctest_to_doc(row.doctest) if row.doctest else None,
                "is_given": row.is_given,
            }
            for row in session.proposed
        ],
        "feedback": [
            {
                "input": _input_to_doc(item.input),
                "shown_outcome": _outcome_to_doc(item.shown_outcome),
                "verdict": item.verdict.value,
                "corrected": _expected_to_doc(item.corrected) if item.corrected else None,
            }
            for item in session.feedback
        ],
        "given_doctest_failures": [_doctest_to_doc(dt) for dt in session.given_doctest_failures],
        "accepted_doctests": [_doctest_to_doc(dt) for dt in session.accepted_doctests],
        "corrected_doctests": [_doctest_to_doc(dt) for dt in session.corrected_doctests],
        "revealed_index": revealed_index,
        "failure_reason": session.failure_reason,
        "attempts_used": session.attempts_used,
        "created_at": session.created_at,
        "updated_at": session.updated_at,
    }


def from_document(doc: dict) -> Session:
    """Rebuild a session from its serialized document."""
    if doc.get("version") != DOCUMENT_VERSION:
        raise ValueError(f"unsupported session document version: {doc.get('version')!r}")
    spec = parse_specification(doc["spec_text"])
    cfg = doc["config"]
    config = SessionConfig(
        max_correction_attempts=cfg["max_correction_attempts"],
        corpus_cap=cfg["corpus_cap"],
        generation_retries=cfg["generation_retries"],
        limits=SandboxLimits(
            wall_time_ms=cfg["wall_time_ms"], memory_bytes=cfg["memory_bytes"]
        ),
        params=GenerationParams(
            temperature=cfg["temperature"],
            top_p=cfg["top_p"],
            top_k=cfg["top_k"],
            max_tokens=cfg["max_tokens"],
        ),
    )
    session = Session(
        id=doc["id"],
        spec=spec,
        config=config,
        state=SessionState(doc["state"]),
        created_at=doc.get("created_at", time.time()),
        updated_at=doc.get("updated_at", time.time()),
        failure_reason=doc.get("failure_reason", ""),
        attempts_used=doc.get("attempts_used", 0),
    )
    name = spec.function_name
    session.candidates = [_candidate_from_doc(c, name) for c in doc.get("candidates", [])]
    session.proposed = [
        ProposedDoctest(
            input=_input_from_doc(row["input"]),
            shown_outcome=_outcome_from_doc(row["shown_outcome"]),
            doctest=_doctest_from_doc(row["doctest"], name) if row.get("doctest") else None,
            is_given=row["is_given"],
        )
        for row in doc.get("proposed", [])
    ]
    session.feedback = [
        FeedbackItem(
            input=_input_from_doc(item["input"]),
            shown_outcome=_outcome_from_doc(item["shown_outcome"]),
            verdict=Verdict(item["verdict"]),
            corrected=_expected_from_doc(item["corrected"]) if item.get("corrected") else None,
        )
        for item in doc.get("feedback", [])
    ]
    session.given_doctest_failures = [
        _doctest_from_doc(d, name) for d in doc.get("given_doctest_failures", [])
    ]
    session.accepted_doctests = [
        _doctest_from_doc(d, name) for d in doc.get("accepted_doctests", [])
    ]
    session.corrected_doctests = [
        _doctest_from_doc(d, name) for d in doc.get("corrected_doctests", [])
    ]
    if doc.get("revealed_index") is not None:
        session.revealed = session.candidates[doc["revealed_index"]]
    return session
