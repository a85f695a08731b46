"""REST service for running feedback sessions, plus session persistence.

The HTTP layer is a thin adapter over the session module: every behavior
is reachable without the service running.  Sessions are persisted to a
filesystem store before any response is acknowledged, so a crash never
leaves a session in an unreadable state.
"""

from __future__ import annotations

import json
import os
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from fastapi import Body, FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware

from . import __version__
from .executor import SandboxLimits, SandboxUnavailable
from .generation import (
    GenerationParams,
    GenerationTransportError,
    GeneratorBackend,
    HttpBackendConfig,
    HttpChatBackend,
    ScriptedBackend,
)
from .inputs import EdgeCaseGenerator, HeuristicEdgeCaseGenerator
from .model import ExpectedOutcome, MalformedSpec, ValueLiteral, parse_specification
from .session import (
    FeedbackItem,
    GenerationFailed,
    InvalidCorrection,
    ProposedDoctest,
    Session,
    SessionConfig,
    SessionState,
    Verdict,
    VerdictCountMismatch,
    WrongState,
    _outcome_to_doc,
    apply_feedback,
    correct_and_select,
    from_document,
    start_session,
    to_document,
)

_ID_PATTERN = re.compile(r"^[A-Za-z0-9_-]{1,64}$")

DEFAULT_STORE_DIR = Path(".disambig") / "sessions"


class FeedbackPayloadError(Exception):
    """The feedback request body does not describe valid verdicts."""


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


class SessionStore:
    """Filesystem-backed session persistence.

    The current document lives in <id>.json, replaced atomically on
    every save; <id>.history.jsonl accumulates one line per persisted
    transition as an audit trail.  Saves flush to disk before
    returning, so an acknowledged transition survives a crash.
    """

    def __init__(self, root: str | Path) -> None:
        self._root = Path(root)
        self._root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    @property
    def root(self) -> Path:
        return self._root

    def lock(self, session_id: str) -> threading.Lock:
        """Per-session lock serializing load-mutate-save cycles."""
        with self._registry_lock:
            return self._locks.setdefault(session_id, threading.Lock())

    def save(self, session: Session) -> None:
        if not _ID_PATTERN.match(session.id):
            raise ValueError(f"unstorable session id: {session.id!r}")
        document = to_document(session)
        path = self._root / f"{session.id}.json"
        tmp = self._root / f"{session.id}.json.tmp"
        with tmp.open("w") as fh:
            json.dump(document, fh, indent=2)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
        with (self._root / f"{session.id}.history.jsonl").open("a") as fh:
            fh.write(json.dumps(document, separators=(",", ":")) + "\n")

    def load(self, session_id: str) -> Session:
        if not _ID_PATTERN.match(session_id or ""):
            raise KeyError(session_id)
        path = self._root / f"{session_id}.json"
        if not path.is_file():
            raise KeyError(session_id)
        return from_document(json.loads(path.read_text()))

    def exists(self, session_id: str) -> bool:
        return bool(_ID_PATTERN.match(session_id or "")) and (
            self._root / f"{session_id}.json"
        ).is_file()

    def ids(self) -> list[str]:
        return sorted(p.stem for p in self._root.glob("*.json"))


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def backend_from_spec(
    spec: str,
    *,
    model: str = "",
    api_key: str | None = None,
    timeout_s: float = 60.0,
) -> GeneratorBackend:
    """Build a generator backend from a command-line style descriptor.

    "scripted:<fixture.json>" replays recorded completions; anything of
    the form "http:<url>", "http://..." or "https://..." talks to a
    chat-completions endpoint (which needs a model name).
    """
    if spec.startswith("scripted:"):
        return ScriptedBackend.from_file(spec[len("scripted:") :])
    if spec.startswith(("http://", "https://")):
        url = spec
    elif spec.startswith("http:"):
        url = spec[len("http:") :]
    else:
        raise ValueError(
            f"unrecognized backend descriptor {spec!r}; expected "
            "scripted:<fixture.json> or an http(s) endpoint"
        )
    if not model:
        raise ValueError("an http backend needs a model name")
    return HttpChatBackend(
        HttpBackendConfig(endpoint=url, model=model, api_key=api_key, timeout_s=timeout_s)
    )


@dataclass
class ServiceConfig:
    """Everything the service needs: backend, store location, defaults."""

    backend: GeneratorBackend
    store_dir: Path = DEFAULT_STORE_DIR
    edge_generator: EdgeCaseGenerator = field(default_factory=HeuristicEdgeCaseGenerator)
    session: SessionConfig = field(default_factory=SessionConfig)

    @classmethod
    def from_env(cls, env: Mapping[str, str] | None = None) -> "ServiceConfig":
        """Read configuration from DISAMBIG_* environment variables."""
        env = os.environ if env is None else env
        descriptor = env.get("DISAMBIG_BACKEND", "")
        if not descriptor:
            raise ValueError(
                "DISAMBIG_BACKEND is not set; use scripted:<fixture.json> "
                "or an http(s) chat-completions endpoint"
            )
        backend = backend_from_spec(
            descriptor,
            model=env.get("DISAMBIG_MODEL", ""),
            api_key=env.get("DISAMBIG_API_KEY"),
            timeout_s=float(env.get("DISAMBIG_TIMEOUT_S", "60")),
        )
        return cls(
            backend=backend,
            store_dir=Path(env.get("DISAMBIG_STORE_DIR", str(DEFAULT_STORE_DIR))),
            session=session_config_from_env(env),
        )


def session_config_from_env(env: Mapping[str, str] | None = None) -> SessionConfig:
    """Session defaults from DISAMBIG_* environment variables."""
    env = os.environ if env is None else env
    base = SessionConfig()
    return SessionConfig(
        max_correction_attempts=int(
            env.get("DISAMBIG_MAX_CORRECTION_ATTEMPTS", base.max_correction_attempts)
        ),
        corpus_cap=int(env.get("DISAMBIG_CORPUS_CAP", base.corpus_cap)),
        generation_retries=int(
            env.get("DISAMBIG_GENERATION_RETRIES", base.generation_retries)
        ),
        limits=SandboxLimits(
            wall_time_ms=int(env.get("DISAMBIG_WALL_TIME_MS", base.limits.wall_time_ms)),
            memory_bytes=int(env.get("DISAMBIG_MEMORY_BYTES", base.limits.memory_bytes)),
        ),
        params=GenerationParams(
            temperature=float(env.get("DISAMBIG_TEMPERATURE", base.params.temperature)),
            top_p=float(env.get("DISAMBIG_TOP_P", base.params.top_p)),
            top_k=int(env.get("DISAMBIG_TOP_K", base.params.top_k)),
            max_tokens=int(env.get("DISAMBIG_MAX_TOKENS", base.params.max_tokens)),
        ),
    )


_CONFIG_OVERRIDES = {
    "max_correction_attempts",
    "corpus_cap",
    "generation_retries",
    "wall_time_ms",
    "memory_bytes",
    "temperature",
    "top_p",
    "top_k",
    "max_tokens",
}


def _session_config_with(base: SessionConfig, overrides: Mapping | None) -> SessionConfig:
    if not overrides:
        return base
    unknown = set(overrides) - _CONFIG_OVERRIDES
    if unknown:
        raise ValueError(f"unknown config fields: {sorted(unknown)}")
    merged = {
        "max_correction_attempts": base.max_correction_attempts,
        "corpus_cap": base.corpus_cap,
        "generation_retries": base.generation_retries,
        "wall_time_ms": base.limits.wall_time_ms,
        "memory_bytes": base.limits.memory_bytes,
        "temperature": base.params.temperature,
        "top_p": base.params.top_p,
        "top_k": base.params.top_k,
        "max_tokens": base.params.max_tokens,
    }
    merged.update(overrides)
    return SessionConfig(
        max_correction_attempts=int(merged["max_correction_attempts"]),
        corpus_cap=int(merged["corpus_cap"]),
        generation_retries=int(merged["generation_retries"]),
        limits=SandboxLimits(
            wall_time_ms=int(merged["wall_time_ms"]),
            memory_bytes=int(merged["memory_bytes"]),
        ),
        params=GenerationParams(
            temperature=float(merged["temperature"]),
            top_p=float(merged["top_p"]),
            top_k=int(merged["top_k"]),
            max_tokens=int(merged["max_tokens"]),
        ),
    )


# ---------------------------------------------------------------------------
# Views
# ---------------------------------------------------------------------------


def _row_view(row: ProposedDoctest, index: int) -> dict:
    return {
        "index": index,
        "input": row.input.render(),
        "doctest": row.doctest.render() if row.doctest is not None else None,
        "shown_outcome": _outcome_to_doc(row.shown_outcome),
        "is_given": row.is_given,
        "default_verdict": "accept",
    }


def creation_view(session: Session) -> dict:
    """Response body for a freshly started session."""
    return {
        "session_id": session.id,
        "state": session.state.value,
        "function_name": session.spec.function_name,
        "proposed_doctests": [_row_view(row, i) for i, row in enumerate(session.proposed)],
        "given_doctest_failures": [dt.render() for dt in session.given_doctest_failures],
    }


def feedback_view(session: Session) -> dict:
    """Response body after feedback has been folded in."""
    return {
        "status": session.state.value,
        "revealed_code": session.revealed.source if session.revealed else None,
        "attempts_used": session.attempts_used,
        "failure_reason": session.failure_reason,
    }


def document_view(session: Session) -> dict:
    """The full serialized session plus per-row review views."""
    document = to_document(session)
    document["proposed_views"] = [
        _row_view(row, i) for i, row in enumerate(session.proposed)
    ]
    document["revealed_code"] = session.revealed.source if session.revealed else None
    return document


def _parse_correction(doc: Mapping) -> ExpectedOutcome:
    kind = doc.get("kind")
    if kind == "value":
        text = doc.get("text")
        if not isinstance(text, str):
            raise FeedbackPayloadError("value correction needs a text field")
        try:
            return ExpectedOutcome.of_value(ValueLiteral.parse(text))
        except ValueError as exc:
            raise FeedbackPayloadError(f"unparseable correction {text!r}: {exc}") from exc
    if kind == "exception":
        name = doc.get("name")
        if not isinstance(name, str) or not name.isidentifier():
            raise FeedbackPayloadError("exception correction needs an exception name")
        return ExpectedOutcome.of_exception(name, str(doc.get("message", "")))
    raise FeedbackPayloadError(f"unknown correction kind: {kind!r}")


def parse_feedback_items(session: Session, rows: list) -> list[FeedbackItem]:
    if len(rows) != len(session.proposed):
        raise VerdictCountMismatch(
            f"expected {len(session.proposed)} verdicts, got {len(rows)}"
        )
    items = []
    for row, entry in zip(session.proposed, rows):
        if not isinstance(entry, Mapping):
            raise FeedbackPayloadError("each verdict must be an object")
        claimed = entry.get("input")
        if claimed is not None and claimed != row.input.render():
            raise FeedbackPayloadError(
                f"verdict input {claimed!r} does not match row {row.input.render()!r}"
            )
        verdict = entry.get("verdict")
        if verdict == "accept":
            items.append(FeedbackItem(row.input, row.shown_outcome, Verdict.ACCEPT))
        elif verdict == "reject":
            correction = entry.get("correction")
            if not isinstance(correction, Mapping):
                raise FeedbackPayloadError("rejected rows need a correction object")
            items.append(
                FeedbackItem(
                    row.input,
                    row.shown_outcome,
                    Verdict.REJECT,
                    _parse_correction(correction),
                )
            )
        else:
            raise FeedbackPayloadError(f"verdict must be accept or reject, got {verdict!r}")
    return items


# ---------------------------------------------------------------------------
# Application
# ---------------------------------------------------------------------------


def create_app(config: ServiceConfig) -> FastAPI:
    """Build the HTTP application around one backend and one store."""
    app = FastAPI(title="disambig", version=__version__)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SessionStore(config.store_dir)
    app.state.store = store
    app.state.config = config

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.post("/sessions")
    def create_session(payload: dict | None = Body(None)) -> dict:
        if not payload or not isinstance(payload.get("spec_text"), str):
            raise HTTPException(400, "request body needs a spec_text field")
        try:
            spec = parse_specification(payload["spec_text"])
        except MalformedSpec as exc:
            raise HTTPException(400, f"malformed specification: {exc}") from exc
        try:
            session_config = _session_config_with(config.session, payload.get("config"))
        except (TypeError, ValueError) as exc:
            raise HTTPException(422, f"invalid config: {exc}") from exc
        try:
            session = start_session(
                spec, config.backend, config.edge_generator, session_config
            )
        except (GenerationFailed, GenerationTransportError) as exc:
            raise HTTPException(502, f"generation backend failed: {exc}") from exc
        except SandboxUnavailable as exc:
            raise HTTPException(500, f"sandbox unavailable: {exc}") from exc
        store.save(session)
        return creation_view(session)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        try:
            session = store.load(session_id)
        except KeyError as exc:
            raise HTTPException(404, "unknown session") from exc
        return document_view(session)

    @app.post("/sessions/{session_id}/feedback")
    def submit_feedback(session_id: str, payload: dict | None = Body(None)) -> dict:
        if not payload or not isinstance(payload.get("verdicts"), list):
            raise HTTPException(422, "request body needs a verdicts list")
        with store.lock(session_id):
            try:
                session = store.load(session_id)
            except KeyError as exc:
                raise HTTPException(404, "unknown session") from exc
            if session.state is not SessionState.AWAITING_FEEDBACK:
                raise HTTPException(
                    409, f"session is {session.state.value}, not awaiting feedback"
                )
            try:
                items = parse_feedback_items(session, payload["verdicts"])
                apply_feedback(session, items)
            except WrongState as exc:
                raise HTTPException(409, str(exc)) from exc
            except (
                FeedbackPayloadError,
                VerdictCountMismatch,
                InvalidCorrection,
            ) as exc:
                raise HTTPException(422, str(exc)) from exc
            store.save(session)
            if session.state is SessionState.CORRECTING:
                correct_and_select(session, config.backend)
                store.save(session)
            return feedback_view(session)

    @app.get("/sessions/{session_id}/result")
    def get_result(session_id: str) -> dict:
        try:
            session = store.load(session_id)
        except KeyError as exc:
            raise HTTPException(404, "unknown session") from exc
        if session.state is SessionState.REVEALED:
            assert session.revealed is not None
            return {
                "state": session.state.value,
                "code": session.revealed.source,
                "provenance": session.revealed.provenance.render(),
                "attempts_used": session.attempts_used,
            }
        if session.state is SessionState.FAILED:
            return {
                "state": session.state.value,
                "failure_reason": session.failure_reason,
                "attempts_used": session.attempts_used,
            }
        raise HTTPException(409, f"no result yet: session is {session.state.value}")

    return app
