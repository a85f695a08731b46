"""Isolated execution of candidate implementations.

Each sandbox owns one child process, spawned with hard resource limits
and respawned whenever the candidate source changes so candidates can
never observe each other.  The parent enforces wall-clock limits with a
watchdog and kills the child on overrun.
"""

from __future__ import annotations

import ast
import json
import os
import select
import shutil
import signal
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .generation import CandidateImplementation
from .model import (
    Doctest,
    ExecutionOutcome,
    InputTuple,
    ValueLiteral,
    outcome_matches,
    outcomes_equal,
)

_RUNNER_PATH = Path(__file__).with_name("_runner.py")
_RESPONSE_CAP = 32 * 1024 * 1024
_STARTUP_DEADLINE_S = 10.0


class SandboxUnavailable(Exception):
    """The host cannot start or talk to the sandbox child."""


@dataclass(frozen=True)
class SandboxLimits:
    """Resource ceilings for one candidate execution."""

    wall_time_ms: int = 2000
    memory_bytes: int = 256 * 1024 * 1024

    def __post_init__(self) -> None:
        if self.wall_time_ms <= 0:
            raise ValueError("wall_time_ms must be positive")
        if self.memory_bytes <= 0:
            raise ValueError("memory_bytes must be positive")


class _ChildDied(Exception):
    pass


class _ChildTimeout(Exception):
    pass


def render_args(args: Sequence[ValueLiteral]) -> str:
    if len(args) == 1:
        return f"({args[0].canonical_text},)"
    return "(" + ", ".join(a.canonical_text for a in args) + ")"


class Sandbox:
    """One isolated child process executing candidate calls."""

    def __init__(self, limits: SandboxLimits | None = None) -> None:
        self._limits = limits or SandboxLimits()
        self._process: subprocess.Popen | None = None
        self._scratch: str | None = None
        self._rbuf = b""
        self._next_id = 1
        self._source: str | None = None

    def __enter__(self) -> "Sandbox":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def run(
        self, source: str, function_name: str, args: Sequence[ValueLiteral]
    ) -> ExecutionOutcome:
        """Execute one call; always returns an outcome, never raises
        for candidate behavior."""
        if self._process is None or self._process.poll() is not None or source != self._source:
            self._restart()
            self._source = source
        request_id = self._next_id
        self._next_id += 1
        request = {
            "id": request_id,
            "source": source,
            "function": function_name,
            "args_text": render_args(args),
            "wall_time_ms": self._limits.wall_time_ms,
        }
        start = time.monotonic()
        deadline = start + self._limits.wall_time_ms / 1000.0
        try:
            response = self._roundtrip(request, deadline)
        except _ChildTimeout:
            self._kill()
            return ExecutionOutcome.timeout(wall_time_ms=_elapsed_ms(start))
        except _ChildDied:
            self._kill()
            return ExecutionOutcome.sandbox_error(
                "sandbox child died", wall_time_ms=_elapsed_ms(start)
            )
        elapsed = _elapsed_ms(start)
        if response.get("id") != request_id:
            self._kill()
            return ExecutionOutcome.sandbox_error("protocol desync", wall_time_ms=elapsed)
        return self._decode(response, elapsed)

    def close(self) -> None:
        self._kill()
        if self._scratch is not None:
            shutil.rmtree(self._scratch, ignore_errors=True)
            self._scratch = None

    # -- internals ---------------------------------------------------

    def _restart(self) -> None:
        self._kill()
        if self._scratch is None:
            self._scratch = tempfile.mkdtemp(prefix="disambig-sandbox-")
        if not _RUNNER_PATH.exists():
            raise SandboxUnavailable(f"runner script missing: {_RUNNER_PATH}")
        try:
            self._process = subprocess.Popen(
                [
                    sys.executable,
                    "-I",
                    str(_RUNNER_PATH),
                    self._scratch,
                    str(self._limits.memory_bytes),
                ],
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                start_new_session=True,
            )
        except OSError as exc:
            raise SandboxUnavailable(f"cannot spawn sandbox child: {exc}") from exc
        self._rbuf = b""
        try:
            response = self._roundtrip(
                {"id": 0, "ping": True}, time.monotonic() + _STARTUP_DEADLINE_S
            )
        except (_ChildDied, _ChildTimeout) as exc:
            self._kill()
            raise SandboxUnavailable("sandbox child failed its readiness check") from exc
        if response.get("kind") != "pong":
            self._kill()
            raise SandboxUnavailable("sandbox child failed its readiness check")

    def _kill(self) -> None:
        if self._process is None:
            return
        process = self._process
        self._process = None
        self._source = None
        try:
            # the child leads its own session; take its forks down with it
            os.killpg(process.pid, signal.SIGKILL)
        except (OSError, ProcessLookupError):
            try:
                process.kill()
            except OSError:
                pass
        try:
            process.wait(timeout=5)
        except subprocess.TimeoutExpired:
            pass
        for stream in (process.stdin, process.stdout):
            if stream is not None:
                try:
                    stream.close()
                except OSError:
                    pass

    def _roundtrip(self, request: dict, deadline: float) -> dict:
        assert self._process is not None and self._process.stdin is not None
        line = json.dumps(request) + "\n"
        try:
            self._process.stdin.write(line.encode())
            self._process.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise _ChildDied from exc
        while True:
            raw = self._read_line(deadline)
            try:
                response = json.loads(raw)
            except ValueError as exc:
                raise _ChildDied from exc
            # skip leftover answers to earlier requests
            rid = response.get("id") if isinstance(response, dict) else None
            if isinstance(rid, int) and rid < request["id"]:
                continue
            return response

    def _read_line(self, deadline: float) -> bytes:
        assert self._process is not None and self._process.stdout is not None
        fd = self._process.stdout.fileno()
        while b"\n" not in self._rbuf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise _ChildTimeout
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                continue
            chunk = os.read(fd, 65536)
            if not chunk:
                raise _ChildDied
            self._rbuf += chunk
            if len(self._rbuf) > _RESPONSE_CAP:
                raise _ChildDied
        line, _, self._rbuf = self._rbuf.partition(b"\n")
        return line

    def _decode(self, response: Mapping, elapsed: float) -> ExecutionOutcome:
        kind = response.get("kind")
        if kind == "value":
            text = response.get("value_text", "")
            try:
                value = ValueLiteral.parse(text)
            except ValueError:
                return ExecutionOutcome.sandbox_error(
                    f"unrepresentable result: {text[:100]}", wall_time_ms=elapsed
                )
            return ExecutionOutcome.of_value(value, wall_time_ms=elapsed)
        if kind == "exception":
            return ExecutionOutcome.of_exception(
                str(response.get("name", "Exception")),
                str(response.get("message", "")),
                wall_time_ms=elapsed,
            )
        if kind == "resource_exceeded":
            return ExecutionOutcome.resource_exceeded(wall_time_ms=elapsed)
        if kind == "error":
            return ExecutionOutcome.sandbox_error(
                str(response.get("detail", "unknown error")), wall_time_ms=elapsed
            )
        return ExecutionOutcome.sandbox_error(
            f"unknown response kind: {kind!r}", wall_time_ms=elapsed
        )


def _elapsed_ms(start: float) -> float:
    return (time.monotonic() - start) * 1000.0


def _default_function_name(source: str) -> str:
    # target function is the last top-level definition by convention
    module = ast.parse(source)
    names = [node.name for node in module.body if isinstance(node, ast.FunctionDef)]
    if not names:
        raise ValueError("source contains no function definition")
    return names[-1]


def run_candidate(
    candidate: CandidateImplementation,
    input: InputTuple,
    limits: SandboxLimits | None = None,
    *,
    function_name: str | None = None,
    sandbox: Sandbox | None = None,
) -> ExecutionOutcome:
    """Execute the candidate on one input in an isolated child."""
    name = function_name or _default_function_name(candidate.source)
    if sandbox is not None:
        return sandbox.run(candidate.source, name, input.args)
    with Sandbox(limits) as owned:
        return owned.run(candidate.source, name, input.args)


def run_batch(
    candidate: CandidateImplementation,
    inputs: Iterable[InputTuple],
    limits: SandboxLimits | None = None,
    *,
    function_name: str | None = None,
    sandbox: Sandbox | None = None,
) -> list[ExecutionOutcome]:
    """Execute the candidate on many inputs, reusing one child."""
    name = function_name or _default_function_name(candidate.source)
    if sandbox is not None:
        return [sandbox.run(candidate.source, name, it.args) for it in inputs]
    with Sandbox(limits) as owned:
        return [owned.run(candidate.source, name, it.args) for it in inputs]


def check_doctests(
    candidate: CandidateImplementation,
    doctests: Sequence[Doctest],
    limits: SandboxLimits | None = None,
    *,
    function_name: str | None = None,
    sandbox: Sandbox | None = None,
) -> dict[Doctest, bool]:
    """Evaluate doctests against the candidate, caching pass/fail."""
    name = function_name or _default_function_name(candidate.source)
    todo = [dt for dt in doctests if dt not in candidate.doctest_results]
    if todo:
        owned = sandbox or Sandbox(limits)
        try:
            for dt in todo:
                outcome = owned.run(candidate.source, name, dt.call.args)
                candidate.doctest_results[dt] = outcome_matches(dt.expected, outcome)
        finally:
            if owned is not sandbox:
                owned.close()
    return {dt: candidate.doctest_results[dt] for dt in doctests}


def find_distinguishing_input(
    impl_a: CandidateImplementation,
    impl_b: CandidateImplementation,
    corpus: Iterable[InputTuple],
    limits: SandboxLimits | None = None,
    *,
    function_name: str | None = None,
) -> InputTuple | None:
    """First corpus input on which the two implementations disagree."""
    inputs = list(corpus)
    with Sandbox(limits) as sandbox:
        outcomes_a = run_batch(
            impl_a, inputs, limits, function_name=function_name, sandbox=sandbox
        )
        outcomes_b = run_batch(
            impl_b, inputs, limits, function_name=function_name, sandbox=sandbox
        )
    for it, oa, ob in zip(inputs, outcomes_a, outcomes_b):
        if not outcomes_equal(oa, ob):
            return it
    return None
