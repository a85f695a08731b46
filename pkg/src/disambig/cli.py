"""Command line interface: serve the API, batch-evaluate, drive sessions.

Subcommands:

  serve                      run the HTTP API with uvicorn
  evaluate                   run repeated trials against the reference
                             corpus and report IAR / CAR / Pass@1
  session new/feedback/show  drive a single feedback session against the
                             local store without the service running

Backends are given as descriptors: ``scripted:<fixture.json>`` replays
recorded completions (a directory of fixtures cycles one file per
trial), while an http(s) URL talks to a live chat-completions endpoint.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
from pathlib import Path
from typing import Callable

from .evaluation import (
    CorpusInvalid,
    builtin_corpus_dir,
    combine_metrics,
    compute_metrics,
    load_problem,
    run_trials,
)
from .generation import GenerationTransportError, GeneratorBackend, ScriptedBackend
from .model import MalformedSpec, parse_specification
from .service import (
    FeedbackPayloadError,
    ServiceConfig,
    SessionStore,
    backend_from_spec,
    create_app,
    creation_view,
    document_view,
    feedback_view,
    parse_feedback_items,
    session_config_from_env,
)
from .session import (
    GenerationFailed,
    InvalidCorrection,
    SessionState,
    VerdictCountMismatch,
    WrongState,
    apply_feedback,
    correct_and_select,
    start_session,
)

_RECOVERABLE = (
    CorpusInvalid,
    MalformedSpec,
    GenerationFailed,
    GenerationTransportError,
    FeedbackPayloadError,
    VerdictCountMismatch,
    InvalidCorrection,
    WrongState,
    ValueError,
    OSError,
)


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _merged_env(args: argparse.Namespace) -> dict[str, str]:
    """Process environment overlaid with command line flags."""
    env = dict(os.environ)
    if getattr(args, "backend", None):
        env["DISAMBIG_BACKEND"] = args.backend
    if getattr(args, "model", None):
        env["DISAMBIG_MODEL"] = args.model
    if getattr(args, "api_key", None):
        env["DISAMBIG_API_KEY"] = args.api_key
    if getattr(args, "store_dir", None):
        env["DISAMBIG_STORE_DIR"] = str(args.store_dir)
    return env


def _store_from(args: argparse.Namespace) -> SessionStore:
    env = _merged_env(args)
    return SessionStore(env.get("DISAMBIG_STORE_DIR", ".disambig/sessions"))


def _backend_factory(args: argparse.Namespace) -> Callable[[], GeneratorBackend]:
    """A fresh backend per trial, so scripted fixtures replay from the top."""
    descriptor = args.backend
    if descriptor.startswith("scripted:"):
        path = Path(descriptor[len("scripted:") :])
        if path.is_dir():
            files = sorted(path.glob("*.json"))
            if not files:
                raise ValueError(f"no fixture files in {path}")
            for file in files:
                ScriptedBackend.from_file(file)
            counter = itertools.count()
            return lambda: ScriptedBackend.from_file(files[next(counter) % len(files)])
        ScriptedBackend.from_file(path)
        return lambda: ScriptedBackend.from_file(path)
    def make() -> GeneratorBackend:
        return backend_from_spec(
            descriptor,
            model=getattr(args, "model", "") or "",
            api_key=getattr(args, "api_key", None),
            timeout_s=getattr(args, "timeout_s", 60.0),
        )

    make()
    return make


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_serve(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    import uvicorn

    config = ServiceConfig.from_env(_merged_env(args))
    uvicorn.run(create_app(config), host=args.host, port=args.port)
    return 0


def _print_report(label: str, report) -> None:
    print(f"{label}: {report.trials} trials, {report.non_target_count} non-targets")
    rows = [
        ("IAR", report.iar, report.iar_display),
        ("CAR", report.car, report.car_display),
        ("Pass@1", report.pass1, report.pass1_display),
    ]
    for name, rate, display in rows:
        print(f"  {name:<7} {float(rate):.5f}  {display}")
    if report.vacuous:
        print("  (vacuous: no non-target interpretations)")


def cmd_evaluate(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if args.trials < 1:
        parser.error("--trials must be >= 1")
    corpus_dir = Path(args.corpus) if args.corpus else builtin_corpus_dir()
    problem = load_problem(corpus_dir / args.problem)
    factory = _backend_factory(args)
    config = session_config_from_env(_merged_env(args))

    if args.all_targets:
        targets = list(problem.ids())
    else:
        targets = [args.target or problem.default_target]
        if targets[0] not in problem.ids():
            raise ValueError(
                f"unknown target {targets[0]!r}; {problem.id} has {', '.join(problem.ids())}"
            )

    per_target = []
    for target in targets:
        records = run_trials(problem, target, args.trials, factory, config=config)
        report = compute_metrics(records)
        per_target.append((target, report, records))
        _print_report(f"{problem.id} target {target}", report)

    aggregate = combine_metrics([report for _, report, _ in per_target])
    if len(per_target) > 1:
        _print_report(f"{problem.id} aggregate over {len(per_target)} targets", aggregate)

    document = {
        "problem": problem.id,
        "corpus": str(corpus_dir),
        "backend": args.backend,
        "trials_per_target": args.trials,
        "targets": [
            {
                "target": target,
                "report": report.to_document(),
                "trial_records": [record.to_document() for record in records],
            }
            for target, report, records in per_target
        ],
        "aggregate": aggregate.to_document(),
    }
    out = Path(args.out) if args.out else Path(
        f"{problem.id}-{'all' if args.all_targets else targets[0]}-report.json".lower()
    )
    out.write_text(json.dumps(document, indent=2, ensure_ascii=False) + "\n")
    print(f"report written to {out}")
    return 0


def _read_text_arg(value: str) -> str:
    return sys.stdin.read() if value == "-" else Path(value).read_text()


def cmd_session_new(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    spec = parse_specification(_read_text_arg(args.spec_file))
    config = ServiceConfig.from_env(_merged_env(args))
    store = SessionStore(config.store_dir)
    session = start_session(spec, config.backend, config.edge_generator, config.session)
    store.save(session)
    print(json.dumps(creation_view(session), indent=2, ensure_ascii=False))
    return 0


def cmd_session_feedback(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    config = ServiceConfig.from_env(_merged_env(args))
    store = SessionStore(config.store_dir)
    payload = json.loads(_read_text_arg(args.verdicts))
    rows = payload.get("verdicts") if isinstance(payload, dict) else payload
    if not isinstance(rows, list):
        raise ValueError("verdicts must be a JSON list or an object with a verdicts list")
    with store.lock(args.session_id):
        try:
            session = store.load(args.session_id)
        except KeyError:
            return _fail(f"unknown session {args.session_id}")
        items = parse_feedback_items(session, rows)
        apply_feedback(session, items)
        store.save(session)
        if session.state is SessionState.CORRECTING:
            correct_and_select(session, config.backend)
            store.save(session)
    print(json.dumps(feedback_view(session), indent=2, ensure_ascii=False))
    return 0


def cmd_session_show(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    store = _store_from(args)
    try:
        session = store.load(args.session_id)
    except KeyError:
        return _fail(f"unknown session {args.session_id}")
    print(json.dumps(document_view(session), indent=2, ensure_ascii=False))
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_backend_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--backend",
        help="scripted:<fixture.json> or an http(s) chat-completions endpoint "
        "(default: DISAMBIG_BACKEND)",
    )
    sub.add_argument("--model", help="model name for http backends (DISAMBIG_MODEL)")
    sub.add_argument("--api-key", dest="api_key", help="bearer token (DISAMBIG_API_KEY)")


def _add_store_arg(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--store-dir",
        dest="store_dir",
        help="session store directory (DISAMBIG_STORE_DIR, default .disambig/sessions)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="disambig",
        description="Resolve ambiguous function specs by probing, asking, correcting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP API")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    _add_backend_args(serve)
    _add_store_arg(serve)
    serve.set_defaults(handler=cmd_serve)

    evaluate = sub.add_parser(
        "evaluate", help="run repeated trials and report IAR / CAR / Pass@1"
    )
    evaluate.add_argument("--problem", required=True, help="problem id, e.g. P1")
    which = evaluate.add_mutually_exclusive_group()
    which.add_argument("--target", help="target interpretation id (default: the problem's)")
    which.add_argument(
        "--all-targets",
        action="store_true",
        help="run every interpretation as the target and also report the aggregate",
    )
    evaluate.add_argument("--trials", type=int, required=True, help="trials per target")
    evaluate.add_argument("--backend", required=True, help="backend descriptor")
    evaluate.add_argument("--model", default="")
    evaluate.add_argument("--api-key", dest="api_key")
    evaluate.add_argument("--timeout-s", dest="timeout_s", type=float, default=60.0)
    evaluate.add_argument("--corpus", help="corpus directory (default: built-in)")
    evaluate.add_argument("--out", help="report file (default: <problem>-<target>-report.json)")
    evaluate.set_defaults(handler=cmd_evaluate)

    session = sub.add_parser("session", help="drive one feedback session locally")
    ssub = session.add_subparsers(dest="session_command", required=True)

    new = ssub.add_parser("new", help="start a session from a spec file")
    new.add_argument("--spec-file", required=True, help="path to the spec, or - for stdin")
    _add_backend_args(new)
    _add_store_arg(new)
    new.set_defaults(handler=cmd_session_new)

    feedback = ssub.add_parser("feedback", help="apply verdicts to a session")
    feedback.add_argument("session_id")
    feedback.add_argument(
        "--verdicts",
        required=True,
        help="JSON verdict list (file path, or - for stdin)",
    )
    _add_backend_args(feedback)
    _add_store_arg(feedback)
    feedback.set_defaults(handler=cmd_session_feedback)

    show = ssub.add_parser("show", help="print a stored session document")
    show.add_argument("session_id")
    _add_store_arg(show)
    show.set_defaults(handler=cmd_session_show)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args, parser)
    except _RECOVERABLE as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
