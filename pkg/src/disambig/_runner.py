"""Sandboxed execution child.

Run as a standalone script (never imported):

    python -I _runner.py <scratch_dir> <memory_bytes>

Speaks a line-delimited JSON protocol on stdin/stdout.  Each request
carries the candidate source, the function to call, and the call
arguments as a literal tuple rendering; the response is one outcome
message.  The protocol is language-neutral: any orchestrator that can
spawn a process and exchange JSON lines can drive this runner.

Isolation is enforced before the first request is read: process-wide
resource limits cap memory, forbid file creation, cap open file
descriptors at the three standard streams (which also blocks sockets),
and disable core dumps and subprocesses.  Modules candidates commonly
need are imported first, while imports still work.
"""

import ast
import io
import json
import os
import signal
import sys

WHITELISTED_MODULES = [
    "json",
    "math",
    "re",
    "collections",
    "itertools",
    "functools",
    "string",
    "ast",
    "io",
]

RESULT_TEXT_CAP = 1_000_000
MESSAGE_CAP = 1_000

_CODE_CACHE = {}


def _apply_limits(memory_bytes):
    import resource

    resource.setrlimit(resource.RLIMIT_AS, (memory_bytes, memory_bytes))
    resource.setrlimit(resource.RLIMIT_FSIZE, (0, 0))
    resource.setrlimit(resource.RLIMIT_CORE, (0, 0))
    try:
        resource.setrlimit(resource.RLIMIT_NPROC, (0, 0))
    except (ValueError, OSError):
        pass
    resource.setrlimit(resource.RLIMIT_NOFILE, (3, 3))


def _message(exc):
    try:
        text = str(exc)
    except BaseException:
        return ""
    return text[:MESSAGE_CAP]


def _execute(request):
    source = request.get("source", "")
    function = request.get("function", "")
    args_text = request.get("args_text", "()")
    try:
        args = ast.literal_eval(args_text)
    except (ValueError, SyntaxError, MemoryError):
        return {"kind": "error", "detail": "unparseable arguments"}
    if not isinstance(args, tuple):
        args = (args,)
    code = _CODE_CACHE.get(source)
    if code is None:
        try:
            code = compile(source, "<candidate>", "exec")
        except (SyntaxError, ValueError) as exc:
            return {"kind": "error", "detail": "source does not compile: %s" % exc}
        _CODE_CACHE.clear()
        _CODE_CACHE[source] = code
    namespace = {"__name__": "__candidate__", "__builtins__": __builtins__}
    saved_out, saved_in = sys.stdout, sys.stdin
    sys.stdout, sys.stdin = io.StringIO(), io.StringIO()
    try:
        exec(code, namespace)
        fn = namespace.get(function)
        if not callable(fn):
            return {"kind": "error", "detail": "function %r not defined" % function}
        result = fn(*args)
    except MemoryError:
        return {"kind": "resource_exceeded"}
    except BaseException as exc:
        return {
            "kind": "exception",
            "name": type(exc).__name__,
            "message": _message(exc),
        }
    finally:
        sys.stdout, sys.stdin = saved_out, saved_in
    try:
        text = repr(result)
    except BaseException:
        return {"kind": "error", "detail": "result repr failed"}
    if len(text) > RESULT_TEXT_CAP:
        return {"kind": "error", "detail": "result too large"}
    return {"kind": "value", "value_text": text}


def _respond(stream, response):
    stream.write(json.dumps(response) + "\n")
    stream.flush()


def main():
    scratch, memory_bytes = sys.argv[1], int(sys.argv[2])
    for name in WHITELISTED_MODULES:
        __import__(name)
    os.chdir(scratch)
    if hasattr(signal, "SIGXFSZ"):
        # file-size overruns should surface as OSError, not kill the child
        signal.signal(signal.SIGXFSZ, signal.SIG_IGN)
    _apply_limits(memory_bytes)
    real_stdout = sys.stdout
    real_stdin = sys.stdin
    startup_pid = os.getpid()
    while True:
        line = real_stdin.readline()
        if not line:
            break
        try:
            request = json.loads(line)
        except ValueError:
            _respond(real_stdout, {"id": -1, "kind": "error", "detail": "bad request"})
            continue
        rid = request.get("id", -1)
        if request.get("ping"):
            _respond(real_stdout, {"id": rid, "kind": "pong"})
            continue
        response = _execute(request)
        if os.getpid() != startup_pid:
            # a candidate forked; the copy must never answer the protocol
            os._exit(0)
        response["id"] = rid
        _respond(real_stdout, response)


if __name__ == "__main__":
    main()
