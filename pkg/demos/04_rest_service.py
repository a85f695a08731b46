"""
Driving a session over the REST interface
=========================================

The same review loop is exposed as a small HTTP service so a browser
UI (or any client) can run it.  This script starts the service in a
background thread, creates a session, submits a mixed review with one
correction, and fetches the final result — then shows that every state
transition was persisted to the session store on disk.
"""

import json
import tempfile
import threading
import time
from pathlib import Path

import requests
import uvicorn

from disambig.generation import ScriptedBackend
from disambig.service import ServiceConfig, create_app

SPEC_TEXT = '''def min_index(s: str) -> int:
    """Return the index of the smallest digit character in s.

    >>> min_index('2025')
    1
    """
'''

INITIAL = """\
def min_index(s: str) -> int:
    digits = [(c, i) for i, c in enumerate(s) if c.isdigit()]
    return min(digits)[1] if digits else -1
"""
CORRECTED = """\
def min_index(s: str) -> int:
    digits = [(c, i) for i, c in enumerate(s) if c.isdigit()]
    return min(digits)[1] if digits else len(s)
"""

store_dir = Path(tempfile.mkdtemp(prefix="demo-store-"))
backend = ScriptedBackend(
    {
        "initial_codegen": [INITIAL],
        "input_gen": ["('abcde',)]"],
        "correction": [CORRECTED],
    }
)
app = create_app(ServiceConfig(backend=backend, store_dir=store_dir))

PORT = 8977
server = uvicorn.Server(
    uvicorn.Config(app, host="127.0.0.1", port=PORT, log_level="warning")
)
thread = threading.Thread(target=server.run, daemon=True)
thread.start()

base = f"http://127.0.0.1:{PORT}"
for _ in range(100):
    try:
        if requests.get(f"{base}/healthz", timeout=1).ok:
            break
    except requests.ConnectionError:
        time.sleep(0.1)

# Create a session: the service generates a candidate, probes it, and
# returns one reviewable row per probing input.
created = requests.post(f"{base}/sessions", json={"spec_text": SPEC_TEXT}).json()
session_id = created["session_id"]
print(f"POST /sessions -> {session_id} ({created['state']})")
for row in created["proposed_doctests"][:4]:
    given = "  (given)" if row["is_given"] else ""
    print(f"   [{row['index']}] {row['input']} -> {row['shown_outcome']['value_text']}{given}")
print(f"   ... {len(created['proposed_doctests'])} rows in total")
print()

# Reject every row where the reviewer wants len(s) instead of -1.
verdicts = []
for row in created["proposed_doctests"]:
    s = eval(row["input"])[0]
    digits = [(c, i) for i, c in enumerate(s) if c.isdigit()]
    want = str(min(digits)[1] if digits else len(s))
    if want == row["shown_outcome"]["value_text"]:
        verdicts.append({"input": row["input"], "verdict": "accept"})
    else:
        verdicts.append(
            {
                "input": row["input"],
                "verdict": "reject",
                "correction": {"kind": "value", "text": want},
            }
        )
rejected = sum(1 for v in verdicts if v["verdict"] == "reject")
print(f"POST /sessions/{session_id}/feedback ({rejected} rejections)")
feedback = requests.post(
    f"{base}/sessions/{session_id}/feedback", json={"verdicts": verdicts}
).json()
print(f"   status: {feedback['status']}, attempts used: {feedback['attempts_used']}")
print()

result = requests.get(f"{base}/sessions/{session_id}/result").json()
print(f"GET /sessions/{session_id}/result")
print(f"   provenance: {result['provenance']}")
print("   " + "\n   ".join(result["code"].splitlines()))
print()

# Every transition was saved before the response went out: the history
# file has one line per save, the current document reflects the reveal.
history = (store_dir / f"{session_id}.history.jsonl").read_text().splitlines()
states = [json.loads(line)["state"] for line in history]
print(f"persisted history states: {states}")
current = json.loads((store_dir / f"{session_id}.json").read_text())
print(f"current document state:   {current['state']}")

server.should_exit = True
thread.join(timeout=5)
