"""
The review loop: accept, reject with corrections, reveal
========================================================

A session proposes one doctest per probing input, showing what the
current candidate would answer.  The reviewer accepts the rows that
match the behavior they want and rejects the rest, attaching the
answer they expected.  Rejections send the candidate back for a
corrected implementation; the best candidate is then revealed.
"""

from disambig.generation import ScriptedBackend
from disambig.inputs import HeuristicEdgeCaseGenerator
from disambig.model import ExpectedOutcome, ValueLiteral, parse_specification
from disambig.session import (
    FeedbackItem,
    SessionState,
    Verdict,
    apply_feedback,
    correct_and_select,
    start_session,
)

SPEC_TEXT = '''def min_index(s: str) -> int:
    """Return the index of the smallest digit character in s.

    >>> min_index('2025')
    1
    """
'''

# The first candidate returns -1 when s has no digits; the reviewer in
# this story wants len(s) instead, so two rows will be rejected.
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

backend = ScriptedBackend(
    {
        "initial_codegen": [INITIAL],
        "input_gen": ["('abcde',)]"],
        "correction": [CORRECTED],
    }
)

spec = parse_specification(SPEC_TEXT)
session = start_session(spec, backend, HeuristicEdgeCaseGenerator())
print(f"session {session.id} is {session.state.value}")
print()
print("proposed doctests:")
for row in session.proposed:
    marker = "  (given)" if row.is_given else ""
    head = (row.doctest.render() if row.doctest else row.input.render()).splitlines()
    print("   " + "\n   ".join(head) + marker)
print()

# The reviewer wants len(s) for digit-free strings.  Rows whose shown
# answer already matches are accepted; the others get corrections.
def wanted(args: tuple) -> int:
    s = args[0]
    digits = [(c, i) for i, c in enumerate(s) if c.isdigit()]
    return min(digits)[1] if digits else len(s)

verdicts = []
for row in session.proposed:
    shown = row.shown_outcome.value.value if row.shown_outcome.value else None
    want = wanted(tuple(lit.value for lit in row.input.args))
    if shown == want:
        verdicts.append(
            FeedbackItem(row.input, row.shown_outcome, Verdict.ACCEPT)
        )
    else:
        verdicts.append(
            FeedbackItem(
                row.input,
                row.shown_outcome,
                Verdict.REJECT,
                ExpectedOutcome.of_value(ValueLiteral(want)),
            )
        )

rejected = [v for v in verdicts if v.verdict is Verdict.REJECT]
print(f"review: {len(verdicts) - len(rejected)} accepted, {len(rejected)} rejected")
for item in rejected:
    print(f"   {item.input.render()} should be {item.corrected.value.canonical_text}")
print()

apply_feedback(session, verdicts)
print(f"after feedback the session is {session.state.value}")
correct_and_select(session, backend)
assert session.state is SessionState.REVEALED

print(f"revealed ({session.revealed.provenance.render()}, "
      f"{session.attempts_used} correction attempt):")
print()
print(session.revealed.source)
