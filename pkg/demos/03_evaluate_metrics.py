"""
Measuring how well the loop distinguishes interpretations
=========================================================

Each bundled problem packages one ambiguous specification with every
plausible interpretation of it.  A trial picks one interpretation as
the hidden target, plays the reviewer against it, and records whether
the revealed implementation matches.  Three rates summarize a run:

* interpretation awareness: how many non-target readings the probing
  corpus separated from the target, per trial;
* correction accuracy: how many non-target readings the revealed code
  ruled out;
* first-try success: how often the reveal was equivalent to the target.
"""

from disambig.evaluation import (
    builtin_corpus_dir,
    compute_metrics,
    load_problem,
    run_trials,
)
from disambig.generation import ScriptedBackend

problem = load_problem(builtin_corpus_dir() / "P1")
print(f"problem {problem.id}: {problem.spec.function_name}")
for interp_id in problem.ids():
    interp = problem.interpretation(interp_id)
    print(f"  {interp_id}: {interp.description}")
print()

# Interpretation sources double as scripted completions, which makes
# the trials deterministic: the "generator" always proposes I1 first
# and, when corrected, offers the target implementation next.
I1_SOURCE = problem.interpretation("I1").implementation.source
TARGET = "I2"
TARGET_SOURCE = problem.interpretation(TARGET).implementation.source


def backend() -> ScriptedBackend:
    return ScriptedBackend(
        {
            "initial_codegen": [I1_SOURCE],
            "input_gen": ["('a1b2c3',)]"],
            "correction": [TARGET_SOURCE],
        }
    )


records = run_trials(problem, TARGET, trials=3, backend_factory=backend)
for i, record in enumerate(records):
    distinguished = ", ".join(sorted(record.distinguished)) or "none"
    print(f"trial {i + 1}: revealed equivalent to {sorted(record.equivalent_to)};"
          f" distinguished {distinguished}")
print()

report = compute_metrics(records)
print(f"over {report.trials} trials against {TARGET}"
      f" ({report.non_target_count} non-target interpretations):")
print(f"  interpretation awareness  {float(report.iar):.5f}  ({report.iar_display})")
print(f"  correction accuracy       {float(report.car):.5f}  ({report.car_display})")
print(f"  first-try success         {float(report.pass1):.5f}  ({report.pass1_display})")
