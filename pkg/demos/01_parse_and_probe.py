"""
Parsing an ambiguous specification and probing it with inputs
=============================================================

A signature plus a docstring and a single doctest rarely pins down one
behavior.  This script parses such a specification, pairs it with a
first candidate implementation, and builds the probing corpus a
reviewer would be shown: the given doctest inputs first, then
deterministic edge cases, then inputs suggested by the generator.
"""

from disambig.generation import CandidateImplementation, Provenance, ScriptedBackend
from disambig.inputs import HeuristicEdgeCaseGenerator, build_corpus
from disambig.model import parse_specification

# The running example: which index does "the smallest digit" mean when
# there are ties, and what happens when there is no digit at all?
SPEC_TEXT = '''def min_index(s: str) -> int:
    """Return the index of the smallest digit character in s.

    >>> min_index('2025')
    1
    """
'''

spec = parse_specification(SPEC_TEXT)
print(f"function:   {spec.function_name}")
print(f"parameters: {', '.join(f'{p.name}: {p.hint.text}' for p in spec.parameters)}")
print(f"doctests:   {len(spec.doctests)} given")
print()

# One plausible reading: first index of the minimal digit, -1 otherwise.
CANDIDATE = """\
def min_index(s: str) -> int:
    digits = [(c, i) for i, c in enumerate(s) if c.isdigit()]
    return min(digits)[1] if digits else -1
"""
candidate = CandidateImplementation(CANDIDATE, Provenance.initial())

# A scripted backend replays canned completions; here it plays the role
# of the input-suggestion generator.  Its prompt ends with the line
# "test_inputs = [" so the completion continues that list literal.
backend = ScriptedBackend(
    {
        "initial_codegen": [],
        "input_gen": ["('9',), ('abcde',)]"],
        "correction": [],
    }
)

corpus = build_corpus(
    spec, candidate, backend, HeuristicEdgeCaseGenerator(), cap=12
)
print(f"probing corpus ({len(corpus)} inputs, given > edge > suggested):")
for item in corpus:
    print(f"  {item.render():<24} from {item.source.value}")
