"""Probe input corpus construction.

The corpus T that gets shown to the human merges three sources: the
given doctest inputs, a deterministic type-driven edge-case generator
(the stand-in for a symbolic execution tool), and inputs suggested by
the generator backend.
"""

from __future__ import annotations

import abc
import itertools
import logging
from dataclasses import dataclass

from .generation import (
    GenerationParams,
    GenerationRole,
    GeneratorBackend,
    CandidateImplementation,
    UnparseableList,
    build_inputgen_prompt,
    parse_test_inputs,
)
from .model import (
    HintKind,
    InputSource,
    InputTuple,
    TaskSpecification,
    TypeHint,
    ValueLiteral,
    inputs_from_doctests,
)

import ast

logger = logging.getLogger(__name__)

DEFAULT_CORPUS_CAP = 10
DEFAULT_PRODUCT_CAP = 64

# Per-kind seed values: empty-ish first so the earliest product tuples
# carry the classic edge cases.
_STRING_SEEDS = ["", "a", "aaa", "0000000", "123", "abc", "a1b2", "a b"]
_INT_SEEDS = [0, 1, -1, -122, 1000000]
_FLOAT_SEEDS = [0.0, 1.0, -1.0, 2.5, -2.5]
_BOOL_SEEDS = [False, True]
_LIST_ELEMENT_SEEDS = {
    HintKind.STRING: ["a", "b", "c"],
    HintKind.FLOAT: [1.0, 2.0, 3.0],
    HintKind.BOOLEAN: [False, True, True],
}


@dataclass(frozen=True)
class InputCorpus:
    """The deduplicated, capped input set shown to the human."""

    inputs: tuple[InputTuple, ...]
    cap: int

    def __post_init__(self) -> None:
        if self.cap < 1:
            raise ValueError("cap must be >= 1")
        if len(self.inputs) > self.cap:
            raise ValueError("corpus exceeds its cap")
        renderings = [it.render() for it in self.inputs]
        if len(set(renderings)) != len(renderings):
            raise ValueError("corpus contains duplicate inputs")

    def __iter__(self):
        return iter(self.inputs)

    def __len__(self) -> int:
        return len(self.inputs)


class EdgeCaseGenerator(abc.ABC):
    """Produces deterministic edge-case inputs for a spec and candidate."""

    @abc.abstractmethod
    def generate(
        self, spec: TaskSpecification, candidate: CandidateImplementation | None
    ) -> list[InputTuple]:
        raise NotImplementedError


class HeuristicEdgeCaseGenerator(EdgeCaseGenerator):
    """Type-driven seeds plus lightweight branch targeting.

    Each parameter gets a seed pool from its type hint; constants that
    the candidate compares against contribute the constant and its
    neighbors.  Pools are crossed in diagonal order (small index sums
    first) so early tuples mix the empty-ish seeds, then truncated.
    """

    def __init__(self, product_cap: int = DEFAULT_PRODUCT_CAP) -> None:
        if product_cap < 1:
            raise ValueError("product_cap must be >= 1")
        self._product_cap = product_cap

    def generate(
        self, spec: TaskSpecification, candidate: CandidateImplementation | None
    ) -> list[InputTuple]:
        extra_ints, extra_strings = _comparison_constants(
            candidate.source if candidate else ""
        )
        pools = [
            _seed_pool(param.hint, extra_ints, extra_strings)
            for param in spec.parameters
        ]
        index_tuples = sorted(
            itertools.product(*(range(len(pool)) for pool in pools)),
            key=lambda idx: (sum(idx), idx),
        )
        inputs = []
        for idx in index_tuples[: self._product_cap]:
            args = tuple(ValueLiteral(pools[i][j]) for i, j in enumerate(idx))
            inputs.append(InputTuple(args=args, source=InputSource.EDGE_GENERATOR))
        return inputs


def _seed_pool(hint: TypeHint, extra_ints: list[int], extra_strings: list[str]) -> list:
    if hint.kind is HintKind.STRING:
        return _dedupe(_STRING_SEEDS + extra_strings)
    if hint.kind is HintKind.INTEGER:
        return _dedupe(_INT_SEEDS + extra_ints)
    if hint.kind is HintKind.FLOAT:
        return list(_FLOAT_SEEDS)
    if hint.kind is HintKind.BOOLEAN:
        return list(_BOOL_SEEDS)
    if hint.kind is HintKind.LIST:
        element_kind = hint.element.kind if hint.element else HintKind.UNKNOWN
        e1, e2, e3 = _LIST_ELEMENT_SEEDS.get(element_kind, [1, 2, 3])
        return [[], [e1], [e1, e1], [e1, e2, e3], [e3, e2, e1]]
    return [None]


def _dedupe(values: list) -> list:
    seen = set()
    out = []
    for value in values:
        key = (type(value).__name__, value)
        if key not in seen:
            seen.add(key)
            out.append(value)
    return out


def _comparison_constants(source: str) -> tuple[list[int], list[str]]:
    """Constants compared against in the source, with neighbors."""
    ints: list[int] = []
    strings: list[str] = []
    if not source:
        return ints, strings
    try:
        tree = ast.parse(source)
    except SyntaxError:
        return ints, strings
    for node in ast.walk(tree):
        if not isinstance(node, ast.Compare):
            continue
        for operand in [node.left, *node.comparators]:
            if not isinstance(operand, ast.Constant):
                continue
            value = operand.value
            if isinstance(value, bool):
                continue
            if isinstance(value, int):
                ints.extend([value - 1, value, value + 1])
            elif isinstance(value, str):
                strings.append(value)
                if len(value) == 1:
                    code = ord(value)
                    if code > 0:
                        strings.append(chr(code - 1))
                    strings.append(chr(code + 1))
    return _dedupe(ints), _dedupe(strings)


def build_corpus(
    spec: TaskSpecification,
    candidate: CandidateImplementation,
    backend: GeneratorBackend,
    edge_gen: EdgeCaseGenerator,
    cap: int = DEFAULT_CORPUS_CAP,
    params: GenerationParams | None = None,
) -> InputCorpus:
    """Merge given, edge-generated, and backend-suggested inputs.

    Priority under the cap is given > edge > backend; given inputs are
    never dropped.  Backend parse failures degrade to an empty
    suggestion list; transport errors propagate.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    given = inputs_from_doctests(spec.given_doctests())
    if len({it.render() for it in given}) > cap:
        raise ValueError("cap too small to hold the given doctest inputs")
    edge = edge_gen.generate(spec, candidate)
    prompt = build_inputgen_prompt(spec)
    completion = backend.complete(GenerationRole.INPUT_GEN, prompt, params or GenerationParams())
    try:
        suggested = parse_test_inputs(completion, spec.arity)
    except UnparseableList:
        logger.warning("backend suggestions unparseable; using edge inputs only")
        suggested = []
    merged: dict[str, InputTuple] = {}
    for it in itertools.chain(given, edge, suggested):
        if len(it.args) != spec.arity:
            continue
        merged.setdefault(it.render(), it)
    kept = list(merged.values())[:cap]
    return InputCorpus(inputs=tuple(kept), cap=cap)
