"""Experiment harness: problem corpus, simulated verdicts, trials, metrics.

A problem couples one ambiguous specification with the set of reasonable
interpretations it admits, each backed by a reference implementation.
Trials drive the full feedback loop against a simulated human who knows
the target interpretation, then score the outcome:

- IAR: fraction of non-target interpretations distinguished from the
  target by the probe inputs shown during the session.
- CAR: fraction of non-target interpretations functionally inequivalent
  to the revealed code.
- Pass@1: fraction of trials whose revealed code is functionally
  equivalent to the target.

Functional equivalence is decided by exhaustive differential testing
over a small bounded input domain shipped with each problem; every
corpus problem's interpretations are pairwise separated within its
domain, which ``load_problem`` re-verifies on every load.
"""

from __future__ import annotations

import itertools
import logging
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterator, Mapping, Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised only on 3.10
    import tomli as tomllib

from .executor import (
    Sandbox,
    SandboxLimits,
    SandboxUnavailable,
    check_doctests,
    run_batch,
)
from .generation import (
    CandidateImplementation,
    GenerationTransportError,
    GeneratorBackend,
    Provenance,
)
from .inputs import EdgeCaseGenerator, HeuristicEdgeCaseGenerator
from .model import (
    InputSource,
    InputTuple,
    MalformedSpec,
    TaskSpecification,
    ValueLiteral,
    outcome_to_expected,
    outcomes_equal,
    parse_specification,
)
from .session import (
    FeedbackItem,
    GenerationFailed,
    ProposedDoctest,
    SessionConfig,
    SessionState,
    Verdict,
    apply_feedback,
    correct_and_select,
    start_session,
)

logger = logging.getLogger(__name__)

MAX_DOMAIN_SIZE = 1_000_000


class CorpusInvalid(Exception):
    """A problem directory violates a corpus invariant."""


class EmptyTrialSet(Exception):
    """Metrics were requested over zero trials."""


# ---------------------------------------------------------------------------
# Bounded input domains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DomainParameter:
    """Bounded value generator for one argument position.

    kind selects the generator: "strings" enumerates all strings up to
    max_len over alphabet; "int_range" enumerates lower..upper;
    "int_set" enumerates values; "int_lists" enumerates all lists up to
    max_len over values.
    """

    name: str
    kind: str
    alphabet: str = ""
    values: tuple[int, ...] = ()
    max_len: int = 0
    lower: int = 0
    upper: int = 0

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("parameter name must be non-empty")
        if self.kind == "strings":
            if not self.alphabet:
                raise ValueError(f"{self.name}: strings domain needs an alphabet")
            if len(set(self.alphabet)) != len(self.alphabet):
                raise ValueError(f"{self.name}: alphabet has repeated characters")
            if self.max_len < 0:
                raise ValueError(f"{self.name}: max_len must be >= 0")
        elif self.kind == "int_range":
            if self.lower > self.upper:
                raise ValueError(f"{self.name}: empty integer range")
        elif self.kind in ("int_set", "int_lists"):
            if not self.values:
                raise ValueError(f"{self.name}: {self.kind} domain needs values")
            if len(set(self.values)) != len(self.values):
                raise ValueError(f"{self.name}: values are not distinct")
            if self.kind == "int_lists" and self.max_len < 0:
                raise ValueError(f"{self.name}: max_len must be >= 0")
        else:
            raise ValueError(f"{self.name}: unknown domain kind {self.kind!r}")

    def size(self) -> int:
        if self.kind == "strings":
            return _geometric_total(len(self.alphabet), self.max_len)
        if self.kind == "int_range":
            return self.upper - self.lower + 1
        if self.kind == "int_set":
            return len(self.values)
        return _geometric_total(len(self.values), self.max_len)

    def enumerate_values(self) -> Iterator[object]:
        if self.kind == "strings":
            for n in range(self.max_len + 1):
                for combo in itertools.product(self.alphabet, repeat=n):
                    yield "".join(combo)
        elif self.kind == "int_range":
            yield from range(self.lower, self.upper + 1)
        elif self.kind == "int_set":
            yield from self.values
        else:
            for n in range(self.max_len + 1):
                for combo in itertools.product(self.values, repeat=n):
                    yield list(combo)


def _geometric_total(base: int, max_len: int) -> int:
    return sum(base**n for n in range(max_len + 1))


@dataclass(frozen=True)
class EquivalenceDomain:
    """Finite per-parameter input domain for differential equivalence."""

    parameters: tuple[DomainParameter, ...]

    def __post_init__(self) -> None:
        total = self.size()
        if total < 1:
            raise ValueError("domain is empty")
        if total > MAX_DOMAIN_SIZE:
            raise ValueError(f"domain has {total} inputs, limit is {MAX_DOMAIN_SIZE}")

    def size(self) -> int:
        total = 1
        for param in self.parameters:
            total *= param.size()
        return total

    def enumerate_inputs(self) -> list[InputTuple]:
        pools = [list(p.enumerate_values()) for p in self.parameters]
        return [
            InputTuple(tuple(ValueLiteral(v) for v in combo), InputSource.DOMAIN)
            for combo in itertools.product(*pools)
        ]


_REQUIRED_KEYS = {
    "strings": {"alphabet", "max_len"},
    "int_range": {"min", "max"},
    "int_set": {"values"},
    "int_lists": {"values", "max_len"},
}


def domain_from_toml(text: str) -> EquivalenceDomain:
    """Parse a bounded-domain description.

    The document holds one [[parameters]] table per argument, in
    signature order, each with a name, a kind, and that kind's bounds
    (strings: alphabet/max_len; int_range: min/max; int_set: values;
    int_lists: values/max_len).
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise CorpusInvalid(f"unparseable domain description: {exc}") from exc
    tables = doc.get("parameters")
    if not isinstance(tables, list) or not tables:
        raise CorpusInvalid("domain description has no [[parameters]] tables")
    params = []
    for table in tables:
        if not isinstance(table, Mapping):
            raise CorpusInvalid("malformed [[parameters]] table")
        name = table.get("name", "")
        kind = table.get("kind", "")
        required = _REQUIRED_KEYS.get(kind)
        if required is None:
            raise CorpusInvalid(f"{name or '?'}: unknown domain kind {kind!r}")
        missing = required - set(table)
        if missing:
            raise CorpusInvalid(f"{name}: missing domain keys {sorted(missing)}")
        try:
            if kind == "strings":
                param = DomainParameter(
                    name=name,
                    kind=kind,
                    alphabet=str(table["alphabet"]),
                    max_len=int(table["max_len"]),
                )
            elif kind == "int_range":
                param = DomainParameter(
                    name=name, kind=kind, lower=int(table["min"]), upper=int(table["max"])
                )
            else:
                values = table["values"]
                if not isinstance(values, list) or not all(
                    isinstance(v, int) and not isinstance(v, bool) for v in values
                ):
                    raise ValueError(f"{name}: values must be a list of integers")
                param = DomainParameter(
                    name=name,
                    kind=kind,
                    values=tuple(values),
                    max_len=int(table.get("max_len", 0)),
                )
        except (TypeError, ValueError) as exc:
            raise CorpusInvalid(str(exc)) from exc
        params.append(param)
    try:
        return EquivalenceDomain(tuple(params))
    except ValueError as exc:
        raise CorpusInvalid(str(exc)) from exc


# ---------------------------------------------------------------------------
# Problems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Interpretation:
    """One reasonable reading of a problem, with a reference implementation."""

    id: str
    description: str
    implementation: CandidateImplementation
    decision_path: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class Problem:
    """An ambiguous specification plus its admitted interpretations."""

    id: str
    spec: TaskSpecification
    interpretations: tuple[Interpretation, ...]
    bounded_domain: EquivalenceDomain
    default_target: str

    def ids(self) -> tuple[str, ...]:
        return tuple(interp.id for interp in self.interpretations)

    def interpretation(self, interp_id: str) -> Interpretation:
        for interp in self.interpretations:
            if interp.id == interp_id:
                return interp
        raise KeyError(interp_id)

    def non_targets(self, target_id: str) -> tuple[Interpretation, ...]:
        self.interpretation(target_id)
        return tuple(i for i in self.interpretations if i.id != target_id)


def _interp_sort_key(path: Path) -> tuple[int, int | str]:
    stem = path.stem
    if stem.startswith("I") and stem[1:].isdigit():
        return (0, int(stem[1:]))
    return (1, stem)


def _parse_interpretation(path: Path) -> Interpretation:
    lines = path.read_text().splitlines()
    description = ""
    decision_path: tuple[tuple[str, str], ...] = ()
    body_start = None
    for i, line in enumerate(lines):
        if line.startswith("# description:"):
            description = line[len("# description:") :].strip()
        elif line.startswith("# path:"):
            pairs = []
            for part in line[len("# path:") :].split(","):
                label, _, branch = part.partition("=")
                if not _:
                    raise CorpusInvalid(f"{path.name}: malformed path entry {part.strip()!r}")
                pairs.append((label.strip(), branch.strip()))
            decision_path = tuple(pairs)
        elif line.startswith("#") or not line.strip():
            continue
        else:
            body_start = i
            break
    if not description:
        raise CorpusInvalid(f"{path.name}: missing '# description:' header")
    if body_start is None:
        raise CorpusInvalid(f"{path.name}: no implementation body")
    source = "\n".join(lines[body_start:]) + "\n"
    implementation = CandidateImplementation(
        source=source, provenance=Provenance.reference()
    )
    return Interpretation(
        id=path.stem,
        description=description,
        implementation=implementation,
        decision_path=decision_path,
    )


def load_problem(path: str | Path, limits: SandboxLimits | None = None) -> Problem:
    """Load and validate one problem directory.

    Validation is behavioral, not just structural: every reference
    implementation must pass the given doctests, and every pair of
    interpretations must disagree on at least one input of the bounded
    domain.  Any violation raises CorpusInvalid.
    """
    root = Path(path)
    if not root.is_dir():
        raise CorpusInvalid(f"not a problem directory: {root}")
    for name in ("spec.txt", "target.txt", "domain.toml"):
        if not (root / name).is_file():
            raise CorpusInvalid(f"{root.name}: missing {name}")
    try:
        spec = parse_specification((root / "spec.txt").read_text())
    except MalformedSpec as exc:
        raise CorpusInvalid(f"{root.name}/spec.txt: {exc}") from exc
    domain = domain_from_toml((root / "domain.toml").read_text())
    spec_names = tuple(p.name for p in spec.parameters)
    domain_names = tuple(p.name for p in domain.parameters)
    if spec_names != domain_names:
        raise CorpusInvalid(
            f"{root.name}: domain parameters {domain_names} do not match "
            f"signature parameters {spec_names}"
        )
    interp_dir = root / "interpretations"
    files = sorted(interp_dir.glob("*.src"), key=_interp_sort_key)
    if len(files) < 2:
        raise CorpusInvalid(f"{root.name}: need at least two interpretations")
    interps = tuple(_parse_interpretation(f) for f in files)
    seen: set[str] = set()
    for interp in interps:
        if interp.id in seen:
            raise CorpusInvalid(f"{root.name}: duplicate interpretation id {interp.id}")
        seen.add(interp.id)
    target = (root / "target.txt").read_text().strip()
    if target not in seen:
        raise CorpusInvalid(f"{root.name}: target {target!r} is not an interpretation")

    checker = EquivalenceChecker(domain, spec.function_name, limits)
    with Sandbox(limits) as sandbox:
        for interp in interps:
            results = check_doctests(
                interp.implementation,
                spec.given_doctests(),
                function_name=spec.function_name,
                sandbox=sandbox,
            )
            failing = [dt for dt, ok in results.items() if not ok]
            if failing:
                raise CorpusInvalid(
                    f"{root.name}/{interp.id} fails given doctest "
                    f"{failing[0].call.render()}"
                )
        signatures = {
            interp.id: checker.signature(interp.implementation, sandbox=sandbox)
            for interp in interps
        }
    for a, b in itertools.combinations(interps, 2):
        if signatures[a.id] == signatures[b.id]:
            raise CorpusInvalid(
                f"{root.name}: {a.id} and {b.id} agree on every input of the "
                f"bounded domain"
            )
    return Problem(
        id=root.name,
        spec=spec,
        interpretations=interps,
        bounded_domain=domain,
        default_target=target,
    )


def builtin_corpus_dir() -> Path:
    """Directory of the problems shipped with the package."""
    return Path(__file__).with_name("corpus")


def load_corpus(
    path: str | Path | None = None, limits: SandboxLimits | None = None
) -> dict[str, Problem]:
    """Load every problem directory under a corpus root."""
    root = Path(path) if path is not None else builtin_corpus_dir()
    if not root.is_dir():
        raise CorpusInvalid(f"not a corpus directory: {root}")
    problems = {}
    for child in sorted(root.iterdir()):
        if child.is_dir() and (child / "spec.txt").is_file():
            problems[child.name] = load_problem(child, limits)
    if not problems:
        raise CorpusInvalid(f"no problem directories under {root}")
    return problems


# ---------------------------------------------------------------------------
# Equivalence
# ---------------------------------------------------------------------------


class EquivalenceChecker:
    """Differential equivalence over a bounded domain, with caching.

    Each implementation is reduced to its outcome signature: the tuple
    of observable outcome keys over the enumerated domain.  Two
    implementations are equivalent iff their signatures are equal.
    Signatures are cached by source text, so checking one candidate
    against n interpretations costs n+1 signature runs, not 2n.
    """

    def __init__(
        self,
        domain: EquivalenceDomain,
        function_name: str | None = None,
        limits: SandboxLimits | None = None,
    ) -> None:
        self._inputs = domain.enumerate_inputs()
        self._function_name = function_name
        self._limits = limits
        self._cache: dict[str, tuple[tuple[str, str], ...]] = {}

    def signature(
        self, impl: CandidateImplementation, sandbox: Sandbox | None = None
    ) -> tuple[tuple[str, str], ...]:
        cached = self._cache.get(impl.source)
        if cached is not None:
            return cached
        if sandbox is None:
            with Sandbox(self._limits) as owned:
                outcomes = run_batch(
                    impl,
                    self._inputs,
                    self._limits,
                    function_name=self._function_name,
                    sandbox=owned,
                )
        else:
            outcomes = run_batch(
                impl,
                self._inputs,
                self._limits,
                function_name=self._function_name,
                sandbox=sandbox,
            )
        signature = tuple(outcome.observable_key() for outcome in outcomes)
        self._cache[impl.source] = signature
        return signature

    def equivalent(
        self, impl_a: CandidateImplementation, impl_b: CandidateImplementation
    ) -> bool:
        return self.signature(impl_a) == self.signature(impl_b)


def check_equivalence(
    impl_a: CandidateImplementation,
    impl_b: CandidateImplementation,
    domain: EquivalenceDomain,
    limits: SandboxLimits | None = None,
    *,
    function_name: str | None = None,
) -> bool:
    """Do two implementations agree on every input of the domain?"""
    checker = EquivalenceChecker(domain, function_name, limits)
    return checker.equivalent(impl_a, impl_b)


# ---------------------------------------------------------------------------
# Simulated human
# ---------------------------------------------------------------------------


def simulate_human(
    target: Interpretation,
    proposed: Sequence[ProposedDoctest],
    limits: SandboxLimits | None = None,
    *,
    function_name: str | None = None,
    sandbox: Sandbox | None = None,
) -> list[FeedbackItem]:
    """Verdicts a programmer holding the target interpretation would give.

    Each proposed row is accepted when the target implementation's
    outcome on its input agrees with the shown outcome, and rejected
    with the target outcome as the correction otherwise.
    """
    inputs = [row.input for row in proposed]
    target_outcomes = run_batch(
        target.implementation,
        inputs,
        limits,
        function_name=function_name,
        sandbox=sandbox,
    )
    items = []
    for row, target_outcome in zip(proposed, target_outcomes):
        if outcomes_equal(row.shown_outcome, target_outcome):
            items.append(FeedbackItem(row.input, row.shown_outcome, Verdict.ACCEPT))
        else:
            items.append(
                FeedbackItem(
                    row.input,
                    row.shown_outcome,
                    Verdict.REJECT,
                    outcome_to_expected(target_outcome),
                )
            )
    return items


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrialRecord:
    """Everything observed in one feedback-loop run against one target.

    A failed trial (generation or correction breakdown) keeps whatever
    probe inputs were produced before the failure; its revealed code is
    None and it scores zero for Pass@1 and CAR.
    """

    problem_id: str
    target_id: str
    corpus: tuple[InputTuple, ...]
    revealed: CandidateImplementation | None
    distinguished: Mapping[str, bool]
    equivalent_to: frozenset[str]
    failed: bool = False
    failure_reason: str = ""

    def to_document(self) -> dict:
        return {
            "problem": self.problem_id,
            "target": self.target_id,
            "corpus": [item.render() for item in self.corpus],
            "revealed": None if self.revealed is None else self.revealed.source,
            "distinguished": dict(sorted(self.distinguished.items())),
            "equivalent_to": sorted(self.equivalent_to),
            "failed": self.failed,
            "failure_reason": self.failure_reason,
        }


def run_trial(
    problem: Problem,
    target_id: str,
    backend: GeneratorBackend,
    edge_gen: EdgeCaseGenerator | None = None,
    config: SessionConfig | None = None,
    *,
    equivalence: EquivalenceChecker | None = None,
) -> TrialRecord:
    """One full loop: session, simulated verdicts, correction, scoring.

    Session-level failures (backend transport, no extractable code,
    sandbox breakdown) do not propagate; they produce a failed trial
    record so a long run is never lost to one bad invocation.
    """
    target = problem.interpretation(target_id)
    edge_gen = edge_gen if edge_gen is not None else HeuristicEdgeCaseGenerator()
    config = config or SessionConfig()
    checker = equivalence or EquivalenceChecker(
        problem.bounded_domain, problem.spec.function_name, config.limits
    )

    session = None
    failure = ""
    try:
        session = start_session(problem.spec, backend, edge_gen, config)
        verdicts = simulate_human(
            target,
            session.proposed,
            config.limits,
            function_name=problem.spec.function_name,
        )
        apply_feedback(session, verdicts)
        if session.state is SessionState.CORRECTING:
            correct_and_select(session, backend)
        if session.state is SessionState.FAILED:
            failure = session.failure_reason or "session failed"
    except (GenerationFailed, GenerationTransportError, SandboxUnavailable) as exc:
        failure = str(exc)

    corpus = tuple(row.input for row in session.proposed) if session else ()
    failed = bool(failure)
    revealed = session.revealed if session is not None and not failed else None

    distinguished: dict[str, bool] = {}
    non_targets = problem.non_targets(target_id)
    if corpus:
        with Sandbox(config.limits) as sandbox:
            target_outcomes = run_batch(
                target.implementation,
                corpus,
                config.limits,
                function_name=problem.spec.function_name,
                sandbox=sandbox,
            )
            for other in non_targets:
                other_outcomes = run_batch(
                    other.implementation,
                    corpus,
                    config.limits,
                    function_name=problem.spec.function_name,
                    sandbox=sandbox,
                )
                distinguished[other.id] = any(
                    not outcomes_equal(a, b)
                    for a, b in zip(target_outcomes, other_outcomes)
                )
    else:
        distinguished = {other.id: False for other in non_targets}

    equivalent_to: frozenset[str] = frozenset()
    if revealed is not None:
        revealed_sig = checker.signature(revealed)
        equivalent_to = frozenset(
            interp.id
            for interp in problem.interpretations
            if checker.signature(interp.implementation) == revealed_sig
        )
    if failed:
        logger.info("trial failed for %s/%s: %s", problem.id, target_id, failure)
    return TrialRecord(
        problem_id=problem.id,
        target_id=target_id,
        corpus=corpus,
        revealed=revealed,
        distinguished=distinguished,
        equivalent_to=equivalent_to,
        failed=failed,
        failure_reason=failure,
    )


def run_trials(
    problem: Problem,
    target_id: str,
    trials: int,
    backend_factory: Callable[[], GeneratorBackend],
    edge_gen_factory: Callable[[], EdgeCaseGenerator] | None = None,
    config: SessionConfig | None = None,
    *,
    on_trial: Callable[[int, TrialRecord], None] | None = None,
) -> list[TrialRecord]:
    """Run repeated trials with a fresh backend per trial.

    The backend factory is called once per trial so scripted fixtures
    replay from the top each time; interpretation signatures are shared
    across trials through one equivalence cache.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    config = config or SessionConfig()
    checker = EquivalenceChecker(
        problem.bounded_domain, problem.spec.function_name, config.limits
    )
    records = []
    for index in range(trials):
        edge_gen = edge_gen_factory() if edge_gen_factory is not None else None
        record = run_trial(
            problem,
            target_id,
            backend_factory(),
            edge_gen,
            config,
            equivalence=checker,
        )
        records.append(record)
        if on_trial is not None:
            on_trial(index, record)
    return records


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def format_rate(rate: Fraction) -> str:
    """Five-decimal display of a rate, e.g. 1495/1500 -> '0.99667'."""
    return f"{float(rate):.5f}"


def _count_display(numerator: int, per_trial: int, trials: int) -> str:
    return f"{numerator}/({per_trial} × {trials})"


@dataclass(frozen=True)
class MetricsReport:
    """IAR, CAR, and Pass@1 over one trial set, with raw counts.

    When a problem has a single interpretation serving as target and no
    non-targets, IAR and CAR are vacuously 1 and flagged as such.
    """

    problem_id: str
    target_ids: tuple[str, ...]
    trials: int
    non_target_count: int
    iar_numerator: int
    car_numerator: int
    pass1_numerator: int

    @property
    def vacuous(self) -> bool:
        return self.non_target_count == 0

    @property
    def pair_denominator(self) -> int:
        return self.trials * self.non_target_count

    @property
    def iar(self) -> Fraction:
        if self.vacuous:
            return Fraction(1)
        return Fraction(self.iar_numerator, self.pair_denominator)

    @property
    def car(self) -> Fraction:
        if self.vacuous:
            return Fraction(1)
        return Fraction(self.car_numerator, self.pair_denominator)

    @property
    def pass1(self) -> Fraction:
        return Fraction(self.pass1_numerator, self.trials)

    @property
    def iar_display(self) -> str:
        return _count_display(self.iar_numerator, self.non_target_count, self.trials)

    @property
    def car_display(self) -> str:
        return _count_display(self.car_numerator, self.non_target_count, self.trials)

    @property
    def pass1_display(self) -> str:
        return f"{self.pass1_numerator}/{self.trials}"

    def to_document(self) -> dict:
        return {
            "problem": self.problem_id,
            "targets": list(self.target_ids),
            "trials": self.trials,
            "non_targets": self.non_target_count,
            "vacuous": self.vacuous,
            "iar": {
                "numerator": self.iar_numerator,
                "denominator": self.pair_denominator,
                "display": self.iar_display,
                "rate": float(self.iar),
                "rate_display": format_rate(self.iar),
            },
            "car": {
                "numerator": self.car_numerator,
                "denominator": self.pair_denominator,
                "display": self.car_display,
                "rate": float(self.car),
                "rate_display": format_rate(self.car),
            },
            "pass1": {
                "numerator": self.pass1_numerator,
                "denominator": self.trials,
                "display": self.pass1_display,
                "rate": float(self.pass1),
                "rate_display": format_rate(self.pass1),
            },
        }


def compute_metrics(trials: Sequence[TrialRecord]) -> MetricsReport:
    """Reduce trial records for one (problem, target) pair to a report.

    Failed trials keep their distinguished counts (the probe inputs
    were real), but count as misses for Pass@1 and contribute nothing
    to the CAR numerator since no code was revealed.
    """
    if not trials:
        raise EmptyTrialSet("no trial records")
    first = trials[0]
    key_set = frozenset(first.distinguished)
    for record in trials:
        if record.problem_id != first.problem_id or record.target_id != first.target_id:
            raise ValueError("trial records mix problems or targets")
        if frozenset(record.distinguished) != key_set:
            raise ValueError("trial records disagree on the non-target set")
    iar_numerator = sum(
        sum(1 for flag in record.distinguished.values() if flag) for record in trials
    )
    car_numerator = sum(
        0 if record.failed else sum(1 for other in key_set if other not in record.equivalent_to)
        for record in trials
    )
    pass1_numerator = sum(
        1
        for record in trials
        if not record.failed and record.target_id in record.equivalent_to
    )
    return MetricsReport(
        problem_id=first.problem_id,
        target_ids=(first.target_id,),
        trials=len(trials),
        non_target_count=len(key_set),
        iar_numerator=iar_numerator,
        car_numerator=car_numerator,
        pass1_numerator=pass1_numerator,
    )


def combine_metrics(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Aggregate per-target reports for one problem into a single row."""
    if not reports:
        raise EmptyTrialSet("no reports")
    first = reports[0]
    for report in reports:
        if report.problem_id != first.problem_id:
            raise ValueError("reports mix problems")
        if report.non_target_count != first.non_target_count:
            raise ValueError("reports disagree on the non-target count")
    targets = tuple(dict.fromkeys(t for r in reports for t in r.target_ids))
    return MetricsReport(
        problem_id=first.problem_id,
        target_ids=targets,
        trials=sum(r.trials for r in reports),
        non_target_count=first.non_target_count,
        iar_numerator=sum(r.iar_numerator for r in reports),
        car_numerator=sum(r.car_numerator for r in reports),
        pass1_numerator=sum(r.pass1_numerator for r in reports),
    )
