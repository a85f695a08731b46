from __future__ import annotations

import shutil
from fractions import Fraction

import pytest

from disambig.evaluation import (
    CorpusInvalid,
    DomainParameter,
    EmptyTrialSet,
    EquivalenceChecker,
    EquivalenceDomain,
    MetricsReport,
    TrialRecord,
    builtin_corpus_dir,
    check_equivalence,
    combine_metrics,
    compute_metrics,
    domain_from_toml,
    format_rate,
    load_corpus,
    load_problem,
    run_trial,
    run_trials,
    simulate_human,
)
from disambig.generation import (
    CandidateImplementation,
    GenerationRole,
    Provenance,
    ScriptedBackend,
)
from disambig.model import (
    ExecutionOutcome,
    InputSource,
    InputTuple,
    ValueLiteral,
)
from disambig.session import ProposedDoctest, SessionConfig, Verdict

NEG_ONE_IMPL = (
    "def min_index(s: str) -> int:\n"
    "    min_digit = '9'\n"
    "    min_index = -1\n"
    "    for i in range(len(s)):\n"
    "        if s[i].isdigit() and s[i] < min_digit:\n"
    "            min_digit = s[i]\n"
    "            min_index = i\n"
    "    return min_index\n"
)

LEN_IMPL = (
    "def min_index(s: str) -> int:\n"
    "    best = -1\n"
    "    for i, c in enumerate(s):\n"
    "        if c.isdigit() and (best == -1 or c < s[best]):\n"
    "            best = i\n"
    "    return len(s) if best == -1 else best\n"
)

SIGNED_DIFF = "def absdiff(a: int, b: int) -> int:\n    return a - b\n"
ABS_DIFF = "def absdiff(a: int, b: int) -> int:\n    return abs(a - b)\n"


def p1_backend(corrections=(LEN_IMPL,)):
    return ScriptedBackend(
        {
            "initial_codegen": [NEG_ONE_IMPL],
            "input_gen": ["('',), ('abcde',)]"],
            "correction": list(corrections),
        }
    )


@pytest.fixture(scope="module")
def p1():
    return load_problem(builtin_corpus_dir() / "P1")


@pytest.fixture(scope="module")
def absdiff_problem(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus") / "absdiff"
    (root / "interpretations").mkdir(parents=True)
    (root / "spec.txt").write_text(
        "def absdiff(a: int, b: int) -> int:\n"
        '    """Distance between a and b.\n'
        "    >>> absdiff(3, 1)\n"
        "    2\n"
        '    """\n'
    )
    (root / "target.txt").write_text("I2\n")
    (root / "domain.toml").write_text(
        '[[parameters]]\nname = "a"\nkind = "int_range"\nmin = -3\nmax = 3\n\n'
        '[[parameters]]\nname = "b"\nkind = "int_range"\nmin = -3\nmax = 3\n'
    )
    (root / "interpretations" / "I1.src").write_text(
        "# description: signed difference a - b\n# path: sign=kept\n" + SIGNED_DIFF
    )
    (root / "interpretations" / "I2.src").write_text(
        "# description: absolute difference between a and b\n"
        "# path: sign=dropped\n" + ABS_DIFF
    )
    return load_problem(root)


# ---------------------------------------------------------------------------
# Domains
# ---------------------------------------------------------------------------


class TestDomains:
    def test_string_domain_enumerates_all_lengths(self):
        param = DomainParameter(name="s", kind="strings", alphabet="01a", max_len=3)
        values = list(param.enumerate_values())
        assert param.size() == 1 + 3 + 9 + 27
        assert len(values) == param.size()
        assert values[0] == ""
        assert len(set(values)) == len(values)
        assert "01a" in values

    def test_int_range_domain(self):
        param = DomainParameter(name="n", kind="int_range", lower=-2, upper=2)
        assert list(param.enumerate_values()) == [-2, -1, 0, 1, 2]
        assert param.size() == 5

    def test_int_lists_domain(self):
        param = DomainParameter(name="d", kind="int_lists", values=(1, 2), max_len=2)
        values = list(param.enumerate_values())
        assert values[0] == []
        assert [1, 2] in values and [2, 1] in values
        assert len(values) == 7

    def test_int_set_domain(self):
        param = DomainParameter(name="a", kind="int_set", values=(0, 5))
        assert list(param.enumerate_values()) == [0, 5]

    def test_multi_parameter_product(self):
        domain = EquivalenceDomain(
            (
                DomainParameter(name="d", kind="int_lists", values=(0, 1, 2), max_len=3),
                DomainParameter(name="a", kind="int_set", values=(0, 1, 2)),
                DomainParameter(name="b", kind="int_set", values=(0, 1, 2)),
            )
        )
        inputs = domain.enumerate_inputs()
        assert domain.size() == 40 * 3 * 3
        assert len(inputs) == 360
        assert all(isinstance(item, InputTuple) for item in inputs)
        assert all(len(item.args) == 3 for item in inputs)
        assert all(item.source is InputSource.DOMAIN for item in inputs)
        assert inputs[0].render() == "([], 0, 0)"

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(name="s", kind="strings", alphabet="", max_len=2),
            dict(name="s", kind="strings", alphabet="aa", max_len=2),
            dict(name="s", kind="strings", alphabet="ab", max_len=-1),
            dict(name="n", kind="int_range", lower=3, upper=1),
            dict(name="a", kind="int_set", values=()),
            dict(name="a", kind="int_set", values=(1, 1)),
            dict(name="x", kind="floats"),
        ],
    )
    def test_invalid_parameters_rejected(self, kwargs):
        with pytest.raises(ValueError):
            DomainParameter(**kwargs)

    def test_oversized_domain_rejected(self):
        param = DomainParameter(
            name="s", kind="strings", alphabet="0123456789", max_len=6
        )
        assert param.size() == 1_111_111
        with pytest.raises(ValueError, match="limit"):
            EquivalenceDomain((param,))

    def test_domain_from_toml_round_trip(self):
        text = (
            '[[parameters]]\nname = "s"\nkind = "strings"\n'
            'alphabet = "01a"\nmax_len = 3\n'
        )
        domain = domain_from_toml(text)
        assert domain.parameters[0].name == "s"
        assert domain.size() == 40

    @pytest.mark.parametrize(
        "text",
        [
            "",
            "not toml [",
            '[[parameters]]\nname = "s"\nkind = "mystery"\n',
            '[[parameters]]\nname = "s"\nkind = "strings"\nmax_len = 3\n',
            '[[parameters]]\nname = "n"\nkind = "int_range"\nmin = 5\nmax = 1\n',
            '[[parameters]]\nname = "d"\nkind = "int_lists"\nvalues = [true]\nmax_len = 1\n',
        ],
    )
    def test_domain_from_toml_rejects_malformed(self, text):
        with pytest.raises(CorpusInvalid):
            domain_from_toml(text)


# ---------------------------------------------------------------------------
# Corpus loading
# ---------------------------------------------------------------------------


class TestLoadProblem:
    def test_p1_shape(self, p1):
        assert p1.id == "P1"
        assert p1.ids() == ("I1", "I2", "I3", "I4")
        assert p1.default_target == "I1"
        assert p1.spec.function_name == "min_index"
        assert all(interp.description for interp in p1.interpretations)
        assert ("tie", "first") in p1.interpretations[0].decision_path
        assert p1.interpretations[0].implementation.provenance.kind == "reference"

    def test_non_targets_excludes_target(self, p1):
        others = p1.non_targets("I2")
        assert [interp.id for interp in others] == ["I1", "I3", "I4"]
        with pytest.raises(KeyError):
            p1.non_targets("I9")

    def test_full_corpus_counts(self):
        problems = load_corpus()
        counts = {pid: len(p.interpretations) for pid, p in problems.items()}
        assert counts == {"P1": 4, "P2": 3, "P3": 2, "P7": 16, "P8": 16, "P9": 16}
        assert {p.default_target for p in problems.values()} == {"I1", "I7"}

    def test_missing_file_rejected(self, tmp_path, p1):
        broken = tmp_path / "P1"
        shutil.copytree(builtin_corpus_dir() / "P1", broken)
        (broken / "domain.toml").unlink()
        with pytest.raises(CorpusInvalid, match="domain.toml"):
            load_problem(broken)

    def test_reference_failing_given_doctest_rejected(self, tmp_path):
        broken = tmp_path / "P1"
        shutil.copytree(builtin_corpus_dir() / "P1", broken)
        (broken / "interpretations" / "I2.src").write_text(
            "# description: broken on purpose\n"
            "def min_index(s: str) -> int:\n    return 99\n"
        )
        with pytest.raises(CorpusInvalid, match="I2 fails given doctest"):
            load_problem(broken)

    def test_equivalent_pair_rejected(self, tmp_path):
        broken = tmp_path / "P3"
        shutil.copytree(builtin_corpus_dir() / "P3", broken)
        (broken / "interpretations" / "I2.src").write_text(
            "# description: same behavior, different spelling\n"
            "def num_digits(n: int) -> int:\n"
            "    total = 0\n"
            "    for _ in str(abs(n)):\n"
            "        total += 1\n"
            "    return total\n"
        )
        with pytest.raises(CorpusInvalid, match="I1 and I2 agree"):
            load_problem(broken)

    def test_unknown_target_rejected(self, tmp_path):
        broken = tmp_path / "P3"
        shutil.copytree(builtin_corpus_dir() / "P3", broken)
        (broken / "target.txt").write_text("I9\n")
        with pytest.raises(CorpusInvalid, match="target"):
            load_problem(broken)

    def test_single_interpretation_rejected(self, tmp_path):
        broken = tmp_path / "P3"
        shutil.copytree(builtin_corpus_dir() / "P3", broken)
        (broken / "interpretations" / "I2.src").unlink()
        with pytest.raises(CorpusInvalid, match="at least two"):
            load_problem(broken)

    def test_mismatched_domain_parameters_rejected(self, tmp_path):
        broken = tmp_path / "P3"
        shutil.copytree(builtin_corpus_dir() / "P3", broken)
        (broken / "domain.toml").write_text(
            '[[parameters]]\nname = "m"\nkind = "int_range"\nmin = 0\nmax = 5\n'
        )
        with pytest.raises(CorpusInvalid, match="do not match"):
            load_problem(broken)

    def test_missing_description_rejected(self, tmp_path):
        broken = tmp_path / "P3"
        shutil.copytree(builtin_corpus_dir() / "P3", broken)
        (broken / "interpretations" / "I2.src").write_text(
            "def num_digits(n: int) -> int:\n    return len(set(str(abs(n))))\n"
        )
        with pytest.raises(CorpusInvalid, match="description"):
            load_problem(broken)


# ---------------------------------------------------------------------------
# Equivalence
# ---------------------------------------------------------------------------


class TestEquivalence:
    def test_implementation_equivalent_to_itself(self, p1):
        impl = p1.interpretations[0].implementation
        assert check_equivalence(impl, impl, p1.bounded_domain)

    def test_p1_first_two_interpretations_differ(self, p1):
        a, b = p1.interpretations[0], p1.interpretations[1]
        assert not check_equivalence(
            a.implementation, b.implementation, p1.bounded_domain
        )

    def test_distinct_sources_same_behavior(self):
        # oracle: both bodies agree on every integer in the range
        loop_src = (
            "def num_digits(n: int) -> int:\n"
            "    total = 0\n"
            "    for _ in str(abs(n)):\n"
            "        total += 1\n"
            "    return total\n"
        )
        direct = lambda n: len(str(abs(n)))  # noqa: E731
        loop_ns: dict = {}
        exec(loop_src, loop_ns)  # noqa: S102
        assert all(loop_ns["num_digits"](n) == direct(n) for n in range(-999, 1000))

        domain = EquivalenceDomain(
            (DomainParameter(name="n", kind="int_range", lower=-999, upper=999),)
        )
        impl_a = CandidateImplementation(
            "def num_digits(n: int) -> int:\n    return len(str(abs(n)))\n",
            Provenance.reference(),
        )
        impl_b = CandidateImplementation(loop_src, Provenance.reference())
        assert check_equivalence(impl_a, impl_b, domain)

    def test_checker_caches_by_source(self, absdiff_problem):
        checker = EquivalenceChecker(absdiff_problem.bounded_domain, "absdiff")
        impl = absdiff_problem.interpretations[0].implementation
        first = checker.signature(impl)
        assert checker.signature(impl) is first


# ---------------------------------------------------------------------------
# Simulated human
# ---------------------------------------------------------------------------


def proposed_row(args_text: str, shown_value):
    args = tuple(
        ValueLiteral.parse(part)
        for part in ([args_text] if not isinstance(args_text, tuple) else args_text)
    )
    return ProposedDoctest(
        input=InputTuple(args, InputSource.EDGE_GENERATOR),
        shown_outcome=ExecutionOutcome.of_value(ValueLiteral(shown_value)),
        doctest=None,
        is_given=False,
    )


class TestSimulateHuman:
    def test_rejects_with_target_outcome_as_correction(self, p1):
        target = p1.interpretation("I2")
        rows = [proposed_row("''", -1)]
        items = simulate_human(target, rows, function_name="min_index")
        assert items[0].verdict is Verdict.REJECT
        assert items[0].corrected.value.canonical_text == "0"

    def test_accepts_matching_outcome(self, p1):
        target = p1.interpretation("I1")
        rows = [proposed_row("''", -1)]
        items = simulate_human(target, rows, function_name="min_index")
        assert items[0].verdict is Verdict.ACCEPT
        assert items[0].corrected is None

    def test_all_matching_rows_accepted_in_order(self, p1):
        target = p1.interpretation("I1")
        rows = [proposed_row("'2025'", 1), proposed_row("'a1'", 1), proposed_row("''", -1)]
        items = simulate_human(target, rows, function_name="min_index")
        assert [item.verdict for item in items] == [Verdict.ACCEPT] * 3
        assert [item.input for item in items] == [row.input for row in rows]


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------


class TestRunTrial:
    def test_correction_path_reveals_target_equivalent_code(self, p1):
        record = run_trial(p1, "I2", p1_backend())
        assert not record.failed
        assert record.revealed.source == LEN_IMPL
        assert record.equivalent_to == {"I2"}
        assert record.distinguished == {"I1": True, "I3": True, "I4": True}
        rendered = [item.render() for item in record.corpus]
        assert "('',)" in rendered and "('abcde',)" in rendered
        assert rendered[0] == "('2025',)"

    def test_accept_path_reveals_initial_without_correction(self, p1):
        backend = p1_backend()
        record = run_trial(p1, "I1", backend)
        assert not record.failed
        assert record.revealed.source == NEG_ONE_IMPL
        assert record.equivalent_to == {"I1"}
        assert backend.calls(GenerationRole.CORRECTION) == 0

    def test_correction_breakdown_marks_trial_failed(self, p1):
        record = run_trial(p1, "I2", p1_backend(corrections=()))
        assert record.failed
        assert "correction backend failed" in record.failure_reason
        assert record.revealed is None
        assert record.equivalent_to == frozenset()
        # probe inputs were produced before the breakdown, so they still count
        assert record.distinguished == {"I1": True, "I3": True, "I4": True}

    def test_initial_generation_breakdown_marks_trial_failed(self, p1):
        backend = ScriptedBackend({"initial_codegen": [], "input_gen": [], "correction": []})
        record = run_trial(p1, "I2", backend)
        assert record.failed
        assert record.corpus == ()
        assert record.distinguished == {"I1": False, "I3": False, "I4": False}

    def test_unknown_target_rejected(self, p1):
        with pytest.raises(KeyError):
            run_trial(p1, "I99", p1_backend())

    def test_run_trials_requires_positive_count(self, p1):
        with pytest.raises(ValueError, match="trials"):
            run_trials(p1, "I1", 0, p1_backend)

    def test_run_trials_is_deterministic(self, p1):
        first = run_trials(p1, "I2", 2, p1_backend)
        second = run_trials(p1, "I2", 2, p1_backend)
        assert [r.to_document() for r in first] == [r.to_document() for r in second]


# ---------------------------------------------------------------------------
# Metrics against an independent oracle
# ---------------------------------------------------------------------------


def oracle_metrics(records, reference_impls, target_id, domain_points):
    """Brute-force recomputation, bypassing the harness entirely."""
    non_targets = [iid for iid in reference_impls if iid != target_id]
    trials = len(records)
    iar = car = pass1 = 0
    target_fn = reference_impls[target_id]
    for record in records:
        points = [tuple(arg.value for arg in item.args) for item in record.corpus]
        for other_id in non_targets:
            other_fn = reference_impls[other_id]
            if any(target_fn(*p) != other_fn(*p) for p in points):
                iar += 1
        if record.failed or record.revealed is None:
            continue
        namespace: dict = {}
        exec(record.revealed.source, namespace)  # noqa: S102
        revealed_fn = namespace[next(iter(n for n in namespace if not n.startswith("__")))]
        revealed_table = [revealed_fn(*p) for p in domain_points]
        if revealed_table == [target_fn(*p) for p in domain_points]:
            pass1 += 1
        for other_id in non_targets:
            other_fn = reference_impls[other_id]
            if revealed_table != [other_fn(*p) for p in domain_points]:
                car += 1
    denominator = trials * len(non_targets)
    return (
        Fraction(iar, denominator),
        Fraction(car, denominator),
        Fraction(pass1, trials),
    )


class TestMetricsOracle:
    def test_harness_matches_brute_force(self, absdiff_problem):
        suggestions = "(1, 3), (2, 2)]"
        config = SessionConfig(corpus_cap=30)

        def backend(corrections):
            return ScriptedBackend(
                {
                    "initial_codegen": [SIGNED_DIFF],
                    "input_gen": [suggestions],
                    "correction": list(corrections),
                }
            )

        checker = EquivalenceChecker(absdiff_problem.bounded_domain, "absdiff")
        records = [
            run_trial(absdiff_problem, "I2", backend([ABS_DIFF]), config=config, equivalence=checker),
            run_trial(absdiff_problem, "I2", backend([SIGNED_DIFF]), config=config, equivalence=checker),
            run_trial(absdiff_problem, "I2", backend([]), config=config, equivalence=checker),
        ]
        report = compute_metrics(records)

        impls = {"I1": lambda a, b: a - b, "I2": lambda a, b: abs(a - b)}
        points = [(a, b) for a in range(-3, 4) for b in range(-3, 4)]
        iar, car, pass1 = oracle_metrics(records, impls, "I2", points)
        assert report.iar == iar == Fraction(1)
        assert report.car == car == Fraction(1, 3)
        assert report.pass1 == pass1 == Fraction(1, 3)
        assert report.iar_display == "3/(1 × 3)"
        assert report.car_display == "1/(1 × 3)"
        assert report.pass1_display == "1/3"

    def test_pass_at_one_successes_score_full_car(self, absdiff_problem):
        record = run_trial(
            absdiff_problem,
            "I2",
            ScriptedBackend(
                {
                    "initial_codegen": [ABS_DIFF],
                    "input_gen": ["(1, 3)]"],
                    "correction": [],
                }
            ),
        )
        assert record.equivalent_to == {"I2"}
        assert "I1" not in record.equivalent_to


def synthetic_record(index: int, distinguished_count: int, *, non_targets=15, hit=True):
    names = [f"N{i}" for i in range(1, non_targets + 1)]
    flags = {
        name: position < distinguished_count for position, name in enumerate(names)
    }
    revealed = CandidateImplementation("def f():\n    return 0\n", Provenance.initial())
    return TrialRecord(
        problem_id="SYN",
        target_id="T",
        corpus=(),
        revealed=revealed,
        distinguished=flags,
        equivalent_to=frozenset({"T"} if hit else {"N1"}),
    )


class TestMetricsFormatting:
    def test_paper_scale_formula(self):
        records = [synthetic_record(i, 15) for i in range(95)]
        records += [synthetic_record(95 + i, 14) for i in range(5)]
        report = compute_metrics(records)
        assert report.iar_numerator == 1495
        assert report.pair_denominator == 1500
        assert report.iar == Fraction(1495, 1500)
        assert abs(float(report.iar) - 1495 / 1500) < 1e-9
        assert report.iar_display == "1495/(15 × 100)"
        assert format_rate(report.iar) == "0.99667"
        assert report.car_display == "1500/(15 × 100)"
        assert report.pass1_display == "100/100"

    def test_document_shape(self):
        report = compute_metrics([synthetic_record(0, 15)])
        doc = report.to_document()
        assert doc["problem"] == "SYN"
        assert doc["targets"] == ["T"]
        assert doc["iar"]["display"] == "15/(15 × 1)"
        assert doc["pass1"]["rate"] == 1.0
        assert set(doc["car"]) == {
            "numerator",
            "denominator",
            "display",
            "rate",
            "rate_display",
        }

    def test_misses_and_failures_count_against_pass1(self):
        records = [
            synthetic_record(0, 15),
            synthetic_record(1, 15, hit=False),
            TrialRecord(
                problem_id="SYN",
                target_id="T",
                corpus=(),
                revealed=None,
                distinguished={f"N{i}": False for i in range(1, 16)},
                equivalent_to=frozenset(),
                failed=True,
                failure_reason="backend down",
            ),
        ]
        report = compute_metrics(records)
        assert report.pass1 == Fraction(1, 3)
        # miss: 14 non-targets inequivalent; failure: contributes nothing
        assert report.car_numerator == 15 + 14 + 0

    def test_vacuous_metrics_flagged(self):
        record = TrialRecord(
            problem_id="SYN",
            target_id="T",
            corpus=(),
            revealed=CandidateImplementation("def f():\n    return 0\n", Provenance.initial()),
            distinguished={},
            equivalent_to=frozenset({"T"}),
        )
        report = compute_metrics([record])
        assert report.vacuous
        assert report.iar == Fraction(1)
        assert report.car == Fraction(1)
        assert report.pass1 == Fraction(1)

    def test_empty_trial_set_rejected(self):
        with pytest.raises(EmptyTrialSet):
            compute_metrics([])

    def test_mixed_trials_rejected(self):
        a = synthetic_record(0, 15)
        b = TrialRecord(
            problem_id="SYN",
            target_id="U",
            corpus=(),
            revealed=None,
            distinguished={f"N{i}": True for i in range(1, 16)},
            equivalent_to=frozenset(),
            failed=True,
        )
        with pytest.raises(ValueError, match="mix"):
            compute_metrics([a, b])

    def test_combine_metrics_sums_counts(self):
        per_target = [
            MetricsReport(
                problem_id="P1",
                target_ids=(target,),
                trials=25,
                non_target_count=3,
                iar_numerator=75,
                car_numerator=75,
                pass1_numerator=25,
            )
            for target in ("I1", "I2", "I3", "I4")
        ]
        total = combine_metrics(per_target)
        assert total.target_ids == ("I1", "I2", "I3", "I4")
        assert total.trials == 100
        assert total.iar == Fraction(1)
        assert total.iar_display == "300/(3 × 100)"
        with pytest.raises(ValueError, match="mix"):
            combine_metrics(
                per_target
                + [
                    MetricsReport(
                        problem_id="P2",
                        target_ids=("I1",),
                        trials=25,
                        non_target_count=3,
                        iar_numerator=75,
                        car_numerator=75,
                        pass1_numerator=25,
                    )
                ]
            )
