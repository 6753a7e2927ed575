"""
Property suites relating the algorithmic checker to the declarative rules.

Two corpora are built once per module: every small process over a fixed set
of types, and a seeded random sample of larger ones. Every property is
checked on every case where the algorithm produces an output context.
"""

import random
import pytest
import sys
from pathlib import Path

from hypothesis import given, settings, strategies as st

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from sessions.coalgebra import STAR
from sessions.corpus import (
    CorpusGenerator, SUBTYPE_POOL, enumerate_corpus, subsumption_triples,
    typed_process,
)
from sessions.examples import MATH_SESSION
from sessions.processes import (
    Inact, Par, Res, Variable, erase, free_names, parse_process, substitute,
)
from sessions.reduction import normalize, reduce_step, run
from sessions.relations import decide_bisimilar
from sessions.type_store import TypeStore
from sessions.type_syntax import parse_type, unfold
from sessions.typechecker import (
    algo_check, check_subsumption_admissible, declarative_check,
    is_unrestricted, parse_context, replay_trace,
)

CORPUS_SIZE = 600
ORACLE_LIMIT = 1 << 16


@pytest.fixture(scope="module")
def store():
    return TypeStore()


@pytest.fixture(scope="module")
def corpus(store):
    """(context, process, report) for every generated case."""
    cases = []
    for case in CorpusGenerator(seed=2024).generate(CORPUS_SIZE):
        ctx = parse_context(case.context_text, store)
        cases.append((ctx, case.process, algo_check(store, ctx, case.process)))
    return cases


@pytest.fixture(scope="module")
def enumerated(store):
    """(context, process, report) for every enumerated case."""
    contexts = {}
    cases = []
    for case in enumerate_corpus():
        text = case.context_text
        if text not in contexts:
            contexts[text] = parse_context(text, store)
        ctx = contexts[text]
        cases.append((ctx, case.process, algo_check(store, ctx, case.process)))
    return cases


@pytest.fixture(scope="module")
def both(corpus, enumerated):
    return enumerated + corpus


def derived(corpus):
    return [(ctx, p, r) for ctx, p, r in corpus if r.output is not None]


def accepted(corpus):
    return [(ctx, p, r) for ctx, p, r in corpus if r.verdict]


UNRESTRICTED_TYPES = ("int", "bool", "end", "un ?int", "rec X.un !int.X", "un &{a: end}")


RECURSIVE_TYPES = (
    "rec X.?X.X",
    "rec X.!(rec X.?X.X).X",
    "rec X.&{mul: ?int.?int.!int.X, neg: ?bool.!bool.X, quit: end}",
    "rec X.?int.rec Y.+{a: !X.Y, b: X}",
)


def mirrored(p):
    """A congruent term with every top-level parallel composition swapped."""
    if isinstance(p, Par):
        return Par(mirrored(p.right), mirrored(p.left))
    if isinstance(p, Res):
        return Res(p.x, p.y, p.annotation, mirrored(p.body), p.position)
    return p


class TestOracleAgreement:
    """The algorithm accepts exactly what the declarative rules derive."""

    def test_enumerated_agreement(self, store, enumerated):
        disagreements = [
            (ctx.to_dict(), p)
            for ctx, p, report in enumerated
            if report.verdict != declarative_check(store, ctx, p, ORACLE_LIMIT)
        ]
        assert disagreements == []

    def test_enumeration_is_not_trivial(self, enumerated):
        verdicts = [report.verdict for _, _, report in enumerated]
        assert any(verdicts) and not all(verdicts)
        assert len({(ctx.key(), p) for ctx, p, _ in enumerated}) == len(enumerated)

    def test_enumeration_covers_restrictions(self, enumerated):
        """Accepted cases include one and two restrictions."""
        depths = set()
        for _, p, report in accepted(enumerated):
            depth = 0
            while isinstance(p, Res):
                depth, p = depth + 1, p.body
            depths.add(depth)
        assert {0, 1} <= depths

    def test_corpus_agreement(self, store, corpus):
        disagreements = [
            (ctx.to_dict(), p)
            for ctx, p, report in corpus
            if report.verdict != declarative_check(store, ctx, p, ORACLE_LIMIT)
        ]
        assert disagreements == []

    def test_corpus_is_not_trivial(self, corpus):
        accepted = sum(1 for _, _, report in corpus if report.verdict)
        assert 0 < accepted < len(corpus)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(min_value=0, max_value=10 ** 6))
    def test_random_seeds(self, seed):
        store = TypeStore()
        case = CorpusGenerator(seed=seed).case()
        ctx = parse_context(case.context_text, store)
        report = algo_check(store, ctx, case.process)
        assert report.verdict == declarative_check(store, ctx, case.process, ORACLE_LIMIT)


class TestStructuralProperties:
    """Properties of output contexts."""

    def test_monotonicity(self, store, both):
        """Outputs only drop bindings, and unrestricted inputs survive."""
        for ctx, p, report in derived(both):
            output = report.output
            for name, state in output.items():
                assert ctx.get(name) == state
            for name, state in ctx.items():
                if is_unrestricted(store, state):
                    assert output.get(name) == state

    @pytest.mark.parametrize("text", UNRESTRICTED_TYPES)
    def test_weakening(self, store, both, text):
        """An extra unrestricted binding passes through unchanged."""
        extra = store.add_type(parse_type(text))
        for ctx, p, report in derived(both):
            weakened = algo_check(store, ctx.bind("fresh", extra), p)
            assert weakened.output == report.output.bind("fresh", extra)
            assert weakened.verdict == report.verdict

    def test_weakening_with_inert_state(self, store, both):
        """The par state left after an unrestricted read weakens like any other."""
        root = store.add_type(parse_type("un ?int"))
        inert = store.coalgebra.target(store.coalgebra.target(root, STAR), STAR)
        for ctx, p, report in derived(both):
            weakened = algo_check(store, ctx.bind("fresh", inert), p)
            assert weakened.output == report.output.bind("fresh", inert)
            assert weakened.verdict == report.verdict

    def test_linear_strengthening(self, store, both):
        """Dropping a binding the process never mentions only drops it from the output."""
        for ctx, p, report in derived(both):
            unused = [name for name in ctx if name not in free_names(p)]
            for name in unused:
                smaller = algo_check(store, ctx.without(name), p)
                assert smaller.output == report.output.without(name)

    def test_used_linear_binding_is_needed(self, store, enumerated):
        """Dropping a linear binding the process uses makes it ill typed."""
        checked = 0
        for ctx, p, report in accepted(enumerated):
            for name, state in ctx.items():
                if name in free_names(p) and not is_unrestricted(store, state):
                    assert not algo_check(store, ctx.without(name), p).verdict
                    checked += 1
        assert checked > 0

    def test_trace_replay(self, both):
        for ctx, p, report in both:
            if report.verdict:
                assert replay_trace(ctx, report.trace) == report.output


class TestStructuralCongruence:
    """Congruent terms and reducts keep their derivations."""

    def test_reoriented_restriction(self, store):
        ctx = parse_context("v: int", store)
        p = parse_process("new(y, x: ?int) (y?(z: int).0 | x!(v).0)")
        normal = normalize(p)
        assert (normal.x, normal.y) == ("x", "y")
        assert algo_check(store, ctx, p).verdict
        assert algo_check(store, ctx, normal).verdict

    def test_normal_forms_keep_derivations(self, store, both):
        """Normalizing only drops restrictions nobody uses, so accepted terms stay accepted."""
        for ctx, p, report in accepted(both):
            normal = algo_check(store, ctx, normalize(p))
            assert normal.verdict, (ctx.to_dict(), p)
            assert normal.output == report.output

    def test_reducts_keep_derivations(self, store, enumerated):
        for ctx, p, report in accepted(enumerated):
            for q in reduce_step(p, 1):
                assert algo_check(store, ctx, q).verdict, (ctx.to_dict(), p, q)

    def test_math_session_run_stays_typed(self, store):
        ctx = parse_context("u: int, w: int", store)
        trace = run(parse_process(MATH_SESSION), max_steps=8, repl_budget=0)
        for step in trace.steps:
            assert algo_check(store, ctx, step.process).verdict, step.to_dict()


class TestTermProperties:
    """Laws of the term operations on generated processes."""

    @settings(max_examples=200, deadline=None)
    @given(st.integers(min_value=0, max_value=10 ** 6))
    def test_erase(self, seed):
        """Erasure is idempotent and commutes with normalization."""
        p = CorpusGenerator(seed=seed).case().process
        assert erase(erase(p)) == erase(p)
        assert erase(normalize(p)) == normalize(erase(p))

    @settings(max_examples=200, deadline=None)
    @given(st.integers(min_value=0, max_value=10 ** 6))
    def test_reduction_respects_congruence(self, seed):
        p = CorpusGenerator(seed=seed).case().process
        assert reduce_step(p, 1) == reduce_step(Par(Inact(), mirrored(p)), 1)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(min_value=0, max_value=10 ** 6))
    def test_substitution_changes_only_the_replaced_name(self, seed):
        p = CorpusGenerator(seed=seed).case().process
        for name in sorted(free_names(p)):
            result = substitute(p, name, Variable("w"))
            assert free_names(result) == (free_names(p) - {name}) | {"w"}

    @settings(max_examples=50, deadline=None)
    @given(st.sampled_from(SUBTYPE_POOL + RECURSIVE_TYPES))
    def test_unfold_is_bisimilar(self, text):
        store = TypeStore()
        t = parse_type(text)
        folded = store.add_type(t)
        unfolded = store.add_type(unfold(t))
        assert decide_bisimilar(store.coalgebra, folded, unfolded).verdict


class TestSubsumptionAdmissible:
    """Replacing a type by a subtype keeps a process well typed."""

    def test_generated_triples(self):
        store = TypeStore()
        triples = subsumption_triples(store, 200, seed=11)
        assert len(triples) == 200
        base = parse_context("v: int, r: real", store)
        for supertype, subtype, process in triples:
            assert check_subsumption_admissible(store, base, "x", supertype, subtype, process)

    @pytest.mark.parametrize("text", SUBTYPE_POOL)
    def test_walker_follows_type(self, text):
        """Processes built from a type check against it."""
        store = TypeStore()
        ctx = parse_context(f"x: {text}, v: int, r: real", store)
        rng = random.Random(text)
        for _ in range(5):
            process = typed_process(parse_type(text), "x", rng)
            assert algo_check(store, ctx, process).verdict
