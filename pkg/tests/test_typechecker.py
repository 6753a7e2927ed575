"""
Tests for the algorithmic type checker, the declarative search and contexts.
"""

import pytest
import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from sessions.coalgebra import OperationTag, coalgebra_from_dict
from sessions.errors import (
    LinearViolation, OracleTooLarge, PreconditionFailed, TypeSyntaxError,
    UnknownState,
)
from sessions.examples import ALT_END, MATH_SESSION
from sessions.processes import Inact, Input, parse_process
from sessions.type_store import TypeStore
from sessions.type_syntax import Basic, Mu, Var, parse_type
from sessions.typechecker import (
    TypingContext, algo_check, check_subsumption_admissible, context_difference,
    declarative_check, is_unrestricted, parse_context, replay_trace,
    split_contexts, with_ambient_bools,
)


@pytest.fixture
def store():
    return TypeStore()


@pytest.fixture
def alt_end():
    """Store holding the par/read/par-loop coalgebra."""
    return TypeStore(base=coalgebra_from_dict(ALT_END))


def check(store, context, text):
    ctx = parse_context(context, store)
    return algo_check(store, ctx, parse_process(text))


def oracle(store, context, text):
    ctx = parse_context(context, store)
    return declarative_check(store, ctx, parse_process(text))


class TestContexts:
    """Test context parsing and the context operations."""

    def test_parse_context(self, store):
        ctx = parse_context("x: ?int, v: int", store)
        assert list(ctx) == ["v", "x"]
        assert store.coalgebra.op(ctx["x"]) is OperationTag.COM

    def test_empty_context(self, store):
        assert len(parse_context("  ", store)) == 0

    def test_state_reference(self, alt_end):
        ctx = parse_context("x: @T", alt_end)
        assert ctx["x"] == "T"

    def test_unknown_state_reference(self, store):
        with pytest.raises(UnknownState):
            parse_context("x: @nowhere", store)

    def test_duplicate_variable(self, store):
        with pytest.raises(TypeSyntaxError):
            parse_context("x: end, x: ?int", store)

    def test_unrestricted(self, store):
        ctx = parse_context("a: int, b: end, c: un ?int, d: ?int", store)
        assert is_unrestricted(store, ctx["a"])
        assert is_unrestricted(store, ctx["b"])
        assert is_unrestricted(store, ctx["c"])
        assert not is_unrestricted(store, ctx["d"])

    def test_splits_copy_unrestricted(self, store):
        ctx = parse_context("a: int, d: ?int, e: !int", store)
        splits = split_contexts(store, ctx)
        assert len(splits) == 4
        for left, right in splits:
            assert "a" in left and "a" in right
            assert ("d" in left) != ("d" in right)

    def test_difference(self, store):
        ctx = parse_context("a: int, d: ?int", store)
        assert context_difference(store, ctx, ["a"]) == TypingContext({"d": ctx["d"]})
        with pytest.raises(LinearViolation) as info:
            context_difference(store, ctx, ["d"])
        assert info.value.variable == "d"

    def test_ambient_bools(self, store):
        ctx = with_ambient_bools(store, TypingContext())
        assert set(ctx) == {"false", "true"}
        assert store.coalgebra.label(ctx["true"]).basic == "bool"


class TestJudgements:
    """Test the standard typing judgements."""

    def test_unused_linear_channel(self, store):
        report = check(store, "x: ?int", "0")
        assert not report.verdict
        assert report.failure.code == "ResidualLinear"

    def test_single_read(self, store):
        report = check(store, "x: ?int", "x?(z:int).0")
        assert report.verdict
        assert report.output == TypingContext()

    def test_restricted_session(self, store):
        report = check(store, "v: int", "new(x,y:?int) (x?(z:int).0 | y!(v).0)")
        assert report.verdict
        assert list(report.output) == ["v"]

    def test_unrestricted_parallel_reads(self, store):
        report = check(store, "x: un ?int", "x?(y1:int).0 | x?(y2:int).0")
        assert report.verdict

    def test_linear_parallel_reads(self, store):
        report = check(store, "x: ?int", "x?(y1:int).0 | x?(y2:int).0")
        assert not report.verdict
        assert report.failure.code == "UnknownVariable"

    def test_alt_end_sequential_reads(self, alt_end):
        report = check(alt_end, "x: @T", "x?(y1:int).x?(y2:int).x?(y3:int).0")
        assert not report.verdict
        assert report.failure.code == "ParCycle"

    def test_alt_end_parallel_reads(self, alt_end):
        report = check(alt_end, "x: @T", "x?(y1:int).0 | x?(y2:int).0 | x?(y3:int).0")
        assert report.verdict
        assert report.output["x"] == "T"

    def test_alt_end_replicated_read(self, alt_end):
        assert check(alt_end, "x: @T", "*x?(y:int).0").verdict

    def test_par_loop_only_rejects_users(self, alt_end):
        """A channel stuck in par states is fine as long as nobody acts on it."""
        assert not check(alt_end, "x: @q2", "x?(y:int).0").verdict
        assert check(alt_end, "x: @q2", "0").verdict

    def test_math_session(self, store):
        report = check(store, "u: int, w: int", MATH_SESSION)
        assert report.verdict
        assert list(report.output) == ["u", "w"]


class TestFailures:
    """Test the reported failure for each kind of mistake."""

    @pytest.mark.parametrize("context,process,code", [
        ("", "x!(v).0", "UnknownVariable"),
        ("x: ?real", "x?(z:int).0", "SubtypeFailure"),
        ("x: ?int", "x<<a.0", "OperationMismatch"),
        ("x: !int", "x?(z:int).0", "PolarityMismatch"),
        ("x: +{a: end}", "x<<b.0", "LabelNotOffered"),
        ("x: &{a: end, b: end}", "x>>{a: 0}", "MissingBranches"),
        ("x: &{a: end, b: end}, w: ?int", "x>>{a: w?(z:int).0, b: 0}", "BranchContextMismatch"),
        ("x: ?int", "*x?(z:int).0", "ReplicationContextMismatch"),
        ("x: rec X.un ?int.un !int.X", "x?(z:int).0", "NotParallelizable"),
        ("x: !int", "x!(x).0", "SelfPayload"),
        ("x: ?int", "x?(z).0", "MissingAnnotation"),
        ("", "new(x,y:int) 0", "DualUndefined"),
        ("x: ?(?int)", "x?(z:?int).0", "LinearViolation"),
    ])
    def test_failure_code(self, store, context, process, code):
        report = check(store, context, process)
        assert not report.verdict
        assert report.failure.code == code

    @pytest.mark.parametrize("annotation,code", [
        (Mu(Var(0)), "NotContractive"),
        (Var(0), "FreeVariable"),
        (Basic("string"), "UnknownBasicType"),
    ])
    def test_uncompilable_annotation(self, store, annotation, code):
        """Annotations built without the parser are rejected, not raised."""
        ctx = parse_context("x: ?int", store)
        process = Input("x", "z", annotation, Inact())
        report = algo_check(store, ctx, process)
        assert not report.verdict
        assert report.failure.code == code
        assert not declarative_check(store, ctx, process)

    def test_subtype_failure_has_pair(self, store):
        report = check(store, "x: ?real", "x?(z:int).0")
        assert report.failure.failing_pair is not None
        assert report.to_dict()["error"]["failing_pair"] == list(report.failure.failing_pair)

    def test_failure_position(self, store):
        report = check(store, "x: ?int", "x?(z:int).x?(w:int).0")
        assert report.failure.line == 1
        assert report.failure.column == 11

    def test_extra_branch_warns(self, store):
        report = check(store, "x: &{a: end}", "x>>{a: 0, b: 0}")
        assert report.verdict
        assert len(report.warnings) == 1


class TestOutputs:
    """Test output contexts and traces."""

    def test_unrestricted_payload_is_kept(self, store):
        report = check(store, "v: int, x: !int, y: !int", "x!(v).0 | y!(v).0")
        assert report.verdict
        assert "v" in report.output

    def test_subsumption_on_input(self, store):
        """Receiving an int where a real is expected is fine."""
        assert check(store, "x: ?int", "x?(z:real).0").verdict

    def test_subsumption_on_output(self, store):
        assert check(store, "v: int, x: !real", "x!(v).0").verdict
        assert not check(store, "r: real, x: !int", "x!(r).0").verdict

    def test_boolean_literal(self, store):
        ctx = with_ambient_bools(store, parse_context("x: !bool", store))
        assert algo_check(store, ctx, parse_process("x!(true).0")).verdict

    @pytest.mark.parametrize("context,process", [
        ("x: ?int", "x?(z:int).0"),
        ("v: int", "new(x,y:?int) (x?(z:int).0 | y!(v).0)"),
        ("x: un ?int", "x?(y1:int).0 | x?(y2:int).0"),
        ("u: int, w: int", MATH_SESSION),
    ])
    def test_trace_replays_to_output(self, store, context, process):
        ctx = parse_context(context, store)
        report = algo_check(store, ctx, parse_process(process))
        assert report.verdict
        assert replay_trace(ctx, report.trace) == report.output

    def test_trace_is_post_order(self, store):
        report = check(store, "x: ?int", "x?(z:int).0")
        assert [step.rule for step in report.trace] == ["A-Inact", "A-In"]

    def test_report_json(self, store):
        data = check(store, "x: ?int", "0").to_dict()
        assert data["verdict"] == "reject"
        assert data["error"]["code"] == "ResidualLinear"


class TestDeclarative:
    """Test the declarative search on the same judgements."""

    @pytest.mark.parametrize("context,process,expected", [
        ("x: ?int", "0", False),
        ("x: ?int", "x?(z:int).0", True),
        ("v: int", "new(x,y:?int) (x?(z:int).0 | y!(v).0)", True),
        ("x: un ?int", "x?(y1:int).0 | x?(y2:int).0", True),
        ("x: ?int", "x?(y1:int).0 | x?(y2:int).0", False),
        ("v: int, x: !int, y: !int", "x!(v).0 | y!(v).0", True),
    ])
    def test_judgement(self, store, context, process, expected):
        assert oracle(store, context, process) is expected

    def test_alt_end(self, alt_end):
        assert not oracle(alt_end, "x: @T", "x?(y1:int).x?(y2:int).x?(y3:int).0")
        assert oracle(alt_end, "x: @T", "x?(y1:int).0 | x?(y2:int).0 | x?(y3:int).0")
        assert oracle(alt_end, "x: @T", "*x?(y:int).0")

    def test_split_limit(self, store):
        ctx = parse_context("a: ?int, b: ?int", store)
        process = parse_process("a?(z:int).0 | b?(w:int).0 | 0")
        with pytest.raises(OracleTooLarge):
            declarative_check(store, ctx, process, limit=1)


class TestSubsumption:
    """Test substituting a subtype for a variable's type."""

    def test_admissible(self, store):
        real, integer = (store.add_type(parse_type(t)) for t in ("?real", "?int"))
        process = parse_process("x?(z:real).0")
        assert check_subsumption_admissible(store, {}, "x", real, integer, process)

    def test_not_a_subtype(self, store):
        real, integer = (store.add_type(parse_type(t)) for t in ("?real", "?int"))
        with pytest.raises(PreconditionFailed):
            check_subsumption_admissible(store, {}, "x", integer, real, parse_process("x?(z:int).0"))

    def test_ill_typed_process(self, store):
        state = store.add_type(parse_type("?int"))
        with pytest.raises(PreconditionFailed):
            check_subsumption_admissible(store, {}, "x", state, state, parse_process("0"))
