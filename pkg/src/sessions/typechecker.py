"""
Type checking of annotated processes against session coalgebra types.

Two checkers share the context operations defined here:

- the algorithmic checker, which threads an output context through the
  process (Γ₁ ⊢ P ; Γ₂) and is the product;
- the declarative search, which tries every context split at parallel
  compositions and serves as an oracle for small terms.
"""

from dataclasses import dataclass, field
from itertools import product
from typing import Any, Dict, Iterable, Iterator, List, Mapping, Optional, Tuple, Union
import logging
import sys
from pathlib import Path

from lark import v_args
from lark.exceptions import UnexpectedInput

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from sessions.coalgebra import (
    DATA, STAR, OperationTag, Polarity, SessionCoalgebra, StateId, TransitionKey,
)
from sessions.errors import (
    BranchContextMismatch, DualUndefined, LabelNotOffered,
    LinearViolation, MissingAnnotation, MissingBranches, NotParallelizable,
    OperationMismatch, OracleTooLarge, ParCycle, PolarityMismatch,
    PreconditionFailed, ReplicationContextMismatch, ResidualLinear,
    SelfPayload, SessionError, SubtypeFailure, TypeSyntaxError, UnknownState,
    UnknownVariable,
)
from sessions.grammar import PARSER
from sessions.processes import (
    Branch, Inact, Input, Output, Par, Process, Repl, Res, Select,
)
from sessions.relations import RelationOracle, decide_similar
from sessions.type_store import TypeStore
from sessions.type_syntax import Basic, _TypeBuilder, resolve_names, syntax_details

logger = logging.getLogger(__name__)

SPLIT_LIMIT = 2 ** 12
UNRESTRICTED_OPS = (OperationTag.PAR, OperationTag.END, OperationTag.BSC)


class TypingContext(Mapping[str, StateId]):
    """Immutable map from variables to coalgebra states."""

    def __init__(self, bindings: Optional[Mapping[str, StateId]] = None):
        self._bindings: Dict[str, StateId] = dict(bindings or {})

    def __getitem__(self, name: str) -> StateId:
        return self._bindings[name]

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._bindings))

    def __len__(self) -> int:
        return len(self._bindings)

    def bind(self, name: str, state: StateId) -> "TypingContext":
        """Return a context with name bound to state (replacing any binding)."""
        bindings = dict(self._bindings)
        bindings[name] = state
        return TypingContext(bindings)

    def without(self, *names: str) -> "TypingContext":
        bindings = {n: s for n, s in self._bindings.items() if n not in names}
        return TypingContext(bindings)

    def key(self) -> Tuple[Tuple[str, StateId], ...]:
        return tuple(sorted(self._bindings.items()))

    def to_dict(self) -> Dict[str, StateId]:
        return dict(sorted(self._bindings.items()))

    def __repr__(self) -> str:
        inner = ", ".join(f"{n}: {s}" for n, s in self.key())
        return f"TypingContext({{{inner}}})"


CoalgebraLike = Union[TypeStore, SessionCoalgebra]


def _as_store(c: CoalgebraLike) -> TypeStore:
    return c if isinstance(c, TypeStore) else TypeStore(base=c)


def _coalgebra(c: CoalgebraLike) -> SessionCoalgebra:
    return c.coalgebra if isinstance(c, TypeStore) else c


# Context operations

def is_unrestricted(c: CoalgebraLike, state: StateId) -> bool:
    """A type is unrestricted iff its operation is par, end or bsc."""
    return _coalgebra(c).op(state) in UNRESTRICTED_OPS


def is_unrestricted_context(c: CoalgebraLike, ctx: Mapping[str, StateId]) -> bool:
    return all(is_unrestricted(c, state) for state in ctx.values())


def split_contexts(c: CoalgebraLike, ctx: Mapping[str, StateId]) -> List[Tuple[TypingContext, TypingContext]]:
    """
    Every split of a context.

    Unrestricted bindings go to both sides; each linear binding goes to
    exactly one side.
    """
    shared = {n: s for n, s in ctx.items() if is_unrestricted(c, s)}
    linear = sorted(n for n, s in ctx.items() if not is_unrestricted(c, s))
    splits = []
    for sides in product((0, 1), repeat=len(linear)):
        left, right = dict(shared), dict(shared)
        for name, side in zip(linear, sides):
            (left if side == 0 else right)[name] = ctx[name]
        splits.append((TypingContext(left), TypingContext(right)))
    return splits


def context_difference(c: CoalgebraLike, ctx: Mapping[str, StateId], names: Iterable[str]) -> TypingContext:
    """
    Remove names from a context.

    Raises:
        LinearViolation: if a removed name has a linear type
    """
    names = sorted(set(names))
    for name in names:
        if name in ctx and not is_unrestricted(c, ctx[name]):
            raise LinearViolation(name, ctx[name])
    remaining = {n: s for n, s in ctx.items() if n not in names}
    return TypingContext(remaining)


def with_ambient_bools(store: TypeStore, ctx: Mapping[str, StateId]) -> TypingContext:
    """Bind true and false to bool unless the context already binds them."""
    result = TypingContext(ctx)
    if "bool" not in store.basic_order.universe:
        return result
    state = store.add_type(Basic("bool"))
    for name in ("true", "false"):
        if name not in result:
            result = result.bind(name, state)
    return result


@v_args(inline=True)
class _ContextBuilder(_TypeBuilder):

    def typed_binding(self, name, tree):
        return (name, "type", tree)

    def state_binding(self, name, ref):
        return (name, "state", str(ref)[1:])

    def context(self, *bindings):
        return [b for b in bindings if b is not None]


def parse_context(text: str, store: TypeStore) -> TypingContext:
    """
    Parse `x: TYPE, y: @STATE` into a context, compiling types into store.

    Args:
        text: Context text (may be empty)
        store: Store receiving compiled types; @STATE must name one of its states

    Returns:
        TypingContext
    """
    if not text.strip():
        return TypingContext()
    try:
        tree = PARSER.parse(text, start="context")
    except UnexpectedInput as e:
        raise TypeSyntaxError(*syntax_details(e, text)) from None
    bindings: Dict[str, StateId] = {}
    for token, kind, value in _ContextBuilder().transform(tree):
        name = str(token)
        if name in bindings:
            raise TypeSyntaxError(f"variable '{name}' bound twice", token.line, token.column)
        if kind == "state":
            if value not in store.coalgebra:
                raise UnknownState(f"no state named {value!r}", token.line, token.column)
            bindings[name] = value
        else:
            bindings[name] = store.add_type(resolve_names(value, store.basic_order.universe))
    return TypingContext(bindings)


# Algorithmic checker

@dataclass
class RuleStep:
    """
    One rule application, recorded when the rule finishes.

    Attributes:
        rule: Rule name (A-In, A-Out, ...)
        subject: Variable acted on, if any
        before: Subject's state when the rule started
        after: Subject's state in the premise
        removed: Names the rule removes from its output
        restored: Bindings the rule puts back into its output
    """
    rule: str
    subject: Optional[str] = None
    before: Optional[StateId] = None
    after: Optional[StateId] = None
    removed: Tuple[str, ...] = ()
    restored: Tuple[Tuple[str, StateId], ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rule": self.rule,
            "subject": self.subject,
            "before": self.before,
            "after": self.after,
            "removed": list(self.removed),
            "restored": {n: s for n, s in self.restored},
        }


@dataclass
class CheckReport:
    """Outcome of algo_check."""
    verdict: bool
    output: Optional[TypingContext] = None
    trace: List[RuleStep] = field(default_factory=list)
    failure: Optional[SessionError] = None
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": "accept" if self.verdict else "reject",
            "output": self.output.to_dict() if self.output is not None else None,
            "trace": [step.to_dict() for step in self.trace],
            "error": self.failure.to_dict() if self.failure is not None else None,
            "warnings": list(self.warnings),
        }


def replay_trace(ctx: Mapping[str, StateId], trace: Iterable[RuleStep]) -> TypingContext:
    """Apply the removals and restorations of a trace to an input context."""
    bindings = dict(ctx)
    for step in trace:
        for name in step.removed:
            bindings.pop(name, None)
        for name, state in step.restored:
            bindings[name] = state
    return TypingContext(bindings)


class _Checker:
    """State shared by both checkers: the store and memoized relations."""

    def __init__(self, store: TypeStore):
        self.store = store
        self.oracle = RelationOracle(store.coalgebra)

    @property
    def c(self) -> SessionCoalgebra:
        return self.store.coalgebra

    def compile(self, annotation, node: Process) -> StateId:
        if annotation is None:
            raise MissingAnnotation("process has no type annotation", *_position(node))
        state = self.store.add_type(annotation)
        self.oracle.rebind(self.c)
        return state

    def dual(self, state: StateId) -> StateId:
        dual = self.store.dual_of(state)
        self.oracle.rebind(self.c)
        return dual

    def unpack(self, state: StateId, node: Process) -> StateId:
        """Step through par states until an action state is reached."""
        visited = set()
        current = state
        while self.c.op(current) is OperationTag.PAR:
            if current in visited:
                raise ParCycle(f"{state} only leads through par states", *_position(node))
            visited.add(current)
            witness = self.oracle.parallelizable(current)
            if not witness.verdict:
                raise NotParallelizable(
                    f"{current} is not parallelizable: {witness.reason}", *_position(node)
                )
            current = self.c.target(current, STAR)
        return current

    def expect(self, state: StateId, op: OperationTag, polarity: Polarity, node: Process) -> None:
        label = self.c.label(state)
        wanted = f"{op.value} {polarity.value}"
        if label.op is not op:
            raise OperationMismatch(
                f"'{node.channel}' has type {state} ({label.symbol}), expected {wanted}",
                *_position(node),
            )
        if label.polarity is not polarity:
            raise PolarityMismatch(
                f"'{node.channel}' has type {state} ({label.symbol}), expected {wanted}",
                *_position(node),
            )

    def subtype(self, left: StateId, right: StateId, node: Process) -> None:
        witness = self.oracle.similar(left, right)
        if not witness.verdict:
            raise SubtypeFailure(
                f"{left} is not a subtype of {right}: {witness.reason}",
                witness.failing_pair, *_position(node),
            )


def _position(node: Process) -> Tuple[Optional[int], Optional[int]]:
    position = getattr(node, "position", None)
    return position if position else (None, None)


class _AlgorithmicChecker(_Checker):
    """Syntax-directed checker computing output contexts."""

    def __init__(self, store: TypeStore):
        super().__init__(store)
        self.trace: List[RuleStep] = []
        self.warnings: List[str] = []

    def record(self, rule: str, subject=None, before=None, after=None, removed=(), restored=()):
        self.trace.append(RuleStep(rule, subject, before, after, tuple(removed), tuple(restored)))

    def check(self, ctx: TypingContext, p: Process) -> TypingContext:
        if isinstance(p, Inact):
            self.record("A-Inact")
            return ctx
        if isinstance(p, Repl):
            out = self.check(ctx, p.body)
            if out != ctx:
                raise ReplicationContextMismatch(
                    f"replicated body changes its context: {ctx!r} became {out!r}"
                )
            self.record("A-Rep")
            return ctx
        if isinstance(p, Par):
            middle = self.check(ctx, p.left)
            out = self.check(middle, p.right)
            self.record("A-Par")
            return out
        if isinstance(p, Res):
            state = self.compile(p.annotation, p)
            try:
                dual = self.dual(state)
            except DualUndefined as e:
                raise DualUndefined(e.message, *_position(p)) from None
            out = self.check(ctx.bind(p.x, state).bind(p.y, dual), p.body)
            result = context_difference(self.c, out, (p.x, p.y))
            self.record("A-Res", p.x, state, dual, removed=(p.x, p.y))
            return result
        return self.action(ctx, p)

    def action(self, ctx: TypingContext, p: Process) -> TypingContext:
        x = p.channel
        if x not in ctx:
            raise UnknownVariable(f"'{x}' is not in the context", *_position(p))
        state = ctx[x]
        if self.c.op(state) is not OperationTag.PAR:
            return self.apply(ctx, p, state)

        current = self.unpack(state, p)
        out = self.apply(ctx.bind(x, current), p, current)
        result = context_difference(self.c, out, (x,)).bind(x, state)
        self.record("A-Unpack", x, state, current, removed=(x,), restored=((x, state),))
        return result

    def apply(self, ctx: TypingContext, p: Process, state: StateId) -> TypingContext:
        x = p.channel
        c = self.c
        if isinstance(p, Input):
            self.expect(state, OperationTag.COM, Polarity.IN, p)
            annotation = self.compile(p.annotation, p)
            self.subtype(c.target(state, DATA), annotation, p)
            after = self.c.target(state, STAR)
            inner = ctx.without(x).bind(p.var, annotation).bind(x, after)
            out = self.check(inner, p.cont)
            result = context_difference(self.c, out, (x, p.var))
            self.record("A-In", x, state, after, removed=(x, p.var))
            return result

        if isinstance(p, Output):
            self.expect(state, OperationTag.COM, Polarity.OUT, p)
            payload = p.payload.name
            if payload == x:
                raise SelfPayload(f"'{x}' cannot be sent over itself", *_position(p))
            if payload not in ctx:
                raise UnknownVariable(f"payload '{payload}' is not in the context", *_position(p))
            payload_state = ctx[payload]
            self.subtype(payload_state, c.target(state, DATA), p)
            after = c.target(state, STAR)
            out = self.check(ctx.without(x, payload).bind(x, after), p.cont)
            result = context_difference(self.c, out, (x,))
            restored = ()
            if is_unrestricted(self.c, payload_state) and payload not in result:
                result = result.bind(payload, payload_state)
                restored = ((payload, payload_state),)
            self.record("A-Out", x, state, after, removed=(payload, x), restored=restored)
            return result

        if isinstance(p, Branch):
            self.expect(state, OperationTag.BRANCH, Polarity.IN, p)
            offered = c.label(state).labels
            handled = set(p.labels)
            missing = sorted(offered - handled)
            if missing:
                raise MissingBranches(f"branch on '{x}' lacks {missing}", *_position(p))
            extra = sorted(handled - offered)
            if extra:
                message = f"branches {extra} on '{x}' are never selected and were not checked"
                logger.warning(message)
                self.warnings.append(message)

            outputs = {}
            for label in sorted(offered):
                after = self.c.target(state, TransitionKey.of_label(label))
                outputs[label] = self.check(ctx.bind(x, after), p.arm(label))
            labels = sorted(outputs)
            reference = outputs[labels[0]].without(x)
            for label in labels[1:]:
                if outputs[label].without(x) != reference:
                    raise BranchContextMismatch(
                        f"branches '{labels[0]}' and '{label}' leave different contexts",
                        *_position(p),
                    )
            for label in labels:
                context_difference(self.c, outputs[label], (x,))
            self.record("A-Branch", x, state, None, removed=(x,))
            return reference

        if isinstance(p, Select):
            self.expect(state, OperationTag.BRANCH, Polarity.OUT, p)
            if p.label not in c.label(state).labels:
                raise LabelNotOffered(f"'{x}' does not offer label '{p.label}'", *_position(p))
            after = c.target(state, TransitionKey.of_label(p.label))
            out = self.check(ctx.bind(x, after), p.cont)
            result = context_difference(self.c, out, (x,))
            self.record("A-Sel", x, state, after, removed=(x,))
            return result

        raise TypeError(f"not an action: {p!r}")


def algo_check(c: CoalgebraLike, ctx: Mapping[str, StateId], p: Process) -> CheckReport:
    """
    Run the algorithmic checker.

    Args:
        c: Store or coalgebra holding the context types
        ctx: Input context
        p: Annotated process

    Returns:
        CheckReport; accepted only if the output context is unrestricted.
        Annotations that fail to compile are reported as the failure.
    """
    store = _as_store(c)
    ctx = TypingContext(ctx)
    for state in ctx.values():
        store.coalgebra.require(state)
    checker = _AlgorithmicChecker(store)
    output = None
    try:
        output = checker.check(ctx, p)
        residual = [n for n, s in output.items() if not is_unrestricted(store, s)]
        if residual:
            raise ResidualLinear(f"linear variables {residual} are not used up")
    except SessionError as e:
        logger.debug("rejected: %s", e)
        return CheckReport(False, output, checker.trace, e, checker.warnings)
    return CheckReport(True, output, checker.trace, None, checker.warnings)


# Declarative search

class _DeclarativeSearch(_Checker):
    """Searches for a derivation in the declarative rules."""

    def __init__(self, store: TypeStore, limit: int = SPLIT_LIMIT):
        super().__init__(store)
        self.limit = limit
        self.splits = 0
        self._memo: Dict[Tuple[Any, Process], bool] = {}

    def derivable(self, ctx: TypingContext, p: Process) -> bool:
        key = (ctx.key(), p)
        if key not in self._memo:
            self._memo[key] = self._derivable(ctx, p)
        return self._memo[key]

    def _derivable(self, ctx: TypingContext, p: Process) -> bool:
        if isinstance(p, Inact):
            return is_unrestricted_context(self.c, ctx)
        if isinstance(p, Repl):
            return is_unrestricted_context(self.c, ctx) and self.derivable(ctx, p.body)
        if isinstance(p, Par):
            for left, right in split_contexts(self.c, ctx):
                self.splits += 1
                if self.splits > self.limit:
                    raise OracleTooLarge(f"more than {self.limit} context splits")
                if self.derivable(left, p.left) and self.derivable(right, p.right):
                    return True
            return False
        if isinstance(p, Res):
            state = self.compile(p.annotation, p)
            try:
                dual = self.dual(state)
            except DualUndefined:
                return False
            return self.derivable(ctx.bind(p.x, state).bind(p.y, dual), p.body)

        x = p.channel
        if x not in ctx:
            return False
        try:
            state = self.unpack(ctx[x], p)
        except (ParCycle, NotParallelizable):
            return False
        ctx = ctx.bind(x, state)
        label = self.c.label(state)

        if isinstance(p, Input):
            if label.op is not OperationTag.COM or label.polarity is not Polarity.IN:
                return False
            annotation = self.compile(p.annotation, p)
            if not self.oracle.similar(self.c.target(state, DATA), annotation).verdict:
                return False
            inner = ctx.without(x).bind(p.var, annotation).bind(x, self.c.target(state, STAR))
            return self.derivable(inner, p.cont)

        if isinstance(p, Output):
            if label.op is not OperationTag.COM or label.polarity is not Polarity.OUT:
                return False
            payload = p.payload.name
            if payload == x or payload not in ctx:
                return False
            if not self.oracle.similar(ctx[payload], self.c.target(state, DATA)).verdict:
                return False
            inner = ctx.without(x, payload).bind(x, self.c.target(state, STAR))
            return self.derivable(inner, p.cont)

        if isinstance(p, Branch):
            if label.op is not OperationTag.BRANCH or label.polarity is not Polarity.IN:
                return False
            if not label.labels <= set(p.labels):
                return False
            return all(
                self.derivable(ctx.bind(x, self.c.target(state, TransitionKey.of_label(l))), p.arm(l))
                for l in sorted(label.labels)
            )

        if isinstance(p, Select):
            if label.op is not OperationTag.BRANCH or label.polarity is not Polarity.OUT:
                return False
            if p.label not in label.labels:
                return False
            after = self.c.target(state, TransitionKey.of_label(p.label))
            return self.derivable(ctx.bind(x, after), p.cont)

        raise TypeError(f"not a process: {p!r}")


def declarative_check(c: CoalgebraLike, ctx: Mapping[str, StateId], p: Process, limit: int = SPLIT_LIMIT) -> bool:
    """
    Decide Γ ⊢ P by exhaustive search over the declarative rules.

    An annotation that does not compile (missing, not contractive, free
    variables, unknown basic types) means no derivation exists.

    Raises:
        OracleTooLarge: if more than `limit` context splits are explored
    """
    store = _as_store(c)
    search = _DeclarativeSearch(store, limit)
    try:
        return search.derivable(TypingContext(ctx), p)
    except OracleTooLarge:
        raise
    except SessionError as e:
        logger.debug("no derivation: %s", e)
        return False


def check_subsumption_admissible(
    c: CoalgebraLike,
    ctx: Mapping[str, StateId],
    x: str,
    supertype: StateId,
    subtype: StateId,
    p: Process,
) -> bool:
    """
    Check that replacing x's type by a subtype keeps P well typed.

    Raises:
        PreconditionFailed: if subtype is not below supertype or P does not
            check with x at the supertype
    """
    store = _as_store(c)
    ctx = TypingContext(ctx)
    if not decide_similar(store.coalgebra, subtype, supertype).verdict:
        raise PreconditionFailed(f"{subtype} is not a subtype of {supertype}")
    if not algo_check(store, ctx.bind(x, supertype), p).verdict:
        raise PreconditionFailed(f"process does not check with {x}: {supertype}")
    return algo_check(store, ctx.bind(x, subtype), p).verdict
