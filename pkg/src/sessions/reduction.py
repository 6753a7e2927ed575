"""
Structural congruence and reduction for the session pi-calculus.

A normalized process is a chain of restrictions (sorted, outermost first)
over a sorted parallel composition of components. Components are prefixes
or replications; prefix continuations are normalized recursively. A
restriction annotation types its first endpoint, so reorienting one dualizes
it and a communication on it steps it past the prefix used.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Set, Tuple
import logging
import random
import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from sessions.processes import (
    Branch, Inact, Input, Output, Par, Process, Repl, Res, Select,
    all_names, erase, format_process, free_names, fresh_name, rename_free,
    substitute,
)
from sessions.errors import BscHasNoDual
from sessions.type_syntax import (
    Prefixed, Qualifier, Receive, Send, dual_type, unfold,
)

logger = logging.getLogger(__name__)

Restriction = Tuple[str, str, object]


# Normalization

def _flatten(p: Process, taken: Set[str], avoid: Set[str],
             restrictions: List[Restriction], components: List[Process]) -> None:
    """Hoist restrictions out of p, collecting them and its parallel components."""
    if isinstance(p, Inact):
        return
    if isinstance(p, Par):
        _flatten(p.left, taken, avoid, restrictions, components)
        _flatten(p.right, taken, avoid, restrictions, components)
        return
    if isinstance(p, Res):
        body = p.body
        x, y = p.x, p.y
        if x in taken:
            new = fresh_name(x, taken | avoid)
            body, x = rename_free(body, x, new), new
        taken.add(x)
        if y in taken:
            new = fresh_name(y, taken | avoid)
            body, y = rename_free(body, y, new), new
        taken.add(y)
        restrictions.append((x, y, p.annotation))
        _flatten(body, taken, avoid, restrictions, components)
        return
    components.append(_normalize_component(p))


def _normalize_component(p: Process) -> Process:
    if isinstance(p, Output):
        return Output(p.channel, p.payload, normalize(p.cont), p.position)
    if isinstance(p, Input):
        return Input(p.channel, p.var, p.annotation, normalize(p.cont), p.position)
    if isinstance(p, Branch):
        return Branch(p.channel, tuple((l, normalize(b)) for l, b in p.arms), p.position)
    if isinstance(p, Select):
        return Select(p.channel, p.label, normalize(p.cont), p.position)
    if isinstance(p, Repl):
        return Repl(normalize(p.body))
    raise TypeError(f"unexpected component {p!r}")


def _build(restrictions: List[Restriction], components: List[Process]) -> Process:
    """Assemble a canonical term from restrictions and components."""
    components = sorted(components, key=lambda c: (format_process(erase(c)), format_process(c)))
    used: Set[str] = set()
    for component in components:
        used |= free_names(component)

    canonical = []
    for x, y, annotation in restrictions:
        if x not in used and y not in used:
            continue
        if y < x:
            x, y, annotation = _swap(x, y, annotation)
        canonical.append((x, y, annotation))
    canonical.sort(key=lambda r: (r[0], r[1]))

    if not components:
        term: Process = Inact()
    else:
        term = components[-1]
        for component in reversed(components[:-1]):
            term = Par(component, term)
    for x, y, annotation in reversed(canonical):
        term = Res(x, y, annotation, term)
    return term


def _swap(x: str, y: str, annotation) -> Restriction:
    """Orient a restriction as (y, x), dualizing the type of its first endpoint."""
    if annotation is None:
        return (y, x, None)
    try:
        return (y, x, dual_type(annotation))
    except BscHasNoDual:
        # no dual to carry over, keep the written orientation
        return (x, y, annotation)


def _advance(annotation, label: Optional[str] = None):
    """Type of the first endpoint after one communication on the restriction."""
    if annotation is None:
        return None
    t = unfold(annotation)
    if not isinstance(t, Prefixed) or t.qualifier is Qualifier.UN:
        return annotation
    if isinstance(t.pretype, (Receive, Send)):
        return t.continuation
    return dict(t.pretype.arms).get(label, annotation)


def _decompose(p: Process) -> Tuple[List[Restriction], List[Process]]:
    restrictions: List[Restriction] = []
    components: List[Process] = []
    _flatten(p, set(free_names(p)), all_names(p), restrictions, components)
    return restrictions, components


def normalize(p: Process) -> Process:
    """
    Canonical representative of the structural congruence class of p.

    Restrictions are hoisted outward and sorted, parallel composition is
    flattened and sorted by its erased printed text, inactive components
    and unused restrictions disappear. Replications are not unfolded.
    """
    restrictions, components = _decompose(p)
    return _build(restrictions, components)


# Reduction

class StopReason(Enum):
    QUIESCENT = "quiescent"
    MAX_STEPS = "max-steps"
    REPL_BUDGET = "repl-budget"


@dataclass(frozen=True)
class Reduction:
    """One reduction step: rule fired, covariables used, result, replications unfolded."""
    rule: str
    channels: Tuple[str, str]
    result: Process
    unfolds: int = 0


@dataclass
class _Component:
    process: Process
    origin: Optional[int] = None


@dataclass
class _Expansion:
    """A configuration with some replications unfolded once each step."""
    restrictions: List[Restriction]
    components: List[_Component]
    steps: List[Optional[int]] = field(default_factory=list)


def reductions(p: Process, allow_repl_unfold: int = 0) -> List[Reduction]:
    """
    All one-step reductions of p.

    Args:
        p: Any process (normalized internally)
        allow_repl_unfold: How many replications may be unfolded to expose a redex

    Returns:
        Reductions sorted by printed result then rule, without duplicates
    """
    restrictions, components = _decompose(normalize(p))
    base = _Expansion(restrictions, [_Component(c) for c in components])

    found: Dict[Tuple[str, str], Reduction] = {}
    frontier = [base]
    for depth in range(allow_repl_unfold + 1):
        for expansion in frontier:
            for reduction in _redexes(expansion):
                key = (format_process(reduction.result), reduction.rule)
                if key not in found:
                    found[key] = reduction
        if depth == allow_repl_unfold:
            break
        frontier = [
            _unfold(expansion, index)
            for expansion in frontier
            for index, component in enumerate(expansion.components)
            if isinstance(component.process, Repl)
        ]
        if not frontier:
            break
    return [found[key] for key in sorted(found)]


def reduce_step(p: Process, allow_repl_unfold: int = 0) -> List[Process]:
    """All one-step successors of p, normalized."""
    return [r.result for r in reductions(p, allow_repl_unfold)]


def _unfold(expansion: _Expansion, index: int) -> _Expansion:
    """Unfold the replication at index once: !P becomes P | !P."""
    component = expansion.components[index]
    names: Set[str] = set()
    for x, y, _ in expansion.restrictions:
        names |= {x, y}
    for c in expansion.components:
        names |= all_names(c.process)

    restrictions: List[Restriction] = []
    copies: List[Process] = []
    body = component.process.body
    _flatten(body, set(names), names | all_names(body), restrictions, copies)

    step = len(expansion.steps)
    return _Expansion(
        expansion.restrictions + restrictions,
        expansion.components + [_Component(c, step) for c in copies],
        expansion.steps + [component.origin],
    )


def _needed_steps(expansion: _Expansion, participants: Tuple[int, int]) -> Set[int]:
    needed: Set[int] = set()
    pending = [expansion.components[i].origin for i in participants]
    while pending:
        step = pending.pop()
        if step is None or step in needed:
            continue
        needed.add(step)
        pending.append(expansion.steps[step])
    return needed


def _redexes(expansion: _Expansion) -> List[Reduction]:
    results = []
    covariables = {}
    for x, y, _ in expansion.restrictions:
        covariables[x] = y
        covariables[y] = x

    components = expansion.components
    for i, sender in enumerate(components):
        s = sender.process
        if not isinstance(s, (Output, Select)) or s.channel not in covariables:
            continue
        partner = covariables[s.channel]
        for j, receiver in enumerate(components):
            r = receiver.process
            if i == j or getattr(r, "channel", None) != partner:
                continue
            if isinstance(s, Output) and isinstance(r, Input):
                rule = "r-com"
                replaced = (s.cont, substitute(r.cont, r.var, s.payload))
            elif isinstance(s, Select) and isinstance(r, Branch) and s.label in r.labels:
                rule = "r-sync"
                replaced = (s.cont, r.arm(s.label))
            else:
                continue

            # Only keep unfoldings the redex actually uses
            if _needed_steps(expansion, (i, j)) != set(range(len(expansion.steps))):
                continue

            rest = [c.process for k, c in enumerate(components) if k not in (i, j)]
            label = s.label if isinstance(s, Select) else None
            restrictions = [
                (x, y, _advance(annotation, label) if {x, y} == {s.channel, partner} else annotation)
                for x, y, annotation in expansion.restrictions
            ]
            result = normalize(_build(restrictions, rest + list(replaced)))
            logger.debug("%s on %s/%s", rule, s.channel, partner)
            results.append(Reduction(rule, (s.channel, partner), result, len(expansion.steps)))
    return results


# Running

@dataclass
class TraceStep:
    """A process in a run, with the rule that produced it."""
    index: int
    process: Process
    rule: Optional[str] = None
    channels: Optional[Tuple[str, str]] = None

    def to_dict(self):
        return {
            "step": self.index,
            "rule": self.rule,
            "channels": list(self.channels) if self.channels else None,
            "process": format_process(self.process),
        }


@dataclass
class RunTrace:
    """Result of run: the visited processes and why the run stopped."""
    steps: List[TraceStep]
    reason: StopReason

    @property
    def rules(self) -> List[str]:
        return [step.rule for step in self.steps if step.rule]

    @property
    def final(self) -> Process:
        return self.steps[-1].process

    def to_dict(self):
        return {"reason": self.reason.value, "steps": [s.to_dict() for s in self.steps]}


def run(p: Process, max_steps: int, repl_budget: int, seed: Optional[int] = None) -> RunTrace:
    """
    Reduce p repeatedly.

    Args:
        p: Starting process
        max_steps: Maximum number of reductions
        repl_budget: Total replication unfoldings allowed over the run
        seed: Pick successors at random with this seed instead of the least one

    Returns:
        RunTrace with every visited process
    """
    if max_steps < 0 or repl_budget < 0:
        raise ValueError("budgets must be non-negative")
    rng = random.Random(seed) if seed is not None else None
    current = normalize(p)
    steps = [TraceStep(0, current)]
    remaining = repl_budget

    for index in range(1, max_steps + 1):
        options = reductions(current, remaining)
        if not options:
            _, components = _decompose(current)
            has_repl = any(isinstance(c, Repl) for c in components)
            reason = StopReason.REPL_BUDGET if has_repl and remaining == 0 else StopReason.QUIESCENT
            return RunTrace(steps, reason)
        chosen = rng.choice(options) if rng else options[0]
        remaining -= chosen.unfolds
        current = chosen.result
        steps.append(TraceStep(index, current, chosen.rule, chosen.channels))

    if reductions(current, remaining):
        return RunTrace(steps, StopReason.MAX_STEPS)
    return RunTrace(steps, StopReason.QUIESCENT)
