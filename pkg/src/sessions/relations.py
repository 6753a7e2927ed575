"""
Deciders for bisimilarity, duality, similarity and parallelizability.

The incremental deciders grow the smallest post-fixpoint containing the
queried pair with a FIFO worklist and stop at the first violating pair. The
brute-force oracle computes the greatest fixpoint by deleting pairs from the
full relation until stable.
"""

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, List, Optional, Set, Tuple, Union
import logging
import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from sessions.coalgebra import (
    DATA, STAR, OperationTag, Polarity, SessionCoalgebra, StateId,
    TransitionKey, continuation_closure, label_dual,
)
from sessions.errors import BscHasNoDual

logger = logging.getLogger(__name__)

Pair = Tuple[StateId, StateId]


class RelationKind(Enum):
    """Relations the deciders construct."""
    BISIM = "bisim"
    DUAL = "dual"
    SIM = "sim"


@dataclass
class RelationWitness:
    """
    Result of a relation query.

    Attributes:
        kind: Relation decided (None for parallelizability)
        left: First queried state
        right: Second queried state (None for parallelizability)
        verdict: Whether the relation holds
        relation: Post-fixpoint found on success
        failing_pair: First violating pair on failure
        reason: Why the failing pair violates the relation
    """
    kind: Optional[RelationKind]
    left: StateId
    right: Optional[StateId]
    verdict: bool
    relation: FrozenSet[Pair] = frozenset()
    failing_pair: Optional[Pair] = None
    reason: str = ""

    def to_dict(self) -> Dict[str, Any]:
        """Convert witness to dictionary."""
        return {
            "kind": self.kind.value if self.kind else "par",
            "left": self.left,
            "right": self.right,
            "verdict": self.verdict,
            "relation": [list(p) for p in sorted(self.relation)],
            "failing_pair": list(self.failing_pair) if self.failing_pair else None,
            "reason": self.reason,
        }


@dataclass
class _Obligation:
    """What a pair needs from the rest of the relation."""
    pairs: List[Pair] = field(default_factory=list)
    bisim_pairs: List[Pair] = field(default_factory=list)
    par_pair: Optional[Pair] = None


def _obligation(c: SessionCoalgebra, kind: RelationKind, u: StateId, w: StateId) -> Union[_Obligation, str]:
    """One-step condition of a relation for (u, w); a string explains a violation."""
    su, sw = c.states[u], c.states[w]
    lu, lw = su.label, sw.label

    if kind is RelationKind.BISIM:
        if lu.op is OperationTag.BSC and lw.op is OperationTag.BSC:
            order = c.basic_order
            if order.leq(lu.basic, lw.basic) and order.leq(lw.basic, lu.basic):
                return _Obligation()
            return f"basic types {lu.basic} and {lw.basic} are not equivalent"
        if lu != lw:
            return f"labels {lu.symbol} and {lw.symbol} differ"
        return _Obligation(pairs=[(t, sw.transitions[k]) for k, t in su.sorted_transitions()])

    if kind is RelationKind.DUAL:
        try:
            expected = label_dual(lu)
        except BscHasNoDual:
            return f"{u} is a basic type and has no dual"
        if lw != expected:
            return f"label {lw.symbol} is not the dual of {lu.symbol}"
        obligation = _Obligation()
        for key, target in su.sorted_transitions():
            pair = (target, sw.transitions[key])
            if key.is_data:
                obligation.bisim_pairs.append(pair)
            else:
                obligation.pairs.append(pair)
        return obligation

    # Similarity
    if lu.op is not lw.op:
        return f"operations {lu.op.value} and {lw.op.value} differ"
    op = lu.op
    if op is OperationTag.END:
        return _Obligation()
    if op is OperationTag.BSC:
        if c.basic_order.leq(lu.basic, lw.basic):
            return _Obligation()
        return f"{lu.basic} is not a subtype of {lw.basic}"
    if op is OperationTag.PAR:
        cu, cw = su.transitions[STAR], sw.transitions[STAR]
        return _Obligation(pairs=[(cu, cw)], par_pair=(cu, cw))
    if lu.polarity is not lw.polarity:
        return f"polarities {lu.symbol} and {lw.symbol} differ"
    if op is OperationTag.COM:
        cont = (su.transitions[STAR], sw.transitions[STAR])
        if lu.polarity is Polarity.IN:
            data = (su.transitions[DATA], sw.transitions[DATA])
        else:
            data = (sw.transitions[DATA], su.transitions[DATA])
        return _Obligation(pairs=[data, cont])
    # Branch: inputs may offer more, outputs may select fewer
    if lu.polarity is Polarity.IN:
        if not lu.labels <= lw.labels:
            return f"labels {sorted(lu.labels - lw.labels)} missing on the right"
        labels = lu.labels
    else:
        if not lw.labels <= lu.labels:
            return f"labels {sorted(lw.labels - lu.labels)} missing on the left"
        labels = lw.labels
    return _Obligation(pairs=[
        (su.transitions[TransitionKey.of_label(l)], sw.transitions[TransitionKey.of_label(l)])
        for l in sorted(labels)
    ])


class _Decider:
    """Incremental decider sharing memo tables across nested queries."""

    def __init__(self, c: SessionCoalgebra):
        self.c = c
        self._bisim: Dict[Pair, RelationWitness] = {}
        self._par: Dict[StateId, RelationWitness] = {}

    def relate(self, kind: RelationKind, x: StateId, y: StateId) -> RelationWitness:
        self.c.require(x)
        self.c.require(y)
        if kind is RelationKind.BISIM and (x, y) in self._bisim:
            return self._bisim[(x, y)]

        relation: Set[Pair] = {(x, y)}
        queue = deque([(x, y)])
        witness = None
        while queue:
            u, w = queue.popleft()
            outcome = _obligation(self.c, kind, u, w)
            if isinstance(outcome, str):
                witness = RelationWitness(kind, x, y, False, failing_pair=(u, w), reason=outcome)
                break
            failed = _side_conditions(self, outcome)
            if failed is not None:
                witness = RelationWitness(
                    kind, x, y, False, failing_pair=failed.failing_pair, reason=failed.reason
                )
                break
            for pair in outcome.pairs:
                if pair not in relation:
                    relation.add(pair)
                    queue.append(pair)

        if witness is None:
            witness = RelationWitness(kind, x, y, True, relation=frozenset(relation))
        else:
            logger.debug("%s %s %s fails at %s: %s", x, kind.value, y, witness.failing_pair, witness.reason)
        if kind is RelationKind.BISIM:
            self._bisim[(x, y)] = witness
        return witness

    def parallelizable(self, x: StateId) -> RelationWitness:
        if x in self._par:
            return self._par[x]
        self.c.require(x)
        members = sorted(
            s for s in continuation_closure(self.c, x)
            if self.c.states[s].label.op is not OperationTag.PAR
        )
        checked: Set[Pair] = set()
        witness = None
        for i, u in enumerate(members):
            for w in members[i + 1:]:
                if not self.relate(RelationKind.BISIM, u, w).verdict:
                    witness = RelationWitness(
                        None, x, None, False, failing_pair=(u, w),
                        reason=f"{u} and {w} are not bisimilar",
                    )
                    break
                checked.add((u, w))
            if witness is not None:
                break
        if witness is None:
            witness = RelationWitness(None, x, None, True, relation=frozenset(checked))
        self._par[x] = witness
        return witness


def _side_conditions(decider: _Decider, obligation: _Obligation) -> Optional[RelationWitness]:
    """First failed bisimilarity or parallelizability condition of an obligation."""
    for a, b in obligation.bisim_pairs:
        sub = decider.relate(RelationKind.BISIM, a, b)
        if not sub.verdict:
            return sub
    if obligation.par_pair is not None:
        a, b = obligation.par_pair
        if decider.parallelizable(a).verdict != decider.parallelizable(b).verdict:
            return RelationWitness(
                RelationKind.SIM, a, b, False, failing_pair=(a, b),
                reason=f"parallelizability of {a} and {b} differs",
            )
    return None


def pair_violation(
    c: SessionCoalgebra,
    kind: RelationKind,
    pair: Pair,
    relation: FrozenSet[Pair],
    decider: Optional[_Decider] = None,
) -> Optional[str]:
    """
    Check one pair of a candidate relation.

    Args:
        c: Coalgebra holding both states
        kind: Relation the candidate should be a post-fixpoint of
        pair: Pair to check
        relation: Candidate relation the obligations must land in
        decider: Decider to reuse for bisimilarity side conditions

    Returns:
        Why the pair violates the relation, or None if its obligations are met
    """
    u, w = pair
    outcome = _obligation(c, kind, u, w)
    if isinstance(outcome, str):
        return outcome
    for needed in outcome.pairs:
        if needed not in relation:
            return f"{needed} is required but missing"
    failed = _side_conditions(decider or _Decider(c), outcome)
    if failed is not None:
        return failed.reason
    return None


def decide_bisimilar(c: SessionCoalgebra, x: StateId, y: StateId) -> RelationWitness:
    """Decide whether x and y are bisimilar (type equivalence)."""
    return _Decider(c).relate(RelationKind.BISIM, x, y)


def decide_dual(c: SessionCoalgebra, x: StateId, y: StateId) -> RelationWitness:
    """Decide whether y is a dual of x."""
    return _Decider(c).relate(RelationKind.DUAL, x, y)


def decide_similar(c: SessionCoalgebra, x: StateId, y: StateId) -> RelationWitness:
    """Decide whether x is a subtype of y."""
    return _Decider(c).relate(RelationKind.SIM, x, y)


def decide_parallelizable(c: SessionCoalgebra, x: StateId) -> RelationWitness:
    """Decide whether the non-par continuation states of x are pairwise bisimilar."""
    return _Decider(c).parallelizable(x)


class RelationOracle:
    """
    Memoizing front end used by the type checkers.

    Answers stay valid while the coalgebra only grows, since states never
    change once created.
    """

    def __init__(self, c: SessionCoalgebra):
        self._decider = _Decider(c)
        self._sim: Dict[Pair, RelationWitness] = {}

    def rebind(self, c: SessionCoalgebra) -> None:
        """Point at a larger snapshot of the same store."""
        self._decider.c = c

    def similar(self, x: StateId, y: StateId) -> RelationWitness:
        if (x, y) not in self._sim:
            self._sim[(x, y)] = self._decider.relate(RelationKind.SIM, x, y)
        return self._sim[(x, y)]

    def parallelizable(self, x: StateId) -> RelationWitness:
        return self._decider.parallelizable(x)


# Brute-force oracle

def brute_force_relation(c: SessionCoalgebra, kind: RelationKind) -> FrozenSet[Pair]:
    """
    Greatest fixpoint of a relation over all states of c.

    Starts from every pair passing the local label check and removes pairs
    whose obligations are unmet until nothing changes.
    """
    bisim: FrozenSet[Pair] = frozenset()
    par: Dict[StateId, bool] = {}
    if kind is not RelationKind.BISIM:
        bisim = brute_force_relation(c, RelationKind.BISIM)
    if kind is RelationKind.SIM:
        par = {x: _brute_parallelizable(c, x, bisim) for x in c.state_ids}

    ids = c.state_ids
    obligations: Dict[Pair, _Obligation] = {}
    for u in ids:
        for w in ids:
            outcome = _obligation(c, kind, u, w)
            if isinstance(outcome, _Obligation):
                obligations[(u, w)] = outcome

    relation = set(obligations)
    changed = True
    while changed:
        changed = False
        for pair in sorted(relation):
            ob = obligations[pair]
            holds = (
                all(p in relation for p in ob.pairs)
                and all(p in bisim for p in ob.bisim_pairs)
                and (ob.par_pair is None or par[ob.par_pair[0]] == par[ob.par_pair[1]])
            )
            if not holds:
                relation.discard(pair)
                changed = True
    return frozenset(relation)


def _brute_parallelizable(c: SessionCoalgebra, x: StateId, bisim: FrozenSet[Pair]) -> bool:
    members = [s for s in continuation_closure(c, x) if c.states[s].label.op is not OperationTag.PAR]
    return all((u, w) in bisim for u in members for w in members)


def is_post_fixpoint(c: SessionCoalgebra, kind: RelationKind, relation: FrozenSet[Pair]) -> bool:
    """Check in one pass that every pair's obligations are met by the relation."""
    decider = _Decider(c)
    return all(pair_violation(c, kind, pair, relation, decider) is None for pair in sorted(relation))
