"""
Finite session coalgebras.

A session coalgebra is a finite set of states. Each state carries a label
(operation, polarity, branch labels or basic type) and a transition map from
keys (the data key or a continuation key) to other states. This module holds
the data model, validation from the JSON table format, the reachability
closures and the lazy dual closure.
"""

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple
import json
import logging
import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from sessions.errors import (
    ArityMismatch, BscHasNoDual, CoalgebraFormatError, ConfigError,
    DanglingTarget, DualUndefined, EmptyBranch, UnknownBasicType, UnknownState,
)

logger = logging.getLogger(__name__)

StateId = str

DEFAULT_BASIC_TYPES = ("bool", "int", "real")
DEFAULT_BASIC_ORDER = (("int", "real"),)


class OperationTag(Enum):
    """Operation of a state."""
    COM = "com"
    BRANCH = "branch"
    END = "end"
    BSC = "bsc"
    PAR = "par"


class Polarity(Enum):
    """Direction of a communication or choice."""
    IN = "in"
    OUT = "out"

    @property
    def dual(self) -> "Polarity":
        return Polarity.OUT if self is Polarity.IN else Polarity.IN


@dataclass(frozen=True)
class StateLabel:
    """
    Label of a state.

    Attributes:
        op: Operation tag
        polarity: Polarity for com and branch states
        labels: Branch labels (non-empty for branch states)
        basic: Basic type name for bsc states
    """
    op: OperationTag
    polarity: Optional[Polarity] = None
    labels: FrozenSet[str] = frozenset()
    basic: Optional[str] = None

    @classmethod
    def com(cls, polarity: Polarity) -> "StateLabel":
        return cls(OperationTag.COM, polarity)

    @classmethod
    def branch(cls, polarity: Polarity, labels: Iterable[str]) -> "StateLabel":
        return cls(OperationTag.BRANCH, polarity, frozenset(labels))

    @classmethod
    def end(cls) -> "StateLabel":
        return cls(OperationTag.END)

    @classmethod
    def bsc(cls, basic: str) -> "StateLabel":
        return cls(OperationTag.BSC, basic=basic)

    @classmethod
    def par(cls) -> "StateLabel":
        return cls(OperationTag.PAR)

    @property
    def symbol(self) -> str:
        """Short text used in DOT output and messages."""
        if self.op is OperationTag.COM:
            return "?" if self.polarity is Polarity.IN else "!"
        if self.op is OperationTag.BRANCH:
            return "&" if self.polarity is Polarity.IN else "⊕"
        if self.op is OperationTag.BSC:
            return self.basic or ""
        return self.op.value


class KeyKind(Enum):
    DATA = "data"
    STAR = "star"
    LABEL = "label"


@dataclass(frozen=True)
class TransitionKey:
    """Transition key: the data key, or a continuation key (star or label)."""
    kind: KeyKind
    label: Optional[str] = None

    @classmethod
    def of_label(cls, label: str) -> "TransitionKey":
        return cls(KeyKind.LABEL, label)

    @property
    def is_data(self) -> bool:
        return self.kind is KeyKind.DATA

    @property
    def sort_key(self) -> Tuple[int, str]:
        order = {KeyKind.DATA: 0, KeyKind.STAR: 1, KeyKind.LABEL: 2}
        return (order[self.kind], self.label or "")

    def __str__(self) -> str:
        if self.kind is KeyKind.LABEL:
            return self.label or ""
        return "1" if self.is_data else "*"


DATA = TransitionKey(KeyKind.DATA)
STAR = TransitionKey(KeyKind.STAR)


def expected_keys(label: StateLabel) -> FrozenSet[TransitionKey]:
    """Key set prescribed by a label."""
    if label.op is OperationTag.COM:
        return frozenset({DATA, STAR})
    if label.op is OperationTag.BRANCH:
        return frozenset(TransitionKey.of_label(l) for l in label.labels)
    if label.op is OperationTag.PAR:
        return frozenset({STAR})
    return frozenset()


@dataclass(frozen=True)
class State:
    """A labelled state with its transition map (never mutated)."""
    label: StateLabel
    transitions: Mapping[TransitionKey, StateId] = field(default_factory=dict)

    def sorted_transitions(self) -> List[Tuple[TransitionKey, StateId]]:
        return sorted(self.transitions.items(), key=lambda item: item[0].sort_key)


class BasicTypePreorder:
    """
    Reflexive-transitive order on basic type names.

    Attributes:
        universe: Known basic types
        pairs: Closure of the non-reflexive pairs
    """

    def __init__(self, universe: Iterable[str], pairs: Iterable[Tuple[str, str]] = ()):
        pairs = [(a, b) for a, b in pairs]
        self.universe: FrozenSet[str] = frozenset(universe) | {n for p in pairs for n in p}
        closure = {(a, b) for a, b in pairs if a != b}
        # Transitive closure over the (small) universe
        changed = True
        while changed:
            changed = False
            for a, b in list(closure):
                for c, d in list(closure):
                    if b == c and a != d and (a, d) not in closure:
                        closure.add((a, d))
                        changed = True
        self.pairs: FrozenSet[Tuple[str, str]] = frozenset(closure)

    @classmethod
    def default(cls) -> "BasicTypePreorder":
        return cls(DEFAULT_BASIC_TYPES, DEFAULT_BASIC_ORDER)

    @classmethod
    def from_text(cls, text: str) -> "BasicTypePreorder":
        """
        Parse a basic-order file.

        Each line is `a <= b`, a bare basic type name, blank, or a comment
        starting with '#'.
        """
        universe: Set[str] = set()
        pairs: List[Tuple[str, str]] = []
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "<=" in line:
                left, _, right = line.partition("<=")
                left, right = left.strip(), right.strip()
                if not (_is_identifier(left) and _is_identifier(right)):
                    raise ConfigError(f"malformed order line {raw!r}", number, 1)
                pairs.append((left, right))
            elif _is_identifier(line):
                universe.add(line)
            else:
                raise ConfigError(f"malformed order line {raw!r}", number, 1)
        return cls(universe, pairs)

    @classmethod
    def from_file(cls, path: str) -> "BasicTypePreorder":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_text(f.read())

    def extended(self, pairs: Iterable[Tuple[str, str]]) -> "BasicTypePreorder":
        """Return a new preorder with extra pairs added."""
        return BasicTypePreorder(self.universe, list(self.pairs) + list(pairs))

    def leq(self, left: str, right: str) -> bool:
        return left == right or (left, right) in self.pairs

    def to_list(self) -> List[List[str]]:
        """Generating pairs for JSON; isolated types appear as reflexive pairs."""
        result = [[a, b] for a, b in sorted(self.pairs)]
        mentioned = {n for p in self.pairs for n in p}
        result.extend([name, name] for name in sorted(self.universe - mentioned))
        return result

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BasicTypePreorder):
            return NotImplemented
        return self.universe == other.universe and self.pairs == other.pairs

    def __repr__(self) -> str:
        return f"BasicTypePreorder(universe={sorted(self.universe)}, pairs={sorted(self.pairs)})"


def _is_identifier(text: str) -> bool:
    return bool(text) and text[0].isascii() and text[0].isalpha() and all(
        ch.isascii() and (ch.isalnum() or ch == "_") for ch in text
    )


@dataclass(frozen=True)
class SessionCoalgebra:
    """
    Immutable finite session coalgebra.

    Attributes:
        states: Map from state id to state
        basic_order: Order used to compare bsc states
        duals: Memoized dual pairs (symmetric)
    """
    states: Mapping[StateId, State]
    basic_order: BasicTypePreorder = field(default_factory=BasicTypePreorder.default)
    duals: Mapping[StateId, StateId] = field(default_factory=dict)

    def __contains__(self, state_id: object) -> bool:
        return state_id in self.states

    def __len__(self) -> int:
        return len(self.states)

    @property
    def state_ids(self) -> List[StateId]:
        return sorted(self.states)

    def require(self, state_id: StateId) -> State:
        """Return a state or raise UnknownState."""
        try:
            return self.states[state_id]
        except KeyError:
            raise UnknownState(f"no state named {state_id!r}") from None

    def label(self, state_id: StateId) -> StateLabel:
        return self.require(state_id).label

    def op(self, state_id: StateId) -> OperationTag:
        return self.require(state_id).label.op

    def target(self, state_id: StateId, key: TransitionKey) -> StateId:
        return self.require(state_id).transitions[key]


# Validation and JSON

_STATE_FIELDS = {"op", "pol", "data", "cont", "type"}
_FIELDS_BY_OP = {
    OperationTag.COM: {"op", "pol", "data", "cont"},
    OperationTag.BRANCH: {"op", "pol", "cont"},
    OperationTag.END: {"op"},
    OperationTag.BSC: {"op", "type"},
    OperationTag.PAR: {"op", "cont"},
}


def validate_coalgebra(
    raw: Mapping[str, Any],
    basic_order: Optional[BasicTypePreorder] = None,
) -> SessionCoalgebra:
    """
    Validate a state table in the JSON format and build the coalgebra.

    Args:
        raw: Dictionary with "states" and optional "basic_order"
        basic_order: Configured order; JSON pairs extend it

    Returns:
        The validated SessionCoalgebra
    """
    if not isinstance(raw, Mapping):
        raise CoalgebraFormatError("coalgebra must be a JSON object")
    unknown = set(raw) - {"states", "basic_order"}
    if unknown:
        raise CoalgebraFormatError(f"unknown fields {sorted(unknown)}")
    order = basic_order or BasicTypePreorder.default()
    if "basic_order" in raw:
        pairs = raw["basic_order"]
        if not isinstance(pairs, list) or not all(
            isinstance(p, list) and len(p) == 2 and all(isinstance(n, str) for n in p)
            for p in pairs
        ):
            raise CoalgebraFormatError("basic_order must be a list of [name, name] pairs")
        order = order.extended(tuple(p) for p in pairs)

    table = raw.get("states")
    if not isinstance(table, Mapping):
        raise CoalgebraFormatError("'states' must be an object")

    states: Dict[StateId, State] = {}
    for state_id in sorted(table):
        states[state_id] = _state_from_dict(state_id, table[state_id], order)

    # Every transition target must exist
    for state_id, state in states.items():
        for key, target in state.sorted_transitions():
            if target not in states:
                raise DanglingTarget(f"{state_id} --{key}--> unknown state {target!r}")

    logger.debug("validated coalgebra with %d states", len(states))
    return SessionCoalgebra(states, order)


def _state_from_dict(state_id: str, entry: Any, order: BasicTypePreorder) -> State:
    if not isinstance(entry, Mapping):
        raise CoalgebraFormatError(f"state {state_id!r} must be an object")
    unknown = set(entry) - _STATE_FIELDS
    if unknown:
        raise CoalgebraFormatError(f"state {state_id!r} has unknown fields {sorted(unknown)}")
    try:
        op = OperationTag(entry.get("op"))
    except ValueError:
        raise CoalgebraFormatError(f"state {state_id!r} has invalid op {entry.get('op')!r}") from None

    allowed = _FIELDS_BY_OP[op]
    if set(entry) != allowed:
        raise ArityMismatch(
            f"state {state_id!r} ({op.value}) needs fields {sorted(allowed)}, got {sorted(entry)}"
        )

    polarity = None
    if "pol" in allowed:
        try:
            polarity = Polarity(entry["pol"])
        except ValueError:
            raise CoalgebraFormatError(f"state {state_id!r} has invalid pol {entry['pol']!r}") from None

    if op is OperationTag.COM:
        data, cont = entry["data"], entry["cont"]
        if not isinstance(data, str) or not isinstance(cont, str):
            raise ArityMismatch(f"state {state_id!r}: com needs one data and one cont target")
        return State(StateLabel.com(polarity), {DATA: data, STAR: cont})

    if op is OperationTag.BRANCH:
        cont = entry["cont"]
        if not isinstance(cont, Mapping):
            raise ArityMismatch(f"state {state_id!r}: branch cont must map labels to states")
        if not cont:
            raise EmptyBranch(f"state {state_id!r} offers no labels")
        for label, target in cont.items():
            if not _is_identifier(label) or not isinstance(target, str):
                raise CoalgebraFormatError(f"state {state_id!r}: bad branch entry {label!r}")
        transitions = {TransitionKey.of_label(l): t for l, t in cont.items()}
        return State(StateLabel.branch(polarity, cont), transitions)

    if op is OperationTag.PAR:
        cont = entry["cont"]
        if not isinstance(cont, str):
            raise ArityMismatch(f"state {state_id!r}: par needs one cont target")
        return State(StateLabel.par(), {STAR: cont})

    if op is OperationTag.BSC:
        basic = entry["type"]
        if not isinstance(basic, str) or basic not in order.universe:
            raise UnknownBasicType(f"state {state_id!r} uses unknown basic type {basic!r}")
        return State(StateLabel.bsc(basic))

    return State(StateLabel.end())


def coalgebra_to_dict(c: SessionCoalgebra) -> Dict[str, Any]:
    """Convert a coalgebra to the JSON table format."""
    table: Dict[str, Any] = {}
    for state_id in c.state_ids:
        state = c.states[state_id]
        label = state.label
        entry: Dict[str, Any] = {"op": label.op.value}
        if label.op is OperationTag.COM:
            entry["pol"] = label.polarity.value
            entry["data"] = state.transitions[DATA]
            entry["cont"] = state.transitions[STAR]
        elif label.op is OperationTag.BRANCH:
            entry["pol"] = label.polarity.value
            entry["cont"] = {key.label: target for key, target in state.sorted_transitions()}
        elif label.op is OperationTag.PAR:
            entry["cont"] = state.transitions[STAR]
        elif label.op is OperationTag.BSC:
            entry["type"] = label.basic
        table[state_id] = entry
    return {"basic_order": c.basic_order.to_list(), "states": table}


def coalgebra_from_dict(
    data: Mapping[str, Any], basic_order: Optional[BasicTypePreorder] = None
) -> SessionCoalgebra:
    """Create a coalgebra from its JSON dictionary."""
    return validate_coalgebra(data, basic_order)


def load_coalgebra(path: str, basic_order: Optional[BasicTypePreorder] = None) -> SessionCoalgebra:
    """Load and validate a JSON coalgebra file."""
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise CoalgebraFormatError(f"invalid JSON: {e.msg}", e.lineno, e.colno) from None
    return validate_coalgebra(data, basic_order)


def save_coalgebra(c: SessionCoalgebra, path: str) -> None:
    """Write a coalgebra as JSON."""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(coalgebra_to_dict(c), f, ensure_ascii=False, indent=2)


# Closures

def _closure(c: SessionCoalgebra, x: StateId, follow_data: bool) -> Set[StateId]:
    c.require(x)
    seen = {x}
    queue = deque([x])
    while queue:
        current = queue.popleft()
        for key, target in c.states[current].sorted_transitions():
            if key.is_data and not follow_data:
                continue
            if target not in seen:
                seen.add(target)
                queue.append(target)
    return seen


def generated_subcoalgebra(c: SessionCoalgebra, x: StateId) -> Set[StateId]:
    """States reachable from x through any transition (including x)."""
    return _closure(c, x, follow_data=True)


def continuation_closure(c: SessionCoalgebra, x: StateId) -> Set[StateId]:
    """States reachable from x through continuation transitions only."""
    return _closure(c, x, follow_data=False)


# Duality

def label_dual(label: StateLabel) -> StateLabel:
    """Dual of a label: polarities flip, end and par are self-dual."""
    if label.op is OperationTag.BSC:
        raise BscHasNoDual(f"basic type {label.basic} has no dual")
    if label.op in (OperationTag.COM, OperationTag.BRANCH):
        return StateLabel(label.op, label.polarity.dual, label.labels)
    return label


def dual_closure(c: SessionCoalgebra, x: StateId) -> Tuple[SessionCoalgebra, StateId]:
    """
    Extend c with the dual of x.

    Dual states are created lazily for the continuation closure of x and
    memoized in both directions, so dualizing a dual returns the original.

    Returns:
        (extended coalgebra, id of the dual of x)
    """
    closure = continuation_closure(c, x)
    for state_id in sorted(closure):
        if c.states[state_id].label.op is OperationTag.BSC:
            raise DualUndefined(f"{state_id} is a basic type reachable by continuation from {x}")

    states = dict(c.states)
    duals = dict(c.duals)

    # Assign ids first so cycles can be mirrored
    pending = []
    for state_id in sorted(closure):
        if state_id in duals:
            continue
        if states[state_id].label.op is OperationTag.END:
            duals[state_id] = state_id
            continue
        dual_id = _fresh_id(f"~{state_id}", states, duals)
        duals[state_id] = dual_id
        duals[dual_id] = state_id
        pending.append(state_id)

    for state_id in pending:
        state = states[state_id]
        transitions = {}
        for key, target in state.sorted_transitions():
            transitions[key] = target if key.is_data else duals[target]
        states[duals[state_id]] = State(label_dual(state.label), transitions)

    if pending:
        logger.debug("dual closure of %s added %d states", x, len(pending))
    return SessionCoalgebra(states, c.basic_order, duals), duals[x]


def _fresh_id(candidate: str, states: Mapping[str, Any], reserved: Mapping[str, Any]) -> str:
    while candidate in states or candidate in reserved:
        candidate += "'"
    return candidate
