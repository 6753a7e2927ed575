"""
Hash-consed store compiling session types into coalgebra states.

The store owns a growing set of states. Types are head-unfolded and keyed by
their de Bruijn form, so alpha-equivalent types share one state. Snapshots
of the store are immutable SessionCoalgebra values.
"""

from collections import deque
from dataclasses import dataclass
from typing import Dict, Optional, Tuple
import logging
import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from sessions.coalgebra import (
    DATA, STAR, BasicTypePreorder, Polarity, SessionCoalgebra, State, StateId,
    StateLabel, TransitionKey, dual_closure,
)
from sessions.errors import UnknownBasicType
from sessions.type_syntax import (
    Basic, End, ExtChoice, IntChoice, Prefixed, Qualifier, Receive, Send,
    SessionType, unfold, validate_type,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class _InertEnd(SessionType):
    """End of an unrestricted message: a Par state looping on itself."""


INERT_END = _InertEnd()


class TypeStore:
    """
    Mutable store of compiled types.

    Provides compilation of types, dual lookup and immutable snapshots.
    """

    def __init__(
        self,
        basic_order: Optional[BasicTypePreorder] = None,
        base: Optional[SessionCoalgebra] = None,
    ):
        """
        Initialize the store.

        Args:
            basic_order: Order on basic types (defaults to int <= real)
            base: Existing coalgebra whose states are kept under their ids
        """
        if base is not None:
            self.basic_order = base.basic_order
            self._states: Dict[StateId, State] = dict(base.states)
            self._duals: Dict[StateId, StateId] = dict(base.duals)
        else:
            self.basic_order = basic_order or BasicTypePreorder.default()
            self._states = {}
            self._duals = {}
        self._by_type: Dict[SessionType, StateId] = {}
        self._counter = 0
        self._snapshot: Optional[SessionCoalgebra] = None

    @property
    def coalgebra(self) -> SessionCoalgebra:
        """Immutable view of the current states."""
        if self._snapshot is None:
            self._snapshot = SessionCoalgebra(dict(self._states), self.basic_order, dict(self._duals))
        return self._snapshot

    def add_coalgebra(self, c: SessionCoalgebra) -> None:
        """Merge the states of another coalgebra (ids must not clash)."""
        for state_id, state in c.states.items():
            existing = self._states.get(state_id)
            if existing is not None and existing != state:
                raise ValueError(f"state id {state_id!r} already used by a different state")
            self._states[state_id] = state
        self._duals.update(c.duals)
        self._snapshot = None

    def add_type(self, t: SessionType) -> StateId:
        """
        Compile a type and return its state.

        Args:
            t: Type AST (validated here)

        Returns:
            Id of the state for t
        """
        validate_type(t)
        queue: deque = deque()
        known = dict(self._by_type)
        root = self._intern(t, queue)
        built: Dict[StateId, State] = {}
        try:
            while queue:
                expr, state_id = queue.popleft()
                built[state_id] = self._build(expr, state_id, queue)
        except Exception:
            self._by_type = known
            raise
        self._states.update(built)
        added = len(built)
        if added:
            self._snapshot = None
            logger.debug("compiled type into %d new states (root %s)", added, root)
        return root

    def dual_of(self, state_id: StateId) -> StateId:
        """Return the dual state, extending the store if needed."""
        if state_id in self._duals:
            return self._duals[state_id]
        extended, dual_id = dual_closure(self.coalgebra, state_id)
        self._states = dict(extended.states)
        self._duals = dict(extended.duals)
        self._snapshot = extended
        return dual_id

    def _fresh(self) -> StateId:
        while True:
            candidate = f"t{self._counter}"
            self._counter += 1
            if candidate not in self._states and candidate not in self._duals:
                return candidate

    def _intern(self, expr: SessionType, queue: deque) -> StateId:
        expr = unfold(expr)
        state_id = self._by_type.get(expr)
        if state_id is None:
            state_id = self._fresh()
            self._by_type[expr] = state_id
            queue.append((expr, state_id))
        return state_id

    def _build(self, expr: SessionType, state_id: StateId, queue: deque) -> State:
        if isinstance(expr, _InertEnd):
            return State(StateLabel.par(), {STAR: state_id})
        if isinstance(expr, End):
            return State(StateLabel.end())
        if isinstance(expr, Basic):
            if expr.name not in self.basic_order.universe:
                raise UnknownBasicType(f"basic type '{expr.name}' is not configured")
            return State(StateLabel.bsc(expr.name))
        if not isinstance(expr, Prefixed):
            raise TypeError(f"cannot compile {expr!r}")

        pretype = expr.pretype
        if expr.qualifier is Qualifier.UN:
            continuation = expr.continuation
            if isinstance(pretype, (Receive, Send)) and isinstance(continuation, End):
                continuation = INERT_END
            linear = Prefixed(Qualifier.LIN, pretype, continuation)
            return State(StateLabel.par(), {STAR: self._intern(linear, queue)})

        if isinstance(pretype, (Receive, Send)):
            polarity = Polarity.IN if isinstance(pretype, Receive) else Polarity.OUT
            return State(StateLabel.com(polarity), {
                DATA: self._intern(pretype.payload, queue),
                STAR: self._intern(expr.continuation, queue),
            })

        polarity = Polarity.IN if isinstance(pretype, ExtChoice) else Polarity.OUT
        transitions = {
            TransitionKey.of_label(label): self._intern(body, queue)
            for label, body in pretype.arms
        }
        return State(StateLabel.branch(polarity, (l for l, _ in pretype.arms)), transitions)


def type_to_coalgebra(
    t: SessionType, basic_order: Optional[BasicTypePreorder] = None
) -> Tuple[SessionCoalgebra, StateId]:
    """Compile a single type into a fresh coalgebra and return its root."""
    store = TypeStore(basic_order)
    root = store.add_type(t)
    return store.coalgebra, root
