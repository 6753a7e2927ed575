"""
Session Coalgebra Toolkit

Session types as states of a coalgebra: relation deciders (bisimilarity,
duality, subtyping, parallelizability), a concrete type syntax compiled into
coalgebras, a session π-calculus with reduction, and a type checker for
processes.
"""

from sessions.coalgebra import SessionCoalgebra, StateLabel, OperationTag, Polarity
from sessions.errors import SessionError
from sessions.relations import (
    decide_bisimilar, decide_dual, decide_parallelizable, decide_similar,
)
from sessions.type_store import TypeStore
from sessions.typechecker import algo_check, declarative_check, parse_context

__all__ = [
    "SessionCoalgebra",
    "StateLabel",
    "OperationTag",
    "Polarity",
    "SessionError",
    "TypeStore",
    "decide_bisimilar",
    "decide_dual",
    "decide_parallelizable",
    "decide_similar",
    "algo_check",
    "declarative_check",
    "parse_context",
]
