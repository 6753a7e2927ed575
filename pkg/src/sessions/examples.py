"""
Worked examples for the session coalgebra toolkit.

Demonstrates how to:
1. Load the math server protocol and derive its client view
2. Decide duality of recursive delegating types
3. Compare a partial client with the full client (subtyping)
4. Type check processes on an unrestricted single-read channel
5. Reduce a client/server session
"""

from typing import Any, Dict
import sys
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from sessions.coalgebra import SessionCoalgebra, coalgebra_from_dict, dual_closure
from sessions.processes import format_process, parse_process
from sessions.reduction import run
from sessions.relations import (
    decide_bisimilar, decide_dual, decide_parallelizable, decide_similar,
)
from sessions.type_store import TypeStore
from sessions.type_syntax import parse_type
from sessions.typechecker import TypingContext, algo_check

MATH_SERVER_TYPE = "rec X.&{mul: ?int.?int.!int.X, neg: ?bool.!bool.X, quit: end}"
DELEGATING_TYPE = "rec X.?X.X"
DELEGATING_DUAL = "rec X.!(rec X.?X.X).X"
NAIVE_DUAL = "rec X.!X.X"

MATH_SERVER: Dict[str, Any] = {
    "states": {
        "q0": {"op": "branch", "pol": "in", "cont": {"mul": "q1", "neg": "q4", "quit": "q6"}},
        "q1": {"op": "com", "pol": "in", "data": "q_int", "cont": "q2"},
        "q2": {"op": "com", "pol": "in", "data": "q_int", "cont": "q3"},
        "q3": {"op": "com", "pol": "out", "data": "q_int", "cont": "q0"},
        "q4": {"op": "com", "pol": "in", "data": "q_bool", "cont": "q5"},
        "q5": {"op": "com", "pol": "out", "data": "q_bool", "cont": "q0"},
        "q6": {"op": "end"},
        "q_int": {"op": "bsc", "type": "int"},
        "q_bool": {"op": "bsc", "type": "bool"},
    }
}

MATH_CLIENT: Dict[str, Any] = {
    "states": {
        "s0": {"op": "branch", "pol": "out", "cont": {"mul": "s1", "neg": "s4", "quit": "s6"}},
        "s1": {"op": "com", "pol": "out", "data": "s_int", "cont": "s2"},
        "s2": {"op": "com", "pol": "out", "data": "s_int", "cont": "s3"},
        "s3": {"op": "com", "pol": "in", "data": "s_int", "cont": "s0"},
        "s4": {"op": "com", "pol": "out", "data": "s_bool", "cont": "s5"},
        "s5": {"op": "com", "pol": "in", "data": "s_bool", "cont": "s0"},
        "s6": {"op": "end"},
        "s_int": {"op": "bsc", "type": "int"},
        "s_bool": {"op": "bsc", "type": "bool"},
    }
}

# A client multiplying once, accepting a real result, then quitting
PARTIAL_CLIENT: Dict[str, Any] = {
    "states": {
        "r0": {"op": "branch", "pol": "out", "cont": {"mul": "r1"}},
        "r1": {"op": "com", "pol": "out", "data": "r_int", "cont": "r2"},
        "r2": {"op": "com", "pol": "out", "data": "r_int", "cont": "r3"},
        "r3": {"op": "com", "pol": "in", "data": "r_real", "cont": "r4"},
        "r4": {"op": "branch", "pol": "out", "cont": {"quit": "r5"}},
        "r5": {"op": "end"},
        "r_int": {"op": "bsc", "type": "int"},
        "r_real": {"op": "bsc", "type": "real"},
    }
}

# rec X.?X.X and its dual
RECURSIVE_PAIR: Dict[str, Any] = {
    "states": {
        "T": {"op": "com", "pol": "in", "data": "T", "cont": "T"},
        "U": {"op": "com", "pol": "out", "data": "T", "cont": "U"},
    }
}

# Unrestricted channel allowing one read per copy; q2 only loops through par
ALT_END: Dict[str, Any] = {
    "states": {
        "T": {"op": "par", "cont": "q1"},
        "q1": {"op": "com", "pol": "in", "data": "q", "cont": "q2"},
        "q2": {"op": "par", "cont": "q2"},
        "q": {"op": "bsc", "type": "int"},
    }
}

SERVER_PROTOCOL = "&{mul: ?int.?int.!int.end, neg: ?bool.!bool.end}"

MATH_SESSION = (
    f"new(a, b: {SERVER_PROTOCOL}) ("
    "a >> {mul: a?(m: int).a?(n: int).a!(m).0, neg: a?(p: bool).a!(p).0}"
    " | b << mul.b!(u).b!(w).b?(r: int).0)"
)

MATH_SESSION_RULES = ["r-sync", "r-com", "r-com", "r-com"]


def combined(*tables: Dict[str, Any]) -> SessionCoalgebra:
    """Validate the union of several state tables as one coalgebra."""
    states: Dict[str, Any] = {}
    for table in tables:
        states.update(table["states"])
    return coalgebra_from_dict({"states": states})


def example_1_math_duality():
    """Example 1: The client view is the dual of the server."""
    print("=" * 60)
    print("Example 1: Math Server and Client")
    print("=" * 60 + "\n")

    c = combined(MATH_SERVER, MATH_CLIENT)
    print(f"q0 dual to s0: {decide_dual(c, 'q0', 's0').verdict}")

    extended, dual = dual_closure(c, "q0")
    print(f"computed dual of q0: {dual}")
    print(f"bisimilar to s0: {decide_bisimilar(extended, dual, 's0').verdict}")


def example_2_delegation():
    """Example 2: Duality of a recursive delegating type."""
    print("\n" + "=" * 60)
    print("Example 2: Recursive Delegation")
    print("=" * 60 + "\n")

    store = TypeStore()
    t = store.add_type(parse_type(DELEGATING_TYPE))
    u = store.add_type(parse_type(DELEGATING_DUAL))
    naive = store.add_type(parse_type(NAIVE_DUAL))
    c = store.coalgebra
    print(f"{DELEGATING_TYPE} dual to {DELEGATING_DUAL}: {decide_dual(c, t, u).verdict}")
    witness = decide_dual(c, t, naive)
    print(f"{DELEGATING_TYPE} dual to {NAIVE_DUAL}: {witness.verdict} ({witness.reason})")


def example_3_subtyping():
    """Example 3: A partial client is a supertype of the full client."""
    print("\n" + "=" * 60)
    print("Example 3: Subtyping")
    print("=" * 60 + "\n")

    c = combined(MATH_CLIENT, PARTIAL_CLIENT)
    print(f"s0 subtype of r0: {decide_similar(c, 's0', 'r0').verdict}")
    witness = decide_similar(c, "r0", "s0")
    print(f"r0 subtype of s0: {witness.verdict} ({witness.reason})")


def example_4_alternative_end():
    """Example 4: Single-read copies of an unrestricted channel."""
    print("\n" + "=" * 60)
    print("Example 4: Unrestricted Single Reads")
    print("=" * 60 + "\n")

    c = coalgebra_from_dict(ALT_END)
    print(f"T parallelizable: {decide_parallelizable(c, 'T').verdict}")
    ctx = TypingContext({"x": "T"})
    for text in (
        "x?(y1: int).x?(y2: int).x?(y3: int).0",
        "x?(y1: int).0 | x?(y2: int).0 | x?(y3: int).0",
        "*x?(y: int).0",
    ):
        report = algo_check(c, ctx, parse_process(text))
        verdict = "accept" if report.verdict else f"reject ({report.failure.code})"
        print(f"x: T |- {text}: {verdict}")


def example_5_reduction():
    """Example 5: Run a client against the server."""
    print("\n" + "=" * 60)
    print("Example 5: Reduction")
    print("=" * 60 + "\n")

    trace = run(parse_process(MATH_SESSION), max_steps=8, repl_budget=0)
    for step in trace.steps:
        print(f"[{step.index}] {step.rule or 'start'}: {format_process(step.process)}")
    print(f"stopped: {trace.reason.value}")


def main():
    """Run all examples."""
    example_1_math_duality()
    example_2_delegation()
    example_3_subtyping()
    example_4_alternative_end()
    example_5_reduction()


if __name__ == "__main__":
    main()
