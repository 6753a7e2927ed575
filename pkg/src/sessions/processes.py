"""
Annotated session pi-calculus: AST, parser, printing and substitution.

Bound names are renamed at parse time so that no two binders share a name
and no binder reuses a free name.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Set, Tuple, Union
import sys
from pathlib import Path

from lark import Transformer, v_args
from lark.exceptions import UnexpectedInput

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from sessions.coalgebra import BasicTypePreorder
from sessions.errors import DuplicateBranchLabel, ProcessSyntaxError
from sessions.grammar import PARSER
from sessions.type_syntax import (
    SessionType, _TypeBuilder, format_type, resolve_names, syntax_details,
)

Position = Optional[Tuple[int, int]]

BOOL_LITERALS = ("true", "false")


@dataclass(frozen=True)
class Variable:
    name: str


@dataclass(frozen=True)
class BoolLit:
    value: bool

    @property
    def name(self) -> str:
        return "true" if self.value else "false"


Value = Union[Variable, BoolLit]


def make_value(name: str) -> Value:
    if name in BOOL_LITERALS:
        return BoolLit(name == "true")
    return Variable(name)


class Process:
    """Base class of process AST nodes."""


@dataclass(frozen=True)
class Inact(Process):
    pass


@dataclass(frozen=True)
class Output(Process):
    channel: str
    payload: Value
    cont: Process
    position: Position = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Input(Process):
    channel: str
    var: str
    annotation: Optional[SessionType]
    cont: Process
    position: Position = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Branch(Process):
    channel: str
    arms: Tuple[Tuple[str, Process], ...]
    position: Position = field(default=None, compare=False, repr=False)

    @property
    def labels(self) -> List[str]:
        return [label for label, _ in self.arms]

    def arm(self, label: str) -> Process:
        return dict(self.arms)[label]


@dataclass(frozen=True)
class Select(Process):
    channel: str
    label: str
    cont: Process
    position: Position = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Par(Process):
    left: Process
    right: Process


@dataclass(frozen=True)
class Repl(Process):
    body: Process


@dataclass(frozen=True)
class Res(Process):
    x: str
    y: str
    annotation: Optional[SessionType]
    body: Process
    position: Position = field(default=None, compare=False, repr=False)


# Parsing

def _pos(token) -> Position:
    return (token.line, token.column)


@v_args(inline=True)
class _ProcessBuilder(_TypeBuilder):
    """Builds processes whose annotations are still named type trees."""

    def inact(self):
        return Inact()

    def output(self, channel, payload, cont):
        return Output(str(channel), make_value(str(payload)), cont, _pos(channel))

    def input(self, channel, var, annotation, cont):
        return Input(str(channel), str(var), annotation, cont, _pos(channel))

    def branch_arm(self, label, body):
        return (label, body)

    def branch(self, channel, *arms):
        return Branch(str(channel), tuple(arms), _pos(channel))

    def select(self, channel, label, cont):
        return Select(str(channel), str(label), cont, _pos(channel))

    def par(self, left, right):
        return Par(left, right)

    def repl(self, body):
        return Repl(body)

    def restrict(self, x, y, annotation, body):
        return Res(str(x), str(y), annotation, body, _pos(x))


def parse_process(text: str, basic_types: Optional[Iterable[str]] = None) -> Process:
    """
    Parse a process.

    Args:
        text: Process in the concrete grammar
        basic_types: Basic types allowed in annotations

    Returns:
        Process AST with resolved annotations and distinct bound names
    """
    if basic_types is None:
        basic_types = BasicTypePreorder.default().universe
    try:
        tree = PARSER.parse(text, start="process")
    except UnexpectedInput as e:
        raise ProcessSyntaxError(*syntax_details(e, text)) from None
    raw = _ProcessBuilder().transform(tree)
    resolved = _resolve(raw, frozenset(basic_types))
    return rename_bound(resolved)


def _resolve(p: Process, basic_types) -> Process:
    """Resolve annotation names and reject duplicate branch labels."""
    if isinstance(p, Output):
        return Output(p.channel, p.payload, _resolve(p.cont, basic_types), p.position)
    if isinstance(p, Input):
        annotation = None if p.annotation is None else resolve_names(p.annotation, basic_types)
        return Input(p.channel, p.var, annotation, _resolve(p.cont, basic_types), p.position)
    if isinstance(p, Branch):
        seen: Set[str] = set()
        arms = []
        for token, body in p.arms:
            label = str(token)
            if label in seen:
                raise DuplicateBranchLabel(
                    f"branch on '{p.channel}' repeats label '{label}'",
                    getattr(token, "line", None), getattr(token, "column", None),
                )
            seen.add(label)
            arms.append((label, _resolve(body, basic_types)))
        return Branch(p.channel, tuple(sorted(arms)), p.position)
    if isinstance(p, Select):
        return Select(p.channel, p.label, _resolve(p.cont, basic_types), p.position)
    if isinstance(p, Par):
        return Par(_resolve(p.left, basic_types), _resolve(p.right, basic_types))
    if isinstance(p, Repl):
        return Repl(_resolve(p.body, basic_types))
    if isinstance(p, Res):
        if p.x == p.y:
            line, column = p.position or (None, None)
            raise ProcessSyntaxError(f"restriction binds '{p.x}' as both endpoints", line, column)
        annotation = None if p.annotation is None else resolve_names(p.annotation, basic_types)
        return Res(p.x, p.y, annotation, _resolve(p.body, basic_types), p.position)
    return p


# Names

def free_names(p: Process) -> Set[str]:
    """Free names of a process (boolean literals excluded)."""
    if isinstance(p, Output):
        names = {p.channel} | free_names(p.cont)
        if isinstance(p.payload, Variable):
            names.add(p.payload.name)
        return names
    if isinstance(p, Input):
        return {p.channel} | (free_names(p.cont) - {p.var})
    if isinstance(p, Branch):
        names = {p.channel}
        for _, body in p.arms:
            names |= free_names(body)
        return names
    if isinstance(p, Select):
        return {p.channel} | free_names(p.cont)
    if isinstance(p, Par):
        return free_names(p.left) | free_names(p.right)
    if isinstance(p, Repl):
        return free_names(p.body)
    if isinstance(p, Res):
        return free_names(p.body) - {p.x, p.y}
    return set()


def all_names(p: Process) -> Set[str]:
    """Every name occurring in a process, free or bound."""
    names = free_names(p)
    if isinstance(p, Input):
        names |= {p.var} | all_names(p.cont)
    elif isinstance(p, Res):
        names |= {p.x, p.y} | all_names(p.body)
    elif isinstance(p, (Output, Select)):
        names |= all_names(p.cont)
    elif isinstance(p, Branch):
        for _, body in p.arms:
            names |= all_names(body)
    elif isinstance(p, Par):
        names |= all_names(p.left) | all_names(p.right)
    elif isinstance(p, Repl):
        names |= all_names(p.body)
    return names


def fresh_name(base: str, taken: Set[str]) -> str:
    """Smallest base_k not in taken."""
    stem = base
    counter = 1
    candidate = f"{stem}_{counter}"
    while candidate in taken:
        counter += 1
        candidate = f"{stem}_{counter}"
    return candidate


def rename_bound(p: Process) -> Process:
    """Give every binder a name used nowhere else in the term."""
    used = set(free_names(p))

    def bind(name: str) -> str:
        new = name if name not in used else fresh_name(name, used)
        used.add(new)
        return new

    def go(p: Process, env: Dict[str, str]) -> Process:
        def n(name: str) -> str:
            return env.get(name, name)

        if isinstance(p, Output):
            payload = Variable(n(p.payload.name)) if isinstance(p.payload, Variable) else p.payload
            return Output(n(p.channel), payload, go(p.cont, env), p.position)
        if isinstance(p, Input):
            var = bind(p.var)
            return Input(n(p.channel), var, p.annotation, go(p.cont, {**env, p.var: var}), p.position)
        if isinstance(p, Branch):
            return Branch(n(p.channel), tuple((l, go(b, env)) for l, b in p.arms), p.position)
        if isinstance(p, Select):
            return Select(n(p.channel), p.label, go(p.cont, env), p.position)
        if isinstance(p, Par):
            return Par(go(p.left, env), go(p.right, env))
        if isinstance(p, Repl):
            return Repl(go(p.body, env))
        if isinstance(p, Res):
            x = bind(p.x)
            y = bind(p.y)
            return Res(x, y, p.annotation, go(p.body, {**env, p.x: x, p.y: y}), p.position)
        return p

    return go(p, {})


def substitute(p: Process, name: str, value: Value) -> Process:
    """
    Capture-avoiding substitution of value for the free name.

    A boolean literal placed in channel position is kept as its name.
    """
    value_name = value.name

    def sub_name(n: str) -> str:
        return value_name if n == name else n

    def sub_value(v: Value) -> Value:
        if isinstance(v, Variable) and v.name == name:
            return value
        return v

    def binder(bound: str, body: Process) -> Tuple[str, Process]:
        # Rename a binder that would capture the substituted value
        if bound == value_name and name in free_names(body):
            new = fresh_name(bound, all_names(body) | {value_name, name})
            return new, rename_free(body, bound, new)
        return bound, body

    if isinstance(p, Output):
        return Output(sub_name(p.channel), sub_value(p.payload), substitute(p.cont, name, value), p.position)
    if isinstance(p, Input):
        channel = sub_name(p.channel)
        if p.var == name:
            return Input(channel, p.var, p.annotation, p.cont, p.position)
        var, cont = binder(p.var, p.cont)
        return Input(channel, var, p.annotation, substitute(cont, name, value), p.position)
    if isinstance(p, Branch):
        arms = tuple((l, substitute(b, name, value)) for l, b in p.arms)
        return Branch(sub_name(p.channel), arms, p.position)
    if isinstance(p, Select):
        return Select(sub_name(p.channel), p.label, substitute(p.cont, name, value), p.position)
    if isinstance(p, Par):
        return Par(substitute(p.left, name, value), substitute(p.right, name, value))
    if isinstance(p, Repl):
        return Repl(substitute(p.body, name, value))
    if isinstance(p, Res):
        if name in (p.x, p.y):
            return p
        x, body = binder(p.x, p.body)
        y, body = binder(p.y, body)
        return Res(x, y, p.annotation, substitute(body, name, value), p.position)
    return p


def rename_free(p: Process, old: str, new: str) -> Process:
    """Rename a free name (new must be fresh for p)."""
    return substitute(p, old, Variable(new))


def erase(p: Process) -> Process:
    """Drop the annotations of inputs and restrictions."""
    if isinstance(p, Output):
        return Output(p.channel, p.payload, erase(p.cont), p.position)
    if isinstance(p, Input):
        return Input(p.channel, p.var, None, erase(p.cont), p.position)
    if isinstance(p, Branch):
        return Branch(p.channel, tuple((l, erase(b)) for l, b in p.arms), p.position)
    if isinstance(p, Select):
        return Select(p.channel, p.label, erase(p.cont), p.position)
    if isinstance(p, Par):
        return Par(erase(p.left), erase(p.right))
    if isinstance(p, Repl):
        return Repl(erase(p.body))
    if isinstance(p, Res):
        return Res(p.x, p.y, None, erase(p.body), p.position)
    return p


# Printing

def format_process(p: Process) -> str:
    """Print a process in the concrete grammar."""
    if isinstance(p, Inact):
        return "0"
    if isinstance(p, Output):
        return f"{p.channel}!({p.payload.name}).{_prefixed(p.cont)}"
    if isinstance(p, Input):
        annotation = "" if p.annotation is None else f":{format_type(p.annotation)}"
        return f"{p.channel}?({p.var}{annotation}).{_prefixed(p.cont)}"
    if isinstance(p, Branch):
        arms = ", ".join(f"{label}: {format_process(body)}" for label, body in p.arms)
        return f"{p.channel}>>{{{arms}}}"
    if isinstance(p, Select):
        return f"{p.channel}<<{p.label}.{_prefixed(p.cont)}"
    if isinstance(p, Par):
        return f"{format_process(p.left)} | {_prefixed(p.right)}"
    if isinstance(p, Repl):
        return f"*{_prefixed(p.body)}"
    if isinstance(p, Res):
        annotation = "" if p.annotation is None else f":{format_type(p.annotation)}"
        return f"new({p.x},{p.y}{annotation}) {_prefixed(p.body)}"
    raise TypeError(f"not a process: {p!r}")


def _prefixed(p: Process) -> str:
    text = format_process(p)
    return f"({text})" if isinstance(p, Par) else text
