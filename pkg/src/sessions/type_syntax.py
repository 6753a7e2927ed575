"""
Session type syntax: AST, parser, validation, unfolding and printing.

Type variables are de Bruijn indices. Binder names are kept on Mu nodes for
printing only and take no part in equality or hashing, so equal ASTs are
alpha-equivalent types.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, Optional, Set, Tuple, Union
import sys
from pathlib import Path

from lark import Token, Transformer, v_args
from lark.exceptions import UnexpectedInput

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from sessions.coalgebra import BasicTypePreorder
from sessions.errors import (
    BscHasNoDual, FreeVariable, NotContractive, TypeSyntaxError, UnknownBasicType,
)
from sessions.grammar import PARSER


class Qualifier(Enum):
    LIN = "lin"
    UN = "un"


class SessionType:
    """Base class of type AST nodes."""


@dataclass(frozen=True)
class Basic(SessionType):
    name: str


@dataclass(frozen=True)
class End(SessionType):
    pass


@dataclass(frozen=True)
class Var(SessionType):
    index: int
    name: str = field(default="X", compare=False)


@dataclass(frozen=True)
class Mu(SessionType):
    body: SessionType
    binder: str = field(default="X", compare=False)


@dataclass(frozen=True)
class Receive:
    payload: SessionType


@dataclass(frozen=True)
class Send:
    payload: SessionType


@dataclass(frozen=True)
class ExtChoice:
    arms: Tuple[Tuple[str, SessionType], ...]


@dataclass(frozen=True)
class IntChoice:
    arms: Tuple[Tuple[str, SessionType], ...]


Pretype = Union[Receive, Send, ExtChoice, IntChoice]


@dataclass(frozen=True)
class Prefixed(SessionType):
    """
    A qualified pretype.

    Attributes:
        qualifier: lin or un
        pretype: Receive, Send or a choice
        continuation: Continuation for messages, None for choices
    """
    qualifier: Qualifier
    pretype: Pretype
    continuation: Optional[SessionType] = None


# Parsing

@dataclass(frozen=True)
class _Name:
    token: Token


@dataclass(frozen=True)
class _Rec:
    token: Token
    body: object


@v_args(inline=True)
class _TypeBuilder(Transformer):
    """Builds named (unresolved) type trees."""

    def qualifier(self, token):
        return Qualifier(str(token))

    def end(self):
        return End()

    def name(self, token):
        return _Name(token)

    def rec(self, token, body):
        return _Rec(token, body)

    def receive(self, qualifier, payload, continuation):
        return Prefixed(qualifier or Qualifier.LIN, Receive(payload), continuation or End())

    def send(self, qualifier, payload, continuation):
        return Prefixed(qualifier or Qualifier.LIN, Send(payload), continuation or End())

    def arm(self, token, body):
        return (token, body)

    def ext_choice(self, qualifier, *arms):
        return Prefixed(qualifier or Qualifier.LIN, ExtChoice(tuple(arms)))

    def int_choice(self, qualifier, *arms):
        return Prefixed(qualifier or Qualifier.LIN, IntChoice(tuple(arms)))


def resolve_names(tree, basic_types: Iterable[str], scope: Tuple[str, ...] = ()) -> SessionType:
    """
    Turn a named tree into a de Bruijn AST.

    A name bound by an enclosing rec is a variable; otherwise it must be a
    basic type.
    """
    basic_types = frozenset(basic_types)

    def go(node, scope: Tuple[str, ...]):
        if isinstance(node, _Name):
            name = str(node.token)
            if name in scope:
                return Var(scope.index(name), name)
            if name in basic_types:
                return Basic(name)
            raise UnknownBasicType(
                f"'{name}' is neither a bound variable nor a basic type",
                node.token.line, node.token.column,
            )
        if isinstance(node, _Rec):
            name = str(node.token)
            return Mu(go(node.body, (name,) + scope), name)
        if isinstance(node, Prefixed):
            pretype = node.pretype
            if isinstance(pretype, (Receive, Send)):
                new_pretype = type(pretype)(go(pretype.payload, scope))
                return Prefixed(node.qualifier, new_pretype, go(node.continuation, scope))
            seen: Set[str] = set()
            arms = []
            for token, body in pretype.arms:
                label = str(token)
                if label in seen:
                    raise TypeSyntaxError(
                        f"duplicate choice label '{label}'",
                        getattr(token, "line", None), getattr(token, "column", None),
                    )
                seen.add(label)
                arms.append((label, go(body, scope)))
            return Prefixed(node.qualifier, type(pretype)(tuple(sorted(arms))))
        return node

    return go(tree, scope)


def parse_type(text: str, basic_types: Optional[Iterable[str]] = None) -> SessionType:
    """
    Parse a session type.

    Args:
        text: Type in the concrete grammar
        basic_types: Basic type universe (defaults to int, real, bool)

    Returns:
        De Bruijn AST (not yet validated)
    """
    if basic_types is None:
        basic_types = BasicTypePreorder.default().universe
    try:
        tree = PARSER.parse(text, start="type")
    except UnexpectedInput as e:
        raise TypeSyntaxError(*syntax_details(e, text)) from None
    return resolve_names(_TypeBuilder().transform(tree), basic_types)


def _position(value) -> Optional[int]:
    return value if isinstance(value, int) and value >= 0 else None


def syntax_details(error: UnexpectedInput, text: str) -> Tuple[str, Optional[int], Optional[int]]:
    """Message, line and column for a lark parse failure."""
    context = ""
    pos = getattr(error, "pos_in_stream", None)
    if isinstance(pos, int) and pos >= 0:
        context = error.get_context(text).strip()
    kind = type(error).__name__
    message = f"{kind}: {context}" if context else f"{kind}: unexpected end of input"
    return message, _position(getattr(error, "line", None)), _position(getattr(error, "column", None))


# Validation

def validate_type(t: SessionType) -> SessionType:
    """Check that t is closed and contractive; return it unchanged."""
    _check_closed(t, 0)
    _check_contractive(t)
    return t


def _children(t: SessionType) -> List[SessionType]:
    if isinstance(t, Mu):
        return [t.body]
    if isinstance(t, Prefixed):
        pretype = t.pretype
        if isinstance(pretype, (Receive, Send)):
            return [pretype.payload, t.continuation]
        return [body for _, body in pretype.arms]
    return []


def _check_closed(t: SessionType, depth: int) -> None:
    if isinstance(t, Var):
        if t.index >= depth or t.index < 0:
            raise FreeVariable(f"type variable '{t.name}' (index {t.index}) is not bound")
        return
    inner = depth + 1 if isinstance(t, Mu) else depth
    for child in _children(t):
        _check_closed(child, inner)


def _check_contractive(t: SessionType) -> None:
    if isinstance(t, Mu):
        chain = 0
        node: SessionType = t
        while isinstance(node, Mu):
            chain += 1
            node = node.body
        if isinstance(node, Var) and node.index < chain:
            raise NotContractive(f"rec {t.binder} unfolds to its own variable")
        _check_contractive(node)
        return
    for child in _children(t):
        _check_contractive(child)


# Substitution and unfolding

def _map_vars(t: SessionType, fn, depth: int = 0) -> SessionType:
    if isinstance(t, Var):
        return fn(t, depth)
    if isinstance(t, Mu):
        return Mu(_map_vars(t.body, fn, depth + 1), t.binder)
    if isinstance(t, Prefixed):
        pretype = t.pretype
        if isinstance(pretype, (Receive, Send)):
            return Prefixed(
                t.qualifier,
                type(pretype)(_map_vars(pretype.payload, fn, depth)),
                _map_vars(t.continuation, fn, depth),
            )
        arms = tuple((label, _map_vars(body, fn, depth)) for label, body in pretype.arms)
        return Prefixed(t.qualifier, type(pretype)(arms))
    return t


def shift(t: SessionType, amount: int, cutoff: int = 0) -> SessionType:
    """Add amount to every variable index at or above the cutoff."""
    def fn(var: Var, depth: int) -> SessionType:
        if var.index >= cutoff + depth:
            return Var(var.index + amount, var.name)
        return var
    return _map_vars(t, fn)


def substitute(body: SessionType, replacement: SessionType) -> SessionType:
    """Replace variable 0 of body by replacement, lowering the other free variables."""
    def fn(var: Var, depth: int) -> SessionType:
        if var.index == depth:
            return shift(replacement, depth)
        if var.index > depth:
            return Var(var.index - 1, var.name)
        return var
    return _map_vars(body, fn)


def unfold(t: SessionType) -> SessionType:
    """Unfold recursion at the head until the type is not a Mu."""
    while isinstance(t, Mu):
        t = substitute(t.body, t)
    return t


def _close(t: SessionType, env: Tuple[SessionType, ...]) -> SessionType:
    """Replace the variables bound outside t by the closed types in env (innermost first)."""
    def fn(var: Var, depth: int) -> SessionType:
        if var.index >= depth:
            return env[var.index - depth]
        return var
    return _map_vars(t, fn)


def dual_type(t: SessionType) -> SessionType:
    """
    Syntactic dual of a closed type.

    Directions and choices flip along the continuation; payloads are kept
    as they are, closed over the recursion they sit under, so that
    rec X.?X.X dualizes to rec X.!(rec X.?X.X).X.

    Raises:
        BscHasNoDual: a basic type is reached by continuation
    """
    return _dual(t, ())


def _dual(t: SessionType, env: Tuple[SessionType, ...]) -> SessionType:
    if isinstance(t, Basic):
        raise BscHasNoDual(f"basic type {t.name} has no dual")
    if isinstance(t, (End, Var)):
        return t
    if isinstance(t, Mu):
        closed = _close(t, env)
        return Mu(_dual(t.body, (closed,) + env), t.binder)
    pretype = t.pretype
    if isinstance(pretype, (Receive, Send)):
        flipped = Send if isinstance(pretype, Receive) else Receive
        return Prefixed(
            t.qualifier,
            flipped(_close(pretype.payload, env)),
            _dual(t.continuation, env),
        )
    flipped = IntChoice if isinstance(pretype, ExtChoice) else ExtChoice
    return Prefixed(t.qualifier, flipped(tuple((label, _dual(body, env)) for label, body in pretype.arms)))


# Printing

def format_type(t: SessionType) -> str:
    """Print a type in the concrete grammar (parse(format(t)) == t)."""
    reserved = _basic_names(t) | {"end", "rec", "un", "lin", "new"}
    return _format(t, (), reserved)


def _basic_names(t: SessionType) -> Set[str]:
    if isinstance(t, Basic):
        return {t.name}
    names: Set[str] = set()
    for child in _children(t):
        names |= _basic_names(child)
    return names


def _format(t: SessionType, scope: Tuple[str, ...], reserved: Set[str]) -> str:
    if isinstance(t, Basic):
        return t.name
    if isinstance(t, End):
        return "end"
    if isinstance(t, Var):
        return scope[t.index] if 0 <= t.index < len(scope) else f"?{t.index}"
    if isinstance(t, Mu):
        name = t.binder
        counter = 0
        while name in scope or name in reserved:
            counter += 1
            name = f"{t.binder}{counter}"
        return f"rec {name}.{_format(t.body, (name,) + scope, reserved)}"
    if isinstance(t, Prefixed):
        prefix = "un " if t.qualifier is Qualifier.UN else ""
        pretype = t.pretype
        if isinstance(pretype, (Receive, Send)):
            mark = "?" if isinstance(pretype, Receive) else "!"
            text = f"{prefix}{mark}{_format_payload(pretype.payload, scope, reserved)}"
            if not isinstance(t.continuation, End):
                text += "." + _format(t.continuation, scope, reserved)
            return text
        mark = "&" if isinstance(pretype, ExtChoice) else "+"
        arms = ", ".join(f"{label}: {_format(body, scope, reserved)}" for label, body in pretype.arms)
        return f"{prefix}{mark}{{{arms}}}"
    raise TypeError(f"not a session type: {t!r}")


def _format_payload(t: SessionType, scope: Tuple[str, ...], reserved: Set[str]) -> str:
    text = _format(t, scope, reserved)
    if isinstance(t, Mu) or (
        isinstance(t, Prefixed) and isinstance(t.pretype, (Receive, Send))
    ):
        return f"({text})"
    return text
