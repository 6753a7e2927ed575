"""
Generated processes for cross-checking the type checkers.

enumerate_corpus lists every small annotated process over a fixed set of
types, up to a total size. CorpusGenerator draws larger ones at random,
bounded in restrictions, parallel components and prefix depth.
typed_process builds a process that uses a channel according to a given
type, for substitution experiments.
"""

from dataclasses import dataclass, field
from itertools import combinations_with_replacement, product
from typing import Dict, Iterator, List, Optional, Sequence, Tuple
import logging
import random
import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from sessions.processes import (
    Branch, Inact, Input, Output, Par, Process, Repl, Res, Select,
    format_process, make_value,
)
from sessions.relations import RelationOracle
from sessions.type_store import TypeStore
from sessions.type_syntax import (
    Basic, End, ExtChoice, IntChoice, Prefixed, Qualifier, Receive, Send,
    SessionType, parse_type, unfold,
)

logger = logging.getLogger(__name__)

CORPUS_TYPES = ("end", "?int", "!int", "un ?int", "bool")
CHANNEL_CONTEXT_TYPES = ("end", "?int", "!int", "un ?int", "?int.?int", "!int.?int")
VALUE_CONTEXT_TYPES = ("int", "bool")
RESTRICTION_TYPES = ("end", "?int", "!int", "un ?int", "?int.?int", "&{a: ?int, b: end}")
INPUT_TYPES = ("int", "bool", "?int", "end")
LABELS = ("a", "b")

SUBTYPE_POOL = (
    "end",
    "?int", "?real", "!int", "!real",
    "?int.?int", "?real.?int",
    "&{a: ?int, b: end}", "&{a: ?real}", "&{a: ?int}",
    "+{a: !int, b: end}", "+{a: !real}", "+{a: !int}",
    "un ?int", "un ?real",
    "rec X.un !int.X", "rec X.un !real.X",
)


@dataclass
class CorpusCase:
    """A context (variable to type text) and a process to check under it."""
    context: Dict[str, str]
    process: Process

    @property
    def context_text(self) -> str:
        return ", ".join(f"{name}: {text}" for name, text in sorted(self.context.items()))

    def to_dict(self) -> Dict[str, str]:
        return {"context": self.context_text, "process": format_process(self.process)}


# Exhaustive enumeration

def enumerate_corpus(
    types: Sequence[str] = CORPUS_TYPES,
    max_restrictions: int = 2,
    max_components: int = 3,
    max_depth: int = 3,
    max_size: int = 3,
) -> Iterator[CorpusCase]:
    """
    Every process within the bounds, parallel components in one fixed order.

    A process is a chain of restrictions over a parallel composition of
    prefix chains, each chain possibly replicated. Subjects are x and the
    restricted endpoints; inputs are annotated with int or one of types and
    outputs send v. Size counts restrictions, prefixes and replications.

    Args:
        types: Restriction and input annotations; the channel types among
            them are also the types given to x
        max_restrictions: Restrictions per process
        max_components: Parallel components per process
        max_depth: Prefixes per component
        max_size: Total size per process

    Yields:
        CorpusCase binding x to a channel type and v to int
    """
    parsed = {text: parse_type(text) for text in dict.fromkeys(("int",) + tuple(types))}
    inputs = list(parsed)
    contexts = [{"x": text, "v": "int"} for text in types if text not in VALUE_CONTEXT_TYPES]

    count = 0
    for restrictions in range(min(max_restrictions, max_size) + 1):
        pairs = [(f"c{i}", f"d{i}") for i in range(restrictions)]
        channels = ["x"] + [name for pair in pairs for name in pair]
        bodies = list(_bodies(channels, inputs, parsed, max_size - restrictions, max_components, max_depth))
        for annotations in product(types, repeat=restrictions):
            for body in bodies:
                process = body
                for (c, d), text in reversed(list(zip(pairs, annotations))):
                    process = Res(c, d, parsed[text], process)
                for context in contexts:
                    count += 1
                    yield CorpusCase(dict(context), process)
    logger.debug("enumerated %d corpus cases", count)


def _chains(channels: List[str], inputs: List[str], parsed: Dict[str, SessionType], length: int) -> List[Process]:
    if length == 0:
        return [Inact()]
    tails = _chains(channels, inputs, parsed, length - 1)
    chains: List[Process] = []
    for channel in channels:
        for tail in tails:
            for text in inputs:
                chains.append(Input(channel, f"z{length}", parsed[text], tail))
            chains.append(Output(channel, make_value("v"), tail))
    return chains


def _partitions(total: int, parts: int, largest: int) -> Iterator[Tuple[int, ...]]:
    """Non-increasing tuples of at most `parts` positive sizes summing to total."""
    if total == 0:
        yield ()
        return
    if parts == 0:
        return
    for size in range(min(total, largest), 0, -1):
        for rest in _partitions(total - size, parts - 1, size):
            yield (size,) + rest


def _bodies(channels: List[str], inputs: List[str], parsed: Dict[str, SessionType],
            budget: int, max_components: int, max_depth: int) -> Iterator[Process]:
    yield Inact()
    by_size: Dict[int, List[Process]] = {size: [] for size in range(1, budget + 1)}
    for length in range(1, min(max_depth, budget) + 1):
        chains = _chains(channels, inputs, parsed, length)
        by_size[length].extend(chains)
        if length < budget:
            by_size[length + 1].extend(Repl(chain) for chain in chains)

    for total in range(1, budget + 1):
        for sizes in _partitions(total, max_components, total):
            groups = [
                list(combinations_with_replacement(by_size[size], sizes.count(size)))
                for size in sorted(set(sizes))
            ]
            for picked in product(*groups):
                components = [c for group in picked for c in group]
                body = components[-1]
                for component in reversed(components[:-1]):
                    body = Par(component, body)
                yield body


# Random generation

@dataclass
class _Budget:
    restrictions: int
    counter: Dict[str, int] = field(default_factory=dict)

    def fresh(self, base: str) -> str:
        n = self.counter.get(base, 0)
        self.counter[base] = n + 1
        return f"{base}{n}"


class CorpusGenerator:
    """
    Seeded generator of annotated processes.

    Args:
        seed: Random seed
        max_restrictions: Restrictions per process
        max_components: Parallel components per process
        max_depth: Prefix nesting depth
    """

    def __init__(self, seed: int = 0, max_restrictions: int = 2,
                 max_components: int = 3, max_depth: int = 3):
        self.rng = random.Random(seed)
        self.max_restrictions = max_restrictions
        self.max_components = max_components
        self.max_depth = max_depth
        self._types: Dict[str, SessionType] = {}

    def generate(self, count: int) -> List[CorpusCase]:
        cases = [self.case() for _ in range(count)]
        logger.debug("generated %d corpus cases", len(cases))
        return cases

    def case(self) -> CorpusCase:
        rng = self.rng
        context = {"x": rng.choice(CHANNEL_CONTEXT_TYPES), "v": rng.choice(VALUE_CONTEXT_TYPES)}
        if rng.random() < 0.5:
            context["y"] = rng.choice(CHANNEL_CONTEXT_TYPES)
        channels = sorted(n for n, t in context.items() if t not in VALUE_CONTEXT_TYPES)
        budget = _Budget(self.max_restrictions)
        components = rng.randint(1, self.max_components)
        process = self._process(budget, channels, sorted(context), components)
        return CorpusCase(context, process)

    def _type(self, text: str) -> SessionType:
        if text not in self._types:
            self._types[text] = parse_type(text)
        return self._types[text]

    def _process(self, budget: _Budget, channels: List[str], values: List[str], components: int) -> Process:
        roll = self.rng.random()
        if budget.restrictions and roll < 0.35:
            budget.restrictions -= 1
            x, y = budget.fresh("c"), budget.fresh("d")
            annotation = self._type(self.rng.choice(RESTRICTION_TYPES))
            body = self._process(budget, channels + [x, y], values + [x, y], components)
            return Res(x, y, annotation, body)
        if components > 1:
            left = self.rng.randint(1, components - 1)
            return Par(
                self._process(budget, channels, values, left),
                self._process(budget, channels, values, components - left),
            )
        return self._prefix(budget, channels, values, self.max_depth)

    def _prefix(self, budget: _Budget, channels: List[str], values: List[str], depth: int) -> Process:
        rng = self.rng
        if depth == 0 or not channels or rng.random() < 0.15:
            return Inact()
        channel = rng.choice(channels)
        kind = rng.choice(("in", "in", "out", "out", "repl", "select", "branch"))

        if kind == "in":
            var = budget.fresh("z")
            text = rng.choice(INPUT_TYPES)
            inner = channels + [var] if text not in VALUE_CONTEXT_TYPES else channels
            cont = self._prefix(budget, inner, values + [var], depth - 1)
            return Input(channel, var, self._type(text), cont)
        if kind == "out":
            payload = make_value(rng.choice(values))
            return Output(channel, payload, self._prefix(budget, channels, values, depth - 1))
        if kind == "repl":
            return Repl(self._prefix(budget, channels, values, depth - 1))
        if kind == "select":
            label = rng.choice(LABELS)
            return Select(channel, label, self._prefix(budget, channels, values, depth - 1))
        arms = tuple((label, self._prefix(budget, channels, values, depth - 1)) for label in LABELS)
        return Branch(channel, arms)


# Processes following a type

def typed_process(t: SessionType, channel: str, rng: random.Random, depth: int = 4) -> Process:
    """
    Build a process using channel as t prescribes.

    Sends use `v` for int payloads and `r` for real ones, so the process is
    meant to be checked under {channel: t, v: int, r: real}.
    """
    t = unfold(t)
    if isinstance(t, End) or not isinstance(t, Prefixed):
        return Inact()

    if t.qualifier is Qualifier.UN:
        if depth == 0:
            return Inact()
        linear = Prefixed(Qualifier.LIN, t.pretype, t.continuation)
        shape = rng.choice(("single", "par", "repl", "none"))
        if shape == "none":
            return Inact()
        if shape == "par":
            return Par(
                typed_process(linear, channel, rng, depth - 1),
                typed_process(linear, channel, rng, depth - 1),
            )
        if shape == "repl":
            return Repl(typed_process(linear, channel, rng, depth - 1))
        return typed_process(linear, channel, rng, depth - 1)

    pretype = t.pretype
    cont = t.continuation
    if isinstance(pretype, Receive):
        var = f"z{depth}"
        rest = typed_process(cont, channel, rng, depth - 1)
        if not isinstance(pretype.payload, Basic):
            rest = Par(typed_process(pretype.payload, var, rng, depth - 1), rest)
        return Input(channel, var, pretype.payload, rest)
    if isinstance(pretype, Send):
        payload = pretype.payload
        if not isinstance(payload, Basic):
            raise ValueError(f"cannot build a value of type {payload!r}")
        name = {"int": "v", "real": rng.choice(("v", "r"))}.get(payload.name, "true")
        return Output(channel, make_value(name), typed_process(cont, channel, rng, depth - 1))
    if isinstance(pretype, ExtChoice):
        arms = tuple((label, typed_process(body, channel, rng, depth - 1)) for label, body in pretype.arms)
        return Branch(channel, arms)
    if isinstance(pretype, IntChoice):
        label, body = rng.choice(pretype.arms)
        return Select(channel, label, typed_process(body, channel, rng, depth - 1))
    return Inact()


def subsumption_triples(
    store: TypeStore,
    count: int,
    seed: int = 0,
    pool: Sequence[str] = SUBTYPE_POOL,
) -> List[Tuple[str, str, Process]]:
    """
    Generate (T, U, P) with U a subtype of T and P built to follow T on x.

    Returns:
        Triples of state ids and processes; T and U are compiled into store
    """
    rng = random.Random(seed)
    types = {text: parse_type(text) for text in pool}
    states = {text: store.add_type(t) for text, t in types.items()}
    oracle = RelationOracle(store.coalgebra)

    pairs = [
        (sup, sub)
        for sup in pool for sub in pool
        if oracle.similar(states[sub], states[sup]).verdict
    ]
    triples: List[Tuple[str, str, Process]] = []
    while len(triples) < count:
        sup, sub = pairs[len(triples) % len(pairs)]
        process = typed_process(types[sup], "x", rng)
        triples.append((states[sup], states[sub], process))
    return triples
