"""
Command-line interface for the session coalgebra toolkit.

Usage:
    python session_cli.py type parse "rec X.?X.X"
    python session_cli.py type dot "&{add: ?int.end, neg: ?int.end}"
    python session_cli.py rel --kind dual "rec X.?X.X" "rec X.!(rec X.?X.X).X"
    python session_cli.py rel --kind par --coalgebra samples/alt_end.json --state T
    python session_cli.py check --context "x: ?int" samples/inact.proc
    python session_cli.py oracle --context "x: un ?int" samples/two_reads.proc
    python session_cli.py run samples/math_session.proc --max-steps 8 --max-repl 0

Exit codes: 0 accept/true, 1 reject/false, 2 usage, parse or validation error.
"""

from dataclasses import dataclass
from typing import List, Optional
import argparse
import json
import logging
import sys
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from sessions.coalgebra import BasicTypePreorder, coalgebra_to_dict, load_coalgebra
from sessions.dot import to_dot
from sessions.errors import ConfigError, SessionError
from sessions.processes import Process, format_process, parse_process
from sessions.reduction import run
from sessions.relations import (
    decide_bisimilar, decide_dual, decide_parallelizable, decide_similar,
)
from sessions.type_store import TypeStore
from sessions.type_syntax import format_type, parse_type, unfold, validate_type
from sessions.typechecker import algo_check, declarative_check, parse_context, with_ambient_bools

logger = logging.getLogger(__name__)

EXIT_TRUE = 0
EXIT_FALSE = 1
EXIT_ERROR = 2

RELATION_DECIDERS = {
    "bisim": decide_bisimilar,
    "dual": decide_dual,
    "sub": decide_similar,
}


@dataclass
class CliConfig:
    """
    Settings shared by all subcommands.

    Attributes:
        basic_order_path: File with `a <= b` lines replacing the default order
        ambient_bools: Bind true/false to bool in checked contexts
        max_steps: Reduction step limit for run
        repl_budget: Replication unfoldings allowed for run
        output_format: "human" or "json"
        verbose: Log at DEBUG
        seed: Random successor choice for run
    """
    basic_order_path: Optional[str] = None
    ambient_bools: bool = True
    max_steps: int = 100
    repl_budget: int = 0
    output_format: str = "human"
    verbose: bool = False
    seed: Optional[int] = None

    def __post_init__(self):
        if self.max_steps < 0 or self.repl_budget < 0:
            raise ConfigError("step and replication budgets must be non-negative")
        if self.output_format not in ("human", "json"):
            raise ConfigError(f"unknown output format {self.output_format!r}")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "CliConfig":
        return cls(
            basic_order_path=args.basic_order,
            ambient_bools=not args.no_ambient_bools,
            max_steps=getattr(args, "max_steps", 100),
            repl_budget=getattr(args, "max_repl", 0),
            output_format=args.format,
            verbose=args.verbose,
            seed=getattr(args, "random", None),
        )

    def basic_order(self) -> BasicTypePreorder:
        if self.basic_order_path is None:
            return BasicTypePreorder.default()
        return BasicTypePreorder.from_file(self.basic_order_path)

    @property
    def json(self) -> bool:
        return self.output_format == "json"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sct",
        description="Session coalgebra toolkit",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument(
        '--basic-order',
        help='File of basic type order lines (a <= b)'
    )
    parser.add_argument(
        '--format',
        choices=['human', 'json'],
        default='human',
        help='Output format'
    )
    parser.add_argument(
        '--no-ambient-bools',
        action='store_true',
        help='Do not bind true/false in checked contexts'
    )
    parser.add_argument('-v', '--verbose', action='store_true', help='Debug logging')

    subparsers = parser.add_subparsers(dest='command', help='Command to execute')

    # Type command
    type_parser = subparsers.add_parser('type', help='Parse, render or unfold a type')
    type_parser.add_argument('action', choices=['parse', 'dot', 'unfold'])
    type_parser.add_argument('source', help='Type text or a file containing it')

    # Relation command
    rel_parser = subparsers.add_parser('rel', help='Decide a relation between types')
    rel_parser.add_argument(
        '--kind',
        choices=['bisim', 'dual', 'sub', 'par'],
        required=True,
        help='Relation to decide'
    )
    rel_parser.add_argument('types', nargs='*', help='Type texts (one for par, two otherwise)')
    rel_parser.add_argument('--coalgebra', help='JSON coalgebra file')
    rel_parser.add_argument('--state', help='First state in the coalgebra')
    rel_parser.add_argument('--state2', help='Second state in the coalgebra')

    # Check and oracle commands
    for name, help_text in (('check', 'Run the algorithmic type checker'),
                            ('oracle', 'Run the declarative search')):
        check_parser = subparsers.add_parser(name, help=help_text)
        check_parser.add_argument('process', help='Process file')
        check_parser.add_argument('--context', default='', help='Context, e.g. "x: ?int, y: @q0"')
        check_parser.add_argument('--coalgebra', help='JSON coalgebra whose states @NAME refers to')

    # Run command
    run_parser = subparsers.add_parser('run', help='Reduce a process')
    run_parser.add_argument('process', help='Process file')
    run_parser.add_argument('--max-steps', type=int, default=100, help='Reduction step limit')
    run_parser.add_argument('--max-repl', type=int, default=0, help='Replication unfold budget')
    run_parser.add_argument('--random', type=int, metavar='SEED', help='Pick successors at random')

    return parser


def _read_source(source: str) -> str:
    """Return the file contents if source names a file, else source itself."""
    path = Path(source)
    try:
        if path.is_file():
            return path.read_text(encoding="utf-8")
    except OSError:
        pass
    return source


def _emit(config: CliConfig, human: str, payload) -> None:
    if config.json:
        print(json.dumps(payload, ensure_ascii=False, indent=2))
    else:
        print(human)


def _store(config: CliConfig, coalgebra_path: Optional[str]) -> TypeStore:
    order = config.basic_order()
    if coalgebra_path:
        return TypeStore(base=load_coalgebra(coalgebra_path, order))
    return TypeStore(order)


def _compile(store: TypeStore, text: str) -> str:
    t = validate_type(parse_type(_read_source(text), store.basic_order.universe))
    return store.add_type(t)


def _load_process(store: TypeStore, path: str) -> Process:
    text = Path(path).read_text(encoding="utf-8")
    return parse_process(text, store.basic_order.universe)


def cmd_type(config: CliConfig, args: argparse.Namespace) -> int:
    store = _store(config, None)
    t = validate_type(parse_type(_read_source(args.source), store.basic_order.universe))
    root = store.add_type(t)
    if args.action == 'parse':
        payload = {"type": format_type(t), "root": root, "coalgebra": coalgebra_to_dict(store.coalgebra)}
        _emit(config, format_type(t), payload)
    elif args.action == 'unfold':
        text = format_type(unfold(t))
        _emit(config, text, {"type": text})
    else:
        source = to_dot(store.coalgebra, [root])
        _emit(config, source, {"dot": source})
    return EXIT_TRUE


def cmd_rel(config: CliConfig, args: argparse.Namespace) -> int:
    store = _store(config, args.coalgebra)
    states = [s for s in (args.state, args.state2) if s]
    states.extend(_compile(store, t) for t in args.types)
    needed = 1 if args.kind == 'par' else 2
    if len(states) != needed:
        raise ConfigError(f"--kind {args.kind} needs {needed} type(s) or state(s), got {len(states)}")

    c = store.coalgebra
    if args.kind == 'par':
        witness = decide_parallelizable(c, states[0])
    else:
        witness = RELATION_DECIDERS[args.kind](c, states[0], states[1])

    human = "true" if witness.verdict else f"false\n{witness.failing_pair}: {witness.reason}"
    _emit(config, human, witness.to_dict())
    return EXIT_TRUE if witness.verdict else EXIT_FALSE


def _context(config: CliConfig, store: TypeStore, text: str):
    ctx = parse_context(text, store)
    if config.ambient_bools:
        ctx = with_ambient_bools(store, ctx)
    return ctx


def cmd_check(config: CliConfig, args: argparse.Namespace) -> int:
    store = _store(config, args.coalgebra)
    process = _load_process(store, args.process)
    ctx = _context(config, store, args.context)
    report = algo_check(store, ctx, process)
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)

    if report.verdict:
        human = f"accept\noutput: {report.output.to_dict()}"
    else:
        human = f"reject\n{report.failure}"
    _emit(config, human, report.to_dict())
    return EXIT_TRUE if report.verdict else EXIT_FALSE


def cmd_oracle(config: CliConfig, args: argparse.Namespace) -> int:
    store = _store(config, args.coalgebra)
    process = _load_process(store, args.process)
    ctx = _context(config, store, args.context)
    verdict = declarative_check(store, ctx, process)
    text = "accept" if verdict else "reject"
    _emit(config, text, {"verdict": text})
    return EXIT_TRUE if verdict else EXIT_FALSE


def cmd_run(config: CliConfig, args: argparse.Namespace) -> int:
    store = _store(config, None)
    process = _load_process(store, args.process)
    trace = run(process, config.max_steps, config.repl_budget, config.seed)
    lines = []
    for step in trace.steps:
        rule = step.rule or "start"
        lines.append(f"[{step.index}] {rule}: {format_process(step.process)}")
    lines.append(f"stopped: {trace.reason.value}")
    _emit(config, "\n".join(lines), trace.to_dict())
    return EXIT_TRUE


COMMANDS = {
    'type': cmd_type,
    'rel': cmd_rel,
    'check': cmd_check,
    'oracle': cmd_oracle,
    'run': cmd_run,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_ERROR

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    try:
        config = CliConfig.from_args(args)
        return COMMANDS[args.command](config, args)
    except SessionError as e:
        print(f"error: {e}", file=sys.stderr)
        if args.format == 'json':
            print(json.dumps({"verdict": "error", "error": e.to_dict()}, ensure_ascii=False, indent=2))
        return EXIT_ERROR
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
