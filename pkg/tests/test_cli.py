"""
Tests for the sct command line.
"""

import json
import pytest
import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from sessions.errors import ConfigError
from sessions.examples import DELEGATING_DUAL, DELEGATING_TYPE, NAIVE_DUAL
from sessions.session_cli import (
    EXIT_ERROR, EXIT_FALSE, EXIT_TRUE, CliConfig, build_parser, main,
)

SAMPLES = Path(__file__).parent.parent / "samples"


def sample(name):
    return str(SAMPLES / name)


class TestConfig:
    """Test option handling."""

    def test_defaults(self):
        args = build_parser().parse_args(["run", "p.proc"])
        config = CliConfig.from_args(args)
        assert config.max_steps == 100
        assert config.repl_budget == 0
        assert config.ambient_bools
        assert not config.json

    def test_negative_budget(self):
        with pytest.raises(ConfigError):
            CliConfig(max_steps=-1)

    def test_no_command(self, capsys):
        assert main([]) == EXIT_ERROR
        assert "usage" in capsys.readouterr().out


class TestTypeCommand:
    """Test sct type."""

    def test_parse(self, capsys):
        assert main(["type", "parse", "rec X.?X.X"]) == EXIT_TRUE
        assert capsys.readouterr().out.strip() == "rec X.?X.X"

    def test_parse_json(self, capsys):
        assert main(["--format", "json", "type", "parse", "?int"]) == EXIT_TRUE
        data = json.loads(capsys.readouterr().out)
        assert data["root"] in data["coalgebra"]["states"]

    def test_unfold(self, capsys):
        assert main(["type", "unfold", "rec X.!int.X"]) == EXIT_TRUE
        assert capsys.readouterr().out.strip() == "!int.rec X.!int.X"

    def test_dot(self, capsys):
        assert main(["type", "dot", "&{a: end}"]) == EXIT_TRUE
        assert capsys.readouterr().out.lstrip().startswith("digraph")

    def test_not_contractive(self, capsys):
        assert main(["type", "parse", "rec X.X"]) == EXIT_ERROR
        assert "error" in capsys.readouterr().err

    def test_json_error(self, capsys):
        assert main(["--format", "json", "type", "parse", "?int.}"]) == EXIT_ERROR
        data = json.loads(capsys.readouterr().out)
        assert data["verdict"] == "error"
        assert data["error"]["code"] == "SyntaxError"


class TestRelCommand:
    """Test sct rel."""

    def test_bisimilar_ends(self, capsys):
        assert main(["rel", "--kind", "bisim", "end", "end"]) == EXIT_TRUE
        assert capsys.readouterr().out.strip() == "true"

    def test_delegating_dual(self):
        assert main(["rel", "--kind", "dual", DELEGATING_TYPE, DELEGATING_DUAL]) == EXIT_TRUE

    def test_naive_dual(self, capsys):
        assert main(["rel", "--kind", "dual", DELEGATING_TYPE, NAIVE_DUAL]) == EXIT_FALSE
        assert capsys.readouterr().out.startswith("false")

    def test_subtype(self):
        assert main(["rel", "--kind", "sub", "?int", "?real"]) == EXIT_TRUE
        assert main(["rel", "--kind", "sub", "?real", "?int"]) == EXIT_FALSE

    def test_parallelizable_state(self):
        assert main(["rel", "--kind", "par", "--coalgebra", sample("alt_end.json"), "--state", "T"]) == EXIT_TRUE

    def test_coalgebra_states(self, capsys):
        args = ["--format", "json", "rel", "--kind", "dual",
                "--coalgebra", sample("math_server.json"), "--state", "q0", "--state2", "s0"]
        assert main(args) == EXIT_TRUE
        assert json.loads(capsys.readouterr().out)["verdict"] is True

    def test_wrong_arity(self):
        assert main(["rel", "--kind", "par", "?int", "!int"]) == EXIT_ERROR

    def test_basic_order_file(self, tmp_path):
        order = tmp_path / "order.txt"
        order.write_text("int\nreal\n", encoding="utf-8")
        assert main(["--basic-order", str(order), "rel", "--kind", "sub", "?int", "?real"]) == EXIT_FALSE


class TestCheckCommands:
    """Test sct check and sct oracle."""

    def test_unused_channel(self, capsys):
        assert main(["check", "--context", "x: ?int", sample("inact.proc")]) == EXIT_FALSE
        assert capsys.readouterr().out.startswith("reject")

    def test_math_session(self, capsys):
        assert main(["check", "--context", "u: int, w: int", sample("math_session.proc")]) == EXIT_TRUE
        assert capsys.readouterr().out.startswith("accept")

    def test_json_report(self, capsys):
        args = ["--format", "json", "check", "--context", "x: un ?int", sample("two_reads.proc")]
        assert main(args) == EXIT_TRUE
        data = json.loads(capsys.readouterr().out)
        assert data["verdict"] == "accept"
        assert data["trace"][-1]["rule"] == "A-Par"

    @pytest.mark.parametrize("name,expected", [
        ("three_reads.proc", EXIT_FALSE),
        ("two_reads.proc", EXIT_TRUE),
        ("replicated_read.proc", EXIT_TRUE),
    ])
    def test_state_context(self, name, expected):
        args = ["check", "--coalgebra", sample("alt_end.json"), "--context", "x: @T", sample(name)]
        assert main(args) == expected

    @pytest.mark.parametrize("context,name,expected", [
        ("x: ?int", "inact.proc", EXIT_FALSE),
        ("x: un ?int", "two_reads.proc", EXIT_TRUE),
        ("x: ?int", "two_reads.proc", EXIT_FALSE),
    ])
    def test_oracle(self, context, name, expected):
        assert main(["oracle", "--context", context, sample(name)]) == expected

    def test_process_syntax_error(self, tmp_path):
        bad = tmp_path / "bad.proc"
        bad.write_text("x?(z:int)", encoding="utf-8")
        assert main(["check", str(bad)]) == EXIT_ERROR

    def test_missing_file(self):
        assert main(["check", str(SAMPLES / "missing.proc")]) == EXIT_ERROR


class TestRunCommand:
    """Test sct run."""

    def test_math_session(self, capsys):
        assert main(["run", sample("math_session.proc"), "--max-steps", "8"]) == EXIT_TRUE
        out = capsys.readouterr().out
        assert out.splitlines()[-1] == "stopped: quiescent"

    def test_json_trace(self, capsys):
        args = ["--format", "json", "run", sample("math_session.proc"), "--max-steps", "2"]
        assert main(args) == EXIT_TRUE
        data = json.loads(capsys.readouterr().out)
        assert data["reason"] == "max-steps"
        assert [s["rule"] for s in data["steps"][1:]] == ["r-sync", "r-com"]
