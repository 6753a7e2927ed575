"""
Tests for type parsing, validation, unfolding, printing and compilation.
"""

import pytest
import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from sessions.coalgebra import DATA, STAR, OperationTag, Polarity
from sessions.corpus import SUBTYPE_POOL
from sessions.errors import (
    BscHasNoDual, FreeVariable, NotContractive, TypeSyntaxError, UnknownBasicType,
)
from sessions.type_store import TypeStore, type_to_coalgebra
from sessions.type_syntax import (
    Basic, End, ExtChoice, IntChoice, Mu, Prefixed, Qualifier, Receive, Send,
    Var, dual_type, format_type, parse_type, unfold, validate_type,
)
from sessions.relations import decide_dual


class TestParsing:
    """Test the concrete type grammar."""

    def test_omitted_qualifier_and_end(self):
        """?int means lin ?int.end."""
        assert parse_type("?int") == Prefixed(Qualifier.LIN, Receive(Basic("int")), End())
        assert parse_type("lin ?int.end") == parse_type("?int")

    def test_unrestricted(self):
        t = parse_type("un !bool")
        assert t.qualifier is Qualifier.UN
        assert t.pretype == Send(Basic("bool"))

    def test_recursion_uses_indices(self):
        t = parse_type("rec X.?X.X")
        assert t == Mu(Prefixed(Qualifier.LIN, Receive(Var(0)), Var(0)))

    def test_alpha_equivalence(self):
        assert parse_type("rec X.!int.X") == parse_type("rec Y.!int.Y")

    def test_choices_sort_labels(self):
        t = parse_type("&{quit: end, mul: ?int}")
        assert isinstance(t.pretype, ExtChoice)
        assert [label for label, _ in t.pretype.arms] == ["mul", "quit"]
        assert isinstance(parse_type("+{a: end}").pretype, IntChoice)

    def test_parenthesized_payload(self):
        t = parse_type("!(rec X.?X.X).end")
        assert isinstance(t.pretype.payload, Mu)

    def test_unknown_basic_type(self):
        with pytest.raises(UnknownBasicType):
            parse_type("?string")

    def test_custom_basic_types(self):
        assert parse_type("?string", ["string"]) == Prefixed(Qualifier.LIN, Receive(Basic("string")), End())

    def test_syntax_error_position(self):
        with pytest.raises(TypeSyntaxError) as info:
            parse_type("?int.}")
        assert info.value.line == 1

    def test_duplicate_choice_label(self):
        with pytest.raises(TypeSyntaxError):
            parse_type("&{a: end, a: ?int}")


class TestValidation:
    """Test closedness and contractivity."""

    def test_not_contractive(self):
        with pytest.raises(NotContractive):
            validate_type(parse_type("rec X.X"))
        with pytest.raises(NotContractive):
            validate_type(parse_type("rec X.rec Y.X"))

    def test_guarded_recursion_is_fine(self):
        t = parse_type("rec X.rec Y.?int.X")
        assert validate_type(t) is t

    def test_free_variable(self):
        with pytest.raises(FreeVariable):
            validate_type(Prefixed(Qualifier.LIN, Send(Basic("int")), Var(0, "X")))


class TestUnfold:
    """Test head unfolding."""

    def test_unfold_recursion(self):
        t = parse_type("rec X.!int.X")
        assert unfold(t) == Prefixed(Qualifier.LIN, Send(Basic("int")), t)

    def test_unfold_nested(self):
        """Unfolding never returns a rec."""
        t = parse_type("rec X.rec Y.?int.X")
        unfolded = unfold(t)
        assert isinstance(unfolded, Prefixed)
        assert unfold(unfolded) == unfolded

    def test_identity_on_other_types(self):
        t = parse_type("?int")
        assert unfold(t) is t


class TestFormatting:
    """Test printing back into the grammar."""

    @pytest.mark.parametrize("text", [
        "?int",
        "un !bool",
        "rec X.?X.X",
        "rec X.!(rec X.?X.X).X",
        "&{mul: ?int.?int.!int.end, quit: end}",
        "rec X.&{a: ?int.X, b: +{c: end}}",
        "?(?int).end",
    ])
    def test_reparse(self, text):
        t = parse_type(text)
        assert parse_type(format_type(t)) == t

    def test_end_continuation_is_omitted(self):
        assert format_type(parse_type("?int.end")) == "?int"

    def test_shadowed_binder_is_renamed(self):
        text = format_type(parse_type("rec X.!(rec X.?X.X).X"))
        assert text.count("rec X.") == 1


class TestCompilation:
    """Test compiling types into coalgebra states."""

    def test_recursive_type_is_one_state(self):
        """rec X.?X.X becomes one com state looping on itself."""
        c, root = type_to_coalgebra(parse_type("rec X.?X.X"))
        assert len(c) == 1
        assert c.target(root, DATA) == root
        assert c.target(root, STAR) == root

    def test_hash_consing(self):
        store = TypeStore()
        a = store.add_type(parse_type("rec X.!int.X"))
        b = store.add_type(parse_type("rec Y.!int.Y"))
        c = store.add_type(parse_type("!int.rec Z.!int.Z"))
        assert a == b == c

    def test_math_server_states(self):
        c, root = type_to_coalgebra(parse_type(
            "rec X.&{mul: ?int.?int.!int.X, neg: ?bool.!bool.X, quit: end}"
        ))
        assert c.op(root) is OperationTag.BRANCH
        assert len(c) == 9

    def test_unrestricted_message_ends_inert(self):
        """un ?int is par, then a read, then a par state looping on itself."""
        c, root = type_to_coalgebra(parse_type("un ?int"))
        assert c.op(root) is OperationTag.PAR
        read = c.target(root, STAR)
        assert c.label(read).polarity is Polarity.IN
        rest = c.target(read, STAR)
        assert c.op(rest) is OperationTag.PAR
        assert c.target(rest, STAR) == rest

    def test_unrestricted_choice(self):
        c, root = type_to_coalgebra(parse_type("un &{a: end}"))
        assert c.op(root) is OperationTag.PAR
        assert c.op(c.target(root, STAR)) is OperationTag.BRANCH

    def test_failed_compile_leaves_store_usable(self):
        store = TypeStore()
        with pytest.raises(UnknownBasicType):
            store.add_type(Prefixed(Qualifier.LIN, Send(Basic("string")), End()))
        assert store.add_type(parse_type("!int")) in store.coalgebra

    def test_dual_of(self):
        store = TypeStore()
        t = store.add_type(parse_type("?int.!bool"))
        dual = store.dual_of(t)
        assert store.coalgebra.label(dual).polarity is Polarity.OUT
        assert store.dual_of(t) == dual
        assert store.dual_of(dual) == t


class TestDualType:
    """Test the syntactic dual used to reorient restrictions."""

    def test_flips_directions(self):
        assert dual_type(parse_type("?int.!bool")) == parse_type("!int.?bool")

    def test_flips_choices(self):
        assert dual_type(parse_type("&{a: ?int, b: end}")) == parse_type("+{a: !int, b: end}")

    def test_keeps_qualifier(self):
        assert dual_type(parse_type("rec X.un !int.X")) == parse_type("rec X.un ?int.X")

    def test_payload_is_closed_over_recursion(self):
        assert dual_type(parse_type("rec X.?X.X")) == parse_type("rec X.!(rec X.?X.X).X")

    def test_basic_has_no_dual(self):
        with pytest.raises(BscHasNoDual):
            dual_type(Basic("int"))

    @pytest.mark.parametrize("text", SUBTYPE_POOL + (
        "rec X.?X.X",
        "rec X.!(rec X.?X.X).X",
        "rec X.&{mul: ?int.?int.!int.X, neg: ?bool.!bool.X, quit: end}",
        "rec X.?int.rec Y.+{a: !X.Y, b: X}",
    ))
    def test_agrees_with_coalgebra_duality(self, text):
        store = TypeStore()
        t = parse_type(text)
        left = store.add_type(t)
        right = store.add_type(dual_type(t))
        assert decide_dual(store.coalgebra, left, right).verdict
