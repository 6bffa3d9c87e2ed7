from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ftaplab import (ModelParams, ParseError, TreeFile, format_rational, generate_random_model, parse_rational,
                     parse_tree_file, render_tree_file)

MINIMAL = "FTAPLAB TREE 1\nnode 0 - 1/1\nproc S 1 0 0/1\n"

BINOMIAL = """FTAPLAB TREE 1
node 0 - 1/1
node 1 0 1/2
node 2 0 1/2
proc S 1 0 1/1
proc S 1 1 2/1
proc S 1 2 1/2
"""


def test_minimal_round_trip():
    tf = parse_tree_file(MINIMAL)
    assert tf.tree.horizon == 0 and tf.process("S").scalar(0) == 0
    assert render_tree_file(tf) == MINIMAL


def test_binomial_round_trip_and_model():
    tf = parse_tree_file(BINOMIAL)
    assert render_tree_file(tf) == BINOMIAL
    m = tf.to_model()
    assert m.S.scalar(2) == F(1, 2) and not m.cones


def test_comments_and_cones():
    text = BINOMIAL.replace("node 1", "# a comment\nnode 1") + "cone 0 1/1\n"
    tf = parse_tree_file(text)
    assert tf.cones == {0: [(F(1),)]}
    assert render_tree_file(tf) == BINOMIAL + "cone 0 1/1\n"


def test_bare_cone_line_means_no_trading():
    tf = parse_tree_file(BINOMIAL + "cone 0\n")
    assert tf.cones == {0: []} and not tf.to_model().all_columns
    assert render_tree_file(tf).endswith("cone 0\n")


@pytest.mark.parametrize("tok,ok", [("1/3", True), ("-5/2", True), ("0/1", True), ("2/6", False),
                                    ("0/2", False), ("-0/1", False), ("1/0", False), ("3", False),
                                    ("1/-3", False), ("01/3", False)])
def test_rational_tokens(tok, ok):
    if ok:
        assert format_rational(parse_rational(tok)) == tok
    else:
        with pytest.raises(ParseError):
            parse_rational(tok)


def error_line(text):
    with pytest.raises(ParseError) as exc:
        parse_tree_file(text)
    return exc.value.line, str(exc.value)


def test_bad_header():
    assert error_line("FTAPLAB TREE 2\nnode 0 - 1/1\n")[0] == 1


def test_non_canonical_in_file():
    line, msg = error_line(BINOMIAL.replace("node 1 0 1/2", "node 1 0 2/4"))
    assert line == 3 and "non-canonical" in msg


def test_sibling_sum_reported_at_parent():
    text = BINOMIAL.replace("node 2 0 1/2", "node 2 0 1/3")
    line, msg = error_line(text)
    assert line == 2 and "5/6" in msg


def test_orphan():
    line, msg = error_line(BINOMIAL.replace("node 2 0 1/2", "node 2 7 1/2"))
    assert line == 4 and "orphan" in msg


def test_duplicate_id():
    line, msg = error_line(BINOMIAL.replace("node 2 0 1/2", "node 1 0 1/2"))
    assert line == 4 and "duplicate" in msg


def test_missing_process_value():
    line, msg = error_line(BINOMIAL.replace("proc S 1 2 1/2\n", ""))
    assert "missing" in msg


def test_unknown_line_kind():
    assert error_line(BINOMIAL + "edge 0 1\n")[0] == 8


def test_cone_on_leaf():
    assert "internal" in error_line(BINOMIAL + "cone 1 1/1\n")[1]


def test_message_format():
    assert str(ParseError("boom", 3)) == "line 3: boom"


@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 2), st.sampled_from([0.0, 0.6]))
def test_generated_models_round_trip(seed, depth, dim, density):
    m = generate_random_model(seed, ModelParams(depth=depth, dim=dim, constraint_density=density))
    tf = TreeFile.from_model(m)
    text = render_tree_file(tf)
    back = parse_tree_file(text)
    assert render_tree_file(back) == text
    m2 = back.to_model()
    assert m2.S == m.S and m2.cones == m.cones and m2.tree == m.tree
