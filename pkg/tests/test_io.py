import json
import math

import numpy as np
import pytest

from tilenet.core import count_types, supertile
from tilenet.errors import MalformedPolygon, RuleSyntaxError, SemanticError, ValidationError
from tilenet.io import (
    dumps_report,
    eval_expr,
    format_rule,
    parse_rule_file,
    parse_rule_text,
    read_patch_csv,
    write_patch_csv,
)
from tilenet.rules import RULE_DIR, load_rule
from tilenet.spectral import substitution_matrix

SQUARE = """\
rule square
q 4
let h = 1/2
xi 2
tile 1 unit
vertex 0 0
vertex 1 0
vertex 1 1
vertex 0 1
child 1 1 0 0 0 0
child 1 1 0 0 h 0
child 1 1 0 0 0 h
child 1 1 0 0 h h
"""


def test_shipped_penrose_file():
    rule = parse_rule_file(RULE_DIR / "penrose.rule")
    assert rule.n == 2
    assert rule.xi == pytest.approx((1 + math.sqrt(5)) / 2, rel=1e-15)
    assert substitution_matrix(rule).entries == ((2, 1), (1, 1))


def test_shipped_chair_file():
    rule = parse_rule_file(RULE_DIR / "chair.rule")
    assert (rule.n, rule.xi) == (1, 2.0)


def test_shipped_files_match_builtins(pen, chr_):
    assert parse_rule_file(RULE_DIR / "penrose.rule") == pen
    assert load_rule(str(RULE_DIR / "chair.rule")) == chr_


def test_format_roundtrip(pen):
    again = parse_rule_text(format_rule(pen))
    assert again == pen
    assert count_types(supertile(again, 1, 6)).tolist() == count_types(supertile(pen, 1, 6)).tolist()


def test_user_rule_with_let():
    rule = parse_rule_text(SQUARE)
    assert rule.name == "square" and rule.count_matrix == [[4]]


def test_unknown_child_tile_names_line():
    text = SQUARE.replace("child 1 1 0 0 h h", "child 1 99 0 0 h h")
    with pytest.raises(SemanticError) as e:
        parse_rule_text(text)
    assert e.value.line == 13 and "99" in str(e.value)
    assert "line 13, column 9" in str(e.value)


@pytest.mark.parametrize(
    "bad,line,col",
    [
        ("q four", 2, 3),
        ("xi 2+", 4, 4),
        ("banana 3", 4, 1),
        ("vertex 1", 6, 1),
    ],
)
def test_syntax_errors_carry_position(bad, line, col):
    lines = SQUARE.splitlines()
    lines[line - 1] = bad
    with pytest.raises(RuleSyntaxError) as e:
        parse_rule_text("\n".join(lines))
    assert (e.value.line, e.value.column) == (line, col)


def test_semantic_errors():
    with pytest.raises(SemanticError):
        parse_rule_text(SQUARE.replace("let h = 1/2", "let h = k/2"))
    with pytest.raises(SemanticError):
        parse_rule_text(SQUARE.replace("xi 2", "xi sqrt(-1)"))
    with pytest.raises(SemanticError):
        parse_rule_text(SQUARE.replace("xi 2\n", ""))


def test_validation_errors_forwarded():
    with pytest.raises(ValidationError):
        parse_rule_text(SQUARE.replace("child 1 1 0 0 h h\n", ""))
    with pytest.raises(MalformedPolygon):
        parse_rule_text(SQUARE.replace("vertex 1 1\nvertex 0 1", "vertex 0 1\nvertex 1 1"))


def test_expression_evaluator():
    assert eval_expr("(1+sqrt(5))/2") == pytest.approx((1 + math.sqrt(5)) / 2)
    assert eval_expr("2**-1") == 0.5
    with pytest.raises(RuleSyntaxError):
        eval_expr("__import__('os')")
    with pytest.raises(RuleSyntaxError):
        eval_expr("[1]")


def test_patch_csv_roundtrip(tmp_path, pen):
    p = supertile(pen, 2, 6)
    path = tmp_path / "patch.csv"
    write_patch_csv(p, path)
    back = read_patch_csv(path, pen)
    assert back.types.tolist() == p.types.tolist()
    assert back.address_strings() == p.address_strings()
    np.testing.assert_array_equal(back.translations, p.translations)
    np.testing.assert_array_equal(back.centroids(), p.centroids())
    header = path.read_text().splitlines()[0]
    assert header == "tileId,level,address,rotationIndex,reflect,tx,ty"


def test_report_json_deterministic():
    data = {"b": np.float64(1.5), "a": [np.int64(2), float("nan")], "c": np.array([1, 2])}
    text = dumps_report(data)
    assert text == dumps_report(dict(reversed(list(data.items()))))
    assert json.loads(text) == {"a": [2, None], "b": 1.5, "c": [1, 2]}
