"""Rule files, patch CSV and JSON reports.

Rule file grammar (one statement per line, ``#`` starts a comment)::

    rule NAME
    q INT
    let NAME = EXPR
    xi EXPR
    tile ID [LABEL]
    vertex EXPR EXPR
    child PARENT TYPE ROT REFLECT EXPR EXPR

Fields are separated by whitespace, so an expression must not contain spaces.
EXPR is arithmetic over numbers, ``+ - * / **``, parentheses, ``sqrt(...)``
and names bound earlier by ``let``. ``vertex`` lines belong to the most recent
``tile``. A ``child`` line places a copy of tile TYPE, scaled by 1/xi, inside
tile PARENT by the isometry rotation ROT * 2pi/q, reflection y -> -y when
REFLECT is 1 (applied first), then translation.
"""

from __future__ import annotations

import ast
import csv
import json
import math
import operator
from pathlib import Path

import numpy as np

from .core import BasicTile, Child, Isometry, Patch, SubstitutionRule, validate_rule
from .errors import MalformedPolygon, RuleSyntaxError, SemanticError, ValidationError

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def eval_expr(text: str, names: dict | None = None, line: int | None = None, column: int | None = None) -> float:
    """Evaluate a restricted arithmetic expression to a float."""
    names = names or {}
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as e:
        col = column + (e.offset or 1) - 1 if column is not None else e.offset
        raise RuleSyntaxError(f"bad expression {text!r}", line, col) from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id == "sqrt" \
                and len(node.args) == 1 and not node.keywords:
            x = ev(node.args[0])
            if x < 0:
                raise SemanticError("sqrt of a negative number", line, column)
            return math.sqrt(x)
        if isinstance(node, ast.Name):
            if node.id not in names:
                raise SemanticError(f"unknown name {node.id!r}", line, column)
            return names[node.id]
        raise RuleSyntaxError(f"unsupported element in expression {text!r}", line, column)

    try:
        return float(ev(tree))
    except ZeroDivisionError:
        raise SemanticError(f"division by zero in {text!r}", line, column) from None
    except OverflowError:
        raise SemanticError(f"overflow in {text!r}", line, column) from None


def _fields(raw: str):
    """Whitespace-separated fields with their 1-based columns."""
    out, i = [], 0
    while i < len(raw):
        if raw[i].isspace():
            i += 1
            continue
        j = i
        while j < len(raw) and not raw[j].isspace():
            j += 1
        out.append((raw[i:j], i + 1))
        i = j
    return out


def _int(tok: str, line: int, col: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise RuleSyntaxError(f"{what} must be an integer, got {tok!r}", line, col) from None


def parse_rule_text(text: str, source: str = "<string>") -> SubstitutionRule:
    names: dict = {}
    name, q, xi, xi_expr = None, None, None, ""
    tiles: dict = {}
    order: list = []
    labels: dict = {}
    kids: list = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        raw = raw.split("#", 1)[0]
        f = _fields(raw)
        if not f:
            continue
        key, kcol = f[0]
        args = f[1:]

        def need(n):
            if len(args) != n:
                raise RuleSyntaxError(f"'{key}' takes {n} field(s), got {len(args)}", lineno, kcol)

        if key == "rule":
            need(1)
            name = args[0][0]
        elif key == "q":
            need(1)
            q = _int(args[0][0], lineno, args[0][1], "q")
            if q < 1:
                raise SemanticError("q must be positive", lineno, args[0][1])
        elif key == "let":
            if len(args) != 3 or args[1][0] != "=":
                raise RuleSyntaxError("expected 'let NAME = EXPR'", lineno, kcol)
            ident, icol = args[0]
            if not ident.isidentifier() or ident == "sqrt":
                raise RuleSyntaxError(f"bad name {ident!r}", lineno, icol)
            names[ident] = eval_expr(args[2][0], names, lineno, args[2][1])
        elif key == "xi":
            need(1)
            xi_expr = args[0][0]
            xi = eval_expr(xi_expr, names, lineno, args[0][1])
        elif key == "tile":
            if len(args) not in (1, 2):
                raise RuleSyntaxError("expected 'tile ID [LABEL]'", lineno, kcol)
            tid = _int(args[0][0], lineno, args[0][1], "tile id")
            if tid in tiles:
                raise SemanticError(f"duplicate tile id {tid}", lineno, args[0][1])
            tiles[tid] = []
            order.append(tid)
            labels[tid] = args[1][0] if len(args) == 2 else ""
            current = tid
        elif key == "vertex":
            need(2)
            if current is None:
                raise SemanticError("vertex before any tile", lineno, kcol)
            tiles[current].append(tuple(eval_expr(t, names, lineno, c) for t, c in args))
        elif key == "child":
            need(6)
            parent = _int(args[0][0], lineno, args[0][1], "parent id")
            ctype = _int(args[1][0], lineno, args[1][1], "child tile id")
            rot = _int(args[2][0], lineno, args[2][1], "rotation")
            ref = _int(args[3][0], lineno, args[3][1], "reflect flag")
            if ref not in (0, 1):
                raise RuleSyntaxError("reflect flag must be 0 or 1", lineno, args[3][1])
            tx = eval_expr(args[4][0], names, lineno, args[4][1])
            ty = eval_expr(args[5][0], names, lineno, args[5][1])
            kids.append((lineno, args[0][1], args[1][1], parent, ctype, rot, ref, (tx, ty)))
        else:
            raise RuleSyntaxError(f"unknown statement {key!r}", lineno, kcol)

    if q is None:
        raise SemanticError(f"{source}: missing 'q'")
    if xi is None:
        raise SemanticError(f"{source}: missing 'xi'")
    if not order:
        raise SemanticError(f"{source}: no tiles declared")
    children: dict = {t: [] for t in order}
    for lineno, pcol, ccol, parent, ctype, rot, ref, t in kids:
        if parent not in tiles:
            raise SemanticError(f"child references unknown parent tile {parent}", lineno, pcol)
        if ctype not in tiles:
            raise SemanticError(f"child references unknown tile id {ctype}", lineno, ccol)
        children[parent].append(Child(ctype, Isometry(rot, bool(ref), t, q)))
    try:
        basic = tuple(BasicTile(t, tuple(tiles[t]), labels[t]) for t in order)
        rule = SubstitutionRule(name or Path(source).stem, basic, xi, tuple(children[t] for t in order), q, xi_expr)
    except MalformedPolygon:
        raise
    except ValueError as e:
        raise SemanticError(f"{source}: {e}") from None
    report = validate_rule(rule)
    if not report.ok:
        raise ValidationError(
            f"{source}: dissection check failed (max area residual {report.max_residual:.3g}, overlaps {report.overlaps})"
        )
    return rule


def parse_rule_file(path) -> SubstitutionRule:
    path = Path(path)
    return parse_rule_text(path.read_text(), str(path))


def _num(x: float) -> str:
    return repr(float(x))


def format_rule(rule: SubstitutionRule) -> str:
    """Rule file text that parses back to the same rule (coordinates as exact float literals)."""
    lines = [f"rule {rule.name}", f"q {rule.q}", f"xi {rule.xi_expr or _num(rule.xi)}", ""]
    for t in rule.tiles:
        lines.append(f"tile {t.id} {t.name}".rstrip())
        lines.extend(f"vertex {_num(x)} {_num(y)}" for x, y in t.polygon)
        lines.append("")
    for t, kids in zip(rule.tiles, rule.children):
        for c in kids:
            p = c.placement
            lines.append(f"child {t.id} {c.tile_id} {p.rotation} {int(p.reflect)} "
                         f"{_num(p.translation[0])} {_num(p.translation[1])}")
    return "\n".join(lines) + "\n"


def write_rule_file(rule: SubstitutionRule, path) -> None:
    Path(path).write_text(format_rule(rule))


# ---------------------------------------------------------------------------
# Patch CSV

PATCH_COLUMNS = ("tileId", "level", "address", "rotationIndex", "reflect", "tx", "ty")


def write_patch_csv(patch: Patch, path) -> None:
    ids = patch.tile_ids.tolist()
    addrs = patch.address_strings()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PATCH_COLUMNS)
        for k in range(len(patch)):
            tx, ty = patch.translations[k]
            w.writerow([ids[k], patch.level, addrs[k], int(patch.rotations[k]), int(patch.reflects[k]),
                        _num(tx), _num(ty)])


def read_patch_csv(path, rule: SubstitutionRule, root_level: int | None = None, scale: float = 1.0) -> Patch:
    """Rebuild a patch from its CSV export (all rows must share one level)."""
    ids, levels, addrs, rots, refs, trans = [], set(), [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(PATCH_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            ids.append(int(row["tileId"]))
            levels.add(int(row["level"]))
            addrs.append(tuple(int(a) for a in row["address"].split(".") if a != ""))
            rots.append(int(row["rotationIndex"]))
            refs.append(int(row["reflect"]))
            trans.append((float(row["tx"]), float(row["ty"])))
    if len(levels) > 1:
        raise ValueError(f"{path}: tiles from several levels {sorted(levels)}")
    level = levels.pop() if levels else 0
    depth = max((len(a) for a in addrs), default=0)
    if any(len(a) != depth for a in addrs):
        raise ValueError(f"{path}: addresses of unequal length")
    return Patch(
        rule=rule,
        level=level,
        root_level=level + depth if root_level is None else root_level,
        types=np.array([rule.index(i) for i in ids], dtype=np.int16),
        rotations=np.array(rots, dtype=np.int64),
        reflects=np.array(refs, dtype=bool),
        translations=np.array(trans, dtype=float).reshape(-1, 2),
        addresses=np.array(addrs, dtype=np.uint8).reshape(len(ids), depth),
        scale=scale,
    )


# ---------------------------------------------------------------------------
# JSON reports


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def dumps_report(data) -> str:
    """Deterministic JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(_plain(data), sort_keys=True, indent=2) + "\n"


def write_report(data, path) -> None:
    Path(path).write_text(dumps_report(data))
