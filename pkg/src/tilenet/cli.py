"""Command-line interface: ``tilenet <command> [options]``.

Reports are JSON (sorted keys) on stdout or in ``--report``; numeric series go
to CSV and geometry to SVG. Failures print ``{"error": category, "message": ...}``
on stderr and exit with the category's code.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import Hierarchy, count_types, supertile, validate_rule
from .discrepancy import bk_statistics, laczkovich_scan, layer_decomposition, random_polyomino, tile_discrepancy
from .errors import TilenetError
from .io import dumps_report, write_patch_csv
from .matching import displacement_profile, write_match_csv
from .net import extract_net, lattice_net, read_net_csv, write_net_csv
from .rules import load_rule
from .spectral import check_xi_consistency, decay_probe, spectral_report
from .svg import Style, render_svg

log = logging.getLogger("tilenet")


def parse_range(text: str) -> list:
    """``"3..6"`` -> [3, 4, 5, 6]; ``"4,6,8"`` -> [4, 6, 8]; ``"5"`` -> [5]."""
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
        if hi < lo:
            raise argparse.ArgumentTypeError(f"empty range {text!r}")
        return list(range(lo, hi + 1))
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad level list {text!r}") from None


def _check_out(path) -> None:
    """Fail early if an output file cannot be created."""
    if path is None:
        return
    parent = Path(path).resolve().parent
    if not parent.is_dir():
        raise FileNotFoundError(f"output directory does not exist: {parent}")


def _emit(report: dict, args) -> None:
    text = dumps_report(report)
    if getattr(args, "report", None):
        Path(args.report).write_text(text)
    else:
        sys.stdout.write(text)


def _rule_block(rule) -> dict:
    return {"name": rule.name, "n": rule.n, "q": rule.q, "xi": rule.xi, "xi_expr": rule.xi_expr,
            "matrix": rule.count_matrix}


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args) -> int:
    rule = load_rule(args.rule)
    rep = validate_rule(rule)
    _emit({"rule": _rule_block(rule), "ok": rep.ok, "area_residuals": rep.relative_residuals,
           "overlaps": [list(o) for o in rep.overlaps]}, args)
    return 0 if rep.ok else 62


def cmd_generate(args) -> int:
    for p in (args.patch_csv, args.net_csv, args.svg, args.report):
        _check_out(p)
    rule = load_rule(args.rule)
    patch = supertile(rule, args.root_type, args.level, scale=args.scale)
    net = extract_net(patch, compute_params=not args.no_params)
    if args.patch_csv:
        write_patch_csv(patch, args.patch_csv)
    if args.net_csv:
        write_net_csv(net, args.net_csv)
    if args.svg:
        Path(args.svg).write_text(render_svg(patch))
    _emit({"rule": _rule_block(rule), "root_type": args.root_type, "level": args.level, "scale": args.scale,
           "tiles": len(patch), "counts": count_types(patch).tolist(), "support_area": patch.support_area(),
           "R": net.R, "r": net.r}, args)
    return 0


def cmd_analyze(args) -> int:
    rule = load_rule(args.rule)
    rep = spectral_report(rule, args.epsilon)
    root_res, left_res = check_xi_consistency(rule, rep)
    out = {"rule": _rule_block(rule), **rep.to_dict(), "xi_power_residual": root_res,
           "left_eigen_residual": left_res,
           "tile_discrepancy": {str(i + 1): [tile_discrepancy(rule, t.id, m, rep.alpha) for m in range(1, args.mmax + 1)]
                                for i, t in enumerate(rule.tiles)}}
    if rule.n > 1:
        probe = decay_probe(rep.matrix, [1] + [0] * (rule.n - 1), args.probe_m, rep)
        out["decay_probe"] = {"ratio_slope": probe.ratio_slope, "eigen_slope": probe.eigen_slope,
                              "target_slope": math.log(rep.lambda2abs / rep.lambda1) if rep.lambda2abs > 0 else None}
    _emit(out, args)
    return 0


def _load_net(args, rule=None, scale=1.0):
    if getattr(args, "net_csv", None):
        return read_net_csv(args.net_csv, compute_params=False)
    return extract_net(supertile(rule, args.root_type, args.level, scale=scale), compute_params=False)


def cmd_bk(args) -> int:
    _check_out(args.report)
    rule = load_rule(args.rule)
    rep = spectral_report(rule)
    net = _load_net(args, rule)
    res = bk_statistics(net, rep.alpha, range(args.jmin, args.jmax + 1), args.samples, args.seed)
    _emit({"rule": _rule_block(rule), "root_type": args.root_type, "level": args.level, **res.to_dict()}, args)
    return 0


def cmd_laczkovich(args) -> int:
    _check_out(args.report)
    rule = load_rule(args.rule)
    rep = spectral_report(rule)
    k = 1.0 / rule.min_inradius if args.scale is None else args.scale
    if args.lattice_control:
        side = int(math.isqrt(args.max_cells)) * 4
        net, alpha = lattice_net(0, 0, side, side), 1.0
    else:
        net, alpha = _load_net(args, rule, k), rep.alpha / k**2
    scan = laczkovich_scan(net, alpha, args.windows, args.min_cells, args.max_cells, args.seed)
    _emit({"rule": _rule_block(rule), "scale": k, "control": bool(args.lattice_control), **scan.to_dict()}, args)
    return 0


def cmd_layers(args) -> int:
    _check_out(args.report)
    rule = load_rule(args.rule)
    rep = spectral_report(rule)
    hier = Hierarchy.build(rule, args.root_type, args.level, scale=args.scale)
    net = extract_net(hier.levels[0], compute_params=False)
    alpha = rep.alpha / args.scale**2
    rng = np.random.default_rng(args.seed)
    runs = []
    for _ in range(args.windows):
        U = random_polyomino(args.cells, rng, net.safe_cells())
        runs.append(layer_decomposition(U, hier, 0, alpha).to_dict())
    _emit({"rule": _rule_block(rule), "lambda2": rep.lambda2abs, "epsilon": rep.epsilon, "windows": runs,
           "seed": args.seed}, args)
    return 0


def cmd_match(args) -> int:
    for p in (args.report, args.csv, args.svg):
        _check_out(p)
    rule = load_rule(args.rule)
    rep = spectral_report(rule)
    beta = args.beta if args.beta is not None else rep.beta
    prof = displacement_profile(rule, args.root_type, args.levels, beta, root_level=args.root_level, mode=args.mode)
    first = prof.matches[0]  # exports use the smallest window
    if args.csv:
        write_match_csv(first, args.csv)
    if args.svg:
        Path(args.svg).write_text(render_svg(first))
    _emit({"rule": _rule_block(rule), "alpha": rep.alpha, "mode": args.mode, **prof.to_dict()}, args)
    return 0


def cmd_render(args) -> int:
    _check_out(args.out)
    rule = load_rule(args.rule)
    patch = supertile(rule, args.root_type, args.level)
    obj = patch if args.what == "patch" else extract_net(patch, compute_params=False)
    svg = render_svg(obj, Style(width=args.width))
    if args.out:
        Path(args.out).write_text(svg)
    else:
        sys.stdout.write(svg)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tilenet", description="Substitution tilings, their nets and lattice comparisons.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, level=None):
        sp.add_argument("--rule", default="penrose", help="built-in name (penrose, chair) or rule file path")
        sp.add_argument("--root-type", type=int, default=1, help="tile id of the root supertile")
        if level is not None:
            sp.add_argument("--level", type=int, default=level, help="inflation level of the root supertile")
        sp.add_argument("--report", help="write the JSON report here instead of stdout")

    sp = sub.add_parser("validate", help="check a rule's dissections")
    common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("generate", help="inflate a supertile and extract its net")
    common(sp, 6)
    sp.add_argument("--scale", type=float, default=1.0)
    sp.add_argument("--patch-csv")
    sp.add_argument("--net-csv")
    sp.add_argument("--svg")
    sp.add_argument("--no-params", action="store_true", help="skip the Delone radii")
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("analyze", help="spectral constants, Pisot test and decay checks")
    common(sp)
    sp.add_argument("--epsilon", type=float, default=None)
    sp.add_argument("--mmax", type=int, default=12, help="levels for the per-tile discrepancy series")
    sp.add_argument("--probe-m", type=int, default=20, help="powers for the eigenvector decay probe")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("discrepancy", help="discrepancy statistics of the net")
    dsub = sp.add_subparsers(dest="stat", required=True)

    d = dsub.add_parser("bk", help="dyadic square ratios E_alpha(2^j) and partial products")
    common(d, 14)
    d.add_argument("--jmin", type=int, default=4)
    d.add_argument("--jmax", type=int, default=8)
    d.add_argument("--samples", type=int, default=100_000, help="max squares per scale")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--net-csv", help="use an exported net instead of generating one")
    d.set_defaults(func=cmd_bk)

    d = dsub.add_parser("laczkovich", help="discrepancy/perimeter ratios over random polyominoes")
    common(d, 9)
    d.add_argument("--scale", type=float, default=None, help="tile scale (default 1/min inradius)")
    d.add_argument("--windows", type=int, default=200)
    d.add_argument("--min-cells", type=int, default=10)
    d.add_argument("--max-cells", type=int, default=10_000)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--net-csv", help="use an exported net instead of generating one")
    d.add_argument("--lattice-control", action="store_true", help="run on the unit lattice instead")
    d.set_defaults(func=cmd_laczkovich)

    d = dsub.add_parser("layers", help="hierarchical layer split of random polyominoes")
    common(d, 11)
    d.add_argument("--scale", type=float, default=1.0)
    d.add_argument("--cells", type=int, default=4096)
    d.add_argument("--windows", type=int, default=3)
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_layers)

    sp = sub.add_parser("match", help="bottleneck displacement to beta Z^2 across supertile windows")
    common(sp)
    sp.add_argument("--levels", type=parse_range, default=parse_range("4..8"), help="e.g. 3..6 or 4,6,8")
    sp.add_argument("--beta", type=float, default=None, help="lattice spacing (default alpha^-1/2)")
    sp.add_argument("--root-level", type=int, default=None)
    sp.add_argument("--mode", choices=("cover", "smaller"), default="cover")
    sp.add_argument("--csv", help="pairs of the smallest window as CSV")
    sp.add_argument("--svg", help="render of the smallest window's matching")
    sp.set_defaults(func=cmd_match)

    sp = sub.add_parser("render", help="SVG of a supertile or its net")
    common(sp, 4)
    sp.add_argument("--what", choices=("patch", "net"), default="patch")
    sp.add_argument("--width", type=int, default=800)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except TilenetError as e:
        sys.stderr.write(json.dumps({"error": e.category, "message": str(e)}) + "\n")
        return e.exit_code
    except (OSError, ValueError, KeyError) as e:
        sys.stderr.write(json.dumps({"error": "usage", "message": str(e)}) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
