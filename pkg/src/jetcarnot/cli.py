"""Command-line entry point.

Exit status: 0 when every check passes, 1 on bad input, 2 on a certificate
violation, 3 when the path optimizer exhausts its budget.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path


from . import calibration as cal
from .config import RunConfig, load_config, load_polynomial
from .fillvol import filling_report, fv_curve, fv_curve_csv
from .jetcore import JetPoint
from .jetmaps import prolong
from .nonextension import (
    IncompatibleBoundaryError,
    build_witness,
    growth_table,
    growth_table_csv,
    witness_contradiction_curve,
)
from .paths import InfeasibleAtBudget, distance_bounds

EXIT_OK, EXIT_INPUT, EXIT_VIOLATION, EXIT_BUDGET = 0, 1, 2, 3

log = logging.getLogger("jetcarnot")


def _emit(cfg: RunConfig, name: str, text: str) -> None:
    """Write ``text`` to stdout and, with ``--out``, to ``<out>/<name>``."""
    sys.stdout.write(text if text.endswith("\n") else text + "\n")
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text if text.endswith("\n") else text + "\n")


def cmd_prolong(cfg: RunConfig, args) -> int:
    f = load_polynomial(args.field)
    if f.n != cfg.n:
        raise ValueError(f"field has {f.n} variables, --n is {cfg.n}")
    p = prolong(f, cfg.k, [float(v) for v in args.x])
    _emit(cfg, "prolong.json", json.dumps(p.to_dict()))
    return EXIT_OK


def _load_point(source: str) -> JetPoint:
    text = source if source.lstrip().startswith("{") else Path(source).read_text()
    return JetPoint.from_dict(json.loads(text))


def cmd_dist(cfg: RunConfig, args) -> int:
    p, q = _load_point(args.p), _load_point(args.q)
    if p.shape != q.shape:
        raise ValueError(f"points live in different jet spaces: {p.shape} vs {q.shape}")
    b = distance_bounds(p, q, cfg.paths)
    report = {"lower": b.lower, "r0_upper": b.r0_upper, "cc_upper": b.cc_upper, "sandwich_ok": b.sandwich_ok}
    if args.metric != "all":
        key = {"lower": "lower", "r0": "r0_upper", "cc": "cc_upper"}[args.metric]
        report["selected"] = report[key]
    if cfg.format == "csv":
        text = "lower,r0_upper,cc_upper,sandwich_ok\n" + f"{b.lower!r},{b.r0_upper!r},{b.cc_upper!r},{int(b.sandwich_ok)}\n"
    else:
        text = json.dumps(report, sort_keys=True)
    _emit(cfg, f"dist.{cfg.format}", text)
    return EXIT_OK if b.sandwich_ok else EXIT_VIOLATION


def cmd_certify(cfg: RunConfig, args) -> int:
    spec = cfg.boundary_spec()
    sampling = replace(cfg.sampling, seed=cfg.seed)
    rows = growth_table(spec, cfg.Ls, sampling)
    expected = 1 + cfg.k / (cfg.n + 1)
    ok = all(r.ok() for r in rows)
    if cfg.format == "csv":
        slope = rows[-1].slope_so_far
        text = growth_table_csv(rows) + f"# slope={slope!r} expected={expected!r} pass={int(ok)}\n"
    else:
        text = json.dumps(
            {
                "rows": [
                    {"L": r.L, "certified": r.certified, "measured_upper": r.measured_upper, "ratio": r.ratio, "slope_so_far": r.slope_so_far}
                    for r in rows
                ],
                "slope": rows[-1].slope_so_far,
                "expected_slope": expected,
                "pass": ok,
            },
            sort_keys=True,
        )
    _emit(cfg, f"growth.{cfg.format}", text)
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_witness(cfg: RunConfig, args) -> int:
    spec = cfg.boundary_spec()
    opts = replace(cfg.paths, seed=cfg.seed)
    w = build_witness(spec, cfg.L_max, cfg.points_per_edge, cfg.cross_pairs, seed=cfg.seed, opts=opts)
    level = witness_contradiction_curve(w, cfg.lam)
    data = w.to_dict()
    data["lambda"] = cfg.lam
    data["contradiction_level"] = level
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "witness.json").write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")
    summary = {"lambda": cfg.lam, "contradiction_level": level, "c": w.c, "lipF_upper": w.lipF_upper, **w.checks}
    if cfg.format == "csv":
        keys = sorted(summary)
        text = ",".join(keys) + "\n" + ",".join(repr(summary[k2]) for k2 in keys) + "\n"
    else:
        text = json.dumps(summary, sort_keys=True)
    sys.stdout.write(text if text.endswith("\n") else text + "\n")
    ok = w.checks["shell_separation_ok"] and w.checks["cross_ok"] and w.checks["within_ok"]
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_fillvol(cfg: RunConfig, args) -> int:
    spec = cfg.boundary_spec()
    report = filling_report(spec, cfg.Ls)
    curve = fv_curve(spec, report.lipF_upper, cfg.fv_r)
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "filling_report.json").write_text(report.to_json() + "\n")
        (out / "fv_curve.csv").write_text(fv_curve_csv(curve))
    if cfg.format == "csv":
        lines = [f"# lipF_upper={report.lipF_upper!r} delta={report.delta!r} exponent={report.exponent!r}"]
        lines.append("L,mass_upper,filling_lower,identity_residual")
        lines += [f"{r.L!r},{r.mass_upper!r},{r.filling_lower!r},{r.identity_residual!r}" for r in report.rows]
        lines.append(f"# identity={'pass' if report.identity_ok else 'fail'}")
        text = "\n".join(lines) + "\n"
    else:
        text = report.to_json()
    sys.stdout.write(text if text.endswith("\n") else text + "\n")
    return EXIT_OK if report.identity_ok else EXIT_VIOLATION


def stokes_table(Ns, dim: int = 2, seed: int = 0) -> list[tuple[str, int, float, float, float]]:
    """Rows ``(map, N, interior, boundary, residual)`` for the bundled test maps."""
    maps = [("identity", cal.identity_map)]
    maps += [(f"cubic{s}", cal.polynomial_test_map(dim, 3, seed + s)) for s in range(3)]
    maps += [(f"pwlinear{s}", cal.piecewise_linear_test_map(dim, seed + s)) for s in range(2)]
    rows = []
    for name, h in maps:
        for N in Ns:
            g = cal.CoordinateMapGrid.from_function(h, dim, N)
            inner, outer = cal.interior_integral(g), cal.boundary_integral(g)
            rows.append((name, N, inner, outer, abs(inner - outer) / (1 + abs(inner))))
    return rows


def cmd_stokes(cfg: RunConfig, args) -> int:
    rows = stokes_table(cfg.stokes_Ns, cfg.n + 1, cfg.seed)
    if cfg.format == "csv":
        text = "map,N,interior,boundary,residual\n" + "".join(f"{m},{N},{a!r},{b!r},{r!r}\n" for m, N, a, b, r in rows)
    else:
        text = json.dumps([dict(zip(["map", "N", "interior", "boundary", "residual"], r)) for r in rows])
    _emit(cfg, f"stokes.{cfg.format}", text)
    ident = [r for r in rows if r[0] == "identity"]
    return EXIT_OK if all(r[4] <= 1e-12 for r in ident) else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="INI file; flags override its values")
    common.add_argument("--n", type=int)
    common.add_argument("--k", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="directory for report files")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--L", dest="Ls", type=float, nargs="+", help="dilation scales")
    common.add_argument("--f0", help="polynomial file (or inline JSON) for f0")
    common.add_argument("--f1", help="polynomial file (or inline JSON) for f1")
    common.add_argument("-v", "--verbose", action="store_true")
    ap = argparse.ArgumentParser(
        prog="jetcarnot", description="Jet-space Carnot groups: distances, calibrations, witnesses.", parents=[common]
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prolong", parents=[common], help="print j^k_x(f)")
    p.add_argument("--field", required=True, help="polynomial file or inline JSON")
    p.add_argument("--x", nargs="+", required=True)
    p.set_defaults(func=cmd_prolong)

    p = sub.add_parser("dist", parents=[common], help="distance bounds between two jets")
    p.add_argument("p", help="JetPoint JSON file or inline JSON")
    p.add_argument("q")
    p.add_argument("--metric", choices=["cc", "r0", "lower", "all"], default="all")
    p.add_argument("--steps", type=int)
    p.add_argument("--starts", type=int)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("certify", parents=[common], help="growth table of the certified bound")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("witness", parents=[common], help="multi-scale witness set and contradiction level")
    p.add_argument("--lam", type=float, help="hypothetical Lipschitz constant")
    p.add_argument("--L-max", dest="L_max", type=int)
    p.add_argument("--cross-pairs", dest="cross_pairs", type=int)
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("fillvol", parents=[common], help="filling-volume report and curve")
    p.set_defaults(func=cmd_fillvol)

    p = sub.add_parser("stokes", parents=[common], help="Stokes residual table")
    p.set_defaults(func=cmd_stokes)
    return ap


def resolve_config(args) -> RunConfig:
    config = getattr(args, "config", None)
    cfg = load_config(config) if config else RunConfig()
    over = {key: getattr(args, key, None) for key in ("n", "k", "seed", "out", "format", "Ls", "f0", "f1", "lam", "L_max", "cross_pairs")}
    if over["Ls"] is not None:
        over["Ls"] = tuple(over["Ls"])
    cfg = cfg.with_overrides(**over)
    path_over = {key: getattr(args, key, None) for key in ("steps", "starts")}
    path_over = {key: v for key, v in path_over.items() if v is not None}
    if getattr(args, "seed", None) is not None:
        path_over["seed"] = args.seed
    if path_over:
        cfg = replace(cfg, paths=replace(cfg.paths, **path_over))
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return args.func(cfg, args)
    except InfeasibleAtBudget as exc:
        log.error("%s", exc)
        return EXIT_BUDGET
    except (ValueError, KeyError, OSError, IncompatibleBoundaryError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
