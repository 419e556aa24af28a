"""Command-line interface.

Commands:

* ``eval``               price one contract and print its economics
* ``unregulated``        solve the insurer's joint (cutoff, indemnity) problem
* ``regulated``          solve the regulator's indemnity choice
* ``table1``             regime-comparison table over a list of risk aversions
* ``sweep-rho``          both regimes as risk aversion varies, CSV (+SVG)
* ``sweep-ez``           indemnity-increase heatmap over the EZ-square (+SVG)
* ``verify-conjecture``  pool-average convexity grid check

Exit codes: 0 success, 2 usage or domain error, 3 no profitable contract,
4 numerical non-convergence.  All interfaces are dimensionless (rho, loss,
indemnity, premium as fractions of initial wealth).  An optional ``--config``
file supplies ``key=value`` defaults mirroring the long flags; explicit
flags win.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import experiments
from .errors import ConvergenceError, DomainError
from .market import MarketModel, QuadratureSpec
from .preference import MarketPrimitives
from .solve import OptimumReport, SolverConfig, regulated_opt, unregulated_opt
from .typedist import TypeMeasure

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NO_PROFIT = 3
EXIT_NO_CONVERGENCE = 4


def _add_measure_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, help="Beta shape alpha (pair with --beta)")
    p.add_argument("--beta", type=float, help="Beta shape beta (pair with --alpha)")
    p.add_argument("--E", type=float, dest="E", help="mean type E in (0,1) (pair with --Z)")
    p.add_argument("--Z", type=float, dest="Z", help="tail slope Z in (0,1) (pair with --E)")


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rho", type=float, default=5.0, help="relative risk aversion (default 5)")
    p.add_argument("--loss", type=float, default=1.0, help="loss as a fraction of wealth (default 1)")
    p.add_argument("--theta-tol", type=float, default=None, help="cutoff search tolerance")
    p.add_argument("--r-tol", type=float, default=None, help="indemnity search tolerance")
    p.add_argument("--grid", type=int, default=None, help="coarse grid points per axis")
    p.add_argument("--multistart", type=int, default=None, help="multistart seed count")
    p.add_argument("--nodes", type=int, default=None, help="quadrature node budget (odd)")
    p.add_argument("--out", type=str, default=None, help="output file (default stdout/cwd)")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="point-command output format")
    p.add_argument("--config", type=str, default=None, help="key=value defaults file; flags win")


def _measure_from_args(args) -> TypeMeasure:
    has_ab = args.alpha is not None or args.beta is not None
    has_ez = args.E is not None or args.Z is not None
    if has_ab and has_ez:
        raise DomainError("give either --alpha/--beta or --E/--Z, not both")
    if has_ab:
        if args.alpha is None or args.beta is None:
            raise DomainError("--alpha and --beta must be given together")
        return TypeMeasure.from_ab(args.alpha, args.beta)
    if has_ez:
        if args.E is None or args.Z is None:
            raise DomainError("--E and --Z must be given together")
        return TypeMeasure.from_ez(args.E, args.Z)
    return TypeMeasure.from_ez(experiments.BENCHMARK_E, experiments.BENCHMARK_Z)


def _solver_config(args) -> SolverConfig:
    kwargs = {}
    if args.theta_tol is not None:
        kwargs["theta_tol"] = args.theta_tol
    if args.r_tol is not None:
        kwargs["r_tol"] = args.r_tol
    if args.grid is not None:
        kwargs["coarse_grid"] = args.grid
    if args.multistart is not None:
        kwargs["multistart_points"] = args.multistart
    return SolverConfig(**kwargs)


def _quad_spec(args) -> QuadratureSpec:
    if args.nodes is not None:
        return QuadratureSpec(nodes=args.nodes)
    return QuadratureSpec()


def _model(args) -> MarketModel:
    return MarketModel(
        measure=_measure_from_args(args),
        prim=MarketPrimitives(rho=args.rho, loss=args.loss),
        quad=_quad_spec(args),
    )


def _json_value(v):
    if isinstance(v, float) and math.isnan(v):
        return None
    return v


def _emit_record(record: dict, fmt: str, out: str | None) -> None:
    if fmt == "json":
        text = json.dumps({k: _json_value(v) for k, v in record.items()}, indent=2) + "\n"
    else:
        keys = list(record.keys())
        vals = []
        for k in keys:
            v = _json_value(record[k])
            if v is None:
                vals.append("")
            elif isinstance(v, bool):
                vals.append("true" if v else "false")
            elif isinstance(v, float):
                vals.append(format(v, ".12g"))
            else:
                vals.append(str(v))
        text = ",".join(keys) + "\n" + ",".join(vals) + "\n"
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _report_record(report: OptimumReport) -> dict:
    rec = {
        "regime": report.regime.value,
        "theta_star": report.theta_star,
        "r_star": report.r_star,
        "premium": report.premium,
        "take_up": report.take_up,
        "profit": report.profit,
        "surplus": report.surplus,
        "welfare": report.welfare,
        "elasticity": report.elasticity,
        "cond_mean": report.cond_mean,
        "cond_sd": report.cond_sd,
        "profitable": report.profitable,
        "multimodal": report.multimodal,
    }
    for name, value in report.residuals.items():
        rec[f"residual_{name}"] = value
    return rec


def _cmd_eval(args) -> int:
    if args.theta is None or args.r is None:
        raise DomainError("eval requires --theta and --r (flags or config file)")
    mm = _model(args)
    theta, r = args.theta, args.r
    record = {
        "theta": theta,
        "r": r,
        "premium": mm.avg_profit(theta, r) + r * mm.measure.avg_damage(theta),
        "avg_cost": mm.avg_cost(theta, r),
        "marginal_cost": mm.marginal_cost(theta, r),
        "take_up": mm.measure.survival(theta),
        "profit": mm.profit(theta, r),
    }
    seg = mm.segment_integrals(theta, r) if theta < 1.0 else None
    record["surplus"] = seg.surplus if seg else 0.0
    record["welfare"] = seg.welfare if seg else 0.0
    record["elasticity"] = (
        mm.elasticity(theta, r) if 0.0 < theta < 1.0 and r > 0.0 else math.nan
    )
    if 0.0 < theta < 1.0 and r > 0.0:
        try:
            record["residual_lerner"] = mm.lerner_residual(theta, r)
            record["residual_foc_a"] = mm.foc_residual_a(theta, r)
            record["residual_foc_b"] = mm.foc_residual_b(theta, r)
        except DomainError:
            pass
        record["residual_foc_r"] = mm.foc_residual_r(theta, r)
    _emit_record(record, args.format, args.out)
    return EXIT_OK


def _cmd_optimum(args, regulated: bool) -> int:
    mm = _model(args)
    cfg = _solver_config(args)
    report = regulated_opt(mm, cfg) if regulated else unregulated_opt(mm, cfg)
    _emit_record(_report_record(report), args.format, args.out)
    if not report.profitable:
        print("no profitable contract exists for these parameters", file=sys.stderr)
        return EXIT_NO_PROFIT
    return EXIT_OK


def _cmd_table1(args) -> int:
    cfg = _solver_config(args)
    rows = experiments.run_table1(
        E=args.E if args.E is not None else experiments.BENCHMARK_E,
        Z=args.Z if args.Z is not None else experiments.BENCHMARK_Z,
        loss=args.loss,
        rho_list=args.rho_list,
        cfg=cfg,
    )
    out = args.out or "commrate_table1.csv"
    experiments.write_rows_csv(out, rows)
    deltas = [
        f"rho={row.rho:g}: dr={100 * row.delta_indemnity:+.1f}%"
        for row in rows
        if row.regime == "Regulated" and row.delta_indemnity is not None
    ]
    print(f"wrote {out}; " + "; ".join(deltas))
    return EXIT_OK


def _cmd_sweep_rho(args) -> int:
    cfg = _solver_config(args)
    rho_grid = list(np.linspace(args.rho_min, args.rho_max, args.rho_steps))
    rows = experiments.run_rho_sweep(
        E=args.E if args.E is not None else experiments.BENCHMARK_E,
        Z=args.Z if args.Z is not None else experiments.BENCHMARK_Z,
        loss=args.loss,
        rho_grid=rho_grid,
        cfg=cfg,
    )
    out = args.out or "commrate_rho_sweep.csv"
    experiments.write_rows_csv(out, rows)
    if args.svg:
        series: dict[str, list[float]] = {}
        for tag in ("Unregulated", "Regulated"):
            sub = [r for r in rows if r.regime == tag]
            for name in ("r_star", "premium", "take_up", "profit", "welfare"):
                series[f"{tag[:5].lower()}.{name}"] = [
                    getattr(r, name) if getattr(r, name) is not None else math.nan for r in sub
                ]
        svg = experiments.line_chart_svg(rho_grid, series, "optimal contract vs risk aversion")
        with open(args.svg, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(svg)
    n_missing = sum(1 for r in rows if not r.profitable)
    print(f"wrote {out}; {len(rows)} rows, {n_missing} non-profitable")
    return EXIT_OK


def _cmd_sweep_ez(args) -> int:
    result = experiments.run_ez_sweep(
        rho=args.rho, loss=args.loss, grid_n=args.grid_n, jobs=args.jobs
    )
    out = args.out or "commrate_ez_sweep.csv"
    experiments.write_rows_csv(out, result.rows)
    if args.svg:
        with open(args.svg, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(experiments.heatmap_svg(result))
    n_missing = int(np.sum(np.isnan(result.increase_matrix)))
    if math.isnan(result.max_increase):
        print(f"wrote {out}; no profitable cells ({n_missing} missing)")
    else:
        e_at, z_at = result.argmax_cell
        print(
            f"wrote {out}; max increase = {100 * result.max_increase:.1f}% "
            f"at (E={e_at:.4f}, Z={z_at:.4f}); {n_missing} non-profitable cells"
        )
    return EXIT_OK


def _cmd_verify_conjecture(args) -> int:
    result = experiments.run_conjecture(grid_n=args.grid_n, theta_n=args.theta_n)
    out = args.out or "commrate_conjecture.csv"
    experiments.write_conjecture_csv(out, result)
    status = "PASS" if result.passed else "FAIL"
    print(
        f"wrote {out}; {status}: min second derivative {result.overall_min:.3e} "
        f"over {len(result.cells)} cells (threshold {result.threshold:g})"
    )
    return EXIT_OK if result.passed else EXIT_NO_CONVERGENCE


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="commrate",
        description="single-contract community-rating insurance model",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="price one contract")
    _add_measure_flags(p_eval)
    _add_common_flags(p_eval)
    # not argparse-required so a --config file can supply them; checked below
    p_eval.add_argument("--theta", type=float, default=None, help="cutoff type in [0,1]")
    p_eval.add_argument("--r", type=float, default=None, help="indemnity in [0,loss]")
    p_eval.set_defaults(fn=_cmd_eval)

    for name, regulated in (("unregulated", False), ("regulated", True)):
        p = sub.add_parser(name, help=f"solve the {name} optimum")
        _add_measure_flags(p)
        _add_common_flags(p)
        p.set_defaults(fn=lambda a, _reg=regulated: _cmd_optimum(a, _reg))

    p_t1 = sub.add_parser("table1", help="regime comparison table")
    _add_measure_flags(p_t1)
    _add_common_flags(p_t1)
    p_t1.add_argument(
        "--rho-list",
        type=float,
        nargs="+",
        default=list(experiments.TABLE1_RHO),
        help="risk aversions to compare",
    )
    p_t1.set_defaults(fn=_cmd_table1)

    p_sr = sub.add_parser("sweep-rho", help="sweep risk aversion")
    _add_measure_flags(p_sr)
    _add_common_flags(p_sr)
    p_sr.add_argument("--rho-min", type=float, default=1.0)
    p_sr.add_argument("--rho-max", type=float, default=50.0)
    p_sr.add_argument("--rho-steps", type=int, default=25)
    p_sr.add_argument("--svg", type=str, default=None, help="also write a line chart SVG")
    p_sr.set_defaults(fn=_cmd_sweep_rho)

    p_ez = sub.add_parser("sweep-ez", help="sweep the EZ-square")
    _add_common_flags(p_ez)
    p_ez.add_argument("--grid-n", "--grid-cells", dest="grid_n", type=int, default=64,
                      help="cells per axis (default 64)")
    p_ez.add_argument("--jobs", type=int, default=1, help="worker process count")
    p_ez.add_argument("--svg", type=str, default=None, help="also write a heatmap SVG")
    p_ez.set_defaults(fn=_cmd_sweep_ez)

    p_vc = sub.add_parser("verify-conjecture", help="pool-average convexity check")
    _add_common_flags(p_vc)
    p_vc.add_argument("--grid-n", dest="grid_n", type=int, default=64)
    p_vc.add_argument("--theta-n", dest="theta_n", type=int, default=512)
    p_vc.set_defaults(fn=_cmd_verify_conjecture)
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    if "--config" not in argv:
        return
    path = argv[argv.index("--config") + 1]
    defaults = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            dest = key.strip().replace("-", "_")
            value = value.strip()
            try:
                parsed = json.loads(value)
            except json.JSONDecodeError:
                parsed = value
            defaults[dest] = parsed
    for p in [parser] + [
        sp for action in parser._subparsers._group_actions for sp in action.choices.values()
    ]:
        known = {a.dest for a in p._actions}
        p.set_defaults(**{k: v for k, v in defaults.items() if k in known})


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return args.fn(args)
    except (DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"numerical non-convergence: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
