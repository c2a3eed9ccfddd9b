"""Command-line entry point: ``fairaoi <subcommand> [options]``.

Exit codes: 0 success, 1 verification failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .completion import HttpCompletionService
from .config import Settings, load_settings
from .errors import ConfigurationError, FairAoiError, InfeasibleRatesError
from .moead import GeneticOperator, LlmOperator, moead_run
from .problem import Problem
from .sca import sca_run

log = logging.getLogger("fairaoi")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG = 0, 1, 2


def _llm_factory(settings: Settings, endpoint):
    endpoint = endpoint or settings.llm.endpoint
    if not endpoint:
        return None

    def factory(problem: Problem):
        service = HttpCompletionService(endpoint, settings.llm.model,
                                        timeout_s=settings.llm.timeout_s)
        fallback = GeneticOperator(problem.box, settings.moead.eta, settings.moead.mutation_scale)
        return LlmOperator(service, problem, fallback, settings.llm.budget)

    return factory


def cmd_verify(args, settings: Settings) -> int:
    report = ex.run_verify(settings, trials=args.trials, seed=args.seed)
    for r in report.rows:
        print(f"{r['status']:>14}  {r['check']:<10} {r['case']:<22} "
              f"analytic={r['analytic']:.6g} mc={r['mc_mean']:.6g} tol={r['tolerance']}")
    if args.out:
        path = ex.write_csv(Path(args.out) / "verify.csv", ex.VERIFY_COLUMNS, report.rows)
        print(f"wrote {path}")
    if report.passed:
        return EXIT_OK
    print(f"{len(report.failures)} check(s) failed", file=sys.stderr)
    return EXIT_VERIFY


def _cmd_sweep(args, settings: Settings, variable: str) -> int:
    points = settings.sweep.speeds_mps if variable == "mean-speed" else settings.sweep.vehicle_counts
    spec = ex.SweepSpec(variable, tuple(points), solver=args.solver, seeds=settings.sweep.seeds,
                        out_dir=args.out, base_seed=args.seed)
    rows = ex.run_sweep(spec, settings, operator_factory=_llm_factory(settings, args.llm_endpoint))
    for r in rows:
        aoi = f"{r['aoi_s']:.5g}" if r["status"] == "ok" else r["error"]
        print(f"{variable}={r['point']} seed={r['seed']} {r['solver']:<8} {r['status']:<5} aoi={aoi}")
    if args.out:
        print(f"wrote results to {args.out}")
    return EXIT_OK


def cmd_optimize_sca(args, settings: Settings) -> int:
    problem = Problem.build(settings.scenario)
    st = sca_run(problem, settings=settings.solver)
    print(f"iterations={st.t} converged={st.converged}")
    print("windows_slots=" + ex.fmt(st.w_rounded))
    print(f"objective={st.objective_rounded:.8g} aoi_s={problem.aoi(st.w_rounded).mean:.8g}")
    if args.out:
        row = {"seed": args.seed, "iterations": st.t, "converged": st.converged,
               "windows_slots": st.w_rounded, "objective": st.objective_rounded,
               "aoi_s": problem.aoi(st.w_rounded).mean, "config_hash": settings.config_hash()}
        ex.write_csv(Path(args.out) / "optimize_sca.csv", list(row), [row])
    return EXIT_OK


def cmd_optimize_moead(args, settings: Settings) -> int:
    problem = Problem.build(settings.scenario)
    factory = _llm_factory(settings, args.llm_endpoint)
    op = factory(problem) if factory else None
    res = moead_run(problem, settings.moead, seed=args.seed, operator=op)
    f = res.final
    print(f"pareto_size={len(res.pareto)} relaxed={f.relaxed}")
    print("windows_slots=" + ex.fmt(f.w))
    print(f"aoi_s={f.objectives[-1]:.8g} deviations={ex.fmt(f.objectives[:-1])}")
    if op is not None:
        s = op.stats
        print(f"llm requests={s.requests} parsed={s.parsed} fallbacks={s.fallbacks}")
    if args.out:
        row = {"seed": args.seed, "windows_slots": f.w, "deviations": f.objectives[:-1],
               "aoi_s": f.objectives[-1], "relaxed": f.relaxed, "pareto_size": len(res.pareto),
               "config_hash": settings.config_hash()}
        ex.write_csv(Path(args.out) / "optimize_moead.csv", list(row), [row])
    return EXIT_OK


def cmd_charts(args, settings: Settings) -> int:
    written = ex.emit_charts(args.csv, args.out or ".")
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file overlaid on the bundled defaults")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="fairaoi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="closed forms vs Monte-Carlo")
    p.add_argument("--trials", type=int, default=1_000_000)
    p.set_defaults(func=cmd_verify)

    for name, variable in (("sweep-speed", "mean-speed"), ("sweep-vehicles", "vehicle-count")):
        p = sub.add_parser(name, parents=[common], help=f"sweep over {variable}")
        p.add_argument("--solver", choices=ex.SOLVERS, default="both")
        p.add_argument("--llm-endpoint")
        p.set_defaults(func=lambda a, s, v=variable: _cmd_sweep(a, s, v))

    p = sub.add_parser("optimize-sca", parents=[common], help="SCA on the configured instance")
    p.set_defaults(func=cmd_optimize_sca)

    p = sub.add_parser("optimize-moead", parents=[common], help="MOEA/D on the configured instance")
    p.add_argument("--llm-endpoint")
    p.set_defaults(func=cmd_optimize_moead)

    p = sub.add_parser("charts", parents=[common], help="SVG line charts from CSV")
    p.add_argument("csv", help="CSV file, or a directory of trend_*.csv files")
    p.set_defaults(func=cmd_charts)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        settings = load_settings(args.config)
        return args.func(args, settings)
    except (ConfigurationError, InfeasibleRatesError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FairAoiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
