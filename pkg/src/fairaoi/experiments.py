"""Batch experiments: parameter sweeps, analytic-vs-MC verification, charts.

Sweep CSV schema (one row per grid point, seed and solver)::

    variable, point, seed, solver, status, n_vehicles, windows_slots,
    fairness, deviations, fairness_mean, fairness_range, aoi_s,
    iterations, config_hash, error

List-valued cells are ``;``-joined. Floats are written with 12 significant
digits so reruns compare byte for byte. Verification CSV schema::

    check, case, analytic, mc_mean, mc_se, trials, tolerance, status,
    config_hash, seed
"""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .access import collision_prob, overlap_prob, shared_resources
from .aoi import rates_for_windows, steady_state, mean_aoi
from .config import Settings
from .errors import ConfigurationError, FairAoiError, NoConditioningEvents
from .moead import moead_run
from .oracles import mc_collision, mc_overlap, mc_shared, simulate_shs_aoi
from .problem import Problem
from .sca import sca_run
from .scenario import snapshot_vehicles

log = logging.getLogger(__name__)

SOLVERS = ("sca", "moead", "both", "baseline")
VARIABLES = ("mean-speed", "vehicle-count")
SWEEP_COLUMNS = ["variable", "point", "seed", "solver", "status", "n_vehicles", "windows_slots",
                 "fairness", "deviations", "fairness_mean", "fairness_range", "aoi_s",
                 "iterations", "config_hash", "error"]
VERIFY_COLUMNS = ["check", "case", "analytic", "mc_mean", "mc_se", "trials", "tolerance",
                  "status", "config_hash", "seed"]
LOW_CONFIDENCE_TRIALS = 1000


def fmt(x) -> str:
    if isinstance(x, (list, tuple, np.ndarray)):
        return ";".join(fmt(v) for v in x)
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


def write_csv(path, columns: Sequence[str], rows: Sequence[dict]) -> Path:
    """UTF-8, comma separated, LF line endings, header first."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: fmt(row.get(k, "")) for k in columns})
    path.write_bytes(buf.getvalue().encode("utf-8"))
    return path


# ----------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class SweepSpec:
    variable: str
    points: tuple
    solver: str = "both"
    seeds: int = 1
    out_dir: Optional[str] = None
    base_seed: int = 0

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise ConfigurationError(f"unknown sweep variable {self.variable!r}")
        if self.solver not in SOLVERS:
            raise ConfigurationError(f"unknown solver {self.solver!r}; pick one of {SOLVERS}")
        if len(self.points) == 0:
            raise ConfigurationError("sweep grid is empty")
        if self.seeds < 1:
            raise ConfigurationError("seeds per point must be >= 1")

    @property
    def solvers(self) -> tuple:
        chosen = {"sca": ("sca",), "moead": ("moead",), "both": ("sca", "moead"),
                  "baseline": ()}[self.solver]
        return chosen + ("baseline",)


def build_problem(settings: Settings, variable: str, point) -> Problem:
    cfg = settings.scenario
    if variable == "mean-speed":
        vehicles = snapshot_vehicles(cfg, mean_speed=float(point))
    else:
        vehicles = snapshot_vehicles(cfg, n_vehicles=int(point))
    return Problem.build(cfg, vehicles)


def _row_for(problem: Problem, w, iterations, base: dict) -> dict:
    rep = problem.fairness(w)
    return dict(base, status="ok", n_vehicles=problem.n, windows_slots=np.asarray(w, float),
                fairness=rep.per_vehicle_index, deviations=rep.deviations,
                fairness_mean=rep.network_mean,
                fairness_range=float(np.ptp(rep.per_vehicle_index)),
                aoi_s=problem.aoi(w).mean, iterations=iterations, error="")


def _run_point(task) -> list:
    """One (point, seed) cell; the worker owns its RNG via the seed."""
    settings, spec, point, seed, operator_factory = task
    base = {"variable": spec.variable, "point": point, "seed": seed,
            "config_hash": settings.config_hash()}
    rows = []
    try:
        problem = build_problem(settings, spec.variable, point)
    except FairAoiError as exc:
        return [dict(base, solver=s, status="error", error=str(exc)) for s in spec.solvers]
    for solver in spec.solvers:
        row = dict(base, solver=solver)
        try:
            if solver == "sca":
                st = sca_run(problem, settings=settings.solver)
                rows.append(_row_for(problem, st.w_rounded, st.t, row))
            elif solver == "moead":
                op = operator_factory(problem) if operator_factory else None
                res = moead_run(problem, settings.moead, seed=seed, operator=op)
                rows.append(_row_for(problem, res.final.w, settings.moead.generations, row))
            else:
                w = problem.uniform(settings.sweep.baseline_window_ms)
                rows.append(_row_for(problem, w, 0, row))
        except FairAoiError as exc:
            log.warning("%s failed at %s=%s seed %d: %s", solver, spec.variable, point, seed, exc)
            rows.append(dict(row, status="error", n_vehicles=problem.n, error=str(exc)))
    return rows


def run_sweep(spec: SweepSpec, settings: Settings, workers: Optional[int] = None,
              operator_factory: Optional[Callable] = None) -> list[dict]:
    """Grid points x seeds through the selected solvers plus the baseline.

    Solver failures become ``status=error`` rows. With ``workers > 1`` the
    cells run in a process pool; results are merged in grid order. When
    ``spec.out_dir`` is set the raw CSV and the trend tables are
    written there.
    """
    workers = settings.sweep.workers if workers is None else workers
    tasks = [(settings, spec, p, spec.base_seed + s, operator_factory)
             for p in spec.points for s in range(spec.seeds)]
    if workers > 1 and operator_factory is None:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_point, tasks))
    else:
        chunks = [_run_point(t) for t in tasks]
    rows = [r for chunk in chunks for r in chunk]
    if spec.out_dir is not None:
        out = Path(spec.out_dir)
        stem = "sweep_speed" if spec.variable == "mean-speed" else "sweep_vehicles"
        write_csv(out / f"{stem}.csv", SWEEP_COLUMNS, rows)
        for name, (cols, agg_rows) in trend_tables(rows, spec.variable).items():
            write_csv(out / f"{name}.csv", cols, agg_rows)
    return rows


def _ok(rows, solver):
    return [r for r in rows if r["solver"] == solver and r["status"] == "ok"]


def _mean_by_point(rows, solver, key):
    """Seed-averaged value (scalar or vector) per grid point, in grid order."""
    out = {}
    for r in _ok(rows, solver):
        out.setdefault(r["point"], []).append(np.atleast_1d(np.asarray(r[key], float)))
    return {p: np.mean(np.vstack(v), axis=0) for p, v in out.items()}


def trend_tables(rows: Sequence[dict], variable: str) -> dict:
    """Wide-format aggregates: first column is the swept variable, one
    column per series."""
    solvers = [s for s in ("sca", "moead", "baseline") if _ok(rows, s)]
    points = list(dict.fromkeys(r["point"] for r in rows))
    x_name = "mean_speed_mps" if variable == "mean-speed" else "vehicle_count"

    def table(key, reduce=None, per_vehicle=False, label=""):
        series = {s: _mean_by_point(rows, s, key) for s in solvers}
        cols, out = [x_name], []
        width = 0
        if per_vehicle:
            width = max((len(v) for s in series.values() for v in s.values()), default=0)
            cols += [f"{s}_{label}{i + 1}" for s in solvers for i in range(width)]
        else:
            cols += [f"{s}_{label}" for s in solvers]
        for p in points:
            row = {x_name: p}
            for s in solvers:
                val = series[s].get(p)
                if per_vehicle:
                    for i in range(width):
                        ok = val is not None and i < len(val)
                        row[f"{s}_{label}{i + 1}"] = float(val[i]) if ok else ""
                else:
                    row[f"{s}_{label}"] = float(val[0]) if val is not None else ""
            out.append(row)
        return cols, out

    if variable == "mean-speed":
        return {
            "trend_speed_windows": table("windows_slots", per_vehicle=True, label="w"),
            "trend_speed_fairness": table("fairness", per_vehicle=True, label="g"),
            "trend_speed_aoi": table("aoi_s", label="aoi"),
            "trend_speed_fairness_range": table("fairness_range", label="range"),
        }
    return {
        "trend_vehicles_fairness": table("fairness_mean", label="fairness"),
        "trend_vehicles_aoi": table("aoi_s", label="aoi"),
    }


# ----------------------------------------------------------- verification

@dataclass
class VerifyReport:
    rows: list = field(default_factory=list)

    @property
    def failures(self) -> list:
        return [r for r in self.rows if r["status"] == "fail"]

    @property
    def passed(self) -> bool:
        return not self.failures


def _check(report, check, case, analytic, est_mean, est_se, trials, tol, ok, base):
    low = trials < LOW_CONFIDENCE_TRIALS
    status = "low-confidence" if low else ("pass" if ok else "fail")
    report.rows.append(dict(base, check=check, case=case, analytic=analytic, mc_mean=est_mean,
                            mc_se=est_se, trials=trials, tolerance=tol, status=status))


def run_verify(settings: Settings, trials: int = 1_000_000, seed: int = 0,
               shs_events: Optional[int] = None) -> VerifyReport:
    """Closed forms against Monte-Carlo on the configured scenario.

    Window laws and the composed collision probability use window pairs at
    ``w_min`` and at the widest window for which two windows still fit in one
    period; the AoI check simulates the SHS at the midpoint windows. Runs below ``LOW_CONFIDENCE_TRIALS`` are reported as
    low-confidence and never fail.
    """
    if trials < 1:
        raise ConfigurationError("trials must be >= 1")
    cfg = settings.scenario
    problem = Problem.build(cfg)
    params = problem.params
    period = cfg.slot_period_slots
    lo, hi = problem.box
    mid = 0.5 * (lo + hi)
    # the window laws assume both windows fit in one period without wrapping
    # onto each other twice, i.e. w_v + w_j + 1 <= period
    fit = max(int(math.ceil(lo)), min(int(hi), (period - 1) // 2))
    pairs = [(lo, lo), (lo, fit), (fit, fit)]
    base = {"config_hash": settings.config_hash(), "seed": seed}
    report = VerifyReport()
    # rates are checked first so an H <= E configuration fails cleanly
    rates = rates_for_windows(problem.midpoint(), cfg)
    seeds = np.random.SeedSequence(seed).generate_state(3 * len(pairs) + 1)

    for i, (wv, wj) in enumerate(pairs):
        wv, wj = int(round(wv)), int(round(wj))
        case = f"w=({wv},{wj}) P={period}"
        est = mc_overlap(wv, wj, period, trials, seed=int(seeds[3 * i]))
        ref = float(overlap_prob(wv, wj, params))
        _check(report, "overlap", case, ref, est.mean, est.std_error, trials, "3se",
               est.within(ref, 3.0), base)
        try:
            est = mc_shared(wv, wj, period, trials, seed=int(seeds[3 * i + 1]))
            ref = float(shared_resources(wv, wj))
            _check(report, "shared", case, ref, est.mean, est.std_error, trials, "3se",
                   est.within(ref, 3.0), base)
        except NoConditioningEvents:
            _check(report, "shared", case, float(shared_resources(wv, wj)), float("nan"),
                   float("nan"), 0, "3se", False, base)
        est = mc_collision(wv, wj, period, cfg.n_subchannels, trials, seed=int(seeds[3 * i + 2]))
        ref = float(collision_prob(wv, wj, params))
        _check(report, "collision", case, ref, est.mean, est.std_error, trials, "15%",
               abs(est.mean - ref) <= 0.15 * est.mean, base)

    events = shs_events if shs_events is not None else 10 * trials
    sim = simulate_shs_aoi(rates, events, seed=int(seeds[-1]))
    closed = mean_aoi(rates)
    ss = steady_state(rates)
    for k in range(problem.n):
        case = f"link {k} w={mid:g}"
        ref, got = float(closed.per_link[k]), float(sim.per_link_age[k])
        _check(report, "aoi", case, ref, got, float("nan"), events, "2%",
               abs(got - ref) <= 0.02 * ref, base)
        ref, got = float(ss.pi[k]), float(sim.occupancy[k + 1])
        _check(report, "occupancy", case, ref, got, float("nan"), events, "1%",
               abs(got - ref) <= 0.01 * ref, base)
    return report


# ------------------------------------------------------------------ charts

def read_csv(path) -> tuple[list, list]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return [], []
    return rows[0], rows[1:]


def _as_float(cell: str) -> float:
    try:
        return float(cell)
    except ValueError:
        return math.nan


def emit_charts(csv_path, out_dir) -> list[Path]:
    """One SVG line chart per CSV: first column on x, every numeric column
    after it as its own polyline. A directory argument charts every
    ``trend_*.csv`` inside it. Output is byte-stable across runs."""
    csv_path = Path(csv_path)
    if csv_path.is_dir():
        paths = []
        for p in sorted(csv_path.glob("trend_*.csv")):
            paths += emit_charts(p, out_dir)
        return paths
    header, body = read_csv(csv_path)
    if not header or not body:
        warnings.warn(f"{csv_path} has no data rows; no chart written")
        return []

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    x = np.array([_as_float(r[0]) for r in body])
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context({"svg.hashsalt": "fairaoi", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for j, name in enumerate(header[1:], start=1):
            y = np.array([_as_float(r[j]) if j < len(r) else math.nan for r in body])
            if np.all(np.isnan(y)):
                continue
            ax.plot(x, y, marker="o", label=name)
        ax.set_xlabel(header[0])
        if len(header) == 2:
            ax.set_ylabel(header[1])
        else:
            ax.legend(fontsize="small")
        ax.grid(True, alpha=0.3)
        target = out_dir / f"{csv_path.stem}.svg"
        fig.savefig(target, format="svg", metadata={"Date": None})
        plt.close(fig)
    return [target]
