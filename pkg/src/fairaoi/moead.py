"""Decomposition-based multi-objective search over window vectors.

Subproblems come from a Das-Dennis simplex lattice and are scalarised with
the Tchebycheff distance to the ideal point. Offspring come from a pluggable
operator: a genetic blend/mutation, or an external text-completion service
prompted with parent windows and their objective values (with mandatory
fallback to the genetic operator).
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, FairAoiError, InfeasibleRatesError, ParseFailure
from .problem import Problem

log = logging.getLogger(__name__)


# ------------------------------------------------------------------ weights

def das_dennis_lattice(n_obj: int, divisions: int) -> np.ndarray:
    """Integer compositions of ``divisions`` into ``n_obj`` parts."""
    if divisions < 1 or n_obj < 1:
        raise ConfigurationError("need n_obj >= 1 and divisions >= 1")
    points = []
    for bars in itertools.combinations(range(divisions + n_obj - 1), n_obj - 1):
        prev = -1
        parts = []
        for b in bars:
            parts.append(b - prev - 1)
            prev = b
        parts.append(divisions + n_obj - 2 - prev)
        points.append(parts)
    return np.array(points, dtype=int)


def das_dennis(n_obj: int, divisions: int) -> np.ndarray:
    return das_dennis_lattice(n_obj, divisions) / divisions


def divisions_for(n_obj: int, population: int) -> int:
    """Smallest lattice resolution giving at least ``population`` weights."""
    h = 1
    while math.comb(h + n_obj - 1, n_obj - 1) < population:
        h += 1
    return h


@dataclass(frozen=True)
class WeightSet:
    weights: np.ndarray
    neighborhoods: np.ndarray

    @classmethod
    def build(cls, n_obj: int, population: int, neighborhood: int) -> "WeightSet":
        m = das_dennis(n_obj, divisions_for(n_obj, population))
        t = min(neighborhood, len(m))
        dist = np.linalg.norm(m[:, None, :] - m[None, :, :], axis=2)
        nbr = np.argsort(dist, axis=1, kind="stable")[:, :t]
        return cls(m, nbr)

    def __len__(self):
        return len(self.weights)


def tchebycheff(g_vals, m, z_star) -> float:
    g_vals, m, z_star = (np.asarray(x, float) for x in (g_vals, m, z_star))
    if not g_vals.shape == m.shape == z_star.shape:
        raise DomainError("objective, weight and ideal point must have equal length")
    return float(np.max(m * np.abs(g_vals - z_star)))


def dominates(a, b) -> bool:
    return bool(np.all(a <= b) and np.any(a < b))


def non_dominated(objs) -> np.ndarray:
    """Indices of rows not dominated by any other row."""
    f = np.asarray(objs, float)
    le = np.all(f[:, None, :] <= f[None, :, :], axis=2)
    lt = np.any(f[:, None, :] < f[None, :, :], axis=2)
    dominated = np.any(le & lt, axis=0)
    return np.flatnonzero(~dominated)


# --------------------------------------------------------------- operators

class GeneticOperator:
    """SBX-style blend of two parents plus bounded Gaussian mutation."""

    tag = "genetic"

    def __init__(self, box, eta: float = 15.0, mutation_scale: float = 0.05,
                 mutation_prob: Optional[float] = None):
        self.lo, self.hi = box
        self.eta = eta
        self.mutation_scale = mutation_scale
        self.mutation_prob = mutation_prob

    def offspring(self, parents_w, parents_f, rng: np.random.Generator) -> np.ndarray:
        p1, p2 = np.asarray(parents_w[0], float), np.asarray(parents_w[-1], float)
        u = rng.random(p1.size)
        beta = np.where(u <= 0.5, (2 * u) ** (1 / (self.eta + 1)),
                        (1 / (2 * (1 - u))) ** (1 / (self.eta + 1)))
        sign = np.where(rng.random(p1.size) < 0.5, 1.0, -1.0)
        child = 0.5 * (p1 + p2) + sign * 0.5 * beta * (p1 - p2)
        if self.mutation_scale > 0:
            prob = self.mutation_prob if self.mutation_prob is not None else 1.0 / p1.size
            mask = rng.random(p1.size) < prob
            child = child + mask * rng.normal(0.0, self.mutation_scale * (self.hi - self.lo), p1.size)
        return np.clip(child, self.lo, self.hi)


def _fmt(x: float) -> str:
    return f"{x:.6g}"


PROMPT_HEAD = (
    "Task: multi-objective minimisation of vehicle selection windows. "
    "Each data set below gives one vector of window sizes (point) and its objective "
    "values (value): the fairness index differences of every vehicle followed by the AoI. "
    "Every point and every value is enclosed between <begin> and <end>."
)
PROMPT_TAIL = (
    "Propose one new vector of window sizes that differs from all points above and "
    "improves on their objective values. Reply with the vector only, starting with "
    "<begin> and ending with <end>."
)


def build_prompt(points: Sequence[tuple]) -> str:
    """Prompt text for ``[(window vector, objective vector), ...]``."""
    if not points:
        raise DomainError("prompt needs at least one data point")
    blocks = []
    for w, g in points:
        blocks.append(f"point: <begin>{','.join(_fmt(x) for x in w)} <end>")
        blocks.append(f"value: <begin>{','.join(_fmt(x) for x in g)} <end>")
    return "\n\n".join([PROMPT_HEAD, *blocks, PROMPT_TAIL])


def parse_completion(text: str, n: Optional[int] = None, box=None) -> np.ndarray:
    """First ``<begin> ... <end>`` span as a comma-separated vector, clamped to box."""
    start = text.find("<begin>")
    stop = text.find("<end>", start + 7) if start >= 0 else -1
    if start < 0 or stop < 0:
        raise ParseFailure("no <begin>...<end> span")
    body = text[start + 7:stop].strip()
    try:
        values = np.array([float(tok) for tok in body.split(",")], dtype=float)
    except ValueError as exc:
        raise ParseFailure(f"non-numeric entry in {body!r}") from exc
    if not np.all(np.isfinite(values)):
        raise ParseFailure("non-finite entry")
    if n is not None and values.size != n:
        raise ParseFailure(f"expected {n} values, got {values.size}")
    if box is not None:
        values = np.clip(values, box[0], box[1])
    return values


@dataclass
class LlmStats:
    requests: int = 0
    parsed: int = 0
    parse_failures: int = 0
    service_errors: int = 0
    budget_fallbacks: int = 0

    @property
    def fallbacks(self) -> int:
        return self.parse_failures + self.service_errors + self.budget_fallbacks


class LlmOperator:
    """Offspring from a text-completion service.

    Windows are shown to the service in seconds. Every failure path
    (exhausted budget, transport error, unparsable reply) falls back to the
    genetic operator.
    """

    tag = "llm"

    def __init__(self, service, problem: Problem, fallback: GeneticOperator,
                 budget: int = 100):
        self.service = service
        self.slot_s = problem.cfg.slot_s
        self.box = problem.box
        self.fallback = fallback
        self.budget = budget
        self.stats = LlmStats()

    def offspring(self, parents_w, parents_f, rng: np.random.Generator) -> np.ndarray:
        if self.stats.requests >= self.budget:
            self.stats.budget_fallbacks += 1
            return self.fallback.offspring(parents_w, parents_f, rng)
        prompt = build_prompt([(np.asarray(w) * self.slot_s, f) for w, f in zip(parents_w, parents_f)])
        self.stats.requests += 1
        try:
            text = self.service.complete(prompt)
        except Exception as exc:  # transport failures of any kind fall back
            self.stats.service_errors += 1
            log.warning("completion service failed (%s); using genetic offspring", exc)
            return self.fallback.offspring(parents_w, parents_f, rng)
        try:
            w_s = parse_completion(text, len(parents_w[0]),
                                   (self.box[0] * self.slot_s, self.box[1] * self.slot_s))
        except ParseFailure as exc:
            self.stats.parse_failures += 1
            log.info("unparsable completion (%s); using genetic offspring", exc)
            return self.fallback.offspring(parents_w, parents_f, rng)
        self.stats.parsed += 1
        return np.clip(w_s / self.slot_s, *self.box)


# -------------------------------------------------------------- population

@dataclass
class Population:
    w: np.ndarray  # S x N windows in slots
    f: np.ndarray  # S x (N+1) objectives
    z_star: np.ndarray

    def __len__(self):
        return len(self.w)

    def update_ideal(self, g) -> None:
        self.z_star = np.minimum(self.z_star, g)


@dataclass(frozen=True)
class MoeadSettings:
    population: int = 50
    neighborhood: int = 10
    p_near: float = 0.9
    generations: int = 100
    eta: float = 15.0
    mutation_scale: float = 0.05
    obj_cap_factor: float = 2.0
    baseline_window_ms: float = 100.0

    def __post_init__(self):
        if not 0 <= self.p_near <= 1:
            raise ConfigurationError("p_near must lie in [0, 1]")
        if self.population < 1 or self.neighborhood < 1 or self.generations < 0:
            raise ConfigurationError("population, neighborhood and generations must be positive")


@dataclass
class StepStats:
    offspring: int = 0
    discarded: int = 0
    replacements: int = 0


def init_population(problem: Problem, size: int, rng: np.random.Generator,
                    max_tries: int = 100) -> Population:
    lo, hi = problem.box
    ws, fs = [], []
    for _ in range(size):
        for _ in range(max_tries):
            w = rng.uniform(lo, hi, problem.n)
            try:
                fs.append(problem.objectives(w))
            except InfeasibleRatesError:
                continue
            ws.append(w)
            break
        else:
            raise ConfigurationError("could not draw a feasible initial window vector")
    f = np.array(fs)
    return Population(np.array(ws), f, f.min(axis=0))


def evolve_step(pop: Population, weights: WeightSet, op, p_near: float,
                rng: np.random.Generator, problem: Problem) -> StepStats:
    stats = StepStats()
    everyone = np.arange(len(pop))
    for s in range(len(weights)):
        pool = weights.neighborhoods[s] if rng.random() < p_near else everyone
        k = 2 if len(pool) >= 2 else 1
        parents = rng.choice(pool, size=k, replace=False)
        child = op.offspring(pop.w[parents], pop.f[parents], rng)
        stats.offspring += 1
        try:
            g_new = problem.objectives(child)
        except FairAoiError as exc:
            stats.discarded += 1
            log.debug("offspring discarded: %s", exc)
            continue
        pop.update_ideal(g_new)
        for j in weights.neighborhoods[s]:
            m = weights.weights[j]
            if tchebycheff(g_new, m, pop.z_star) <= tchebycheff(pop.f[j], m, pop.z_star):
                pop.w[j] = child
                pop.f[j] = g_new
                stats.replacements += 1
    return stats


@dataclass(frozen=True)
class FinalSelection:
    w: np.ndarray
    objectives: np.ndarray
    index: int
    relaxed: bool


def select_final(pop: Population, obj_caps, age_threshold: float) -> FinalSelection:
    """Lowest-AoI member whose fairness deviations respect ``obj_caps`` and
    whose AoI is at most ``age_threshold``; falls back to the global lowest
    AoI (``relaxed=True``) when nobody qualifies."""
    if len(pop) == 0:
        raise DomainError("empty population")
    caps = np.asarray(obj_caps, float)
    ok = np.all(pop.f[:, :-1] <= caps, axis=1) & (pop.f[:, -1] <= age_threshold)
    relaxed = not ok.any()
    idx = np.arange(len(pop)) if relaxed else np.flatnonzero(ok)
    best = int(idx[np.argmin(pop.f[idx, -1])])
    return FinalSelection(pop.w[best].copy(), pop.f[best].copy(), best, relaxed)


@dataclass
class MoeadResult:
    population: Population
    weights: WeightSet
    pareto: np.ndarray
    final: FinalSelection
    z_history: list = field(default_factory=list)
    discarded: int = 0
    replacements: int = 0


def moead_run(problem: Problem, settings: MoeadSettings = MoeadSettings(), seed: int = 0,
              operator=None, obj_caps=None, age_threshold: Optional[float] = None) -> MoeadResult:
    rng = np.random.default_rng(seed)
    weights = WeightSet.build(problem.n + 1, settings.population, settings.neighborhood)
    op = operator or GeneticOperator(problem.box, settings.eta, settings.mutation_scale)
    pop = init_population(problem, len(weights), rng)
    result = MoeadResult(pop, weights, np.array([], int), None, [pop.z_star.copy()])
    for _ in range(settings.generations):
        st = evolve_step(pop, weights, op, settings.p_near, rng, problem)
        result.discarded += st.discarded
        result.replacements += st.replacements
        result.z_history.append(pop.z_star.copy())
    baseline = problem.objectives(problem.uniform(settings.baseline_window_ms))
    if obj_caps is None:
        obj_caps = settings.obj_cap_factor * baseline[:-1]
    if age_threshold is None:
        age_threshold = baseline[-1]
    result.pareto = non_dominated(pop.f)
    result.final = select_final(pop, obj_caps, age_threshold)
    return result
