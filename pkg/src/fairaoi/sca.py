"""Successive convex approximation over the window vector.

Each outer iteration builds first-order models of every per-vehicle fairness
index and of the mean AoI at the current point, solves the resulting linear
program (weighted epigraph form of the absolute deviations, box on the
windows) and moves a damped step towards its solution.

The fairness index is ``K_v * exp(log PR_v)``. Keeping the exponential would
make the two-sided epigraph constraints non-convex, so the exponential is
linearised as well; the subproblem is then an LP. Its slope is
``G_fair^v(w_t) * grad(log PR_v)``. The network mean is the mean of the
per-vehicle affine models, not frozen at ``w_t``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .access import CollisionParams, collision_prob_grad, pairwise_collision, fairness_from_pr
from .errors import (ConfigurationError, DomainError, InfeasibleRatesError,
                     LinearizationDomainError, SolverError, SubproblemError)
from .problem import Problem
from .scenario import ScenarioConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScalarizationWeights:
    lam: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, float)
        if np.any(lam < 0) or not np.any(lam > 0):
            raise ConfigurationError("scalarization weights must be non-negative and not all zero")
        object.__setattr__(self, "lam", lam)

    @classmethod
    def default(cls, problem: Problem, w0) -> "ScalarizationWeights":
        """Fairness terms at 1/N each; AoI term at 1/AoI(w0) so both blocks
        start on a comparable scale."""
        n = problem.n
        return cls(np.append(np.full(n, 1.0 / n), 1.0 / problem.aoi(w0).mean))


def scalarize(obj, lam) -> float:
    obj = np.asarray(obj, float)
    lam = lam.lam if isinstance(lam, ScalarizationWeights) else np.asarray(lam, float)
    if obj.shape != lam.shape:
        raise DomainError(f"objective has {obj.size} entries, weights have {lam.size}")
    return float(obj @ lam)


@dataclass(frozen=True)
class AffineModel:
    value: float
    grad: np.ndarray
    at: np.ndarray

    def __call__(self, w) -> float:
        return float(self.value + self.grad @ (np.asarray(w, float) - self.at))

    @property
    def offset(self) -> float:
        """Constant term once written as ``offset + grad @ w``."""
        return float(self.value - self.grad @ self.at)


def linearize_log_pr(w_t, v: int, p: CollisionParams) -> AffineModel:
    w_t = np.asarray(w_t, float)
    delta = pairwise_collision(w_t, p)
    row = np.delete(delta[v], v)
    if np.any(row >= 1.0):
        raise LinearizationDomainError(f"vehicle {v}: collision probability reached one")
    grad = np.zeros_like(w_t)
    others = [j for j in range(w_t.size) if j != v]
    if others:
        d_v, d_j = collision_prob_grad(w_t[v], w_t[others], p)
        scale = -1.0 / (1.0 - delta[v, others])
        grad[v] = np.sum(scale * d_v)  # a_{v,j} summed over j
        grad[others] = scale * d_j  # b_{v,j}
    return AffineModel(float(np.sum(np.log1p(-row))), grad, w_t.copy())


def linearize_fairness(problem: Problem, w_t, v: int) -> AffineModel:
    lp = linearize_log_pr(w_t, v, problem.params)
    g = fairness_from_pr(problem.vehicles[v], math.exp(lp.value), problem.cfg)
    return AffineModel(g, g * lp.grad, lp.at)


def aoi_value_and_grad(w, cfg: ScenarioConfig):
    """Mean closed-form AoI and its gradient with respect to windows in slots.

    Per link, with ``x`` the window in seconds, ``c1 = t_p + t_fa + t_t``,
    ``c2 = c1 + n*T_r`` and ``c3 = E``:
    ``A1 = (x + c2)(1 - c3 (x + c1))`` equals ``(H - E)/(H R)``,
    ``u = (x + c1)/A1`` equals ``R/(H - E)`` and
    ``m = 1 - c3 (x + c1)`` gives ``1/(H - E) = (x + c1)/m``.
    Then ``AoI_k = A1_k * N_F + sum(u v)/N_F`` with ``N_F = 1 + sum(u)``.
    """
    x = np.asarray(w, float) * cfg.slot_s
    c1 = cfg.c_service_s
    c2 = c1 + cfg.n_retx * cfg.t_retx_s
    c3 = 1.0 / cfg.t_reeval_s
    m = 1.0 - c3 * (x + c1)
    if np.any(m <= 0):
        k = int(np.flatnonzero(m <= 0)[0])
        raise InfeasibleRatesError(f"link {k}: H <= E at window {w[k]}", link=k)
    a1 = (x + c2) * m
    da1 = m - c3 * (x + c2)
    u = (x + c1) / a1
    du = (a1 - (x + c1) * da1) / a1 ** 2
    v = (x + c1) / m
    dv = 1.0 / m ** 2
    nf = 1.0 + u.sum()
    s = np.sum(u * v)
    n = x.size
    value = a1.mean() * nf + s / nf
    grad = da1 / n * nf + a1.mean() * du + ((du * v + u * dv) * nf - s * du) / nf ** 2
    return float(value), grad * cfg.slot_s


def linearize_aoi(w_t, cfg: ScenarioConfig) -> AffineModel:
    value, grad = aoi_value_and_grad(w_t, cfg)
    return AffineModel(value, grad, np.asarray(w_t, float).copy())


@dataclass(frozen=True)
class LinearizedModel:
    fairness: tuple
    aoi: AffineModel
    at: np.ndarray

    @classmethod
    def build(cls, problem: Problem, w_t) -> "LinearizedModel":
        w_t = np.asarray(w_t, float)
        fair = tuple(linearize_fairness(problem, w_t, v) for v in range(problem.n))
        return cls(fair, linearize_aoi(w_t, problem.cfg), w_t.copy())

    def deviation_terms(self):
        """``(offsets, slopes)`` of ``G_fair^v - mean`` as affine functions of w."""
        offsets = np.array([m.offset for m in self.fairness])
        slopes = np.array([m.grad for m in self.fairness])
        return offsets - offsets.mean(), slopes - slopes.mean(axis=0)

    def lp_data(self, lam):
        """LP in ``x = [w, z]``: cost, A_ub, b_ub (without bounds)."""
        lam = lam.lam if isinstance(lam, ScalarizationWeights) else np.asarray(lam, float)
        n = self.at.size
        offsets, slopes = self.deviation_terms()
        eye = np.eye(n)
        a_ub = np.block([[slopes, -eye], [-slopes, -eye]])
        b_ub = np.concatenate([-offsets, offsets])
        cost = np.concatenate([lam[-1] * self.aoi.grad, lam[:n]])
        return cost, a_ub, b_ub


@dataclass(frozen=True)
class SubproblemSolution:
    w: np.ndarray
    z: np.ndarray
    value: float


def solve_subproblem(model: LinearizedModel, lam, box, max_iter: int = 10_000,
                     tol: float = 1e-8) -> SubproblemSolution:
    """Solve the per-iteration LP; degenerate optima resolve to the
    lexicographically smallest window vector."""
    lo, hi = box
    if lo > hi:
        raise ConfigurationError(f"window box is empty: [{lo}, {hi}]")
    cost, a_ub, b_ub = model.lp_data(lam)
    n = model.at.size
    bounds = [(lo, hi)] * n + [(0, None)] * n
    opts = {"maxiter": max_iter, "primal_feasibility_tolerance": tol,
            "dual_feasibility_tolerance": tol}

    def run(c, a, b, bnds, options):
        res = linprog(c, A_ub=a, b_ub=b, bounds=bnds, method="highs", options=options)
        if res.status != 0:
            raise SubproblemError(f"subproblem solver stopped: {res.message}")
        return res

    res = run(cost, a_ub, b_ub, bounds, opts)
    # tie-break passes: pin the optimal value, then minimise w_1, w_2, ... in
    # turn; the tight tolerance keeps near-ties from drifting off the vertex
    tight = dict(opts, primal_feasibility_tolerance=1e-10, dual_feasibility_tolerance=1e-10)
    a_lex = np.vstack([a_ub, cost])
    b_lex = np.append(b_ub, res.fun)
    x = res.x
    for i in range(n):
        c = np.zeros(2 * n)
        c[i] = 1.0
        try:
            x = run(c, a_lex, b_lex, bounds, tight).x
        except SubproblemError:
            break  # pinned row numerically infeasible; keep the last optimum
        bounds[i] = (x[i], x[i])
    w = np.clip(x[:n], lo, hi)
    return SubproblemSolution(w, x[n:], float(cost @ x))


@dataclass
class ScaState:
    t: int
    w: np.ndarray
    objective: float
    z: np.ndarray
    converged: bool
    w_trace: list = field(default_factory=list)
    objective_trace: list = field(default_factory=list)
    step_norms: list = field(default_factory=list)
    w_rounded: Optional[np.ndarray] = None
    objective_rounded: Optional[float] = None
    lam: Optional[np.ndarray] = None


@dataclass(frozen=True)
class ScaSettings:
    eps: float = 0.01
    g_max: int = 5000
    beta: float = 0.2
    lam: Optional[tuple] = None
    subproblem_max_iter: int = 10_000

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ConfigurationError("beta must lie in (0, 1]")
        if self.eps <= 0 or self.g_max < 1:
            raise ConfigurationError("eps must be positive and g_max at least 1")


def round_windows(w, box) -> np.ndarray:
    lo, hi = box
    return np.clip(np.floor(np.asarray(w, float) + 0.5), math.ceil(lo), math.floor(hi))


def sca_run(problem: Problem, lam=None, w0=None, settings: ScaSettings = ScaSettings()) -> ScaState:
    box = problem.box
    w = problem.midpoint() if w0 is None else np.asarray(w0, float).copy()
    if w.size != problem.n or np.any(w < box[0] - 1e-12) or np.any(w > box[1] + 1e-12):
        raise ConfigurationError("initial windows must lie inside the box")
    if lam is None:
        lam = ScalarizationWeights(settings.lam) if settings.lam is not None \
            else ScalarizationWeights.default(problem, w)
    elif not isinstance(lam, ScalarizationWeights):
        lam = ScalarizationWeights(lam)

    iterates = [w.copy()]

    def true_objective(x):
        try:
            return scalarize(problem.objectives(x), lam)
        except InfeasibleRatesError as exc:
            raise SolverError(f"infeasible rates at iterate {len(iterates) - 1}: {exc}", iterates) from exc

    state = ScaState(0, w, true_objective(w), problem.fairness(w).deviations, False, lam=lam.lam)
    state.w_trace.append(w.copy())
    state.objective_trace.append(state.objective)
    for t in range(settings.g_max):
        try:
            model = LinearizedModel.build(problem, w)
        except InfeasibleRatesError as exc:
            raise SolverError(f"infeasible rates at iterate {t}: {exc}", iterates) from exc
        sub = solve_subproblem(model, lam, box, settings.subproblem_max_iter)
        w_next = settings.beta * sub.w + (1.0 - settings.beta) * w
        step = float(np.linalg.norm(w_next - w))
        w = w_next
        iterates.append(w.copy())
        state.t = t + 1
        state.w = w
        state.objective = true_objective(w)
        state.z = problem.fairness(w).deviations
        state.w_trace.append(w.copy())
        state.objective_trace.append(state.objective)
        state.step_norms.append(step)
        if step <= settings.eps:
            state.converged = True
            break
    else:
        log.warning("SCA stopped at g_max=%d without converging", settings.g_max)
    state.w_rounded = round_windows(w, box)
    state.objective_rounded = true_objective(state.w_rounded)
    return state
