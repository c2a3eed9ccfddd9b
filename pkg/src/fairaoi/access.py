"""Mode 2 collision chain and the per-vehicle fairness index.

Window geometry is cyclic within one reservation period: each window start is
uniform over the period with wrap-around. Under that placement the overlap
probability and the conditional shared-slot count below are exact (the
oracles module checks both by simulation).

When not configured explicitly, the shared-candidate count defaults to
``N_Sc * N_Sh`` and the candidate-pool mean to ``N_Sc * (mean window + 1)``.
The number of resources ``N_r`` has no published value; 400 is the shipped
default.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, ModelInconsistencyError
from .scenario import ScenarioConfig, Vehicle

DELTA_CAP = 1.0 - 1e-9


@dataclass(frozen=True)
class CollisionParams:
    period_slots: int
    n_subchannels: int
    n_resources: int
    candidate_pool_mean: Optional[float] = None
    shared_candidates: Optional[float] = None

    def __post_init__(self):
        if self.period_slots < 1 or self.n_subchannels < 1 or self.n_resources < self.n_subchannels:
            raise DomainError(f"inconsistent collision parameters: {self}")
        if self.candidate_pool_mean is not None and self.candidate_pool_mean < 1:
            raise DomainError("candidate_pool_mean must be >= 1")

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> "CollisionParams":
        return cls(cfg.slot_period_slots, cfg.n_subchannels, cfg.n_resources,
                   cfg.candidate_pool_mean, cfg.shared_candidates)


@dataclass(frozen=True)
class FairnessReport:
    per_vehicle_index: np.ndarray
    network_mean: float
    deviations: np.ndarray


def overlap_prob(w_v, w_j, p: CollisionParams):
    return np.minimum(1.0, (np.asarray(w_v) + np.asarray(w_j) + 1.0) / p.period_slots)


def shared_resources(w_v, w_j):
    w_v, w_j = np.asarray(w_v, float), np.asarray(w_j, float)
    if np.any(w_v < 0) or np.any(w_j < 0):
        raise DomainError("window sizes must be non-negative")
    return (w_v + 1.0) * (w_j + 1.0) / (w_v + w_j + 1.0)


def p_shared_given_overlap(n_sh, p: CollisionParams):
    ratio = p.n_subchannels * np.asarray(n_sh, float) / p.n_resources
    if np.any(ratio > 1.0 + 1e-12):
        raise ModelInconsistencyError(
            f"N_Sc*N_Sh = {p.n_subchannels * np.max(n_sh):.4g} exceeds N_r = {p.n_resources}"
        )
    return ratio ** 2


def _candidate_terms(w_v, w_j, n_sh, p: CollisionParams):
    c_ca = p.shared_candidates if p.shared_candidates is not None else p.n_subchannels * n_sh
    n_ca = (p.candidate_pool_mean if p.candidate_pool_mean is not None
            else p.n_subchannels * ((w_v + w_j) / 2.0 + 1.0))
    return c_ca, n_ca


def collision_prob(w_v, w_j, p: CollisionParams):
    """Pairwise collision probability, clamped to ``[0, 1 - 1e-9]``."""
    w_v, w_j = np.asarray(w_v, float), np.asarray(w_j, float)
    n_sh = shared_resources(w_v, w_j)
    c_ca, n_ca = _candidate_terms(w_v, w_j, n_sh, p)
    delta = overlap_prob(w_v, w_j, p) * p_shared_given_overlap(n_sh, p) * c_ca / n_ca ** 2
    return np.clip(delta, 0.0, DELTA_CAP)


def collision_prob_grad(w_v, w_j, p: CollisionParams):
    """Analytic ``(d delta/d w_v, d delta/d w_j)``.

    Kinks (overlap clamp at one, delta cap) take the one-sided derivative of
    the active branch.
    """
    w_v, w_j = np.asarray(w_v, float), np.asarray(w_j, float)
    a, b = w_v + 1.0, w_j + 1.0
    s = a + b - 1.0
    n_sh = a * b / s
    dnsh_da = b * (b - 1.0) / s ** 2
    dnsh_db = a * (a - 1.0) / s ** 2

    raw_po = s / p.period_slots
    po = np.minimum(1.0, raw_po)
    dpo = np.where(raw_po < 1.0, 1.0 / p.period_slots, 0.0)

    k = p.n_subchannels / p.n_resources
    psh = (k * n_sh) ** 2
    c_ca, n_ca = _candidate_terms(w_v, w_j, n_sh, p)
    if p.shared_candidates is None:
        dc_da, dc_db = p.n_subchannels * dnsh_da, p.n_subchannels * dnsh_db
    else:
        dc_da = dc_db = 0.0
    dn = p.n_subchannels / 2.0 if p.candidate_pool_mean is None else 0.0
    frac = c_ca / n_ca ** 2

    def partial(dnsh, dc):
        dpsh = 2.0 * k * k * n_sh * dnsh
        dfrac = dc / n_ca ** 2 - 2.0 * c_ca * dn / n_ca ** 3
        return dpo * psh * frac + po * dpsh * frac + po * psh * dfrac

    capped = po * psh * frac >= DELTA_CAP
    d_v = np.where(capped, 0.0, partial(dnsh_da, dc_da))
    d_w = np.where(capped, 0.0, partial(dnsh_db, dc_db))
    return d_v, d_w


def pairwise_collision(w, p: CollisionParams) -> np.ndarray:
    """Symmetric matrix of delta_{v,j}; zero diagonal."""
    w = np.asarray(w, float)
    d = collision_prob(w[:, None], w[None, :], p)
    np.fill_diagonal(d, 0.0)
    return d


def success_prob(v: int, w, p: CollisionParams) -> float:
    d = pairwise_collision(w, p)
    others = np.delete(d[v], v)
    return float(np.prod(1.0 - others))


def success_probs(w, p: CollisionParams) -> np.ndarray:
    d = pairwise_collision(w, p)
    return np.prod(1.0 - d, axis=1)


def fairness_from_pr(vehicle: Vehicle, pr: float, cfg: ScenarioConfig) -> float:
    if vehicle.speed_mps <= 0:
        raise DomainError("fairness index needs a positive speed")
    return vehicle.iss * vehicle.spectral_efficiency(cfg) * pr / vehicle.speed_mps


def fairness_indices(vehicles: Sequence[Vehicle], w, cfg: ScenarioConfig,
                     p: CollisionParams) -> np.ndarray:
    pr = success_probs(w, p)
    return np.array([fairness_from_pr(veh, pr_v, cfg) for veh, pr_v in zip(vehicles, pr)])


def fairness_index(v: int, vehicles: Sequence[Vehicle], w, cfg: ScenarioConfig,
                   p: CollisionParams) -> float:
    return fairness_from_pr(vehicles[v], success_prob(v, w, p), cfg)


def fairness_report(vehicles: Sequence[Vehicle], w, cfg: ScenarioConfig,
                    p: CollisionParams) -> FairnessReport:
    if len(vehicles) < 1:
        raise DomainError("fairness report needs at least one vehicle")
    g = fairness_indices(vehicles, w, cfg, p)
    mean = float(np.mean(g))
    return FairnessReport(g, mean, np.abs(g - mean))


def report_from_indices(indices) -> FairnessReport:
    g = np.asarray(indices, float)
    mean = float(np.mean(g))
    return FairnessReport(g, mean, np.abs(g - mean))
