"""Closed-form Age of Information of the shared-channel hybrid system.

Discrete states: 0 (idle) and k = 1..N (link k busy). Idle -> k at the
failure/retransmission rate R_k, k -> idle at the service rate H_k, and a
re-evaluation self-loop on k at rate E_k. The closed forms below carry E_k as
``H_k - E_k`` wherever the service rate appears.

Note on the published reset table: the row for ``1 -> 0`` lists the reset
matrix [[0, 1], [1, 0]] while the row for ``N -> 0`` lists [[1, 0], [1, 1]].
The two disagree with each other and with the transition narrative. This
module follows the narrative: only a link-k success copies the link-k age
into the RSU age and zeroes the link-k age; successes on other links leave
link k's pair untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InfeasibleRatesError
from .scenario import ScenarioConfig


@dataclass(frozen=True)
class RateTriple:
    fail_rate: float
    service_rate: float
    reeval_rate: float

    def __post_init__(self):
        if min(self.fail_rate, self.service_rate, self.reeval_rate) <= 0:
            raise InfeasibleRatesError(f"rates must be positive: {self}")


@dataclass(frozen=True)
class SteadyState:
    pi0: float
    pi: np.ndarray
    norm_factor: float


@dataclass(frozen=True)
class QBar:
    """Steady-state correlations for one target link k."""

    q00: float
    q01: float
    qk1: float
    qs0: np.ndarray


@dataclass(frozen=True)
class AoiReport:
    per_link: np.ndarray
    mean: float


def rates_from_window(w_slots: float, cfg: ScenarioConfig, link=None) -> RateTriple:
    w_s = w_slots * cfg.slot_s
    t_success = w_s + cfg.c_service_s
    h = 1.0 / t_success
    r = 1.0 / (t_success + cfg.n_retx * cfg.t_retx_s)
    e = 1.0 / cfg.t_reeval_s
    if h <= e:
        raise InfeasibleRatesError(
            f"link {link}: service rate {h:.4g}/s does not exceed re-evaluation rate {e:.4g}/s "
            f"(window {w_slots} slots)", link=link)
    return RateTriple(r, h, e)


def rates_for_windows(w, cfg: ScenarioConfig) -> list[RateTriple]:
    return [rates_from_window(float(x), cfg, link=i) for i, x in enumerate(np.asarray(w, float))]


def _arrays(rates: Sequence[RateTriple]):
    r = np.array([x.fail_rate for x in rates], float)
    h = np.array([x.service_rate for x in rates], float)
    e = np.array([x.reeval_rate for x in rates], float)
    bad = np.flatnonzero(h <= e)
    if bad.size:
        raise InfeasibleRatesError(f"link {bad[0]}: H <= E", link=int(bad[0]))
    return r, h, e


def steady_state(rates: Sequence[RateTriple]) -> SteadyState:
    r, h, e = _arrays(rates)
    nf = 1.0 + np.sum(r / (h - e))
    return SteadyState(1.0 / nf, r / (nf * (h - e)), float(nf))


def q_bar(k: int, rates: Sequence[RateTriple]) -> QBar:
    r, h, e = _arrays(rates)
    ss = steady_state(rates)
    q00 = (h[k] - e[k]) / (h[k] * r[k])
    qs0 = (ss.pi + r * q00) / (h - e)
    return QBar(q00=float(q00), q01=0.0, qk1=float(ss.pi[k] / (h[k] - e[k])), qs0=qs0)


def link_aoi(k: int, rates: Sequence[RateTriple]) -> float:
    q = q_bar(k, rates)
    return float(q.q00 + np.sum(q.qs0))


def mean_aoi(rates: Sequence[RateTriple]) -> AoiReport:
    r, h, e = _arrays(rates)
    nf = 1.0 + np.sum(r / (h - e))
    pi = r / (nf * (h - e))
    tail = np.sum(pi / (h - e))
    per_link = (h - e) / (h * r) * nf + tail
    return AoiReport(per_link, float(np.mean(per_link)))


def mean_aoi_for_windows(w, cfg: ScenarioConfig) -> float:
    return mean_aoi(rates_for_windows(w, cfg)).mean
