"""Brute-force and Monte-Carlo verifiers for the closed forms.

Nothing here imports the formulas it checks; each routine simulates or
enumerates the underlying mechanism directly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .errors import DomainError, InfeasibleRatesError, NoConditioningEvents


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    trials: int

    def __post_init__(self):
        if self.std_error < 0 or self.trials < 1:
            raise DomainError(f"invalid estimate {self}")

    def within(self, reference: float, n_sigma: float = 3.0) -> bool:
        return abs(self.mean - reference) <= n_sigma * self.std_error


def _estimate(samples: np.ndarray) -> McEstimate:
    n = samples.size
    se = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return McEstimate(float(np.mean(samples)), se, int(n))


def _cyclic_overlap_len(start_v, start_j, len_v, len_j, period):
    """Number of common slots of two cyclic windows on a ring of ``period``."""
    len_v, len_j = min(len_v, period), min(len_j, period)
    d = (start_j - start_v) % period
    # window v occupies [0, len_v); window j occupies [d, d+len_j) and its
    # image shifted down by one period
    first = np.maximum(0, np.minimum(len_v, d + len_j) - np.maximum(0, d))
    second = np.maximum(0, np.minimum(len_v, d + len_j - period) - np.maximum(0, d - period))
    return first + second


def _window_draws(w_v, w_j, period, trials, seed):
    if trials < 1:
        raise DomainError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    starts = rng.integers(0, period, size=(2, trials))
    return _cyclic_overlap_len(starts[0], starts[1], int(w_v) + 1, int(w_j) + 1, int(period))


def mc_overlap(w_v, w_j, period_slots, trials, seed=None) -> McEstimate:
    lengths = _window_draws(w_v, w_j, period_slots, trials, seed)
    return _estimate((lengths > 0).astype(float))


def mc_shared(w_v, w_j, period_slots, trials, seed=None) -> McEstimate:
    """Mean overlap length over the trials where the windows overlapped."""
    lengths = _window_draws(w_v, w_j, period_slots, trials, seed)
    hit = lengths[lengths > 0]
    if hit.size == 0:
        raise NoConditioningEvents("no conditioning events: windows never overlapped")
    return _estimate(hit.astype(float))


def mc_collision(w_v, w_j, period_slots, n_subchannels, trials, seed=None,
                 starts: Optional[tuple] = None) -> McEstimate:
    """Two vehicles each pick one (slot, subchannel) uniformly inside their own
    cyclic window; a collision is an identical slot and subchannel.

    ``starts`` pins both window starts instead of drawing them.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    p = int(period_slots)
    if starts is None:
        s = rng.integers(0, p, size=(2, trials))
    else:
        s = np.broadcast_to(np.asarray(starts, dtype=np.int64)[:, None], (2, trials))
    slot_v = (s[0] + rng.integers(0, int(w_v) + 1, trials)) % p
    slot_j = (s[1] + rng.integers(0, int(w_j) + 1, trials)) % p
    sub = rng.integers(0, n_subchannels, size=(2, trials))
    hit = (slot_v == slot_j) & (sub[0] == sub[1])
    return _estimate(hit.astype(float))


# ---------------------------------------------------------------- SHS / CTMC

@njit(cache=True)
def _seeded_exponentials(rate, n, seed):
    np.random.seed(seed)
    out = np.empty(n)
    for i in range(n):
        out[i] = np.random.exponential(1.0 / rate)
    return out


def exponential_draws(rate: float, n: int, seed: int) -> np.ndarray:
    """Draws from the same sampler the CTMC simulation uses."""
    return _seeded_exponentials(float(rate), int(n), int(seed))


@njit(cache=True)
def _shs_kernel(r, h, e, n_events, n_warm, seed):
    np.random.seed(seed)
    n = r.shape[0]
    total_r = 0.0
    for k in range(n):
        total_r += r[k]
    age_rsu = np.zeros(n)
    age_link = np.zeros(n)
    area = np.zeros(n)
    occupancy = np.zeros(n + 1)
    counts = np.zeros(3, np.int64)  # arrivals, successes, re-evaluations
    measured = 0.0
    elapsed = 0.0
    state = 0
    for i in range(n_events):
        if state == 0:
            rate = total_r
        else:
            rate = h[state - 1] + e[state - 1]
        dt = np.random.exponential(1.0 / rate)
        if i >= n_warm:
            for k in range(n):
                area[k] += age_rsu[k] * dt + 0.5 * dt * dt
            occupancy[state] += dt
            measured += dt
        elapsed += dt
        for k in range(n):
            age_rsu[k] += dt
        if state > 0:
            age_link[state - 1] += dt
        u = np.random.random()
        if state == 0:
            target = u * total_r
            acc = 0.0
            nxt = n
            for k in range(n):
                acc += r[k]
                if target < acc:
                    nxt = k + 1
                    break
            state = nxt
            counts[0] += 1
        else:
            k = state - 1
            if u * (h[k] + e[k]) < h[k]:
                age_rsu[k] = age_link[k]
                age_link[k] = 0.0
                state = 0
                counts[1] += 1
            else:
                counts[2] += 1
    return area, occupancy, measured, elapsed, counts


@dataclass(frozen=True)
class ShsEstimate:
    per_link_age: np.ndarray
    occupancy: np.ndarray  # time fractions of states 0..N
    measured_time: float
    elapsed_time: float
    occupancy_time: np.ndarray
    events: int
    transition_counts: tuple  # arrivals, successes, re-evaluations

    @property
    def mean_age(self) -> float:
        return float(np.mean(self.per_link_age))


def simulate_shs_aoi(rates: Sequence, horizon_events: int, seed: int = 0,
                     warmup_frac: float = 0.01) -> ShsEstimate:
    """Event-driven simulation with competing exponential clocks.

    Per target link k the RSU-side age grows with slope one and is replaced by
    the link-k age on a link-k success only; the link-k age grows only while
    the channel is in state k and is zeroed on that success. Re-evaluation
    self-loops consume an event and advance time without any reset. The first
    ``warmup_frac`` of events is excluded from the time averages.
    """
    r = np.array([x.fail_rate for x in rates], float)
    h = np.array([x.service_rate for x in rates], float)
    e = np.array([x.reeval_rate for x in rates], float)
    if np.any(h <= e) or np.any(r <= 0):
        raise InfeasibleRatesError("simulation needs R > 0 and H > E on every link")
    n_warm = int(warmup_frac * horizon_events)
    area, occ, measured, elapsed, counts = _shs_kernel(r, h, e, int(horizon_events), n_warm, int(seed))
    return ShsEstimate(
        per_link_age=area / measured,
        occupancy=occ / measured,
        measured_time=float(measured),
        elapsed_time=float(elapsed),
        occupancy_time=occ,
        events=int(horizon_events),
        transition_counts=tuple(int(c) for c in counts),
    )


# ------------------------------------------------------------ LP enumeration

def lp_vertex_enumeration(c, a_ub, b_ub, tol: float = 1e-9):
    """Minimise ``c @ x`` over ``{x : a_ub @ x <= b_ub}`` by visiting every
    basic feasible point. Exponential cost; intended for a handful of
    variables. Ties go to the lexicographically smallest ``x``.
    """
    c = np.asarray(c, float)
    a = np.asarray(a_ub, float)
    b = np.asarray(b_ub, float)
    n = c.size
    best_x, best_val = None, math.inf
    for rows in itertools.combinations(range(a.shape[0]), n):
        sub = a[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        x = np.linalg.solve(sub, b[list(rows)])
        if np.any(a @ x > b + tol * (1 + np.abs(b))):
            continue
        val = float(c @ x)
        if best_x is None or val < best_val - tol * (1 + abs(best_val)):
            best_x, best_val = x, val
        elif abs(val - best_val) <= tol * (1 + abs(best_val)) and tuple(x) < tuple(best_x):
            best_x = x
    if best_x is None:
        raise DomainError("no feasible vertex")
    return best_x, best_val
