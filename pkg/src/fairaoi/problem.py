"""Exact objective vector shared by both solvers.

``G(w) = [|G_fair^1 - mean|, ..., |G_fair^N - mean|, mean AoI]``, evaluated
with the exact collision chain and closed-form AoI, never a linearisation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .access import CollisionParams, FairnessReport, fairness_report
from .aoi import AoiReport, mean_aoi, rates_for_windows
from .errors import ConfigurationError
from .scenario import ScenarioConfig, Vehicle, snapshot_vehicles


@dataclass(frozen=True)
class Problem:
    cfg: ScenarioConfig
    vehicles: tuple
    params: CollisionParams

    @classmethod
    def build(cls, cfg: ScenarioConfig, vehicles: Sequence[Vehicle] = None) -> "Problem":
        if vehicles is None:
            vehicles = snapshot_vehicles(cfg)
        if len(vehicles) == 0:
            raise ConfigurationError("no vehicles under RSU coverage; nothing to optimise")
        return cls(cfg, tuple(vehicles), CollisionParams.from_config(cfg))

    @property
    def n(self) -> int:
        return len(self.vehicles)

    @property
    def box(self) -> tuple:
        return self.cfg.w_min_slots, self.cfg.w_max_slots

    def midpoint(self) -> np.ndarray:
        lo, hi = self.box
        return np.full(self.n, 0.5 * (lo + hi))

    def uniform(self, window_ms: float) -> np.ndarray:
        return np.full(self.n, self.cfg.ms_to_slots(window_ms))

    def fairness(self, w) -> FairnessReport:
        return fairness_report(self.vehicles, w, self.cfg, self.params)

    def aoi(self, w) -> AoiReport:
        return mean_aoi(rates_for_windows(w, self.cfg))

    def objectives(self, w) -> np.ndarray:
        w = np.asarray(w, float)
        aoi = self.aoi(w).mean
        return np.append(self.fairness(w).deviations, aoi)
