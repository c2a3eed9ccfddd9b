"""Physical/protocol parameters, vehicle placement, AR channel and timing.

Windows are counted in slots of ``2**-mu`` ms. One reservation period holds
``1000 * 2**mu * rri_s`` slots (100 slots at mu=0, RRI=100 ms).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Optional, Sequence, Union

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigurationError, DomainError

MIN_LANE_GAP_MPS = 3.6
GAIN_FLOOR = 1e-9

SeedLike = Union[int, np.random.Generator, None]


def as_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class ScenarioConfig:
    rsu_range_m: float = 200.0
    bandwidth_hz: float = 20e6
    noise_power: float = 10 ** 0.9  # 9 dB, linear
    pathloss_exp: float = 3.0
    rri_s: float = 0.1
    scs_factor: int = 0
    n_subchannels: int = 4
    n_resources: int = 400
    candidate_pool_mean: Optional[float] = None  # None: N_Sc * (mean window + 1)
    shared_candidates: Optional[float] = None  # None: N_Sc * N_Sh
    bits_per_char: int = 8
    sim_images: int = 100
    sim_similarity_count: int = 100
    w_min_slots: float = 20.0
    w_max_slots: float = 150.0
    t_proc_s: float = 1e-3
    t_frame_align_s: float = 0.468e-3
    t_tx_s: float = 0.5e-3
    t_retx_s: float = 10e-3
    n_retx: int = 1
    t_reeval_s: float = 1.0
    v_min_mps: float = 20.0
    v_max_mps: float = 30.0
    # instance description
    lane_speeds_mps: tuple = (21.4, 25.0, 28.6)
    vehicles_per_lane: int = 1
    tx_power: float = 1e8  # linear, relative to the noise unit
    channel_gain: float = 1.0
    distance_m: Optional[float] = None  # None: R / 2 snapshot
    ar_coeff: float = 0.9
    iss: float = 1.0

    def __post_init__(self):
        positive = (
            "rsu_range_m", "bandwidth_hz", "noise_power", "pathloss_exp", "rri_s",
            "bits_per_char", "t_proc_s", "t_frame_align_s", "t_tx_s", "t_retx_s",
            "t_reeval_s", "v_min_mps", "v_max_mps", "tx_power", "channel_gain",
        )
        for name in positive:
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be a positive finite number, got {value!r}")
        if int(self.scs_factor) != self.scs_factor or self.scs_factor < 0:
            raise ConfigurationError("scs_factor must be a non-negative integer")
        for name in ("n_subchannels", "n_resources", "sim_images", "sim_similarity_count",
                     "vehicles_per_lane"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be a positive integer")
        if int(self.n_retx) != self.n_retx or self.n_retx < 0:
            raise ConfigurationError("n_retx must be a non-negative integer")
        if self.n_resources < self.n_subchannels:
            raise ConfigurationError("n_resources must be at least n_subchannels")
        if not 0 <= self.w_min_slots <= self.w_max_slots:
            raise ConfigurationError(
                f"window box is empty: w_min_slots={self.w_min_slots} > w_max_slots={self.w_max_slots}"
            )
        if self.v_min_mps >= self.v_max_mps:
            raise ConfigurationError("v_min_mps must be below v_max_mps")
        period = 1000 * 2 ** self.scs_factor * self.rri_s
        if abs(period - round(period)) > 1e-9 or round(period) < 1:
            raise ConfigurationError(f"1000*2^mu*RRI must be a positive integer, got {period}")
        if self.distance_m is not None and not 0 < self.distance_m <= self.rsu_range_m:
            raise ConfigurationError("distance_m must lie in (0, rsu_range_m]")
        if not 0 <= self.ar_coeff <= 1:
            raise ConfigurationError("ar_coeff must lie in [0, 1]")
        if not 0 <= self.iss <= 1:
            raise ConfigurationError("iss must lie in [0, 1]")
        for opt in ("candidate_pool_mean", "shared_candidates"):
            value = getattr(self, opt)
            if value is not None and value <= 0:
                raise ConfigurationError(f"{opt} must be positive when given")
        object.__setattr__(self, "lane_speeds_mps", tuple(float(s) for s in self.lane_speeds_mps))
        if not self.lane_speeds_mps:
            raise ConfigurationError("at least one lane speed is required")
        check_lane_spacing(self.lane_speeds_mps)

    @property
    def slot_period_slots(self) -> int:
        return int(round(1000 * 2 ** self.scs_factor * self.rri_s))

    @property
    def slot_s(self) -> float:
        """Duration of one slot in seconds."""
        return 1e-3 / 2 ** self.scs_factor

    @property
    def c_service_s(self) -> float:
        """Window-independent part of the successful-transmission time."""
        return self.t_proc_s + self.t_frame_align_s + self.t_tx_s

    @property
    def snapshot_distance_m(self) -> float:
        return self.distance_m if self.distance_m is not None else self.rsu_range_m / 2

    def ms_to_slots(self, ms: float) -> float:
        return ms * 2 ** self.scs_factor

    def replace(self, **changes) -> "ScenarioConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return ScenarioConfig(**values)


@dataclass(frozen=True)
class Vehicle:
    id: int
    lane_index: int
    speed_mps: float
    tx_power: float
    distance_m: float
    channel_gain: float
    ar_coeff: float = 0.9
    iss: float = 1.0

    def __post_init__(self):
        if not self.speed_mps > 0:
            raise DomainError(f"vehicle {self.id}: speed must be positive")
        if not self.distance_m > 0:
            raise DomainError(f"vehicle {self.id}: distance must be positive")
        if not 0 <= self.ar_coeff <= 1:
            raise DomainError(f"vehicle {self.id}: ar_coeff outside [0, 1]")
        if not 0 <= self.iss <= 1:
            raise DomainError(f"vehicle {self.id}: iss outside [0, 1]")

    def snr(self, cfg: ScenarioConfig) -> float:
        return self.tx_power * self.channel_gain * self.distance_m ** (-cfg.pathloss_exp) / cfg.noise_power

    def spectral_efficiency(self, cfg: ScenarioConfig) -> float:
        return math.log2(1.0 + self.snr(cfg))


@dataclass(frozen=True)
class WindowVector:
    """Per-vehicle selection windows in slots.

    ``real`` is the continuous relaxation used by the solvers; ``slots`` is
    the round-half-up integer view clamped to the box.
    """

    real: np.ndarray = field(repr=False)
    w_min: float
    w_max: float

    def __post_init__(self):
        arr = np.asarray(self.real, dtype=float).copy()
        if arr.ndim != 1:
            raise ConfigurationError("window vector must be one-dimensional")
        if np.any(arr < self.w_min - 1e-9) or np.any(arr > self.w_max + 1e-9):
            raise ConfigurationError(f"window entries outside [{self.w_min}, {self.w_max}]: {arr}")
        arr.setflags(write=False)
        object.__setattr__(self, "real", arr)

    @classmethod
    def clamped(cls, values, cfg: ScenarioConfig) -> "WindowVector":
        return cls(np.clip(np.asarray(values, float), cfg.w_min_slots, cfg.w_max_slots),
                   cfg.w_min_slots, cfg.w_max_slots)

    @property
    def slots(self) -> np.ndarray:
        return np.clip(np.floor(self.real + 0.5), math.ceil(self.w_min), math.floor(self.w_max)).astype(int)

    def seconds(self, cfg: ScenarioConfig) -> np.ndarray:
        return self.real * cfg.slot_s

    def __len__(self):
        return len(self.real)

    def __repr__(self):
        return f"WindowVector({np.array2string(self.real, precision=4)})"


def check_lane_spacing(lane_speeds: Sequence[float]) -> None:
    ordered = sorted(lane_speeds)
    for lo, hi in zip(ordered, ordered[1:]):
        if hi - lo < MIN_LANE_GAP_MPS - 1e-9:
            raise ConfigurationError(
                f"lane speeds {lo} and {hi} differ by less than {MIN_LANE_GAP_MPS} m/s"
            )


def place_vehicles(cfg: ScenarioConfig, lane_speeds: Sequence[float],
                   density: Union[float, Sequence[float]], seed: SeedLike = None) -> list[Vehicle]:
    """Drop vehicles on each lane as a Poisson process over ``[0, R]``.

    ``density`` is vehicles per metre, either one value for all lanes or one
    per lane. Distances to the RSU are the sampled positions, in ``(0, R]``.
    """
    check_lane_spacing(lane_speeds)
    densities = np.broadcast_to(np.asarray(density, dtype=float), (len(lane_speeds),))
    if np.any(densities < 0):
        raise ConfigurationError("density must be non-negative")
    rng = as_rng(seed)
    vehicles = []
    for lane, (speed, lam) in enumerate(zip(lane_speeds, densities)):
        count = int(rng.poisson(lam * cfg.rsu_range_m)) if lam > 0 else 0
        # uniform on (0, R]
        positions = np.sort(cfg.rsu_range_m * (1.0 - rng.random(count)))
        for pos in positions:
            vehicles.append(Vehicle(
                id=len(vehicles), lane_index=lane, speed_mps=float(speed),
                tx_power=cfg.tx_power, distance_m=float(pos), channel_gain=cfg.channel_gain,
                ar_coeff=cfg.ar_coeff, iss=cfg.iss,
            ))
    return vehicles


def lane_speeds_for_mean(cfg: ScenarioConfig, mean_speed: Optional[float] = None) -> tuple:
    """Shift the configured lane speeds so that their mean equals ``mean_speed``."""
    base = np.asarray(cfg.lane_speeds_mps)
    if mean_speed is None:
        return tuple(base)
    return tuple(base - base.mean() + mean_speed)


def snapshot_vehicles(cfg: ScenarioConfig, mean_speed: Optional[float] = None,
                      n_vehicles: Optional[int] = None) -> list[Vehicle]:
    """Deterministic instance: vehicles assigned round-robin to lanes at the
    snapshot distance, with the configured power, gain and similarity."""
    speeds = lane_speeds_for_mean(cfg, mean_speed)
    if n_vehicles is None:
        n_vehicles = len(speeds) * cfg.vehicles_per_lane
    if n_vehicles < 1:
        raise ConfigurationError("optimization needs at least one vehicle")
    return [
        Vehicle(id=i, lane_index=i % len(speeds), speed_mps=speeds[i % len(speeds)],
                tx_power=cfg.tx_power, distance_m=cfg.snapshot_distance_m,
                channel_gain=cfg.channel_gain, ar_coeff=cfg.ar_coeff, iss=cfg.iss)
        for i in range(n_vehicles)
    ]


def channel_step(h_prev: float, rho: float, seed: SeedLike = None) -> float:
    """One step of the real AR(1) channel proxy ``rho*h + e*sqrt(1-rho^2)``."""
    if not 0 <= rho <= 1:
        raise DomainError("rho must lie in [0, 1]")
    e = as_rng(seed).standard_normal()
    return rho * h_prev + e * math.sqrt(1.0 - rho * rho)


def channel_trace(h0: float, rho: float, n_steps: int, seed: SeedLike = None) -> np.ndarray:
    """``n_steps`` successive proxy values starting after ``h0``."""
    if not 0 <= rho <= 1:
        raise DomainError("rho must lie in [0, 1]")
    e = as_rng(seed).standard_normal(n_steps)
    out, _ = lfilter([math.sqrt(1.0 - rho * rho)], [1.0, -rho], e, zi=[rho * h0])
    return out


def gain_from_proxy(h: Union[float, np.ndarray]):
    """Power gain from the Gaussian proxy, floored to keep log2(1 + snr) > 0."""
    return np.maximum(np.square(h), GAIN_FLOOR)


def dwell_time(cfg: ScenarioConfig, v: Vehicle) -> float:
    if v.speed_mps <= 0:
        raise DomainError("dwell time needs a positive speed")
    return cfg.rsu_range_m / v.speed_mps


def per_image_tx_time(cfg: ScenarioConfig, v: Vehicle, payload_bits: float, pr: float) -> float:
    """Average air time of one image's semantic payload."""
    if not 0 < pr <= 1:
        raise DomainError(f"success probability must lie in (0, 1], got {pr}")
    if payload_bits < 0:
        raise DomainError("payload must be non-negative")
    return payload_bits / (cfg.bandwidth_hz * v.spectral_efficiency(cfg) * pr)
