"""Domain types, coordinate projection and spatio-temporal discretization.

Locations live on a square grid of edge ``delta_xy`` meters anchored at a
planar ``grid_origin``; time is one day window cut into bins of
``delta_t`` seconds. A spatio-temporal tuple is the flat triple
``(x, y, t)`` of cell indexes and bin index, which keeps hashing cheap for
the inverted index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple, Optional, Tuple

import numpy as np

from .errors import ConfigError, InvalidInputError

EARTH_RADIUS_M = 6_371_000.0
DAY_SECONDS = 86_400

_RATIO_EPS = 1e-9

Point = Tuple[float, float]


class GridCell(NamedTuple):
    x: int
    y: int


class SpatioTemporalTuple(NamedTuple):
    """One ``(cell, time bin)`` observation, stored flat as ``(x, y, t)``."""

    x: int
    y: int
    t: int

    @property
    def cell(self) -> GridCell:
        return GridCell(self.x, self.y)

    @property
    def bin(self) -> int:
        return self.t


def integer_ratio(coarse: float, fine: float) -> int:
    """Return ``coarse / fine`` if it is a positive integer, else raise ConfigError."""
    ratio = coarse / fine
    rounded = round(ratio)
    if rounded < 1 or abs(ratio - rounded) > _RATIO_EPS * max(1.0, ratio):
        raise ConfigError(f"{coarse} is not an integer multiple of {fine}")
    return int(rounded)


@dataclass(frozen=True)
class DiscretizationConfig:
    """Grid and time-bin layout of a corpus.

    ``grid_origin`` may be left as ``None`` until a corpus is built; the
    builder then anchors the grid at the floor of the corpus minimum.
    """

    delta_xy: float
    delta_t: int
    day_start: int = 0
    day_length: int = DAY_SECONDS
    grid_origin: Optional[Point] = None

    def __post_init__(self):
        if not self.delta_xy > 0:
            raise ConfigError(f"delta_xy must be positive, got {self.delta_xy}")
        if not self.delta_t > 0:
            raise ConfigError(f"delta_t must be positive, got {self.delta_t}")
        if self.day_length <= 0 or self.day_length % self.delta_t != 0:
            raise ConfigError(
                f"day_length {self.day_length} is not a multiple of delta_t {self.delta_t}"
            )
        if self.grid_origin is not None:
            object.__setattr__(
                self, "grid_origin", (float(self.grid_origin[0]), float(self.grid_origin[1]))
            )

    @property
    def num_time_bins(self) -> int:
        return self.day_length // self.delta_t

    @property
    def origin(self) -> Point:
        return self.grid_origin if self.grid_origin is not None else (0.0, 0.0)

    def with_origin(self, origin: Point) -> "DiscretizationConfig":
        return replace(self, grid_origin=origin)

    def coarsened(self, delta_xy: float, delta_t: int) -> "DiscretizationConfig":
        """Return a coarser config sharing this grid origin and day window."""
        integer_ratio(delta_xy, self.delta_xy)
        integer_ratio(delta_t, self.delta_t)
        return replace(self, delta_xy=float(delta_xy), delta_t=int(delta_t))

    def to_dict(self) -> dict:
        return {
            "delta_xy": float(self.delta_xy),
            "delta_t": int(self.delta_t),
            "day_start": int(self.day_start),
            "day_length": int(self.day_length),
            "grid_origin": None if self.grid_origin is None else list(self.grid_origin),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DiscretizationConfig":
        origin = d.get("grid_origin")
        return cls(
            delta_xy=float(d["delta_xy"]),
            delta_t=int(d["delta_t"]),
            day_start=int(d.get("day_start", 0)),
            day_length=int(d.get("day_length", DAY_SECONDS)),
            grid_origin=None if origin is None else tuple(origin),
        )


@dataclass(frozen=True)
class Event:
    user: str
    timestamp: int
    position: Point


@dataclass(frozen=True)
class MobilityTrace:
    """Deduplicated set of tuples generated by one user.

    ``cfg`` is optional; when both sides of a comparison carry one they
    must agree.
    """

    user: str
    tuples: frozenset
    cfg: Optional[DiscretizationConfig] = field(default=None, compare=False)

    def __post_init__(self):
        if not isinstance(self.tuples, frozenset):
            object.__setattr__(self, "tuples", frozenset(self.tuples))
        if not self.tuples:
            raise InvalidInputError(f"trace of user {self.user!r} is empty")

    def __len__(self):
        return len(self.tuples)

    def __iter__(self):
        return iter(self.tuples)

    def __contains__(self, item):
        return item in self.tuples

    def sorted_tuples(self) -> list:
        return sorted(self.tuples)

    def cells(self) -> set:
        return {(x, y) for x, y, _ in self.tuples}

    def bins(self) -> set:
        return {t for _, _, t in self.tuples}


@dataclass(frozen=True)
class Leak:
    """Small set of tuples of unknown ownership; ``true_owner`` is for evaluation only."""

    tuples: frozenset
    true_owner: Optional[str] = None
    cfg: Optional[DiscretizationConfig] = field(default=None, compare=False)

    def __post_init__(self):
        if not isinstance(self.tuples, frozenset):
            object.__setattr__(self, "tuples", frozenset(self.tuples))
        if not self.tuples:
            raise InvalidInputError("a leak needs at least one tuple")

    @property
    def k(self) -> int:
        return len(self.tuples)

    def __len__(self):
        return len(self.tuples)

    def __iter__(self):
        return iter(self.tuples)


def check_same_cfg(a: Optional[DiscretizationConfig], b: Optional[DiscretizationConfig]) -> None:
    if a is not None and b is not None and a != b:
        raise ConfigError(f"discretization mismatch: {a} vs {b}")


def _check_latlon(lat, lon):
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    if not (np.all(np.isfinite(lat)) and np.all(np.isfinite(lon))):
        raise InvalidInputError("non-finite coordinate")
    if np.any(np.abs(lat) > 90) or np.any(np.abs(lon) > 180):
        raise InvalidInputError("latitude must be in [-90, 90] and longitude in [-180, 180]")
    return lat, lon


def project(lat, lon, origin_lat: float, origin_lon: float):
    """Equirectangular projection to planar meters around an origin.

    Works on scalars or arrays. Returns ``(x, y)`` with y pointing north.

    >>> project(46.0, 7.0, 46.0, 7.0)
    (0.0, 0.0)
    """
    _check_latlon(origin_lat, origin_lon)
    lat_a, lon_a = _check_latlon(lat, lon)
    x = EARTH_RADIUS_M * math.cos(math.radians(origin_lat)) * np.radians(lon_a - origin_lon)
    y = EARTH_RADIUS_M * np.radians(lat_a - origin_lat)
    if x.ndim == 0:
        return float(x), float(y)
    return x, y


def unproject(x, y, origin_lat: float, origin_lon: float):
    """Inverse of :func:`project`."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lat = origin_lat + np.degrees(y / EARTH_RADIUS_M)
    lon = origin_lon + np.degrees(x / (EARTH_RADIUS_M * math.cos(math.radians(origin_lat))))
    if lat.ndim == 0:
        return float(lat), float(lon)
    return lat, lon


def discretize_space(p: Point, cfg: DiscretizationConfig) -> GridCell:
    ox, oy = cfg.origin
    return GridCell(
        int(math.floor((p[0] - ox) / cfg.delta_xy)),
        int(math.floor((p[1] - oy) / cfg.delta_xy)),
    )


def discretize_time(ts: float, cfg: DiscretizationConfig) -> int:
    """Index of the time bin holding ``ts``; raises InvalidInputError outside the day window."""
    offset = ts - cfg.day_start
    if offset < 0 or offset >= cfg.day_length:
        raise InvalidInputError(
            f"timestamp {ts} outside day window [{cfg.day_start}, {cfg.day_start + cfg.day_length})"
        )
    return int(offset // cfg.delta_t)


def discretize_space_array(x, y, cfg: DiscretizationConfig):
    ox, oy = cfg.origin
    cx = np.floor((np.asarray(x, dtype=float) - ox) / cfg.delta_xy).astype(np.int64)
    cy = np.floor((np.asarray(y, dtype=float) - oy) / cfg.delta_xy).astype(np.int64)
    return cx, cy


def discretize_time_array(ts, cfg: DiscretizationConfig):
    offset = np.asarray(ts, dtype=np.int64) - cfg.day_start
    if np.any(offset < 0) or np.any(offset >= cfg.day_length):
        raise InvalidInputError("timestamp outside day window")
    return offset // cfg.delta_t


def cell_center(cell, cfg: DiscretizationConfig) -> Point:
    ox, oy = cfg.origin
    return (
        ox + (cell[0] + 0.5) * cfg.delta_xy,
        oy + (cell[1] + 0.5) * cfg.delta_xy,
    )


def coarsening_ratios(from_cfg: DiscretizationConfig, to_cfg: DiscretizationConfig):
    """Integer (space, time) ratios between two compatible configs."""
    if from_cfg.origin != to_cfg.origin:
        raise ConfigError("coarsening requires a shared grid origin")
    if (from_cfg.day_start, from_cfg.day_length) != (to_cfg.day_start, to_cfg.day_length):
        raise ConfigError("coarsening requires the same day window")
    return integer_ratio(to_cfg.delta_xy, from_cfg.delta_xy), integer_ratio(
        to_cfg.delta_t, from_cfg.delta_t
    )


def coarsen(tup, from_cfg: DiscretizationConfig, to_cfg: DiscretizationConfig) -> SpatioTemporalTuple:
    """Map a fine tuple to the coarse tuple that contains it."""
    sr, tr = coarsening_ratios(from_cfg, to_cfg)
    x, y, t = tup
    return SpatioTemporalTuple(x // sr, y // sr, t // tr)


def coarsen_tuples(tuples: Iterable, sr: int, tr: int) -> frozenset:
    if sr == 1 and tr == 1:
        return frozenset(tuples)
    return frozenset((x // sr, y // sr, t // tr) for x, y, t in tuples)


def coarsen_trace(trace: MobilityTrace, to_cfg: DiscretizationConfig, from_cfg=None) -> MobilityTrace:
    from_cfg = from_cfg or trace.cfg
    if from_cfg is None:
        raise ConfigError("source discretization unknown")
    sr, tr = coarsening_ratios(from_cfg, to_cfg)
    return MobilityTrace(trace.user, coarsen_tuples(trace.tuples, sr, tr), to_cfg)


def coarsen_leak(leak: Leak, to_cfg: DiscretizationConfig, from_cfg=None) -> Leak:
    from_cfg = from_cfg or leak.cfg
    if from_cfg is None:
        raise ConfigError("source discretization unknown")
    sr, tr = coarsening_ratios(from_cfg, to_cfg)
    return Leak(coarsen_tuples(leak.tuples, sr, tr), leak.true_owner, to_cfg)
