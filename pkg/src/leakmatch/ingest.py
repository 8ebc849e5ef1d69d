"""Raw event loading, site merging, trace construction and synthetic corpora.

Raw events are CSV with header ``user_id,timestamp,lat,lon`` (UTF-8, one
event per line, integer epoch seconds); files ending in ``.gz`` are read
and written gzip-compressed.
"""
from __future__ import annotations

import csv
import gzip
import io
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .core import (
    DiscretizationConfig,
    MobilityTrace,
    cell_center,
    discretize_space_array,
    project,
    unproject,
)
from .dataset import Dataset
from .errors import ConfigError, CorpusError, InvalidInputError

log = logging.getLogger(__name__)

CSV_HEADER = ["user_id", "timestamp", "lat", "lon"]
DEFAULT_MERGE_THRESHOLD = 150.0
# Projection origin used by the synthetic generator (arbitrary mid-latitude point).
SYNTHETIC_ORIGIN = (45.0, 5.0)


@dataclass(frozen=True)
class RawEventRecord:
    user_id: str
    timestamp: int
    lat: float
    lon: float


@dataclass(frozen=True)
class SiteCluster:
    members: tuple
    representative: tuple


@dataclass
class EventTable:
    """Column-oriented raw events."""

    user: np.ndarray
    timestamp: np.ndarray
    lat: np.ndarray
    lon: np.ndarray

    def __len__(self):
        return int(self.timestamp.size)

    def records(self):
        for u, ts, la, lo in zip(
            self.user.tolist(), self.timestamp.tolist(), self.lat.tolist(), self.lon.tolist()
        ):
            yield RawEventRecord(u, ts, la, lo)

    @classmethod
    def from_records(cls, records: Iterable) -> "EventTable":
        users, ts, lat, lon = [], [], [], []
        for r in records:
            if isinstance(r, RawEventRecord):
                r = (r.user_id, r.timestamp, r.lat, r.lon)
            users.append(r[0])
            ts.append(r[1])
            lat.append(r[2])
            lon.append(r[3])
        return cls(
            np.asarray(users, dtype=object),
            np.asarray(ts, dtype=np.int64),
            np.asarray(lat, dtype=float),
            np.asarray(lon, dtype=float),
        )


# site merging


def merge_nearby_sites(sites, threshold: float = DEFAULT_MERGE_THRESHOLD) -> List[SiteCluster]:
    """Single-linkage clusters of sites closer than ``threshold`` meters.

    Clusters are the connected components of the graph joining every pair
    of sites strictly less than ``threshold`` apart; each is represented by
    the centroid of its members. Output is sorted and does not depend on
    the input order.
    """
    if threshold <= 0:
        raise ConfigError("merge threshold must be positive")
    pts = np.unique(np.asarray(list(sites), dtype=float).reshape(-1, 2), axis=0)
    if pts.shape[0] == 0:
        return []
    labels = _cluster_labels(pts, threshold)
    return _clusters_from_labels(pts, labels)


def _cluster_labels(pts: np.ndarray, threshold: float) -> np.ndarray:
    n = pts.shape[0]
    pairs = cKDTree(pts).query_pairs(threshold, output_type="ndarray")
    if pairs.size:
        d = np.hypot(*(pts[pairs[:, 0]] - pts[pairs[:, 1]]).T)
        pairs = pairs[d < threshold]
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    return labels


def _label_groups(pts, labels):
    # pts come from np.unique, so each group is in lexicographic order
    order = np.argsort(labels, kind="stable")
    cuts = np.flatnonzero(np.diff(labels[order])) + 1
    return np.split(order, cuts)


def _clusters_from_labels(pts, labels):
    clusters = []
    for sel in _label_groups(pts, labels):
        members = pts[sel]
        rep = members.mean(axis=0)
        clusters.append(
            SiteCluster(tuple(map(tuple, members.tolist())), (float(rep[0]), float(rep[1])))
        )
    clusters.sort(key=lambda c: c.members[0])
    return clusters


def _representatives(pts, labels):
    reps = np.empty_like(pts)
    for sel in _label_groups(pts, labels):
        reps[sel] = pts[sel].mean(axis=0)
    return reps


# CSV


def _open_text(path, mode):
    path = Path(path)
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, mode + "b"), encoding="utf-8", newline="")
    return open(path, mode, encoding="utf-8", newline="")


def read_events_csv(path) -> Tuple[EventTable, int]:
    """Parse a raw event file.

    Returns the parsed table and the number of malformed rows dropped.
    """
    users, ts, lat, lon = [], [], [], []
    rejected = 0
    with _open_text(path, "r") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CSV_HEADER:
            raise CorpusError(f"{path}: expected header {','.join(CSV_HEADER)}")
        for row in reader:
            try:
                if len(row) != 4 or not row[0]:
                    raise ValueError(row)
                t = int(row[1])
                la, lo = float(row[2]), float(row[3])
                if not (abs(la) <= 90 and abs(lo) <= 180):
                    raise ValueError(row)
            except ValueError:
                rejected += 1
                continue
            users.append(row[0])
            ts.append(t)
            lat.append(la)
            lon.append(lo)
    table = EventTable(
        np.asarray(users, dtype=object),
        np.asarray(ts, dtype=np.int64),
        np.asarray(lat, dtype=float),
        np.asarray(lon, dtype=float),
    )
    return table, rejected


def write_events_csv(table: EventTable, path) -> None:
    with _open_text(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in table.records():
            w.writerow([r.user_id, r.timestamp, repr(r.lat), repr(r.lon)])


# trace construction


def _valid_mask(table: EventTable, cfg: DiscretizationConfig) -> np.ndarray:
    ok = np.isfinite(table.lat) & np.isfinite(table.lon)
    ok &= (np.abs(table.lat) <= 90) & (np.abs(table.lon) <= 180)
    off = table.timestamp - cfg.day_start
    ok &= (off >= 0) & (off < cfg.day_length)
    ok &= np.array([isinstance(u, str) and u != "" for u in table.user.tolist()], dtype=bool)
    return ok


def build_traces(
    records,
    cfg: DiscretizationConfig,
    clusters: Optional[Sequence[SiteCluster]] = None,
    merge_threshold: Optional[float] = DEFAULT_MERGE_THRESHOLD,
    projection_origin: Optional[Tuple[float, float]] = None,
    rejected: int = 0,
) -> Dataset:
    """Turn raw events into a frozen :class:`Dataset`.

    Events are projected to the plane, snapped to their site cluster
    representative, discretized and deduplicated per user. Records outside
    the day window or with bad coordinates are dropped and counted in
    ``dataset.meta["rejected_records"]``.

    Parameters
    ----------
    records : EventTable or iterable of RawEventRecord
    cfg : DiscretizationConfig
        If ``grid_origin`` is unset the grid is anchored at the floor of
        the corpus minimum coordinates.
    clusters : sequence of SiteCluster, optional
        Precomputed site clusters (planar meters). When omitted, clusters
        are computed with ``merge_threshold``; pass ``merge_threshold=None``
        to skip merging.
    projection_origin : (lat, lon), optional
        Defaults to the corpus minimum latitude and longitude.
    rejected : int
        Rows already dropped upstream (e.g. by the CSV parser).
    """
    table = records if isinstance(records, EventTable) else EventTable.from_records(records)
    if len(table):
        ok = _valid_mask(table, cfg)
    else:
        ok = np.zeros(0, dtype=bool)
    rejected = int(rejected) + int((~ok).sum())
    if not ok.any():
        raise CorpusError(f"no valid records ({rejected} rejected)")
    users = table.user[ok]
    ts = table.timestamp[ok]
    lat = table.lat[ok]
    lon = table.lon[ok]
    if projection_origin is None:
        projection_origin = (float(lat.min()), float(lon.min()))
    px, py = project(lat, lon, *projection_origin)
    px = np.atleast_1d(px)
    py = np.atleast_1d(py)

    pts, site_of = np.unique(np.column_stack([px, py]), axis=0, return_inverse=True)
    site_of = site_of.reshape(-1)
    n_raw_sites = pts.shape[0]
    if clusters is not None:
        rep_of = {}
        for c in clusters:
            for m in c.members:
                rep_of[tuple(m)] = c.representative
        reps = np.array([rep_of.get(tuple(p), tuple(p)) for p in pts.tolist()], dtype=float)
    elif merge_threshold is not None:
        reps = _representatives(pts, _cluster_labels(pts, merge_threshold))
    else:
        reps = pts
    sx = reps[site_of, 0]
    sy = reps[site_of, 1]
    n_sites = np.unique(reps, axis=0).shape[0]

    if cfg.grid_origin is None:
        cfg = cfg.with_origin((float(math.floor(sx.min())), float(math.floor(sy.min()))))
    cx, cy = discretize_space_array(sx, sy, cfg)
    tb = (ts - cfg.day_start) // cfg.delta_t

    uniq_users, uidx = np.unique(users.astype(str), return_inverse=True)
    uidx = uidx.reshape(-1)
    rows = np.unique(np.column_stack([uidx, cx, cy, tb]), axis=0)
    cells, counts = np.unique(np.column_stack([cx, cy]), axis=0, return_counts=True)
    cell_events = {(int(a), int(b)): int(c) for (a, b), c in zip(cells.tolist(), counts.tolist())}

    splits = np.flatnonzero(np.diff(rows[:, 0])) + 1
    traces = []
    for chunk in np.split(rows, splits):
        u = uniq_users[chunk[0, 0]]
        traces.append(MobilityTrace(str(u), frozenset(map(tuple, chunk[:, 1:].tolist())), cfg))

    events_per_user = np.bincount(uidx)
    meta = {
        "num_events": int(ts.size),
        "num_raw_sites": int(n_raw_sites),
        "num_sites": int(n_sites),
        "events_per_user_mean": float(events_per_user.mean()),
        "events_per_user_std": float(events_per_user.std()),
        "rejected_records": rejected,
        "projection_origin": [float(projection_origin[0]), float(projection_origin[1])],
        "merge_threshold": None if clusters is not None or merge_threshold is None else float(merge_threshold),
    }
    if rejected:
        log.warning("dropped %d malformed or out-of-window records", rejected)
    return Dataset(traces, cfg, cell_events, meta)


def dataset_to_events(dataset: Dataset) -> EventTable:
    """One raw event per tuple, at the cell center and the start of the bin."""
    cfg = dataset.cfg
    origin = dataset.meta.get("projection_origin")
    if origin is None:
        raise CorpusError("dataset carries no projection origin")
    users, ts, xs, ys = [], [], [], []
    for u in dataset.users:
        for x, y, t in dataset.traces[u].sorted_tuples():
            cxm, cym = cell_center((x, y), cfg)
            users.append(u)
            ts.append(cfg.day_start + t * cfg.delta_t)
            xs.append(cxm)
            ys.append(cym)
    lat, lon = unproject(np.array(xs), np.array(ys), *origin)
    return EventTable(
        np.asarray(users, dtype=object), np.asarray(ts, dtype=np.int64), np.atleast_1d(lat), np.atleast_1d(lon)
    )


# synthetic population


def _default_diurnal():
    # Relative event rate per hour of day: quiet nights, commuting and working-hour peaks.
    return [0.25, 0.15, 0.1, 0.1, 0.15, 0.3, 0.6, 1.0, 1.3, 1.4, 1.4, 1.4,
            1.4, 1.4, 1.4, 1.4, 1.4, 1.4, 1.3, 1.2, 1.0, 0.8, 0.6, 0.4]


@dataclass
class SyntheticPopulationConfig:
    """Parameters of the anchor-plus-exploration population model.

    Defaults are tuned so that a corpus reproduces the published daily
    aggregates: about 279 events per user (std 506) and about 15 distinct
    locations per user.
    """

    num_users: int = 1000
    num_sites: int = 2000
    popularity_exponent: float = 1.0
    num_anchors: int = 2
    events_mean: float = 279.0
    events_std: float = 506.0
    max_events: int = 5000
    explore_mean: float = 16.0
    explore_std: float = 24.0
    diurnal_weights: List[float] = field(default_factory=_default_diurnal)
    travel_radius: float = 10_000.0
    region_size: float = 300_000.0
    num_cities: int = 12
    city_radius: float = 6_000.0
    rural_fraction: float = 0.2
    seed: int = 0

    def validate(self) -> None:
        for name in ("num_users", "num_sites", "num_anchors", "max_events", "num_cities"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.num_anchors > self.num_sites:
            raise ConfigError("more anchors per user than sites")
        for name in ("events_mean", "events_std", "explore_mean", "explore_std",
                     "travel_radius", "region_size", "city_radius"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        w = np.asarray(self.diurnal_weights, dtype=float)
        if w.size == 0 or np.any(w < 0) or not w.sum() > 0 or not np.all(np.isfinite(w)):
            raise ConfigError("diurnal weights must be non-negative and not all zero")
        if not 0 <= self.rural_fraction <= 1:
            raise ConfigError("rural_fraction must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


def _negbin(rng, mean, std, size=None):
    """Negative binomial draw with the given mean and standard deviation."""
    var = std * std
    if var <= mean:
        return rng.poisson(mean, size)
    r = mean * mean / (var - mean)
    p = r / (r + mean)
    return rng.negative_binomial(r, p, size)


def _place_sites(cfg: SyntheticPopulationConfig, rng):
    n = cfg.num_sites
    n_rural = int(round(n * cfg.rural_fraction)) if n > 1 else 0
    n_city = n - n_rural
    centers = rng.uniform(0.1, 0.9, size=(cfg.num_cities, 2)) * cfg.region_size
    city_w = 1.0 / np.arange(1, cfg.num_cities + 1)
    city_of = rng.choice(cfg.num_cities, size=n_city, p=city_w / city_w.sum())
    scale = cfg.city_radius * np.sqrt(city_w[city_of] / city_w[0])
    city_pts = centers[city_of] + rng.normal(size=(n_city, 2)) * scale[:, None]
    rural_pts = rng.uniform(0, cfg.region_size, size=(n_rural, 2))
    pts = np.vstack([city_pts, rural_pts])
    ranks = rng.permutation(n) + 1
    popularity = ranks.astype(float) ** -cfg.popularity_exponent
    return pts, popularity / popularity.sum()


def _user_day(cfg, rng, sites, popularity, tree, weights):
    n_sites = sites.shape[0]
    # arrival events are added on top of the diurnal background
    mean_stays = cfg.explore_mean + 2 * (cfg.num_anchors - 1) + 1
    background = max(cfg.events_mean - mean_stays, 1.0)
    n_events = int(np.clip(_negbin(rng, background, cfg.events_std), 0, cfg.max_events))

    home = int(rng.choice(n_sites, p=popularity))
    radius = cfg.travel_radius * float(rng.lognormal(0.0, 1.0))
    near = np.asarray(tree.query_ball_point(sites[home], radius), dtype=int)
    near = near[near != home]
    if near.size == 0:
        near = np.setdiff1d(np.arange(n_sites), [home])

    anchors = [home]
    if near.size and cfg.num_anchors > 1:
        w = popularity[near]
        k = min(cfg.num_anchors - 1, near.size)
        anchors += rng.choice(near, size=k, replace=False, p=w / w.sum()).tolist()
    pool = np.setdiff1d(near, anchors)
    n_explore = min(int(_negbin(rng, cfg.explore_mean, cfg.explore_std)), pool.size)
    explore = []
    if n_explore:
        w = popularity[pool]
        explore = rng.choice(pool, size=n_explore, replace=False, p=w / w.sum()).tolist()

    # Daily schedule: home, then out-of-home stays (anchors interleaved with exploration), home.
    leave = float(np.clip(rng.normal(7.5, 1.0), 4.0, 12.0)) * 3600
    back = float(np.clip(rng.normal(18.5, 1.5), leave / 3600 + 1.0, 23.5)) * 3600
    out_stays = list(explore)
    for a in anchors[1:]:
        for _ in range(2):
            out_stays.insert(int(rng.integers(0, len(out_stays) + 1)), a)
    if not out_stays:
        out_stays = [home]
    durations = rng.dirichlet(np.ones(len(out_stays)))
    bounds = leave + np.concatenate([[0.0], np.cumsum(durations)]) * (back - leave)

    hours = rng.choice(24, size=n_events, p=weights)
    secs = hours * 3600 + rng.integers(0, 3600, size=n_events)
    # every arrival (handover) registers one event, so each visited site is observed
    arrivals = np.floor(np.append(bounds[:-1], back)).astype(np.int64)
    secs = np.sort(np.concatenate([secs, arrivals]))
    loc = np.full(secs.size, home, dtype=int)
    out = (secs >= leave) & (secs < back)
    stay_idx = np.clip(np.searchsorted(bounds, secs[out], side="right") - 1, 0, len(out_stays) - 1)
    loc[out] = np.asarray(out_stays, dtype=int)[stay_idx]
    return secs, loc


def generate_synthetic_events(cfg: SyntheticPopulationConfig, day_start: int = 0):
    """Raw events of a synthetic population.

    Every user draws from its own RNG stream ``(seed, user index)``.

    Returns
    -------
    table : EventTable
        Events in latitude/longitude around :data:`SYNTHETIC_ORIGIN`.
    sites : ndarray
        Planar positions of all sites, meters.
    """
    cfg.validate()
    site_rng = np.random.default_rng([cfg.seed, 2**31 - 1])
    sites, popularity = _place_sites(cfg, site_rng)
    tree = cKDTree(sites)
    weights = np.asarray(cfg.diurnal_weights, dtype=float)
    if weights.size != 24:
        raise ConfigError("diurnal weights must have 24 hourly entries")
    weights = weights / weights.sum()

    users, ts, xs, ys = [], [], [], []
    width = len(str(cfg.num_users - 1))
    for i in range(cfg.num_users):
        rng = np.random.default_rng([cfg.seed, i])
        secs, loc = _user_day(cfg, rng, sites, popularity, tree, weights)
        users.append(np.full(secs.size, f"u{i:0{width}d}", dtype=object))
        ts.append(secs.astype(np.int64) + day_start)
        xs.append(sites[loc, 0])
        ys.append(sites[loc, 1])
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    lat, lon = unproject(x, y, *SYNTHETIC_ORIGIN)
    table = EventTable(np.concatenate(users), np.concatenate(ts), np.atleast_1d(lat), np.atleast_1d(lon))
    return table, sites


def generate_synthetic(cfg: SyntheticPopulationConfig, dcfg: DiscretizationConfig) -> Dataset:
    """Synthetic corpus pushed through the regular :func:`build_traces` pipeline."""
    table, _ = generate_synthetic_events(cfg, dcfg.day_start)
    ds = build_traces(table, dcfg, projection_origin=SYNTHETIC_ORIGIN)
    ds.meta["synthetic"] = cfg.to_dict()
    return ds
