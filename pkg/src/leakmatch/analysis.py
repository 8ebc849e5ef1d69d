"""Profiles of what drives unique matches, and obfuscation sweeps.

All emitted frequencies are normalized so that each profile sums to 1.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .boxes import bounding_box
from .core import DiscretizationConfig, MobilityTrace, cell_center, coarsen_tuples, integer_ratio
from .dataset import Dataset
from .errors import ConfigError, InvalidInputError
from .matcher import MatchReport, sample_nested_leaks, sample_users, user_rng
from .parallel import parallel_map

log = logging.getLogger(__name__)


def entropy_bits(counts) -> float:
    """Shannon entropy, base 2, of a histogram of non-negative counts."""
    c = np.asarray([v for v in counts if v > 0], dtype=float)
    if c.size <= 1:
        return 0.0
    p = c / c.sum()
    return float(-(p * np.log2(p)).sum())


@dataclass(frozen=True)
class MobilityStats:
    num_events: int
    num_unique_locations: int
    bbox_area: float
    dist_per_slot: float
    total_distance: float
    temporal_entropy: float
    spatial_entropy: float

    def as_dict(self) -> dict:
        return asdict(self)


STAT_FIELDS = tuple(f.name for f in fields(MobilityStats))


def _path_length(points) -> float:
    if len(points) < 2:
        return 0.0
    p = np.asarray(points, dtype=float)
    return float(np.hypot(*np.diff(p, axis=0).T).sum())


def mobility_stats(trace: MobilityTrace, cfg: DiscretizationConfig) -> MobilityStats:
    """Activity, extent, distance and entropy features of one trace.

    Tuples are walked in (bin, x, y) order; distances join consecutive
    cell centers. The per-slot distance averages the path length inside
    each active bin; the total joins the whole day's path. Distances are
    in km, areas in km^2.
    """
    tuples = sorted(trace.tuples, key=lambda tp: (tp[2], tp[0], tp[1]))
    centers = [cell_center((x, y), cfg) for x, y, _ in tuples]
    total = _path_length(centers)
    by_bin = defaultdict(list)
    for tp, c in zip(tuples, centers):
        by_bin[tp[2]].append(c)
    per_slot = float(np.mean([_path_length(v) for v in by_bin.values()]))
    cells = Counter((x, y) for x, y, _ in tuples)
    bins = Counter(t for _, _, t in tuples)
    box = bounding_box(trace.tuples, cfg)
    return MobilityStats(
        num_events=len(tuples),
        num_unique_locations=len(cells),
        bbox_area=box.area / 1e6,
        dist_per_slot=per_slot / 1000.0,
        total_distance=total / 1000.0,
        temporal_entropy=entropy_bits(bins.values()),
        spatial_entropy=entropy_bits(cells.values()),
    )


# popularity and time-of-day profiles


@dataclass
class Profile:
    """Binned profile; ``frequency`` is the normalized quantity to plot."""

    kind: str
    frequency: np.ndarray
    unique_counts: np.ndarray
    leak_counts: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return self.frequency.size == 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin", "frequency", "unique_count", "leak_count"])
        for i, (f, u, n) in enumerate(zip(self.frequency.tolist(), self.unique_counts.tolist(), self.leak_counts.tolist())):
            w.writerow([i, repr(float(f)), int(u), int(n)])
        return buf.getvalue()


def _empty_profile(kind, meta):
    log.warning("no uniquely matched leaks; %s profile is empty", kind)
    z = np.zeros(0)
    return Profile(kind, z, z.astype(int), z.astype(int), dict(meta, empty=True))


def _select(report: MatchReport, k: Optional[int]):
    return [r for r in report.records if k is None or r.k == k]


def popularity_ranking(dataset: Dataset) -> list:
    """Cells ordered by decreasing daily event count (ties by cell index)."""
    pop = dataset.location_popularity()
    return sorted(pop, key=lambda c: (-pop[c], c))


def popularity_profile(
    dataset: Dataset, report: MatchReport, bins: int = 100, k: Optional[int] = None
) -> Profile:
    """Unique-match frequency of leaked locations, by popularity group.

    Locations are ranked by decreasing popularity and split into ``bins``
    equal-size groups (the first group is the most popular). For each group
    the match rate is the share of its leaked tuples that belonged to a
    uniquely matched leak; rates are normalized to sum to 1.
    """
    if bins < 1:
        raise InvalidInputError("bins must be >= 1")
    records = _select(report, k)
    meta = {"bins": bins, "k": k, "normalization": "rate_per_bin_sum_to_one", "ranking": "daily_events_desc"}
    if not any(r.xi for r in records):
        return _empty_profile("popularity", meta)
    ranked = popularity_ranking(dataset)
    group_of = {}
    for g, chunk in enumerate(np.array_split(np.arange(len(ranked)), bins)):
        for i in chunk.tolist():
            group_of[ranked[i]] = g
    appear = np.zeros(bins, dtype=np.int64)
    unique = np.zeros(bins, dtype=np.int64)
    for r in records:
        for x, y, _ in r.tuples:
            g = group_of.get((x, y))
            if g is None:
                raise InvalidInputError(f"leak cell {(x, y)} not in the corpus")
            appear[g] += 1
            unique[g] += r.xi
    rate = np.divide(unique, appear, out=np.zeros(bins), where=appear > 0)
    return Profile("popularity", rate / rate.sum(), unique, appear, meta)


def time_of_day_profile(report: MatchReport, cfg: DiscretizationConfig, k: Optional[int] = None) -> Profile:
    """Normalized histogram of the time bins of uniquely matched leak tuples."""
    records = _select(report, k)
    meta = {"bins": cfg.num_time_bins, "k": k, "normalization": "sum_to_one", "delta_t": cfg.delta_t}
    counts = np.zeros(cfg.num_time_bins, dtype=np.int64)
    totals = np.zeros(cfg.num_time_bins, dtype=np.int64)
    for r in records:
        for _, _, t in r.tuples:
            totals[t] += 1
            counts[t] += r.xi
    if counts.sum() == 0:
        return _empty_profile("timeofday", meta)
    return Profile("timeofday", counts / counts.sum(), counts, totals, meta)


# cohorts


def per_user_match_probability(report: MatchReport, k: Optional[int] = None) -> Dict[str, float]:
    """Empirical unique-match probability per user over its repeated leak draws."""
    records = _select(report, k)
    if k is None and len({r.k for r in records}) > 1:
        raise InvalidInputError("report holds several leak sizes; pass k")
    acc = defaultdict(list)
    for r in records:
        acc[r.user].append(r.xi)
    return {u: sum(v) / len(v) for u, v in sorted(acc.items())}


@dataclass
class CohortSummary:
    name: str
    users: List[str]
    mean: Dict[str, float]
    std: Dict[str, float]

    @property
    def size(self) -> int:
        return len(self.users)


def _summarize(name, users, dataset):
    if not users:
        return None
    rows = np.array([list(mobility_stats(dataset.traces[u], dataset.cfg).as_dict().values()) for u in users])
    return CohortSummary(
        name,
        list(users),
        {f: float(v) for f, v in zip(STAT_FIELDS, rows.mean(axis=0))},
        {f: float(v) for f, v in zip(STAT_FIELDS, rows.std(axis=0))},
    )


@dataclass
class CohortComparison:
    always: Optional[CohortSummary]
    rarely: Optional[CohortSummary]
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cohort", "size", "feature", "mean", "std"])
        for c in (self.always, self.rarely):
            if c is None:
                continue
            for f in STAT_FIELDS:
                w.writerow([c.name, c.size, f, repr(c.mean[f]), repr(c.std[f])])
        return buf.getvalue()


def cohort_compare(
    dataset: Dataset,
    report: MatchReport,
    k: Optional[int] = None,
    high: float = 1.0,
    low: float = 0.01,
) -> CohortComparison:
    """Mobility features of always-unique users versus almost-never-unique users.

    The report should come from :func:`estimate_rho` with
    ``leaks_per_user`` repeats; each user's probability is the mean
    uniqueness flag over its repeats.
    """
    probs = per_user_match_probability(report, k)
    always = sorted(u for u, p in probs.items() if p >= high)
    rarely = sorted(u for u, p in probs.items() if p < low)
    meta = {
        "k": k,
        "high": high,
        "low": low,
        "repeat": report.meta.get("leaks_per_user"),
        "n_users": len(probs),
        "empty_cohorts": [n for n, c in (("always", always), ("rarely", rarely)) if not c],
    }
    for name in meta["empty_cohorts"]:
        log.warning("cohort %r is empty", name)
    return CohortComparison(_summarize("always", always, dataset), _summarize("rarely", rarely, dataset), meta)


# obfuscation sweep


def check_chain(values: Sequence[float], base: float, name: str) -> list:
    """Sort a granularity ladder and require integer ratios along the chain."""
    vals = sorted(values)
    if not vals:
        raise ConfigError(f"{name} list is empty")
    prev = base
    for v in vals:
        try:
            integer_ratio(v, prev)
        except ConfigError:
            raise ConfigError(f"{name}: {v} is not an integer multiple of {prev}") from None
        prev = v
    return vals


@dataclass
class SweepGrid:
    """Unique-match probability over (delta_t, delta_xy, k).

    ``rho[i, j, m]`` holds the estimate for ``delta_ts[i]``,
    ``delta_xys[j]`` and ``ks[m]``; ``nu`` keeps every leak's anonymity-set
    size with a trailing axis over sampled users.
    """

    delta_ts: list
    delta_xys: list
    ks: list
    rho: np.ndarray
    nu: np.ndarray
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["delta_t", "delta_xy", "k", "rho", "n_leaks"])
        n = self.nu.shape[-1]
        for i, dt in enumerate(self.delta_ts):
            for j, dxy in enumerate(self.delta_xys):
                for m, k in enumerate(self.ks):
                    w.writerow([dt, repr(float(dxy)), k, repr(float(self.rho[i, j, m])), n])
        return buf.getvalue()

    def manifest(self) -> dict:
        return {
            "axes": {"delta_t": self.delta_ts, "delta_xy": self.delta_xys, "k": self.ks},
            "meta": self.meta,
        }

    def monotonicity_violations(self) -> dict:
        r, nu = self.rho, self.nu
        return {
            "rho_along_delta_t": int((np.diff(r, axis=0) > 0).sum()),
            "rho_along_delta_xy": int((np.diff(r, axis=1) > 0).sum()),
            "rho_along_k": int((np.diff(r, axis=2) < 0).sum()),
            "nu_along_delta_t": int((np.diff(nu, axis=0) < 0).sum()),
            "nu_along_delta_xy": int((np.diff(nu, axis=1) < 0).sum()),
            "nu_along_k": int((np.diff(nu, axis=2) > 0).sum()),
        }


_SWEEP = None


def _sweep_init(ds):
    global _SWEEP
    _SWEEP = ds


def _sweep_nu(chain):
    ds = _SWEEP
    out = []
    for leak in chain:
        postings = sorted((ds.posting(t) for t in leak), key=len)
        res = postings[0]
        for p in postings[1:]:
            if not res:
                break
            res = res & p
        out.append(len(res))
    return out


def sweep(
    dataset: Dataset,
    ks: Sequence[int],
    delta_ts: Sequence[int],
    delta_xys: Sequence[float],
    sample_size: int,
    seed: int,
    workers: int = 1,
) -> SweepGrid:
    """Estimate unique-match probability on every (delta_t, delta_xy) grid point.

    Leaks are drawn once, as nested chains on ``dataset`` (the finest
    granularity), and coarsened together with the corpus at each grid
    point, so every cell of the grid is evaluated on the same sample. The
    sample and chains are the ones :func:`estimate_rho` draws for the same
    seed.
    """
    ks = sorted({int(k) for k in ks})
    if not ks or ks[0] < 1:
        raise InvalidInputError("leak sizes must be >= 1")
    cfg = dataset.cfg
    dts = [int(v) for v in check_chain(delta_ts, cfg.delta_t, "delta_t")]
    dxys = [float(v) for v in check_chain(delta_xys, cfg.delta_xy, "delta_xy")]
    for dt in dts:
        if cfg.day_length % dt:
            raise ConfigError(f"delta_t {dt} does not divide the day")

    users, skipped = sample_users(dataset, ks[-1], sample_size, seed)
    chains = []
    for u in users:
        chain = sample_nested_leaks(dataset.traces[u], ks[-1], user_rng(seed, dataset.position[u], 0))
        chains.append([chain[k - 1].tuples for k in ks])

    nu = np.zeros((len(dts), len(dxys), len(ks), len(users)), dtype=np.int64)
    for i, dt in enumerate(dts):
        for j, dxy in enumerate(dxys):
            to_cfg = cfg.coarsened(dxy, dt)
            sr = integer_ratio(dxy, cfg.delta_xy)
            tr = integer_ratio(dt, cfg.delta_t)
            coarse = dataset if (sr, tr) == (1, 1) else dataset.coarsen(to_cfg)
            jobs = [[coarsen_tuples(l, sr, tr) for l in ch] for ch in chains]
            res = parallel_map(_sweep_nu, jobs, workers, _sweep_init, (coarse,))
            nu[i, j] = np.asarray(res, dtype=np.int64).T
            log.info("sweep point delta_t=%s delta_xy=%s done", dt, dxy)
    rho = (nu == 1).mean(axis=-1)
    meta = {
        "seed": int(seed),
        "sample_size_requested": int(sample_size),
        "sample_size": len(users),
        "skipped_short_traces": skipped,
        "base_cfg": cfg.to_dict(),
        "nested_leaks": True,
        "version": __version__,
    }
    return SweepGrid(dts, dxys, ks, rho, nu, meta)
