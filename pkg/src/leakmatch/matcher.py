"""Matching anonymous leaks against a corpus and estimating unique-match probability.

Three interchangeable routes compute the anonymity-set size of a leak:

* ``"naive"``  full scan with the subset test over every trace,
* ``"pruned"`` the same scan, skipping traces whose box does not touch the leak's box,
* ``"index"``  intersection of the leak tuples' posting lists, smallest first.

All three return the same count; the naive scan is the oracle for the
other two.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

import numpy as np

from . import __version__
from .boxes import BoundingBox, bounding_box, overlap, overlap_many  # noqa: F401
from .core import Leak, MobilityTrace, check_same_cfg
from .dataset import Dataset
from .errors import ConfigError, InvalidInputError, ShortTraceError
from .parallel import parallel_map

log = logging.getLogger(__name__)

METHODS = ("index", "pruned", "naive")
REPORT_SCHEMA_VERSION = 1


def match_leak(leak: Leak, trace: MobilityTrace) -> int:
    """1 if every tuple of the leak appears in the trace, else 0."""
    check_same_cfg(leak.cfg, trace.cfg)
    return int(len(leak.tuples & trace.tuples) == len(leak.tuples))


def _check_leak_cfg(leak: Leak, dataset: Dataset):
    check_same_cfg(leak.cfg, dataset.cfg)


def match_set(leak: Leak, dataset: Dataset, method: str = "index") -> frozenset:
    """Users whose trace contains the whole leak."""
    _check_leak_cfg(leak, dataset)
    if method == "index":
        postings = sorted((dataset.posting(t) for t in leak.tuples), key=len)
        result = postings[0]
        for p in postings[1:]:
            if not result:
                break
            result = result & p
        return frozenset(result)
    if method == "pruned":
        b = bounding_box(leak.tuples, dataset.cfg)
        touching = np.flatnonzero(overlap_many(b, dataset.box_array) > 0)
        users = dataset.users
        return frozenset(
            users[i] for i in touching.tolist() if leak.tuples <= dataset.traces[users[i]].tuples
        )
    if method == "naive":
        return frozenset(u for u, tr in dataset.traces.items() if match_leak(leak, tr))
    raise ConfigError(f"unknown match method {method!r}; expected one of {METHODS}")


def count_matches(leak: Leak, dataset: Dataset, method: str = "index") -> int:
    """Number of traces in the corpus that contain the leak."""
    return len(match_set(leak, dataset, method))


def pruned_candidates(leak: Leak, dataset: Dataset) -> int:
    """Number of traces the ``overlap == 0`` rule leaves to compare."""
    b = bounding_box(leak.tuples, dataset.cfg)
    return int(np.count_nonzero(overlap_many(b, dataset.box_array) > 0))


def is_unique(leak: Leak, dataset: Dataset, method: str = "index") -> int:
    return int(count_matches(leak, dataset, method) == 1)


def sample_leak(trace: MobilityTrace, k: int, rng: np.random.Generator) -> Leak:
    """Draw ``k`` distinct tuples of a trace uniformly without replacement.

    Raises
    ------
    ShortTraceError
        If the trace has fewer than ``k`` tuples.
    """
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    tuples = trace.sorted_tuples()
    if k > len(tuples):
        raise ShortTraceError(f"trace of {trace.user!r} has {len(tuples)} < {k} tuples")
    picks = rng.choice(len(tuples), size=k, replace=False)
    return Leak(frozenset(tuples[i] for i in picks.tolist()), trace.user, trace.cfg)


def sample_nested_leaks(trace: MobilityTrace, k_max: int, rng: np.random.Generator) -> List[Leak]:
    """Chain ``L1 ⊂ L2 ⊂ ... ⊂ L_kmax``; each prefix is itself a uniform draw."""
    tuples = trace.sorted_tuples()
    if k_max > len(tuples):
        raise ShortTraceError(f"trace of {trace.user!r} has {len(tuples)} < {k_max} tuples")
    order = rng.permutation(len(tuples))[:k_max].tolist()
    picked = [tuples[i] for i in order]
    return [Leak(frozenset(picked[:k]), trace.user, trace.cfg) for k in range(1, k_max + 1)]


def user_rng(seed: int, position: int, repeat: int = 0) -> np.random.Generator:
    """Per-user stream so results never depend on worker scheduling."""
    return np.random.default_rng([int(seed), int(position), int(repeat)])


def sample_users(dataset: Dataset, min_size: int, sample_size: int, seed: int):
    """Uniform sample without replacement among users holding at least ``min_size`` tuples.

    Ineligible users met while drawing are skipped (and counted) so the
    draw stays uniform over the eligible population.

    Returns
    -------
    users : list of str
    skipped : int
    """
    rng = np.random.default_rng([int(seed), 0x5EED])
    order = rng.permutation(len(dataset))
    chosen, skipped = [], 0
    for i in order.tolist():
        u = dataset.users[i]
        if len(dataset.traces[u]) < min_size:
            skipped += 1
            continue
        chosen.append(u)
        if len(chosen) == sample_size:
            break
    return chosen, skipped


@dataclass(frozen=True)
class LeakRecord:
    leak_id: int
    user: str
    repeat: int
    k: int
    nu: int
    xi: int
    nu_normalized: float
    owner_hit: Optional[int]
    tuples: tuple

    def tuples_field(self) -> str:
        return ";".join(f"{x}:{y}:{t}" for x, y, t in self.tuples)


@dataclass
class MatchReport:
    """Per-leak anonymity-set sizes plus per-k aggregates.

    ``nu_normalized`` divides by the corpus size (not by the number of
    traces left after pruning); ``meta["normalization"]`` records it.
    """

    records: List[LeakRecord]
    meta: dict = field(default_factory=dict)

    @property
    def ks(self) -> list:
        return sorted({r.k for r in self.records})

    @property
    def rho(self) -> dict:
        out = {}
        for k in self.ks:
            xs = [r.xi for r in self.records if r.k == k]
            out[k] = sum(xs) / len(xs)
        return out

    @property
    def rho_std(self) -> dict:
        out = {}
        for k in self.ks:
            xs = np.array([r.xi for r in self.records if r.k == k], dtype=float)
            out[k] = float(xs.std())
        return out

    def for_k(self, k: int) -> List[LeakRecord]:
        return [r for r in self.records if r.k == k]

    def unique_records(self, k: Optional[int] = None) -> List[LeakRecord]:
        return [r for r in self.records if r.xi == 1 and (k is None or r.k == k)]

    def aggregates(self) -> dict:
        rho, std = self.rho, self.rho_std
        per_k = []
        for k in self.ks:
            nus = np.array([r.nu for r in self.records if r.k == k], dtype=float)
            per_k.append(
                {
                    "k": k,
                    "n_leaks": int(nus.size),
                    "rho": rho[k],
                    "rho_std": std[k],
                    "nu_mean": float(nus.mean()),
                    "nu_median": float(np.median(nus)),
                }
            )
        return {"schema_version": REPORT_SCHEMA_VERSION, "per_k": per_k, "meta": self.meta}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["leak_id", "user", "repeat", "k", "nu", "xi", "nu_normalized", "owner_hit", "tuples"])
        for r in self.records:
            w.writerow(
                [
                    r.leak_id,
                    r.user,
                    r.repeat,
                    r.k,
                    r.nu,
                    r.xi,
                    repr(r.nu_normalized),
                    "" if r.owner_hit is None else r.owner_hit,
                    r.tuples_field(),
                ]
            )
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.aggregates(), sort_keys=True, indent=2)

    @classmethod
    def from_csv(cls, text: str, meta: Optional[dict] = None) -> "MatchReport":
        records = []
        for row in csv.DictReader(io.StringIO(text)):
            tuples = tuple(
                tuple(int(v) for v in part.split(":")) for part in row["tuples"].split(";") if part
            )
            records.append(
                LeakRecord(
                    leak_id=int(row["leak_id"]),
                    user=row["user"],
                    repeat=int(row["repeat"]),
                    k=int(row["k"]),
                    nu=int(row["nu"]),
                    xi=int(row["xi"]),
                    nu_normalized=float(row["nu_normalized"]),
                    owner_hit=None if row["owner_hit"] == "" else int(row["owner_hit"]),
                    tuples=tuples,
                )
            )
        return cls(records, dict(meta or {}))


_WORKER_DATASET: Optional[Dataset] = None


def _init_worker(dataset):
    global _WORKER_DATASET
    _WORKER_DATASET = dataset


def _evaluate_user(args):
    user, position, ks, seed, method, repeat = args
    ds = _WORKER_DATASET
    trace = ds.traces[user]
    k_max = max(ks)
    rng = user_rng(seed, position, repeat)
    chain = sample_nested_leaks(trace, k_max, rng)
    rows = []
    for k in ks:
        leak = chain[k - 1]
        members = match_set(leak, ds, method)
        nu = len(members)
        rows.append((user, repeat, k, nu, int(nu == 1), int(user in members), tuple(sorted(leak.tuples))))
    return rows


def estimate_rho(
    dataset: Dataset,
    k,
    sample_size: int,
    seed: int,
    method: str = "index",
    leaks_per_user: int = 1,
    workers: int = 1,
) -> MatchReport:
    """Estimate the probability that a ``k``-tuple leak is matched uniquely.

    ``k`` may be one size or a sequence of sizes. With several sizes each
    sampled user contributes one nested chain, so the leak of size ``k``
    is contained in the leak of every larger size; users with fewer than
    ``max(k)`` tuples are skipped.

    Returns
    -------
    MatchReport
        ``report.rho[k]`` is the estimate; per-leak records keep the
        anonymity-set size for every sampled leak.
    """
    ks = sorted({int(k)} if np.isscalar(k) else {int(v) for v in k})
    if not ks or ks[0] < 1:
        raise InvalidInputError("leak sizes must be >= 1")
    if sample_size < 1:
        raise InvalidInputError("sample_size must be >= 1")
    if method not in METHODS:
        raise ConfigError(f"unknown match method {method!r}")
    users, skipped = sample_users(dataset, ks[-1], sample_size, seed)
    if not users:
        raise ShortTraceError(f"no trace holds {ks[-1]} tuples")
    if len(users) < sample_size:
        log.warning("only %d eligible users for sample of %d", len(users), sample_size)
    jobs = [
        (u, dataset.position[u], ks, seed, method, rep)
        for u in users
        for rep in range(leaks_per_user)
    ]
    results = parallel_map(_evaluate_user, jobs, workers, _init_worker, (dataset,))
    n = len(dataset)
    records = []
    for rows in results:
        for user, rep, kk, nu, xi, hit, tuples in rows:
            records.append(LeakRecord(len(records), user, rep, kk, nu, xi, nu / n, hit, tuples))
    meta = {
        "cfg": dataset.cfg.to_dict(),
        "seed": int(seed),
        "ks": ks,
        "method": method,
        "sample_size_requested": int(sample_size),
        "sample_size": len(users),
        "sample_shortfall": len(users) < sample_size,
        "skipped_short_traces": skipped,
        "leaks_per_user": int(leaks_per_user),
        "nested_leaks": len(ks) > 1,
        "normalization": "corpus_size",
        "corpus_size": n,
        "version": __version__,
    }
    return MatchReport(records, meta)


def monotonicity_violations(report: MatchReport) -> int:
    """Count chains where nu increases or uniqueness is lost as k grows."""
    chains = {}
    for r in report.records:
        chains.setdefault((r.user, r.repeat), []).append(r)
    bad = 0
    for rows in chains.values():
        rows.sort(key=lambda r: r.k)
        for a, b in zip(rows, rows[1:]):
            if b.nu > a.nu or b.xi < a.xi:
                bad += 1
    return bad


def rho_standard_error(rho: float, n: int) -> float:
    return math.sqrt(max(rho * (1 - rho), 0.0) / max(n, 1))
