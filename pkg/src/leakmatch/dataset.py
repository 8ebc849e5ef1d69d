"""Frozen, indexed corpus of mobility traces and its binary container.

Container layout (all integers little-endian)::

    8 bytes   magic  b"LEAKMTCH"
    uint32    format version (FORMAT_VERSION)
    uint64    header length in bytes
    header    UTF-8 JSON, sorted keys: cfg, users, meta, arrays
    payload   int64 arrays concatenated in the order listed in header["arrays"]

Arrays: ``offsets`` (n_users + 1), ``x``, ``y``, ``t`` (trace tuples, each
user's slice sorted), ``cell_x``, ``cell_y``, ``cell_events`` (raw event
count per spatial cell, possibly empty).
"""
from __future__ import annotations

import hashlib
import json
import struct
from collections import defaultdict
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, Mapping, Optional

import numpy as np

from .boxes import BoundingBox, cell_extent
from .core import (
    DiscretizationConfig,
    MobilityTrace,
    coarsen_tuples,
    coarsening_ratios,
)
from .errors import CorpusError, FormatVersionError, InvariantError

MAGIC = b"LEAKMTCH"
FORMAT_VERSION = 1
_ARRAYS = ("offsets", "x", "y", "t", "cell_x", "cell_y", "cell_events")


class Dataset:
    """Read-only corpus: traces keyed by user, padded boxes and an inverted index.

    Parameters
    ----------
    traces : iterable of MobilityTrace
        One trace per user; users must be distinct.
    cfg : DiscretizationConfig
        Discretization shared by all traces. Its grid origin must be set.
    cell_events : mapping, optional
        Raw (pre-deduplication) event count per spatial cell ``(x, y)``,
        used as the location popularity measure.
    meta : dict, optional
        Free-form corpus statistics carried through serialization.
    """

    def __init__(
        self,
        traces: Iterable[MobilityTrace],
        cfg: DiscretizationConfig,
        cell_events: Optional[Mapping] = None,
        meta: Optional[dict] = None,
    ):
        if cfg.grid_origin is None:
            cfg = cfg.with_origin((0.0, 0.0))
        self.cfg = cfg
        by_user: Dict[str, MobilityTrace] = {}
        for tr in traces:
            if tr.user in by_user:
                raise CorpusError(f"duplicate trace for user {tr.user!r}")
            by_user[tr.user] = tr if tr.cfg == cfg else MobilityTrace(tr.user, tr.tuples, cfg)
        if not by_user:
            raise CorpusError("a dataset needs at least one trace")
        self.users = tuple(sorted(by_user))
        self.traces = {u: by_user[u] for u in self.users}
        self.position = {u: i for i, u in enumerate(self.users)}
        self.cell_events = dict(cell_events) if cell_events else {}
        self.meta = dict(meta or {})

        d = cfg.delta_xy
        ox, oy = cfg.origin
        ext = np.array([cell_extent(self.traces[u].tuples) for u in self.users], dtype=float)
        self.box_array = np.column_stack(
            [ox + ext[:, 0] * d, oy + ext[:, 1] * d, ox + ext[:, 2] * d + d, oy + ext[:, 3] * d + d]
        )

        index = defaultdict(set)
        for u in self.users:
            for tup in self.traces[u].tuples:
                index[tup].add(u)
        self.index = {k: frozenset(v) for k, v in index.items()}

    def __len__(self):
        return len(self.users)

    def __iter__(self):
        return iter(self.traces.values())

    def __getitem__(self, user) -> MobilityTrace:
        return self.traces[user]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.cfg == other.cfg
            and self.traces == other.traces
            and self.cell_events == other.cell_events
            and self.meta == other.meta
        )

    def box(self, user) -> BoundingBox:
        return BoundingBox(*self.box_array[self.position[user]].tolist())

    def posting(self, tup) -> frozenset:
        return self.index.get(tuple(tup), frozenset())

    @cached_property
    def bin_index(self) -> dict:
        """Time bin -> users with at least one tuple in that bin."""
        idx = defaultdict(set)
        for u, tr in self.traces.items():
            for _, _, t in tr.tuples:
                idx[t].add(u)
        return {t: frozenset(v) for t, v in idx.items()}

    @cached_property
    def bin_cells(self) -> dict:
        """Per user: time bin -> frozenset of cells visited in that bin."""
        out = {}
        for u, tr in self.traces.items():
            per = defaultdict(set)
            for x, y, t in tr.tuples:
                per[t].add((x, y))
            out[u] = {t: frozenset(c) for t, c in per.items()}
        return out

    def location_popularity(self) -> dict:
        """Daily event count per cell; falls back to tuple counts when raw counts are absent."""
        if self.cell_events:
            return dict(self.cell_events)
        pop = defaultdict(int)
        for tr in self.traces.values():
            for x, y, _ in tr.tuples:
                pop[(x, y)] += 1
        return dict(pop)

    def stats(self) -> dict:
        sizes = np.array([len(tr) for tr in self.traces.values()])
        n_cells = np.array([len(tr.cells()) for tr in self.traces.values()])
        out = {
            "num_users": len(self.users),
            "num_tuples": int(sizes.sum()),
            "tuples_per_user_mean": float(sizes.mean()),
            "unique_cells_per_user_mean": float(n_cells.mean()),
            "num_index_keys": len(self.index),
        }
        out.update(self.meta)
        return out

    def check_invariants(self) -> None:
        for tup, users in self.index.items():
            for u in users:
                if tup not in self.traces[u].tuples:
                    raise InvariantError(f"index lists {u!r} under {tup} but trace lacks it")
        n_postings = sum(len(v) for v in self.index.values())
        if n_postings != sum(len(tr) for tr in self.traces.values()):
            raise InvariantError("index postings disagree with trace sizes")

    def coarsen(self, to_cfg: DiscretizationConfig) -> "Dataset":
        """Element-wise coarsening of every trace to a compatible coarser grid."""
        sr, tr = coarsening_ratios(self.cfg, to_cfg)
        traces = [
            MobilityTrace(u, coarsen_tuples(self.traces[u].tuples, sr, tr), to_cfg)
            for u in self.users
        ]
        cell_events = defaultdict(int)
        for (x, y), c in self.cell_events.items():
            cell_events[(x // sr, y // sr)] += c
        return Dataset(traces, to_cfg, cell_events, self.meta)

    # serialization

    def _arrays(self) -> dict:
        offsets = [0]
        xs, ys, ts = [], [], []
        for u in self.users:
            tups = self.traces[u].sorted_tuples()
            for x, y, t in tups:
                xs.append(x)
                ys.append(y)
                ts.append(t)
            offsets.append(len(xs))
        cells = sorted(self.cell_events)
        return {
            "offsets": np.asarray(offsets, dtype="<i8"),
            "x": np.asarray(xs, dtype="<i8"),
            "y": np.asarray(ys, dtype="<i8"),
            "t": np.asarray(ts, dtype="<i8"),
            "cell_x": np.asarray([c[0] for c in cells], dtype="<i8"),
            "cell_y": np.asarray([c[1] for c in cells], dtype="<i8"),
            "cell_events": np.asarray([self.cell_events[c] for c in cells], dtype="<i8"),
        }

    def to_bytes(self) -> bytes:
        arrays = self._arrays()
        header = {
            "cfg": self.cfg.to_dict(),
            "users": list(self.users),
            "meta": self.meta,
            "arrays": [[name, int(arrays[name].size)] for name in _ARRAYS],
        }
        hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
        parts = [MAGIC, struct.pack("<IQ", FORMAT_VERSION, len(hbytes)), hbytes]
        parts.extend(arrays[name].tobytes() for name in _ARRAYS)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, buf: bytes) -> "Dataset":
        if buf[:8] != MAGIC:
            raise CorpusError("not a leakmatch dataset container")
        version, hlen = struct.unpack_from("<IQ", buf, 8)
        if version != FORMAT_VERSION:
            raise FormatVersionError(
                f"container format version {version}, this build reads {FORMAT_VERSION}"
            )
        pos = 8 + struct.calcsize("<IQ")
        header = json.loads(buf[pos : pos + hlen].decode("utf-8"))
        pos += hlen
        arrays = {}
        for name, size in header["arrays"]:
            arrays[name] = np.frombuffer(buf, dtype="<i8", count=size, offset=pos)
            pos += 8 * size
        if pos != len(buf):
            raise CorpusError("trailing bytes in dataset container")
        cfg = DiscretizationConfig.from_dict(header["cfg"])
        users = header["users"]
        off = arrays["offsets"].tolist()
        x, y, t = (arrays[k].tolist() for k in ("x", "y", "t"))
        traces = [
            MobilityTrace(u, zip(x[off[i] : off[i + 1]], y[off[i] : off[i + 1]], t[off[i] : off[i + 1]]), cfg)
            for i, u in enumerate(users)
        ]
        cell_events = {
            (cx, cy): c
            for cx, cy, c in zip(
                arrays["cell_x"].tolist(), arrays["cell_y"].tolist(), arrays["cell_events"].tolist()
            )
        }
        return cls(traces, cfg, cell_events, header["meta"])

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Dataset":
        return cls.from_bytes(Path(path).read_bytes())

    def checksum(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()
