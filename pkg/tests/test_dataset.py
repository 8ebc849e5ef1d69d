import struct

import pytest

from leakmatch.core import DiscretizationConfig
from leakmatch.dataset import FORMAT_VERSION, MAGIC, Dataset
from leakmatch.errors import CorpusError, FormatVersionError

from conftest import make_dataset, random_corpus


def test_index_consistent_with_traces():
    ds = random_corpus(1)
    ds.check_invariants()
    for u, tr in ds.traces.items():
        for tup in tr.tuples:
            assert u in ds.index[tup]
    for tup, users in ds.index.items():
        assert all(tup in ds.traces[u].tuples for u in users)


def test_boxes_from_traces():
    ds = make_dataset({"a": {(0, 0, 0), (2, 1, 3)}, "b": {(5, 5, 0)}})
    assert ds.box("a").as_tuple() == (0.0, 0.0, 300.0, 200.0)
    assert ds.box("b").area == 100.0 * 100.0


def test_round_trip_bit_exact(small_synthetic, tmp_path):
    blob = small_synthetic.to_bytes()
    back = Dataset.from_bytes(blob)
    assert back == small_synthetic
    assert back.to_bytes() == blob
    p = tmp_path / "d.lmds"
    small_synthetic.save(p)
    assert Dataset.load(p).to_bytes() == blob


def test_refuses_other_format_version(small_synthetic):
    blob = bytearray(small_synthetic.to_bytes())
    struct.pack_into("<I", blob, len(MAGIC), FORMAT_VERSION + 1)
    with pytest.raises(FormatVersionError):
        Dataset.from_bytes(bytes(blob))


def test_refuses_garbage():
    with pytest.raises(CorpusError):
        Dataset.from_bytes(b"not a dataset at all")


def test_coarsen_dataset_is_elementwise():
    ds = random_corpus(2)
    to = ds.cfg.coarsened(500.0, 7200)
    coarse = ds.coarsen(to)
    assert coarse.cfg == to
    for u in ds.users:
        assert coarse[u].tuples == {(x // 5, y // 5, t // 2) for x, y, t in ds[u].tuples}
    coarse.check_invariants()


def test_duplicate_users_rejected():
    from leakmatch.core import MobilityTrace

    cfg = DiscretizationConfig(100.0, 3600, grid_origin=(0, 0))
    with pytest.raises(CorpusError):
        Dataset([MobilityTrace("a", {(0, 0, 0)}), MobilityTrace("a", {(1, 0, 0)})], cfg)
