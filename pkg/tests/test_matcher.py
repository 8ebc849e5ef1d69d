import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from leakmatch.boxes import BoundingBox, bounding_box, overlap
from leakmatch.core import DiscretizationConfig, Leak, MobilityTrace
from leakmatch.errors import ConfigError, ShortTraceError
from leakmatch.matcher import (
    MatchReport,
    count_matches,
    estimate_rho,
    is_unique,
    match_leak,
    match_set,
    monotonicity_violations,
    sample_leak,
    sample_nested_leaks,
)

from conftest import CFG, make_dataset, random_corpus


def test_bounding_box_single_cell():
    box = bounding_box([(0, 0, 5)], CFG)
    assert box.as_tuple() == (0.0, 0.0, 100.0, 100.0)
    assert box.area == 10_000.0


def test_bounding_box_two_cells():
    assert bounding_box([(0, 0, 0), (2, 1, 4)], CFG).as_tuple() == (0.0, 0.0, 300.0, 200.0)


def test_bounding_box_respects_origin():
    cfg = DiscretizationConfig(200.0, 300, grid_origin=(1000.0, -50.0))
    assert bounding_box([(1, 2, 0)], cfg).as_tuple() == (1200.0, 350.0, 1400.0, 550.0)


def test_leak_box_inside_trace_box():
    tr = MobilityTrace("u", {(0, 0, 0), (4, 1, 2), (2, 7, 3), (-3, 2, 1)}, CFG)
    rng = np.random.default_rng(0)
    for k in range(1, 5):
        leak = sample_leak(tr, k, rng)
        assert bounding_box(tr, CFG).contains(bounding_box(leak, CFG))


def test_overlap_examples():
    a = BoundingBox(0, 0, 100, 100)
    assert overlap(a, a) == 1.0
    assert overlap(a, BoundingBox(200, 0, 300, 100)) == 0.0
    assert overlap(a, BoundingBox(100, 0, 200, 100)) == 0.0  # touching edges, half-open
    assert overlap(a, BoundingBox(50, 0, 150, 100)) == 50 * 100 / min(1e4, 1e4)


boxes = st.tuples(
    st.integers(-50, 50), st.integers(-50, 50), st.integers(1, 40), st.integers(1, 40)
).map(lambda v: BoundingBox(v[0], v[1], v[0] + v[2], v[1] + v[3]))


@given(boxes, boxes)
def test_overlap_symmetric_and_bounded(a, b):
    o = overlap(a, b)
    assert 0.0 <= o <= 1.0
    assert o == overlap(b, a)


def _toy():
    return make_dataset(
        {
            "a": {(0, 0, 0), (1, 0, 1), (1, 1, 2)},
            "b": {(0, 0, 0), (1, 0, 1)},
            "c": {(0, 0, 0), (5, 5, 5)},
            "d": {(1, 1, 2), (2, 2, 3), (0, 0, 0)},
            "e": {(9, 9, 9)},
        }
    )


def test_match_leak_examples():
    ds = _toy()
    assert match_leak(Leak({(0, 0, 0), (1, 0, 1)}), ds["a"]) == 1
    assert match_leak(Leak({(0, 0, 0), (7, 7, 7)}), ds["a"]) == 0


def test_match_leak_exhaustive_on_toy_corpus():
    ds = _toy()
    universe = sorted(set().union(*(tr.tuples for tr in ds)))
    assert len(universe) == 6
    for k in (1, 2, 3):
        for combo in itertools.combinations(universe, k):
            leak = Leak(set(combo))
            for tr in ds:
                assert match_leak(leak, tr) == int(set(combo) <= set(tr.tuples))
            expected = sum(set(combo) <= set(tr.tuples) for tr in ds)
            for method in ("index", "pruned", "naive"):
                assert count_matches(leak, ds, method) == expected


def test_count_matches_single_tuple_equals_posting_size():
    ds = _toy()
    assert count_matches(Leak({(0, 0, 0)}), ds) == 4
    assert count_matches(Leak({(1, 1, 2)}), ds) == 2


def test_unique_flag():
    ds = _toy()
    assert is_unique(Leak({(5, 5, 5)}), ds) == 1
    assert is_unique(Leak({(1, 1, 2)}), ds) == 0
    assert is_unique(Leak({(4, 4, 4)}), ds) == 0  # owner outside corpus: nu = 0


def test_cfg_mismatch_raises():
    ds = _toy()
    other = DiscretizationConfig(200.0, 3600, grid_origin=(0, 0))
    with pytest.raises(ConfigError):
        count_matches(Leak({(0, 0, 0)}, cfg=other), ds)
    with pytest.raises(ConfigError):
        match_leak(Leak({(0, 0, 0)}, cfg=other), ds["a"])


def test_pruned_and_index_equal_naive_randomized():
    for seed in range(5):
        ds = random_corpus(seed, n_users=80)
        rng = np.random.default_rng(seed)
        for _ in range(60):
            u = ds.users[int(rng.integers(len(ds)))]
            k = int(rng.integers(1, len(ds[u]) + 1))
            leak = sample_leak(ds[u], k, rng)
            naive = match_set(leak, ds, "naive")
            assert match_set(leak, ds, "pruned") == naive == match_set(leak, ds, "index")
            assert u in naive


def test_sample_leak_basic():
    tr = MobilityTrace("u", {(i, 0, i) for i in range(5)}, CFG)
    rng = np.random.default_rng(1)
    assert sample_leak(tr, 5, rng).tuples == tr.tuples
    one = MobilityTrace("v", {(3, 3, 3)}, CFG)
    assert sample_leak(one, 1, rng).tuples == {(3, 3, 3)}
    assert sample_leak(tr, 2, rng).true_owner == "u"
    with pytest.raises(ShortTraceError):
        sample_leak(one, 2, rng)


def test_sample_leak_deterministic():
    tr = MobilityTrace("u", {(i, 0, i) for i in range(20)}, CFG)
    a = sample_leak(tr, 4, np.random.default_rng(5))
    b = sample_leak(tr, 4, np.random.default_rng(5))
    assert a == b


def test_sample_leak_uniform():
    tr = MobilityTrace("u", {(i, 0, 0) for i in range(10)}, CFG)
    rng = np.random.default_rng(123)
    n = 100_000
    counts = {}
    for _ in range(n):
        (t,) = sample_leak(tr, 1, rng).tuples
        counts[t] = counts.get(t, 0) + 1
    sigma = (n * 0.1 * 0.9) ** 0.5
    assert len(counts) == 10
    for c in counts.values():
        assert abs(c - n * 0.1) <= 3 * sigma


def test_nested_leaks_are_chains():
    tr = MobilityTrace("u", {(i, i % 3, i) for i in range(15)}, CFG)
    chain = sample_nested_leaks(tr, 10, np.random.default_rng(2))
    assert [leak.k for leak in chain] == list(range(1, 11))
    for a, b in zip(chain, chain[1:]):
        assert a.tuples < b.tuples


def test_rho_zero_for_duplicated_traces():
    base = {(0, 0, 0), (1, 2, 3), (4, 4, 4), (5, 1, 2)}
    ds = make_dataset({f"u{i}": base for i in range(6)})
    report = estimate_rho(ds, [1, 2, 3, 4], sample_size=6, seed=0)
    assert all(v == 0.0 for v in report.rho.values())


def test_rho_one_with_private_tuples_full_leak():
    shared = {(0, 0, 0), (1, 1, 1)}
    ds = make_dataset({f"u{i}": shared | {(10 + i, 0, 5)} for i in range(8)})
    report = estimate_rho(ds, 3, sample_size=8, seed=1)
    assert report.rho == {3: 1.0}


def test_estimate_rho_report_fields():
    ds = random_corpus(7, n_users=60)
    report = estimate_rho(ds, [1, 2, 3], sample_size=20, seed=4)
    assert report.meta["sample_size"] <= 20
    assert report.meta["normalization"] == "corpus_size"
    for r in report.records:
        assert r.nu >= 1 and r.owner_hit == 1
        assert r.xi == int(r.nu == 1)
        assert r.nu_normalized == r.nu / len(ds)
    assert all(0 <= v <= 1 for v in report.rho.values())
    assert monotonicity_violations(report) == 0


def test_estimate_rho_shortfall_flagged():
    ds = make_dataset({"a": {(0, 0, 0)}, "b": {(0, 0, 0), (1, 1, 1)}, "c": {(2, 2, 2), (3, 3, 3)}})
    report = estimate_rho(ds, 2, sample_size=3, seed=0)
    assert report.meta["sample_size"] == 2
    assert report.meta["sample_shortfall"] is True
    assert report.meta["skipped_short_traces"] == 1


def test_estimate_rho_deterministic_and_csv_round_trip():
    ds = random_corpus(8, n_users=60)
    a = estimate_rho(ds, [1, 2, 3], 30, seed=9)
    b = estimate_rho(ds, [1, 2, 3], 30, seed=9)
    assert a.to_csv() == b.to_csv()
    back = MatchReport.from_csv(a.to_csv())
    assert back.records == a.records


def test_repeated_leaks_per_user():
    ds = random_corpus(3, n_users=40)
    report = estimate_rho(ds, 1, 10, seed=2, leaks_per_user=4)
    assert len(report.records) == 4 * report.meta["sample_size"]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_nested_monotonicity_property(seed):
    ds = random_corpus(seed, n_users=40, max_len=15)
    report = estimate_rho(ds, list(range(1, 6)), 15, seed=seed)
    assert monotonicity_violations(report) == 0
