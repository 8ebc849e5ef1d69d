import math

import numpy as np
import pytest

from leakmatch.analysis import (
    check_chain,
    cohort_compare,
    entropy_bits,
    mobility_stats,
    per_user_match_probability,
    popularity_profile,
    popularity_ranking,
    sweep,
    time_of_day_profile,
)
from leakmatch.core import DiscretizationConfig, MobilityTrace
from leakmatch.errors import ConfigError
from leakmatch.matcher import estimate_rho

from conftest import CFG, make_dataset, random_corpus


@pytest.mark.parametrize("n", [1, 2, 3, 7, 64])
def test_entropy_uniform(n):
    assert abs(entropy_bits([5] * n) - math.log2(n)) <= 1e-9


def test_entropy_ignores_zero_bins():
    assert entropy_bits([3, 0, 3]) == 1.0


def test_stats_single_tuple():
    st = mobility_stats(MobilityTrace("u", {(4, 2, 7)}), CFG)
    assert st.num_events == 1 and st.num_unique_locations == 1
    assert st.bbox_area == CFG.delta_xy**2 / 1e6
    assert st.total_distance == 0.0 and st.dist_per_slot == 0.0
    assert st.temporal_entropy == 0.0 and st.spatial_entropy == 0.0


def test_stats_distance_and_entropy():
    tr = MobilityTrace("u", {(0, 0, 0), (10, 0, 1), (0, 0, 2), (10, 0, 3)})
    st = mobility_stats(tr, CFG)
    assert st.total_distance == pytest.approx(3.0)
    assert st.dist_per_slot == 0.0
    assert st.temporal_entropy == pytest.approx(2.0)
    assert st.spatial_entropy == pytest.approx(1.0)
    # equal cells in one bin: intra-bin distance
    st2 = mobility_stats(MobilityTrace("v", {(0, 0, 0), (10, 0, 0)}), CFG)
    assert st2.dist_per_slot == pytest.approx(1.0)


def _private_corpus(n=30):
    shared = {(0, 0, 0), (1, 0, 1), (0, 1, 2)}
    return make_dataset({f"u{i:02d}": shared | {(20 + i, 20, 3)} for i in range(n)})


def test_popularity_ranking_order():
    ds = _private_corpus(5)
    ranked = popularity_ranking(ds)
    assert ranked[:3] == [(0, 0), (0, 1), (1, 0)]
    assert ranked[3:] == [(20 + i, 20) for i in range(5)]


def test_popularity_private_locations_dominate():
    ds = _private_corpus()
    report = estimate_rho(ds, 1, 30, seed=0, leaks_per_user=20)
    prof = popularity_profile(ds, report, bins=11)
    assert abs(prof.frequency.sum() - 1) <= 1e-9
    assert prof.frequency[0] == 0.0
    assert prof.frequency[-5:].sum() > 0.4


def test_popularity_single_bin():
    ds = _private_corpus()
    report = estimate_rho(ds, 2, 30, seed=0)
    prof = popularity_profile(ds, report, bins=1)
    assert prof.frequency.tolist() == [1.0]


def test_popularity_flat_when_every_leak_unique():
    ds = make_dataset({f"u{i}": {(i, 0, t) for t in range(i % 4 + 1)} for i in range(40)})
    report = estimate_rho(ds, 1, 40, seed=0, leaks_per_user=5)
    assert report.rho == {1: 1.0}
    prof = popularity_profile(ds, report, bins=4)
    assert np.allclose(prof.frequency, 0.25, atol=1e-12)


def test_empty_profiles_when_nothing_unique(caplog):
    ds = make_dataset({f"u{i}": {(0, 0, 0), (1, 1, 1)} for i in range(5)})
    report = estimate_rho(ds, 1, 5, seed=0)
    assert popularity_profile(ds, report).empty
    assert time_of_day_profile(report, ds.cfg).empty
    assert "empty" in caplog.text


def test_time_of_day_no_night_activity():
    rng = np.random.default_rng(0)
    traces = {}
    for i in range(50):
        traces[f"u{i}"] = {(int(rng.integers(30)), int(rng.integers(30)), int(rng.integers(8, 20))) for _ in range(6)}
    ds = make_dataset(traces)
    report = estimate_rho(ds, [1, 2], 50, seed=1)
    prof = time_of_day_profile(report, ds.cfg, k=2)
    assert prof.frequency.size == 24
    assert abs(prof.frequency.sum() - 1) <= 1e-9
    assert prof.frequency[:8].sum() == 0 and prof.frequency[20:].sum() == 0
    assert prof.frequency[8:20].sum() == pytest.approx(1.0)


def test_cohorts_empty_always_for_identical_traces():
    ds = make_dataset({f"u{i}": {(0, 0, 0), (1, 1, 1), (2, 2, 2)} for i in range(6)})
    report = estimate_rho(ds, 2, 6, seed=0, leaks_per_user=5)
    comp = cohort_compare(ds, report, k=2)
    assert comp.always is None
    assert comp.rarely.size == 6
    assert "always" in comp.meta["empty_cohorts"]


def test_cohorts_single_repeat_is_flag():
    ds = random_corpus(2, n_users=60)
    report = estimate_rho(ds, 2, 60, seed=3)
    probs = per_user_match_probability(report, 2)
    assert probs == {r.user: float(r.xi) for r in report.records}
    comp = cohort_compare(ds, report, k=2)
    uniques = sorted(r.user for r in report.records if r.xi)
    assert (comp.always.users if comp.always else []) == uniques


def test_cohorts_order_invariant():
    ds = random_corpus(3, n_users=60)
    report = estimate_rho(ds, 2, 60, seed=3, leaks_per_user=4)
    a = cohort_compare(ds, report, k=2)
    report.records = list(reversed(report.records))
    b = cohort_compare(ds, report, k=2)
    assert a.to_csv() == b.to_csv()


def test_check_chain():
    assert check_chain([1000, 200, 5000], 200, "dxy") == [200, 1000, 5000]
    with pytest.raises(ConfigError):
        check_chain([300, 840], 300, "dt")
    with pytest.raises(ConfigError):
        check_chain([150], 100, "dxy")


def test_sweep_monotone_and_matches_estimate_rho():
    ds = random_corpus(5, n_users=120, n_cells=12, n_bins=24, max_len=20)
    grid = sweep(ds, [1, 2, 3, 4], [3600, 7200, 21600], [100.0, 200.0, 600.0], 60, seed=2)
    assert not any(grid.monotonicity_violations().values())
    rep = estimate_rho(ds, [1, 2, 3, 4], 60, seed=2)
    assert grid.rho[0, 0].tolist() == [rep.rho[k] for k in (1, 2, 3, 4)]
    assert grid.nu[0, 0].T.ravel().tolist() == [r.nu for r in rep.records]


def test_sweep_rejects_non_dividing_bin():
    ds = random_corpus(5)
    with pytest.raises(ConfigError):
        sweep(ds, [1], [3600 * 5], [100.0], 10, seed=0)
