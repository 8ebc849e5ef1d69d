import math

import pytest
from hypothesis import given, strategies as st

from leakmatch.core import (
    EARTH_RADIUS_M,
    DiscretizationConfig,
    Leak,
    MobilityTrace,
    SpatioTemporalTuple,
    cell_center,
    coarsen,
    coarsen_trace,
    discretize_space,
    discretize_time,
    project,
    unproject,
)
from leakmatch.errors import ConfigError, InvalidInputError


def test_project_origin_is_zero():
    assert project(46.5, 6.6, 46.5, 6.6) == (0.0, 0.0)


def test_project_one_degree_north():
    x, y = project(47.5, 6.6, 46.5, 6.6)
    assert x == 0.0
    assert y == pytest.approx(EARTH_RADIUS_M * math.pi / 180)
    assert y == pytest.approx(111_194.93, abs=0.01)


def test_project_antisymmetric():
    a = project(46.5 + 0.3, 6.6 - 0.2, 46.5, 6.6)
    b = project(46.5 - 0.3, 6.6 + 0.2, 46.5, 6.6)
    assert a[0] == pytest.approx(-b[0])
    assert a[1] == pytest.approx(-b[1])


@pytest.mark.parametrize("lat, lon", [(91, 0), (-90.5, 0), (0, 181), (0, -200)])
def test_project_rejects_out_of_range(lat, lon):
    with pytest.raises(InvalidInputError):
        project(lat, lon, 0, 0)


@given(st.floats(-60, 60), st.floats(-170, 170), st.floats(-1, 1), st.floats(-1, 1))
def test_unproject_inverts_project(lat0, lon0, dlat, dlon):
    x, y = project(lat0 + dlat, lon0 + dlon, lat0, lon0)
    lat, lon = unproject(x, y, lat0, lon0)
    assert lat == pytest.approx(lat0 + dlat, abs=1e-9)
    assert lon == pytest.approx(lon0 + dlon, abs=1e-9)


def test_config_invariants():
    cfg = DiscretizationConfig(100.0, 3600)
    assert cfg.num_time_bins == 24
    with pytest.raises(ConfigError):
        DiscretizationConfig(0.0, 3600)
    with pytest.raises(ConfigError):
        DiscretizationConfig(100.0, -1)
    with pytest.raises(ConfigError):
        DiscretizationConfig(100.0, 7 * 60)  # 1440 / 7 is not whole


@pytest.mark.parametrize(
    "p, cell",
    [((250, 1030), (2, 10)), ((0, 0), (0, 0)), ((-1, 0), (-1, 0)), ((-100, -100.5), (-1, -2))],
)
def test_discretize_space(p, cell):
    cfg = DiscretizationConfig(100.0, 3600, grid_origin=(0, 0))
    assert discretize_space(p, cfg) == cell


def test_discretize_time():
    cfg = DiscretizationConfig(100.0, 3600, day_start=1_000_000)
    bins = {discretize_time(1_000_000 + s, cfg) for s in range(0, 86_400, 600)}
    assert bins == set(range(24))
    assert discretize_time(1_000_000, cfg) == 0
    fine = DiscretizationConfig(100.0, 300, day_start=1_000_000)
    assert discretize_time(1_000_000 + 301, fine) == 1
    with pytest.raises(InvalidInputError):
        discretize_time(1_000_000 + 86_400, cfg)
    with pytest.raises(InvalidInputError):
        discretize_time(999_999, cfg)


def test_coarsen_examples():
    a = DiscretizationConfig(200.0, 300, grid_origin=(0, 0))
    b = DiscretizationConfig(1000.0, 900, grid_origin=(0, 0))
    assert coarsen((7, 3, 13), a, b) == (1, 0, 4)
    assert coarsen((7, 3, 13), a, a) == (7, 3, 13)


def test_coarsen_rejects_bad_ratio_and_origin():
    a = DiscretizationConfig(200.0, 300, grid_origin=(0, 0))
    with pytest.raises(ConfigError):
        coarsen((0, 0, 0), a, DiscretizationConfig(300.0, 300, grid_origin=(0, 0)))
    with pytest.raises(ConfigError):
        coarsen((0, 0, 0), a, DiscretizationConfig(1000.0, 420, grid_origin=(0, 0)))
    with pytest.raises(ConfigError):
        coarsen((0, 0, 0), a, DiscretizationConfig(1000.0, 900, grid_origin=(5, 0)))


ints = st.integers(-10_000, 10_000)


@given(ints, ints, st.integers(0, 287), st.sampled_from([1, 5, 25]), st.sampled_from([1, 3, 6]),
       st.sampled_from([1, 5]), st.sampled_from([1, 2, 4]))
def test_coarsen_composes(x, y, t, s1, t1, s2, t2):
    a = DiscretizationConfig(200.0, 300, grid_origin=(10.0, -20.0))
    b = a.coarsened(200.0 * s1, 300 * t1)
    c = b.coarsened(200.0 * s1 * s2, 300 * t1 * t2)
    assert coarsen(coarsen((x, y, t), a, b), b, c) == coarsen((x, y, t), a, c)


@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6), st.sampled_from([100.0, 200.0, 1000.0]))
def test_cell_center_round_trip(px, py, d):
    cfg = DiscretizationConfig(d, 300, grid_origin=(-3.5, 12.25))
    c = discretize_space((px, py), cfg)
    assert discretize_space(cell_center(c, cfg), cfg) == c


@given(st.sets(st.tuples(ints, ints, st.integers(0, 287)), min_size=1, max_size=30))
def test_coarsening_preserves_membership(tuples):
    a = DiscretizationConfig(200.0, 300, grid_origin=(0, 0))
    b = a.coarsened(1000.0, 900)
    tr = MobilityTrace("u", tuples, a)
    coarse = coarsen_trace(tr, b)
    assert all(coarsen(t, a, b) in coarse for t in tuples)
    assert len(coarse) <= len(tr)


def test_trace_and_leak_set_semantics():
    tr = MobilityTrace("u", [(0, 0, 1), (0, 0, 1), (1, 0, 1)])
    assert len(tr) == 2
    with pytest.raises(InvalidInputError):
        MobilityTrace("u", [])
    leak = Leak([(0, 0, 1)], true_owner="u")
    assert leak.k == 1
    with pytest.raises(InvalidInputError):
        Leak([])


def test_tuple_type_views():
    tup = SpatioTemporalTuple(3, -2, 7)
    assert tup.cell == (3, -2)
    assert tup.bin == 7
    assert tup == (3, -2, 7)
    assert hash(tup) == hash((3, -2, 7))
