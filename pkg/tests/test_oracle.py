import math

import numpy as np
import pytest

from sdem.dem import Dem, RunConfig, make_synthetic
from sdem.oracle import (
    ReferenceTooLarge,
    RingSectorSet,
    multi_viewshed,
    ring_sectors,
    select_axis_point_set,
    singular_viewshed,
    total_viewshed_reference,
)


def test_axis_points_east():
    dem = Dem(np.zeros((1, 8)))
    assert select_axis_point_set(dem, (0, 2), 0.0) == [(0, j) for j in range(3, 8)]
    assert select_axis_point_set(dem, (0, 2), 0.0, forward=False) == [(0, 1), (0, 0)]


def test_axis_points_vertical_family():
    # +90 degrees advances along increasing row index
    dem = Dem(np.zeros((6, 3)))
    assert select_axis_point_set(dem, (2, 1), 90.0) == [(3, 1), (4, 1), (5, 1)]
    assert select_axis_point_set(dem, (2, 1), 90.0, forward=False) == [(1, 1), (0, 1)]


def test_axis_points_diagonal():
    dem = Dem(np.zeros((5, 5)))
    assert select_axis_point_set(dem, (2, 2), 45.0) == [(3, 3), (4, 4)]


def test_axis_points_are_on_the_ray():
    dem = Dem(np.zeros((9, 9)))
    s = 30.0
    pts = select_axis_point_set(dem, (4, 0), s)
    assert len(pts) >= 4
    for n, (i, j) in enumerate(pts, 1):
        assert j == n
        assert i - 4 == pytest.approx(n * math.tan(math.radians(s)), abs=1e-12)
    with pytest.raises(ValueError):
        select_axis_point_set(dem, (9, 0), s)


def test_flat_centre_close_to_square_area():
    m = 10
    dem = make_synthetic("flat", 2 * m + 1, 2 * m + 1, cellsize=1.0)
    area = singular_viewshed(dem, m, m, 1.5, 360)
    # independent sum: every ray sees all n samples, closing one step beyond
    expected = 0.0
    for k in range(360):
        s = math.radians(k)
        di, dj = abs(math.sin(s)), abs(math.cos(s))
        major = max(di, dj)
        stride = 1.0 / major
        expected += ((m + 1) * stride) ** 2 - stride**2
    expected *= math.pi / 360
    assert area == pytest.approx(expected, rel=1e-9)
    assert abs(area - (2 * m + 1) ** 2) / (2 * m + 1) ** 2 <= 0.10


def test_pit_wall_leaves_the_first_ring_only():
    values = np.zeros((5, 5))
    values[1:4, 1:4] = 1e6
    values[2, 2] = 0.0
    ns = 72
    area = singular_viewshed(Dem(values, cellsize=1.0), 2, 2, 1.5, ns)
    expected = 0.0
    for k in range(ns):
        s = math.radians(k * 360 / ns)
        slope = min(abs(math.sin(s)), abs(math.cos(s))) / max(abs(math.sin(s)), abs(math.cos(s)))
        expected += (4 - 1) * (1 + slope * slope)
    assert area == pytest.approx(expected * math.pi / ns, rel=1e-12)


def test_singular_matches_total_cell():
    dem = make_synthetic("noise", 16, 16, seed=7)
    cfg = RunConfig(ns=90)
    total = total_viewshed_reference(dem, cfg).values
    for i, j in [(0, 0), (5, 11), (15, 15), (8, 3)]:
        assert singular_viewshed(dem, i, j, cfg.h0, cfg.ns) == total[i, j]


def test_ring_sectors_well_formed_and_consistent():
    dem = make_synthetic("noise", 14, 14, seed=1, cellsize=5.0)
    ns = 24
    pov = (6, 4)
    cv = 0.0
    for k in range(ns // 2):
        for forward in (True, False):
            rings = ring_sectors(dem, pov, k * 360 / ns, 1.5, forward)
            assert rings.is_well_formed()
            cv += rings.measure()
    assert cv * math.pi / ns * 25.0 == pytest.approx(singular_viewshed(dem, *pov, 1.5, ns), rel=1e-12)


def test_ring_set_rejects_overlap():
    assert not RingSectorSet([(1.0, 3.0), (2.0, 4.0)]).is_well_formed()
    assert not RingSectorSet([(2.0, 2.0)]).is_well_formed()
    assert RingSectorSet([(1.0, 2.0), (3.0, 5.0)]).measure() == 3.0 + 16.0


def test_multi_empty_and_single():
    dem = make_synthetic("noise", 12, 12, seed=2)
    grid, total = multi_viewshed(dem, [], ns=36)
    assert total == 0.0 and not grid.values.any()
    grid, total = multi_viewshed(dem, [(3, 4)], ns=36)
    assert total == singular_viewshed(dem, 3, 4, ns=36) == grid.values[3, 4]
    with pytest.raises(ValueError):
        multi_viewshed(dem, [(12, 0)])


def test_multi_additive_200():
    dem = make_synthetic("noise", 200, 200, seed=7)
    povs = np.random.default_rng(7).integers(0, 200, size=(10, 2))
    _, total = multi_viewshed(dem, povs, ns=36)
    acc = 0.0
    for i, j in povs:
        acc += singular_viewshed(dem, int(i), int(j), ns=36)
    assert total == acc


def test_reference_flat_small():
    vs = total_viewshed_reference(make_synthetic("flat", 8, 8), RunConfig(ns=180)).values
    assert (vs > 0).all()
    for corner in [(0, 0), (0, 7), (7, 0), (7, 7)]:
        assert vs[corner] < vs[3, 3]


def test_reference_ramp_contract():
    vs = total_viewshed_reference(make_synthetic("ramp", 16, 16), RunConfig(ns=90)).values
    assert np.isfinite(vs).all() and (vs >= 0).all()


def test_translation_invariance():
    # axis and diagonal rays sample cell centres, so the shift cancels exactly;
    # interpolated rays would round differently and flip ties on integer terrain
    base = np.rint(make_synthetic("noise", 14, 14, seed=6).values)
    cfg = RunConfig(ns=8)
    a = total_viewshed_reference(Dem(base), cfg).values
    b = total_viewshed_reference(Dem(base + 1000.0), cfg).values
    np.testing.assert_array_equal(a, b)


def test_size_guard():
    with pytest.raises(ReferenceTooLarge, match="cost"):
        total_viewshed_reference(make_synthetic("flat", 300, 300), RunConfig(ns=8))
