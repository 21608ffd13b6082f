import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from slseng.geometry import (BlockageParams, BlockageRegime, DegenerateGeometryError, PolarPoint, PrimaryPlacement,
                             beta_arcsin, beta_to_primary, distance_to_primary_rx, los_probability, wrap_angle)
from slseng.specfun import DomainError


@given(st.floats(-1e4, 1e4))
def test_wrap_angle_range_and_congruence(t):
    w = wrap_angle(t)
    assert -math.pi <= w < math.pi
    assert abs(math.remainder(w - t, 2 * math.pi)) < 1e-9


def test_wrap_angle_pi_maps_to_minus_pi():
    assert wrap_angle(math.pi) == -math.pi


@given(st.floats(0.0, 1e4), st.floats(-10.0, 10.0))
def test_polar_point_roundtrip(r, a):
    p = PolarPoint(r, a)
    q = PolarPoint.from_xy(*p.xy)
    assert_allclose(q.xy, p.xy, atol=1e-9 * max(1.0, r))


def test_los_probability_regimes():
    z = np.array([0.0, 10.0, 200.0])
    assert_allclose(los_probability(z, BlockageParams.zbl()), 1.0)
    assert_allclose(los_probability(z, BlockageParams.hbl()), 0.0)
    b = BlockageParams.from_los_distance(200.0, 0.1)
    assert_allclose(los_probability(z, b), np.exp(-(z / 200.0 + 0.1)))
    with pytest.raises(DomainError):
        los_probability(-1.0, b)


def test_blockage_from_los_distance_limits():
    assert BlockageParams.from_los_distance(np.inf).regime is BlockageRegime.ZBL
    assert BlockageParams.from_los_distance(0.0).regime is BlockageRegime.HBL
    b = BlockageParams.from_los_distance(50.0)
    assert b.regime is BlockageRegime.GENERAL
    assert_allclose(b.l_mu, 50.0)
    with pytest.raises(DomainError):
        BlockageParams(np.inf, 0.0)


def test_preset_receiver_positions():
    # receiver sits r_p behind the transmitter along the receive boresight
    t1 = PrimaryPlacement.preset("T1")
    assert_allclose(t1.rx_xy, [-50 * math.cos(math.pi / 12), 50 - 50 * math.sin(math.pi / 12)], atol=1e-12)
    assert_allclose(PrimaryPlacement.preset("T2").rx_xy, [0.0, 130.0], atol=1e-12)
    assert_allclose(PrimaryPlacement.preset("T3").rx_xy, [0.0, -40.0], atol=1e-12)


def test_primary_placement_validation():
    with pytest.raises(DomainError):
        PrimaryPlacement(0.0, 0.0, 0.0)


def test_distance_law_of_cosines():
    pp = PrimaryPlacement.preset("T1")
    x, th = 75.0, 0.9
    y, psi = pp.y_p0, pp.psi_p0
    assert_allclose(distance_to_primary_rx(x, th, pp), math.sqrt(x * x + y * y - 2 * x * y * math.cos(th - psi)),
                    rtol=1e-12)


def test_beta_degenerate_point_raises():
    pp = PrimaryPlacement.preset("T2")
    with pytest.raises(DegenerateGeometryError):
        beta_to_primary(130.0, math.pi / 2, pp)


def test_frame_consistency_random_geometries():
    # the arcsin composition reproduces the Cartesian bearing on its principal branch
    rng = np.random.default_rng(11)
    n = 10_000
    bad = 0
    on = 0
    for i in range(n):
        pp = PrimaryPlacement(rng.uniform(1, 500), rng.uniform(-math.pi, math.pi), rng.uniform(-math.pi, math.pi),
                              rng.uniform(5, 100), 20.0)
        x, th = rng.uniform(1, 1000), rng.uniform(-math.pi, math.pi)
        b_sin, ok = beta_arcsin(x, th, pp)
        if ok:
            on += 1
            b_xy = beta_to_primary(x, th, pp)
            bad += abs(wrap_angle(b_sin - b_xy)) > 1e-9
    assert on > n // 2
    assert bad == 0
