import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from slseng.channel import (AntennaConfig, BeamPattern, LinkState, PathLossParams, db_to_linear, dbm_to_watt,
                            gain, gain_law, linear_to_db, path_loss, path_loss_mixed, sample_fading,
                            transmit_indicator, watt_to_dbm)
from slseng.specfun import DomainError

KAPPA = math.radians(121.0)


def test_db_conversions():
    assert_allclose(dbm_to_watt(27.0), 0.501187233627272, rtol=1e-14)
    assert_allclose(dbm_to_watt(-90.0), 1e-12, rtol=1e-14)
    assert_allclose(db_to_linear(-60.0), 1e-6, rtol=1e-14)
    assert_allclose(watt_to_dbm(dbm_to_watt(17.0)), 17.0)
    assert_allclose(linear_to_db(db_to_linear(-7.0)), -7.0)


def test_ula_pattern_values():
    bp = BeamPattern.ula(4, KAPPA)
    assert_allclose(bp.a, 4.0, rtol=1e-12)
    assert_allclose(bp.phi, KAPPA / 4)
    frac = KAPPA / (2 * math.pi)
    assert_allclose(bp.b, (1 - frac) / (1 - frac / 4), rtol=1e-15)
    assert BeamPattern.ula(1, KAPPA).kind == "omni"


@given(st.integers(1, 64), st.floats(0.05, 2 * math.pi - 0.05))
@settings(max_examples=100)
def test_ula_pattern_is_normalized(m, kappa):
    bp = BeamPattern.ula(m, kappa)
    assert_allclose(bp.moment(1), 1.0, rtol=1e-12)


def test_pattern_rejects_unnormalized():
    with pytest.raises(DomainError):
        BeamPattern.sectorized(4.0, 0.9, 1.0)
    with pytest.raises(DomainError):
        BeamPattern("cone", 1.0, 1.0, 1.0)


def test_gain_lobes_and_symmetry():
    bp = BeamPattern.ula(4, KAPPA)
    h = bp.phi / 2
    assert gain(bp, 0.0) == bp.a
    assert gain(bp, h * 0.999) == bp.a
    assert gain(bp, h * 1.001) == bp.b
    th = np.linspace(-7, 7, 101)
    assert np.array_equal(gain(bp, th), gain(bp, -th))
    assert np.array_equal(gain(bp, th), gain(bp, th + 2 * math.pi))


def test_gain_law_is_product_law():
    rx, tx = BeamPattern.ula(4, KAPPA), BeamPattern.ula(2, KAPPA)
    w, g = gain_law(rx, tx)
    assert_allclose(w.sum(), 1.0)
    assert_allclose(np.dot(w, g), 1.0, rtol=1e-12)
    # Monte Carlo of independent uniform angles
    rng = np.random.default_rng(3)
    t1, t2 = rng.uniform(-math.pi, math.pi, (2, 200_000))
    prod = gain(rx, t1) * gain(tx, t2)
    for wi, gi in zip(w, g):
        assert abs(np.mean(np.isclose(prod, gi)) - wi) < 5e-3


def test_antenna_config_builders():
    ac = AntennaConfig.ula(4, 2, KAPPA)
    assert ac.pt == ac.pr and ac.st == ac.sr
    assert_allclose(ac.st.a, 2.0)
    assert AntennaConfig.ideal_ula(4).pr.b == 0.0
    assert AntennaConfig.omni().sr.kind == "omni"


def test_path_loss_values_and_cap():
    plp = PathLossParams()
    assert_allclose(path_loss(10.0, LinkState.LOS, plp), 1e-6 * 10 ** -2.4)
    assert_allclose(path_loss(10.0, "N", plp), 1e-7 * 10 ** -4.2)
    assert path_loss(0.5, LinkState.LOS, plp) == path_loss(1.0, LinkState.LOS, plp)
    with pytest.raises(DomainError):
        path_loss(0.0, LinkState.LOS, plp)
    z = np.array([2.0, 3.0])
    assert_allclose(path_loss_mixed(z, np.array([True, False]), plp),
                    [path_loss(2.0, "L", plp), path_loss(3.0, "N", plp)])


def test_nlos_outage_zeroes_nlos_constant():
    plp = PathLossParams(nlos_outage=True)
    assert plp.constant(LinkState.NLOS) == 0.0
    assert path_loss(5.0, "N", plp) == 0.0


def test_path_loss_param_validation():
    with pytest.raises(DomainError):
        PathLossParams(alpha_l=2.0)
    with pytest.raises(DomainError):
        PathLossParams(c_l=1e-8, c_n=1e-7)


def test_transmit_indicator_is_strict():
    assert transmit_indicator(1.0, 2.0)
    assert not transmit_indicator(2.0, 2.0)


def test_fading_is_unit_exponential():
    g = sample_fading(np.random.default_rng(5), 200_000)
    assert abs(g.mean() - 1.0) < 0.01
    assert abs(np.mean(g > 1.0) - math.exp(-1.0)) < 0.005
