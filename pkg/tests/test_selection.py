import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from slseng.analytic import (INFEASIBLE, SystemParams, primary_coverage, rho_dagger, rho_grid,
                             secondary_coverage)
from slseng.channel import db_to_linear
from slseng.geometry import BlockageParams

BASE = SystemParams()
TAU = db_to_linear(-7.0)


def test_grid_spacing_and_ends():
    g = rho_grid()
    assert g.size == 301
    assert_allclose([g[0], g[-1]], [1e-24, 1e-9], rtol=1e-12)
    assert_allclose(np.diff(10 * np.log10(g)), 0.5, rtol=1e-9)
    with pytest.raises(ValueError):
        rho_grid(1e-9, 1e-12)


def test_zero_targets_pick_grid_start():
    sel = rho_dagger(BASE, TAU, 0.0, 0.0, rho_min=1e-20, rho_max=1e-10)
    assert_allclose(sel.rho, 1e-20)
    assert len(sel.trace) == 1


def test_unreachable_primary_target_is_infeasible():
    sel = rho_dagger(BASE, TAU, 1.0, 0.5, rho_min=1e-16, rho_max=1e-10, step_db=2.0)
    assert not sel.feasible
    assert sel.label() == INFEASIBLE
    # the scan stops at the first point where the primary target fails
    assert len(sel.trace) == 1


def test_selected_threshold_meets_both_targets_and_is_minimal():
    p = BASE.replace(blockage=BlockageParams.zbl())
    p_star, s_star = 0.7, 0.5
    sel = rho_dagger(p, TAU, p_star, s_star, "T1", rho_min=1e-16, rho_max=1e-10, step_db=1.0)
    assert sel.feasible
    q = p.replace(rho=sel.rho)
    assert primary_coverage(TAU, q) >= p_star
    assert secondary_coverage(TAU, q, q.placement("T1")) >= s_star
    # some point within the refinement step below the answer fails a target
    below = [(r, cp, cs) for r, cp, cs in sel.trace if sel.rho * 10 ** -0.011 <= r < sel.rho]
    assert any(cp < p_star or not cs >= s_star for _, cp, cs in below)


def test_bad_inputs_raise():
    with pytest.raises(ValueError):
        rho_dagger(BASE, TAU, 1.2, 0.5)
    with pytest.raises(ValueError):
        rho_dagger(BASE, TAU, 0.5, 0.5, "T9")


def test_trace_records_every_evaluation():
    sel = rho_dagger(BASE, TAU, 0.7, 0.5, "T2", rho_min=1e-14, rho_max=1e-11, step_db=3.0)
    rhos = [t[0] for t in sel.trace]
    assert all(math.isfinite(r) and r > 0 for r in rhos)
    assert all(0.0 <= t[1] <= 1.0 for t in sel.trace)
