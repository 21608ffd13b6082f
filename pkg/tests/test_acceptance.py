"""Acceptance criteria: one PASS/FAIL line per criterion.

Run under pytest (lines are repeated in the terminal summary) or directly
with ``python3 tests/test_acceptance.py``.
"""
import itertools
import math
import os
import subprocess
import sys

import numpy as np
from scipy.optimize import brentq

from slseng.analytic import (SecondaryPlacement, SystemParams, activity_factor, activity_factor_special,
                             interference_ratio, map_secondary, mean_interference_noblockage, primary_coverage,
                             primary_coverage_special, rho_dagger, secondary_coverage, secondary_coverage_special,
                             typical_secondary_coverage)
from slseng.channel import AntennaConfig, PathLossParams, db_to_linear
from slseng.geometry import BlockageParams
from slseng.montecarlo import (McConfig, estimate_af, estimate_map, estimate_mean_interference,
                               estimate_primary_coverage, estimate_secondary_coverage)
from slseng.specfun import QuadratureSpec, SeriesError

# pinned tolerances
Z_MAX = 3.0
MAP_ABS = 0.01
AF_ABS = 0.02
SERIES_RTOL = 1e-6
SERIES_ATOL = 1e-14
CELL_RTOL = 1e-6
COVERAGE_ABS = 0.02
AF_SHIFT_DB, AF_SHIFT_TOL = 60.0, 6.0
DIR_SHIFT_DB, DIR_SHIFT_TOL = 12.0, 2.0
PLATEAU_DB, PLATEAU_TOL, PLATEAU_VAR, PLATEAU_MAX_OTHER = 21.0, 5.0, 0.03, 8.0
PLATEAU_BAND = (0.05, 0.95)
RATIO_REL = 0.02
RHO_CELL_DB = 3.0

KAPPA = math.radians(121.0)
BASE = SystemParams()
RESULTS = []


def report(n, name, ok, detail):
    line = f"C{n:<2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def ula(m):
    return AntennaConfig.ula(m, m, KAPPA)


def with_l(p, l_mu):
    return p.replace(blockage=BlockageParams.from_los_distance(l_mu))


def binomial_z(est, p, n):
    se = math.sqrt(max(p * (1 - p), 1e-300) / n)
    return abs(est - p) / se


# ---------------------------------------------------------------------------

def test_c1_map_oracle():
    worst_z = worst_gap = 0.0
    n = 100_000
    placements = list(itertools.product((30.0, 100.0, 300.0), (0.0, 1.0, 2.5), (-2.0, 0.5, 3.0)))
    cases = 0
    for k, (ant, l_mu) in enumerate(itertools.product((AntennaConfig.omni(), ula(4)), (math.inf, 200.0, 0.0))):
        p = with_l(BASE.replace(antennas=ant), l_mu)
        for j, (x, th, om) in enumerate(placements):
            sp = SecondaryPlacement(x, th, om)
            ref = map_secondary(sp, p)
            est = float(estimate_map(sp, p, n, seed=1000 * k + j).mean)
            worst_z = max(worst_z, binomial_z(est, ref, n))
            worst_gap = max(worst_gap, abs(est - ref))
            cases += 1
    ok = worst_z <= Z_MAX and worst_gap <= MAP_ABS
    report(1, "MAP vs simulation", ok, f"{cases} cases, max z {worst_z:.2f} (<= {Z_MAX}), "
                                       f"max gap {worst_gap:.4f} (<= {MAP_ABS})")
    assert ok


def test_c2_af_oracle():
    worst_z = worst_gap = 0.0
    mc = McConfig(n_realizations=1000, seed=7)
    cases = 0
    for rho, l_mu in itertools.product((1e-14, 1e-12, 1e-10), (math.inf, 200.0)):
        for m in (1, 4):
            p = with_l(BASE.replace(antennas=ula(m), rho=rho), l_mu)
            ref = activity_factor(p, 1000.0, "integral")
            est = estimate_af(p, mc, R=1000.0)
            worst_z = max(worst_z, float(est.z_score(ref)))
            worst_gap = max(worst_gap, abs(est.mean - ref))
            cases += 1
    ok = worst_z <= Z_MAX and worst_gap <= AF_ABS
    report(2, "activity factor vs simulation", ok, f"{cases} cases, max z {worst_z:.2f}, max gap {worst_gap:.4f}")
    assert ok


def test_c3_series_match_integral_or_flag():
    agree = flagged = wrong = 0
    detail = []
    for l_mu, rho in itertools.product((50.0, 200.0, 1000.0), (1e-14, 1e-12, 1e-10)):
        p = with_l(BASE, l_mu).replace(rho=rho)
        ref = 1 - activity_factor(p, 1000.0, "integral")
        try:
            val = 1 - activity_factor(p, 1000.0, "series")
        except SeriesError:
            flagged += 1
            continue
        if abs(val - ref) <= SERIES_RTOL * abs(ref) + SERIES_ATOL:
            agree += 1
        else:
            wrong += 1
            detail.append(f"AF L={l_mu} rho={rho}")
    af = (agree, flagged)
    agree = flagged = 0
    unbounded = QuadratureSpec(radial_upper_bound=math.inf)
    for tau_db, l_mu, rho in itertools.product((-10.0, 0.0, 5.0), (50.0, 200.0, 1000.0), (1e-14, 1e-12, 1e-10)):
        p = with_l(BASE, l_mu).replace(rho=rho, quad=unbounded)
        tau = db_to_linear(tau_db)
        try:
            val = primary_coverage(tau, p, "series")
        except SeriesError:
            flagged += 1
            continue
        if abs(val - primary_coverage(tau, p, "integral")) <= SERIES_RTOL * val:
            agree += 1
        else:
            wrong += 1
            detail.append(f"p_cp tau={tau_db} L={l_mu} rho={rho}")
    ok = wrong == 0
    report(3, "series vs integral", ok,
           f"AF {af[0]} agree / {af[1]} flagged of 9; primary {agree} agree / {flagged} flagged of 27; "
           f"silently wrong {wrong} {detail}")
    assert ok


def _limit(p, case):
    if case == "ZBL":
        return p.replace(blockage=BlockageParams.zbl())
    if case == "HBL":
        return p.replace(blockage=BlockageParams.hbl())
    return p.replace(plp=PathLossParams(nlos_outage=True))


def test_c4_special_case_coherence():
    worst = 0.0
    n = 0
    beams = (("general", ula(4)), ("sectorized", ula(4)), ("omni", AntennaConfig.omni()), ("ideal", AntennaConfig.ideal_ula(4)))
    for case in ("ZBL", "HBL", "NOL"):
        p = _limit(BASE.replace(rho=1e-13), case)
        for beam, ant in beams:
            cell_p = p if beam in ("general", "sectorized") else p.replace(antennas=ant)
            cell = 1 - activity_factor_special(cell_p, 1000.0, case, beam)
            ref = 1 - activity_factor(p.replace(antennas=ant), 1000.0, "integral")
            worst = max(worst, abs(cell - ref) / ref)
            n += 1
    unbounded = QuadratureSpec(radial_upper_bound=math.inf)
    for case in ("ZBL", "HBL", "NOL"):
        p = BASE.replace(quad=unbounded)
        p = p.replace(blockage=BlockageParams(0.0, 0.4), plp=PathLossParams(nlos_outage=True)) if case == "NOL" \
            else _limit(p, case)
        for (beam, ant), tau_db in itertools.product(beams, (-10.0, 0.0, 5.0)):
            cell_p = p if beam in ("general", "sectorized") else p.replace(antennas=ant)
            tau = db_to_linear(tau_db)
            cell = primary_coverage_special(tau, cell_p, case, beam)
            ref = primary_coverage(tau, p.replace(antennas=ant))
            worst = max(worst, abs(cell - ref) / ref)
            n += 1
    taus = db_to_linear(np.array([-10.0, 0.0, 5.0]))
    for case, name in itertools.product(("ZBL", "HBL", "NOL"), ("T1", "T2", "T3")):
        p = _limit(BASE, case)
        pp = p.placement(name)
        cell = secondary_coverage_special(taus, p, pp, case, rel_tol=1e-9)
        ref = secondary_coverage(taus, p, pp, rel_tol=1e-9)
        worst = max(worst, float(np.max(np.abs(cell - ref) / ref)))
        n += 3
    ok = worst <= CELL_RTOL
    report(4, "closed-form cells vs general formulas", ok, f"{n} comparisons, max rel gap {worst:.2e}")
    assert ok


def test_c5_coverage_oracle():
    taus_db = np.array([-10.0, 0.0, 5.0])
    taus = db_to_linear(taus_db)
    mc = McConfig(n_realizations=20_000, seed=11)
    worst = 0.0
    fails = []
    n = 0
    for l_mu, m in itertools.product((math.inf, 200.0), (1, 4)):
        p = with_l(BASE.replace(antennas=ula(m)), l_mu)
        runs = [("primary", primary_coverage(taus, p), estimate_primary_coverage(taus, p, mc))]
        for name in ("T1", "T2", "T3"):
            pp = p.placement(name)
            runs.append((name, secondary_coverage(taus, p, pp), estimate_secondary_coverage(taus, p, pp, mc)))
        t4_mc = McConfig(n_realizations=20_000, seed=11, region_R=p.region_R)
        runs.append(("T4", typical_secondary_coverage(taus, p, n_placements=128),
                     estimate_secondary_coverage(taus, p, "typical", t4_mc)))
        for name, ref, curve in runs:
            tol = np.maximum(COVERAGE_ABS, Z_MAX * curve.stderr)
            gap = np.abs(curve.values - ref)
            worst = max(worst, float(np.max(gap / tol)))
            n += gap.size
            if np.any(gap > tol):
                fails.append(f"{name} L={l_mu} M={m}")
    ok = not fails
    report(5, "coverage vs simulation", ok, f"{n} comparisons, worst gap/tolerance {worst:.2f}; failing {fails}")
    assert ok


def _af_crossing_db(p, level=0.99):
    def f(x):
        return activity_factor(p.replace(rho=db_to_linear(x) * p.p_s), 1000.0, "integral") - level

    xs = np.arange(-250.0, 0.0, 5.0)
    v = np.array([f(x) for x in xs])
    i = np.flatnonzero(np.diff(np.sign(v)))[0]
    return brentq(f, xs[i], xs[i + 1], xtol=1e-6)


def test_c6_af_blockage_shift():
    z = _af_crossing_db(BASE.replace(blockage=BlockageParams.zbl()))
    h = _af_crossing_db(BASE.replace(blockage=BlockageParams.hbl()))
    shift = z - h
    ok = abs(shift - AF_SHIFT_DB) <= AF_SHIFT_TOL
    report(6, "AF 0.99 crossing shift ZBL vs HBL", ok,
           f"rho/p_s crossings {z:.2f} dB (ZBL), {h:.2f} dB (HBL), shift {shift:.2f} dB "
           f"(target {AF_SHIFT_DB} +/- {AF_SHIFT_TOL})")
    assert ok


def test_c7_directionality_shift():
    def cross(m):
        p = BASE.replace(blockage=BlockageParams.zbl(), antennas=ula(m))
        return brentq(lambda x: primary_coverage(db_to_linear(x), p) - 0.5, -60.0, 60.0, xtol=1e-8)

    a, b = cross(1), cross(4)
    ok = abs((b - a) - DIR_SHIFT_DB) <= DIR_SHIFT_TOL
    report(7, "p_cp 0.5 crossing shift M=1 to 4", ok,
           f"{a:.2f} dB -> {b:.2f} dB, shift {b - a:.2f} dB (target {DIR_SHIFT_DB} +/- {DIR_SHIFT_TOL})")
    assert ok


def plateau_width(tau_db, v, var=PLATEAU_VAR, band=PLATEAU_BAND):
    """Widest run of grid points inside ``band`` whose values span less than ``var``."""
    best = 0.0
    inside = (v >= band[0]) & (v <= band[1])
    for i in np.flatnonzero(inside):
        lo = hi = v[i]
        k = i
        while k + 1 < v.size and inside[k + 1] and max(hi, v[k + 1]) - min(lo, v[k + 1]) < var:
            k += 1
            lo, hi = min(lo, v[k]), max(hi, v[k])
        best = max(best, tau_db[k] - tau_db[i])
    return best


def test_c8_plateau():
    tau_db = np.arange(-40.0, 40.0 + 1e-9, 0.05)
    widths = {}
    for name, b in (("L200", BlockageParams.from_los_distance(200.0)), ("ZBL", BlockageParams.zbl()),
                    ("HBL", BlockageParams.hbl())):
        widths[name] = plateau_width(tau_db, primary_coverage(db_to_linear(tau_db), BASE.replace(blockage=b)))
    ok = (abs(widths["L200"] - PLATEAU_DB) <= PLATEAU_TOL and widths["ZBL"] <= PLATEAU_MAX_OTHER
          and widths["HBL"] <= PLATEAU_MAX_OTHER)
    report(8, "coverage plateau", ok,
           f"widths L=200 {widths['L200']:.2f} dB (target {PLATEAU_DB} +/- {PLATEAU_TOL}), "
           f"ZBL {widths['ZBL']:.2f} dB, HBL {widths['HBL']:.2f} dB (<= {PLATEAU_MAX_OTHER}); "
           f"p_cp restricted to {PLATEAU_BAND}")
    assert ok


def test_c9_mean_interference_ratio():
    p = BASE.replace(plp=PathLossParams(alpha_l=3.0, alpha_n=3.0, c_l=1e-6, c_n=1e-7), rho=1.3e-12)
    r_sim = 2000.0
    closed, law = interference_ratio(p)
    trunc = (mean_interference_noblockage(p, "LOS", r_max=r_sim)
             / mean_interference_noblockage(p, "NLOS", r_max=r_sim))
    mc = McConfig(n_realizations=100_000, r_sim=r_sim, seed=5)
    sim = estimate_mean_interference(p, mc, "LOS").mean / estimate_mean_interference(p, mc, "NLOS").mean
    law_ok = abs(closed / law - 1) <= RATIO_REL
    sim_ok = abs(sim / trunc - 1) <= RATIO_REL
    ok = law_ok and sim_ok
    report(9, "mean interference ratio", ok,
           f"closed form {closed:.4f} vs stated law zeta^(2-2/alpha) {law:.4f} ({'ok' if law_ok else 'mismatch'}); "
           f"simulation {sim:.4f} vs closed form on the {r_sim:.0f} m disk {trunc:.4f} "
           f"({'ok' if sim_ok else 'mismatch'}, {RATIO_REL:.0%})")
    assert ok


# reference cells for T1 at L_mu = inf, tau* = -7 dB
RHO_CELLS_T1 = {1: 0.12e-12, 2: 45.6e-15, 4: 34.9e-15, 8: 31e-15}


def test_c10_rho_dagger():
    p = BASE.replace(blockage=BlockageParams.zbl())
    got = {}
    for m in (1, 2, 4, 8):
        sel = rho_dagger(p.replace(antennas=ula(m)), db_to_linear(-7.0), 0.7, 0.5, "T1")
        got[m] = sel.rho
    vals = [got[m] for m in (1, 2, 4, 8)]
    monotone = all(v is not None for v in vals) and all(b <= a for a, b in zip(vals, vals[1:]))
    cells = []
    for m, ref in RHO_CELLS_T1.items():
        d = 10 * math.log10(got[m] / ref) if got[m] else math.nan
        cells.append(f"M={m} {got[m]:.3g} W vs {ref:.3g} W ({d:+.1f} dB{'' if abs(d) <= RHO_CELL_DB else ', outside'})")
    report(10, "rho-dagger non-increasing in M (T1, L=inf)", monotone,
           f"{[f'{v:.3g}' for v in vals]}; spot cells (soft, +/- {RHO_CELL_DB} dB): " + "; ".join(cells))
    assert monotone


def test_c11_property_suites():
    here = os.path.dirname(os.path.abspath(__file__))
    files = sorted(f for f in os.listdir(here) if f.startswith("test_") and f.endswith(".py")
                   and f != os.path.basename(__file__))
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *files], cwd=here,
                          capture_output=True, text=True)
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr.strip()[-200:]
    ok = proc.returncode == 0
    report(11, "module property suites", ok, f"{len(files)} files: {tail}")
    assert ok


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_c") and callable(fn):
            try:
                fn()
            except AssertionError:
                pass
    print("\n".join(RESULTS))
