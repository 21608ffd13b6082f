"""Medium-access probability, activity factor and mean interference."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from ..channel import BeamPattern, LinkState, gain, gain_law
from ..geometry import BlockageRegime, los_probability, wrap_angle
from ..specfun import (DomainError, SeriesError, adaptive_quad, alternating_blockage_series,
                       integrate_batch, psi, scaled_lower_gamma)
from .params import SystemParams, checked_probability

__all__ = [
    "SeriesFallbackWarning",
    "angular_average",
    "inactive_probability",
    "map_secondary",
    "activity_factor",
    "activity_factor_special",
    "directionality_af_ratio",
    "AfRatio",
    "mean_interference_noblockage",
    "exclusion_radius",
    "interference_ratio",
    "n3",
]

TWO_PI = 2.0 * math.pi
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(6)


class SeriesFallbackWarning(RuntimeWarning):
    """A series fast path failed and the integral reference was used instead."""


def exp_neg_ratio(num, den):
    """``exp(-num/den)`` with ``0/0 -> 0`` and ``x/0 -> inf`` for ``x > 0``."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = np.where(num == 0, 0.0, num / den)
    return np.exp(-np.where(np.isnan(r), np.inf, r))


def _pieces(edges):
    """Partition ``[-pi, pi)`` at ``edges``; returns (starts, stops)."""
    cuts = np.unique(np.concatenate([[-math.pi, math.pi], wrap_angle(np.asarray(edges, float))]))
    return cuts[:-1], cuts[1:]


def angular_average(fn, rx: BeamPattern, tx: BeamPattern):
    """Average of ``fn(g_rx(theta) g_tx(theta + pi - omega))`` over uniform angles.

    Evaluated by Gauss-Legendre quadrature on the pieces where both gains are
    constant, with ``fn`` called once per distinct product gain. ``fn`` maps a
    1-D array of gains to an array whose last axis runs over those gains.
    """
    th_lo, th_hi = _pieces(rx.edges())
    thetas, wth = [], []
    for lo, hi in zip(th_lo, th_hi):
        thetas.append(0.5 * (lo + hi) + 0.5 * (hi - lo) * _GL_NODES)
        wth.append(0.5 * (hi - lo) * _GL_WEIGHTS)
    thetas = np.concatenate(thetas)
    wth = np.concatenate(wth)
    kap, wts = [], []
    for th, w in zip(thetas, wth):
        edges = [th + math.pi + e for e in tx.edges()]
        om_lo, om_hi = _pieces(edges)
        for lo, hi in zip(om_lo, om_hi):
            om = 0.5 * (lo + hi) + 0.5 * (hi - lo) * _GL_NODES
            kap.append(gain(rx, th) * gain(tx, th + math.pi - om))
            wts.append(w * 0.5 * (hi - lo) * _GL_WEIGHTS)
    kap = np.concatenate(kap)
    wts = np.concatenate(wts) / (TWO_PI * TWO_PI)
    uniq, inv = np.unique(kap, return_inverse=True)
    vals = np.asarray(fn(uniq), dtype=float)
    mass = np.bincount(inv, weights=wts, minlength=uniq.size)
    return vals @ mass


def n3(k, antennas, method="closed"):
    """Angular moment ``int_0^2pi E_omega[(g_pr(theta) g_st(theta - pi - omega))^k] dtheta``.

    ``method="closed"`` uses the four-level gain law, ``"quadrature"`` the
    nested angular quadrature.
    """
    if k <= 0:
        raise DomainError("n3 requires k > 0")
    if method == "closed":
        w, g = gain_law(antennas.pr, antennas.st)
        pos = g > 0
        return TWO_PI * float(np.sum(w[pos] * g[pos] ** k))
    if method == "quadrature":
        return TWO_PI * float(angular_average(lambda kap: kap ** k, antennas.pr, antennas.st))
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# MAP
# ---------------------------------------------------------------------------

def inactive_probability(x, kappa0, params: SystemParams, blockage=None):
    """``sum_T p_T(x) exp(-rho x^alpha_T / (p_s C_T kappa0))`` (vectorized)."""
    b = params.blockage if blockage is None else blockage
    plp = params.plp
    x = np.asarray(x, dtype=float)
    p_los = los_probability(x, b)
    total = 0.0
    for state, pt in ((LinkState.LOS, p_los), (LinkState.NLOS, 1.0 - p_los)):
        c = plp.constant(state)
        num = params.rho * x ** plp.alpha(state)
        den = params.p_s * c * np.asarray(kappa0, dtype=float)
        total = total + pt * exp_neg_ratio(num, den)
    return total


def map_secondary(sp, params: SystemParams):
    """Probability that a secondary transmitter at ``sp`` may transmit.

    The transmitter's gain toward the primary receiver at the origin is
    ``g_pr(theta_s) g_st(theta_s - pi - omega_s)``.
    """
    ac = params.antennas
    kappa0 = gain(ac.pr, sp.theta_s) * gain(ac.st, sp.theta_s - math.pi - sp.omega_s)
    if math.isinf(params.rho):
        return 1.0
    return float(checked_probability(1.0 - inactive_probability(sp.x_s, kappa0, params)))


# ---------------------------------------------------------------------------
# Activity factor
# ---------------------------------------------------------------------------

def _radial_breaks(kappa0, params, upper):
    pts = [1.0, 10.0, 100.0, 1000.0]
    for state in (LinkState.LOS, LinkState.NLOS):
        kt = params.kappa(state)
        if 0 < kt < math.inf and kappa0 > 0:
            r = (kappa0 / kt) ** (1.0 / params.plp.alpha(state))
            pts += [0.5 * r, r, 2.0 * r]
    if params.blockage.regime is BlockageRegime.GENERAL and params.blockage.mu > 0:
        pts.append(1.0 / params.blockage.mu)
    return [p for p in pts if 0 < p < upper]


def _inactive_mass(kappas, params, R):
    """``int_0^R x * inactive_probability(x, kappa) dx`` for each distinct gain."""
    kappas = np.asarray(kappas, dtype=float)
    out = np.zeros(kappas.size)
    live = kappas > 0
    if not np.any(live):
        return out
    kl = kappas[live]
    q = params.quad

    def f(x, own):
        return x * inactive_probability(x, kl[own], params)

    brk = [_radial_breaks(k, params, R) for k in kl]
    res = integrate_batch(f, np.zeros(kl.size), np.full(kl.size, R), brk,
                          rel_tol=q.rel_tol * 1e-2, abs_tol=q.abs_tol, max_subdivisions=q.max_subdivisions)
    out[live] = res.value
    return out


def _af_integral(params, R):
    if params.rho == 0:
        return 0.0
    if math.isinf(params.rho):
        return 1.0
    ac = params.antennas
    mass = angular_average(lambda k: _inactive_mass(k, params, R), ac.pr, ac.st)
    return 1.0 - 2.0 * mass / R ** 2


def _deficit_series(kappa0, params, R):
    """``(2/R^2) int_0^R x * inactive_probability dx`` via the blockage series."""
    if kappa0 <= 0:
        return 0.0
    plp, b = params.plp, params.blockage
    kl, kn = params.kappa(LinkState.LOS), params.kappa(LinkState.NLOS)
    bl = kl * R ** plp.alpha_l / kappa0
    bn = kn * R ** plp.alpha_n / kappa0

    def s_los(n):
        return scaled_lower_gamma((n + 2) / plp.alpha_l, bl) / plp.alpha_l

    def s_nlos(n):
        if math.isinf(bn):
            return 0.0
        return scaled_lower_gamma((n + 2) / plp.alpha_n, bn) / plp.alpha_n

    if b.regime is BlockageRegime.HBL:
        return 2.0 * s_nlos(0)
    res = alternating_blockage_series(lambda n: s_los(n) - s_nlos(n), b.mu * R, params.quad,
                                      check_cancellation=False)
    total = 2.0 * (math.exp(-b.p) * res.value + s_nlos(0))
    lost = np.finfo(float).eps * 2.0 * math.exp(-b.p) * res.abs_sum / max(abs(total), 1e-300)
    if lost > params.quad.series_cancellation_tol:
        raise SeriesError(f"catastrophic cancellation in activity-factor series ({lost:.1e})",
                          total, "cancellation")
    return total


def _af_series(params, R):
    if params.rho == 0:
        return 0.0
    w, g = gain_law(params.antennas.pr, params.antennas.st)
    deficit = sum(wi * _deficit_series(gi, params, R) for wi, gi in zip(w, g) if wi > 0)
    return 1.0 - deficit


def activity_factor(params: SystemParams, R=None, method="auto"):
    """Expected fraction of active secondary transmitters within ``R`` of the primary receiver.

    Parameters
    ----------
    method : {"auto", "integral", "series"}
        ``"integral"`` is the reference (angular and radial quadrature),
        ``"series"`` the blockage series (raises :class:`SeriesError` on
        failure), ``"auto"`` tries the series and falls back with a
        :class:`SeriesFallbackWarning`.
    """
    R = params.region_R if R is None else float(R)
    if not R > 0:
        raise DomainError("R must be > 0")
    if method == "integral":
        v = _af_integral(params, R)
    elif method == "series":
        v = _af_series(params, R)
    elif method == "auto":
        try:
            v = _af_series(params, R)
        except SeriesError as exc:
            warnings.warn(f"activity-factor series failed ({exc}); using quadrature", SeriesFallbackWarning)
            v = _af_integral(params, R)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(checked_probability(v))


def activity_factor_special(params: SystemParams, R, blockage_case, beam_case):
    """One cell of the closed-form table for the activity factor.

    ``blockage_case`` in {"ZBL", "HBL", "NOL"}; ``beam_case`` in
    {"general", "sectorized", "ideal", "omni"}. The blockage rate and offset
    are read from ``params`` for the NOL row.
    """
    plp, b = params.plp, params.blockage
    R = float(R)
    case = blockage_case.upper()
    kl, kn = params.rho / (params.p_s * plp.c_l), (params.rho / (params.p_s * plp.c_n) if plp.c_n > 0 else math.inf)

    def kernel(kappa0):
        kappa0 = np.atleast_1d(np.asarray(kappa0, dtype=float))
        out = np.zeros(kappa0.size)
        for j, k0 in enumerate(kappa0):
            if k0 <= 0:
                continue
            if case == "ZBL":
                out[j] = 2.0 / (plp.alpha_l * R ** 2) * psi("L", 2, kl / k0, R, plp)
            elif case == "HBL":
                out[j] = -2.0 / (plp.alpha_n * R ** 2) * psi("N", 2, kn / k0, R, plp)
            elif case == "NOL":
                res = alternating_blockage_series(
                    lambda n: scaled_lower_gamma((n + 2) / plp.alpha_l, kl * R ** plp.alpha_l / k0),
                    b.mu * R, params.quad)
                out[j] = 2.0 / plp.alpha_l * math.exp(-b.p) * res.value
            else:
                raise ValueError(f"unknown blockage case {blockage_case!r}")
        return out

    ac = params.antennas
    beam = beam_case.lower()
    if beam == "general":
        deficit = float(angular_average(kernel, ac.pr, ac.st))
    elif beam == "sectorized":
        w, g = gain_law(ac.pr, ac.st)
        deficit = float(np.sum(w * kernel(g)))
    elif beam == "ideal":
        w, g = gain_law(ac.pr, ac.st)
        deficit = float(w[0] * kernel(g[0])[0])
    elif beam == "omni":
        deficit = float(kernel(1.0)[0])
    else:
        raise ValueError(f"unknown beam case {beam_case!r}")
    return float(checked_probability(1.0 - deficit))


@dataclass(frozen=True)
class AfRatio:
    ratio: float
    s_factor: float
    prefactor: float


def directionality_af_ratio(params: SystemParams, R=None) -> AfRatio:
    """Ratio of inactive fractions, ideal beams over omni, with NLOS links in outage.

    ``ratio = Q1 * G1**(2/alpha_L) * S`` where ``S`` compares the two
    truncated gamma-like integrals; ``S < 1`` whenever ``G1 > 1``.
    """
    R = params.region_R if R is None else float(R)
    plp, b = params.plp, params.blockage
    w, g = gain_law(params.antennas.pr, params.antennas.st)
    q1, g1 = float(w[0]), float(g[0])
    k = 2.0 / plp.alpha_l
    kl = params.rho / (params.p_s * plp.c_l)

    def truncated(scale):
        # int_0^{kl R^a / scale} t^(k-1) exp(-t - mu (scale t / kl)^(1/a)) dt with t = v^(1/k)
        upper = (kl * R ** plp.alpha_l / scale) ** k

        def f(v):
            t = v ** (1.0 / k)
            return np.exp(-t - b.mu * (scale * t / kl) ** (1.0 / plp.alpha_l)) / k

        return adaptive_quad(f, 0.0, upper, breakpoints=[min(1.0, upper / 2)], rel_tol=1e-13, abs_tol=1e-300)[0]

    s_factor = truncated(g1) / truncated(1.0)
    prefactor = q1 * g1 ** k
    if g1 > 1 and not s_factor < 1:
        raise ArithmeticError("directionality factor S must be < 1")  # pragma: no cover
    return AfRatio(prefactor * s_factor, s_factor, prefactor)


# ---------------------------------------------------------------------------
# Mean interference without blockage, fading or directionality
# ---------------------------------------------------------------------------

def exclusion_radius(params: SystemParams, case):
    """Radius inside which the deterministic received power exceeds ``rho``."""
    state = LinkState.LOS if str(case).upper() in ("LOS", "L", "LOS-ONLY") else LinkState.NLOS
    c = params.plp.constant(state)
    return (c * params.p_s / params.rho) ** (1.0 / params.plp.alpha(state))


def mean_interference_noblockage(params: SystemParams, case, r_max=math.inf):
    """Mean aggregate interference at the primary receiver when all paths share one state.

    Transmitters closer than :func:`exclusion_radius` stay silent; the rest
    contribute ``p_s C x**(-alpha)``. ``r_max`` truncates the field.
    """
    state = LinkState.LOS if str(case).upper() in ("LOS", "L", "LOS-ONLY") else LinkState.NLOS
    alpha = params.plp.alpha(state)
    if alpha <= 2:
        raise DomainError("mean interference diverges for alpha <= 2")
    c = params.plp.constant(state)
    u = exclusion_radius(params, state.value)
    if r_max <= u:
        return 0.0
    tail = 0.0 if math.isinf(r_max) else r_max ** (2 - alpha)
    return TWO_PI * params.lambda_s * params.p_s * c * (u ** (2 - alpha) - tail) / (alpha - 2)


def interference_ratio(params: SystemParams):
    """``(E[I_LOS] / E[I_NLOS], zeta**(2 - 2/alpha))``; the second is ``nan`` unless exponents match.

    With equal exponents the closed-form ratio reduces to ``zeta**(2/alpha)``,
    so the second entry (the commonly stated power law) is not equal to it.
    """
    ratio = mean_interference_noblockage(params, "LOS") / mean_interference_noblockage(params, "NLOS")
    plp = params.plp
    if plp.alpha_l == plp.alpha_n:
        zeta = plp.c_l / plp.c_n
        return ratio, zeta ** (2 - 2 / plp.alpha_l)
    return ratio, math.nan
