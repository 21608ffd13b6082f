"""Coverage of the primary link under the secondary transmit restriction."""
from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import special

from ..channel import LinkState, gain, gain_law
from ..geometry import BlockageRegime, los_probability
from ..specfun import (DomainError, PoleError, SeriesError, alternating_blockage_series,
                       integrate_batch, n1, n2)
from .access import SeriesFallbackWarning, angular_average, n3
from .params import SystemParams, checked_probability

__all__ = [
    "primary_snr_scale",
    "primary_coverage",
    "primary_coverage_special",
    "primary_tail_bound",
    "script_n",
    "laplace_deficit",
]

TWO_PI = 2.0 * math.pi
STATES = (LinkState.LOS, LinkState.NLOS)


def primary_snr_scale(tau, params: SystemParams, omni=False):
    """``s_T = tau r_p^alpha_T / (C_T p_p g_pt(0) g_pr(0))`` for both states (``inf`` if ``C_T = 0``)."""
    tau = np.asarray(tau, dtype=float)
    ac = params.antennas
    g = 1.0 if omni else gain(ac.pt, 0.0) * gain(ac.pr, 0.0)
    out = {}
    for state in STATES:
        c = params.plp.constant(state)
        with np.errstate(divide="ignore"):
            out[state] = tau * params.r_p ** params.plp.alpha(state) / (c * params.p_p * g) if c > 0 else np.full(tau.shape, np.inf)
    return out


def laplace_deficit(y, a):
    """``1 - E[exp(-s P U)]`` for one interferer, in stable form.

    ``y = rho / chi`` (threshold over mean received power) and ``a = s rho``;
    the value is ``[a (1 - e^-y) - y e^-y (1 - e^-a)] / (y + a)``.
    """
    y = np.asarray(y, dtype=float)
    a = np.asarray(a, dtype=float)
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        num = -a * np.expm1(-y) + y * np.exp(-y) * np.expm1(-a)
        out = num / (y + a)
    out = np.where(np.isinf(y) | (y + a == 0), 0.0, out)
    return out


def _radial_breaks(kappa0, params, upper):
    pts = [1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0]
    for state in STATES:
        kt = params.kappa(state)
        if 0 < kt < math.inf and kappa0 > 0:
            pts.append((kappa0 / kt) ** (1.0 / params.plp.alpha(state)))
    b = params.blockage
    if b.regime is BlockageRegime.GENERAL and b.mu > 0:
        pts.append(1.0 / b.mu)
    return [p for p in pts if 0 < p < upper]


def _interference_mass(kappas, a_vals, params, upper):
    """``int_0^X x sum_T1 p_T1(x) (1 - E_T1) dx`` per gain (columns) and ``a`` (rows)."""
    kappas = np.asarray(kappas, dtype=float)
    out = np.zeros((a_vals.size, kappas.size))
    live = kappas > 0
    if not np.any(live):
        return out
    kl = kappas[live]
    plp, b, q = params.plp, params.blockage, params.quad
    rho = params.rho
    consts = [(params.kappa(s), plp.alpha(s), s) for s in STATES]

    def f(x, own):
        p_los = los_probability(x, b)
        total = np.zeros((a_vals.size, x.size))
        for kt, alpha, state in consts:
            pt = p_los if state is LinkState.LOS else 1.0 - p_los
            if math.isinf(kt):
                continue
            if math.isinf(rho):
                # everyone transmits: 1 - E = s chi / (1 + s chi)
                chi = params.p_s * plp.constant(state) * kl[own] * x ** (-alpha)
                sc = a_vals[:, None] * chi
                val = sc / (1.0 + sc)
            else:
                y = kt * x ** alpha / kl[own]
                val = laplace_deficit(y[None, :], a_vals[:, None])
            total += pt * val
        return total * x

    brk = [_radial_breaks(k, params, upper) for k in kl]
    res = integrate_batch(f, np.zeros(kl.size), np.full(kl.size, upper), brk,
                          rel_tol=q.rel_tol * 1e-2, abs_tol=1e-9, max_subdivisions=q.max_subdivisions,
                          tail_power=1.0 / (plp.alpha_l - 2.0))
    out[:, live] = res.value.reshape(a_vals.size, kl.size)
    return out


def _pcp_integral(tau, params):
    s = primary_snr_scale(tau, params)
    p_los = float(los_probability(params.r_p, params.blockage))
    weights = {LinkState.LOS: p_los, LinkState.NLOS: 1.0 - p_los}
    rho = params.rho
    upper = params.quad.radial_upper_bound
    ac = params.antennas
    total = np.zeros(tau.shape)
    for state in STATES:
        if weights[state] == 0 or np.all(np.isinf(s[state])):
            continue
        a_vals = s[state] if math.isinf(rho) else s[state] * rho
        if params.lambda_s > 0 and rho > 0:
            mass = TWO_PI * angular_average(lambda k: _interference_mass(k, a_vals, params, upper), ac.pr, ac.st)
        else:
            mass = np.zeros(tau.shape)
        total += weights[state] * np.exp(-s[state] * params.sigma2 - params.lambda_s * mass)
    return total


def script_n(k, s_rho, state, params: SystemParams):
    """``(1/alpha) kappa_T^-k [ (s rho)^k n1(k) - Gamma(k) + n2(k, s rho) ]``.

    Equals ``int_0^inf x^(alpha k - 1) (1 - E_T) dx`` per unit angular moment,
    for interferers in state ``state``; zero when that state carries no power.
    """
    kt = params.kappa(state)
    alpha = params.plp.alpha(state)
    if math.isinf(kt):
        return 0.0
    if kt <= 0:
        raise DomainError("script_n requires rho > 0")
    if s_rho == 0:
        return 0.0
    bracket = s_rho ** k * n1(k) - special.gamma(k) + n2(k, s_rho)
    return kt ** (-k) * bracket / alpha


def _pcp_series(tau, params, strict=True):
    """Blockage-series fast path over the unbounded plane."""
    b, plp = params.blockage, params.plp
    if b.regime is BlockageRegime.GENERAL and b.mu > 0 and strict:
        raise SeriesError(
            "term-wise expansion of exp(-mu x) over an unbounded radius is not valid for mu > 0 "
            "(moments of order >= alpha diverge)", math.nan, "invalid-expansion")
    s = primary_snr_scale(tau, params)
    p_los = float(los_probability(params.r_p, b))
    weights = {LinkState.LOS: p_los, LinkState.NLOS: 1.0 - p_los}
    ac = params.antennas
    out = np.zeros(tau.shape)
    for j, t in enumerate(tau):
        total = 0.0
        for state in STATES:
            if weights[state] == 0 or math.isinf(s[state][j]):
                continue
            a = s[state][j] * params.rho

            def moment(t1, m):
                k = m / plp.alpha(t1)
                val = script_n(k, a, t1, params)
                return 0.0 if val == 0 else val * n3(k, ac)

            if b.regime is BlockageRegime.HBL:
                mass = moment(LinkState.NLOS, 2)
            else:
                try:
                    res = alternating_blockage_series(
                        lambda n: moment(LinkState.LOS, n + 2) - moment(LinkState.NLOS, n + 2), b.mu, params.quad)
                except PoleError as exc:
                    raise SeriesError(f"pole in blockage series: {exc}", math.nan, "pole") from exc
                mass = moment(LinkState.NLOS, 2) + math.exp(-b.p) * res.value
            total += weights[state] * math.exp(-s[state][j] * params.sigma2 - params.lambda_s * mass)
        out[j] = total
    return out


def primary_coverage(tau, params: SystemParams, method="integral"):
    """Probability that the primary SINR exceeds ``tau`` (linear).

    Parameters
    ----------
    tau : float or array_like
        SINR thresholds; arrays share one quadrature pass.
    method : {"integral", "series", "auto"}
        ``"integral"`` integrates out to ``params.quad.radial_upper_bound``
        (``inf`` allowed). ``"series"`` is the closed form over the whole
        plane and raises :class:`SeriesError` where it is not valid.
        ``"auto"`` tries the series when the radial bound is infinite.
    """
    scalar = np.ndim(tau) == 0
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(tau <= 0):
        raise DomainError("tau must be > 0")
    if method == "integral":
        v = _pcp_integral(tau, params)
    elif method == "series":
        v = _pcp_series(tau, params)
    elif method == "auto":
        v = None
        if math.isinf(params.quad.radial_upper_bound):
            try:
                v = _pcp_series(tau, params)
            except SeriesError as exc:
                warnings.warn(f"primary-coverage series unavailable ({exc}); using quadrature",
                              SeriesFallbackWarning)
        if v is None:
            v = _pcp_integral(tau, params)
    else:
        raise ValueError(f"unknown method {method!r}")
    v = checked_probability(v)
    return float(v[0]) if scalar else v


def primary_coverage_special(tau, params: SystemParams, blockage_case, beam_case="sectorized"):
    """One cell of the closed-form primary-coverage table (unbounded plane).

    ``blockage_case`` in {"ZBL", "HBL", "NOL"}; ``beam_case`` in
    {"general", "sectorized", "ideal", "omni"}. The NOL row uses the blockage
    series and raises :class:`SeriesError` for ``mu > 0``.
    """
    tau = float(tau)
    plp, b = params.plp, params.blockage
    ac = params.antennas
    beam = beam_case.lower()
    omni = beam == "omni"
    s = primary_snr_scale(tau, params, omni=omni)

    def moment(k):
        if beam == "general":
            return n3(k, ac, "quadrature")
        if beam == "sectorized":
            return n3(k, ac, "closed")
        if beam == "ideal":
            w, g = gain_law(ac.pr, ac.st)
            return TWO_PI * w[0] * g[0] ** k
        if beam == "omni":
            return TWO_PI
        raise ValueError(f"unknown beam case {beam_case!r}")

    case = blockage_case.upper()
    rho, lam = params.rho, params.lambda_s
    if case == "ZBL":
        sl = float(s[LinkState.LOS])
        k = 2.0 / plp.alpha_l
        v = math.exp(-sl * params.sigma2 - lam * script_n(k, sl * rho, LinkState.LOS, params) * moment(k))
    elif case == "HBL":
        sn = float(s[LinkState.NLOS])
        k = 2.0 / plp.alpha_n
        v = math.exp(-sn * params.sigma2 - lam * script_n(k, sn * rho, LinkState.NLOS, params) * moment(k))
    elif case == "NOL":
        sl = float(s[LinkState.LOS])
        if b.regime is BlockageRegime.GENERAL and b.mu > 0:
            raise SeriesError("NOL closed form requires mu = 0 (series over an unbounded radius)",
                              math.nan, "invalid-expansion")
        k = 2.0 / plp.alpha_l
        inner = script_n(k, sl * rho, LinkState.LOS, params) * moment(k)
        p_los = float(los_probability(params.r_p, b))
        v = p_los * math.exp(-sl * params.sigma2 - lam * math.exp(-b.p) * inner)
    else:
        raise ValueError(f"unknown blockage case {blockage_case!r}")
    return float(checked_probability(v))


def primary_tail_bound(tau, params: SystemParams):
    """Upper bound on the exponent mass beyond ``radial_upper_bound``.

    Uses ``1 - E <= s * mean interference`` with unit mean angular gain, so
    the bound is ``2 pi s p_s C_T int_X^inf p_T(x) x^(1-alpha_T) dx`` summed
    over interferer states. Returned per primary link state as a dict.
    """
    X = params.quad.radial_upper_bound
    if math.isinf(X):
        return {st: 0.0 for st in STATES}
    s = primary_snr_scale(float(tau), params)
    b, plp = params.blockage, params.plp
    out = {}
    for state in STATES:
        total = 0.0
        for t1 in STATES:
            c = plp.constant(t1)
            alpha = plp.alpha(t1)
            if c == 0:
                continue
            tail = X ** (2 - alpha) / (alpha - 2)
            if t1 is LinkState.LOS:
                if b.regime is BlockageRegime.HBL:
                    continue
                scale = math.exp(-b.mu * X - b.p)
            else:
                scale = 1.0
            total += c * scale * tail
        out[state] = TWO_PI * float(s[state]) * params.p_s * total
    return out
