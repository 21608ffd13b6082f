"""Coverage of a secondary link in the frame centred on its receiver.

The considered receiver sits at the origin with boresight 0 and its
transmitter at ``r_s angle 0``. An interferer at ``x angle theta`` with
boresight ``omega`` radiates ``g_st(theta + pi - omega)`` toward the origin and
``g_st(beta + pi - omega)`` toward the primary receiver, where ``beta`` is its
bearing seen from that receiver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict

import numpy as np
from scipy import special
from scipy.stats import qmc

from ..channel import BeamPattern, LinkState, gain
from ..geometry import (COINCIDENCE_TOL, BlockageRegime, DegenerateGeometryError, PrimaryPlacement,
                        los_probability, wrap_angle)
from ..specfun import DomainError, SeriesError, integrate_batch, n1, tricomi_u
from .access import exp_neg_ratio
from .params import SystemParams, checked_probability

__all__ = [
    "SecondaryTerms",
    "secondary_terms",
    "secondary_coverage",
    "secondary_coverage_special",
    "term4",
    "term4_sectorized",
    "term4_approx",
    "omega_pieces",
    "omega_weights_sectorized",
    "typical_secondary_coverage",
    "typical_placements",
]

TWO_PI = 2.0 * math.pi
STATES = (LinkState.LOS, LinkState.NLOS)


# ---------------------------------------------------------------------------
# Expectation over the interferer boresight
# ---------------------------------------------------------------------------

def omega_pieces(theta, beta, st: BeamPattern):
    """Split uniform ``omega`` into arcs of constant (toward-origin, toward-primary) gain.

    Returns ``(weights, g_origin, g_primary)``, each of shape ``(n, k)``; the
    gains are evaluated at the midpoint of each arc.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if st.kind == "omni" or st.phi >= TWO_PI:
        one = np.ones((theta.size, 1))
        return one, one, one
    h = 0.5 * st.phi
    pts = np.stack([theta + math.pi - h, theta + math.pi + h, beta + math.pi - h, beta + math.pi + h], axis=1)
    pts = np.sort(np.mod(pts, TWO_PI), axis=1)
    ext = np.concatenate([pts, pts[:, :1] + TWO_PI], axis=1)
    lengths = np.diff(ext, axis=1)
    mids = pts + 0.5 * lengths
    g_origin = gain(st, theta[:, None] + math.pi - mids)
    g_primary = gain(st, beta[:, None] + math.pi - mids)
    return lengths / TWO_PI, g_origin, g_primary


def omega_weights_sectorized(delta, st: BeamPattern):
    """Probabilities of the four (toward-primary, toward-origin) gain pairs.

    ``delta`` is the angle between the two directions. Pairs are ordered
    (a, a), (a, b), (b, a), (b, b) with the first entry toward the primary
    receiver. Valid for ``phi <= 2 pi``.
    """
    d = np.abs(wrap_angle(delta))
    phi = st.phi
    overlap = np.maximum(0.0, phi - d) + np.maximum(0.0, phi - (TWO_PI - d))
    overlap = np.minimum(overlap, phi)
    q1 = overlap / TWO_PI
    q2 = (phi - overlap) / TWO_PI
    q3 = q2
    q4 = 1.0 - q1 - q2 - q3
    return np.stack([q1, q2, q3, q4], axis=-1)


# ---------------------------------------------------------------------------
# Frame constants
# ---------------------------------------------------------------------------

@dataclass
class _Frame:
    params: SystemParams
    pp: PrimaryPlacement

    def __post_init__(self):
        p, pp = self.params, self.pp
        ac, plp = p.antennas, p.plp
        self.yx, self.yy = pp.rx_xy
        self.y = pp.y_p0
        self.psi = pp.psi_p0
        own_gain = gain(ac.st, 0.0) * gain(ac.sr, 0.0)
        self.a0 = {s: p.p_s * own_gain * plp.constant(s) * p.r_s ** (-plp.alpha(s)) for s in STATES}
        cross = gain(ac.pt, pp.delta_p0 - pp.omega_p0) * gain(ac.sr, pp.delta_p0)
        self.a20 = {s: p.p_p * cross * plp.constant(s) * pp.x_p0 ** (-plp.alpha(s)) for s in STATES}
        z00 = pp.z00
        if z00 < COINCIDENCE_TOL:
            raise DegenerateGeometryError("secondary transmitter coincides with the primary receiver")
        self.z00 = z00
        beta00 = pp.beta00
        # own transmitter points at the origin (boresight pi)
        self.k00 = gain(ac.st, beta00) * gain(ac.pr, beta00 - pp.omega_p0)

    def own_map(self, blockage=None):
        p = self.params
        b = p.blockage if blockage is None else blockage
        pl = float(los_probability(self.z00, b))
        inactive = 0.0
        for s, pt in ((LinkState.LOS, pl), (LinkState.NLOS, 1.0 - pl)):
            inactive += pt * float(exp_neg_ratio(p.rho * self.z00 ** p.plp.alpha(s),
                                                 p.p_s * p.plp.constant(s) * self.k00))
        return 1.0 - inactive

    def locate(self, x, theta):
        dx = x * np.cos(theta) - self.yx
        dy = x * np.sin(theta) - self.yy
        return np.hypot(dx, dy), np.arctan2(dy, dx)


def _ray_hits(theta, frame, gamma):
    """Distance along the origin ray ``theta`` to the ray from Y at angle ``gamma``."""
    ux, uy = np.cos(theta), np.sin(theta)
    vx, vy = np.cos(gamma), np.sin(gamma)
    det = -ux * vy + vx * uy
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (-frame.yx * vy + vx * frame.yy) / det
        s = (ux * frame.yy - uy * frame.yx) / det
    return np.where((np.abs(det) > 1e-12) & (t > 0) & (s > 0), t, np.nan)


def _x_breaks(thetas, frame, params, upper, scales):
    ac = params.antennas
    cols = [np.full(thetas.shape, v) for v in (1.0, 10.0, 100.0, 1000.0) + tuple(scales)]
    cols.append(frame.y * np.cos(thetas - frame.psi))
    if ac.pr.kind != "omni":
        for e in ac.pr.edges():
            cols.append(_ray_hits(thetas, frame, frame.pp.omega_p0 + e))
    if ac.st.kind != "omni":
        for sgn in (-1.0, 1.0):
            cols.append(_ray_hits(thetas, frame, thetas + sgn * ac.st.phi))
    b = params.blockage
    if b.regime is BlockageRegime.GENERAL and b.mu > 0:
        cols.append(np.full(thetas.shape, 1.0 / b.mu))
    brk = np.stack(cols, axis=1)
    brk = np.where((brk > 0) & (brk < upper), brk, np.nan)
    return list(brk)


def _theta_breaks(frame, params):
    ac = params.antennas
    pts = [frame.psi, frame.psi + math.pi]
    pts += list(ac.sr.edges())
    for e in ac.pr.edges():
        pts += [frame.pp.omega_p0 + e, frame.pp.omega_p0 + e + math.pi]
    if ac.st.kind != "omni":
        pts += [frame.psi + ac.st.phi, frame.psi - ac.st.phi]
    return sorted(set(float(v) for v in wrap_angle(np.array(pts))))


def _double_integral(point_fn, frame, params, n_comp, rel_tol=None, scales=()):
    """``int_{-pi}^{pi} int_0^X point_fn(x, theta) x dx dtheta`` (vector valued)."""
    q = params.quad
    rel_tol = q.rel_tol if rel_tol is None else rel_tol
    upper = q.radial_upper_bound
    tail_power = 1.0 / (params.plp.alpha_l - 2.0)

    def outer(thetas):
        thetas = np.asarray(thetas, dtype=float)

        def inner(x, own):
            return point_fn(x, thetas[own]) * x

        brk = _x_breaks(thetas, frame, params, upper, scales)
        res = integrate_batch(inner, np.zeros(thetas.size), np.full(thetas.size, upper), brk,
                              rel_tol=0.1 * rel_tol, abs_tol=1e-9, max_subdivisions=q.max_subdivisions,
                              tail_power=tail_power)
        return np.asarray(res.value).reshape(n_comp, thetas.size)

    res = integrate_batch(lambda th, _: outer(th), [-math.pi], [math.pi], [_theta_breaks(frame, params)],
                          rel_tol=rel_tol, abs_tol=1e-7, max_subdivisions=q.max_subdivisions)
    return np.asarray(res.value).reshape(n_comp)


def _interference_scales(coef, params):
    plp, ac = params.plp, params.antennas
    top = gain(ac.st, 0.0) * gain(ac.sr, 0.0)
    out = []
    for c in np.atleast_1d(coef):
        if np.isfinite(c) and c > 0:
            out.append((c * params.p_s * plp.c_l * top) ** (1.0 / plp.alpha_l))
    return tuple(out)


# ---------------------------------------------------------------------------
# LOS serving-link interference integrands
# ---------------------------------------------------------------------------

def _point_general(frame, params, coef, blockage=None):
    """Integrand with the boresight expectation taken arc by arc."""
    p = params
    plp, ac = p.plp, p.antennas
    b = p.blockage if blockage is None else blockage
    pp = frame.pp
    coef = np.asarray(coef, dtype=float)

    def fn(x, theta):
        z, beta = frame.locate(x, theta)
        g_sr = gain(ac.sr, theta)
        g_pr = gain(ac.pr, beta - pp.omega_p0)
        wts, g_o, g_y = omega_pieces(theta, beta, ac.st)
        pz = los_probability(z, b)[:, None]
        inactive = 0.0
        for s, pt in ((LinkState.LOS, pz), (LinkState.NLOS, 1.0 - pz)):
            inactive = inactive + pt * exp_neg_ratio(p.rho * (z ** plp.alpha(s))[:, None],
                                                     p.p_s * plp.constant(s) * g_y * g_pr[:, None])
        active = 1.0 - inactive
        px = los_probability(x, b)
        out = np.zeros((coef.size, x.size))
        for s, pt in ((LinkState.LOS, px), (LinkState.NLOS, 1.0 - px)):
            c = plp.constant(s)
            if c == 0:
                continue
            base = (p.p_s * c * x ** (-plp.alpha(s)) * g_sr)[:, None] * g_o
            for j, cj in enumerate(coef):
                w = cj * base
                out[j] += pt * np.sum(wts * active * w / (1.0 + w), axis=1)
        return out

    return fn


def _point_sectorized(frame, params, coef):
    """Same integrand with pair weights ``q_i(delta)`` and receive-gain events."""
    p = params
    plp, ac, b = p.plp, p.antennas, p.blockage
    pp = frame.pp
    coef = np.asarray(coef, dtype=float)
    st = ac.st
    # transmit pairs (toward primary, toward origin)
    pairs = np.array([[st.a, st.a], [st.a, st.b], [st.b, st.a], [st.b, st.b]])
    # receive gains on the events E1 (secondary main lobe) x E2 (primary main lobe)
    sr_gain = {True: ac.sr.a, False: ac.sr.b}
    pr_gain = {True: ac.pr.a, False: ac.pr.b}

    def fn(x, theta):
        z, beta = frame.locate(x, theta)
        e1 = np.abs(wrap_angle(theta)) <= ac.sr.phi / 2
        e2 = np.abs(wrap_angle(beta - pp.omega_p0)) <= ac.pr.phi / 2
        c_k = np.where(e1, sr_gain[True], sr_gain[False])
        d_k = np.where(e2, pr_gain[True], pr_gain[False])
        q = omega_weights_sectorized(theta - beta, st)
        pz = los_probability(z, b)
        px = los_probability(x, b)
        out = np.zeros((coef.size, x.size))
        for i in range(4):
            a_i, b_i = pairs[i]
            inactive = 0.0
            for s, pt in ((LinkState.LOS, pz), (LinkState.NLOS, 1.0 - pz)):
                inactive = inactive + pt * exp_neg_ratio(p.rho * z ** plp.alpha(s),
                                                         p.p_s * plp.constant(s) * a_i * d_k)
            active = 1.0 - inactive
            for s, pt in ((LinkState.LOS, px), (LinkState.NLOS, 1.0 - px)):
                c = plp.constant(s)
                if c == 0:
                    continue
                base = p.p_s * c * b_i * c_k * x ** (-plp.alpha(s))
                for j, cj in enumerate(coef):
                    w = cj * base
                    out[j] += q[:, i] * pt * active * w / (1.0 + w)
        return out

    return fn


def _coefficients(tau, frame):
    """``tau / A_0^T`` for every (state, tau) with a usable own link."""
    comps = []
    for s in STATES:
        if frame.a0[s] > 0:
            for j, t in enumerate(tau):
                comps.append((s, j, t / frame.a0[s]))
    return comps


def term4(tau, params: SystemParams, pp: PrimaryPlacement, method="general", rel_tol=None):
    """Secondary-interference integral for each serving state.

    Returns ``{LinkState: ndarray over tau}``; the coverage factor is
    ``exp(-lambda_s * value)``.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    frame = _Frame(params, pp)
    comps = _coefficients(tau, frame)
    coef = np.array([c for _, _, c in comps])
    if method == "general":
        fn = _point_general(frame, params, coef)
    elif method == "sectorized":
        fn = _point_sectorized(frame, params, coef)
    else:
        raise ValueError(f"unknown method {method!r}")
    vals = _double_integral(fn, frame, params, coef.size, rel_tol, _interference_scales(coef, params))
    out = {s: np.full(tau.shape, np.nan) for s in STATES}
    for (s, j, _), v in zip(comps, vals):
        out[s][j] = v
    return out


def term4_sectorized(params: SystemParams, pp: PrimaryPlacement, tau=1.0, rel_tol=None):
    """LOS serving-link interference term, boresight expectation in closed form.

    Valid when every pattern is sectorized or omni.
    """
    for bp in (params.antennas.st, params.antennas.sr, params.antennas.pr):
        if bp.kind == "ideal":
            raise DomainError("term4_sectorized needs sectorized or omni patterns")
    return term4(tau, params, pp, method="sectorized", rel_tol=rel_tol)


# ---------------------------------------------------------------------------
# Coverage
# ---------------------------------------------------------------------------

@dataclass
class SecondaryTerms:
    """The four factors of the secondary coverage, per serving state."""

    term1: Dict[LinkState, np.ndarray]
    term2: float
    term3: Dict[LinkState, np.ndarray]
    term4: Dict[LinkState, np.ndarray]
    lambda_s: float

    def coverage(self):
        total = 0.0
        for s in STATES:
            t4 = np.where(np.isnan(self.term4[s]), 0.0, self.term4[s])
            total = total + self.term1[s] * self.term3[s] * np.exp(-self.lambda_s * t4)
        return self.term2 * total

    def upper_bound(self):
        """Coverage with the secondary-interference factor dropped (never smaller)."""
        return self.term2 * sum(self.term1[s] * self.term3[s] for s in STATES)


def _noise_and_primary_terms(tau, frame, params, blockage=None):
    p = params
    b = p.blockage if blockage is None else blockage
    pl_s = float(los_probability(p.r_s, b))
    pl_x = float(los_probability(frame.pp.x_p0, b))
    term1, term3 = {}, {}
    for s, pt in ((LinkState.LOS, pl_s), (LinkState.NLOS, 1.0 - pl_s)):
        a0 = frame.a0[s]
        if a0 == 0 or pt == 0:
            term1[s] = np.zeros(tau.shape)
            term3[s] = np.zeros(tau.shape)
            continue
        term1[s] = pt * np.exp(-tau * p.sigma2 / a0)
        t3 = 0.0
        for s2, pt2 in ((LinkState.LOS, pl_x), (LinkState.NLOS, 1.0 - pl_x)):
            t3 = t3 + pt2 / (1.0 + tau * frame.a20[s2] / a0)
        term3[s] = t3
    return term1, term3


def secondary_terms(tau, params: SystemParams, pp: PrimaryPlacement, method="general",
                    with_term4=True, rel_tol=None) -> SecondaryTerms:
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(tau <= 0):
        raise DomainError("tau must be > 0")
    frame = _Frame(params, pp)
    term1, term3 = _noise_and_primary_terms(tau, frame, params)
    term2 = frame.own_map()
    if with_term4 and params.lambda_s > 0:
        t4 = term4(tau, params, pp, method, rel_tol)
    else:
        t4 = {s: np.zeros(tau.shape) for s in STATES}
    return SecondaryTerms(term1, term2, term3, t4, params.lambda_s)


def secondary_coverage(tau, params: SystemParams, pp: PrimaryPlacement, method="general", rel_tol=None):
    """Probability that the considered secondary link's SINR exceeds ``tau``.

    ``method`` selects how the boresight expectation inside the
    secondary-interference integral is evaluated ("general" by arcs,
    "sectorized" by closed-form pair weights).
    """
    scalar = np.ndim(tau) == 0
    terms = secondary_terms(tau, params, pp, method, rel_tol=rel_tol)
    v = checked_probability(terms.coverage())
    return float(v[0]) if scalar else v


def secondary_coverage_special(tau, params: SystemParams, pp: PrimaryPlacement, case, rel_tol=None):
    """Closed forms for all-LOS ("ZBL"), all-NLOS ("HBL") and NLOS-outage ("NOL") propagation.

    Each case writes out its own factors; the blockage rate and offset in
    ``params`` are used by the NOL case.
    """
    scalar = np.ndim(tau) == 0
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    p = params
    plp, ac = p.plp, p.antennas
    frame = _Frame(p, pp)
    case = case.upper()
    if case in ("ZBL", "HBL"):
        s = LinkState.LOS if case == "ZBL" else LinkState.NLOS
        alpha, c = plp.alpha(s), plp.constant(s)
        a0, a20 = frame.a0[s], frame.a20[s]
        a10 = p.p_s * c * frame.k00 * frame.z00 ** (-alpha)
        term1 = np.exp(-tau * p.sigma2 / a0)
        term2 = 1.0 - float(exp_neg_ratio(p.rho, a10))
        term3 = 1.0 / (1.0 + tau * a20 / a0)
        coef = tau / a0

        def fn(x, theta):
            z, beta = frame.locate(x, theta)
            wts, g_o, g_y = omega_pieces(theta, beta, ac.st)
            g_pr = gain(ac.pr, beta - pp.omega_p0)
            a_s0 = p.p_s * c * g_y * (g_pr * z ** (-alpha))[:, None]
            active = 1.0 - exp_neg_ratio(p.rho, a_s0)
            base = (p.p_s * c * gain(ac.sr, theta) * x ** (-alpha))[:, None] * g_o
            out = np.empty((coef.size, x.size))
            for j, cj in enumerate(coef):
                w = cj * base
                out[j] = np.sum(wts * active * w / (1.0 + w), axis=1)
            return out

        if p.lambda_s > 0:
            t4 = _double_integral(fn, frame, p, coef.size, rel_tol, _interference_scales(coef, p))
        else:
            t4 = np.zeros(tau.shape)
        v = term2 * term1 * term3 * np.exp(-p.lambda_s * t4)
    elif case == "NOL":
        if not plp.nlos_outage:
            raise DomainError("NOL case requires nlos_outage")
        b = p.blockage
        s = LinkState.LOS
        alpha, c = plp.alpha_l, plp.c_l
        a0, a20 = frame.a0[s], frame.a20[s]
        a10 = p.p_s * c * frame.k00 * frame.z00 ** (-alpha)
        pl = lambda d: float(los_probability(d, b))  # noqa: E731
        term1 = pl(p.r_s) * np.exp(-tau * p.sigma2 / a0)
        term2 = 1.0 - pl(frame.z00) * float(exp_neg_ratio(p.rho, a10))
        term3 = pl(pp.x_p0) / (1.0 + tau * a20 / a0) + (1.0 - pl(pp.x_p0))
        coef = tau / a0

        def fn(x, theta):
            z, beta = frame.locate(x, theta)
            wts, g_o, g_y = omega_pieces(theta, beta, ac.st)
            g_pr = gain(ac.pr, beta - pp.omega_p0)
            a_s0 = p.p_s * c * g_y * (g_pr * z ** (-alpha))[:, None]
            active = 1.0 - los_probability(z, b)[:, None] * exp_neg_ratio(p.rho, a_s0)
            base = (p.p_s * c * gain(ac.sr, theta) * x ** (-alpha))[:, None] * g_o
            px = los_probability(x, b)
            out = np.empty((coef.size, x.size))
            for j, cj in enumerate(coef):
                w = cj * base
                out[j] = px * np.sum(wts * active * w / (1.0 + w), axis=1)
            return out

        if p.lambda_s > 0:
            t4 = _double_integral(fn, frame, p, coef.size, rel_tol, _interference_scales(coef, p))
        else:
            t4 = np.zeros(tau.shape)
        v = term2 * term1 * term3 * np.exp(-p.lambda_s * t4)
    else:
        raise ValueError(f"unknown case {case!r}")
    v = checked_probability(v)
    return float(v[0]) if scalar else v


# ---------------------------------------------------------------------------
# Close / far approximations of the LOS serving-link interference term with NLOS links in outage
# ---------------------------------------------------------------------------

def _theta_pieces(edges):
    cuts = np.unique(np.concatenate([[-math.pi, math.pi], wrap_angle(np.asarray(edges, float))]))
    return cuts[:-1], cuts[1:]


def term4_approx(params: SystemParams, pp: PrimaryPlacement, regime, tau=1.0):
    """LOS serving-link interference term when the primary receiver is very close or very far.

    ``regime="close"`` replaces the interferer-to-primary distance by the
    interferer's own distance to the origin; ``"far"`` replaces it by
    ``y_p0``. The radial integral is then closed form; only the ``n = 0``
    blockage term is valid, so ``mu > 0`` raises :class:`SeriesError`.
    """
    p = params
    plp, ac, b = p.plp, p.antennas, p.blockage
    if not plp.nlos_outage:
        raise DomainError("term4_approx requires nlos_outage")
    if b.regime is BlockageRegime.GENERAL and b.mu > 0:
        raise SeriesError("term-wise radial moments diverge for mu > 0", math.nan, "invalid-expansion")
    frame = _Frame(p, pp)
    alpha = plp.alpha_l
    k = 2.0 / alpha
    a0 = frame.a0[LinkState.LOS]
    e_p = math.exp(-b.p)
    st = ac.st
    regime = regime.lower()
    # E_omega[g_st^k] for the toward-origin gain alone
    g_moment = st.moment(k) if st.kind != "omni" else 1.0

    def c_pow(theta):
        # E_omega[C^-k] without the transmit gain, C x^alpha = 1/w
        return (tau * p.p_s * plp.c_l * gain(ac.sr, theta) / a0) ** k

    if regime == "close":
        edges = list(ac.sr.edges()) + [pp.omega_p0 + e for e in ac.pr.edges()]
        lo, hi = _theta_pieces(edges)
        total = 0.0
        for a, bb in zip(lo, hi):
            th = 0.5 * (a + bb)
            g_sr, g_pr = gain(ac.sr, th), gain(ac.pr, th - pp.omega_p0)
            ratio = p.rho * tau * g_sr / (a0 * g_pr) if g_pr > 0 else math.inf
            second = 0.0 if math.isinf(ratio) else e_p * special.gamma(k) * tricomi_u(k, k, ratio)
            total += (bb - a) * (n1(k) - second) * c_pow(th) * g_moment
        return e_p * total / alpha
    if regime == "far":
        beta_far = frame.psi + math.pi  # bearing of the origin seen from the primary receiver
        g_pr = gain(ac.pr, beta_far - pp.omega_p0)
        y = frame.y
        pl_y = float(los_probability(y, b))
        edges = list(ac.sr.edges())
        if st.kind != "omni":
            edges += [beta_far + st.phi, beta_far - st.phi, beta_far]
        lo, hi = _theta_pieces(edges)
        total = 0.0
        gl_x, gl_w = np.polynomial.legendre.leggauss(8)
        for a, bb in zip(lo, hi):
            ths = 0.5 * (a + bb) + 0.5 * (bb - a) * gl_x
            wts, g_o, g_y = omega_pieces(ths, np.full(ths.shape, beta_far), st)
            inactive = pl_y * exp_neg_ratio(p.rho * y ** alpha, p.p_s * plp.c_l * g_y * g_pr)
            vals = np.sum(wts * (1.0 - inactive) * g_o ** k, axis=1) * c_pow(ths)
            total += 0.5 * (bb - a) * float(gl_w @ vals)
        return e_p * n1(k) * total / alpha
    raise ValueError(f"unknown regime {regime!r}")


# ---------------------------------------------------------------------------
# Typical secondary user
# ---------------------------------------------------------------------------

def typical_placements(R, n, r_p, r_s, seed=20240601):
    """Scrambled Sobol placements: ``x = R sqrt(u)``, uniform bearing and boresight."""
    m = int(math.ceil(math.log2(max(n, 1))))
    u = qmc.Sobol(d=3, scramble=True, seed=seed).random_base2(m)[:n]
    out = []
    for u0, u1, u2 in u:
        x = R * math.sqrt(u0)
        if x <= 0:
            x = R * 1e-9
        out.append(PrimaryPlacement(x, TWO_PI * u1 - math.pi, TWO_PI * u2 - math.pi, r_p, r_s))
    return out


def typical_secondary_coverage(tau, params: SystemParams, R=None, n_placements=64, rel_tol=1e-5,
                               seed=20240601, return_samples=False):
    """Secondary coverage averaged over a uniformly placed primary link in a disk of radius ``R``.

    The three-dimensional average over (distance, bearing, boresight) uses
    ``n_placements`` scrambled Sobol points; each placement is evaluated with
    relative tolerance ``rel_tol``.
    """
    scalar = np.ndim(tau) == 0
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    R = params.region_R if R is None else float(R)
    if not R > 0:
        raise DomainError("R must be > 0")
    samples = []
    for pp in typical_placements(R, n_placements, params.r_p, params.r_s, seed):
        try:
            samples.append(secondary_coverage(tau, params, pp, rel_tol=rel_tol))
        except DegenerateGeometryError:  # pragma: no cover - measure-zero event
            continue
    samples = np.array(samples)
    v = checked_probability(samples.mean(axis=0))
    if return_samples:
        return v, samples
    return float(v[0]) if scalar else v
