"""Special functions and numerical kernels.

Everything here is deterministic: identical inputs give bit-identical
outputs, and the adaptive integrator reduces in a fixed order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special

__all__ = [
    "QuadratureSpec",
    "DomainError",
    "PoleError",
    "SeriesError",
    "QuadratureError",
    "QuadResult",
    "SeriesResult",
    "integrate_batch",
    "adaptive_quad",
    "lower_inc_gamma",
    "scaled_lower_gamma",
    "psi",
    "n1",
    "n2",
    "tricomi_u",
    "alternating_blockage_series",
]


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


class PoleError(DomainError):
    """Evaluation at a pole of a meromorphic function."""


class SeriesError(ArithmeticError):
    """An alternating blockage series failed to converge or lost precision.

    Attributes
    ----------
    partial_sum : float
        Value of the truncated sum when the failure was detected.
    reason : str
        Short machine-readable reason.
    """

    def __init__(self, message, partial_sum=float("nan"), reason="nonconvergence"):
        super().__init__(message)
        self.partial_sum = partial_sum
        self.reason = reason


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance.

    Carries the partial value and error estimate for diagnostics.
    """

    def __init__(self, message, value=None, error=None):
        super().__init__(message)
        self.value = value
        self.error = error


@dataclass(frozen=True)
class QuadratureSpec:
    """Numerical controls shared by every integral and series.

    ``radial_upper_bound`` may be ``math.inf`` to integrate over the whole
    plane. ``series_cancellation_tol`` bounds the estimated relative rounding
    error of an alternating sum before it is reported as a failure.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 4000
    radial_upper_bound: float = 4000.0
    series_max_terms: int = 60
    series_term_tol: float = 1e-12
    series_cancellation_tol: float = 1e-8

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.radial_upper_bound > 0:
            raise ValueError("radial_upper_bound must be positive")
        if self.max_subdivisions < 1 or self.series_max_terms < 1:
            raise ValueError("subdivision and term limits must be >= 1")
        if not (self.series_term_tol > 0 and self.series_cancellation_tol > 0):
            raise ValueError("series tolerances must be positive")


# ---------------------------------------------------------------------------
# Adaptive Gauss-Kronrod (7/15) quadrature, vectorized over many integrals
# ---------------------------------------------------------------------------

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# 15 nodes on [-1, 1], ordered -x0..-x6, 0, x6..x0
_NODES = np.concatenate([-_XGK[:7], [0.0], _XGK[6::-1]])
_KRONROD_W = np.concatenate([_WGK[:7], [_WGK[7]], _WGK[6::-1]])
_GAUSS_W = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod abscissae (x1, x3, x5) and the centre
for j, g in zip((1, 3, 5), _WG[:3]):
    _GAUSS_W[j] = g
    _GAUSS_W[14 - j] = g
_GAUSS_W[7] = _WG[3]

_EPS = np.finfo(float).eps
_TINY = np.finfo(float).tiny


@dataclass
class QuadResult:
    value: np.ndarray
    error: np.ndarray
    n_intervals: np.ndarray
    converged: np.ndarray


def _eval_intervals(func, lo, hi, owner, tail_c, tail_p, is_tail):
    """Kronrod/Gauss estimates on each working-variable interval.

    Tail intervals live in ``v in (0, 1]`` with ``x = c v**(-p)``.
    """
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    t = (center[:, None] + half[:, None] * _NODES[None, :]).ravel()
    own = np.repeat(owner, 15)
    tail = np.repeat(is_tail, 15)
    c = tail_c[own]
    p = tail_p[own]
    with np.errstate(divide="ignore", over="ignore"):
        tv = np.where(tail, t, 1.0)
        x = np.where(tail, c * tv ** (-p), t)
        jac = np.where(tail, c * p * tv ** (-p - 1.0), 1.0)
    f = np.asarray(func(x, own), dtype=float)
    if f.ndim == 1:
        f = f[None, :]
    m = f.shape[0]
    f = (f * jac[None, :]).reshape(m, lo.size, 15)
    f = np.where(np.isfinite(f), f, np.nan)
    resk = f @ _KRONROD_W
    resg = f @ _GAUSS_W
    resabs = np.abs(f) @ _KRONROD_W
    mean = 0.5 * resk
    resasc = np.abs(f - mean[..., None]) @ _KRONROD_W
    val = resk * half
    resabs = resabs * np.abs(half)
    resasc = resasc * np.abs(half)
    err = np.abs((resk - resg) * half)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where((resasc != 0) & (err != 0), scaled, err)
    err = np.where(resabs > _TINY / (50 * _EPS), np.maximum(50 * _EPS * resabs, err), err)
    return val, err, resabs


def integrate_batch(
    func: Callable,
    lower,
    upper,
    breakpoints: Optional[Sequence] = None,
    rel_tol: float = 1e-8,
    abs_tol: float = 1e-12,
    max_subdivisions: int = 4000,
    raise_on_failure: bool = True,
    tail_power: float = 1.0,
) -> QuadResult:
    """Integrate many one-dimensional integrals at once.

    Parameters
    ----------
    func : callable
        ``func(x, owner)`` evaluated on flat arrays of abscissae and the index
        of the integral each abscissa belongs to. Returns shape ``(n,)`` or
        ``(m, n)`` for vector-valued integrands.
    lower, upper : array_like
        Limits of each integral. ``upper`` may be ``inf``.
    breakpoints : sequence of array_like, optional
        Interior points (kinks, jumps) for each integral.
    rel_tol, abs_tol : float
        Per-component stopping rule ``err <= max(abs_tol, rel_tol*|value|)``.
    max_subdivisions : int
        Interval budget per integral.
    raise_on_failure : bool
        Raise :class:`QuadratureError` when any integral misses tolerance.
    tail_power : float
        Exponent ``p`` of the map ``x = c v**(-p)`` used beyond the last
        breakpoint ``c`` of an infinite range. An integrand decaying like
        ``x**(-g)`` becomes smooth in ``v`` for ``p = 1/(g - 1)``.

    Returns
    -------
    QuadResult
        ``value`` and ``error`` have shape ``(m, n_integrals)`` (``m`` dropped
        for scalar integrands).
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.broadcast_to(np.asarray(upper, dtype=float), lower.shape).copy()
    n_own = lower.size
    infinite = np.isinf(upper)
    if np.any(np.isinf(lower)) or np.any(upper < lower):
        raise DomainError("need finite lower limit and upper >= lower")

    # initial partition; infinite ranges end in a mapped tail piece
    los, his, owners, tails = [], [], [], []
    tail_c = np.ones(n_own)
    tail_p = np.full(n_own, float(tail_power))
    for k in range(n_own):
        a, b = lower[k], upper[k]
        cuts = [] if breakpoints is None else np.asarray(breakpoints[k], dtype=float).ravel()
        cuts = np.asarray([c for c in cuts if np.isfinite(c) and a < c < b])
        if infinite[k]:
            c = cuts.max() if cuts.size else max(a + 1.0, 2.0 * a, 1.0)
            tail_c[k] = c
            edges = np.unique(np.concatenate([[a], cuts, [c]]))
            los.append(np.append(edges[:-1], 0.0))
            his.append(np.append(edges[1:], 1.0))
            owners.append(np.full(edges.size, k))
            tails.append(np.append(np.zeros(edges.size - 1, bool), True))
            continue
        edges = np.unique(np.concatenate([[a], cuts, [b]]))
        if edges.size < 2:
            continue
        los.append(edges[:-1])
        his.append(edges[1:])
        owners.append(np.full(edges.size - 1, k))
        tails.append(np.zeros(edges.size - 1, bool))
    if not los:
        return QuadResult(np.zeros(n_own), np.zeros(n_own), np.zeros(n_own, int), np.ones(n_own, bool))
    lo = np.concatenate(los)
    hi = np.concatenate(his)
    owner = np.concatenate(owners)
    is_tail = np.concatenate(tails)
    span = np.zeros(n_own)
    np.add.at(span, owner, hi - lo)

    val, err, resabs = _eval_intervals(func, lo, hi, owner, tail_c, tail_p, is_tail)
    m = val.shape[0]
    frozen = np.zeros(lo.size, bool)
    converged = np.zeros(n_own, bool)
    while True:
        tot_val = np.zeros((m, n_own))
        tot_err = np.zeros((m, n_own))
        for c in range(m):
            np.add.at(tot_val[c], owner, val[c])
            np.add.at(tot_err[c], owner, err[c])
        tol = np.maximum(abs_tol, rel_tol * np.abs(tot_val))
        if not np.all(np.isfinite(tot_val)):
            raise QuadratureError("non-finite integrand values", tot_val, tot_err)
        converged = np.all(tot_err <= tol, axis=0)
        counts = np.bincount(owner, minlength=n_own)
        # an interval whose error is at the rounding floor cannot improve
        floor = np.all(err <= 50 * _EPS * np.maximum(resabs, _TINY), axis=0)
        frozen |= floor
        share = (hi - lo) / span[owner]
        ratio = np.max(err / tol[:, owner], axis=0)
        active = ~converged[owner] & ~frozen & (counts[owner] < max_subdivisions)
        split = active & (ratio > share)
        if not np.any(split):
            if not np.any(active):
                break
            # refine the worst active interval of each unconverged owner
            idx = np.flatnonzero(active)
            order = np.lexsort((-ratio[idx], owner[idx]))
            first = np.unique(owner[idx][order], return_index=True)[1]
            split = np.zeros(lo.size, bool)
            split[idx[order][first]] = True
        keep = ~split
        mid = 0.5 * (lo[split] + hi[split])
        new_lo = np.concatenate([lo[split], mid])
        new_hi = np.concatenate([mid, hi[split]])
        new_owner = np.concatenate([owner[split], owner[split]])
        new_tail = np.concatenate([is_tail[split], is_tail[split]])
        nv, ne, nr = _eval_intervals(func, new_lo, new_hi, new_owner, tail_c, tail_p, new_tail)
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        owner = np.concatenate([owner[keep], new_owner])
        is_tail = np.concatenate([is_tail[keep], new_tail])
        val = np.concatenate([val[:, keep], nv], axis=1)
        err = np.concatenate([err[:, keep], ne], axis=1)
        resabs = np.concatenate([resabs[:, keep], nr], axis=1)
        frozen = np.concatenate([frozen[keep], np.zeros(new_lo.size, bool)])
        # deterministic ordering: owner, piece kind, position
        order = np.lexsort((lo, is_tail, owner))
        lo, hi, owner, is_tail = lo[order], hi[order], owner[order], is_tail[order]
        val, err, resabs, frozen = val[:, order], err[:, order], resabs[:, order], frozen[order]

    counts = np.bincount(owner, minlength=n_own)
    # owners whose remaining intervals all sit at the rounding floor are accepted
    at_floor = np.ones(n_own, bool)
    np.logical_and.at(at_floor, owner, frozen)
    ok = converged | (at_floor & (counts < max_subdivisions))
    if raise_on_failure and not np.all(ok):
        raise QuadratureError(
            f"adaptive quadrature missed tolerance on {int(np.sum(~ok))} of {n_own} integrals",
            tot_val, tot_err)
    if m == 1:
        return QuadResult(tot_val[0], tot_err[0], counts, ok)
    return QuadResult(tot_val, tot_err, counts, ok)


def adaptive_quad(f, a, b, breakpoints=(), rel_tol=1e-10, abs_tol=1e-14,
                  max_subdivisions=4000, tail_power=1.0):
    """Adaptive G7/K15 quadrature of a vectorized integrand on ``[a, b]``.

    ``b`` may be ``inf``. Returns ``(value, error)``; the value is an array
    when ``f`` returns stacked components of shape ``(m, n)``.

    Examples
    --------
    >>> adaptive_quad(np.exp, 0.0, 1.0)[0]  # doctest: +ELLIPSIS
    1.718281828459...
    """
    res = integrate_batch(lambda x, _: f(x), [a], [b], [breakpoints], rel_tol=rel_tol,
                          abs_tol=abs_tol, max_subdivisions=max_subdivisions, tail_power=tail_power)
    if np.ndim(res.value) == 1:
        return float(res.value[0]), float(res.error[0])
    return res.value[:, 0], res.error[:, 0]


# ---------------------------------------------------------------------------
# Incomplete gamma and the radial kernel
# ---------------------------------------------------------------------------

def lower_inc_gamma(a, b):
    """Unnormalized lower incomplete gamma ``int_0^b t^(a-1) e^-t dt``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a <= 0):
        raise DomainError("lower_inc_gamma requires a > 0")
    if np.any(b < 0):
        raise DomainError("lower_inc_gamma requires b >= 0")
    out = special.gamma(a) * special.gammainc(a, b)
    return out[()] if out.ndim == 0 else out


def scaled_lower_gamma(a, b):
    """``b**(-a) * gamma_lower(a, b)``, stable for tiny ``b`` and large ``a``.

    Tends to ``1/a`` as ``b -> 0`` and to ``Gamma(a) b**(-a)`` as ``b`` grows;
    ``b = inf`` gives 0.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    out = np.empty(a.shape)
    small = b <= np.maximum(a + 1.0, 1.0)
    # power series e^-b sum b^k / (a (a+1) ... (a+k))
    if np.any(small):
        aa, bb = a[small], b[small]
        term = 1.0 / aa
        total = term.copy()
        for k in range(1, 400):
            term = term * bb / (aa + k)
            total = total + term
            if np.all(term <= 1e-17 * total):
                break
        out[small] = np.exp(-bb) * total
    big = ~small
    if np.any(big):
        aa, bb = a[big], b[big]
        with np.errstate(divide="ignore", over="ignore", under="ignore"):
            logv = special.gammaln(aa) - aa * np.log(bb)
            out[big] = np.exp(logv) * special.gammainc(aa, bb)
        out[big] = np.where(np.isinf(bb), 0.0, out[big])
    return out[()] if out.ndim == 0 else out


def psi(state, m, u, R, plp):
    """Radial kernel of the activity-factor series.

    ``psi_L(m,u) = u**(-m/alpha_L) * gamma_lower(m/alpha_L, u R**alpha_L)`` and
    the NLOS branch is the same expression in ``alpha_N`` with a leading minus.
    ``u = inf`` (a link that never clears the threshold) returns 0.

    Parameters
    ----------
    state : LinkState or str
        ``"L"`` / ``"N"`` or the enum.
    m : float
        Moment order (> 0).
    u : float or ndarray
        Scale (> 0).
    R : float
        Outer radius; ``inf`` gives the complete gamma.
    plp : PathLossParams
    """
    los = _is_los(state)
    alpha = plp.alpha_l if los else plp.alpha_n
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0) or m <= 0 or R <= 0:
        raise DomainError("psi requires u > 0, m > 0 and R > 0")
    a = m / alpha
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        if math.isinf(R):
            val = np.where(np.isinf(u), 0.0, u ** (-a) * special.gamma(a))
        else:
            val = R ** m * scaled_lower_gamma(a, u * R ** alpha)
    val = np.asarray(val, dtype=float)
    out = val if los else -val
    return out[()] if out.ndim == 0 else out


def _is_los(state):
    name = getattr(state, "name", state)
    if name in ("LOS", "L"):
        return True
    if name in ("NLOS", "N"):
        return False
    raise DomainError(f"unknown link state {state!r}")


# ---------------------------------------------------------------------------
# The n1/n2 family and Tricomi U
# ---------------------------------------------------------------------------

def n1(k):
    """``pi / sin(pi k)``; poles at integer ``k`` raise :class:`PoleError`."""
    k = float(k)
    if k <= 0:
        raise PoleError(f"n1 requires k > 0, got {k}")
    s = math.sin(math.pi * k)
    if abs(k - round(k)) < 1e-12 or s == 0.0:
        raise PoleError(f"n1 has a pole at integer k={k}")
    return math.pi / s


def n2(k, nu, rel_tol=1e-12):
    """``int_nu^inf e^-u u^-1 (u - nu)^k du`` by adaptive quadrature.

    Written as ``e^-nu * int_0^inf t^k e^-t / (t + nu) dt`` after the shift
    ``u = nu + t``, then ``t = v**(1/k')`` with ``k' = max(k, 1e-3)`` to tame
    the algebraic endpoint behaviour.
    """
    k = float(k)
    nu = float(nu)
    if nu < 0 or k < 0 or (k == 0 and nu == 0):
        raise DomainError("n2 requires nu >= 0 and k > 0 (or k = 0 with nu > 0)")
    if math.isinf(nu) or nu > 745.0:
        return 0.0
    if k == 0:
        return float(special.exp1(nu))  # pragma: no cover - trivial branch
    p = 1.0 / k

    def integrand(v):
        t = v ** p
        # t^k dt = v * p v^(p-1) dv  ->  p * t
        return p * t * np.exp(-t) / (t + nu)

    brk = [nu ** k] if nu > 0 else []
    val, _ = adaptive_quad(integrand, 0.0, np.inf, breakpoints=brk, rel_tol=rel_tol, abs_tol=1e-300)
    return math.exp(-nu) * val


def tricomi_u(a, b, z, rel_tol=1e-12):
    """Confluent hypergeometric ``U(a, b, z)`` from its Laplace-type integral.

    Uses ``s = z t`` and ``s = v**(1/a)`` so the integrand is smooth at the
    origin for every ``a > 0``.
    """
    a, b, z = float(a), float(b), float(z)
    if a <= 0:
        raise DomainError("tricomi_u requires a > 0")
    if z <= 0:
        raise DomainError("tricomi_u requires z > 0")
    p = 1.0 / a
    expo = b - a - 1.0

    def integrand(v):
        s = v ** p
        return p * np.exp(-s) * (1.0 + s / z) ** expo

    val, _ = adaptive_quad(integrand, 0.0, np.inf, breakpoints=[1.0], rel_tol=rel_tol, abs_tol=1e-300)
    return z ** (-a) * val / special.gamma(a)


# ---------------------------------------------------------------------------
# Alternating blockage series
# ---------------------------------------------------------------------------

@dataclass
class SeriesResult:
    value: float
    n_terms: int
    abs_sum: float


def alternating_blockage_series(term, mu, spec: QuadratureSpec = QuadratureSpec(),
                                check_cancellation=True) -> SeriesResult:
    """Sum ``sum_n (-mu)^n / n! * term(n)`` with convergence bookkeeping.

    Stops once ``|term_n| < series_term_tol * |partial|`` for three
    consecutive ``n``. Raises :class:`SeriesError` (carrying the partial sum)
    when ``series_max_terms`` is reached first, or when the estimated rounding
    error ``eps * sum|term_n| / |sum|`` exceeds ``series_cancellation_tol``.

    ``mu`` is the dimensionless product (rate times length scale); callers
    scale ``term`` accordingly.
    """
    mu = float(mu)
    if mu < 0:
        raise DomainError("mu must be >= 0")
    if mu == 0:
        v = float(term(0))
        return SeriesResult(v, 1, abs(v))
    total = 0.0
    abs_total = 0.0
    small_run = 0
    log_mu = math.log(mu)
    for n in range(spec.series_max_terms):
        coef = (-1) ** n * math.exp(n * log_mu - math.lgamma(n + 1))
        t = coef * float(term(n))
        if not math.isfinite(t):
            raise SeriesError(f"non-finite series term at n={n}", total, "nonfinite")
        total += t
        abs_total += abs(t)
        if abs(t) < spec.series_term_tol * abs(total):
            small_run += 1
            if small_run >= 3:
                break
        else:
            small_run = 0
    else:
        raise SeriesError(
            f"series did not converge within {spec.series_max_terms} terms", total, "nonconvergence")
    if check_cancellation:
        lost = _EPS * abs_total / max(abs(total), _TINY)
        if lost > spec.series_cancellation_tol:
            raise SeriesError(
                f"catastrophic cancellation: estimated relative rounding error {lost:.2e}",
                total, "cancellation")
    return SeriesResult(total, n + 1, abs_total)
