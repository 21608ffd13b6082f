"""First-principles network simulator used as the oracle for every closed form.

Each realization ``i`` draws from its own Philox stream keyed by
``(seed, i)``, so results do not depend on the number of worker threads.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .analytic.params import CoverageCurve, SecondaryPlacement, SystemParams
from .channel import gain, path_loss_mixed
from .geometry import COINCIDENCE_TOL, DegenerateGeometryError, PrimaryPlacement, los_probability

__all__ = [
    "McConfig",
    "McEstimate",
    "Realization",
    "realization_rng",
    "sample_realization",
    "batch_means",
    "estimate_map",
    "estimate_af",
    "estimate_primary_coverage",
    "estimate_secondary_coverage",
    "estimate_mean_interference",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class McConfig:
    """Simulation controls.

    ``region_R`` (default ``r_sim / 2``) is the disk on which per-node
    statistics are collected; interference is summed over the full ``r_sim``
    disk to avoid edge effects.
    """

    n_realizations: int = 20000
    seed: int = 20240601
    r_sim: float = 4000.0
    region_R: Optional[float] = None
    antithetic_fading: bool = False
    n_batches: int = 20
    threads: int = 1

    def __post_init__(self):
        if self.n_realizations < 1 or self.n_batches < 2:
            raise ValueError("need at least one realization and two batches")
        if not self.r_sim > 0:
            raise ValueError("r_sim must be > 0")
        if self.region_R is not None and not 0 < self.region_R <= self.r_sim:
            raise ValueError("region_R must lie in (0, r_sim]")

    @property
    def region(self) -> float:
        return 0.5 * self.r_sim if self.region_R is None else self.region_R


@dataclass
class McEstimate:
    """Sample mean with its standard error over ``n`` trials."""

    mean: np.ndarray
    stderr: np.ndarray
    n: int

    def z_score(self, reference):
        """``|mean - reference| / stderr`` (``inf`` where the gap is nonzero and the error is zero)."""
        gap = np.abs(np.asarray(self.mean) - np.asarray(reference))
        se = np.asarray(self.stderr)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(se > 0, gap / np.where(se > 0, se, 1.0), np.where(gap > 0, np.inf, 0.0))


@dataclass
class Realization:
    """Secondary transmitters and their per-path randomness toward each target receiver.

    ``los[k]`` and ``fading[k]`` hold the independent blockage state and
    power fading of every transmitter's path to ``targets[k]``.
    """

    xy: np.ndarray
    omega: np.ndarray
    targets: np.ndarray
    dist: np.ndarray
    los: np.ndarray
    fading: np.ndarray

    @property
    def n(self) -> int:
        return self.xy.shape[0]


def realization_rng(seed, index) -> np.random.Generator:
    """Independent stream for realization ``index`` (depends only on ``seed`` and ``index``)."""
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, int(index), 0, 0]))


def _exp_fading(rng, size, antithetic=False):
    u = rng.random(size)
    if antithetic:
        return -np.log(np.maximum(u, np.finfo(float).tiny))
    return -np.log1p(-u)


def sample_realization(params: SystemParams, mc: McConfig, rng: np.random.Generator, targets=((0.0, 0.0),),
                       radius=None, antithetic=False) -> Realization:
    """Poisson field on the disk of ``radius`` (default ``r_sim``) centred at the origin."""
    radius = mc.r_sim if radius is None else float(radius)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    n = rng.poisson(params.lambda_s * math.pi * radius ** 2) if params.lambda_s > 0 else 0
    r = radius * np.sqrt(rng.random(n))
    phi = TWO_PI * rng.random(n)
    xy = np.stack([r * np.cos(phi), r * np.sin(phi)], axis=1)
    omega = TWO_PI * rng.random(n) - math.pi
    dist = np.hypot(xy[None, :, 0] - targets[:, 0, None], xy[None, :, 1] - targets[:, 1, None])
    los = rng.random(dist.shape) < los_probability(dist, params.blockage)
    fading = _exp_fading(rng, dist.shape, antithetic)
    return Realization(xy, omega, targets, dist, los, fading)


def batch_means(samples, n_batches=20):
    """Mean and batch-means standard error along the first axis."""
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    k = min(n_batches, n)
    if k < 2:
        return mean, np.full(np.shape(mean), np.nan)
    batches = np.array([b.mean(axis=0) for b in np.array_split(samples, k, axis=0)])
    sizes = np.array([len(b) for b in np.array_split(np.arange(n), k)], dtype=float)
    # size-weighted spread so unequal batches stay unbiased
    w = sizes / sizes.sum()
    dev = batches - mean
    var = np.tensordot(w, dev ** 2, axes=1) * k / (k - 1)
    return mean, np.sqrt(var / k)


def _run(trial, mc: McConfig):
    """Evaluate ``trial(i)`` for every realization index, in index order."""
    n = mc.n_realizations

    def one(i):
        if mc.antithetic_fading:
            return 0.5 * (np.asarray(trial(i, False), float) + np.asarray(trial(i, True), float))
        return np.asarray(trial(i, False), float)

    if mc.threads <= 1:
        out = [one(i) for i in range(n)]
    else:
        chunks = np.array_split(np.arange(n), mc.threads * 4)
        with ThreadPoolExecutor(max_workers=mc.threads) as pool:
            parts = list(pool.map(lambda c: [one(i) for i in c], chunks))
        out = [v for part in parts for v in part]
    return np.array(out)


# ---------------------------------------------------------------------------
# Medium access and activity
# ---------------------------------------------------------------------------

def estimate_map(sp: SecondaryPlacement, params: SystemParams, n=100000, seed=0) -> McEstimate:
    """Fraction of (blockage, fading) draws that permit a fixed transmitter to transmit."""
    ac = params.antennas
    rng = realization_rng(seed, 0)
    kappa = gain(ac.pr, sp.theta_s) * gain(ac.st, sp.theta_s - math.pi - sp.omega_s)
    los = rng.random(n) < los_probability(sp.x_s, params.blockage)
    fade = rng.standard_exponential(n)
    power = params.p_s * kappa * fade * path_loss_mixed(np.full(n, sp.x_s), los, params.plp)
    u = (power < params.rho).astype(float)
    return McEstimate(u.mean(), u.std(ddof=1) / math.sqrt(n) if n > 1 else math.nan, n)


def estimate_af(params: SystemParams, mc: McConfig, R=None) -> McEstimate:
    """Mean active count in the disk of radius ``R`` divided by its mean total count."""
    R = params.region_R if R is None else float(R)
    expected = params.lambda_s * math.pi * R ** 2
    if not expected > 0:
        raise ValueError("expected node count is zero; activity factor undefined")
    ac = params.antennas

    def trial(i, anti):
        real = sample_realization(params, mc, realization_rng(mc.seed, i), radius=R, antithetic=anti)
        if real.n == 0:
            return 0.0
        theta = np.arctan2(real.xy[:, 1], real.xy[:, 0])
        kappa = gain(ac.pr, theta) * gain(ac.st, theta - math.pi - real.omega)
        power = params.p_s * kappa * real.fading[0] * path_loss_mixed(real.dist[0], real.los[0], params.plp)
        return np.count_nonzero(power < params.rho) / expected

    mean, se = batch_means(_run(trial, mc), mc.n_batches)
    return McEstimate(float(mean), float(se), mc.n_realizations)


# ---------------------------------------------------------------------------
# Coverage
# ---------------------------------------------------------------------------

def _primary_interference(real, params, decorrelate=False, rng=None):
    ac = params.antennas
    if real.n == 0:
        return 0.0
    theta = np.arctan2(real.xy[:, 1], real.xy[:, 0])
    kappa = gain(ac.pr, theta) * gain(ac.st, theta - math.pi - real.omega)
    loss = path_loss_mixed(real.dist[0], real.los[0], params.plp)
    power = params.p_s * kappa * real.fading[0] * loss
    active = power < params.rho
    if decorrelate:
        # indicator and interference on separate fading draws (regression check only)
        power = params.p_s * kappa * rng.standard_exponential(real.n) * loss
    return float(np.sum(power[active]))


def estimate_primary_coverage(tau_grid, params: SystemParams, mc: McConfig, _decorrelate=False) -> CoverageCurve:
    """Primary coverage on a threshold grid (linear ``tau``) with common random numbers."""
    tau = np.atleast_1d(np.asarray(tau_grid, dtype=float))
    ac, plp = params.antennas, params.plp
    sig_gain = params.p_p * gain(ac.pt, 0.0) * gain(ac.pr, 0.0)
    p_los = float(los_probability(params.r_p, params.blockage))

    def trial(i, anti):
        rng = realization_rng(mc.seed, i)
        own_los = rng.random() < p_los
        own_fade = _exp_fading(rng, 1, anti)[0]
        signal = sig_gain * own_fade * float(path_loss_mixed(params.r_p, own_los, plp))
        real = sample_realization(params, mc, rng, antithetic=anti)
        interference = _primary_interference(real, params, _decorrelate, rng)
        return signal > tau * (params.sigma2 + interference)

    samples = _run(trial, mc)
    mean, se = batch_means(samples, mc.n_batches)
    return CoverageCurve(_to_db(tau), mean, "mc", params.fingerprint(), se, mc.n_realizations)


def _to_db(tau):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(tau)


def _secondary_trial(tau, params, pp: PrimaryPlacement, real, rng, anti):
    ac, plp = params.antennas, params.plp
    yx, yy = pp.rx_xy
    # own link
    own_los = rng.random() < float(los_probability(params.r_s, params.blockage))
    own_fade = _exp_fading(rng, 1, anti)[0]
    signal = params.p_s * gain(ac.st, 0.0) * gain(ac.sr, 0.0) * own_fade * float(
        path_loss_mixed(params.r_s, own_los, plp))
    # own transmit permission toward the primary receiver
    z00, beta00 = pp.z00, pp.beta00
    if z00 < COINCIDENCE_TOL:
        raise DegenerateGeometryError("secondary transmitter coincides with the primary receiver")
    los00 = rng.random() < float(los_probability(z00, params.blockage))
    fade00 = _exp_fading(rng, 1, anti)[0]
    p00 = params.p_s * gain(ac.st, beta00) * gain(ac.pr, beta00 - pp.omega_p0) * fade00 * float(
        path_loss_mixed(z00, los00, plp))
    if not p00 < params.rho:
        return np.zeros(tau.shape, dtype=bool)
    # primary interference
    los_p = rng.random() < float(los_probability(pp.x_p0, params.blockage))
    fade_p = _exp_fading(rng, 1, anti)[0]
    i_p = params.p_p * gain(ac.pt, pp.delta_p0 - pp.omega_p0) * gain(ac.sr, pp.delta_p0) * fade_p * float(
        path_loss_mixed(pp.x_p0, los_p, plp))
    # secondary interference; target 0 is the origin, target 1 the primary receiver
    i_s = 0.0
    if real.n:
        theta = np.arctan2(real.xy[:, 1], real.xy[:, 0])
        beta = np.arctan2(real.xy[:, 1] - yy, real.xy[:, 0] - yx)
        k_y = gain(ac.st, beta + math.pi - real.omega) * gain(ac.pr, beta - pp.omega_p0)
        p_y = params.p_s * k_y * real.fading[1] * path_loss_mixed(real.dist[1], real.los[1], plp)
        active = p_y < params.rho
        k_o = gain(ac.st, theta + math.pi - real.omega) * gain(ac.sr, theta)
        p_o = params.p_s * k_o * real.fading[0] * path_loss_mixed(real.dist[0], real.los[0], plp)
        i_s = float(np.sum(p_o[active]))
    return signal > tau * (params.sigma2 + i_p + i_s)


def estimate_secondary_coverage(tau_grid, params: SystemParams, pp, mc: McConfig) -> CoverageCurve:
    """Coverage of the considered secondary link (receiver at the origin).

    ``pp`` is a :class:`PrimaryPlacement` or the string ``"typical"``, in
    which case each realization places the primary link uniformly in the
    ``mc.region`` disk with uniform boresight.
    """
    tau = np.atleast_1d(np.asarray(tau_grid, dtype=float))
    typical = isinstance(pp, str)
    if typical and pp.lower() != "typical":
        raise ValueError(f"unknown placement {pp!r}")

    def trial(i, anti):
        rng = realization_rng(mc.seed, i)
        if typical:
            u = rng.random(3)
            place = PrimaryPlacement(max(mc.region * math.sqrt(u[0]), 1e-9), TWO_PI * u[1] - math.pi,
                                     TWO_PI * u[2] - math.pi, params.r_p, params.r_s)
        else:
            place = pp
        real = sample_realization(params, mc, rng, targets=((0.0, 0.0), tuple(place.rx_xy)), antithetic=anti)
        return _secondary_trial(tau, params, place, real, rng, anti)

    samples = _run(trial, mc)
    mean, se = batch_means(samples, mc.n_batches)
    return CoverageCurve(_to_db(tau), mean, "mc", params.fingerprint(), se, mc.n_realizations)


# ---------------------------------------------------------------------------
# Mean interference without fading and directionality
# ---------------------------------------------------------------------------

def estimate_mean_interference(params: SystemParams, mc: McConfig, case) -> McEstimate:
    """Mean aggregate interference at the origin when every path is in state ``case``.

    Powers are deterministic (``p_s C x**-alpha``), so transmitters inside the
    exclusion radius never transmit. Realization ``i`` uses the same positions
    for every ``case``.
    """
    los = str(case).upper() in ("LOS", "L")
    plp = params.plp
    alpha = plp.alpha_l if los else plp.alpha_n
    if alpha <= 2:
        warnings.warn("mean interference diverges for alpha <= 2; estimate grows with r_sim", RuntimeWarning)
    c = plp.c_l if los else plp.c_n_eff

    def trial(i, anti):
        rng = realization_rng(mc.seed, i)
        n = rng.poisson(params.lambda_s * math.pi * mc.r_sim ** 2)
        r = mc.r_sim * np.sqrt(rng.random(n))
        power = params.p_s * c * np.maximum(r, 1.0) ** (-alpha)
        return float(np.sum(power[power < params.rho]))

    mean, se = batch_means(_run(trial, mc), mc.n_batches)
    return McEstimate(float(mean), float(se), mc.n_realizations)

