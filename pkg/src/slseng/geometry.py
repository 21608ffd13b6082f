"""Planar geometry, the secondary-receiver frame, and Boolean blockage."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .specfun import DomainError

__all__ = [
    "wrap_angle",
    "PolarPoint",
    "BlockageRegime",
    "BlockageParams",
    "PrimaryPlacement",
    "PLACEMENT_PRESETS",
    "DegenerateGeometryError",
    "los_probability",
    "beta_to_primary",
    "beta_arcsin",
    "distance_to_primary_rx",
]

TWO_PI = 2.0 * math.pi
COINCIDENCE_TOL = 1e-9  # m


class DegenerateGeometryError(ValueError):
    """Two points that must be distinct coincide."""


def wrap_angle(theta):
    """Map angles to ``[-pi, pi)``."""
    out = np.mod(np.asarray(theta, dtype=float) + math.pi, TWO_PI) - math.pi
    # fmod rounding can land exactly on +pi
    out = np.where(out >= math.pi, out - TWO_PI, out)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class PolarPoint:
    """Point ``radius`` at bearing ``angle`` (normalized to ``[-pi, pi)``)."""

    radius: float
    angle: float

    def __post_init__(self):
        if not self.radius >= 0:
            raise DomainError("radius must be >= 0")
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "angle", float(wrap_angle(self.angle)))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.radius * math.cos(self.angle), self.radius * math.sin(self.angle)])

    @classmethod
    def from_xy(cls, x, y):
        return cls(math.hypot(x, y), math.atan2(y, x))


class BlockageRegime(enum.Enum):
    GENERAL = "general"
    ZBL = "zbl"  # every path is LOS
    HBL = "hbl"  # every path is NLOS


@dataclass(frozen=True)
class BlockageParams:
    """Boolean blockage ``p_L(z) = exp(-(mu z + p))``.

    The heavy-blockage limit is carried by ``regime`` rather than ``mu=inf``.
    """

    mu: float = 0.0
    p: float = 0.0
    regime: BlockageRegime = field(default=None)

    def __post_init__(self):
        regime = self.regime
        if regime is None:
            regime = BlockageRegime.ZBL if (self.mu == 0 and self.p == 0) else BlockageRegime.GENERAL
        elif isinstance(regime, str):
            regime = BlockageRegime(regime.lower())
        if regime is BlockageRegime.HBL:
            object.__setattr__(self, "mu", 0.0)
            object.__setattr__(self, "p", 0.0)
        if not (self.mu >= 0 and self.p >= 0) or math.isinf(self.mu) or math.isinf(self.p):
            raise DomainError("blockage parameters must be finite and >= 0; use the HBL regime")
        if regime is BlockageRegime.ZBL and (self.mu != 0 or self.p != 0):
            raise DomainError("ZBL requires mu = p = 0")
        if regime is BlockageRegime.GENERAL and self.mu == 0 and self.p == 0:
            regime = BlockageRegime.ZBL
        object.__setattr__(self, "regime", regime)

    @classmethod
    def zbl(cls):
        return cls(0.0, 0.0, BlockageRegime.ZBL)

    @classmethod
    def hbl(cls):
        return cls(0.0, 0.0, BlockageRegime.HBL)

    @classmethod
    def from_los_distance(cls, l_mu, p=0.0):
        """Build from the average LOS distance ``1/mu`` (``inf`` -> no blockage, 0 -> HBL)."""
        l_mu = float(l_mu)
        if l_mu < 0:
            raise DomainError("average LOS distance must be >= 0")
        if l_mu == 0:
            return cls.hbl()
        if math.isinf(l_mu):
            return cls(0.0, p)
        return cls(1.0 / l_mu, p)

    @property
    def l_mu(self) -> float:
        if self.regime is BlockageRegime.HBL:
            return 0.0
        return math.inf if self.mu == 0 else 1.0 / self.mu


def los_probability(z, b: BlockageParams):
    """LOS probability of a path of length ``z``."""
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise DomainError("path length must be >= 0")
    if b.regime is BlockageRegime.HBL:
        out = np.zeros(z.shape)
    elif b.regime is BlockageRegime.ZBL:
        out = np.ones(z.shape)
    else:
        out = np.exp(-(b.mu * z + b.p))
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Primary link pose in the frame centred on the considered secondary receiver
# ---------------------------------------------------------------------------

PLACEMENT_PRESETS = {
    # name: (delta_p0, x_p0, omega_p0)
    "T1": (math.pi / 2, 50.0, math.pi / 12),
    "T2": (math.pi / 2, 80.0, -math.pi / 2),
    "T3": (math.pi / 2, 10.0, math.pi / 2),
}


@dataclass(frozen=True)
class PrimaryPlacement:
    """Primary transmitter at ``x_p0 angle delta_p0``; receiver boresight ``omega_p0``.

    The primary receiver faces its transmitter, so it sits at
    ``Y_p0 = X_p0 - r_p * (cos omega_p0, sin omega_p0)``. The considered
    secondary receiver is the origin and its transmitter sits at ``r_s angle 0``.
    """

    x_p0: float
    delta_p0: float
    omega_p0: float
    r_p: float = 50.0
    r_s: float = 20.0

    def __post_init__(self):
        if not self.x_p0 > 0:
            raise DomainError("x_p0 must be > 0")
        if not (self.r_p > 0 and self.r_s > 0):
            raise DomainError("link lengths must be > 0")
        object.__setattr__(self, "delta_p0", float(wrap_angle(self.delta_p0)))
        object.__setattr__(self, "omega_p0", float(wrap_angle(self.omega_p0)))

    @classmethod
    def preset(cls, name, r_p=50.0, r_s=20.0):
        delta, x, omega = PLACEMENT_PRESETS[name.upper()]
        return cls(x, delta, omega, r_p, r_s)

    @property
    def tx_xy(self) -> np.ndarray:
        return np.array([self.x_p0 * math.cos(self.delta_p0), self.x_p0 * math.sin(self.delta_p0)])

    @property
    def rx_xy(self) -> np.ndarray:
        return self.tx_xy - self.r_p * np.array([math.cos(self.omega_p0), math.sin(self.omega_p0)])

    @property
    def y_p0(self) -> float:
        return float(np.hypot(*self.rx_xy))

    @property
    def psi_p0(self) -> float:
        """Bearing of the primary receiver seen from the origin."""
        x, y = self.rx_xy
        return math.atan2(y, x)

    @property
    def z00(self) -> float:
        """Distance from the considered secondary transmitter to the primary receiver."""
        return float(distance_to_primary_rx(self.r_s, 0.0, self))

    @property
    def beta00(self) -> float:
        return float(beta_to_primary(self.r_s, 0.0, self))


def beta_to_primary(x_s, theta_s, pp: PrimaryPlacement):
    """Bearing of ``x_s angle theta_s`` as seen from the primary receiver.

    Computed by Cartesian subtraction; vectorized over ``x_s`` and ``theta_s``.
    """
    yx, yy = pp.rx_xy
    dx = np.asarray(x_s) * np.cos(theta_s) - yx
    dy = np.asarray(x_s) * np.sin(theta_s) - yy
    if np.any(np.hypot(dx, dy) < COINCIDENCE_TOL):
        raise DegenerateGeometryError("point coincides with the primary receiver")
    out = wrap_angle(np.arctan2(dy, dx))
    return out


def distance_to_primary_rx(x_s, theta_s, pp: PrimaryPlacement):
    yx, yy = pp.rx_xy
    out = np.hypot(np.asarray(x_s) * np.cos(theta_s) - yx, np.asarray(x_s) * np.sin(theta_s) - yy)
    return out[()] if np.ndim(out) == 0 else out


def beta_arcsin(x_s, theta_s, pp: PrimaryPlacement):
    """Arcsin (law of sines) composition for the same bearing.

    First the bearing of the primary receiver from the origin,
    ``psi = delta + arcsin((r_p / y_p0) sin(delta - omega))``, then
    ``beta = theta + arcsin((y_p0 / z) sin(theta - psi))``. Both arcsins take
    their principal branch; the result matches :func:`beta_to_primary` exactly
    when each triangle's angle opposite the short side is acute.

    Returns
    -------
    beta : ndarray
        Bearing on the principal branch.
    on_branch : ndarray of bool
        Where both principal-branch conditions hold.
    """
    x_s = np.asarray(x_s, dtype=float)
    theta_s = np.asarray(theta_s, dtype=float)
    y = pp.y_p0
    z = distance_to_primary_rx(x_s, theta_s, pp)
    arg1 = pp.r_p / y * math.sin(pp.delta_p0 - pp.omega_p0)
    psi = pp.delta_p0 + math.asin(max(-1.0, min(1.0, arg1)))
    arg2 = np.clip(y / z * np.sin(theta_s - psi), -1.0, 1.0)
    beta = wrap_angle(theta_s + np.arcsin(arg2))
    # principal branch: the angle at the far vertex must be acute in both triangles
    branch1 = pp.x_p0 ** 2 + y ** 2 - pp.r_p ** 2 > 0
    branch2 = x_s ** 2 + z ** 2 - y ** 2 > 0
    return beta, np.asarray(branch1 & branch2)
