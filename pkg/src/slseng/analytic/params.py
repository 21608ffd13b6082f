"""Parameter containers shared by the analytic and simulation halves."""
from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..channel import AntennaConfig, PathLossParams, dbm_to_watt
from ..geometry import BlockageParams, PrimaryPlacement
from ..specfun import QuadratureSpec

__all__ = [
    "SystemParams",
    "SecondaryPlacement",
    "CoverageCurve",
    "ProbabilityRangeError",
    "checked_probability",
    "DEFAULT_KAPPA",
]

DEFAULT_KAPPA = math.radians(121.0)


class ProbabilityRangeError(ArithmeticError):
    """A computed probability left ``[-1e-9, 1 + 1e-9]``."""


def checked_probability(value, slack=1e-9):
    """Clamp to ``[0, 1]`` after verifying the value is within ``slack``."""
    v = np.asarray(value, dtype=float)
    if np.any(~np.isfinite(v)) or np.any(v < -slack) or np.any(v > 1 + slack):
        raise ProbabilityRangeError(f"probability out of range: {v}")
    out = np.clip(v, 0.0, 1.0)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class SystemParams:
    """Every scalar of the deployment and propagation model (SI units).

    Defaults reproduce the standard numerical setup: 27 dBm primary and
    17 dBm secondary power, 50 m / 20 m links, ``alpha = (2.4, 4.2)``,
    ``C = (-60, -70) dB``, noise ``7.9621e-13`` W, four-element arrays with
    121 degree coverage, ``lambda_s = 8e-5`` and an average LOS distance of
    200 m.
    """

    p_p: float = float(dbm_to_watt(27.0))
    p_s: float = float(dbm_to_watt(17.0))
    rho: float = 1e-12
    r_p: float = 50.0
    r_s: float = 20.0
    lambda_s: float = 8e-5
    sigma2: float = 7.9621e-13
    plp: PathLossParams = field(default_factory=PathLossParams)
    blockage: BlockageParams = field(default_factory=lambda: BlockageParams.from_los_distance(200.0))
    antennas: AntennaConfig = field(default_factory=lambda: AntennaConfig.ula(4, 4, DEFAULT_KAPPA))
    region_R: float = 2000.0
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self):
        for name in ("p_p", "p_s", "rho", "r_p", "r_s", "lambda_s", "sigma2", "region_R"):
            v = getattr(self, name)
            if not v >= 0:
                raise ValueError(f"{name} must be >= 0, got {v}")
        if self.r_p <= 0 or self.r_s <= 0 or self.region_R <= 0:
            raise ValueError("link lengths and region radius must be > 0")

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def kappa(self, state) -> float:
        """Threshold-to-power ratio ``rho / (p_s C_T)`` (``inf`` when ``C_T = 0``)."""
        c = self.plp.constant(state)
        if c == 0 or self.p_s == 0:
            return math.inf
        return self.rho / (self.p_s * c)

    def placement(self, name) -> PrimaryPlacement:
        return PrimaryPlacement.preset(name, self.r_p, self.r_s)

    def fingerprint(self) -> str:
        """Short stable hash of every field (used to tag outputs)."""
        return hashlib.sha256(repr(self).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class SecondaryPlacement:
    """Secondary transmitter at ``x_s angle theta_s`` pointing toward ``omega_s``."""

    x_s: float
    theta_s: float
    omega_s: float

    def __post_init__(self):
        if not self.x_s > 0:
            raise ValueError("x_s must be > 0")


@dataclass
class CoverageCurve:
    """Coverage probability sampled on a threshold grid (dB)."""

    tau_db: np.ndarray
    values: np.ndarray
    method: str
    params_hash: str
    stderr: Optional[np.ndarray] = None
    n_trials: Optional[int] = None

    def __post_init__(self):
        self.tau_db = np.asarray(self.tau_db, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.tau_db.shape != self.values.shape:
            raise ValueError("grid and values differ in shape")
        if self.tau_db.size > 1 and np.any(np.diff(self.tau_db) <= 0):
            raise ValueError("threshold grid must be strictly increasing")
        if self.method not in ("analytic", "mc"):
            raise ValueError("method must be 'analytic' or 'mc'")
        self.values = checked_probability(self.values)
