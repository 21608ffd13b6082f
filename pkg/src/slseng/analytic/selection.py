"""Selection of the smallest interference threshold meeting joint coverage targets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .params import SystemParams
from .primary import primary_coverage
from .secondary import secondary_terms, typical_secondary_coverage

__all__ = ["RhoSelection", "rho_dagger", "rho_grid", "INFEASIBLE"]

INFEASIBLE = "infeasible"
SECONDARY_KINDS = ("T1", "T2", "T3", "T4")


@dataclass
class RhoSelection:
    """Outcome of the threshold search.

    ``rho`` is ``None`` when no grid point satisfies both constraints.
    ``trace`` lists ``(rho, p_cp, p_cs)`` for every evaluated point; ``p_cs``
    is ``nan`` where it was not needed.
    """

    rho: Optional[float]
    p_cp: float = math.nan
    p_cs: float = math.nan
    trace: List[Tuple[float, float, float]] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.rho is not None

    def label(self):
        return INFEASIBLE if self.rho is None else self.rho


def rho_grid(rho_min=1e-24, rho_max=1e-9, step_db=0.5):
    """Ascending log grid with ``step_db`` spacing (both ends included when aligned)."""
    if not (rho_min > 0 and rho_max >= rho_min and step_db > 0):
        raise ValueError("empty threshold grid")
    span = 10.0 * math.log10(rho_max / rho_min)
    n = int(math.floor(span / step_db + 1e-9)) + 1
    return rho_min * 10.0 ** (step_db * np.arange(n) / 10.0)


def rho_dagger(params: SystemParams, tau_star, p_star, s_star, secondary_kind="T1", rho_min=1e-24,
               rho_max=1e-9, step_db=0.5, refine_db=0.1, n_placements=32, rel_tol=1e-6) -> RhoSelection:
    """Smallest ``rho`` with primary coverage ``>= p_star`` and secondary coverage ``>= s_star``.

    The grid is scanned upward. Primary coverage never increases with
    ``rho``, so the scan ends once it falls below ``p_star``; the secondary
    constraint is not assumed monotone. The first qualifying grid point is
    refined by bisection against its left neighbour to ``refine_db``.
    """
    if not (0.0 <= p_star <= 1.0 and 0.0 <= s_star <= 1.0):
        raise ValueError("targets must lie in [0, 1]")
    kind = secondary_kind.upper()
    if kind not in SECONDARY_KINDS:
        raise ValueError(f"unknown secondary kind {secondary_kind!r}")
    grid = rho_grid(rho_min, rho_max, step_db)
    trace = []

    def check(rho):
        """Returns (both ok, primary ok, p_cp, p_cs)."""
        q = params.replace(rho=float(rho))
        p_cp = float(primary_coverage(tau_star, q))
        if p_cp < p_star:
            trace.append((rho, p_cp, math.nan))
            return False, False, p_cp, math.nan
        if s_star <= 0:
            trace.append((rho, p_cp, math.nan))
            return True, True, p_cp, math.nan
        if kind == "T4":
            p_cs = float(typical_secondary_coverage(tau_star, q, n_placements=n_placements, rel_tol=rel_tol))
        else:
            pp = q.placement(kind)
            bound = float(secondary_terms(tau_star, q, pp, with_term4=False).upper_bound()[0])
            if bound < s_star:
                trace.append((rho, p_cp, bound))
                return False, True, p_cp, bound
            p_cs = float(secondary_terms(tau_star, q, pp, rel_tol=rel_tol).coverage()[0])
        trace.append((rho, p_cp, p_cs))
        return p_cs >= s_star, True, p_cp, p_cs

    prev = None
    for rho in grid:
        ok, primary_ok, p_cp, p_cs = check(rho)
        if ok:
            hi, best = float(rho), (p_cp, p_cs)
            if prev is not None:
                lo = prev
                while 10.0 * math.log10(hi / lo) > refine_db:
                    mid = math.sqrt(lo * hi)
                    ok_mid, _, cp_mid, cs_mid = check(mid)
                    if ok_mid:
                        hi, best = mid, (cp_mid, cs_mid)
                    else:
                        lo = mid
            return RhoSelection(hi, best[0], best[1], trace)
        if not primary_ok:
            break
        prev = float(rho)
    return RhoSelection(None, trace=trace)
