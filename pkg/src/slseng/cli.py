"""Command-line experiment runner: configuration, sweeps, CSV output.

Usage::

    slseng <kind> --config <path> [--seed N] [--threads N] [--out <path>] [--no-mc]

Configuration files are ``key = value`` lines (``#`` starts a comment) or
a JSON object with the same keys. Keys are the parameter names in
lower_snake_case; a unit suffix (``_dbm``, ``_db``, ``_w``, ``_m``, ``_deg``)
selects the unit of the value. A list ``[a, b, ...]`` or a range
``start:stop:step`` turns a key into a sweep axis (``sweep.<key>`` works too).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import json
import math
import os
import re
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .analytic import (INFEASIBLE, ProbabilityRangeError, SystemParams, activity_factor, map_secondary,
                       mean_interference_noblockage, primary_coverage, rho_dagger, secondary_coverage,
                       typical_secondary_coverage)
from .analytic.params import SecondaryPlacement
from .channel import AntennaConfig, BeamPattern, PathLossParams, db_to_linear, dbm_to_watt
from .geometry import BlockageParams, BlockageRegime, PrimaryPlacement
from .montecarlo import (McConfig, estimate_af, estimate_map, estimate_mean_interference,
                         estimate_primary_coverage, estimate_secondary_coverage)
from .specfun import DomainError, QuadratureError, QuadratureSpec, SeriesError

__all__ = [
    "ConfigError",
    "SweepAxis",
    "ExperimentSpec",
    "ExperimentOptions",
    "KINDS",
    "parse_config",
    "load_config",
    "emit_config",
    "resolve",
    "run",
    "main",
]

KINDS = ("map-grid", "af-sweep", "primary-coverage", "secondary-coverage", "typical-coverage", "rho-select",
         "validate", "mean-interference")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VALIDATION = 0, 1, 2, 3
DEFAULT_TAU_DB = (-10.0, 0.0, 5.0)


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is the 1-based source line when known."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


# ---------------------------------------------------------------------------
# Keys and units
# ---------------------------------------------------------------------------

_UNIT_CONVERTERS = {
    "dbm": ("dBm", lambda v: float(dbm_to_watt(v))),
    "db": ("dB", lambda v: float(db_to_linear(v))),
    "w": ("W", float),
    "m": ("m", float),
    "deg": ("deg", math.radians),
}

# canonical key -> (group, allowed unit suffixes, base unit label)
_PARAM_KEYS = {
    "p_p": ("sys", ("dbm", "w"), "W"),
    "p_s": ("sys", ("dbm", "w"), "W"),
    "rho": ("sys", ("dbm", "w"), "W"),
    "r_p": ("sys", ("m",), "m"),
    "r_s": ("sys", ("m",), "m"),
    "lambda_s": ("sys", (), "1/m^2"),
    "sigma2": ("sys", ("dbm", "w"), "W"),
    "region_r": ("sys", ("m",), "m"),
    "alpha_l": ("plp", (), ""),
    "alpha_n": ("plp", (), ""),
    "c_l": ("plp", ("db",), ""),
    "c_n": ("plp", ("db",), ""),
    "nlos_outage": ("plp", (), ""),
    "blockage_mu": ("blk", (), "1/m"),
    "blockage_p": ("blk", (), ""),
    "blockage_regime": ("blk", (), ""),
    "l_mu": ("blk", ("m",), "m"),
    "antenna_model": ("ant", (), ""),
    "m": ("ant", (), ""),
    "m_p": ("ant", (), ""),
    "m_s": ("ant", (), ""),
    "kappa": ("ant", ("deg",), "rad"),
    "rho_over_ps": ("derived", ("db",), ""),
}
for _role in ("pt", "pr", "st", "sr"):
    _PARAM_KEYS[f"pattern_{_role}_kind"] = ("pat", (), "")
    _PARAM_KEYS[f"pattern_{_role}_a"] = ("pat", (), "")
    _PARAM_KEYS[f"pattern_{_role}_b"] = ("pat", (), "")
    _PARAM_KEYS[f"pattern_{_role}_phi"] = ("pat", ("deg",), "rad")
for _f in dataclasses.fields(QuadratureSpec):
    _PARAM_KEYS[f"quad_{_f.name}"] = ("quad", ("m",) if _f.name == "radial_upper_bound" else (), "")

_OPTION_KEYS = {
    "kind": ((), ""),
    "secondary_type": ((), ""),
    "tau": (("db",), ""),
    "x_p0": (("m",), "m"),
    "delta_p0": (("deg",), "rad"),
    "omega_p0": (("deg",), "rad"),
    "x_s": (("m",), "m"),
    "theta_s": (("deg",), "rad"),
    "omega_s": (("deg",), "rad"),
    "mc": ((), ""),
    "n_realizations": ((), ""),
    "seed": ((), ""),
    "r_sim": (("m",), "m"),
    "antithetic_fading": ((), ""),
    "n_batches": ((), ""),
    "p_star": ((), ""),
    "s_star": ((), ""),
    "tau_star": (("db",), ""),
    "n_placements": ((), ""),
    "case": ((), ""),
    "method": ((), ""),
    "z_max": ((), ""),
}


def _split_key(key: str) -> Tuple[str, Optional[str]]:
    """``'rho_dbm' -> ('rho', 'dbm')``; raises for unknown keys or units."""
    key = key.strip().lower()
    if key in _PARAM_KEYS or key in _OPTION_KEYS:
        return key, None
    for suffix in _UNIT_CONVERTERS:
        if key.endswith("_" + suffix):
            base = key[: -len(suffix) - 1]
            allowed = _PARAM_KEYS[base][1] if base in _PARAM_KEYS else (
                _OPTION_KEYS[base][0] if base in _OPTION_KEYS else None)
            if allowed is None:
                break
            if suffix not in allowed:
                raise ConfigError(f"unit '{suffix}' not allowed for '{base}'")
            return base, suffix
    raise ConfigError(f"unknown key '{key}'")


def _unit_label(key):
    base, suffix = _split_key(key)
    if suffix is not None:
        return _UNIT_CONVERTERS[suffix][0]
    return _PARAM_KEYS[base][2] if base in _PARAM_KEYS else _OPTION_KEYS[base][1]


def _to_base(key, value):
    """Convert a config value to the base unit of its canonical key."""
    base, suffix = _split_key(key)
    if suffix is None or isinstance(value, (str, bool)):
        return base, value
    return base, _UNIT_CONVERTERS[suffix][1](float(value))


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

@dataclass
class SweepAxis:
    """A swept key with its values in config units."""

    name: str
    values: List[Any]
    unit: str = ""


@dataclass
class ExperimentSpec:
    """Kind, scalar overrides and sweep axes of one run (values in config units)."""

    kind: Optional[str] = None
    overrides: Dict[str, Any] = field(default_factory=dict)
    axes: List[SweepAxis] = field(default_factory=list)
    output: Optional[str] = None

    def grid(self):
        """Axis value combinations in lexicographic order."""
        names = [a.name for a in self.axes]
        for combo in itertools.product(*[a.values for a in self.axes]):
            yield dict(zip(names, combo))


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf"
_RANGE = re.compile(rf"^\s*({_NUM})\s*:\s*({_NUM})\s*:\s*({_NUM})\s*$", re.IGNORECASE)


def _scalar(text: str, line=None):
    t = text.strip()
    if len(t) >= 2 and t[0] == t[-1] and t[0] in "\"'":
        return t[1:-1]
    low = t.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        if re.fullmatch(r"[-+]?\d+", t):
            return int(t)
        return float(t)
    except ValueError:
        pass
    if not t:
        raise ConfigError("empty value", line)
    return t


def _range(start, stop, step, line=None):
    if step == 0 or not all(math.isfinite(v) for v in (start, stop, step)) or (stop - start) / step < 0:
        raise ConfigError("bad range start:stop:step", line)
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [float(start + i * step) for i in range(n)]


def _value(text: str, line=None):
    """Scalar, list or range (the latter two become axes)."""
    t = text.strip()
    m = _RANGE.match(t)
    if m:
        return _range(*(float(g) for g in m.groups()), line=line)
    if t.startswith("["):
        if not t.endswith("]"):
            raise ConfigError("unterminated list", line)
        inner = t[1:-1].strip()
        return [_scalar(v, line) for v in inner.split(",")] if inner else []
    return _scalar(t, line)


def _add(spec: ExperimentSpec, key, value, line=None):
    name = key.strip().lower()
    if name.startswith("sweep."):
        name = name[len("sweep."):]
        if not isinstance(value, list):
            value = [value]
    try:
        _split_key(name)
    except ConfigError as exc:
        raise ConfigError(str(exc), line) from None
    if name == "kind":
        spec.kind = str(value)
        return
    if any(a.name == name for a in spec.axes) or name in spec.overrides:
        raise ConfigError(f"duplicate key '{name}'", line)
    if isinstance(value, list):
        if not value:
            raise ConfigError(f"empty sweep for '{name}'", line)
        spec.axes.append(SweepAxis(name, value, _unit_label(name)))
    else:
        spec.overrides[name] = value


def parse_config(text: str, fmt: Optional[str] = None) -> ExperimentSpec:
    """Parse ``key = value`` text or a JSON object into an :class:`ExperimentSpec`."""
    spec = ExperimentSpec()
    stripped = text.lstrip()
    if fmt == "json" or (fmt is None and stripped.startswith("{")):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno) from None
        if not isinstance(obj, dict):
            raise ConfigError("JSON config must be an object")
        for key, val in obj.items():
            if key == "sweep" and isinstance(val, dict):
                for k2, v2 in val.items():
                    _add(spec, "sweep." + k2, _json_value(v2))
            else:
                _add(spec, key, _json_value(val))
        return spec
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", lineno)
        key, val = line.split("=", 1)
        if not key.strip():
            raise ConfigError("missing key", lineno)
        _add(spec, key, _value(val, lineno), lineno)
    return spec


def _json_value(v):
    if isinstance(v, dict) and {"start", "stop", "step"} <= set(v):
        return _range(float(v["start"]), float(v["stop"]), float(v["step"]))
    if isinstance(v, str):
        return _value(v) if _RANGE.match(v) else _scalar(v)
    if isinstance(v, list):
        return [_scalar(x) if isinstance(x, str) else x for x in v]
    return v


# ---------------------------------------------------------------------------
# Resolution into parameter objects
# ---------------------------------------------------------------------------

@dataclass
class ExperimentOptions:
    """Non-model settings of a run (SI units)."""

    secondary_type: str = "T1"
    placement: Optional[PrimaryPlacement] = None
    secondary: SecondaryPlacement = SecondaryPlacement(60.0, 0.0, math.pi)
    mc: bool = True
    n_realizations: int = 20000
    seed: int = 20240601
    r_sim: float = 4000.0
    antithetic_fading: bool = False
    n_batches: int = 20
    p_star: float = 0.7
    s_star: float = 0.5
    tau_star: float = 1.0
    n_placements: int = 32
    case: str = "all"
    method: str = "integral"
    z_max: float = 3.0

    def mc_config(self, threads=1, region=None):
        return McConfig(self.n_realizations, self.seed, self.r_sim,
                        None if region is None else min(region, self.r_sim),
                        self.antithetic_fading, self.n_batches, threads)


def _as_float(key, v):
    if isinstance(v, bool):
        raise ConfigError(f"'{key}' expects a number")
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError:
            raise ConfigError(f"'{key}' expects a number, got {v!r}") from None
    return float(v)


def _as_bool(key, v):
    if isinstance(v, bool):
        return v
    if isinstance(v, (int, float)) and v in (0, 1):
        return bool(v)
    raise ConfigError(f"'{key}' expects true/false")


def _as_int(key, v):
    f = _as_float(key, v)
    if not f.is_integer():
        raise ConfigError(f"'{key}' expects an integer")
    return int(f)


def resolve(values: Dict[str, Any], base: Optional[SystemParams] = None) -> Tuple[SystemParams, ExperimentOptions]:
    """Build parameters and options from config-unit values; missing keys keep defaults."""
    base = SystemParams() if base is None else base
    canon: Dict[str, Any] = {}
    for key, val in values.items():
        name, v = _to_base(key, val)
        if name in canon:
            raise ConfigError(f"'{name}' given more than once")
        canon[name] = v
    try:
        return _build(canon, base)
    except ConfigError:
        raise
    except (DomainError, ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from None


def _build(c: Dict[str, Any], base: SystemParams):
    sys_kw = {}
    for key, attr in (("p_p", "p_p"), ("p_s", "p_s"), ("rho", "rho"), ("r_p", "r_p"), ("r_s", "r_s"),
                      ("lambda_s", "lambda_s"), ("sigma2", "sigma2"), ("region_r", "region_R")):
        if key in c:
            sys_kw[attr] = _as_float(key, c[key])
    if "rho_over_ps" in c:
        if "rho" in c:
            raise ConfigError("give either rho or rho_over_ps")
        sys_kw["rho"] = _as_float("rho_over_ps", c["rho_over_ps"]) * sys_kw.get("p_s", base.p_s)

    plp_kw = {k: _as_float(k, c[k]) for k in ("alpha_l", "alpha_n", "c_l", "c_n") if k in c}
    if "nlos_outage" in c:
        plp_kw["nlos_outage"] = _as_bool("nlos_outage", c["nlos_outage"])
    plp = dataclasses.replace(base.plp, **plp_kw) if plp_kw else base.plp

    blockage = base.blockage
    if "l_mu" in c:
        if any(k in c for k in ("blockage_mu", "blockage_regime")):
            raise ConfigError("give either l_mu or blockage_mu/blockage_regime")
        blockage = BlockageParams.from_los_distance(_as_float("l_mu", c["l_mu"]),
                                                    _as_float("blockage_p", c.get("blockage_p", 0.0)))
    elif any(k in c for k in ("blockage_mu", "blockage_p", "blockage_regime")):
        regime = c.get("blockage_regime", None)
        if regime is not None:
            try:
                regime = BlockageRegime(str(regime).lower())
            except ValueError:
                raise ConfigError(f"unknown blockage regime {regime!r}") from None
        blockage = BlockageParams(_as_float("blockage_mu", c.get("blockage_mu", 0.0)),
                                  _as_float("blockage_p", c.get("blockage_p", 0.0)), regime)

    antennas = base.antennas
    if any(k in c for k in ("antenna_model", "m", "m_p", "m_s", "kappa")):
        model = str(c.get("antenna_model", "ula")).lower()
        m_both = c.get("m", None)
        m_p = _as_int("m_p", c.get("m_p", 4 if m_both is None else m_both))
        m_s = _as_int("m_s", c.get("m_s", m_p if m_both is None else m_both))
        kappa = _as_float("kappa", c.get("kappa", math.radians(121.0)))
        if model == "ula":
            antennas = AntennaConfig.ula(m_p, m_s, kappa)
        elif model == "ideal_ula":
            antennas = AntennaConfig.ideal_ula(m_p, m_s, kappa)
        elif model == "omni":
            antennas = AntennaConfig.omni()
        else:
            raise ConfigError(f"unknown antenna_model {model!r}")
    pat = {}
    for role in ("pt", "pr", "st", "sr"):
        keys = [f"pattern_{role}_{f}" for f in ("kind", "a", "b", "phi")]
        if any(k in c for k in keys):
            cur = getattr(antennas, role)
            pat[role] = BeamPattern(str(c.get(keys[0], cur.kind)), _as_float(keys[1], c.get(keys[1], cur.a)),
                                    _as_float(keys[2], c.get(keys[2], cur.b)),
                                    _as_float(keys[3], c.get(keys[3], cur.phi)))
    if pat:
        antennas = dataclasses.replace(antennas, **pat)

    quad_kw = {}
    for f in dataclasses.fields(QuadratureSpec):
        key = f"quad_{f.name}"
        if key in c:
            quad_kw[f.name] = _as_int(key, c[key]) if f.type in ("int", int) else _as_float(key, c[key])
    quad = dataclasses.replace(base.quad, **quad_kw) if quad_kw else base.quad

    params = dataclasses.replace(base, plp=plp, blockage=blockage, antennas=antennas, quad=quad, **sys_kw)
    return params, _options(c, params)


def _options(c, params):
    o = ExperimentOptions()
    if "secondary_type" in c:
        t = str(c["secondary_type"]).upper()
        if t not in ("T1", "T2", "T3", "T4"):
            raise ConfigError(f"unknown secondary_type {t!r}")
        o.secondary_type = t
    if any(k in c for k in ("x_p0", "delta_p0", "omega_p0")):
        ref = params.placement(o.secondary_type) if o.secondary_type != "T4" else params.placement("T1")
        o.placement = PrimaryPlacement(_as_float("x_p0", c.get("x_p0", ref.x_p0)),
                                       _as_float("delta_p0", c.get("delta_p0", ref.delta_p0)),
                                       _as_float("omega_p0", c.get("omega_p0", ref.omega_p0)), params.r_p, params.r_s)
    if any(k in c for k in ("x_s", "theta_s", "omega_s")):
        o.secondary = SecondaryPlacement(_as_float("x_s", c.get("x_s", o.secondary.x_s)),
                                         _as_float("theta_s", c.get("theta_s", o.secondary.theta_s)),
                                         _as_float("omega_s", c.get("omega_s", o.secondary.omega_s)))
    for key in ("mc", "antithetic_fading"):
        if key in c:
            setattr(o, key, _as_bool(key, c[key]))
    for key in ("n_realizations", "seed", "n_batches", "n_placements"):
        if key in c:
            setattr(o, key, _as_int(key, c[key]))
    for key in ("r_sim", "p_star", "s_star", "tau_star", "z_max"):
        if key in c:
            setattr(o, key, _as_float(key, c[key]))
    if "case" in c:
        o.case = str(c["case"]).lower()
        if o.case not in ("all", "los", "nlos"):
            raise ConfigError("case must be all, los or nlos")
    if "method" in c:
        o.method = str(c["method"]).lower()
        if o.method not in ("integral", "series", "auto"):
            raise ConfigError("method must be integral, series or auto")
    if "tau" in c and not isinstance(c["tau"], (list, tuple)):
        raise ConfigError("tau is a grid; give it as a list or range (tau_db = [..])")
    return o


def load_config(path) -> Tuple[SystemParams, ExperimentSpec]:
    """Read a config file; returns the scalar-resolved parameters and the experiment."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    spec = parse_config(text, "json" if str(path).lower().endswith(".json") else None)
    params, _ = resolve(spec.overrides)
    # axis values must also resolve
    for axis in spec.axes:
        if axis.name == "tau_db":
            continue
        for v in axis.values:
            resolve({**spec.overrides, axis.name: v})
    return params, spec


def emit_config(params: SystemParams) -> str:
    """``key = value`` text that :func:`load_config` maps back to ``params`` exactly."""
    lines = []

    def put(key, v):
        if isinstance(v, bool):
            lines.append(f"{key} = {'true' if v else 'false'}")
        elif isinstance(v, str):
            lines.append(f'{key} = "{v}"')
        else:
            lines.append(f"{key} = {float(v)!r}")

    for key, attr in (("p_p", "p_p"), ("p_s", "p_s"), ("rho", "rho"), ("r_p", "r_p"), ("r_s", "r_s"),
                      ("lambda_s", "lambda_s"), ("sigma2", "sigma2"), ("region_r", "region_R")):
        put(key, getattr(params, attr))
    for f in ("alpha_l", "alpha_n", "c_l", "c_n"):
        put(f, getattr(params.plp, f))
    put("nlos_outage", params.plp.nlos_outage)
    put("blockage_mu", params.blockage.mu)
    put("blockage_p", params.blockage.p)
    put("blockage_regime", params.blockage.regime.value)
    for role in ("pt", "pr", "st", "sr"):
        bp = getattr(params.antennas, role)
        put(f"pattern_{role}_kind", bp.kind)
        put(f"pattern_{role}_a", bp.a)
        put(f"pattern_{role}_b", bp.b)
        put(f"pattern_{role}_phi", bp.phi)
    for f in dataclasses.fields(QuadratureSpec):
        v = getattr(params.quad, f.name)
        if isinstance(v, int):
            lines.append(f"quad_{f.name} = {v}")
        else:
            put(f"quad_{f.name}", v)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Kinds
# ---------------------------------------------------------------------------

def _mc_cols(est_mean, est_se, n):
    return {"mc_mean": est_mean, "mc_stderr": est_se, "n_trials": n}


def _tau_rows(tau_db, analytic, curve):
    rows = []
    for j, t in enumerate(tau_db):
        row = {"tau_db": t, "analytic": float(analytic[j])}
        if curve is not None:
            row.update(_mc_cols(float(curve.values[j]), float(curve.stderr[j]), curve.n_trials))
        rows.append(row)
    return rows


def _placement(params, o):
    if o.placement is not None:
        return o.placement
    if o.secondary_type == "T4":
        return "typical"
    return params.placement(o.secondary_type)


def _kind_map_grid(params, o, tau_db, use_mc):
    row = {"analytic": map_secondary(o.secondary, params)}
    if use_mc:
        est = estimate_map(o.secondary, params, o.n_realizations, o.seed)
        row.update(_mc_cols(float(est.mean), float(est.stderr), est.n))
    return [row]


def _kind_af(params, o, tau_db, use_mc):
    row = {"analytic": activity_factor(params, params.region_R, method=o.method)}
    if use_mc:
        est = estimate_af(params, o.mc_config(), params.region_R)
        row.update(_mc_cols(est.mean, est.stderr, est.n))
    return [row]


def _kind_primary(params, o, tau_db, use_mc):
    tau = db_to_linear(np.asarray(tau_db, float))
    an = np.atleast_1d(primary_coverage(tau, params, method=o.method))
    curve = estimate_primary_coverage(tau, params, o.mc_config()) if use_mc else None
    return _tau_rows(tau_db, an, curve)


def _kind_secondary(params, o, tau_db, use_mc):
    tau = db_to_linear(np.asarray(tau_db, float))
    pp = _placement(params, o)
    if isinstance(pp, str):
        an = np.atleast_1d(typical_secondary_coverage(tau, params, n_placements=o.n_placements))
        mc_cfg = o.mc_config(region=params.region_R)
    else:
        an = np.atleast_1d(secondary_coverage(tau, params, pp))
        mc_cfg = o.mc_config()
    curve = estimate_secondary_coverage(tau, params, pp, mc_cfg) if use_mc else None
    return _tau_rows(tau_db, an, curve)


def _kind_typical(params, o, tau_db, use_mc):
    o = dataclasses.replace(o, secondary_type="T4", placement=None)
    return _kind_secondary(params, o, tau_db, use_mc)


def _kind_rho(params, o, tau_db, use_mc):
    res = rho_dagger(params, o.tau_star, o.p_star, o.s_star, o.secondary_type, n_placements=o.n_placements)
    return [{"analytic": res.label(), "p_cp": res.p_cp, "p_cs": res.p_cs}]


def _kind_mean_interference(params, o, tau_db, use_mc):
    rows = []
    cases = ("los", "nlos") if o.case == "all" else (o.case,)
    ests = {}
    for case in cases:
        row = {"case": case, "analytic": mean_interference_noblockage(params, case, r_max=o.r_sim)}
        if use_mc:
            est = estimate_mean_interference(params, o.mc_config(), case)
            ests[case] = est
            row.update(_mc_cols(est.mean, est.stderr, est.n))
        rows.append(row)
    if len(cases) == 2:
        ratio = rows[0]["analytic"] / rows[1]["analytic"]
        row = {"case": "ratio", "analytic": ratio}
        if use_mc:
            m = ests["los"].mean / ests["nlos"].mean
            rel = math.hypot(ests["los"].stderr / ests["los"].mean, ests["nlos"].stderr / ests["nlos"].mean)
            row.update(_mc_cols(m, m * rel, ests["los"].n))
        rows.append(row)
    return rows


def _kind_validate(params, o, tau_db, use_mc):
    if not use_mc:
        raise ConfigError("validate needs Monte Carlo; drop --no-mc")
    rows = []
    for quantity, fn in (("activity_factor", _kind_af), ("primary_coverage", _kind_primary),
                         ("secondary_coverage", _kind_secondary)):
        for r in fn(params, dataclasses.replace(o, method="integral"), tau_db, True):
            r = {"quantity": quantity, **r}
            se = r["mc_stderr"]
            gap = abs(r["analytic"] - r["mc_mean"])
            r["z_ratio"] = gap / se if se > 0 else (math.inf if gap > 0 else 0.0)
            rows.append(r)
    return rows


_KIND_FUNCS = {
    "map-grid": (_kind_map_grid, False),
    "af-sweep": (_kind_af, False),
    "primary-coverage": (_kind_primary, True),
    "secondary-coverage": (_kind_secondary, True),
    "typical-coverage": (_kind_typical, True),
    "rho-select": (_kind_rho, False),
    "validate": (_kind_validate, True),
    "mean-interference": (_kind_mean_interference, False),
}


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    columns: List[str]
    rows: List[Dict[str, Any]]
    exit_code: int = EXIT_OK


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.12e}"
    return str(v)


def run(spec: ExperimentSpec, kind=None, seed=None, threads=1, use_mc=True) -> RunResult:
    """Evaluate every grid point of ``spec``; rows come back in lexicographic grid order."""
    kind = kind or spec.kind
    if kind not in _KIND_FUNCS:
        raise ConfigError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    fn, tau_vector = _KIND_FUNCS[kind]
    axes = list(spec.axes)
    tau_axis = next((a for a in axes if a.name == "tau_db"), None)
    if tau_axis is not None and not tau_vector:
        raise ConfigError(f"kind {kind!r} does not take a tau_db grid")
    outer = ExperimentSpec(spec.kind, spec.overrides, [a for a in axes if a.name != "tau_db"], spec.output)
    tau_db = [float(v) for v in (tau_axis.values if tau_axis is not None else DEFAULT_TAU_DB)]
    if tau_vector and np.any(np.diff(tau_db) <= 0):
        raise ConfigError("tau_db grid must be strictly increasing")
    overrides = dict(spec.overrides)
    if seed is not None:
        overrides["seed"] = seed
    points = list(outer.grid())
    resolved = [resolve({**overrides, **pt}) for pt in points]

    def evaluate(idx):
        params, opts = resolved[idx]
        rows = fn(params, opts, tau_db, use_mc and opts.mc)
        h = params.fingerprint()
        return [{**points[idx], **r, "params_hash": h} for r in rows]

    if threads > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(evaluate, range(len(points))))
    else:
        chunks = [evaluate(i) for i in range(len(points))]
    rows = [r for chunk in chunks for r in chunk]
    columns = [a.name for a in outer.axes]
    for lead in ("quantity", "case", "tau_db"):
        if any(lead in r for r in rows):
            columns.append(lead)
    for r in rows:
        for k in r:
            if k not in columns and k != "params_hash":
                columns.append(k)
    columns.append("params_hash")
    code = EXIT_OK
    if kind == "validate":
        z_max = resolved[0][1].z_max if resolved else 3.0
        if any(r["z_ratio"] > z_max for r in rows):
            code = EXIT_VALIDATION
    return RunResult(columns, rows, code)


def write_csv(result: RunResult, path):
    """Write atomically (RFC 4180, CRLF line ends)."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".slseng-", suffix=".csv", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(result.columns)
            for r in result.rows:
                w.writerow([_fmt(r.get(c, "")) for c in result.columns])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="slseng", description="Spectrum-sharing coverage experiments.")
    ap.add_argument("kind", choices=KINDS)
    ap.add_argument("--config", help="key=value or JSON configuration file (defaults if omitted)")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--out", default=None, help="CSV path (default: <kind>.csv)")
    ap.add_argument("--no-mc", action="store_true", help="skip Monte Carlo columns")
    args = ap.parse_args(argv)
    out = args.out
    try:
        if args.config:
            _, spec = load_config(args.config)
        else:
            spec = ExperimentSpec()
        if spec.kind is not None and spec.kind != args.kind:
            raise ConfigError(f"config kind {spec.kind!r} does not match command {args.kind!r}")
        out = out or spec.output or f"{args.kind}.csv"
        result = run(spec, args.kind, args.seed, max(1, args.threads), not args.no_mc)
    except ConfigError as exc:
        print(f"slseng: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, SeriesError, ProbabilityRangeError) as exc:
        # nothing was written: the CSV only appears once every row succeeded
        print(f"slseng: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    write_csv(result, out)
    print(f"{args.kind}: {len(result.rows)} rows -> {out}")
    if args.kind == "validate":
        worst = max((r["z_ratio"] for r in result.rows), default=0.0)
        print(f"max |analytic - mc| / stderr = {worst:.3g}")
        if result.exit_code == EXIT_VALIDATION:
            print("slseng: validation failed", file=sys.stderr)
    return result.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
