"""INI experiment configuration and datum construction.

Grammar (all sections optional, keys case-insensitive)::

    [problem]   N, m, gamma, weight (pure_power | regularized_power | user_radial),
                k, K, eps, table (CSV with columns radius, rho)
    [grid]      R_max, M, stretch
    [datum]     kind (explicit | profile | compact | power | csv | constant)
                explicit: a, b        profile: beta, T
                compact: c1, c2, c3   power: exponent, scale
                csv: path             constant: value
                truncate (optional n: clamp to [-n, n], zero outside B_n)
    [solver]    t_end, dt_init, dt_max, newton_tol, newton_max_iters, bc_mode,
                blowup_threshold, blowup_factor, blowup_probe, change_target, growth
    [norms]     r, p, alpha, C1 (number or ``auto``), ell_tol
    [experiment] free-form per-experiment keys (lists are comma separated)
    [output]    dir

Experiment defaults are layered under the file, so a config only needs the
keys it changes.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError, DomainError
from ..grid import GridFunction, make_grid
from ..model import ProblemParams, WeightSpec
from ..norms import alpha_threshold, truncate
from ..profiles import (ExplicitFamily, calibrate_barrier, compact_profile, critical_product,
                        shoot_profile)
from ..solver import BoundaryData, SolverOptions

OUT_ENV = "WPME_OUT"

BASE_DEFAULTS = {
    "problem": {"N": "3", "m": "2", "gamma": "1", "weight": "pure_power",
                "k": "1", "K": "1", "eps": "0"},
    "grid": {"R_max": "50", "M": "400", "stretch": "1.0"},
    "datum": {"kind": "compact", "a": "1", "b": "0.16666666666666666", "beta": "1",
              "T": "1", "c1": "1", "c2": "1", "c3": "1", "exponent": "1", "scale": "1",
              "value": "1"},
    "solver": {"t_end": "1", "bc_mode": "zero_flux"},
    "norms": {"r": "1", "p": "1", "C1": "auto", "ell_tol": "1e-3"},
    "experiment": {},
    "output": {"dir": "wpme_out"},
}

SOLVER_KEYS = {
    "dt_init": float, "dt_max": float, "newton_tol": float, "newton_max_iters": int,
    "bc_mode": str, "blowup_threshold": float, "blowup_factor": float, "blowup_probe": str,
    "change_target": float, "growth": float,
}


@dataclass(frozen=True)
class GridSpec:
    R_max: float
    M: int
    stretch: float = 1.0

    def build(self, params, **overrides):
        spec = {"R_max": self.R_max, "M": self.M, "stretch": self.stretch, **overrides}
        return make_grid(spec["R_max"], spec["M"], spec["stretch"], N=params.N,
                         weight=params.weight)


@dataclass(frozen=True)
class DatumSpec:
    kind: str
    options: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.options.get(key, default)


@dataclass(frozen=True)
class NormSpec:
    r: float = 1.0
    p: float = 1.0
    alpha: float | None = None
    C1: float | None = None
    ell_tol: float = 1e-3


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    params: ProblemParams
    grid: GridSpec
    datum: DatumSpec
    solver: SolverOptions
    t_end: float
    norms: NormSpec
    extra: dict
    out_dir: str
    source: str | None = None

    @property
    def C1(self):
        """Existence constant; ``auto`` is half the critical explicit product."""
        if self.norms.C1 is not None:
            return self.norms.C1
        return 0.5 * critical_product(self.params)

    def floats(self, key, default):
        raw = self.extra.get(key.lower())
        if raw is None:
            return [float(v) for v in default]
        try:
            return [float(v) for v in raw.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"[experiment] {key} must be a comma separated list of numbers") from None

    def number(self, key, default, cast=float):
        raw = self.extra.get(key.lower())
        if raw is None:
            return cast(default)
        try:
            return cast(float(raw)) if cast is int else cast(raw)
        except ValueError:
            raise ConfigError(f"[experiment] {key} must be numeric, got {raw!r}") from None

    def echo(self):
        w = self.params.weight
        return {
            "name": self.name,
            "problem": {"N": self.params.N, "m": self.params.m, "gamma": w.gamma,
                        "weight": w.kind, "k": w.k, "K": w.K, "eps": w.eps},
            "grid": {"R_max": self.grid.R_max, "M": self.grid.M, "stretch": self.grid.stretch},
            "datum": {"kind": self.datum.kind, **self.datum.options},
            "t_end": self.t_end,
            "bc_mode": self.solver.bc_mode,
            "norms": {"r": self.norms.r, "p": self.norms.p, "alpha": self.norms.alpha,
                      "C1": self.C1, "ell_tol": self.norms.ell_tol},
            "experiment": dict(sorted(self.extra.items())),
        }


def _parser():
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str.lower
    return cp


def load_config(path=None, name=None, defaults=None, out=None):
    """Layer base defaults, experiment ``defaults`` and the INI file at ``path``."""
    cp = _parser()
    cp.read_dict(_lower(BASE_DEFAULTS))
    if defaults:
        cp.read_dict(_lower(defaults))
    if path is not None:
        if not Path(path).is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            cp.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
    try:
        return _build(cp, name, out, None if path is None else str(path))
    except ConfigError:
        raise
    except (DomainError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _lower(d):
    return {s: {k.lower(): v for k, v in kv.items()} for s, kv in d.items()}


def _get(cp, section, key, cast=float):
    raw = cp.get(section, key.lower(), fallback=None)
    if raw is None or raw.strip() == "":
        return None
    try:
        if cast is int:
            return int(float(raw))
        return cast(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot read {raw!r}") from None


def _build(cp, name, out, source):
    for section in cp.sections():
        if section not in BASE_DEFAULTS:
            raise ConfigError(f"unknown section [{section}]")
    weight = _weight(cp)
    params = ProblemParams(N=_get(cp, "problem", "N", int), m=_get(cp, "problem", "m"),
                           weight=weight)
    grid = GridSpec(R_max=_get(cp, "grid", "R_max"), M=_get(cp, "grid", "M", int),
                    stretch=_get(cp, "grid", "stretch"))
    datum = _datum(cp)
    opts = {}
    for key, cast in SOLVER_KEYS.items():
        val = _get(cp, "solver", key, cast)
        if val is not None:
            opts[key] = val
    solver = SolverOptions(**opts)
    c1 = cp.get("norms", "c1", fallback="auto").strip().lower()
    norms = NormSpec(
        r=_get(cp, "norms", "r"), p=_get(cp, "norms", "p"),
        alpha=_get(cp, "norms", "alpha"),
        C1=None if c1 == "auto" else _get(cp, "norms", "C1"),
        ell_tol=_get(cp, "norms", "ell_tol"),
    )
    if norms.r < 1:
        raise ConfigError("norms.r must be >= 1")
    if norms.alpha is not None:
        need = alpha_threshold(params.N, params.gamma, params.m)
        if not norms.alpha > need:
            raise ConfigError(f"alpha must exceed {need:g} for L1(Phi_alpha) traces")
    if norms.C1 is not None and not norms.C1 > 0:
        raise ConfigError("C1 must be positive")
    t_end = _get(cp, "solver", "t_end")
    if not (t_end and t_end > 0):
        raise ConfigError("solver.t_end must be positive")
    extra = dict(cp.items("experiment"))
    exp_name = name or extra.pop("name", None) or "custom"
    extra.pop("name", None)
    out_dir = out or os.environ.get(OUT_ENV) or cp.get("output", "dir")
    return ExperimentConfig(name=exp_name, params=params, grid=grid, datum=datum,
                            solver=solver, t_end=t_end, norms=norms, extra=extra,
                            out_dir=out_dir, source=source)


def _weight(cp):
    kind = cp.get("problem", "weight")
    kw = dict(gamma=_get(cp, "problem", "gamma"), k=_get(cp, "problem", "k"),
              K=_get(cp, "problem", "K"), kind=kind, eps=_get(cp, "problem", "eps"))
    if kind == "user_radial":
        path = cp.get("problem", "table", fallback=None)
        if not path or not Path(path).is_file():
            raise ConfigError(f"user_radial weight needs an existing table file, got {path!r}")
        data = np.genfromtxt(path, delimiter=",", names=True)
        try:
            kw.update(table_y=tuple(data["radius"]), table_rho=tuple(data["rho"]))
        except (ValueError, KeyError):
            raise ConfigError("weight table needs columns radius, rho") from None
    return WeightSpec(**kw)


DATUM_KEYS = {
    "explicit": ("a", "b"),
    "profile": ("beta", "T"),
    "compact": ("c1", "c2", "c3"),
    "power": ("exponent", "scale"),
    "constant": ("value",),
    "csv": (),
}


def _datum(cp):
    kind = cp.get("datum", "kind").strip().lower()
    if kind not in DATUM_KEYS:
        raise ConfigError(f"unknown datum kind {kind!r}; choose from {sorted(DATUM_KEYS)}")
    opts = {key: _get(cp, "datum", key) for key in DATUM_KEYS[kind]}
    if kind == "csv":
        path = cp.get("datum", "path", fallback=None)
        if not path or not Path(path).is_file():
            raise ConfigError(f"csv datum needs an existing file, got {path!r}")
        opts["path"] = path
    n = _get(cp, "datum", "truncate")
    if n is not None:
        if not n > 0:
            raise ConfigError("datum.truncate must be positive")
        opts["truncate"] = n
    return DatumSpec(kind, opts)


@dataclass
class PreparedDatum:
    """A datum on a grid plus what its natural boundary data needs."""

    u0: GridFunction
    family: ExplicitFamily | None = None
    profile: object = None


def build_datum(cfg, grid=None, datum=None):
    """Sample the configured datum on ``grid`` (default: the configured grid)."""
    params = cfg.params
    grid = grid or cfg.grid.build(params)
    spec = datum or cfg.datum
    o = spec.options
    family = profile = None
    if spec.kind == "explicit":
        family = ExplicitFamily(params, o["a"], o["b"])
        u0 = grid.sample(family.datum)
    elif spec.kind == "profile":
        profile = shoot_profile(params, o["beta"], o["T"], grid)
        u0 = profile.W
    elif spec.kind == "compact":
        u0 = compact_profile(grid, params.m, o["c1"], o["c2"], o["c3"])
    elif spec.kind == "power":
        u0 = grid.sample(lambda y: o["scale"] * y ** o["exponent"])
    elif spec.kind == "constant":
        u0 = grid.sample(lambda y: np.full_like(y, o["value"]))
    else:
        u0 = GridFunction.from_csv(o["path"], grid=grid)
    if o.get("truncate") is not None:
        u0 = truncate(u0, o["truncate"])
    return PreparedDatum(u0=u0, family=family, profile=profile)


def build_bc(cfg, prepared, mode=None):
    """Boundary data for ``mode`` (default: the configured bc_mode)."""
    mode = mode or cfg.solver.bc_mode
    params = cfg.params
    if mode == "zero_flux":
        return BoundaryData("zero_flux")
    if mode == "dirichlet_explicit":
        if prepared.family is None:
            raise ConfigError("dirichlet_explicit needs an explicit datum")
        return BoundaryData(mode, family=prepared.family)
    if mode == "dirichlet_separable":
        if prepared.profile is None:
            raise ConfigError("dirichlet_separable needs a profile datum")
        return BoundaryData.separable(prepared.u0, prepared.profile.T, params.m)
    barrier = calibrate_barrier(prepared.u0, params, r=cfg.norms.r)
    return BoundaryData(mode, barrier=barrier)


def horizon_ok(t_end, bc):
    if not t_end < bc.horizon:
        raise ConfigError(f"t_end={t_end} reaches the boundary data horizon {bc.horizon:g}")
    return True


__all__ = [
    "BASE_DEFAULTS", "DatumSpec", "ExperimentConfig", "GridSpec", "NormSpec", "OUT_ENV",
    "PreparedDatum", "build_bc", "build_datum", "horizon_ok", "load_config",
]
