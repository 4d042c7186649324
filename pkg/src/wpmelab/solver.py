"""Implicit finite-volume integration of ``rho u_t = Laplacian(|u|^{m-1} u)``.

Vertex-centred scheme on a :class:`RadialGrid`: each node owns the control
volume between neighbouring interval midpoints, with exact weighted mass
``mass_i``. One implicit Euler step solves

    mass_i (u_i - u_i^old) / dt = F_{i+1/2} - F_{i-1/2},
    F_{i+1/2} = sigma_N e_{i+1/2}^{N-1} (V_{i+1} - V_i) / (y_{i+1} - y_i),

with ``V = |u|^{m-1} u``, zero flux at the origin and either zero flux or a
Dirichlet value at ``R_max``. The Jacobian is a tridiagonal M-matrix, so the
step map is order preserving and contracts the mass-weighted l^1 distance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import BlowupDomainError, DomainError, NumericError
from .grid import GridFunction, write_csv
from .model import sphere_area
from .norms import PhiAlpha, cumulative_integral, norm_1r, norm_inf_r, truncate
from .profiles import barrier_value, explicit_value, separable_factor

BC_MODES = ("dirichlet_separable", "dirichlet_barrier", "dirichlet_explicit", "zero_flux")

EPS_JACOBIAN = 1e-12


@dataclass(frozen=True)
class SolverOptions:
    dt_init: float = 1e-4
    dt_max: float = 0.05
    newton_tol: float = 1e-12
    newton_max_iters: int = 30
    bc_mode: str = "zero_flux"
    blowup_threshold: float | None = None
    blowup_factor: float = 1e6
    blowup_probe: str = "center"
    blowup_window: int = 20
    blowup_dt_fraction: float = 0.05
    growth: float = 1.05
    change_target: float = 0.01
    newton_target: int = 5
    newton_slow: int = 8
    shrink: float = 0.5
    max_retries: int = 12
    max_steps: int = 100_000
    land_on_t_end: bool = True

    def __post_init__(self):
        if not (self.dt_init > 0 and self.dt_max > 0 and self.newton_tol > 0):
            raise DomainError("time steps and tolerances must be positive")
        if self.bc_mode not in BC_MODES:
            raise DomainError(f"unknown bc mode {self.bc_mode!r}")
        if self.blowup_probe not in ("center", "sup"):
            raise DomainError("blowup_probe must be 'center' or 'sup'")
        if self.growth < 1 or not (0 < self.shrink < 1):
            raise DomainError("need growth >= 1 and 0 < shrink < 1")
        if not self.change_target > 0:
            raise DomainError("change_target must be positive")


@dataclass(frozen=True)
class BoundaryData:
    """Mode plus whatever data that mode needs to produce its outer value.

    ``dirichlet_separable`` multiplies ``edge_value`` (the datum at
    ``R_max``) by ``(1 - t/T)^{-1/(m-1)}``.
    """

    mode: str = "zero_flux"
    family: object = None
    barrier: object = None
    edge_value: float | None = None
    T: float | None = None
    m: float | None = None

    def __post_init__(self):
        if self.mode not in BC_MODES:
            raise DomainError(f"unknown bc mode {self.mode!r}")
        need = {
            "dirichlet_explicit": self.family is not None,
            "dirichlet_barrier": self.barrier is not None,
            "dirichlet_separable": None not in (self.edge_value, self.T, self.m),
            "zero_flux": True,
        }[self.mode]
        if not need:
            raise DomainError(f"missing data for bc mode {self.mode!r}")

    @property
    def is_dirichlet(self):
        return self.mode != "zero_flux"

    @property
    def horizon(self):
        return {
            "dirichlet_explicit": lambda: self.family.T,
            "dirichlet_barrier": lambda: self.barrier.S,
            "dirichlet_separable": lambda: self.T,
            "zero_flux": lambda: math.inf,
        }[self.mode]()

    def describe(self):
        out = {"mode": self.mode}
        if self.mode == "dirichlet_explicit":
            out.update(a=self.family.a, b=self.family.b, T=self.family.T)
        elif self.mode == "dirichlet_barrier":
            out.update(A=self.barrier.A, S=self.barrier.S)
        elif self.mode == "dirichlet_separable":
            out.update(edge_value=self.edge_value, T=self.T)
        return out

    @classmethod
    def separable(cls, datum, T, m):
        return cls("dirichlet_separable", edge_value=float(datum.values[-1]), T=T, m=m)


def bc_value(bc, t, R):
    """Outer Dirichlet value at time ``t``; ``None`` for a zero-flux closure."""
    if t >= bc.horizon:
        raise BlowupDomainError(f"t={t} is at or past the boundary data horizon {bc.horizon}")
    if bc.mode == "zero_flux":
        return None
    if bc.mode == "dirichlet_explicit":
        return explicit_value(bc.family, R, t)
    if bc.mode == "dirichlet_barrier":
        return barrier_value(bc.barrier, R, t)
    return bc.edge_value * separable_factor(t, bc.T, bc.m)


class _Operator:
    """Geometry of the scheme on one grid."""

    def __init__(self, grid, m):
        self.grid = grid
        self.m = m
        y = grid.nodes
        edges = grid.cell_edges[1:-1]
        self.trans = sphere_area(grid.N) * edges ** (grid.N - 1) / np.diff(y)
        self.mass = grid.cell_weight_mass.copy()
        if np.any(self.mass <= 0):
            raise DomainError("control volume with zero weighted mass")

    def power(self, u):
        return np.abs(u) ** (self.m - 1) * u

    def divergence(self, V):
        flux = self.trans * np.diff(V)
        div = np.zeros_like(V)
        div[:-1] += flux
        div[1:] -= flux
        return div


@dataclass
class StepResult:
    u: np.ndarray
    iterations: int
    converged: bool


def _newton(op, u_old, dt, outer, tol, max_iters):
    """Damped Newton solve of one implicit Euler step."""
    m = op.m
    u = u_old.copy()
    n = u.size if outer is None else u.size - 1
    if outer is not None:
        u[-1] = outer
    coef = dt / op.mass[:n]
    T = op.trans

    def residual(v):
        return (v - u_old - dt * op.divergence(op.power(v)) / op.mass)[:n]

    G = residual(u)
    gnorm = np.max(np.abs(G))
    scale = 1.0 + np.max(np.abs(u))
    for it in range(1, max_iters + 1):
        dV = m * np.abs(u) ** (m - 1) + EPS_JACOBIAN
        Tl = np.concatenate([[0.0], T])[:n]
        Tr = np.concatenate([T, [0.0]])[:n]
        ab = np.zeros((3, n))
        ab[1] = 1.0 + coef * (Tl + Tr) * dV[:n]
        ab[0, 1:] = -coef[:-1] * Tr[:-1] * dV[1:n]
        ab[2, :-1] = -coef[1:] * Tl[1:] * dV[:n - 1]
        delta = solve_banded((1, 1), ab, -G, check_finite=False)
        lam = 1.0
        for _ in range(12):
            trial = u.copy()
            trial[:n] += lam * delta
            Gt = residual(trial)
            gt = np.max(np.abs(Gt))
            if np.isfinite(gt) and (gt < gnorm or gt <= tol * scale):
                break
            lam *= 0.5
        else:
            # no descent left: fine if the residual already sits at roundoff
            return StepResult(u, it, bool(gnorm <= 1e3 * tol * scale))
        u, G, gnorm = trial, Gt, gt
        scale = 1.0 + np.max(np.abs(u))
        if lam * np.max(np.abs(delta)) <= tol * scale and gnorm <= 1e3 * tol * scale:
            return StepResult(u, it, True)
    return StepResult(u, max_iters, False)


def step_implicit(state, dt, bc, m, t=0.0, opts=None):
    """One implicit Euler step of size ``dt`` from time ``t``.

    Retries with halved ``dt`` are left to :func:`solve`; a failed Newton
    solve raises :class:`NumericError`.
    """
    opts = opts or SolverOptions()
    if not dt > 0:
        raise DomainError("dt must be positive")
    if not np.all(np.isfinite(state.values)):
        raise DomainError("state has non-finite values")
    op = _Operator(state.grid, m)
    outer = bc_value(bc, t + dt, state.grid.R_max) if bc.is_dirichlet else None
    res = _newton(op, state.values, dt, outer, opts.newton_tol, opts.newton_max_iters)
    if not res.converged:
        raise NumericError("Newton did not converge", dt=dt, t=t, iterations=res.iterations)
    return GridFunction(state.grid, res.u)


@dataclass(frozen=True)
class BlowupFit:
    T_fit: float
    slope: float
    r2: float
    window: int


def detect_blowup(times, trace, m, window=None):
    """Fit ``trace^{-(m-1)} = slope (T_fit - t)`` over the last ``window`` points.

    Returns ``None`` when the fitted quantity is not decreasing (no blow-up).
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(trace, dtype=float)
    if window is not None:
        t, v = t[-window:], v[-window:]
    if t.size < 3:
        raise DomainError("need at least three points to fit a blow-up time")
    if np.any(v <= 0):
        return None
    z = v ** (-(m - 1.0))
    b, a = np.polyfit(t, z, 1)
    if not b < 0:
        return None
    pred = a + b * t
    ss_res = float(np.sum((z - pred) ** 2))
    ss_tot = float(np.sum((z - z.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return BlowupFit(T_fit=float(-a / b), slope=float(-b), r2=r2, window=int(t.size))


@dataclass
class Trajectory:
    times: np.ndarray
    snapshots: list
    traces: dict
    events: list
    dt_history: np.ndarray
    step_times: np.ndarray
    probe: np.ndarray
    bc: dict
    r: float
    alpha: float | None = None

    @property
    def blowup(self):
        for ev in self.events:
            if ev["kind"] == "blowup":
                return ev
        return None

    @property
    def final(self):
        return self.snapshots[-1]

    def values(self):
        """Snapshot values stacked as an array of shape (times, nodes)."""
        return np.array([s.values for s in self.snapshots])

    def to_json(self, path):
        payload = {
            "times": self.times.tolist(),
            "traces": {k: np.asarray(v).tolist() for k, v in self.traces.items()},
            "events": self.events,
            "bc": self.bc,
            "r": self.r,
            "alpha": self.alpha,
            "steps": int(self.step_times.size),
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)

    def snapshots_to_csv(self, path):
        """Long format: columns time, radius, value."""
        y = self.snapshots[0].grid.nodes
        rows = {"time": [], "radius": [], "value": []}
        for t, s in zip(self.times, self.snapshots):
            rows["time"].extend([t] * y.size)
            rows["radius"].extend(y)
            rows["value"].extend(s.values)
        write_csv(path, rows)


def _probe_value(u, kind):
    return float(u[0]) if kind == "center" else float(np.max(np.abs(u)))


class _Recorder:
    def __init__(self, grid, m, r, alpha, output_times):
        self.grid, self.m, self.r = grid, m, r
        self.phi = PhiAlpha(alpha) if alpha is not None else None
        self.mass = grid.cell_weight_mass
        self.pending = list(np.sort(np.asarray(output_times, dtype=float)))
        self.times, self.snaps = [], []
        self.traces = {k: [] for k in ("norm_1r", "norm_inf_r", "mass", "mass_l1",
                                       "l1_phi", "center", "sup")}

    def due(self, t):
        hit = False
        while self.pending and self.pending[0] <= t * (1 + 1e-12):
            self.pending.pop(0)
            hit = True
        return hit

    def record(self, t, u, blown=False):
        if self.times and self.times[-1] == t:
            return
        f = GridFunction(self.grid, u, blown_up=blown)
        self.times.append(t)
        self.snaps.append(f)
        tr = self.traces
        tr["norm_1r"].append(norm_1r(f, self.m, self.r).value)
        tr["norm_inf_r"].append(norm_inf_r(f, self.m, self.r).value)
        tr["mass"].append(float(np.sum(self.mass * u)))
        tr["mass_l1"].append(float(np.sum(self.mass * np.abs(u))))
        if self.phi is not None:
            vals = np.abs(u) * self.phi(self.grid.nodes)
            tr["l1_phi"].append(float(cumulative_integral(self.grid, vals)[-1]))
        else:
            tr["l1_phi"].append(math.nan)
        tr["center"].append(float(u[0]))
        tr["sup"].append(float(np.max(np.abs(u))))


def default_output_times(t_end, dt_init, count=40):
    lo = min(max(10 * dt_init, t_end * 1e-4), t_end)
    return np.unique(np.concatenate([np.geomspace(lo, t_end, count), [t_end]]))


def solve(params, u0, t_end, opts=None, bc=None, output_times=None, step_times=None,
          r=1.0, alpha=None):
    """Integrate from ``u0`` to ``t_end`` or until blow-up is detected.

    ``step_times`` forces an exact step sequence (used to compare runs
    nodewise); otherwise steps grow geometrically by ``opts.growth`` while
    Newton needs at most ``opts.newton_target`` iterations and the relative
    sup-norm change per step stays below ``opts.change_target``. Near a
    detected blow-up steps are also capped by ``blowup_dt_fraction * (T_fit - t)``.
    """
    opts = opts or SolverOptions()
    bc = bc or BoundaryData(opts.bc_mode)
    grid = u0.grid
    if grid.N != params.N or grid.weight != params.weight:
        raise DomainError("datum grid and problem disagree on N or weight")
    if not t_end > 0:
        raise DomainError("t_end must be positive")
    m = params.m
    op = _Operator(grid, m)
    u = u0.values.astype(float).copy()
    if bc.is_dirichlet:
        u[-1] = bc_value(bc, 0.0, grid.R_max)
    if output_times is None:
        output_times = default_output_times(t_end, opts.dt_init)
    rec = _Recorder(grid, m, r, alpha, output_times)
    rec.record(0.0, u)

    probe0 = _probe_value(u, opts.blowup_probe)
    threshold = opts.blowup_threshold
    if threshold is None:
        threshold = opts.blowup_factor * max(abs(probe0), float(np.max(np.abs(u))) if probe0 == 0 else 0)
    if not threshold > max(abs(probe0), 0.0):
        raise DomainError("blowup_threshold must exceed the initial probe value")

    forced = None if step_times is None else list(np.asarray(step_times, dtype=float))
    t = 0.0
    dt = opts.dt_init
    events, dts, steps, probes = [], [], [0.0], [probe0]
    T_run = None
    blown = False
    for _ in range(opts.max_steps):
        if t >= t_end * (1 - 1e-14) or (forced is not None and not forced):
            break
        if forced is not None:
            dt_try = forced[0] - t
        else:
            dt_try = min(dt, opts.dt_max)
            if T_run is not None and T_run > t:
                dt_try = min(dt_try, opts.blowup_dt_fraction * (T_run - t))
            if opts.land_on_t_end and t + dt_try > t_end:
                dt_try = t_end - t
        for attempt in range(opts.max_retries + 1):
            try:
                outer = bc_value(bc, t + dt_try, grid.R_max) if bc.is_dirichlet else None
            except BlowupDomainError:
                res = None
            else:
                res = _newton(op, u, dt_try, outer, opts.newton_tol, opts.newton_max_iters)
            if res is not None and res.converged:
                break
            events.append({"kind": "newton_failure", "t": t, "dt": dt_try,
                           "iterations": None if res is None else res.iterations})
            if forced is not None and attempt == 0:
                raise NumericError("Newton failed on a prescribed step", t=t, dt=dt_try)
            dt_try *= 0.5
        else:
            raise NumericError("unrecoverable Newton failure", t=t, dt=dt_try)
        if forced is not None:
            forced.pop(0)
        t = t + dt_try
        change = float(np.max(np.abs(res.u - u))) / max(float(np.max(np.abs(res.u))), 1e-300)
        u = res.u
        dts.append(dt_try)
        steps.append(t)
        pv = _probe_value(u, opts.blowup_probe)
        probes.append(pv)
        if res.iterations <= opts.newton_target:
            dt = dt_try * opts.growth
        elif res.iterations > opts.newton_slow:
            dt = dt_try * opts.shrink
        else:
            dt = dt_try
        if change > 0:
            dt = min(dt, dt_try * max(opts.change_target / change, opts.shrink))
        if abs(pv) >= threshold:
            fit = detect_blowup(steps, probes, m, opts.blowup_window)
            events.append({
                "kind": "blowup", "t_detect": t,
                "T_fit": None if fit is None else fit.T_fit,
                "fit_r2": None if fit is None else fit.r2,
                "window": opts.blowup_window, "probe": opts.blowup_probe,
                "threshold": threshold,
            })
            blown = True
            rec.record(t, u, blown=True)
            break
        if probe0 > 0 and pv >= 10 * probe0 and len(steps) >= 5:
            fit = detect_blowup(steps, probes, m, min(opts.blowup_window, len(steps)))
            T_run = fit.T_fit if fit is not None else None
        if rec.due(t):
            rec.record(t, u)
    else:
        events.append({"kind": "max_steps", "t": t})
    if not blown:
        rec.record(t, u)

    return Trajectory(
        times=np.array(rec.times),
        snapshots=rec.snaps,
        traces={k: np.array(v) for k, v in rec.traces.items()},
        events=events,
        dt_history=np.array(dts),
        step_times=np.array(steps[1:]),
        probe=np.array(probes),
        bc=bc.describe(),
        r=r,
        alpha=alpha,
    )


def truncate_datum(u0, n):
    """Approximating datum ``tau_n(u0) * chi_{B_n}``."""
    return truncate(u0, n)
