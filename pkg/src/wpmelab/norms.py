"""Growth-weighted norms of radial grid functions.

Suprema over ``R >= r`` are taken over the probe set ``{r} U {nodes > r}``
and, for ``p < inf``, also inside every cell: the discrete ball integral is
a smooth function of ``R`` between nodes and ``R^-e I(R)^{1/p}`` can peak
there, so a golden-section search per cell recovers that peak. The result is
the supremum over the continuum ``R >= r``, which makes monotonicity in ``r``
exact. When the supremum sits at ``R_max`` the true value may be larger and
the report says so.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .grid import GridFunction, cumulative_integral, integrate_to
from .model import sphere_area, weight_cell_mass, weight_eval


@dataclass(frozen=True)
class NormReport:
    value: float
    argmax_R: float
    truncation_note: bool = False

    def to_dict(self):
        return {"value": self.value, "argmax_R": self.argmax_R,
                "truncation_note": self.truncation_note}


def growth_exponent(gamma, m):
    """Critical growth rate ``(2-gamma)/(m-1)``."""
    return (2.0 - gamma) / (m - 1.0)


def _probes(grid, r, R_cap=None):
    y = grid.nodes
    top = grid.R_max if R_cap is None else min(R_cap, grid.R_max)
    inner = y[(y > r) & (y <= top)]
    return np.concatenate([[r], inner])


def _check_r(grid, r, need=1.0):
    if r < 1:
        raise DomainError(f"r must be >= 1, got {r}")
    if grid.R_max < need * r:
        raise DomainError(f"R_max={grid.R_max} too small for r={r} (need >= {need} r)")


def _ball_integrals(grid, vals, probes, cum=None):
    cum = cumulative_integral(grid, vals) if cum is None else cum
    k = np.searchsorted(grid.nodes, probes, side="right") - 1
    out = cum[k]
    for i in np.nonzero(grid.nodes[k] != probes)[0]:
        out[i] = integrate_to(grid, vals, probes[i], cum)
    return out


GAUSS_NODES, GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(10)
GOLDEN_ITERS = 60


def _partial_mass(grid, k, R):
    """Weighted mass of the shells ``y_k < |x| < R`` for cell indices ``k``."""
    y0 = grid.nodes[k]
    w, N = grid.weight, grid.N
    if w.is_pure_power:
        n = N - w.gamma
        return sphere_area(N) * (R**n - y0**n) / n
    half, mid = 0.5 * (R - y0), 0.5 * (R + y0)
    xi = mid[:, None] + half[:, None] * GAUSS_NODES[None, :]
    dens = np.asarray(weight_eval(w, xi)) * xi ** (N - 1)
    return sphere_area(N) * half * (dens @ GAUSS_WEIGHTS)


def _cell_peaks(grid, gp, cum, lo, top, e, p):
    """Largest ``R^-e I(R)^{1/p}`` strictly inside each cell meeting ``(lo, top)``.

    ``I`` is the ball integral of :func:`integrate_to`: exact partial mass
    times the trapezoidal average of the linear interpolant of ``gp``.
    """
    y = grid.nodes
    k = np.nonzero((y[1:] > lo) & (y[:-1] < top))[0]
    if k.size == 0:
        return np.empty(0), np.empty(0)
    a = np.maximum(y[k], lo)
    b = np.minimum(y[k + 1], top)
    slope = (gp[k + 1] - gp[k]) / (y[k + 1] - y[k])

    def value(R):
        I = cum[k] + _partial_mass(grid, k, R) * 0.5 * (2 * gp[k] + slope * (R - y[k]))
        return R ** (-e) * np.maximum(I, 0.0) ** (1.0 / p)

    ratio = 0.5 * (math.sqrt(5.0) - 1.0)
    for _ in range(GOLDEN_ITERS):
        c = b - ratio * (b - a)
        d = a + ratio * (b - a)
        left = value(c) > value(d)
        b = np.where(left, d, b)
        a = np.where(left, a, c)
    R = 0.5 * (a + b)
    return R, value(R)


def _report(values, probes, grid):
    i = int(np.argmax(values))
    return NormReport(
        value=float(values[i]),
        argmax_R=float(probes[i]),
        truncation_note=bool(probes[i] >= grid.R_max),
    )


def norm_pr(f, m, r=1.0, p=1.0, R_cap=None):
    """``sup_{R>=r} R^{-(2-g)/(m-1)-(N-g)/p} (int_{B_R} |f|^p rho)^{1/p}``."""
    grid = f.grid
    if p == math.inf:
        return norm_inf_r(f, m, r, R_cap)
    if not p >= 1:
        raise DomainError("p must be >= 1")
    _check_r(grid, r)
    g = grid.weight.gamma
    e = growth_exponent(g, m) + (grid.N - g) / p
    probes = _probes(grid, r, R_cap)
    gp = np.abs(f.values) ** p
    cum = cumulative_integral(grid, gp)
    ints = _ball_integrals(grid, gp, probes, cum)
    vals = probes ** (-e) * np.maximum(ints, 0.0) ** (1.0 / p)
    R_in, v_in = _cell_peaks(grid, gp, cum, r, probes[-1], e, p)
    return _report(np.concatenate([vals, v_in]), np.concatenate([probes, R_in]), grid)


def norm_1r(f, m, r=1.0, R_cap=None):
    return norm_pr(f, m, r, 1.0, R_cap)


def norm_inf_r(f, m, r=1.0, R_cap=None):
    """``sup_{R>=r} R^{-(2-g)/(m-1)} max_{nodes <= R} |f|``."""
    grid = f.grid
    _check_r(grid, r)
    probes = _probes(grid, r, R_cap)
    running = np.maximum.accumulate(np.abs(f.values))
    idx = np.searchsorted(grid.nodes, probes, side="right") - 1
    vals = running[idx] * probes ** (-growth_exponent(grid.weight.gamma, m))
    return _report(vals, probes, grid)


@dataclass(frozen=True)
class CutoffProfile:
    """Smooth cut-off: 1 on [0,1], 0 on [2,inf), degree-7 smoothstep between."""

    degree: int = 7

    def __call__(self, x):
        s = np.clip(np.asarray(x, dtype=float) - 1.0, 0.0, 1.0)
        s2 = s * s
        step = s2 * s2 * (35.0 + s * (-84.0 + s * (70.0 - 20.0 * s)))
        return 1.0 - step


@dataclass(frozen=True)
class PhiAlpha:
    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError("alpha must be positive")

    def __call__(self, y):
        return (1.0 + np.asarray(y, dtype=float) ** 2) ** (-self.alpha)


def cutoff_norm_pr(f, m, r=1.0, p=1.0, cutoff=None):
    """Cut-off variant ``sup_R R^{-e} (int |phi(|x|/R) f|^p rho)^{1/p}``.

    The function is extended by zero beyond ``R_max``. On ``B_R`` the
    cut-off equals one and the plain ball integral is reused; the shell
    ``R < |x| < 2R`` is integrated on the points ``{R, nodes, 2R}``. The
    probes are ``{r} U {nodes > r}`` plus the maximiser of the plain norm,
    so the cut-off value never falls below the plain one.
    """
    grid = f.grid
    _check_r(grid, r, need=4.0)
    if not p >= 1 or p == math.inf:
        raise DomainError("cutoff norm needs 1 <= p < inf")
    phi = cutoff or CutoffProfile()
    g = grid.weight.gamma
    e = growth_exponent(g, m) + (grid.N - g) / p
    gp = np.abs(f.values) ** p
    probes = np.union1d(_probes(grid, r), [norm_pr(f, m, r, p).argmax_R])
    inner = _ball_integrals(grid, gp, probes)
    shell = np.concatenate([
        _shell_integrals(grid, gp, probes[i:i + SHELL_BLOCK], phi, p)
        for i in range(0, probes.size, SHELL_BLOCK)
    ])
    return _report(probes ** (-e) * (inner + shell) ** (1.0 / p), probes, grid)


# probes per vectorised block of the shell quadrature (bounds memory use)
SHELL_BLOCK = 256


def _shell_integrals(grid, gp, R, phi, p):
    """``int_{R<|x|<min(2R, R_max)} phi(|x|/R)^p g rho`` for each probe radius.

    Every interval meeting ``[R, top]`` is clipped to it; clipped endpoints
    take the linear interpolant of ``g``, and clipped masses are exact.
    """
    y = grid.nodes
    top = np.minimum(2.0 * R, grid.R_max)
    first = np.searchsorted(y, R, side="right") - 1
    last = np.searchsorted(y, top, side="left")
    width = int(np.max(last - first)) if R.size else 0
    if width <= 0:
        return np.zeros(R.size)
    j = first[:, None] + np.arange(width)[None, :]
    live = j < last[:, None]
    j = np.minimum(j, grid.M - 1)
    lo, hi = y[j], y[j + 1]
    a = np.maximum(lo, R[:, None])
    b = np.minimum(hi, top[:, None])
    live &= b > a
    a = np.where(live, a, lo)
    b = np.where(live, b, hi)
    pa, pb = phi(a / R[:, None]), phi(b / R[:, None])
    if p != 1.0:
        pa, pb = pa**p, pb**p
    ga = np.interp(a, y, gp) * pa
    gb = np.interp(b, y, gp) * pb
    cut = live & ((a > lo) | (b < hi))
    mass = grid.interval_mass[j]
    if grid.weight.is_pure_power:
        ex = grid.N - grid.weight.gamma
        mass = np.where(cut, sphere_area(grid.N) * (b**ex - a**ex) / ex, mass)
    else:
        for i, k in zip(*np.nonzero(cut)):
            mass[i, k] = weight_cell_mass(grid.weight, grid.N, a[i, k], b[i, k])
    return np.sum(np.where(live, mass * 0.5 * (ga + gb), 0.0), axis=1)


@dataclass(frozen=True)
class TailReport:
    radii: tuple
    values: tuple
    limit_estimate: float
    last_value: float
    reference: float
    in_X0: bool
    tolerance: float

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def ell_tail(f, m, r_schedule=None, tol=1e-3):
    """Track ``||f||_{1,r}`` as r grows and estimate its limit.

    The limit is estimated by Aitken extrapolation of the last three values,
    clipped to ``[0, last value]`` since the sequence is nonincreasing.
    ``in_X0`` compares the estimate with ``tol * ||f||_{1,1}``.
    """
    grid = f.grid
    if r_schedule is None:
        r_schedule = np.geomspace(1.0, grid.R_max / 2.0, 12)
    radii = np.asarray(r_schedule, dtype=float)
    if radii.size < 3:
        raise DomainError("schedule needs at least three radii")
    if radii[0] < 1 or radii[-1] > grid.R_max / 2.0 * (1 + 1e-12) or np.any(np.diff(radii) <= 0):
        raise DomainError("schedule must increase within [1, R_max/2]")
    vals = np.array([norm_1r(f, m, r).value for r in radii])
    a, b, c = vals[-3:]
    denom = (c - b) - (b - a)
    est = c
    if abs(denom) > 1e-14 * max(abs(a), 1e-300):
        est = c - (c - b) ** 2 / denom
    est = float(min(max(est, 0.0), c))
    ref = norm_1r(f, m, 1.0).value
    return TailReport(
        radii=tuple(radii.tolist()),
        values=tuple(vals.tolist()),
        limit_estimate=est,
        last_value=float(c),
        reference=ref,
        in_X0=bool(est <= tol * ref),
        tolerance=tol,
    )


@dataclass(frozen=True)
class PhiAlphaNorm:
    value: float
    tail_bound: float
    alpha: float


def norm_phi_alpha(f, alpha, m, r=1.0):
    """``int |f| Phi_alpha rho dx`` over the grid plus a bound on the rest.

    The bound on ``int_{|x|>R_max}`` uses ``||f||_{1,r}`` and the layer-cake
    estimate, finite only when ``2 alpha > omega``.
    """
    grid = f.grid
    w = PhiAlpha(alpha)
    vals = np.abs(f.values) * w(grid.nodes)
    value = float(cumulative_integral(grid, vals)[-1])
    omega = _omega(grid, m)
    if 2 * alpha > omega:
        M1 = norm_1r(f, m, r).value if grid.R_max >= r else math.inf
        tail = 2 * alpha * M1 * grid.R_max ** (omega - 2 * alpha) / (2 * alpha - omega)
    else:
        tail = math.inf
    return PhiAlphaNorm(value=value, tail_bound=float(tail), alpha=alpha)


def _omega(grid, m):
    g = grid.weight.gamma
    return growth_exponent(g, m) + grid.N - g


def alpha_threshold(N, gamma, m):
    """Smallest admissible alpha for the L^1(Phi_alpha) embedding (exclusive)."""
    return (2 - gamma) / (2 * (m - 1)) + (N - gamma) / 2


def embedding_constant(N, gamma, m, alpha, r=1.0):
    """``r^omega + 2 alpha r^{-(2 alpha - omega)} / (2 alpha - omega)``."""
    omega = growth_exponent(gamma, m) + N - gamma
    if not alpha > alpha_threshold(N, gamma, m):
        raise DomainError(f"alpha={alpha} must exceed {alpha_threshold(N, gamma, m)}")
    return r**omega + 2 * alpha * r ** (-(2 * alpha - omega)) / (2 * alpha - omega)


@dataclass(frozen=True)
class EmbeddingCheck:
    lhs: float
    bound: float
    slack: float
    tail_bound: float


def embedding_check(f, alpha, m, r=1.0):
    """Compare ``||f||_{L^1(Phi_alpha)}`` with its bound through ``||f||_{1,r}``."""
    grid = f.grid
    C = embedding_constant(grid.N, grid.weight.gamma, m, alpha, r)
    n1 = norm_1r(f, m, r).value
    lhs = norm_phi_alpha(f, alpha, m, r)
    bound = C * n1
    return EmbeddingCheck(lhs=lhs.value, bound=bound, slack=bound - lhs.value,
                          tail_bound=lhs.tail_bound)


@dataclass(frozen=True)
class LimsupReport:
    norm_tail: float
    far_field_ratio: float
    r_tail: float
    difference: float


def limsup_rate(f, m, r_tail=None):
    """Both sides of ``lim_r ||f||_{inf,r} = limsup |x|^{-rate} |f(x)|``.

    The left side is ``||f||_{inf, r_tail}`` (default ``R_max/2``); the right
    side is the largest ratio over nodes in ``[r_tail, R_max]``.
    """
    grid = f.grid
    r_tail = grid.R_max / 2.0 if r_tail is None else float(r_tail)
    lhs = norm_inf_r(f, m, max(r_tail, 1.0)).value
    y = grid.nodes
    far = y >= r_tail
    rate = growth_exponent(grid.weight.gamma, m)
    rhs = float(np.max(np.abs(f.values[far]) * y[far] ** (-rate)))
    return LimsupReport(norm_tail=lhs, far_field_ratio=rhs, r_tail=r_tail,
                        difference=abs(lhs - rhs))


def holder_constant(grid, p, q):
    """``c`` with ``||f||_{p,r} <= c ||f||_{q,r}``, from the ball masses.

    ``c = (sup_R mass(B_R) / R^{N-gamma})^{1/p - 1/q}`` over the nodes.
    """
    g = grid.weight.gamma
    y = grid.nodes[1:]
    ratio = float(np.max(grid.cum_mass[1:] / y ** (grid.N - g)))
    inv_q = 0.0 if q == math.inf else 1.0 / q
    return ratio ** (1.0 / p - inv_q)


def truncate(f, n):
    """``tau_n(f) * chi_{B_n}``: clamp to ``[-n, n]`` and zero for ``y >= n``."""
    if not n > 0:
        raise DomainError("truncation level must be positive")
    v = np.clip(f.values, -n, n)
    v = np.where(f.grid.nodes < n, v, 0.0)
    return GridFunction(f.grid, v)
