"""Closed-form solution families and the radial elliptic profiles.

Elliptic profiles solve ``Laplacian(W^m) = rho W / (T (m-1))`` with
``W(0) = beta``. In the variable ``V = W^m`` the radial problem is the
Volterra equation

    V(y) = beta^m + int_0^y z^{1-N} int_0^z s^{N-1} rho~(s) V(s)^{1/m} ds dz,

``rho~ = rho / (T (m-1))``. Exchanging the order of integration gives

    V(y) = beta^m + [A(y) - y^{2-N} B(y)] / (N - 2),
    A(y) = int_0^y s rho~ V^{1/m} ds,  B(y) = int_0^y s^{N-1} rho~ V^{1/m} ds,

which is what the Picard iteration evaluates, with exact per-interval
weight moments and trapezoidal averages of ``V^{1/m}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BlowupDomainError, DomainError, NumericError
from .grid import GridFunction, RadialGrid, write_csv
from .model import ProblemParams, derive_exponents, sphere_area, weight_eval
from .norms import growth_exponent, norm_inf_r


@dataclass(frozen=True)
class ExplicitFamily:
    """Explicit solutions from data ``(a + b y^{2-gamma})^{1/(m-1)}``.

    Valid for the pure power weight only.
    """

    params: ProblemParams
    a: float
    b: float

    def __post_init__(self):
        if not self.params.weight.is_pure_power:
            raise DomainError("explicit family requires the pure power weight")
        if self.a < 0 or not self.b > 0:
            raise DomainError("need a >= 0 and b > 0")

    @property
    def kappa(self):
        return derive_exponents(self.params).kappa

    @property
    def coefficient(self):
        """``kappa / (m (2-gamma) (N-gamma))``."""
        p = self.params
        return self.kappa / (p.m * (2 - p.gamma) * (p.N - p.gamma))

    @property
    def T(self):
        return self.coefficient / self.b

    def datum(self, y):
        p = self.params
        return (self.a + self.b * np.asarray(y, dtype=float) ** (2 - p.gamma)) ** (1 / (p.m - 1))


def critical_product(params):
    """``||u0||_{1,r}^{m-1} T`` for the critical explicit datum ``(b y^{2-gamma})^{1/(m-1)}``.

    The datum has ``r``-independent norm ``sigma_N b^{1/(m-1)} / (rate + N - gamma)``
    and ``T = coefficient / b``, so the product depends on neither ``b`` nor
    ``r``. Any admissible existence constant ``C1`` must lie below it.
    """
    fam = ExplicitFamily(params, 0.0, 1.0)
    N, g = params.N, params.gamma
    norm = sphere_area(N) / (growth_exponent(g, params.m) + N - g)
    return norm ** (params.m - 1) * fam.T


def explicit_value(family, y, t):
    """Value of the explicit solution at radius ``y`` and time ``t < T``."""
    T = family.T
    if t >= T:
        raise BlowupDomainError(f"t={t} is at or past the blow-up time T={T}")
    if t < 0:
        raise DomainError("t must be nonnegative")
    p = family.params
    y = np.asarray(y, dtype=float)
    s = T - t
    base = family.a * (T / s) ** family.kappa + family.coefficient * y ** (2 - p.gamma) / s
    out = base ** (1 / (p.m - 1))
    return float(out) if out.ndim == 0 else out


@dataclass(eq=False)
class EllipticProfile:
    beta: float
    T: float
    params: ProblemParams
    grid: RadialGrid
    V_samples: np.ndarray
    picard_iters: int
    residual: float
    asymptotic_slope: float

    @property
    def W_samples(self):
        return self.V_samples ** (1.0 / self.params.m)

    @property
    def W(self):
        return GridFunction(self.grid, self.W_samples)

    @property
    def expected_slope(self):
        m = self.params.m
        return (2 - self.params.gamma) * m / (m - 1)

    def to_csv(self, path):
        write_csv(path, {"radius": self.grid.nodes, "W": self.W_samples, "V": self.V_samples})


class _PicardMap:
    """The integral operator of the radial elliptic problem on a fixed grid."""

    def __init__(self, params, beta, T, grid):
        if grid.N != params.N or grid.weight != params.weight:
            raise DomainError("grid and problem disagree on N or weight")
        if not (beta > 0 and T > 0):
            raise DomainError("need beta > 0 and T > 0")
        self.m = params.m
        self.N = params.N
        self.base = beta**params.m
        scale = 1.0 / (T * (params.m - 1))
        self.A = scale * grid.radial_moment(1)
        self.B = scale * grid.radial_moment(params.N - 1)
        y = grid.nodes
        self.ypow = np.zeros_like(y)
        self.ypow[1:] = y[1:] ** (2 - params.N)

    def __call__(self, V):
        q = V ** (1.0 / self.m)
        qbar = 0.5 * (q[1:] + q[:-1])
        SA = np.concatenate([[0.0], np.cumsum(self.A * qbar)])
        SB = np.concatenate([[0.0], np.cumsum(self.B * qbar)])
        return self.base + (SA - self.ypow * SB) / (self.N - 2)


def picard_iterates(params, beta, T, grid):
    """Yield the Picard iterates starting from the constant ``beta^m``."""
    step = _PicardMap(params, beta, T, grid)
    V = np.full(grid.nodes.shape, step.base)
    yield V
    while True:
        V = step(V)
        yield V


def shoot_profile(params, beta, T, grid, tol=1e-10, max_iters=10_000):
    """Elliptic profile ``W_beta`` on ``grid`` by monotone Picard iteration.

    Iterates until the sup-norm change is at most ``tol * (1 + sup V)``.
    """
    step = _PicardMap(params, beta, T, grid)
    V = np.full(grid.nodes.shape, step.base)
    with np.errstate(over="raise", invalid="raise"):
        for it in range(1, max_iters + 1):
            try:
                Vn = step(V)
            except FloatingPointError:
                raise NumericError("overflow in the far field; reduce R_max",
                                   iteration=it, R_max=grid.R_max) from None
            change = float(np.max(np.abs(Vn - V)))
            V = Vn
            if change <= tol * (1.0 + float(V.max())):
                break
        else:
            raise NumericError("Picard iteration did not converge",
                               iterations=max_iters, change=change)
    if not np.all(np.isfinite(V)):
        raise NumericError("non-finite profile; reduce R_max", R_max=grid.R_max)
    residual = float(np.max(np.abs(step(V) - V)) / (1.0 + V.max()))
    return EllipticProfile(
        beta=float(beta), T=float(T), params=params, grid=grid, V_samples=V,
        picard_iters=it, residual=residual,
        asymptotic_slope=far_field_slope(grid.nodes, V),
    )


def far_field_slope(y, V, lo=None, hi=None):
    """Least-squares slope of ``log V`` against ``log y`` on ``[lo, hi]``.

    Defaults to the last decade of nodes.
    """
    y = np.asarray(y)
    hi = y[-1] if hi is None else hi
    lo = hi / 10.0 if lo is None else lo
    sel = (y >= lo) & (y <= hi) & (y > 0)
    if sel.sum() < 3:
        raise DomainError("fewer than three nodes in the fitting window")
    return float(np.polyfit(np.log(y[sel]), np.log(V[sel]), 1)[0])


def ode_defect(profile):
    """Relative defect of ``(y^{N-1} V')' = y^{N-1} rho~ V^{1/m}`` at interior nodes.

    Uses centred differences on the (possibly nonuniform) grid, so the
    defect is a discretisation measure that should shrink like ``h^2``.
    """
    p, grid = profile.params, profile.grid
    y, V = grid.nodes, profile.V_samples
    N = p.N
    mid = 0.5 * (y[1:] + y[:-1])
    flux = mid ** (N - 1) * np.diff(V) / np.diff(y)
    div = np.diff(flux) / (0.5 * (y[2:] - y[:-2]))
    yi = y[1:-1]
    rhs = yi ** (N - 1) * weight_eval(p.weight, yi) * V[1:-1] ** (1 / p.m) / (profile.T * (p.m - 1))
    return np.abs(div - rhs) / np.maximum(np.abs(rhs), 1e-300)


def separable_solution(profile, t):
    """``U_beta(t) = (1 - t/T)^{-1/(m-1)} W_beta``."""
    if t >= profile.T:
        raise BlowupDomainError(f"t={t} is at or past T={profile.T}")
    factor = separable_factor(t, profile.T, profile.params.m)
    return GridFunction(profile.grid, factor * profile.W_samples)


def separable_factor(t, T, m):
    if t >= T:
        raise BlowupDomainError(f"t={t} is at or past T={T}")
    return (1.0 - t / T) ** (-1.0 / (m - 1))


@dataclass(frozen=True)
class Barrier:
    """Supersolution ``A (1 - t/S)^{-1/(m-1)} (1 + y^2)^{(2-gamma)/(2(m-1))}``."""

    A: float
    S: float
    gamma: float
    m: float

    def __post_init__(self):
        if not (self.A > 0 and self.S > 0):
            raise DomainError("barrier needs A > 0 and S > 0")


def barrier_value(barrier, y, t):
    if t >= barrier.S:
        raise BlowupDomainError(f"t={t} is at or past the barrier horizon S={barrier.S}")
    e = growth_exponent(barrier.gamma, barrier.m)
    y = np.asarray(y, dtype=float)
    out = barrier.A * (1 - t / barrier.S) ** (-1 / (barrier.m - 1)) * (1 + y**2) ** (e / 2)
    return float(out) if out.ndim == 0 else out


def barrier_domination_constant(gamma, m, r):
    """Smallest ``kappa_r`` with ``|f| <= kappa_r ||f||_{inf,r} (1+y^2)^{rate/2}``.

    Since ``|f(y)| <= ||f||_{inf,r} max(r, y)^rate`` and
    ``max(r,y)^rate / (1+y^2)^{rate/2}`` peaks at ``y = 0``, this is ``r^rate``.
    """
    return r ** growth_exponent(gamma, m)


def supersolution_constant(params, radii=None):
    """Largest ``C`` such that ``S = C / A^{m-1}`` makes the barrier a supersolution.

    The pointwise condition ``rho u_t >= Laplacian(u^m)`` reduces to

        C <= rho(y) (1+y^2)^{gamma/2} / ((2-gamma) m [N + (2-gamma m) y^2/((m-1)(1+y^2))])

    wherever the bracket is positive; the infimum is taken over ``radii``.
    """
    N, m, g = params.N, params.m, params.gamma
    y = np.logspace(-6, 6, 2001) if radii is None else np.asarray(radii, dtype=float)
    bracket = N + (2 - g * m) * y**2 / ((m - 1) * (1 + y**2))
    rho = weight_eval(params.weight, y)
    pos = bracket > 0
    if not np.any(pos):
        return math.inf
    ratio = rho[pos] * (1 + y[pos] ** 2) ** (g / 2) / ((2 - g) * m * bracket[pos])
    return float(np.min(ratio))


def calibrate_barrier(u0, params, r=1.0, safety=0.5, C=None):
    """Barrier dominating ``|u0|`` at ``t = 0``.

    ``A = kappa_r ||u0||_{inf,r}`` (guarded away from zero) and
    ``S = C / A^{m-1}`` with ``C = safety * supersolution_constant``.
    """
    m, g = params.m, params.gamma
    ninf = norm_inf_r(u0, m, r).value
    if not math.isfinite(ninf):
        raise DomainError("datum has infinite ||.||_{inf,r}")
    A = max(barrier_domination_constant(g, m, r) * ninf, 1e-300)
    C = safety * supersolution_constant(params) if C is None else C
    barrier = Barrier(A=A, S=C / A ** (m - 1), gamma=g, m=m)
    dom = barrier_value(barrier, u0.grid.nodes, 0.0)
    if np.any(np.abs(u0.values) > dom * (1 + 1e-12)):
        raise NumericError("calibrated barrier does not dominate the datum")
    return barrier


def compact_profile(grid, m, c1, c2, c3):
    """Barenblatt-type datum ``c1 (c2 - c3 y^{2-gamma})_+^{1/(m-1)}``."""
    if not (c1 > 0 and c2 > 0 and c3 > 0):
        raise DomainError("compact profile needs positive parameters")
    g = grid.weight.gamma
    base = np.maximum(c2 - c3 * grid.nodes ** (2 - g), 0.0)
    return GridFunction(grid, c1 * base ** (1 / (m - 1)))


def compact_support_edge(gamma, c2, c3):
    return (c2 / c3) ** (1 / (2 - gamma))
