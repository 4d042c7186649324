"""Problem parameters, radial weights and exponent algebra.

The equation is ``rho(x) u_t = Laplacian(u^m)`` on R^N with a radial weight
satisfying ``k (1+|x|)^-gamma <= rho(x) <= K |x|^-gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, NumericError

WEIGHT_KINDS = ("pure_power", "regularized_power", "user_radial")

# log-spaced radii used to validate the two-sided weight bounds
PROBE_RADII = np.logspace(-6, 6, 64)

QUAD_RTOL = 1e-10


def sphere_area(N):
    """Surface area of the unit sphere in R^N."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


@dataclass(frozen=True)
class WeightSpec:
    """A radial weight rho(y) with its sandwich constants.

    ``kind`` selects the evaluation rule:

    * ``pure_power``: ``y**-gamma``
    * ``regularized_power``: ``(eps**2 + y**2)**(-gamma/2)``
    * ``user_radial``: monotone (PCHIP) interpolation of tabulated samples in
      log-log coordinates, extended as a power law outside the table.
    """

    gamma: float
    k: float = 1.0
    K: float = 1.0
    kind: str = "pure_power"
    eps: float = 0.0
    table_y: tuple = ()
    table_rho: tuple = ()

    def __post_init__(self):
        if not (0.0 <= self.gamma < 2.0):
            raise DomainError(f"gamma must lie in [0, 2), got {self.gamma}")
        if not (self.k > 0 and self.K > 0):
            raise DomainError("sandwich constants k, K must be positive")
        if self.K < self.k:
            raise DomainError(f"need k <= K, got k={self.k}, K={self.K}")
        if self.kind not in WEIGHT_KINDS:
            raise DomainError(f"unknown weight kind {self.kind!r}")
        if self.kind == "regularized_power" and self.eps < 0:
            raise DomainError("eps must be nonnegative")
        if self.kind == "user_radial":
            ty = np.asarray(self.table_y, dtype=float)
            tr = np.asarray(self.table_rho, dtype=float)
            if ty.size < 2 or ty.size != tr.size:
                raise DomainError("user_radial needs matching tables with >= 2 samples")
            if np.any(ty <= 0) or np.any(np.diff(ty) <= 0):
                raise DomainError("table radii must be positive and strictly increasing")
            if np.any(tr <= 0):
                raise DomainError("tabulated weight values must be positive")
            object.__setattr__(self, "table_y", tuple(float(v) for v in ty))
            object.__setattr__(self, "table_rho", tuple(float(v) for v in tr))
        self.check_bounds()

    @property
    def is_pure_power(self):
        return self.kind == "pure_power" or (
            self.kind == "regularized_power" and self.eps == 0.0
        )

    @cached_property
    def _table(self):
        ly = np.log(np.asarray(self.table_y))
        lr = np.log(np.asarray(self.table_rho))
        interp = PchipInterpolator(ly, lr, extrapolate=False)
        left = (lr[1] - lr[0]) / (ly[1] - ly[0])
        right = (lr[-1] - lr[-2]) / (ly[-1] - ly[-2])
        return ly, lr, interp, left, right

    def __call__(self, y):
        return weight_eval(self, y)

    def bounds(self, y):
        """Lower and upper sandwich envelopes at radii ``y``."""
        y = np.asarray(y, dtype=float)
        return self.k * (1.0 + y) ** (-self.gamma), self.K * y ** (-self.gamma)

    def check_bounds(self, radii=None, rtol=1e-12):
        """Raise DomainError unless the sandwich bounds hold at ``radii``."""
        radii = PROBE_RADII if radii is None else np.asarray(radii, dtype=float)
        rho = weight_eval(self, radii)
        lo, hi = self.bounds(radii)
        bad = (rho < lo * (1 - rtol)) | (rho > hi * (1 + rtol))
        if np.any(bad):
            y_bad = float(radii[np.argmax(bad)])
            raise DomainError(
                f"weight violates k(1+y)^-gamma <= rho <= K y^-gamma at y={y_bad:g}"
            )
        return True


def weight_eval(spec, y):
    """Evaluate the weight at radii ``y > 0`` (scalar or array)."""
    arr = np.asarray(y, dtype=float)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise DomainError("weight radius must be finite and nonnegative")
    if spec.kind == "regularized_power" and spec.eps > 0:
        out = (spec.eps**2 + arr**2) ** (-spec.gamma / 2.0)
    elif spec.gamma == 0.0 and spec.kind != "user_radial":
        out = np.ones_like(arr)
    else:
        if np.any(arr == 0):
            raise DomainError("weight is singular at y = 0")
        if spec.kind == "user_radial":
            ly, lr, interp, left, right = spec._table
            lx = np.log(arr)
            val = interp(lx)
            val = np.where(lx < ly[0], lr[0] + left * (lx - ly[0]), val)
            val = np.where(lx > ly[-1], lr[-1] + right * (lx - ly[-1]), val)
            out = np.exp(val)
        else:
            out = arr ** (-spec.gamma)
    return float(out) if np.ndim(out) == 0 else out


def weight_moment(spec, power, a, b):
    """Radial moment ``int_a^b y**power * rho(y) dy`` for ``0 <= a <= b``."""
    if not (0.0 <= a <= b) or not math.isfinite(b):
        raise DomainError(f"invalid interval [{a}, {b}]")
    if a == b:
        return 0.0
    if spec.is_pure_power:
        e = power + 1.0 - spec.gamma
        if e <= 0:
            raise DomainError("moment diverges at the origin")
        return (b**e - a**e) / e
    f = lambda y: y**power * weight_eval(spec, y) if y > 0 else 0.0
    points = None
    if spec.kind == "user_radial":
        points = [t for t in spec.table_y if a < t < b] or None
    val, err, info = _quad(f, a, b, points)
    return val


def _quad(f, a, b, points):
    out = integrate.quad(
        f, a, b, epsabs=0.0, epsrel=QUAD_RTOL, limit=400, points=points, full_output=1
    )
    val, err = out[0], out[1]
    if len(out) > 3 and abs(err) > 10 * QUAD_RTOL * abs(val) + 1e-300:
        raise NumericError(
            "weight quadrature did not converge", interval=(a, b), estimate=val, error=err
        )
    return val, err, out[2]


def weight_cell_mass(spec, N, a, b):
    """Weighted volume ``int_{a<|x|<b} rho dx`` of a spherical shell."""
    return sphere_area(N) * weight_moment(spec, N - 1, a, b)


@dataclass(frozen=True)
class ProblemParams:
    N: int
    m: float
    weight: WeightSpec = field(default_factory=lambda: WeightSpec(gamma=0.0))
    T_factor: float | None = None

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 3:
            raise DomainError(f"dimension N must be an integer >= 3, got {self.N}")
        if not self.m > 1:
            raise DomainError(f"m must exceed 1, got {self.m}")
        if self.T_factor is not None and not self.T_factor > 0:
            raise DomainError("T_factor must be positive")

    @property
    def gamma(self):
        return self.weight.gamma

    @cached_property
    def exponents(self):
        return derive_exponents(self)


@dataclass(frozen=True)
class Exponents:
    lambda1: float
    theta: float
    kappa: float
    critical_rate: float

    @property
    def identity_defect(self):
        """``theta*lambda1 + lambda1*(m-1) - 1``; zero up to rounding."""
        return self.theta * self.lambda1 + self.kappa - 1.0


def derive_exponents(params):
    N, m, g = params.N, params.m, params.gamma
    a, s = N - g, 2 - g  # share one rounding of 2 - g
    lambda1 = a / (a * (m - 1) + s)
    theta = s / a
    return Exponents(
        lambda1=lambda1,
        theta=theta,
        kappa=lambda1 * (m - 1),
        critical_rate=s / (m - 1),
    )


def existence_time(norm_1r, m, C1=1.0):
    """Guaranteed existence time ``C1 / norm**(m-1)``; ``inf`` for zero norm."""
    if norm_1r < 0 or not C1 > 0:
        raise DomainError("need norm >= 0 and C1 > 0")
    if norm_1r == 0:
        return math.inf
    return C1 / norm_1r ** (m - 1)
