"""Static Reissner-Nordstrom exterior: metric factor, horizons, photon sphere,
tortoise coordinate and its inverse, Eddington-Finkelstein coordinates.

Geometric units throughout. The tortoise coordinate is normalized so that the
photon sphere sits at rho_* = 0.

Near the horizon the areal radius is indistinguishable from r_+ in double
precision long before rho_* reaches the edge of a typical grid (for
Schwarzschild, r - 2M ~ exp(rho_*/2M)). Everything here is therefore also
expressed through the horizon offset x = r - r_+, which stays representable
down to rho_* ~ -1400 M.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

CRITICAL_RTOL = 1e-12
EF_EXPONENT_CLAMP = 700.0


class Regime(enum.Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"


class SupercriticalError(ValueError):
    """Raised for |Q| > M, which has no event horizon."""


class BracketError(RuntimeError):
    """Root bracketing for r(rho_*) failed; indicates an internal inconsistency."""


@dataclass(frozen=True)
class SpacetimeParams:
    """Mass and charge of the background.

    ``Q`` is snapped to ``sign(Q) * M`` when ``|Q| = M`` within a relative
    tolerance of 1e-12, so that critical parameters always hit the critical
    closed forms.
    """

    M: float = 1.0
    Q: float = 0.0
    regime: Regime = field(init=False)

    def __post_init__(self):
        M, Q = float(self.M), float(self.Q)
        if not (math.isfinite(M) and M > 0):
            raise ValueError(f"mass must be positive and finite, got M={M}")
        if not math.isfinite(Q):
            raise ValueError(f"charge must be finite, got Q={Q}")
        if abs(abs(Q) - M) <= CRITICAL_RTOL * M:
            Q = math.copysign(M, Q) if Q != 0 else M
            regime = Regime.CRITICAL
        elif abs(Q) > M:
            raise SupercriticalError(f"supercritical parameters |Q|={abs(Q)} > M={M}")
        else:
            regime = Regime.SUBCRITICAL
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "regime", regime)

    @property
    def critical(self) -> bool:
        return self.regime is Regime.CRITICAL

    @property
    def r_plus(self) -> float:
        return horizons(self)[1]

    @property
    def r_minus(self) -> float:
        return horizons(self)[0]

    @property
    def alpha(self) -> float:
        return photon_sphere_radius(self)


def metric_factor(params: SpacetimeParams, r):
    """F(r) = 1 - 2M/r + Q^2/r^2."""
    r = np.asarray(r, dtype=float)
    out = 1.0 - 2.0 * params.M / r + params.Q**2 / r**2
    return out if out.ndim else float(out)


def metric_factor_from_offset(params: SpacetimeParams, x):
    """F written as (r - r_+)(r - r_-)/r^2 with r = r_+ + x; exact sign near the horizon."""
    x = np.asarray(x, dtype=float)
    r_minus, r_plus = horizons(params)
    r = r_plus + x
    out = x * (x + (r_plus - r_minus)) / r**2
    return out if out.ndim else float(out)


def horizons(params: SpacetimeParams) -> tuple[float, float]:
    """Roots r_- <= r_+ of r^2 F."""
    M, Q = params.M, params.Q
    if params.critical:
        return M, M
    disc = M * M - Q * Q
    if disc < 0:
        raise SupercriticalError("supercritical parameters have no horizon")
    s = math.sqrt(disc)
    # r_- = Q^2 / r_+ avoids cancellation for small Q
    r_plus = M + s
    return Q * Q / r_plus, r_plus


def photon_sphere_radius(params: SpacetimeParams) -> float:
    """Exterior critical point of V_L: (3M + sqrt(9M^2 - 8Q^2)) / 2."""
    M, Q = params.M, params.Q
    if abs(Q) > M:
        raise SupercriticalError("supercritical parameters")
    return 0.5 * (3.0 * M + math.sqrt(9.0 * M * M - 8.0 * Q * Q))


def _raw_tortoise_from_offset(params: SpacetimeParams, x):
    """Closed-form r_* with C_* = 0, as a function of x = r - r_+ > 0."""
    M = params.M
    r_minus, r_plus = horizons(params)
    r = r_plus + x
    if params.critical:
        return r + 2.0 * M * np.log(x / M) - M * M / x
    gap = r_plus - r_minus
    out = r + (r_plus**2 / gap) * np.log(x / M)
    if r_minus > 0.0:
        out = out - (r_minus**2 / gap) * np.log((x + gap) / M)
    return out


def _alpha_star_raw(params: SpacetimeParams) -> float:
    return float(_raw_tortoise_from_offset(params, photon_sphere_radius(params) - params.r_plus))


def tortoise_of_offset(params: SpacetimeParams, x):
    """rho_* as a function of the horizon offset x = r - r_+ > 0."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("tortoise coordinate requires r > r_+")
    out = _raw_tortoise_from_offset(params, x) - _alpha_star_raw(params)
    return out if out.ndim else float(out)


def tortoise_of_r(params: SpacetimeParams, r):
    """Normalized tortoise coordinate rho_*(r), with rho_*(alpha) = 0.

    Raises ``ValueError`` for r <= r_+.
    """
    r = np.asarray(r, dtype=float)
    r_plus = params.r_plus
    if np.any(~(r > r_plus)):
        raise ValueError(f"tortoise coordinate requires r > r_+ = {r_plus}")
    return tortoise_of_offset(params, r - r_plus)


def _seed_log_offset(params: SpacetimeParams, rho):
    """Asymptotic guess for y = ln(x/M) given rho_*."""
    M = params.M
    r_minus, r_plus = horizons(params)
    alpha = photon_sphere_radius(params)
    neg = rho < 0
    y = np.empty_like(rho)
    if params.critical:
        # rho_* (r - M) -> -M^2
        y[neg] = np.log(M / np.maximum(-rho[neg], M))
    else:
        kappa = (r_plus - r_minus) / r_plus**2
        y[neg] = math.log((alpha - r_plus) / M) + kappa * rho[neg]
    # r ~ rho_* + alpha far out
    y[~neg] = np.log(np.maximum(rho[~neg] + alpha - r_plus, 1e-3 * M) / M)
    return y


def horizon_offset_of_rho_star(params: SpacetimeParams, rho_star, max_iter: int = 400):
    """Invert rho_*(x) for x = r - r_+ by bracketed bisection in ln(x/M).

    Bisection continues until the bracket collapses to adjacent doubles, so the
    returned x reproduces rho_* to round-off.
    """
    rho = np.atleast_1d(np.asarray(rho_star, dtype=float))
    if not np.all(np.isfinite(rho)):
        raise ValueError("rho_* must be finite")
    M = params.M
    shift = _alpha_star_raw(params)

    def f(y):
        return _raw_tortoise_from_offset(params, M * np.exp(y)) - shift - rho

    seed = _seed_log_offset(params, rho)
    lo, hi = seed - 1.0, seed + 1.0
    step = np.full_like(rho, 2.0)
    for _ in range(64):
        bad_lo = f(lo) > 0
        bad_hi = f(hi) < 0
        if not (bad_lo.any() or bad_hi.any()):
            break
        lo = np.where(bad_lo, lo - step, lo)
        hi = np.where(bad_hi, hi + step, hi)
        step *= 2.0
        # exp(y) overflows/underflows beyond these
        lo = np.maximum(lo, -740.0)
        hi = np.minimum(hi, 700.0)
    else:
        raise BracketError("could not bracket r(rho_*)")
    if np.any(f(lo) > 0) or np.any(f(hi) < 0):
        raise BracketError("could not bracket r(rho_*)")

    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        active = (mid > lo) & (mid < hi)
        if not active.any():
            break
        below = f(mid) < 0
        lo = np.where(active & below, mid, lo)
        hi = np.where(active & ~below, mid, hi)
    # pick the endpoint with the smaller residual
    y = np.where(np.abs(f(lo)) <= np.abs(f(hi)), lo, hi)
    x = M * np.exp(y)
    if np.ndim(rho_star) == 0:
        return float(x[0])
    return x


def r_of_rho_star(params: SpacetimeParams, rho_star):
    """Areal radius r(rho_*) > r_+."""
    x = horizon_offset_of_rho_star(params, rho_star)
    return params.r_plus + x


@dataclass(frozen=True)
class CoordinateMap:
    """Tabulated rho_* <-> r on a uniform rho_* grid.

    ``x`` holds r - r_+ to full relative precision; ``F`` is computed from it,
    so it is strictly positive even where ``r`` has rounded to r_+.
    """

    params: SpacetimeParams
    rho_star: np.ndarray
    h: float
    r: np.ndarray
    x: np.ndarray
    F: np.ndarray
    alpha: float
    alpha_star: float = 0.0

    def __post_init__(self):
        for name in ("rho_star", "r", "x", "F"):
            getattr(self, name).setflags(write=False)

    def __len__(self):
        return self.rho_star.size

    @property
    def n_points(self) -> int:
        return self.rho_star.size

    @property
    def rho_min(self) -> float:
        return float(self.rho_star[0])

    @property
    def rho_max(self) -> float:
        return float(self.rho_star[-1])

    def index_of(self, rho: float) -> int:
        """Grid index nearest to rho."""
        return int(np.clip(round((rho - self.rho_min) / self.h), 0, self.n_points - 1))


def uniform_grid(rho_min: float, rho_max: float, n_points: int) -> tuple[np.ndarray, float]:
    h = (rho_max - rho_min) / (n_points - 1)
    i = np.arange(n_points)
    # anchored at both ends so that rho = 0 is hit exactly when it is a node
    rho = rho_min + i * h
    rho[-1] = rho_max
    k0 = -rho_min / h
    if abs(k0 - round(k0)) < 1e-9:
        rho[int(round(k0))] = 0.0
    return rho, h


def build_coordinate_map(params: SpacetimeParams, rho_min: float, rho_max: float,
                         n_points: int) -> CoordinateMap:
    if not (rho_min < 0.0 < rho_max):
        raise ValueError("grid must satisfy rho_min < 0 < rho_max")
    if n_points < 16:
        raise ValueError("n_points must be at least 16")
    rho, h = uniform_grid(rho_min, rho_max, n_points)
    x = horizon_offset_of_rho_star(params, rho)
    r = params.r_plus + x
    F = metric_factor_from_offset(params, x)
    return CoordinateMap(params=params, rho_star=rho, h=h, r=r, x=x, F=F,
                         alpha=photon_sphere_radius(params))


class EFCoordinates(NamedTuple):
    s_minus: np.ndarray | float
    s_plus: np.ndarray | float
    S_minus: np.ndarray | float
    S_plus: np.ndarray | float
    saturated: bool


def eddington_finkelstein(t, rho_star, M: float) -> EFCoordinates:
    """Null coordinates s_-/+ = t -/+ rho_* and S_- = -exp(-s_-/4M), S_+ = exp(s_+/4M).

    The 4M is kept for every charge (see README). Exponents are clamped at
    +-700; ``saturated`` reports whether the clamp was hit.
    """
    t = np.asarray(t, dtype=float)
    rho = np.asarray(rho_star, dtype=float)
    s_minus = t - rho
    s_plus = t + rho
    a = -s_minus / (4.0 * M)
    b = s_plus / (4.0 * M)
    saturated = bool(np.any(np.abs(a) > EF_EXPONENT_CLAMP) or np.any(np.abs(b) > EF_EXPONENT_CLAMP))
    S_minus = -np.exp(np.clip(a, -EF_EXPONENT_CLAMP, EF_EXPONENT_CLAMP))
    S_plus = np.exp(np.clip(b, -EF_EXPONENT_CLAMP, EF_EXPONENT_CLAMP))
    if s_minus.ndim == 0:
        return EFCoordinates(float(s_minus), float(s_plus), float(S_minus), float(S_plus), saturated)
    return EFCoordinates(s_minus, s_plus, S_minus, S_plus, saturated)
