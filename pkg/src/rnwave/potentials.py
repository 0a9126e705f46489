"""Potentials of the reduced wave equation and the trapping terms.

V = F F'(r) / r and V_L = F / r^2 enter the per-harmonic operator as
V_l = V + l(l+1) V_L. All rho_*-derivatives are d/drho_* = F d/dr.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import numpy.polynomial.polynomial as npoly

from .geometry import (
    CoordinateMap,
    SpacetimeParams,
    horizon_offset_of_rho_star,
    metric_factor,
    metric_factor_from_offset,
    tortoise_of_r,
)


class PeakError(RuntimeError):
    """The effective potential did not show exactly one exterior maximum."""


class GridTooSmallError(ValueError):
    """A subcritical trapping region reaches the edge of the grid."""


def _check_exterior(params: SpacetimeParams, r):
    r = np.asarray(r, dtype=float)
    if np.any(r < params.r_plus):
        raise ValueError(f"radius inside the outer horizon r_+ = {params.r_plus}")
    return r


def _scalar(a):
    return a if np.ndim(a) else float(a)


# -- closed forms in (r, F); F is passed separately so that tables can supply
# -- a value computed from the horizon offset.

def _V(params, r, F):
    M, Q2 = params.M, params.Q**2
    return F * (2.0 * M / r**2 - 2.0 * Q2 / r**3) / r


def _VL(r, F):
    return F / r**2


def _V_prime(params, r, F):
    return -2.0 * F * cubic_PQ(params, r) / r**7


def _VL_prime(params, r, F):
    M, Q2 = params.M, params.Q**2
    return -2.0 * F / r**3 * (1.0 - 3.0 * M / r + 2.0 * Q2 / r**2)


def potential_V(params: SpacetimeParams, r):
    """V(r) = F dF/dr / r. Zero on the horizon; rejects r < r_+."""
    r = _check_exterior(params, r)
    return _scalar(_V(params, r, metric_factor(params, r)))


def potential_VL(params: SpacetimeParams, r):
    """Angular potential F / r^2."""
    r = _check_exterior(params, r)
    return _scalar(_VL(r, metric_factor(params, r)))


def _about_horizon(params: SpacetimeParams, coeffs, r):
    """Evaluate sum c_k r^k in powers of x = r - r_+.

    A root on a degenerate horizon then has exactly zero low-order
    coefficients instead of cancelling to round-off noise.
    """
    rp = params.r_plus
    n = len(coeffs)
    taylor = [sum(coeffs[j] * math.comb(j, k) * rp ** (j - k) for j in range(k, n)) for k in range(n)]
    return npoly.polyval(np.asarray(r, dtype=float) - rp, taylor)


def cubic_PQ(params: SpacetimeParams, r):
    """3M r^3 - 4(Q^2 + 2M^2) r^2 + 15 M Q^2 r - 6 Q^4."""
    M, Q2 = params.M, params.Q**2
    return _scalar(_about_horizon(params, (-6.0 * Q2 * Q2, 15.0 * M * Q2, -4.0 * (Q2 + 2.0 * M * M), 3.0 * M), r))


def potential_V_prime(params: SpacetimeParams, r):
    """dV/drho_* = -2 F P_Q(r) / r^7."""
    r = _check_exterior(params, r)
    return _scalar(_V_prime(params, r, metric_factor(params, r)))


def potential_VL_prime(params: SpacetimeParams, r):
    """dV_L/drho_* = -2F/r^3 (1 - 3M/r + 2Q^2/r^2); vanishes at the photon sphere."""
    r = _check_exterior(params, r)
    return _scalar(_VL_prime(params, r, metric_factor(params, r)))


def I_potential(params: SpacetimeParams, r):
    """P_Q(r) / r^2."""
    r = np.asarray(r, dtype=float)
    return cubic_PQ(params, r) / r**2


def I_angular(params: SpacetimeParams, r):
    """r^2 - 3Mr + 2Q^2, whose exterior root is the photon sphere."""
    return _about_horizon(params, (2.0 * params.Q**2, -3.0 * params.M, 1.0), r)


def I_effective(params: SpacetimeParams, l: int, r):
    """I + l(l+1) I_L; dV_l/drho_* = -2 F r^-5 I_l, so its sign change marks the peak."""
    return I_potential(params, r) + l * (l + 1) * I_angular(params, r)


@dataclass(frozen=True)
class PotentialTable:
    """V, V_L and their rho_*-derivatives sampled on a coordinate map."""

    map: CoordinateMap
    V: np.ndarray
    V_L: np.ndarray
    V_prime: np.ndarray
    V_L_prime: np.ndarray
    free: bool = False

    @classmethod
    def from_map(cls, cmap: CoordinateMap) -> "PotentialTable":
        p, r, F = cmap.params, cmap.r, cmap.F
        return cls(cmap, _V(p, r, F), _VL(r, F), _V_prime(p, r, F), _VL_prime(p, r, F))

    @classmethod
    def zero(cls, cmap: CoordinateMap) -> "PotentialTable":
        """Identically vanishing potentials (free 1+1 wave equation); a test mode."""
        z = np.zeros_like(cmap.rho_star)
        return cls(cmap, z, z, z, z, free=True)

    def V_l(self, l: int) -> np.ndarray:
        return self.V + l * (l + 1) * self.V_L

    @property
    def trapping_V(self) -> np.ndarray:
        return 2.0 * self.V + self.map.rho_star * self.V_prime

    @property
    def trapping_VL(self) -> np.ndarray:
        return 2.0 * self.V_L + self.map.rho_star * self.V_L_prime


@dataclass(frozen=True)
class EffectivePotential:
    l: int
    ltilde_sq: int
    values: np.ndarray
    peak_r: float
    peak_rho_star: float


def _count_sign_changes(values: np.ndarray) -> np.ndarray:
    s = np.sign(values)
    s = s[s != 0]
    return np.flatnonzero(s[1:] != s[:-1])


def find_peak_radius(params: SpacetimeParams, l: int, r_max: float | None = None,
                     n_samples: int = 4000, tol: float = 0.0) -> float:
    """Unique exterior root of I_l, refined by bisection (to adjacent doubles
    when ``tol`` is 0).

    Samples (r_+, r_max] on offsets geometric from 1e-12 M.
    """
    if l < 0 or int(l) != l:
        raise ValueError("l must be a non-negative integer")
    M = params.M
    r_plus = params.r_plus
    r_max = 1e3 * M if r_max is None else r_max
    r = r_plus + np.geomspace(1e-12 * M, r_max - r_plus, n_samples)
    vals = I_effective(params, l, r)
    changes = _count_sign_changes(vals)
    if changes.size != 1:
        raise PeakError(f"I_l has {changes.size} sign changes for l={l}; expected exactly one")
    nz = vals != 0
    rr, vv = r[nz], vals[nz]
    k = changes[0]
    lo, hi = rr[k], rr[k + 1]
    flo = vv[k]
    while hi - lo > tol * max(1.0, M):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        fm = I_effective(params, l, mid)
        if fm == 0:
            return float(mid)
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return float(0.5 * (lo + hi))


def effective_potential(params: SpacetimeParams, l: int, grid: CoordinateMap | PotentialTable) -> EffectivePotential:
    table = grid if isinstance(grid, PotentialTable) else PotentialTable.from_map(grid)
    peak_r = find_peak_radius(params, l)
    return EffectivePotential(l=l, ltilde_sq=l * (l + 1), values=table.V_l(l),
                              peak_r=peak_r, peak_rho_star=float(tortoise_of_r(params, peak_r)))


def _at_rho_star(params, rho_star):
    x = horizon_offset_of_rho_star(params, np.atleast_1d(np.asarray(rho_star, dtype=float)))
    r = params.r_plus + x
    return r, metric_factor_from_offset(params, x)


def trapping_term_V(params: SpacetimeParams, rho_star):
    """2V + rho_* V' evaluated at r(rho_*)."""
    rho = np.asarray(rho_star, dtype=float)
    r, F = _at_rho_star(params, rho)
    out = 2.0 * _V(params, r, F) + np.atleast_1d(rho) * _V_prime(params, r, F)
    return float(out[0]) if rho.ndim == 0 else out


def trapping_term_VL(params: SpacetimeParams, rho_star):
    """2V_L + rho_* V_L' evaluated at r(rho_*)."""
    rho = np.asarray(rho_star, dtype=float)
    r, F = _at_rho_star(params, rho)
    out = 2.0 * _VL(r, F) + np.atleast_1d(rho) * _VL_prime(params, r, F)
    return float(out[0]) if rho.ndim == 0 else out


@dataclass(frozen=True)
class TrappingEnvelopes:
    W: np.ndarray
    W_L: np.ndarray
    support_V: tuple[float, float]
    support_VL: tuple[float, float]
    VL_left_unbounded: bool


def _support(rho: np.ndarray, values: np.ndarray) -> tuple[tuple[float, float], bool, bool]:
    pos = np.flatnonzero(values > 0)
    if pos.size == 0:
        return (0.0, 0.0), False, False
    i, j = pos[0], pos[-1]
    left_edge = i == 0
    right_edge = j == rho.size - 1
    lo = rho[max(i - 1, 0)]
    hi = rho[min(j + 1, rho.size - 1)]
    return (float(lo), float(hi)), left_edge, right_edge


def trapping_envelopes(params: SpacetimeParams, grid: CoordinateMap | PotentialTable) -> TrappingEnvelopes:
    """Positive parts W, W_L of the trapping terms and the brackets of their supports.

    In the critical regime a positive angular term at the left grid edge is
    reported through ``VL_left_unbounded`` instead of raising.
    """
    table = grid if isinstance(grid, PotentialTable) else PotentialTable.from_map(grid)
    rho = table.map.rho_star
    tV, tVL = table.trapping_V, table.trapping_VL
    W, W_L = np.maximum(tV, 0.0), np.maximum(tVL, 0.0)
    sV, lV, rV = _support(rho, tV)
    sVL, lVL, rVL = _support(rho, tVL)
    if lV or rV or rVL:
        raise GridTooSmallError("trapping region touches the grid edge; enlarge the grid")
    if lVL and not params.critical:
        raise GridTooSmallError("angular trapping region touches the left grid edge")
    if lVL:
        sVL = (-np.inf, sVL[1])
    return TrappingEnvelopes(W, W_L, sV, sVL, VL_left_unbounded=bool(lVL))
