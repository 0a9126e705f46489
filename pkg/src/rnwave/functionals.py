"""Densities, charges, weights and norms evaluated on mode snapshots.

Conventions
-----------
Spherical harmonics are unit-normalized, so ``||u||^2 = sum_l int |u_l|^2 drho_*``
and ``|grad_S2 u|^2`` integrates to ``l(l+1)|u_l|^2`` on each mode. Each state
carries a multiplicity ``weight`` that multiplies every quadratic functional;
the L^6 reconstruction ignores it (it uses the m = 0 harmonic only).

Integrals use the trapezoid rule on the uniform rho_* grid. The gradient
term of the energy is the exact integral of the squared slope of the
piecewise-linear interpolant, i.e. sum h ((u_{i+1}-u_i)/h)^2; this is the
quadratic form the three-point Laplacian conserves. The conformal charge and
its flux use nodal centered differences so that its two algebraic forms agree
term by term.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Protocol, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import eval_legendre

from .geometry import SpacetimeParams, tortoise_of_r
from .potentials import PotentialTable, find_peak_radius


class ModeLike(Protocol):
    l: int
    u: np.ndarray
    v: np.ndarray
    t: float
    weight: float


class DegenerateStateError(ValueError):
    """A functional ratio was requested for the zero state."""


def trapezoid(f: np.ndarray, h: float) -> float:
    return float(h * (f.sum() - 0.5 * (f[0] + f[-1])))


def nodal_derivative(u: np.ndarray, h: float) -> np.ndarray:
    return np.gradient(u, h, edge_order=2)


def _ltsq(l: int) -> int:
    return l * (l + 1)


# -- energy ------------------------------------------------------------------

def mode_energy(state: ModeLike, table: PotentialTable) -> float:
    h = table.map.h
    u, v = state.u, state.v
    grad = float(np.sum(np.diff(u) ** 2) / h)
    pot = trapezoid(v * v + table.V_l(state.l) * u * u, h)
    return 0.5 * (grad + pot)


def energy(states: Sequence[ModeLike], table: PotentialTable) -> tuple[float, dict[int, float]]:
    """Total energy and the per-harmonic breakdown (multiplicity-weighted)."""
    per_mode: dict[int, float] = {}
    for s in states:
        per_mode[s.l] = per_mode.get(s.l, 0.0) + s.weight * mode_energy(s, table)
    return float(sum(per_mode.values())), per_mode


def energy_normalized_form(states: Sequence[ModeLike], table: PotentialTable) -> float:
    """Energy rebuilt from u/r with the normalized tetrad and measure F^(1/2) r^2 drho_*.

    The radial term uses cell slopes of u/r, as :func:`energy` does for u, so
    the two agree up to the quadrature error of one integration by parts.
    """
    cmap = table.map
    r, F, h = cmap.r, cmap.F, cmap.h
    r_mid = 0.5 * (r[1:] + r[:-1])
    total = 0.0
    for s in states:
        if table.free:
            grad = np.sum(np.diff(s.u) ** 2) / h
            rest = trapezoid(s.v**2, h)
        else:
            ut = s.u / r
            grad = np.sum((r_mid * np.diff(ut)) ** 2) / h
            rest = trapezoid(s.v**2 + _ltsq(s.l) * F * ut**2, h)
        total += s.weight * 0.5 * (grad + rest)
    return float(total)


# -- conformal charge --------------------------------------------------------

def _conformal_parts(s: ModeLike, table: PotentialTable):
    h = table.map.h
    du = nodal_derivative(s.u, h)
    pot = table.V_l(s.l) * s.u**2
    return du, pot


def conformal_charge(states: Sequence[ModeLike], t: float, table: PotentialTable) -> float:
    """int (t^2 + rho^2) e + 2 t rho p_rho, with p_rho = v u'."""
    rho, h = table.map.rho_star, table.map.h
    total = 0.0
    for s in states:
        du, pot = _conformal_parts(s, table)
        e = 0.5 * (s.v**2 + du**2 + pot)
        dens = (t * t + rho * rho) * e + 2.0 * t * rho * s.v * du
        total += s.weight * trapezoid(dens, h)
    return total


def conformal_charge_positive_form(states: Sequence[ModeLike], t: float, table: PotentialTable) -> float:
    """The same charge written as a sum of non-negative terms."""
    rho, h = table.map.rho_star, table.map.h
    total = 0.0
    for s in states:
        du, pot = _conformal_parts(s, table)
        dens = (0.25 * (t - rho) ** 2 * (s.v - du) ** 2
                + 0.25 * (t + rho) ** 2 * (s.v + du) ** 2
                + 0.5 * (t * t + rho * rho) * pot)
        total += s.weight * trapezoid(dens, h)
    return total


def conformal_flux(states: Sequence[ModeLike], t: float, table: PotentialTable) -> float:
    """Right side of the growth identity: int t (trapV + l(l+1) trapVL) u^2."""
    h = table.map.h
    tV, tVL = table.trapping_V, table.trapping_VL
    total = 0.0
    for s in states:
        total += s.weight * trapezoid(t * (tV + _ltsq(s.l) * tVL) * s.u**2, h)
    return total


def conformal_charge_dt_explicit(states: Sequence[ModeLike], t: float, table: PotentialTable) -> float:
    """d/dt of the conformal charge with the state held fixed: 2t int e + 2 int rho p_rho."""
    rho, h = table.map.rho_star, table.map.h
    total = 0.0
    for s in states:
        du, pot = _conformal_parts(s, table)
        e = 0.5 * (s.v**2 + du**2 + pot)
        total += s.weight * trapezoid(2.0 * t * e + 2.0 * rho * s.v * du, h)
    return total


# -- weighted norms ----------------------------------------------------------

def weighted_L2(states: Sequence[ModeLike], beta: float, table: PotentialTable) -> float:
    """sum_l int (1 + rho^2)^(-beta) |u_l|^2 (a squared norm)."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    rho, h = table.map.rho_star, table.map.h
    w = (1.0 + rho * rho) ** (-beta)
    return sum(s.weight * trapezoid(w * s.u**2, h) for s in states)


def conformal_weighted_L2(states: Sequence[ModeLike], t: float, table: PotentialTable) -> float:
    """<u, (t^2 + rho^2)/(rho^2 + 1) u>, dominated by a multiple of the conformal charge."""
    rho, h = table.map.rho_star, table.map.h
    w = (t * t + rho * rho) / (rho * rho + 1.0)
    return sum(s.weight * trapezoid(w * s.u**2, h) for s in states)


def norm_L2(states: Sequence[ModeLike], table: PotentialTable) -> float:
    """Squared L^2 norm on R x S^2 with measure drho_* domega."""
    h = table.map.h
    return sum(s.weight * trapezoid(s.u**2, h) for s in states)


def norm_L2_tilde(states: Sequence[ModeLike], table: PotentialTable) -> float:
    """Squared L^2 norm of u/r with measure r^2 drho_* domega."""
    h, r = table.map.h, table.map.r
    return sum(s.weight * trapezoid((s.u / r) ** 2 * r**2, h) for s in states)


def _ylm0(l: int, x: np.ndarray) -> np.ndarray:
    return math.sqrt((2 * l + 1) / (4.0 * math.pi)) * eval_legendre(l, x)


def sphere_quadrature_order(l_max: int) -> int:
    """Gauss-Legendre nodes integrating |sum_l u_l Y_l0|^6 exactly (degree 6 l_max)."""
    return 3 * l_max + 1


def weighted_L6(states: Sequence[ModeLike], table: PotentialTable, n_theta: int | None = None) -> float:
    """(int F^3 r^-4 |u|^6 drho_* domega)^(1/6) with u reconstructed from m = 0 harmonics."""
    if not states:
        return 0.0
    cmap = table.map
    l_max = max(s.l for s in states)
    if n_theta is None:
        n_theta = sphere_quadrature_order(l_max)
    elif n_theta < sphere_quadrature_order(l_max):
        warnings.warn(f"{n_theta} angular nodes do not integrate degree {6 * l_max} exactly",
                      RuntimeWarning, stacklevel=2)
    x, wq = np.polynomial.legendre.leggauss(n_theta)
    field_ = np.zeros((n_theta, cmap.n_points))
    for s in states:
        field_ += np.outer(_ylm0(s.l, x), s.u)
    # axisymmetric: the phi integral is exactly 2 pi
    ang = 2.0 * math.pi * (wq @ field_**6)
    radial = cmap.F**3 / cmap.r**4
    if table.free:
        radial = np.ones_like(radial)
    val = trapezoid(radial * ang, cmap.h)
    return float(max(val, 0.0) ** (1.0 / 6.0))


# -- weights -----------------------------------------------------------------

@dataclass(frozen=True)
class WeightSpec:
    """Parameters of one of the multiplier weights or of the cutoff chi_alpha.

    kind is ``"morawetz"`` (centred at the peak of V_l), ``"angular_modulated"``
    (centred at 0, argument scaled by L^m) or ``"chi_alpha"``.
    """

    kind: str
    l: int = 0
    b: float = 0.1
    sigma: float = 2.0
    m: float = 0.5
    center: float = 0.0
    plateau: float = 1.0
    support: float = 2.0

    def __post_init__(self):
        if self.kind not in ("morawetz", "angular_modulated", "chi_alpha"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "chi_alpha":
            if not 0 < self.plateau < self.support:
                raise ValueError("chi_alpha needs 0 < plateau < support")
            return
        if self.sigma <= 1:
            raise ValueError("sigma must exceed 1 for a bounded weight")
        if self.kind == "angular_modulated" and self.sigma < 2:
            raise ValueError("angular modulation uses sigma >= 2")
        if self.kind == "angular_modulated" and not 0 <= self.m <= 0.5:
            raise ValueError("modulation exponent m must lie in [0, 1/2]")
        if self.b <= 0:
            raise ValueError("b must be positive")

    @classmethod
    def morawetz(cls, params: SpacetimeParams, l: int, b: float | None = None,
                 sigma: float = 2.0) -> "WeightSpec":
        b = 0.1 / params.M if b is None else b
        center = float(tortoise_of_r(params, find_peak_radius(params, l)))
        return cls("morawetz", l=l, b=b, sigma=sigma, center=center)

    @classmethod
    def angular_modulated(cls, m: float = 0.5, b: float = 0.1, sigma: float = 2.0, l: int = 0) -> "WeightSpec":
        return cls("angular_modulated", l=l, m=m, b=b, sigma=sigma)

    @classmethod
    def chi_alpha(cls, plateau: float = 1.0, support: float = 2.0) -> "WeightSpec":
        return cls("chi_alpha", plateau=plateau, support=support)

    @property
    def scale(self) -> float:
        if self.kind == "angular_modulated":
            return self.b * (1.0 + _ltsq(self.l)) ** (self.m / 2.0)
        return self.b


def _bounded_antiderivative(y: np.ndarray, sigma: float) -> np.ndarray:
    """int_0^y (1 + |tau|)^(-sigma) dtau, odd in y."""
    a = np.abs(y)
    if sigma == 2.0:
        return y / (1.0 + a)
    return np.sign(y) * (1.0 - (1.0 + a) ** (1.0 - sigma)) / (sigma - 1.0)


def morawetz_weight(spec: WeightSpec, rho_star) -> tuple[np.ndarray, np.ndarray]:
    """The bounded weight g and its rho_*-derivative."""
    if spec.kind == "chi_alpha":
        raise ValueError("chi_alpha is not a Morawetz weight")
    rho = np.asarray(rho_star, dtype=float)
    k = spec.scale
    y = k * (rho - spec.center)
    g = _bounded_antiderivative(y, spec.sigma)
    dg = k * (1.0 + np.abs(y)) ** (-spec.sigma)
    return g, dg


def _smooth_step(s: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for s <= 0, 1 for s >= 1, built from exp(-1/x)."""
    s = np.clip(s, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


def chi_alpha(spec: WeightSpec, rho_star) -> np.ndarray:
    """Smooth cutoff: 1 on [-plateau, plateau], 0 outside [-support, support]."""
    rho = np.abs(np.asarray(rho_star, dtype=float))
    return 1.0 - _smooth_step((rho - spec.plateau) / (spec.support - spec.plateau))


def angular_local_energy(states: Sequence[ModeLike], chi: WeightSpec, p: float, table: PotentialTable) -> float:
    """||L^p chi_alpha u||^2 = sum_l (1 + l(l+1))^p int chi^2 |u_l|^2."""
    if not 0 <= p <= 2:
        raise ValueError("p must lie in [0, 2]")
    c2 = chi_alpha(chi, table.map.rho_star) ** 2
    h = table.map.h
    return sum(s.weight * (1.0 + _ltsq(s.l)) ** p * trapezoid(c2 * s.u**2, h) for s in states)


def radial_local_energy(states: Sequence[ModeLike], table: PotentialTable) -> float:
    """<u', (1 + rho^2)^-1 u'>."""
    rho, h = table.map.rho_star, table.map.h
    w = 1.0 / (1.0 + rho * rho)
    return sum(s.weight * trapezoid(w * nodal_derivative(s.u, h) ** 2, h) for s in states)


def photon_sphere_angular(states: Sequence[ModeLike], chi: WeightSpec, table: PotentialTable) -> float:
    """<u, rho^2 chi L^2 u>: full angular energy with a weight vanishing at rho_* = 0."""
    rho, h = table.map.rho_star, table.map.h
    w = rho * rho * chi_alpha(chi, rho)
    return sum(s.weight * (1.0 + _ltsq(s.l)) * trapezoid(w * s.u**2, h) for s in states)


def modulated_morawetz(states: Sequence[ModeLike], spec: WeightSpec, table: PotentialTable) -> float:
    """<u', L^m/(1 + (L^m rho)^2) u'> + <u, -g V_L' (L^2 - 1) u> for the modulated weight."""
    rho, h = table.map.rho_star, table.map.h
    total = 0.0
    for s in states:
        sp = replace(spec, l=s.l)
        Lm = (1.0 + _ltsq(s.l)) ** (sp.m / 2.0)
        g, _ = morawetz_weight(sp, rho)
        du = nodal_derivative(s.u, h)
        dens = Lm / (1.0 + (Lm * rho) ** 2) * du**2 - g * table.V_L_prime * _ltsq(s.l) * s.u**2
        total += s.weight * trapezoid(dens, h)
    return total


def sobolev_factors(states: Sequence[ModeLike], table: PotentialTable) -> tuple[float, float]:
    """(||F^1/2 u'|| + ||(1+rho^2)^-1/2 u||, ||F^1/2 r^-1 (-Lap)^1/2 u|| + ||F^1/2 r^-1 u||)."""
    cmap = table.map
    rho, h, F, r = cmap.rho_star, cmap.h, cmap.F, cmap.r
    a1 = a2 = b1 = b2 = 0.0
    for s in states:
        du = nodal_derivative(s.u, h)
        a1 += s.weight * trapezoid(F * du**2, h)
        a2 += s.weight * trapezoid(s.u**2 / (1.0 + rho * rho), h)
        q = s.weight * trapezoid(F / r**2 * s.u**2, h)
        b1 += _ltsq(s.l) * q
        b2 += q
    return math.sqrt(a1) + math.sqrt(a2), math.sqrt(b1) + math.sqrt(b2)


def sobolev_ratio(states: Sequence[ModeLike], table: PotentialTable) -> float:
    """||F^1/2 r^-2/3 u||_6 divided by the right side of the weighted Sobolev bound with C = 1."""
    A, B = sobolev_factors(states, table)
    if A == 0.0 or B == 0.0:
        raise DegenerateStateError("Sobolev ratio is undefined for the zero state")
    return weighted_L6(states, table) / (A ** (1.0 / 3.0) * B ** (2.0 / 3.0))


# -- records -----------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:g}"


@dataclass(frozen=True)
class FunctionalSettings:
    betas: tuple[float, ...] = (1.0, 2.0)
    p_list: tuple[float, ...] = (0.75,)
    chi: WeightSpec = field(default_factory=WeightSpec.chi_alpha)
    modulation: WeightSpec = field(default_factory=WeightSpec.angular_modulated)
    n_theta: int | None = None


@dataclass
class FunctionalRecord:
    t: float
    E_total: float
    E_per_mode: dict[int, float]
    E_normalized_form: float
    E_C: float
    E_C_positive_form: float
    conformal_flux: float
    conformal_dt_explicit: float
    weighted_L2: dict[float, float]
    weighted_L6: float
    angular_local: dict[tuple[float, str], float]
    radial_local: float
    photon_sphere_angular: float
    modulated_morawetz: float
    norm_L2: float
    sobolev_lhs: float
    sobolev_rhs_factors: tuple[float, float]
    edge_amplitude: float
    sup_norm: float
    conformal_weighted_L2: float

    def row(self) -> dict[str, float]:
        """Flat column mapping; the leading columns are the documented CSV contract."""
        out: dict[str, float] = {"t": self.t, "E": self.E_total, "E_C": self.E_C, "flux": self.conformal_flux}
        betas = sorted(self.weighted_L2)
        if 2.0 in self.weighted_L2:
            out["wL2_beta2"] = self.weighted_L2[2.0]
        out["wL6"] = self.weighted_L6
        for (p, label) in sorted(self.angular_local):
            out[f"angE_p{_fmt(p)}"] = self.angular_local[(p, label)]
        for b in betas:
            out.setdefault(f"wL2_beta{_fmt(b)}", self.weighted_L2[b])
        out.update({
            "E_norm": self.E_normalized_form,
            "E_C_pos": self.E_C_positive_form,
            "dEC_explicit": self.conformal_dt_explicit,
            "radial_local": self.radial_local,
            "ps_angular": self.photon_sphere_angular,
            "mod_morawetz": self.modulated_morawetz,
            "L2": self.norm_L2,
            "sob_lhs": self.sobolev_lhs,
            "sob_A": self.sobolev_rhs_factors[0],
            "sob_B": self.sobolev_rhs_factors[1],
            "edge_amp": self.edge_amplitude,
            "sup": self.sup_norm,
            "wL2_conformal": self.conformal_weighted_L2,
        })
        for l in sorted(self.E_per_mode):
            out[f"E_l{l}"] = self.E_per_mode[l]
        return out


def edge_amplitude(states: Sequence[ModeLike], cells: int = 10) -> float:
    amp = 0.0
    for s in states:
        amp = max(amp, float(np.max(np.abs(s.u[:cells]))), float(np.max(np.abs(s.u[-cells:]))))
    return amp


def evaluate(states: Sequence[ModeLike], t: float, table: PotentialTable,
             settings: FunctionalSettings | None = None) -> FunctionalRecord:
    settings = settings or FunctionalSettings()
    E, per_mode = energy(states, table)
    L6 = weighted_L6(states, table, settings.n_theta)
    return FunctionalRecord(
        t=t,
        E_total=E,
        E_per_mode=per_mode,
        E_normalized_form=energy_normalized_form(states, table),
        E_C=conformal_charge(states, t, table),
        E_C_positive_form=conformal_charge_positive_form(states, t, table),
        conformal_flux=conformal_flux(states, t, table),
        conformal_dt_explicit=conformal_charge_dt_explicit(states, t, table),
        weighted_L2={b: weighted_L2(states, b, table) for b in settings.betas},
        weighted_L6=L6,
        angular_local={(p, "chi_alpha"): angular_local_energy(states, settings.chi, p, table)
                       for p in settings.p_list},
        radial_local=radial_local_energy(states, table),
        photon_sphere_angular=photon_sphere_angular(states, settings.chi, table),
        modulated_morawetz=modulated_morawetz(states, settings.modulation, table),
        norm_L2=norm_L2(states, table),
        sobolev_lhs=L6,
        sobolev_rhs_factors=sobolev_factors(states, table),
        edge_amplitude=edge_amplitude(states),
        sup_norm=max(float(np.max(np.abs(s.u))) for s in states),
        conformal_weighted_L2=conformal_weighted_L2(states, t, table),
    )


@dataclass
class RunSeries:
    """Snapshots in time order plus column access and cumulative time integrals."""

    records: list[FunctionalRecord] = field(default_factory=list)

    def append(self, record: FunctionalRecord) -> None:
        if self.records and record.t <= self.records[-1].t:
            raise ValueError("snapshots must be appended in increasing time")
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    def columns(self) -> dict[str, np.ndarray]:
        rows = [r.row() for r in self.records]
        if not rows:
            return {}
        return {k: np.array([row.get(k, np.nan) for row in rows]) for k in rows[0]}

    def column(self, name: str) -> np.ndarray:
        return self.columns()[name]

    def cumulative(self, name: str) -> np.ndarray:
        """int_{t0}^t of a column, trapezoid in time."""
        return cumulative_trapezoid(self.column(name), self.times, initial=0.0)


class SeriesRecorder:
    """Observer that evaluates a :class:`FunctionalRecord` at every snapshot."""

    def __init__(self, settings: FunctionalSettings | None = None):
        self.settings = settings or FunctionalSettings()
        self.series = RunSeries()

    def __call__(self, t: float, states: Sequence[ModeLike], table: PotentialTable) -> None:
        self.series.append(evaluate(states, t, table, self.settings))
