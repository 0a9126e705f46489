"""Post-processing of functional time series: decay fits, conservation and
flux-identity checks, space-time integrals, and the verification report.

Every function accepts either a :class:`~rnwave.functionals.RunSeries` or a
plain mapping of column name to array (as read back from a series CSV).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .functionals import RunSeries

Columns = Mapping[str, np.ndarray]
SeriesLike = Union[RunSeries, Columns]

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"
EDGE_CONTACT_FRACTION = 1e-6
L2_DOMINATION_CONSTANT = 1.0 / 8.0


def as_columns(series: SeriesLike) -> dict[str, np.ndarray]:
    if isinstance(series, RunSeries):
        return series.columns()
    return {k: np.asarray(v, dtype=float) for k, v in series.items()}


class DecayFitError(ValueError):
    """The decay fit is undefined for the given samples."""


@dataclass(frozen=True)
class DecayFit:
    window: tuple[float, float]
    slope: float
    intercept: float
    residual: float
    n_samples: int


def fit_decay_exponent(t, values, window: tuple[float, float] | None = None,
                       min_samples: int = 10) -> DecayFit:
    """Least-squares line through (log t, log value) on ``window`` (default [T/4, T])."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape or t.size == 0:
        raise DecayFitError("t and values must be non-empty and of equal length")
    T = float(t[-1])
    lo, hi = window if window is not None else (T / 4.0, T)
    if lo < t[0] or hi > T or lo >= hi:
        raise DecayFitError(f"window ({lo}, {hi}) is outside the series [{t[0]}, {T}]")
    m = (t >= lo) & (t <= hi)
    if m.sum() < min_samples:
        raise DecayFitError(f"window holds {int(m.sum())} samples; need {min_samples}")
    ym = y[m]
    if not np.all(np.isfinite(ym)):
        raise DecayFitError("non-finite values in the fit window")
    if np.any(ym <= 0):
        raise DecayFitError("decay fit needs strictly positive values")
    X, Y = np.log(t[m]), np.log(ym)
    xc, yc = X - X.mean(), Y - Y.mean()
    slope = float(np.dot(xc, yc) / np.dot(xc, xc))
    intercept = float(Y.mean() - slope * X.mean())
    res = Y - (intercept + slope * X)
    return DecayFit((float(lo), float(hi)), slope, intercept, float(np.sqrt(np.mean(res**2))), int(m.sum()))


@dataclass(frozen=True)
class Check:
    status: str
    measured: float | None = None
    target: str = ""
    tolerance: float | None = None
    detail: str = ""


def pre_contact_count(cols: Columns, fraction: float = EDGE_CONTACT_FRACTION) -> int:
    """Number of leading snapshots before the solution reaches the grid edges.

    Contact is the first snapshot with ``edge_amp > fraction * sup(t0)``.
    Without those columns every snapshot counts.
    """
    n = len(cols["t"])
    if "edge_amp" not in cols or "sup" not in cols:
        return n
    ref = cols["sup"][0]
    hit = np.flatnonzero(cols["edge_amp"] > fraction * ref)
    return int(hit[0]) if hit.size else n


def check_energy_drift(series: SeriesLike, fraction: float = EDGE_CONTACT_FRACTION) -> Check:
    """max |E(t) - E(t0)| / E(t0) over the snapshots before boundary contact."""
    cols = as_columns(series)
    E = cols["E"]
    if E.size < 2:
        return Check(INCONCLUSIVE, detail="fewer than 2 snapshots")
    n = max(pre_contact_count(cols, fraction), 1)
    if E[0] == 0:
        return Check(INCONCLUSIVE, 0.0, detail="zero initial energy")
    drift = float(np.max(np.abs(E[:n] - E[0])) / abs(E[0]))
    return Check(PASS, drift, detail=f"window t <= {cols['t'][n - 1]:.6g}")


def check_conformal_identity(series: SeriesLike, reference: str = "flux",
                             fraction: float = EDGE_CONTACT_FRACTION) -> Check:
    """max over interior snapshots of |centred dE_C/dt - ref| / max(E, |ref|).

    ``reference`` is ``"flux"`` (the growth identity) or ``"explicit"`` (the
    frozen-state time derivative). Only snapshots before boundary contact count.
    """
    col = {"flux": "flux", "explicit": "dEC_explicit"}[reference]
    cols = as_columns(series)
    n = pre_contact_count(cols, fraction)
    t, EC, ref, E = cols["t"][:n], cols["E_C"][:n], cols[col][:n], cols["E"][:n]
    if t.size < 3:
        return Check(INCONCLUSIVE, detail="fewer than 3 snapshots")
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
        raise ValueError("conformal identity check needs a uniform snapshot cadence")
    d = (EC[2:] - EC[:-2]) / (t[2:] - t[:-2])
    scale = np.maximum(E[1:-1], np.abs(ref[1:-1]))
    if np.all(scale == 0):
        return Check(PASS, 0.0, detail="zero state")
    mism = np.abs(d - ref[1:-1]) / np.where(scale > 0, scale, 1.0)
    k = int(np.argmax(mism))
    return Check(PASS, float(mism[k]), detail=f"worst at t = {t[k + 1]:.6g}")


def spacetime_integral(series: SeriesLike, name: str) -> tuple[np.ndarray, float]:
    """Cumulative trapezoid integral in t and the saturation (I(T) - I(T/2)) / I(T)."""
    cols = as_columns(series)
    t, f = cols["t"], cols[name]
    I = cumulative_trapezoid(f, t, initial=0.0)
    T = t[-1]
    if I[-1] == 0:
        return I, 0.0
    half = float(np.interp(T / 2.0, t, I))
    return I, float((I[-1] - half) / I[-1])


# -- report --------------------------------------------------------------------

@dataclass(frozen=True)
class ReportConfig:
    drift_tol: float = 1e-6
    identity_tol: float = 0.01
    positive_form_tol: float = 1e-10
    local_decay_tol: float = 0.1
    angular_tol: float = 0.15
    l6_target: float = -1.0 / 3.0
    l2_target: float = -0.5
    slope_margin: float = 0.05
    angular_p: float = 0.75
    l2_constant: float = L2_DOMINATION_CONSTANT
    enabled: tuple[str, ...] = ()


@dataclass
class VerificationReport:
    checks: dict[str, Check] = field(default_factory=dict)

    def add(self, name: str, check: Check) -> None:
        if name in self.checks:
            raise ValueError(f"duplicate check {name!r}")
        self.checks[name] = check

    @property
    def passed(self) -> bool:
        return all(c.status != FAIL for c in self.checks.values())

    def to_dict(self) -> dict:
        def clean(x):
            if isinstance(x, float) and not math.isfinite(x):
                return repr(x)
            return x

        return {name: {k: clean(v) for k, v in asdict(c).items()} for name, c in self.checks.items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self) -> str:
        lines = []
        for name, c in self.checks.items():
            meas = "-" if c.measured is None else f"{c.measured:.6g}"
            tol = "" if c.tolerance is None else f" tol={c.tolerance:g}"
            tgt = f" target {c.target}" if c.target else ""
            extra = f" ({c.detail})" if c.detail else ""
            lines.append(f"{c.status.upper():12s} {name}: {meas}{tgt}{tol}{extra}")
        return "\n".join(lines) + "\n"


def _first_nan(cols: Columns, names) -> str | None:
    for name in names:
        if name not in cols:
            continue
        bad = np.flatnonzero(~np.isfinite(cols[name]))
        if bad.size:
            i = int(bad[0])
            t = cols["t"][i] if "t" in cols else float("nan")
            return f"non-finite {name} at row {i} (t = {t:.6g})"
    return None


def _bounded(check: Check, tol: float, target: str) -> Check:
    if check.status != PASS:
        return Check(check.status, check.measured, target, tol, check.detail)
    status = PASS if check.measured < tol else FAIL
    return Check(status, check.measured, target, tol, check.detail)


def _guarded(cols, needed, fn) -> Check:
    missing = [c for c in needed if c not in cols]
    if missing:
        return Check(INCONCLUSIVE, detail=f"missing columns {missing}")
    where = _first_nan(cols, needed)
    if where:
        return Check(FAIL, float("nan"), detail=where)
    try:
        return fn()
    except Exception as exc:  # report, never crash
        return Check(INCONCLUSIVE, detail=f"{type(exc).__name__}: {exc}")


def _energy_check(cols, cfg):
    if np.all(cols["E"] == 0):
        return Check(PASS, 0.0, f"< {cfg.drift_tol:g}", cfg.drift_tol, "zero run, trivially conserved")
    return _bounded(check_energy_drift(cols), cfg.drift_tol, f"< {cfg.drift_tol:g}")


def _positive_form_check(cols, cfg):
    EC, pos = cols["E_C"], cols["E_C_pos"]
    if np.any(pos < 0):
        return Check(FAIL, float(pos.min()), ">= 0", None, "negative positive-form charge")
    err = float(np.max(np.abs(EC - pos) / (1.0 + np.abs(EC))))
    return Check(PASS if err <= cfg.positive_form_tol else FAIL, err, "agreement", cfg.positive_form_tol)


def _saturation_check(cols, name, tol):
    if np.all(cols[name] == 0):
        return Check(INCONCLUSIVE, 0.0, f"< {tol:g}", tol, "integrand identically zero")
    _, sat = spacetime_integral(cols, name)
    return Check(PASS if sat < tol else FAIL, sat, f"< {tol:g}", tol)


def _slope_check(cols, name, target, margin):
    bound = target + margin
    try:
        fit = fit_decay_exponent(cols["t"], cols[name])
    except DecayFitError as exc:
        return Check(INCONCLUSIVE, None, f"<= {bound:.6g}", margin, str(exc))
    status = PASS if fit.slope <= bound else FAIL
    return Check(status, fit.slope, f"<= {bound:.6g}", margin,
                 f"window [{fit.window[0]:.6g}, {fit.window[1]:.6g}], rms {fit.residual:.3g}")


def _domination_check(cols, cfg):
    lhs, EC = cols["wL2_conformal"], cols["E_C"]
    if np.all(lhs == 0):
        return Check(PASS, None, f"C = {cfg.l2_constant:g}", None, "zero run")
    ok = cfg.l2_constant * lhs <= EC * (1 + 1e-12)
    pos = lhs > 0
    fitted = float(np.min(EC[pos] / lhs[pos])) if pos.any() else math.inf
    if ok.all():
        return Check(PASS, fitted, f"C = {cfg.l2_constant:g}", None, "measured value is the largest admissible C")
    i = int(np.flatnonzero(~ok)[0])
    return Check(FAIL, fitted, f"C = {cfg.l2_constant:g}", None,
                 f"violated first at t = {cols['t'][i]:.6g}; largest admissible C shown")


def run_checks(cfg: ReportConfig) -> list[tuple[str, tuple[str, ...], object]]:
    p = f"angE_p{cfg.angular_p:g}"
    return [
        ("energy_drift", ("t", "E"), lambda c: _energy_check(c, cfg)),
        ("conformal_positive_form", ("E_C", "E_C_pos"), lambda c: _positive_form_check(c, cfg)),
        ("conformal_flux_identity", ("t", "E", "E_C", "flux"),
         lambda c: _bounded(check_conformal_identity(c), cfg.identity_tol, f"< {cfg.identity_tol:g}")),
        ("weighted_L2_domination", ("t", "E_C", "wL2_conformal"), lambda c: _domination_check(c, cfg)),
        ("local_decay_saturation", ("t", "wL2_beta2"),
         lambda c: _saturation_check(c, "wL2_beta2", cfg.local_decay_tol)),
        ("angular_local_saturation", ("t", p), lambda c: _saturation_check(c, p, cfg.angular_tol)),
        ("weighted_L6_decay", ("t", "wL6"), lambda c: _slope_check(c, "wL6", cfg.l6_target, cfg.slope_margin)),
        ("weighted_L2_beta1_decay", ("t", "wL2_beta1"),
         lambda c: _slope_check(c, "wL2_beta1", cfg.l2_target, cfg.slope_margin)),
    ]


def build_report(series: SeriesLike | None, cfg: ReportConfig | None = None,
                 extra: Mapping[str, Check] | None = None) -> VerificationReport:
    """Evaluate every enabled run check (all when ``cfg.enabled`` is empty).

    ``extra`` adds externally computed checks (static goldens, convergence
    order, reruns) after the run checks, in the given order.
    """
    cfg = cfg or ReportConfig()
    cols = as_columns(series) if series is not None else {}
    report = VerificationReport()
    for name, needed, fn in run_checks(cfg):
        if cfg.enabled and name not in cfg.enabled:
            continue
        if not cols:
            report.add(name, Check(INCONCLUSIVE, detail="no series"))
            continue
        report.add(name, _guarded(cols, needed, lambda: fn(cols)))
    for name, check in (extra or {}).items():
        report.add(name, check)
    return report


def background_checks(params, l_max: int = 2, n_samples: int = 1000) -> dict[str, Check]:
    """Parameter-level checks: tortoise inversion, unique potential peaks, far-field trapping sign."""
    from .geometry import horizon_offset_of_rho_star, tortoise_of_offset
    from .potentials import PeakError, find_peak_radius, trapping_term_V

    out: dict[str, Check] = {}
    rho = np.linspace(-50.0 * params.M, 50.0 * params.M, n_samples)
    back = tortoise_of_offset(params, horizon_offset_of_rho_star(params, rho))
    err = float(np.max(np.abs(back - rho)))
    out["tortoise_round_trip"] = Check(PASS if err <= 1e-9 else FAIL, err, "<= 1e-09", 1e-9)
    try:
        for l in range(l_max + 1):
            find_peak_radius(params, l)
        out["unique_peak"] = Check(PASS, float(l_max), "one sign change of I_l", detail=f"l <= {l_max}")
    except PeakError as exc:
        out["unique_peak"] = Check(FAIL, None, "one sign change of I_l", detail=str(exc))
    if params.critical:
        out["far_trapping_sign"] = Check(INCONCLUSIVE, detail="critical regime")
    else:
        far = np.concatenate([np.linspace(-200.0, -50.0, 301), np.linspace(50.0, 200.0, 301)]) * params.M
        worst = float(np.max(trapping_term_V(params, far)))
        out["far_trapping_sign"] = Check(PASS if worst < 0 else FAIL, worst, "2V + rho V' < 0 for |rho| >= 50M")
    return out
