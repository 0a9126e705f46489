"""Flat ``key = value`` run configuration.

One assignment per line; ``#`` starts a comment. Every problem in the text is
collected and reported together. Keys and defaults:

==================  ===================================  ============================
key                 meaning                              default
==================  ===================================  ============================
M, Q                mass and charge                      1, 0
rho_min, rho_max    grid edges in rho_*                  -100, 2 t_end - t0 + 50
n_points            grid nodes                           from h = 0.05 M
cfl                 dt / h                               0.5
t0, t_end           start and end time                   1, 100
snapshot_interval   observer cadence                     1
modes               ``l:kind:center:width:amp[:mult]``   ``0:time_symmetric_gaussian:10:2:1``
                    separated by commas
free_wave           drop the potentials (test mode)      false
betas               weighted-L2 exponents                1, 2
p_list              angular exponents p                  0.75
chi_plateau         cutoff plateau half-width            1
chi_support         cutoff support half-width            2
modulation_m        modulation exponent m                0.5
morawetz_b          Morawetz scale b (units 1/M)         0.1
morawetz_sigma      Morawetz decay exponent sigma        2
n_theta             sphere quadrature nodes (0 = auto)   0
threads             worker cap (0 = auto)                0
==================  ===================================  ============================
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .evolution import INITIAL_KINDS, EvolutionConfig, ModeSpec, make_initial_data
from .functionals import FunctionalSettings, WeightSpec
from .geometry import SpacetimeParams, SupercriticalError

DEFAULT_H = 0.05
DEFAULT_MODES = "0:time_symmetric_gaussian:10:2:1"


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


@dataclass(frozen=True)
class RunConfig:
    evolution: EvolutionConfig
    settings: FunctionalSettings
    text: str


def _float(s: str) -> float:
    v = float(s)
    if v != v or v in (float("inf"), float("-inf")):
        raise ValueError("not finite")
    return v


def _int(s: str) -> int:
    return int(s)


def _bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true/false")


def _float_list(s: str) -> tuple[float, ...]:
    items = [x for x in s.replace(";", ",").split(",") if x.strip()]
    if not items:
        raise ValueError("empty list")
    return tuple(_float(x) for x in items)


def _modes(s: str) -> tuple[ModeSpec, ...]:
    out = []
    for item in (x.strip() for x in s.replace(";", ",").split(",")):
        if not item:
            continue
        parts = item.split(":")
        if len(parts) not in (5, 6):
            raise ValueError(f"mode {item!r} needs l:kind:center:width:amplitude[:multiplicity]")
        if parts[1] not in INITIAL_KINDS:
            raise ValueError(f"unknown kind {parts[1]!r}; expected one of {', '.join(INITIAL_KINDS)}")
        weight = _float(parts[5]) if len(parts) == 6 else 1.0
        out.append(ModeSpec(_int(parts[0]), parts[1], _float(parts[2]), _float(parts[3]),
                            _float(parts[4]), weight))
    if not out:
        raise ValueError("no modes given")
    return tuple(out)


PARSERS: dict[str, Callable[[str], object]] = {
    "M": _float, "Q": _float, "rho_min": _float, "rho_max": _float, "n_points": _int,
    "cfl": _float, "t0": _float, "t_end": _float, "snapshot_interval": _float,
    "modes": _modes, "free_wave": _bool, "betas": _float_list, "p_list": _float_list,
    "chi_plateau": _float, "chi_support": _float, "modulation_m": _float,
    "morawetz_b": _float, "morawetz_sigma": _float, "n_theta": _int, "threads": _int,
}


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a run configuration; raises :class:`ConfigError`."""
    errors: list[str] = []
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        key, val = (x.strip() for x in line.split("=", 1))
        if key not in PARSERS:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in values:
            errors.append(f"line {lineno}: duplicate key {key!r}")
            continue
        try:
            values[key] = PARSERS[key](val)
        except ValueError as exc:
            errors.append(f"line {lineno}: bad value for {key}: {exc}")

    g = values.get
    params = None
    try:
        params = SpacetimeParams(float(g("M", 1.0)), float(g("Q", 0.0)))
    except SupercriticalError as exc:
        errors.append(str(exc))
    except ValueError as exc:
        errors.append(f"bad spacetime parameters: {exc}")

    t0, t_end = float(g("t0", 1.0)), float(g("t_end", 100.0))
    if t_end < t0:
        errors.append("t_end must not precede t0")
    rho_min = float(g("rho_min", -100.0))
    rho_max = float(g("rho_max", 2.0 * t_end - t0 + 50.0))
    if not rho_min < 0 < rho_max:
        errors.append("grid must satisfy rho_min < 0 < rho_max")
    n_points = int(g("n_points", round((rho_max - rho_min) / DEFAULT_H) + 1))
    if n_points < 16:
        errors.append("n_points must be at least 16")
    cfl = float(g("cfl", 0.5))
    if not 0 < cfl <= 0.9:
        errors.append("cfl must lie in (0, 0.9]")
    interval = float(g("snapshot_interval", 1.0))
    if interval <= 0:
        errors.append("snapshot_interval must be positive")
    if g("n_theta", 0) < 0:
        errors.append("n_theta must be >= 0")
    if g("threads", 0) < 0:
        errors.append("threads must be >= 0")
    betas = g("betas", (1.0, 2.0))
    if any(b <= 0 for b in betas):
        errors.append("betas must be positive")
    p_list = g("p_list", (0.75,))
    if any(not 0 <= p <= 2 for p in p_list):
        errors.append("p values must lie in [0, 2]")
    modes = g("modes") or _modes(DEFAULT_MODES)

    settings = None
    try:
        settings = FunctionalSettings(
            betas=tuple(betas), p_list=tuple(p_list),
            chi=WeightSpec.chi_alpha(float(g("chi_plateau", 1.0)), float(g("chi_support", 2.0))),
            modulation=WeightSpec.angular_modulated(float(g("modulation_m", 0.5)),
                                                    float(g("morawetz_b", 0.1)),
                                                    float(g("morawetz_sigma", 2.0))),
            n_theta=int(g("n_theta", 0)) or None,
        )
    except ValueError as exc:
        errors.append(f"functional settings: {exc}")

    evo = None
    if not errors:
        h = (rho_max - rho_min) / (n_points - 1)
        rho = rho_min + h * np.arange(n_points)
        for i, m in enumerate(modes):
            try:
                make_initial_data(rho, m.kind, m.center, m.width, m.amplitude, m.l)
            except ValueError as exc:
                errors.append(f"mode {i}: {exc}")
        if not errors:
            evo = EvolutionConfig(params, rho_min, rho_max, n_points, modes, t_end=t_end, t0=t0,
                                  cfl=cfl, snapshot_interval=interval,
                                  free_wave=bool(g("free_wave", False)), threads=int(g("threads", 0)))
    if errors:
        raise ConfigError(errors)
    return RunConfig(evo, settings, text)
