"""Wave equation on Schwarzschild / Reissner-Nordstrom exteriors: evolution,
conserved and monitored functionals, and decay diagnostics."""

from .geometry import (
    CoordinateMap,
    Regime,
    SpacetimeParams,
    SupercriticalError,
    build_coordinate_map,
    eddington_finkelstein,
    horizons,
    metric_factor,
    photon_sphere_radius,
    r_of_rho_star,
    tortoise_of_offset,
    tortoise_of_r,
)

from .potentials import PotentialTable, find_peak_radius
from .evolution import EvolutionConfig, ModeSpec, ModeState, evolve, make_initial_data
from .functionals import FunctionalSettings, RunSeries, WeightSpec
from .analysis import build_report, fit_decay_exponent

__version__ = "0.1.0"
