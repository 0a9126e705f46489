import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy.special import lambertw

from rnwave.geometry import SpacetimeParams, build_coordinate_map
from rnwave.potentials import PotentialTable

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def schwarzschild_offset(rho):
    """r - 2 solving rho = r - 3 + 2 ln(r - 2) (M = 1), via Lambert W."""
    rho = np.asarray(rho, dtype=float)
    return 2.0 * np.real(lambertw(np.exp((rho + 1.0) / 2.0) / 2.0))


def schwarzschild_r(rho):
    return 2.0 + schwarzschild_offset(rho)


def schwarzschild_V(rho):
    x = schwarzschild_offset(rho)
    return 2.0 * x / (2.0 + x) ** 4


def schwarzschild_VL(rho):
    x = schwarzschild_offset(rho)
    return x / (2.0 + x) ** 3


@pytest.fixture(scope="session")
def schw():
    return SpacetimeParams(1.0, 0.0)


@pytest.fixture(scope="session")
def crit():
    return SpacetimeParams(1.0, 1.0)


@pytest.fixture(scope="session")
def schw_table(schw):
    return PotentialTable.from_map(build_coordinate_map(schw, -50.0, 50.0, 4001))


def gaussian(rho, c=0.0, w=1.0, a=1.0):
    return a * np.exp(-(((rho - c) / w) ** 2))


def gaussian_prime(rho, c=0.0, w=1.0, a=1.0):
    return -2.0 * (rho - c) / w**2 * gaussian(rho, c, w, a)


SQRT_PI = math.sqrt(math.pi)
