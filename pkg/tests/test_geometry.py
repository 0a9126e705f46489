import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rnwave.geometry import (
    Regime,
    SpacetimeParams,
    SupercriticalError,
    build_coordinate_map,
    eddington_finkelstein,
    horizon_offset_of_rho_star,
    horizons,
    metric_factor,
    photon_sphere_radius,
    r_of_rho_star,
    tortoise_of_offset,
    tortoise_of_r,
)

from conftest import schwarzschild_r

charges = st.floats(0.0, 1.0)


class TestParams:
    def test_regimes(self):
        assert SpacetimeParams(1, 0).regime is Regime.SUBCRITICAL
        assert SpacetimeParams(1, 1).regime is Regime.CRITICAL
        assert SpacetimeParams(1, 1 - 1e-14).regime is Regime.CRITICAL
        assert SpacetimeParams(1, 1 - 1e-14).Q == 1.0

    @pytest.mark.parametrize("M,Q", [(0, 0), (-1, 0), (math.nan, 0), (1, math.inf)])
    def test_invalid(self, M, Q):
        with pytest.raises(ValueError):
            SpacetimeParams(M, Q)

    def test_supercritical(self):
        with pytest.raises(SupercriticalError, match="supercritical"):
            SpacetimeParams(1, 2)


class TestClosedForms:
    @pytest.mark.parametrize("M,Q,r,F", [(1, 0, 2, 0.0), (1, 0, 3, 1 / 3), (1, 1, 1, 0.0)])
    def test_metric_factor(self, M, Q, r, F):
        assert metric_factor(SpacetimeParams(M, Q), r) == pytest.approx(F, abs=1e-15)

    @pytest.mark.parametrize("Q,expected", [(0, (0, 2)), (1, (1, 1)), (0.6, (0.2, 1.8))])
    def test_horizons(self, Q, expected):
        rm, rp = horizons(SpacetimeParams(1, Q))
        assert (rm, rp) == pytest.approx(expected, abs=1e-15)
        assert metric_factor(SpacetimeParams(1, Q), rp) == pytest.approx(0, abs=1e-15)

    @pytest.mark.parametrize("Q,alpha", [(0, 3), (1, 2), (0.6, (3 + math.sqrt(6.12)) / 2)])
    def test_photon_sphere(self, Q, alpha):
        assert photon_sphere_radius(SpacetimeParams(1, Q)) == pytest.approx(alpha, rel=1e-15)

    def test_photon_sphere_decimal(self):
        assert photon_sphere_radius(SpacetimeParams(1, 0.6)) == pytest.approx(2.73693, abs=1e-5)

    def test_tortoise_values(self):
        s, c = SpacetimeParams(1, 0), SpacetimeParams(1, 1)
        assert tortoise_of_r(s, 3.0) == pytest.approx(0, abs=1e-14)
        assert tortoise_of_r(s, 4.0) == pytest.approx(1 + 2 * math.log(2), abs=1e-13)
        assert tortoise_of_r(c, 3.0) == pytest.approx(1.5 + 2 * math.log(2), abs=1e-13)
        assert tortoise_of_r(c, 2.0) == pytest.approx(0, abs=1e-14)

    @pytest.mark.parametrize("r", [2.0, 1.5])
    def test_tortoise_rejects_horizon_and_interior(self, schw, r):
        with pytest.raises(ValueError):
            tortoise_of_r(schw, r)

    def test_subcritical_formula_against_quadrature(self):
        from scipy.integrate import quad

        p = SpacetimeParams(1, 0.6)
        val, _ = quad(lambda r: 1.0 / metric_factor(p, r), p.alpha, 7.0, epsabs=1e-13, epsrel=1e-13)
        assert tortoise_of_r(p, 7.0) == pytest.approx(val, rel=1e-11)


class TestInverse:
    def test_values(self, schw):
        assert r_of_rho_star(schw, 0.0) == pytest.approx(3.0, abs=1e-12)
        assert r_of_rho_star(schw, 2.386294361119891) == pytest.approx(4.0, abs=1e-9)
        assert r_of_rho_star(schw, -30.0) - 2.0 < 1e-5

    def test_against_lambert_w(self, schw):
        rho = np.linspace(-40, 40, 81)
        assert np.allclose(r_of_rho_star(schw, rho), schwarzschild_r(rho), rtol=1e-13, atol=1e-14)

    @given(Q=charges, u=st.floats(0.0, 1.0))
    def test_round_trip_r(self, Q, u):
        p = SpacetimeParams(1.0, Q)
        r = p.r_plus + 1e-6 + (1e3 - p.r_plus - 1e-6) * u
        assert abs(r_of_rho_star(p, tortoise_of_r(p, r)) - r) <= 1e-9 * r

    @given(Q=charges, rho=st.floats(-700, 700))
    def test_round_trip_rho(self, Q, rho):
        p = SpacetimeParams(1.0, Q)
        x = horizon_offset_of_rho_star(p, np.array([rho]))
        back = tortoise_of_offset(p, x)
        assert abs(back[0] - rho) <= 1e-10 * (1 + abs(rho))

    @pytest.mark.parametrize("Q", [0.0, 1.0])
    def test_far_asymptote(self, Q):
        p = SpacetimeParams(1, Q)
        assert abs(tortoise_of_r(p, 1e6) / 1e6 - 1) < 1e-4

    def test_near_horizon_subcritical(self):
        p = SpacetimeParams(1, 0.5)
        rho = -200.0
        x = horizon_offset_of_rho_star(p, np.array([rho]))[0]
        kappa = (p.r_plus - p.r_minus) / p.r_plus**2
        assert math.log(x / p.M) / rho == pytest.approx(kappa, rel=0.01)

    def test_near_horizon_critical(self, crit):
        # convergence is logarithmic: 5.5% off at -200 M, well inside 1% here
        rho = -2000.0
        x = horizon_offset_of_rho_star(crit, np.array([rho]))[0]
        assert rho * x == pytest.approx(-1.0, rel=0.01)


class TestCoordinateMap:
    def test_reference_map(self, schw):
        m = build_coordinate_map(schw, -50, 50, 1001)
        assert m.r[m.index_of(0.0)] == pytest.approx(3.0, abs=1e-10)
        assert m.rho_star[m.index_of(0.0)] == 0.0
        assert m.alpha_star == 0.0

    def test_critical_left_edge(self, crit):
        m = build_coordinate_map(crit, -50, 50, 1001)
        # M^2/50 = 0.02 is the leading asymptote; the log correction lifts it to 0.0235
        assert m.r[0] - 1.0 == pytest.approx(0.02, rel=0.2)

    @given(Q=charges, lo=st.floats(-300, -1), hi=st.floats(1, 300))
    def test_invariants(self, Q, lo, hi):
        p = SpacetimeParams(1.0, Q)
        m = build_coordinate_map(p, lo, hi, 257)
        assert np.all(np.diff(m.r) >= 0) and np.all(np.diff(m.x) > 0)
        assert np.all(m.r > p.r_plus) or np.all(m.x > 0)
        assert np.all(m.F > 0)
        back = tortoise_of_offset(p, m.x)
        assert np.all(np.abs(back - m.rho_star) <= 1e-10 * (1 + np.abs(m.rho_star)))

    def test_arrays_read_only(self, schw):
        m = build_coordinate_map(schw, -10, 10, 101)
        with pytest.raises(ValueError):
            m.r[0] = 1.0

    def test_dr_drho_is_F(self, schw):
        errs = []
        for n in (401, 801):
            m = build_coordinate_map(schw, -20, 20, n)
            d = (m.r[2:] - m.r[:-2]) / (2 * m.h)
            errs.append(np.max(np.abs(d - m.F[1:-1])))
        assert math.log2(errs[0] / errs[1]) > 1.9

    def test_F_tends_to_one(self, schw):
        m = build_coordinate_map(schw, -10, 1e4, 2001)
        assert 1 - m.F[-1] < 3e-4

    @pytest.mark.parametrize("args", [(0.0, 10.0, 100), (-10.0, 0.0, 100), (-10.0, 10.0, 15)])
    def test_rejects(self, schw, args):
        with pytest.raises(ValueError):
            build_coordinate_map(schw, *args)


class TestEddingtonFinkelstein:
    def test_origin_values(self):
        ef = eddington_finkelstein(1.0, 0.0, 1.0)
        assert ef.s_minus == ef.s_plus == 1.0
        assert ef.S_minus == pytest.approx(-math.exp(-0.25))
        assert ef.S_plus == pytest.approx(math.exp(0.25))

    def test_null_ray(self):
        ef = eddington_finkelstein(5.0, 5.0, 1.0)
        assert ef.s_minus == 0 and ef.S_minus == -1

    def test_product_identity(self):
        ef = eddington_finkelstein(0.0, 0.0, 1.0)
        assert ef.S_minus * ef.S_plus == pytest.approx(-1.0)

    def test_clamp(self):
        ef = eddington_finkelstein(0.0, 1e5, 1.0)
        assert ef.saturated and np.isfinite(ef.S_plus)

    @given(t=st.floats(-100, 100), rho=st.floats(-100, 100))
    def test_signs(self, t, rho):
        ef = eddington_finkelstein(t, rho, 1.0)
        assert ef.S_minus < 0 < ef.S_plus
