import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rnwave.geometry import SpacetimeParams, build_coordinate_map, tortoise_of_r
from rnwave.potentials import (
    GridTooSmallError,
    I_effective,
    PeakError,
    PotentialTable,
    cubic_PQ,
    effective_potential,
    find_peak_radius,
    potential_V,
    potential_V_prime,
    potential_VL,
    potential_VL_prime,
    trapping_envelopes,
    trapping_term_V,
    trapping_term_VL,
)

from conftest import schwarzschild_V, schwarzschild_VL

S = SpacetimeParams(1, 0)
C = SpacetimeParams(1, 1)
GRID_Q = [0.0, 0.5, 0.9, 1.0]


class TestClosedForms:
    def test_V(self):
        assert potential_V(S, 2.0) == 0.0
        assert potential_V(S, 3.0) == pytest.approx(2 / 81, rel=1e-15)
        assert potential_V(C, 1.0) == 0.0

    def test_VL(self):
        assert potential_VL(S, 3.0) == pytest.approx(1 / 27, rel=1e-15)
        assert potential_VL(S, 2.0) == 0.0
        assert potential_VL(S, 1e6) * 1e12 == pytest.approx(1.0, rel=1e-5)

    def test_cubic(self):
        assert cubic_PQ(S, 8 / 3) == pytest.approx(0, abs=1e-13)
        assert cubic_PQ(S, 1.0) == -5.0
        assert cubic_PQ(C, 1.0) == 0.0

    def test_V_prime(self):
        assert potential_V_prime(S, 8 / 3) == pytest.approx(0, abs=1e-15)
        assert potential_V_prime(S, 3.0) == pytest.approx(-2 / 729, rel=1e-14)

    def test_VL_prime(self):
        assert potential_VL_prime(S, 3.0) == 0.0
        assert potential_VL_prime(S, 4.0) == pytest.approx(-1 / 256, rel=1e-15)
        assert potential_VL_prime(C, 2.0) == 0.0

    @pytest.mark.parametrize("fn", [potential_V, potential_VL, potential_V_prime, potential_VL_prime])
    def test_rejects_interior(self, fn):
        with pytest.raises(ValueError):
            fn(S, 1.9)

    def test_against_independent_inversion(self):
        m = build_coordinate_map(S, -30, 30, 601)
        t = PotentialTable.from_map(m)
        assert np.allclose(t.V, schwarzschild_V(m.rho_star), rtol=1e-12, atol=1e-300)
        assert np.allclose(t.V_L, schwarzschild_VL(m.rho_star), rtol=1e-12, atol=1e-300)

    @pytest.mark.parametrize("Q", GRID_Q)
    def test_derivatives_second_order(self, Q):
        p = SpacetimeParams(1, Q)
        errs = []
        for n in (801, 1601):
            t = PotentialTable.from_map(build_coordinate_map(p, -20, 20, n))
            h = t.map.h
            eV = np.max(np.abs((t.V[2:] - t.V[:-2]) / (2 * h) - t.V_prime[1:-1]))
            eL = np.max(np.abs((t.V_L[2:] - t.V_L[:-2]) / (2 * h) - t.V_L_prime[1:-1]))
            errs.append((eV, eL))
        for k in range(2):
            assert math.log2(errs[0][k] / errs[1][k]) >= 1.9


class TestTable:
    def test_invariants(self, schw):
        # V decays like r^-3 on the right, so the 10% rim must lie beyond ~80 M
        t = PotentialTable.from_map(build_coordinate_map(schw, -100, 100, 4001))
        n = t.map.n_points
        outer = np.r_[np.arange(n // 20), np.arange(n - n // 20, n)]
        assert np.max(np.abs(t.V[outer])) < 1e-3 * np.max(np.abs(t.V))
        assert np.all(t.V_L > 0)
        assert abs(t.map.rho_star[np.argmax(t.V_L)]) <= t.map.h

    def test_zero_table(self, schw_table):
        z = PotentialTable.zero(schw_table.map)
        assert z.free and not np.any(z.V_l(3))

    def test_effective_values(self, schw_table):
        ep = effective_potential(S, 2, schw_table)
        assert np.array_equal(ep.values, schw_table.V + 6 * schw_table.V_L)
        assert ep.ltilde_sq == 6


class TestPeaks:
    def test_l0(self):
        r = find_peak_radius(S, 0)
        assert r == pytest.approx(8 / 3, abs=1e-14)
        rho = tortoise_of_r(S, r)
        assert rho == pytest.approx(-1 / 3 + 2 * math.log(2 / 3), abs=1e-12)
        assert rho == pytest.approx(-1.144161, abs=2e-4)

    def test_l1(self):
        assert find_peak_radius(S, 1) == pytest.approx((3 + math.sqrt(73)) / 4, abs=1e-13)
        assert find_peak_radius(S, 1) == pytest.approx(2.886001, abs=1e-6)

    def test_l50(self):
        assert abs(find_peak_radius(S, 50) - 3) < 1e-3

    @pytest.mark.parametrize("Q", GRID_Q)
    def test_unique_sign_change(self, Q):
        p = SpacetimeParams(1, Q)
        r = p.r_plus + np.geomspace(1e-12, 1e3 - p.r_plus, 20000)
        for l in range(101):
            s = np.sign(I_effective(p, l, r))
            s = s[s != 0]
            assert np.count_nonzero(s[1:] != s[:-1]) == 1

    def test_critical_peak_at_2M(self):
        for l in (0, 1, 5):
            assert find_peak_radius(C, l) == pytest.approx(2.0, abs=1e-12)

    @pytest.mark.parametrize("Q", [0.0, 0.5, 0.9])
    def test_peak_migrates_to_zero(self, Q):
        p = SpacetimeParams(1, Q)
        rho = [tortoise_of_r(p, find_peak_radius(p, l)) for l in (0, 1, 2, 5, 10, 50)]
        assert all(a < b for a, b in zip(rho, rho[1:]))
        assert all(abs(a) > abs(b) for a, b in zip(rho, rho[1:]))

    def test_peak_is_maximum(self, schw_table):
        for l in (0, 1, 4):
            ep = effective_potential(S, l, schw_table)
            i = schw_table.map.index_of(ep.peak_rho_star)
            v = ep.values
            assert v[i + 1] - 2 * v[i] + v[i - 1] < 0
            d = np.sign(np.diff(v))
            assert np.count_nonzero(d[1:] != d[:-1]) == 1

    def test_rejects_negative_l(self):
        with pytest.raises(ValueError):
            find_peak_radius(S, -1)

    def test_multiple_changes_detected(self):
        with pytest.raises(PeakError):
            find_peak_radius(S, 0, r_max=2.5)  # window excludes the root

    @given(Q=st.floats(0, 1), l=st.integers(0, 100))
    def test_peak_is_root(self, Q, l):
        p = SpacetimeParams(1, Q)
        r = find_peak_radius(p, l)
        assert p.r_plus < r < 3.0 + 1e-12
        lo, hi = np.nextafter(r, 0), np.nextafter(r, 10)
        assert I_effective(p, l, lo) * I_effective(p, l, hi) <= 0 or abs(I_effective(p, l, r)) < 1e-9


class TestTrapping:
    def test_origin_values(self):
        assert trapping_term_V(S, 0.0) == pytest.approx(4 / 81, rel=1e-13)
        assert trapping_term_VL(S, 0.0) == pytest.approx(2 / 27, rel=1e-13)

    @pytest.mark.parametrize("rho", [100.0, -100.0])
    def test_far_negative(self, rho):
        assert trapping_term_V(S, rho) < 0
        assert trapping_term_VL(S, rho) < 0 or rho < 0

    @pytest.mark.xfail(strict=True, reason="2V_L + rho V_L' is negative for rho < -15.7M when Q = M")
    def test_critical_angular_positive_far_left(self):
        assert trapping_term_VL(C, -100.0) > 0

    @pytest.mark.xfail(strict=True, reason="critical angular trapping term changes sign near rho = -15.7M")
    def test_critical_angular_positive_left_of_minus_ten(self):
        rho = np.linspace(-200, -10.5, 400)
        assert np.all(trapping_term_VL(C, rho) > 0)

    def test_critical_angular_sign_structure(self):
        rho = np.linspace(-200, 200, 4001)
        v = trapping_term_VL(C, rho)
        pos = rho[v > 0]
        assert pos.min() == pytest.approx(-15.7, abs=0.2) and pos.max() == pytest.approx(15.7, abs=0.2)
        assert abs(trapping_term_VL(C, -100.0)) < 1e-4

    @pytest.mark.parametrize("Q", [0.0, 0.5, 0.9])
    def test_far_field_sign(self, Q):
        p = SpacetimeParams(1, Q)
        rho = np.r_[np.linspace(-300, -50, 200), np.linspace(50, 300, 200)]
        assert np.all(trapping_term_V(p, rho) < 0)

    def test_envelopes_schwarzschild(self, schw_table):
        env = trapping_envelopes(S, schw_table)
        lo, hi = env.support_V
        assert lo < 0 < hi and np.isfinite(lo) and np.isfinite(hi)
        assert np.all(env.W >= schw_table.trapping_V)
        pos = schw_table.trapping_V > 0
        assert np.array_equal(env.W[pos], schw_table.trapping_V[pos])
        assert not env.VL_left_unbounded

    def test_envelopes_grid_too_small(self):
        with pytest.raises(GridTooSmallError):
            trapping_envelopes(S, build_coordinate_map(S, -2, 2, 101))

    @pytest.mark.xfail(strict=True, reason="critical angular trapping term is negative at the far left edge")
    def test_critical_support_unbounded(self):
        env = trapping_envelopes(C, build_coordinate_map(C, -50, 50, 2001))
        assert env.VL_left_unbounded and env.support_VL[0] == -np.inf

    def test_critical_support_flag_when_edge_positive(self):
        env = trapping_envelopes(C, build_coordinate_map(C, -10, 50, 2001))
        assert env.VL_left_unbounded and env.support_VL[0] == -np.inf
