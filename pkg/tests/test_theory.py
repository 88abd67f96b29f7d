import math

import numpy as np
import pytest

from epimix.model import NoiseBound, from_peak_form, mixture_series
from epimix.theory import (
    BoundsDomainError,
    BoundsInput,
    check_theorem31,
    delta_star,
    estimate_brackets,
    midpoint_separation_equal,
    midpoint_separation_unequal,
    ratio_st_lower_midpoint_equal,
    ratio_st_upper_equal,
    ratio_to_time,
    s_argmax_grid,
    separation_threshold,
)
from epimix.transform import case_ratio, s_transform

from instances import midpoint_instance


def synthetic_input(C2=170.0, delta=0.0, **kw):
    args = dict(a1=0.0005, a2=0.0005, C1=50.0, C2=C2, M1=250000.0, M2=300000.0, a_lower=0.0005, M_upper=300000.0, epsilon=13000.0)
    args.update(kw)
    return BoundsInput(**args, noise=NoiseBound(delta))


class TestSeparationThreshold:
    def test_zero_when_epsilon_equals_height(self):
        assert separation_threshold(0.01, 5.0, 5.0) == 0.0

    def test_worked_example_both_bases(self):
        assert separation_threshold(0.0005, 300000, 13000) == pytest.approx(2 * math.sqrt(2000 * math.log(300000 / 13000)))
        assert separation_threshold(0.0005, 300000, 13000) == pytest.approx(158.46, abs=0.01)
        assert separation_threshold(0.0005, 300000, 13000, math.log10) == pytest.approx(104.43, abs=0.01)

    @pytest.mark.parametrize("args", [(0.0, 1.0, 0.5), (0.1, 1.0, 0.0), (0.1, 1.0, 2.0)])
    def test_domain(self, args):
        with pytest.raises(BoundsDomainError):
            separation_threshold(*args)


class TestDeltaStar:
    def test_coincident_peaks(self):
        assert delta_star(synthetic_input(C2=50.0)) == 0.0

    def test_nondecreasing_in_separation(self):
        values = [delta_star(synthetic_input(C2=50.0 + s)) for s in np.linspace(0, 400, 50)]
        assert all(y >= x for x, y in zip(values, values[1:]))
        assert values[-1] <= 0.25

    def test_range(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            value = delta_star(synthetic_input(C2=50.0 + rng.uniform(0, 5000), epsilon=rng.uniform(1, 240000)))
            assert 0.0 <= value <= 0.25

    def test_worked_example_magnitude(self):
        value = delta_star(synthetic_input(C2=156.0))
        assert 5e-5 <= value <= 5e-4

    def test_unequal_curvatures_rejected(self):
        with pytest.raises(BoundsDomainError):
            delta_star(synthetic_input(a2=0.0006))

    def test_epsilon_too_large(self):
        with pytest.raises(BoundsDomainError):
            delta_star(synthetic_input(epsilon=260000.0, M_upper=300000.0))

    def test_huge_separation_uses_limit(self):
        value = delta_star(synthetic_input(C2=1e6))
        w = 13000.0 / (250000.0 - 13000.0)
        assert value == pytest.approx(min(((0.25 / w) ** 0.2 - 1) / 4, 0.25))


class TestStBounds:
    def test_upper_dominant_limit(self):
        assert ratio_st_upper_equal(0.01, 30.0, 0.0, 0.0) == pytest.approx(-0.02)

    def test_lower_at_zero_separation(self):
        assert ratio_st_lower_midpoint_equal(0.01, 0.0, 0.0) == pytest.approx(-0.02)

    def test_upper_bound_holds_where_one_component_dominates(self):
        rng = np.random.default_rng(8)
        eps = 0.05
        for _ in range(20):
            a = rng.uniform(0.002, 0.05)
            sep = rng.uniform(10.0, 80.0)
            c1, c2 = from_peak_form(rng.uniform(1e3, 1e6), 40.0, a), from_peak_form(rng.uniform(1e3, 1e6), 40.0 + sep, a)
            st = s_transform(mixture_series((c1, c2), 0, int(80 + sep)))
            R = case_ratio(c1, c2, st.t)
            mask = (R <= eps) | (R >= 1 / eps)
            assert mask.any()
            bound = ratio_st_upper_equal(a, sep, 0.0, eps)
            assert np.all(st.values[mask] <= bound + 1e-9)

    def test_lower_bound_at_ratio_one(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            a, sep = rng.uniform(0.002, 0.05), rng.uniform(5.0, 80.0)
            c1, c2 = from_peak_form(1e4, 40.0, a), from_peak_form(1e4, 40.0 + sep, a)
            from epimix.transform import st_from_ratio

            assert st_from_ratio(c1, c2, 40.0 + sep / 2) >= ratio_st_lower_midpoint_equal(a, sep, 0.0) - 1e-12

    def test_equal_ratio_point_meets_lower_bound_exactly(self):
        from epimix.transform import st_from_ratio

        a, sep = 0.01, 40.0
        c1, c2 = from_peak_form(1e4, 40.0, a), from_peak_form(1e4, 40.0 + sep, a)
        assert st_from_ratio(c1, c2, 40.0 + sep / 2) == pytest.approx(ratio_st_lower_midpoint_equal(a, sep, 0.0), abs=1e-12)

    def test_lower_exceeds_upper_above_midpoint_separation(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            a, eps = rng.uniform(0.001, 0.1), rng.uniform(0.0, 0.2)
            sep = midpoint_separation_equal(a, 0.0, eps) * rng.uniform(1.01, 3.0)
            assert ratio_st_lower_midpoint_equal(a, sep, 0.0) > ratio_st_upper_equal(a, sep, 0.0, eps)

    def test_noise_bound_range(self):
        with pytest.raises(BoundsDomainError):
            ratio_st_upper_equal(0.01, 1.0, 1.0, 0.1)


class TestMidpointSeparation:
    def test_noiseless_limit(self):
        assert midpoint_separation_equal(0.01, 0.0, 0.0) == pytest.approx(math.log(2) / 0.02)

    def test_increasing_in_eps(self):
        values = [midpoint_separation_equal(0.01, 0.0, e) for e in np.linspace(0, 0.24, 30)]
        assert all(y > x for x, y in zip(values, values[1:]))

    def test_cap(self):
        with pytest.raises(BoundsDomainError):
            midpoint_separation_equal(0.01, 0.0, 0.3)
        with pytest.raises(BoundsDomainError):
            midpoint_separation_equal(0.01, 0.1, 0.2)

    def test_noiseless_argmax_is_balanced(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            c1, c2 = midpoint_instance(rng, eps=0.05)
            assert 0.05 <= case_ratio(c1, c2, s_argmax_grid(c1, c2)) <= 20


class TestMidpointSeparationUnequal:
    def test_limit_is_twice_the_equal_threshold(self):
        a = 0.01
        value = midpoint_separation_unequal(a, a * (1 + 1e-8), 1e4, 1e4, 0.0, 0.0)
        assert value == pytest.approx(math.log(2) / a, rel=1e-6)
        assert value == pytest.approx(2 * midpoint_separation_equal(a, 0.0, 0.0), rel=1e-6)

    def test_increasing_in_eps(self):
        values = [midpoint_separation_unequal(0.01, 0.02, 1e4, 2e4, 0.0, e) for e in np.linspace(0, 0.06, 20)]
        assert all(y > x for x, y in zip(values, values[1:]))

    def test_noiseless_argmax_is_balanced(self):
        rng = np.random.default_rng(13)
        eps, checked = 0.05, 0
        while checked < 20:
            a1 = rng.uniform(0.002, 0.05)
            a2 = a1 * rng.uniform(0.5, 2.0)
            M1, M2 = rng.uniform(1e3, 1e6, 2)
            try:
                need = midpoint_separation_unequal(a1, a2, M1, M2, 0.0, eps)
            except BoundsDomainError:
                continue
            sep = rng.uniform(need, 1.5 * need)
            c1, c2 = from_peak_form(M1, 40.0, a1), from_peak_form(M2, 40.0 + sep, a2)
            assert eps <= case_ratio(c1, c2, s_argmax_grid(c1, c2)) <= 1 / eps
            checked += 1

    def test_errors(self):
        with pytest.raises(BoundsDomainError):
            midpoint_separation_unequal(0.01, 0.01, 1, 1, 0.0, 0.0)
        with pytest.raises(BoundsDomainError):
            midpoint_separation_unequal(0.01, 0.02, 1, 1, 0.0, 0.1)
        with pytest.raises(BoundsDomainError, match="not expressible"):
            midpoint_separation_unequal(0.01, 0.02, 1e-30, 1.0, 0.0, 0.0)


class TestRatioToTime:
    def test_round_trip(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            c1 = from_peak_form(rng.uniform(1e3, 1e5), rng.uniform(0, 50), rng.uniform(0.001, 0.01))
            c2 = from_peak_form(rng.uniform(1e3, 1e5), rng.uniform(60, 120), rng.uniform(0.011, 0.02))
            t0 = rng.uniform(40, 100)
            R = case_ratio(c1, c2, t0)
            roots = ratio_to_time(c1, c2, R)
            assert min(abs(r - t0) for r in roots) <= 1e-6
            for r in roots:
                assert case_ratio(c1, c2, r) == pytest.approx(R, rel=1e-9)

    def test_equal_curvatures_rejected(self):
        with pytest.raises(BoundsDomainError):
            ratio_to_time(from_peak_form(1, 0, 0.1), from_peak_form(1, 5, 0.1), 1.0)

    def test_unreachable_ratio(self):
        c1, c2 = from_peak_form(1.0, 0.0, 0.1), from_peak_form(1.0, 0.0, 0.2)
        with pytest.raises(BoundsDomainError):
            ratio_to_time(c1, c2, 10.0)


class TestCheckTheorem31:
    def test_synthetic_fails_natural_log_only(self):
        report = check_theorem31(synthetic_input(), (0, 199))
        assert not report.assumptions_hold["temporal_separation"]
        assert report.separation_required_log10 <= report.separation_actual < report.separation_required
        assert any("base-10" in note for note in report.notes)
        assert {k for k, v in report.assumptions_hold.items() if not v} == {"temporal_separation"}

    def test_noise_above_delta_star(self):
        dstar = delta_star(synthetic_input(C2=220.0))
        report = check_theorem31(synthetic_input(C2=220.0, delta=1.5 * dstar), (0, 300))
        assert not report.assumptions_hold["noise_within_delta_star"]

    def test_passing_instance_has_finite_brackets(self):
        dstar = delta_star(synthetic_input(C2=220.0))
        report = check_theorem31(synthetic_input(C2=220.0, delta=0.5 * dstar), (0, 300))
        assert report.all_hold
        assert all(0 < r < math.inf for r in report.c_hat_bounds)
        for lo, hi in report.m_hat_bounds:
            assert 0 < lo < hi

    def test_unequal_curvatures_noted(self):
        report = check_theorem31(synthetic_input(C2=260.0, a2=0.0006), (0, 300))
        assert report.delta_star is None
        assert not report.assumptions_hold["noise_within_delta_star"]
        assert report.to_dict()["delta_star"] is None

    def test_peaks_outside_range(self):
        assert not check_theorem31(synthetic_input(C2=220.0), (0, 100)).assumptions_hold["peaks_observed"]

    def test_unordered_peaks_rejected(self):
        with pytest.raises(BoundsDomainError):
            synthetic_input(C2=10.0)


def test_estimate_brackets_undefined_radius():
    lo, hi, radius = estimate_brackets(100.0, 10.0, 0.1, 200.0, 0.0)
    assert math.isnan(radius)
    assert lo == pytest.approx(100.0) and hi == pytest.approx(300.0)


def test_s_argmax_grid_on_symmetric_pair():
    c1, c2 = from_peak_form(1e4, 40.0, 0.01), from_peak_form(1e4, 100.0, 0.01)
    assert s_argmax_grid(c1, c2) == 70
