import json
import math

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epimix.model import (
    MIXTURE_SCHEMA,
    CaseSeries,
    Component,
    Mixture,
    NoiseBound,
    eval_component,
    from_peak_form,
    mixture_series,
    safe_exp,
    to_peak_form,
)

from instances import SYNTHETIC


class TestEvalComponent:
    def test_first_synthetic_peak(self):
        comp = Component(0.0005, 2 * 50 * 0.0005, math.log(250000) - 50**2 * 0.0005)
        assert eval_component(comp, 50) == pytest.approx(250000, rel=1e-12)

    def test_unit_gaussian_at_origin(self):
        assert eval_component(Component(1.0, 0.0, 0.0), 0.0) == 1.0

    def test_second_synthetic_peak(self):
        assert eval_component(from_peak_form(300000, 170, 0.0007), 170) == pytest.approx(300000, rel=1e-12)

    def test_far_tail_underflows_to_zero(self):
        assert eval_component(Component(1.0, 0.0, 0.0), 1e4) == 0.0

    def test_vectorized(self):
        comp = SYNTHETIC[0]
        t = np.arange(10.0)
        assert np.array_equal(comp(t), np.array([comp(x) for x in t]))


class TestPeakForm:
    def test_inversion(self):
        M, C, a = to_peak_form(Component(0.0005, 0.05, math.log(250000) - 1.25))
        assert (M, C, a) == pytest.approx((250000, 50, 0.0005), rel=1e-12)

    def test_unit(self):
        assert to_peak_form(Component(1.0, 0.0, 0.0)) == (1.0, 0.0, 1.0)
        comp = from_peak_form(1.0, 0.0, 1.0)
        assert (comp.a, comp.b, comp.c) == (1.0, 0.0, 0.0)

    def test_overflowing_height_raises(self):
        with pytest.raises(OverflowError):
            to_peak_form(Component(1e-6, 1.0, 0.0))

    @pytest.mark.parametrize("M,a", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, -2.0)])
    def test_invalid_peak_form(self, M, a):
        with pytest.raises(ValueError):
            from_peak_form(M, 0.0, a)

    @settings(max_examples=200, deadline=None)
    @given(
        M=st.floats(1e-3, 1e8),
        C=st.floats(-500, 500),
        a=st.floats(1e-5, 10),
    )
    def test_round_trip(self, M, C, a):
        M2, C2, a2 = to_peak_form(from_peak_form(M, C, a))
        assert a2 == a
        assert C2 == pytest.approx(C, rel=1e-9, abs=1e-9)
        assert M2 == pytest.approx(M, rel=1e-9 * max(1.0, a * C * C))


class TestComponentValidation:
    @pytest.mark.parametrize("a", [0.0, -1.0, math.nan, math.inf])
    def test_bad_curvature(self, a):
        with pytest.raises(ValueError):
            Component(a, 0.0, 0.0)

    def test_nonfinite_coefficient(self):
        with pytest.raises(ValueError):
            Component(1.0, math.inf, 0.0)

    def test_frozen(self):
        comp = Component(1.0, 0.0, 0.0)
        with pytest.raises(AttributeError):
            comp.a = 2.0


def test_safe_exp_saturates_and_raises():
    assert safe_exp(-1e4) == 0.0
    with pytest.raises(OverflowError):
        safe_exp(701.0)


class TestCaseSeries:
    def test_days(self):
        s = CaseSeries(5, [1.0, 2.0, 3.0])
        assert list(s.t) == [5.0, 6.0, 7.0]
        assert s.t_end == 7
        assert len(s) == 3

    @pytest.mark.parametrize("values", [[1.0, 2.0], [1.0, 0.0, 2.0], [1.0, -1.0, 2.0], [1.0, math.nan, 2.0]])
    def test_rejects(self, values):
        with pytest.raises(ValueError):
            CaseSeries(0, values)

    def test_values_read_only(self):
        s = CaseSeries(0, [1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            s.values[0] = 5.0

    def test_window(self):
        s = CaseSeries(10, np.arange(1.0, 11.0))
        w = s.window(12, 15)
        assert w.t0 == 12
        assert list(w.values) == [3.0, 4.0, 5.0, 6.0]
        with pytest.raises(ValueError):
            s.window(8, 15)


def test_noise_bound_range():
    NoiseBound(0.0)
    for bad in (-0.1, 1.0):
        with pytest.raises(ValueError):
            NoiseBound(bad)


class TestMixture:
    def test_sorted_by_peak_time(self):
        mix = Mixture(SYNTHETIC[::-1])
        assert [c.peak_time for c in mix.components] == pytest.approx([50, 170])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            Mixture(())

    def test_sum(self):
        mix = Mixture(SYNTHETIC)
        t = np.array([0.0, 50.0, 170.0])
        assert np.allclose(mix(t), SYNTHETIC[0](t) + SYNTHETIC[1](t), rtol=1e-14)
        assert isinstance(mix(50.0), float)

    def test_scores_on_exact_series(self):
        series = mixture_series(SYNTHETIC, 0, 200)
        mix = Mixture(SYNTHETIC).with_scores(series)
        assert mix.loss == 0.0
        assert mix.r_squared == 1.0

    def test_json_round_trip_and_schema(self):
        series = mixture_series(SYNTHETIC, 0, 200, np.full(200, 0.01))
        mix = Mixture(SYNTHETIC).with_scores(series, bic=12.5)
        data = json.loads(mix.to_json())
        jsonschema.validate(data, MIXTURE_SCHEMA)
        assert data["r"] == 2
        assert data["components"][0]["peak_height"] == pytest.approx(250000)
        back = Mixture.from_json(mix.to_json())
        assert back == mix

    def test_unscored_serializes_null(self):
        data = Mixture(SYNTHETIC).to_dict()
        assert data["loss"] is None and data["bic"] is None
        jsonschema.validate(data, MIXTURE_SCHEMA)
        assert math.isnan(Mixture.from_dict(data).loss)

    @pytest.mark.parametrize(
        "text",
        ["not json", "[]", '{"components": [{"a": 1}]}', '{"r": 3, "components": [{"a": 1, "b": 0, "c": 0}]}'],
    )
    def test_malformed_json(self, text):
        with pytest.raises(ValueError):
            Mixture.from_json(text)


def test_mixture_series_noise():
    base = mixture_series(SYNTHETIC, 0, 5)
    noisy = mixture_series(SYNTHETIC, 0, 5, np.full(5, 0.1))
    assert np.allclose(noisy.values, 1.1 * base.values)
