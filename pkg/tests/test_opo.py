import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from cvtele.errors import InvalidParameter
from cvtele.opo import (
    OpoParams,
    SqueezeLevels,
    effective_r,
    jitter_average,
    jitter_average_mc,
    pump_ratio_from_gain,
    squeezing_spectrum,
)

# frozen from a standalone evaluation of the closed form (G=9, eta=0.89)
S_MINUS_G9 = 0.14560000000000006
S_PLUS_G9 = 22.36000000000001
S_MINUS_G9_JITTER_1DEG = 0.15236620613349997
SIDEBAND_DELTA_DB_G9 = 0.1402615675926517


def _gain_oracle(gain):
    return brentq(lambda x: 1 / (1 - x) ** 2 - gain, 0.0, 1 - 1e-12, xtol=1e-15)


class TestPumpRatio:
    def test_no_pump(self):
        assert pump_ratio_from_gain(1.0) == 0.0

    @pytest.mark.parametrize("gain", [9.0, 4.0, 11.2, 18.7])
    def test_matches_root_finder(self, gain):
        assert pump_ratio_from_gain(gain) == pytest.approx(_gain_oracle(gain), abs=1e-12)

    def test_known_values(self):
        assert pump_ratio_from_gain(9.0) == pytest.approx(2 / 3, abs=1e-15)
        assert pump_ratio_from_gain(4.0) == 0.5

    def test_below_one(self):
        with pytest.raises(InvalidParameter):
            pump_ratio_from_gain(0.9)


class TestSpectrum:
    def test_no_pump_is_vacuum(self):
        lv = squeezing_spectrum(OpoParams(1.0))
        assert lv.squeezed == 1.0 and lv.antisqueezed == 1.0

    def test_ninefold_gain_at_dc(self):
        lv = squeezing_spectrum(OpoParams(9.0, efficiency=0.89))
        assert lv.squeezed == pytest.approx(S_MINUS_G9, rel=1e-12)
        assert lv.antisqueezed == pytest.approx(S_PLUS_G9, rel=1e-12)
        assert lv.squeezed_db == pytest.approx(-8.37, abs=5e-3)
        assert lv.antisqueezed_db == pytest.approx(13.49, abs=5e-3)

    def test_sideband_degradation(self):
        dc = squeezing_spectrum(OpoParams(9.0, efficiency=0.89))
        side = squeezing_spectrum(OpoParams(9.0, efficiency=0.89, sideband_freq=1.25, cavity_bandwidth=10.0))
        assert side.squeezed_db - dc.squeezed_db == pytest.approx(SIDEBAND_DELTA_DB_G9, abs=1e-9)

    def test_with_jitter_flag(self):
        p = OpoParams(9.0, efficiency=0.89, jitter_rms=1.0)
        assert squeezing_spectrum(p, with_jitter=True).squeezed == pytest.approx(S_MINUS_G9_JITTER_1DEG, rel=1e-12)

    @pytest.mark.parametrize(
        "kwargs",
        [dict(parametric_gain=0.5), dict(parametric_gain=2, efficiency=1.2),
         dict(parametric_gain=2, jitter_rms=-1), dict(parametric_gain=2, cavity_bandwidth=0.0),
         dict(parametric_gain=2, sideband_freq=-1.0)],
    )
    def test_invalid_params(self, kwargs):
        with pytest.raises(InvalidParameter):
            OpoParams(**kwargs)

    @settings(max_examples=200, deadline=None)
    @given(gain=st.floats(1.0, 500.0), freq=st.floats(0.0, 50.0), bw=st.floats(0.5, 50.0))
    def test_pure_state_without_loss(self, gain, freq, bw):
        lv = squeezing_spectrum(OpoParams(gain, 1.0, 0.0, freq, bw))
        assert lv.squeezed * lv.antisqueezed == pytest.approx(1.0, abs=1e-9)

    @settings(max_examples=200, deadline=None)
    @given(gain=st.floats(1.0, 500.0), eta=st.floats(0.0, 1.0), freq=st.floats(0.0, 50.0))
    def test_ordering(self, gain, eta, freq):
        lv = squeezing_spectrum(OpoParams(gain, eta, 0.0, freq, 10.0))
        assert 0 < lv.squeezed <= 1.0 <= lv.antisqueezed

    @settings(max_examples=100, deadline=None)
    @given(gain=st.floats(1.5, 100.0), eta=st.floats(0.05, 1.0), f1=st.floats(0.0, 30.0), df=st.floats(0.01, 10.0))
    def test_monotone_in_frequency(self, gain, eta, f1, df):
        a = squeezing_spectrum(OpoParams(gain, eta, 0.0, f1, 10.0))
        b = squeezing_spectrum(OpoParams(gain, eta, 0.0, f1 + df, 10.0))
        assert b.squeezed > a.squeezed

    @settings(max_examples=100, deadline=None)
    @given(gain=st.floats(1.5, 100.0), eta=st.floats(0.05, 0.95), d_eta=st.floats(0.01, 0.05))
    def test_monotone_in_loss(self, gain, eta, d_eta):
        a = squeezing_spectrum(OpoParams(gain, eta + d_eta))
        b = squeezing_spectrum(OpoParams(gain, eta))
        assert b.squeezed > a.squeezed


class TestJitter:
    def test_zero_is_identity(self):
        lv = SqueezeLevels(0.1456, 22.36)
        out = jitter_average(lv, 0.0)
        assert out.squeezed == lv.squeezed and out.antisqueezed == lv.antisqueezed

    def test_one_degree(self):
        out = jitter_average(SqueezeLevels(0.1456, 22.36), 1.0)
        assert out.squeezed == pytest.approx(0.1524, abs=5e-5)
        assert out.squeezed_db == pytest.approx(-8.17, abs=5e-3)

    def test_quarter_turn_swaps(self):
        out = jitter_average(SqueezeLevels(0.1456, 22.36), 90.0)
        assert out.squeezed == pytest.approx(22.36, rel=1e-12)
        assert out.antisqueezed == pytest.approx(0.1456, rel=1e-12)

    def test_negative_rejected(self):
        with pytest.raises(InvalidParameter):
            jitter_average(SqueezeLevels(0.5, 2.0), -0.1)

    @settings(max_examples=200, deadline=None)
    @given(s=st.floats(0.01, 1.0), a=st.floats(1.0, 100.0), theta=st.floats(0.0, 180.0))
    def test_convex_mixing(self, s, a, theta):
        out = jitter_average(SqueezeLevels(s, a), theta)
        lo, hi = min(s, a), max(s, a)
        for v in (out.squeezed, out.antisqueezed):
            assert lo - 1e-12 <= v <= hi + 1e-12

    @pytest.mark.parametrize("theta", [0.5, 1.0, 2.0, 3.0])
    def test_monte_carlo_agrees(self, theta):
        lv = SqueezeLevels(S_MINUS_G9, S_PLUS_G9)
        det = jitter_average(lv, theta)
        mc = jitter_average_mc(lv, theta, np.random.default_rng(int(theta * 10)), draws=100_000)
        assert mc.squeezed == pytest.approx(det.squeezed, rel=0.02)
        assert mc.antisqueezed == pytest.approx(det.antisqueezed, rel=0.02)

    def test_monotone_in_jitter(self):
        lv = SqueezeLevels(S_MINUS_G9, S_PLUS_G9)
        values = [jitter_average(lv, t).squeezed for t in np.linspace(0, 10, 21)]
        assert np.all(np.diff(values) > 0)


class TestEffectiveR:
    def test_vacuum(self):
        assert effective_r(1.0) == 0.0

    def test_minus_seven_db(self):
        assert effective_r(10 ** -0.7) == pytest.approx(0.7 * math.log(10) / 2, abs=1e-15)
        assert effective_r(10 ** -0.7) == pytest.approx(0.8059, abs=5e-5)

    def test_e_minus_two(self):
        assert effective_r(SqueezeLevels(math.exp(-2), math.exp(2))) == pytest.approx(1.0, abs=1e-15)

    def test_nonpositive(self):
        with pytest.raises(InvalidParameter):
            effective_r(0.0)
