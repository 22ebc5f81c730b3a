# coding: utf-8
import math

import numpy as np
import pytest

from laboratory.dispersion import (
    dispersion_envelope,
    dispersion_times,
    high_closed_form,
    k_integral,
    low_closed_form,
    scaled_profile,
    verify_dispersion,
)
from laboratory.exceptions import EnvelopeViolation, InvalidParameter


class TestIntegral:
    def test_short_time_limit(self):
        low, _ = k_integral(1e-2, 1e-8, 2, 1.0)
        assert low == pytest.approx(2e-2, rel=1e-6)

    def test_long_time_limit(self):
        low, _ = k_integral(1e-2, 1e4, 2, 1.0)
        assert low == pytest.approx(math.sqrt(math.pi * 1e-2 / 1e4), rel=1e-7)

    @pytest.mark.parametrize("m", [1, 2, 4])
    @pytest.mark.parametrize("t", [0.1, 1.0, 1e3])
    def test_closed_forms(self, m, t):
        nu, c1 = 1e-3, 1.0
        low, high = k_integral(nu, t, m, c1)
        assert low == pytest.approx(low_closed_form(nu, t, c1), rel=1e-7)
        assert high == pytest.approx(high_closed_form(nu, t, m, c1), rel=1e-6)

    @pytest.mark.parametrize("m", [1, 2, 4])
    def test_factorized_bound(self, m):
        nu, c1 = 1e-2, 0.7
        for t in (1.0, 10.0, 100.0):
            _, high = k_integral(nu, t, m, c1)
            assert high <= math.exp(-c1 * nu * t / 2) * high_closed_form(nu, t, m, c1 / 2) * (1 + 1e-8)

    def test_guards(self):
        with pytest.raises(InvalidParameter):
            k_integral(0.0, 1.0, 2, 1.0)
        with pytest.raises(InvalidParameter):
            k_integral(1e-3, 0.0, 2, 1.0)
        with pytest.raises(InvalidParameter):
            k_integral(1e-3, 1.0, 2, -1.0)


class TestEnvelope:
    def test_value(self):
        assert dispersion_envelope(1e-2, 1.0, 1.0, 1.0) == pytest.approx(0.1 + math.exp(-0.01))
        assert float(dispersion_envelope(1e-2, 1.0, 1.0, 1.0)) == pytest.approx(1.0900, abs=1e-4)

    def test_heat_tail(self):
        t = 1e8
        assert dispersion_envelope(1e-2, t, 1.0, 2.0) == pytest.approx(2.0 * math.sqrt(1e-2 / t))

    def test_scaling(self):
        t = np.geomspace(0.1, 1e3, 9)
        scaled = dispersion_envelope(2e-3, t / 2, 0.5, 1.0)
        assert np.allclose(scaled, 2 * dispersion_envelope(1e-3, t, 0.5, 1.0))


class TestVerification:
    @pytest.mark.parametrize("m", [1, 2, 4])
    @pytest.mark.parametrize("nu", [1e-2, 1e-3])
    def test_envelope_holds(self, m, nu):
        report = verify_dispersion(nu, m, 1.0)
        assert report.max_ratio <= 3
        c1, c2, C2 = report.constants
        assert c2 == c1 / 2
        assert report.times[0] == pytest.approx(0.1)
        assert report.times[-1] == pytest.approx(10 / nu)
        assert report.rows()[0]["ratio"] == pytest.approx(1.0)
        assert np.all(np.isfinite(scaled_profile(report)))

    def test_summary(self):
        report = verify_dispersion(1e-2, 2, 1.0, t_grid=dispersion_times(1e-2, samples=11))
        summary = report.summary()
        assert set(summary) == {"nu", "m", "c1", "c2", "C2_fit", "max_ratio", "high_ratio", "high_limit"}
        assert len(report.rows()) == 11
        assert np.allclose(report.total, report.I_low + report.I_high)

    def test_violation(self):
        with pytest.raises(EnvelopeViolation) as error:
            verify_dispersion(1e-2, 2, 1.0, t_grid=dispersion_times(1e-2, samples=11), factor=0.5)
        assert error.value.time is not None

    def test_guards(self):
        with pytest.raises(InvalidParameter):
            verify_dispersion(1e-2, 2, 1.0, t_grid=[1.0])
        with pytest.raises(InvalidParameter):
            verify_dispersion(1e-2, 2, 1.0, c2=0.8)

    @pytest.mark.parametrize("m", [1, 2, 4])
    @pytest.mark.parametrize("nu", [1e-2, 1e-3])
    def test_high_wavenumber_bound(self, m, nu):
        report = verify_dispersion(nu, m, 0.7)
        assert 1.0 <= report.high_ratio <= report.high_limit
        # The bound is close to 2^((m + 2) / 2), the gap between rates c1 / 2 and c1 at short times
        assert report.high_limit == pytest.approx(2 ** ((m + 2) / 2), rel=0.05)

    def test_high_wavenumber_violation(self):
        with pytest.raises(EnvelopeViolation) as error:
            verify_dispersion(1e-2, 2, 1.0, t_grid=dispersion_times(1e-2, samples=11), high_limit=0.5)
        assert error.value.time == pytest.approx(0.1)
