import math

import numpy as np
import pytest

from capscan.errors import (CsvParseError, PeriodAlignmentError, SamplingError)
from capscan.lockin import (NOISE_NONE, Demodulation, NoiseModel, ReferenceSignal,
                            TimeSeries, charge_to_voltage, demodulate,
                            read_timeseries_csv, synthesize, wrap_phase,
                            write_timeseries_csv)
from capscan.solver import InducedCharge

REF = ReferenceSignal(f_in=15e3, v_ref=1.0, theta_ref=0.0)


class TestSynthesize:
    def test_peak_amplitude_within_phase_quantization(self):
        ts = synthesize(1.0, 0.0, REF, fs=1e6, n_periods=10)
        # the peak sample misses the true crest by at most half a sample
        dphi = math.pi * REF.f_in / ts.fs
        assert ts.samples.max() == pytest.approx(1.0, abs=1 - math.cos(dphi))

    def test_zero_amplitude_gives_noise_stream(self):
        noise = NoiseModel("white_gaussian", sigma=0.3, seed=99)
        ts = synthesize(0.0, 0.5, REF, fs=1e6, n_periods=5)
        tsn = synthesize(0.0, 0.5, REF, fs=1e6, n_periods=5, noise=noise)
        assert np.all(ts.samples == 0.0)
        assert np.array_equal(tsn.samples, noise.stream(len(tsn.samples)))

    def test_seed_determinism(self):
        noise = NoiseModel("white_gaussian", sigma=0.1, seed=4)
        a = synthesize(1.0, 0.2, REF, fs=1e6, n_periods=7, noise=noise)
        b = synthesize(1.0, 0.2, REF, fs=1e6, n_periods=7, noise=noise)
        assert np.array_equal(a.samples, b.samples)

    def test_nyquist_violation(self):
        with pytest.raises(SamplingError):
            synthesize(1.0, 0.0, REF, fs=2 * REF.f_in, n_periods=4)

    def test_span_is_exact_period_count(self):
        ts = synthesize(1.0, 0.0, REF, fs=1e6, n_periods=100)
        duration = len(ts.samples) / ts.fs
        assert duration * REF.f_in == pytest.approx(100.0, rel=1e-12)


class TestDemodulate:
    def test_in_phase_tone(self):
        ts = synthesize(1.0, 0.0, REF, fs=1e6, n_periods=30)
        d = demodulate(ts, REF)
        assert d.x == pytest.approx(0.5, abs=1e-12)
        assert d.y == pytest.approx(0.0, abs=1e-12)
        assert d.r == pytest.approx(0.5, abs=1e-12)
        assert d.phi == pytest.approx(0.0, abs=1e-12)

    def test_quadrature_tone(self):
        ts = synthesize(1.0, math.pi / 2, REF, fs=1e6, n_periods=30)
        d = demodulate(ts, REF)
        assert d.x == pytest.approx(0.0, abs=1e-12)
        assert d.y == pytest.approx(0.5, abs=1e-12)
        assert d.phi == pytest.approx(math.pi / 2, abs=1e-12)

    def test_roundtrip_random_phases(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            v_out = rng.uniform(0.1, 3.0)
            th_out, th_ref = rng.uniform(-math.pi, math.pi, 2)
            ref = ReferenceSignal(15e3, 1.0, th_ref)
            ts = synthesize(v_out, th_out, ref, fs=1e6, n_periods=50)
            d = demodulate(ts, ref)
            assert abs(d.r - 0.5 * v_out) / (0.5 * v_out) < 1e-9
            want = wrap_phase(th_out - th_ref)
            err = abs(wrap_phase(d.phi - want))
            assert err < 1e-9

    def test_harmonic_rejection_against_integration_oracle(self):
        # oracle: continuous integral of sin(m w t + a) sin(w t) over integer
        # common periods is exactly zero for m != 1
        for mult, n_per in ((2.0, 20), (0.5, 10)):
            tone = ReferenceSignal(REF.f_in * mult, 1.0, 0.0)
            ts = synthesize(1.0, 0.4, tone, fs=1e6, n_periods=int(n_per * mult))
            d = demodulate(ts, REF)
            assert abs(d.x) < 1e-12
            assert abs(d.y) < 1e-12

    def test_reference_phase_covariance(self):
        ts = synthesize(0.8, 0.3, REF, fs=1e6, n_periods=40)
        d0 = demodulate(ts, REF)
        for delta in (0.25, -1.2, 2.9):
            d = demodulate(ts, ReferenceSignal(REF.f_in, 1.0, delta))
            assert abs(d.r - d0.r) / d0.r < 1e-12
            assert abs(wrap_phase(d.phi - (d0.phi - delta))) < 1e-9

    def test_r_is_hypot_exactly(self):
        ts = synthesize(1.3, 1.1, REF, fs=1e6, n_periods=15,
                        noise=NoiseModel("white_gaussian", 0.05, 3))
        d = demodulate(ts, REF)
        assert d.r == math.hypot(d.x, d.y)
        assert d.r >= 0

    def test_noise_averaging_one_over_sqrt_t(self):
        def r_err(n_periods, seed):
            noise = NoiseModel("white_gaussian", 0.1, seed)
            ts = synthesize(1.0, 0.3, REF, fs=1e6, n_periods=n_periods, noise=noise)
            return demodulate(ts, REF).r - 0.5

        short = np.array([r_err(25, 100 + i) for i in range(100)])
        long = np.array([r_err(400, 7000 + i) for i in range(100)])
        ratio = short.std() / long.std()
        assert 3.0 <= ratio <= 5.0

    def test_non_integer_span_rejected(self):
        n = int(1e6 / 15e3 * 10.6)
        ts = TimeSeries(fs=1e6, samples=np.zeros(n) + 0.1)
        with pytest.raises(PeriodAlignmentError):
            demodulate(ts, REF)

    def test_undersampled_rejected(self):
        ts = TimeSeries(fs=20e3, samples=np.zeros(100))
        with pytest.raises(SamplingError):
            demodulate(ts, REF)


class TestChargeToVoltage:
    def test_definition(self):
        q = InducedCharge(1e-12 * complex(math.cos(0.3), math.sin(0.3)))
        v_out, th = charge_to_voltage(q, gain=1e12)
        assert v_out == pytest.approx(1.0, rel=1e-12)
        assert th == pytest.approx(0.3, abs=1e-12)

    def test_extra_phase_wraps(self):
        q = InducedCharge(1e-12j)  # phase pi/2
        _, th = charge_to_voltage(q, 1e12, extra_phase=math.pi)
        assert th == pytest.approx(-math.pi / 2, abs=1e-12)

    def test_gain_doubling(self):
        q = InducedCharge(2e-13 - 3e-13j)
        v1, t1 = charge_to_voltage(q, 1e12)
        v2, t2 = charge_to_voltage(q, 2e12)
        assert v2 == pytest.approx(2 * v1, rel=1e-15)
        assert t1 == t2

    def test_rejects_nonpositive_gain(self):
        with pytest.raises(ValueError):
            charge_to_voltage(InducedCharge(1e-12), 0.0)


class TestTimeSeriesCsv:
    def test_roundtrip_exact(self, tmp_path):
        noise = NoiseModel("white_gaussian", 0.2, 8)
        ts = synthesize(1.0, 0.7, REF, fs=1e6, n_periods=3, noise=noise)
        p = tmp_path / "ts.csv"
        write_timeseries_csv(ts, p)
        back = read_timeseries_csv(p)
        assert np.array_equal(back.samples, ts.samples)
        assert back.fs == pytest.approx(ts.fs, rel=1e-9)
        d1, d2 = demodulate(ts, REF), demodulate(back, REF)
        assert d1.r == pytest.approx(d2.r, rel=1e-12)

    def test_bad_header(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("time,volts\n0,1\n")
        with pytest.raises(CsvParseError):
            read_timeseries_csv(p)

    def test_non_numeric_cell(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("t,v\n0,1\n1e-6,oops\n")
        with pytest.raises(CsvParseError) as ei:
            read_timeseries_csv(p)
        assert ei.value.row == 2
