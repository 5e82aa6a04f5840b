"""Software model of the measurement electronics.

Synthesizes the charge-amplifier output voltage as a sinusoid plus seeded
white noise, and demodulates it into in-phase / quadrature components by
multiplying with the reference and boxcar-averaging over an integer number
of periods (exact DC extraction, no spectral leakage).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CsvParseError, PeriodAlignmentError, SamplingError

NOISE_KINDS = ("none", "white_gaussian")


@dataclass(frozen=True)
class ReferenceSignal:
    """Reference waveform v_ref * sin(2 pi f_in t + theta_ref)."""

    f_in: float
    v_ref: float = 1.0
    theta_ref: float = 0.0

    def __post_init__(self):
        if self.f_in <= 0 or self.v_ref <= 0:
            raise ValueError("f_in and v_ref must be positive")


@dataclass(frozen=True)
class NoiseModel:
    """Seeded additive noise; identical seed gives an identical stream."""

    kind: str = "none"
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")

    def stream(self, n: int) -> np.ndarray:
        if self.kind == "none" or self.sigma == 0.0:
            return np.zeros(n)
        return np.random.default_rng(self.seed).normal(0.0, self.sigma, n)

    def with_seed(self, seed: int) -> "NoiseModel":
        return NoiseModel(self.kind, self.sigma, seed)


NOISE_NONE = NoiseModel()


@dataclass
class TimeSeries:
    """Uniformly sampled voltage record."""

    fs: float
    samples: np.ndarray
    t0: float = 0.0

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.samples)) / self.fs


@dataclass(frozen=True)
class Demodulation:
    """Lock-in outputs; r = hypot(x, y) by construction, phi in (-pi, pi]."""

    x: float
    y: float
    r: float
    phi: float


def wrap_phase(phi: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.remainder(phi, 2 * math.pi)
    if w <= -math.pi:
        w += 2 * math.pi
    return w


def synthesize(v_out: float, theta_out: float, ref: ReferenceSignal, fs: float,
               n_periods: int, noise: NoiseModel = NOISE_NONE) -> TimeSeries:
    """Sample v_out * sin(2 pi f_in t + theta_out) + N(t) over n_periods.

    The sample count is round(n_periods * fs / f_in) and the spacing is
    nudged so the record spans exactly n_periods of the reference; the
    actual rate is stored in the result.  With that alignment the boxcar
    demodulator rejects the 2f component exactly for any fs / f_in ratio.
    """
    if fs <= 2.0 * ref.f_in:
        raise SamplingError(f"fs = {fs:g} Hz must exceed 2 * f_in = {2 * ref.f_in:g} Hz")
    if n_periods < 1:
        raise ValueError("n_periods must be >= 1")
    n = max(1, int(round(n_periods * fs / ref.f_in)))
    dt = (n_periods / ref.f_in) / n
    t = np.arange(n) * dt
    samples = v_out * np.sin(2.0 * math.pi * ref.f_in * t + theta_out) + noise.stream(n)
    return TimeSeries(fs=1.0 / dt, samples=samples, t0=0.0)


def demodulate(ts: TimeSeries, ref: ReferenceSignal) -> Demodulation:
    """Boxcar lock-in demodulation against the reference.

    X = mean(v[n] * v_ref * sin(w t_n + theta_ref)), Y likewise with cos.
    For a noiseless tone this yields X = v_out*v_ref/2 * cos(theta_out -
    theta_ref) and Y the matching sine; phi uses the two-argument
    arctangent for the full (-pi, pi] range.

    Raises PeriodAlignmentError when the record does not span an integer
    number of reference periods to within half a sample (leakage would
    bias the DC extraction).
    """
    n = len(ts.samples)
    if n == 0:
        raise PeriodAlignmentError("empty time series")
    if ts.fs <= 2.0 * ref.f_in:
        raise SamplingError(f"fs = {ts.fs:g} Hz must exceed 2 * f_in = {2 * ref.f_in:g} Hz")
    duration = n / ts.fs
    k = round(duration * ref.f_in)
    if k < 1 or abs(duration - k / ref.f_in) > 0.5 / ts.fs:
        raise PeriodAlignmentError(
            f"record spans {duration * ref.f_in:.6f} periods; "
            "need an integer count within half a sample")
    t = ts.times()
    w = 2.0 * math.pi * ref.f_in
    x = float(np.mean(ts.samples * ref.v_ref * np.sin(w * t + ref.theta_ref)))
    y = float(np.mean(ts.samples * ref.v_ref * np.cos(w * t + ref.theta_ref)))
    return Demodulation(x=x, y=y, r=math.hypot(x, y), phi=math.atan2(y, x))


def charge_to_voltage(q, gain: float, extra_phase: float = 0.0) -> tuple[float, float]:
    """Charge-amplifier model: (v_out, theta_out) = (gain*|q|, arg q + extra)."""
    if gain <= 0:
        raise ValueError("gain must be positive")
    qc = complex(q.q) if hasattr(q, "q") else complex(q)
    return gain * abs(qc), wrap_phase(float(np.angle(qc)) + extra_phase)


def write_timeseries_csv(ts: TimeSeries, path) -> None:
    """Two-column CSV (t, v) at full round-trip precision."""
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write("t,v\n")
        for t, v in zip(ts.times(), ts.samples):
            f.write(f"{t:.17g},{v:.17g}\n")


def read_timeseries_csv(path) -> TimeSeries:
    rows = []
    with open(path, "r", encoding="ascii") as f:
        header = f.readline().strip()
        if header != "t,v":
            raise CsvParseError(f"expected 't,v' header, got {header!r}", row=0)
        for i, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise CsvParseError("expected two columns", row=i)
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except ValueError as e:
                raise CsvParseError(str(e), row=i) from e
    if len(rows) < 2:
        raise CsvParseError("need at least two samples")
    t = np.array([r[0] for r in rows])
    v = np.array([r[1] for r in rows])
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
        raise CsvParseError("time base is not uniform")
    return TimeSeries(fs=1.0 / float(dt[0]), samples=v, t0=float(t[0]))
