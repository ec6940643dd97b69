"""Test signals, frequency-response measurement and MSE sweeps."""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, clone

from .baselines import Butterworth, FirstOrderLowpass, IirFilter, MovingAverage, SavitzkyGolay


class ResponseNotSinusoidalWarning(UserWarning):
    pass


@dataclass
class SignalSpec:
    """A sampled test signal.

    ``kind`` is ``"sine"``, ``"chirp"`` (linear sweep ``frequency_hz`` to
    ``chirp_end_hz``), ``"constant"`` (value ``amplitude``) or ``"custom"``
    (``custom`` is a callable of time or an array of samples). ``noise`` is
    ``"none"``, ``"gaussian"`` (std ``noise_scale``) or ``"uniform"``
    (``+-noise_scale``).
    """

    kind: str = "sine"
    frequency_hz: float = 1.0
    amplitude: float = 1.0
    fs_hz: float = 1000.0
    duration_s: float = 1.0
    noise: str = "none"
    noise_scale: float = 0.0
    seed: int | tuple = 0
    chirp_end_hz: float | None = None
    custom: object = None

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.fs_hz))


class Stream(NamedTuple):
    t: np.ndarray
    clean: np.ndarray
    noisy: np.ndarray


class BodePoint(NamedTuple):
    frequency_hz: float
    amplitude_ratio: float
    phase_rad: float
    residual: float = 0.0


def rng_for(seed) -> np.random.Generator:
    """Counter-based generator; ``seed`` may be an int or a tuple of ints."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def generate(spec: SignalSpec) -> Stream:
    t = np.arange(spec.n_samples) / spec.fs_hz
    if spec.kind == "sine":
        clean = spec.amplitude * np.sin(2 * np.pi * spec.frequency_hz * t)
    elif spec.kind == "chirp":
        f1 = spec.frequency_hz if spec.chirp_end_hz is None else spec.chirp_end_hz
        rate = (f1 - spec.frequency_hz) / spec.duration_s
        clean = spec.amplitude * np.sin(2 * np.pi * (spec.frequency_hz * t + 0.5 * rate * t**2))
    elif spec.kind == "constant":
        clean = np.full_like(t, spec.amplitude)
    elif spec.kind == "custom":
        clean = np.asarray(spec.custom(t) if callable(spec.custom) else spec.custom, dtype=float)
        if clean.shape != t.shape:
            raise ValueError(f"custom signal has shape {clean.shape}, expected {t.shape}")
    else:
        raise ValueError(f"unknown signal kind {spec.kind!r}")

    if spec.noise == "none":
        noise = np.zeros_like(t)
    elif spec.noise == "gaussian":
        noise = rng_for(spec.seed).normal(0.0, spec.noise_scale, t.size)
    elif spec.noise == "uniform":
        noise = rng_for(spec.seed).uniform(-spec.noise_scale, spec.noise_scale, t.size)
    else:
        raise ValueError(f"unknown noise model {spec.noise!r}")
    return Stream(t, clean, clean + noise)


def settling_time(filt, fs_hz) -> float:
    """Rough time for the filter's start-up transient to die out."""
    if isinstance(filt, IirFilter):
        radius = np.max(np.abs(filt.poles()), initial=0.0)
        if radius == 0:
            return 1.0 / fs_hz
        return np.log(1e5) / -np.log(radius) / fs_hz
    return getattr(filt, "window", 1) / fs_hz


def _fresh(filt):
    if isinstance(filt, BaseEstimator):
        return clone(filt)
    return filt()


def fit_sinusoid(t, y, f_hz):
    """Least-squares ``A sin(2 pi f t + phi)``; returns ``(A, phi, rms residual)``."""
    w = 2 * np.pi * f_hz * t
    design = np.column_stack([np.sin(w), np.cos(w)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    amp = float(np.hypot(coef[0], coef[1]))
    phase = float(np.arctan2(coef[1], coef[0]))
    if phase <= -np.pi:
        phase += 2 * np.pi
    return amp, phase, float(np.sqrt(np.mean(resid**2)))


def measure_response(filt, f_hz, fs_hz=1000.0, settle_s=None, measure_s=None) -> BodePoint:
    """Steady-state gain and phase of ``filt`` for a unit sine at ``f_hz``.

    ``filt`` is a streaming filter (cloned, so it is not modified) or a
    zero-argument factory. The default settle time is
    ``max(2/f, settling time of the filter)``; the default measurement span
    is ``max(2/f, 0.25 s)``.
    """
    proto = filt if isinstance(filt, BaseEstimator) else filt()
    if settle_s is None:
        settle_s = max(2.0 / f_hz, settling_time(proto, fs_hz))
    if measure_s is None:
        measure_s = max(2.0 / f_hz, 0.25)
    if measure_s * f_hz < 2 - 1e-9:
        raise ValueError("measurement span must cover at least two periods")
    n_settle = int(np.ceil(settle_s * fs_hz))
    n_measure = int(np.ceil(measure_s * fs_hz))
    t = np.arange(n_settle + n_measure) / fs_hz
    x = np.sin(2 * np.pi * f_hz * t)
    f = _fresh(proto)
    if hasattr(f, "sample_period"):
        f.set_params(sample_period=1.0 / fs_hz)
    y = f.fit_transform(x, t=t)[:, 0]
    amp, phase, resid = fit_sinusoid(t[n_settle:], y[n_settle:], f_hz)
    rel = resid / max(amp, 1e-300)
    if rel > 0.2 and resid > 1e-9:
        warnings.warn(
            f"response at {f_hz:g} Hz is not sinusoidal (residual {rel:.0%} of amplitude)",
            ResponseNotSinusoidalWarning,
            stacklevel=2,
        )
    return BodePoint(float(f_hz), amp, phase, rel)


def frequency_grid(f_min=1e-2, f_max=1e2, points_per_decade=25, n_points=None) -> np.ndarray:
    if n_points is None:
        n_points = int(round(np.log10(f_max / f_min) * points_per_decade)) + 1
    return np.logspace(np.log10(f_min), np.log10(f_max), n_points)


def n_jobs_default() -> int:
    return max(1, int(os.environ.get("SWGP_THREADS", "1")))


def bode_sweep(filt, frequencies, fs_hz=1000.0, n_jobs=None) -> list[BodePoint]:
    n_jobs = n_jobs_default() if n_jobs is None else n_jobs
    return Parallel(n_jobs=n_jobs)(delayed(measure_response)(filt, f, fs_hz) for f in frequencies)


def cutoff_frequency(points: Sequence[BodePoint], level=1 / np.sqrt(2)) -> float:
    """First downward crossing of ``level`` (default -3 dB), interpolated in
    log-frequency on the dB scale; ``nan`` if the gain never drops below."""
    f = np.array([p.frequency_hz for p in points])
    a = np.array([p.amplitude_ratio for p in points])
    for i in range(1, f.size):
        if a[i - 1] >= level > a[i]:
            db0, db1, target = (20 * np.log10(v) for v in (a[i - 1], a[i], level))
            frac = (db0 - target) / (db0 - db1)
            return float(10 ** (np.log10(f[i - 1]) + frac * np.log10(f[i] / f[i - 1])))
    return float("nan")


def _run_mse(filt, f_hz, noise, noise_scale, duration_s, fs_hz, seed):
    spec = SignalSpec("sine", f_hz, 1.0, fs_hz, duration_s, noise, noise_scale, seed)
    s = generate(spec)
    model = _fresh(filt)
    if hasattr(model, "sample_period"):
        model.set_params(sample_period=1.0 / fs_hz)
    out = model.fit_transform(s.noisy, t=s.t)[:, 0]
    return float(np.mean((out - s.clean) ** 2))


def mse_sweep(
    filt,
    frequencies,
    noise="gaussian",
    noise_scale=np.sqrt(0.1),
    duration_s=1.0,
    repetitions=20,
    fs_hz=1000.0,
    seed=0,
    min_periods=2.0,
    n_jobs=None,
):
    """Mean and std of the MSE against the clean sine, per frequency.

    Every run uses a fresh filter and an independent noise stream seeded by
    ``(seed, frequency index, repetition)``, so different filters swept with
    the same seed see identical noise. Runs are lengthened to cover
    ``min_periods`` periods (``min_periods=0`` keeps ``duration_s`` strictly).
    Returns a list of ``(f, mse_mean, mse_std)``.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    n_jobs = n_jobs_default() if n_jobs is None else n_jobs
    jobs = []
    for fi, f in enumerate(frequencies):
        dur = max(duration_s, min_periods / f)
        for rep in range(repetitions):
            jobs.append(delayed(_run_mse)(filt, f, noise, noise_scale, dur, fs_hz, (int(seed), fi, rep)))
    mses = np.array(Parallel(n_jobs=n_jobs)(jobs)).reshape(len(frequencies), repetitions)
    ddof = 1 if repetitions > 1 else 0
    return [(float(f), float(m.mean()), float(m.std(ddof=ddof))) for f, m in zip(frequencies, mses)]


def default_baselines(cutoff_hz=20.0, window=200, fs_hz=1000.0) -> dict[str, BaseEstimator]:
    tau = 1.0 / fs_hz
    return {
        "lowpass1": FirstOrderLowpass(cutoff_hz, sample_period=tau),
        "butterworth4": Butterworth(cutoff_hz, 4, sample_period=tau),
        "moving_average": MovingAverage(window, sample_period=tau),
        "savitzky_golay3": SavitzkyGolay(window, 3, sample_period=tau),
    }


def compare_filters(filters: dict, frequencies, **sweep_kwargs):
    """``mse_sweep`` for several named filters; rows ``(f, name, mean, std)``."""
    rows = []
    for name, filt in filters.items():
        for f, m, s in mse_sweep(filt, frequencies, **sweep_kwargs):
            rows.append((f, name, m, s))
    rows.sort(key=lambda r: (r[0], list(filters).index(r[1])))
    return rows


__all__ = [
    "BodePoint",
    "ResponseNotSinusoidalWarning",
    "SignalSpec",
    "Stream",
    "bode_sweep",
    "compare_filters",
    "cutoff_frequency",
    "default_baselines",
    "fit_sinusoid",
    "frequency_grid",
    "generate",
    "measure_response",
    "mse_sweep",
]
