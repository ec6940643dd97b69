"""Classical causal low-pass filters used as comparison baselines."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal

from ._validation import check_times
from .base import StreamingFilter


def _section_poles(sos):
    # per-biquad roots; avoids the ill-conditioned expanded polynomial
    return np.concatenate([np.roots(np.trim_zeros(sec[3:], "b")) for sec in sos])


class IirFilter(StreamingFilter):
    """Cascade of second-order sections run in transposed direct form II."""

    def _design(self):
        raise NotImplementedError

    @property
    def sos(self) -> np.ndarray:
        fs = 1.0 / self.sample_period
        if not 0 < self.cutoff_hz < fs / 2:
            raise ValueError(f"cutoff_hz must lie in (0, {fs / 2}), got {self.cutoff_hz!r}")
        sos = self._design()
        if np.max(np.abs(_section_poles(sos)), initial=0.0) >= 1.0:
            raise ValueError("designed filter is unstable")
        return sos

    def poles(self) -> np.ndarray:
        return _section_poles(self.sos)

    def frequency_response(self, f_hz) -> np.ndarray:
        """Complex transfer function at the given frequencies."""
        _, h = signal.sosfreqz(self.sos, worN=np.atleast_1d(f_hz), fs=1.0 / self.sample_period)
        return h

    def _init_state(self, n_channels):
        self.sos_ = self.sos
        self.zi_ = np.zeros((self.sos_.shape[0], 2, n_channels))

    def _step(self, t, x):
        y, self.zi_ = signal.sosfilt(self.sos_, x[None, :], axis=0, zi=self.zi_)
        return y[0]

    def _consume(self, X, t, collect):
        times = check_times(t, X.shape[0], self.last_t_, self.sample_period)
        if X.shape[0] == 0:
            return X.copy() if collect else None
        Y, self.zi_ = signal.sosfilt(self.sos_, X, axis=0, zi=self.zi_)
        self.last_t_ = float(times[-1])
        self.n_seen_ += X.shape[0]
        return Y if collect else None


class FirstOrderLowpass(IirFilter):
    """Bilinear (pre-warped) discretization of ``1 / (1 + s / w_c)``."""

    def __init__(self, cutoff_hz=20.0, sample_period=1e-3):
        self.cutoff_hz = cutoff_hz
        self.sample_period = sample_period

    def _design(self):
        return signal.butter(1, self.cutoff_hz, output="sos", fs=1.0 / self.sample_period)


class Butterworth(IirFilter):
    """Maximally flat low-pass of the given order (default 4, two biquads)."""

    def __init__(self, cutoff_hz=20.0, order=4, sample_period=1e-3):
        self.cutoff_hz = cutoff_hz
        self.order = order
        self.sample_period = sample_period

    def _design(self):
        return signal.butter(self.order, self.cutoff_hz, output="sos", fs=1.0 / self.sample_period)


class FirFilter(StreamingFilter):
    """Causal FIR over the last ``window`` samples.

    Until the window fills, the output uses the coefficients for the shorter
    history returned by ``_coefficients(n)``.
    """

    def _coefficients(self, n) -> np.ndarray:
        raise NotImplementedError

    @property
    def coefficients(self) -> np.ndarray:
        """Steady-state taps ordered oldest to newest sample."""
        return self._coefficients(int(self.window))

    def frequency_response(self, f_hz) -> np.ndarray:
        c = self.coefficients
        lag = np.arange(c.size)[::-1] * self.sample_period
        return np.exp(-2j * np.pi * np.outer(np.atleast_1d(f_hz), lag)) @ c

    def _init_state(self, n_channels):
        if int(self.window) < 1:
            raise ValueError(f"window must be >= 1, got {self.window!r}")
        self._coef_cache = {}
        self.history_ = np.zeros((0, n_channels))

    def _coef(self, n):
        if n not in self._coef_cache:
            self._coef_cache[n] = self._coefficients(n)
        return self._coef_cache[n]

    def _step(self, t, x):
        return self._consume(x[None, :], [t], collect=True)[0]

    def _consume(self, X, t, collect):
        times = check_times(t, X.shape[0], self.last_t_, self.sample_period)
        n_win = int(self.window)
        buf = np.concatenate([self.history_, X])
        n_hist = self.history_.shape[0]
        out = np.empty_like(X)
        i = 0
        # warm-up: fewer than `window` samples available
        while i < X.shape[0] and n_hist + i + 1 < n_win:
            n = n_hist + i + 1
            out[i] = self._coef(n) @ buf[:n]
            i += 1
        if i < X.shape[0]:
            start = n_hist + i + 1 - n_win
            windows = sliding_window_view(buf[start:], n_win, axis=0)
            out[i:] = np.einsum("tcw,w->tc", windows, self._coef(n_win))
        self.history_ = buf[-(n_win - 1):] if n_win > 1 else buf[:0]
        if X.shape[0]:
            self.last_t_ = float(times[-1])
            self.n_seen_ += X.shape[0]
        return out if collect else None


class MovingAverage(FirFilter):
    def __init__(self, window=200, sample_period=1e-3):
        self.window = window
        self.sample_period = sample_period

    def _coefficients(self, n):
        return np.full(n, 1.0 / n)


class SavitzkyGolay(FirFilter):
    """Least-squares polynomial fit over the window, evaluated at its newest
    sample (causal end-point smoothing)."""

    def __init__(self, window=200, order=3, sample_period=1e-3):
        self.window = window
        self.order = order
        self.sample_period = sample_period

    def _init_state(self, n_channels):
        if int(self.window) < int(self.order) + 1:
            raise ValueError(f"window must be at least order + 1 = {int(self.order) + 1}")
        super()._init_state(n_channels)

    def _coefficients(self, n):
        deg = min(int(self.order), n - 1)
        if n == 1:
            return np.ones(1)
        # savgol_coeffs with use="dot" returns taps for samples in time order
        return signal.savgol_coeffs(n, deg, pos=n - 1, use="dot")
