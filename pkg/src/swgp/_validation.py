"""Input validation shared by the streaming filters."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array


def check_signal(X, n_features=None) -> np.ndarray:
    """Return the signal as a finite ``(n_samples, n_features)`` float array."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    X = check_array(X, dtype=np.float64, ensure_min_samples=0)
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"signal has {X.shape[1]} channels, filter was set up for {n_features}")
    return X


def check_times(t, n_samples, last_t, period) -> np.ndarray:
    """Sample times for ``n_samples`` new samples.

    ``None`` continues the regular grid after ``last_t`` (starting at 0).
    Times must be strictly increasing and later than ``last_t``.
    """
    if t is None:
        start = 0.0 if last_t is None else last_t + period
        return start + period * np.arange(n_samples)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if t.ndim != 1 or t.size != n_samples:
        raise ValueError(f"expected {n_samples} time stamps, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise ValueError("time stamps must be finite")
    if n_samples and last_t is not None and t[0] <= last_t:
        raise ValueError(f"time stamp {t[0]!r} does not follow previous sample at {last_t!r}")
    if np.any(np.diff(t) <= 0):
        i = int(np.argmax(np.diff(t) <= 0))
        raise ValueError(f"time stamps must be strictly increasing (index {i + 1})")
    return t


def check_positive(name, value):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    return value
