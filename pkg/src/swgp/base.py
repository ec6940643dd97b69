"""Common streaming-filter estimator interface."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_signal, check_times


class StreamingFilter(TransformerMixin, BaseEstimator):
    """Causal filter consuming a sampled signal one sample at a time.

    The estimator is stateful: ``transform`` continues from wherever the
    previous call stopped, ``fit`` and ``fit_transform`` start from a fresh
    state. Signals are ``(n_samples, n_channels)`` arrays (1-d means one
    channel); channels are filtered independently.

    Subclasses implement ``_init_state(n_channels)`` and
    ``_step(t, x) -> filtered sample``.
    """

    #: nominal sampling period used when no time stamps are passed
    sample_period = 1e-3

    def reset(self, n_channels=1):
        self.n_features_in_ = int(n_channels)
        self.last_t_ = None
        self.n_seen_ = 0
        self._init_state(self.n_features_in_)
        return self

    def fit(self, X, y=None, t=None):
        X = check_signal(X)
        self.reset(X.shape[1])
        self._consume(X, t, collect=False)
        return self

    def partial_fit(self, X, y=None, t=None):
        X = check_signal(X, getattr(self, "n_features_in_", None))
        if not hasattr(self, "n_features_in_"):
            self.reset(X.shape[1])
        self._consume(X, t, collect=False)
        return self

    def transform(self, X, t=None):
        check_is_fitted(self, "n_features_in_")
        X = check_signal(X, self.n_features_in_)
        return self._consume(X, t, collect=True)

    def fit_transform(self, X, y=None, t=None):
        X = check_signal(X)
        self.reset(X.shape[1])
        return self._consume(X, t, collect=True)

    def step(self, t, x):
        """Push one sample and return the filtered value at ``t``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if not hasattr(self, "n_features_in_"):
            self.reset(x.size)
        return self._consume(x.reshape(1, -1), None if t is None else [t], collect=True)[0]

    def _consume(self, X, t, collect):
        times = check_times(t, X.shape[0], self.last_t_, self.sample_period)
        out = np.empty_like(X) if collect else None
        for i in range(X.shape[0]):
            y = self._step(times[i], X[i])
            if collect:
                out[i] = y
        if X.shape[0]:
            self.last_t_ = float(times[-1])
            self.n_seen_ += X.shape[0]
        return out

    def _init_state(self, n_channels):
        raise NotImplementedError

    def _step(self, t, x):
        raise NotImplementedError


class Identity(StreamingFilter):
    """Pass-through filter, useful as a reference in sweeps."""

    def __init__(self, sample_period=1e-3):
        self.sample_period = sample_period

    def _init_state(self, n_channels):
        pass

    def _step(self, t, x):
        return x.copy()

    def _consume(self, X, t, collect):
        times = check_times(t, X.shape[0], self.last_t_, self.sample_period)
        if X.shape[0]:
            self.last_t_ = float(times[-1])
            self.n_seen_ += X.shape[0]
        return X.copy() if collect else None
