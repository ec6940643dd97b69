"""Sliding-window GP low-pass filter with online RPROP hyperparameter tuning.

Each signal channel is an independent scalar GP over the most recent
``window`` samples, indexed by time. Hyperparameters are adapted in
log-space with one sign-based RPROP step per refresh, using the gradient of
the negative log-likelihood computed at the previous refresh.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.linalg import cho_solve, lapack
from sklearn.exceptions import NotFittedError

from . import gp
from ._validation import check_positive, check_times
from .base import StreamingFilter
from .kernels import Hyperparameters, kernel_vector


class SlidingWindow:
    """Fixed-capacity FIFO of ``(time, value)`` pairs.

    Entries live contiguously in a buffer of twice the capacity, so reading
    the window in time order is a slice; the live block is moved back to
    the front only once every ``capacity`` pushes.
    """

    def __init__(self, capacity: int):
        if int(capacity) < 1:
            raise ValueError(f"window capacity must be >= 1, got {capacity!r}")
        self.capacity = int(capacity)
        self._times = np.empty(2 * self.capacity)
        self._values = np.empty(2 * self.capacity)
        self._start = 0
        self.size = 0
        self.total_seen = 0

    def __len__(self):
        return self.size

    @property
    def full(self) -> bool:
        return self.size == self.capacity

    @property
    def last_time(self):
        if not self.size:
            return None
        return self._times[self._start + self.size - 1]

    def push(self, t: float, value: float):
        """Append a sample; returns the evicted ``(t, value)`` or ``None``."""
        last = self.last_time
        if last is not None and not t > last:
            raise ValueError(f"time stamp {t!r} is not after the last sample at {last!r}")
        evicted = None
        if self.full:
            evicted = (self._times[self._start], self._values[self._start])
            self._start += 1
            self.size -= 1
        end = self._start + self.size
        if end == self._times.size:
            self._times[: self.size] = self._times[self._start:end]
            self._values[: self.size] = self._values[self._start:end]
            self._start, end = 0, self.size
        self._times[end] = t
        self._values[end] = value
        self.size += 1
        self.total_seen += 1
        return evicted

    def times(self) -> np.ndarray:
        return self._times[self._start:self._start + self.size].copy()

    def values(self) -> np.ndarray:
        return self._values[self._start:self._start + self.size].copy()

    def replace_contents(self, times, values):
        times = np.asarray(times, dtype=float)[-self.capacity:]
        values = np.asarray(values, dtype=float)[-self.capacity:]
        self.size = times.size
        self._start = 0
        self._times[: self.size] = times
        self._values[: self.size] = values


@dataclass(frozen=True)
class RpropState:
    delta: np.ndarray
    prev_grad: np.ndarray
    eta_plus: float = 1.2
    eta_minus: float = 0.5
    delta_min: float = 1e-6
    delta_max: float = 0.5

    def __post_init__(self):
        if not self.eta_plus > 1:
            raise ValueError(f"eta_plus must exceed 1, got {self.eta_plus}")
        if not 0 < self.eta_minus < 1:
            raise ValueError(f"eta_minus must lie in (0, 1), got {self.eta_minus}")
        if not 0 < self.delta_min <= self.delta_max:
            raise ValueError("need 0 < delta_min <= delta_max")

    @classmethod
    def initial(cls, n_params, delta_init=0.01, **kwargs) -> "RpropState":
        return cls(np.full(n_params, float(delta_init)), np.zeros(n_params), **kwargs)


def rprop_step(state: RpropState, grad) -> RpropState:
    """Adapt the step sizes from the sign agreement of two successive gradients."""
    grad = np.asarray(grad, dtype=float)
    if grad.shape != state.prev_grad.shape:
        raise ValueError(f"gradient shape {grad.shape} != {state.prev_grad.shape}")
    p = grad * state.prev_grad
    factor = np.where(p > 0, state.eta_plus, np.where(p < 0, state.eta_minus, 1.0))
    # unchanged components already lie within the bounds, so one clip suffices
    delta = np.clip(state.delta * factor, state.delta_min, state.delta_max)
    # constants are copied from an already validated state
    new = object.__new__(RpropState)
    new.__dict__.update(state.__dict__, delta=delta, prev_grad=grad.copy())
    return new


def _fit_with_log_gradient(times, values, hp):
    """Posterior and log-space NLL gradient for scalar times and the SE kernel.

    Same quantities as ``gp.fit`` + ``gp.nll_gradient(log_space=True)``, but
    reuses the scaled squared distances and one triangular inverse, which
    keeps per-sample Python overhead low. Falls back to the generic jittered
    fit when the plain Cholesky factorization fails.
    """
    sf, ell, sn = hp.sigma_f, hp.lengthscales[0], hp.sigma_on
    n = times.size
    diff = times[:, None] - times[None, :]
    d2 = diff * diff / (ell * ell)
    K = sf * sf * np.exp(-0.5 * d2)
    A = K.copy()
    A.flat[:: n + 1] += sn * sn
    L, info = lapack.dpotrf(A, lower=1, clean=1)
    if info != 0:
        state = gp.fit(times, values, hp)
        return state, gp.nll_gradient(state, log_space=True)
    L_inv, _ = lapack.dtrtri(L, lower=1)
    A_inv = L_inv.T @ L_inv
    alpha = L_inv.T @ (L_inv @ values)
    W = np.outer(alpha, alpha) - A_inv
    WK = W * K
    # d A / d log(sigma_f) = 2 K, d A / d log(l) = K * d2, d A / d log(sigma_on) = 2 sigma_on^2 I
    grad = np.array([-WK.sum(), -0.5 * (WK * d2).sum(), -sn * sn * W.trace()])
    state = gp.GpPosteriorState(times.reshape(-1, 1), values, hp, K, L, alpha)
    state.__dict__["A_inv"] = A_inv
    return state, grad


class _Channel:
    """State of one scalar SW-GP (one signal dimension)."""

    def __init__(self, window, hp, rprop, adapt, decimation, log_bounds):
        self.window = SlidingWindow(window)
        self.log_theta = hp.to_log()
        self.rprop = rprop
        self.adapt = adapt
        self.decimation = decimation
        self.log_bounds = log_bounds
        self.posterior = None
        self.refresh_time = None
        self._cache = None  # (hp vector, relative times, K, chol) for fixed hyperparameters
        self._hp = None  # (log_theta, Hyperparameters) of the last conversion

    @property
    def hp(self) -> Hyperparameters:
        cached = self._hp
        if cached is None or cached[0] is not self.log_theta and not np.array_equal(cached[0], self.log_theta):
            cached = self._hp = (self.log_theta.copy(), Hyperparameters.from_log_trusted(self.log_theta))
        return cached[1]

    def push(self, t, y):
        self.window.push(t, y)
        if (self.window.total_seen - 1) % self.decimation == 0:
            self.refresh()

    def refresh(self):
        if self.adapt:
            # descend the negative log-likelihood along the stored gradient
            step = -np.sign(self.rprop.prev_grad) * self.rprop.delta
            self.log_theta = np.clip(self.log_theta + step, *self.log_bounds)
            self._hp = (self.log_theta, Hyperparameters.from_log_trusted(self.log_theta))
        hp = self.hp
        times, values = self.window.times(), self.window.values()
        if self.adapt:
            self.posterior, grad = _fit_with_log_gradient(times, values, hp)
            self.rprop = rprop_step(self.rprop, grad)
        else:
            self.posterior = self._fit_cached(times, values, hp)
        self.refresh_time = times[-1]

    def _fit_cached(self, times, values, hp):
        # stationary kernel: the factorization only depends on relative times
        rel = times - times[0]
        theta = hp.to_vector()
        c = self._cache
        if (
            c is not None
            and c[1].size == rel.size
            and np.array_equal(c[0], theta)
            and np.max(np.abs(c[1] - rel), initial=0.0) <= 1e-12 * max(1.0, rel[-1])
        ):
            K, L, jitter = c[2], c[3], c[4]
            alpha = cho_solve((L, True), values, check_finite=False)
            return gp.GpPosteriorState(times.reshape(-1, 1), values, hp, K, L, alpha, jitter)
        state = gp.fit(times, values, hp)
        self._cache = (theta, rel, state.K, state.chol, state.jitter)
        return state

    def estimate(self, t):
        if self.posterior is None:
            raise ValueError("filter has no samples yet")
        if t < self.refresh_time - 1e-12 * max(1.0, abs(self.refresh_time)):
            raise ValueError(f"cannot estimate at t={t!r} before the last refresh at {self.refresh_time!r}")
        post = self.posterior
        hp = post.hp
        r = (t - post.inputs[:, 0]) / hp.lengthscales[0]
        return float(hp.sigma_f**2 * (np.exp(-0.5 * r * r) @ post.alpha))

    def fir_coefficients(self, t):
        post = self.posterior
        if post is None or post.n < self.window.capacity:
            raise ValueError("FIR coefficients need a full window")
        k = kernel_vector(t, post.inputs, post.hp)
        return cho_solve((post.chol, True), k, check_finite=False)


class SlidingWindowGP(StreamingFilter):
    """Adaptive low-pass filter built from sliding-window GP regression.

    Parameters
    ----------
    window : int
        Number of most recent samples the GP is conditioned on.
    sample_period : float
        Sampling period in seconds; used to generate time stamps when none
        are given.
    sigma_f, lengthscale, sigma_on : float
        Initial signal std, time lengthscale and assumed noise std.
    adapt : bool
        Tune the hyperparameters online with RPROP.
    eta_plus, eta_minus, delta_init, delta_min, delta_max : float
        RPROP step-size growth/shrink factors, initial step and step bounds,
        all in log-hyperparameter units.
    update_decimation : int
        Refresh hyperparameters and posterior every k-th sample only;
        estimates in between use the last posterior.
    hp_bounds : (float, float)
        Hard box for every hyperparameter, keeps the kernel matrix
        representable on pathological streams.
    min_lengthscale : float or None
        Lower bound for the lengthscale; ``None`` means one sample period.
        Below the sample spacing the kernel between neighbours underflows to
        zero and the lengthscale gradient vanishes for good.
    """

    def __init__(
        self,
        window=200,
        sample_period=1e-3,
        sigma_f=1.0,
        lengthscale=0.1,
        sigma_on=np.sqrt(0.1),
        adapt=True,
        eta_plus=1.2,
        eta_minus=0.5,
        delta_init=0.01,
        delta_min=1e-6,
        delta_max=0.5,
        update_decimation=1,
        hp_bounds=(1e-6, 1e6),
        min_lengthscale=None,
    ):
        self.window = window
        self.sample_period = sample_period
        self.sigma_f = sigma_f
        self.lengthscale = lengthscale
        self.sigma_on = sigma_on
        self.adapt = adapt
        self.eta_plus = eta_plus
        self.eta_minus = eta_minus
        self.delta_init = delta_init
        self.delta_min = delta_min
        self.delta_max = delta_max
        self.update_decimation = update_decimation
        self.hp_bounds = hp_bounds
        self.min_lengthscale = min_lengthscale

    def _init_state(self, n_channels):
        check_positive("window", self.window)
        check_positive("sample_period", self.sample_period)
        if int(self.update_decimation) < 1:
            raise ValueError(f"update_decimation must be >= 1, got {self.update_decimation!r}")
        lo, hi = self.hp_bounds
        if not 0 < lo < hi:
            raise ValueError(f"invalid hp_bounds {self.hp_bounds!r}")
        hp = Hyperparameters(self.sigma_f, [self.lengthscale], self.sigma_on)
        if np.any(hp.to_vector() < lo) or np.any(hp.to_vector() > hi):
            raise ValueError("initial hyperparameters lie outside hp_bounds")
        if not self.delta_min <= self.delta_init <= self.delta_max:
            raise ValueError("delta_init must lie in [delta_min, delta_max]")
        rprop = RpropState.initial(
            hp.n_params,
            self.delta_init,
            eta_plus=self.eta_plus,
            eta_minus=self.eta_minus,
            delta_min=self.delta_min,
            delta_max=self.delta_max,
        )
        lo_vec = np.full(hp.n_params, float(lo))
        lo_vec[1:-1] = self.sample_period if self.min_lengthscale is None else self.min_lengthscale
        if not np.all(lo_vec < hi):
            raise ValueError("min_lengthscale must be below the upper hyperparameter bound")
        log_lo = np.log(np.minimum(lo_vec, hp.to_vector()))
        bounds = (log_lo, np.full(hp.n_params, np.log(hi)))
        self.channels_ = [
            _Channel(int(self.window), hp, rprop, bool(self.adapt), int(self.update_decimation), bounds)
            for _ in range(n_channels)
        ]

    def _step(self, t, x):
        for ch, value in zip(self.channels_, x):
            ch.push(t, value)
        return np.array([ch.estimate(t) for ch in self.channels_])

    def _consume(self, X, t, collect):
        if not collect or not self._fast_path_ok():
            return super()._consume(X, t, collect)
        # fixed hyperparameters: switch to a constant-coefficient FIR once the
        # window is full and the stream is regularly spaced
        times = check_times(t, X.shape[0], self.last_t_, self.sample_period)
        out = np.empty_like(X)
        n_win = int(self.window)
        i = 0
        while i < X.shape[0] and not self.channels_[0].window.full:
            out[i] = self._step(times[i], X[i])
            self.last_t_ = float(times[i])
            self.n_seen_ += 1
            i += 1
        rest = X.shape[0] - i
        if rest > 0:
            old_t = self.channels_[0].window.times()
            all_t = np.concatenate([old_t, times[i:]])
            gaps = np.diff(all_t)
            if np.max(np.abs(gaps - gaps[0])) > 1e-9 * max(gaps[0], 1e-300) + 1e-12 * abs(all_t[-1]):
                out[i:] = super()._consume(X[i:], times[i:], collect)
                return out
            for c, ch in enumerate(self.channels_):
                coeffs = ch.fir_coefficients(ch.window.last_time)
                vals = np.concatenate([ch.window.values(), X[i:, c]])
                out[i:, c] = sliding_window_view(vals[1:], n_win) @ coeffs
                ch.window.replace_contents(all_t, vals)
                ch.window.total_seen += rest
                ch.refresh()
            self.last_t_ = float(times[-1])
            self.n_seen_ += rest
        return out

    def _fast_path_ok(self):
        return not self.adapt and int(self.update_decimation) == 1

    # -- queries -----------------------------------------------------------

    def predict(self, t):
        """Filter estimates at times ``t`` (no state change), shape ``(n, d)``."""
        self._check_has_samples()
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.array([[ch.estimate(ti) for ch in self.channels_] for ti in t])

    def fir_coefficients(self, t=None) -> np.ndarray:
        """Weights ``c`` with ``estimate(t) = c @ window_values`` per channel.

        Returns shape ``(n_channels, window)``; ``t`` defaults to the newest
        sample time.
        """
        self._check_has_samples()
        if t is None:
            t = self.last_t_
        return np.array([ch.fir_coefficients(t) for ch in self.channels_])

    @property
    def hyperparameters_(self) -> list[Hyperparameters]:
        self._check_has_samples(require_samples=False)
        return [ch.hp for ch in self.channels_]

    def _check_has_samples(self, require_samples=True):
        if not hasattr(self, "channels_"):
            raise NotFittedError("SlidingWindowGP has not seen any data")
        if require_samples and self.channels_[0].posterior is None:
            raise ValueError("filter has no samples yet")
