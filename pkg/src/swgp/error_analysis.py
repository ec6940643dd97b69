"""Exact error decomposition and error bounds for a sliding-window GP.

All functions work on one window of a scalar, time-indexed stream with
fixed hyperparameters. Sub-window ``i`` is the first ``i`` samples of the
window; ``mu_i`` / ``var_i`` denote the posterior on that sub-window
(``i = 0`` is the prior).

The estimation error at time ``t`` splits exactly into

    mu_N(t) - x(t) = future + prior + variation + noise

with, for ``r_k = sigma_on^2 / (var_{k-1}(t_k) + sigma_on^2)`` and
``|nu_n| = prod_{k>n} r_k``::

    future    = mu_N(t) - mu_N(t_N) - (x(t) - x_N)
    prior     = -|nu_0| x_1
    variation = -sum_{n<N} |nu_n| (x_{n+1} - x_n + mu_n(t_n) - mu_n(t_{n+1}))
    noise     =  sum_n |nu_n| eta_n eps_n

``nus`` are reported with the per-step factors ``-r_k`` (alternating
signs); the terms above use their magnitudes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gp
from .kernels import Hyperparameters, as_inputs, kernel_matrix, kernel_vector

NEAR_SINGULAR = 1e-14


class NearSingularError(np.linalg.LinAlgError):
    pass


@dataclass
class ErrorDecomposition:
    delta_t: float
    prior_attenuation: float
    signal_variation: float
    noise_passthrough: float
    etas: np.ndarray
    nus: np.ndarray
    direct_error: float = float("nan")

    @property
    def total(self) -> float:
        return self.delta_t + self.prior_attenuation + self.signal_variation + self.noise_passthrough


@dataclass
class UniformBound:
    value: float
    lip_mu: np.ndarray
    lip_x: float
    eps_bar: float
    method: str = field(default="max |d mu_n/dt| on a grid of pitch tau/100 over the window plus tau")


def block_inverse_update(A_inv_prev, k_vec, k_self, sigma_on) -> np.ndarray:
    """Grow ``A^-1`` by one bordering row/column without refactorizing.

    ``A_inv_prev`` is the inverse for the first ``n-1`` points, ``k_vec``
    their covariances with the new point and ``k_self`` its prior variance.
    """
    A_inv_prev = np.asarray(A_inv_prev, dtype=float).reshape(len(k_vec), len(k_vec))
    k_vec = np.asarray(k_vec, dtype=float)
    a = A_inv_prev @ k_vec
    denom = k_self - k_vec @ a + sigma_on**2
    if denom < NEAR_SINGULAR:
        raise NearSingularError(f"bordering denominator {denom:.3e} is numerically zero")
    n = k_vec.size
    out = np.zeros((n + 1, n + 1))
    out[:n, :n] = A_inv_prev
    border = np.append(a, -1.0)
    out += np.outer(border, border) / denom
    return out


def incremental_inverse(times, hp: Hyperparameters):
    """Inverse of ``K + sigma_on^2 I`` built one point at a time.

    Yields ``(A_inv_i, var_prev_i)`` for ``i = 1..N``, where ``var_prev_i``
    is the predictive variance of sub-window ``i-1`` at the ``i``-th time.
    """
    Z = as_inputs(times)
    A_inv = np.zeros((0, 0))
    for i in range(Z.shape[0]):
        k_vec = kernel_vector(Z[i], Z[:i], hp) if i else np.zeros(0)
        k_self = hp.sigma_f**2
        var_prev = k_self - k_vec @ A_inv @ k_vec
        A_inv = block_inverse_update(A_inv, k_vec, k_self, hp.sigma_on)
        yield A_inv, var_prev


def eta_nu_sequences(times, hp: Hyperparameters):
    """Noise pass-through factors ``eta_1..eta_N`` and couplings ``nu_0..nu_N``.

    ``nus[n]`` is the product of the per-step factors ``-r_k`` for
    ``k = n+1..N``; ``nus[N] = 1``.
    """
    var_prev = np.array([v for _, v in incremental_inverse(times, hp)])
    if var_prev.size == 0:
        raise ValueError("window must not be empty")
    noise_var = hp.sigma_on**2
    etas = var_prev / (var_prev + noise_var)
    factors = -noise_var / (var_prev + noise_var)
    # nus[n] = prod(factors[n:]) with factors[k-1] belonging to step k
    nus = np.append(np.cumprod(factors[::-1])[::-1], 1.0)
    return etas, nus


def _nested_means(times, y, hp):
    """Posterior means of each sub-window at its last and next time stamp."""
    Z = as_inputs(times)
    N = Z.shape[0]
    at_own = np.empty(N)
    at_next = np.empty(N)
    for i in range(1, N + 1):
        state = gp.fit(Z[:i], y[:i], hp)
        at_own[i - 1] = gp.predict_mean(state, Z[i - 1])
        at_next[i - 1] = gp.predict_mean(state, Z[i]) if i < N else np.nan
    return at_own, at_next, state


def error_decomposition(times, truth, noise, hp: Hyperparameters, t, x_at_t=None) -> ErrorDecomposition:
    """Split ``mu_N(t) - x(t)`` into future, prior, variation and noise terms.

    ``truth`` and ``noise`` are the noise-free values and the noise
    realizations at the window's time stamps. ``x_at_t`` is the true signal
    at ``t``; it may be omitted when ``t`` is the last time stamp.
    """
    times = np.asarray(times, dtype=float).reshape(-1)
    truth = np.asarray(truth, dtype=float).reshape(-1)
    noise = np.asarray(noise, dtype=float).reshape(-1)
    if not times.size == truth.size == noise.size or times.size == 0:
        raise ValueError("times, truth and noise must be non-empty and of equal length")
    if x_at_t is None:
        if t != times[-1]:
            raise ValueError("x_at_t is required when t is not the last sample time")
        x_at_t = truth[-1]
    y = truth + noise
    etas, nus = eta_nu_sequences(times, hp)
    mags = np.abs(nus)
    at_own, at_next, full = _nested_means(times, y, hp)

    mu_t = gp.predict_mean(full, t)
    delta_t = mu_t - at_own[-1] - (x_at_t - truth[-1])
    variations = truth[1:] - truth[:-1] + at_own[:-1] - at_next[:-1]
    return ErrorDecomposition(
        delta_t=float(delta_t),
        prior_attenuation=float(-mags[0] * truth[0]),
        signal_variation=float(-np.sum(mags[1:-1] * variations)),
        noise_passthrough=float(np.sum(mags[1:] * etas * noise)),
        etas=etas,
        nus=nus,
        direct_error=float(mu_t - x_at_t),
    )


def _max_mean_slope(state, grid):
    hp = state.hp
    Z = state.inputs[:, 0]
    diff = grid[:, None] - Z[None, :]
    K = hp.sigma_f**2 * np.exp(-0.5 * (diff / hp.lengthscales[0]) ** 2)
    slope = (-diff / hp.lengthscales[0] ** 2 * K) @ state.alpha
    return float(np.max(np.abs(slope)))


def uniform_error_bound(times, y, hp: Hyperparameters, eps_bar, tau, lip_x, x_first=None) -> UniformBound:
    """Worst-case bound on ``|mu_N(t) - x(t)|`` for ``t`` within ``tau`` after
    the window, given noise bounded by ``eps_bar`` and a signal with
    Lipschitz constant ``lip_x``.

    ``x_first`` is the true value at the first time stamp; without it
    ``|y_1| + eps_bar`` is used, which can only loosen the bound.
    """
    if eps_bar < 0 or lip_x < 0:
        raise ValueError("eps_bar and lip_x must be non-negative")
    times = np.asarray(times, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    etas, nus = eta_nu_sequences(times, hp)
    mags = np.abs(nus)
    first = abs(y[0]) + eps_bar if x_first is None else abs(x_first)
    pitch = tau / 100.0
    grid = np.arange(times[0], times[-1] + tau + pitch / 2, pitch)
    lip_mu = np.empty(times.size)
    for i in range(1, times.size + 1):
        state = gp.fit(times[:i], y[:i], hp)
        lip_mu[i - 1] = _max_mean_slope(state, grid)
    value = mags[0] * first + np.sum(mags[1:] * (etas * eps_bar + (lip_mu + lip_x) * tau))
    return UniformBound(float(value), lip_mu, float(lip_x), float(eps_bar))


def fir_coefficients(times, hp: Hyperparameters, t) -> np.ndarray:
    """Weights ``c`` with ``mu(t) = c @ y`` for any targets on ``times``."""
    Z = as_inputs(times)
    A = kernel_matrix(Z, hp) + hp.sigma_on**2 * np.eye(Z.shape[0])
    return np.linalg.solve(A, kernel_vector(t, Z, hp))
