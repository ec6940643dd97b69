"""Exact GP posterior on a fixed data set (zero prior mean)."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .kernels import SE, Hyperparameters, Kernel, as_inputs, kernel_vector, symmetric_kernel_matrix

LOG_2PI = np.log(2.0 * np.pi)

JITTER_START = 1e-10
JITTER_MAX = 1e-4
VARIANCE_CLAMP = -1e-12


class FactorizationError(np.linalg.LinAlgError):
    """``K + sigma_on^2 I`` could not be Cholesky-factorized, even with jitter."""

    def __init__(self, message, jitter=None, min_diag=None):
        super().__init__(message)
        self.jitter = jitter
        self.min_diag = min_diag


class InconsistentPosteriorError(RuntimeError):
    pass


@dataclass(eq=False)
class GpPosteriorState:
    inputs: np.ndarray
    targets: np.ndarray
    hp: Hyperparameters
    K: np.ndarray
    chol: np.ndarray  # lower triangular, A = L L^T
    alpha: np.ndarray
    jitter: float = 0.0
    kernel: Kernel = field(default=SE, repr=False)

    @property
    def n(self) -> int:
        return self.targets.size

    @property
    def A(self) -> np.ndarray:
        return self.K + (self.hp.sigma_on**2 + self.jitter) * np.eye(self.n)

    @cached_property
    def A_inv(self) -> np.ndarray:
        return cho_solve((self.chol, True), np.eye(self.n))

    def log_det(self) -> float:
        return 2.0 * np.sum(np.log(np.diag(self.chol)))


def _cholesky_with_jitter(A, sigma_f):
    try:
        return cholesky(A, lower=True, check_finite=False), 0.0
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER_START * sigma_f**2
    eye = np.eye(A.shape[0])
    while jitter <= JITTER_MAX * sigma_f**2 * (1 + 1e-12):
        try:
            return cholesky(A + jitter * eye, lower=True, check_finite=False), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise FactorizationError(
        f"A is not positive definite after jitter {jitter / 10:.1e} "
        f"(N={A.shape[0]}, min diag {np.min(np.diag(A)):.3e})",
        jitter=jitter / 10,
        min_diag=float(np.min(np.diag(A))),
    )


def fit(Z, y, hp: Hyperparameters, kernel: Kernel = SE, K=None) -> GpPosteriorState:
    """Factorize ``A = K + sigma_on^2 I`` and solve for ``alpha = A^-1 y``.

    A precomputed kernel matrix ``K`` may be supplied to skip its evaluation.
    """
    Z = as_inputs(Z, hp.n_dims)
    y = np.asarray(y, dtype=float).reshape(-1)
    if Z.shape[0] != y.size or y.size < 1:
        raise ValueError(f"need matching, non-empty inputs and targets (got {Z.shape[0]} and {y.size})")
    if K is None:
        K = symmetric_kernel_matrix(Z, hp, kernel)
    A = K + hp.sigma_on**2 * np.eye(y.size)
    L, jitter = _cholesky_with_jitter(A, hp.sigma_f)
    alpha = cho_solve((L, True), y, check_finite=False)
    return GpPosteriorState(Z, y, hp, K, L, alpha, jitter, kernel)


def predict_mean(state: GpPosteriorState, z) -> float:
    k = kernel_vector(z, state.inputs, state.hp, state.kernel)
    return float(k @ state.alpha)


def predict_variance(state: GpPosteriorState, z) -> float:
    k = kernel_vector(z, state.inputs, state.hp, state.kernel)
    v = solve_triangular(state.chol, k, lower=True, check_finite=False)
    prior = state.kernel.diag(z, state.hp)[0]
    var = float(prior - v @ v)
    if var < 0.0:
        if var < VARIANCE_CLAMP * max(1.0, state.hp.sigma_f**2):
            raise InconsistentPosteriorError(f"negative posterior variance {var:.3e}")
        return 0.0
    return var


def nll(state: GpPosteriorState) -> float:
    """Negative log marginal likelihood of the targets."""
    return 0.5 * float(state.targets @ state.alpha) + 0.5 * state.log_det() + 0.5 * state.n * LOG_2PI


def nll_gradient(state: GpPosteriorState, log_space: bool = False) -> np.ndarray:
    """Gradient of :func:`nll` w.r.t. ``[sigma_f, l..., sigma_on]``.

    With ``log_space=True`` the gradient is taken w.r.t. the logarithms of the
    hyperparameters, i.e. each component is multiplied by its hyperparameter.
    """
    hp = state.hp
    W = np.outer(state.alpha, state.alpha) - state.A_inv
    grad = np.empty(hp.n_params)
    for j in range(hp.n_params - 1):
        dA = state.kernel.partial(state.inputs, hp, j, K=state.K)
        grad[j] = -0.5 * np.sum(W * dA)
    # d A / d sigma_on = 2 sigma_on I
    grad[-1] = -hp.sigma_on * np.trace(W)
    if log_space:
        grad *= hp.to_vector()
    return grad
