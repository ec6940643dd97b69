"""Squared-exponential kernel, kernel matrices and hyperparameter partials."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Hyperparameters:
    """Signal std, per-dimension lengthscales and assumed noise std.

    The flat ordering used everywhere (gradients, log vectors) is
    ``[sigma_f, l_1, ..., l_rho, sigma_on]``.
    """

    sigma_f: float
    lengthscales: np.ndarray = field(default_factory=lambda: np.array([1.0]))
    sigma_on: float = 1.0

    def __post_init__(self):
        self.sigma_f = float(self.sigma_f)
        self.sigma_on = float(self.sigma_on)
        self.lengthscales = np.atleast_1d(np.asarray(self.lengthscales, dtype=float)).copy()
        if self.lengthscales.ndim != 1 or self.lengthscales.size == 0:
            raise ValueError("lengthscales must be a non-empty 1-d vector")
        if not (self.sigma_f > 0 and self.sigma_on > 0 and np.all(self.lengthscales > 0)):
            raise ValueError(f"hyperparameters must be strictly positive, got {self}")

    @property
    def n_dims(self) -> int:
        return self.lengthscales.size

    @property
    def n_params(self) -> int:
        return self.lengthscales.size + 2

    def to_vector(self) -> np.ndarray:
        return np.concatenate([[self.sigma_f], self.lengthscales, [self.sigma_on]])

    @classmethod
    def from_vector(cls, theta) -> "Hyperparameters":
        theta = np.asarray(theta, dtype=float)
        return cls(theta[0], theta[1:-1], theta[-1])

    def to_log(self) -> np.ndarray:
        return np.log(self.to_vector())

    @classmethod
    def from_log(cls, log_theta) -> "Hyperparameters":
        return cls.from_vector(np.exp(log_theta))

    @classmethod
    def from_log_trusted(cls, log_theta) -> "Hyperparameters":
        """``from_log`` without validation; exponentials are always positive."""
        theta = np.exp(log_theta)
        hp = object.__new__(cls)
        hp.sigma_f = float(theta[0])
        hp.lengthscales = theta[1:-1]
        hp.sigma_on = float(theta[-1])
        return hp

    def copy(self) -> "Hyperparameters":
        return Hyperparameters(self.sigma_f, self.lengthscales, self.sigma_on)


def as_inputs(Z, n_dims=None) -> np.ndarray:
    """Coerce points to an ``(N, rho)`` float array; scalars and 1-d arrays
    are treated as one-dimensional inputs (time stamps)."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 0:
        Z = Z.reshape(1, 1)
    elif Z.ndim == 1:
        Z = Z.reshape(-1, 1) if n_dims in (None, 1) else Z.reshape(1, -1)
    if Z.ndim != 2:
        raise ValueError(f"inputs must be at most 2-d, got shape {Z.shape}")
    if n_dims is not None and Z.shape[1] != n_dims:
        raise ValueError(
            f"input dimension {Z.shape[1]} does not match {n_dims} lengthscales"
        )
    return Z


class Kernel:
    """Interface for stationary covariance functions used by the GP code.

    Subclasses implement :meth:`matrix` and :meth:`partial`; everything else
    is derived from those.
    """

    def matrix(self, Z1, Z2, hp: Hyperparameters) -> np.ndarray:
        raise NotImplementedError

    def partial(self, Z, hp: Hyperparameters, which: int, K=None) -> np.ndarray:
        raise NotImplementedError

    def diag(self, Z, hp: Hyperparameters) -> np.ndarray:
        Z = as_inputs(Z, hp.n_dims)
        return np.array([self.matrix(z[None], z[None], hp)[0, 0] for z in Z])

    def __call__(self, z, z_prime, hp: Hyperparameters) -> float:
        z = as_inputs(z, hp.n_dims)
        z_prime = as_inputs(z_prime, hp.n_dims)
        if z.shape[0] != 1 or z_prime.shape[0] != 1:
            raise ValueError("kernel call expects single points")
        return float(self.matrix(z, z_prime, hp)[0, 0])


class SquaredExponential(Kernel):
    """``sigma_f^2 * exp(-sum_i (z_i - z'_i)^2 / (2 l_i^2))``."""

    def matrix(self, Z1, Z2, hp):
        Z1 = as_inputs(Z1, hp.n_dims)
        Z2 = as_inputs(Z2, hp.n_dims)
        scaled = (Z1[:, None, :] - Z2[None, :, :]) / hp.lengthscales
        return hp.sigma_f**2 * np.exp(-0.5 * np.sum(scaled**2, axis=-1))

    def diag(self, Z, hp):
        Z = as_inputs(Z, hp.n_dims)
        return np.full(Z.shape[0], hp.sigma_f**2)

    def partial(self, Z, hp, which, K=None):
        """Derivative of ``A = K + sigma_on^2 I`` w.r.t. one raw hyperparameter."""
        Z = as_inputs(Z, hp.n_dims)
        n = Z.shape[0]
        if not isinstance(which, (int, np.integer)) or not 0 <= which < hp.n_params:
            raise ValueError(f"hyperparameter index {which!r} out of range [0, {hp.n_params})")
        if which == hp.n_params - 1:
            return 2.0 * hp.sigma_on * np.eye(n)
        if K is None:
            K = symmetric_kernel_matrix(Z, hp, self)
        if which == 0:
            return 2.0 * K / hp.sigma_f
        i = which - 1
        diff = Z[:, None, i] - Z[None, :, i]
        return K * diff**2 / hp.lengthscales[i] ** 3


SE = SquaredExponential()


def symmetric_kernel_matrix(Z, hp, kernel: Kernel = SE) -> np.ndarray:
    K = kernel.matrix(Z, Z, hp)
    # mirror the upper triangle so symmetry is exact
    upper = np.triu(K)
    return upper + np.triu(K, 1).T


def se_kernel(z, z_prime, hp: Hyperparameters) -> float:
    """Covariance between two input points."""
    return SE(z, z_prime, hp)


def kernel_matrix(Z, hp: Hyperparameters, kernel: Kernel = SE) -> np.ndarray:
    """Exactly symmetric ``N x N`` covariance matrix of the points ``Z``."""
    Z = as_inputs(Z, hp.n_dims)
    if Z.shape[0] < 1:
        raise ValueError("kernel_matrix needs at least one point")
    return symmetric_kernel_matrix(Z, hp, kernel)


def kernel_vector(z, Z, hp: Hyperparameters, kernel: Kernel = SE) -> np.ndarray:
    """Covariances between one point ``z`` and each row of ``Z``."""
    z = as_inputs(z, hp.n_dims)
    if z.shape[0] != 1:
        raise ValueError("kernel_vector expects a single evaluation point")
    return kernel.matrix(Z, z, hp)[:, 0]


def kernel_matrix_partial(Z, hp: Hyperparameters, which: int, kernel: Kernel = SE) -> np.ndarray:
    return kernel.partial(Z, hp, which)
