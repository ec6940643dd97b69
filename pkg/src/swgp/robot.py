"""Two-link planar manipulator under PD control with noisy joint sensing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .filter import SlidingWindowGP
from .signals import rng_for


class InstabilityError(RuntimeError):
    def __init__(self, t):
        super().__init__(f"closed loop diverged at t={t:.4f} s")
        self.t = t


@dataclass(frozen=True)
class ManipulatorParams:
    """Link masses, lengths, centre-of-mass offsets and inertias (SI units).

    Defaults: unit masses and lengths, centres at link midpoints and thin-rod
    inertias ``m l^2 / 12``. Gravity acts in the plane of motion.
    """

    m1: float = 1.0
    m2: float = 1.0
    l1: float = 1.0
    l2: float = 1.0
    lc1: float = 0.5
    lc2: float = 0.5
    I1: float = 1.0 / 12.0
    I2: float = 1.0 / 12.0
    g: float = 9.81

    def __post_init__(self):
        for f in fields(self):
            if f.name != "g" and not getattr(self, f.name) > 0:
                raise ValueError(f"{f.name} must be positive")


def mass_matrix(q, p: ManipulatorParams) -> np.ndarray:
    c2 = math.cos(q[1])
    m11 = p.m1 * p.lc1**2 + p.I1 + p.m2 * (p.l1**2 + p.lc2**2 + 2 * p.l1 * p.lc2 * c2) + p.I2
    m12 = p.m2 * (p.lc2**2 + p.l1 * p.lc2 * c2) + p.I2
    m22 = p.m2 * p.lc2**2 + p.I2
    return np.array([[m11, m12], [m12, m22]])


def coriolis(q, qdot, p: ManipulatorParams) -> np.ndarray:
    """Coriolis and centrifugal torques ``C(q, qdot) qdot``."""
    h = p.m2 * p.l1 * p.lc2 * math.sin(q[1])
    return np.array([-h * (2 * qdot[0] * qdot[1] + qdot[1] ** 2), h * qdot[0] ** 2])


def gravity(q, p: ManipulatorParams) -> np.ndarray:
    c1, c12 = math.cos(q[0]), math.cos(q[0] + q[1])
    return np.array([(p.m1 * p.lc1 + p.m2 * p.l1) * p.g * c1 + p.m2 * p.lc2 * p.g * c12, p.m2 * p.lc2 * p.g * c12])


def _accel(q1, q2, v1, v2, u1, u2, p):
    c2, s2 = math.cos(q2), math.sin(q2)
    m11 = p.m1 * p.lc1**2 + p.I1 + p.m2 * (p.l1**2 + p.lc2**2 + 2 * p.l1 * p.lc2 * c2) + p.I2
    m12 = p.m2 * (p.lc2**2 + p.l1 * p.lc2 * c2) + p.I2
    m22 = p.m2 * p.lc2**2 + p.I2
    h = p.m2 * p.l1 * p.lc2 * s2
    g12 = p.m2 * p.lc2 * p.g * math.cos(q1 + q2)
    r1 = u1 + h * (2 * v1 * v2 + v2 * v2) - (p.m1 * p.lc1 + p.m2 * p.l1) * p.g * math.cos(q1) - g12
    r2 = u2 - h * v1 * v1 - g12
    det = m11 * m22 - m12 * m12
    return (m22 * r1 - m12 * r2) / det, (m11 * r2 - m12 * r1) / det


def dynamics(q, qdot, u, p: ManipulatorParams) -> np.ndarray:
    """Joint accelerations ``M(q)^-1 (u - C(q, qdot) qdot - g(q))``."""
    return np.array(_accel(q[0], q[1], qdot[0], qdot[1], u[0], u[1], p))


def kinetic_energy(q, qdot, p: ManipulatorParams) -> float:
    qdot = np.asarray(qdot, dtype=float)
    return 0.5 * float(qdot @ mass_matrix(q, p) @ qdot)


def rk4_hold(state, u, h, n_steps, p):
    """Integrate ``n_steps`` RK4 steps of size ``h`` with constant torque."""
    q1, q2, v1, v2 = state
    u1, u2 = u
    for _ in range(n_steps):
        a1, a2 = _accel(q1, q2, v1, v2, u1, u2, p)
        b1, b2 = _accel(q1 + 0.5 * h * v1, q2 + 0.5 * h * v2, v1 + 0.5 * h * a1, v2 + 0.5 * h * a2, u1, u2, p)
        kv1, kv2 = v1 + 0.5 * h * a1, v2 + 0.5 * h * a2
        c1, c2 = _accel(q1 + 0.5 * h * kv1, q2 + 0.5 * h * kv2, v1 + 0.5 * h * b1, v2 + 0.5 * h * b2, u1, u2, p)
        lv1, lv2 = v1 + 0.5 * h * b1, v2 + 0.5 * h * b2
        d1, d2 = _accel(q1 + h * lv1, q2 + h * lv2, v1 + h * c1, v2 + h * c2, u1, u2, p)
        mv1, mv2 = v1 + h * c1, v2 + h * c2
        q1 += h / 6 * (v1 + 2 * kv1 + 2 * lv1 + mv1)
        q2 += h / 6 * (v2 + 2 * kv2 + 2 * lv2 + mv2)
        v1 += h / 6 * (a1 + 2 * b1 + 2 * c1 + d1)
        v2 += h / 6 * (a2 + 2 * b2 + 2 * c2 + d2)
    return q1, q2, v1, v2


def reference(t):
    """Joint reference ``[sin(0.1 t^2), 0.5 sin(0.1 t^2)]`` and its rate."""
    s = math.sin(0.1 * t * t)
    ds = 0.2 * t * math.cos(0.1 * t * t)
    return (s, 0.5 * s), (ds, 0.5 * ds)


@dataclass
class ClosedLoopConfig:
    kp: float = 100.0
    kd: float = 10.0
    fs_hz: float = 1000.0
    sigma_on: float = 0.1
    window: int = 50
    update_decimation: int = 3
    duration_s: float = 20.0
    substeps: int = 10
    repetitions: int = 20
    velocity_source: str = "filtered"  # or "raw"
    params: ManipulatorParams = field(default_factory=ManipulatorParams)
    filter_sigma_f: float = 1.0
    filter_lengthscale: float = 0.1
    filter_sigma_on: float = math.sqrt(0.1)
    divergence_limit: float = 1e3

    def make_filter(self) -> SlidingWindowGP:
        return SlidingWindowGP(
            window=self.window,
            sample_period=1.0 / self.fs_hz,
            sigma_f=self.filter_sigma_f,
            lengthscale=self.filter_lengthscale,
            sigma_on=self.filter_sigma_on,
            update_decimation=self.update_decimation,
        )


@dataclass
class TrajectoryLog:
    t: np.ndarray
    q: np.ndarray  # (n, 2) true joint angles
    qd: np.ndarray  # (n, 2) true joint rates
    q_meas: np.ndarray
    q_filt: np.ndarray
    u: np.ndarray

    @property
    def state(self) -> np.ndarray:
        return np.hstack([self.q, self.qd])

    COLUMNS = ("t", "q1", "q2", "qd1", "qd2", "q1_meas", "q2_meas", "q1_filt", "q2_filt", "u1", "u2")

    def as_array(self) -> np.ndarray:
        return np.column_stack([self.t, self.q, self.qd, self.q_meas, self.q_filt, self.u])


def run_closed_loop(config: ClosedLoopConfig, filter_mode="swgp", seed=0, noise=True) -> TrajectoryLog:
    """Simulate the PD loop; ``filter_mode`` is ``"none"`` or ``"swgp"``.

    At each control tick the joint angles are measured (with Gaussian noise
    unless ``noise=False``), optionally filtered, differentiated by a
    backward difference and fed to the PD law; the torque is held for one
    period while the dynamics are integrated with ``substeps`` RK4 steps.
    Logged values are taken at the tick, before the torque is applied.
    """
    if filter_mode not in ("none", "swgp"):
        raise ValueError(f"unknown filter mode {filter_mode!r}")
    if config.velocity_source not in ("filtered", "raw"):
        raise ValueError(f"unknown velocity source {config.velocity_source!r}")
    tau = 1.0 / config.fs_hz
    n = int(round(config.duration_s * config.fs_hz))
    p = config.params
    eps = rng_for(seed).normal(0.0, config.sigma_on, (n, 2)) if noise else np.zeros((n, 2))
    filt = config.make_filter() if filter_mode == "swgp" else None
    if filt is not None:
        filt.reset(2)

    log = np.empty((n, 11))
    state = (0.0, 0.0, 0.0, 0.0)
    prev_pos = prev_raw = None
    for k in range(n):
        t = k * tau
        meas = (state[0] + eps[k, 0], state[1] + eps[k, 1])
        if filt is not None:
            est = filt.step(t, meas)
            pos = (float(est[0]), float(est[1]))
        else:
            pos = meas
        diff_src = pos if config.velocity_source == "filtered" else meas
        prev = prev_pos if config.velocity_source == "filtered" else prev_raw
        vel = (0.0, 0.0) if prev is None else ((diff_src[0] - prev[0]) / tau, (diff_src[1] - prev[1]) / tau)
        prev_pos, prev_raw = pos, meas
        (r1, r2), (dr1, dr2) = reference(t)
        u = (
            -config.kp * (pos[0] - r1) - config.kd * (vel[0] - dr1),
            -config.kp * (pos[1] - r2) - config.kd * (vel[1] - dr2),
        )
        log[k] = (t, *state, *meas, *pos, *u)
        with np.errstate(over="ignore", invalid="ignore"):
            # a diverging state is detected and reported just below
            state = rk4_hold(state, u, tau / config.substeps, config.substeps, p)
        if not all(math.isfinite(s) and abs(s) <= config.divergence_limit for s in state[:2]):
            raise InstabilityError(t + tau)
    return TrajectoryLog(log[:, 0], log[:, 1:3], log[:, 3:5], log[:, 5:7], log[:, 7:9], log[:, 9:11])


def tracking_mse(log: TrajectoryLog, reference_log: TrajectoryLog) -> float:
    """Time-averaged squared state deviation from a reference run."""
    return float(np.mean(np.sum((log.state - reference_log.state) ** 2, axis=1)))


def compare_seed(config: ClosedLoopConfig, seed: int):
    """MSE of the filtered and unfiltered noisy loops against the loop fed
    with noiseless measurements.

    Returns ``(mse_filtered, mse_unfiltered, (clean, filtered, raw))`` where
    the last item holds the three trajectory logs.
    """
    clean = run_closed_loop(config, "none", seed, noise=False)
    filtered = run_closed_loop(config, "swgp", seed)
    raw = run_closed_loop(config, "none", seed)
    return tracking_mse(filtered, clean), tracking_mse(raw, clean), (clean, filtered, raw)
