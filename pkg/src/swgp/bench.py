"""Wall-clock latency of filter updates and predictions."""

from __future__ import annotations

import time

import numpy as np

from .filter import SlidingWindowGP


def benchmark_latency(window=50, n_calls=10_000, warmup=None, fs_hz=1000.0, seed=0, **filter_params):
    """Time ``n_calls`` push+refresh (update) and estimate (predict) calls.

    The filter is warmed up with ``warmup`` samples (default: one full
    window) first. Returns means/stds in seconds plus the raw per-call
    timings.
    """
    warmup = int(window) if warmup is None else warmup
    tau = 1.0 / fs_hz
    params = dict(window=window, sample_period=tau)
    params.update(filter_params)
    filt = SlidingWindowGP(**params).reset(1)
    ch = filt.channels_[0]
    rng = np.random.default_rng(seed)
    n_total = warmup + n_calls
    t = np.arange(n_total) * tau
    y = np.sin(2 * np.pi * 2.0 * t) + rng.normal(0.0, 0.3, n_total)
    for i in range(warmup):
        ch.push(t[i], y[i])
    update = np.empty(n_calls)
    predict = np.empty(n_calls)
    clock = time.perf_counter
    for j, i in enumerate(range(warmup, n_total)):
        t0 = clock()
        ch.push(t[i], y[i])
        t1 = clock()
        ch.estimate(t[i])
        t2 = clock()
        update[j] = t1 - t0
        predict[j] = t2 - t1
    return {
        "update_mean": float(update.mean()),
        "update_std": float(update.std()),
        "predict_mean": float(predict.mean()),
        "predict_std": float(predict.std()),
        "update_times": update,
        "predict_times": predict,
    }
