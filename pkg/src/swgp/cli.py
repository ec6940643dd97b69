"""Command-line front end: ``swgp <subcommand> [options]``.

Every numeric option may also come from ``--config FILE`` (``key = value``
lines, ``#`` comments, keys spelled like the long option with or without
dashes). Flags override file values. The resolved configuration is echoed to
stderr. Exit codes: 0 success, 1 numerical failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from . import csvio
from .bench import benchmark_latency
from .error_analysis import error_decomposition
from .filter import SlidingWindowGP
from .kernels import Hyperparameters
from .robot import ClosedLoopConfig, TrajectoryLog, compare_seed
from .signals import bode_sweep, compare_filters, default_baselines, frequency_grid, n_jobs_default


class UsageError(Exception):
    pass


@dataclass
class Param:
    type: type
    default: object
    help: str
    check: object = None  # callable(value) -> bool

    def convert(self, raw):
        if self.type is bool:
            if isinstance(raw, bool):
                return raw
            s = str(raw).strip().lower()
            if s in ("1", "true", "yes", "on"):
                return True
            if s in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return self.type(raw)


def positive(v):
    return v > 0


def non_negative(v):
    return v >= 0


def _freqs(v):
    return v.strip() != ""


FILTER_PARAMS = {
    "window": Param(int, 200, "sliding window length", positive),
    "sigma_f": Param(float, 1.0, "initial signal std", positive),
    "lengthscale": Param(float, 0.1, "initial lengthscale [s]", positive),
    "sigma_on": Param(float, math.sqrt(0.1), "initial assumed noise std", positive),
    "adapt": Param(bool, True, "adapt hyperparameters online"),
    "eta_plus": Param(float, 1.2, "RPROP step growth factor", lambda v: v > 1),
    "eta_minus": Param(float, 0.5, "RPROP step shrink factor", lambda v: 0 < v < 1),
    "delta_init": Param(float, 0.01, "initial RPROP step (log units)", positive),
    "delta_min": Param(float, 1e-6, "minimum RPROP step", positive),
    "delta_max": Param(float, 0.5, "maximum RPROP step", positive),
    "decimation": Param(int, 1, "refresh hyperparameters every k-th sample", positive),
}

COMMANDS = {
    "filter": {
        "help": "filter a CSV signal (columns t,y1..yd) with the sliding-window GP",
        "params": {**FILTER_PARAMS, "sample_period": Param(float, 0.0, "sampling period; 0 infers it from t", non_negative)},
    },
    "bode": {
        "help": "measure a frequency response and write f,amplitude,phase",
        "params": {
            "filter": Param(str, "swgp", "swgp|lowpass1|butterworth4|moving_average|savitzky_golay3"),
            **FILTER_PARAMS,
            "adapt": Param(bool, False, "adapt hyperparameters online"),
            "fs": Param(float, 1000.0, "sampling rate [Hz]", positive),
            "cutoff_hz": Param(float, 20.0, "baseline cutoff frequency [Hz]", positive),
            "freqs": Param(str, "100", "number of log-spaced points or comma-separated list [Hz]", _freqs),
            "f_min": Param(float, 0.01, "lowest frequency of the grid", positive),
            "f_max": Param(float, 100.0, "highest frequency of the grid", positive),
        },
    },
    "mse": {
        "help": "MSE of SW-GP and baseline filters versus frequency (noisy sines)",
        "params": {
            "filters": Param(str, "swgp,lowpass1,butterworth4,moving_average,savitzky_golay3", "comma-separated filters", _freqs),
            **FILTER_PARAMS,
            "fs": Param(float, 1000.0, "sampling rate [Hz]", positive),
            "cutoff_hz": Param(float, 20.0, "baseline cutoff frequency [Hz]", positive),
            "freqs": Param(str, "9", "number of log-spaced points or comma-separated list [Hz]", _freqs),
            "f_min": Param(float, 0.01, "lowest frequency of the grid", positive),
            "f_max": Param(float, 100.0, "highest frequency of the grid", positive),
            "reps": Param(int, 20, "repetitions per frequency", positive),
            "duration": Param(float, 1.0, "run length [s]", positive),
            "min_periods": Param(float, 2.0, "lengthen runs to cover this many periods (0 = strict duration)", non_negative),
            "noise": Param(str, "gaussian", "gaussian|uniform"),
            "noise_var": Param(float, 0.1, "noise variance", non_negative),
        },
    },
    "robot": {
        "help": "closed-loop two-link manipulator with and without the filter",
        "params": {
            "reps": Param(int, 20, "number of seeds", positive),
            "duration": Param(float, 20.0, "simulated time [s]", positive),
            "window": Param(int, 50, "sliding window length", positive),
            "decimation": Param(int, 3, "filter refresh every k-th tick", positive),
            "kp": Param(float, 100.0, "proportional gain", positive),
            "kd": Param(float, 10.0, "derivative gain", non_negative),
            "sigma_on": Param(float, 0.1, "joint-angle measurement noise std", non_negative),
            "fs": Param(float, 1000.0, "control rate [Hz]", positive),
            "velocity_source": Param(str, "filtered", "filtered|raw"),
            "traj_seeds": Param(int, 1, "write trajectory logs for this many seeds", non_negative),
        },
    },
    "bench": {
        "help": "update/predict latency of the streaming filter",
        "params": {
            "window": Param(int, 50, "sliding window length", positive),
            "calls": Param(int, 10000, "number of timed calls", positive),
            "decimation": Param(int, 1, "refresh every k-th sample", positive),
        },
    },
    "decompose": {
        "help": "exact error decomposition on random scenarios",
        "params": {
            "rows": Param(int, 100, "number of random scenarios", positive),
            "window": Param(int, 20, "maximum window length", positive),
            "noise_std": Param(float, 0.3, "noise std", non_negative),
        },
    },
}

DEFAULT_OUT = {
    "filter": "filtered.csv",
    "bode": "bode.csv",
    "mse": "mse.csv",
    "robot": "robot_out",
    "bench": "",
    "decompose": "decomposition.csv",
}


def flag(name):
    return "--" + name.replace("_", "-")


def build_parser():
    parser = argparse.ArgumentParser(prog="swgp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, spec in COMMANDS.items():
        p = sub.add_parser(name, help=spec["help"], description=spec["help"])
        if name == "filter":
            p.add_argument("input", help="input CSV with columns t,y1..yd")
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
        p.add_argument("--out", default=None, help=f"output path (default {DEFAULT_OUT[name] or 'stdout'})")
        for key, par in spec["params"].items():
            if par.type is bool:
                p.add_argument(flag(key), dest=key, default=None, type=str, metavar="BOOL", help=f"{par.help} (default {par.default})")
            else:
                p.add_argument(flag(key), dest=key, default=None, type=str, help=f"{par.help} (default {par.default})")
    return parser


def read_config(path, params):
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"--config: {exc}") from None
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"--config {path}:{lineno}: expected key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in params and key not in ("seed", "out"):
            raise UsageError(f"--config {path}:{lineno}: unknown key {key!r}")
        values[key] = raw
    return values


def resolve(args, command):
    """Defaults, then config file, then flags; converted and range-checked."""
    params = COMMANDS[command]["params"]
    raw = {}
    if args.config:
        raw.update(read_config(args.config, params))
    for key in params:
        if getattr(args, key) is not None:
            raw[key] = getattr(args, key)
    for key in ("seed", "out"):
        if getattr(args, key) is not None:
            raw[key] = getattr(args, key)
    resolved = {}
    for key, par in params.items():
        value = par.default
        if key in raw:
            try:
                value = par.convert(raw[key])
            except ValueError:
                raise UsageError(f"{flag(key)}: invalid value {raw[key]!r}") from None
        if par.check is not None and not par.check(value):
            raise UsageError(f"{flag(key)}: value {value!r} out of range")
        resolved[key] = value
    try:
        resolved["seed"] = int(raw.get("seed", 0))
    except ValueError:
        raise UsageError(f"--seed: invalid value {raw['seed']!r}") from None
    resolved["out"] = raw.get("out", DEFAULT_OUT[command])
    return resolved


def echo_config(command, cfg, stream=None):
    stream = sys.stderr if stream is None else stream
    print(f"# swgp {command} resolved configuration", file=stream)
    for key in sorted(cfg):
        print(f"{key} = {cfg[key]}", file=stream)


def parse_freqs(cfg):
    text = cfg["freqs"].strip()
    if "," not in text:
        try:
            n = int(text)
        except ValueError:
            n = None
        if n is not None:
            if n < 1:
                raise UsageError("--freqs: need at least one frequency")
            if cfg["f_max"] < cfg["f_min"]:
                raise UsageError("--f-max: must not be below --f-min")
            return frequency_grid(cfg["f_min"], cfg["f_max"], n_points=n)
    try:
        freqs = np.array([float(s) for s in text.split(",") if s.strip()])
    except ValueError:
        raise UsageError(f"--freqs: cannot parse {text!r}") from None
    if freqs.size == 0 or np.any(freqs <= 0):
        raise UsageError("--freqs: frequencies must be positive")
    return freqs


def make_swgp(cfg, sample_period):
    if not cfg["delta_min"] <= cfg["delta_init"] <= cfg["delta_max"]:
        raise UsageError("--delta-init: must lie within [--delta-min, --delta-max]")
    return SlidingWindowGP(
        window=cfg["window"],
        sample_period=sample_period,
        sigma_f=cfg["sigma_f"],
        lengthscale=cfg["lengthscale"],
        sigma_on=cfg["sigma_on"],
        adapt=cfg["adapt"],
        eta_plus=cfg["eta_plus"],
        eta_minus=cfg["eta_minus"],
        delta_init=cfg["delta_init"],
        delta_min=cfg["delta_min"],
        delta_max=cfg["delta_max"],
        update_decimation=cfg["decimation"],
    )


def make_filters(names, cfg, fs):
    baselines = default_baselines(cfg["cutoff_hz"], cfg["window"], fs)
    if cfg["cutoff_hz"] >= fs / 2:
        raise UsageError("--cutoff-hz: must be below half the sampling rate")
    out = {}
    for name in names:
        if name == "swgp":
            out[name] = make_swgp(cfg, 1.0 / fs)
        elif name in baselines:
            out[name] = baselines[name]
        else:
            raise UsageError(f"unknown filter {name!r}")
    return out


# -- subcommands ---------------------------------------------------------------


def cmd_filter(cfg, input_path):
    try:
        header, rows = csvio.read_numeric(input_path, expected_prefix=["t"])
    except csvio.CsvFormatError as exc:
        raise UsageError(f"{input_path}: {exc}") from None
    except OSError as exc:
        raise UsageError(str(exc)) from None
    if len(header) < 2:
        raise UsageError(f"{input_path}: line 1: need columns t,y1..yd")
    if not rows:
        raise UsageError(f"{input_path}: no samples")
    data = np.array(rows)
    t, Y = data[:, 0], data[:, 1:]
    if not np.all(np.isfinite(data)):
        bad = int(np.argmax(~np.all(np.isfinite(data), axis=1)))
        raise UsageError(f"{input_path}: line {bad + 2}: non-finite value")
    steps = np.diff(t)
    if np.any(steps <= 0):
        bad = int(np.argmax(steps <= 0))
        raise UsageError(f"{input_path}: line {bad + 3}: time stamps must be strictly increasing")
    period = cfg["sample_period"] or (float(np.median(steps)) if steps.size else 1e-3)
    model = make_swgp(cfg, period)
    est = model.fit_transform(Y, t=t)
    d = Y.shape[1]
    out_header = ["t"] + [f"x{i + 1}_hat" for i in range(d)]
    csvio.write_csv(cfg["out"], out_header, np.column_stack([t, est]).tolist())
    hyper_rows = [[i + 1, hp.sigma_f, hp.lengthscales[0], hp.sigma_on] for i, hp in enumerate(model.hyperparameters_)]
    csvio.write_csv(hyper_path(cfg["out"]), ["dim", "sigma_f", "lengthscale", "sigma_on"], hyper_rows)
    return 0


def hyper_path(out):
    root, ext = os.path.splitext(out)
    return root + ".hyper" + (ext or ".csv")


def cmd_bode(cfg):
    fs = cfg["fs"]
    freqs = parse_freqs(cfg)
    if np.any(freqs >= fs / 2):
        raise UsageError("--freqs: frequencies must be below half the sampling rate")
    filt = make_filters([cfg["filter"]], cfg, fs)[cfg["filter"]]
    points = bode_sweep(filt, freqs, fs)
    rows = [[p.frequency_hz, p.amplitude_ratio, p.phase_rad] for p in points]
    csvio.write_csv(cfg["out"], ["f", "amplitude", "phase"], rows)
    return 0


def cmd_mse(cfg):
    fs = cfg["fs"]
    freqs = parse_freqs(cfg)
    if cfg["noise"] not in ("gaussian", "uniform"):
        raise UsageError("--noise: must be gaussian or uniform")
    names = [s.strip() for s in cfg["filters"].split(",") if s.strip()]
    filters = make_filters(names, cfg, fs)
    if cfg["noise"] == "gaussian":
        scale = math.sqrt(cfg["noise_var"])
    else:
        scale = math.sqrt(3.0 * cfg["noise_var"])
    rows = compare_filters(
        filters,
        freqs,
        noise=cfg["noise"],
        noise_scale=scale,
        duration_s=cfg["duration"],
        repetitions=cfg["reps"],
        fs_hz=fs,
        seed=cfg["seed"],
        min_periods=cfg["min_periods"],
    )
    csvio.write_csv(cfg["out"], ["f", "filter_name", "mse_mean", "mse_std"], rows)
    return 0


def cmd_robot(cfg):
    if cfg["velocity_source"] not in ("filtered", "raw"):
        raise UsageError("--velocity-source: must be filtered or raw")
    config = ClosedLoopConfig(
        kp=cfg["kp"],
        kd=cfg["kd"],
        fs_hz=cfg["fs"],
        sigma_on=cfg["sigma_on"],
        window=cfg["window"],
        update_decimation=cfg["decimation"],
        duration_s=cfg["duration"],
        repetitions=cfg["reps"],
        velocity_source=cfg["velocity_source"],
    )
    seeds = [cfg["seed"] + k for k in range(cfg["reps"])]
    results = Parallel(n_jobs=n_jobs_default())(delayed(compare_seed)(config, s) for s in seeds)
    out_dir = cfg["out"]
    os.makedirs(out_dir, exist_ok=True)
    summary = []
    for k, (seed, (mf, mu, logs)) in enumerate(zip(seeds, results)):
        summary.append([seed, mf, mu])
        if k < cfg["traj_seeds"]:
            for tag, log in zip(("noiseless", "filtered", "unfiltered"), logs):
                path = os.path.join(out_dir, f"trajectory_seed{seed}_{tag}.csv")
                csvio.write_csv(path, TrajectoryLog.COLUMNS, log.as_array().tolist())
    csvio.write_csv(os.path.join(out_dir, "summary.csv"), ["seed", "mse_filtered", "mse_unfiltered"], summary)
    return 0


def cmd_bench(cfg):
    res = benchmark_latency(cfg["window"], cfg["calls"], seed=cfg["seed"], update_decimation=cfg["decimation"])
    rows = [[k, res[k]] for k in ("update_mean", "update_std", "predict_mean", "predict_std")]
    if cfg["out"]:
        csvio.write_csv(cfg["out"], ["metric", "seconds"], rows)
    for k, v in rows:
        print(f"{k} = {v * 1e3:.4f} ms")
    return 0


def random_scenario(rng, max_window, noise_std):
    """Random window, hyperparameters and smooth signal for the decomposition."""
    n = int(rng.integers(1, max_window + 1))
    hp = Hyperparameters(*np.exp(rng.uniform(np.log(0.05), np.log(5.0), 3)))
    tau = float(rng.uniform(0.01, 0.5))
    amp, freq, phase = rng.normal(size=3)
    times = np.arange(n) * tau

    def x(t):
        return amp * np.sin(freq * t + phase)

    t_eval = times[-1] + float(rng.uniform(0.0, tau))
    noise = rng.normal(0.0, noise_std, n)
    return times, x(times), noise, hp, t_eval, float(x(t_eval))


def cmd_decompose(cfg):
    rng = np.random.default_rng(cfg["seed"])
    rows = []
    for _ in range(cfg["rows"]):
        times, truth, noise, hp, t_eval, x_t = random_scenario(rng, cfg["window"], cfg["noise_std"])
        d = error_decomposition(times, truth, noise, hp, t_eval, x_t)
        rows.append([d.delta_t, d.prior_attenuation, d.signal_variation, d.noise_passthrough, d.total, d.direct_error])
    header = ["term_delta_t", "term_prior", "term_signal", "term_noise", "total", "direct_error"]
    csvio.write_csv(cfg["out"], header, rows)
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    try:
        cfg = resolve(args, command)
        echo_config(command, cfg)
        if command == "filter":
            return cmd_filter(cfg, args.input)
        return {
            "bode": cmd_bode,
            "mse": cmd_mse,
            "robot": cmd_robot,
            "bench": cmd_bench,
            "decompose": cmd_decompose,
        }[command](cfg)
    except (UsageError, ValueError) as exc:
        print(f"swgp {command}: error: {exc}", file=sys.stderr)
        return 2
    except (np.linalg.LinAlgError, FloatingPointError, RuntimeError) as exc:
        print(f"swgp {command}: numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
