import csv
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swgp import SlidingWindowGP, csvio
from swgp.cli import main
from swgp.signals import SignalSpec, cutoff_frequency, generate, BodePoint


def read(path):
    header, rows = csvio.read_numeric(path)
    return header, np.array(rows)


def write_signal(path, t, Y):
    Y = np.asarray(Y).reshape(len(t), -1)
    header = ["t"] + [f"y{i + 1}" for i in range(Y.shape[1])]
    csvio.write_csv(path, header, np.column_stack([t, Y]).tolist())


class TestCsvIo:
    @given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
    def test_float_round_trip(self, values):
        text = csvio.dumps(["x"], [[v] for v in values])
        parsed = [float(line) for line in text.splitlines()[1:]]
        assert parsed == values

    def test_file_round_trip_is_byte_identical(self, tmp_path):
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        rows = np.random.default_rng(0).normal(size=(5, 3)).tolist()
        csvio.write_csv(p1, ["a", "b", "c"], rows)
        header, back = csvio.read_numeric(p1)
        csvio.write_csv(p2, header, back)
        assert p1.read_bytes() == p2.read_bytes()

    def test_errors_carry_line_numbers(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("t,y1\n0,1\n0.1,abc\n")
        with pytest.raises(csvio.CsvFormatError, match="line 3"):
            csvio.read_numeric(p)
        p.write_text("t,y1\n0,1,2\n")
        with pytest.raises(csvio.CsvFormatError, match="line 2"):
            csvio.read_numeric(p)
        p.write_text("time,y1\n0,1\n")
        with pytest.raises(csvio.CsvFormatError, match="line 1"):
            csvio.read_numeric(p, expected_prefix=["t"])

    def test_no_temp_files_left(self, tmp_path):
        csvio.write_csv(tmp_path / "x.csv", ["a"], [[1.0]])
        assert [p.name for p in tmp_path.iterdir()] == ["x.csv"]


class TestFilterCommand:
    def test_header_only_input(self, tmp_path, capsys):
        p = tmp_path / "in.csv"
        p.write_text("t,y1\n")
        assert main(["filter", str(p), "--out", str(tmp_path / "o.csv")]) == 2
        assert "no samples" in capsys.readouterr().err

    def test_non_monotone_time(self, tmp_path, capsys):
        p = tmp_path / "in.csv"
        p.write_text("t,y1\n0,1\n0.002,1\n0.001,1\n")
        assert main(["filter", str(p), "--out", str(tmp_path / "o.csv")]) == 2
        assert "line 4" in capsys.readouterr().err

    def test_malformed_line(self, tmp_path, capsys):
        p = tmp_path / "in.csv"
        p.write_text("t,y1\n0,1\n0.001,x\n")
        assert main(["filter", str(p), "--out", str(tmp_path / "o.csv")]) == 2
        assert "line 3" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["filter", str(tmp_path / "nope.csv")]) == 2

    def test_constant_column_matches_library(self, tmp_path):
        t = np.arange(60) * 1e-3
        write_signal(tmp_path / "in.csv", t, np.full(60, 2.0))
        out = tmp_path / "out.csv"
        code = main(["filter", str(tmp_path / "in.csv"), "--out", str(out), "--adapt", "false",
                     "--sigma-on", "10", "--window", "20", "--sample-period", "0.001"])
        assert code == 0
        header, data = read(out)
        assert header == ["t", "x1_hat"]
        lib = SlidingWindowGP(window=20, sigma_on=10.0, adapt=False, sample_period=1e-3)
        expected = lib.fit_transform(np.full((60, 1), 2.0), t=t)
        np.testing.assert_array_equal(data[:, 1], expected[:, 0])
        assert np.all(data[:, 1] < 2.0) and np.all(data[:, 1] > 0.0)

    def test_signal_file_matches_in_memory_run(self, tmp_path):
        s = generate(SignalSpec("sine", 10.0, duration_s=0.3, noise="gaussian", noise_scale=math.sqrt(0.1), seed=7))
        write_signal(tmp_path / "in.csv", s.t, np.column_stack([s.noisy, -s.noisy]))
        out = tmp_path / "out.csv"
        assert main(["filter", str(tmp_path / "in.csv"), "--out", str(out), "--window", "50",
                     "--sample-period", "0.001"]) == 0
        _, data = read(out)
        lib = SlidingWindowGP(window=50, sample_period=1e-3)
        expected = lib.fit_transform(np.column_stack([s.noisy, -s.noisy]), t=s.t)
        assert data[:, 1:].tobytes() == expected.tobytes()
        h, hyper = read(tmp_path / "out.hyper.csv")
        assert h == ["dim", "sigma_f", "lengthscale", "sigma_on"]
        np.testing.assert_array_equal(hyper[:, 1:], [hp.to_vector() for hp in lib.hyperparameters_])

    def test_config_file_and_flag_precedence(self, tmp_path, capsys):
        write_signal(tmp_path / "in.csv", np.arange(10) * 1e-3, np.ones(10))
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# comment\nwindow = 5\nlengthscale=0.2\n")
        assert main(["filter", str(tmp_path / "in.csv"), "--config", str(cfg), "--window", "7",
                     "--out", str(tmp_path / "o.csv")]) == 0
        err = capsys.readouterr().err
        assert "window = 7" in err and "lengthscale = 0.2" in err

    def test_unknown_config_key(self, tmp_path, capsys):
        write_signal(tmp_path / "in.csv", [0.0], [1.0])
        cfg = tmp_path / "run.cfg"
        cfg.write_text("windoe = 5\n")
        assert main(["filter", str(tmp_path / "in.csv"), "--config", str(cfg)]) == 2
        assert "windoe" in capsys.readouterr().err


class TestParameterValidation:
    @pytest.mark.parametrize(
        "argv, flag",
        [
            (["bode", "--window", "0"], "--window"),
            (["bode", "--lengthscale", "-1"], "--lengthscale"),
            (["mse", "--eta-plus", "0.9"], "--eta-plus"),
            (["mse", "--eta-minus", "1.5"], "--eta-minus"),
            (["mse", "--reps", "0"], "--reps"),
            (["mse", "--cutoff-hz", "abc"], "--cutoff-hz"),
            (["robot", "--decimation", "0"], "--decimation"),
            (["bench", "--calls", "-5"], "--calls"),
            (["decompose", "--rows", "0"], "--rows"),
            (["bode", "--adapt", "maybe"], "--adapt"),
            (["bode", "--freqs", "1,-2"], "--freqs"),
            (["mse", "--duration", "0"], "--duration"),
        ],
    )
    def test_bad_ranges_exit_2_naming_flag(self, argv, flag, capsys):
        assert main(argv) == 2
        assert flag in capsys.readouterr().err

    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as info:
            main(["bode", "--bogus", "1"])
        assert info.value.code == 2


class TestSubcommands:
    def test_bode_crossing(self, tmp_path):
        out = tmp_path / "bode.csv"
        assert main(["bode", "--freqs", "9", "--f-min", "5", "--f-max", "60", "--out", str(out)]) == 0
        header, data = read(out)
        assert header == ["f", "amplitude", "phase"]
        fc = cutoff_frequency([BodePoint(f, a, p) for f, a, p in data])
        assert 13.0 <= fc <= 27.0

    def test_bode_baseline(self, tmp_path):
        out = tmp_path / "bode.csv"
        assert main(["bode", "--filter", "lowpass1", "--freqs", "20,40", "--out", str(out)]) == 0
        _, data = read(out)
        assert data[0, 1] == pytest.approx(1 / math.sqrt(2), rel=0.02)

    def test_mse_is_reproducible(self, tmp_path):
        argv = ["mse", "--reps", "1", "--freqs", "1,30", "--seed", "3", "--filters", "swgp,butterworth4",
                "--window", "50"]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(argv + ["--out", str(a)]) == 0
        assert main(argv + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        with open(a) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["f", "filter_name", "mse_mean", "mse_std"]
        assert [r[1] for r in rows[1:]] == ["swgp", "butterworth4"] * 2

    def test_mse_unknown_filter(self, tmp_path):
        assert main(["mse", "--filters", "kalman", "--out", str(tmp_path / "m.csv")]) == 2

    def test_decompose_oracle(self, tmp_path):
        out = tmp_path / "d.csv"
        assert main(["decompose", "--rows", "50", "--seed", "1", "--out", str(out)]) == 0
        header, data = read(out)
        assert header[-2:] == ["total", "direct_error"]
        np.testing.assert_allclose(data[:, :4].sum(axis=1), data[:, 4], rtol=1e-12, atol=1e-15)
        assert np.all(np.abs(data[:, 4] - data[:, 5]) < 1e-9)

    def test_robot_outputs(self, tmp_path):
        out = tmp_path / "robot"
        argv = ["robot", "--reps", "2", "--duration", "0.2", "--traj-seeds", "1", "--seed", "5", "--out", str(out)]
        assert main(argv) == 0
        names = sorted(p.name for p in out.iterdir())
        assert names == [
            "summary.csv",
            "trajectory_seed5_filtered.csv",
            "trajectory_seed5_noiseless.csv",
            "trajectory_seed5_unfiltered.csv",
        ]
        header, summary = read(out / "summary.csv")
        assert header == ["seed", "mse_filtered", "mse_unfiltered"]
        np.testing.assert_array_equal(summary[:, 0], [5, 6])
        first = (out / "summary.csv").read_bytes()
        assert main(argv) == 0
        assert (out / "summary.csv").read_bytes() == first

    def test_bench(self, tmp_path, capsys):
        out = tmp_path / "bench.csv"
        assert main(["bench", "--window", "10", "--calls", "200", "--out", str(out)]) == 0
        assert "update_mean" in capsys.readouterr().out
        header, data = read_metrics(out)
        assert header == ["metric", "seconds"]
        assert all(v > 0 for v in data.values())

    def test_console_script_entry_point(self, tmp_path):
        out = tmp_path / "d.csv"
        proc = subprocess.run(
            [sys.executable, "-m", "swgp.cli", "decompose", "--rows", "3", "--out", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert out.exists()


def read_metrics(path):
    header, rows = csvio.read_csv(path)
    return header, {r[0]: float(r[1]) for r in rows}
