import json

import numpy as np
import pytest

from volterra_ergodic.cli import (EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, SEED_ENV, format_meta, main, parse_meta,
                                  read_csv)


def simulate(path, *extra):
    return main(["simulate", "--process", "fbm", "--hurst", "0.7", "--T", "1", "--n", "64", "--paths", "100",
                 "-o", str(path), *extra])


def test_simulate_shape(tmp_path):
    out = tmp_path / "x.csv"
    assert simulate(out, "--seed", "42") == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# spec=fbm(H=0.7)")
    data = np.loadtxt(lines[2:], delimiter=",", ndmin=2)
    assert data.shape == (65, 101)


def test_simulate_deterministic(tmp_path):
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    simulate(a, "--seed", "42")
    simulate(b, "--seed", "42")
    simulate(c, "--seed", "43")
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_seed_from_environment(tmp_path, monkeypatch):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    simulate(a, "--seed", "5")
    monkeypatch.setenv(SEED_ENV, "5")
    simulate(b)
    assert a.read_bytes() == b.read_bytes()
    monkeypatch.setenv(SEED_ENV, "five")
    assert simulate(b) == EXIT_USAGE


def test_invalid_hurst(tmp_path):
    assert main(["simulate", "--process", "fbm", "--hurst", "1.2", "-o", str(tmp_path / "x.csv")]) == EXIT_USAGE
    assert not (tmp_path / "x.csv").exists()


def test_csv_round_trip_is_lossless(tmp_path):
    out = tmp_path / "x.csv"
    main(["simulate", "--process", "nalpha", "--alpha", "0.3", "--n", "16", "--paths", "3", "--seed", "1",
          "-o", str(out)])
    ens, meta = read_csv(out)
    assert meta["beta"] == repr(0.8)
    from volterra_ergodic.martingales import nalpha_path
    from volterra_ergodic.simulate import Seed, TimeGrid, sample_bm_increments
    g = TimeGrid.uniform_grid(1.0, 16)
    ref = nalpha_path(0.3, g, sample_bm_increments(g, 3, Seed(1)), rule="exact")
    assert np.array_equal(ens.values, ref.values)


@pytest.mark.parametrize("process", ["bridge", "mh", "yh"])
def test_other_processes(tmp_path, process):
    out = tmp_path / f"{process}.csv"
    assert main(["simulate", "--process", process, "--hurst", "0.3", "--alpha", "0.2", "--n", "8", "--paths", "2",
                 "-o", str(out)]) == EXIT_OK
    ens, _ = read_csv(out)
    if process == "bridge":
        assert np.all(ens.values[:, -1] == 0.0)


def test_transform_forward_and_iterate(tmp_path):
    x, y, z, w = (tmp_path / f"{n}.csv" for n in "xyzw")
    simulate(x, "--seed", "3")
    assert main(["transform", str(x), "--alpha", "0.2", "--beta", "0.7", "-o", str(y)]) == EXIT_OK
    assert main(["transform", str(y), "--alpha", "0.2", "-o", str(z)]) == EXIT_OK
    assert main(["transform", str(x), "--alpha", "0.2", "--iterate", "2", "-o", str(w)]) == EXIT_OK
    ey, _ = read_csv(y)
    ez, _ = read_csv(z)
    ew, mw = read_csv(w)
    assert ey.values.shape == (100, 65)
    assert np.array_equal(ez.values, ew.values)
    assert "Z^0.2^2" in mw["transform"]


def test_transform_beta_mismatch(tmp_path):
    x = tmp_path / "x.csv"
    simulate(x)
    assert main(["transform", str(x), "--alpha", "0.2", "--beta", "0.5", "-o", str(tmp_path / "y.csv")]) == EXIT_USAGE


def test_inverse(tmp_path):
    x, y = tmp_path / "x.csv", tmp_path / "y.csv"
    assert main(["transform", str(tmp_path / "missing.csv"), "--alpha", "0.2", "-o", str(y)]) == EXIT_USAGE
    simulate(x)
    # no extension beyond T
    assert main(["transform", str(x), "--alpha", "0.2", "--inverse", "--T", "1", "-o", str(y)]) == EXIT_USAGE
    assert main(["transform", str(x), "--alpha", "0.2", "--inverse", "-o", str(y)]) == EXIT_USAGE
    main(["simulate", "--process", "fbm", "--hurst", "0.7", "--n", "64", "--paths", "4", "--t-ext", "32",
          "-o", str(x)])
    assert main(["transform", str(x), "--alpha", "0.2", "--inverse", "--T", "1", "-o", str(y)]) == EXIT_OK
    header = y.read_text().splitlines()[1].split(",")
    assert header[-1] == "trunc_bound"
    ens, _ = read_csv(y)
    assert ens.grid.horizon == pytest.approx(1.0) and ens.n_paths == 4


def test_kernel_eval(capsys):
    assert main(["kernel-eval", "--hurst", "0.5", "--t", "2", "--s", "1"]) == EXIT_OK
    assert float(capsys.readouterr().out) == 1.0
    main(["kernel-eval", "--hurst", "0.7", "--t", "1", "--s", "0.5"])
    a = float(capsys.readouterr().out)
    main(["kernel-eval", "--hurst", "0.7", "--t", "2", "--s", "1"])
    b = float(capsys.readouterr().out)
    assert b == pytest.approx(2**0.2 * a, rel=1e-12)
    main(["kernel-eval", "--hurst", "0.7", "--t", "1", "--s", "2"])
    assert float(capsys.readouterr().out) == 0.0
    assert main(["kernel-eval", "--kernel", "power-markov", "--t", "1", "--s", "0.5"]) == EXIT_USAGE
    assert main(["kernel-eval", "--t", "1", "--s", "0"]) == EXIT_USAGE


def test_verify_kernels_suite(tmp_path):
    out = tmp_path / "r.json"
    assert main(["verify", "--suite", "kernels", "--seed", "7", "-o", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["pass"] and doc["config"]["options"]["seed"] == 7
    assert all(r["wall_time_s"] is not None for r in doc["reports"])


def test_verify_unknown_suite():
    assert main(["verify", "--suite", "nope"]) == EXIT_USAGE


def test_numeric_failure_exit_code(tmp_path, monkeypatch):
    from volterra_ergodic import cli
    from volterra_ergodic.errors import NotPositiveDefiniteError

    def boom(*a, **k):
        raise NotPositiveDefiniteError("singular")

    monkeypatch.setattr(cli, "sample_cholesky", boom)
    assert simulate(tmp_path / "x.csv", "--method", "cholesky") == EXIT_NUMERIC


def test_metadata_parsing():
    meta = {"spec": "power_markov(alpha=0.2, beta=0.7, c=1.0)", "beta": "0.7", "seed": 3}
    assert parse_meta(format_meta(meta)) == {k: str(v) for k, v in meta.items()}


def test_verify_report_independent_of_output_path(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["verify", "--suite", "kernels", "--seed", "7", "--no-timing", "-o", str(a)])
    main(["verify", "--suite", "kernels", "--seed", "7", "--no-timing", "-o", str(b)])
    assert a.read_bytes() == b.read_bytes()
    assert "output" not in json.loads(a.read_text())["config"]["options"]
