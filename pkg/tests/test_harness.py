import csv
import json
import math

import numpy as np
import pytest

from fracfga import cli, io
from fracfga.config import ConfigError, RunConfig
from fracfga.grid import Grid, GridMismatchError, ResolutionError, WaveField
from fracfga.harness import (ErrorRecord, SlopeFit, convergence_sweep, error_table, fit_slope, l2_error,
                             reference_solution, wkb_initial, write_tables)


class TestWkb:
    def test_ex1d_values(self):
        eps = 2.0 ** -6
        grid = Grid.uniform(((0.0, 2.0),), eps)
        psi = wkb_initial("Ex1D", eps, grid)
        i = np.argmin(np.abs(grid.axes[0] - 1.0))
        assert psi.values[i] == pytest.approx(math.sqrt(64 / math.pi) * np.exp(1j / eps), rel=1e-13)

    def test_ex1d_norm(self):
        # int (64/pi) exp(-128 (x-1)^2) dx = (64/pi) sqrt(pi/128) = sqrt(32/pi)
        eps = 2.0 ** -6
        psi = wkb_initial("Ex1D", eps, Grid.uniform(((0.0, 2.0),), eps))
        assert psi.norm() ** 2 == pytest.approx(math.sqrt(32 / math.pi), rel=1e-6)

    def test_ex2d_peak(self):
        eps = 2.0 ** -6
        psi = wkb_initial("Ex2D", eps, Grid.uniform(((0.0, 2.0), (0.0, 2.0)), eps))
        assert np.abs(psi.values).max() == pytest.approx(64 / math.pi)
        i, j = np.unravel_index(np.argmax(np.abs(psi.values)), psi.values.shape)
        assert psi.grid.axes[0][i] == 1.0 and psi.grid.axes[1][j] == 1.0

    def test_resolution(self):
        with pytest.raises(ResolutionError):
            wkb_initial("Ex1D", 2.0 ** -8, Grid.uniform(((0.0, 2.0),), 2.0 ** -6))

    def test_unknown(self):
        with pytest.raises(ValueError):
            wkb_initial("Ex3D", 0.1, Grid.uniform(((0.0, 2.0),), 0.1))


class TestL2:
    grid = Grid(((0.0, 2.0),), (64,))

    def test_equal(self, rng):
        a = WaveField(self.grid, rng.normal(size=64) + 1j * rng.normal(size=64))
        assert l2_error(a, a) == (0.0, 0.0)

    def test_zero_reference(self):
        a = WaveField(self.grid, np.full(64, 1 / math.sqrt(2.0), complex))
        err, rel = l2_error(a, WaveField.zeros(self.grid))
        assert err == pytest.approx(1.0) and rel == math.inf

    def test_brute_force(self, rng):
        g = Grid(((0.0, 1.0), (0.0, 2.0)), (16, 32))
        a = WaveField(g, rng.normal(size=g.n) + 1j * rng.normal(size=g.n))
        b = WaveField(g, rng.normal(size=g.n) + 1j * rng.normal(size=g.n))
        num = den = 0.0
        for i in range(16):
            for j in range(32):
                num += abs(a.values[i, j] - b.values[i, j]) ** 2
                den += abs(b.values[i, j]) ** 2
        w = g.cell_volume
        err, rel = l2_error(a, b)
        assert err == pytest.approx(math.sqrt(num * w), rel=1e-12)
        assert rel == pytest.approx(math.sqrt(num / den), rel=1e-12)

    def test_mismatch(self):
        with pytest.raises(GridMismatchError):
            l2_error(WaveField.zeros(self.grid), WaveField.zeros(Grid(((0.0, 2.0),), (32,))))


class TestSlopes:
    def test_exact_halving(self):
        ks = [6, 7, 8, 9]
        f = fit_slope(ks, [math.log2(0.01 * 2.0 ** -(k - 6)) for k in ks])
        assert f.slope == pytest.approx(1.0, abs=1e-12)
        resid = [y - (-f.slope * x + f.intercept) for x, y in f.points]
        assert max(map(abs, resid)) < 1e-12

    def test_geometric(self):
        ks = [6, 7, 8]
        f = fit_slope(ks, [math.log2(3.0 * 2.0 ** (-0.7 * k)) for k in ks], alpha=1.3)
        assert f.slope == pytest.approx(0.7, abs=1e-12) and f.alpha == 1.3

    def test_needs_three_points(self):
        with pytest.raises(ValueError):
            fit_slope([6, 7], [0.0, -1.0])

    def test_sweep_preconditions(self):
        with pytest.raises(ValueError):
            convergence_sweep([1.5], [6, 7], 1.0, RunConfig())
        with pytest.raises(ValueError):
            convergence_sweep([1.5], [7, 6, 8], 1.0, RunConfig())


def test_error_record_validation():
    with pytest.raises(ValueError):
        ErrorRecord(1.5, 0.1, 0.1, -1.0, 0.0)


class TestConfig:
    def test_defaults(self):
        c = RunConfig()
        assert c.eps == 2.0 ** -6 and c.delta_value == c.eps and c.final_time == 0.25 and c.ref_dt == c.eps ** 2

    def test_delta_rule(self):
        c = RunConfig(eps_pow=8, delta_exponent=6 / 11)
        assert c.delta_value == pytest.approx(2.0 ** (-8 * 6 / 11))
        assert RunConfig(delta=0.3).delta_value == 0.3

    @pytest.mark.parametrize("bad", [{"alpha": 1.0}, {"alpha": 2.5}, {"eps_pow": 0}, {"dt_fga": 0.0},
                                     {"example": "Ex3D"}, {"t_final": -1.0}])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            RunConfig(**bad)

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"epsilon": 0.1})

    def test_json_round_trip(self, tmp_path):
        c = RunConfig(example="Ex2D", alpha=1.7, eps_pow=7)
        p = tmp_path / "c.json"
        p.write_text(json.dumps(c.to_dict()))
        assert RunConfig.from_json(p) == c

    def test_reference_key_includes_alpha(self):
        a, b = RunConfig(alpha=1.1), RunConfig(alpha=1.9)
        assert a.reference_key() != b.reference_key()
        # delta and FGA settings do not affect the reference
        assert a.reference_key() == a.replace(delta_exponent=0.5, dt_fga=1e-3).reference_key()
        assert a.reference_key() != a.replace(eps_pow=7).reference_key()


def test_reference_cache(tmp_path):
    c = RunConfig(alpha=1.5)
    eps = c.eps
    psi = wkb_initial("Ex1D", eps, Grid.uniform(c.box, eps))
    a = reference_solution(psi, c, tmp_path)
    assert len(list(tmp_path.glob("ref_*.npy"))) == 1
    b = reference_solution(psi, c, tmp_path)
    np.testing.assert_array_equal(a.values, b.values)
    reference_solution(psi, c.replace(alpha=1.3), tmp_path)
    assert len(list(tmp_path.glob("ref_*.npy"))) == 2


class TestIo:
    def test_1d_round_trip(self, tmp_path, rng):
        g = Grid(((0.0, 2.0),), (16,))
        f = WaveField(g, rng.normal(size=16) + 1j * rng.normal(size=16))
        back = io.read_field(io.write_field(f, tmp_path / "f"))
        np.testing.assert_array_equal(back.values, f.values)
        np.testing.assert_allclose(back.grid.axes[0], g.axes[0])

    def test_2d_round_trip(self, tmp_path, rng):
        g = Grid(((0.0, 2.0), (0.0, 1.0)), (8, 4))
        f = WaveField(g, rng.normal(size=g.n) + 1j * rng.normal(size=g.n))
        path = io.write_field(f, tmp_path / "f")
        assert (tmp_path / "f.bin").stat().st_size == 8 * 4 * 16
        back = io.read_field(path)
        np.testing.assert_array_equal(back.values, f.values)
        assert back.grid == g

    def test_summary_appends(self, tmp_path):
        p = tmp_path / "summary.json"
        io.append_summary({"a": np.float64(1.0)}, p)
        io.append_summary({"b": [1, 2]}, p)
        assert len(json.loads(p.read_text())["runs"]) == 2


def test_write_tables_layout(tmp_path):
    recs = {(a, k): ErrorRecord(a, 2.0 ** -k, 2.0 ** -k, 0.01 * 2.0 ** -(k - 6), 0.1) for a in (1.1, 1.5)
            for k in (6, 7, 8)}
    fits = [fit_slope([6, 7, 8], [math.log2(recs[(a, k)].l2_abs) for k in (6, 7, 8)], alpha=a) for a in (1.1, 1.5)]
    paths = write_tables(recs, fits, tmp_path, failures={(1.9, 6): "boom"})
    rows = list(csv.reader(open(paths["table"])))
    assert rows[0] == ["alpha", "eps=1/2^6", "eps=1/2^7", "eps=1/2^8"]
    assert [r[0] for r in rows[1:]] == ["1.1", "1.5", "1.9"]
    assert rows[1][1] == "1.00e-02" and rows[3][1] == "FAILED"
    slopes = list(csv.DictReader(open(paths["slopes"])))
    assert float(slopes[0]["slope"]) == pytest.approx(1.0)
    header = next(csv.reader(open(paths["errors"])))
    assert header[:5] == ["alpha", "eps", "delta", "l2_abs", "l2_rel"]
    assert "slope=1.0000" in paths["decay"].read_text()


def test_error_table_two_columns(tmp_path):
    recs, fails = error_table([1.5], [6, 7], 1.0, RunConfig(), workers=1, cache_dir=tmp_path)
    assert not fails and sorted(recs) == [(1.5, 6), (1.5, 7)]
    assert recs[(1.5, 7)].l2_abs < recs[(1.5, 6)].l2_abs


class TestCli:
    def test_compare(self, tmp_path, capsys):
        cfg = tmp_path / "ex1d.json"
        cfg.write_text(json.dumps({"example": "Ex1D", "output_dir": str(tmp_path / "out")}))
        assert cli.cli_main(["compare", "--config", str(cfg), "--alpha", "1.5", "--eps-pow", "6"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].startswith("alpha,eps,delta,l2_abs")
        assert float(lines[1].split(",")[3]) == pytest.approx(1.10e-2, rel=0.05)
        assert (tmp_path / "out" / "summary.json").exists()

    def test_unknown_flag(self, capsys):
        assert cli.cli_main(["compare", "--bogus"]) == 2
        err = capsys.readouterr().err
        assert "usage" in err and "config file" in err

    def test_bad_config(self, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"alpha": 3.0}))
        assert cli.cli_main(["compare", "--config", str(cfg)]) == 2
        cfg.write_text("{not json")
        assert cli.cli_main(["run-ref", "--config", str(cfg)]) == 2

    def test_2d_large_guard(self, tmp_path):
        assert cli.cli_main(["sweep", "--example", "Ex2D", "--eps-pows", "6,7,8",
                             "--output-dir", str(tmp_path)]) == 2

    def test_sweep_table(self, tmp_path, capsys):
        rc = cli.cli_main(["sweep", "--alphas", "1.5,1.9", "--eps-pows", "6,7,8", "--workers", "1",
                           "--output-dir", str(tmp_path)])
        assert rc == 0
        rows = list(csv.reader(open(tmp_path / "table.csv")))
        assert rows[0] == ["alpha", "eps=1/2^6", "eps=1/2^7", "eps=1/2^8"]
        assert [r[0] for r in rows[1:]] == ["1.5", "1.9"]
        for name in ("errors.csv", "slopes.csv", "decay.dat", "summary.json"):
            assert (tmp_path / name).exists()

    def test_sweep_two_columns_skips_fit(self, tmp_path, capsys):
        rc = cli.cli_main(["sweep", "--alphas", "1.5", "--eps-pows", "6,7", "--workers", "1",
                           "--output-dir", str(tmp_path)])
        assert rc == 0
        assert "slope" not in capsys.readouterr().out
        assert len(list(csv.reader(open(tmp_path / "slopes.csv")))) == 1

    def test_run_fga_outputs(self, tmp_path):
        rc = cli.cli_main(["run-fga", "--eps-pow", "6", "--trace", "2", "--dump-amplitudes",
                           "--output-dir", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "field_fga_Ex1D_a1.5_e6.csv").exists()
        assert len(list((tmp_path / "traces_Ex1D_a1.5_e6").glob("traj_*.csv"))) == 2
        head = open(tmp_path / "traces_Ex1D_a1.5_e6" / "traj_0000.csv").readline().strip()
        assert head == "t,Q1,P1,S,re_A,im_A,det_Z,symplectic_defect"

    def test_run_ref(self, tmp_path):
        assert cli.cli_main(["run-ref", "--output-dir", str(tmp_path)]) == 0
        assert (tmp_path / "field_ref_Ex1D_a1.5_e6.csv").exists()

    def test_selftest(self, capsys):
        assert cli.cli_main(["selftest"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out and out.count("PASS") >= 5
