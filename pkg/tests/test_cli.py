"""Batch CLI: config handling, artifacts, exit codes, determinism."""

import json
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from specobs import ExchangerParams, Field, HautusError, RiccatiError, SpatialGrid
from specobs import cli
from specobs.cli import (
    ConfigError,
    config_from_dict,
    config_sha256,
    load_config,
    load_kappa_csv,
    main,
    write_kappa_csv,
)

SMALL = {
    "grid": {"n": 60},
    "time": {"dt": 0.005, "t_final": 0.5},
    "rates": [3.0],
    "output": {"snapshot_stride": 10},
}


def _write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


class TestConfig:
    def test_partial_override_keeps_defaults(self, tmp_path):
        cfg = load_config(_write_config(tmp_path, {"grid": {"n": 50}}))
        assert cfg["grid"]["n"] == 50
        assert cfg["time"]["dt"] == 2.5e-3
        assert cfg["params"]["u1"] == 1.0

    def test_unknown_key_rejected(self, tmp_path):
        path = _write_config(tmp_path, {"gird": {"n": 50}})
        with pytest.raises(ConfigError, match="unknown config key"):
            load_config(path)

    def test_unknown_nested_key_rejected(self, tmp_path):
        path = _write_config(tmp_path, {"time": {"dt": 0.01, "steps": 3}})
        with pytest.raises(ConfigError, match="time.steps"):
            load_config(path)

    def test_malformed_json_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(path)

    def test_non_object_rejected(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError, match="JSON object"):
            load_config(path)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read config"):
            load_config(tmp_path / "absent.json")

    def test_typed_config_roundtrip(self, tmp_path):
        cfg = load_config(_write_config(tmp_path, SMALL))
        config = config_from_dict(cfg)
        assert config.n == 60
        assert config.rates == (3.0,)
        assert config.dt == 0.005
        assert config.seed == 1234

    def test_invalid_values_surface_as_config_error(self, tmp_path):
        cfg = load_config(_write_config(tmp_path, {"grid": {"n": 2}}))
        with pytest.raises(ConfigError, match="invalid config"):
            config_from_dict(cfg)

    def test_digest_independent_of_key_order(self):
        a = {"params": {"u1": 1.0, "u2": 2.0}, "seed": 3}
        b = {"seed": 3, "params": {"u2": 2.0, "u1": 1.0}}
        assert config_sha256(a) == config_sha256(b)
        assert config_sha256(a) != config_sha256({"params": {"u1": 1.0}, "seed": 3})


class TestKappaCsv:
    def test_roundtrip_is_exact(self, tmp_path):
        g = SpatialGrid.uniform(17)
        rng = np.random.default_rng(2)
        kappa = Field(
            g,
            rng.normal(size=17) + 1j * rng.normal(size=17),
            rng.normal(size=17) + 1j * rng.normal(size=17),
        )
        path = tmp_path / "kappa.csv"
        write_kappa_csv(path, kappa)
        back = load_kappa_csv(path, g)
        assert_array_equal(back.zh, kappa.zh)
        assert_array_equal(back.zc, kappa.zc)

    def test_wrong_grid_rejected(self, tmp_path):
        g = SpatialGrid.uniform(17)
        path = tmp_path / "kappa.csv"
        write_kappa_csv(path, Field.zeros(g))
        with pytest.raises(cli.ArtifactError, match="expected 19"):
            load_kappa_csv(path, SpatialGrid.uniform(19))

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "kappa.csv"
        path.write_text("x,a,b,c,d\n" + "0,0,0,0,0\n" * 17)
        with pytest.raises(cli.ArtifactError, match="unexpected header"):
            load_kappa_csv(path, SpatialGrid.uniform(17))

    def test_non_numeric_rejected(self, tmp_path):
        g = SpatialGrid.uniform(3)
        path = tmp_path / "kappa.csv"
        path.write_text("x,re_h,im_h,re_c,im_c\n0,0,0,0,0\n0.5,oops,0,0,0\n1,0,0,0,0\n")
        with pytest.raises(cli.ArtifactError, match="non-numeric"):
            load_kappa_csv(path, g)


class TestDesignCommand:
    def test_writes_report_and_gain(self, tmp_path):
        config = _write_config(tmp_path, SMALL)
        out = tmp_path / "out"
        assert main(["design", "--config", config, "--out", str(out)]) == 0
        report = json.loads((out / "design_rate3.json").read_text())
        for key in (
            "lambda_o",
            "q",
            "grid_n",
            "params",
            "unstable_eigenvalues",
            "projected_closed_loop",
            "closed_loop_max_re",
            "hautus_margins",
            "hautus_passed",
            "riccati_residual",
            "kappa_norm",
            "kappa_file",
            "kappa_profile",
            "basis_id",
            "config_sha256",
        ):
            assert key in report, key
        assert report["q"] == 1
        assert report["hautus_passed"] is True
        assert report["riccati_residual"] <= 1e-8
        assert report["closed_loop_max_re"] <= -3.0 + 0.5
        assert report["kappa_file"] == "kappa_rate3.csv"
        # the embedded profile matches the CSV artifact
        kappa = load_kappa_csv(out / "kappa_rate3.csv", SpatialGrid.uniform(60))
        assert_allclose(report["kappa_profile"]["h_re"], kappa.zh.real, rtol=0, atol=0)

    def test_zero_mode_design_prints_notice(self, tmp_path, capsys):
        payload = dict(SMALL, rates=[0.001])
        config = _write_config(tmp_path, payload)
        out = tmp_path / "out"
        assert main(["design", "--config", config, "--out", str(out)]) == 0
        stdout = capsys.readouterr().out
        assert "no unstable modes" in stdout
        report = json.loads((out / "design_rate0.001.json").read_text())
        assert report["q"] == 0
        assert report["kappa_norm"] == 0.0

    def test_hautus_failure_exits_two(self, tmp_path, monkeypatch, capsys):
        def boom(*a, **kw):
            raise HautusError("forced hautus failure")

        monkeypatch.setattr(cli, "design_observer", boom)
        config = _write_config(tmp_path, SMALL)
        assert main(["design", "--config", config, "--out", str(tmp_path / "o")]) == 2
        assert "forced hautus failure" in capsys.readouterr().err

    def test_riccati_failure_exits_three(self, tmp_path, monkeypatch, capsys):
        def boom(*a, **kw):
            raise RiccatiError("forced riccati failure")

        monkeypatch.setattr(cli, "design_observer", boom)
        config = _write_config(tmp_path, SMALL)
        assert main(["design", "--config", config, "--out", str(tmp_path / "o")]) == 3
        assert "forced riccati failure" in capsys.readouterr().err


class TestSimulateCommand:
    def test_inline_design_and_outputs(self, tmp_path):
        config = _write_config(tmp_path, SMALL)
        out = tmp_path / "out"
        assert main(["simulate", "--config", config, "--out", str(out)]) == 0
        for name in (
            "design_rate3.json",
            "kappa_rate3.csv",
            "norms_direct.csv",
            "norms_rate3.csv",
            "snapshots_direct.csv",
            "snapshots_rate3.csv",
            "summary_direct.json",
            "summary_rate3.json",
            "manifest.json",
        ):
            assert (out / name).exists(), name
        direct = json.loads((out / "summary_direct.json").read_text())
        assert direct["tag"] == "direct"
        assert direct["lambda_o"] is None
        assert "design" not in direct
        assert direct["config"]["grid"]["n"] == 60
        rate3 = json.loads((out / "summary_rate3.json").read_text())
        assert rate3["q"] == 1
        assert rate3["design"]["riccati_residual"] <= 1e-8
        assert rate3["prescribed_overshoot"] >= 1.0
        assert rate3["diagnostics"]["xi_final"] >= 0.0
        assert rate3["spectra"]["closed_loop_max_re"] <= -2.5
        # norm row count: t_final/dt steps plus the initial row
        lines = (out / "norms_direct.csv").read_text().splitlines()
        assert len(lines) == 1 + 101

    def test_manifest_hashes_match_files(self, tmp_path):
        config = _write_config(tmp_path, SMALL)
        out = tmp_path / "out"
        assert main(["simulate", "--config", config, "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["files"], "manifest lists no files"
        import hashlib

        for name, meta in manifest["files"].items():
            data = (out / name).read_bytes()
            assert hashlib.sha256(data).hexdigest() == meta["sha256"], name
            assert len(data) == meta["bytes"]
        assert manifest["versions"]["specobs"]
        assert "design_s" in manifest["timings_s"]

    def test_reruns_are_byte_identical(self, tmp_path):
        config = _write_config(tmp_path, SMALL)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", config, "--out", str(out_a)]) == 0
        assert main(["simulate", "--config", config, "--out", str(out_b)]) == 0
        names = sorted(p.name for p in out_a.iterdir())
        assert names == sorted(p.name for p in out_b.iterdir())
        for name in names:
            if name == "manifest.json":
                # timings differ; the content hashes must not
                ma = json.loads((out_a / name).read_text())
                mb = json.loads((out_b / name).read_text())
                assert ma["files"] == mb["files"]
                assert ma["config_sha256"] == mb["config_sha256"]
            else:
                assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name

    def test_existing_artifacts_reused(self, tmp_path):
        config = _write_config(tmp_path, SMALL)
        out = tmp_path / "out"
        assert main(["design", "--config", config, "--out", str(out)]) == 0
        gain_bytes = (out / "kappa_rate3.csv").read_bytes()
        assert main(["simulate", "--config", config, "--out", str(out)]) == 0
        assert (out / "kappa_rate3.csv").read_bytes() == gain_bytes

    def test_half_missing_artifacts_exit_four(self, tmp_path, capsys):
        config = _write_config(tmp_path, SMALL)
        out = tmp_path / "out"
        assert main(["design", "--config", config, "--out", str(out)]) == 0
        (out / "kappa_rate3.csv").unlink()
        assert main(["simulate", "--config", config, "--out", str(out)]) == 4
        assert "inconsistent design artifacts" in capsys.readouterr().err

    def test_corrupt_gain_file_exit_four(self, tmp_path, capsys):
        config = _write_config(tmp_path, SMALL)
        out = tmp_path / "out"
        assert main(["design", "--config", config, "--out", str(out)]) == 0
        lines = (out / "kappa_rate3.csv").read_text().splitlines()
        (out / "kappa_rate3.csv").write_text("\n".join(lines[:-1]) + "\n")
        assert main(["simulate", "--config", config, "--out", str(out)]) == 4
        assert "rows" in capsys.readouterr().err

    def test_mismatched_grid_exit_four(self, tmp_path, capsys):
        config = _write_config(tmp_path, SMALL)
        out = tmp_path / "out"
        assert main(["design", "--config", config, "--out", str(out)]) == 0
        bigger = _write_config(tmp_path, dict(SMALL, grid={"n": 80}), name="big.json")
        assert main(["simulate", "--config", bigger, "--out", str(out)]) == 4
        assert "n=60" in capsys.readouterr().err

    def test_tampered_gain_norm_exit_four(self, tmp_path, capsys):
        config = _write_config(tmp_path, SMALL)
        out = tmp_path / "out"
        assert main(["design", "--config", config, "--out", str(out)]) == 0
        kappa = load_kappa_csv(out / "kappa_rate3.csv", SpatialGrid.uniform(60))
        doubled = Field(kappa.grid, 2.0 * kappa.zh, 2.0 * kappa.zc)
        write_kappa_csv(out / "kappa_rate3.csv", doubled)
        assert main(["simulate", "--config", config, "--out", str(out)]) == 4
        assert "does not match the design report norm" in capsys.readouterr().err

    def test_direct_only(self, tmp_path):
        config = _write_config(tmp_path, SMALL)
        out = tmp_path / "out"
        assert main(["simulate", "--config", config, "--out", str(out), "--direct"]) == 0
        names = {p.name for p in out.iterdir()}
        assert names == {
            "norms_direct.csv",
            "snapshots_direct.csv",
            "summary_direct.json",
            "manifest.json",
        }

    def test_direct_and_rates_conflict(self, tmp_path, capsys):
        config = _write_config(tmp_path, SMALL)
        code = main(
            [
                "simulate",
                "--config",
                config,
                "--out",
                str(tmp_path / "o"),
                "--direct",
                "--rates",
                "3",
            ]
        )
        assert code == 1
        assert "mutually exclusive" in capsys.readouterr().err

    @pytest.mark.parametrize("bad", ["3;5", "abc", "-3", "0"])
    def test_bad_rates_rejected(self, tmp_path, bad, capsys):
        config = _write_config(tmp_path, SMALL)
        code = main(
            ["simulate", "--config", config, "--out", str(tmp_path / "o"), "--rates", bad]
        )
        assert code == 1

    def test_rates_override(self, tmp_path):
        config = _write_config(tmp_path, SMALL)
        out = tmp_path / "out"
        code = main(
            ["simulate", "--config", config, "--out", str(out), "--rates", "0.001"]
        )
        assert code == 0
        assert (out / "norms_rate0.001.csv").exists()
        assert not (out / "norms_rate3.csv").exists()

    def test_runtime_shape_error_exits_one(self, tmp_path):
        payload = dict(SMALL, init={"hot": {"shape": "bogus", "amplitude": 1.0}})
        config = _write_config(tmp_path, payload)
        assert main(["simulate", "--config", config, "--out", str(tmp_path / "o")]) == 1

    def test_thread_override_matches_serial(self, tmp_path, monkeypatch):
        config = _write_config(tmp_path, SMALL)
        out_s, out_t = tmp_path / "serial", tmp_path / "threads"
        assert main(["simulate", "--config", config, "--out", str(out_s)]) == 0
        monkeypatch.setenv("SPECOBS_THREADS", "2")
        assert main(["simulate", "--config", config, "--out", str(out_t)]) == 0
        for name in ("norms_direct.csv", "norms_rate3.csv", "summary_rate3.json"):
            assert (out_s / name).read_bytes() == (out_t / name).read_bytes(), name

    def test_invalid_thread_count_warns_and_runs(self, tmp_path, monkeypatch):
        config = _write_config(tmp_path, SMALL)
        monkeypatch.setenv("SPECOBS_THREADS", "many")
        with pytest.warns(UserWarning, match="not an integer"):
            code = main(
                ["simulate", "--config", config, "--out", str(tmp_path / "o"), "--direct"]
            )
        assert code == 0


class TestValidateCommand:
    def test_passing_suite_exits_zero(self, tmp_path, capsys):
        config = _write_config(tmp_path, {"grid": {"n": 25}})
        assert main(["validate", "--config", config]) == 0
        stdout = capsys.readouterr().out
        assert "suite: 19 checks, 19 passed" in stdout
        assert "FAIL" not in stdout

    def test_failing_suite_exits_one(self, tmp_path, monkeypatch, capsys):
        from specobs import CheckResult

        def fake(config):
            return [
                CheckResult(
                    name="forced-check", passed=False, measured=1.0, bound=0.0,
                    detail="forced failure",
                )
            ]

        monkeypatch.setattr(cli, "run_validation_suite", fake)
        config = _write_config(tmp_path, {"grid": {"n": 25}})
        assert main(["validate", "--config", config]) == 1
        stdout = capsys.readouterr().out
        assert "FAIL" in stdout
        assert "suite: 1 checks, 0 passed" in stdout


class TestSpectrumCommand:
    def test_export_schema(self, tmp_path):
        config = _write_config(tmp_path, SMALL)
        out = tmp_path / "nested" / "spec.json"
        code = main(
            ["spectrum", "--config", config, "--lambda-o", "3", "--out", str(out)]
        )
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["metadata"]["lambda_o"] == 3.0
        assert payload["metadata"]["grid_n"] == 60
        assert payload["metadata"]["q"] == len(payload["unstable"]) == 1
        assert len(payload["modes"]) == 2 * 60 - 2
        mode = payload["unstable"][0]
        for key in ("re", "im", "residual", "source", "char_magnitude"):
            assert key in mode
        assert mode["re"] > 0.0


class TestEntryPoints:
    def test_usage_error_exits_one(self):
        assert main([]) == 1
        assert main(["frobnicate"]) == 1
        assert main(["design"]) == 1  # missing required arguments

    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "specobs", "--help"],
            capture_output=True,
            text=True,
            timeout=120,
        )
        assert proc.returncode == 0
        assert "design" in proc.stdout
