"""CLI surface: config parsing, output formats, determinism, exit codes."""

import json
import math
import os

import numpy as np
import pytest

from exact_diffusion.cli import (
    ExperimentConfig,
    cmd_compare,
    cmd_sample,
    cmd_validate,
    main,
    svg_line_plot,
)
from exact_diffusion.errors import ConfigError


def write_config(tmp_path, **overrides):
    cfg = {
        "drift": {"family": "piecewise_constant", "a1": 0.2, "a2": -0.9},
        "x": 0.0,
        "T": 1.0,
        "n_paths": 200,
        "output_times": [0.5],
        "seed": 4242,
        "comparison": {"dt": 0.01, "n": 2000},
        "output": {
            "csv": str(tmp_path / "out.csv"),
            "svg": str(tmp_path / "out.svg"),
            "json": str(tmp_path / "out.json"),
        },
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return str(path)


class TestConfigParsing:
    def test_roundtrip(self, tmp_path):
        cfg = ExperimentConfig.from_json(write_config(tmp_path))
        assert cfg.T == 1.0
        assert cfg.n_paths == 200
        assert cfg.drift.family == "piecewise_constant"
        assert cfg.comparison == {"dt": 0.01, "n": 2000}

    def test_sine_family(self, tmp_path):
        path = write_config(
            tmp_path,
            drift={"family": "piecewise_sine", "theta1": 7 * math.pi / 6, "theta2": math.pi / 4},
        )
        cfg = ExperimentConfig.from_json(path)
        assert cfg.drift.family == "piecewise_sine"

    @pytest.mark.parametrize(
        "overrides",
        [
            {"T": -1.0},
            {"n_paths": 0},
            {"output_times": [0.9, 0.1]},
            {"output_times": [1.5]},
            {"drift": {"family": "unknown"}},
            {"drift": {"family": "piecewise_constant", "a1": 0.2}},
            {"comparison": {"dt": 0.3, "n": 100}},
            {"comparison": {"dt": -0.1, "n": 100}},
        ],
    )
    def test_bad_configs_rejected(self, tmp_path, overrides):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json(write_config(tmp_path, **overrides))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json(str(tmp_path / "nope.json"))

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json(str(path))


class TestSample:
    def test_csv_schema_and_monotone_local_time(self, tmp_path):
        cfg = ExperimentConfig.from_json(write_config(tmp_path, n_paths=20))
        out = cmd_sample(cfg)
        lines = open(out).read().strip().splitlines()
        assert lines[0] == "path_id,t,x,l"
        by_path: dict[int, list[tuple[float, float, float]]] = {}
        for line in lines[1:]:
            pid, t, x, l = line.split(",")
            by_path.setdefault(int(pid), []).append((float(t), float(x), float(l)))
        assert set(by_path) == set(range(20))
        for rows in by_path.values():
            assert rows[0] == (0.0, 0.0, 0.0)
            assert rows[-1][0] == 1.0
            assert any(r[0] == 0.5 for r in rows)
            ls = [r[2] for r in rows]
            assert ls == sorted(ls)

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = ExperimentConfig.from_json(write_config(tmp_path, n_paths=50))
        out1 = cmd_sample(cfg)
        first = open(out1, "rb").read()
        out2 = cmd_sample(cfg)
        assert open(out2, "rb").read() == first

    def test_threads_do_not_change_bytes(self, tmp_path):
        cfg = ExperimentConfig.from_json(write_config(tmp_path, n_paths=50))
        cmd_sample(cfg, threads=1)
        first = open(cfg.outputs["csv"], "rb").read()
        cmd_sample(cfg, threads=4)
        assert open(cfg.outputs["csv"], "rb").read() == first

    def test_different_seed_changes_bytes(self, tmp_path):
        cfg1 = ExperimentConfig.from_json(write_config(tmp_path, n_paths=20, seed=1))
        cmd_sample(cfg1)
        first = open(cfg1.outputs["csv"], "rb").read()
        cfg2 = ExperimentConfig.from_json(write_config(tmp_path, n_paths=20, seed=2))
        cmd_sample(cfg2)
        assert open(cfg2.outputs["csv"], "rb").read() != first


class TestCompare:
    def test_outputs_and_report(self, tmp_path):
        cfg = ExperimentConfig.from_json(write_config(tmp_path, n_paths=2000))
        report = cmd_compare(cfg)
        assert 0.0 <= report["ks"]["p_value"] <= 1.0
        assert report["timing"]["exact_total_seconds"] > 0.0
        assert report["timing"]["euler_total_seconds"] > 0.0

        lines = open(cfg.outputs["csv"]).read().strip().splitlines()
        assert lines[0] == "grid,kde_exact,kde_euler"
        assert len(lines) == 513

        svg = open(cfg.outputs["svg"]).read()
        assert svg.startswith("<svg")
        assert svg.count("<polyline") == 2

        side = json.loads(open(cfg.outputs["json"]).read())
        assert side["ks"]["p_value"] == report["ks"]["p_value"]
        assert side["config"]["seed"] == 4242

    def test_requires_comparison_block(self, tmp_path):
        path = write_config(tmp_path)
        raw = json.loads(open(path).read())
        del raw["comparison"]
        cfg = ExperimentConfig.from_dict(raw)
        with pytest.raises(ConfigError):
            cmd_compare(cfg)

    def test_euler_vs_euler_sanity(self, tmp_path):
        # identical generator on both sides: p should not be extreme
        from exact_diffusion.validation import euler_maruyama, ks_two_sample
        from conftest import fresh_stream

        from exact_diffusion.drift import make_piecewise_constant

        d = make_piecewise_constant(0.2, -0.9)
        a = euler_maruyama(d, 0.0, 1.0, 0.01, 20_000, fresh_stream("ee-a"))
        b = euler_maruyama(d, 0.0, 1.0, 0.01, 20_000, fresh_stream("ee-b"))
        _, p = ks_two_sample(a, b)
        assert p > 1e-3


class TestValidateCommand:
    def test_filtered_run_passes(self, tmp_path):
        report_path = str(tmp_path / "report.json")
        report = cmd_validate("dist.truncated", report_path=report_path)
        assert report["all_passed"]
        on_disk = json.loads(open(report_path).read())
        assert on_disk == report
        assert {c["test"] for c in on_disk["checks"]} == {
            "dist.truncated_rayleigh.ks",
            "dist.truncated_normal.ks",
        }


class TestMainEntry:
    def test_sample_exit_codes(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path, n_paths=5)
        assert main(["sample", "--config", cfg_path]) == 0
        assert main(["sample", "--config", str(tmp_path / "missing.json")]) == 1
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"drift": {"family": "nope"}, "T": 1.0, "n_paths": 1}))
        assert main(["sample", "--config", str(bad)]) == 1

    def test_seed_override(self, tmp_path):
        cfg_path = write_config(tmp_path, n_paths=10)
        main(["sample", "--config", cfg_path])
        base = open(json.loads(open(cfg_path).read())["output"]["csv"], "rb").read()
        main(["sample", "--config", cfg_path, "--seed", "777"])
        assert open(json.loads(open(cfg_path).read())["output"]["csv"], "rb").read() != base

    def test_threads_env_fallback(self, tmp_path, monkeypatch):
        cfg_path = write_config(tmp_path, n_paths=10)
        main(["sample", "--config", cfg_path])
        base = open(json.loads(open(cfg_path).read())["output"]["csv"], "rb").read()
        monkeypatch.setenv("EXACT_DIFFUSION_THREADS", "3")
        assert main(["sample", "--config", cfg_path]) == 0
        assert open(json.loads(open(cfg_path).read())["output"]["csv"], "rb").read() == base

    def test_validate_exit_zero(self):
        assert main(["validate", "--filter", "dist.truncated_rayleigh"]) == 0

    def test_no_partial_file_on_error(self, tmp_path, monkeypatch):
        # force a failure mid-write and confirm the target path stays absent
        import exact_diffusion.cli as cli_module

        cfg = ExperimentConfig.from_json(write_config(tmp_path, n_paths=3))

        def exploding_write(path, data):
            raise RuntimeError("disk on fire")

        monkeypatch.setattr(cli_module, "_atomic_write", exploding_write)
        with pytest.raises(RuntimeError):
            cmd_sample(cfg)
        assert not os.path.exists(cfg.outputs["csv"])


class TestSVG:
    def test_pure_function_of_inputs(self):
        x = np.linspace(0.0, 1.0, 50)
        series = [("a", np.sin(x), False), ("b", np.cos(x), True)]
        assert svg_line_plot(x, series) == svg_line_plot(x, series)

    def test_dashed_marker_present(self):
        x = np.linspace(0.0, 1.0, 10)
        svg = svg_line_plot(x, [("solid", x, False), ("dash", 1.0 - x, True)])
        assert "stroke-dasharray" in svg
