"""Command-line front end: run experiments from JSON configs.

Subcommands: ``sample`` writes skeleton draws as CSV, ``compare`` overlays
kernel density estimates of the exact sampler against an Euler-Maruyama
baseline (CSV + SVG + JSON sidecar with a KS report and timings), and
``validate`` runs the registered oracle checks.  Exit codes: 0 success,
1 configuration problem, 2 runtime failure, 3 validation failure.  Output
files are written to a temporary name and atomically renamed, so a failed
run never leaves a partial file behind.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from .algorithm import sample_paths
from .drift import DriftSpec, make_piecewise_constant, make_piecewise_sine
from .errors import ConfigError, ExactDiffusionError
from .rng import RngStream
from .validation import DEFAULT_SEED, euler_maruyama, kde, ks_two_sample, run_checks

_EULER_STREAM_OFFSET = 0x45554C45  # keeps the baseline off the path streams


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a drift, a start point, a horizon, and output targets."""

    drift: DriftSpec
    drift_json: dict
    x: float
    T: float
    n_paths: int
    output_times: tuple[float, ...]
    seed: int
    comparison: dict | None = None
    outputs: dict = field(default_factory=dict)

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config root must be an object")
        try:
            drift_json = raw["drift"]
            drift = _parse_drift(drift_json)
            x = float(raw.get("x", 0.0))
            T = float(raw["T"])
            n_paths = int(raw["n_paths"])
            output_times = tuple(float(t) for t in raw.get("output_times", []))
            seed = int(raw.get("seed", DEFAULT_SEED))
        except KeyError as exc:
            raise ConfigError(f"missing config key: {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed config value: {exc}") from exc
        if T <= 0.0:
            raise ConfigError(f"T must be positive, got {T}")
        if n_paths < 1:
            raise ConfigError(f"n_paths must be at least 1, got {n_paths}")
        if list(output_times) != sorted(output_times):
            raise ConfigError("output_times must be sorted")
        if any(not 0.0 < t < T for t in output_times):
            raise ConfigError("output_times must lie strictly inside (0, T)")
        comparison = raw.get("comparison")
        if comparison is not None:
            try:
                comparison = {"dt": float(comparison["dt"]), "n": int(comparison["n"])}
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"malformed comparison block: {exc}") from exc
            if comparison["dt"] <= 0.0 or comparison["n"] < 1:
                raise ConfigError("comparison needs dt > 0 and n >= 1")
            steps = round(T / comparison["dt"])
            if steps < 1 or abs(steps * comparison["dt"] - T) > 1e-9 * max(T, 1.0):
                raise ConfigError(f"comparison dt {comparison['dt']} does not divide T {T}")
        outputs = raw.get("output", {})
        if not isinstance(outputs, dict):
            raise ConfigError("output block must be an object")
        return cls(
            drift=drift,
            drift_json=drift_json,
            x=x,
            T=T,
            n_paths=n_paths,
            output_times=output_times,
            seed=seed,
            comparison=comparison,
            outputs=outputs,
        )


def _parse_drift(spec: dict) -> DriftSpec:
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError("drift block needs a 'family' key")
    family = spec["family"]
    try:
        if family == "piecewise_constant":
            return make_piecewise_constant(float(spec["a1"]), float(spec["a2"]))
        if family == "piecewise_sine":
            return make_piecewise_sine(float(spec["theta1"]), float(spec["theta2"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed drift parameters: {exc}") from exc
    raise ConfigError(f"unknown drift family {family!r}")


def _atomic_write(path: str, data: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def svg_line_plot(
    x: np.ndarray,
    series: list[tuple[str, np.ndarray, bool]],
    title: str = "",
    width: int = 640,
    height: int = 420,
) -> str:
    """Minimal static SVG overlay of line series (label, values, dashed)."""
    margin = 50.0
    x = np.asarray(x, dtype=float)
    ys = np.concatenate([np.asarray(v, dtype=float) for _, v, _ in series])
    x_lo, x_hi = float(x.min()), float(x.max())
    y_lo, y_hi = 0.0, float(ys.max()) * 1.05 or 1.0
    inner_w = width - 2 * margin
    inner_h = height - 2 * margin

    def sx(v: float) -> float:
        return margin + (v - x_lo) / (x_hi - x_lo) * inner_w

    def sy(v: float) -> float:
        return height - margin - (v - y_lo) / (y_hi - y_lo) * inner_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{margin}" y="{margin}" width="{inner_w}" height="{inner_h}" '
        'fill="none" stroke="black" stroke-width="1"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2}" y="{margin / 2}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>'
        )
    for lo, hi, vert in ((x_lo, x_hi, True), (y_lo, y_hi, False)):
        for v in (lo, hi):
            if vert:
                parts.append(
                    f'<text x="{sx(v):.2f}" y="{height - margin + 18:.2f}" text-anchor="middle" '
                    f'font-family="sans-serif" font-size="11">{v:.3g}</text>'
                )
            else:
                parts.append(
                    f'<text x="{margin - 6:.2f}" y="{sy(v) + 4:.2f}" text-anchor="end" '
                    f'font-family="sans-serif" font-size="11">{v:.3g}</text>'
                )
    styles = [("black", "none"), ("dimgray", "7,5"), ("steelblue", "2,3")]
    for k, (label, vals, dashed) in enumerate(series):
        color, dash = styles[k % len(styles)]
        dash_attr = f' stroke-dasharray="{dash}"' if dashed else ""
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, vals))
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash_attr} points="{pts}"/>'
        )
        parts.append(
            f'<text x="{width - margin - 4}" y="{margin + 16 + 16 * k}" text-anchor="end" '
            f'font-family="sans-serif" font-size="12" fill="{color}">'
            f"{label}{' (dashed)' if dashed else ''}</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts)


def cmd_sample(config: ExperimentConfig, threads: int = 1) -> str:
    """Simulate skeletons and write them as CSV rows path_id,t,x,l."""
    out_csv = config.outputs.get("csv", "skeletons.csv")
    skeletons = sample_paths(
        config.drift,
        config.x,
        config.T,
        list(config.output_times),
        config.n_paths,
        config.seed,
        threads=threads,
    )
    lines = ["path_id,t,x,l"]
    for i, skel in enumerate(skeletons):
        for p in skel.points:
            lines.append(f"{i},{p.t!r},{p.x!r},{p.l!r}")
    _atomic_write(out_csv, "\n".join(lines) + "\n")
    return out_csv


def cmd_compare(config: ExperimentConfig, threads: int = 1) -> dict:
    """Exact-vs-Euler terminal law comparison: KDE curves, KS test, timings."""
    if config.comparison is None:
        raise ConfigError("compare needs a 'comparison' block with dt and n")
    out_csv = config.outputs.get("csv", "compare.csv")
    out_svg = config.outputs.get("svg", "compare.svg")
    out_json = config.outputs.get("json", "compare.json")

    t0 = time.perf_counter()
    skeletons = sample_paths(
        config.drift, config.x, config.T, [], config.n_paths, config.seed, threads=threads
    )
    exact_seconds = time.perf_counter() - t0
    exact_terminal = np.array([s.terminal.x for s in skeletons])

    t0 = time.perf_counter()
    euler_terminal = euler_maruyama(
        config.drift,
        config.x,
        config.T,
        config.comparison["dt"],
        config.comparison["n"],
        RngStream(config.seed, _EULER_STREAM_OFFSET),
    )
    euler_seconds = time.perf_counter() - t0

    both = np.concatenate([exact_terminal, euler_terminal])
    pad = 0.5 * float(np.std(both))
    grid = np.linspace(both.min() - pad, both.max() + pad, 512)
    kde_exact = kde(exact_terminal, grid=grid)
    kde_euler = kde(euler_terminal, grid=grid)
    stat, p_value = ks_two_sample(exact_terminal, euler_terminal)

    lines = ["grid,kde_exact,kde_euler"]
    for g, a, b in zip(grid, kde_exact.values, kde_euler.values):
        lines.append(f"{g!r},{a!r},{b!r}")
    _atomic_write(out_csv, "\n".join(lines) + "\n")

    svg = svg_line_plot(
        grid,
        [("exact", kde_exact.values, False), ("euler", kde_euler.values, True)],
        title=f"terminal density, {config.drift.family}",
    )
    _atomic_write(out_svg, svg)

    report = {
        "config": {
            "drift": config.drift_json,
            "x": config.x,
            "T": config.T,
            "n_paths": config.n_paths,
            "seed": config.seed,
            "comparison": config.comparison,
        },
        "ks": {"statistic": stat, "p_value": p_value},
        "timing": {"exact_total_seconds": exact_seconds, "euler_total_seconds": euler_seconds},
    }
    _atomic_write(out_json, json.dumps(report, indent=2) + "\n")
    return report


def cmd_validate(name_filter: str = "", seed: int = DEFAULT_SEED, report_path: str | None = None) -> dict:
    """Run the registered oracle checks; returns the machine-readable report."""
    results = run_checks(name_filter, seed)
    report = {
        "seed": seed,
        "filter": name_filter,
        "checks": [r.to_json() for r in results],
        "all_passed": all(r.passed for r in results),
    }
    payload = json.dumps(report, indent=2) + "\n"
    if report_path:
        _atomic_write(report_path, payload)
    else:
        sys.stdout.write(payload)
    return report


def _resolve_threads(value: int | None) -> int:
    if value is not None:
        return max(1, value)
    env = os.environ.get("EXACT_DIFFUSION_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"EXACT_DIFFUSION_THREADS must be an integer, got {env!r}") from exc
    return 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="exact-diffusion",
        description="Exact simulation of diffusions with one drift discontinuity",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("sample", "compare"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=None)
    pv = sub.add_parser("validate")
    pv.add_argument("--filter", default="", help="substring filter on check names")
    pv.add_argument("--seed", type=int, default=DEFAULT_SEED)
    pv.add_argument("--report", default=None, help="write the JSON report here instead of stdout")

    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            report = cmd_validate(args.filter, args.seed, args.report)
            return 0 if report["all_passed"] else 3
        config = ExperimentConfig.from_json(args.config)
        if args.seed is not None:
            config = ExperimentConfig.from_dict(
                {
                    "drift": config.drift_json,
                    "x": config.x,
                    "T": config.T,
                    "n_paths": config.n_paths,
                    "output_times": list(config.output_times),
                    "seed": args.seed,
                    "comparison": config.comparison,
                    "output": config.outputs,
                }
            )
        threads = _resolve_threads(args.threads)
        if args.command == "sample":
            out = cmd_sample(config, threads)
            sys.stderr.write(f"wrote {out}\n")
        else:
            report = cmd_compare(config, threads)
            sys.stderr.write(
                f"ks p={report['ks']['p_value']:.4g} exact {report['timing']['exact_total_seconds']:.1f}s "
                f"euler {report['timing']['euler_total_seconds']:.1f}s\n"
            )
        return 0
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 1
    except ExactDiffusionError as exc:
        sys.stderr.write(f"runtime error: {exc}\n")
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        sys.stderr.write(f"unexpected error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
