"""Batch command-line interface.

Four subcommands over a single JSON config:

- ``design``: compute the observer gain per prescribed rate and write
  the design report (JSON) plus the gain field (CSV).
- ``simulate``: run the open-loop and observer error experiments,
  reusing design artifacts from the output directory when present,
  designing inline (and writing the artifacts) when absent.
- ``validate``: run the consistency-check suite and print one row per
  check.
- ``spectrum``: export the discrete spectrum of the shifted generator.

Exit codes: 0 success; 1 config/usage error or failed validation;
2 Hautus test failure during design; 3 Riccati failure during design;
4 missing, corrupt, or mismatched design artifacts (or an infeasible
inline design) during simulate.

Data files (CSV/JSON reports) are deterministic: rerunning a command
with the same config reproduces them byte for byte.  The run manifest
records content hashes and stage timings; the timings are the one
intentionally non-reproducible output.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .design import DesignBundle, HautusError, RiccatiError, design_observer, orthonormalize
from .discretize import assemble_generator, unconstrained_indices
from .experiment import (
    ExperimentConfig,
    InitialProfile,
    SimResult,
    diagnostics,
    jsonable,
    prescribed_overshoot,
    run_error_experiment,
    write_json,
    write_norms_csv,
    write_snapshots_csv,
)
from .model import ExchangerParams, Field, SpatialGrid, l2_norm
from .spectral import characteristic_f, discrete_spectrum, unstable_modes
from .validation import run_validation_suite

import scipy.linalg as la


class ConfigError(ValueError):
    """Malformed or inconsistent configuration input."""


class ArtifactError(RuntimeError):
    """Design artifacts missing, corrupt, or inconsistent with config."""


DEFAULT_CONFIG: dict = {
    "params": {"u1": 1.0, "u2": 1.0, "c1": 1.0, "c2": 1.0},
    "grid": {"n": 200},
    "time": {"dt": 2.5e-3, "t_final": 5.0},
    "rates": [3.0, 5.0],
    "init": {
        "hot": {"shape": "sin_pi_x", "amplitude": 8.0},
        "cold": {"shape": "sin_pi_one_minus_x", "amplitude": 6.0},
    },
    "output": {"snapshot_stride": 20},
    "seed": 1234,
}


def _merge(defaults: dict, override: dict, path: str = "") -> dict:
    out = dict(defaults)
    for key, value in override.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {path + key!r} must be an object")
            out[key] = _merge(defaults[key], value, path + key + ".")
        else:
            out[key] = value
    return out


def load_config(path: str | Path) -> dict:
    """Read a config file and merge it over the defaults."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return _merge(DEFAULT_CONFIG, raw)


def config_from_dict(cfg: dict) -> ExperimentConfig:
    """Build the typed experiment config from a merged config dict."""
    try:
        params = ExchangerParams(**{k: float(v) for k, v in cfg["params"].items()})
        rates = tuple(float(r) for r in cfg["rates"])
        return ExperimentConfig(
            params=params,
            n=int(cfg["grid"]["n"]),
            dt=float(cfg["time"]["dt"]),
            t_final=float(cfg["time"]["t_final"]),
            rates=rates,
            init_h=InitialProfile(
                str(cfg["init"]["hot"]["shape"]), float(cfg["init"]["hot"]["amplitude"])
            ),
            init_c=InitialProfile(
                str(cfg["init"]["cold"]["shape"]),
                float(cfg["init"]["cold"]["amplitude"]),
            ),
            snapshot_stride=int(cfg["output"]["snapshot_stride"]),
            seed=int(cfg["seed"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def config_sha256(cfg: dict) -> str:
    canonical = json.dumps(jsonable(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _rate_tag(lo: float) -> str:
    return f"{lo:g}"


def _design_paths(out: Path, lo: float) -> tuple[Path, Path]:
    tag = _rate_tag(lo)
    return out / f"design_rate{tag}.json", out / f"kappa_rate{tag}.csv"


KAPPA_HEADER = "x,re_h,im_h,re_c,im_c"


def write_kappa_csv(path: Path, kappa: Field) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(KAPPA_HEADER + "\n")
        for j, x in enumerate(kappa.grid.x):
            fh.write(
                f"{x:.17g},{kappa.zh[j].real:.17g},{kappa.zh[j].imag:.17g},"
                f"{kappa.zc[j].real:.17g},{kappa.zc[j].imag:.17g}\n"
            )


def load_kappa_csv(path: Path, grid: SpatialGrid) -> Field:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = list(reader)
    except OSError as exc:
        raise ArtifactError(f"cannot read gain file {path}: {exc}") from exc
    if header is None or ",".join(header) != KAPPA_HEADER:
        raise ArtifactError(f"gain file {path} has an unexpected header")
    if len(rows) != grid.n:
        raise ArtifactError(
            f"gain file {path} has {len(rows)} rows, expected {grid.n}"
        )
    try:
        data = np.array(rows, dtype=float)
    except ValueError as exc:
        raise ArtifactError(f"gain file {path} holds non-numeric data") from exc
    if data.shape != (grid.n, 5) or not np.all(np.isfinite(data)):
        raise ArtifactError(f"gain file {path} is malformed")
    if np.max(np.abs(data[:, 0] - grid.x)) > 1e-9:
        raise ArtifactError(f"gain file {path} was written for a different grid")
    return Field(grid, data[:, 1] + 1j * data[:, 2], data[:, 3] + 1j * data[:, 4])


def _closed_loop_max_re(config: ExperimentConfig, kappa: Field) -> float:
    grid = kappa.grid
    gen = assemble_generator(config.params, grid, shift=0.0, kappa=kappa)
    idx = unconstrained_indices(grid.n)
    return float(np.max(la.eigvals(gen.mat[np.ix_(idx, idx)]).real))


def build_design_report(
    bundle: DesignBundle, config: ExperimentConfig, digest: str, kappa_file: str
) -> dict:
    assert bundle.gain is not None and bundle.system.K is not None
    sys_ = bundle.system
    projected = la.eigvals(sys_.A - sys_.K @ sys_.C) if bundle.basis.q else np.zeros(0)
    return {
        "lambda_o": bundle.lambda_o,
        "q": bundle.basis.q,
        "grid_n": config.n,
        "params": {
            "u1": config.params.u1,
            "u2": config.params.u2,
            "c1": config.params.c1,
            "c2": config.params.c2,
        },
        "unstable_eigenvalues": [
            {"re": m.lam.real, "im": m.lam.imag, "residual": m.residual, "source": m.source}
            for m in bundle.modes
        ],
        "projected_closed_loop": [{"re": v.real, "im": v.imag} for v in projected],
        "closed_loop_max_re": _closed_loop_max_re(config, bundle.gain.kappa),
        "hautus_margins": list(bundle.observability.margins),
        "hautus_tol": bundle.observability.tol,
        "hautus_passed": bundle.observability.passed,
        "riccati_residual": bundle.riccati_residual,
        "kappa_norm": l2_norm(bundle.gain.kappa),
        "kappa_file": kappa_file,
        "kappa_profile": {
            "x": list(bundle.gain.kappa.grid.x),
            "h_re": list(bundle.gain.kappa.zh.real),
            "h_im": list(bundle.gain.kappa.zh.imag),
            "c_re": list(bundle.gain.kappa.zc.real),
            "c_im": list(bundle.gain.kappa.zc.imag),
        },
        "basis_id": bundle.gain.basis_id,
        "config_sha256": digest,
    }


def cmd_design(args) -> int:
    cfg = load_config(args.config)
    config = config_from_dict(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    digest = config_sha256(cfg)
    grid = SpatialGrid.uniform(config.n)
    for lo in config.rates:
        try:
            bundle = design_observer(config.params, grid, lo)
        except HautusError as exc:
            print(f"design failed: {exc}", file=sys.stderr)
            return 2
        except RiccatiError as exc:
            print(f"design failed: {exc}", file=sys.stderr)
            return 3
        report_path, kappa_path = _design_paths(out, lo)
        write_kappa_csv(kappa_path, bundle.gain.kappa)
        report = build_design_report(bundle, config, digest, kappa_path.name)
        write_json(report_path, report)
        if bundle.basis.q == 0:
            print(f"notice: no unstable modes at rate {lo:g}; the gain is zero "
                  "and the open-loop decay already meets the rate")
        print(
            f"rate {lo:g}: q={bundle.basis.q} "
            f"closed-loop max Re {report['closed_loop_max_re']:.6f} "
            f"-> {report_path.name}, {kappa_path.name}"
        )
    return 0


def _load_or_design(
    config: ExperimentConfig, out: Path, lo: float, digest: str
) -> tuple[Field, dict, "object"]:
    """Return (kappa, design report dict, basis) for one rate.

    Existing artifacts are validated against the config and reused; a
    partial or inconsistent pair is an error rather than a silent
    redesign.  The basis is always recomputed from the spectrum — it is
    derived data, cheap next to the simulation, and needed for
    diagnostics.
    """
    report_path, kappa_path = _design_paths(out, lo)
    grid = SpatialGrid.uniform(config.n)
    if report_path.exists() != kappa_path.exists():
        raise ArtifactError(
            f"inconsistent design artifacts for rate {lo:g}: need both "
            f"{report_path.name} and {kappa_path.name}"
        )
    if report_path.exists():
        try:
            with open(report_path, "r", encoding="utf-8") as fh:
                report = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ArtifactError(f"cannot read design report {report_path}: {exc}") from exc
        for key in ("lambda_o", "q", "grid_n", "params", "kappa_norm"):
            if key not in report:
                raise ArtifactError(f"design report {report_path} lacks key {key!r}")
        if int(report["grid_n"]) != config.n:
            raise ArtifactError(
                f"design report {report_path} was made for n={report['grid_n']}, "
                f"config has n={config.n}"
            )
        if abs(float(report["lambda_o"]) - lo) > 1e-12:
            raise ArtifactError(f"design report {report_path} is for another rate")
        for key in ("u1", "u2", "c1", "c2"):
            if abs(float(report["params"][key]) - getattr(config.params, key)) > 1e-12:
                raise ArtifactError(
                    f"design report {report_path} was made for different parameters"
                )
        kappa = load_kappa_csv(kappa_path, grid)
        if abs(l2_norm(kappa) - float(report["kappa_norm"])) > 1e-9 * max(
            1.0, float(report["kappa_norm"])
        ):
            raise ArtifactError(
                f"gain file {kappa_path} does not match the design report norm"
            )
        gen = assemble_generator(config.params, grid, shift=lo)
        spectrum = discrete_spectrum(gen)
        modes = unstable_modes(spectrum, config.params, lo)
        basis = orthonormalize(modes, grid)
        if basis.q != int(report["q"]):
            raise ArtifactError(
                f"design report {report_path} has q={report['q']} but the spectrum "
                f"gives q={basis.q}"
            )
        return kappa, report, basis
    try:
        bundle = design_observer(config.params, grid, lo)
    except (HautusError, RiccatiError) as exc:
        raise ArtifactError(f"inline design for rate {lo:g} failed: {exc}") from exc
    write_kappa_csv(kappa_path, bundle.gain.kappa)
    report = build_design_report(bundle, config, digest, kappa_path.name)
    write_json(report_path, report)
    return bundle.gain.kappa, report, bundle.basis


def _thread_count() -> int:
    raw = os.environ.get("SPECOBS_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        warnings.warn(f"SPECOBS_THREADS={raw!r} is not an integer; running serially")
        return 1
    return max(1, value)


def _sha256_file(path: Path) -> tuple[str, int]:
    h = hashlib.sha256()
    data = path.read_bytes()
    h.update(data)
    return h.hexdigest(), len(data)


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    config = config_from_dict(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    digest = config_sha256(cfg)

    if args.direct and args.rates:
        raise ConfigError("--direct and --rates are mutually exclusive")
    if args.rates:
        try:
            rates = tuple(float(r) for r in args.rates.split(","))
        except ValueError as exc:
            raise ConfigError(f"--rates must be comma-separated numbers: {exc}") from exc
        if not rates or any(r <= 0 for r in rates):
            raise ConfigError("--rates must list positive numbers")
    else:
        rates = config.rates
    if args.direct:
        rates = ()

    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    designs = {}
    for lo in rates:
        try:
            designs[lo] = _load_or_design(config, out, lo, digest)
        except ArtifactError as exc:
            print(f"simulate failed: {exc}", file=sys.stderr)
            return 4
    timings["design_s"] = round(time.perf_counter() - t0, 3)

    from .design import ObserverGain  # local: only the container is needed here

    def one_run(lo: float | None) -> SimResult:
        if lo is None:
            return run_error_experiment(config)
        kappa, report, basis = designs[lo]
        gain = ObserverGain(
            kappa=kappa,
            coefficients=np.zeros(basis.q, dtype=complex),
            lambda_o=lo,
            basis_id=str(report.get("basis_id", "")),
        )
        result = run_error_experiment(config, gain)
        diagnostics(result, basis)
        return result

    t0 = time.perf_counter()
    jobs: list[float | None] = [None] + list(rates)
    threads = _thread_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_run, jobs))
    else:
        results = [one_run(j) for j in jobs]
    timings["simulate_s"] = round(time.perf_counter() - t0, 3)

    t0 = time.perf_counter()
    summaries = {}
    data_files = []
    for job, result in zip(jobs, results):
        tag = result.tag
        norms_path = out / f"norms_{tag}.csv"
        snaps_path = out / f"snapshots_{tag}.csv"
        write_norms_csv(norms_path, result)
        write_snapshots_csv(snaps_path, result)
        data_files += [norms_path, snaps_path]
        entry = {
            "tag": tag,
            "lambda_o": result.lambda_o,
            "fitted_rate": result.fitted_rate,
            "fitted_M": result.fitted_M,
            "fit_window": list(result.fit_window),
            "norm_initial": float(np.asarray(result.norms.values)[0, 1]),
            "norm_final": float(np.asarray(result.norms.values)[-1, 1]),
            "files": {"norms": norms_path.name, "snapshots": snaps_path.name},
            "config": cfg,
            "config_sha256": digest,
        }
        if job is not None:
            kappa, report, basis = designs[job]
            entry["q"] = report["q"]
            entry["spectra"] = {
                "unstable": report["unstable_eigenvalues"],
                "projected_closed_loop": report["projected_closed_loop"],
                "closed_loop_max_re": report["closed_loop_max_re"],
            }
            entry["prescribed_overshoot"] = prescribed_overshoot(result, job)
            entry["design"] = {
                "q": report["q"],
                "hautus_margins": report["hautus_margins"],
                "riccati_residual": report["riccati_residual"],
                "closed_loop_max_re": report["closed_loop_max_re"],
                "kappa_norm": report["kappa_norm"],
            }
            entry["diagnostics"] = {
                "xi_rate": result.xi_rate,
                "xi_final": float(np.asarray(result.xi_norms.values)[-1]),
                "T_l2_total": float(np.asarray(result.T_l2_cumulative.values)[-1]),
                "tail_fraction": _tail_fraction(result),
            }
        summary_path = out / f"summary_{tag}.json"
        write_json(summary_path, entry)
        data_files.append(summary_path)
        summaries[tag] = entry
    for lo in rates:
        report_path, kappa_path = _design_paths(out, lo)
        data_files += [report_path, kappa_path]
    timings["export_s"] = round(time.perf_counter() - t0, 3)

    manifest = {
        "config_sha256": digest,
        "files": {
            p.name: dict(zip(("sha256", "bytes"), _sha256_file(p)))
            for p in sorted(set(data_files))
        },
        "timings_s": timings,
        "versions": {
            "specobs": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
    }
    write_json(out / "manifest.json", manifest)
    for tag, entry in summaries.items():
        rate_str = "n/a" if entry["fitted_rate"] is None else f"{entry['fitted_rate']:.4f}"
        print(f"{tag}: fitted rate {rate_str} -> {entry['files']['norms']}")
    return 0


def _tail_fraction(result: SimResult) -> float | None:
    # recompute from the cumulative trace; None when diagnostics did not run
    if result.T_l2_cumulative is None:
        return None
    cum = np.asarray(result.T_l2_cumulative.values)
    times = np.asarray(result.T_l2_cumulative.times)
    total = cum[-1]
    if total <= 0.0:
        return 0.0
    t_tail = times[-1] - 0.2 * (times[-1] - times[0])
    j = int(np.searchsorted(times, t_tail))
    return float((total - cum[min(j, len(times) - 1)]) / total)


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    config = config_from_dict(cfg)
    checks = run_validation_suite(config)
    width = max(len(c.name) for c in checks)
    for c in checks:
        status = "ok" if c.passed else "FAIL"
        print(
            f"{c.name:<{width}}  {status:<4}  measured={c.measured: .6e}  "
            f"bound={c.bound: .6e}  {c.detail}"
        )
    failed = [c for c in checks if not c.passed]
    print(f"suite: {len(checks)} checks, {len(checks) - len(failed)} passed")
    return 1 if failed else 0


def cmd_spectrum(args) -> int:
    cfg = load_config(args.config)
    config = config_from_dict(cfg)
    lo = float(args.lambda_o)
    grid = SpatialGrid.uniform(config.n)
    gen = assemble_generator(config.params, grid, shift=lo)
    spectrum = discrete_spectrum(gen)
    unstable = unstable_modes(spectrum, config.params, lo)
    payload = {
        "metadata": {
            "lambda_o": lo,
            "shift": spectrum.shift,
            "grid_n": config.n,
            "params": cfg["params"],
            "q": len(unstable),
            "config_sha256": config_sha256(cfg),
        },
        "modes": [
            {"re": m.lam.real, "im": m.lam.imag, "residual": m.residual, "source": m.source}
            for m in spectrum.modes
        ],
        "unstable": [
            {
                "re": m.lam.real,
                "im": m.lam.imag,
                "residual": m.residual,
                "source": m.source,
                "char_magnitude": abs(characteristic_f(m.lam, config.params, lo)),
            }
            for m in unstable
        ],
    }
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    write_json(out, payload)
    print(f"{len(spectrum.modes)} modes ({len(unstable)} unstable) -> {out}")
    return 0


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is taken by the Hautus
    # failure, so fold usage problems into the generic error code
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="specobs", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="compute observer gains", parents=[])
    p.add_argument("--config", required=True, help="path to the JSON config")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("simulate", help="run error-decay experiments")
    p.add_argument("--config", required=True, help="path to the JSON config")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--rates", default=None, help="comma-separated rates overriding the config")
    p.add_argument("--direct", action="store_true", help="run only the open-loop experiment")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", help="run the consistency-check suite")
    p.add_argument("--config", required=True, help="path to the JSON config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("spectrum", help="export the shifted-generator spectrum")
    p.add_argument("--config", required=True, help="path to the JSON config")
    p.add_argument("--lambda-o", required=True, dest="lambda_o", help="spectral shift")
    p.add_argument("--out", required=True, help="output JSON file")
    p.set_defaults(func=cmd_spectrum)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"specobs: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"specobs: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
