"""Batch command-line front-end.

Subcommands:
  simulate  synthesize per-cell count files plus a manifest
  analyze   reconstruct states from count files and emit report/plot data
  son-fit   fit the Born-rule exponent to middle-stage correlations
  report    simulate + analyze + son-fit in one pass

Every run is driven by a flat key-value JSON config (all keys optional,
defaults reproduce the calibrated reference experiment) and a seed, so a
given config always produces byte-identical outputs. Exit codes: 0 ok,
1 usage error, 2 I/O failure, 3 missing data, 4 convergence failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import io as eio
from .errors import ConvergenceError, MissingDataError
from .harness import (
    DEFAULT_ANGLES_DEG,
    DEFAULT_SEED,
    STAGES,
    ExperimentPlan,
    assemble_report,
    cell_seed_entropy,
    run_three_stages,
)
from .measurement import DEFAULT_DRIFT_SIGMA, NoiseModel, tomography_projectors
from .optics import NAMED_AXES
from .son import (
    COMBOS,
    combo_axis_and_basis,
    correlation_operator,
    e_qm,
    extract_correlation,
    phi_to_theta,
    son_fit,
    _cached_curve,
)
from .tomography import mle_reconstruct

__all__ = ["RunConfig", "main", "entry"]


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    axes: tuple[str, ...] = NAMED_AXES
    angles_deg: tuple[float, ...] = DEFAULT_ANGLES_DEG
    flux_hz: float = 5400.0
    duration_s: float = 5.0
    werner_v: float = 0.98267
    drift_sigma: float = DEFAULT_DRIFT_SIGMA
    waveplate_error_sigma: float = float(np.deg2rad(0.2))
    poisson: bool = True
    seed: int = DEFAULT_SEED
    out_dir: str = "out"
    formats: tuple[str, ...] = ("csv", "json")

    def plan(self) -> ExperimentPlan:
        noise = NoiseModel(
            werner_v=self.werner_v,
            drift_sigma=self.drift_sigma,
            waveplate_error_sigma=self.waveplate_error_sigma,
            poisson=self.poisson,
            seed=self.seed,
        )
        return ExperimentPlan(
            axes=tuple(self.axes),
            angles_deg=tuple(float(a) for a in self.angles_deg),
            flux_hz=self.flux_hz,
            duration_s=self.duration_s,
            noise=noise,
            seed=self.seed,
        )


_CONFIG_KEYS = set(RunConfig.__dataclass_fields__)
_LIST_KEYS = {"axes": str, "angles_deg": float, "formats": str}


def load_config(path: str | None, seed=None, out=None, fmt=None) -> RunConfig:
    values = {}
    if path is not None:
        try:
            raw = eio.read_json(Path(path))
        except FileNotFoundError as exc:
            raise MissingDataError(f"config file not found: {path}") from exc
        except ValueError as exc:
            raise UsageError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise UsageError("config must be a flat JSON object")
        unknown = set(raw) - _CONFIG_KEYS
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        for key, value in raw.items():
            if key in _LIST_KEYS:
                cast = _LIST_KEYS[key]
                values[key] = tuple(cast(v) for v in value)
            else:
                values[key] = value
    config = RunConfig(**values)
    if seed is not None:
        config = replace(config, seed=int(seed))
    if out is not None:
        config = replace(config, out_dir=out)
    if fmt is not None:
        config = replace(config, formats=(fmt,))
    for f in config.formats:
        if f not in ("csv", "json"):
            raise UsageError(f"unknown output format {f!r}")
    return config


def _config_echo(config: RunConfig) -> dict:
    # only the keys that determine the data; output location and formats
    # stay out so the manifest is identical wherever the run lands
    echo = asdict(config)
    del echo["out_dir"]
    del echo["formats"]
    echo["axes"] = list(config.axes)
    echo["angles_deg"] = [float(a) for a in config.angles_deg]
    return echo


def cmd_simulate(config: RunConfig) -> int:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plan = config.plan()
    cells = []
    for axis in plan.axes:
        for angle_deg in plan.angles_deg:
            stages = run_three_stages(axis, float(np.deg2rad(angle_deg)), plan)
            for result in stages:
                name = eio.count_file_name(axis, angle_deg, result.stage)
                eio.write_count_csv(out / name, result.counts)
                cells.append(
                    {
                        "axis": axis,
                        "angle_deg": float(angle_deg),
                        "stage": result.stage,
                        "file": name,
                        "seed_entropy": cell_seed_entropy(plan.seed, axis, angle_deg, result.stage),
                        "true_state": eio.density_matrix_to_table(result.rho_true),
                    }
                )
    manifest = {
        "config": _config_echo(config),
        "grid": {"axes": list(plan.axes), "angles_deg": [float(a) for a in plan.angles_deg]},
        "cells": cells,
    }
    eio.write_json(out / "manifest.json", manifest)
    print(f"simulate: wrote {len(cells)} count files to {out}")
    return 0


def _load_counts(out: Path, manifest: dict) -> dict:
    grid = manifest["grid"]
    cell_counts = {}
    for axis in grid["axes"]:
        for angle_deg in grid["angles_deg"]:
            records = []
            for stage in STAGES:
                path = out / eio.count_file_name(axis, angle_deg, stage)
                if not path.exists():
                    raise MissingDataError(f"missing stage file: {path}")
                records.append(eio.read_count_csv(path))
            cell_counts[(axis, float(angle_deg))] = tuple(records)
    return cell_counts


def _read_manifest(out: Path) -> dict:
    path = out / "manifest.json"
    if not path.exists():
        raise MissingDataError(f"missing manifest: {path} (run simulate first)")
    return eio.read_json(path)


def cmd_analyze(config: RunConfig) -> int:
    out = Path(config.out_dir)
    manifest = _read_manifest(out)
    run_config = RunConfig(**{
        k: tuple(v) if isinstance(v, list) else v for k, v in manifest["config"].items()
    })
    plan = run_config.plan()
    cell_counts = _load_counts(out, manifest)
    report = assemble_report(plan, cell_counts)

    if "csv" in config.formats:
        eio.write_report_csv(out / "report.csv", report)
        _write_plot_files(out, report)
    if "json" in config.formats:
        eio.write_json(out / "report.json", eio.report_to_dict(report))
        _write_states_json(out, cell_counts)
    print(
        f"analyze: overall F(I,III) = {report.overall.f_i_iii_mean:.4f}, "
        f"BC(I,III) = {report.overall.bc_i_iii_mean:.5f}"
    )
    return 0


def _write_states_json(out: Path, cell_counts: dict) -> None:
    projectors = tomography_projectors()
    states = {}
    for (axis, angle_deg), records in sorted(cell_counts.items()):
        for stage, record in zip(STAGES, records):
            key = f"{axis}_{int(round(angle_deg * 100)):05d}_{stage}"
            states[key] = eio.density_matrix_to_table(mle_reconstruct(record, projectors).rho)
    eio.write_json(out / "states.json", states)


def _write_plot_files(out: Path, report) -> None:
    by_axis = {}
    for cell in report.cells:
        by_axis.setdefault(cell.axis, []).append(cell)
    stability = {s.axis: (s.stability_fidelity, s.stability_bc) for s in report.per_axis}
    series = {
        "fidelity": (
            ("i_iii", "f_i_iii", True),
            ("i_ii", "f_i_ii", True),
            ("i_iii_theory", "f_i_iii_theory", False),
            ("i_ii_theory", "f_i_ii_theory", False),
        ),
        "bc": (
            ("i_iii", "bc_i_iii", True),
            ("i_ii", "bc_i_ii", True),
            ("i_iii_theory", "bc_i_iii_theory", False),
            ("i_ii_theory", "bc_i_ii_theory", False),
        ),
    }
    for axis, cells in by_axis.items():
        stab_f, stab_bc = stability[axis]
        for metric, defs in series.items():
            err = stab_f if metric == "fidelity" else stab_bc
            for tag, attr, measured in defs:
                rows = [
                    (c.angle_deg, getattr(c, attr), err if measured else 0.0)
                    for c in cells
                ]
                eio.write_plot_series(out / f"plot_{metric}_{axis}_{tag}.csv", rows)


def cmd_son_fit(config: RunConfig) -> int:
    out = Path(config.out_dir)
    manifest = _read_manifest(out)
    grid = manifest["grid"]
    available = [c for c in COMBOS if combo_axis_and_basis(c)[0] in grid["axes"]]
    if not available:
        raise MissingDataError("no rotation axes in this run support a correlation combo")
    if len(available) < len(COMBOS):
        missing = sorted(set(COMBOS) - set(available))
        print(f"son-fit: warning: fitting {len(available)}/6 combos (missing {missing})", file=sys.stderr)
    angles = [float(a) for a in grid["angles_deg"]]
    if len(angles) < 5:
        raise MissingDataError("son-fit needs at least 5 rotation angles per combo")

    samples = []
    for combo in available:
        axis, _ = combo_axis_and_basis(combo)
        for angle_deg in angles:
            path = out / eio.count_file_name(axis, angle_deg, "II")
            if not path.exists():
                raise MissingDataError(f"missing stage file: {path}")
            record = eio.read_count_csv(path)
            phi = float(np.deg2rad(angle_deg) / 2)
            samples.append(extract_correlation(record, combo, phi))

    result = son_fit(samples)
    if "csv" in config.formats:
        eio.write_correlation_csv(out / "correlations.csv", samples)
        _write_fit_curves(out, result)
    if "json" in config.formats:
        eio.write_json(out / "son_fit.json", eio.son_result_to_dict(result))
    print(f"son-fit: n = {result.n:.3f} +- {result.n_uncertainty:.3f} over {len(available)} combos")
    return 0


def _write_fit_curves(out: Path, result) -> None:
    from .son import _rho_from_params  # internal parameterization

    phi_grid = np.deg2rad(np.arange(0.0, 180.5, 1.0))
    for combo, n_value in zip(result.per_combo, result.per_combo_n):
        curve = _cached_curve(round(n_value / 5e-4) * 5e-4)
        rho = _rho_from_params(np.array(result.rho_params[combo]))
        rows = []
        for phi in phi_grid:
            theta = phi_to_theta(phi)
            e_state = float(np.real(np.trace(correlation_operator(combo, phi) @ rho)))
            value = float(curve.value_at(theta)) + e_state - e_qm(theta)
            rows.append((float(np.rad2deg(phi)), value, 0.0))
        eio.write_plot_series(out / f"curve_{combo}.csv", rows)


def cmd_report(config: RunConfig) -> int:
    code = cmd_simulate(config)
    if code:
        return code
    code = cmd_analyze(config)
    if code:
        return code
    grid_axes = set(config.axes)
    if any(combo_axis_and_basis(c)[0] in grid_axes for c in COMBOS) and len(config.angles_deg) >= 5:
        code = cmd_son_fit(config)
    else:
        print("report: skipping son-fit (insufficient axes or angles)", file=sys.stderr)
    return code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="envarsim", description=__doc__, add_help=True)
    sub = parser.add_subparsers(dest="command")
    for name, help_text in (
        ("simulate", "synthesize count files for the configured grid"),
        ("analyze", "reconstruct states and emit comparison reports"),
        ("son-fit", "fit the Born-rule exponent to stage-II correlations"),
        ("report", "simulate, analyze and son-fit in one pass"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="path to a flat JSON config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--format", choices=("csv", "json"), help="restrict output format")
    return parser


_COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "son-fit": cmd_son_fit,
    "report": cmd_report,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required (simulate, analyze, son-fit, report)")
        config = load_config(args.config, seed=args.seed, out=args.out, fmt=args.format)
        return _COMMANDS[args.command](config)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except MissingDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())
