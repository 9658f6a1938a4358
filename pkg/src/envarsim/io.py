"""File formats: count CSVs, density-matrix JSON tables, reports, plot data.

All writers are deterministic: dictionary keys are sorted, floats use
Python's shortest round-trip repr, and no timestamps or environment data
are embedded, so identical inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .harness import EnvarianceReport
from .measurement import CountRecord, tomography_projectors
from .son import CorrelationSample, SonFitResult

__all__ = [
    "COUNT_CSV_HEADER",
    "count_file_name",
    "write_count_csv",
    "read_count_csv",
    "density_matrix_to_table",
    "density_matrix_from_table",
    "write_json",
    "read_json",
    "write_report_csv",
    "report_to_dict",
    "write_plot_series",
    "write_correlation_csv",
    "read_correlation_csv",
    "son_result_to_dict",
]

COUNT_CSV_HEADER = ("setting_label", "outcome_label", "counts", "duration_s")


def count_file_name(axis: str, angle_deg: float, stage: str) -> str:
    """Canonical per-cell file name, angle encoded in centidegrees."""
    return f"counts_{axis}_{int(round(angle_deg * 100)):05d}_{stage}.csv"


def write_count_csv(path: Path, record: CountRecord) -> None:
    labels = tomography_projectors().flat_labels
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COUNT_CSV_HEADER)
        for (setting_label, outcome_label), count in zip(labels, record.counts):
            writer.writerow([setting_label, outcome_label, int(count), repr(float(record.duration_s))])


def read_count_csv(path: Path) -> CountRecord:
    labels = tomography_projectors().flat_labels
    counts = np.zeros(36, dtype=np.int64)
    duration = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != COUNT_CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = list(reader)
    if len(rows) != 36:
        raise ValueError(f"{path}: expected 36 rows, found {len(rows)}")
    for idx, row in enumerate(rows):
        setting_label, outcome_label, count, duration_s = row
        if (setting_label, outcome_label) != labels[idx]:
            raise ValueError(f"{path}: row {idx} labels {row[:2]} out of canonical order")
        counts[idx] = int(count)
        duration = float(duration_s)
    total = counts.sum()
    flux = total / (9 * duration) if duration and duration > 0 else 0.0
    return CountRecord(counts=counts, duration_s=duration, flux_hz=flux)


def density_matrix_to_table(rho: np.ndarray) -> list[list[list[float]]]:
    """4x4 complex matrix as nested [re, im] pairs."""
    return [[[float(entry.real), float(entry.imag)] for entry in row] for row in np.asarray(rho)]


def density_matrix_from_table(table) -> np.ndarray:
    rho = np.array([[complex(entry[0], entry[1]) for entry in row] for row in table])
    if rho.shape != (4, 4):
        raise ValueError("density-matrix table must be 4x4")
    return rho


def _clean(obj):
    """Make a structure JSON-safe: numpy scalars to Python, NaN to None."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return None if math.isnan(value) else value
    return obj


def write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_json(path: Path):
    with open(path) as fh:
        return json.load(fh)


_REPORT_COLUMNS = (
    "axis",
    "angle_deg",
    "f_i_iii",
    "f_i_ii",
    "bc_i_iii",
    "bc_i_ii",
    "f_i_iii_theory",
    "bc_i_iii_theory",
)


def write_report_csv(path: Path, report: EnvarianceReport) -> None:
    """One row per grid cell with the six comparison metrics."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_REPORT_COLUMNS)
        for cell in report.cells:
            writer.writerow(
                [cell.axis, repr(cell.angle_deg)]
                + [repr(getattr(cell, col)) for col in _REPORT_COLUMNS[2:]]
            )


def report_to_dict(report: EnvarianceReport) -> dict:
    def summary_dict(s):
        return {
            "f_i_iii_mean": s.f_i_iii_mean,
            "f_i_iii_err": s.f_i_iii_err,
            "bc_i_iii_mean": s.bc_i_iii_mean,
            "bc_i_iii_err": s.bc_i_iii_err,
            "stability_fidelity": s.stability_fidelity,
            "stability_bc": s.stability_bc,
        }

    return {
        "per_axis": {s.axis: summary_dict(s) for s in report.per_axis},
        "overall": summary_dict(report.overall),
        "deviation": {
            "fidelity": report.deviation_fidelity,
            "bc": report.deviation_bc,
        },
        "cells": [
            {
                "axis": c.axis,
                "angle_deg": c.angle_deg,
                "f_i_iii": c.f_i_iii,
                "f_i_ii": c.f_i_ii,
                "bc_i_iii": c.bc_i_iii,
                "bc_i_ii": c.bc_i_ii,
                "f_i_iii_theory": c.f_i_iii_theory,
                "bc_i_iii_theory": c.bc_i_iii_theory,
                "f_i_ii_theory": c.f_i_ii_theory,
                "bc_i_ii_theory": c.bc_i_ii_theory,
            }
            for c in report.cells
        ],
    }


def write_plot_series(path: Path, rows: list[tuple[float, float, float]]) -> None:
    """Per-panel plot data: angle_deg, value, error."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("angle_deg", "value", "error"))
        for angle, value, error in rows:
            err = 0.0 if math.isnan(error) else error
            writer.writerow([repr(float(angle)), repr(float(value)), repr(float(err))])


def write_correlation_csv(path: Path, samples: list[CorrelationSample]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("combo", "phi_deg", "E", "sigma_E"))
        for s in samples:
            phi_deg = round(float(np.rad2deg(s.phi)), 9)
            writer.writerow([s.combo, repr(phi_deg), repr(s.value), repr(s.sigma)])


def read_correlation_csv(path: Path) -> list[CorrelationSample]:
    samples = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != ("combo", "phi_deg", "E", "sigma_E"):
            raise ValueError(f"{path}: unexpected header {header}")
        for combo, phi_deg, value, sigma in reader:
            samples.append(
                CorrelationSample(
                    combo=combo,
                    phi=float(np.deg2rad(float(phi_deg))),
                    value=float(value),
                    sigma=float(sigma),
                )
            )
    return samples


def son_result_to_dict(result: SonFitResult) -> dict:
    return {
        "n": result.n,
        "n_uncertainty": result.n_uncertainty,
        "per_combo": list(result.per_combo),
        "per_combo_n": list(result.per_combo_n),
        "objective": result.objective,
    }
