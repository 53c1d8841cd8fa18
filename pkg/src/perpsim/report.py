"""Machine-readable experiment reports.

CSV rows are the regression surface: reals carry 17 significant digits so
reruns can be compared byte for byte.  The JSON summary mirrors the rows
and adds the run metadata (seed, workers, wall clock).
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Optional

from .experiments import ExperimentReport, ReportRow

__all__ = ["CSV_COLUMNS", "format_real", "csv_text", "write_report"]

CSV_COLUMNS = ("experiment", "row", "input", "theoretical", "empirical",
               "std_err", "ratio", "z_score", "note")


def format_real(value: Optional[float]) -> str:
    if value is None:
        return ""
    return format(float(value), ".17g")


def _row_record(row: ReportRow):
    return (row.experiment, row.row, row.input_echo,
            format_real(row.theoretical), format_real(row.empirical),
            format_real(row.std_err), format_real(row.ratio),
            format_real(row.z_score), row.note)


def csv_text(report: ExperimentReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report.rows:
        writer.writerow(_row_record(row))
    return buf.getvalue()


def summary_dict(report: ExperimentReport) -> dict:
    return {
        "experiment": report.experiment_id,
        "kind": report.kind,
        "seed": report.seed,
        "workers": report.workers,
        "wall_clock_s": report.wall_clock_s,
        "rows": [
            {
                "row": r.row,
                "input": r.input_echo,
                "theoretical": r.theoretical,
                "empirical": r.empirical,
                "std_err": r.std_err,
                "ratio": r.ratio,
                "z_score": r.z_score,
                "note": r.note,
            }
            for r in report.rows
        ],
    }


def write_report(report: ExperimentReport, out_dir: Path) -> tuple:
    """Write <id>.csv and <id>.json under out_dir; returns the two paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{report.experiment_id}.csv"
    json_path = out_dir / f"{report.experiment_id}.json"
    csv_path.write_text(csv_text(report), encoding="utf-8")
    json_path.write_text(
        json.dumps(summary_dict(report), indent=2) + "\n", encoding="utf-8")
    return csv_path, json_path
