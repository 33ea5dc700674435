"""Run reports: versioned JSON plus flat CSV tables ready for plotting."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

from .baselines import ConfusionCounts, Metrics

REPORT_FORMAT = "ganet-report"
REPORT_VERSION = 1
# excluded when comparing reports for reproducibility
VOLATILE_KEYS = ("wall_clock_seconds",)


def atomic_write(path, text: str) -> None:
    """Write via a temp file in the same directory and rename on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def metrics_dict(m: Metrics) -> dict:
    return {k: float(v) for k, v in m._asdict().items()}


def new_report(command: str, **fields) -> dict:
    report = {"format": REPORT_FORMAT, "version": REPORT_VERSION, "command": command}
    report.update(fields)
    return report


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def write_report(report: dict, path) -> None:
    atomic_write(path, dumps_report(report))


def strip_volatile(report: dict) -> dict:
    return {k: v for k, v in report.items() if k not in VOLATILE_KEYS}


def csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def history_csv(history: list[dict]) -> str:
    cols = ["generation", "best_ever", "population_best", "population_mean"]
    return csv_text(cols, [[h[c] for c in cols] for h in history])


METRIC_COLUMNS = ["method", "k", "accuracy", "sensitivity", "specificity", "h_mean",
                  "tp", "fp", "tn", "fn"]


def metric_row(method: str, k, counts: ConfusionCounts, m: Metrics) -> list:
    return [method, "" if k is None else k, float(m.accuracy), float(m.sensitivity),
            float(m.specificity), float(m.h_mean), counts.tp, counts.fp, counts.tn, counts.fn]
