"""CSV export of trial metrics.

Columns, in order:

``ds``               data structure (lazylist, harrislist)
``smr``              reclaimer (nbr, nbrplus, ebr, hp, leaky)
``backend``          neutralization backend
``threads``          worker threads
``workload``         ``insert:delete:search`` percentages, ``+stall`` if a thread was stalled
``trial``            trial index
``throughput``       operations per second
``broadcasts``       neutralization broadcasts sent
``restarts``         read-phase restarts
``peak_unreclaimed`` largest sampled count of retired-but-unfreed records
``freed_total``      records freed during the timed run
"""

from __future__ import annotations

import csv
from pathlib import Path

COLUMNS = ("ds", "smr", "backend", "threads", "workload", "trial", "throughput",
           "broadcasts", "restarts", "peak_unreclaimed", "freed_total")


def export_csv(metrics, path) -> None:
    metrics = list(metrics)
    if not metrics:
        raise ValueError("no metrics to export")
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for m in metrics:
            row = []
            for col in COLUMNS:
                value = getattr(m, col)
                row.append(f"{value:.1f}" if col == "throughput" else value)
            writer.writerow(row)


def read_csv(path) -> list[dict]:
    """Load rows written by :func:`export_csv`; raises ValueError on a bad header."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in COLUMNS if c not in header]
        if missing:
            raise ValueError(f"malformed csv {path}: missing columns {missing}")
        rows = []
        for lineno, row in enumerate(reader, 2):
            try:
                row["threads"] = int(row["threads"])
                row["trial"] = int(row["trial"])
                row["throughput"] = float(row["throughput"])
                for col in ("broadcasts", "restarts", "peak_unreclaimed", "freed_total"):
                    row[col] = int(row[col])
            except (TypeError, ValueError) as exc:
                raise ValueError(f"malformed csv {path}: line {lineno}: {exc}") from None
            rows.append(row)
        return rows
