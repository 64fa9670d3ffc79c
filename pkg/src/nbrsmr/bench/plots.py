"""Static plots from an exported CSV.

One throughput-vs-threads plot per (data structure, workload), one series per
reclaimer. Stall experiments (workload ending in ``+stall``) also get a pair of
peak-unreclaimed plots, with and without the stalled thread.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from statistics import mean

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .export import read_csv  # noqa: E402

STALL_SUFFIX = "+stall"


def _slug(text: str) -> str:
    return text.replace(":", "-").replace("+", "_")


def _series(rows, value: str):
    grouped = defaultdict(lambda: defaultdict(list))
    for row in rows:
        grouped[row["smr"]][row["threads"]].append(row[value])
    return {smr: sorted((t, mean(v)) for t, v in by_t.items())
            for smr, by_t in sorted(grouped.items())}


def _plot(series, title: str, ylabel: str, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for smr, points in series.items():
        xs, ys = zip(*points)
        ax.plot(xs, ys, marker="o", label=smr)
    ax.set_xlabel("threads")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def emit_plots(csv_path, out_dir) -> list[Path]:
    """Write PNG plots for ``csv_path`` into ``out_dir``; returns the paths written."""
    rows = read_csv(csv_path)
    if not rows:
        raise ValueError(f"malformed csv {csv_path}: no data rows")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    groups = defaultdict(list)
    for row in rows:
        groups[(row["ds"], row["workload"])].append(row)
    for (ds, workload), group in sorted(groups.items()):
        written.append(_plot(_series(group, "throughput"), f"{ds} {workload}",
                             "ops/s", out / f"throughput_{ds}_{_slug(workload)}.png"))
    for (ds, workload), group in sorted(groups.items()):
        if not workload.endswith(STALL_SUFFIX):
            continue
        base = groups.get((ds, workload[:-len(STALL_SUFFIX)]), [])
        written.append(_plot(_series(group, "peak_unreclaimed"), f"{ds} with stalled thread",
                             "peak unreclaimed", out / f"memory_{ds}_with_stalled.png"))
        if base:
            written.append(_plot(_series(base, "peak_unreclaimed"), f"{ds} no stalled thread",
                                 "peak unreclaimed", out / f"memory_{ds}_no_stalled.png"))
    return written
