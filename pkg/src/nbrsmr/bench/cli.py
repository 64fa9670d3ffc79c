"""``nbrsmr-bench``: run trials over a grid of structures, reclaimers and thread counts."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from ..config import BACKENDS, SMRConfig
from ..errors import InvalidSpec, UnsupportedCombination
from ..factory import RECLAIMERS, STRUCTURES, canonical_smr, check_combination
from .export import export_csv
from .plots import emit_plots
from .trial import run_trial
from .workload import WorkloadSpec, parse_mix, parse_stall


def _csv_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nbrsmr-bench", description=__doc__)
    p.add_argument("--ds", default="lazylist",
                   help=f"comma list of structures {sorted(STRUCTURES)} (default lazylist)")
    p.add_argument("--smr", default="nbr,nbrplus,ebr,hp",
                   help=f"comma list of reclaimers {sorted(RECLAIMERS)}")
    p.add_argument("--threads", default="1,2,4,8", help="comma list of thread counts")
    p.add_argument("--duration", type=float, default=5.0, help="seconds per trial")
    p.add_argument("--key-range", type=int, default=2048)
    p.add_argument("--workload", default="50:50:0",
                   help="i:d:s percentages or update / middle / search")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--stall", default=None,
                   help="tid:secs[:phase]; secs may be 'full'. Also runs an unstalled baseline")
    p.add_argument("--backend", default="cooperative", choices=BACKENDS)
    p.add_argument("--threshold", type=int, default=32768, help="limbo threshold S")
    p.add_argument("--reservations", type=int, default=3, help="reservations per write phase R")
    p.add_argument("--lo-fraction", type=float, default=0.5, help="NBR+ low watermark / S")
    p.add_argument("--scan-every", type=int, default=64,
                   help="NBR+ re-reads announce clocks every N lo-path retires")
    p.add_argument("--ops", type=int, default=None,
                   help="fixed operations per thread instead of a timed run")
    p.add_argument("--debug", action="store_true", help="quarantine allocator and assertions")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--csv", default=None, help="write metrics to this CSV file")
    p.add_argument("--plots", default=None, help="write PNG plots to this directory (needs --csv)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        structures = _csv_list(args.ds)
        reclaimers = [canonical_smr(s) for s in _csv_list(args.smr)]
        thread_counts = [int(t) for t in _csv_list(args.threads)]
        ins, dele, search = parse_mix(args.workload)
        base = WorkloadSpec(ins, dele, search, key_range=args.key_range,
                            duration=args.duration, threads=max(thread_counts),
                            seed=args.seed, ops_per_thread=args.ops)
        stall = parse_stall(args.stall, args.duration) if args.stall else None
        config = SMRConfig(threshold=args.threshold, max_reservations=args.reservations,
                           lo_fraction=args.lo_fraction, scan_every=args.scan_every,
                           backend=args.backend, debug=args.debug)
        for ds in structures:
            for smr in reclaimers:
                check_combination(ds, smr)
    except (InvalidSpec, UnsupportedCombination, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.plots and not args.csv:
        print("error: --plots needs --csv", file=sys.stderr)
        return 2

    stall_modes = [None] if stall is None else [None, stall]
    results = []
    print("ds,smr,threads,workload,trial,throughput,broadcasts,restarts,peak_unreclaimed,"
          "freed_total,poison")
    for ds in structures:
        for stall_mode in stall_modes:
            for threads in thread_counts:
                try:
                    spec = replace(base, threads=threads, stall=stall_mode)
                except InvalidSpec as exc:
                    print(f"error: {exc}", file=sys.stderr)
                    return 2
                for smr in reclaimers:
                    for trial in range(args.trials):
                        m = run_trial(replace(spec, seed=args.seed + trial), ds, smr,
                                      config, trial=trial)
                        results.append(m)
                        print(f"{ds},{smr},{threads},{m.workload},{trial},{m.throughput:.0f},"
                              f"{m.broadcasts},{m.restarts},{m.peak_unreclaimed},"
                              f"{m.freed_total},{m.poison}", flush=True)
    if args.csv:
        export_csv(results, args.csv)
        print(f"wrote {len(results)} rows to {args.csv}")
    if args.plots:
        for path in emit_plots(args.csv, args.plots):
            print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
