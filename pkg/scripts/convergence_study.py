"""Self-convergence of the evolution for a configuration file.

Runs the configuration at h, h/2, h/4 (more with ``--levels``) and prints
the successive-difference norms and the observed order. Only the final
state is compared, so the snapshot cadence is set to the full span.

    python3 scripts/convergence_study.py configs/conservation.txt
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from rnwave.config import parse_config
from rnwave.csvio import write_table
from rnwave.evolution import ConvergenceError, convergence_order


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("config", type=Path)
    ap.add_argument("--levels", type=int, default=3)
    ap.add_argument("--coarsen", type=int, default=1,
                    help="divide the number of grid cells by this before refining")
    ap.add_argument("--csv", type=Path, help="write h and error columns here")
    args = ap.parse_args(argv)

    ev = parse_config(args.config.read_text()).evolution
    cells = (ev.n_points - 1) // args.coarsen
    span = ev.t_end - ev.t0
    ev = replace(ev, n_points=cells + 1, snapshot_interval=span if span > 0 else ev.snapshot_interval)
    try:
        res = convergence_order(ev, refinements=args.levels)
    except ConvergenceError as exc:
        print(f"not converging: {exc}", file=sys.stderr)
        return 2
    if res.status != "ok":
        print(res.status)
        return 0
    print(f"{'h':>12} {'||u_h - u_h/2||':>18}")
    for h, e in zip(res.h, res.errors):
        print(f"{h:12.6g} {e:18.6e}")
    print(f"observed order {res.order:.4f}")
    if args.csv:
        write_table(args.csv, {"h": res.h[: len(res.errors)], "error": res.errors})
    return 0


if __name__ == "__main__":
    sys.exit(main())
