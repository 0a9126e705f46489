"""Run a configuration end to end and print the verification report.

    python3 scripts/reference_run.py configs/reference_schwarzschild.txt runs/reference

Equivalent to ``rnwave evolve`` followed by ``rnwave verify``, with timing.
"""

import argparse
import sys
import time
from pathlib import Path

from rnwave import cli


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("config", type=Path)
    ap.add_argument("out", type=Path)
    args = ap.parse_args(argv)

    t0 = time.perf_counter()
    code = cli.main(["evolve", "--config", str(args.config), "--out", str(args.out)])
    if code:
        return code
    print(f"evolution finished in {time.perf_counter() - t0:.1f}s", file=sys.stderr)
    return cli.main(["verify", "--run", str(args.out)])


if __name__ == "__main__":
    sys.exit(main())
