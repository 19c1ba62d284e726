"""Generate the mesh ladder error tables for all three examples.

Each example runs the optimizer on meshes n in {4, 8, 12, 16, 25} and
tabulates relative errors against the n=25 solution.  Expect a few
minutes per example; most of the time goes into the n=25 runs.
"""

import argparse
import os
import sys
import time

from slipflow.study import StudyConfig, run_study, write_errors_csv


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--examples", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--opt-iters", type=int, default=12)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    os.makedirs(args.out, exist_ok=True)
    cfg = StudyConfig(opt_iters=args.opt_iters)
    for ex in args.examples:
        t0 = time.time()
        print(f"example {ex}:")
        result = run_study(ex, cfg, verbose=True)
        path = os.path.join(args.out, f"errors_ex{ex}.csv")
        write_errors_csv(path, result)
        print(f"{'n':>4} {'h':>12} {'u_L2':>12} {'u_V':>12} "
              f"{'p_L2':>12} {'f_L2':>12}")
        for row in result.rows:
            print(f"{int(row[0]):4d} "
                  + " ".join(f"{v:12.4e}" for v in row[1:]))
        print(f"  -> {path}  ({time.time() - t0:.0f}s)\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
