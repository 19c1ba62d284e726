"""Run the numerical verification suite and the condition reports.

The verification suite checks the pointwise inequalities, derivative
formulas, form identities, the inf-sup constant, and the trace
constant.  The condition report evaluates the solvability and
uniqueness conditions together with the energy bound for each
benchmark example.
"""

import argparse
import sys

from slipflow import verify
from slipflow.catalog import get_benchmark
from slipflow.fem import build_space, interpolate_control
from slipflow.friction import estimate_delta1, estimate_lambda0, gamma1_length
from slipflow.meshing import build_unit_square
from slipflow.solver import (Operators, check_existence_condition,
                             check_uniqueness_conditions, dual_norm,
                             energy_bound)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--mesh-n", type=int, default=8)
    args = ap.parse_args()

    reports = verify.run_all(seed=args.seed)
    for r in reports:
        print(r.summary())
    ok = all(r.passed for r in reports)

    space = build_space(build_unit_square(args.mesh_n))
    ops = Operators(space)
    lam0 = estimate_lambda0(space, ops.A).lambda0
    print(f"\nlambda0(n={args.mesh_n}) = {lam0:.6f}")
    for ex in (1, 2, 3):
        bench = get_benchmark(ex)
        d1 = estimate_delta1(bench.law)
        exist = check_existence_condition(bench.params, bench.law, lam0)
        uniq = check_uniqueness_conditions(bench.params, bench.law, lam0)
        f = interpolate_control(space, bench.f_init)
        fd = dual_norm(space, ops, ops.load_matrix @ f)
        bound = energy_bound(bench.params, bench.law, lam0, fd,
                             gamma1_len=gamma1_length(space))
        print(f"{bench.name}: delta1 {d1.value:.4e} "
              f"(envelope {d1.envelope:.4e}), "
              f"existence {'ok' if exist.ok else 'VIOLATED'}, "
              f"uniqueness {'granted' if uniq.any_ok else 'open'}, "
              f"K~ {bound.K_tilde:.4e}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
