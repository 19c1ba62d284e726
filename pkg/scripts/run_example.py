"""Run the control loop for one benchmark example on one mesh.

Prints the head and tail of the cost history and, with --out, writes
the optimized fields as a VTK file next to the history CSV.
"""

import argparse
import os
import sys
import time

from slipflow.catalog import get_benchmark
from slipflow.fem import build_space
from slipflow.meshing import build_unit_square
from slipflow.optimize import OptConfig, optimize
from slipflow.solver import Operators, SolverConfig
from slipflow.study import write_history_csv
from slipflow.vtkio import vertex_control, vertex_velocity, write_vtk


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--example", type=int, default=1, choices=(1, 2, 3))
    ap.add_argument("--mesh-n", type=int, default=8)
    ap.add_argument("--iters", type=int, default=50)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    bench = get_benchmark(args.example)
    space = build_space(build_unit_square(args.mesh_n))
    ops = Operators(space)
    t0 = time.time()
    res = optimize(space, bench.params, bench.law, bench.weights,
                   bench.u_target, bench.p_target, bench.f_init,
                   opt_cfg=OptConfig(max_iter=args.iters),
                   solver_cfg=SolverConfig(eta=bench.eta), ops=ops)
    elapsed = time.time() - t0

    print(f"{bench.name}: n={args.mesh_n}, {res.iterations} iterations, "
          f"converged={res.converged}, {elapsed:.1f}s")
    print("iter        cost  tracking_u  tracking_p         reg     |df|_L2")
    rows = list(res.history[:3]) + (["..."] if len(res.history) > 6 else []) \
        + list(res.history[-3:])
    for row in rows:
        if isinstance(row, str):
            print(row)
        else:
            print(f"{int(row[0]):4d}  " + "  ".join(f"{v:.4e}" for v in row[1:]))

    if args.out:
        os.makedirs(args.out, exist_ok=True)
        tag = f"ex{args.example}_n{args.mesh_n}"
        write_history_csv(os.path.join(args.out, f"cost_{tag}.csv"),
                          res.history)
        write_vtk(os.path.join(args.out, f"optimal_{tag}.vtk"), space.mesh,
                  vectors={"u": vertex_velocity(space, res.state.u),
                           "f": vertex_control(space, res.f)},
                  scalars={"p": res.state.p[:space.mesh.num_nodes]})
        print(f"artifacts in {args.out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
