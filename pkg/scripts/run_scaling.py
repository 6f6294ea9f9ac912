#!/usr/bin/env python3
"""Strong scaling: fixed global lattice, growing rank grid, both strategies.

Emits runtime, common-baseline speedup, efficiency and the
nonblocking-minus-blocking runtime difference per task count.
"""

import argparse

from halolab.config import RunConfig
from halolab.errors import ConfigurationError
from halolab.reporting import emit_summary, result_rows
from halolab.runner import run_benchmark
from halolab.topology import decompose


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--global-dims", default="12,12,12")
    parser.add_argument("--proc-grids", default="1,1,1;2,1,1;2,2,1;2,2,2;4,3,2",
                        help="semicolon-separated rank grids")
    parser.add_argument("--iterations", type=int, default=50)
    parser.add_argument("--repetitions", type=int, default=5)
    parser.add_argument("--warmup", type=int, default=5)
    parser.add_argument("--m", type=int, default=19)
    parser.add_argument("--out", default="results/scaling")
    args = parser.parse_args()

    global_dims = tuple(int(v) for v in args.global_dims.split(","))
    rows = []
    meta = None
    for grid_text in args.proc_grids.split(";"):
        proc = tuple(int(v) for v in grid_text.split(","))
        try:
            local = decompose(global_dims, proc)
        except ConfigurationError as exc:
            print(f"skipping {proc}: {exc}")
            continue
        for strategy in ("blocking", "nonblocking"):
            cfg = RunConfig(
                proc_dims=proc,
                global_dims=global_dims,
                m=args.m,
                strategy=strategy,
                iterations=args.iterations,
                repetitions=args.repetitions,
                warmup=args.warmup,
            )
            record, meta = run_benchmark(cfg)
            rows.extend(result_rows(record))
            p = proc[0] * proc[1] * proc[2]
            mean_t = sum(record.halo_times_s) / len(record.halo_times_s)
            print(f"p={p:3d} local={local} {strategy:12s} t_halo={mean_t:.4f}s"
                  + ("  [oversubscribed]" if meta["oversubscribed"] else ""))
    paths = emit_summary(rows, args.out, mode="scaling", meta=meta)
    print(f"wrote {len(paths)} files under {args.out}")


if __name__ == "__main__":
    main()
