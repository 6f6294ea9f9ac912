#!/usr/bin/env python3
"""Non-cubic subdomain sweep with the x : 1.5x : 2x aspect ratio.

Isolates the communication-to-work ratio from raw message size; pair the
output with the cubic sweep to compare update rates.
"""

import argparse

from halolab.config import RunConfig
from halolab.reporting import emit_summary, result_rows
from halolab.runner import run_benchmark


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--proc-dims", default="4,3,2")
    parser.add_argument("--x", default="4,6,8,10",
                        help="comma-separated x values; dims are (x, 1.5x, 2x)")
    parser.add_argument("--iterations", type=int, default=50)
    parser.add_argument("--repetitions", type=int, default=5)
    parser.add_argument("--warmup", type=int, default=5)
    parser.add_argument("--m", type=int, default=19)
    parser.add_argument("--out", default="results/noncubic")
    args = parser.parse_args()

    rows = []
    meta = None
    for x in (int(v) for v in args.x.split(",")):
        if (3 * x) % 2:
            parser.error(f"x={x}: 1.5x must be an integer, use even x")
        dims = (x, 3 * x // 2, 2 * x)
        for strategy in ("blocking", "nonblocking"):
            cfg = RunConfig(
                proc_dims=args.proc_dims,
                local_dims=dims,
                m=args.m,
                strategy=strategy,
                iterations=args.iterations,
                repetitions=args.repetitions,
                warmup=args.warmup,
            )
            record, meta = run_benchmark(cfg)
            rows.extend(result_rows(record))
            sites = dims[0] * dims[1] * dims[2]
            mean_t = sum(record.halo_times_s) / len(record.halo_times_s)
            print(f"dims={dims} ({sites} sites) {strategy:12s} t_halo={mean_t:.4f}s")
    paths = emit_summary(rows, args.out, mode="subdomain", meta=meta)
    print(f"wrote {len(paths)} files under {args.out}")


if __name__ == "__main__":
    main()
