#!/usr/bin/env python3
"""Cubic-subdomain sweep at a fixed rank grid, both strategies.

Reproduces the fixed-decomposition experiment family (time per exchange,
effective bandwidth and update rate versus subdomain size).  Desk-scale
defaults keep the run in seconds; raise --locals and --iterations for a
serious measurement.
"""

import argparse

from halolab.config import RunConfig
from halolab.reporting import emit_summary, result_rows
from halolab.runner import run_benchmark


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--proc-dims", default="4,3,2")
    parser.add_argument("--locals", default="4,6,8,10,12",
                        help="comma-separated cubic subdomain edge lengths")
    parser.add_argument("--iterations", type=int, default=50)
    parser.add_argument("--repetitions", type=int, default=5)
    parser.add_argument("--warmup", type=int, default=5)
    parser.add_argument("--m", type=int, default=19)
    parser.add_argument("--seed", type=int, default=12345)
    parser.add_argument("--out", default="results/subdomain")
    args = parser.parse_args()

    rows = []
    meta = None
    for L in (int(v) for v in args.locals.split(",")):
        for strategy in ("blocking", "nonblocking"):
            cfg = RunConfig(
                proc_dims=args.proc_dims,
                local_dims=(L, L, L),
                m=args.m,
                strategy=strategy,
                iterations=args.iterations,
                repetitions=args.repetitions,
                warmup=args.warmup,
                seed=args.seed,
            )
            record, meta = run_benchmark(cfg)
            rows.extend(result_rows(record))
            mean_t = sum(record.halo_times_s) / len(record.halo_times_s)
            print(f"L={L:3d} {strategy:12s} t_halo={mean_t:.4f}s")
    paths = emit_summary(rows, args.out, mode="subdomain", meta=meta)
    print(f"wrote {len(paths)} files under {args.out}")


if __name__ == "__main__":
    main()
