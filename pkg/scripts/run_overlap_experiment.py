#!/usr/bin/env python3
"""Work-communication overlap under the deterministic transport model.

Compares three step flavours at growing workload intensity: blocking
exchange + work, non-blocking exchange + work (serial), and non-blocking
with the work inside the start/end window.  Whole-step timings.
"""

import argparse
import csv

from halolab.config import RunConfig
from halolab.runner import run_benchmark


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--proc-dims", default="1,1,1")
    parser.add_argument("--local-dims", default="16,16,16")
    parser.add_argument("--intensities", default="0,200,400,800,1600")
    parser.add_argument("--latency-us", type=float, default=500.0)
    parser.add_argument("--bandwidth-mbps", type=float, default=1e6)
    parser.add_argument("--iterations", type=int, default=10)
    parser.add_argument("--repetitions", type=int, default=3)
    parser.add_argument("--out", default="results/overlap.csv")
    args = parser.parse_args()

    common = dict(
        proc_dims=args.proc_dims,
        local_dims=tuple(int(v) for v in args.local_dims.split(",")),
        iterations=args.iterations,
        repetitions=args.repetitions,
        warmup=2,
        model_latency_us=args.latency_us,
        model_bandwidth_MBps=args.bandwidth_mbps,
    )
    rows = []
    for intensity in (int(v) for v in args.intensities.split(",")):
        timings = {}
        for label, extra in (
            ("blocking", dict(strategy="blocking")),
            ("nonblocking", dict(strategy="nonblocking")),
            ("overlapped", dict(strategy="nonblocking", overlap_enabled=True)),
        ):
            cfg = RunConfig(**common, **extra, overlap_intensity=intensity)
            record, _ = run_benchmark(cfg)
            timings[label] = min(record.step_times_s) / args.iterations
        rows.append({"intensity": intensity, **{f"t_{k}_s": v for k, v in timings.items()}})
        print(f"intensity={intensity:5d}  "
              + "  ".join(f"{k}={v * 1e3:7.2f}ms" for k, v in timings.items()))

    import pathlib

    out = pathlib.Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
