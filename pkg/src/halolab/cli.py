"""Command-line front end: bench, test-halo, regression, pingpong, model, verify.

Exit codes: 0 pass, 1 test failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import build_config
from .errors import ConfigurationError
from .halo import blocking_message_sites, nonblocking_message_sites
from .metrics import CostModelParams, comm_work_ratio, comm_work_ratio_cubic, total_cost
from .reporting import emit_summary, result_rows, verify_raw_csv, write_csv
from .runner import run_benchmark, run_regression, run_test_halo
from .transport import bandwidth_sweep, detect_plateau

_CONFIG_FLAGS = [
    # (flag, config key)
    ("--proc-dims", "proc_dims"),
    ("--local-dims", "local_dims"),
    ("--global-dims", "global_dims"),
    ("--m", "m"),
    ("--strategy", "strategy"),
    ("--iterations", "iterations"),
    ("--repetitions", "repetitions"),
    ("--tau", "tau"),
    ("--seed", "seed"),
    ("--physics", "physics"),
    ("--warmup", "warmup"),
    ("--periodic", "periodic"),
    ("--overlap-enabled", "overlap.enabled"),
    ("--overlap-intensity", "overlap.intensity"),
    ("--watchdog-seconds", "transport.watchdog_seconds"),
    ("--model-latency-us", "transport.model.latency_us"),
    ("--model-bandwidth-mbps", "transport.model.bandwidth_MBps"),
    ("--output", "output"),
]


def _add_config_arguments(parser):
    parser.add_argument("--config", metavar="FILE", help="flat key=value config file")
    parser.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="override a config key (repeatable)",
    )
    for flag, key in _CONFIG_FLAGS:
        parser.add_argument(flag, dest=f"cfg::{key}", metavar="V", default=None)


def _config_from_args(args):
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    for name, value in vars(args).items():
        if name.startswith("cfg::") and value is not None:
            overrides[name[len("cfg::"):]] = value
    return build_config(args.config, overrides)


def _cmd_bench(args):
    cfg = _config_from_args(args)
    record, meta = run_benchmark(cfg)
    rows = result_rows(record)
    outdir = cfg.output or "bench_out"
    paths = emit_summary(rows, outdir, mode=args.emit, meta=meta)
    for row in rows:
        print(
            f"{row['strategy']} P=({row['Px']},{row['Py']},{row['Pz']}) "
            f"L=({row['Lx']},{row['Ly']},{row['Lz']}) rep={row['rep']}: "
            f"t_halo={row['t_halo_total_s']:.6f}s "
            f"B_eff={row['B_eff_MBps']:.3f} MB/s "
            f"updates={row['updates_per_core']:.3e}/s"
        )
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return 0


def _cmd_test_halo(args):
    cfg = _config_from_args(args)
    strategies = ("blocking", "nonblocking") if args.strategies == "both" else (args.strategies,)
    report = run_test_halo(cfg, strategies=strategies)
    print(report.describe())
    return 0 if report.passed else 1


def _cmd_regression(args):
    cfg = _config_from_args(args)
    cfg.physics = "full"
    report = run_regression(cfg, steps=args.steps)
    print(report.describe())
    return 0 if report.passed else 1


def _cmd_pingpong(args):
    if args.sizes:
        sizes = [int(s) for s in args.sizes.split(",")]
    else:
        sizes = None
    samples = bandwidth_sweep(sizes)
    rows = [
        {
            "message_bytes": s.message_bytes,
            "round_trips": s.round_trips,
            "elapsed_s": s.elapsed_s,
            "bandwidth_MBps": s.bandwidth_MBps,
        }
        for s in samples
    ]
    out = Path(args.output or "pingpong.csv")
    write_csv(rows, out, ["message_bytes", "round_trips", "elapsed_s", "bandwidth_MBps"])
    plateau = detect_plateau(samples)
    peak = max(s.bandwidth_MBps for s in samples)
    for s in samples:
        print(f"{s.message_bytes:>9d} B  {s.bandwidth_MBps:12.1f} MB/s  ({s.round_trips} round trips)")
    print(
        f"plateau from {plateau.message_bytes} B "
        f"({plateau.bandwidth_MBps:.1f} MB/s; peak {peak:.1f} MB/s); wrote {out}"
    )
    return 0


def _cmd_model(args):
    params = CostModelParams(args.latency_us * 1e-6, args.bandwidth_mbps)
    outdir = Path(args.output or "model_out")
    outdir.mkdir(parents=True, exist_ok=True)
    m = args.m
    cost_rows = []
    for L in args.L:
        dims = (L, L, L)
        blocking = [s * 8 * m for s in blocking_message_sites(dims)]
        nonblocking = [s * 8 * m for s in nonblocking_message_sites(dims)]
        cost_rows.append({
            "L": L,
            "halo_bytes": sum(nonblocking),
            "t_blocking_6msg_s": total_cost(params, blocking),
            "t_nonblocking_26msg_s": total_cost(params, nonblocking),
            "latency_gap_s": 20 * params.latency_s,
        })
    write_csv(cost_rows, outdir / "cost_vs_L.csv",
              ["L", "halo_bytes", "t_blocking_6msg_s", "t_nonblocking_26msg_s", "latency_gap_s"])
    with open(outdir / "ratio_cubic.dat", "w") as fh:
        fh.write("# L  comm_work_ratio\n")
        for L in range(1, 65):
            fh.write(f"{L} {comm_work_ratio_cubic(L)!r}\n")
    with open(outdir / "ratio_noncubic.dat", "w") as fh:
        fh.write("# x  comm_work_ratio(x, 1.5x, 2x)\n")
        for x in range(2, 58, 2):
            fh.write(f"{x} {comm_work_ratio((x, 3 * x // 2, 2 * x))!r}\n")
    print(f"wrote analytic sweeps to {outdir}")
    return 0


def _cmd_verify(args):
    problems = verify_raw_csv(args.input)
    if problems:
        for p in problems:
            print(p)
        print(f"verify FAILED: {len(problems)} derived values do not recompute")
        return 1
    print(f"verify passed: every derived column of {args.input} recomputes bit-exactly")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="halolab",
        description="halo-exchange laboratory: protocols, tests and benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", help="run the configured benchmark and emit CSV")
    _add_config_arguments(p)
    p.add_argument("--emit", choices=("subdomain", "scaling", "none"),
                   default="subdomain", help="which plot-ready files to write")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("test-halo", help="boundary-value halo correctness test")
    _add_config_arguments(p)
    p.add_argument("--strategies", choices=("blocking", "nonblocking", "both"),
                   default="both")
    p.set_defaults(func=_cmd_test_halo)

    p = sub.add_parser("regression", help="full-physics agreement of both strategies")
    _add_config_arguments(p)
    p.add_argument("--steps", type=int, default=10)
    p.set_defaults(func=_cmd_regression)

    p = sub.add_parser("pingpong", help="two-rank bandwidth sweep on this host")
    p.add_argument("--sizes", help="comma-separated message sizes in bytes")
    p.add_argument("--output", help="CSV path (default pingpong.csv)")
    p.set_defaults(func=_cmd_pingpong)

    p = sub.add_parser("model", help="analytic cost-model and ratio sweeps")
    p.add_argument("--latency-us", type=float, default=1.0)
    p.add_argument("--bandwidth-mbps", type=float, default=350.0)
    p.add_argument("--m", type=int, default=19)
    p.add_argument("--L", type=int, nargs="+", default=[8, 16, 24, 32, 48, 64])
    p.add_argument("--output", help="output directory (default model_out)")
    p.set_defaults(func=_cmd_model)

    p = sub.add_parser("verify", help="recompute derived columns of a raw CSV")
    p.add_argument("--input", required=True)
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
