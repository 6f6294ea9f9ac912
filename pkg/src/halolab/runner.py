"""Rank orchestration: spawn one thread per subdomain and run the harnesses.

Ranks are threads on one machine, so configurations beyond the hardware
parallelism run fine for correctness work but their timings are flagged
as oversubscribed in the metadata.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass
from time import perf_counter

import numpy as np

from . import lattice
from .config import RunConfig  # noqa: F401  (re-export convenience)
from .errors import TransportAborted
from .halo import ExchangeCounters, HaloBuffers, exchange
from .metrics import BenchRecord
from .overlap import OverlapWorkload, step_with_overlap, synthetic_workload
from .topology import CartesianTopology
from .transport import Fabric, TransportModel


@dataclass
class RankContext:
    """What a rank body gets handed: its endpoint plus a shared barrier."""

    rank: int
    nranks: int
    endpoint: object
    barrier: threading.Barrier


def run_ranks(nranks, body, watchdog_seconds=30.0, model=None):
    """Run ``body(ctx)`` on one thread per rank; return the per-rank results.

    The first rank failure aborts the fabric and the barrier so peers fail
    fast instead of hitting the watchdog; that first error is re-raised.
    """
    fabric = Fabric(nranks, watchdog_seconds=watchdog_seconds, model=model)
    barrier = threading.Barrier(nranks)
    results = [None] * nranks
    errors = []

    def run_one(rank):
        ctx = RankContext(rank, nranks, fabric.endpoint(rank), barrier)
        try:
            results[rank] = body(ctx)
        except BaseException as exc:  # noqa: BLE001 - collected and re-raised
            errors.append((rank, exc))
            barrier.abort()
            fabric.abort(f"rank {rank} failed: {exc!r}")

    threads = [
        threading.Thread(target=run_one, args=(r,), name=f"rank-{r}", daemon=True)
        for r in range(nranks)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        # prefer the root cause over secondary barrier/abort fallout
        def precedence(item):
            _, exc = item
            secondary = isinstance(exc, (threading.BrokenBarrierError, TransportAborted))
            return (secondary, item[0])

        errors.sort(key=precedence)
        raise errors[0][1]
    fabric.assert_drained()
    return results


def _transport_model(cfg):
    if cfg.model_latency_us is None:
        return None
    return TransportModel(cfg.model_latency_us * 1e-6, cfg.model_bandwidth_MBps)


def _rank_rng(cfg, rank):
    return np.random.default_rng([cfg.seed, rank])


def _build_field(cfg, local_dims, rank, vs=None):
    rng = _rank_rng(cfg, rank)
    if vs is not None:
        return lattice.random_state(local_dims, vs, rng)
    field = lattice.DistributionField(local_dims, cfg.m)
    field.interior()[...] = rng.uniform(0.5, 1.5, size=field.interior().shape)
    return field


@dataclass
class _RankTiming:
    t_halo: float
    t_step: float
    counters: ExchangeCounters


def _bench_body(cfg, topo, local_dims):
    vs = lattice.velocity_set_for(cfg.m) if cfg.physics == "full" else None
    # any nonzero intensity attaches halo-independent work to every step;
    # overlap_enabled decides whether it runs inside the start/end window
    # or serially after the exchange
    if cfg.overlap_enabled or cfg.overlap_intensity > 0:
        workload = OverlapWorkload(cfg.overlap_intensity)
    else:
        workload = None

    def body(ctx):
        field = _build_field(cfg, local_dims, ctx.rank, vs)
        alt = lattice.DistributionField(local_dims, cfg.m) if vs is not None else None
        buffers = HaloBuffers(topo, ctx.rank, local_dims, cfg.m, ctx.endpoint)

        def one_step(fld, spare):
            if workload is not None and cfg.overlap_enabled:
                step_with_overlap(fld, topo, buffers, workload)
            else:
                exchange(fld, topo, buffers, cfg.strategy)
                if workload is not None:
                    synthetic_workload(fld, workload.intensity)
            if vs is not None:
                spare = lattice.stream(fld, vs, out=spare)
                fld, spare = spare, fld
                lattice.collide(fld, cfg.tau, vs)
            return fld, spare

        for _ in range(cfg.warmup):
            field, alt = one_step(field, alt)
        buffers.counters.reset()
        ctx.barrier.wait()
        t_halo = 0.0
        t0 = perf_counter()
        if workload is not None:
            # whole-step timing: overlapped work belongs inside the span
            for _ in range(cfg.iterations):
                field, alt = one_step(field, alt)
            t_halo = perf_counter() - t0
        else:
            for _ in range(cfg.iterations):
                h0 = perf_counter()
                exchange(field, topo, buffers, cfg.strategy)
                t_halo += perf_counter() - h0
                if vs is not None:
                    alt = lattice.stream(field, vs, out=alt)
                    field, alt = alt, field
                    lattice.collide(field, cfg.tau, vs)
        ctx.barrier.wait()
        t_step = perf_counter() - t0
        return _RankTiming(t_halo, t_step, buffers.counters.snapshot())

    return body


def run_benchmark(cfg):
    """Execute the configured benchmark; returns (BenchRecord, metadata dict).

    Per repetition all ranks are re-spawned, warm up untimed, then run the
    timed loop between barriers so the row reflects the slowest rank.
    """
    cfg.validate()
    proc, local, _ = cfg.resolve_dims()
    topo = CartesianTopology(proc, periodic=cfg.periodic)
    body = _bench_body(cfg, topo, local)
    model = _transport_model(cfg)
    halo_times, step_times, bytes_sent, messages, waits = [], [], [], [], []
    for _ in range(cfg.repetitions):
        outs = run_ranks(topo.nranks, body, watchdog_seconds=cfg.watchdog_seconds, model=model)
        halo_times.append(max(o.t_halo for o in outs))
        step_times.append(max(o.t_step for o in outs))
        bytes_sent.append(sum(o.counters.bytes_sent for o in outs))
        messages.append(sum(o.counters.sends for o in outs))
        waits.append(sum(o.counters.waits for o in outs))
    whole_step = cfg.overlap_enabled or cfg.overlap_intensity > 0
    record = BenchRecord(
        strategy=cfg.strategy,
        proc_dims=proc,
        local_dims=local,
        m=cfg.m,
        iterations=cfg.iterations,
        halo_times_s=halo_times,
        step_times_s=step_times,
        bytes_sent=bytes_sent,
        messages_sent=messages,
        waits=waits,
        timing_scope="whole_step" if whole_step else "halo_only",
    )
    meta = cfg.meta()
    meta["timing_scope"] = record.timing_scope
    meta["oversubscribed"] = topo.nranks > (os.cpu_count() or 1)
    return record, meta


# -- test_halo ------------------------------------------------------------


def encode_boundary_value(rank, site, i, local_dims):
    """Distinct nonzero value for component i of a boundary site on a rank."""
    lx, ly, lz = local_dims
    x, y, z = site
    code = ((rank * (lx + 2) + x) * (ly + 2) + y) * (lz + 2) + z
    return float(code * 32 + i + 1)


def make_pattern_field(local_dims, m, rank):
    """Zero field with every interior boundary site set to its encoded values."""
    lx, ly, lz = local_dims
    field = lattice.DistributionField(local_dims, m)
    xs = np.arange(1, lx + 1)[:, None, None]
    ys = np.arange(1, ly + 1)[None, :, None]
    zs = np.arange(1, lz + 1)[None, None, :]
    code = ((rank * (lx + 2) + xs) * (ly + 2) + ys) * (lz + 2) + zs
    values = code[..., None] * 32 + np.arange(m) + 1
    boundary = (
        (xs == 1) | (xs == lx) | (ys == 1) | (ys == ly) | (zs == 1) | (zs == lz)
    )
    interior = field.interior()
    interior[...] = np.where(boundary[..., None], values.astype(np.float64), 0.0)
    return field


@dataclass
class HaloMismatch:
    strategy: str
    rank: int
    site: tuple
    component: int
    expected: float
    got: float


@dataclass
class HaloTestReport:
    checked_sites: int
    failures: list

    @property
    def passed(self):
        return not self.failures

    @property
    def first_failure(self):
        return self.failures[0] if self.failures else None

    def describe(self):
        if self.passed:
            return f"test-halo passed ({self.checked_sites} halo sites checked)"
        f = self.first_failure
        return (
            f"test-halo FAILED at strategy={f.strategy} rank={f.rank} "
            f"site={f.site} component={f.component}: "
            f"expected {f.expected!r}, got {f.got!r} "
            f"({len(self.failures)} mismatching values in total)"
        )


def verify_halo_pattern(data, topo, rank, local_dims, m, strategy="?"):
    """Check every halo site against the independently computed neighbour value.

    Expected values come straight from coordinate arithmetic on the rank
    grid, not from any exchange machinery.  Halo sites across an open
    boundary must still hold their initial zeros.
    """
    lx, ly, lz = local_dims
    coords = topo.cart_coords(rank)
    failures = []
    checked = 0
    for x in range(lx + 2):
        for y in range(ly + 2):
            for z in range(lz + 2):
                if 1 <= x <= lx and 1 <= y <= ly and 1 <= z <= lz:
                    continue
                checked += 1
                owner_coords = []
                local_site = []
                missing = False
                for c, h, n, L, per in zip(
                    coords, (x, y, z), topo.dims, local_dims, topo.periodic
                ):
                    g = c * L + (h - 1)
                    if per:
                        g %= n * L
                    elif not 0 <= g < n * L:
                        missing = True
                        break
                    owner_coords.append(g // L)
                    local_site.append(g % L + 1)
                if missing:
                    expected = np.zeros(m)
                else:
                    owner = topo.cart_rank(owner_coords)
                    expected = np.array([
                        encode_boundary_value(owner, local_site, i, local_dims)
                        for i in range(m)
                    ])
                got = data[x, y, z, :]
                if not np.array_equal(got, expected):
                    bad = int(np.nonzero(got != expected)[0][0])
                    failures.append(HaloMismatch(
                        strategy, rank, (x, y, z), bad,
                        float(expected[bad]), float(got[bad]),
                    ))
    return checked, failures


def run_test_halo(cfg, strategies=("blocking", "nonblocking")):
    """Unit test of the exchange itself: encoded boundary values must land
    on exactly the right halo sites of every neighbour."""
    cfg.validate()
    proc, local, _ = cfg.resolve_dims()
    topo = CartesianTopology(proc, periodic=cfg.periodic)
    checked_total = 0
    failures = []
    for strategy in strategies:
        def body(ctx, strategy=strategy):
            field = make_pattern_field(local, cfg.m, ctx.rank)
            buffers = HaloBuffers(topo, ctx.rank, local, cfg.m, ctx.endpoint)
            exchange(field, topo, buffers, strategy)
            return field.data.copy()

        outs = run_ranks(topo.nranks, body, watchdog_seconds=cfg.watchdog_seconds)
        for rank, data in enumerate(outs):
            checked, bad = verify_halo_pattern(data, topo, rank, local, cfg.m, strategy)
            checked_total += checked
            failures.extend(bad)
    return HaloTestReport(checked_total, failures)


# -- regression ------------------------------------------------------------


@dataclass
class RegressionReport:
    steps: int
    max_delta: float
    location: tuple  # (rank, site, component) or None
    tolerance: float = 1e-12

    @property
    def passed(self):
        return self.max_delta <= self.tolerance

    def describe(self):
        verdict = "passed" if self.passed else "FAILED"
        where = "" if self.location is None else f" at rank={self.location[0]} site={self.location[1]} i={self.location[2]}"
        return (
            f"regression {verdict}: {self.steps} steps, "
            f"max |delta| = {self.max_delta:.3e}{where} (tolerance {self.tolerance:.0e})"
        )


def run_physics(cfg, strategy, steps):
    """Seeded full-physics run (exchange, stream, collide); per-rank final data."""
    proc, local, _ = cfg.resolve_dims()
    topo = CartesianTopology(proc, periodic=cfg.periodic)
    vs = lattice.velocity_set_for(cfg.m)

    def body(ctx):
        field = lattice.random_state(local, vs, _rank_rng(cfg, ctx.rank))
        alt = lattice.DistributionField(local, cfg.m)
        buffers = HaloBuffers(topo, ctx.rank, local, cfg.m, ctx.endpoint)
        for _ in range(steps):
            exchange(field, topo, buffers, strategy)
            alt = lattice.stream(field, vs, out=alt)
            field, alt = alt, field
            lattice.collide(field, cfg.tau, vs)
        return field.data.copy()

    return run_ranks(topo.nranks, body, watchdog_seconds=cfg.watchdog_seconds,
                     model=_transport_model(cfg))


def run_regression(cfg, steps=None):
    """Run both strategies from one seeded state; fields must agree to 1e-12."""
    cfg.validate()
    if steps is None:
        steps = cfg.iterations
    blocking = run_physics(cfg, "blocking", steps)
    nonblocking = run_physics(cfg, "nonblocking", steps)
    max_delta = 0.0
    location = None
    for rank, (a, b) in enumerate(zip(blocking, nonblocking)):
        delta = np.abs(a[1:-1, 1:-1, 1:-1, :] - b[1:-1, 1:-1, 1:-1, :])
        worst = float(delta.max()) if delta.size else 0.0
        if worst > max_delta:
            max_delta = worst
            x, y, z, i = np.unravel_index(int(delta.argmax()), delta.shape)
            location = (rank, (int(x) + 1, int(y) + 1, int(z) + 1), int(i))
    return RegressionReport(steps=steps, max_delta=max_delta, location=location)
