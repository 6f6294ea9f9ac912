"""Halo-exchange protocols over the transport fabric.

Two strategies fill the one-site halo shell of a DistributionField:

* staged blocking: three stages (X, then Y, then Z) of two messages each.
  The Y stage sends (Lx+2)*Lz columns including the X halo just received
  and the Z stage sends full (Lx+2)*(Ly+2) slabs; this transitive
  forwarding is what lets 6 messages deliver all 26 neighbour
  contributions and must not be trimmed to interior-only buffers.
* non-blocking: 26 direct messages (6 planes, 12 edges, 8 corners), split
  into a start (post all receives, pack, post sends, no wait of any kind)
  and an end (drain receives via wait_any, unpack, drain sends).

Both strategies move exactly the same bytes per exchange and leave
bit-identical halo shells.  All m components of every boundary site are
exchanged, corners included, regardless of the velocity model.

Pack order is canonical: ascending (x, y, z) site order, ascending
component within a site; buffers are C-ordered slices so this falls out
of the storage layout.  Tags are ``sequence*32 + message_id`` where ids
0..25 are the non-blocking displacement indices and 26..31 the blocking
stage messages, which keeps a rank's own messages distinguishable when it
exchanges with itself on single-rank-per-dimension periodic grids.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConfigurationError, TransportDeadlock, UsageError
from .topology import (
    BACKWARD,
    DISPLACEMENTS,
    FORWARD,
    HaloNeighbour,
    NO_NEIGHBOUR,
    OPPOSITE_DISPLACEMENT,
    build_neighbour_table,
)

GROUP_PLANES = tuple(
    i for i, d in enumerate(DISPLACEMENTS) if sum(abs(c) for c in d) == 1
)
GROUP_EDGES = tuple(
    i for i, d in enumerate(DISPLACEMENTS) if sum(abs(c) for c in d) == 2
)
GROUP_CORNERS = tuple(
    i for i, d in enumerate(DISPLACEMENTS) if sum(abs(c) for c in d) == 3
)
GROUPS = {"planes": GROUP_PLANES, "edges": GROUP_EDGES, "corners": GROUP_CORNERS}

_TAG_STRIDE = 32
_STAGE_NAMES = ("X", "Y", "Z")


def blocking_message_id(dim, direction):
    """Ids 26..31 for the six staged messages, (dim, travel direction)."""
    return 26 + 2 * dim + direction


@dataclass
class ExchangeCounters:
    """Instrumentation for the bench harness: message, byte and wait counts."""

    sends: int = 0
    recvs: int = 0
    bytes_sent: int = 0
    bytes_received: int = 0
    waits: int = 0

    def reset(self):
        self.sends = self.recvs = 0
        self.bytes_sent = self.bytes_received = 0
        self.waits = 0

    def snapshot(self):
        return ExchangeCounters(
            self.sends, self.recvs, self.bytes_sent, self.bytes_received, self.waits
        )


def _extents(local_dims, d):
    return tuple(1 if d[a] != 0 else local_dims[a] for a in range(3))


def displacement_sites(local_dims, d):
    ex, ey, ez = _extents(local_dims, d)
    return ex * ey * ez


def nonblocking_message_sites(local_dims):
    """Site count of each of the 26 direct messages, displacement order."""
    return [displacement_sites(local_dims, d) for d in DISPLACEMENTS]


def blocking_message_sites(local_dims):
    """Site count of each of the 6 staged messages, stage order (X, Y, Z)."""
    lx, ly, lz = local_dims
    per_stage = (ly * lz, (lx + 2) * lz, (lx + 2) * (ly + 2))
    out = []
    for sites in per_stage:
        out.extend((sites, sites))
    return out


def _send_slices(local_dims, d):
    # interior source region for a message travelling toward displacement d
    out = []
    for a in range(3):
        hi = local_dims[a]
        if d[a] < 0:
            out.append(slice(1, 2))
        elif d[a] > 0:
            out.append(slice(hi, hi + 1))
        else:
            out.append(slice(1, hi + 1))
    return tuple(out)


def _halo_slices(local_dims, d):
    # halo shell region holding the neighbour at displacement d
    out = []
    for a in range(3):
        hi = local_dims[a]
        if d[a] < 0:
            out.append(slice(0, 1))
        elif d[a] > 0:
            out.append(slice(hi + 1, hi + 2))
        else:
            out.append(slice(1, hi + 1))
    return tuple(out)


def _stage_send_slices(local_dims, dim, direction):
    # dims already swept are sent whole (halo included), later dims interior-only
    out = []
    for a in range(3):
        hi = local_dims[a]
        if a < dim:
            out.append(slice(0, hi + 2))
        elif a > dim:
            out.append(slice(1, hi + 1))
        elif direction == BACKWARD:
            out.append(slice(1, 2))
        else:
            out.append(slice(hi, hi + 1))
    return tuple(out)


def _stage_halo_slices(local_dims, dim, side):
    out = []
    for a in range(3):
        hi = local_dims[a]
        if a < dim:
            out.append(slice(0, hi + 2))
        elif a > dim:
            out.append(slice(1, hi + 1))
        elif side == BACKWARD:
            out.append(slice(0, 1))
        else:
            out.append(slice(hi + 1, hi + 2))
    return tuple(out)


def _stage_shape(local_dims, dim, m):
    lx, ly, lz = local_dims
    if dim == 0:
        return (1, ly, lz, m)
    if dim == 1:
        return (lx + 2, 1, lz, m)
    return (lx + 2, ly + 2, 1, m)


class HaloBuffers:
    """Persistent staging arrays and neighbour tables for one rank's exchanges.

    Owns the send/receive buffers for both strategies, the in-flight
    request bookkeeping, the exchange sequence number used for tags and
    the instrumentation counters.
    """

    def __init__(self, topo, rank, local_dims, m, endpoint):
        self.rank = int(rank)
        self.local_dims = tuple(int(v) for v in local_dims)
        self.m = int(m)
        if min(self.local_dims) < 1:
            raise ConfigurationError("local dimensions must be at least 1")
        self.endpoint = endpoint
        self.neighbours = build_neighbour_table(topo, rank)
        self.send_full = [
            np.zeros(_extents(self.local_dims, d) + (self.m,)) for d in DISPLACEMENTS
        ]
        self.recv_full = [
            np.zeros(_extents(self.local_dims, d) + (self.m,)) for d in DISPLACEMENTS
        ]
        self.send_stage = {}
        self.recv_stage = {}
        for dim in range(3):
            shape = _stage_shape(self.local_dims, dim, self.m)
            for direction in (BACKWARD, FORWARD):
                self.send_stage[(dim, direction)] = np.zeros(shape)
                self.recv_stage[(dim, direction)] = np.zeros(shape)
        self.seq = 0
        self.counters = ExchangeCounters()

    def check_field(self, field):
        if field.local_dims != self.local_dims or field.m != self.m:
            raise ConfigurationError(
                f"field {field.local_dims}/m={field.m} does not match buffers "
                f"{self.local_dims}/m={self.m}"
            )

    def _tag(self, seq, message_id):
        return seq * _TAG_STRIDE + message_id


@dataclass
class ExchangeToken:
    """In-flight non-blocking exchange: request arrays plus the tag sequence."""

    seq: int
    recv_entries: list = dc_field(default_factory=list)  # (displacement idx, handle)
    send_handles: list = dc_field(default_factory=list)
    finished: bool = False


def pack_group(field, group, buffers):
    """Copy the boundary sites for one message group into the send buffers."""
    buffers.check_field(field)
    try:
        indices = GROUPS[group]
    except KeyError:
        raise ValueError(f"unknown group {group!r}; expected planes|edges|corners") from None
    for idx in indices:
        sl = _send_slices(buffers.local_dims, DISPLACEMENTS[idx])
        buffers.send_full[idx][...] = field.data[sl]


def unpack_halo_buffers(buffers, field):
    """Write every received direct-message buffer into the halo shell."""
    buffers.check_field(field)
    for idx, d in enumerate(DISPLACEMENTS):
        if buffers.neighbours.full[idx] == NO_NEIGHBOUR:
            continue
        field.data[_halo_slices(buffers.local_dims, d)] = buffers.recv_full[idx]


def exchange_nonblocking_start(field, topo, buffers):
    """Post the 26 receives, pack per group, post the 26 sends; never waits.

    Receives go up first so every send can match immediately; sends are
    posted as soon as their group's buffers are filled.  Returns the token
    for exchange_nonblocking_end.
    """
    buffers.check_field(field)
    seq = buffers.seq
    buffers.seq += 1
    ep = buffers.endpoint
    token = ExchangeToken(seq=seq)
    doubles = 8 * buffers.m
    for idx in range(26):
        src = buffers.neighbours.full[idx]
        if src == NO_NEIGHBOUR:
            continue
        capacity = displacement_sites(buffers.local_dims, DISPLACEMENTS[idx]) * doubles
        h = ep.post_recv(src, buffers._tag(seq, OPPOSITE_DISPLACEMENT[idx]), capacity)
        token.recv_entries.append((idx, h))
        buffers.counters.recvs += 1
    for group in ("planes", "edges", "corners"):
        pack_group(field, group, buffers)
        for idx in GROUPS[group]:
            dest = buffers.neighbours.full[idx]
            if dest == NO_NEIGHBOUR:
                continue
            payload = buffers.send_full[idx].tobytes()
            h = ep.post_send(dest, buffers._tag(seq, idx), payload)
            token.send_handles.append(h)
            buffers.counters.sends += 1
            buffers.counters.bytes_sent += len(payload)
    return token


def exchange_nonblocking_end(token, field, buffers):
    """Drain all receives via repeated wait_any, unpack, then drain the sends."""
    buffers.check_field(field)
    if token.finished:
        raise UsageError("exchange token already completed")
    ep = buffers.endpoint
    recv_handles = [h for _, h in token.recv_entries]
    try:
        for _ in range(len(recv_handles)):
            ep.wait_any(recv_handles)
    except TransportDeadlock as exc:
        outstanding = sorted(
            HaloNeighbour(idx).name
            for idx, h in token.recv_entries
            if not h._consumed
        )
        raise TransportDeadlock(
            f"non-blocking end stalled; outstanding receives: {outstanding}",
            pending=exc.pending,
        ) from exc
    for idx, h in token.recv_entries:
        staged = buffers.recv_full[idx]
        staged[...] = np.frombuffer(h.payload, dtype=np.float64).reshape(staged.shape)
        buffers.counters.bytes_received += len(h.payload)
    unpack_halo_buffers(buffers, field)
    for _ in range(len(token.send_handles)):
        ep.wait_any(token.send_handles)
    buffers.counters.waits += 1  # one logical completion barrier
    token.finished = True


def exchange_nonblocking(field, topo, buffers):
    """Start immediately followed by end; no overlapped work."""
    token = exchange_nonblocking_start(field, topo, buffers)
    exchange_nonblocking_end(token, field, buffers)


def exchange_blocking(field, topo, buffers):
    """Staged 6-message exchange: per dimension post receives, pack, send, wait.

    Each stage blocks on its own wait_all before the next begins, so the
    whole exchange waits exactly three times.
    """
    buffers.check_field(field)
    seq = buffers.seq
    buffers.seq += 1
    ep = buffers.endpoint
    orth = buffers.neighbours.orthogonal
    dims = buffers.local_dims
    for dim in range(3):
        recv_entries = []
        for side in (BACKWARD, FORWARD):
            src = orth[side][dim]
            if src == NO_NEIGHBOUR:
                continue
            # the halo on this side carries the neighbour's opposite-travel send
            sender_direction = FORWARD if side == BACKWARD else BACKWARD
            capacity = buffers.send_stage[(dim, sender_direction)].nbytes
            h = ep.post_recv(src, buffers._tag(seq, blocking_message_id(dim, sender_direction)), capacity)
            recv_entries.append((side, h))
            buffers.counters.recvs += 1
        send_handles = []
        for direction in (BACKWARD, FORWARD):
            dest = orth[direction][dim]
            if dest == NO_NEIGHBOUR:
                continue
            staged = buffers.send_stage[(dim, direction)]
            staged[...] = field.data[_stage_send_slices(dims, dim, direction)]
            payload = staged.tobytes()
            h = ep.post_send(dest, buffers._tag(seq, blocking_message_id(dim, direction)), payload)
            send_handles.append(h)
            buffers.counters.sends += 1
            buffers.counters.bytes_sent += len(payload)
        try:
            ep.wait_all([h for _, h in recv_entries] + send_handles)
        except TransportDeadlock as exc:
            raise TransportDeadlock(
                f"blocked in {_STAGE_NAMES[dim]} stage: {exc}", pending=exc.pending
            ) from exc
        buffers.counters.waits += 1
        for side, h in recv_entries:
            staged = buffers.recv_stage[(dim, side)]
            staged[...] = np.frombuffer(h.payload, dtype=np.float64).reshape(staged.shape)
            field.data[_stage_halo_slices(dims, dim, side)] = staged
            buffers.counters.bytes_received += len(h.payload)


def exchange(field, topo, buffers, strategy):
    """Dispatch one full halo exchange by strategy name."""
    if strategy == "blocking":
        exchange_blocking(field, topo, buffers)
    elif strategy == "nonblocking":
        exchange_nonblocking(field, topo, buffers)
    else:
        raise ConfigurationError(f"unknown halo strategy {strategy!r}")


def halo_shell(field):
    """Copy of the field data with the interior zeroed, for shell comparisons."""
    out = field.data.copy()
    out[1:-1, 1:-1, 1:-1, :] = 0.0
    return out
