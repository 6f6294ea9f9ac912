"""Cartesian rank topology: periodic wrap, 6- and 26-neighbour tables.

Ranks are laid out row-major (x slowest): rank = (x*Py + y)*Pz + z.  The
26 off-centre displacements are enumerated x-outer, y-middle, z-inner over
{-1, 0, +1} with (0, 0, 0) skipped, and named by letters N/M/P per axis
(Negative, Middle, Positive), so NNN is (-1,-1,-1) and PPP is (+1,+1,+1).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from itertools import product

from .errors import BoundaryError, ConfigurationError

NO_NEIGHBOUR = -1

BACKWARD, FORWARD = 0, 1
X, Y, Z = 0, 1, 2

_LETTER = {-1: "N", 0: "M", 1: "P"}

DISPLACEMENTS = tuple(d for d in product((-1, 0, 1), repeat=3) if d != (0, 0, 0))

HaloNeighbour = IntEnum(
    "HaloNeighbour",
    {"".join(_LETTER[c] for c in d): i for i, d in enumerate(DISPLACEMENTS)},
)

_DISPLACEMENT_INDEX = {d: i for i, d in enumerate(DISPLACEMENTS)}

# index(-d) == 25 - index(d) under the fixed enumeration order
OPPOSITE_DISPLACEMENT = tuple(25 - i for i in range(26))

# the six orthogonal displacements, keyed (direction, dim)
ORTHOGONAL_INDEX = {
    (direction, dim): _DISPLACEMENT_INDEX[
        tuple(
            (1 if direction == FORWARD else -1) if a == dim else 0 for a in range(3)
        )
    ]
    for direction in (BACKWARD, FORWARD)
    for dim in (X, Y, Z)
}


def displacement_index(d):
    """Index of a displacement in the fixed NNN..PPP order."""
    try:
        return _DISPLACEMENT_INDEX[tuple(d)]
    except KeyError:
        raise ValueError(f"{d} is not a valid off-centre displacement") from None


@dataclass(frozen=True)
class CartesianTopology:
    """Rank <-> 3D coordinate mapping with optional periodic wrap per dimension."""

    dims: tuple
    periodic: tuple = (True, True, True)

    def __post_init__(self):
        dims = tuple(int(v) for v in self.dims)
        if len(dims) != 3 or min(dims) < 1:
            raise ConfigurationError(f"invalid rank grid {self.dims}")
        if isinstance(self.periodic, bool):
            per = (self.periodic,) * 3
        else:
            per = tuple(bool(v) for v in self.periodic)
        if len(per) != 3:
            raise ConfigurationError("periodic must give one flag per dimension")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "periodic", per)

    @property
    def nranks(self):
        px, py, pz = self.dims
        return px * py * pz

    def wrap(self, coords):
        """Apply periodic wrap; raise BoundaryError off a non-periodic edge."""
        out = []
        for c, n, per in zip(coords, self.dims, self.periodic):
            c = int(c)
            if per:
                c %= n
            elif not 0 <= c < n:
                raise BoundaryError(
                    f"coordinate {tuple(coords)} leaves the non-periodic grid {self.dims}"
                )
            out.append(c)
        return tuple(out)

    def cart_rank(self, coords):
        """Row-major rank of (possibly out-of-range, periodic) coordinates."""
        x, y, z = self.wrap(coords)
        _, py, pz = self.dims
        return (x * py + y) * pz + z

    def cart_coords(self, rank):
        rank = int(rank)
        if not 0 <= rank < self.nranks:
            raise ConfigurationError(f"rank {rank} outside 0..{self.nranks - 1}")
        _, py, pz = self.dims
        x, rem = divmod(rank, py * pz)
        y, z = divmod(rem, pz)
        return (x, y, z)

    def _neighbour(self, coords, disp):
        try:
            return self.cart_rank(tuple(c + d for c, d in zip(coords, disp)))
        except BoundaryError:
            return NO_NEIGHBOUR

    def orthogonal_neighbours(self, rank):
        """2x3 table indexed [direction][dim]; NO_NEIGHBOUR past open edges."""
        coords = self.cart_coords(rank)
        table = []
        for direction in (BACKWARD, FORWARD):
            step = 1 if direction == FORWARD else -1
            row = []
            for dim in (X, Y, Z):
                disp = tuple(step if a == dim else 0 for a in range(3))
                row.append(self._neighbour(coords, disp))
            table.append(tuple(row))
        return tuple(table)

    def full_neighbours(self, rank):
        """All 26 neighbour ranks in the fixed NNN..PPP displacement order."""
        coords = self.cart_coords(rank)
        return tuple(self._neighbour(coords, d) for d in DISPLACEMENTS)


@dataclass(frozen=True)
class NeighbourTable:
    """Per-rank neighbour ranks: the 2x3 orthogonal table and the full 26."""

    orthogonal: tuple
    full: tuple


def build_neighbour_table(topo, rank):
    return NeighbourTable(
        orthogonal=topo.orthogonal_neighbours(rank),
        full=topo.full_neighbours(rank),
    )


def decompose(global_dims, proc_dims):
    """Uniform per-rank local dimensions; rejects non-divisible splits."""
    local = []
    for g, p in zip(global_dims, proc_dims):
        g, p = int(g), int(p)
        if g < 1 or p < 1:
            raise ConfigurationError("dimensions must be positive")
        if g % p:
            raise ConfigurationError(
                f"global extent {g} not divisible by {p} ranks in that dimension"
            )
        local.append(g // p)
    return tuple(local)
