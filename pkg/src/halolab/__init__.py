"""Desk-scale halo-exchange laboratory for lattice stencil codes.

Implements a D3Q19-style lattice field with a one-site halo shell, two
halo-exchange protocols (staged blocking with 6 messages, non-blocking
with 26 messages and a split start/end), an in-process message-passing
fabric with synchronous-send semantics, and a benchmark harness that
derives effective bandwidth, update rates, speedup and efficiency.
"""

__version__ = "0.1.0"

from . import halo, lattice, metrics, overlap, topology, transport  # noqa: F401
