"""Seeded random local wiring of the processing layer.

Every neuron draws ``connections`` partners from the square window of
half-width ``radius`` centred on itself.  Partners are stored as directed
out-lists in compressed row form (``indptr``/``indices``), the same layout
scipy uses for CSR matrices, so later stages can build sparse operators
without copying.

Random numbers come from numpy's PCG64 generator.  Neurons are processed in
fixed chunks of 4096 and chunk ``c`` is seeded with
``SeedSequence(seed, spawn_key=(c,))``; the wiring therefore depends only on
``(dims, config)`` and never on the number of worker threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._parallel import CHUNK, map_chunks
from .errors import ConfigError, InfeasibleConfigError, InvalidDimensionsError

BORDER_POLICIES = ("resample", "clamp", "drop")
RNG_ALGORITHM = "numpy.PCG64 via SeedSequence(seed, spawn_key=(chunk,)), chunk=4096 neurons"


@dataclass(frozen=True)
class GridDims:
    width: int
    height: int

    def __post_init__(self):
        if int(self.width) < 1 or int(self.height) < 1:
            raise InvalidDimensionsError(
                f"grid must have positive area, got {self.width}x{self.height}"
            )

    @property
    def size(self) -> int:
        return self.width * self.height

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape ``(height, width)``."""
        return (self.height, self.width)

    def coords(self, k):
        """Row-major index -> ``(x, y)``."""
        y, x = np.divmod(k, self.width)
        return x, y

    def index(self, x, y):
        return y * self.width + x


@dataclass(frozen=True)
class TopologyConfig:
    radius: int = 5
    connections: int | None = None  # None means 8 * radius
    seed: int = 0
    border_policy: str = "resample"
    max_retries: int = 16  # rounds spent re-drawing duplicate partners

    def __post_init__(self):
        if self.radius < 1:
            raise ConfigError(f"radius must be >= 1, got {self.radius}")
        if self.connections is not None and self.connections < 1:
            raise ConfigError(f"connections must be >= 1, got {self.connections}")
        if self.border_policy not in BORDER_POLICIES:
            raise ConfigError(
                f"border_policy must be one of {BORDER_POLICIES}, got {self.border_policy!r}"
            )
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")

    @property
    def degree(self) -> int:
        return 8 * self.radius if self.connections is None else self.connections


@dataclass(frozen=True, eq=False)
class RandomTopology:
    dims: GridDims
    config: TopologyConfig
    indptr: np.ndarray
    indices: np.ndarray
    duplicates: int = 0
    _owners: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_neurons(self) -> int:
        return self.dims.size

    @property
    def n_edges(self) -> int:
        return int(self.indices.size)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def owners(self) -> np.ndarray:
        """Source neuron of every stored connection, aligned with ``indices``."""
        if self._owners is None:
            own = np.repeat(np.arange(self.n_neurons, dtype=np.int32), self.degrees)
            own.flags.writeable = False
            object.__setattr__(self, "_owners", own)
        return self._owners

    def neighbors(self, k: int) -> np.ndarray:
        return neighbors(self, k)

    def as_lists(self) -> list[list[int]]:
        return [self.indices[a:b].tolist() for a, b in zip(self.indptr[:-1], self.indptr[1:])]


def offsets_from_uniform(u, radius):
    """Map uniform draws in [0, 1) to integer offsets in ``[-radius, radius]``.

    Each of the ``2R + 1`` integer offsets receives an equal share of the unit
    interval, so a draw of 0.5 lands on offset 0.
    """
    side = 2 * radius + 1
    cell = (np.asarray(u, dtype=float) * side).astype(np.int32)  # floor, u >= 0
    return np.minimum(cell, side - 1) - radius


def _candidate_counts(dims, radius):
    x, y = dims.coords(np.arange(dims.size))
    nx = np.minimum(x + radius, dims.width - 1) - np.maximum(x - radius, 0) + 1
    ny = np.minimum(y + radius, dims.height - 1) - np.maximum(y - radius, 0) + 1
    return nx * ny - 1


def _build_chunk(dims, config, chunk_id, lo, hi):
    W, H = dims.width, dims.height
    R, K = config.radius, config.degree
    side = 2 * R + 1
    policy = config.border_policy
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.seed, spawn_key=(chunk_id,))))

    n = hi - lo
    xs, ys = dims.coords(np.arange(lo, hi, dtype=np.int32))
    nb = np.full(n * K, -1, dtype=np.int32)
    kept = np.zeros(n * K, dtype=bool)
    retries = np.zeros(n * K, dtype=np.int32)
    # owner[row, cell] = flat slot holding that window cell, or `free`
    free = n * K
    owner = np.full((n, side * side), free, dtype=np.int32)
    pending = np.arange(n * K, dtype=np.int32)
    n_dup = 0

    while pending.size:
        u = rng.random((pending.size, 2))
        dx = offsets_from_uniform(u[:, 0], R)
        dy = offsets_from_uniform(u[:, 1], R)
        rows = pending // K
        x = xs[rows] + dx
        y = ys[rows] + dy
        off = (x < 0) | (x >= W) | (y < 0) | (y >= H)
        if policy == "clamp":
            x = np.clip(x, 0, W - 1)
            y = np.clip(y, 0, H - 1)
            off[:] = False
        is_self = (x == xs[rows]) & (y == ys[rows])
        ok = ~off & ~is_self
        cell = (y - ys[rows] + R) * side + (x - xs[rows] + R)

        taken = np.zeros(pending.size, dtype=bool)
        taken[ok] = owner[rows[ok], cell[ok]] != free
        claim = ok & ~taken
        np.minimum.at(owner, (rows[claim], cell[claim]), pending[claim])
        won = claim & (owner[rows, np.where(ok, cell, 0)] == pending)
        dup = ok & ~won
        give_up = dup & (retries[pending] >= config.max_retries)
        n_dup += int(give_up.sum())

        accept = won | give_up
        nb[pending[accept]] = y[accept] * W + x[accept]
        kept[pending[accept]] = True
        redo = is_self | (dup & ~give_up)
        if policy == "resample":
            redo |= off
        retries[pending[dup]] += 1
        pending = pending[redo]

    return nb[kept], kept.reshape(n, K).sum(axis=1), n_dup


def build_random_topology(dims: GridDims, config: TopologyConfig, threads: int = 1) -> RandomTopology:
    """Draw the random local wiring for every neuron of ``dims``.

    Off-grid draws are redrawn (``resample``), snapped to the nearest edge
    pixel (``clamp``) or discarded (``drop``).  Self-draws are always redrawn.
    Repeated partners are redrawn for up to ``config.max_retries`` rounds; any
    left after that are kept and counted in ``RandomTopology.duplicates``.
    This only happens when a neuron has fewer distinct in-grid candidates than
    the requested degree (e.g. grid corners with ``R = 5, K = 40``).

    Raises
    ------
    InfeasibleConfigError
        If some neuron has no admissible partner at all (e.g. a 1x1 grid).
    """
    if not isinstance(dims, GridDims):
        dims = GridDims(*dims)
    if config.border_policy == "clamp":
        # clamping maps every draw in-grid, so any other pixel is reachable
        feasible = dims.size > 1
    else:
        feasible = bool((_candidate_counts(dims, config.radius) > 0).all())
    if not feasible:
        raise InfeasibleConfigError(
            f"no non-self partner within radius {config.radius} on a {dims.width}x{dims.height} grid"
        )

    parts = map_chunks(lambda c, lo, hi: _build_chunk(dims, config, c, lo, hi), dims.size, threads, CHUNK)
    indices = np.concatenate([p[0] for p in parts])
    counts = np.concatenate([p[1] for p in parts])
    indptr = np.zeros(dims.size + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices.flags.writeable = False
    indptr.flags.writeable = False
    return RandomTopology(dims, config, indptr, indices, duplicates=sum(p[2] for p in parts))


def neighbors(topology: RandomTopology, k: int) -> np.ndarray:
    """Read-only view of neuron ``k``'s partner list."""
    k = int(k)
    if not 0 <= k < topology.n_neurons:
        raise IndexError(f"neuron index {k} outside grid of {topology.n_neurons}")
    return topology.indices[topology.indptr[k]:topology.indptr[k + 1]]


def dump_topology(topology: RandomTopology, path) -> None:
    """Write ``k: j1 j2 ... jn`` lines, one per neuron."""
    with open(path, "w") as fh:
        for k, (a, b) in enumerate(zip(topology.indptr[:-1], topology.indptr[1:])):
            fh.write(f"{k}: " + " ".join(map(str, topology.indices[a:b].tolist())) + "\n")


def topology_manifest(topology: RandomTopology) -> dict:
    c = topology.config
    return {
        "width": topology.dims.width,
        "height": topology.dims.height,
        "radius": c.radius,
        "degree": c.degree,
        "seed": c.seed,
        "border_policy": c.border_policy,
        "max_retries": c.max_retries,
        "duplicates": topology.duplicates,
        "rng": RNG_ALGORITHM,
    }
