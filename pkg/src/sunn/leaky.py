"""Leaky potential process over the weighted random net.

Every neuron starts at the same potential.  At each step a neuron keeps a
fraction ``1 - lam`` of its potential and releases ``lam`` of it, split among
its partners in proportion to the (symmetrised) weights.  Neurons on the sink
also route a share ``gamma / (sum(w) + gamma)`` of the released potential to
ground, where it leaves the system.  Written as a matrix update::

    v' = v - lam * active * v + lam * P.T @ v

``P`` is row-substochastic and ``active`` marks neurons with any outflow at
all (isolated neurons keep their potential untouched).  Updates are
synchronous, reading one buffer and writing another, so results never depend
on evaluation order or thread count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._parallel import row_blocks
from .errors import ConfigError, InvalidInputError, NumericalFailure, ShapeError
from .neuron import WeightField
from .topology import GridDims, RandomTopology

log = logging.getLogger(__name__)

SINKS = ("border", "none", "mask")
SYMMETRIZATIONS = ("average", "max", "directed")


@dataclass(frozen=True)
class LeakConfig:
    leak_rate: float = 0.5
    ground_conductance: float = 1000.0
    sink: str = "border"
    max_iterations: int = 50
    tolerance: float = 1e-6
    symmetrization: str = "average"

    def __post_init__(self):
        if not 0.0 < self.leak_rate <= 1.0:
            raise ConfigError(f"leak_rate must be in (0, 1], got {self.leak_rate}")
        if not self.ground_conductance >= 0.0:
            raise ConfigError("ground_conductance must be >= 0")
        if self.sink not in SINKS:
            raise ConfigError(f"sink must be one of {SINKS}, got {self.sink!r}")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if not self.tolerance > 0.0:
            raise ConfigError("tolerance must be > 0")
        if self.symmetrization not in SYMMETRIZATIONS:
            raise ConfigError(f"symmetrization must be one of {SYMMETRIZATIONS}")


@dataclass(frozen=True, eq=False)
class LeakKernel:
    """Outflow fractions ``P`` (CSR, row k = neuron k's outflow), ground fractions ``G``."""

    P: sp.csr_matrix
    ground: np.ndarray
    active: np.ndarray
    sink: np.ndarray
    _PT: sp.csr_matrix = field(repr=False, default=None)
    _blocks: dict = field(repr=False, default_factory=dict)

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def PT(self) -> sp.csr_matrix:
        if self._PT is None:
            object.__setattr__(self, "_PT", self.P.T.tocsr())
        return self._PT


@dataclass(eq=False)
class PRMap:
    """Potential residue after the leaky process, plus its iteration trace.

    ``totals[t]`` is the total potential after ``t`` steps (``totals[0]`` is
    the initial total); ``deltas[t - 1]`` is the max per-neuron change of
    step ``t``.
    """

    dims: GridDims
    values: np.ndarray
    iterations_run: int
    converged: bool
    totals: list = field(default_factory=list)
    deltas: list = field(default_factory=list)

    def as_image(self) -> np.ndarray:
        return self.values.reshape(self.dims.shape)

    def normalized(self) -> np.ndarray:
        return minmax(self.as_image())


def minmax(a):
    a = np.asarray(a, dtype=np.float64)
    lo, hi = a.min(), a.max()
    if hi <= lo:
        return np.zeros_like(a)
    return (a - lo) / (hi - lo)


def border_mask(dims: GridDims) -> np.ndarray:
    m = np.zeros(dims.shape, dtype=bool)
    m[0, :] = m[-1, :] = True
    m[:, 0] = m[:, -1] = True
    return m.ravel()


def sink_mask(dims: GridDims, config: LeakConfig, custom=None) -> np.ndarray:
    if config.sink == "border":
        return border_mask(dims)
    if config.sink == "none":
        return np.zeros(dims.size, dtype=bool)
    if custom is None:
        raise ConfigError("sink='mask' needs a custom sink mask")
    m = np.asarray(custom, dtype=bool).ravel()
    if m.size != dims.size:
        raise ShapeError("custom sink mask does not match grid")
    return m


def _symmetrize(A, how):
    if how == "directed":
        return A
    if how == "max":
        return A.maximum(A.T).tocsr()
    return ((A + A.T) * 0.5).tocsr()


def normalize_weights(weights: WeightField, topology: RandomTopology, config: LeakConfig,
                      custom_sink=None) -> LeakKernel:
    if weights.topology is not topology and weights.values.shape != topology.indices.shape:
        raise ShapeError("weights are not aligned with the topology")
    if not np.isfinite(weights.values).all():
        raise NumericalFailure("non-finite connection weight")
    if (weights.values < 0).any():
        raise InvalidInputError("connection weights must be non-negative")
    n = topology.n_neurons
    A = sp.csr_matrix((weights.values.copy(), topology.indices.copy(), topology.indptr.copy()), shape=(n, n))
    A.sum_duplicates()
    W = _symmetrize(A, config.symmetrization)
    W.sort_indices()

    sink = sink_mask(topology.dims, config, custom_sink)
    gamma = np.where(sink, config.ground_conductance, 0.0)
    denom = np.asarray(W.sum(axis=1)).ravel() + gamma
    active = denom > 0
    inv = np.divide(1.0, denom, out=np.zeros(n), where=active)
    if (~active).any():
        log.info("%d isolated neuron(s) keep their potential", int((~active).sum()))

    P = sp.csr_matrix((W.data * np.repeat(inv, np.diff(W.indptr)), W.indices, W.indptr), shape=(n, n))
    PT = None
    if config.symmetrization != "directed":
        # W is symmetric, so P.T = W diag(inv): scale columns instead of transposing
        PT = sp.csr_matrix((W.data * inv[W.indices], W.indices, W.indptr), shape=(n, n))
    return LeakKernel(P, gamma * inv, active, sink, PT)


def _flow(kernel, v, threads):
    PT = kernel.PT
    if threads <= 1:
        return PT @ v
    if threads not in kernel._blocks:
        kernel._blocks[threads] = [(a, z, PT[a:z]) for a, z in row_blocks(PT.shape[0], threads)]
    out = np.empty_like(v)

    def work(b):
        a, z, block = b
        out[a:z] = block @ v

    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(work, kernel._blocks[threads]))
    return out


def leaky_step(kernel: LeakKernel, v, lam: float, threads: int = 1) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (kernel.n,):
        raise ShapeError(f"potential has shape {v.shape}, kernel expects ({kernel.n},)")
    inflow = _flow(kernel, v, threads)
    out = np.where(kernel.active, (1.0 - lam) * v, v) + lam * inflow
    if not np.isfinite(out).all():
        raise NumericalFailure("non-finite potential during leaky step")
    return out


def ground_loss(kernel: LeakKernel, v, lam: float) -> float:
    """Potential sent to ground by one step from state ``v``."""
    return float(lam * np.dot(kernel.ground, v))


def run_leaky(weights: WeightField, topology: RandomTopology, config: LeakConfig = LeakConfig(),
              threads: int = 1, custom_sink=None, initial=None) -> PRMap:
    """Iterate the leaky step until the max per-neuron change drops below tolerance."""
    kernel = normalize_weights(weights, topology, config, custom_sink)
    v = np.ones(topology.n_neurons) if initial is None else np.array(initial, dtype=np.float64).ravel()
    totals = [float(v.sum())]
    deltas = []
    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        nv = leaky_step(kernel, v, config.leak_rate, threads)
        delta = float(np.max(np.abs(nv - v))) if v.size else 0.0
        v = nv
        totals.append(float(v.sum()))
        deltas.append(delta)
        if delta < config.tolerance:
            converged = True
            break
    log.debug("leaky process: %d iterations, converged=%s", it, converged)
    return PRMap(topology.dims, v, it, converged, totals, deltas)


def trace_table(prmap: PRMap) -> str:
    lines = ["iteration,total_residue"]
    lines += [f"{t},{total!r}" for t, total in enumerate(prmap.totals)]
    return "\n".join(lines) + "\n"
