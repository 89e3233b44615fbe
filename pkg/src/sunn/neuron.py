"""Smart neurons: Gaussian similarity weights, connectivity map and edge map."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ._parallel import map_chunks
from .errors import ConfigError, InvalidInputError, ShapeError
from .topology import GridDims, RandomTopology

log = logging.getLogger(__name__)

DISTANCES = ("euclidean",)


@dataclass(frozen=True, eq=False)
class SignalField:
    """Per-pixel signal held by the input layer, shape ``(N, channels)``."""

    dims: GridDims
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.dims.size:
            raise ShapeError(f"expected {self.dims.size} pixels, got {v.shape[0]}")
        if not np.isfinite(v).all():
            raise InvalidInputError("signal field contains non-finite values")
        if v.size and (v.min() < 0.0 or v.max() > 1.0):
            raise InvalidInputError("signal values must lie in [0, 1]")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_array(cls, img) -> "SignalField":
        """Wrap an ``(H, W)`` or ``(H, W, C)`` array already scaled to [0, 1]."""
        img = np.asarray(img, dtype=np.float64)
        if img.ndim not in (2, 3):
            raise ShapeError(f"image must be 2-D or 3-D, got shape {img.shape}")
        h, w = img.shape[:2]
        channels = 1 if img.ndim == 2 else img.shape[2]
        return cls(GridDims(w, h), img.reshape(h * w, channels))

    @property
    def channels(self) -> int:
        return self.values.shape[1]

    def as_image(self) -> np.ndarray:
        img = self.values.reshape(self.dims.height, self.dims.width, self.channels)
        return img[..., 0] if self.channels == 1 else img


@dataclass(frozen=True)
class GaussianParams:
    sigma: float = 0.1
    distance: str = "euclidean"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigError(f"sigma must be > 0, got {self.sigma}")
        if self.distance not in DISTANCES:
            raise ConfigError(f"unknown distance {self.distance!r}")


@dataclass(frozen=True, eq=False)
class WeightField:
    """Connection weights aligned index-for-index with ``topology.indices``."""

    topology: RandomTopology
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.topology.indices.shape:
            raise ShapeError("weights are not aligned with the topology")

    def of(self, k: int) -> np.ndarray:
        t = self.topology
        return self.values[t.indptr[k]:t.indptr[k + 1]]


@dataclass(frozen=True, eq=False)
class CMap:
    dims: GridDims
    values: np.ndarray
    isolated: np.ndarray  # neurons with no connections at all

    def as_image(self) -> np.ndarray:
        return self.values.reshape(self.dims.shape)


def gaussian_similarity(a, b, sigma):
    """exp(-|a - b|^2 / (2 sigma^2)), distance taken over the last axis."""
    d2 = np.sum((np.asarray(a, float) - np.asarray(b, float)) ** 2, axis=-1)
    return np.exp(-d2 / (2.0 * sigma * sigma))


def compute_weights(signals: SignalField, topology: RandomTopology,
                    params: GaussianParams = GaussianParams(), threads: int = 1) -> WeightField:
    if signals.dims != topology.dims:
        raise ShapeError(f"signal dims {signals.dims} do not match topology dims {topology.dims}")
    s = signals.values
    owners = topology.owners()
    idx = topology.indices
    inv = -1.0 / (2.0 * params.sigma ** 2)

    def work(_, lo, hi):
        d = s[owners[lo:hi]] - s[idx[lo:hi]]
        d2 = d[:, 0] * d[:, 0] if d.shape[1] == 1 else np.einsum("ij,ij->i", d, d)
        return np.exp(d2 * inv)

    parts = map_chunks(work, idx.size, threads, chunk=1 << 20)
    values = np.concatenate(parts) if parts else np.zeros(0)
    return WeightField(topology, values)


def connectivity_map(weights: WeightField) -> CMap:
    """Mean weight per neuron; neurons without connections get 0 and are flagged."""
    t = weights.topology
    deg = t.degrees
    sums = np.bincount(t.owners(), weights=weights.values, minlength=t.n_neurons)
    isolated = deg == 0
    if isolated.any():
        log.warning("%d neuron(s) have no connections; c-map set to 0 there", int(isolated.sum()))
    values = np.divide(sums, deg, out=np.zeros(t.n_neurons), where=~isolated)
    return CMap(t.dims, values, isolated)


def edge_map(cmap: CMap) -> np.ndarray:
    """Edge strength ``1 - cmap`` as an ``(H, W)`` array."""
    return (1.0 - cmap.values).reshape(cmap.dims.shape)


def propagate_intensity(weights: WeightField, v_in) -> np.ndarray:
    """Single un-normalised pass ``v_out[k] = sum_i phi[k, i] * v_in[i]``."""
    t = weights.topology
    v = np.asarray(v_in, dtype=np.float64).ravel()
    if v.size != t.n_neurons:
        raise ShapeError(f"expected {t.n_neurons} inputs, got {v.size}")
    return np.bincount(t.owners(), weights=weights.values * v[t.indices], minlength=t.n_neurons)
