"""Per-stage throughput of the edge + leaky pipeline."""

from __future__ import annotations

import hashlib
import statistics
import time

import numpy as np

from .leaky import leaky_step, normalize_weights
from .neuron import SignalField, compute_weights, connectivity_map, edge_map
from .pipeline import PipelineConfig
from .topology import build_random_topology

STAGES = ("topology", "weights", "cmap", "kernel", "leaky")


def run_once(signals: SignalField, config: PipelineConfig, iterations: int, threads: int):
    t = {}
    t0 = time.perf_counter()
    topo = build_random_topology(signals.dims, config.topology, threads)
    t["topology"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    w = compute_weights(signals, topo, config.gaussian, threads)
    t["weights"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    edges = edge_map(connectivity_map(w))
    t["cmap"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    kernel = normalize_weights(w, topo, config.leak)
    kernel.PT  # noqa: B018 - build the transpose inside the timed region
    t["kernel"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    v = np.ones(topo.n_neurons)
    for _ in range(iterations):
        v = leaky_step(kernel, v, config.leak.leak_rate, threads)
    t["leaky"] = time.perf_counter() - t0

    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(edges, dtype="<f8").tobytes())
    digest.update(np.ascontiguousarray(v, dtype="<f8").tobytes())
    return t, digest.hexdigest(), v


def bench(signals: SignalField, config: PipelineConfig = PipelineConfig(), iterations: int = 50,
          repeats: int = 3, warmup: int = 1, threads: int = 1):
    """Time each stage ``repeats`` times after ``warmup`` untimed runs.

    Returns ``(rows, digest)``: one dict per stage with the median seconds and
    pixels per second, and a hash of the edge map and final potentials.
    """
    n = signals.dims.size
    for _ in range(warmup):
        run_once(signals, config, iterations, threads)
    runs = []
    digest = None
    for _ in range(max(repeats, 1)):
        t, digest, _ = run_once(signals, config, iterations, threads)
        runs.append(t)
    rows = []
    for s in STAGES:
        med = statistics.median(r[s] for r in runs)
        rows.append({"stage": s, "seconds": med, "pixels_per_second": n / med if med > 0 else float("inf")})
    total = statistics.median(sum(r.values()) for r in runs)
    rows.append({"stage": "total", "seconds": total, "pixels_per_second": n / total})
    return rows, digest
