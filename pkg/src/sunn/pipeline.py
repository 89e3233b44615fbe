"""Pipeline configuration, in-memory pipeline and artifact-writing runs."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, SunnError
from .images import load_image, save_map
from .leaky import LeakConfig, PRMap, run_leaky, trace_table
from .neuron import GaussianParams, SignalField, compute_weights, connectivity_map, edge_map
from .popout import (bilayer_segment, center_fusion, filter_small_components, find_thresholds,
                     popout_components, pr_histogram)
from .topology import TopologyConfig, build_random_topology, topology_manifest

log = logging.getLogger(__name__)

STAGES = ("edges", "prmap", "popout", "saliency", "bilayer")
# stages each requested stage depends on
_REQUIRES = {
    "edges": {"edges"},
    "prmap": {"edges", "prmap"},
    "popout": {"edges", "prmap", "popout"},
    "saliency": {"edges", "prmap", "saliency"},
    "bilayer": {"edges", "prmap", "bilayer"},
}


@dataclass(frozen=True)
class PopoutConfig:
    bins: int = 64
    max_levels: int = 3
    min_prominence: float = 0.25
    center_strength: float = 1.0
    min_component_fraction: float = 0.001

    def __post_init__(self):
        if self.bins < 2:
            raise ConfigError("bins must be >= 2")
        if self.max_levels < 1:
            raise ConfigError("max_levels must be >= 1")
        if self.center_strength < 0:
            raise ConfigError("center_strength must be >= 0")


def _coerce(cls, key, value):
    """Cast config-file strings such as ``1e-06`` (a string to YAML 1.1) to the field's type."""
    default = next(f.default for f in dataclasses.fields(cls) if f.name == key)
    if isinstance(value, str) and isinstance(default, (int, float)) and not isinstance(default, bool):
        try:
            return type(default)(value)
        except ValueError as exc:
            raise ConfigError(f"{cls.__name__}.{key}: expected a number, got {value!r}") from exc
    return value


@dataclass(frozen=True)
class PipelineConfig:
    topology: TopologyConfig = TopologyConfig()
    gaussian: GaussianParams = GaussianParams()
    leak: LeakConfig = LeakConfig()
    popout: PopoutConfig = PopoutConfig()
    color: str = "gray"
    threads: int = 1

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict | None) -> "PipelineConfig":
        d = dict(d or {})
        sections = {"topology": TopologyConfig, "gaussian": GaussianParams,
                    "leak": LeakConfig, "popout": PopoutConfig}
        kw = {}
        for name, sub in sections.items():
            vals = d.pop(name, None) or {}
            known = {f.name for f in dataclasses.fields(sub)}
            unknown = set(vals) - known
            if unknown:
                raise ConfigError(f"unknown {name} option(s): {sorted(unknown)}")
            kw[name] = sub(**{k: _coerce(sub, k, v) for k, v in vals.items()})
        for key in ("color", "threads"):
            if key in d:
                kw[key] = d.pop(key)
        if d:
            raise ConfigError(f"unknown config section(s): {sorted(d)}")
        return cls(**kw)

    def replace(self, **sections) -> "PipelineConfig":
        """Return a copy with fields of nested sections overridden, e.g. ``leak={'sink': 'none'}``."""
        d = self.to_dict()
        for k, v in sections.items():
            if dataclasses.is_dataclass(v):
                v = dataclasses.asdict(v)
            if isinstance(v, dict):
                d[k].update(v)
            else:
                d[k] = v
        return PipelineConfig.from_dict(d)


@dataclass(eq=False)
class PipelineResult:
    signals: SignalField
    topology: object = None
    weights: object = None
    cmap: object = None
    edges: np.ndarray | None = None
    prmap: PRMap | None = None
    histogram: object = None
    thresholds: np.ndarray | None = None
    masks: list = field(default_factory=list)
    saliency: np.ndarray | None = None
    saliency_mask: np.ndarray | None = None
    bilayer: tuple | None = None
    timings: dict = field(default_factory=dict)


class StageError(SunnError):
    def __init__(self, stage, exc):
        super().__init__(f"stage {stage!r} failed: {exc}")
        self.stage = stage
        self.cause = exc
        self.exit_code = getattr(exc, "exit_code", 1)


def _expand(stages):
    wanted = set()
    for s in stages:
        if s not in _REQUIRES:
            raise ConfigError(f"unknown stage {s!r}; choose from {STAGES}")
        wanted |= _REQUIRES[s]
    return wanted


def run_core(signals: SignalField, config: PipelineConfig = PipelineConfig(), stages=("popout",),
             perturb=None, custom_sink=None) -> PipelineResult:
    """Run the requested stages in memory; no files are touched.

    ``perturb`` optionally maps the weight field before the leaky process.
    """
    wanted = _expand(stages)
    res = PipelineResult(signals)
    th = config.threads

    def timed(name, fn):
        t0 = time.perf_counter()
        try:
            out = fn()
        except SunnError as exc:
            raise StageError(name, exc) from exc
        res.timings[name] = time.perf_counter() - t0
        return out

    res.topology = timed("topology", lambda: build_random_topology(signals.dims, config.topology, th))
    res.weights = timed("weights", lambda: compute_weights(signals, res.topology, config.gaussian, th))
    res.cmap = timed("cmap", lambda: connectivity_map(res.weights))
    res.edges = edge_map(res.cmap)
    if "prmap" not in wanted:
        return res

    weights = res.weights if perturb is None else perturb(res.weights)
    res.prmap = timed("leaky", lambda: run_leaky(weights, res.topology, config.leak, th, custom_sink))
    pc = config.popout
    if "popout" in wanted:
        def popout():
            res.histogram = pr_histogram(res.prmap, pc.bins)
            res.thresholds = find_thresholds(res.histogram, pc.max_levels, pc.min_prominence)
            return popout_components(res.prmap, res.thresholds)
        res.masks = timed("popout", popout)
    if "saliency" in wanted:
        def saliency():
            s = center_fusion(res.prmap, pc.center_strength)
            t = find_thresholds(pr_histogram(s, pc.bins), 1, pc.min_prominence)
            mask = s >= t[0] if t.size else s > s.mean()
            res.saliency_mask = filter_small_components(mask, pc.min_component_fraction)
            return s
        res.saliency = timed("saliency", saliency)
    if "bilayer" in wanted:
        res.bilayer = timed("bilayer", lambda: bilayer_segment(res.prmap, pc.min_prominence))
    return res


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    input: dict
    parameters: dict
    stages: list
    results: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    environment: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json() + "\n")
        return path

    @classmethod
    def read(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))

    def config(self) -> PipelineConfig:
        return PipelineConfig.from_dict(self.parameters)


def write_artifacts(res: PipelineResult, out_dir: Path, manifest: RunManifest, prefix: str = "") -> None:
    """Write raw dumps (the reproducibility contract) and preview images."""
    art = manifest.artifacts

    def put(name, field_, fmt, ext):
        p = out_dir / f"{prefix}{name}.{ext}"
        save_map(field_, p, fmt)
        entry = {"path": p.name, "format": fmt}
        if fmt == "raw":
            entry["sha256"] = sha256_file(p)
        art[f"{name}.{ext}"] = entry

    put("cmap", res.cmap.as_image(), "raw", "raw")
    put("edges", res.edges, "raw", "raw")
    put("edges", res.edges, "png8", "png")
    if res.prmap is not None:
        put("prmap", res.prmap.as_image(), "raw", "raw")
        put("prmap", res.prmap.as_image(), "png16", "png")
        trace = out_dir / f"{prefix}trace.csv"
        trace.write_text(trace_table(res.prmap))
        art["trace.csv"] = {"path": trace.name, "format": "csv", "sha256": sha256_file(trace)}
    for i, m in enumerate(res.masks):
        put(f"popout_{i}", m, "pbm", "pbm")
        put(f"popout_{i}", m, "mask", "png")
    if res.saliency is not None:
        put("saliency", res.saliency, "raw", "raw")
        put("saliency", res.saliency, "png8", "png")
        put("saliency_mask", res.saliency_mask, "mask", "png")
    if res.bilayer is not None:
        put("foreground", res.bilayer[0], "mask", "png")
        put("background", res.bilayer[1], "mask", "png")


def manifest_for(res: PipelineResult, config: PipelineConfig, stages, input_info: dict) -> RunManifest:
    results = {"topology": topology_manifest(res.topology),
               "isolated_neurons": int(res.cmap.isolated.sum())}
    if res.prmap is not None:
        results.update(
            iterations_run=res.prmap.iterations_run,
            converged=res.prmap.converged,
            final_max_delta=res.prmap.deltas[-1] if res.prmap.deltas else None,
            total_residue=res.prmap.totals[-1],
        )
    if res.thresholds is not None:
        results["thresholds"] = res.thresholds.tolist()
        results["histogram_degenerate"] = bool(res.histogram.degenerate)
    return RunManifest(
        input=input_info,
        parameters=config.to_dict(),
        stages=list(stages),
        results=results,
        timings={k: round(v, 6) for k, v in res.timings.items()},
        environment={"package": __version__, "python": platform.python_version(),
                     "numpy": np.__version__},
    )


def run_pipeline(config: PipelineConfig, input_path, out_dir, stages=("popout",)) -> RunManifest:
    """Load ``input_path``, run ``stages``, write every artifact plus ``manifest.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    signals = load_image(input_path, config.color)
    load_time = time.perf_counter() - t0
    res = run_core(signals, config, stages)
    res.timings = {"load": load_time, **res.timings}
    info = {"path": str(input_path), "sha256": sha256_file(input_path),
            "width": signals.dims.width, "height": signals.dims.height, "channels": signals.channels}
    manifest = manifest_for(res, config, stages, info)
    write_artifacts(res, out_dir, manifest)
    manifest.write(out_dir / "manifest.json")
    return manifest

