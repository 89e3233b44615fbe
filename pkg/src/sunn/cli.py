"""Command line interface.

Every subcommand writes its artifacts and a ``manifest.json`` into ``--out``.
Parameters come from built-in defaults, then ``--config`` (YAML/JSON, or a
previous run's manifest), then explicit flags.

Exit codes: 0 success, 2 usage/config error, 3 input error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__, report
from .errors import ConfigError, InputError, SunnError
from .evaluation import binary_pr, iou, perturb_weights, prewitt_magnitude, sobel_magnitude
from .images import load_image, read_image
from .leaky import minmax
from .neuron import SignalField
from .pipeline import (PipelineConfig, RunManifest, manifest_for, run_core, sha256_file,
                       write_artifacts)
from .topology import dump_topology

log = logging.getLogger("sunn")

# flag dest -> (section, field)
FLAG_MAP = {
    "radius": ("topology", "radius"),
    "connections": ("topology", "connections"),
    "seed": ("topology", "seed"),
    "border_policy": ("topology", "border_policy"),
    "max_retries": ("topology", "max_retries"),
    "sigma": ("gaussian", "sigma"),
    "leak_rate": ("leak", "leak_rate"),
    "ground": ("leak", "ground_conductance"),
    "sink": ("leak", "sink"),
    "max_iterations": ("leak", "max_iterations"),
    "tolerance": ("leak", "tolerance"),
    "symmetrization": ("leak", "symmetrization"),
    "bins": ("popout", "bins"),
    "max_levels": ("popout", "max_levels"),
    "min_prominence": ("popout", "min_prominence"),
    "center_strength": ("popout", "center_strength"),
    "min_component_fraction": ("popout", "min_component_fraction"),
    "color": (None, "color"),
    "threads": (None, "threads"),
}

PIPELINE_COMMANDS = {
    "edges": ("edges",),
    "prmap": ("prmap",),
    "popout": ("popout",),
    "saliency": ("saliency",),
    "bilayer": ("bilayer",),
}


class UsageError(ConfigError):
    pass


def _add_pipeline_flags(p):
    g = p.add_argument_group("topology")
    g.add_argument("--radius", "-R", type=int, help="connection radius in pixels (default 5)")
    g.add_argument("--connections", type=int, help="connections per neuron (default 8*R)")
    g.add_argument("--seed", type=int, help="random seed (default 0)")
    g.add_argument("--border-policy", choices=("resample", "clamp", "drop"))
    g.add_argument("--max-retries", type=int, help="rounds spent re-drawing duplicate partners")
    g = p.add_argument_group("neurons")
    g.add_argument("--sigma", type=float, help="Gaussian bandwidth (default 0.1)")
    g.add_argument("--color", choices=("gray", "rgb", "lab"))
    g = p.add_argument_group("leaky process")
    g.add_argument("--leak-rate", type=float, help="fraction released per step (default 0.5)")
    g.add_argument("--ground", type=float, help="ground conductance of sink neurons (default 1000)")
    g.add_argument("--sink", choices=("border", "none", "mask"))
    g.add_argument("--sink-mask", type=Path, help="image whose non-zero pixels are sinks (with --sink mask)")
    g.add_argument("--max-iterations", type=int)
    g.add_argument("--tolerance", type=float)
    g.add_argument("--symmetrization", choices=("average", "max", "directed"))
    g = p.add_argument_group("popout")
    g.add_argument("--bins", type=int)
    g.add_argument("--max-levels", type=int)
    g.add_argument("--min-prominence", type=float)
    g.add_argument("--center-strength", type=float)
    g.add_argument("--min-component-fraction", type=float)


def _add_common(p, image=True):
    if image:
        p.add_argument("image", type=Path, help="input PNG / PGM / PPM")
    p.add_argument("--out", "-o", type=Path, default=Path("sunn_out"), help="output directory")
    p.add_argument("--config", "-c", type=Path, help="YAML/JSON defaults or a previous manifest.json")
    p.add_argument("--threads", type=int, help="worker threads (1 = fully serial)")
    p.add_argument("--no-figures", action="store_true", help="skip rendered figures")
    _add_pipeline_flags(p)


def build_parser():
    ap = argparse.ArgumentParser(prog="sunn", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="cmd", required=True)

    helps = {
        "edges": "connectivity map and edge map",
        "prmap": "potential residue map from the leaky process",
        "popout": "nested object masks by successive thresholding",
        "saliency": "centre-weighted saliency map and mask",
        "bilayer": "foreground/background split",
    }
    for name, h in helps.items():
        p = sub.add_parser(name, help=h)
        _add_common(p)
        p.add_argument("--dump-topology", action="store_true", help="also write topology.txt")

    p = sub.add_parser("eval", help="precision-recall curves against ground truth")
    _add_common(p)
    p.add_argument("--gt", type=Path, required=True, help="ground-truth image, non-zero = positive")
    p.add_argument("--kind", choices=("edge", "mask"), default="mask")
    p.add_argument("--score", default="saliency",
                   help="comma list from edges,prmap,saliency,sobel,prewitt (default saliency)")
    p.add_argument("--n-thresholds", type=int, default=64)
    p.add_argument("--tolerance-px", type=int, default=2, help="edge matching tolerance (Chebyshev)")

    p = sub.add_parser("robustness", help="popout stability under weight noise")
    _add_common(p)
    p.add_argument("--noise", type=float, default=0.1, help="noise fraction on weights")
    p.add_argument("--noise-mode", choices=("multiplicative", "additive"), default="multiplicative")
    p.add_argument("--trials", type=int, default=10, help="number of noise seeds")
    p.add_argument("--noise-seed", type=int, default=0, help="first noise seed")

    p = sub.add_parser("bench", help="per-stage throughput")
    _add_common(p, image=False)
    p.add_argument("image", type=Path, nargs="?", help="input image (default: synthetic)")
    p.add_argument("--size", type=int, default=512, help="synthetic image size")
    p.add_argument("--iterations", type=int, default=50)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--warmup", type=int, default=1)
    return ap


def resolve_config(args) -> PipelineConfig:
    base = {}
    if args.config is not None:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from exc
        try:
            # manifests are JSON; parse them as such so floats keep their type
            loaded = json.loads(text) if text.lstrip().startswith("{") else yaml.safe_load(text) or {}
        except (ValueError, yaml.YAMLError) as exc:
            raise UsageError(f"{args.config}: not valid YAML/JSON ({exc})") from exc
        if not isinstance(loaded, dict):
            raise UsageError(f"{args.config}: expected a mapping")
        base = loaded.get("parameters", loaded)
    cfg = PipelineConfig.from_dict(base).to_dict()
    for dest, (section, key) in FLAG_MAP.items():
        val = getattr(args, dest, None)
        if val is None:
            continue
        if section is None:
            cfg[key] = val
        else:
            cfg[section][key] = val
    return PipelineConfig.from_dict(cfg)


def _custom_sink(args, config, dims):
    if config.leak.sink != "mask":
        return None, None
    if args.sink_mask is None:
        raise UsageError("--sink mask requires --sink-mask")
    m = read_image(args.sink_mask)
    m = (m if m.ndim == 2 else m.max(axis=2)) > 0
    if m.shape != dims.shape:
        raise InputError(f"sink mask {m.shape} does not match image {dims.shape}")
    return m, {"path": str(args.sink_mask), "sha256": sha256_file(args.sink_mask)}


def _input_info(path, signals):
    return {"path": str(path), "sha256": sha256_file(path), "width": signals.dims.width,
            "height": signals.dims.height, "channels": signals.channels}


def _figures(res, out, manifest):
    figs = {}
    img = res.signals.as_image()
    pr = None if res.prmap is None else res.prmap.as_image()
    figs["maps"] = report.plot_maps(img if img.ndim == 2 else img[..., :3], res.cmap.as_image(), pr,
                                    out / "maps.png").name
    if res.prmap is not None:
        figs["trace"] = report.plot_trace(res.prmap.totals, out / "trace.png").name
    if res.histogram is not None:
        figs["histogram"] = report.plot_histogram(res.histogram, res.thresholds, out / "histogram.png").name
    if res.masks:
        figs["popout"] = report.plot_masks(res.masks, out / "popout.png").name
    if res.bilayer is not None:
        figs["bilayer"] = report.plot_masks(list(res.bilayer), out / "bilayer.png").name
    manifest.artifacts["figures"] = figs


def cmd_pipeline(args, config):
    stages = PIPELINE_COMMANDS[args.cmd]
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    signals = load_image(args.image, config.color)
    load_t = time.perf_counter() - t0
    sink, sink_info = _custom_sink(args, config, signals.dims)
    res = run_core(signals, config, stages, custom_sink=sink)
    res.timings = {"load": load_t, **res.timings}
    manifest = manifest_for(res, config, stages, _input_info(args.image, signals))
    if sink_info:
        manifest.input["sink_mask"] = sink_info
    write_artifacts(res, out, manifest)
    if args.dump_topology:
        dump_topology(res.topology, out / "topology.txt")
        manifest.artifacts["topology.txt"] = {"path": "topology.txt", "format": "text",
                                              "sha256": sha256_file(out / "topology.txt")}
    if not args.no_figures:
        _figures(res, out, manifest)
    manifest.write(out / "manifest.json")
    r = manifest.results
    msg = f"{args.cmd}: {signals.dims.width}x{signals.dims.height} -> {out}"
    if "iterations_run" in r:
        msg += f" (iterations={r['iterations_run']}, converged={r['converged']})"
    if "thresholds" in r:
        msg += f" thresholds={[round(t, 4) for t in r['thresholds']]}"
    print(msg)
    return 0


def _binary_image(path):
    a = read_image(path)
    return (a if a.ndim == 2 else a.max(axis=2)) > 0


def cmd_eval(args, config):
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    signals = load_image(args.image, config.color)
    gt = _binary_image(args.gt)
    if gt.shape != signals.dims.shape:
        raise InputError(f"ground truth {gt.shape} does not match image {signals.dims.shape}")
    scores = [s.strip() for s in args.score.split(",") if s.strip()]
    known = {"edges", "prmap", "saliency", "sobel", "prewitt"}
    bad = set(scores) - known
    if bad:
        raise UsageError(f"unknown score source(s) {sorted(bad)}; choose from {sorted(known)}")
    need = "saliency" if "saliency" in scores else ("prmap" if "prmap" in scores else "edges")
    res = run_core(signals, config, (need,))
    maps = {
        "edges": lambda: res.edges,
        "prmap": lambda: res.prmap.normalized(),
        "saliency": lambda: res.saliency,
        "sobel": lambda: minmax(sobel_magnitude(signals.as_image())),
        "prewitt": lambda: minmax(prewitt_magnitude(signals.as_image())),
    }
    manifest = manifest_for(res, config, [need], _input_info(args.image, signals))
    manifest.input["ground_truth"] = {"path": str(args.gt), "sha256": sha256_file(args.gt), "kind": args.kind}
    curves = {}
    summary = {}
    for s in scores:
        c = binary_pr(maps[s](), gt, args.n_thresholds, args.tolerance_px, args.kind)
        curves[s] = c
        path = out / f"pr_{s}.csv"
        path.write_text(c.to_csv())
        manifest.artifacts[path.name] = {"path": path.name, "format": "csv", "sha256": sha256_file(path)}
        summary[s] = {"max_f_measure": float(c.f_measure().max()),
                      "empty_prediction_thresholds": int(c.empty_prediction.sum())}
    manifest.results["evaluation"] = {"kind": args.kind, "n_thresholds": args.n_thresholds,
                                      "match_tolerance_px": args.tolerance_px, "curves": summary}
    if not args.no_figures:
        manifest.artifacts["figures"] = {"pr": report.plot_pr_curves(curves, out / "pr.png").name}
    manifest.write(out / "manifest.json")
    for s, v in summary.items():
        print(f"{s}: max F = {v['max_f_measure']:.4f}")
    return 0


def cmd_robustness(args, config):
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    signals = load_image(args.image, config.color)
    sink, sink_info = _custom_sink(args, config, signals.dims)
    clean = run_core(signals, config, ("popout",), custom_sink=sink)
    seeds = list(range(args.noise_seed, args.noise_seed + args.trials))
    rows = []
    for s in seeds:
        noisy = run_core(signals, config, ("popout",), custom_sink=sink,
                         perturb=lambda w, s=s: perturb_weights(w, args.noise, s, args.noise_mode))
        rows.append((s, iou(clean.masks[0], noisy.masks[0])))
    path = out / "robustness.csv"
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["noise_seed", "iou"])
        for s, v in rows:
            wr.writerow([s, repr(v)])
    manifest = manifest_for(clean, config, ["popout"], _input_info(args.image, signals))
    if sink_info:
        manifest.input["sink_mask"] = sink_info
    write_artifacts(clean, out, manifest)
    manifest.artifacts["robustness.csv"] = {"path": path.name, "format": "csv", "sha256": sha256_file(path)}
    ious = [v for _, v in rows]
    manifest.results["robustness"] = {"noise_fraction": args.noise, "mode": args.noise_mode,
                                      "seeds": seeds, "iou": ious, "min_iou": min(ious),
                                      "mean_iou": float(np.mean(ious))}
    if not args.no_figures:
        manifest.artifacts["figures"] = {
            "robustness": report.plot_robustness(seeds, ious, out / "robustness.png").name}
    manifest.write(out / "manifest.json")
    print(f"robustness: noise={args.noise} min IoU={min(ious):.4f} mean IoU={np.mean(ious):.4f}")
    return 0


def cmd_bench(args, config):
    from .bench import bench
    from .synthetic import bench_image

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    if args.image is not None:
        signals = load_image(args.image, config.color)
        info = _input_info(args.image, signals)
    else:
        signals = SignalField.from_array(bench_image(args.size, config.topology.seed))
        info = {"synthetic": "bench_image", "size": args.size, "seed": config.topology.seed}
    rows, digest = bench(signals, config, args.iterations, args.repeats, args.warmup, config.threads)
    path = out / "bench.csv"
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=["stage", "seconds", "pixels_per_second"])
        wr.writeheader()
        wr.writerows(rows)
    manifest = RunManifest(input=info, parameters=config.to_dict(), stages=["bench"],
                           results={"bench": rows, "iterations": args.iterations, "repeats": args.repeats,
                                    "warmup": args.warmup, "output_sha256": digest},
                           artifacts={"bench.csv": {"path": path.name, "format": "csv"}})
    if not args.no_figures:
        manifest.artifacts["figures"] = {"bench": report.plot_bench(rows[:-1], out / "bench.png").name}
    manifest.write(out / "manifest.json")
    for r in rows:
        print(f"{r['stage']:>9}: {r['seconds']:8.3f} s  {r['pixels_per_second']:12.0f} px/s")
    print(f"output sha256 {digest}")
    return 0


COMMANDS = {"eval": cmd_eval, "robustness": cmd_robustness, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = resolve_config(args)
        handler = COMMANDS.get(args.cmd, cmd_pipeline)
        return handler(args, config)
    except SunnError as exc:
        print(f"sunn: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"sunn: error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"sunn: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
