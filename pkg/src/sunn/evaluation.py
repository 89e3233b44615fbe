"""Precision-recall sweeps, IoU, weight perturbation and the robustness run."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import CurveInvalidError, ShapeError
from .neuron import WeightField

log = logging.getLogger(__name__)

GT_KINDS = ("edge", "mask")


@dataclass(frozen=True, eq=False)
class PRCurve:
    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    # thresholds at which nothing was predicted (precision set to 1 by convention)
    empty_prediction: np.ndarray

    def rows(self):
        return list(zip(self.thresholds.tolist(), self.precision.tolist(), self.recall.tolist()))

    def to_csv(self) -> str:
        out = ["threshold,precision,recall"]
        out += [f"{t!r},{p!r},{r!r}" for t, p, r in self.rows()]
        return "\n".join(out) + "\n"

    def f_measure(self, beta2: float = 0.3) -> np.ndarray:
        p, r = self.precision, self.recall
        den = beta2 * p + r
        return np.divide((1 + beta2) * p * r, den, out=np.zeros_like(p), where=den > 0)


def precision_recall(tp, n_pred, n_gt):
    """Scalar precision/recall; an empty prediction has precision 1."""
    precision = 1.0 if n_pred == 0 else tp / n_pred
    return precision, tp / n_gt


def _shift(a, dy, dx):
    """``out[y, x] = a[y + dy, x + dx]``, zero outside the image."""
    h, w = a.shape
    out = np.zeros_like(a)
    ys = slice(max(0, -dy), min(h, h - dy))
    xs = slice(max(0, -dx), min(w, w - dx))
    ys_src = slice(max(0, dy), min(h, h + dy))
    xs_src = slice(max(0, dx), min(w, w + dx))
    out[ys, xs] = a[ys_src, xs_src]
    return out


def match_offsets(tolerance: int):
    offs = [(dy, dx) for dy in range(-tolerance, tolerance + 1) for dx in range(-tolerance, tolerance + 1)]
    return sorted(offs, key=lambda o: (max(abs(o[0]), abs(o[1])), o[0] ** 2 + o[1] ** 2, o[0], o[1]))


def match_edges(pred, gt, tolerance: int = 2) -> int:
    """Greedy one-to-one matching of predicted to ground-truth edge pixels.

    Offsets are visited nearest first; for a fixed offset the pairing
    ``p -> p + offset`` is injective, so all pairs found at that offset can be
    committed at once.  Returns the number of matched pairs.
    """
    pred = np.asarray(pred, dtype=bool).copy()
    gt = np.asarray(gt, dtype=bool).copy()
    matched = 0
    for dy, dx in match_offsets(tolerance):
        hit = pred & _shift(gt, dy, dx)
        n = int(hit.sum())
        if n:
            matched += n
            pred &= ~hit
            gt &= ~_shift(hit, -dy, -dx)
    return matched


def binary_pr(score, gt, n_thresholds: int = 64, match_tolerance_px: int = 2,
              kind: str = "mask") -> PRCurve:
    """Sweep thresholds uniformly over the score range; predict ``score >= t``."""
    score = np.asarray(score, dtype=np.float64)
    gt = np.asarray(gt, dtype=bool)
    if score.shape != gt.shape:
        raise ShapeError(f"score {score.shape} and ground truth {gt.shape} differ")
    if kind not in GT_KINDS:
        raise ValueError(f"kind must be one of {GT_KINDS}")
    if n_thresholds < 2:
        raise ValueError("n_thresholds must be >= 2")
    n_gt = int(gt.sum())
    if n_gt == 0:
        raise CurveInvalidError("ground truth is empty; recall undefined")
    lo, hi = float(score.min()), float(score.max())
    if not hi > lo:
        hi = lo + 1.0
    thresholds = np.linspace(lo, hi, n_thresholds)
    prec, rec, empty = [], [], []
    for t in thresholds:
        pred = score >= t
        n_pred = int(pred.sum())
        tp = match_edges(pred, gt, match_tolerance_px) if kind == "edge" else int((pred & gt).sum())
        p, r = precision_recall(tp, n_pred, n_gt)
        prec.append(p)
        rec.append(r)
        empty.append(n_pred == 0)
    return PRCurve(thresholds, np.array(prec), np.array(rec), np.array(empty))


def iou(a, b) -> float:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ShapeError(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = int((a | b).sum())
    if union == 0:
        return 1.0
    return int((a & b).sum()) / union


def perturb_weights(weights: WeightField, noise_fraction: float, seed: int,
                    mode: str = "multiplicative") -> WeightField:
    """Jitter every weight by a uniform factor in ``[-f, f]`` and clamp to [0, 1]."""
    if not 0.0 <= noise_fraction <= 1.0:
        raise ValueError("noise_fraction must be in [0, 1]")
    if noise_fraction == 0.0:
        return WeightField(weights.topology, weights.values.copy())
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(0x6E6F6973,))))
    u = rng.uniform(-noise_fraction, noise_fraction, size=weights.values.shape)
    if mode == "multiplicative":
        noisy = weights.values * (1.0 + u)
    elif mode == "additive":
        noisy = weights.values + u
    else:
        raise ValueError(f"unknown noise mode {mode!r}")
    return WeightField(weights.topology, np.clip(noisy, 0.0, 1.0))


def robustness_experiment(signals, config, noise_fraction: float, seed: int, mode: str = "multiplicative"):
    """Top-level popout mask with clean and with perturbed weights, and their IoU."""
    from .pipeline import run_core

    clean = run_core(signals, config, stages=("popout",))
    noisy = run_core(signals, config, stages=("popout",),
                     perturb=lambda w: perturb_weights(w, noise_fraction, seed, mode))
    a, b = clean.masks[0], noisy.masks[0]
    return a, b, iou(a, b)


def sobel_magnitude(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        return np.sqrt(sum(sobel_magnitude(img[..., c]) ** 2 for c in range(img.shape[2])))
    g = np.hypot(ndimage.sobel(img, axis=1), ndimage.sobel(img, axis=0))
    return g


def prewitt_magnitude(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        return np.sqrt(sum(prewitt_magnitude(img[..., c]) ** 2 for c in range(img.shape[2])))
    return np.hypot(ndimage.prewitt(img, axis=1), ndimage.prewitt(img, axis=0))


def boundary_pixels(mask) -> np.ndarray:
    """Pixels with a 4-neighbour on the other side of the mask boundary (both sides)."""
    m = np.asarray(mask, dtype=bool)
    b = np.zeros_like(m)
    for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        nb = _shift(m, dy, dx)
        valid = _shift(np.ones_like(m), dy, dx)
        b |= valid & (nb != m)
    return b
