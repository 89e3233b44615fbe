"""Object popout from a potential-residue map.

Thresholds come from valleys of the smoothed residue histogram; when the
histogram has a single mode the multi-level between-class-variance (Otsu)
split is used instead.  Masks are ``(H, W)`` boolean arrays.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.signal import find_peaks

from .leaky import PRMap, minmax

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    degenerate: bool = False

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])


def _as_field(prmap) -> np.ndarray:
    if isinstance(prmap, PRMap):
        return prmap.as_image()
    return np.asarray(prmap, dtype=np.float64)


def pr_histogram(prmap, bins: int = 64) -> Histogram:
    if bins < 2:
        raise ValueError("need at least 2 bins")
    v = _as_field(prmap).ravel()
    lo, hi = float(v.min()), float(v.max())
    degenerate = not hi > lo
    if degenerate:
        log.warning("residue map is constant; histogram is degenerate")
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(v, bins=bins, range=(lo, hi))
    return Histogram(edges, counts, degenerate)


def smooth_counts(counts, width: int = 3) -> np.ndarray:
    """Moving average; edge bins are padded by repetition."""
    c = np.asarray(counts, dtype=np.float64)
    pad = width // 2
    return np.convolve(np.pad(c, pad, mode="edge"), np.ones(width) / width, mode="valid")


def histogram_peaks(hist: Histogram, min_prominence: float = 0.25) -> np.ndarray:
    """Bin indices of the smoothed histogram's peaks.

    Peaks must rise above their surroundings by ``min_prominence`` times the
    mean bin count, so a small object's mode is not masked by a huge
    background mode.  End bins can be peaks.
    """
    s = smooth_counts(hist.counts)
    padded = np.concatenate([[0.0], s, [0.0]])
    peaks, _ = find_peaks(padded, prominence=min_prominence * s.sum() / s.size)
    return peaks - 1


def otsu_thresholds(hist: Histogram, levels: int) -> np.ndarray:
    """Exact multi-level Otsu over histogram bins by dynamic programming.

    Between-class variance equals ``sum_j w_j mu_j^2`` up to a constant, which
    is additive over classes, so the optimal split of bins into
    ``levels + 1`` contiguous classes is a shortest-path problem.  Thresholds
    are returned at the bin edges separating classes.
    """
    p = np.asarray(hist.counts, dtype=np.float64)
    x = hist.centers
    nb = p.size
    levels = min(levels, nb - 1)
    if levels < 1 or p.sum() == 0:
        return np.zeros(0)
    P = np.concatenate([[0.0], np.cumsum(p)])
    S = np.concatenate([[0.0], np.cumsum(p * x)])

    def score(i, j):  # class = bins [i, j)
        w = P[j] - P[i]
        return 0.0 if w <= 0 else (S[j] - S[i]) ** 2 / w

    classes = levels + 1
    best = np.full((classes + 1, nb + 1), -np.inf)
    arg = np.zeros((classes + 1, nb + 1), dtype=int)
    best[0, 0] = 0.0
    for c in range(1, classes + 1):
        for j in range(c, nb + 1):
            for i in range(c - 1, j):
                val = best[c - 1, i] + score(i, j)
                if val > best[c, j]:
                    best[c, j] = val
                    arg[c, j] = i
    cuts = []
    j = nb
    for c in range(classes, 0, -1):
        j = arg[c, j]
        cuts.append(j)
    cuts = sorted(cuts)[1:]  # drop the leading 0
    return hist.edges[np.array(cuts, dtype=int)]


def find_thresholds(hist: Histogram, max_levels: int = 3, min_prominence: float = 0.25) -> np.ndarray:
    """Strictly increasing thresholds at the deepest histogram valleys.

    Falls back to multi-level Otsu when fewer than two peaks are found; a
    degenerate histogram yields no thresholds.
    """
    if max_levels < 1:
        raise ValueError("max_levels must be >= 1")
    if hist.degenerate:
        return np.zeros(0)
    s = smooth_counts(hist.counts)
    peaks = histogram_peaks(hist, min_prominence)
    floor = min_prominence * s.sum() / s.size
    valleys = []
    for a, b in zip(peaks[:-1], peaks[1:]):
        seg = s[a:b + 1]
        lows = np.flatnonzero(seg == seg.min())
        v = a + int(lows[len(lows) // 2])
        depth = min(s[a], s[b]) - s[v]
        # equal-height ripples both get full prominence; a shallow dip between them is no valley
        if depth >= floor:
            valleys.append((depth, v))
    if valleys:
        valleys.sort(key=lambda t: (-t[0], t[1]))
        chosen = sorted(v for _, v in valleys[:max_levels])
        # threshold at the upper edge of the valley bin: the valley itself goes with the lower class
        t = hist.edges[np.array(chosen) + 1]
    else:
        log.info("no histogram valley found; using multi-level Otsu")
        t = otsu_thresholds(hist, max_levels)
    return np.unique(t)


def popout_components(prmap, thresholds) -> list[np.ndarray]:
    """Nested masks ``residue >= t`` for increasing ``t``, loosest first."""
    v = _as_field(prmap)
    t = np.asarray(thresholds, dtype=np.float64)
    if t.size == 0:
        log.warning("no thresholds; falling back to a single above-mean mask")
        return [v > v.mean()]
    if np.any(np.diff(t) <= 0):
        raise ValueError("thresholds must be strictly increasing")
    return [v >= ti for ti in t]


def bilayer_segment(prmap, min_prominence: float = 0.25) -> tuple[np.ndarray, np.ndarray]:
    """Split into (foreground, background) at a single histogram threshold."""
    v = _as_field(prmap)
    t = find_thresholds(pr_histogram(v), 1, min_prominence)
    if t.size == 0:
        log.warning("degenerate residue map; everything is background")
        fg = np.zeros(v.shape, dtype=bool)
    else:
        fg = v >= t[0]
    return fg, ~fg


def radial_distance(shape) -> np.ndarray:
    """Distance of each pixel to the image centre, divided by the half-diagonal."""
    h, w = shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    y, x = np.mgrid[0:h, 0:w]
    r = np.hypot(x - cx, y - cy)
    half_diag = np.hypot(cx, cy)
    return r / half_diag if half_diag > 0 else r


def center_fusion(prmap, strength: float = 1.0) -> np.ndarray:
    if strength < 0:
        raise ValueError("strength must be >= 0")
    v = _as_field(prmap)
    return minmax(v) * np.exp(-strength * radial_distance(v.shape) ** 2)


def filter_small_components(mask, min_fraction: float = 0.001) -> np.ndarray:
    """Drop 8-connected components smaller than ``min_fraction`` of the image."""
    mask = np.asarray(mask, dtype=bool)
    labels, n = ndimage.label(mask, structure=np.ones((3, 3)))
    if n == 0:
        return mask.copy()
    sizes = np.bincount(labels.ravel())
    keep = sizes >= min_fraction * mask.size
    keep[0] = False
    return keep[labels]
