"""Synthetic scenes with known ground truth."""

import numpy as np


def square_scene(size=64, margin=None, fg=0.8, bg=0.0):
    """Bright square on a uniform ground; returns ``(image, square_mask)``.

    The square spans the middle half of the image unless ``margin`` is given.
    """
    margin = size // 4 if margin is None else margin
    mask = np.zeros((size, size), dtype=bool)
    mask[margin:size - margin, margin:size - margin] = True
    img = np.where(mask, fg, bg).astype(np.float64)
    return img, mask


def two_region(size=64, contrast=0.8, margin=None):
    """Square of value ``0.1 + contrast`` on a ``0.1`` ground."""
    img, mask = square_scene(size, margin, fg=0.1 + contrast, bg=0.1)
    return img, mask


def ink_on_parchment(size=96, seed=0, stroke=3, mottle=0.04):
    """Dark pen strokes over a bright, mottled ground; returns ``(image, stroke_mask)``."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size]
    # low-frequency blotches plus fine grain
    ground = 0.8 + 0.05 * np.sin(xx / 9.0) * np.cos(yy / 13.0)
    ground = ground + rng.normal(0.0, mottle, (size, size))
    ink = np.zeros((size, size), dtype=bool)
    lo, hi = size // 5, size - size // 5
    for row in np.linspace(lo, hi, 4).astype(int):  # lines of "script"
        ink[row:row + stroke, lo:hi] = True
        for x in range(lo, hi, 9):  # letter-like uprights
            ink[row - 6:row + stroke, x:x + stroke] = True
    img = np.where(ink, 0.15 + rng.normal(0.0, 0.01, (size, size)), ground)
    return np.clip(img, 0.0, 1.0), ink


def bench_image(size=512, seed=0):
    """Blocky scene with smooth shading and a little noise, for timing runs."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / size
    img = 0.3 + 0.2 * np.sin(6 * xx) * np.cos(4 * yy)
    for _ in range(12):
        x0, y0 = rng.uniform(0, 0.8, 2)
        w, h = rng.uniform(0.05, 0.25, 2)
        sel = (xx >= x0) & (xx < x0 + w) & (yy >= y0) & (yy < y0 + h)
        img[sel] = rng.uniform(0.0, 1.0)
    img += rng.normal(0, 0.01, img.shape)
    return np.clip(img, 0.0, 1.0)
