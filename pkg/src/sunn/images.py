"""Image decoding/encoding and the raw float dump format.

Raw dump layout: ``uint32 width, uint32 height`` (little endian), followed by
``width * height`` little-endian float32 values in row-major order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, InvalidInputError
from .neuron import SignalField

LUMA = np.array([0.299, 0.587, 0.114])
RAW_HEADER = struct.Struct("<II")
FORMATS = ("png8", "png16", "pgm", "raw", "pbm", "mask")


def _to_unit(im: Image.Image) -> np.ndarray:
    mode = im.mode
    if mode in ("I;16", "I;16B", "I;16L"):
        return np.asarray(im, dtype=np.float64) / 65535.0
    if mode == "I":
        a = np.asarray(im, dtype=np.float64)
        return a / (65535.0 if a.max() > 255 else 255.0)
    if mode == "F":
        return np.clip(np.asarray(im, dtype=np.float64), 0.0, 1.0)
    if mode in ("1", "L"):
        return np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    if mode == "LA":
        return np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0


def read_image(path) -> np.ndarray:
    """Decode to an ``(H, W)`` or ``(H, W, 3)`` float array in [0, 1]."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            return _to_unit(im)
    except FileNotFoundError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"{path}: cannot decode image ({exc})") from exc


def to_gray(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return img
    return img[..., :3] @ LUMA


def to_lab_unit(img) -> np.ndarray:
    """CIELAB with L/100 and (a, b) shifted and scaled into [0, 1]."""
    from skimage.color import rgb2lab

    lab = rgb2lab(np.asarray(img, dtype=np.float64)[..., :3])
    out = np.empty_like(lab)
    out[..., 0] = lab[..., 0] / 100.0
    out[..., 1:] = (lab[..., 1:] + 128.0) / 255.0
    return np.clip(out, 0.0, 1.0)


def load_image(path, mode: str = "gray") -> SignalField:
    """Load ``path`` as a signal field.

    ``mode`` is ``gray`` (luminance 0.299/0.587/0.114), ``rgb`` or ``lab``.
    """
    img = read_image(path)
    if mode == "gray":
        img = to_gray(img)
    elif mode in ("rgb", "lab"):
        if img.ndim == 2:
            img = np.repeat(img[..., None], 3, axis=2)
        if mode == "lab":
            img = to_lab_unit(img)
    else:
        raise InvalidInputError(f"unknown colour mode {mode!r}")
    return SignalField.from_array(img)


def normalize_to_int(field, bits: int = 8) -> np.ndarray:
    """Min-max scale to the full integer range; a constant field maps to zeros."""
    f = np.asarray(field, dtype=np.float64)
    top = (1 << bits) - 1
    lo, hi = float(f.min()), float(f.max())
    if not hi > lo:
        scaled = np.zeros(f.shape)
    else:
        scaled = (f - lo) / (hi - lo) * top
    return np.rint(scaled).astype(np.uint16 if bits > 8 else np.uint8)


def write_raw(field, path) -> None:
    f = np.asarray(field)
    if f.ndim != 2:
        raise InvalidInputError("raw dumps hold 2-D fields")
    h, w = f.shape
    with open(path, "wb") as fh:
        fh.write(RAW_HEADER.pack(w, h))
        fh.write(np.ascontiguousarray(f, dtype="<f4").tobytes())


def read_raw(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < RAW_HEADER.size:
        raise DecodeError(f"{path}: truncated raw dump")
    w, h = RAW_HEADER.unpack_from(data)
    body = data[RAW_HEADER.size:]
    if len(body) != 4 * w * h:
        raise DecodeError(f"{path}: expected {w}x{h} floats, found {len(body)} bytes")
    return np.frombuffer(body, dtype="<f4").reshape(h, w).astype(np.float32)


def _infer_format(path):
    ext = Path(path).suffix.lower()
    return {".raw": "raw", ".f32": "raw", ".pbm": "pbm", ".pgm": "pgm"}.get(ext, "png8")


def save_map(field, path, fmt: str | None = None) -> Path:
    """Write a 2-D field as an image, raw dump or mask bitmap."""
    path = Path(path)
    fmt = fmt or _infer_format(path)
    if fmt not in FORMATS:
        raise InvalidInputError(f"unknown output format {fmt!r}")
    f = np.asarray(field)
    if fmt == "raw":
        write_raw(f, path)
    elif fmt in ("pbm", "mask"):
        m = f.astype(bool)
        if fmt == "pbm":
            Image.fromarray(m).convert("1").save(path, format="PPM")
        else:
            Image.fromarray(np.where(m, 255, 0).astype(np.uint8), mode="L").save(path, format="PNG")
    elif fmt == "png16":
        Image.fromarray(normalize_to_int(f, 16)).save(path, format="PNG")
    else:
        Image.fromarray(normalize_to_int(f, 8), mode="L").save(path, format="PPM" if fmt == "pgm" else "PNG")
    return path
