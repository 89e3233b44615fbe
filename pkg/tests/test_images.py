import numpy as np
import pytest
from PIL import Image

from sunn.errors import DecodeError, InvalidInputError
from sunn.images import (load_image, normalize_to_int, read_image, read_raw, save_map, to_gray,
                         write_raw)


def test_pgm_normalization(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 85, 170, 255]))
    s = load_image(p)
    assert np.allclose(s.as_image(), [[0, 1 / 3], [2 / 3, 1]], atol=1 / 255)


def test_ppm_and_16bit(tmp_path):
    p = tmp_path / "c.ppm"
    Image.fromarray(np.full((3, 4, 3), 255, np.uint8)).save(p)
    assert load_image(p, "rgb").values.shape == (12, 3)
    q = tmp_path / "d.png"
    Image.fromarray(np.array([[0, 65535]], dtype=np.uint16)).save(q)
    assert read_image(q).tolist() == [[0.0, 1.0]]


def test_zero_byte_file(tmp_path):
    p = tmp_path / "empty.png"
    p.write_bytes(b"")
    with pytest.raises(DecodeError, match="empty.png"):
        load_image(p)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_image(tmp_path / "nope.png")


def test_red_png_as_gray(tmp_path):
    p = tmp_path / "red.png"
    img = np.zeros((4, 4, 3), np.uint8)
    img[..., 0] = 255
    Image.fromarray(img).save(p)
    assert np.allclose(load_image(p, "gray").as_image(), 0.299, atol=1 / 255)
    assert to_gray(np.ones((2, 2))).shape == (2, 2)


def test_lab_mode_in_unit_range(tmp_path):
    p = tmp_path / "rgb.png"
    Image.fromarray(np.random.default_rng(0).integers(0, 256, (5, 5, 3), dtype=np.uint8)).save(p)
    s = load_image(p, "lab")
    assert s.channels == 3 and s.values.min() >= 0 and s.values.max() <= 1
    with pytest.raises(InvalidInputError):
        load_image(p, "hsv")


def test_raw_round_trip_is_bit_identical(tmp_path, rng):
    f = rng.random((7, 5)).astype(np.float32)
    p = tmp_path / "f.raw"
    write_raw(f, p)
    data = p.read_bytes()
    assert data[:8] == (5).to_bytes(4, "little") + (7).to_bytes(4, "little")
    assert len(data) == 8 + 4 * 35
    assert read_raw(p).tobytes() == f.tobytes()


def test_raw_rejects_truncation(tmp_path):
    p = tmp_path / "t.raw"
    p.write_bytes(b"\x02\x00\x00\x00\x02\x00\x00\x00" + b"\x00" * 8)
    with pytest.raises(DecodeError):
        read_raw(p)
    with pytest.raises(InvalidInputError):
        write_raw(np.zeros(3), p)


def test_constant_field_saves_as_zeros(tmp_path):
    assert not normalize_to_int(np.full((3, 3), 0.7)).any()
    p = save_map(np.full((3, 3), 0.7), tmp_path / "c.png")
    assert not np.asarray(Image.open(p)).any()


def test_single_pixel_mask(tmp_path):
    m = np.zeros((6, 6), bool)
    m[2, 3] = True
    for name, fmt in (("m.png", "mask"), ("m.pbm", "pbm"), ("m8.png", "png8")):
        a = read_image(save_map(m, tmp_path / name, fmt))
        assert (a == 1.0).sum() == 1 and a[2, 3] == 1.0


def test_sixteen_bit_map(tmp_path):
    p = save_map(np.linspace(0, 1, 6).reshape(2, 3), tmp_path / "p.png", "png16")
    a = np.asarray(Image.open(p))
    assert a.max() == 65535 and a.min() == 0
    with pytest.raises(InvalidInputError):
        save_map(np.zeros((2, 2)), tmp_path / "x", "tiff")
