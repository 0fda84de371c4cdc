import numpy as np
import pytest
from PIL import Image

from polydither.imageio import (
    ImageFormatError,
    pack_pbm,
    read_image,
    read_pbm,
    read_pgm,
    write_bilevel,
    write_pgm,
    write_png_bilevel,
)


def test_pbm_packing_is_bit_exact():
    black = np.zeros((2, 10), dtype=bool)
    black[0, 0] = True  # first pixel -> MSB of first byte
    black[0, 9] = True  # tenth pixel -> bit 6 of second byte
    black[1, :8] = True
    assert pack_pbm(black) == b"P4\n10 2\n" + bytes([0b10000000, 0b01000000, 0xFF, 0x00])


def test_pbm_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    black = rng.random((13, 21)) < 0.3
    write_bilevel(tmp_path / "a.pbm", black)
    assert np.array_equal(read_pbm(tmp_path / "a.pbm"), black)


def test_pgm_with_comments(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# made by hand\n3 2\n# maxval next\n255\n" + bytes([0, 51, 255, 102, 204, 153]))
    img = read_pgm(p)
    assert img.shape == (2, 3)
    assert np.allclose(img, np.array([[0, 51, 255], [102, 204, 153]]) / 255)


def test_pgm_16_bit(tmp_path):
    p = tmp_path / "w.pgm"
    p.write_bytes(b"P5 2 1 65535\n" + bytes([0x00, 0x00, 0xFF, 0xFF]))
    assert np.allclose(read_pgm(p), [[0.0, 1.0]])


def test_pgm_round_trip(tmp_path):
    v = np.arange(256).reshape(16, 16) / 255
    write_pgm(tmp_path / "r.pgm", v)
    assert np.allclose(read_image(tmp_path / "r.pgm"), v)


def test_pgm_errors(tmp_path):
    p = tmp_path / "bad.pgm"
    p.write_bytes(b"P2\n1 1\n255\n0\n")
    with pytest.raises(ImageFormatError):
        read_pgm(p)
    p.write_bytes(b"P5\n4 4\n255\n" + bytes(3))
    with pytest.raises(ImageFormatError):
        read_pgm(p)
    p.write_bytes(b"GIF89a")
    with pytest.raises(ImageFormatError):
        read_image(p)
    with pytest.raises(FileNotFoundError):
        read_image(tmp_path / "none.pgm")


def test_png_bilevel_and_metadata(tmp_path):
    black = np.eye(9, dtype=bool)
    write_png_bilevel(tmp_path / "o.png", black, {"polydither-table": "abc"})
    with Image.open(tmp_path / "o.png") as im:
        assert im.mode == "1"
        assert im.text["polydither-table"] == "abc"
        arr = np.asarray(im)
    assert np.array_equal(~arr, black)


def test_png_gray_input(tmp_path):
    v = (np.arange(12).reshape(3, 4) * 20).astype(np.uint8)
    Image.fromarray(v).save(tmp_path / "g.png")
    assert np.allclose(read_image(tmp_path / "g.png"), v / 255)
