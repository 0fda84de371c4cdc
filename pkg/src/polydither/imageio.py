"""Grayscale input and bilevel output: binary PGM (P5), PBM (P4) and PNG."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image
from PIL.PngImagePlugin import PngInfo


class ImageFormatError(ValueError):
    pass


def _pnm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """First ``count`` whitespace-separated header tokens (comments skipped) and the offset after them."""
    tokens = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < n and not data[j : j + 1].isspace():
            j += 1
        if j == i:
            raise ImageFormatError("truncated header")
        tokens.append(data[i:j])
        i = j
    # exactly one whitespace byte separates the header from the raster
    return tokens, i + 1


def read_pgm(path: str | Path) -> np.ndarray:
    """Intensities in [0, 1] (0 = black) from a binary P5 file; v / maxval."""
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise ImageFormatError(f"{path}: not a binary PGM (P5) file")
    tokens, start = _pnm_tokens(data, 4)
    try:
        w, h, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise ImageFormatError(f"{path}: bad header") from exc
    if w < 1 or h < 1 or not 0 < maxval < 65536:
        raise ImageFormatError(f"{path}: bad dimensions or maxval")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    need = w * h * dtype.itemsize
    raster = data[start : start + need]
    if len(raster) < need:
        raise ImageFormatError(f"{path}: raster is truncated")
    v = np.frombuffer(raster, dtype=dtype).reshape(h, w).astype(np.float64)
    if v.max() > maxval:
        raise ImageFormatError(f"{path}: sample exceeds maxval")
    return v / maxval


def write_pgm(path: str | Path, image: np.ndarray) -> None:
    """8-bit P5 from intensities in [0, 1]."""
    v = np.clip(np.round(np.asarray(image) * 255), 0, 255).astype(np.uint8)
    h, w = v.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + v.tobytes())


def pack_pbm(black: np.ndarray) -> bytes:
    """P4 bytes: 1 = black, rows packed MSB first and padded to whole bytes."""
    black = np.asarray(black, dtype=bool)
    h, w = black.shape
    return f"P4\n{w} {h}\n".encode() + np.packbits(black, axis=1).tobytes()


def write_pbm(path: str | Path, black: np.ndarray) -> None:
    Path(path).write_bytes(pack_pbm(black))


def read_pbm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:2] != b"P4":
        raise ImageFormatError(f"{path}: not a binary PBM (P4) file")
    tokens, start = _pnm_tokens(data, 3)
    w, h = int(tokens[1]), int(tokens[2])
    row = (w + 7) // 8
    raw = np.frombuffer(data[start : start + row * h], dtype=np.uint8)
    if len(raw) < row * h:
        raise ImageFormatError(f"{path}: raster is truncated")
    return np.unpackbits(raw.reshape(h, row), axis=1)[:, :w].astype(bool)


def read_png_gray(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode == "I;16":
            return np.asarray(im, dtype=np.float64) / 65535
        return np.asarray(im.convert("L"), dtype=np.float64) / 255


def write_png_bilevel(path: str | Path, black: np.ndarray, metadata: dict[str, str] | None = None) -> None:
    """1-bit PNG (black = 0) with optional text chunks."""
    img = Image.fromarray(~np.asarray(black, dtype=bool))
    info = PngInfo()
    for k, v in (metadata or {}).items():
        info.add_text(k, v)
    img.save(path, format="PNG", pnginfo=info)


def write_png_gray16(path: str | Path, values: np.ndarray) -> None:
    """16-bit grayscale PNG from values in [0, 1]."""
    v = np.clip(np.round(np.asarray(values) * 65535), 0, 65535).astype(np.uint16)
    Image.fromarray(v).save(path, format="PNG")  # uint16 maps to mode I;16


def read_image(path: str | Path) -> np.ndarray:
    """Intensities in [0, 1] from a P5 PGM or any grayscale-convertible PNG."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"input not found: {path}")
    head = path.read_bytes()[:8]
    if head[:2] == b"P5":
        return read_pgm(path)
    if head == b"\x89PNG\r\n\x1a\n":
        return read_png_gray(path)
    raise ImageFormatError(f"{path}: unsupported image format (P5 PGM or PNG expected)")


def write_bilevel(path: str | Path, black: np.ndarray, metadata: dict[str, str] | None = None) -> None:
    """PNG for ``.png`` paths, P4 otherwise."""
    if Path(path).suffix.lower() == ".png":
        write_png_bilevel(path, black, metadata)
    else:
        write_pbm(path, black)
