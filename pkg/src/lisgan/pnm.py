"""Binary PGM (P5) / PPM (P6) reading and writing, 8-bit only."""

from __future__ import annotations

from pathlib import Path

import numpy as np


class PNMError(ValueError):
    pass


def _tokens(buf: bytes, count: int) -> tuple[list[int], int]:
    """Read ``count`` whitespace-separated header integers, skipping # comments."""
    out: list[int] = []
    pos = 2
    n = len(buf)
    while len(out) < count:
        while pos < n and buf[pos:pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos:pos + 1] == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and buf[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise PNMError("malformed header")
        out.append(int(buf[start:pos]))
    # exactly one whitespace byte separates the header from the raster
    if pos >= n or not buf[pos:pos + 1].isspace():
        raise PNMError("malformed header terminator")
    return out, pos + 1


def decode(buf: bytes) -> np.ndarray:
    """Return uint8 array of shape (H, W) for P5 or (H, W, 3) for P6."""
    magic = buf[:2]
    if magic not in (b"P5", b"P6"):
        raise PNMError(f"unsupported magic {magic!r}; only binary P5/P6 are read")
    (width, height, maxval), start = _tokens(buf, 3)
    if maxval != 255:
        raise PNMError(f"only 8-bit images (maxval 255) are supported, got {maxval}")
    channels = 3 if magic == b"P6" else 1
    need = width * height * channels
    raster = buf[start:start + need]
    if len(raster) != need:
        raise PNMError(f"truncated raster: expected {need} bytes, got {len(raster)}")
    arr = np.frombuffer(raster, dtype=np.uint8)
    shape = (height, width, 3) if channels == 3 else (height, width)
    return arr.reshape(shape).copy()


def encode(img: np.ndarray) -> bytes:
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise PNMError(f"expected uint8 pixels, got {img.dtype}")
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise PNMError(f"expected (H, W) or (H, W, 3), got {img.shape}")
    h, w = img.shape[:2]
    return magic + f"\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img).tobytes()


def read(path) -> np.ndarray:
    return decode(Path(path).read_bytes())


def write(path, img: np.ndarray) -> None:
    Path(path).write_bytes(encode(img))


def to_uint8(chw: np.ndarray) -> np.ndarray:
    """(C, H, W) floats in [0, 1] -> (H, W) or (H, W, 3) uint8."""
    arr = np.clip(np.rint(np.asarray(chw, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    if arr.shape[0] == 1:
        return arr[0]
    if arr.shape[0] == 3:
        return arr.transpose(1, 2, 0)
    raise PNMError(f"cannot encode {arr.shape[0]} channels")
