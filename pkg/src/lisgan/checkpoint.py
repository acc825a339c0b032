"""LISC checkpoint files.

Layout (all integers little-endian)::

    b"LISC" | u32 version | u16 tag length | tag (UTF-8 JSON) | u32 tensor count |
    per tensor: u16 name length | name (UTF-8) | u8 rank | u32 dims[rank] | f32 values |
    u32 CRC-32 of every preceding byte

The role tag carries the network's description (role, preset, N_z, N_R,
geometry) so a network can be rebuilt from the file alone.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .models import NetworkParams, build_network, spec_from_description

MAGIC = b"LISC"
VERSION = 1
SUPPORTED_VERSIONS = (1,)


class CheckpointError(Exception):
    """Base class; ``code`` distinguishes the failure kind."""

    code = "format"


class MagicError(CheckpointError):
    code = "magic"


class VersionError(CheckpointError):
    code = "version"


class CRCError(CheckpointError):
    code = "crc"


@dataclass
class Checkpoint:
    tag: dict
    tensors: dict[str, np.ndarray]
    version: int = VERSION

    @property
    def role(self) -> str:
        return self.tag.get("role", "")


def encode(ckpt: Checkpoint) -> bytes:
    tag = json.dumps(ckpt.tag, sort_keys=True, separators=(",", ":")).encode("utf-8")
    if len(tag) > 0xFFFF:
        raise ValueError("role tag too long")
    parts = [MAGIC, struct.pack("<IH", ckpt.version, len(tag)), tag, struct.pack("<I", len(ckpt.tensors))]
    for name, arr in ckpt.tensors.items():
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValueError(f"tensor name too long: {name[:40]}...")
        arr = np.asarray(arr)
        if arr.ndim > 255:
            raise ValueError(f"{name}: rank {arr.ndim} exceeds 255")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError(f"unexpected end of data at byte {self.pos}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode(buf: bytes) -> Checkpoint:
    if buf[:4] != MAGIC:
        raise MagicError(f"not a LISC checkpoint (magic {buf[:4]!r})")
    if len(buf) < 12:
        raise CRCError("file too short to hold a checksum")
    (version,) = struct.unpack("<I", buf[4:8])
    if version not in SUPPORTED_VERSIONS:
        raise VersionError(f"checkpoint version {version} is not supported (supported: "
                           f"{', '.join(map(str, SUPPORTED_VERSIONS))})")
    body, (crc,) = buf[:-4], struct.unpack("<I", buf[-4:])
    if zlib.crc32(body) != crc:
        raise CRCError("CRC-32 mismatch: file is truncated or corrupted")
    r = _Reader(body)
    r.take(8)
    (tag_len,) = r.unpack("<H")
    try:
        tag = json.loads(r.take(tag_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable role tag: {exc}") from exc
    (count,) = r.unpack("<I")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (n,) = r.unpack("<H")
        name = r.take(n).decode("utf-8")
        if name in tensors:
            raise CheckpointError(f"duplicate tensor name {name!r}")
        (rank,) = r.unpack("<B")
        dims = r.unpack(f"<{rank}I")
        size = int(np.prod(dims, dtype=np.int64))
        values = np.frombuffer(r.take(4 * size), dtype="<f4")
        tensors[name] = values.reshape(dims).astype(np.float32)
    if r.pos != len(body):
        raise CheckpointError(f"{len(body) - r.pos} trailing bytes after tensor table")
    return Checkpoint(tag, tensors, version)


def save(path, ckpt: Checkpoint) -> None:
    Path(path).write_bytes(encode(ckpt))


def load(path) -> Checkpoint:
    return decode(Path(path).read_bytes())


def save_network(path, net: NetworkParams, extra: dict | None = None) -> None:
    tag = net.spec.describe()
    if extra:
        tag.update(extra)
    save(path, Checkpoint(tag, net.snapshot()))


def load_network(path, role: str | None = None) -> tuple[NetworkParams, Checkpoint]:
    """Rebuild the network described by a checkpoint and load its tensors."""
    ckpt = load(path)
    if role is not None and ckpt.role != role:
        raise CheckpointError(f"{path}: checkpoint role is {ckpt.role!r}, expected {role!r}")
    try:
        spec = spec_from_description(ckpt.tag)
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"{path}: cannot rebuild network from tag {ckpt.tag}: {exc}") from exc
    net = build_network(spec, 0)
    try:
        net.load_arrays(ckpt.tensors)
    except ValueError as exc:
        raise CheckpointError(f"{path}: {exc}") from exc
    return net, ckpt
