"""Versioned binary checkpoint container.

Layout (all integers little-endian):

    magic        8 bytes  b"GDGCKPT\\0"
    version      u32
    stage_tag    u32 length + utf-8
    config_hash  u32 length + utf-8 (hex digest, may be empty)
    arch         u32 length + canonical JSON (sorted keys)
    n_params     u32
    per param:   u32 name length + utf-8 name,
                 u8 rank, rank * u64 dims,
                 raw float32 little-endian data
    digest       32 bytes sha256 over everything above

Parameters round-trip bitwise; loading verifies the digest and, when asked,
the stage tag.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import CorruptFile, VersionMismatch

MAGIC = b"GDGCKPT\x00"
FORMAT_VERSION = 1


def canonical_arch_text(arch: dict) -> str:
    return json.dumps(arch, sort_keys=True, separators=(",", ":"))


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CorruptFile("truncated checkpoint")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def u8(self) -> int:
        return self.take(1)[0]

    def string(self) -> str:
        return self.take(self.u32()).decode("utf-8")


@dataclass(frozen=True)
class CheckpointData:
    stage_tag: str
    config_hash: str
    arch: dict
    params: dict[str, np.ndarray]


def write_checkpoint(
    path: str | Path,
    stage_tag: str,
    arch: dict,
    params: dict[str, np.ndarray],
    config_hash: str = "",
) -> Path:
    """Serialize named float32 arrays plus metadata; atomic via tmp+rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    parts = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
    parts.append(_pack_str(stage_tag))
    parts.append(_pack_str(config_hash))
    parts.append(_pack_str(canonical_arch_text(arch)))
    parts.append(struct.pack("<I", len(params)))
    for name in sorted(params):
        original = np.asarray(params[name])
        arr = np.ascontiguousarray(original, dtype=np.float32)  # promotes 0-d to 1-d
        parts.append(_pack_str(name))
        parts.append(struct.pack("<B", original.ndim))
        for d in original.shape:
            parts.append(struct.pack("<Q", d))
        parts.append(arr.astype("<f4", copy=False).tobytes())
    body = b"".join(parts)
    digest = hashlib.sha256(body).digest()
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(body + digest)
    tmp.replace(path)
    return path


def read_checkpoint(path: str | Path, expected_stage: str | None = None) -> CheckpointData:
    """Parse and verify a checkpoint; raises CorruptFile / VersionMismatch."""
    blob = Path(path).read_bytes()
    if len(blob) < len(MAGIC) + 4 + 32:
        raise CorruptFile(f"{path}: too short to be a checkpoint")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptFile(f"{path}: integrity digest mismatch")
    r = _Reader(body)
    if r.take(len(MAGIC)) != MAGIC:
        raise CorruptFile(f"{path}: bad magic")
    version = r.u32()
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    stage_tag = r.string()
    config_hash = r.string()
    try:
        arch = json.loads(r.string())
    except json.JSONDecodeError as exc:
        raise CorruptFile(f"{path}: arch descriptor is not valid JSON: {exc}") from None
    if expected_stage is not None and stage_tag != expected_stage:
        raise VersionMismatch(f"{path}: stage tag {stage_tag!r}, expected {expected_stage!r}")
    n = r.u32()
    params: dict[str, np.ndarray] = {}
    for _ in range(n):
        name = r.string()
        rank = r.u8()
        shape = tuple(r.u64() for _ in range(rank))
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        raw = r.take(count * 4)
        params[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    if r.pos != len(body):
        raise CorruptFile(f"{path}: {len(body) - r.pos} trailing bytes")
    return CheckpointData(stage_tag=stage_tag, config_hash=config_hash, arch=arch, params=params)


def save_gan_checkpoint(bundle, path: str | Path, config_hash: str = "") -> Path:
    return write_checkpoint(path, bundle.stage_tag, bundle.arch, bundle.state_arrays(), config_hash)


def load_gan_checkpoint(path: str | Path, expected_stage: str | None = None):
    """Rebuild a GanBundle from a checkpoint, bitwise-identical parameters."""
    from . import nets
    from .bundle import rebuild_bundle

    data = read_checkpoint(path, expected_stage)
    if data.arch.get("kind") != "gan_bundle":
        raise VersionMismatch(f"{path}: not a gan bundle checkpoint (kind={data.arch.get('kind')!r})")
    bundle = rebuild_bundle(data.arch)
    nets.arrays_to_state(bundle.generator, data.params, "generator.")
    nets.arrays_to_state(bundle.critic, data.params, "critic.")
    return bundle
