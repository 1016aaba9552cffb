"""
Versioned little-endian checkpoint files.

Layout:
    magic b"URNNCKPT" | u32 version | u64 iteration
    u32 config length | UTF-8 `key = value` config echo
    u32 group count | groups
    u32 CRC-32 of every preceding byte

Each group is u32 name length, name bytes, u32 rank, rank x u64 dims and a
float64 payload. Optimizer accumulators are groups named "rmsprop/<group>";
the optimizer hyperparameters are the group "rmsprop:hyper" = [lr, decay, eps].
"""

import logging
import os
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Union

import numpy as np

from urnn.config import RunConfig, config_from_text
from urnn.core.errors import DataError, FormatError
from urnn.core.optim import RMSPropState

logger = logging.getLogger(__name__)

MAGIC = b"URNNCKPT"
VERSION = 1
ACCUM_PREFIX = "rmsprop/"
HYPER_GROUP = "rmsprop:hyper"

PathLike = Union[str, Path]


@dataclass
class Checkpoint:
    version: int
    iteration: int
    config: RunConfig
    params: Dict[str, np.ndarray]
    optimizer: RMSPropState


def _pack_group(name: str, array: np.ndarray) -> bytes:
    array = np.ascontiguousarray(array, dtype="<f8")
    encoded = name.encode("utf-8")
    parts = [struct.pack("<I", len(encoded)), encoded, struct.pack("<I", array.ndim)]
    parts.extend(struct.pack("<Q", d) for d in array.shape)
    parts.append(array.tobytes())
    return b"".join(parts)


def save_checkpoint(
    path: PathLike,
    params: Dict[str, np.ndarray],
    optstate: RMSPropState,
    cfg: RunConfig,
    iteration: int = 0,
) -> Path:
    """Write atomically: the target is either the old file or the complete new one"""
    groups = dict(params)
    groups[HYPER_GROUP] = np.array([optstate.lr, optstate.decay, optstate.eps])
    groups.update({ACCUM_PREFIX + name: acc for name, acc in optstate.accum.items()})

    config_bytes = cfg.to_text().encode("utf-8")
    body = bytearray(MAGIC)
    body += struct.pack("<IQ", VERSION, iteration)
    body += struct.pack("<I", len(config_bytes)) + config_bytes
    body += struct.pack("<I", len(groups))
    for name, array in groups.items():
        body += _pack_group(name, array)
    body += struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)

    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(body)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)
    logger.info("saved checkpoint %s (iteration %d, %d groups)", path, iteration, len(groups))
    return path


class _Reader:
    def __init__(self, data: bytes, path: PathLike):
        self.data = data
        self.path = path
        self.pos = 0

    def take(self, size: int, what: str) -> bytes:
        if self.pos + size > len(self.data):
            raise FormatError(f"{self.path}: truncated while reading {what}")
        chunk = self.data[self.pos : self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def load_checkpoint(path: PathLike) -> Checkpoint:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise DataError(f"cannot read checkpoint {path}: {e}") from e
    reader = _Reader(data, path)
    if reader.take(len(MAGIC), "magic") != MAGIC:
        raise FormatError(f"{path}: not a uRNN checkpoint (bad magic)")
    version, iteration = reader.unpack("<IQ", "version")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}, expected {VERSION}")
    if len(data) < 4 or zlib.crc32(data[:-4]) & 0xFFFFFFFF != struct.unpack("<I", data[-4:])[0]:
        raise FormatError(f"{path}: checksum mismatch (corrupt or truncated file)")

    (config_len,) = reader.unpack("<I", "config length")
    try:
        config = config_from_text(reader.take(config_len, "config").decode("utf-8"), str(path))
    except UnicodeDecodeError:
        raise FormatError(f"{path}: config echo is not valid UTF-8") from None

    (count,) = reader.unpack("<I", "group count")
    groups: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<I", "group name length")
        name = reader.take(name_len, "group name").decode("utf-8")
        (rank,) = reader.unpack("<I", f"rank of '{name}'")
        shape = reader.unpack(f"<{rank}Q", f"dims of '{name}'") if rank else ()
        size = int(np.prod(shape)) if rank else 1
        payload = reader.take(8 * size, f"payload of '{name}'")
        groups[name] = np.frombuffer(payload, dtype="<f8").reshape(shape).astype(np.float64)
    if reader.pos != len(data) - 4:
        raise FormatError(f"{path}: {len(data) - 4 - reader.pos} unexpected bytes after the last group")

    if HYPER_GROUP not in groups:
        raise FormatError(f"{path}: missing optimizer group '{HYPER_GROUP}'")
    lr, decay, eps = groups.pop(HYPER_GROUP)
    accum = {name[len(ACCUM_PREFIX) :]: groups.pop(name) for name in list(groups) if name.startswith(ACCUM_PREFIX)}
    optimizer = RMSPropState(lr=float(lr), decay=float(decay), eps=float(eps), accum=accum)
    return Checkpoint(version, iteration, config, groups, optimizer)
