# src/core/checkpoint.py
"""
Binary parameter checkpoints.

Layout (all integers little-endian u32, payload little-endian f64):

    b"HIFD" | version | { name_len | name (UTF-8) | rank | dims[rank] | payload }*

Entries run to end of file.
"""

import logging
from collections import OrderedDict
from pathlib import Path
from typing import Dict, Mapping, Union

import numpy as np

from .errors import CheckpointVersionError

logger = logging.getLogger(__name__)

MAGIC = b"HIFD"
FORMAT_VERSION = 1
SUPPORTED_VERSIONS = (1,)

_U32 = np.dtype("<u4")
_F64 = np.dtype("<f8")


def _u32(value: int) -> bytes:
    return np.array([value], dtype=_U32).tobytes()


def encode_checkpoint(arrays: Mapping[str, np.ndarray], version: int = FORMAT_VERSION) -> bytes:
    chunks = [MAGIC, _u32(version)]
    for name, array in arrays.items():
        array = np.asarray(array, dtype=np.float64)
        raw_name = name.encode("utf-8")
        chunks.append(_u32(len(raw_name)))
        chunks.append(raw_name)
        chunks.append(_u32(array.ndim))
        chunks.append(np.asarray(array.shape, dtype=_U32).tobytes())
        chunks.append(np.ascontiguousarray(array, dtype=_F64).tobytes())
    return b"".join(chunks)


def decode_checkpoint(blob: bytes, source: str = "<bytes>") -> "OrderedDict[str, np.ndarray]":
    if blob[:4] != MAGIC:
        raise CheckpointVersionError(f"{source}: not a checkpoint (magic {blob[:4]!r})")
    if len(blob) < 8:
        raise CheckpointVersionError(f"{source}: truncated header")
    version = int(np.frombuffer(blob, dtype=_U32, count=1, offset=4)[0])
    if version not in SUPPORTED_VERSIONS:
        raise CheckpointVersionError(f"{source}: unsupported checkpoint version {version}")

    arrays: "OrderedDict[str, np.ndarray]" = OrderedDict()
    offset = 8
    try:
        while offset < len(blob):
            name_len = int(np.frombuffer(blob, dtype=_U32, count=1, offset=offset)[0])
            offset += 4
            name = blob[offset:offset + name_len].decode("utf-8")
            offset += name_len
            rank = int(np.frombuffer(blob, dtype=_U32, count=1, offset=offset)[0])
            offset += 4
            dims = tuple(int(d) for d in np.frombuffer(blob, dtype=_U32, count=rank, offset=offset))
            offset += 4 * rank
            count = int(np.prod(dims)) if dims else 1
            payload = np.frombuffer(blob, dtype=_F64, count=count, offset=offset)
            offset += 8 * count
            arrays[name] = payload.astype(np.float64).reshape(dims)
    except (ValueError, UnicodeDecodeError) as e:
        raise CheckpointVersionError(f"{source}: corrupt entry at byte {offset} ({e})") from None
    return arrays


def save_checkpoint(path: Union[str, Path], arrays: Mapping[str, np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(arrays))
    logger.info(f"💾 checkpoint written: {path} ({len(arrays)} tensors)")
    return path


def load_checkpoint(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    path = Path(path)
    arrays = decode_checkpoint(path.read_bytes(), source=str(path))
    logger.info(f"📂 checkpoint loaded: {path} ({len(arrays)} tensors)")
    return arrays
