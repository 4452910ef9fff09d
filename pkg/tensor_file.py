"""Formato binário versionado para pilhas de representações.

Layout (little-endian):
    "SMAP" | versão u16 | rank u8 | dims u32 x rank | payload f32 | CRC32 u32

O CRC cobre apenas o payload. `write_stack` grava também `<arquivo>.json`
com a proveniência (encoder, câmera, esqueleto).
"""
from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path
from typing import Any

import numpy as np

from errors import TensorFormatError
from logger import get_logger
from utils import canonical_json, sidecar_path

LOGGER = get_logger("tensor_file")

MAGIC = b"SMAP"
VERSION = 1
_HEADER = struct.Struct("<4sHB")
_DIM = struct.Struct("<I")
_CRC = struct.Struct("<I")


def encode_tensor(tensor: np.ndarray) -> bytes:
    array = np.ascontiguousarray(tensor, dtype="<f4")
    if array.ndim > 255:
        raise TensorFormatError("rank acima de 255", 6)
    payload = array.tobytes(order="C")
    parts = [_HEADER.pack(MAGIC, VERSION, array.ndim)]
    parts.extend(_DIM.pack(d) for d in array.shape)
    parts.append(payload)
    parts.append(_CRC.pack(zlib.crc32(payload) & 0xFFFFFFFF))
    return b"".join(parts)


def decode_tensor(data: bytes) -> np.ndarray:
    """Inverso de `encode_tensor`; erros indicam o offset do problema."""
    if len(data) < _HEADER.size:
        raise TensorFormatError("cabeçalho truncado", len(data))
    magic, version, rank = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise TensorFormatError(f"magic inválido {magic!r}", 0)
    if version != VERSION:
        raise TensorFormatError(f"versão não suportada {version}", 4)
    offset = _HEADER.size
    dims_end = offset + rank * _DIM.size
    if len(data) < dims_end:
        raise TensorFormatError("dimensões truncadas", len(data))
    dims = tuple(_DIM.unpack_from(data, offset + i * _DIM.size)[0] for i in range(rank))
    count = int(np.prod(dims, dtype=np.int64))
    payload_end = dims_end + 4 * count
    expected = payload_end + _CRC.size
    if len(data) != expected:
        raise TensorFormatError(f"tamanho {len(data)} difere do esperado {expected}", min(len(data), payload_end))
    payload = data[dims_end:payload_end]
    (stored,) = _CRC.unpack_from(data, payload_end)
    if zlib.crc32(payload) & 0xFFFFFFFF != stored:
        raise TensorFormatError("CRC32 não confere", payload_end)
    return np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)


def write_tensor(path: Path, tensor: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_tensor(tensor))


def read_tensor(path: Path) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes())


def write_stack(path: Path, tensor: np.ndarray, provenance: dict[str, Any]) -> None:
    write_tensor(path, tensor)
    sidecar_path(path).write_text(canonical_json(provenance), encoding="utf-8")
    LOGGER.debug("pilha %s gravada em %s", tensor.shape, path)


def read_stack(path: Path) -> tuple[np.ndarray, dict[str, Any]]:
    """Tensor e proveniência; pilhas externas sem sidecar retornam {}."""
    tensor = read_tensor(path)
    side = sidecar_path(path)
    provenance = json.loads(side.read_text(encoding="utf-8")) if side.exists() else {}
    return tensor, provenance
