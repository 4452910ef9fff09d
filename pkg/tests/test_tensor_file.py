import struct
import zlib

import numpy as np
import pytest

from errors import TensorFormatError
from tensor_file import (
    MAGIC,
    decode_tensor,
    encode_tensor,
    read_stack,
    read_tensor,
    sidecar_path,
    write_stack,
    write_tensor,
)


@pytest.fixture
def tensor():
    rng = np.random.default_rng(0)
    data = rng.normal(size=(3, 4, 5)).astype(np.float32)
    data[0, 0, 0] = np.nan
    data[1, 2, 3] = -0.0
    return data


def _payload_end(rank, count):
    return 7 + 4 * rank + 4 * count


def test_round_trip_is_bit_exact(tensor, tmp_path):
    path = tmp_path / "stack.smap"
    write_tensor(path, tensor)
    back = read_tensor(path)
    assert back.dtype == np.float32
    assert back.shape == tensor.shape
    assert back.tobytes() == tensor.tobytes()


def test_header_layout(tensor):
    data = encode_tensor(tensor)
    assert data[:4] == MAGIC
    assert struct.unpack_from("<HB", data, 4) == (1, 3)
    assert struct.unpack_from("<3I", data, 7) == (3, 4, 5)
    assert len(data) == _payload_end(3, tensor.size) + 4
    payload = data[19:_payload_end(3, tensor.size)]
    assert struct.unpack_from("<I", data, len(data) - 4)[0] == zlib.crc32(payload)


def test_float64_input_is_stored_as_float32():
    back = decode_tensor(encode_tensor(np.array([[1.5, 2.25]], dtype=np.float64)))
    assert back.dtype == np.float32
    np.testing.assert_array_equal(back, [[1.5, 2.25]])


def test_empty_tensor():
    empty = decode_tensor(encode_tensor(np.zeros((0, 4), np.float32)))
    assert empty.shape == (0, 4)


def test_bad_magic(tensor):
    data = b"XMAP" + encode_tensor(tensor)[4:]
    with pytest.raises(TensorFormatError) as info:
        decode_tensor(data)
    assert info.value.offset == 0


def test_unsupported_version(tensor):
    data = bytearray(encode_tensor(tensor))
    data[4:6] = struct.pack("<H", 2)
    with pytest.raises(TensorFormatError) as info:
        decode_tensor(bytes(data))
    assert info.value.offset == 4


@pytest.mark.parametrize("cut,expected", [(1, "payload_end"), (30, "len"), (200, "len")])
def test_truncation(tensor, cut, expected):
    data = encode_tensor(tensor)[:-cut]
    with pytest.raises(TensorFormatError) as info:
        decode_tensor(data)
    end = _payload_end(3, tensor.size)
    assert info.value.offset == (end if expected == "payload_end" else min(len(data), end))


def test_truncated_header():
    with pytest.raises(TensorFormatError) as info:
        decode_tensor(MAGIC + b"\x01")
    assert info.value.offset == 5


def test_crc_mismatch_points_to_checksum(tensor):
    data = bytearray(encode_tensor(tensor))
    data[25] ^= 0x01
    with pytest.raises(TensorFormatError, match="CRC32") as info:
        decode_tensor(bytes(data))
    assert info.value.offset == _payload_end(3, tensor.size)


def test_stack_sidecar(tensor, tmp_path):
    path = tmp_path / "sub" / "frame.smap"
    provenance = {"skeleton": "default-15", "camera": {"f": 832.0}}
    write_stack(path, tensor, provenance)
    assert sidecar_path(path).name == "frame.smap.json"
    back, prov = read_stack(path)
    assert back.tobytes() == tensor.tobytes()
    assert prov == provenance


def test_stack_without_sidecar(tensor, tmp_path):
    path = tmp_path / "external.smap"
    write_tensor(path, tensor)
    _, prov = read_stack(path)
    assert prov == {}
