"""Serialization of named parameter arrays.

File layout (all integers little-endian):

    magic  b"HSCM" | version u8 | reserved u8 | count u16 | content hash 8B
    then per entry:
    name length u16 | name utf-8 | ndim u8 | shape u32 * ndim | data f32

Values are stored as 32-bit reals; loading upcasts to float64. The content
hash is the first 8 bytes of SHA-256 over everything after the header and
doubles as the model identity carried inside bitstream containers.
"""

import hashlib
import struct

import numpy as np

from .errors import ContainerError

MAGIC = b"HSCM"
VERSION = 1
_HEADER = struct.Struct("<4sBBH8s")


def _pack_entries(arrays):
    body = bytearray()
    for name, value in arrays.items():
        raw = name.encode("utf-8")
        value = np.asarray(value, dtype=np.float32)
        body += struct.pack("<H", len(raw))
        body += raw
        body += struct.pack("<B", value.ndim)
        for d in value.shape:
            body += struct.pack("<I", d)
        body += value.astype("<f4").tobytes(order="C")
    return bytes(body)


def content_hash(arrays):
    """8-byte identity of a named-array mapping (order-sensitive)."""
    return hashlib.sha256(_pack_entries(arrays)).digest()[:8]


def dump_arrays(arrays):
    """Serialize a dict of named arrays to bytes."""
    body = _pack_entries(arrays)
    digest = hashlib.sha256(body).digest()[:8]
    return _HEADER.pack(MAGIC, VERSION, 0, len(arrays), digest) + body


def load_arrays(data):
    """Inverse of :func:`dump_arrays`; returns an ordered name->float64 dict."""
    if len(data) < _HEADER.size:
        raise ContainerError("parameter file truncated before header")
    magic, version, _, count, digest = _HEADER.unpack(data[:_HEADER.size])
    if magic != MAGIC:
        raise ContainerError(f"bad parameter-file magic {magic!r}")
    if version != VERSION:
        raise ContainerError(f"unsupported parameter-file version {version}")
    body = data[_HEADER.size:]
    if hashlib.sha256(body).digest()[:8] != digest:
        raise ContainerError("parameter-file content hash mismatch")
    out = {}
    pos = 0
    for _ in range(count):
        if pos + 2 > len(body):
            raise ContainerError("parameter file truncated inside entry")
        (nlen,) = struct.unpack_from("<H", body, pos)
        pos += 2
        name = body[pos:pos + nlen].decode("utf-8")
        pos += nlen
        (ndim,) = struct.unpack_from("<B", body, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", body, pos) if ndim else ()
        pos += 4 * ndim
        n = int(np.prod(shape)) if ndim else 1
        end = pos + 4 * n
        if end > len(body):
            raise ContainerError(f"parameter {name!r} data truncated")
        arr = np.frombuffer(body[pos:end], dtype="<f4").reshape(shape)
        out[name] = arr.astype(np.float64)
        pos = end
    return out


def save_arrays(path, arrays):
    with open(path, "wb") as fh:
        fh.write(dump_arrays(arrays))


def read_arrays(path):
    with open(path, "rb") as fh:
        return load_arrays(fh.read())
