"""Versioned bitstream container.

Layout (little-endian throughout):

    magic b"HSC1" | version u8 | flags u8 | m u8 | t u8 | k u8
    | style_dim u16 | feature C u16 | feature H u16 | feature W u16
    | semantic latent length u16 | model content hash 8 bytes
    = 27 header bytes, then the core-semantics chunk followed by k feature
    chunks, each with a 4-byte little-endian length prefix.

Flags bit 0 marks a semantics-only stream: the k field is ignored and
exactly one chunk (the core-semantics chunk) follows the header.
"""

import struct
from dataclasses import dataclass

from .errors import ContainerError
from .range_coder import read_chunk, write_chunk

MAGIC = b"HSC1"
VERSION = 1
FLAG_SEMANTICS_ONLY = 0x01

_HEADER = struct.Struct("<4sBBBBBHHHHH8s")
HEADER_SIZE = _HEADER.size  # 27


@dataclass(frozen=True)
class HscHeader:
    flags: int
    n_codes: int
    split_t: int
    n_slices: int
    style_dim: int
    feature_channels: int
    feature_h: int
    feature_w: int
    semantic_len: int
    model_hash: bytes

    @property
    def semantics_only(self):
        return bool(self.flags & FLAG_SEMANTICS_ONLY)


def write_container(header, chunks):
    """Serialize a header plus ordered chunks into container bytes."""
    n_chunks = 1 if header.semantics_only else 1 + header.n_slices
    if len(chunks) != n_chunks:
        raise ContainerError(f"expected {n_chunks} chunks, got {len(chunks)}")
    buf = bytearray(_HEADER.pack(
        MAGIC, VERSION, header.flags, header.n_codes, header.split_t,
        header.n_slices, header.style_dim, header.feature_channels,
        header.feature_h, header.feature_w, header.semantic_len,
        header.model_hash))
    for chunk in chunks:
        write_chunk(buf, chunk)
    return bytes(buf)


def read_container(data):
    """Parse container bytes into (header, chunks). Validates framing only.

    Magic/version mismatches and truncation raise ContainerError before any
    arithmetic decoding can happen; the model-hash check against loaded
    parameters is the caller's job.
    """
    if len(data) < HEADER_SIZE:
        raise ContainerError(f"container truncated: {len(data)} bytes "
                             f"< {HEADER_SIZE}-byte header")
    magic, version, flags, m, t, k, ds, cf, fh, fw, slen, mh = \
        _HEADER.unpack(data[:HEADER_SIZE])
    if magic != MAGIC:
        raise ContainerError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version}")
    header = HscHeader(flags, m, t, k, ds, cf, fh, fw, slen, mh)
    n_chunks = 1 if header.semantics_only else 1 + k
    chunks = []
    offset = HEADER_SIZE
    try:
        for _ in range(n_chunks):
            payload, offset = read_chunk(data, offset)
            chunks.append(payload)
    except Exception as e:
        raise ContainerError(f"chunk framing: {e}") from None
    if offset != len(data):
        raise ContainerError(f"{len(data) - offset} trailing bytes after "
                             f"the last chunk")
    return header, chunks
