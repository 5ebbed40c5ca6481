"""Integer range coder over quantized 16-bit CDF tables.

The coder keeps a 64-bit state, renormalizes one byte at a time, and uses
pure Python integer arithmetic only, so identical inputs produce
byte-identical streams on every platform. Tables always total exactly 2^16
with at least one unit of mass per slot; an optional escape slot backed by a
raw 32-bit encoding keeps the coder total over out-of-range symbols.

Coding cost is within fractions of a bit of the quantized-table ideal plus a
single flush byte per chunk.
"""

import numpy as np

from .errors import CoderError

TOTAL_BITS = 16
TOTAL = 1 << TOTAL_BITS
MAX_SYMBOLS = 1 << 15
_MASK64 = (1 << 64) - 1
_TOP = 1 << 56
_RAW_OFFSET = 1 << 31  # raw escape values are signed 32-bit

# default coded symbol range for quantized latents
SYMBOL_LO = -127
SYMBOL_HI = 128


def quantize_pmf(probs, tail_mass=0.0):
    """Quantize pmf rows to integer masses summing to exactly 2^16.

    ``probs`` is (n, S) with positive entries, approximately normalized per
    row; ``tail_mass`` (scalar or (n,)) appends an escape column when any of
    it is positive. Quantization is largest-remainder with two refinements:
    slots whose ideal mass is below one unit are pinned to exactly 1, and
    any resulting surplus is taken back from the heaviest slots.
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    n, s = probs.shape
    tails = np.broadcast_to(np.asarray(tail_mass, dtype=np.float64), (n,))
    has_escape = bool(np.any(tails > 0.0))
    if s + has_escape > MAX_SYMBOLS:
        raise CoderError(f"{s + has_escape} slots exceed the coder maximum "
                         f"of {MAX_SYMBOLS}")
    if np.any(probs <= 0.0) or np.any(tails < 0.0):
        raise CoderError("probabilities must be positive (tail nonnegative)")

    cols = np.concatenate([probs, tails[:, None]], axis=1) if has_escape else probs
    denom = cols.sum(axis=1, keepdims=True)
    scaled = cols / denom * TOTAL
    base = np.floor(scaled)
    pinned = scaled < 1.0
    mass = np.where(pinned, 1.0, base).astype(np.int64)

    units = TOTAL - mass.sum(axis=1)

    give = np.maximum(units, 0)
    if np.any(give > 0):
        remainder = np.where(pinned, -1.0, scaled - base)
        order = np.argsort(-remainder, axis=1, kind="stable")
        ranks = np.empty_like(order)
        rows = np.arange(n)[:, None]
        ranks[rows, order] = np.arange(mass.shape[1])[None, :]
        mass += ranks < give[:, None]

    deficit = np.maximum(-units, 0)
    for i in np.nonzero(deficit > 0)[0]:
        need = int(deficit[i])
        row = mass[i]
        top = int(np.argmax(row))
        if row[top] - need >= 1:
            row[top] -= need
        else:
            for j in np.argsort(-row, kind="stable"):
                take = min(need, int(row[j]) - 1)
                row[j] -= take
                need -= take
                if need == 0:
                    break
            if need:
                raise CoderError("cannot renormalize pmf to 2^16")

    assert mass.min() >= 1 and np.all(mass.sum(axis=1) == TOTAL)
    return mass, has_escape


class CdfTable:
    """Quantized CDF rows over the integer symbol range [lo, hi].

    ``cdfs`` is (n, slots + 1) with row[0] == 0 and row[-1] == 2^16; a table
    with n == 1 is shared by all symbols of a chunk, otherwise row i codes
    symbol i. The escape slot, when present, is the last one.
    """

    __slots__ = ("cdfs", "lo", "hi", "has_escape")

    def __init__(self, cdfs, lo, hi, has_escape):
        self.cdfs = cdfs
        self.lo = lo
        self.hi = hi
        self.has_escape = has_escape

    @property
    def n_rows(self):
        return self.cdfs.shape[0]

    def row(self, i):
        return self.cdfs[0] if self.cdfs.shape[0] == 1 else self.cdfs[i]


def build_cdf(probs, lo=0, tail_mass=0.0):
    """Build a single shared table from a pmf over symbols lo..lo+len-1."""
    probs = np.asarray(probs, dtype=np.float64)
    mass, has_escape = quantize_pmf(probs[None, :], tail_mass)
    cdfs = np.zeros((1, mass.shape[1] + 1), dtype=np.int64)
    cdfs[:, 1:] = np.cumsum(mass, axis=1)
    return CdfTable(cdfs, lo, lo + probs.size - 1, has_escape)


def build_cdf_batch(probs, lo, tail_mass):
    """Per-symbol tables: probs (n, S), one row per symbol to code."""
    mass, has_escape = quantize_pmf(probs, tail_mass)
    cdfs = np.zeros((mass.shape[0], mass.shape[1] + 1), dtype=np.int64)
    cdfs[:, 1:] = np.cumsum(mass, axis=1)
    return CdfTable(cdfs, lo, lo + probs.shape[1] - 1, has_escape)


class RangeEncoder:
    """Carry-propagating byte-wise range encoder (64-bit state)."""

    def __init__(self):
        self._low = 0
        self._range = _MASK64
        self._out = bytearray()

    def _propagate_carry(self):
        i = len(self._out) - 1
        while True:
            if i < 0:
                raise CoderError("carry escaped the emitted prefix")
            if self._out[i] == 0xFF:
                self._out[i] = 0
                i -= 1
            else:
                self._out[i] += 1
                return

    def encode_span(self, cum_lo, cum_hi):
        """Encode one symbol occupying [cum_lo, cum_hi) of the 2^16 total."""
        r = self._range >> TOTAL_BITS
        self._low += r * cum_lo
        if self._low >> 64:
            self._propagate_carry()
            self._low &= _MASK64
        self._range = r * (cum_hi - cum_lo)
        while self._range < _TOP:
            self._out.append((self._low >> 56) & 0xFF)
            self._low = (self._low << 8) & _MASK64
            self._range <<= 8

    def encode_bits(self, value, nbits):
        """Encode ``value`` as a fixed-width integer, nbits <= 16 per call."""
        self.encode_span(value << (TOTAL_BITS - nbits),
                         (value + 1) << (TOTAL_BITS - nbits))

    def finish(self):
        """Flush: pick the value with 56 trailing zero bits inside the range."""
        mask = _TOP - 1
        v = self._low
        if v & mask:
            v = (v | mask) + 1
        if v >> 64:
            self._propagate_carry()
            v &= _MASK64
        self._out.append((v >> 56) & 0xFF)
        return bytes(self._out)


class RangeDecoder:
    """Mirror of :class:`RangeEncoder`; tracks the offset inside the range."""

    _PAD_LIMIT = 8  # a valid stream never reads more than 8 bytes past its end

    def __init__(self, data):
        self._data = data
        self._pos = 0
        self._range = _MASK64
        self._code = 0
        for _ in range(8):
            self._code = (self._code << 8) | self._next_byte()

    def _next_byte(self):
        if self._pos < len(self._data):
            b = self._data[self._pos]
        elif self._pos < len(self._data) + self._PAD_LIMIT:
            b = 0
        else:
            raise CoderError("range decoder source exhausted")
        self._pos += 1
        return b

    def decode_target(self):
        """Cumulative-frequency target of the next symbol, in [0, 2^16)."""
        r = self._range >> TOTAL_BITS
        t = self._code // r
        return t if t < TOTAL else TOTAL - 1

    def consume(self, cum_lo, cum_hi):
        r = self._range >> TOTAL_BITS
        self._code -= r * cum_lo
        self._range = r * (cum_hi - cum_lo)
        while self._range < _TOP:
            self._code = ((self._code << 8) | self._next_byte()) & _MASK64
            self._range <<= 8

    def decode_bits(self, nbits):
        t = self.decode_target() >> (TOTAL_BITS - nbits)
        self.consume(t << (TOTAL_BITS - nbits), (t + 1) << (TOTAL_BITS - nbits))
        return t


def encode_symbols(symbols, table):
    """Range-code integer symbols against a table; returns the chunk payload.

    A symbol outside [table.lo, table.hi] goes through the escape slot and a
    raw 32-bit encoding; without an escape slot this raises CoderError.
    """
    symbols = np.asarray(symbols, dtype=np.int64).ravel()
    if table.n_rows not in (1, symbols.size):
        raise CoderError(f"{table.n_rows} table rows for {symbols.size} symbols")
    enc = RangeEncoder()
    lo, hi = table.lo, table.hi
    n_slots = hi - lo + 1
    for i, sym in enumerate(symbols):
        row = table.row(i)
        if lo <= sym <= hi:
            k = int(sym) - lo
            enc.encode_span(int(row[k]), int(row[k + 1]))
        elif table.has_escape:
            if not (-_RAW_OFFSET <= sym < _RAW_OFFSET):
                raise CoderError(f"symbol {sym} does not fit the raw escape")
            enc.encode_span(int(row[n_slots]), int(row[n_slots + 1]))
            raw = int(sym) + _RAW_OFFSET
            enc.encode_bits(raw >> 16, 16)
            enc.encode_bits(raw & 0xFFFF, 16)
        else:
            raise CoderError(f"symbol {sym} outside [{lo}, {hi}] and no escape slot")
    return enc.finish()


def decode_symbols(data, table, count):
    """Inverse of :func:`encode_symbols`; always returns ``count`` symbols."""
    dec = RangeDecoder(data)
    lo, hi = table.lo, table.hi
    n_slots = hi - lo + 1
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        row = table.row(i)
        t = dec.decode_target()
        k = int(np.searchsorted(row, t, side="right")) - 1
        k = min(max(k, 0), n_slots + table.has_escape - 1)
        dec.consume(int(row[k]), int(row[k + 1]))
        if table.has_escape and k == n_slots:
            raw = dec.decode_bits(16) << 16
            raw |= dec.decode_bits(16)
            out[i] = raw - _RAW_OFFSET
        else:
            out[i] = k + lo
    return out


def write_chunk(buf, payload):
    """Append a 4-byte little-endian length prefix plus the payload."""
    buf += len(payload).to_bytes(4, "little")
    buf += payload


def read_chunk(data, offset):
    """Read one length-prefixed chunk; returns (payload, next_offset)."""
    if offset + 4 > len(data):
        raise CoderError("truncated chunk length prefix")
    n = int.from_bytes(data[offset:offset + 4], "little")
    offset += 4
    if offset + n > len(data):
        raise CoderError(f"chunk payload truncated: need {n} bytes, "
                         f"have {len(data) - offset}")
    return bytes(data[offset:offset + n]), offset + n
