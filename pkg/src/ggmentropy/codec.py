"""Lossless range coding of integer symbols under model-derived tables.

The coder keeps a 32-bit ``range`` and a 33-bit ``low`` with a one-byte
carry cache, renormalizing a byte at a time whenever ``range`` drops below
2**24.  Interval splits are ``(range * cum) >> 16``, so the only precision
lost per symbol is one unit of ``range`` rather than ``range mod 2**16``.

Each table covers ``[s_min, s_max]`` plus two escape buckets.  A symbol
outside the range codes its escape bucket followed by the raw 32-bit
two's-complement value as two uniform 16-bit halves.

Bitstream layout (little-endian)::

    b"GGMC" | u8 version=1 | u8 family tag | u32 count | i32 s_min | i32 s_max
    | u32 param length | param JSON | u32 payload length | payload | u32 CRC32

The CRC covers everything before it.
"""

import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptStreamError, DomainError, InputFormatError
from .models import FAMILY_TAGS, model_center, model_scale

PRECISION_BITS = 16
TOTAL = 1 << PRECISION_BITS
MAGIC = b"GGMC"
VERSION = 1
DEFAULT_S_MIN = -255
DEFAULT_S_MAX = 255
ESCAPE_MIN = -(1 << 31)
ESCAPE_MAX = (1 << 31) - 1

_TOP = 1 << 24
_MASK32 = 0xFFFFFFFF
_HEAD = struct.Struct("<4sBBIiiI")


@dataclass(frozen=True, eq=False)
class FrequencyTable:
    """Cumulative frequencies: ``cum[i]`` is the running total through
    bucket ``i``.  Bucket 0 is the low escape, bucket ``K + 1`` the high
    escape, bucket ``k - s_min + 1`` holds symbol ``k``."""

    s_min: int
    s_max: int
    cum: np.ndarray
    precision_bits: int = PRECISION_BITS

    def __post_init__(self):
        cum = np.asarray(self.cum, dtype=np.int64)
        if cum.shape != (self.s_max - self.s_min + 3,):
            raise ValueError("cum length must be s_max - s_min + 3")
        if cum[-1] != (1 << self.precision_bits):
            raise ValueError("cum must end at 2**precision_bits")
        if cum[0] < 1 or np.any(np.diff(cum) < 1):
            raise ValueError("every bucket needs frequency >= 1")
        object.__setattr__(self, "cum", cum)
        object.__setattr__(self, "_starts", np.concatenate(([0], cum[:-1])))

    @property
    def freqs(self):
        return np.diff(np.concatenate(([0], self.cum)))

    def bucket(self, symbol):
        if symbol < self.s_min:
            return 0
        if symbol > self.s_max:
            return self.s_max - self.s_min + 2
        return symbol - self.s_min + 1

    def interval(self, bucket):
        return int(self._starts[bucket]), int(self.cum[bucket])

    def freq(self, symbol):
        lo, hi = self.interval(self.bucket(symbol))
        return hi - lo

    def ideal_bits(self, symbols):
        """Code length the table assigns to ``symbols``, escapes included."""
        bits = 0.0
        for s in np.asarray(symbols, dtype=np.int64).ravel():
            s = int(s)
            bits += PRECISION_BITS - np.log2(self.freq(s))
            if s < self.s_min or s > self.s_max:
                bits += 32
        return bits


def quantize_masses(masses, total=TOTAL):
    """Integer frequencies proportional to ``masses``, each >= 1, summing to
    ``total``: floor, lift zeros to 1, then settle the difference by largest
    remainder."""
    m = np.asarray(masses, dtype=float)
    m = np.maximum(m, 0.0)
    s = m.sum()
    if not s > 0:
        m = np.ones_like(m)
        s = m.size
    raw = m / s * total
    f = np.maximum(np.floor(raw).astype(np.int64), 1)
    diff = total - int(f.sum())
    if diff > 0:
        order = np.argsort(-(raw - np.floor(raw)), kind="stable")
        f[order[:diff]] += 1
    while diff < 0:
        # take back from buckets that were rounded up the most
        cand = np.nonzero(f > 1)[0]
        order = cand[np.argsort(raw[cand] - f[cand], kind="stable")]
        take = order[: -diff]
        f[take] -= 1
        diff += take.size
    return f


def build_table(m, s_min=DEFAULT_S_MIN, s_max=DEFAULT_S_MAX, center=None):
    """Frequency table for zero-center symbols of model ``m``.

    Symbol ``k`` covers the unit bin around ``center + k`` (``center``
    defaults to the model's quantization center).  The escape buckets take
    the mass below ``s_min - 1/2`` and above ``s_max + 1/2``.
    """
    s_min, s_max = int(s_min), int(s_max)
    if not s_min <= 0 <= s_max:
        raise ValueError("need s_min <= 0 <= s_max")
    if center is None:
        center = model_center(m)
    ks = np.arange(s_min, s_max + 1, dtype=float) + center
    masses = np.empty(s_max - s_min + 3)
    masses[1:-1] = m.bin_mass(ks)
    masses[0] = float(m.cdf(center + s_min - 0.5))
    masses[-1] = float(m.sf(center + s_max + 0.5))
    return FrequencyTable(s_min, s_max, np.cumsum(quantize_masses(masses)))


def support_for(m, tail=1e-9, limit=DEFAULT_S_MAX):
    """Symmetric alphabet wide enough that each escape carries at most ``tail``."""
    center = model_center(m)
    scale = max(model_scale(m), 1e-3)
    # heavy-tailed shapes have enormous variances; never start past the limit
    half = int(min(limit, max(1.0, np.ceil(2.0 * scale))))
    while half < limit:
        lo = float(m.cdf(center - half - 0.5))
        hi = float(m.sf(center + half + 0.5))
        if lo <= tail and hi <= tail:
            break
        half = min(limit, half * 2)
    return -half, half


class RangeEncoder:
    def __init__(self):
        self.low = 0
        self.range = _MASK32
        self.cache = 0
        self.cache_size = 1
        self.out = bytearray()

    def _shift_low(self):
        if self.low < 0xFF000000 or self.low > _MASK32:
            carry = self.low >> 32
            temp = self.cache
            while True:
                self.out.append((temp + carry) & 0xFF)
                temp = 0xFF
                self.cache_size -= 1
                if self.cache_size == 0:
                    break
            self.cache = (self.low >> 24) & 0xFF
        self.cache_size += 1
        self.low = (self.low & 0x00FFFFFF) << 8

    def encode(self, start, stop):
        r = self.range
        lo = (r * start) >> PRECISION_BITS
        hi = (r * stop) >> PRECISION_BITS
        self.low += lo
        self.range = hi - lo
        while self.range < _TOP:
            self.range <<= 8
            self._shift_low()

    def finish(self):
        for _ in range(5):
            self._shift_low()
        return bytes(self.out)


class RangeDecoder:
    def __init__(self, data):
        self.data = data
        self.pos = 0
        self.range = _MASK32
        self.code = 0
        for _ in range(5):
            self.code = (self.code << 8) | self._byte()

    def _byte(self):
        if self.pos < len(self.data):
            b = self.data[self.pos]
            self.pos += 1
            return b
        self.pos += 1
        return 0

    def target(self):
        # largest c with (range * c) >> 16 <= code
        return (((self.code + 1) << PRECISION_BITS) - 1) // self.range

    def consume(self, start, stop):
        r = self.range
        lo = (r * start) >> PRECISION_BITS
        hi = (r * stop) >> PRECISION_BITS
        self.code -= lo
        self.range = hi - lo
        if self.code < 0 or self.code >= self.range:
            raise CorruptStreamError("range decoder left its interval")
        while self.range < _TOP:
            self.range <<= 8
            self.code = ((self.code << 8) | self._byte()) & 0xFFFFFFFFFF


def _encode_raw32(enc, value):
    v = int(value) & _MASK32
    for part in (v >> 16, v & 0xFFFF):
        enc.encode(part, part + 1)


def _decode_raw32(dec):
    v = 0
    for _ in range(2):
        part = dec.target()
        dec.consume(part, part + 1)
        v = (v << 16) | part
    return v - (1 << 32) if v >= 1 << 31 else v


@dataclass(eq=False)
class Bitstream:
    count: int
    s_min: int
    s_max: int
    payload: bytes
    family_tag: int = 0
    params: dict = field(default_factory=dict)

    @property
    def payload_bits(self):
        return 8 * len(self.payload)

    def to_bytes(self):
        pjson = json.dumps(self.params, sort_keys=True).encode()
        head = _HEAD.pack(MAGIC, VERSION, self.family_tag, self.count, self.s_min, self.s_max,
                          len(pjson))
        body = head + pjson + struct.pack("<I", len(self.payload)) + self.payload
        return body + struct.pack("<I", zlib.crc32(body) & _MASK32)

    @classmethod
    def from_bytes(cls, data):
        data = bytes(data)
        if data[:4] != MAGIC:
            raise InputFormatError("not a GGMC bitstream")
        if len(data) < _HEAD.size + 8:
            raise CorruptStreamError("bitstream truncated")
        body, crc = data[:-4], struct.unpack("<I", data[-4:])[0]
        if zlib.crc32(body) & _MASK32 != crc:
            raise CorruptStreamError("CRC32 mismatch")
        magic, version, tag, count, s_min, s_max, plen = _HEAD.unpack_from(body)
        if version != VERSION:
            raise InputFormatError(f"unsupported bitstream version {version}")
        off = _HEAD.size
        try:
            params = json.loads(body[off:off + plen].decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CorruptStreamError(f"bad parameter block: {exc}") from None
        off += plen
        (n_pay,) = struct.unpack_from("<I", body, off)
        off += 4
        payload = body[off:off + n_pay]
        if len(payload) != n_pay or off + n_pay != len(body):
            raise CorruptStreamError("payload length mismatch")
        return cls(count, s_min, s_max, payload, tag, params)


def _per_symbol(tables, n):
    if isinstance(tables, FrequencyTable):
        return lambda i: tables
    tables = list(tables)
    if len(tables) != n:
        raise ValueError(f"{len(tables)} tables for {n} symbols")
    return tables.__getitem__


def encode(symbols, tables, family="ggm", params=None):
    """Range-code ``symbols``; ``tables`` is one shared FrequencyTable or one
    per symbol."""
    syms = np.asarray(symbols, dtype=np.int64).ravel()
    if syms.size and (syms.min() < ESCAPE_MIN or syms.max() > ESCAPE_MAX):
        raise DomainError(f"symbols must lie in [{ESCAPE_MIN}, {ESCAPE_MAX}] (32-bit escapes)")
    table_at = _per_symbol(tables, syms.size)
    enc = RangeEncoder()
    for i, s in enumerate(syms.tolist()):
        t = table_at(i)
        b = t.bucket(s)
        start, stop = t.interval(b)
        enc.encode(start, stop)
        if b == 0 or b == t.s_max - t.s_min + 2:
            _encode_raw32(enc, s)
    payload = enc.finish() if syms.size else b""
    first = table_at(0) if syms.size else (tables if isinstance(tables, FrequencyTable) else None)
    s_min = first.s_min if first is not None else DEFAULT_S_MIN
    s_max = first.s_max if first is not None else DEFAULT_S_MAX
    tag = FAMILY_TAGS.get(family, 0) if isinstance(family, str) else int(family)
    return Bitstream(int(syms.size), s_min, s_max, payload, tag, params or {})


def decode(bs, tables):
    """Inverse of :func:`encode`; returns an int64 array of ``bs.count`` symbols."""
    if isinstance(bs, (bytes, bytearray)):
        bs = Bitstream.from_bytes(bs)
    n = bs.count
    out = np.empty(n, dtype=np.int64)
    if n == 0:
        return out
    if not isinstance(tables, FrequencyTable) and len(tables) != n:
        raise CorruptStreamError(f"stream holds {n} symbols but {len(tables)} tables were given")
    table_at = _per_symbol(tables, n)
    dec = RangeDecoder(bs.payload)
    for i in range(n):
        t = table_at(i)
        c = dec.target()
        b = int(np.searchsorted(t.cum, c, side="right"))
        if b >= t.cum.size:
            raise CorruptStreamError("decoded value outside the table")
        start, stop = t.interval(b)
        dec.consume(start, stop)
        if b == 0 or b == t.s_max - t.s_min + 2:
            s = _decode_raw32(dec)
            if t.s_min <= s <= t.s_max:
                raise CorruptStreamError("escape carried an in-range symbol")
        else:
            s = t.s_min + b - 1
        out[i] = s
    if dec.pos > len(bs.payload) + 5:
        raise CorruptStreamError("payload exhausted before the last symbol")
    return out
