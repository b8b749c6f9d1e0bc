"""Lossless coders for everything transmitted outside the symbol stream.

Three streams per transmission: latent coordinates (breadth-first octree
occupancy coding, one byte of child flags per internal node, Morton child
order), the per-coordinate symbol-length list (adaptive arithmetic coding over
the length-list indices), and the three top-k point counts (LEB128 varints).
All three are bijective on their valid domains.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, bits_to_symbols

MAGIC = b"PCSTSI/1"


# ---------------------------------------------------------------- varints

def varint_encode(values) -> bytes:
    """Unsigned LEB128."""
    out = bytearray()
    for v in np.atleast_1d(np.asarray(values, dtype=np.int64)):
        v = int(v)
        if v < 0:
            raise ValueError("varints are unsigned")
        while True:
            byte = v & 0x7F
            v >>= 7
            out.append(byte | (0x80 if v else 0))
            if not v:
                break
    return bytes(out)


def varint_decode(data: bytes, count: int) -> tuple[list[int], int]:
    """Decode `count` varints; returns (values, bytes consumed)."""
    values, pos = [], 0
    for _ in range(count):
        v, shift = 0, 0
        while True:
            if pos >= len(data):
                raise ValueError("truncated varint stream")
            byte = data[pos]
            pos += 1
            v |= (byte & 0x7F) << shift
            if not byte & 0x80:
                break
            shift += 7
        values.append(v)
    return values, pos


# ------------------------------------------------- adaptive arithmetic coder

class _BitWriter:
    def __init__(self):
        self._bytes = bytearray()
        self._acc = 0
        self._n = 0

    def write(self, bit: int):
        self._acc = (self._acc << 1) | bit
        self._n += 1
        if self._n == 8:
            self._bytes.append(self._acc)
            self._acc = 0
            self._n = 0

    def getvalue(self) -> bytes:
        if self._n:
            return bytes(self._bytes) + bytes([self._acc << (8 - self._n)])
        return bytes(self._bytes)


class _BitReader:
    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    def read(self) -> int:
        byte_i, bit_i = divmod(self._pos, 8)
        self._pos += 1
        if byte_i >= len(self._data):
            return 0  # implicit trailing zeros
        return (self._data[byte_i] >> (7 - bit_i)) & 1


_PREC_FULL = (1 << 32) - 1
_HALF = 1 << 31
_QUARTER = 1 << 30
_THREEQ = 3 << 30


class ArithmeticEncoder:
    """32-bit integer arithmetic encoder (carry handling via pending bits)."""

    def __init__(self):
        self._low = 0
        self._high = _PREC_FULL
        self._pending = 0
        self._out = _BitWriter()

    def _emit(self, bit: int):
        self._out.write(bit)
        opposite = 1 - bit
        while self._pending:
            self._out.write(opposite)
            self._pending -= 1

    def encode(self, cum_lo: int, cum_hi: int, total: int):
        span = self._high - self._low + 1
        self._high = self._low + span * cum_hi // total - 1
        self._low = self._low + span * cum_lo // total
        while True:
            if self._high < _HALF:
                self._emit(0)
            elif self._low >= _HALF:
                self._emit(1)
                self._low -= _HALF
                self._high -= _HALF
            elif self._low >= _QUARTER and self._high < _THREEQ:
                self._pending += 1
                self._low -= _QUARTER
                self._high -= _QUARTER
            else:
                break
            self._low <<= 1
            self._high = (self._high << 1) | 1

    def finish(self) -> bytes:
        self._pending += 1
        self._emit(1 if self._low >= _QUARTER else 0)
        return self._out.getvalue()


class ArithmeticDecoder:
    def __init__(self, data: bytes):
        self._in = _BitReader(data)
        self._low = 0
        self._high = _PREC_FULL
        self._value = 0
        for _ in range(32):
            self._value = (self._value << 1) | self._in.read()

    def target(self, total: int) -> int:
        span = self._high - self._low + 1
        return ((self._value - self._low + 1) * total - 1) // span

    def consume(self, cum_lo: int, cum_hi: int, total: int):
        span = self._high - self._low + 1
        self._high = self._low + span * cum_hi // total - 1
        self._low = self._low + span * cum_lo // total
        while True:
            if self._high < _HALF:
                pass
            elif self._low >= _HALF:
                self._low -= _HALF
                self._high -= _HALF
                self._value -= _HALF
            elif self._low >= _QUARTER and self._high < _THREEQ:
                self._pending_shift()
            else:
                break
            self._low <<= 1
            self._high = (self._high << 1) | 1
            self._value = (self._value << 1) | self._in.read()

    def _pending_shift(self):
        self._low -= _QUARTER
        self._high -= _QUARTER
        self._value -= _QUARTER


class _AdaptiveModel:
    """Laplace-smoothed adaptive frequencies, identical on both coder sides."""

    _CAP = 1 << 16

    def __init__(self, alphabet: int):
        self.counts = [1] * alphabet

    def cum(self, symbol: int):
        lo = sum(self.counts[:symbol])
        return lo, lo + self.counts[symbol], sum(self.counts)

    def find(self, target: int) -> int:
        acc = 0
        for s, c in enumerate(self.counts):
            if target < acc + c:
                return s
            acc += c
        raise ValueError("target outside cumulative range")

    def update(self, symbol: int):
        self.counts[symbol] += 1
        if sum(self.counts) > self._CAP:
            self.counts = [(c + 1) // 2 for c in self.counts]


def klen_encode(indices, alphabet: int) -> bytes:
    """Adaptive arithmetic coding of length-list indices in [0, alphabet)."""
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= alphabet):
        raise ValueError(f"index outside [0, {alphabet})")
    if idx.size == 0:
        return b""
    enc = ArithmeticEncoder()
    model = _AdaptiveModel(alphabet)
    for s in idx:
        lo, hi, total = model.cum(int(s))
        enc.encode(lo, hi, total)
        model.update(int(s))
    return enc.finish()


def klen_decode(data: bytes, count: int, alphabet: int) -> np.ndarray:
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    dec = ArithmeticDecoder(data)
    model = _AdaptiveModel(alphabet)
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        total = sum(model.counts)
        symbol = model.find(dec.target(total))
        lo, hi, _ = model.cum(symbol)
        dec.consume(lo, hi, total)
        model.update(symbol)
        out[i] = symbol
    return out


# ----------------------------------------------------------------- octree

def _morton_encode(coords: np.ndarray, depth: int) -> np.ndarray:
    m = np.zeros(len(coords), dtype=np.int64)
    for level in range(depth):
        shift = depth - 1 - level
        bits = ((coords[:, 0] >> shift) & 1) << 2
        bits |= ((coords[:, 1] >> shift) & 1) << 1
        bits |= (coords[:, 2] >> shift) & 1
        m = (m << 3) | bits
    return m


def _morton_decode(m: np.ndarray, depth: int) -> np.ndarray:
    coords = np.zeros((len(m), 3), dtype=np.int64)
    for level in range(depth):
        shift = 3 * (depth - 1 - level)
        octant = (m >> shift) & 7
        coords[:, 0] = (coords[:, 0] << 1) | ((octant >> 2) & 1)
        coords[:, 1] = (coords[:, 1] << 1) | ((octant >> 1) & 1)
        coords[:, 2] = (coords[:, 2] << 1) | (octant & 1)
    return coords


def octree_encode(coords, depth: int) -> bytes:
    """Breadth-first occupancy bytes for unique coords inside [0, 2^depth)^3."""
    coords = np.asarray(coords, dtype=np.int64).reshape(-1, 3)
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if coords.size == 0:
        raise ValueError("cannot octree-encode an empty set")
    if coords.min() < 0 or coords.max() >= (1 << depth):
        raise ValueError(f"coordinate outside [0, 2^{depth})")
    mortons = np.unique(_morton_encode(coords, depth))
    if len(mortons) != len(coords):
        raise ValueError("duplicate coordinates")
    out = bytearray()
    for level in range(depth):
        parents = np.unique(mortons >> (3 * (depth - level)))
        children = np.unique(mortons >> (3 * (depth - level - 1)))
        flags = np.zeros(len(parents), dtype=np.uint8)
        rows = np.searchsorted(parents, children >> 3)
        np.bitwise_or.at(flags, rows, (1 << (children & 7)).astype(np.uint8))
        out.extend(flags.tobytes())
    return bytes(out)


def octree_decode(data: bytes, depth: int) -> np.ndarray:
    """Inverse of octree_encode; coords come back in canonical (lex) order."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    nodes = np.zeros(1, dtype=np.int64)
    pos = 0
    for _ in range(depth):
        if pos + len(nodes) > len(data):
            raise ValueError("truncated octree stream")
        flags = np.frombuffer(data[pos: pos + len(nodes)], dtype=np.uint8)
        pos += len(nodes)
        octants = [np.nonzero(flags & (1 << o))[0] for o in range(8)]
        parts = [
            (nodes[rows] << 3) | o for o, rows in enumerate(octants) if len(rows)
        ]
        if not parts:
            raise ValueError("octree node with no occupied children")
        nodes = np.sort(np.concatenate(parts))
    if pos != len(data):
        raise ValueError(f"{len(data) - pos} trailing bytes after octree stream")
    coords = _morton_decode(nodes, depth)
    order = np.lexsort((coords[:, 2], coords[:, 1], coords[:, 0]))
    return coords[order]


# ----------------------------------------------------------------- payload

@dataclass
class SideInfoPayload:
    """The three lossless streams accompanying one transmission."""

    coord_bits: bytes
    klen_bits: bytes
    count_bits: bytes

    @property
    def coord_bit_count(self) -> int:
        return 8 * len(self.coord_bits)

    @property
    def klen_bit_count(self) -> int:
        return 8 * len(self.klen_bits)

    @property
    def count_bit_count(self) -> int:
        return 8 * len(self.count_bits)

    @property
    def total_bits(self) -> int:
        return self.coord_bit_count + self.klen_bit_count + self.count_bit_count


def build_payload(latent_coords, stride: int, bit_depth: int, k_indices, counts,
                  alphabet: int) -> SideInfoPayload:
    """Assemble the payload for latent coords at `stride` inside a 2^bit_depth grid."""
    coords = np.asarray(latent_coords, dtype=np.int64).reshape(-1, 3)
    if stride < 1 or (stride & (stride - 1)):
        raise ValueError(f"stride must be a power of two, got {stride}")
    depth = bit_depth - int(np.log2(stride))
    if depth < 1:
        raise ValueError(f"stride {stride} too coarse for bit depth {bit_depth}")
    if np.any(coords % stride):
        raise ValueError("latent coordinates not aligned to stride")
    return SideInfoPayload(
        coord_bits=octree_encode(coords // stride, depth),
        klen_bits=klen_encode(k_indices, alphabet),
        count_bits=varint_encode(counts),
    )


def account_side_bits(payload: SideInfoPayload, ch: ChannelRealization,
                      margin_db: float = 2.0) -> int:
    """Complex channel uses the side information costs (enters the CBR numerator)."""
    return bits_to_symbols(payload.total_bits, ch, margin_db)


def pack_container(payload: SideInfoPayload, depth: int) -> bytes:
    """[magic][depth u8][count varints][u32 coord len][coord][u32 klen len][klen]."""
    return b"".join([
        MAGIC,
        struct.pack("<B", depth),
        payload.count_bits,
        struct.pack("<I", len(payload.coord_bits)),
        payload.coord_bits,
        struct.pack("<I", len(payload.klen_bits)),
        payload.klen_bits,
    ])


def unpack_container(data: bytes):
    """Returns (depth, counts, coord_bits, klen_bits)."""
    if not data.startswith(MAGIC):
        raise ValueError("bad side-info magic")
    pos = len(MAGIC)
    depth = data[pos]
    pos += 1
    counts, used = varint_decode(data[pos:], 3)
    pos += used
    (coord_len,) = struct.unpack_from("<I", data, pos)
    pos += 4
    coord_bits = data[pos: pos + coord_len]
    pos += coord_len
    (klen_len,) = struct.unpack_from("<I", data, pos)
    pos += 4
    klen_bits = data[pos: pos + klen_len]
    return depth, counts, coord_bits, klen_bits
