"""Dead-zone quantization, adaptive arithmetic coding and payload bit counts."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, SymbolRangeError
from .transform import CoefClass, Trace

__all__ = [
    "QuantizerSpec",
    "Payload",
    "CodedStream",
    "quantize",
    "dequantize",
    "ac_encode",
    "ac_decode",
    "payload_bits",
    "detail_bits",
    "packet_payloads",
    "HEADER_BITS",
]

HEADER_BITS = 48
_I16 = (-(1 << 15), (1 << 15) - 1)


@dataclass(frozen=True)
class QuantizerSpec:
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise InvalidArgument("quantizer step must be positive")


def quantize(values, step: float) -> np.ndarray:
    """Dead-zone indices ``sign(v) * floor(|v| / step)``."""
    QuantizerSpec(step)
    v = np.asarray(values, dtype=float)
    return (np.sign(v) * np.floor(np.abs(v) / step)).astype(np.int64)


def dequantize(indices, step: float) -> np.ndarray:
    """Bin-midpoint reconstruction; index 0 maps to 0."""
    QuantizerSpec(step)
    q = np.asarray(indices, dtype=np.int64)
    return np.sign(q) * (np.abs(q) + 0.5) * step


@dataclass(frozen=True)
class CodedStream:
    """Coded bits, packed big-endian; ``nbits`` includes the header."""

    data: bytes
    nbits: int


class _Fenwick:
    def __init__(self, size: int):
        self.n = size
        self.tree = [0] * (size + 1)
        for i in range(1, size + 1):
            self.tree[i] += 1
            j = i + (i & -i)
            if j <= size:
                self.tree[j] += self.tree[i]
        self.total = size

    def add(self, i: int):
        self.total += 1
        i += 1
        while i <= self.n:
            self.tree[i] += 1
            i += i & -i

    def prefix(self, i: int) -> int:
        """Sum of counts of symbols ``< i``."""
        s = 0
        while i > 0:
            s += self.tree[i]
            i -= i & -i
        return s

    def find(self, target: int) -> int:
        """Largest symbol ``i`` with ``prefix(i) <= target``."""
        pos, step = 0, 1 << self.n.bit_length()
        while step:
            nxt = pos + step
            if nxt <= self.n and self.tree[nxt] <= target:
                pos = nxt
                target -= self.tree[nxt]
            step >>= 1
        return pos


_PREC = 32
_TOP = (1 << _PREC) - 1
_HALF = 1 << (_PREC - 1)
_Q1 = 1 << (_PREC - 2)
_Q3 = _HALF + _Q1


class _BitWriter:
    def __init__(self):
        self.bits: list[int] = []

    def write(self, value: int, width: int):
        for s in range(width - 1, -1, -1):
            self.bits.append((value >> s) & 1)

    def pack(self) -> CodedStream:
        return CodedStream(np.packbits(np.array(self.bits, dtype=np.uint8)).tobytes(), len(self.bits))


def ac_encode(symbols) -> CodedStream:
    """Adaptive order-0 arithmetic code of an integer sequence.

    The header holds min and max (16-bit two's complement) and the count
    (16-bit); every symbol in ``[min, max]`` starts with count one.
    """
    syms = [int(s) for s in np.asarray(symbols, dtype=np.int64).ravel()]
    if not syms:
        raise InvalidArgument("cannot encode an empty sequence")
    lo, hi = min(syms), max(syms)
    if lo < _I16[0] or hi > _I16[1]:
        raise SymbolRangeError(f"symbols must lie in [{_I16[0]}, {_I16[1]}]")
    if len(syms) >= 1 << 16:
        raise InvalidArgument("at most 65535 symbols per stream")
    out = _BitWriter()
    out.write(lo & 0xFFFF, 16)
    out.write(hi & 0xFFFF, 16)
    out.write(len(syms), 16)
    bits = out.bits
    model = _Fenwick(hi - lo + 1)
    low, high, pending = 0, _TOP, 0
    for s in syms:
        i = s - lo
        c_lo = model.prefix(i)
        c_hi = model.prefix(i + 1)
        span = high - low + 1
        high = low + span * c_hi // model.total - 1
        low = low + span * c_lo // model.total
        while True:
            if high < _HALF:
                bits.append(0)
                bits.extend([1] * pending)
                pending = 0
            elif low >= _HALF:
                bits.append(1)
                bits.extend([0] * pending)
                pending = 0
                low -= _HALF
                high -= _HALF
            elif low >= _Q1 and high < _Q3:
                pending += 1
                low -= _Q1
                high -= _Q1
            else:
                break
            low <<= 1
            high = (high << 1) | 1
        model.add(i)
    pending += 1
    if low < _Q1:
        bits.append(0)
        bits.extend([1] * pending)
    else:
        bits.append(1)
        bits.extend([0] * pending)
    return out.pack()


def _signed16(v: int) -> int:
    return v - (1 << 16) if v & 0x8000 else v


def ac_decode(stream: CodedStream, count: int | None = None) -> list[int]:
    """Inverse of :func:`ac_encode`; ``count`` defaults to the header value."""
    raw = np.unpackbits(np.frombuffer(stream.data, dtype=np.uint8))[: stream.nbits].tolist()
    if len(raw) < HEADER_BITS:
        raise InvalidArgument("stream shorter than its header")

    def field_at(off):
        v = 0
        for b in raw[off:off + 16]:
            v = (v << 1) | b
        return v

    lo, hi, n = _signed16(field_at(0)), _signed16(field_at(16)), field_at(32)
    if count is not None and count != n:
        raise InvalidArgument(f"header says {n} symbols, caller asked for {count}")
    if hi < lo:
        raise InvalidArgument("corrupt header: max below min")
    body = raw[HEADER_BITS:]
    pos = 0

    def next_bit():
        nonlocal pos
        b = body[pos] if pos < len(body) else 0
        pos += 1
        return b

    model = _Fenwick(hi - lo + 1)
    low, high, value = 0, _TOP, 0
    for _ in range(_PREC):
        value = (value << 1) | next_bit()
    out = []
    for _ in range(n):
        span = high - low + 1
        target = ((value - low + 1) * model.total - 1) // span
        i = model.find(target)
        c_lo = model.prefix(i)
        c_hi = model.prefix(i + 1)
        high = low + span * c_hi // model.total - 1
        low = low + span * c_lo // model.total
        while True:
            if high < _HALF:
                pass
            elif low >= _HALF:
                low -= _HALF
                high -= _HALF
                value -= _HALF
            elif low >= _Q1 and high < _Q3:
                low -= _Q1
                high -= _Q1
                value -= _Q1
            else:
                break
            low <<= 1
            high = (high << 1) | 1
            value = (value << 1) | next_bit()
        model.add(i)
        out.append(i + lo)
    return out


@dataclass(frozen=True)
class Payload:
    node: int
    bits: int
    kind: str  # "RawBits", "SmoothBits" or "DetailCoded"


def payload_bits(node: int, cls: CoefClass, coded: CodedStream | None = None, epochs: int = 50, raw_bits: int = 12) -> Payload:
    """Bits one coefficient stream occupies in a packet."""
    if cls.kind == "raw":
        return Payload(node, epochs * raw_bits, "RawBits")
    if cls.kind == "smooth":
        return Payload(node, epochs * raw_bits, "SmoothBits")
    if coded is None:
        raise InvalidArgument("detail payloads need their coded stream")
    return Payload(node, coded.nbits, "DetailCoded")


def detail_bits(values, step: float, cache: dict | None = None) -> int:
    """Coded length (header included) of the quantized detail stream."""
    q = quantize(values, step)
    key = q.tobytes()
    if cache is not None and key in cache:
        return cache[key]
    nbits = ac_encode(q).nbits
    if cache is not None:
        cache[key] = nbits
    return nbits


def packet_payloads(
    trace: Trace,
    step: float,
    epochs: int = 50,
    raw_bits: int = 12,
    cache: dict | None = None,
) -> dict[int, list[Payload]]:
    """Per-entry payloads of every transmitted packet of an encoding trace.

    Entries still raw or smooth cost ``epochs * raw_bits``; detail entries
    cost their coded length for the values carried in that packet.
    """
    out = {}
    for (node, values), classes in zip(trace.packets, trace.classes):
        start = node
        row = []
        for j, cls in enumerate(classes):
            k = start + j
            if cls.is_detail:
                row.append(Payload(k, detail_bits(values[j], step, cache), "DetailCoded"))
            else:
                row.append(payload_bits(k, cls, epochs=epochs, raw_bits=raw_bits))
        out[node] = row
    return out
