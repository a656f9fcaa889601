"""Binary code for the seed exchange: Reed–Solomon over GF(2^8) (outer, rate
about 2/3) concatenated with 3-fold bit repetition (inner).

Words handed to :func:`decode` may contain ``None`` for erased positions.
Inner decoding takes the majority of the surviving copies of each bit; a tie
or a fully erased triple erases the whole RS symbol. The RS decoder then
handles e symbol errors and f symbol erasures whenever 2e + f <= parity
count. Counting flips with weight 1 and erasures with weight 1/2, a symbol
error costs at least 2 and a symbol erasure at least 3/2, so every pattern of
weighted cost at most the parity count decodes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

from reedsolo import ReedSolomonError, RSCodec

REPEAT = 3
SYMBOL_BITS = 8


@dataclass(frozen=True)
class CodeSpec:
    message_len_bits: int
    rs_data_symbols: int
    rs_parity_symbols: int

    @property
    def rs_length(self) -> int:
        return self.rs_data_symbols + self.rs_parity_symbols

    @property
    def block_len_bits(self) -> int:
        return self.rs_length * SYMBOL_BITS * REPEAT

    @property
    def rate(self) -> float:
        return self.message_len_bits / self.block_len_bits

    @property
    def correctable_weight(self) -> float:
        """Largest weighted corruption (flips + erasures/2) that always decodes."""
        return float(self.rs_parity_symbols)

    @property
    def correctable_fraction(self) -> float:
        return self.correctable_weight / self.block_len_bits

    @property
    def min_distance_bits(self) -> int:
        return REPEAT * (self.rs_parity_symbols + 1)


def make_code_spec(message_len_bits: int) -> CodeSpec:
    if message_len_bits < 1:
        raise ValueError("message length must be positive")
    data = -(-message_len_bits // SYMBOL_BITS)
    parity = max(2, -(-data // 2))
    if data + parity > 255:
        raise ValueError(f"message of {message_len_bits} bits exceeds one RS block")
    return CodeSpec(message_len_bits, data, parity)


@lru_cache(maxsize=None)
def _codec(parity: int) -> RSCodec:
    return RSCodec(parity)


@dataclass(frozen=True)
class DecodeResult:
    message: tuple[int, ...]
    reliable: bool


def _pack(bits: Sequence[int], nsymbols: int) -> bytearray:
    out = bytearray(nsymbols)
    for p, b in enumerate(bits):
        if b:
            out[p // SYMBOL_BITS] |= 1 << (p % SYMBOL_BITS)
    return out


def _unpack(data: bytes, nbits: int) -> tuple[int, ...]:
    return tuple((data[p // SYMBOL_BITS] >> (p % SYMBOL_BITS)) & 1 for p in range(nbits))


def encode(msg: Sequence[int], spec: CodeSpec) -> tuple[int, ...]:
    if len(msg) != spec.message_len_bits:
        raise ValueError(f"message has {len(msg)} bits, expected {spec.message_len_bits}")
    codeword = _codec(spec.rs_parity_symbols).encode(_pack(msg, spec.rs_data_symbols))
    bits = _unpack(codeword, spec.rs_length * SYMBOL_BITS)
    return tuple(b for b in bits for _ in range(REPEAT))


def _weighted_distance(word: Sequence[Optional[int]], codeword: Sequence[int]) -> float:
    cost = 0.0
    for w, c in zip(word, codeword):
        if w is None:
            cost += 0.5
        elif w != c:
            cost += 1.0
    return cost


def decode(word: Sequence[Optional[int]], spec: CodeSpec) -> DecodeResult:
    """Decode a possibly corrupted word; never raises on heavy corruption.

    ``reliable`` is true when the decoded codeword lies within the guaranteed
    decoding radius of the received word; otherwise the message is a
    best-effort guess.
    """
    if len(word) != spec.block_len_bits:
        raise ValueError(f"word has {len(word)} symbols, expected {spec.block_len_bits}")
    nsym_bits = spec.rs_length * SYMBOL_BITS
    bits = []
    erased_symbols = set()
    for p in range(nsym_bits):
        triple = word[REPEAT * p: REPEAT * (p + 1)]
        ones = sum(1 for x in triple if x == 1)
        zeros = sum(1 for x in triple if x == 0)
        if ones == zeros:
            erased_symbols.add(p // SYMBOL_BITS)
            bits.append(0)
        else:
            bits.append(1 if ones > zeros else 0)
    received = _pack(bits, spec.rs_length)
    codec = _codec(spec.rs_parity_symbols)
    try:
        if len(erased_symbols) > spec.rs_parity_symbols:
            raise ReedSolomonError("too many erasures")
        msg_bytes, _, _ = codec.decode(received, erase_pos=sorted(erased_symbols) or None)
    except ReedSolomonError:
        return DecodeResult(_unpack(bytes(received[: spec.rs_data_symbols]), spec.message_len_bits), False)
    message = _unpack(bytes(msg_bytes), spec.message_len_bits)
    # RS works on whole bytes: a nonzero padding bit means this is not a codeword of ours
    padding_ok = all(
        (msg_bytes[p // SYMBOL_BITS] >> (p % SYMBOL_BITS)) & 1 == 0
        for p in range(spec.message_len_bits, spec.rs_data_symbols * SYMBOL_BITS)
    )
    reliable = padding_ok and _weighted_distance(word, encode(message, spec)) <= spec.correctable_weight
    return DecodeResult(message, reliable)
