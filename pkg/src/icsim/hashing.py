"""Inner-product hashing, the powering small-bias generator and the composed
(double) hash.

Bit strings cross the public API as sequences of 0/1 ints. Internally a bit
string ``b_0 b_1 ... b_{n-1}`` is packed into the int ``sum(b_p << p)``; the
``*_int`` functions work on that form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from .gf2 import GF2k
from .transcript import PartialTranscript, chunk_bits

Bits = tuple[int, ...]


def bits_to_int(bits: Iterable[int]) -> int:
    v = 0
    for p, b in enumerate(bits):
        if b not in (0, 1):
            raise ValueError(f"bit strings hold 0/1 only, got {b!r}")
        if b:
            v |= 1 << p
    return v


def int_to_bits(v: int, n: int) -> Bits:
    return tuple((v >> p) & 1 for p in range(n))


def _as_bits(x: Sequence[int] | str) -> Bits:
    if isinstance(x, str):
        return tuple(int(ch) for ch in x)
    return tuple(int(b) for b in x)


@dataclass(frozen=True)
class HashParams:
    input_len_bits: int
    output_len_bits: int

    def __post_init__(self) -> None:
        if self.input_len_bits < 1 or self.output_len_bits < 1:
            raise ValueError("hash lengths must be positive")

    @property
    def seed_len_bits(self) -> int:
        return self.input_len_bits * self.output_len_bits


def ip_hash_int(x: int, seed: int, params: HashParams) -> int:
    """Inner-product hash on packed ints; output bit j is parity(x & seed segment j)."""
    L = params.input_len_bits
    mask = (1 << L) - 1
    out = 0
    for j in range(params.output_len_bits):
        out |= ((x & (seed >> (j * L)) & mask).bit_count() & 1) << j
    return out


def ip_hash(x: Sequence[int] | str, seed: Sequence[int] | str, params: HashParams) -> Bits:
    """tau inner products of the zero-padded input with consecutive L-bit seed segments."""
    xb, sb = _as_bits(x), _as_bits(seed)
    if len(xb) > params.input_len_bits:
        raise ValueError(f"input has {len(xb)} bits, exceeds L={params.input_len_bits}")
    if len(sb) != params.seed_len_bits:
        raise ValueError(f"seed has {len(sb)} bits, expected tau*L={params.seed_len_bits}")
    return int_to_bits(ip_hash_int(bits_to_int(xb), bits_to_int(sb), params), params.output_len_bits)


def composed_hash(
    x: Sequence[int] | str,
    outer_seed: Sequence[int] | str,
    inner_seed: Sequence[int] | str,
    p1: HashParams,
    p2: HashParams,
) -> Bits:
    """Hash with the outer family, then rehash the result with the inner family."""
    if p2.input_len_bits < p1.output_len_bits:
        raise ValueError("inner hash input length must cover the outer hash output")
    return ip_hash(ip_hash(x, outer_seed, p1), inner_seed, p2)


def serialize_for_hash(t: PartialTranscript) -> Bits:
    value, nbits = t.prefix_bits(len(t))
    return int_to_bits(value, nbits)


# --- small-bias strings -------------------------------------------------------


@dataclass(frozen=True)
class DeltaBiasedSpec:
    """Powering construction over GF(2^k): seed (a, y), output bit i = <a^(i+1), y>.

    The bias is stored as its base-2 exponent (bias = 2^-log2_inv_bias) so
    that biases far below float range stay representable.
    """

    output_len: int
    log2_inv_bias: int

    def __post_init__(self) -> None:
        if self.output_len < 1:
            raise ValueError("output length must be positive")
        if self.log2_inv_bias < 1:
            raise ValueError("bias must lie in (0, 1/2]")

    @classmethod
    def from_bias(cls, output_len: int, bias: float) -> "DeltaBiasedSpec":
        if not 0 < bias < 1:
            raise ValueError("bias must lie in (0, 1)")
        return cls(output_len, max(1, math.ceil(-math.log2(bias) - 1e-12)))

    @property
    def bias(self) -> float:
        return 2.0 ** -self.log2_inv_bias

    @property
    def field_degree(self) -> int:
        return self.log2_inv_bias + math.ceil(math.log2(self.output_len))

    @property
    def seed_len(self) -> int:
        return 2 * self.field_degree


@lru_cache(maxsize=None)
def _field(k: int) -> GF2k:
    return GF2k(k)


def expand_delta_biased(seed: Sequence[int] | str, spec: DeltaBiasedSpec) -> Bits:
    sb = _as_bits(seed)
    if len(sb) != spec.seed_len:
        raise ValueError(f"seed has {len(sb)} bits, expected {spec.seed_len}")
    k = spec.field_degree
    src = DeltaBiasedString(spec, bits_to_int(sb[:k]), bits_to_int(sb[k:]))
    return int_to_bits(src.expand_int(), spec.output_len)


class DeltaBiasedString:
    """A lazily evaluated small-bias string with fast windowed inner products.

    Uses <x, S[off : off+|x|]> = <a^(off+1) * X(a), y> where X(a) = sum x_p a^p,
    so a hash never materializes the (possibly huge) string itself.
    """

    def __init__(self, spec: DeltaBiasedSpec, a: int, y: int):
        self.spec = spec
        self.field = _field(spec.field_degree)
        self.a = a & self.field.mask
        self.y = y & self.field.mask
        self._pow_cache: dict[int, int] = {}
        self._apow: list[int] = [1]

    @classmethod
    def from_seed_int(cls, spec: DeltaBiasedSpec, seed: int) -> "DeltaBiasedString":
        k = spec.field_degree
        return cls(spec, seed & ((1 << k) - 1), seed >> k)

    def expand_int(self) -> int:
        out, z, f = 0, self.a, self.field
        for i in range(self.spec.output_len):
            out |= ((z & self.y).bit_count() & 1) << i
            z = f.mul(z, self.a)
        return out

    def bit(self, i: int) -> int:
        return (self.field.pow(self.a, i + 1) & self.y).bit_count() & 1

    def power(self, e: int) -> int:
        got = self._pow_cache.get(e)
        if got is None:
            if len(self._pow_cache) > 64:
                self._pow_cache.clear()
            got = self._pow_cache[e] = self.field.pow(self.a, e)
        return got

    def _small_powers(self, n: int) -> list[int]:
        ap = self._apow
        while len(ap) < n:
            ap.append(self.field.mul(ap[-1], self.a))
        return ap

    def evaluate(self, x: int, nbits: int) -> int:
        """X(a) for a packed bit string x of length nbits."""
        ap = self._small_powers(nbits)
        r = 0
        while x:
            low = x & -x
            r ^= ap[low.bit_length() - 1]
            x ^= low
        return r

    def evaluate_prefix(self, t: PartialTranscript, c: int) -> int:
        """X(a) of the serialization of the first ``c`` chunks, cached on ``t``."""
        cache = t.caches.get(self)
        if cache is None:
            cache = t.caches[self] = [(0, 1)]  # (X_c(a), a^{bits in prefix c})
        f = self.field
        while len(cache) <= c:
            j = len(cache)
            chunk_val, nbits = chunk_bits(*t.chunk(j))
            acc, shift = cache[-1]
            poly = self.evaluate(chunk_val, nbits)
            cache.append((acc ^ f.mul(shift, poly), f.mul(shift, self._small_powers(nbits + 1)[nbits])))
        return cache[c][0]

    def window_parity(self, x_eval: int, offset: int) -> int:
        """<x, S[offset : offset + |x|]> given X(a) = x_eval."""
        return (self.field.mul(self.power(offset + 1), x_eval) & self.y).bit_count() & 1
