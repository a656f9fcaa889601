"""Binary-field arithmetic: GF(2)[x] polynomials packed into Python ints
(bit i = coefficient of x^i) and GF(2^k) built on a sparse irreducible modulus."""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations


def clmul(a: int, b: int) -> int:
    """Carry-less product of two GF(2)[x] polynomials."""
    if a.bit_length() < b.bit_length():
        a, b = b, a
    # 4-bit windows over the shorter operand
    table = [0] * 16
    for w in range(1, 16):
        table[w] = (table[w >> 1] << 1) ^ (a if w & 1 else 0)
    r = 0
    shift = (b.bit_length() + 3) & ~3
    while shift > 0:
        shift -= 4
        r = (r << 4) ^ table[(b >> shift) & 15]
    return r


def poly_mod(a: int, f: int) -> int:
    df = f.bit_length() - 1
    while a.bit_length() - 1 >= df:
        a ^= f << (a.bit_length() - 1 - df)
    return a


def poly_gcd(a: int, b: int) -> int:
    while b:
        a, b = b, poly_mod(a, b)
    return a


def _prime_factors(k: int) -> list[int]:
    out, p = [], 2
    while p * p <= k:
        if k % p == 0:
            out.append(p)
            while k % p == 0:
                k //= p
        p += 1
    if k > 1:
        out.append(k)
    return out


def _reduce_sparse(v: int, k: int, low: tuple[int, ...], mask: int) -> int:
    while v >> k:
        hi = v >> k
        v &= mask
        for e in low:
            v ^= hi << e
    return v


def is_irreducible(f: int) -> bool:
    """Rabin's test for a GF(2)[x] polynomial of degree >= 1."""
    k = f.bit_length() - 1
    if k < 1:
        return False
    if k == 1:
        return True
    low = tuple(e for e in range(k) if (f >> e) & 1)
    if 0 not in low:
        return False
    mask = (1 << k) - 1

    def frob(times: int) -> int:
        r = 2  # the polynomial x
        for _ in range(times):
            r = _reduce_sparse(clmul(r, r), k, low, mask)
        return r

    if frob(k) != 2:
        return False
    for q in _prime_factors(k):
        h = frob(k // q) ^ 2
        if poly_gcd(f, h) != 1:
            return False
    return True


@lru_cache(maxsize=None)
def irreducible_poly(k: int) -> int:
    """Deterministic sparse irreducible polynomial of degree ``k``.

    Searches trinomials x^k + x^a + 1 by ascending ``a``, then pentanomials,
    and returns the first irreducible one.
    """
    if k < 1:
        raise ValueError("field degree must be positive")
    if k == 1:
        return 0b11
    top = 1 << k
    for a in range(1, k):
        f = top | (1 << a) | 1
        if is_irreducible(f):
            return f
    for a, b, c in combinations(range(1, k), 3):
        f = top | (1 << c) | (1 << b) | (1 << a) | 1
        if is_irreducible(f):
            return f
    raise ValueError(f"no sparse irreducible polynomial of degree {k}")  # pragma: no cover


class GF2k:
    """GF(2^k) with elements as ints below 2^k (polynomial basis)."""

    def __init__(self, k: int):
        self.k = k
        self.modulus = irreducible_poly(k)
        self.mask = (1 << k) - 1
        self._low = tuple(e for e in range(k) if (self.modulus >> e) & 1)

    def __repr__(self) -> str:
        return f"GF2k(k={self.k}, modulus={self.modulus:#x})"

    def reduce(self, v: int) -> int:
        return _reduce_sparse(v, self.k, self._low, self.mask)

    def mul(self, a: int, b: int) -> int:
        return _reduce_sparse(clmul(a, b), self.k, self._low, self.mask)

    def pow(self, a: int, e: int) -> int:
        result = 1
        base = a
        while e:
            if e & 1:
                result = self.mul(result, base)
            e >>= 1
            if e:
                base = self.mul(base, base)
        return result

    def fixed_multiplier(self, g: int) -> "FixedMultiplier":
        return FixedMultiplier(self, g)


class FixedMultiplier:
    """Multiplication by a fixed element via per-byte lookup tables."""

    def __init__(self, field: GF2k, g: int):
        self.field = field
        self.g = g
        nbytes = (field.k + 7) // 8
        tables = []
        base = g
        for _ in range(nbytes):
            row = [0] * 256
            for bit in range(8):
                step = field.mul(base, 1 << bit)
                span = 1 << bit
                for w in range(span):
                    row[span + w] = row[w] ^ step
            tables.append(row)
            base = field.mul(base, 1 << 8)
        self._tables = tables

    def __call__(self, a: int) -> int:
        r = 0
        for row, byte in zip(self._tables, a.to_bytes(len(self._tables), "little")):
            r ^= row[byte]
        return r
