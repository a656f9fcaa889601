"""Chunk-structured per-link transcripts over the ternary alphabet {0, 1, *}.

Symbols are stored as ints: 0, 1 and ``SILENCE`` (= 2) for ``*``.
"""

from __future__ import annotations

from typing import Iterable, Sequence

SILENCE = 2

Chunk = tuple[int, tuple[int, ...]]

_SYMBOL_TEXT = {0: "0", 1: "1", SILENCE: "*"}
_TEXT_SYMBOL = {"0": 0, "1": 1, "*": SILENCE}


def symbols_from_text(text: str) -> tuple[int, ...]:
    return tuple(_TEXT_SYMBOL[ch] for ch in text)


def symbols_to_text(symbols: Iterable[int]) -> str:
    return "".join(_SYMBOL_TEXT[s] for s in symbols)


def _reverse32(v: int) -> int:
    return int(f"{v:032b}"[::-1], 2)


def chunk_bits(index: int, symbols: Sequence[int]) -> tuple[int, int]:
    """Serialize one chunk; returns ``(value, nbits)`` with string bit p at int bit p.

    Each symbol takes two bits (0 -> 00, 1 -> 01, * -> 10) and the chunk index
    follows as a 32-bit big-endian integer.
    """
    if not 0 <= index < 1 << 32:
        raise ValueError(f"chunk index {index} does not fit in 32 bits")
    value = 0
    for s, sym in enumerate(symbols):
        if sym == 1:
            value |= 1 << (2 * s + 1)
        elif sym == SILENCE:
            value |= 1 << (2 * s)
        elif sym != 0:
            raise ValueError(f"invalid symbol {sym!r}")
    nsym = 2 * len(symbols)
    return value | (_reverse32(index) << nsym), nsym + 32


def int32_bits(v: int) -> tuple[int, int]:
    """A nonnegative integer as a 32-bit big-endian bit string (int form)."""
    if not 0 <= v < 1 << 32:
        raise ValueError(f"{v} does not fit in 32 bits")
    return _reverse32(v), 32


class PrefixInterner:
    """Assigns one id per distinct transcript prefix, shared by every transcript
    of a run, so two transcripts agree on their first ``c`` chunks iff their
    prefix ids at ``c`` are equal."""

    def __init__(self) -> None:
        self._table: dict[tuple[int, int, tuple[int, ...]], int] = {}

    def child(self, parent: int, index: int, symbols: tuple[int, ...]) -> int:
        key = (parent, index, symbols)
        got = self._table.get(key)
        if got is None:
            got = len(self._table) + 1
            self._table[key] = got
        return got

    def __len__(self) -> int:
        return len(self._table)


class PartialTranscript:
    """One endpoint's view T_{u,v} of a link, as a list of ``(index, symbols)`` chunks.

    The transcript only changes by appending one chunk, truncating to a
    meeting point, or rewinding one chunk. Alongside the chunks it keeps the
    hash serialization (as an int), interned prefix ids, the received
    base-protocol symbols used as the party's protocol view, and per-key caches
    that hash evaluators attach to prefixes.
    """

    __slots__ = ("_chunks", "_ids", "_ends", "_value", "_interner", "_view", "_view_ends", "caches")

    def __init__(self, interner: PrefixInterner | None = None):
        self._chunks: list[Chunk] = []
        self._ids = [0]
        self._ends = [0]
        self._value = 0
        self._interner = interner if interner is not None else PrefixInterner()
        self._view: list[int] = []
        self._view_ends = [0]
        self.caches: dict[object, list] = {}

    @classmethod
    def from_chunks(cls, chunks: Iterable[tuple[int, Sequence[int]]], interner: PrefixInterner | None = None) -> "PartialTranscript":
        t = cls(interner)
        for index, symbols in chunks:
            t.append_chunk(index, symbols)
        return t

    def __len__(self) -> int:
        return len(self._chunks)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PartialTranscript):
            return NotImplemented
        return self._chunks == other._chunks

    def __repr__(self) -> str:
        body = ", ".join(f"{i}:{symbols_to_text(s)}" for i, s in self._chunks[:4])
        more = ", ..." if len(self._chunks) > 4 else ""
        return f"PartialTranscript([{body}{more}])"

    @property
    def chunks(self) -> tuple[Chunk, ...]:
        return tuple(self._chunks)

    def chunk(self, c: int) -> Chunk:
        """The ``c``-th chunk, 1-based."""
        return self._chunks[c - 1]

    @property
    def view(self) -> list[int]:
        """Received base-protocol symbols, in schedule order (read-only by convention)."""
        return self._view

    # -- sanctioned moves -----------------------------------------------------

    def append_chunk(self, index: int, symbols: Sequence[int], received: Sequence[int] | None = ()) -> None:
        """Append one chunk. ``received`` holds the base-protocol symbols it
        adds to the view; pass None when they were already added with
        :meth:`extend_view` while the chunk was being simulated."""
        symbols = tuple(symbols)
        value, nbits = chunk_bits(index, symbols)
        self._value |= value << self._ends[-1]
        self._ends.append(self._ends[-1] + nbits)
        self._ids.append(self._interner.child(self._ids[-1], index, symbols))
        self._chunks.append((index, symbols))
        if received is not None:
            self._view.extend(received)
        self._view_ends.append(len(self._view))

    def extend_view(self, symbol: int) -> None:
        """Record a base symbol of the chunk currently being simulated."""
        self._view.append(symbol)

    def discard_pending_view(self) -> None:
        """Drop view symbols recorded for a chunk that was not appended."""
        del self._view[self._view_ends[-1]:]

    def truncate(self, length: int) -> None:
        """Meeting-point truncation: keep the first ``length`` chunks."""
        if not 0 <= length <= len(self._chunks):
            raise ValueError(f"cannot truncate a {len(self._chunks)}-chunk transcript to {length}")
        if length == len(self._chunks):
            return
        del self._chunks[length:]
        del self._ids[length + 1:]
        del self._ends[length + 1:]
        self._value &= (1 << self._ends[-1]) - 1
        del self._view[self._view_ends[length]:]
        del self._view_ends[length + 1:]
        for cache in self.caches.values():
            del cache[length + 1:]

    def rewind_one(self) -> None:
        if not self._chunks:
            raise ValueError("cannot rewind an empty transcript")
        self.truncate(len(self._chunks) - 1)

    # -- derived data ------------------------------------------------------------

    def prefix_id(self, c: int) -> int:
        return self._ids[c]

    def prefix_bits(self, c: int) -> tuple[int, int]:
        """Serialization of the first ``c`` chunks as ``(value, nbits)``."""
        end = self._ends[c]
        if c == len(self._chunks):
            return self._value, end
        return self._value & ((1 << end) - 1), end

    def chunk_span(self, c: int) -> tuple[int, int]:
        """Bit offset and serialized length of the ``c``-th chunk (1-based)."""
        return self._ends[c - 1], self._ends[c] - self._ends[c - 1]

    def serialized_length(self) -> int:
        return self._ends[-1]


def common_prefix_length(a: PartialTranscript, b: PartialTranscript) -> int:
    """Longest common chunk prefix, by binary search over interned prefix ids.

    Both transcripts must share a ``PrefixInterner``.
    """
    lo, hi = 0, min(len(a), len(b))
    if a.prefix_id(hi) == b.prefix_id(hi):
        return hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if a.prefix_id(mid) == b.prefix_id(mid):
            lo = mid
        else:
            hi = mid
    return lo
