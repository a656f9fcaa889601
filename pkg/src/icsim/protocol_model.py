"""Noiseless protocols with a fixed speaking order, their canonical chunked
form, and the noiseless reference executor."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional, Sequence

from .topology import Graph
from .transcript import SILENCE, PartialTranscript

DirectedLink = tuple[int, int]
View = Mapping[int, Sequence[int]]
NextBit = Callable[[int, Sequence[int], View, int], int]
Output = Callable[[int, Sequence[int], View], Any]


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class NoiselessProtocol:
    """A multiparty protocol whose speaking order is fixed in advance.

    ``schedule[r]`` lists the directed links ``(sender, receiver)`` that carry
    one bit in base round ``r``. ``next_bit(party, input, view, r)`` returns the
    bit ``party`` sends in round ``r``; ``view`` maps every neighbor to the
    symbols received from it so far (0, 1 or 2 for silence), in schedule order.
    During noisy simulation views may hold arbitrary symbols, so ``next_bit``
    must be total.
    """

    graph: Graph
    schedule: tuple[tuple[DirectedLink, ...], ...]
    next_bit: NextBit
    inputs: tuple[tuple[int, ...], ...]
    name: str = "custom"
    output: Optional[Output] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if len(self.inputs) != self.graph.n:
            raise ProtocolError(f"need {self.graph.n} inputs, got {len(self.inputs)}")
        edges = set(self.graph.edges)
        for r, links in enumerate(self.schedule):
            if len(set(links)) != len(links):
                raise ProtocolError(f"round {r}: duplicate transmission on a link")
            for s, t in links:
                if (min(s, t), max(s, t)) not in edges:
                    raise ProtocolError(f"round {r}: ({s}, {t}) is not a link of the graph")

    @property
    def communication_complexity(self) -> int:
        return sum(len(links) for links in self.schedule)


@dataclass(frozen=True)
class ChunkLayout:
    """Round structure of one chunk.

    ``rounds[r]`` holds the slots ``(sender, receiver, base_round)`` sent in
    the chunk's ``r``-th round; ``base_round`` is None for padding slots that
    always carry 0. ``link_slots[(a, b)]`` (a < b) orders the link's slots by
    (round, sender): this is the symbol order of the chunk inside T_{a,b} and
    T_{b,a}.
    """

    rounds: tuple[tuple[tuple[int, int, Optional[int]], ...], ...]
    link_slots: Mapping[tuple[int, int], tuple[tuple[int, int, Optional[int]], ...]]
    # engine helpers, per party per round:
    # sends[u][r] = ((receiver, base_round, position), ...)
    # recvs[u][r] = ((sender, position, is_base), ...)
    sends: tuple[tuple[tuple[tuple[int, Optional[int], int], ...], ...], ...] = field(repr=False)
    recvs: tuple[tuple[tuple[tuple[int, int, bool], ...], ...], ...] = field(repr=False)

    @property
    def num_rounds(self) -> int:
        return len(self.rounds)

    @property
    def bits(self) -> int:
        return sum(len(r) for r in self.rounds)

    def link_size(self, u: int, v: int) -> int:
        return len(self.link_slots[(min(u, v), max(u, v))])


def _layout(g: Graph, rounds: list[list[tuple[int, int, Optional[int]]]]) -> ChunkLayout:
    link_slots: dict[tuple[int, int], list[tuple[int, int, Optional[int]]]] = {e: [] for e in g.edges}
    for r, slots in enumerate(rounds):
        for s, t, base in slots:
            link_slots[(min(s, t), max(s, t))].append((r, s, base))
    frozen_links = {e: tuple(sorted(v, key=lambda x: (x[0], x[1]))) for e, v in link_slots.items()}
    position = {}
    for e, slots in frozen_links.items():
        for pos, (r, s, _) in enumerate(slots):
            position[(r, s, e)] = pos
    sends = [[[] for _ in rounds] for _ in range(g.n)]
    recvs = [[[] for _ in rounds] for _ in range(g.n)]
    for r, slots in enumerate(rounds):
        for s, t, base in slots:
            pos = position[(r, s, (min(s, t), max(s, t)))]
            sends[s][r].append((t, base, pos))
            recvs[t][r].append((s, pos, base is not None))
    return ChunkLayout(
        rounds=tuple(tuple(slots) for slots in rounds),
        link_slots=frozen_links,
        sends=tuple(tuple(tuple(x) for x in per) for per in sends),
        recvs=tuple(tuple(tuple(x) for x in per) for per in recvs),
    )


def _padding_rounds(g: Graph, count: int, covered: set[DirectedLink]) -> list[list[tuple[int, int, Optional[int]]]]:
    """Coverage round for uncovered directed links, then round-robin zeros up to ``count`` bits."""
    out = []
    dlinks = g.directed_links()
    missing = [d for d in dlinks if d not in covered]
    if missing:
        out.append([(s, t, None) for s, t in missing])
        count -= len(missing)
    assert count >= 0
    for start in range(0, count, len(dlinks)):
        out.append([(s, t, None) for s, t in dlinks[: min(len(dlinks), count - start)]])
    return out


def dummy_layout(g: Graph, K: int) -> ChunkLayout:
    """All-zero chunk of 5K bits in full-exchange rounds."""
    return _layout(g, _padding_rounds(g, 5 * K, set()))


@dataclass(frozen=True)
class ChunkedProtocol:
    base: NoiselessProtocol
    K: int
    content: tuple[ChunkLayout, ...]
    dummy_chunks: int
    dummy: ChunkLayout = field(repr=False)

    @property
    def graph(self) -> Graph:
        return self.base.graph

    @property
    def content_chunks(self) -> int:
        return len(self.content)

    @property
    def num_chunks(self) -> int:
        return len(self.content) + self.dummy_chunks

    def chunk(self, c: int) -> ChunkLayout:
        """Layout of chunk ``c`` (1-based); every chunk past the content is a dummy chunk."""
        if c < 1:
            raise ProtocolError("chunk indices start at 1")
        return self.content[c - 1] if c <= len(self.content) else self.dummy

    @property
    def communication_complexity(self) -> int:
        """CC of the chunked protocol (5K bits per chunk, dummies included)."""
        return 5 * self.K * self.num_chunks


def chunk_protocol(p: NoiselessProtocol, K: int, dummy_chunks: Optional[int] = None) -> ChunkedProtocol:
    """Group base rounds greedily into chunks of exactly 5K bits.

    A chunk takes the next base round while its bits plus one padding bit for
    every directed link still silent in the chunk fit in 5K. It is then closed
    by a coverage round (a zero on each silent directed link) and zero-filled
    round-robin up to 5K bits. ``dummy_chunks`` all-zero chunks follow
    (default: as many as there are content chunks).
    """
    g = p.graph
    if K < g.m or K % g.m:
        raise ProtocolError(f"K={K} must be a positive multiple of m={g.m}")
    budget = 5 * K
    if 2 * g.m > budget:  # pragma: no cover - implied by K >= m
        raise ProtocolError("a round can exceed the chunk budget")
    ndlinks = 2 * g.m
    chunks: list[ChunkLayout] = []
    current: list[list[tuple[int, int, Optional[int]]]] = []
    bits = 0
    covered: set[DirectedLink] = set()

    def close() -> None:
        nonlocal current, bits, covered
        rounds = current + _padding_rounds(g, budget - bits, covered)
        chunks.append(_layout(g, rounds))
        current, bits, covered = [], 0, set()

    for r, links in enumerate(p.schedule):
        if not links:
            continue
        new_cover = covered | set(links)
        if current and bits + len(links) + (ndlinks - len(new_cover)) > budget:
            close()
            new_cover = set(links)
        current.append([(s, t, r) for s, t in links])
        bits += len(links)
        covered = new_cover
    if current:
        close()
    if not chunks:
        raise ProtocolError("protocol has no transmissions")
    if dummy_chunks is None:
        dummy_chunks = len(chunks)
    return ChunkedProtocol(base=p, K=K, content=tuple(chunks), dummy_chunks=dummy_chunks, dummy=dummy_layout(g, K))


# --- reference executor -------------------------------------------------------


@dataclass(frozen=True)
class OracleResult:
    transcripts: Mapping[DirectedLink, tuple[tuple[int, tuple[int, ...]], ...]]
    outputs: tuple[Any, ...]
    views: tuple[Mapping[int, tuple[int, ...]], ...]
    communication_complexity: int

    def transcript(self, u: int, v: int) -> PartialTranscript:
        return PartialTranscript.from_chunks(self.transcripts[(u, v)])


def run_noiseless_oracle(cp: ChunkedProtocol) -> OracleResult:
    """Execute the base protocol round by round with no noise, then lay the
    exchanged bits out into the chunk structure."""
    p = cp.base
    g = p.graph
    received: list[dict[int, list[int]]] = [{v: [] for v in g.adjacency[u]} for u in range(g.n)]
    sent: dict[tuple[int, int, int], int] = {}
    for r, links in enumerate(p.schedule):
        bits = {}
        for s, t in links:
            b = p.next_bit(s, p.inputs[s], received[s], r)
            if b not in (0, 1):
                raise ProtocolError(f"next_bit returned {b!r} for sender {s} in round {r}")
            bits[(s, t)] = b
        for (s, t), b in bits.items():
            received[t][s].append(b)
            sent[(r, s, t)] = b
    per_link: dict[tuple[int, int], list[tuple[int, tuple[int, ...]]]] = {e: [] for e in g.edges}
    for c in range(1, cp.num_chunks + 1):
        layout = cp.chunk(c)
        for (a, b), slots in layout.link_slots.items():
            symbols = []
            for _, s, base in slots:
                receiver = b if s == a else a
                symbols.append(0 if base is None else sent[(base, s, receiver)])
            per_link[(a, b)].append((c, tuple(symbols)))
    transcripts = {}
    for (a, b), chunks in per_link.items():
        transcripts[(a, b)] = transcripts[(b, a)] = tuple(chunks)
    views = tuple({v: tuple(syms) for v, syms in received[u].items()} for u in range(g.n))
    outputs = tuple(
        p.output(u, p.inputs[u], views[u]) if p.output else views[u] for u in range(g.n)
    )
    return OracleResult(transcripts, outputs, views, p.communication_complexity)


def received_base_symbols(cp: ChunkedProtocol, party: int, neighbor: int, t: PartialTranscript) -> list[int]:
    """Symbols ``party`` received from ``neighbor`` on base-protocol slots of ``t``."""
    out = []
    e = (min(party, neighbor), max(party, neighbor))
    for index, symbols in t.chunks:
        for (_, s, base), sym in zip(cp.chunk(index).link_slots[e], symbols):
            if s == neighbor and base is not None:
                out.append(sym)
    return out


def simulate_chunk_slot(
    cp: ChunkedProtocol,
    party: int,
    link: DirectedLink,
    chunk_index: int,
    round_in_chunk: int,
    view: Mapping[int, PartialTranscript | Sequence[int]],
    party_input: Sequence[int],
) -> Optional[int]:
    """The bit ``party`` sends on ``link`` in the given round of a chunk, or None.

    ``view`` values may be transcripts (their completed chunks are reduced to
    received base symbols) or already-reduced symbol sequences.
    """
    if chunk_index < 1:
        raise ProtocolError("chunk indices start at 1")
    sender, receiver = link
    if sender != party:
        return None
    layout = cp.chunk(chunk_index)
    if not 0 <= round_in_chunk < layout.num_rounds:
        return None
    for t, base, _ in layout.sends[party][round_in_chunk]:
        if t != receiver:
            continue
        if base is None:
            return 0
        base_view = {
            v: received_base_symbols(cp, party, v, x) if isinstance(x, PartialTranscript) else x
            for v, x in view.items()
        }
        return cp.base.next_bit(party, party_input, base_view, base)
    return None


def bit_of(symbol: int) -> int:
    """Read a possibly corrupted symbol as a bit (silence reads as 0)."""
    return 1 if symbol == 1 else 0


__all__ = [
    "ChunkLayout",
    "ChunkedProtocol",
    "NoiselessProtocol",
    "OracleResult",
    "ProtocolError",
    "SILENCE",
    "bit_of",
    "chunk_protocol",
    "dummy_layout",
    "received_base_symbols",
    "run_noiseless_oracle",
    "simulate_chunk_slot",
]
