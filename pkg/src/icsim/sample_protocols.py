"""Built-in sample protocols and the JSON protocol descriptor."""

from __future__ import annotations

import json
import random
from pathlib import Path
from typing import Any, Mapping, Sequence

from .protocol_model import NoiselessProtocol, ProtocolError, bit_of
from .topology import Graph, build_spanning_tree


def _last(view: Mapping[int, Sequence[int]], v: int) -> int:
    seq = view.get(v, ())
    return bit_of(seq[-1]) if seq else 0


def _random_inputs(g: Graph, width: int, rng: random.Random) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(rng.randint(0, 1) for _ in range(width)) for _ in range(g.n))


def random_bits_protocol(g: Graph, rounds: int = 24, density: float = 0.5, input_bits: int = 16, seed: int = 0) -> NoiselessProtocol:
    """Random fixed schedule; each bit is an input bit XORed with the latest bit
    received from every neighbor, so corrupted receptions propagate."""
    rng = random.Random(seed)
    dlinks = g.directed_links()
    schedule = []
    for _ in range(rounds):
        links = [d for d in dlinks if rng.random() < density]
        if not links:
            links = [rng.choice(dlinks)]
        schedule.append(tuple(links))
    inputs = _random_inputs(g, input_bits, rng)

    def next_bit(party: int, x: Sequence[int], view: Mapping[int, Sequence[int]], r: int) -> int:
        return x[r % len(x)] ^ _latest_parity(view)

    return NoiselessProtocol(g, tuple(schedule), next_bit, inputs, name="random-bits")


def _latest_parity(view: Mapping[int, Sequence[int]]) -> int:
    acc = 0
    for v in sorted(view):
        acc ^= _last(view, v)
    return acc


def _token_walk(g: Graph) -> list[int]:
    """Closed walk 0 -> ... -> 0 along the ring if 0..n-1 forms a cycle, else a
    DFS tour of the BFS spanning tree."""
    edges = set(g.edges)
    n = g.n
    if n >= 3 and all((min(i, (i + 1) % n), max(i, (i + 1) % n)) in edges for i in range(n)):
        return list(range(n)) + [0]
    tree = build_spanning_tree(g)
    walk = [tree.root]

    def visit(v: int) -> None:
        for c in tree.children[v]:
            walk.append(c)
            visit(c)
            walk.append(v)

    visit(tree.root)
    return walk


def xor_token_protocol(g: Graph, width: int = 4, seed: int = 0) -> NoiselessProtocol:
    """A token walks from party 0 around the network and back, once per input
    bit; each party XORs its input bit into the token on its first visit.
    Party 0 outputs the returned tokens, i.e. the XOR of all inputs."""
    rng = random.Random(seed)
    inputs = _random_inputs(g, width, rng)
    walk = _token_walk(g)
    steps = len(walk) - 1
    first_visit = []
    seen = {walk[0]}
    for s in range(steps):
        sender = walk[s]
        first_visit.append(s > 0 and sender not in seen)
        seen.add(sender)
    schedule = tuple(((walk[s], walk[s + 1]),) for _ in range(width) for s in range(steps))

    def next_bit(party: int, x: Sequence[int], view: Mapping[int, Sequence[int]], r: int) -> int:
        lap, s = divmod(r, steps)
        if s == 0:
            return x[lap]
        token = _last(view, walk[s - 1])
        return token ^ x[lap] if first_visit[s] else token

    def output(party: int, x: Sequence[int], view: Mapping[int, Sequence[int]]) -> Any:
        if party != walk[0]:
            return None
        # party 0 hears from walk[-2] exactly once per lap: the closing step
        received = view[walk[-2]]
        return tuple(bit_of(received[lap]) if lap < len(received) else 0 for lap in range(width))

    return NoiselessProtocol(g, schedule, next_bit, inputs, name="xor-token-ring", output=output)


def broadcast_echo_protocol(g: Graph, width: int = 2, seed: int = 0) -> NoiselessProtocol:
    """Per input bit: the root broadcasts its bit down the BFS tree, then every
    party echoes up the XOR of its subtree's bits."""
    rng = random.Random(seed)
    inputs = _random_inputs(g, width, rng)
    tree = build_spanning_tree(g)
    d = tree.depth
    by_level: dict[int, list[int]] = {}
    for v in range(g.n):
        by_level.setdefault(tree.level[v], []).append(v)
    down = [tuple((p, c) for p in by_level.get(lv, []) for c in tree.children[p]) for lv in range(1, d)]
    up = [tuple((c, tree.parent[c]) for c in by_level.get(lv, [])) for lv in range(d, 1, -1)]
    per_bit = down + up
    schedule = tuple(links for _ in range(width) for links in per_bit)
    rounds_per_bit = len(per_bit)

    def next_bit(party: int, x: Sequence[int], view: Mapping[int, Sequence[int]], r: int) -> int:
        lap, s = divmod(r, rounds_per_bit)
        if s < d - 1:  # downward wave
            return x[lap] if party == tree.root else _last(view, tree.parent[party])
        acc = x[lap]
        for c in tree.children[party]:
            acc ^= _last(view, c)
        return acc

    def output(party: int, x: Sequence[int], view: Mapping[int, Sequence[int]]) -> Any:
        if party == tree.root:
            out = []
            for lap in range(width):
                acc = x[lap]
                for c in tree.children[party]:
                    acc ^= bit_of(view[c][lap])
                out.append(acc)
            return tuple(out)
        parent = tree.parent[party]
        return tuple(bit_of(view[parent][lap]) for lap in range(width))

    return NoiselessProtocol(g, schedule, next_bit, inputs, name="broadcast-echo", output=output)


def tabulated_protocol(g: Graph, schedule: Sequence[Sequence[Sequence[int]]], inputs: Sequence[Sequence[int]], table: Mapping[str, Any]) -> NoiselessProtocol:
    """Explicit tiny protocol; ``table["r:s:t"]`` is 0, 1 or "x<i>" (input bit i)."""
    sched = tuple(tuple((int(s), int(t)) for s, t in links) for links in schedule)
    for r, links in enumerate(sched):
        for s, t in links:
            entry = table.get(f"{r}:{s}:{t}")
            if entry is None:
                raise ProtocolError(f"table has no entry for scheduled slot {r}:{s}:{t}")

    def next_bit(party: int, x: Sequence[int], view: Mapping[int, Sequence[int]], r: int) -> int:
        for s, t in sched[r]:
            if s == party:
                entry = table[f"{r}:{s}:{t}"]
                if isinstance(entry, str) and entry.startswith("x"):
                    return x[int(entry[1:])]
                return int(entry)
        raise ProtocolError(f"party {party} does not speak in round {r}")

    return NoiselessProtocol(g, sched, next_bit, tuple(tuple(int(b) for b in x) for x in inputs), name="tabulated")


GENERATORS = {
    "random-bits": random_bits_protocol,
    "xor-token-ring": xor_token_protocol,
    "broadcast-echo": broadcast_echo_protocol,
}


def protocol_from_descriptor(g: Graph, desc: Mapping[str, Any]) -> NoiselessProtocol:
    if "file" in desc:
        desc = json.loads(Path(desc["file"]).read_text())
    if "generator" in desc:
        name = desc["generator"]
        if name not in GENERATORS:
            raise ProtocolError(f"unknown protocol generator {name!r}; known: {sorted(GENERATORS)}")
        return GENERATORS[name](g, **dict(desc.get("params", {})))
    if "schedule" in desc:
        return tabulated_protocol(g, desc["schedule"], desc["inputs"], desc["table"])
    raise ProtocolError("protocol descriptor needs 'generator', 'schedule' or 'file'")
