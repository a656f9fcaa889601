import random
from functools import reduce

import pytest
from hypothesis import given, settings, strategies as st

from icsim.protocol_model import (
    NoiselessProtocol,
    ProtocolError,
    chunk_protocol,
    run_noiseless_oracle,
    simulate_chunk_slot,
)
from icsim.sample_protocols import (
    broadcast_echo_protocol,
    protocol_from_descriptor,
    random_bits_protocol,
    xor_token_protocol,
)
from icsim.topology import complete_graph, path_graph, ring_graph, star_graph


def check_chunk_invariants(cp):
    g = cp.graph
    dlinks = set(g.directed_links())
    seen_base = []
    for c in range(1, cp.num_chunks + 1):
        layout = cp.chunk(c)
        assert layout.bits == 5 * cp.K
        speaks = {(s, t) for slots in layout.rounds for s, t, _ in slots}
        assert speaks == dlinks, f"chunk {c} misses a neighbor pair"
        for slots in layout.rounds:
            links = [(s, t) for s, t, _ in slots]
            assert len(links) == len(set(links))
        seen_base.extend(base for slots in layout.rounds for _, _, base in slots if base is not None)
    # every base transmission appears exactly once, in order
    expect = [r for r, links in enumerate(cp.base.schedule) for _ in links]
    assert sorted(seen_base) == expect


def zero_protocol(g, rounds):
    sched = tuple(tuple(g.directed_links()[:1]) for _ in range(rounds))
    return NoiselessProtocol(g, sched, lambda *a: 0, tuple(() for _ in range(g.n)))


def test_exact_fit_unchanged():
    g = path_graph(2)  # m = 1, K = 1: chunks of 5 bits
    sched = (((0, 1), (1, 0)), ((0, 1),), ((1, 0),), ((0, 1),))
    p = NoiselessProtocol(g, sched, lambda *a: 1, ((), ()))
    cp = chunk_protocol(p, 1, 0)
    assert cp.content_chunks == 1
    assert [list(r) for r in cp.chunk(1).rounds] == [[(s, t, r) for s, t in links] for r, links in enumerate(sched)]


def test_greedy_grouping_10k_plus_3():
    g = path_graph(2)
    K = 1
    # 10K + 3 = 13 single-bit rounds alternating directions so coverage is free
    sched = tuple((((0, 1),) if r % 2 == 0 else ((1, 0),)) for r in range(13))
    p = NoiselessProtocol(g, sched, lambda *a: 1, ((), ()))
    cp = chunk_protocol(p, K, 0)
    assert cp.content_chunks == 3
    third = cp.chunk(3)
    real = sum(1 for slots in third.rounds for _, _, base in slots if base is not None)
    assert real == 3
    assert third.bits - real == 2  # the rest of the 5 bits is virtual


def test_dummy_chunks():
    g = ring_graph(4)
    p = random_bits_protocol(g, rounds=10)
    base = chunk_protocol(p, 4, 0)
    cp = chunk_protocol(p, 4, 2)
    assert cp.num_chunks == base.num_chunks + 2
    oracle = run_noiseless_oracle(cp)
    for (u, v), chunks in oracle.transcripts.items():
        for c, syms in chunks[cp.content_chunks:]:
            assert set(syms) == {0}
    assert chunk_protocol(p, 4).dummy_chunks == base.content_chunks


def test_k_must_be_multiple_of_m():
    g = ring_graph(4)
    with pytest.raises(ProtocolError):
        chunk_protocol(random_bits_protocol(g), 6)
    with pytest.raises(ProtocolError):
        chunk_protocol(random_bits_protocol(g), 2)


@pytest.mark.parametrize("g", [path_graph(6), star_graph(6), ring_graph(8), complete_graph(5)], ids=["path", "star", "ring", "complete"])
@pytest.mark.parametrize("gen", [random_bits_protocol, xor_token_protocol, broadcast_echo_protocol])
def test_builtin_generators_satisfy_invariants(g, gen):
    for K in (g.m, 2 * g.m):
        check_chunk_invariants(chunk_protocol(gen(g), K, 1))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(3, 7), st.integers(1, 40), st.floats(0.05, 1.0), st.integers(1, 3))
def test_random_protocols_satisfy_invariants(seed, n, rounds, density, mult):
    g = ring_graph(n)
    p = random_bits_protocol(g, rounds=rounds, density=density, seed=seed)
    check_chunk_invariants(chunk_protocol(p, mult * g.m, 1))


def test_all_zero_protocol_all_zero_transcripts():
    g = path_graph(3)
    oracle = run_noiseless_oracle(chunk_protocol(zero_protocol(g, 7), g.m))
    for chunks in oracle.transcripts.values():
        assert all(set(syms) == {0} for _, syms in chunks)


def test_xor_token_ring_two_ways():
    g = ring_graph(4)
    p = xor_token_protocol(g, width=4, seed=11)
    oracle = run_noiseless_oracle(chunk_protocol(p, g.m))
    direct = tuple(reduce(lambda acc, x: acc ^ x[lap], p.inputs, 0) for lap in range(4))
    assert oracle.outputs[0] == direct


def test_broadcast_echo_outputs():
    g = star_graph(5)
    p = broadcast_echo_protocol(g, width=3, seed=2)
    oracle = run_noiseless_oracle(chunk_protocol(p, g.m))
    xor_all = tuple(reduce(lambda acc, x: acc ^ x[lap], p.inputs, 0) for lap in range(3))
    assert oracle.outputs[0] == xor_all
    for leaf in range(1, 5):
        assert oracle.outputs[leaf] == p.inputs[0]


def test_oracle_link_symmetry_and_determinism():
    g = complete_graph(4)
    cp = chunk_protocol(random_bits_protocol(g, seed=5), g.m, 1)
    a, b = run_noiseless_oracle(cp), run_noiseless_oracle(cp)
    assert a.transcripts == b.transcripts
    for u, v in g.edges:
        assert a.transcripts[(u, v)] == a.transcripts[(v, u)]


def _received_before(cp, u, v, c, r):
    """Base symbols u has received from v before round r of chunk c."""
    count = 0
    for cc in range(1, c + 1):
        for rr, slots in enumerate(cp.chunk(cc).rounds):
            if cc == c and rr >= r:
                return count
            count += sum(1 for s, t, base in slots if s == v and t == u and base is not None)
    return count


def test_simulate_chunk_slot_replays_oracle():
    g = ring_graph(5)
    cp = chunk_protocol(random_bits_protocol(g, rounds=30, seed=9), g.m, 1)
    oracle = run_noiseless_oracle(cp)
    for c in range(1, cp.num_chunks + 1):
        layout = cp.chunk(c)
        expected = {d: dict(oracle.transcripts[d])[c] for d in g.directed_links()}
        for r, slots in enumerate(layout.rounds):
            for s, t, _ in slots:
                view = {v: oracle.views[s][v][: _received_before(cp, s, v, c, r)] for v in g.adjacency[s]}
                bit = simulate_chunk_slot(cp, s, (s, t), c, r, view, cp.base.inputs[s])
                e = (min(s, t), max(s, t))
                pos = next(i for i, (rr, ss, _) in enumerate(layout.link_slots[e]) if rr == r and ss == s)
                assert bit == expected[(s, t)][pos]
        assert simulate_chunk_slot(cp, 0, (1, 0), c, 0, {}, ()) is None


def test_slot_view_from_transcripts():
    g = ring_graph(4)
    cp = chunk_protocol(random_bits_protocol(g, rounds=40, seed=1), g.m, 0)
    oracle = run_noiseless_oracle(cp)
    c = 2
    s, t, base = next(x for x in cp.chunk(c).rounds[0] if x[2] is not None)
    view = {v: oracle.transcript(s, v) for v in g.adjacency[s]}
    for T in view.values():
        T.truncate(c - 1)
    bit = simulate_chunk_slot(cp, s, (s, t), c, 0, view, cp.base.inputs[s])
    pos = next(i for i, (rr, ss, _) in enumerate(cp.chunk(c).link_slots[(min(s, t), max(s, t))]) if rr == 0 and ss == s)
    assert bit == dict(oracle.transcripts[(s, t)])[c][pos]


def test_dummy_slot_sends_zero():
    g = ring_graph(4)
    cp = chunk_protocol(random_bits_protocol(g, rounds=4), g.m, 2)
    c = cp.num_chunks
    s, t, _ = cp.chunk(c).rounds[0][0]
    assert simulate_chunk_slot(cp, s, (s, t), c + 5, 0, {}, ()) == 0


def test_descriptor_table_protocol():
    g = path_graph(2)
    desc = {"schedule": [[[0, 1]], [[1, 0]]], "inputs": [[1], [0]], "table": {"0:0:1": "x0", "1:1:0": 1}}
    p = protocol_from_descriptor(g, desc)
    oracle = run_noiseless_oracle(chunk_protocol(p, 1))
    assert oracle.views[1][0] == (1,)
    assert oracle.views[0][1] == (1,)
    with pytest.raises(ProtocolError):
        protocol_from_descriptor(g, {"schedule": [[[0, 1]]], "inputs": [[0], [0]], "table": {}})
    with pytest.raises(ProtocolError):
        protocol_from_descriptor(g, {"generator": "nope"})


def test_schedule_must_use_links():
    g = path_graph(3)
    with pytest.raises(ProtocolError):
        NoiselessProtocol(g, (((0, 2),),), lambda *a: 0, ((), (), ()))
