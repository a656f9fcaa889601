import pytest

from icsim.ecc import encode
from icsim.engine import Engine, PhaseAlignmentError, run_simulation
from icsim.channel import FIXING, OBLIVIOUS_ADDITIVE, OBLIVIOUS_FIXING, NoisePattern
from icsim.harness import diverged_pair, in_step
from icsim.hashing import int_to_bits
from icsim.scheme import (
    MEETING_POINTS,
    SIMULATE,
    CrsFamily,
    DoubleHashFamily,
    LinkState,
    MeetingPointsExchange,
    SchemeError,
    SharedRandomString,
    flag_passing,
    lg,
    lglg,
    make_variant,
    prepare_endpoint,
    private_bits,
)
from icsim.topology import build_spanning_tree, path_graph, ring_graph, star_graph
from icsim.transcript import PartialTranscript, PrefixInterner, common_prefix_length

from conftest import chunked


class FixedPattern:
    """Oblivious adversary committing a given table."""

    def __init__(self, entries, mode="additive"):
        self.entries = entries
        self.mode = mode
        self.seed = 0
        self.kind = OBLIVIOUS_FIXING if mode == FIXING else OBLIVIOUS_ADDITIVE

    def commit(self, shape, rng):
        return NoisePattern(dict(self.entries), self.mode)


# -- parameters -----------------------------------------------------------------


def test_variant_parameters():
    assert lg(1) == lg(2) == 1 and lg(8) == 3 and lg(9) == 4
    assert lglg(8) == 2
    a, b, c = make_variant("A", 8), make_variant("B", 8), make_variant("C", 8)
    assert (a.K, a.hash_bits) == (8, 8)
    assert (b.K, b.hash_bits) == (24, 24)
    assert (c.K, c.hash_bits, c.inner_hash_bits) == (16, 24, 8)
    assert a.meeting_points_rounds == 5 * 8
    assert b.meeting_points_rounds == 5 * 24
    assert c.meeting_points_rounds == c.fresh_seed_bits + 3 * 8
    with pytest.raises(SchemeError):
        make_variant("D", 4)


def test_engine_rejects_k_mismatch(ring4):
    v, cp = chunked(ring4, "A")
    with pytest.raises(SchemeError):
        Engine(make_variant("B", ring4.m), cp)


# -- meeting points -----------------------------------------------------------------


def family(tag="A", seed=0, **kw):
    variant = make_variant(tag, 1, **kw)
    crs = SharedRandomString(seed)
    return DoubleHashFamily(variant, crs, seed) if tag == "C" else CrsFamily(variant, crs)


def test_endpoint_cut_points():
    t = PartialTranscript.from_chunks([(c, (0,)) for c in range(1, 8)])
    ls = LinkState(t, k=5)  # k becomes 6, k~ = 4, c = 1
    end = prepare_endpoint(0, ls)
    assert (end.k, end.ktilde, end.len1, end.len2) == (6, 4, 4, 0)
    ls = LinkState(PartialTranscript(), k=0)
    end = prepare_endpoint(0, ls)
    assert (end.len1, end.len2) == (0, 0)


@pytest.mark.parametrize("tag", ["A", "C"])
def test_equal_transcripts_exit_to_simulate(tag):
    su, sv = diverged_pair(4, 0, 0)
    recs = MeetingPointsExchange(family(tag), 1, 0, 1, su, sv).run()
    for ls, v in ((su, recs[0]), (sv, recs[1])):
        assert v.early_exit and v.transition == "exit"
        assert ls.status == SIMULATE and ls.k == 0 and ls.E == 0
    assert len(su.T) == len(sv.T) == 4


def test_corrupted_counter_hash_resets_receiver_only():
    su, sv = diverged_pair(4, 0, 0)
    fam = family("A")
    # flip the first bit of the k-hash that party 0 sends to party 1
    recs = MeetingPointsExchange(fam, 1, 0, 1, su, sv, {(0, 1): [(0, 1, True)]}).run()
    assert recs[1].transition == "reset"
    assert sv.status == MEETING_POINTS and (sv.k, sv.E, sv.mpc1, sv.mpc2) == (0, 0, 0, 0)
    assert recs[0].early_exit
    assert su.status == SIMULATE and su.k == 0
    assert [c.name for c in recs[1].comparisons if not c.believed] == ["ck"]


def test_corrupted_counter_hash_both_directions():
    su, sv = diverged_pair(4, 0, 0)
    noise = {(0, 1): [(1, 1, True)], (1, 0): [(2, 2, True)]}
    recs = MeetingPointsExchange(family("A"), 1, 0, 1, su, sv, noise).run()
    assert recs[0].transition == recs[1].transition == "reset"
    assert su.status == sv.status == MEETING_POINTS


@pytest.mark.parametrize("tag", ["A", "C"])
@pytest.mark.parametrize("seed", range(10))
def test_one_chunk_divergence_truncates_within_six_phases(tag, seed):
    common = 5
    su, sv = diverged_pair(common, 1, 1, seed=seed)
    fam = family(tag, seed)
    for phase in range(1, 7):
        MeetingPointsExchange(fam, phase, 0, 1, su, sv).run()
        if phase == 1:
            assert su.status == sv.status == MEETING_POINTS
        if len(su.T) == len(sv.T) == common:
            break
    else:
        pytest.fail("no truncation to the common prefix within 6 phases")
    assert common_prefix_length(su.T, sv.T) == common


def test_full_and_lazy_exchange_agree():
    for seed in range(30):
        for extra in ((0, 0), (1, 1), (2, 0), (3, 2)):
            states = [diverged_pair(3, *extra, seed=seed) for _ in range(2)]
            for ls in (*states[0], *states[1]):
                ls.k = seed % 5
            noise = {(0, 1): [(seed % 40, 1 + seed % 2, True)]} if seed % 3 else None
            fam = family("A", seed)
            lazy = MeetingPointsExchange(fam, 2, 0, 1, *states[0], noise).run()
            full = MeetingPointsExchange(fam, 2, 0, 1, *states[1], noise, full=True).run()
            assert lazy == full
            assert [len(x.T) for x in states[0]] == [len(x.T) for x in states[1]]


# -- flag passing -------------------------------------------------------------------


@pytest.mark.parametrize("g", [path_graph(5), star_graph(6), ring_graph(7)], ids=["path", "star", "ring"])
def test_flag_passing_noiseless(g):
    tree = build_spanning_tree(g)
    assert flag_passing(tree, [1] * g.n) == [1] * g.n
    for leaf in range(g.n):
        if not tree.children[leaf]:
            status = [1] * g.n
            status[leaf] = 0
            assert flag_passing(tree, status) == [0] * g.n


def test_flag_passing_downward_deletion():
    g = path_graph(3)
    tree = build_spanning_tree(g)
    assert tree.depth == 3
    dropped = []

    def deliver(r, em):
        out = dict(em)
        if (0, 1) in out and r >= tree.depth:  # the downward bit root -> child
            dropped.append(r)
            del out[(0, 1)]
        return out

    assert flag_passing(tree, [1, 1, 1], deliver) == [1, 0, 0]
    assert len(dropped) == 1


def test_flag_passing_uses_2d_rounds():
    tree = build_spanning_tree(path_graph(4))
    from icsim.scheme import FlagPassing

    fp = FlagPassing(tree, [1] * 4)
    assert fp.rounds == 2 * tree.depth
    assert max(fp.active_rounds()) < fp.rounds


# -- simulation and rewind through the engine ----------------------------------------------


def test_noiseless_iteration_appends_one_chunk(ring4):
    v, cp = chunked(ring4, "A", rounds=20, dummy_chunks=1)
    rep = run_simulation(v, cp, iterations=1)
    assert set(rep.final_lengths.values()) == {1}
    eng = Engine(v, cp, iterations=1)
    eng.run()
    for p in eng.parties:
        for w, ls in p.links.items():
            assert ls.T == eng.parties[w].links[p.party].T


class _AllStopped(Engine):
    def _set_status(self):
        super()._set_status()
        for p in self.parties:
            p.status = 0


def test_net_correct_zero_everywhere_sends_only_bottoms(ring4):
    v, cp = chunked(ring4, "A", rounds=20)
    rep = _AllStopped(v, cp, iterations=1).run()
    assert set(rep.final_lengths.values()) == {0}
    m, n = ring4.m, ring4.n
    flags = 2 * (n - 1)
    assert rep.snapshots[1].iteration_cc == 2 * m * v.meeting_points_rounds + flags + 2 * m


def test_inserted_bottom_skips_one_side(path4):
    v, cp = chunked(path4, "A", rounds=20, dummy_chunks=1)
    eng = Engine(v, cp, iterations=1)
    listen = eng.shape.iteration_start(1) + eng.schedule.offsets["simulation"]
    eng.adversary = FixedPattern({(listen, (2, 3)): 2})
    rep = eng.run()
    # party 3 heard a bottom from 2 and skipped the link; 2 simulated it
    assert rep.err == 1
    assert rep.final_lengths[(2, 3)] == rep.final_lengths[(3, 2)] + 1


def test_rewind_wave_reduces_h_star(path4):
    v, cp = chunked(path4, "A", rounds=20, dummy_chunks=3)
    eng = Engine(v, cp, iterations=1)
    eng.setup()
    eng.iteration = 1
    P = eng.parties
    from icsim.protocol_model import run_noiseless_oracle

    oracle = run_noiseless_oracle(cp)
    for p in P:
        for w, ls in p.links.items():
            chunks = oracle.transcripts[(p.party, w)]
            n = 3 if {p.party, w} == {1, 2} else 2
            for c, syms in chunks[:n]:
                ls.T.append_chunk(c, syms)
    h_before = max(len(ls.T) for p in P for ls in p.links.values())
    r0 = eng.shape.iteration_start(1) + eng.schedule.offsets["rewind"]
    eng.channel.advance_to(r0)
    eng._rewind(r0)
    h_after = max(len(ls.T) for p in P for ls in p.links.values())
    assert (h_before, h_after) == (3, 2)
    assert all(len(ls.T) == 2 for p in P for ls in p.links.values())


def test_inserted_rewind_bit_truncates_and_is_charged(path4):
    v, cp = chunked(path4, "A", rounds=20, dummy_chunks=3)
    eng = Engine(v, cp, iterations=1)
    r0 = eng.shape.iteration_start(1) + eng.schedule.offsets["rewind"]
    eng.adversary = FixedPattern({(r0, (0, 1)): 2})
    rep = eng.run()
    assert rep.err == 1
    assert rep.final_lengths[(1, 0)] == 0
    assert rep.final_lengths[(0, 1)] == 1
    assert rep.snapshots[-1].EHC == 1


def test_rewind_at_most_once_per_link_per_phase(path4):
    v, cp = chunked(path4, "A", rounds=20, dummy_chunks=3)
    eng = Engine(v, cp, iterations=1)
    r0 = eng.shape.iteration_start(1) + eng.schedule.offsets["rewind"]
    # rewind bits on every round of the phase towards party 1
    eng.adversary = FixedPattern({(r0 + r, (0, 1)): 2 for r in range(path4.n)})
    rep = eng.run()
    assert rep.final_lengths[(1, 0)] == 0  # one truncation, not four


def test_phase_alignment_enforced(ring4):
    v, cp = chunked(ring4, "A")
    eng = Engine(v, cp, iterations=2)
    eng.setup()
    eng.iteration = 1
    rw = eng.shape.iteration_start(1) + eng.schedule.offsets["rewind"]
    with pytest.raises(PhaseAlignmentError):
        eng._transmit(rw, {}, "simulation")
    with pytest.raises(PhaseAlignmentError):
        eng._transmit(eng.shape.iteration_start(2), {}, "meeting-points")
    eng._transmit(rw, {}, "rewind")


# -- seed exchange (variant B) ------------------------------------------------------------


def b_engine(g, adversary=None, seed=0):
    v, cp = chunked(g, "B", rounds=8)
    eng = Engine(v, cp, adversary, trial_seed=seed, iterations=2)
    eng.setup()
    return eng


def strings(eng, a, b):
    s, t = eng.family.hashers[(a, b)].string, eng.family.hashers[(b, a)].string
    return (s.a, s.y), (t.a, t.y)


def test_seed_exchange_noiseless(ring4):
    eng = b_engine(ring4)
    assert eng.seed_exchange_reliable
    for a, b in ring4.edges:
        mine, theirs = strings(eng, a, b)
        assert mine == theirs


def test_seed_exchange_light_noise_still_equal(ring4):
    eng0 = b_engine(ring4)
    flips = {(r, (0, 1)): 1 for r in (0, 7, 20)}
    eng = b_engine(ring4, FixedPattern(flips))
    assert eng.ledger.err == 3
    assert eng.seed_exchange_reliable
    for a, b in ring4.edges:
        assert strings(eng, a, b)[0] == strings(eng, a, b)[1] == strings(eng0, a, b)[0]


def test_seed_exchange_corrupted_beyond_distance(ring4):
    eng0 = b_engine(ring4)
    plan = eng0.seed_plan
    seed = private_bits(0, ("delta-seed", 0, 1), plan.spec.seed_len)
    honest = encode(int_to_bits(seed, plan.spec.seed_len), plan.code)
    other = encode(int_to_bits(seed ^ 1, plan.spec.seed_len), plan.code)
    table = {(r, (0, 1)): other[r] for r in range(len(honest)) if honest[r] != other[r]}
    eng = b_engine(ring4, FixedPattern(table, FIXING))
    assert eng.ledger.err == len(table)
    mine, theirs = strings(eng, 0, 1)
    assert mine != theirs
    for a, b in ring4.edges:
        if (a, b) != (0, 1):
            assert strings(eng, a, b)[0] == strings(eng, a, b)[1]


def test_seed_exchange_sender_is_lower_id(ring4):
    eng = b_engine(ring4)
    for a, b in ring4.edges:
        seed = private_bits(0, ("delta-seed", a, b), eng.seed_plan.spec.seed_len)
        k = eng.seed_plan.spec.field_degree
        assert strings(eng, a, b)[0] == (seed & ((1 << k) - 1), seed >> k)
