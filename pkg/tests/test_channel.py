import random

import pytest

from icsim.adversaries import LinkBurstAdversary, NullAdversary, UniformRandomAdversary, GreedyAdversary
from icsim.channel import (
    ADDITIVE,
    FIXING,
    BudgetLedger,
    Channel,
    ChannelError,
    CommitmentOrderError,
    EmissionCollector,
    NoisePattern,
    RandomnessGuard,
    adaptive_decide,
    apply_noise,
    commit_oblivious,
    step_round,
)
from icsim.engine import Engine
from icsim.transcript import SILENCE

from conftest import chunked


@pytest.mark.parametrize(
    "t,e,obs",
    [(0, 0, 0), (1, 1, SILENCE), (SILENCE, 2, 1), (0, 1, 1), (1, 2, 0), (SILENCE, 1, 0), (0, 2, SILENCE)],
)
def test_mod3_table(t, e, obs):
    assert apply_noise(t, e) == obs


def test_step_round_ledger():
    led = BudgetLedger(0.1, 4)
    obs = step_round({(0, 1): 1, (1, 0): 0}, {(0, 1): 1, (2, 1): 2}, led)
    assert obs == {(0, 1): SILENCE, (1, 0): 0, (2, 1): 1}
    assert (led.cc, led.err) == (2, 2)


def test_step_round_zero_noise_is_identity():
    em = {(0, 1): 1, (1, 2): 0}
    assert step_round(em, {}) == em


def test_step_round_rejects_bad_values():
    with pytest.raises(ChannelError):
        step_round({(0, 1): 2}, {})
    with pytest.raises(ChannelError):
        step_round({(0, 1): 1}, {(0, 1): 3})


def test_duplicate_emission_rejected():
    c = EmissionCollector()
    c.send(0, 1, 1)
    with pytest.raises(ChannelError):
        c.send(0, 1, 0)


def test_budget_ledger():
    led = BudgetLedger(0.5, 5, cc=100, err=9)
    assert led.rate == 0.1
    assert led.budget_valid()
    assert led.allows(1) and not led.allows(2)


def shape_for(g, variant="A", eps=0.001, **kw):
    v, cp = chunked(g, variant, rounds=12)
    return Engine(v, cp, epsilon=eps, **kw).shape


def test_null_commits_empty(ring4):
    pat = commit_oblivious(NullAdversary(), shape_for(ring4), RandomnessGuard())
    assert len(pat) == 0


def test_uniform_exact_count(ring4):
    shape = shape_for(ring4)
    for b in (0, 1, 7, 50):
        pat = commit_oblivious(UniformRandomAdversary(count=b), shape, RandomnessGuard(), trial_seed=b)
        assert len(pat) == b
        assert len(pat.entries) == b
        assert all(v in (1, 2) for v in pat.entries.values())
        assert all(0 <= r < shape.total_rounds for r, _ in pat.entries)


def test_uniform_default_budget_is_rate_budget(ring4):
    shape = shape_for(ring4, eps=0.05)
    pat = commit_oblivious(UniformRandomAdversary(), shape, RandomnessGuard())
    assert len(pat) == shape.rate_budget() > 0


def test_link_burst_confined(ring4):
    shape = shape_for(ring4)
    adv = LinkBurstAdversary(link=(1, 2), iterations=(3, 5), count=40)
    pat = commit_oblivious(adv, shape, RandomnessGuard())
    assert len(pat) == 40
    lo, hi = shape.iteration_start(3), shape.iteration_start(6)
    for r, d in pat.entries:
        assert lo <= r < hi
        assert d in ((1, 2), (2, 1))
        assert shape.phase_of(r)[0] in (3, 4, 5)


def test_link_burst_rejects_non_link(ring4):
    with pytest.raises(Exception):
        commit_oblivious(LinkBurstAdversary(link=(0, 2), count=1), shape_for(ring4), RandomnessGuard())


def test_commit_after_randomness_rejected(ring4):
    g = RandomnessGuard()
    g.draw()
    with pytest.raises(CommitmentOrderError):
        commit_oblivious(NullAdversary(), shape_for(ring4), g)


def test_adaptive_cannot_commit_and_oblivious_cannot_decide(ring4):
    with pytest.raises(ChannelError):
        commit_oblivious(GreedyAdversary(), shape_for(ring4), RandomnessGuard())
    with pytest.raises(ChannelError):
        adaptive_decide(NullAdversary(), 0, {}, None)


def test_commit_is_deterministic(ring4):
    shape = shape_for(ring4)
    a = commit_oblivious(UniformRandomAdversary(count=20, seed=3), shape, RandomnessGuard(), 9)
    b = commit_oblivious(UniformRandomAdversary(count=20, seed=3), shape, RandomnessGuard(), 9)
    c = commit_oblivious(UniformRandomAdversary(count=20, seed=3), shape, RandomnessGuard(), 10)
    assert a.entries == b.entries != c.entries


def test_phase_of_covers_iteration(ring4):
    shape = shape_for(ring4)
    phases = [shape.phase_of(shape.iteration_start(2) + off)[1] for off in range(shape.iteration_length)]
    assert phases[0] == "meeting-points"
    assert phases.count("listen") == 1
    assert phases.count("rewind") == ring4.n
    assert phases.count("simulation") == 5 * 4
    assert shape.phase_of(shape.iteration_start(2) + shape.iteration_length) == (3, "meeting-points")


def test_fixing_honest_symbol_is_free():
    led = BudgetLedger(0.0, 1)
    pat = NoisePattern({(0, (0, 1)): 1, (0, (1, 0)): 1, (0, (1, 2)): SILENCE}, FIXING)
    ch = Channel(led, pat)
    obs = ch.transmit(0, {(0, 1): 1, (1, 0): 0})
    assert obs[(0, 1)] == 1 and obs[(1, 0)] == 1
    assert obs[(1, 2)] == SILENCE
    assert led.err == 1


def test_idle_rounds_still_charged():
    led = BudgetLedger(0.0, 1)
    pat = NoisePattern({(3, (0, 1)): 2, (5, (1, 0)): 1}, ADDITIVE)
    ch = Channel(led, pat, record_trace=True)
    ch.advance_to(10)
    assert led.err == 2
    assert ch.trace_tsv().splitlines()[1:] == ["3\t0->1\t*\t2\t1", "5\t1->0\t*\t1\t0"]
    with pytest.raises(ChannelError):
        ch.advance_to(4)


def test_additive_zero_entries_ignored():
    pat = NoisePattern({(0, (0, 1)): 0, (1, (0, 1)): 1})
    assert len(pat) == 1
    assert pat.rounds_between(0, 5) == [1]
