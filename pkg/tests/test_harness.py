import pytest

from icsim.harness import diverged_pair, in_step, reconvergence_phases, run_reconvergence
from icsim.scheme import make_variant
from icsim.transcript import common_prefix_length


def test_diverged_pair_shape():
    su, sv = diverged_pair(4, 2, 1)
    assert (len(su.T), len(sv.T)) == (6, 5)
    assert common_prefix_length(su.T, sv.T) == 4
    a, b = diverged_pair(4, 0, 0)
    assert in_step(a, b)


@pytest.mark.parametrize("tag", ["A", "B", "C"])
@pytest.mark.parametrize("divergence", [1, 2, 4])
def test_reconverges_within_linear_phases(tag, divergence):
    v = make_variant(tag, 8)
    for seed in range(5):
        res = reconvergence_phases(v, divergence, seed=seed)
        assert res.converged
        assert res.phases <= 8 * divergence + 8
        assert res.final_lengths[0] == res.final_lengths[1] == res.common_prefix
        assert res.statuses == ("simulate", "simulate")


def test_already_equal_converges_in_one_phase():
    v = make_variant("A", 4)
    su, sv = diverged_pair(3, 0, 0)
    res = run_reconvergence(v, su, sv, max_phases=4)
    assert res.phases == 1
    assert res.transitions == [("exit", "exit")]
