import numpy as np
import pytest

from hemilearn.core import BoundsState
from hemilearn.instances import gen_quantized_clustered
from hemilearn.learner import LearnerOptions, LearnerState
from hemilearn.policy import PolicyExhausted, clique_size, clique_view, q_clique, q_greedy
from hemilearn.response import UserOracle


def test_q_greedy_fresh():
    q = q_greedy(BoundsState.fresh(3))
    assert (q.i, q.j, q.c) == (0, 1, 0.5)


def test_q_greedy_unique_argmax():
    B = BoundsState.fresh(3)
    B.lower[:] = B.upper
    B.lower[2, 0], B.upper[2, 0] = 0.2, 0.6
    q = q_greedy(B)
    assert (q.i, q.j) == (2, 0) and q.c == pytest.approx(0.4)


def test_q_greedy_exhausted():
    B = BoundsState.fresh(2)
    B.lower[:] = B.upper
    with pytest.raises(PolicyExhausted):
        q_greedy(B, 0.1)


def test_q_clique_fresh():
    q = q_clique(BoundsState.fresh(3), 0.1)
    assert (q.i, q.j, q.c) == (1, 0, 0.5)
    assert clique_view(BoundsState.fresh(3), 0.1).clique == range(1)


def test_q_clique_reverse_branch():
    B = BoundsState.fresh(3)
    B.lower[1, 0] = B.upper[1, 0] = 0.3
    q = q_clique(B, 0.1)
    assert (q.i, q.j) == (0, 1)


def test_clique_grows_and_exhausts():
    B = BoundsState.fresh(3)
    B.lower[:] = B.upper
    assert clique_size(B, 0.1) == 3
    with pytest.raises(PolicyExhausted):
        q_clique(B, 0.1)
    B.lower[2, 1] = 0.0
    assert clique_size(B, 0.1) == 2


def test_quantized_run_never_selects_collapsed_pair():
    D, _ = gen_quantized_clustered(20, 4, 1.0, 1 / 16, seed=3)
    state = LearnerState(UserOracle(D), range(20), 1.0, LearnerOptions(quantization=1 / 16))
    last_clique = 1
    while True:
        q = state.propose()
        if q is None:
            break
        L, U = state.bounds.lower, state.bounds.upper
        assert U[q.i, q.j] - L[q.i, q.j] > state.opts.epsilon
        assert L[q.i, q.j] < q.c < U[q.i, q.j]
        assert state.clique >= last_clique
        last_clique = state.clique
        d = state.respond(q)
        state.update(d)
    np.testing.assert_array_equal(state.bounds.upper, D.entries)
