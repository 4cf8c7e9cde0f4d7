import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hemilearn.core import (
    BoundsState,
    DistanceMatrix,
    InvalidInputError,
    Query,
    floyd_warshall_min,
    hemimetric_closure,
    is_hemimetric,
    max_gap,
    read_instance,
    validate_hemimetric,
    write_instance,
)


def grid_matrix(n, top=8):
    cells = st.lists(st.integers(0, top), min_size=n * n, max_size=n * n)
    return cells.map(lambda v: _zero_diag(np.array(v, float).reshape(n, n) / top))


def _zero_diag(A):
    np.fill_diagonal(A, 0.0)
    return A


def path_oracle(W):
    """Shortest path between every pair by enumerating all simple paths."""
    n = W.shape[0]
    best = W.copy()
    for i, j in itertools.permutations(range(n), 2):
        others = [k for k in range(n) if k not in (i, j)]
        for length in range(1, len(others) + 1):
            for mid in itertools.permutations(others, length):
                path = (i, *mid, j)
                cost = sum(W[a, b] for a, b in zip(path, path[1:]))
                best[i, j] = min(best[i, j], cost)
    return best


def test_zero_matrix_is_valid():
    assert validate_hemimetric(DistanceMatrix(np.zeros((3, 3)), 1.0)) == []


def test_counter_example_matrix_is_valid():
    D = DistanceMatrix([[0, 1, 0.5], [1, 0, 0.5], [0.5, 0.5, 0]], 1.0)
    assert is_hemimetric(D)


def test_triangle_violation_reported():
    M = np.ones((3, 3))
    np.fill_diagonal(M, 0)
    M[0, 2] = 0.2
    M[2, 1] = 0.2
    M[0, 1] = 1.0
    v = validate_hemimetric(M, 1.0)
    assert [(x.kind, x.i, x.j, x.k) for x in v] == [("triangle", 0, 1, 2)]
    assert v[0].amount == pytest.approx(0.6)


def test_validate_reports_each_kind():
    M = np.array([[0.5, -0.1], [2.0, 0]])
    kinds = {v.kind for v in validate_hemimetric(M, 1.0)}
    assert kinds == {"negative", "diagonal", "above-r"}


def test_validate_rejects_non_square_and_nan():
    with pytest.raises(InvalidInputError):
        validate_hemimetric(np.zeros((2, 3)))
    with pytest.raises(InvalidInputError):
        validate_hemimetric(np.array([[0, np.nan], [1, 0]]))


def test_closure_single_two_hop():
    W = np.array([[0, 1, 0.2], [1, 0, 1], [1, 0.2, 0]])
    out = hemimetric_closure(W, 1.0).entries
    expected = W.copy()
    expected[0, 1] = 0.4
    np.testing.assert_allclose(out, expected)


def test_closure_clamps_to_r():
    W = np.array([[0, 3.0], [0.5, 0]])
    np.testing.assert_allclose(hemimetric_closure(W, 1.0).entries, [[0, 1], [0.5, 0]])


@pytest.mark.parametrize("bad", [np.array([[0, -1.0], [0, 0]]), np.array([[1.0, 0], [0, 0]])])
def test_closure_rejects_bad_input(bad):
    with pytest.raises(InvalidInputError):
        hemimetric_closure(bad, 1.0)


def test_closure_matches_path_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(5):
        W = _zero_diag(rng.integers(0, 9, (6, 6)) / 8.0)
        np.testing.assert_allclose(hemimetric_closure(W, 1.0).entries, path_oracle(W), atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6).flatmap(grid_matrix))
def test_closure_properties(W):
    C = hemimetric_closure(W, 1.0)
    assert validate_hemimetric(C) == []
    assert np.all(C.entries <= W + 1e-12)
    np.testing.assert_array_equal(hemimetric_closure(C.entries, 1.0).entries, C.entries)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5).flatmap(grid_matrix))
def test_valid_iff_closure_fixed_point(W):
    fixed = np.allclose(hemimetric_closure(W, 1.0).entries, W, atol=1e-9)
    assert is_hemimetric(W, 1.0) == fixed


def test_floyd_warshall_copies():
    W = np.array([[0, 5.0], [1, 0]])
    floyd_warshall_min(W)
    assert W[0, 1] == 5.0


def test_max_gap_tie_break_and_exclusion():
    B = BoundsState.fresh(3, 1.0)
    assert max_gap(B) == ((0, 1), 1.0)
    B.upper[1, 0] = 0.5
    (i, j), g = max_gap(B)
    assert g == 1.0 and (i, j) != (1, 0)


def test_max_gap_collapsed_and_small():
    B = BoundsState.fresh(3, 1.0)
    B.lower[:] = B.upper
    assert max_gap(B)[1] == 0.0
    with pytest.raises(InvalidInputError):
        max_gap(BoundsState.fresh(1))


def test_bounds_state_checks():
    B = BoundsState.fresh(3, 1.0)
    B.check_well_formed()
    assert B.contains(np.full((3, 3), 0.5) * (1 - np.eye(3)))
    B.lower[0, 1] = 2.0
    with pytest.raises(InvalidInputError):
        B.check_well_formed()


def test_distance_matrix_pins_diagonal():
    D = DistanceMatrix(np.ones((2, 2)))
    assert D[0, 0] == 0 and D.n == 2
    with pytest.raises(InvalidInputError):
        DistanceMatrix(np.ones(3))


def test_query_rejects_diagonal():
    with pytest.raises(InvalidInputError):
        Query(1, 1, 0.5)


def test_instance_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    D = hemimetric_closure(_zero_diag(rng.random((5, 5))), 1.0)
    path = tmp_path / "inst.csv"
    write_instance(path, D)
    back = read_instance(path)
    assert back.r == 1.0
    np.testing.assert_allclose(back.entries, D.entries, rtol=1e-11)
    write_instance(path, back)
    assert read_instance(path).entries.tolist() == back.entries.tolist()


def test_instance_read_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("0,1\n1,0\n")
    with pytest.raises(InvalidInputError, match="header"):
        read_instance(p)
    p.write_text("# hemimetric n=2 r=1\n0,1\n1,x\n")
    with pytest.raises(InvalidInputError, match=":3:"):
        read_instance(p)
