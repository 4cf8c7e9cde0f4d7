"""Query selection: myopic max-gap bisection and clique growing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GAP_TOL, BoundsState, Query, max_gap


class PolicyExhausted(RuntimeError):
    """Every off-diagonal gap is already within epsilon."""


@dataclass(frozen=True)
class CliqueView:
    clique: range
    next_item: int


def _midpoint(B: BoundsState, i: int, j: int) -> Query:
    return Query(i, j, 0.5 * (B.lower[i, j] + B.upper[i, j]))


def q_greedy(B: BoundsState, eps: float = 0.0) -> Query:
    """Bisect the pair with the largest gap (first in row-major order on ties)."""
    (i, j), gap = max_gap(B)
    if gap <= eps + GAP_TOL:
        raise PolicyExhausted("all gaps are within epsilon")
    return _midpoint(B, i, j)


def clique_size(B: BoundsState, eps: float, start: int = 1) -> int:
    """Length m of the longest learned prefix ``{0..m-1}``.

    ``start`` lets callers resume from a prefix already known to be learned;
    gaps only shrink during a run, so the prefix never shrinks.
    """
    L, U = B.lower, B.upper
    tol = eps + GAP_TOL
    m = max(start, 1)
    n = B.n
    while m < n and not (np.any(U[m, :m] - L[m, :m] > tol) or np.any(U[:m, m] - L[:m, m] > tol)):
        m += 1
    return m


def clique_view(B: BoundsState, eps: float) -> CliqueView:
    m = clique_size(B, eps)
    return CliqueView(range(m), m)


def clique_query(B: BoundsState, eps: float, m: int) -> Query:
    """Next query given the current clique size ``m`` (item ``m`` is being added)."""
    n = B.n
    if m >= n:
        raise PolicyExhausted("all gaps are within epsilon")
    a = m
    L, U = B.lower, B.upper
    row_open = U[a, :a] - L[a, :a] > eps + GAP_TOL
    col_open = U[:a, a] - L[:a, a] > eps + GAP_TOL
    either = np.nonzero(row_open | col_open)[0]
    b = int(either[0])
    if row_open[b]:
        return _midpoint(B, a, b)
    return _midpoint(B, b, a)


def q_clique(B: BoundsState, eps: float) -> Query:
    """Grow the learned prefix clique by one item at a time.

    Item ``a`` is the first item outside the clique and ``b`` the first
    clique member whose distance to or from ``a`` is still open. The query
    is ``(a, b)`` if that direction is open, otherwise ``(b, a)``.
    """
    return clique_query(B, eps, clique_size(B, eps))
