"""Active hemimetric learning drivers.

``learn_hm`` bisects one pair per iteration and tightens the bound matrices
with the triangle structure after each answer. ``ind_greedy`` is the
independent per-pair baseline and ``ind_greedy_sit`` adds triplet side
information. ``extend_online`` grows a learned solution by one item.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import (
    ATOL,
    GAP_TOL,
    BoundsState,
    DistanceMatrix,
    InfeasibleError,
    InvalidInputError,
    LabeledDatum,
    Query,
)
from .policy import clique_query, clique_size, q_greedy, PolicyExhausted
from .projection import lu_proj, lu_proj_fast
from .response import (
    DEFAULT_QUERY_CAP,
    BudgetExhausted,
    RobustQueryConfig,
    compute_gamma,
    get_user_response_bounded,
    get_user_response_unbounded,
)

PROJECTION_MODES = ("full", "fast", "none")
POLICIES = ("qclique", "qgreedy")
NOISE_HANDLING = ("direct", "bounded-robust", "unbounded-robust")


class PreconditionError(RuntimeError):
    pass


def ceil_log2(x: float) -> int:
    """``ceil(log2(x))`` robust to floating error at exact powers of two; at least 0."""
    if x <= 1:
        return 0
    return math.ceil(math.log2(x) - 1e-12)


@dataclass
class LearnerOptions:
    epsilon: float | None = None
    delta: float = 0.05
    projection_mode: str = "fast"
    policy: str = "qclique"
    quantization: float | None = None
    noise_handling: str = "direct"
    query_cap: int = DEFAULT_QUERY_CAP

    def __post_init__(self):
        if self.epsilon is None:
            # any eps below the quantum recovers the exact matrix
            self.epsilon = self.quantization / 2 if self.quantization else 0.01
        if self.epsilon <= 0:
            raise InvalidInputError("epsilon must be positive")
        if self.quantization is not None and not self.epsilon < self.quantization:
            raise InvalidInputError("epsilon must be below the quantization step")
        if self.projection_mode not in PROJECTION_MODES:
            raise InvalidInputError(f"projection_mode must be one of {PROJECTION_MODES}")
        if self.policy not in POLICIES:
            raise InvalidInputError(f"policy must be one of {POLICIES}")
        if self.noise_handling not in NOISE_HANDLING:
            raise InvalidInputError(f"noise_handling must be one of {NOISE_HANDLING}")


@dataclass
class RunStats:
    iterations: int = 0
    user_queries: int = 0
    per_pair_queries: np.ndarray | None = None
    final_linf_error: float | None = None
    wall_clock_ms: float = 0.0
    query_log: list[LabeledDatum] = field(default_factory=list)
    acquisition_queries: int = 0


class SideInformation:
    """Answers to every triplet comparison ``1(D[i,j] <= D[i,k])``.

    Stored per source row as the sorted order of targets with tie groups,
    which encodes the full set of answers. Ties answer 1 both ways.
    """

    def __init__(self, truth, atol: float = 0.0):
        D = truth.entries if isinstance(truth, DistanceMatrix) else np.asarray(truth, float)
        self.n = D.shape[0]
        self._D = D.copy()
        self._order = []
        self._group_first = []
        self._group_last = []
        for i in range(self.n):
            targets = np.array([j for j in range(self.n) if j != i], dtype=int)
            vals = D[i, targets]
            order = targets[np.argsort(vals, kind="stable")]
            sv = D[i, order]
            new_group = np.ones(len(sv), dtype=bool)
            new_group[1:] = sv[1:] - sv[:-1] > atol
            gid = np.cumsum(new_group) - 1
            starts = np.nonzero(new_group)[0]
            ends = np.append(starts[1:] - 1, len(sv) - 1)
            self._order.append(order)
            self._group_first.append(starts[gid])
            self._group_last.append(ends[gid])

    @property
    def acquisition_cost(self) -> int:
        return self.n * self.n * ceil_log2(self.n)

    def answer(self, i: int, j: int, k: int) -> int:
        return int(self._D[i, j] <= self._D[i, k])

    def tighten_row(self, L: np.ndarray, U: np.ndarray, i: int) -> bool:
        """Apply ``U[i,j] <= U[i,k]`` and ``L[i,k] >= L[i,j]`` for all answered-1 triplets in row i.

        Returns True if anything changed.
        """
        idx = self._order[i]
        if len(idx) == 0:
            return False
        u = U[i, idx]
        l = L[i, idx]
        suffix_min = np.minimum.accumulate(u[::-1])[::-1]
        prefix_max = np.maximum.accumulate(l)
        new_u = suffix_min[self._group_first[i]]
        new_l = prefix_max[self._group_last[i]]
        changed = bool(np.any(new_u < u) or np.any(new_l > l))
        U[i, idx] = new_u
        L[i, idx] = new_l
        if np.any(new_l > new_u + ATOL):
            raise InfeasibleError(f"side information contradicts bounds in row {i}")
        return changed


class LearnerState:
    """Bounds and bookkeeping of one learning run over an ordered item list."""

    def __init__(self, oracle, items: Sequence[int], r: float, opts: LearnerOptions,
                 side: SideInformation | None = None):
        self.oracle = oracle
        self.items = list(items)
        self.r = float(r)
        self.opts = opts
        self.side = side
        self.bounds = BoundsState.fresh(len(self.items), r)
        self.stats = RunStats(per_pair_queries=np.zeros((self.n, self.n), dtype=np.int64))
        self.clique = 1
        self.robust = RobustQueryConfig(opts.epsilon, opts.delta, max(self.n, 2), r,
                                        cap=opts.query_cap) if opts.noise_handling != "direct" else None

    @property
    def n(self) -> int:
        return len(self.items)

    def converged(self) -> bool:
        if self.n < 2:
            return True
        gaps = self.bounds.upper - self.bounds.lower
        return bool(np.all(gaps <= self.opts.epsilon + GAP_TOL))

    # -- one iteration -------------------------------------------------------

    def propose(self) -> Query | None:
        B, eps = self.bounds, self.opts.epsilon
        if self.n < 2:
            return None
        if self.opts.policy == "qclique":
            self.clique = clique_size(B, eps, self.clique)
            if self.clique >= self.n:
                return None
            return clique_query(B, eps, self.clique)
        try:
            return q_greedy(B, eps)
        except PolicyExhausted:
            return None

    def respond(self, q: Query) -> LabeledDatum:
        raw_q = Query(self.items[q.i], self.items[q.j], q.c)
        handling = self.opts.noise_handling
        if handling == "direct":
            return LabeledDatum(q, int(self.oracle.ask(raw_q)), 1)
        fn = get_user_response_bounded if handling == "bounded-robust" else get_user_response_unbounded
        d = fn(self.oracle.ask, raw_q, self.robust)
        return LabeledDatum(Query(q.i, q.j, d.query.c), d.label, d.user_query_cost)

    def _snap(self, c: float, label: int) -> float:
        step = self.opts.quantization
        if not step:
            return c
        k = math.floor(c / step + 1e-9)
        # rejection means D > c, so D is at least the next multiple
        return k * step if label == 1 else (k + 1) * step

    def _collapse(self, rows, cols) -> None:
        step = self.opts.quantization
        L, U = self.bounds.lower, self.bounds.upper
        for i, j in zip(rows, cols):
            if i == j or U[i, j] - L[i, j] >= step:
                continue
            val = math.floor(U[i, j] / step + 1e-9) * step
            if val < L[i, j] - ATOL and self.opts.noise_handling == "direct":
                raise InfeasibleError(f"no multiple of {step} inside bounds at ({i},{j})")
            L[i, j] = U[i, j] = val

    def update(self, d: LabeledDatum) -> None:
        q = d.query
        i, j = q.i, q.j
        L, U = self.bounds.lower, self.bounds.upper
        v = self._snap(q.c, d.label)
        if d.label == 1:
            U[i, j] = min(U[i, j], v)
        else:
            L[i, j] = max(L[i, j], v)
        if L[i, j] > U[i, j]:
            if self.opts.noise_handling == "direct":
                raise InfeasibleError(f"contradictory label at ({i},{j})")
            L[i, j] = U[i, j]
        if self.opts.quantization:
            self._collapse([i], [j])
        if self.side is not None:
            self.side.tighten_row(L, U, i)

        mode = self.opts.projection_mode
        if mode == "full":
            self._project_full()
        elif mode == "fast" and U[i, j] - L[i, j] <= self.opts.epsilon + GAP_TOL:
            self._project_fast(i, j)

    def _project_full(self) -> None:
        B = self.bounds
        if self.opts.noise_handling == "direct":
            L, U = lu_proj(B.lower, B.upper)
        else:
            from .projection import u_proj, l_proj
            U = u_proj(B.upper)
            L = l_proj(np.minimum(B.lower, U), U)
        B.lower, B.upper = L, U
        if self.opts.quantization:
            rows, cols = np.nonzero(B.upper - B.lower < self.opts.quantization)
            self._collapse(rows, cols)

    def _project_fast(self, i: int, j: int) -> None:
        B = self.bounds
        lo, hi = min(i, j), max(i, j)
        m = clique_size(B, self.opts.epsilon, self.clique)
        members = np.array([c for c in range(m) if c != hi], dtype=int)
        if len(members) == 0:
            return
        rows = np.concatenate([np.full(len(members), hi), members])
        cols = np.concatenate([members, np.full(len(members), hi)])
        lu_proj_fast(B.lower, B.upper, (lo,), rows, cols)
        if self.opts.noise_handling != "direct":
            np.minimum(B.lower, B.upper, out=B.lower)
        elif np.any(B.lower[rows, cols] > B.upper[rows, cols] + ATOL):
            raise InfeasibleError("projection produced crossing bounds")
        if self.opts.quantization:
            self._collapse(rows, cols)

    # -- driver --------------------------------------------------------------

    def run(self, monitor: Callable[[int, BoundsState], None] | None = None) -> "LearnerState":
        stats = self.stats
        t0 = time.perf_counter()
        try:
            while True:
                q = self.propose()
                if q is None:
                    break
                d = self.respond(q)
                stats.iterations += 1
                stats.user_queries += d.user_query_cost
                stats.per_pair_queries[q.i, q.j] += d.user_query_cost
                stats.query_log.append(d)
                self.update(d)
                if monitor is not None:
                    monitor(stats.iterations, self.bounds)
        except BudgetExhausted as exc:
            stats.wall_clock_ms += (time.perf_counter() - t0) * 1e3
            exc.partial = stats
            raise
        stats.wall_clock_ms += (time.perf_counter() - t0) * 1e3
        self._finish()
        return self

    def _finish(self) -> None:
        truth = getattr(self.oracle, "truth", None)
        if truth is not None:
            T = truth.entries if isinstance(truth, DistanceMatrix) else np.asarray(truth)
            sub = T[np.ix_(self.items, self.items)]
            self.stats.final_linf_error = float(np.max(np.abs(self.bounds.upper - sub))) if self.n else 0.0

    def estimate(self) -> DistanceMatrix:
        return DistanceMatrix(self.bounds.upper.copy(), self.r)


def _resolve(oracle, n, r):
    n = oracle.n if n is None else n
    r = oracle.r if r is None else r
    return n, r


def learn_hm(oracle, n: int | None = None, r: float | None = None,
             opts: LearnerOptions | None = None, monitor=None):
    """Learn all pairwise distances to precision ``opts.epsilon``.

    Returns ``(D_hat, stats)`` where ``D_hat`` is the final upper-bound matrix.
    ``monitor(t, bounds)`` is called after every iteration when given.
    """
    n, r = _resolve(oracle, n, r)
    state = LearnerState(oracle, range(n), r, opts or LearnerOptions()).run(monitor)
    return state.estimate(), state.stats


def ind_greedy(oracle, n: int | None = None, r: float | None = None,
               opts: LearnerOptions | None = None, monitor=None):
    """Independent per-pair bisection, widest gap first, no cross-pair inference."""
    base = opts or LearnerOptions()
    opts = LearnerOptions(base.epsilon, base.delta, "none", "qgreedy", base.quantization,
                          base.noise_handling, base.query_cap)
    return learn_hm(oracle, n, r, opts, monitor)


def ind_greedy_sit(oracle, side: SideInformation, n: int | None = None, r: float | None = None,
                   opts: LearnerOptions | None = None, monitor=None):
    """``ind_greedy`` plus triplet side information, whose acquisition cost is charged upfront."""
    n, r = _resolve(oracle, n, r)
    if side.n != n:
        raise InvalidInputError("side information covers a different item count")
    base = opts or LearnerOptions()
    opts = LearnerOptions(base.epsilon, base.delta, "none", "qgreedy", base.quantization,
                          base.noise_handling, base.query_cap)
    state = LearnerState(oracle, range(n), r, opts, side=side)
    state.stats.acquisition_queries = side.acquisition_cost
    state.stats.user_queries = side.acquisition_cost
    state.run(monitor)
    return state.estimate(), state.stats


def start_online(oracle, first_item: int = 0, r: float | None = None,
                 opts: LearnerOptions | None = None) -> LearnerState:
    r = oracle.r if r is None else r
    opts = opts or LearnerOptions()
    if opts.policy != "qclique":
        raise InvalidInputError("online growth requires the clique policy")
    return LearnerState(oracle, [first_item], r, opts)


def extend_online(state: LearnerState, new_item: int | None = None, oracle=None,
                  monitor=None) -> LearnerState:
    """Add one item to a fully learned state and learn its distances.

    Grows the bound matrices by a row and column initialised to ``[0, r]``
    and runs the clique policy until every pair involving the new item is
    within epsilon. The returned state carries cumulative statistics.
    """
    if not state.converged():
        raise PreconditionError("state is not fully learned; extend only converged states")
    oracle = state.oracle if oracle is None else oracle
    new_item = max(state.items) + 1 if new_item is None else new_item
    if new_item in state.items:
        raise InvalidInputError(f"item {new_item} already present")
    m = state.n
    grown = LearnerState(oracle, state.items + [new_item], state.r, state.opts, state.side)
    grown.bounds.lower[:m, :m] = state.bounds.lower
    grown.bounds.upper[:m, :m] = state.bounds.upper
    grown.stats.iterations = state.stats.iterations
    grown.stats.user_queries = state.stats.user_queries
    grown.stats.acquisition_queries = state.stats.acquisition_queries
    grown.stats.per_pair_queries[:m, :m] = state.stats.per_pair_queries
    grown.stats.query_log = list(state.stats.query_log)
    grown.stats.wall_clock_ms = state.stats.wall_clock_ms
    grown.clique = m
    return grown.run(monitor)


def predicted_bounds(n: int, K: int, r: float = 1.0, *, eps: float | None = None,
                     r_in: float | None = None, quantum: float | None = None,
                     delta: float | None = None, sigma_max: float | None = None) -> float:
    """Closed-form query budget for clustered instances.

    Noise-free clustered (``eps``, ``r_in``)::

        2 n K ceil(log2(r/eps)) + n^2 ceil(log2((2 r_in + 3 eps) / eps))

    Quantized (0, K)-clustered (``quantum``): ``2 n K ceil(log2(r/quantum))``.
    Passing ``delta`` and ``sigma_max`` gives the noisy variants: each log
    argument is tripled and the total is multiplied by gamma.
    """
    if not 1 <= K <= n:
        raise InvalidInputError("need 1 <= K <= n")
    if r <= 0:
        raise InvalidInputError("r must be positive")
    noisy = sigma_max is not None
    if noisy and delta is None:
        raise InvalidInputError("noisy bound needs delta")
    scale = 3 if noisy else 1
    if quantum is not None:
        if quantum <= 0:
            raise InvalidInputError("quantum must be positive")
        base = 2 * n * K * ceil_log2(scale * r / quantum)
        eps_for_gamma = quantum / 2 if eps is None else eps
    else:
        if eps is None or r_in is None or eps <= 0 or not 0 <= r_in <= r:
            raise InvalidInputError("clustered bound needs eps > 0 and 0 <= r_in <= r")
        base = (2 * n * K * ceil_log2(scale * r / eps)
                + n * n * ceil_log2(scale * (2 * r_in + 3 * eps) / eps))
        eps_for_gamma = eps
    if not noisy:
        return base
    _, gamma = compute_gamma(n, delta, sigma_max, eps_for_gamma, r)
    return gamma * base
