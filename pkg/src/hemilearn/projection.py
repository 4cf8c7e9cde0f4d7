"""Bound tightening: exact U/L projections, scoped (fast) variants and oracles.

``u_proj`` pulls an upper-bound matrix down to the largest hemimetric below it;
``l_proj`` pushes a lower-bound matrix up to the smallest member of the
companion set L(U), where every ``L[i, j] >= max(L[i, k] - U[j, k],
L[k, j] - U[k, i])``. With full scope both are the Floyd-Warshall style sweep
(pivot-major, then row-major pairs). With a :class:`ProjectionScope` only the
listed (pivot, pair) updates are applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations
from typing import Iterable, Sequence

import numpy as np

from .core import (
    ATOL,
    InfeasibleError,
    InvalidInputError,
    LabeledDatum,
    floyd_warshall_min,
    validate_hemimetric,
)


class ResourceLimitError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProjectionScope:
    pivots: tuple[int, ...] = ()
    st_pairs: tuple[tuple[int, int], ...] = ()

    def __init__(self, pivots: Iterable[int] = (), st_pairs: Iterable[tuple[int, int]] = ()):
        object.__setattr__(self, "pivots", tuple(int(k) for k in pivots))
        pairs = tuple((int(i), int(j)) for i, j in st_pairs if i != j)
        object.__setattr__(self, "st_pairs", pairs)

    def check(self, n: int) -> None:
        for k in self.pivots:
            if not 0 <= k < n:
                raise InvalidInputError(f"pivot {k} out of range for n={n}")
        for i, j in self.st_pairs:
            if not (0 <= i < n and 0 <= j < n):
                raise InvalidInputError(f"pair ({i},{j}) out of range for n={n}")

    def pair_index(self):
        if not self.st_pairs:
            return np.empty(0, dtype=int), np.empty(0, dtype=int)
        arr = np.asarray(self.st_pairs, dtype=int)
        return arr[:, 0], arr[:, 1]


def _square(M, name: str) -> np.ndarray:
    A = np.array(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"{name} must be a square matrix")
    return A


def u_proj(U_tilde, scope: ProjectionScope | None = None) -> np.ndarray:
    """Tighten upper bounds with ``U[i,j] = min(U[i,j], U[i,k] + U[k,j])``."""
    U = _square(U_tilde, "U_tilde")
    if np.any(U < -ATOL) or np.any(np.abs(np.diag(U)) > ATOL):
        raise InvalidInputError("U_tilde must be nonnegative with zero diagonal")
    if scope is None:
        return floyd_warshall_min(U)
    scope.check(U.shape[0])
    I, J = scope.pair_index()
    for k in scope.pivots:
        # updates within one pivot never touch row/column k, so a vector step
        # matches the sequential loop exactly
        U[I, J] = np.minimum(U[I, J], U[I, k] + U[k, J])
    return U


def l_proj(L_tilde, U, scope: ProjectionScope | None = None) -> np.ndarray:
    """Raise lower bounds with ``L[i,j] = max(L[i,j], L[i,k] - U[j,k], L[k,j] - U[k,i])``."""
    L = _square(L_tilde, "L_tilde")
    U = _square(U, "U")
    if L.shape != U.shape:
        raise InvalidInputError("L_tilde and U shapes differ")
    if np.any(L > U + ATOL):
        i, j = np.argwhere(L > U + ATOL)[0]
        raise InvalidInputError(f"L_tilde exceeds U at ({i},{j}): {L[i, j]} > {U[i, j]}")
    L = np.maximum(L, 0.0)
    n = L.shape[0]
    if scope is None:
        for k in range(n):
            cand = np.maximum(L[:, k, None] - U[None, :, k], L[None, k, :] - U[k, :, None])
            np.maximum(L, cand, out=L)
        return L
    scope.check(n)
    I, J = scope.pair_index()
    for k in scope.pivots:
        L[I, J] = np.maximum(L[I, J], np.maximum(L[I, k] - U[J, k], L[k, J] - U[k, I]))
    return L


def lu_proj(L_tilde, U_tilde, scope: ProjectionScope | None = None):
    """Project (L_tilde, U_tilde) to the tightest valid bounds; returns ``(L, U)``."""
    U = u_proj(U_tilde, scope)
    L = l_proj(L_tilde, U, scope)
    return L, U


def lu_proj_fast(L, U, pivots, rows, cols) -> None:
    """In-place scoped projection on the pairs ``zip(rows, cols)``.

    Same updates as ``lu_proj(L, U, ProjectionScope(pivots, pairs))`` without
    copying the matrices; the caller guarantees valid indices.
    """
    for k in pivots:
        U[rows, cols] = np.minimum(U[rows, cols], U[rows, k] + U[k, cols])
    for k in pivots:
        L[rows, cols] = np.maximum(L[rows, cols], np.maximum(L[rows, k] - U[cols, k], L[k, cols] - U[k, rows]))


def full_scope(n: int) -> ProjectionScope:
    """Scope equivalent to the unrestricted sweep (every pivot, every pair)."""
    return ProjectionScope(range(n), ((i, j) for i in range(n) for j in range(n)))


# -- certificates ------------------------------------------------------------

@dataclass
class CertificateReport:
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def __bool__(self):
        return self.passed

    def __str__(self):
        if self.passed:
            return "certificate: pass"
        return "certificate: FAIL\n  " + "\n  ".join(self.failures)


def certificate_check(L_tilde, U_tilde, L, U, r: float | None = None, atol: float = ATOL) -> CertificateReport:
    """Check the optimality certificate of a projection result.

    Verifies U is a hemimetric, L lies in L(U), the outputs only moved in the
    allowed direction, and each changed entry is supported by some pivot:
    ``U[i,j] == U[i,k] + U[k,j]`` or ``L[i,j] == max(L[i,k] - U[j,k], L[k,j] - U[k,i])``.
    """
    Lt, Ut = np.asarray(L_tilde, float), np.asarray(U_tilde, float)
    L, U = np.asarray(L, float), np.asarray(U, float)
    rep = CertificateReport()
    if not (Lt.shape == Ut.shape == L.shape == U.shape):
        rep.failures.append("shape mismatch")
        return rep
    n = U.shape[0]
    r = float(np.max(Ut)) if r is None else r

    for v in validate_hemimetric(U, r, atol):
        rep.failures.append(f"U not a hemimetric: {v}")

    diag = np.abs(np.diag(L)) > atol
    for i in np.nonzero(diag)[0]:
        rep.failures.append(f"L diagonal nonzero at ({i},{i})")
    for i, j in np.argwhere(L < -atol):
        rep.failures.append(f"L negative at ({i},{j})")
    for i, j in np.argwhere(L > U + atol):
        rep.failures.append(f"L above U at ({i},{j})")
    for i, j in np.argwhere(U > Ut + atol):
        rep.failures.append(f"U increased at ({i},{j})")
    for i, j in np.argwhere(L < Lt - atol):
        rep.failures.append(f"L decreased at ({i},{j})")

    # membership in L(U): cand[i, j, k] = max(L[i,k] - U[j,k], L[k,j] - U[k,i])
    cand = np.maximum(L[:, None, :] - U[None, :, :], L.T[None, :, :] - U.T[:, None, :])
    idx = np.arange(n)
    mask = np.ones((n, n, n), dtype=bool)
    mask[idx, :, idx] = False  # k == i
    mask[:, idx, idx] = False  # k == j
    cand_m = np.where(mask, cand, -np.inf)
    best = cand_m.max(axis=2) if n > 2 else np.full((n, n), -np.inf)
    for i, j in np.argwhere(best > L + atol):
        if i != j:
            rep.failures.append(f"L not in L(U): ({i},{j}) below a supported value by {best[i, j] - L[i, j]:.3g}")

    # support: unchanged, or tight through some pivot k not in {i, j}
    via = U[:, None, :] + U.T[None, :, :]  # via[i, j, k] = U[i,k] + U[k,j]
    via = np.where(mask, via, np.inf)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if abs(U[i, j] - Ut[i, j]) > atol and not np.any(np.abs(via[i, j] - U[i, j]) <= atol):
                rep.failures.append(f"U unsupported decrease at ({i},{j})")
            if abs(L[i, j] - Lt[i, j]) > atol and not np.any(np.abs(cand_m[i, j] - L[i, j]) <= atol):
                rep.failures.append(f"L unsupported increase at ({i},{j})")
    return rep


# -- grid enumeration oracle ---------------------------------------------------

MAX_VISITS = 10 ** 8


class _GridSearch:
    """Depth-first search for grid hemimetrics inside per-entry integer domains.

    Pruning is interval bounds-consistency on the triangle constraints; a
    candidate is accepted only after an explicit check of every triangle.
    """

    def __init__(self, n: int, top: int, lo: np.ndarray, hi: np.ndarray, max_visits: int):
        self.n = n
        self.top = top
        self.lo0 = lo
        self.hi0 = hi
        self.pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
        self.triples = [(i, k, j) for i, k, j in permutations(range(n), 3)]
        self.visits = 0
        self.max_visits = max_visits

    def _propagate(self, lo, hi) -> bool:
        changed = True
        while changed:
            changed = False
            for i, k, j in self.triples:
                # D[i,j] <= D[i,k] + D[k,j]
                cap = hi[i, k] + hi[k, j]
                if hi[i, j] > cap:
                    hi[i, j] = cap
                    changed = True
                need = lo[i, j] - hi[k, j]
                if lo[i, k] < need:
                    lo[i, k] = need
                    changed = True
                need = lo[i, j] - hi[i, k]
                if lo[k, j] < need:
                    lo[k, j] = need
                    changed = True
            if np.any(lo > hi):
                return False
        return True

    def _valid(self, D) -> bool:
        return all(D[i, j] <= D[i, k] + D[k, j] for i, k, j in self.triples)

    def find(self, lo=None, hi=None):
        """Return some integer hemimetric within the domains, or None."""
        lo = self.lo0.copy() if lo is None else lo
        hi = self.hi0.copy() if hi is None else hi
        return self._dfs(lo, hi)

    def _dfs(self, lo, hi):
        self.visits += 1
        if self.visits > self.max_visits:
            raise ResourceLimitError(f"grid enumeration exceeded {self.max_visits} visits")
        if not self._propagate(lo, hi):
            return None
        width = hi - lo
        open_pairs = [(width[p], p) for p in self.pairs if width[p] > 0]
        if not open_pairs:
            return lo.copy() if self._valid(lo) else None
        _, (i, j) = min(open_pairs)
        for v in range(int(lo[i, j]), int(hi[i, j]) + 1):
            lo2, hi2 = lo.copy(), hi.copy()
            lo2[i, j] = hi2[i, j] = v
            found = self._dfs(lo2, hi2)
            if found is not None:
                return found
        return None


def _label_domains(data: Sequence[LabeledDatum], n: int, top: int, step: float):
    lo = np.zeros((n, n), dtype=np.int64)
    hi = np.full((n, n), top, dtype=np.int64)
    np.fill_diagonal(hi, 0)
    for d in data:
        q = d.query
        if not (0 <= q.i < n and 0 <= q.j < n):
            raise InvalidInputError(f"datum {q} out of range for n={n}")
        units = q.c / step
        if d.label == 1:  # D <= c
            hi[q.i, q.j] = min(hi[q.i, q.j], math.floor(units + 1e-9))
        else:  # D >= c (closed half-space)
            lo[q.i, q.j] = max(lo[q.i, q.j], math.ceil(units - 1e-9))
    return lo, hi


def brute_force_bounds(data: Sequence[LabeledDatum], n: int, r: float, grid_step: float,
                       max_visits: int = MAX_VISITS):
    """Elementwise min/max over all grid hemimetrics consistent with ``data``.

    Entries range over ``{0, grid_step, ..., r}``. Labels are closed
    half-spaces: ``y=1`` means ``D <= c`` and ``y=0`` means ``D >= c``.
    Returns ``(L_min, U_max)`` as float matrices.
    """
    if n > 6:
        raise InvalidInputError("grid enumeration oracle supports n <= 6")
    top = round(r / grid_step)
    if abs(top * grid_step - r) > 1e-9:
        raise InvalidInputError("r must be a multiple of grid_step")
    lo, hi = _label_domains(data, n, top, grid_step)
    search = _GridSearch(n, top, lo, hi, max_visits)
    witness = search.find()
    if witness is None:
        raise InfeasibleError("no grid hemimetric is consistent with the labels")
    best_lo = witness.copy()
    best_hi = witness.copy()
    for i, j in search.pairs:
        # largest feasible value: try from the top down until one is feasible
        for v in range(int(hi[i, j]), int(best_hi[i, j]), -1):
            lo2, hi2 = lo.copy(), hi.copy()
            lo2[i, j] = max(lo2[i, j], v)
            hi2[i, j] = v
            w = search.find(lo2, hi2)
            if w is not None:
                np.maximum(best_hi, w, out=best_hi)
                np.minimum(best_lo, w, out=best_lo)
                break
        for v in range(int(lo[i, j]), int(best_lo[i, j])):
            lo2, hi2 = lo.copy(), hi.copy()
            lo2[i, j] = v
            hi2[i, j] = min(hi2[i, j], v)
            w = search.find(lo2, hi2)
            if w is not None:
                np.maximum(best_hi, w, out=best_hi)
                np.minimum(best_lo, w, out=best_lo)
                break
    return best_lo * grid_step, best_hi * grid_step
