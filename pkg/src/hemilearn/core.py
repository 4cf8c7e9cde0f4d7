"""Distance matrices, bound states and the decrease-only hemimetric closure."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

ATOL = 1e-9
GAP_TOL = 1e-12


class InvalidInputError(ValueError):
    pass


class InfeasibleError(RuntimeError):
    """Raised when no hemimetric is consistent with the observed constraints."""


class Violation(NamedTuple):
    kind: str  # "negative" | "diagonal" | "above-r" | "triangle"
    i: int
    j: int
    k: int | None = None
    amount: float = 0.0

    def __str__(self):
        if self.kind == "triangle":
            return f"triangle ({self.i},{self.k},{self.j}) exceeded by {self.amount:.3g}"
        return f"{self.kind} at ({self.i},{self.j}) by {self.amount:.3g}"


@dataclass
class DistanceMatrix:
    """An n x n matrix of distances bounded by r.

    Rows are sources: ``entries[i, j]`` is the distance from item i to item j.
    Construction pins the diagonal to zero; validity of the triangle
    inequalities is checked separately by :func:`validate_hemimetric`.
    """

    entries: np.ndarray
    r: float = 1.0
    validated: bool = False

    def __post_init__(self):
        self.entries = np.array(self.entries, dtype=float)
        if self.entries.ndim != 2 or self.entries.shape[0] != self.entries.shape[1]:
            raise InvalidInputError(f"expected a square matrix, got shape {self.entries.shape}")
        np.fill_diagonal(self.entries, 0.0)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __getitem__(self, idx):
        return self.entries[idx]

    def linf(self, other) -> float:
        other = other.entries if isinstance(other, DistanceMatrix) else np.asarray(other)
        return float(np.max(np.abs(self.entries - other))) if self.n else 0.0


@dataclass
class BoundsState:
    """Elementwise lower/upper bounds ``lower <= D <= upper`` on an unknown hemimetric."""

    lower: np.ndarray
    upper: np.ndarray
    r: float = 1.0

    @classmethod
    def fresh(cls, n: int, r: float = 1.0) -> "BoundsState":
        upper = np.full((n, n), float(r))
        np.fill_diagonal(upper, 0.0)
        return cls(np.zeros((n, n)), upper, float(r))

    @property
    def n(self) -> int:
        return self.upper.shape[0]

    @property
    def gaps(self) -> np.ndarray:
        return self.upper - self.lower

    def copy(self) -> "BoundsState":
        return BoundsState(self.lower.copy(), self.upper.copy(), self.r)

    def check_well_formed(self, atol: float = ATOL) -> None:
        L, U = self.lower, self.upper
        if L.shape != U.shape or L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise InvalidInputError("lower/upper must be square matrices of equal shape")
        if np.any(L < -atol) or np.any(U > self.r + atol) or np.any(L > U + atol):
            raise InvalidInputError("bounds must satisfy 0 <= L <= U <= r")
        if np.any(np.abs(np.diag(L)) > atol) or np.any(np.abs(np.diag(U)) > atol):
            raise InvalidInputError("diagonal bounds must be zero")

    def contains(self, truth, atol: float = ATOL) -> bool:
        D = truth.entries if isinstance(truth, DistanceMatrix) else np.asarray(truth)
        return bool(np.all(self.lower <= D + atol) and np.all(D <= self.upper + atol))


@dataclass(frozen=True)
class Query:
    i: int
    j: int
    c: float

    def __post_init__(self):
        if self.i == self.j:
            raise InvalidInputError(f"query on the diagonal ({self.i},{self.j})")


@dataclass(frozen=True)
class LabeledDatum:
    query: Query
    label: int
    user_query_cost: int = 1


def _as_array(M) -> tuple[np.ndarray, float | None]:
    if isinstance(M, DistanceMatrix):
        return M.entries, M.r
    return np.asarray(M, dtype=float), None


def validate_hemimetric(M, r: float | None = None, atol: float = ATOL) -> list[Violation]:
    """Return every violated hemimetric constraint of ``M``; empty means valid."""
    A, own_r = _as_array(M)
    r = own_r if r is None else r
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInputError("matrix must be square")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("matrix has non-finite entries")
    out: list[Violation] = []
    for i, j in zip(*np.nonzero(A < -atol)):
        out.append(Violation("negative", int(i), int(j), amount=float(-A[i, j])))
    for i in np.nonzero(np.abs(np.diag(A)) > atol)[0]:
        out.append(Violation("diagonal", int(i), int(i), amount=float(abs(A[i, i]))))
    if r is not None:
        for i, j in zip(*np.nonzero(A > r + atol)):
            out.append(Violation("above-r", int(i), int(j), amount=float(A[i, j] - r)))
    # excess[i, k, j] = A[i, j] - (A[i, k] + A[k, j])
    excess = A[:, None, :] - (A[:, :, None] + A[None, :, :])
    for i, k, j in zip(*np.nonzero(excess > atol)):
        if len({int(i), int(j), int(k)}) == 3:
            out.append(Violation("triangle", int(i), int(j), int(k), float(excess[i, k, j])))
    return out


def is_hemimetric(M, r: float | None = None, atol: float = ATOL) -> bool:
    return not validate_hemimetric(M, r, atol)


def floyd_warshall_min(W: np.ndarray) -> np.ndarray:
    """All-pairs shortest paths over the dense weight matrix ``W`` (copy returned)."""
    D = np.array(W, dtype=float)
    for k in range(D.shape[0]):
        # row k and column k are fixed points while pivoting on k (D[k, k] == 0)
        np.minimum(D, D[:, k, None] + D[None, k, :], out=D)
    return D


def hemimetric_closure(W, r: float = 1.0) -> DistanceMatrix:
    """Elementwise-largest hemimetric below ``clamp(W, 0, r)``.

    Raises :class:`InvalidInputError` on negative entries or a nonzero diagonal.
    """
    A = np.array(W.entries if isinstance(W, DistanceMatrix) else W, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInputError("matrix must be square")
    if np.any(A < 0):
        raise InvalidInputError("closure input has negative entries")
    if np.any(np.diag(A) != 0):
        raise InvalidInputError("closure input has a nonzero diagonal")
    A = np.minimum(A, r)
    return DistanceMatrix(floyd_warshall_min(A), r, validated=True)


def max_gap(B: BoundsState) -> tuple[tuple[int, int], float]:
    """Lexicographically-first off-diagonal pair with the largest ``U - L``."""
    n = B.n
    if n < 2:
        raise InvalidInputError("max_gap needs at least two items")
    gaps = B.upper - B.lower
    np.fill_diagonal(gaps, -np.inf)
    flat = int(np.argmax(gaps))
    i, j = divmod(flat, n)
    return (i, j), float(gaps[i, j])


# -- instance file ---------------------------------------------------------

def write_instance(path, M: DistanceMatrix) -> None:
    lines = [f"# hemimetric n={M.n} r={M.r:.12g}"]
    for row in M.entries:
        lines.append(",".join(f"{x:.12g}" for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_instance(path) -> DistanceMatrix:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("# hemimetric"):
        raise InvalidInputError(f"{path}: missing '# hemimetric n=<n> r=<r>' header")
    fields = dict(tok.split("=", 1) for tok in text[0][len("# hemimetric"):].split())
    try:
        n, r = int(fields["n"]), float(fields["r"])
    except (KeyError, ValueError) as exc:
        raise InvalidInputError(f"{path}: bad header {text[0]!r}") from exc
    rows = [ln for ln in text[1:] if ln.strip()]
    if len(rows) != n:
        raise InvalidInputError(f"{path}: expected {n} rows, found {len(rows)}")
    data = []
    for lineno, ln in enumerate(rows, start=2):
        try:
            vals = [float(x) for x in ln.split(",")]
        except ValueError as exc:
            raise InvalidInputError(f"{path}:{lineno}: unparsable row") from exc
        if len(vals) != n:
            raise InvalidInputError(f"{path}:{lineno}: expected {n} values, got {len(vals)}")
        data.append(vals)
    return DistanceMatrix(np.array(data).reshape(n, n), r)
