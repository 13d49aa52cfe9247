"""Dense linear algebra at desk scale (n <= 8).

Real matrices are plain numpy arrays.  Integer matrices used for torus
homology are kept as tuples of Python ints so that exterior powers and
Lefschetz traces are exact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import RangeError, ShapeError, SingularError

DEGENERACY_THRESHOLD = 1e-8
_EPS = np.finfo(float).eps


def _square(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {M.shape}")
    return M


def _lu(M: np.ndarray):
    """In-place style LU with partial pivoting.

    Returns (LU, perm, sign, pivots) where LU packs unit-lower L and U.
    """
    A = M.copy()
    n = A.shape[0]
    perm = list(range(n))
    sign = 1.0
    for k in range(n):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        if p != k:
            A[[k, p]] = A[[p, k]]
            perm[k], perm[p] = perm[p], perm[k]
            sign = -sign
        if A[k, k] != 0.0:
            A[k + 1:, k] /= A[k, k]
            A[k + 1:, k + 1:] -= np.outer(A[k + 1:, k], A[k, k + 1:])
    return A, perm, sign


def det(M) -> float:
    M = _square(M)
    n = M.shape[0]
    if n == 1:
        return float(M[0, 0])
    if n == 2:
        return float(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0])
    if n == 3:
        return float(
            M[0, 0] * (M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1])
            - M[0, 1] * (M[1, 0] * M[2, 2] - M[1, 2] * M[2, 0])
            + M[0, 2] * (M[1, 0] * M[2, 1] - M[1, 1] * M[2, 0])
        )
    LU, _, sign = _lu(M)
    return float(sign * np.prod(np.diag(LU)))


def matrix_scale(M) -> float:
    """max(1, max absolute row sum); the unit scale for degeneracy tests."""
    M = np.asarray(M, dtype=float)
    return max(1.0, float(np.abs(M).sum(axis=1).max()))


def sign_det(M, degeneracy_threshold: float = DEGENERACY_THRESHOLD) -> int | None:
    """Sign of det(M), or None when |det| is within the degeneracy band.

    The band is ``threshold * scale**n`` with ``scale = matrix_scale(M)``,
    since the determinant is homogeneous of degree n.
    """
    if degeneracy_threshold <= 0:
        raise ValueError("degeneracy threshold must be positive")
    M = _square(M)
    d = det(M)
    if not np.isfinite(d) or abs(d) <= degeneracy_threshold * matrix_scale(M) ** M.shape[0]:
        return None
    return 1 if d > 0 else -1


def solve(M, b) -> np.ndarray:
    M = _square(M)
    b = np.asarray(b, dtype=float).reshape(-1)
    n = M.shape[0]
    if b.shape != (n,):
        raise ShapeError(f"right-hand side has length {b.size}, expected {n}")
    LU, perm, _ = _lu(M)
    tol = n * _EPS * float(np.abs(M).sum(axis=1).max())
    if tol == 0.0 or np.any(np.abs(np.diag(LU)) <= tol):
        raise SingularError("matrix is singular to working precision")
    y = b[perm].copy()
    for i in range(n):
        y[i] -= LU[i, :i] @ y[:i]
    for i in reversed(range(n)):
        y[i] = (y[i] - LU[i, i + 1:] @ y[i + 1:]) / LU[i, i]
    return y


def batched_solve(Ms: np.ndarray, bs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve a stack of systems; returns (solutions, ok).

    Systems whose determinant is negligible against the product of row norms
    (Hadamard's bound) are reported as not ok instead of raising, so one bad
    Newton seed never stops the batch.
    """
    Ms = np.asarray(Ms, dtype=float)
    bs = np.asarray(bs, dtype=float)
    out = np.full(bs.shape, np.nan)
    with np.errstate(all="ignore"):
        d = np.linalg.det(Ms)
        hadamard = np.prod(np.linalg.norm(Ms, axis=2), axis=1)
        ok = np.isfinite(d) & (np.abs(d) > 1e-14 * hadamard) & (hadamard > 0)
    if ok.any():
        out[ok] = np.linalg.solve(Ms[ok], bs[ok][..., None])[..., 0]
    return out, ok


# -- exact integer matrices --------------------------------------------------

@dataclass(frozen=True)
class IntMatrix:
    rows: tuple

    def __post_init__(self):
        rows = tuple(tuple(int(v) for v in r) for r in self.rows)
        if not rows or any(len(r) != len(rows) for r in rows):
            raise ShapeError("integer matrices must be square and non-empty")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def of(cls, data) -> "IntMatrix":
        if isinstance(data, IntMatrix):
            return data
        arr = np.atleast_2d(np.asarray(data))
        if arr.dtype.kind == "f":
            if not np.all(arr == np.round(arr)):
                raise ValueError("integer matrix has non-integer entries")
            arr = np.round(arr).astype(np.int64)
        return cls(tuple(tuple(int(v) for v in r) for r in arr))

    @classmethod
    def identity(cls, n: int) -> "IntMatrix":
        return cls(tuple(tuple(int(i == j) for j in range(n)) for i in range(n)))

    @classmethod
    def zeros(cls, n: int) -> "IntMatrix":
        return cls(tuple((0,) * n for _ in range(n)))

    @classmethod
    def from_text(cls, text: str) -> "IntMatrix":
        """Parse ``"2,0;0,2"`` (rows by ';', entries by ',')."""
        try:
            rows = [[int(v) for v in r.split(",")] for r in text.strip().split(";")]
        except ValueError as exc:
            raise ValueError(f"malformed integer matrix {text!r}") from exc
        return cls(tuple(tuple(r) for r in rows))

    def to_text(self) -> str:
        return ";".join(",".join(str(v) for v in r) for r in self.rows)

    @property
    def n(self) -> int:
        return len(self.rows)

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def T(self) -> "IntMatrix":
        return IntMatrix(tuple(zip(*self.rows)))

    def __matmul__(self, other: "IntMatrix") -> "IntMatrix":
        cols = list(zip(*other.rows))
        return IntMatrix(tuple(tuple(sum(a * b for a, b in zip(r, c)) for c in cols) for r in self.rows))

    def __sub__(self, other: "IntMatrix") -> "IntMatrix":
        return IntMatrix(tuple(tuple(a - b for a, b in zip(r, s)) for r, s in zip(self.rows, other.rows)))

    def __add__(self, other: "IntMatrix") -> "IntMatrix":
        return IntMatrix(tuple(tuple(a + b for a, b in zip(r, s)) for r, s in zip(self.rows, other.rows)))

    def scaled(self, c: int) -> "IntMatrix":
        return IntMatrix(tuple(tuple(c * a for a in r) for r in self.rows))

    def trace(self) -> int:
        return sum(self.rows[i][i] for i in range(self.n))

    def det(self) -> int:
        return int_det(self.rows)

    def to_array(self) -> np.ndarray:
        return np.array(self.rows, dtype=float)

    def tolist(self) -> list:
        return [list(r) for r in self.rows]


def int_det(rows: Sequence[Sequence[int]]) -> int:
    """Exact determinant by fraction-free (Bareiss) elimination."""
    A = [list(r) for r in rows]
    n = len(A)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if A[k][k] == 0:
            for p in range(k + 1, n):
                if A[p][k] != 0:
                    A[k], A[p] = A[p], A[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[n - 1][n - 1]


# -- subsets and exterior powers ---------------------------------------------

@dataclass(frozen=True, order=True)
class SubsetIndex:
    n: int
    members: tuple

    def __post_init__(self):
        m = tuple(int(v) for v in self.members)
        if any(b <= a for a, b in zip(m, m[1:])) or any(not 1 <= v <= self.n for v in m):
            raise RangeError(f"invalid subset {m} of 1..{self.n}")
        object.__setattr__(self, "members", m)

    def complement(self) -> "SubsetIndex":
        return SubsetIndex(self.n, tuple(i for i in range(1, self.n + 1) if i not in self.members))

    def __len__(self) -> int:
        return len(self.members)


@lru_cache(maxsize=None)
def subsets(n: int, q: int) -> tuple:
    """All q-subsets of 1..n in lexicographic order."""
    if not 0 <= q <= n:
        raise RangeError(f"degree {q} outside [0, {n}]")
    return tuple(SubsetIndex(n, c) for c in itertools.combinations(range(1, n + 1), q))


def exterior_power(M: IntMatrix, q: int) -> IntMatrix:
    M = IntMatrix.of(M)
    basis = subsets(M.n, q)
    if q == 0:
        return IntMatrix(((1,),))
    rows = []
    for I in basis:
        ri = [M.rows[i - 1] for i in I.members]
        rows.append(tuple(
            int_det([[r[j - 1] for j in J.members] for r in ri]) for J in basis
        ))
    return IntMatrix(tuple(rows))


def permutation_sign(seq: Sequence[int]) -> int:
    inversions = sum(1 for a, b in itertools.combinations(seq, 2) if a > b)
    return -1 if inversions % 2 else 1


def complement_sign(J: SubsetIndex) -> int:
    """Sign of the shuffle taking (J, complement(J)) to (1, ..., n)."""
    return permutation_sign(J.members + J.complement().members)
