"""Coincidence Lefschetz numbers of torus maps.

On T^n the homology in degree q is the q-th exterior power of Z^n, so the
maps induced by lifts with integer linear parts F, G are exterior powers of
those matrices, and Poincare duality is a signed permutation of the subset
basis.  ``lefschetz_trace`` evaluates the alternating trace sum literally;
``lefschetz_det_oracle`` is the closed form det(G - F) used to check it.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import RangeError, ShapeError
from .numcore import IntMatrix, complement_sign, exterior_power, subsets


@dataclass(frozen=True)
class DualityMatrix:
    """Matrix sending the basis e_J* of H^(n-q) to the basis e_K of H_q."""

    n: int
    q: int
    matrix: IntMatrix

    def inverse(self) -> IntMatrix:
        # signed permutation: the inverse is the transpose
        return self.matrix.T()


@dataclass(frozen=True)
class InducedMaps:
    n: int
    F: IntMatrix
    G: IntMatrix
    homology_f: tuple  # homology_f[q] = exterior_power(F, q)
    cohomology_g: tuple  # cohomology_g[q] = exterior_power(G^T, n - q)


def induced_maps(F, G) -> InducedMaps:
    F, G = _pair(F, G)
    n = F.n
    GT = G.T()
    return InducedMaps(
        n, F, G,
        tuple(exterior_power(F, q) for q in range(n + 1)),
        tuple(exterior_power(GT, n - q) for q in range(n + 1)),
    )


def duality_matrix(n: int, q: int) -> DualityMatrix:
    if not 0 <= q <= n:
        raise RangeError(f"degree {q} outside [0, {n}]")
    rows = subsets(n, q)
    cols = subsets(n, n - q)
    position = {K: i for i, K in enumerate(rows)}
    entries = [[0] * len(cols) for _ in rows]
    for c, J in enumerate(cols):
        entries[position[J.complement()]][c] = complement_sign(J)
    return DualityMatrix(n, q, IntMatrix(tuple(tuple(r) for r in entries)))


def _pair(F, G) -> tuple[IntMatrix, IntMatrix]:
    F = IntMatrix.of(F)
    G = IntMatrix.of(G)
    if F.n != G.n:
        raise ShapeError(f"linear parts have sizes {F.n} and {G.n}")
    return F, G


def lefschetz_terms(F, G) -> list[int]:
    """Unsigned traces tr(D g^(n-q) D^-1 f_q) for q = 0..n."""
    maps = induced_maps(F, G)
    terms = []
    for q in range(maps.n + 1):
        D = duality_matrix(maps.n, q)
        composite = D.matrix @ maps.cohomology_g[q] @ D.inverse() @ maps.homology_f[q]
        terms.append(composite.trace())
    return terms


def lefschetz_trace(F, G) -> int:
    return sum((-1) ** q * t for q, t in enumerate(lefschetz_terms(F, G)))


def lefschetz_det_oracle(F, G) -> int:
    F, G = _pair(F, G)
    return (G - F).det()
