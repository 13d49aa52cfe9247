"""Map pairs, regions, and admissibility of triples and homotopies.

A torus map is stored as a lift R^n -> R^n whose deviation from an integer
linear part is 1-periodic.  Torus regions are boxes in the universal cover
with side at most 1; a side of exactly 1 is a full circle and has no
boundary in that direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import EvalError, LinearPartMismatch, PeriodicityError
from .expr import MapExpr, linear_combination, parse_map
from .numcore import IntMatrix

EUCLIDEAN = "euclidean"
TORUS = "torus"

DEFAULT_SAMPLES_PER_FACE = 64
DEFAULT_GAP_THRESHOLD = 1e-6
DEFAULT_T_SAMPLES = 64
MAX_POINTS_PER_FACE = 1 << 18
PERIODICITY_TOLERANCE = 1e-9


def lattice_reduce(v) -> np.ndarray:
    """Representative of v modulo Z^n in [-0.5, 0.5)^n."""
    v = np.asarray(v, dtype=float)
    return v - np.floor(v + 0.5)


def wrap_unit(x) -> np.ndarray:
    """Representative of x modulo Z^n in [0, 1)^n."""
    x = np.asarray(x, dtype=float)
    y = x - np.floor(x)
    return np.where(y >= 1.0, 0.0, y)


@dataclass(frozen=True)
class Space:
    kind: str
    n: int
    label: str = "X"

    def __post_init__(self):
        if self.kind not in (EUCLIDEAN, TORUS):
            raise ValueError(f"unknown space kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("dimension must be at least 1")

    @property
    def is_torus(self) -> bool:
        return self.kind == TORUS


def infer_linear_part(m: MapExpr, samples: int = 16) -> IntMatrix:
    """Read the integer linear part of a torus lift off f(x + e_i) - f(x)."""
    rng = np.random.default_rng(0)
    X = rng.random((samples, m.n))
    base, bad = m.values(X)
    cols = []
    for i in range(m.n):
        shifted, bad_i = m.values(X + np.eye(m.n)[i])
        if (bad | bad_i).any():
            raise EvalError(f"cannot evaluate {m.source!r} while inferring its linear part")
        diff = shifted - base
        col = np.round(diff.mean(axis=0))
        if np.abs(diff - col).max() > PERIODICITY_TOLERANCE:
            raise PeriodicityError(f"{m.source!r} has no integer linear part")
        cols.append(col)
    return IntMatrix.of(np.array(cols).T)


def _check_periodic(m: MapExpr, F: IntMatrix, name: str) -> None:
    if F.n != m.n:
        raise ValueError(f"linear part of {name} has size {F.n}, map has dimension {m.n}")
    rng = np.random.default_rng(0)
    X = rng.random((100, m.n))
    base, bad = m.values(X)
    Fa = F.to_array()
    for i in range(m.n):
        shifted, bad_i = m.values(X + np.eye(m.n)[i])
        if (bad | bad_i).any():
            raise EvalError(f"cannot evaluate {name} = {m.source!r} on the torus")
        err = np.abs(shifted - base - Fa[:, i]).max()
        if not err < PERIODICITY_TOLERANCE:
            raise PeriodicityError(
                f"{name} = {m.source!r} is not lattice-equivariant for linear part "
                f"{F.to_text()} (error {err:.3g} along e{i + 1})"
            )


@dataclass(frozen=True)
class MapPair:
    f: MapExpr
    g: MapExpr
    domain: Space
    codomain: Space
    linear_f: IntMatrix | None = None
    linear_g: IntMatrix | None = None

    def __post_init__(self):
        n = self.domain.n
        if not (self.f.n == self.g.n == n == self.codomain.n):
            raise ValueError("maps and spaces must share one dimension")
        if self.domain.kind != self.codomain.kind:
            raise ValueError("domain and codomain must both be Euclidean or both tori")
        if self.is_torus:
            F = IntMatrix.of(self.linear_f) if self.linear_f is not None else infer_linear_part(self.f)
            G = IntMatrix.of(self.linear_g) if self.linear_g is not None else infer_linear_part(self.g)
            _check_periodic(self.f, F, "f")
            _check_periodic(self.g, G, "g")
            object.__setattr__(self, "linear_f", F)
            object.__setattr__(self, "linear_g", G)

    @classmethod
    def euclidean(cls, f: str, g: str, n: int, domain_label="X", codomain_label=None):
        codomain_label = domain_label if codomain_label is None else codomain_label
        return cls(parse_map(f, n), parse_map(g, n),
                   Space(EUCLIDEAN, n, domain_label), Space(EUCLIDEAN, n, codomain_label))

    @classmethod
    def torus(cls, f: str, g: str, n: int, linear_f=None, linear_g=None,
              domain_label="T", codomain_label=None):
        codomain_label = domain_label if codomain_label is None else codomain_label
        return cls(parse_map(f, n), parse_map(g, n),
                   Space(TORUS, n, domain_label), Space(TORUS, n, codomain_label),
                   linear_f, linear_g)

    @property
    def n(self) -> int:
        return self.domain.n

    @property
    def is_torus(self) -> bool:
        return self.codomain.is_torus

    @property
    def is_selfmap(self) -> bool:
        return self.domain.label == self.codomain.label

    def with_maps(self, f: MapExpr | None = None, g: MapExpr | None = None) -> "MapPair":
        return replace(self, f=self.f if f is None else f, g=self.g if g is None else g)

    def raw_difference(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """g - f on a batch, without lattice reduction."""
        fv, bf = self.f.values(X)
        gv, bg = self.g.values(X)
        return gv - fv, bf | bg

    def residual(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        h, bad = self.raw_difference(X)
        return (lattice_reduce(h) if self.is_torus else h), bad

    def residual_and_jacobian(self, X: np.ndarray):
        fv, Jf, bf = self.f.values_and_jacobians(X)
        gv, Jg, bg = self.g.values_and_jacobians(X)
        h = gv - fv
        if self.is_torus:
            h = lattice_reduce(h)
        return h, Jg - Jf, bf | bg

    def describe(self) -> dict:
        out = {
            "f": self.f.source,
            "g": self.g.source,
            "n": self.n,
            "space": "torus" if self.is_torus else "rn",
            "domain_label": self.domain.label,
            "codomain_label": self.codomain.label,
        }
        if self.is_torus:
            out["linear_f"] = self.linear_f.to_text()
            out["linear_g"] = self.linear_g.to_text()
        return out


@dataclass(frozen=True)
class Region:
    lower: tuple
    upper: tuple
    periodic: bool = False

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or not lo:
            raise ValueError("region bounds must be non-empty and of equal length")
        if any(not a < b for a, b in zip(lo, hi)):
            raise ValueError("region needs lower < upper on every axis")
        if self.periodic and any(b - a > 1.0 for a, b in zip(lo, hi)):
            raise ValueError("torus boxes have side at most 1")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def box(cls, lower, upper, periodic: bool = False) -> "Region":
        return cls(tuple(lower), tuple(upper), periodic)

    @classmethod
    def cube(cls, a: float, b: float, n: int) -> "Region":
        return cls((a,) * n, (b,) * n)

    @classmethod
    def torus(cls, n: int) -> "Region":
        return cls((0.0,) * n, (1.0,) * n, True)

    @property
    def n(self) -> int:
        return len(self.lower)

    @property
    def full_axes(self) -> tuple:
        if not self.periodic:
            return (False,) * self.n
        return tuple(b - a == 1.0 for a, b in zip(self.lower, self.upper))

    @property
    def is_full(self) -> bool:
        return self.periodic and all(self.full_axes)

    def contains(self, X) -> np.ndarray:
        """Open-box membership for a batch of points (rows)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        lo = np.array(self.lower)
        hi = np.array(self.upper)
        if self.periodic:
            X = lo + wrap_unit(X - lo)
        inside = (X > lo) & (X < hi)
        inside[:, list(self.full_axes)] = True
        return inside.all(axis=1)

    def to_text(self) -> str:
        if self.is_full and all(a == 0.0 for a in self.lower):
            return "torus"
        return "box:" + ";".join(f"{a!r},{b!r}" for a, b in zip(self.lower, self.upper))


def parse_region(text: str, n: int, periodic: bool = False) -> Region:
    """Parse ``"box: l1,u1; l2,u2"`` or ``"torus"``."""
    text = text.strip()
    if text == "torus":
        if not periodic:
            raise ValueError("'torus' region requires a torus space")
        return Region.torus(n)
    if not text.startswith("box:"):
        raise ValueError(f"region must be 'torus' or 'box: l,u; ...', got {text!r}")
    try:
        pairs = [tuple(float(v) for v in p.split(",")) for p in text[4:].split(";")]
    except ValueError as exc:
        raise ValueError(f"malformed region {text!r}") from exc
    if len(pairs) != n or any(len(p) != 2 for p in pairs):
        raise ValueError(f"region {text!r} does not describe a box in dimension {n}")
    return Region(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs), periodic)


def boundary_points(region: Region, samples_per_face: int) -> np.ndarray:
    """Uniform grids on every face of the region's boundary.

    Closed axes use ``linspace(lower, upper, samples)`` so grids with
    ``samples = 2**k + 1`` nest; full torus axes use ``samples`` equally
    spaced points around the circle.
    """
    n = region.n
    full = region.full_axes
    faces = [i for i in range(n) if not full[i]]
    if not faces:
        return np.empty((0, n))
    per_axis = samples_per_face
    if n > 1 and per_axis ** (n - 1) > MAX_POINTS_PER_FACE:
        per_axis = max(2, int(MAX_POINTS_PER_FACE ** (1.0 / (n - 1))))
    axes = []
    for j in range(n):
        a, b = region.lower[j], region.upper[j]
        if full[j]:
            axes.append(a + np.arange(per_axis) / per_axis)
        else:
            axes.append(np.linspace(a, b, per_axis))
    blocks = []
    for i in faces:
        others = [axes[j] for j in range(n) if j != i]
        grid = np.stack(np.meshgrid(*others, indexing="ij"), axis=-1).reshape(-1, n - 1) if others else np.empty((1, 0))
        for side in (region.lower[i], region.upper[i]):
            pts = np.insert(grid, i, side, axis=1)
            blocks.append(pts)
    return np.concatenate(blocks)


@dataclass(frozen=True)
class AdmissibilityCertificate:
    admissible: bool
    boundary_gap: float
    samples_per_face: int
    gap_threshold: float
    points_sampled: int = 0

    def to_dict(self) -> dict:
        return {
            "admissible": self.admissible,
            "boundary_gap": self.boundary_gap,
            "samples_per_face": self.samples_per_face,
            "gap_threshold": self.gap_threshold,
            "points_sampled": self.points_sampled,
        }


def _check_region(pair: MapPair, region: Region) -> None:
    if region.n != pair.n:
        raise ValueError(f"region has dimension {region.n}, maps have {pair.n}")
    if region.periodic != pair.is_torus:
        raise ValueError("torus pairs need torus regions and Euclidean pairs need boxes")


def check_admissible(pair: MapPair, region: Region,
                     samples_per_face: int = DEFAULT_SAMPLES_PER_FACE,
                     gap_threshold: float = DEFAULT_GAP_THRESHOLD) -> AdmissibilityCertificate:
    """Heuristic certificate that no coincidence lies on the region boundary.

    The boundary gap is the minimum of |g - f| (lattice-reduced on the torus)
    over sampled boundary points; a full torus has no boundary at all.
    """
    if samples_per_face < 2:
        raise ValueError("samples_per_face must be at least 2")
    _check_region(pair, region)
    if region.is_full:
        return AdmissibilityCertificate(True, math.inf, samples_per_face, gap_threshold, 0)
    P = boundary_points(region, samples_per_face)
    h, bad = pair.residual(P)
    if bad.any():
        x = P[np.argmax(bad)]
        raise EvalError(f"maps cannot be evaluated on the region boundary at {x.tolist()}")
    gap = float(np.linalg.norm(h, axis=1).min())
    return AdmissibilityCertificate(gap > gap_threshold, gap, samples_per_face, gap_threshold, len(P))


# -- straight-line homotopies -------------------------------------------------

@dataclass(frozen=True)
class HomotopyPair:
    """f_t = (1-t) f0 + t f1 and g_t likewise, admissible on ``region``."""

    pair0: MapPair
    pair1: MapPair
    region: Region
    t_samples: int
    min_gap: float = math.inf

    @property
    def f0(self) -> MapExpr:
        return self.pair0.f

    @property
    def g0(self) -> MapExpr:
        return self.pair0.g

    @property
    def f1(self) -> MapExpr:
        return self.pair1.f

    @property
    def g1(self) -> MapExpr:
        return self.pair1.g

    def at(self, t: float) -> MapPair:
        if t == 0.0:
            return self.pair0
        if t == 1.0:
            return self.pair1
        f = linear_combination([(1.0 - t, self.f0), (t, self.f1)])
        g = linear_combination([(1.0 - t, self.g0), (t, self.g1)])
        return self.pair0.with_maps(f, g)


@dataclass(frozen=True)
class InadmissibleAt:
    t: float
    boundary_gap: float


def _segment_distance(a: np.ndarray, d: np.ndarray, torus: bool) -> tuple[np.ndarray, np.ndarray]:
    """Distance from the segments a + s d (s in [0,1]) to 0, or to Z^n on the torus.

    Works on stacks of shape (..., n); returns (distance, minimising s).
    """
    dd = np.einsum("...i,...i->...", d, d)
    safe = np.where(dd > 0, dd, 1.0)

    def to_point(k):
        s = np.clip(np.einsum("...i,...i->...", k - a, d) / safe, 0.0, 1.0)
        s = np.where(dd > 0, s, 0.0)
        r = a + s[..., None] * d - k
        return np.sqrt(np.einsum("...i,...i->...", r, r)), s

    if not torus:
        return to_point(np.zeros_like(a))
    a = a - np.round(a)
    steps = int(math.ceil(2.0 * float(np.abs(d).max(initial=0.0)))) + 2
    best = np.full(a.shape[:-1], np.inf)
    best_s = np.zeros(a.shape[:-1])
    for s0 in np.linspace(0.0, 1.0, steps):
        k = np.round(a + s0 * d)
        dist, s = to_point(k)
        better = dist < best
        best = np.where(better, dist, best)
        best_s = np.where(better, s, best_s)
    return best, best_s


def straight_line_homotopy(pair0: MapPair, pair1: MapPair, region: Region,
                           t_samples: int = DEFAULT_T_SAMPLES,
                           gap_threshold: float = DEFAULT_GAP_THRESHOLD,
                           samples_per_face: int = DEFAULT_SAMPLES_PER_FACE):
    """Check admissibility of the straight-line homotopy between two pairs.

    Since g_t - f_t = (1-t) h0 + t h1 is affine in t at each boundary point,
    the gap is minimised exactly over each interval of the uniform t grid,
    so a coincidence crossing the boundary between grid times is still seen.
    Returns a HomotopyPair, or InadmissibleAt with the first failing time.
    """
    if t_samples < 2:
        raise ValueError("t_samples must be at least 2")
    if pair0.n != pair1.n or pair0.domain != pair1.domain or pair0.codomain != pair1.codomain:
        raise ValueError("homotopy endpoints must share spaces and dimension")
    if pair0.is_torus and (pair0.linear_f != pair1.linear_f or pair0.linear_g != pair1.linear_g):
        raise LinearPartMismatch("straight-line homotopy on the torus needs equal linear parts")
    _check_region(pair0, region)
    if region.is_full:
        return HomotopyPair(pair0, pair1, region, t_samples)

    P = boundary_points(region, samples_per_face)
    h0, b0 = pair0.raw_difference(P)
    h1, b1 = pair1.raw_difference(P)
    if (b0 | b1).any():
        raise EvalError("homotopy endpoints cannot be evaluated on the region boundary")
    ts = np.linspace(0.0, 1.0, t_samples)
    dh = h1 - h0
    starts = h0[None] + ts[:-1, None, None] * dh[None]
    steps = (ts[1:] - ts[:-1])[:, None, None] * dh[None]
    dist, s = _segment_distance(starts, steps, pair0.is_torus)
    per_interval = dist.min(axis=1)
    failing = np.nonzero(per_interval <= gap_threshold)[0]
    if failing.size:
        j = int(failing[0])
        k = int(np.argmin(dist[j]))
        t = float(ts[j] + s[j, k] * (ts[j + 1] - ts[j]))
        return InadmissibleAt(t, float(per_interval[j]))
    return HomotopyPair(pair0, pair1, region, t_samples, float(per_interval.min()))
