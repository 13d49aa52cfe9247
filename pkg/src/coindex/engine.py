"""Coincidence search and the sign-of-determinant index.

For a nondegenerate triple the index is the sum over coincidence points p of
sign det(dg_p - df_p).  Degenerate triples are moved to nondegenerate ones by
a small constant shift of f that stays inside the boundary gap, so the
straight-line homotopy back to the original triple is admissible.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from . import numcore
from .errors import EvalError, InadmissibleInput, PerturbationFailure
from .expr import add_constant
from .lefschetz import lefschetz_trace
from .maps import (
    AdmissibilityCertificate,
    MapPair,
    Region,
    check_admissible,
    lattice_reduce,
    wrap_unit,
)

_STEP_FLOOR = 4 * np.finfo(float).eps


@dataclass(frozen=True)
class SolverConfig:
    grid_per_axis: int = 16
    max_iterations: int = 50
    root_tolerance: float = 1e-12
    dedupe_radius: float = 1e-8
    degeneracy_threshold: float = 1e-8
    shift_fraction: float = 0.25
    max_shift: float = 0.1
    max_retries: int = 16
    gap_threshold: float = 1e-6
    samples_per_face: int = 64
    t_samples: int = 64
    skip_if_nondegenerate: bool = True

    def to_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        return ",".join(f"{k}={_fmt(v)}" for k, v in asdict(self).items())

    @classmethod
    def from_text(cls, text: str, base: "SolverConfig | None" = None) -> "SolverConfig":
        """Parse ``key=value`` items separated by commas or newlines."""
        base = base or cls()
        types = {f.name: f.type for f in fields(cls)}
        updates = {}
        for item in text.replace("\n", ",").split(","):
            item = item.strip()
            if not item:
                continue
            if "=" not in item:
                raise ValueError(f"config item {item!r} is not key=value")
            key, value = (s.strip() for s in item.split("=", 1))
            if key not in types:
                raise ValueError(f"unknown config key {key!r}")
            kind = str(types[key])
            if kind == "bool":
                if value.lower() not in ("true", "false", "1", "0"):
                    raise ValueError(f"{key} expects true/false, got {value!r}")
                updates[key] = value.lower() in ("true", "1")
            elif kind == "int":
                updates[key] = int(value)
            else:
                updates[key] = float(value)
        return replace(base, **updates)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v)


class LinearPairClass(enum.Enum):
    NPLUS = "Nplus"
    NMINUS = "Nminus"
    DEGENERATE = "Degenerate"


def classify_linear_pair(A, B, degeneracy_threshold: float = numcore.DEGENERACY_THRESHOLD) -> LinearPairClass:
    s = linear_index(A, B, degeneracy_threshold)
    if s is None:
        return LinearPairClass.DEGENERATE
    return LinearPairClass.NPLUS if s > 0 else LinearPairClass.NMINUS


def linear_index(A, B, degeneracy_threshold: float = numcore.DEGENERACY_THRESHOLD) -> int | None:
    """Index of the linear pair (A, B) on R^n: sign det(B - A), None if degenerate."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise numcore.ShapeError("linear pair must have matrices of equal shape")
    return numcore.sign_det(B - A, degeneracy_threshold)


@dataclass(frozen=True)
class CoincidencePoint:
    location: tuple
    residual: float
    jac_diff: tuple  # rows of dg_p - df_p
    det_jac_diff: float
    local_index: int | None

    def to_dict(self) -> dict:
        return {
            "location": list(self.location),
            "residual": self.residual,
            "jac_diff": [list(r) for r in self.jac_diff],
            "det_jac_diff": self.det_jac_diff,
            "local_index": self.local_index,
        }


@dataclass(frozen=True)
class IndexReport:
    certificate: AdmissibilityCertificate
    points: tuple
    total_index: int | None
    degenerate_count: int
    seeds_used: int
    lefschetz: int | None = None
    shift: tuple | None = None
    perturbation_failed: bool = False

    @property
    def defined(self) -> bool:
        return self.total_index is not None

    def to_dict(self) -> dict:
        return {
            "certificate": self.certificate.to_dict(),
            "points": [p.to_dict() for p in self.points],
            "total_index": self.total_index,
            "degenerate_count": self.degenerate_count,
            "seeds_used": self.seeds_used,
            "lefschetz": self.lefschetz,
            "shift": None if self.shift is None else list(self.shift),
            "perturbation_failed": self.perturbation_failed,
        }


def seed_grid(region: Region, per_axis: int) -> np.ndarray:
    """Cell centres of a uniform per_axis^n grid over the region."""
    axes = [
        a + (np.arange(per_axis) + 0.5) * (b - a) / per_axis
        for a, b in zip(region.lower, region.upper)
    ]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, region.n)


def _newton(pair: MapPair, X: np.ndarray, cfg: SolverConfig) -> tuple[np.ndarray, np.ndarray]:
    """Batched Newton iteration on h = g - f; returns (points, usable mask).

    Iteration continues past the residual tolerance until the step stalls,
    so a degenerate root is approached as closely as the iteration allows
    and its Jacobian determinant shows up as (near) zero.
    """
    X = X.copy()
    alive = np.ones(len(X), dtype=bool)
    active = np.ones(len(X), dtype=bool)
    for _ in range(cfg.max_iterations):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        h, J, bad = pair.residual_and_jacobian(X[idx])
        alive[idx[bad]] = False
        active[idx[bad]] = False
        keep = ~bad
        idx, h, J = idx[keep], h[keep], J[keep]
        hn = np.linalg.norm(h, axis=1)
        exact = hn == 0.0
        active[idx[exact]] = False
        idx, h, J = idx[~exact], h[~exact], J[~exact]
        if idx.size == 0:
            continue
        step, ok = numcore.batched_solve(J, h)
        alive[idx[~ok]] = False
        active[idx[~ok]] = False
        idx, step = idx[ok], step[ok]
        Xn = X[idx] - step
        if pair.is_torus:
            Xn = wrap_unit(Xn)
        finite = np.isfinite(Xn).all(axis=1)
        alive[idx[~finite]] = False
        active[idx[~finite]] = False
        idx, Xn, step = idx[finite], Xn[finite], step[finite]
        X[idx] = Xn
        stalled = np.linalg.norm(step, axis=1) <= _STEP_FLOOR * (1.0 + np.linalg.norm(Xn, axis=1))
        active[idx[stalled]] = False
    return X, alive


def _dedupe(points: np.ndarray, radius: float, torus: bool) -> np.ndarray:
    if len(points) == 0:
        return points
    order = np.lexsort(points.T[::-1])
    kept = []
    for p in points[order]:
        if kept:
            diff = np.array(kept) - p
            if torus:
                diff = lattice_reduce(diff)
            if np.linalg.norm(diff, axis=1).min() <= radius:
                continue
        kept.append(p)
    return np.array(kept)


def find_coincidences(pair: MapPair, region: Region, cfg: SolverConfig | None = None) -> list[CoincidencePoint]:
    """Grid-seeded Newton search for coincidences of f and g inside region."""
    cfg = cfg or SolverConfig()
    seeds = seed_grid(region, cfg.grid_per_axis)
    _, bad = pair.residual(seeds)
    if bad.any():
        raise EvalError(f"maps cannot be evaluated at seed {seeds[np.argmax(bad)].tolist()}")
    X, alive = _newton(pair, seeds, cfg)
    X = X[alive]
    if len(X):
        h, bad = pair.residual(X)
        ok = ~bad & (np.linalg.norm(h, axis=1) < cfg.root_tolerance) & region.contains(X)
        X = X[ok]
    roots = _dedupe(X, cfg.dedupe_radius, pair.is_torus)
    out = []
    if len(roots) == 0:
        return out
    h, J, _ = pair.residual_and_jacobian(roots)
    for x, hx, Jx in zip(roots, h, J):
        out.append(CoincidencePoint(
            location=tuple(float(v) for v in x),
            residual=float(np.linalg.norm(hx)),
            jac_diff=tuple(tuple(float(v) for v in r) for r in Jx),
            det_jac_diff=numcore.det(Jx),
            local_index=numcore.sign_det(Jx, cfg.degeneracy_threshold),
        ))
    return out


def _lefschetz_for(pair: MapPair, region: Region) -> int | None:
    if pair.is_torus and region.is_full:
        return lefschetz_trace(pair.linear_f, pair.linear_g)
    return None


def total_index(pair: MapPair, region: Region, cfg: SolverConfig | None = None) -> IndexReport:
    cfg = cfg or SolverConfig()
    cert = check_admissible(pair, region, cfg.samples_per_face, cfg.gap_threshold)
    points = find_coincidences(pair, region, cfg)
    degenerate = sum(1 for p in points if p.local_index is None)
    total = None
    if cert.admissible and degenerate == 0:
        total = int(sum(p.local_index for p in points))
    return IndexReport(
        certificate=cert,
        points=tuple(points),
        total_index=total,
        degenerate_count=degenerate,
        seeds_used=cfg.grid_per_axis ** region.n,
        lefschetz=_lefschetz_for(pair, region),
    )


def _ball_draw(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    direction = rng.standard_normal(n)
    direction /= np.linalg.norm(direction)
    return direction * radius * rng.random() ** (1.0 / n)


def perturb_to_nondegenerate(pair: MapPair, region: Region, cfg: SolverConfig | None = None,
                             rng_seed: int = 0) -> tuple[MapPair, np.ndarray]:
    """Shift f by a constant inside the boundary gap until every root is simple.

    Returns the perturbed pair and the shift.  The shift is drawn uniformly
    from the ball of radius min(shift_fraction * gap, max_shift).
    """
    cfg = cfg or SolverConfig()
    cert = check_admissible(pair, region, cfg.samples_per_face, cfg.gap_threshold)
    if not cert.admissible or not cert.boundary_gap > 0:
        raise InadmissibleInput(f"boundary gap {cert.boundary_gap!r} leaves no room to perturb")
    if cfg.skip_if_nondegenerate:
        points = find_coincidences(pair, region, cfg)
        if all(p.local_index is not None for p in points):
            return pair, np.zeros(pair.n)
    radius = min(cfg.shift_fraction * cert.boundary_gap, cfg.max_shift)
    rng = np.random.default_rng(rng_seed)
    draws = []
    for _ in range(cfg.max_retries):
        y = _ball_draw(rng, pair.n, radius)
        draws.append(y)
        candidate = pair.with_maps(f=add_constant(pair.f, y))
        points = find_coincidences(candidate, region, cfg)
        if all(p.local_index is not None for p in points):
            return candidate, y
    raise PerturbationFailure(draws)


def index_with_auto_perturb(pair: MapPair, region: Region, cfg: SolverConfig | None = None,
                            rng_seed: int = 0) -> IndexReport:
    """Index of any admissible triple, perturbing degenerate triples first."""
    cfg = cfg or SolverConfig()
    report = total_index(pair, region, cfg)
    if not report.certificate.admissible or report.degenerate_count == 0:
        return report
    try:
        perturbed, shift = perturb_to_nondegenerate(pair, region, cfg, rng_seed)
    except (PerturbationFailure, InadmissibleInput):
        return replace(report, perturbation_failed=True)
    shifted = total_index(perturbed, region, cfg)
    return replace(shifted, certificate=report.certificate,
                   shift=tuple(float(v) for v in shift))
