"""Randomised checks of the index axioms and of their consequences.

Every case is generated from its own seed ``[rng_seed, property, case]`` so a
failure record can be replayed in isolation, and each record also carries
the full maps and region.  Checks compare exact integers (or exact multiples
of them for ``ScaledIndex``).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from . import report
from .engine import SolverConfig, find_coincidences, index_with_auto_perturb, total_index
from .errors import CoindexError
from .expr import add_constant, add_term, linear_map_rows, parse_expr
from .lefschetz import lefschetz_trace
from .maps import (
    HomotopyPair,
    MapPair,
    Region,
    check_admissible,
    straight_line_homotopy,
    wrap_unit,
)
from .numcore import IntMatrix

AXIOM_PROPERTIES = (
    "additivity",
    "homotopy",
    "excision",
    "empty_set",
    "solution",
    "normalization",
    "weak_normalization",
)
SELFMAP_PROPERTIES = ("additivity", "homotopy", "excision", "empty_set", "weak_normalization")

IndexFn = Callable[[MapPair, Region, SolverConfig, int], Optional[float]]


def engine_index(pair: MapPair, region: Region, cfg: SolverConfig, seed: int) -> int | None:
    return index_with_auto_perturb(pair, region, cfg, seed).total_index


@dataclass(frozen=True)
class ScaledIndex:
    """The engine index, multiplied by ``c`` on triples that are not selfmaps."""

    c: float
    inner: IndexFn = engine_index

    def __call__(self, pair: MapPair, region: Region, cfg: SolverConfig, seed: int):
        value = self.inner(pair, region, cfg, seed)
        if value is None or pair.is_selfmap:
            return value
        return self.c * value


@dataclass(frozen=True)
class SuiteConfig:
    rng_seed: int = 42
    cases_per_property: int = 100
    dimension_range: tuple = (1, 2)
    entry_bound: int = 2
    perturbation_amplitude: float = 0.05
    non_selfmap_fraction: float = 0.0
    properties: tuple = AXIOM_PROPERTIES
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.cases_per_property < 1:
            raise ValueError("cases_per_property must be at least 1")
        if not self.dimension_range:
            raise ValueError("dimension_range must not be empty")
        if self.entry_bound < 1:
            raise ValueError("entry_bound must be at least 1")
        unknown = set(self.properties) - set(AXIOM_PROPERTIES)
        if unknown:
            raise ValueError(f"unknown properties {sorted(unknown)}")
        object.__setattr__(self, "dimension_range", tuple(int(n) for n in self.dimension_range))
        object.__setattr__(self, "properties", tuple(self.properties))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["dimension_range"] = list(self.dimension_range)
        out["properties"] = list(self.properties)
        return out


@dataclass
class Failure:
    case_id: int
    description: str
    case_seed: list
    pair: dict
    region: str
    details: dict = field(default_factory=dict)


@dataclass
class PropertyResult:
    name: str
    cases_run: int = 0
    skipped: int = 0
    failures: list = field(default_factory=list)


@dataclass
class SuiteReport:
    suite: str
    rng_seed: int
    config: dict
    properties: list

    @property
    def total_failures(self) -> int:
        return sum(len(p.failures) for p in self.properties)

    @property
    def passed(self) -> bool:
        return self.total_failures == 0

    def property(self, name: str) -> PropertyResult:
        for p in self.properties:
            if p.name == name:
                return p
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "rng_seed": self.rng_seed,
            "config": self.config,
            "total_failures": self.total_failures,
            "properties": [
                {
                    "name": p.name,
                    "cases_run": p.cases_run,
                    "skipped": p.skipped,
                    "failures": [asdict(f) for f in sorted(p.failures, key=lambda f: f.case_id)],
                }
                for p in self.properties
            ],
        }

    def to_json(self) -> str:
        return report.dumps(self.to_dict())


# -- case generation ----------------------------------------------------------

@dataclass(frozen=True)
class Case:
    pair: MapPair
    region: Region
    kind: str


class _Skip(Exception):
    pass


def _num(v: float) -> str:
    v = round(float(v), 6)
    return repr(v) if v >= 0 else f"(-{-v!r})"


def _int_pair(rng, n: int, bound: int):
    while True:
        A = rng.integers(-bound, bound + 1, (n, n))
        B = rng.integers(-bound, bound + 1, (n, n))
        if IntMatrix.of(B - A).det() != 0:
            return A, B


def _labels(rng, cfg: SuiteConfig, base: str):
    if cfg.non_selfmap_fraction > 0 and rng.random() < cfg.non_selfmap_fraction:
        return base, base + "'"
    return base, base


def gen_rn_linear(rng, n: int, cfg: SuiteConfig) -> Case:
    A, B = _int_pair(rng, n, cfg.entry_bound)
    p = np.round(rng.uniform(-1, 1, n), 6)
    offset = -(B - A) @ p
    dl, cl = _labels(rng, cfg, "X")
    pair = MapPair.euclidean(", ".join(linear_map_rows(A)), ", ".join(linear_map_rows(B, offset)),
                             n, dl, cl)
    return Case(pair, Region.cube(-3.0, 3.0, n), "rn_linear")


def gen_rn_nonlinear(rng, n: int, cfg: SuiteConfig) -> Case:
    A, B = _int_pair(rng, n, cfg.entry_bound)
    p = np.round(rng.uniform(-0.5, 0.5, n), 6)
    offset = -(B - A) @ p
    rows = linear_map_rows(A)
    for i in range(n):
        j = int(rng.integers(n))
        eps = rng.uniform(0.05, 0.25) * rng.choice([-1, 1])
        rows[i] = f"{rows[i]} + {_num(eps)}*(x{j + 1} - {_num(p[j])})^2"
    dl, cl = _labels(rng, cfg, "X")
    pair = MapPair.euclidean(", ".join(rows), ", ".join(linear_map_rows(B, offset)), n, dl, cl)
    return Case(pair, Region.cube(-2.0, 2.0, n), "rn_nonlinear")


def _periodic_term(rng, n: int, amplitude: float) -> tuple[int, str]:
    a = rng.uniform(-amplitude, amplitude)
    j = int(rng.integers(n))
    return int(rng.integers(n)), f"{_num(a)}*sin(2*pi*x{j + 1})"


def gen_torus(rng, n: int, cfg: SuiteConfig) -> Case:
    F, G = _int_pair(rng, n, cfg.entry_bound)
    rows = linear_map_rows(F, np.round(rng.random(n), 6))
    if rng.random() < 0.5:
        i, term = _periodic_term(rng, n, cfg.perturbation_amplitude)
        rows[i] = f"{rows[i]} + {term}"
    dl, cl = _labels(rng, cfg, "T")
    pair = MapPair.torus(", ".join(rows), ", ".join(linear_map_rows(G)), n, F, G, dl, cl)
    return Case(pair, Region.torus(n), "torus")


GENERATORS = (gen_rn_linear, gen_rn_nonlinear, gen_torus)


def _admissible_case(generators, rng, n: int, cfg: SuiteConfig, i: int) -> Case:
    s = cfg.solver
    for attempt in range(32):
        gen = generators[(i + attempt) % len(generators)]
        case = gen(rng, n, cfg)
        if check_admissible(case.pair, case.region, s.samples_per_face, s.gap_threshold).admissible:
            return case
    raise _Skip("no admissible case generated")


# -- region surgery -----------------------------------------------------------

def _axis_coords(region: Region, points, axis: int) -> np.ndarray:
    # points are CoincidencePoint records or plain coordinate rows
    c = np.array([getattr(p, "location", p)[axis] for p in points], dtype=float)
    if region.periodic:
        c = region.lower[axis] + wrap_unit(c - region.lower[axis])
    return np.sort(c)


def _with_axis(region: Region, axis: int, lo: float, hi: float) -> Region:
    lower = list(region.lower)
    upper = list(region.upper)
    lower[axis], upper[axis] = lo, hi
    return Region(tuple(lower), tuple(upper), region.periodic)


def bisect_region(region: Region, points) -> tuple[Region, Region]:
    """Split a region into two disjoint boxes that together hold every point.

    The cut goes through the midpoint of the widest gap between consecutive
    point coordinates (region bounds count as coordinates).  A full torus
    axis needs two cuts, placed in its two widest cyclic gaps.
    """
    best = None
    for axis in range(region.n):
        c = _axis_coords(region, points, axis)
        lo, hi = region.lower[axis], region.upper[axis]
        if region.full_axes[axis]:
            if len(c) == 0:
                cuts = (lo + 1 / 3, lo + 2 / 3)
                score = 1 / 3
            elif len(c) == 1:
                cuts = (c[0] + 1 / 3, c[0] + 2 / 3)
                score = 1 / 3
            else:
                ext = np.append(c, c[0] + 1.0)
                gaps = np.diff(ext)
                order = np.argsort(-gaps, kind="stable")
                g1, g2 = order[0], order[1]
                cuts = tuple(sorted((ext[g1] + gaps[g1] / 2, ext[g2] + gaps[g2] / 2)))
                score = min(gaps[g1], gaps[g2]) / 2
            if best is None or score > best[0]:
                best = (score, axis, cuts)
        else:
            ext = np.concatenate([[lo], c, [hi]])
            gaps = np.diff(ext)
            k = int(np.argmax(gaps))
            score = gaps[k] / 2
            if best is None or score > best[0]:
                best = (score, axis, (ext[k] + gaps[k] / 2,))
    _, axis, cuts = best
    if len(cuts) == 1:
        (cut,) = cuts
        return (_with_axis(region, axis, region.lower[axis], cut),
                _with_axis(region, axis, cut, region.upper[axis]))
    a, b = cuts
    return _with_axis(region, axis, a, b), _with_axis(region, axis, b, a + 1.0)


def shrink_region(region: Region, points) -> Region:
    """A strictly smaller box that still contains every point."""
    if not region.periodic:
        lower, upper = [], []
        for axis in range(region.n):
            c = _axis_coords(region, points, axis)
            lo, hi = region.lower[axis], region.upper[axis]
            if len(c):
                lower.append(lo + 0.5 * (c[0] - lo))
                upper.append(hi - 0.5 * (hi - c[-1]))
            else:
                lower.append(lo + 0.25 * (hi - lo))
                upper.append(hi - 0.25 * (hi - lo))
        return Region(tuple(lower), tuple(upper))
    best = None
    for axis in range(region.n):
        c = _axis_coords(region, points, axis)
        lo, hi = region.lower[axis], region.upper[axis]
        if len(c) == 0:
            cand = (0.5, axis, lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo))
        elif region.full_axes[axis]:
            ext = np.append(c, c[0] + 1.0)
            gaps = np.diff(ext)
            k = int(np.argmax(gaps))
            cand = (gaps[k], axis, ext[k] + 0.75 * gaps[k], ext[k] + 0.25 * gaps[k] + 1.0)
        else:
            cand = (min(c[0] - lo, hi - c[-1]), axis, lo + 0.5 * (c[0] - lo), hi - 0.5 * (hi - c[-1]))
        if best is None or cand[0] > best[0]:
            best = cand
    _, axis, a, b = best
    return _with_axis(region, axis, a, b)


def _ball(rng, n: int, radius: float) -> np.ndarray:
    d = rng.standard_normal(n)
    return d / np.linalg.norm(d) * radius * rng.random() ** (1.0 / n)


def deform(rng, case: Case, cfg: SuiteConfig) -> tuple[MapPair, str]:
    """A nearby pair: f plus a small constant or a small periodic term."""
    pair = case.pair
    s = cfg.solver
    if rng.random() < 0.5:
        gap = check_admissible(pair, case.region, s.samples_per_face, s.gap_threshold).boundary_gap
        y = np.round(_ball(rng, pair.n, 0.25 * min(gap, 1.0)), 9)
        return pair.with_maps(f=add_constant(pair.f, y)), f"constant shift {y.tolist()}"
    i, term = _periodic_term(rng, pair.n, cfg.perturbation_amplitude)
    return pair.with_maps(f=add_term(pair.f, i, parse_expr(term, pair.n))), f"f{i + 1} += {term}"


def find_admissible_deformation(rng, case: Case, cfg: SuiteConfig, attempts: int = 8):
    """Returns (pair1, description, rejected) or raises _Skip."""
    s = cfg.solver
    rejected = 0
    for _ in range(attempts):
        pair1, desc = deform(rng, case, cfg)
        h = straight_line_homotopy(case.pair, pair1, case.region, s.t_samples,
                                   s.gap_threshold, s.samples_per_face)
        if isinstance(h, HomotopyPair):
            return pair1, desc, rejected
        rejected += 1
    raise _Skip("no admissible deformation")


# -- property checks ----------------------------------------------------------

def _value(index_fn: IndexFn, pair, region, cfg: SuiteConfig, seed: int):
    v = index_fn(pair, region, cfg.solver, seed)
    if v is None:
        raise AssertionError(f"index undefined on {region.to_text()}")
    return v


def check_additivity(rng, case: Case, cfg, index_fn, seed):
    whole = _value(index_fn, case.pair, case.region, cfg, seed)
    points = find_coincidences(case.pair, case.region, cfg.solver)
    u1, u2 = bisect_region(case.region, points)
    v1 = _value(index_fn, case.pair, u1, cfg, seed)
    v2 = _value(index_fn, case.pair, u2, cfg, seed)
    details = {"whole": whole, "parts": [v1, v2], "regions": [u1.to_text(), u2.to_text()]}
    return whole == v1 + v2, details


def check_homotopy(rng, case: Case, cfg, index_fn, seed):
    pair1, desc, rejected = find_admissible_deformation(rng, case, cfg)
    v0 = _value(index_fn, case.pair, case.region, cfg, seed)
    v1 = _value(index_fn, pair1, case.region, cfg, seed)
    return v0 == v1, {"start": v0, "end": v1, "deformation": desc, "f1": pair1.f.source,
                      "rejected_candidates": rejected}


def check_excision(rng, case: Case, cfg, index_fn, seed):
    whole = _value(index_fn, case.pair, case.region, cfg, seed)
    points = find_coincidences(case.pair, case.region, cfg.solver)
    sub = shrink_region(case.region, points)
    v = _value(index_fn, case.pair, sub, cfg, seed)
    return whole == v, {"whole": whole, "sub": v, "sub_region": sub.to_text()}


def _gap_box(region: Region, points) -> Region:
    """Middle half of the widest coordinate gap along the first axis."""
    c = _axis_coords(region, points, 0)
    lo, hi = region.lower[0], region.upper[0]
    if region.full_axes[0] and len(c):
        ext = np.append(c, c[0] + 1.0)
    else:
        ext = np.concatenate([[lo], c, [hi]])
    gaps = np.diff(ext)
    k = int(np.argmax(gaps))
    return _with_axis(region, 0, ext[k] + 0.25 * gaps[k], ext[k] + 0.75 * gaps[k])


def check_empty_set(rng, case: Case, cfg, index_fn, seed):
    pair, region = case.pair, case.region
    n = pair.n
    if rng.random() < 0.5:
        # a box between the coincidences
        region = _gap_box(region, find_coincidences(pair, region, cfg.solver))
        empty = pair
    elif pair.is_torus:
        # g shifted off itself by a non-lattice constant
        c = np.round(0.2 + 0.6 * rng.random(n), 6)
        empty = MapPair(add_constant(pair.g, c), pair.g, pair.domain, pair.codomain,
                        pair.linear_g, pair.linear_g)
    else:
        c = np.round(rng.uniform(0.5, 1.5, n) * rng.choice([-1, 1], n), 6)
        empty = pair.with_maps(f=add_constant(pair.g, c))
    points = find_coincidences(empty, region, cfg.solver)
    v = _value(index_fn, empty, region, cfg, seed)
    return v == 0 and not points, {"value": v, "points": len(points), "f": empty.f.source,
                                   "region_used": region.to_text()}


def check_solution(rng, case: Case, cfg, index_fn, seed):
    v = _value(index_fn, case.pair, case.region, cfg, seed)
    points = find_coincidences(case.pair, case.region, cfg.solver)
    ok = (v == 0) if not points else True
    ok = ok and (bool(points) if v != 0 else True)
    return ok, {"value": v, "points": len(points)}


def check_normalization(rng, case: Case, cfg, index_fn, seed):
    v = _value(index_fn, case.pair, case.region, cfg, seed)
    L = lefschetz_trace(case.pair.linear_f, case.pair.linear_g)
    return v == L, {"value": v, "lefschetz": L}


def check_weak_normalization(rng, case: Case, cfg, index_fn, seed):
    # constant f against the identity; case supplies only the dimension
    n = case.pair.n
    c = np.round(rng.uniform(-0.9, 0.9, n), 6)
    ident = ", ".join(f"x{i + 1}" for i in range(n))
    const = ", ".join(_num(v) for v in c)
    if case.pair.is_torus:
        pair = MapPair.torus(const, ident, n, IntMatrix.zeros(n), IntMatrix.identity(n))
        region = Region.torus(n)
    else:
        pair = MapPair.euclidean(const, ident, n)
        region = Region.cube(-5.0, 5.0, n)
    v = _value(index_fn, pair, region, cfg, seed)
    return v == 1, {"value": v, "f": const, "g": ident, "space": "torus" if pair.is_torus else "rn"}


CHECKS = {
    "additivity": (check_additivity, GENERATORS),
    "homotopy": (check_homotopy, GENERATORS),
    "excision": (check_excision, GENERATORS),
    "empty_set": (check_empty_set, GENERATORS),
    "solution": (check_solution, GENERATORS),
    "normalization": (check_normalization, (gen_torus,)),
    "weak_normalization": (check_weak_normalization, (gen_rn_linear, gen_torus)),
}


def _run_case(check, generators, cfg: SuiteConfig, index_fn, prop_idx: int, i: int, result: PropertyResult):
    seed = [cfg.rng_seed, prop_idx, i]
    rng = np.random.default_rng(seed)
    n = cfg.dimension_range[i % len(cfg.dimension_range)]
    try:
        case = _admissible_case(generators, rng, n, cfg, i)
    except _Skip:
        result.skipped += 1
        return
    solver_seed = int(rng.integers(2**31))
    try:
        ok, details = check(rng, case, cfg, index_fn, solver_seed)
    except _Skip:
        result.skipped += 1
        return
    except (AssertionError, CoindexError) as exc:
        ok, details = False, {"error": f"{type(exc).__name__}: {exc}"}
    result.cases_run += 1
    if not ok:
        details["solver_seed"] = solver_seed
        result.failures.append(Failure(
            case_id=i,
            description=f"{result.name} violated on {case.kind} case",
            case_seed=seed,
            pair=case.pair.describe(),
            region=case.region.to_text(),
            details=details,
        ))


def run_axiom_suite(cfg: SuiteConfig | None = None, index_fn: IndexFn = engine_index) -> SuiteReport:
    cfg = cfg or SuiteConfig()
    results = []
    for name in cfg.properties:
        check, generators = CHECKS[name]
        prop_idx = AXIOM_PROPERTIES.index(name)
        result = PropertyResult(name)
        for i in range(cfg.cases_per_property):
            _run_case(check, generators, cfg, index_fn, prop_idx, i, result)
        result.failures.sort(key=lambda f: f.case_id)
        results.append(result)
    return SuiteReport("axioms", cfg.rng_seed, cfg.to_dict(), results)


def replay_failure(failure: Failure, cfg: SuiteConfig, name: str, index_fn: IndexFn = engine_index):
    """Re-run the exact case behind a failure record; returns (ok, details)."""
    check, generators = CHECKS[name]
    result = PropertyResult(name)
    _, prop_idx, i = failure.case_seed
    _run_case(check, generators, cfg, index_fn, prop_idx, i, result)
    return not result.failures, (result.failures[0].details if result.failures else {})


# -- conjecture probe ---------------------------------------------------------

DEGENERATE_BRIDGES = (
    ("x1 + x1^2", "x1", 1),
    ("x1^2", "0", 1),
    ("x1 + x1^2, x2 + x2^2", "x1, x2", 2),
)


def probe_conjecture(cfg: SuiteConfig | None = None) -> SuiteReport:
    """Nondegenerate triples joined by admissible homotopies must agree.

    ``cases_per_property`` cases are run per dimension.  Candidates whose
    homotopy is inadmissible or whose far end is degenerate are outside the
    hypothesis and are counted as skipped.
    """
    cfg = cfg or SuiteConfig()
    s = cfg.solver
    result = PropertyResult("conjecture")
    case_id = 0
    for n in cfg.dimension_range:
        for i in range(cfg.cases_per_property):
            seed = [cfg.rng_seed, 100 + n, i]
            rng = np.random.default_rng(seed)
            try:
                case = None
                for attempt in range(16):
                    cand = _admissible_case(GENERATORS, rng, n, cfg, i + attempt)
                    r0 = total_index(cand.pair, cand.region, s)
                    if r0.defined:
                        case = cand
                        break
                if case is None:
                    raise _Skip("no nondegenerate start")
                pair1, desc, _ = find_admissible_deformation(rng, case, cfg)
                r1 = total_index(pair1, case.region, s)
                if not r1.defined:
                    raise _Skip("degenerate end")
            except _Skip:
                result.skipped += 1
                case_id += 1
                continue
            result.cases_run += 1
            if r0.total_index != r1.total_index:
                result.failures.append(Failure(
                    case_id, "COUNTEREXAMPLE CANDIDATE: homotopic nondegenerate triples disagree",
                    seed, case.pair.describe(), case.region.to_text(),
                    {"start": r0.total_index, "end": r1.total_index, "deformation": desc,
                     "f1": pair1.f.source},
                ))
            case_id += 1

    bridge = PropertyResult("degenerate_bridge")
    for k, (f, g, n) in enumerate(DEGENERATE_BRIDGES):
        if n not in cfg.dimension_range:
            continue
        pair = MapPair.euclidean(f, g, n)
        region = Region.cube(-0.5, 0.5, n)
        eps = 0.01
        ends = {}
        for sign in (-1.0, 1.0):
            shifted = pair.with_maps(f=add_constant(pair.f, np.full(n, sign * eps)))
            ends[sign] = total_index(shifted, region, s).total_index
        bridge.cases_run += 1
        if ends[-1.0] != ends[1.0] or ends[-1.0] is None:
            bridge.failures.append(Failure(
                k, "shifts on either side of a degenerate triple disagree", [cfg.rng_seed, 0, k],
                pair.describe(), region.to_text(), {"minus": ends[-1.0], "plus": ends[1.0]},
            ))
    return SuiteReport("conjecture", cfg.rng_seed, cfg.to_dict(), [result, bridge])


# -- non-uniqueness under weak normalization -----------------------------------

def counterexample_demo(c: float, cases: int = 20, rng_seed: int = 42) -> dict:
    """Show that ScaledIndex(c) passes the selfmap axioms but is not the index."""
    if c == 1:
        raise ValueError("c = 1 reproduces the index itself; nothing to demonstrate")
    scaled = ScaledIndex(c)
    suite_cfg = SuiteConfig(rng_seed=rng_seed, cases_per_property=cases,
                            properties=SELFMAP_PROPERTIES)
    suite = run_axiom_suite(suite_cfg, index_fn=scaled)

    solver = SolverConfig()
    pair = MapPair.torus("2*x1", "x1", 1, [[2]], [[1]], domain_label="X", codomain_label="Y")
    region = Region.torus(1)
    engine_value = engine_index(pair, region, solver, rng_seed)
    scaled_value = scaled(pair, region, solver, rng_seed)
    L = lefschetz_trace(pair.linear_f, pair.linear_g)

    selfmap = MapPair.torus("2*x1", "x1", 1, [[2]], [[1]], domain_label="X")
    selfmap_engine = engine_index(selfmap, region, solver, rng_seed)
    selfmap_scaled = scaled(selfmap, region, solver, rng_seed)
    return {
        "c": c,
        "selfmap_suite": suite.to_dict(),
        "selfmap_suite_passed": suite.passed,
        "selfmap_triple": {"pair": selfmap.describe(), "engine": selfmap_engine, "scaled": selfmap_scaled},
        "non_selfmap_triple": {
            "pair": pair.describe(),
            "region": region.to_text(),
            "engine": engine_value,
            "scaled": scaled_value,
            "lefschetz": L,
        },
        "diverges": scaled_value != engine_value,
        "normalization_violated": scaled_value != L,
    }
