import json

import numpy as np
import pytest

from coindex.engine import SolverConfig, total_index
from coindex.harness import (
    SELFMAP_PROPERTIES,
    ScaledIndex,
    SuiteConfig,
    bisect_region,
    counterexample_demo,
    engine_index,
    probe_conjecture,
    replay_failure,
    run_axiom_suite,
    shrink_region,
)
from coindex.maps import MapPair, Region


def zero_index(pair, region, cfg, seed):
    return 0


def test_suite_config_validation():
    with pytest.raises(ValueError):
        SuiteConfig(cases_per_property=0)
    with pytest.raises(ValueError):
        SuiteConfig(properties=("associativity",))


def test_small_axiom_suite_passes():
    report = run_axiom_suite(SuiteConfig(cases_per_property=10, rng_seed=7))
    assert report.passed, report.to_json()
    assert all(p.cases_run + p.skipped == 10 for p in report.properties)


def test_suite_is_deterministic():
    cfg = SuiteConfig(cases_per_property=5, rng_seed=3)
    assert run_axiom_suite(cfg).to_json() == run_axiom_suite(cfg).to_json()


def test_broken_engine_fails_normalization():
    cfg = SuiteConfig(cases_per_property=10, properties=("normalization", "weak_normalization"))
    report = run_axiom_suite(cfg, index_fn=zero_index)
    norm = report.property("normalization")
    assert len(norm.failures) > 0
    failure = norm.failures[0]
    # the record carries enough to rebuild the case
    assert failure.pair and failure.region and failure.case_seed
    ok, details = replay_failure(failure, cfg, "normalization", index_fn=zero_index)
    assert not ok and details == failure.details
    ok, _ = replay_failure(failure, cfg, "normalization")
    assert ok
    assert len(report.property("weak_normalization").failures) == 10


def test_report_json_is_valid():
    report = run_axiom_suite(SuiteConfig(cases_per_property=2))
    doc = json.loads(report.to_json())
    assert doc["suite"] == "axioms" and doc["total_failures"] == 0
    assert [p["name"] for p in doc["properties"]] == list(SuiteConfig().properties)


def test_bisect_keeps_points_inside_halves():
    region = Region.cube(-2, 2, 2)
    pts = np.array([[-1.0, 0.5], [1.0, -0.5]])
    a, b = bisect_region(region, pts)
    inside = a.contains(pts).astype(int) + b.contains(pts).astype(int)
    assert inside.tolist() == [1, 1]


def test_bisect_full_torus_axis_uses_two_cuts():
    region = Region.torus(1)
    pts = np.array([[0.0], [0.5]])
    a, b = bisect_region(region, pts)
    assert not a.is_full and not b.is_full
    assert (a.upper[0] - a.lower[0]) + (b.upper[0] - b.lower[0]) == pytest.approx(1.0)
    inside = a.contains(pts).astype(int) + b.contains(pts).astype(int)
    assert inside.tolist() == [1, 1]


def test_bisected_totals_add_up():
    pair = MapPair.torus("3*x1 + 0.03*sin(2*pi*x1)", "x1", 1)
    whole = total_index(pair, Region.torus(1))
    pts = np.array([p.location for p in whole.points])
    halves = bisect_region(Region.torus(1), pts)
    assert sum(total_index(pair, h).total_index for h in halves) == whole.total_index == -2


def test_shrink_is_smaller_and_keeps_points():
    pts = np.array([[0.2, -0.3]])
    region = Region.cube(-1, 1, 2)
    small = shrink_region(region, pts)
    assert all(lo >= a and hi <= b for lo, hi, a, b in zip(small.lower, small.upper, region.lower, region.upper))
    assert small != region
    assert small.contains(pts).all()


def test_scaled_index_only_touches_non_selfmaps():
    cfg = SolverConfig()
    selfmap = MapPair.torus("2*x1", "x1", 1)
    other = MapPair.torus("2*x1", "x1", 1, domain_label="X", codomain_label="Y")
    s = ScaledIndex(2.0)
    assert s(selfmap, Region.torus(1), cfg, 0) == engine_index(selfmap, Region.torus(1), cfg, 0) == -1
    assert s(other, Region.torus(1), cfg, 0) == -2


def test_scaled_index_breaks_normalization_on_non_selfmaps():
    cfg = SuiteConfig(cases_per_property=20, non_selfmap_fraction=0.5,
                      properties=("additivity", "homotopy", "normalization"))
    report = run_axiom_suite(cfg, index_fn=ScaledIndex(2.0))
    assert not report.property("additivity").failures
    assert not report.property("homotopy").failures
    assert report.property("normalization").failures


def test_conjecture_probe_small():
    report = probe_conjecture(SuiteConfig(cases_per_property=10))
    assert report.passed, report.to_json()
    bridge = report.property("degenerate_bridge")
    assert bridge.cases_run == 3


def test_counterexample_demo():
    demo = counterexample_demo(2.0, cases=5)
    assert demo["selfmap_suite_passed"]
    assert demo["non_selfmap_triple"]["engine"] == -1
    assert demo["non_selfmap_triple"]["scaled"] == -2
    assert demo["selfmap_triple"]["scaled"] == demo["selfmap_triple"]["engine"] == -1
    assert demo["diverges"] and demo["normalization_violated"]
    assert [p["name"] for p in demo["selfmap_suite"]["properties"]] == list(SELFMAP_PROPERTIES)
    with pytest.raises(ValueError):
        counterexample_demo(1.0)
