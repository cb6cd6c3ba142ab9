"""Acceptance suite: one test per criterion, at the stated tolerances.

Run directly with ``python3 tests/test_acceptance.py`` or through pytest;
either way a PASS/FAIL line per criterion is printed at the end.
"""
import math
import time
from fractions import Fraction

import mpmath
import numpy as np
import pytest

import grid_oracle
from circlebif.bifurcation import (assemble_diagram, find_cusps, jet_dimension_table, solve_saddle_node,
                                   trace_curve)
from circlebif.census import run_census
from circlebif.family import (FamilySpec, FourierMode, FourierStage, Lemma1Params, ParamBox, Poly2,
                              arnold_family, build_homotopy, build_lemma1_family, conjugate_family, cusp_family,
                              embed_theta, intersection_family, iterate_jet, rigid_rotation, validate_diffeo)
from circlebif.invariants import parity_prefix_diff, section_scan
from circlebif.rotation import detect_rational, estimate_rho

ZERO = Fraction(0)
PARTIALS = [((0, 0, 0), "value"), ((1, 0, 0), "dx"), ((2, 0, 0), "dxx"), ((3, 0, 0), "dxxx"),
            ((0, 1, 0), "ds"), ((0, 0, 1), "dtheta"), ((1, 1, 0), "dxs"), ((1, 0, 1), "dxtheta")]


def test_criterion_1_jet_partials_match_finite_differences():
    spec = arnold_family()
    rng = np.random.default_rng(1)
    for q in range(1, 6):
        def f(x, s, t):
            for _ in range(q):
                x = x + t + s / (2 * mpmath.pi) * mpmath.sin(2 * mpmath.pi * x)
            return x

        for _ in range(50):
            s, t, x = rng.uniform(0, 1), rng.uniform(-1, 1), rng.uniform(0, 1)
            # s = 1 is a critical map, so the whole box does not validate; the jet is still defined
            tracked = iterate_jet(spec, q, s, t, x, validate=False).jet.tracked()
            for orders, name in PARTIALS:
                with mpmath.workdps(30):
                    ref = float(mpmath.diff(f, (x, s, t), orders, h=mpmath.mpf("1e-8"), method="step"))
                tol = 1e-3 if sum(orders) == 3 else 1e-4
                assert abs(tracked[name] - ref) <= tol * max(abs(ref), 1e-6), (q, name, s, t, x)


def test_criterion_2_rotation_numbers():
    rng = np.random.default_rng(2)
    for alpha in rng.uniform(0, 1, 20):
        assert abs(estimate_rho(rigid_rotation(float(alpha)), (0, 0), 10_000).value - alpha) < 1e-9
    spec = arnold_family()
    ests = [estimate_rho(spec, (0.8, t), 20_000) for t in np.linspace(-0.5, 0.5, 41)]
    for a, b in zip(ests, ests[1:]):
        assert b.value >= a.value - a.error_bound - b.error_bound
    base = arnold_family(s=0.7)
    conj = conjugate_family(base, FourierStage(Poly2.constant(0.3), (FourierMode(1, Poly2.constant(0.1)),)))
    for th in np.linspace(0.02, 0.98, 9):
        a, b = estimate_rho(base, (0, th), 20_000), estimate_rho(conj, (0, th), 20_000)
        assert abs(a.value - b.value) <= a.error_bound + b.error_bound


def test_criterion_3_closed_form_tongue_boundary():
    spec = arnold_family(box=ParamBox((0.1, 1.0), (-0.5, 0.5)))
    for s in (0.2, 0.5, 0.9):
        up = solve_saddle_node(spec, ZERO, (s, 0.9 * s / (2 * math.pi), 0.7))
        dn = solve_saddle_node(spec, ZERO, (s, -0.9 * s / (2 * math.pi), 0.3))
        assert abs(up.theta - s / (2 * math.pi)) < 1e-8 and abs(up.x - 0.75) < 1e-8
        assert abs(dn.theta + s / (2 * math.pi)) < 1e-8 and abs(dn.x - 0.25) < 1e-8
    curve = trace_curve(spec, ZERO, solve_saddle_node(spec, ZERO, (0.5, 0.08, 0.7)))
    pts = curve.points
    assert pts[:, 0].min() <= 0.1 + 1e-9 and pts[:, 0].max() >= 1.0 - 1e-9
    assert np.abs(pts[:, 1] - pts[:, 0] / (2 * math.pi)).max() < 1e-6


@pytest.mark.parametrize("p,q,n", [(0, 1, 1), (1, 2, 2), (1, 3, 3), (2, 5, 1)])
def test_criterion_4_lemma1_orbit_census(p, q, n):
    delta, amp = 0.05, 1.0
    t0 = time.perf_counter()
    spec = build_lemma1_family(Lemma1Params(p, q, n, delta, amp))
    census = run_census(spec, (0.0, 0.0), Fraction(p, q))
    rho = detect_rational(spec, (0.0, 0.0))
    elapsed = time.perf_counter() - t0
    assert len(census.orbits) == 2 * n and census.sources_topological == n and census.all_hyperbolic
    assert rho == Fraction(p, q)
    if q == 1:
        k = 2 * math.pi * q * n
        for o in census.orbits:
            assert abs(o.multiplier - math.exp(delta * amp * k * math.cos(k * o.points[0]))) < 1e-8
    assert elapsed < 10.0


def test_criterion_5_cusp():
    spec = cusp_family()
    seeds = [(s, t, x) for s in np.linspace(0.1, 0.3, 5) for t in np.linspace(-0.05, 0.05, 3)
             for x in np.linspace(0.4, 0.6, 3)]
    cusps = find_cusps(spec, ZERO, seeds)
    assert len(cusps) == 1
    c = cusps[0]
    assert np.abs(np.asarray(c.point) - (0.2, 0.0, 0.5)).max() < 1e-8
    assert abs(c.dxxx) > 1e-3 and abs(c.cusp_condition) > 1e-3
    arnold = arnold_family(box=ParamBox((0.1, 1.0), (-0.5, 0.5)))
    seeds = [(s, t, x) for s in np.linspace(0.1, 1.0, 10) for t in (-0.1, 0.0, 0.1) for x in np.linspace(0, 1, 8,
                                                                                                        endpoint=False)]
    assert find_cusps(arnold, ZERO, seeds) == []


def test_criterion_6_section_scan_unit_increments():
    target = embed_theta(build_lemma1_family(Lemma1Params(0, 1, 3)))
    spec = build_homotopy(arnold_family(s=0.5), target)
    scan = section_scan(spec, ZERO, s_steps=200, theta_samples=64)
    assert {1, 2, 3} <= set(scan.values())
    assert scan.unit_increments_ok


def test_criterion_7_parity_invariant():
    arnold = arnold_family(s=0.5)
    lemma = embed_theta(build_lemma1_family(Lemma1Params(0, 1, 2)))
    assert parity_prefix_diff(arnold, lemma, [ZERO, Fraction(1, 2)]).index == 0
    conj = conjugate_family(arnold, FourierStage(Poly2.constant(0.3), (FourierMode(1, Poly2.constant(0.1)),)))
    assert parity_prefix_diff(arnold, conj, [ZERO, Fraction(1, 2)]).index is None


def test_criterion_8_dimension_bookkeeping():
    table = jet_dimension_table()
    assert [table["jetDimensions"][k] for k in (1, 2, 3)] == [7, 13, 23]
    assert list(table["codimensions"]) == [2, 6, 10, 3, 4, 4, 7, 7, 3]


def _random_fourier_family(rng):
    n_modes = int(rng.integers(1, 4))
    ks = rng.choice(np.arange(1, 6), n_modes, replace=False)
    # keep sum 2 pi k |c_k| below one so most draws are diffeomorphisms
    budget = rng.uniform(0.3, 1.3)
    weights = rng.dirichlet(np.ones(2 * n_modes))
    modes = []
    for i, k in enumerate(ks):
        scale = budget / (2 * math.pi * k)
        a, b = weights[2 * i] * scale * rng.choice([-1, 1]), weights[2 * i + 1] * scale * rng.choice([-1, 1])
        modes.append(FourierMode(int(k), Poly2.constant(float(a)), Poly2.constant(float(b))))
    return FamilySpec((FourierStage(Poly2.theta(), tuple(modes)),), ParamBox((0.0, 0.0), (0.0, 1.0)), True)


def test_criterion_9_structural_balance():
    rng = np.random.default_rng(9)
    checked = violations = 0
    for _ in range(5000):
        if checked == 200:
            break
        spec = _random_fourier_family(rng)
        if not validate_diffeo(spec).ok:
            continue
        at = (0.0, float(rng.uniform(0, 1)))
        pq = detect_rational(spec, at, q_max=6)
        if pq is None:
            continue
        census = run_census(spec, at, pq)
        if not census.all_hyperbolic:
            continue
        checked += 1
        if census.sources_topological != census.sinks_topological or len(census.orbits) % 2:
            violations += 1
    assert checked == 200 and violations == 0


def _compare(diagram, oracle):
    assert len(diagram.curves) == oracle.curves
    assert len(diagram.cusps) == len(oracle.cusps)
    assert len(diagram.intersections) == len(oracle.intersections)
    assert len(diagram.boundary_hits) == len(oracle.boundary_hits)
    for c in diagram.cusps:
        assert min(max(abs(c.s - o[0]), abs(c.theta - o[1])) for o in oracle.cusps) < 1e-4
    for it in diagram.intersections:
        assert min(max(abs(it.s - o[0]), abs(it.theta - o[1])) for o in oracle.intersections) < 1e-4
    for h in diagram.boundary_hits:
        assert min(max(abs(h["s"] - o[0]), abs(h["theta"] - o[1])) for o in oracle.boundary_hits) < 1e-4


def test_criterion_10_oracle_equivalence():
    cases = [(arnold_family(box=ParamBox((0.1, 1.0), (-0.5, 0.5))), grid_oracle.arnold()),
             (cusp_family(0.2, box=ParamBox((0.05, 0.5), (-0.2, 0.2))), grid_oracle.scaled_cusp(0.2)),
             (intersection_family(), grid_oracle.intersection())]
    for spec, closed in cases:
        diagram = assemble_diagram(spec, [ZERO], scan_grid=16)[ZERO]
        _compare(diagram, grid_oracle.classify(closed, rows=1024, cells=1024))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
