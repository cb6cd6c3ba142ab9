import math
from fractions import Fraction

import numpy as np
import pytest

from circlebif.census import OrbitCensus, classify, count_topological_sources, run_census
from circlebif.errors import NonIsolatedOrbits, PreconditionError, RationalNotAttained
from circlebif.family import (FourierMode, FourierStage, Lemma1Params, Poly2, arnold_family, build_lemma1_family,
                              conjugate_family, rigid_family)


def _circ(a, b):
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


def test_arnold_source_and_sink():
    c = run_census(arnold_family(), (0.5, 0.0), Fraction(0))
    assert [o.kind for o in c.orbits] == ["source", "sink"]
    src, snk = c.orbits
    assert src.points[0] == pytest.approx(0.0, abs=1e-12) and src.multiplier == pytest.approx(1.5, abs=1e-12)
    assert snk.points[0] == pytest.approx(0.5, abs=1e-12) and snk.multiplier == pytest.approx(0.5, abs=1e-12)
    assert c.sources_topological == c.sinks_topological == 1 and c.all_hyperbolic


@pytest.mark.parametrize("theta", [-0.07, -0.02, 0.03, 0.06])
def test_arnold_fixed_points_closed_form(theta):
    s = 0.5
    c = run_census(arnold_family(), (s, theta), Fraction(0))
    # theta + (s / 2 pi) sin 2 pi x = 0
    a = math.asin(-2 * math.pi * theta / s) / (2 * math.pi)
    expected = sorted([a % 1.0, (0.5 - a) % 1.0])
    got = sorted(o.points[0] for o in c.orbits)
    assert np.allclose(got, expected, atol=1e-11)
    for o in c.orbits:
        assert o.multiplier == pytest.approx(1 + s * math.cos(2 * math.pi * o.points[0]), abs=1e-11)


@pytest.mark.parametrize("p,q,n", [(0, 1, 1), (1, 2, 2), (1, 3, 3), (2, 5, 1)])
def test_lemma1_orbit_structure(p, q, n):
    delta, amp = 0.05, 1.0
    spec = build_lemma1_family(Lemma1Params(p, q, n, delta, amp))
    c = run_census(spec, (0.0, 0.0), Fraction(p, q))
    assert len(c.orbits) == 2 * n and c.sources_topological == n and c.all_hyperbolic
    k = 2 * math.pi * q * n
    for o in c.orbits:
        assert len(o.points) == q and o.resolved
        x = o.points[0]
        # equilibria of amp sin(k x) sit at multiples of 1/(2 q N)
        assert min(_circ(x, j / (2 * q * n)) for j in range(2 * q * n)) < 1e-10
        expected = math.exp(q * delta * amp * k * math.cos(k * x))
        if q == 1:
            assert o.multiplier == pytest.approx(expected, abs=1e-8)
        else:
            # RK4 truncation at fixed 64 steps grows like (q N)^4
            assert o.multiplier == pytest.approx(expected, rel=1e-6)


def test_tongue_boundary_is_semistable():
    s = 0.5
    c = run_census(arnold_family(), (s, s / (2 * math.pi)), Fraction(0))
    assert c.kinds() == ["parabolicSemistable"]
    assert count_topological_sources(c) == 0 and not c.all_hyperbolic
    assert c.orbits[0].points[0] == pytest.approx(0.75, abs=1e-6)


def test_conjugated_positions_shift():
    base = arnold_family(s=0.5)
    conj = conjugate_family(base, FourierStage(Poly2.constant(0.3), ()))
    a = run_census(base, (0.0, 0.03), Fraction(0))
    b = run_census(conj, (0.0, 0.03), Fraction(0))
    pa = sorted((o.points[0] - 0.3) % 1.0 for o in a.orbits)
    pb = sorted(o.points[0] for o in b.orbits)
    assert np.allclose(pa, pb, atol=1e-10)
    assert np.allclose(sorted(o.multiplier for o in a.orbits), sorted(o.multiplier for o in b.orbits), atol=1e-9)


def test_census_errors():
    with pytest.raises(NonIsolatedOrbits):
        run_census(rigid_family(), (0.0, 0.5), Fraction(1, 2))
    with pytest.raises(RationalNotAttained):
        run_census(arnold_family(), (0.5, 0.3), Fraction(0))
    with pytest.raises(PreconditionError):
        run_census(arnold_family(), (0.5, 0.0), Fraction(0), grid_m=100)


def test_classify_rules():
    assert classify(1.2, -1, 1) == "source"
    assert classify(0.8, 1, -1) == "sink"
    assert classify(1.0, -1e-9, 1e-9) == "parabolicSource"
    assert classify(1.0, 1e-9, -1e-9) == "parabolicSink"
    assert classify(1.0, 1e-9, 1e-9) == "parabolicSemistable"


def test_cubic_tangency_is_topological_source():
    # x + 0.1 (sin 2 pi x)^3 / (2 pi): G ~ x^3 near 0, a degenerate but repelling fixed point
    modes = (FourierMode(1, Poly2.constant(0.75 * 0.1 / (2 * math.pi))),
             FourierMode(3, Poly2.constant(-0.25 * 0.1 / (2 * math.pi))))
    spec = arnold_family().__class__((FourierStage(Poly2.theta(), modes),))
    c = run_census(spec, (0.0, 0.0), Fraction(0))
    kinds = {round(o.points[0], 6) % 1.0: o.kind for o in c.orbits}
    assert kinds[0.0] == "parabolicSource" and kinds[0.5] == "parabolicSink"
    assert c.sources_topological == c.sinks_topological == 1


def test_census_json_roundtrip():
    c = run_census(build_lemma1_family(Lemma1Params(1, 3, 1)), (0.0, 0.0), Fraction(1, 3))
    d = c.to_json()
    assert d["orbitCount"] == 2 and d["pq"] == "1/3"
    assert OrbitCensus.from_json(d) == c
