import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from circlebif.errors import DegenerateConstruction, NotDiffeomorphism, PreconditionError, ValidationError
from circlebif.family import (FamilySpec, FlowStage, FourierMode, FourierStage, Lemma1Params, ParamBox, Poly2,
                              RotationStage, arnold_family, build_homotopy, build_lemma1_family,
                              conjugate_family, cusp_family, embed_theta, format_rational, iterate_jet,
                              parse_rational, rigid_family, rigid_rotation, smoothstep, theta_monotonicity,
                              validate_diffeo)

from conftest import arnold_closed

terms = st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2), st.floats(-5, 5, allow_nan=False)), max_size=5)


@given(terms, st.floats(-2, 2), st.floats(-2, 2))
def test_poly2_value_and_json_roundtrip(t, s, th):
    p = Poly2(tuple(t))
    expected = sum(c * s ** i * th ** j for i, j, c in t)
    assert p.value(s, th) == pytest.approx(expected, abs=1e-9)
    assert Poly2.from_json(json.loads(json.dumps(p.to_json()))) == p


def test_poly2_exact_rationals_and_freeze():
    p = Poly2(((0, 0, Fraction(1, 3)), (1, 1, 2.0)))
    assert Poly2.from_json(p.to_json()) == p
    frozen = p.freeze_s(0.5)
    assert not frozen.depends_on_s and frozen.value(0.0, 2.0) == pytest.approx(1 / 3 + 2.0)


def test_parse_and_format_rational():
    assert parse_rational("2/4") == Fraction(1, 2)
    assert format_rational(Fraction(0)) == "0/1"
    with pytest.raises(ValueError):
        parse_rational("1/0")


@given(st.floats(0, 1), st.floats(-1, 1), st.floats(-3, 3))
def test_arnold_lift_closed_form(s, th, x):
    spec = arnold_family()
    assert spec.lift(s, th, [x])[0] == pytest.approx(arnold_closed(s, th, x), abs=1e-12)


def test_rigid_iterate_jet():
    j = iterate_jet(rigid_rotation(0.3), 3, 0.0, 0.0, 0.25)
    assert j.jet.value == pytest.approx(1.15, abs=1e-14)
    assert j.winding == 1 and j.jet.dx == 1.0
    assert np.count_nonzero(j.jet.coeffs[2:]) == 0


def test_arnold_jet_example():
    j = arnold_family(box=ParamBox((0.0, 0.5), (-1, 1))).jet(0.5, 0.0, 0.0)
    assert j.value == pytest.approx(0.0, abs=1e-15) and j.dx == pytest.approx(1.5, abs=1e-15)


def test_chain_rule_closed_form():
    spec = arnold_family(s=0.5)
    x, th = 0.2, 0.1
    fp = lambda y: 1 + 0.5 * math.cos(2 * math.pi * y)  # noqa: E731
    y = arnold_closed(0.5, th, x)
    assert spec.jet(0.0, th, x, 2).dx == pytest.approx(fp(y) * fp(x), rel=1e-12)


def test_validate_diffeo_examples():
    assert validate_diffeo(rigid_rotation(0.1)).min_derivative == 1.0
    rep = validate_diffeo(arnold_family(box=ParamBox((0.0, 0.5), (-1, 1))))
    assert rep.ok and rep.min_derivative == pytest.approx(0.5, abs=1e-3)
    rep = validate_diffeo(arnold_family(box=ParamBox((0.0, 1.2), (-1, 1))))
    assert not rep.ok and rep.min_derivative == pytest.approx(-0.2, abs=1e-3)
    with pytest.raises(PreconditionError):
        validate_diffeo(rigid_rotation(0.1), grid_x=100)


def test_literal_cusp_family_fails_validation_but_scaled_passes():
    assert not validate_diffeo(cusp_family()).ok
    assert validate_diffeo(cusp_family(0.2, ParamBox((0.05, 0.5), (-0.2, 0.2)))).ok


def _exact_flow(x, k, amp, t):
    # x' = amp sin(k x) integrates to tan(k x / 2) e^{k amp t}
    half = k * x / 2.0
    n = np.round(half / math.pi)
    return (2.0 * (np.arctan(np.tan(half - n * math.pi) * math.exp(k * amp * t)) + n * math.pi)) / k


@pytest.mark.parametrize("q,n", [(1, 1), (2, 2), (3, 1)])
def test_flow_stage_against_exact_solution(q, n):
    k = 2 * math.pi * q * n
    spec = FamilySpec((FlowStage((FourierMode(q * n, Poly2.constant(1.0)),), 0.05, 64),))
    xs = np.linspace(0.0, 1.0, 97)[:-1] + 1e-3
    assert np.allclose(spec.lift(0, 0, xs), _exact_flow(xs, k, 1.0, 0.05), atol=1e-8)


def test_lemma1_construction_and_errors():
    spec = build_lemma1_family(Lemma1Params(1, 2, 2))
    xs = np.linspace(0, 1, 200)
    # field is 1/q periodic, so the flow commutes with the rotation by p/q
    shifted = spec.lift(0, 0, xs + 0.5)
    assert np.allclose(shifted, spec.lift(0, 0, xs) + 0.5, atol=1e-13)
    with pytest.raises(DegenerateConstruction):
        build_lemma1_family(Lemma1Params(0, 1, 1, delta=0.0))
    with pytest.raises(ValidationError):
        Lemma1Params(2, 4, 1)
    with pytest.raises(ValidationError):
        Lemma1Params(0, 1, 0)


def test_embed_theta_and_monotonicity():
    spec = embed_theta(build_lemma1_family(Lemma1Params(0, 1, 3)))
    assert spec.monotone_in_theta
    assert theta_monotonicity(spec) == pytest.approx(1.0)
    assert spec.lift(0, 0.25, [0.1])[0] == pytest.approx(spec.lift(0, 0.0, [0.1])[0] + 0.25)


def test_homotopy_endpoints_and_blend():
    f0 = arnold_family(s=0.5)
    f1 = embed_theta(build_lemma1_family(Lemma1Params(0, 1, 3)))
    h = build_homotopy(f0, f1)
    xs = np.linspace(0, 1, 33)
    assert np.allclose(h.lift(0.0, 0.1, xs), f0.lift(0, 0.1, xs), atol=1e-14)
    assert np.allclose(h.lift(1.0, 0.1, xs), f1.lift(0, 0.1, xs), atol=1e-14)
    w = smoothstep(0.3)
    mid = (1 - w) * f0.lift(0, 0.1, xs) + w * f1.lift(0, 0.1, xs)
    assert np.allclose(h.lift(0.3, 0.1, xs), mid, atol=1e-14)
    assert smoothstep(0.0) == 0.0 and smoothstep(1.0) == 1.0
    eps = 1e-6
    assert abs(smoothstep(eps) - smoothstep(0.0)) / eps < 1e-5
    with pytest.raises(ValidationError):
        build_homotopy(arnold_family(), f1)
    with pytest.raises(NotImplementedError):
        h.freeze_s(0.5)


def test_constant_homotopy():
    f = arnold_family(s=0.5)
    h = build_homotopy(f, f)
    assert np.allclose(h.lift(0.2, 0.05, [0.3]), h.lift(0.9, 0.05, [0.3]), atol=1e-15)


def test_conjugate_family_is_conjugate():
    base = arnold_family(s=0.5)
    h = FourierStage(Poly2.constant(0.3), (FourierMode(1, Poly2.constant(0.1)),))
    conj = conjugate_family(base, h)
    hx = FamilySpec((h,))
    xs = np.linspace(0, 1, 50)
    lhs = hx.lift(0, 0, conj.lift(0, 0.07, xs))
    rhs = base.lift(0, 0.07, hx.lift(0, 0, xs))
    assert np.allclose(lhs, rhs, atol=1e-12)
    with pytest.raises(ValidationError):
        conjugate_family(base, FourierStage(Poly2.theta(), ()))


def test_non_diffeomorphic_homotopy_rejected():
    # blends of diffeomorphisms stay diffeomorphisms, so only a bad endpoint can fail
    f0 = FamilySpec((FourierStage(Poly2.theta(), (FourierMode(1, Poly2.constant(0.2)),)),),
                    ParamBox((0, 0), (-1, 1)), True)
    with pytest.raises(NotDiffeomorphism) as info:
        build_homotopy(f0, arnold_family(s=0.5))
    assert info.value.at[2] == pytest.approx(0.5, abs=1e-2)


def test_spec_json_roundtrip(tmp_path):
    spec = conjugate_family(build_homotopy(arnold_family(s=0.5), embed_theta(build_lemma1_family(
        Lemma1Params(0, 1, 2)))), FourierStage(Poly2.constant(0.3), ()))
    path = tmp_path / "f.json"
    spec.save(path)
    back = FamilySpec.load(path)
    assert back == spec
    assert np.array_equal(back.lift(0.4, 0.02, [0.1, 0.7]), spec.lift(0.4, 0.02, [0.1, 0.7]))


def test_freeze_s_and_rigid_family():
    frozen = arnold_family().freeze_s(0.5)
    assert not frozen.depends_on_s
    assert frozen.lift(0.9, 0.1, [0.3])[0] == pytest.approx(arnold_closed(0.5, 0.1, 0.3))
    assert rigid_family().lift(0, 0.25, [0.5])[0] == 0.75
    assert RotationStage(Poly2.theta()).to_json()["type"] == "rotation"
