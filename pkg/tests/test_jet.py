import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from circlebif.errors import BasePointMismatch, CompositionBaseMismatch
from circlebif.family import ParamBox, arnold_family, iterate_jet
from circlebif.jet import (DX, FIRST, FULL, XONLY, Jet3, cexp, cmul, csincos, jet_arith, jet_compose,
                           jet_transcendental, project, variable)

coef = st.floats(-3.0, 3.0, allow_nan=False)
poly = st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3)), coef, max_size=6)


def poly_product(a, b):
    """Truncated product of monomial dictionaries (independent of the jet tables)."""
    out = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            if sum(e) <= 3:
                out[e] = out.get(e, 0.0) + ca * cb
    return out


def as_coeffs(p):
    c = np.zeros(FULL.size)
    for e, v in p.items():
        if sum(e) <= 3:
            c[FULL.index(*e)] += v
    return c


def test_table_sizes_and_order():
    assert (FULL.size, XONLY.size, FIRST.size, DX.size) == (20, 4, 4, 2)
    assert FULL.exps[:4].tolist() == [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]
    assert FULL.index(4, 0, 0) == -1
    assert FULL.degree == 3 and DX.degree == 1


@given(poly, poly)
def test_product_matches_polynomial_oracle(a, b):
    got = cmul(as_coeffs(a), as_coeffs(b), FULL)
    assert np.allclose(got, as_coeffs(poly_product(a, b)), atol=1e-12)


@given(poly, poly, poly)
def test_product_associative_and_commutative(a, b, c):
    A, B, C = (as_coeffs(p) for p in (a, b, c))
    assert np.allclose(cmul(A, B, FULL), cmul(B, A, FULL), atol=1e-12)
    assert np.allclose(cmul(cmul(A, B, FULL), C, FULL), cmul(A, cmul(B, C, FULL), FULL), atol=1e-9)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_sin_of_linear_matches_taylor(x0, s0, t0):
    # sin(2 pi x + s) about (x0, s0): partials are known in closed form
    base = (x0, s0, t0)
    arg = Jet3.coordinate("x", base, 2 * math.pi) + Jet3.coordinate("s", base)
    j = arg.sin()
    a = 2 * math.pi * x0 + s0
    assert j.value == pytest.approx(math.sin(a), abs=1e-12)
    assert j.dx == pytest.approx(2 * math.pi * math.cos(a), abs=1e-12)
    assert j.dxs == pytest.approx(-2 * math.pi * math.sin(a), abs=1e-11)
    assert j.dxxx == pytest.approx(-(2 * math.pi) ** 3 * math.cos(a), abs=1e-9)
    assert j.dtheta == 0.0


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_exp_and_sincos_identities(x0, t0):
    base = (x0, 0.3, t0)
    u = Jet3.from_polynomial({(1, 0, 0): 0.7, (0, 0, 1): -0.4, (1, 0, 1): 0.2}, base)
    s, c = u.sin(), u.cos()
    one = s * s + c * c
    assert np.allclose(one.coeffs, Jet3.constant(1.0, base).coeffs, atol=1e-12)
    e, en = u.exp(), (-u).exp()
    assert np.allclose((e * en).coeffs, Jet3.constant(1.0, base).coeffs, atol=1e-12)


def test_chain_rule_against_direct_expansion():
    base = (0.2, 0.1, -0.3)
    inner = Jet3.from_polynomial({(1, 0, 0): 1.0, (0, 1, 0): 0.5, (1, 0, 1): 0.25, (2, 0, 0): 0.3}, base)
    y0 = inner.value
    outer = Jet3.coordinate("x", (y0, 0.1, -0.3)).sin()
    assert jet_compose(outer, inner).allclose(inner.sin(), atol=1e-12)


def test_compose_and_arith_errors():
    a = Jet3.constant(1.0, (0.0, 0.0, 0.0))
    b = Jet3.constant(1.0, (0.5, 0.0, 0.0))
    with pytest.raises(BasePointMismatch):
        a + b
    with pytest.raises(CompositionBaseMismatch):
        jet_compose(Jet3.constant(0.0, (0.0, 0.1, 0.0)), a)
    with pytest.raises(CompositionBaseMismatch):
        jet_compose(Jet3.constant(0.0, (3.0, 0.0, 0.0)), a)
    with pytest.raises(ValueError):
        Jet3((0, 0, 0), np.full(FULL.size, np.nan))
    with pytest.raises(ValueError):
        jet_arith(a, a, "div")
    with pytest.raises(ValueError):
        jet_transcendental(a, "tan")


def test_projection_and_batched_ops():
    x = variable(FULL, 0, 0.3)
    sin_full, _ = csincos(x, FULL)
    sin_x, _ = csincos(project(x, FULL, XONLY), XONLY)
    assert np.allclose(project(sin_full, FULL, XONLY), sin_x)
    batch = np.stack([variable(XONLY, 0, v) for v in (0.1, 0.2, 0.3)], axis=1)
    assert np.allclose(cexp(batch, XONLY)[0], np.exp([0.1, 0.2, 0.3]))


def _mp_arnold_iterate(q):
    def f(x, s, t):
        for _ in range(q):
            x = x + t + s / (2 * mpmath.pi) * mpmath.sin(2 * mpmath.pi * x)
        return x
    return f


@pytest.mark.parametrize("q", [1, 2, 3])
def test_iterate_partials_against_mpmath(q):
    # s = 1 is a critical map, so validation needs a box strictly below it
    spec = arnold_family(box=ParamBox((0.0, 0.95), (-0.5, 0.5)))
    rng = np.random.default_rng(7 + q)
    f = _mp_arnold_iterate(q)
    with mpmath.workdps(40):
        for _ in range(4):
            s, t, x = rng.uniform(0, 0.95), rng.uniform(-0.5, 0.5), rng.uniform(0, 1)
            jet = iterate_jet(spec, q, s, t, x).jet
            for (i, j, k), name in [((0, 0, 0), "value"), ((1, 0, 0), "dx"), ((2, 0, 0), "dxx"),
                                    ((3, 0, 0), "dxxx"), ((0, 1, 0), "ds"), ((0, 0, 1), "dtheta"),
                                    ((1, 1, 0), "dxs"), ((1, 0, 1), "dxtheta")]:
                ref = float(mpmath.diff(f, (x, s, t), (i, j, k)))
                assert abs(jet.tracked()[name] - ref) <= 1e-10 * max(1.0, abs(ref)), name


def test_iterate_composition_is_consistent():
    spec = arnold_family()
    s, t, x = 0.7, 0.13, 0.41
    y = float(spec.lift(s, t, [x], 2)[0])
    j5 = spec.jet(s, t, x, 5)
    inner = spec.jet(s, t, x, 2)
    outer = spec.jet(s, t, y, 3)
    assert jet_compose(outer, inner).allclose(j5, atol=1e-9, rtol=1e-9)


def test_translation_equivariance():
    spec = arnold_family()
    a = spec.jet(0.6, 0.2, 0.3, 3)
    b = spec.jet(0.6, 0.2, 1.3, 3)
    assert b.value == pytest.approx(a.value + 1.0, abs=1e-12)
    assert np.allclose(a.coeffs[1:], b.coeffs[1:], atol=1e-10)
