"""Truncated Taylor arithmetic in (x, s, theta).

A jet is stored as a flat coefficient vector over a fixed monomial basis
``Dx^i Ds^j Dtheta^k``.  The full basis (total degree <= 3, 20 monomials) is
what the saddle-node and cusp conditions need; smaller bases (x only, or
first order) share the same code path through :class:`JetTable` and are used
where only a few derivatives matter.

Coefficient arrays may carry trailing batch axes: shape ``(n,)`` is a single
jet, ``(n, m)`` is ``m`` jets evaluated side by side.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import BasePointMismatch, CompositionBaseMismatch

COMPOSE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class JetTable:
    """Monomial basis plus its truncated multiplication table."""

    name: str
    exps: np.ndarray  # (n, 3) exponents in (x, s, theta)
    mul_a: np.ndarray
    mul_b: np.ndarray
    mul_c: np.ndarray

    @property
    def size(self) -> int:
        return self.exps.shape[0]

    @property
    def degree(self) -> int:
        return int(self.exps.sum(axis=1).max())

    @cached_property
    def _lookup(self):
        return {tuple(int(v) for v in e): n for n, e in enumerate(self.exps)}

    def index(self, i: int, j: int, k: int) -> int:
        """Position of ``Dx^i Ds^j Dtheta^k`` or -1 when outside the basis."""
        return self._lookup.get((i, j, k), -1)

    @cached_property
    def factorials(self) -> np.ndarray:
        return np.array([math.factorial(int(i)) * math.factorial(int(j)) * math.factorial(int(k))
                         for i, j, k in self.exps], dtype=float)


def make_table(name: str, degree: int, variables=(True, True, True)) -> JetTable:
    exps = []
    for d in range(degree + 1):
        for i in range(d, -1, -1):
            for j in range(d - i, -1, -1):
                k = d - i - j
                e = (i, j, k)
                if all(v or c == 0 for v, c in zip(variables, e)):
                    exps.append(e)
    exps = np.array(exps, dtype=np.int64)
    pos = {tuple(e): n for n, e in enumerate(exps.tolist())}
    ma, mb, mc = [], [], []
    for a, ea in enumerate(exps.tolist()):
        for b, eb in enumerate(exps.tolist()):
            c = pos.get((ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]))
            if c is not None:
                ma.append(a)
                mb.append(b)
                mc.append(c)
    as_i64 = lambda v: np.array(v, dtype=np.int64)  # noqa: E731
    return JetTable(name, exps, as_i64(ma), as_i64(mb), as_i64(mc))


FULL = make_table("full3", 3)
XONLY = make_table("x3", 3, (True, False, False))
FIRST = make_table("first", 1)
DX = make_table("dx", 1, (True, False, False))


# coefficient-array operations (numpy; also the fallback backend's primitives)

def cmul(a: np.ndarray, b: np.ndarray, table: JetTable) -> np.ndarray:
    a, b = np.broadcast_arrays(a, b)
    out = np.zeros(a.shape, dtype=float)
    np.add.at(out, table.mul_c, a[table.mul_a] * b[table.mul_b])
    return out


def _powers(u, table):
    u2 = cmul(u, u, table)
    u3 = cmul(u2, u, table)
    return u2, u3


def _perturbation(a):
    u = np.array(a, dtype=float, copy=True)
    u[0] = 0.0
    return u


def csincos(a: np.ndarray, table: JetTable):
    """sin and cos of a jet; the cubic series is exact at degree <= 3."""
    a0 = a[0]
    u = _perturbation(a)
    u2, u3 = _powers(u, table)
    s0, c0 = np.sin(a0), np.cos(a0)
    odd = u - u3 / 6.0
    even = -0.5 * u2
    sin = s0 * even + c0 * odd
    cos = c0 * even - s0 * odd
    sin[0] += s0
    cos[0] += c0
    return sin, cos


def cexp(a: np.ndarray, table: JetTable) -> np.ndarray:
    u = _perturbation(a)
    u2, u3 = _powers(u, table)
    e0 = np.exp(a[0])
    out = e0 * (u + 0.5 * u2 + u3 / 6.0)
    out[0] += e0
    return out


def variable(table: JetTable, which: int, at: float) -> np.ndarray:
    """Jet of the coordinate function ``which`` (0=x, 1=s, 2=theta)."""
    out = np.zeros(table.size)
    out[0] = at
    unit = [0, 0, 0]
    unit[which] = 1
    idx = table.index(*unit)
    if idx >= 0:
        out[idx] = 1.0
    return out


def project(coeffs: np.ndarray, src: JetTable, dst: JetTable) -> np.ndarray:
    """Restrict a jet to a smaller basis (drops monomials ``dst`` lacks)."""
    out = np.zeros((dst.size,) + coeffs.shape[1:])
    for n, e in enumerate(dst.exps.tolist()):
        idx = src.index(*e)
        if idx >= 0:
            out[n] = coeffs[idx]
    return out


# public single-jet type

class Jet3:
    """Degree-3 Taylor expansion in (x, s, theta) about ``base``."""

    __slots__ = ("base", "coeffs")
    table = FULL

    def __init__(self, base, coeffs=None):
        self.base = tuple(float(b) for b in base)
        if coeffs is None:
            coeffs = np.zeros(FULL.size)
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (FULL.size,):
            raise ValueError(f"expected {FULL.size} coefficients, got shape {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("jet coefficients must be finite")
        self.coeffs = coeffs

    @classmethod
    def constant(cls, value, base=(0.0, 0.0, 0.0)):
        c = np.zeros(FULL.size)
        c[0] = value
        return cls(base, c)

    @classmethod
    def coordinate(cls, which, base=(0.0, 0.0, 0.0), scale=1.0):
        """Jet of ``scale * coordinate``; ``which`` is 0/1/2 or 'x'/'s'/'theta'."""
        if isinstance(which, str):
            which = {"x": 0, "s": 1, "theta": 2}[which]
        return cls(base, scale * variable(FULL, which, base[which]))

    @classmethod
    def from_polynomial(cls, poly: dict, base=(0.0, 0.0, 0.0)):
        """Expand ``sum c * x^i s^j theta^k`` (``{(i, j, k): c}``) about ``base``."""
        acc = cls.constant(0.0, base)
        xs = [cls.coordinate(w, base) for w in range(3)]
        for (i, j, k), c in poly.items():
            term = cls.constant(c, base)
            for var, power in zip(xs, (i, j, k)):
                for _ in range(power):
                    term = term * var
            acc = acc + term
        return acc

    def coef(self, i: int, j: int, k: int) -> float:
        idx = FULL.index(i, j, k)
        return 0.0 if idx < 0 else float(self.coeffs[idx])

    def partial(self, i: int, j: int, k: int) -> float:
        """Mixed partial derivative of order (i, j, k) at the base point."""
        return math.factorial(i) * math.factorial(j) * math.factorial(k) * self.coef(i, j, k)

    value = property(lambda self: float(self.coeffs[0]))
    dx = property(lambda self: self.partial(1, 0, 0))
    dxx = property(lambda self: self.partial(2, 0, 0))
    dxxx = property(lambda self: self.partial(3, 0, 0))
    ds = property(lambda self: self.partial(0, 1, 0))
    dtheta = property(lambda self: self.partial(0, 0, 1))
    dxs = property(lambda self: self.partial(1, 1, 0))
    dxtheta = property(lambda self: self.partial(1, 0, 1))

    def tracked(self) -> dict:
        """Value plus the seven partials the saddle-node/cusp conditions use."""
        return {"value": self.value, "dx": self.dx, "dxx": self.dxx, "dxxx": self.dxxx,
                "ds": self.ds, "dtheta": self.dtheta, "dxs": self.dxs, "dxtheta": self.dxtheta}

    def _check(self, other):
        if not isinstance(other, Jet3):
            return Jet3.constant(other, self.base)
        if other.base != self.base:
            raise BasePointMismatch(f"jets expanded at {self.base} and {other.base}")
        return other

    def __add__(self, other):
        other = self._check(other)
        return Jet3(self.base, self.coeffs + other.coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._check(other)
        return Jet3(self.base, self.coeffs - other.coeffs)

    def __rsub__(self, other):
        return self._check(other) - self

    def __neg__(self):
        return Jet3(self.base, -self.coeffs)

    def __mul__(self, other):
        other = self._check(other)
        return Jet3(self.base, cmul(self.coeffs, other.coeffs, FULL))

    __rmul__ = __mul__

    def sin(self):
        return Jet3(self.base, csincos(self.coeffs, FULL)[0])

    def cos(self):
        return Jet3(self.base, csincos(self.coeffs, FULL)[1])

    def exp(self):
        return Jet3(self.base, cexp(self.coeffs, FULL))

    def allclose(self, other, atol=1e-12, rtol=0.0) -> bool:
        return self.base == other.base and np.allclose(self.coeffs, other.coeffs, atol=atol, rtol=rtol)

    def __repr__(self):
        nz = {tuple(int(v) for v in FULL.exps[n]): float(c)
              for n, c in enumerate(self.coeffs) if c != 0.0}
        return f"Jet3(base={self.base}, {nz})"


def jet_arith(a: Jet3, b: Jet3, op: str) -> Jet3:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown jet operation {op!r}")


def jet_transcendental(a: Jet3, fn: str) -> Jet3:
    try:
        return {"sin": Jet3.sin, "cos": Jet3.cos, "exp": Jet3.exp}[fn](a)
    except KeyError:
        raise ValueError(f"unsupported function {fn!r}") from None


def compose_coeffs(outer: np.ndarray, inner: np.ndarray, y0: float, table: JetTable = FULL) -> np.ndarray:
    """Coefficients of ``(x, s, t) -> Outer(Inner(x, s, t), s, t)``.

    ``outer`` is expanded in (Dy, Ds, Dtheta) about ``y0`` and ``inner`` in
    (Dx, Ds, Dtheta); both share the parameter base point.
    """
    u = np.array(inner, dtype=float, copy=True)
    u[0] -= y0
    ds = np.zeros(table.size)
    dt = np.zeros(table.size)
    ids, idt = table.index(0, 1, 0), table.index(0, 0, 1)
    if ids >= 0:
        ds[ids] = 1.0
    if idt >= 0:
        dt[idt] = 1.0
    one = np.zeros(table.size)
    one[0] = 1.0
    deg = table.degree
    pw = {}
    for name, base in (("u", u), ("s", ds), ("t", dt)):
        pw[name] = [one]
        for _ in range(deg):
            pw[name].append(cmul(pw[name][-1], base, table))
    out = np.zeros(table.size)
    for n, (i, j, k) in enumerate(table.exps.tolist()):
        c = outer[n]
        if c == 0.0:
            continue
        term = cmul(cmul(pw["u"][i], pw["s"][j], table), pw["t"][k], table)
        out += c * term
    return out


def jet_compose(outer: Jet3, inner: Jet3) -> Jet3:
    """Chain rule: ``outer`` (expanded about ``(y0, s0, t0)``) after ``inner``."""
    y0, s0, t0 = outer.base
    if inner.base[1:] != (s0, t0):
        raise CompositionBaseMismatch(
            f"parameter base points differ: {outer.base[1:]} vs {inner.base[1:]}")
    if abs(inner.value - y0) > COMPOSE_TOL:
        raise CompositionBaseMismatch(
            f"outer expanded at y0={y0!r} but inner value is {inner.value!r}")
    return Jet3(inner.base, compose_coeffs(outer.coeffs, inner.coeffs, y0))
