"""Parametric families of circle-diffeomorphism lifts.

A family is an ordered chain of stages applied left to right to the phase
variable; every stage is a degree-one lift, so the chain is one as well.
Parameter dependence enters only through :class:`Poly2` coefficients, which
lets a family be compiled once into flat arrays and evaluated by the kernels
in :mod:`circlebif.kernels`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from math import comb
from typing import NamedTuple, Union

import numpy as np

from . import kernels
from .errors import DegenerateConstruction, NotDiffeomorphism, PreconditionError, ValidationError
from .jet import DX, FIRST, FULL, Jet3, JetTable
from .kernels import _ops as ops

Number = Union[float, Fraction]


class ParamPoint(NamedTuple):
    s: float
    theta: float


def as_point(at) -> ParamPoint:
    if isinstance(at, ParamPoint):
        return at
    s, theta = at
    return ParamPoint(float(s), float(theta))


def parse_rational(text) -> Fraction:
    """Parse ``"p/q"`` (or an int) into a reduced fraction with q >= 1."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    text = str(text).strip()
    if "/" not in text:
        raise ValueError(f"rational must look like 'p/q', got {text!r}")
    num, den = (int(v) for v in text.split("/"))
    if den < 1:
        raise ValueError(f"denominator must be >= 1, got {text!r}")
    return Fraction(num, den)


def format_rational(r: Fraction) -> str:
    return f"{r.numerator}/{r.denominator}"


def _coef_to_json(c):
    return format_rational(c) if isinstance(c, Fraction) else float(c)


def _coef_from_json(c):
    if isinstance(c, str):
        return parse_rational(c)
    return float(c)


# ---------------------------------------------------------------- Poly2

@dataclass(frozen=True)
class Poly2:
    """Polynomial ``sum coef * s^i * theta^j`` with (i, j, coef) terms."""

    terms: tuple = ()

    def __post_init__(self):
        merged = {}
        for i, j, c in self.terms:
            if i < 0 or j < 0:
                raise ValueError("Poly2 exponents must be non-negative")
            merged[(int(i), int(j))] = merged.get((int(i), int(j)), 0) + c
        norm = tuple((i, j, c) for (i, j), c in sorted(merged.items()) if c != 0)
        object.__setattr__(self, "terms", norm)

    @classmethod
    def constant(cls, c: Number) -> "Poly2":
        return cls(((0, 0, c),))

    @classmethod
    def theta(cls, coef: Number = 1.0) -> "Poly2":
        return cls(((0, 1, coef),))

    @classmethod
    def s(cls, coef: Number = 1.0) -> "Poly2":
        return cls(((1, 0, coef),))

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def depends_on_s(self) -> bool:
        return any(i > 0 for i, _, _ in self.terms)

    @property
    def depends_on_theta(self) -> bool:
        return any(j > 0 for _, j, _ in self.terms)

    def value(self, s: float, theta: float) -> float:
        return float(sum(float(c) * s ** i * theta ** j for i, j, c in self.terms))

    def jet(self, s: float, theta: float, table: JetTable = FULL) -> np.ndarray:
        """Taylor coefficients in (Ds, Dtheta) about (s, theta) on ``table``'s basis."""
        out = np.zeros(table.size)
        for n, (ex, es, et) in enumerate(table.exps.tolist()):
            if ex:
                continue
            acc = 0.0
            for i, j, c in self.terms:
                if es > i or et > j:
                    continue
                acc += float(c) * comb(i, es) * s ** (i - es) * comb(j, et) * theta ** (j - et)
            out[n] = acc
        return out

    def freeze_s(self, s: float) -> "Poly2":
        return Poly2(tuple((0, j, float(c) * s ** i if i else c) for i, j, c in self.terms))

    def __add__(self, other: "Poly2") -> "Poly2":
        return Poly2(self.terms + other.terms)

    def scaled(self, k: Number) -> "Poly2":
        return Poly2(tuple((i, j, c * k) for i, j, c in self.terms))

    def to_json(self):
        return [{"i": i, "j": j, "coef": _coef_to_json(c)} for i, j, c in self.terms]

    @classmethod
    def from_json(cls, data) -> "Poly2":
        if isinstance(data, dict):
            data = data.get("terms", [])
        if isinstance(data, (int, float, str)):
            return cls.constant(_coef_from_json(data))
        return cls(tuple((int(t["i"]), int(t["j"]), _coef_from_json(t["coef"])) for t in data))


ZERO = Poly2()


# ---------------------------------------------------------------- stages

@dataclass(frozen=True)
class FourierMode:
    k: int
    amp_sin: Poly2 = ZERO
    amp_cos: Poly2 = ZERO

    def __post_init__(self):
        if int(self.k) < 1:
            raise ValueError("Fourier modes need k >= 1")

    def polys(self):
        return (self.amp_sin, self.amp_cos)

    def map_polys(self, fn):
        return FourierMode(self.k, fn(self.amp_sin), fn(self.amp_cos))

    def to_json(self):
        return {"k": int(self.k), "ampSin": self.amp_sin.to_json(), "ampCos": self.amp_cos.to_json()}

    @classmethod
    def from_json(cls, d):
        return cls(int(d["k"]), Poly2.from_json(d.get("ampSin", [])), Poly2.from_json(d.get("ampCos", [])))


@dataclass(frozen=True)
class RotationStage:
    """x -> x + offset(s, theta)."""

    offset: Poly2

    def polys(self):
        return (self.offset,)

    def map_polys(self, fn):
        return RotationStage(fn(self.offset))

    def to_json(self):
        return {"type": "rotation", "offset": self.offset.to_json()}


@dataclass(frozen=True)
class FourierStage:
    """x -> x + offset + sum_k (a_k sin 2 pi k x + b_k cos 2 pi k x)."""

    offset: Poly2 = ZERO
    modes: tuple = ()

    def polys(self):
        return (self.offset,) + tuple(p for m in self.modes for p in m.polys())

    def map_polys(self, fn):
        return FourierStage(fn(self.offset), tuple(m.map_polys(fn) for m in self.modes))

    def to_json(self):
        return {"type": "fourier", "offset": self.offset.to_json(),
                "modes": [m.to_json() for m in self.modes]}


@dataclass(frozen=True)
class FlowStage:
    """Time-``delta`` map of x' = v(x), integrated by fixed-step RK4."""

    field: tuple
    delta: float
    steps: int = 64

    def polys(self):
        return tuple(p for m in self.field for p in m.polys())

    def map_polys(self, fn):
        return FlowStage(tuple(m.map_polys(fn) for m in self.field), self.delta, self.steps)

    def to_json(self):
        return {"type": "flow", "field": [m.to_json() for m in self.field],
                "delta": float(self.delta), "steps": int(self.steps)}


@dataclass(frozen=True)
class InverseStage:
    """Inverse of a Fourier lift, solved pointwise."""

    of: FourierStage

    def polys(self):
        return self.of.polys()

    def map_polys(self, fn):
        return InverseStage(self.of.map_polys(fn))

    def to_json(self):
        return {"type": "inverse", "of": self.of.to_json()}


@dataclass(frozen=True)
class HomotopyStage:
    """Blend of two s-independent chains: y0 + sigma(s) (y1 - y0)."""

    family0: tuple
    family1: tuple
    blend: str = "smoothstep"

    def polys(self):
        return tuple(p for st in self.family0 + self.family1 for p in st.polys()) + (self.weight,)

    @property
    def weight(self) -> Poly2:
        if self.blend != "smoothstep":
            raise ValueError(f"unsupported blend {self.blend!r}")
        return Poly2(((2, 0, 3.0), (3, 0, -2.0)))

    def map_polys(self, fn):
        # the blend weight is regenerated, never transformed
        return HomotopyStage(tuple(st.map_polys(fn) for st in self.family0),
                             tuple(st.map_polys(fn) for st in self.family1), self.blend)

    def to_json(self):
        return {"type": "homotopy", "family0": [st.to_json() for st in self.family0],
                "family1": [st.to_json() for st in self.family1], "blend": self.blend}


Stage = Union[RotationStage, FourierStage, FlowStage, InverseStage, HomotopyStage]


def stage_from_json(d) -> Stage:
    kind = d["type"]
    if kind == "rotation":
        return RotationStage(Poly2.from_json(d["offset"]))
    if kind == "fourier":
        return FourierStage(Poly2.from_json(d.get("offset", [])),
                            tuple(FourierMode.from_json(m) for m in d.get("modes", [])))
    if kind == "flow":
        return FlowStage(tuple(FourierMode.from_json(m) for m in d["field"]), float(d["delta"]),
                         int(d.get("steps", 64)))
    if kind == "inverse":
        inner = stage_from_json(d["of"])
        if not isinstance(inner, FourierStage):
            raise ValueError("inverse stages wrap a fourier stage")
        return InverseStage(inner)
    if kind == "homotopy":
        return HomotopyStage(tuple(stage_from_json(s) for s in d["family0"]),
                             tuple(stage_from_json(s) for s in d["family1"]),
                             d.get("blend", "smoothstep"))
    raise ValueError(f"unknown stage type {kind!r}")


# ---------------------------------------------------------------- compilation

@dataclass(frozen=True, eq=False)
class Program:
    code: np.ndarray
    modes: np.ndarray
    fdata: np.ndarray
    depth: int
    polys: tuple

    def param_values(self, s, theta):
        return np.array([p.value(s, theta) for p in self.polys], dtype=float)

    def param_jets(self, s, theta, table):
        if not self.polys:
            return np.zeros((0, table.size))
        return np.array([p.jet(s, theta, table) for p in self.polys])


class _Compiler:
    def __init__(self):
        self.polys, self.code, self.modes, self.fdata = [], [], [], []
        self._pidx = {}
        self.depth = 1
        self.max_depth = 1

    def poly(self, p: Poly2) -> int:
        if p not in self._pidx:
            self._pidx[p] = len(self.polys)
            self.polys.append(p)
        return self._pidx[p]

    def add_modes(self, modes) -> tuple:
        start = len(self.modes)
        for m in modes:
            self.modes.append((int(m.k), self.poly(m.amp_sin), self.poly(m.amp_cos)))
        return start, len(self.modes) - start

    def emit(self, op, a=0, b=0, c=0, d=0):
        self.code.append((op, a, b, c, d))

    def push(self):
        self.depth += 1
        self.max_depth = max(self.max_depth, self.depth)

    def chain(self, stages):
        for st in stages:
            if isinstance(st, RotationStage):
                self.emit(ops.ROT, self.poly(st.offset))
            elif isinstance(st, FourierStage):
                m0, mc = self.add_modes(st.modes)
                self.emit(ops.FOURIER, self.poly(st.offset), m0, mc)
            elif isinstance(st, FlowStage):
                if int(st.steps) < 1:
                    raise ValueError("flow stages need at least one RK4 step")
                m0, mc = self.add_modes(st.field)
                self.fdata.append(float(st.delta))
                self.emit(ops.FLOW, m0, mc, len(self.fdata) - 1, int(st.steps))
            elif isinstance(st, InverseStage):
                m0, mc = self.add_modes(st.of.modes)
                self.emit(ops.INVERSE, self.poly(st.of.offset), m0, mc)
            elif isinstance(st, HomotopyStage):
                w = self.poly(st.weight)
                self.emit(ops.DUP)
                self.push()
                self.chain(st.family0)
                self.emit(ops.SWAP)
                self.chain(st.family1)
                self.emit(ops.BLEND, w)
                self.depth -= 1
            else:
                raise TypeError(f"not a stage: {st!r}")

    def program(self) -> Program:
        self.poly(ZERO)
        code = np.array(self.code, dtype=np.int64).reshape(-1, 5)
        modes = np.array(self.modes, dtype=np.int64).reshape(-1, 3)
        return Program(code, modes, np.array(self.fdata, dtype=float), self.max_depth, tuple(self.polys))


def compile_stages(stages) -> Program:
    comp = _Compiler()
    comp.chain(stages)
    return comp.program()


# ---------------------------------------------------------------- family

@dataclass(frozen=True)
class ParamBox:
    s: tuple = (0.0, 1.0)
    theta: tuple = (-1.0, 1.0)

    def contains(self, s, theta, tol=0.0) -> bool:
        return (self.s[0] - tol <= s <= self.s[1] + tol
                and self.theta[0] - tol <= theta <= self.theta[1] + tol)

    def to_json(self):
        return {"s": [float(v) for v in self.s], "theta": [float(v) for v in self.theta]}

    @classmethod
    def from_json(cls, d):
        return cls(tuple(float(v) for v in d["s"]), tuple(float(v) for v in d["theta"]))


@dataclass(frozen=True)
class IterateJet:
    jet: Jet3
    winding: int
    q: int


@dataclass(frozen=True)
class ValidationReport:
    min_derivative: float
    ok: bool
    at: tuple  # (s, theta, x) where the minimum occurs

    def to_json(self):
        return {"minDerivative": self.min_derivative, "ok": self.ok,
                "at": {"s": self.at[0], "theta": self.at[1], "x": self.at[2]}}


@dataclass(frozen=True)
class FamilySpec:
    stages: tuple
    param_box: ParamBox = field(default_factory=ParamBox)
    monotone_in_theta: bool = False

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))

    # evaluation ---------------------------------------------------------

    @cached_property
    def program(self) -> Program:
        return compile_stages(self.stages)

    def lift(self, s, theta, xs, n: int = 1) -> np.ndarray:
        """Values of the n-th iterate of the lift at each point of ``xs``."""
        prog = self.program
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        return kernels.iterate_values(prog.code, prog.modes, prog.fdata, prog.depth,
                                      prog.param_values(s, theta), xs, int(n))

    def jets(self, s, theta, xs, n: int = 1, table: JetTable = FULL) -> np.ndarray:
        """Jets of the n-th iterate at each point of ``xs``; shape (len(xs), table.size)."""
        prog = self.program
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        return kernels.iterate_jets(prog.code, prog.modes, prog.fdata, prog.depth,
                                    prog.param_values(s, theta),
                                    prog.param_jets(s, theta, table), xs, int(n), table)

    def jet(self, s, theta, x, n: int = 1) -> Jet3:
        return Jet3((x, s, theta), self.jets(s, theta, [x], n, FULL)[0])

    # structure ----------------------------------------------------------

    def _all_polys(self):
        return [p for st in self.stages for p in st.polys()]

    @property
    def depends_on_s(self) -> bool:
        return any(p.depends_on_s for p in self._all_polys())

    @property
    def depends_on_theta(self) -> bool:
        return any(p.depends_on_theta for p in self._all_polys())

    def freeze_s(self, s: float) -> "FamilySpec":
        """One-parameter family obtained by fixing s."""
        stages = tuple(_freeze_stage(st, s) for st in self.stages)
        return replace(self, stages=stages, param_box=replace(self.param_box, s=(0.0, 0.0)))

    @cached_property
    def validation(self) -> ValidationReport:
        return validate_diffeo(self)

    def require_valid(self):
        rep = self.validation
        if not rep.ok:
            raise NotDiffeomorphism(
                f"d/dx of the lift is {rep.min_derivative:.6g} at (s, theta, x) = {rep.at}", rep.at)
        return rep

    # serialization ------------------------------------------------------

    def to_json(self):
        return {"paramBox": self.param_box.to_json(), "monotoneInTheta": bool(self.monotone_in_theta),
                "stages": [st.to_json() for st in self.stages]}

    @classmethod
    def from_json(cls, d) -> "FamilySpec":
        return cls(tuple(stage_from_json(s) for s in d["stages"]),
                   ParamBox.from_json(d.get("paramBox", ParamBox().to_json())),
                   bool(d.get("monotoneInTheta", False)))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps() + "\n")

    @classmethod
    def load(cls, path) -> "FamilySpec":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def _freeze_stage(st, s):
    if isinstance(st, HomotopyStage):
        # the blend weight is the s-dependence; evaluate it via lift(s, ...) instead
        raise NotImplementedError("freezing s inside a homotopy stage is not supported")
    return st.map_polys(lambda p: p.freeze_s(s))


# ---------------------------------------------------------------- validation

def _param_grid(lo, hi, n, used):
    if not used or lo == hi:
        return np.array([lo])
    return np.linspace(lo, hi, n)


def validate_diffeo(spec: FamilySpec, grid_x: int = 256, grid_params: int = 16) -> ValidationReport:
    """Minimum of d/dx over an x-grid times a parameter grid; ok iff positive.

    Parameter axes the family does not depend on collapse to one value.
    """
    if grid_x < 256 or grid_params < 16:
        raise PreconditionError("validation needs grid_x >= 256 and grid_params >= 16")
    xs = np.arange(grid_x) / grid_x
    box = spec.param_box
    best = (math.inf, (0.0, 0.0, 0.0))
    for s in _param_grid(*box.s, grid_params, spec.depends_on_s):
        for th in _param_grid(*box.theta, grid_params, spec.depends_on_theta):
            d = spec.jets(s, th, xs, 1, DX)[:, 1]
            i = int(np.argmin(d))
            if d[i] < best[0]:
                best = (float(d[i]), (float(s), float(th), float(xs[i])))
    return ValidationReport(best[0], best[0] > 0.0, best[1])


def theta_monotonicity(spec: FamilySpec, s: float | None = None, grid_x: int = 128,
                       grid_theta: int = 16) -> float:
    """Minimum of d/dtheta of the lift over a grid (at fixed s when given)."""
    if not spec.depends_on_theta:
        return 0.0
    xs = np.arange(grid_x) / grid_x
    box = spec.param_box
    svals = [s] if s is not None else _param_grid(*box.s, grid_theta, spec.depends_on_s)
    idx = FIRST.index(0, 0, 1)
    worst = math.inf
    for sv in svals:
        for th in np.linspace(*box.theta, grid_theta):
            worst = min(worst, float(spec.jets(sv, th, xs, 1, FIRST)[:, idx].min()))
    return worst


def iterate_jet(spec: FamilySpec, q: int, s: float, theta: float, x: float,
                validate: bool = True) -> IterateJet:
    """Jet of the q-th iterate's lift at (x, s, theta) plus its integer winding."""
    if q < 1:
        raise PreconditionError("q must be >= 1")
    if validate:
        spec.require_valid()
    jet = spec.jet(s, theta, x, q)
    return IterateJet(jet, int(math.floor(jet.value)), int(q))


# ---------------------------------------------------------------- constructors

def rigid_rotation(alpha: Number) -> FamilySpec:
    """Constant rotation x -> x + alpha."""
    return FamilySpec((RotationStage(Poly2.constant(alpha)),))


def rigid_family(box: ParamBox | None = None) -> FamilySpec:
    """x -> x + theta."""
    return FamilySpec((RotationStage(Poly2.theta()),), box or ParamBox(), True)


def arnold_family(s: float | None = None, box: ParamBox | None = None) -> FamilySpec:
    """x -> x + theta + (s / 2 pi) sin 2 pi x; fixed s gives a theta-family."""
    if s is None:
        amp = Poly2.s(1.0 / (2.0 * math.pi))
        box = box or ParamBox((0.0, 1.0), (-1.0, 1.0))
    else:
        amp = Poly2.constant(s / (2.0 * math.pi))
        box = box or ParamBox((0.0, 0.0), (-1.0, 1.0))
    return FamilySpec((FourierStage(Poly2.theta(), (FourierMode(1, amp),)),), box, True)


def fourier_family(offset: Poly2, modes, box: ParamBox | None = None,
                   monotone_in_theta: bool = False) -> FamilySpec:
    return FamilySpec((FourierStage(offset, tuple(modes)),), box or ParamBox(), monotone_in_theta)


def cusp_family(scale: float = 1.0, box: ParamBox | None = None) -> FamilySpec:
    """x + theta + scale (s sin 2 pi x + 0.1 sin 4 pi x); cusp at (0.2, 0, 0.5) for any scale."""
    modes = (FourierMode(1, Poly2.s(scale)), FourierMode(2, Poly2.constant(0.1 * scale)))
    return fourier_family(Poly2.theta(), modes, box or ParamBox((0.0, 0.5), (-0.2, 0.2)), True)


def intersection_family(box: ParamBox | None = None) -> FamilySpec:
    """x + theta + s sin 2 pi x + 0.02 sin 4 pi x + 0.015 cos 2 pi x."""
    modes = (FourierMode(1, Poly2.s(1.0), Poly2.constant(0.015)),
             FourierMode(2, Poly2.constant(0.02)))
    return fourier_family(Poly2.theta(), modes, box or ParamBox((0.0, 0.08), (-0.15, 0.15)), True)


@dataclass(frozen=True)
class Lemma1Params:
    p: int
    q: int
    N: int
    delta: float = 0.05
    amplitude: float = 1.0

    def __post_init__(self):
        if self.q < 1 or self.N < 1:
            raise ValidationError("need q >= 1 and N >= 1")
        if math.gcd(self.p, self.q) != 1:
            raise ValidationError(f"{self.p}/{self.q} is not reduced")

    @property
    def rotation(self) -> Fraction:
        return Fraction(self.p, self.q)


def lemma1_field(params: Lemma1Params) -> tuple:
    return (FourierMode(params.q * params.N, Poly2.constant(float(params.amplitude))),)


def build_lemma1_family(params: Lemma1Params) -> FamilySpec:
    """Rational rotation after the time-delta map of a 1/q-periodic flow.

    The field ``A sin(2 pi q N x)`` has N sinks and N sources in every
    interval of length 1/q, so the map has 2N periodic orbits of period q.
    """
    if params.delta == 0 or params.amplitude == 0:
        raise DegenerateConstruction("delta and amplitude must be nonzero; the result would be a rigid rotation")
    stages = (FlowStage(lemma1_field(params), float(params.delta), 64),
              RotationStage(Poly2.constant(params.rotation)))
    spec = FamilySpec(stages, ParamBox((0.0, 0.0), (0.0, 0.0)), False)
    spec.require_valid()
    return spec


def embed_theta(spec: FamilySpec, theta_range=(-1.0, 1.0)) -> FamilySpec:
    """theta-family x -> theta + lift(x) built from a parameter-free lift."""
    stages = spec.stages + (RotationStage(Poly2.theta()),)
    return FamilySpec(stages, ParamBox((0.0, 0.0), tuple(theta_range)), True)


def build_homotopy(f0: FamilySpec, f1: FamilySpec, blend: str = "smoothstep") -> FamilySpec:
    """Two-parameter family: s blends the theta-families f0 (s=0) and f1 (s=1)."""
    for f in (f0, f1):
        if f.depends_on_s:
            raise ValidationError("homotopy endpoints must not depend on s; freeze s first")
    if tuple(f0.param_box.theta) != tuple(f1.param_box.theta):
        raise ValidationError("homotopy endpoints must share the theta range")
    stage = HomotopyStage(f0.stages, f1.stages, blend)
    stage.weight  # rejects unknown blends
    spec = FamilySpec((stage,), ParamBox((0.0, 1.0), f0.param_box.theta),
                      f0.monotone_in_theta and f1.monotone_in_theta)
    spec.require_valid()
    return spec


def smoothstep(s):
    return 3.0 * s ** 2 - 2.0 * s ** 3


def conjugate_family(spec: FamilySpec, h: FourierStage) -> FamilySpec:
    """The family h^-1 o f o h, with h a parameter-free Fourier lift."""
    if any(p.depends_on_s or p.depends_on_theta for p in h.polys()):
        raise ValidationError("the conjugating map must not depend on parameters")
    FamilySpec((h,)).require_valid()
    return replace(spec, stages=(h,) + spec.stages + (InverseStage(h),))
