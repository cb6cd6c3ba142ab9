"""Saddle-node curves of period-q orbits in the (s, theta) plane.

The parabolic locus is the solution set in (s, theta, x) of

    H1 = Lift^q(x) - x - p = 0,    H2 = d/dx Lift^q(x) - 1 = 0,

a curve for generic families.  It is traced by pseudo-arclength
continuation; cusps add ``H3 = d2/dx2 Lift^q(x) = 0``.  Every derivative
comes from the degree-3 jet of the iterate, so one kernel call per point
gives residuals, Jacobians and all nondegeneracy numbers.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np

from .errors import (NoConvergence, PreconditionError, RankDeficient, SingularSystem)
from .family import FamilySpec, format_rational
from .jet import FULL
from .rotation import attains_rational, displacement

_I = {name: FULL.index(*e) for name, e in {
    "x": (1, 0, 0), "s": (0, 1, 0), "t": (0, 0, 1), "xx": (2, 0, 0), "xs": (1, 1, 0),
    "xt": (1, 0, 1), "xxx": (3, 0, 0), "xxs": (2, 1, 0), "xxt": (2, 0, 1)}.items()}

RESIDUAL_TOL = 1e-11
CURVE_TOL = 1e-9
NONGENERIC_TOL = 1e-8
CUSP_DEDUP = 1e-7
CORNER_MARGIN = 1e-3
EDGES = ("s_min", "s_max", "theta_min", "theta_max")


# ---------------------------------------------------------------- systems

@dataclass(frozen=True)
class ContinuationSystem:
    """Residuals and gradients (in (s, theta, x)) of the saddle-node equations."""

    pq: Fraction
    point: tuple
    h1: float
    h2: float
    h3: float
    grad1: np.ndarray
    grad2: np.ndarray
    grad3: np.ndarray
    partials: dict

    @property
    def cusp_condition(self) -> float:
        d = self.partials
        return d["s"] * d["xt"] - d["t"] * d["xs"]


def _system_from_coeffs(pq, point, c) -> ContinuationSystem:
    x = point[2]
    d = {k: float(c[i]) for k, i in _I.items()}
    d["xx"] *= 2.0
    d["xxs"] *= 2.0
    d["xxt"] *= 2.0
    d["xxx"] *= 6.0
    d["value"] = float(c[0])
    h1 = d["value"] - x - pq.numerator
    h2 = d["x"] - 1.0
    g1 = np.array([d["s"], d["t"], h2])
    g2 = np.array([d["xs"], d["xt"], d["xx"]])
    g3 = np.array([d["xxs"], d["xxt"], d["xxx"]])
    return ContinuationSystem(pq, tuple(float(v) for v in point), h1, h2, d["xx"], g1, g2, g3, d)


def continuation_system(spec: FamilySpec, pq, point) -> ContinuationSystem:
    """Evaluate the saddle-node system at (s, theta, x)."""
    pq = Fraction(pq)
    s, th, x = (float(v) for v in point)
    c = spec.jets(s, th, [x], pq.denominator, FULL)[0]
    return _system_from_coeffs(pq, (s, th, x), c)


def tangent_vector(sys: ContinuationSystem | None = None, previous=None, grad1=None, grad2=None) -> np.ndarray:
    """Unit vector along grad H1 x grad H2, oriented to continue ``previous``."""
    g1 = sys.grad1 if sys is not None else np.asarray(grad1, dtype=float)
    g2 = sys.grad2 if sys is not None else np.asarray(grad2, dtype=float)
    v = np.cross(g1, g2)
    n = float(np.linalg.norm(v))
    if n <= 1e-10:
        raise RankDeficient(f"gradients are parallel (|grad H1 x grad H2| = {n:.3g})")
    v = v / n
    if previous is not None and float(np.dot(v, previous)) < 0.0:
        v = -v
    return v


# ---------------------------------------------------------------- Newton solves

@dataclass(frozen=True)
class FrozenLine:
    """Parameter line (s, theta) = origin + t * direction."""

    origin: tuple
    direction: tuple


@dataclass(frozen=True)
class SaddleNodePoint:
    s: float
    theta: float
    x: float
    residuals: tuple
    condition: float
    iterations: int

    @property
    def point(self) -> tuple:
        return (self.s, self.theta, self.x)

    def to_json(self):
        return {"s": self.s, "theta": self.theta, "x": self.x, "residuals": list(self.residuals),
                "condition": self.condition, "iterations": self.iterations}


def _check_seed(spec, s, th, margin=1e-9):
    if not spec.param_box.contains(s, th, margin):
        raise PreconditionError(f"seed (s, theta) = ({s}, {th}) lies outside the parameter box")


def solve_saddle_node(spec: FamilySpec, pq, seed, frozen="s", tol: float = RESIDUAL_TOL,
                      max_iter: int = 50, check_box: bool = True) -> SaddleNodePoint:
    """Newton on (H1, H2) in the two unfrozen coordinates.

    ``frozen`` is ``"s"``, ``"theta"`` or a :class:`FrozenLine`; in the last
    case the unknowns are the line parameter and x, starting from t = 0.
    """
    pq = Fraction(pq)
    s, th, x = (float(v) for v in seed)
    if check_box:
        _check_seed(spec, s, th)
    if isinstance(frozen, FrozenLine):
        o = np.asarray(frozen.origin, dtype=float)
        d = np.asarray(frozen.direction, dtype=float)
        s, th = o
        t = 0.0
    elif frozen not in ("s", "theta"):
        raise ValueError(f"frozen must be 's', 'theta' or a FrozenLine, got {frozen!r}")
    cond = math.inf
    for it in range(max_iter + 1):
        sys = continuation_system(spec, pq, (s, th, x))
        if not (math.isfinite(sys.h1) and math.isfinite(sys.h2)):
            break
        if isinstance(frozen, FrozenLine):
            col = np.array([sys.grad1[:2] @ d, sys.grad2[:2] @ d])
        elif frozen == "s":
            col = np.array([sys.grad1[1], sys.grad2[1]])
        else:
            col = np.array([sys.grad1[0], sys.grad2[0]])
        jac = np.array([[col[0], sys.grad1[2]], [col[1], sys.grad2[2]]])
        scale = np.abs(jac).max()
        if scale == 0.0 or not np.all(np.isfinite(jac)):
            raise SingularSystem("Jacobian of (H1, H2) vanishes")
        cond = float(np.linalg.cond(jac))
        if cond > 1e14:
            raise SingularSystem(f"Jacobian of (H1, H2) is singular (condition {cond:.3g})")
        if abs(sys.h1) < tol and abs(sys.h2) < tol:
            return SaddleNodePoint(float(s), float(th), float(x % 1.0), (abs(sys.h1), abs(sys.h2)), cond, it)
        if it == max_iter:
            break
        step = np.linalg.solve(jac, -np.array([sys.h1, sys.h2]))
        # damp large steps; the phase coordinate is periodic with period 1
        k = min(1.0, 0.1 / max(abs(step[0]), 1e-300), 0.1 / max(abs(step[1]), 1e-300))
        step *= k
        if isinstance(frozen, FrozenLine):
            t += step[0]
            s, th = o + t * d
        elif frozen == "s":
            th += step[0]
        else:
            s += step[0]
        x += step[1]
    raise NoConvergence(f"saddle-node Newton did not converge from {tuple(seed)}")


@dataclass(frozen=True)
class CuspPoint:
    s: float
    theta: float
    x: float
    dxxx: float
    cusp_condition: float
    residuals: tuple
    non_generic: bool

    @property
    def point(self) -> tuple:
        return (self.s, self.theta, self.x)

    def to_json(self):
        return {"s": self.s, "theta": self.theta, "x": self.x, "dxxx": self.dxxx,
                "cuspCondition": self.cusp_condition, "residuals": list(self.residuals),
                "nonGeneric": self.non_generic}

    @classmethod
    def from_json(cls, d):
        return cls(d["s"], d["theta"], d["x"], d["dxxx"], d["cuspCondition"], tuple(d["residuals"]),
                   d["nonGeneric"])


def _cusp_newton(spec, pq, seed, tol=RESIDUAL_TOL, max_iter=50):
    s, th, x = (float(v) for v in seed)
    for _ in range(max_iter):
        sys = continuation_system(spec, pq, (s, th, x))
        r = np.array([sys.h1, sys.h2, sys.h3])
        if not np.all(np.isfinite(r)):
            return None
        if np.all(np.abs(r) < tol):
            return sys
        jac = np.vstack([sys.grad1, sys.grad2, sys.grad3])
        try:
            if np.linalg.cond(jac) > 1e14:
                return None
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            return None
        step *= min(1.0, 0.1 / max(np.abs(step).max(), 1e-300))
        s, th, x = s + step[0], th + step[1], x + step[2]
    return None


def _cusp_record(sys: ContinuationSystem) -> CuspPoint:
    s, th, x = sys.point
    dxxx, cc = sys.partials["xxx"], sys.cusp_condition
    return CuspPoint(s, th, x % 1.0, dxxx, cc, (abs(sys.h1), abs(sys.h2), abs(sys.h3)),
                     abs(dxxx) < NONGENERIC_TOL or abs(cc) < NONGENERIC_TOL)


def _circ(a, b):
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


def _same_point(a, b, tol):
    return abs(a[0] - b[0]) < tol and abs(a[1] - b[1]) < tol and _circ(a[2], b[2]) < tol


def find_cusps(spec: FamilySpec, pq, seeds, in_box: bool = True) -> list:
    """Solve (H1, H2, H3) = 0 from each seed; deduplicated cusp records.

    Non-convergent seeds are dropped.  With ``in_box`` only solutions inside
    the family's parameter box are returned.
    """
    pq = Fraction(pq)
    out = []
    for seed in seeds:
        sys = _cusp_newton(spec, pq, seed)
        if sys is None:
            continue
        rec = _cusp_record(sys)
        if in_box and not spec.param_box.contains(rec.s, rec.theta, 1e-12):
            continue
        if any(_same_point(rec.point, o.point, CUSP_DEDUP) for o in out):
            continue
        out.append(rec)
    out.sort(key=lambda c: (c.s, c.theta, c.x))
    return out


# ---------------------------------------------------------------- curves

@dataclass(frozen=True)
class StepControl:
    min_step: float = 1e-6
    max_step: float = 1e-2
    tol: float = RESIDUAL_TOL
    max_corrector: int = 20
    max_points: int = 20000


@dataclass(frozen=True)
class Termination:
    kind: str  # boundary | cusp | closedLoop | stalled
    edge: str | None = None
    cusp_index: int | None = None
    near_corner: bool = False

    def to_json(self):
        return {"kind": self.kind, "edge": self.edge, "cuspIndex": self.cusp_index,
                "nearCorner": self.near_corner}

    @classmethod
    def from_json(cls, d):
        return cls(d["kind"], d.get("edge"), d.get("cuspIndex"), bool(d.get("nearCorner", False)))


@dataclass(eq=False)
class SaddleNodeCurve:
    pq: Fraction
    points: np.ndarray      # (n, 3): s, theta, x (x continuous along the curve)
    residuals: np.ndarray   # (n, 2): |H1|, |H2|
    dxx: np.ndarray         # (n,)
    tangents: np.ndarray    # (n, 3), unit, oriented along the traversal
    termination_start: Termination
    termination_end: Termination
    spec: FamilySpec | None = field(default=None, repr=False)

    def __len__(self):
        return self.points.shape[0]

    @property
    def closed(self) -> bool:
        return self.termination_end.kind == "closedLoop"

    def to_json(self):
        return {"pq": format_rational(self.pq), "points": self.points.tolist(),
                "residuals": self.residuals.tolist(), "dxx": self.dxx.tolist(),
                "tangents": self.tangents.tolist(),
                "terminationStart": self.termination_start.to_json(),
                "terminationEnd": self.termination_end.to_json()}

    @classmethod
    def from_json(cls, d, spec=None):
        arr = lambda k, w: np.asarray(d[k], dtype=float).reshape(-1, w)  # noqa: E731
        return cls(Fraction(d["pq"]), arr("points", 3), arr("residuals", 2),
                   np.asarray(d["dxx"], dtype=float), arr("tangents", 3),
                   Termination.from_json(d["terminationStart"]), Termination.from_json(d["terminationEnd"]),
                   spec)

    def csv_rows(self):
        yield ["s", "theta", "x", "absH1", "absH2", "dxx", "ts", "ttheta", "tx"]
        for p, r, c, t in zip(self.points, self.residuals, self.dxx, self.tangents):
            yield [repr(float(v)) for v in (*p, *r, c, *t)]


class _Tracer:
    """Pseudo-arclength continuation in box-normalized coordinates."""

    def __init__(self, spec: FamilySpec, pq: Fraction, ctl: StepControl):
        self.spec, self.pq, self.ctl = spec, pq, ctl
        box = spec.param_box
        self.w = np.array([box.s[1] - box.s[0] or 1.0, box.theta[1] - box.theta[0] or 1.0, 1.0])
        self.lo = np.array([box.s[0], box.theta[0]])
        self.hi = np.array([box.s[1], box.theta[1]])

    # evaluation in scaled coordinates u = (s/ws, theta/wt, x)
    def system(self, u):
        return continuation_system(self.spec, self.pq, u * self.w)

    def tangent(self, sys, prev):
        g1, g2 = sys.grad1 * self.w, sys.grad2 * self.w
        return tangent_vector(None, prev, g1, g2)

    def correct(self, pred, t):
        u = pred.copy()
        for it in range(1, self.ctl.max_corrector + 1):
            sys = self.system(u)
            r = np.array([sys.h1, sys.h2, float(t @ (u - pred))])
            if not np.all(np.isfinite(r)):
                return None, it
            if abs(sys.h1) < self.ctl.tol and abs(sys.h2) < self.ctl.tol and abs(r[2]) < 1e-12:
                return (u, sys), it
            jac = np.vstack([sys.grad1 * self.w, sys.grad2 * self.w, t])
            try:
                step = np.linalg.solve(jac, -r)
            except np.linalg.LinAlgError:
                return None, it
            if not np.all(np.isfinite(step)):
                return None, it
            u = u + step
        return None, self.ctl.max_corrector

    def outside(self, u):
        st = u[:2] * self.w[:2]
        return bool(np.any(st < self.lo - 1e-13) or np.any(st > self.hi + 1e-13))

    def boundary_point(self, u0, u1):
        """Point where the curve leaves the box between u0 (inside) and u1 (outside)."""
        st0, st1 = u0[:2] * self.w[:2], u1[:2] * self.w[:2]
        best = None
        for k in range(2):
            for side, lim in ((0, self.lo[k]), (1, self.hi[k])):
                if (side == 0 and st1[k] < lim) or (side == 1 and st1[k] > lim):
                    lam = (lim - st0[k]) / (st1[k] - st0[k]) if st1[k] != st0[k] else 0.0
                    if best is None or lam < best[0]:
                        best = (lam, k, side, lim)
        lam, k, side, lim = best
        seed = (u0 + lam * (u1 - u0)) * self.w
        seed[k] = lim
        frozen = "s" if k == 0 else "theta"
        try:
            sn = solve_saddle_node(self.spec, self.pq, seed, frozen, self.ctl.tol, 30, check_box=False)
        except (NoConvergence, SingularSystem):
            return None
        x = sn.x + round(seed[2] - sn.x)  # keep x continuous
        u = np.array([sn.s, sn.theta, x]) / self.w
        u[k] = lim / self.w[k]
        return u, EDGES[2 * k + side]

    def corner(self, u):
        st = u[:2] * self.w[:2]
        near = [min(abs(st[k] - self.lo[k]), abs(st[k] - self.hi[k])) / self.w[k] < CORNER_MARGIN
                for k in range(2)]
        return all(near)

    def cusp_between(self, u0, sys0, u1, sys1):
        a, b = sys0.h3, sys1.h3
        lam = a / (a - b) if a != b else 0.5
        seed = (u0 + lam * (u1 - u0)) * self.w
        sys = _cusp_newton(self.spec, self.pq, seed)
        if sys is None:
            return None
        u = np.array(sys.point) / self.w
        u[2] = sys.point[2] + round(seed[2] - sys.point[2])
        if np.linalg.norm(u - u0) > 2.0 * np.linalg.norm(u1 - u0) + 1e-9:
            return None
        return u, sys

    def run(self, u_start, sys_start, t_start, start_closed_check=True):
        ctl = self.ctl
        us, syss, ts = [u_start], [sys_start], [t_start]
        h = ctl.max_step * 0.25
        term = Termination("stalled")
        while len(us) < ctl.max_points:
            u0, sys0, t0 = us[-1], syss[-1], ts[-1]
            pred = u0 + h * t0
            res, iters = self.correct(pred, t0)
            ok = res is not None
            if ok:
                u1, sys1 = res
                dist = float(np.linalg.norm(u1 - u0))
                try:
                    t1 = self.tangent(sys1, t0)
                except RankDeficient:
                    ok = False
                else:
                    ok = dist <= 2.0 * h and float(t1 @ t0) > 0.8
            if not ok:
                if h <= ctl.min_step:
                    term = Termination("stalled")
                    break
                h = max(h * 0.5, ctl.min_step)
                continue

            if self.outside(u1):
                bp = self.boundary_point(u0, u1)
                if bp is None:
                    if h <= ctl.min_step:
                        break
                    h = max(h * 0.5, ctl.min_step)
                    continue
                ub, edge = bp
                sysb = self.system(ub)
                if sys0.h3 * sysb.h3 < 0.0:
                    cz = self.cusp_between(u0, sys0, ub, sysb)
                    if cz is not None and not self.outside(cz[0]):
                        self._append(us, syss, ts, *cz)
                        term = Termination("cusp")
                        break
                self._append(us, syss, ts, ub, sysb)
                term = Termination("boundary", edge, None, self.corner(ub))
                break

            if sys0.h3 * sys1.h3 < 0.0:
                cz = self.cusp_between(u0, sys0, u1, sys1)
                if cz is not None:
                    self._append(us, syss, ts, *cz)
                    term = Termination("cusp")
                    break

            us.append(u1)
            syss.append(sys1)
            ts.append(t1)
            if start_closed_check and len(us) > 10:
                d = u1 - u_start
                d[2] = (d[2] + 0.5) % 1.0 - 0.5
                if float(np.linalg.norm(d)) < max(h, ctl.min_step) and float(t1 @ t_start) > 0.9:
                    term = Termination("closedLoop")
                    break
            if iters <= 3:
                h = min(2.0 * h, ctl.max_step)
            elif iters >= 8:
                h = max(0.5 * h, ctl.min_step)
        return us, syss, ts, term

    def _append(self, us, syss, ts, u, sys):
        try:
            t = self.tangent(sys, ts[-1])
        except RankDeficient:
            t = ts[-1]
        if len(us) > 1 and np.linalg.norm(u - us[-1]) < self.ctl.min_step / 4:
            us[-1], syss[-1], ts[-1] = u, sys, t
        else:
            us.append(u)
            syss.append(sys)
            ts.append(t)


def _orig_tangent(sys, t_scaled, w):
    v = np.cross(sys.grad1, sys.grad2)
    n = np.linalg.norm(v)
    if n == 0.0:
        v = t_scaled * w
        n = np.linalg.norm(v)
    v = v / n
    return v if float(v @ (t_scaled * w)) >= 0.0 else -v


def trace_curve(spec: FamilySpec, pq, seed, step_control: StepControl | None = None) -> SaddleNodeCurve:
    """Trace the saddle-node curve through a converged seed in both directions."""
    pq = Fraction(pq)
    ctl = step_control or StepControl()
    seed = seed.point if isinstance(seed, SaddleNodePoint) else tuple(float(v) for v in seed)
    sys0 = continuation_system(spec, pq, seed)
    if not (abs(sys0.h1) < CURVE_TOL and abs(sys0.h2) < CURVE_TOL):
        raise PreconditionError("trace_curve needs a seed converged by solve_saddle_node")
    tr = _Tracer(spec, pq, ctl)
    u0 = np.array(seed) / tr.w
    t0 = tr.tangent(sys0, None)
    fw = tr.run(u0, sys0, t0)
    if fw[3].kind == "closedLoop":
        us, syss, ts, t_start, t_end = fw[0], fw[1], fw[2], Termination("closedLoop"), fw[3]
    else:
        bw = tr.run(u0, sys0, -t0)
        us = bw[0][::-1] + fw[0][1:]
        syss = bw[1][::-1] + fw[1][1:]
        ts = [-t for t in bw[2][::-1]] + fw[2][1:]
        t_start, t_end = bw[3], fw[3]
    pts = np.array([u * tr.w for u in us])
    res = np.array([[abs(s.h1), abs(s.h2)] for s in syss])
    dxx = np.array([s.h3 for s in syss])
    tans = np.array([_orig_tangent(s, t, tr.w) for s, t in zip(syss, ts)])
    return SaddleNodeCurve(pq, pts, res, dxx, tans, t_start, t_end, spec)


# ---------------------------------------------------------------- special points

@dataclass(frozen=True)
class SpecialPoint:
    s: float
    theta: float
    x: float
    segment: int
    tangent: tuple
    curve: int | None = None

    def to_json(self):
        return {"s": self.s, "theta": self.theta, "x": self.x % 1.0, "segment": self.segment,
                "tangent": list(self.tangent), "curve": self.curve}

    @classmethod
    def from_json(cls, d):
        return cls(d["s"], d["theta"], d["x"], d["segment"], tuple(d["tangent"]), d.get("curve"))


def _project_to_curve(spec, pq, p0, normal, tol=RESIDUAL_TOL):
    """Curve point on the plane through p0 orthogonal to ``normal``."""
    u = np.array(p0, dtype=float)
    for _ in range(30):
        sys = continuation_system(spec, pq, u)
        r = np.array([sys.h1, sys.h2, float(normal @ (u - p0))])
        if abs(sys.h1) < tol and abs(sys.h2) < tol and abs(r[2]) < 1e-14:
            return u, sys
        try:
            u = u + np.linalg.solve(np.vstack([sys.grad1, sys.grad2, normal]), -r)
        except np.linalg.LinAlgError:
            return None
    return None


def find_special_points(curve: SaddleNodeCurve, direction: str = "horizontal", spec: FamilySpec | None = None,
                        tol: float = 1e-8) -> list:
    """Points where the ds (horizontal) or dtheta (vertical) tangent component changes sign."""
    if len(curve) < 2:
        raise PreconditionError("special-point search needs a curve with at least two points")
    comp = {"horizontal": 0, "vertical": 1}[direction]
    spec = spec or curve.spec
    tan = curve.tangents[:, comp]
    out = []
    flips = tan[:-1] * tan[1:] < 0.0
    # at a cusp the projected tangent vanishes because d2F/dx2 does; that is not a tangency
    flips &= (np.abs(curve.dxx[:-1]) > NONGENERIC_TOL) & (np.abs(curve.dxx[1:]) > NONGENERIC_TOL)
    flips &= curve.dxx[:-1] * curve.dxx[1:] > 0.0
    for i in np.flatnonzero(flips):
        a, b = curve.points[i], curve.points[i + 1]
        chord = b - a
        length = float(np.linalg.norm(chord))
        ta, lo, hi = tan[i], 0.0, 1.0
        best = (a + (ta / (ta - tan[i + 1])) * chord, curve.tangents[i])
        if spec is not None and length > 0:
            normal = chord / length
            prev = curve.tangents[i]
            while (hi - lo) * length > tol:
                mid = 0.5 * (lo + hi)
                pr = _project_to_curve(spec, curve.pq, a + mid * chord, normal)
                if pr is None:
                    break
                u, sys = pr
                try:
                    t = tangent_vector(sys, prev)
                except RankDeficient:
                    break
                best = (u, t)
                if t[comp] * ta > 0.0:
                    lo = mid
                else:
                    hi = mid
        u, t = best
        out.append(SpecialPoint(float(u[0]), float(u[1]), float(u[2]), int(i), tuple(float(v) for v in t)))
    return out


# ---------------------------------------------------------------- intersections

@dataclass(frozen=True)
class Intersection:
    s: float
    theta: float
    x1: float
    x2: float
    transversality_det: float
    non_generic: bool
    curves: tuple
    tangent_det: float
    refined: bool

    def to_json(self):
        return {"s": self.s, "theta": self.theta, "x1": self.x1, "x2": self.x2,
                "transversalityDet": None if math.isnan(self.transversality_det) else self.transversality_det,
                "nonGenericTangency": self.non_generic, "curves": list(self.curves),
                "tangentDet": self.tangent_det, "refined": self.refined}

    @classmethod
    def from_json(cls, d):
        det = d["transversalityDet"]
        return cls(d["s"], d["theta"], d["x1"], d["x2"], math.nan if det is None else det,
                   d["nonGenericTangency"], tuple(d["curves"]), d["tangentDet"], d["refined"])


def _segment_crossings(pa, pb, same):
    """All proper crossings of polylines pa, pb (n x 2, m x 2) as (i, j, la, lb)."""
    a0, a1 = pa[:-1, None, :], pa[1:, None, :]
    b0, b1 = pb[None, :-1, :], pb[None, 1:, :]
    da, db = a1 - a0, b1 - b0
    den = da[..., 0] * db[..., 1] - da[..., 1] * db[..., 0]
    off = b0 - a0
    with np.errstate(divide="ignore", invalid="ignore"):
        la = (off[..., 0] * db[..., 1] - off[..., 1] * db[..., 0]) / den
        lb = (off[..., 0] * da[..., 1] - off[..., 1] * da[..., 0]) / den
    hit = (den != 0.0) & (la >= 0.0) & (la < 1.0) & (lb >= 0.0) & (lb < 1.0)
    if same:
        i, j = np.meshgrid(np.arange(hit.shape[0]), np.arange(hit.shape[1]), indexing="ij")
        hit &= j > i + 1
    ii, jj = np.nonzero(hit)
    return [(int(i), int(j), float(la[i, j]), float(lb[i, j])) for i, j in zip(ii, jj)]


def _on_same_orbit(spec, pq, s, th, x1, x2, tol=1e-6):
    y = x1
    for _ in range(pq.denominator - 1):
        y = float(spec.lift(s, th, [y], 1)[0])
        if _circ(y, x2) < tol:
            return True
    return False


def _refine_intersection(spec, pq, s, th, x1, x2, tol=RESIDUAL_TOL):
    """4-D Newton on (H1, H2) at two phase points sharing (s, theta)."""
    u = np.array([s, th, x1, x2])
    for _ in range(50):
        c = spec.jets(u[0], u[1], [u[2], u[3]], pq.denominator, FULL)
        a = _system_from_coeffs(pq, (u[0], u[1], u[2]), c[0])
        b = _system_from_coeffs(pq, (u[0], u[1], u[3]), c[1])
        r = np.array([a.h1, a.h2, b.h1, b.h2])
        if np.all(np.abs(r) < tol):
            return u, a, b
        jac = np.array([[a.grad1[0], a.grad1[1], a.grad1[2], 0.0],
                        [a.grad2[0], a.grad2[1], a.grad2[2], 0.0],
                        [b.grad1[0], b.grad1[1], 0.0, b.grad1[2]],
                        [b.grad2[0], b.grad2[1], 0.0, b.grad2[2]]])
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(step)):
            return None
        u = u + step * min(1.0, 0.05 / max(np.abs(step).max(), 1e-300))
    return None


def transversality_det(a: ContinuationSystem, b: ContinuationSystem) -> float:
    """d_theta F(x2) d_s F(x1) - d_theta F(x1) d_s F(x2) for parabolic points x1 (a), x2 (b)."""
    return b.partials["t"] * a.partials["s"] - a.partials["t"] * b.partials["s"]


def find_intersections(curves, spec: FamilySpec | None = None, pq=None) -> list:
    """Crossings of the (s, theta) projections of saddle-node curves.

    With a family available each crossing is refined to a pair of parabolic
    points sharing one parameter and carries the transversality determinant.
    """
    out = []
    for ia in range(len(curves)):
        for ib in range(ia, len(curves)):
            ca, cb = curves[ia], curves[ib]
            fam = spec or ca.spec
            rq = Fraction(pq if pq is not None else ca.pq)
            for i, j, la, lb in _segment_crossings(ca.points[:, :2], cb.points[:, :2], ia == ib):
                pa = ca.points[i] + la * (ca.points[i + 1] - ca.points[i])
                pb = cb.points[j] + lb * (cb.points[j + 1] - cb.points[j])
                x1, x2 = pa[2], pb[2]
                if _circ(x1, x2) <= 1e-6:
                    continue
                ta, tb = ca.tangents[i, :2], cb.tangents[j, :2]
                tdet = float(ta[0] * tb[1] - ta[1] * tb[0])
                if fam is None:
                    out.append(Intersection(float(pa[0]), float(pa[1]), float(x1 % 1.0), float(x2 % 1.0),
                                            math.nan, False, (ia, ib), tdet, False))
                    continue
                ref = _refine_intersection(fam, rq, pa[0], pa[1], x1, x2)
                if ref is None:
                    continue
                u, a, b = ref
                if _circ(u[2], u[3]) <= 1e-6 or _on_same_orbit(fam, rq, u[0], u[1], u[2], u[3]):
                    continue
                det = transversality_det(a, b)
                rec = Intersection(float(u[0]), float(u[1]), float(u[2] % 1.0), float(u[3] % 1.0), float(det),
                                   abs(det) < NONGENERIC_TOL, (ia, ib), tdet, True)
                if any(abs(rec.s - o.s) < 1e-7 and abs(rec.theta - o.theta) < 1e-7 for o in out):
                    continue
                out.append(rec)
    out.sort(key=lambda r: (r.s, r.theta))
    return out


# ---------------------------------------------------------------- diagram

@dataclass(eq=False)
class BifurcationDiagram:
    pq: Fraction
    curves: list
    cusps: list
    horizontal_tangents: list
    intersections: list
    boundary_hits: list
    vertical_tangents: list = field(default_factory=list)
    rotation_confirmed: list = field(default_factory=list)

    def counts(self) -> dict:
        return {"curves": len(self.curves), "cusps": len(self.cusps),
                "intersections": len(self.intersections), "boundaryHits": len(self.boundary_hits),
                "horizontalTangents": len(self.horizontal_tangents)}

    def to_json(self):
        return {"pq": format_rational(self.pq), "counts": self.counts(),
                "curves": [c.to_json() for c in self.curves],
                "cusps": [c.to_json() for c in self.cusps],
                "horizontalTangents": [p.to_json() for p in self.horizontal_tangents],
                "verticalTangents": [p.to_json() for p in self.vertical_tangents],
                "intersections": [x.to_json() for x in self.intersections],
                "boundaryHits": [dict(b) for b in self.boundary_hits],
                "rotationConfirmed": list(self.rotation_confirmed)}

    @classmethod
    def from_json(cls, d, spec=None):
        return cls(Fraction(d["pq"]), [SaddleNodeCurve.from_json(c, spec) for c in d["curves"]],
                   [CuspPoint.from_json(c) for c in d["cusps"]],
                   [SpecialPoint.from_json(p) for p in d["horizontalTangents"]],
                   [Intersection.from_json(x) for x in d["intersections"]],
                   [dict(b) for b in d["boundaryHits"]],
                   [SpecialPoint.from_json(p) for p in d.get("verticalTangents", [])],
                   list(d.get("rotationConfirmed", [])))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)


def _extrema(g):
    """Indices of strict-ish local minima and maxima of a periodic sample."""
    left, right = np.roll(g, 1), np.roll(g, -1)
    mins = np.flatnonzero((g < left) & (g <= right))
    maxs = np.flatnonzero((g > left) & (g >= right))
    return mins, maxs


def _scan_line(spec, pq, pts, xs, frozen):
    """Seeds where an extremum value of G changes sign between neighbouring samples."""
    seeds = []
    prev = None
    for s, th in pts:
        g = displacement(spec, s, th, xs, pq)
        mins, maxs = _extrema(g)
        cur = (s, th, g, mins, maxs)
        if prev is not None:
            ps, pth, pg, pmins, pmaxs = prev
            for idx_now, idx_prev in ((mins, pmins), (maxs, pmaxs)):
                for i in idx_now:
                    if idx_prev.size == 0:
                        continue
                    d = np.abs(xs[idx_prev] - xs[i])
                    d = np.minimum(d, 1.0 - d)
                    k = idx_prev[int(np.argmin(d))]
                    if d.min() > 0.05:
                        continue
                    if g[i] * pg[k] <= 0.0 and g[i] != pg[k]:
                        lam = pg[k] / (pg[k] - g[i]) if pg[k] != g[i] else 0.5
                        seeds.append((ps + lam * (s - ps), pth + lam * (th - pth),
                                      0.5 * (xs[i] + xs[k]) if abs(xs[i] - xs[k]) < 0.5 else xs[i], frozen))
        prev = cur
    return seeds


def _point_segment_dist(p, a, b):
    ab = b - a
    den = (ab * ab).sum(axis=-1)
    lam = np.clip(((p - a) * ab).sum(axis=-1) / np.where(den > 0, den, 1.0), 0.0, 1.0)
    return np.linalg.norm(a + lam[..., None] * ab - p, axis=-1)


def _near_curve(curve_pts, w, p, tol):
    """Distance check in box-normalized (s, theta, x mod 1) coordinates."""
    c = curve_pts / w
    q = np.asarray(p) / w
    c = c.copy()
    c[:, 2] = q[2] + ((c[:, 2] - q[2] + 0.5) % 1.0 - 0.5)
    if len(c) == 1:
        return float(np.linalg.norm(c[0] - q)) < tol
    return float(_point_segment_dist(q, c[:-1], c[1:]).min()) < tol


def _projected_hausdorff(ca, cb, w):
    a, b = ca.points[:, :2] / w[:2], cb.points[:, :2] / w[:2]

    def one(p, poly):
        if len(poly) == 1:
            return np.linalg.norm(p - poly[0], axis=-1)
        return _point_segment_dist(p[:, None, :], poly[None, :-1], poly[None, 1:]).min(axis=1)
    return max(float(one(a, b).max()), float(one(b, a).max()))


def _orbit_copies(spec, pq, s, th, x):
    ys = [x % 1.0]
    y = x
    for _ in range(pq.denominator - 1):
        y = float(spec.lift(s, th, [y], 1)[0])
        ys.append(y % 1.0)
    return ys


def assemble_diagram(spec: FamilySpec, pq_list, scan_grid: int = 32,
                     step_control: StepControl | None = None, x_grid: int = 256) -> dict:
    """Bifurcation diagram per rational: curves, cusps, tangencies, crossings, boundary hits."""
    ctl = step_control or StepControl()
    box = spec.param_box
    w = np.array([box.s[1] - box.s[0] or 1.0, box.theta[1] - box.theta[0] or 1.0, 1.0])
    sg = np.linspace(box.s[0], box.s[1], scan_grid + 1)
    tg = np.linspace(box.theta[0], box.theta[1], scan_grid + 1)
    out = {}
    for pq in pq_list:
        pq = Fraction(pq)
        xs = np.arange(x_grid * pq.denominator) / (x_grid * pq.denominator)
        raw = []
        for s in sg:
            raw += _scan_line(spec, pq, [(s, t) for t in tg], xs, "s")
        for t in tg:
            raw += _scan_line(spec, pq, [(s, t) for s in sg], xs, "theta")

        curves = []
        for s, th, x, frozen in raw:
            try:
                sn = solve_saddle_node(spec, pq, (s, th, x), frozen, check_box=False)
            except (NoConvergence, SingularSystem):
                continue
            if not box.contains(sn.s, sn.theta, 1e-12):
                continue
            copies = _orbit_copies(spec, pq, sn.s, sn.theta, sn.x)
            if any(_near_curve(c.points, w, (sn.s, sn.theta, y), 1e-3) for c in curves for y in copies):
                continue
            try:
                cur = trace_curve(spec, pq, sn, ctl)
            except RankDeficient:
                continue
            if any(_projected_hausdorff(cur, c, w) < 1e-5 for c in curves):
                continue
            curves.append(cur)
        curves.sort(key=lambda c: tuple(np.round(c.points[0], 12)))

        # cusps: curve terminations plus local minima of |H3| along curves
        cseeds = []
        for c in curves:
            if c.termination_start.kind == "cusp":
                cseeds.append(c.points[0])
            if c.termination_end.kind == "cusp":
                cseeds.append(c.points[-1])
            a = np.abs(c.dxx)
            if len(a) > 2:
                loc = np.flatnonzero((a[1:-1] <= a[:-2]) & (a[1:-1] <= a[2:])) + 1
                cseeds += [c.points[i] for i in loc]
        cusps = find_cusps(spec, pq, cseeds)
        for c in curves:
            for end in ("start", "end"):
                t = getattr(c, f"termination_{end}")
                if t.kind != "cusp":
                    continue
                p = c.points[0] if end == "start" else c.points[-1]
                idx = next((k for k, cp in enumerate(cusps) if _same_point(p, cp.point, 1e-6)), None)
                setattr(c, f"termination_{end}", Termination("cusp", None, idx, False))

        hor, ver, hits, confirmed = [], [], [], []
        for k, c in enumerate(curves):
            if len(c) >= 2:
                hor += [SpecialPoint(p.s, p.theta, p.x, p.segment, p.tangent, k)
                        for p in find_special_points(c, "horizontal", spec)]
                ver += [SpecialPoint(p.s, p.theta, p.x, p.segment, p.tangent, k)
                        for p in find_special_points(c, "vertical", spec)]
            for end, t in (("start", c.termination_start), ("end", c.termination_end)):
                if t.kind == "boundary":
                    p = c.points[0] if end == "start" else c.points[-1]
                    hits.append({"curve": k, "end": end, "edge": t.edge, "s": float(p[0]),
                                 "theta": float(p[1]), "x": float(p[2] % 1.0), "nearCorner": t.near_corner})
            mid = c.points[len(c) // 2]
            confirmed.append(attains_rational(spec, (mid[0], mid[1]), pq))
        inters = find_intersections(curves, spec, pq)
        out[pq] = BifurcationDiagram(pq, curves, cusps, hor, inters, hits, ver, confirmed)
    return out


# ---------------------------------------------------------------- bookkeeping

DOMAIN_DIM = 3  # (s, theta, x)


def jet_space_dimension(k: int, domain_dim: int = DOMAIN_DIM) -> int:
    """dim J^k(U x A, E) = dim(U x A) + C(dim(U x A) + k, k)."""
    return domain_dim + comb(domain_dim + k, k)


def multijet_dimension(m: int, k: int, domain_dim: int = DOMAIN_DIM) -> int:
    return m * jet_space_dimension(k, domain_dim)


def isolated_codimension(l_params: int) -> int:
    """Codimension of the (l+1)-fold degeneracy Sigma_{l+1}: l + 2."""
    return l_params + 2


# (name, jet order, points, defining equations); codimension counts equations
# plus the 2(m - 1) hidden parameter coincidences of an m-point multijet
_STRATA = (
    ("Sigma_par", 1, 1, ("F = x", "dF/dx = 1")),
    ("Sigma_par^(2)", 1, 2, ("F = x", "dF/dx = 1") * 2),
    ("Sigma_par^(3)", 1, 3, ("F = x", "dF/dx = 1") * 3),
    ("Sigma_deg", 2, 1, ("F = x", "dF/dx = 1", "d2F/dx2 = 0")),
    ("Sigma_deg,1", 3, 1, ("F = x", "dF/dx = 1", "d2F/dx2 = 0", "d3F/dx3 = 0")),
    ("Sigma_deg,2", 3, 1, ("F = x", "dF/dx = 1", "d2F/dx2 = 0", "cusp condition = 0")),
    ("Sigma^(2)_deg,par", 2, 2, ("F = x", "dF/dx = 1", "d2F/dx2 = 0", "F = x", "dF/dx = 1")),
    ("Sigma^(2)_par,tan", 1, 2, ("F = x", "dF/dx = 1", "F = x", "dF/dx = 1", "transversality det = 0")),
    ("Sigma_par,hor", 1, 1, ("F = x", "dF/dx = 1", "dF/dtheta = 0")),
)


def jet_dimension_table() -> dict:
    """Exact dimensions of the jet spaces and codimensions of the degeneracy strata."""
    strata = []
    for name, k, m, eqs in _STRATA:
        strata.append({"name": name, "jetOrder": k, "points": m,
                       "codimension": len(eqs) + 2 * (m - 1),
                       "ambientDimension": multijet_dimension(m, k),
                       "domainDimension": DOMAIN_DIM * m})
    return {"jetDimensions": {k: jet_space_dimension(k) for k in (1, 2, 3)},
            "codimensions": [s["codimension"] for s in strata],
            "strata": strata}
