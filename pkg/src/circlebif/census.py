"""Periodic-orbit census at a fixed parameter.

All zeros of ``G(x) = Lift^q(x) - x - p`` on the circle are bracketed on a
uniform grid, polished by safeguarded Newton, grouped into orbits and
classified.  The topological classification (which way G crosses zero) is
authoritative; the multiplier is a fast path for hyperbolic orbits.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import NonIsolatedOrbits, PreconditionError, RationalNotAttained
from .family import FamilySpec, as_point, format_rational
from .jet import DX, XONLY
from .rotation import displacement

HYP_TOL = 1e-8
PROBE = 1e-5
DEDUP_TOL = 1e-9
ORBIT_TOL = 1e-7
NEWTON_TOL = 1e-12
ZERO_TOL = 1e-10
NONISOLATED_TOL = 1e-10
EVEN_ROOT_SCAN = 1e-6

SOURCE_KINDS = ("source", "parabolicSource")
SINK_KINDS = ("sink", "parabolicSink")


@dataclass(frozen=True)
class PeriodicOrbit:
    points: tuple
    multiplier: float
    kind: str
    residual: float
    dxx: float = 0.0   # second and third x-derivatives of Lift^q (Rolle diagnostic)
    dxxx: float = 0.0
    resolved: bool = True

    def to_json(self):
        return {"points": list(self.points), "multiplier": self.multiplier, "kind": self.kind,
                "residual": self.residual, "dxx": self.dxx, "dxxx": self.dxxx, "resolved": self.resolved}

    @classmethod
    def from_json(cls, d):
        return cls(tuple(float(x) for x in d["points"]), float(d["multiplier"]), d["kind"],
                   float(d["residual"]), float(d.get("dxx", 0.0)), float(d.get("dxxx", 0.0)),
                   bool(d.get("resolved", True)))


@dataclass(frozen=True)
class OrbitCensus:
    pq: Fraction
    orbits: tuple
    sources_topological: int
    sinks_topological: int
    all_hyperbolic: bool
    grid_used: int
    at: tuple = field(default=(0.0, 0.0))

    @property
    def n_points(self) -> int:
        return sum(len(o.points) for o in self.orbits)

    def kinds(self):
        return [o.kind for o in self.orbits]

    def to_json(self):
        return {"pq": format_rational(self.pq), "at": {"s": self.at[0], "theta": self.at[1]},
                "orbits": [o.to_json() for o in self.orbits],
                "sourcesTopological": self.sources_topological,
                "sinksTopological": self.sinks_topological,
                "allHyperbolic": self.all_hyperbolic, "gridUsed": self.grid_used,
                "orbitCount": len(self.orbits)}

    @classmethod
    def from_json(cls, d):
        at = d.get("at", {"s": 0.0, "theta": 0.0})
        return cls(Fraction(d["pq"]), tuple(PeriodicOrbit.from_json(o) for o in d["orbits"]),
                   int(d["sourcesTopological"]), int(d["sinksTopological"]),
                   bool(d["allHyperbolic"]), int(d["gridUsed"]), (float(at["s"]), float(at["theta"])))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def count_topological_sources(census: OrbitCensus) -> int:
    """Source orbits, hyperbolic or not; semi-stable saddle-nodes do not count."""
    return sum(o.kind in SOURCE_KINDS for o in census.orbits)


def classify(multiplier: float, g_left: float, g_right: float, hyp_tol: float = HYP_TOL) -> str:
    if multiplier > 1.0 + hyp_tol:
        return "source"
    if multiplier < 1.0 - hyp_tol:
        return "sink"
    if g_left < 0.0 < g_right:
        return "parabolicSource"
    if g_left > 0.0 > g_right:
        return "parabolicSink"
    return "parabolicSemistable"


class _Displacement:
    """G and its x-derivatives for one (spec, parameter, rational)."""

    def __init__(self, spec, s, theta, pq):
        self.spec, self.s, self.theta, self.pq = spec, s, theta, pq
        self.q, self.p = pq.denominator, pq.numerator

    def __call__(self, xs):
        return displacement(self.spec, self.s, self.theta, xs, self.pq)

    def with_slope(self, xs):
        j = self.spec.jets(self.s, self.theta, xs, self.q, DX)
        return j[:, 0] - xs - self.p, j[:, 1] - 1.0

    def derivs(self, xs):
        j = self.spec.jets(self.s, self.theta, xs, self.q, XONLY)
        return j[:, 0] - xs - self.p, j[:, 1] - 1.0, 2.0 * j[:, 2], 6.0 * j[:, 3]


def _bracketed_newton(G, lo, hi, glo, iters=100):
    """Vectorized safeguarded Newton on brackets [lo, hi] with sign(G(lo)) = sign(glo)."""
    lo, hi, glo = lo.copy(), hi.copy(), glo.copy()
    x = 0.5 * (lo + hi)
    done = np.zeros(x.shape, dtype=bool)
    gx = np.zeros_like(x)
    for _ in range(iters):
        act = ~done
        if not act.any():
            break
        g, d = G.with_slope(x[act])
        gx[act] = g
        conv = np.abs(g) < NEWTON_TOL
        same = np.sign(g) == np.sign(glo[act])
        lo_a, hi_a, glo_a = lo[act], hi[act], glo[act]
        lo_a = np.where(same, x[act], lo_a)
        glo_a = np.where(same, g, glo_a)
        hi_a = np.where(same, hi_a, x[act])
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x[act] - g / d
        bad = ~np.isfinite(xn) | (xn <= np.minimum(lo_a, hi_a)) | (xn >= np.maximum(lo_a, hi_a))
        xn = np.where(bad, 0.5 * (lo_a + hi_a), xn)
        tiny = np.abs(hi_a - lo_a) < 1e-16
        lo[act], hi[act], glo[act] = lo_a, hi_a, glo_a
        x[act] = np.where(conv, x[act], xn)
        done[act] = conv | tiny
    g, _ = G.with_slope(x)
    return x, g


def _extremum_newton(G, x, iters=40):
    """Newton on G' = 0 (x-vectorized); returns positions and G there."""
    x = x.copy()
    for _ in range(iters):
        _, d1, d2, _ = G.derivs(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(d2 != 0.0, -d1 / d2, 0.0)
        step = np.clip(step, -1e-3, 1e-3)
        x += step
        if np.all(np.abs(step) < 1e-15):
            break
    return x, G(x)


def find_zeros(G: _Displacement, grid_m: int):
    """All zeros of G on [0, 1) as (x, |G|) pairs sorted by x."""
    xs = np.arange(grid_m) / grid_m
    g = G(xs)
    if np.abs(g).max() < NONISOLATED_TOL:
        raise NonIsolatedOrbits("G vanishes identically on the grid: a circle of periodic points")
    xn = np.append(xs[1:], 1.0)
    gn = np.roll(g, -1)
    found = [xs[g == 0.0]]
    sc = np.flatnonzero(g * gn < 0.0)
    lo_list, hi_list, glo_list = [xs[sc]], [xn[sc]], [g[sc]]

    # even-multiplicity (or closely spaced) zeros invisible to sign changes
    a = np.abs(g)
    cand = np.flatnonzero((a <= np.roll(a, 1)) & (a <= np.roll(a, -1)) & (a < EVEN_ROOT_SCAN) & (g != 0.0))
    cand = cand[(g[cand] * gn[cand] > 0.0) & (g[cand] * np.roll(g, 1)[cand] > 0.0)]
    if cand.size:
        xe, ge = _extremum_newton(G, xs[cand])
        for i, x_e, g_e in zip(cand, xe, ge):
            if abs(g_e) < ZERO_TOL:
                found.append(np.array([x_e % 1.0]))
            elif np.sign(g_e) != np.sign(g[i]):
                # two simple zeros on either side of the extremum
                x_l, x_r = xs[i] - 1.0 / grid_m, xs[i] + 1.0 / grid_m
                g_l = G(np.array([x_l]))[0]
                lo_list += [np.array([x_l]), np.array([x_e])]
                hi_list += [np.array([x_e]), np.array([x_r])]
                glo_list += [np.array([g_l]), np.array([g_e])]
    lo, hi, glo = (np.concatenate(v) for v in (lo_list, hi_list, glo_list))
    roots = np.concatenate(found) if found else np.zeros(0)
    if lo.size:
        xr, _ = _bracketed_newton(G, lo, hi, glo)
        roots = np.concatenate([roots, xr])
    roots = np.sort(np.mod(roots, 1.0))
    keep = []
    for x in roots:
        if keep and (abs(x - keep[-1]) < DEDUP_TOL):
            continue
        keep.append(x)
    if len(keep) > 1 and (keep[0] + 1.0 - keep[-1]) < DEDUP_TOL:
        keep.pop()
    keep = np.array(keep)
    return keep, np.abs(G(keep)) if keep.size else np.zeros(0)


def _circ_dist(a, b):
    d = np.abs(a - b) % 1.0
    return np.minimum(d, 1.0 - d)


def run_census(spec: FamilySpec, at, pq, grid_m: int | None = None,
               hyp_tol: float = HYP_TOL) -> OrbitCensus:
    """Find and classify every period-q orbit with rotation number pq at ``at``."""
    pq = Fraction(pq)
    q = pq.denominator
    grid_m = 4096 * q if grid_m is None else int(grid_m)
    if grid_m < 1024 * q:
        raise PreconditionError("census grid needs at least 1024 q points")
    s, th = as_point(at)
    G = _Displacement(spec, s, th, pq)
    zeros, resid = find_zeros(G, grid_m)
    if zeros.size == 0:
        raise RationalNotAttained(f"no period-{q} points with rotation number {format_rational(pq)} at {(s, th)}")

    used = np.zeros(zeros.size, dtype=bool)
    orbits = []
    for i in range(zeros.size):
        if used[i]:
            continue
        x0 = zeros[i]
        pts = [x0]
        used[i] = True
        resolved = True
        y = x0
        for _ in range(q - 1):
            y = float(spec.lift(s, th, [y], 1)[0]) % 1.0
            d = _circ_dist(zeros, y)
            k = int(np.argmin(d))
            if d[k] < ORBIT_TOL:
                used[k] = True
                y = zeros[k]
            else:
                resolved = False
            pts.append(y)
        idx = [int(np.argmin(_circ_dist(zeros, p))) for p in pts]
        _, mults, d2, d3 = G.derivs(np.array(pts))
        mult = float(mults[0] + 1.0)
        gl, gr = G(np.array([x0 - PROBE, x0 + PROBE]))
        orbits.append(PeriodicOrbit(tuple(float(p) for p in pts), mult, classify(mult, gl, gr, hyp_tol),
                                    float(max(resid[idx])), float(d2[0]), float(d3[0]), resolved))

    orbits.sort(key=lambda o: min(o.points))
    srcs = sum(o.kind in SOURCE_KINDS for o in orbits)
    sinks = sum(o.kind in SINK_KINDS for o in orbits)
    hyper = all(o.kind in ("source", "sink") for o in orbits)
    return OrbitCensus(pq, tuple(orbits), srcs, sinks, hyper, grid_m, (s, th))
