"""Rotation numbers and rational (mode-locked) detection."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from .errors import MonotonicityUnverified, PreconditionError, RationalNotAttained
from .family import FamilySpec, as_point, format_rational, theta_monotonicity
from .jet import XONLY

DEFAULT_TOL = 1e-10
DEFAULT_QMAX = 64
GRID_PER_Q = 4096

_IX1 = XONLY.index(1, 0, 0)
_IX2 = XONLY.index(2, 0, 0)


@dataclass(frozen=True)
class RotationEstimate:
    value: float
    error_bound: float
    iterations: int
    rational: Fraction | None = None

    def to_json(self):
        return {"value": self.value, "errorBound": self.error_bound, "iterations": self.iterations,
                "rational": None if self.rational is None else format_rational(self.rational)}

    @classmethod
    def from_json(cls, d):
        r = d.get("rational")
        return cls(float(d["value"]), float(d["errorBound"]), int(d["iterations"]),
                   None if r is None else Fraction(r))


def convergents(x: float, q_cap: int):
    """Continued-fraction convergents p/q of ``x`` with q <= q_cap."""
    out = []
    r = Fraction(x)
    h0, h1, k0, k1 = 0, 1, 1, 0
    while True:
        a = math.floor(r)
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
        if k1 > q_cap:
            break
        out.append(Fraction(h1, k1))
        frac = r - a
        if frac == 0:
            break
        r = 1 / frac
    return out


def displacement(spec: FamilySpec, s: float, theta: float, xs, pq: Fraction) -> np.ndarray:
    """G(x) = Lift^q(x) - x - p."""
    xs = np.asarray(xs, dtype=float)
    return spec.lift(s, theta, xs, pq.denominator) - xs - pq.numerator


def _unit_grid(m: int) -> np.ndarray:
    return np.arange(m) / m


def _has_zero(g: np.ndarray, tol: float) -> bool:
    # a periodic continuous G with min <= 0 <= max on any grid has a root
    return bool(g.min() <= 0.0 <= g.max() or np.abs(g).min() < tol)


def estimate_rho(spec: FamilySpec, at, n_iter: int = 100_000, x0: float = 0.0,
                 q_max: int = DEFAULT_QMAX) -> RotationEstimate:
    """Birkhoff average of the lift, tightened by periodic-orbit checks.

    The raw estimate ``(Lift^n(x0) - x0)/n`` is within ``1/n`` of the rotation
    number.  Each convergent p/q (q <= sqrt n) is then tested on a 128-point
    grid: a sign change of ``G = Lift^q - id - p`` proves the rotation number
    is p/q, otherwise ``min G <= q rho - p <= max G`` narrows the interval.
    """
    if n_iter < 1000:
        raise PreconditionError("estimate_rho needs n_iter >= 1000")
    s, th = as_point(at)
    y = spec.lift(s, th, [x0], n_iter)[0]
    raw = (y - x0) / n_iter
    lo, hi = raw - 2.0 / n_iter, raw + 2.0 / n_iter
    xs = _unit_grid(128)
    for r in convergents(raw, int(math.isqrt(n_iter))):
        g = displacement(spec, s, th, xs, r)
        if g.min() <= 0.0 <= g.max():
            return RotationEstimate(float(r), 0.0, int(n_iter), r if r.denominator <= q_max else None)
        q = r.denominator
        nlo, nhi = max(lo, float(r) + g.min() / q), min(hi, float(r) + g.max() / q)
        if nlo <= nhi:
            lo, hi = nlo, nhi
    return RotationEstimate(float(0.5 * (lo + hi)), float(0.5 * (hi - lo)), int(n_iter), None)


def rational_candidates(value: float, bound: float, q_max: int):
    """Convergents of ``value`` plus every p/q within ``bound``, ordered by q."""
    cands = set(convergents(value, q_max))
    for q in range(1, q_max + 1):
        for p in range(math.floor((value - bound) * q), math.ceil((value + bound) * q) + 1):
            if abs(value - p / q) <= bound:
                cands.add(Fraction(p, q))
    return sorted(cands, key=lambda r: (r.denominator, r.numerator))


def has_periodic_orbit(spec: FamilySpec, at, pq: Fraction, tol: float = DEFAULT_TOL,
                       grid_per_q: int = GRID_PER_Q) -> bool:
    s, th = as_point(at)
    g = displacement(spec, s, th, _unit_grid(grid_per_q * pq.denominator), pq)
    return _has_zero(g, tol)


def detect_rational(spec: FamilySpec, at, q_max: int = DEFAULT_QMAX, tol: float = DEFAULT_TOL,
                    n_iter: int = 20_000) -> Fraction | None:
    """p/q (q <= q_max) when a period-q orbit is found on a 4096 q grid, else None."""
    if q_max < 1:
        raise PreconditionError("q_max must be >= 1")
    est = estimate_rho(spec, at, n_iter, q_max=q_max)
    if est.rational is not None:
        cands = [est.rational]
    else:
        cands = rational_candidates(est.value, max(est.error_bound, 1.0 / n_iter), q_max)
    for r in cands:
        if has_periodic_orbit(spec, at, r, tol):
            return r
    return None


# ---------------------------------------------------------------- tongues

@dataclass(frozen=True)
class TongueInterval:
    pq: Fraction
    s: float
    lo: float
    hi: float
    degenerate: bool
    clipped: tuple = (False, False)  # endpoint coincides with the parameter box edge

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def to_json(self):
        return {"pq": format_rational(self.pq), "s": self.s, "lo": self.lo, "hi": self.hi,
                "degenerate": self.degenerate, "clipped": list(self.clipped)}

    @classmethod
    def from_json(cls, d):
        return cls(Fraction(d["pq"]), float(d["s"]), float(d["lo"]), float(d["hi"]),
                   bool(d["degenerate"]), tuple(bool(c) for c in d.get("clipped", (False, False))))


def _refine_extremum(spec, s, th, x, pq, steps=30):
    """Newton on G' = 0 from x; returns (x, G(x)) or None on failure."""
    q = pq.denominator
    for _ in range(steps):
        j = spec.jets(s, th, [x], q, XONLY)[0]
        d1, d2 = j[_IX1] - 1.0, 2.0 * j[_IX2]
        if d2 == 0.0:
            break
        dx = -d1 / d2
        dx = max(-1e-2, min(1e-2, dx))
        x += dx
        if abs(dx) < 1e-15:
            break
    return x, float(displacement(spec, s, th, [x], pq)[0])


def displacement_margins(spec: FamilySpec, s: float, theta: float, pq: Fraction,
                         grid_per_q: int = 512, refine: int = 3) -> tuple:
    """(min G, max G) over the circle, grid extrema polished by Newton.

    The rotation number equals p/q exactly when min G <= 0 <= max G.
    """
    m = grid_per_q * pq.denominator
    xs = _unit_grid(m)
    g = displacement(spec, s, theta, xs, pq)
    out = []
    for sign in (1.0, -1.0):
        h = sign * g
        local = np.flatnonzero((h <= np.roll(h, 1)) & (h <= np.roll(h, -1)))
        best = float(h.min())
        for i in local[np.argsort(h[local])][:refine]:
            _, val = _refine_extremum(spec, s, theta, float(xs[i]), pq)
            best = min(best, sign * val)
        out.append(sign * best)
    return out[0], out[1]


def attains_rational(spec: FamilySpec, at, pq: Fraction, tol: float = 1e-9) -> bool:
    """Orbit test with polished extrema; reliable on tongue boundaries too."""
    s, th = as_point(at)
    lo, hi = displacement_margins(spec, s, th, Fraction(pq))
    return lo <= tol and hi >= -tol


def tongue_interval(spec: FamilySpec, pq: Fraction, tol: float = 1e-9, s: float | None = None,
                    check_monotone: bool = True) -> TongueInterval:
    """Maximal theta-interval at fixed s on which the rotation number is pq.

    Uses the margins ``m(theta) = min G`` and ``M(theta) = max G``; both
    increase with theta for monotone families, so the endpoints are the roots
    of M (left) and m (right).
    """
    pq = Fraction(pq)
    s = spec.param_box.s[0] if s is None else float(s)
    if check_monotone and (not spec.monotone_in_theta or theta_monotonicity(spec, s) <= 0.0):
        raise MonotonicityUnverified("family is not verified monotone in theta")
    t0, t1 = (float(v) for v in spec.param_box.theta)
    lo_m = displacement_margins(spec, s, t0, pq)
    hi_m = displacement_margins(spec, s, t1, pq)
    if lo_m[0] > 0.0 or hi_m[1] < 0.0:
        raise RationalNotAttained(f"rotation number {format_rational(pq)} not attained for theta in [{t0}, {t1}]")

    # seed: any theta with m <= 0 <= M
    a, b, seed = t0, t1, None
    for cand, (mm, mx) in ((t0, lo_m), (t1, hi_m)):
        if mm <= 0.0 <= mx:
            seed = cand
    while seed is None and b - a > tol * 1e-3:
        mid = 0.5 * (a + b)
        mm, mx = displacement_margins(spec, s, mid, pq)
        if mm <= 0.0 <= mx:
            seed = mid
        elif mx < 0.0:
            a = mid
        else:
            b = mid
    if seed is None:
        return TongueInterval(pq, s, a, b, True)

    xtol = max(tol * 0.25, 1e-15)
    if lo_m[1] >= 0.0:
        left, cl = t0, True
    else:
        left = brentq(lambda t: displacement_margins(spec, s, t, pq)[1], t0, seed, xtol=xtol)
        cl = False
    if hi_m[0] <= 0.0:
        right, cr = t1, True
    else:
        right = brentq(lambda t: displacement_margins(spec, s, t, pq)[0], seed, t1, xtol=xtol)
        cr = False
    return TongueInterval(pq, s, float(left), float(right), (right - left) < tol, (cl, cr))
