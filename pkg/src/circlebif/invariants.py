"""The source-count invariant a_n, its parity b_n and horizontal section scans."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .census import count_topological_sources, run_census
from .errors import (MonotonicityUnverified, NonGenericFamily, NonIsolatedOrbits, PreconditionError,
                     RationalNotAttained)
from .family import FamilySpec, format_rational, theta_monotonicity
from .rotation import tongue_interval


@dataclass(frozen=True)
class ParityRecord:
    pq: Fraction
    a: int
    b: int
    tongue_intervals: tuple
    samples: int
    s: float = 0.0
    counts: tuple = field(default=(), repr=False)  # source count per sample

    def to_json(self):
        return {"pq": format_rational(self.pq), "a": self.a, "b": self.b, "s": self.s,
                "tongueIntervals": [list(iv) for iv in self.tongue_intervals], "samples": self.samples,
                "counts": list(self.counts)}

    @classmethod
    def from_json(cls, d):
        return cls(Fraction(d["pq"]), int(d["a"]), int(d["b"]),
                   tuple(tuple(float(v) for v in iv) for iv in d["tongueIntervals"]), int(d["samples"]),
                   float(d.get("s", 0.0)), tuple(int(c) for c in d.get("counts", ())))


def _census_sources(spec, s, theta, pq, grid_m):
    return count_topological_sources(run_census(spec, (s, theta), pq, grid_m))


def max_sources_at_rational(spec: FamilySpec, pq, theta_samples: int = 256, s: float | None = None,
                            grid_per_q: int = 1024) -> ParityRecord:
    """a = maximal number of coexisting source orbits over the pq tongue of a theta-family.

    The tongue is sampled at ``theta_samples`` interior points plus both
    endpoints; endpoint censuses fall back to one-sided classification and
    are skipped when the orbit has numerically left the grid.
    """
    if theta_samples < 64:
        raise PreconditionError("theta_samples must be >= 64")
    pq = Fraction(pq)
    s = spec.param_box.s[0] if s is None else float(s)
    if not spec.monotone_in_theta or theta_monotonicity(spec, s) <= 0.0:
        raise MonotonicityUnverified("family is not verified monotone in theta")
    iv = tongue_interval(spec, pq, s=s, check_monotone=False)
    grid_m = grid_per_q * pq.denominator
    if iv.degenerate:
        thetas = [0.5 * (iv.lo + iv.hi)]
    else:
        inner = iv.lo + (np.arange(theta_samples) + 0.5) / theta_samples * iv.width
        thetas = [iv.lo, *inner, iv.hi]
    counts = []
    for k, th in enumerate(thetas):
        try:
            counts.append(_census_sources(spec, s, float(th), pq, grid_m))
        except NonIsolatedOrbits as exc:
            raise NonGenericFamily(f"circle of periodic points at s={s}, theta={th}") from exc
        except RationalNotAttained:
            if k in (0, len(thetas) - 1) and not iv.degenerate:
                continue
            raise
    a = max(counts) if counts else 0
    return ParityRecord(pq, a, a % 2, ((iv.lo, iv.hi),), len(counts), s, tuple(counts))


@dataclass(frozen=True)
class ParityDiff:
    index: int | None
    skipped: tuple
    records_a: tuple
    records_b: tuple

    def to_json(self):
        ser = lambda rs: [None if r is None else r.to_json() for r in rs]  # noqa: E731
        return {"index": self.index, "skipped": list(self.skipped),
                "recordsA": ser(self.records_a), "recordsB": ser(self.records_b)}


def parity_prefix_diff(spec_a: FamilySpec, spec_b: FamilySpec, pq_list, theta_samples: int = 64,
                       s_a: float | None = None, s_b: float | None = None) -> ParityDiff:
    """First index where the parities b_n of the two families differ (None if never)."""
    if not pq_list:
        raise PreconditionError("pq_list must be nonempty")
    ra, rb, skipped = [], [], []
    for n, pq in enumerate(pq_list):
        recs = []
        for spec, s in ((spec_a, s_a), (spec_b, s_b)):
            try:
                recs.append(max_sources_at_rational(spec, pq, theta_samples, s))
            except RationalNotAttained:
                recs.append(None)
        ra.append(recs[0])
        rb.append(recs[1])
        if None in recs:
            skipped.append(n)
            continue
        if recs[0].b != recs[1].b:
            return ParityDiff(n, tuple(skipped), tuple(ra), tuple(rb))
    return ParityDiff(None, tuple(skipped), tuple(ra), tuple(rb))


@dataclass(frozen=True)
class SectionScan:
    pq: Fraction
    s_grid: tuple
    a_of_s: tuple  # None where pq is not attained on the slice
    unit_increments_ok: bool
    refinements: int = 0

    def values(self):
        return sorted({a for a in self.a_of_s if a is not None})

    def to_json(self):
        return {"pq": format_rational(self.pq), "sGrid": list(self.s_grid), "aOfS": list(self.a_of_s),
                "unitIncrementsOk": self.unit_increments_ok, "refinements": self.refinements}

    @classmethod
    def from_json(cls, d):
        return cls(Fraction(d["pq"]), tuple(float(v) for v in d["sGrid"]),
                   tuple(None if a is None else int(a) for a in d["aOfS"]), bool(d["unitIncrementsOk"]),
                   int(d.get("refinements", 0)))

    def csv_rows(self):
        yield ["s", "a"]
        for s, a in zip(self.s_grid, self.a_of_s):
            yield [repr(float(s)), "" if a is None else str(a)]

    def dumps(self):
        return json.dumps(self.to_json(), indent=1)


def _jumps(values):
    """Pairs of consecutive present indices whose values differ by more than 1."""
    present = [i for i, a in enumerate(values) if a is not None]
    return [(i, j) for i, j in zip(present, present[1:]) if abs(values[i] - values[j]) > 1]


def section_scan(spec: FamilySpec, pq, s_steps: int = 200, theta_samples: int = 64,
                 max_refine: int = 3) -> SectionScan:
    """a(s) along horizontal sections s = const of a two-parameter family."""
    if s_steps < 32:
        raise PreconditionError("s_steps must be >= 32")
    pq = Fraction(pq)

    def a_at(s):
        try:
            return max_sources_at_rational(spec, pq, theta_samples, s).a
        except RationalNotAttained:
            return None

    lo, hi = spec.param_box.s
    grid = [float(v) for v in np.linspace(lo, hi, s_steps + 1)]
    vals = [a_at(s) for s in grid]
    refinements = 0
    for _ in range(max_refine):
        bad = _jumps(vals)
        if not bad:
            break
        refinements += 1
        for i, j in reversed(bad):
            mid = 0.5 * (grid[i] + grid[j])
            grid.insert(j, mid)
            vals.insert(j, a_at(mid))
    return SectionScan(pq, tuple(grid), tuple(vals), not _jumps(vals), refinements)
