"""Bad-set measures: exact in one dimension, bounded by the covering estimate
2*eps*(1 + d^{1/p}/R) in general, and Monte-Carlo validated in d >= 2.

The cube predicate `cube_meets_bad` is the exact geometric test the
elimination engine is built on: it works on the CLOSED cube with a strict
threshold, which over-approximates the half-open-cube cover (survivors then
satisfy the lower bound on their closures).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .forms import LinearForm, NormSelector, NormValue, affine_range
from .numerics import RealInterval, as_fraction

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

PRNG_SPEC = {
    "name": "splitmix64-counter",
    "state_bits": 64,
    "stream": "value(j) = mix64((seed + (j+1)*0x9E3779B97F4A7C15) mod 2^64)",
    "mix": "z^=z>>30, z*=0xBF58476D1CE4E5B9; z^=z>>27, z*=0x94D049BB133111EB; z^=z>>31",
    "sample_lattice": "coordinate i of sample s uses index s*d + i; u = value/2^64",
}


def splitmix64(seed: int, index: int) -> int:
    """Counter-based SplitMix64 output for stream position `index`."""
    z = (seed + (index + 1) * _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _scalar_value(R):
    if isinstance(R, NormValue):
        return R.exact if R.exact is not None else R.interval()
    if isinstance(R, RealInterval):
        return R
    return as_fraction(R)


def _positive(x) -> bool:
    if isinstance(x, RealInterval):
        return x.lower_fraction() > 0
    return x > 0


def lemma2_bound(R, epsilon, d: int, p) -> Union[Fraction, RealInterval]:
    """2*eps*(1 + d^{1/p}/R); exact whenever d^{1/p} and R are rational."""
    eps = as_fraction(epsilon)
    R = _scalar_value(R)
    if not _positive(R):
        raise ValueError("lemma2_bound requires R > 0")
    droot = NormSelector.parse(p).d_root(d)
    if isinstance(droot, Fraction) and isinstance(R, Fraction):
        return 2 * eps * (1 + droot / R)
    Rv = R if isinstance(R, RealInterval) else RealInterval.from_fraction(R)
    dv = droot if isinstance(droot, RealInterval) else RealInterval.from_fraction(droot)
    return (dv / Rv + 1) * (2 * eps)


def corollary1_bound(R, epsilon, d: int, p, r) -> Union[Fraction, RealInterval]:
    """Relative bad measure inside any cube of side r: 2*eps*(1 + d^{1/p}/(R*r))."""
    r = as_fraction(r)
    if r <= 0:
        raise ValueError("corollary1_bound requires r > 0")
    R = _scalar_value(R)
    if isinstance(R, RealInterval):
        scaled = R * r
    else:
        scaled = R * r
    return lemma2_bound(scaled, epsilon, d, p)


def exact_bad_measure_1d(a, b, epsilon, interval) -> Fraction:
    """Exact Lebesgue measure of {theta in [u,v] : ||a*theta + b|| <= eps}.

    Enumerates the integer levels k with solution intervals
    [(k-eps-b)/a, (k+eps-b)/a], merges overlaps, clips to [u,v].
    """
    a = as_fraction(a)
    b = as_fraction(b)
    eps = as_fraction(epsilon)
    u, v = (as_fraction(x) for x in interval)
    if a == 0:
        raise ValueError("a = 0: constant forms must be special-cased by the caller")
    if u >= v:
        raise ValueError("interval must satisfy u < v")
    if eps < 0:
        raise ValueError("epsilon must be non-negative")
    lo_img = min(a * u, a * v) + b
    hi_img = max(a * u, a * v) + b
    k_first = _ceil(lo_img - eps)
    k_last = _floor(hi_img + eps)
    total = Fraction(0)
    cur_lo = cur_hi = None
    for k in range(k_first, k_last + 1):
        t1 = (k - eps - b) / a
        t2 = (k + eps - b) / a
        s_lo, s_hi = (t1, t2) if t1 <= t2 else (t2, t1)
        s_lo = max(s_lo, u)
        s_hi = min(s_hi, v)
        if s_lo > s_hi:
            continue
        if cur_hi is None:
            cur_lo, cur_hi = s_lo, s_hi
        elif s_lo <= cur_hi:
            cur_hi = max(cur_hi, s_hi)
        else:
            total += cur_hi - cur_lo
            cur_lo, cur_hi = s_lo, s_hi
    if cur_hi is not None:
        total += cur_hi - cur_lo
    return total


def _floor(q: Fraction) -> int:
    return q.numerator // q.denominator


def _ceil(q: Fraction) -> int:
    return -((-q.numerator) // q.denominator)


def cube_meets_bad(form: LinearForm, cube, delta) -> bool:
    """True iff min over the CLOSED cube of ||L(theta)|| < delta (exact).

    Takes [m, M] = affine_range and tests for an integer k with
    m - delta < k < M + delta.
    """
    delta = as_fraction(delta)
    if delta <= 0:
        raise ValueError("cube_meets_bad requires delta > 0")
    m, M = affine_range(form, cube)
    lo = m - delta
    hi = M + delta
    return _floor(lo) + 1 <= _ceil(hi) - 1


def min_dist_over_range(m: Fraction, M: Fraction) -> Fraction:
    """min of ||x|| over x in [m, M], exact."""
    if _ceil(m) <= _floor(M):
        return Fraction(0)
    f = _floor(m)
    return min(m - f, f + 1 - M)


@dataclass(frozen=True)
class BadSetSpec:
    """E(d, a, b, eps) restricted to an axis-aligned rational box."""

    form: LinearForm
    epsilon: Fraction
    region: tuple[tuple[Fraction, Fraction], ...]

    @staticmethod
    def make(form: LinearForm, epsilon, region=None) -> "BadSetSpec":
        eps = as_fraction(epsilon)
        if eps <= 0:
            raise ValueError("epsilon must be positive")
        if region is None:
            region = [(0, 1)] * form.d
        box = tuple((as_fraction(lo), as_fraction(hi)) for lo, hi in region)
        if len(box) != form.d:
            raise ValueError("region dimension mismatch")
        for lo, hi in box:
            if lo >= hi:
                raise ValueError("degenerate region side")
        return BadSetSpec(form, eps, box)

    def volume(self) -> Fraction:
        vol = Fraction(1)
        for lo, hi in self.region:
            vol *= hi - lo
        return vol


def mc_bad_measure(spec: BadSetSpec, samples: int, seed: int = 0) -> tuple[float, float]:
    """Seeded Monte-Carlo estimate of mu{theta in region : ||L(theta)|| <= eps}.

    Deterministic and partition-independent: sample s, coordinate i uses the
    counter-based stream position s*d + i (see PRNG_SPEC), so any parallel
    split over sample ranges reproduces the sequential result bit-for-bit.
    Points are exact dyadic rationals and the hit test is exact.
    """
    if samples < 100:
        raise ValueError("samples must be >= 100")
    d = spec.form.d
    # value = (c_num(r) / den) with den = common * 2^64, integer arithmetic only
    c0 = spec.form.b + sum(
        (ai * lo for ai, (lo, _) in zip(spec.form.a, spec.region)), Fraction(0)
    )
    cs = [ai * (hi - lo) for ai, (lo, hi) in zip(spec.form.a, spec.region)]
    common = c0.denominator
    for c in cs:
        common = common * c.denominator // math.gcd(common, c.denominator)
    den = common << 64
    base = c0.numerator * (common // c0.denominator) << 64
    mults = [c.numerator * (common // c.denominator) for c in cs]
    eps_n, eps_d = spec.epsilon.numerator, spec.epsilon.denominator
    hits = 0
    for s in range(samples):
        acc = base
        idx = s * d
        for i in range(d):
            acc += mults[i] * splitmix64(seed, idx + i)
        rem = acc % den
        if min(rem, den - rem) * eps_d <= den * eps_n:
            hits += 1
    vol = spec.volume()
    phat = hits / samples
    estimate = phat * float(vol)
    stderr = float(vol) * math.sqrt(phat * (1.0 - phat) / samples)
    return estimate, stderr
