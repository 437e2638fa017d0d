"""Dyadic cubes and the explicit cube-list survivor representation.

Cubes follow the closed convention: level l, coordinates c denote the box
prod_i [c_i/2^l, (c_i+1)/2^l].  A SurvivorSet is a lexicographically sorted
coordinate list; elimination applies the exact integer predicate from
`scaled_predicate` to every cube (bulk work done by the kernels).
"""

from __future__ import annotations

import math
from array import array
from dataclasses import dataclass
from fractions import Fraction

from .. import _kernels as kernels
from ..forms import LinearForm
from ..numerics import as_fraction, frac_str


@dataclass(frozen=True)
class DyadicCube:
    level: int
    coords: tuple[int, ...]

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("negative level")
        top = 1 << self.level
        for c in self.coords:
            if not (0 <= c < top):
                raise ValueError(f"coordinate {c} outside [0, 2^{self.level})")

    @property
    def d(self) -> int:
        return len(self.coords)

    def side(self) -> Fraction:
        return Fraction(1, 1 << self.level)

    def center(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(2 * c + 1, 1 << (self.level + 1)) for c in self.coords)

    def contains_point(self, theta) -> bool:
        s = self.side()
        for c, t in zip(self.coords, theta):
            t = as_fraction(t)
            if not (c * s <= t <= (c + 1) * s):
                return False
        return True

    def to_json(self) -> dict:
        return {"level": self.level, "coords": [str(c) for c in self.coords]}


def scaled_predicate(form: LinearForm, delta, level: int):
    """Integer data (alphas, beta, D, W) for the bad-cube test at a level.

    With den = lcm of all denominators and D = den*2^level, a cube c is bad
    iff the open interval (A(c), A(c)+W) around scale D contains a multiple
    of D, where A(c) = sum(alpha_i c_i) + beta = (min_cube L - delta)*D.
    """
    delta = as_fraction(delta)
    den = form.b.denominator
    den = den * delta.denominator // math.gcd(den, delta.denominator)
    for ai in form.a:
        den = den * ai.denominator // math.gcd(den, ai.denominator)
    alphas = [int(ai * den) for ai in form.a]
    b_int = int(form.b * den)
    delta_int = int(delta * den)
    beta = sum(a for a in alphas if a < 0) + ((b_int - delta_int) << level)
    W = sum(abs(a) for a in alphas) + ((2 * delta_int) << level)
    D = den << level
    return alphas, beta, D, W


class SurvivorSet:
    """B_n as an explicit sorted cube list with exact measure count*2^(-d*l)."""

    __slots__ = ("level", "d", "flat")

    def __init__(self, level: int, d: int, flat: array):
        self.level = level
        self.d = d
        self.flat = flat

    @classmethod
    def unit(cls, d: int) -> "SurvivorSet":
        return cls(0, d, array("q", [0] * d))

    @classmethod
    def from_coords(cls, level: int, d: int, coords) -> "SurvivorSet":
        rows = sorted(tuple(c) for c in coords)
        flat = array("q")
        for row in rows:
            flat.extend(row)
        return cls(level, d, flat)

    @property
    def count(self) -> int:
        return len(self.flat) // self.d

    def measure(self) -> Fraction:
        return Fraction(self.count, 1 << (self.d * self.level))

    def coords_list(self) -> list[tuple[int, ...]]:
        d = self.d
        return [tuple(self.flat[i:i + d]) for i in range(0, len(self.flat), d)]

    def cubes(self):
        for row in self.coords_list():
            yield DyadicCube(self.level, row)

    def refine(self, to_level: int) -> "SurvivorSet":
        """Replace each cube by its 2^(d*(to_level-level)) children; exact measure kept."""
        if to_level < self.level:
            raise ValueError("refine cannot coarsen")
        shift = to_level - self.level
        if shift == 0:
            return SurvivorSet(self.level, self.d, array("q", self.flat))
        d = self.d
        if d == 1:
            out = array("q")
            for c in self.flat:
                base = c << shift
                out.extend(range(base, base + (1 << shift)))
            return SurvivorSet(to_level, 1, out)
        offsets = _child_offsets(d, shift)
        rows = []
        for row in self.coords_list():
            scaled = tuple(c << shift for c in row)
            for off in offsets:
                rows.append(tuple(s + o for s, o in zip(scaled, off)))
        rows.sort()
        flat = array("q")
        for row in rows:
            flat.extend(row)
        return SurvivorSet(to_level, d, flat)

    def eliminate(self, form: LinearForm, delta) -> tuple["SurvivorSet", int]:
        """Drop exactly the cubes whose closed box meets {||L|| < delta}."""
        alphas, beta, D, W = scaled_predicate(form, delta, self.level)
        kept, removed = kernels.eliminate_cubes(self.flat, self.d, alphas, beta, D, W)
        return SurvivorSet(self.level, self.d, kept), removed

    def first_cube(self) -> DyadicCube:
        if not self.flat:
            raise ValueError("empty survivor set")
        return DyadicCube(self.level, tuple(self.flat[: self.d]))

    def restrict_to_prefix(self, prefix_level: int, prefix: tuple[int, ...]) -> "SurvivorSet":
        shift = self.level - prefix_level
        d = self.d
        out = array("q")
        for row in self.coords_list():
            if all((c >> shift) == p for c, p in zip(row, prefix)):
                out.extend(row)
        return SurvivorSet(self.level, d, out)

    def prefix_counts(self, prefix_level: int) -> dict:
        shift = self.level - prefix_level
        counts: dict = {}
        for row in self.coords_list():
            key = tuple(c >> shift for c in row)
            counts[key] = counts.get(key, 0) + 1
        return counts


def _child_offsets(d: int, shift: int):
    side = 1 << shift
    offsets = [()]
    for _ in range(d):
        offsets = [o + (r,) for o in offsets for r in range(side)]
    return offsets


def cube_to_json(level: int, coords) -> dict:
    return {"level": level, "coords": [str(int(c)) for c in coords]}


def theta_strings(theta) -> list[str]:
    """Dyadic 'c/2^l' strings; falls back to 'p/q' for non-dyadic rationals."""
    out = []
    for t in theta:
        t = as_fraction(t)
        den = t.denominator
        if den & (den - 1) == 0:
            e = den.bit_length() - 1
            out.append(f"{t.numerator}/2^{e}" if e else str(t.numerator))
        else:
            out.append(frac_str(t))
    return out
