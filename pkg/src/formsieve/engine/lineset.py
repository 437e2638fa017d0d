"""Run-length survivor representation for one-dimensional eliminations.

Stores B_n restricted to a dyadic region [C/2^s, (C+1)/2^s] as sorted
half-open runs of consecutive surviving cube indices at the current level,
relative to the region start.  Runs compress what would be millions of unit
cubes; every measure and count derived from them is exact.

Bad windows for a form are the maximal integer ranges of cube indices whose
closed cubes meet {||a x + b|| < delta}; they are generated per integer level
k by two parallel floor progressions (no divisions in the loop) and
subtracted by the kernels.
"""

from __future__ import annotations

from array import array
from fractions import Fraction

from .. import _kernels as kernels
from ..forms import LinearForm
from ..numerics import as_fraction

_MAX_REL_BITS = 62


def _floor(q: Fraction) -> int:
    return q.numerator // q.denominator


def _ceil(q: Fraction) -> int:
    return -((-q.numerator) // q.denominator)


class LineSet:
    __slots__ = ("level", "region_level", "region_coord", "runs")

    def __init__(self, level: int, region_level: int, region_coord: int, runs: array):
        if level < region_level:
            raise ValueError("level below region level")
        if level - region_level > _MAX_REL_BITS:
            raise ValueError("relative span exceeds 62 bits; restrict the region first")
        self.level = level
        self.region_level = region_level
        self.region_coord = region_coord
        self.runs = runs

    @classmethod
    def full_unit(cls) -> "LineSet":
        return cls(0, 0, 0, array("q", [0, 1]))

    # -- geometry ----------------------------------------------------------

    @property
    def span(self) -> int:
        return 1 << (self.level - self.region_level)

    def abs_start(self) -> int:
        return self.region_coord << (self.level - self.region_level)

    def count(self) -> int:
        r = self.runs
        return sum(r[i + 1] - r[i] for i in range(0, len(r), 2))

    def run_pairs(self) -> int:
        return len(self.runs) // 2

    def is_empty(self) -> bool:
        return not self.runs

    def measure_in_region(self) -> Fraction:
        """mu(B ∩ region)/mu(region), exact."""
        return Fraction(self.count(), self.span)

    def copy(self) -> "LineSet":
        return LineSet(self.level, self.region_level, self.region_coord, array("q", self.runs))

    def first_cube_abs(self) -> int:
        if self.is_empty():
            raise ValueError("empty set")
        return self.abs_start() + self.runs[0]

    # -- refinement and elimination -----------------------------------------

    def refine(self, to_level: int) -> "LineSet":
        if to_level < self.level:
            raise ValueError("refine cannot coarsen")
        shift = to_level - self.level
        if shift == 0:
            return self.copy()
        out = array("q", self.runs)
        for i in range(len(out)):
            out[i] <<= shift
        return LineSet(to_level, self.region_level, self.region_coord, out)

    def bad_windows(self, form: LinearForm, delta) -> array:
        """Merged [lo, hi) ranges (relative) of cubes meeting {||L|| < delta}."""
        a = form.a[0]
        b = form.b
        if a < 0:
            a, b = -a, -b
        if a == 0:
            raise ValueError("zero form in elimination")
        delta = as_fraction(delta)
        span = self.span
        start = self.abs_start()
        scale = Fraction(1, 1 << self.level)
        lo_img = a * start * scale + b
        hi_img = a * (start + span) * scale + b
        k_lo = _ceil(lo_img - delta)
        k_hi = _floor(hi_img + delta)
        count = k_hi - k_lo + 1
        if count <= 0:
            return array("q")
        db = b.denominator
        dd = delta.denominator
        Db = db * dd // _gcd(db, dd)
        n1 = (b + delta) * Db
        n2 = (b - delta) * Db
        aN, aD = a.numerator, a.denominator
        M = Db * aN
        scale_num = (aD << self.level)
        dN = Db * scale_num
        base = start * M
        # c_min(k) = floor(((k*Db - n1) * scale_num - base)/M)
        Na0 = (k_lo * Db - int(n1)) * scale_num - base
        Nb0 = (k_lo * Db - int(n2)) * scale_num - base - 1
        dq, dr = divmod(dN, M)
        aq, ar = divmod(Na0, M)
        bq, br = divmod(Nb0, M)
        return kernels.floor_pair_windows(count, M, dq, dr, aq, ar, bq, br, span)

    def eliminate(self, form: LinearForm, delta) -> tuple[int, array]:
        """Subtract the form's bad windows; returns (removed cube count, windows)."""
        windows = self.bad_windows(form, delta)
        new_runs, removed = kernels.runs_subtract(self.runs, windows)
        self.runs = new_runs
        return removed, windows

    # -- frame changes -------------------------------------------------------

    def runs_in_frame(self, level: int, region_level: int, region_coord: int) -> array:
        """This set's runs re-expressed at `level` relative to another region, clipped."""
        if level < self.level:
            raise ValueError("cannot view runs at a coarser level")
        shift = level - self.level
        frame_start = region_coord << (level - region_level)
        frame_span = 1 << (level - region_level)
        my_start = self.abs_start()
        out = array("q")
        for i in range(0, len(self.runs), 2):
            lo = ((my_start + self.runs[i]) << shift) - frame_start
            hi = ((my_start + self.runs[i + 1]) << shift) - frame_start
            if lo < 0:
                lo = 0
            if hi > frame_span:
                hi = frame_span
            if lo < hi:
                out.append(lo)
                out.append(hi)
        return out

    def restrict_best(self, new_region_level: int) -> tuple["LineSet", dict]:
        """Keep the best dyadic subcube at `new_region_level` (exact averaging).

        The chosen subcube maximizes the contained survivor count (ties to the
        smallest coordinate), so the conditional survivor fraction never drops
        below the current one.
        """
        if new_region_level < self.region_level:
            raise ValueError("restriction must not coarsen the region")
        if new_region_level == self.region_level:
            return self, {"chosen": self.region_coord, "unchanged": True}
        block_shift = self.level - new_region_level
        if block_shift < 0:
            raise ValueError("region level beyond subdivision level")
        n_blocks = 1 << (new_region_level - self.region_level)
        counts = kernels.runs_block_counts(self.runs, block_shift, n_blocks)
        best_idx = 0
        best = -1
        for i, c in enumerate(counts):
            if c > best:
                best = c
                best_idx = i
        base = best_idx << block_shift
        top = base + (1 << block_shift)
        out = array("q")
        for i in range(0, len(self.runs), 2):
            lo = max(self.runs[i], base)
            hi = min(self.runs[i + 1], top)
            if lo < hi:
                out.append(lo - base)
                out.append(hi - base)
        new = LineSet(self.level, new_region_level,
                      (self.region_coord << (new_region_level - self.region_level)) + best_idx,
                      out)
        return new, {"chosen": new.region_coord, "count": best, "unchanged": False}

    def intersect_len(self, other_runs: array) -> int:
        return kernels.runs_intersect_len(self.runs, other_runs)


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a
