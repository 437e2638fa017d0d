"""Exact rational arithmetic and directed-rounding interval evaluation.

Two carriers live here.  `fractions.Fraction` is the exact carrier used by
every set computation (coefficients, measures, margins, thresholds).
`RealInterval` is an enclosure with outward rounding on gmpy2/MPFR, used only
where transcendental constants enter (schedule parameters, level
computation).  Comparisons between the two are always resolved in the sound
direction or reported as ambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import gmpy2

DEFAULT_PRECISION = 256

Rational = Union[int, Fraction]
Scalar = Union[int, Fraction, "RealInterval"]


class DomainError(ValueError):
    """Operation applied outside its mathematical domain (e.g. log of <= 0)."""


class PrecisionExhausted(ArithmeticError):
    """A comparison stayed ambiguous after the precision escalation cap."""


def as_fraction(x) -> Fraction:
    """Coerce int / Fraction / 'p/q' string to an exact Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot interpret {x!r} as an exact rational")


def frac_str(x: Rational) -> str:
    """Canonical 'p/q' (or bare 'p') string for a rational."""
    x = as_fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def nearest_int_dist(x: Rational) -> Fraction:
    """Distance from x to the nearest integer, exact and in [0, 1/2]."""
    x = as_fraction(x)
    frac = x - (x.numerator // x.denominator)
    return min(frac, 1 - frac)


def floor_log2(x: Rational) -> int:
    """Exact floor(log2 x) for rational x > 0."""
    x = as_fraction(x)
    if x <= 0:
        raise DomainError("floor_log2 requires a positive argument")
    e = x.numerator.bit_length() - x.denominator.bit_length()
    # 2^e <= x < 2^(e+2); fix up by exact comparison
    if pow2(e) > x:
        e -= 1
    elif pow2(e + 1) <= x:
        e += 1
    assert pow2(e) <= x < pow2(e + 1)
    return e


def ceil_log2(x: Rational) -> int:
    """Smallest integer l with 2^l >= x, for rational x > 0."""
    e = floor_log2(x)
    return e if pow2(e) == as_fraction(x) else e + 1


def pow2(e: int) -> Fraction:
    """Exact 2^e for any integer e."""
    return Fraction(1 << e) if e >= 0 else Fraction(1, 1 << -e)


def floor_frac(q: Rational) -> int:
    q = as_fraction(q)
    return q.numerator // q.denominator


def ceil_frac(q: Rational) -> int:
    q = as_fraction(q)
    return -((-q.numerator) // q.denominator)


def _ctx(bits: int, rounding):
    return gmpy2.context(precision=bits, round=rounding)


def _mpfr_down(q: Fraction, bits: int):
    with _ctx(bits, gmpy2.RoundDown):
        return gmpy2.mpfr(gmpy2.mpq(q.numerator, q.denominator))


def _mpfr_up(q: Fraction, bits: int):
    with _ctx(bits, gmpy2.RoundUp):
        return gmpy2.mpfr(gmpy2.mpq(q.numerator, q.denominator))


def _to_fraction(v) -> Fraction:
    num, den = v.as_integer_ratio()
    return Fraction(int(num), int(den))


class RealInterval:
    """Closed interval [lo, hi] of MPFR values enclosing one real number.

    All operations round outward, so the true value of the represented
    expression is always contained.  Endpoints are exact binary rationals and
    convert losslessly to Fraction.
    """

    __slots__ = ("lo", "hi", "precision")

    def __init__(self, lo, hi, precision: int = DEFAULT_PRECISION):
        if gmpy2.is_nan(lo) or gmpy2.is_nan(hi):
            raise DomainError("NaN endpoint in interval")
        if lo > hi:
            raise ValueError(f"interval endpoints out of order: [{lo}, {hi}]")
        self.lo = lo
        self.hi = hi
        self.precision = precision

    @classmethod
    def from_fraction(cls, q: Rational, bits: int = DEFAULT_PRECISION) -> "RealInterval":
        q = as_fraction(q)
        return cls(_mpfr_down(q, bits), _mpfr_up(q, bits), bits)

    @classmethod
    def from_endpoints(cls, lo: Rational, hi: Rational, bits: int = DEFAULT_PRECISION) -> "RealInterval":
        return cls(_mpfr_down(as_fraction(lo), bits), _mpfr_up(as_fraction(hi), bits), bits)

    @classmethod
    def ln2(cls, bits: int = DEFAULT_PRECISION) -> "RealInterval":
        with _ctx(bits, gmpy2.RoundDown):
            lo = gmpy2.const_log2()
        with _ctx(bits, gmpy2.RoundUp):
            hi = gmpy2.const_log2()
        return cls(lo, hi, bits)

    # -- exact endpoint access -------------------------------------------

    def lower_fraction(self) -> Fraction:
        return _to_fraction(self.lo)

    def upper_fraction(self) -> Fraction:
        return _to_fraction(self.hi)

    def width_fraction(self) -> Fraction:
        return self.upper_fraction() - self.lower_fraction()

    def contains(self, q: Rational) -> bool:
        q = as_fraction(q)
        return self.lower_fraction() <= q <= self.upper_fraction()

    def contains_interval(self, other: "RealInterval") -> bool:
        return (self.lower_fraction() <= other.lower_fraction()
                and other.upper_fraction() <= self.upper_fraction())

    def midpoint_float(self) -> float:
        return (float(self.lo) + float(self.hi)) / 2.0

    # -- arithmetic -------------------------------------------------------

    def _coerce(self, other) -> "RealInterval":
        if isinstance(other, RealInterval):
            return other
        return RealInterval.from_fraction(as_fraction(other), self.precision)

    def _bits(self, other: "RealInterval") -> int:
        return max(self.precision, other.precision)

    def __add__(self, other) -> "RealInterval":
        o = self._coerce(other)
        bits = self._bits(o)
        with _ctx(bits, gmpy2.RoundDown):
            lo = self.lo + o.lo
        with _ctx(bits, gmpy2.RoundUp):
            hi = self.hi + o.hi
        return RealInterval(lo, hi, bits)

    __radd__ = __add__

    def __neg__(self) -> "RealInterval":
        return RealInterval(-self.hi, -self.lo, self.precision)

    def __sub__(self, other) -> "RealInterval":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "RealInterval":
        return (-self) + other

    def __mul__(self, other) -> "RealInterval":
        o = self._coerce(other)
        bits = self._bits(o)
        pairs = [(self.lo, o.lo), (self.lo, o.hi), (self.hi, o.lo), (self.hi, o.hi)]
        with _ctx(bits, gmpy2.RoundDown):
            lo = min(a * b for a, b in pairs)
        with _ctx(bits, gmpy2.RoundUp):
            hi = max(a * b for a, b in pairs)
        return RealInterval(lo, hi, bits)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "RealInterval":
        o = self._coerce(other)
        if o.lo <= 0 <= o.hi:
            raise DomainError("division by an interval containing zero")
        bits = self._bits(o)
        pairs = [(self.lo, o.lo), (self.lo, o.hi), (self.hi, o.lo), (self.hi, o.hi)]
        with _ctx(bits, gmpy2.RoundDown):
            lo = min(a / b for a, b in pairs)
        with _ctx(bits, gmpy2.RoundUp):
            hi = max(a / b for a, b in pairs)
        return RealInterval(lo, hi, bits)

    def __rtruediv__(self, other) -> "RealInterval":
        return self._coerce(other) / self

    # -- monotone transcendental maps --------------------------------------

    def log2(self) -> "RealInterval":
        if self.lo <= 0:
            raise DomainError("log2 of a non-positive enclosure")
        with _ctx(self.precision, gmpy2.RoundDown):
            lo = gmpy2.log2(self.lo)
        with _ctx(self.precision, gmpy2.RoundUp):
            hi = gmpy2.log2(self.hi)
        return RealInterval(lo, hi, self.precision)

    def ln(self) -> "RealInterval":
        if self.lo <= 0:
            raise DomainError("ln of a non-positive enclosure")
        with _ctx(self.precision, gmpy2.RoundDown):
            lo = gmpy2.log(self.lo)
        with _ctx(self.precision, gmpy2.RoundUp):
            hi = gmpy2.log(self.hi)
        return RealInterval(lo, hi, self.precision)

    def exp(self) -> "RealInterval":
        with _ctx(self.precision, gmpy2.RoundDown):
            lo = gmpy2.exp(self.lo)
        with _ctx(self.precision, gmpy2.RoundUp):
            hi = gmpy2.exp(self.hi)
        return RealInterval(lo, hi, self.precision)

    def sqrt(self) -> "RealInterval":
        if self.lo < 0:
            raise DomainError("sqrt of an enclosure with negative lower end")
        with _ctx(self.precision, gmpy2.RoundDown):
            lo = gmpy2.sqrt(self.lo)
        with _ctx(self.precision, gmpy2.RoundUp):
            hi = gmpy2.sqrt(self.hi)
        return RealInterval(lo, hi, self.precision)

    def maximum(self, other) -> "RealInterval":
        o = self._coerce(other)
        return RealInterval(max(self.lo, o.lo), max(self.hi, o.hi), self._bits(o))

    def __repr__(self):
        return f"RealInterval([{self.lo!s}, {self.hi!s}], bits={self.precision})"


# -- sound comparisons over Fraction | RealInterval ---------------------------


def lo_bound(v: Scalar) -> Fraction:
    """Exact rational lower bound of a scalar (itself if rational)."""
    if isinstance(v, RealInterval):
        return v.lower_fraction()
    return as_fraction(v)


def hi_bound(v: Scalar) -> Fraction:
    if isinstance(v, RealInterval):
        return v.upper_fraction()
    return as_fraction(v)


def decide_le(a: Scalar, b: Scalar):
    """True if a <= b certainly, False if a > b certainly, None if ambiguous."""
    if hi_bound(a) <= lo_bound(b):
        return True
    if lo_bound(a) > hi_bound(b):
        return False
    return None


def decide_lt(a: Scalar, b: Scalar):
    if hi_bound(a) < lo_bound(b):
        return True
    if lo_bound(a) >= hi_bound(b):
        return False
    return None


def certainly(decision, what: str) -> bool:
    """Collapse a three-valued decision; ambiguity raises PrecisionExhausted."""
    if decision is None:
        raise PrecisionExhausted(f"cannot resolve at working precision: {what}")
    return decision


def guarded_ceil_log2(v: Scalar) -> int:
    """Smallest integer l with 2^l >= hi(v); outward-safe ceiling of log2.

    May overshoot the true ceil(log2 v) by one when the enclosure straddles a
    power of two; never undershoots.
    """
    hi = hi_bound(v)
    if lo_bound(v) <= 0:
        raise DomainError("guarded_ceil_log2 requires a positive enclosure")
    return ceil_log2(hi)


# -- constant-expression trees -------------------------------------------------


@dataclass(frozen=True)
class Expr:
    """Node of a constant expression over rationals and +, *, /, -, log2, ln, exp, sqrt, max."""

    op: str
    args: tuple = ()
    value: Fraction | None = None

    @staticmethod
    def rat(q) -> "Expr":
        return Expr("rat", value=as_fraction(q))

    @staticmethod
    def add(a, b) -> "Expr":
        return Expr("add", (a, b))

    @staticmethod
    def sub(a, b) -> "Expr":
        return Expr("sub", (a, b))

    @staticmethod
    def mul(a, b) -> "Expr":
        return Expr("mul", (a, b))

    @staticmethod
    def div(a, b) -> "Expr":
        return Expr("div", (a, b))

    @staticmethod
    def log2(a) -> "Expr":
        return Expr("log2", (a,))

    @staticmethod
    def ln(a) -> "Expr":
        return Expr("ln", (a,))

    @staticmethod
    def exp(a) -> "Expr":
        return Expr("exp", (a,))

    @staticmethod
    def sqrt(a) -> "Expr":
        return Expr("sqrt", (a,))

    @staticmethod
    def maximum(a, b) -> "Expr":
        return Expr("max", (a, b))


def eval_constant(expr: Expr, precision_bits: int = DEFAULT_PRECISION) -> RealInterval:
    """Evaluate a constant expression tree to an outward-rounded enclosure."""
    op = expr.op
    if op == "rat":
        return RealInterval.from_fraction(expr.value, precision_bits)
    args = [eval_constant(a, precision_bits) for a in expr.args]
    if op == "add":
        return args[0] + args[1]
    if op == "sub":
        return args[0] - args[1]
    if op == "mul":
        return args[0] * args[1]
    if op == "div":
        return args[0] / args[1]
    if op == "log2":
        return args[0].log2()
    if op == "ln":
        return args[0].ln()
    if op == "exp":
        return args[0].exp()
    if op == "sqrt":
        return args[0].sqrt()
    if op == "max":
        return args[0].maximum(args[1])
    raise ValueError(f"unknown expression op {op!r}")
