"""Linear forms, p-norms, sequence generators, and the rescaling change of variables.

A form is the affine map theta -> a.theta + b with rational coefficients.
Sequences cache their coefficient norms: exactly for p in {1, inf}, as exact
squares for p = 2, and as outward enclosures for general p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .numerics import (
    DEFAULT_PRECISION,
    DomainError,
    RealInterval,
    as_fraction,
    frac_str,
)


@dataclass(frozen=True)
class LinearForm:
    """L(theta) = a . theta + b."""

    a: tuple[Fraction, ...]
    b: Fraction

    @staticmethod
    def make(a, b=0) -> "LinearForm":
        coeffs = tuple(as_fraction(x) for x in a)
        if not coeffs:
            raise ValueError("a linear form needs at least one coefficient")
        return LinearForm(coeffs, as_fraction(b))

    @property
    def d(self) -> int:
        return len(self.a)

    def is_zero_vector(self) -> bool:
        return all(x == 0 for x in self.a)

    def evaluate(self, theta: Sequence) -> Fraction:
        """Exact a . theta + b; theta must match the form's dimension."""
        if len(theta) != self.d:
            raise ValueError(f"dimension mismatch: form has d={self.d}, point has {len(theta)}")
        return sum((ai * as_fraction(ti) for ai, ti in zip(self.a, theta)), self.b)

    def to_spec(self) -> dict:
        return {"a": [frac_str(x) for x in self.a], "b": frac_str(self.b)}


def affine_range(form: LinearForm, cube) -> tuple[Fraction, Fraction]:
    """Exact [min, max] of the form over the CLOSED dyadic cube.

    `cube` provides integer `coords` and `level`; each coordinate spans
    [c/2^l, (c+1)/2^l].  Extremes are attained coordinate-wise by sign.
    """
    if len(cube.coords) != form.d:
        raise ValueError("cube dimension does not match form dimension")
    scale = Fraction(1, 1 << cube.level)
    lo = form.b
    hi = form.b
    for ai, ci in zip(form.a, cube.coords):
        if ai >= 0:
            lo += ai * ci * scale
            hi += ai * (ci + 1) * scale
        else:
            lo += ai * (ci + 1) * scale
            hi += ai * ci * scale
    return lo, hi


class NormSelector:
    """The exponent p in [1, inf] selecting |a|_p, plus Hoelder bookkeeping."""

    __slots__ = ("p",)

    INF = math.inf

    def __init__(self, p):
        if p == math.inf or p == "inf":
            self.p = math.inf
            return
        p = as_fraction(p)
        if p < 1:
            raise ValueError("p must satisfy p >= 1")
        self.p = p

    @staticmethod
    def parse(text) -> "NormSelector":
        if isinstance(text, NormSelector):
            return text
        return NormSelector(text)

    def __eq__(self, other):
        return isinstance(other, NormSelector) and self.p == other.p

    def __repr__(self):
        return f"NormSelector({self.key()})"

    def key(self) -> str:
        return "inf" if self.is_inf else frac_str(self.p)

    @property
    def is_inf(self) -> bool:
        return self.p == math.inf

    @property
    def is_one(self) -> bool:
        return not self.is_inf and self.p == 1

    @property
    def is_two(self) -> bool:
        return not self.is_inf and self.p == 2

    def conjugate(self) -> "NormSelector":
        """q with 1/p + 1/q = 1."""
        if self.is_inf:
            return NormSelector(1)
        if self.is_one:
            return NormSelector(math.inf)
        return NormSelector(self.p / (self.p - 1))

    def d_root(self, d: int, bits: int = DEFAULT_PRECISION):
        """d^{1/p}: exact Fraction where possible, else an enclosure.

        d^{1/p} = 1 for p = inf.
        """
        if self.is_inf:
            return Fraction(1)
        if self.is_one:
            return Fraction(d)
        if self.is_two:
            r = math.isqrt(d)
            if r * r == d:
                return Fraction(r)
        # d^{1/p} = exp(ln(d)/p)
        dv = RealInterval.from_fraction(d, bits)
        return (dv.ln() / RealInterval.from_fraction(self.p, bits)).exp()

    def d_root_squared(self, d: int) -> Optional[Fraction]:
        """Exact (d^{1/p})^2 when available (p in {1, 2, inf})."""
        if self.is_inf:
            return Fraction(1)
        if self.is_one:
            return Fraction(d * d)
        if self.is_two:
            return Fraction(d)
        return None


class NormValue:
    """Cached |a|_p: exact, exact-square, or re-evaluable enclosure."""

    __slots__ = ("exact", "square", "_abs_coeffs", "_p")

    def __init__(self, exact=None, square=None, abs_coeffs=None, p=None):
        self.exact = exact
        self.square = square
        self._abs_coeffs = abs_coeffs
        self._p = p

    @staticmethod
    def of(form: LinearForm, p: NormSelector) -> "NormValue":
        absa = [abs(x) for x in form.a]
        if p.is_inf:
            return NormValue(exact=max(absa))
        if p.is_one:
            return NormValue(exact=sum(absa, Fraction(0)))
        if p.is_two:
            sq = sum((x * x for x in absa), Fraction(0))
            root = _exact_sqrt(sq)
            return NormValue(exact=root, square=sq)
        return NormValue(abs_coeffs=tuple(absa), p=p)

    def scaled(self, r: Fraction) -> "NormValue":
        if self.exact is not None:
            sq = self.square * r * r if self.square is not None else None
            return NormValue(exact=self.exact * r, square=sq)
        if self.square is not None:
            return NormValue(square=self.square * r * r)
        return NormValue(abs_coeffs=tuple(x * r for x in self._abs_coeffs), p=self._p)

    def interval(self, bits: int = DEFAULT_PRECISION) -> RealInterval:
        if self.exact is not None:
            return RealInterval.from_fraction(self.exact, bits)
        if self.square is not None:
            return RealInterval.from_fraction(self.square, bits).sqrt()
        p = self._p
        total = RealInterval.from_fraction(0, bits)
        pv = RealInterval.from_fraction(p.p, bits)
        for x in self._abs_coeffs:
            if x == 0:
                continue
            xv = RealInterval.from_fraction(x, bits)
            total = total + (xv.ln() * pv).exp()
        return (total.ln() / pv).exp()

    def sq(self) -> Optional[Fraction]:
        """Exact square when known."""
        if self.square is not None:
            return self.square
        if self.exact is not None:
            return self.exact * self.exact
        return None

    def is_positive(self) -> bool:
        if self.exact is not None:
            return self.exact > 0
        if self.square is not None:
            return self.square > 0
        return any(x != 0 for x in self._abs_coeffs)

    def le(self, other: "NormValue") -> bool:
        """Exact R <= R' where possible, else certain interval comparison."""
        a, b = self.sq(), other.sq()
        if a is not None and b is not None:
            return a <= b
        return self.interval().upper_fraction() <= other.interval().lower_fraction()

    def describe(self) -> str:
        if self.exact is not None:
            return frac_str(self.exact)
        if self.square is not None:
            return f"sqrt({frac_str(self.square)})"
        return f"|a|_{frac_str(self._p.p)}"


def _exact_sqrt(q: Fraction) -> Optional[Fraction]:
    rn = math.isqrt(q.numerator)
    rd = math.isqrt(q.denominator)
    if rn * rn == q.numerator and rd * rd == q.denominator:
        return Fraction(rn, rd)
    return None


def norm(form: LinearForm, p: NormSelector):
    """R = |a|_p: Fraction for p in {1, inf} (and exact p=2 cases), else enclosure."""
    nv = NormValue.of(form, NormSelector.parse(p))
    if nv.exact is not None:
        return nv.exact
    return nv.interval()


@dataclass
class FormSequence:
    """Ordered forms with shared dimension, a norm selector, and cached norms.

    Invariants enforced at construction: every a_n is nonzero, every R_n > 0,
    and R_1 <= R_2 <= ... (exact or certified comparison).
    """

    forms: tuple[LinearForm, ...]
    p: NormSelector
    norms: tuple[NormValue, ...] = field(default=None)
    spec: dict | None = None

    def __post_init__(self):
        if not self.forms:
            raise ValueError("empty form sequence")
        d = self.forms[0].d
        for i, f in enumerate(self.forms):
            if f.d != d:
                raise ValueError(f"form {i + 1} has dimension {f.d}, expected {d}")
            if f.is_zero_vector():
                raise ValueError(f"form {i + 1} has a zero coefficient vector")
        if self.norms is None:
            self.norms = tuple(NormValue.of(f, self.p) for f in self.forms)
        for i, nv in enumerate(self.norms):
            if not nv.is_positive():
                raise ValueError(f"R_{i + 1} is not positive")
        for i in range(len(self.norms) - 1):
            if not self.norms[i].le(self.norms[i + 1]):
                raise ValueError(f"norms are not non-decreasing at n={i + 1}")

    def __len__(self):
        return len(self.forms)

    @property
    def d(self) -> int:
        return self.forms[0].d

    def form(self, n: int) -> LinearForm:
        """1-based access, matching the indexing of the construction."""
        return self.forms[n - 1]

    def norm_value(self, n: int) -> NormValue:
        return self.norms[n - 1]

    def to_spec(self) -> dict:
        if self.spec is not None:
            return self.spec
        return {
            "p": self.p.key(),
            "forms": [f.to_spec() for f in self.forms],
        }


def rescale(seq: FormSequence, v: Sequence, r) -> FormSequence:
    """Change of variables theta = v + r.vartheta: returns L~_n(x) = L_n(r.x + v).

    New coefficients are r*a_n, new offsets a_n.v + b_n, new norms r*R_n.
    """
    r = as_fraction(r)
    if r <= 0:
        raise ValueError("rescale requires r > 0")
    v = [as_fraction(x) for x in v]
    if len(v) != seq.d:
        raise ValueError("shift vector dimension mismatch")
    new_forms = []
    for f in seq.forms:
        shift = sum((ai * vi for ai, vi in zip(f.a, v)), f.b)
        new_forms.append(LinearForm(tuple(ai * r for ai in f.a), shift))
    spec = {
        "transform": {"scale": frac_str(r), "shift": [frac_str(x) for x in v]},
        "base": seq.to_spec(),
    }
    return FormSequence(
        forms=tuple(new_forms),
        p=seq.p,
        norms=tuple(nv.scaled(r) for nv in seq.norms),
        spec=spec,
    )


def colinear_reduction(seq: FormSequence):
    """Detect a_n = g_n * e for a fixed primitive integer direction e.

    Returns (reduced 1-d sequence over w = e.theta, e) when the sequence is
    colinear and e[0] is a power of two (so extracted points lift to dyadic
    coordinates), else None.  Reduced coefficients are |g_n| with offsets
    sign-adjusted; ||.|| is even, so margins are unchanged.
    """
    if seq.d == 1:
        return None
    a1 = seq.forms[0].a
    num_gcd = math.gcd(*[x.numerator for x in a1])
    den_lcm = math.lcm(*[x.denominator for x in a1])
    content = Fraction(num_gcd, den_lcm)
    e = [x / content for x in a1]
    if any(x.denominator != 1 for x in e):
        return None
    e = [int(x) for x in e]
    if e[0] < 0:
        e = [-x for x in e]
    if e[0] == 0 or (e[0] & (e[0] - 1)) != 0:
        return None
    reduced = []
    for f in seq.forms:
        g = f.a[0] / e[0]
        if any(ai != g * ei for ai, ei in zip(f.a, e)):
            return None
        if g < 0:
            reduced.append(LinearForm((-g,), -f.b))
        else:
            reduced.append(LinearForm((g,), f.b))
    spec = {"reduction": {"direction": e}, "base": seq.to_spec()}
    red = FormSequence(forms=tuple(reduced), p=seq.p, norms=None, spec=spec)
    return red, tuple(e)


def lift_point(w: Fraction, e: tuple[int, ...], d: int) -> tuple[Fraction, ...]:
    """Inverse of the colinear reduction: theta = (w/e[0], 0, ..., 0)."""
    return (as_fraction(w) / e[0],) + (Fraction(0),) * (d - 1)


# -- generators ---------------------------------------------------------------


def generate(family: str, params: dict, count: int, d: int = 1, p="inf"):
    """Build a named family; returns (FormSequence, exact ratio statistics).

    Families: lacunary_power (a_n = base^n, d=1), cassels (u_r = k^r*(1..d)),
    linear (a_n = n, d=1), fibonacci (d=1), exp_power (a_n = ceil(e^(g n^beta))).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    params = dict(params or {})
    if family == "lacunary_power":
        base = int(params.pop("base", 2))
        if base < 2:
            raise ValueError("lacunary_power requires base >= 2")
        if d != 1:
            raise ValueError("lacunary_power is one-dimensional")
        forms = [LinearForm.make([base ** n]) for n in range(1, count + 1)]
        stats = {"min_successive_ratio": frac_str(base), "condition": "R_{n+1}/R_n >= 2"}
    elif family == "cassels":
        k = int(params.pop("k"))
        if k <= 2:
            raise ValueError("cassels requires k > 2")
        forms = [
            LinearForm.make([j * k ** r for j in range(1, d + 1)])
            for r in range(1, count + 1)
        ]
        stats = {
            "min_successive_ratio": frac_str(k),
            "condition": f"rho_(r+1)/rho_r = {k} > 2",
        }
    elif family == "linear":
        if d != 1:
            raise ValueError("linear family is one-dimensional")
        forms = [LinearForm.make([n]) for n in range(1, count + 1)]
        stats = {
            "min_growth_product": frac_str(
                min(((Fraction(n + 1, n) - 1) * n for n in range(1, count)), default=Fraction(1))
            ),
            "condition": "(R_{n+1}/R_n - 1) * n > 0",
        }
    elif family == "fibonacci":
        if d != 1:
            raise ValueError("fibonacci family is one-dimensional")
        fibs = [1, 1]
        while len(fibs) < count:
            fibs.append(fibs[-1] + fibs[-2])
        forms = [LinearForm.make([f]) for f in fibs[:count]]
        ratios = [Fraction(fibs[n + 2], fibs[n]) for n in range(count - 2)]
        stats = {
            "min_window2_ratio": frac_str(min(ratios)) if ratios else "n/a",
            "condition": "R_{n+2}/R_n >= 2",
        }
    elif family == "exp_power":
        gamma = as_fraction(params.pop("gamma"))
        beta = as_fraction(params.pop("beta"))
        beta1 = as_fraction(params.pop("beta1", 0))
        if not (0 < beta <= 1) or not (0 <= beta1 < beta) or gamma <= 0:
            raise ValueError("exp_power requires gamma > 0 and 0 <= beta1 < beta <= 1")
        if d != 1:
            raise ValueError("exp_power family is one-dimensional")
        coeffs = []
        prev = 0
        for n in range(1, count + 1):
            c = _ceil_exp_power(gamma, beta, n)
            c = max(c, prev)  # monotone guard against rounding plateaus
            coeffs.append(c)
            prev = c
        forms = [LinearForm.make([c]) for c in coeffs]
        ratios = [Fraction(coeffs[i + 1], coeffs[i]) for i in range(count - 1)]
        stats = {
            "min_successive_ratio": frac_str(min(ratios)) if ratios else "n/a",
            "condition": "ln R_n = gamma n^beta + O(n^beta1)",
        }
    else:
        raise ValueError(f"unknown generator family {family!r}")
    if params:
        raise ValueError(f"unused generator parameters: {sorted(params)}")
    spec = {
        "family": family,
        "d": d,
        "p": NormSelector.parse(p).key(),
        "params": {},
        "count": count,
    }
    if family == "lacunary_power":
        spec["params"]["base"] = int(stats["min_successive_ratio"])
    elif family == "cassels":
        spec["params"]["k"] = int(stats["min_successive_ratio"])
    elif family == "exp_power":
        spec["params"] = {"gamma": frac_str(gamma), "beta": frac_str(beta), "beta1": frac_str(beta1)}
    seq = FormSequence(forms=tuple(forms), p=NormSelector.parse(p), spec=spec)
    return seq, stats


def _ceil_exp_power(gamma: Fraction, beta: Fraction, n: int, bits: int = 128) -> int:
    """ceil(exp(gamma * n^beta)) with certified rounding."""
    for b in (bits, 4 * bits):
        nv = RealInterval.from_fraction(n, b)
        expo = nv.ln() * RealInterval.from_fraction(beta, b) if beta != 1 else None
        if beta == 1:
            x = RealInterval.from_fraction(gamma * n, b)
        else:
            x = expo.exp() * RealInterval.from_fraction(gamma, b)
        val = x.exp()
        lo, hi = val.lower_fraction(), val.upper_fraction()
        clo = -((-lo.numerator) // lo.denominator)  # ceil
        chi = -((-hi.numerator) // hi.denominator)
        if clo == chi:
            return int(clo)
    raise DomainError(f"cannot certify ceil(exp({gamma} * {n}^{beta})) at working precision")


def validate_sequence(seq: FormSequence, window: int) -> dict:
    """Check R_{n+N}/R_n >= 2 over the generated window; report exact extremes.

    The report never raises: violations land in `first_violation`.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    n_count = len(seq)
    monotone = True
    min_ratio_sq = None
    min_at = None
    first_violation = None
    for n in range(1, n_count):
        if not seq.norms[n - 1].le(seq.norms[n]):
            monotone = False
    for n in range(1, n_count - window + 1):
        a = seq.norms[n - 1].sq()
        b = seq.norms[n + window - 1].sq()
        if a is None or b is None:
            ra = seq.norms[n - 1].interval()
            rb = seq.norms[n + window - 1].interval()
            ratio_sq = (rb / ra) * (rb / ra)
            ok = (rb / ra).lower_fraction() >= 2
            key = ratio_sq.lower_fraction()
        else:
            ratio_sq = b / a
            ok = ratio_sq >= 4
            key = ratio_sq
        if min_ratio_sq is None or key < min_ratio_sq:
            min_ratio_sq = key
            min_at = n
        if not ok and first_violation is None:
            first_violation = n
    return {
        "window": window,
        "monotone": monotone,
        "min_ratio_squared": frac_str(min_ratio_sq) if isinstance(min_ratio_sq, Fraction) else None,
        "min_ratio_at": min_at,
        "passes": first_violation is None,
        "first_violation": first_violation,
    }


def sequence_from_spec(spec: dict) -> FormSequence:
    """Build a FormSequence from its JSON document form."""
    if "forms" in spec:
        p = NormSelector.parse(spec.get("p", "inf"))
        forms = tuple(
            LinearForm.make([as_fraction(x) for x in f["a"]], as_fraction(f.get("b", 0)))
            for f in spec["forms"]
        )
        return FormSequence(forms=forms, p=p, spec=spec)
    seq, _ = generate(
        spec["family"],
        spec.get("params", {}),
        int(spec["count"]),
        d=int(spec.get("d", 1)),
        p=spec.get("p", "inf"),
    )
    # keep the caller's spec verbatim so digests match the input document
    seq.spec = spec
    return seq
