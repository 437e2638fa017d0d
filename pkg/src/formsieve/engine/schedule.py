"""Schedules driving the elimination: delta_n, lambda, x_n, m(n), block plans.

Lambda enters every inequality only through 2^lambda, 2^-lambda, 1+2^-lambda
and 2^(2*lambda+1); `LambdaValues` precomputes those as exact rationals
(integer lambda) or outward enclosures (transcendental lambda from the
theorem calculators).  All pass/fail decisions are certain-direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from ..forms import FormSequence, NormSelector, NormValue
from ..numerics import (
    RealInterval,
    Scalar,
    as_fraction,
    ceil_log2,
    decide_le,
    decide_lt,
    floor_log2,
    frac_str,
    guarded_ceil_log2,
    hi_bound,
    lo_bound,
    pow2,
)
from .errors import ScheduleInfeasible


def _scalar_json(v: Scalar) -> dict:
    if isinstance(v, RealInterval):
        return {"lo": frac_str(v.lower_fraction()), "hi": frac_str(v.upper_fraction())}
    return {"exact": frac_str(as_fraction(v))}


@dataclass
class LambdaValues:
    desc: str
    lam: Scalar
    pow2_lam: Scalar
    pow2_neg_lam: Scalar
    pow2_abs_lam: Scalar
    cover: Scalar       # 1 + 2^-lambda
    cover_sq: Scalar
    cond1_base: Scalar  # 2^(2*lambda+1)

    @classmethod
    def from_int(cls, k: int) -> "LambdaValues":
        p = pow2(k)
        n = pow2(-k)
        return cls(
            desc=str(k),
            lam=Fraction(k),
            pow2_lam=p,
            pow2_neg_lam=n,
            pow2_abs_lam=pow2(abs(k)),
            cover=1 + n,
            cover_sq=(1 + n) * (1 + n),
            cond1_base=pow2(2 * k + 1),
        )

    @classmethod
    def from_pow2_interval(cls, desc: str, lam: RealInterval, pow2_lam: RealInterval) -> "LambdaValues":
        if pow2_lam.lower_fraction() < 1:
            raise ValueError("interval lambda supported only for lambda >= 0")
        neg = 1 / pow2_lam
        return cls(
            desc=desc,
            lam=lam,
            pow2_lam=pow2_lam,
            pow2_neg_lam=neg,
            pow2_abs_lam=pow2_lam,
            cover=neg + 1,
            cover_sq=(neg + 1) * (neg + 1),
            cond1_base=pow2_lam * pow2_lam * 2,
        )

    def to_json(self) -> dict:
        return {"desc": self.desc, "lambda": _scalar_json(self.lam),
                "pow2_lambda": _scalar_json(self.pow2_lam)}


@dataclass
class Schedule:
    """(delta_n, lambda, x_n, m(n)) for Proposition-1-style runs.

    delta must be non-increasing and positive; x_n in (0,1); m(n) < n.
    `m_rule` is one of ("window", Nh), ("explicit", list), ("default", None).
    """

    deltas: tuple               # ("const", Fraction) or ("list", tuple[Fraction,...])
    lam: LambdaValues
    xs: tuple | None = None     # same encoding; None for block-schedule-only use
    m_rule: tuple = ("default", None)
    descriptor: dict = field(default_factory=dict)
    precision_bits: int = 256

    def delta(self, n: int) -> Fraction:
        kind, payload = self.deltas
        if kind == "const":
            return payload
        if n - 1 >= len(payload):
            raise IndexError(f"delta schedule has no entry for n={n}")
        return payload[n - 1]

    def x(self, n: int) -> Fraction:
        if self.xs is None:
            raise ValueError("schedule carries no x_n (block schedule only)")
        kind, payload = self.xs
        if kind == "const":
            return payload
        return payload[n - 1]

    def m_of(self, n: int, seq: FormSequence, d: int) -> int:
        kind, payload = self.m_rule
        if kind == "window":
            return max(0, n - payload)
        if kind == "explicit":
            return payload[n - 1]
        # default: largest m < n with R_n/R_m >= 2^(2l+1) d / delta_m
        for m in range(n - 1, 0, -1):
            if condition1_holds(seq, n, m, self, d) is True:
                return m
        return 0

    def validate(self, n_max: int):
        prev = None
        for n in range(1, n_max + 1):
            dn = self.delta(n)
            if dn <= 0:
                raise ValueError(f"delta_{n} <= 0")
            if prev is not None and dn > prev:
                raise ValueError(f"delta not non-increasing at n={n}")
            prev = dn
            if self.xs is not None:
                xn = self.x(n)
                if not (0 < xn < 1):
                    raise ValueError(f"x_{n} outside (0,1)")

    def x_product(self, lo: int, hi: int) -> Fraction:
        """prod_{lo < k < hi} (1 - x_k)."""
        out = Fraction(1)
        for k in range(lo + 1, hi):
            out *= 1 - self.x(k)
        return out

    def to_json(self, n_max: int) -> dict:
        kind, payload = self.deltas
        if kind == "const":
            delta_desc = {"kind": "constant", "value": frac_str(payload)}
        else:
            delta_desc = {"kind": "list", "values": [frac_str(v) for v in payload[:n_max]]}
        if self.xs is None:
            x_desc = None
        else:
            kind, payload = self.xs
            x_desc = ({"kind": "constant", "value": frac_str(payload)} if kind == "const"
                      else {"kind": "list", "values": [frac_str(v) for v in payload[:n_max]]})
        mk, mp = self.m_rule
        m_desc = {"kind": mk}
        if mk == "window":
            m_desc["window"] = mp
        elif mk == "explicit":
            m_desc["values"] = list(mp[:n_max])
        return {
            "delta": delta_desc,
            "x": x_desc,
            "m": m_desc,
            "lambda": self.lam.to_json(),
            "precision_bits": self.precision_bits,
            "source": self.descriptor,
        }


def conjugate_root(p: NormSelector, d: int):
    """d^(1/q) with q the Hoelder conjugate of p."""
    return p.conjugate().d_root(d)


def level_for(seq: FormSequence, n: int, sched: Schedule, d: int) -> int:
    """l_n = ceil(log2(d^(1/q) R_n / delta_n) + lambda), outward-safe.

    The defining inequality R_n d^(1/q) 2^-l <= 2^-lambda delta_n is then
    re-verified; failure raises ScheduleInfeasible.
    """
    delta_n = sched.delta(n)
    droot = conjugate_root(seq.p, d)
    nv = seq.norm_value(n)
    if isinstance(droot, Fraction) and nv.exact is not None and isinstance(sched.lam.pow2_lam, Fraction):
        l = ceil_log2(droot * nv.exact * sched.lam.pow2_lam / delta_n)
    else:
        dv = droot if isinstance(droot, RealInterval) else RealInterval.from_fraction(droot, sched.precision_bits)
        x = dv * nv.interval(sched.precision_bits) * sched.lam.pow2_lam / delta_n
        l = guarded_ceil_log2(x)
    l = max(l, 0)
    verify_level(seq, n, l, sched, d)
    return l


def verify_level(seq: FormSequence, n: int, l: int, sched: Schedule, d: int):
    droot = conjugate_root(seq.p, d)
    nv = seq.norm_value(n)
    delta_n = sched.delta(n)
    if isinstance(droot, Fraction) and nv.exact is not None:
        lhs = nv.exact * droot * pow2(-l)
    else:
        dv = droot if isinstance(droot, RealInterval) else RealInterval.from_fraction(droot, sched.precision_bits)
        lhs = dv * nv.interval(sched.precision_bits) * pow2(-l)
    rhs = sched.lam.pow2_neg_lam * delta_n
    if decide_le(lhs, rhs) is not True:
        raise ScheduleInfeasible(
            f"level check failed at n={n}, l={l}: need R_n d^(1/q) 2^-l <= 2^-lambda delta_n"
        )


def condition1_holds(seq: FormSequence, n: int, m: int, sched: Schedule, d: int,
                     norm_fn: Optional[Callable[[int], NormValue]] = None):
    """Proposition condition 1 at (n, m): R_n/R_m >= 2^(2lambda+1) d / delta_m.

    Vacuous (True) at m = 0.  Returns True/False when certain, None if the
    enclosures cannot decide.
    """
    if m == 0:
        return True
    nv_n = _norm_at(seq, n, norm_fn)
    nv_m = _norm_at(seq, m, norm_fn)
    thr = sched.lam.cond1_base * Fraction(d) / sched.delta(m)
    sq_n, sq_m = nv_n.sq(), nv_m.sq()
    if sq_n is not None and sq_m is not None and isinstance(thr, Fraction):
        if thr <= 0:
            return True
        return sq_n >= thr * thr * sq_m
    ratio = nv_n.interval(sched.precision_bits) / nv_m.interval(sched.precision_bits)
    dec = decide_le(thr, ratio)
    if dec is True:
        return True
    if decide_lt(ratio, thr) is True:
        return False
    return None


def condition2_holds(n: int, m: int, sched: Schedule):
    """Condition 2: 2 (1+2^-lambda)^2 delta_n <= x_n prod_{m<k<n} (1-x_k)."""
    lhs = sched.lam.cover_sq * (2 * sched.delta(n))
    rhs = sched.x(n) * sched.x_product(m, n)
    return decide_le(lhs, rhs), lhs, rhs


def _norm_at(seq: FormSequence, n: int, norm_fn) -> NormValue:
    if n <= len(seq):
        return seq.norm_value(n)
    if norm_fn is not None:
        return norm_fn(n)
    raise IndexError(f"norm R_{n} beyond the materialized sequence and no norm oracle given")


@dataclass
class Prop2Schedule:
    """Block plan (n_nu, eta_nu) with derived sigma_nu and Q_nu.

    sigma_0 = 2(1+2^-lambda) sum_{0<n<=n_1} delta_n and
    sigma_nu = 2(1+2^-lambda)^2 sum_{n_nu<n<=n_nu+1} delta_n for nu >= 1;
    entries of `sigma_upper` override the sum with a certified upper bound
    (used when a block is too long to sum term-by-term).
    """

    n_blocks: tuple[int, ...]          # (n_1, n_2, ...)
    etas: tuple                        # ("const", Scalar) or ("list", tuple)
    sigma_upper: dict = field(default_factory=dict)
    descriptor: dict = field(default_factory=dict)

    def n_of(self, nu: int) -> int:
        if nu == 0:
            return 0
        return self.n_blocks[nu - 1]

    @property
    def max_nu(self) -> int:
        return len(self.n_blocks)

    def eta(self, nu: int) -> Scalar:
        kind, payload = self.etas
        if kind == "const":
            return payload
        return payload[nu]

    def eta_lo(self, nu: int) -> Fraction:
        return lo_bound(self.eta(nu))

    def sigma(self, nu: int, sched: Schedule) -> Scalar:
        if nu in self.sigma_upper:
            return self.sigma_upper[nu]
        lo = self.n_of(nu)
        hi = self.n_of(nu + 1)
        total = Fraction(0)
        for n in range(lo + 1, hi + 1):
            total += sched.delta(n)
        factor = sched.lam.cover * 2 if nu == 0 else sched.lam.cover_sq * 2
        return factor * total

    def q_log2(self, nu: int, seq: FormSequence, sched: Schedule,
               norm_fn=None) -> tuple[int, int]:
        """(floor(log2 Q_nu), ceil(log2 Q_nu)) for Q_nu = R_{n_nu+1} delta_{n_nu} / (R_{n_nu} delta_{n_nu+1})."""
        n_lo = self.n_of(nu)
        n_hi = self.n_of(nu + 1)
        if n_lo == 0:
            raise ValueError("Q_nu defined for nu >= 1")
        nv_hi = _norm_at(seq, n_hi, norm_fn)
        nv_lo = _norm_at(seq, n_lo, norm_fn)
        dr = sched.delta(n_lo) / sched.delta(n_hi)
        sq_hi, sq_lo = nv_hi.sq(), nv_lo.sq()
        if sq_hi is not None and sq_lo is not None:
            q_sq = (sq_hi / sq_lo) * dr * dr
            fl = floor_log2(q_sq) // 2
            cl = -((-ceil_log2(q_sq)) // 2)
            return fl, cl
        q_iv = (nv_hi.interval() / nv_lo.interval()) * dr
        fl = floor_log2(q_iv.lower_fraction())
        cl = ceil_log2(q_iv.upper_fraction())
        return fl, cl

    def to_json(self) -> dict:
        kind, payload = self.etas
        eta_desc = ({"kind": "constant", "value": _scalar_json(payload)} if kind == "const"
                    else {"kind": "list", "values": [_scalar_json(v) for v in payload]})
        return {
            "n_blocks": list(self.n_blocks),
            "eta": eta_desc,
            "sigma_upper": {str(k): _scalar_json(v) for k, v in self.sigma_upper.items()},
            "source": self.descriptor,
        }


def condition_report(seq: FormSequence, sched: Schedule, n_max: int, d: Optional[int] = None,
                     p2: Optional[Prop2Schedule] = None, norm_fn=None) -> dict:
    """Per-n / per-nu evaluation of every schedule condition; never raises."""
    d = d if d is not None else seq.d
    rows = []
    all_pass = True
    if sched.xs is not None:
        for n in range(1, n_max + 1):
            try:
                m = sched.m_of(n, seq, d)
                c1 = condition1_holds(seq, n, m, sched, d, norm_fn)
                dec, lhs, rhs = condition2_holds(n, m, sched)
                row = {
                    "n": n,
                    "m": m,
                    "condition1": _tri(c1),
                    "condition2": _tri(dec),
                    "condition2_lhs_hi": frac_str(hi_bound(lhs)),
                    "condition2_rhs": frac_str(as_fraction(rhs)),
                }
            except Exception as exc:  # diagnostics must not raise
                row = {"n": n, "error": str(exc)}
                all_pass = False
            rows.append(row)
            if row.get("condition1") is not True or row.get("condition2") is not True:
                all_pass = False
    p2_rows = []
    if p2 is not None:
        for nu in range(0, p2.max_nu):
            row = {"nu": nu}
            try:
                if nu >= 1:
                    n_lo, n_hi = p2.n_of(nu), p2.n_of(nu + 1) if nu + 1 <= p2.max_nu else None
                    if n_hi is not None:
                        thr = sched.lam.cond1_base * Fraction(d) / sched.delta(n_lo)
                        nv_hi = _norm_at(seq, n_hi + 1, norm_fn)
                        nv_lo = _norm_at(seq, n_lo, norm_fn)
                        sq_hi, sq_lo = nv_hi.sq(), nv_lo.sq()
                        if sq_hi is not None and sq_lo is not None and isinstance(thr, Fraction):
                            ok = sq_hi >= thr * thr * sq_lo
                        else:
                            ok = decide_le(thr, nv_hi.interval() / nv_lo.interval())
                        row["condition1"] = _tri(ok)
                sig = p2.sigma(nu, sched)
                if nu == 0:
                    row["condition2"] = _tri(decide_lt(sig, p2.eta(0)))
                    row["sigma0_hi"] = frac_str(hi_bound(sig))
                else:
                    rhs = p2.eta(nu) * (1 - _as_iv_or_frac(p2.eta(nu - 1)))
                    row["condition3"] = _tri(decide_le(sig, rhs))
                if 1 <= nu < p2.max_nu - 1:
                    sig_next = p2.sigma(nu + 1, sched)
                    margin = 1 - _as_iv_or_frac(p2.eta(nu)) - sig_next / p2.eta(nu + 1)
                    fl, cl = p2.q_log2(nu, seq, sched, norm_fn)
                    lhs_fl = margin * pow2(d * fl)
                    row["condition4_floor_exponent"] = fl
                    row["condition4_ceil_exponent"] = cl
                    row["condition4"] = _tri(decide_le(Fraction(1), lhs_fl))
                    row["condition4_note"] = "floor form checked; ceil variant reported (flagged discrepancy)"
            except IndexError as exc:
                row["unchecked"] = str(exc)
            except Exception as exc:
                row["error"] = str(exc)
                all_pass = False
            p2_rows.append(row)
            for key in ("condition1", "condition2", "condition3", "condition4"):
                if key in row and row[key] is not True:
                    all_pass = False
    return {"prop1": rows, "prop2": p2_rows, "all_pass": all_pass}


def _tri(v):
    if v is True:
        return True
    if v is False:
        return False
    return "ambiguous"


def _as_iv_or_frac(v: Scalar):
    return v
