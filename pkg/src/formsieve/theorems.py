"""Schedule calculators: turn the lacunary/sublacunary hypotheses into
concrete, runtime-verified schedules for the elimination engine.

Every transcendental quantity is evaluated as a constant-expression tree with
outward rounding; each inequality the derivations rely on is re-verified
numerically at working precision (escalating, then PrecisionExhausted — never
silently rounded).  The delta handed to the engine is always the exact
rational lower endpoint of its enclosure, which only weakens the certified
claim.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from .engine.schedule import LambdaValues, Prop2Schedule, Schedule
from .forms import FormSequence
from .numerics import (
    DEFAULT_PRECISION,
    Expr,
    PrecisionExhausted,
    RealInterval,
    Scalar,
    as_fraction,
    ceil_frac,
    decide_le,
    decide_lt,
    eval_constant,
    frac_str,
    hi_bound,
    lo_bound,
    pow2,
)

_MAX_BITS = 8192


def _iv_json(v: RealInterval) -> dict:
    return {"lo": frac_str(v.lower_fraction()), "hi": frac_str(v.upper_fraction()),
            "approx": v.midpoint_float()}


def _resolve_int_ceil(expr: Expr, bits: int) -> tuple[int, int]:
    """ceil of an expression value as a certified integer (escalating bits)."""
    b = bits
    while b <= _MAX_BITS:
        iv = eval_constant(expr, b)
        clo = ceil_frac(iv.lower_fraction())
        chi = ceil_frac(iv.upper_fraction())
        if clo == chi:
            return clo, b
        b *= 2
    raise PrecisionExhausted(f"integer ceiling unresolved below {_MAX_BITS} bits")


def _certify(dec, what: str):
    if dec is None:
        raise PrecisionExhausted(f"cannot verify at working precision: {what}")
    if dec is not True:
        raise ValueError(f"verified chain failed: {what}")


@dataclass
class Thm1Params:
    N: int
    d: int
    u: RealInterval
    t: RealInterval
    lam: RealInterval
    delta: RealInterval
    h: int
    x: Fraction
    delta_lower: Fraction
    chain: dict
    precision_bits: int

    def to_json(self) -> dict:
        return {
            "N": self.N, "d": self.d,
            "u": _iv_json(self.u), "t": _iv_json(self.t), "lambda": _iv_json(self.lam),
            "delta": _iv_json(self.delta), "delta_rational_lower": frac_str(self.delta_lower),
            "h": self.h, "x": frac_str(self.x),
            "chain": self.chain, "precision_bits": self.precision_bits,
        }


def _base_exprs(N: int, d: int, u_const: int):
    nd = Expr.rat(N * d)
    u = Expr.add(Expr.log2(nd), Expr.rat(u_const))
    t = Expr.add(Expr.log2(nd), Expr.mul(Expr.rat(4), Expr.log2(u)))
    tln2 = Expr.mul(t, Expr.ln(Expr.rat(2)))
    lam = Expr.log2(tln2)
    return u, t, tln2, lam


def theorem1_schedule(N: int, d: int, bits: int = DEFAULT_PRECISION):
    """delta = 1/(2 e N (log2(Nd) + 4 log2(log2(Nd) + 30))) plus the run schedule.

    Verifies h <= t - 2.9 and (1 + 1/(t ln 2))^2 h <= t before emitting.
    Returns (delta enclosure, Thm1Params, Schedule).
    """
    if N < 1 or d < 1:
        raise ValueError("N and d must be >= 1")
    u_e, t_e, tln2_e, lam_e = _base_exprs(N, d, 30)
    delta_e = Expr.div(Expr.rat(1),
                       Expr.mul(Expr.rat(2 * N), Expr.mul(Expr.exp(Expr.rat(1)), t_e)))
    h_e = Expr.log2(Expr.div(Expr.mul(Expr.rat(2 * d), Expr.mul(tln2_e, tln2_e)), delta_e))
    h, used_bits = _resolve_int_ceil(h_e, bits)
    u = eval_constant(u_e, used_bits)
    t = eval_constant(t_e, used_bits)
    tln2 = eval_constant(tln2_e, used_bits)
    lam = eval_constant(lam_e, used_bits)
    delta = eval_constant(delta_e, used_bits)

    _certify(decide_le(Fraction(h), t - Fraction(29, 10)), "h <= t - 2.9")
    cover = 1 / tln2 + 1
    _certify(decide_le(cover * cover * h, t), "(1 + 1/(t ln 2))^2 h <= t")
    x = Fraction(1, N * h)
    delta_lower = delta.lower_fraction()
    chain = {
        "h_le_t_minus_2.9": True,
        "cover_sq_h_le_t": True,
        "t_minus_2.9_lo": frac_str((t - Fraction(29, 10)).lower_fraction()),
    }
    params = Thm1Params(N, d, u, t, lam, delta, h, x, delta_lower, chain, used_bits)
    sched = Schedule(
        deltas=("const", delta_lower),
        lam=LambdaValues.from_pow2_interval("log2(t ln 2)", lam, tln2),
        xs=("const", x),
        m_rule=("window", N * h),
        descriptor={"source": "theorem1", "N": N, "d": d},
        precision_bits=used_bits,
    )
    return delta, params, sched


@dataclass
class Thm2Params:
    N: int
    d: int
    u: RealInterval
    t: RealInterval
    lam: RealInterval
    delta: RealInterval
    h: int
    eta: RealInterval
    delta_lower: Fraction
    sigma0_closed: RealInterval
    sigma_closed: RealInterval
    chain: dict
    precision_bits: int

    def to_json(self) -> dict:
        return {
            "N": self.N, "d": self.d,
            "u": _iv_json(self.u), "t": _iv_json(self.t), "lambda": _iv_json(self.lam),
            "delta": _iv_json(self.delta), "delta_rational_lower": frac_str(self.delta_lower),
            "h": self.h, "eta": _iv_json(self.eta),
            "sigma0_closed": _iv_json(self.sigma0_closed),
            "sigma_closed": _iv_json(self.sigma_closed),
            "chain": self.chain, "precision_bits": self.precision_bits,
        }


def theorem2_schedule(N: int, d: int, bits: int = DEFAULT_PRECISION, blocks: int = 8):
    """delta = 1/(8 N (log2(Nd) + 4 log2(log2(Nd) + 36))), block plan n_nu = N h nu.

    Verifies h < t - 2.94, 2 eta < 1 - 0.02/t, and 2^h >= 16 ln^2(2) N d t^3 > 100 t.
    Returns (delta, Thm2Params, Schedule, Prop2Schedule).
    """
    if N < 1 or d < 1:
        raise ValueError("N and d must be >= 1")
    u_e, t_e, tln2_e, lam_e = _base_exprs(N, d, 36)
    delta_e = Expr.div(Expr.rat(1), Expr.mul(Expr.rat(8 * N), t_e))
    h_e = Expr.log2(Expr.div(Expr.mul(Expr.rat(2 * d), Expr.mul(tln2_e, tln2_e)), delta_e))
    h, used_bits = _resolve_int_ceil(h_e, bits)
    u = eval_constant(u_e, used_bits)
    t = eval_constant(t_e, used_bits)
    tln2 = eval_constant(tln2_e, used_bits)
    lam = eval_constant(lam_e, used_bits)
    delta = eval_constant(delta_e, used_bits)

    cover = 1 / tln2 + 1
    eta = (cover * Fraction(1, 2)) * (RealInterval.from_fraction(h, used_bits) / t).sqrt()
    _certify(decide_lt(Fraction(h), t - Fraction(294, 100)), "h < t - 2.94")
    _certify(decide_lt(eta * 2, 1 - Fraction(2, 100) / t), "2 eta < 1 - 0.02/t")
    ln2 = RealInterval.ln2(used_bits)
    growth = ln2 * ln2 * (16 * N * d) * t * t * t
    _certify(decide_le(growth, pow2(h)), "2^h >= 16 ln^2(2) N d t^3")
    _certify(decide_lt(t * 100, growth), "16 ln^2(2) N d t^3 > 100 t")

    delta_lower = delta.lower_fraction()
    sigma0_closed = eta * eta / cover
    sigma_closed = eta * eta
    chain = {
        "h_lt_t_minus_2.94": True,
        "two_eta_lt_1_minus_0.02_over_t": True,
        "pow2h_ge_16ln2sq_Ndt3": True,
        "growth_gt_100t": True,
    }
    params = Thm2Params(N, d, u, t, lam, delta, h, eta, delta_lower,
                        sigma0_closed, sigma_closed, chain, used_bits)
    sched = Schedule(
        deltas=("const", delta_lower),
        lam=LambdaValues.from_pow2_interval("log2(t ln 2)", lam, tln2),
        xs=("const", Fraction(1, N * h)),
        m_rule=("window", N * h),
        descriptor={"source": "theorem2", "N": N, "d": d},
        precision_bits=used_bits,
    )
    p2 = Prop2Schedule(
        n_blocks=tuple(N * h * k for k in range(1, blocks + 1)),
        etas=("const", eta),
        descriptor={"source": "theorem2", "N": N, "d": d, "h": h},
    )
    return delta, params, sched, p2


# -- corollary families ---------------------------------------------------------


@dataclass
class FamilyHandles:
    """f (normalizing function) and g (checkpoint growth, the paper-level map
    usually written h; renamed to avoid the clash with Theorem 1's integer h).
    """

    kind: str
    params: dict
    f_eval: Callable[[Fraction, int], RealInterval]
    g_eval: Callable[[Fraction, int], RealInterval]
    c_upper: Callable[[int], Fraction]
    growth_check: Callable
    notes: str = ""

    def f(self, x, bits: int = DEFAULT_PRECISION) -> RealInterval:
        return self.f_eval(as_fraction(x), bits)

    def g_floor(self, x: int, bits: int = DEFAULT_PRECISION) -> int:
        """floor(g(x)) as a certified integer."""
        b = bits
        while b <= _MAX_BITS:
            iv = self.g_eval(as_fraction(x), b)
            flo = iv.lower_fraction().numerator // iv.lower_fraction().denominator
            fhi = iv.upper_fraction().numerator // iv.upper_fraction().denominator
            if flo == fhi:
                return flo
            b *= 2
        raise PrecisionExhausted(f"floor(g({x})) unresolved")

    def spot_check(self, grid, bits: int = 128) -> dict:
        """Monotonicity of f and g(x) >= x on sample points (caller's promise)."""
        ok = True
        prev = None
        for x in grid:
            fx = self.f(x, bits)
            gx = self.g_eval(as_fraction(x), bits)
            if gx.upper_fraction() < as_fraction(x):
                ok = False
            if prev is not None and fx.upper_fraction() < prev.lower_fraction():
                ok = False
            prev = fx
        return {"grid": [str(x) for x in grid], "monotone_and_dominating": ok}

    def describe(self) -> dict:
        return {"kind": self.kind, "params": {k: frac_str(as_fraction(v)) for k, v in self.params.items()},
                "notes": self.notes}


def _pow_iv(x: Fraction, expo: Fraction, bits: int) -> RealInterval:
    """x^expo for x >= 1 via exp(expo ln x), exact for integer exponents."""
    if expo.denominator == 1:
        e = int(expo)
        val = Fraction(x) ** e
        return RealInterval.from_fraction(val, bits)
    xv = RealInterval.from_fraction(x, bits)
    ev = RealInterval.from_fraction(expo, bits)
    return (xv.ln() * ev).exp()


def _ln1p_iv(x: Fraction, bits: int) -> RealInterval:
    return RealInterval.from_fraction(x + 1, bits).ln()


def corollary_family(kind: str, params: dict) -> FamilyHandles:
    """Built-in (f, g) families:

    cor1(beta, gamma): f = x^beta ln(x+1), g = x + c x^beta ln(x+1), c = 2/gamma
    cor2(gamma):       f = x ln(x+1),      g = x^Cexp, Cexp = 3/gamma + 1
    cor3(gamma, beta, beta1, A): alpha = ln(x+1) if beta1 = 0 else 1,
                       f = x^(1-beta+beta1) alpha(x), g = x + (C3+1) f, C3 = (2/(beta gamma))(3A+2)
    """
    params = {k: as_fraction(v) for k, v in params.items()}
    if kind == "cor1":
        beta, gamma = params["beta"], params["gamma"]
        if not (0 < beta < 1) or gamma <= 0:
            raise ValueError("cor1 requires beta in (0,1) and gamma > 0")
        c = 2 / gamma

        def f_eval(x, bits):
            return _pow_iv(x, beta, bits) * _ln1p_iv(x, bits)

        def g_eval(x, bits):
            return f_eval(x, bits) * c + x

        def c_upper(bits):
            # integral over [x, g(x)] of du/f(u) <= (g(x)-x)/f(x) = c, every x
            return c

        def growth_check(norm_fn, window):
            return _growth_min(norm_fn, window, lambda n, bits:
                               _pow_iv(Fraction(n), beta, bits))

        return FamilyHandles("cor1", params, f_eval, g_eval, c_upper, growth_check,
                             notes="C bound exact: (g-x)/f = c pointwise")
    if kind == "cor2":
        gamma = params["gamma"]
        if gamma <= 0:
            raise ValueError("cor2 requires gamma > 0")
        cexp = 3 / gamma + 1

        def f_eval(x, bits):
            return RealInterval.from_fraction(x, bits) * _ln1p_iv(x, bits)

        def g_eval(x, bits):
            return _pow_iv(x, cexp, bits)

        def c_upper(bits):
            # upper Riemann sums on padded grid cells over [1, 2], analytic
            # tail ln(ln g(x)/ln x) = ln(Cexp) for x >= 2 (ln(u+1) >= ln u)
            best = Fraction(0)
            grid = [1 + Fraction(i, 8) for i in range(0, 9)]
            for i in range(len(grid) - 1):
                xl, xr = grid[i], grid[i + 1]
                g_hi = g_eval(xr, bits).upper_fraction()
                if g_hi <= xl:
                    continue
                val = _upper_quadrature(f_eval, xl, g_hi, 128, bits)
                best = max(best, val)
            tail = RealInterval.from_fraction(cexp, bits).ln().upper_fraction()
            return max(best, tail)

        def growth_check(norm_fn, window):
            return _growth_min(norm_fn, window,
                               lambda n, bits: RealInterval.from_fraction(n, bits))

        return FamilyHandles("cor2", params, f_eval, g_eval, c_upper, growth_check,
                             notes="C = max(grid quadrature on [1,2], ln(Cexp) tail)")
    if kind == "cor3":
        gamma, beta = params["gamma"], params["beta"]
        beta1 = params.get("beta1", Fraction(0))
        big_a = params["A"]
        if not (0 <= beta1 < beta <= 1) or gamma <= 0:
            raise ValueError("cor3 requires 0 <= beta1 < beta <= 1 and gamma > 0")
        c3 = (2 / (beta * gamma)) * (3 * big_a + 2)
        expo = 1 - beta + beta1

        def f_eval(x, bits):
            base = _pow_iv(x, expo, bits)
            if beta1 == 0:
                return base * _ln1p_iv(x, bits)
            return base

        def g_eval(x, bits):
            return f_eval(x, bits) * (c3 + 1) + x

        def c_upper(bits):
            return c3 + 1

        def growth_check(norm_fn, window):
            # reports |ln R_n - gamma n^beta| / n^beta1-normalized deviation
            rows = []
            for n in window:
                rv = norm_fn(n)
                ln_r = RealInterval.from_fraction(rv, 256).ln()
                target = _pow_iv(Fraction(n), beta, 256) * gamma
                dev = ln_r - target
                rows.append({"n": n, "deviation_hi": float(dev.hi)})
            return {"rows": rows}

        return FamilyHandles("cor3", params, f_eval, g_eval, c_upper, growth_check,
                             notes="C bound exact: (g-x)/f = C3+1 pointwise")
    raise ValueError(f"unknown corollary family {kind!r}")


def _upper_quadrature(f_eval, lo: Fraction, hi: Fraction, pieces: int, bits: int) -> Fraction:
    """Upper bound of integral of 1/f over [lo, hi]: 1/f is non-increasing, so
    left-endpoint rectangles dominate."""
    total = Fraction(0)
    width = (hi - lo) / pieces
    for i in range(pieces):
        x = lo + i * width
        fx = f_eval(x, bits)
        total += width / fx.lower_fraction()
    return total


def _growth_min(norm_fn, window, weight):
    vals = []
    for n in window:
        r_n = norm_fn(n)
        r_n1 = norm_fn(n + 1)
        ratio_term = (r_n1 / r_n - 1)
        w = weight(n, 128)
        vals.append((ratio_term * w.lower_fraction(), n))
    lo_val, at = min(vals)
    return {"min_value_lower": frac_str(lo_val), "at_n": at,
            "positive": lo_val > 0, "window": [window[0], window[-1]]}


@dataclass
class Thm3Config:
    family: FamilyHandles
    n1: int
    C_upper: Fraction
    A_upper: Fraction
    horizon: int
    n_blocks: tuple
    feasibility: dict

    def to_json(self) -> dict:
        return {
            "family": self.family.describe(),
            "n1": self.n1,
            "C_upper": frac_str(self.C_upper),
            "A_upper": frac_str(self.A_upper),
            "horizon": self.horizon,
            "n_blocks": [str(b) for b in self.n_blocks],
            "feasibility": self.feasibility,
        }


def theorem3_schedule(family: FamilyHandles, seq: FormSequence, n1: Optional[int] = None, *,
                      horizon: int, norm_fn: Optional[Callable[[int], Fraction]] = None,
                      c_override=None, bits: int = DEFAULT_PRECISION,
                      n1_candidates=(2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64, 96, 128)):
    """Concrete block schedule for a sublacunary sequence.

    lambda = 0, eta_nu = 1/2, A = max(40 C f(n1)/n1, 9), and
    delta_n = (lower endpoint of) f(n1)/(A n1 f(n)) for every n; the n <= n1
    entries are raised from the flat 1/(A n1) to the same formula (non-
    increasing since f is non-decreasing), so the certified floor
    ||L_n|| f(n) >= f(n1)/(A n1) holds over the whole checked range.
    sigma_nu for nu >= 1 uses the integral bound 8 C f(n1)/(A n1) <= 1/5.

    Feasibility of n1 checks sigma_0 < 1/2 and the ratio condition
    R_{n_{nu+1}+1}/R_{n_nu} >= 2 d / delta_{n_nu} for every block whose norms
    are reachable (materialized sequence or norm oracle); the report names the
    checked window — the liminf hypotheses themselves are asymptotic and not
    finitely checkable.
    """
    if norm_fn is None:
        def norm_fn(n):
            nv = seq.norm_value(n)
            if nv.exact is None:
                raise ValueError("theorem3_schedule needs exact norms or a norm oracle")
            return nv.exact
    c_up = as_fraction(c_override) if c_override is not None else as_fraction(family.c_upper(bits))
    candidates = [n1] if n1 is not None else list(n1_candidates)
    tested = []
    last_error = None
    for cand in candidates:
        try:
            cfg, sched, p2 = _build_thm3(family, seq, cand, c_up, horizon, norm_fn, bits)
            cfg.feasibility["n1_tested"] = tested + [cand]
            return cfg, sched, p2
        except (ValueError, PrecisionExhausted) as exc:
            tested.append(cand)
            last_error = exc
    raise ValueError(f"no feasible n1 among {candidates}: last failure: {last_error}")


def _build_thm3(family: FamilyHandles, seq: FormSequence, n1: int, c_up: Fraction,
                horizon: int, norm_fn, bits: int):
    f_n1 = family.f(n1, bits)
    a_val = Fraction(40) * c_up * f_n1.upper_fraction() / n1
    a_up = max(a_val, Fraction(9))
    # delta_n = f(n1) / (A n1 f(n)), rounded down, forced non-increasing
    deltas = []
    running = None
    f_n1_lo = f_n1.lower_fraction()
    for n in range(1, horizon + 1):
        fn_hi = family.f(n, bits).upper_fraction()
        val = f_n1_lo / (a_up * n1 * fn_hi)
        if running is not None:
            val = min(val, running)
        running = val
        deltas.append(val)
    # blocks n_{nu+1} = floor(g(n_nu))
    blocks = [n1]
    while len(blocks) < 8:
        nxt = family.g_floor(blocks[-1], bits)
        if nxt <= blocks[-1]:
            raise ValueError(f"growth map stalls at {blocks[-1]}")
        blocks.append(nxt)
        if nxt > max(horizon, 10 ** 7):
            break
    sigma_bound = 8 * c_up * f_n1.upper_fraction() / (a_up * n1)
    if not sigma_bound <= Fraction(1, 5):
        raise ValueError(f"sigma bound {float(sigma_bound):.4f} > 1/5 at n1={n1}")
    sigma0 = 4 * sum((deltas[n - 1] for n in range(1, n1 + 1)), Fraction(0))
    if not sigma0 < Fraction(1, 2):
        raise ValueError(f"sigma_0 = {float(sigma0):.4f} not < eta_0 = 1/2 at n1={n1}")

    # ratio condition per reachable block: R_{n_{nu+1}+1}/R_{n_nu} >= 2 d / delta_{n_nu}
    d = seq.d
    checked = []
    for nu in range(1, len(blocks)):
        n_lo, n_hi = blocks[nu - 1], blocks[nu]
        try:
            r_hi = norm_fn(n_hi + 1)
            r_lo = norm_fn(n_lo)
        except (IndexError, ValueError):
            checked.append({"nu": nu, "status": "beyond-window"})
            continue
        delta_lo = deltas[n_lo - 1] if n_lo <= horizon else _delta_at(family, seq, n_lo, f_n1_lo, a_up, n1, bits)
        need = 2 * d / delta_lo
        ok = r_hi / r_lo >= need
        checked.append({"nu": nu, "status": "pass" if ok else "fail",
                        "ratio": frac_str(r_hi / r_lo), "required": frac_str(need)})
        if not ok:
            raise ValueError(f"ratio condition fails at block nu={nu} for n1={n1}")

    sched = Schedule(
        deltas=("list", tuple(deltas)),
        lam=LambdaValues.from_int(0),
        xs=None,
        m_rule=("default", None),
        descriptor={"source": "theorem3", "family": family.describe(), "n1": n1,
                    "A_upper": frac_str(a_up), "C_upper": frac_str(c_up)},
        precision_bits=bits,
    )
    usable_blocks = tuple(b for b in blocks if True)
    p2 = Prop2Schedule(
        n_blocks=usable_blocks,
        etas=("const", Fraction(1, 2)),
        sigma_upper={nu: sigma_bound for nu in range(1, len(usable_blocks) + 1)},
        descriptor={"source": "theorem3", "n1": n1},
    )
    feas = {
        "sigma0": frac_str(sigma0),
        "sigma_bound": frac_str(sigma_bound),
        "sigma_bound_le_one_fifth": True,
        "ratio_checks": checked,
        "floor": frac_str(f_n1_lo / (a_up * n1)),
        "growth": family.growth_check(norm_fn, list(range(1, min(horizon, 64)))),
        "window_note": "liminf hypotheses checked on the finite window only",
    }
    cfg = Thm3Config(family, n1, c_up, a_up, horizon, usable_blocks, feas)
    return cfg, sched, p2


def _delta_at(family, seq, n, f_n1_lo, a_up, n1, bits):
    fn_hi = family.f(n, bits).upper_fraction()
    return f_n1_lo / (a_up * n1 * fn_hi)


def khintchine_gamma_comparison(t_max_exp: int = 10, bits: int = DEFAULT_PRECISION) -> dict:
    """delta(t, 1) against the c/(t ln(t+1)) shape over t = 1, 2, 4, ..., 2^t_max_exp."""
    rows = []
    ratios = []
    prev_delta_hi = None
    monotone = True
    for k in range(0, t_max_exp + 1):
        t = 1 << k
        delta, params, _ = theorem1_schedule(t, 1, bits=128)
        lnt1 = RealInterval.from_fraction(t + 1, 128).ln()
        ratio = delta * t * lnt1
        rows.append({"t": t, "delta": delta.midpoint_float(),
                     "ratio": ratio.midpoint_float()})
        ratios.append(ratio)
        if prev_delta_hi is not None and not delta.upper_fraction() < prev_delta_hi:
            monotone = False
        prev_delta_hi = delta.lower_fraction()
    lo = min(r.lower_fraction() for r in ratios)
    hi = max(r.upper_fraction() for r in ratios)
    return {
        "rows": rows,
        "ratio_spread": float(hi / lo),
        "spread_below_4": hi < 4 * lo,
        "delta_strictly_decreasing": monotone,
    }
