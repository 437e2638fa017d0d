"""The elimination run for Proposition-1-style schedules.

Per step n the engine refines to level l_n, removes the cubes meeting the bad
set, and checks at runtime, in exact arithmetic:

  (i)   the schedule conditions at the chosen m(n),
  (ii)  the local-lemma hypothesis  mu(A_n ∩ B_m) <= x_n prod(1-x_k) mu(B_m),
  (iii) its conclusion              mu(B_n) >= (1-x_n) mu(B_{n-1}),
  (iv)  mu(B_n) >= prod_{k<=n}(1-x_k) > 0  and  B_n nonempty.

Measures are conditional on the tracked region; when the cube budget forces a
restriction, the engine keeps the best dyadic subcube at a level capped so
every later hypothesis check remains derivable (see caps computation), and
the averaging choice preserves the lower-bound invariant exactly.
"""

from __future__ import annotations

from array import array
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from ..forms import FormSequence, affine_range, colinear_reduction, lift_point, rescale
from ..measure import min_dist_over_range
from ..numerics import (
    as_fraction,
    decide_le,
    floor_log2,
    frac_str,
    guarded_ceil_log2,
    lo_bound,
    pow2,
)
from .cubes import DyadicCube, SurvivorSet
from .errors import BudgetExceeded, ConditionViolated, SurvivorsEmpty
from .lineset import LineSet
from .schedule import (
    Schedule,
    condition1_holds,
    condition2_holds,
    condition_report,
    conjugate_root,
    level_for,
)


@dataclass
class TraceRow:
    n: int
    level: int
    region_level: int
    count: int
    measure: Fraction          # conditional on the tracked region
    lower_bound: Fraction      # prod_{k<=n} (1 - x_k)
    removed: int
    m: int
    hyp_lhs: Fraction
    hyp_rhs: Fraction
    prev_measure: Fraction     # mu(B_{n-1}) in the same region


@dataclass
class Restriction:
    before_n: int
    old_region: tuple
    new_region: tuple
    measure_before: Fraction
    measure_after: Fraction


@dataclass
class Transform:
    """Composition original -> [within] -> [colinear reduction] -> [2^j rescale]."""

    within: Optional[dict] = None
    reduction: Optional[tuple[int, ...]] = None
    rescale_pow2: int = 0
    index_offset: int = 0      # construction step k certifies original n = k + offset

    def map_point_to_original(self, theta_run, d_original: int):
        theta = [as_fraction(t) for t in theta_run]
        if self.rescale_pow2:
            theta = [t * pow2(self.rescale_pow2) for t in theta]
        if self.reduction is not None:
            theta = list(lift_point(theta[0], self.reduction, d_original))
        if self.within is not None:
            r = as_fraction(self.within["r"])
            v = [as_fraction(x) for x in self.within["v"]]
            theta = [vi + r * t for vi, t in zip(v, theta)]
        return tuple(theta)

    def to_json(self) -> dict:
        return {
            "within": self.within,
            "reduction_direction": list(self.reduction) if self.reduction else None,
            "rescale_pow2": self.rescale_pow2,
            "index_offset": self.index_offset,
        }


@dataclass
class Prop1Result:
    seq_original: FormSequence
    seq_run: FormSequence
    schedule: Schedule
    n_max: int
    d_struct: int
    representation: str
    levels: list[int]
    transform: Transform
    budget: int
    trace: list[TraceRow] = field(default_factory=list)
    restrictions: list[Restriction] = field(default_factory=list)
    violations: list[dict] = field(default_factory=list)
    final_state: object = None
    extraction: dict | None = None

    def final_count(self) -> int:
        return self.trace[-1].count if self.trace else 1

    def margins(self):
        return self.extraction["margins"]


def _norm_lo(seq: FormSequence, n: int, bits: int) -> Fraction:
    nv = seq.norm_value(n)
    if nv.exact is not None:
        return nv.exact
    return nv.interval(bits).lower_fraction()


def prepare_run_sequence(seq: FormSequence, sched: Schedule):
    """Apply the colinear reduction and the power-of-two auto-rescale."""
    transform = Transform()
    run = seq
    if seq.d > 1:
        red = colinear_reduction(seq)
        if red is not None:
            run, direction = red
            transform.reduction = direction
    d_struct = run.d
    threshold = sched.lam.pow2_abs_lam * run.p.d_root(d_struct, sched.precision_bits)
    r1 = run.norm_value(1)
    r1_val = r1.exact if r1.exact is not None else r1.interval(sched.precision_bits)
    if decide_le(threshold, r1_val) is not True:
        j = guarded_ceil_log2(_ratio(threshold, r1_val, sched.precision_bits))
        if j > 0:
            run = rescale(run, [Fraction(0)] * d_struct, pow2(j))
            transform.rescale_pow2 = j
    return run, d_struct, transform


def _ratio(a, b, bits):
    from ..numerics import RealInterval
    av = a if not isinstance(a, Fraction) else RealInterval.from_fraction(a, bits)
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a / b
    bv = b if not isinstance(b, Fraction) else RealInterval.from_fraction(b, bits)
    return av / bv


def run_prop1(seq: FormSequence, sched: Schedule, n_max: int, *,
              budget: int = 1 << 24,
              representation: str = "auto",
              precheck: bool = True,
              on_violation: Optional[str] = None) -> Prop1Result:
    """Run the elimination for n = 1..n_max with runtime verification.

    Raises ConditionViolated (infeasible schedule or failed assertion with
    on_violation='raise'), SurvivorsEmpty (set died; carries violations), or
    BudgetExceeded (budget unreachable under the soundness cap).
    """
    if on_violation is None:
        on_violation = "raise" if precheck else "record"
    if sched.xs is None:
        raise ValueError("run_prop1 needs a schedule with x_n")
    sched.validate(n_max)
    run, d_struct, transform = prepare_run_sequence(seq, sched)
    if n_max > len(run):
        raise ValueError(f"n_max={n_max} exceeds sequence length {len(run)}")

    levels = [0] * (n_max + 1)
    for n in range(1, n_max + 1):
        l = level_for(run, n, sched, d_struct)
        levels[n] = max(l, levels[n - 1])
    ms = [0] * (n_max + 1)
    for n in range(1, n_max + 1):
        ms[n] = sched.m_of(n, run, d_struct)
        if not 0 <= ms[n] < n:
            raise ValueError(f"m({n}) = {ms[n]} outside {{0..{n - 1}}}")

    # caps[n]: max region level usable from step n on, keeping every later
    # hypothesis check derivable (l_m for m(n')>0; the m=0 side condition
    # 2^s <= 2^-lambda R_n' / d^(1/p) otherwise).
    droot_p = run.p.d_root(d_struct, sched.precision_bits)
    allowed = [0] * (n_max + 2)
    allowed[n_max + 1] = 1 << 30
    for n in range(1, n_max + 1):
        if ms[n] > 0:
            allowed[n] = levels[ms[n]]
        else:
            z = lo_bound(_ratio(sched.lam.pow2_neg_lam * _norm_lo(run, n, sched.precision_bits),
                                droot_p, sched.precision_bits))
            allowed[n] = floor_log2(z) if z >= 1 else 0
    caps = [0] * (n_max + 2)
    caps[n_max + 1] = 1 << 30
    for n in range(n_max, 0, -1):
        caps[n] = min(allowed[n], caps[n + 1])

    report = condition_report(run, sched, n_max, d=d_struct)
    if precheck:
        for row in report["prop1"]:
            for key in ("condition1", "condition2"):
                if row.get(key) is not True:
                    raise ConditionViolated(f"proposition-1 {key}", row.get("n"), row)

    if representation == "auto":
        if d_struct > 1:
            representation = "cubes"
        else:
            representation = "cubes" if (1 << levels[n_max]) <= min(budget, 1 << 20) else "lineset"
    if representation == "lineset" and d_struct != 1:
        raise ValueError("lineset representation requires a one-dimensional run")

    result = Prop1Result(seq, run, sched, n_max, d_struct, representation,
                         levels[1:], transform, budget)

    # prefix products prod_{k<=n}(1-x_k)
    P = [Fraction(1)] * (n_max + 1)
    for n in range(1, n_max + 1):
        P[n] = P[n - 1] * (1 - sched.x(n))
    min_future_m = [0] * (n_max + 2)
    min_future_m[n_max + 1] = n_max + 1
    for n in range(n_max, 0, -1):
        min_future_m[n] = min(ms[n], min_future_m[n + 1])

    if representation == "lineset":
        state = _LineState()
    else:
        state = _CubeState(d_struct)

    violations = result.violations

    def violated(kind, n, details):
        entry = {"assertion": kind, "n": n, **details}
        violations.append(entry)
        if on_violation == "raise":
            raise ConditionViolated(kind, n, details)

    for n in range(1, n_max + 1):
        form = run.form(n)
        delta_n = sched.delta(n)
        target = levels[n]
        # budget planning before refinement
        growth = d_struct * (target - state.level())
        projected = state.count() * (1 << growth)
        if projected > budget:
            ev = state.restrict(n, caps[n], budget, growth)
            if ev is not None:
                result.restrictions.append(ev)
                if ev.measure_after < ev.measure_before:
                    raise AssertionError("averaging restriction dropped the survivor fraction")
            if state.count() * (1 << growth) > budget:
                raise BudgetExceeded(
                    f"step n={n}: projected {state.count() * (1 << growth)} cubes exceed budget "
                    f"{budget} even at the deepest sound region level {caps[n]}"
                )
        state.refine(target)
        prev_measure = state.measure()
        m = ms[n]
        hyp_lhs, snap_measure = state.hypothesis_lhs(n, m, form, delta_n)
        removed = state.eliminate(form, delta_n)
        measure = state.measure()
        count = state.count()

        row_report = report["prop1"][n - 1] if n - 1 < len(report["prop1"]) else {}
        if row_report.get("condition1") is not True:
            violated("condition1", n, {"m": m, "report": row_report})
        if row_report.get("condition2") is not True:
            violated("condition2", n, {"m": m, "report": row_report})
        hyp_rhs = sched.x(n) * sched.x_product(m, n) * snap_measure
        if hyp_lhs > hyp_rhs:
            violated("lemma1-hypothesis", n,
                     {"lhs": frac_str(hyp_lhs), "rhs": frac_str(hyp_rhs), "m": m})
        if measure < (1 - sched.x(n)) * prev_measure:
            violated("lemma1-conclusion", n,
                     {"measure": frac_str(measure),
                      "floor": frac_str((1 - sched.x(n)) * prev_measure)})
        if measure < P[n]:
            violated("measure-lower-bound", n,
                     {"measure": frac_str(measure), "bound": frac_str(P[n])})
        if count == 0:
            raise SurvivorsEmpty(n, violations)

        state.store_snapshot(n, min_future_m[min(n + 1, n_max + 1)])
        result.trace.append(TraceRow(
            n=n, level=target, region_level=state.region_level(), count=count,
            measure=measure, lower_bound=P[n], removed=removed, m=m,
            hyp_lhs=hyp_lhs, hyp_rhs=hyp_rhs, prev_measure=prev_measure,
        ))

    result.final_state = state
    result.extraction = extract_point(result)
    return result


def extract_point(result: Prop1Result, depth_bits: Optional[int] = None) -> dict:
    """Descend to the lexicographically smallest surviving cube and certify it.

    theta is the cube center mapped back to the original coordinates; margins
    are min over the final CLOSED cube of ||L_n|| - delta_n, all exact.
    """
    state = result.final_state
    cube = state.smallest_cube()
    run = result.seq_run
    sched = result.schedule
    margins = []
    for n in range(1, result.n_max + 1):
        lo, hi = affine_range(run.form(n), cube)
        margin = min_dist_over_range(lo, hi) - sched.delta(n)
        margins.append((n + result.transform.index_offset, margin))
    theta_run = cube.center()
    theta = result.transform.map_point_to_original(theta_run, result.seq_original.d)
    return {
        "final_cube": cube,
        "theta_run": theta_run,
        "theta": theta,
        "margins": margins,
        "checked_n_max": result.n_max + result.transform.index_offset,
        "depth_bits": depth_bits if depth_bits is not None else cube.level,
    }


class _LineState:
    def __init__(self):
        self.set = LineSet.full_unit()
        self.snapshots: dict[int, LineSet] = {}

    def level(self):
        return self.set.level

    def region_level(self):
        return self.set.region_level

    def count(self):
        return self.set.count()

    def measure(self):
        return self.set.measure_in_region()

    def refine(self, to_level):
        self.set = self.set.refine(to_level)

    def eliminate(self, form, delta):
        removed, _ = self.set.eliminate(form, delta)
        return removed

    def hypothesis_lhs(self, n, m, form, delta):
        from .. import _kernels as kernels
        windows = self.set.bad_windows(form, delta)
        span = self.set.span
        if m == 0:
            lhs_len = _runs_total(windows)
            return Fraction(lhs_len, span), Fraction(1)
        snap = self.snapshots[m]
        snap_runs = snap.runs_in_frame(self.set.level, self.set.region_level,
                                       self.set.region_coord)
        lhs_len = kernels.runs_intersect_len(windows, snap_runs)
        return Fraction(lhs_len, span), Fraction(_runs_total(snap_runs), span)

    def restrict(self, n, cap, budget, growth):
        s_cur = self.set.region_level
        cap = min(cap, self.set.level)
        if cap <= s_cur:
            return None
        old_region = (s_cur, self.set.region_coord)
        before = self.set.measure_in_region()
        for s_new in range(s_cur + 1, cap + 1):
            candidate, _ = self.set.restrict_best(s_new)
            if candidate.count() * (1 << growth) <= budget // 2 or s_new == cap:
                self.set = candidate
                return Restriction(n, old_region, (s_new, candidate.region_coord),
                                   before, candidate.measure_in_region())
        return None

    def store_snapshot(self, n, min_needed):
        self.snapshots[n] = self.set.copy()
        for k in list(self.snapshots):
            if k < min_needed:
                del self.snapshots[k]

    def smallest_cube(self) -> DyadicCube:
        return DyadicCube(self.set.level, (self.set.first_cube_abs(),))


def _runs_total(runs):
    return sum(runs[i + 1] - runs[i] for i in range(0, len(runs), 2))


class _CubeState:
    def __init__(self, d):
        self.d = d
        self.set = SurvivorSet.unit(d)
        self.region = (0, (0,) * d)
        self.snapshots: dict[int, SurvivorSet] = {}

    def level(self):
        return self.set.level

    def region_level(self):
        return self.region[0]

    def count(self):
        return self.set.count

    def measure(self):
        s = self.region[0]
        return Fraction(self.set.count, 1 << (self.d * (self.set.level - s)))

    def refine(self, to_level):
        self.set = self.set.refine(to_level)

    def eliminate(self, form, delta):
        self.set, removed = self.set.eliminate(form, delta)
        return removed

    def hypothesis_lhs(self, n, m, form, delta):
        span_cubes = 1 << (self.d * (self.set.level - self.region[0]))
        if m == 0:
            base = _region_set(self.d, self.region)
        else:
            base = self.snapshots[m].restrict_to_prefix(*self.region)
        work = base.count << (self.d * (self.set.level - base.level))
        if work > 1 << 24:
            raise BudgetExceeded(f"hypothesis check at n={n} needs {work} cube tests")
        refined = base.refine(self.set.level)
        base_measure = Fraction(refined.count, span_cubes)
        _, removed = refined.eliminate(form, delta)
        return Fraction(removed, span_cubes), base_measure

    def restrict(self, n, cap, budget, growth):
        s_cur = self.region[0]
        cap = min(cap, self.set.level)
        if cap <= s_cur:
            return None
        before = self.measure()
        old_region = self.region
        for s_new in range(s_cur + 1, cap + 1):
            counts = self.set.prefix_counts(s_new)
            best_key = None
            best = -1
            for key in sorted(counts):
                if counts[key] > best:
                    best = counts[key]
                    best_key = key
            projected = best * (1 << growth)
            if projected <= budget // 2 or s_new == cap:
                self.set = self.set.restrict_to_prefix(s_new, best_key)
                self.region = (s_new, best_key)
                return Restriction(n, old_region, (s_new, best_key), before, self.measure())
        return None

    def store_snapshot(self, n, min_needed):
        self.snapshots[n] = SurvivorSet(self.set.level, self.d, self.set.flat[:])
        for k in list(self.snapshots):
            if k < min_needed:
                del self.snapshots[k]

    def smallest_cube(self) -> DyadicCube:
        return self.set.first_cube()


def _region_set(d, region):
    s, coords = region
    return SurvivorSet(s, d, array("q", list(coords)))
