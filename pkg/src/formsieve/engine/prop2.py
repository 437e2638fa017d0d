"""Block elimination with good-cube branching (continuum evidence).

A nu-cube is good when it retains more than (1 - eta_nu) of its measure in
the survivor set at the next checkpoint.  The run certifies, per tracked
node: the exact survivor-children count a, the exact certified-good count g,
the counting bound g > (1 - sigma_nu/(eta_nu (1 - eta_{nu-1}))) a, and at
least two good children, then recurses into the two smallest.  A depth-q
tree therefore witnesses >= 2^q distinct surviving dyadic prefixes.

The root block jump makes the children of [0,1] unenumerable at Theorem-2
scales; after the global good-0-cube check the engine restricts to the best
dyadic subcube K at a level where the covering bound still applies for every
later step (side condition checked), and runs the same counting argument
locally in K.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from ..forms import FormSequence, affine_range
from ..measure import min_dist_over_range
from ..numerics import (
    PrecisionExhausted,
    decide_le,
    decide_lt,
    floor_log2,
    frac_str,
    hi_bound,
    lo_bound,
)
from .cubes import DyadicCube
from .errors import BranchingAbsent, BudgetExceeded, ConditionViolated
from .lineset import LineSet
from .prop1 import Transform, prepare_run_sequence
from .schedule import Prop2Schedule, Schedule, condition_report, level_for


@dataclass
class Prop2Node:
    node_id: int
    depth: int                 # children of this node are (depth+1)-cubes
    cube_level: int
    cube_abs: int
    a_count: int
    g_count: int
    bound_hi: Fraction
    good_threshold_num: int    # child good iff child_count > threshold_num / 2^shift scale
    child_shift: int
    children_ids: list = field(default_factory=list)
    children_abs: list = field(default_factory=list)
    condition4_held: Optional[bool] = None


@dataclass
class Prop2Result:
    seq_original: FormSequence
    seq_run: FormSequence
    schedule: Schedule
    p2: Prop2Schedule
    transform: Transform
    nu_max_requested: int
    nu_max_effective: int
    n_limit: int
    levels: list
    conditions: dict
    root_trace: list = field(default_factory=list)
    root_restriction: Optional[dict] = None
    nodes: list = field(default_factory=list)
    leaves: list = field(default_factory=list)
    partial_block: Optional[dict] = None

    def leaf_count(self) -> int:
        return len(self.leaves)


def _run_block(state: LineSet, run: FormSequence, sched: Schedule, levels,
               n_from: int, n_to: int, trace: Optional[list] = None,
               pair_budget: int = 1 << 26):
    for n in range(n_from, n_to + 1):
        state = state.refine(max(levels[n], state.level))
        state.eliminate(run.form(n), sched.delta(n))
        if state.run_pairs() > pair_budget:
            raise BudgetExceeded(f"run-pair memory {state.run_pairs()} exceeds budget at n={n}")
        if trace is not None:
            trace.append({"n": n, "level": state.level, "count": str(state.count()),
                          "measure": frac_str(state.measure_in_region())})
    return state


def run_prop2(seq: FormSequence, sched: Schedule, p2: Prop2Schedule, nu_max: int, *,
              n_cap: Optional[int] = None,
              budget: int = 1 << 24,
              norm_fn=None) -> Prop2Result:
    """Build the good-cube tree to depth nu_max (or as deep as data allows).

    With n_cap set, elimination continues past the last complete block inside
    the current region (partial block: margins only, no goodness claims).
    """
    run, d_struct, transform = prepare_run_sequence(seq, sched)
    if d_struct != 1:
        raise ValueError("the block engine needs a one-dimensional or colinear-reducible sequence")
    n_limit = min(n_cap if n_cap is not None else len(run), len(run))
    if p2.max_nu < 1 or p2.n_of(1) > n_limit:
        raise ValueError("first block end n_1 exceeds the available sequence")

    nu_eff = 0
    for cand in range(1, nu_max + 1):
        if cand + 1 <= p2.max_nu and p2.n_of(cand + 1) <= n_limit:
            nu_eff = cand
        else:
            break

    levels = [0] * (n_limit + 1)
    for n in range(1, n_limit + 1):
        levels[n] = max(level_for(run, n, sched, 1), levels[n - 1])

    conditions = condition_report(run, sched, 0, d=1, p2=p2, norm_fn=norm_fn)
    for row in conditions["prop2"]:
        nu = row.get("nu", 0)
        if nu <= nu_eff:
            for key in ("condition1", "condition2", "condition3"):
                if key in row and row[key] is not True:
                    raise ConditionViolated(f"proposition-2 {key}", nu, row)

    # strengthened root condition (1 + d^{1/p}/R_1) sigma_0 < eta_0
    sigma0 = p2.sigma(0, sched)
    droot_p = run.p.d_root(1, sched.precision_bits)
    r1 = run.norm_value(1)
    r1v = r1.exact if r1.exact is not None else r1.interval(sched.precision_bits)
    if isinstance(droot_p, Fraction) and isinstance(r1v, Fraction):
        lhs = (1 + droot_p / r1v) * sigma0
    else:
        lhs = (droot_p / r1v + 1) * sigma0
    if decide_lt(lhs, p2.eta(0)) is not True:
        raise ConditionViolated("prop2-root-margin", 0,
                                {"lhs_hi": frac_str(hi_bound(lhs)),
                                 "eta0_lo": frac_str(lo_bound(p2.eta(0)))})

    result = Prop2Result(seq, run, sched, p2, transform, nu_max, nu_eff, n_limit,
                         levels[1:], conditions)

    n1 = p2.n_of(1)
    state = _run_block(LineSet.full_unit(), run, sched, levels, 1, n1,
                       trace=result.root_trace, pair_budget=budget)
    mu_b_n1 = state.measure_in_region()
    eta0_lo = lo_bound(p2.eta(0))
    if not mu_b_n1 > 1 - eta0_lo:
        raise ConditionViolated("good-0-cube", 0,
                                {"measure": frac_str(mu_b_n1), "threshold": frac_str(1 - eta0_lo)})

    node_counter = [0]

    def next_id():
        node_counter[0] += 1
        return node_counter[0] - 1

    if nu_eff >= 1:
        # restrict the root so children are enumerable and the covering bound
        # still derives for every n > n_1 (side condition on the region side)
        l1, l2 = levels[n1], levels[p2.n_of(2)]
        s_root = max(0, 2 * l1 - l2)
        side_cap = _side_cap(run, sched, n1 + 1)
        s_root = min(s_root, side_cap, l1)
        if l1 - s_root > 26:
            raise BudgetExceeded(f"root children would need 2^{l1 - s_root} enumeration")
        if s_root > 0:
            restricted, info = state.restrict_best(s_root)
            if restricted.measure_in_region() < mu_b_n1:
                raise AssertionError("root restriction dropped the survivor fraction")
            result.root_restriction = {
                "region_level": s_root,
                "region_coord": str(restricted.region_coord),
                "measure_before": frac_str(mu_b_n1),
                "measure_after": frac_str(restricted.measure_in_region()),
                "side_cap": side_cap,
            }
            state = restricted
        _process_node(result, run, sched, p2, levels, state, depth=0,
                      node_id=next_id(), next_id=next_id, budget=budget, norm_fn=norm_fn)
    else:
        # no complete second checkpoint: optionally continue a partial block
        if n_limit > n1:
            state = _run_block(state, run, sched, levels, n1 + 1, n_limit,
                               pair_budget=budget)
            result.partial_block = {"from_n": n1 + 1, "to_n": n_limit,
                                    "count": str(state.count()),
                                    "measure": frac_str(state.measure_in_region())}
        leaf = _extract_leaf(result, state, node_id=next_id(), depth=0,
                             checked_n_max=n_limit)
        result.leaves.append(leaf)
    return result


def _side_cap(run: FormSequence, sched: Schedule, n: int) -> int:
    """Largest region level s with d^{1/p} 2^s <= 2^-lambda R_n (certain)."""
    droot = run.p.d_root(run.d, sched.precision_bits)
    nv = run.norm_value(n)
    rv = nv.exact if nv.exact is not None else nv.interval(sched.precision_bits)
    if isinstance(droot, Fraction) and isinstance(rv, Fraction) and isinstance(sched.lam.pow2_neg_lam, Fraction):
        z = sched.lam.pow2_neg_lam * rv / droot
        return floor_log2(z) if z >= 1 else 0
    z = sched.lam.pow2_neg_lam * rv / droot
    zlo = lo_bound(z)
    return floor_log2(zlo) if zlo >= 1 else 0


def _process_node(result: Prop2Result, run, sched, p2, levels, state: LineSet,
                  depth: int, node_id: int, next_id, budget: int, norm_fn):
    """state = B_{n_{depth+1}} ∩ node at level l_{n_{depth+1}} (node = region)."""
    nu = depth + 1                      # children are nu-cubes
    n_lo = p2.n_of(nu)                  # children live at level l_{n_lo}
    n_hi = p2.n_of(nu + 1)
    l_child = levels[n_lo]
    if state.level != l_child:
        raise AssertionError("node state not at the children level")
    a_count = state.count()
    basis = state.copy()

    final = _run_block(state.copy(), run, sched, levels, n_lo + 1, n_hi,
                       pair_budget=budget)
    child_shift = final.level - l_child
    n_children = 1 << (l_child - state.region_level)
    if n_children > 1 << 26:
        raise BudgetExceeded(f"node has 2^{l_child - state.region_level} candidate children")
    from .. import _kernels as kernels
    counts = kernels.runs_block_counts(final.runs, child_shift, n_children)

    eta_nu_lo = lo_bound(p2.eta(nu))
    # child good iff count/2^shift > 1 - eta_nu; certain form uses eta's lower end
    thr = (1 - eta_nu_lo) * (1 << child_shift)
    thr_num, thr_den = thr.numerator, thr.denominator
    good_idx = [i for i in range(n_children) if counts[i] * thr_den > thr_num]
    g_count = len(good_idx)

    sigma_nu = p2.sigma(nu, sched)
    eta_prev = p2.eta(nu - 1)
    bound = (1 - sigma_nu / (p2.eta(nu) * (1 - eta_prev))) * a_count
    dec = decide_lt(bound, Fraction(g_count))
    if dec is None:
        raise PrecisionExhausted(f"counting bound undecidable at node {node_id}")
    if dec is not True:
        raise ConditionViolated("prop2-counting", nu,
                                {"a": a_count, "g": g_count,
                                 "bound_hi": frac_str(hi_bound(bound))})
    cond4 = None
    for row in result.conditions["prop2"]:
        if row.get("nu") == depth and "condition4" in row:
            cond4 = row["condition4"] is True
    if g_count < 2:
        raise BranchingAbsent(
            f"node {node_id} (depth {depth}) has g={g_count} good children "
            f"(condition 4 at nu={depth}: {cond4})"
        )
    chosen = good_idx[:2]
    node = Prop2Node(node_id=node_id, depth=depth, cube_level=state.region_level,
                     cube_abs=state.region_coord, a_count=a_count, g_count=g_count,
                     bound_hi=hi_bound(bound), good_threshold_num=thr_num,
                     child_shift=child_shift, condition4_held=cond4)
    result.nodes.append(node)

    region_start_children = state.region_coord << (l_child - state.region_level)
    for idx in chosen:
        child_abs = region_start_children + idx
        child_runs = _clip_rebase(final, idx, child_shift)
        child_state = LineSet(final.level, l_child, child_abs, child_runs)
        cid = next_id()
        node.children_ids.append(cid)
        node.children_abs.append(str(child_abs))
        if depth + 1 == result.nu_max_effective:
            leaf = _extract_leaf(result, child_state, node_id=cid, depth=depth + 1,
                                 checked_n_max=n_hi)
            result.leaves.append(leaf)
        else:
            _process_node(result, run, sched, p2, levels, child_state,
                          depth=depth + 1, node_id=cid, next_id=next_id,
                          budget=budget, norm_fn=norm_fn)
    del basis


def _clip_rebase(final: LineSet, child_idx: int, child_shift: int):
    from array import array
    base = child_idx << child_shift
    top = base + (1 << child_shift)
    out = array("q")
    runs = final.runs
    for i in range(0, len(runs), 2):
        lo = max(runs[i], base)
        hi = min(runs[i + 1], top)
        if lo < hi:
            out.append(lo - base)
            out.append(hi - base)
    return out


def _extract_leaf(result: Prop2Result, state: LineSet, node_id: int, depth: int,
                  checked_n_max: int) -> dict:
    cube = DyadicCube(state.level, (state.first_cube_abs(),))
    run = result.seq_run
    sched = result.schedule
    margins = []
    for n in range(1, checked_n_max + 1):
        lo, hi = affine_range(run.form(n), cube)
        margins.append((n + result.transform.index_offset,
                        min_dist_over_range(lo, hi) - sched.delta(n)))
    theta_run = cube.center()
    theta = result.transform.map_point_to_original(theta_run, result.seq_original.d)
    return {
        "node_id": node_id,
        "depth": depth,
        "final_cube": cube,
        "theta_run": theta_run,
        "theta": theta,
        "margins": margins,
        "checked_n_max": checked_n_max + result.transform.index_offset,
    }
