"""Certificates: canonical-JSON transcripts and their re-verification.

A certificate records the resolved schedule, the conditional measure trace,
restriction events, the extracted point, and per-n margins.  Verification
recomputes every margin from scratch in exact arithmetic (rebuilding the run
sequence from the embedded spec and transform), re-derives every recorded
measure-trace inequality and schedule condition, and checks the point lies in
the final cube.  The CLI layer additionally enforces an integrity digest over
the canonical payload, so any single-field edit is detected.
"""

from __future__ import annotations

import json
from fractions import Fraction

from .. import __version__ as _version
from ..canonical import canonical_dumps, digest_of, sha256_hex
from ..forms import (
    FormSequence,
    affine_range,
    colinear_reduction,
    rescale,
    sequence_from_spec,
)
from ..measure import min_dist_over_range
from ..numerics import as_fraction, frac_str, pow2
from .cubes import DyadicCube, theta_strings
from .lineset import LineSet
from .prop1 import Prop1Result
from .prop2 import Prop2Result
from .schedule import LambdaValues, Prop2Schedule, Schedule, condition_report

FORMAT = "formsieve-certificate/1"


def _frac(x) -> str:
    return frac_str(as_fraction(x))


def _trace_rows(result: Prop1Result) -> list:
    rows = []
    for r in result.trace:
        rows.append({
            "n": r.n, "level": r.level, "region_level": r.region_level,
            "count": str(r.count), "measure": _frac(r.measure),
            "lower_bound": _frac(r.lower_bound), "removed": str(r.removed),
            "m": r.m, "hyp_lhs": _frac(r.hyp_lhs), "hyp_rhs": _frac(r.hyp_rhs),
            "prev_measure": _frac(r.prev_measure),
        })
    return rows


def _restriction_rows(result: Prop1Result) -> list:
    rows = []
    for ev in result.restrictions:
        rows.append({
            "before_n": ev.before_n,
            "old_region": {"level": ev.old_region[0], "coords": _coords_str(ev.old_region[1])},
            "new_region": {"level": ev.new_region[0], "coords": _coords_str(ev.new_region[1])},
            "measure_before": _frac(ev.measure_before),
            "measure_after": _frac(ev.measure_after),
        })
    return rows


def _coords_str(c):
    if isinstance(c, tuple):
        return [str(x) for x in c]
    return [str(c)]


def _extraction_json(ex: dict) -> dict:
    cube = ex["final_cube"]
    return {
        "theta": theta_strings(ex["theta"]),
        "theta_run": theta_strings(ex["theta_run"]),
        "final_cube": cube.to_json(),
        "checked_n_max": ex["checked_n_max"],
        "depth_bits": ex.get("depth_bits", cube.level),
    }


def _margin_rows(margins) -> list:
    return [{"n": n, "margin": _frac(m)} for n, m in margins]


def build_prop1_certificate(result: Prop1Result, config: dict | None = None) -> dict:
    seq_spec = result.seq_original.to_spec()
    cert = {
        "format": FORMAT,
        "tool": {"name": "formsieve", "version": _version},
        "mode": "prop1",
        "config": config,
        "sequence": {"digest": digest_of(seq_spec), "spec": seq_spec},
        "schedule": result.schedule.to_json(result.n_max),
        "transform": result.transform.to_json(),
        "run": {
            "n_max": result.n_max,
            "budget": result.budget,
            "representation": result.representation,
            "d_structural": result.d_struct,
            "levels": result.levels,
            "trace": _trace_rows(result),
            "restrictions": _restriction_rows(result),
            "violations": result.violations,
        },
        "extraction": _extraction_json(result.extraction),
        "margins": _margin_rows(result.extraction["margins"]),
        "prng": None,
    }
    return cert


def build_prop2_certificate(result: Prop2Result, config: dict | None = None) -> dict:
    seq_spec = result.seq_original.to_spec()
    nodes = []
    for nd in result.nodes:
        nodes.append({
            "id": nd.node_id, "depth": nd.depth,
            "cube_level": nd.cube_level, "cube_coord": str(nd.cube_abs),
            "a": str(nd.a_count), "g": str(nd.g_count),
            "counting_bound_hi": _frac(nd.bound_hi),
            "child_shift": nd.child_shift,
            "children_ids": nd.children_ids,
            "children_coords": nd.children_abs,
            "condition4_held": nd.condition4_held,
        })
    leaves = []
    for leaf in result.leaves:
        leaves.append({
            "node_id": leaf["node_id"], "depth": leaf["depth"],
            **_extraction_json(leaf),
            "margins": _margin_rows(leaf["margins"]),
            "min_margin": _frac(min(m for _, m in leaf["margins"])),
        })
    cert = {
        "format": FORMAT,
        "tool": {"name": "formsieve", "version": _version},
        "mode": "prop2",
        "config": config,
        "sequence": {"digest": digest_of(seq_spec), "spec": seq_spec},
        "schedule": result.schedule.to_json(result.n_limit),
        "p2": result.p2.to_json(),
        "transform": result.transform.to_json(),
        "run": {
            "nu_max_requested": result.nu_max_requested,
            "nu_max_effective": result.nu_max_effective,
            "n_limit": result.n_limit,
            "levels": result.levels,
            "root_trace": result.root_trace,
            "root_restriction": result.root_restriction,
            "partial_block": result.partial_block,
        },
        "conditions": result.conditions,
        "nodes": nodes,
        "leaves": leaves,
        "prng": None,
    }
    return cert


def with_integrity(cert: dict) -> dict:
    body = {k: v for k, v in cert.items() if k != "integrity"}
    out = dict(body)
    out["integrity"] = sha256_hex(canonical_dumps(body))
    return out


def integrity_ok(cert: dict) -> bool:
    if "integrity" not in cert:
        return False
    body = {k: v for k, v in cert.items() if k != "integrity"}
    return sha256_hex(canonical_dumps(body)) == cert["integrity"]


def serialize(cert: dict) -> str:
    return canonical_dumps(cert) + "\n"


def _parse_frac(s) -> Fraction:
    return as_fraction(s)


def _parse_theta(strings) -> list[Fraction]:
    out = []
    for s in strings:
        if "/2^" in s:
            num, expo = s.split("/2^")
            out.append(Fraction(int(num), 1 << int(expo)))
        else:
            out.append(as_fraction(s))
    return out


def _schedule_from_json(js: dict) -> Schedule:
    dd = js["delta"]
    deltas = (("const", _parse_frac(dd["value"])) if dd["kind"] == "constant"
              else ("list", tuple(_parse_frac(v) for v in dd["values"])))
    xd = js.get("x")
    xs = None
    if xd is not None:
        xs = (("const", _parse_frac(xd["value"])) if xd["kind"] == "constant"
              else ("list", tuple(_parse_frac(v) for v in xd["values"])))
    md = js["m"]
    if md["kind"] == "window":
        m_rule = ("window", md["window"])
    elif md["kind"] == "explicit":
        m_rule = ("explicit", tuple(md["values"]))
    else:
        m_rule = ("default", None)
    lj = js["lambda"]["lambda"]
    pj = js["lambda"]["pow2_lambda"]
    if "exact" in lj:
        lam_frac = _parse_frac(lj["exact"])
        if lam_frac.denominator != 1:
            raise ValueError("non-integer exact lambda in certificate")
        lam = LambdaValues.from_int(int(lam_frac))
    else:
        from ..numerics import RealInterval
        bits = js.get("precision_bits", 256)
        lam_iv = RealInterval.from_endpoints(_parse_frac(lj["lo"]), _parse_frac(lj["hi"]), bits)
        pow_iv = RealInterval.from_endpoints(_parse_frac(pj["lo"]), _parse_frac(pj["hi"]), bits)
        lam = LambdaValues.from_pow2_interval(js["lambda"]["desc"], lam_iv, pow_iv)
    return Schedule(deltas=deltas, lam=lam, xs=xs, m_rule=m_rule,
                    descriptor=js.get("source", {}), precision_bits=js.get("precision_bits", 256))


def _rebuild_run_sequence(cert: dict):
    """Original spec -> within -> reduction -> pow2 rescale, as recorded."""
    seq = sequence_from_spec(cert["sequence"]["spec"])
    tr = cert["transform"]
    offset = tr.get("index_offset", 0)
    if tr.get("within"):
        w = tr["within"]
        seq = rescale(seq, [_parse_frac(x) for x in w["v"]], _parse_frac(w["r"]))
        if offset:
            seq = FormSequence(forms=seq.forms[offset:], p=seq.p,
                               norms=seq.norms[offset:], spec=seq.spec)
    direction = tr.get("reduction_direction")
    if direction:
        red = colinear_reduction(seq)
        if red is None or list(red[1]) != list(direction):
            return None, "reduction direction does not match the sequence"
        seq = red[0]
    j = tr.get("rescale_pow2", 0)
    if j:
        seq = rescale(seq, [Fraction(0)] * seq.d, pow2(j))
    return seq, None


def _map_theta_to_run(theta, cert: dict):
    """Invert the recorded transform on a point; reduction maps via w = e.theta."""
    tr = cert["transform"]
    theta = [as_fraction(t) for t in theta]
    if tr.get("within"):
        w = tr["within"]
        r = _parse_frac(w["r"])
        v = [_parse_frac(x) for x in w["v"]]
        theta = [(t - vi) / r for vi, t in zip(v, theta)]
    direction = tr.get("reduction_direction")
    if direction:
        theta = [sum(as_fraction(e) * t for e, t in zip(direction, theta))]
    j = tr.get("rescale_pow2", 0)
    if j:
        theta = [t * pow2(-j) for t in theta]
    return theta


def verify_certificate(cert: dict, seq: FormSequence | dict | None = None):
    """Semantic re-verification; returns (ok, report rows).

    Margins are recomputed from scratch against the rebuilt run sequence; the
    recorded point must lie in the final cube (cube-wide minima make any such
    point certified); every trace inequality and schedule condition is
    re-derived exactly.
    """
    checks = []

    def check(name, ok, where=None, detail=None):
        checks.append({"check": name, "ok": bool(ok), "where": where, "detail": detail})
        return ok

    try:
        if seq is not None:
            spec = seq.to_spec() if isinstance(seq, FormSequence) else seq
            if not check("sequence-digest", digest_of(spec) == cert["sequence"]["digest"],
                         detail="digest mismatch: certificate belongs to a different sequence"):
                return False, checks
        run, err = _rebuild_run_sequence(cert)
        if run is None:
            check("transform-rebuild", False, detail=err)
            return False, checks
        sched = _schedule_from_json(cert["schedule"])
        if cert["mode"] == "prop1":
            ok = _verify_prop1(cert, run, sched, check)
        elif cert["mode"] == "prop2":
            ok = _verify_prop2(cert, run, sched, check)
        else:
            ok = check("mode", False, detail=f"unknown mode {cert['mode']!r}")
    except Exception as exc:  # malformed certificates must report, not crash
        check("parse", False, detail=f"{type(exc).__name__}: {exc}")
        return False, checks
    return ok and all(c["ok"] for c in checks), checks


def _final_cube(js: dict) -> DyadicCube:
    return DyadicCube(int(js["level"]), tuple(int(c) for c in js["coords"]))


def _verify_margins(cert, run, sched, check, extraction_js, margin_rows, offset):
    cube = _final_cube(extraction_js["final_cube"])
    ok = True
    stored = {row["n"]: _parse_frac(row["margin"]) for row in margin_rows}
    checked_max = extraction_js["checked_n_max"]
    for n_orig in sorted(stored):
        k = n_orig - offset
        if not 1 <= k <= len(run):
            ok = check("margin-index", False, where=n_orig, detail="margin index outside run")
            continue
        lo, hi = affine_range(run.form(k), cube)
        margin = min_dist_over_range(lo, hi) - sched.delta(k)
        if margin != stored[n_orig]:
            ok = check("margin-recompute", False, where=n_orig,
                       detail=f"stored {frac_str(stored[n_orig])}, recomputed {frac_str(margin)}")
        elif margin < 0:
            ok = check("margin-nonnegative", False, where=n_orig, detail=frac_str(margin))
    check("margins-recomputed", ok, detail=f"{len(stored)} margins, n <= {checked_max}")
    # the recorded point must lie in the final cube (cube-wide guarantee)
    theta = _parse_theta(extraction_js["theta"])
    theta_run = _map_theta_to_run(theta, cert)
    inside = cube.contains_point(theta_run)
    check("theta-in-final-cube", inside,
          detail="margins are cube-wide minima; any point of the cube is certified")
    return ok and inside


def _verify_prop1(cert, run, sched, check) -> bool:
    runj = cert["run"]
    n_max = runj["n_max"]
    d = runj["d_structural"]
    trace = runj["trace"]
    ok = True
    # schedule conditions re-derived
    rep = condition_report(run, sched, n_max, d=d)
    ok &= check("schedule-conditions", rep["all_pass"] or bool(runj.get("violations")),
                detail="conditions re-derived" if rep["all_pass"] else "recheck failed")
    # measure trace
    P = Fraction(1)
    prev_measure = Fraction(1)
    prev_region = 0
    restrictions = {r["before_n"]: r for r in runj.get("restrictions", [])}
    for row in trace:
        n = row["n"]
        xn = sched.x(n)
        P *= 1 - xn
        measure = _parse_frac(row["measure"])
        count = int(row["count"])
        lvl, s = row["level"], row["region_level"]
        if Fraction(count, 1 << (d * (lvl - s))) != measure:
            ok = check("trace-count-measure", False, where=n,
                       detail="measure != count * 2^(-d(l-s))")
        if _parse_frac(row["lower_bound"]) != P:
            ok = check("trace-lower-bound-product", False, where=n)
        if measure < P and not runj.get("violations"):
            ok = check("trace-measure-floor", False, where=n)
        rmeasure = _parse_frac(row["prev_measure"])
        if n in restrictions:
            ev = restrictions[n]
            if _parse_frac(ev["measure_after"]) < _parse_frac(ev["measure_before"]):
                ok = check("restriction-averaging", False, where=n)
        elif row["region_level"] == prev_region and rmeasure != prev_measure:
            ok = check("trace-chain", False, where=n,
                       detail="prev_measure does not chain to the previous row")
        if measure < (1 - xn) * rmeasure and not runj.get("violations"):
            ok = check("lemma1-conclusion", False, where=n)
        lhs, rhs = _parse_frac(row["hyp_lhs"]), _parse_frac(row["hyp_rhs"])
        if lhs > rhs and not runj.get("violations"):
            ok = check("lemma1-hypothesis", False, where=n)
        if rhs > sched.x(n) * sched.x_product(row["m"], n):
            ok = check("hypothesis-rhs-bound", False, where=n,
                       detail="recorded rhs exceeds x_n prod (1-x_k)")
        prev_measure = measure
        prev_region = row["region_level"]
    check("trace-verified", ok, detail=f"{len(trace)} rows")
    ok &= _verify_margins(cert, run, sched, check, cert["extraction"], cert["margins"],
                          cert["transform"].get("index_offset", 0))
    return ok


def _verify_prop2(cert, run, sched, check) -> bool:
    ok = True
    p2js = cert["p2"]
    etas_js = p2js["eta"]
    if etas_js["kind"] == "constant" and "exact" in etas_js["value"]:
        etas = ("const", _parse_frac(etas_js["value"]["exact"]))
    elif etas_js["kind"] == "constant":
        # use the recorded enclosure endpoints; sound for the re-checks below
        from ..numerics import RealInterval
        etas = ("const", RealInterval.from_endpoints(_parse_frac(etas_js["value"]["lo"]),
                                                     _parse_frac(etas_js["value"]["hi"]), 256))
    else:
        etas = ("list", tuple(_parse_frac(v.get("exact", v.get("lo"))) for v in etas_js["values"]))
    sigma_upper = {}
    for k, v in p2js.get("sigma_upper", {}).items():
        sigma_upper[int(k)] = _parse_frac(v.get("exact", v.get("hi")))
    p2 = Prop2Schedule(n_blocks=tuple(p2js["n_blocks"]), etas=etas, sigma_upper=sigma_upper)

    from ..numerics import decide_lt, hi_bound, lo_bound
    nodes = {nd["id"]: nd for nd in cert["nodes"]}
    for nd in cert["nodes"]:
        nu = nd["depth"] + 1
        a, g = int(nd["a"]), int(nd["g"])
        sigma_nu = p2.sigma(nu, sched)
        bound = (1 - sigma_nu / (p2.eta(nu) * (1 - p2.eta(nu - 1)))) * a
        if decide_lt(bound, Fraction(g)) is not True:
            ok = check("prop2-counting", False, where=nd["id"],
                       detail=f"g={g} does not certainly beat the bound (hi {float(hi_bound(bound)):.3f})")
        if g < 2 or len(nd["children_ids"]) not in (0, 2):
            ok = check("prop2-branching", False, where=nd["id"])
    depth_eff = cert["run"]["nu_max_effective"]
    leaves = cert["leaves"]
    expected_leaves = 1 if depth_eff == 0 else 2 ** depth_eff
    if len(leaves) != expected_leaves:
        ok = check("prop2-leaf-count", False,
                   detail=f"{len(leaves)} leaves, expected {expected_leaves}")
    # distinct prefixes
    prefixes = {tuple(leaf["final_cube"]["coords"]) + (leaf["final_cube"]["level"],) for leaf in leaves}
    if len(prefixes) != len(leaves):
        ok = check("prop2-distinct-prefixes", False)
    for leaf in leaves:
        ok &= _verify_margins(cert, run, sched, check, leaf, leaf["margins"],
                              cert["transform"].get("index_offset", 0))
        stored_min = _parse_frac(leaf["min_margin"])
        real_min = min(_parse_frac(m["margin"]) for m in leaf["margins"])
        if stored_min != real_min:
            ok = check("leaf-min-margin", False, where=leaf["node_id"])
    # root goodness from the recorded trace
    if cert["run"]["root_trace"]:
        last = cert["run"]["root_trace"][-1]
        mu = _parse_frac(last["measure"])
        eta0_lo = lo_bound(p2.eta(0))
        if not mu > 1 - eta0_lo:
            ok = check("good-0-cube", False, detail=frac_str(mu))
    if cert["run"].get("root_restriction"):
        rr = cert["run"]["root_restriction"]
        if _parse_frac(rr["measure_after"]) < _parse_frac(rr["measure_before"]):
            ok = check("root-restriction-averaging", False)
    check("prop2-verified", ok, detail=f"{len(nodes)} nodes, {len(leaves)} leaves")
    return ok
