"""Pure-Python kernels: the reference implementation of the hot loops.

Selected when the compiled extension is unavailable (or FORMSIEVE_PURE=1).
Must stay semantically identical to `_fast` — both operate on exact integers
and the engine requires bit-identical results from either.
"""

from __future__ import annotations

from array import array

KERNEL_NAME = "pure"


def eliminate_cubes(flat: array, d: int, alphas, beta: int, D: int, W: int):
    """Per-cube bad test over a flat coordinate array (len = count*d).

    A cube c is bad iff the open interval (A(c)/D, (A(c)+W)/D) contains an
    integer, with A(c) = sum(alphas[i]*c[i]) + beta.  Returns (kept coords,
    removed count).  All arithmetic exact (Python integers).
    """
    kept = array("q")
    removed = 0
    count = len(flat) // d
    for j in range(count):
        base = j * d
        acc = beta
        for i in range(d):
            acc += alphas[i] * flat[base + i]
        rho = acc % D
        if (D < W) if rho == 0 else (D - rho < W):
            removed += 1
        else:
            kept.extend(flat[base:base + d])
    return kept, removed


def runs_subtract(runs: array, windows: array):
    """Set difference of sorted disjoint half-open int runs minus windows.

    Returns (kept runs, total removed length).
    """
    out = array("q")
    removed = 0
    wn = len(windows) // 2
    wi = 0
    for ri in range(0, len(runs), 2):
        lo, hi = runs[ri], runs[ri + 1]
        while wi < wn and windows[2 * wi + 1] <= lo:
            wi += 1
        cur = lo
        wj = wi
        while wj < wn and windows[2 * wj] < hi:
            wlo, whi = windows[2 * wj], windows[2 * wj + 1]
            if wlo > cur:
                out.append(cur)
                out.append(wlo)
            if whi > cur:
                removed += min(whi, hi) - max(wlo, cur)
                cur = whi
            if whi >= hi:
                break
            wj += 1
        if cur < hi:
            out.append(cur)
            out.append(hi)
    return out, removed


def runs_intersect_len(a: array, b: array) -> int:
    """Total overlap length of two sorted disjoint run lists."""
    total = 0
    i = j = 0
    na, nb = len(a) // 2, len(b) // 2
    while i < na and j < nb:
        lo = max(a[2 * i], b[2 * j])
        hi = min(a[2 * i + 1], b[2 * j + 1])
        if lo < hi:
            total += hi - lo
        if a[2 * i + 1] <= b[2 * j + 1]:
            i += 1
        else:
            j += 1
    return total


def runs_block_counts(runs: array, block_shift: int, n_blocks: int) -> array:
    """Per-block contained lengths: block b spans [b<<shift, (b+1)<<shift)."""
    counts = array("q", bytes(8 * n_blocks))
    for ri in range(0, len(runs), 2):
        lo, hi = runs[ri], runs[ri + 1]
        b = lo >> block_shift
        while lo < hi:
            block_end = (b + 1) << block_shift
            seg = min(hi, block_end) - lo
            counts[b] += seg
            lo += seg
            b += 1
    return counts


def floor_pair_windows(count: int, M: int, dq: int, dr: int,
                       aq: int, ar: int, bq: int, br: int, span: int):
    """Emit merged bad-cube windows from two parallel floor progressions.

    Window j (j = 0..count-1) is [A_j, B_j + 1) clipped to [0, span], where
    A_j = floor(N_a(j)/M) and B_j = floor(N_b(j)/M) advance incrementally by
    (dq, dr) = divmod(step, M).  Inputs (aq, ar) and (bq, br) are the divmods
    of the first numerators.  Windows arrive sorted; overlapping or touching
    windows are merged.  Exact: remainders are full-precision integers.
    """
    out = array("q")
    cur_lo = cur_hi = None
    for _ in range(count):
        lo = aq
        hi = bq + 1
        if lo < 0:
            lo = 0
        if hi > span:
            hi = span
        if lo < hi:
            if cur_hi is None:
                cur_lo, cur_hi = lo, hi
            elif lo <= cur_hi:
                if hi > cur_hi:
                    cur_hi = hi
            else:
                out.append(cur_lo)
                out.append(cur_hi)
                cur_lo, cur_hi = lo, hi
        aq += dq
        ar += dr
        if ar >= M:
            ar -= M
            aq += 1
        bq += dq
        br += dr
        if br >= M:
            br -= M
            bq += 1
    if cur_hi is not None:
        out.append(cur_lo)
        out.append(cur_hi)
    return out
