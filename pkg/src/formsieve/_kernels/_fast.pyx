# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Semantics match formsieve._kernels.pure bit for bit;
int64/int128 fast paths are taken only when exactness is provable, otherwise
the loops fall back to Python-integer arithmetic."""

from array import array

from . import pure as _pure

KERNEL_NAME = "fast"

ctypedef long long i64
ctypedef unsigned long long u64
cdef extern from *:
    ctypedef long long int128 "__int128"

_I62 = 1 << 62


def eliminate_cubes(flat, int d, alphas, beta, D, W):
    cdef Py_ssize_t count = len(flat) // d
    cdef Py_ssize_t j, i, nkept = 0
    cdef i64[::1] f
    cdef i64[::1] out
    if count == 0:
        return array("q"), 0
    f = flat
    kept = array("q", bytes(8 * count * d))
    out = kept
    # clamp W: any W >= D+1 behaves identically to D+1
    Wc = W if W <= D else D + 1
    cdef bint small = D < _I62
    cdef i64 Ds, Ws, rho_s, acc_s
    cdef int128 acc128
    cdef i64 ar_s[64]
    cdef i64 beta_s
    removed_py = 0
    if small and d <= 64:
        Ds = D
        Ws = Wc
        beta_s = beta % D
        for i in range(d):
            ar_s[i] = alphas[i] % D
        for j in range(count):
            acc128 = beta_s
            for i in range(d):
                acc128 = acc128 + <int128> ar_s[i] * <int128> f[j * d + i]
                acc128 = acc128 % <int128> Ds
            rho_s = <i64> acc128
            if (Ds < Ws) if rho_s == 0 else (Ds - rho_s < Ws):
                removed_py += 1
            else:
                for i in range(d):
                    out[nkept * d + i] = f[j * d + i]
                nkept += 1
    else:
        ared = [a % D for a in alphas]
        beta_r = beta % D
        for j in range(count):
            acc = beta_r
            for i in range(d):
                acc += ared[i] * f[j * d + i]
            rho = acc % D
            if (D < Wc) if rho == 0 else (D - rho < Wc):
                removed_py += 1
            else:
                for i in range(d):
                    out[nkept * d + i] = f[j * d + i]
                nkept += 1
    return kept[: nkept * d], removed_py


def runs_subtract(runs, windows):
    cdef i64[::1] r
    cdef i64[::1] w
    cdef Py_ssize_t nr = len(runs) // 2
    cdef Py_ssize_t nw = len(windows) // 2
    if nr == 0:
        return array("q"), 0
    outa = array("q", bytes(8 * 2 * (nr + nw + 1)))
    cdef i64[::1] out = outa
    r = runs
    cdef Py_ssize_t wi = 0, wj, ri, no = 0
    cdef i64 lo, hi, cur, wlo, whi
    cdef i64 removed = 0
    if nw == 0:
        return array("q", runs), 0
    w = windows
    for ri in range(nr):
        lo = r[2 * ri]
        hi = r[2 * ri + 1]
        while wi < nw and w[2 * wi + 1] <= lo:
            wi += 1
        cur = lo
        wj = wi
        while wj < nw and w[2 * wj] < hi:
            wlo = w[2 * wj]
            whi = w[2 * wj + 1]
            if wlo > cur:
                out[2 * no] = cur
                out[2 * no + 1] = wlo
                no += 1
            if whi > cur:
                removed += (whi if whi < hi else hi) - (wlo if wlo > cur else cur)
                cur = whi
            if whi >= hi:
                break
            wj += 1
        if cur < hi:
            out[2 * no] = cur
            out[2 * no + 1] = hi
            no += 1
    return outa[: 2 * no], removed


def runs_intersect_len(a, b):
    cdef i64[::1] x
    cdef i64[::1] y
    cdef Py_ssize_t i = 0, j = 0, na = len(a) // 2, nb = len(b) // 2
    cdef i64 lo, hi, total = 0
    if na == 0 or nb == 0:
        return 0
    x = a
    y = b
    while i < na and j < nb:
        lo = x[2 * i] if x[2 * i] > y[2 * j] else y[2 * j]
        hi = x[2 * i + 1] if x[2 * i + 1] < y[2 * j + 1] else y[2 * j + 1]
        if lo < hi:
            total += hi - lo
        if x[2 * i + 1] <= y[2 * j + 1]:
            i += 1
        else:
            j += 1
    return total


def runs_block_counts(runs, int block_shift, Py_ssize_t n_blocks):
    counts = array("q", bytes(8 * n_blocks))
    cdef i64[::1] c = counts
    cdef i64[::1] r
    cdef Py_ssize_t ri, nr = len(runs) // 2
    cdef i64 lo, hi, b, block_end, seg
    if nr == 0:
        return counts
    r = runs
    for ri in range(nr):
        lo = r[2 * ri]
        hi = r[2 * ri + 1]
        b = lo >> block_shift
        while lo < hi:
            block_end = (b + 1) << block_shift
            seg = (hi if hi < block_end else block_end) - lo
            c[b] += seg
            lo += seg
            b += 1
    return counts


def floor_pair_windows(Py_ssize_t count, M, dq, dr, aq, ar, bq, br, span):
    # int64 q-lane requires both progressions to stay in range end to end
    lim = _I62
    if not (-lim < aq < lim and -lim < bq < lim and 0 <= dq < lim
            and -lim < aq + count * (dq + 1) < lim
            and -lim < bq + count * (dq + 1) < lim and span < lim):
        return _pure.floor_pair_windows(count, M, dq, dr, aq, ar, bq, br, span)
    outa = array("q", bytes(8 * 2 * (count + 1)))
    cdef i64[::1] out = outa
    cdef Py_ssize_t no = 0, j
    cdef i64 q_a = aq, q_b = bq, q_d = dq, sp = span
    cdef i64 lo, hi, cur_lo = 0, cur_hi = -1
    cdef bint have = False
    r_a = ar
    r_b = br
    r_d = dr
    Mo = M
    for j in range(count):
        lo = q_a
        hi = q_b + 1
        if lo < 0:
            lo = 0
        if hi > sp:
            hi = sp
        if lo < hi:
            if not have:
                cur_lo = lo
                cur_hi = hi
                have = True
            elif lo <= cur_hi:
                if hi > cur_hi:
                    cur_hi = hi
            else:
                out[2 * no] = cur_lo
                out[2 * no + 1] = cur_hi
                no += 1
                cur_lo = lo
                cur_hi = hi
        q_a += q_d
        r_a = r_a + r_d
        if r_a >= Mo:
            r_a = r_a - Mo
            q_a += 1
        q_b += q_d
        r_b = r_b + r_d
        if r_b >= Mo:
            r_b = r_b - Mo
            q_b += 1
    if have:
        out[2 * no] = cur_lo
        out[2 * no + 1] = cur_hi
        no += 1
    return outa[: 2 * no]
