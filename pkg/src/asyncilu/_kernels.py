"""Numba kernels shared by the factorization and triangular-solve modules.

All hot kernels are compiled with ``nogil=True`` so worker threads genuinely
overlap while operating on the same arrays.  Every slot write stores a fully
computed local value with a single aligned 8-byte store, which is what the
whole-value write contract of the sweep executor requires.  Reads of slots
owned by other work items may observe stale values; that is intentional.
"""

import numpy as np
from numba import njit

# A pivot is declared singular when |pivot| < PIVOT_RTOL * (1 + max|entry|).
PIVOT_RTOL = 1e-30


@njit(cache=True, nogil=True)
def max_abs(block):
    m = 0.0
    for k in range(block.shape[0]):
        for l in range(block.shape[1]):
            v = abs(block[k, l])
            if v > m:
                m = v
    return m


@njit(cache=True, nogil=True)
def invert_block(src, out):
    """Gauss-Jordan inverse with partial pivoting; False when singular."""
    b = src.shape[0]
    work = np.empty((b, 2 * b))
    for k in range(b):
        for l in range(b):
            work[k, l] = src[k, l]
            work[k, b + l] = 0.0
        work[k, b + k] = 1.0
    tol = PIVOT_RTOL * (1.0 + max_abs(src))
    for k in range(b):
        piv_row = k
        piv_mag = abs(work[k, k])
        for r in range(k + 1, b):
            mag = abs(work[r, k])
            if mag > piv_mag:
                piv_mag = mag
                piv_row = r
        if piv_mag < tol:
            return False
        if piv_row != k:
            for l in range(2 * b):
                tmp = work[k, l]
                work[k, l] = work[piv_row, l]
                work[piv_row, l] = tmp
        inv_piv = 1.0 / work[k, k]
        for l in range(2 * b):
            work[k, l] *= inv_piv
        for r in range(b):
            if r != k:
                f = work[r, k]
                if f != 0.0:
                    for l in range(2 * b):
                        work[r, l] -= f * work[k, l]
    for k in range(b):
        for l in range(b):
            out[k, l] = work[k, b + l]
    return True


@njit(cache=True, nogil=True)
def matmul_sub(acc, x, y):
    # acc -= x @ y
    b = acc.shape[0]
    for k in range(b):
        for l in range(b):
            s = 0.0
            for t in range(b):
                s += x[k, t] * y[t, l]
            acc[k, l] -= s


@njit(cache=True, nogil=True)
def matmul(out, x, y):
    b = out.shape[0]
    for k in range(b):
        for l in range(b):
            s = 0.0
            for t in range(b):
                s += x[k, t] * y[t, l]
            out[k, l] = s


@njit(cache=True, nogil=True)
def find_col(col_idx, lo, hi, j):
    while lo < hi:
        mid = (lo + hi) >> 1
        c = col_idx[mid]
        if c == j:
            return mid
        if c < j:
            lo = mid + 1
        else:
            hi = mid
    return -1


@njit(cache=True, nogil=True)
def write_substitute(block, scale):
    b = block.shape[0]
    for k in range(b):
        for l in range(b):
            block[k, l] = scale if k == l else 0.0


@njit(cache=True, nogil=True)
def ilu_update_rows(row_ptr, col_idx, a_vals, f_vals, udinv, guard_scale,
                    guard_counts, row_start, row_stop, guard):
    """Recompute all factor blocks of rows [row_start, row_stop) in place.

    Row-major, left-to-right evaluation against the live shared arrays.
    Returns -1, or the offending row when ``guard`` is off and a diagonal
    block is singular.
    """
    b = a_vals.shape[1]
    acc = np.empty((b, b))
    res = np.empty((b, b))
    inv = np.empty((b, b))
    for i in range(row_start, row_stop):
        beg = row_ptr[i]
        end = row_ptr[i + 1]
        for p in range(beg, end):
            j = col_idx[p]
            kmax = i if i < j else j
            for k in range(b):
                for l in range(b):
                    acc[k, l] = a_vals[p, k, l]
            q = beg
            while q < end and col_idx[q] < kmax:
                kk = col_idx[q]
                pos = find_col(col_idx, row_ptr[kk], row_ptr[kk + 1], j)
                if pos >= 0:
                    matmul_sub(acc, f_vals[q], f_vals[pos])
                q += 1
            if i > j:
                matmul(res, acc, udinv[j])
                for k in range(b):
                    for l in range(b):
                        f_vals[p, k, l] = res[k, l]
            else:
                for k in range(b):
                    for l in range(b):
                        f_vals[p, k, l] = acc[k, l]
                if j == i:
                    ok = invert_block(f_vals[p], inv)
                    if not ok:
                        if not guard:
                            return i
                        write_substitute(f_vals[p], guard_scale[i])
                        invert_block(f_vals[p], inv)
                        guard_counts[i] += 1
                    for k in range(b):
                        for l in range(b):
                            udinv[i, k, l] = inv[k, l]
    return -1


@njit(cache=True, nogil=True)
def refresh_diag_inverses(f_vals, diag_pos, guard_scale, udinv, guard):
    """Recompute cached diagonal-block inverses, substituting when allowed.

    Returns the substitution count, or -(row+1) in strict mode on a
    singular diagonal.  Substitutes are written back into ``f_vals``.
    """
    n = diag_pos.shape[0]
    b = f_vals.shape[1]
    inv = np.empty((b, b))
    count = 0
    for i in range(n):
        p = diag_pos[i]
        ok = invert_block(f_vals[p], inv)
        if not ok:
            if not guard:
                return -(i + 1)
            write_substitute(f_vals[p], guard_scale[i])
            invert_block(f_vals[p], inv)
            count += 1
        for k in range(b):
            for l in range(b):
                udinv[i, k, l] = inv[k, l]
    return count


@njit(cache=True, nogil=True)
def ilu_jacobi_step(row_ptr, col_idx, a_vals, old_f, old_udinv, new_f):
    """One synchronized fixed-point evaluation: new_f becomes the update map
    applied to old_f.  Diagonal inverses of the old iterate are supplied by
    the caller (guarded there, so this never breaks down)."""
    n = row_ptr.shape[0] - 1
    b = a_vals.shape[1]
    acc = np.empty((b, b))
    res = np.empty((b, b))
    for i in range(n):
        beg = row_ptr[i]
        end = row_ptr[i + 1]
        for p in range(beg, end):
            j = col_idx[p]
            kmax = i if i < j else j
            for k in range(b):
                for l in range(b):
                    acc[k, l] = a_vals[p, k, l]
            q = beg
            while q < end and col_idx[q] < kmax:
                kk = col_idx[q]
                pos = find_col(col_idx, row_ptr[kk], row_ptr[kk + 1], j)
                if pos >= 0:
                    matmul_sub(acc, old_f[q], old_f[pos])
                q += 1
            if i > j:
                matmul(res, acc, old_udinv[j])
                for k in range(b):
                    for l in range(b):
                        new_f[p, k, l] = res[k, l]
            else:
                for k in range(b):
                    for l in range(b):
                        new_f[p, k, l] = acc[k, l]


@njit(cache=True, nogil=True)
def ilu_chunk_jacobi_sweep(row_ptr, col_idx, a_vals, old_f, new_f,
                           old_udinv, new_udinv, guard_scale, guard_counts,
                           chunk_rows):
    """One sweep of the worst-case chunked execution model: rows read
    current-sweep values from their own chunk (processed in order) and
    previous-sweep values from every other chunk."""
    n = row_ptr.shape[0] - 1
    b = a_vals.shape[1]
    acc = np.empty((b, b))
    res = np.empty((b, b))
    inv = np.empty((b, b))
    for i in range(n):
        chunk_lo = (i // chunk_rows) * chunk_rows
        beg = row_ptr[i]
        end = row_ptr[i + 1]
        for p in range(beg, end):
            j = col_idx[p]
            kmax = i if i < j else j
            for k in range(b):
                for l in range(b):
                    acc[k, l] = a_vals[p, k, l]
            q = beg
            while q < end and col_idx[q] < kmax:
                kk = col_idx[q]
                pos = find_col(col_idx, row_ptr[kk], row_ptr[kk + 1], j)
                if pos >= 0:
                    # L_ik lives in this row: always fresh. U_kj is fresh only
                    # when row kk belongs to the same chunk.
                    if kk >= chunk_lo:
                        matmul_sub(acc, new_f[q], new_f[pos])
                    else:
                        matmul_sub(acc, new_f[q], old_f[pos])
                q += 1
            if i > j:
                if j >= chunk_lo:
                    matmul(res, acc, new_udinv[j])
                else:
                    matmul(res, acc, old_udinv[j])
                for k in range(b):
                    for l in range(b):
                        new_f[p, k, l] = res[k, l]
            else:
                for k in range(b):
                    for l in range(b):
                        new_f[p, k, l] = acc[k, l]
                if j == i:
                    ok = invert_block(new_f[p], inv)
                    if not ok:
                        write_substitute(new_f[p], guard_scale[i])
                        invert_block(new_f[p], inv)
                        guard_counts[i] += 1
                    for k in range(b):
                        for l in range(b):
                            new_udinv[i, k, l] = inv[k, l]


@njit(cache=True, nogil=True)
def trisolve_update_rows(row_ptr, col_idx, f_vals, udinv, x, rhs,
                         item_start, item_stop, forward):
    """Relax block rows of a triangular system against the live solution.

    Items map to rows in ascending order for the forward (unit lower) solve
    and in descending order for the backward (upper) solve.
    """
    n = row_ptr.shape[0] - 1
    b = f_vals.shape[1]
    acc = np.empty(b)
    res = np.empty(b)
    for it in range(item_start, item_stop):
        i = it if forward else n - 1 - it
        for k in range(b):
            acc[k] = rhs[i * b + k]
        for p in range(row_ptr[i], row_ptr[i + 1]):
            j = col_idx[p]
            use = (j < i) if forward else (j > i)
            if use:
                for k in range(b):
                    s = 0.0
                    for l in range(b):
                        s += f_vals[p, k, l] * x[j * b + l]
                    acc[k] -= s
        if forward:
            for k in range(b):
                x[i * b + k] = acc[k]
        else:
            for k in range(b):
                s = 0.0
                for l in range(b):
                    s += udinv[i, k, l] * acc[l]
                res[k] = s
            for k in range(b):
                x[i * b + k] = res[k]
