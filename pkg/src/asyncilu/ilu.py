"""Incomplete LU(0) factorization, sequential and asynchronous.

The factors share the sparsity pattern of the source matrix: strict-lower
block positions hold L (the unit diagonal of L is implicit) and upper
positions including the diagonal hold U.  All of L's and U's stored
entries together are the unknowns of the fixed-point formulation; one
fused values array holds them.

The asynchronous factorization runs fixed-point sweeps through the
executor in :mod:`asyncilu.sweeps`, one work item per block row, with a
modified-iteration guard that substitutes a scaled identity whenever a
diagonal block becomes singular, so it never breaks down.  With a single
worker it is bitwise identical to :func:`sequential_ilu0`.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .blockmat import BlockSparseMatrix
from .errors import DimensionMismatch, SingularDiagonal, ZeroDiagonal
from .sweeps import SweepConfig, WorkSet, run_parallel

# Chunk sizes for dynamic scheduling; the scalar case uses 4x the block one.
BLOCK_CHUNK_SIZE = 384
SCALAR_CHUNK_SIZE = 1536

DEFAULT_BUILD_SWEEPS = 1


def default_chunk_size(block_size):
    return SCALAR_CHUNK_SIZE if block_size == 1 else BLOCK_CHUNK_SIZE


@dataclass
class IluFactors:
    """Fused L/U factor storage aliasing the source matrix pattern.

    ``values[p]`` holds the L block when ``col < row`` and the U block
    otherwise; ``u_diag_inverse[i]`` caches the inverse of the diagonal
    block of U in row i and is refreshed whenever that block is written.
    ``guard_substitutions`` counts modified-iteration substitutions (the
    count is best-effort under concurrent sweeps).
    """

    pattern: BlockSparseMatrix
    values: np.ndarray
    u_diag_inverse: np.ndarray
    guard_substitutions: int = 0

    @property
    def block_size(self):
        return self.pattern.block_size

    @property
    def n_block_rows(self):
        return self.pattern.n_block_rows

    @property
    def n_unknowns(self):
        return self.values.size

    def copy(self):
        return IluFactors(self.pattern, self.values.copy(),
                          self.u_diag_inverse.copy(), self.guard_substitutions)

    def unknowns(self):
        """The m scalar unknowns as a flat view over the fused storage."""
        return self.values.reshape(-1)

    def lower_matrix(self):
        """Materialize L as a block matrix with explicit unit diagonal blocks."""
        A = self.pattern
        b = A.block_size
        blocks = {}
        for i in range(A.n_block_rows):
            for p in range(A.row_ptr[i], A.row_ptr[i + 1]):
                j = int(A.col_idx[p])
                if j < i:
                    blocks[(i, j)] = self.values[p]
            blocks[(i, i)] = np.eye(b)
        return BlockSparseMatrix.from_block_dict(A.n_block_rows, b, blocks)

    def upper_matrix(self):
        """Materialize U (upper triangle including the diagonal)."""
        A = self.pattern
        blocks = {}
        for i in range(A.n_block_rows):
            for p in range(A.row_ptr[i], A.row_ptr[i + 1]):
                j = int(A.col_idx[p])
                if j >= i:
                    blocks[(i, j)] = self.values[p]
        return BlockSparseMatrix.from_block_dict(A.n_block_rows, A.block_size, blocks)


def _guard_scales(A):
    """Per-row substitute scale: max |entry| of A's diagonal block, or 1."""
    scales = np.empty(A.n_block_rows)
    for i in range(A.n_block_rows):
        m = np.max(np.abs(A.values[A.diag_pos[i]]))
        scales[i] = m if m > 0.0 else 1.0
    return scales


def modified_guard(diag, scale=1.0):
    """Return ``diag`` unchanged if nonsingular, else a nonsingular substitute.

    The substitute is the identity scaled by ``scale`` (callers pass the
    max |entry| of the source matrix's corresponding diagonal block).
    """
    diag = np.ascontiguousarray(diag, dtype=np.float64)
    inv = np.empty_like(diag)
    if _kernels.invert_block(diag, inv):
        return diag
    return float(scale) * np.eye(diag.shape[0])


def initial_factors(A, guard=True):
    """Initial guess for the fixed point: the entries of A.

    L's strict-lower blocks and U's upper blocks are copied from A; the
    cached diagonal inverses are computed immediately (guarded unless
    ``guard`` is off, in which case a singular diagonal raises).
    """
    b = A.block_size
    values = A.values.copy()
    udinv = np.empty((A.n_block_rows, b, b))
    scales = _guard_scales(A)
    status = _kernels.refresh_diag_inverses(values, A.diag_pos, scales, udinv,
                                            guard)
    if status < 0:
        raise SingularDiagonal(-status - 1)
    return IluFactors(A, values, udinv, guard_substitutions=int(status))


class IluWorkSet(WorkSet):
    """Row-granular factorization work set: one item recomputes all the
    factor blocks of one block row, left to right, with local accumulation
    and one whole-value write per scalar slot."""

    def __init__(self, A, factors, guard=True):
        self.A = A
        self.guard = guard
        self.guard_scale = _guard_scales(A)
        self.guard_counts = np.zeros(A.n_block_rows, dtype=np.int64)
        self.n_items = A.n_block_rows
        self.n_slots = factors.n_unknowns

    def run_range(self, factors, start, stop):
        A = self.A
        bad = _kernels.ilu_update_rows(A.row_ptr, A.col_idx, A.values,
                                       factors.values, factors.u_diag_inverse,
                                       self.guard_scale, self.guard_counts,
                                       start, stop, self.guard)
        if bad >= 0:
            raise SingularDiagonal(bad)

    # Replay facet: slots are the scalar unknowns in storage order; a row
    # item recomputes its blocks left to right, reading other rows through
    # the schedule and its own freshly computed row values directly.
    def apply_item(self, item, read):
        A = self.A
        b = A.block_size
        i = item
        beg, end = int(A.row_ptr[i]), int(A.row_ptr[i + 1])
        row_new = {}

        def block_of(pos, row):
            if row == i and pos in row_new:
                return row_new[pos]
            base = pos * b * b
            return np.array([read(base + t) for t in range(b * b)]).reshape(b, b)

        slots, values = [], []
        for p in range(beg, end):
            j = int(A.col_idx[p])
            acc = A.values[p].copy()
            for q in range(beg, end):
                k = int(A.col_idx[q])
                if k >= min(i, j):
                    break
                pos = A.block_position(k, j)
                if pos >= 0:
                    acc = acc - block_of(q, i) @ block_of(pos, k)
            if i > j:
                pos_jj = A.block_position(j, j)
                ujj = modified_guard(block_of(pos_jj, j), self.guard_scale[j])
                acc = acc @ np.linalg.inv(ujj)
            row_new[p] = acc
            base = p * b * b
            slots.extend(range(base, base + b * b))
            values.extend(acc.reshape(-1))
        return slots, np.asarray(values)

    def read_slot(self, factors, slot):
        return factors.values.reshape(-1)[slot]

    def write_slot(self, factors, slot, value):
        factors.values.reshape(-1)[slot] = value

    def slots_vector(self, factors):
        return factors.values.reshape(-1).copy()

    def write_vector(self, factors, x):
        factors.values.reshape(-1)[:] = x
        self.refresh(factors)

    def refresh(self, factors):
        status = _kernels.refresh_diag_inverses(
            factors.values, self.A.diag_pos, self.guard_scale,
            factors.u_diag_inverse, True)
        factors.guard_substitutions += int(status)


class IluBlockWorkSet(IluWorkSet):
    """Block-granular work set: one item recomputes one factor block from
    schedule reads only.  This is the granularity of the fixed-point map
    whose synchronized form converges in at most m / b**2 rounds."""

    def __init__(self, A, factors, guard=True):
        super().__init__(A, factors, guard)
        self.n_items = A.nnz_blocks

    def apply_item(self, item, read):
        A = self.A
        b = A.block_size
        p = item
        i = int(np.searchsorted(A.row_ptr, p, side="right")) - 1
        j = int(A.col_idx[p])

        def block_of(pos):
            base = pos * b * b
            return np.array([read(base + t) for t in range(b * b)]).reshape(b, b)

        acc = A.values[p].copy()
        for q in range(int(A.row_ptr[i]), int(A.row_ptr[i + 1])):
            k = int(A.col_idx[q])
            if k >= min(i, j):
                break
            pos = A.block_position(k, j)
            if pos >= 0:
                acc = acc - block_of(q) @ block_of(pos)
        if i > j:
            pos_jj = A.block_position(j, j)
            ujj = modified_guard(block_of(pos_jj), self.guard_scale[j])
            acc = acc @ np.linalg.inv(ujj)
        base = p * b * b
        return list(range(base, base + b * b)), acc.reshape(-1)


def sequential_ilu0(A):
    """Classical ILU(0): row-major in-order evaluation of the update map.

    The result satisfies the fixed point exactly (to rounding).  Raises
    :class:`SingularDiagonal` when elimination hits a singular diagonal
    block.
    """
    # The in-order pass writes every diagonal inverse before first use, so
    # the initial cache contents never matter here.
    factors = initial_factors(A, guard=True)
    factors.guard_substitutions = 0
    work = IluWorkSet(A, factors, guard=False)
    work.run_range(factors, 0, A.n_block_rows)
    return factors


def async_ilu0(A, cfg=None, initial=None, guard=True):
    """Asynchronous ILU(0) factorization via fixed-point sweeps.

    ``cfg.n_sweeps`` sweeps over block-row work items with dynamic chunk
    scheduling and no inter-sweep barriers.  The default initial guess is
    the entries of A.  The modified-iteration guard keeps every diagonal
    block nonsingular; substitutions are counted on the returned factors.
    With ``n_workers=1`` the result is bitwise equal to
    :func:`sequential_ilu0`.
    """
    if cfg is None:
        cfg = SweepConfig(DEFAULT_BUILD_SWEEPS,
                          chunk_size=default_chunk_size(A.block_size))
    factors = initial_factors(A, guard=guard) if initial is None else initial
    work = IluWorkSet(A, factors, guard=guard)
    run_parallel(work, cfg, factors)
    factors.guard_substitutions += int(work.guard_counts.sum())
    return factors


def jacobi_ilu_step(A, factors):
    """One synchronized evaluation of the (modified) fixed-point map.

    Returns new factors; the input is not modified except that singular
    diagonal blocks of the input iterate are substituted first, exactly as
    the modified Jacobi-type iteration prescribes.
    """
    scales = _guard_scales(A)
    old = factors
    status = _kernels.refresh_diag_inverses(old.values, A.diag_pos, scales,
                                            old.u_diag_inverse, True)
    new = old.copy()
    new.guard_substitutions += int(status)
    _kernels.ilu_jacobi_step(A.row_ptr, A.col_idx, A.values, old.values,
                             old.u_diag_inverse, new.values)
    sub = _kernels.refresh_diag_inverses(new.values, A.diag_pos, scales,
                                         new.u_diag_inverse, True)
    new.guard_substitutions += int(sub)
    return new


def chunked_jacobi_sweeps(A, factors, n_sweeps, chunk_rows):
    """Worst-case chunked execution: within a chunk rows see this sweep's
    values, across chunks the previous sweep's.  Converges in at most
    (number of chunks) sweeps for the strictly lower-triangular row order.
    """
    scales = _guard_scales(A)
    cur = factors.copy()
    cur.guard_substitutions += int(_kernels.refresh_diag_inverses(
        cur.values, A.diag_pos, scales, cur.u_diag_inverse, True))
    guard_counts = np.zeros(A.n_block_rows, dtype=np.int64)
    for _ in range(n_sweeps):
        new = cur.copy()
        _kernels.ilu_chunk_jacobi_sweep(A.row_ptr, A.col_idx, A.values,
                                        cur.values, new.values,
                                        cur.u_diag_inverse, new.u_diag_inverse,
                                        scales, guard_counts, chunk_rows)
        cur = new
    cur.guard_substitutions += int(guard_counts.sum())
    return cur


def ilu_fixed_point_residual(A, factors):
    """Fixed-point residual of the current factors.

    Returns ``(norm1, norm_max)`` of x - g(x) over all m unknowns, where g
    is one synchronized evaluation of the update map.
    """
    g = jacobi_ilu_step(A, factors)
    r = g.unknowns() - factors.unknowns()
    return float(np.sum(np.abs(r))), float(np.max(np.abs(r)))


@dataclass(frozen=True)
class ScalingVectors:
    """Symmetric scaling factors (row and column scales are the same array)."""

    row_scale: np.ndarray

    @property
    def col_scale(self):
        return self.row_scale


def symmetric_scale(A):
    """Symmetrically scale A so every scalar diagonal entry has magnitude 1.

    Returns ``(D A D, scaling)`` with ``d_i = 1 / sqrt(|a_ii|)``; signs of
    diagonal entries are preserved.  The unscaled solution of ``A x = b``
    is recovered as ``x = D x_tilde`` where ``x_tilde`` solves the scaled
    system with rhs ``D b``.
    """
    b = A.block_size
    diag = np.empty(A.n)
    for i in range(A.n_block_rows):
        db = A.values[A.diag_pos[i]]
        for k in range(b):
            diag[i * b + k] = db[k, k]
    zero = np.nonzero(diag == 0.0)[0]
    if zero.size:
        raise ZeroDiagonal(int(zero[0]))
    d = 1.0 / np.sqrt(np.abs(diag))
    values = A.values.copy()
    for i in range(A.n_block_rows):
        drow = d[i * b:(i + 1) * b]
        for p in range(A.row_ptr[i], A.row_ptr[i + 1]):
            j = A.col_idx[p]
            values[p] = drow[:, None] * values[p] * d[j * b:(j + 1) * b][None, :]
    scaled = BlockSparseMatrix(A.n_block_rows, b, A.row_ptr.copy(),
                               A.col_idx.copy(), values)
    return scaled, ScalingVectors(d)


def unscale_solution(x_scaled, scaling):
    """Recover the original-system solution from the scaled one."""
    x_scaled = np.asarray(x_scaled)
    if x_scaled.shape != scaling.row_scale.shape:
        raise DimensionMismatch("solution and scaling lengths differ")
    return scaling.row_scale * x_scaled
