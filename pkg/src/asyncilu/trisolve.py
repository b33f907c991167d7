"""Triangular solves, sequential and asynchronous, plus factor diagnostics.

The forward solve relaxes ``L y = b`` with L unit lower block triangular
(diagonal blocks are implicit identities); the backward solve relaxes
``U x = y`` using the cached inverses of U's diagonal blocks.  One work
item updates one block sub-vector; the backward loop runs over rows in
descending order.  With one worker and one sweep each solve is exactly
the corresponding substitution algorithm.
"""

import enum

import numpy as np

from . import _kernels
from .blockmat import BlockSparseMatrix, check_vector
from .errors import DimensionMismatch, SingularBlock, SingularDiagonal
from .sweeps import SweepConfig, WorkSet, run_parallel

DEFAULT_APPLY_SWEEPS = 3


class TriangularSide(enum.Enum):
    LOWER_UNIT = "lower_unit"
    UPPER = "upper"


class TrisolveWorkSet(WorkSet):
    """One work item relaxes one block row of a triangular system.

    Items map to rows ascending for the forward solve and descending for
    the backward solve, so chunks are claimed from the matrix end in the
    backward case.
    """

    def __init__(self, factors, side, rhs):
        self.factors = factors
        self.side = side
        self.rhs = rhs
        self.n_items = factors.n_block_rows
        self.n_slots = factors.pattern.n

    def _row_of(self, item):
        return item if self.side is TriangularSide.LOWER_UNIT \
            else self.n_items - 1 - item

    def run_range(self, x, start, stop):
        A = self.factors.pattern
        _kernels.trisolve_update_rows(
            A.row_ptr, A.col_idx, self.factors.values,
            self.factors.u_diag_inverse, x, self.rhs, start, stop,
            self.side is TriangularSide.LOWER_UNIT)

    # Replay facet: slots are the scalar solution entries.
    def apply_item(self, item, read):
        A = self.factors.pattern
        b = A.block_size
        i = self._row_of(item)
        forward = self.side is TriangularSide.LOWER_UNIT
        acc = self.rhs[i * b:(i + 1) * b].astype(np.float64).copy()
        for p in range(int(A.row_ptr[i]), int(A.row_ptr[i + 1])):
            j = int(A.col_idx[p])
            if (j < i) if forward else (j > i):
                xj = np.array([read(j * b + l) for l in range(b)])
                acc -= self.factors.values[p] @ xj
        if not forward:
            acc = self.factors.u_diag_inverse[i] @ acc
        return list(range(i * b, (i + 1) * b)), acc

    def read_slot(self, x, slot):
        return x[slot]

    def write_slot(self, x, slot, value):
        x[slot] = value

    def slots_vector(self, x):
        return np.asarray(x, dtype=np.float64).copy()

    def write_vector(self, x, vec):
        x[:] = vec


def sequential_trisolve(factors, side, rhs):
    """Exact substitution: forward for the unit-lower factor, backward for
    the upper factor."""
    rhs = check_vector(factors.pattern, rhs)
    x = np.zeros_like(rhs)
    work = TrisolveWorkSet(factors, side, rhs)
    work.run_range(x, 0, work.n_items)
    return x


def async_trisolve(factors, side, rhs, cfg=None, initial=None):
    """Asynchronous triangular relaxation with ``cfg.n_sweeps`` sweeps.

    The default initial guess is the zero vector.  With one worker and one
    sweep this equals :func:`sequential_trisolve` bitwise, because the
    in-order relaxation of a triangular system is exact substitution.
    """
    from .ilu import default_chunk_size  # local import avoids a cycle

    rhs = check_vector(factors.pattern, rhs)
    if cfg is None:
        cfg = SweepConfig(DEFAULT_APPLY_SWEEPS,
                          chunk_size=default_chunk_size(factors.block_size))
    if initial is None:
        x = np.zeros_like(rhs)
    else:
        x = check_vector(factors.pattern, initial).copy()
    work = TrisolveWorkSet(factors, side, rhs)
    run_parallel(work, cfg, x)
    return x


def jacobi_iteration_matrix_norm(tri, side):
    """Max-norm of the Jacobi iteration matrix of a triangular matrix.

    For ``T = D + R`` with D the (block-)diagonal of ``tri`` and R the
    strict remainder, returns ``max-norm of inv(D) R`` accumulated row by
    row with per-row dense products; the full matrix is never formed.
    """
    if not isinstance(tri, BlockSparseMatrix):
        raise DimensionMismatch("expected a BlockSparseMatrix")
    b = tri.block_size
    worst = 0.0
    for i in range(tri.n_block_rows):
        dinv = np.empty((b, b))
        if not _kernels.invert_block(tri.values[tri.diag_pos[i]], dinv):
            raise SingularDiagonal(i)
        rowsum = np.zeros(b)
        for p in range(tri.row_ptr[i], tri.row_ptr[i + 1]):
            j = tri.col_idx[p]
            if j == i:
                continue
            bad = (j > i) if side is TriangularSide.LOWER_UNIT else (j < i)
            if bad:
                raise DimensionMismatch(
                    f"entry ({i}, {j}) on the wrong side of the diagonal")
            rowsum += np.abs(dinv @ tri.values[p]).sum(axis=1)
        worst = max(worst, float(rowsum.max()))
    return worst


def factor_jacobi_norms(factors):
    """(L norm, U norm) of the Jacobi iteration matrices of both factors."""
    lnorm = jacobi_iteration_matrix_norm(factors.lower_matrix(),
                                         TriangularSide.LOWER_UNIT)
    unorm = jacobi_iteration_matrix_norm(factors.upper_matrix(),
                                         TriangularSide.UPPER)
    return lnorm, unorm


def factors_from_matrix(T, side):
    """View an explicit triangular block matrix as solver-ready factors.

    For the lower side the stored diagonal blocks must be identities
    (they are implicit in the solve); for the upper side the diagonal
    blocks are inverted and cached.  Entries on the wrong side of the
    diagonal are rejected.
    """
    from .blockmat import block_lu_invert
    from .ilu import IluFactors

    b = T.block_size
    udinv = np.empty((T.n_block_rows, b, b))
    for i in range(T.n_block_rows):
        for p in range(T.row_ptr[i], T.row_ptr[i + 1]):
            j = T.col_idx[p]
            if side is TriangularSide.LOWER_UNIT and j > i:
                raise DimensionMismatch(f"entry ({i}, {j}) above the diagonal")
            if side is TriangularSide.UPPER and j < i:
                raise DimensionMismatch(f"entry ({i}, {j}) below the diagonal")
        try:
            udinv[i] = block_lu_invert(T.values[T.diag_pos[i]])
        except SingularBlock:
            raise SingularDiagonal(i) from None
    return IluFactors(T, T.values.copy(), udinv)
