"""Block compressed sparse row storage and dense block kernels.

A :class:`BlockSparseMatrix` stores a square sparse matrix as dense
``b x b`` blocks, row-major within each block and contiguous per nonzero
block.  The scalar case is simply ``b = 1``; there is a single code path
for both.  Every block row must contain its diagonal block, and block
column indices are strictly increasing within a row.
"""

import numpy as np

from . import _kernels
from .errors import DimensionMismatch, MissingDiagonalBlock, NonTilingPattern, SingularBlock


class BlockSparseMatrix:
    """Square sparse matrix of contiguous dense b x b blocks (BSR).

    Parameters
    ----------
    n_block_rows : int
        Number of block rows (and block columns).
    block_size : int
        Edge length ``b`` of the square dense blocks, fixed per matrix.
    row_ptr : array of int, length n_block_rows + 1
        Offsets into ``col_idx``/``values`` per block row, non-decreasing.
    col_idx : array of int
        Block column index of each nonzero block, strictly increasing
        within each row.
    values : array, shape (nnz_blocks, b, b)
        Dense block values, row-major within each block.

    The matrix is immutable by convention after construction and is safe
    to share across worker threads.
    """

    __slots__ = ("n_block_rows", "block_size", "row_ptr", "col_idx", "values",
                 "diag_pos")

    def __init__(self, n_block_rows, block_size, row_ptr, col_idx, values):
        if n_block_rows < 0 or block_size < 1:
            raise ValueError("need n_block_rows >= 0 and block_size >= 1")
        self.n_block_rows = int(n_block_rows)
        self.block_size = int(block_size)
        self.row_ptr = np.ascontiguousarray(row_ptr, dtype=np.int64)
        self.col_idx = np.ascontiguousarray(col_idx, dtype=np.int64)
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        b = self.block_size
        if self.row_ptr.shape != (self.n_block_rows + 1,):
            raise DimensionMismatch("row_ptr has wrong length")
        if self.values.shape != (self.col_idx.shape[0], b, b):
            raise DimensionMismatch("values shape does not match col_idx/block_size")
        if self.row_ptr[0] != 0 or self.row_ptr[-1] != self.col_idx.shape[0]:
            raise DimensionMismatch("row_ptr does not span col_idx")
        if np.any(np.diff(self.row_ptr) < 0):
            raise DimensionMismatch("row_ptr must be non-decreasing")
        self.diag_pos = self._locate_diagonals()

    def _locate_diagonals(self):
        diag = np.empty(self.n_block_rows, dtype=np.int64)
        for i in range(self.n_block_rows):
            beg, end = self.row_ptr[i], self.row_ptr[i + 1]
            cols = self.col_idx[beg:end]
            if cols.size > 1 and np.any(np.diff(cols) <= 0):
                raise DimensionMismatch(
                    f"block columns not strictly increasing in row {i}")
            pos = np.searchsorted(cols, i)
            if pos == cols.size or cols[pos] != i:
                raise MissingDiagonalBlock(i)
            diag[i] = beg + pos
        return diag

    # -- basic queries ---------------------------------------------------

    @property
    def n(self):
        """Scalar dimension."""
        return self.n_block_rows * self.block_size

    @property
    def nnz_blocks(self):
        return self.col_idx.shape[0]

    @property
    def nnz_scalars(self):
        """Total scalar entry count, nnz_blocks * b**2."""
        return self.nnz_blocks * self.block_size ** 2

    def block_position(self, i, j):
        """Storage position of block (i, j), or -1 if not in the pattern."""
        beg, end = self.row_ptr[i], self.row_ptr[i + 1]
        pos = int(np.searchsorted(self.col_idx[beg:end], j))
        if pos < end - beg and self.col_idx[beg + pos] == j:
            return int(beg) + pos
        return -1

    def copy(self):
        return BlockSparseMatrix(self.n_block_rows, self.block_size,
                                 self.row_ptr.copy(), self.col_idx.copy(),
                                 self.values.copy())

    def to_dense(self):
        b = self.block_size
        out = np.zeros((self.n, self.n))
        for i in range(self.n_block_rows):
            for p in range(self.row_ptr[i], self.row_ptr[i + 1]):
                j = self.col_idx[p]
                out[i * b:(i + 1) * b, j * b:(j + 1) * b] = self.values[p]
        return out

    # -- constructors ----------------------------------------------------

    @staticmethod
    def identity(n_block_rows, block_size=1):
        b = block_size
        row_ptr = np.arange(n_block_rows + 1, dtype=np.int64)
        col_idx = np.arange(n_block_rows, dtype=np.int64)
        values = np.broadcast_to(np.eye(b), (n_block_rows, b, b)).copy()
        return BlockSparseMatrix(n_block_rows, b, row_ptr, col_idx, values)

    @staticmethod
    def from_block_dict(n_block_rows, block_size, blocks):
        """Build from a mapping (i, j) -> dense block."""
        b = block_size
        row_ptr = np.zeros(n_block_rows + 1, dtype=np.int64)
        entries = sorted(blocks.items())
        for (i, _j), _v in entries:
            row_ptr[i + 1] += 1
        np.cumsum(row_ptr, out=row_ptr)
        col_idx = np.empty(len(entries), dtype=np.int64)
        values = np.empty((len(entries), b, b))
        for p, ((_i, j), v) in enumerate(entries):
            col_idx[p] = j
            values[p] = np.asarray(v, dtype=np.float64).reshape(b, b)
        return BlockSparseMatrix(n_block_rows, b, row_ptr, col_idx, values)


def check_vector(A, x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (A.n,):
        raise DimensionMismatch(
            f"vector of length {x.shape} incompatible with matrix dimension {A.n}")
    return x


def spmv(A, x):
    """Matrix-vector product y = A x."""
    x = check_vector(A, x)
    b = A.block_size
    xb = x.reshape(A.n_block_rows, b)
    # per-block products, then segment-sum into block rows
    prod = np.einsum("pkl,pl->pk", A.values, xb[A.col_idx])
    y = np.zeros((A.n_block_rows, b))
    rows = np.repeat(np.arange(A.n_block_rows), np.diff(A.row_ptr))
    np.add.at(y, rows, prod)
    return y.reshape(A.n)


def block_lu_invert(block):
    """Exact inverse of a dense block via pivoted elimination.

    Raises :class:`SingularBlock` when a pivot falls below the relative
    singularity threshold.
    """
    block = np.ascontiguousarray(block, dtype=np.float64)
    if block.ndim != 2 or block.shape[0] != block.shape[1]:
        raise DimensionMismatch("block must be square")
    out = np.empty_like(block)
    if not _kernels.invert_block(block, out):
        raise SingularBlock("pivot below singularity threshold")
    return out


def scalar_view(A):
    """Equivalent matrix with b = 1 whose entries are all stored block entries.

    Every entry of every stored block becomes a scalar entry (explicit
    zeros included), so the scalar and block representations have the same
    nonzero count.  :func:`group_scalar_blocks` reverses this exactly.
    """
    b = A.block_size
    if b == 1:
        return A.copy()
    n = A.n
    counts = np.zeros(n + 1, dtype=np.int64)
    block_counts = np.diff(A.row_ptr)
    for i in range(A.n_block_rows):
        counts[i * b + 1:(i + 1) * b + 1] = block_counts[i] * b
    row_ptr = np.cumsum(counts)
    col_idx = np.empty(A.nnz_scalars, dtype=np.int64)
    values = np.empty((A.nnz_scalars, 1, 1))
    out = 0
    for i in range(A.n_block_rows):
        beg, end = A.row_ptr[i], A.row_ptr[i + 1]
        for k in range(b):
            for p in range(beg, end):
                j = A.col_idx[p]
                for l in range(b):
                    col_idx[out] = j * b + l
                    values[out, 0, 0] = A.values[p, k, l]
                    out += 1
    return BlockSparseMatrix(n, 1, row_ptr, col_idx, values)


def group_scalar_blocks(A, block_size):
    """Group a scalar (b = 1) matrix into full dense blocks of ``block_size``.

    The scalar dimension must be divisible by ``block_size``; scalar
    entries missing inside a touched block become explicit zeros.
    """
    if A.block_size != 1:
        raise DimensionMismatch("group_scalar_blocks expects a scalar matrix")
    b = int(block_size)
    if b < 1 or A.n % b != 0:
        raise NonTilingPattern(
            f"dimension {A.n} does not tile into blocks of size {b}")
    if b == 1:
        return A.copy()
    nb = A.n // b
    blocks = {}
    for i in range(A.n):
        for p in range(A.row_ptr[i], A.row_ptr[i + 1]):
            j = int(A.col_idx[p])
            key = (i // b, j // b)
            blk = blocks.get(key)
            if blk is None:
                blk = np.zeros((b, b))
                blocks[key] = blk
            blk[i % b, j % b] = A.values[p, 0, 0]
    return BlockSparseMatrix.from_block_dict(nb, b, blocks)
