"""Shared generators and dense oracles for the test suite."""

import numpy as np
import pytest

from asyncilu import BlockSparseMatrix
from asyncilu.trisolve import TriangularSide, factors_from_matrix


def random_block_matrix(rng, n_rows, b, extra_per_row=3, dominance=1.5,
                        symmetric_pattern=True):
    """Random block matrix with full diagonal and diagonally dominant-ish
    diagonal blocks, so its ILU(0) fixed point exists and is nonsingular."""
    cols = [set([i]) for i in range(n_rows)]
    for i in range(n_rows):
        k = int(rng.integers(0, extra_per_row + 1))
        for j in rng.integers(0, n_rows, size=k):
            cols[i].add(int(j))
            if symmetric_pattern:
                cols[int(j)].add(i)
    blocks = {}
    for i in range(n_rows):
        for j in sorted(cols[i]):
            blk = rng.standard_normal((b, b))
            if i == j:
                blk = blk + (dominance * len(cols[i]) + b) * np.eye(b)
            blocks[(i, j)] = blk
    return BlockSparseMatrix.from_block_dict(n_rows, b, blocks)


def random_lower_unit_factors(rng, n_rows, b, extra_per_row=3):
    """Unit lower block-triangular factors with random strict-lower blocks."""
    blocks = {}
    for i in range(n_rows):
        blocks[(i, i)] = np.eye(b)
        if i:
            k = int(rng.integers(0, min(extra_per_row, i) + 1))
            for j in rng.integers(0, i, size=k):
                blocks[(i, int(j))] = rng.standard_normal((b, b))
    L = BlockSparseMatrix.from_block_dict(n_rows, b, blocks)
    return factors_from_matrix(L, TriangularSide.LOWER_UNIT)


def random_upper_factors(rng, n_rows, b, extra_per_row=3):
    """Upper block-triangular factors with well-conditioned diagonal blocks."""
    blocks = {}
    for i in range(n_rows):
        blocks[(i, i)] = rng.standard_normal((b, b)) + (b + 2.0) * np.eye(b)
        if i < n_rows - 1:
            k = int(rng.integers(0, min(extra_per_row, n_rows - 1 - i) + 1))
            for j in rng.integers(i + 1, n_rows, size=k):
                blocks[(i, int(j))] = rng.standard_normal((b, b))
    U = BlockSparseMatrix.from_block_dict(n_rows, b, blocks)
    return factors_from_matrix(U, TriangularSide.UPPER)


def dense_block_ilu0(A):
    """Dense reference ILU(0) on the block pattern of A.

    Independent arithmetic (numpy inv and matmul, dense storage); returns
    (L_dense, U_dense) with L unit block diagonal.
    """
    b = A.block_size
    nb = A.n_block_rows
    pattern = set()
    for i in range(nb):
        for p in range(A.row_ptr[i], A.row_ptr[i + 1]):
            pattern.add((i, int(A.col_idx[p])))
    dense = A.to_dense()
    L = np.eye(A.n)
    U = np.zeros((A.n, A.n))

    def blk(M, i, j):
        return M[i * b:(i + 1) * b, j * b:(j + 1) * b]

    for i in range(nb):
        for j in sorted(j for (r, j) in pattern if r == i):
            s = blk(dense, i, j).copy()
            for k in range(min(i, j)):
                if (i, k) in pattern and (k, j) in pattern:
                    s -= blk(L, i, k) @ blk(U, k, j)
            if i > j:
                L[i * b:(i + 1) * b, j * b:(j + 1) * b] = \
                    s @ np.linalg.inv(blk(U, j, j))
            else:
                U[i * b:(i + 1) * b, j * b:(j + 1) * b] = s
    return L, U


def factors_to_dense(factors):
    """(L_dense, U_dense) from fused factor storage."""
    return factors.lower_matrix().to_dense(), factors.upper_matrix().to_dense()


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    """Compile the numba kernels once before any timed test runs."""
    from asyncilu import async_ilu0, ilu_fixed_point_residual, \
        chunked_jacobi_sweeps, SweepConfig
    from asyncilu.trisolve import async_trisolve, TriangularSide

    rng = np.random.default_rng(0)
    A = random_block_matrix(rng, 6, 2)
    f = async_ilu0(A, SweepConfig(1, 1, 4))
    ilu_fixed_point_residual(A, f)
    chunked_jacobi_sweeps(A, f, 1, 3)
    async_trisolve(f, TriangularSide.LOWER_UNIT, np.ones(A.n),
                   SweepConfig(1, 1, 4))
    async_trisolve(f, TriangularSide.UPPER, np.ones(A.n),
                   SweepConfig(1, 1, 4))
