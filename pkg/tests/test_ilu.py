import numpy as np
import pytest

from asyncilu import (BlockSparseMatrix, SingularDiagonal, SweepConfig,
                      ZeroDiagonal, async_ilu0, chunked_jacobi_sweeps,
                      ilu_fixed_point_residual, initial_factors,
                      jacobi_ilu_step, jacobi_rounds, modified_guard,
                      run_replay, sequential_ilu0, symmetric_scale,
                      unscale_solution)
from asyncilu.ilu import IluBlockWorkSet
from asyncilu.problems import ProblemSpec, generate
from conftest import dense_block_ilu0, factors_to_dense, random_block_matrix


def scalar_matrix(entries, n):
    blocks = {(i, j): [[v]] for (i, j), v in entries.items()}
    return BlockSparseMatrix.from_block_dict(n, 1, blocks)


class TestSequentialIlu0:
    def test_identity(self):
        A = BlockSparseMatrix.identity(5, 2)
        f = sequential_ilu0(A)
        L, U = factors_to_dense(f)
        assert np.array_equal(L, np.eye(10))
        assert np.array_equal(U, np.eye(10))

    def test_hand_elimination_2x2(self):
        A = scalar_matrix({(0, 0): 4.0, (0, 1): 1.0, (1, 0): 1.0, (1, 1): 3.0}, 2)
        f = sequential_ilu0(A)
        L, U = factors_to_dense(f)
        assert L[1, 0] == 0.25
        assert np.allclose(U, [[4.0, 1.0], [0.0, 2.75]], rtol=0, atol=0)

    def test_tridiagonal_equals_exact_lu(self):
        # a tridiagonal pattern produces no fill, so ILU(0) is the exact LU
        rng = np.random.default_rng(0)
        n = 15
        entries = {}
        for i in range(n):
            entries[(i, i)] = 4.0 + rng.random()
            if i:
                entries[(i, i - 1)] = -1.0 - rng.random()
                entries[(i - 1, i)] = -1.0 - rng.random()
        A = scalar_matrix(entries, n)
        f = sequential_ilu0(A)
        L, U = factors_to_dense(f)
        dense = A.to_dense()
        assert np.abs(L @ U - dense).max() < 1e-14 * np.abs(dense).max()

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(1)
        for b in (1, 2, 4):
            for _ in range(5):
                A = random_block_matrix(rng, 12, b)
                f = sequential_ilu0(A)
                L, U = factors_to_dense(f)
                Lo, Uo = dense_block_ilu0(A)
                scale = max(np.abs(Lo).max(), np.abs(Uo).max())
                assert np.abs(L - Lo).max() < 1e-12 * scale
                assert np.abs(U - Uo).max() < 1e-12 * scale

    def test_singular_diagonal_raises(self):
        A = scalar_matrix({(0, 0): 1.0, (0, 1): 1.0,
                           (1, 0): 1.0, (1, 1): 1.0}, 2)
        # U22 = 1 - 1*1 = 0
        with pytest.raises(SingularDiagonal):
            sequential_ilu0(A)


class TestAsyncIlu0:
    def test_one_worker_bitwise_equals_sequential(self):
        rng = np.random.default_rng(2)
        for b in (1, 2):
            for sweeps in (1, 3):
                A = random_block_matrix(rng, 20, b)
                seq = sequential_ilu0(A)
                got = async_ilu0(A, SweepConfig(sweeps, 1, 7))
                assert np.array_equal(got.values, seq.values)
                assert np.array_equal(got.u_diag_inverse, seq.u_diag_inverse)

    def test_fixed_point_is_stationary(self):
        rng = np.random.default_rng(3)
        A = random_block_matrix(rng, 25, 2)
        star = sequential_ilu0(A)
        for workers in (1, 4):
            again = async_ilu0(A, SweepConfig(2, workers, 5), initial=star.copy())
            assert np.array_equal(again.values, star.values)

    def test_multi_worker_converges_to_fixed_point(self):
        rng = np.random.default_rng(4)
        A = random_block_matrix(rng, 60, 2)
        init1, _ = ilu_fixed_point_residual(A, initial_factors(A))
        f = async_ilu0(A, SweepConfig(12, 4, 8))
        res1, _ = ilu_fixed_point_residual(A, f)
        assert res1 <= 1e-12 * init1

    def test_convergence_study_convection_diffusion(self):
        # 100x100 scalar convection-diffusion, 8 workers: the fixed-point
        # residual reaches 1e-13 of the initial within 20 sweeps, with a
        # decreasing trend (2-apart comparison absorbs race noise)
        A, _, _ = generate(ProblemSpec("convdiff", 100, 100,
                                       velocity=(4.0, 2.0), seed=5))
        init1, _ = ilu_fixed_point_residual(A, initial_factors(A))
        rel = []
        for sweeps in range(1, 21):
            f = async_ilu0(A, SweepConfig(sweeps, 8))
            res1, _ = ilu_fixed_point_residual(A, f)
            rel.append(res1 / init1)
        assert min(rel) <= 1e-13
        assert rel[-1] <= 1e-13
        floor = 1e-15
        for s in range(2, len(rel)):
            assert rel[s] <= max(rel[s - 2], floor)


class TestModifiedGuard:
    def test_nonsingular_unchanged(self):
        blk = np.array([[2.0, 1.0], [0.0, 1.0]])
        assert np.array_equal(modified_guard(blk, 5.0), blk)

    def test_zero_scalar_replaced_by_scale(self):
        out = modified_guard(np.array([[0.0]]), scale=3.0)
        assert out[0, 0] == 3.0

    def test_rank_deficient_block_replaced(self):
        blk = np.array([[1.0, 2.0], [2.0, 4.0]])
        out = modified_guard(blk, scale=2.0)
        assert abs(np.linalg.det(out)) > 0.0
        assert np.array_equal(out, 2.0 * np.eye(2))

    def test_guard_counted_in_async_build(self):
        # zero diagonal entry with an empty strict-lower row never recovers,
        # so the guard must fire and the factors stay nonsingular
        A = scalar_matrix({(0, 0): 0.0, (0, 1): 1.0,
                           (1, 0): 1.0, (1, 1): 2.0}, 2)
        f = async_ilu0(A, SweepConfig(2, 1, 4))
        assert f.guard_substitutions >= 1
        assert np.all(np.abs([f.values[f.pattern.diag_pos[i], 0, 0]
                              for i in range(2)]) > 0)


class TestFixedPointResidual:
    def test_zero_at_sequential_fixed_point(self):
        rng = np.random.default_rng(6)
        A = random_block_matrix(rng, 30, 2)
        f = sequential_ilu0(A)
        res1, resmax = ilu_fixed_point_residual(A, f)
        scale = np.abs(f.unknowns()).max()
        assert res1 <= 1e-13 * scale
        assert resmax <= 1e-13 * scale

    def test_zero_for_initial_guess_on_identity(self):
        A = BlockSparseMatrix.identity(6, 2)
        res1, resmax = ilu_fixed_point_residual(A, initial_factors(A))
        assert res1 == 0.0 and resmax == 0.0

    def test_jacobi_replay_reaches_fixed_point_in_block_count_rounds(self):
        rng = np.random.default_rng(7)
        for b in (1, 2):
            A = random_block_matrix(rng, 8, b, extra_per_row=2)
            star = sequential_ilu0(A)
            factors = initial_factors(A)
            factors.values[:] = rng.standard_normal(factors.values.shape)
            work = IluBlockWorkSet(A, factors)
            n_blocks = A.nnz_blocks  # m / b**2
            orders = [rng.permutation(n_blocks) for _ in range(n_blocks)]
            run_replay(work, jacobi_rounds(n_blocks, n_blocks, orders), factors)
            err = np.abs(factors.unknowns() - star.unknowns()).max()
            assert err <= 1e-12 * np.abs(star.unknowns()).max()

    def test_synchronized_steps_reach_fixed_point_in_block_count_iters(self):
        rng = np.random.default_rng(8)
        A = random_block_matrix(rng, 10, 2)
        star = sequential_ilu0(A)
        f = initial_factors(A)
        f.values[:] = rng.standard_normal(f.values.shape)
        for _ in range(A.nnz_blocks):
            f = jacobi_ilu_step(A, f)
        assert np.array_equal(f.values, star.values)

    def test_chunked_sweeps_bound(self):
        rng = np.random.default_rng(9)
        A = random_block_matrix(rng, 24, 2)
        star = sequential_ilu0(A)
        f = initial_factors(A)
        f.values[:] = rng.standard_normal(f.values.shape)
        chunk_rows = 5
        n_chunks = -(-A.n_block_rows // chunk_rows)
        f = chunked_jacobi_sweeps(A, f, n_chunks, chunk_rows)
        assert np.array_equal(f.values, star.values)

    def test_local_convergence_near_fixed_point(self):
        # Zero spectral radius means the linear error term dies after
        # depth-many iterations; on arrow matrices (diagonal plus first
        # block column) the dependency depth is 2, so two synchronized
        # iterations leave only the quadratic term of a 1e-8 perturbation.
        rng = np.random.default_rng(10)
        for trial in range(5):
            n = 8
            blocks = {(i, i): rng.standard_normal((2, 2)) + 6 * np.eye(2)
                      for i in range(n)}
            for i in range(1, n):
                blocks[(i, 0)] = rng.standard_normal((2, 2))
            A = BlockSparseMatrix.from_block_dict(n, 2, blocks)
            star = sequential_ilu0(A)
            f = star.copy()
            f.values *= 1.0 + 1e-8 * rng.standard_normal(f.values.shape)
            f = jacobi_ilu_step(A, jacobi_ilu_step(A, f))
            res1, _ = ilu_fixed_point_residual(A, f)
            assert res1 <= 1e-12 * max(1.0, np.abs(star.unknowns()).max())

    def test_local_convergence_generic_instances_decay(self):
        # generic random instances restore the residual once the iteration
        # count passes the block dependency depth
        rng = np.random.default_rng(12)
        for _ in range(3):
            A = random_block_matrix(rng, 10, 2)
            star = sequential_ilu0(A)
            f = star.copy()
            f.values *= 1.0 + 1e-8 * rng.standard_normal(f.values.shape)
            for _ in range(A.nnz_blocks):
                f = jacobi_ilu_step(A, f)
            res1, _ = ilu_fixed_point_residual(A, f)
            assert res1 <= 1e-12 * max(1.0, np.abs(star.unknowns()).max())


class TestSymmetricScale:
    def test_diag_4_9(self):
        A = scalar_matrix({(0, 0): 4.0, (1, 1): 9.0}, 2)
        S, sv = symmetric_scale(A)
        assert np.array_equal(S.to_dense(), np.eye(2))
        assert np.allclose(sv.row_scale, [0.5, 1.0 / 3.0], rtol=0, atol=0)
        assert sv.col_scale is sv.row_scale

    def test_negative_diagonal_keeps_sign(self):
        A = scalar_matrix({(0, 0): -4.0, (0, 1): 2.0,
                           (1, 0): 2.0, (1, 1): 16.0}, 2)
        S, _ = symmetric_scale(A)
        d = np.diag(S.to_dense())
        assert d[0] == -1.0 and d[1] == 1.0

    def test_unit_diagonal_magnitude_block_case(self):
        rng = np.random.default_rng(11)
        A = random_block_matrix(rng, 10, 3)
        S, sv = symmetric_scale(A)
        d = np.diag(S.to_dense())
        assert np.abs(np.abs(d) - 1.0).max() < 1e-14
        # solution recovery: if (DAD) xt = D b then A (D xt) = b
        b = rng.standard_normal(A.n)
        xt = np.linalg.solve(S.to_dense(), sv.row_scale * b)
        x = unscale_solution(xt, sv)
        assert np.allclose(A.to_dense() @ x, b, rtol=1e-9, atol=1e-9)

    def test_zero_diagonal_rejected(self):
        A = scalar_matrix({(0, 0): 0.0, (0, 1): 1.0,
                           (1, 0): 1.0, (1, 1): 1.0}, 2)
        with pytest.raises(ZeroDiagonal):
            symmetric_scale(A)

    def test_scaled_and_unscaled_preconditioning_both_converge(self):
        # iteration counts are recorded, not compared: the direction is data
        from asyncilu import fgmres, ilu_preconditioner
        A, b, _ = generate(ProblemSpec("convdiff", 24, 24,
                                       velocity=(6.0, 3.0), seed=9))
        plain = fgmres(A, b, ilu_preconditioner(sequential_ilu0(A), exact=True),
                       rel_tol=1e-4, max_iters=120)
        S, sv = symmetric_scale(A)
        scaled = fgmres(S, sv.row_scale * b,
                        ilu_preconditioner(sequential_ilu0(S), exact=True),
                        rel_tol=1e-4, max_iters=120)
        assert plain.converged and scaled.converged
        print(f"\n  fgmres iterations unscaled={plain.iterations} "
              f"scaled={scaled.iterations}")
        x = unscale_solution(scaled.solution, sv)
        from asyncilu import spmv
        assert np.linalg.norm(spmv(A, x) - b) <= 1e-3 * np.linalg.norm(b)
