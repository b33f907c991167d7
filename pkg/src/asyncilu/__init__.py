"""Asynchronous incomplete-LU preconditioning at desk scale.

Block compressed sparse row storage, a chaotic sweep executor with a
deterministic replay mode, scalar and point-block asynchronous ILU(0)
factorization and triangular solves, mesh orderings, flexible GMRES, test
problem generators and a benchmark CLI.
"""

from .blockmat import (BlockSparseMatrix, block_lu_invert, group_scalar_blocks,
                       scalar_view, spmv)
from .errors import (AsyncIluError, DimensionMismatch, InvalidSchedule,
                     InvalidSpec, MissingDiagonalBlock, NonTilingPattern,
                     ParseError, SingularBlock, SingularDiagonal, ZeroDiagonal)
from .estimators import AsyncILUPreconditioner, GridReordering
from .ilu import (IluFactors, ScalingVectors, async_ilu0, chunked_jacobi_sweeps,
                  ilu_fixed_point_residual, initial_factors, jacobi_ilu_step,
                  modified_guard, sequential_ilu0, symmetric_scale,
                  unscale_solution)
from .krylov import KrylovResult, fgmres, ilu_preconditioner
from .orderings import (CellGrid, LineSet, Permutation, find_lines,
                        hybrid_line_order, line_order, one_way_dissection_order,
                        permute_matrix, permute_vector, rcm_order,
                        unpermute_vector)
from .problems import ProblemSpec, add_diagonal_shift, generate, shifted_family
from .sweeps import (ArrayWorkSet, Schedule, ScheduleStep, SweepConfig, WorkSet,
                     in_order_rounds, jacobi_rounds, random_schedule,
                     run_parallel, run_replay)
from .trisolve import (TriangularSide, async_trisolve, factor_jacobi_norms,
                       factors_from_matrix, jacobi_iteration_matrix_norm,
                       sequential_trisolve)

__version__ = "0.1.0"
