"""Scikit-learn style estimator facade.

Thin wrappers giving the preconditioner and the ordering algorithms the
familiar ``fit`` / ``transform`` / ``get_params`` surface so they compose
with the wider ecosystem.  The functional core lives in the other
modules; these classes only orchestrate it.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import ilu as _ilu
from . import orderings as _ord
from .blockmat import BlockSparseMatrix
from .errors import DimensionMismatch
from .krylov import IluPreconditioner
from .sweeps import SweepConfig

ORDERING_METHODS = ("natural", "rcm", "1wd", "line", "line-rcm", "line-1wd")


def check_block_matrix(A):
    """Validate that A is a square block sparse matrix."""
    if not isinstance(A, BlockSparseMatrix):
        raise TypeError(f"expected BlockSparseMatrix, got {type(A).__name__}")
    return A


def check_operand(A, X):
    """Validate a vector or a stack of row vectors against A's dimension."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        if X.shape[0] != A.n:
            raise DimensionMismatch(f"operand length {X.shape[0]} != {A.n}")
    elif X.ndim == 2:
        if X.shape[1] != A.n:
            raise DimensionMismatch(f"operand width {X.shape[1]} != {A.n}")
    else:
        raise DimensionMismatch("operand must be 1-D or 2-D")
    return X


class AsyncILUPreconditioner(BaseEstimator, TransformerMixin):
    """Asynchronous ILU(0) preconditioner with an estimator API.

    ``fit(A)`` factorizes A (asynchronous fixed-point sweeps, or the
    sequential classic when ``exact_build`` is set); ``transform`` applies
    the preconditioner to one vector or to each row of a 2-D array.

    Parameters
    ----------
    build_sweeps, apply_sweeps : int
        Fixed-point sweep counts for factorization and for each
        triangular solve.
    n_workers : int
        Worker threads for both phases.
    chunk_size : int or None
        Work items per dynamically claimed chunk; None picks the default
        for block or scalar matrices.
    exact_build, exact_apply : bool
        Use the sequential factorization / exact substitution instead of
        asynchronous sweeps.
    symmetric_scale : bool
        Symmetrically scale A to unit diagonal magnitude before
        factorizing; ``transform`` then preconditions the scaled system.
    """

    def __init__(self, build_sweeps=1, apply_sweeps=3, n_workers=1,
                 chunk_size=None, exact_build=False, exact_apply=False,
                 symmetric_scale=False):
        self.build_sweeps = build_sweeps
        self.apply_sweeps = apply_sweeps
        self.n_workers = n_workers
        self.chunk_size = chunk_size
        self.exact_build = exact_build
        self.exact_apply = exact_apply
        self.symmetric_scale = symmetric_scale

    def _chunk(self, A):
        return self.chunk_size or _ilu.default_chunk_size(A.block_size)

    def fit(self, A, y=None):
        A = check_block_matrix(A)
        if self.symmetric_scale:
            A, self.scaling_ = _ilu.symmetric_scale(A)
        else:
            self.scaling_ = None
        self.matrix_ = A
        if self.exact_build:
            self.factors_ = _ilu.sequential_ilu0(A)
        else:
            cfg = SweepConfig(self.build_sweeps, self.n_workers, self._chunk(A))
            self.factors_ = _ilu.async_ilu0(A, cfg)
        self.build_substitutions_ = self.factors_.guard_substitutions
        apply_cfg = SweepConfig(self.apply_sweeps, self.n_workers, self._chunk(A))
        self._apply = IluPreconditioner(self.factors_, apply_cfg,
                                        exact=self.exact_apply)
        return self

    def _check_fitted(self):
        if not hasattr(self, "factors_"):
            raise NotFittedError("call fit(A) before using the preconditioner")

    def apply(self, v):
        """Preconditioner action on one vector (the solver-facing contract)."""
        self._check_fitted()
        return self._apply.apply(np.asarray(v, dtype=np.float64))

    def transform(self, X):
        self._check_fitted()
        X = check_operand(self.matrix_, X)
        if X.ndim == 1:
            return self.apply(X)
        return np.stack([self.apply(row) for row in X])


class GridReordering(BaseEstimator, TransformerMixin):
    """Cell/block-row reordering with an estimator API.

    ``fit(A, grid=...)`` computes the permutation (line-based methods need
    the cell grid); ``transform`` applies it symmetrically to a matrix.
    ``permutation_`` exposes the fitted :class:`Permutation`.
    """

    def __init__(self, method="rcm", anisotropy_threshold=4.0, leaf_size=64):
        self.method = method
        self.anisotropy_threshold = anisotropy_threshold
        self.leaf_size = leaf_size

    def fit(self, A, y=None, grid=None):
        A = check_block_matrix(A)
        if self.method not in ORDERING_METHODS:
            raise ValueError(f"unknown ordering {self.method!r}")
        if self.method in ("line", "line-rcm", "line-1wd"):
            if grid is None:
                raise ValueError(f"{self.method!r} ordering needs grid=")
            self.lines_ = _ord.find_lines(grid, self.anisotropy_threshold)
            if self.method == "line":
                self.permutation_ = _ord.line_order(self.lines_)
            else:
                inner = "rcm" if self.method == "line-rcm" else "1wd"
                self.permutation_ = _ord.hybrid_line_order(
                    self.lines_, grid, inner, leaf_size=self.leaf_size)
        else:
            self.lines_ = None
            if self.method == "natural":
                self.permutation_ = _ord.Permutation.identity(A.n_block_rows)
            elif self.method == "rcm":
                self.permutation_ = _ord.rcm_order(A)
            else:
                self.permutation_ = _ord.one_way_dissection_order(
                    A, leaf_size=self.leaf_size)
        return self

    def _check_fitted(self):
        if not hasattr(self, "permutation_"):
            raise NotFittedError("call fit(A) before transform")

    def transform(self, A):
        self._check_fitted()
        return _ord.permute_matrix(check_block_matrix(A), self.permutation_)

    def transform_vector(self, v, block_size=1):
        self._check_fitted()
        return _ord.permute_vector(v, self.permutation_, block_size)

    def inverse_transform_vector(self, v, block_size=1):
        self._check_fitted()
        return _ord.unpermute_vector(v, self.permutation_, block_size)
