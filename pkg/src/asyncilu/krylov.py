"""Restarted flexible GMRES with right preconditioning.

The preconditioner is anything with an ``apply(v)`` method or a plain
callable; it may change between applications (asynchronous triangular
solves do), which is exactly what the flexible variant tolerates.  One
preconditioned basis vector is stored per inner iteration.
"""

from dataclasses import dataclass

import numpy as np

from .blockmat import check_vector, spmv
from .sweeps import SweepConfig
from .trisolve import (DEFAULT_APPLY_SWEEPS, TriangularSide, async_trisolve,
                       sequential_trisolve)

# Givens-estimate drift beyond which a second orthogonalization pass runs.
REORTH_THRESHOLD = 1e-8


@dataclass
class KrylovResult:
    """Outcome of a solve: iterate, count, true-residual history and status."""

    solution: np.ndarray
    iterations: int
    residual_history: np.ndarray
    converged: bool
    stop_reason: str  # "rel_tol" | "max_iter" | "breakdown"


def _as_apply(M):
    if M is None:
        return lambda v: v
    if callable(M):
        return M
    return M.apply


def fgmres(A, b, M=None, restart=30, rel_tol=1e-2, max_iters=60, x0=None):
    """Flexible GMRES(restart) for ``A x = b`` with right preconditioner M.

    Stops when the true residual satisfies
    ``norm(b - A x) <= rel_tol * norm(b - A x0)`` or after ``max_iters``
    total inner iterations.  Within a cycle the Givens-rotation residual
    estimate drives the stopping test; it is verified against the true
    residual before convergence is declared and at every cycle end, since
    a varying preconditioner invalidates the usual recurrence shortcuts.
    An Arnoldi breakdown before convergence is reported, not raised.
    """
    b = check_vector(A, b)
    apply_m = _as_apply(M)
    n = b.shape[0]
    x = np.zeros(n) if x0 is None else check_vector(A, x0).copy()

    r = b - spmv(A, x)
    r0_norm = float(np.linalg.norm(r))
    history = [r0_norm]
    if r0_norm == 0.0:
        return KrylovResult(x, 0, np.array(history), True, "rel_tol")
    target = rel_tol * r0_norm

    iterations = 0
    stop_reason = "max_iter"
    converged = False
    while iterations < max_iters:
        beta = float(np.linalg.norm(r))
        if beta <= target:
            converged, stop_reason = True, "rel_tol"
            break
        V = np.zeros((restart + 1, n))
        Z = np.zeros((restart, n))
        H = np.zeros((restart + 1, restart))
        cs = np.zeros(restart)
        sn = np.zeros(restart)
        g = np.zeros(restart + 1)
        g[0] = beta
        V[0] = r / beta
        width = 0
        broke_down = False
        for j in range(restart):
            if iterations >= max_iters:
                break
            Z[j] = apply_m(V[j])
            w = spmv(A, Z[j])
            norm_before = float(np.linalg.norm(w))
            for i in range(j + 1):
                H[i, j] = float(w @ V[i])
                w -= H[i, j] * V[i]
            norm_after = float(np.linalg.norm(w))
            if norm_before > 0.0 and norm_after < REORTH_THRESHOLD * norm_before:
                for i in range(j + 1):
                    h2 = float(w @ V[i])
                    H[i, j] += h2
                    w -= h2 * V[i]
                norm_after = float(np.linalg.norm(w))
            H[j + 1, j] = norm_after
            # apply stored rotations, then form the new one
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = np.hypot(H[j, j], H[j + 1, j])
            if denom == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j], sn[j] = H[j, j] / denom, H[j + 1, j] / denom
            H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            width = j + 1
            iterations += 1

            x_j = x + Z[:width].T @ _solve_upper(H[:width, :width], g[:width])
            true_res = float(np.linalg.norm(b - spmv(A, x_j)))
            history.append(true_res)

            if norm_after == 0.0:
                broke_down = True
                break
            V[j + 1] = w / norm_after
            if abs(g[j + 1]) <= target:
                break
        if width:
            y = _solve_upper(H[:width, :width], g[:width])
            x = x + Z[:width].T @ y
        r = b - spmv(A, x)
        true_res = float(np.linalg.norm(r))
        history[-1] = true_res  # cycle-end verification of the estimate
        if true_res <= target:
            converged, stop_reason = True, "rel_tol"
            break
        if broke_down:
            stop_reason = "breakdown"
            break
    return KrylovResult(x, iterations, np.array(history), converged, stop_reason)


def _solve_upper(R, g):
    y = np.zeros_like(g)
    for i in range(len(g) - 1, -1, -1):
        if R[i, i] == 0.0:  # degenerate breakdown column; drop its weight
            y[i] = 0.0
        else:
            y[i] = (g[i] - R[i, i + 1:] @ y[i + 1:]) / R[i, i]
    return y


class IluPreconditioner:
    """Right preconditioner applying the two triangular solves.

    ``apply(v)`` runs the forward solve on L then the backward solve on U,
    asynchronously with ``apply_cfg`` sweeps each, or exactly when
    ``exact`` is set.  The two solves are separated by a full barrier: the
    intermediate vector is complete before the upper solve reads it.
    """

    def __init__(self, factors, apply_cfg=None, exact=False):
        from .ilu import default_chunk_size

        self.factors = factors
        self.exact = exact
        if apply_cfg is None:
            apply_cfg = SweepConfig(
                DEFAULT_APPLY_SWEEPS,
                chunk_size=default_chunk_size(factors.block_size))
        self.apply_cfg = apply_cfg

    def apply(self, v):
        if self.exact:
            y = sequential_trisolve(self.factors, TriangularSide.LOWER_UNIT, v)
            return sequential_trisolve(self.factors, TriangularSide.UPPER, y)
        y = async_trisolve(self.factors, TriangularSide.LOWER_UNIT, v,
                           self.apply_cfg)
        return async_trisolve(self.factors, TriangularSide.UPPER, y,
                              self.apply_cfg)


def ilu_preconditioner(factors, apply_cfg=None, exact=False):
    """Preconditioner contract for the given factors (see IluPreconditioner)."""
    return IluPreconditioner(factors, apply_cfg, exact)
