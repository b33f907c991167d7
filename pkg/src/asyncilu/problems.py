"""Desk-scale test problem generators.

Structured 2-D five-point stencils in scalar and point-block form, plus a
wall-stretched grid whose near-boundary cells are anisotropic enough for
line detection.  Everything is deterministic given the seed.
"""

from dataclasses import dataclass

import numpy as np

from .blockmat import BlockSparseMatrix
from .errors import InvalidSpec
from .orderings import CellGrid

KINDS = ("poisson", "convdiff", "blockcoupled", "boundarylayer")


@dataclass(frozen=True)
class ProblemSpec:
    """Description of a generated test problem.

    ``kind`` is one of ``poisson``, ``convdiff``, ``blockcoupled`` or
    ``boundarylayer``.  ``velocity`` feeds first-order upwind convection,
    ``coupling`` scales the random in-block coupling of block problems,
    ``stretch``/``n_layers`` control wall-normal grid stretching.
    """

    kind: str
    nx: int
    ny: int
    block_size: int = 1
    velocity: tuple = (0.0, 0.0)
    coupling: float = 0.1
    stretch: float = 1.5
    n_layers: int = 8
    seed: int = 0

    def validate(self):
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown problem kind {self.kind!r}")
        if self.nx < 1 or self.ny < 1:
            raise InvalidSpec("nx and ny must be positive")
        if self.block_size < 1:
            raise InvalidSpec("block_size must be >= 1")
        if self.stretch < 1.0:
            raise InvalidSpec("stretch must be >= 1")
        if self.kind == "boundarylayer" and self.n_layers > self.ny:
            raise InvalidSpec("n_layers cannot exceed ny")


def _structured_grid(nx, ny, dx, dys):
    """Cell grid of an nx-by-ny structured quad mesh with given row heights."""
    n = nx * ny
    centers = np.empty((n, 2))
    ys = np.concatenate(([0.0], np.cumsum(dys)))
    for j in range(ny):
        yc = 0.5 * (ys[j] + ys[j + 1])
        for i in range(nx):
            centers[j * nx + i] = ((i + 0.5) * dx, yc)
    indptr = np.zeros(n + 1, dtype=np.int64)
    indices = []
    boundary = np.zeros(n, dtype=bool)
    for j in range(ny):
        for i in range(nx):
            c = j * nx + i
            nbrs = []
            if i > 0:
                nbrs.append(c - 1)
            if i < nx - 1:
                nbrs.append(c + 1)
            if j > 0:
                nbrs.append(c - nx)
            if j < ny - 1:
                nbrs.append(c + nx)
            indices.extend(sorted(nbrs))
            indptr[c + 1] = indptr[c] + len(nbrs)
            boundary[c] = i == 0 or i == nx - 1 or j == 0 or j == ny - 1
    return CellGrid(indptr, np.array(indices, dtype=np.int64), centers, boundary)


def _scalar_stencil(spec, grid):
    """Five-point coefficients per cell: dict neighbour -> value, plus diagonal.

    Poisson/convdiff use the unit-spacing stencil (diagonal 4, off -1) with
    first-order upwinding of the convection term; the boundary-layer kind
    uses finite-volume face weights (face area over center distance) so the
    matrix reflects the grid anisotropy, with Dirichlet walls folded into
    the diagonal.
    """
    nx, ny = spec.nx, spec.ny
    n = nx * ny
    rows = []
    if spec.kind in ("poisson", "convdiff", "blockcoupled"):
        vx, vy = spec.velocity if spec.kind != "poisson" else (0.0, 0.0)
        for j in range(ny):
            for i in range(nx):
                c = j * nx + i
                off = {}
                diag = 4.0
                if i > 0:
                    off[c - 1] = -1.0
                if i < nx - 1:
                    off[c + 1] = -1.0
                if j > 0:
                    off[c - nx] = -1.0
                if j < ny - 1:
                    off[c + nx] = -1.0
                # first-order upwind convection
                if vx > 0.0:
                    diag += vx
                    if i > 0:
                        off[c - 1] = off.get(c - 1, 0.0) - vx
                elif vx < 0.0:
                    diag -= vx
                    if i < nx - 1:
                        off[c + 1] = off.get(c + 1, 0.0) + vx
                if vy > 0.0:
                    diag += vy
                    if j > 0:
                        off[c - nx] = off.get(c - nx, 0.0) - vy
                elif vy < 0.0:
                    diag -= vy
                    if j < ny - 1:
                        off[c + nx] = off.get(c + nx, 0.0) + vy
                rows.append((diag, off))
    else:  # boundarylayer
        dx = 1.0 / nx
        dys = _boundary_layer_heights(spec, dx)
        grid_ys = np.concatenate(([0.0], np.cumsum(dys)))
        for j in range(ny):
            dy = dys[j]
            for i in range(nx):
                c = j * nx + i
                off = {}
                diag = 0.0
                # vertical faces (area dy), horizontal neighbour distance dx
                for di, cond in ((-1, i > 0), (1, i < nx - 1)):
                    w = dy / dx
                    if cond:
                        off[c + di] = -w
                        diag += w
                    else:
                        diag += 2.0 * w  # Dirichlet wall at half distance
                # horizontal faces (area dx), vertical distances to centers
                for dj, cond in ((-1, j > 0), (1, j < ny - 1)):
                    if cond:
                        other = dys[j + dj]
                        w = dx / (0.5 * (dy + other))
                        off[c + dj * nx] = -w
                        diag += w
                    else:
                        w = dx / (0.5 * dy)
                        diag += 2.0 * w
                rows.append((diag, off))
        del grid_ys
    return rows


def _boundary_layer_heights(spec, dx):
    """Row heights: geometric growth from the wall, isotropic above."""
    dys = np.full(spec.ny, dx)
    for j in range(min(spec.n_layers, spec.ny)):
        dys[j] = dx / spec.stretch ** (spec.n_layers - j)
    return dys


def _blockify(rows, spec, rng):
    """Lift a scalar stencil to b x b blocks.

    Every scalar coefficient c becomes ``c I + coupling * Z`` with Z a
    random zero-diagonal matrix, so the block size 1 case degenerates to
    the scalar stencil exactly.
    """
    b = spec.block_size
    n = len(rows)
    blocks = {}
    for c, (diag, off) in enumerate(rows):
        blocks[(c, c)] = diag * np.eye(b) + spec.coupling * _zero_diag(rng, b)
        for nb, v in off.items():
            blocks[(c, nb)] = v * np.eye(b) + spec.coupling * _zero_diag(rng, b)
    return BlockSparseMatrix.from_block_dict(n, b, blocks)


def _zero_diag(rng, b):
    z = rng.standard_normal((b, b))
    np.fill_diagonal(z, 0.0)
    return z


def generate(spec):
    """Build ``(matrix, rhs, grid)`` for a problem specification."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "boundarylayer":
        dx = 1.0 / spec.nx
        grid = _structured_grid(spec.nx, spec.ny, dx,
                                _boundary_layer_heights(spec, dx))
    else:
        grid = _structured_grid(spec.nx, spec.ny, 1.0,
                                np.ones(spec.ny))
    rows = _scalar_stencil(spec, grid)
    A = _blockify(rows, spec, rng)
    rhs = rng.standard_normal(A.n)
    return A, rhs, grid


def add_diagonal_shift(A, sigma):
    """A plus sigma times the mean |scalar diagonal| times the identity.

    Used to emulate a pseudo-time-step family: large shifts make the
    matrix strongly diagonally dominant, shrinking shifts relax it.
    """
    b = A.block_size
    diag_mean = np.mean([np.abs(np.diag(A.values[A.diag_pos[i]])).mean()
                         for i in range(A.n_block_rows)])
    values = A.values.copy()
    for i in range(A.n_block_rows):
        values[A.diag_pos[i]] += sigma * diag_mean * np.eye(b)
    return BlockSparseMatrix(A.n_block_rows, b, A.row_ptr.copy(),
                             A.col_idx.copy(), values)


def shifted_family(A, n_steps, sigma0=10.0, ratio=0.5):
    """Geometrically decreasing diagonal shifts, largest first."""
    return [add_diagonal_shift(A, sigma0 * ratio ** k) for k in range(n_steps)]
