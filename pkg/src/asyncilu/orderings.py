"""Cell and block-row orderings.

Reverse Cuthill-McKee, one-way dissection, anisotropy-driven line
detection with line and hybrid line-X orderings, and symmetric
permutation of matrices and vectors.  All orderings are deterministic
pure functions; tie-breaking rules are fixed (lowest original index).
"""

from dataclasses import dataclass, field

import numpy as np

from .blockmat import BlockSparseMatrix
from .errors import DimensionMismatch

DEFAULT_ANISOTROPY_THRESHOLD = 4.0
DEFAULT_LEAF_SIZE = 64


@dataclass(frozen=True)
class Permutation:
    """Bijective renumbering: ``perm[new] = old`` and ``inverse[old] = new``."""

    perm: np.ndarray
    inverse: np.ndarray = field(default=None)

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.int64)
        object.__setattr__(self, "perm", perm)
        n = perm.shape[0]
        if not np.array_equal(np.sort(perm), np.arange(n)):
            raise ValueError("perm is not a bijection on 0..n-1")
        inverse = np.empty(n, dtype=np.int64)
        inverse[perm] = np.arange(n)
        object.__setattr__(self, "inverse", inverse)

    @property
    def n(self):
        return self.perm.shape[0]

    @staticmethod
    def identity(n):
        return Permutation(np.arange(n))


@dataclass
class CellGrid:
    """Face-neighbour graph of cells with centers and boundary flags."""

    indptr: np.ndarray
    indices: np.ndarray
    centers: np.ndarray
    boundary: np.ndarray

    @property
    def n_cells(self):
        return self.indptr.shape[0] - 1

    def neighbors(self, i):
        return self.indices[self.indptr[i]:self.indptr[i + 1]]


@dataclass
class LineSet:
    """Lines of strongly coupled cells plus the remaining isotropic cells.

    Lines and isotropic cells partition all cells; each line has length
    of at least 2 and runs boundary to interior along grid neighbours.
    """

    lines: list
    isotropic_cells: np.ndarray


def _as_adjacency(obj):
    """Normalize a graph argument to CSR (indptr, indices) without self loops."""
    if isinstance(obj, CellGrid):
        return obj.indptr, obj.indices
    if isinstance(obj, BlockSparseMatrix):
        indptr = np.zeros(obj.n_block_rows + 1, dtype=np.int64)
        indices = []
        for i in range(obj.n_block_rows):
            row = obj.col_idx[obj.row_ptr[i]:obj.row_ptr[i + 1]]
            row = row[row != i]
            indices.append(row)
            indptr[i + 1] = indptr[i] + row.shape[0]
        return indptr, np.concatenate(indices) if indices else np.empty(0, np.int64)
    indptr, indices = obj
    return np.asarray(indptr, dtype=np.int64), np.asarray(indices, dtype=np.int64)


def _bfs_levels(indptr, indices, root, unvisited):
    """Level sets of the component of ``root`` restricted to ``unvisited``."""
    levels = [[root]]
    unvisited[root] = False
    frontier = [root]
    while frontier:
        nxt = []
        for u in frontier:
            for v in indices[indptr[u]:indptr[u + 1]]:
                if unvisited[v]:
                    unvisited[v] = False
                    nxt.append(int(v))
        if nxt:
            levels.append(sorted(nxt))
        frontier = nxt
    return levels


def _pseudo_peripheral(indptr, indices, component):
    """Repeated-BFS endpoint search from a minimum-degree vertex.

    Candidates that do not strictly increase the eccentricity are
    discarded, so ties keep the earlier (lowest-index seeded) root.
    """
    degrees = indptr[1:] - indptr[:-1]
    comp = sorted(component)
    root = min(comp, key=lambda v: (degrees[v], v))
    in_comp = np.zeros(indptr.shape[0] - 1, dtype=bool)
    while True:
        in_comp[comp] = True
        levels = _bfs_levels(indptr, indices, root, in_comp)
        cand = min(levels[-1], key=lambda v: (degrees[v], v))
        if cand == root:
            return root
        in_comp[comp] = True
        cand_levels = _bfs_levels(indptr, indices, cand, in_comp)
        if len(cand_levels) <= len(levels):
            return root
        root = cand


def _components(indptr, indices):
    n = indptr.shape[0] - 1
    seen = np.zeros(n, dtype=bool)
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        stack, comp = [s], []
        seen[s] = True
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in indices[indptr[u]:indptr[u + 1]]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(int(v))
        comps.append(comp)
    return comps


def rcm_order(adjacency):
    """Reverse Cuthill-McKee ordering.

    Per component, a Cuthill-McKee breadth-first order from a
    pseudo-peripheral start vertex (neighbours visited in increasing
    degree, ties by lowest index); the concatenated order is reversed.
    An empty graph yields an empty permutation.
    """
    indptr, indices = _as_adjacency(adjacency)
    n = indptr.shape[0] - 1
    degrees = indptr[1:] - indptr[:-1]
    order = []
    visited = np.zeros(n, dtype=bool)
    for comp in _components(indptr, indices):
        root = _pseudo_peripheral(indptr, indices, comp)
        queue = [root]
        visited[root] = True
        while queue:
            u = queue.pop(0)
            order.append(u)
            nbrs = [int(v) for v in indices[indptr[u]:indptr[u + 1]]
                    if not visited[v]]
            nbrs.sort(key=lambda v: (degrees[v], v))
            for v in nbrs:
                visited[v] = True
            queue.extend(nbrs)
    return Permutation(np.array(order[::-1], dtype=np.int64))


def one_way_dissection_order(adjacency, leaf_size=DEFAULT_LEAF_SIZE):
    """One-way dissection: recursive bisection by BFS level-set median.

    The separator is the median level of a BFS from a pseudo-peripheral
    vertex; both sides recurse until they hold at most ``leaf_size``
    vertices, and separator vertices are numbered after the sub-blocks
    they separate.
    """
    indptr, indices = _as_adjacency(adjacency)
    order = []

    def dissect(component):
        if len(component) <= leaf_size:
            order.extend(sorted(component))
            return
        root = _pseudo_peripheral(indptr, indices, component)
        mask = np.zeros(indptr.shape[0] - 1, dtype=bool)
        mask[component] = True
        levels = _bfs_levels(indptr, indices, root, mask)
        if len(levels) < 3:
            order.extend(sorted(component))
            return
        mid = len(levels) // 2
        separator = levels[mid]
        near = [v for lev in levels[:mid] for v in lev]
        far = [v for lev in levels[mid + 1:] for v in lev]
        for side in (near, far):
            in_side = np.zeros(indptr.shape[0] - 1, dtype=bool)
            in_side[side] = True
            for sub in _components_within(indptr, indices, side, in_side):
                dissect(sub)
        order.extend(sorted(separator))

    for comp in _components(indptr, indices):
        dissect(comp)
    return Permutation(np.array(order, dtype=np.int64))


def _components_within(indptr, indices, vertices, mask):
    comps = []
    seen = np.zeros(indptr.shape[0] - 1, dtype=bool)
    for s in sorted(vertices):
        if seen[s]:
            continue
        stack, comp = [s], []
        seen[s] = True
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in indices[indptr[u]:indptr[u + 1]]:
                if mask[v] and not seen[v]:
                    seen[v] = True
                    stack.append(int(v))
        comps.append(comp)
    return comps


def cell_anisotropy(grid, i):
    """Ratio of max to min cell-center distance among face neighbours."""
    nbrs = grid.neighbors(i)
    if nbrs.shape[0] == 0:
        return 1.0
    d = np.linalg.norm(grid.centers[nbrs] - grid.centers[i], axis=1)
    return float(d.max() / d.min())


def find_lines(grid, anisotropy_threshold=DEFAULT_ANISOTROPY_THRESHOLD):
    """Greedy march of lines of strongly coupled cells from the boundary.

    Seeds are untaken boundary cells whose local anisotropy exceeds the
    threshold; each line extends along the untaken neighbour of smallest
    cell-center distance (ties by lower cell index) while that neighbour
    still qualifies.  Length-1 lines are discarded into the isotropic set.
    """
    if anisotropy_threshold <= 1.0:
        raise ValueError("anisotropy_threshold must be > 1")
    n = grid.n_cells
    taken = np.zeros(n, dtype=bool)
    lines = []
    for seed in range(n):
        if taken[seed] or not grid.boundary[seed]:
            continue
        if cell_anisotropy(grid, seed) <= anisotropy_threshold:
            continue
        line = [seed]
        taken[seed] = True
        current = seed
        while True:
            cands = [int(v) for v in grid.neighbors(current) if not taken[v]]
            if not cands:
                break
            dist = np.linalg.norm(grid.centers[cands] - grid.centers[current],
                                  axis=1)
            nxt = cands[int(np.lexsort((cands, dist))[0])]
            if cell_anisotropy(grid, nxt) <= anisotropy_threshold:
                break
            line.append(nxt)
            taken[nxt] = True
            current = nxt
        if len(line) >= 2:
            lines.append(np.array(line, dtype=np.int64))
        else:
            taken[seed] = False
    iso = np.array([c for c in range(n) if not taken[c]], dtype=np.int64)
    return LineSet(lines, iso)


def line_order(lines):
    """Each line contiguous in march order, then the isotropic cells."""
    parts = [np.concatenate(lines.lines)] if lines.lines else []
    parts.append(lines.isotropic_cells)
    return Permutation(np.concatenate(parts).astype(np.int64))


def _condensed_graph(lines, grid):
    """Graph whose vertices are lines and isotropic cells.

    Two lines connect when any of their member cells neighbour; an
    isotropic cell connects to a line it neighbours and to neighbouring
    isotropic cells.
    """
    n = grid.n_cells
    vertex_of = np.empty(n, dtype=np.int64)
    for v, line in enumerate(lines.lines):
        vertex_of[line] = v
    base = len(lines.lines)
    for k, c in enumerate(lines.isotropic_cells):
        vertex_of[c] = base + k
    n_vert = base + lines.isotropic_cells.shape[0]
    edges = [set() for _ in range(n_vert)]
    for c in range(n):
        vc = vertex_of[c]
        for nb in grid.neighbors(c):
            vn = vertex_of[nb]
            if vn != vc:
                edges[vc].add(int(vn))
                edges[vn].add(int(vc))
    indptr = np.zeros(n_vert + 1, dtype=np.int64)
    indices = []
    for v in range(n_vert):
        nbrs = sorted(edges[v])
        indices.extend(nbrs)
        indptr[v + 1] = indptr[v] + len(nbrs)
    return indptr, np.array(indices, dtype=np.int64), vertex_of


def hybrid_line_order(lines, grid, inner="rcm", leaf_size=DEFAULT_LEAF_SIZE):
    """Order the condensed line/isotropic-cell graph by ``inner`` and expand.

    ``inner`` is ``"rcm"`` or ``"1wd"``.  Cells of each line stay
    contiguous (march order) in the result.
    """
    indptr, indices, _ = _condensed_graph(lines, grid)
    if inner == "rcm":
        p = rcm_order((indptr, indices))
    elif inner == "1wd":
        p = one_way_dissection_order((indptr, indices), leaf_size=leaf_size)
    else:
        raise ValueError(f"unknown inner ordering {inner!r}")
    base = len(lines.lines)
    out = []
    for v in p.perm:
        if v < base:
            out.extend(lines.lines[v])
        else:
            out.append(int(lines.isotropic_cells[v - base]))
    return Permutation(np.array(out, dtype=np.int64))


def permute_matrix(A, p):
    """Symmetric block permutation P A P^T; round-trips bit for bit."""
    if p.n != A.n_block_rows:
        raise DimensionMismatch("permutation length does not match block rows")
    b = A.block_size
    row_ptr = np.zeros(A.n_block_rows + 1, dtype=np.int64)
    col_idx = np.empty(A.nnz_blocks, dtype=np.int64)
    values = np.empty_like(A.values)
    out = 0
    for new_i in range(A.n_block_rows):
        old_i = p.perm[new_i]
        beg, end = A.row_ptr[old_i], A.row_ptr[old_i + 1]
        new_cols = p.inverse[A.col_idx[beg:end]]
        take = np.argsort(new_cols, kind="stable")
        cnt = end - beg
        col_idx[out:out + cnt] = new_cols[take]
        values[out:out + cnt] = A.values[beg:end][take]
        out += cnt
        row_ptr[new_i + 1] = out
    return BlockSparseMatrix(A.n_block_rows, b, row_ptr, col_idx, values)


def permute_vector(v, p, block_size=1):
    """Reorder a block vector to match ``permute_matrix``: new_i <- old perm[new_i]."""
    v = np.asarray(v)
    b = block_size
    if v.shape[0] != p.n * b:
        raise DimensionMismatch("vector length does not match permutation")
    return v.reshape(p.n, b)[p.perm].reshape(-1)


def unpermute_vector(v, p, block_size=1):
    """Inverse of :func:`permute_vector`."""
    v = np.asarray(v)
    b = block_size
    if v.shape[0] != p.n * b:
        raise DimensionMismatch("vector length does not match permutation")
    return v.reshape(p.n, b)[p.inverse].reshape(-1)


def matrix_bandwidth(A):
    """Scalar bandwidth implied by the stored block pattern."""
    if A.n_block_rows == 0:
        return 0
    width = 0
    for i in range(A.n_block_rows):
        for p in range(A.row_ptr[i], A.row_ptr[i + 1]):
            width = max(width, abs(int(A.col_idx[p]) - i))
    return width * A.block_size + A.block_size - 1


def graph_bandwidth(adjacency, perm=None):
    """Bandwidth max |new(u) - new(v)| over edges under an optional ordering."""
    indptr, indices = _as_adjacency(adjacency)
    n = indptr.shape[0] - 1
    new = np.arange(n) if perm is None else perm.inverse
    width = 0
    for u in range(n):
        for v in indices[indptr[u]:indptr[u + 1]]:
            width = max(width, abs(int(new[u]) - int(new[v])))
    return width
