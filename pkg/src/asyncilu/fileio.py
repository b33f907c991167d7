"""Matrix Market, grid and CSV report files.

Matrix Market files are coordinate real general (symmetric files are
expanded on read), 1-based on disk, values printed with 17 significant
digits so write/read round-trips reproduce doubles exactly.  Grid files
are a small plain-text format; CSV reports use fixed column sets per
report type.
"""

import csv

import numpy as np

from .blockmat import BlockSparseMatrix, group_scalar_blocks
from .errors import ParseError
from .orderings import CellGrid

SWEEP_COLUMNS = ("ordering", "threads", "build_sweeps", "apply_sweeps",
                 "fgmres_iters", "converged", "wall_ms", "rel_dev")
DIAG_COLUMNS = ("step", "ilu_residual_1norm", "ilu_residual_relative",
                "L_jacobi_maxnorm", "U_jacobi_maxnorm", "variant")
SCALE_COLUMNS = ("threads", "total_precond_ms", "speedup", "fgmres_iters")


def write_matrix_market(A, path):
    """Write as coordinate real general, one scalar entry per stored value."""
    b = A.block_size
    with open(path, "w") as f:
        f.write("%%MatrixMarket matrix coordinate real general\n")
        f.write(f"{A.n} {A.n} {A.nnz_scalars}\n")
        for i in range(A.n_block_rows):
            for p in range(A.row_ptr[i], A.row_ptr[i + 1]):
                j = A.col_idx[p]
                for k in range(b):
                    for l in range(b):
                        f.write(f"{i * b + k + 1} {j * b + l + 1} "
                                f"{A.values[p, k, l]:.17g}\n")


def read_matrix_market(path, block_size=1):
    """Read a coordinate real matrix, optionally grouping into dense blocks.

    Symmetric-tagged files are expanded to general storage.  For
    ``block_size > 1`` the scalar dimension must tile into full blocks;
    scalar entries missing inside a touched block become explicit zeros.
    """
    entries = {}
    n = None
    symmetric = False
    with open(path) as f:
        line_no = 0
        header = None
        for line in f:
            line_no += 1
            if header is None:
                header = line.strip().lower()
                if not header.startswith("%%matrixmarket"):
                    raise ParseError(line_no, "missing MatrixMarket header")
                fields = header.split()
                if ("coordinate" not in fields or "real" not in fields
                        or "matrix" not in fields):
                    raise ParseError(line_no, "not a real coordinate matrix")
                if "general" in fields:
                    symmetric = False
                elif "symmetric" in fields:
                    symmetric = True
                else:
                    raise ParseError(line_no, "unsupported symmetry tag")
                continue
            stripped = line.strip()
            if not stripped or stripped.startswith("%"):
                continue
            parts = stripped.split()
            if n is None:
                if len(parts) != 3:
                    raise ParseError(line_no, "expected 'rows cols nnz'")
                try:
                    nr, nc, _nnz = (int(x) for x in parts)
                except ValueError:
                    raise ParseError(line_no, "bad size line") from None
                if nr != nc:
                    raise ParseError(line_no, "matrix must be square")
                n = nr
                continue
            if len(parts) != 3:
                raise ParseError(line_no, "expected 'i j value'")
            try:
                i, j, v = int(parts[0]) - 1, int(parts[1]) - 1, float(parts[2])
            except ValueError:
                raise ParseError(line_no, "bad entry line") from None
            if not (0 <= i < n and 0 <= j < n):
                raise ParseError(line_no, "index out of range")
            entries[(i, j)] = v
            if symmetric and i != j:
                entries[(j, i)] = v
    if n is None:
        raise ParseError(0, "file has no size line")
    scalar = _scalar_from_entries(n, entries)
    if block_size == 1:
        return scalar
    return group_scalar_blocks(scalar, block_size)


def _scalar_from_entries(n, entries):
    row_ptr = np.zeros(n + 1, dtype=np.int64)
    items = sorted(entries.items())
    for (i, _j), _v in items:
        row_ptr[i + 1] += 1
    np.cumsum(row_ptr, out=row_ptr)
    col_idx = np.array([j for (_i, j), _v in items], dtype=np.int64)
    values = np.array([v for _k, v in items]).reshape(-1, 1, 1)
    return BlockSparseMatrix(n, 1, row_ptr, col_idx, values)


def write_factor_files(factors, lower_path, upper_path):
    """Dump the triangular factors; the unit diagonal of L is omitted."""
    A = factors.pattern
    b = A.block_size
    strict = {}
    upper = {}
    for i in range(A.n_block_rows):
        for p in range(A.row_ptr[i], A.row_ptr[i + 1]):
            j = int(A.col_idx[p])
            if j < i:
                strict[(i, j)] = factors.values[p]
            else:
                upper[(i, j)] = factors.values[p]
    _write_block_entries(strict, A.n, b, lower_path)
    _write_block_entries(upper, A.n, b, upper_path)


def _write_block_entries(blocks, n, b, path):
    count = len(blocks) * b * b
    with open(path, "w") as f:
        f.write("%%MatrixMarket matrix coordinate real general\n")
        f.write(f"{n} {n} {count}\n")
        for (i, j), blk in sorted(blocks.items()):
            for k in range(b):
                for l in range(b):
                    f.write(f"{i * b + k + 1} {j * b + l + 1} {blk[k, l]:.17g}\n")


def write_grid(grid, path):
    """Plain-text grid: cell count, adjacency, centers, boundary flags."""
    with open(path, "w") as f:
        f.write(f"{grid.n_cells}\n")
        for i in range(grid.n_cells):
            nbrs = grid.neighbors(i)
            f.write(" ".join([str(nbrs.shape[0])] + [str(int(v)) for v in nbrs]))
            f.write("\n")
        for c in grid.centers:
            f.write(" ".join(f"{x:.17g}" for x in c) + "\n")
        for flag in grid.boundary:
            f.write(f"{int(flag)}\n")


def read_grid(path):
    with open(path) as f:
        lines = [ln.strip() for ln in f]
    try:
        n = int(lines[0])
        indptr = np.zeros(n + 1, dtype=np.int64)
        indices = []
        for i in range(n):
            parts = lines[1 + i].split()
            k = int(parts[0])
            if len(parts) != k + 1:
                raise ParseError(2 + i, "adjacency count mismatch")
            indices.extend(int(x) for x in parts[1:])
            indptr[i + 1] = indptr[i] + k
        centers = np.array([[float(x) for x in lines[1 + n + i].split()]
                            for i in range(n)])
        boundary = np.array([bool(int(lines[1 + 2 * n + i])) for i in range(n)])
    except (IndexError, ValueError) as exc:
        raise ParseError(0, f"malformed grid file: {exc}") from None
    return CellGrid(indptr, np.array(indices, dtype=np.int64), centers, boundary)


def write_csv_report(rows, path, columns):
    """Header plus records in a fixed column order; values may be blank."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row.get(c, "")) for c in columns])


def _format_cell(v):
    if v is None or v == "":
        return ""
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return f"{v:.17g}"
    return v


def read_csv_report(path):
    """Re-parse a report into dicts of strings keyed by the header."""
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        return list(reader)
