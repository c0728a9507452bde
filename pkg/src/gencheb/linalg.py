"""Complex sparse matrices (CSR), vectors, and matrix actions.

Vectors are plain 1-D complex128 numpy arrays; `as_vector` validates
finiteness on construction.  The matvec accumulates row sums strictly in
ascending column order (np.add.at walks the stored entries in order), so
traces are bit-reproducible run to run.

Matrix Market exchange: `coordinate complex general`, 1-based indices,
entries written as `row col real imag` with shortest round-trip float
formatting, so read(write(A)) reproduces A bit-identically.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure, DimensionMismatch, UnreadableMatrix


def as_vector(values, n: int | None = None, name: str = "vector") -> np.ndarray:
    """Validate and return a 1-D complex128 array with finite entries."""
    v = np.asarray(values, dtype=complex)
    if v.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-D, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise DimensionMismatch(f"{name} has length {v.shape[0]}, expected {n}")
    if not np.all(np.isfinite(v.real)) or not np.all(np.isfinite(v.imag)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return v


class ComplexSparseMatrix:
    """Compressed-sparse-row matrix of complex entries.

    Invariants checked on construction: row_offsets is nondecreasing with
    length n_rows+1 and final entry nnz; column indices are in bounds and
    strictly increasing within each row.  Instances are immutable by
    convention (arrays are not written to after construction).
    """

    __slots__ = ("n_rows", "n_cols", "row_offsets", "col_indices", "values")

    def __init__(self, n_rows, n_cols, row_offsets, col_indices, values):
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        if self.n_rows <= 0 or self.n_cols <= 0:
            raise DimensionMismatch("matrix dimensions must be positive")
        self.row_offsets = np.asarray(row_offsets, dtype=np.int64)
        self.col_indices = np.asarray(col_indices, dtype=np.int64)
        self.values = np.asarray(values, dtype=complex)
        self._validate()

    def _validate(self):
        ro, ci = self.row_offsets, self.col_indices
        if ro.shape != (self.n_rows + 1,):
            raise ValueError("row_offsets must have length n_rows + 1")
        if ro[0] != 0 or np.any(np.diff(ro) < 0):
            raise ValueError("row_offsets must be nondecreasing and start at 0")
        nnz = int(ro[-1])
        if ci.shape != (nnz,) or self.values.shape != (nnz,):
            raise ValueError("col_indices/values length must equal row_offsets[-1]")
        if nnz:
            if ci.min() < 0 or ci.max() >= self.n_cols:
                raise ValueError("column index out of bounds")
            # strictly increasing within each row: diffs may only be <= 0 at
            # row boundaries
            inner = np.ones(nnz, dtype=bool)
            starts = ro[1:-1]
            inner[starts[starts < nnz]] = False  # first entry of each later row
            bad = (np.diff(ci) <= 0) & inner[1:]
            if np.any(bad):
                raise ValueError("column indices must strictly increase within a row")
        if not np.all(np.isfinite(self.values.real)) or not np.all(
            np.isfinite(self.values.imag)
        ):
            raise ValueError("matrix values contain NaN or Inf")

    # -- construction -----------------------------------------------------

    @classmethod
    def from_triplets(cls, n_rows, n_cols, rows, cols, values):
        """Build from COO triplets; duplicates are summed, order normalized."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=complex)
        if not (rows.shape == cols.shape == values.shape):
            raise DimensionMismatch("triplet arrays must have equal length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= n_rows:
                raise ValueError("row index out of bounds")
            if cols.min() < 0 or cols.max() >= n_cols:
                raise ValueError("column index out of bounds")
        order = np.lexsort((cols, rows))
        rows, cols, values = rows[order], cols[order], values[order]
        if rows.size:
            keys = rows * n_cols + cols
            first = np.concatenate(([True], np.diff(keys) != 0))
            idx = np.flatnonzero(first)
            summed = np.add.reduceat(values, idx)
            rows, cols, values = rows[first], cols[first], summed
        counts = np.bincount(rows, minlength=n_rows)
        offsets = np.concatenate(([0], np.cumsum(counts)))
        return cls(n_rows, n_cols, offsets, cols, values)

    @classmethod
    def from_dense(cls, dense, drop_tol: float = 0.0):
        """Build from a dense array, dropping entries with |a_ij| <= drop_tol."""
        a = np.asarray(dense, dtype=complex)
        if a.ndim != 2:
            raise DimensionMismatch("dense input must be 2-D")
        rows, cols = np.nonzero(np.abs(a) > drop_tol)
        return cls.from_triplets(a.shape[0], a.shape[1], rows, cols, a[rows, cols])

    @classmethod
    def identity(cls, n):
        idx = np.arange(n)
        return cls(n, n, np.arange(n + 1), idx, np.ones(n, dtype=complex))

    # -- queries -----------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return int(self.row_offsets[-1])

    @property
    def matvec_cost(self) -> int:
        """Sparse products consumed by one apply (unit for the base matrix)."""
        return 1

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=complex)
        rows = np.repeat(np.arange(self.n_rows), np.diff(self.row_offsets))
        out[rows, self.col_indices] = self.values
        return out

    def frobenius_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2)))

    # -- operations ---------------------------------------------------------

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """Sparse product A @ v with deterministic in-order row summation."""
        v = np.asarray(v, dtype=complex)
        if v.shape != (self.n_cols,):
            raise DimensionMismatch(
                f"matvec of {self.shape} matrix with vector of shape {v.shape}"
            )
        products = self.values * v[self.col_indices]
        rows = np.repeat(np.arange(self.n_rows), np.diff(self.row_offsets))
        out = np.zeros(self.n_rows, dtype=complex)
        np.add.at(out, rows, products)
        return out

    def conj_transpose(self) -> "ComplexSparseMatrix":
        """Return A* with CSR invariants restored."""
        rows = np.repeat(np.arange(self.n_rows), np.diff(self.row_offsets))
        return ComplexSparseMatrix.from_triplets(
            self.n_cols, self.n_rows, self.col_indices, rows, np.conj(self.values)
        )


def matvec(a: ComplexSparseMatrix, v: np.ndarray) -> np.ndarray:
    return a.matvec(v)


def conj_transpose(a: ComplexSparseMatrix) -> ComplexSparseMatrix:
    return a.conj_transpose()


@dataclass(frozen=True)
class PoweredOperator:
    """Action of base**k realized as k successive matvecs; never materialized."""

    base: ComplexSparseMatrix
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"power must be positive, got {self.k}")
        if self.base.n_rows != self.base.n_cols:
            raise DimensionMismatch("powered operator needs a square base")

    @property
    def shape(self) -> tuple[int, int]:
        return self.base.shape

    @property
    def matvec_cost(self) -> int:
        return self.k * self.base.matvec_cost

    def matvec(self, v: np.ndarray) -> np.ndarray:
        for _ in range(self.k):
            v = self.base.matvec(v)
        return v


def geometric_sum_apply(a, k: int, v: np.ndarray) -> np.ndarray:
    """Return (I + A + ... + A**(k-1)) v by Horner accumulation.

    Costs k-1 matvecs; no matrix powers are formed.  Assumes the spectral
    radius of A is below one (not checked here).
    """
    if k < 1:
        raise ValueError(f"power must be positive, got {k}")
    v = np.asarray(v, dtype=complex)
    acc = v
    for _ in range(k - 1):
        acc = v + a.matvec(acc)
    return acc


def dense_eigendecomposition(a, max_dim: int = 64):
    """Eigenvalues and eigenvectors of a small dense matrix.

    Validation tool, not a production eigensolver; hence the dimension
    guard.  Each returned pair satisfies |A v - lambda v| <= 1e-8 for the
    unit-norm eigenvector, else ConvergenceFailure is raised.
    """
    if isinstance(a, ComplexSparseMatrix):
        a = a.to_dense()
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] > max_dim:
        raise ValueError(
            f"dense eigendecomposition is guarded to n <= {max_dim}, got {a.shape[0]}"
        )
    try:
        eigenvalues, eigenvectors = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - numpy rarely fails
        raise ConvergenceFailure(f"dense eigensolve failed: {exc}") from exc
    residual = np.linalg.norm(a @ eigenvectors - eigenvectors * eigenvalues, axis=0)
    norms = np.linalg.norm(eigenvectors, axis=0)
    if np.any(residual > 1e-8 * norms):
        raise ConvergenceFailure(
            f"eigenpair residual {residual.max():.3e} above contract"
        )
    return eigenvalues, eigenvectors


# -- Matrix Market exchange --------------------------------------------------

_MM_HEADER = "%%MatrixMarket matrix coordinate complex general"


def write_matrix_market(a: ComplexSparseMatrix, path: str | os.PathLike) -> None:
    """Write CSR contents in coordinate complex general format (1-based)."""
    rows = np.repeat(np.arange(a.n_rows), np.diff(a.row_offsets))
    with open(path, "w", encoding="ascii") as fh:
        fh.write(_MM_HEADER + "\n")
        fh.write(f"{a.n_rows} {a.n_cols} {a.nnz}\n")
        for r, c, v in zip(rows, a.col_indices, a.values):
            fh.write(f"{r + 1} {c + 1} {float(v.real)!r} {float(v.imag)!r}\n")


def read_matrix_market(path: str | os.PathLike) -> ComplexSparseMatrix:
    """Read a coordinate complex general file written by this package."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            header = fh.readline().strip()
            if header.lower() != _MM_HEADER.lower():
                raise UnreadableMatrix(
                    f"unsupported Matrix Market header: {header!r}"
                )
            size_line = fh.readline()
            while size_line.lstrip().startswith("%"):
                size_line = fh.readline()
            parts = size_line.split()
            if len(parts) != 3:
                raise UnreadableMatrix(f"bad size line: {size_line!r}")
            n_rows, n_cols, nnz = (int(p) for p in parts)
            rows = np.empty(nnz, dtype=np.int64)
            cols = np.empty(nnz, dtype=np.int64)
            vals = np.empty(nnz, dtype=complex)
            count = 0
            for line in fh:
                line = line.strip()
                if not line or line.startswith("%"):
                    continue
                if count >= nnz:
                    raise UnreadableMatrix("more entries than declared")
                r, c, re, im = line.split()
                rows[count] = int(r) - 1
                cols[count] = int(c) - 1
                vals[count] = complex(float(re), float(im))
                count += 1
            if count != nnz:
                raise UnreadableMatrix(
                    f"declared {nnz} entries but found {count}"
                )
    except OSError as exc:
        raise UnreadableMatrix(f"cannot read {path}: {exc}") from exc
    except UnreadableMatrix:
        raise
    except ValueError as exc:
        raise UnreadableMatrix(f"malformed entry in {path}: {exc}") from exc
    return ComplexSparseMatrix.from_triplets(n_rows, n_cols, rows, cols, vals)


def write_vector_market(v: np.ndarray, path: str | os.PathLike) -> None:
    """Write a vector as an n-by-1 coordinate complex general matrix."""
    v = as_vector(v)
    mat = ComplexSparseMatrix.from_triplets(
        v.shape[0], 1, np.arange(v.shape[0]), np.zeros(v.shape[0], dtype=np.int64), v
    )
    write_matrix_market(mat, path)


def read_vector_market(path: str | os.PathLike) -> np.ndarray:
    """Read an n-by-1 Matrix Market file back into a dense vector."""
    mat = read_matrix_market(path)
    if mat.n_cols != 1:
        raise UnreadableMatrix(f"expected an n-by-1 vector file, got {mat.shape}")
    return mat.to_dense()[:, 0]
