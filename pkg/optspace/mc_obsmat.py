"""
Observed (partially revealed) matrices - the projection P_E, degree based trimming and holdout splits.

Entries are held in coordinate form sorted by (row, column) so every reduction runs in the same order.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Tuple, Union

import numpy as np
from scipy import sparse

from optspace.formats import mm_format
from optspace.mc_errors import DimensionError
from optspace.mc_utils import logger


class ObservedMatrix:
    """Observed entries of an m x n matrix.

    The object is read only after construction - index and value arrays are flagged non writeable.
    """

    def __init__(self, m: int, n: int, rows: np.ndarray, cols: np.ndarray, values: np.ndarray) -> None:
        """Validate and sort the entries.

        :param m: number of rows.
        :param n: number of columns.
        :param rows: 0-based row index per entry.
        :param cols: 0-based column index per entry.
        :param values: value per entry.
        """
        if m < 1 or n < 1:
            raise DimensionError(f"Matrix dimensions must be positive, got {m}x{n}")
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=float).ravel()
        if not rows.size == cols.size == values.size:
            raise DimensionError(f"Entry arrays differ in length: {rows.size}, {cols.size}, {values.size}")
        if rows.size:
            if rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n:
                raise DimensionError(f"Entry index out of range for a {m}x{n} matrix")
        order = np.lexsort((cols, rows))
        rows, cols, values = rows[order], cols[order], values[order]
        if rows.size > 1:
            same = (rows[1:] == rows[:-1]) & (cols[1:] == cols[:-1])
            if same.any():
                first = int(np.flatnonzero(same)[0])
                raise DimensionError(f"Duplicate observation at ({rows[first]}, {cols[first]})")
        for array in (rows, cols, values):
            array.setflags(write=False)
        self.m = int(m)
        self.n = int(n)
        self.rows = rows
        self.cols = cols
        self.values = values

    def __repr__(self) -> str:
        return f"ObservedMatrix({self.m}x{self.n}, nnz={self.nnz})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ObservedMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    @classmethod
    def empty(cls, m: int, n: int) -> ObservedMatrix:
        return cls(m, n, np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0))

    @classmethod
    def from_dense_mask(cls, mask: np.ndarray, dense: np.ndarray) -> ObservedMatrix:
        """Build from a boolean mask and a dense matrix of the same shape."""
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != np.shape(dense):
            raise DimensionError(f"Mask shape {mask.shape} differs from matrix shape {np.shape(dense)}")
        rows, cols = np.nonzero(mask)
        return cls(mask.shape[0], mask.shape[1], rows, cols, np.asarray(dense, dtype=float)[rows, cols])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.m, self.n

    @property
    def nnz(self) -> int:
        return int(self.rows.size)

    @property
    def density(self) -> float:
        return self.nnz / (self.m * self.n)

    def entries(self) -> Iterator[Tuple[int, int, float]]:
        """Yield (row, column, value) triplets in (row, column) order."""
        for i, j, value in zip(self.rows.tolist(), self.cols.tolist(), self.values.tolist()):
            yield i, j, value

    def index_set(self) -> set:
        return set(zip(self.rows.tolist(), self.cols.tolist()))

    def mask(self) -> np.ndarray:
        """Boolean m x n indicator of E."""
        mask = np.zeros(self.shape, dtype=bool)
        mask[self.rows, self.cols] = True
        return mask

    def to_dense(self) -> np.ndarray:
        """P_E(N) - observed values, zeros elsewhere."""
        dense = np.zeros(self.shape)
        dense[self.rows, self.cols] = self.values
        return dense

    def to_sparse(self) -> sparse.csr_matrix:
        """N^E as CSR matrix (explicit zeros kept)."""
        return sparse.csr_matrix((self.values, (self.rows, self.cols)), shape=self.shape)

    def with_values(self, values: np.ndarray) -> ObservedMatrix:
        """Same index set, new values (in the stored entry order)."""
        return ObservedMatrix(self.m, self.n, self.rows, self.cols, values)

    def subset(self, keep: np.ndarray) -> ObservedMatrix:
        """Entries selected by a boolean vector over the stored entry order."""
        keep = np.asarray(keep, dtype=bool)
        return ObservedMatrix(self.m, self.n, self.rows[keep], self.cols[keep], self.values[keep])

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.values))


@dataclass(frozen=True)
class DegreeProfile:
    """Number of observed entries per row and per column."""

    row_degrees: np.ndarray
    col_degrees: np.ndarray

    @property
    def total(self) -> int:
        return int(self.row_degrees.sum())


def project(mask: ObservedMatrix, dense: np.ndarray) -> ObservedMatrix:
    """P_E(dense) - the mask index set with values copied from dense.

    :param mask: observed matrix whose index set is E (its values are ignored).
    :param dense: m x n matrix.
    """
    dense = np.asarray(dense, dtype=float)
    if dense.shape != mask.shape:
        raise DimensionError(f"Cannot project {dense.shape} matrix on a {mask.shape} mask")
    return mask.with_values(dense[mask.rows, mask.cols])


def complement_mask(obs: ObservedMatrix) -> np.ndarray:
    """Boolean indicator of the unobserved positions E-perp."""
    return ~obs.mask()


def degrees(obs: ObservedMatrix) -> DegreeProfile:
    return DegreeProfile(
        row_degrees=np.bincount(obs.rows, minlength=obs.m),
        col_degrees=np.bincount(obs.cols, minlength=obs.n),
    )


def trim(obs: ObservedMatrix, factor: float = 2.0) -> ObservedMatrix:
    """Remove over-represented rows and columns.

    Rows with degree above factor * |E| / m and columns with degree above factor * |E| / n lose all their entries.
    Both thresholds and degrees are taken from the input, so a surviving row or column never exceeds them.

    :param obs: observed entries E, nonempty.
    :param factor: threshold as multiple of the average degree.
    """
    if obs.nnz == 0:
        raise DimensionError("Cannot trim an empty observation set")
    profile = degrees(obs)
    row_limit = factor * obs.nnz / obs.m
    col_limit = factor * obs.nnz / obs.n
    heavy_rows = profile.row_degrees > row_limit
    heavy_cols = profile.col_degrees > col_limit
    keep = ~(heavy_rows[obs.rows] | heavy_cols[obs.cols])
    if not keep.all():
        logger.warning(
            "Trimming removed %d of %d entries (%d rows, %d columns)",
            int((~keep).sum()),
            obs.nnz,
            int(heavy_rows.sum()),
            int(heavy_cols.sum()),
        )
        return obs.subset(keep)
    return obs


def split_holdout(obs: ObservedMatrix, fraction: float, seed: int) -> Tuple[ObservedMatrix, ObservedMatrix]:
    """Partition entries into train and validation parts.

    :param obs: observed entries.
    :param fraction: validation share in [0, 1), the validation size is round(fraction * |E|).
    :param seed: generator seed.
    :return: (train, validation).
    """
    if not 0 <= fraction < 1:
        raise ValueError(f"Holdout fraction must be in [0, 1), got {fraction}")
    size = int(np.floor(fraction * obs.nnz + 0.5))
    chosen = np.zeros(obs.nnz, dtype=bool)
    if size:
        rng = np.random.default_rng(seed)
        chosen[rng.choice(obs.nnz, size=size, replace=False)] = True
    return obs.subset(~chosen), obs.subset(chosen)


def read_observed(path: Union[str, Path]) -> ObservedMatrix:
    """Read MatrixMarket coordinate file, duplicates are rejected."""
    m, n, rows, cols, values = mm_format.read_coordinate(path)
    return ObservedMatrix(m, n, rows, cols, values)


def write_observed(obs: ObservedMatrix, path: Union[str, Path]) -> None:
    mm_format.write_coordinate(path, obs.shape, obs.rows, obs.cols, obs.values)
