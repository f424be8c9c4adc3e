"""
MatrixMarket wrapper over scipy.io.

Coordinate files hold observed entries (1-based on disk, 0-based in memory), array files hold dense matrices.
Files are opened here and handed to scipy as streams so scipy never renames them.
"""
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from scipy import sparse
from scipy.io import mmread, mmwrite

from optspace.mc_errors import DimensionError

PathLike = Union[str, Path]

PRECISION = 17


def read_coordinate(path: PathLike) -> Tuple[int, int, np.ndarray, np.ndarray, np.ndarray]:
    """Read coordinate MatrixMarket file.

    Duplicate (row, column) pairs are kept so the caller can reject them.

    :param path: file path.
    :return: (m, n, rows, cols, values) with 0-based indices.
    """
    with open(path, "rb") as stream:
        matrix = mmread(stream)
    if not sparse.issparse(matrix):
        raise DimensionError(f"{path} is a MatrixMarket array file, expected coordinate format")
    coo = sparse.coo_matrix(matrix)
    m, n = coo.shape
    return m, n, coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data.astype(float)


def write_coordinate(path: PathLike, shape: Tuple[int, int], rows: np.ndarray, cols: np.ndarray, values: np.ndarray) -> None:
    """Write entries as ``%%MatrixMarket matrix coordinate real general``.

    :param path: file path.
    :param shape: (m, n).
    :param rows: 0-based row indices.
    :param cols: 0-based column indices.
    :param values: entry values.
    """
    coo = sparse.coo_matrix((np.asarray(values, dtype=float), (rows, cols)), shape=shape)
    with open(path, "wb") as stream:
        mmwrite(stream, coo, field="real", precision=PRECISION, symmetry="general")


def read_array(path: PathLike) -> np.ndarray:
    """Read dense MatrixMarket array file."""
    with open(path, "rb") as stream:
        matrix = mmread(stream)
    if sparse.issparse(matrix):
        return matrix.toarray()
    return np.asarray(matrix, dtype=float)


def write_array(path: PathLike, dense: np.ndarray) -> None:
    """Write dense matrix as ``%%MatrixMarket matrix array real general``."""
    with open(path, "wb") as stream:
        mmwrite(stream, np.atleast_2d(np.asarray(dense, dtype=float)), field="real", precision=PRECISION, symmetry="general")
