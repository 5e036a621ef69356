"""Matrix and edge-list file formats.

* CSV: a header line ``n_rows,n_cols``, one line with the two sizes, then the
  matrix in row-major order, one row per line.
* Binary: two little-endian uint64 sizes followed by row-major little-endian
  float64 values.
* Edge list: whitespace-separated ``i j w`` lines; ``#`` starts a comment and a
  missing ``w`` means unit weight.
"""

import logging
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from .errors import DimensionMismatch, InvalidStructure

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

CSV_HEADER = "n_rows,n_cols"


def write_matrix_csv(path: PathLike, matrix: np.ndarray) -> None:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D array, got shape {matrix.shape}")
    n_rows, n_cols = matrix.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{CSV_HEADER}\n{n_rows},{n_cols}\n")
        np.savetxt(fh, matrix, delimiter=",", fmt="%.17g")


def read_matrix_csv(path: PathLike) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise InvalidStructure(f"{path}: expected header {CSV_HEADER!r}, got {header!r}")
        n_rows, n_cols = (int(v) for v in fh.readline().split(","))
        if n_rows == 0 or n_cols == 0:
            return np.zeros((n_rows, n_cols))
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape != (n_rows, n_cols):
        raise DimensionMismatch(f"{path}: header says {(n_rows, n_cols)}, body has {data.shape}")
    return data


def write_matrix_binary(path: PathLike, matrix: np.ndarray) -> None:
    matrix = np.atleast_2d(np.asarray(matrix, dtype="<f8"))
    with open(path, "wb") as fh:
        fh.write(np.asarray(matrix.shape, dtype="<u8").tobytes())
        fh.write(np.ascontiguousarray(matrix).tobytes())


def read_matrix_binary(path: PathLike) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise InvalidStructure(f"{path}: truncated size prefix")
    n_rows, n_cols = np.frombuffer(raw[:16], dtype="<u8")
    values = np.frombuffer(raw[16:], dtype="<f8")
    if values.size != n_rows * n_cols:
        raise DimensionMismatch(f"{path}: expected {n_rows * n_cols} values, found {values.size}")
    return values.reshape(int(n_rows), int(n_cols)).copy()


def read_matrix(path: PathLike) -> np.ndarray:
    """Dispatch on extension: ``.bin`` is binary, anything else CSV."""
    if Path(path).suffix.lower() == ".bin":
        return read_matrix_binary(path)
    return read_matrix_csv(path)


def write_matrix(path: PathLike, matrix: np.ndarray) -> None:
    if Path(path).suffix.lower() == ".bin":
        write_matrix_binary(path, matrix)
    else:
        write_matrix_csv(path, matrix)


def read_edge_list(path: PathLike) -> Tuple[List[Tuple[int, int]], List[float]]:
    edges: List[Tuple[int, int]] = []
    weights: List[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise InvalidStructure(f"{path}:{lineno}: expected 'i j [w]', got {line!r}")
            edges.append((int(parts[0]), int(parts[1])))
            weights.append(float(parts[2]) if len(parts) == 3 else 1.0)
    logger.debug("Read %d edges from %s", len(edges), path)
    return edges, weights


def write_edge_list(path: PathLike, matrix: np.ndarray, symmetric: bool = True) -> None:
    matrix = np.asarray(matrix, dtype=float)
    rows, cols = np.nonzero(matrix)
    with open(path, "w", encoding="utf-8") as fh:
        for i, j in zip(rows, cols):
            if symmetric and j < i:
                continue
            fh.write(f"{i} {j} {matrix[i, j]:.17g}\n")
