"""Text embedding file format shared by word and stock embeddings.

First line: ``<count> <dim>``. Then one line per entry:
``<label> <v1> ... <vd>`` with float64 values printed via ``repr`` so the
decimal text round-trips losslessly.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError


def write_embeddings(path, labels, matrix) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or len(labels) != matrix.shape[0]:
        raise DataError(f"write_embeddings: {len(labels)} labels vs matrix {matrix.shape}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{matrix.shape[0]} {matrix.shape[1]}\n")
        for label, row in zip(labels, matrix):
            fh.write(label + " " + " ".join(repr(float(v)) for v in row) + "\n")


def read_embeddings(path):
    """Returns (labels, matrix)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise DataError(f"{path}: bad embedding header")
        n, dim = int(header[0]), int(header[1])
        labels = []
        rows = np.empty((n, dim))
        for i in range(n):
            parts = fh.readline().rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise DataError(f"{path}: row {i} has {len(parts) - 1} values, expected {dim}")
            labels.append(parts[0])
            rows[i] = [float(v) for v in parts[1:]]
    return labels, rows
