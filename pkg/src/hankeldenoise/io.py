"""Plain-text CSV helpers and atomic file writes."""
from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from .exceptions import InvalidDimensionError


def fmt(x: float) -> str:
    """Twelve significant digits, the precision used by every text output."""
    return f"{x:.12g}"


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and ``os.replace``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_signal_csv(path) -> np.ndarray:
    """One value per line, no header."""
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    if data.shape[1] != 1:
        raise InvalidDimensionError(f"{path}: expected one value per line, found {data.shape[1]} columns")
    return data[:, 0]


def read_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def signal_to_csv(signal) -> str:
    return "".join(fmt(float(v)) + "\n" for v in np.asarray(signal).ravel())


def matrix_to_csv(M) -> str:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return "".join(",".join(fmt(float(v)) for v in row) + "\n" for row in M)


def spectrum_to_csv(M) -> str:
    """Singular values of ``M``, descending, one per line."""
    return signal_to_csv(np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False))
