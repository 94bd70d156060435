"""Small numeric and I/O helpers shared by several modules."""
from __future__ import annotations

import math
import os
from typing import Iterable, Sequence

import numpy as np


def ceil_count(x: float) -> int:
    """Ceiling of ``x`` with a 1e-9 guard against float noise.

    Quantile counts like ``0.05 * 100`` can land a hair above the integer
    they represent; a raw ceil would then overshoot by one.
    """
    return int(math.ceil(x - 1e-9))


def fmt(x: float) -> str:
    """Shortest round-trip decimal for a float, for deterministic CSV output."""
    return repr(float(x))


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    """Write a UTF-8 CSV with LF newlines and no quoting surprises."""
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def midranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..N with ties replaced by the average of their positions."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v), dtype=float)
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks
