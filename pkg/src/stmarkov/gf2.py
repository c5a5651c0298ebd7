"""GF(2) linear algebra on bit-packed integer rows.

Rows are Python ints used as bitsets (bit j = column j), which keeps rank
and span computations exact and fast for the matrix sizes handled here.
"""

from __future__ import annotations

from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np


def pack_row(bits: Sequence[int] | np.ndarray) -> int:
    """Pack a 0/1 vector into an int bitset (bit j = entry j)."""
    value = 0
    for j, b in enumerate(bits):
        if b & 1:
            value |= 1 << j
    return value


def unpack_row(value: int, n_cols: int) -> np.ndarray:
    out = np.zeros(n_cols, dtype=np.uint8)
    j = 0
    while value:
        if value & 1:
            out[j] = 1
        value >>= 1
        j += 1
    return out


def gf2_rank(rows: Iterable[int]) -> int:
    """Rank over GF(2) via elimination on int bitsets."""
    pivots: List[int] = []
    for row in rows:
        for p in pivots:
            row = min(row, row ^ p)
        if row:
            pivots.append(row)
    return len(pivots)


def gf2_row_reduce(rows: Sequence[int]) -> Tuple[List[int], List[int]]:
    """Reduce rows, returning (pivot rows, indices of independent input rows)."""
    pivots: List[int] = []
    kept: List[int] = []
    for idx, row in enumerate(rows):
        for p in pivots:
            row = min(row, row ^ p)
        if row:
            pivots.append(row)
            kept.append(idx)
    return pivots, kept


def gf2_in_rowspan(vec: int, rows: Sequence[int]) -> bool:
    pivots, _ = gf2_row_reduce(rows)
    for p in pivots:
        vec = min(vec, vec ^ p)
    return vec == 0


def gf2_solve(rows: Sequence[int], target: int) -> Optional[int]:
    """Find a combination mask c with XOR_{i in c} rows[i] == target, or None.

    Bit i of the returned mask selects rows[i].
    """
    # Augment each row with a tag tracking which inputs were combined.
    n = len(rows)
    aug = [(rows[i], 1 << i) for i in range(n)]
    pivots: List[Tuple[int, int]] = []
    for row, tag in aug:
        for prow, ptag in pivots:
            nxt = row ^ prow
            if nxt < row:
                row, tag = nxt, tag ^ ptag
        if row:
            pivots.append((row, tag))
    mask = 0
    for prow, ptag in pivots:
        nxt = target ^ prow
        if nxt < target:
            target, mask = nxt, mask ^ ptag
    if target != 0:
        return None
    return mask


def gf2_nullspace(rows: Sequence[int], n_cols: int) -> List[int]:
    """Basis of {v : rows · v = 0} as int bitsets over n_cols columns.

    ``rows`` are the matrix rows; the nullspace lives in column space.
    """
    # Transpose into column bitsets over len(rows) bits, then eliminate.
    cols = []
    for j in range(n_cols):
        col = 0
        for i, row in enumerate(rows):
            if (row >> j) & 1:
                col |= 1 << i
        cols.append(col)
    # Gaussian elimination tracking combinations of columns.
    basis: List[int] = []
    pivots: List[Tuple[int, int]] = []  # (reduced column, combo mask)
    for j in range(n_cols):
        col, tag = cols[j], 1 << j
        for pcol, ptag in pivots:
            nxt = col ^ pcol
            if nxt < col:
                col, tag = nxt, tag ^ ptag
        if col:
            pivots.append((col, tag))
        else:
            basis.append(tag)
    return basis


def matrix_to_rows(mat: np.ndarray) -> List[int]:
    """Pack a 2D 0/1 array into a list of int bitset rows."""
    return [pack_row(mat[i]) for i in range(mat.shape[0])]
