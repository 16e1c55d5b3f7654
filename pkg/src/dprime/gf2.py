"""Linear algebra over F_2 on bit-packed rows."""
import numpy as np
import scipy.sparse as sp


def _dense01(H) -> np.ndarray:
    if sp.issparse(H):
        H = H.toarray()
    return (np.asarray(H) % 2).astype(np.uint8)


def _pack(H01: np.ndarray) -> np.ndarray:
    """Pack an ``m x n`` 0/1 matrix into ``m x ceil(n/64)`` uint64 words."""
    m, n = H01.shape
    nw = (n + 63) // 64
    padded = np.zeros((m, nw * 64), dtype=np.uint8)
    padded[:, :n] = H01
    # little-endian bit order so column c is bit c % 64 of word c // 64
    b = np.packbits(padded, axis=1, bitorder="little")
    return b.view(np.uint64).reshape(m, nw).copy()


def _rref_packed(H01: np.ndarray):
    """Full reduced row echelon form; returns ``(packed pivot rows, pivot cols)``."""
    m, n = H01.shape
    P = _pack(H01)
    free = np.ones(m, dtype=bool)
    prow, pivots = [], []
    for c in range(n):
        w, bit = divmod(c, 64)
        mask = np.uint64(1) << np.uint64(bit)
        has = (P[:, w] & mask) != 0
        cand = np.nonzero(has & free)[0]
        if cand.size == 0:
            continue
        r = cand[0]
        free[r] = False
        has[r] = False
        if has.any():
            P[has] ^= P[r]
        prow.append(r)
        pivots.append(c)
        if not free.any():
            break
    return P[prow], pivots


def pivot_columns(H) -> list:
    """Pivot columns of the reduced row echelon form of ``H`` over F_2.

    The pivots are the lexicographically first maximal set of linearly
    independent columns, so ``len(pivot_columns(H)) == rank(H)``.
    """
    H01 = _dense01(H)
    if H01.shape[0] == 0 or H01.shape[1] == 0:
        return []
    return _rref_packed(H01)[1]


def rank(H) -> int:
    """Rank over F_2."""
    H01 = _dense01(H)
    if H01.shape[0] > H01.shape[1]:
        H01 = H01.T
    return len(pivot_columns(H01))


def extending_rows(base, cand) -> list:
    """Indices of rows of ``cand`` that, taken greedily in order, extend span(base).

    The returned rows together with ``base`` form a basis of
    span(base) + span(cand).
    """
    base01 = _dense01(base)
    cand01 = _dense01(cand)
    stacked = np.vstack([base01, cand01]).T
    piv = pivot_columns(stacked)
    nb = base01.shape[0]
    return [p - nb for p in piv if p >= nb]


def in_row_space(H, rows) -> np.ndarray:
    """Boolean per row of ``rows``: does it lie in the F_2 row space of ``H``?"""
    H01 = _dense01(H)
    R01 = _dense01(rows)
    if H01.shape[1] != R01.shape[1]:
        raise ValueError("column counts differ")
    if H01.shape[0] == 0:
        return ~R01.any(axis=1)
    basis, pivots = _rref_packed(H01)
    R = _pack(R01)
    for prow, c in zip(basis, pivots):
        w, bit = divmod(c, 64)
        has = (R[:, w] >> np.uint64(bit)) & np.uint64(1) == 1
        if has.any():
            R[has] ^= prow
    return ~R.any(axis=1)


def syndrome(H, x) -> np.ndarray:
    """``H x mod 2`` for a sparse or dense ``H`` and a vector or column batch ``x``."""
    x = np.asarray(x)
    if sp.issparse(H):
        s = H @ (x.astype(np.int64) & 1)
    else:
        s = np.asarray(H, dtype=np.int64) @ (x.astype(np.int64) & 1)
    return np.asarray(s) & 1
