"""Exact integer linear algebra on small dense matrices.

Everything here works on numpy ``object`` arrays of Python ints, so no
intermediate value can overflow.  Sizes of interest are at most a few
hundred (the g-by-g gap block, the 24-dimensional base lattices).
"""
from fractions import Fraction

import numpy as np


def as_int_object(A) -> np.ndarray:
    """Copy ``A`` into a 2-D object array of Python ints."""
    A = np.asarray(A)
    out = np.empty(A.shape, dtype=object)
    flat = A.ravel()
    for i, v in enumerate(flat):
        iv = int(v)
        if iv != v:
            raise ValueError("matrix has non-integer entries")
        out.flat[i] = iv
    return out


def to_int64_if_fits(A: np.ndarray) -> np.ndarray:
    """Return an int64 copy when every entry fits comfortably, else ``A``."""
    if A.size == 0:
        return np.zeros(A.shape, dtype=np.int64)
    m = max(abs(int(v)) for v in A.ravel())
    if m < 2**62:
        return A.astype(np.int64)
    return A


def bareiss_det(A) -> int:
    """Determinant by fraction-free (Bareiss) elimination."""
    M = as_int_object(A)
    n, m = M.shape
    if n != m:
        raise ValueError("determinant needs a square matrix")
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if M[k, k] == 0:
            nz = np.nonzero(M[k + 1:, k] != 0)[0]
            if nz.size == 0:
                return 0
            p = k + 1 + int(nz[0])
            M[[k, p]] = M[[p, k]]
            sign = -sign
        piv = M[k, k]
        sub = M[k + 1:, k + 1:] * piv - np.outer(M[k + 1:, k], M[k, k + 1:])
        M[k + 1:, k + 1:] = sub // prev
        M[k + 1:, k] = 0
        prev = piv
    return sign * int(M[n - 1, n - 1])


def integer_inverse(A):
    """Exact inverse of an integer matrix as ``(N, d)`` with ``A^-1 = N / d``.

    Fraction-free Gauss-Jordan: every division is exact, and at the end the
    left block is ``d * I`` with ``d = det(A)`` (up to the row-swap sign).
    Raises ``ZeroDivisionError`` for singular input.
    """
    M0 = as_int_object(A)
    n = M0.shape[0]
    if M0.shape != (n, n):
        raise ValueError("inverse needs a square matrix")
    if n == 0:
        return np.zeros((0, 0), dtype=object), 1
    M = np.empty((n, 2 * n), dtype=object)
    M[:, :n] = M0
    M[:, n:] = 0
    for i in range(n):
        M[i, n + i] = 1
    prev = 1
    for k in range(n):
        if M[k, k] == 0:
            nz = np.nonzero(M[k + 1:, k] != 0)[0]
            if nz.size == 0:
                raise ZeroDivisionError("matrix is singular")
            p = k + 1 + int(nz[0])
            M[[k, p]] = M[[p, k]]
        piv = M[k, k]
        others = np.arange(n) != k
        M[others] = (M[others] * piv - np.outer(M[others, k], M[k])) // prev
        prev = piv
    d = int(M[0, 0])
    return M[:, n:].copy(), d


def inverse_unimodular(A) -> np.ndarray:
    """Integer inverse of a matrix with determinant +-1.

    Raises ``ValueError`` if the determinant is not a unit.
    """
    N, d = integer_inverse(A)
    if d not in (1, -1):
        raise ValueError(f"determinant {d} is not +-1")
    return to_int64_if_fits(N * d)


def fraction_inverse(A) -> np.ndarray:
    """Exact inverse as an object array of Fractions."""
    N, d = integer_inverse(A)
    out = np.empty(N.shape, dtype=object)
    for idx, v in np.ndenumerate(N):
        out[idx] = Fraction(int(v), d)
    return out


def _xgcd(a: int, b: int):
    """Return ``(g, s, t)`` with ``s*a + t*b = g = gcd(a, b) >= 0``."""
    s0, s1, t0, t1 = 1, 0, 0, 1
    while b:
        q, r = divmod(a, b)
        a, b = b, r
        s0, s1 = s1, s0 - q * s1
        t0, t1 = t1, t0 - q * t1
    if a < 0:
        a, s0, t0 = -a, -s0, -t0
    return a, s0, t0


def hnf_lower(gens) -> np.ndarray:
    """Lower-triangular Hermite normal form of the lattice spanned by columns.

    ``gens`` is ``n x m`` (m >= n generators as columns, full rank n).  The
    result ``L`` is ``n x n`` with ``L[i, j] = 0`` for ``j > i``, positive
    diagonal, and ``0 <= L[i, j] < L[i, i]`` for ``j < i``.  Intended for the
    small base lattices only (pure Python ints).
    """
    A = [list(map(int, col)) for col in np.asarray(gens, dtype=object).T]
    n = len(A[0]) if A else 0
    basis = []
    active = [c for c in A if any(c)]
    for i in range(n):
        # combine all active columns into one with entry gcd in row i
        piv = None
        rest = []
        for c in active:
            if c[i] == 0:
                rest.append(c)
                continue
            if piv is None:
                piv = c
                continue
            g, s, t = _xgcd(piv[i], c[i])
            a_, b_ = piv[i] // g, c[i] // g
            new_piv = [s * x + t * y for x, y in zip(piv, c)]
            new_c = [b_ * x - a_ * y for x, y in zip(piv, c)]
            piv = new_piv
            if any(new_c):
                rest.append(new_c)
        if piv is None:
            raise ValueError("generators do not span a full-rank lattice")
        if piv[i] < 0:
            piv = [-x for x in piv]
        basis.append(piv)
        active = rest
    L = np.array([[basis[j][i] for j in range(n)] for i in range(n)], dtype=object)
    # reduce entries left of each diagonal
    for i in range(n):
        d = L[i, i]
        for j in range(i):
            q = L[i, j] // d
            if q:
                L[:, j] = L[:, j] - q * L[:, i]
    return L
