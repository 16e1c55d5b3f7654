"""Exact integer solver for unimodular matrices in approximate lower triangular form.

A square integer matrix ``A`` is handled through a column permutation
``perm`` and a gap ``g`` such that ``Ap = A[:, perm]`` looks like::

    [ B  T ]   rows 0 .. s-1      (s = n - g), T lower triangular,
    [ X  C ]   rows s .. n-1      diag of row j sits in column g + j

Solving ``A x = c`` then takes one dense ``g x n`` product for the gap
unknowns and a back-substitution for the rest.  The back-substitution is
level-scheduled: rows whose unknowns only depend on already-known ones are
solved together with one sparse product, so a batch of right-hand sides
costs a handful of vectorized steps.

Arithmetic is exact.  Values stay in int64 when an a priori magnitude bound
proves no intermediate can overflow; otherwise the same schedule runs on
Python ints.
"""
import numpy as np
import scipy.sparse as sp

from . import exact
from .errors import NotALT, NotUnimodular, SingularGap

_SAFE = float(2**62)


def _spmm(A: sp.csr_matrix, X: np.ndarray) -> np.ndarray:
    """Sparse times dense that also works on object (Python int) arrays."""
    if X.dtype != object:
        return np.asarray(A @ X)
    out = np.zeros((A.shape[0],) + X.shape[1:], dtype=object)
    if A.nnz == 0:
        return out
    data = A.data.astype(object)
    prod = data.reshape((-1,) + (1,) * (X.ndim - 1)) * X[A.indices]
    starts = A.indptr[:-1]
    nonempty = np.diff(A.indptr) > 0
    sums = np.add.reduceat(prod, starts[nonempty], axis=0)
    out[nonempty] = sums
    return out


def discover_alt(A) -> tuple:
    """Find ``(perm, g)`` for ``A`` by greedy forward triangularization.

    Rows are kept in their given order.  Each row takes as its diagonal the
    largest column in its support not touched by any earlier triangular
    row; the first row without such a column starts the gap.
    """
    A = sp.csr_matrix(A)
    n = A.shape[0]
    used = np.zeros(A.shape[1], dtype=bool)
    diag = []
    for j in range(n):
        cols = A.indices[A.indptr[j]:A.indptr[j + 1]]
        free = cols[~used[cols]]
        if free.size == 0:
            break
        diag.append(int(free.max()))
        used[cols] = True
    is_diag = np.zeros(A.shape[1], dtype=bool)
    is_diag[diag] = True
    gap_cols = np.nonzero(~is_diag)[0].tolist()
    g = n - len(diag)
    return np.array(gap_cols + diag, dtype=np.int64), g


def right_solve_lower(T, C, sign=None) -> np.ndarray:
    """Exact ``V`` with ``V T = C`` for lower triangular ``T`` with +-1 diagonal.

    ``T`` is sparse ``s x s``; ``C`` is dense ``g x s``.  Columns of ``V`` are
    resolved from the last to the first, grouped into levels so each level
    is one sparse product.
    """
    T = sp.csr_matrix(T, dtype=np.int64)
    s = T.shape[0]
    C = np.asarray(C)
    g = C.shape[0]
    if sign is None:
        sign = T.diagonal().astype(np.int64)
    Tc = T.tocsc()
    lev = np.zeros(s, dtype=np.int64)
    for p in range(s - 1, -1, -1):
        rows = Tc.indices[Tc.indptr[p]:Tc.indptr[p + 1]]
        rows = rows[rows > p]
        lev[p] = 1 + (lev[rows].max() if rows.size else 0)
    Toff = sp.csr_matrix(T - sp.diags(T.diagonal()))
    Toff.eliminate_zeros()
    TT = Toff.T.tocsr()  # row p lists the entries T[q, p] with q > p
    Vi = np.zeros((g, s), dtype=np.int64)
    V = None
    for L in range(1, int(lev.max()) + 1 if s else 1):
        cols = np.nonzero(lev == L)[0]
        if cols.size == 0:
            continue
        sub = TT[cols]
        if V is None:
            bound = np.abs(C[:, cols]).astype(float) + np.asarray(
                abs(sub).astype(float) @ np.abs(Vi.T).astype(float)).T
            if not bound.size or bound.max() < _SAFE:
                acc = C[:, cols] - np.asarray(sub @ Vi.T).T
                Vi[:, cols] = acc * sign[cols]
                continue
            V = Vi.astype(object)
        acc = C[:, cols].astype(object) - _spmm(sub, V.T).T
        V[:, cols] = acc * sign[cols].astype(object)
    return Vi if V is None else V


class AltSolver:
    """Exact solver ``A x = c`` for a unimodular integer matrix in ALT form."""

    def __init__(self, A, perm, g: int):
        A = sp.csr_matrix(A, dtype=np.int64)
        n = A.shape[0]
        if A.shape != (n, n):
            raise NotALT("matrix must be square")
        perm = np.asarray(perm, dtype=np.int64)
        if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
            raise NotALT("perm is not a permutation of the columns")
        if not 0 <= g <= n:
            raise NotALT("gap out of range")
        self.n, self.g, self.s = n, int(g), n - int(g)
        self.perm = perm
        Hp = A[:, perm].tocsr()
        Hp.sort_indices()
        Hp.eliminate_zeros()
        self.Hp = Hp
        g, s = self.g, self.s

        # validate the triangular part and collect diagonal signs
        sign = np.empty(s, dtype=np.int64)
        level = np.zeros(n, dtype=np.int64)
        for j in range(s):
            lo, hi = Hp.indptr[j], Hp.indptr[j + 1]
            cols = Hp.indices[lo:hi]
            if cols.size == 0 or cols[-1] != g + j:
                raise NotALT(f"row {j} is not lower triangular at column {g + j}")
            d = Hp.data[hi - 1]
            if d not in (1, -1):
                raise NotALT(f"row {j} has diagonal {d}, expected +-1")
            sign[j] = d
            others = cols[:-1]
            level[g + j] = 1 + (level[others].max() if others.size else 0)
        self.sign = sign
        self.depth = int(level.max()) if n else 0

        T_rows = Hp[:s]
        offdiag = T_rows.copy()
        offdiag.data = offdiag.data.copy()
        # zero the diagonal entries (last stored entry of every row)
        offdiag.data[offdiag.indptr[1:] - 1] = 0
        offdiag.eliminate_zeros()
        self._levels = []
        row_level = level[g:]
        for L in range(1, self.depth + 1):
            rows = np.nonzero(row_level == L)[0]
            if rows.size:
                self._levels.append((rows, offdiag[rows].tocsr(), sign[rows]))
        self._abs_levels = [(r, abs(O).astype(np.float64)) for r, O, _ in self._levels]

        # Schur complement Phi = X - C T^-1 B via a batched solve with
        # identity gap unknowns and zero right-hand side
        self.phi = self._schur()
        det_phi = exact.bareiss_det(self.phi)
        if det_phi == 0:
            raise SingularGap("X - C T^-1 B is singular")
        if det_phi not in (1, -1):
            raise NotUnimodular(f"gap determinant is {det_phi}, not +-1")
        self.det_phi = det_phi
        self.delta = exact.inverse_unimodular(self.phi) if g else np.zeros((0, 0), np.int64)
        self.W = self._gap_map()
        self._W_abs_rows = (np.abs(self.W.astype(np.float64)).sum(axis=1)
                            if g else np.zeros(0))
        self._beta = self._bound(self._W_abs_rows, 1.0)

    # -- bounds -----------------------------------------------------------
    def _bound(self, gap_bound: np.ndarray, c_bound: float) -> float:
        """Max magnitude of any intermediate for inputs bounded as given."""
        beta = np.zeros(self.n)
        beta[:self.g] = gap_bound
        worst = float(beta.max()) if self.n else 0.0
        for rows, Oabs in self._abs_levels:
            vals = c_bound + Oabs @ beta
            beta[self.g + rows] = vals
            if vals.size:
                worst = max(worst, float(vals.max()))
        return worst

    # -- core schedule -----------------------------------------------------
    def _back_substitute(self, xp: np.ndarray, c: np.ndarray) -> np.ndarray:
        g = self.g
        for rows, O, sgn in self._levels:
            acc = c[rows] - _spmm(O, xp)
            if acc.ndim == 2:
                xp[g + rows] = acc * sgn[:, None]
            else:
                xp[g + rows] = acc * sgn
        return xp

    def _schur(self) -> np.ndarray:
        n, g, s = self.n, self.g, self.s
        if g == 0:
            return np.zeros((0, 0), dtype=np.int64)
        safe = self._bound(np.ones(g), 0.0) < _SAFE
        dt = np.int64 if safe else object
        xp = np.zeros((n, g), dtype=dt)
        xp[:g] = np.eye(g, dtype=np.int64)
        c = np.zeros((n, g), dtype=dt)
        xp = self._back_substitute(xp, c)
        phi = _spmm(self.Hp[s:].tocsr(), xp)
        return exact.to_int64_if_fits(np.asarray(phi, dtype=object)) if not safe else phi

    def _gap_map(self) -> np.ndarray:
        """Dense ``W = Delta [-C T^-1 | I]`` mapping a right-hand side to gap unknowns."""
        n, g, s = self.n, self.g, self.s
        if g == 0:
            return np.zeros((0, n), dtype=np.int64)
        T = self.Hp[:s, g:]
        C = self.Hp[s:, g:].toarray()
        V = right_solve_lower(T, C, self.sign)
        left = -np.asarray(V, dtype=object)
        M = np.concatenate([left, np.eye(g, dtype=np.int64).astype(object)], axis=1)
        delta = np.asarray(self.delta, dtype=object)
        return exact.to_int64_if_fits(delta.dot(M))

    # -- public ------------------------------------------------------------
    def complete(self, x_gap, c) -> np.ndarray:
        """Back-substitute the triangular unknowns given the gap unknowns.

        ``x_gap`` holds the first ``g`` permuted unknowns; returns ``x`` in the
        original column order.
        """
        c = np.asarray(c)
        x_gap = np.asarray(x_gap)
        obj = c.dtype == object or x_gap.dtype == object
        dt = object if obj else np.int64
        xp = np.zeros(c.shape, dtype=dt)
        xp[:self.g] = x_gap
        xp = self._back_substitute(xp, c.astype(dt))
        x = np.empty_like(xp)
        x[self.perm] = xp
        return x

    def solve(self, c) -> np.ndarray:
        """Exact integer solution of ``A x = c``; ``c`` is a vector or ``n x B``."""
        c = np.asarray(c)
        if c.shape[0] != self.n:
            raise ValueError("right-hand side has the wrong length")
        cmax = float(np.abs(c).max()) if c.size else 0.0
        safe = (self.W.dtype != object and c.dtype != object
                and self._beta * max(cmax, 1.0) < _SAFE)
        dt = np.int64 if safe else object
        c = c.astype(dt)
        xp = np.zeros(c.shape, dtype=dt)
        if self.g:
            xp[:self.g] = self.W.astype(dt).dot(c) if dt == object else self.W @ c
        xp = self._back_substitute(xp, c)
        x = np.empty_like(xp)
        x[self.perm] = xp
        return x

    def determinant(self) -> int:
        """Exact determinant of ``A`` from the ALT block structure."""
        # column permutation sign via cycle decomposition
        seen = np.zeros(self.n, dtype=bool)
        parity = 0
        for i in range(self.n):
            if seen[i]:
                continue
            j, length = i, 0
            while not seen[j]:
                seen[j] = True
                j = int(self.perm[j])
                length += 1
            parity ^= (length - 1) & 1
        sgn = -1 if parity else 1
        if (self.g * self.s) & 1:
            sgn = -sgn
        prod_diag = int(np.prod(self.sign)) if self.s else 1
        return sgn * prod_diag * self.det_phi
