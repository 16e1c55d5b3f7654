"""Construction D' lattices: nested code families, check/generator matrices,
membership, volume and VNR.

The lattice check matrix is ``H = D * Htilde`` with ``D`` diagonal and
``d_jj = 2**-l_j``.  Here ``l_j`` counts the levels whose parity rows include
row ``j``.  Exact arithmetic keeps ``Htilde`` as integers and the shifts
``l_j`` separately, so ``H x`` is the dyadic vector ``(Htilde x) / 2**l``.
"""
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from . import exact, gf2
from ._alt import AltSolver, discover_alt
from .errors import (DimensionMismatch, FormatError, NonPositiveNoise,
                     NotALT, NotUnimodular, RankDeficient, SingularGap)

# dense exact fallback is used only below this size
_DENSE_LIMIT = 400


@dataclass
class NestedCodeFamily:
    """Binary ``n x n`` matrix ``Htilde`` whose row suffixes define nested codes.

    Rows ``k[i] .. n-1`` (0-indexed) are the parity checks of code ``C_i``.
    ``perm`` and ``g`` optionally describe an ALT column ordering found at
    design time; ``meta`` carries free-form provenance.  ``decoding_checks``
    optionally lists, per level, a sparser parity-check matrix of the same
    code for belief propagation (not saved to disk).
    """
    n: int
    a: int
    k: tuple
    Htilde: sp.csr_matrix
    perm: np.ndarray = None
    g: int = None
    meta: dict = field(default_factory=dict)
    decoding_checks: list = field(default=None, repr=False)

    def __post_init__(self):
        self.k = tuple(int(v) for v in self.k)
        H = sp.csr_matrix(self.Htilde, dtype=np.int64)
        H.eliminate_zeros()
        H.sort_indices()
        self.Htilde = H
        if H.shape != (self.n, self.n):
            raise DimensionMismatch(f"Htilde is {H.shape}, expected ({self.n}, {self.n})")
        if self.a < 1 or len(self.k) != self.a:
            raise DimensionMismatch("need one code dimension per level")
        if any(x > y for x, y in zip(self.k, self.k[1:])) or not 0 <= self.k[0] or self.k[-1] > self.n:
            raise DimensionMismatch("code dimensions must be non-decreasing and at most n")
        if H.nnz and not np.all(H.data == 1):
            raise ValueError("Htilde must be binary")
        if self.perm is not None:
            self.perm = np.asarray(self.perm, dtype=np.int64)

    @property
    def shifts(self) -> np.ndarray:
        """``l_j``: number of levels ``i`` with ``j >= k_i``."""
        j = np.arange(self.n)
        return (j[:, None] >= np.asarray(self.k)[None, :]).sum(axis=1).astype(np.int64)

    def level_rows(self, i: int) -> sp.csr_matrix:
        """Parity-check matrix ``Htilde_i`` of code ``C_i``."""
        return self.Htilde[self.k[i]:]


class _DenseSolver:
    """Exact inverse for small matrices without an ALT description."""

    def __init__(self, A):
        A = np.asarray(sp.csr_matrix(A).toarray(), dtype=np.int64)
        self.n = A.shape[0]
        self.det = exact.bareiss_det(A)
        if self.det not in (1, -1):
            raise NotUnimodular(f"det(Htilde) = {self.det}")
        self.inv = exact.inverse_unimodular(A)

    def solve(self, c):
        c = np.asarray(c)
        if self.inv.dtype == object or c.dtype == object:
            return self.inv.astype(object).dot(c.astype(object))
        return self.inv @ c

    def determinant(self) -> int:
        return self.det


def _make_solver(codes: NestedCodeFamily):
    H = codes.Htilde
    attempts = []
    if codes.perm is not None and codes.g is not None:
        attempts.append((codes.perm, codes.g))
    attempts.append(discover_alt(H))
    last = None
    for perm, g in attempts:
        try:
            return AltSolver(H, perm, g)
        except SingularGap as e:
            raise NotUnimodular("det(Htilde) = 0") from e
        except NotALT as e:
            last = e
    if codes.n <= _DENSE_LIMIT:
        return _DenseSolver(H)
    raise NotUnimodular(f"cannot certify unimodularity without an ALT form: {last}")


class LatticeSystem:
    """Check matrix ``H = D * Htilde`` and integer generator ``G = H^-1``."""

    def __init__(self, codes: NestedCodeFamily, solver):
        self.codes = codes
        self.n = codes.n
        self.a = codes.a
        self.k = codes.k
        self.shift = codes.shifts
        self.solver = solver
        self._G = None

    @property
    def Htilde(self) -> sp.csr_matrix:
        return self.codes.Htilde

    @property
    def D(self) -> list:
        """Diagonal of ``D`` as exact Fractions."""
        return [Fraction(1, 2 ** int(s)) for s in self.shift]

    def H_exact(self) -> np.ndarray:
        """Dense ``H`` as Fractions (small dimensions only)."""
        Ht = self.Htilde.toarray()
        out = np.empty(Ht.shape, dtype=object)
        for j in range(self.n):
            den = 2 ** int(self.shift[j])
            for c in range(self.n):
                out[j, c] = Fraction(int(Ht[j, c]), den)
        return out

    @property
    def G(self) -> np.ndarray:
        """Integer generator matrix (columns are basis vectors)."""
        if self._G is None:
            scale = (np.int64(1) << self.shift).astype(np.int64)
            self._G = self.solve_tilde(np.diag(scale))
        return self._G

    def solve_tilde(self, c) -> np.ndarray:
        """Exact integer solution of ``Htilde x = c``."""
        c = np.asarray(c)
        if c.shape[0] != self.n:
            raise DimensionMismatch(f"expected length {self.n}, got {c.shape[0]}")
        return self.solver.solve(c)

    def generate(self, b) -> np.ndarray:
        """``G b`` for an integer vector or ``n x B`` batch."""
        b = np.asarray(b)
        if b.shape[0] != self.n:
            raise DimensionMismatch(f"expected length {self.n}, got {b.shape[0]}")
        sh = self.shift if b.ndim == 1 else self.shift[:, None]
        if b.dtype == object:
            return self.solve_tilde(b * (2 ** sh.astype(object)))
        return self.solve_tilde(b.astype(np.int64) << sh)

    def Htilde_times(self, x) -> np.ndarray:
        """Integer product ``Htilde x`` (numerators of ``H x``)."""
        x = np.asarray(x)
        if x.shape[0] != self.n:
            raise DimensionMismatch(f"expected length {self.n}, got {x.shape[0]}")
        if x.dtype == object:
            from ._alt import _spmm
            return _spmm(self.Htilde, x)
        return np.asarray(self.Htilde @ x.astype(np.int64))

    def check(self, x):
        """Exact ``H x`` as ``(numerators, shifts)``; entry j is ``num_j / 2**shift_j``."""
        return self.Htilde_times(x), self.shift


def build_lattice(codes: NestedCodeFamily) -> LatticeSystem:
    """Validate a nested family and return its lattice system."""
    for i in range(codes.a):
        Hi = codes.level_rows(i)
        want = codes.n - codes.k[i]
        r = gf2.rank(Hi) if want else 0
        if r != want:
            raise RankDeficient(f"level {i} has F2 rank {r}, needs {want}")
    solver = _make_solver(codes)
    return LatticeSystem(codes, solver)


def _as_points(x, n):
    x = np.asarray(x)
    if x.shape[0] != n:
        raise DimensionMismatch(f"expected length {n}, got {x.shape[0]}")
    if x.dtype.kind == "f":
        if not np.all(x == np.round(x)):
            raise ValueError("lattice points must be integer vectors")
        x = x.astype(np.int64)
    return x


def member_by_congruence(codes: NestedCodeFamily, x):
    """True iff ``h_j . x = 0 mod 2**(i+1)`` for every level i and row j >= k_i.

    ``x`` may be one vector or an ``n x B`` batch (returns a bool array).
    """
    x = _as_points(x, codes.n)
    H = codes.Htilde
    ok = np.ones(x.shape[1:], dtype=bool)
    for i in range(codes.a):
        rows = H[codes.k[i]:]
        if x.dtype == object:
            from ._alt import _spmm
            dots = _spmm(rows, x)
        else:
            dots = np.asarray(rows @ x.astype(np.int64))
        ok &= np.all(dots % (2 ** (i + 1)) == 0, axis=0)
    return bool(ok) if ok.ndim == 0 else ok


def member_by_check_matrix(sys: LatticeSystem, x):
    """True iff every entry of ``H x`` is an integer."""
    x = _as_points(x, sys.n)
    num, shift = sys.check(x)
    if num.ndim == 2:
        shift = shift[:, None]
    if num.dtype == object:
        den = 2 ** shift.astype(object)
    else:
        den = np.int64(1) << shift
    ok = np.all(num % den == 0, axis=0)
    return bool(ok) if np.ndim(ok) == 0 else ok


def log2_volume(sys: LatticeSystem) -> int:
    """``log2 V(Lambda) = a*n - sum(k)``."""
    return sys.a * sys.n - sum(sys.k)


def lattice_volume(sys: LatticeSystem) -> int:
    """Fundamental volume ``2**(a*n - sum(k))`` as an exact integer."""
    return 2 ** log2_volume(sys)


def vnr(sys: LatticeSystem, sigma2: float) -> float:
    """Volume-to-noise ratio ``V**(2/n) / (2*pi*e*sigma2)``."""
    if not sigma2 > 0:
        raise NonPositiveNoise(f"sigma2 must be positive, got {sigma2}")
    return 2.0 ** (2.0 * log2_volume(sys) / sys.n) / (2 * math.pi * math.e * sigma2)


# -- sparse text format -------------------------------------------------------

def _write_rows(f, H: sp.csr_matrix):
    for j in range(H.shape[0]):
        cols = H.indices[H.indptr[j]:H.indptr[j + 1]]
        f.write(" ".join(str(int(c) + 1) for c in np.sort(cols)) + "\n")


def _read_rows(lines, nrows, ncols, start):
    rows, cols = [], []
    for j in range(nrows):
        ln = lines[start + j] if start + j < len(lines) else None
        if ln is None:
            raise FormatError(f"expected {nrows} rows, file ended after {j}")
        for tok in ln.split():
            try:
                c = int(tok)
            except ValueError as e:
                raise FormatError(f"row {j + 1}: bad column token {tok!r}") from e
            if not 1 <= c <= ncols:
                raise FormatError(f"row {j + 1}: column {c} out of range")
            rows.append(j)
            cols.append(c - 1)
    data = np.ones(len(rows), dtype=np.int64)
    return sp.csr_matrix((data, (rows, cols)), shape=(nrows, ncols))


def _content_lines(text):
    lines, meta = [], {}
    for ln in text.splitlines():
        if ln.startswith("#meta "):
            meta.update(json.loads(ln[6:]))
        elif ln.startswith("#"):
            continue
        else:
            lines.append(ln)
    return lines, meta


def save_family(codes: NestedCodeFamily, path):
    """Write a family: header ``n a k_0 ... k_{a-1}``, one line of 1-positions per row.

    ALT metadata and ``meta`` are written as ``#meta {json}`` lines.
    """
    meta = dict(codes.meta)
    if codes.g is not None:
        meta["g"] = int(codes.g)
    if codes.perm is not None:
        meta["perm"] = [int(v) for v in codes.perm]
    with open(path, "w") as f:
        f.write(" ".join(str(v) for v in (codes.n, codes.a) + codes.k) + "\n")
        _write_rows(f, codes.Htilde)
        if meta:
            f.write("#meta " + json.dumps(meta, sort_keys=True) + "\n")


def load_family(path) -> NestedCodeFamily:
    with open(path) as f:
        return parse_family(f.read())


def parse_family(text: str) -> NestedCodeFamily:
    """Inverse of ``save_family`` on the file contents."""
    lines, meta = _content_lines(text)
    if not lines:
        raise FormatError("empty file")
    try:
        head = [int(t) for t in lines[0].split()]
    except ValueError as e:
        raise FormatError(f"bad header {lines[0]!r}") from e
    if len(head) < 3 or len(head) != 2 + head[1]:
        raise FormatError(f"header must be 'n a k_0 ... k_(a-1)', got {lines[0]!r}")
    n, a, k = head[0], head[1], tuple(head[2:])
    H = _read_rows(lines, n, n, 1)
    perm = meta.pop("perm", None)
    g = meta.pop("g", None)
    return NestedCodeFamily(n, a, k, H, perm=perm, g=g, meta=meta)


def save_binary(H, path, meta=None):
    """Write a plain binary matrix: header ``m n`` then one line per row."""
    H = sp.csr_matrix(H)
    with open(path, "w") as f:
        f.write(f"{H.shape[0]} {H.shape[1]}\n")
        _write_rows(f, H)
        if meta:
            f.write("#meta " + json.dumps(meta, sort_keys=True) + "\n")


def load_binary(path) -> sp.csr_matrix:
    with open(path) as f:
        lines, _ = _content_lines(f.read())
    if not lines:
        raise FormatError("empty file")
    head = lines[0].split()
    if len(head) != 2:
        raise FormatError(f"header must be 'm n', got {lines[0]!r}")
    m, n = int(head[0]), int(head[1])
    return _read_rows(lines, m, n, 1)
