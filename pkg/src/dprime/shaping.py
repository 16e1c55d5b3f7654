"""Voronoi shaping of Construction D' lattices.

A shaping lattice ``Lambda_s`` is either the hypercube lattice ``L Z^n`` or a
direct sum of ``n / dim`` copies of ``K * B`` for a base lattice ``B`` (E8,
BW16, Leech).  The factor ``K = k * sqrt(r)`` is kept symbolically so that
``Lambda_s = c * L_int`` with the exact rational ``c = K / sqrt(q)``.

Rectangular encoding uses the lower-triangular Hermite form ``T`` of
``A = H G_s``: message ``b`` with ``0 <= b_i < M_i = T_ii`` maps to
``x' = G b - Q(G b)`` and back via ``b = (H x') mod T``.
"""
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from . import exact
from .baselattices import BaseLattice, base_lattice
from .errors import InvalidL, NestingViolated, NotALatticePoint, RangeViolation
from .lattice import LatticeSystem, log2_volume


def _exact_sqrt(fr: Fraction):
    """Square root of a non-negative Fraction if rational, else None."""
    p, q = fr.numerator, fr.denominator
    sp_, sq = math.isqrt(p), math.isqrt(q)
    if sp_ * sp_ == p and sq * sq == q:
        return Fraction(sp_, sq)
    return None


@dataclass(frozen=True)
class ShapingLattice:
    """``Lambda_s``: ``copies`` scaled copies of ``base`` with ``K = k * sqrt(r)``.

    The hypercube lattice ``L Z^n`` is the case ``base = Z``, ``K = (L, 1)``.
    """
    base: BaseLattice
    K: tuple  # (k, r): K = k * sqrt(r)
    copies: int

    @property
    def kind(self) -> str:
        return "hypercube" if self.base.name == "Z" else "directsum"

    @property
    def n(self) -> int:
        return self.base.dim * self.copies

    @property
    def K_value(self) -> float:
        return self.K[0] * math.sqrt(self.K[1])

    @property
    def scale(self):
        """Exact ``c = K / sqrt(q)`` with ``Lambda_s = c * L_int``, or None if irrational."""
        k, r = self.K
        return _exact_sqrt(Fraction(k * k * r, self.base.q))

    @property
    def base_volume(self):
        return self.base.volume

    def log2_volume(self) -> float:
        """``log2 Vol(Lambda_s)``."""
        k, r = self.K
        per = self.base.dim * (math.log2(k) + 0.5 * math.log2(r)) + math.log2(self.base.volume)
        return self.copies * per

    def Gs(self) -> np.ndarray:
        """Block-diagonal generator (basis as columns), float."""
        B = self.base.basis.T.astype(np.float64) * (self.K_value / math.sqrt(self.base.q))
        return np.kron(np.eye(self.copies), B)

    def __str__(self):
        if self.kind == "hypercube":
            return f"hypercube(L={self.K[0]})"
        k, r = self.K
        Ks = f"{k}" if r == 1 else f"{k}*sqrt({r})"
        return f"{self.base.name}(K={Ks}) x{self.copies}"


def hypercube(L: int, n: int) -> ShapingLattice:
    return ShapingLattice(base_lattice("Z"), (int(L), 1), n)


def direct_sum(name: str, K, n: int) -> ShapingLattice:
    """``n / dim`` copies of ``K * base``; ``K`` is an int or a ``(k, radicand)`` pair."""
    B = base_lattice(name)
    if n % B.dim:
        raise ValueError(f"n={n} is not a multiple of the {B.name} dimension {B.dim}")
    if isinstance(K, (int, np.integer)):
        K = (int(K), 1)
    return ShapingLattice(B, (int(K[0]), int(K[1])), n // B.dim)


def parse_shaping(spec: str, n: int) -> ShapingLattice:
    """Parse ``hypercube:8``, ``e8:472``, ``bw16:280*sqrt2`` or ``leech:168*sqrt8``."""
    try:
        name, K = spec.split(":")
        name = name.strip().lower()
        if "*sqrt" in K:
            k, r = K.split("*sqrt")
            K = (int(k), int(r))
        else:
            K = (int(K), 1)
    except ValueError as e:
        raise ValueError(f"bad shaping spec {spec!r}") from e
    if name == "hypercube":
        if K[1] != 1:
            raise ValueError("hypercube side must be an integer")
        return hypercube(K[0], n)
    return direct_sum(name, K, n)


def quantize(s: ShapingLattice, y, method: str = "fast") -> np.ndarray:
    """Closest point of ``Lambda_s`` to ``y`` (length ``n`` or ``n x B``), blockwise.

    ``method="sphere"`` uses exact sphere search with lexicographic tie-break.
    """
    y = np.asarray(y, dtype=np.float64)
    single = y.ndim == 1
    Y = y[:, None] if single else y
    n, Bn = Y.shape
    if n != s.n:
        raise ValueError(f"expected length {s.n}, got {n}")
    c = s.K_value / math.sqrt(s.base.q)
    d = s.base.dim
    blocks = Y.reshape(s.copies, d, Bn).transpose(0, 2, 1).reshape(-1, d) / c
    if method == "fast":
        P = s.base.nearest(blocks)
    elif method == "sphere":
        P = s.base.sphere_nearest(blocks)
    else:
        raise ValueError(f"unknown method {method!r}")
    out = (P * c).reshape(s.copies, Bn, d).transpose(0, 2, 1).reshape(n, Bn)
    return out[:, 0] if single else out


def contains(s: ShapingLattice, x) -> np.ndarray:
    """Exact membership of integer points in ``Lambda_s`` (batch over columns)."""
    x = np.asarray(x)
    single = x.ndim == 1
    X = x[:, None] if single else x
    c = s.scale
    if c is None:
        raise NestingViolated("irrational scale: Lambda_s has no integer points")
    X = np.asarray(X, dtype=np.int64)
    if c.denominator == 1:
        ok = np.all(X % c.numerator == 0, axis=0)
        P = X // c.numerator
    else:
        num = X.astype(object) * c.denominator
        ok = np.all(num % c.numerator == 0, axis=0)
        P = np.zeros(X.shape, dtype=np.int64)
        P[:, ok] = (num[:, ok] // c.numerator).astype(np.int64)
    d = s.base.dim
    blocks = P.reshape(s.copies, d, -1).transpose(0, 2, 1).reshape(-1, d)
    inb = s.base.contains(blocks).reshape(s.copies, -1).all(axis=0)
    res = ok & inb
    return bool(res[0]) if single else res


# -- nesting and rectangular indexing ------------------------------------------

def _block_generator(s: ShapingLattice, perm: np.ndarray) -> sp.csr_matrix:
    """Integer lower-triangular basis of ``L_int^copies`` in ``perm`` coordinate order."""
    n, d = s.n, s.base.dim
    pos = np.empty(n, dtype=np.int64)
    pos[perm] = np.arange(n)
    if d == 1:
        return sp.identity(n, dtype=np.int64, format="csr")
    rows, cols, vals = [], [], []
    cache = {}
    Bt = s.base.basis.T  # columns are basis vectors
    for b in range(s.copies):
        coords = np.arange(b * d, (b + 1) * d)
        order = np.argsort(pos[coords], kind="stable")
        key = tuple(order)
        if key not in cache:
            cache[key] = np.array(exact.hnf_lower(Bt[order]), dtype=np.int64)
        Hb = cache[key]
        P = pos[coords[order]]
        r, c_ = np.nonzero(Hb)
        rows.append(P[r])
        cols.append(P[c_])
        vals.append(Hb[r, c_])
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n))


def _nesting_matrix(sys: LatticeSystem, s: ShapingLattice, perm):
    """``A = H[:, perm] G_s'`` as an integer sparse matrix, or None if not integral."""
    c = s.scale
    if c is None:
        return None
    G = _block_generator(s, perm)
    N = (sys.Htilde[:, perm] @ G).tocsr()
    N.sum_duplicates()
    N.eliminate_zeros()
    shift = sys.codes.shifts
    rows = np.repeat(np.arange(sys.n), np.diff(N.indptr))
    den = c.denominator * (np.int64(1) << shift[rows])
    num = N.data.astype(object) * c.numerator
    if np.any(num % den.astype(object) != 0):
        return None
    A = N.copy()
    A.data = (num // den.astype(object)).astype(np.int64)
    return A


def verify_nesting(sys: LatticeSystem, s: ShapingLattice) -> bool:
    """Exact check that ``H G_s`` is an integer matrix (``Lambda_s`` inside ``Lambda_c``)."""
    if s.n != sys.n:
        return False
    perm = np.arange(sys.n)
    return _nesting_matrix(sys, s, perm) is not None


def _xgcd(a, b):
    return exact._xgcd(int(a), int(b))


def banded_hnf(A: sp.csr_matrix, R: int) -> np.ndarray:
    """Lower-triangular basis of the lattice spanned by the columns of ``A``.

    Requires ``R * Z^n`` to lie in that lattice; all work is modulo ``R``, so
    entries stay below ``R``.  Columns enter the active set at their first
    non-zero row, which keeps the work per row proportional to the number of
    columns meeting it (the upper bandwidth plus carried vectors).  Returns
    the dense ``n x n`` integer basis with positive diagonal and entries
    below the diagonal in ``[0, R)``.
    """
    n = A.shape[0]
    Ac = sp.csc_matrix(A, copy=True)
    Ac.data %= R
    Ac.eliminate_zeros()
    Ac.sort_indices()
    first = np.full(A.shape[1], n, dtype=np.int64)
    nz = np.diff(Ac.indptr) > 0
    first[nz] = Ac.indices[Ac.indptr[:-1][nz]]
    enter = np.argsort(first, kind="stable")
    enter = enter[first[enter] < n]
    cap = 2 * n
    W = np.zeros((cap, n), dtype=np.int64)  # one vector per row of W
    W[:enter.size] = Ac.T.toarray()[enter] % R
    start = first[enter]
    used = enter.size
    act = np.zeros(0, dtype=np.int64)
    ptr = 0
    T = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        k = np.searchsorted(start, i, side="right")
        if k > ptr:
            act = np.concatenate([act, np.arange(ptr, k)])
            ptr = k
        hit = act[W[act, i] != 0]
        # pairwise tree reduction of the hit vectors to a single pivot
        while hit.size > 1:
            h2 = hit.size // 2
            P, V = hit[:h2], hit[h2:2 * h2]
            pi, vi = W[P, i], W[V, i]
            coef = np.array([_xgcd(a, b) for a, b in zip(pi.tolist(), vi.tolist())], dtype=np.int64)
            g, s_, t_ = coef[:, 0:1], coef[:, 1:2], coef[:, 2:3]
            a_, b_ = pi[:, None] // g, vi[:, None] // g
            wp, wv = W[P, i:], W[V, i:]
            W[P, i:] = (s_ * wp + t_ * wv) % R
            W[V, i:] = (a_ * wv - b_ * wp) % R
            hit = np.concatenate([P, hit[2 * h2:]])
        col = np.zeros(n, dtype=np.int64)
        if hit.size == 0:
            col[i] = R
        else:
            p = hit[0]
            g0 = int(W[p, i])
            h, u, _ = _xgcd(g0, R)
            if h != g0:
                extra = ((R // h) * W[p, i:]) % R
                extra[0] = 0
                if extra[1:].any():
                    if used == cap:
                        W = np.vstack([W, np.zeros_like(W)])
                        cap *= 2
                    W[used, i:] = extra
                    act = np.concatenate([act, [used]])
                    used += 1
                col[i:] = (u * W[p, i:]) % R
            else:
                col[i:] = W[p, i:]
            col[i] = h
            act = act[act != p]
        T[:, i] = col
        if i % 64 == 63 and act.size:
            act = act[W[act, i + 1:].any(axis=1)]
    return T


@dataclass
class NestedLatticeCode:
    """Coding lattice ``Lambda_c`` with shaping sublattice ``Lambda_s``."""
    coding: LatticeSystem
    shaping: ShapingLattice
    T: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        sys, s = self.coding, self.shaping
        if s.n != sys.n:
            raise NestingViolated(f"shaping dimension {s.n} != lattice dimension {sys.n}")
        perm = sys.codes.perm if sys.codes.perm is not None else np.arange(sys.n)
        A = _nesting_matrix(sys, s, perm)
        if A is None:
            raise NestingViolated(f"{s} is not a sublattice of the coding lattice")
        # R Z^n is contained in Lambda_s, hence in the lattice of A
        self.modulus = (s.scale * s.base.exponent).numerator
        if self.T is None:
            self.T = banded_hnf(A, self.modulus)

    @property
    def n(self) -> int:
        return self.coding.n

    @property
    def M(self) -> np.ndarray:
        """Rectangular ranges ``M_i`` (diagonal of the triangular form)."""
        return np.diag(self.T).copy()

    @property
    def rate(self) -> float:
        return code_rate(self)[0]

    def random_b(self, rng, batch=None) -> np.ndarray:
        M = self.M
        if batch is None:
            return rng.integers(0, M)
        return rng.integers(0, M[:, None], size=(self.n, batch))

    def reduce(self, b) -> np.ndarray:
        """Representative of ``b`` modulo the columns of ``T`` inside the box."""
        b = np.array(b, dtype=np.int64, copy=True)
        single = b.ndim == 1
        if single:
            b = b[:, None]
        T, R = self.T, self.modulus
        # R Z^n lies in the lattice of T, so b_i may be taken modulo R before
        # each step; this keeps every quotient below R and all entries small
        for i in range(self.n):
            b[i] %= R
            q = b[i] // T[i, i]
            if q.any():
                b[i:] -= T[i:, i:i + 1] * q[None, :]
        return b[:, 0] if single else b


def voronoi_encode(code: NestedLatticeCode, b, method: str = "fast") -> np.ndarray:
    """``x' = G b - Q_s(G b)`` for ``0 <= b_i < M_i`` (one vector or ``n x B``)."""
    b = np.asarray(b, dtype=np.int64)
    M = code.M if b.ndim == 1 else code.M[:, None]
    if np.any(b < 0) or np.any(b >= M):
        raise RangeViolation("message entries outside their rectangular ranges")
    x = code.coding.generate(b)
    q = quantize(code.shaping, x.astype(np.float64), method)
    return x - np.rint(q).astype(np.int64)


def index(code: NestedLatticeCode, xp) -> np.ndarray:
    """Inverse of ``voronoi_encode``: ``b = (H x') mod T``."""
    xp = np.asarray(xp)
    if not np.all(np.asarray(xp) == np.rint(xp)):
        raise NotALatticePoint("non-integer vector")
    num, shift = code.coding.check(np.rint(xp).astype(np.int64))
    sh = shift if num.ndim == 1 else shift[:, None]
    if np.any(num & ((np.int64(1) << sh) - 1)):
        raise NotALatticePoint("H x' is not an integer vector")
    return code.reduce(num >> sh)


def code_rate(code: NestedLatticeCode):
    """``(R, R_check)``: volume-ratio rate and ``sum(log2 M_i) / n``."""
    n = code.n
    R = (code.shaping.log2_volume() - log2_volume(code.coding)) / n
    Rc = float(np.log2(code.M.astype(np.float64)).sum()) / n
    return R, Rc


def rate_from_volumes(sys_or_n, log2_vol_c: float, s: ShapingLattice) -> float:
    """Volume-ratio rate without building the index (no nesting check)."""
    n = sys_or_n if isinstance(sys_or_n, int) else sys_or_n.n
    return (s.log2_volume() - log2_vol_c) / n


def hypercube_shape(sys: LatticeSystem, x, L: int) -> np.ndarray:
    """Reduce lattice points into ``{0, ..., L-1}^n``; requires ``L Z^n`` inside ``Lambda_c``."""
    if L <= 0 or not verify_nesting(sys, hypercube(L, sys.n)):
        raise InvalidL(f"{L} Z^n is not a sublattice of the coding lattice")
    return np.mod(np.asarray(x, dtype=np.int64), L)


def estimate_shaping_gain(s: ShapingLattice, samples: int = 10 ** 6, seed=0,
                          chunk: int = 1 << 16, return_stderr: bool = False):
    """Shaping gain ``-10 log10(12 G)`` in dB by Monte Carlo.

    Points drawn uniformly over a fundamental parallelotope of the base
    lattice are reduced by the quantizer; the errors are uniform over the
    Voronoi region and give its normalized second moment ``G``.  The
    hypercube has ``G = 1/12`` exactly and returns 0.
    """
    if s.kind == "hypercube":
        return (0.0, 0.0) if return_stderr else 0.0
    B = s.base
    rng = np.random.default_rng(seed)
    basis = B.basis.astype(np.float64)
    tot, tot2, cnt = 0.0, 0.0, 0
    while cnt < samples:
        m = min(chunk, samples - cnt)
        y = rng.random((m, B.dim)) @ basis
        e = y - B.nearest(y)
        r = (e * e).sum(axis=1)
        tot += r.sum()
        tot2 += (r * r).sum()
        cnt += m
    mean = tot / cnt
    var = tot2 / cnt - mean * mean
    G = mean / B.dim / B.int_volume ** (2.0 / B.dim)
    gain = -10 * math.log10(12 * G)
    if return_stderr:
        se = 10 / math.log(10) * math.sqrt(var / cnt) / mean
        return gain, se
    return gain
