"""Base lattices for Voronoi shaping: Z, E8, BW16 and Leech.

Each base lattice is stored as an integer lattice ``L_int`` together with a
radicand ``q``; the geometric lattice is ``L_int / sqrt(q)``:

* E8:    ``L_int = 2 E8``, points of ``Z^8`` with all coordinates of one parity
  and coordinate sum divisible by 4; ``q = 4``, volume 1.
* BW16:  ``L_int = RM(1,4) + 2 D16``; ``q = 2``, volume 16, minimum norm 4.
* Leech: ``L_int = (2 G24 + 4 D24) u (a + 2 G24 + 4 D24)`` with
  ``a = (-3, 1, ..., 1)`` and ``G24`` the extended Golay code; ``q = 8``,
  volume 1, minimum norm 4.

Every ``L_int`` is a union of cosets of ``s * D_n``, which gives exact
closest-point decoders (``nearest``).  ``sphere_nearest`` is an independent
Schnorr-Euchner enumeration used as the reference.
"""
import functools
import itertools
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import exact
from .errors import FormatError

GOLAY_POLY = (1, 0, 1, 0, 1, 1, 1, 0, 0, 0, 1, 1)  # x^11+x^10+x^6+x^5+x^4+x^2+1, low to high


@functools.lru_cache(maxsize=None)
def golay_codewords() -> np.ndarray:
    """All 4096 codewords of the extended binary Golay code (``4096 x 24`` uint8)."""
    G = np.zeros((12, 24), dtype=np.uint8)
    for r in range(12):
        G[r, r:r + 12] = GOLAY_POLY
        G[r, 23] = sum(GOLAY_POLY) % 2
    return _span(G)


@functools.lru_cache(maxsize=None)
def rm14_codewords() -> np.ndarray:
    """All 32 codewords of the first-order Reed-Muller code RM(1,4)."""
    pts = np.array(list(itertools.product((0, 1), repeat=4)), dtype=np.uint8)
    G = np.vstack([np.ones(16, dtype=np.uint8), pts.T])
    return _span(G)


def _span(G: np.ndarray) -> np.ndarray:
    k = G.shape[0]
    msgs = np.array(list(itertools.product((0, 1), repeat=k)), dtype=np.int64)
    return ((msgs @ G.astype(np.int64)) & 1).astype(np.uint8)


def _dn_nearest(v: np.ndarray) -> np.ndarray:
    """Closest points of ``D_n`` (integer vectors with even sum) to rows of ``v``."""
    f = np.rint(v)
    odd = (f.sum(axis=1) % 2) != 0
    if odd.any():
        r = v[odd] - f[odd]
        k = np.abs(r).argmax(axis=1)
        rows = np.arange(k.size)
        step = np.where(r[rows, k] >= 0, 1.0, -1.0)
        fo = f[odd]
        fo[rows, k] += step
        f[odd] = fo
    return f


def _coset_nearest(y: np.ndarray, shifts: np.ndarray, s: float):
    """Best point over cosets ``t + s D_n`` for every row of ``y``.

    ``shifts`` is ``C x n``; returns ``(points, sqdist)``.
    """
    N, n = y.shape
    best = np.empty_like(y)
    bd = np.full(N, np.inf)
    for t in shifts:
        p = s * _dn_nearest((y - t) / s) + t
        d = ((y - p) ** 2).sum(axis=1)
        better = d < bd
        best[better] = p[better]
        bd[better] = d[better]
    return best, bd


def _leech_nearest(y: np.ndarray, chunk: int = 128) -> np.ndarray:
    """Closest points of the integer Leech lattice to rows of ``y`` (``N x 24``).

    For each of the 8192 cosets of ``4 D24`` the unconstrained cost (nearest
    point of the coset of ``4 Z^24``) is linear in the Golay codeword and is
    evaluated as one matrix product.  The even-sum constraint adds, for cosets
    of odd parity, the cheapest single-coordinate move.  A lower bound using
    the globally cheapest move prunes the exact evaluation to a handful of
    cosets per point.
    """
    C = golay_codewords().astype(np.float64)
    Ct = np.ascontiguousarray(C.T)
    Ct32 = Ct.astype(np.float32)
    a = np.full(24, 1.0)
    a[0] = -3.0
    out = np.empty_like(y)
    for s0 in range(0, y.shape[0], chunk):
        yc = y[s0:s0 + chunk]
        N = yc.shape[0]
        totals, meta = [], []
        for base in (np.zeros(24), a):
            e, z, dlt = [], [], []
            for bit in (0.0, 1.0):
                t = base + 2.0 * bit
                u = (yc - t) / 4.0
                zz = np.rint(u)
                r = u - zz
                e.append(16.0 * r * r)
                z.append(zz)
                # cost of moving to the second-nearest point of t + 4Z
                dlt.append(16.0 * ((1.0 - np.abs(r)) ** 2 - r * r))
            cost = (e[1] - e[0]) @ Ct
            cost += e[0].sum(axis=1)[:, None]
            dz = ((z[1] - z[0]) % 2).astype(np.float32)
            par = (dz @ Ct32).astype(np.int32)
            par += (z[0].sum(axis=1) % 2).astype(np.int32)[:, None]
            par &= 1
            totals.append((cost, par))
            meta.append((z, dlt, r))
        # lower bound on each coset's cost
        pmin = np.minimum(np.minimum(meta[0][1][0], meta[0][1][1]).min(axis=1),
                          np.minimum(meta[1][1][0], meta[1][1][1]).min(axis=1))
        cost = np.concatenate([totals[0][0], totals[1][0]], axis=1)
        parity = np.concatenate([totals[0][1], totals[1][1]], axis=1).astype(bool)
        LB = parity * pmin[:, None]
        LB += cost

        def exact_total(rows, idx):
            h = idx // 4096
            c = C[idx % 4096]
            tot = cost[rows, idx].copy()
            odd = parity[rows, idx]
            if odd.any():
                pen = np.empty(rows.size)
                for half in (0, 1):
                    m = h == half
                    d0, d1 = meta[half][1]
                    pen[m] = np.where(c[m] > 0, d1[rows[m]], d0[rows[m]]).min(axis=1)
                tot[odd] += pen[odd]
            return tot

        rows = np.arange(N)
        first = LB.argmin(axis=1)
        T = exact_total(rows, first)
        cand_r, cand_c = np.nonzero(LB <= T[:, None] * (1 + 1e-12) + 1e-12)
        tot = exact_total(cand_r, cand_c)
        # per row, the minimal exact total (ties: lowest coset index)
        order = np.lexsort((cand_c, tot, cand_r))
        cr, cc = cand_r[order], cand_c[order]
        firsts = np.r_[True, cr[1:] != cr[:-1]]
        best = np.empty(N, dtype=np.int64)
        best[cr[firsts]] = cc[firsts]
        h = best // 4096
        c = C[best % 4096]
        pts = np.empty((N, 24))
        for half in (0, 1):
            m = h == half
            if not m.any():
                continue
            z, dlt, _ = meta[half]
            base = np.zeros(24) if half == 0 else a
            bits = c[m] > 0
            zz = np.where(bits, z[1][m], z[0][m])
            dd = np.where(bits, dlt[1][m], dlt[0][m])
            t = base + 2.0 * bits
            odd = (zz.sum(axis=1) % 2) != 0
            if odd.any():
                k = dd[odd].argmin(axis=1)
                ro = np.arange(k.size)
                u = (yc[m][odd] - t[odd]) / 4.0
                step = np.where(u[ro, k] - zz[odd][ro, k] >= 0, 1.0, -1.0)
                zo = zz[odd]
                zo[ro, k] += step
                zz[odd] = zo
            pts[m] = t + 4.0 * zz
        out[s0:s0 + chunk] = pts
    return out


@dataclass(frozen=True)
class BaseLattice:
    """Integer lattice ``L_int`` (basis vectors are the rows of ``basis``) scaled by ``1/sqrt(q)``."""
    name: str
    q: int
    basis: np.ndarray
    exponent: int  # smallest t with t * Z^dim contained in L_int

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def volume(self):
        """Fundamental volume of ``L_int / sqrt(q)`` (exact when rational)."""
        num, den = self.int_volume, math.isqrt(self.q ** self.dim)
        if den * den == self.q ** self.dim and num % den == 0:
            return num // den
        return num / math.sqrt(self.q) ** self.dim

    @property
    def int_volume(self) -> int:
        return abs(exact.bareiss_det(self.basis))

    def contains(self, p) -> np.ndarray:
        """Membership of integer rows ``p`` (``N x dim``) in ``L_int``."""
        return _member(self.name, np.asarray(p, dtype=np.int64))

    def nearest(self, y) -> np.ndarray:
        """Closest points of ``L_int`` to the rows of ``y`` (fast coset decoder)."""
        y = np.atleast_2d(np.asarray(y, dtype=np.float64))
        return _NEAREST[self.name](y)

    def sphere_nearest(self, y) -> np.ndarray:
        """Closest points by exact sphere search; ties go to the lexicographically smallest."""
        y = np.atleast_2d(np.asarray(y, dtype=np.float64))
        return _sphere_decoder(self.name).nearest(y, self.nearest(y))


def _member(name, p):
    if name == "Z":
        return np.ones(p.shape[0], dtype=bool)
    if name == "E8":
        par = p & 1
        same = (par == par[:, :1]).all(axis=1)
        return same & (p.sum(axis=1) % 4 == 0)
    if name == "BW16":
        cw = rm14_codewords()
        r = (p & 1).astype(np.uint8)
        inc = (r[:, None, :] == cw[None]).all(axis=2).any(axis=1)
        e = p - r
        return inc & ((e // 2).sum(axis=1) % 2 == 0)
    if name == "Leech":
        cw = golay_codewords()
        par = p & 1
        same = (par == par[:, :1]).all(axis=1)
        a = np.full(24, 1)
        a[0] = -3
        q = np.where(par[:, :1] == 1, p - a, p)
        ok = same & ((q & 1) == 0).all(axis=1)
        h = (q // 2) & 1
        keys = _bits_to_int(h)
        golay = np.isin(keys, _bits_to_int(cw))
        rest = (q - 2 * h) // 4
        return ok & golay & (rest.sum(axis=1) % 2 == 0)
    raise KeyError(name)


def _bits_to_int(B):
    B = np.asarray(B, dtype=np.int64)
    return (B << np.arange(B.shape[1], dtype=np.int64)).sum(axis=1)


def _z_nearest(y):
    # ties go to the smaller integer (lexicographically smallest minimizer)
    return np.ceil(y - 0.5)


def _e8_nearest(y):
    return _coset_nearest(y, np.array([np.zeros(8), np.ones(8)]), 2.0)[0]


def _bw16_nearest(y, chunk=4096):
    cw = rm14_codewords().astype(np.float64)
    out = np.empty_like(y)
    for s in range(0, y.shape[0], chunk):
        out[s:s + chunk] = _coset_nearest(y[s:s + chunk], cw, 2.0)[0]
    return out


_NEAREST = {"Z": _z_nearest, "E8": _e8_nearest, "BW16": _bw16_nearest, "Leech": _leech_nearest}


# -- reference sphere search -------------------------------------------------

def lll_reduce(B: np.ndarray, delta: float = 0.99) -> np.ndarray:
    """LLL-reduce the rows of an integer basis (floating Gram-Schmidt, small dims)."""
    B = np.array(B, dtype=np.int64)
    n = B.shape[0]

    def gso(B):
        Bf = B.astype(np.float64)
        Q = np.zeros_like(Bf)
        mu = np.zeros((n, n))
        for i in range(n):
            v = Bf[i].copy()
            for j in range(i):
                mu[i, j] = Bf[i] @ Q[j] / (Q[j] @ Q[j])
                v -= mu[i, j] * Q[j]
            Q[i] = v
        return Q, mu

    Q, mu = gso(B)
    k = 1
    while k < n:
        for j in range(k - 1, -1, -1):
            r = int(round(mu[k, j]))
            if r:
                B[k] -= r * B[j]
                Q, mu = gso(B)
        if Q[k] @ Q[k] >= (delta - mu[k, k - 1] ** 2) * (Q[k - 1] @ Q[k - 1]):
            k += 1
        else:
            B[[k, k - 1]] = B[[k - 1, k]]
            Q, mu = gso(B)
            k = max(k - 1, 1)
    return B


class SphereDecoder:
    """Schnorr-Euchner enumeration of all lattice points within a radius."""

    def __init__(self, basis_rows: np.ndarray):
        self.B = lll_reduce(basis_rows)
        Q, R = np.linalg.qr(self.B.T.astype(np.float64))
        s = np.sign(np.diag(R))
        self.Q = Q * s
        self.R = R * s[:, None]
        self.n = self.B.shape[0]

    def within_batch(self, Y: np.ndarray, r2: np.ndarray, max_nodes: int = 1 << 22):
        """All lattice points within ``r2[i]`` of each row ``Y[i]``.

        Breadth-first over the coefficient levels, vectorized across all
        points of the batch.  Returns ``(owner, points)``: ``points[j]`` lies
        within the radius of ``Y[owner[j]]``.
        """
        n, R = self.n, self.R
        Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
        r2 = np.broadcast_to(np.asarray(r2, dtype=np.float64), (Y.shape[0],))
        yt = Y @ self.Q
        owner = np.arange(Y.shape[0])
        z = np.zeros((Y.shape[0], n))
        partial = np.zeros(Y.shape[0])
        for k in range(n - 1, -1, -1):
            c = (yt[owner, k] - z[:, k + 1:] @ R[k, k + 1:]) / R[k, k]
            w = np.sqrt(np.maximum(r2[owner] - partial, 0.0)) / abs(R[k, k])
            lo = np.ceil(c - w - 1e-9)
            cnt = np.maximum(np.floor(c + w + 1e-9) - lo + 1, 0).astype(np.int64)
            total = int(cnt.sum())
            if total > max_nodes:
                raise MemoryError(f"sphere search frontier of {total} nodes; use smaller batches")
            rep = np.repeat(np.arange(owner.size), cnt)
            start = np.repeat(np.cumsum(cnt) - cnt, cnt)
            v = lo[rep] + (np.arange(total) - start)
            d = partial[rep] + (R[k, k] * (c[rep] - v)) ** 2
            keep = d <= r2[owner[rep]] + 1e-9
            rep, v, d = rep[keep], v[keep], d[keep]
            owner, z, partial = owner[rep], z[rep], d
            z[:, k] = v
        return owner, np.rint(z @ self.B).astype(np.float64)

    def within(self, y: np.ndarray, r2: float) -> np.ndarray:
        """All lattice points ``p`` with ``|y - p|^2 <= r2`` (rows)."""
        return self.within_batch(np.asarray(y, dtype=np.float64)[None], np.array([r2]))[1]

    def nearest(self, Y: np.ndarray, hint: np.ndarray, batch: int = 64) -> np.ndarray:
        """Closest points to the rows of ``Y``; ``hint`` rows are lattice points
        giving the initial radius.  Ties go to the lexicographically smallest."""
        Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
        out = np.empty_like(Y)
        for s0 in range(0, Y.shape[0], batch):
            Yc, Hc = Y[s0:s0 + batch], hint[s0:s0 + batch]
            r2 = ((Yc - Hc) ** 2).sum(axis=1)
            owner, pts = self.within_batch(Yc, r2 * (1 + 1e-9) + 1e-9)
            d = ((pts - Yc[owner]) ** 2).sum(axis=1)
            dmin = np.full(Yc.shape[0], np.inf)
            np.minimum.at(dmin, owner, d)
            m = d <= dmin[owner] * (1 + 1e-12) + 1e-12
            owner, pts = owner[m], pts[m]
            order = np.lexsort(tuple(pts.T[::-1]) + (owner,))
            first = order[np.r_[True, owner[order][1:] != owner[order][:-1]]]
            out[s0 + owner[first]] = pts[first]
        return out


@functools.lru_cache(maxsize=None)
def _sphere_decoder(name):
    return SphereDecoder(base_lattice(name).basis)


# -- construction and data files ----------------------------------------------

def _dn_generators(n, s):
    gens = [s * 2 * np.eye(n, dtype=np.int64)[0]]
    for i in range(1, n):
        v = np.zeros(n, dtype=np.int64)
        v[i - 1], v[i] = s, s
        gens.append(v)
    v = np.zeros(n, dtype=np.int64)
    v[n - 2], v[n - 1] = s, -s
    gens.append(v)
    return gens


def construct(name: str) -> np.ndarray:
    """Integer basis (rows) of ``L_int`` built from its defining codes."""
    if name == "Z":
        return np.eye(1, dtype=np.int64)
    if name == "E8":
        gens = _dn_generators(8, 2) + [np.ones(8, dtype=np.int64)]
    elif name == "BW16":
        G = np.vstack([np.ones(16, dtype=np.int64),
                       np.array(list(itertools.product((0, 1), repeat=4))).T])
        gens = _dn_generators(16, 2) + list(G)
    elif name == "Leech":
        G = golay_codewords()
        rows = [G[1 << i] for i in range(12)]  # span generators
        a = np.full(24, 1, dtype=np.int64)
        a[0] = -3
        gens = _dn_generators(24, 4) + [2 * r.astype(np.int64) for r in rows] + [a]
    else:
        raise KeyError(name)
    H = exact.hnf_lower(np.array(gens, dtype=np.int64).T)
    return np.array(H.T, dtype=np.int64)


_Q = {"Z": 1, "E8": 4, "BW16": 2, "Leech": 8}
_EXPONENT = {"Z": 1, "E8": 4, "BW16": 4, "Leech": 8}
_FILES = {"E8": "e8.txt", "BW16": "bw16.txt", "Leech": "leech.txt"}


def format_basis(name: str, basis: np.ndarray) -> str:
    lines = [f"{name} {basis.shape[0]} {_Q[name]}"]
    lines += [" ".join(str(int(v)) for v in row) for row in basis]
    return "\n".join(lines) + "\n"


def parse_basis(text: str):
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    try:
        name, dim, q = lines[0].split()
        dim, q = int(dim), int(q)
        B = np.array([[int(t) for t in ln.split()] for ln in lines[1:]], dtype=np.int64)
    except (ValueError, IndexError) as e:
        raise FormatError(f"bad base lattice file: {e}") from e
    if B.shape != (dim, dim):
        raise FormatError(f"expected {dim} rows of {dim} integers")
    return name, q, B


@functools.lru_cache(maxsize=None)
def base_lattice(name: str) -> BaseLattice:
    """Load a shipped base lattice and validate its volume and minimum norm."""
    key = {"z": "Z", "e8": "E8", "bw16": "BW16", "leech": "Leech"}.get(name.lower(), name)
    if key == "Z":
        return BaseLattice("Z", 1, np.eye(1, dtype=np.int64), 1)
    if key not in _FILES:
        raise KeyError(f"unknown base lattice {name!r}")
    text = resources.files("dprime").joinpath("data").joinpath(_FILES[key]).read_text()
    nm, q, B = parse_basis(text)
    lat = BaseLattice(key, q, B, _EXPONENT[key])
    expected = {"E8": 1, "BW16": 16, "Leech": 1}[key]
    if lat.volume != expected:
        raise FormatError(f"{key}: unexpected volume {lat.volume}")
    if not lat.contains(B).all():
        raise FormatError(f"{key}: basis vector outside the lattice")
    return lat
