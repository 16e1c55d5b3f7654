"""Encoding integers (method A) and per-level bits (method B) to lattice points."""
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from ._alt import AltSolver
from .errors import (DimensionMismatch, LengthMismatch, NonIntegral,
                     NotALT)
from .lattice import LatticeSystem


@dataclass
class ALTPartition:
    """``H`` in approximate lower triangular form ``[B T; X C]``.

    Blocks are stored as integer numerators of ``Htilde`` after the column
    permutation; the rational ``H`` block rows are these divided by
    ``2**shift_top`` (first ``s`` rows) and ``2**shift_gap`` (last ``g``).
    ``T`` is lower triangular with its diagonal in columns ``g .. n-1``.
    ``Delta`` and ``W`` refer to ``H`` itself and are integer matrices:
    ``Delta = (X - C T^-1 B)^-1`` and ``W = [-Delta C T^-1 | Delta]``.
    """
    g: int
    s: int
    perm: np.ndarray
    shift_top: np.ndarray
    shift_gap: np.ndarray
    B: sp.csr_matrix
    T: sp.csr_matrix
    X: sp.csr_matrix
    C: sp.csr_matrix
    Delta: np.ndarray
    W: np.ndarray
    solver: AltSolver
    n: int

    def schur(self) -> np.ndarray:
        """``X - C T^-1 B`` of ``H`` as exact Fractions (``g x g``)."""
        phi = self.solver.phi
        out = np.empty(phi.shape, dtype=object)
        for (r, c), v in np.ndenumerate(phi):
            out[r, c] = Fraction(int(v), 2 ** int(self.shift_gap[r]))
        return out

    def reassemble(self) -> sp.csr_matrix:
        """Numerators of the permuted ``H`` rebuilt from the four blocks."""
        top = sp.hstack([self.B, self.T])
        bot = sp.hstack([self.X, self.C])
        return sp.vstack([top, bot]).tocsr()


def alt_partition(sys: LatticeSystem, g: int = None, perm=None) -> ALTPartition:
    """Partition ``H`` into ALT blocks and precompute ``Delta`` and ``W``.

    ``g`` and ``perm`` default to the ALT description the lattice was built
    with (design metadata, or one found by greedy triangularization).
    """
    solver = sys.solver
    if g is None and perm is None and isinstance(solver, AltSolver):
        pass
    else:
        if perm is None:
            perm = sys.codes.perm if sys.codes.perm is not None else np.arange(sys.n)
        if g is None:
            g = sys.codes.g if sys.codes.g is not None else 0
        if not (isinstance(solver, AltSolver) and solver.g == g
                and np.array_equal(solver.perm, perm)):
            solver = AltSolver(sys.Htilde, perm, g)
    if not isinstance(solver, AltSolver):
        raise NotALT("lattice has no ALT description; pass g and perm")
    g, s, n = solver.g, solver.s, solver.n
    Hp = solver.Hp
    shift = sys.shift
    scale = 2 ** shift.astype(object)
    delta = np.asarray(solver.delta, dtype=object) * scale[s:][None, :]
    W = np.asarray(solver.W, dtype=object) * scale[None, :]
    from .exact import to_int64_if_fits
    return ALTPartition(
        g=g, s=s, perm=solver.perm, shift_top=shift[:s], shift_gap=shift[s:],
        B=Hp[:s, :g].tocsr(), T=Hp[:s, g:].tocsr(), X=Hp[s:, :g].tocsr(), C=Hp[s:, g:].tocsr(),
        Delta=to_int64_if_fits(delta) if g else np.zeros((0, 0), np.int64),
        W=to_int64_if_fits(W) if g else np.zeros((0, n), np.int64),
        solver=solver, n=n)


def _check_len(v, n, what="b"):
    v = np.asarray(v)
    if v.shape[0] != n:
        raise DimensionMismatch(f"{what} has length {v.shape[0]}, expected {n}")
    return v


def encode_a(part: ALTPartition, b) -> np.ndarray:
    """Lattice point ``x`` with ``H x = b`` (vector or ``n x B`` batch).

    The gap unknowns are ``W b``; the rest follow by back-substitution,
    ``x_i = (b_j - sum_l h_jl x_l) / h_ji``, done on ``Htilde`` with the
    right-hand side ``2**shift * b``.
    """
    b = _check_len(b, part.n)
    if b.dtype.kind == "f":
        if not np.all(b == np.round(b)):
            raise ValueError("b must be an integer vector")
        b = b.astype(np.int64)
    shift = np.concatenate([part.shift_top, part.shift_gap])
    if b.ndim == 2:
        shift = shift[:, None]
    big = b.dtype == object or (b.size and np.abs(b).max() >= 2**40)
    if big:
        b = b.astype(object)
        c = b * (2 ** shift.astype(object))
        x_gap = part.W.astype(object).dot(b)
    else:
        b = b.astype(np.int64)
        c = b << shift
        x_gap = part.W @ b
    return part.solver.complete(x_gap, c)


@dataclass
class LevelMessages:
    """Per-level bits ``u[i]`` (length ``k_i``) and the integer vector ``z``.

    Arrays may carry a trailing batch axis.
    """
    u: list
    z: np.ndarray

    def validate(self, sys: LatticeSystem):
        if len(self.u) != sys.a:
            raise LengthMismatch(f"expected {sys.a} message levels, got {len(self.u)}")
        for i, ui in enumerate(self.u):
            if np.shape(ui)[0] != sys.k[i]:
                raise LengthMismatch(f"u_{i} has length {np.shape(ui)[0]}, expected {sys.k[i]}")
        if np.shape(self.z)[0] != sys.n:
            raise LengthMismatch(f"z has length {np.shape(self.z)[0]}, expected {sys.n}")


def random_messages(sys: LatticeSystem, rng, batch=None, zmax: int = 4) -> LevelMessages:
    """Uniform bits and ``z`` entries in ``{-zmax .. zmax}``."""
    tail = () if batch is None else (batch,)
    u = [rng.integers(0, 2, size=(ki,) + tail, dtype=np.int64) for ki in sys.k]
    z = rng.integers(-zmax, zmax + 1, size=(sys.n,) + tail, dtype=np.int64)
    return LevelMessages(u, z)


def _padded(sys, msg):
    """Zero-padded ``u_i'`` vectors stacked with ``z``: list of ``a+1`` arrays."""
    z = np.asarray(msg.z)
    tail = z.shape[1:]
    out = []
    for i, ui in enumerate(msg.u):
        pad = np.zeros((sys.n,) + tail, dtype=np.int64)
        pad[:sys.k[i]] = np.asarray(ui, dtype=np.int64)
        out.append(pad)
    out.append(z)
    return out


def pack_b(sys: LatticeSystem, msg: LevelMessages) -> np.ndarray:
    """``b = D (u_0' + 2 u_1' + ... + 2**(a-1) u_(a-1)' + 2**a z)``."""
    msg.validate(sys)
    parts = _padded(sys, msg)
    obj = any(np.asarray(p).dtype == object for p in parts)
    dt = object if obj else np.int64
    v = np.zeros(parts[0].shape, dtype=dt)
    for i, p in enumerate(parts):
        v = v + np.asarray(p).astype(dt) * (2 ** i)
    shift = sys.shift if v.ndim == 1 else sys.shift[:, None]
    if obj:
        den = 2 ** shift.astype(object)
        if np.any(v % den != 0):
            raise NonIntegral("packed vector is not integral")
        return v // den
    if np.any(v & ((np.int64(1) << shift) - 1)):
        raise NonIntegral("packed vector is not integral")
    return v >> shift


def unpack_b(sys: LatticeSystem, b) -> LevelMessages:
    """Inverse of :func:`pack_b`."""
    b = _check_len(b, sys.n)
    shift = sys.shift if b.ndim == 1 else sys.shift[:, None]
    if b.dtype == object or b.dtype.kind == "f":
        vals = np.empty(b.shape, dtype=object)
        for idx, val in np.ndenumerate(b):
            fv = Fraction(val) if not isinstance(val, Fraction) else val
            sc = fv * 2 ** int(shift[idx[0]] if shift.ndim == 1 else shift[idx[0], 0])
            if sc.denominator != 1 or fv.denominator != 1:
                raise NonIntegral(f"entry {idx} = {val} is not an integer")
            vals[idx] = int(sc)
        v = vals
        big = True
    else:
        v = b.astype(np.int64) << shift
        big = False
    u = []
    for i in range(sys.a):
        vi = v[:sys.k[i]]
        if big:
            u.append(np.asarray((vi // (2 ** i)) % 2, dtype=np.int64))
        else:
            u.append((vi >> i) & 1)
    z = v // (2 ** sys.a) if big else v >> sys.a
    return LevelMessages(u, z)


def encode_b_components(sys: LatticeSystem, msg: LevelMessages) -> list:
    """Integer solutions ``x_i`` of ``Htilde x_i = u_i'`` and ``Htilde x_a = z``."""
    msg.validate(sys)
    parts = _padded(sys, msg)
    obj = any(np.asarray(p).dtype == object for p in parts)
    rhs = np.stack([np.asarray(p) for p in parts], axis=1)  # n x (a+1) [x B]
    shp = rhs.shape
    rhs2 = rhs.reshape(shp[0], -1)
    if obj:
        rhs2 = rhs2.astype(object)
    sol = sys.solve_tilde(rhs2).reshape(shp)
    return [sol[:, i] for i in range(sys.a + 1)]


def encode_b(sys: LatticeSystem, msg: LevelMessages) -> np.ndarray:
    """``x = x_0 + 2 x_1 + ... + 2**a x_a`` from the per-level integer solves."""
    comps = encode_b_components(sys, msg)
    x = comps[0].copy()
    for i, xi in enumerate(comps[1:], start=1):
        x = x + xi * (2 ** i)
    return x
