"""Multistage successive-cancellation decoding of Construction D' lattices.

Level ``i`` folds its input with the triangle function, decodes code
``C_i`` with belief propagation and re-encodes the binary estimate into an
integer component ``x_i``.  The residual ``(y_i - x_i) / 2`` feeds the next
level; after the last code level the remaining integers are rounded.
"""
from dataclasses import dataclass, field

import numpy as np

from .bp import BPDecoder, flip_to_codeword
from .encoder import unpack_b
from .errors import DimensionMismatch, NonIntegral, NotACodeword
from .lattice import LatticeSystem


def triangle_mod(y):
    """``|mod_2(y + 1) - 1|``: distance from ``y`` to the nearest even integer."""
    y = np.asarray(y, dtype=np.float64)
    return np.abs(np.mod(y + 1.0, 2.0) - 1.0)


def demap(yp, sigma: float, clip: float = 30.0, mode: str = "gaussian"):
    """LLRs of the level bits from folded values ``yp`` in ``[0, 1]``.

    ``gaussian`` uses the two nearest candidates (0 and 1), giving
    ``(1 - 2 yp) / (2 sigma**2)``.  ``wrapped`` sums the Gaussian over all
    integers of each parity (exact for the folded channel).
    """
    yp = np.asarray(yp, dtype=np.float64)
    s2 = sigma * sigma
    if mode == "gaussian":
        llr = (1.0 - 2.0 * yp) / (2.0 * s2)
    elif mode == "wrapped":
        k = np.arange(-3, 4)[:, None] if yp.ndim == 1 else np.arange(-3, 4)[:, None, None]
        d0 = -((yp[None] - 2.0 * k) ** 2) / (2 * s2)
        d1 = -((yp[None] - 1.0 - 2.0 * k) ** 2) / (2 * s2)
        llr = np.logaddexp.reduce(d0, axis=0) - np.logaddexp.reduce(d1, axis=0)
    else:
        raise ValueError(f"unknown demapping mode {mode!r}")
    return np.clip(llr, -clip, clip)


def default_decoders(sys: LatticeSystem, max_iters: int = 50, llr_clip: float = 30.0) -> list:
    """One BP decoder per level.

    Uses the family's ``decoding_checks`` when present (any parity-check
    matrices of the same codes, typically sparser ones with fewer short
    cycles), else the row suffixes of ``Htilde``.
    """
    checks = sys.codes.decoding_checks
    out = []
    for i in range(sys.a):
        H = checks[i] if checks is not None else sys.codes.level_rows(i)
        out.append(BPDecoder(H, max_iters=max_iters, llr_clip=llr_clip))
    return out


def _level_syndrome(sys, i, words):
    Hi = sys.codes.level_rows(i)
    return np.asarray(Hi @ words.astype(np.int64)) & 1


def reencode_component(sys: LatticeSystem, xtilde, i: int) -> np.ndarray:
    """Integer component ``x_i`` whose residue mod 2 is the codeword ``xtilde``.

    ``u' = Htilde xtilde mod 2`` and then ``Htilde x_i = u'`` over the integers.
    Accepts one word or an ``n x B`` batch.
    """
    w = np.asarray(xtilde).astype(np.int64)
    if w.shape[0] != sys.n:
        raise DimensionMismatch(f"expected length {sys.n}, got {w.shape[0]}")
    if np.any((w != 0) & (w != 1)):
        raise ValueError("xtilde must be binary")
    if _level_syndrome(sys, i, w).any():
        raise NotACodeword(f"word is not a codeword of level {i}")
    u = np.asarray(sys.Htilde @ w) & 1
    return sys.solve_tilde(u)


@dataclass
class DecodeTrace:
    """Per-level record of a multistage decode.

    Arrays carry a trailing batch axis when a batch was decoded.  ``failed``
    marks frames where a level produced no codeword even after bit flipping;
    their ``x`` is not a decoded point.
    """
    y: list = field(default_factory=list)
    yprime: list = field(default_factory=list)
    xtilde: list = field(default_factory=list)
    xhat: list = field(default_factory=list)
    converged: list = field(default_factory=list)
    xhat_a: np.ndarray = None
    x: np.ndarray = None
    failed: np.ndarray = None

    @property
    def ok(self):
        return ~self.failed


def multistage_decode(sys: LatticeSystem, y0, decoders=None, sigma: float = 0.25,
                      demap_mode: str = "gaussian", llr_clip: float = None,
                      max_flips: int = 50, keep_trace: bool = True) -> DecodeTrace:
    """Decode ``y0`` (length ``n`` or ``n x B``) to the nearest lattice point estimate.

    ``sigma`` is the noise standard deviation of ``y0`` and sets the LLR scale;
    level ``i`` uses ``sigma / 2**i``.
    """
    y = np.asarray(y0, dtype=np.float64)
    single = y.ndim == 1
    if single:
        y = y[:, None]
    if y.shape[0] != sys.n:
        raise DimensionMismatch(f"expected length {sys.n}, got {y.shape[0]}")
    if decoders is None:
        decoders = default_decoders(sys)
    if len(decoders) != sys.a:
        raise DimensionMismatch(f"need {sys.a} decoders, got {len(decoders)}")
    B = y.shape[1]
    tr = DecodeTrace()
    failed = np.zeros(B, dtype=bool)
    x = np.zeros((sys.n, B), dtype=np.int64)
    for i in range(sys.a):
        dec = decoders[i]
        clip = dec.llr_clip if llr_clip is None else llr_clip
        yp = triangle_mod(y)
        llr = demap(yp, sigma / 2 ** i, clip, demap_mode)
        words, conv, _ = dec.decode_batch(llr)
        if not conv.all():
            bad = np.nonzero(~conv)[0]
            fixed, ok = flip_to_codeword(dec.H, words[:, bad], max_flips)
            words[:, bad] = fixed
            failed[bad[~ok]] = True
            words[:, bad[~ok]] = 0
        good = ~failed
        u = np.asarray(sys.Htilde @ words.astype(np.int64)) & 1
        xi = np.zeros((sys.n, B), dtype=np.int64)
        if good.any():
            xi[:, good] = sys.solve_tilde(u[:, good])
        if keep_trace:
            tr.y.append(y)
            tr.yprime.append(yp)
            tr.xtilde.append(words)
            tr.xhat.append(xi)
            tr.converged.append(conv)
        x += xi << i
        y = (y - xi) / 2.0
    xa = np.rint(y).astype(np.int64)
    x += xa << sys.a
    tr.xhat_a = xa
    tr.x = x
    tr.failed = failed
    if single:
        tr.y = [v[:, 0] for v in tr.y]
        tr.yprime = [v[:, 0] for v in tr.yprime]
        tr.xtilde = [v[:, 0] for v in tr.xtilde]
        tr.xhat = [v[:, 0] for v in tr.xhat]
        tr.converged = [bool(v[0]) for v in tr.converged]
        tr.xhat_a = xa[:, 0]
        tr.x = x[:, 0]
        tr.failed = bool(failed[0])
    return tr


def recover_messages(sys: LatticeSystem, trace_or_x):
    """Messages ``unpack_b(H x)`` of a decoded point."""
    x = trace_or_x.x if isinstance(trace_or_x, DecodeTrace) else np.asarray(trace_or_x)
    num, shift = sys.check(x)
    sh = shift if num.ndim == 1 else shift[:, None]
    if np.any(num & ((np.int64(1) << sh) - 1)):
        raise NonIntegral("decoded vector is not a lattice point")
    return unpack_b(sys, num >> sh)
