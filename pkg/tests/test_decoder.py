import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dprime.bp import BPDecoder, bp_decode, flip_to_codeword
from dprime.decoder import (default_decoders, demap, multistage_decode, recover_messages,
                            reencode_component, triangle_mod)
from dprime.encoder import LevelMessages, encode_b, pack_b, random_messages
from dprime.errors import DimensionMismatch, NonIntegral, NotACodeword
from dprime.lattice import member_by_congruence
from dprime.presets import TOY_HTILDE, toy_system


@pytest.mark.parametrize("y,want", [(0, 0), (1, 1), (2, 0), (2.5, 0.5), (-0.25, 0.25),
                                    (-1, 1), (3.75, 0.25)])
def test_triangle_examples(y, want):
    assert triangle_mod(np.array([y]))[0] == pytest.approx(want)


@given(st.floats(-1e3, 1e3), st.integers(-100, 100))
def test_triangle_range_and_even_shift(y, k):
    v = triangle_mod(np.array([y]))[0]
    assert 0 <= v <= 1
    # distance to the nearest even integer
    assert v == pytest.approx(min(abs(y - 2 * math.floor(y / 2)), abs(y - 2 * math.ceil(y / 2))),
                              abs=1e-9)
    assert triangle_mod(np.array([y + 2 * k]))[0] == pytest.approx(v, abs=1e-6)


def _gaussian(x, s):
    return math.exp(-x * x / (2 * s * s))


@given(st.floats(0, 1), st.floats(0.05, 2.0))
def test_demap_gaussian_is_nearest_candidate_llr(yp, sigma):
    want = math.log(_gaussian(yp, sigma) / _gaussian(yp - 1, sigma))
    got = demap(np.array([yp]), sigma, clip=1e9)[0]
    assert got == pytest.approx(want, rel=1e-9, abs=1e-9)


def test_demap_wrapped_matches_full_sum():
    sigma = 0.6
    for yp in (0.0, 0.2, 0.5, 0.9):
        even = sum(_gaussian(yp - 2 * k, sigma) for k in range(-30, 31))
        odd = sum(_gaussian(yp - 1 - 2 * k, sigma) for k in range(-30, 31))
        got = demap(np.array([yp]), sigma, clip=1e9, mode="wrapped")[0]
        assert got == pytest.approx(math.log(even / odd), abs=1e-9)


def test_demap_clip():
    assert demap(np.array([0.0, 1.0]), 1e-3, clip=30).tolist() == [30.0, -30.0]


def _toy_code_H0():
    return TOY_HTILDE[1:]


def _codewords(H):
    words = np.array(list(itertools.product((0, 1), repeat=H.shape[1])))
    return words[((H @ words.T) % 2 == 0).all(axis=0)]


def test_bp_saturated_codeword():
    H = _toy_code_H0()
    dec = BPDecoder(H)
    for c in _codewords(H):
        llr = np.where(c == 1, -30.0, 30.0)
        w, ok = bp_decode(dec, llr)
        assert ok and np.array_equal(w, c)


def test_bp_zero_llr_ties_to_zero():
    dec = BPDecoder(_toy_code_H0())
    w, ok = dec.decode(np.zeros(4))
    assert ok and not w.any()


def test_bp_corrects_single_flip_like_ml():
    # ML oracle: the codeword maximizing sum_i (1 - 2 c_i) llr_i
    H = np.array([[1, 1, 0, 1, 0, 0], [0, 1, 1, 0, 1, 0], [1, 0, 1, 0, 0, 1]])
    cw = _codewords(H)
    dec = BPDecoder(H)
    rng = np.random.default_rng(0)
    for c in cw:
        for flip in range(6):
            llr = np.where(c == 1, -4.0, 4.0) + rng.normal(0, 0.3, 6)
            llr[flip] = -llr[flip] * 0.5
            ml = cw[np.argmax((1 - 2 * cw) @ llr)]
            w, ok = dec.decode(llr)
            assert ok and np.array_equal(w, ml)


def test_bp_precisions_agree(table1):
    H = table1.codes.decoding_checks[0]
    rng = np.random.default_rng(3)
    s = 0.85
    llr = 2 * (1 + rng.normal(0, s, (H.shape[1], 100))) / s ** 2
    a = BPDecoder(H).decode_batch(llr)
    b = BPDecoder(H, dtype=np.float64).decode_batch(llr)
    assert np.array_equal(a[1], b[1])
    assert (a[0] != b[0]).any(axis=0).sum() <= 1


def test_bp_batch_equals_single():
    H = np.array([[1, 1, 0, 1, 0, 0], [0, 1, 1, 0, 1, 0], [1, 0, 1, 0, 0, 1]])
    rng = np.random.default_rng(1)
    llr = rng.normal(1, 2, (6, 40))
    dec = BPDecoder(H)
    W, ok, _ = dec.decode_batch(llr)
    for j in range(40):
        w, o = dec.decode(llr[:, j])
        assert np.array_equal(w, W[:, j]) and o == ok[j]


def test_flip_to_codeword():
    H = np.array([[1, 1, 0, 1, 0, 0], [0, 1, 1, 0, 1, 0], [1, 0, 1, 0, 0, 1]])
    w = np.array([[0, 1, 0, 0, 0, 0], [0, 0, 0, 0, 0, 0]]).T.astype(np.uint8)
    fixed, ok = flip_to_codeword(H, w)
    assert ok.all()
    assert not ((H @ fixed) % 2).any()
    assert np.array_equal(fixed[:, 1], np.zeros(6))


def test_reencode_examples(toy):
    x0 = reencode_component(toy, np.array([1, 1, 1, 1]), 0)
    assert list(x0) == [1, -1, 1, -1]
    assert list(np.asarray(toy.Htilde @ np.array([1, 1, 1, 1])) % 2) == [1, 0, 0, 0]
    assert not reencode_component(toy, np.zeros(4, dtype=int), 0).any()
    with pytest.raises(NotACodeword):
        reencode_component(toy, np.array([1, 0, 0, 0]), 0)


def _toy_coset_reps():
    # 4 Z^4 is a sublattice of the toy lattice; its 16 cosets are found by
    # filtering {0..3}^4 with the congruence definition
    box = np.array(list(itertools.product(range(4), repeat=4))).T
    return box[:, member_by_congruence(toy_system().codes, box)].T


def _nearest_toy_points(Y):
    """Exact nearest toy-lattice points to the columns of Y, with a uniqueness flag."""
    reps = _toy_coset_reps()
    assert len(reps) == 16
    Yt = Y.T
    cands = np.stack([r + 4 * np.round((Yt - r) / 4) for r in reps])  # 16 x B x 4
    d = ((cands - Yt[None]) ** 2).sum(axis=2)
    order = np.argsort(d, axis=0)
    j = np.arange(Yt.shape[0])
    best = cands[order[0], j]
    gap = d[order[1], j] - d[order[0], j]
    # inside one coset the runner-up is 4 away in some coordinate, so the
    # nearest point is unique unless two cosets tie or a rounding is at .5
    frac = np.abs((Yt - best) / 4)
    unique = (gap > 1e-9) & (frac.max(axis=1) < 0.5 - 1e-9)
    return best.T.astype(np.int64), unique


def _box_nearest(Y):
    # slower cross-check of the coset oracle: search a box around each column
    codes = toy_system().codes
    out = []
    for y in Y.T:
        base = np.floor(y).astype(int)
        cand = np.array(list(itertools.product(*[range(b - 3, b + 4) for b in base]))).T
        pts = cand[:, member_by_congruence(codes, cand)]
        out.append(pts[:, np.argmin(((pts - y[:, None]) ** 2).sum(axis=0))])
    return np.array(out).T


def test_toy_multistage_example(toy):
    y0 = np.array([1.1, -0.9, 1.2, -1.1])
    tr = multistage_decode(toy, y0, sigma=0.25)
    assert list(tr.x) == [1, -1, 1, -1]
    want, unique = _nearest_toy_points(y0[:, None])
    assert unique[0] and np.array_equal(tr.x, want[:, 0])
    # trace bookkeeping: x = sum 2^i x_i
    total = sum(xi * 2 ** i for i, xi in enumerate(tr.xhat)) + tr.xhat_a * 2 ** toy.a
    assert np.array_equal(total, tr.x)
    m = recover_messages(toy, tr)
    assert list(m.u[0]) == [1] and not m.u[1].any() and not m.z.any()


def test_toy_matches_brute_force_oracle(toy):
    rng = np.random.default_rng(7)
    trials = 10_000
    b = rng.integers(-6, 7, size=(4, trials))
    x = toy.generate(b)
    sigma = 0.2
    y = x + rng.normal(0, sigma, x.shape)
    tr = multistage_decode(toy, y, sigma=sigma, keep_trace=False)
    want, unique = _nearest_toy_points(y)
    assert np.array_equal(want[:, :50], _box_nearest(y[:, :50]))
    agree = (tr.x == want).all(axis=0) & unique
    assert agree.sum() / unique.sum() >= 0.99


def test_noiseless_table1(table1, rng):
    m = random_messages(table1, rng, batch=100)
    x = encode_b(table1, m)
    tr = multistage_decode(table1, x.astype(float), sigma=0.2)
    assert np.array_equal(tr.x, x)
    assert all(c.all() for c in tr.converged)
    back = recover_messages(table1, tr)
    assert all(np.array_equal(u, v) for u, v in zip(back.u, m.u))
    assert np.array_equal(back.z, m.z)


def test_table1_small_noise(table1, rng):
    b = rng.integers(-4, 5, size=(table1.n, 100))
    x = table1.generate(b)
    sigma = 0.15
    tr = multistage_decode(table1, x + rng.normal(0, sigma, x.shape), sigma=sigma,
                           keep_trace=False)
    assert np.array_equal(tr.x, x)


def test_even_shift_equivariance(table1, rng):
    b = rng.integers(-4, 5, size=(table1.n, 20))
    x = table1.generate(b)
    lam = table1.generate(rng.integers(-3, 4, size=(table1.n, 20)))
    y = x + rng.normal(0, 0.25, x.shape)
    decs = default_decoders(table1)
    t1 = multistage_decode(table1, y, decs, sigma=0.25, keep_trace=False)
    t2 = multistage_decode(table1, y + 2 * lam, decs, sigma=0.25, keep_trace=False)
    same = ~t1.failed & ~t2.failed
    assert np.array_equal(t2.x[:, same], t1.x[:, same] + 2 * lam[:, same])


def test_level_congruence(table1, rng):
    b = rng.integers(-4, 5, size=(table1.n, 10))
    x = table1.generate(b)
    y = x + rng.normal(0, 0.2, x.shape)
    tr = multistage_decode(table1, y, sigma=0.2)
    for yi, xi in zip(tr.y, tr.xhat):
        r = yi - xi
        assert np.abs(r - 2 * np.round(r / 2)).max() < 1.0


def test_recover_messages_off_lattice(toy):
    with pytest.raises(NonIntegral):
        recover_messages(toy, np.array([1, 0, 0, 0]))


def test_recover_roundtrip_toy(toy):
    m = LevelMessages([np.array([1]), np.array([1, 0, 1])], np.array([0, 2, -1, 1]))
    x = encode_b(toy, m)
    back = recover_messages(toy, x)
    assert np.array_equal(pack_b(toy, back), pack_b(toy, m))


def test_decode_dimension_checks(toy):
    with pytest.raises(DimensionMismatch):
        multistage_decode(toy, np.zeros(3))
    with pytest.raises(DimensionMismatch):
        multistage_decode(toy, np.zeros(4), decoders=[])
