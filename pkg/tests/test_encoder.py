from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from dprime._alt import AltSolver
from dprime.encoder import (LevelMessages, alt_partition, encode_a, encode_b,
                            encode_b_components, pack_b, random_messages, unpack_b)
from dprime.errors import DimensionMismatch, LengthMismatch, NonIntegral, NotALT, SingularGap
from dprime.presets import TOY_HTILDE, toy_system

from oracles import fraction_inverse


def _toy_G_oracle():
    D = [Fraction(1), Fraction(1, 2), Fraction(1, 2), Fraction(1, 4)]
    H = [[D[j] * int(v) for v in row] for j, row in enumerate(TOY_HTILDE)]
    return fraction_inverse(H)


def _apply(M, v):
    return [sum(M[i][j] * int(v[j]) for j in range(len(v))) for i in range(len(M))]


def test_toy_alt_g0_pure_back_substitution(toy):
    part = alt_partition(toy, g=0, perm=np.arange(4))
    assert part.g == 0 and part.W.shape == (0, 4)
    assert np.array_equal(encode_a(part, np.array([0, 0, 0, 1])), [0, 0, 0, 4])
    assert np.array_equal(encode_a(part, np.zeros(4, dtype=np.int64)), np.zeros(4))


def test_toy_alt_g1_partition(toy):
    perm = np.array([3, 0, 1, 2])
    part = alt_partition(toy, g=1, perm=perm)
    assert part.g == 1
    Hp = TOY_HTILDE[:, perm]
    # rows reordered so the gap row comes last; reassembly must reproduce them
    re = part.reassemble().toarray()
    assert sorted(map(tuple, re)) == sorted(map(tuple, Hp))
    T = part.T.toarray()
    assert np.all(np.triu(T, 1) == 0) and np.all(np.diag(T) != 0)
    # Delta times the Schur complement is the identity
    schur = part.schur()
    assert schur.shape == (1, 1) and schur[0, 0] != 0
    assert Fraction(int(part.Delta[0, 0])) * schur[0, 0] == 1
    G = _toy_G_oracle()
    for b in ([0, 0, 0, 1], [1, 2, -3, 4], [5, -1, 0, 2]):
        assert list(encode_a(part, np.array(b))) == _apply(G, b)


def test_singular_gap():
    # T = [1], B = [0], X = [0], C = [1]: the Schur complement X - C T^-1 B is 0
    H = sp.csr_matrix(np.array([[0, 1], [0, 1]]))
    with pytest.raises(SingularGap):
        AltSolver(H, np.array([0, 1]), 1)


def test_not_alt():
    H = sp.csr_matrix(np.array([[1, 1], [0, 1]]))
    with pytest.raises(NotALT):
        AltSolver(H, np.array([0, 1]), 0)


def test_encode_a_dimension(toy):
    part = alt_partition(toy)
    with pytest.raises(DimensionMismatch):
        encode_a(part, np.zeros(3, dtype=np.int64))


@given(st.lists(st.integers(-50, 50), min_size=4, max_size=4))
def test_encode_a_matches_rational_inverse(b):
    sys_ = toy_system()
    part = alt_partition(sys_)
    assert list(encode_a(part, np.array(b))) == _apply(_toy_G_oracle(), b)


def test_pack_examples(toy):
    m = LevelMessages([np.array([1]), np.array([0, 0, 0])], np.zeros(4, dtype=np.int64))
    assert list(pack_b(toy, m)) == [1, 0, 0, 0]
    zero = LevelMessages([np.array([0]), np.array([0, 0, 0])], np.zeros(4, dtype=np.int64))
    assert list(pack_b(toy, zero)) == [0, 0, 0, 0]
    # D (u0' + 2 u1' + 4 z) with u1' = (1, 0, 1, 0): (3, 0, 2, 4) scaled by D
    m2 = LevelMessages([np.array([1]), np.array([1, 0, 1])], np.array([0, 0, 0, 1]))
    assert list(pack_b(toy, m2)) == [3, 0, 1, 1]


def test_unpack_examples(toy):
    m = unpack_b(toy, np.array([3, 0, 1, 1]))
    assert list(m.u[0]) == [1] and list(m.u[1]) == [1, 0, 1] and list(m.z) == [0, 0, 0, 1]
    # (3, 1, 1, 1) is also a valid b: it carries u1 = (1, 1, 1)
    m = unpack_b(toy, np.array([3, 1, 1, 1]))
    assert list(m.u[0]) == [1] and list(m.u[1]) == [1, 1, 1] and list(m.z) == [0, 0, 0, 1]
    z = unpack_b(toy, np.zeros(4, dtype=np.int64))
    assert all(not np.any(u) for u in z.u) and not np.any(z.z)


def test_unpack_nonintegral(toy):
    with pytest.raises(NonIntegral):
        unpack_b(toy, np.array([0.5, 0, 0, 0]))


def test_length_mismatch(toy):
    with pytest.raises(LengthMismatch):
        pack_b(toy, LevelMessages([np.array([1, 0]), np.zeros(3, int)], np.zeros(4, int)))
    with pytest.raises(LengthMismatch):
        encode_b(toy, LevelMessages([np.array([1])], np.zeros(4, int)))
    with pytest.raises(LengthMismatch):
        pack_b(toy, LevelMessages([np.array([1]), np.zeros(3, int)], np.zeros(5, int)))


def test_encode_b_toy_example(toy):
    m = LevelMessages([np.array([1]), np.array([0, 0, 0])], np.zeros(4, dtype=np.int64))
    comps = encode_b_components(toy, m)
    assert list(comps[0]) == [1, -1, 1, -1]
    x = encode_b(toy, m)
    assert list(x) == [1, -1, 1, -1]
    assert list(x % 2) == [1, 1, 1, 1]
    zero = LevelMessages([np.array([0]), np.array([0, 0, 0])], np.zeros(4, dtype=np.int64))
    assert not encode_b(toy, zero).any()


@given(st.integers(0, 1), st.lists(st.integers(0, 1), min_size=3, max_size=3),
       st.lists(st.integers(-9, 9), min_size=4, max_size=4))
def test_toy_methods_agree_and_prop1(u0, u1, z):
    sys_ = toy_system()
    m = LevelMessages([np.array([u0]), np.array(u1)], np.array(z))
    b = pack_b(sys_, m)
    x = encode_b(sys_, m)
    assert np.array_equal(encode_a(alt_partition(sys_), b), x)
    back = unpack_b(sys_, b)
    assert [list(u) for u in back.u] == [[u0], u1] and list(back.z) == z
    comps = encode_b_components(sys_, m)
    for i in range(sys_.a):
        syn = np.asarray(sys_.codes.level_rows(i) @ (comps[i] % 2)) % 2
        assert not syn.any()


def test_table1_methods_agree(table1, rng):
    part = alt_partition(table1)
    m = random_messages(table1, rng, batch=200)
    b = pack_b(table1, m)
    xa = encode_a(part, b)
    xb = encode_b(table1, m)
    assert np.array_equal(xa, xb)
    assert np.array_equal(np.asarray(table1.Htilde @ xa), b << table1.shift[:, None])
    back = unpack_b(table1, b)
    assert all(np.array_equal(u, v) for u, v in zip(back.u, m.u))
    assert np.array_equal(back.z, m.z)


def test_linearity(table1, rng):
    part = alt_partition(table1)
    b1 = rng.integers(-8, 9, size=table1.n)
    b2 = rng.integers(-8, 9, size=table1.n)
    assert np.array_equal(encode_a(part, b1 + b2), encode_a(part, b1) + encode_a(part, b2))


def test_table1_alt_partition_shapes(table1):
    part = alt_partition(table1)
    assert part.g == 96 and part.s == table1.n - 96
    T = part.T.tocsr()
    # T is lower triangular: each row's last nonzero is its diagonal entry
    last = np.array([T.indices[T.indptr[i]:T.indptr[i + 1]].max() for i in range(T.shape[0])])
    assert np.array_equal(last, np.arange(T.shape[0]))
    assert np.all(T.diagonal() != 0)


def test_big_integers_use_exact_path(toy):
    part = alt_partition(toy)
    b = np.array([2 ** 70, 0, -(2 ** 65), 1], dtype=object)
    x = encode_a(part, b)
    assert list(x) == _apply(_toy_G_oracle(), b)
