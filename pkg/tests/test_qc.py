import itertools
import time
from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp

from dprime import qc
from dprime.errors import (CollisionError, DimensionMismatch, FormatError, GirthUnachievable,
                           Infeasible, RankDeficient)
from dprime.lattice import build_lattice, lattice_volume, member_by_congruence
from dprime.presets import TOY_HTILDE, table1_checks, table1_family, toy_system

from oracles import gf2_rank, tanner_girth


def test_prototype_parse_format_roundtrip():
    text = "2 3 5\n0 -1 2/4\n-1 3 1\n"
    p = qc.PrototypeMatrix.parse(text)
    assert p.entries == [[(0,), (), (2, 4)], [(), (3,), (1,)]]
    assert qc.PrototypeMatrix.parse(p.format()) == p


@pytest.mark.parametrize("text", ["2 2 4\n0 1\n", "1 2 4\n0 x\n", "1 2 4\n0 1 2\n", "x\n"])
def test_prototype_format_errors(text):
    with pytest.raises((FormatError, DimensionMismatch, ValueError)):
        qc.PrototypeMatrix.parse(text)


def test_prototype_invariants():
    with pytest.raises(ValueError):
        qc.PrototypeMatrix(1, 1, 4, [[(4,)]])
    with pytest.raises(ValueError):
        qc.PrototypeMatrix(1, 1, 4, [[(1, 1)]])


def test_lift_identity_and_shift():
    eye = qc.lift(qc.PrototypeMatrix(1, 1, 3, [[(0,)]])).toarray()
    assert np.array_equal(eye, np.eye(3))
    P = qc.lift(qc.PrototypeMatrix(1, 1, 3, [[(1,)]])).toarray()
    # 1-based (1,2), (2,3), (3,1)
    assert np.array_equal(np.argwhere(P), [[0, 1], [1, 2], [2, 0]])
    assert np.array_equal(np.linalg.matrix_power(P, 3), np.eye(3))


def test_lift_double_circulant_and_zero():
    H = qc.lift(qc.PrototypeMatrix(1, 2, 4, [[(0, 1), ()]])).toarray()
    expect = np.eye(4, dtype=int) + np.roll(np.eye(4, dtype=int), 1, axis=1)
    assert np.array_equal(H[:, :4], expect)
    assert not H[:, 4:].any()


def test_table1_lift_degrees():
    # the printed table carries one edge more than the stated distribution
    # (7 weight-2 and 11 weight-3 block columns instead of 8 and 10)
    H0, _ = table1_checks()
    assert H0.shape == (1152, 2304)
    colw = np.asarray(H0.sum(axis=0)).ravel()
    frac = {d: Fraction(int((colw == d).sum()), 2304) for d in np.unique(colw)}
    assert frac == {2: Fraction(7, 24), 3: Fraction(11, 24), 4: Fraction(1, 8), 6: Fraction(1, 8)}
    roww = np.asarray(H0.sum(axis=1)).ravel()
    rfrac = {d: Fraction(int((roww == d).sum()), 1152) for d in np.unique(roww)}
    assert rfrac == {6: Fraction(7, 12), 7: Fraction(5, 12)}


def test_derive_h1_reproduces_table2():
    p1 = qc.derive_h1(qc.table1(), qc.TABLE1_A1, qc.TABLE1_A2)
    assert p1 == qc.table2()
    assert p1.entries[1][22] == (66, 71)


def test_table2_protograph_weights():
    p1 = qc.table2()
    support = np.array([[len(e) for e in row] for row in p1.entries])
    assert (support.sum(axis=0) >= 2).all()
    # every block column meets both block rows
    assert ((support > 0).sum(axis=0) == 2).all()
    assert ((support > 0).sum(axis=1) == 24).all()


def test_derive_h1_matches_lifted_xor():
    p0 = qc.table1()
    H0 = qc.lift(p0).toarray()
    H1 = qc.lift(qc.derive_h1(p0, qc.TABLE1_A1, qc.TABLE1_A2)).toarray()
    Z = p0.Z
    for q, S in enumerate((qc.TABLE1_A1, qc.TABLE1_A2)):
        want = np.zeros((Z, H0.shape[1]), dtype=int)
        for i in S:
            want ^= H0[(i - 1) * Z:i * Z]
        assert np.array_equal(H1[q * Z:(q + 1) * Z], want)


def test_derive_h1_single_row_and_collision():
    p0 = qc.table1()
    p1 = qc.derive_h1(p0, (1,))
    assert p1.M == 1 and p1.entries[0] == p0.entries[0]
    with pytest.raises(CollisionError):
        qc.derive_h1(p0, (1, 2))


def test_verify_nested():
    H0, H1 = table1_checks()
    assert qc.verify_nested(H0, H1)
    assert qc.verify_nested(H0, H0)
    rng = np.random.default_rng(0)
    while True:
        row = rng.integers(0, 2, size=(1, H0.shape[1]))
        if gf2_rank(np.vstack([H0.toarray(), row])) > gf2_rank(H0.toarray()):
            break
    assert not qc.verify_nested(H0, sp.vstack([H1, sp.csr_matrix(row)]))
    with pytest.raises(DimensionMismatch):
        qc.verify_nested(H0, H1[:, :10])


def test_table_ranks_independent():
    H0, H1 = table1_checks()
    assert gf2_rank(H0.toarray()) == 1152
    assert gf2_rank(H1.toarray()) == 192


def test_girth_examples():
    ok, g = qc.girth_check(np.ones((2, 2), dtype=int), 8)
    assert g == 4 and not ok
    tree = np.array([[1, 1, 0, 0], [0, 1, 1, 0], [0, 0, 1, 1]])
    assert qc.girth_check(tree, 8) == (True, None)
    assert tanner_girth(tree) is None


def test_girth_matches_bfs_oracle():
    rng = np.random.default_rng(5)
    for _ in range(15):
        H = (rng.random((5, 9)) < 0.35).astype(int)
        want = tanner_girth(H, limit=10)
        ok, got = qc.girth_check(H, 10)
        assert got == want
        assert ok == (want is None or want >= 10)


def test_table1_girth_at_least_8():
    H0, H1 = table1_checks()
    assert qc.girth_check(H0, 8)[0]
    assert qc.girth_check(H1, 8)[0]


def _all_ones_placement():
    return qc.PlacementMatrix(np.ones((2, 2), dtype=int), (2, 2), (2, 2))


def test_z2_dense_girth_exhaustive():
    """Z=2 on the all-ones 2x2 placement: girth 8 is reachable, 10 is not."""
    best = 0
    for shifts in itertools.product(range(2), repeat=4):
        p = qc.PrototypeMatrix(2, 2, 2, [[(shifts[0],), (shifts[1],)], [(shifts[2],), (shifts[3],)]])
        g = tanner_girth(qc.lift(p).toarray())
        best = max(best, g if g is not None else 99)
    assert best == 8
    proto = qc.assign_shifts(_all_ones_placement(), 2, 8, seed=0, restarts=200)
    assert tanner_girth(qc.lift(proto).toarray()) >= 8
    with pytest.raises(GirthUnachievable):
        qc.assign_shifts(_all_ones_placement(), 2, 10, seed=0, restarts=200)


def test_single_block_shift_assignment():
    A = qc.PlacementMatrix(np.ones((1, 1), dtype=int), (1,), (1,))
    p = qc.assign_shifts(A, 4, 8, seed=3)
    assert qc.girth_check(qc.lift(p), 8) == (True, None)


def test_assign_shifts_deterministic_and_valid():
    P = qc.solve_placement(12, 24, qc.TABLE1_DISTRIBUTION, A1=qc.TABLE1_A1, A2=qc.TABLE1_A2,
                           alt=True)
    a = qc.assign_shifts(P, 96, 8, seed=4, doubles=((12, 24),))
    b = qc.assign_shifts(P, 96, 8, seed=4, doubles=((12, 24),))
    assert a == b
    H0 = qc.lift(a)
    H1 = qc.lift(qc.derive_h1(a, qc.TABLE1_A1, qc.TABLE1_A2))
    assert qc.girth_check(H0, 8)[0] and qc.girth_check(H1, 8)[0]
    assert qc.verify_nested(H0, H1)


def _independent_placement_check(A, rw, cw, sets, fixed=None):
    A = np.asarray(A)
    assert set(np.unique(A)) <= {0, 1}
    assert list(A.sum(axis=1)) == list(rw)
    assert list(A.sum(axis=0)) == list(cw)
    for S in sets:
        rows = A[[i - 1 for i in S]]
        assert rows.sum() == A.shape[1]
        assert (rows.sum(axis=0) == 1).all()
    for (i, j), v in (fixed or {}).items():
        assert A[i - 1, j - 1] == v


def test_solve_placement_table1_distribution():
    P = qc.solve_placement(12, 24, qc.TABLE1_DISTRIBUTION, A1=qc.TABLE1_A1, A2=qc.TABLE1_A2)
    assert P.violations() == []
    colw = sorted(np.asarray(P.A).sum(axis=0))
    assert colw == sorted([2] * 8 + [3] * 10 + [4] * 3 + [6] * 3)
    _independent_placement_check(P.A, P.row_weights, P.column_weights,
                                 (qc.TABLE1_A1, qc.TABLE1_A2))


def test_solve_placement_alt_option():
    P = qc.solve_placement(12, 24, qc.TABLE1_DISTRIBUTION, A1=qc.TABLE1_A1, A2=qc.TABLE1_A2,
                           alt=True)
    _independent_placement_check(P.A, P.row_weights, P.column_weights,
                                 (qc.TABLE1_A1, qc.TABLE1_A2), qc.alt_cells(12, 24))
    A = np.asarray(P.A)
    for i in range(1, 12):
        d = 24 - 12 + i
        assert A[i - 1, d] == 1 and not A[i - 1, d + 1:].any()


def test_solve_placement_trivial_and_infeasible():
    P = qc.solve_placement(1, 2, row_weights=(2,), column_weights=(1, 1))
    assert np.array_equal(P.A, [[1, 1]])
    with pytest.raises(Infeasible):
        qc.solve_placement(2, 2, row_weights=(2, 1), column_weights=(3, 0))


def test_placement_fast():
    t = time.perf_counter()
    qc.solve_placement(12, 24, qc.TABLE1_DISTRIBUTION, A1=qc.TABLE1_A1, A2=qc.TABLE1_A2)
    assert time.perf_counter() - t < 10


def test_degree_distribution_validation():
    with pytest.raises(ValueError):
        qc.DegreeDistribution([(2, Fraction(1, 2))], [(3, 1)])
    with pytest.raises(Infeasible):
        qc.DegreeDistribution([(2, Fraction(1, 3)), (3, Fraction(2, 3))], [(3, 1)]).column_weights(4)


def test_build_family_toy_pair():
    H0 = sp.csr_matrix(TOY_HTILDE[1:])
    H1 = sp.csr_matrix(TOY_HTILDE[3:])
    fam = qc.build_family(H0, H1)
    assert fam.k == (1, 3)
    assert lattice_volume(build_lattice(fam)) == 16
    box = np.array(list(itertools.product(range(8), repeat=4))).T
    assert np.array_equal(member_by_congruence(fam, box),
                          member_by_congruence(toy_system().codes, box))


def test_build_family_rank_deficient():
    H0 = sp.csr_matrix(np.array([[1, 1, 0, 0], [1, 1, 0, 0], [1, 1, 1, 1]]))
    H1 = sp.csr_matrix(np.array([[1, 1, 1, 1]]))
    with pytest.raises(RankDeficient):
        qc.build_family(H0, H1)


def test_table1_family_matches_fresh_build():
    shipped = table1_family()
    fresh = table1_family(rebuild=True)
    assert shipped.k == fresh.k == (1152, 2112)
    assert (shipped.Htilde != fresh.Htilde).nnz == 0
    assert np.array_equal(shipped.perm, fresh.perm) and shipped.g == fresh.g == 96
    # nested codes: the bottom rows span the same spaces as H0 and H1
    H0, H1 = table1_checks()
    assert qc.verify_nested(shipped.level_rows(0), H0) and qc.verify_nested(H0, shipped.level_rows(0))
    assert qc.verify_nested(shipped.level_rows(1), H1) and qc.verify_nested(H1, shipped.level_rows(1))
