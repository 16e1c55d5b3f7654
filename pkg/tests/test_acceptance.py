"""Acceptance criteria 1-10.  Each test carries a ``criterion`` marker and the
run ends with one PASS/FAIL line per criterion.

Criterion 9 audits the cached WER curves in ``results/``; set
``DPRIME_RECOMPUTE=1`` to regenerate them from their configs instead (hours).
"""
import itertools
import json
import math
import os
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from dprime import qc, shaping, sim
from dprime.baselattices import base_lattice
from dprime.decoder import multistage_decode
from dprime.encoder import (alt_partition, encode_a, encode_b, encode_b_components, pack_b,
                            random_messages)
from dprime.lattice import member_by_check_matrix, member_by_congruence
from dprime.presets import table1_checks

from oracles import base_shifts, coset_exhaustive_nearest, gf2_rank, tanner_girth

RESULTS = Path(__file__).resolve().parents[1] / "results"


@pytest.mark.criterion(1, "toy membership definitions agree on {0..7}^4")
def test_c1_definition_equivalence(toy):
    pts = np.array(list(itertools.product(range(8), repeat=4))).T
    assert pts.shape[1] == 4096
    a = member_by_congruence(toy.codes, pts)
    b = member_by_check_matrix(toy, pts)
    assert np.array_equal(a, b)
    # volume 16: one point in sixteen of the 8^4 box
    assert a.sum() == 4096 // 16


@pytest.mark.criterion(2, "encode_a(pack_b) = encode_b and H x = b on 1000 Table I/II messages")
def test_c2_encoding_equivalence(table1):
    rng = np.random.default_rng(2)
    m = random_messages(table1, rng, batch=1000)
    b = pack_b(table1, m)
    xa = encode_a(alt_partition(table1), b)
    xb = encode_b(table1, m)
    assert np.array_equal(xa, xb)
    # H = D Htilde with D = diag(2^-shift), so H x = b  <=>  Htilde x = 2^shift b
    assert np.array_equal(np.asarray(table1.Htilde @ xa), b << table1.shift[:, None])


@pytest.mark.criterion(3, "each component x_i mod 2 is a codeword of C_i (1000 messages)")
def test_c3_component_codewords(table1):
    rng = np.random.default_rng(3)
    m = random_messages(table1, rng, batch=1000)
    comps = encode_b_components(table1, m)
    H0, H1 = table1_checks()
    for i, Hi in enumerate((H0, H1)):
        syn = np.asarray(Hi @ (comps[i] % 2)) % 2
        assert not syn.any()


@pytest.mark.criterion(4, "Tables I/II: n=2304, rank 1152, Table II bit-exact, girth >= 8, nested")
def test_c4_table_reproduction():
    p0 = qc.table1()
    H0 = qc.lift(p0)
    assert H0.shape == (1152, 2304)
    assert gf2_rank(H0.toarray()) == 1152
    p1 = qc.derive_h1(p0, qc.TABLE1_A1, qc.TABLE1_A2)
    assert p1 == qc.table2()
    assert p1.entries[1][22] == (66, 71)
    H1 = qc.lift(p1)
    assert 2304 - gf2_rank(H1.toarray()) == 2112  # k_1 / n = 11/12
    for H in (H0, H1):
        ok, g = qc.girth_check(H, 8)
        assert ok
    # independent BFS on the first 192 columns of H1 (a subgraph: its girth can only be larger)
    sub = H1.toarray()[:, :192]
    g = tanner_girth(sub)
    assert g is None or g >= 8
    assert qc.verify_nested(H0, H1)


@pytest.mark.criterion(5, "code rates 8.2993 / 8.2959 / 8.3090 within 5e-4")
@pytest.mark.parametrize("spec,R", [("e8:472", 8.2993), ("bw16:280*sqrt2", 8.2959),
                                    ("leech:168*sqrt8", 8.3090)])
def test_c5_rates(table1, spec, R):
    code = shaping.NestedLatticeCode(table1, shaping.parse_shaping(spec, table1.n))
    got, check = shaping.code_rate(code)
    assert abs(got - R) < 5e-4
    assert abs(got - check) < 1e-9


@pytest.mark.criterion(6, "E8/BW16/Leech quantizers match exhaustive coset search on 1e4 points")
@pytest.mark.parametrize("name", ["E8", "BW16", "Leech"])
def test_c6_quantizer_exactness(name):
    B = base_lattice(name)
    shifts, scale = base_shifts(name)
    rng = np.random.default_rng(6)
    y = rng.uniform(-12, 12, size=(10_000, B.dim))
    want, _ = coset_exhaustive_nearest(y, shifts, scale)
    sphere = B.sphere_nearest(y)
    assert np.array_equal(sphere, want)
    # the quantizer used for shaping: unit-scale direct sum equals the integer base lattice
    s = shaping.direct_sum(name, (1, B.q), B.dim)
    fast = shaping.quantize(s, y.T)
    assert np.allclose(fast.T, want)


@pytest.mark.criterion(7, "shaping gains 0.65 / 0.86 / 1.03 dB within 0.05 dB (1e6 samples)")
@pytest.mark.parametrize("name,want", [("e8", 0.65), ("bw16", 0.86), ("leech", 1.03)])
def test_c7_shaping_gains(name, want):
    B = base_lattice(name)
    g = shaping.estimate_shaping_gain(shaping.direct_sum(name, 1, B.dim), 10 ** 6, seed=7)
    assert abs(g - want) <= 0.05


@pytest.mark.criterion(8, "noiseless multistage decoding recovers 1000 Table I/II points")
def test_c8_noiseless_decode(table1):
    rng = np.random.default_rng(8)
    m = random_messages(table1, rng, batch=1000)
    x = encode_b(table1, m)
    tr = multistage_decode(table1, x.astype(np.float64), sigma=0.2, keep_trace=False)
    assert np.array_equal(tr.x, x)
    assert not tr.failed.any()


def _load_curve(name):
    cfg = sim.load_config(RESULTS / f"{name}.cfg")
    if os.environ.get("DPRIME_RECOMPUTE") == "1":
        curve = sim.run_wer(cfg)
        sim.write_csv(curve, RESULTS / f"{name}.csv")
        sim.write_json(curve, RESULTS / f"{name}.json")
    pts = sim.read_csv(RESULTS / f"{name}.csv")
    meta = json.loads((RESULTS / f"{name}.json").read_text())
    return cfg, pts, meta


def _audit_chunks(cfg, meta, which):
    """Re-run chunk 0 of the given grid points and compare with the logged counts."""
    ctx = sim.build_context(cfg)
    assert ctx.power == meta["calibrated_power"]
    sim._WORKER_CTX = ctx
    for pi in which:
        e = cfg.ebn0_db[pi]
        snr = 10 ** (10 * math.log10(2 * ctx.rate * 10 ** (e / 10)) / 10)
        errors, _, _ = sim._chunk_job((pi, 0, cfg.batch, snr, cfg.seed))
        assert errors == meta["points"][pi]["chunk_errors"][0]


@pytest.mark.criterion(9, "hypercube L=8 vs E8 K=8 WER gap at 1e-3 is 0.65 +- 0.15 dB")
def test_c9_wer_gap():
    gaps = {}
    for name in ("hypercube8", "e8_8"):
        cfg, pts, meta = _load_curve(name)
        assert meta["config_sha256"] == cfg.digest(), f"{name}: results do not match config"
        assert len(pts) == len(meta["points"])
        for p, log in zip(pts, meta["points"]):
            assert p["errors"] >= 100
            assert p["errors"] == sum(log["chunk_errors"])
        assert pts[-1]["wer"] <= 1e-3
        _audit_chunks(cfg, meta, (0, len(pts) - 1))
        gaps[name] = sim.crossing(pts, 1e-3)
        assert gaps[name] is not None
    gap = gaps["hypercube8"] - gaps["e8_8"]
    print(f"\nWER 1e-3 crossings: hypercube {gaps['hypercube8']:.3f} dB, "
          f"E8 {gaps['e8_8']:.3f} dB, gap {gap:.3f} dB")
    assert abs(gap - 0.65) <= 0.15


# node-fraction degree polynomials: lambda(x) = 1/3 x + 5/12 x^2 + 1/8 x^3 + 1/8 x^5
# and rho(x) = 2/3 x^5 + 1/3 x^6, where the coefficient of x^(d-1) is the share of degree d
LAMBDA = {2: Fraction(1, 3), 3: Fraction(5, 12), 4: Fraction(1, 8), 6: Fraction(1, 8)}
RHO = {6: Fraction(2, 3), 7: Fraction(1, 3)}


def _check_placement(A, M, N, sets):
    # independent re-check of every constraint on the binary placement matrix
    A = np.asarray(A)
    assert A.shape == (M, N) and set(np.unique(A)) <= {0, 1}
    colw, roww = A.sum(axis=0), A.sum(axis=1)
    assert {d: Fraction(int((colw == d).sum()), N) for d in np.unique(colw)} == LAMBDA
    assert {d: Fraction(int((roww == d).sum()), M) for d in np.unique(roww)} == RHO
    for S in sets:
        assert (A[[i - 1 for i in S]].sum(axis=0) == 1).all()


@pytest.mark.criterion(10, "placement solver feasible in under 10 s (independent checker)")
def test_c10_placement():
    t0 = time.perf_counter()
    P = qc.solve_placement(12, 24, qc.TABLE1_DISTRIBUTION, A1=qc.TABLE1_A1, A2=qc.TABLE1_A2)
    assert time.perf_counter() - t0 < 10
    _check_placement(P.A, 12, 24, (qc.TABLE1_A1, qc.TABLE1_A2))
