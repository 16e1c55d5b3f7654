"""The 2304-dimensional lattice built from Tables I and II.

Checks the lifted codes and decodes a noisy batch.  The last lines print
the nested-code rate of each base-lattice shaping.

    python3 demos/table1_lattice.py
"""
import time

import numpy as np

from dprime import qc
from dprime.decoder import multistage_decode
from dprime.encoder import encode_b, random_messages
from dprime.lattice import log2_volume, vnr
from dprime.presets import table1_checks, table1_system
from dprime.shaping import NestedLatticeCode, code_rate, parse_shaping

H0, H1 = table1_checks()
print("H0", H0.shape, " H1", H1.shape)
print("girth >= 8:", qc.girth_check(H0, 8)[0] and qc.girth_check(H1, 8)[0])
print("nested:", qc.verify_nested(H0, H1))

sys_ = table1_system()
print("k =", sys_.k, " log2 volume =", log2_volume(sys_))

rng = np.random.default_rng(1)
m = random_messages(sys_, rng, batch=200)
x = encode_b(sys_, m)
sigma = 0.28
t0 = time.perf_counter()
tr = multistage_decode(sys_, x + rng.normal(0, sigma, x.shape), sigma=sigma, keep_trace=False)
errs = int((tr.x != x).any(axis=0).sum())
print(f"sigma={sigma} (VNR {10 * np.log10(vnr(sys_, sigma ** 2)):.2f} dB): "
      f"{errs}/200 word errors, {time.perf_counter() - t0:.1f} s")

for spec in ("e8:472", "bw16:280*sqrt2", "leech:168*sqrt8"):
    R, Rc = code_rate(NestedLatticeCode(sys_, parse_shaping(spec, sys_.n)))
    print(f"{spec:16s} R = {R:.4f}  (sum log2 M_i / n = {Rc:.4f})")
