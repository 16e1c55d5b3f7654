"""Walk through the 4-dimensional toy Construction D' lattice.

Encodes one message with both methods and decodes a noisy copy, then
shapes a few messages into the hypercube 8Z^4.

    python3 demos/toy_lattice.py
"""
import numpy as np

from dprime.decoder import multistage_decode, recover_messages
from dprime.encoder import LevelMessages, alt_partition, encode_a, encode_b, pack_b
from dprime.lattice import lattice_volume, member_by_congruence
from dprime.presets import toy_system
from dprime.shaping import NestedLatticeCode, hypercube, index, voronoi_encode

sys_ = toy_system()
print("Htilde =\n", sys_.Htilde.toarray())
print("k =", sys_.k, " volume =", lattice_volume(sys_))
print("G (basis vectors as columns) =\n", sys_.G)

m = LevelMessages([np.array([1]), np.array([1, 0, 1])], np.array([0, 0, 0, 1]))
b = pack_b(sys_, m)
xa = encode_a(alt_partition(sys_), b)
xb = encode_b(sys_, m)
print("b =", b, " method A:", xa, " method B:", xb)
assert np.array_equal(xa, xb) and member_by_congruence(sys_.codes, xb)

rng = np.random.default_rng(0)
y = xb + rng.normal(0, 0.2, 4)
tr = multistage_decode(sys_, y, sigma=0.2)
back = recover_messages(sys_, tr)
print("received", np.round(y, 3), "-> decoded", tr.x)
print("recovered u =", [u.tolist() for u in back.u], " z =", back.z.tolist())

code = NestedLatticeCode(sys_, hypercube(8, 4))
print("shaping 8Z^4: M =", code.M, " rate =", code.rate, "bits/dim")
for bb in ([0, 0, 0, 1], [7, 3, 2, 1]):
    xp = voronoi_encode(code, np.array(bb))
    print(f"  b={bb} -> x'={xp.tolist()} -> index {index(code, xp).tolist()}")
