"""Construction D' lattices from nested QC-LDPC codes: design, encoding,
multistage decoding, Voronoi shaping and AWGN simulation."""
__version__ = "0.1.0"

from .errors import DPrimeError  # noqa: E402
from .lattice import (LatticeSystem, NestedCodeFamily, build_lattice,  # noqa: E402
                      lattice_volume, member_by_check_matrix, member_by_congruence, vnr)
from .encoder import (LevelMessages, alt_partition, encode_a, encode_b,  # noqa: E402
                      pack_b, unpack_b)
from .decoder import (BPDecoder, DecodeTrace, multistage_decode,  # noqa: E402
                      reencode_component, recover_messages, triangle_mod)
