"""Ready-made lattices: the rate-1/2 and 11/12 nested QC-LDPC pair and the
4-dimensional toy lattice."""
import functools
from importlib import resources

import numpy as np
import scipy.sparse as sp

from . import qc
from .lattice import LatticeSystem, NestedCodeFamily, build_lattice, parse_family

TOY_HTILDE = np.array([[1, 0, 0, 0], [1, 1, 0, 0], [0, 1, 1, 0], [1, 1, 1, 1]])


def toy_family() -> NestedCodeFamily:
    """n=4, a=2, k=(1, 3) family used throughout the tests."""
    return NestedCodeFamily(4, 2, (1, 3), sp.csr_matrix(TOY_HTILDE))


def toy_system() -> LatticeSystem:
    return build_lattice(toy_family())


@functools.lru_cache(maxsize=None)
def table1_checks():
    """Lifted ``(H0, H1)`` of the 12x24 prototype and its derived 2x24 prototype."""
    p0 = qc.table1()
    p1 = qc.derive_h1(p0, qc.TABLE1_A1, qc.TABLE1_A2)
    return qc.lift(p0), qc.lift(p1)


def table1_family(rebuild: bool = False) -> NestedCodeFamily:
    """Unimodular ALT family for the n=2304 pair.

    The shipped family file is the output of ``qc.build_family`` with seed 0;
    ``rebuild=True`` recomputes it (a few seconds).
    """
    H0, H1 = table1_checks()
    if rebuild:
        return qc.build_family(H0, H1, seed=0)
    text = resources.files("dprime").joinpath("data").joinpath("table1_family.txt").read_text()
    fam = parse_family(text)
    fam.decoding_checks = [H0, H1]
    return fam


@functools.lru_cache(maxsize=None)
def table1_system() -> LatticeSystem:
    """Shared, read-only lattice system for the n=2304 pair."""
    return build_lattice(table1_family())


def get_system(name: str) -> LatticeSystem:
    if name == "table1":
        return table1_system()
    if name == "toy":
        return toy_system()
    raise KeyError(f"unknown preset {name!r}")
