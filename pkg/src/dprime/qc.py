"""Quasi-cyclic LDPC design for two-level nested codes.

Covers the prototype text format, lifting, the block-row-sum derivation of
``H1`` from ``H0``, nesting and girth checks, the binary placement search,
girth-aware shift assignment and the unimodular completion that turns an
``(H0, H1)`` pair into a :class:`NestedCodeFamily`.

Block-row sets ``A1``/``A2`` and prototype cells use 1-based indices, as
prototype tables do; matrix rows and columns elsewhere are 0-based.
"""
import itertools
import time
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources

import numpy as np
import scipy.sparse as sp

from . import exact, gf2
from ._alt import AltSolver, right_solve_lower
from .errors import (CollisionError, DimensionMismatch, FormatError,
                     GirthUnachievable, Infeasible, RankDeficient,
                     UnimodularCompletionFailed)
from .lattice import NestedCodeFamily

ZERO = ()


# -- prototype matrices -------------------------------------------------------

@dataclass
class PrototypeMatrix:
    """``M x N`` grid of circulant descriptors with lift size ``Z``.

    Each entry is a tuple of shifts: ``()`` is the zero block, ``(p,)`` a
    single permutation and ``(p1, p2)`` a double circulant.
    """
    M: int
    N: int
    Z: int
    entries: list

    def __post_init__(self):
        ent = [[tuple(int(p) for p in e) for e in row] for row in self.entries]
        if len(ent) != self.M or any(len(r) != self.N for r in ent):
            raise DimensionMismatch(f"entries must be {self.M} x {self.N}")
        for i, row in enumerate(ent):
            for j, e in enumerate(row):
                if any(not 0 <= p < self.Z for p in e):
                    raise ValueError(f"cell ({i + 1},{j + 1}): shift outside [0, {self.Z})")
                if len(set(e)) != len(e):
                    raise ValueError(f"cell ({i + 1},{j + 1}): double circulant needs distinct shifts")
        self.entries = ent

    @classmethod
    def parse(cls, text: str) -> "PrototypeMatrix":
        """Parse ``M N Z`` followed by M lines of ``-1``, ``p`` or ``p1/p2`` tokens."""
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not lines:
            raise FormatError("empty prototype")
        try:
            M, N, Z = (int(t) for t in lines[0].split())
        except ValueError as e:
            raise FormatError(f"header must be 'M N Z', got {lines[0]!r}") from e
        if len(lines) - 1 != M:
            raise FormatError(f"expected {M} rows, got {len(lines) - 1}")
        entries = []
        for i, ln in enumerate(lines[1:]):
            toks = ln.split()
            if len(toks) != N:
                raise FormatError(f"row {i + 1}: expected {N} tokens, got {len(toks)}")
            row = []
            for tok in toks:
                try:
                    row.append(ZERO if tok == "-1" else tuple(int(p) for p in tok.split("/")))
                except ValueError as e:
                    raise FormatError(f"row {i + 1}: bad token {tok!r}") from e
            entries.append(row)
        return cls(M, N, Z, entries)

    def format(self) -> str:
        out = [f"{self.M} {self.N} {self.Z}"]
        for row in self.entries:
            out.append(" ".join("-1" if not e else "/".join(map(str, e)) for e in row))
        return "\n".join(out) + "\n"

    @classmethod
    def load(cls, path) -> "PrototypeMatrix":
        with open(path) as f:
            return cls.parse(f.read())

    def save(self, path):
        with open(path, "w") as f:
            f.write(self.format())

    def support(self) -> np.ndarray:
        """Binary ``M x N`` placement of non-zero blocks."""
        return np.array([[1 if e else 0 for e in row] for row in self.entries], dtype=np.int64)

    def edge_weights(self) -> np.ndarray:
        """Number of permutations per cell (0, 1 or 2)."""
        return np.array([[len(e) for e in row] for row in self.entries], dtype=np.int64)


def _preset_text(name: str) -> str:
    return resources.files("dprime").joinpath("data").joinpath(name).read_text()


def table1() -> PrototypeMatrix:
    """Prototype of ``H0`` for the 2304-dimensional design (Z = 96)."""
    return PrototypeMatrix.parse(_preset_text("table1.txt"))


def table2() -> PrototypeMatrix:
    """Published prototype of ``H1``, kept for verification of :func:`derive_h1`."""
    return PrototypeMatrix.parse(_preset_text("table2.txt"))


TABLE1_A1 = (5, 7, 9, 11)
TABLE1_A2 = (6, 8, 10, 12)


def lift(proto: PrototypeMatrix) -> sp.csr_matrix:
    """Expand to an ``(M Z) x (N Z)`` binary matrix.

    ``Shift(p)`` puts row ``k`` of its block at column ``(k + p) mod Z``
    (right cyclic shift of the identity); double circulants are the F_2 sum.
    """
    Z = proto.Z
    rows, cols = [], []
    k = np.arange(Z)
    for i, row in enumerate(proto.entries):
        for j, e in enumerate(row):
            for p in e:
                rows.append(i * Z + k)
                cols.append(j * Z + (k + p) % Z)
    if rows:
        r = np.concatenate(rows)
        c = np.concatenate(cols)
    else:
        r = c = np.zeros(0, dtype=np.int64)
    H = sp.csr_matrix((np.ones(r.size, dtype=np.int64), (r, c)),
                      shape=(proto.M * Z, proto.N * Z))
    H.data %= 2
    H.eliminate_zeros()
    return H


def derive_h1(proto: PrototypeMatrix, A1, A2=None) -> PrototypeMatrix:
    """Prototype whose row q is the block-row sum of the rows in set ``A_q``.

    Rows within a set must have disjoint supports, so each column of the sum
    holds exactly the one circulant found among the set (or zero).
    """
    sets = [tuple(A1)] + ([tuple(A2)] if A2 is not None else [])
    out = []
    for q, S in enumerate(sets):
        for i in S:
            if not 1 <= i <= proto.M:
                raise DimensionMismatch(f"row {i} outside 1..{proto.M}")
        row = []
        for j in range(proto.N):
            hits = [i for i in S if proto.entries[i - 1][j]]
            if len(hits) > 1:
                raise CollisionError(f"set {q + 1}: rows {hits} share block column {j + 1}")
            row.append(proto.entries[hits[0] - 1][j] if hits else ZERO)
        out.append(row)
    return PrototypeMatrix(len(sets), proto.N, proto.Z, out)


def block_row_sum(H: sp.csr_matrix, Z: int, rows) -> sp.csr_matrix:
    """Integer sum of lifted block rows (1-based block indices)."""
    acc = None
    for i in rows:
        blk = H[(i - 1) * Z:i * Z]
        acc = blk if acc is None else acc + blk
    return sp.csr_matrix(acc)


def verify_nested(H0, H1) -> bool:
    """True iff every row of ``H1`` lies in the F_2 row space of ``H0``."""
    if H0.shape[1] != H1.shape[1]:
        raise DimensionMismatch("H0 and H1 have different column counts")
    return bool(np.all(gf2.in_row_space(H0, H1)))


# -- girth --------------------------------------------------------------------

def girth_check(H, g: int = 8, roots=None):
    """Shortest Tanner-graph cycle of length at most ``g``.

    Breadth-first search from every variable node (or only from ``roots``),
    stopping at depth ``g/2``.  Returns ``(ok, shortest)`` where ``shortest``
    is ``None`` when no cycle of length ``<= g`` exists and
    ``ok = shortest is None or shortest >= g``.
    """
    H = sp.csr_matrix(H)
    m, n = H.shape
    Hc = H.tocsc()
    var_adj = [Hc.indices[Hc.indptr[v]:Hc.indptr[v + 1]] for v in range(n)]
    chk_adj = [H.indices[H.indptr[c]:H.indptr[c + 1]] for c in range(m)]
    half = g // 2
    best = None
    if roots is None:
        roots = range(n)
    for r in roots:
        # nodes: variables 0..n-1, checks n..n+m-1
        dist = {r: 0}
        parent = {r: -1}
        dq = deque([r])
        found = None
        while dq:
            u = dq.popleft()
            du = dist[u]
            if found is not None and 2 * du + 1 >= found:
                break
            if du >= half:
                continue
            nbrs = (chk_adj[u - n] if u >= n else var_adj[u] + n)
            for w in nbrs:
                w = int(w)
                if w == parent[u]:
                    continue
                if w in dist:
                    L = du + dist[w] + 1
                    if found is None or L < found:
                        found = L
                else:
                    dist[w] = du + 1
                    parent[w] = u
                    dq.append(w)
        if found is not None and found <= g and (best is None or found < best):
            best = found
    return (best is None or best >= g), best


def _proto_edges(entries):
    """List of ``(i, j, slot)`` edges of a prototype grid (0-based)."""
    return [(i, j, s) for i, row in enumerate(entries) for j, e in enumerate(row)
            for s in range(len(e))]


def closed_walks(edges, max_len: int):
    """Tailless closed walks of the base graph, starting at check nodes.

    ``edges`` lists ``(check, var)`` pairs (parallel edges allowed).  Returns
    ``{length: (ids, signs)}`` for even lengths ``4 .. max_len``; ``signs`` is
    ``+1`` for a check-to-variable step and ``-1`` for variable-to-check, so a
    walk lifts to a cycle-containing closed walk iff ``sum(sign * shift) = 0 mod Z``.
    """
    by_check, by_var = {}, {}
    for e, (c, v) in enumerate(edges):
        by_check.setdefault(c, []).append(e)
        by_var.setdefault(v, []).append(e)
    out = {L: [] for L in range(4, max_len + 1, 2)}

    def extend(path, at_check, node, start):
        L = len(path)
        if L >= 4 and at_check and node == start and L % 2 == 0 and path[-1] != path[0]:
            out[L].append(tuple(path))
        if L == max_len:
            return
        nxt = by_check.get(node, []) if at_check else by_var.get(node, [])
        for e in nxt:
            if path and e == path[-1]:
                continue
            c, v = edges[e]
            path.append(e)
            extend(path, not at_check, v if at_check else c, start)
            path.pop()

    for c in by_check:
        extend([], True, c, c)
    res = {}
    for L, ws in out.items():
        ids = np.array(ws, dtype=np.int64).reshape(-1, L)
        signs = np.tile(np.array([1, -1] * (L // 2), dtype=np.int64), (len(ws), 1))
        res[L] = (ids, signs)
    return res


def _walk_tables(support_slots, sets, girth_target):
    """Closed walks of ``H0`` and of the block-row-sum ``H1``, as ``H0`` edge ids."""
    edges = _proto_edges(support_slots)
    index = {e: k for k, e in enumerate(edges)}
    tables = []
    base = [(i, j) for i, j, _ in edges]
    tables.append(closed_walks(base, girth_target - 2))
    if sets:
        h1_edges, h1_map = [], []
        for q, S in enumerate(sets):
            for j in range(len(support_slots[0])):
                for i in S:
                    for s in range(len(support_slots[i - 1][j])):
                        h1_edges.append((q, j))
                        h1_map.append(index[(i - 1, j, s)])
        h1_map = np.array(h1_map, dtype=np.int64)
        w = closed_walks(h1_edges, girth_target - 2)
        tables.append({L: (h1_map[ids] if ids.size else ids, sg) for L, (ids, sg) in w.items()})
    return edges, tables


def protograph_girth_ok(proto: PrototypeMatrix, girth_target: int = 8, sets=None) -> bool:
    """True iff no tailless closed walk shorter than ``girth_target`` has zero shift sum.

    With ``sets`` the walks of the derived ``H1`` protograph are checked too.
    """
    edges, tables = _walk_tables(proto.entries, sets, girth_target)
    shifts = np.array([proto.entries[i][j][s] for i, j, s in edges], dtype=np.int64)
    for tab in tables:
        for ids, sg in tab.values():
            if ids.size and np.any((sg * shifts[ids]).sum(axis=1) % proto.Z == 0):
                return False
    return True


# -- placement ----------------------------------------------------------------

@dataclass
class DegreeDistribution:
    """Node-perspective degree fractions: ``[(degree, fraction), ...]``."""
    lam: list
    rho: list

    def __post_init__(self):
        self.lam = [(int(d), Fraction(f).limit_denominator(10**6)) for d, f in self.lam]
        self.rho = [(int(d), Fraction(f).limit_denominator(10**6)) for d, f in self.rho]
        for name, dist in (("lambda", self.lam), ("rho", self.rho)):
            if sum(f for _, f in dist) != 1:
                raise ValueError(f"{name} fractions do not sum to 1")

    @classmethod
    def from_polynomials(cls, lam: dict, rho: dict) -> "DegreeDistribution":
        """From ``{exponent: coefficient}`` maps where ``x**(d-1)`` marks degree d."""
        return cls([(e + 1, c) for e, c in lam.items()], [(e + 1, c) for e, c in rho.items()])

    @staticmethod
    def _weights(dist, count):
        w = []
        for d, f in sorted(dist, reverse=True):
            k = f * count
            if k.denominator != 1:
                raise Infeasible(f"fraction {f} of {count} nodes is not an integer")
            w += [d] * int(k)
        return w

    def column_weights(self, N):
        return self._weights(self.lam, N)

    def row_weights(self, M):
        return self._weights(self.rho, M)


# node-perspective distribution of the 2304-dimensional design
TABLE1_DISTRIBUTION = DegreeDistribution.from_polynomials(
    {1: Fraction(1, 3), 2: Fraction(5, 12), 3: Fraction(1, 8), 5: Fraction(1, 8)},
    {5: Fraction(2, 3), 6: Fraction(1, 3)})


@dataclass
class PlacementMatrix:
    """Binary block placement with its target weights and block-row sets."""
    A: np.ndarray
    row_weights: tuple
    column_weights: tuple
    A1: tuple = ()
    A2: tuple = ()
    fixed: dict = field(default_factory=dict)

    def violations(self) -> list:
        """Human-readable list of violated constraints (empty when valid)."""
        A = np.asarray(self.A)
        bad = []
        M, N = A.shape
        if not np.isin(A, (0, 1)).all():
            bad.append("entries must be binary")
        for i in range(M):
            if A[i].sum() != self.row_weights[i]:
                bad.append(f"row {i + 1} weight {A[i].sum()} != {self.row_weights[i]}")
        for j in range(N):
            if A[:, j].sum() != self.column_weights[j]:
                bad.append(f"column {j + 1} weight {A[:, j].sum()} != {self.column_weights[j]}")
        for q, S in enumerate((self.A1, self.A2)):
            if not S:
                continue
            rows = A[[i - 1 for i in S]]
            if rows.sum() != N:
                bad.append(f"set {q + 1} has {rows.sum()} ones, needs {N}")
            if np.any(rows.sum(axis=0) != 1):
                bad.append(f"set {q + 1} does not cover each column exactly once")
        for (i, j), v in self.fixed.items():
            if A[i - 1, j - 1] != v:
                bad.append(f"cell ({i},{j}) must be {v}")
        return bad


def alt_cells(M: int, N: int) -> dict:
    """Cells forced by the offset diagonal: ones at ``(i, N-M+1+i)``, zeros above."""
    fixed = {}
    for i in range(1, M):
        d = N - M + 1 + i
        fixed[(i, d)] = 1
        for j in range(d + 1, N + 1):
            fixed[(i, j)] = 0
    return fixed


def solve_placement(M: int, N: int, dist: DegreeDistribution = None, A1=(), A2=(),
                    row_weights=None, column_weights=None, alt: bool = False,
                    fixed: dict = None, time_limit: float = 60.0) -> PlacementMatrix:
    """Find a binary ``M x N`` placement meeting every weight and set constraint.

    The program is pure feasibility.  Columns are filled one at a time by
    depth-first search, most constrained first.  Each column takes one row
    from every set ``A_q`` and the rest from rows outside the sets, trying
    rows with the most remaining capacity first.  Unless explicit column
    weights are given, the search also decides which column receives which
    degree from the distribution.  Remaining row capacities are pruned
    against what the unfilled columns can still absorb.
    """
    if row_weights is None:
        if dist is None:
            raise ValueError("need a degree distribution or explicit weights")
        row_weights = dist.row_weights(M)
    explicit = column_weights is not None
    if not explicit:
        if dist is None:
            raise ValueError("need a degree distribution or explicit weights")
        column_weights = dist.column_weights(N)
    r = np.array(row_weights, dtype=np.int64)
    c = np.array(column_weights, dtype=np.int64)
    if r.size != M or c.size != N:
        raise DimensionMismatch("weight vectors do not match M and N")
    if r.sum() != c.sum():
        raise Infeasible(f"row weights sum to {r.sum()} but column weights to {c.sum()}")
    if np.any(c > M) or np.any(r > N) or np.any(c < 0) or np.any(r < 0):
        raise Infeasible("a weight exceeds the matrix size")
    sets = [tuple(S) for S in (A1, A2) if S]
    if len(sets) == 2 and set(sets[0]) & set(sets[1]):
        raise Infeasible("block-row sets overlap")
    for S in sets:
        if sum(r[i - 1] for i in S) != N:
            raise Infeasible(f"rows {S} must carry exactly N = {N} ones")
    if np.any(c < len(sets)):
        raise Infeasible("a column is lighter than the number of block-row sets")
    fx = dict(alt_cells(M, N)) if alt else {}
    fx.update(fixed or {})
    allowed = np.ones((M, N), dtype=bool)
    forced = np.zeros((M, N), dtype=bool)
    for (i, j), v in fx.items():
        if v:
            forced[i - 1, j - 1] = True
        else:
            allowed[i - 1, j - 1] = False
    outside = [i for i in range(M) if not any(i + 1 in S for S in sets)]
    ns = len(sets)

    order = sorted(range(N), key=lambda j: (allowed[:, j].sum() - forced[:, j].sum(), j))
    A = np.zeros((M, N), dtype=np.int64)
    cap = r.copy()
    pool = {}
    for d in c:
        pool[int(d)] = pool.get(int(d), 0) + 1
    weight = np.zeros(N, dtype=np.int64)
    deadline = time.monotonic() + time_limit

    def feasible_after(k):
        rest = order[k:]
        if not rest:
            return bool(np.all(cap == 0))
        if np.any(cap < 0):
            return False
        if np.any(cap > allowed[:, rest].sum(axis=1)):
            return False
        if np.any(cap < forced[:, rest].sum(axis=1)):
            return False
        remaining = sum(d * k_ for d, k_ in pool.items()) if not explicit else c[rest].sum()
        return cap.sum() == remaining

    def options(j, d):
        groups = []
        for S in sets:
            rows = [i - 1 for i in S if allowed[i - 1, j] and cap[i - 1] > 0]
            must = [i for i in rows if forced[i, j]]
            if len(must) > 1:
                return
            if must:
                rows = must
            if not rows:
                return
            rows.sort(key=lambda i: -cap[i])
            groups.append([(i,) for i in rows])
        rows = [i for i in outside if allowed[i, j] and cap[i] > 0]
        must = [i for i in rows if forced[i, j]]
        free = sorted((i for i in rows if not forced[i, j]), key=lambda i: -cap[i])
        k = d - ns - len(must)
        if k < 0 or k > len(free):
            return
        groups.append([tuple(must) + comb for comb in itertools.combinations(free, k)])
        for pick in itertools.product(*groups):
            yield [i for part in pick for i in part]

    def dfs(k):
        if time.monotonic() > deadline:
            raise Infeasible("placement search exceeded its time limit")
        if k == N:
            return bool(np.all(cap == 0))
        j = order[k]
        degrees = [int(c[j])] if explicit else sorted((d for d, m in pool.items() if m), reverse=True)
        for d in degrees:
            if not explicit:
                pool[d] -= 1
            weight[j] = d
            for rows in options(j, d):
                A[rows, j] = 1
                cap[rows] -= 1
                if feasible_after(k + 1) and dfs(k + 1):
                    return True
                A[rows, j] = 0
                cap[rows] += 1
            if not explicit:
                pool[d] += 1
        return False

    if not feasible_after(0) or not dfs(0):
        raise Infeasible("no placement satisfies the constraints")
    return PlacementMatrix(A.copy(), tuple(int(v) for v in r), tuple(int(v) for v in weight),
                           tuple(A1), tuple(A2), fx)


# -- shift assignment ---------------------------------------------------------

def assign_shifts(A: PlacementMatrix, Z: int, girth_target: int = 8, seed: int = 0,
                  restarts: int = 100000, doubles=(), fixed_shifts: dict = None) -> PrototypeMatrix:
    """Choose circulant shifts so that lifted ``H0`` and ``H1`` reach ``girth_target``.

    Shifts are drawn edge by edge in a random order.  Each draw is uniform
    over the values that close no zero-sum walk with the edges already set.
    A dead end triggers a restart with a fresh stream derived from ``seed``.
    ``doubles`` lists cells (1-based) that carry a double circulant.
    """
    placement = np.asarray(A.A)
    M, N = placement.shape
    dbl = {(i - 1, j - 1) for i, j in doubles}
    slots = [[(0,) * ((2 if (i, j) in dbl else 1) if placement[i, j] else 0)
              for j in range(N)] for i in range(M)]
    sets = [S for S in (A.A1, A.A2) if S]
    edges, tables = _walk_tables(slots, sets, girth_target)
    E = len(edges)
    walks = [(ids, sg) for tab in tables for ids, sg in tab.values() if ids.size]
    # walks of different lengths: pad to a common width with a dummy edge E
    if walks:
        width = max(w[0].shape[1] for w in walks)
        padded_ids, padded_sg = [], []
        for ids, sg in walks:
            pad = width - ids.shape[1]
            padded_ids.append(np.pad(ids, ((0, 0), (0, pad)), constant_values=E))
            padded_sg.append(np.pad(sg, ((0, 0), (0, pad))))
        ids_all = np.concatenate(padded_ids)
        sg_all = np.concatenate(padded_sg)
    else:
        ids_all = np.zeros((0, 4), np.int64)
        sg_all = np.zeros((0, 4), np.int64)
    touching = [np.nonzero((ids_all == e).any(axis=1))[0] for e in range(E)]
    sibling = {}
    for k, (i, j, s) in enumerate(edges):
        sibling.setdefault((i, j), []).append(k)
    pre = {}
    for (i, j), ps in (fixed_shifts or {}).items():
        ks = sibling.get((i - 1, j - 1), [])
        if len(ks) != len(ps):
            raise ValueError(f"fixed shifts for cell ({i},{j}) do not match its edge count")
        for k, p in zip(ks, ps):
            pre[k] = int(p) % Z
    grid = np.arange(Z)
    for attempt in range(restarts):
        rng = np.random.default_rng([seed, attempt])
        p = np.full(E + 1, -1, dtype=np.int64)
        p[E] = 0
        for k, v in pre.items():
            p[k] = v
        ok = True
        for e in rng.permutation(E):
            if p[e] >= 0 and e not in pre:
                continue
            forbid = np.zeros(Z, dtype=bool)
            rel = touching[e]
            if rel.size:
                sub = ids_all[rel]
                sg = sg_all[rel]
                is_e = sub == e
                known = np.all((p[sub] >= 0) | is_e, axis=1)
                if known.any():
                    sub, sg, is_e = sub[known], sg[known], is_e[known]
                    coef = (sg * is_e).sum(axis=1)
                    rest = (sg * np.where(is_e, 0, p[sub])).sum(axis=1)
                    hit = (rest[:, None] + coef[:, None] * grid[None, :]) % Z == 0
                    forbid |= hit.any(axis=0)
            i, j, _ = edges[e]
            for k in sibling[(i, j)]:
                if k != e and p[k] >= 0:
                    forbid[p[k]] = True
            if e in pre:
                if forbid[p[e]]:
                    raise GirthUnachievable("fixed shifts already close a short cycle")
                continue
            choices = np.nonzero(~forbid)[0]
            if choices.size == 0:
                ok = False
                break
            p[e] = rng.choice(choices)
        if ok:
            ent = [[() for _ in range(N)] for _ in range(M)]
            for k, (i, j, s) in enumerate(edges):
                ent[i][j] = ent[i][j] + (int(p[k]),)
            return PrototypeMatrix(M, N, Z, ent)
    raise GirthUnachievable(f"no shift assignment reached girth {girth_target} "
                            f"in {restarts} restarts")


# -- unimodular completion ----------------------------------------------------

def _peel(R: sp.csr_matrix):
    """Order rows of ``R`` to be lower triangular; returns ``(order, diag_cols)``.

    Reverse peeling: repeatedly pick the largest column covered by exactly
    one remaining row and place that row last.
    """
    R = sp.csr_matrix(R)
    m, n = R.shape
    Rc = R.tocsc()
    count = np.asarray((R != 0).sum(axis=0)).ravel().astype(np.int64)
    alive = np.ones(m, dtype=bool)
    order, diag = [], []
    for _ in range(m):
        ones = np.nonzero(count == 1)[0]
        # a weight-one column must belong to an alive row
        col = None
        for cand in ones[::-1]:
            rows = Rc.indices[Rc.indptr[cand]:Rc.indptr[cand + 1]]
            rows = rows[alive[rows]]
            if rows.size == 1:
                col, row = int(cand), int(rows[0])
                break
        if col is None:
            raise UnimodularCompletionFailed("rows of H0 cannot be triangularized by peeling")
        order.append(row)
        diag.append(col)
        alive[row] = False
        cols = R.indices[R.indptr[row]:R.indptr[row + 1]]
        count[cols] -= 1
    return order[::-1], diag[::-1]


def _pick_gap_columns(Y: np.ndarray, cand: np.ndarray, seed: int, budget: int):
    """Choose ``g`` columns of ``Y`` giving a unimodular square block.

    Randomized Markowitz pivoting restricted to +-1 pivots; each successful
    elimination multiplies the determinant by a unit, so a full run certifies
    ``|det| = 1``.
    """
    g = Y.shape[0]
    for attempt in range(budget):
        rng = np.random.default_rng([seed, attempt])
        W = Y[:, cand].astype(np.int64).copy()
        free = np.ones(g, dtype=bool)
        chosen = []
        for _ in range(g):
            rr, cc = np.nonzero((np.abs(W) == 1) & free[:, None])
            if rr.size == 0:
                break
            rn = (W != 0).sum(axis=1)
            cn = ((W != 0) & free[:, None]).sum(axis=0)
            score = (rn[rr] - 1) * (cn[cc] - 1) + 0.5 * rng.random(rr.size)
            k = int(np.argmin(score))
            r, c = rr[k], cc[k]
            f = W[:, c].copy()
            f[r] = 0
            W -= np.outer(f * W[r, c], W[r])
            if np.abs(W).max() > 2**40:
                break
            free[r] = False
            chosen.append(int(cand[c]))
        if len(chosen) == g:
            cols = np.array(sorted(chosen), dtype=np.int64)
            if abs(exact.bareiss_det(Y[:, cols])) == 1:
                return cols, attempt
    raise UnimodularCompletionFailed(f"no unimodular gap block found in {budget} attempts")


def build_family(H0, H1, seed: int = 0, budget: int = 200) -> NestedCodeFamily:
    """Complete ``(H0, H1)`` to a unimodular ``Htilde`` in ALT form.

    Row layout of the result, top to bottom: unit rows at the information
    columns, the rows of ``H0`` that extend ``span(H1)`` in triangular order,
    then the rows of ``H1`` (triangular ones first, the gap rows last).
    """
    H0 = sp.csr_matrix(H0, dtype=np.int64)
    H1 = sp.csr_matrix(H1, dtype=np.int64)
    n = H0.shape[1]
    if H1.shape[1] != n:
        raise DimensionMismatch("H0 and H1 have different column counts")
    m0, m1 = H0.shape[0], H1.shape[0]
    if gf2.rank(H1) != m1:
        raise RankDeficient("H1 does not have full row rank")
    if gf2.rank(H0) != m0:
        raise RankDeficient("H0 does not have full row rank")
    if not verify_nested(H0, H1):
        raise RankDeficient("H1 rows are not in the row space of H0")
    ext = gf2.extending_rows(H1, H0)
    if len(ext) != m0 - m1:
        raise RankDeficient("H0 rows do not complete span(H1)")
    R0 = H0[ext]
    order0, diag0 = _peel(R0)
    R0 = R0[order0]

    used = np.zeros(n, dtype=bool)
    used[R0.indices] = True
    t1, gap_rows, diag1 = [], [], []
    for j in range(m1):
        cols = H1.indices[H1.indptr[j]:H1.indptr[j + 1]]
        free = cols[~used[cols]]
        if free.size:
            t1.append(j)
            diag1.append(int(free.max()))
            used[cols] = True
        else:
            gap_rows.append(j)
    T_rows = sp.vstack([R0, H1[t1]]).tocsr()
    diag = np.array(diag0 + diag1, dtype=np.int64)
    g = len(gap_rows)
    is_diag = np.zeros(n, dtype=bool)
    is_diag[diag] = True

    if g:
        G = H1[gap_rows]
        Td = T_rows[:, diag]
        V = right_solve_lower(Td, G[:, diag].toarray())
        Y = np.asarray(G.toarray(), dtype=object) - np.asarray(V, dtype=object).dot(
            T_rows.toarray().astype(object))
        Y = exact.to_int64_if_fits(Y)
        if Y.dtype == object:
            raise UnimodularCompletionFailed("reduced gap rows overflow int64")
        cand = np.nonzero((Y != 0).any(axis=0) & ~is_diag)[0]
        gap_cols, attempt = _pick_gap_columns(Y, cand, seed, budget)
    else:
        gap_cols, attempt = np.zeros(0, dtype=np.int64), 0
    is_gap = np.zeros(n, dtype=bool)
    is_gap[gap_cols] = True
    info = np.nonzero(~is_diag & ~is_gap)[0]
    units = sp.csr_matrix((np.ones(info.size, dtype=np.int64), (np.arange(info.size), info)),
                          shape=(info.size, n))
    Ht = sp.vstack([units, T_rows, H1[gap_rows]]).tocsr()
    perm = np.concatenate([gap_cols, info, diag]).astype(np.int64)
    k = (n - m0, n - m1)
    meta = {"seed": int(seed), "gap_attempt": int(attempt),
            "h1_row_order": [int(v) for v in t1 + gap_rows],
            "h0_rows": [int(ext[i]) for i in order0]}
    fam = NestedCodeFamily(n, 2, k, Ht, perm=perm, g=g, meta=meta, decoding_checks=[H0, H1])
    AltSolver(fam.Htilde, perm, g)  # certifies det = +-1 exactly
    return fam
