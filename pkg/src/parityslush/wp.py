"""Warning Propagation on Tanner graphs and the structures built from its fixed point.

Messages take values in {f, s, u} (frozen, slush, unfrozen), coded as
``F``, ``S``, ``U`` below and stored per edge in the graph's edge order.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .gf2 import BitMatrix, BitVector, _rref, _unpack, frozen_set, in_row_space, rank_profile, RankProfile
from .graph import TannerGraph

__all__ = [
    "S", "F", "U",
    "MessageState",
    "SlushDecomposition",
    "ContractionMap",
    "StandardMessages",
    "wp_run",
    "wp_rounds",
    "classify",
    "decompose",
    "peel_slush",
    "two_stage_peel",
    "slush_minor",
    "extend_slush_solution",
    "contract_slush",
    "is_flipper",
    "enumerate_flippers",
    "canonical_flipper",
    "standard_messages",
    "generalized_degrees",
]

S, F, U = 0, 1, 2
SYMBOL = np.array(["s", "f", "u"])


class NotAFixedPoint(ValueError):
    pass


@dataclass
class MessageState:
    """Per-edge messages in the edge order of ``graph``."""

    graph: TannerGraph = field(repr=False)
    check_to_var: np.ndarray = field(repr=False)
    var_to_check: np.ndarray = field(repr=False)
    rounds_run: int = 0
    changes: list[int] = field(default_factory=list)

    def as_dict(self) -> dict[tuple[int, int], tuple[str, str]]:
        """{(v, a): (a->v, v->a)} with single-letter messages."""
        G = self.graph
        return {(v, a): (str(SYMBOL[x]), str(SYMBOL[y])) for v, a, x, y in
                zip(G.edge_var.tolist(), G.edge_check.tolist(), self.check_to_var.tolist(), self.var_to_check.tolist())}


def _other_counts(keys: np.ndarray, values: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """For each edge: numbers of F and U among the other edges at the same node, and their count."""
    isf = values == F
    isu = values == U
    nf = np.bincount(keys, weights=isf, minlength=n)
    nu = np.bincount(keys, weights=isu, minlength=n)
    deg = np.bincount(keys, minlength=n)
    return nf[keys] - isf, nu[keys] - isu, deg[keys] - 1


def _check_sweep(G: TannerGraph, v2c: np.ndarray) -> np.ndarray:
    of, ou, others = _other_counts(G.edge_check, v2c, G.n_checks)
    out = np.full(v2c.shape, S, dtype=np.int8)
    out[ou > 0] = U
    out[of == others] = F
    return out


def _var_sweep(G: TannerGraph, c2v: np.ndarray) -> np.ndarray:
    of, ou, others = _other_counts(G.edge_var, c2v, G.n_vars)
    out = np.full(c2v.shape, S, dtype=np.int8)
    out[of > 0] = F
    out[ou == others] = U
    return out


def _round(G: TannerGraph, v2c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    c2v = _check_sweep(G, v2c)
    return c2v, _var_sweep(G, c2v)


def wp_rounds(G: TannerGraph) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (check_to_var, var_to_check) after each round that changed something."""
    if not G.simple:
        raise ValueError("Warning Propagation needs a simple graph")
    c2v = np.full(G.n_edges, S, dtype=np.int8)
    v2c = np.full(G.n_edges, S, dtype=np.int8)
    while True:
        new_c2v, new_v2c = _round(G, v2c)
        if np.array_equal(new_c2v, c2v) and np.array_equal(new_v2c, v2c):
            return
        c2v, v2c = new_c2v, new_v2c
        yield c2v, v2c


def wp_run(G: TannerGraph) -> MessageState:
    """Run WP from the all-s start to its fixed point."""
    c2v = np.full(G.n_edges, S, dtype=np.int8)
    v2c = np.full(G.n_edges, S, dtype=np.int8)
    changes = []
    for new_c2v, new_v2c in wp_rounds(G):
        changes.append(int((new_c2v != c2v).sum() + (new_v2c != v2c).sum()))
        c2v, v2c = new_c2v, new_v2c
    return MessageState(G, c2v, v2c, len(changes), changes)


@dataclass(frozen=True)
class SlushDecomposition:
    V_f: frozenset[int]
    V_u: frozenset[int]
    V_s: frozenset[int]
    V_other: frozenset[int]
    C_f: frozenset[int]
    C_u: frozenset[int]
    C_s: frozenset[int]
    C_other: frozenset[int]
    rounds: int = 0

    @property
    def n_s(self) -> int:
        return len(self.V_s)

    @property
    def m_s(self) -> int:
        return len(self.C_s)

    def to_json(self) -> dict:
        out = {k: sorted(getattr(self, k)) for k in ("V_f", "V_u", "V_s", "V_other", "C_f", "C_u", "C_s", "C_other")}
        out.update(rounds=self.rounds, n_s=self.n_s, m_s=self.m_s)
        return out


def _tally(keys: np.ndarray, values: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    nf = np.bincount(keys, weights=values == F, minlength=n)
    nu = np.bincount(keys, weights=values == U, minlength=n)
    ns = np.bincount(keys, weights=values == S, minlength=n)
    deg = np.bincount(keys, minlength=n)
    return nf, nu, ns, deg


def _sets(masks: Sequence[np.ndarray]) -> list[frozenset[int]]:
    return [frozenset(np.flatnonzero(m).tolist()) for m in masks]


def classify(G: TannerGraph, ms: MessageState) -> SlushDecomposition:
    """Sort nodes by the WP messages they receive."""
    c2v, v2c = _round(G, ms.var_to_check)
    if not (np.array_equal(c2v, ms.check_to_var) and np.array_equal(v2c, ms.var_to_check)):
        raise NotAFixedPoint("messages are not a WP fixed point")
    nf, nu, ns, deg = _tally(G.edge_var, ms.check_to_var, G.n_vars)
    vf = nf > 0
    vu = nu == deg
    vs = (nf == 0) & (ns >= 2)
    vo = ~(vf | vu | vs)
    nf, nu, ns, deg = _tally(G.edge_check, ms.var_to_check, G.n_checks)
    cf = nf == deg
    cu = nu > 0
    cs = (nu == 0) & (ns >= 2)
    co = ~(cf | cu | cs)
    return SlushDecomposition(*_sets([vf, vu, vs, vo, cf, cu, cs, co]), rounds=ms.rounds_run)


def decompose(G: TannerGraph) -> tuple[MessageState, SlushDecomposition]:
    ms = wp_run(G)
    return ms, classify(G, ms)


# peeling


def peel_slush(G: TannerGraph) -> tuple[frozenset[int], frozenset[int]]:
    """Strip nodes of degree at most one together with their neighbour until none remain."""
    vadj = [G.var_neighbours(v) for v in range(G.n_vars)]
    cadj = [G.check_neighbours(a) for a in range(G.n_checks)]
    vdeg = [len(x) for x in vadj]
    cdeg = [len(x) for x in cadj]
    valive = [True] * G.n_vars
    calive = [True] * G.n_checks
    queue = deque([("v", v) for v in range(G.n_vars) if vdeg[v] <= 1] + [("c", a) for a in range(G.n_checks) if cdeg[a] <= 1])

    def kill_var(v: int) -> None:
        valive[v] = False
        for a in vadj[v]:
            if calive[a]:
                cdeg[a] -= 1
                if cdeg[a] <= 1:
                    queue.append(("c", a))

    def kill_check(a: int) -> None:
        calive[a] = False
        for v in cadj[a]:
            if valive[v]:
                vdeg[v] -= 1
                if vdeg[v] <= 1:
                    queue.append(("v", v))

    while queue:
        kind, x = queue.popleft()
        if kind == "v":
            if not valive[x] or vdeg[x] > 1:
                continue
            nb = [a for a in vadj[x] if calive[a]]
            kill_var(x)
            for a in nb:
                kill_check(a)
        else:
            if not calive[x] or cdeg[x] > 1:
                continue
            nb = [v for v in cadj[x] if valive[v]]
            kill_check(x)
            for v in nb:
                kill_var(v)
    return (frozenset(v for v in range(G.n_vars) if valive[v]),
            frozenset(a for a in range(G.n_checks) if calive[a]))


@dataclass
class TwoStagePeel:
    stage1_vars: list[int]
    stage1_checks: list[int]
    stage2: list[tuple[int, int]]  # (variable, check at removal or -1)
    vars_left: frozenset[int]
    checks_left: frozenset[int]


def two_stage_peel(G: TannerGraph) -> TwoStagePeel:
    """Peel low-degree checks first, then low-degree variables, recording the order."""
    vadj = [G.var_neighbours(v) for v in range(G.n_vars)]
    cadj = [G.check_neighbours(a) for a in range(G.n_checks)]
    vdeg = [len(x) for x in vadj]
    cdeg = [len(x) for x in cadj]
    valive = [True] * G.n_vars
    calive = [True] * G.n_checks
    s1v: list[int] = []
    s1c: list[int] = []
    queue = deque(a for a in range(G.n_checks) if cdeg[a] <= 1)
    while queue:
        a = queue.popleft()
        if not calive[a] or cdeg[a] > 1:
            continue
        calive[a] = False
        s1c.append(a)
        for v in cadj[a]:
            if valive[v]:
                valive[v] = False
                s1v.append(v)
                for b in vadj[v]:
                    if calive[b]:
                        cdeg[b] -= 1
                        if cdeg[b] <= 1:
                            queue.append(b)
    # variable degrees must count alive checks only
    vdeg = [sum(1 for a in vadj[v] if calive[a]) if valive[v] else 0 for v in range(G.n_vars)]
    s2: list[tuple[int, int]] = []
    queue = deque(v for v in range(G.n_vars) if valive[v] and vdeg[v] <= 1)
    while queue:
        y = queue.popleft()
        if not valive[y] or vdeg[y] > 1:
            continue
        valive[y] = False
        nb = [a for a in vadj[y] if calive[a]]
        b = nb[0] if nb else -1
        s2.append((y, b))
        if b >= 0:
            calive[b] = False
            for w in cadj[b]:
                if valive[w]:
                    vdeg[w] -= 1
                    if vdeg[w] <= 1:
                        queue.append(w)
    return TwoStagePeel(s1v, s1c, s2,
                        frozenset(v for v in range(G.n_vars) if valive[v]),
                        frozenset(a for a in range(G.n_checks) if calive[a]))


def slush_minor(A: BitMatrix, dec: SlushDecomposition) -> BitMatrix:
    """Rows C_s and columns V_s of A, both in increasing index order."""
    return A.submatrix(sorted(dec.C_s), sorted(dec.V_s))


def extend_slush_solution(A: BitMatrix, dec: SlushDecomposition, xi_s: BitVector) -> BitVector:
    """Lift a kernel vector of the slush minor to a kernel vector of A."""
    vs = sorted(dec.V_s)
    if xi_s.length != len(vs):
        raise ValueError("slush vector has the wrong length")
    if slush_minor(A, dec).matvec(xi_s).bits.any():
        raise ValueError("slush vector is not in the kernel of the slush minor")
    G = TannerGraph.from_matrix(A)
    peel = two_stage_peel(G)
    if peel.vars_left != dec.V_s or peel.checks_left != dec.C_s:
        raise ValueError("decomposition does not match the peeling of A")
    x = np.zeros(A.n_cols, dtype=np.uint8)
    x[vs] = xi_s.to_dense()
    for y, b in reversed(peel.stage2):
        if b >= 0:
            nb = [v for v in G.check_neighbours(b) if v != y]
            x[y] = int(x[nb].sum() & 1)
    return BitVector.from_dense(x)


# contraction


@dataclass(frozen=True)
class ContractionMap:
    component_of: np.ndarray = field(repr=False)
    n_components: int
    cycle_rank: int
    contracted: BitMatrix
    kept_checks: list[int]


def contract_slush(G_s: TannerGraph) -> ContractionMap:
    """Merge variables joined by degree-two checks and drop those checks.

    Remaining checks are rewritten over the merged variables with entries
    equal to the parity of the number of edges into each merged variable.
    """
    if G_s.n_vars and G_s.var_degree.min() < 2 or G_s.n_checks and G_s.check_degree.min() < 2:
        raise ValueError("input has nodes of degree below two")
    parent = list(range(G_s.n_vars))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    deg2 = [a for a in range(G_s.n_checks) if G_s.check_degree[a] == 2]
    touched: set[int] = set()
    for a in deg2:
        ends = [v for v, k in G_s.check_adj[a] for _ in range(k)]
        touched.update(ends)
        ra, rb = find(ends[0]), find(ends[1])
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = [find(v) for v in range(G_s.n_vars)]
    ids: dict[int, int] = {}
    comp = np.empty(G_s.n_vars, dtype=np.int64)
    for v, r in enumerate(roots):
        comp[v] = ids.setdefault(r, len(ids))
    n_comp = len(ids)
    comps_touched = len({int(comp[v]) for v in touched})
    cycle_rank = len(deg2) - len(touched) + comps_touched
    kept = [a for a in range(G_s.n_checks) if G_s.check_degree[a] != 2]
    rows, cols = [], []
    for i, a in enumerate(kept):
        for v, k in G_s.check_adj[a]:
            rows += [i] * k
            cols += [int(comp[v])] * k
    contracted = BitMatrix.from_entries(len(kept), n_comp, rows, cols)
    return ContractionMap(comp, n_comp, cycle_rank, contracted, kept)


# flippers


def _check_rows(A: BitMatrix | TannerGraph) -> list[list[int]]:
    G = A if isinstance(A, TannerGraph) else TannerGraph.from_matrix(A)
    return [G.check_neighbours(a) for a in range(G.n_checks)]


def is_flipper(A: BitMatrix | TannerGraph, U_set: Iterable[int]) -> bool:
    """Every check touching the set meets it at least twice."""
    members = set(U_set)
    for nb in _check_rows(A):
        hits = sum(1 for v in nb if v in members)
        if hits == 1:
            return False
    return True


def enumerate_flippers(A: BitMatrix, max_size: int | None = None) -> list[frozenset[int]]:
    """All flippers of A by exhaustive search over subsets (at most 25 variables)."""
    n = A.n_cols
    if n > 25:
        raise ValueError("exhaustive flipper search is limited to 25 variables")
    masks = np.array([sum(1 << v for v in nb) for nb in _check_rows(A)], dtype=np.int64)
    found: list[frozenset[int]] = []
    chunk = 1 << 16
    for start in range(0, 1 << n, chunk):
        sub = np.arange(start, min(start + chunk, 1 << n), dtype=np.int64)
        ok = np.ones(sub.size, dtype=bool)
        for m in masks:
            y = sub & m
            ok &= ~((y != 0) & ((y & (y - 1)) == 0))
        for s in sub[ok].tolist():
            members = frozenset(v for v in range(n) if (s >> v) & 1)
            if max_size is None or len(members) <= max_size:
                found.append(members)
    return found


def canonical_flipper(A_s: BitMatrix, profile_s: RankProfile | None = None) -> frozenset[int]:
    """Columns of the slush minor that are not frozen (local column indices)."""
    if profile_s is None:
        profile_s = rank_profile(A_s)
    return frozenset(range(A_s.n_cols)) - frozenset(frozen_set(A_s, profile_s))


# standard messages

STANDARD_EDGE_LIMIT = 2000


@dataclass
class StandardMessages:
    graph: TannerGraph = field(repr=False)
    var_to_check: np.ndarray = field(repr=False)  # F or U per edge
    check_to_var: np.ndarray = field(repr=False)
    var_marks: list[str]
    check_marks: list[str]
    discrepancy_count: int


def standard_messages(A: BitMatrix) -> StandardMessages:
    """Frozen/unfrozen messages defined by kernels of row-deleted matrices.

    v->a is f iff v is frozen once row a is deleted; a->v is f iff v is
    frozen once every other row through v is deleted.
    """
    G = TannerGraph.from_matrix(A)
    if G.n_edges > STANDARD_EDGE_LIMIT:
        raise ValueError(f"standard messages are limited to {STANDARD_EDGE_LIMIT} edges, got {G.n_edges}")
    v2c = np.full(G.n_edges, U, dtype=np.int8)
    c2v = np.full(G.n_edges, U, dtype=np.int8)
    order = G.check_order
    cptr = G.check_ptr
    for a in range(G.n_checks):
        edges = order[cptr[a]:cptr[a + 1]]
        if edges.size == 0:
            continue
        frozen = np.zeros(A.n_cols, dtype=bool)
        frozen[frozen_set(A.delete_rows([a]))] = True
        v2c[edges] = np.where(frozen[G.edge_var[edges]], F, U)
    vptr = G.var_ptr
    for v in range(G.n_vars):
        edges = np.arange(vptr[v], vptr[v + 1])
        if edges.size == 0:
            continue
        checks = G.edge_check[edges]
        base = A.delete_rows(checks.tolist())
        R, piv = _rref(base.words.copy(), A.n_cols)
        w, b = divmod(v, 64)
        for e, a in zip(edges.tolist(), checks.tolist()):
            row = A.words[a].copy()
            row[w] ^= np.uint64(1) << np.uint64(b)
            c2v[e] = F if in_row_space(R, piv, row) else U
    # marks
    nf_v = np.bincount(G.edge_var, weights=c2v == F, minlength=G.n_vars).astype(int)
    var_marks = ["f" if k >= 2 else "*" if k == 1 else "u" for k in nf_v.tolist()]
    nf_c = np.bincount(G.edge_check, weights=v2c == F, minlength=G.n_checks).astype(int)
    deg_c = G.check_degree
    check_marks = ["f" if k == g else "*" if k == g - 1 else "u" for k, g in zip(nf_c.tolist(), deg_c.tolist())]
    # one round of the simplified update
    of, _, _ = _other_counts(G.edge_var, c2v, G.n_vars)
    simple_v2c = np.where(of > 0, F, U)
    of, _, others = _other_counts(G.edge_check, v2c, G.n_checks)
    simple_c2v = np.where(of == others, F, U)
    disc = int((simple_v2c != v2c).sum() + (simple_c2v != c2v).sum())
    return StandardMessages(G, v2c, c2v, var_marks, check_marks, disc)


def generalized_degrees(G: TannerGraph, check_to_var: np.ndarray, var_to_check: np.ndarray):
    """Per-node (mark, L) with L = (uu, uf, fu, ff) counting (incoming, outgoing) pairs.

    Messages must be two-valued (F or U). Returns (variable list, check list).
    """
    def census(keys, incoming, outgoing, n):
        cnt = np.zeros((n, 4), dtype=np.int64)
        code = 2 * (incoming == F) + (outgoing == F)  # uu=0, uf=1, fu=2, ff=3
        np.add.at(cnt, (keys, code), 1)
        return cnt

    vc = census(G.edge_var, check_to_var, var_to_check, G.n_vars)
    cc = census(G.edge_check, var_to_check, check_to_var, G.n_checks)
    vmarks = []
    for row in vc.tolist():
        k = row[2] + row[3]
        vmarks.append(("f" if k >= 2 else "*" if k == 1 else "u", tuple(row)))
    cmarks = []
    for row in cc.tolist():
        deg = sum(row)
        k = row[2] + row[3]
        cmarks.append(("f" if k == deg else "*" if k == deg - 1 else "u", tuple(row)))
    return vmarks, cmarks
