"""Tanner graphs and random generators.

Covers the Bernoulli matrix ensemble, the pairing (configuration) model,
Poisson Galton-Watson trees with and without messages, the tree-grafting
perturbation and unit-row pinning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Literal, Sequence

import numpy as np

from .gf2 import BitMatrix

if TYPE_CHECKING:
    from .analytics import AnalyticProfile

__all__ = [
    "TannerGraph",
    "TreeNode",
    "DecoratedTree",
    "PerturbationMarkers",
    "PairingRejected",
    "gen_bernoulli",
    "pairing_model",
    "poisson",
    "poisson_pos",
    "sample_tree",
    "decorate_by_leaf_init",
    "thimblerig",
    "pin",
    "format_graph",
    "parse_graph",
]

POISSON_MAX_MEAN = 30.0


@dataclass(frozen=True)
class TannerGraph:
    """Bipartite variable/check multigraph.

    Edges are kept as parallel arrays sorted by (variable, check) with one
    entry per distinct pair and a multiplicity.
    """

    n_vars: int
    n_checks: int
    edge_var: np.ndarray = field(repr=False)
    edge_check: np.ndarray = field(repr=False)
    mult: np.ndarray = field(repr=False)

    @classmethod
    def from_edges(cls, n_vars: int, n_checks: int, var, check) -> "TannerGraph":
        """Build from a list of edges; repeated pairs become multiplicities."""
        var = np.asarray(var, dtype=np.int64)
        check = np.asarray(check, dtype=np.int64)
        if var.size and (var.min() < 0 or var.max() >= n_vars or check.min() < 0 or check.max() >= n_checks):
            raise ValueError("edge endpoint out of range")
        key = var * max(n_checks, 1) + check
        uniq, counts = np.unique(key, return_counts=True)
        ev = uniq // max(n_checks, 1)
        ec = uniq % max(n_checks, 1)
        return cls(n_vars, n_checks, ev, ec, counts.astype(np.int64))

    @classmethod
    def from_matrix(cls, A: BitMatrix) -> "TannerGraph":
        r, c = A.entries()
        return cls.from_edges(A.n_cols, A.n_rows, c, r)

    def to_matrix(self) -> BitMatrix:
        """Bi-adjacency matrix; multi-edges reduce to their parity."""
        odd = (self.mult % 2) == 1
        return BitMatrix.from_entries(self.n_checks, self.n_vars, self.edge_check[odd], self.edge_var[odd])

    @property
    def n_edges(self) -> int:
        return int(self.edge_var.size)

    @property
    def simple(self) -> bool:
        return bool(np.all(self.mult == 1))

    @cached_property
    def var_degree(self) -> np.ndarray:
        return np.bincount(self.edge_var, weights=self.mult, minlength=self.n_vars).astype(np.int64)

    @cached_property
    def check_degree(self) -> np.ndarray:
        return np.bincount(self.edge_check, weights=self.mult, minlength=self.n_checks).astype(np.int64)

    @cached_property
    def var_ptr(self) -> np.ndarray:
        """CSR offsets into the edge arrays, grouped by variable."""
        counts = np.bincount(self.edge_var, minlength=self.n_vars)
        return np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    @cached_property
    def check_order(self) -> np.ndarray:
        """Edge permutation sorting edges by (check, variable)."""
        return np.lexsort((self.edge_var, self.edge_check))

    @cached_property
    def check_ptr(self) -> np.ndarray:
        counts = np.bincount(self.edge_check, minlength=self.n_checks)
        return np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    @cached_property
    def var_adj(self) -> list[list[tuple[int, int]]]:
        ptr = self.var_ptr
        ec, m = self.edge_check.tolist(), self.mult.tolist()
        return [list(zip(ec[ptr[v]:ptr[v + 1]], m[ptr[v]:ptr[v + 1]])) for v in range(self.n_vars)]

    @cached_property
    def check_adj(self) -> list[list[tuple[int, int]]]:
        ptr = self.check_ptr
        order = self.check_order
        ev, m = self.edge_var[order].tolist(), self.mult[order].tolist()
        return [list(zip(ev[ptr[a]:ptr[a + 1]], m[ptr[a]:ptr[a + 1]])) for a in range(self.n_checks)]

    def var_neighbours(self, v: int) -> list[int]:
        return [a for a, _ in self.var_adj[v]]

    def check_neighbours(self, a: int) -> list[int]:
        return [v for v, _ in self.check_adj[a]]

    def consistent(self) -> bool:
        """var_adj and check_adj describe the same edge multiset."""
        left = sorted((v, a, k) for v, adj in enumerate(self.var_adj) for a, k in adj)
        right = sorted((v, a, k) for a, adj in enumerate(self.check_adj) for v, k in adj)
        return left == right

    def transpose(self) -> "TannerGraph":
        return TannerGraph.from_edges(self.n_checks, self.n_vars,
                                      np.repeat(self.edge_check, self.mult), np.repeat(self.edge_var, self.mult))

    def induced(self, variables: Sequence[int], checks: Sequence[int]) -> "TannerGraph":
        """Subgraph on the given nodes, relabelled in the order given."""
        vmap = np.full(self.n_vars, -1, dtype=np.int64)
        vmap[np.asarray(variables, dtype=np.int64)] = np.arange(len(variables))
        cmap = np.full(self.n_checks, -1, dtype=np.int64)
        cmap[np.asarray(checks, dtype=np.int64)] = np.arange(len(checks))
        keep = (vmap[self.edge_var] >= 0) & (cmap[self.edge_check] >= 0)
        k = self.mult[keep]
        return TannerGraph.from_edges(len(variables), len(checks),
                                      np.repeat(vmap[self.edge_var[keep]], k), np.repeat(cmap[self.edge_check[keep]], k))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TannerGraph):
            return NotImplemented
        return (self.n_vars, self.n_checks) == (other.n_vars, other.n_checks) and all(
            np.array_equal(x, y) for x, y in ((self.edge_var, other.edge_var), (self.edge_check, other.edge_check), (self.mult, other.mult)))

    __hash__ = None  # type: ignore[assignment]


def format_graph(G: TannerGraph) -> str:
    """Sparse text form with check index first; multi-edges repeat the line."""
    lines = [f"{G.n_checks} {G.n_vars}"]
    order = G.check_order
    for a, v, k in zip(G.edge_check[order].tolist(), G.edge_var[order].tolist(), G.mult[order].tolist()):
        lines += [f"{a} {v}"] * k
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> TannerGraph:
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    m, n = int(lines[0][0]), int(lines[0][1])
    pairs = np.array([[int(a), int(b)] for a, b in lines[1:]], dtype=np.int64).reshape(-1, 2)
    return TannerGraph.from_edges(n, m, pairs[:, 1], pairs[:, 0])


# random matrices and graphs


def gen_bernoulli(n: int, d: float, rng: np.random.Generator) -> BitMatrix:
    """n x n matrix with i.i.d. Bernoulli(min(d/n, 1)) entries."""
    if d < 0:
        raise ValueError("d must be nonnegative")
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return BitMatrix.zeros(0, 0)
    p = min(d / n, 1.0)
    cells = n * n
    k = int(rng.binomial(cells, p))
    # uniform k-subset of cells: draw with replacement, drop repeats, top up
    chosen = np.unique(rng.integers(0, cells, size=k))
    while chosen.size < k:
        extra = rng.integers(0, cells, size=k - chosen.size)
        chosen = np.union1d(chosen, extra)
    return BitMatrix.from_entries(n, n, chosen // n, chosen % n)


class PairingRejected(RuntimeError):
    def __init__(self, attempts: int):
        super().__init__(f"no simple pairing after {attempts} attempts")
        self.attempts = attempts


def pairing_model(var_degs: Sequence[int], check_degs: Sequence[int], rng: np.random.Generator,
                  require_simple: bool = False, max_rejects: int = 1000) -> TannerGraph:
    """Uniform matching of variable clones to check clones."""
    var_degs = np.asarray(var_degs, dtype=np.int64)
    check_degs = np.asarray(check_degs, dtype=np.int64)
    if (var_degs < 0).any() or (check_degs < 0).any():
        raise ValueError("degrees must be nonnegative")
    if var_degs.sum() != check_degs.sum():
        raise ValueError(f"degree sums differ: {var_degs.sum()} != {check_degs.sum()}")
    v_clones = np.repeat(np.arange(var_degs.size), var_degs)
    c_clones = np.repeat(np.arange(check_degs.size), check_degs)
    attempts = 0
    while True:
        attempts += 1
        G = TannerGraph.from_edges(var_degs.size, check_degs.size, v_clones, rng.permutation(c_clones))
        if not require_simple or G.simple:
            return G
        if attempts > max_rejects:
            raise PairingRejected(attempts)


# Poisson sampling


def poisson(lam: float, rng: np.random.Generator) -> int:
    """Po(lam) by sequential inversion of the cdf."""
    if lam < 0 or lam > POISSON_MAX_MEAN:
        raise ValueError(f"Poisson mean must lie in [0, {POISSON_MAX_MEAN}]")
    if lam == 0:
        return 0
    u = rng.random()
    p = math.exp(-lam)
    cdf = p
    k = 0
    while u > cdf:
        k += 1
        p *= lam / k
        cdf += p
        if p == 0.0 and cdf < u:  # roundoff in the far tail
            break
    return k


def poisson_pos(lam: float, rng: np.random.Generator) -> int:
    """Po(lam) conditioned on being at least one, by rejection."""
    if lam <= 0:
        raise ValueError("conditioning on a null event")
    while True:
        k = poisson(lam, rng)
        if k >= 1:
            return k


# trees

NodeType = Literal["variable", "check"]
Message = Literal["f", "s", "u"]


@dataclass
class TreeNode:
    node_type: NodeType
    parent: int | None
    message_to_parent: Message | None = None
    level: int = 0


@dataclass
class DecoratedTree:
    nodes: list[TreeNode]
    depth: int

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    @property
    def messaged(self) -> bool:
        return len(self.nodes) > 1 and all(nd.message_to_parent is not None for nd in self.nodes[1:])

    def children(self) -> list[list[int]]:
        kids: list[list[int]] = [[] for _ in self.nodes]
        for i, nd in enumerate(self.nodes):
            if nd.parent is not None:
                kids[nd.parent].append(i)
        return kids

    def canonical(self, node: int = 0) -> tuple:
        """Isomorphism-invariant form: (message, sorted child forms)."""
        kids = self.children()

        def rec(i: int) -> tuple:
            return (self.nodes[i].message_to_parent or "", tuple(sorted(rec(j) for j in kids[i])))

        return rec(node)


def _other(t: NodeType) -> NodeType:
    return "check" if t == "variable" else "variable"


def _message_law(profile: "AnalyticProfile", sender: NodeType) -> tuple[float, float, float]:
    """(f, s, u) probabilities of a message sent by a node of the given type."""
    lo, hi = profile.alpha_star, profile.alpha_upper
    if sender == "check":
        return 1.0 - hi, hi - lo, lo
    return lo, hi - lo, 1.0 - hi


def _draw_message(law: tuple[float, float, float], rng: np.random.Generator) -> Message:
    u = rng.random()
    if u < law[0]:
        return "f"
    if u < law[0] + law[1]:
        return "s"
    return "u"


def _messaged_offspring(node_type: NodeType, msg: Message, d: float, profile: "AnalyticProfile",
                        rng: np.random.Generator) -> list[Message]:
    lo, hi = profile.alpha_star, profile.alpha_upper
    mid = hi - lo
    po = lambda lam: poisson(max(lam, 0.0), rng)  # noqa: E731
    if node_type == "check":
        # children are variables whose messages to this check have law (lo, mid, 1-hi)
        if msg == "f":
            counts = (po(lo * d), 0, 0)
        elif msg == "s":
            counts = (po(lo * d), poisson_pos(mid * d, rng), 0)
        else:
            counts = (po(lo * d), po(mid * d), poisson_pos((1.0 - hi) * d, rng))
    else:
        # children are checks whose messages to this variable have law (1-hi, mid, lo)
        if msg == "f":
            counts = (poisson_pos((1.0 - hi) * d, rng), po(mid * d), po(lo * d))
        elif msg == "s":
            counts = (0, poisson_pos(mid * d, rng), po(lo * d))
        else:
            counts = (0, 0, po(lo * d))
    return ["f"] * counts[0] + ["s"] * counts[1] + ["u"] * counts[2]


def sample_tree(root_type: NodeType, depth: int, d: float, messaged: bool = False,
                profile: "AnalyticProfile | None" = None, rng: np.random.Generator | None = None) -> DecoratedTree:
    """Poisson(d) Galton-Watson tree truncated at ``depth``.

    In messaged mode every non-root node carries the message it sends to its
    parent and its own offspring are drawn conditionally on that message.
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if rng is None:
        raise ValueError("an rng stream is required")
    if messaged and profile is None:
        raise ValueError("messaged trees need the fixed-point profile")
    nodes = [TreeNode(root_type, None, None, 0)]
    frontier = [0]
    for level in range(1, depth + 1):
        nxt = []
        for i in frontier:
            parent = nodes[i]
            child_type = _other(parent.node_type)
            if not messaged:
                msgs: list[Message | None] = [None] * poisson(d, rng)
            elif parent.parent is None:
                law = _message_law(profile, child_type)
                msgs = [_draw_message(law, rng) for _ in range(poisson(d, rng))]
            else:
                msgs = list(_messaged_offspring(parent.node_type, parent.message_to_parent, d, profile, rng))
            for m in msgs:
                nodes.append(TreeNode(child_type, i, m, level))
                nxt.append(len(nodes) - 1)
        frontier = nxt
    return DecoratedTree(nodes, depth)


def wp_rule(sender: NodeType, incoming: Sequence[Message]) -> Message:
    """One Warning Propagation update from the sender's other incoming messages."""
    if sender == "check":
        if all(m == "f" for m in incoming):
            return "f"
        return "u" if "u" in incoming else "s"
    if all(m == "u" for m in incoming):
        return "u"
    return "f" if "f" in incoming else "s"


def decorate_by_leaf_init(tree: DecoratedTree, profile: "AnalyticProfile", rng: np.random.Generator) -> DecoratedTree:
    """Messages for a plain tree: depth-t nodes draw from the limiting law, the rest follow WP."""
    nodes = [TreeNode(nd.node_type, nd.parent, None, nd.level) for nd in tree.nodes]
    kids = tree.children()
    for i in range(len(nodes) - 1, 0, -1):  # children always follow parents
        nd = nodes[i]
        if nd.level == tree.depth:
            nd.message_to_parent = _draw_message(_message_law(profile, nd.node_type), rng)
        else:
            nd.message_to_parent = wp_rule(nd.node_type, [nodes[j].message_to_parent for j in kids[i]])
    return DecoratedTree(nodes, tree.depth)


# perturbations


@dataclass(frozen=True)
class PerturbationMarkers:
    tree_var_roots: frozenset[int]
    tree_check_roots: frozenset[int]
    attachment_vars: frozenset[int]
    succeeded: bool
    leaves_per_var_tree: tuple[int, ...] = ()


def thimblerig(G: TannerGraph, omega1: int, omega2: int, d: float,
               rng: np.random.Generator) -> tuple[TannerGraph, PerturbationMarkers]:
    """Graft omega1 depth-2 variable-rooted and omega2 depth-1 check-rooted trees onto G.

    Inner tree nodes take the lowest-index isolated nodes; final-layer
    variables land on uniform variables of G. Any shortage or collision
    returns G untouched with ``succeeded=False``.
    """
    fail = (G, PerturbationMarkers(frozenset(), frozenset(), frozenset(), False))
    var_trees = [sample_tree("variable", 2, d, rng=rng) for _ in range(omega1)]
    check_trees = [sample_tree("check", 1, d, rng=rng) for _ in range(omega2)]
    iso_vars = iter(np.flatnonzero(G.var_degree == 0).tolist())
    iso_checks = iter(np.flatnonzero(G.check_degree == 0).tolist())
    new_v: list[int] = []
    new_c: list[int] = []
    var_roots, check_roots, inner_vars = [], [], set()
    leaf_groups: list[tuple[int, list[int]]] = []  # (embedded check, leaf count)
    leaves_per_tree = []
    try:
        for tree in var_trees:
            kids = tree.children()
            root = next(iso_vars)
            var_roots.append(root)
            inner_vars.add(root)
            n_leaves = 0
            for c in kids[0]:
                a = next(iso_checks)
                new_v.append(root)
                new_c.append(a)
                leaf_groups.append((a, len(kids[c])))
                n_leaves += len(kids[c])
            leaves_per_tree.append(n_leaves)
        for tree in check_trees:
            a = next(iso_checks)
            check_roots.append(a)
            leaf_groups.append((a, len(tree.children()[0])))
    except StopIteration:
        return fail
    attach = set()
    for a, k in leaf_groups:
        targets = rng.integers(0, G.n_vars, size=k) if k else np.zeros(0, dtype=np.int64)
        t = targets.tolist()
        if len(set(t)) < len(t) or inner_vars.intersection(t):
            return fail
        new_v += t
        new_c += [a] * k
        attach.update(t)
    G2 = TannerGraph.from_edges(G.n_vars, G.n_checks,
                                np.concatenate([np.repeat(G.edge_var, G.mult), np.asarray(new_v, dtype=np.int64)]),
                                np.concatenate([np.repeat(G.edge_check, G.mult), np.asarray(new_c, dtype=np.int64)]))
    return G2, PerturbationMarkers(frozenset(var_roots), frozenset(check_roots), frozenset(attach), True,
                                   tuple(leaves_per_tree))


def pin(A: BitMatrix, t: int, mode: Literal["append", "replace"], rng: np.random.Generator) -> BitMatrix:
    """Force coordinates to zero with unit rows."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return A
    if mode == "append":
        cols = rng.integers(0, A.n_cols, size=t)
        return A.append_rows(BitMatrix.from_entries(t, A.n_cols, np.arange(t), cols))
    if mode == "replace":
        zero_rows = np.flatnonzero(~A.words.any(axis=1))
        if zero_rows.size <= t:
            return A
        rows = rng.choice(zero_rows, size=t, replace=False)
        cols = rng.integers(0, A.n_cols, size=t)
        words = A.words.copy()
        words[rows, cols // 64] |= np.left_shift(np.uint64(1), (cols % 64).astype(np.uint64))
        return BitMatrix(A.n_rows, A.n_cols, words)
    raise ValueError(f"unknown pin mode {mode!r}")


def max_degree(A: BitMatrix) -> int:
    G = TannerGraph.from_matrix(A)
    degs = np.concatenate([G.var_degree, G.check_degree, [0]])
    return int(degs.max())
