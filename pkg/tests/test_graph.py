import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parityslush.analytics import fixed_points
from parityslush.gf2 import BitMatrix, frozen_set
from parityslush.graph import (
    PairingRejected,
    TannerGraph,
    decorate_by_leaf_init,
    format_graph,
    gen_bernoulli,
    max_degree,
    pairing_model,
    parse_graph,
    pin,
    sample_tree,
    thimblerig,
    wp_rule,
)
from parityslush.wp import classify, wp_run


def rng(seed=0):
    return np.random.default_rng(seed)


# generator


def test_zero_density_gives_zero_matrix():
    assert gen_bernoulli(50, 0.0, rng()).nnz() == 0


@pytest.mark.parametrize("d", [1.0, 2.5])
def test_single_entry_is_forced(d):
    assert gen_bernoulli(1, d, rng()).to_dense().tolist() == [[1]]


def test_total_ones_concentrate():
    n, d = 10_000, 3.0
    ones = gen_bernoulli(n, d, rng(4)).nnz()
    assert abs(ones - d * n) <= 4 * math.sqrt(d * n)


def test_negative_density_rejected():
    with pytest.raises(ValueError):
        gen_bernoulli(5, -1.0, rng())


def test_generator_is_seeded():
    assert gen_bernoulli(300, 3, rng(9)) == gen_bernoulli(300, 3, rng(9))


def test_entries_are_spread_evenly():
    A = gen_bernoulli(400, 4, rng(5))
    rows, cols = A.entries()
    # row and column marginals look like Bin(400, 0.01)
    assert abs(np.bincount(rows, minlength=400).var() - 4 * 0.99) < 1.0
    assert abs(np.bincount(cols, minlength=400).var() - 4 * 0.99) < 1.0


@pytest.mark.parametrize("d", [1.0, 2.0, 3.0, 4.0])
def test_max_degree_within_log_n(d):
    # claimed for >= 99% of trials at n = 10^4
    r = rng(int(d * 10))
    bound = math.ceil(math.log(10_000))
    ok = sum(max_degree(gen_bernoulli(10_000, d, r)) <= bound for _ in range(100))
    assert ok >= 99


def test_binomial_degree_moments():
    n, d = 10_000, 3.0
    G = TannerGraph.from_matrix(gen_bernoulli(n, d, rng(6)))
    for ell in (1, 2, 3):
        assert np.mean([math.comb(int(k), ell) for k in G.var_degree]) <= (2 * d) ** ell


# pairing model


def test_pairing_forced_cases():
    G = pairing_model([1], [1], rng())
    assert (G.edge_var.tolist(), G.edge_check.tolist()) == ([0], [0])
    G = pairing_model([2], [1, 1], rng())
    assert sorted(G.var_neighbours(0)) == [0, 1]


def test_pairing_degrees_preserved():
    r = rng(1)
    vd = r.integers(0, 5, size=60)
    cd = np.bincount(r.integers(0, 45, size=int(vd.sum())), minlength=45)
    G = pairing_model(vd, cd, r)
    assert G.var_degree.tolist() == vd.tolist()
    assert G.check_degree.tolist() == cd.tolist()


def test_pairing_simple_acceptance_rate():
    # 16 of the 24 clone matchings on (2,2),(2,2) are simple
    r = rng(2)
    trials = 10_000
    simple = sum(pairing_model([2, 2], [2, 2], r).simple for _ in range(trials))
    assert abs(simple / trials - 16 / 24) <= 4 * math.sqrt((2 / 3) * (1 / 3) / trials)


def test_pairing_simple_mode_returns_cycle():
    G = pairing_model([2, 2], [2, 2], rng(3), require_simple=True)
    assert G.simple and G.n_edges == 4


def test_pairing_gives_up():
    with pytest.raises(PairingRejected):
        pairing_model([2], [2], rng(), require_simple=True, max_rejects=5)


def test_pairing_rejects_mismatched_sums():
    with pytest.raises(ValueError):
        pairing_model([1, 1], [1], rng())


def test_pairing_on_slush_degrees_accepts_often():
    # degree sequences of the slush at d=3 should pass the simplicity test regularly
    # pooled over several sequences; single sequences scatter around exp(-1.99)
    r = rng(7)
    accepted = attempts = 0
    for _ in range(10):
        G = TannerGraph.from_matrix(gen_bernoulli(2000, 3, r))
        dec = classify(G, wp_run(G))
        Gs = G.induced(sorted(dec.V_s), sorted(dec.C_s))
        accepted += sum(pairing_model(Gs.var_degree, Gs.check_degree, r).simple for _ in range(100))
        attempts += 100
    assert accepted / attempts >= 0.1


def test_graph_text_round_trip_with_multiedge():
    G = TannerGraph.from_edges(3, 2, [0, 0, 2], [1, 1, 0])
    assert not G.simple
    H = parse_graph(format_graph(G))
    assert H == G
    assert H.to_matrix().to_dense().tolist() == [[0, 0, 1], [0, 0, 0]]


def test_transpose_swaps_sides():
    A = gen_bernoulli(30, 2, rng(8))
    G = TannerGraph.from_matrix(A)
    assert G.transpose().to_matrix().to_dense().tolist() == A.to_dense().T.tolist()
    assert G.consistent()


# trees


def test_depth_zero_and_empty_trees():
    assert len(sample_tree("variable", 0, 3, rng=rng()).nodes) == 1
    assert len(sample_tree("check", 4, 0.0, rng=rng()).nodes) == 1


def test_root_offspring_mean():
    r = rng(11)
    kids = [len(sample_tree("variable", 1, 3, rng=r).nodes) - 1 for _ in range(100_000)]
    assert abs(np.mean(kids) - 3) <= 0.05


def test_messaged_tree_needs_profile():
    with pytest.raises(ValueError):
        sample_tree("variable", 1, 3, messaged=True, rng=rng())


def test_messaged_tree_messages_follow_rules():
    prof = fixed_points(3.0)
    r = rng(12)
    for _ in range(300):
        t = sample_tree("variable", 3, 3.0, messaged=True, profile=prof, rng=r)
        kids = t.children()
        for i, nd in enumerate(t.nodes[1:], start=1):
            if nd.level < t.depth:
                assert wp_rule(nd.node_type, [t.nodes[j].message_to_parent for j in kids[i]]) == nd.message_to_parent


def test_leaf_decoration_of_bare_root():
    t = sample_tree("variable", 0, 3, rng=rng())
    assert decorate_by_leaf_init(t, fixed_points(3.0), rng()).nodes[0].message_to_parent is None


def test_leaf_decoration_matches_direct_sampling():
    prof = fixed_points(3.0)
    r = rng(13)
    direct, decorated = Counter(), Counter()
    for _ in range(100_000):
        a = sample_tree("variable", 2, 3.0, messaged=True, profile=prof, rng=r)
        direct.update(nd.message_to_parent for nd in a.nodes if nd.level == 1)
        b = decorate_by_leaf_init(sample_tree("variable", 2, 3.0, rng=r), prof, r)
        decorated.update(nd.message_to_parent for nd in b.nodes if nd.level == 1)
    nd, nb = sum(direct.values()), sum(decorated.values())
    tv = 0.5 * sum(abs(direct[m] / nd - decorated[m] / nb) for m in "fsu")
    assert tv <= 0.02


@pytest.mark.parametrize(
    "sender,incoming,out",
    [
        ("check", [], "f"),
        ("check", ["f", "s"], "s"),
        ("check", ["s", "u"], "u"),
        ("variable", [], "u"),
        ("variable", ["u", "s"], "s"),
        ("variable", ["s", "f", "u"], "f"),
    ],
)
def test_wp_rule_table(sender, incoming, out):
    assert wp_rule(sender, incoming) == out


# perturbations


def test_thimblerig_noop():
    G = TannerGraph.from_matrix(gen_bernoulli(50, 2, rng()))
    H, m = thimblerig(G, 0, 0, 2.0, rng())
    assert H == G and m.succeeded


def test_thimblerig_needs_isolated_nodes():
    G = TannerGraph.from_matrix(BitMatrix.identity(5))
    H, m = thimblerig(G, 1, 0, 3.0, rng())
    assert H is G and not m.succeeded


def test_thimblerig_attachment_mean():
    n = 20_000
    r = rng(14)
    G = TannerGraph.from_matrix(gen_bernoulli(n, 3, r))
    sizes = []
    while len(sizes) < 2000:
        H, m = thimblerig(G, 100, 0, 3.0, r)
        if m.succeeded:
            sizes.extend(m.leaves_per_var_tree)
    assert abs(np.mean(sizes) - 9) <= 1


def test_thimblerig_grafts_trees():
    n = 5000
    r = rng(15)
    G = TannerGraph.from_matrix(gen_bernoulli(n, 3, r))
    H, m = thimblerig(G, 5, 5, 3.0, r)
    assert m.succeeded
    assert H.n_edges >= G.n_edges
    for v in m.tree_var_roots:
        assert G.var_degree[v] == 0
    for a in m.tree_check_roots:
        assert G.check_degree[a] == 0


def test_pin_zero_is_identity():
    A = gen_bernoulli(20, 2, rng())
    assert pin(A, 0, "append", rng()) is A


def test_pin_append_shape():
    A = BitMatrix.from_dense([[1, 1], [0, 1]])
    B = pin(A, 2, "append", rng())
    assert B.shape == (4, 2)
    assert [int(r.sum()) for r in B.to_dense()[2:]] == [1, 1]


def test_pin_replace_fills_zero_rows():
    # with more zero rows than pins, exactly t rows gain a single one
    n = 6
    B = pin(BitMatrix.zeros(n, n), n - 1, "replace", rng(3))
    assert sorted(int(r.sum()) for r in B.to_dense()) == [0] + [1] * (n - 1)


def test_pin_replace_without_room_is_identity():
    A = BitMatrix.zeros(4, 4)
    assert pin(A, 4, "replace", rng()) is A


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 40), st.floats(0.5, 4), st.integers(0, 10), st.integers(0, 2**16))
def test_pinning_only_grows_frozen_set(n, d, t, seed):
    r = rng(seed)
    A = gen_bernoulli(n, d, r)
    assert set(frozen_set(A)) <= set(frozen_set(pin(A, t, "append", r)))
