import csv
import io
import itertools

import numpy as np
import pytest

from parityslush.analytics import fixed_points
from parityslush.experiments import (
    CSV_COLUMNS,
    ConfigError,
    ExperimentConfig,
    analyse_matrix,
    frozen_check_fraction,
    kernel_samples,
    pair_discrepancy,
    peak_label,
    report_to_csv,
    run_experiment,
    trial_rng,
)
from parityslush.gf2 import BitMatrix


def cfg(**kw) -> ExperimentConfig:
    base = dict(n=200, d=3.0, trials=3, seed=11, samples_per_trial=100, pairs=50, tree_samples=2000)
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.mark.parametrize(
    "bad",
    [dict(kind="nope"), dict(seed=None), dict(n=0), dict(trials=0), dict(eps=0.25), dict(eps=0.0),
     dict(omega=0), dict(d=-1.0), dict(kind="local", depth=3)],
)
def test_config_rejects(bad):
    with pytest.raises(ConfigError):
        cfg(**bad).validate()


def test_config_from_mapping_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping({"n": 10, "colour": "red"})


def test_trial_streams_are_independent_of_order():
    a = trial_rng(5, 3).random(4)
    trial_rng(5, 0).random(100)
    assert np.array_equal(a, trial_rng(5, 3).random(4))
    assert not np.array_equal(a, trial_rng(5, 4).random(4))


def test_peak_labels():
    p = fixed_points(3.0)
    assert peak_label(p.alpha_star + 0.01, p, 0.03) == "low"
    assert peak_label(p.alpha_0, p, 0.03) == "mid"
    assert peak_label(p.alpha_upper - 0.02, p, 0.03) == "high"
    assert peak_label(0.5, p, 0.03) == "none"
    sub = fixed_points(2.5)
    assert peak_label(sub.alpha_star, sub, 0.03) == "low"
    assert peak_label(0.0, None, 0.03) == "low"


def test_frozen_check_fraction_fixtures():
    assert frozen_check_fraction(analyse_matrix(BitMatrix.identity(4))) == 1.0
    # one free pair: the check through it is not frozen, the empty check is
    st = analyse_matrix(BitMatrix.from_dense([[1, 1], [0, 0]]))
    assert frozen_check_fraction(st) == 0.5


def test_zero_density_two_point():
    rep = run_experiment(cfg(kind="two-point", d=0.0))
    assert all(r["f"] == 0 and r["nullity_per_n"] == 1 for r in rep["per_trial"])


def test_reports_independent_of_workers():
    a = run_experiment(cfg(kind="slush", n=300, trials=4), workers=1)
    b = run_experiment(cfg(kind="slush", n=300, trials=4), workers=2)
    for rep in (a, b):
        for r in rep["per_trial"]:
            r.pop("elapsed")
    assert a == b


def test_peak_labels_do_not_depend_on_trial_order():
    rep = run_experiment(cfg(kind="two-point", trials=6))
    p = fixed_points(3.0)
    shuffled = list(reversed(rep["per_trial"]))
    assert [peak_label(r["f"], p, 0.03) for r in shuffled] == [r["peak"] for r in shuffled]


def test_two_point_records():
    rep = run_experiment(cfg(kind="two-point"))
    for r in rep["per_trial"]:
        assert 0 <= r["f"] <= 1 and r["peak"] in {"low", "mid", "high", "none"}
        assert r["V_f_share"] <= r["f"] + 1e-12
    assert set(rep["aggregates"]["peak_frequencies"]) == {"low", "mid", "high", "none"}


def test_identity_overlap_is_one():
    st = analyse_matrix(BitMatrix.identity(20))
    xs = kernel_samples(st, 20, np.random.default_rng(0))
    assert (xs[:10] == xs[10:]).mean() == 1.0


def test_single_equation_overlap_by_enumeration():
    A = BitMatrix.from_dense([[1, 1]])
    kernel = [np.array(x) for x in itertools.product((0, 1), repeat=2) if (x[0] + x[1]) % 2 == 0]
    overlap = np.mean([(x == y).mean() for x in kernel for y in kernel])
    st = analyse_matrix(A)
    assert overlap == 0.5 == (1 + st.f) / 2


def test_identity_pairs_are_independent():
    st = analyse_matrix(BitMatrix.identity(10))
    xs = kernel_samples(st, 100, np.random.default_rng(1))
    assert pair_discrepancy(xs, np.array([[0, 1], [2, 3]])) == 0.0


def test_zero_matrix_pairs_are_nearly_independent():
    st = analyse_matrix(BitMatrix.zeros(50, 50))
    rng = np.random.default_rng(2)
    xs = kernel_samples(st, 10_000, rng)
    pairs = np.array([(i, (i + 1) % 50) for i in range(50)])
    assert pair_discrepancy(xs, pairs) <= 0.02


def test_overlap_trials():
    rep = run_experiment(cfg(kind="overlap", n=300))
    for r in rep["per_trial"]:
        assert 0.5 <= r["overlap_mean"] <= 1.0
        assert r["overlap_target"] == pytest.approx((1 + r["f"]) / 2)


def test_local_at_zero_density_matches_exactly():
    rep = run_experiment(cfg(kind="local", d=0.0, n=100, trials=2))
    assert rep["aggregates"]["max_xi_zeta_gap"] == 0.0


@pytest.mark.parametrize("depth", [0, 1, 2])
def test_local_depths_run(depth):
    rep = run_experiment(cfg(kind="local", n=120, trials=1, depth=depth, tree_samples=500))
    assert rep["per_trial"][0]["census_source"] == "oracle"
    assert rep["aggregates"]["depth"] == depth


def test_local_flags_proxy_at_scale():
    rep = run_experiment(cfg(kind="local", n=800, trials=1, tree_samples=500))
    assert rep["aggregates"]["census_sources"] == ["wp_proxy"]


def test_subcritical_slush_is_tiny():
    rep = run_experiment(cfg(kind="slush", d=1.0, n=10_000, trials=2))
    agg = rep["aggregates"]
    assert agg["nu"] == 0
    assert agg["mean_V_s_share"] <= 0.01


def test_symmetry_with_pins():
    rep = run_experiment(cfg(kind="symmetry", pin_t=3))
    for r in rep["per_trial"]:
        assert r["pair_discrepancy"] >= 0 and r["pair_discrepancy_pinned"] >= 0


def test_csv_columns_in_documented_order():
    rep = run_experiment(cfg(kind="slush"))
    rows = list(csv.reader(io.StringIO(report_to_csv(rep))))
    header = rows[0]
    assert header == [c for c in CSV_COLUMNS if c in header]
    assert len(rows) == 4
    assert "elapsed" not in report_to_csv(rep, include_elapsed=False).splitlines()[0]
