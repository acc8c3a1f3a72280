"""Seeded Monte Carlo harness for the random parity matrix.

Each experiment maps a config to a report ``{config, per_trial, aggregates}``.
Trial ``i`` draws from its own stream seeded by ``(seed, i)``, so results do
not depend on the number of workers or on scheduling order.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Callable

import numpy as np

from . import analytics as an
from .gf2 import BitMatrix, combine_rows, frozen_set, rank_profile
from .graph import TannerGraph, gen_bernoulli, pin, sample_tree
from .wp import F, S, U, classify, generalized_degrees, standard_messages, wp_run

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "KINDS",
    "trial_rng",
    "peak_label",
    "analyse_matrix",
    "run_experiment",
    "exp_two_point",
    "exp_slush",
    "exp_overlap",
    "exp_local",
    "exp_symmetry",
    "report_to_csv",
    "CSV_COLUMNS",
]

KINDS = ("two-point", "slush", "overlap", "local", "symmetry")
ORACLE_MAX_N = 500
WORKERS_ENV = "PARITYSLUSH_WORKERS"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str = "two-point"
    n: int = 2000
    d: float = 3.0
    trials: int = 10
    samples_per_trial: int = 400
    pairs: int = 500
    depth: int = 1
    pin_t: int = 0
    seed: int | None = None
    eps: float = 0.03
    omega: int = 20
    tree_samples: int = 100_000
    max_children: int = 6
    tol: float = 1e-12
    out: str | None = None

    def validate(self) -> "ExperimentConfig":
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.seed is None:
            raise ConfigError("a seed is required")
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not 0 < self.eps < 0.25:
            raise ConfigError("eps must lie in (0, 0.25)")
        if self.omega < 1:
            raise ConfigError("omega must be at least 1")
        if self.d < 0:
            raise ConfigError("d must be nonnegative")
        if self.pin_t < 0:
            raise ConfigError("pin_t must be nonnegative")
        if self.samples_per_trial < 1 or self.pairs < 1 or self.tree_samples < 1:
            raise ConfigError("sample counts must be positive")
        if self.kind == "local" and not 0 <= self.depth <= 2:
            raise ConfigError("local census depth must be 0, 1 or 2")
        return self

    @classmethod
    def from_mapping(cls, data: dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial)]))


def _profile(d: float, tol: float) -> an.AnalyticProfile | None:
    return an.fixed_points(d, tol) if d > 0 else None


def peak_label(f: float, profile: an.AnalyticProfile | None, eps: float) -> str:
    """Nearest of the three fixed points to f, or ``none`` if none is within eps."""
    if profile is None:
        return "low" if f <= eps else "none"
    cands = [("low", profile.alpha_star), ("mid", profile.alpha_0), ("high", profile.alpha_upper)]
    name, a = min(cands, key=lambda c: abs(f - c[1]))
    return name if abs(f - a) <= eps else "none"


@dataclass
class MatrixStats:
    """Quantities shared by several experiments for one sampled matrix."""

    A: BitMatrix
    G: TannerGraph
    ms: Any
    dec: Any
    profile: Any
    frozen: np.ndarray  # bool mask over variables

    @property
    def n(self) -> int:
        return self.A.n_cols

    @property
    def f(self) -> float:
        return float(self.frozen.mean()) if self.n else 0.0


def analyse_matrix(A: BitMatrix) -> MatrixStats:
    G = TannerGraph.from_matrix(A)
    ms = wp_run(G)
    dec = classify(G, ms)
    prof = rank_profile(A)
    mask = np.zeros(A.n_cols, dtype=bool)
    mask[frozen_set(A, prof)] = True
    return MatrixStats(A, G, ms, dec, prof, mask)


def frozen_check_fraction(st: MatrixStats) -> float:
    """Share of checks all of whose neighbours are frozen."""
    G = st.G
    if G.n_checks == 0:
        return 0.0
    unfrozen_nb = np.bincount(G.edge_check, weights=~st.frozen[G.edge_var], minlength=G.n_checks)
    return float((unfrozen_nb == 0).mean())


def _base_record(i: int, st: MatrixStats, profile, eps: float) -> dict:
    n = st.n
    vu = np.zeros(n, dtype=bool)
    vu[list(st.dec.V_u)] = True
    return {
        "trial": i,
        "f": st.f,
        "f_hat": frozen_check_fraction(st),
        "nullity_per_n": st.profile.nullity / n,
        "n_s": st.dec.n_s,
        "m_s": st.dec.m_s,
        "peak": peak_label(st.f, profile, eps),
        "V_f_share": len(st.dec.V_f) / n,
        "V_u_share": len(st.dec.V_u) / n,
        "V_u_frozen_share": float((vu & st.frozen).sum()) / n,
        "wp_rounds": st.ms.rounds_run,
    }


def _peak_freqs(records: list[dict]) -> dict[str, float]:
    c = Counter(r["peak"] for r in records)
    return {k: c.get(k, 0) / len(records) for k in ("low", "mid", "high", "none")}


def _mean(records: list[dict], key: str) -> float:
    return float(np.mean([r[key] for r in records]))


# two-point concentration


def _two_point_trial(cfg: ExperimentConfig, i: int) -> dict:
    t0 = time.perf_counter()
    rng = trial_rng(cfg.seed, i)
    profile = _profile(cfg.d, cfg.tol)
    st = analyse_matrix(gen_bernoulli(cfg.n, cfg.d, rng))
    rec = _base_record(i, st, profile, cfg.eps)
    rec["elapsed"] = time.perf_counter() - t0
    return rec


def _two_point_aggregate(cfg: ExperimentConfig, records: list[dict]) -> dict:
    profile = _profile(cfg.d, cfg.tol)
    fs = np.array([r["f"] for r in records])
    hist, edges = np.histogram(fs, bins=50, range=(0.0, 1.0))
    agg = {
        "peak_frequencies": _peak_freqs(records),
        "mean_f": float(fs.mean()),
        "mean_nullity_per_n": _mean(records, "nullity_per_n"),
        "mean_V_f_share": _mean(records, "V_f_share"),
        "mean_V_u_share": _mean(records, "V_u_share"),
        "mean_V_u_frozen_share": _mean(records, "V_u_frozen_share"),
        "f_histogram": {"edges": edges.tolist(), "counts": hist.tolist()},
    }
    if profile is not None:
        agg["profile"] = profile.to_dict()
        agg["Phi_at_alpha_star"] = profile.phi_at["alpha_star"]
        agg["single_peak_share"] = float(np.mean(np.abs(fs - profile.alpha_star) <= cfg.eps)) if not profile.two_peaks else None
    else:
        agg["Phi_at_alpha_star"] = 1.0
    return agg


# slush


def _slush_degree_hist(st: MatrixStats) -> tuple[dict[int, int], dict[int, int]]:
    G = st.G
    vs = np.zeros(G.n_vars, dtype=bool)
    vs[list(st.dec.V_s)] = True
    cs = np.zeros(G.n_checks, dtype=bool)
    cs[list(st.dec.C_s)] = True
    inner = vs[G.edge_var] & cs[G.edge_check]
    vdeg = np.bincount(G.edge_var[inner], minlength=G.n_vars)[vs]
    cdeg = np.bincount(G.edge_check[inner], minlength=G.n_checks)[cs]
    return dict(Counter(vdeg.tolist())), dict(Counter(cdeg.tolist()))


def _rsu_census(st: MatrixStats) -> tuple[float, float, float]:
    G, ms = st.G, st.ms
    n = st.n
    cdeg, vdeg = G.check_degree, G.var_degree
    s_in = np.bincount(G.edge_check, weights=ms.var_to_check == S, minlength=G.n_checks)
    r = float(((cdeg == 2) & (s_in == 2)).sum()) / n
    s = float((vdeg == 0).sum()) / n
    T = (cdeg == 3) & (s_in == 3)
    in_T = np.bincount(G.edge_var, weights=T[G.edge_check], minlength=G.n_vars)
    u = float(((vdeg == 2) & (in_T == 2)).sum()) / n
    return r, s, u


def _tv_to_po_ge2(hist: dict[int, int], lam: float) -> float | None:
    total = sum(hist.values())
    if total == 0 or lam <= 0:
        return None
    top = max(max(hist), an.census_cutoff(lam) + 2)
    tv = 0.0
    for ell in range(0, top + 1):
        p = an.po_ge2(lam, ell) if ell >= 2 else 0.0
        tv += abs(hist.get(ell, 0) / total - p)
    return 0.5 * tv


def _slush_trial(cfg: ExperimentConfig, i: int) -> dict:
    t0 = time.perf_counter()
    rng = trial_rng(cfg.seed, i)
    profile = _profile(cfg.d, cfg.tol)
    st = analyse_matrix(gen_bernoulli(cfg.n, cfg.d, rng))
    rec = _base_record(i, st, profile, cfg.eps)
    vh, ch = _slush_degree_hist(st)
    rec["slush_var_degree_hist"] = {str(k): v for k, v in sorted(vh.items())}
    rec["slush_check_degree_hist"] = {str(k): v for k, v in sorted(ch.items())}
    rec["V_s_share"] = st.dec.n_s / cfg.n
    rec["C_s_share"] = st.dec.m_s / cfg.n
    rec["balance"] = st.dec.n_s - st.dec.m_s
    rec["r"], rec["s"], rec["u"] = _rsu_census(st)
    rec["elapsed"] = time.perf_counter() - t0
    return rec


def _slush_aggregate(cfg: ExperimentConfig, records: list[dict]) -> dict:
    profile = _profile(cfg.d, cfg.tol)
    pooled_v: Counter = Counter()
    pooled_c: Counter = Counter()
    for r in records:
        pooled_v.update({int(k): v for k, v in r["slush_var_degree_hist"].items()})
        pooled_c.update({int(k): v for k, v in r["slush_check_degree_hist"].items()})
    lam = profile.lam if profile else 0.0
    nu = profile.nu if profile else 0.0
    w = cfg.omega
    pos = [r for r in records if r["balance"] >= w]  # more columns than rows
    neg = [r for r in records if -r["balance"] >= w]  # more rows than columns
    agg = {
        "nu": nu,
        "nu_literal": profile.nu_literal if profile else 0.0,
        "lambda": lam,
        "mean_V_s_share": _mean(records, "V_s_share"),
        "mean_C_s_share": _mean(records, "C_s_share"),
        "pooled_var_degree_hist": {str(k): v for k, v in sorted(pooled_v.items())},
        "tv_var_degree": _tv_to_po_ge2(dict(pooled_v), lam),
        "tv_check_degree": _tv_to_po_ge2(dict(pooled_c), lam),
        "mean_V_f_share": _mean(records, "V_f_share"),
        "mean_V_u_share": _mean(records, "V_u_share"),
        "mean_V_u_frozen_share": _mean(records, "V_u_frozen_share"),
        "peak_frequencies": _peak_freqs(records),
        "balance_window": w,
        "sign_table": {
            "cols_exceed": dict(Counter(r["peak"] for r in pos)),
            "rows_exceed": dict(Counter(r["peak"] for r in neg)),
            "within_window": sum(1 for r in records if abs(r["balance"]) < w),
        },
        "share_cols_exceed": len(pos) / len(records),
        "share_rows_exceed": len(neg) / len(records),
        "low_given_cols_exceed": (sum(r["peak"] == "low" for r in pos) / len(pos)) if pos else None,
        "high_given_rows_exceed": (sum(r["peak"] == "high" for r in neg) / len(neg)) if neg else None,
        "mean_r": _mean(records, "r"),
        "mean_s": _mean(records, "s"),
        "mean_u": _mean(records, "u"),
    }
    if profile is not None:
        agg["r_bar"], agg["s_bar"], agg["u_bar"] = an.slush_constants(cfg.d, profile)
        agg["alpha_star"], agg["alpha_upper"] = profile.alpha_star, profile.alpha_upper
    return agg


# overlap


def kernel_samples(st: MatrixStats, count: int, rng: np.random.Generator) -> np.ndarray:
    """(count, n) 0/1 array of uniform kernel vectors."""
    coeffs = rng.integers(0, 2, size=(count, st.profile.nullity), dtype=np.uint8)
    words = combine_rows(st.profile.basis, coeffs)
    bits = np.unpackbits(np.ascontiguousarray(words, dtype="<u8").view(np.uint8), axis=1, bitorder="little")
    return bits[:, : st.n]


def _overlap_trial(cfg: ExperimentConfig, i: int) -> dict:
    t0 = time.perf_counter()
    rng = trial_rng(cfg.seed, i)
    profile = _profile(cfg.d, cfg.tol)
    st = analyse_matrix(gen_bernoulli(cfg.n, cfg.d, rng))
    rec = _base_record(i, st, profile, cfg.eps)
    k = cfg.samples_per_trial
    xs = kernel_samples(st, 2 * k, rng)
    agree = (xs[:k] == xs[k:]).mean(axis=1)
    rec["overlap_mean"] = float(agree.mean())
    rec["overlap_se"] = float(agree.std(ddof=1) / math.sqrt(k)) if k > 1 else float("nan")
    rec["overlap_target"] = (1.0 + st.f) / 2.0
    free = ~st.frozen
    deg = st.G.var_degree.astype(float)
    wsum = float(deg[free].sum())
    if wsum > 0:
        ones = xs[:, free].astype(float) @ deg[free]
        rec["balance_one_fraction"] = float((ones / wsum).mean())
        rec["balance_statistic"] = float(((ones - wsum / 2.0) / cfg.n).mean())
    else:
        rec["balance_one_fraction"] = None
        rec["balance_statistic"] = 0.0
    rec["elapsed"] = time.perf_counter() - t0
    return rec


def _overlap_aggregate(cfg: ExperimentConfig, records: list[dict]) -> dict:
    within = [abs(r["overlap_mean"] - r["overlap_target"]) <= 3 * r["overlap_se"] + 1e-12 for r in records]
    bal = [r["balance_one_fraction"] for r in records if r["balance_one_fraction"] is not None]
    return {
        "trials_within_3se": int(sum(within)),
        "mean_overlap": _mean(records, "overlap_mean"),
        "mean_target": _mean(records, "overlap_target"),
        "mean_balance_one_fraction": float(np.mean(bal)) if bal else None,
        "max_balance_deviation": float(max(abs(b - 0.5) for b in bal)) if bal else None,
        "mean_balance_statistic": _mean(records, "balance_statistic"),
    }


# local limit and censuses


def _neighbourhood_forms(st: MatrixStats, depth: int) -> list[tuple]:
    """Canonical message-decorated depth-t neighbourhood of every variable."""
    G, ms = st.G, st.ms
    sym = {S: "s", F: "f", U: "u"}
    if depth == 0:
        return [("", ())] * G.n_vars
    c2v = ms.check_to_var.tolist()
    v2c = ms.var_to_check.tolist()
    vptr = G.var_ptr.tolist()
    checks = G.edge_check.tolist()
    if depth == 1:
        return [("", tuple(sorted((sym[c2v[e]], ()) for e in range(vptr[v], vptr[v + 1])))) for v in range(G.n_vars)]
    # depth 2: the children of check a below v are the other variables of a
    order = G.check_order.tolist()
    cptr = G.check_ptr.tolist()
    evar = G.edge_var.tolist()
    forms = []
    for v in range(G.n_vars):
        kids = []
        for e in range(vptr[v], vptr[v + 1]):
            a = checks[e]
            grand = tuple(sorted((sym[v2c[order[k]]], ()) for k in range(cptr[a], cptr[a + 1]) if evar[order[k]] != v))
            kids.append((sym[c2v[e]], grand))
        forms.append(("", tuple(sorted(kids))))
    return forms


def tree_census(d: float, depth: int, profile: an.AnalyticProfile | None, samples: int,
                rng: np.random.Generator) -> Counter:
    c: Counter = Counter()
    messaged = depth > 0 and profile is not None and d > 0
    for _ in range(samples):
        if d == 0 or depth == 0:
            c[("", ())] += 1
            continue
        c[sample_tree("variable", depth, d, messaged=messaged, profile=profile, rng=rng).canonical()] += 1
    return c


def _census_cells(marks) -> Counter:
    return Counter(marks)


def _local_trial(cfg: ExperimentConfig, i: int) -> dict:
    t0 = time.perf_counter()
    rng = trial_rng(cfg.seed, i)
    profile = _profile(cfg.d, cfg.tol)
    st = analyse_matrix(gen_bernoulli(cfg.n, cfg.d, rng))
    rec = _base_record(i, st, profile, cfg.eps)
    n = cfg.n
    forms = _neighbourhood_forms(st, cfg.depth)
    xi = Counter(forms)
    rec["xi"] = {json.dumps(k): v / n for k, v in xi.items()}
    # generalized degree census
    if n <= ORACLE_MAX_N and st.G.n_edges <= 2000:
        sm = standard_messages(st.A)
        c2v, v2c = sm.check_to_var, sm.var_to_check
        rec["census_source"] = "oracle"
        rec["discrepancy_count"] = sm.discrepancy_count
    else:
        # WP fixed point with slush messages resolved by the peak the frozen share sits on
        high = profile is not None and abs(st.f - profile.alpha_upper) < abs(st.f - profile.alpha_star)
        fill = F if high else U
        c2v = np.where(st.ms.check_to_var == S, fill, st.ms.check_to_var)
        v2c = np.where(st.ms.var_to_check == S, fill, st.ms.var_to_check)
        rec["census_source"] = "wp_proxy"
    vm, cm = generalized_degrees(st.G, c2v, v2c)
    rec["Delta"] = {f"{z}|{','.join(map(str, L))}": k / n for (z, L), k in Counter(vm).items()}
    rec["Gamma"] = {f"{z}|{','.join(map(str, L))}": k / n for (z, L), k in Counter(cm).items()}
    rec["phi_gap"] = abs(st.f - an.phi(cfg.d, st.f)) if cfg.d > 0 else st.f
    rec["changes_per_round"] = list(st.ms.changes)
    rec["elapsed"] = time.perf_counter() - t0
    return rec


def _local_aggregate(cfg: ExperimentConfig, records: list[dict]) -> dict:
    profile = _profile(cfg.d, cfg.tol)
    rng = trial_rng(cfg.seed, -1 % (2 ** 32))
    zeta = tree_census(cfg.d, cfg.depth, profile, cfg.tree_samples, rng)
    zeta = {json.dumps(k): v / cfg.tree_samples for k, v in zeta.items()}
    xi_mean: Counter = Counter()
    for r in records:
        for k, v in r["xi"].items():
            xi_mean[k] += v / len(records)

    def small(key: str) -> bool:
        return len(json.loads(key)[1]) <= cfg.max_children

    keys = [k for k in set(zeta) | set(xi_mean) if small(k)]
    diffs = {k: abs(xi_mean.get(k, 0.0) - zeta.get(k, 0.0)) for k in keys}
    agg: dict[str, Any] = {
        "depth": cfg.depth,
        "tree_samples": cfg.tree_samples,
        "max_xi_zeta_gap": max(diffs.values()) if diffs else 0.0,
        "xi_mean": dict(xi_mean),
        "zeta": zeta,
        "max_phi_gap": max(r["phi_gap"] for r in records),
        "census_sources": sorted({r["census_source"] for r in records}),
    }
    if profile is not None and cfg.d > 0:
        agg.update(_census_comparison(cfg, records))
    return agg


def census_cells(total: int = 6):
    """(uu, uf, fu, ff) with entries summing to at most ``total``."""
    for uu in range(total + 1):
        for uf in range(total + 1 - uu):
            for fu in range(total + 1 - uu - uf):
                for ff in range(total + 1 - uu - uf - fu):
                    yield (uu, uf, fu, ff)


def _census_comparison(cfg: ExperimentConfig, records: list[dict]) -> dict:
    d = cfg.d
    worst_d, worst_g, worst_d_fhat = 0.0, 0.0, 0.0
    for r in records:
        f = r["f"]
        # share of f-messages into a variable: every other neighbour of the check is frozen
        a_hat = math.exp(-d * (1.0 - f))
        for L in census_cells():
            key = ",".join(map(str, L))
            for z in ("u", "*", "f"):
                emp_d = r["Delta"].get(f"{z}|{key}", 0.0)
                emp_g = r["Gamma"].get(f"{z}|{key}", 0.0)
                worst_d = max(worst_d, abs(emp_d - an.gen_deg_d(a_hat, z, L, d)))
                worst_d_fhat = max(worst_d_fhat, abs(emp_d - an.gen_deg_d(r["f_hat"], z, L, d)))
                worst_g = max(worst_g, abs(emp_g - an.gen_deg_g(f, z, L, d)))
    return {"max_Delta_gap": worst_d, "max_Gamma_gap": worst_g, "max_Delta_gap_using_f_hat": worst_d_fhat,
            "census_cell_total": 6}


# pairwise symmetry


def pair_discrepancy(xs: np.ndarray, pairs: np.ndarray) -> float:
    """Mean over coordinate pairs of sum_{s,t} |P(x_i=s, x_j=t) - P(x_i=s) P(x_j=t)|."""
    if xs.shape[1] == 0 or pairs.size == 0:
        return 0.0
    xi = xs[:, pairs[:, 0]].astype(float)
    xj = xs[:, pairs[:, 1]].astype(float)
    p1i, p1j = xi.mean(axis=0), xj.mean(axis=0)
    p11 = (xi * xj).mean(axis=0)
    cov = p11 - p1i * p1j
    # for binary pairs all four cells deviate by |cov|
    return float((4.0 * np.abs(cov)).mean())


def _symmetry_trial(cfg: ExperimentConfig, i: int) -> dict:
    t0 = time.perf_counter()
    rng = trial_rng(cfg.seed, i)
    profile = _profile(cfg.d, cfg.tol)
    A = gen_bernoulli(cfg.n, cfg.d, rng)
    st = analyse_matrix(A)
    rec = _base_record(i, st, profile, cfg.eps)
    n = cfg.n
    if n >= 2:
        first = rng.integers(0, n, size=cfg.pairs)
        second = (first + rng.integers(1, n, size=cfg.pairs)) % n
        pairs = np.stack([first, second], axis=1)
    else:
        pairs = np.zeros((0, 2), dtype=np.int64)
    xs = kernel_samples(st, cfg.samples_per_trial, rng)
    rec["pair_discrepancy"] = pair_discrepancy(xs, pairs)
    Ap = pin(A, cfg.pin_t, "replace", rng)
    rec["pinned"] = Ap is not A
    if cfg.pin_t and rec["pinned"]:
        stp = analyse_matrix(Ap)
        rec["pair_discrepancy_pinned"] = pair_discrepancy(kernel_samples(stp, cfg.samples_per_trial, rng), pairs)
        rec["f_pinned"] = stp.f
    else:
        rec["pair_discrepancy_pinned"] = rec["pair_discrepancy"]
        rec["f_pinned"] = st.f
    rec["elapsed"] = time.perf_counter() - t0
    return rec


def _symmetry_aggregate(cfg: ExperimentConfig, records: list[dict]) -> dict:
    return {
        "mean_pair_discrepancy": _mean(records, "pair_discrepancy"),
        "mean_pair_discrepancy_pinned": _mean(records, "pair_discrepancy_pinned"),
        "max_pair_discrepancy": max(r["pair_discrepancy"] for r in records),
        "pin_t": cfg.pin_t,
    }


# driver

_TRIALS: dict[str, tuple[Callable, Callable]] = {
    "two-point": (_two_point_trial, _two_point_aggregate),
    "slush": (_slush_trial, _slush_aggregate),
    "overlap": (_overlap_trial, _overlap_aggregate),
    "local": (_local_trial, _local_aggregate),
    "symmetry": (_symmetry_trial, _symmetry_aggregate),
}


def _run_one(args: tuple[str, ExperimentConfig, int]) -> dict:
    kind, cfg, i = args
    return _TRIALS[kind][0](cfg, i)


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return 1


def run_experiment(cfg: ExperimentConfig, workers: int | None = None,
                   log: Callable[[str], None] | None = None) -> dict:
    """Run all trials of ``cfg`` and fold them in trial order."""
    cfg.validate()
    workers = default_workers() if workers is None else max(1, workers)
    trial_fn, agg_fn = _TRIALS[cfg.kind]
    jobs = [(cfg.kind, cfg, i) for i in range(cfg.trials)]
    records: list[dict] = []
    if workers == 1:
        for job in jobs:
            records.append(_run_one(job))
            if log:
                log(_log_line(records[-1]))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rec in pool.map(_run_one, jobs):
                records.append(rec)
                if log:
                    log(_log_line(rec))
    records.sort(key=lambda r: r["trial"])
    return {"config": asdict(cfg), "per_trial": records, "aggregates": agg_fn(cfg, records)}


def _log_line(rec: dict) -> str:
    return f"trial {rec['trial']}: f={rec['f']:.4f} peak={rec['peak']} n_s={rec['n_s']} m_s={rec['m_s']}"


def exp_two_point(cfg: ExperimentConfig, **kw) -> dict:
    cfg.kind = "two-point"
    return run_experiment(cfg, **kw)


def exp_slush(cfg: ExperimentConfig, **kw) -> dict:
    cfg.kind = "slush"
    return run_experiment(cfg, **kw)


def exp_overlap(cfg: ExperimentConfig, **kw) -> dict:
    cfg.kind = "overlap"
    return run_experiment(cfg, **kw)


def exp_local(cfg: ExperimentConfig, **kw) -> dict:
    cfg.kind = "local"
    return run_experiment(cfg, **kw)


def exp_symmetry(cfg: ExperimentConfig, **kw) -> dict:
    cfg.kind = "symmetry"
    return run_experiment(cfg, **kw)


# CSV flattening: scalar per-trial fields in this fixed order, nested fields dropped
CSV_COLUMNS = [
    "trial", "f", "f_hat", "nullity_per_n", "n_s", "m_s", "peak", "V_f_share", "V_u_share",
    "V_u_frozen_share", "wp_rounds", "V_s_share", "C_s_share", "balance", "r", "s", "u",
    "overlap_mean", "overlap_se", "overlap_target", "balance_one_fraction", "balance_statistic",
    "phi_gap", "census_source", "pair_discrepancy", "pair_discrepancy_pinned", "f_pinned", "elapsed",
]


def report_to_csv(report: dict, include_elapsed: bool = True) -> str:
    rows = report["per_trial"]
    cols = [c for c in CSV_COLUMNS if any(c in r for r in rows)]
    if not include_elapsed:
        cols = [c for c in cols if c != "elapsed"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow(["" if r.get(c) is None else r.get(c) for c in cols])
    return buf.getvalue()
