"""Command-line entry point.

Exit codes: 0 on success, 2 on usage or config errors, 3 on runtime failure.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import sys
from dataclasses import fields
from typing import Any, Sequence

from . import analytics as an
from .experiments import KINDS, ConfigError, ExperimentConfig, report_to_csv, run_experiment
from .gf2 import format_matrix, rank_profile, read_matrix
from .graph import TannerGraph
from .wp import canonical_flipper, classify, contract_slush, slush_minor, wp_run

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


# experiment flags: (config field, type, help)
_EXPERIMENT_FLAGS = [
    ("n", int, "matrix dimension"),
    ("d", float, "average number of ones per row"),
    ("trials", int, "number of independent matrices"),
    ("samples_per_trial", int, "kernel samples (pairs for overlap) per trial"),
    ("pairs", int, "coordinate pairs for the symmetry experiment"),
    ("depth", int, "neighbourhood depth for the local census"),
    ("pin_t", int, "rows replaced by pins in the symmetry experiment"),
    ("eps", float, "peak window"),
    ("omega", int, "balance window"),
    ("tree_samples", int, "branching-process samples for the local census"),
    ("max_children", int, "largest tree compared in the local census"),
    ("tol", float, "fixed-point tolerance"),
]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="parityslush", description="Random sparse GF(2) systems: warning propagation, slush and limit laws.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    a = sub.add_parser("analytics", help="fixed points and identity residuals for one d")
    a.add_argument("--d", type=float, required=True)
    a.add_argument("--tol", type=float, default=1e-12)
    a.add_argument("--threshold", type=float, default=1e-9)
    a.add_argument("--out")

    w = sub.add_parser("wp", help="run warning propagation on a matrix file")
    w.add_argument("--input", required=True, help="matrix in sparse text format, '-' for stdin")
    w.add_argument("--dump", action="store_true", help="include the full classification")
    w.add_argument("--out")

    s = sub.add_parser("slush", help="extract and summarise the slush minor")
    s.add_argument("--input", required=True)
    s.add_argument("--minor", action="store_true", help="include the slush minor as sparse text")
    s.add_argument("--out")

    e = sub.add_parser("experiment", help="run a seeded Monte Carlo experiment")
    e.add_argument("kind", choices=KINDS)
    e.add_argument("--seed", type=int, required=True)
    e.add_argument("--config", help="JSON file mirroring the experiment config")
    for name, typ, hlp in _EXPERIMENT_FLAGS:
        e.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None, help=hlp)
    e.add_argument("--workers", type=int, default=None, help="process count (default from PARITYSLUSH_WORKERS, else 1)")
    e.add_argument("--out", help="report path (JSON); stdout if omitted")
    e.add_argument("--csv", help="also write the per-trial CSV here")
    e.add_argument("--no-timestamp", action="store_true", help="omit the generation time so reports compare byte for byte")
    e.add_argument("--quiet", action="store_true", help="no per-trial log on stderr")
    return p


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_matrix(path: str):
    try:
        return read_matrix(sys.stdin if path == "-" else path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    except ValueError as exc:
        raise UsageError(f"malformed matrix in {path}: {exc}") from None


def cmd_analytics(args) -> dict:
    if args.d < 0:
        raise UsageError("d must be nonnegative")
    out: dict[str, Any] = {"d": args.d}
    if args.d == 0:
        out["profile"] = None
        out["identities"] = None
        return out
    out["profile"] = an.fixed_points(args.d, args.tol).to_dict()
    out["identities"] = an.identity_suite(args.d, args.tol, args.threshold)
    return out


def cmd_wp(args) -> dict:
    A = _load_matrix(args.input)
    G = TannerGraph.from_matrix(A)
    ms = wp_run(G)
    dec = classify(G, ms)
    out: dict[str, Any] = {"n_vars": A.n_cols, "n_checks": A.n_rows}
    if args.dump:
        out.update(dec.to_json())
    else:
        out.update({k: len(getattr(dec, k)) for k in ("V_f", "V_u", "V_s", "V_other", "C_f", "C_u", "C_s", "C_other")})
        out.update(rounds=dec.rounds, n_s=dec.n_s, m_s=dec.m_s)
    return out


def cmd_slush(args) -> dict:
    A = _load_matrix(args.input)
    G = TannerGraph.from_matrix(A)
    dec = classify(G, wp_run(G))
    A_s = slush_minor(A, dec)
    prof = rank_profile(A_s)
    cm = contract_slush(TannerGraph.from_matrix(A_s))
    flipper = canonical_flipper(A_s, prof)
    vs = sorted(dec.V_s)
    out: dict[str, Any] = {
        "n_s": dec.n_s,
        "m_s": dec.m_s,
        "slush_vars": vs,
        "slush_checks": sorted(dec.C_s),
        "slush_nullity": prof.nullity,
        "cycle_rank": cm.cycle_rank,
        "contracted_shape": list(cm.contracted.shape),
        "canonical_flipper": [vs[i] for i in sorted(flipper)],
    }
    if args.minor:
        out["minor"] = format_matrix(A_s)
    return out


def experiment_config(args) -> ExperimentConfig:
    data: dict[str, Any] = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
    cfg = ExperimentConfig.from_mapping(data)
    for f in fields(cfg):
        val = getattr(args, f.name, None)
        if val is not None:
            setattr(cfg, f.name, val)
    cfg.kind = args.kind
    cfg.seed = args.seed
    if args.out:
        cfg.out = args.out
    return cfg.validate()


def cmd_experiment(args) -> dict:
    cfg = experiment_config(args)
    if args.workers is not None and args.workers < 1:
        raise UsageError("workers must be at least 1")
    log = None if args.quiet else (lambda line: print(line, file=sys.stderr))
    report = run_experiment(cfg, workers=args.workers, log=log)
    if args.no_timestamp:
        for rec in report["per_trial"]:
            rec.pop("elapsed", None)
    else:
        report["generated_at"] = dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(report_to_csv(report, include_elapsed=not args.no_timestamp))
    return report


_COMMANDS = {"analytics": cmd_analytics, "wp": cmd_wp, "slush": cmd_slush, "experiment": cmd_experiment}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        payload = _COMMANDS[args.command](args)
        _emit(payload, args.out)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
