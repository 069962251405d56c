"""Command-line interface: ``activestack run | stats | gen``.

Exit codes: 0 success, 1 usage error, 2 data or I/O error, 3 numerical
failure (a cell failed while ``--strict`` is on).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .alr import EmcmConfig
from .core import SUPERVISED, UNSUPERVISED, DataError, EvalRow, EvalTable, SubjectRecord, validate_subject
from .datagen import PRESETS, CohortSpec, generate_cohort
from .ensemble import FallbackPolicy
from .pipeline import MissingCellError, RunConfig, mean_rmse_over_K, sweep
from .regressors import RidgeConfig, SvrConfig
from .stats import dunn_fdr

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
TABLE_FIELDS = ("subject_id", "strategy", "K", "rmse", "seed", "error")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(x: float) -> str:
    """9 significant digits, the precision of every number this tool writes."""
    return "%.9g" % x


def _round9(x):
    if isinstance(x, float):
        return None if math.isnan(x) else float(fmt(x))
    if isinstance(x, dict):
        return {k: _round9(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round9(v) for v in x]
    return x


# ---------------------------------------------------------------- subject CSV


def read_subject_csv(path) -> SubjectRecord:
    """Parse one ``ref,est_1,...,est_M`` file; errors carry ``file:line``."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}:1: empty file, expected header ref,est_1,...,est_M")
    header = [h.strip() for h in rows[0]]
    m = len(header) - 1
    if m < 1 or header != ["ref"] + [f"est_{j}" for j in range(1, m + 1)]:
        raise DataError(f"{path}:1: bad header {','.join(header)!r}, expected ref,est_1,...,est_M")
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != m + 1:
            raise DataError(f"{path}:{lineno}: expected {m + 1} fields, got {len(row)}")
        try:
            values.append([float(v) for v in row])
        except ValueError:
            bad = next(v for v in row if not _is_float(v))
            raise DataError(f"{path}:{lineno}: not a number: {bad!r}") from None
    lines = [i for i, row in enumerate(rows[1:], start=2) if row]
    arr = np.array(values, dtype=float).reshape(len(values), m + 1)
    record = SubjectRecord(path.stem, arr[:, 1:], arr[:, 0])
    try:
        return validate_subject(record)
    except DataError as exc:
        where = f"{path}:{lines[exc.trial]}" if exc.trial is not None else f"{path}"
        raise type(exc)(f"{where}: {exc}", trial=exc.trial) from None


def _is_float(v: str) -> bool:
    try:
        float(v)
        return True
    except ValueError:
        return False


def write_subject_csv(record: SubjectRecord, path) -> None:
    m = record.n_estimators
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["ref"] + [f"est_{j}" for j in range(1, m + 1)]) + "\n")
        for ref, row in zip(record.references, record.predictions):
            fh.write(",".join(fmt(v) for v in (ref, *row)) + "\n")


def load_subjects(path) -> list[SubjectRecord]:
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("*.csv"))
        if not files:
            raise DataError(f"{path}: no .csv files")
    elif path.exists():
        files = [path]
    else:
        raise DataError(f"{path}: no such file or directory")
    return [read_subject_csv(f) for f in files]


# ---------------------------------------------------------------- table CSV


def write_table_csv(table: EvalTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_FIELDS)
        for r in table:
            w.writerow([r.subject_id, r.strategy, r.K, fmt(r.rmse), r.seed, r.error])


def read_table_csv(path) -> EvalTable:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TABLE_FIELDS:
            raise DataError(f"{path}:1: expected header {','.join(TABLE_FIELDS)}")
        table = EvalTable()
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(TABLE_FIELDS):
                raise DataError(f"{path}:{lineno}: expected {len(TABLE_FIELDS)} fields, got {len(row)}")
            try:
                table.append(EvalRow(row[0], row[1], int(row[2]), float(row[3]), int(row[4]), row[5]))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return table


# ---------------------------------------------------------------- argument helpers


def parse_k(text: str) -> list[int]:
    """``a..b`` (inclusive), a comma list, or a single integer."""
    try:
        if ".." in text:
            a, b = text.split("..")
            ks = list(range(int(a), int(b) + 1))
        else:
            ks = [int(t) for t in text.split(",")]
    except ValueError:
        raise UsageError(f"bad K range {text!r}; use a..b, a,b,c or a single integer") from None
    if not ks or min(ks) < 2:
        raise UsageError(f"K range {text!r} must be non-empty with every K >= 2")
    return ks


def parse_list(text: str, allowed, what: str) -> list[str]:
    items = [t.strip() for t in text.split(",") if t.strip()]
    for t in items:
        if t not in allowed:
            raise UsageError(f"unknown {what} {t!r}; choose from {', '.join(allowed)}")
    return items


def _seed(value) -> int:
    try:
        s = int(value)
    except (TypeError, ValueError):
        raise UsageError(f"seed must be an unsigned 64-bit integer, got {value!r}") from None
    if not 0 <= s < 2**64:
        raise UsageError(f"seed must be an unsigned 64-bit integer, got {value!r}")
    return s


# ---------------------------------------------------------------- run


RUN_DEFAULTS = {
    "data": None,
    "synthetic": None,
    "subjects": None,
    "strategies": ",".join(SUPERVISED),
    "baselines": ",".join(UNSUPERVISED),
    "k": "2..7",
    "seed": None,
    "fallback": "median",
    "match_tolerance": 1e-9,
    "rmse_scope": "pool",
    "rs_repeats": 100,
    "rs_fallback": True,
    "tube": 0.0,
    "svr_c": 1.0,
    "svr_tol": 1e-8,
    "svr_max_iter": 100000,
    "ridge_lambda": 0.01,
    "emcm_p": 4,
    "emcm_base": "ridge",
    "stats_k": "2..7",
    "alpha": 0.05,
    "strict": False,
}


def _resolve_run(args) -> dict:
    conf = dict(RUN_DEFAULTS)
    if args.config:
        try:
            echoed = json.loads(Path(args.config).read_text())["config"]
        except (OSError, ValueError, KeyError) as exc:
            raise UsageError(f"cannot read config from {args.config}: {exc}") from None
        unknown = set(echoed) - set(conf) - {"cohort"}
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        conf.update(echoed)
    for key in RUN_DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            conf[key] = v
    if args.data is not None:
        conf["synthetic"] = None
        conf.pop("cohort", None)
    elif args.synthetic is not None:
        conf["data"] = None
    if conf["seed"] is None:
        conf["seed"] = os.environ.get("ACTIVESTACK_SEED", 0)
    conf["seed"] = _seed(conf["seed"])
    if (conf["data"] is None) == (conf["synthetic"] is None):
        raise UsageError("give exactly one of --data or --synthetic")
    if conf["synthetic"] is not None:
        if conf["synthetic"] not in PRESETS:
            raise UsageError(f"unknown preset {conf['synthetic']!r}; choose from {', '.join(PRESETS)}")
        if conf["subjects"] is not None and conf["subjects"] < 1:
            raise UsageError("--subjects must be >= 1")
        spec = PRESETS[conf["synthetic"]]
        over = {"seed": conf["seed"]}
        if conf["subjects"] is not None:
            over["n_subjects"] = conf["subjects"]
        cohort = {**asdict(spec), **over}
        cohort = {k: tuple(v) if isinstance(v, list) else v for k, v in cohort.items()}
        conf["cohort"] = cohort
    elif conf["subjects"] is not None:
        raise UsageError("--subjects applies only to --synthetic")
    if conf["rmse_scope"] not in ("pool", "all"):
        raise UsageError("--rmse-scope must be pool or all")
    if conf["rs_repeats"] < 1:
        raise UsageError("--rs-repeats must be >= 1")
    if conf["emcm_p"] < 2:
        raise UsageError("--emcm-p must be >= 2")
    if not conf["tube"] >= 0:
        raise UsageError("--tube must be >= 0")
    if not 0 < conf["alpha"] < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    conf["_strategies"] = parse_list(conf["strategies"], SUPERVISED, "strategy")
    conf["_baselines"] = parse_list(conf["baselines"], UNSUPERVISED, "baseline")
    if not conf["_strategies"] and not conf["_baselines"]:
        raise UsageError("nothing to run: empty --strategies and --baselines")
    conf["_k"] = parse_k(conf["k"])
    conf["_stats_k"] = parse_k(conf["stats_k"])
    return conf


def _run_config(conf) -> RunConfig:
    try:
        return RunConfig(
            fallback=FallbackPolicy(conf["fallback"], conf["match_tolerance"]),
            seed=conf["seed"],
            rs_repeats=conf["rs_repeats"],
            rmse_scope="pool_only" if conf["rmse_scope"] == "pool" else "all_trials",
            svr=SvrConfig(c=conf["svr_c"], tube=conf["tube"], tol=conf["svr_tol"], max_iter=conf["svr_max_iter"]),
            ridge=RidgeConfig(conf["ridge_lambda"]),
            emcm=EmcmConfig(conf["emcm_p"], conf["emcm_base"]),
            rs_fallback=conf["rs_fallback"],
            strict=conf["strict"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def comparison(table: EvalTable, strategies, K_set, alpha):
    """Dunn/FDR matrix over per-subject mean RMSE, or ``(None, reason)``."""
    strategies = [s for s in strategies if s in SUPERVISED]
    if len(strategies) < 2:
        return None, "fewer than two supervised strategies"
    try:
        groups = [mean_rmse_over_K(table, s, K_set) for s in strategies]
    except MissingCellError as exc:
        return None, str(exc)
    if len(groups[0]) < 2:
        return None, "fewer than two subjects"
    return dunn_fdr(groups, alpha, strategies), ""


def cmd_run(args) -> int:
    conf = _resolve_run(args)
    cfg = _run_config(conf)
    if conf["data"] is not None:
        subjects = load_subjects(conf["data"])
    else:
        subjects = generate_cohort(CohortSpec(**conf["cohort"]))
    stats_k = [k for k in conf["_stats_k"] if k in conf["_k"]]
    res = sweep(subjects, conf["_strategies"], conf["_k"], cfg, conf["_baselines"], jobs=args.jobs)
    matrix, why = comparison(res.table, conf["_strategies"], stats_k, conf["alpha"]) if stats_k else (None, "stats K window outside K range")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_table_csv(res.table, out / "eval_table.csv")
    echo = {k: v for k, v in conf.items() if not k.startswith("_")}
    report = {
        "tool": {"name": "activestack", "version": __version__, "kernel_backend": kernels.BACKEND},
        "config": echo,
        "notes": {
            "rmse_scope": "remaining N-K trials" if conf["rmse_scope"] == "pool" else "all N trials",
            "rs_uses_median_fallback": bool(conf["rs_fallback"]),
            "baselines_scored_on": "all N trials",
        },
        "subjects": [s.subject_id for s in subjects],
        "rows": [
            {"subject_id": r.subject_id, "strategy": r.strategy, "K": r.K, "rmse": r.rmse, "seed": r.seed, "error": r.error}
            for r in res.table
        ],
        "summary": res.summary,
        "ratio_to_rs": res.ratio_to_rs,
        "comparison": {"K": stats_k, **matrix.to_dict()} if matrix is not None else {"skipped": why},
    }
    (out / "report.json").write_text(json.dumps(_round9(report), indent=1, sort_keys=True) + "\n")

    _print_summary(res.summary, res.ratio_to_rs)
    failed = [r for r in res.table if r.error]
    if failed:
        print(f"{len(failed)} cell(s) failed; see the error column of {out / 'eval_table.csv'}", file=sys.stderr)
        if conf["strict"]:
            return EXIT_NUMERIC
    return EXIT_OK


def _print_summary(summary, ratios) -> None:
    ratio = {(d["strategy"], d["K"]): d["ratio"] for d in ratios}
    print(f"{'strategy':<12}{'K':>3}{'mean':>10}{'std':>10}{'n':>5}{'/RS':>8}")
    for d in summary:
        r = ratio.get((d["strategy"], d["K"]))
        print(
            f"{d['strategy']:<12}{d['K']:>3}{d['mean']:>10.3f}{d['std']:>10.3f}{d['n']:>5}"
            + (f"{r:>8.3f}" if r is not None else "")
        )


# ---------------------------------------------------------------- stats


def cmd_stats(args) -> int:
    table = read_table_csv(args.table)
    strategies = (
        parse_list(args.strategies, SUPERVISED, "strategy")
        if args.strategies
        else [s for s in SUPERVISED if table.select(s)]
    )
    if len(strategies) < 2:
        raise UsageError("stats needs at least two strategies")
    if not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    K_set = parse_k(args.k)
    groups = [mean_rmse_over_K(table, s, K_set) for s in strategies]
    matrix = dunn_fdr(groups, args.alpha, strategies)
    doc = {"K": K_set, "subjects": table.subjects(), **matrix.to_dict()}
    text = json.dumps(_round9(doc), indent=1, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    width = max(len(s) for s in strategies) + 2
    print("corrected p-values (* = significant at alpha=%g)" % args.alpha)
    print(" " * width + "".join(f"{s:>{width}}" for s in strategies))
    for i, a in enumerate(strategies):
        cells = []
        for j in range(len(strategies)):
            cells.append(f"{'-':>{width}}" if i == j else f"{fmt(matrix.p[i, j])[:6] + ('*' if matrix.significant[i, j] else ''):>{width}}")
        print(f"{a:<{width}}" + "".join(cells))
    return EXIT_OK


# ---------------------------------------------------------------- gen


def cmd_gen(args) -> int:
    if args.subjects < 1:
        raise UsageError("--subjects must be >= 1")
    seed = _seed(args.seed if args.seed is not None else os.environ.get("ACTIVESTACK_SEED", 0))
    over = {"n_subjects": args.subjects, "seed": seed}
    if args.trials is not None:
        lo, _, hi = args.trials.partition("..")
        try:
            over["trials_per_subject"] = (int(lo), int(hi or lo))
        except ValueError:
            raise UsageError(f"bad --trials {args.trials!r}; use a..b") from None
    for flag, key in (
        ("estimators", "m_estimators"),
        ("breakdown_prob", "breakdown_prob"),
        ("exact_prob", "exact_estimator_prob"),
        ("noise_sd", "estimator_noise_sd"),
    ):
        if getattr(args, flag) is not None:
            over[key] = getattr(args, flag)
    try:
        spec = CohortSpec(**{**asdict(PRESETS[args.preset]), **over})
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for rec in generate_cohort(spec):
        write_subject_csv(rec, out / f"{rec.subject_id}.csv")
    print(f"wrote {spec.n_subjects} subject files to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="activestack", description="Active stacking of heart-rate estimators.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="evaluate strategies and baselines over a cohort")
    src = r.add_mutually_exclusive_group()
    src.add_argument("--data", help="subject CSV file or directory of them")
    src.add_argument("--synthetic", help="synthetic cohort preset (default)")
    r.add_argument("--subjects", type=int, help="cohort size override for --synthetic")
    r.add_argument("--strategies", help="comma list from " + ",".join(SUPERVISED))
    r.add_argument("--baselines", help="comma list from " + ",".join(UNSUPERVISED) + " (empty for none)")
    r.add_argument("--k", help="label budgets, a..b (default 2..7)")
    r.add_argument("--seed", help="unsigned 64-bit seed (default $ACTIVESTACK_SEED or 0)")
    r.add_argument("--fallback", choices=("median", "subset", "all"))
    r.add_argument("--match-tolerance", dest="match_tolerance", type=float)
    r.add_argument("--rmse-scope", dest="rmse_scope", choices=("pool", "all"))
    r.add_argument("--rs-repeats", dest="rs_repeats", type=int)
    r.add_argument("--rs-no-fallback", dest="rs_fallback", action="store_const", const=False,
                   help="RS always fits the SVR, ignoring consistent estimators")
    r.add_argument("--tube", type=float, help="SVR insensitive-tube half width, bpm (default 0)")
    r.add_argument("--emcm-p", dest="emcm_p", type=int, help="bootstrap committee size (default 4)")
    r.add_argument("--stats-k", dest="stats_k", help="K window averaged for the comparison (default 2..7)")
    r.add_argument("--alpha", type=float)
    r.add_argument("--strict", action="store_const", const=True, help="exit 3 if any cell fails")
    r.add_argument("--config", help="report.json whose config echo to reuse; explicit flags win")
    r.add_argument("--jobs", type=int, default=1, help="worker processes (output does not depend on it)")
    r.add_argument("--out", default="report", help="output directory (default ./report)")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("stats", help="Dunn/FDR comparison from an eval_table.csv")
    s.add_argument("table")
    s.add_argument("--strategies", help="comma list (default: every supervised strategy in the table)")
    s.add_argument("--k", default="2..7")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--out", help="write the matrix as JSON here")
    s.set_defaults(func=cmd_stats)

    g = sub.add_parser("gen", help="write a synthetic cohort as subject CSV files")
    g.add_argument("--subjects", type=int, default=100)
    g.add_argument("--seed")
    g.add_argument("--preset", choices=sorted(PRESETS), default="default")
    g.add_argument("--trials", help="trials per subject, a..b")
    g.add_argument("--estimators", type=int)
    g.add_argument("--breakdown-prob", dest="breakdown_prob", type=float)
    g.add_argument("--exact-prob", dest="exact_prob", type=float)
    g.add_argument("--noise-sd", dest="noise_sd", type=float)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"activestack: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, MissingCellError) as exc:
        print(f"activestack: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"activestack: I/O error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
