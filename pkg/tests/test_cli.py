import json
import subprocess
import sys

import numpy as np
import pytest

from activestack.cli import (
    load_subjects,
    main,
    parse_k,
    read_subject_csv,
    read_table_csv,
    write_subject_csv,
)
from activestack.core import SubjectRecord
from activestack.datagen import CohortSpec, generate_cohort
from activestack.pipeline import mean_rmse_over_K
from activestack.stats import dunn_fdr

SMALL = ["--synthetic", "default", "--subjects", "3", "--rs-repeats", "3", "--k", "2..4", "--stats-k", "2..4"]


def run(tmp_path, name, *argv):
    out = tmp_path / name
    code = main(["run", *SMALL, *argv, "--out", str(out)])
    return code, out


def test_gen_writes_reingestable_files(tmp_path):
    assert main(["gen", "--subjects", "10", "--seed", "1", "--out", str(tmp_path / "a")]) == 0
    files = sorted((tmp_path / "a").glob("*.csv"))
    assert len(files) == 10
    recs = load_subjects(tmp_path / "a")
    cohort = generate_cohort(CohortSpec(n_subjects=10, seed=1))
    for r, c in zip(recs, cohort):
        assert r.subject_id == c.subject_id
        assert np.allclose(r.predictions, c.predictions, rtol=1e-8) and np.allclose(r.references, c.references, rtol=1e-8)
    assert main(["gen", "--subjects", "10", "--seed", "1", "--out", str(tmp_path / "b")]) == 0
    for f in files:
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_gen_rejects_zero_subjects(tmp_path, capsys):
    assert main(["gen", "--subjects", "0", "--out", str(tmp_path)]) == 1
    assert "--subjects" in capsys.readouterr().err


def test_csv_round_trip_at_nine_digits(tmp_path):
    rng = np.random.default_rng(0)
    X = np.vstack([np.round(rng.uniform(0, 1400, (6, 4)), 3), [0, 1000.5, 72.123456, 1e-3]])
    y = np.round(rng.uniform(40, 200, 7), 6)
    rec = SubjectRecord("subj", X, y)
    write_subject_csv(rec, tmp_path / "subj.csv")
    back = read_subject_csv(tmp_path / "subj.csv")
    assert back == rec
    write_subject_csv(back, tmp_path / "again.csv")
    assert (tmp_path / "subj.csv").read_text() == (tmp_path / "again.csv").read_text()


@pytest.mark.parametrize(
    "body, line, text",
    [
        ("ref,est_1,est_2\n70,70,71\n80,81\n", 3, "expected 3 fields"),
        ("ref,est_1,est_2\n70,70,71\n80,abc,81\n", 3, "not a number"),
        ("ref,est_1,est_2\n70,70,71\n75,70,71\n80,-1,81\n", 4, "negative"),
        ("ref,est_1,est_2\n70,70,71\n0,70,71\n", 3, "reference"),
        ("ref,est_1,est_2\n70,nan,71\n", 2, "finite"),
        ("ref,a,b\n70,70,71\n", 1, "header"),
    ],
)
def test_malformed_csv_diagnostics(tmp_path, capsys, body, line, text):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    code = main(["run", "--data", str(p), "--out", str(tmp_path / "o")])
    err = capsys.readouterr().err
    assert code == 2
    assert f"bad.csv:{line}" in err and text in err.lower()


def test_run_row_count_and_report(tmp_path):
    code, out = run(tmp_path, "r", "--strategies", "as_gsx,rs", "--seed", "42")
    assert code == 0
    rows = (out / "eval_table.csv").read_text().splitlines()
    assert len(rows) - 1 == 3 * 2 * 3 + 3 * 3
    rep = json.loads((out / "report.json").read_text())
    assert rep["config"]["seed"] == 42 and rep["config"]["cohort"]["n_subjects"] == 3
    assert len(rep["rows"]) == len(rows) - 1
    assert rep["comparison"]["names"] == ["as_gsx", "rs"]


def test_data_directory_row_count(tmp_path):
    main(["gen", "--subjects", "4", "--seed", "2", "--trials", "20..30", "--out", str(tmp_path / "d")])
    code = main(["run", "--data", str(tmp_path / "d"), "--strategies", "as_gsx,rs", "--k", "2..7",
                 "--seed", "42", "--rs-repeats", "2", "--out", str(tmp_path / "o")])
    assert code == 0
    table = read_table_csv(tmp_path / "o" / "eval_table.csv")
    assert len(table) == 4 * 2 * 6 + 4 * 3


def test_run_is_deterministic_across_jobs(tmp_path):
    _, a = run(tmp_path, "a", "--seed", "5")
    _, b = run(tmp_path, "b", "--seed", "5")
    _, c = run(tmp_path, "c", "--seed", "5", "--jobs", "8")
    for name in ("eval_table.csv", "report.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes() == (c / name).read_bytes()


def test_config_echo_is_fixed_point(tmp_path):
    _, a = run(tmp_path, "a", "--seed", "9", "--fallback", "subset", "--tube", "0.5", "--strategies", "as_igs,rs")
    assert main(["run", "--config", str(a / "report.json"), "--out", str(tmp_path / "b")]) == 0
    assert (a / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_seed_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("ACTIVESTACK_SEED", "13")
    _, a = run(tmp_path, "a", "--strategies", "as_rd")
    monkeypatch.delenv("ACTIVESTACK_SEED")
    _, b = run(tmp_path, "b", "--strategies", "as_rd", "--seed", "13")
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert json.loads((a / "report.json").read_text())["config"]["seed"] == 13


def test_synthetic_default_seed_7(tmp_path):
    code = main(["run", "--synthetic", "default", "--seed", "7", "--subjects", "2", "--rs-repeats", "2",
                 "--k", "2..3", "--out", str(tmp_path / "o")])
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert code == 0 and rep["config"]["cohort"]["seed"] == 7
    assert rep["subjects"] == [r.subject_id for r in generate_cohort(CohortSpec(n_subjects=2, seed=7))]


def test_usage_errors(tmp_path):
    assert main(["run", "--out", str(tmp_path)]) == 1
    assert main(["run", *SMALL, "--k", "1..3", "--out", str(tmp_path)]) == 1
    assert main(["run", *SMALL, "--strategies", "bogus", "--out", str(tmp_path)]) == 1
    assert main(["run", *SMALL, "--seed", "-3", "--out", str(tmp_path)]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["run", "--rmse-scope", "sometimes"])
    assert exc.value.code == 1
    assert parse_k("2..4") == [2, 3, 4] and parse_k("3,5") == [3, 5] and parse_k("6") == [6]


def test_strict_numerical_failure_exit_code(tmp_path, monkeypatch):
    import warnings

    import activestack.ensemble as ensemble
    from activestack.regressors import ConvergenceWarning

    real = ensemble.fit_svr

    def flaky(*args, **kw):
        warnings.warn("injected non-convergence", ConvergenceWarning)
        return real(*args, **kw)

    monkeypatch.setattr(ensemble, "fit_svr", flaky)
    with pytest.warns(ConvergenceWarning):
        code, _ = run(tmp_path, "a", "--strategies", "as_gsx", "--baselines", "")
    assert code == 0
    code, out = run(tmp_path, "b", "--strategies", "as_gsx", "--baselines", "", "--strict")
    assert code == 3
    table = read_table_csv(out / "eval_table.csv")
    failed = [r for r in table if r.error]
    assert len(table) == 9 and failed and all("NumericalFailure" in r.error for r in failed)


def write_table(path, rows):
    path.write_text(
        "subject_id,strategy,K,rmse,seed,error\n" + "".join(f"{s},{st},{k},{v},0,\n" for s, st, k, v in rows)
    )


def test_stats_toy_table_matches_direct(tmp_path, capsys):
    vals = {"as_gsx": [1.0, 2.0, 3.5], "as_rd": [2.0, 2.5, 4.0], "rs": [9.0, 8.0, 12.0]}
    rows = [(f"s{i}", st, k, v[i] + k) for st, v in vals.items() for i in range(3) for k in (2, 3)]
    write_table(tmp_path / "t.csv", rows)
    out = tmp_path / "m.json"
    assert main(["stats", str(tmp_path / "t.csv"), "--strategies", "as_gsx,as_rd,rs", "--k", "2..3", "--out", str(out)]) == 0
    got = json.loads(out.read_text())
    direct = dunn_fdr([np.array(v) + 2.5 for v in vals.values()], names=list(vals))
    assert np.allclose(np.array(got["p"], dtype=float), direct.p, equal_nan=True, rtol=1e-8)


def test_stats_identical_columns_maximal(tmp_path):
    rng = np.random.default_rng(1)
    base = rng.uniform(0, 5, 6)
    rows = []
    for i in range(6):
        for k in range(2, 8):
            rows += [(f"s{i}", "as_gsx", k, base[i]), (f"s{i}", "as_igs", k, base[i]), (f"s{i}", "rs", k, 10 + base[i])]
    write_table(tmp_path / "t.csv", rows)
    out = tmp_path / "m.json"
    assert main(["stats", str(tmp_path / "t.csv"), "--out", str(out)]) == 0
    p = np.array(json.loads(out.read_text())["p"], dtype=float)
    names = json.loads(out.read_text())["names"]
    i, j = names.index("as_gsx"), names.index("as_igs")
    assert p[i, j] == np.nanmax(p) == 1.0


def test_stats_missing_cell(tmp_path, capsys):
    rows = [(f"s{i}", st, k, 1.0) for i in range(3) for st in ("as_gsx", "rs") for k in range(2, 8)]
    rows = [r for r in rows if not (r[0] == "s1" and r[1] == "rs" and r[2] == 5)]
    write_table(tmp_path / "t.csv", rows)
    assert main(["stats", str(tmp_path / "t.csv")]) == 2
    err = capsys.readouterr().err
    assert "subject=s1" in err and "strategy=rs" in err and "K=5" in err
    table = read_table_csv(tmp_path / "t.csv")
    with pytest.raises(KeyError):
        mean_rmse_over_K(table, "rs", range(2, 8))


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "activestack.cli", "gen", "--subjects", "1", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0 and (tmp_path / "s000.csv").exists()
