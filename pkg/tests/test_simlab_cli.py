import json
import subprocess
import sys

import numpy as np
import pytest
from scipy import stats

from manifold_pit.cli import main
from manifold_pit.errors import DomainError
from manifold_pit.simlab import (
    StudyConfig,
    check_summary,
    emit_histogram,
    histogram_counts,
    histogram_svg,
    parse_histogram_csv,
    run_study,
)


def test_histogram_uniform_values_within_binomial_bound():
    v = np.random.default_rng(0).random(1000)
    counts, edges = histogram_counts(v)
    assert counts.sum() == 1000 and len(counts) == 20
    np.testing.assert_allclose(edges, np.linspace(0, 1, 21))
    sd = np.sqrt(1000 * 0.05 * 0.95)
    assert np.max(np.abs(counts - 50)) <= 5 * sd


def test_histogram_constant_values_fill_one_bin():
    counts, _ = histogram_counts(np.full(300, 0.42))
    assert sorted(counts)[-1] == 300 and np.count_nonzero(counts) == 1
    with pytest.raises(DomainError):
        histogram_counts([])


def test_histogram_csv_re_renders_identical_svg():
    v = np.random.default_rng(1).beta(2, 5, 500)
    svg, table = emit_histogram(v, title="t")
    counts, edges = parse_histogram_csv(table)
    assert histogram_svg(counts, edges, title="t") == svg


def test_study_config_validation():
    with pytest.raises(DomainError):
        StudyConfig(study=4)
    with pytest.raises(DomainError):
        StudyConfig(study=1, reps=0)
    with pytest.raises(DomainError):
        StudyConfig(study=1, scenarios=("bogus",))


def test_study_result_invariants_and_determinism():
    cfg = StudyConfig(study=1, reps=60, seed=3)
    a, b = run_study(cfg), run_study(cfg)
    assert a.records == b.records
    for s, block in a.summary["scenarios"].items():
        assert sum(block["histogram"]) == block["reps"] == 60
        assert all(0 <= r <= 1 for r in block["rejection"].values())


def test_fitted_p_values_stochastically_larger_than_true():
    res = run_study(StudyConfig(study=1, reps=300, seed=4, scenarios=("true", "fitted")))
    p = stats.mannwhitneyu(res.p_values("fitted"), res.p_values("true"), alternative="greater").pvalue
    assert p < 1e-3


def test_check_summary_flags_violations():
    summary = {
        "config": {"study": 2, "n": 50, "B": 0},
        "scenarios": {"alternative": {"rejection": {"0.10": 0.2, "0.05": 0.1, "0.01": 0.01}}},
    }
    assert len(check_summary(summary)) == 2


def test_simulate_workers_byte_identical(tmp_path):
    outs = []
    for w in (1, 2):
        d = tmp_path / f"w{w}"
        assert main(["simulate", "--study", "3", "--reps", "60", "--seed", "5", "--workers", str(w), "--out", str(d)]) == 0
        outs.append({f.name: f.read_bytes() for f in sorted(d.iterdir())})
    assert outs[0] == outs[1]
    assert "study3_n50_records.csv" in outs[0] and "study3_n50_alternative_hist.svg" in outs[0]


def test_cli_sample_transform_gof_round(tmp_path, capsys):
    data = tmp_path / "x.csv"
    assert main(["sample", "--family", "fisher", "--param", "kappa=10", "--n", "200", "--seed", "1", "--out", str(data)]) == 0
    assert main(["gof", "--family", "fisher", "--param", "kappa=10", "--input", str(data), "--format", "json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["test"] == "rayleigh" and report["n"] == 200 and report["p_value"] > 1e-3
    assert main(["transform", "--family", "fisher", "--param", "kappa=10", "--input", str(data)]) == 0
    y = np.array([[float(v) for v in line.split(",")] for line in capsys.readouterr().out.splitlines()])
    np.testing.assert_allclose(np.linalg.norm(y, axis=1), 1.0)


def test_cli_fitted_bootstrap(tmp_path, capsys):
    data = tmp_path / "z.json"
    assert main(["sample", "--family", "md", "--n", "50", "--format", "json", "--out", str(data)]) == 0
    assert main(["gof", "--family", "md", "--fitted", "--B", "40", "--input", str(data), "--format", "json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["reference"] == "parametric bootstrap (B=40)"


def test_cli_errors_and_check_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("0.5,0.5,0.0\n0.2,0.3,0.5\n")
    assert main(["gof", "--family", "dirichlet", "--input", str(bad)]) == 1
    assert "error:" in capsys.readouterr().err
    # the study-2 target proportions are not met by a 40-replicate run
    assert main(["simulate", "--study", "2", "--reps", "40", "--check", "--scenarios", "alternative"]) == 2


def test_cli_entry_point_runs():
    out = subprocess.run([sys.executable, "-m", "manifold_pit.cli", "calibrate", "--test", "ks", "--n", "20"],
                         capture_output=True, text=True, check=True).stdout
    assert json.loads(out)["reps"] == 10_000
