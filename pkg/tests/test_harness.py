import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dqdrl.archive import GridArchive, GridSpec
from dqdrl.core import ConfigurationError, EmptyArchiveError, UnsupportedOperationError
from dqdrl.envs import make_env
from dqdrl.harness import (MetricsRow, build_config, emit_heatmap, emit_histogram,
                           heatmap_csv_text, histogram_counts, load_config_text,
                           mean_elite_robustness, metrics_csv_text, parse_config_text,
                           qd_score_auc, read_metrics_csv, rescore, run_experiment, run_trials)
from dqdrl.harness.plots import heatmap_svg_text

ROOT = Path(__file__).resolve().parents[1]
MAP_ELITES_50K_COVERAGE = 0.0087890625  # reference run, seed 0


def _rows(scores, cost=100):
    return [MetricsRow(i + 1, (i + 1) * cost, s, 0.0, 0.0, 0.0) for i, s in enumerate(scores)]


# -- config ----------------------------------------------------------------------

def test_config_lists_every_problem():
    text = "\n".join([
        "experiment.env = lp_sphere",
        "experiment.bogus = 1",
        "cma_mega.batch_size = ten",
        "no equals sign here",
        "experiment.env = gait_point",
    ])
    with pytest.raises(ConfigurationError) as info:
        parse_config_text(text)
    problems = info.value.problems
    assert len(problems) == 4
    assert any("unknown key" in p for p in problems)
    assert any("duplicate" in p for p in problems)


def test_semantic_problems_reported_together():
    with pytest.raises(ConfigurationError) as info:
        load_config_text("experiment.budget = 20050\nexperiment.min_objective = 5\n"
                         "experiment.max_objective = 1\nexperiment.mode = fast\n"
                         "env.hidden = 8\n")
    text = " | ".join(info.value.problems)
    for needle in ("min_objective", "mode", "env.hidden", "budget"):
        assert needle in text


def test_to_text_round_trips_and_hash_ignores_seed():
    cfg = load_config_text("experiment.algorithm = me_es\nexperiment.budget = 10000\n"
                           "me_es.batch_size = 20\n")
    again = load_config_text(cfg.to_text())
    assert again == cfg
    assert cfg.with_seed(99).config_hash() == cfg.config_hash()
    other = load_config_text("experiment.algorithm = me_es\nexperiment.budget = 10000\n")
    assert other.config_hash() != cfg.config_hash()


def test_shipped_configs_load():
    for path in sorted((ROOT / "configs").glob("*.cfg")):
        load_config_text(path.read_text())


# -- runner ---------------------------------------------------------------------------

def test_budget_20000_gives_100_rows(tmp_path):
    cfg = load_config_text("experiment.budget = 20000\n")
    result = run_experiment(cfg, tmp_path)
    assert len(result.history) == 100 == result.plan.iterations
    rows = read_metrics_csv(tmp_path / "metrics.csv")
    assert len(rows) == 100 and rows[-1].evaluations == 20000
    assert all(b.evaluations > a.evaluations for a, b in zip(rows, rows[1:]))


def test_outputs_consistent(tmp_path):
    cfg = load_config_text("experiment.algorithm = map_elites\nexperiment.budget = 3000\n")
    run_experiment(cfg, tmp_path)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert sorted(summary) == sorted(["qd_score", "coverage", "best_performance",
                                      "qd_score_auc", "evaluations", "seed", "config_hash"])
    rows = read_metrics_csv(tmp_path / "metrics.csv")
    archive = GridArchive.from_csv(tmp_path / "archive.csv", GridSpec.uniform(2, 32))
    floor = cfg.resolved_min_objective()
    assert rows[-1].qd_score == archive.qd_score(floor) == summary["qd_score"]
    assert summary["qd_score_auc"] == qd_score_auc(rows)
    assert math.isclose(summary["qd_score_auc"],
                        math.fsum(100 * r.qd_score for r in rows), rel_tol=1e-12)


def test_deterministic_runs_byte_identical(tmp_path):
    text = "experiment.algorithm = pga_me\nexperiment.budget = 2000\npga_me.batch_size = 50\n"
    for d in ("a", "b"):
        run_experiment(load_config_text(text), tmp_path / d)
    for name in ("metrics.csv", "archive.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_parallel_map_elites_matches_deterministic():
    base = ("experiment.env = gait_point\nexperiment.algorithm = map_elites\n"
            "experiment.budget = 200\nmap_elites.batch_size = 50\nenv.hidden = 8\n")
    seq = run_experiment(load_config_text(base))
    par = run_experiment(load_config_text(base + "experiment.mode = parallel\n"
                                          "experiment.threads = 4\n"))
    assert seq.archive.to_csv_text() == par.archive.to_csv_text()


def test_map_elites_reference_coverage():
    cfg = load_config_text("experiment.algorithm = map_elites\nexperiment.budget = 50000\n")
    assert run_experiment(cfg).summary["coverage"] == MAP_ELITES_50K_COVERAGE


def test_me_es_strict_run_spends_plan():
    cfg = load_config_text("experiment.algorithm = me_es\nexperiment.budget = 1000\n"
                           "me_es.batch_size = 20\n")
    result = run_experiment(cfg)
    assert result.summary["evaluations"] == 47 * 21 == result.plan.evaluations


def test_trials_get_own_directories(tmp_path):
    cfg = load_config_text("experiment.algorithm = map_elites\nexperiment.budget = 200\n"
                           "experiment.trials = 2\n")
    results = run_trials(cfg, tmp_path)
    assert [r.summary["seed"] for r in results] == [0, 1]
    assert (tmp_path / "trial_1" / "archive.csv").exists()


# -- metrics -------------------------------------------------------------------------

def test_auc_examples():
    assert qd_score_auc(_rows([5.0] * 7), 200) == 7 * 200 * 5.0
    assert qd_score_auc(_rows([7.0], 200), 200) == 1400
    assert qd_score_auc(_rows([7.0], 200)) == 1400


def test_auc_uses_uneven_first_iteration():
    rows = [MetricsRow(1, 100, 2.0, 0, 0, 0), MetricsRow(2, 300, 3.0, 0, 0, 0)]
    assert qd_score_auc(rows) == 100 * 2.0 + 200 * 3.0


@given(st.lists(st.floats(0, 1e9), min_size=1, max_size=100), st.integers(1, 500))
def test_auc_matches_independent_sum(scores, cost):
    brute = math.fsum(cost * s for s in scores)
    assert abs(qd_score_auc(_rows(scores, cost), cost) - brute) <= 1e-9 * max(1.0, abs(brute))


def test_metrics_csv_round_trip(tmp_path):
    rows = [MetricsRow(1, 200, 1 / 3, 0.25, -1e-300, 0.0)]
    p = tmp_path / "m.csv"
    p.write_text(metrics_csv_text(rows))
    assert read_metrics_csv(p) == rows
    assert p.read_text().splitlines()[0] == \
        "iteration,evaluations,qd_score,coverage,best_performance,wall_time_s"


def _gait_archive(env, n, rng, spec=None):
    archive = GridArchive(spec or GridSpec.uniform(2, 32), env.solution_dim)
    X = np.array([env.random_solution(rng) for _ in range(n)])
    res = env.evaluate_batch(X, rng=rng)
    archive.add_batch(X, res.objectives, res.measures)
    return archive


def test_robustness_zero_on_deterministic_env(rng):
    env = make_env("gait_point", hidden=(8, 8))
    archive = _gait_archive(env, 40, rng)
    assert mean_elite_robustness(archive, env, 10) == 0.0
    with pytest.raises(EmptyArchiveError):
        mean_elite_robustness(GridArchive(GridSpec.uniform(2, 4), 3), env)


def test_robustness_nonpositive_when_archive_keeps_lucky_draws():
    env = make_env("gait_point", hidden=(8,), obs_noise=0.5)
    one_cell = GridSpec.uniform(2, 1)
    values = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        phi = env.random_solution(rng)
        archive = GridArchive(one_cell, env.solution_dim)
        res = env.evaluate_batch(np.stack([phi] * 5), rng=rng)
        archive.add_batch(np.stack([phi] * 5), res.objectives, res.measures)
        values.append(mean_elite_robustness(archive, env, 10, rng))
    assert np.mean(values) <= 0.0


def test_rescore_matches_archive():
    archive = GridArchive(GridSpec.uniform(2, 4), 1)
    archive.add([0.0], 3.0, [0.1, 0.1])
    archive.add([0.0], -1.0, [0.9, 0.9])
    out = rescore(archive, -2.0)
    assert out["qd_score"] == 6.0 and out["coverage"] == 2 / 16 and out["best_performance"] == 3.0


def test_rescore_script_agrees(tmp_path, rng):
    env = make_env("gait_point")
    archive = _gait_archive(env, 30, rng)
    (tmp_path / "archive.csv").write_text(archive.to_csv_text())
    out = subprocess.run([sys.executable, str(ROOT / "scripts" / "rescore_archive.py"),
                          str(tmp_path / "archive.csv"), "--min-objective", "-20",
                          "--robustness", "gait_point", "--episodes", "2"],
                         capture_output=True, text=True, check=True)
    got = json.loads(out.stdout)
    assert math.isclose(got["qd_score"], archive.qd_score(-20.0), rel_tol=1e-12)
    assert got["coverage"] == archive.coverage()
    assert got["best_performance"] == archive.best_performance()
    assert got["mean_elite_robustness"] == mean_elite_robustness(archive, env, 2) == 0.0


# -- plots ------------------------------------------------------------------------------

def test_heatmap_two_by_two():
    archive = GridArchive(GridSpec.uniform(2, 2), 1)
    for (i, j), f in zip([(0, 0), (0, 1), (1, 0), (1, 1)], [1, 2, 3, 4]):
        archive.add([0.0], f, [0.25 + 0.5 * i, 0.25 + 0.5 * j])
    assert heatmap_csv_text(archive).splitlines() == ["1,2", "3,4"]


def test_heatmap_empty_archive():
    text = heatmap_csv_text(GridArchive(GridSpec.uniform(2, 3), 1))
    assert text.splitlines() == [",,"] * 3


def test_heatmap_svg_has_one_rect_per_cell(tmp_path, rng):
    env = make_env("lp_sphere")
    archive = GridArchive(GridSpec.uniform(2, 32), 20)
    X = rng.uniform(-5, 5, (500, 20))
    res = env.evaluate_batch(X)
    archive.add_batch(X, res.objectives, res.measures)
    csv_path, svg_path = emit_heatmap(archive, tmp_path / "heat", -1000.0, 0.0)
    assert svg_path.read_text().count("<rect ") == 1024
    assert len(csv_path.read_text().splitlines()) == 32


def test_heatmap_rejects_non_2d():
    archive = GridArchive(GridSpec.uniform(3, 4), 1)
    with pytest.raises(UnsupportedOperationError):
        heatmap_csv_text(archive)
    with pytest.raises(UnsupportedOperationError):
        heatmap_svg_text(archive, 0.0, 1.0)


def test_histogram_single_elite(tmp_path):
    archive = GridArchive(GridSpec.uniform(2, 4), 1)
    archive.add([0.0], 12.0, [0.5, 0.5])
    out = emit_histogram(archive, tmp_path / "h.csv", bins=10, min_objective=0.0,
                         max_objective=100.0)
    lines = out.read_text().splitlines()
    assert lines[0] == "bin_lower,count" and len(lines) == 11
    assert sum(1 for line in lines[1:] if not line.endswith(",0")) == 1
    assert lines[1] == "0,1"


def test_histogram_matches_brute_force(rng):
    values = rng.uniform(-50, 450, 5000)
    edges, counts = histogram_counts(values, 25, -50.0, 50.0)
    width = (50.0 + 400.0 - -50.0) / 25
    brute = [0] * 25
    for v in values:
        b = int((v - -50.0) // width)
        if 0 <= b < 25:
            brute[b] += 1
        elif v == 450.0:
            brute[-1] += 1
    assert counts.tolist() == brute
    assert edges[0] == -50.0
