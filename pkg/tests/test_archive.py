import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dqdrl.archive import (GridArchive, GridSpec, InsertStatus, cell_index, cell_indices,
                           infer_grid_from_header)
from dqdrl.core import EmptyArchiveError, InvalidInputError, MetricConfigurationError


@pytest.fixture
def spec():
    return GridSpec.uniform(2, 32)


def test_cell_index_examples(spec):
    assert cell_index(spec, [0.0, 0.0]) == (0, 0)
    assert cell_index(spec, [1.0, 1.0]) == (31, 31)
    assert cell_index(spec, [0.5, 0.25]) == (16, 8)


def test_cell_index_clamps_out_of_range(spec):
    assert cell_index(spec, [-3.0, 7.0]) == (0, 31)


def test_cell_index_rejects_bad_input(spec):
    with pytest.raises(InvalidInputError):
        cell_index(spec, [0.1])
    with pytest.raises(InvalidInputError):
        cell_index(spec, [np.nan, 0.1])


def test_cell_indices_matches_scalar(spec, rng):
    M = rng.uniform(-0.2, 1.2, size=(200, 2))
    vec = cell_indices(spec, M)
    assert [tuple(r) for r in vec] == [cell_index(spec, m) for m in M]


def test_grid_spec_validation():
    with pytest.raises(InvalidInputError):
        GridSpec((2, 2), (0, 0), (1, 0))
    with pytest.raises(InvalidInputError):
        GridSpec((0,), (0,), (1,))
    with pytest.raises(InvalidInputError):
        GridSpec((2, 2), (0,), (1, 1))


def test_insert_statuses(spec):
    a = GridArchive(spec, 2)
    out = a.add([0, 0], 3.0, [0.1, 0.1])
    assert out.status == InsertStatus.NEW_CELL and out.improvement == 3.0
    a2 = GridArchive(spec, 2)
    a2.add([0, 0], 5.0, [0.1, 0.1])
    up = a2.add([1, 1], 7.0, [0.1, 0.1])
    assert up.status == InsertStatus.IMPROVED_CELL and up.improvement == 2.0
    down = a2.add([2, 2], 4.0, [0.1, 0.1])
    assert down.status == InsertStatus.NOT_ADDED and down.improvement == -3.0
    assert a2.cell(a2.flat_index([0.1, 0.1])).objective == 7.0


def test_tie_is_rejected_and_archive_unchanged(spec):
    a = GridArchive(spec, 2)
    a.add([1, 2], 5.0, [0.3, 0.3])
    before = a.to_csv_text()
    out = a.add([9, 9], 5.0, [0.3, 0.3])
    assert out.status == InsertStatus.NOT_ADDED and out.improvement == 0.0
    assert a.to_csv_text() == before


def test_add_rejects_nonfinite_objective(spec):
    with pytest.raises(InvalidInputError):
        GridArchive(spec, 1).add([0.0], np.nan, [0.5, 0.5])


def test_qd_score_examples(spec):
    a = GridArchive(spec, 1)
    assert a.qd_score(0.0) == 0.0
    a.add([0.0], 10.0, [0.5, 0.5])
    assert a.qd_score(-2.0) == 12.0
    with pytest.raises(MetricConfigurationError):
        a.qd_score(11.0)


def test_qd_score_matches_brute_force(spec, rng):
    a = GridArchive(spec, 1)
    for _ in range(50):
        a.add([0.0], rng.uniform(-5, 5), rng.random(2))
    brute = 0.0
    for cell in a.elites():
        brute += cell.objective - (-10.0)
    assert abs(a.qd_score(-10.0) - brute) < 1e-9


def test_coverage_examples():
    spec = GridSpec.uniform(2, 32)
    a = GridArchive(spec, 1)
    assert a.coverage() == 0.0
    for i in range(16):
        a.add([0.0], 1.0, [(i + 0.5) / 32, 0.0])
    assert a.coverage() == 0.015625
    small = GridArchive(GridSpec.uniform(2, 2), 1)
    for x in (0.25, 0.75):
        for y in (0.25, 0.75):
            small.add([0.0], 1.0, [x, y])
    assert small.coverage() == 1.0


def test_best_performance_examples(spec, rng):
    a = GridArchive(spec, 1)
    with pytest.raises(EmptyArchiveError):
        a.best_performance()
    for f, m in zip((3, 7, 5), (0.1, 0.5, 0.9)):
        a.add([0.0], f, [m, m])
    assert a.best_performance() == 7
    one = GridArchive(spec, 1)
    one.add([0.0], -4.0, [0.2, 0.2])
    assert one.best_performance() == -4.0
    big = GridArchive(spec, 1)
    values = []
    for _ in range(1000):
        f = rng.normal()
        big.add([0.0], f, rng.random(2))
    values = [c.objective for c in big.elites()]
    best = values[0]
    for v in values:
        best = v if v > best else best
    assert big.best_performance() == best


def test_random_elite(spec):
    a = GridArchive(spec, 1)
    with pytest.raises(EmptyArchiveError):
        a.random_elite(np.random.default_rng(0))
    a.add([1.0], 1.0, [0.1, 0.1])
    assert a.random_elite(np.random.default_rng(0)).solution[0] == 1.0
    a.add([2.0], 1.0, [0.9, 0.9])
    r = np.random.default_rng(3)
    picks = [a.random_elite(r).solution[0] for _ in range(10_000)]
    assert 4700 <= picks.count(1.0) <= 5300
    s1 = [a.random_elite(np.random.default_rng(9)).index for _ in range(3)]
    s2 = [a.random_elite(np.random.default_rng(9)).index for _ in range(3)]
    assert s1 == s2


def test_top_elites_and_sampling(spec, rng):
    a = GridArchive(spec, 1)
    for i, f in enumerate([1.0, 9.0, 4.0, 9.0]):
        a.add([float(i)], f, [(i + 0.5) / 32, 0.0])
    top = a.top_elites(2)
    assert [c.objective for c in top] == [9.0, 9.0]
    assert a.sample_elites(rng, 5).shape == (5, 1)


def _naive_insert(store: dict, spec, sol, f, m):
    key = cell_index(spec, m)
    old = store.get(key)
    if old is None or f > old[1]:
        store[key] = (tuple(sol), f, tuple(m))


def test_matches_naive_reference_small_grid(rng):
    spec = GridSpec((5, 4), (0, -1), (1, 1))
    a = GridArchive(spec, 3)
    ref = {}
    for _ in range(20_000):
        sol = rng.standard_normal(3)
        f = float(np.round(rng.normal(), 2))  # rounding forces ties
        m = rng.uniform(-0.3, 1.3, size=2)
        a.add(sol, f, m)
        _naive_insert(ref, spec, sol, f, m)
    got = {c.index: (tuple(c.solution), c.objective, tuple(c.measures)) for c in a.elites()}
    assert got == ref


def test_cell_consistency(spec, rng):
    a = GridArchive(spec, 1)
    for _ in range(500):
        a.add([0.0], rng.normal(), rng.random(2))
    for c in a.elites():
        assert cell_index(spec, c.measures) == c.index


def test_csv_round_trip_bit_exact(spec, rng):
    a = GridArchive(spec, 4)
    for _ in range(300):
        a.add(rng.standard_normal(4) * 1e-7, rng.normal() * 1e5, rng.random(2))
    text = a.to_csv_text()
    b = GridArchive.from_csv_text(text, spec)
    assert a.state_equal(b)
    assert b.to_csv_text() == text
    assert infer_grid_from_header(text.splitlines()[0].split(",")) == 2


def test_csv_empty_archive_round_trip(spec):
    a = GridArchive(spec, 3)
    b = GridArchive.from_csv_text(a.to_csv_text(), spec)
    assert b.empty and b.solution_dim == 3


def test_csv_rejects_duplicates(spec):
    a = GridArchive(spec, 1)
    a.add([0.0], 1.0, [0.1, 0.1])
    lines = a.to_csv_text().splitlines()
    with pytest.raises(InvalidInputError):
        GridArchive.from_csv_text("\n".join(lines + lines[1:]) + "\n", spec)


insertion = st.tuples(st.floats(-100, 100), st.floats(-0.5, 1.5), st.floats(-0.5, 1.5))


@given(st.lists(insertion, min_size=1, max_size=80))
def test_metrics_monotone_and_rejection_idempotent(items):
    spec = GridSpec.uniform(2, 4)
    a = GridArchive(spec, 1)
    last = (0.0, 0.0, -np.inf)
    for f, m0, m1 in items:
        before = a.to_csv_text()
        out = a.add([f], f, [m0, m1])
        if out.status == InsertStatus.NOT_ADDED:
            assert a.to_csv_text() == before
        now = (a.qd_score(-100.0), a.coverage(), a.best_performance())
        assert all(x >= y for x, y in zip(now, last))
        last = now


@given(st.lists(insertion, min_size=1, max_size=60))
def test_stored_objective_is_running_best(items):
    spec = GridSpec.uniform(2, 3)
    a = GridArchive(spec, 1)
    best = {}
    for f, m0, m1 in items:
        a.add([0.0], f, [m0, m1])
        key = cell_index(spec, [m0, m1])
        best[key] = max(best.get(key, -np.inf), f)
    assert {c.index: c.objective for c in a.elites()} == best
