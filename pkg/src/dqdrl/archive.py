"""Grid archive: one elite per cell of an evenly tessellated measure space."""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .core import (EmptyArchiveError, InvalidInputError, MetricConfigurationError,
                   as_solution, atomic_write_text)


class InsertStatus(enum.IntEnum):
    NOT_ADDED = 0
    IMPROVED_CELL = 1
    NEW_CELL = 2


@dataclass(frozen=True)
class InsertOutcome:
    status: InsertStatus
    improvement: float


@dataclass(frozen=True)
class GridSpec:
    dims: tuple
    lower: tuple
    upper: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        lower = tuple(float(x) for x in self.lower)
        upper = tuple(float(x) for x in self.upper)
        if not (len(dims) == len(lower) == len(upper)) or not dims:
            raise InvalidInputError("dims, lower and upper must have equal non-zero length")
        if any(d <= 0 for d in dims):
            raise InvalidInputError(f"every grid dimension must be positive, got {dims}")
        if any(lo >= hi for lo, hi in zip(lower, upper)):
            raise InvalidInputError("each lower bound must be strictly below its upper bound")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def uniform(cls, k: int, cells_per_dim: int, lower: float = 0.0,
                upper: float = 1.0) -> "GridSpec":
        return cls((cells_per_dim,) * k, (lower,) * k, (upper,) * k)

    @property
    def measure_dim(self) -> int:
        return len(self.dims)

    @property
    def cells(self) -> int:
        return int(np.prod(self.dims))


def cell_index(spec: GridSpec, m) -> tuple:
    """Grid coordinates of measure vector ``m``; out-of-range values clamp."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (spec.measure_dim,):
        raise InvalidInputError(f"measures must have shape ({spec.measure_dim},), got {m.shape}")
    out = []
    # Scalar twin of cell_indices: the same float64 operations in the same order.
    for x, lo, hi, d in zip(m.tolist(), spec.lower, spec.upper, spec.dims):
        if not math.isfinite(x):
            raise InvalidInputError("measures contain non-finite entries")
        out.append(min(max(math.floor((x - lo) / (hi - lo) * d), 0), d - 1))
    return tuple(out)


def cell_indices(spec: GridSpec, measures: np.ndarray) -> np.ndarray:
    """Vectorized :func:`cell_index` over rows of ``measures``; returns (B, k) ints."""
    lo = np.asarray(spec.lower)
    hi = np.asarray(spec.upper)
    dims = np.asarray(spec.dims)
    scaled = (measures - lo) / (hi - lo) * dims
    idx = np.floor(scaled)
    return np.clip(idx, 0, dims - 1).astype(np.int64)


@dataclass
class ArchiveCell:
    index: tuple
    solution: np.ndarray
    objective: float
    measures: np.ndarray


class GridArchive:
    """MAP-Elites grid archive with dense storage.

    Cells are keyed by the row-major flat index of their grid coordinates.
    Only :meth:`add` mutates the archive.
    """

    def __init__(self, spec: GridSpec, solution_dim: int):
        self.spec = spec
        self.solution_dim = int(solution_dim)
        M, k = spec.cells, spec.measure_dim
        self._occupied = np.zeros(M, dtype=bool)
        self._objectives = np.full(M, -np.inf)
        self._measures = np.zeros((M, k))
        self._solutions = np.zeros((M, self.solution_dim))
        self._count = 0

    def __len__(self) -> int:
        return self._count

    @property
    def empty(self) -> bool:
        return self._count == 0

    def flat_index(self, m) -> int:
        flat = 0
        for i, d in zip(cell_index(self.spec, m), self.spec.dims):
            flat = flat * d + i
        return flat

    def add(self, solution, objective: float, measures) -> InsertOutcome:
        """Insert one solution; the improvement is computed against the old occupant."""
        objective = float(objective)
        if not np.isfinite(objective):
            raise InvalidInputError(f"objective must be finite, got {objective}")
        solution = as_solution(solution, self.solution_dim)
        measures = np.asarray(measures, dtype=np.float64)
        idx = self.flat_index(measures)
        if not self._occupied[idx]:
            self._store(idx, solution, objective, measures)
            self._occupied[idx] = True
            self._count += 1
            return InsertOutcome(InsertStatus.NEW_CELL, objective)
        old = float(self._objectives[idx])
        delta = objective - old
        if objective > old:
            self._store(idx, solution, objective, measures)
            return InsertOutcome(InsertStatus.IMPROVED_CELL, delta)
        return InsertOutcome(InsertStatus.NOT_ADDED, delta)

    def add_batch(self, solutions, objectives, measures) -> list:
        """Insert rows sequentially in ascending batch order."""
        return [self.add(s, f, m) for s, f, m in zip(solutions, objectives, measures)]

    def _store(self, idx, solution, objective, measures):
        self._solutions[idx] = solution
        self._objectives[idx] = objective
        self._measures[idx] = measures

    # -- queries ---------------------------------------------------------

    def occupied_indices(self) -> np.ndarray:
        return np.flatnonzero(self._occupied)

    def cell(self, flat_idx: int) -> ArchiveCell:
        if not self._occupied[flat_idx]:
            raise KeyError(flat_idx)
        return ArchiveCell(
            index=tuple(int(i) for i in np.unravel_index(flat_idx, self.spec.dims)),
            solution=self._solutions[flat_idx].copy(),
            objective=float(self._objectives[flat_idx]),
            measures=self._measures[flat_idx].copy(),
        )

    def elites(self) -> Iterator[ArchiveCell]:
        for idx in self.occupied_indices():
            yield self.cell(int(idx))

    def objectives(self) -> np.ndarray:
        return self._objectives[self._occupied].copy()

    def solutions(self) -> np.ndarray:
        return self._solutions[self._occupied].copy()

    def measures(self) -> np.ndarray:
        return self._measures[self._occupied].copy()

    def objective_grid(self) -> np.ndarray:
        """Objectives as a dense array shaped ``spec.dims`` with NaN for empty cells."""
        grid = np.where(self._occupied, self._objectives, np.nan)
        return grid.reshape(self.spec.dims)

    def qd_score(self, min_objective: float) -> float:
        if self._count == 0:
            return 0.0
        objs = self._objectives[self._occupied]
        lowest = float(objs.min())
        if lowest < min_objective:
            raise MetricConfigurationError(
                f"archive holds objective {lowest!r} below min_objective {min_objective!r}")
        return float(np.sum(objs - min_objective))

    def coverage(self) -> float:
        return self._count / self.spec.cells

    def best_performance(self) -> float:
        if self._count == 0:
            raise EmptyArchiveError("best_performance of an empty archive")
        return float(self._objectives[self._occupied].max())

    def random_elite(self, rng: np.random.Generator) -> ArchiveCell:
        if self._count == 0:
            raise EmptyArchiveError("cannot select an elite from an empty archive")
        occ = self.occupied_indices()
        return self.cell(int(occ[rng.integers(len(occ))]))

    def sample_elites(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` elite solutions drawn uniformly with replacement, shape (n, dim)."""
        if self._count == 0:
            raise EmptyArchiveError("cannot select elites from an empty archive")
        occ = self.occupied_indices()
        return self._solutions[occ[rng.integers(len(occ), size=n)]].copy()

    def top_elites(self, n: int) -> list:
        """The ``n`` highest-objective elites, best first (ties by cell index)."""
        occ = self.occupied_indices()
        order = np.argsort(-self._objectives[occ], kind="stable")[:n]
        return [self.cell(int(occ[i])) for i in order]

    def state_equal(self, other: "GridArchive") -> bool:
        return (self.spec == other.spec
                and np.array_equal(self._occupied, other._occupied)
                and np.array_equal(self._objectives[self._occupied], other._objectives[other._occupied])
                and np.array_equal(self._measures[self._occupied], other._measures[other._occupied])
                and np.array_equal(self._solutions[self._occupied], other._solutions[other._occupied]))

    # -- persistence -----------------------------------------------------

    def csv_header(self) -> list:
        k = self.spec.measure_dim
        return ([f"cell_index_{j}" for j in range(k)]
                + [f"measure_{j}" for j in range(k)]
                + ["objective"]
                + [f"param_{i}" for i in range(self.solution_dim)])

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.csv_header())
        for cell in self.elites():
            writer.writerow([str(i) for i in cell.index]
                            + [_fmt(x) for x in cell.measures]
                            + [_fmt(cell.objective)]
                            + [_fmt(x) for x in cell.solution])
        return buf.getvalue()

    def to_csv(self, path) -> None:
        atomic_write_text(path, self.to_csv_text())

    @classmethod
    def from_csv(cls, path, spec: GridSpec) -> "GridArchive":
        with open(path, newline="") as fh:
            return cls.from_csv_text(fh.read(), spec)

    @classmethod
    def from_csv_text(cls, text: str, spec: GridSpec) -> "GridArchive":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise InvalidInputError("archive CSV is missing its header row")
        header = rows[0]
        k = spec.measure_dim
        n = len(header) - 2 * k - 1
        if n < 0 or header[:k] != [f"cell_index_{j}" for j in range(k)]:
            raise InvalidInputError("archive CSV header does not match the grid")
        archive = cls(spec, n)
        for row in rows[1:]:
            if not row:
                continue
            idx = tuple(int(x) for x in row[:k])
            meas = np.array([float(x) for x in row[k:2 * k]])
            obj = float(row[2 * k])
            sol = np.array([float(x) for x in row[2 * k + 1:]])
            flat = int(np.ravel_multi_index(idx, spec.dims))
            if archive._occupied[flat]:
                raise InvalidInputError(f"duplicate cell {idx} in archive CSV")
            archive._store(flat, sol, obj, meas)
            archive._occupied[flat] = True
            archive._count += 1
        return archive


def read_csv_header(path) -> list:
    with open(path, newline="") as fh:
        return next(csv.reader(fh))


def infer_grid_from_header(header: Sequence[str]) -> int:
    """Number of measures encoded by an archive CSV header."""
    return sum(1 for h in header if h.startswith("cell_index_"))


def _fmt(x: float) -> str:
    # 17 significant digits round-trip any float64 exactly.
    return format(float(x), ".17g")
