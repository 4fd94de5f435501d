"""Order-independent skeleton learning with level-parallel CI testing.

The search starts from the complete graph and proceeds in levels, where the
level is the conditioning-set size.  All CI tests of one level run against an
immutable snapshot of the graph taken at level start, and every removal is
applied in a single-threaded merge at level end.  Because each edge's task
carries everything that determines its outcome (the snapshot neighborhoods
and the level), the per-edge decisions are independent of scheduling: any
worker count and any batch partition produce results identical to the
sequential run.

Batching bounds how many tasks sit in worker queues at once so a run on a
memory-constrained machine does not hold the whole level in flight while
waiting for the merge barrier.  Batch boundaries never influence results,
only scheduling.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .citests import CiTest, DegenerateConditioningError
from .data import DiscreteSuffStat
from .graphs import SepsetMap, SkeletonGraph, complete_graph

DEFAULT_MEM_BUDGET_BYTES = 512 * 1024 * 1024

# Per-task scratch estimates, fixed by rough measurement and frozen: the
# planner only shapes batch boundaries, never results.
GAUSSIAN_TASK_BASE = 512       # task + decision bookkeeping
GAUSSIAN_TASK_CELL = 48        # submatrix entry + inverse + factorization scratch
DISCRETE_TASK_BASE = 512
DISCRETE_TABLE_CELL = 16       # observed count + expected frequency per cell
MAX_TABLE_CELLS = 1 << 20


class LevelExecutionError(RuntimeError):
    """A worker failed mid-level; the level was aborted before any merge."""


@dataclass(frozen=True)
class SkeletonConfig:
    """Knobs for the skeleton search and its executor.

    ``force_batch_size`` overrides the planner with a fixed batch size in
    every mode; it exists so equivalence across batch partitions can be
    verified directly.
    """

    alpha: float = 0.01
    max_level: int | None = None
    num_workers: int = 1
    mem_efficient: bool = False
    mem_budget_bytes: int | None = None
    mem_probe: bool = False
    force_batch_size: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.num_workers < 1:
            raise ValueError("num_workers must be at least 1")
        if self.max_level is not None and self.max_level < 0:
            raise ValueError("max_level must be nonnegative")
        if self.mem_budget_bytes is not None and self.mem_budget_bytes < 1:
            raise ValueError("mem_budget_bytes must be positive")
        if self.force_batch_size is not None and self.force_batch_size < 1:
            raise ValueError("force_batch_size must be positive")


@dataclass(frozen=True, slots=True)
class EdgeTask:
    """One surviving edge plus the frozen level-start neighborhoods.

    The task fixes its own conditioning-set enumeration completely, so where
    or when it executes cannot change its decision.  Neighbor tuples are
    ascending and include the opposite endpoint; they are shared between
    tasks of the same level to keep snapshots cheap.
    """

    level: int
    i: int
    j: int
    nbrs_i: tuple[int, ...]
    nbrs_j: tuple[int, ...]

    def __post_init__(self) -> None:
        if not 0 <= self.i < self.j:
            raise ValueError("edge task requires 0 <= i < j")
        if self.level < 0:
            raise ValueError("level must be nonnegative")


@dataclass(frozen=True, slots=True)
class EdgeDecision:
    i: int
    j: int
    removed: bool
    sepset: tuple[int, ...] | None
    tests_performed: int


@dataclass(frozen=True)
class BatchPlan:
    """Ordered partition of a level's task list into contiguous chunks."""

    batches: tuple[list[EdgeTask], ...]

    def __post_init__(self) -> None:
        for b in self.batches:
            if not b:
                raise ValueError("batches must be non-empty")

    def task_count(self) -> int:
        return sum(len(b) for b in self.batches)


@dataclass(frozen=True)
class LevelStat:
    level: int
    tests: int
    removals: int
    wall_ms: float


@dataclass(frozen=True)
class LevelStats:
    """Per-level counters plus the peak dispatch size of the whole run.

    ``wall_ms`` is measured wall time, the one field that varies between
    otherwise identical runs.
    """

    levels: tuple[LevelStat, ...]
    peak_tasks_in_flight: int

    def total_tests(self) -> int:
        return sum(s.tests for s in self.levels)

    def to_json_list(self) -> list[dict]:
        return [
            {"level": s.level, "tests": s.tests, "removals": s.removals,
             "wall_ms": s.wall_ms}
            for s in self.levels
        ]


def decide_edge(task: EdgeTask, test: CiTest, alpha: float) -> EdgeDecision:
    """Run one edge's conditioning sets for its level; first acceptance wins.

    Sets of size ``task.level`` are drawn from i's snapshot neighborhood
    (minus j) in lexicographic order, then from j's side skipping sets
    already covered by i's side.  A degenerate-conditioning failure counts
    as dependence for that set and enumeration continues.
    """
    side_i = tuple(v for v in task.nbrs_i if v != task.j)
    side_j = tuple(v for v in task.nbrs_j if v != task.i)
    tests = 0
    for sub in combinations(side_i, task.level):
        tests += 1
        try:
            outcome = test(task.i, task.j, sub)
        except DegenerateConditioningError:
            continue
        if outcome.p_value > alpha:
            return EdgeDecision(task.i, task.j, True, sub, tests)
    covered = set(side_i)
    for sub in combinations(side_j, task.level):
        if all(v in covered for v in sub):
            continue
        tests += 1
        try:
            outcome = test(task.i, task.j, sub)
        except DegenerateConditioningError:
            continue
        if outcome.p_value > alpha:
            return EdgeDecision(task.i, task.j, True, sub, tests)
    return EdgeDecision(task.i, task.j, False, None, tests)


def probe_free_memory() -> int | None:
    """Best-effort free-memory probe; None when the platform offers nothing."""
    try:
        with open("/proc/meminfo", encoding="ascii") as fh:
            for line in fh:
                if line.startswith("MemAvailable:"):
                    return int(line.split()[1]) * 1024
    except (OSError, ValueError, IndexError):
        pass
    try:
        pages = os.sysconf("SC_AVPHYS_PAGES")
        size = os.sysconf("SC_PAGE_SIZE")
        if pages > 0 and size > 0:
            return pages * size
    except (OSError, ValueError, AttributeError):
        pass
    return None


def estimate_task_cost(level: int, suff: object) -> int:
    """Deterministic per-task memory estimate in bytes for batch planning.

    Gaussian tasks scale with the (level+2)-square submatrix; discrete tasks
    with the contingency cells of a worst-case conditioning set (the level
    largest arities), capped.  Statistics without a recognized kind (the
    d-separation oracle) fall back to the Gaussian formula.
    """
    if level < 0:
        raise ValueError("level must be nonnegative")
    if isinstance(suff, DiscreteSuffStat):
        cells = 1
        for a in sorted(suff.arities, reverse=True)[:level]:
            cells = min(cells * a, MAX_TABLE_CELLS)
        return DISCRETE_TASK_BASE + DISCRETE_TABLE_CELL * cells
    side = level + 2
    return GAUSSIAN_TASK_BASE + GAUSSIAN_TASK_CELL * side * side


def plan_batches(tasks: Sequence[EdgeTask], cfg: SkeletonConfig,
                 per_task_cost: int) -> BatchPlan:
    """Partition a level's tasks into contiguous batches.

    Without the memory-efficient flag everything goes into one batch.  With
    it, the batch size is the worker count times the per-worker task count
    that fits the byte budget (explicit, probed, or the 512 MiB default).
    """
    if per_task_cost <= 0:
        raise ValueError("per_task_cost must be positive")
    tasks = list(tasks)
    n = len(tasks)
    if n == 0:
        return BatchPlan(())
    if cfg.force_batch_size is not None:
        size = min(cfg.force_batch_size, n)
    elif not cfg.mem_efficient:
        return BatchPlan((tasks,))
    else:
        budget = cfg.mem_budget_bytes
        if budget is None and cfg.mem_probe:
            budget = probe_free_memory()
        if budget is None:
            budget = DEFAULT_MEM_BUDGET_BYTES
        per_worker = budget // (per_task_cost * cfg.num_workers)
        per_worker = max(1, min(per_worker, n))
        size = min(per_worker * cfg.num_workers, n)
    return BatchPlan(tuple(tasks[k:k + size] for k in range(0, n, size)))


# ---------------------------------------------------------------------------
# Worker-side machinery.  One process pool per engine run; workers hold the
# CI test and alpha in a module global set by the pool initializer, and task
# slices travel as a deduplicated neighborhood table plus an integer matrix,
# which is far cheaper to pickle than task objects.

_WORKER_CONTEXT: tuple[CiTest, float] | None = None


def _init_worker(test: CiTest, alpha: float) -> None:
    global _WORKER_CONTEXT
    _WORKER_CONTEXT = (test, alpha)


def _encode_edge_slice(tasks: Sequence[EdgeTask]) -> tuple[list[tuple[int, ...]], np.ndarray]:
    table: list[tuple[int, ...]] = []
    position: dict[int, int] = {}
    rows = np.empty((len(tasks), 5), dtype=np.int64)
    for k, t in enumerate(tasks):
        ti = position.get(id(t.nbrs_i))
        if ti is None:
            ti = len(table)
            position[id(t.nbrs_i)] = ti
            table.append(t.nbrs_i)
        tj = position.get(id(t.nbrs_j))
        if tj is None:
            tj = len(table)
            position[id(t.nbrs_j)] = tj
            table.append(t.nbrs_j)
        rows[k] = (t.level, t.i, t.j, ti, tj)
    return table, rows


def _run_edge_slice(payload: tuple[list[tuple[int, ...]], np.ndarray]) -> list[tuple]:
    assert _WORKER_CONTEXT is not None, "worker context missing"
    test, alpha = _WORKER_CONTEXT
    table, rows = payload
    out = []
    for level, i, j, ti, tj in rows.tolist():
        d = decide_edge(EdgeTask(level, i, j, table[ti], table[tj]), test, alpha)
        out.append((d.i, d.j, d.removed, d.sepset, d.tests_performed))
    return out


def _even_slices(items: Sequence, parts: int) -> list[Sequence]:
    """Split into at most ``parts`` contiguous slices whose sizes differ by <= 1."""
    n = len(items)
    parts = min(parts, n)
    base, extra = divmod(n, parts)
    out = []
    start = 0
    for k in range(parts):
        size = base + (1 if k < extra else 0)
        out.append(items[start:start + size])
        start += size
    return out


class LevelExecutor:
    """Fork-join pool bound to one (test, alpha) pair for one engine run.

    Lazily spins up the process pool on the first parallel dispatch, so
    sequential runs never fork.  Each instance owns its pool; concurrent
    engine runs on distinct inputs use distinct executors.
    """

    def __init__(self, num_workers: int, test: CiTest, alpha: float):
        self.num_workers = num_workers
        self._test = test
        self._alpha = alpha
        self._pool: ProcessPoolExecutor | None = None

    def __enter__(self) -> "LevelExecutor":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True, cancel_futures=True)
            self._pool = None

    def _ensure_pool(self) -> ProcessPoolExecutor:
        if self._pool is None:
            self._pool = ProcessPoolExecutor(
                max_workers=self.num_workers,
                initializer=_init_worker,
                initargs=(self._test, self._alpha),
            )
        return self._pool

    def map_slices(self, job, payloads: Sequence) -> list[list]:
        """Submit one job per payload; gather results in submission order."""
        pool = self._ensure_pool()
        futures = [pool.submit(job, payload) for payload in payloads]
        results = []
        try:
            for f in futures:
                results.append(f.result())
        except Exception as exc:
            for f in futures:
                f.cancel()
            self.close()
            raise LevelExecutionError(f"worker failed: {exc!r}") from exc
        return results


def run_level_parallel(tasks: Sequence[EdgeTask], test: CiTest, alpha: float,
                       cfg: SkeletonConfig,
                       _executor: LevelExecutor | None = None) -> list[EdgeDecision]:
    """Decide one batch of same-level edge tasks, in input order.

    With one worker this is a plain in-process loop over ``decide_edge``;
    with more, workers receive disjoint contiguous slices and the gathered
    decisions are element-for-element identical to the sequential loop.
    """
    tasks = list(tasks)
    if not tasks:
        return []
    if cfg.num_workers == 1:
        return [decide_edge(t, test, alpha) for t in tasks]
    if _executor is None:
        with LevelExecutor(cfg.num_workers, test, alpha) as ex:
            return _dispatch_edges(ex, tasks)
    return _dispatch_edges(_executor, tasks)


def _dispatch_edges(ex: LevelExecutor, tasks: list[EdgeTask]) -> list[EdgeDecision]:
    payloads = [_encode_edge_slice(s) for s in _even_slices(tasks, ex.num_workers)]
    decisions: list[EdgeDecision] = []
    for chunk in ex.map_slices(_run_edge_slice, payloads):
        decisions.extend(EdgeDecision(*row) for row in chunk)
    return decisions


def _suff_dim(suff: object) -> int | None:
    p = getattr(suff, "p", None)
    return int(p) if isinstance(p, int) else None


def skeleton_stable(suff: object, test: CiTest, p: int,
                    cfg: SkeletonConfig) -> tuple[SkeletonGraph, SepsetMap, LevelStats]:
    """Learn the undirected skeleton with the level-synchronized stable rule.

    ``suff`` is the sufficient statistic the test closes over (also consulted
    for batch cost estimates); ``p`` is the variable count.  Returns the
    skeleton, the separating set recorded for each removed edge, and the
    per-level statistics.

    For each level, every surviving edge is tested against conditioning sets
    of the level's size drawn from the level-start neighborhoods of both
    endpoints; the first accepted set removes the edge and becomes its
    sepset.  Removals are applied only after the whole level has been
    decided, which makes the output independent of variable order and of the
    parallel schedule.
    """
    if p < 2:
        raise ValueError(f"need at least two variables, got {p}")
    dim = _suff_dim(suff)
    if dim is not None and dim != p:
        raise ValueError(f"sufficient statistic covers {dim} variables, expected {p}")

    graph = complete_graph(p)
    sepsets = SepsetMap()
    level_rows: list[LevelStat] = []
    peak_in_flight = 0
    with LevelExecutor(cfg.num_workers, test, cfg.alpha) as ex:
        level = 0
        while cfg.max_level is None or level <= cfg.max_level:
            started = time.perf_counter()
            snapshot = [tuple(graph.neighbors(v)) for v in range(p)]
            tasks = [
                EdgeTask(level, i, j, snapshot[i], snapshot[j])
                for i, j in graph.edges()
                if len(snapshot[i]) - 1 >= level or len(snapshot[j]) - 1 >= level
            ]
            if not tasks:
                break
            plan = plan_batches(tasks, cfg, estimate_task_cost(level, suff))
            decisions: list[EdgeDecision] = []
            for batch in plan.batches:
                peak_in_flight = max(peak_in_flight, len(batch))
                decisions.extend(run_level_parallel(batch, test, cfg.alpha, cfg,
                                                    _executor=ex))
            removals = 0
            for d in decisions:
                if d.removed:
                    graph.remove_edge(d.i, d.j)
                    sepsets.set(d.i, d.j, d.sepset)
                    removals += 1
            level_rows.append(LevelStat(
                level=level,
                tests=sum(d.tests_performed for d in decisions),
                removals=removals,
                wall_ms=(time.perf_counter() - started) * 1000.0,
            ))
            level += 1
    return graph, sepsets, LevelStats(tuple(level_rows), peak_in_flight)
