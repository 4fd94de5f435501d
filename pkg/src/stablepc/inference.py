"""Local parent/children discovery and intervention-effect estimation.

``pc_simple`` runs the level-synchronized candidate elimination around one
target variable, reusing the skeleton engine's executor and batching.
``ida_effects`` enumerates the admissible parent sets of a cause in a CPDAG
and reports one regression-adjusted total effect per set.  The linear SEM
helpers generate test data and the matching population covariance.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .citests import CiTest, DegenerateConditioningError
from .data import Continuous, Dataset
from .graphs import Cpdag, Dag
from .skeleton import (
    LevelExecutor,
    SkeletonConfig,
    estimate_task_cost,
    plan_batches,
)
from . import skeleton as _skeleton_mod

# Tolerance for accepting a pseudo-inverse solution of the normal equations;
# inconsistent systems beyond it are flagged degenerate.
_RESIDUAL_RTOL = 1e-8


@dataclass(frozen=True)
class PcSimpleResult:
    """Estimated parents-and-children of a target.

    ``p_values`` maps each member to the largest p-value observed over all
    of its conditioning sets (every one of them is at most alpha, else the
    member would have been removed).
    """

    target: int
    members: tuple[int, ...]
    p_values: Mapping[int, float]

    def to_json_dict(self) -> dict:
        return {
            "target": self.target,
            "members": list(self.members),
            "p_values": {str(m): self.p_values[m] for m in self.members},
        }


@dataclass(frozen=True)
class IdaEffect:
    """One adjustment-set entry; effect is None when the regression system
    was singular."""

    parents: tuple[int, ...]
    effect: float | None


@dataclass(frozen=True)
class EffectMultiset:
    cause: int
    outcome: int
    effects: tuple[IdaEffect, ...]

    def effect_values(self) -> list[float]:
        return [e.effect for e in self.effects if e.effect is not None]

    def to_json_dict(self) -> dict:
        return {
            "cause": self.cause,
            "outcome": self.outcome,
            "effects": [
                {"parents": list(e.parents), "effect": e.effect}
                for e in self.effects
            ],
        }


@dataclass(frozen=True, slots=True)
class CandidateTask:
    """One candidate at one level, with the frozen level-start candidate set."""

    level: int
    target: int
    x: int
    pool: tuple[int, ...]


@dataclass(frozen=True, slots=True)
class CandidateDecision:
    x: int
    removed: bool
    p_value: float
    tests_performed: int


def decide_candidate(task: CandidateTask, test: CiTest, alpha: float) -> CandidateDecision:
    """Test the candidate against the target for every same-level subset of
    the snapshot pool; the first acceptance marks it for removal."""
    others = tuple(v for v in task.pool if v != task.x)
    largest = 0.0
    tests = 0
    for sub in combinations(others, task.level):
        tests += 1
        try:
            outcome = test(task.x, task.target, sub)
        except DegenerateConditioningError:
            continue
        if outcome.p_value > largest:
            largest = outcome.p_value
        if outcome.p_value > alpha:
            return CandidateDecision(task.x, True, outcome.p_value, tests)
    return CandidateDecision(task.x, False, largest, tests)


def _encode_candidate_slice(tasks: Sequence[CandidateTask]) -> tuple[list[tuple[int, ...]], np.ndarray]:
    table: list[tuple[int, ...]] = []
    position: dict[int, int] = {}
    rows = np.empty((len(tasks), 4), dtype=np.int64)
    for k, t in enumerate(tasks):
        ti = position.get(id(t.pool))
        if ti is None:
            ti = len(table)
            position[id(t.pool)] = ti
            table.append(t.pool)
        rows[k] = (t.level, t.target, t.x, ti)
    return table, rows


def _run_candidate_slice(payload: tuple[list[tuple[int, ...]], np.ndarray]) -> list[tuple]:
    context = _skeleton_mod._WORKER_CONTEXT
    assert context is not None, "worker context missing"
    test, alpha = context
    table, rows = payload
    out = []
    for level, target, x, ti in rows.tolist():
        d = decide_candidate(CandidateTask(level, target, x, table[ti]), test, alpha)
        out.append((d.x, d.removed, d.p_value, d.tests_performed))
    return out


def _run_candidates(tasks: list[CandidateTask], test: CiTest, alpha: float,
                    cfg: SkeletonConfig, ex: LevelExecutor) -> list[CandidateDecision]:
    if not tasks:
        return []
    if cfg.num_workers == 1:
        return [decide_candidate(t, test, alpha) for t in tasks]
    payloads = [_encode_candidate_slice(s)
                for s in _skeleton_mod._even_slices(tasks, ex.num_workers)]
    decisions: list[CandidateDecision] = []
    for chunk in ex.map_slices(_run_candidate_slice, payloads):
        decisions.extend(CandidateDecision(*row) for row in chunk)
    return decisions


def _pc_simple_impl(suff: object, test: CiTest, target: int, alpha: float,
                    cfg: SkeletonConfig) -> tuple[PcSimpleResult, int]:
    p = getattr(suff, "p", None)
    if not isinstance(p, int):
        raise ValueError("sufficient statistic does not expose a variable count")
    if not 0 <= target < p:
        raise ValueError(f"target {target} out of range [0, {p})")
    candidates = [v for v in range(p) if v != target]
    largest_p: dict[int, float] = {v: 0.0 for v in candidates}
    peak_in_flight = 0
    with LevelExecutor(cfg.num_workers, test, alpha) as ex:
        level = 0
        while level < len(candidates) and (cfg.max_level is None or level <= cfg.max_level):
            pool = tuple(candidates)
            tasks = [CandidateTask(level, target, x, pool) for x in candidates]
            plan = plan_batches(tasks, cfg, estimate_task_cost(level, suff))
            decisions: list[CandidateDecision] = []
            for batch in plan.batches:
                peak_in_flight = max(peak_in_flight, len(batch))
                decisions.extend(_run_candidates(batch, test, alpha, cfg, ex))
            keep = []
            for d in decisions:
                largest_p[d.x] = max(largest_p[d.x], d.p_value)
                if not d.removed:
                    keep.append(d.x)
            candidates = keep
            level += 1
    members = tuple(candidates)
    result = PcSimpleResult(target, members, {m: largest_p[m] for m in members})
    return result, peak_in_flight


def pc_simple(suff: object, test: CiTest, target: int, alpha: float,
              cfg: SkeletonConfig) -> PcSimpleResult:
    """Estimate the parents-and-children set of one target variable.

    Candidate elimination with the stable rule: each level tests every
    remaining candidate against the target given all same-level subsets of
    the level-start candidate pool (in parallel over candidates), and
    removals apply at level end.  Stops once the level reaches the pool
    size.
    """
    result, _ = _pc_simple_impl(suff, test, target, alpha, cfg)
    return result


def admissible_parent_sets(g: Cpdag, x: int) -> list[tuple[int, ...]]:
    """Candidate parent sets of x: certain parents plus a sibling subset.

    A subset of the undirected neighbors is admissible when orienting it
    into x creates no new collider at x, i.e. every chosen sibling is
    adjacent to every other member of the candidate parent set.  Ordered by
    sibling-subset size then lexicographically; the certain parents alone
    (empty subset) always come first.
    """
    if not 0 <= x < g.p:
        raise ValueError(f"variable {x} out of range [0, {g.p})")
    certain = sorted(g.parents(x))
    siblings = sorted(g.undirected_neighbors(x))
    admissible = []
    for size in range(len(siblings) + 1):
        for chosen in combinations(siblings, size):
            candidate = tuple(sorted(certain + list(chosen)))
            ok = True
            for u in chosen:
                for v in candidate:
                    if v != u and not g.has_edge(u, v):
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                admissible.append(candidate)
    return admissible


def _solve_normal_equations(a: np.ndarray, b: np.ndarray) -> np.ndarray | None:
    """Solve a @ beta = b for a symmetric PSD a; None when degenerate.

    Rank-deficient systems are degenerate (the coefficient is not
    identified); the pseudo-inverse path only rescues full-rank matrices the
    Cholesky factorization rejected for numerical reasons.
    """
    try:
        beta = cho_solve(cho_factor(a), b)
    except np.linalg.LinAlgError:
        if np.linalg.matrix_rank(a, hermitian=True) < a.shape[0]:
            return None
        beta = np.linalg.pinv(a, hermitian=True) @ b
    if not np.isfinite(beta).all():
        return None
    tolerance = _RESIDUAL_RTOL * max(1.0, float(np.abs(b).max(initial=0.0)))
    if float(np.abs(a @ beta - b).max(initial=0.0)) > tolerance:
        return None
    return beta


def ida_effects(g: Cpdag, cov: np.ndarray, x: int, y: int) -> EffectMultiset:
    """Possible total causal effects of x on y, one per admissible parent set.

    Each effect is the coefficient of x when y is regressed on x plus the
    parent set, solved from the covariance matrix.  A parent set containing
    y gets effect 0 by convention; a singular regression is flagged
    degenerate rather than failing the whole query.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape != (g.p, g.p):
        raise ValueError(f"covariance must be {g.p} x {g.p}")
    if x == y:
        raise ValueError("cause and outcome must differ")
    if not 0 <= y < g.p:
        raise ValueError(f"variable {y} out of range [0, {g.p})")
    entries = []
    for parents in admissible_parent_sets(g, x):
        if y in parents:
            entries.append(IdaEffect(parents, 0.0))
            continue
        predictors = [x, *parents]
        a = cov[np.ix_(predictors, predictors)]
        b = cov[predictors, y]
        beta = _solve_normal_equations(a, b)
        entries.append(IdaEffect(parents, None if beta is None else float(beta[0])))
    return EffectMultiset(x, y, tuple(entries))


def _weight_matrix(dag: Dag, weights: Mapping[tuple[int, int], float]) -> np.ndarray:
    edges = set(dag.edges())
    given = set(weights)
    if given != edges:
        missing = sorted(edges - given)
        extra = sorted(given - edges)
        raise ValueError(
            f"weights must cover exactly the DAG's edges; missing {missing}, "
            f"unexpected {extra}"
        )
    w = np.zeros((dag.p, dag.p))
    for (u, v), weight in weights.items():
        w[u, v] = float(weight)
    return w


def linear_sem_population_cov(dag: Dag, weights: Mapping[tuple[int, int], float]) -> np.ndarray:
    """Population covariance of the linear SEM with unit-variance noise:
    (I - W)^-T (I - W)^-1 for the weighted adjacency W."""
    w = _weight_matrix(dag, weights)
    m = np.linalg.inv(np.eye(dag.p) - w)
    cov = m.T @ m
    return (cov + cov.T) / 2.0


def linear_sem_sample(dag: Dag, weights: Mapping[tuple[int, int], float],
                      n: int, noise_seed: int) -> Dataset:
    """Draw n samples from the linear SEM with standard normal noise.

    Noise is drawn as one seeded block indexed by variable, then values are
    filled in topological order, so a fixed seed reproduces the dataset
    bit for bit.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    w = _weight_matrix(dag, weights)
    rng = np.random.default_rng(noise_seed)
    values = rng.standard_normal((n, dag.p))
    order = dag.topological_order()
    assert order is not None
    for v in order:
        for u in dag.parents[v]:
            values[:, v] += w[u, v] * values[:, u]
    names = tuple(f"x{v}" for v in range(dag.p))
    return Dataset(values, names, tuple(Continuous() for _ in range(dag.p)))
