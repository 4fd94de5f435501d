"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s``.  Expected values follow
the derive-then-freeze discipline: every number asserted here was computed
with the independent oracles in oracles.py before being written down.
"""

import json
import os
from contextlib import contextmanager

import numpy as np
import pytest

from oracles import (
    equivalence_class_cpdag,
    fisher_p_highprec,
    mi_g_p_highprec,
    pcor_residuals,
    random_dag,
    sample_binary_network,
    total_effect,
)
from stablepc import (
    ChiSquaredTest,
    Continuous,
    Dataset,
    DiscreteSuffStat,
    FisherZTest,
    GaussianMiTest,
    GaussianSuffStat,
    GSquaredTest,
    OracleTest,
    SkeletonConfig,
    cpdag_from_dag,
    gaussian_suffstat,
    ida_effects,
    linear_sem_population_cov,
    linear_sem_sample,
    meek_closure,
    orient_v_structures,
    partial_correlation,
    pc_simple,
    skeleton_stable,
)
from stablepc.cli import random_weighted_dag, run


@contextmanager
def criterion(number: int, name: str):
    try:
        yield
    except BaseException as exc:
        label = "SKIP" if type(exc).__name__ == "Skipped" else "FAIL"
        print(f"\nACCEPTANCE {number} {name}: {label}")
        raise
    print(f"\nACCEPTANCE {number} {name}: PASS")


def gaussian_instance(seed, p=30, n=200, density=0.1):
    rng = np.random.default_rng(seed)
    dag, weights = random_weighted_dag(p, density, rng)
    dataset = linear_sem_sample(dag, weights, n, noise_seed=seed)
    return dataset, gaussian_suffstat(dataset)


def discrete_instance(seed, p=20, n=500, density=0.1):
    rng = np.random.default_rng(1000 + seed)
    dag = random_dag(p, density, rng)
    codes = sample_binary_network(dag, n, rng)
    return DiscreteSuffStat(codes, [2] * p)


def pipeline(suff, test, p, cfg):
    graph, seps, stats = skeleton_stable(suff, test, p, cfg)
    cpdag = meek_closure(orient_v_structures(graph, seps))
    return graph, seps, cpdag, stats


WORKER_COUNTS = (1, 2, 4, 8)
MEM_MODES = (False, True)
BATCH_SIZES = (1, 7, None)  # None = everything in one batch


def sweep_equal(suff, test, p):
    reference = pipeline(suff, test, p, SkeletonConfig(num_workers=1))
    for workers in WORKER_COUNTS:
        for mem in MEM_MODES:
            for batch in BATCH_SIZES:
                cfg = SkeletonConfig(num_workers=workers, mem_efficient=mem,
                                     force_batch_size=batch)
                graph, seps, cpdag, _ = pipeline(suff, test, p, cfg)
                assert np.array_equal(graph.adj, reference[0].adj), \
                    f"skeleton differs at workers={workers} mem={mem} batch={batch}"
                assert seps == reference[1], \
                    f"sepsets differ at workers={workers} mem={mem} batch={batch}"
                assert np.array_equal(cpdag.mark, reference[2].mark), \
                    f"CPDAG differs at workers={workers} mem={mem} batch={batch}"


def test_criterion_1_parallel_equivalence():
    with criterion(1, "parallel/batching equivalence"):
        for seed in range(50):
            _, suff = gaussian_instance(seed)
            sweep_equal(suff, FisherZTest(suff), suff.p)
        for seed in range(20):
            suff = discrete_instance(seed)
            sweep_equal(suff, GSquaredTest(suff), suff.p)


def test_criterion_2_order_independence():
    # The level-end removal rule makes the learned SKELETON a permutation-
    # equivariant function of the data; that part is asserted strictly (a
    # violation would be an engine bug).  The criterion additionally demands
    # the full CPDAG be equivariant, which does not follow from the stable
    # rule: the recorded sepset is the first accepting set in index order,
    # relabeling changes which accepting set comes first, and v-structure
    # orientation reads sepset membership.  On finite-sample data this fails
    # for almost every permutation (measured 197/200 here); see the "Known
    # limitation" section of the README.  The assertion is kept strict.
    with criterion(2, "order independence under column permutation"):
        skeleton_mismatches = []
        cpdag_mismatches = []
        for seed in range(20):
            dataset, suff = gaussian_instance(seed)
            g_ref, _, cpdag_ref, _ = pipeline(suff, FisherZTest(suff), suff.p,
                                              SkeletonConfig(num_workers=1))
            perm_rng = np.random.default_rng(5000 + seed)
            for trial in range(10):
                perm = [int(v) for v in perm_rng.permutation(suff.p)]
                permuted = Dataset(dataset.values[:, perm],
                                   [dataset.names[v] for v in perm],
                                   [dataset.kinds[v] for v in perm])
                suff_p = gaussian_suffstat(permuted)
                g_p, _, cpdag_p, _ = pipeline(suff_p, FisherZTest(suff_p),
                                              suff.p, SkeletonConfig(num_workers=1))
                if not np.array_equal(g_p.adj, g_ref.adj[np.ix_(perm, perm)]):
                    skeleton_mismatches.append((seed, trial))
                if not np.array_equal(cpdag_p.mark,
                                      cpdag_ref.mark[np.ix_(perm, perm)]):
                    cpdag_mismatches.append((seed, trial))
        assert not skeleton_mismatches, \
            f"skeleton not permutation-equivariant at {skeleton_mismatches}"
        assert not cpdag_mismatches, (
            f"CPDAG differs under {len(cpdag_mismatches)}/200 permutations "
            "(first-found sepsets are label-dependent; skeletons all matched; "
            "see README, Known limitation)")


def test_criterion_3_oracle_exactness():
    with criterion(3, "oracle pipeline recovers the true CPDAG"):
        rng = np.random.default_rng(77)
        for _ in range(200):
            p = int(rng.integers(3, 9))
            dag = random_dag(p, 0.28, rng, max_edges=13)
            _, _, cpdag, _ = pipeline(dag, OracleTest(dag), p,
                                      SkeletonConfig(num_workers=1))
            truth = equivalence_class_cpdag(dag)
            assert np.array_equal(cpdag.mark, truth.mark), dag.parents
            assert cpdag_from_dag(dag) == truth, dag.parents


def test_criterion_4_ci_test_numerics():
    with criterion(4, "CI test numerics against independent evaluators"):
        # partial correlation vs residual regression, 1000 instances
        rng = np.random.default_rng(123)
        checked = 0
        while checked < 1000:
            p = int(rng.integers(4, 9))
            mix = np.eye(p) + 0.3 * rng.standard_normal((p, p))
            data = rng.standard_normal((40, p)) @ mix
            ds = Dataset(data, [f"v{k}" for k in range(p)], [Continuous()] * p)
            stat = gaussian_suffstat(ds)
            for _ in range(10):
                i, j = (int(v) for v in rng.choice(p, size=2, replace=False))
                others = sorted(set(range(p)) - {i, j})
                size = int(rng.integers(0, min(3, len(others)) + 1))
                s = sorted(int(v) for v in
                           rng.choice(others, size=size, replace=False))
                got = partial_correlation(stat, i, j, s)
                want = pcor_residuals(data, i, j, s)
                assert abs(got - want) <= 1e-10, (i, j, s)
                checked += 1

        # fisher-z and mi-g p-values vs 50-digit evaluator, 100 points
        rng = np.random.default_rng(321)
        for _ in range(100):
            r = float(rng.uniform(-0.97, 0.97))
            n = int(rng.integers(10, 600))
            s_size = int(rng.integers(0, 5))
            corr = np.eye(2 + s_size)
            corr[0, 1] = corr[1, 0] = r
            stat = GaussianSuffStat(corr, n)
            s = list(range(2, 2 + s_size))
            effective_r = partial_correlation(stat, 0, 1, s)
            fisher = FisherZTest(stat)(0, 1, s)
            expected = fisher_p_highprec(effective_r, n, s_size)
            if expected > 0:
                assert abs(fisher.p_value - expected) <= 1e-9 * expected
            mi = GaussianMiTest(stat)(0, 1, s)
            expected_mi = mi_g_p_highprec(effective_r, n)
            if expected_mi > 0:
                assert abs(mi.p_value - expected_mi) <= 1e-9 * expected_mi

        # frozen hand-computed contingency tables
        col = [0] * 50 + [1] * 50
        stat = DiscreteSuffStat(np.array([col, list(col)]).T, [2, 2])
        g = GSquaredTest(stat)(0, 1, [])
        assert abs(g.statistic - 138.62943611198906) <= 1e-9

        a = [0] * 40 + [1] * 40
        b = [0] * 30 + [1] * 10 + [0] * 10 + [1] * 30
        stat = DiscreteSuffStat(np.array([a, b]).T, [2, 2])
        x = ChiSquaredTest(stat)(0, 1, [])
        assert abs(x.statistic - 20.0) <= 1e-9
        assert abs(x.p_value - 7.744216431044084e-06) <= 1e-9


def test_criterion_5_pc_simple():
    # Exact parents-and-children recovery is a property of sparse graphs:
    # the local search conditions only on surviving candidates, so a
    # descendant whose every separator needs an already-eliminated variable
    # stays in (see TestKnownSupersetBoundary in test_inference.py for the
    # pinned counterexample).  This family is drawn sparse and the seed is
    # fixed; parallel/sequential equality is checked unconditionally.
    with criterion(5, "PC-simple oracle correctness and parallel equivalence"):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            p = int(rng.integers(3, 9))
            dag = random_dag(p, 0.2, rng)
            target = int(rng.integers(0, p))
            expected = tuple(sorted(set(dag.parents[target]) |
                                    set(dag.children(target))))
            sequential = pc_simple(dag, OracleTest(dag), target, 0.01,
                                   SkeletonConfig(num_workers=1))
            assert sequential.members == expected, (dag.parents, target)
            for workers in (2, 4):
                parallel = pc_simple(dag, OracleTest(dag), target, 0.01,
                                     SkeletonConfig(num_workers=workers))
                assert parallel == sequential, (dag.parents, target, workers)


def test_criterion_6_ida_exactness():
    with criterion(6, "IDA recovers the true effect from population covariance"):
        rng = np.random.default_rng(55)
        for _ in range(100):
            p = int(rng.integers(3, 9))
            dag, weights = random_weighted_dag(p, 0.35, rng)
            cov = linear_sem_population_cov(dag, weights)
            cpdag = cpdag_from_dag(dag)
            x, y = (int(v) for v in rng.choice(p, size=2, replace=False))
            truth = total_effect(dag, weights, x, y)
            values = ida_effects(cpdag, cov, x, y).effect_values()
            assert values, (dag.parents, x, y)
            assert min(abs(v - truth) for v in values) <= 1e-8, \
                (dag.parents, x, y, truth, values)


@pytest.fixture(scope="module")
def big_bench_dir(tmp_path_factory):
    """Seeded p=500, n=100 Gaussian dataset shared by criteria 7 and 8."""
    out = tmp_path_factory.mktemp("bigbench")
    code = run(["gen", "--output", str(out), "--p", "500",
                "--density", "0.005", "--n", "100", "--seed", "42"])
    assert code == 0
    return out


def bench_rows(outdir):
    return json.loads((outdir / "bench.json").read_text(encoding="utf-8"))


def row(rows, variant):
    matches = [r for r in rows if r["variant"] == variant]
    assert len(matches) == 1
    return matches[0]


@pytest.mark.skipif((os.cpu_count() or 1) < 4,
                    reason="speedup criterion is stated for a >= 4-core machine")
def test_criterion_7_speedup(big_bench_dir):
    with criterion(7, "4-worker skeleton speedup at p=500"):
        out = big_bench_dir / "speedup"
        code = run(["bench", "--input", str(big_bench_dir / "data.csv"),
                    "--output", str(out), "--algos", "pc",
                    "--num-workers", "4"])
        assert code == 0, "bench reported a digest mismatch or failure"
        rows = bench_rows(out)
        sequential = row(rows, "sequential")
        parallel = row(rows, "parallel")
        assert parallel["result_digest"] == sequential["result_digest"]
        ratio = parallel["wall_ms"] / sequential["wall_ms"]
        assert ratio <= 0.7, f"parallel/sequential wall ratio {ratio:.3f} > 0.7"


def test_criterion_8_memory_efficient_mode(big_bench_dir):
    with criterion(8, "64 MiB budget shrinks peak in-flight tasks, same digest"):
        out = big_bench_dir / "membench"
        code = run(["bench", "--input", str(big_bench_dir / "data.csv"),
                    "--output", str(out), "--algos", "pc",
                    "--num-workers", "2", "--mem-budget", str(64 * 1024 * 1024)])
        assert code == 0, "bench reported a digest mismatch or failure"
        rows = bench_rows(out)
        unbatched = row(rows, "parallel")
        batched = row(rows, "parallel-mem")
        assert batched["peak_tasks_in_flight"] < unbatched["peak_tasks_in_flight"], \
            (batched["peak_tasks_in_flight"], unbatched["peak_tasks_in_flight"])
        assert batched["result_digest"] == unbatched["result_digest"]
