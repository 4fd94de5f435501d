"""Skeleton-to-CPDAG orientation: v-structures from sepsets, then closure.

Both passes are deterministic scans so the pipeline output is a pure
function of the skeleton and separating sets.  Orientation is cheap next to
CI testing and runs single-threaded.
"""

from __future__ import annotations

from itertools import combinations

from .graphs import Cpdag, Dag, GraphError, SepsetMap, SkeletonGraph, d_separated


def orient_v_structures(skel: SkeletonGraph, seps: SepsetMap) -> Cpdag:
    """Orient every unshielded triple i - k - j as i -> k <- j when k is
    outside the recorded separating set of (i, j).

    Triples are scanned in ascending (i, k, j) order with i < j; when two
    triples disagree about an edge, the later write wins.  Triples whose
    pair has no recorded sepset are skipped.
    """
    for a, b in seps.pairs():
        if skel.has_edge(a, b):
            raise GraphError(
                f"sepset recorded for present edge {a} - {b}; "
                "sepsets must only cover removed edges"
            )
    g = Cpdag.from_skeleton(skel)
    triples = []
    for k in range(skel.p):
        nb = skel.neighbors(k)
        for i, j in combinations(nb, 2):
            if not skel.has_edge(i, j):
                triples.append((i, k, j))
    for i, k, j in sorted(triples):
        sepset = seps.get(i, j)
        if sepset is None:
            continue
        if k not in sepset:
            g.orient(i, k)
            g.orient(j, k)
    return g


def _r1_applies(g: Cpdag, a: int, b: int) -> bool:
    # some c -> a with c, b non-adjacent
    return any(not g.has_edge(c, b) for c in g.parents(a))


def _r2_applies(g: Cpdag, a: int, b: int) -> bool:
    # chain a -> c -> b
    return any(g.is_directed(c, b) for c in g.children(a))


def _r3_applies(g: Cpdag, a: int, b: int) -> bool:
    # siblings c, d of a, both pointing at b, mutually non-adjacent
    sibs = [c for c in g.undirected_neighbors(a) if g.is_directed(c, b)]
    for x in range(len(sibs)):
        for y in range(x + 1, len(sibs)):
            if not g.has_edge(sibs[x], sibs[y]):
                return True
    return False


def _r4_applies(g: Cpdag, a: int, b: int) -> bool:
    # sibling c of a with a chain c -> d -> b, a adjacent to d, c and b
    # non-adjacent
    for c in g.undirected_neighbors(a):
        if g.has_edge(c, b):
            continue
        for d in g.children(c):
            if g.is_directed(d, b) and g.has_edge(a, d):
                return True
    return False


def meek_closure(g: Cpdag) -> Cpdag:
    """Apply Meek's four orientation rules until no rule fires.

    Undirected edges are scanned as ordered pairs (a, b) in ascending order;
    the first applicable rule orients a -> b.  The input is not modified.
    """
    out = g.copy()
    changed = True
    while changed:
        changed = False
        for a in range(out.p):
            for b in range(out.p):
                if a == b or not out.is_undirected(a, b):
                    continue
                if (_r1_applies(out, a, b) or _r2_applies(out, a, b)
                        or _r3_applies(out, a, b) or _r4_applies(out, a, b)):
                    out.orient(a, b)
                    changed = True
    return out


def _true_sepset(dag: Dag, i: int, j: int) -> tuple[int, ...]:
    """A d-separating set for a non-adjacent pair of the DAG.

    The parents of whichever endpoint is not an ancestor of the other
    always work (local Markov property); checked with d_separated.
    """
    pa_i = dag.parents[i]
    if j not in pa_i and d_separated(dag, i, j, pa_i):
        return pa_i
    pa_j = dag.parents[j]
    if not d_separated(dag, i, j, pa_j):
        raise GraphError(f"no parent-set separator for non-adjacent pair ({i}, {j})")
    return pa_j


def cpdag_from_dag(dag: Dag) -> Cpdag:
    """The CPDAG of the DAG's Markov equivalence class.

    Runs the orientation pipeline on the DAG's own skeleton with exact
    separating sets derived from d-separation.
    """
    skel = dag.skeleton()
    seps = SepsetMap()
    for i in range(dag.p):
        for j in range(i + 1, dag.p):
            if not skel.has_edge(i, j):
                seps.set(i, j, _true_sepset(dag, i, j))
    return meek_closure(orient_v_structures(skel, seps))
