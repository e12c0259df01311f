import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import DST
from seagull.fib import ForwardingGraph, inject_loop
from seagull.oracle import (ALGORITHMS, BENCH_EDGE_COUNTS, BenchmarkRow, depth, generate_instances,
                            johnson_cycles, loop_free_oracle, origin_oracle, random_tree_fib, report_csv,
                            report_table, run_benchmark, benchmark_scale_graphs, tarjan_scc, unreached_bfs,
                            walk_oracle, waypoint_oracle)


@pytest.mark.parametrize("alg", ALGORITHMS)
def test_sample_graphs(alg, tree7, looped7):
    assert loop_free_oracle(tree7, alg) is True
    assert loop_free_oracle(looped7, alg) is False


def test_looped7_unreached(looped7):
    assert unreached_bfs(looped7) == {1, 3, 6}


def test_unknown_algorithm(tree7):
    with pytest.raises(ValueError):
        loop_free_oracle(tree7, "floyd")


def test_sink_without_entry_is_looped():
    # partial table rooted at 5: AS 6 is mentioned but has no next hop
    fib = ForwardingGraph(5, ((1, 2), (3, 6), (2, 5), (4, 5)))
    assert {loop_free_oracle(fib, a) for a in ALGORITHMS} == {False}


def test_six_way_agreement_on_generated(rng):
    for inst in generate_instances(300, (2, 80), 0.5, shape="mixed", entropy=rng):
        verdicts = {loop_free_oracle(inst.fib, a) for a in ALGORITHMS}
        assert verdicts == {not inst.looped}


def _random_digraph(rng, n, m):
    return [(int(a), int(b)) for a, b in rng.integers(0, n, size=(m, 2))]


def test_tarjan_and_johnson_against_networkx(rng):
    for _ in range(150):
        n = int(rng.integers(1, 9))
        edges = _random_digraph(rng, n, int(rng.integers(0, 14)))
        succ = {v: [] for v in range(n)}
        for a, b in edges:
            if b not in succ[a]:
                succ[a].append(b)
        g = nx.DiGraph()
        g.add_nodes_from(range(n))
        g.add_edges_from(edges)
        ours = {frozenset(c) for c in tarjan_scc(list(range(n)), succ.__getitem__)}
        assert ours == {frozenset(c) for c in nx.strongly_connected_components(g)}
        cyc = johnson_cycles(list(range(n)), succ.__getitem__, first_only=False)
        canon = lambda c: frozenset(zip(c, c[1:] + c[:1]))  # noqa: E731
        assert {canon(list(c)) for c in cyc} == {canon(list(c)) for c in nx.simple_cycles(g)}
        first = johnson_cycles(list(range(n)), succ.__getitem__, first_only=True)
        assert bool(first) == bool(cyc)


def test_walk_oracle_examples(tree7, looped7):
    assert walk_oracle(tree7, 1) == (True, [1, 3, 6, DST])
    assert walk_oracle(tree7, DST) == (True, [DST])
    reached, path = walk_oracle(looped7, 1)
    assert not reached and len(path) == 16 and set(path) == {1, 3, 6}


def test_waypoint_and_origin_oracles(tree7):
    assert waypoint_oracle(tree7, 1, DST, 6)
    assert not waypoint_oracle(tree7, 2, DST, 6)
    assert waypoint_oracle(tree7, 2, DST, 2)
    assert origin_oracle(tree7, DST) and not origin_oracle(tree7, 5)
    two = ForwardingGraph(DST, ((7, 7), (3, 3), (1, 7)))
    assert not origin_oracle(two, DST)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 50), st.sampled_from(["chain", "star", "caida-like", "random"]),
       st.booleans(), st.integers(0, 2**32), st.integers(1, 20))
def test_unreached_matches_failed_walks(n, shape, loop, seed, bound):
    rng = np.random.default_rng(seed)
    fib = random_tree_fib(n, shape, rng)
    if loop:
        fib, _ = inject_loop(fib, rng)
    failed = {v for v in fib.index_map if not walk_oracle(fib, v, bound=n)[0]}
    assert unreached_bfs(fib) == failed
    for v in fib.index_map:
        assert len(walk_oracle(fib, v, bound=bound)[1]) <= bound + 1


def test_generator_shapes(rng):
    chain = random_tree_fib(5, "chain", rng)
    assert depth(chain) == 4 and loop_free_oracle(chain)
    assert all(i.looped for i in generate_instances(40, (2, 30), 1.0, shape="mixed", entropy=rng))
    assert not any(i.looped for i in generate_instances(40, (2, 30), 0.0, shape="mixed", entropy=rng))
    with pytest.raises(ValueError):
        generate_instances(1, (1, 3), entropy=rng)


def test_caida_like_is_shallow(rng):
    depths = [depth(random_tree_fib(200, "caida-like", rng)) for _ in range(1000)]
    assert np.mean(depths) < 15


def test_benchmark_rows_and_report(rng):
    assert run_benchmark([], repetitions=5) == []
    graphs = [random_tree_fib(30, "chain", rng), inject_loop(random_tree_fib(30, "random", rng), rng)[0]]
    rows = run_benchmark(graphs, repetitions=3)
    assert [r.edge_count for r in rows] == [29, 29]
    assert all(r.agree for r in rows) and [r.loop_free for r in rows] == [True, False]
    table = report_table(rows)
    assert [c.strip() for c in table.splitlines()[0].strip("|").split("|")] == \
        ["# Edges", "BFS", "DFS", "Topology", "Tarjan's", "DSU", "Johnson"]
    assert report_csv(rows).splitlines()[0] == "edges,bfs,dfs,topological,tarjan,dsu,johnson,loop_free,agree"
    with pytest.raises(ValueError):
        run_benchmark(graphs, repetitions=0)


def test_benchmark_cell_is_mean(monkeypatch):
    import seagull.oracle as O
    ticks = iter([0.0, 0.001, 0.0, 0.003])
    monkeypatch.setattr(O.time, "perf_counter", lambda: next(ticks))
    row = O.run_benchmark([ForwardingGraph(2, ((1, 2),))], repetitions=2, algorithms=("bfs",))[0]
    assert row.millis["bfs"] == pytest.approx(2.0)


def test_disagreeing_row_detected():
    assert not BenchmarkRow(3, {}, {"bfs": True, "dfs": False}).agree


def test_benchmark_scale_graphs(rng):
    graphs = benchmark_scale_graphs(rng)
    assert [len(g.entries) for g in graphs] == list(BENCH_EDGE_COUNTS)
    assert [loop_free_oracle(g) for g in graphs[:2]] == [True, True]
    assert not any(loop_free_oracle(g) for g in graphs[2:])
