import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import DST, SAMPLE_TREE, SAMPLE_LINKS, PARTIAL_TABLE, PARTIAL_REVERSED
from seagull.field import reconstruct, ShareSet
from seagull.fib import (CannotInjectError, EncodingError, FibError, ForwardingGraph, FibUpdate,
                         TopologyParseError, UnknownDestinationError, build_fib, decode_rows,
                         encode_for_sharing, inject_loop, onehot_rows, parse_topology, parse_updates,
                         prune_leaves, read_fib_csv, reachable_from_destination, reverse_fib, subtree,
                         write_fib_csv)
from seagull.oracle import loop_free_oracle, random_tree_fib


def test_parse_plain_pairs_and_comments():
    topo = parse_topology("# links\n1 2\n\n  2   3\n")
    assert topo.nodes == {1, 2, 3}
    assert topo.edges == {(1, 2), (2, 3)}


def test_parse_caida_records():
    text = "# comment\nD 10 20 monitor\nI 20 30_31 x\nM 5 6\nT 1\n40|10|-1\n"
    topo = parse_topology(text)
    assert topo.edges == {(10, 20), (20, 30), (10, 40)}


def test_parse_error_reports_line():
    with pytest.raises(TopologyParseError) as exc:
        parse_topology("1 2\nfoo bar\n")
    assert exc.value.lineno == 2


def test_self_pairs_dropped():
    assert parse_topology("4 4\n4 5\n").edges == {(4, 5)}


def test_build_fib_tree7_is_bfs_tree():
    fib = build_fib(parse_topology(SAMPLE_LINKS), DST)
    hops = fib.next_hop()
    # x1 neighbours x6, one hop from Dst, so the shortest-path tree routes x1 -> x6
    assert hops == {1: 6, 2: 5, 3: 6, 4: 5, 5: 7, 6: 7}
    want = dict(SAMPLE_TREE)
    assert {k: v for k, v in hops.items() if k != 1} == {k: v for k, v in want.items() if k not in (1, 7)}
    assert loop_free_oracle(fib)


def test_build_fib_unknown_destination():
    with pytest.raises(UnknownDestinationError):
        build_fib(parse_topology("1 2\n"), 99)


def test_chain_topology_gives_two_rows():
    fib = build_fib(parse_topology("1 2\n2 3\n"), 3)
    assert fib.entries == ((1, 2), (2, 3))


def test_forwarding_graph_validation():
    with pytest.raises(FibError):
        ForwardingGraph(3, ((1, 2), (1, 3)))
    with pytest.raises(FibError):
        ForwardingGraph(3, ((3, 1),))
    with pytest.raises(EncodingError):
        ForwardingGraph(3, ((1, 2),), {1: 0, 3: 1})


def test_most_recent_observation_wins():
    fib = ForwardingGraph.from_observations(9, [(1, 2), (2, 9), (1, 9)])
    assert fib.next_hop() == {1: 9, 2: 9}


def test_index_map_is_sorted_universe():
    fib = ForwardingGraph(DST, PARTIAL_TABLE)
    assert fib.asns == [1, 2, 3, 4, 5, 6, 7]
    assert fib.n == 7


def test_with_update_and_subtree(pre_update):
    assert subtree(pre_update, 6) == {1, 3, 6}
    upd = pre_update.with_update(6, 1)
    assert upd.next_hop()[6] == 1 and not loop_free_oracle(upd)


def test_inject_loop_closes_cycle(rng):
    fib = random_tree_fib(40, "caida-like", rng)
    looped, cycle = inject_loop(fib, rng)
    hops = looped.next_hop()
    assert len(cycle) >= 2
    for v in cycle:
        assert hops[v] in cycle
    assert not loop_free_oracle(looped)
    assert len(looped.entries) == len(fib.entries)


def test_inject_loop_three_node_chain(rng):
    fib = build_fib(parse_topology("1 2\n2 3\n"), 3)
    looped, cycle = inject_loop(fib, rng)
    assert cycle == {1, 2} and not loop_free_oracle(looped)


def test_inject_loop_star_falls_back_to_self_loop(rng):
    fib = random_tree_fib(6, "star", rng)
    looped, cycle = inject_loop(fib, rng)
    (v,) = cycle
    assert looped.next_hop()[v] == v and not loop_free_oracle(looped)


def test_inject_loop_needs_a_source(rng):
    with pytest.raises(CannotInjectError):
        inject_loop(ForwardingGraph(1, ((1, 1),)), rng)


def test_partial_table_reversal_exact():
    assert reverse_fib(ForwardingGraph(5, PARTIAL_TABLE)) == PARTIAL_REVERSED


def test_reversed_pruning():
    pruned, removed = prune_leaves(PARTIAL_REVERSED)
    assert pruned == [(5, 2)] and removed == 3
    assert prune_leaves(PARTIAL_REVERSED, iterate=True) == ([], 4)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 60), st.sampled_from(["chain", "star", "caida-like", "random"]), st.integers(0, 2**32))
def test_pruning_never_drops_an_internal_node(n, shape, seed):
    fib = random_tree_fib(n, shape, np.random.default_rng(seed))
    rev = reverse_fib(fib)
    pruned, removed = prune_leaves(rev)
    parents = {p for p, _ in rev}
    assert {c for _, c in pruned} == {c for _, c in rev if c in parents}
    assert removed == len(rev) - len(pruned)


def test_onehot_encode_decode(rng):
    fib = random_tree_fib(15, "random", rng)
    sf = encode_for_sharing(fib, 3, rng)
    assert sf.src.shape == (3, 14, 15) and sf.rows == 14 and sf.slots == 3
    src = reconstruct(ShareSet(sf.src, 3))
    dst = reconstruct(ShareSet(sf.dst, 3))
    assert sorted(decode_rows(src, dst, fib.index_map)) == sorted(fib.entries)
    plain_src, _ = onehot_rows(fib)
    assert plain_src.sum(axis=1).tolist() == [1] * 14


def test_decode_rejects_bad_rows():
    with pytest.raises(EncodingError):
        decode_rows(np.array([[1, 1]], np.uint64), np.array([[0, 1]], np.uint64), {1: 0, 2: 1})


def test_csv_roundtrip(rng):
    fib = random_tree_fib(12, "caida-like", rng)
    again = read_fib_csv(write_fib_csv(fib))
    assert again.entries == fib.entries and again.destination == fib.destination


@pytest.mark.parametrize("text", ["source_asn,next_hop_asn\n1,2\n", "# destination: 2\nsrc,dst\n1,2\n",
                                  "# destination: 2\nsource_asn,next_hop_asn\n1,x\n"])
def test_csv_errors(text):
    with pytest.raises(FibError):
        read_fib_csv(text)


def test_parse_updates():
    assert parse_updates("# u\nsource_asn,new_next_hop_asn\n6,1\n 3 , 5\n") == [FibUpdate(6, 1), FibUpdate(3, 5)]
    with pytest.raises(FibError):
        parse_updates("6;1\n")


def test_reachable_from_destination(looped7):
    assert reachable_from_destination(DST, looped7.entries) == {2, 4, 5, 7}
