import time

import numpy as np
import pytest

from conftest import DST, PARTIAL_TABLE
from seagull.field import InsufficientPreprocessingError, InvalidConfigurationError, P
from seagull.fib import ForwardingGraph, UnknownDestinationError
from seagull.oracle import random_tree_fib
from seagull.runtime import Cluster, Frame, IngestError, Kind, SessionAborted, SessionConfig, session_id
from seagull.runtime.wire import FrameError, decode
from seagull.shareio import reconstruct_fib, share_fib
from seagull.verifier import EARLY, QueryRejected

SID = session_id("s")


# ---------------------------------------------------------------- wire

def test_frame_roundtrip():
    f = Frame(SID, 7, Kind.OPEN_VALUE, np.array([0, 1, int(P) - 1], np.uint64))
    raw = f.encode()
    assert len(raw) == 4 + 16 + 4 + 1 + 4 + 3 * 8
    g = decode(raw)
    assert (g.session, g.round, g.kind) == (SID, 7, Kind.OPEN_VALUE)
    assert g.payload.tolist() == [0, 1, int(P) - 1]


@pytest.mark.parametrize("mangle", [lambda b: b[:-1], lambda b: b[:3], lambda b: b[:24] + b"\x63" + b[25:]])
def test_frame_errors(mangle):
    raw = Frame(SID, 1, Kind.FLAG, np.arange(3, dtype=np.uint64)).encode()
    with pytest.raises(FrameError):
        decode(mangle(raw))


def test_frame_rejects_floats_and_bad_session():
    with pytest.raises(FrameError):
        Frame(SID, 0, Kind.FLAG, np.array([1.5]))
    with pytest.raises(FrameError):
        Frame(b"short", 0, Kind.FLAG, np.zeros(1, np.uint64))


# ---------------------------------------------------------------- config and ingestion

def test_too_few_parties():
    with pytest.raises(InvalidConfigurationError):
        SessionConfig(t=2)


@pytest.fixture
def cluster():
    with Cluster(seed=11) as c:
        yield c


def test_ingest_partial_table(cluster):
    rep = cluster.ingest_fib(ForwardingGraph(5, PARTIAL_TABLE), "t4")
    assert rep == {"session": "t4", "accepted": True, "rows": 4, "n": 6, "version": 1}
    rep = cluster.ingest_fib(ForwardingGraph(5, PARTIAL_TABLE), "t4")
    assert rep["version"] == 2


def test_ingest_dimension_mismatch_leaves_no_state(cluster):
    fib = ForwardingGraph(5, PARTIAL_TABLE)
    meta, parts = share_fib(fib, 3, np.random.default_rng(0), "bad")
    parts[2] = (np.vstack([parts[2][0], parts[2][0][:1]]), np.vstack([parts[2][1], parts[2][1][:1]]))
    with pytest.raises(IngestError):
        cluster.ingest_shares("bad", parts, meta)
    assert all("bad" not in p.store.fibs and "bad" not in p.staged for p in cluster.parties)
    with pytest.raises(IngestError):
        cluster.run_verification("bad", "loop_free")


def test_party_state_is_uniform(cluster, tree7):
    """Any two parties' shares of a 0/1 matrix look uniform over the field."""
    cluster.ingest_fib(tree7, "f4")
    dumps = [cluster.dump_state(i)["f4"] for i in range(2)]
    vals = np.concatenate([d[k].ravel() for d in dumps for k in ("src", "dst")]).astype(np.float64)
    assert 0.4 < vals.mean() / float(P) < 0.6
    for d in dumps:
        assert set(d) == {"version", "src", "dst", "meta"}
        assert "next_hop" not in str(d["meta"]) and "entries" not in d["meta"]


# ---------------------------------------------------------------- queries

def test_loop_free_verdicts(cluster, tree7, looped7):
    cluster.ingest_fib(tree7, "f4")
    cluster.ingest_fib(looped7, "f6")
    assert cluster.run_verification("f4", "loop_free").result is True
    v = cluster.run_verification("f6", "loop_free")
    assert v.result is False and v.session == "f6"
    assert cluster.audit_transcript("f6")["match"]


def test_incremental_rejected_update_not_applied(cluster, pre_update):
    cluster.ingest_fib(pre_update, "pre")
    v = cluster.run_verification("pre", "incremental", source=6, next_hop=1, commit=True)
    assert v.result is False
    assert cluster.meta("pre")["version"] == 1
    ok = cluster.run_verification("pre", "incremental", source=6, next_hop=DST, commit=True)
    assert ok.result is True and cluster.meta("pre")["version"] == 2
    parts = [(s["pre"]["src"], s["pre"]["dst"]) for s in (cluster.dump_state(i) for i in range(3))]
    assert dict(reconstruct_fib(cluster.meta("pre"), parts).entries)[6] == DST


def test_incremental_rejects_destination_as_source(cluster, tree7):
    cluster.ingest_fib(tree7, "f4")
    with pytest.raises(ValueError):
        cluster.run_verification("f4", "incremental", source=DST, next_hop=1)


def test_queue_preserves_submission_order(cluster, tree7, looped7):
    cluster.ingest_fib(tree7, "f4")
    cluster.ingest_fib(looped7, "f6")
    futs = [cluster.submit(s, "loop_free") for s in ("f4", "f6", "f4")]
    assert [f.result().result for f in futs] == [True, False, True]
    assert [q.session for q in cluster.history] == ["f4", "f6", "f4"]


def test_waypoint_budget_per_destination():
    with Cluster(SessionConfig(budget_limit=2), seed=1) as c:
        c.ingest_fib(ForwardingGraph(DST, ((1, 3), (3, 6), (6, 7), (2, 7))), "w")
        for _ in range(2):
            assert c.run_verification("w", "waypoint", principal="as9", s=1, w=6).result is True
        n_hist = len(c.history)
        with pytest.raises(QueryRejected):
            c.run_verification("w", "waypoint", principal="as9", s=1, w=6)
        assert len(c.history) == n_hist
        # reachability is not metered
        assert c.run_verification("w", "reachability", principal="as9", s=2).result is True


def test_zero_budget_disables_waypoint(tree7):
    with Cluster(SessionConfig(budget_limit=0), seed=1) as c:
        c.ingest_fib(tree7, "f4")
        with pytest.raises(QueryRejected, match="disabled"):
            c.run_verification("f4", "waypoint", s=1, w=6)


def test_unknown_as(cluster, tree7):
    cluster.ingest_fib(tree7, "f4")
    with pytest.raises(UnknownDestinationError):
        cluster.run_verification("f4", "reachability", s=99)


def test_origin(cluster):
    cluster.ingest_fib(ForwardingGraph(DST, ((7, 7), (3, 3), (1, 7))), "o")
    v = cluster.run_verification("o", "origin", registry_owner=DST)
    assert v.result is False and v.details["hijack"]
    rep = cluster.audit_transcript("o")
    assert rep["match"] and rep["check"] == "origin"


# ---------------------------------------------------------------- audit

def _report(fib, seed, check="loop_free", **kw):
    with Cluster(seed=seed) as c:
        c.ingest_fib(fib, "a")
        c.run_verification("a", check, **kw)
        return c.audit_transcript("a")


def test_audit_depends_only_on_dimensions(rng):
    a = random_tree_fib(12, "chain", rng)
    b = random_tree_fib(12, "star", rng)
    b = ForwardingGraph(b.destination, b.entries[:-1] + ((b.entries[-1][0], b.entries[-1][0]),))
    ra, rb = _report(a, 1), _report(b, 2)
    assert ra["match"] and rb["match"]
    assert {k: v for k, v in ra.items() if k != "session"} == {k: v for k, v in rb.items() if k != "session"}
    assert all(o["kind"] in ("beaver", "mask", "zero_test") for o in ra["openings"])


def test_audit_early_exit_reports_rounds(rng):
    fib = random_tree_fib(20, "star", rng)
    with Cluster(SessionConfig(mode=EARLY), seed=3) as c:
        c.ingest_fib(fib, "e")
        v = c.run_verification("e", "loop_free")
        rep = c.audit_transcript("e")
    assert rep["match"] and rep["rounds_executed"] == v.rounds_executed == 2
    assert sum(o["kind"] == "frontier" for o in rep["openings"]) > 0


# ---------------------------------------------------------------- failures

def test_pool_limit_aborts_before_round_one(tree7):
    with Cluster(seed=1, pool_limit=(10, 10)) as c:
        c.ingest_fib(tree7, "f4")
        with pytest.raises(InsufficientPreprocessingError, match="before round 1"):
            c.run_verification("f4", "loop_free")
        assert c.history == []


@pytest.mark.parametrize("transport", ["inproc", "socket"])
def test_disconnect_aborts(transport, tree7):
    with Cluster(seed=1, transport=transport, timeout=3.0) as c:
        c.ingest_fib(tree7, "f4")
        c.transport.disconnect(2)
        t0 = time.monotonic()
        with pytest.raises(SessionAborted):
            c.run_verification("f4", "loop_free")
        assert time.monotonic() - t0 < 30
        assert c.history == []


def test_store_persists_across_restart(tmp_path, looped7):
    with Cluster(seed=1, store_root=str(tmp_path)) as c:
        c.ingest_fib(looped7, "f6")
    with Cluster(seed=2, store_root=str(tmp_path)) as c:
        assert c.meta("f6")["version"] == 1
        assert c.run_verification("f6", "loop_free").result is False


# ---------------------------------------------------------------- transports

def test_transports_agree(tree7, pre_update):
    out = {}
    for kind in ("inproc", "socket"):
        with Cluster(seed=5, transport=kind) as c:
            c.ingest_fib(tree7, "f4", entropy=np.random.default_rng(9))
            c.ingest_fib(pre_update, "pre", entropy=np.random.default_rng(9))
            vs = [c.run_verification("f4", "loop_free"),
                  c.run_verification("f4", "waypoint", s=1, w=6),
                  c.run_verification("pre", "incremental", source=6, next_hop=1)]
            out[kind] = ([v.to_json() for v in vs], [[e["digest"] for e in q.transcripts[0].entries()] for q in c.history])
    assert out["inproc"] == out["socket"]
