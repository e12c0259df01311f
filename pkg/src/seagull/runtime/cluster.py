"""Session control for a ``t``-party verifier deployment.

The cluster owns the transport, the parties, an offline dealer endpoint and a
client endpoint through which ASes submit shares. Queries on a cluster run one
at a time through a single-worker queue; inside a query the parties run in
their own threads and talk only through the transport.
"""
from __future__ import annotations

import hashlib
import threading
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..field import (Dealer, InsufficientPreprocessingError, InvalidConfigurationError,
                     Preprocessing, ProtocolAbort, Transcript, share)
from ..fib import ForwardingGraph, UnknownDestinationError
from ..oblivious import unit_vector
from ..shareio import make_meta as public_meta, share_fib
from ..verifier import (DEFAULT_HOP_BOUND, DEFAULT_WAYPOINT_BUDGET, EARLY, FIXED,
                        Verdict, WaypointBudget, check_origin_uniqueness, check_reachability,
                        check_waypoint, expected_trace, incremental_check, is_loop_free,
                        required_preprocessing)
from .party import IngestError, Party, StoredFib
from .transport import DEFAULT_TIMEOUT, make_transport
from .wire import Frame, Kind

CHECKS = ("loop_free", "reachability", "waypoint", "origin", "incremental")


class SessionAborted(ProtocolAbort):
    """A query stopped without a verdict (disconnect, missing material, desync)."""


class AuditError(AssertionError):
    pass


@dataclass
class SessionConfig:
    t: int = 3
    mode: str = FIXED
    hop_bound: int = DEFAULT_HOP_BOUND
    budget_limit: int = DEFAULT_WAYPOINT_BUDGET
    loop_bound: int | None = None
    revisit_guard: bool = True

    def __post_init__(self):
        if self.t < 3:
            raise InvalidConfigurationError(f"need at least 3 verifier parties, got t={self.t}")
        if self.hop_bound < 1:
            raise InvalidConfigurationError("hop_bound must be >= 1")
        if self.mode not in (FIXED, EARLY):
            raise InvalidConfigurationError(f"unknown mode {self.mode!r}")
        if self.budget_limit < 0:
            raise InvalidConfigurationError("budget_limit must be >= 0")


def session_id(name: str) -> bytes:
    return hashlib.blake2b(name.encode(), digest_size=16).digest()


@dataclass
class QueryRecord:
    session: str
    check: str
    verdict: Verdict
    transcripts: list
    params: dict = field(default_factory=dict)


class Cluster:
    def __init__(self, config: SessionConfig | None = None, transport: str = "inproc",
                 seed=None, store_root: str | None = None, timeout: float = DEFAULT_TIMEOUT,
                 pool_limit: tuple[int, int] | None = None):
        self.config = config or SessionConfig()
        t = self.config.t
        self.t = t
        self.dealer_ep = t
        self.client_ep = t + 1
        self.transport = make_transport(transport, t + 2, timeout)
        self.parties = [Party(i, t, self.transport, store_root) for i in range(t)]
        self.budget = WaypointBudget(self.config.budget_limit)
        self.pool_limit = pool_limit
        self.history: list[QueryRecord] = []
        self._seeds = np.random.SeedSequence(seed)
        self._queue = ThreadPoolExecutor(max_workers=1, thread_name_prefix="query")
        self.metas: dict[str, dict] = {}
        for p in self.parties:
            for sess, stored in p.store.fibs.items():
                self.metas[sess] = stored.meta

    def close(self):
        self._queue.shutdown(wait=True)
        self.transport.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _rng(self) -> np.random.Generator:
        return np.random.default_rng(self._seeds.spawn(1)[0])

    # ------------------------------------------------------------ ingestion

    def ingest_shares(self, session: str, parts: list[tuple[np.ndarray, np.ndarray]], meta: dict) -> dict:
        """Deliver per-party ``(src, dst)`` share matrices; all-or-nothing."""
        if len(parts) != self.t:
            raise IngestError(f"expected {self.t} share sets, got {len(parts)}")
        sid = session_id(session)
        for i, (src, dst) in enumerate(parts):
            src, dst = np.asarray(src, np.uint64), np.asarray(dst, np.uint64)
            head = [src.shape[0] if src.ndim else 0, src.shape[-1] if src.ndim > 1 else 0]
            payload = np.concatenate([np.array(head, np.uint64), src.ravel(), dst.ravel()])
            self.transport.send(self.client_ep, i, Frame(sid, 0, Kind.SHARE_INGEST, payload))
        dims, errors = [], []
        for p in self.parties:
            try:
                dims.append(p.receive_fib(session, self.client_ep, meta))
            except IngestError as exc:
                errors.append(str(exc))
                dims.append(None)
        expected = (meta["rows"], meta["n"])
        if errors or any(d != expected for d in dims):
            for p in self.parties:
                p.discard_staged(session)
            raise IngestError("rejected ingestion: " + ("; ".join(errors) or
                              f"dimension mismatch {dims} vs metadata {expected}"))
        for p in self.parties:
            p.commit_staged(session)
        meta = self.parties[0].store.get(session).meta
        version = meta["version"]
        self.metas[session] = meta
        return {"session": session, "accepted": True, "rows": expected[0], "n": expected[1],
                "version": version}

    def ingest_fib(self, fib: ForwardingGraph, session: str, entropy: np.random.Generator | None = None) -> dict:
        """Client side: permute, one-hot encode and share a table, then ingest it."""
        rng = entropy if entropy is not None else self._rng()
        meta, parts = share_fib(fib, self.t, rng, session)
        return self.ingest_shares(session, parts, meta)

    # ------------------------------------------------------------ queries

    def enforce_budget(self, principal, check: str, session: str) -> bool:
        """Charge a waypoint query; raises :class:`QueryRejected` when exhausted."""
        if check != "waypoint":
            return True
        self.budget.charge(principal, self.meta(session)["destination"])
        return True

    def meta(self, session: str) -> dict:
        try:
            return self.metas[session]
        except KeyError:
            raise IngestError(f"unknown session {session!r}") from None

    def submit(self, session: str, check: str, principal=None, **args) -> Future:
        return self._queue.submit(self._execute, session, check, principal, args)

    def run_verification(self, session: str, check: str, principal=None, **args) -> Verdict:
        return self.submit(session, check, principal, **args).result()

    def _index(self, meta, asn) -> int:
        try:
            return meta["index_map"].index(asn)
        except ValueError:
            raise UnknownDestinationError(f"AS {asn} not in session universe") from None

    def _execute(self, session: str, check: str, principal, args: dict) -> Verdict:
        if check not in CHECKS:
            raise ValueError(f"unknown check {check!r}")
        meta = self.meta(session)
        n, rows, t = meta["n"], meta["rows"], self.t
        cfg = self.config
        mode = cfg.mode if check == "loop_free" else FIXED
        params: dict = {}
        inputs = None
        if check in ("reachability", "waypoint"):
            d = self._index(meta, args.get("d", meta["destination"]))
            params = {"s": self._index(meta, args["s"]), "d": d}
            if check == "waypoint":
                params["w"] = self._index(meta, args["w"])
        elif check == "incremental":
            src = self._index(meta, args["source"])
            dst = self._index(meta, args["next_hop"])
            if src == meta["destination_index"]:
                raise ValueError("the destination cannot issue an update")
            inputs = np.stack([unit_vector(src, n), unit_vector(dst, n)])
        elif check == "origin":
            inputs = unit_vector(self._index(meta, args["registry_owner"]), n)[None]
        if check == "waypoint":
            self.enforce_budget(principal, check, session)      # before any secure op
        bound = cfg.loop_bound if check == "loop_free" else cfg.hop_bound
        need_t, need_m = required_preprocessing(check, n, rows, bound=bound, mode=mode,
                                                revisit_guard=cfg.revisit_guard)
        give_t, give_m = need_t, need_m
        if self.pool_limit is not None:
            give_t, give_m = min(need_t, self.pool_limit[0]), min(need_m, self.pool_limit[1])
        if give_t < need_t or give_m < need_m:
            raise InsufficientPreprocessingError(
                f"dealer pool {give_t} triples/{give_m} masks < required {need_t}/{need_m}; "
                "aborted before round 1")

        sid = session_id(session)
        dealer_seed, client_seed = self._seeds.spawn(2)
        rng = np.random.default_rng(client_seed)
        pool = Preprocessing(Dealer(t, dealer_seed))
        a, b, c = pool.take_triple_arrays(give_t)
        r, am, cm = pool.take_mask_arrays(give_m) if give_m else (np.empty((t, 0), np.uint64),) * 3
        try:
            for i in range(t):
                payload = np.concatenate([np.array([give_t, give_m], np.uint64),
                                          a[i], b[i], c[i], r[i], am[i], cm[i]])
                self.transport.send(self.dealer_ep, i, Frame(sid, 0, Kind.TRIPLE_DELIVERY, payload))
            if inputs is not None:
                sh = share(inputs, t, rng).shares
                for i in range(t):
                    self.transport.send(self.client_ep, i, Frame(sid, 0, Kind.SHARE_INGEST, sh[i]))
        except ProtocolAbort as exc:
            raise SessionAborted(f"session {session} aborted during delivery: {exc}") from exc

        results: list = [None] * t
        errors: list = [None] * t

        def party_main(i):
            try:
                p = self.parties[i]
                p.receive_pool(self.dealer_ep, need_t, need_m)
                vec = p.receive_vector(self.client_ep, n) if inputs is not None else None
                tr = Transcript(t, keep_digest=True)
                eng = p.engine(sid, tr)
                fib = p.store.get(session).shared()
                if check == "loop_free":
                    v = is_loop_free(eng, fib, bound=cfg.loop_bound, mode=cfg.mode,
                                     revisit_guard=cfg.revisit_guard)
                elif check == "reachability":
                    v = check_reachability(eng, fib, params["s"], params["d"], bound=cfg.hop_bound)
                elif check == "waypoint":
                    v = check_waypoint(eng, fib, params["s"], params["d"], params["w"], bound=cfg.hop_bound)
                elif check == "origin":
                    v = check_origin_uniqueness(eng, fib, vec[0][None])
                else:
                    v = incremental_check(eng, fib, vec[0][None], vec[1][None], bound=cfg.hop_bound)
                # every party announces its verdict; all must agree before anyone outputs
                peers = eng.exchange(Kind.VERDICT, np.array([int(v.result)], dtype=np.uint64))
                if len({int(x[0]) for x in peers}) != 1:
                    raise ProtocolAbort(f"party {i}: verdicts disagree")
                v.session = session
                results[i] = (v, tr)
            except BaseException as exc:  # reported to the controller
                errors[i] = exc

        threads = [threading.Thread(target=party_main, args=(i,), name=f"party{i}") for i in range(t)]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
        failed = [e for e in errors if e is not None]
        if failed:
            first = failed[0]
            if isinstance(first, InsufficientPreprocessingError):
                raise first
            raise SessionAborted(f"session {session} aborted: {first}") from first

        verdicts = [r[0] for r in results]
        records = {v.to_json() for v in verdicts}
        if len(records) != 1:
            raise SessionAborted(f"parties produced different verdict records: {records}")
        verdict = verdicts[0]
        if check == "incremental" and args.get("commit") and verdict.result:
            for p, v in zip(self.parties, verdicts):
                table = v.details["table"]
                old = p.store.get(session)
                p.store.commit(session, StoredFib(old.version + 1, table.src[0], table.dst[0],
                                                   dict(old.meta, version=old.version + 1)))
            self.metas[session] = self.parties[0].store.get(session).meta
        for v in verdicts:
            v.details.pop("table", None)
        params.update(mode=mode, bound=bound, rounds_executed=verdict.rounds_executed,
                      origin_unique=verdict.details.get("origins") == "1")
        self.history.append(QueryRecord(session, check, verdict, [r[1] for r in results], params))
        return verdict

    # ------------------------------------------------------------ audit

    def audit_transcript(self, session: str, strict: bool = True) -> dict:
        """Leakage report for the latest query on ``session``.

        Lists every opening (round, kind, element count) and checks the totals
        against the closed form for the session's public dimensions.
        """
        recs = [q for q in self.history if q.session == session]
        if not recs:
            raise IngestError(f"no completed query on session {session!r}")
        q = recs[-1]
        meta = self.meta(session)
        tr = q.transcripts[0]
        expected = expected_trace(q.check, meta["n"], meta["rows"], t=self.t, bound=q.params["bound"],
                                  mode=q.params["mode"], revisit_guard=self.config.revisit_guard,
                                  rounds_executed=q.params["rounds_executed"],
                                  origin_unique=q.params["origin_unique"])
        same_everywhere = all(x.entries() == tr.entries() for x in q.transcripts)
        report = {
            "session": session, "check": q.check, "mode": q.params["mode"],
            "n": meta["n"], "rows": meta["rows"],
            "openings": [{"round": o.round, "kind": o.kind, "count": o.count} for o in tr.openings],
            "observed": tr.trace.as_dict(), "expected": expected.as_dict(),
            "match": tr.trace == expected and same_everywhere,
        }
        if q.params["mode"] == EARLY:
            report["rounds_executed"] = q.params["rounds_executed"]
        if strict and not report["match"]:
            raise AuditError(f"transcript deviates from closed form: {report['observed']} vs {report['expected']}")
        return report

    def dump_state(self, party: int) -> dict:
        return self.parties[party].dump_state()
