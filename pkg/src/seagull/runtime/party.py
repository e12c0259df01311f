"""One verifier party: its share store, its slice of dealer material and the
engine that runs the secure checks over a single share slot.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels as K
from ..engine import Engine
from ..field import InsufficientPreprocessingError, ProtocolAbort, Transcript
from ..fib import SharedFib
from .transport import Transport
from .wire import Frame, Kind


class IngestError(ValueError):
    pass


class _Slice:
    """Sequential reader over this party's row of a dealer delivery."""

    def __init__(self, cols: tuple[np.ndarray, ...]):
        self.cols = cols
        self.off = 0

    @property
    def left(self) -> int:
        return self.cols[0].shape[0] - self.off

    def take(self, n, what):
        if n > self.left:
            raise InsufficientPreprocessingError(f"needed {n} {what}, {self.left} left")
        out = tuple(c[None, self.off:self.off + n] for c in self.cols)
        self.off += n
        return out


class PartyEngine(Engine):
    """Engine holding exactly one share slot; openings go over the transport."""

    def __init__(self, index: int, t: int, transport: Transport, session: bytes,
                 triples: _Slice, masks: _Slice, transcript: Transcript | None = None,
                 first_round: int = 1):
        self.index = index
        self.t = t
        self.slots = 1
        self.holds_party0 = index == 0
        self.transport = transport
        self.session = session
        self._tri = triples
        self._msk = masks
        self.transcript = transcript if transcript is not None else Transcript(t)
        self.round = first_round - 1

    def _triples(self, n):
        return self._tri.take(n, "triples")

    def _masks(self, n):
        return self._msk.take(n, "masks")

    def exchange(self, kind: Kind, local: np.ndarray) -> list[np.ndarray]:
        """Send ``local`` to every peer and collect theirs, in party order."""
        self.round += 1
        frame = Frame(self.session, self.round, kind, local)
        for j in range(self.t):
            if j != self.index:
                self.transport.send(self.index, j, frame)
        parts = []
        for j in range(self.t):
            if j == self.index:
                parts.append(np.ascontiguousarray(local, dtype=np.uint64).ravel())
                continue
            got = self.transport.recv(self.index, j)
            if got.session != self.session or got.round != self.round or got.kind != kind:
                raise ProtocolAbort(f"party {self.index}: out-of-step frame from {j} "
                                    f"(round {got.round}, expected {self.round})")
            parts.append(got.payload)
        return parts

    def _open(self, kind, local_parts, multiplications=0):
        sizes = [p.shape[1] for p in local_parts]
        flat = np.concatenate([p[0] for p in local_parts]) if local_parts else np.empty(0, np.uint64)
        wire_kind = Kind.FLAG if kind == "frontier" else Kind.OPEN_VALUE
        total = K.summod(np.stack(self.exchange(wire_kind, flat)), 0)
        opened = np.split(total, np.cumsum(sizes)[:-1])
        self.transcript.record(kind, opened, multiplications)
        return opened


@dataclass
class StoredFib:
    version: int
    src: np.ndarray      # (rows, n) this party's shares
    dst: np.ndarray
    meta: dict

    @property
    def dims(self) -> tuple[int, int]:
        return self.src.shape[0], self.src.shape[1]

    def shared(self) -> SharedFib:
        return SharedFib(self.src[None], self.dst[None], self.meta["n"], self.meta["destination_index"])


@dataclass
class PartyStore:
    """Share store keyed by ``(session, version)``; only the latest is kept.

    With ``root`` set, each committed version is written to
    ``root/party<i>/<session>/v<version>.npz`` and reloaded on construction.
    """

    index: int
    root: str | None = None
    fibs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.root:
            base = os.path.join(self.root, f"party{self.index}")
            if os.path.isdir(base):
                for sess in sorted(os.listdir(base)):
                    files = sorted(os.listdir(os.path.join(base, sess)),
                                   key=lambda f: int(f[1:].split(".")[0]))
                    if files:
                        with np.load(os.path.join(base, sess, files[-1]), allow_pickle=False) as z:
                            meta = json.loads(str(z["meta"]))
                            self.fibs[sess] = StoredFib(int(z["version"]), z["src"], z["dst"], meta)

    def commit(self, session: str, stored: StoredFib):
        self.fibs[session] = stored
        if self.root:
            d = os.path.join(self.root, f"party{self.index}", session)
            os.makedirs(d, exist_ok=True)
            for f in os.listdir(d):
                os.remove(os.path.join(d, f))
            np.savez(os.path.join(d, f"v{stored.version}.npz"), src=stored.src, dst=stored.dst,
                     version=stored.version, meta=json.dumps(stored.meta, sort_keys=True))

    def get(self, session: str) -> StoredFib:
        try:
            return self.fibs[session]
        except KeyError:
            raise IngestError(f"party {self.index}: no shares for session {session}") from None


class Party:
    def __init__(self, index: int, t: int, transport: Transport, store_root: str | None = None):
        self.index = index
        self.t = t
        self.transport = transport
        self.store = PartyStore(index, store_root)
        self.staged: dict[str, StoredFib] = {}
        self.pool: tuple[_Slice, _Slice] | None = None

    # -- ingestion (two-phase: stage, then commit once every party agrees on dims)
    def receive_fib(self, session: str, client: int, meta: dict) -> tuple[int, int]:
        f = self.transport.recv(self.index, client)
        if f.kind != Kind.SHARE_INGEST:
            raise IngestError(f"expected SHARE_INGEST, got {f.kind.name}")
        rows, n = int(f.payload[0]), int(f.payload[1])
        body = f.payload[2:]
        if body.size != 2 * rows * n:
            raise IngestError(f"party {self.index}: payload does not match {rows}x{n}")
        src = body[:rows * n].reshape(rows, n)
        dst = body[rows * n:].reshape(rows, n)
        prev = self.store.fibs.get(session)
        version = (prev.version + 1) if prev else 1
        self.staged[session] = StoredFib(version, src, dst, dict(meta, version=version))
        return rows, n

    def commit_staged(self, session: str):
        self.store.commit(session, self.staged.pop(session))

    def discard_staged(self, session: str):
        self.staged.pop(session, None)

    def receive_vector(self, client: int, n: int) -> np.ndarray:
        f = self.transport.recv(self.index, client)
        if f.kind != Kind.SHARE_INGEST or f.payload.size % n:
            raise IngestError("malformed query input")
        return f.payload.reshape(-1, n)

    # -- dealer material
    def receive_pool(self, dealer: int, triples: int, masks: int):
        f = self.transport.recv(self.index, dealer)
        if f.kind != Kind.TRIPLE_DELIVERY:
            raise ProtocolAbort(f"expected TRIPLE_DELIVERY, got {f.kind.name}")
        nt, nm = int(f.payload[0]), int(f.payload[1])
        body = f.payload[2:]
        if nt < triples or nm < masks:
            raise InsufficientPreprocessingError(
                f"party {self.index}: pool has {nt} triples/{nm} masks, query needs {triples}/{masks}")
        tri = tuple(body[k * nt:(k + 1) * nt] for k in range(3))
        msk = tuple(body[3 * nt + k * nm:3 * nt + (k + 1) * nm] for k in range(3))
        self.pool = (_Slice(tri), _Slice(msk))

    def engine(self, session_id: bytes, transcript: Transcript) -> PartyEngine:
        if self.pool is None:
            raise InsufficientPreprocessingError("no dealer pool delivered")
        return PartyEngine(self.index, self.t, self.transport, session_id, *self.pool,
                           transcript=transcript)

    def dump_state(self) -> dict:
        """Everything this party persists: its shares and public metadata."""
        return {sess: {"version": s.version, "src": s.src.copy(), "dst": s.dst.copy(),
                       "meta": dict(s.meta)} for sess, s in self.store.fibs.items()}
