"""Secure verification over a secret-shared forwarding table.

Every function takes an :class:`~seagull.engine.Engine` and a
:class:`~seagull.fib.SharedFib`, performs a sequence of batched multiplications
fixed by public sizes only, and opens nothing but masked zero tests. The
result is a :class:`Verdict` carrying the boolean and the operation counts.

Node arguments that are public to the session (destination, query endpoints)
are plain indices; an AS's own update arrives as shared one-hot vectors.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .engine import Engine
from .fib import SharedFib
from .field import ObliviousTrace
from .oblivious import oblivious_read, public_column, scatter_or, unit_vector

FIXED = "fixed-round"
EARLY = "early-exit"
DEFAULT_HOP_BOUND = 15
DEFAULT_WAYPOINT_BUDGET = 100


class QueryRejected(Exception):
    """A query refused before any secure operation ran (distinct from False)."""


@dataclass
class Verdict:
    check: str
    result: bool
    rounds_executed: int
    trace: ObliviousTrace
    mode: str = FIXED
    session: str = ""
    details: dict = field(default_factory=dict)

    def record(self) -> dict:
        return {"session": self.session, "check": self.check, "result": bool(self.result),
                "rounds": self.rounds_executed, "mults": self.trace.multiplications,
                "openings": self.trace.openings, "messages": self.trace.messages,
                "mode": self.mode}

    def to_json(self) -> str:
        return json.dumps(self.record(), sort_keys=True, separators=(",", ":"))


@dataclass
class HopBound:
    value: int = DEFAULT_HOP_BOUND

    def __post_init__(self):
        if self.value < 1:
            raise ValueError("hop bound must be >= 1")


def _bound(b) -> int:
    return HopBound(int(b.value if isinstance(b, HopBound) else b)).value


class _Meter:
    def __init__(self, engine):
        self.engine = engine
        self.start = engine.transcript.trace.copy()

    def delta(self) -> ObliviousTrace:
        return self.engine.transcript.trace - self.start


# ------------------------------------------------------------ loop freedom

def loop_free_rounds(n: int, cap: int | None = None) -> int:
    """Scan count in fixed-round mode: enough for any tree on ``n`` nodes."""
    full = max(n - 1, 0)
    return full if cap is None else min(full, cap)


def is_loop_free(engine: Engine, fib: SharedFib, d: int | None = None, *,
                 bound: int | None = None, mode: str = FIXED, revisit_guard: bool = True,
                 observer=None) -> Verdict:
    """Secure BFS from the destination over the table's reversed edges.

    Each scan marks every source whose next hop is already marked (a whole
    frontier per scan). The verdict is the masked test ``sum(V) == n``.

    ``bound`` caps the number of scans (default ``n - 1``, the deepest
    possible tree). In ``early-exit`` mode a frontier-emptiness bit is opened
    after each scan, leaking the depth. ``revisit_guard=False`` drops the
    ``1 - V[src]`` factor: with one row per source there are no cross edges,
    so the verdict is unchanged.
    """
    if mode not in (FIXED, EARLY):
        raise ValueError(f"unknown mode {mode!r}")
    n = fib.n
    d = fib.destination_index if d is None else d
    meter = _Meter(engine)
    V = engine.public(unit_vector(d, n))
    limit = loop_free_rounds(n, bound)
    cols = np.stack([fib.dst, fib.src], axis=1) if revisit_guard else fib.dst
    rounds = 0
    while rounds < limit:
        rounds += 1
        if revisit_guard:
            reads = oblivious_read(engine, V, cols)          # (slots, 2, rows)
            b = engine.mul(reads[:, 0], engine.one_minus(reads[:, 1]))
        else:
            b = oblivious_read(engine, V, cols)
        V_next = scatter_or(engine, V, fib.src, b)
        if observer is not None:
            observer(rounds, V_next)
        if mode == EARLY:
            grown = engine.sub(engine.sum(V_next), engine.sum(V))
            V = V_next
            if engine.is_zero(grown, kind="frontier"):
                break
        else:
            V = V_next
    ok = engine.is_zero(engine.add_public(engine.sum(V), -n))
    return Verdict("loop_free", ok, rounds, meter.delta(), mode)


# ------------------------------------------------------------ updates

def apply_update(engine: Engine, fib: SharedFib, upd_src: np.ndarray, upd_dst: np.ndarray,
                 append: bool = False) -> SharedFib:
    """Replace the next hop of the row whose source equals ``upd_src``.

    Every row is rewritten as ``dst + m * (upd_dst - dst)`` with the match bit
    ``m = <src, upd_src>``. ``append`` adds a fresh row instead (a new AS), which
    changes the public row count.
    """
    if append:
        return SharedFib(np.concatenate([fib.src, upd_src[:, None, :]], axis=1),
                         np.concatenate([fib.dst, upd_dst[:, None, :]], axis=1),
                         fib.n, fib.destination_index)
    m = oblivious_read(engine, upd_src, fib.src)             # (slots, rows)
    delta = engine.sub(upd_dst[:, None, :], fib.dst)
    dst = engine.add(fib.dst, engine.mul(m[..., None], delta))
    return SharedFib(fib.src, dst, fib.n, fib.destination_index)


def _walk(engine: Engine, fib: SharedFib, current: np.ndarray, steps: int, targets: list[int]):
    """Follow next hops ``steps`` times; count visits of each public target.

    The first target is absorbing: its column is cleared after every count
    (a local linear map since the index is public), so the walk halts there.
    """
    def visit(cur, hits):
        hits = [engine.add(h, public_column(cur, t)) for h, t in zip(hits, targets)]
        cur = cur.copy()
        cur[..., targets[0]] = 0
        return cur, hits

    zero = np.zeros(current.shape[:1], dtype=np.uint64)
    current, hits = visit(current, [zero] * len(targets))
    for _ in range(steps):
        m = oblivious_read(engine, current, fib.src)         # (slots, rows)
        current, hits = visit(engine.sum(engine.mul(m[..., None], fib.dst), axis=-2), hits)
    return hits


def incremental_check(engine: Engine, fib: SharedFib, upd_src: np.ndarray, upd_dst: np.ndarray,
                      d: int | None = None, bound=DEFAULT_HOP_BOUND) -> Verdict:
    """Would the update keep the graph loop-free?

    Builds the hypothetical table (nothing is committed; it is returned in
    ``details["table"]`` for the caller to adopt) and walks from the updating
    AS for ``bound`` hops. True iff the destination is reached.
    """
    d = fib.destination_index if d is None else d
    steps = _bound(bound)
    meter = _Meter(engine)
    hyp = apply_update(engine, fib, upd_src, upd_dst)
    (reached,) = _walk(engine, hyp, upd_src, steps, [d])
    ok = not engine.is_zero(reached)
    return Verdict("incremental", ok, steps, meter.delta(), FIXED, details={"table": hyp})


def check_reachability(engine: Engine, fib: SharedFib, s: int, d: int | None = None,
                       bound=DEFAULT_HOP_BOUND) -> Verdict:
    d = fib.destination_index if d is None else d
    steps = _bound(bound)
    meter = _Meter(engine)
    (reached,) = _walk(engine, fib, engine.public(unit_vector(s, fib.n)), steps, [d])
    ok = not engine.is_zero(reached)
    return Verdict("reachability", ok, steps, meter.delta(), FIXED)


class WaypointBudget:
    """Per (principal, destination) quota of waypoint queries; 0 disables them."""

    def __init__(self, limit: int = DEFAULT_WAYPOINT_BUDGET):
        if limit < 0:
            raise ValueError("budget limit must be >= 0")
        self.limit = limit
        self.used: dict[tuple, int] = {}

    def remaining(self, principal, destination) -> int:
        return self.limit - self.used.get((principal, destination), 0)

    def charge(self, principal, destination):
        if self.remaining(principal, destination) <= 0:
            raise QueryRejected(
                "waypoint queries disabled" if self.limit == 0 else
                f"waypoint budget exhausted for {principal!r} -> {destination!r}")
        self.used[(principal, destination)] = self.used.get((principal, destination), 0) + 1


def check_waypoint(engine: Engine, fib: SharedFib, s: int, d: int | None, w: int,
                   bound=DEFAULT_HOP_BOUND, budget: WaypointBudget | None = None,
                   principal=None) -> Verdict:
    """True iff the walk from ``s`` reaches ``d`` and passes ``w`` on the way."""
    d = fib.destination_index if d is None else d
    if budget is not None:
        budget.charge(principal, d)
    steps = _bound(bound)
    meter = _Meter(engine)
    reached, hit = _walk(engine, fib, engine.public(unit_vector(s, fib.n)), steps, [d, w])
    ok = not engine.is_zero(engine.mul(reached, hit))
    return Verdict("waypoint", ok, steps, meter.delta(), FIXED)


def check_origin_uniqueness(engine: Engine, fib: SharedFib, registry: np.ndarray) -> Verdict:
    """Exactly one loopback row, and its AS is the registered owner.

    Opens ``count == 0`` and ``count == 1``; the registry comparison is opened
    only when the origin is unique.
    """
    meter = _Meter(engine)
    loop_bits = engine.sum(engine.mul(fib.src, fib.dst), axis=-1)      # (slots, rows)
    count = engine.sum(loop_bits, axis=-1)
    none = engine.is_zero(count)
    unique = engine.is_zero(engine.add_public(count, -1))
    authorized = False
    if unique:
        origin = engine.sum(engine.mul(loop_bits[..., None], fib.src), axis=-2)
        match = engine.sum(engine.mul(origin, registry), axis=-1)
        authorized = engine.is_zero(engine.add_public(match, -1))
    ok = bool(unique and authorized)
    details = {"origins": "0" if none else ("1" if unique else ">1"),
               "hijack": not none and not unique, "authorized": bool(authorized)}
    return Verdict("origin", ok, 1, meter.delta(), FIXED, details=details)


# ------------------------------------------------------------ closed forms

class _Tally:
    def __init__(self, t):
        self.t = t
        self.tr = ObliviousTrace()
        self.triples = 0
        self.masks = 0

    def mul(self, size):
        if size:
            self.triples += size
            self.tr.multiplications += size
            self.tr.openings += 2 * size
            self.tr.rounds += 1
            self.tr.messages += self.t * (self.t - 1)

    def zero_test(self, size=1):
        self.masks += size
        self.tr.multiplications += size
        self.tr.openings += 2 * size
        self.tr.rounds += 2
        self.tr.messages += 2 * self.t * (self.t - 1)


def _tally(check, n, rows, t, bound, mode, revisit_guard, rounds_executed, origin_unique) -> _Tally:
    k = _Tally(t)
    if check == "loop_free":
        R = loop_free_rounds(n, bound) if mode == FIXED else rounds_executed
        if R is None:
            raise ValueError("early-exit trace needs rounds_executed")
        for _ in range(R):
            if revisit_guard:
                k.mul(2 * rows * n)
                k.mul(rows)
            else:
                k.mul(rows * n)
            k.mul(rows * n)
            k.mul(n)
            if mode == EARLY:
                k.zero_test()
        k.zero_test()
    elif check in ("reachability", "waypoint", "incremental"):
        steps = DEFAULT_HOP_BOUND if bound is None else bound
        if check == "incremental":
            k.mul(rows * n)
            k.mul(rows * n)
        for _ in range(steps):
            k.mul(rows * n)
            k.mul(rows * n)
        if check == "waypoint":
            k.mul(1)
        k.zero_test()
    elif check == "origin":
        k.mul(rows * n)
        k.zero_test()
        k.zero_test()
        if origin_unique:
            k.mul(rows * n)
            k.mul(n)
            k.zero_test()
    else:
        raise ValueError(f"unknown check {check!r}")
    return k


def expected_trace(check: str, n: int, rows: int, *, t: int = 3, bound: int | None = None,
                   mode: str = FIXED, revisit_guard: bool = True,
                   rounds_executed: int | None = None, origin_unique: bool = True) -> ObliviousTrace:
    """Operation counts a check must produce, from public sizes alone.

    ``rounds_executed`` is needed only for early-exit loop checks (it is the
    declared leakage of that mode); ``origin_unique`` only for the origin check.
    """
    return _tally(check, n, rows, t, bound, mode, revisit_guard, rounds_executed, origin_unique).tr


def required_preprocessing(check: str, n: int, rows: int, *, bound: int | None = None,
                           mode: str = FIXED, revisit_guard: bool = True) -> tuple[int, int]:
    """``(triples, masks)`` sufficient for one run, worst case over secret data."""
    if mode == EARLY and check == "loop_free":
        k = _tally(check, n, rows, 3, bound, EARLY, revisit_guard, loop_free_rounds(n, bound), True)
    else:
        k = _tally(check, n, rows, 3, bound, mode, revisit_guard, None, True)
    return k.triples, k.masks
