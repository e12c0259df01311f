"""AS topologies and per-destination forwarding tables, in plaintext.

Covers everything that happens before the verifiers see a single share:
parsing CAIDA-style AS-link lists, BFS forwarding trees, loop injection for
test corpora, table reversal and leaf pruning, and the one-hot encoding that
turns a table into shareable rows.
"""
from __future__ import annotations

import io
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .field import share

MAX_ASN = (1 << 32) - 1


class FibError(ValueError):
    pass


class TopologyParseError(FibError):
    def __init__(self, lineno: int, line: str, reason: str):
        super().__init__(f"line {lineno}: {reason}: {line!r}")
        self.lineno = lineno


class UnknownDestinationError(FibError):
    pass


class CannotInjectError(FibError):
    pass


class EncodingError(FibError):
    pass


@dataclass(frozen=True)
class AsTopology:
    nodes: frozenset
    edges: frozenset  # {(lo, hi)}

    def adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {v: [] for v in self.nodes}
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        for v in adj:
            adj[v].sort()
        return adj

    @classmethod
    def from_edges(cls, pairs: Iterable[tuple[int, int]], nodes: Iterable[int] = ()) -> "AsTopology":
        ns = set(nodes)
        es = set()
        for a, b in pairs:
            if a == b:
                continue
            ns.update((a, b))
            es.add((min(a, b), max(a, b)))
        return cls(frozenset(ns), frozenset(es))


def _asn(tok: str) -> int:
    v = int(tok)
    if not 0 <= v <= MAX_ASN:
        raise ValueError("ASN out of 32-bit range")
    return v


def parse_topology(text: str) -> AsTopology:
    """Parse whitespace-separated ASN pairs; ``#`` lines are comments.

    CAIDA AS-links records (``D a b ...`` / ``I a b ...``) and pipe-separated
    as-rel lines (``a|b|rel``) are accepted too; tokens after the pair are
    ignored. Self-pairs are dropped.
    """
    nodes: set[int] = set()
    edges: set[tuple[int, int]] = set()
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        toks = line.split("|") if "|" in line else line.split()
        if toks[0] in ("D", "I"):
            toks = toks[1:]
        elif toks[0] in ("M", "T"):
            continue
        if len(toks) < 2:
            raise TopologyParseError(lineno, line, "expected two ASNs")
        try:
            # CAIDA multi-origin sets look like "1_2"; take the first member
            a, b = (_asn(t.strip().split("_")[0].split(",")[0]) for t in toks[:2])
        except ValueError as exc:
            raise TopologyParseError(lineno, line, str(exc)) from None
        nodes.update((a, b))
        if a != b:
            edges.add((min(a, b), max(a, b)))
    return AsTopology(frozenset(nodes), frozenset(edges))


@dataclass(frozen=True)
class ForwardingGraph:
    """Next-hop table for one destination.

    ``index_map`` assigns each AS a public vector position; by default the
    sorted ASNs of every node mentioned (sources, next hops, destination).
    """

    destination: int
    entries: tuple[tuple[int, int], ...]
    index_map: dict = field(default=None, compare=False)

    def __post_init__(self):
        entries = tuple((int(s), int(h)) for s, h in self.entries)
        object.__setattr__(self, "entries", entries)
        seen = set()
        for s, h in entries:
            if s in seen:
                raise FibError(f"AS {s} has more than one next hop")
            if s == self.destination and h != self.destination:
                raise FibError("destination may only carry its own loopback entry")
            seen.add(s)
        if self.index_map is None:
            nodes = {self.destination}
            for s, h in entries:
                nodes.update((s, h))
            object.__setattr__(self, "index_map", {a: i for i, a in enumerate(sorted(nodes))})
        else:
            missing = {a for e in entries for a in e if a not in self.index_map}
            if self.destination not in self.index_map:
                missing.add(self.destination)
            if missing:
                raise EncodingError(f"ASNs missing from index map: {sorted(missing)}")

    @classmethod
    def from_observations(cls, destination: int, observations: Iterable[tuple[int, int]],
                          index_map: dict | None = None) -> "ForwardingGraph":
        """Collapse repeated observations per source; the most recent wins."""
        latest: dict[int, int] = {}
        for s, h in observations:
            latest.pop(s, None)
            latest[s] = h
        return cls(destination, tuple(latest.items()), index_map)

    @property
    def n(self) -> int:
        return len(self.index_map)

    @property
    def asns(self) -> list[int]:
        return sorted(self.index_map, key=self.index_map.__getitem__)

    def next_hop(self) -> dict[int, int]:
        return dict(self.entries)

    def with_update(self, source: int, next_hop: int) -> "ForwardingGraph":
        hops = self.next_hop()
        hops[source] = next_hop
        order = [s for s, _ in self.entries]
        if source not in order:
            order.append(source)
        imap = self.index_map if next_hop in self.index_map and source in self.index_map else None
        return ForwardingGraph(self.destination, tuple((s, hops[s]) for s in order), imap)


@dataclass(frozen=True)
class FibUpdate:
    source: int
    new_next_hop: int


def build_fib(topology: AsTopology, destination: int) -> ForwardingGraph:
    """Shortest-path forwarding tree toward ``destination`` by BFS.

    Every node of the destination's component points at a neighbour one hop
    closer; among several, the smallest ASN.
    """
    if destination not in topology.nodes:
        raise UnknownDestinationError(f"AS {destination} not in topology")
    adj = topology.adjacency()
    dist = {destination: 0}
    frontier = [destination]
    parent: dict[int, int] = {}
    while frontier:
        nxt = []
        for u in frontier:
            for v in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    nxt.append(v)
        for v in nxt:
            parent[v] = min(u for u in adj[v] if dist.get(u) == dist[v] - 1)
        frontier = nxt
    entries = tuple(sorted(parent.items()))
    return ForwardingGraph(destination, entries)


def subtree(fib: ForwardingGraph, node: int) -> set[int]:
    """Nodes whose forwarding path passes through ``node`` (inclusive)."""
    children: dict[int, list[int]] = {}
    for s, h in fib.entries:
        if s != h:
            children.setdefault(h, []).append(s)
    out = {node}
    stack = [node]
    while stack:
        for c in children.get(stack.pop(), ()):
            if c not in out:
                out.add(c)
                stack.append(c)
    return out


def inject_loop(fib: ForwardingGraph, entropy: np.random.Generator,
                source: int | None = None) -> tuple[ForwardingGraph, frozenset]:
    """Point one node's next hop into its own subtree, closing a cycle.

    Returns the rewritten table and the cycle's node set. The rewritten node is
    drawn among nodes that have a descendant; when none has (a star), a node
    is pointed at itself.
    """
    hops = fib.next_hop()
    movable = sorted(s for s in hops if s != fib.destination)
    if not movable:
        raise CannotInjectError("no non-destination entry to rewrite")
    if source is None:
        parents = {h for s, h in fib.entries if s != h}
        deep = [s for s in movable if s in parents]
        pool = deep or movable
        source = pool[int(entropy.integers(len(pool)))]
    elif source not in movable:
        raise CannotInjectError(f"AS {source} has no rewritable entry")
    below = sorted(subtree(fib, source) - {source})
    target = below[int(entropy.integers(len(below)))] if below else source
    cycle = {source}
    v = target
    while v != source:
        cycle.add(v)
        v = hops[v]
    entries = tuple((s, target if s == source else h) for s, h in fib.entries)
    return ForwardingGraph(fib.destination, entries, fib.index_map), frozenset(cycle)


def reverse_fib(fib) -> list[tuple[int, int]]:
    """Swap every ``(source, next_hop)`` to ``(next_hop, source)``, order kept."""
    entries = fib.entries if isinstance(fib, ForwardingGraph) else fib
    return [(h, s) for s, h in entries]


def prune_leaves(reversed_entries: Sequence[tuple[int, int]], iterate: bool = False
                 ) -> tuple[list[tuple[int, int]], int]:
    """Drop reversed entries whose child never appears as a parent.

    Returns ``(pruned_table, removed_count)``. One pass by default; with
    ``iterate`` the rule is applied until nothing changes.
    """
    table = list(reversed_entries)
    removed = 0
    while True:
        parents = {p for p, _ in table}
        kept = [(p, c) for p, c in table if c in parents]
        removed += len(table) - len(kept)
        if len(kept) == len(table) or not iterate:
            return kept, removed
        table = kept


# ------------------------------------------------------------------ encoding

@dataclass
class SharedFib:
    """Secret-shared table: ``src``/``dst`` are ``(slots, rows, n)`` one-hot shares.

    ``n`` and ``destination_index`` are public session metadata.
    """

    src: np.ndarray
    dst: np.ndarray
    n: int
    destination_index: int

    @property
    def rows(self) -> int:
        return self.src.shape[1]

    @property
    def slots(self) -> int:
        return self.src.shape[0]


def onehot_rows(fib: ForwardingGraph, order: Sequence[int] | None = None
                ) -> tuple[np.ndarray, np.ndarray]:
    """Plaintext ``(rows, n)`` one-hot matrices of sources and next hops."""
    n = fib.n
    entries = fib.entries if order is None else [fib.entries[i] for i in order]
    src = np.zeros((len(entries), n), dtype=np.uint64)
    dst = np.zeros((len(entries), n), dtype=np.uint64)
    for r, (s, h) in enumerate(entries):
        try:
            src[r, fib.index_map[s]] = 1
            dst[r, fib.index_map[h]] = 1
        except KeyError as exc:
            raise EncodingError(f"AS {exc.args[0]} not in index map") from None
    return src, dst


def encode_for_sharing(fib: ForwardingGraph, t: int, entropy: np.random.Generator) -> SharedFib:
    """Permute rows, one-hot encode, and additively share both columns."""
    order = entropy.permutation(len(fib.entries))
    src, dst = onehot_rows(fib, order)
    return SharedFib(share(src, t, entropy).shares, share(dst, t, entropy).shares,
                     fib.n, fib.index_map[fib.destination])


def decode_rows(src: np.ndarray, dst: np.ndarray, index_map: dict) -> list[tuple[int, int]]:
    """Inverse of the one-hot encoding on reconstructed matrices."""
    asns = sorted(index_map, key=index_map.__getitem__)
    out = []
    for r in range(src.shape[0]):
        s = np.flatnonzero(src[r])
        h = np.flatnonzero(dst[r])
        if len(s) != 1 or len(h) != 1 or src[r, s[0]] != 1 or dst[r, h[0]] != 1:
            raise EncodingError(f"row {r} is not a pair of one-hot vectors")
        out.append((asns[s[0]], asns[h[0]]))
    return out


# ----------------------------------------------------------------- file I/O

def write_fib_csv(fib: ForwardingGraph) -> str:
    lines = [f"# destination: {fib.destination}", "source_asn,next_hop_asn"]
    lines += [f"{s},{h}" for s, h in fib.entries]
    return "\n".join(lines) + "\n"


def read_fib_csv(text: str) -> ForwardingGraph:
    destination = None
    rows = []
    header_seen = False
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            if key.strip() == "destination":
                destination = _asn(val.strip())
            continue
        if not header_seen:
            if line.replace(" ", "") != "source_asn,next_hop_asn":
                raise FibError(f"line {lineno}: expected header source_asn,next_hop_asn")
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise FibError(f"line {lineno}: expected two columns")
        try:
            rows.append((_asn(parts[0].strip()), _asn(parts[1].strip())))
        except ValueError:
            raise FibError(f"line {lineno}: bad ASN in {line!r}") from None
    if destination is None:
        raise FibError("missing '# destination: <asn>' header")
    return ForwardingGraph.from_observations(destination, rows)


def parse_updates(text: str) -> list[FibUpdate]:
    out = []
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("source_asn"):
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise FibError(f"line {lineno}: expected source_asn,new_next_hop_asn")
        try:
            out.append(FibUpdate(_asn(parts[0].strip()), _asn(parts[1].strip())))
        except ValueError:
            raise FibError(f"line {lineno}: bad ASN in {line!r}") from None
    return out


def reachable_from_destination(destination: int, entries: Iterable[tuple[int, int]]) -> set[int]:
    """Plaintext reverse BFS used by pruning checks; nodes that reach ``destination``."""
    children: dict[int, list[int]] = {}
    for s, h in entries:
        children.setdefault(h, []).append(s)
    seen = {destination}
    q = deque([destination])
    while q:
        for c in children.get(q.popleft(), ()):
            if c not in seen:
                seen.add(c)
                q.append(c)
    return seen
