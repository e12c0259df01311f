"""Plaintext ground truth: six loop detectors, path walks, instance generators
and the loop-detection benchmark.

A forwarding graph is loop-free when every AS in its index map reaches the
destination by following next hops. All six detectors decide exactly that, by
different routes, and must always agree.
"""
from __future__ import annotations

import csv
import io
import statistics
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fib import CannotInjectError, ForwardingGraph, inject_loop

ALGORITHMS = ("bfs", "dfs", "topological", "tarjan", "dsu", "johnson")
DEFAULT_HOP_BOUND = 15


def _nodes(fib: ForwardingGraph) -> list[int]:
    return list(fib.index_map)


def _children(fib: ForwardingGraph) -> dict[int, list[int]]:
    ch: dict[int, list[int]] = {}
    for s, h in fib.entries:
        if s != h:
            ch.setdefault(h, []).append(s)
    return ch


def _every_source_forwards(fib: ForwardingGraph) -> bool:
    hops = fib.next_hop()
    return all(v in hops for v in fib.index_map if v != fib.destination)


def unreached_bfs(fib: ForwardingGraph) -> set[int]:
    """Nodes not discovered by reverse BFS from the destination.

    Each iteration takes a whole frontier: every node whose next hop was
    discovered in the previous iteration.
    """
    ch = _children(fib)
    seen = {fib.destination}
    frontier = [fib.destination]
    while frontier:
        nxt = []
        for u in frontier:
            nxt.extend(ch.get(u, ()))
        frontier = nxt
        seen.update(nxt)
    return set(fib.index_map) - seen


def _bfs(fib):
    return not unreached_bfs(fib)


def _dfs(fib):
    ch = _children(fib)
    seen = {fib.destination}
    stack = [fib.destination]
    while stack:
        for c in ch.get(stack.pop(), ()):
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return len(seen) == len(fib.index_map)


def _topological(fib):
    if not _every_source_forwards(fib):
        return False
    indeg = {v: 0 for v in fib.index_map}
    out: dict[int, int] = {}
    for s, h in fib.entries:
        if s == h == fib.destination:
            continue
        out[s] = h
        indeg[h] += 1
    q = deque(v for v, k in indeg.items() if k == 0)
    done = 0
    while q:
        v = q.popleft()
        done += 1
        h = out.get(v)
        if h is not None:
            indeg[h] -= 1
            if indeg[h] == 0:
                q.append(h)
    return done == len(indeg)


def tarjan_scc(nodes: Sequence[int], succ: Callable[[int], Sequence[int]]) -> list[list[int]]:
    """Strongly connected components, iterative Tarjan."""
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ(root)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ(w))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
    return comps


def _tarjan(fib):
    if not _every_source_forwards(fib):
        return False
    hops = fib.next_hop()
    for s, h in hops.items():
        if s == h and s != fib.destination:
            return False
    succ = lambda v: (hops[v],) if v in hops and hops[v] != v else ()  # noqa: E731
    return all(len(c) == 1 for c in tarjan_scc(_nodes(fib), succ))


class DisjointSet:
    def __init__(self, items):
        self.parent = {x: x for x in items}
        self.size = {x: 1 for x in items}
        self.count = len(self.parent)

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.count -= 1
        return True


def _dsu(fib):
    # at most one out-edge per node and none at the destination, so a single
    # undirected component forces exactly n-1 tree edges
    ds = DisjointSet(fib.index_map)
    for s, h in fib.entries:
        if s != h:
            ds.union(s, h)
    return ds.count == 1


def johnson_cycles(nodes: Sequence[int], succ: Callable[[int], Sequence[int]],
                   first_only: bool = False) -> list[list[int]]:
    """Elementary circuits (Johnson 1975), iterative; self-loops included.

    Strong components are computed once and then only for what remains of a
    component after its least vertex has been exhausted.
    """
    cycles: list[list[int]] = []
    for v in nodes:
        if v in succ(v):
            cycles.append([v])
            if first_only:
                return cycles

    def nontrivial(members):
        inside = set(members)
        return [c for c in tarjan_scc(sorted(members), lambda v: [w for w in succ(v) if w in inside and w != v])
                if len(c) > 1]

    work = nontrivial(nodes)
    while work:
        comp = set(work.pop())
        s = min(comp)
        nbrs = lambda v: [w for w in succ(v) if w in comp and w != v]  # noqa: E731
        blocked = {s}
        bmap: dict[int, set[int]] = {}
        path = [s]
        stack = [(s, iter(nbrs(s)))]
        closed = [False]

        def unblock(u):
            todo = [u]
            while todo:
                x = todo.pop()
                if x in blocked:
                    blocked.discard(x)
                    todo.extend(bmap.pop(x, ()))

        while stack:
            v, it = stack[-1]
            w = next(it, None)
            if w is not None:
                if w == s:
                    cycles.append(list(path))
                    if first_only:
                        return cycles
                    closed[-1] = True
                elif w not in blocked:
                    path.append(w)
                    blocked.add(w)
                    stack.append((w, iter(nbrs(w))))
                    closed.append(False)
                continue
            stack.pop()
            found = closed.pop()
            if found:
                unblock(v)
            else:
                for x in nbrs(v):
                    bmap.setdefault(x, set()).add(v)
            path.pop()
            if closed:
                closed[-1] = closed[-1] or found
        work.extend(nontrivial(comp - {s}))
    return cycles


def _johnson(fib, first_only=True):
    if not _every_source_forwards(fib):
        return False
    hops = fib.next_hop()
    succ = lambda v: (hops[v],) if v in hops and not (v == hops[v] == fib.destination) else ()  # noqa: E731
    return not johnson_cycles(_nodes(fib), succ, first_only=first_only)


_DISPATCH = {"bfs": _bfs, "dfs": _dfs, "topological": _topological,
             "tarjan": _tarjan, "dsu": _dsu, "johnson": _johnson}


def loop_free_oracle(fib: ForwardingGraph, algorithm: str = "bfs") -> bool:
    try:
        fn = _DISPATCH[algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}") from None
    return fn(fib)


# -------------------------------------------------------------- path walks

def walk_oracle(fib: ForwardingGraph, s: int, d: int | None = None,
                bound: int = DEFAULT_HOP_BOUND) -> tuple[bool, list[int]]:
    """Follow next hops from ``s`` for at most ``bound`` steps."""
    d = fib.destination if d is None else d
    hops = fib.next_hop()
    path = [s]
    cur = s
    while cur != d and len(path) <= bound:
        nxt = hops.get(cur)
        if nxt is None:
            break
        cur = nxt
        path.append(cur)
    return cur == d, path


def waypoint_oracle(fib, s, d, w, bound=DEFAULT_HOP_BOUND) -> bool:
    reached, path = walk_oracle(fib, s, d, bound)
    return reached and w in path


def origin_oracle(fib: ForwardingGraph, registry_owner: int) -> bool:
    origins = [s for s, h in fib.entries if s == h]
    return len(origins) == 1 and origins[0] == registry_owner


# -------------------------------------------------------------- generators

@dataclass
class Instance:
    fib: ForwardingGraph
    looped: bool
    cycle: frozenset = frozenset()
    shape: str = ""


def _random_asns(rng: np.random.Generator, n: int) -> list[int]:
    picked: set[int] = set()
    while len(picked) < n:
        picked.update(int(x) for x in rng.integers(1, 1 << 32, size=n - len(picked)))
    return list(picked)


def _tree_parents(n: int, shape: str, rng: np.random.Generator) -> list[int]:
    """``parent[i]`` for nodes ``1..n-1``; node 0 is the root."""
    parent = [-1] * n
    if shape == "chain":
        for i in range(1, n):
            parent[i] = i - 1
    elif shape == "star":
        for i in range(1, n):
            parent[i] = 0
    elif shape == "caida-like":
        # preferential attachment (weight 1 + children): wide, shallow, heavy-tailed
        # degrees. Each node sits in ``slots`` once per unit of weight.
        slots = [0]
        draws = rng.random(n)
        for i in range(1, n):
            j = slots[int(draws[i] * len(slots))]
            parent[i] = j
            slots.append(j)
            slots.append(i)
    elif shape == "random":
        for i in range(1, n):
            parent[i] = int(rng.integers(i))
    else:
        raise ValueError(f"unknown shape {shape!r}")
    return parent


def random_tree_fib(n: int, shape: str, rng: np.random.Generator) -> ForwardingGraph:
    asns = _random_asns(rng, n)
    parent = _tree_parents(n, shape, rng)
    entries = [(asns[i], asns[parent[i]]) for i in range(1, n)]
    order = rng.permutation(len(entries))
    return ForwardingGraph(asns[0], tuple(entries[i] for i in order))


def generate_instances(count: int, n_range=(2, 200), loop_probability: float = 0.5,
                       shape: str = "caida-like", entropy: np.random.Generator | None = None,
                       shapes: Sequence[str] | None = None) -> list[Instance]:
    """Random labelled forwarding graphs.

    ``shape`` is one of chain, star, caida-like, random or ``mixed``; with a
    probability of ``loop_probability`` one next hop is rewritten into its own
    subtree. Labels come from the BFS oracle, never from the generator.
    """
    rng = entropy if entropy is not None else np.random.default_rng()
    lo, hi = n_range
    if lo < 2:
        raise ValueError("need n >= 2")
    pool = list(shapes) if shapes else (["chain", "star", "caida-like", "random"] if shape == "mixed" else [shape])
    out = []
    for _ in range(count):
        n = int(rng.integers(lo, hi + 1))
        sh = pool[int(rng.integers(len(pool)))]
        fib = random_tree_fib(n, sh, rng)
        cycle: frozenset = frozenset()
        if rng.random() < loop_probability:
            try:
                fib, cycle = inject_loop(fib, rng)
            except CannotInjectError:
                pass
        out.append(Instance(fib, not loop_free_oracle(fib, "bfs"), cycle, sh))
    return out


def depth(fib: ForwardingGraph) -> int:
    """Longest hop count to the destination (loop-free graphs)."""
    hops = fib.next_hop()
    memo = {fib.destination: 0}

    def dist(v):
        chain = []
        while v not in memo:
            chain.append(v)
            v = hops[v]
        base = memo[v]
        for k, u in enumerate(reversed(chain), start=1):
            memo[u] = base + k
        return memo[chain[0]] if chain else base

    return max(dist(v) for v in fib.index_map)


# -------------------------------------------------------------- benchmark

@dataclass
class BenchmarkRow:
    edge_count: int
    millis: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)

    @property
    def agree(self) -> bool:
        return len(set(self.verdicts.values())) <= 1

    @property
    def loop_free(self) -> bool | None:
        vals = set(self.verdicts.values())
        return vals.pop() if len(vals) == 1 else None


def run_benchmark(graphs: Sequence[ForwardingGraph], repetitions: int = 5,
                  algorithms: Sequence[str] = ALGORITHMS, full_johnson: bool = False) -> list[BenchmarkRow]:
    """Time each detector ``repetitions`` times per graph; report mean milliseconds."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    rows = []
    for g in graphs:
        row = BenchmarkRow(len(g.entries))
        for alg in algorithms:
            fn = (lambda f: _johnson(f, first_only=False)) if (alg == "johnson" and full_johnson) else _DISPATCH[alg]
            times = []
            verdict = None
            for _ in range(repetitions):
                t0 = time.perf_counter()
                verdict = fn(g)
                times.append((time.perf_counter() - t0) * 1000.0)
            row.millis[alg] = statistics.fmean(times)
            row.verdicts[alg] = verdict
        rows.append(row)
    return rows


_COLUMNS = ("# Edges", "BFS", "DFS", "Topology", "Tarjan's", "DSU", "Johnson")


def report_csv(rows: Sequence[BenchmarkRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("edges",) + ALGORITHMS + ("loop_free", "agree"))
    for r in rows:
        w.writerow([r.edge_count] + [f"{r.millis[a]:.3f}" for a in ALGORITHMS] + [r.loop_free, r.agree])
    return buf.getvalue()


def report_table(rows: Sequence[BenchmarkRow]) -> str:
    cells = [list(_COLUMNS)]
    for r in rows:
        cells.append([str(r.edge_count)] + [f"{r.millis[a]:.1f}" for a in ALGORITHMS])
    widths = [max(len(row[i]) for row in cells) for i in range(len(_COLUMNS))]
    line = lambda row: "| " + " | ".join(c.rjust(w) for c, w in zip(row, widths)) + " |"  # noqa: E731
    sep = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
    return "\n".join([line(cells[0]), sep] + [line(r) for r in cells[1:]]) + "\n"


BENCH_EDGE_COUNTS = (1384, 5500, 25066, 25089, 25071, 25067, 25079)


def benchmark_scale_graphs(entropy: np.random.Generator, edge_counts: Sequence[int] = BENCH_EDGE_COUNTS,
                  inject_from: int = 2) -> list[ForwardingGraph]:
    """Synthetic forwarding graphs at the benchmark's edge counts.

    Graphs from position ``inject_from`` on get one injected loop (edge count
    unchanged).
    """
    out = []
    for i, m in enumerate(edge_counts):
        fib = random_tree_fib(m + 1, "caida-like", entropy)
        if i >= inject_from:
            fib, _ = inject_loop(fib, entropy)
        out.append(fib)
    return out
