"""Per-party share files and the public session metadata next to them.

A share directory holds ``meta.json`` (public: dimensions, destination, index
map, party count, version) and one ``party<i>.shares`` text file per party.
Each share file starts with a JSON header line followed by one line per matrix
row: ``src <row> v_0 ... v_{n-1}`` or ``dst <row> ...`` with decimal residues.
The format is plain text so a fixed seed gives byte-identical files.
"""
from __future__ import annotations

import json
import os

import numpy as np

from .field import share
from .fib import EncodingError, ForwardingGraph, decode_rows, onehot_rows
from . import _kernels as K

META = "meta.json"


class ShareFileError(ValueError):
    pass


def share_path(directory: str, party: int) -> str:
    return os.path.join(directory, f"party{party}.shares")


def make_meta(fib: ForwardingGraph, t: int, session: str, version: int = 1) -> dict:
    return {"session": session, "t": t, "n": fib.n, "rows": len(fib.entries),
            "destination": fib.destination, "destination_index": fib.index_map[fib.destination],
            "index_map": fib.asns, "version": version}


def share_fib(fib: ForwardingGraph, t: int, rng: np.random.Generator, session: str = "default"):
    """``(meta, [(src_i, dst_i) for each party])`` with rows in random order."""
    order = rng.permutation(len(fib.entries))
    src, dst = onehot_rows(fib, order)
    s_sh = share(src, t, rng).shares
    d_sh = share(dst, t, rng).shares
    return make_meta(fib, t, session), [(s_sh[i], d_sh[i]) for i in range(t)]


def _dump_matrix(tag: str, m: np.ndarray) -> list[str]:
    return [f"{tag} {r} " + " ".join(map(str, row.tolist())) for r, row in enumerate(m)]


def write_share_dir(directory: str, meta: dict, parts) -> list[str]:
    os.makedirs(directory, exist_ok=True)
    paths = []
    with open(os.path.join(directory, META), "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=1)
        fh.write("\n")
    for i, (src, dst) in enumerate(parts):
        header = {"party": i, "session": meta["session"], "version": meta["version"],
                  "rows": int(src.shape[0]), "n": int(src.shape[1])}
        lines = [json.dumps(header, sort_keys=True)] + _dump_matrix("src", src) + _dump_matrix("dst", dst)
        path = share_path(directory, i)
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        paths.append(path)
    return paths


def read_meta(directory: str) -> dict:
    try:
        with open(os.path.join(directory, META)) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ShareFileError(f"{directory}: no {META}") from None
    except json.JSONDecodeError as exc:
        raise ShareFileError(f"{directory}: bad {META}: {exc}") from None


def read_share_file(path: str) -> tuple[dict, np.ndarray, np.ndarray]:
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except FileNotFoundError:
        raise ShareFileError(f"missing share file {path}") from None
    if not lines:
        raise ShareFileError(f"{path}: empty")
    try:
        header = json.loads(lines[0])
        rows, n = int(header["rows"]), int(header["n"])
    except (ValueError, KeyError) as exc:
        raise ShareFileError(f"{path}: bad header ({exc})") from None
    mats = {"src": np.zeros((rows, n), np.uint64), "dst": np.zeros((rows, n), np.uint64)}
    seen = set()
    for lineno, line in enumerate(lines[1:], start=2):
        tok = line.split()
        if not tok:
            continue
        try:
            tag, r = tok[0], int(tok[1])
            vals = [int(x) for x in tok[2:]]
            if tag not in mats or not 0 <= r < rows or len(vals) != n or (tag, r) in seen:
                raise ValueError
            if any(not 0 <= v < int(K.P) for v in vals):
                raise ValueError
        except (ValueError, IndexError):
            raise ShareFileError(f"{path}:{lineno}: malformed share row") from None
        mats[tag][r] = np.array(vals, dtype=np.uint64)
        seen.add((tag, r))
    if len(seen) != 2 * rows:
        raise ShareFileError(f"{path}: expected {2 * rows} rows, found {len(seen)}")
    return header, mats["src"], mats["dst"]


def read_share_dir(directory: str) -> tuple[dict, list[tuple[np.ndarray, np.ndarray]]]:
    meta = read_meta(directory)
    parts = []
    for i in range(meta["t"]):
        _, src, dst = read_share_file(share_path(directory, i))
        parts.append((src, dst))
    return meta, parts


def reconstruct_fib(meta: dict, parts) -> ForwardingGraph:
    """Recover the table from all parties' shares (test and audit use only)."""
    if len(parts) != meta["t"]:
        raise ShareFileError(f"need all {meta['t']} share files, got {len(parts)}")
    shapes = {p[0].shape for p in parts} | {p[1].shape for p in parts}
    if len(shapes) != 1:
        raise ShareFileError(f"share dimensions differ: {sorted(shapes)}")
    src = K.summod(np.stack([p[0] for p in parts]), 0)
    dst = K.summod(np.stack([p[1] for p in parts]), 0)
    imap = {a: i for i, a in enumerate(meta["index_map"])}
    try:
        rows = decode_rows(src, dst, imap)
    except EncodingError as exc:
        raise ShareFileError(f"shares do not reconstruct to a table: {exc}") from None
    return ForwardingGraph(meta["destination"], tuple(sorted(rows)), imap)
