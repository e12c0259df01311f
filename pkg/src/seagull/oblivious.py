"""Data-oblivious access over secret-shared one-hot encodings.

A node index is never a public array position inside a protocol. It is a
length-``n`` shared 0/1 vector with a single 1, and every read or write touches
all ``n`` components through the same sequence of multiplications. The
resulting :class:`~seagull.field.ObliviousTrace` depends only on ``n`` and the
batch shape.

Shapes below are engine shapes: a leading slot axis, then the value axes.
"""
from __future__ import annotations

import numpy as np

from .engine import Engine
from .field import InvalidOperandsError, ObliviousTrace, ShareSet, to_field

__all__ = [
    "ObliviousTrace",
    "onehot_of_public",
    "oblivious_read",
    "oblivious_conditional_write",
    "scatter_or",
    "frontier_flag",
]

# SharedOneHot and SharedBitVector are engine arrays of shape (slots, ..., n).


class InvalidIndexError(IndexError):
    pass


def unit_vector(index: int, n: int) -> np.ndarray:
    if not 0 <= index < n:
        raise InvalidIndexError(f"index {index} outside [0, {n})")
    v = np.zeros(n, dtype=np.uint64)
    v[index] = 1
    return v


def onehot_of_public(index: int, n: int, t: int) -> ShareSet:
    """One-hot of a public index; party 0 carries it, the others hold zeros."""
    v = unit_vector(index, n)
    sh = np.zeros((t, n), dtype=np.uint64)
    sh[0] = v
    return ShareSet(sh, t)


def _check_len(v, e):
    if v.shape[-1] != e.shape[-1]:
        raise InvalidOperandsError(f"length mismatch: {v.shape[-1]} vs {e.shape[-1]}")


def oblivious_read(engine: Engine, v: np.ndarray, e: np.ndarray) -> np.ndarray:
    """``<v, e>``, i.e. ``v`` at the secret index encoded by ``e``.

    ``e`` may carry leading batch axes (one read per row); each read costs
    exactly ``n`` multiplications.
    """
    _check_len(v, e)
    vb = v.reshape(v.shape[:1] + (1,) * (e.ndim - v.ndim) + v.shape[1:])
    return engine.sum(engine.mul(vb, e), axis=-1)


def oblivious_conditional_write(engine: Engine, v: np.ndarray, e: np.ndarray, bit: np.ndarray) -> np.ndarray:
    """``v[index(e)] |= bit``; ``2n`` multiplications, other positions untouched."""
    _check_len(v, e)
    be = engine.mul(bit[..., None], e)
    bev = engine.mul(be, v)
    return engine.sub(engine.add(v, be), bev)


def scatter_or(engine: Engine, v: np.ndarray, rows: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """OR ``bits[r]`` into ``v`` at every row's secret index, all rows at once.

    ``rows`` is ``(slots, R, n)`` and must encode pairwise distinct indices (a
    forwarding table has one row per source), so the summed indicator is 0/1.
    Costs ``R*n + n`` multiplications in two rounds.
    """
    _check_len(v, rows)
    u = engine.sum(engine.mul(bits[..., None], rows), axis=-2)
    return engine.sub(engine.add(v, u), engine.mul(u, v))


def frontier_flag(engine: Engine, newly_marked: np.ndarray) -> bool:
    """True iff any of the shared 0/1 values is 1; opens only the masked sum."""
    total = engine.sum(newly_marked, axis=-1) if newly_marked.ndim > 1 else newly_marked
    return not engine.is_zero(total, kind="frontier")


def public_column(x: np.ndarray, index: int) -> np.ndarray:
    """Inner product with a public unit vector: a local column pick."""
    return np.ascontiguousarray(x[..., index])


def decode_onehot(values: np.ndarray) -> int | None:
    """Plaintext decode helper for tests: index of the single 1, None for all-zero."""
    values = to_field(values)
    nz = np.flatnonzero(values)
    if len(nz) == 0:
        return None
    if len(nz) != 1 or int(values[nz[0]]) != 1:
        raise ValueError("not a one-hot vector")
    return int(nz[0])
