"""Protocol execution context shared by all secure algorithms.

An engine value is a ``uint64`` array whose axis 0 indexes the share slots the
caller holds: all ``t`` of them in :class:`LocalEngine` (single-process
simulation), exactly one in a networked party
(:class:`seagull.runtime.party.PartyEngine`). Linear operations are local;
``mul`` and ``is_zero`` consume dealer material and open masked values through
``_open``, which is the only place a subclass talks to other parties.
"""
from __future__ import annotations

import numpy as np

from . import _kernels as K
from .field import (InvalidOperandsError, Preprocessing, Dealer, ShareSet, Transcript,
                    to_field)

#: columns per fused Beaver pass in the local engine (keeps the working set in cache)
CHUNK = 16384


class Engine:
    t: int
    slots: int
    holds_party0: bool
    transcript: Transcript

    # -- subclass hooks
    def _triples(self, n):  # -> (a, b, c) each (slots, n)
        raise NotImplementedError

    def _masks(self, n):  # -> (r, a, c) each (slots, n)
        raise NotImplementedError

    def _open(self, kind, local_parts, multiplications=0):
        """Open a list of ``(slots, N)`` local arrays; return their public sums."""
        raise NotImplementedError

    # -- linear, communication-free
    def public(self, value) -> np.ndarray:
        v = to_field(value)
        out = np.zeros((self.slots,) + v.shape, dtype=np.uint64)
        if self.holds_party0:
            out[0] = v
        return out

    def add(self, x, y):
        return K.addmod(x, y)

    def sub(self, x, y):
        return K.submod(x, y)

    def neg(self, x):
        return K.negmod(x)

    def scale(self, x, c):
        return K.mulmod(to_field(c), x)

    def add_public(self, x, c):
        out = np.array(x, dtype=np.uint64, copy=True)
        if self.holds_party0:
            out[0] = K.addmod(out[0], to_field(c))
        return out

    def one_minus(self, x):
        return self.add_public(self.neg(x), 1)

    def sum(self, x, axis=-1):
        axis = axis if axis < 0 else axis + 1
        return K.summod(x, axis)

    # -- interactive
    def mul(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=np.uint64), np.asarray(y, dtype=np.uint64))
        if x.shape[0] != self.slots:
            raise InvalidOperandsError(f"expected {self.slots} share slots, got {x.shape[0]}")
        shape = x.shape
        n = int(np.prod(shape[1:], dtype=np.int64))
        if n == 0:
            return np.zeros(shape, dtype=np.uint64)
        xf = np.ascontiguousarray(x).reshape(self.slots, n)
        yf = np.ascontiguousarray(y).reshape(self.slots, n)
        return self._mul_flat(xf, yf).reshape(shape)

    def _mul_flat(self, x, y):
        a, b, c = self._triples(x.shape[1])
        d, e = self._open("beaver", [K.submod(x, a), K.submod(y, b)], multiplications=x.shape[1])
        return K.beaver_finish(d, e, a, b, c, self.holds_party0)

    def is_zero(self, x, kind="zero_test"):
        """Masked zero test of an engine value; ``bool`` (or bool array)."""
        x = np.asarray(x, dtype=np.uint64)
        shape = x.shape[1:]
        n = int(np.prod(shape, dtype=np.int64))
        xf = x.reshape(self.slots, n)
        r, a, c = self._masks(n)
        (d,) = self._open("mask", [K.submod(xf, a)])
        zero = np.zeros(n, dtype=np.uint64)
        rx_local = K.beaver_finish(d, zero, a, r, c, False)
        (rx,) = self._open(kind, [rx_local], multiplications=n)
        res = (rx == 0).reshape(shape)
        return bool(res) if res.ndim == 0 else res


class LocalEngine(Engine):
    """All ``t`` parties simulated in one process over full share arrays."""

    def __init__(self, t: int = 3, pool: Preprocessing | None = None, seed=None,
                 transcript: Transcript | None = None):
        self.t = t
        self.slots = t
        self.holds_party0 = True
        self.pool = pool if pool is not None else Preprocessing(Dealer(t, seed))
        self.transcript = transcript if transcript is not None else Transcript(t)

    def _triples(self, n):
        return self.pool.take_triple_arrays(n)

    def _masks(self, n):
        return self.pool.take_mask_arrays(n)

    def _open(self, kind, local_parts, multiplications=0):
        opened = [K.summod(p, 0) for p in local_parts]
        self.transcript.record(kind, opened, multiplications)
        return opened

    def _mul_flat(self, x, y):
        n = x.shape[1]
        if n <= CHUNK:
            return super()._mul_flat(x, y)
        # same arithmetic as the base class, fused per chunk; still one opening round
        if self.pool.remaining()[0] < n:
            self.pool.take_triple_arrays(n)  # raises before anything is opened
        z = np.empty_like(x)
        ds, es = [], []
        for s in range(0, n, CHUNK):
            sl = slice(s, s + CHUNK)
            a, b, c = self._triples(min(CHUNK, n - s))
            d = K.diff_sum(x[:, sl], a)
            e = K.diff_sum(y[:, sl], b)
            z[:, sl] = K.beaver_finish(d, e, a, b, c, True)
            ds.append(d)
            es.append(e)
        self.transcript.record("beaver", [np.concatenate(ds), np.concatenate(es)], multiplications=n)
        return z

    # global-view conveniences
    def share(self, value, rng) -> np.ndarray:
        from .field import share
        return share(value, self.t, rng).shares

    def reveal(self, x):
        """Test helper: reconstruct without recording (never used by protocols)."""
        out = K.summod(np.asarray(x, dtype=np.uint64), 0)
        return out

    def as_shareset(self, x) -> ShareSet:
        return ShareSet(x, self.t)
