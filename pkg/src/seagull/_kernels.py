"""Field kernels mod the Mersenne prime 2**61 - 1.

Every kernel has a numba ``@njit`` body and a pure-numpy body with the same
signature. ``SEAGULL_BACKEND`` picks one at import time:

    SEAGULL_BACKEND=numba   force numba (error if it cannot be imported)
    SEAGULL_BACKEND=numpy   force the numpy fallback
    SEAGULL_BACKEND=auto    numba when importable (default)

All arrays are ``uint64`` holding canonical residues in ``[0, P)``. Products
are formed from 32-bit halves so nothing ever overflows 64 bits.
"""
from __future__ import annotations

import functools
import os

import numpy as np

P = (1 << 61) - 1

_P = np.uint64(P)
_LO32 = np.uint64(0xFFFFFFFF)
_LO29 = np.uint64((1 << 29) - 1)
_S3 = np.uint64(3)
_S29 = np.uint64(29)
_S32 = np.uint64(32)
_S61 = np.uint64(61)
_ZERO = np.uint64(0)


# ---------------------------------------------------------------- numpy path

def _wrapping(fn):
    # uint64 wraparound is intended here; numpy only warns about it for scalars
    @functools.wraps(fn)
    def inner(*args):
        with np.errstate(over="ignore"):
            return fn(*args)
    return inner


@_wrapping
def _np_fold(x):
    x = (x & _P) + (x >> _S61)
    return np.where(x >= _P, x - _P, x)


@_wrapping
def np_mulmod(a, b):
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    ah, al = a >> _S32, a & _LO32
    bh, bl = b >> _S32, b & _LO32
    mid = ah * bl + al * bh
    ll = al * bl
    x = ((ah * bh) << _S3) + (mid >> _S29) + ((mid & _LO29) << _S32) + (ll & _P) + (ll >> _S61)
    return _np_fold(x)


@_wrapping
def np_addmod(a, b):
    s = np.asarray(a, dtype=np.uint64) + np.asarray(b, dtype=np.uint64)
    return np.where(s >= _P, s - _P, s)


@_wrapping
def np_submod(a, b):
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    return np.where(a >= b, a - b, a + (_P - b))


@_wrapping
def np_summod(x, axis):
    """Sum of residues along ``axis``, reduced mod P (exact for < 2**32 terms)."""
    x = np.asarray(x, dtype=np.uint64)
    lo = np.sum(x & _LO32, axis=axis, dtype=np.uint64)
    hi = np.sum(x >> _S32, axis=axis, dtype=np.uint64)
    return np_addmod(_np_fold(lo), np_mulmod(_np_fold(hi), np.uint64(1 << 32)))


@_wrapping
def np_diff_sum(x, a):
    """``sum_i (x[i] - a[i])`` over the leading slot axis of two ``(slots, N)`` arrays."""
    return np_summod(np_submod(x, a), 0)


@_wrapping
def np_deal_triples(raw, t):
    """Turn ``(3t-1, N)`` uniform residues into shares of ``(a, b, a*b)``.

    Rows ``0..t-1`` are the shares of ``a``, rows ``t..2t-1`` the shares of
    ``b``, rows ``2t..3t-2`` the first ``t-1`` shares of ``c``; the last share of
    ``c`` is solved for.
    """
    a_sh = raw[:t]
    b_sh = raw[t:2 * t]
    c = np_mulmod(np_summod(a_sh, 0), np_summod(b_sh, 0))
    c_sh = np.empty_like(a_sh)
    c_sh[:t - 1] = raw[2 * t:3 * t - 1]
    c_sh[t - 1] = np_submod(c, np_summod(raw[2 * t:3 * t - 1], 0))
    return np.ascontiguousarray(a_sh), np.ascontiguousarray(b_sh), c_sh


@_wrapping
def np_beaver_finish(d, e, a, b, c, holds_party0):
    """Local share of ``x*y`` given opened ``d = x-a``, ``e = y-b``.

    ``a, b, c`` are ``(slots, N)``; ``d, e`` are ``(N,)``. The public ``d*e``
    term is added to slot 0 when that slot belongs to party 0.
    """
    z = np_addmod(c, np_addmod(np_mulmod(d, b), np_mulmod(e, a)))
    if holds_party0:
        z[0] = np_addmod(z[0], np_mulmod(d, e))
    return z


# ---------------------------------------------------------------- numba path

def _build_numba():
    from numba import njit

    @njit(cache=True, inline="always")
    def _fold(x):
        x = (x & _P) + (x >> _S61)
        return x - _P * np.uint64(x >= _P)

    @njit(cache=True, inline="always")
    def _mul(a, b):
        ah = a >> _S32
        al = a & _LO32
        bh = b >> _S32
        bl = b & _LO32
        mid = ah * bl + al * bh
        ll = al * bl
        x = ((ah * bh) << _S3) + (mid >> _S29) + ((mid & _LO29) << _S32) + (ll & _P) + (ll >> _S61)
        return _fold(x)

    @njit(cache=True, inline="always")
    def _add(a, b):
        s = a + b
        return s - _P * np.uint64(s >= _P)

    @njit(cache=True, inline="always")
    def _sub(a, b):
        return a + _P * np.uint64(a < b) - b

    @njit(cache=True)
    def mulmod_flat(a, b, out):
        for i in range(a.size):
            out[i] = _mul(a[i], b[i])

    @njit(cache=True)
    def summod_rows(x, out):
        # x is (k, N); sums over k
        k, n = x.shape
        for j in range(n):
            out[j] = x[0, j]
        for i in range(1, k):
            for j in range(n):
                out[j] = _add(out[j], x[i, j])

    @njit(cache=True)
    def diff_sum_flat(x, a, out):
        slots, n = x.shape
        for j in range(n):
            s = _ZERO
            for i in range(slots):
                s = _add(s, _sub(x[i, j], a[i, j]))
            out[j] = s

    @njit(cache=True)
    def deal_flat(raw, t, a_sh, b_sh, c_sh):
        n = raw.shape[1]
        for j in range(n):
            a = _ZERO
            b = _ZERO
            for i in range(t):
                a_sh[i, j] = raw[i, j]
                b_sh[i, j] = raw[t + i, j]
                a = _add(a, raw[i, j])
                b = _add(b, raw[t + i, j])
            c = _mul(a, b)
            for i in range(t - 1):
                r = raw[2 * t + i, j]
                c_sh[i, j] = r
                c = _sub(c, r)
            c_sh[t - 1, j] = c

    @njit(cache=True)
    def finish_flat(d, e, a, b, c, holds_party0, z):
        slots, n = a.shape
        for j in range(n):
            dj = d[j]
            ej = e[j]
            for i in range(slots):
                z[i, j] = _add(c[i, j], _add(_mul(dj, b[i, j]), _mul(ej, a[i, j])))
            if holds_party0:
                z[0, j] = _add(z[0, j], _mul(dj, ej))

    def nb_mulmod(a, b):
        a, b = np.broadcast_arrays(np.asarray(a, dtype=np.uint64), np.asarray(b, dtype=np.uint64))
        a = np.ascontiguousarray(a)
        b = np.ascontiguousarray(b)
        out = np.empty(a.shape, dtype=np.uint64)
        mulmod_flat(a.reshape(-1), b.reshape(-1), out.reshape(-1))
        return out

    def nb_summod(x, axis):
        x = np.moveaxis(np.asarray(x, dtype=np.uint64), axis, 0)
        shape = x.shape[1:]
        flat = np.ascontiguousarray(x).reshape(x.shape[0], -1)
        out = np.empty(flat.shape[1], dtype=np.uint64)
        if flat.shape[0] == 0:
            out[:] = 0
        else:
            summod_rows(flat, out)
        return out.reshape(shape)

    def nb_diff_sum(x, a):
        x = np.ascontiguousarray(x, dtype=np.uint64)
        out = np.empty(x.shape[1], dtype=np.uint64)
        diff_sum_flat(x, np.ascontiguousarray(a, dtype=np.uint64), out)
        return out

    def nb_deal_triples(raw, t):
        raw = np.ascontiguousarray(raw, dtype=np.uint64)
        n = raw.shape[1]
        a_sh = np.empty((t, n), dtype=np.uint64)
        b_sh = np.empty((t, n), dtype=np.uint64)
        c_sh = np.empty((t, n), dtype=np.uint64)
        deal_flat(raw, t, a_sh, b_sh, c_sh)
        return a_sh, b_sh, c_sh

    def nb_beaver_finish(d, e, a, b, c, holds_party0):
        a = np.ascontiguousarray(a)
        z = np.empty(a.shape, dtype=np.uint64)
        finish_flat(np.ascontiguousarray(d), np.ascontiguousarray(e), a,
                    np.ascontiguousarray(b), np.ascontiguousarray(c), bool(holds_party0), z)
        return z

    return nb_mulmod, nb_summod, nb_diff_sum, nb_deal_triples, nb_beaver_finish


def _select():
    choice = os.environ.get("SEAGULL_BACKEND", "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"SEAGULL_BACKEND must be auto, numba or numpy, not {choice!r}")
    if choice != "numpy":
        try:
            return "numba", _build_numba()
        except ImportError:
            if choice == "numba":
                raise
    return "numpy", (np_mulmod, np_summod, np_diff_sum, np_deal_triples, np_beaver_finish)


BACKEND, (mulmod, summod, diff_sum, deal_triples, beaver_finish) = _select()
addmod = np_addmod
submod = np_submod


def negmod(a):
    a = np.asarray(a, dtype=np.uint64)
    return np.where(a == _ZERO, a, _P - a)
