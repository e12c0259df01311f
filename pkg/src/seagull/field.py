"""Additive secret sharing over GF(2**61 - 1).

A :class:`ShareSet` stacks the ``t`` party shares of a (possibly array-valued)
secret along axis 0. Everything here is the *global* view used by tests, the
dealer and the share files; protocol code runs against
:class:`seagull.engine.Engine`, which holds only the slots a party owns.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K

P = K.P

#: dealer output is produced in fixed blocks so lazy and bulk draws match
DEALER_BLOCK = 16384


class FieldError(Exception):
    pass


class InvalidConfigurationError(FieldError, ValueError):
    pass


class IncompleteSharesError(FieldError):
    pass


class InvalidOperandsError(FieldError, ValueError):
    pass


class ProtocolAbort(FieldError):
    """The protocol cannot continue; no partial result is released."""


class TripleReuseError(ProtocolAbort):
    pass


class MaskReuseError(ProtocolAbort):
    pass


class InsufficientPreprocessingError(ProtocolAbort):
    pass


def to_field(x) -> np.ndarray:
    """Embed integers (any sign, any size) as canonical residues."""
    if isinstance(x, (int, np.integer)):
        return np.asarray(int(x) % P, dtype=np.uint64)
    arr = np.asarray(x)
    if arr.dtype == np.uint64:
        return arr % np.uint64(P)
    if arr.dtype.kind in "iu":
        return np.mod(arr.astype(np.int64), np.int64(P)).astype(np.uint64)
    return (arr.astype(object) % P).astype(np.uint64)


def uniform_residues(rng: np.random.Generator, shape) -> np.ndarray:
    """Residues in ``[0, P)``; 61 raw bits with the single value ``P`` folded to 0."""
    x = rng.bit_generator.random_raw(shape) >> np.uint64(3)
    x[x == np.uint64(P)] = 0
    return x


def nonzero_residues(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.integers(1, P, size=shape, dtype=np.uint64)


@dataclass(frozen=True, eq=False)
class ShareSet:
    """``shares[i]`` is party ``i``'s share; ``party_count`` is the full ``t``."""

    shares: np.ndarray
    party_count: int = 0

    def __post_init__(self):
        sh = np.asarray(self.shares, dtype=np.uint64)
        object.__setattr__(self, "shares", sh)
        if not self.party_count:
            object.__setattr__(self, "party_count", sh.shape[0])

    @property
    def t(self) -> int:
        return self.party_count

    @property
    def shape(self) -> tuple:
        return self.shares.shape[1:]

    def __len__(self):
        return self.shape[0]

    def __getitem__(self, idx) -> "ShareSet":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return ShareSet(self.shares[(slice(None),) + idx], self.party_count)

    def party(self, i: int) -> np.ndarray:
        return self.shares[i]

    def without(self, *parties: int) -> "ShareSet":
        """Drop the listed parties' shares (what a coalition of the rest holds)."""
        keep = [i for i in range(self.shares.shape[0]) if i not in parties]
        return ShareSet(self.shares[keep], self.party_count)


def share(secret, t: int, entropy: np.random.Generator) -> ShareSet:
    """Split ``secret`` into ``t`` additive shares.

    The first ``t - 1`` shares are uniform; the last one makes the sum come out.
    """
    if t < 2:
        raise InvalidConfigurationError(f"need at least 2 parties, got t={t}")
    s = to_field(secret)
    out = np.empty((t,) + s.shape, dtype=np.uint64)
    out[:t - 1] = uniform_residues(entropy, (t - 1,) + s.shape)
    out[t - 1] = K.submod(s, K.summod(out[:t - 1], 0))
    return ShareSet(out, t)


def reconstruct(s: ShareSet):
    """Sum all shares mod P. Returns an ``int`` for scalar secrets."""
    if s.shares.shape[0] != s.party_count:
        raise IncompleteSharesError(
            f"have {s.shares.shape[0]} of {s.party_count} shares; refusing to guess")
    out = K.summod(s.shares, 0)
    return int(out) if out.ndim == 0 else out


def linear_combine(terms: Iterable[tuple[int, ShareSet]], public_offset: int = 0) -> ShareSet:
    """``offset + sum(c_i * s_i)`` computed share-wise; no communication."""
    terms = list(terms)
    if not terms:
        raise InvalidOperandsError("linear_combine needs at least one term")
    t = terms[0][1].t
    if any(s.t != t or s.shares.shape[0] != t for _, s in terms):
        raise InvalidOperandsError("share sets have different party counts")
    acc = None
    for coef, s in terms:
        part = K.mulmod(to_field(coef), s.shares)
        acc = part if acc is None else K.addmod(acc, part)
    acc = np.array(acc, dtype=np.uint64)
    acc[0] = K.addmod(acc[0], to_field(public_offset))
    return ShareSet(acc, t)


# ------------------------------------------------------------- transcript

@dataclass
class ObliviousTrace:
    """Operation counts of one protocol run: the observable access pattern."""

    multiplications: int = 0
    openings: int = 0
    messages: int = 0
    rounds: int = 0

    def copy(self) -> "ObliviousTrace":
        return ObliviousTrace(self.multiplications, self.openings, self.messages, self.rounds)

    def __sub__(self, other: "ObliviousTrace") -> "ObliviousTrace":
        return ObliviousTrace(self.multiplications - other.multiplications,
                              self.openings - other.openings,
                              self.messages - other.messages,
                              self.rounds - other.rounds)

    def __add__(self, other: "ObliviousTrace") -> "ObliviousTrace":
        return ObliviousTrace(self.multiplications + other.multiplications,
                              self.openings + other.openings,
                              self.messages + other.messages,
                              self.rounds + other.rounds)

    def as_dict(self) -> dict:
        return {"multiplications": self.multiplications, "openings": self.openings,
                "messages": self.messages, "rounds": self.rounds}


@dataclass
class Opening:
    round: int
    kind: str
    count: int
    digest: str | None = None
    values: np.ndarray | None = None


class Transcript:
    """Round log of every value a protocol run opened.

    ``keep_values`` stores the opened arrays (tests); ``keep_digest`` stores a
    BLAKE2 digest per opening, enough to compare two runs byte-for-byte.
    """

    def __init__(self, t: int = 3, keep_values: bool = False, keep_digest: bool = False):
        self.t = t
        self.keep_values = keep_values
        self.keep_digest = keep_digest
        self.trace = ObliviousTrace()
        self.openings: list[Opening] = []

    def record(self, kind: str, values: Sequence[np.ndarray], multiplications: int = 0) -> Opening:
        self.trace.rounds += 1
        self.trace.messages += self.t * (self.t - 1)
        self.trace.multiplications += multiplications
        count = sum(int(np.size(v)) for v in values)
        self.trace.openings += count
        op = Opening(self.trace.rounds, kind, count)
        if self.keep_digest:
            h = hashlib.blake2b(digest_size=16)
            for v in values:
                h.update(np.ascontiguousarray(v, dtype=np.uint64).tobytes())
            op.digest = h.hexdigest()
        if self.keep_values:
            op.values = np.concatenate([np.ravel(v) for v in values]) if values else np.empty(0, np.uint64)
        self.openings.append(op)
        return op

    def entries(self) -> list[dict]:
        return [{"round": o.round, "kind": o.kind, "count": o.count, "digest": o.digest}
                for o in self.openings]


# ------------------------------------------------------- correlated randomness

@dataclass(eq=False)
class BeaverTriple:
    """Shares of ``(a, b, a*b)``; batch-shaped, spent as a unit."""

    a: ShareSet
    b: ShareSet
    c: ShareSet
    spent: bool = field(default=False, compare=False)

    @property
    def shape(self):
        return self.a.shape

    def consume(self):
        if self.spent:
            raise TripleReuseError("Beaver triple already consumed")
        self.spent = True

    def reshape(self, shape) -> "BeaverTriple":
        t = self.a.t
        return BeaverTriple(*(ShareSet(s.shares.reshape((t,) + tuple(shape)), t)
                              for s in (self.a, self.b, self.c)))


@dataclass(eq=False)
class RandomMask:
    """Uniform nonzero ``r`` plus an auxiliary pair ``(a, a*r)`` for forming ``r*x``."""

    r: ShareSet
    a: ShareSet
    c: ShareSet
    spent: bool = field(default=False, compare=False)

    @property
    def shape(self):
        return self.r.shape

    def consume(self):
        if self.spent:
            raise MaskReuseError("random mask already consumed")
        self.spent = True


class Dealer:
    """Offline trusted dealer; distinct from the verifier parties.

    Triples and masks come from independent child streams, each produced in
    :data:`DEALER_BLOCK`-sized blocks, so the sequence does not depend on how
    consumers slice their requests.
    """

    def __init__(self, t: int, seed=None):
        if t < 2:
            raise InvalidConfigurationError(f"need at least 2 parties, got t={t}")
        self.t = t
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        tri, msk = ss.spawn(2)
        self._tri_rng = np.random.default_rng(tri)
        self._msk_rng = np.random.default_rng(msk)

    def triple_block(self, size: int = DEALER_BLOCK) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        raw = uniform_residues(self._tri_rng, (3 * self.t - 1, size))
        return K.deal_triples(raw, self.t)

    def mask_block(self, size: int = DEALER_BLOCK) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        t = self.t
        r = nonzero_residues(self._msk_rng, size)
        r_sh = np.empty((t, size), dtype=np.uint64)
        r_sh[:t - 1] = uniform_residues(self._msk_rng, (t - 1, size))
        r_sh[t - 1] = K.submod(r, K.summod(r_sh[:t - 1], 0))
        # (a, a*r) reuses the triple kernel with r's shares standing in for b
        raw = np.concatenate([uniform_residues(self._msk_rng, (t, size)), r_sh,
                              uniform_residues(self._msk_rng, (t - 1, size))])
        a_sh, _, c_sh = K.deal_triples(raw, t)
        return r_sh, a_sh, c_sh


class _BlockStream:
    def __init__(self, produce):
        self._produce = produce
        self._buf: list[tuple] = []
        self._off = 0

    def take(self, n: int) -> tuple[np.ndarray, ...]:
        parts = []
        while n > 0:
            if not self._buf:
                self._buf.append(self._produce())
                self._off = 0
            blk = self._buf[0]
            width = blk[0].shape[1]
            k = min(n, width - self._off)
            parts.append(tuple(x[:, self._off:self._off + k] for x in blk))
            self._off += k
            n -= k
            if self._off == width:
                self._buf.pop(0)
        if len(parts) == 1:
            return parts[0]
        if not parts:
            return None
        return tuple(np.concatenate(cols, axis=1) for cols in zip(*parts))


class Preprocessing:
    """Metered pool of dealer output for one verification session.

    ``triple_capacity`` / ``mask_capacity`` of ``None`` mean unbounded. Running
    past a finite capacity raises :class:`InsufficientPreprocessingError`.
    """

    def __init__(self, dealer: Dealer, triple_capacity: int | None = None,
                 mask_capacity: int | None = None):
        self.t = dealer.t
        self.triple_capacity = triple_capacity
        self.mask_capacity = mask_capacity
        self.triples_used = 0
        self.masks_used = 0
        self._tri = _BlockStream(dealer.triple_block)
        self._msk = _BlockStream(dealer.mask_block)

    def remaining(self) -> tuple[float, float]:
        tr = float("inf") if self.triple_capacity is None else self.triple_capacity - self.triples_used
        mk = float("inf") if self.mask_capacity is None else self.mask_capacity - self.masks_used
        return tr, mk

    def take_triple_arrays(self, n: int):
        if self.triple_capacity is not None and self.triples_used + n > self.triple_capacity:
            raise InsufficientPreprocessingError(
                f"needed {n} more triples, {self.triple_capacity - self.triples_used} left")
        self.triples_used += n
        if n == 0:
            e = np.empty((self.t, 0), dtype=np.uint64)
            return e, e.copy(), e.copy()
        return self._tri.take(n)

    def take_mask_arrays(self, n: int):
        if self.mask_capacity is not None and self.masks_used + n > self.mask_capacity:
            raise InsufficientPreprocessingError(
                f"needed {n} more masks, {self.mask_capacity - self.masks_used} left")
        self.masks_used += n
        if n == 0:
            e = np.empty((self.t, 0), dtype=np.uint64)
            return e, e.copy(), e.copy()
        return self._msk.take(n)

    def triples(self, shape=()) -> BeaverTriple:
        n = int(np.prod(shape, dtype=np.int64))
        a, b, c = self.take_triple_arrays(n)
        t = self.t
        return BeaverTriple(*(ShareSet(x.reshape((t,) + tuple(shape)), t) for x in (a, b, c)))

    def masks(self, shape=()) -> RandomMask:
        n = int(np.prod(shape, dtype=np.int64))
        r, a, c = self.take_mask_arrays(n)
        t = self.t
        return RandomMask(*(ShareSet(x.reshape((t,) + tuple(shape)), t) for x in (r, a, c)))


def dealer_generate(count_triples: int, count_masks: int, entropy=None, t: int = 3
                    ) -> tuple[BeaverTriple, RandomMask]:
    """Produce ``count_triples`` triples and ``count_masks`` masks as flat batches."""
    if count_triples < 0 or count_masks < 0:
        raise InvalidConfigurationError("counts must be non-negative")
    pool = Preprocessing(Dealer(t, entropy))
    return pool.triples((count_triples,)), pool.masks((count_masks,))


# ------------------------------------------------------------ global-view ops

def _check_same_t(*sets: ShareSet):
    t = sets[0].t
    for s in sets:
        if s.t != t or s.shares.shape[0] != t:
            raise InvalidOperandsError("operands have different party counts")


def beaver_multiply(x: ShareSet, y: ShareSet, triple: BeaverTriple, transcript: Transcript) -> ShareSet:
    """Shares of ``x*y``; opens exactly ``x - a`` and ``y - b``."""
    _check_same_t(x, y, triple.a, triple.b, triple.c)
    if x.shape != y.shape or triple.shape != x.shape:
        raise InvalidOperandsError(f"shape mismatch: x{x.shape} y{y.shape} triple{triple.shape}")
    triple.consume()
    t = x.t
    n = int(np.prod(x.shape, dtype=np.int64))
    flat = lambda s: s.shares.reshape(t, n)  # noqa: E731
    d = K.diff_sum(flat(x), flat(triple.a))
    e = K.diff_sum(flat(y), flat(triple.b))
    transcript.record("beaver", [d, e], multiplications=n)
    z = K.beaver_finish(d, e, flat(triple.a), flat(triple.b), flat(triple.c), True)
    return ShareSet(z.reshape((t,) + x.shape), t)


def masked_zero_test(x: ShareSet, mask: RandomMask, transcript: Transcript, kind: str = "zero_test"):
    """Public ``x == 0``; the only value opened is ``r*x`` (plus the uniform ``x - a``)."""
    _check_same_t(x, mask.r)
    if mask.shape != x.shape:
        raise InvalidOperandsError(f"shape mismatch: x{x.shape} mask{mask.shape}")
    mask.consume()
    t = x.t
    n = int(np.prod(x.shape, dtype=np.int64))
    d = K.diff_sum(x.shares.reshape(t, n), mask.a.shares.reshape(t, n))
    transcript.record("mask", [d])
    zero = np.zeros(n, dtype=np.uint64)
    rx_sh = K.beaver_finish(d, zero, zero[None, :].repeat(t, 0), mask.r.shares.reshape(t, n),
                            mask.c.shares.reshape(t, n), False)
    rx = K.summod(rx_sh, 0)
    op = transcript.record(kind, [rx], multiplications=n)
    op.values = rx.copy() if transcript.keep_values else op.values
    res = (rx == 0).reshape(x.shape)
    return bool(res) if res.ndim == 0 else res
