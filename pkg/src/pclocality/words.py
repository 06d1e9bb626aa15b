"""Normal-form words in free products of finite cyclic groups.

A word is a tuple of letters ``(factor_index, element)`` with ``element`` in
``1..order-1`` and adjacent letters taken from different factors. The empty
tuple is the identity. Letters compare as plain tuples, which fixes the
lexicographic tie-break used for coset representatives.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Sequence, Tuple

from ._validation import check_int

Letter = Tuple[int, int]
Word = Tuple[Letter, ...]

IDENTITY: Word = ()

_GROWTH_CHECK = 10


@dataclass(frozen=True)
class FactorSpec:
    """Cyclic factor Z_order; its Cayley graph on all non-identity elements is K_order."""

    order: int

    def __post_init__(self):
        check_int(self.order, "order", minimum=2)


def word_key(w: Word) -> bytes:
    """Injective byte encoding: letter count, then (factor, element) pairs, little-endian."""
    n = len(w)
    return struct.pack(f"<I{2 * n}H", n, *[c for letter in w for c in letter])


def word_hex(w: Word) -> str:
    return word_key(w).hex()


def word_from_key(data: bytes) -> Word:
    (n,) = struct.unpack_from("<I", data, 0)
    return tuple(struct.unpack_from("<HH", data, 4 + 4 * i) for i in range(n))


@dataclass(frozen=True)
class FreeProduct:
    """The free product Z_{o_1} * ... * Z_{o_m} with normal-form arithmetic."""

    orders: Tuple[int, ...]
    generators: Tuple[Letter, ...] = field(init=False, repr=False)

    def __post_init__(self):
        orders = tuple(FactorSpec(o).order for o in self.orders)
        if not orders:
            raise ValueError("a free product needs at least one factor")
        object.__setattr__(self, "orders", orders)
        gens = tuple((f, e) for f, o in enumerate(orders) for e in range(1, o))
        object.__setattr__(self, "generators", gens)

    @classmethod
    def from_factors(cls, factors: Sequence[FactorSpec | int]) -> "FreeProduct":
        return cls(tuple(f.order if isinstance(f, FactorSpec) else int(f) for f in factors))

    def is_normal_form(self, w) -> bool:
        prev = None
        for letter in w:
            if not (isinstance(letter, tuple) and len(letter) == 2):
                return False
            f, e = letter
            if not 0 <= f < len(self.orders) or not 0 < e < self.orders[f]:
                return False
            if f == prev:
                return False
            prev = f
        return True

    def check_word(self, w) -> Word:
        w = tuple(tuple(letter) for letter in w)
        if not self.is_normal_form(w):
            raise ValueError(f"not a normal-form word for orders {self.orders}: {w!r}")
        return w

    def multiply(self, w1: Word, w2: Word) -> Word:
        if not w1:
            return w2
        if not w2:
            return w1
        i, j = len(w1), 0
        n2 = len(w2)
        orders = self.orders
        while i > 0 and j < n2:
            f1, e1 = w1[i - 1]
            f2, e2 = w2[j]
            if f1 != f2:
                break
            e = (e1 + e2) % orders[f1]
            if e:
                return w1[: i - 1] + ((f1, e),) + w2[j + 1 :]
            i -= 1
            j += 1
        return w1[:i] + w2[j:]

    def right_letter(self, w: Word, letter: Letter) -> Word:
        """``w * letter`` without the general junction loop."""
        if w and w[-1][0] == letter[0]:
            f = letter[0]
            e = (w[-1][1] + letter[1]) % self.orders[f]
            return w[:-1] + ((f, e),) if e else w[:-1]
        return w + (letter,)

    def left_letter(self, letter: Letter, w: Word) -> Word:
        if w and w[0][0] == letter[0]:
            f = letter[0]
            e = (w[0][1] + letter[1]) % self.orders[f]
            return ((f, e),) + w[1:] if e else w[1:]
        return (letter,) + w

    def inverse_letter(self, letter: Letter) -> Letter:
        f, e = letter
        return (f, self.orders[f] - e)

    def inverse(self, w: Word) -> Word:
        orders = self.orders
        return tuple((f, orders[f] - e) for f, e in reversed(w))

    def power(self, r: Word, k: int) -> Word:
        if k < 0:
            r, k = self.inverse(r), -k
        result: Word = IDENTITY
        base = r
        while k:
            if k & 1:
                result = self.multiply(result, base)
            k >>= 1
            if k:
                base = self.multiply(base, base)
        return result

    def is_cyclically_reduced(self, w: Word) -> bool:
        return len(w) <= 1 or w[0][0] != w[-1][0]

    def format(self, w: Word) -> str:
        """Human-readable form; Z2*Z3 renders as a, b, b^2 and T_d as a1..ad."""
        if not w:
            return "e"
        names = "abcdefghijklmnopqrstuvwxyz"
        short = len(self.orders) <= len(names) and not all(o == 2 for o in self.orders)
        parts = []
        for f, e in w:
            name = names[f] if short else f"a{f + 1}"
            parts.append(name if e == 1 else f"{name}^{e}")
        return " ".join(parts)


@dataclass(frozen=True)
class CosetContext:
    """Data for the quotient identifying ``w`` with ``w * (r**n)**k`` for all integers k."""

    group: FreeProduct
    r: Word
    n: int
    relator: Word = field(init=False, repr=False)

    def __post_init__(self):
        r = self.group.check_word(self.r)
        object.__setattr__(self, "r", r)
        check_int(self.n, "n", minimum=1)
        if not r:
            raise ValueError("r must be a nonempty word")
        if not self.group.is_cyclically_reduced(r):
            raise ValueError(f"r must be cyclically reduced, got {self.group.format(r)}")
        lengths = [len(self.group.power(r, k)) for k in range(1, _GROWTH_CHECK + 1)]
        if any(b <= a for a, b in zip(lengths, lengths[1:])) or lengths[0] == 0:
            raise ValueError(f"r = {self.group.format(r)} does not have infinite order")
        relator = self.group.power(r, self.n)
        if not relator:
            raise ValueError("r**n reduces to the identity")
        object.__setattr__(self, "relator", relator)


def _order_key(w: Word):
    return (len(w), w)


_POWER_LENGTHS: dict = {}


def _power_lengths(ctx: CosetContext) -> list:
    key = (ctx.group.orders, ctx.relator)
    lengths = _POWER_LENGTHS.get(key)
    if lengths is None:
        lengths = _POWER_LENGTHS[key] = [0]
        _extend_power_lengths(ctx, lengths)
    return lengths


def _extend_power_lengths(ctx: CosetContext, lengths: list) -> None:
    """Append ``|R**k|`` for the next batch of ``k``; fails if the lengths stop growing."""
    k0 = len(lengths)
    for k in range(k0, 2 * k0 + 8):
        lk = len(ctx.group.power(ctx.relator, k))
        if lk <= lengths[-1]:
            raise ValueError("relator powers stopped growing; cannot certify a coset minimum")
        lengths.append(lk)


def coset_canonical(w: Word, ctx: CosetContext) -> Word:
    """Shortest, then lexicographically least, element of ``{w * R**k}`` with ``R = r**n``.

    Candidates are scanned outward in ``|k|``; the scan stops once
    ``|R**k| - |w|`` exceeds the best length found, since no later candidate
    can be shorter.
    """
    group = ctx.group
    R = ctx.relator
    Rinv = group.inverse(R)
    best = w
    best_key = _order_key(w)
    lw = len(w)
    up = down = w
    lengths = _power_lengths(ctx)
    k = 0
    while True:
        k += 1
        while k >= len(lengths):
            _extend_power_lengths(ctx, lengths)
        power_len = lengths[k]
        if power_len - lw > best_key[0]:
            return best
        up = group.multiply(up, R)
        down = group.multiply(down, Rinv)
        for cand in (up, down):
            key = _order_key(cand)
            if key < best_key:
                best, best_key = cand, key
