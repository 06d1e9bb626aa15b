"""Implicit (neighbor-oracle) graphs built on free-product words.

Every graph exposes an ordered neighbor multiset of constant size
``degree``. Slot ``i`` of ``neighbors(v)`` is the step along the i-th
generator, and ``reverse_slot(i)`` is the slot that steps back, which is what
makes :func:`edge_key` well defined for parallel edges.
"""

from __future__ import annotations

import struct
import warnings
from functools import lru_cache
from typing import Sequence, Tuple

from .words import (
    IDENTITY,
    CosetContext,
    FactorSpec,
    FreeProduct,
    Word,
    coset_canonical,
    word_key,
)

UNCLASSIFIED = "unclassified"

_CACHE_SIZE = 1 << 18


class ImplicitGraph:
    """Base class for vertex-transitive graphs given by a neighbor oracle."""

    family = "implicit"
    degree: int
    root: Word = IDENTITY

    def neighbors(self, v: Word) -> Tuple[Word, ...]:
        raise NotImplementedError

    def reverse_slot(self, slot: int) -> int:
        raise NotImplementedError

    def translate(self, u: Word, y: Word) -> Word:
        """Image of the root-ball vertex ``y`` under the local map sending the root to ``u``."""
        raise NotImplementedError

    def sphere_class(self, v: Word) -> str:
        return UNCLASSIFIED

    def key(self, v: Word) -> bytes:
        return word_key(v)

    def format(self, v: Word) -> str:
        return repr(v)

    def descriptor(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.descriptor()})"


class FreeProductGraph(ImplicitGraph):
    """Right Cayley graph of a free product of cyclic groups.

    The generating set is every non-identity element of every factor, so each
    factor contributes a complete graph ``K_order`` at every vertex.
    """

    family = "free_product_cayley"

    def __init__(self, factors: Sequence[FactorSpec | int]):
        group = FreeProduct.from_factors(factors)
        orders = group.orders
        if len(orders) == 1:
            raise ValueError("a single finite factor gives a finite graph")
        self.group = group
        self.generators = group.generators
        self.degree = len(self.generators)
        self._slot_of = {g: i for i, g in enumerate(self.generators)}
        self._reverse = tuple(self._slot_of[group.inverse_letter(g)] for g in self.generators)
        self.amenable = len(orders) == 2 and max(orders) == 2
        if self.amenable:
            warnings.warn("Z2*Z2 is the bi-infinite line, an amenable graph", stacklevel=2)
        self._neighbors = lru_cache(maxsize=_CACHE_SIZE)(self._compute_neighbors)

    @property
    def is_tree(self) -> bool:
        return all(o == 2 for o in self.group.orders) and len(self.group.orders) >= 3

    def _compute_neighbors(self, v: Word) -> Tuple[Word, ...]:
        step = self.group.right_letter
        return tuple(step(v, g) for g in self.generators)

    def neighbors(self, v: Word) -> Tuple[Word, ...]:
        return self._neighbors(v)

    def reverse_slot(self, slot: int) -> int:
        return self._reverse[slot]

    def translate(self, u: Word, y: Word) -> Word:
        return self.group.multiply(u, y)

    def sphere_class(self, v: Word) -> str:
        if not v:
            return "root"
        orders = self.group.orders
        if len(set(orders)) == 1:
            return "all"
        return f"last-factor-{v[-1][0]}"

    def format(self, v: Word) -> str:
        return self.group.format(v)

    def descriptor(self) -> dict:
        return {"family": self.family, "factors": list(self.group.orders)}


def tree(d: int) -> FreeProductGraph:
    """The d-regular tree as the Cayley graph of d copies of Z2."""
    if d < 3:
        raise ValueError("T_d needs d >= 3 here (d = 2 is the amenable line)")
    g = FreeProductGraph([2] * d)
    g.family = "tree"
    return g


class CosetQuotientGraph(ImplicitGraph):
    """Quotient of a free-product Cayley graph by ``w ~ w * (r**n)**k``.

    Vertices are :func:`coset_canonical` representatives. Slot ``i`` maps
    ``v`` to the class of ``g_i**-1 * v``: multiplying on the left is what
    keeps the relation ``w ~ w * R**k`` compatible with adjacency, and with the
    inverse the walk along generators ``g_1 ... g_k`` from the root lands in
    the class of ``(g_1 ... g_k)**-1``, mirroring the base graph slot for slot.
    """

    family = "coset_quotient"

    def __init__(self, base: FreeProductGraph, r: Sequence, n: int):
        if not isinstance(base, FreeProductGraph):
            raise TypeError("quotients are built from free-product Cayley graphs")
        self.base = base
        self.group = base.group
        self.ctx = CosetContext(base.group, tuple(tuple(x) for x in r), n)
        self.degree = base.degree
        self._inverse_gens = tuple(self.group.inverse_letter(g) for g in base.generators)
        self._warned_loop = False
        self._neighbors = lru_cache(maxsize=_CACHE_SIZE)(self._compute_neighbors)

    @property
    def is_tree(self) -> bool:
        return self.base.is_tree

    @property
    def relator(self) -> Word:
        return self.ctx.relator

    def canonical(self, w: Word) -> Word:
        return coset_canonical(w, self.ctx)

    def _compute_neighbors(self, v: Word) -> Tuple[Word, ...]:
        step = self.group.left_letter
        out = tuple(coset_canonical(step(g, v), self.ctx) for g in self._inverse_gens)
        if v in out and not self._warned_loop:
            self._warned_loop = True
            warnings.warn(
                f"quotient index n={self.ctx.n} produces self-loops; they are kept in the "
                "walk but dropped from percolation",
                stacklevel=3,
            )
        return out

    def neighbors(self, v: Word) -> Tuple[Word, ...]:
        return self._neighbors(v)

    def reverse_slot(self, slot: int) -> int:
        return self.base.reverse_slot(slot)

    def translate(self, u: Word, y: Word) -> Word:
        # Covering-map transport; exact on balls below the local radius.
        return coset_canonical(self.group.multiply(y, u), self.ctx)

    def sphere_class(self, v: Word) -> str:
        return self.base.sphere_class(self.group.inverse(v))

    def format(self, v: Word) -> str:
        return "[" + self.group.format(v) + "]"

    def descriptor(self) -> dict:
        return {
            "family": self.family,
            "factors": list(self.group.orders),
            "relator": [list(x) for x in self.ctx.r],
            "n": self.ctx.n,
        }


def make_free_product(factors: Sequence[FactorSpec | int]) -> FreeProductGraph:
    return FreeProductGraph(factors)


def make_quotient(base: FreeProductGraph, ctx_or_r, n: int | None = None) -> CosetQuotientGraph:
    """Accepts either a :class:`CosetContext` or a relator word plus index ``n``."""
    if isinstance(ctx_or_r, CosetContext):
        if ctx_or_r.group != base.group:
            raise ValueError("coset context belongs to a different group")
        return CosetQuotientGraph(base, ctx_or_r.r, ctx_or_r.n)
    if n is None:
        raise TypeError("n is required when passing a relator word")
    return CosetQuotientGraph(base, ctx_or_r, n)


class ModifiedGrandparentGraph(ImplicitGraph):
    """T_d (or a T_d quotient) with an extra edge between every pair at tree distance 2.

    Slots ``0..d-1`` are the tree edges; slot ``d + i*(d-1) + k`` is the two-step
    move along generator ``i`` then the k-th generator different from ``i``.
    """

    family = "modified_grandparent"

    def __init__(self, base: FreeProductGraph | CosetQuotientGraph):
        if not getattr(base, "is_tree", False):
            raise ValueError("modified grandparent graphs need a T_d base (d >= 3) or a T_d quotient")
        self.base = base
        d = base.degree
        self.d = d
        self.degree = d * d
        self._pairs = tuple((i, j) for i in range(d) for j in range(d) if j != i)
        slot_of = {pair: d + k for k, pair in enumerate(self._pairs)}
        self._reverse = tuple(range(d)) + tuple(slot_of[(j, i)] for i, j in self._pairs)
        self._neighbors = lru_cache(maxsize=_CACHE_SIZE)(self._compute_neighbors)

    def _compute_neighbors(self, v: Word) -> Tuple[Word, ...]:
        nb = self.base.neighbors
        first = nb(v)
        second = tuple(nb(first[i])[j] for i, j in self._pairs)
        return first + second

    def neighbors(self, v: Word) -> Tuple[Word, ...]:
        return self._neighbors(v)

    def reverse_slot(self, slot: int) -> int:
        return self._reverse[slot]

    def translate(self, u: Word, y: Word) -> Word:
        return self.base.translate(u, y)

    def sphere_class(self, v: Word) -> str:
        if not v:
            return "root"
        # Tree distance from the root is the reduced word length.
        return "S1" if len(v) % 2 else "S2"

    def format(self, v: Word) -> str:
        return self.base.format(v)

    def descriptor(self) -> dict:
        return {"family": self.family, "base": self.base.descriptor()}


def make_modified_grandparent(base) -> ModifiedGrandparentGraph:
    return ModifiedGrandparentGraph(base)


def sphere_class(graph: ImplicitGraph, v: Word) -> str:
    return graph.sphere_class(v)


def edge_key(graph: ImplicitGraph, v: Word, slot: int, u: Word | None = None) -> bytes:
    """Canonical key of the edge leaving ``v`` through ``slot``.

    The key is the sorted pair of (vertex key, slot) half-edges, so it is the
    same from either endpoint, and parallel edges differ through their slots.
    """
    if u is None:
        u = graph.neighbors(v)[slot]
    a = graph.key(v) + struct.pack("<H", slot)
    b = graph.key(u) + struct.pack("<H", graph.reverse_slot(slot))
    return a + b if a <= b else b + a


def default_relator(graph: FreeProductGraph) -> Word:
    """The product of the first letters of the first two factors, e.g. ``ab`` or ``a1 a2``."""
    return ((0, 1), (1, 1))
