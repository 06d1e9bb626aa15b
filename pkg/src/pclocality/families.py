"""Graph families from short names or structured descriptors.

Short names::

    t3          3-regular tree
    z2z3        Cayley graph of Z2 * Z3
    fp:3,3,4    free product of Z3, Z3, Z4
    mgp3        modified grandparent graph over T_3
    <name>/q6   quotient of <name> with index 6 (mgp3/q6 is built over t3/q6)

Tree quotients use ``r = a1 a2`` with ``r**(n+1)``; other free products use
``r`` = first letters of the first two factors with ``r**n``. A descriptor is
the mapping returned by ``graph.descriptor()``.
"""

from __future__ import annotations

import re
from typing import Callable, Mapping, Union

from .graphs import (
    CosetQuotientGraph,
    FreeProductGraph,
    ImplicitGraph,
    ModifiedGrandparentGraph,
    default_relator,
    make_free_product,
    make_quotient,
    make_modified_grandparent,
    tree,
)

_NAME = re.compile(r"^(t(?P<d>\d+)|z2z3|fp:(?P<orders>\d+(,\d+)+)|mgp(?P<m>\d+))(/q(?P<n>\d+))?$")


def _base_from_name(m) -> FreeProductGraph:
    if m.group("d"):
        return tree(int(m.group("d")))
    if m.group("m"):
        return tree(int(m.group("m")))
    if m.group("orders"):
        return make_free_product([int(x) for x in m.group("orders").split(",")])
    return make_free_product([2, 3])


def quotient_index(base: FreeProductGraph, n: int) -> int:
    """The power of the default relator used for the n-th quotient of ``base``."""
    return n + 1 if base.is_tree else n


def default_quotient(base: FreeProductGraph, n: int) -> CosetQuotientGraph:
    return make_quotient(base, default_relator(base), quotient_index(base, n))


def parse_family(spec: Union[str, Mapping]) -> ImplicitGraph:
    if isinstance(spec, Mapping):
        return graph_from_descriptor(spec)
    m = _NAME.match(str(spec).strip().lower())
    if not m:
        raise ValueError(f"unknown family {spec!r}; expected t<d>, z2z3, fp:<o1>,<o2>,..., mgp<d>, optional /q<n>")
    base = _base_from_name(m)
    n = m.group("n")
    graph: ImplicitGraph = base if n is None else default_quotient(base, int(n))
    if m.group("m"):
        graph = make_modified_grandparent(graph)
    return graph


def family_sequence(spec: Union[str, Mapping]) -> tuple:
    """``(G, n -> G_n)`` for a base family name such as ``z2z3`` or ``mgp3``."""
    g = parse_family(spec)
    if isinstance(g, CosetQuotientGraph) or (
        isinstance(g, ModifiedGrandparentGraph) and isinstance(g.base, CosetQuotientGraph)
    ):
        raise ValueError("pass the base family (without /q<n>) for a quotient sequence")
    if isinstance(g, ModifiedGrandparentGraph):
        base = g.base
        return g, lambda n: make_modified_grandparent(default_quotient(base, n))
    make: Callable[[int], ImplicitGraph] = lambda n: default_quotient(g, n)  # noqa: E731
    return g, make


def graph_from_descriptor(desc: Mapping) -> ImplicitGraph:
    fam = desc.get("family")
    if fam in ("tree", "free_product_cayley"):
        g = make_free_product(list(desc["factors"]))
        if fam == "tree":
            g = tree(len(desc["factors"]))
        return g
    if fam == "coset_quotient":
        base = make_free_product(list(desc["factors"]))
        if base.is_tree:
            base = tree(len(desc["factors"]))
        r = tuple(tuple(x) for x in desc.get("relator", default_relator(base)))
        return make_quotient(base, r, int(desc["n"]))
    if fam == "modified_grandparent":
        return make_modified_grandparent(graph_from_descriptor(desc["base"]))
    raise ValueError(f"unknown family tag {fam!r}")
