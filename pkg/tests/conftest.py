import os

import pytest
from hypothesis import strategies as st

from pclocality.words import FreeProduct

os.environ.setdefault("PYTHONHASHSEED", "0")

Z2Z3 = FreeProduct((2, 3))
A, B, B2 = (0, 1), (1, 1), (1, 2)


def words(group: FreeProduct, max_len: int = 12):
    """Normal-form words of ``group`` built letter by letter."""

    @st.composite
    def build(draw):
        n = draw(st.integers(0, max_len))
        w = []
        for _ in range(n):
            choices = [(f, e) for f, o in enumerate(group.orders) for e in range(1, o) if not w or w[-1][0] != f]
            w.append(draw(st.sampled_from(choices)))
        return tuple(w)

    return build()


@pytest.fixture
def z2z3():
    return Z2Z3
