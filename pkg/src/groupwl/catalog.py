"""Named small groups and reference data used by tests, demos and the CLI.

The library deliberately contains classic confusable pairs (Z4 vs Z2^2,
D4 vs Q8, Z9 vs Z3^2, the five groups of order 27) plus relabelings, all
nilpotent and of order <= 64.
"""

from __future__ import annotations

import numpy as np

from .groups import FiniteGroup, direct_product, relabel
from .linalg import FFMatrix, Modulus


def cyclic(n: int, name: str | None = None) -> FiniteGroup:
    t = (np.arange(n)[:, None] + np.arange(n)[None, :]) % n
    return FiniteGroup.from_table(t.astype(np.int32), name=name or f"Z{n}", validate=False)


def abelian(invariants: list[int], name: str | None = None) -> FiniteGroup:
    G = cyclic(invariants[0])
    for k in invariants[1:]:
        G = direct_product(G, cyclic(k))
    G.name = name or "x".join(f"Z{k}" for k in invariants)
    return G


def dihedral(n: int, name: str | None = None) -> FiniteGroup:
    """Dihedral group of order 2n: (r, s) with s r s = r^-1."""
    elems = [(r, f) for f in (0, 1) for r in range(n)]

    def mul(a, b):
        r1, f1 = a
        r2, f2 = b
        if f1 == 0:
            return ((r1 + r2) % n, f2)
        return ((r1 - r2) % n, 1 - f2)

    return FiniteGroup.from_elements(elems, mul, name=name or f"D{n}")


def quaternion(n: int = 8, name: str | None = None) -> FiniteGroup:
    """Generalized quaternion group of order n = 2^k >= 8."""
    assert n >= 8 and n & (n - 1) == 0
    m = n // 2
    elems = [(r, f) for f in (0, 1) for r in range(m)]

    def mul(a, b):
        r1, f1 = a
        r2, f2 = b
        if f1 == 0:
            return ((r1 + r2) % m, f2)
        # x^r1 y * x^r2 y^f2; y x = x^-1 y and y^2 = x^{m/2}
        if f2 == 0:
            return ((r1 - r2) % m, 1)
        return ((r1 - r2 + m // 2) % m, 0)

    return FiniteGroup.from_elements(elems, mul, name=name or f"Q{n}")


def modular_2group(n: int, name: str | None = None) -> FiniteGroup:
    """Modular (semiabelian) 2-group of order n = 2^k: b a b^-1 = a^{1 + n/4}."""
    m = n // 2
    r = 1 + m // 2
    elems = [(a, b) for b in (0, 1) for a in range(m)]

    def mul(x, y):
        a1, b1 = x
        a2, b2 = y
        if b1 == 0:
            return ((a1 + a2) % m, b2)
        return ((a1 + a2 * r) % m, 1 - b2)

    return FiniteGroup.from_elements(elems, mul, name=name or f"Mod{n}")


def heisenberg(p: int, name: str | None = None) -> FiniteGroup:
    """Upper unitriangular 3x3 matrices over F_p, as a Cayley table."""
    elems = [(a, b, c) for a in range(p) for b in range(p) for c in range(p)]

    def mul(x, y):
        a1, b1, c1 = x
        a2, b2, c2 = y
        return ((a1 + a2) % p, (b1 + b2) % p, (c1 + c2 + a1 * b2) % p)

    return FiniteGroup.from_elements(elems, mul, name=name or f"Heis{p**3}")


def extraspecial_exponent_p2(p: int, name: str | None = None) -> FiniteGroup:
    """Extraspecial group of order p^3 and exponent p^2 (p odd)."""
    assert p % 2 == 1
    m = p * p
    elems = [(a, b) for b in range(p) for a in range(m)]
    r = 1 + p

    def mul(x, y):
        a1, b1 = x
        a2, b2 = y
        return ((a1 + a2 * pow(r, b1, m)) % m, (b1 + b2) % p)

    return FiniteGroup.from_elements(elems, mul, name=name or f"M{p**3}")


def symmetric4() -> FiniteGroup:
    """S_4 on {0,1,2,3} via its regular Cayley table."""
    import itertools

    perms = [p for p in itertools.permutations(range(4))]
    ident = tuple(range(4))
    order = [ident] + [p for p in perms if p != ident]

    def mul(a, b):
        return tuple(a[b[i]] for i in range(4))

    return FiniteGroup.from_elements(order, mul, name="S4")


def perm_element_index(G: FiniteGroup, perm: tuple[int, ...]) -> int:
    """Index of a permutation inside symmetric4()'s element order."""
    import itertools

    perms = [tuple(range(4))] + [p for p in itertools.permutations(range(4))
                                 if p != tuple(range(4))]
    return perms.index(tuple(perm))


# The worked 4x4 alternating triple over F_3 used throughout the tests:
# three alternating forms whose pencil has exactly four rank-2 points.
EXAMPLE_TUPLE_ENTRIES = (
    ((0, 1, 0, 0), (-1, 0, 0, 0), (0, 0, 0, 1), (0, 0, -1, 0)),
    ((0, 0, 0, 0), (0, 0, 1, 0), (0, -1, 0, 0), (0, 0, 0, 0)),
    ((0, 0, 0, 1), (0, 0, 0, 0), (0, 0, 0, 0), (-1, 0, 0, 0)),
)

EXAMPLE_RANK2_POINTS = {(0, 0, 1), (0, 1, 0), (1, 1, 2), (1, 2, 1)}


def example_tuple_matrices(q: int = 3) -> list[FFMatrix]:
    mod = Modulus.of(q)
    return [FFMatrix(np.asarray(m, dtype=np.int64), mod) for m in EXAMPLE_TUPLE_ENTRIES]


def library_20() -> list[FiniteGroup]:
    """The fixed 20-group nilpotent library of order <= 64."""
    groups = [
        cyclic(4),
        abelian([2, 2]),
        dihedral(4),                      # order 8
        quaternion(8),
        cyclic(8),
        abelian([4, 2]),
        abelian([2, 2, 2]),
        dihedral(8, name="D8_16"),        # order 16
        quaternion(16),
        modular_2group(16),
        cyclic(16),
        abelian([4, 4]),
        cyclic(9),
        abelian([3, 3]),
        cyclic(27),
        abelian([9, 3]),
        abelian([3, 3, 3]),
        heisenberg(3),
        extraspecial_exponent_p2(3),
        relabel(heisenberg(3), seed=7),
    ]
    assert len(groups) == 20
    return groups
