"""Finite groups as Cayley tables or matrix generators, plus the structural
subroutines the filter pipeline needs: closures, commutators, p-cores, the
Fitting subgroup, quotients, layer encodings and the nilpotent socle.

Cayley-kind groups carry the identity at index 0.  Structural operations on
Cayley tables are exact and capped at order 5000; matrix-kind groups route
through enumeration (with caps) or through the unipotent sifting machinery
in :mod:`groupwl.unipotent`.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import (
    CapExceededError,
    NotElementaryAbelianError,
    NotNilpotentError,
    NotNormalError,
)
from .linalg import FFMatrix, Modulus

CAYLEY_ORDER_CAP = 5000
DEFAULT_CLOSURE_CAP = 100_000


def _factor(n: int) -> dict[int, int]:
    out: dict[int, int] = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


class FiniteGroup:
    """A finite group, either by full Cayley table or by matrix generators."""

    def __init__(self, kind: str, *, table: np.ndarray | None = None,
                 generators: list[FFMatrix] | None = None,
                 mod: Modulus | None = None, name: str = "G"):
        self.kind = kind
        self.name = name
        if kind == "cayley":
            assert table is not None
            self.table = table
            self.n = table.shape[0]
            self.inverse = self._build_inverses()
        elif kind == "matrix":
            assert generators is not None and mod is not None
            self.generators = generators
            self.mod = mod
            self.degree = generators[0].rows if generators else 0
            self._elements: list[FFMatrix] | None = None
        else:
            raise ValueError(f"unknown kind {kind!r}")

    # ---------------- construction ----------------

    @classmethod
    def from_table(cls, table, name: str = "G", validate: bool = True) -> "FiniteGroup":
        t = np.asarray(table, dtype=np.int32)
        n = t.shape[0]
        if t.shape != (n, n):
            raise ValueError("Cayley table must be square")
        g = cls("cayley", table=t, name=name)
        if validate:
            g.validate_axioms()
        return g

    @classmethod
    def from_elements(cls, elements, mul, name: str = "G") -> "FiniteGroup":
        """Cayley table from explicit elements and a multiplication callback.

        The identity is moved to index 0.
        """
        elems = list(elements)
        n = len(elems)
        ident = None
        for e in elems:
            if all(mul(e, x) == x for x in elems):
                ident = e
                break
        if ident is None:
            raise ValueError("no identity element found")
        order = [ident] + [e for e in elems if e != ident]
        index = {e: i for i, e in enumerate(order)}
        t = np.zeros((n, n), dtype=np.int32)
        for i, a in enumerate(order):
            for j, b in enumerate(order):
                t[i, j] = index[mul(a, b)]
        return cls.from_table(t, name=name, validate=False)

    @classmethod
    def from_permutations(cls, perms: list[tuple[int, ...]], degree: int,
                          name: str = "G", cap: int = DEFAULT_CLOSURE_CAP) -> "FiniteGroup":
        """Group generated by permutations given in one-line notation."""
        ident = tuple(range(degree))
        gens = [tuple(p) for p in perms]
        elems = {ident}
        frontier = [ident]
        while frontier:
            nxt = []
            for a in frontier:
                for g in gens:
                    c = tuple(a[g[i]] for i in range(degree))
                    if c not in elems:
                        if len(elems) >= cap:
                            raise CapExceededError("permutation closure exceeded cap")
                        elems.add(c)
                        nxt.append(c)
            frontier = nxt
        order = sorted(elems)

        def mul(a, b):
            return tuple(a[b[i]] for i in range(degree))

        return cls.from_elements(order, mul, name=name)

    @classmethod
    def from_matrix_generators(cls, generators: list[FFMatrix], name: str = "G") -> "FiniteGroup":
        mod = generators[0].mod
        return cls("matrix", generators=generators, mod=mod, name=name)

    # ---------------- cayley basics ----------------

    def _build_inverses(self) -> np.ndarray:
        n = self.n
        if np.any(self.table[0] != np.arange(n)) or np.any(self.table[:, 0] != np.arange(n)):
            raise ValueError("identity must sit at index 0")
        inv = np.full(n, -1, dtype=np.int32)
        rows, cols = np.nonzero(self.table == 0)
        for r, c in zip(rows, cols):
            inv[r] = c
        if np.any(inv < 0):
            raise ValueError("table has an element without inverse")
        return inv

    def validate_axioms(self, sample: int = 10_000, rng_seed: int = 0):
        """Group-axiom check: exhaustive associativity for n <= 256, sampled above."""
        n = self.n
        t = self.table
        if np.any(t < 0) or np.any(t >= n):
            raise ValueError("table entries out of range")
        for i in range(n):
            if sorted(t[i]) != list(range(n)) or sorted(t[:, i]) != list(range(n)):
                raise ValueError("table rows/columns are not permutations")
        if n <= 256:
            left = t[t, :]          # left[a,b,c] = t[t[a,b], c]
            right = t[:, t]         # right[a,b,c] = t[a, t[b,c]]
            if not np.array_equal(left, right):
                raise ValueError("table is not associative")
        else:
            rng = np.random.default_rng(rng_seed)
            a = rng.integers(0, n, size=sample)
            b = rng.integers(0, n, size=sample)
            c = rng.integers(0, n, size=sample)
            if not np.array_equal(t[t[a, b], c], t[a, t[b, c]]):
                raise ValueError("table failed sampled associativity")

    def mul(self, a: int, b: int) -> int:
        return int(self.table[a, b])

    def inv(self, a: int) -> int:
        return int(self.inverse[a])

    def conj(self, a: int, g: int) -> int:
        """g^-1 a g."""
        return int(self.table[self.table[self.inverse[g], a], g])

    def commutator(self, a: int, b: int) -> int:
        t = self.table
        return int(t[t[self.inverse[a], self.inverse[b]], t[a, b]])

    @property
    def order(self) -> int:
        if self.kind == "cayley":
            return self.n
        return len(self.elements())

    def element_order(self, a: int) -> int:
        x = a
        k = 1
        while x != 0:
            x = self.mul(x, a)
            k += 1
        return k

    def order_profile(self) -> dict[int, int]:
        prof: dict[int, int] = {}
        for a in range(self.n):
            o = self.element_order(a)
            prof[o] = prof.get(o, 0) + 1
        return prof

    # ---------------- matrix kind ----------------

    def elements(self, cap: int = DEFAULT_CLOSURE_CAP) -> list[FFMatrix]:
        """Full element list of a matrix group (cached after first closure)."""
        assert self.kind == "matrix"
        if self._elements is None:
            self._elements = matrix_closure(self.generators, self.mod, cap)
        return self._elements

    def to_cayley(self, cap: int = CAYLEY_ORDER_CAP, name: str | None = None) -> "FiniteGroup":
        assert self.kind == "matrix"
        elems = self.elements(cap)
        if len(elems) > cap:
            raise CapExceededError("matrix group too large for a Cayley table")
        n = len(elems)
        ident = FFMatrix.identity(self.degree, self.mod)
        order = [ident] + [e for e in elems if e != ident]
        index = {m.key(): i for i, m in enumerate(order)}
        t = np.zeros((n, n), dtype=np.int32)
        for i, a in enumerate(order):
            for j, b in enumerate(order):
                t[i, j] = index[(a @ b).key()]
        return FiniteGroup.from_table(t, name=name or self.name, validate=False)

    def __repr__(self):
        if self.kind == "cayley":
            return f"FiniteGroup(cayley, order {self.n}, {self.name!r})"
        return f"FiniteGroup(matrix, degree {self.degree} over Z/{self.mod.b}, {self.name!r})"


def matrix_closure(generators: list[FFMatrix], mod: Modulus, cap: int) -> list[FFMatrix]:
    """BFS closure of matrix generators; raises CapExceededError past cap."""
    deg = generators[0].rows
    ident = FFMatrix.identity(deg, mod)
    seen = {ident.key(): ident}
    frontier = [ident]
    while frontier:
        nxt = []
        for a in frontier:
            for g in generators:
                c = a @ g
                k = c.key()
                if k not in seen:
                    if len(seen) >= cap:
                        raise CapExceededError(f"matrix closure exceeded cap {cap}")
                    seen[k] = c
                    nxt.append(c)
        frontier = nxt
    return list(seen.values())


@dataclass(frozen=True)
class Subgroup:
    """Subgroup of a Cayley-kind group, stored as a sorted element tuple."""

    parent: FiniteGroup
    elements: tuple[int, ...]

    def __post_init__(self):
        assert self.parent.kind == "cayley"

    @property
    def order(self) -> int:
        return len(self.elements)

    def element_set(self) -> frozenset[int]:
        return frozenset(self.elements)

    def contains(self, other: "Subgroup") -> bool:
        return set(other.elements) <= set(self.elements)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Subgroup)
            and self.parent is other.parent
            and self.elements == other.elements
        )

    def __hash__(self) -> int:
        return hash((id(self.parent), self.elements))

    def __repr__(self):
        return f"Subgroup(order {self.order} of {self.parent.name})"


def closure(G: FiniteGroup, gens, cap: int = DEFAULT_CLOSURE_CAP) -> Subgroup:
    """Subgroup generated by the given element indices."""
    t = G.table
    glist = [int(g) for g in gens]
    gens = np.unique(np.asarray(glist or [0], dtype=np.int64))
    member = np.zeros(G.n, dtype=bool)
    member[0] = True
    frontier = np.array([0], dtype=np.int64)
    while frontier.size:
        prods = np.unique(t[frontier[:, None], gens[None, :]])
        new = prods[~member[prods]]
        if member.sum() + new.size > cap:
            raise CapExceededError("closure exceeded cap")
        member[new] = True
        frontier = new
    return Subgroup(G, tuple(np.flatnonzero(member).tolist()))


def trivial_subgroup(G: FiniteGroup) -> Subgroup:
    return Subgroup(G, (0,))


def full_subgroup(G: FiniteGroup) -> Subgroup:
    return Subgroup(G, tuple(range(G.n)))


def subgroup_product(A: Subgroup, B: Subgroup, cap: int = DEFAULT_CLOSURE_CAP) -> Subgroup:
    """Subgroup generated by A and B."""
    return closure(A.parent, set(A.elements) | set(B.elements), cap)


def _conj_block(G: FiniteGroup, elems: np.ndarray, by: np.ndarray) -> np.ndarray:
    """Unique conjugates g^-1 h g over h in elems, g in by."""
    t = G.table
    inv = G.inverse
    left = t[inv[by][:, None], elems[None, :]]        # g^-1 h
    return np.unique(t[left, by[:, None]])


def is_normal(G: FiniteGroup, H: Subgroup) -> bool:
    elems = np.asarray(H.elements, dtype=np.int64)
    conj = _conj_block(G, elems, np.arange(G.n, dtype=np.int64))
    return conj.size == elems.size and np.array_equal(conj, elems)


def normal_closure(G: FiniteGroup, seeds, within: Subgroup | None = None,
                   cap: int = DEFAULT_CLOSURE_CAP) -> Subgroup:
    """Smallest subgroup containing seeds and closed under conjugation by
    `within` (defaults to all of G)."""
    conjers = np.asarray(within.elements if within is not None else range(G.n),
                         dtype=np.int64)
    current = closure(G, seeds, cap)
    while True:
        elems = np.asarray(current.elements, dtype=np.int64)
        conj = _conj_block(G, elems, conjers)
        member = np.zeros(G.n, dtype=bool)
        member[elems] = True
        if np.all(member[conj]):
            return current
        current = closure(G, set(current.elements) | set(conj.tolist()), cap)


def commutator_subgroup(A: Subgroup, B: Subgroup, cap: int = DEFAULT_CLOSURE_CAP) -> Subgroup:
    """Exact [A, B]: normal closure in <A, B> of all pairwise commutators."""
    G = A.parent
    t = G.table
    inv = G.inverse
    a = np.asarray(A.elements, dtype=np.int64)
    b = np.asarray(B.elements, dtype=np.int64)
    # [a, b] = (a^-1 b^-1)(a b)
    lhs = t[inv[a][:, None], inv[b][None, :]]
    rhs = t[a[:, None], b[None, :]]
    comms = np.unique(t[lhs, rhs])
    ambient = subgroup_product(A, B, cap)
    return normal_closure(G, comms.tolist(), within=ambient, cap=cap)


def power_subgroup(G: FiniteGroup, H: Subgroup, p: int, cap: int = DEFAULT_CLOSURE_CAP) -> Subgroup:
    """Subgroup generated by p-th powers of elements of H."""
    t = G.table
    elems = np.asarray(H.elements, dtype=np.int64)
    acc = np.zeros(len(elems), dtype=np.int64)
    for _ in range(p):
        acc = t[acc, elems]
    return closure(G, np.unique(acc).tolist(), cap)


def center(G: FiniteGroup) -> Subgroup:
    t = G.table
    central = [a for a in range(G.n) if np.array_equal(t[a, :], t[:, a])]
    return Subgroup(G, tuple(sorted(central)))


def centralizer(G: FiniteGroup, H: Subgroup) -> Subgroup:
    hs = H.elements
    t = G.table
    cent = [a for a in range(G.n) if all(t[a, h] == t[h, a] for h in hs)]
    return closure(G, cent)


def derived_series(G: FiniteGroup) -> list[Subgroup]:
    series = [full_subgroup(G)]
    while True:
        nxt = commutator_subgroup(series[-1], series[-1])
        if nxt.elements == series[-1].elements:
            break
        series.append(nxt)
        if nxt.order == 1:
            break
    return series


def lower_central_series(G: FiniteGroup) -> list[Subgroup]:
    """gamma_1 = G, gamma_{i+1} = [gamma_i, G]; stops at the stable term."""
    whole = full_subgroup(G)
    series = [whole]
    while True:
        nxt = commutator_subgroup(series[-1], whole)
        if nxt.elements == series[-1].elements:
            break
        series.append(nxt)
        if nxt.order == 1:
            break
    return series


def is_abelian(G: FiniteGroup) -> bool:
    return np.array_equal(G.table, G.table.T)


def is_nilpotent(G: FiniteGroup) -> bool:
    return lower_central_series(G)[-1].order == 1


def sylow_subgroup(G: FiniteGroup, p: int) -> Subgroup:
    """One Sylow p-subgroup by greedy extension with p-elements.

    A maximal p-subgroup of a finite group is Sylow, so the greedy loop is
    exact; each candidate closure is aborted early once it outgrows the
    p-part of |G|.
    """
    n = G.n
    p_part = 1
    m = n
    while m % p == 0:
        p_part *= p
        m //= p
    if p_part == 1:
        return trivial_subgroup(G)
    p_elements = [a for a in range(n) if G.element_order(a) % p == 0 and
                  _p_power_order(G, a, p)]
    current = trivial_subgroup(G)
    progress = True
    while progress and current.order < p_part:
        progress = False
        for a in p_elements:
            if a in current.element_set():
                continue
            try:
                cand = closure(G, set(current.elements) | {a}, cap=p_part)
            except CapExceededError:
                continue
            if cand.order % p == 0 and _is_p_group_order(cand.order, p):
                current = cand
                progress = True
                if current.order == p_part:
                    break
    return current


def _p_power_order(G: FiniteGroup, a: int, p: int) -> bool:
    return _is_p_group_order(G.element_order(a), p)


def _is_p_group_order(n: int, p: int) -> bool:
    while n % p == 0:
        n //= p
    return n == 1


def p_core(G: FiniteGroup, p: int, cap: int = CAYLEY_ORDER_CAP) -> Subgroup:
    """O_p(G): intersection of the conjugates of one Sylow p-subgroup."""
    if G.kind == "matrix":
        G = G.to_cayley(cap)
    if G.n > cap:
        raise CapExceededError("group too large for p_core")
    syl = sylow_subgroup(G, p)
    if syl.order == 1:
        return syl
    core = set(syl.elements)
    seen_conjugates = {syl.elements}
    for g in range(G.n):
        conj = tuple(sorted(G.conj(h, g) for h in syl.elements))
        if conj in seen_conjugates:
            continue
        seen_conjugates.add(conj)
        core &= set(conj)
        if len(core) == 1:
            break
    return Subgroup(G, tuple(sorted(core)))


def fitting(G: FiniteGroup, cap: int = CAYLEY_ORDER_CAP) -> Subgroup:
    """O_infinity(G) = product of the p-cores over primes dividing |G|."""
    if G.kind == "matrix":
        G = G.to_cayley(cap)
    gens: set[int] = {0}
    for p in sorted(_factor(G.n)):
        gens |= set(p_core(G, p, cap).elements)
    return closure(G, gens)


def quotient(G: FiniteGroup, N: Subgroup) -> tuple[FiniteGroup, np.ndarray]:
    """Cayley-table quotient G/N with the projection map, N normal (checked)."""
    if not is_normal(G, N):
        raise NotNormalError("quotient by a non-normal subgroup")
    n = G.n
    ns = np.asarray(N.elements, dtype=np.int32)
    rep = np.full(n, -1, dtype=np.int32)
    cosets: list[int] = []
    for a in range(n):
        if rep[a] >= 0:
            continue
        members = G.table[a, ns]
        mn = int(members.min())
        rep[members] = mn
        cosets.append(mn)
    cosets_sorted = [0] + sorted(c for c in set(cosets) if c != 0)
    idx = {c: i for i, c in enumerate(cosets_sorted)}
    proj = np.array([idx[int(rep[a])] for a in range(n)], dtype=np.int32)
    m = len(cosets_sorted)
    t = np.zeros((m, m), dtype=np.int32)
    for i, a in enumerate(cosets_sorted):
        for j, b in enumerate(cosets_sorted):
            t[i, j] = proj[G.mul(a, b)]
    Q = FiniteGroup.from_table(t, name=f"{G.name}/N", validate=False)
    return Q, proj


def subgroup_image(proj: np.ndarray, Q: FiniteGroup, H: Subgroup) -> Subgroup:
    return Subgroup(Q, tuple(sorted({int(proj[a]) for a in H.elements})))


def subgroup_preimage(proj: np.ndarray, G: FiniteGroup, elems) -> Subgroup:
    target = set(int(e) for e in elems)
    return Subgroup(G, tuple(sorted(a for a in range(G.n) if int(proj[a]) in target)))


@dataclass
class ElementaryLayerSpace:
    """Elementary abelian section U/D encoded as F_p^d.

    vector_of maps an element of U to the coordinate vector of its coset;
    element_of picks the transversal representative of a coordinate vector.
    """

    parent: FiniteGroup
    upper: Subgroup
    lower: Subgroup
    p: int
    dim: int
    basis: list[int]                    # transversal representatives
    _coset_vec: dict[int, tuple[int, ...]]
    _vec_rep: dict[tuple[int, ...], int]

    def vector_of(self, x: int) -> tuple[int, ...]:
        return self._coset_vec[self._coset_key(x)]

    def element_of(self, vec) -> int:
        return self._vec_rep[tuple(int(v) % self.p for v in vec)]

    def _coset_key(self, x: int) -> int:
        return int(min(self.parent.table[x, list(self.lower.elements)]))

    def vectors(self) -> list[tuple[int, ...]]:
        return sorted(self._vec_rep)


def layer_space(G: FiniteGroup, upper: Subgroup, lower: Subgroup) -> ElementaryLayerSpace:
    """Encode upper/lower as F_p^d; raises unless it is elementary abelian."""
    us = set(upper.elements)
    if not set(lower.elements) <= us:
        raise ValueError("lower must sit inside upper")
    m = upper.order // lower.order
    if m == 1:
        return ElementaryLayerSpace(G, upper, lower, p=1, dim=0, basis=[],
                                    _coset_vec={_coset_key(G, 0, lower): ()},
                                    _vec_rep={(): 0})
    fac = _factor(m)
    if len(fac) != 1:
        raise NotElementaryAbelianError(f"section order {m} is not a prime power")
    p = next(iter(fac))
    d = fac[p]
    low = list(lower.elements)
    # abelian mod lower + exponent p
    for a in upper.elements:
        xp = 0
        for _ in range(p):
            xp = G.mul(xp, a)
        if _coset_key(G, xp, lower) != _coset_key(G, 0, lower):
            raise NotElementaryAbelianError("section has exponent > p")
    coset_vec: dict[int, tuple[int, ...]] = {_coset_key(G, 0, lower): (0,) * d}
    vec_rep: dict[tuple[int, ...], int] = {(0,) * d: 0}
    basis: list[int] = []
    for a in upper.elements:
        if len(basis) == d:
            break
        if _coset_key(G, a, lower) in coset_vec:
            continue
        k = len(basis)
        basis.append(a)
        new_cv = dict(coset_vec)
        new_vr = dict(vec_rep)
        for vec, rep in vec_rep.items():
            x = rep
            for j in range(1, p):
                x = G.mul(x, a)
                nv = vec[:k] + (j,) + vec[k + 1:]
                key = _coset_key(G, x, lower)
                if key in new_cv and new_cv[key] != nv:
                    raise NotElementaryAbelianError("section is not abelian")
                new_cv[key] = nv
                new_vr[nv] = x
        coset_vec, vec_rep = new_cv, new_vr
    if len(basis) != d or len(vec_rep) != p**d:
        raise NotElementaryAbelianError("could not span the section with a basis")
    # well-definedness spot check: vector_of is a homomorphism
    space = ElementaryLayerSpace(G, upper, lower, p=p, dim=d, basis=basis,
                                 _coset_vec=coset_vec, _vec_rep=vec_rep)
    reps = list(vec_rep.values())
    for a in reps[: min(len(reps), 8)]:
        for b in reps[: min(len(reps), 8)]:
            va = np.array(space.vector_of(a))
            vb = np.array(space.vector_of(b))
            vab = np.array(space.vector_of(G.mul(a, b)))
            if not np.array_equal((va + vb) % p, vab):
                raise NotElementaryAbelianError("encoding failed homomorphism check")
    return space


def _coset_key(G: FiniteGroup, x: int, lower: Subgroup) -> int:
    return int(min(G.table[x, list(lower.elements)]))


def socle_nilpotent(G: FiniteGroup) -> Subgroup:
    """Socle of a nilpotent group: generated by {z in Z(G) : z^p = 1} over p | |G|."""
    if not is_nilpotent(G):
        raise NotNilpotentError("socle implemented for nilpotent groups only")
    Z = center(G)
    gens: set[int] = {0}
    for p in sorted(_factor(G.n)):
        for z in Z.elements:
            x = 0
            for _ in range(p):
                x = G.mul(x, z)
            if x == 0:
                gens.add(z)
    return closure(G, gens)


def relabel(G: FiniteGroup, seed: int) -> FiniteGroup:
    """Random Cayley relabeling fixing the identity; yields an isomorphic copy."""
    rng = np.random.default_rng(seed)
    n = G.n
    perm = np.concatenate([[0], 1 + rng.permutation(n - 1)]).astype(np.int32)
    t = np.zeros_like(G.table)
    t[perm[:, None], perm[None, :]] = perm[G.table]
    return FiniteGroup.from_table(t, name=f"{G.name}~{seed}", validate=False)


def direct_product(A: FiniteGroup, B: FiniteGroup, name: str | None = None) -> FiniteGroup:
    na, nb = A.n, B.n
    t = np.zeros((na * nb, na * nb), dtype=np.int32)
    ta = A.table.astype(np.int64)
    tb = B.table.astype(np.int64)
    ia = np.arange(na)
    ib = np.arange(nb)
    # index (a, b) -> a * nb + b; identity (0, 0) -> 0
    prod_a = ta[ia[:, None, None, None], ia[None, None, :, None]]
    prod_b = tb[ib[None, :, None, None], ib[None, None, None, :]]
    t = (prod_a * nb + prod_b).reshape(na * nb, na * nb).astype(np.int32)
    return FiniteGroup.from_table(t, name=name or f"{A.name}x{B.name}", validate=False)
