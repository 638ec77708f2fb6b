"""Characteristic filters: maps from N^d labels to normal subgroups, stored as
descending chains, with boundaries, layers, commutation bimaps, the initial
characteristic filter, refinement by insertion, and truncation to quotients.

Index convention: labels are d-tuples of naturals compared with the *last*
coordinate most significant (so (1,0) < (2,0) < (0,1), matching the initial
filter's ordering of per-prime chains).  Only the least label per distinct
subgroup is stored; the stored labels form a chain in this order, and the
subgroup chain descends strictly along it.

The initial filter assigns, for each prime p_i dividing |G| in ascending
order, the lower exponent-p_i central series of N_i = prod_{j>=i} O_{p_j}(G):
lambda_1 = N_i, lambda_{a+1} = [lambda_a, N_i] lambda_a^{p_i}, stored at
labels a*e_i.  Each chain stabilizes exactly at N_{i+1}, so the stored
labels descend through all the N_i down to 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    FilterRepairError,
    MixedPrimesError,
    NotBetweenLayersError,
    NotNormalError,
    TrivialLayerError,
)
from .bimaps import MatrixTuple
from .groups import (
    ElementaryLayerSpace,
    FiniteGroup,
    Subgroup,
    _factor,
    closure,
    commutator_subgroup,
    full_subgroup,
    is_normal,
    layer_space,
    p_core,
    power_subgroup,
    quotient,
    subgroup_image,
    trivial_subgroup,
)

MAX_REPAIR_ROUNDS = 64


# ---------------- index arithmetic ----------------


def index_key(s: tuple[int, ...]) -> tuple[int, ...]:
    """Sort key for the label order: last coordinate most significant."""
    return tuple(reversed(s))


def index_le(s: tuple[int, ...], t: tuple[int, ...]) -> bool:
    return index_key(s) <= index_key(t)


def index_add(s: tuple[int, ...], t: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(a + b for a, b in zip(s, t))


def _unit(i: int, d: int) -> tuple[int, ...]:
    return tuple(1 if k == i else 0 for k in range(d))


# ---------------- the filter chain ----------------


@dataclass
class LayerInfo:
    label: tuple[int, ...]
    upper: Subgroup
    lower: Subgroup
    space: ElementaryLayerSpace | None   # None when trivial or not elementary abelian
    p: int | None
    dim: int
    elementary: bool

    @property
    def trivial(self) -> bool:
        return self.upper.order == self.lower.order


class Filter:
    """A characteristic filter stored as a labeled descending chain."""

    def __init__(self, group: FiniteGroup, entries: list[tuple[tuple[int, ...], Subgroup]]):
        self.group = group
        self.entries = sorted(entries, key=lambda e: index_key(e[0]))
        self.dim = len(self.entries[0][0]) if self.entries else 1
        self._layers: list[LayerInfo] | None = None
        self._check_chain()

    # -- storage invariants --

    def _check_chain(self):
        last = None
        for label, sub in self.entries:
            if len(label) != self.dim:
                raise ValueError("inconsistent label dimension")
            if last is not None:
                if not last.contains(sub) or last.order == sub.order:
                    raise ValueError("stored subgroups must strictly descend")
            last = sub

    # -- evaluation --

    def value(self, label: tuple[int, ...]) -> Subgroup:
        """phi at an arbitrary label: the subgroup at the largest stored label
        <= it; phi_0 = G."""
        best = None
        for lab, sub in self.entries:
            if index_le(lab, label):
                best = sub
            else:
                break
        if best is None:
            return full_subgroup(self.group)
        return best

    def stored(self, label: tuple[int, ...]) -> Subgroup | None:
        for lab, sub in self.entries:
            if lab == label:
                return sub
        return None

    def labels(self) -> list[tuple[int, ...]]:
        return [lab for lab, _ in self.entries]

    def image(self) -> list[Subgroup]:
        return [sub for _, sub in self.entries]

    def image_orders(self) -> list[int]:
        return [sub.order for sub in self.image()]

    def boundary(self, label: tuple[int, ...]) -> Subgroup:
        """Subgroup generated by all stored terms past `label`.

        The stored labels form a chain, so this is the next distinct stored
        subgroup (the successor term); for a 1-dimensional chain this is
        phi_{s+1}, and for label 0 it is the first stored term.
        """
        for lab, sub in self.entries:
            if index_key(lab) > index_key(label):
                return Subgroup(self.group, sub.elements)
        return trivial_subgroup(self.group)

    # -- layers --

    def layers(self) -> list[LayerInfo]:
        if self._layers is not None:
            return self._layers
        out = []
        items = list(self.entries)
        if not items or items[0][1].order != self.group.n:
            items = [(tuple(0 for _ in range(self.dim)), full_subgroup(self.group))] + items
        for label, sub in items:
            lower = self.boundary(label)
            if sub.order == lower.order:
                out.append(LayerInfo(label, sub, lower, None, None, 0, True))
                continue
            try:
                space = layer_space(self.group, sub, lower)
                out.append(LayerInfo(label, sub, lower, space, space.p, space.dim, True))
            except Exception:
                out.append(LayerInfo(label, sub, lower, None, None, 0, False))
        self._layers = out
        return out

    def layer_at(self, label: tuple[int, ...]) -> LayerInfo:
        for info in self.layers():
            if info.label == label:
                return info
        raise KeyError(f"no layer stored at {label}")

    def nontrivial_layers(self) -> list[LayerInfo]:
        return [l for l in self.layers() if not l.trivial and l.elementary and l.dim > 0]

    # -- axioms --

    def verify_axioms(self) -> bool:
        """Monotone along the label order plus [phi_s, phi_t] <= phi_{s+t}
        over all stored label pairs (0 included), with phi evaluated at the
        largest stored label below s+t (the strictest consistent reading)."""
        self._check_chain()
        zero = tuple(0 for _ in range(self.dim))
        labs = [zero] + self.labels()
        vals = {lab: self.value(lab) for lab in labs}
        for s in labs:
            for t in labs:
                target = self.value(index_add(s, t))
                comm = commutator_subgroup(vals[s], vals[t])
                if not target.contains(comm):
                    return False
        return True

    def width(self) -> int:
        """Maximum layer dimension over nonzero labels."""
        zero = tuple(0 for _ in range(self.dim))
        dims = [l.dim for l in self.layers()
                if l.label != zero and l.elementary and not l.trivial]
        return max(dims, default=0)

    def __repr__(self):
        parts = ", ".join(f"{lab}:{sub.order}" for lab, sub in self.entries)
        return f"Filter({self.group.name}; {parts})"


# ---------------- initial filter ----------------


def lambda_series(G: FiniteGroup, head: Subgroup, p: int) -> list[Subgroup]:
    """Lower exponent-p central series of `head`: stops at the stable term."""
    series = [head]
    while True:
        cur = series[-1]
        nxt_gens = set(commutator_subgroup(cur, head).elements) | set(
            power_subgroup(G, cur, p).elements
        )
        nxt = closure(G, nxt_gens)
        if nxt.order == cur.order:
            break
        series.append(nxt)
    return series


def initial_filter(G: FiniteGroup) -> Filter:
    """The characteristic filter from the p-cores and their exponent-p series.

    Labels live on N^c, c the number of distinct primes dividing |G|,
    ascending; the chain for prime p_i is stored at labels a * e_i.
    """
    primes = sorted(_factor(G.n)) if G.n > 1 else []
    c = max(1, len(primes))
    cores = {p: p_core(G, p) for p in primes}
    entries: list[tuple[tuple[int, ...], Subgroup]] = []
    seen: set[tuple[int, ...]] = set()

    def push(label, sub):
        key = tuple(sorted(sub.elements))
        if key in seen:
            return
        seen.add(key)
        entries.append((label, sub))

    whole = full_subgroup(G)
    # N_i = product of the cores for primes p_i..p_c
    for i, p in enumerate(primes):
        gens: set[int] = {0}
        for pj in primes[i:]:
            gens |= set(cores[pj].elements)
        head = closure(G, gens)
        series = lambda_series(G, head, p)
        for a, sub in enumerate(series, start=1):
            push(_scaled_label(a, i, c), sub)
    if not entries or entries[0][1].order != G.n:
        entries.insert(0, (tuple(0 for _ in range(c)), whole))
    filt = Filter(G, entries)
    if not filt.verify_axioms():
        raise FilterRepairError("initial filter failed its own axioms")
    return filt


def _scaled_label(a: int, i: int, c: int) -> tuple[int, ...]:
    return tuple(a if k == i else 0 for k in range(c))


# ---------------- layer bimaps ----------------


def layer_bimap(filt: Filter, s: tuple[int, ...], t: tuple[int, ...]
                ) -> tuple[MatrixTuple, tuple[int, ...]]:
    """The commutation bimap L_s x L_t -> L_u as a matrix tuple.

    The target u is the deepest stored label whose subgroup contains
    [phi_s, phi_t]; on the initial filter's per-prime chains this is the
    label sum, and it stays meaningful after refinement.  Raises if any of
    the three layers is trivial or the primes differ.
    """
    ls = filt.layer_at(s)
    lt = filt.layer_at(t)
    if ls.trivial or lt.trivial or not (ls.elementary and lt.elementary):
        raise TrivialLayerError("source layers must be nontrivial elementary abelian")
    comm = commutator_subgroup(ls.upper, lt.upper)
    target = None
    for lab, sub in filt.entries:
        if sub.contains(comm):
            target = lab
    if target is None:
        raise TrivialLayerError("no stored term contains the commutators")
    lu = filt.layer_at(target)
    if lu.trivial or not lu.elementary:
        raise TrivialLayerError("target layer trivial")
    if len({ls.p, lt.p, lu.p}) != 1:
        raise MixedPrimesError(f"layer primes differ: {ls.p}, {lt.p}, {lu.p}")
    G = filt.group
    p = ls.p
    du, dv, dw = ls.dim, lt.dim, lu.dim
    mats = np.zeros((dw, du, dv), dtype=np.int64)
    for a in range(du):
        xa = ls.space.element_of(tuple(1 if k == a else 0 for k in range(du)))
        for b in range(dv):
            yb = lt.space.element_of(tuple(1 if k == b else 0 for k in range(dv)))
            z = G.commutator(xa, yb)
            w = lu.space.vector_of(z)
            for k in range(dw):
                mats[k, a, b] = w[k]
    # well-definedness: the map must vanish when either side sits in the boundary
    for x in ls.lower.elements[: min(4, ls.lower.order)]:
        for y in lt.upper.elements[: min(4, lt.upper.order)]:
            z = G.commutator(x, y)
            if any(lu.space.vector_of(z)):
                raise TrivialLayerError("bimap not well defined on cosets")
    return MatrixTuple.from_arrays(mats, p), target


# ---------------- refinement ----------------


def _insert(filt: Filter, H: Subgroup) -> Filter | None:
    """Insert H into the chain (stretched labels, one more coordinate).

    Returns None when H is already in the image or equals the whole group;
    raises NotBetweenLayersError when H does not nest inside any stored gap.
    """
    G = filt.group
    hset = set(H.elements)
    for _, sub in filt.entries:
        if set(sub.elements) == hset:
            return None
    if hset == set(range(G.n)):
        return None
    slot = None
    for lab, sub in filt.entries:
        lower = filt.boundary(lab)
        if set(lower.elements) < hset < set(sub.elements):
            slot = lab
            break
    if slot is None:
        raise NotBetweenLayersError("subgroup does not fit strictly inside any stored gap")
    new_entries = []
    for lab, sub in filt.entries:
        new_entries.append((tuple(2 * x for x in lab) + (0,), sub))
    h_label = tuple(2 * x + (1 if k == 0 else 0) for k, x in enumerate(slot)) + (0,)
    new_entries.append((h_label, Subgroup(G, tuple(sorted(hset)))))
    return Filter(G, new_entries)


def refine_with(filt: Filter, H: Subgroup) -> Filter:
    """Insert a normal subgroup strictly between a stored term and its
    boundary; labels are stretched by two and get one more coordinate, and the
    axioms are re-certified (with product repair) before returning.
    """
    if not is_normal(filt.group, H):
        raise NotNormalError("refinement subgroup must be normal")
    out = _insert(filt, H)
    if out is None:
        return filt
    return _repair(out)


def _repair(filt: Filter) -> Filter:
    """Adjoin commutator products until the filter axioms certify."""
    G = filt.group
    for _ in range(MAX_REPAIR_ROUNDS):
        zero = tuple(0 for _ in range(filt.dim))
        labs = list(dict.fromkeys([zero] + filt.labels()))
        bad = None
        for s in labs:
            for t in labs:
                target = filt.value(index_add(s, t))
                comm = commutator_subgroup(filt.value(s), filt.value(t))
                if not target.contains(comm):
                    bad = (comm, target)
                    break
            if bad:
                break
        if bad is None:
            return filt
        comm, target = bad
        graft = closure(G, set(comm.elements) | set(target.elements))
        grown = _insert(filt, graft)
        if grown is None:
            raise FilterRepairError("axiom violation not fixable by insertion")
        filt = grown
    raise FilterRepairError("axiom repair did not converge")


# ---------------- truncation ----------------


def truncate(filt: Filter, s: tuple[int, ...]) -> tuple[Filter, FiniteGroup, np.ndarray]:
    """Pushforward of the terms above phi_s to G/phi_s.

    Returns the truncated filter, the quotient group, and the projection.
    """
    target = filt.stored(s)
    if target is None:
        raise KeyError(f"{s} is not a stored label")
    Q, proj = quotient(filt.group, target)
    entries = []
    for lab, sub in filt.entries:
        if sub.contains(target):
            entries.append((lab, subgroup_image(proj, Q, sub)))
        if lab == s:
            break
    return Filter(Q, entries), Q, proj
