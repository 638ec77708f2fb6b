"""Isomorphism testing for nilpotent groups: composition series compatible
with the filter (optionally restricted to the smallest color classes), exact
backtracking over series-respecting generator images, an individualize-and-
refine variant, and a brute-force oracle for validation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np

from .errors import CapExceededError, NotNilpotentError
from .filters import Filter
from .groups import FiniteGroup, Subgroup, closure, is_nilpotent
from .hypergraph import (
    ColorContext,
    PipelineResult,
    StableColoring,
    build_hypergraph,
    incidence_graph,
    joint_pipeline,
    run_pipeline,
    signature,
    wl_refine,
)
from .linalg import Subspace, projective_points

ORACLE_CAP = 256


@dataclass
class CompatibleSeries:
    """1 = G_0 < G_1 < ... < G_m = G with prime-order steps refining a filter."""

    subgroups: list[Subgroup]          # ascending, element sets
    step_generators: list[int]         # element extending each step
    step_layers: list[tuple]           # filter layer label per step

    @property
    def length(self) -> int:
        return len(self.subgroups) - 1


@dataclass
class IsoWitness:
    """A verified isomorphism as an element-index bijection."""

    mapping: list[int]

    def as_dict(self) -> dict[int, int]:
        return dict(enumerate(self.mapping))


def verify_witness(G: FiniteGroup, H: FiniteGroup, mapping: list[int]) -> bool:
    if sorted(mapping) != list(range(G.n)) or G.n != H.n:
        return False
    m = np.asarray(mapping, dtype=np.int64)
    return np.array_equal(m[G.table], H.table[m[:, None], m[None, :]])


# ----------------------------------------------------------------------
# series enumeration
# ----------------------------------------------------------------------


def _layer_flags(info, allowed_points: list[tuple] | None):
    """Complete flags of the layer's vector space, optionally with every step
    generated by an allowed point; yields lists of point tuples."""
    p, d = info.p, info.dim
    pts = projective_points(d, p)
    pool = allowed_points if allowed_points is not None else pts

    def grow(space: Subspace, chosen: list[tuple]):
        if space.dim == d:
            yield chosen
            return
        seen: set[bytes] = set()
        for pt in pool:
            if space.contains(pt):
                continue
            nxt = Subspace.from_vectors(list(space.basis) + [list(pt)], p, ambient_dim=d)
            if nxt.key() in seen:
                continue
            seen.add(nxt.key())
            yield from grow(nxt, chosen + [pt])

    zero = Subspace.from_vectors([], p, ambient_dim=d)
    yield from grow(zero, [])


def smallest_color_class(res: PipelineResult, label: tuple) -> list[tuple]:
    """Point set of the smallest stable vertex color class within a layer."""
    groups: dict[int, list[tuple]] = {}
    for i, (lab, pt) in enumerate(res.hypergraph.vertices):
        if lab == label:
            groups.setdefault(res.coloring.left_colors[i], []).append(pt)
    if not groups:
        return []
    best = min(groups.items(), key=lambda kv: (len(kv[1]), kv[0]))
    return best[1]


def enumerate_compatible_series(G: FiniteGroup, res: PipelineResult,
                                strategy: str = "plain",
                                counter: dict | None = None):
    """Stream the composition series refining the filter chain, deepest layer
    first; strategy "color" draws step generators from the smallest stable
    color class of each layer whenever that class is smaller than sqrt|L_s|
    (sizes in the vectors-on-points convention)."""
    filt = res.filter
    if filt.image_orders()[-1] != 1:
        raise NotNilpotentError("series enumeration needs a chain reaching 1")
    layers = [l for l in filt.layers() if not l.trivial]
    for l in layers:
        if not l.elementary:
            raise NotNilpotentError("series enumeration needs elementary abelian layers")
    # deepest first: ascend by the order of the layer's upper term
    layers = sorted(layers, key=lambda l: l.upper.order)
    per_layer: list[list[list[tuple]]] = []
    for info in layers:
        allowed = None
        if strategy == "color":
            cls = smallest_color_class(res, info.label)
            size_vectors = len(cls) * (info.p - 1)
            if cls and size_vectors ** 2 < info.p ** info.dim:
                allowed = cls
        per_layer.append(list(_layer_flags(info, allowed)))
    count = 0
    for combo in product(*per_layer):
        subgroups = [Subgroup(G, (0,))]
        gens: list[int] = []
        labels: list[tuple] = []
        ok = True
        for info, flag in zip(layers, combo):
            base = subgroups[-1]
            if set(base.elements) != set(info.lower.elements):
                # chain glue: the previous layer must have filled the boundary
                ok = set(info.lower.elements) <= set(base.elements)
                if not ok:
                    break
            for pt in flag:
                gen = info.space.element_of(pt)
                nxt = closure(G, set(subgroups[-1].elements) | {gen})
                subgroups.append(nxt)
                gens.append(gen)
                labels.append(info.label)
        if not ok:
            continue
        count += 1
        if counter is not None:
            counter["series"] = count
        yield CompatibleSeries(subgroups, gens, labels)


# ----------------------------------------------------------------------
# series-respecting isomorphism by backtracking
# ----------------------------------------------------------------------


def series_isomorphism(G: FiniteGroup, sG: CompatibleSeries,
                       H: FiniteGroup, sH: CompatibleSeries) -> IsoWitness | None:
    """Exact backtracking for an isomorphism mapping one series to the other,
    step by step; replaces the polynomial-time black box at desk scale."""
    if sG.length != sH.length:
        return None
    orders_g = [s.order for s in sG.subgroups]
    orders_h = [s.order for s in sH.subgroups]
    if orders_g != orders_h:
        return None

    def extend(level: int, psi: dict[int, int]) -> dict[int, int] | None:
        if level == sG.length:
            return psi
        g = sG.step_generators[level]
        p = orders_g[level + 1] // orders_g[level]
        h_pool = [h for h in sH.subgroups[level + 1].elements if h not in psi.values()]
        gp = g
        for _ in range(p - 1):
            gp = G.mul(gp, g)
        dom_elems = list(psi.keys())
        for h in h_pool:
            if H.element_order(h) != G.element_order(g):
                continue
            hp = h
            for _ in range(p - 1):
                hp = H.mul(hp, h)
            if psi[gp] != hp:
                continue
            # conjugation compatibility on the current domain generators
            if any(psi[G.conj(x, g)] != H.conj(psi[x], h) for x in dom_elems):
                continue
            nxt = dict(psi)
            consistent = True
            hk = 0
            gk = 0
            for a in range(1, p):
                gk = G.mul(gk, g)
                hk = H.mul(hk, h)
                for x in dom_elems:
                    gx = G.mul(x, gk)
                    hx = H.mul(psi[x], hk)
                    if gx in nxt and nxt[gx] != hx:
                        consistent = False
                        break
                    nxt[gx] = hx
                if not consistent:
                    break
            if not consistent:
                continue
            done = extend(level + 1, nxt)
            if done is not None:
                return done
        return None

    psi0 = {0: 0}
    found = extend(0, psi0)
    if found is None:
        return None
    mapping = [found[x] for x in range(G.n)]
    if not verify_witness(G, H, mapping):
        return None
    return IsoWitness(mapping)


# ----------------------------------------------------------------------
# the engine
# ----------------------------------------------------------------------


@dataclass
class IsoOutcome:
    witness: IsoWitness | None
    decided_by: str
    series_tried: int = 0

    @property
    def isomorphic(self) -> bool:
        return self.witness is not None


def _marked_signature(filt: Filter, g: int, k: int, marks: dict) -> tuple:
    """Rerun the WL loop with individualized vertices; fresh shared context
    is supplied by the caller through interning determinism."""
    ctx = ColorContext()
    H = build_hypergraph(filt, g, ctx, marks=marks)
    graph = incidence_graph(H, ctx)
    col = wl_refine(graph, k, ctx)
    sizes: dict[tuple, int] = {}
    for i, c in enumerate(col.left_colors):
        key = ("v", H.layer_of_vertex[i], c)
        sizes[key] = sizes.get(key, 0) + 1
    for c in col.right_colors:
        sizes[("e", c)] = sizes.get(("e", c), 0) + 1
    return tuple(sorted(sizes.items()))


def isomorphism_test(G: FiniteGroup, H: FiniteGroup, g: int = 1, k: int = 1,
                     strategy: str = "series", use_colors: bool = True,
                     counter: dict | None = None) -> IsoOutcome:
    """Sound and complete at desk scale: fix one compatible series in G,
    enumerate compatible series in H, and backtrack on each pair.

    strategy "series" enumerates directly; "ir" additionally individualizes
    the chosen generator points and prunes H-branches whose recolored
    signatures diverge from G's.
    """
    for name, grp in (("first", G), ("second", H)):
        if not is_nilpotent(grp):
            raise NotNilpotentError(f"{name} input is not nilpotent")
    if G.n != H.n:
        return IsoOutcome(None, "order")
    resG, resH, ctx = joint_pipeline(G, H, g, k)
    if signature(resG) != signature(resH):
        return IsoOutcome(None, "signature")
    series_strategy = "color" if use_colors else "plain"
    sG = next(enumerate_compatible_series(G, resG, strategy=series_strategy))
    tried = 0
    if strategy == "series":
        for sH in enumerate_compatible_series(H, resH, strategy=series_strategy,
                                              counter=counter):
            tried += 1
            wit = series_isomorphism(G, sG, H, sH)
            if wit is not None:
                return IsoOutcome(wit, "series", tried)
        return IsoOutcome(None, "series", tried)
    if strategy == "ir":
        marksG: dict[tuple, int] = {}
        for step, (gen, lab) in enumerate(zip(sG.step_generators, sG.step_layers)):
            info = resG.filter.layer_at(lab)
            pt = _point_of(info, gen)
            if pt is not None:
                marksG[(lab, pt)] = step
        sigG = _marked_signature(resG.filter, g, k, marksG)
        for sH in enumerate_compatible_series(H, resH, strategy=series_strategy,
                                              counter=counter):
            tried += 1
            marksH: dict[tuple, int] = {}
            for step, (gen, lab) in enumerate(zip(sH.step_generators, sH.step_layers)):
                info = resH.filter.layer_at(lab)
                pt = _point_of(info, gen)
                if pt is not None:
                    marksH[(lab, pt)] = step
            if _marked_signature(resH.filter, g, k, marksH) != sigG:
                continue
            wit = series_isomorphism(G, sG, H, sH)
            if wit is not None:
                return IsoOutcome(wit, "ir", tried)
        return IsoOutcome(None, "ir", tried)
    raise ValueError(f"unknown strategy {strategy!r}")


def _point_of(info, gen: int):
    from .linalg import normalize_point

    vec = info.space.vector_of(gen)
    if not any(vec):
        return None
    return normalize_point(vec, info.p)


# ----------------------------------------------------------------------
# statistics
# ----------------------------------------------------------------------


@dataclass
class PipelineStats:
    width: int
    color_ratio: Fraction
    layer_dims: list[tuple]
    class_sizes: dict[tuple, list[int]]


def stats(res: PipelineResult) -> PipelineStats:
    """Width, color ratio (smallest class counted in nonzero layer vectors:
    points times (p-1)), layer dimensions and per-layer class sizes."""
    filt = res.filter
    ratio = Fraction(1)
    dims = []
    csizes: dict[tuple, list[int]] = {}
    per_layer: dict[tuple, dict[int, int]] = {}
    for i, (lab, _) in enumerate(res.hypergraph.vertices):
        per_layer.setdefault(lab, {})
        c = res.coloring.left_colors[i]
        per_layer[lab][c] = per_layer[lab].get(c, 0) + 1
    for info in filt.nontrivial_layers():
        dims.append((info.label, info.p, info.dim))
        classes = sorted(per_layer.get(info.label, {}).values())
        csizes[info.label] = classes
        if classes:
            smallest_vectors = classes[0] * (info.p - 1)
            ratio *= Fraction(info.p ** info.dim, smallest_vectors)
    return PipelineStats(filt.width(), ratio, dims, csizes)


# ----------------------------------------------------------------------
# brute-force oracle
# ----------------------------------------------------------------------


def _generating_sequence(G: FiniteGroup) -> list[int]:
    gens: list[int] = []
    span = {0}
    for a in range(1, G.n):
        if a in span:
            continue
        gens.append(a)
        span = set(closure(G, gens).elements)
        if len(span) == G.n:
            break
    return gens


def _close_partial(G: FiniteGroup, H: FiniteGroup, psi: dict[int, int]) -> dict[int, int] | None:
    """Close a partial generator map under products; None on inconsistency."""
    work = dict(psi)
    frontier = list(work.keys())
    while frontier:
        nxt = []
        for a in list(work.keys()):
            for b in frontier:
                for x, y in ((a, b), (b, a)):
                    gx = G.mul(x, y)
                    hx = H.mul(work[x], work[y])
                    if gx in work:
                        if work[gx] != hx:
                            return None
                    else:
                        work[gx] = hx
                        nxt.append(gx)
        frontier = nxt
    vals = list(work.values())
    if len(set(vals)) != len(vals):
        return None
    return work


def brute_force_iso_oracle(G: FiniteGroup, H: FiniteGroup) -> IsoWitness | None:
    """Ground truth by exhaustive generator-image backtracking, |G| <= 256."""
    if G.n > ORACLE_CAP or H.n > ORACLE_CAP:
        raise CapExceededError(f"oracle capped at order {ORACLE_CAP}")
    if G.n != H.n:
        return None
    if G.order_profile() != H.order_profile():
        return None
    gens = _generating_sequence(G)

    def backtrack(i: int, psi: dict[int, int]) -> dict[int, int] | None:
        if len(psi) == G.n:
            return psi
        if i == len(gens):
            return None
        g = gens[i]
        if g in psi:
            return backtrack(i + 1, psi)
        og = G.element_order(g)
        for h in range(1, H.n):
            if h in psi.values():
                continue
            if H.element_order(h) != og:
                continue
            ext = _close_partial(G, H, {**psi, g: h})
            if ext is None:
                continue
            done = backtrack(i + 1, ext)
            if done is not None:
                return done
        return None

    found = backtrack(0, {0: 0})
    if found is None:
        return None
    mapping = [found[x] for x in range(G.n)]
    assert verify_witness(G, H, mapping)
    return IsoWitness(mapping)
