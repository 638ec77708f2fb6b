"""Colored hypergraphs on filter layers, hypergraph Weisfeiler-Leman
refinement through incidence graphs, characteristic-subgroup extraction, and
the stabilization loop that alternates coloring with filter refinement.

Vertices are the projective points of the nontrivial elementary layers.
Hyperedges are the dimension-g and codimension-g subspaces of each layer
(one whole-layer edge when the layer has dimension <= g), labeled by the
equivalence types of restricted/projected commutation bimaps, plus
cross-layer 2- and 3-edges recording which points commute.

All colors are interned in a ColorContext: canonical descriptors map to
dense ids in first-seen order, so two groups colored against one shared
context are directly comparable (new colors appear only when new to both).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapExceededError, MixedPrimesError, TrivialLayerError
from .bimaps import MatrixTuple, isotopism_bruteforce, pseudo_isometry_bruteforce
from .filters import Filter, LayerInfo, initial_filter, layer_bimap, refine_with
from .groups import FiniteGroup, Subgroup, closure
from .linalg import (
    Subspace,
    enumerate_subspaces,
    normalize_point,
    projective_points,
    rank_array,
)

DEFAULT_EDGE_CAP = 200_000
WL_TUPLE_CAP = 4_000_000
MAX_WL_ROUNDS = 64


class ColorContext:
    """Interning table from canonical color descriptors to dense ids.

    Descriptors are nested tuples built from canonical data only, so the
    id of a color agrees between any two groups sharing the context.
    Bimap equivalence labels are assigned by pairwise comparison against
    stored representatives (rank shortcut at genus 1).
    """

    def __init__(self):
        self.table: dict[tuple, int] = {}
        self.log: list[tuple] = []
        self._reps: dict[tuple, list[tuple[MatrixTuple, int]]] = {}

    def intern(self, desc: tuple) -> int:
        if desc not in self.table:
            self.table[desc] = len(self.log)
            self.log.append(desc)
        return self.table[desc]

    def bimap_label(self, bm: MatrixTuple, pseudo: bool) -> int:
        """Equivalence label: isotopism type, or pseudo-isometry type when
        `pseudo` (used for t = u pairs over odd characteristic)."""
        key = ("bimap", pseudo, bm.q, bm.m, bm.n, bm.ncols)
        if bm.m == 1:
            # genus-1: a single matrix is classified by its rank in both senses
            r = rank_array(bm.mats[0], bm.q)
            return self.intern(key + ("rank", r))
        if bm.n == 1 or bm.ncols == 1:
            # one-dimensional side: the tuple is a single linear map,
            # classified by the rank of its matrix of stacked coordinates
            flat = bm.mats.reshape(bm.m, -1)
            return self.intern(key + ("rank", rank_array(flat, bm.q)))
        reps = self._reps.setdefault(key, [])
        for rep, label in reps:
            if self._equivalent(rep, bm, pseudo):
                return label
        label = self.intern(key + ("class", len(reps)))
        reps.append((bm, label))
        return label

    @staticmethod
    def _equivalent(a: MatrixTuple, b: MatrixTuple, pseudo: bool) -> bool:
        if pseudo:
            return bool(pseudo_isometry_bruteforce(a, b))
        return isotopism_bruteforce(a, b)[0]


@dataclass
class ColoredHypergraph:
    """Vertices, hyperedges (as vertex-index tuples) and their color ids."""

    vertices: list[tuple]                 # (layer label, point tuple)
    edges: list[tuple]                    # canonical edge keys
    edge_members: list[tuple[int, ...]]   # vertex indices per edge
    vertex_colors: list[int]
    edge_colors: list[int]
    layer_of_vertex: list[tuple]          # layer label per vertex

    def vertex_index(self) -> dict[tuple, int]:
        return {v: i for i, v in enumerate(self.vertices)}


@dataclass
class IncidenceGraph:
    """Bipartite incidence graph: left = hypergraph vertices, right = edges."""

    n_left: int
    n_right: int
    adj: list[list[int]]     # neighbor lists over unified node ids
    colors: list[int]        # initial node colors (left/right kept disjoint)

    @property
    def n(self) -> int:
        return self.n_left + self.n_right


def incidence_graph(H: ColoredHypergraph, ctx: ColorContext) -> IncidenceGraph:
    nl, nr = len(H.vertices), len(H.edges)
    adj: list[list[int]] = [[] for _ in range(nl + nr)]
    for e, members in enumerate(H.edge_members):
        for v in members:
            adj[v].append(nl + e)
            adj[nl + e].append(v)
    colors = [ctx.intern(("left", c)) for c in H.vertex_colors]
    colors += [ctx.intern(("right", c)) for c in H.edge_colors]
    return IncidenceGraph(nl, nr, adj, colors)


def hypergraph_from_incidence(I: IncidenceGraph, H: ColoredHypergraph) -> ColoredHypergraph:
    """Inverse of incidence_graph given the original vertex/edge keys; used
    to check the round trip I^-1(I(H)) = H."""
    members = []
    for e in range(I.n_right):
        members.append(tuple(sorted(v for v in I.adj[I.n_left + e])))
    return ColoredHypergraph(
        vertices=list(H.vertices),
        edges=list(H.edges),
        edge_members=members,
        vertex_colors=list(H.vertex_colors),
        edge_colors=list(H.edge_colors),
        layer_of_vertex=list(H.layer_of_vertex),
    )


# ----------------------------------------------------------------------
# building the hypergraph from a filter
# ----------------------------------------------------------------------


def _layer_sig(info: LayerInfo) -> tuple:
    return ("layer", info.label, info.p, info.dim)


def build_hypergraph(filt: Filter, g: int, ctx: ColorContext,
                     cap: int = DEFAULT_EDGE_CAP,
                     marks: dict[tuple, int] | None = None) -> ColoredHypergraph:
    """The genus-g colored hypergraph of a filter.

    `marks` assigns individualization tags to (layer label, point) pairs;
    a marked vertex gets a private initial color.
    """
    if g < 1:
        raise ValueError("genus parameter must be >= 1")
    marks = marks or {}
    layers = filt.nontrivial_layers()
    for info in layers:
        if info.p is None:
            raise MixedPrimesError("hypergraph needs prime-field layers")
    vertices: list[tuple] = []
    vertex_colors: list[int] = []
    layer_of_vertex: list[tuple] = []
    vindex: dict[tuple, int] = {}
    for info in layers:
        sig = _layer_sig(info)
        for pt in projective_points(info.dim, info.p):
            key = (info.label, pt)
            vindex[key] = len(vertices)
            vertices.append(key)
            base = ("V", sig)
            if key in marks:
                base = base + ("mark", marks[key])
            vertex_colors.append(ctx.intern(base))
            layer_of_vertex.append(info.label)

    # commutation bimaps between stored layers, indexed by their tight target
    pair_maps: dict[tuple, tuple[MatrixTuple, tuple]] = {}
    for a in layers:
        for b in layers:
            try:
                bm, target = layer_bimap(filt, a.label, b.label)
            except (TrivialLayerError, MixedPrimesError):
                continue
            pair_maps[(a.label, b.label)] = (bm, target)

    edges: list[tuple] = []
    edge_members: list[tuple[int, ...]] = []
    edge_colors: list[int] = []

    for info in layers:
        sig = _layer_sig(info)
        d, p = info.dim, info.p
        pseudo_ok = p != 2
        if d <= g:
            # single whole-layer edge
            members = tuple(vindex[(info.label, pt)] for pt in projective_points(d, p))
            labels = _whole_layer_labels(filt, info, pair_maps, ctx, pseudo_ok)
            edges.append(("whole", info.label))
            edge_members.append(members)
            edge_colors.append(ctx.intern(("E", sig, "whole") + labels))
            continue
        dim_subs = {g: enumerate_subspaces(d, p, g, cap=cap)}
        if d - g != g:
            dim_subs[d - g] = enumerate_subspaces(d, p, d - g, cap=cap)
        seen: dict[bytes, tuple[list, list]] = {}
        order: list[bytes] = []
        sub_of: dict[bytes, Subspace] = {}
        for X in dim_subs[g]:
            lbl = _restriction_labels(filt, info, X, pair_maps, ctx)
            k = X.key()
            seen.setdefault(k, ([], []))[0].extend(lbl)
            sub_of[k] = X
            if k not in order:
                order.append(k)
        for Y in dim_subs.get(d - g, dim_subs[g] if d - g == g else []):
            lbl = _projection_labels(filt, info, Y, pair_maps, ctx, pseudo_ok)
            k = Y.key()
            seen.setdefault(k, ([], []))[1].extend(lbl)
            sub_of[k] = Y
            if k not in order:
                order.append(k)
        for k in order:
            X = sub_of[k]
            res_labels, proj_labels = seen[k]
            members = tuple(vindex[(info.label, pt)] for pt in X.points())
            edges.append(("sub", info.label, k))
            edge_members.append(members)
            edge_colors.append(ctx.intern(
                ("E", sig, X.dim, ("res",) + tuple(res_labels), ("proj",) + tuple(proj_labels))
            ))

    # cross-layer commutation edges
    for i, a in enumerate(layers):
        for b in layers[i + 1:]:
            _add_cross_edges(filt, a, b, pair_maps, vindex, ctx,
                             edges, edge_members, edge_colors)

    return ColoredHypergraph(vertices, edges, edge_members,
                             vertex_colors, edge_colors, layer_of_vertex)


def _restriction_labels(filt, info, X: Subspace, pair_maps, ctx) -> list[tuple]:
    """Labels of the bimap restrictions X x L_t -> target, per layer t."""
    out = []
    for (s, t), (bm, target) in sorted(pair_maps.items(), key=lambda kv: (kv[0],)):
        if s != info.label:
            continue
        restricted = np.einsum("ga,kab->kgb", X.basis % info.p, bm.mats) % bm.q
        sub = MatrixTuple.from_arrays(restricted, bm.q)
        out.append((("t", t, target), ctx.bimap_label(sub, pseudo=False)))
    return sorted(out)


def _projection_labels(filt, info, Y: Subspace, pair_maps, ctx, pseudo_ok) -> list[tuple]:
    """Labels of bimaps into this layer composed with projection by Y.

    The projection onto L_s / Y is realized through the rows of the standard
    orthogonal complement of Y, the fixed duality choice."""
    out = []
    perp = Y.orthogonal_complement()
    for (t, u), (bm, target) in sorted(pair_maps.items(), key=lambda kv: (kv[0],)):
        if target != info.label:
            continue
        projected = np.einsum("gk,kab->gab", perp.basis % info.p, bm.mats) % bm.q
        sub = MatrixTuple.from_arrays(projected, bm.q)
        pseudo = pseudo_ok and t == u
        out.append((("tu", t, u), ctx.bimap_label(sub, pseudo=pseudo)))
    return sorted(out)


def _whole_layer_labels(filt, info, pair_maps, ctx, pseudo_ok) -> tuple:
    pairs = []
    for (t, u), (bm, target) in sorted(pair_maps.items(), key=lambda kv: (kv[0],)):
        if target == info.label:
            pseudo = pseudo_ok and t == u
            pairs.append((("into", t, u), ctx.bimap_label(bm, pseudo=pseudo)))
        if t == info.label:
            pairs.append((("from", u, target), ctx.bimap_label(bm, pseudo=False)))
    return tuple(sorted(pairs))


def _add_cross_edges(filt, a: LayerInfo, b: LayerInfo, pair_maps, vindex, ctx,
                     edges, edge_members, edge_colors):
    G = filt.group
    sig_a, sig_b = _layer_sig(a), _layer_sig(b)
    entry = pair_maps.get((a.label, b.label))
    target_info = None
    if entry is not None:
        bm, target = entry
        target_info = filt.layer_at(target)
    pts_a = projective_points(a.dim, a.p)
    pts_b = projective_points(b.dim, b.p)
    for pa in pts_a:
        xa = a.space.element_of(pa)
        for pb in pts_b:
            yb = b.space.element_of(pb)
            z = G.commutator(xa, yb)
            zvec = None
            if target_info is not None and not target_info.trivial:
                w = target_info.space.vector_of(z)
                if any(w):
                    zvec = normalize_point(w, target_info.p)
            ia, ib = vindex[(a.label, pa)], vindex[(b.label, pb)]
            if zvec is None:
                edges.append(("k2", a.label, b.label, pa, pb))
                edge_members.append((ia, ib))
                edge_colors.append(ctx.intern(("K2", sig_a, sig_b)))
            else:
                ic = vindex[(target_info.label, zvec)]
                edges.append(("k3", a.label, b.label, pa, pb))
                edge_members.append((ia, ib, ic))
                edge_colors.append(ctx.intern(
                    ("K3", sig_a, sig_b, _layer_sig(target_info))))


# ----------------------------------------------------------------------
# Weisfeiler-Leman refinement
# ----------------------------------------------------------------------


@dataclass
class StableColoring:
    """Fixpoint coloring of an incidence graph (left/right = vertices/edges)."""

    left_colors: list[int]
    right_colors: list[int]
    rounds: int
    history: list[tuple[list[int], list[int]]] = field(default_factory=list)
    k: int = 1

    def left_partition(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for c in self.left_colors:
            out[c] = out.get(c, 0) + 1
        return out

    def right_partition(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for c in self.right_colors:
            out[c] = out.get(c, 0) + 1
        return out


def _wl1_round(adj, colors, ctx: ColorContext) -> list[int]:
    new = []
    for v in range(len(colors)):
        counts: dict[int, int] = {}
        for u in adj[v]:
            counts[colors[u]] = counts.get(colors[u], 0) + 1
        desc = ("wl1", colors[v], tuple(sorted(counts.items())))
        new.append(ctx.intern(desc))
    return new


def _wl1(graph: IncidenceGraph, ctx: ColorContext, max_rounds: int) -> StableColoring:
    colors = list(graph.colors)
    history = [(colors[: graph.n_left], colors[graph.n_left:])]
    rounds = 0
    while rounds < max_rounds:
        new = _wl1_round(graph.adj, colors, ctx)
        rounds += 1
        history.append((new[: graph.n_left], new[graph.n_left:]))
        if len(set(new)) == len(set(colors)):
            colors = new
            break
        colors = new
    return StableColoring(colors[: graph.n_left], colors[graph.n_left:],
                          rounds, history, k=1)


def _wl2(graph: IncidenceGraph, ctx: ColorContext, max_rounds: int) -> StableColoring:
    n = graph.n
    if n * n > WL_TUPLE_CAP:
        raise CapExceededError(f"2-WL needs {n * n} tuples, over cap")
    adj = [[False] * n for _ in range(n)]
    for v in range(n):
        for u in graph.adj[v]:
            adj[v][u] = True
    base = graph.colors
    col = [[0] * n for _ in range(n)]
    for a in range(n):
        for b in range(n):
            col[a][b] = ctx.intern(("wl2init", base[a], base[b], a == b, adj[a][b]))
    rounds = 0
    ncls = len({col[a][b] for a in range(n) for b in range(n)})
    while rounds < max_rounds:
        col_counts = []
        for b in range(n):
            cnt: dict[int, int] = {}
            for a in range(n):
                c = col[a][b]
                cnt[c] = cnt.get(c, 0) + 1
            col_counts.append(ctx.intern(("cnt", tuple(sorted(cnt.items())))))
        row_counts = []
        for a in range(n):
            cnt = {}
            for b in range(n):
                c = col[a][b]
                cnt[c] = cnt.get(c, 0) + 1
            row_counts.append(ctx.intern(("cnt", tuple(sorted(cnt.items())))))
        new = [[0] * n for _ in range(n)]
        for a in range(n):
            ra = row_counts[a]
            for b in range(n):
                new[a][b] = ctx.intern(("wl2", col[a][b], col_counts[b], ra))
        rounds += 1
        new_ncls = len({new[a][b] for a in range(n) for b in range(n)})
        col = new
        if new_ncls == ncls:
            break
        ncls = new_ncls
    diag = [col[v][v] for v in range(n)]
    return StableColoring(diag[: graph.n_left], diag[graph.n_left:], rounds, [], k=2)


def wl_refine(graph: IncidenceGraph, k: int, ctx: ColorContext,
              max_rounds: int = MAX_WL_ROUNDS) -> StableColoring:
    """k-dimensional WL on a vertex-colored (incidence) graph, k in {1, 2}."""
    if k == 1:
        return _wl1(graph, ctx, max_rounds)
    if k == 2:
        return _wl2(graph, ctx, max_rounds)
    raise ValueError("only k in {1, 2} is supported")


# ----------------------------------------------------------------------
# characteristic structure extraction and the pipeline loop
# ----------------------------------------------------------------------


def extract_characteristic_subgroups(H: ColoredHypergraph, coloring: StableColoring,
                                     filt: Filter) -> list[Subgroup]:
    """Lift each proper color-class span through the layer projection.

    Classes spanning a whole layer, or lifting to an existing filter term,
    are dropped.  The result is ordered canonically by (color id)."""
    G = filt.group
    by_layer_color: dict[tuple, list[int]] = {}
    for i, (label, pt) in enumerate(H.vertices):
        by_layer_color.setdefault((label, coloring.left_colors[i]), []).append(i)
    existing = {tuple(sorted(sub.elements)) for sub in filt.image()}
    existing.add(tuple(range(G.n)))
    out: list[tuple[int, Subgroup]] = []
    for (label, color), idxs in sorted(by_layer_color.items(), key=lambda kv: kv[0][1]):
        info = filt.layer_at(label)
        pts = np.array([H.vertices[i][1] for i in idxs], dtype=np.int64)
        X = Subspace.from_vectors(pts, info.p, ambient_dim=info.dim)
        if X.dim == 0 or X.dim == info.dim:
            continue
        gens = set(info.lower.elements)
        for row in X.basis:
            gens.add(info.space.element_of(tuple(int(x) for x in row)))
        lifted = closure(G, gens)
        key = tuple(sorted(lifted.elements))
        if key in existing:
            continue
        existing.add(key)
        out.append((color, lifted))
    return [sub for _, sub in sorted(out, key=lambda t: t[0])]


@dataclass
class PipelineResult:
    filter: Filter
    hypergraph: ColoredHypergraph
    coloring: StableColoring
    graph: IncidenceGraph
    iterations: int
    refinements: int


def run_pipeline(G: FiniteGroup, g: int = 1, k: int = 1,
                 ctx: ColorContext | None = None,
                 cap: int = DEFAULT_EDGE_CAP,
                 marks: dict[tuple, int] | None = None,
                 filt: Filter | None = None) -> PipelineResult:
    """Iterate: build hypergraph, k-WL, extract subgroups, refine the filter,
    until the filter stops changing."""
    ctx = ctx if ctx is not None else ColorContext()
    filt = filt if filt is not None else initial_filter(G)
    max_iter = max(1, int(np.log2(max(2, G.n))) + 1)
    refinements = 0
    for it in range(1, max_iter + 1):
        H = build_hypergraph(filt, g, ctx, cap=cap, marks=marks)
        graph = incidence_graph(H, ctx)
        coloring = wl_refine(graph, k, ctx)
        S = extract_characteristic_subgroups(H, coloring, filt)
        if not S:
            return PipelineResult(filt, H, coloring, graph, it, refinements)
        for sub in S:
            before = len(filt.entries)
            filt = refine_with(filt, sub)
            if len(filt.entries) > before:
                refinements += 1
            if marks:
                # marked points live in layer coordinates; refining relabels
                # layers, so individualized runs refine once per pass only
                break
    return PipelineResult(filt, H, coloring, graph, max_iter, refinements)


def joint_pipeline(G1: FiniteGroup, G2: FiniteGroup, g: int = 1, k: int = 1,
                   cap: int = DEFAULT_EDGE_CAP
                   ) -> tuple[PipelineResult, PipelineResult, ColorContext]:
    """Run both groups against one shared color context, making color ids
    directly comparable."""
    ctx = ColorContext()
    r1 = run_pipeline(G1, g, k, ctx=ctx, cap=cap)
    r2 = run_pipeline(G2, g, k, ctx=ctx, cap=cap)
    return r1, r2, ctx


def signature(res: PipelineResult) -> tuple:
    """Canonical multiset of (layer shape, color, class size) over vertices
    and edges; equal for isomorphic groups run against a shared context."""
    vert: dict[tuple, int] = {}
    for i, (label, _) in enumerate(res.hypergraph.vertices):
        info = res.filter.layer_at(label)
        key = ("v", info.p, info.dim, res.coloring.left_colors[i])
        vert[key] = vert.get(key, 0) + 1
    for e, c in enumerate(res.coloring.right_colors):
        key = ("e", c)
        vert[key] = vert.get(key, 0) + 1
    return tuple(sorted(vert.items()))


# ----------------------------------------------------------------------
# the worked genus-1 rank-partition graph for a single alternating tuple
# ----------------------------------------------------------------------


def tuple_rank_graph(t: MatrixTuple, ctx: ColorContext | None = None
                     ) -> tuple[ColoredHypergraph, ColorContext]:
    """Points vs codimension-1 subspaces of the codomain of an alternating
    tuple: the vertex side is PG_0(F_q^m); each hyperedge is a hyperplane,
    colored by the rank of the pencil matrix at its orthogonal point."""
    ctx = ctx if ctx is not None else ColorContext()
    q, m = t.q, t.m
    pts = projective_points(m, q)
    vertices = [(("codomain",), p) for p in pts]
    vindex = {v: i for i, v in enumerate(vertices)}
    vertex_colors = [ctx.intern(("V", "codomain", m, q)) for _ in pts]
    edges, members, ecolors = [], [], []
    for Y in enumerate_subspaces(m, q, m - 1):
        perp_pt = normalize_point(Y.orthogonal_complement().basis[0], q)
        r = rank_array(t.pencil(perp_pt), q)
        edges.append(("hyperplane", perp_pt))
        members.append(tuple(vindex[(("codomain",), p)] for p in Y.points()))
        ecolors.append(ctx.intern(("E", "codim1", "rank", r)))
    H = ColoredHypergraph(vertices, edges, members, vertex_colors, ecolors,
                          [("codomain",)] * len(pts))
    return H, ctx
