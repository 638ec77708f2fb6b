"""Average-case pseudo-isometry testing for alternating matrix tuples.

Two drivers are provided.  The autometry driver takes a prefix segment A of
the first tuple, gives up when Aut(A) is larger than the configured bound,
and otherwise matches A against every c-tuple from the span of the second
tuple through exact isometry cosets.  The adjoint driver slices the first
tuple into segments, finds one whose adjoint algebra is small, enumerates
the adjoint space to each candidate c-tuple, and keeps the invertible pairs
(T, S) with S = T^-t whose sandwich spans the target; it works in every
characteristic, including 2.

Candidate c-tuples are pruned by congruence invariants (rank, Pfaffian up to
a common determinant factor, and pairwise pencil rank profiles) before any
linear solve; a true image of A always survives these filters, so the
output set is exactly the set of pseudo-isometries whenever the generic
condition holds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import CapExceededError, ShapeMismatchError
from .bimaps import (
    MatrixTuple,
    adjoint_algebra,
    adjoint_space,
    autometry_group,
    isometry_coset,
)
from .linalg import rank_array, span_equal_arrays, span_vectors

PISOM_RESULT_CAP = 500_000


@dataclass
class PisomConfig:
    """Segment length c, bound exponent (|Adj| <= q^s_exp; default n), mode
    and the low-rank matching heuristic."""

    c: int = 3
    s_exp: int | None = None
    mode: str = "adjoint"            # "adjoint" | "autometry"
    low_rank: bool = False

    def bound_exp(self, n: int) -> int:
        return self.s_exp if self.s_exp is not None else n


@dataclass
class PisomResult:
    outcome: str                     # "decided" | "generic_fail"
    witnesses: list[np.ndarray] = field(default_factory=list)
    segment: int | None = None
    candidates_tested: int = 0

    @property
    def decided(self) -> bool:
        return self.outcome == "decided"

    @property
    def isometric(self) -> bool:
        return self.decided and bool(self.witnesses)


def pfaffian(a: np.ndarray, q: int) -> int:
    """Pfaffian mod q of an alternating matrix (0 for odd dimension)."""
    n = a.shape[0]
    if n % 2 == 1:
        return 0
    if n == 0:
        return 1
    total = 0
    for j in range(1, n):
        sign = (-1) ** (j - 1)
        rest = [k for k in range(1, n) if k != j]
        sub = a[np.ix_(rest, rest)]
        total += sign * int(a[0, j]) * pfaffian(sub, q)
    return total % q


def _pencil2_profile(w1: np.ndarray, w2: np.ndarray, q: int) -> tuple:
    """Rank profile of the 2-matrix pencil over the q+1 projective points."""
    out = [rank_array(w1, q)]
    for x in range(q):
        out.append(rank_array((w1 * x + w2) % q, q))
    return tuple(out)


def _span_elements(t: MatrixTuple) -> list[np.ndarray]:
    basis = t.span_basis()
    return [v.reshape(t.n, t.n) for v in span_vectors(basis, t.q)]


def _candidate_tuples(A: MatrixTuple, H: MatrixTuple):
    """Candidate images of A inside span(H), filtered by congruence
    invariants: rank and Pfaffian per position (Pfaffian scaled by one common
    determinant factor) and pairwise pencil profiles against A."""
    q, c = A.q, A.m
    elements = _span_elements(H)
    ranks = [rank_array(w, q) for w in elements]
    pfs = [pfaffian(w, q) if A.n % 2 == 0 and A.n <= 8 else None for w in elements]
    a_ranks = [rank_array(a, q) for a in A.mats]
    a_pfs = [pfaffian(a, q) if A.n % 2 == 0 and A.n <= 8 else None for a in A.mats]
    lambdas = [l for l in range(1, q)] if a_pfs[0] is not None else [None]
    seen = set()
    for lam in lambdas:
        pools = []
        for i in range(c):
            pool = []
            for w, r, pf in zip(elements, ranks, pfs):
                if r != a_ranks[i]:
                    continue
                if lam is not None and pf != (lam * a_pfs[i]) % q:
                    continue
                pool.append(w)
            pools.append(pool)
        for combo in _pair_pruned_product(A, pools, q):
            key = tuple(w.tobytes() for w in combo)
            if key in seen:
                continue
            seen.add(key)
            yield combo


def _pair_pruned_product(A: MatrixTuple, pools, q):
    c = A.m
    profiles = {}
    for i in range(c):
        for j in range(i + 1, c):
            profiles[(i, j)] = _pencil2_profile(A.mats[i], A.mats[j], q)

    def grow(i: int, chosen: list[np.ndarray]):
        if i == c:
            yield tuple(chosen)
            return
        for w in pools[i]:
            if all(_pencil2_profile(chosen[j], w, q) == profiles[(j, i)]
                   for j in range(i)):
                yield from grow(i + 1, chosen + [w])

    yield from grow(0, [])


def _verify_and_add(G: MatrixTuple, hflat: np.ndarray, T: np.ndarray,
                    out: dict[bytes, np.ndarray]):
    s = G.sandwich(T)
    if span_equal_arrays(s.mats.reshape(s.m, -1), hflat, G.q):
        out[T.tobytes()] = T % G.q


def algo_first_average(G: MatrixTuple, H: MatrixTuple,
                       cfg: PisomConfig | None = None) -> PisomResult:
    """Prefix-segment driver: bound Aut(A), then match A against every
    c-tuple of span(H) by exact isometry cosets.  Requires odd q."""
    cfg = cfg or PisomConfig(mode="autometry")
    _check_shapes(G, H)
    if G.q % 2 == 0:
        raise ShapeMismatchError("the autometry driver needs odd characteristic")
    n, q = G.n, G.q
    c = min(cfg.c, G.m)
    bound = q ** cfg.bound_exp(n)
    A = MatrixTuple.from_arrays(G.mats[:c], q, alternating=True)
    try:
        aut = autometry_group(A)
    except CapExceededError:
        return PisomResult("generic_fail")
    if len(aut) > bound:
        return PisomResult("generic_fail")
    out: dict[bytes, np.ndarray] = {}
    hflat = H.mats.reshape(H.m, -1)
    tested = 0
    gdim = len(G.span_basis())
    hdim = len(H.span_basis())
    if gdim == hdim:
        adjA_dim = adjoint_algebra(A).dim
        for combo in _candidate_tuples(A, H):
            tested += 1
            B = MatrixTuple.from_arrays(np.stack(combo), q, alternating=True)
            basis = adjoint_space(A, B)
            if basis.dim != adjA_dim:
                continue  # isometric tuples have equal adjoint dimensions
            coset = isometry_coset(A, B, method="adjoint")
            for T in coset.elements:
                _verify_and_add(G, hflat, T, out)
            if len(out) > PISOM_RESULT_CAP:
                raise CapExceededError("witness set over result cap")
    return PisomResult("decided", [out[k] for k in sorted(out)], 0, tested)


def algo_second_average(G: MatrixTuple, H: MatrixTuple,
                        cfg: PisomConfig | None = None) -> PisomResult:
    """Segment-sliced adjoint driver; works in every characteristic.

    Generic failure means every length-c segment of G has adjoint algebra
    larger than the bound; otherwise the complete pseudo-isometry set is
    returned (possibly empty).
    """
    cfg = cfg or PisomConfig()
    _check_shapes(G, H)
    n, q = G.n, G.q
    c = min(cfg.c, G.m)
    bound_exp = cfg.bound_exp(n)
    segment = None
    A = None
    for i, cand in enumerate(_segment_tuples(G, c, cfg)):
        if adjoint_algebra(cand).dim <= bound_exp:
            segment = i
            A = cand
            break
    if A is None:
        return PisomResult("generic_fail")
    out: dict[bytes, np.ndarray] = {}
    hflat = H.mats.reshape(H.m, -1)
    tested = 0
    gdim = len(G.span_basis())
    hdim = len(H.span_basis())
    if gdim == hdim:
        for combo in _candidate_tuples(A, H):
            tested += 1
            B = MatrixTuple.from_arrays(np.stack(combo), q, alternating=True)
            basis = adjoint_space(A, B)
            if basis.dim > bound_exp:
                continue
            for X, S in basis.elements():
                # a pseudo-isometry T contributes (X, S) = (T^t, T^-1)
                if not _invertible(X, q) or not _invertible(S, q):
                    continue
                T = X.T % q
                if np.any((S @ T) % q != np.eye(n, dtype=np.int64)):
                    continue
                _verify_and_add(G, hflat, T, out)
            if len(out) > PISOM_RESULT_CAP:
                raise CapExceededError("witness set over result cap")
    return PisomResult("decided", [out[k] for k in sorted(out)], segment, tested)


def _segment_tuples(G: MatrixTuple, c: int, cfg: PisomConfig):
    """Candidate segments: the low-rank triple first when requested, then the
    consecutive slices of length c."""
    q = G.q
    if cfg.low_rank:
        low = low_rank_prefilter_sources(G, c)
        if low is not None:
            yield MatrixTuple.from_arrays(np.stack(low), q, alternating=True)
    for i in range(G.m // c):
        yield MatrixTuple.from_arrays(G.mats[c * i: c * (i + 1)], q, alternating=True)


def _invertible(a: np.ndarray, q: int) -> bool:
    return rank_array(a, q) == a.shape[0]


def _check_shapes(G: MatrixTuple, H: MatrixTuple):
    if (G.q, G.n, G.ncols, G.m) != (H.q, H.n, H.ncols, H.m):
        raise ShapeMismatchError("tuples have different shapes")
    if not (G.alternating and H.alternating):
        raise ShapeMismatchError("pseudo-isometry drivers expect alternating tuples")


# ----------------------------------------------------------------------
# the low-rank heuristic
# ----------------------------------------------------------------------


def low_rank_prefilter(G: MatrixTuple, H: MatrixTuple,
                       cap: int = 10**6) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Non-full-rank elements of span(G) and span(H), by full span sweeps.

    Matching a low-rank segment of G only against the low-rank part of
    span(H) is sound because sandwiching by an invertible T preserves rank.
    """
    q, n = G.q, G.n
    if q ** len(G.span_basis()) > cap or q ** len(H.span_basis()) > cap:
        raise CapExceededError("span sweep over cap")
    g_low = [w for w in _span_elements(G) if rank_array(w, q) < n and w.any()]
    h_low = [w for w in _span_elements(H) if rank_array(w, q) < n and w.any()]
    return g_low, h_low


def low_rank_prefilter_sources(G: MatrixTuple, c: int) -> list[np.ndarray] | None:
    """First c low-rank span elements of G in canonical order, or None."""
    q, n = G.q, G.n
    low = [w for w in _span_elements(G) if rank_array(w, q) < n and w.any()]
    if len(low) < c:
        return None
    return low[:c]
