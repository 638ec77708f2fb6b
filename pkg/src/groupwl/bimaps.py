"""Alternating/bilinear matrix tuples over F_q: adjoint algebras and spaces,
isometry and pseudo-isometry by exact brute force at desk scale, rank-pencil
profiles, radicals, isotopism testing, and the stability predicate.

Two independent routes exist for isometry-type questions: filtering GL(n, q)
directly (vectorized over all q^{n^2} candidates, with staged pruning and an
exact per-candidate verification), and enumerating the adjoint algebra/space.
The two must agree, and tests hold them to that.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import (
    CapExceededError,
    NotAlternatingError,
    ShapeMismatchError,
)
from .linalg import (
    FFMatrix,
    Modulus,
    Subspace,
    is_prime,
    normalize_point,
    nullspace_array,
    projective_points,
    rank_array,
    rref_array,
    span_equal_arrays,
    span_vectors,
    enumerate_subspaces,
)

GL_BRUTE_CAP = 50_000_000       # largest q^(n^2) we will sweep
ADJ_ENUM_CAP = 600_000          # largest q^dim adjoint space we will enumerate
RESULT_CAP = 1_000_000          # largest witness set we will materialize


@dataclass(frozen=True)
class MatrixTuple:
    """An m-tuple of n x n' matrices over F_q; the object of isotopism tests."""

    q: int
    mats: np.ndarray  # shape (m, n, n'), entries reduced mod q
    alternating: bool = False

    @classmethod
    def from_arrays(cls, mats, q: int, alternating: bool | None = None) -> "MatrixTuple":
        arr = np.asarray(mats, dtype=np.int64) % q
        if arr.ndim != 3:
            raise ShapeMismatchError("a tuple needs shape (m, n, n')")
        if not is_prime(q):
            raise ValueError(f"tuple field must be prime, got {q}")
        if alternating is None:
            alternating = arr.shape[1] == arr.shape[2] and all(
                _is_alternating(a, q) for a in arr
            )
        elif alternating:
            for a in arr:
                if a.shape[0] != a.shape[1] or not _is_alternating(a, q):
                    raise NotAlternatingError("matrix fails v^t G v = 0")
        arr.setflags(write=False)
        return cls(q, arr, alternating)

    @classmethod
    def from_ffmatrices(cls, mats: list[FFMatrix], alternating: bool | None = None) -> "MatrixTuple":
        q = mats[0].b
        return cls.from_arrays(np.stack([m.a for m in mats]), q, alternating)

    @property
    def m(self) -> int:
        return self.mats.shape[0]

    @property
    def n(self) -> int:
        return self.mats.shape[1]

    @property
    def ncols(self) -> int:
        return self.mats.shape[2]

    def matrices(self) -> list[FFMatrix]:
        mod = Modulus.of(self.q)
        return [FFMatrix(a, mod) for a in self.mats]

    def span_basis(self) -> np.ndarray:
        """RREF basis of the linear span, rows = flattened matrices."""
        flat = self.mats.reshape(self.m, -1)
        red, r, _ = rref_array(flat, self.q)
        return red[:r]

    def span_elements(self) -> list[np.ndarray]:
        """All q^rank elements of the span, as (n, n') arrays."""
        basis = self.span_basis()
        return [v.reshape(self.n, self.ncols) for v in span_vectors(basis, self.q)]

    def sandwich(self, T: np.ndarray) -> "MatrixTuple":
        """T^t G T applied to every matrix."""
        out = (np.swapaxes(T, -1, -2) @ self.mats @ T) % self.q
        return MatrixTuple.from_arrays(out, self.q, alternating=None)

    def recombine(self, R: np.ndarray) -> "MatrixTuple":
        """Tuple with matrices sum_j R[i, j] * G_j."""
        out = np.tensordot(np.asarray(R, dtype=np.int64) % self.q, self.mats, axes=(1, 0)) % self.q
        return MatrixTuple.from_arrays(out, self.q, alternating=None)

    def pencil(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.int64) % self.q
        return np.tensordot(v, self.mats, axes=(0, 0)) % self.q

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, MatrixTuple)
            and self.q == other.q
            and self.mats.shape == other.mats.shape
            and np.array_equal(self.mats, other.mats)
        )

    def __hash__(self):
        return hash((self.q, self.mats.shape, self.mats.tobytes()))


def _is_alternating(a: np.ndarray, q: int) -> bool:
    """v^t a v = 0 for all v; checked on basis vectors and basis-pair sums,
    which is sufficient in every characteristic."""
    if np.any(np.diagonal(a) % q):
        return False
    return not np.any((a + a.T) % q)


def random_alternating_tuple(n: int, m: int, q: int, rng: np.random.Generator) -> MatrixTuple:
    mats = np.zeros((m, n, n), dtype=np.int64)
    iu = np.triu_indices(n, 1)
    for i in range(m):
        vals = rng.integers(0, q, size=len(iu[0]))
        mats[i][iu] = vals
        mats[i] -= mats[i].T
    return MatrixTuple.from_arrays(mats % q, q, alternating=True)


def random_tuple(n: int, ncols: int, m: int, q: int, rng: np.random.Generator) -> MatrixTuple:
    return MatrixTuple.from_arrays(rng.integers(0, q, size=(m, n, ncols)), q)


# ----------------------------------------------------------------------
# adjoint algebra / space
# ----------------------------------------------------------------------


@dataclass
class AdjointBasis:
    """Basis of {(A, D) : A G_i = H_i D for all i} (H = G for the algebra)."""

    n: int
    q: int
    pairs: list[tuple[np.ndarray, np.ndarray]]

    @property
    def dim(self) -> int:
        return len(self.pairs)

    def verify(self, G: MatrixTuple, H: MatrixTuple) -> bool:
        for A, D in self.pairs:
            for g, h in zip(G.mats, H.mats):
                if np.any((A @ g - h @ D) % self.q):
                    return False
        return True

    def elements(self, cap: int = ADJ_ENUM_CAP):
        """All q^dim pairs (A, D) of the space."""
        if self.q**self.dim > cap:
            raise CapExceededError(f"adjoint space of dim {self.dim} exceeds cap")
        n = self.n
        if self.dim == 0:
            yield np.zeros((n, n), dtype=np.int64), np.zeros((n, n), dtype=np.int64)
            return
        flat = np.stack([np.concatenate([A.reshape(-1), D.reshape(-1)]) for A, D in self.pairs])
        for v in span_vectors(flat, self.q):
            yield v[: n * n].reshape(n, n), v[n * n:].reshape(n, n)


def _adjoint_system(G: MatrixTuple, H: MatrixTuple) -> np.ndarray:
    """Rows of the linear system A G_i - H_i D = 0 in row-major vec(A), vec(D)."""
    n = G.n
    eye = np.eye(n, dtype=np.int64)
    blocks = []
    for g, h in zip(G.mats, H.mats):
        left = np.kron(eye, g.T)       # vec_r(A g) = left @ vec_r(A)
        right = np.kron(h, eye)        # vec_r(h D) = right @ vec_r(D)
        blocks.append(np.concatenate([left, -right], axis=1))
    return np.concatenate(blocks, axis=0) % G.q


def adjoint_space(G: MatrixTuple, H: MatrixTuple) -> AdjointBasis:
    """Basis of the adjoint space from G to H."""
    if (G.q, G.n, G.ncols, G.m) != (H.q, H.n, H.ncols, H.m):
        raise ShapeMismatchError("adjoint space needs matching tuple shapes")
    if G.n != G.ncols:
        raise ShapeMismatchError("adjoint space implemented for square tuples")
    n, q = G.n, G.q
    system = _adjoint_system(G, H)
    null = nullspace_array(system, q)
    pairs = [(v[: n * n].reshape(n, n), v[n * n:].reshape(n, n)) for v in null]
    basis = AdjointBasis(n, q, pairs)
    assert basis.verify(G, H), "adjoint basis failed substitution check"
    return basis


def adjoint_algebra(G: MatrixTuple) -> AdjointBasis:
    return adjoint_space(G, G)


def adjoint_dim_randomized(G: MatrixTuple, H: MatrixTuple, seed: int) -> int:
    """Same solve with shuffled equation rows; an independent path to the dim."""
    q = G.q
    system = _adjoint_system(G, H)
    rng = np.random.default_rng(seed)
    system = system[rng.permutation(system.shape[0])]
    return len(nullspace_array(system, q))


# ----------------------------------------------------------------------
# vectorized GL(n, q) sweeps
# ----------------------------------------------------------------------


def _pairs(n: int) -> list[tuple[int, int]]:
    return list(combinations(range(n), 2))


def lambda_coords(a: np.ndarray, q: int) -> np.ndarray:
    """Strictly-upper coordinates of an alternating matrix."""
    n = a.shape[0]
    return np.array([a[i, j] % q for i, j in _pairs(n)], dtype=np.int64)


def lambda_matrix(v: np.ndarray, n: int, q: int) -> np.ndarray:
    out = np.zeros((n, n), dtype=np.int64)
    for k, (i, j) in enumerate(_pairs(n)):
        out[i, j] = v[k] % q
        out[j, i] = (-v[k]) % q
    return out


_DIGIT_TABLES: dict[tuple[int, int], tuple[np.ndarray, np.ndarray, int]] = {}


def _digit_tables(n: int, q: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Base-q digit tables splitting an n*n index into low/high halves."""
    key = (n, q)
    if key not in _DIGIT_TABLES:
        total_digits = n * n
        lo_digits = total_digits // 2
        hi_digits = total_digits - lo_digits

        def table(k: int) -> np.ndarray:
            idx = np.arange(q**k, dtype=np.int64)
            return ((idx[:, None] // (q ** np.arange(k, dtype=np.int64))[None, :]) % q).astype(np.int16)

        _DIGIT_TABLES[key] = (table(lo_digits), table(hi_digits), lo_digits)
    return _DIGIT_TABLES[key]


def _chunk_flat(hi_start: int, hi_count: int, n: int, q: int) -> np.ndarray:
    """Entry-major block of matrices: shape (n*n, hi_count * nlo), entry d of
    matrix b at [d, b]; base-q digit d of the matrix number, row-major."""
    lo, hi, lo_digits = _digit_tables(n, q)
    nlo = lo.shape[0]
    size = hi_count * nlo
    out = np.empty((n * n, size), dtype=np.int16)
    for d in range(lo_digits):
        out[d] = np.tile(lo[:, d], hi_count)
    for d in range(n * n - lo_digits):
        out[lo_digits + d] = np.repeat(hi[hi_start:hi_start + hi_count, d], nlo)
    return out


def _minors_flat(TF: np.ndarray, n: int, row_pairs, col_pairs) -> np.ndarray:
    """Unreduced 2x2 minors in entry-major layout: (len(rp)*len(cp), B)."""
    out = np.empty((len(row_pairs) * len(col_pairs), TF.shape[1]), dtype=np.int16)
    k = 0
    for (i, j) in row_pairs:
        for (c, l) in col_pairs:
            np.subtract(TF[i * n + c] * TF[j * n + l],
                        TF[i * n + l] * TF[j * n + c], out=out[k])
            k += 1
    return out


def _det_flat(TF: np.ndarray, n: int, q: int, minors: np.ndarray | None = None) -> np.ndarray:
    """Determinant mod q from the entry-major layout (n <= 4)."""
    T = TF.astype(np.int32)
    if n == 1:
        return T[0] % q
    if n == 2:
        return (T[0] * T[3] - T[1] * T[2]) % q
    if n == 3:
        d = (
            T[0] * (T[4] * T[8] - T[5] * T[7])
            - T[1] * (T[3] * T[8] - T[5] * T[6])
            + T[2] * (T[3] * T[7] - T[4] * T[6])
        )
        return d % q
    if n == 4:
        cp = _pairs(4)
        P = len(cp)
        if minors is None:
            minors = _minors_flat(TF, n, cp, cp)
        top = minors[0 * P:(0 + 1) * P].astype(np.int32)        # row pair (0,1)
        bot = minors[5 * P:(5 + 1) * P].astype(np.int32)        # row pair (2,3)
        comp = {(0, 1): (2, 3), (0, 2): (1, 3), (0, 3): (1, 2),
                (1, 2): (0, 3), (1, 3): (0, 2), (2, 3): (0, 1)}
        d = np.zeros(TF.shape[1], dtype=np.int32)
        for b, (k, l) in enumerate(cp):
            sign = (-1) ** (k + l + 1)
            kc = cp.index(comp[(k, l)])
            d = d + sign * top[b] * bot[kc]
        return d % q
    raise CapExceededError(f"batched determinant limited to n <= 4, got {n}")


def _det_batch(T: np.ndarray, q: int) -> np.ndarray:
    """Determinant mod q of a (B, n, n) stack."""
    B, n = T.shape[0], T.shape[1]
    return _det_flat(np.ascontiguousarray(T.reshape(B, n * n).T), n, q)


def gl_sweep(n: int, q: int, functionals: np.ndarray, rhs: np.ndarray | None = None,
             cap: int = GL_BRUTE_CAP):
    """Invertible T with functionals @ compound(T) = rhs (mod q), exactly.

    `functionals` has shape (r, P*P), acting on the flattened matrix of 2x2
    minors of T (row pairs x column pairs, lexicographic).  Since an
    alternating sandwich satisfies vec(T^t W T) = vec(W) @ compound(T), linear
    conditions on sandwiches are exactly of this form; no post-verification
    is needed.  Yields (B, n, n) int64 batches of matching T.

    Staging: functionals cut candidates by ~q^-r before the determinant is
    evaluated, and all accumulations stay within int16 (|minor| < q^2,
    coefficient < q, at most (n*n choose 2)^2 terms).
    """
    total = q ** (n * n)
    if total > cap:
        raise CapExceededError(f"GL sweep of size {total} exceeds cap {cap}")
    rp = _pairs(n)
    P = len(rp)
    fun = ((np.asarray(functionals, dtype=np.int64) % q).astype(np.int16)
           if functionals is not None else np.zeros((0, P * P), dtype=np.int16))
    r = fun.shape[0]
    tgt = np.zeros(r, dtype=np.int16) if rhs is None else (np.asarray(rhs, dtype=np.int64) % q).astype(np.int16)
    lo, hi, _ = _digit_tables(n, q)
    nlo = lo.shape[0]
    hi_total = hi.shape[0]
    hi_per_chunk = max(1, 500_000 // nlo)
    for hi_start in range(0, hi_total, hi_per_chunk):
        hc = min(hi_per_chunk, hi_total - hi_start)
        TF = _chunk_flat(hi_start, hc, n, q)
        if r:
            minors = _minors_flat(TF, n, rp, rp)
            v0 = fun[:1] @ minors
            keep = np.flatnonzero((v0[0] - tgt[0]) % q == 0)
            if keep.size == 0:
                continue
            minors = minors[:, keep]
            TF = TF[:, keep]
            if r > 1:
                v = fun[1:] @ minors
                ok = np.all((v - tgt[1:, None]) % q == 0, axis=0)
                keep2 = np.flatnonzero(ok)
                if keep2.size == 0:
                    continue
                minors = minors[:, keep2]
                TF = TF[:, keep2]
            det = _det_flat(TF, n, q, minors=minors if n == 4 else None)
        else:
            det = _det_flat(TF, n, q)
        final = np.flatnonzero(det != 0)
        if final.size:
            yield np.ascontiguousarray(TF[:, final].T).astype(np.int64).reshape(-1, n, n)


def gl_sweep_candidates(n: int, q: int, functionals: np.ndarray,
                        cap: int = GL_BRUTE_CAP):
    """Single-matrix iterator over gl_sweep batches."""
    for batch in gl_sweep(n, q, functionals, cap=cap):
        yield from batch


def _sandwich_functionals_span(G: MatrixTuple, H: MatrixTuple) -> np.ndarray | None:
    """Functionals on compound(T) expressing span(T^t G T) <= span(H).

    Returns None when the span dimensions differ (no solutions)."""
    q, n = G.q, G.n
    gb = G.span_basis()
    hb = H.span_basis()
    if gb.shape[0] != hb.shape[0]:
        return None
    # K rows annihilate span(H) in Lambda coordinates
    hl = np.stack([lambda_coords(h.reshape(n, n), q) for h in hb]) if hb.shape[0] else None
    P = len(_pairs(n))
    if hl is None or hb.shape[0] == 0:
        K = np.eye(P, dtype=np.int64)
    else:
        K = nullspace_array(hl, q)
    if K.shape[0] == 0:
        return np.zeros((0, P * P), dtype=np.int64)
    gl = np.stack([lambda_coords(g.reshape(n, n), q) for g in gb])
    # vec_Lambda(T^t W T) = lambda(W) @ C2(T); require K . (g @ C2) = 0
    out = np.zeros((gl.shape[0] * K.shape[0], P * P), dtype=np.int64)
    r = 0
    for g in gl:
        for k in K:
            out[r] = np.outer(g, k).reshape(-1) % q
            r += 1
    return out


def pseudo_isometry_bruteforce(G: MatrixTuple, H: MatrixTuple,
                               cap: int = GL_BRUTE_CAP) -> list[np.ndarray]:
    """{T in GL(n, q) : span(T^t G T) = span(H)}, by exhaustive GL sweep.

    The oracle for the average-case algorithms.  Span containment is imposed
    through exact compound-matrix functionals and the dimensions are matched
    up front, so containment + invertibility already certifies equality; a
    sampled sandwich check guards the implementation.
    """
    _same_shape(G, H)
    q, n = G.q, G.n
    fun = _sandwich_functionals_span(G, H)
    if fun is None:
        return []
    out: list[np.ndarray] = []
    hflat = H.mats.reshape(H.m, -1)
    for batch in gl_sweep(n, q, fun, cap=cap):
        if len(out) + batch.shape[0] > RESULT_CAP:
            raise CapExceededError("pseudo-isometry witness set exceeds result cap")
        out.extend(batch)
    for T in out[:2] + out[-2:]:
        s = G.sandwich(T)
        assert span_equal_arrays(s.mats.reshape(s.m, -1), hflat, q), "sweep lost exactness"
    return out


def _same_shape(G: MatrixTuple, H: MatrixTuple):
    if (G.q, G.n, G.ncols, G.m) != (H.q, H.n, H.ncols, H.m):
        raise ShapeMismatchError("tuples have different shapes")


def _sandwich_functionals_exact(A: MatrixTuple, B: MatrixTuple):
    """Conditions vec(T^t A_s T) = vec(B_s) on compound(T), rows plus rhs."""
    q, n = A.q, A.n
    P = len(_pairs(n))
    rows = np.zeros((A.m * P, P * P), dtype=np.int64)
    rhs = np.zeros(A.m * P, dtype=np.int64)
    r = 0
    for a, b in zip(A.mats, B.mats):
        la = lambda_coords(a, q)
        lb = lambda_coords(b, q)
        for col in range(P):
            rows[r].reshape(P, P)[:, col] = la
            rhs[r] = lb[col]
            r += 1
    return rows % q, rhs % q


def isometry_coset_elements(A: MatrixTuple, B: MatrixTuple,
                            cap: int = GL_BRUTE_CAP,
                            method: str = "auto") -> list[np.ndarray]:
    """All T in GL(n, q) with T^t A T = B, exactly.

    method "gl" sweeps GL; "adjoint" enumerates the adjoint space and keeps
    exact isometries; "auto" picks GL for small n, adjoint otherwise.
    """
    _same_shape(A, B)
    q, n = A.q, A.n
    if not A.alternating or not B.alternating:
        raise NotAlternatingError("isometry machinery expects alternating tuples")
    if method == "auto":
        method = "gl" if q ** (n * n) <= 60_000 else "adjoint"
    out = []
    if method == "gl":
        if q ** (n * n) > cap:
            raise CapExceededError("GL sweep over cap")
        rows, rhs = _sandwich_functionals_exact(A, B)
        for batch in gl_sweep(n, q, rows, rhs=rhs, cap=cap):
            out.extend(batch)
        for T in out[:2]:
            assert not np.any((A.sandwich(T).mats - B.mats) % q), "sweep lost exactness"
    elif method == "adjoint":
        basis = adjoint_space(A, B)
        if q**basis.dim > ADJ_ENUM_CAP:
            raise CapExceededError(f"adjoint space dim {basis.dim} too large to enumerate")
        for X, Dm in basis.elements():
            # candidate T with T^t = X; exactness checked directly
            if _det_batch(X[None, :, :].astype(np.int16), q)[0] == 0:
                continue
            T = X.T % q
            if not np.any((A.sandwich(T).mats - B.mats) % q):
                out.append(T)
    else:
        raise ValueError(f"unknown method {method!r}")
    uniq = {t.tobytes(): t for t in out}
    return [uniq[k] for k in sorted(uniq)]


@dataclass
class IsometryCoset:
    """The (possibly empty) set {T : T^t A T = B}, a coset of Aut(A)."""

    representative: np.ndarray | None
    elements: list[np.ndarray]

    @property
    def size(self) -> int:
        return len(self.elements)

    @property
    def empty(self) -> bool:
        return self.representative is None

    def stabilizer_generators(self) -> list[np.ndarray]:
        return list(self.elements)


def isometry_coset(A: MatrixTuple, B: MatrixTuple, cap: int = GL_BRUTE_CAP,
                   method: str = "auto") -> IsometryCoset:
    elems = isometry_coset_elements(A, B, cap=cap, method=method)
    rep = elems[0] if elems else None
    return IsometryCoset(rep, elems)


def autometry_group(G: MatrixTuple, cap: int = GL_BRUTE_CAP,
                    method: str = "auto") -> list[np.ndarray]:
    """Aut(G) = Isom(G, G), exact."""
    return isometry_coset_elements(G, G, cap=cap, method=method)


# ----------------------------------------------------------------------
# isotopism
# ----------------------------------------------------------------------


def gl_elements(n: int, q: int, cap: int = 200_000) -> list[np.ndarray]:
    """All invertible n x n matrices over F_q (tiny n only)."""
    P = len(_pairs(n))
    out = []
    for batch in gl_sweep(n, q, np.zeros((0, P * P), dtype=np.int64), cap=cap):
        out.extend(batch)
    return out


def isotopism_bruteforce(alpha: MatrixTuple, beta: MatrixTuple,
                         cap: int = ADJ_ENUM_CAP) -> tuple[bool, tuple | None]:
    """Decide existence of (T, S, R) with T^t alpha S = beta^R.

    Genus-1 fast path: a single-matrix tuple is determined up to isotopism
    by its rank.  In general R runs over GL(m, q) and for each target the
    principal-isotopism space {(X, Y) : X alpha_i = beta^R_i Y} is enumerated
    for an invertible pair.
    """
    if (alpha.q, alpha.n, alpha.ncols, alpha.m) != (beta.q, beta.n, beta.ncols, beta.m):
        return False, None
    q = alpha.q
    if alpha.m == 1:
        ra = rank_array(alpha.mats[0], q)
        rb = rank_array(beta.mats[0], q)
        if ra != rb:
            return False, None
        wit = _rank_normalizers(alpha.mats[0], beta.mats[0], q)
        return True, wit
    for R in gl_elements(alpha.m, q):
        target = beta.recombine(R)
        found = _principal_isotopism(alpha, target, cap)
        if found is not None:
            X, Y = found
            return True, (X.T % q, _inv_mod(Y, q), R)
    return False, None


def _principal_isotopism(alpha: MatrixTuple, beta: MatrixTuple, cap: int):
    """Invertible (X, Y) with X alpha_i = beta_i Y, or None."""
    q = alpha.q
    nl, nr = alpha.n, alpha.ncols
    eyel = np.eye(nl, dtype=np.int64)
    eyer = np.eye(nr, dtype=np.int64)
    blocks = []
    for a, b in zip(alpha.mats, beta.mats):
        left = np.kron(eyel, a.T)
        right = np.kron(b, eyer)
        blocks.append(np.concatenate([left, -right], axis=1))
    system = np.concatenate(blocks, axis=0) % q
    null = nullspace_array(system, q)
    if q ** null.shape[0] > cap:
        raise CapExceededError("principal isotopism space too large")
    for v in span_vectors(null, q):
        X = v[: nl * nl].reshape(nl, nl)
        Y = v[nl * nl:].reshape(nr, nr)
        if rank_array(X, q) == nl and rank_array(Y, q) == nr:
            return X, Y
    return None


def _rank_normalizers(a: np.ndarray, b: np.ndarray, q: int):
    """Witness (T, S, 1) for two single matrices of equal rank r:
    both are equivalent to the rank-r projector."""
    Ta, Sa = _rank_normal_form(a, q)
    Tb, Sb = _rank_normal_form(b, q)
    # Ta^t a Sa = P = Tb^t b Sb  =>  (Tb^-t Ta^t) a (Sa Sb^-1) = b
    T = (Ta @ _inv_mod(Tb, q)) % q
    S = (Sa @ _inv_mod(Sb, q)) % q
    return T.T % q, S, np.eye(1, dtype=np.int64)


def _rank_normal_form(a: np.ndarray, q: int):
    """T, S with T^t a S = the rank-r projector diag(I_r, 0)."""
    nl, nr = a.shape
    _, r, pivots = rref_array(a, q)
    # row operations E with E a in RREF, recovered from the augmented matrix;
    # the pivot order of [a | I] matches a's because a's columns come first
    aug = np.concatenate([a, np.eye(nl, dtype=np.int64)], axis=1) % q
    red2, _, _ = rref_array(aug, q)
    E = red2[:, nr:]
    red = red2[:, :nr]
    cols = list(pivots) + [c for c in range(nr) if c not in pivots]
    P = np.eye(nr, dtype=np.int64)[:, cols]          # (red @ P) = [I_r | M; 0]
    moved = (red @ P) % q
    clear = np.eye(nr, dtype=np.int64)
    clear[:r, r:] = (-moved[:r, r:]) % q
    S = (P @ clear) % q
    T = E.T % q
    proj = np.zeros((nl, nr), dtype=np.int64)
    proj[:r, :r] = np.eye(r, dtype=np.int64)
    assert np.array_equal((T.T @ a @ S) % q, proj), "rank normal form failed"
    return T, S


def _inv_mod(a: np.ndarray, q: int) -> np.ndarray:
    return FFMatrix(a, q).inv().a


# ----------------------------------------------------------------------
# pencils, radicals, stability
# ----------------------------------------------------------------------


def pencil_rank_profile(G: MatrixTuple) -> dict[tuple[int, ...], int]:
    """Rank of sum v_i G_i for every projective point v of F_q^m."""
    out = {}
    for v in projective_points(G.m, G.q):
        out[v] = rank_array(G.pencil(v), G.q)
    return out


def radical(G: MatrixTuple) -> Subspace:
    """{v : G_i v = 0 for all i}."""
    stacked = G.mats.reshape(G.m * G.n, G.ncols)
    basis = nullspace_array(stacked, G.q)
    b = basis.copy()
    b.setflags(write=False)
    return Subspace(G.ncols, G.q, b)


def tuple_image_dim(G: MatrixTuple, U: Subspace) -> int:
    """dim span(union_i G_i(U))."""
    cols = []
    for i in range(G.m):
        cols.append((G.mats[i] @ U.basis.T) % G.q)
    stacked = np.concatenate(cols, axis=1)
    return rank_array(stacked.T, G.q)


def is_stable(G: MatrixTuple, cap: int = 10**6) -> bool:
    """True iff every nonzero proper subspace U has dim G(U) > dim U."""
    n = G.ncols
    for d in range(1, n):
        for U in enumerate_subspaces(n, G.q, d, cap=cap):
            if tuple_image_dim(G, U) <= d:
                return False
    return True
