"""Exact linear algebra over Z/b and subspace enumeration over prime fields.

Matrices are small dense integer arrays; all row reduction is plain
Gaussian elimination mod p.  Composite moduli are supported for ring
arithmetic (add/mul/pow and unitriangular inverses); anything that needs
a field (rref, rank, nullspace, subspaces) insists on a prime modulus.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterator, Sequence

import numpy as np

from .errors import CapExceededError, CompositeModulusError, ShapeMismatchError

DEFAULT_SUBSPACE_CAP = 10**7


def is_prime(b: int) -> bool:
    if b < 2:
        return False
    d = 2
    while d * d <= b:
        if b % d == 0:
            return False
        d += 1
    return True


@dataclass(frozen=True)
class Modulus:
    """A ring modulus b with a cached primality flag, b <= 2**16."""

    b: int
    prime: bool

    def __post_init__(self):
        if not (2 <= self.b <= 2**16):
            raise ValueError(f"modulus {self.b} out of range")
        if self.prime != is_prime(self.b):
            raise ValueError(f"primality flag inconsistent for {self.b}")

    @classmethod
    def of(cls, b: int) -> "Modulus":
        return cls(b, is_prime(b))


def _as_array(entries) -> np.ndarray:
    a = np.asarray(entries, dtype=np.int64)
    if a.ndim != 2:
        raise ShapeMismatchError(f"expected a 2-d array, got shape {a.shape}")
    return a


class FFMatrix:
    """Dense matrix over Z/b; entries always stored reduced mod b."""

    __slots__ = ("a", "mod")

    def __init__(self, entries, mod: Modulus | int):
        if isinstance(mod, int):
            mod = Modulus.of(mod)
        self.mod = mod
        self.a = _as_array(entries) % mod.b
        self.a.setflags(write=False)

    @property
    def rows(self) -> int:
        return self.a.shape[0]

    @property
    def cols(self) -> int:
        return self.a.shape[1]

    @property
    def b(self) -> int:
        return self.mod.b

    @classmethod
    def identity(cls, n: int, mod: Modulus | int) -> "FFMatrix":
        return cls(np.eye(n, dtype=np.int64), mod)

    @classmethod
    def zero(cls, rows: int, cols: int, mod: Modulus | int) -> "FFMatrix":
        return cls(np.zeros((rows, cols), dtype=np.int64), mod)

    def _check_same_ring(self, other: "FFMatrix"):
        if self.b != other.b:
            raise ShapeMismatchError(f"mixed moduli {self.b} and {other.b}")

    def __matmul__(self, other: "FFMatrix") -> "FFMatrix":
        self._check_same_ring(other)
        if self.cols != other.rows:
            raise ShapeMismatchError(f"{self.a.shape} @ {other.a.shape}")
        return FFMatrix(self.a @ other.a, self.mod)

    def __add__(self, other: "FFMatrix") -> "FFMatrix":
        self._check_same_ring(other)
        if self.a.shape != other.a.shape:
            raise ShapeMismatchError(f"{self.a.shape} + {other.a.shape}")
        return FFMatrix(self.a + other.a, self.mod)

    def __sub__(self, other: "FFMatrix") -> "FFMatrix":
        self._check_same_ring(other)
        return FFMatrix(self.a - other.a, self.mod)

    def scale(self, c: int) -> "FFMatrix":
        return FFMatrix(self.a * (c % self.b), self.mod)

    def __pow__(self, e: int) -> "FFMatrix":
        if self.rows != self.cols:
            raise ShapeMismatchError("power of a non-square matrix")
        if e < 0:
            return self.inv() ** (-e)
        acc = FFMatrix.identity(self.rows, self.mod)
        base = self
        while e:
            if e & 1:
                acc = acc @ base
            base = base @ base
            e >>= 1
        return acc

    def transpose(self) -> "FFMatrix":
        return FFMatrix(self.a.T, self.mod)

    def inv(self) -> "FFMatrix":
        """Inverse by Gaussian elimination; pivots must be units mod b."""
        b = self.b
        n = self.rows
        if n != self.cols:
            raise ShapeMismatchError("inverse of a non-square matrix")
        aug = np.concatenate([self.a.copy(), np.eye(n, dtype=np.int64)], axis=1)
        for col in range(n):
            piv = -1
            for r in range(col, n):
                if _unit_inverse(int(aug[r, col]), b) is not None:
                    piv = r
                    break
            if piv < 0:
                raise ZeroDivisionError("matrix not invertible over Z/%d" % b)
            if piv != col:
                aug[[col, piv]] = aug[[piv, col]]
            inv = _unit_inverse(int(aug[col, col]), b)
            aug[col] = (aug[col] * inv) % b
            for r in range(n):
                if r != col and aug[r, col]:
                    aug[r] = (aug[r] - aug[r, col] * aug[col]) % b
        return FFMatrix(aug[:, n:], self.mod)

    def is_identity(self) -> bool:
        return self.rows == self.cols and np.array_equal(self.a, np.eye(self.rows, dtype=np.int64))

    def key(self) -> bytes:
        return self.a.astype(np.int32).tobytes()

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FFMatrix)
            and self.b == other.b
            and self.a.shape == other.a.shape
            and np.array_equal(self.a, other.a)
        )

    def __hash__(self) -> int:
        return hash((self.b, self.a.shape, self.key()))

    def __repr__(self) -> str:
        return f"FFMatrix({self.a.tolist()}, mod {self.b})"


def _unit_inverse(a: int, b: int) -> int | None:
    """Inverse of a mod b if a is a unit, else None."""
    a %= b
    if a == 0:
        return None
    g, x, _ = _egcd(a, b)
    if g != 1:
        return None
    return x % b


def _egcd(a: int, b: int):
    if b == 0:
        return a, 1, 0
    g, x, y = _egcd(b, a % b)
    return g, y, x - (a // b) * y


def _require_prime(m: FFMatrix):
    if not m.mod.prime:
        raise CompositeModulusError(f"modulus {m.b} is not prime")


def rref_array(a: np.ndarray, p: int) -> tuple[np.ndarray, int, list[int]]:
    """Reduced row echelon form of an integer array mod prime p."""
    m = (np.asarray(a, dtype=np.int64) % p).copy()
    rows, cols = m.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        piv = -1
        for i in range(r, rows):
            if m[i, c]:
                piv = i
                break
        if piv < 0:
            continue
        if piv != r:
            m[[r, piv]] = m[[piv, r]]
        m[r] = (m[r] * pow(int(m[r, c]), p - 2, p)) % p
        for i in range(rows):
            if i != r and m[i, c]:
                m[i] = (m[i] - m[i, c] * m[r]) % p
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return m, r, pivots


def rref(m: FFMatrix) -> tuple[FFMatrix, int, list[int]]:
    """RREF, rank and pivot columns of a matrix over a prime field."""
    _require_prime(m)
    red, rank, pivots = rref_array(m.a, m.b)
    return FFMatrix(red, m.mod), rank, pivots


def rank(m: FFMatrix) -> int:
    return rref(m)[1]


def rank_array(a: np.ndarray, p: int) -> int:
    return rref_array(a, p)[1]


def nullspace_array(a: np.ndarray, p: int) -> np.ndarray:
    """Rows span {v : a v = 0 mod p}; returned in RREF."""
    a = np.asarray(a, dtype=np.int64)
    red, rank_, pivots = rref_array(a, p)
    cols = a.shape[1]
    free = [c for c in range(cols) if c not in pivots]
    basis = np.zeros((len(free), cols), dtype=np.int64)
    for k, fc in enumerate(free):
        basis[k, fc] = 1
        for r, pc in enumerate(pivots):
            basis[k, pc] = (-red[r, fc]) % p
    if len(free) == 0:
        return basis
    red_basis, _, _ = rref_array(basis, p)
    return red_basis[: len(free)]


@dataclass(frozen=True)
class Subspace:
    """Subspace of F_p^n, canonically represented by its RREF basis.

    Two subspaces are equal iff their RREF arrays are identical, so the
    basis bytes double as a dict key.
    """

    ambient_dim: int
    p: int
    basis: np.ndarray  # RREF, shape (dim, ambient_dim), read-only

    @classmethod
    def from_vectors(cls, vectors, p: int, ambient_dim: int | None = None) -> "Subspace":
        a = np.asarray(list(vectors), dtype=np.int64)
        if a.size == 0:
            if ambient_dim is None:
                raise ValueError("ambient_dim required for the zero subspace")
            a = np.zeros((0, ambient_dim), dtype=np.int64)
        if a.ndim == 1:
            a = a.reshape(1, -1)
        n = a.shape[1]
        if ambient_dim is not None and ambient_dim != n:
            raise ShapeMismatchError("vector length does not match ambient_dim")
        red, r, _ = rref_array(a, p)
        b = red[:r].copy()
        b.setflags(write=False)
        return cls(n, p, b)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def contains(self, v) -> bool:
        v = np.asarray(v, dtype=np.int64) % self.p
        stacked = np.concatenate([self.basis, v.reshape(1, -1)], axis=0)
        return rank_array(stacked, self.p) == self.dim

    def contains_space(self, other: "Subspace") -> bool:
        stacked = np.concatenate([self.basis, other.basis], axis=0)
        return rank_array(stacked, self.p) == self.dim

    def orthogonal_complement(self) -> "Subspace":
        """Complement under the standard dot-product pairing."""
        if self.dim == 0:
            return Subspace.from_vectors(np.eye(self.ambient_dim, dtype=np.int64), self.p)
        comp = nullspace_array(self.basis, self.p)
        b = comp.copy()
        b.setflags(write=False)
        return Subspace(self.ambient_dim, self.p, b)

    def key(self) -> bytes:
        return self.basis.astype(np.int32).tobytes()

    def points(self) -> list[tuple[int, ...]]:
        """Normalized representatives of the 1-spaces inside this subspace."""
        pts = set()
        for v in span_vectors(self.basis, self.p):
            if any(v):
                pts.add(normalize_point(v, self.p))
        return sorted(pts)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Subspace)
            and self.p == other.p
            and self.ambient_dim == other.ambient_dim
            and self.basis.shape == other.basis.shape
            and np.array_equal(self.basis, other.basis)
        )

    def __hash__(self) -> int:
        return hash((self.p, self.ambient_dim, self.key()))

    def __repr__(self) -> str:
        return f"Subspace(dim {self.dim} of F_{self.p}^{self.ambient_dim})"


def nullspace(m: FFMatrix) -> Subspace:
    """Right kernel {v : m v = 0} as a Subspace."""
    _require_prime(m)
    b = nullspace_array(m.a, m.b).copy()
    b.setflags(write=False)
    return Subspace(m.cols, m.b, b)


def row_space(vectors: np.ndarray, p: int) -> Subspace:
    return Subspace.from_vectors(vectors, p)


def span_equal(s1: Sequence[FFMatrix], s2: Sequence[FFMatrix]) -> bool:
    """True iff the flattened row-spans of the two matrix lists coincide."""
    if not s1 or not s2:
        return not s1 and not s2
    shape = s1[0].a.shape
    b = s1[0].b
    for m in list(s1) + list(s2):
        if m.a.shape != shape:
            raise ShapeMismatchError("span_equal needs same shapes")
        if m.b != b:
            raise ShapeMismatchError("span_equal needs one modulus")
    _require_prime(s1[0])
    f1 = np.stack([m.a.reshape(-1) for m in s1])
    f2 = np.stack([m.a.reshape(-1) for m in s2])
    return span_equal_arrays(f1, f2, b)


def span_equal_arrays(f1: np.ndarray, f2: np.ndarray, p: int) -> bool:
    r1, k1, _ = rref_array(f1, p)
    r2, k2, _ = rref_array(f2, p)
    return k1 == k2 and np.array_equal(r1[:k1], r2[:k2])


def normalize_point(v, p: int) -> tuple[int, ...]:
    """Scale a nonzero vector so its first nonzero coordinate is 1."""
    v = [int(x) % p for x in v]
    for x in v:
        if x:
            inv = pow(x, p - 2, p)
            return tuple((y * inv) % p for y in v)
    raise ValueError("zero vector has no projective normalization")


def span_vectors(basis: np.ndarray, p: int) -> Iterator[np.ndarray]:
    """All p^dim vectors in the row span, in mixed-radix coefficient order."""
    basis = np.asarray(basis, dtype=np.int64)
    d = basis.shape[0]
    for idx in range(p**d):
        coeffs = np.zeros(d, dtype=np.int64)
        k = idx
        for i in range(d):
            coeffs[i] = k % p
            k //= p
        yield (coeffs @ basis) % p


def projective_points(n: int, q: int) -> list[tuple[int, ...]]:
    """Normalized representatives of PG_0(F_q^n) in lexicographic order."""
    pts = set()
    for v in span_vectors(np.eye(n, dtype=np.int64), q):
        if any(v):
            pts.add(normalize_point(v, q))
    return sorted(pts)


def gaussian_binomial(n: int, d: int, q: int) -> int:
    """Number of d-dimensional subspaces of F_q^n."""
    if d < 0 or d > n:
        raise ValueError(f"need 0 <= d <= n, got d={d}, n={n}")
    num = 1
    den = 1
    for i in range(d):
        num *= q**n - q**i
        den *= q**d - q**i
    return num // den


def enumerate_subspaces(
    n: int, q: int, d: int, cap: int = DEFAULT_SUBSPACE_CAP
) -> list[Subspace]:
    """All d-dimensional subspaces of F_q^n, ordered lexicographically by RREF.

    Enumerates one RREF matrix per subspace: a choice of pivot columns plus
    the free entries to the right of each pivot (zero in pivot columns).
    """
    if not is_prime(q):
        raise CompositeModulusError(f"subspace enumeration needs prime q, got {q}")
    count = gaussian_binomial(n, d, q)
    if count > cap:
        raise CapExceededError(f"{count} subspaces exceeds cap {cap}")
    if d == 0:
        return [Subspace.from_vectors([], q, ambient_dim=n)]
    out = []
    for pivots in combinations(range(n), d):
        free_pos = []
        for i, pc in enumerate(pivots):
            for c in range(pc + 1, n):
                if c not in pivots:
                    free_pos.append((i, c))
        base = np.zeros((d, n), dtype=np.int64)
        for i, pc in enumerate(pivots):
            base[i, pc] = 1
        for pattern in range(q ** len(free_pos)):
            m = base.copy()
            k = pattern
            for (i, c) in free_pos:
                m[i, c] = k % q
                k //= q
            m.setflags(write=False)
            out.append(Subspace(n, q, m))
    out.sort(key=lambda s: s.basis.reshape(-1).tolist())
    return out
