"""Order computation and structure of unitriangular matrix groups by sifting.

A subgroup of U(d, p) is filtered by the congruence subgroups
U_j = {u : u = I on the first j-1 superdiagonals}; each quotient U_j/U_{j+1}
is F_p^{d-j} via the j-th superdiagonal.  A sifted basis keeps, per level,
an echelonized set of representatives; closing the basis under commutators
and p-th powers makes the word problem (and therefore the group order)
exact without enumerating elements.
"""

from __future__ import annotations

import numpy as np

from .errors import CompositeModulusError, NonUnitriangularError
from .linalg import FFMatrix, Modulus, is_prime


def is_unitriangular(a: np.ndarray) -> bool:
    d = a.shape[0]
    if a.shape != (d, d):
        return False
    if not np.array_equal(np.diag(a), np.ones(d, dtype=a.dtype)):
        return False
    return not np.any(np.tril(a, -1))


def _level_vector(a: np.ndarray, j: int) -> np.ndarray:
    """Entries of the j-th superdiagonal, length d - j."""
    return np.diagonal(a, offset=j).copy()


def _first_level(a: np.ndarray) -> int:
    """Smallest j >= 1 with a nonzero j-th superdiagonal; d means identity."""
    d = a.shape[0]
    for j in range(1, d):
        if np.any(np.diagonal(a, offset=j)):
            return j
    return d


class SiftedBasis:
    """Echelonized polycyclic basis of a subgroup of U(d, p)."""

    def __init__(self, d: int, p: int):
        if not is_prime(p):
            raise CompositeModulusError(f"sifting needs a prime modulus, got {p}")
        self.d = d
        self.p = p
        self.mod = Modulus.of(p)
        # levels[j] maps pivot column -> (vector, matrix); vector[pivot] == 1
        self.levels: dict[int, dict[int, tuple[np.ndarray, np.ndarray]]] = {
            j: {} for j in range(1, d)
        }

    # -- core sifting -------------------------------------------------

    def sift(self, a: np.ndarray) -> np.ndarray:
        """Divide out basis elements; returns the fully reduced residue."""
        p = self.p
        a = a % p
        j = _first_level(a)
        while j < self.d:
            v = _level_vector(a, j) % p
            level = self.levels[j]
            reduced = True
            while reduced:
                reduced = False
                for c in range(self.d - j):
                    if v[c] and c in level:
                        coeff = int(v[c])
                        _, bmat = level[c]
                        a = (_matpow_mod(_unipotent_inverse(bmat, p), coeff, p) @ a) % p
                        v = _level_vector(a, j) % p
                        reduced = True
                        break
            if np.any(v):
                return a  # new information at this level
            j = _first_level(a)
        return a

    def add(self, a: np.ndarray) -> np.ndarray | None:
        """Sift a into the basis; returns the new basis matrix if it grew."""
        p = self.p
        res = self.sift(a)
        j = _first_level(res)
        if j >= self.d:
            return None
        v = _level_vector(res, j) % p
        c = int(np.flatnonzero(v)[0])
        inv = pow(int(v[c]), p - 2, p)
        norm = _matpow_mod(res, inv, p)
        nv = _level_vector(norm, j) % p
        assert nv[c] == 1
        self.levels[j][c] = (nv, norm)
        return norm

    def close(self, generators: list[np.ndarray]):
        """Insert generators and close under commutators and p-th powers."""
        p = self.p
        queue = [g % p for g in generators]
        while queue:
            g = queue.pop()
            nb = self.add(g)
            if nb is None:
                continue
            queue.append(_matpow_mod(nb, p, p))
            for other in self._basis_list():
                if other is nb:
                    continue
                queue.append(_commutator(nb, other, p))
            for g0 in generators:
                queue.append(_commutator(nb, g0 % p, p))

    def _basis_list(self) -> list[np.ndarray]:
        out = []
        for j in sorted(self.levels):
            for c in sorted(self.levels[j]):
                out.append(self.levels[j][c][1])
        return out

    # -- queries -------------------------------------------------------

    @property
    def size(self) -> int:
        return sum(len(v) for v in self.levels.values())

    def group_order(self) -> int:
        return self.p**self.size

    def contains(self, a: np.ndarray) -> bool:
        return _first_level(self.sift(a)) >= self.d

    def level_dimension(self, j: int) -> int:
        """Dimension of the image in U_j/U_{j+1}."""
        return len(self.levels.get(j, {}))

    def basis_matrices(self) -> list[np.ndarray]:
        return [m.copy() for m in self._basis_list()]


def _matpow_mod(a: np.ndarray, e: int, p: int) -> np.ndarray:
    acc = np.eye(a.shape[0], dtype=np.int64)
    base = a % p
    while e:
        if e & 1:
            acc = (acc @ base) % p
        base = (base @ base) % p
        e >>= 1
    return acc


def _unipotent_inverse(a: np.ndarray, p: int) -> np.ndarray:
    """(I + N)^-1 = I - N + N^2 - ... for nilpotent N."""
    d = a.shape[0]
    n = (a - np.eye(d, dtype=a.dtype)) % p
    acc = np.eye(d, dtype=a.dtype)
    term = np.eye(d, dtype=a.dtype)
    for k in range(1, d):
        term = (term @ n) % p
        if not term.any():
            break
        acc = (acc + ((-1) ** k) * term) % p
    return acc % p


def _commutator(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    ia = _unipotent_inverse(a, p)
    ib = _unipotent_inverse(b, p)
    return (ia @ ib @ a @ b) % p


def _check_unipotent_input(generators, b: int) -> list[np.ndarray]:
    if not is_prime(b):
        raise CompositeModulusError(f"order_unipotent needs prime modulus, got {b}")
    mats = []
    for g in generators:
        a = g.a if isinstance(g, FFMatrix) else np.asarray(g, dtype=np.int64)
        a = a % b
        if not is_unitriangular(a):
            raise NonUnitriangularError("generator is not upper unitriangular")
        mats.append(a)
    return mats


def unipotent_basis(generators, b: int) -> SiftedBasis:
    mats = _check_unipotent_input(generators, b)
    d = mats[0].shape[0]
    basis = SiftedBasis(d, b)
    basis.close(mats)
    return basis


def order_unipotent(generators, b: int) -> int:
    """Exact order of <generators> inside U(d, b), b prime."""
    return unipotent_basis(generators, b).group_order()


def gamma2_basis(generators, b: int) -> SiftedBasis:
    """Sifted basis of the commutator subgroup of <generators>."""
    mats = _check_unipotent_input(generators, b)
    d = mats[0].shape[0]
    basis = SiftedBasis(d, b)
    seeds = [_commutator(x, y, b) for x in mats for y in mats]
    basis.close(seeds)
    # normal closure under generator conjugation
    stable = False
    while not stable:
        stable = True
        for m in basis.basis_matrices():
            for g in mats:
                ginv = _unipotent_inverse(g, b)
                conj = (ginv @ m @ g) % b
                if not basis.contains(conj):
                    basis.close([conj])
                    stable = False
    return basis


def gamma3_basis(generators, b: int) -> SiftedBasis:
    """Sifted basis of [[G, G], G] for G = <generators>."""
    mats = _check_unipotent_input(generators, b)
    d = mats[0].shape[0]
    g2 = gamma2_basis(generators, b)
    basis = SiftedBasis(d, b)
    seeds = [_commutator(m, g, b) for m in g2.basis_matrices() for g in mats]
    if not seeds:
        return basis
    basis.close(seeds)
    stable = False
    while not stable:
        stable = True
        for m in basis.basis_matrices():
            for g in mats:
                ginv = _unipotent_inverse(g, b)
                conj = (ginv @ m @ g) % b
                if not basis.contains(conj):
                    basis.close([conj])
                    stable = False
    return basis


def bases_equal(a: SiftedBasis, b: SiftedBasis) -> bool:
    if a.group_order() != b.group_order():
        return False
    return all(b.contains(m) for m in a.basis_matrices())


def join_bases(a: SiftedBasis, b: SiftedBasis) -> SiftedBasis:
    out = SiftedBasis(a.d, a.p)
    out.close(a.basis_matrices() + b.basis_matrices())
    return out


def standard_unitriangular_generators(d: int, p: int) -> list[FFMatrix]:
    """Superdiagonal transvections I + E_{i,i+1} generating U(d, p)."""
    mod = Modulus.of(p)
    gens = []
    for i in range(d - 1):
        a = np.eye(d, dtype=np.int64)
        a[i, i + 1] = 1
        gens.append(FFMatrix(a, mod))
    return gens


def is_sims_subgroup(h_generators, g_generators, b: int) -> bool:
    """True iff gamma_2(H) gamma_3(G) = gamma_2(G) for unitriangular groups."""
    g2h = gamma2_basis(h_generators, b)
    g3g = gamma3_basis(g_generators, b)
    g2g = gamma2_basis(g_generators, b)
    return bases_equal(join_bases(g2h, g3g), g2g)
