"""Random unitriangular group sampling, Brahana/Baer constructors, block
structure detection, Morita condensation, and order-distribution experiments.

All randomness flows through numpy Generators seeded explicitly; identical
configurations reproduce bit-identical generator matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import BlockMismatchError, CapExceededError, NotAlternatingError, NonUnitriangularError
from .bimaps import MatrixTuple
from .groups import FiniteGroup
from .linalg import FFMatrix, Modulus, is_prime
from .unipotent import is_unitriangular, order_unipotent


@dataclass
class SamplerConfig:
    """Parameters of the random unitriangular model.

    law "bernoulli": each strictly-upper position is filled independently
    with probability density, values uniform on Z/b minus 0.
    law "support": exactly support_size strictly-upper positions are chosen
    uniformly, values uniform on Z/b minus 0.
    """

    b: int = 3
    d: int = 10
    gens: int = 5
    law: str = "bernoulli"
    density: float = 0.1
    support_size: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.law not in ("bernoulli", "support"):
            raise ValueError(f"unknown law {self.law!r}")
        if self.law == "bernoulli" and not (0.0 <= self.density <= 1.0):
            raise ValueError("density must lie in [0, 1]")


def sample_unitriangular(cfg: SamplerConfig, rng: np.random.Generator | None = None
                         ) -> FiniteGroup:
    """One sampled group: cfg.gens independent unitriangular generators."""
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    mod = Modulus.of(cfg.b)
    d = cfg.d
    iu = np.triu_indices(d, 1)
    npos = len(iu[0])
    gens = []
    for _ in range(cfg.gens):
        a = np.eye(d, dtype=np.int64)
        if cfg.law == "bernoulli":
            mask = rng.random(npos) < cfg.density
            vals = rng.integers(1, cfg.b, size=npos)
            a[iu] = np.where(mask, vals, 0)
        else:
            k = min(cfg.support_size, npos)
            pos = rng.choice(npos, size=k, replace=False)
            vals = rng.integers(1, cfg.b, size=k)
            entries = np.zeros(npos, dtype=np.int64)
            entries[pos] = vals
            a[iu] = entries
        gens.append(FFMatrix(a, mod))
    return FiniteGroup.from_matrix_generators(gens, name=f"U({d},{cfg.b}) sample")


# ----------------------------------------------------------------------
# Brahana and Baer constructors
# ----------------------------------------------------------------------


def _vec_space(p: int, d: int) -> list[tuple[int, ...]]:
    return [tuple(reversed(v)) for v in product(range(p), repeat=d)]


def _central_table(p: int, xs: np.ndarray, off: np.ndarray, dw: int, name: str) -> FiniteGroup:
    """Cayley table of the central extension F_p^dx x F_p^dw with product
    (x, w)(x', w') = (x + x', w + w' + beta(x, x')), beta given as the
    mixed-radix w-codes off[x1, x2]."""
    nx = xs.shape[0]
    nw = p**dw
    xpow = np.array([p**k for k in range(xs.shape[1])], dtype=np.int64)
    xcode = xs @ xpow
    x_of_code = np.full(int(xcode.max()) + 1 if nx else 1, -1, dtype=np.int64)
    x_of_code[xcode] = np.arange(nx)
    xsum_idx = x_of_code[(((xs[:, None, :] + xs[None, :, :]) % p) @ xpow)]
    widx = np.arange(nw, dtype=np.int64)
    wdig = np.stack([(widx // p**k) % p for k in range(dw)], axis=1) if dw else np.zeros((1, 0), dtype=np.int64)
    wsum = np.zeros((nx, nx, nw, nw), dtype=np.int64)
    for k in range(dw):
        offk = (off // p**k) % p
        digit = (wdig[None, None, :, None, k] + wdig[None, None, None, :, k]
                 + offk[:, :, None, None]) % p
        wsum += digit * (p**k)
    t = (xsum_idx[:, :, None, None] * nw + wsum).transpose(0, 2, 1, 3).reshape(
        nx * nw, nx * nw).astype(np.int32)
    G = FiniteGroup.from_table(t, name=name, validate=(nx * nw <= 256))
    if nx * nw > 256:
        G.validate_axioms()
    return G


def brahana_group(star: MatrixTuple, cap: int = 6000) -> FiniteGroup:
    """Class-<=2 group on U x V x W with product
    (u,v,w)(u',v',w') = (u+u', v+v', w+w'+u*v')."""
    p = star.q
    if not is_prime(p):
        raise ValueError("Brahana construction needs a prime modulus")
    du, dv, dw = star.n, star.ncols, star.m
    order = p ** (du + dv + dw)
    if order > cap:
        raise CapExceededError(f"Brahana group of order {order} over cap {cap}")
    xs = np.array(_vec_space(p, du + dv), dtype=np.int64)
    U1 = xs[:, :du]
    V2 = xs[:, du:]
    off = np.zeros((xs.shape[0], xs.shape[0]), dtype=np.int64)
    for k in range(dw):
        off += ((U1 @ star.mats[k] @ V2.T) % p) * (p**k)
    return _central_table(p, xs, off, dw, name=f"Bh({du}x{dv}->{dw};{p})")


def baer_group(star: MatrixTuple, cap: int = 6000) -> FiniteGroup:
    """Class-2, exponent-p (p odd) group on U x W with product
    (u,w)(u',w') = (u+u', w+w'+u*u'); its commutation recovers the map."""
    p = star.q
    if not star.alternating:
        raise NotAlternatingError("Baer construction needs an alternating map")
    du, dw = star.n, star.m
    order = p ** (du + dw)
    if order > cap:
        raise CapExceededError(f"Baer group of order {order} over cap {cap}")
    us = np.array(_vec_space(p, du), dtype=np.int64)
    off = np.zeros((us.shape[0], us.shape[0]), dtype=np.int64)
    for k in range(dw):
        off += ((us @ star.mats[k] @ us.T) % p) * (p**k)
    return _central_table(p, us, off, dw, name=f"Br({du}->{dw};{p})")


# ----------------------------------------------------------------------
# block structure and Morita condensation
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class BlockStructure:
    """Consecutive diagonal blocks, sizes positive and summing to d."""

    sizes: tuple[int, ...]

    @property
    def d(self) -> int:
        return sum(self.sizes)

    def ranges(self) -> list[tuple[int, int]]:
        out = []
        start = 0
        for s in self.sizes:
            out.append((start, start + s))
            start += s
        return out


def block_structure_of(U: FiniteGroup) -> BlockStructure:
    """Coarsest consecutive partition with every generator equal to the
    identity inside each diagonal block (so the generators lie in the
    block-unitriangular hull with those blocks)."""
    gens = [g.a for g in U.generators]
    d = U.degree
    for a in gens:
        if not is_unitriangular(a % U.mod.b):
            raise NonUnitriangularError("generators must be upper unitriangular")
    cuts = [0]
    start = 0
    for j in range(1, d + 1):
        if j == d:
            cuts.append(d)
            break
        # can [start, j) extend to include j? only if no generator has a
        # nonzero entry inside the would-be block
        extends = all(
            not np.any(a[start:j + 1, start:j + 1][np.triu_indices(j + 1 - start, 1)] % U.mod.b)
            for a in gens
        )
        if not extends:
            cuts.append(j)
            start = j
    sizes = tuple(cuts[i + 1] - cuts[i] for i in range(len(cuts) - 1))
    return BlockStructure(sizes)


def morita_condense(U: FiniteGroup, blocks: BlockStructure,
                    markers: list[int] | None = None) -> FiniteGroup:
    """Compress block-unitriangular generators to one marker index per block.

    The condensed generators are the marker-row/column submatrices (e u e
    with zero rows and columns removed); markers default to the first index
    of each block.
    """
    d = U.degree
    if blocks.d != d:
        raise BlockMismatchError(f"blocks sum to {blocks.d}, degree is {d}")
    ranges = blocks.ranges()
    if markers is None:
        markers = [lo for lo, _ in ranges]
    if len(markers) != len(ranges):
        raise BlockMismatchError("one marker per block required")
    for m, (lo, hi) in zip(markers, ranges):
        if not (lo <= m < hi):
            raise BlockMismatchError(f"marker {m} outside its block [{lo},{hi})")
    sel = np.asarray(markers, dtype=np.int64)
    out = []
    for g in U.generators:
        a = g.a % U.mod.b
        for (lo, hi) in ranges:
            sub = a[lo:hi, lo:hi]
            if np.any(sub[np.triu_indices(hi - lo, 1)]):
                raise BlockMismatchError("generator not identity inside a block")
        out.append(FFMatrix(a[np.ix_(sel, sel)], U.mod))
    return FiniteGroup.from_matrix_generators(out, name=f"{U.name} condensed")


# ----------------------------------------------------------------------
# order histograms
# ----------------------------------------------------------------------


def sample_orders(cfg: SamplerConfig, samples: int) -> list[int]:
    """log_b orders of `samples` groups drawn from one seeded stream."""
    if not is_prime(cfg.b):
        raise ValueError("order computation needs a prime modulus")
    rng = np.random.default_rng(cfg.seed)
    out = []
    for _ in range(samples):
        G = sample_unitriangular(cfg, rng)
        order = order_unipotent([g.a for g in G.generators], cfg.b)
        k = 0
        while order > 1:
            order //= cfg.b
            k += 1
        out.append(k)
    return out


def order_histogram(cfg: SamplerConfig, samples: int) -> dict[int, int]:
    """Histogram of log_b order over seeded samples; plot-ready data."""
    hist: dict[int, int] = {}
    for lo in sample_orders(cfg, samples):
        hist[lo] = hist.get(lo, 0) + 1
    return dict(sorted(hist.items()))


def histogram_csv(hist: dict[int, int]) -> str:
    lines = ["log_order,count"]
    for k, v in sorted(hist.items()):
        lines.append(f"{k},{v}")
    return "\n".join(lines) + "\n"
