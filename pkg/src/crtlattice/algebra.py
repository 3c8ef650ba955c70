"""Exact modular arithmetic and CRT isomorphisms.

A tower of coprime prime powers p_1^{e_1}, ..., p_L^{e_L} with product q
admits a ring isomorphism between the product ring Z_{p_1^{e_1}} x ... x
Z_{p_L^{e_L}} and Z/qZ.  This module constructs that map (and the simpler
Z-module isomorphism that drops multiplicativity), inverts it, and verifies
the homomorphism laws by exhaustive or randomized sweeps.

All arithmetic is exact integer arithmetic; q is capped so that intermediate
products stay well inside 64-bit range when vectorized with numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

DEFAULT_MODULUS_CAP = 2**31


def is_prime(n: int) -> bool:
    """Primality by trial division (tower moduli are desk-scale)."""
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


def factorize(q: int) -> list[tuple[int, int]]:
    """Prime factorization of q >= 2 as ordered (prime, exponent) pairs."""
    if q < 2:
        raise ValueError(f"cannot factorize {q}; need an integer >= 2")
    factors = []
    d, x = 2, q
    while d * d <= x:
        if x % d == 0:
            e = 0
            while x % d == 0:
                x //= d
                e += 1
            factors.append((d, e))
        d += 1
    if x > 1:
        factors.append((x, 1))
    return factors


def extended_gcd(a: int, b: int) -> tuple[int, int, int]:
    """Return (g, x, y) with a*x + b*y = g = gcd(a, b)."""
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r != 0:
        quo = old_r // r
        old_r, r = r, old_r - quo * r
        old_s, s = s, old_s - quo * s
        old_t, t = t, old_t - quo * t
    return old_r, old_s, old_t


def invmod(a: int, m: int) -> int:
    """Inverse of a modulo m in [0, m); raises if gcd(a, m) != 1."""
    g, x, _ = extended_gcd(a % m, m)
    if g != 1:
        raise ValueError(f"{a} is not invertible modulo {m}")
    return x % m


def centered(x, m):
    """Reduce integers into the centered range (-m/2, m/2].

    Accepts Python ints or integer numpy arrays.
    """
    r = np.mod(x, m)
    shifted = np.where(2 * r > m, r - m, r)
    if np.isscalar(x) or np.ndim(x) == 0:
        return int(shifted)
    return shifted


@dataclass(frozen=True)
class PrimeTower:
    """An ordered tower of distinct prime powers with product q."""

    levels: tuple[tuple[int, int], ...]
    cap: int = field(default=DEFAULT_MODULUS_CAP, repr=False, compare=False)

    def __post_init__(self):
        if not self.levels:
            raise ValueError("tower needs at least one level")
        object.__setattr__(self, "levels", tuple((int(p), int(e)) for p, e in self.levels))
        primes = [p for p, _ in self.levels]
        if len(set(primes)) != len(primes):
            raise ValueError(f"tower primes must be distinct, got {primes}")
        for p, e in self.levels:
            if not is_prime(p):
                raise ValueError(f"{p} is not prime")
            if e < 1:
                raise ValueError(f"exponent for {p} must be >= 1, got {e}")
        q = 1
        for p, e in self.levels:
            q *= p**e
            if q > self.cap:
                raise ValueError(f"tower modulus exceeds cap {self.cap}")

    @classmethod
    def squarefree(cls, primes: Iterable[int], cap: int = DEFAULT_MODULUS_CAP) -> "PrimeTower":
        return cls(tuple((p, 1) for p in primes), cap)

    @classmethod
    def from_modulus(cls, q: int, cap: int = DEFAULT_MODULUS_CAP) -> "PrimeTower":
        return cls(tuple(factorize(q)), cap)

    @cached_property
    def q(self) -> int:
        q = 1
        for p, e in self.levels:
            q *= p**e
        return q

    @cached_property
    def moduli(self) -> tuple[int, ...]:
        """Per-level moduli p_l^{e_l}."""
        return tuple(p**e for p, e in self.levels)

    @cached_property
    def partial_products(self) -> tuple[int, ...]:
        """q_l = q / p_l^{e_l} for each level."""
        return tuple(self.q // m for m in self.moduli)

    @property
    def primes(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.levels)

    @property
    def exponents(self) -> tuple[int, ...]:
        return tuple(e for _, e in self.levels)

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    @property
    def is_squarefree(self) -> bool:
        return all(e == 1 for _, e in self.levels)


def bezout_coefficients(tower: PrimeTower) -> tuple[int, ...]:
    """Coefficients a_l with sum_l a_l * q_l = 1 (mod q).

    Each a_l is the inverse of q_l modulo p_l^{e_l}, reduced to the centered
    range (-p_l^{e_l}/2, p_l^{e_l}/2] so the result is deterministic.
    """
    coeffs = []
    for m, ql in zip(tower.moduli, tower.partial_products):
        coeffs.append(centered(invmod(ql % m, m), m))
    return tuple(coeffs)


class MapKind(str, Enum):
    RING = "ring"
    MODULE = "module"


@dataclass(frozen=True)
class CrtMap:
    """Isomorphism between a residue tower and Z/qZ.

    kind RING uses Bezout coefficients (full ring isomorphism), kind MODULE
    fixes all coefficients to 1 (additive-only isomorphism).  forward() maps
    residue tuples into [0, q); inverse() maps back.
    """

    tower: PrimeTower
    coefficients: tuple[int, ...]
    kind: MapKind = MapKind.RING

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(int(a) for a in self.coefficients))
        object.__setattr__(self, "kind", MapKind(self.kind))
        if len(self.coefficients) != self.tower.num_levels:
            raise ValueError("need one coefficient per tower level")
        q = self.tower.q
        if self.kind is MapKind.RING:
            total = sum(a * ql for a, ql in zip(self.coefficients, self.tower.partial_products))
            if total % q != 1 % q:
                raise ValueError("coefficients do not satisfy the Bezout identity mod q")
        else:
            if any(a != 1 for a in self.coefficients):
                raise ValueError("module-kind maps fix all coefficients to 1")
        for u, m in zip(self.level_units, self.tower.moduli):
            if math.gcd(u, m) != 1:
                raise ValueError("map is not bijective: a_l*q_l not a unit at some level")

    @classmethod
    def ring_iso(cls, tower: PrimeTower) -> "CrtMap":
        return cls(tower, bezout_coefficients(tower), MapKind.RING)

    @classmethod
    def module_iso(cls, tower: PrimeTower) -> "CrtMap":
        return cls(tower, (1,) * tower.num_levels, MapKind.MODULE)

    @property
    def q(self) -> int:
        return self.tower.q

    @cached_property
    def weights(self) -> tuple[int, ...]:
        """w_l = a_l * q_l mod q; forward(v) = sum_l w_l v_l mod q."""
        q = self.q
        return tuple((a * ql) % q for a, ql in zip(self.coefficients, self.tower.partial_products))

    @cached_property
    def level_units(self) -> tuple[int, ...]:
        """u_l = a_l * q_l mod p_l^{e_l}; forward(v) = u_l v_l mod p_l^{e_l}."""
        return tuple(
            (a * ql) % m
            for a, ql, m in zip(self.coefficients, self.tower.partial_products, self.tower.moduli)
        )

    @cached_property
    def level_unit_inverses(self) -> tuple[int, ...]:
        return tuple(invmod(u, m) for u, m in zip(self.level_units, self.tower.moduli))

    def forward(self, residues: Sequence) -> int | np.ndarray:
        """Map a residue tuple (or tuple of integer arrays) into [0, q).

        Scalar residues give an int; array residues are combined
        componentwise and give an int64 array of the common shape.
        """
        if len(residues) != self.tower.num_levels:
            raise ValueError("need one residue per tower level")
        scalar = all(np.isscalar(v) or np.ndim(v) == 0 for v in residues)
        q = self.q
        acc = 0 if scalar else np.zeros(np.broadcast(*[np.asarray(v) for v in residues]).shape, dtype=np.int64)
        for v, w, m in zip(residues, self.weights, self.tower.moduli):
            arr = np.asarray(v)
            if not np.issubdtype(arr.dtype, np.integer):
                raise ValueError("residues must be integers")
            if arr.size and (arr.min() < 0 or arr.max() >= m):
                raise ValueError(f"residue out of range [0, {m})")
            if scalar:
                acc = (acc + w * int(arr)) % q
            else:
                acc = (acc + w * arr.astype(np.int64)) % q
        return acc

    def inverse(self, x) -> tuple:
        """Map elements of [0, q) back to residue tuples.

        Works componentwise for the ring map (each a_l q_l is 1 modulo its
        level) and via one unit multiplication per level in general.
        """
        arr = np.asarray(x)
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError("inverse expects integers")
        if arr.size and (arr.min() < 0 or arr.max() >= self.q):
            raise ValueError(f"value out of range [0, {self.q})")
        out = []
        for uinv, m in zip(self.level_unit_inverses, self.tower.moduli):
            r = (arr.astype(np.int64) % m) * uinv % m
            out.append(int(r) if np.ndim(x) == 0 else r)
        return tuple(out)

    def residue_tables(self) -> np.ndarray:
        """(L, q) table of inverse residues for every element of Z_q."""
        idx = np.arange(self.q, dtype=np.int64)
        return np.stack(self.inverse(idx))


@dataclass(frozen=True)
class HomomorphismReport:
    """Outcome of a homomorphism sweep over pairs of Z_q elements."""

    kind: MapKind
    q: int
    pairs_checked: int
    bijective: bool
    additive: bool
    multiplicative: bool | None
    counterexample: tuple[int, int] | None = None

    @property
    def ok(self) -> bool:
        return self.bijective and self.additive and self.multiplicative in (True, None)


def _first_mismatch(lhs: np.ndarray, rhs: np.ndarray) -> tuple[int, int]:
    bad = np.argwhere(lhs != rhs)
    i, j = bad[0]
    return int(i), int(j)


_GRID_CACHE_Q = 1024
_grid_cache: dict[str, np.ndarray] = {}


def _pair_grids(q: int) -> tuple[np.ndarray, np.ndarray]:
    """Shared (i+j, i*j) tables for pair sweeps with q <= _GRID_CACHE_Q.

    Cached once at the maximal size; smaller moduli slice views out of it.
    """
    if not _grid_cache:
        idx = np.arange(_GRID_CACHE_Q, dtype=np.int32)
        _grid_cache["sum"] = (idx[:, None] + idx[None, :]).astype(np.int16)
        _grid_cache["prod"] = idx[:, None] * idx[None, :]
    return _grid_cache["sum"][:q, :q], _grid_cache["prod"][:q, :q]


def homomorphism_check(
    cmap: CrtMap,
    exhaustive: bool = True,
    samples: int = 100_000,
    seed: int = 0,
    max_exhaustive_q: int = 10_000,
) -> HomomorphismReport:
    """Verify sigma = inverse-after-mod-q respects + (and * for ring maps).

    Exhaustive mode sweeps all q^2 pairs (requires q <= max_exhaustive_q);
    otherwise `samples` random pairs are drawn.  Bijectivity of the forward
    map is always checked over all q elements.
    """
    q = cmap.q
    tables = cmap.residue_tables().astype(np.int32)
    moduli = cmap.tower.moduli

    # Bijectivity: packed residues must hit every element of [0, q) exactly once.
    pack = np.zeros(q, dtype=np.int64)
    stride = 1
    for row, m in zip(tables, moduli):
        pack += row.astype(np.int64) * stride
        stride *= m
    bijective = np.unique(pack).size == q
    fwd = cmap.forward(tuple(tables))
    bijective = bijective and bool(np.array_equal(np.sort(fwd), np.arange(q)))

    do_mult = cmap.kind is MapKind.RING
    counterexample = None

    if exhaustive:
        if q > max_exhaustive_q:
            raise ValueError(f"exhaustive sweep needs q <= {max_exhaustive_q}, got {q}")
        small = tables.astype(np.int16)
        additive = True
        multiplicative = True if do_mult else None
        # Pair sweep in row blocks so q^2 temporaries stay bounded; small q
        # slice one cached index grid instead of rebuilding it.
        cached = q <= _GRID_CACHE_Q
        block = q if cached else max(1, (1 << 21) // q + 1)
        for start in range(0, q, block):
            if cached:
                sums, prod_base = _pair_grids(q)
                prods = prod_base % q
            else:
                rows32 = np.arange(start, min(start + block, q), dtype=np.int32)
                cols32 = np.arange(q, dtype=np.int32)
                sums = (rows32[:, None] + cols32[None, :]).astype(np.int16)
                prods = rows32[:, None] * cols32[None, :]
                prods %= q
            for row, m in zip(small, moduli):
                doubled = np.concatenate([row, row])
                row_block = row[start : start + block]
                rhs = row_block[:, None] + row[None, :]
                np.subtract(rhs, m, out=rhs, where=rhs >= m)
                lhs = doubled[sums]
                if not np.array_equal(lhs, rhs):
                    additive = False
                    i, j = _first_mismatch(lhs, rhs)
                    counterexample = counterexample or (start + i, j)
                if do_mult:
                    rhsm = np.multiply(row_block[:, None], row[None, :], dtype=np.int32) % m
                    lhsm = row[prods]
                    if not np.array_equal(lhsm, rhsm):
                        multiplicative = False
                        i, j = _first_mismatch(lhsm, rhsm)
                        counterexample = counterexample or (start + i, j)
        pairs = q * q
    else:
        rng = np.random.default_rng(seed)
        a = rng.integers(0, q, size=samples)
        b = rng.integers(0, q, size=samples)
        additive = True
        multiplicative = True if do_mult else None
        for row, m in zip(tables, moduli):
            lhs = row[(a + b) % q]
            rhs = (row[a] + row[b]) % m
            if not np.array_equal(lhs, rhs):
                additive = False
                bad = int(np.argwhere(lhs != rhs)[0][0])
                counterexample = counterexample or (int(a[bad]), int(b[bad]))
            if do_mult:
                lhsm = row[(a * b) % q]
                rhsm = (row[a].astype(np.int64) * row[b]) % m
                if not np.array_equal(lhsm, rhsm):
                    multiplicative = False
                    bad = int(np.argwhere(lhsm != rhsm)[0][0])
                    counterexample = counterexample or (int(a[bad]), int(b[bad]))
        pairs = samples

    return HomomorphismReport(
        kind=cmap.kind,
        q=q,
        pairs_checked=pairs,
        bijective=bool(bijective),
        additive=bool(additive),
        multiplicative=multiplicative,
        counterexample=counterexample,
    )
