"""Multilevel lattices built from per-level linear codes and a CRT map.

The lattice is the q-periodic extension of the coset-representative set
obtained by pushing codeword tuples through the CRT map componentwise:
points x in Z^n belong to the lattice iff the inverse map sends x to a tuple
of codewords.  Geometry (closest point, mod, second moment) is exact brute
force over coset representatives plus per-coordinate q-shifts, which is
correct because the lattice contains qZ^n.

Integer logic always runs in unscaled coordinates; the single `scale` field
maps the lattice into channel coordinates.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .algebra import CrtMap, MapKind, PrimeTower
from .codes import LinearCode, random_code
from .errors import CapExceededError

DEFAULT_COSET_CAP = 10**6
CVP_MAX_DIM = 8
CVP_MAX_REPS = 10**5
SPHERE_BOUND = 1.0 / (2.0 * math.pi * math.e)


@dataclass(frozen=True, eq=False)
class MultilevelLattice:
    """L-level lattice; code l lives over the tower's l-th prime power."""

    cmap: CrtMap
    codes: tuple[LinearCode, ...]
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "codes", tuple(self.codes))
        tower = self.cmap.tower
        if len(self.codes) != tower.num_levels:
            raise ValueError("need one code per tower level")
        for code, m in zip(self.codes, tower.moduli):
            if code.modulus != m:
                raise ValueError(f"code modulus {code.modulus} does not match level modulus {m}")
        lengths = {code.n for code in self.codes}
        if len(lengths) != 1:
            raise ValueError(f"codes must share one block length, got {sorted(lengths)}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @property
    def tower(self) -> PrimeTower:
        return self.cmap.tower

    @property
    def q(self) -> int:
        return self.cmap.q

    @property
    def n(self) -> int:
        return self.codes[0].n

    @property
    def num_levels(self) -> int:
        return len(self.codes)

    def rescaled(self, scale: float) -> "MultilevelLattice":
        return MultilevelLattice(self.cmap, self.codes, scale)

    # -- enumeration ----------------------------------------------------

    def representative_count(self, cap: int = DEFAULT_COSET_CAP) -> int:
        count = 1
        for code in self.codes:
            count *= code.size(cap)
        return count

    def coset_representatives(self, cap: int = DEFAULT_COSET_CAP) -> np.ndarray:
        """All images of codeword tuples under the map, shape (M, n), in [0, q)^n."""
        cached = self.__dict__.get("_reps")
        if cached is not None:
            return cached
        books = [code.codewords(cap) for code in self.codes]
        total = 1
        for book in books:
            total *= len(book)
        if total > cap:
            raise CapExceededError(f"coset representative count {total} exceeds cap {cap}")
        idx = np.arange(total)
        reps = np.zeros((total, self.n), dtype=np.int64)
        q = self.q
        for book, w in zip(reversed(books), reversed(self.cmap.weights)):
            sel = idx % len(book)
            idx = idx // len(book)
            reps = (reps + w * book[sel]) % q
        reps = reps[np.lexsort(reps.T[::-1])]
        reps.setflags(write=False)
        object.__setattr__(self, "_reps", reps)
        return reps

    # -- membership and volume -------------------------------------------

    def contains(self, point) -> bool:
        """Prop-style membership: the inverse map must give codewords at every level."""
        arr = np.asarray(point)
        if arr.shape != (self.n,):
            raise ValueError(f"point must have length {self.n}")
        if not np.issubdtype(arr.dtype, np.integer):
            if not np.allclose(arr, np.round(arr)):
                return False
            arr = np.round(arr).astype(np.int64)
        residues = self.cmap.inverse(arr.astype(np.int64) % self.q)
        return all(code.contains(res) for code, res in zip(self.codes, residues))

    def volume_unscaled(self, cap: int = DEFAULT_COSET_CAP) -> int:
        """|Z^n / lattice| = q^n / M with M the representative count."""
        m_count = self.representative_count(cap)
        vol, rem = divmod(self.q**self.n, m_count)
        if rem:
            raise ArithmeticError("representative count does not divide q^n")
        return vol

    def volume(self, cap: int = DEFAULT_COSET_CAP) -> float:
        return self.volume_unscaled(cap) * self.scale**self.n

    # -- closest point machinery ------------------------------------------

    @property
    def _cubic_step(self) -> int | None:
        """Step c when the lattice is exactly c * Z^n (fast mod path)."""
        cached = self.__dict__.get("_cubic")
        if cached is not None:
            return cached if cached != 0 else None
        step = 0
        if all(code.k == 0 for code in self.codes):
            step = self.q
        elif all(code.size() == code.modulus**code.n for code in self.codes):
            step = 1
        object.__setattr__(self, "_cubic", step)
        return step if step != 0 else None

    def _check_cvp_caps(self):
        if self.n > CVP_MAX_DIM:
            raise CapExceededError(f"brute-force search limited to {CVP_MAX_DIM} dimensions")
        if self._cubic_step is None and self.representative_count() > CVP_MAX_REPS:
            raise CapExceededError(f"representative count exceeds {CVP_MAX_REPS}")

    def _nearest_unscaled(self, points: np.ndarray, chunk: int = 0) -> np.ndarray:
        """Closest lattice points (unscaled integer coords) for a (B, n) batch.

        Per coset the best q-shift separates per coordinate; ties go to the
        smaller coordinate so the overall minimizer is the lexicographically
        smallest one.
        """
        self._check_cvp_caps()
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        step = self._cubic_step
        if step is not None:
            return (np.ceil(pts / step - 0.5) * step).astype(np.int64)
        reps = self.coset_representatives()
        q = self.q
        if not chunk:
            chunk = max(1, int(4e6) // max(1, len(reps) * self.n))
        out = np.empty(pts.shape, dtype=np.int64)
        for start in range(0, len(pts), chunk):
            block = pts[start : start + chunk]
            shift = np.ceil((block[:, None, :] - reps[None, :, :]) / q - 0.5)
            cand = reps[None, :, :] + q * shift
            d2 = ((block[:, None, :] - cand) ** 2).sum(axis=2)
            best = np.argmin(d2, axis=1)
            rows = np.arange(len(block))
            chosen = cand[rows, best].astype(np.int64)
            # Lexicographic tie-break among cosets at exactly minimal distance.
            dmin = d2[rows, best]
            tie_rows = np.nonzero((d2 == dmin[:, None]).sum(axis=1) > 1)[0]
            for r in tie_rows:
                tied = cand[r, d2[r] == dmin[r]].astype(np.int64)
                chosen[r] = tied[np.lexsort(tied.T[::-1])][0]
            out[start : start + chunk] = chosen
        return out

    def nearest_point(self, x) -> np.ndarray:
        """Closest lattice point to x (x in scaled coords; result unscaled ints)."""
        arr = np.asarray(x, dtype=np.float64)
        single = arr.ndim == 1
        res = self._nearest_unscaled(np.atleast_2d(arr) / self.scale)
        return res[0] if single else res

    def mod(self, x) -> np.ndarray:
        """x reduced into the fundamental Voronoi region (scaled coords)."""
        arr = np.asarray(x, dtype=np.float64)
        return arr - self.scale * self.nearest_point(arr)

    def mse_distortion(self, x) -> float:
        """Per-dimension squared distance from x to the lattice."""
        err = self.mod(x)
        return float((err**2).sum() / self.n)

    # -- Monte Carlo second moment ----------------------------------------

    def second_moment(
        self,
        trials: int,
        seed: int = 0,
        chunk: int = 4096,
        threads: int = 1,
    ) -> "SecondMomentResult":
        """Estimate the per-dimension second moment and normalized second moment.

        Samples uniform points of the cube [0, q)^n and folds them into the
        Voronoi region; the cube is a union of Voronoi translates, so the
        folded points are uniform over the cell.
        """
        if trials < 1:
            raise ValueError("need at least one trial")
        self._check_cvp_caps()
        if self._cubic_step is None:
            self.coset_representatives()  # warm the cache before threads share it
        n, q = self.n, self.q
        chunks = [(i, min(chunk, trials - i * chunk)) for i in range((trials + chunk - 1) // chunk)]

        def run(task):
            ci, size = task
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(ci,)))
            u = rng.uniform(0.0, q, size=(size, n))
            err = u - self._nearest_unscaled(u)
            vals = (err**2).sum(axis=1) / n
            return vals.sum(), (vals**2).sum()

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(run, chunks))
        else:
            parts = [run(t) for t in chunks]
        total = sum(p[0] for p in parts)
        total_sq = sum(p[1] for p in parts)
        mean = total / trials
        var = max(total_sq / trials - mean**2, 0.0)
        se = math.sqrt(var / trials)
        vol = self.volume_unscaled()
        norm = vol ** (2.0 / n)
        return SecondMomentResult(
            second_moment=mean * self.scale**2,
            second_moment_se=se * self.scale**2,
            nsm=mean / norm,
            nsm_se=se / norm,
            trials=trials,
        )

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "tower": [[p, e] for p, e in self.tower.levels],
            "map_kind": self.cmap.kind.value,
            "coefficients": list(self.cmap.coefficients),
            "scale": self.scale,
            "codes": [code.to_dict() for code in self.codes],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MultilevelLattice":
        tower = PrimeTower(tuple((int(p), int(e)) for p, e in data["tower"]))
        cmap = CrtMap(tower, tuple(data["coefficients"]), MapKind(data["map_kind"]))
        codes = tuple(LinearCode.from_dict(c) for c in data["codes"])
        return cls(cmap, codes, float(data.get("scale", 1.0)))


@dataclass(frozen=True)
class SecondMomentResult:
    second_moment: float
    second_moment_se: float
    nsm: float
    nsm_se: float
    trials: int


def construct_multilevel(
    codes: Sequence[LinearCode], cmap: CrtMap, scale: float = 1.0
) -> MultilevelLattice:
    """Build the lattice from per-level codes and a CRT map."""
    return MultilevelLattice(cmap, tuple(codes), scale)


def cubic_lattice(n: int, modulus: int = 2, scale: float = 1.0) -> MultilevelLattice:
    """Z^n realized as a single-level lattice with the full code."""
    cmap = CrtMap.ring_iso(PrimeTower.squarefree((modulus,)))
    return MultilevelLattice(cmap, (LinearCode.full(n, modulus),), scale)


# -- ensemble quantization sweep ------------------------------------------


@dataclass(frozen=True)
class QuantizationSweepRow:
    kind: str
    n: int
    q: int
    tower: str
    dims: tuple[int, ...]
    nsm_mean: float
    nsm_se: float
    sphere_bound: float = SPHERE_BOUND


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def _small_primes(limit: int = 100) -> list[int]:
    sieve = [True] * limit
    primes = []
    for p in range(2, limit):
        if sieve[p]:
            primes.append(p)
            for mult in range(p * p, limit, p):
                sieve[mult] = False
    return primes


def tower_for_dimension(n: int, xi: float = 0.75, num_levels: int = 2) -> PrimeTower:
    """Square-free tower whose modulus tracks q ~ xi * n^{3/2}.

    Picks the product of `num_levels` distinct primes closest to the target
    (ties to the smaller product).
    """
    target = xi * n**1.5
    primes = _small_primes(60)
    best = None
    for combo in combinations(primes, num_levels):
        prod = math.prod(combo)
        if prod > 64 * max(target, 1.0):
            continue
        key = (abs(prod - target), prod)
        if best is None or key < best[0]:
            best = (key, combo)
    if best is None:
        raise ValueError("no candidate tower found; raise xi or lower num_levels")
    return PrimeTower.squarefree(best[1])


def code_dims_for_rate(n: int, tower: PrimeTower, delta: float = 0.1) -> tuple[int, ...]:
    """Per-level code dimensions from the ball-volume rate rule.

    Each level aims for (m_l / n) log2(m_l) = 0.5 log2(4 / V_n^{2/n}) + delta.
    """
    bits = 0.5 * math.log2(4.0 / unit_ball_volume(n) ** (2.0 / n)) + delta
    dims = []
    for m in tower.moduli:
        dims.append(int(np.clip(round(n * bits / math.log2(m)), 0, n)))
    return tuple(dims)


def ensemble_quantization_sweep(
    n_values: Sequence[int],
    trials: int,
    seed: int = 0,
    xi: float = 0.75,
    num_levels: int = 2,
    delta: float = 0.1,
    ensemble: int = 6,
    include_baseline: bool = True,
    threads: int = 1,
) -> list[QuantizationSweepRow]:
    """Mean normalized second moment of random-code lattices per dimension.

    A trend check at desk scale: rows report ensemble means with standard
    errors next to the large-n sphere bound.  The n = 1 cubic baseline row
    (analytic value 1/12) runs through the same estimator.
    """
    rows = []
    if include_baseline:
        base = cubic_lattice(1).second_moment(trials, seed=seed, threads=threads)
        rows.append(
            QuantizationSweepRow(
                kind="cubic-baseline",
                n=1,
                q=1,
                tower="-",
                dims=(),
                nsm_mean=base.nsm,
                nsm_se=base.nsm_se,
            )
        )
    for n in n_values:
        tower = tower_for_dimension(n, xi=xi, num_levels=num_levels)
        dims = code_dims_for_rate(n, tower, delta=delta)
        cmap = CrtMap.ring_iso(tower)
        estimates = []
        ses = []
        for draw in range(ensemble):
            codes = tuple(
                random_code(n, k, m, np.random.SeedSequence(seed, spawn_key=(n, draw, lvl)))
                for lvl, (k, m) in enumerate(zip(dims, tower.moduli))
            )
            lat = MultilevelLattice(cmap, codes)
            res = lat.second_moment(trials, seed=seed + draw + 1, threads=threads)
            estimates.append(res.nsm)
            ses.append(res.nsm_se)
        mean = float(np.mean(estimates))
        se = math.sqrt(np.var(estimates) / ensemble + np.mean(np.square(ses)) / ensemble)
        rows.append(
            QuantizationSweepRow(
                kind="ensemble",
                n=n,
                q=tower.q,
                tower="*".join(str(m) for m in tower.moduli),
                dims=dims,
                nsm_mean=mean,
                nsm_se=se,
            )
        )
    return rows
