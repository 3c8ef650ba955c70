"""Decoders for multilevel lattices over the AWGN channel.

Three decoders recover the per-level codewords and the uncoded integer part
of a transmitted lattice point:

* multistage (``msd``): per-level MAP on the raw observation, marginalizing
  the still-undecoded levels and the q-periodic shifts, conditioning on the
  levels already decided;
* serial modulo (``smd``): reduce mod m_1, decode, subtract the decoded
  contribution, divide by m_1 (which shrinks the noise), and continue --
  each later level sees a cleaner mod-m_s channel;
* parallel modulo (``pmd``): reduce mod m_s independently per level, all
  levels seeing the full noise variance.

Prime-power levels (e > 1) are decoded by successive mod-p stages inside
the serial/parallel decoders; the multistage decoder searches the chain-ring
codebook directly.  Likelihoods use truncated wrapped Gaussians; maximum
ties break toward the lexicographically smallest codeword.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .algebra import invmod
from .codes import LinearCode
from .lattice import MultilevelLattice

NOISE_FLOOR = 1e-12  # stands in for an exactly-noiseless channel


@dataclass(frozen=True)
class WrappedGaussian:
    """Gaussian density aliased onto a 1-d lattice of the given period.

    The infinite sum over shifts is truncated at |k| <= wraps; at the default
    wraps=6 the mass over one period is within 1e-9 of 1 for std <= period.
    """

    variance: float
    period: float
    wraps: int = 6

    def __post_init__(self):
        if self.variance <= 0:
            raise ValueError("variance must be positive")
        if self.period <= 0:
            raise ValueError("period must be positive")
        if self.wraps < 1:
            raise ValueError("need at least one wrap")

    def logpdf(self, z) -> np.ndarray | float:
        arr = np.asarray(z, dtype=np.float64)
        shifts = np.arange(-self.wraps, self.wraps + 1) * self.period
        vals = arr[..., None] + shifts
        logs = -(vals**2) / (2.0 * self.variance) - 0.5 * math.log(2.0 * math.pi * self.variance)
        out = logsumexp(logs, axis=-1)
        return float(out) if np.ndim(z) == 0 else out

    def pdf(self, z):
        return np.exp(self.logpdf(z))


@dataclass(frozen=True)
class DecodeResult:
    """Per-level codeword decisions plus the uncoded integer part.

    `point` = forward(codewords) + q * integer_part, in the lattice's
    unscaled integer coordinates; it is a lattice point by construction.
    """

    codewords: tuple[np.ndarray, ...]
    integer_part: np.ndarray
    point: np.ndarray

    def to_dict(self) -> dict:
        return {
            "codewords": [[int(v) for v in word] for word in self.codewords],
            "integer_part": [int(v) for v in self.integer_part],
            "point": [int(v) for v in self.point],
        }


def _prepare(lat: MultilevelLattice, y, noise_var: float) -> tuple[np.ndarray, float]:
    arr = np.asarray(y, dtype=np.float64)
    if arr.shape != (lat.n,):
        raise ValueError(f"observation must have length {lat.n}")
    y_u = arr / lat.scale
    var_u = max(noise_var / lat.scale**2, NOISE_FLOOR)
    return y_u, var_u


def _ml_codeword(code: LinearCode, y_red: np.ndarray, variance: float, wraps: int) -> np.ndarray:
    """Exhaustive ML over the codebook under the wrapped likelihood."""
    book = code.codewords()
    wg = WrappedGaussian(variance, float(code.modulus), wraps)
    scores = wg.logpdf(y_red[None, :] - book).sum(axis=1)
    return book[int(np.argmax(scores))]


def decode_chainring_level(
    code: LinearCode, y_level: np.ndarray, noise_var: float, wraps: int = 6
) -> np.ndarray:
    """Successive decoding of a code over Z_{p^e} through e mod-p stages.

    Each stage ML-decodes the current base-p digit over the surviving
    candidates, subtracts it, and divides observation and candidates by p
    (shrinking the noise std by p); survivors after e stages agree entirely.
    """
    variance = max(noise_var, NOISE_FLOOR)
    book = code.codewords()
    p = code.p
    work = np.asarray(y_level, dtype=np.float64).copy()
    digits = book.copy()
    keep = np.ones(len(book), dtype=bool)
    for _ in range(code.e):
        stage_digits = digits[keep] % p
        options = np.unique(stage_digits, axis=0)
        wg = WrappedGaussian(variance, float(p), wraps)
        scores = wg.logpdf((work % p)[None, :] - options).sum(axis=1)
        chosen = options[int(np.argmax(scores))]
        keep[keep] = np.all(stage_digits == chosen, axis=1)
        digits = np.where(keep[:, None], (digits - chosen) // p, digits)
        work = (work - chosen) / p
        variance /= p * p
    return book[keep][0]


def _level_decode(code: LinearCode, y_red: np.ndarray, variance: float, wraps: int) -> np.ndarray:
    if code.e == 1:
        return _ml_codeword(code, y_red, variance, wraps)
    return decode_chainring_level(code, y_red, variance, wraps)


def _finish(lat: MultilevelLattice, y_u: np.ndarray, decoded: list[np.ndarray]) -> DecodeResult:
    base = lat.cmap.forward(tuple(decoded))
    zeta = np.round((y_u - base) / lat.q).astype(np.int64)
    return DecodeResult(
        codewords=tuple(decoded),
        integer_part=zeta,
        point=base + lat.q * zeta,
    )


def decode_parallel(lat: MultilevelLattice, y, noise_var: float, wraps: int = 6) -> DecodeResult:
    """Parallel modulo decoder: each level reduces the raw observation.

    Every level sees the full (unreduced) noise variance.
    """
    y_u, var_u = _prepare(lat, y, noise_var)
    decoded = []
    for code, m, uinv in zip(lat.codes, lat.tower.moduli, lat.cmap.level_unit_inverses):
        y_red = np.mod(y_u, m)
        c_tilde = _level_decode(code, y_red, var_u, wraps)
        decoded.append((uinv * c_tilde) % m)
    return _finish(lat, y_u, decoded)


def decode_serial(lat: MultilevelLattice, y, noise_var: float, wraps: int = 6) -> DecodeResult:
    """Serial modulo decoder with subtraction and division between levels.

    Level s >= 2 works on (y - forward(decided, 0..)) / prod_{l<s} m_l, so its
    effective noise variance is the channel's divided by that product squared.
    The level-s code is recovered up to the unit d_s, inverted after decoding.
    """
    y_u, var_u = _prepare(lat, y, noise_var)
    tower = lat.tower
    decoded: list[np.ndarray] = []
    divisor = 1
    for s, (code, m) in enumerate(zip(lat.codes, tower.moduli)):
        if s == 0:
            y_work = y_u
        else:
            padded = decoded + [np.zeros(lat.n, dtype=np.int64) for _ in range(lat.num_levels - s)]
            y_work = (y_u - lat.cmap.forward(tuple(padded))) / divisor
        var_s = var_u / divisor**2
        c_tilde = _level_decode(code, np.mod(y_work, m), var_s, wraps)
        d_s = (lat.cmap.coefficients[s] * (tower.partial_products[s] // divisor)) % m
        decoded.append((invmod(d_s, m) * c_tilde) % m)
        divisor *= m
    return _finish(lat, y_u, decoded)


def _residue_grid(moduli: tuple[int, ...]) -> np.ndarray:
    """All residue combinations for the given moduli, shape (prod, len)."""
    total = math.prod(moduli) if moduli else 1
    grid = np.zeros((total, len(moduli)), dtype=np.int64)
    idx = np.arange(total)
    for col in range(len(moduli) - 1, -1, -1):
        grid[:, col] = idx % moduli[col]
        idx //= moduli[col]
    return grid


def decode_multistage(lat: MultilevelLattice, y, noise_var: float, wraps: int = 3) -> DecodeResult:
    """Level-by-level MAP on the raw observation.

    At level l the likelihood of a candidate codeword marginalizes the
    undecoded levels (per-symbol uniform residues) and q-periodic shifts,
    conditioning on the levels already decided.
    """
    y_u, var_u = _prepare(lat, y, noise_var)
    q = lat.q
    y_red = np.mod(y_u, q)
    weights = lat.cmap.weights
    moduli = lat.tower.moduli
    base = np.zeros(lat.n, dtype=np.int64)
    shifts = np.arange(-wraps, wraps + 1) * q
    decoded = []
    for l, code in enumerate(lat.codes):
        m = moduli[l]
        tails = _residue_grid(moduli[l + 1 :])
        tail_vals = (tails @ np.asarray(weights[l + 1 :], dtype=np.int64)) % q
        offsets = (weights[l] * np.arange(m, dtype=np.int64)[:, None] + tail_vals[None, :]) % q
        # means per position/candidate/tail; wrap over +-wraps periods of q
        mu = (base[:, None, None] + offsets[None, :, :]) % q
        diffs = y_red[:, None, None, None] - mu[..., None] + shifts
        logs = -(diffs**2) / (2.0 * var_u) - 0.5 * math.log(2.0 * math.pi * var_u)
        table = logsumexp(logs, axis=(2, 3)) - math.log(tail_vals.size)
        book = code.codewords()
        scores = table[np.arange(lat.n)[None, :], book].sum(axis=1)
        best = book[int(np.argmax(scores))]
        decoded.append(best)
        base = (base + weights[l] * best) % q
    zeta = np.round((y_u - base) / q).astype(np.int64)
    return DecodeResult(codewords=tuple(decoded), integer_part=zeta, point=base + q * zeta)


DECODERS = {
    "msd": decode_multistage,
    "smd": decode_serial,
    "pmd": decode_parallel,
}
