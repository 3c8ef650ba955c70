"""Nested lattice codes: fine/coarse pair, dithered encoding, MMSE receiver.

Messages select fine-lattice cosets inside the coarse Voronoi region.  Both
lattices share the CRT map and are scaled by gamma / q with gamma = 2 sqrt(nP)
so the coarse cell roughly matches the power budget.  The receiver scales by
alpha = P / (P + noise_var), adds the dither back, reduces mod the coarse
lattice, and runs a level-by-level MAP over the fine cosets with the wrapped
effective-noise likelihood.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .algebra import CrtMap, PrimeTower
from .codes import NestedCodePair, message_grid, random_nested_pair
from .errors import CapExceededError
from .lattice import MultilevelLattice

DEFAULT_MESSAGE_CAP = 10**5
EFFECTIVE_NOISE_FLOOR = 1e-12


@dataclass(frozen=True)
class ChannelState:
    """Power/noise bookkeeping for the MMSE receiver."""

    power: float
    noise_var: float

    @property
    def snr(self) -> float:
        return self.power / self.noise_var if self.noise_var > 0 else math.inf

    @property
    def alpha(self) -> float:
        """MMSE scaling P / (P + noise_var)."""
        return self.power / (self.power + self.noise_var)

    @property
    def effective_noise_var(self) -> float:
        """Variance of alpha*z - (1-alpha)*x, equal to P*noise_var/(P+noise_var)."""
        return self.power * self.noise_var / (self.power + self.noise_var)


@dataclass(frozen=True, eq=False)
class NestedLatticeCode:
    """Fine/coarse multilevel lattice pair carrying messages in the quotient."""

    cmap: CrtMap
    pairs: tuple[NestedCodePair, ...]
    power: float

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        tower = self.cmap.tower
        if len(self.pairs) != tower.num_levels:
            raise ValueError("need one nested pair per tower level")
        for pair, m in zip(self.pairs, tower.moduli):
            if pair.modulus != m:
                raise ValueError("pair modulus does not match tower level")
        if len({pair.n for pair in self.pairs}) != 1:
            raise ValueError("pairs must share a block length")
        if not self.power > 0:
            raise ValueError("power must be positive")

    @property
    def n(self) -> int:
        return self.pairs[0].n

    @property
    def q(self) -> int:
        return self.cmap.q

    @property
    def gamma(self) -> float:
        return 2.0 * math.sqrt(self.n * self.power)

    @property
    def scale(self) -> float:
        return self.gamma / self.q

    @cached_property
    def fine_lattice(self) -> MultilevelLattice:
        return MultilevelLattice(self.cmap, tuple(p.fine for p in self.pairs), self.scale)

    @cached_property
    def coarse_lattice(self) -> MultilevelLattice:
        return MultilevelLattice(self.cmap, tuple(p.coarse for p in self.pairs), self.scale)

    @property
    def message_dims(self) -> tuple[int, ...]:
        return tuple(pair.message_dim for pair in self.pairs)

    @cached_property
    def _level_messages(self) -> tuple[np.ndarray, ...]:
        """Per-level message grids, lexicographic order."""
        out = []
        for pair in self.pairs:
            out.append(message_grid(pair.modulus, pair.message_dim, DEFAULT_MESSAGE_CAP))
        return tuple(out)

    @property
    def message_count(self) -> int:
        count = 1
        for grid in self._level_messages:
            count *= len(grid)
        return count

    def message_index(self, messages: Sequence) -> int:
        """Flatten a per-level message tuple to its enumeration index."""
        idx = 0
        for grid, pair, w in zip(self._level_messages, self.pairs, messages):
            w = np.asarray(w, dtype=np.int64)
            if w.shape != (pair.message_dim,):
                raise ValueError("message length mismatch")
            local = 0
            for sym in w:
                local = local * pair.modulus + int(sym)
            idx = idx * len(grid) + local
        return idx

    def message_tuple(self, index: int) -> tuple[np.ndarray, ...]:
        out = []
        for grid in reversed(self._level_messages):
            index, local = divmod(index, len(grid))
            out.append(grid[local])
        return tuple(reversed(out))

    def codewords_for(self, messages: Sequence) -> tuple[np.ndarray, ...]:
        """Per-level fine codewords G_f [0; w] = (suffix columns) @ w."""
        words = []
        for pair, w in zip(self.pairs, messages):
            w = np.asarray(w, dtype=np.int64)
            words.append((pair.suffix_generator @ w) % pair.modulus)
        return tuple(words)

    @cached_property
    def _point_table(self) -> np.ndarray:
        """Unscaled integer points t for every message, shape (count, n).

        t = forward(codewords) reduced mod the coarse lattice; exact integers
        because the coarse lattice contains qZ^n.
        """
        if self.message_count > DEFAULT_MESSAGE_CAP:
            raise CapExceededError(f"message count {self.message_count} exceeds cap")
        pts = np.zeros((self.message_count, self.n), dtype=np.int64)
        for idx in range(self.message_count):
            msgs = self.message_tuple(idx)
            v = self.cmap.forward(self.codewords_for(msgs))
            pts[idx] = v
        coarse = self.coarse_lattice
        pts = pts - coarse._nearest_unscaled(pts.astype(np.float64))
        pts.setflags(write=False)
        return pts

    def point(self, messages: Sequence) -> np.ndarray:
        """The fine-lattice coset leader t for a message (scaled coords)."""
        return self.scale * self._point_table[self.message_index(messages)]

    def encode(self, messages: Sequence, dither=None) -> np.ndarray:
        """Transmit vector x = (t - dither) mod coarse lattice."""
        t = self.point(messages)
        if dither is None:
            return t
        u = np.asarray(dither, dtype=np.float64)
        return self.coarse_lattice.mod(t - u)

    def sample_dither(self, seed) -> np.ndarray:
        """Uniform dither over the coarse Voronoi region (cube fold)."""
        rng = np.random.default_rng(seed)
        u = rng.uniform(0.0, self.gamma, size=self.n)
        return self.coarse_lattice.mod(u)

    def mmse_receive(self, y, noise_var: float, dither) -> np.ndarray:
        """(alpha y + dither) mod coarse lattice."""
        state = ChannelState(self.power, noise_var) if noise_var > 0 else None
        alpha = state.alpha if state else 1.0
        u = np.asarray(dither, dtype=np.float64)
        return self.coarse_lattice.mod(alpha * np.asarray(y, dtype=np.float64) + u)

    # -- decoding ---------------------------------------------------------

    @cached_property
    def _coarse_components(self) -> np.ndarray:
        """Coarse coset representatives (unscaled ints) for the aliased likelihood."""
        return self.coarse_lattice.coset_representatives()

    def _loglik_matrix(self, obs: np.ndarray, effective_var: float, wraps: int) -> np.ndarray:
        """Joint log-likelihood of each message for a (B, n) observation batch.

        The effective noise lives mod the coarse lattice, whose points split
        into coarse codeword components plus gamma-periodic per-coordinate
        wraps; both are marginalized (truncated at +-wraps periods).
        """
        var = max(effective_var, EFFECTIVE_NOISE_FLOOR * self.gamma**2)
        pts = self._point_table
        coarse = self._coarse_components
        means = self.scale * (pts[:, None, :] + coarse[None, :, :])  # (M, C, n)
        shifts = np.arange(-wraps, wraps + 1) * self.gamma
        diffs = obs[:, None, None, :, None] - means[None, ..., None] + shifts
        logs = -(diffs**2) / (2.0 * var) - 0.5 * math.log(2.0 * math.pi * var)
        per_coord = logsumexp(logs, axis=-1)  # wrap sum, (B, M, C, n)
        per_component = per_coord.sum(axis=-1)  # (B, M, C)
        return logsumexp(per_component, axis=-1) - math.log(len(coarse))  # (B, M)

    def decode_batch(self, obs: np.ndarray, noise_var: float, wraps: int = 6) -> np.ndarray:
        """Level-by-level MAP; returns flat message indices, shape (B,).

        Candidate scores at each level marginalize the undecoded levels of
        the joint likelihood and condition on decided ones.
        """
        obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
        state = ChannelState(self.power, noise_var) if noise_var > 0 else None
        eff_var = state.effective_noise_var if state else 0.0
        ll = self._loglik_matrix(obs, eff_var, wraps)
        sizes = tuple(len(g) for g in self._level_messages)
        tensor = ll.reshape((len(obs),) + sizes)
        batch = np.arange(len(obs))
        chosen = []
        for level in range(len(sizes)):
            remaining = tuple(range(level + 2, tensor.ndim))
            marg = logsumexp(tensor, axis=remaining) if remaining else tensor
            pick = np.argmax(marg, axis=1)
            chosen.append(pick)
            tensor = tensor[batch, pick]
        flat = np.zeros(len(obs), dtype=np.int64)
        for pick, size in zip(chosen, sizes):
            flat = flat * size + pick
        return flat

    def decode(self, obs, noise_var: float, wraps: int = 6) -> tuple[np.ndarray, ...]:
        """Recover the per-level message tuple from a single observation."""
        flat = self.decode_batch(np.asarray(obs, dtype=np.float64)[None, :], noise_var, wraps)
        return self.message_tuple(int(flat[0]))

    # -- rates ------------------------------------------------------------

    def design_rate(self) -> float:
        """Design rate in bits per dimension from the generator shapes."""
        return sum(
            pair.message_dim * math.log2(pair.modulus) for pair in self.pairs
        ) / self.n

    def actual_rate(self) -> float:
        """log2(fine size / coarse size) / n from enumerated codebooks."""
        ratio = 1.0
        for pair in self.pairs:
            ratio *= pair.fine.size() / pair.coarse.size()
        return math.log2(ratio) / self.n

    def quotient_size(self) -> int:
        """Number of distinct fine points inside the coarse Voronoi region."""
        return len(np.unique(self._point_table, axis=0))

    # -- configuration ----------------------------------------------------

    def to_config(self, seed: int | None = None) -> dict:
        cfg = {
            "tower": [[p, e] for p, e in self.cmap.tower.levels],
            "n": self.n,
            "m_c": [pair.coarse.k for pair in self.pairs],
            "m_f": [pair.fine.k for pair in self.pairs],
            "power": self.power,
        }
        if seed is not None:
            cfg["seed"] = seed
        return cfg

    @classmethod
    def from_config(cls, config: dict) -> "NestedLatticeCode":
        tower = PrimeTower(tuple((int(p), int(e)) for p, e in config["tower"]))
        cmap = CrtMap.ring_iso(tower)
        n = int(config["n"])
        m_c = [int(v) for v in config["m_c"]]
        m_f = [int(v) for v in config["m_f"]]
        if len(m_c) != tower.num_levels or len(m_f) != tower.num_levels:
            raise ValueError("m_c/m_f must list one entry per tower level")
        seed = int(config.get("seed", 0))
        power = config.get("power", config.get("P"))
        if power is None:
            raise ValueError("config needs a `power` (or `P`) entry")
        pairs = tuple(
            random_nested_pair(n, mc, mf, m, np.random.SeedSequence(seed, spawn_key=(lvl,)))
            for lvl, (mc, mf, m) in enumerate(zip(m_c, m_f, tower.moduli))
        )
        return cls(cmap, pairs, float(power))
