"""Linear codes over Z_{p^e} with column-generator convention.

A codeword is G @ y (mod p^e) for a message y, with G of shape (n, k):
generators act on messages from the right, so columns of G span the code.
Much of the literature uses the transpose; serialized generators here are
always the (n, k) column form.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property


import numpy as np

from .algebra import factorize
from .errors import CapExceededError

DEFAULT_ENUM_CAP = 10**6


def _as_int_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"{name} must be integer-valued")
    return arr.astype(np.int64)


def message_grid(modulus: int, k: int, cap: int = DEFAULT_ENUM_CAP) -> np.ndarray:
    """All modulus^k messages as a (modulus^k, k) array, lexicographic order."""
    count = modulus**k
    if count > cap:
        raise CapExceededError(f"message space {count} exceeds cap {cap}")
    msgs = np.zeros((count, k), dtype=np.int64)
    idx = np.arange(count)
    for col in range(k - 1, -1, -1):
        msgs[:, col] = idx % modulus
        idx //= modulus
    return msgs


@dataclass(frozen=True, eq=False)
class LinearCode:
    """(n, k) linear code over Z_{p^e}; generator shape (n, k)."""

    modulus: int
    generator: np.ndarray

    def __post_init__(self):
        gen = _as_int_array(self.generator, "generator")
        if gen.ndim != 2:
            raise ValueError("generator must be a 2-d matrix of shape (n, k)")
        factors = factorize(self.modulus) if self.modulus >= 2 else []
        if len(factors) != 1:
            raise ValueError(f"modulus must be a prime power, got {self.modulus}")
        if gen.shape[1] > gen.shape[0]:
            raise ValueError(f"need k <= n, got shape {gen.shape}")
        if gen.size and (gen.min() < 0 or gen.max() >= self.modulus):
            raise ValueError(f"generator entries must lie in [0, {self.modulus})")
        gen.setflags(write=False)
        object.__setattr__(self, "generator", gen)
        p, e = factors[0]
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "e", e)

    @property
    def n(self) -> int:
        return self.generator.shape[0]

    @property
    def k(self) -> int:
        return self.generator.shape[1]

    @classmethod
    def zero(cls, n: int, modulus: int) -> "LinearCode":
        """The {0} code (k = 0)."""
        return cls(modulus, np.zeros((n, 0), dtype=np.int64))

    @classmethod
    def full(cls, n: int, modulus: int) -> "LinearCode":
        """The full space Z_m^n (identity generator)."""
        return cls(modulus, np.eye(n, dtype=np.int64))

    def encode(self, message) -> np.ndarray:
        msg = _as_int_array(message, "message")
        if msg.shape != (self.k,):
            raise ValueError(f"message must have length {self.k}")
        if msg.size and (msg.min() < 0 or msg.max() >= self.modulus):
            raise ValueError(f"message entries must lie in [0, {self.modulus})")
        return (self.generator @ msg) % self.modulus

    def codewords(self, cap: int = DEFAULT_ENUM_CAP) -> np.ndarray:
        """Deduplicated codebook, lexicographically sorted, shape (size, n)."""
        cached = self.__dict__.get("_codewords")
        if cached is not None:
            return cached
        msgs = message_grid(self.modulus, self.k, cap)
        words = np.unique((msgs @ self.generator.T) % self.modulus, axis=0)
        words.setflags(write=False)
        object.__setattr__(self, "_codewords", words)
        return words

    def size(self, cap: int = DEFAULT_ENUM_CAP) -> int:
        return len(self.codewords(cap))

    @cached_property
    def _codeword_set(self) -> frozenset:
        return frozenset(map(tuple, self.codewords().tolist()))

    def contains(self, word) -> bool:
        """Membership: row reduction over F_p when e = 1, else enumeration."""
        w = _as_int_array(word, "word")
        if w.shape != (self.n,):
            raise ValueError(f"word must have length {self.n}")
        w = w % self.modulus
        if self.e == 1:
            return _solvable_mod_p(self.generator, w, self.p)
        return tuple(w.tolist()) in self._codeword_set

    def is_injective(self, cap: int = DEFAULT_ENUM_CAP) -> bool:
        """True when distinct messages give distinct codewords."""
        return self.size(cap) == self.modulus**self.k

    def to_dict(self) -> dict:
        return {
            "modulus": self.modulus,
            "n": self.n,
            "k": self.k,
            "generator": [int(v) for v in self.generator.reshape(-1)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LinearCode":
        gen = np.asarray(data["generator"], dtype=np.int64).reshape(data["n"], data["k"])
        return cls(int(data["modulus"]), gen)


def _solvable_mod_p(gen: np.ndarray, word: np.ndarray, p: int) -> bool:
    """Does G @ y = word (mod p) have a solution?  Gaussian elimination."""
    aug = np.concatenate([gen % p, word[:, None] % p], axis=1).astype(np.int64)
    n, cols = aug.shape
    k = cols - 1
    row = 0
    for col in range(k):
        pivot = None
        for r in range(row, n):
            if aug[r, col] % p != 0:
                pivot = r
                break
        if pivot is None:
            continue
        aug[[row, pivot]] = aug[[pivot, row]]
        inv = pow(int(aug[row, col]), p - 2, p)
        aug[row] = (aug[row] * inv) % p
        for r in range(n):
            if r != row and aug[r, col] % p != 0:
                aug[r] = (aug[r] - aug[r, col] * aug[row]) % p
        row += 1
    # The system is consistent iff no zero row has a nonzero augmented entry.
    for r in range(n):
        if np.all(aug[r, :k] == 0) and aug[r, k] % p != 0:
            return False
    return True


def rank_mod_p(matrix: np.ndarray, p: int) -> int:
    """Rank of an integer matrix over F_p."""
    a = (np.asarray(matrix, dtype=np.int64) % p).copy()
    n, k = a.shape
    row = 0
    for col in range(k):
        pivot = None
        for r in range(row, n):
            if a[r, col] % p != 0:
                pivot = r
                break
        if pivot is None:
            continue
        a[[row, pivot]] = a[[pivot, row]]
        inv = pow(int(a[row, col]), p - 2, p)
        a[row] = (a[row] * inv) % p
        for r in range(n):
            if r != row and a[r, col] % p != 0:
                a[r] = (a[r] - a[r, col] * a[row]) % p
        row += 1
        if row == n:
            break
    return row


def random_code(n: int, k: int, modulus: int, seed) -> LinearCode:
    """Generator entries i.i.d. uniform over [0, modulus); deterministic per seed."""
    if k > n:
        raise ValueError("need k <= n")
    rng = np.random.default_rng(seed)
    gen = rng.integers(0, modulus, size=(n, k), dtype=np.int64)
    return LinearCode(modulus, gen)


@dataclass(frozen=True, eq=False)
class NestedCodePair:
    """Coarse/fine code pair; the coarse generator is a prefix of the fine one."""

    coarse: LinearCode
    fine: LinearCode

    def __post_init__(self):
        if self.coarse.modulus != self.fine.modulus:
            raise ValueError("coarse and fine codes must share a modulus")
        if self.coarse.n != self.fine.n:
            raise ValueError("coarse and fine codes must share a block length")
        if self.coarse.k > self.fine.k:
            raise ValueError("need m_c <= m_f")
        if not np.array_equal(self.fine.generator[:, : self.coarse.k], self.coarse.generator):
            raise ValueError("coarse generator must be a prefix of the fine generator")

    @property
    def modulus(self) -> int:
        return self.coarse.modulus

    @property
    def n(self) -> int:
        return self.coarse.n

    @property
    def message_dim(self) -> int:
        """Message symbols carried by the fine/coarse quotient."""
        return self.fine.k - self.coarse.k

    @property
    def suffix_generator(self) -> np.ndarray:
        """Columns of the fine generator beyond the coarse prefix."""
        return self.fine.generator[:, self.coarse.k :]


def random_nested_pair(n: int, m_coarse: int, m_fine: int, modulus: int, seed) -> NestedCodePair:
    """Random fine generator whose first m_coarse columns form the coarse code."""
    if not 0 <= m_coarse <= m_fine <= n:
        raise ValueError("need 0 <= m_coarse <= m_fine <= n")
    fine = random_code(n, m_fine, modulus, seed)
    coarse = LinearCode(modulus, fine.generator[:, :m_coarse])
    return NestedCodePair(coarse, fine)
