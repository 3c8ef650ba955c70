"""Multilevel lattices from linear codes via CRT ring isomorphisms.

Library layout:

* :mod:`crtlattice.algebra` -- prime towers, Bezout coefficients, CRT maps;
* :mod:`crtlattice.codes` -- linear codes over Z_{p^e} and nested pairs;
* :mod:`crtlattice.lattice` -- lattice construction, membership, closest
  point, Monte Carlo second moments;
* :mod:`crtlattice.decoders` -- multistage / serial / parallel decoders;
* :mod:`crtlattice.nested` -- nested lattice codes with dithering and MMSE
  receive;
* :mod:`crtlattice.sim` -- AWGN experiments, rate curves, complexity model;
* :mod:`crtlattice.cli` -- the `crtlattice` command.
"""

__version__ = "0.1.0"

from .algebra import (
    CrtMap,
    HomomorphismReport,
    MapKind,
    PrimeTower,
    bezout_coefficients,
    centered,
    homomorphism_check,
)
from .codes import LinearCode, NestedCodePair, random_code, random_nested_pair
from .decoders import (
    DECODERS,
    DecodeResult,
    WrappedGaussian,
    decode_chainring_level,
    decode_multistage,
    decode_parallel,
    decode_serial,
)
from .errors import CapExceededError, ConfigError, InvariantViolation
from .lattice import (
    MultilevelLattice,
    SecondMomentResult,
    construct_multilevel,
    cubic_lattice,
    ensemble_quantization_sweep,
)
from .nested import ChannelState, NestedLatticeCode
from .sim import (
    awgn,
    complexity_estimate,
    complexity_table,
    error_rate_sim,
    nested_error_sim,
    rate_curve,
    wilson_interval,
)

__all__ = [
    "CrtMap",
    "HomomorphismReport",
    "MapKind",
    "PrimeTower",
    "bezout_coefficients",
    "centered",
    "homomorphism_check",
    "LinearCode",
    "NestedCodePair",
    "random_code",
    "random_nested_pair",
    "DECODERS",
    "DecodeResult",
    "WrappedGaussian",
    "decode_chainring_level",
    "decode_multistage",
    "decode_parallel",
    "decode_serial",
    "CapExceededError",
    "ConfigError",
    "InvariantViolation",
    "MultilevelLattice",
    "SecondMomentResult",
    "construct_multilevel",
    "cubic_lattice",
    "ensemble_quantization_sweep",
    "ChannelState",
    "NestedLatticeCode",
    "awgn",
    "complexity_estimate",
    "complexity_table",
    "error_rate_sim",
    "nested_error_sim",
    "rate_curve",
    "wilson_interval",
]
