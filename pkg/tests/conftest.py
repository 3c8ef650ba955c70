import numpy as np
import pytest

from crtlattice.algebra import CrtMap, PrimeTower
from crtlattice.codes import LinearCode
from crtlattice.lattice import MultilevelLattice


@pytest.fixture(scope="session")
def example_lattice():
    """Two-level lattice over (3, 5): G1 = [1,2]^T over F3, G2 = [1,1]^T over F5."""
    cmap = CrtMap.ring_iso(PrimeTower.squarefree((3, 5)))
    codes = (
        LinearCode(3, np.array([[1], [2]])),
        LinearCode(5, np.array([[1], [1]])),
    )
    return MultilevelLattice(cmap, codes)


@pytest.fixture(scope="session")
def chainring_lattice():
    """q = 12 = 2^2 * 3 lattice: a Z4 code (e = 2) and an F3 repetition code."""
    cmap = CrtMap.ring_iso(PrimeTower.from_modulus(12))
    codes = (
        LinearCode(4, np.array([[0, 1], [1, 1]])),
        LinearCode(3, np.array([[1], [1]])),
    )
    return MultilevelLattice(cmap, codes)
