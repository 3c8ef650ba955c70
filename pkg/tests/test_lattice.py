import math

import numpy as np
import pytest

from crtlattice.algebra import CrtMap, PrimeTower
from crtlattice.codes import LinearCode
from crtlattice.errors import CapExceededError
from crtlattice.lattice import (
    SPHERE_BOUND,
    MultilevelLattice,
    code_dims_for_rate,
    cubic_lattice,
    ensemble_quantization_sweep,
    tower_for_dimension,
    unit_ball_volume,
)


def brute_force_member(lattice, point):
    """Oracle: x is in the lattice iff x minus some representative is in qZ^n."""
    diffs = (np.asarray(point) - lattice.coset_representatives()) % lattice.q
    return bool(np.any(np.all(diffs == 0, axis=1)))


def count_integer_cosets(lattice):
    """Oracle: count cosets of the lattice inside Z^n by exhaustive grid sweep."""
    q, n = lattice.q, lattice.n
    assert n == 2 and q <= 20
    keys = set()
    books = [code.codewords() for code in lattice.codes]
    for a in range(q):
        for b in range(q):
            residues = lattice.cmap.inverse(np.array([a, b]))
            key = []
            for res, book, m in zip(residues, books, lattice.tower.moduli):
                shifted = (res - book) % m
                key.append(tuple(shifted[np.lexsort(shifted.T[::-1])][0]))
            keys.add(tuple(key))
    return len(keys)


def test_example_lattice_construction(example_lattice):
    reps = example_lattice.coset_representatives()
    assert len(reps) == 15
    assert [1, 11] in reps.tolist()
    assert example_lattice.representative_count() == 15


def test_example_lattice_equals_single_level_construction(example_lattice):
    # the same lattice arises from the length-2 code over Z_15 generated by (1, 11)
    oracle = np.sort(np.array([[(k * 1) % 15, (k * 11) % 15] for k in range(15)]), axis=0)
    reps = np.sort(example_lattice.coset_representatives(), axis=0)
    assert np.array_equal(np.unique(oracle, axis=0), np.unique(reps, axis=0))


def test_chainring_lattice_representatives(chainring_lattice):
    reps = chainring_lattice.coset_representatives()
    assert len(reps) == 48  # 16 * 3 codeword tuples, all distinct
    assert len(np.unique(reps, axis=0)) == 48


def test_trivial_code_gives_cubic():
    lat = cubic_lattice(3, modulus=5)
    assert lat.volume_unscaled() == 1
    assert lat.contains([7, -2, 11])


def test_membership_examples(example_lattice):
    assert example_lattice.contains([1, 11])
    assert example_lattice.contains([1 + 15, 11])  # qZ^n shifts stay inside
    assert not example_lattice.contains([1, 0])


def test_membership_matches_bruteforce(example_lattice, chainring_lattice):
    rng = np.random.default_rng(0)
    for lat in (example_lattice, chainring_lattice):
        pts = rng.integers(-30, 30, size=(1000, 2))
        for pt in pts:
            assert lat.contains(pt) == brute_force_member(lat, pt)


def test_q_shift_containment(example_lattice):
    rng = np.random.default_rng(1)
    for _ in range(100):
        zeta = rng.integers(-3, 4, size=2)
        assert example_lattice.contains(15 * zeta)


def test_group_closure(example_lattice):
    rng = np.random.default_rng(2)
    reps = example_lattice.coset_representatives()
    for _ in range(200):
        a = reps[rng.integers(len(reps))] + 15 * rng.integers(-2, 3, size=2)
        b = reps[rng.integers(len(reps))] + 15 * rng.integers(-2, 3, size=2)
        assert example_lattice.contains(a + b)
        assert example_lattice.contains(-a)


def test_volume(example_lattice, chainring_lattice):
    assert example_lattice.volume_unscaled() == 15  # 15^2 / 15
    # full-rank shape formula: prod p^(n - m)
    assert example_lattice.volume_unscaled() == 3 ** (2 - 1) * 5 ** (2 - 1)
    assert chainring_lattice.volume_unscaled() == 12**2 // 48
    assert cubic_lattice(2).volume_unscaled() == 1
    scaled = example_lattice.rescaled(0.5)
    assert scaled.volume() == pytest.approx(15 * 0.25)


def test_volume_by_exhaustive_coset_count():
    cases = [
        (CrtMap.ring_iso(PrimeTower.squarefree((3, 5))),
         (LinearCode(3, np.array([[1], [2]])), LinearCode(5, np.array([[1], [1]])))),
        (CrtMap.ring_iso(PrimeTower.squarefree((2, 3))),
         (LinearCode(2, np.array([[1], [1]])), LinearCode(3, np.array([[1], [2]])))),
        (CrtMap.ring_iso(PrimeTower.from_modulus(12)),
         (LinearCode(4, np.array([[0, 1], [1, 1]])), LinearCode(3, np.array([[1], [1]])))),
        (CrtMap.ring_iso(PrimeTower.squarefree((2, 7))),
         (LinearCode(2, np.zeros((2, 0), dtype=np.int64)), LinearCode(7, np.array([[1], [3]])))),
        (CrtMap.ring_iso(PrimeTower.squarefree((5,))),
         (LinearCode(5, np.array([[1], [2]])),)),
    ]
    for cmap, codes in cases:
        lat = MultilevelLattice(cmap, codes)
        assert count_integer_cosets(lat) == lat.volume_unscaled()


def test_nearest_point_examples(example_lattice):
    assert example_lattice.nearest_point([1.0, 11.0]).tolist() == [1, 11]
    assert example_lattice.nearest_point([1.2, 10.9]).tolist() == [1, 11]


def test_nearest_point_tie_breaks_lexicographically(example_lattice):
    # midpoint between 0 and the shortest nonzero vector (1, -4)
    mid = np.array([0.5, -2.0])
    assert example_lattice.nearest_point(mid).tolist() == [0, 0]
    # scalar lattice: exact midpoints prefer the smaller endpoint
    z = cubic_lattice(1)
    assert z.nearest_point([0.5]).tolist() == [0]
    assert z.nearest_point([-0.5]).tolist() == [-1]


def test_nearest_point_self_consistency(example_lattice):
    rng = np.random.default_rng(3)
    reps = example_lattice.coset_representatives()
    shifts = np.array([[a, b] for a in (-15, 0, 15) for b in (-15, 0, 15)])
    candidates = (reps[None, :, :] + shifts[:, None, :]).reshape(-1, 2)
    for _ in range(100):
        x = rng.uniform(-10, 25, size=2)
        best = example_lattice.nearest_point(x)
        d_best = ((x - best) ** 2).sum()
        d_all = ((x - candidates) ** 2).sum(axis=1).min()
        assert d_best <= d_all + 1e-12


def test_mod_properties(example_lattice):
    rng = np.random.default_rng(4)
    assert np.allclose(example_lattice.mod([15.0, 30.0]), 0.0)
    for _ in range(50):
        x = rng.uniform(-20, 20, size=2)
        folded = example_lattice.mod(x)
        assert np.allclose(example_lattice.mod(folded), folded, atol=1e-9)
        assert np.allclose(example_lattice.nearest_point(folded), 0)


def test_mod_hypercube_closed_form():
    cmap = CrtMap.ring_iso(PrimeTower.squarefree((3, 5)))
    hyper = MultilevelLattice(cmap, (LinearCode.zero(2, 3), LinearCode.zero(2, 5)))
    rng = np.random.default_rng(5)
    for _ in range(50):
        x = rng.uniform(-40, 40, size=2)
        expected = x - 15 * np.ceil(x / 15 - 0.5)
        assert np.allclose(hyper.mod(x), expected)


def test_mse_distortion(example_lattice):
    assert example_lattice.mse_distortion([15.0, 15.0]) == pytest.approx(0.0)
    z = cubic_lattice(1)
    assert z.mse_distortion([0.5]) == pytest.approx(0.25)
    rng = np.random.default_rng(6)
    for _ in range(20):
        x = rng.uniform(-5, 20, size=2)
        err = x - example_lattice.nearest_point(x)
        assert example_lattice.mse_distortion(x) * 2 == pytest.approx((err**2).sum())


def test_second_moment_cubic():
    for n in (1, 2):
        res = cubic_lattice(n).second_moment(20_000, seed=n)
        assert abs(res.nsm - 1 / 12) <= 3 * res.nsm_se
        assert res.second_moment == pytest.approx(res.nsm)  # unit volume


def test_second_moment_scale_invariance(example_lattice):
    base = example_lattice.second_moment(6_000, seed=7)
    half = example_lattice.rescaled(0.5).second_moment(6_000, seed=8)
    double = example_lattice.rescaled(2.0).second_moment(6_000, seed=9)
    for other in (half, double):
        assert abs(base.nsm - other.nsm) <= 3 * math.hypot(base.nsm_se, other.nsm_se)
    # the reported (scaled) second moment tracks scale^2 exactly for a fixed seed
    unit = example_lattice.second_moment(6_000, seed=8)
    assert half.second_moment == pytest.approx(0.25 * unit.second_moment, rel=1e-12)


def test_second_moment_threads_deterministic(example_lattice):
    a = example_lattice.second_moment(4_000, seed=11, threads=1)
    b = example_lattice.second_moment(4_000, seed=11, threads=4)
    assert a == b


def test_caps_enforced():
    # dimension cap
    big = MultilevelLattice(
        CrtMap.ring_iso(PrimeTower.squarefree((3,))),
        (LinearCode(3, np.zeros((9, 0), dtype=np.int64)),),
    )
    with pytest.raises(CapExceededError):
        big.nearest_point(np.zeros(9))
    # representative-count cap (full codes are exempt: they fold to Z^n)
    dense = MultilevelLattice(
        CrtMap.ring_iso(PrimeTower.squarefree((7,))),
        (LinearCode(7, np.eye(7, 6, dtype=np.int64)),),
    )
    with pytest.raises(CapExceededError):
        dense.second_moment(10)


def test_serialization_roundtrip(example_lattice, chainring_lattice):
    for lat in (example_lattice, chainring_lattice):
        back = MultilevelLattice.from_dict(lat.to_dict())
        assert back.to_dict() == lat.to_dict()
        assert np.array_equal(back.coset_representatives(), lat.coset_representatives())


def test_construction_validation():
    cmap = CrtMap.ring_iso(PrimeTower.squarefree((3, 5)))
    with pytest.raises(ValueError):
        MultilevelLattice(cmap, (LinearCode(3, np.array([[1], [2]])),))
    with pytest.raises(ValueError):
        MultilevelLattice(
            cmap,
            (LinearCode(5, np.array([[1], [1]])), LinearCode(3, np.array([[1], [2]]))),
        )
    with pytest.raises(ValueError):
        MultilevelLattice(
            cmap,
            (LinearCode(3, np.array([[1], [2]])), LinearCode(5, np.array([[1], [1], [1]]))),
        )


def test_rate_rule_helpers():
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)
    tower = tower_for_dimension(8, xi=0.75, num_levels=2)
    assert tower.q == 15
    dims = code_dims_for_rate(8, tower, delta=0.1)
    assert dims == (4, 3)


def test_ensemble_sweep_trend():
    rows = ensemble_quantization_sweep(
        [2, 4, 6, 8], trials=1_500, seed=2, ensemble=4, include_baseline=True
    )
    assert rows[0].kind == "cubic-baseline"
    assert abs(rows[0].nsm_mean - 1 / 12) <= 3 * rows[0].nsm_se
    assert all(r.sphere_bound == pytest.approx(SPHERE_BOUND) for r in rows)
    ens = [r for r in rows if r.kind == "ensemble"]
    assert [r.n for r in ens] == [2, 4, 6, 8]
    for prev, cur in zip(ens, ens[1:]):
        slack = 2 * math.hypot(prev.nsm_se, cur.nsm_se)
        assert cur.nsm_mean <= prev.nsm_mean + slack
