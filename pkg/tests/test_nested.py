import math

import numpy as np
import pytest

from crtlattice.algebra import CrtMap, PrimeTower
from crtlattice.codes import LinearCode, NestedCodePair
from crtlattice.nested import ChannelState, NestedLatticeCode
from crtlattice.sim import nested_error_sim


@pytest.fixture(scope="module")
def rate_half_log15_code():
    """n = 2, primes (3, 5), hypercube coarse (m_c = 0), fine = the 15-point code."""
    cmap = CrtMap.ring_iso(PrimeTower.squarefree((3, 5)))
    pairs = (
        NestedCodePair(LinearCode.zero(2, 3), LinearCode(3, np.array([[1], [2]]))),
        NestedCodePair(LinearCode.zero(2, 5), LinearCode(5, np.array([[1], [1]]))),
    )
    return NestedLatticeCode(cmap, pairs, power=1.0)


@pytest.fixture(scope="module")
def coded_coarse_code():
    """Same rate with a coded coarse lattice: m_c = (1, 1), m_f = (2, 2)."""
    cmap = CrtMap.ring_iso(PrimeTower.squarefree((3, 5)))
    g3 = np.array([[1, 0], [2, 1]])
    g5 = np.array([[1, 0], [1, 1]])
    pairs = (
        NestedCodePair(LinearCode(3, g3[:, :1]), LinearCode(3, g3)),
        NestedCodePair(LinearCode(5, g5[:, :1]), LinearCode(5, g5)),
    )
    return NestedLatticeCode(cmap, pairs, power=1.0)


def test_channel_state():
    state = ChannelState(1.0, 1.0)
    assert state.alpha == pytest.approx(0.5)
    assert state.effective_noise_var == pytest.approx(0.5)
    state = ChannelState(4.0, 1.0)
    assert state.alpha == pytest.approx(0.8)
    assert state.effective_noise_var == pytest.approx(0.8)
    assert 0 < state.alpha <= 1


def test_design_rate(rate_half_log15_code, coded_coarse_code):
    assert rate_half_log15_code.design_rate() == pytest.approx(0.5 * math.log2(15))
    assert coded_coarse_code.design_rate() == pytest.approx(0.5 * math.log2(15))
    cmap = CrtMap.ring_iso(PrimeTower.squarefree((3, 5)))
    degenerate = NestedLatticeCode(
        cmap,
        tuple(
            NestedCodePair(LinearCode(m, g), LinearCode(m, g))
            for m, g in ((3, np.array([[1], [2]])), (5, np.array([[1], [1]])))
        ),
        power=1.0,
    )
    assert degenerate.design_rate() == 0.0
    assert degenerate.message_count == 1


def test_actual_rate_matches_design_for_full_rank(rate_half_log15_code, coded_coarse_code):
    for code in (rate_half_log15_code, coded_coarse_code):
        assert code.actual_rate() == pytest.approx(code.design_rate())
        assert code.quotient_size() == round(2 ** (code.n * code.design_rate()))


def test_scaled_lattices(rate_half_log15_code):
    code = rate_half_log15_code
    assert code.gamma == pytest.approx(2 * math.sqrt(2))
    assert code.fine_lattice.scale == pytest.approx(code.gamma / 15)
    assert code.coarse_lattice.volume() == pytest.approx(code.gamma**2)


def test_coarse_contained_in_fine(rate_half_log15_code, coded_coarse_code):
    rng = np.random.default_rng(0)
    for code in (rate_half_log15_code, coded_coarse_code):
        coarse_reps = code.coarse_lattice.coset_representatives()
        for _ in range(60):
            pick = coarse_reps[rng.integers(len(coarse_reps))]
            point = pick + code.q * rng.integers(-2, 3, size=code.n)
            assert code.fine_lattice.contains(point)


def test_encode_zero_message(rate_half_log15_code):
    zero = tuple(np.zeros(d, dtype=np.int64) for d in rate_half_log15_code.message_dims)
    assert np.allclose(rate_half_log15_code.encode(zero), 0.0)


def test_message_point_injective(rate_half_log15_code):
    code = rate_half_log15_code
    points = {tuple(code._point_table[i]) for i in range(code.message_count)}
    assert len(points) == code.message_count == 15


def test_message_index_roundtrip(coded_coarse_code):
    code = coded_coarse_code
    for idx in range(code.message_count):
        assert code.message_index(code.message_tuple(idx)) == idx


def test_dither_properties(rate_half_log15_code):
    code = rate_half_log15_code
    samples = np.array([code.sample_dither(seed) for seed in range(400)])
    # dithers fold to zero under the coarse quantizer
    for u in samples[:50]:
        assert np.allclose(code.coarse_lattice.nearest_point(u), 0)
    # symmetric cell: mean near zero against its spread
    spread = samples.std() / math.sqrt(samples.size)
    assert np.abs(samples.mean(axis=0)).max() < 5 * spread * math.sqrt(code.n)
    # per-dimension energy tracks the coarse second moment
    sm = code.coarse_lattice.second_moment(20_000, seed=9)
    measured = (samples**2).sum(axis=1).mean() / code.n
    se = (samples**2).sum(axis=1).std() / code.n / math.sqrt(len(samples))
    assert abs(measured - sm.second_moment) <= 3 * math.hypot(se, sm.second_moment_se)


def test_transmit_power_within_budget(rate_half_log15_code):
    code = rate_half_log15_code
    rng = np.random.default_rng(1)
    vals = []
    for trial in range(500):
        idx = rng.integers(code.message_count)
        u = code.sample_dither(1000 + trial)
        x = code.encode(code.message_tuple(idx), u)
        vals.append((x**2).sum() / code.n)
    mean = float(np.mean(vals))
    se = float(np.std(vals) / math.sqrt(len(vals)))
    sm = code.coarse_lattice.second_moment(20_000, seed=10)
    assert abs(mean - sm.second_moment) <= 3 * math.hypot(se, sm.second_moment_se)
    assert mean <= code.power * (1 + 0.05) + 3 * se  # hypercube coarse at n=2: ~2P/3


def test_mmse_receive_limits(rate_half_log15_code):
    code = rate_half_log15_code
    msg = code.message_tuple(7)
    t = code.point(msg)
    u = code.sample_dither(5)
    x = code.encode(msg, u)
    obs = code.mmse_receive(x, 0.0, u)  # noiseless: alpha = 1, dither cancels
    assert np.allclose(obs, t, atol=1e-9)


def test_effective_noise_bound(rate_half_log15_code):
    rng = np.random.default_rng(2)
    for power, noise_var in ((1.0, 1.0), (4.0, 1.0)):
        code = NestedLatticeCode(rate_half_log15_code.cmap, rate_half_log15_code.pairs, power)
        state = ChannelState(power, noise_var)
        vals = []
        for trial in range(800):
            idx = rng.integers(code.message_count)
            u = code.sample_dither(2000 + trial)
            x = code.encode(code.message_tuple(idx), u)
            z = rng.normal(0, math.sqrt(noise_var), size=code.n)
            z_eq = code.coarse_lattice.mod(state.alpha * z - (1 - state.alpha) * x)
            vals.append((z_eq**2).sum() / code.n)
        mean = float(np.mean(vals))
        se = float(np.std(vals) / math.sqrt(len(vals)))
        assert mean <= state.effective_noise_var + 3 * se


def test_noiseless_roundtrip_all_messages(rate_half_log15_code, coded_coarse_code):
    for code in (rate_half_log15_code, coded_coarse_code):
        for idx in range(code.message_count):
            msg = code.message_tuple(idx)
            u = code.sample_dither(idx)
            x = code.encode(msg, u)
            obs = code.mmse_receive(x, 0.0, u)
            decoded = code.decode(obs, 0.0)
            assert all(np.array_equal(a, b) for a, b in zip(msg, decoded))


def test_decode_invariant_to_dither(rate_half_log15_code):
    code = rate_half_log15_code
    msg = code.message_tuple(11)
    for seed in range(8):
        u = code.sample_dither(seed)
        obs = code.mmse_receive(code.encode(msg, u), 0.0, u)
        assert all(np.array_equal(a, b) for a, b in zip(msg, code.decode(obs, 0.0)))


def test_word_error_at_20db(rate_half_log15_code):
    _, summaries = nested_error_sim(rate_half_log15_code, [20.0], trials=3000, seed=7)
    assert summaries[0].wer < 1e-2


def test_capacity_trend(rate_half_log15_code):
    # rate ~1.95 b/dim: far above capacity at -2 dB, below it at 20 dB
    _, low = nested_error_sim(rate_half_log15_code, [-2.0], trials=600, seed=3)
    _, high = nested_error_sim(rate_half_log15_code, [20.0], trials=600, seed=3)
    assert low[0].wer > 0.5
    assert high[0].wer < 0.05
    snr_low = 10 ** (-2 / 10)
    assert 0.5 * math.log2(1 + snr_low) < rate_half_log15_code.design_rate()
    snr_high = 10 ** (20 / 10)
    assert 0.5 * math.log2(1 + snr_high) > rate_half_log15_code.design_rate() + 1


def test_config_roundtrip():
    cfg = {"tower": [[3, 1], [5, 1]], "n": 2, "m_c": [0, 0], "m_f": [1, 1], "power": 2.0, "seed": 11}
    a = NestedLatticeCode.from_config(cfg)
    b = NestedLatticeCode.from_config(cfg)
    for pa, pb in zip(a.pairs, b.pairs):
        assert np.array_equal(pa.fine.generator, pb.fine.generator)
    assert a.to_config(seed=11) == cfg
    with pytest.raises(ValueError):
        NestedLatticeCode.from_config({**cfg, "m_c": [0]})
    # `P` is accepted as an alias for `power`
    alias = {k: v for k, v in cfg.items() if k != "power"}
    alias["P"] = 2.0
    c = NestedLatticeCode.from_config(alias)
    assert c.power == a.power
    with pytest.raises(ValueError):
        NestedLatticeCode.from_config({k: v for k, v in cfg.items() if k != "power"})
