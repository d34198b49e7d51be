import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qns.noise import (
    EffectiveRates,
    PhysicalNoise,
    channel_only_rates,
    full_rates,
    history_draws,
    history_from_uniforms,
    round_draws,
    sample_error_history,
    sample_round_errors,
)
from qns.topology import build_network, build_torus_block, dual_sector

TORUS_Z, TORUS_X = dual_sector(build_torus_block(4))


def test_channel_only():
    assert channel_only_rates(0) == EffectiveRates(0, 0, 0)
    r = channel_only_rates(0.01)
    assert (r.eps_S, r.eps_E, r.eps_C) == pytest.approx((0.02, 0.01, 0))
    r = channel_only_rates(0.0223)
    assert (r.eps_S, r.eps_E) == pytest.approx((0.0446, 0.0223))
    assert PhysicalNoise(q=0.0223).channel_error_rate == pytest.approx(0.016725)
    for bad in (-0.1, 0.6):
        with pytest.raises(ValueError):
            channel_only_rates(bad)


def test_full_rates_examples():
    r = full_rates(PhysicalNoise(0.01, 0.001, 0))
    assert r.eps_S == pytest.approx(0.0282667, abs=1e-7)
    assert r.eps_E == pytest.approx(0.0150667, abs=1e-7)
    assert r.eps_C == pytest.approx(0.0005333, abs=1e-7)
    r = full_rates(PhysicalNoise(0, 0, 0.01))
    assert (r.eps_S, r.eps_E, r.eps_C) == pytest.approx((0, 0.0066667, 0), abs=1e-7)
    with pytest.raises(ValueError):
        full_rates(PhysicalNoise(0.5, 0.1, 0))


@given(st.floats(0, 0.5))
def test_full_rates_reduces_to_channel(q):
    assert full_rates(PhysicalNoise(q)) == channel_only_rates(q)


@given(st.floats(0, 0.2), st.floats(0, 0.05), st.floats(0, 0.5), st.floats(0, 0.01))
def test_full_rates_monotone(q, p, pm, dq):
    a = full_rates(PhysicalNoise(q, p, pm))
    for b in (full_rates(PhysicalNoise(q + dq, p, pm)), full_rates(PhysicalNoise(q, p + dq, pm)),
              full_rates(PhysicalNoise(q, p, pm + dq))):
        assert b.eps_S >= a.eps_S and b.eps_E >= a.eps_E and b.eps_C >= a.eps_C


def test_rates_validation():
    with pytest.raises(ValueError):
        EffectiveRates(0.01, 0.01, 0.006)
    with pytest.raises(ValueError):
        EffectiveRates(1.2, 0.0)
    with pytest.raises(ValueError):
        PhysicalNoise(q=1.5)
    r = EffectiveRates(0.02, 0.01, 0.001)
    assert EffectiveRates.from_dict(r.to_dict()) == r
    assert PhysicalNoise.from_dict({"q": 0.1}).q == 0.1


def test_zero_rates_give_no_errors():
    rng = np.random.default_rng(0)
    data, meas = sample_round_errors(EffectiveRates(0, 0), TORUS_Z, rng)
    assert not data.any() and not meas.any()


def test_draw_count_is_fixed():
    a = np.random.default_rng(3)
    b = np.random.default_rng(3)
    sample_round_errors(EffectiveRates(0.1, 0.1, 0.02), TORUS_Z, a)
    b.random(round_draws(TORUS_Z))
    assert a.random() == b.random()


def test_vectorised_history_matches_sequential():
    rates = EffectiveRates(0.2, 0.15, 0.05)
    sector, n = TORUS_Z, 3
    h = sample_error_history(rates, sector, n, np.random.default_rng(9))
    u = np.random.default_rng(9).random(history_draws(sector, n))
    data, meas = history_from_uniforms(u, rates, sector, n)
    np.testing.assert_array_equal(h.data, data)
    np.testing.assert_array_equal(h.meas, meas)


def _many_rounds(rates, sector, n):
    u = np.random.default_rng(1).random((n, round_draws(sector)))
    data, meas = history_from_uniforms(
        np.concatenate([u, np.zeros((n, sector.n_qubits)) + 1], axis=1), rates, sector, 1)
    return data[:, 0], meas[:, 0]


def test_marginals_without_correlations():
    rates = EffectiveRates(0.03, 0.02)
    n = 1_000_000 // TORUS_Z.n_qubits
    data, meas = _many_rounds(rates, TORUS_Z, n)
    for arr, p in ((data, rates.eps_E), (meas, rates.eps_S)):
        m = arr.size
        assert abs(arr.mean() - p) < 3 * np.sqrt(p * (1 - p) / m)


def test_correlated_pairs():
    rates = EffectiveRates(0.04, 0.04, 0.01)
    sector = TORUS_Z
    n = 1_000_000 // sector.n_stabilizers
    data, meas = _many_rounds(rates, sector, n)
    # every torus qubit sits in two pairs and every ancilla in two, so the
    # marginal is the XOR of one independent and two pair mechanisms
    odd = (1 - (1 - 2 * 0.02) * (1 - 2 * 0.01) ** 2) / 2
    assert odd == pytest.approx(0.04, abs=2e-3)  # equal to first order
    for arr in (meas, data):
        assert abs(arr.mean() - odd) < 3 * np.sqrt(odd * (1 - odd) / arr.size)
    # a shared pair (eps_C) plus, on each side, one independent and one other pair
    o = (1 - (1 - 2 * 0.02) * (1 - 2 * 0.01)) / 2
    both = 0.01 * (1 - o) ** 2 + 0.99 * o ** 2
    sigma = np.sqrt(both / meas.size)
    right, down = data[:, sector.right], data[:, sector.down]
    assert abs((meas & right).mean() - both) < 4 * sigma
    assert abs((meas & down).mean() - both) < 4 * sigma
    assert abs((right & down).mean() - both) < 4 * sigma
    # a qubit that is not right/down of this ancilla is uncorrelated with it
    left_idx = [sector.qubit_index()[build_torus_block(4).neighbors(s.site)["left"]]
                for s in sector.stabilizers]
    lj = (meas & data[:, left_idx]).mean()
    assert lj == pytest.approx(meas.mean() * data.mean(), abs=2e-4)


def test_rectangle_sampler_respects_missing_neighbours():
    zs, _ = dual_sector(build_network(3, 1))
    rng = np.random.default_rng(0)
    h = sample_error_history(EffectiveRates(0.3, 0.3, 0.1), zs, 4, rng)
    assert h.data.shape == (5, zs.n_qubits) and h.meas.shape == (4, zs.n_stabilizers)
    with pytest.raises(ValueError):
        sample_error_history(EffectiveRates(0.1, 0.1), zs, 0, rng)
