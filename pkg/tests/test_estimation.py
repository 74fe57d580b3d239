import numpy as np
import pytest

from wpbc.channel import ChannelRealization, make_pilots, sample_channels
from wpbc.errors import DomainError
from wpbc.estimation import (ce_error_variance, directional_bwd_estimate, directional_fwd_estimate,
                             ls_estimate, pilot_length, simulate_ce_rx)

from conftest import make_config

DELTA = 0.3 + 0.4j


def test_pilot_length():
    assert pilot_length(20, 2, 8) == 10
    assert pilot_length(21, 2, 8) == 10
    with pytest.raises(DomainError):
        pilot_length(10, 2, 8)


def test_noiseless_rx_and_roundtrip(rng):
    cfg = make_config(m=4, r=3)
    ch = sample_channels(cfg, rng)
    pilots = make_pilots(4, 6, 0.7)
    rx = simulate_ce_rx(ch, 1, pilots, 0.0, rng, DELTA)
    np.testing.assert_allclose(rx, np.sqrt(DELTA) * ch.backscatter(1) @ pilots.pilots.T)
    est = ls_estimate(rx, pilots, DELTA, tag_index=1)
    np.testing.assert_allclose(est.bs_estimate, ch.backscatter(1), atol=1e-10 * np.abs(ch.backscatter(1)).max())
    assert est.shape == (3, 4) and est.ce_rows_used == 6
    row = directional_fwd_estimate(est, 2)
    np.testing.assert_allclose(row, ch.backward[1, 2] * ch.forward[:, 1], rtol=1e-9)
    col = directional_bwd_estimate(est, 3)
    np.testing.assert_allclose(col, ch.forward[3, 1] * ch.backward[1], rtol=1e-9)


def test_scalar_case_by_hand(rng):
    hf, hb = np.array([[0.2 - 0.1j]]), np.array([[1.5 + 0.5j]])
    ch = ChannelRealization(forward=hf, backward=hb)
    pilots = make_pilots(1, 1, 2.0)
    rx = simulate_ce_rx(ch, 0, pilots, 0.0, rng, DELTA)
    expected = np.sqrt(DELTA) * hb[0, 0] * hf[0, 0] * np.sqrt(2.0)
    assert rx.shape == (1, 1)
    assert rx[0, 0] == pytest.approx(expected)


def test_identity_estimate():
    pilots = make_pilots(1, 1, 1.0)
    rx = np.array([[0.3 - 2.0j]])
    est = ls_estimate(rx, pilots, 1.0)
    assert est.bs_estimate[0, 0] == pytest.approx(rx[0, 0])


def test_pure_noise_rx_variance(rng):
    zero = ChannelRealization(np.zeros((100_000, 2, 2), complex), np.zeros((100_000, 2, 1), complex))
    pilots = make_pilots(2, 4, 0.5)
    rx = simulate_ce_rx(zero, 0, pilots, 1e-2, rng, DELTA)
    assert np.var(rx) == pytest.approx(1e-2, rel=0.01)
    est = ls_estimate(rx, pilots, DELTA)
    expected = 1e-2 / (4 * 0.5 * abs(DELTA))
    assert np.mean(np.abs(est.bs_estimate) ** 2) == pytest.approx(expected, rel=0.01)
    # the same value comes out of the directional variance with |h|^2 = 1 and K = 1
    assert ce_error_variance(1.0, 1, 1e-2, 4, 0.5, DELTA) == pytest.approx(expected)


def test_error_variance_values():
    assert ce_error_variance(1e-5, 2, 1e-12, 20, 0.5, DELTA) == pytest.approx(4e-8)
    assert ce_error_variance(1e-5, 2, 1e-12, 40, 0.5, DELTA) == pytest.approx(2e-8)
    assert ce_error_variance(1e12, 2, 1e-12, 20, 0.5, DELTA) < 1e-20
    assert ce_error_variance(0.0, 2, 1e-12, 20, 0.5, DELTA) == np.inf
    v = ce_error_variance(np.array([1.0, 2.0]), 2, 1e-12, 20, 0.5, DELTA)
    assert v[0] > v[1]
    with pytest.raises(DomainError):
        ce_error_variance(1.0, 2, 1e-12, 0, 0.5, DELTA)


def test_estimate_linearity(rng):
    pilots = make_pilots(3, 5, 1.3)
    a = rng.standard_normal((2, 5)) + 1j * rng.standard_normal((2, 5))
    b = rng.standard_normal((2, 5)) + 1j * rng.standard_normal((2, 5))
    lhs = ls_estimate(2 * a - 1j * b, pilots, DELTA).bs_estimate
    rhs = 2 * ls_estimate(a, pilots, DELTA).bs_estimate - 1j * ls_estimate(b, pilots, DELTA).bs_estimate
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_index_errors(rng):
    cfg = make_config(m=2, r=2)
    ch = sample_channels(cfg, rng)
    pilots = make_pilots(2, 2, 1.0)
    with pytest.raises(IndexError):
        simulate_ce_rx(ch, 5, pilots, 1e-12, rng, DELTA)
    est = ls_estimate(simulate_ce_rx(ch, 0, pilots, 1e-12, rng, DELTA), pilots, DELTA)
    with pytest.raises(IndexError):
        directional_fwd_estimate(est, 2)
    with pytest.raises(ValueError):
        ls_estimate(np.zeros((2, 3)), pilots, DELTA)
