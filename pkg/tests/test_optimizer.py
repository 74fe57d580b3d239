import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wpbc.channel import TagProfile
from wpbc.detection import harvest_lower, rate_lower_bound, sinr_omni_lower_bound, sinr_perfect_csi
from wpbc.energy import ResourceAllocation
from wpbc.optimizer import (GridSpec, alpha_grid, equal_rate_weights, lower_bound_model,
                            maxmin_energy_weights, omni_allocation, omni_model, perfect_csi_model,
                            solve_equal_rate, solve_maxmin_energy, solve_maxmin_rate, solve_omni,
                            solve_perfect_csi)

from conftest import make_config

COARSE = GridSpec(n_alpha=6, n_pce=6)


@settings(max_examples=60, deadline=None)
@given(alpha=st.integers(16, 199), p_ce=st.floats(0.02, 1.5), z=st.floats(0.0, 1.0))
def test_model_matches_rate_and_harvest(alpha, p_ce, z):
    cfg = make_config()
    if alpha * p_ce >= cfg.avg_tx_power * cfg.block_len:
        return
    a = ResourceAllocation.build(cfg, [z, 1 - z], alpha, p_ce)
    m = lower_bound_model(cfg, alpha, p_ce)
    np.testing.assert_allclose(m.rates(a.weights), rate_lower_bound(cfg, a), rtol=1e-12)
    np.testing.assert_allclose(m.energy(a.weights), harvest_lower(cfg, a), rtol=1e-12)


def test_other_models_match(cfg):
    z = np.array([0.2, 0.8])
    np.testing.assert_allclose(perfect_csi_model(cfg).sinr(z), sinr_perfect_csi(cfg, z, 2.0), rtol=1e-12)
    np.testing.assert_allclose(omni_model(cfg, 40, 0.5).sinr(z),
                               sinr_omni_lower_bound(cfg, 40, 0.5, (400 - 20) / 160), rtol=1e-12)


def test_alpha_grid_respects_pilot_length():
    cfg = make_config(m=8)
    g = alpha_grid(cfg, 16)
    assert g.min() >= 16 and g.max() <= 199
    assert np.all(g % 2 == 0)
    assert alpha_grid(cfg.with_(m_tx=150), 16).size == 0


def test_symmetric_tags_uniform():
    cfg = make_config(tags=(TagProfile(5.0), TagProfile(5.0)))
    zeta, rate, feasible, _ = equal_rate_weights(cfg, 40, 0.5)
    assert feasible
    np.testing.assert_allclose(zeta, 0.5, atol=1e-9)
    res = solve_maxmin_rate(cfg, COARSE)
    np.testing.assert_allclose(res.allocation.weights, 0.5, atol=1e-6)
    assert np.ptp(res.per_tag_rates) <= 1e-4 * res.objective


def test_single_tag():
    cfg = make_config(tags=(TagProfile(4.0),))
    res = solve_maxmin_rate(cfg, COARSE)
    np.testing.assert_allclose(res.allocation.weights, [1.0])
    assert res.feasible


def test_nearer_tag_needs_less_weight(cfg):
    sol = equal_rate_weights(cfg, 64, 0.5)
    assert sol.feasible
    assert sol.weights[0] < sol.weights[1]
    rates = lower_bound_model(cfg, 64, 0.5).rates(sol.weights)
    assert np.ptp(rates) <= 1e-4 * rates.max()
    assert sol.min_rate == pytest.approx(rates.min())
    # giving the far tag more weight only lowers the near tag's rate
    m = lower_bound_model(cfg, 64, 0.5)
    zs = np.linspace(0, 1, 50)
    r0 = [m.rates([z, 1 - z])[0] for z in zs]
    assert np.all(np.diff(r0) > 0)


def test_boundary_solution_when_far_tag_cannot_catch_up():
    cfg = make_config(m=2, r=2)
    sol = solve_equal_rate(perfect_csi_model(cfg), cfg.circuit_power)
    np.testing.assert_allclose(sol.weights, [0.0, 1.0], atol=1e-9)


def test_zero_target_gives_energy_floor(cfg):
    from wpbc.optimizer import _least_weights, energy_floor
    m = lower_bound_model(cfg, 20, 0.1)
    floor = energy_floor(m, 1e-3)
    assert floor is not None
    np.testing.assert_allclose(_least_weights(m, 0.0, floor), floor)


def test_feasible_result_invariants(cfg):
    res = solve_maxmin_rate(cfg, COARSE)
    assert res.feasible
    assert np.all(res.per_tag_energy >= cfg.circuit_power - 1e-15)
    assert res.objective == pytest.approx(res.per_tag_rates.min())
    a = res.allocation
    assert abs(a.weights.sum() - 1) < 1e-9 and np.all(a.weights >= 0)
    assert 0 <= a.ce_time <= cfg.block_len and a.ce_time * a.pilot_power < cfg.avg_tx_power * cfg.block_len
    np.testing.assert_allclose(harvest_lower(cfg, a), res.per_tag_energy, rtol=1e-12)
    np.testing.assert_allclose(rate_lower_bound(cfg, a), res.per_tag_rates, rtol=1e-12)


def test_deterministic(cfg):
    a, b = solve_maxmin_rate(cfg, COARSE), solve_maxmin_rate(cfg, COARSE)
    assert a.allocation.ce_time == b.allocation.ce_time
    assert np.array_equal(a.allocation.weights, b.allocation.weights)


def test_continuous_alpha_option(cfg):
    res = solve_maxmin_rate(cfg, GridSpec(n_alpha=5, n_pce=5, continuous_alpha=True))
    assert res.feasible and res.objective > 0


def test_infeasible_reports_least_violation():
    cfg = make_config(w=1e-3, circuit_power=1e-3)
    res = solve_maxmin_rate(cfg, COARSE)
    assert not res.feasible
    assert res.per_tag_energy.min() < cfg.circuit_power


def test_objective_monotone_in_power_and_antennas():
    prev = -np.inf
    for w in (0.5, 1.0, 2.0, 4.0):
        obj = solve_maxmin_rate(make_config(w=w), COARSE).objective
        assert obj >= prev - 1e-9
        prev = obj
    prev = -np.inf
    for m in (2, 4, 8):
        obj = solve_maxmin_rate(make_config(m=m), COARSE).objective
        assert obj >= prev - 1e-9
        prev = obj


def test_maxmin_energy_equalizes(cfg):
    res = solve_maxmin_energy(cfg, COARSE)
    e = res.per_tag_energy
    assert np.ptp(e) <= 1e-4 * e.max()
    assert res.objective == pytest.approx(e.min())
    sym = make_config(tags=(TagProfile(5.0), TagProfile(5.0)))
    np.testing.assert_allclose(solve_maxmin_energy(sym, COARSE).allocation.weights, 0.5, atol=1e-12)


def test_maxmin_energy_single_antenna_uniform():
    cfg = make_config(m=1)
    res = solve_maxmin_energy(cfg, COARSE)
    np.testing.assert_allclose(res.allocation.weights, 0.5)


def test_water_filling_drops_strong_tag():
    m = lower_bound_model(make_config(), 40, 0.5)
    m = type(m)(**{**m.__dict__, "e0": np.array([1.0, 1e-3])})
    z, emin = maxmin_energy_weights(m)
    np.testing.assert_allclose(z, [0.0, 1.0])


def test_omni_allocation():
    reps = [omni_allocation(make_config(m=m), 40, 0.5) for m in (2, 64)]
    np.testing.assert_allclose(reps[0].incident_power, reps[1].incident_power)
    cfg = make_config()
    np.testing.assert_allclose(reps[0].incident_power, reps[0].allocation.data_power * cfg.path_losses)
    weak = omni_allocation(make_config(w=0.05), 40, 0.05)
    assert not weak.active.all()
    assert np.all(weak.rates[~weak.active] == 0)
    res = solve_omni(cfg, COARSE)
    assert res.allocation.pilot_power == cfg.avg_tx_power
    assert res.allocation.data_power == pytest.approx(cfg.avg_tx_power)


def test_perfect_csi_solution(cfg):
    res = solve_perfect_csi(cfg)
    assert res.allocation.ce_time == 0 and res.allocation.data_power == cfg.avg_tx_power
    assert np.ptp(res.per_tag_rates) <= 1e-4 * res.objective
