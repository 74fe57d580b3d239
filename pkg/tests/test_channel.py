import math

import numpy as np
import pytest

from wpbc.channel import (TagProfile, complex_gaussian,
                          dbm_to_watt, make_pilots, path_loss_from_distance, sample_channels,
                          watt_to_dbm)
from wpbc.errors import ConfigError, DomainError

from conftest import make_config


@pytest.mark.parametrize("d, expected", [(4.0, 4.277e-5), (6.0, 1.901e-5)])
def test_path_loss_values(d, expected):
    assert path_loss_from_distance(d) == pytest.approx(expected, rel=1e-3)


def test_path_loss_unit_distance():
    d = math.sqrt(0.0086 / (4 * math.pi))
    assert path_loss_from_distance(d) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("d", [0.0, -1.0])
def test_path_loss_rejects_nonpositive(d):
    with pytest.raises(DomainError):
        path_loss_from_distance(d)


def test_dbm_conversion():
    assert dbm_to_watt(-30) == pytest.approx(1e-6)
    assert dbm_to_watt(-90) == pytest.approx(1e-12)
    assert watt_to_dbm(dbm_to_watt(17.5)) == pytest.approx(17.5)


def test_tag_profile_validation():
    t = TagProfile(4.0)
    assert t.refl_mag == pytest.approx(0.5)
    assert TagProfile(1.0, path_loss=0.3).path_loss == 0.3
    with pytest.raises(ConfigError):
        TagProfile(4.0, reflection=1.2)
    with pytest.raises(ConfigError):
        TagProfile(4.0, path_loss=-1.0)


@pytest.mark.parametrize("field, value", [("m_tx", 0), ("r_rx", 1), ("block_len", 0),
                                          ("avg_tx_power", 0.0), ("rectifier_eff", 1.5),
                                          ("tags", ())])
def test_config_validation(field, value):
    with pytest.raises(ConfigError):
        make_config(**{field: value})


def test_config_default_threshold_and_with():
    cfg = make_config()
    assert cfg.trunc_threshold == pytest.approx(0.01 * path_loss_from_distance(6.0))
    near = cfg.with_(tags=(TagProfile(2.0),))
    assert near.trunc_threshold == pytest.approx(0.01 * path_loss_from_distance(2.0))
    assert cfg.with_(m_tx=3).m_tx == 3


def test_zero_variance_gives_zeros(rng):
    z = complex_gaussian(rng, (4, 3), 0.0)
    assert np.all(z == 0)


def test_unit_variance_draws(rng):
    z = complex_gaussian(rng, 10**6, 1.0)
    assert np.var(z) == pytest.approx(1.0, rel=0.01)
    assert np.var(z.real) == pytest.approx(0.5, rel=0.01)


def test_sample_channels_shapes_and_variance(rng):
    cfg = make_config(m=4, r=3)
    ch = sample_channels(cfg, rng, 20000)
    assert ch.forward.shape == (20000, 4, 2)
    assert ch.backward.shape == (20000, 2, 3)
    var_f = np.mean(np.abs(ch.forward) ** 2, axis=(0, 1))
    np.testing.assert_allclose(var_f, cfg.path_losses, rtol=0.02)
    single = sample_channels(cfg, rng)
    assert single.forward.shape == (4, 2)


def test_sample_channels_deterministic():
    cfg = make_config()
    a = sample_channels(cfg, np.random.default_rng(7), 5)
    b = sample_channels(cfg, np.random.default_rng(7), 5)
    assert np.array_equal(a.forward, b.forward) and np.array_equal(a.backward, b.backward)


def test_backscatter_outer_product(rng):
    cfg = make_config(m=3, r=2)
    ch = sample_channels(cfg, rng)
    h = ch.backscatter(1)
    np.testing.assert_allclose(h, np.outer(ch.backward[1], ch.forward[:, 1]))


def test_pilots_scalar():
    p = make_pilots(1, 1, 2.0)
    assert abs(p.pilots[0, 0]) ** 2 == pytest.approx(2.0)


def test_pilots_orthogonality():
    p = make_pilots(4, 8, 0.5)
    assert p.pilots.shape == (8, 4)
    np.testing.assert_allclose(p.pilots.conj().T @ p.pilots, 4.0 * np.eye(4), atol=1e-12)
    np.testing.assert_allclose(p.unitary.conj().T @ p.unitary, np.eye(4), atol=1e-12)


def test_pilots_too_short():
    with pytest.raises(DomainError):
        make_pilots(4, 3, 1.0)
