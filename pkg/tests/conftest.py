import numpy as np
import pytest

from wpbc.channel import SystemConfig, TagProfile


def make_config(m=8, r=8, w=2.0, tags=None, **kw):
    tags = tags if tags is not None else (TagProfile(4.0), TagProfile(6.0))
    base = dict(m_tx=m, r_rx=r, block_len=200, avg_tx_power=w, ce_noise_power=1e-12,
                rx_noise_power=1e-9, rectifier_eff=0.65, circuit_power=8.9e-6, tags=tuple(tags))
    base.update(kw)
    return SystemConfig(**base)


@pytest.fixture
def cfg():
    return make_config()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
