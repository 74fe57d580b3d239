"""
Energy beamforming from estimated backscatter CSI and the resulting
incident / harvested power at each tag.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import SystemConfig, TagProfile
from .errors import DegenerateEstimateError, InfeasibleAllocationError
from .estimation import ChannelEstimate
from .specfun import BoundPair, ce_inverse_quality, phi_of_c

_SIMPLEX_TOL = 1e-9


def derive_data_power(avg_tx_power: float, block_len: int, ce_time: float,
                      pilot_power: float) -> float:
    """Data-slot power p = (wT - alpha p_ce) / (T - alpha) keeping the block average at w."""
    if ce_time < 0 or ce_time >= block_len:
        raise InfeasibleAllocationError(f"CE time {ce_time} must lie in [0, T={block_len})")
    budget = avg_tx_power * block_len - ce_time * pilot_power
    if budget <= 0:
        raise InfeasibleAllocationError("pilot energy exhausts the block power budget")
    return budget / (block_len - ce_time)


@dataclass(frozen=True)
class ResourceAllocation:
    weights: np.ndarray
    ce_time: float
    pilot_power: float
    data_power: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if np.any(w < -_SIMPLEX_TOL) or abs(w.sum() - 1.0) > _SIMPLEX_TOL:
            raise InfeasibleAllocationError(f"weights {w} are not on the simplex")
        if self.ce_time < 0 or self.pilot_power < 0:
            raise InfeasibleAllocationError("ce_time and pilot_power must be non-negative")
        if not self.data_power > 0:
            raise InfeasibleAllocationError("data_power must be positive")

    @classmethod
    def build(cls, config: SystemConfig, weights: Sequence[float], ce_time: float,
              pilot_power: float) -> "ResourceAllocation":
        p = derive_data_power(config.avg_tx_power, config.block_len, ce_time, pilot_power)
        return cls(weights=np.asarray(weights, dtype=float), ce_time=ce_time,
                   pilot_power=pilot_power, data_power=p)


@dataclass(frozen=True)
class Beamformer:
    steering: np.ndarray

    @property
    def norm_sq(self):
        return np.sum(np.abs(self.steering) ** 2, axis=-1)


def build_beamformer(estimates: Sequence[ChannelEstimate], weights, rx_row: int = 0) -> Beamformer:
    """
    Phi = sum_k sqrt(zeta_k) conj(hhat_kr) / ||hhat_kr||.

    No global renormalization is applied, so ||Phi|| may exceed one when
    estimate rows of different tags are correlated.
    """
    weights = np.asarray(weights, dtype=float)
    if len(estimates) != weights.shape[-1]:
        raise ValueError("one estimate per weight is required")
    steering = 0
    for k, est in enumerate(estimates):
        row = est.bs_estimate[..., rx_row, :]
        norm = np.linalg.norm(row, axis=-1, keepdims=True)
        if np.any(norm == 0):
            raise DegenerateEstimateError(f"estimate row {rx_row} of tag {k} has zero norm")
        steering = steering + np.sqrt(weights[..., k, None]) * row.conj() / norm
    return Beamformer(steering=np.asarray(steering))


def incident_power_instant(bf: Beamformer, fwd: np.ndarray, data_power: float):
    """Per-realization incident power p |Phi^T h_k^f|^2."""
    return data_power * np.abs(np.sum(bf.steering * fwd, axis=-1)) ** 2


def _estimation_c(config: SystemConfig, ce_time, pilot_power):
    return ce_inverse_quality(config.path_losses, ce_time, pilot_power, config.refl_mags,
                              config.k_tags, config.ce_noise_power)


def array_gain_analytic(config: SystemConfig, ce_time, pilot_power) -> np.ndarray:
    """(M - 1)(1 - phi_k) per tag: the expected beamforming gain over the floor."""
    phi = np.atleast_1d(phi_of_c(_estimation_c(config, ce_time, pilot_power)))
    return (config.m_tx - 1) * (1.0 - phi)


def bound_factors(config: SystemConfig, ce_time, pilot_power):
    """
    Envelopes (L1, L2) on 1 - phi for every tag.

    With q = beta^2 alpha p_ce |delta| / (K sigma^2):
    L1 = 1 - ln(1+q)/q and L2 = 1 - ln(1+2q)/(2q), and L1 < 1 - phi < L2.
    """
    c = np.atleast_1d(_estimation_c(config, ce_time, pilot_power))
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(np.isinf(c), 0.0, 1.0 / c)
        l1 = np.where(q > 0, 1.0 - np.log1p(q) / np.where(q > 0, q, 1.0), 0.0)
        l2 = np.where(q > 0, 1.0 - np.log1p(2 * q) / np.where(q > 0, 2 * q, 1.0), 0.0)
    return l1, l2


def incident_power_from_gain(config: SystemConfig, weights, data_power, gain):
    """p beta_k [zeta_k g_k + 1]; ``weights`` may carry leading batch dims."""
    return data_power * config.path_losses * (np.asarray(weights) * gain + 1.0)


def incident_power_analytic(config: SystemConfig, alloc: ResourceAllocation, tag: int | None = None):
    """
    Expected incident power p beta_k [zeta_k (M-1)(1 - phi_k) + 1].

    The expectation runs over channels and CE noise; returns all tags when
    ``tag`` is None.
    """
    gain = array_gain_analytic(config, alloc.ce_time, alloc.pilot_power)
    out = incident_power_from_gain(config, alloc.weights, alloc.data_power, gain)
    return out if tag is None else float(out[tag])


def incident_power_bounds(config: SystemConfig, alloc: ResourceAllocation, tag: int) -> BoundPair:
    """Lower/upper envelopes on the expected incident power of one tag."""
    l1, l2 = bound_factors(config, alloc.ce_time, alloc.pilot_power)
    m1 = config.m_tx - 1
    lo = incident_power_from_gain(config, alloc.weights, alloc.data_power, m1 * l1)
    hi = incident_power_from_gain(config, alloc.weights, alloc.data_power, m1 * l2)
    return BoundPair(float(lo[tag]), float(hi[tag]))


def incident_power_perfect_csi(config: SystemConfig, weights, data_power):
    """Expected incident power p beta_k [zeta_k (M-1) + 1] with matched forward CSI."""
    return incident_power_from_gain(config, weights, data_power, float(config.m_tx - 1))


def incident_power_omni(config: SystemConfig, data_power):
    """Omnidirectional carrier Phi = 1/sqrt(M): expected incident power p beta_k for any M."""
    return data_power * config.path_losses


def harvest_rate(incident, tag: TagProfile | complex, rectifier_eff: float):
    """Harvested DC power eta (1 - |delta|) P_I of a linear rectifier."""
    refl = tag.refl_mag if isinstance(tag, TagProfile) else np.abs(tag)
    return rectifier_eff * (1.0 - refl) * incident


def harvest_rates(config: SystemConfig, incident) -> np.ndarray:
    """Vectorized harvest over all tags; ``incident`` has trailing axis K."""
    return config.rectifier_eff * (1.0 - config.refl_mags) * np.asarray(incident)
