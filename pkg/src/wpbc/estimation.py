"""
Pilot-based least-squares estimation of the backscatter channel.

During the CE slot tag k reflects the pilot block and the reader receives
``sqrt(delta_k) H_k P^T + N`` (direct link assumed cancelled). The LS
estimate undoes the pilot block; its error entries are CN(0, sigma^2 /
(D p_ce |delta_k|)).
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, PilotBlock, complex_gaussian
from .errors import DomainError


@dataclass(frozen=True)
class ChannelEstimate:
    """LS estimate of H_k with shape (..., R, M)."""

    bs_estimate: np.ndarray
    ce_rows_used: int
    pilot_power: float
    tag_index: int = 0

    @property
    def shape(self):
        return self.bs_estimate.shape[-2:]


def pilot_length(alpha: int, k_tags: int, m_tx: int) -> int:
    """Per-tag pilot length D = floor(alpha / K); must be at least M."""
    d = int(alpha) // int(k_tags)
    if d < m_tx:
        raise DomainError(f"CE slot of {alpha} symbols gives D={d} < M={m_tx} for {k_tags} tags")
    return d


def simulate_ce_rx(realization: ChannelRealization, tag: int, pilots: PilotBlock,
                   ce_noise_power: float, rng: np.random.Generator,
                   reflection: complex) -> np.ndarray:
    """
    Received CE block of shape (..., R, D) while ``tag`` reflects the pilots.

    Batched realizations give batched outputs; each gets independent noise.
    """
    k_tags = realization.forward.shape[-1]
    if not 0 <= tag < k_tags:
        raise IndexError(f"tag {tag} out of range for {k_tags} tags")
    h = realization.backscatter(tag)
    clean = cmath.sqrt(complex(reflection)) * (h @ pilots.pilots.T)
    return clean + complex_gaussian(rng, clean.shape, ce_noise_power)


def ls_estimate(rx: np.ndarray, pilots: PilotBlock, reflection: complex,
                tag_index: int = 0) -> ChannelEstimate:
    """
    LS estimate ``rx delta^{-1/2} G^* B^{-1/2}``.

    Exact inverse of the noiseless CE model; linear in ``rx``.
    """
    reflection = complex(reflection)
    if reflection == 0:
        raise DomainError("reflection coefficient must be nonzero")
    if rx.shape[-1] != pilots.seq_len:
        raise ValueError(f"rx has {rx.shape[-1]} columns, pilots have length {pilots.seq_len}")
    scale = 1.0 / (pilots.seq_len * pilots.pilot_power * cmath.sqrt(reflection))
    est = (rx @ pilots.pilots.conj()) * scale
    return ChannelEstimate(bs_estimate=est, ce_rows_used=pilots.seq_len,
                           pilot_power=pilots.pilot_power, tag_index=tag_index)


def ce_error_variance(bwd_mag_sq, k_tags, ce_noise_power, alpha, pilot_power, reflection):
    """
    Variance K sigma^2 / (|h|^2 alpha p_ce |delta|) of the directional estimate error.

    ``bwd_mag_sq`` is the squared magnitude of the conditioning channel
    coefficient (backward for the beamforming direction, forward for the
    detection direction). Zero magnitude returns ``inf``.
    """
    mag = np.asarray(bwd_mag_sq, dtype=float)
    if np.any(mag < 0):
        raise DomainError("squared magnitude must be non-negative")
    refl = np.abs(reflection)
    if np.any(refl <= 0) or alpha <= 0 or pilot_power <= 0 or k_tags <= 0 or ce_noise_power <= 0:
        raise DomainError("alpha, pilot_power, reflection, k_tags and noise must be positive")
    with np.errstate(divide="ignore"):
        out = k_tags * ce_noise_power / (mag * alpha * pilot_power * refl)
    return float(out) if out.ndim == 0 else out


def directional_fwd_estimate(est: ChannelEstimate, rx_row: int = 0) -> np.ndarray:
    """Row ``rx_row`` of the estimate, i.e. h_kr^b h_k^{fT} plus noise (length M)."""
    r = est.bs_estimate.shape[-2]
    if not 0 <= rx_row < r:
        raise IndexError(f"rx_row {rx_row} out of range for R={r}")
    return est.bs_estimate[..., rx_row, :]


def directional_bwd_estimate(est: ChannelEstimate, tx_col: int = 0) -> np.ndarray:
    """Column ``tx_col`` of the estimate, i.e. h_mk^f h_k^b plus noise (length R)."""
    m = est.bs_estimate.shape[-1]
    if not 0 <= tx_col < m:
        raise IndexError(f"tx_col {tx_col} out of range for M={m}")
    return est.bs_estimate[..., :, tx_col]
