"""
MRC detection of the backscattered uplink and the achievable-rate models.

Three rate evaluations are provided for a given allocation:

* the ergodic rate E{log2(1 + SINR)}, estimated by Monte Carlo;
* the closed-form Jensen lower bound built from E{1/SINR};
* a fully bounded version where every special function is replaced by its
  elementary envelope, used as the optimization objective.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import SystemConfig
from .energy import ResourceAllocation, bound_factors, harvest_rates, incident_power_from_gain
from .errors import DegenerateEstimateError, DomainError
from .estimation import ChannelEstimate
from .specfun import (ce_inverse_quality, phi_of_c, truncated_inverse_moment,
                      truncated_inverse_moment_upper)


def mrc_detector(est: ChannelEstimate, tx_col: int = 0) -> np.ndarray:
    """Unit-norm MRC combiner q_k = hhat_mk / ||hhat_mk|| from column ``tx_col``."""
    col = est.bs_estimate[..., :, tx_col]
    norm = np.linalg.norm(col, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise DegenerateEstimateError(f"estimate column {tx_col} has zero norm")
    return col / norm


def sinr_instant(detectors, est_bwd_cols, reflect_powers, err_vars, rx_noise_power,
                 tag: Optional[int] = None):
    """
    Per-realization SINR of the linear detector.

    Parameters
    ----------
    detectors : array (..., K, R)
        Row k is the combiner q_k.
    est_bwd_cols : array (..., K, R)
        Row i is the estimated backward channel hhat_i^b.
    reflect_powers : array (..., K)
        Reflected powers p_i.
    err_vars : array (..., K)
        Error variances of the backward estimates.
    rx_noise_power : float
    tag : int, optional
        Return only this tag's SINR; all tags when omitted.
    """
    q = np.asarray(detectors)
    h = np.asarray(est_bwd_cols)
    p = np.asarray(reflect_powers, dtype=float)
    gains = np.abs(np.einsum("...kr,...ir->...ki", q.conj(), h)) ** 2
    qq = np.sum(np.abs(q) ** 2, axis=-1)
    received = gains * p[..., None, :]
    signal = np.diagonal(received, axis1=-2, axis2=-1)
    interference = received.sum(axis=-1) - signal
    error = qq * np.sum(p * np.asarray(err_vars, dtype=float), axis=-1, keepdims=True)
    sinr = signal / (interference + error + qq * rx_noise_power)
    return sinr if tag is None else sinr[..., tag]


def _sinr_from_terms(config: SystemConfig, sig_refl, int_refl, err_coef, corr):
    """
    p_k (R-1) beta_k / (corr_k (sum_{i!=k} p_i (beta_i + e_i) + sum_i p_i e_i + noise)).

    ``sig_refl`` is the reflected power used in the numerator, ``int_refl``
    the one used for interferers and error terms; both have trailing axis K.
    """
    beta = config.path_losses
    sig_refl = np.asarray(sig_refl, dtype=float)
    int_refl = np.asarray(int_refl, dtype=float)
    per_int = int_refl * (beta + err_coef)
    err_total = np.sum(int_refl * err_coef, axis=-1, keepdims=True)
    interference = per_int.sum(axis=-1, keepdims=True) - per_int
    denom = corr * (interference + err_total + config.rx_noise_power)
    return sig_refl * (config.r_rx - 1) * beta / denom


def _error_coef(config: SystemConfig, ce_time, pilot_power, upper: bool):
    if ce_time <= 0 or pilot_power <= 0:
        raise DomainError("analytic MRC rates need a CE slot (alpha > 0, p_ce > 0)")
    beta = config.path_losses
    tau = config.trunc_threshold
    inv = truncated_inverse_moment_upper(beta, tau) if upper else truncated_inverse_moment(beta, tau)
    return config.k_tags * config.ce_noise_power / (ce_time * pilot_power * config.refl_mags) * inv


def _check_r(config: SystemConfig):
    if config.r_rx < 2:
        raise DomainError("MRC rate expressions require R >= 2")


def sinr_closed_form_terms(config: SystemConfig, weights, ce_time, pilot_power, data_power):
    """Closed-form SINR for every tag; ``weights`` may be batched (..., K)."""
    _check_r(config)
    c = np.atleast_1d(ce_inverse_quality(config.path_losses, ce_time, pilot_power,
                                         config.refl_mags, config.k_tags, config.ce_noise_power))
    phi = np.atleast_1d(phi_of_c(c))
    gain = (config.m_tx - 1) * (1.0 - phi)
    refl = config.refl_mags * incident_power_from_gain(config, weights, data_power, gain)
    err = _error_coef(config, ce_time, pilot_power, upper=False)
    return _sinr_from_terms(config, refl, refl, err, 1.0 - phi)


def sinr_lower_bound_terms(config: SystemConfig, weights, ce_time, pilot_power, data_power):
    """Fully bounded SINR for every tag; ``weights`` may be batched (..., K)."""
    _check_r(config)
    l1, l2 = bound_factors(config, ce_time, pilot_power)
    m1 = config.m_tx - 1
    sig = config.refl_mags * incident_power_from_gain(config, weights, data_power, m1 * l1)
    intf = config.refl_mags * incident_power_from_gain(config, weights, data_power, m1 * l2)
    err = _error_coef(config, ce_time, pilot_power, upper=True)
    return _sinr_from_terms(config, sig, intf, err, l2)


def sinr_perfect_csi(config: SystemConfig, weights, data_power):
    """Jensen-bound SINR with matched beamforming and detection on true channels."""
    _check_r(config)
    refl = config.refl_mags * incident_power_from_gain(config, weights, data_power,
                                                       float(config.m_tx - 1))
    return _sinr_from_terms(config, refl, refl, 0.0, 1.0)


def sinr_omni_lower_bound(config: SystemConfig, ce_time, pilot_power, data_power):
    """Bounded SINR for an omnidirectional carrier with estimated-CSI MRC detection."""
    _check_r(config)
    _, l2 = bound_factors(config, ce_time, pilot_power)
    refl = config.refl_mags * data_power * config.path_losses
    err = _error_coef(config, ce_time, pilot_power, upper=True)
    return _sinr_from_terms(config, refl, refl, err, l2)


def _pick(values, tag):
    values = np.asarray(values)
    return values if tag is None else float(values[..., tag])


def rate_closed_form(config: SystemConfig, alloc: ResourceAllocation, tag: Optional[int] = None):
    """Jensen lower bound log2(1 + 1/E{1/SINR}) on the ergodic rate (bits/s/Hz)."""
    sinr = sinr_closed_form_terms(config, alloc.weights, alloc.ce_time, alloc.pilot_power,
                                  alloc.data_power)
    return _pick(np.log2(1.0 + sinr), tag)


def rate_lower_bound(config: SystemConfig, alloc: ResourceAllocation, tag: Optional[int] = None):
    """Rate with every special function replaced by its envelope; never above the closed form."""
    sinr = sinr_lower_bound_terms(config, alloc.weights, alloc.ce_time, alloc.pilot_power,
                                  alloc.data_power)
    return _pick(np.log2(1.0 + sinr), tag)


def harvest_lower(config: SystemConfig, alloc: ResourceAllocation) -> np.ndarray:
    """eta (1 - |delta|) P^L per tag: the energy measure used in the power constraint."""
    l1, _ = bound_factors(config, alloc.ce_time, alloc.pilot_power)
    inc = incident_power_from_gain(config, alloc.weights, alloc.data_power, (config.m_tx - 1) * l1)
    return harvest_rates(config, inc)


def ergodic_rate_mc(config: SystemConfig, alloc: ResourceAllocation, tag: int, n_trials: int,
                    rng=0, *, match_analytic: bool = False, rx_row: int = 0, tx_col: int = 0,
                    threads: int = 1):
    """
    Monte Carlo ergodic rate of one tag and its standard error.

    ``rng`` is a master seed (int) or ``numpy.random.SeedSequence``.
    """
    from .montecarlo import simulate_link

    res = simulate_link(config, alloc, n_trials, seed=rng, match_analytic=match_analytic,
                        rx_row=rx_row, tx_col=tx_col, threads=threads)
    return float(res.rate_mean[tag]), float(res.rate_se[tag])


@dataclass(frozen=True)
class LinkReport:
    """Per-tag link summary; every field has trailing axis K."""

    incident_power: np.ndarray
    incident_bounds: tuple
    harvest_rate_lower: np.ndarray
    reflect_power: np.ndarray
    sinr_closed: np.ndarray
    sinr_lower: np.ndarray
    rate_closed: np.ndarray
    rate_lower: np.ndarray
    rate_empirical: Optional[np.ndarray] = None
    rate_empirical_se: Optional[np.ndarray] = None


def link_report(config: SystemConfig, alloc: ResourceAllocation, mc_trials: int = 0,
                seed=0, match_analytic: bool = True) -> LinkReport:
    """Collect analytic (and optionally Monte Carlo) link figures for an allocation."""
    from .energy import incident_power_analytic, incident_power_bounds
    from .montecarlo import simulate_link

    inc = incident_power_analytic(config, alloc)
    bounds = tuple(incident_power_bounds(config, alloc, k) for k in range(config.k_tags))
    sc = sinr_closed_form_terms(config, alloc.weights, alloc.ce_time, alloc.pilot_power,
                                alloc.data_power)
    sl = sinr_lower_bound_terms(config, alloc.weights, alloc.ce_time, alloc.pilot_power,
                                alloc.data_power)
    emp = emp_se = None
    if mc_trials > 0:
        res = simulate_link(config, alloc, mc_trials, seed=seed, match_analytic=match_analytic)
        emp, emp_se = res.rate_mean, res.rate_se
    return LinkReport(
        incident_power=inc,
        incident_bounds=bounds,
        harvest_rate_lower=harvest_lower(config, alloc),
        reflect_power=config.refl_mags * inc,
        sinr_closed=sc,
        sinr_lower=sl,
        rate_closed=np.log2(1 + sc),
        rate_lower=np.log2(1 + sl),
        rate_empirical=emp,
        rate_empirical_se=emp_se,
    )


__all__ = [
    "LinkReport", "ergodic_rate_mc", "harvest_lower", "link_report",
    "mrc_detector", "rate_closed_form", "rate_lower_bound", "sinr_closed_form_terms",
    "sinr_instant", "sinr_lower_bound_terms", "sinr_omni_lower_bound", "sinr_perfect_csi",
]
