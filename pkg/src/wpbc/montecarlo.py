"""
Batched Monte Carlo simulation of one transmission block.

Each trial draws channels, runs the CE slot for every tag (pilot reflection,
noisy reception, LS estimate), forms the energy beam, and evaluates the
MRC SINR of every tag. Trials are processed in fixed-size chunks, each with
its own counter-derived random stream, so results are identical for any
thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import SystemConfig, make_pilots, sample_channels
from .detection import mrc_detector, sinr_instant
from .energy import (Beamformer, ResourceAllocation, build_beamformer, incident_power_analytic,
                     incident_power_instant, incident_power_omni, incident_power_perfect_csi)
from .estimation import ce_error_variance, ls_estimate, pilot_length, simulate_ce_rx

SCHEMES = ("proposed", "perfect-csi", "omni", "maxmin-energy")
CHUNK_SIZE = 2048


@dataclass(frozen=True)
class MCResult:
    rate_mean: np.ndarray
    rate_se: np.ndarray
    incident_mean: np.ndarray
    incident_se: np.ndarray
    n_trials: int


def chunk_stream(seed, key, chunk_index: int) -> np.random.Generator:
    """Random stream for one chunk, derived from (seed, *key, chunk_index)."""
    if isinstance(seed, np.random.SeedSequence):
        entropy, base_key = seed.entropy, tuple(seed.spawn_key)
    else:
        entropy, base_key = int(seed), ()
    ss = np.random.SeedSequence(entropy, spawn_key=base_key + tuple(int(k) for k in key)
                                + (int(chunk_index),))
    return np.random.default_rng(ss)


def _truncate_column(forward, tx_col, beta, tau, rng):
    # |h|^2 given |h|^2 >= tau is tau + Exp(beta) (memoryless), phase uniform
    n = forward.shape[0]
    mag_sq = tau + rng.exponential(beta, size=(n, beta.size))
    phase = np.exp(2j * np.pi * rng.random((n, beta.size)))
    forward = forward.copy()
    forward[:, tx_col, :] = np.sqrt(mag_sq) * phase
    return forward


def _simulate_chunk(config: SystemConfig, alloc: ResourceAllocation, n: int, rng, scheme: str,
                    match_analytic: bool, rx_row: int, tx_col: int):
    k_tags, m_tx = config.k_tags, config.m_tx
    beta, refl = config.path_losses, config.refl_mags
    ch = sample_channels(config, rng, n)
    estimated = scheme != "perfect-csi"
    forward = ch.forward
    if estimated and match_analytic:
        forward = _truncate_column(forward, tx_col, beta, config.trunc_threshold, rng)
        ch = type(ch)(forward=forward, backward=ch.backward)

    if estimated:
        d = pilot_length(alloc.ce_time, k_tags, m_tx)
        pilots = make_pilots(m_tx, d, alloc.pilot_power)
        ests = []
        for k, tag in enumerate(config.tags):
            rx = simulate_ce_rx(ch, k, pilots, config.ce_noise_power, rng, tag.reflection)
            ests.append(ls_estimate(rx, pilots, tag.reflection, k))

    if scheme == "perfect-csi":
        h = np.moveaxis(forward, -1, -2)
        bf = Beamformer(np.einsum("k,nkm->nm", np.sqrt(alloc.weights),
                                  h.conj() / np.linalg.norm(h, axis=-1, keepdims=True)))
    elif scheme == "omni":
        bf = Beamformer(np.full((n, m_tx), 1.0 / math.sqrt(m_tx), dtype=complex))
    else:
        bf = build_beamformer(ests, alloc.weights, rx_row)

    incident = incident_power_instant(Beamformer(bf.steering[:, None, :]),
                                      np.moveaxis(forward, -1, -2), alloc.data_power)

    if match_analytic:
        if scheme == "perfect-csi":
            mean_inc = incident_power_perfect_csi(config, alloc.weights, alloc.data_power)
        elif scheme == "omni":
            mean_inc = incident_power_omni(config, alloc.data_power)
        else:
            mean_inc = incident_power_analytic(config, alloc)
        reflect = np.broadcast_to(refl * mean_inc, (n, k_tags))
    else:
        reflect = refl * incident

    if estimated:
        q = np.stack([mrc_detector(e, tx_col) for e in ests], axis=1)
        cols = np.stack([e.bs_estimate[..., :, tx_col] for e in ests], axis=1)
        h_tx = forward[:, tx_col, :]
        bwd_hat = cols / h_tx[:, :, None]
        err = ce_error_variance(np.abs(h_tx) ** 2, k_tags, config.ce_noise_power,
                                alloc.ce_time, alloc.pilot_power, refl)
    else:
        hb = ch.backward
        q = hb / np.linalg.norm(hb, axis=-1, keepdims=True)
        bwd_hat = hb
        err = np.zeros((n, k_tags))

    sinr = sinr_instant(q, bwd_hat, reflect, err, config.rx_noise_power)
    return np.log2(1.0 + sinr), incident


def simulate_link(config: SystemConfig, alloc: ResourceAllocation, n_trials: int, seed=0, *,
                  key=(), scheme: str = "proposed", match_analytic: bool = False,
                  rx_row: int = 0, tx_col: int = 0, threads: int = 1,
                  chunk_size: int = CHUNK_SIZE) -> MCResult:
    """
    Monte Carlo rates and incident powers for every tag.

    Parameters
    ----------
    scheme : {"proposed", "maxmin-energy", "omni", "perfect-csi"}
        Beamformer/detector family. "maxmin-energy" simulates like "proposed";
        only the allocation differs.
    match_analytic : bool
        Truncate |h_mk^f|^2 below the threshold on the detection column and
        use expected (not per-realization) reflected powers, mirroring the
        assumptions of the closed-form rate.
    key : tuple of int
        Extra stream coordinates (e.g. sweep index, scheme id).
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    sizes = [min(chunk_size, n_trials - s) for s in range(0, n_trials, chunk_size)]

    def run(i):
        rng = chunk_stream(seed, key, i)
        return _simulate_chunk(config, alloc, sizes[i], rng, scheme, match_analytic, rx_row, tx_col)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(i) for i in range(len(sizes))]
    rates = np.concatenate([p[0] for p in parts])
    incident = np.concatenate([p[1] for p in parts])
    sqrt_n = math.sqrt(n_trials)
    ddof = 1 if n_trials > 1 else 0
    return MCResult(
        rate_mean=rates.mean(axis=0),
        rate_se=rates.std(axis=0, ddof=ddof) / sqrt_n,
        incident_mean=incident.mean(axis=0),
        incident_se=incident.std(axis=0, ddof=ddof) / sqrt_n,
        n_trials=n_trials,
    )
