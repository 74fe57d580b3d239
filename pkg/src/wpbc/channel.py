"""
Scenario configuration, path loss, Rayleigh channel draws and pilot blocks.

Channels are flat Rayleigh: every forward coefficient h_mk^f (antenna m to
tag k) and backward coefficient h_kr^b (tag k to receive antenna r) is an
independent CN(0, beta_k) draw, where beta_k is the tag's path loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError

# Effective-aperture constant of the long-term fading model beta = C / (4 pi d^2).
PATH_LOSS_CONSTANT = 0.0086


def dbm_to_watt(dbm: float) -> float:
    """Convert a power level in dBm to watts."""
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt) + 30.0


def path_loss_from_distance(d: float) -> float:
    """Long-term fading gain ``0.0086 / (4 pi d^2)`` for a tag at ``d`` meters."""
    if not d > 0:
        raise DomainError(f"distance must be positive, got {d!r}")
    return PATH_LOSS_CONSTANT / (4.0 * math.pi * d * d)


@dataclass(frozen=True)
class TagProfile:
    """
    Static description of one backscatter tag.

    ``path_loss`` overrides the distance-derived value when given.
    """

    distance: float
    reflection: complex = 0.3 + 0.4j
    path_loss: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "reflection", complex(self.reflection))
        if self.path_loss is None:
            object.__setattr__(self, "path_loss", path_loss_from_distance(self.distance))
        if not self.path_loss > 0:
            raise ConfigError(f"path_loss must be positive, got {self.path_loss!r}")
        if not 0 < abs(self.reflection) < 1:
            raise ConfigError(f"|reflection| must lie in (0, 1), got {abs(self.reflection)!r}")

    @property
    def refl_mag(self) -> float:
        """Reflected power fraction |delta_k|."""
        return abs(self.reflection)


@dataclass(frozen=True)
class SystemConfig:
    """
    All scenario constants. Powers are in watts.

    ``trunc_threshold`` is the minimum |h|^2 admitted in inverse-moment
    expectations; ``None`` selects ``0.01 * min_k beta_k``.
    """

    m_tx: int
    r_rx: int
    block_len: int
    avg_tx_power: float
    ce_noise_power: float
    rx_noise_power: float
    rectifier_eff: float
    circuit_power: float
    tags: tuple = ()
    tag_noise_power: float = 1e-12
    trunc_threshold: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "tags", tuple(self.tags))
        if self.m_tx < 1:
            raise ConfigError("m_tx must be >= 1")
        if self.r_rx < 2:
            raise ConfigError("r_rx must be >= 2 (MRC inverse moment needs R >= 2)")
        if self.block_len < 1:
            raise ConfigError("block_len must be >= 1")
        if len(self.tags) < 1:
            raise ConfigError("at least one tag is required")
        for name in ("avg_tx_power", "ce_noise_power", "rx_noise_power",
                     "tag_noise_power", "circuit_power"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not 0 < self.rectifier_eff <= 1:
            raise ConfigError("rectifier_eff must lie in (0, 1]")
        if self.trunc_threshold is None:
            object.__setattr__(self, "trunc_threshold", 0.01 * min(t.path_loss for t in self.tags))
        if not self.trunc_threshold > 0:
            raise ConfigError("trunc_threshold must be positive")

    @property
    def k_tags(self) -> int:
        return len(self.tags)

    @property
    def path_losses(self) -> np.ndarray:
        return np.array([t.path_loss for t in self.tags])

    @property
    def refl_mags(self) -> np.ndarray:
        return np.array([t.refl_mag for t in self.tags])

    def with_(self, **changes) -> "SystemConfig":
        """Copy with fields replaced; an automatic truncation threshold is re-derived."""
        if "tags" in changes and "trunc_threshold" not in changes:
            changes["trunc_threshold"] = None
        return replace(self, **changes)


@dataclass(frozen=True)
class ChannelRealization:
    """
    One (or a batch of) joint channel draws.

    ``forward`` has shape (..., M, K) with column k equal to h_k^f;
    ``backward`` has shape (..., K, R) with row k equal to h_k^b.
    """

    forward: np.ndarray
    backward: np.ndarray

    def backscatter(self, k: int) -> np.ndarray:
        """Backscatter matrix H_k = h_k^b h_k^{fT} of shape (..., R, M)."""
        return self.backward[..., k, :, None] * self.forward[..., None, :, k]


@dataclass(frozen=True)
class PilotBlock:
    """Orthogonal pilot matrix G B^{1/2} of shape (D, M)."""

    pilots: np.ndarray
    seq_len: int
    pilot_power: float

    @property
    def m_tx(self) -> int:
        return self.pilots.shape[1]

    @property
    def unitary(self) -> np.ndarray:
        """The orthonormal-column factor G."""
        return self.pilots / math.sqrt(self.seq_len * self.pilot_power)


def complex_gaussian(rng: np.random.Generator, shape, variance) -> np.ndarray:
    """
    Circularly symmetric CN(0, variance) samples.

    ``variance`` broadcasts against ``shape``; real and imaginary parts are
    each N(0, variance / 2). A zero variance yields exact zeros.
    """
    scale = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return scale * (re + 1j * im)


def sample_channels(config: SystemConfig, rng: np.random.Generator,
                    size: Sequence[int] | int | None = None) -> ChannelRealization:
    """
    Draw forward and backward Rayleigh channels for every tag.

    Parameters
    ----------
    config : SystemConfig
    rng : numpy.random.Generator
    size : int or tuple, optional
        Leading batch shape. ``None`` draws a single realization.
    """
    if size is None:
        batch = ()
    elif isinstance(size, (int, np.integer)):
        batch = (int(size),)
    else:
        batch = tuple(size)
    beta = config.path_losses
    m, k, r = config.m_tx, config.k_tags, config.r_rx
    forward = complex_gaussian(rng, batch + (m, k), beta)
    backward = complex_gaussian(rng, batch + (k, r), beta[:, None])
    return ChannelRealization(forward=forward, backward=backward)


def make_pilots(m_tx: int, seq_len: int, pilot_power: float) -> PilotBlock:
    """
    Pilot block built from the first ``m_tx`` columns of the unitary DFT matrix.

    The result satisfies ``pilots^H pilots = seq_len * pilot_power * I``.
    """
    if m_tx < 1:
        raise DomainError("m_tx must be >= 1")
    if seq_len < m_tx:
        raise DomainError(f"pilot length {seq_len} shorter than antenna count {m_tx}")
    if not pilot_power > 0:
        raise DomainError("pilot_power must be positive")
    n = np.arange(seq_len)[:, None]
    m = np.arange(m_tx)[None, :]
    unitary = np.exp(-2j * np.pi * n * m / seq_len) / math.sqrt(seq_len)
    return PilotBlock(pilots=unitary * math.sqrt(seq_len * pilot_power),
                      seq_len=seq_len, pilot_power=float(pilot_power))
