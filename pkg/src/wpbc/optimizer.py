"""
Max-min resource allocation over beam weights, CE time and pilot power.

For fixed (alpha, p_ce) every tag's bounded SINR is a ratio of affine
functions of the weights, increasing in its own weight and decreasing in
the others', and every tag's bounded harvest rate is affine in its own
weight. The inner problem is solved by bisection on a common SINR target;
each feasibility test finds the least weight vector meeting all targets and
energy floors by an active-set linear solve. The outer problem is a grid
search over (alpha, p_ce) with one refinement level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Optional

import numpy as np

from .channel import SystemConfig
from .detection import sinr_omni_lower_bound
from .energy import (ResourceAllocation, bound_factors, derive_data_power, harvest_rates,
                     incident_power_omni)
from .errors import InfeasibleAllocationError
from .specfun import truncated_inverse_moment_upper

_FEAS_TOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """
    Outer search resolution.

    ``pce_min`` and ``pce_max`` are multiples of the average power w.
    """

    n_alpha: int = 16
    n_pce: int = 32
    pce_min: float = 0.01
    pce_max: float = 50.0
    refine: bool = True
    continuous_alpha: bool = False
    rel_tol: float = 1e-12

    def finer(self, factor: int) -> "GridSpec":
        return replace(self, n_alpha=self.n_alpha * factor, n_pce=self.n_pce * factor)


@dataclass(frozen=True)
class LinkModel:
    """
    Affine SINR and harvest model at a fixed (alpha, p_ce).

    SINR_k(z) = s0_k (1 + sg_k z_k) / (corr_k (noise + sum_i W_ki (1 + ig_i z_i)))
    harvest_k(z) = e0_k (1 + eg_k z_k)
    """

    s0: np.ndarray
    sg: np.ndarray
    corr: np.ndarray
    w: np.ndarray
    ig: np.ndarray
    noise: float
    e0: np.ndarray
    eg: np.ndarray

    @property
    def k(self) -> int:
        return self.s0.size

    def sinr(self, z):
        z = np.asarray(z, dtype=float)
        num = self.s0 * (1.0 + self.sg * z)
        den = self.corr * (self.noise + (1.0 + self.ig * z) @ self.w.T)
        return num / den

    def rates(self, z):
        return np.log2(1.0 + self.sinr(z))

    def energy(self, z):
        return self.e0 * (1.0 + self.eg * np.asarray(z, dtype=float))


def _model(config: SystemConfig, p: float, sig_gain, int_gain, energy_gain, corr, err):
    beta, refl = config.path_losses, config.refl_mags
    a = refl * p * beta
    k = config.k_tags
    w = np.tile(a * err, (k, 1)) + (1.0 - np.eye(k)) * (a * (beta + err))[None, :]
    return LinkModel(
        s0=a * (config.r_rx - 1) * beta,
        sg=np.broadcast_to(np.asarray(sig_gain, dtype=float), (k,)).copy(),
        corr=np.broadcast_to(np.asarray(corr, dtype=float), (k,)).copy(),
        w=w,
        ig=np.broadcast_to(np.asarray(int_gain, dtype=float), (k,)).copy(),
        noise=config.rx_noise_power,
        e0=harvest_rates(config, p * beta),
        eg=np.broadcast_to(np.asarray(energy_gain, dtype=float), (k,)).copy(),
    )


def _bounded_error(config: SystemConfig, alpha, p_ce):
    beta = config.path_losses
    inv = truncated_inverse_moment_upper(beta, config.trunc_threshold)
    return config.k_tags * config.ce_noise_power / (alpha * p_ce * config.refl_mags) * inv


def lower_bound_model(config: SystemConfig, alpha: float, p_ce: float) -> LinkModel:
    """Model of the fully bounded rate and the P^L harvest rate (the optimization objective)."""
    p = derive_data_power(config.avg_tx_power, config.block_len, alpha, p_ce)
    l1, l2 = bound_factors(config, alpha, p_ce)
    m1 = config.m_tx - 1
    return _model(config, p, m1 * l1, m1 * l2, m1 * l1, l2, _bounded_error(config, alpha, p_ce))


def perfect_csi_model(config: SystemConfig) -> LinkModel:
    """No CE slot, matched beams and detectors on the true channels."""
    m1 = float(config.m_tx - 1)
    return _model(config, config.avg_tx_power, m1, m1, m1, 1.0, 0.0)


def omni_model(config: SystemConfig, alpha: float, p_ce: float) -> LinkModel:
    """Weight-independent carrier; CE used only for detection."""
    p = derive_data_power(config.avg_tx_power, config.block_len, alpha, p_ce)
    _, l2 = bound_factors(config, alpha, p_ce)
    return _model(config, p, 0.0, 0.0, 0.0, l2, _bounded_error(config, alpha, p_ce))


class InnerSolution(NamedTuple):
    weights: np.ndarray
    min_rate: float
    feasible: bool
    iterations: int


def energy_floor(model: LinkModel, rho: float) -> Optional[np.ndarray]:
    """Least weights meeting every harvest floor; None if a floor is unreachable."""
    need = np.zeros(model.k)
    for k in range(model.k):
        if model.e0[k] >= rho:
            continue
        if model.eg[k] <= 0:
            return None
        need[k] = (rho / model.e0[k] - 1.0) / model.eg[k]
    return need


def maxmin_energy_weights(model: LinkModel):
    """Water-filling weights equalizing e0_k (1 + eg_k z_k); returns (weights, min energy)."""
    k = model.k
    if np.all(model.eg <= 0):
        z = np.full(k, 1.0 / k)
        return z, float(model.energy(z).min())
    active = model.eg > 0
    z = np.zeros(k)
    while True:
        e0, g = model.e0[active], model.eg[active]
        level = (1.0 + np.sum(1.0 / g)) / np.sum(1.0 / (e0 * g))
        za = (level / e0 - 1.0) / g
        if np.all(za >= 0):
            z[:] = 0.0
            z[active] = za
            break
        idx = np.flatnonzero(active)
        active[idx[za < 0]] = False
    return z, float(model.energy(z).min())


def _system(model: LinkModel, s: float):
    # SINR_k >= s rewritten as (A z)_k >= b_k with A a Z-matrix
    cw = model.corr[:, None] * model.w
    a = -s * cw * model.ig[None, :]
    a[np.diag_indices(model.k)] += model.s0 * model.sg
    b = s * model.corr * (model.noise + model.w.sum(axis=1)) - model.s0
    return a, b


def _satisfied(model, a, b, z):
    return np.all(a @ z - b >= -_FEAS_TOL * (np.abs(b) + model.s0))


def _least_active_set(model, a, b, floor):
    z = floor.copy()
    free = np.diag(a) > 0
    while free.any():
        fx = ~free
        sub = a[np.ix_(free, free)]
        try:
            sol = np.linalg.solve(sub, b[free] - a[np.ix_(free, fx)] @ z[fx])
        except np.linalg.LinAlgError:
            return None
        low = sol < floor[free]
        idx = np.flatnonzero(free)
        if not low.any():
            # inverse-positive block certifies this is the least solution
            if np.any(np.linalg.solve(sub, np.ones(idx.size)) <= 0):
                return None
            z[idx] = sol
            break
        free[idx[low]] = False
    return z if _satisfied(model, a, b, z) else None


def _least_fixed_point(model, a, b, floor, max_iter=5000):
    # monotone Jacobi iteration from below; never overshoots the least solution
    diag = np.diag(a)
    off = a - np.diag(diag)
    z = floor.copy()
    for _ in range(max_iter):
        if np.any(diag <= 0) and not _satisfied(model, a, b, z):
            return None
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(diag > 0, (b - off @ z) / diag, floor)
        nz = np.maximum(floor, step)
        if nz.sum() > 1.0 + 1e-12:
            return None
        if np.allclose(nz, z, rtol=1e-15, atol=1e-16):
            return nz if _satisfied(model, a, b, nz) else None
        z = nz
    return None


def _least_weights(model: LinkModel, sinr_target: float, floor: np.ndarray) -> Optional[np.ndarray]:
    """Least z >= floor with SINR_k(z) >= sinr_target for all k, or None."""
    a, b = _system(model, sinr_target)
    z = _least_active_set(model, a, b, floor)
    return z if z is not None else _least_fixed_point(model, a, b, floor)


def solve_equal_rate(model: LinkModel, rho: float, rel_tol: float = 1e-12) -> InnerSolution:
    """Max-min bounded rate over the weight simplex at a fixed (alpha, p_ce)."""
    k = model.k
    floor = energy_floor(model, rho)
    if floor is None or floor.sum() > 1.0 + 1e-12:
        z, _ = maxmin_energy_weights(model)
        return InnerSolution(z, float(model.rates(z).min()), False, 0)

    if np.all(model.sg <= 0) and np.all(model.ig <= 0):
        z = np.full(k, 1.0 / k)
        return InnerSolution(z, float(model.rates(z).min()), True, 0)

    hi = np.inf
    for j in range(k):
        solo = np.zeros(k)
        solo[j] = 1.0
        hi = min(hi, max(model.sinr(solo)[j], model.sinr(np.zeros(k))[j]))
    hi *= 1.0 + 1e-9
    lo = 0.0
    best = _least_weights(model, 0.0, floor)
    if best is None or best.sum() > 1.0 + 1e-12:
        z, _ = maxmin_energy_weights(model)
        return InnerSolution(z, float(model.rates(z).min()), False, 0)
    it = 0
    while hi - lo > rel_tol * hi and it < 200:
        it += 1
        mid = 0.5 * (lo + hi)
        z = _least_weights(model, mid, floor)
        if z is not None and z.sum() <= 1.0:
            lo, best = mid, z
        else:
            hi = mid
    total = best.sum()
    z = best / total if total > 0 else np.full(k, 1.0 / k)
    return InnerSolution(z, float(model.rates(z).min()), True, it)


class Candidate(NamedTuple):
    objective: float
    alpha: float
    p_ce: float
    weights: np.ndarray
    feasible: bool
    violation: float
    iterations: int


def _better(a: Candidate, b: Optional[Candidate]) -> bool:
    if b is None:
        return True
    if a.feasible != b.feasible:
        return a.feasible
    if not a.feasible:
        ka, kb = a.violation, b.violation
        if ka != kb:
            return ka < kb
    elif a.objective != b.objective:
        return a.objective > b.objective
    return (a.alpha, a.p_ce, tuple(a.weights)) < (b.alpha, b.p_ce, tuple(b.weights))


def alpha_grid(config: SystemConfig, n: int, continuous: bool = False,
               lo: Optional[float] = None, hi: Optional[float] = None) -> np.ndarray:
    """CE-time grid with D = alpha / K >= M; integer multiples of K unless continuous."""
    k = config.k_tags
    a_min = k * config.m_tx
    a_max = config.block_len - 1
    lo = a_min if lo is None else max(lo, a_min)
    hi = a_max if hi is None else min(hi, a_max)
    if lo > hi:
        return np.array([])
    raw = np.linspace(lo, hi, n)
    if continuous:
        return np.unique(raw)
    snapped = k * np.floor(raw / k)
    snapped = snapped[(snapped >= max(lo, a_min)) & (snapped <= hi)]
    if snapped.size == 0 and k * math.ceil(lo / k) <= hi:
        snapped = np.array([k * math.ceil(lo / k)], dtype=float)
    return np.unique(snapped)


def pce_grid(config: SystemConfig, n: int, lo: float, hi: float) -> np.ndarray:
    return np.geomspace(lo, hi, n) if n > 1 else np.array([lo])


def _search(config: SystemConfig, grid: GridSpec, evaluate: Callable[[float, float], Candidate],
            alphas=None, pces=None):
    w = config.avg_tx_power
    alphas = alpha_grid(config, grid.n_alpha, grid.continuous_alpha) if alphas is None else alphas
    pces = pce_grid(config, grid.n_pce, grid.pce_min * w, grid.pce_max * w) if pces is None else pces
    best, best_ij, count = None, None, 0
    for i, alpha in enumerate(alphas):
        for j, p_ce in enumerate(pces):
            if alpha * p_ce >= w * config.block_len:
                continue
            cand = evaluate(float(alpha), float(p_ce))
            count += 1
            if _better(cand, best):
                best, best_ij = cand, (i, j)
    if best is None or not grid.refine:
        return best, count
    i, j = best_ij
    a_lo, a_hi = alphas[max(i - 1, 0)], alphas[min(i + 1, len(alphas) - 1)]
    p_lo, p_hi = pces[max(j - 1, 0)], pces[min(j + 1, len(pces) - 1)]
    fine_a = alpha_grid(config, grid.n_alpha, grid.continuous_alpha, a_lo, a_hi)
    fine_p = pce_grid(config, grid.n_pce, p_lo, p_hi)
    for alpha in fine_a:
        for p_ce in fine_p:
            if alpha * p_ce >= w * config.block_len:
                continue
            cand = evaluate(float(alpha), float(p_ce))
            count += 1
            if _better(cand, best):
                best = cand
    return best, count


@dataclass(frozen=True)
class OptimizationResult:
    allocation: ResourceAllocation
    per_tag_rates: np.ndarray
    per_tag_energy: np.ndarray
    objective: float
    feasible: bool
    iterations: int = 0
    grid_points: int = 0


def _rate_candidate(config, model_fn, grid):
    rho = config.circuit_power

    def evaluate(alpha, p_ce):
        model = model_fn(config, alpha, p_ce)
        sol = solve_equal_rate(model, rho, grid.rel_tol)
        if sol.feasible:
            violation = 0.0
        else:
            _, emin = maxmin_energy_weights(model)
            violation = max(0.0, rho - emin)
        return Candidate(sol.min_rate, alpha, p_ce, sol.weights, sol.feasible, violation,
                         sol.iterations)

    return evaluate


def equal_rate_weights(config: SystemConfig, alpha: float, p_ce: float,
                       rel_tol: float = 1e-12) -> InnerSolution:
    """Max-min bounded-rate weights at fixed (alpha, p_ce); flags unmet energy floors."""
    return solve_equal_rate(lower_bound_model(config, alpha, p_ce), config.circuit_power, rel_tol)


def _result(config, cand: Candidate, count: int, model: LinkModel) -> OptimizationResult:
    alloc = ResourceAllocation.build(config, cand.weights, cand.alpha, cand.p_ce)
    return OptimizationResult(
        allocation=alloc,
        per_tag_rates=model.rates(cand.weights),
        per_tag_energy=model.energy(cand.weights),
        objective=float(model.rates(cand.weights).min()),
        feasible=cand.feasible,
        iterations=cand.iterations,
        grid_points=count,
    )


def solve_maxmin_rate(config: SystemConfig, grid_spec: GridSpec = GridSpec()) -> OptimizationResult:
    """
    Maximize the minimum bounded rate subject to P^L-based harvest floors.

    When no grid point meets the floors the least-violating point is
    returned with ``feasible=False``.
    """
    best, count = _search(config, grid_spec, _rate_candidate(config, lower_bound_model, grid_spec))
    if best is None:
        raise InfeasibleAllocationError("no admissible (alpha, p_ce) grid point")
    return _result(config, best, count, lower_bound_model(config, best.alpha, best.p_ce))


def solve_maxmin_energy(config: SystemConfig, grid_spec: GridSpec = GridSpec()) -> OptimizationResult:
    """Maximize the minimum P^L-based harvest rate; rates are reported at that allocation."""
    rho = config.circuit_power

    def evaluate(alpha, p_ce):
        model = lower_bound_model(config, alpha, p_ce)
        z, emin = maxmin_energy_weights(model)
        return Candidate(emin, alpha, p_ce, z, emin >= rho, max(0.0, rho - emin), 0)

    # rank purely by energy: feasibility does not change the ordering
    grid = grid_spec
    best, count = _search(config, grid, lambda a, p: evaluate(a, p)._replace(feasible=True))
    if best is None:
        raise InfeasibleAllocationError("no admissible (alpha, p_ce) grid point")
    res = _result(config, best, count, lower_bound_model(config, best.alpha, best.p_ce))
    return replace(res, objective=float(res.per_tag_energy.min()),
                   feasible=bool(res.per_tag_energy.min() >= rho))


def solve_perfect_csi(config: SystemConfig, rel_tol: float = 1e-12) -> OptimizationResult:
    """Max-min weights when both forward and backward channels are known (alpha = 0, p = w)."""
    model = perfect_csi_model(config)
    sol = solve_equal_rate(model, config.circuit_power, rel_tol)
    alloc = ResourceAllocation.build(config, sol.weights, 0.0, 0.0)
    return OptimizationResult(alloc, model.rates(sol.weights), model.energy(sol.weights),
                              float(model.rates(sol.weights).min()), sol.feasible,
                              sol.iterations, 1)


@dataclass(frozen=True)
class OmniReport:
    allocation: ResourceAllocation
    incident_power: np.ndarray
    harvest: np.ndarray
    active: np.ndarray
    rates: np.ndarray


def omni_allocation(config: SystemConfig, alpha: float, p_ce: float) -> OmniReport:
    """
    Omnidirectional carrier at (alpha, p_ce); tags harvesting below the
    circuit power are inactive and get zero rate.
    """
    alloc = ResourceAllocation.build(config, np.full(config.k_tags, 1.0 / config.k_tags),
                                     alpha, p_ce)
    inc = incident_power_omni(config, alloc.data_power)
    harvest = harvest_rates(config, inc)
    active = harvest >= config.circuit_power
    rates = np.log2(1.0 + sinr_omni_lower_bound(config, alpha, p_ce, alloc.data_power))
    return OmniReport(alloc, inc, harvest, active, np.where(active, rates, 0.0))


def solve_omni(config: SystemConfig, grid_spec: GridSpec = GridSpec()) -> OptimizationResult:
    """
    Best CE time for the omnidirectional baseline with pilot power fixed at w.

    Pilot and data power both equal w, so the carrier power (and harvest)
    does not depend on M or on the CE time.
    """
    w = config.avg_tx_power
    best = None
    count = 0
    for alpha in alpha_grid(config, grid_spec.n_alpha, grid_spec.continuous_alpha):
        rep = omni_allocation(config, float(alpha), w)
        count += 1
        # activity does not depend on alpha here, so rank on rate alone
        cand = Candidate(float(rep.rates.min()), float(alpha), w, rep.allocation.weights,
                         True, 0.0, 0)
        if _better(cand, best):
            best, best_rep = cand, rep
    if best is None:
        raise InfeasibleAllocationError("no admissible CE time for the omnidirectional baseline")
    return OptimizationResult(best_rep.allocation, best_rep.rates, best_rep.harvest,
                              float(best_rep.rates.min()), bool(best_rep.active.all()), 0, count)


__all__ = [
    "GridSpec", "LinkModel", "OmniReport", "OptimizationResult", "alpha_grid",
    "equal_rate_weights", "lower_bound_model", "maxmin_energy_weights", "omni_allocation",
    "omni_model", "perfect_csi_model", "solve_equal_rate", "solve_maxmin_energy",
    "solve_maxmin_rate", "solve_omni", "solve_perfect_csi",
]
