"""
Oracle and invariant checks for the whole model chain.

Each ``check_*`` function runs one self-contained experiment and returns a
:class:`CheckResult`. Keyword arguments (trial counts, grids) may be lowered
for quick smoke runs; the defaults are the acceptance settings.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np
from scipy import integrate

from .channel import ChannelRealization, SystemConfig, TagProfile, make_pilots, sample_channels
from .detection import rate_closed_form, rate_lower_bound, sinr_lower_bound_terms
from .energy import (ResourceAllocation, bound_factors, derive_data_power, harvest_rates,
                     incident_power_analytic, incident_power_bounds, incident_power_from_gain)
from .estimation import ce_error_variance, ls_estimate, pilot_length, simulate_ce_rx
from .harness import PAPER_DEFAULT, format_csv, parse_scenario, run_sweep
from .montecarlo import simulate_link
from .optimizer import (GridSpec, alpha_grid, pce_grid, solve_maxmin_energy, solve_maxmin_rate)
from .specfun import gamma0, gamma0_bounds, inv_chisquare_mean


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float
    limit: float

    @property
    def ok(self) -> bool:
        return self.passed and self.seconds <= self.limit

    def line(self) -> str:
        tag = "PASS" if self.ok else "FAIL"
        return f"[{tag}] {self.name}: {self.detail} ({self.seconds:.1f}s / {self.limit:.0f}s)"


def _timed(name: str, limit: float, fn: Callable[[], tuple]) -> CheckResult:
    t0 = time.perf_counter()
    passed, detail = fn()
    return CheckResult(name, bool(passed), detail, time.perf_counter() - t0, limit)


def paper_config(**changes) -> SystemConfig:
    """The two-tag default scenario with optional field overrides."""
    return dataclasses.replace(parse_scenario(PAPER_DEFAULT).config, **changes)


def e1_quadrature(x: float) -> float:
    """E1(x) by adaptive quadrature: log-substituted integral on [x, 1] plus the [1, inf) tail."""
    head = 0.0
    if x < 1.0:
        head, _ = integrate.quad(lambda s: math.exp(-math.exp(s)), math.log(x), 0.0,
                                 epsabs=0.0, epsrel=1e-13, limit=200)
        lo = 1.0
    else:
        lo = x
    tail, _ = integrate.quad(lambda u: math.exp(-u) / u, lo, math.inf, epsabs=0.0, epsrel=1e-13,
                             limit=200)
    return head + tail


def check_gamma0(n_points: int = 200) -> CheckResult:
    def run():
        xs = np.geomspace(1e-6, 50.0, n_points)
        worst, bracket = 0.0, True
        for x in xs:
            ref = e1_quadrature(float(x))
            val = float(gamma0(float(x)))
            worst = max(worst, abs(val - ref) / ref)
            lo, hi = gamma0_bounds(float(x))
            bracket &= lo < val < hi
        return worst <= 1e-10 and bracket, f"max rel err {worst:.2e}, bounds bracket={bracket}"

    return _timed("1 gamma0 vs quadrature", 5.0, run)


def check_estimation_variance(n_trials: int = 100_000, seed: int = 2) -> CheckResult:
    points = [(m, a, p) for m in (2, 4, 8) for a, p in ((16, 0.5), (32, 2.0), (64, 0.1))]

    def run():
        rng = np.random.default_rng(seed)
        fails, worst = 0, 0.0
        for m, alpha, p_ce in points:
            cfg = paper_config(m_tx=m, r_rx=2)
            ch = sample_channels(cfg, rng)
            d = pilot_length(alpha, cfg.k_tags, m)
            pilots = make_pilots(m, d, p_ce)
            tag = cfg.tags[0]
            batch = ChannelRealization(np.broadcast_to(ch.forward, (n_trials,) + ch.forward.shape),
                                       np.broadcast_to(ch.backward, (n_trials,) + ch.backward.shape))
            est = ls_estimate(simulate_ce_rx(batch, 0, pilots, cfg.ce_noise_power, rng,
                                             tag.reflection), pilots, tag.reflection)
            hb = ch.backward[0, 0]
            err = est.bs_estimate[:, 0, :] / hb - ch.forward[:, 0]
            sq = np.abs(err) ** 2
            target = ce_error_variance(abs(hb) ** 2, cfg.k_tags, cfg.ce_noise_power, alpha, p_ce,
                                       tag.reflection)
            se = sq.std() / math.sqrt(sq.size)
            z = abs(sq.mean() - target) / se
            worst = max(worst, z)
            fails += z > 3.0
        return fails == 0, f"{len(points) - fails}/{len(points)} points within 3 sigma, worst {worst:.2f} sigma"

    return _timed("2 LS error variance", 30.0, run)


def check_incident_power(n_trials: int = 100_000, seed: int = 3) -> CheckResult:
    def run():
        fails, strict, worst, total = 0, True, 0.0, 0
        for m in (2, 8, 32):
            cfg = paper_config(m_tx=m, r_rx=2)
            alpha = cfg.k_tags * m
            beta0, refl0 = cfg.path_losses[0], cfg.refl_mags[0]
            for cq in (0.1, 1.0, 10.0):
                p_ce = cq * cfg.k_tags * cfg.ce_noise_power / (beta0 ** 2 * alpha * refl0)
                for z in (0.3, 1.0):
                    alloc = ResourceAllocation.build(cfg, [z, 1.0 - z], alpha, p_ce)
                    mc = simulate_link(cfg, alloc, n_trials, seed=seed, key=(m, int(cq * 10), int(z * 10)))
                    ana = incident_power_analytic(cfg, alloc, 0)
                    lo, hi = incident_power_bounds(cfg, alloc, 0)
                    dev = abs(mc.incident_mean[0] - ana) / mc.incident_se[0]
                    worst = max(worst, dev)
                    fails += dev > 3.0
                    strict &= lo < ana < hi
                    total += 1
        return fails == 0 and strict, (f"{total - fails}/{total} within 3 sigma (worst {worst:.2f}), "
                                       f"P^L < P < P^U: {strict}")

    return _timed("3 incident power expectation", 120.0, run)


def check_jensen(n_trials: int = 100_000, seed: int = 4, grid: GridSpec = GridSpec(8, 8)) -> CheckResult:
    def run():
        ok, parts = True, []
        for m in (4, 8, 16):
            cfg = paper_config(m_tx=m, r_rx=m)
            alloc = solve_maxmin_rate(cfg, grid).allocation
            mc = simulate_link(cfg, alloc, n_trials, seed=seed, key=(m,), match_analytic=True)
            closed = rate_closed_form(cfg, alloc)
            lower = rate_lower_bound(cfg, alloc)
            above = np.all(mc.rate_mean >= closed - 3 * mc.rate_se)
            below = np.all(lower <= closed)
            ok &= bool(above and below)
            parts.append(f"M=R={m}: mc {np.round(mc.rate_mean, 3)} closed {np.round(closed, 3)} "
                         f"lower {np.round(lower, 3)}")
        return ok, "; ".join(parts)

    return _timed("4 ergodic rate >= closed form >= bound", 180.0, run)


def check_inverse_chisquare(n_samples: int = 1_000_000, seed: int = 5) -> CheckResult:
    def run():
        rng = np.random.default_rng(seed)
        ok, parts = True, []
        for r in (3, 5, 9):
            z = rng.chisquare(2 * r, size=n_samples)
            est = float(np.mean(1.0 / z))
            rel = abs(est / inv_chisquare_mean(r) - 1.0)
            ok &= rel <= 0.01
            parts.append(f"R={r}: rel dev {rel:.1e}")
        return ok, ", ".join(parts)

    return _timed("5 inverse chi-square mean", 10.0, run)


def brute_force_maxmin(config: SystemConfig, grid: GridSpec, n_zeta: int = 10_001):
    """Exhaustive two-tag search over the (alpha, p_ce) grid and a uniform zeta_1 grid."""
    if config.k_tags != 2:
        raise ValueError("brute force search is implemented for two tags")
    w = config.avg_tx_power
    z1 = np.linspace(0.0, 1.0, n_zeta)
    zz = np.stack([z1, 1.0 - z1], axis=1)
    best = (-np.inf, None)
    for alpha in alpha_grid(config, grid.n_alpha, grid.continuous_alpha):
        for p_ce in pce_grid(config, grid.n_pce, grid.pce_min * w, grid.pce_max * w):
            if alpha * p_ce >= w * config.block_len:
                continue
            p = derive_data_power(w, config.block_len, alpha, p_ce)
            rate = np.log2(1.0 + sinr_lower_bound_terms(config, zz, alpha, p_ce, p)).min(axis=1)
            l1, _ = bound_factors(config, alpha, p_ce)
            energy = harvest_rates(config, incident_power_from_gain(config, zz, p,
                                                                   (config.m_tx - 1) * l1))
            ok = np.all(energy >= config.circuit_power, axis=1)
            if ok.any():
                i = int(np.argmax(np.where(ok, rate, -np.inf)))
                if rate[i] > best[0]:
                    best = (float(rate[i]), (float(alpha), float(p_ce), zz[i]))
    return best


def check_optimizer(grid: GridSpec = GridSpec(n_alpha=8, n_pce=8)) -> CheckResult:
    def run():
        cfg = paper_config()
        res = solve_maxmin_rate(cfg, grid)
        brute, _ = brute_force_maxmin(cfg, grid.finer(4))
        gap = abs(res.objective - brute)
        sym = paper_config(tags=(TagProfile(5.0), TagProfile(5.0)))
        sres = solve_maxmin_rate(sym, grid)
        zdev = float(np.max(np.abs(sres.allocation.weights - 0.5)))
        rdev = float(np.ptp(sres.per_tag_rates) / np.max(sres.per_tag_rates))
        ok = gap <= 1e-3 and zdev <= 1e-6 and rdev <= 1e-4
        return ok, (f"solver {res.objective:.5f} vs brute {brute:.5f} (gap {gap:.1e}); "
                    f"symmetric zeta dev {zdev:.1e}, rate spread {rdev:.1e}")

    return _timed("6 optimizer vs exhaustive search", 120.0, run)


def _sweep(axis, values, mc_trials, seed, grid):
    spec = parse_scenario(PAPER_DEFAULT)
    spec = dataclasses.replace(spec, axis=axis, values=tuple(values), mc_trials=mc_trials,
                               master_seed=seed, grid=grid)
    return run_sweep(spec)


def check_scheme_ordering(mc_trials: int = 4000, seed: int = 7, grid: GridSpec = GridSpec()
                          ) -> CheckResult:
    def run():
        n_pts = 0
        perf_lt, omni_gt = [], []
        flat, rising = True, True
        for axis, values in (("r_rx", (2, 4, 8, 16)), ("m_tx", (2, 4, 8, 16, 32))):
            by: Dict[str, list] = {}
            for row in _sweep(axis, values, mc_trials, seed, grid):
                by.setdefault(row.scheme, []).append(row)
            for i, v in enumerate(values):
                perf, prop, omni = (by[s][i] for s in ("perfect-csi", "proposed", "omni"))
                n_pts += 1
                if perf.min_rate < prop.min_rate - _se_tol(perf, prop):
                    perf_lt.append(f"{axis}={v} ({perf.min_rate:.3f} vs {prop.min_rate:.3f})")
                if prop.min_rate < omni.min_rate - _se_tol(prop, omni):
                    omni_gt.append(f"{axis}={v} ({prop.min_rate:.3f} vs {omni.min_rate:.3f})")
            if axis == "m_tx":
                omni_h = np.array([r.harvest for r in by["omni"]])
                flat = bool(np.allclose(omni_h, omni_h[0], rtol=1e-12, atol=0.0))
                for s in ("proposed", "perfect-csi"):
                    h = np.array([r.harvest.min() for r in by[s]])
                    rising &= bool(np.all(np.diff(h) > 0))
        ok = not perf_lt and not omni_gt and flat and rising
        detail = (f"perfect>=proposed at {n_pts - len(perf_lt)}/{n_pts} points"
                  + (f" (violations: {', '.join(perf_lt[:3])}{'...' if len(perf_lt) > 3 else ''})"
                     if perf_lt else "")
                  + f"; proposed>=omni at {n_pts - len(omni_gt)}/{n_pts}"
                  + (f" (violations: {', '.join(omni_gt[:3])})" if omni_gt else "")
                  + f"; omni harvest flat in M: {flat}; beamformed harvest rising in M: {rising}")
        return ok, detail

    return _timed("7 scheme ordering", 300.0, run)


def _se_tol(a, b) -> float:
    ka, kb = int(np.argmin(a.rates)), int(np.argmin(b.rates))
    return 3.0 * math.hypot(a.rate_se[ka], b.rate_se[kb])


def check_fairness(grid: GridSpec = GridSpec()) -> CheckResult:
    def run():
        cfg = paper_config(m_tx=5, r_rx=5)
        en = solve_maxmin_energy(cfg, grid)
        e = en.per_tag_energy
        e_spread = float(np.ptp(e) / np.max(e))
        ratio = float(en.per_tag_rates[1] / en.per_tag_rates[0])
        prop = solve_maxmin_rate(cfg, grid)
        r_spread = float(np.ptp(prop.per_tag_rates) / np.max(prop.per_tag_rates))
        ok = e_spread <= 1e-4 and ratio <= 0.40 and r_spread <= 1e-3
        return ok, (f"energy baseline harvest spread {e_spread:.1e}, rate ratio tag2/tag1 {ratio:.3f}"
                    f" (need <= 0.40); proposed rate spread {r_spread:.1e} (need <= 1e-3)")

    return _timed("8 fairness contrast", 120.0, run)


def check_determinism(mc_trials: int = 500, seed: int = 9) -> CheckResult:
    def run():
        base = parse_scenario(PAPER_DEFAULT)
        spec = dataclasses.replace(base, values=(2, 4), mc_trials=mc_trials, master_seed=seed,
                                   grid=GridSpec(n_alpha=6, n_pce=6))
        outs = [format_csv(run_sweep(dataclasses.replace(spec, threads=t))) for t in (1, 1, 4)]
        same = all(o == outs[0] for o in outs)
        return same, f"3 runs (threads 1, 1, 4) byte-identical: {same}"

    return _timed("9 sweep determinism", 60.0, run)


CHECKS = {
    "gamma0": check_gamma0,
    "estimation": check_estimation_variance,
    "incident": check_incident_power,
    "jensen": check_jensen,
    "chisquare": check_inverse_chisquare,
    "optimizer": check_optimizer,
    "ordering": check_scheme_ordering,
    "fairness": check_fairness,
    "determinism": check_determinism,
}


def run_all(names=None) -> List[CheckResult]:
    names = list(CHECKS) if names is None else names
    return [CHECKS[n]() for n in names]


__all__ = ["CHECKS", "CheckResult", "brute_force_maxmin", "e1_quadrature", "paper_config",
           "run_all"] + [f.__name__ for f in CHECKS.values()]
