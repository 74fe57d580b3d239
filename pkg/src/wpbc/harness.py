"""
Scenario files, parameter sweeps over the four schemes, and CSV output.

Scenario files are INI documents::

    [scenario]
    preset = paper-default      ; optional, fills every omitted key

    [system]
    m_tx = 8
    r_rx = 8
    block_len = 200
    avg_tx_power = 2.0          ; watts, or avg_tx_power_dbm = 33
    ce_noise_power_dbm = -90
    rx_noise_power_dbm = -60
    rectifier_eff = 0.65
    circuit_power = 8.9e-6

    [tag.1]
    distance = 4
    reflection = 0.3+0.4j

    [sweep]
    axis = r_rx                 ; m_tx | r_rx | avg_tx_power
    values = 2, 4, 8, 16
    schemes = proposed, perfect-csi, omni, maxmin-energy

    [run]
    mc_trials = 2000
    master_seed = 1
    output = sweep.csv
    match_analytic = false
    threads = 1

    [optimizer]
    n_alpha = 16
    n_pce = 32

Every power key also accepts a ``_dbm`` suffixed form.
"""

from __future__ import annotations

import configparser
import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .channel import SystemConfig, TagProfile, dbm_to_watt
from .energy import harvest_rates, incident_power_perfect_csi
from .errors import ConfigError, InfeasibleAllocationError
from .montecarlo import SCHEMES, simulate_link
from .optimizer import (GridSpec, OptimizationResult, solve_maxmin_energy, solve_maxmin_rate,
                        solve_omni, solve_perfect_csi)

AXES = ("m_tx", "r_rx", "avg_tx_power")
CSV_HEADER = ("axis", "scheme", "tag", "rate_bits", "rate_se", "harvest_w", "zeta", "alpha",
              "p_ce", "feasible")

PAPER_DEFAULT = """\
[scenario]
preset = paper-default

[system]
m_tx = 8
r_rx = 8
block_len = 200
avg_tx_power = 2.0
ce_noise_power_dbm = -90
rx_noise_power_dbm = -60
tag_noise_power_dbm = -90
rectifier_eff = 0.65
circuit_power = 8.9e-6

[tag.1]
distance = 4
reflection = 0.3+0.4j

[tag.2]
distance = 6
reflection = 0.3+0.4j

[sweep]
axis = r_rx
values = 2, 4, 8, 16
schemes = proposed, perfect-csi, omni, maxmin-energy

[run]
mc_trials = 2000
master_seed = 1
output = sweep.csv
match_analytic = false
threads = 1

[optimizer]
n_alpha = 16
n_pce = 32
pce_min = 0.01
pce_max = 50
refine = true
continuous_alpha = false
"""

PRESETS = {"paper-default": PAPER_DEFAULT}

_POWER_KEYS = ("avg_tx_power", "ce_noise_power", "rx_noise_power", "tag_noise_power",
               "circuit_power", "trunc_threshold")
_INT_KEYS = ("m_tx", "r_rx", "block_len")
_REQUIRED = ("m_tx", "r_rx", "block_len", "avg_tx_power", "ce_noise_power", "rx_noise_power",
             "rectifier_eff", "circuit_power")


@dataclass(frozen=True)
class ScenarioSpec:
    config: SystemConfig
    axis: str
    values: tuple
    schemes: tuple
    mc_trials: int = 2000
    master_seed: int = 1
    output: Optional[str] = None
    match_analytic: bool = False
    threads: int = 1
    grid: GridSpec = field(default_factory=GridSpec)

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"sweep.axis must be one of {AXES}, got {self.axis!r}")
        if len(self.values) == 0:
            raise ConfigError("sweep.values must be nonempty")
        if len(self.schemes) == 0:
            raise ConfigError("sweep.schemes must be nonempty")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"unknown scheme {s!r}; expected one of {SCHEMES}")
        if self.mc_trials < 0:
            raise ConfigError("run.mc_trials must be >= 0")
        if self.threads < 1:
            raise ConfigError("run.threads must be >= 1")


@dataclass(frozen=True)
class SweepRow:
    axis_value: float
    scheme: str
    rates: np.ndarray
    rate_se: np.ndarray
    harvest: np.ndarray
    zeta: np.ndarray
    alpha: float
    p_ce: float
    feasible: bool

    @property
    def min_rate(self) -> float:
        return float(np.min(self.rates))


def _get(parser, section, key, conv, required=True, default=None):
    dbm_key = key + "_dbm"
    if parser.has_option(section, dbm_key) and key in _POWER_KEYS:
        try:
            return dbm_to_watt(float(parser.get(section, dbm_key)))
        except ValueError as exc:
            raise ConfigError(f"{section}.{dbm_key}: {exc}") from None
    if parser.has_option(section, key):
        raw = parser.get(section, key)
        try:
            return conv(raw)
        except ValueError as exc:
            raise ConfigError(f"{section}.{key}: {exc}") from None
    if required:
        raise ConfigError(f"missing required field {section}.{key}")
    return default


def _bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _list(raw: str) -> List[str]:
    return [x.strip() for x in raw.split(",") if x.strip()]


def parse_scenario(text: str) -> ScenarioSpec:
    """Parse scenario INI text; a preset named in [scenario] supplies omitted keys."""
    user = configparser.ConfigParser()
    try:
        user.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse scenario: {exc}") from None

    parser = configparser.ConfigParser()
    preset = user.get("scenario", "preset", fallback=None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}")
        parser.read_string(PRESETS[preset])
        # user tag sections replace the preset's tags wholesale
        if any(s.startswith("tag.") for s in user.sections()):
            for s in [s for s in parser.sections() if s.startswith("tag.")]:
                parser.remove_section(s)
    for section in user.sections():
        if not parser.has_section(section):
            parser.add_section(section)
        for key, value in user.items(section, raw=True):
            # an explicit watt value overrides a preset dBm value and vice versa
            base = key[:-4] if key.endswith("_dbm") else key
            for alt in (base, base + "_dbm"):
                if alt != key and parser.has_option(section, alt) and not user.has_option(section, alt):
                    parser.remove_option(section, alt)
            parser.set(section, key, value)

    if not parser.has_section("system"):
        raise ConfigError("missing required section [system]")
    sys_kw = {}
    for key in _REQUIRED:
        conv = int if key in _INT_KEYS else float
        sys_kw[key] = _get(parser, "system", key, conv)
    tag_noise = _get(parser, "system", "tag_noise_power", float, required=False)
    if tag_noise is not None:
        sys_kw["tag_noise_power"] = tag_noise
    sys_kw["trunc_threshold"] = _get(parser, "system", "trunc_threshold", float, required=False)

    tag_sections = [s for s in parser.sections() if s.startswith("tag.")]
    for s in tag_sections:
        if not s[4:].isdigit():
            raise ConfigError(f"tag sections must be named [tag.N] with integer N, got [{s}]")
    tag_sections.sort(key=lambda s: int(s[4:]))
    if not tag_sections:
        raise ConfigError("at least one [tag.N] section is required")
    try:
        tags = []
        for s in tag_sections:
            path_loss = _get(parser, s, "path_loss", float, required=False)
            distance = _get(parser, s, "distance", float, required=path_loss is None,
                            default=float("nan"))
            refl = _get(parser, s, "reflection", lambda r: complex(r.replace(" ", "")),
                        required=False, default=0.3 + 0.4j)
            tags.append(TagProfile(distance=distance, reflection=refl, path_loss=path_loss))
        config = SystemConfig(tags=tuple(tags), **sys_kw)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    if not parser.has_section("sweep"):
        raise ConfigError("missing required section [sweep]")
    axis = _get(parser, "sweep", "axis", str.strip)
    values = _get(parser, "sweep", "values", lambda r: tuple(float(v) for v in _list(r)))
    if axis in ("m_tx", "r_rx"):
        if any(v != int(v) for v in values):
            raise ConfigError(f"sweep.values must be integers for axis {axis}")
        values = tuple(int(v) for v in values)
    for v in values:
        try:
            config.with_(**{axis: v}) if axis in AXES else None
        except ValueError as exc:
            raise ConfigError(f"sweep value {axis}={v}: {exc}") from None
    schemes = _get(parser, "sweep", "schemes", lambda r: tuple(_list(r)), required=False,
                   default=SCHEMES)

    run = dict(
        mc_trials=_get(parser, "run", "mc_trials", int, required=False, default=2000),
        master_seed=_get(parser, "run", "master_seed", int, required=False, default=1),
        output=_get(parser, "run", "output", str.strip, required=False),
        match_analytic=_get(parser, "run", "match_analytic", _bool, required=False, default=False),
        threads=_get(parser, "run", "threads", int, required=False, default=1),
    )
    g = GridSpec()
    grid = GridSpec(
        n_alpha=_get(parser, "optimizer", "n_alpha", int, required=False, default=g.n_alpha),
        n_pce=_get(parser, "optimizer", "n_pce", int, required=False, default=g.n_pce),
        pce_min=_get(parser, "optimizer", "pce_min", float, required=False, default=g.pce_min),
        pce_max=_get(parser, "optimizer", "pce_max", float, required=False, default=g.pce_max),
        refine=_get(parser, "optimizer", "refine", _bool, required=False, default=g.refine),
        continuous_alpha=_get(parser, "optimizer", "continuous_alpha", _bool, required=False,
                              default=g.continuous_alpha),
    )
    return ScenarioSpec(config=config, axis=axis, values=values, schemes=schemes, grid=grid, **run)


def load_scenario(path) -> ScenarioSpec:
    """Read and validate a scenario file; dBm keys are converted to watts."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from None
    return parse_scenario(text)


def _scheme_id(scheme: str) -> int:
    return SCHEMES.index(scheme)


def _finish(spec: ScenarioSpec, config: SystemConfig, axis_index: int, axis_value, scheme: str,
            res: OptimizationResult, harvest: np.ndarray) -> SweepRow:
    alloc = res.allocation
    if spec.mc_trials > 0:
        mc = simulate_link(config, alloc, spec.mc_trials, seed=spec.master_seed,
                           key=(axis_index, _scheme_id(scheme)), scheme=scheme,
                           match_analytic=spec.match_analytic, threads=spec.threads)
        rates, se = mc.rate_mean, mc.rate_se
    else:
        rates, se = np.asarray(res.per_tag_rates, dtype=float), np.zeros(config.k_tags)
    active = harvest >= config.circuit_power * (1.0 - 1e-12)
    return SweepRow(
        axis_value=axis_value,
        scheme=scheme,
        rates=np.where(active, rates, 0.0),
        rate_se=np.where(active, se, 0.0),
        harvest=np.asarray(harvest, dtype=float),
        zeta=alloc.weights,
        alpha=float(alloc.ce_time),
        p_ce=float(alloc.pilot_power),
        feasible=bool(res.feasible),
    )


def run_perfect_csi(spec: ScenarioSpec, axis_index: int, config: Optional[SystemConfig] = None
                    ) -> SweepRow:
    """
    Perfect-CSI baseline at one sweep point: no CE slot (alpha = 0, p = w),
    beams and detectors matched to the true channels, no estimation error.
    """
    value = spec.values[axis_index]
    config = config or spec.config.with_(**{spec.axis: value})
    res = solve_perfect_csi(config)
    harvest = harvest_rates(config, incident_power_perfect_csi(config, res.allocation.weights,
                                                               res.allocation.data_power))
    return _finish(spec, config, axis_index, value, "perfect-csi", res, harvest)


def run_point(spec: ScenarioSpec, axis_index: int, scheme: str) -> SweepRow:
    """Allocate and evaluate one (axis value, scheme) pair."""
    value = spec.values[axis_index]
    config = spec.config.with_(**{spec.axis: value})
    try:
        return _allocate_and_evaluate(spec, config, axis_index, value, scheme)
    except InfeasibleAllocationError:
        k = config.k_tags
        zeros = np.zeros(k)
        return SweepRow(value, scheme, zeros, zeros, zeros, np.full(k, 1.0 / k),
                        float("nan"), float("nan"), False)


def _allocate_and_evaluate(spec, config, axis_index, value, scheme) -> SweepRow:
    if scheme == "perfect-csi":
        return run_perfect_csi(spec, axis_index, config)
    if scheme == "proposed":
        res = solve_maxmin_rate(config, spec.grid)
    elif scheme == "maxmin-energy":
        res = solve_maxmin_energy(config, spec.grid)
    else:
        res = solve_omni(config, spec.grid)
    return _finish(spec, config, axis_index, value, scheme, res, res.per_tag_energy)


def run_sweep(spec: ScenarioSpec) -> List[SweepRow]:
    """
    One row per (axis value, scheme), ordered by axis value then by the
    scheme order of the spec. Infeasible points are flagged, not dropped.
    """
    return [run_point(spec, i, s) for i in range(len(spec.values)) for s in spec.schemes]


def _fmt(x) -> str:
    return repr(float(x))


def _fmt_axis(v) -> str:
    return str(v) if isinstance(v, (int, np.integer)) else _fmt(v)


def format_csv(rows: Sequence[SweepRow]) -> str:
    if not rows:
        raise ValueError("no rows to write")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        for k in range(len(row.rates)):
            writer.writerow([
                _fmt_axis(row.axis_value), row.scheme, k + 1, _fmt(row.rates[k]), _fmt(row.rate_se[k]),
                _fmt(row.harvest[k]), _fmt(row.zeta[k]), _fmt(row.alpha), _fmt(row.p_ce),
                "true" if row.feasible else "false",
            ])
    return buf.getvalue()


def emit_csv(rows: Iterable[SweepRow], path) -> Path:
    """Write one line per (row, tag); the header is fixed and floats use repr."""
    text = format_csv(list(rows))
    path = Path(path)
    with open(path, "w", newline="", encoding="ascii") as fh:
        fh.write(text)
    return path


__all__ = [
    "AXES", "CSV_HEADER", "PAPER_DEFAULT", "ScenarioSpec", "SweepRow", "emit_csv", "format_csv",
    "load_scenario", "parse_scenario", "run_perfect_csi", "run_point", "run_sweep",
]
