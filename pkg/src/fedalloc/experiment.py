"""Scenario configuration, the round-bound -> selection -> allocation pipeline,
and the sub-channel / participant sweeps."""

from __future__ import annotations

import dataclasses
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import allocation, bound, radio
from .errors import ConfigError

SWEEP_AXES = ("none", "subchannels", "kse")


@dataclass(frozen=True)
class RadioConfig:
    K: int = 100
    S: int = 20
    cell_radius_m: float = 200.0
    tx_power_dbm: float = 23.0
    subchannel_bandwidth_hz: float = 180e3
    noise_psd_dbm_hz: float = -174.0
    pathloss_ref_db: float = 128.1
    pathloss_exponent_db: float = 37.6
    pathloss_ref_distance_m: float = 1000.0
    fading: str = "rayleigh"

    def link_budget(self) -> radio.LinkBudget:
        return radio.LinkBudget(
            tx_power_dbm=self.tx_power_dbm,
            subchannel_bandwidth_hz=self.subchannel_bandwidth_hz,
            noise_psd_dbm_hz=self.noise_psd_dbm_hz,
            pathloss=radio.PathLoss(self.pathloss_ref_db, self.pathloss_exponent_db,
                                    self.pathloss_ref_distance_m),
            fading=self.fading,
        )


@dataclass(frozen=True)
class AllocationConfig:
    method: str = "coalition"
    z_comp_bits: float = 1e6
    max_sweeps: int = allocation.DEFAULT_MAX_SWEEPS
    receiver_guard: bool = False


@dataclass(frozen=True)
class BoundConfig:
    L: float = 1.0
    mu: float = 1.0
    G: float = 3.0
    delta: float | tuple[float, ...] = 1.0
    E: int = 1
    chi: float = 0.2
    compressor_loss: float = 10.0
    epsilon: float = 3.0
    delta_mode: str = "mean"
    kse: int | None = None  # force the participant count instead of searching
    rounds: int | None = None  # force the round count

    def params(self, K: int) -> bound.FlBoundParams:
        d = self.delta
        delta = (float(d),) * K if isinstance(d, (int, float)) else tuple(d)
        if len(delta) != K:
            raise ConfigError(f"bound.delta lists {len(delta)} values for K={K} devices")
        return bound.FlBoundParams(L=self.L, mu=self.mu, G=self.G, delta=delta, E=self.E,
                                   chi=self.chi, compressor_loss=self.compressor_loss,
                                   epsilon=self.epsilon, delta_mode=self.delta_mode)


@dataclass(frozen=True)
class SweepConfig:
    axis: str = "none"
    values: tuple[int, ...] = ()
    kse: int = 10  # fixed participant count for the sub-channel sweep
    S: int = 20  # fixed sub-channel count for the participant sweep
    rounds: int = 1
    methods: tuple[str, ...] = ("coalition", "fairness")


@dataclass(frozen=True)
class FlConfig:
    K: int = 100
    d: int = 10
    offset: float = 5.0
    noise_scale: float = 0.1
    task_seed: int = 0
    E: int = 1
    rounds: int = 500
    compressor_loss: float = 1.0
    lr: str | float = "decay"
    threshold: float = 0.2
    kse_values: tuple[int, ...] = (5, 10, 20, 40, 50, 80, 100)
    seeds: int = 20


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "default"
    seed: int = 2024
    trials: int = 1000
    workers: int = 1
    radio: RadioConfig = RadioConfig()
    allocation: AllocationConfig = AllocationConfig()
    bound: BoundConfig = BoundConfig()
    sweep: SweepConfig = SweepConfig()
    fl: FlConfig = FlConfig()

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.allocation.method not in allocation.METHODS:
            raise ConfigError(f"method must be one of {allocation.METHODS}")
        if self.sweep.axis not in SWEEP_AXES:
            raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}")
        if self.sweep.axis != "none" and not self.sweep.values:
            raise ConfigError("a sweep needs a non-empty value list")
        for m in self.sweep.methods:
            if m not in allocation.METHODS:
                raise ConfigError(f"unknown sweep method {m!r}")

    def replace(self, **changes) -> "ExperimentConfig":
        """Copy with dotted-key overrides, e.g. ``replace(**{"radio.S": 30})``."""
        top: dict[str, Any] = {}
        nested: dict[str, dict[str, Any]] = {}
        for key, value in changes.items():
            section, _, name = key.partition(".")
            if name:
                nested.setdefault(section, {})[name] = value
            else:
                top[key] = value
        for section, vals in nested.items():
            top[section] = _build(type(getattr(self, section)), vals, getattr(self, section))
        return dataclasses.replace(self, **top)


def _build(cls, values: dict, base=None):
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(values) - set(names)
    if unknown:
        raise ConfigError(f"unknown keys for [{cls.__name__}]: {sorted(unknown)}")
    conv = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
    try:
        return dataclasses.replace(base, **conv) if base is not None else cls(**conv)
    except TypeError as e:
        raise ConfigError(str(e)) from e


_SECTIONS = {"radio": RadioConfig, "allocation": AllocationConfig, "bound": BoundConfig,
             "sweep": SweepConfig, "fl": FlConfig}


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    top = dict(data.pop("scenario", {}))
    for key, cls in _SECTIONS.items():
        if key in data:
            if not isinstance(data[key], dict):
                raise ConfigError(f"[{key}] must be a table")
            top[key] = _build(cls, data.pop(key))
    if data:
        raise ConfigError(f"unknown config sections: {sorted(data)}")
    return _build(ExperimentConfig, top)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    return config_from_dict(data)


# -- seeding ---------------------------------------------------------------

def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for a grid cell; distinct keys never share a stream."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))


def select_devices(K: int, kse: int, rng: np.random.Generator) -> tuple[int, ...]:
    """Uniform sample of ``kse`` distinct devices, returned in ascending order."""
    if not 1 <= kse <= K:
        raise ConfigError(f"need 1 <= kse <= K, got kse={kse}, K={K}")
    return tuple(int(k) for k in np.sort(rng.choice(K, size=kse, replace=False)))


# -- pipeline --------------------------------------------------------------

@dataclass(frozen=True)
class RoundReport:
    point: int
    trial: int
    round: int
    method: str
    kse: int
    subchannels: int
    selected: tuple[int, ...]
    t_comp_s: float
    initial_t_comp_s: float
    iterations: int
    moves: int
    assignment: allocation.Assignment | None = field(default=None, compare=False, repr=False)

    def row(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("assignment")
        return d


@dataclass(frozen=True)
class ExperimentSummary:
    axis: str
    value: int | None
    method: str
    kse: int
    subchannels: int
    rounds: int
    trials: int
    totals: tuple[float, ...]  # per-trial sum of round times

    @property
    def mean_total_s(self) -> float:
        return statistics.fmean(self.totals)

    @property
    def std_total_s(self) -> float:
        return statistics.stdev(self.totals) if len(self.totals) > 1 else 0.0

    @property
    def sem(self) -> float:
        return self.std_total_s / len(self.totals) ** 0.5

    def row(self) -> dict:
        return {"axis": self.axis, "value": self.value, "method": self.method, "kse": self.kse,
                "subchannels": self.subchannels, "rounds": self.rounds, "trials": self.trials,
                "mean_total_s": self.mean_total_s, "std_total_s": self.std_total_s}


def plan_rounds(config: ExperimentConfig) -> tuple[int, int]:
    """Participant count and round count: forced values or the bound's argmin."""
    b = config.bound
    params = b.params(config.radio.K)
    if b.kse is not None:
        kse = b.kse
        rounds = b.rounds if b.rounds is not None else bound.r_min(params, kse)
    else:
        kse, r = bound.optimal_kse(params)
        rounds = b.rounds if b.rounds is not None else r
    if rounds < 1:
        raise ConfigError("round count must be >= 1")
    return kse, rounds


def _run_trial(args) -> list[RoundReport]:
    config, point, trial, kse, S, rounds, methods, keep_assignments = args
    rc, ac = config.radio, config.allocation
    link = rc.link_budget()
    topo = radio.sample_topology(stream(config.seed, point, trial, 0), rc.K, rc.cell_radius_m)
    out = []
    for t in range(1, rounds + 1):
        rng = stream(config.seed, point, trial, t)
        table = radio.rate_table(topo, link, S, t, rng)
        sel = select_devices(rc.K, kse, rng)
        alloc_seed = rng.integers(0, 2**63)
        for method in methods:
            kw = {}
            if method == "coalition":
                kw = {"max_sweeps": ac.max_sweeps, "receiver_guard": ac.receiver_guard}
            o = allocation.allocate(method, table, sel, ac.z_comp_bits,
                                    np.random.default_rng(alloc_seed), **kw)
            out.append(RoundReport(point, trial, t, method, kse, S, sel, o.t_comp_seconds,
                                   o.initial_t_comp, o.iterations, o.moves_accepted,
                                   o.assignment if keep_assignments else None))
    return out


def _run_grid(config, point, kse, S, rounds, methods, keep_assignments=False):
    if S < kse:
        raise allocation.TooFewChannels(f"{S} sub-channels cannot serve {kse} devices")
    jobs = [(config, point, trial, kse, S, rounds, tuple(methods), keep_assignments)
            for trial in range(config.trials)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as ex:
            chunks = list(ex.map(_run_trial, jobs, chunksize=max(1, len(jobs) // (4 * config.workers))))
    else:
        chunks = [_run_trial(j) for j in jobs]
    reports = [r for c in chunks for r in c]
    order = {m: i for i, m in enumerate(methods)}
    reports.sort(key=lambda r: (r.point, r.trial, r.round, order[r.method]))
    return reports


def summarize(reports: Sequence[RoundReport], axis: str = "none",
              value: int | None = None) -> list[ExperimentSummary]:
    """Per-(point, method) summaries; totals are recomputed from the reports."""
    groups: dict[tuple[int, str], dict[int, float]] = {}
    meta: dict[tuple[int, str], tuple[int, int, int]] = {}
    for r in reports:
        key = (r.point, r.method)
        per_trial = groups.setdefault(key, {})
        per_trial[r.trial] = per_trial.get(r.trial, 0.0) + r.t_comp_s
        kse, S, R = meta.get(key, (r.kse, r.subchannels, 0))
        meta[key] = (kse, S, max(R, r.round))
    out = []
    for (point, method), per_trial in groups.items():
        kse, S, R = meta[(point, method)]
        totals = tuple(per_trial[t] for t in sorted(per_trial))
        v = value if value is not None else (None if axis == "none" else point)
        out.append(ExperimentSummary(axis, v, method, kse, S, R, len(totals), totals))
    return out


def run_pipeline(config: ExperimentConfig, methods: Sequence[str] | None = None,
                 keep_assignments: bool = False):
    """Bound search, then per round: fresh fading, random selection, allocation.

    Returns ``(summaries, reports, (kse, rounds))``.
    """
    kse, rounds = plan_rounds(config)
    methods = tuple(methods or (config.allocation.method,))
    reports = _run_grid(config, 0, kse, config.radio.S, rounds, methods, keep_assignments)
    return summarize(reports), reports, (kse, rounds)


def _sweep(config, axis, values, methods, keep_assignments):
    sw = config.sweep
    methods = tuple(methods or sw.methods)
    summaries, reports = [], []
    for point, v in enumerate(values):
        kse, S = (sw.kse, int(v)) if axis == "subchannels" else (int(v), sw.S)
        if kse > config.radio.K:
            raise ConfigError(f"kse={kse} exceeds K={config.radio.K}")
        reps = _run_grid(config, point, kse, S, sw.rounds, methods, keep_assignments)
        summaries.extend(summarize(reps, axis, int(v)))
        reports.extend(reps)
    return summaries, reports


def sweep_subchannels(config: ExperimentConfig, values: Sequence[int] | None = None,
                      methods: Sequence[str] | None = None, keep_assignments: bool = False):
    """Round time versus sub-channel count at fixed ``sweep.kse``."""
    return _sweep(config, "subchannels", values or config.sweep.values, methods, keep_assignments)


def sweep_kse(config: ExperimentConfig, values: Sequence[int] | None = None,
              methods: Sequence[str] | None = None, keep_assignments: bool = False):
    """Round time versus participant count at fixed ``sweep.S``."""
    return _sweep(config, "kse", values or config.sweep.values, methods, keep_assignments)
