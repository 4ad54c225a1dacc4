"""Uplink link budget: topology, channel gains and per-sub-channel Shannon rates."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ZeroRate

MIN_DISTANCE_M = 1.0
FADING_MODELS = ("rayleigh", "none")


def dbm_to_watts(x: float) -> float:
    return 10.0 ** (x / 10.0) * 1e-3


@dataclass(frozen=True)
class PathLoss:
    """Log-distance path loss ``ref_db + exponent_db * log10(d / ref_distance_m)``.

    Defaults give the 128.1 + 37.6 log10(d[km]) macro-cell model.
    """

    ref_db: float = 128.1
    exponent_db: float = 37.6
    ref_distance_m: float = 1000.0

    def loss_db(self, distance_m):
        d = np.maximum(np.asarray(distance_m, dtype=float), MIN_DISTANCE_M)
        return self.ref_db + self.exponent_db * np.log10(d / self.ref_distance_m)

    def gain(self, distance_m):
        return 10.0 ** (-self.loss_db(distance_m) / 10.0)


@dataclass(frozen=True)
class LinkBudget:
    tx_power_dbm: float = 23.0
    subchannel_bandwidth_hz: float = 180e3
    noise_psd_dbm_hz: float = -174.0
    pathloss: PathLoss = PathLoss()
    fading: str = "rayleigh"

    def __post_init__(self):
        if not self.subchannel_bandwidth_hz > 0:
            raise ConfigError("sub-channel bandwidth must be positive")
        if not math.isfinite(self.tx_power_dbm):
            raise ConfigError("transmit power must be finite")
        if self.fading not in FADING_MODELS:
            raise ConfigError(f"fading must be one of {FADING_MODELS}, got {self.fading!r}")

    @property
    def tx_power_w(self) -> float:
        return dbm_to_watts(self.tx_power_dbm)

    @property
    def noise_power_w(self) -> float:
        """Thermal noise over one sub-channel, N0 * B."""
        return dbm_to_watts(self.noise_psd_dbm_hz) * self.subchannel_bandwidth_hz


@dataclass(frozen=True)
class Topology:
    cell_radius: float
    positions: np.ndarray  # (K, 2), metres, base station at the origin

    @property
    def K(self) -> int:
        return len(self.positions)

    @property
    def distances(self) -> np.ndarray:
        return np.hypot(self.positions[:, 0], self.positions[:, 1])


def sample_topology(rng: np.random.Generator | int, K: int, radius: float = 200.0) -> Topology:
    """Drop ``K`` devices uniformly over a disc of ``radius`` metres."""
    if K < 1:
        raise ConfigError("need at least one device")
    if not radius > 0:
        raise ConfigError("cell radius must be positive")
    rng = np.random.default_rng(rng)
    r = radius * np.sqrt(rng.random(K))
    theta = 2 * np.pi * rng.random(K)
    pos = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    return Topology(cell_radius=float(radius), positions=pos)


def _fading(link: LinkBudget, rng: np.random.Generator, size):
    if link.fading == "none":
        return 1.0 if size is None else np.ones(size)
    # Rayleigh amplitude -> unit-mean exponential power
    return rng.standard_exponential(size)


def channel_gain(topology: Topology, link: LinkBudget, k: int, s: int,
                 rng: np.random.Generator) -> float:
    """|h|^2 for device ``k`` on sub-channel ``s``: path loss times one fading draw.

    ``s`` does not enter the draw itself; fading is i.i.d. across sub-channels.
    """
    if not 0 <= k < topology.K or s < 0:
        raise IndexError(f"invalid device/sub-channel index ({k}, {s})")
    pl = float(link.pathloss.gain(topology.distances[k]))
    return pl * float(_fading(link, rng, None))


def rate(link: LinkBudget, gain):
    """Shannon rate in bit/s of one sub-channel at power gain ``gain``."""
    snr = link.tx_power_w * np.asarray(gain, dtype=float) / link.noise_power_w
    out = link.subchannel_bandwidth_hz * np.log2(1.0 + snr)
    return float(out) if out.ndim == 0 else out


def peak_rate(link: LinkBudget) -> float:
    """Rate ceiling: unit fading at the minimum distance."""
    return rate(link, link.pathloss.gain(MIN_DISTANCE_M))


@dataclass(frozen=True)
class RateTable:
    round: int
    rates: np.ndarray  # (K, S) bit/s

    @property
    def shape(self):
        return self.rates.shape

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["device", "subchannel", "rate_bps"])
            for k in range(self.rates.shape[0]):
                for s in range(self.rates.shape[1]):
                    w.writerow([k, s, f"{self.rates[k, s]:.9g}"])


def rate_table(topology: Topology, link: LinkBudget, S: int, t: int,
               rng: np.random.Generator) -> RateTable:
    """K x S achievable rates with independent fading per (device, sub-channel)."""
    if S < 1:
        raise ConfigError("need at least one sub-channel")
    pl = link.pathloss.gain(topology.distances)[:, None]
    gains = pl * _fading(link, rng, (topology.K, S))
    rates = rate(link, gains)
    rates = np.atleast_2d(rates)
    bad = ~(np.isfinite(rates) & (rates > 0))
    if bad.any():
        k, s = np.argwhere(bad)[0]
        raise ZeroRate(f"round {t}: device {k} sub-channel {s} has rate {rates[k, s]}")
    return RateTable(round=t, rates=rates)
