"""Round-count lower bound for compression-aided FL and the device-count search.

The bound is the positive root of a quadratic in the total number of local
iterations ``y = E * R``::

    U1 * y**2 + (U2 - 2*eps/L) * y - U3 >= 0

``r_min`` evaluates the closed-form root; ``r_min_oracle`` scans ``R``
directly and is kept independent of it for cross-checking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    AllInfeasible,
    BoundError,
    ConfigError,
    DegenerateBound,
    DiscriminantNegative,
    NoRootInRange,
)

DELTA_MODES = ("mean", "first")

# relative slack used before rounding a root up to the next integer
CEIL_SLACK = 1e-9
ORACLE_CAP = 10**7


@dataclass(frozen=True)
class FlBoundParams:
    """Problem constants entering the round bound.

    ``delta`` holds one gradient-variance bound per device, so its length
    fixes the total device count ``K``. ``chi`` is a scenario constant
    (an upper bound on the summed local/global loss gap).
    """

    L: float
    mu: float
    G: float
    delta: tuple[float, ...]
    E: int
    chi: float
    compressor_loss: float
    epsilon: float
    delta_mode: str = "mean"

    def __post_init__(self):
        object.__setattr__(self, "delta", tuple(float(d) for d in self.delta))
        if not (self.mu > 0 and self.L >= self.mu):
            raise ConfigError(f"need L >= mu > 0, got L={self.L}, mu={self.mu}")
        if int(self.E) != self.E or self.E < 1:
            raise ConfigError(f"local epochs E must be a positive integer, got {self.E}")
        if len(self.delta) < 1:
            raise ConfigError("delta must list one variance bound per device")
        if any(d < 0 or not math.isfinite(d) for d in self.delta):
            raise ConfigError("delta entries must be finite and nonnegative")
        if self.G < 0 or self.chi < 0 or self.compressor_loss < 0:
            raise ConfigError("G, chi and compressor_loss must be nonnegative")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.delta_mode not in DELTA_MODES:
            raise ConfigError(f"delta_mode must be one of {DELTA_MODES}")

    @classmethod
    def uniform(cls, K: int, delta: float = 0.0, **kw) -> "FlBoundParams":
        return cls(delta=(delta,) * K, **kw)

    @property
    def K(self) -> int:
        return len(self.delta)

    @property
    def a(self) -> float:
        return max(8.0 * self.L / self.mu, float(self.E))


@dataclass(frozen=True)
class BoundTerms:
    u1: float
    u2: float
    u3: float
    a: float
    kse: int


def _check_kse(params: FlBoundParams, kse: int) -> int:
    if int(kse) != kse or not 1 <= kse <= params.K:
        raise ConfigError(f"kse must be an integer in [1, {params.K}], got {kse}")
    return int(kse)


def _mean_sq_delta(params: FlBoundParams, kse: int) -> float:
    # (1/kse) * sum of delta_k^2 over the kse participants
    d = params.delta
    if params.delta_mode == "first":
        return sum(x * x for x in d[:kse]) / kse
    return sum(x * x for x in d) / len(d)


def bound_terms(params: FlBoundParams, kse: int) -> BoundTerms:
    kse = _check_kse(params, kse)
    L, mu, G, E = params.L, params.mu, params.G, params.E
    a = params.a
    u1 = params.compressor_loss / (kse * kse * (E + 1))
    q = 6 * E * L * params.chi + 8 * E * (E - 1) ** 2 * G * G + _mean_sq_delta(params, kse)
    u2 = q / (mu * E * a) + u1
    u3 = a * u1 - (4 * a / (mu * mu)) * G * G + (2 / (mu * E)) * q
    return BoundTerms(u1=u1, u2=u2, u3=u3, a=a, kse=kse)


def _ceil(x: float) -> int:
    n = math.floor(x)
    if x - n <= CEIL_SLACK * max(1.0, abs(x)):
        return int(n)
    return int(n) + 1


def r_min(params: FlBoundParams, kse: int) -> int:
    """Smallest admissible round count for ``kse`` participants (at least 1)."""
    t = bound_terms(params, kse)
    if t.u1 <= 0:
        raise DegenerateBound(f"U1 = 0 at kse={kse}; compressor_loss must be positive")
    target = 2 * params.epsilon / params.L
    disc = (t.u2 - target) ** 2 + 4 * t.u1 * t.u3
    if disc < 0:
        raise DiscriminantNegative(f"discriminant {disc:.6g} < 0 at kse={kse}")
    x = ((target - t.u2) + math.sqrt(disc)) / (2 * t.u1 * params.E)
    return max(1, _ceil(x))


def r_min_oracle(params: FlBoundParams, kse: int, cap: int = ORACLE_CAP,
                 chunk: int = 4096) -> int:
    """Linear scan over R = 1, 2, ... for the first round count on the
    increasing branch of the quadratic where it is nonnegative.

    The branch condition (``y`` at or past the vertex) excludes the region
    below the smaller root, where the quadratic is also nonnegative when
    both roots are positive.
    """
    t = bound_terms(params, kse)
    if t.u1 <= 0:
        raise DegenerateBound(f"U1 = 0 at kse={kse}")
    b = t.u2 - 2 * params.epsilon / params.L
    if b * b + 4 * t.u1 * t.u3 < 0:
        raise DiscriminantNegative(f"no real root at kse={kse}")
    E = params.E
    start = 1
    while start <= cap:
        R = np.arange(start, min(start + chunk, cap + 1), dtype=np.float64)
        y = E * R
        ok = (t.u1 * y * y + b * y - t.u3 >= 0) & (2 * t.u1 * y + b >= 0)
        hit = np.flatnonzero(ok)
        if hit.size:
            return int(R[hit[0]])
        start += chunk
        chunk = min(chunk * 2, 1 << 20)
    raise NoRootInRange(f"no admissible R <= {cap} at kse={kse}")


def learning_rate(params: FlBoundParams, t: int) -> float:
    """Step size (E+1) / (E * mu * (a + t)) for iteration ``t >= 0``."""
    if t < 0:
        raise ConfigError("iteration index must be nonnegative")
    return (params.E + 1) / (params.E * params.mu * (params.a + t))


def optimal_kse(params: FlBoundParams, candidates: Sequence[int] | None = None
                ) -> tuple[int, int]:
    """Return ``(kse_opt, r_min_opt)``, the argmin of the round bound.

    Candidates where the bound is undefined are skipped; ties keep the
    smaller device count.
    """
    ks = range(1, params.K + 1) if candidates is None else candidates
    best: tuple[int, int] | None = None
    for k in ks:
        try:
            r = r_min(params, k)
        except BoundError:
            continue
        if best is None or r < best[1]:
            best = (k, r)
    if best is None:
        raise AllInfeasible(f"round bound undefined for every kse in 1..{params.K}")
    return best


def r_min_curve(params: FlBoundParams) -> list[tuple[int, int | None]]:
    """Round bound for every device count; ``None`` where it is undefined."""
    out = []
    for k in range(1, params.K + 1):
        try:
            out.append((k, r_min(params, k)))
        except BoundError:
            out.append((k, None))
    return out
