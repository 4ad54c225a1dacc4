"""Toy federated training under modeled compression distortion.

Each device holds a quadratic ``f_k(w) = 0.5 * ||w - b_k||^2`` (so L = mu = 1
and the optimum is the data-weighted mean of the anchors). Uploaded models
are perturbed by Gaussian noise whose scale shrinks with the number of
participants, then averaged with data-size weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bound import FlBoundParams, learning_rate
from .errors import ConfigError, EmptyParticipantSet

DEBOUNCE_ROUNDS = 10


@dataclass(frozen=True)
class SyntheticTask:
    anchors: np.ndarray  # (K, d)
    samples: np.ndarray  # (K,) data sizes D_k
    noise_scale: float = 0.0
    w0: np.ndarray | None = None

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.anchors, dtype=float))
        D = np.asarray(self.samples, dtype=float)
        if D.shape != (a.shape[0],) or not (D > 0).all():
            raise ConfigError("need one positive sample count per device")
        if self.noise_scale < 0:
            raise ConfigError("noise_scale must be nonnegative")
        object.__setattr__(self, "anchors", a)
        object.__setattr__(self, "samples", D)
        w0 = np.zeros(a.shape[1]) if self.w0 is None else np.asarray(self.w0, dtype=float)
        object.__setattr__(self, "w0", w0)

    @property
    def K(self) -> int:
        return self.anchors.shape[0]

    @property
    def d(self) -> int:
        return self.anchors.shape[1]

    @property
    def w_star(self) -> np.ndarray:
        return self.samples @ self.anchors / self.samples.sum()

    def local_loss(self, w, k):
        diff = np.asarray(w) - self.anchors[k]
        return 0.5 * np.sum(diff * diff, axis=-1)

    def global_loss(self, w) -> float:
        """Average local loss over all K devices, evaluated at ``w``."""
        diff = np.asarray(w)[None, :] - self.anchors
        return float(0.5 * np.sum(diff * diff) / self.K)


def make_task(K: int = 100, d: int = 10, seed: int = 0, offset: float = 3.0,
              noise_scale: float = 0.1, samples=None) -> SyntheticTask:
    """Anchors ~ N(offset * 1, I); training starts from the origin."""
    rng = np.random.default_rng(seed)
    anchors = offset + rng.standard_normal((K, d))
    D = np.full(K, 100.0) if samples is None else samples
    return SyntheticTask(anchors, D, noise_scale)


@dataclass(frozen=True)
class FlRunConfig:
    K: int = 100
    kse: int = 50
    E: int = 1
    rounds: int = 500
    seed: int = 0
    compressor_loss: float = 0.5
    lr: str | float = "decay"  # "decay" or a constant step size
    L: float = 1.0
    mu: float = 1.0
    threshold: float = 0.2

    def __post_init__(self):
        if not 1 <= self.kse <= self.K:
            raise ConfigError(f"need 1 <= kse <= K, got kse={self.kse}, K={self.K}")
        if self.rounds < 1 or self.E < 1:
            raise ConfigError("rounds and E must be positive")
        if self.compressor_loss < 0:
            raise ConfigError("compressor_loss must be nonnegative")
        if self.lr != "decay" and not (isinstance(self.lr, (int, float)) and self.lr > 0):
            raise ConfigError(f"lr must be 'decay' or a positive number, got {self.lr!r}")

    def schedule(self) -> Callable[[int], float]:
        if self.lr == "decay":
            p = FlBoundParams(L=self.L, mu=self.mu, G=0.0, delta=(0.0,), E=self.E, chi=0.0,
                              compressor_loss=0.0, epsilon=1.0)
            return lambda t: learning_rate(p, t)
        eta = float(self.lr)
        return lambda t: eta


@dataclass
class Trajectory:
    distance: list[float] = field(default_factory=list)
    global_loss: list[float] = field(default_factory=list)

    def __len__(self):
        return len(self.distance)

    def rows(self):
        """CSV rows ``(round, distance, global_loss)``; rounds count from 1."""
        return [(i + 1, d, g) for i, (d, g) in enumerate(zip(self.distance, self.global_loss))]


def local_update(w_init, task: SyntheticTask, k, E: int, eta, rng: np.random.Generator,
                 t0: int = 0) -> np.ndarray:
    """``E`` noisy gradient steps on ``f_k`` from ``w_init``.

    ``k`` may be one device or an array of devices (updated independently,
    returning one row each). ``eta`` is a step size or a callable of the
    global iteration index ``t0 + e``.
    """
    if E < 1:
        raise ConfigError("E must be >= 1")
    step = eta if callable(eta) else (lambda t: eta)
    b = task.anchors[k]
    w = np.broadcast_to(np.asarray(w_init, dtype=float), b.shape).copy()
    for e in range(E):
        g = w - b
        if task.noise_scale > 0:
            g = g + task.noise_scale * rng.standard_normal(b.shape)
        w -= step(t0 + e) * g
    return w


def distortion_std(kse: int, compressor_loss: float) -> float:
    return math.sqrt(2.0 * compressor_loss) / kse


def apply_distortion(w, kse: int, compressor_loss: float, rng: np.random.Generator):
    """Add i.i.d. N(0, 2 * loss / kse^2) noise to every entry of ``w``."""
    if kse < 1:
        raise ConfigError("kse must be >= 1")
    w = np.asarray(w, dtype=float)
    sigma = distortion_std(kse, compressor_loss)
    if sigma == 0:
        return w.copy()
    return w + sigma * rng.standard_normal(w.shape)


def aggregate(models, weights) -> np.ndarray:
    """Data-size weighted average of participant models."""
    models = np.asarray(models, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if models.ndim == 1:
        models = models[None, :]
    if len(models) == 0 or len(weights) == 0:
        raise EmptyParticipantSet("no participant models to aggregate")
    if len(models) != len(weights):
        raise ConfigError(f"{len(models)} models but {len(weights)} weights")
    if not (weights > 0).all():
        raise ConfigError("aggregation weights must be positive")
    return (weights / weights.sum()) @ models


def run_fl(config: FlRunConfig, task: SyntheticTask) -> Trajectory:
    if task.K != config.K:
        raise ConfigError(f"task has {task.K} devices, config expects {config.K}")
    rng = np.random.default_rng(config.seed)
    eta = config.schedule()
    w_star = task.w_star
    w = task.w0.copy()
    traj = Trajectory()
    for r in range(config.rounds):
        sel = np.sort(rng.choice(config.K, size=config.kse, replace=False))
        local = local_update(w, task, sel, config.E, eta, rng, t0=r * config.E)
        local = apply_distortion(local, config.kse, config.compressor_loss, rng)
        w = aggregate(local, task.samples[sel])
        traj.distance.append(float(np.linalg.norm(w - w_star)))
        traj.global_loss.append(task.global_loss(w))
    return traj


def rounds_to_accuracy(distances, threshold: float = 0.2,
                       debounce: int = DEBOUNCE_ROUNDS) -> int | None:
    """First round (1-based) from which the distance stays below ``threshold``
    for ``debounce`` consecutive rounds; ``None`` if that never happens."""
    if not threshold > 0:
        raise ConfigError("threshold must be positive")
    d = np.asarray(getattr(distances, "distance", distances), dtype=float)
    below = d < threshold
    run = 0
    for i, ok in enumerate(below):
        run = run + 1 if ok else 0
        if run == debounce:
            return i - debounce + 2
    return None


def median_trajectory(trajectories) -> np.ndarray:
    return np.median(np.array([t.distance for t in trajectories]), axis=0)


def calibrate_bound_params(task: SyntheticTask, config: FlRunConfig, epsilon: float,
                           calibration_rounds: int = 50) -> FlBoundParams:
    """Bound constants consistent with the synthetic task.

    G^2 is the largest squared stochastic gradient seen over a short
    distortion-free, full-participation run; delta_k^2 = noise_scale^2 * d;
    chi sums the initial local loss gaps.
    """
    rng = np.random.default_rng(config.seed)
    eta = config.schedule()
    w = task.w0.copy()
    g2 = 0.0
    all_k = np.arange(task.K)
    for r in range(calibration_rounds):
        local = np.broadcast_to(w, task.anchors.shape).copy()
        for e in range(config.E):
            g = local - task.anchors
            if task.noise_scale > 0:
                g = g + task.noise_scale * rng.standard_normal(g.shape)
            g2 = max(g2, float(np.max(np.sum(g * g, axis=1))))
            local -= eta(r * config.E + e) * g
        w = aggregate(local, task.samples)
    chi = float(sum(task.local_loss(task.w0, k) for k in all_k))
    delta = task.noise_scale * math.sqrt(task.d)
    return FlBoundParams(L=config.L, mu=config.mu, G=math.sqrt(g2), delta=(delta,) * task.K,
                         E=config.E, chi=chi, compressor_loss=config.compressor_loss,
                         epsilon=epsilon)
