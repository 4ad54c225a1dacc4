"""Sub-channel assignment for one round: transmission time, baselines,
the coalition game and a brute-force optimum for small instances."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .errors import (
    ConfigError,
    GameDidNotConverge,
    InfeasibleAssignment,
    InstanceTooLarge,
    TooFewChannels,
    ZeroRate,
)
from .radio import RateTable

METHODS = ("coalition", "fairness", "exhaustive")
DEFAULT_MAX_SWEEPS = 10_000
EXHAUSTIVE_GUARD = 10**6


@dataclass(frozen=True)
class Assignment:
    """Partition of sub-channels ``0..S-1`` among the selected devices.

    ``channel_sets[k]`` is the set of sub-channels held by global device ``k``.
    """

    selected_devices: tuple[int, ...]
    channel_sets: Mapping[int, frozenset[int]]

    @classmethod
    def from_owner(cls, selected: Sequence[int], owner: Sequence[int]) -> "Assignment":
        """Build from ``owner[s]`` = position in ``selected`` of the holder of ``s``."""
        selected = tuple(int(k) for k in selected)
        sets: dict[int, set[int]] = {k: set() for k in selected}
        for s, i in enumerate(owner):
            sets[selected[int(i)]].add(s)
        return cls(selected, {k: frozenset(v) for k, v in sets.items()})

    @property
    def n_channels(self) -> int:
        return sum(len(v) for v in self.channel_sets.values())

    def owner(self) -> list[int]:
        pos = {k: i for i, k in enumerate(self.selected_devices)}
        out = [-1] * self.n_channels
        for k, chans in self.channel_sets.items():
            for s in chans:
                out[s] = pos[k]
        return out

    def sizes(self) -> list[int]:
        return [len(self.channel_sets[k]) for k in self.selected_devices]

    def validate(self, S: int) -> None:
        """Raise InfeasibleAssignment unless the sets are disjoint, non-empty
        and cover exactly ``0..S-1``."""
        if len(set(self.selected_devices)) != len(self.selected_devices):
            raise InfeasibleAssignment("selected devices repeat")
        if set(self.channel_sets) != set(self.selected_devices):
            raise InfeasibleAssignment("channel sets must be keyed by exactly the selected devices")
        seen: set[int] = set()
        for k in self.selected_devices:
            chans = self.channel_sets[k]
            if not chans:
                raise InfeasibleAssignment(f"device {k} holds no sub-channel")
            if seen & chans:
                raise InfeasibleAssignment(f"sub-channels {sorted(seen & chans)} assigned twice")
            seen |= chans
        if seen != set(range(S)):
            raise InfeasibleAssignment(f"assignment covers {sorted(seen)}, expected 0..{S - 1}")

    def rows(self, round_index: int) -> list[tuple[int, int, int]]:
        """CSV rows ``(round, device, subchannel)``."""
        return [(round_index, k, s)
                for k in self.selected_devices for s in sorted(self.channel_sets[k])]


@dataclass(frozen=True)
class AllocationOutcome:
    assignment: Assignment
    t_comp_seconds: float
    iterations: int
    moves_accepted: int
    method: str = "coalition"
    history: tuple[float, ...] = ()

    @property
    def initial_t_comp(self) -> float:
        return self.history[0] if self.history else self.t_comp_seconds


def _rates(rate_table) -> np.ndarray:
    r = rate_table.rates if isinstance(rate_table, RateTable) else rate_table
    return np.asarray(r, dtype=np.float64)


def t_comp(assignment: Assignment, rate_table, z_comp_bits: float) -> float:
    """Round upload time: ``Z * sum_k 1 / (sum of k's sub-channel rates)``."""
    rates = _rates(rate_table)
    if not z_comp_bits > 0:
        raise ConfigError("compressed model size must be positive")
    K, S = rates.shape
    assignment.validate(S)
    if any(not 0 <= k < K for k in assignment.selected_devices):
        raise InfeasibleAssignment(f"device index outside rate table with {K} rows")
    acc = 0.0
    for k in assignment.selected_devices:
        row = rates[k].tolist()
        dev = 0.0
        for s in sorted(assignment.channel_sets[k]):
            dev += row[s]
        if not dev > 0:
            raise ZeroRate(f"device {k} has zero summed rate")
        acc += 1.0 / dev
    return z_comp_bits * acc


def _check_counts(selected: Sequence[int], S: int) -> None:
    if len(selected) < 1:
        raise ConfigError("no devices selected")
    if S < len(selected):
        raise TooFewChannels(f"{S} sub-channels cannot serve {len(selected)} devices")


def fairness_assignment(selected: Sequence[int], S: int) -> Assignment:
    """Deal sub-channels round-robin in index order, ignoring channel state."""
    _check_counts(selected, S)
    n = len(selected)
    return Assignment.from_owner(selected, [s % n for s in range(S)])


def initial_assignment(selected: Sequence[int], S: int, rng: np.random.Generator) -> Assignment:
    """Random feasible start: one distinct channel each, the rest uniformly."""
    _check_counts(selected, S)
    n = len(selected)
    perm = rng.permutation(S)
    owner = np.empty(S, dtype=np.int64)
    owner[perm[:n]] = np.arange(n)
    owner[perm[n:]] = rng.integers(0, n, size=S - n)
    return Assignment.from_owner(selected, owner.tolist())


def coalition_game(rate_table, selected: Sequence[int], z_comp_bits: float,
                   rng: np.random.Generator, *, initial: Assignment | None = None,
                   max_sweeps: int = DEFAULT_MAX_SWEEPS, receiver_guard: bool = False,
                   backend: str | None = None) -> AllocationOutcome:
    """Local search over sub-channel moves and swaps between devices.

    Each sweep visits every (sub-channel, device) pair in index order. A
    sub-channel is moved to the proposing device, or swapped with a random
    one of its sub-channels when the holder would otherwise be left empty
    (with ``receiver_guard``, also when the proposer holds only one; this
    freezes single-channel devices at one channel). Candidates are
    kept only on a strict decrease of the round time; the game stops after
    a sweep with no accepted candidate.
    """
    rates = _rates(rate_table)
    S = rates.shape[1]
    _check_counts(selected, S)
    sel = [int(k) for k in selected]
    sub = np.ascontiguousarray(rates[sel])
    if not (np.isfinite(sub).all() and (sub > 0).all()):
        raise ZeroRate("rate table has non-positive entries for a selected device")
    if initial is None:
        initial = initial_assignment(sel, S, rng)
    elif tuple(initial.selected_devices) != tuple(sel):
        raise ConfigError("initial assignment is for a different device set")
    initial.validate(S)
    seed = int(rng.integers(0, 2**64, dtype=np.uint64))
    impl = kernels.BACKENDS[backend] if backend else kernels.BACKENDS[kernels.BACKEND]
    owner, t_final, sweeps, moves, history, converged = impl.coalition_sweeps(
        sub, initial.owner(), float(z_comp_bits), seed, int(max_sweeps),
        bool(receiver_guard))
    if not converged:
        raise GameDidNotConverge(f"no convergence within {max_sweeps} sweeps")
    assignment = Assignment.from_owner(sel, owner)
    return AllocationOutcome(assignment, t_final, sweeps, moves, "coalition", tuple(history))


def count_surjections(S: int, n: int) -> int:
    return sum((-1) ** i * math.comb(n, i) * (n - i) ** S for i in range(n + 1))


def exhaustive_optimum(rate_table, selected: Sequence[int], z_comp_bits: float,
                       guard: int = EXHAUSTIVE_GUARD) -> AllocationOutcome:
    """Minimum round time over every assignment giving each device >= 1 channel."""
    rates = _rates(rate_table)
    S = rates.shape[1]
    _check_counts(selected, S)
    sel = [int(k) for k in selected]
    n = len(sel)
    total = count_surjections(S, n)
    if total > guard or n**S > 20 * guard:
        raise InstanceTooLarge(f"{total} feasible assignments exceed the guard {guard}")
    sub = rates[sel]
    powers = n ** np.arange(S - 1, -1, -1, dtype=np.int64)
    t_best = math.inf
    near: list[tuple[float, list[int]]] = []
    n_feasible = 0
    chunk = 1 << 16
    # every labelling of S channels with n devices, as base-n digits
    for start in range(0, n**S, chunk):
        codes = np.arange(start, min(start + chunk, n**S), dtype=np.int64)
        labels = (codes[:, None] // powers) % n
        onehot = labels[:, :, None] == np.arange(n)
        surj = onehot.any(axis=1).all(axis=1)
        if not surj.any():
            continue
        labels, onehot = labels[surj], onehot[surj]
        n_feasible += len(labels)
        t = z_comp_bits * (1.0 / np.einsum("msn,ns->mn", onehot, sub)).sum(axis=1)
        t_best = min(t_best, float(t.min()))
        near = [x for x in near if x[0] <= t_best * (1 + 1e-12)]
        keep = t <= t_best * (1 + 1e-12)
        near.extend(zip(t[keep].tolist(), labels[keep].tolist()))
    # re-score near-ties with the canonical evaluation so the reported optimum
    # never sits above a partition the game can reach
    best = None
    for _, lab in near:
        cand = Assignment.from_owner(sel, lab)
        tc = t_comp(cand, rates, z_comp_bits)
        if best is None or tc < best[1]:
            best = (cand, tc)
    return AllocationOutcome(best[0], best[1], n_feasible, 0, "exhaustive")


def allocate(method: str, rate_table, selected: Sequence[int], z_comp_bits: float,
             rng: np.random.Generator, **kw) -> AllocationOutcome:
    if method == "coalition":
        return coalition_game(rate_table, selected, z_comp_bits, rng, **kw)
    S = _rates(rate_table).shape[1]
    if method == "fairness":
        a = fairness_assignment(selected, S)
        return AllocationOutcome(a, t_comp(a, rate_table, z_comp_bits), 0, 0, "fairness")
    if method == "exhaustive":
        return exhaustive_optimum(rate_table, selected, z_comp_bits)
    raise ConfigError(f"unknown allocation method {method!r}; expected one of {METHODS}")
