import itertools
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedalloc import _coalition_py, kernels
from fedalloc.allocation import (
    Assignment,
    allocate,
    coalition_game,
    count_surjections,
    exhaustive_optimum,
    fairness_assignment,
    initial_assignment,
    t_comp,
)
from fedalloc.errors import (
    ConfigError,
    GameDidNotConverge,
    InfeasibleAssignment,
    InstanceTooLarge,
    TooFewChannels,
    ZeroRate,
)
from fedalloc.radio import LinkBudget, rate_table, sample_topology

CRAFTED = np.array([[4e5, 4e5, 1e5],
                    [1e5, 1e5, 4e5]])
# all 6 surjections of channels {0,1,2} onto devices {0,1}, evaluated by hand (Z = 1e6)
CRAFTED_TIMES = {
    (0, 0, 1): 1.25 + 2.5,
    (0, 1, 0): 2.0 + 10.0,
    (1, 0, 0): 2.0 + 10.0,
    (0, 1, 1): 2.5 + 2.0,
    (1, 0, 1): 2.5 + 2.0,
    (1, 1, 0): 10.0 + 5.0,
}


def random_instance(seed, n, S, K=None):
    rng = np.random.default_rng(seed)
    K = K or max(n, 20)
    tab = rate_table(sample_topology(rng, K, 200), LinkBudget(), S, 0, rng)
    sel = sorted(rng.choice(K, n, replace=False).tolist())
    return tab, sel, rng


def test_t_comp_two_devices():
    a = Assignment((0, 1), {0: frozenset({0}), 1: frozenset({1})})
    rates = np.array([[1e5, 7.0], [3.0, 2e5]])
    assert t_comp(a, rates, 1e5) == pytest.approx(1.5, rel=1e-15)


def test_t_comp_single_device_all_channels():
    a = fairness_assignment([0], 4)
    assert t_comp(a, np.full((1, 4), 2.5e5), 1e6) == pytest.approx(1e6 / (4 * 2.5e5))


def test_t_comp_linear_in_z():
    tab, sel, rng = random_instance(0, 4, 9)
    a = initial_assignment(sel, 9, rng)
    assert t_comp(a, tab, 2e6) == pytest.approx(2 * t_comp(a, tab, 1e6), rel=1e-15)


@pytest.mark.parametrize("sets", [
    {0: frozenset({0, 1}), 1: frozenset({1, 2})},  # overlap
    {0: frozenset({0, 1}), 1: frozenset()},  # empty device
    {0: frozenset({0}), 1: frozenset({1})},  # channel 2 unused
])
def test_infeasible_assignments(sets):
    with pytest.raises(InfeasibleAssignment):
        t_comp(Assignment((0, 1), sets), CRAFTED, 1e6)


def test_zero_rate_device():
    a = Assignment((0, 1), {0: frozenset({0, 1}), 1: frozenset({2})})
    rates = CRAFTED.copy()
    rates[1, 2] = 0.0
    with pytest.raises(ZeroRate):
        t_comp(a, rates, 1e6)


@pytest.mark.parametrize("n, S, sizes", [(2, 4, [2, 2]), (3, 4, [2, 1, 1]), (1, 5, [5])])
def test_fairness_sizes(n, S, sizes):
    a = fairness_assignment(list(range(n)), S)
    a.validate(S)
    assert a.sizes() == sizes


def test_too_few_channels():
    with pytest.raises(TooFewChannels):
        fairness_assignment([0, 1, 2], 2)
    with pytest.raises(TooFewChannels):
        initial_assignment([0, 1, 2], 2, np.random.default_rng(0))
    with pytest.raises(TooFewChannels):
        coalition_game(np.ones((3, 2)), [0, 1, 2], 1e6, np.random.default_rng(0))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 8), st.integers(0, 12), st.integers(0, 2**32 - 1))
def test_initial_assignment_feasible(n, extra, seed):
    S = n + extra
    a = initial_assignment(list(range(10, 10 + n)), S, np.random.default_rng(seed))
    a.validate(S)
    b = initial_assignment(list(range(10, 10 + n)), S, np.random.default_rng(seed))
    assert a == b
    if extra == 0:
        assert a.sizes() == [1] * n


def test_exhaustive_crafted_matches_hand_enumeration():
    out = exhaustive_optimum(CRAFTED, [0, 1], 1e6)
    assert out.iterations == 6 == 2**3 - 2
    assert out.t_comp_seconds == pytest.approx(min(CRAFTED_TIMES.values()))
    assert out.assignment.owner() == [0, 0, 1]


def test_game_crafted_reaches_optimum():
    for seed in range(50):
        out = coalition_game(CRAFTED, [0, 1], 1e6, np.random.default_rng(seed))
        assert out.t_comp_seconds == pytest.approx(3.75)


def test_exhaustive_single_device():
    out = exhaustive_optimum(np.array([[1.0, 2.0, 3.0]]), [0], 6.0)
    assert out.iterations == 1 and out.t_comp_seconds == 1.0


def test_exhaustive_two_by_two():
    rates = np.array([[3.0, 1.0], [2.0, 5.0]])
    out = exhaustive_optimum(rates, [0, 1], 1.0)
    assert out.iterations == 2
    assert out.t_comp_seconds == pytest.approx(min(1 / 3 + 1 / 5, 1 / 1 + 1 / 2))


def _brute(rates, sel, z):
    n, S = len(sel), rates.shape[1]
    best = np.inf
    for lab in itertools.product(range(n), repeat=S):
        if len(set(lab)) < n:
            continue
        tot = sum(1.0 / sum(rates[sel[i], s] for s in range(S) if lab[s] == i) for i in range(n))
        best = min(best, z * tot)
    return best


@pytest.mark.parametrize("seed", range(10))
def test_exhaustive_matches_brute_force(seed):
    n, S = 1 + seed % 3, 3 + seed % 4
    tab, sel, _ = random_instance(seed, n, S)
    assert exhaustive_optimum(tab, sel, 1e6).t_comp_seconds == pytest.approx(
        _brute(tab.rates, sel, 1e6), rel=1e-12)


def test_count_surjections():
    assert count_surjections(3, 2) == 6
    assert count_surjections(4, 3) == 36
    assert count_surjections(5, 5) == 120


def test_exhaustive_guard():
    with pytest.raises(InstanceTooLarge):
        exhaustive_optimum(np.ones((5, 15)), list(range(5)), 1.0)


def test_game_single_device():
    tab, sel, rng = random_instance(1, 1, 6)
    out = coalition_game(tab, sel, 1e6, rng)
    assert out.moves_accepted == 0
    assert out.assignment.sizes() == [6]


@pytest.mark.parametrize("seed", range(40))
def test_game_two_by_two_is_optimal(seed):
    tab, sel, rng = random_instance(seed, 2, 2)
    game = coalition_game(tab, sel, 1e6, rng)
    assert game.t_comp_seconds == exhaustive_optimum(tab, sel, 1e6).t_comp_seconds


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10), st.integers(0, 2**32 - 1))
def test_game_invariants(n, extra, seed):
    S = n + extra
    tab, sel, rng = random_instance(seed, n, S)
    out = coalition_game(tab, sel, 1e6, rng)
    out.assignment.validate(S)
    h = out.history
    assert all(b < a for a, b in zip(h, h[1:]))
    assert len(h) == out.moves_accepted + 1
    assert out.t_comp_seconds <= out.initial_t_comp
    assert out.t_comp_seconds == t_comp(out.assignment, tab, 1e6)


@pytest.mark.parametrize("seed", range(20))
def test_every_sweep_prefix_is_feasible(seed):
    tab, sel, rng = random_instance(seed, 5, 15)
    sub = tab.rates[sel]
    init = initial_assignment(sel, 15, rng)
    full = _coalition_py.coalition_sweeps(sub, init.owner(), 1e6, seed, 10_000)
    for cap in range(1, full[2] + 1):
        owner, t, sweeps, *_ = _coalition_py.coalition_sweeps(sub, init.owner(), 1e6, seed, cap)
        a = Assignment.from_owner(sel, owner)
        a.validate(15)
        assert t == t_comp(a, tab, 1e6)


def test_candidates_per_sweep_bounded(monkeypatch):
    tab, sel, rng = random_instance(3, 5, 15)
    calls = []
    orig = _coalition_py._total
    monkeypatch.setattr(_coalition_py, "_total", lambda dev, z: calls.append(1) or orig(dev, z))
    init = initial_assignment(sel, 15, rng)
    _coalition_py.coalition_sweeps(tab.rates[sel], init.owner(), 1e6, 0, 1)
    assert len(calls) - 1 <= 15 * 5


def test_game_sweep_cap():
    tab, sel, rng = random_instance(4, 5, 15)
    init = initial_assignment(sel, 15, np.random.default_rng(0))
    with pytest.raises(GameDidNotConverge):
        # a cap of one sweep cannot both move and confirm convergence here
        coalition_game(tab, sel, 1e6, rng, initial=init, max_sweeps=1)


def test_game_rejects_nonpositive_rates():
    with pytest.raises(ZeroRate):
        coalition_game(np.array([[1.0, 0.0], [1.0, 1.0]]), [0, 1], 1.0, np.random.default_rng(0))


def test_receiver_guard_freezes_single_channel_devices():
    tab, sel, rng = random_instance(5, 5, 15)
    init = initial_assignment(sel, 15, np.random.default_rng(1))
    out = coalition_game(tab, sel, 1e6, rng, initial=init, receiver_guard=True)
    out.assignment.validate(15)
    for before, after in zip(init.sizes(), out.assignment.sizes()):
        if before == 1:
            assert after == 1


def test_allocate_dispatch():
    tab, sel, rng = random_instance(6, 3, 6)
    assert allocate("fairness", tab, sel, 1e6, rng).method == "fairness"
    assert allocate("exhaustive", tab, sel, 1e6, rng).method == "exhaustive"
    with pytest.raises(ConfigError):
        allocate("greedy", tab, sel, 1e6, rng)


@pytest.mark.skipif("cython" not in kernels.BACKENDS, reason="compiled kernel not built")
@pytest.mark.parametrize("guard", [False, True])
def test_backends_bit_identical(guard):
    for seed in range(200):
        n = 1 + seed % 8
        S = n + seed % 13
        tab, sel, _ = random_instance(seed, n, S)
        outs = [coalition_game(tab, sel, 1e6, np.random.default_rng(seed), receiver_guard=guard,
                               backend=b) for b in ("python", "cython")]
        assert outs[0] == outs[1]


def test_splitmix_reference_values():
    # reference outputs of splitmix64 seeded with 0
    s, a = _coalition_py.splitmix64(0)
    s, b = _coalition_py.splitmix64(s)
    assert (a, b) == (0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4)


def test_assignment_rows():
    a = Assignment.from_owner([7, 3], [1, 0, 1])
    assert a.rows(4) == [(4, 7, 1), (4, 3, 0), (4, 3, 2)]


@pytest.mark.xfail(strict=True, reason="from a random start the game beats the fairness split "
                                       "in ~70% of instances, not 95%")
def test_game_beats_fairness_in_95_percent():
    wins = 0
    for seed in range(1000):
        tab, sel, rng = random_instance(seed, 5, 15, K=100)
        game = coalition_game(tab, sel, 1e6, rng).t_comp_seconds
        wins += game <= t_comp(fairness_assignment(sel, 15), tab, 1e6)
    assert wins >= 950


def test_pure_python_override():
    env = dict(os.environ, FEDALLOC_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import fedalloc; print(fedalloc.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
