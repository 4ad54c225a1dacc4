"""Pure-Python coalition-game kernel (fallback for the compiled ``_coalition``).

Must stay arithmetic-for-arithmetic identical to ``_coalition.pyx``: device
rates are summed over owned sub-channels in ascending index order, and the
round time is ``z * sum(1 / rate_k)`` accumulated in device order.
"""

MASK64 = (1 << 64) - 1


def splitmix64(state):
    """Advance a splitmix64 state; returns ``(new_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def _device_rate(row, owner, k):
    acc = 0.0
    for s in range(len(owner)):
        if owner[s] == k:
            acc += row[s]
    return acc


def _total(dev_rates, z):
    acc = 0.0
    for r in dev_rates:
        acc += 1.0 / r
    return z * acc


def t_comp_owner(rates, owner, z):
    rows = rates.tolist() if hasattr(rates, "tolist") else rates
    owner = list(owner)
    return _total([_device_rate(rows[k], owner, k) for k in range(len(rows))], z)


def coalition_sweeps(rates, owner, z, seed, max_sweeps, receiver_guard=False):
    """Run sweeps until one accepts no move.

    ``rates`` is (n, S) for the n participating devices; ``owner[s]`` is the
    local index of the device holding sub-channel ``s``. Returns
    ``(owner, t_final, sweeps, moves, history, converged)`` where ``history``
    lists the initial time followed by every accepted time.

    A candidate is a swap when the current holder keeps only one sub-channel,
    and also when the proposer holds only one if ``receiver_guard`` is set.
    """
    rows = rates.tolist() if hasattr(rates, "tolist") else [list(r) for r in rates]
    owner = [int(o) for o in owner]
    n = len(rows)
    S = len(owner)
    counts = [0] * n
    for o in owner:
        counts[o] += 1
    dev = [_device_rate(rows[k], owner, k) for k in range(n)]
    cur = _total(dev, z)
    history = [cur]
    state = int(seed) & MASK64
    sweeps = 0
    moves = 0
    while sweeps < max_sweeps:
        sweeps += 1
        accepted = 0
        for s in range(S):
            for k in range(n):
                j = owner[s]
                if k == j:
                    continue
                if counts[j] == 1 or (receiver_guard and counts[k] == 1):
                    state, r = splitmix64(state)
                    idx = r % counts[k]
                    s2 = -1
                    for c in range(S):
                        if owner[c] == k:
                            if idx == 0:
                                s2 = c
                                break
                            idx -= 1
                    owner[s] = k
                    owner[s2] = j
                    swapped = True
                else:
                    owner[s] = k
                    counts[j] -= 1
                    counts[k] += 1
                    s2 = -1
                    swapped = False
                old_j, old_k = dev[j], dev[k]
                dev[j] = _device_rate(rows[j], owner, j)
                dev[k] = _device_rate(rows[k], owner, k)
                new = _total(dev, z)
                if new < cur:
                    cur = new
                    moves += 1
                    accepted += 1
                    history.append(cur)
                else:
                    dev[j], dev[k] = old_j, old_k
                    owner[s] = j
                    if swapped:
                        owner[s2] = k
                    else:
                        counts[j] += 1
                        counts[k] -= 1
        if accepted == 0:
            return owner, cur, sweeps, moves, history, True
    return owner, cur, sweeps, moves, history, False
