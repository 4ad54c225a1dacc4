# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled coalition-game kernel. Mirrors ``_coalition_py`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()


cdef inline uint64_t _splitmix64(uint64_t* state) nogil:
    cdef uint64_t z
    state[0] += <uint64_t>0x9E3779B97F4A7C15ULL
    z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _device_rate(const double[:, ::1] rates, const int64_t[::1] owner,
                                Py_ssize_t k) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t s
    for s in range(owner.shape[0]):
        if owner[s] == k:
            acc += rates[k, s]
    return acc


cdef inline double _total(const double[::1] dev, double z) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t k
    for k in range(dev.shape[0]):
        acc += 1.0 / dev[k]
    return z * acc


def t_comp_owner(rates, owner, double z):
    cdef const double[:, ::1] r = np.ascontiguousarray(rates, dtype=np.float64)
    cdef const int64_t[::1] o = np.ascontiguousarray(owner, dtype=np.int64)
    cdef Py_ssize_t k, n = r.shape[0]
    dev = np.empty(n, dtype=np.float64)
    cdef double[::1] d = dev
    for k in range(n):
        d[k] = _device_rate(r, o, k)
    return _total(d, z)


def coalition_sweeps(rates, owner_init, double z, uint64_t seed, Py_ssize_t max_sweeps,
                     bint receiver_guard=False):
    cdef const double[:, ::1] r = np.ascontiguousarray(rates, dtype=np.float64)
    owner_arr = np.array(owner_init, dtype=np.int64)
    cdef int64_t[::1] owner = owner_arr
    cdef Py_ssize_t n = r.shape[0]
    cdef Py_ssize_t S = owner.shape[0]
    counts_arr = np.zeros(n, dtype=np.int64)
    dev_arr = np.empty(n, dtype=np.float64)
    cdef int64_t[::1] counts = counts_arr
    cdef double[::1] dev = dev_arr
    cdef Py_ssize_t s, k, c, j, s2
    cdef uint64_t state = seed
    cdef uint64_t idx
    cdef double cur, new, old_j, old_k
    cdef Py_ssize_t sweeps = 0, moves = 0, accepted
    cdef bint swapped

    for s in range(S):
        counts[owner[s]] += 1
    for k in range(n):
        dev[k] = _device_rate(r, owner, k)
    cur = _total(dev, z)
    history = [cur]

    while sweeps < max_sweeps:
        sweeps += 1
        accepted = 0
        for s in range(S):
            for k in range(n):
                j = owner[s]
                if k == j:
                    continue
                if counts[j] == 1 or (receiver_guard and counts[k] == 1):
                    idx = _splitmix64(&state) % <uint64_t>counts[k]
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
                old_j = dev[j]
                old_k = dev[k]
                dev[j] = _device_rate(r, owner, j)
                dev[k] = _device_rate(r, owner, k)
                new = _total(dev, z)
                if new < cur:
                    cur = new
                    moves += 1
                    accepted += 1
                    history.append(cur)
                else:
                    dev[j] = old_j
                    dev[k] = old_k
                    owner[s] = j
                    if swapped:
                        owner[s2] = k
                    else:
                        counts[j] += 1
                        counts[k] -= 1
        if accepted == 0:
            return owner_arr.tolist(), cur, sweeps, moves, history, True
    return owner_arr.tolist(), cur, sweeps, moves, history, False
