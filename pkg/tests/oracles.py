"""Brute-force references built independently of the package internals.

Everything here works in the full 2^N Hilbert space with Kronecker products,
so it shares no code with the sector engine.
"""
from functools import reduce

import numpy as np
import scipy.linalg as sl

_RAISE = np.array([[0.0, 0.0], [1.0, 0.0]])  # |0> -> |1>
_EYE = np.eye(2)


def site_operator(op, site, n):
    """``op`` on 1-based ``site``; site 1 is the least significant bit."""
    factors = [op if s == site else _EYE for s in range(n, 0, -1)]
    return reduce(np.kron, factors)


def dense_hamiltonian(couplings, onsite=None, nnn=None):
    couplings = np.asarray(couplings, dtype=float)
    n = couplings.size + 1
    up = [site_operator(_RAISE, s, n) for s in range(1, n + 1)]
    h = np.zeros((2**n, 2**n))
    for j, k in enumerate(couplings):
        hop = up[j] @ up[j + 1].T
        h -= k * (hop + hop.T)
    if nnn is not None:
        for j, g in enumerate(nnn):
            hop = up[j] @ up[j + 2].T
            h += g * (hop + hop.T)
    if onsite is not None:
        for j, mu in enumerate(onsite):
            h -= mu * (up[j] @ up[j].T)
    return h


def dense_evolve(h, psi, t):
    return sl.expm(-1j * h * t) @ psi


def dense_occupations(psi, n):
    prob = np.abs(psi) ** 2
    idx = np.arange(prob.size)
    return np.array([prob[(idx >> (s - 1)) & 1 == 1].sum() for s in range(1, n + 1)])


def dense_partial_trace(psi, n, keep):
    """Reduced density matrix on ``keep`` with ``keep[0]`` least significant."""
    tensor = np.asarray(psi).reshape([2] * n)  # axis a holds site n - a
    axes = [n - s for s in keep]
    rest = [a for a in range(n) if a not in axes]
    m = np.transpose(tensor, axes[::-1] + rest).reshape(2 ** len(keep), -1)
    return m @ m.conj().T


def open_chain_modes(n):
    """Eigenvectors ``sqrt(2/(n+1)) sin(q pi j/(n+1))`` of a uniform open chain."""
    j = np.arange(1, n + 1)
    return np.sqrt(2.0 / (n + 1)) * np.sin(np.outer(j, j) * np.pi / (n + 1))


def long_time_average(n, start, sites):
    """Infinite-time mean occupation of ``sites`` from ``start`` on a uniform chain."""
    v = open_chain_modes(n)
    return float(sum(np.sum(v[start - 1] ** 2 * v[s - 1] ** 2) for s in sites))
