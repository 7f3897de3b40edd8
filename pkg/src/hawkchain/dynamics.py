"""Exact few-excitation dynamics of the XY chain.

States are stored sector by sector (fixed excitation number) and evolved
through cached eigendecompositions of the sector blocks. Single-excitation
problems on long chains use a dedicated tridiagonal solver.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np
import scipy.linalg as sl

from .exceptions import DimensionMismatch, InvalidParameter
from .lattice import HamiltonianSpec, sector_basis, sector_masks, sector_matrix, single_particle_matrix
from .observables import DensityMatrix
from .tables import write_table

NORM_TOL = 1e-10
LARGE_CHAIN = 64


@lru_cache(maxsize=128)
def _mask_index(n: int, k: int) -> dict:
    return {m: i for i, m in enumerate(sector_masks(n, k))}


@dataclass(frozen=True, eq=False)
class SectorState:
    """Pure state ``sum_k |psi_k>`` with one amplitude vector per populated sector."""

    n: int
    sectors: Mapping[int, np.ndarray]

    def __post_init__(self):
        clean = {}
        for k, amp in sorted(self.sectors.items()):
            amp = np.array(amp, dtype=complex)
            if amp.shape != (len(sector_masks(self.n, k)),):
                raise DimensionMismatch(f"sector {k} amplitude has shape {amp.shape}")
            if np.any(amp != 0):
                amp.setflags(write=False)
                clean[int(k)] = amp
        object.__setattr__(self, "sectors", clean)
        if abs(self.norm() - 1.0) > NORM_TOL:
            raise InvalidParameter(f"state norm {self.norm()!r} differs from 1")

    def norm(self) -> float:
        return float(np.sqrt(sum(np.vdot(a, a).real for a in self.sectors.values())))

    def weights(self) -> dict:
        return {k: float(np.vdot(a, a).real) for k, a in self.sectors.items()}

    def amplitude(self, bitstring: str) -> complex:
        mask, k = _parse_bits(bitstring, self.n)
        if k not in self.sectors:
            return 0j
        return complex(self.sectors[k][_mask_index(self.n, k)[mask]])

    def to_dense(self) -> np.ndarray:
        if self.n > 20:
            raise InvalidParameter("dense vector limited to N <= 20")
        out = np.zeros(2**self.n, dtype=complex)
        for k, a in self.sectors.items():
            out[list(sector_masks(self.n, k))] = a
        return out

    @classmethod
    def from_dense(cls, vec, n: int) -> "SectorState":
        vec = np.asarray(vec, dtype=complex)
        if vec.shape != (2**n,):
            raise DimensionMismatch("dense vector length must be 2**n")
        return cls(n, {k: vec[list(sector_masks(n, k))] for k in range(n + 1)})


def _parse_bits(bitstring: str, n: int | None = None) -> tuple[int, int]:
    if not bitstring or set(bitstring) - {"0", "1"}:
        raise InvalidParameter(f"bad occupation pattern {bitstring!r}")
    if n is not None and len(bitstring) != n:
        raise DimensionMismatch(f"pattern has {len(bitstring)} sites, chain has {n}")
    mask = sum(1 << i for i, c in enumerate(bitstring) if c == "1")
    return mask, bitstring.count("1")


def basis_state(bitstring: str) -> SectorState:
    """Product state; character i of ``bitstring`` is the occupation of site i+1."""
    n = len(bitstring)
    mask, k = _parse_bits(bitstring)
    amp = np.zeros(len(sector_masks(n, k)), dtype=complex)
    amp[_mask_index(n, k)[mask]] = 1.0
    return SectorState(n, {k: amp})


def bell_pair_state(n: int) -> SectorState:
    """``(|00> + |11>)/sqrt(2)`` on sites 1, 2 with the rest of the chain empty."""
    if n < 2:
        raise InvalidParameter("Bell pair needs at least two sites")
    pair = np.zeros(len(sector_masks(n, 2)), dtype=complex)
    pair[_mask_index(n, 2)[0b11]] = 1 / np.sqrt(2)
    return SectorState(n, {0: np.array([1 / np.sqrt(2)]), 2: pair})


class PropagatorCache:
    """Eigendecompositions ``(E, V)`` of the sector blocks of ``h``.

    Built eagerly for the requested sectors; read-only afterwards.
    """

    def __init__(self, h: HamiltonianSpec, sectors: Iterable[int]):
        self.h = h
        self._eig = {}
        for k in sorted(set(sectors)):
            e, v = sl.eigh(sector_matrix(h, k))
            e.setflags(write=False)
            v.setflags(write=False)
            self._eig[k] = (e, v)

    @property
    def sectors(self) -> tuple:
        return tuple(self._eig)

    def __getitem__(self, k: int):
        return self._eig[k]

    def reconstruction_error(self, k: int) -> float:
        e, v = self._eig[k]
        return float(np.max(np.abs((v * e) @ v.T - sector_matrix(self.h, k)), initial=0.0))


def _check_match(h: HamiltonianSpec, state: SectorState):
    if h.n != state.n:
        raise DimensionMismatch(f"Hamiltonian has {h.n} sites, state has {state.n}")


def evolve(h: HamiltonianSpec, state: SectorState, t: float, cache: PropagatorCache | None = None) -> SectorState:
    """``exp(-i H t)`` applied sector by sector."""
    _check_match(h, state)
    if not np.isfinite(t):
        raise InvalidParameter("time must be finite")
    if cache is None or (cache.h is not h and cache.h != h) or set(state.sectors) - set(cache.sectors):
        cache = PropagatorCache(h, state.sectors)
    out = {}
    for k, a in state.sectors.items():
        e, v = cache[k]
        out[k] = v @ (np.exp(-1j * e * t) * (v.T @ a))
    return SectorState(state.n, out)


def evolve_many(h: HamiltonianSpec, state: SectorState, times) -> list[SectorState]:
    cache = PropagatorCache(h, state.sectors)
    return [evolve(h, state, float(t), cache) for t in times]


def single_particle_eig(h: HamiltonianSpec):
    """Eigenpairs of the one-excitation block; tridiagonal solver on long NN-only chains."""
    if h.n > LARGE_CHAIN and h.nnn_couplings is None:
        return sl.eigh_tridiagonal(-h.profile.onsite, -h.profile.couplings)
    return sl.eigh(single_particle_matrix(h))


def single_particle_amplitudes(h: HamiltonianSpec, times, initial) -> np.ndarray:
    """Amplitudes ``psi_j(t)`` (shape ``len(times) x N``) of a one-excitation state.

    ``initial`` is a 1-based site index, a length-N amplitude vector, or a
    :class:`SectorState` whose only populated sector is k = 1.
    """
    n = h.n
    if isinstance(initial, SectorState):
        _check_match(h, initial)
        if set(initial.sectors) != {1}:
            raise InvalidParameter("single-particle propagation needs a pure one-excitation state")
        psi0 = np.asarray(initial.sectors[1])
    elif np.ndim(initial) == 0:
        site = int(initial)
        if not 1 <= site <= n:
            raise InvalidParameter(f"site {site} outside 1..{n}")
        psi0 = np.zeros(n, dtype=complex)
        psi0[site - 1] = 1.0
    else:
        psi0 = np.asarray(initial, dtype=complex)
        if psi0.shape != (n,):
            raise DimensionMismatch("initial amplitude vector must have N entries")
    e, v = single_particle_eig(h)
    c0 = v.T @ psi0
    t = np.asarray(times, dtype=float).reshape(-1)
    return (np.exp(-1j * np.outer(t, e)) * c0) @ v.T


def single_particle_propagator(h: HamiltonianSpec, times, initial) -> np.ndarray:
    """Occupations ``p_j(t)`` for a single excitation, shape ``len(times) x N``."""
    return np.abs(single_particle_amplitudes(h, times, initial)) ** 2


def occupations(state: SectorState) -> np.ndarray:
    """``p_j = <n_j>`` for j = 1..N."""
    p = np.zeros(state.n)
    for k, a in state.sectors.items():
        if k == 0:
            continue
        occ = sector_basis(state.n, k)
        p += np.bincount(occ.ravel(), weights=np.repeat(np.abs(a) ** 2, k), minlength=state.n)
    return np.clip(p, 0.0, 1.0)


def _normalize_subset(subset, n: int) -> tuple:
    sites = tuple(int(s) for s in subset)
    if not sites:
        raise InvalidParameter("subset must be nonempty")
    if len(set(sites)) != len(sites) or min(sites) < 1 or max(sites) > n:
        raise InvalidParameter(f"subset {sites} invalid for a {n}-site chain")
    return sites


def reduced_density_matrix(state: SectorState, subset) -> DensityMatrix:
    """Partial trace over the complement of ``subset`` (1-based sites).

    Global basis states are split into (subset pattern, complement pattern);
    amplitudes sharing a complement pattern interfere, also across sectors.
    """
    sites = _normalize_subset(subset, state.n)
    pos = np.full(state.n, -1)
    pos[np.array(sites) - 1] = np.arange(len(sites))
    weight = np.where(pos >= 0, 1 << np.clip(pos, 0, None), 0)
    sub_bits = sum(1 << (s - 1) for s in sites)

    keys: dict[int, int] = {}
    rows, cols, vals = [], [], []
    for k, a in state.sectors.items():
        occ = sector_basis(state.n, k)
        sub = weight[occ].sum(axis=1) if k else np.zeros(1, dtype=int)
        for m, s, x in zip(sector_masks(state.n, k), sub, a):
            if x == 0:
                continue
            rows.append(keys.setdefault(m & ~sub_bits, len(keys)))
            cols.append(int(s))
            vals.append(x)
    psi = np.zeros((len(keys), 2 ** len(sites)), dtype=complex)
    psi[rows, cols] = vals
    rho = psi.T @ psi.conj()
    return DensityMatrix((rho + rho.conj().T) / 2, sites)


def write_trajectory(path, times, p) -> None:
    """Rows ``(t_ns, site, p)``."""
    p = np.asarray(p)
    rows = ((float(t), j + 1, float(p[i, j])) for i, t in enumerate(times) for j in range(p.shape[1]))
    write_table(path, ("t_ns", "site", "p"), rows)
