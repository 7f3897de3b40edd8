"""Coupling profiles and the number-conserving XY chain Hamiltonian.

Sites are numbered 1..N in the public API and 0..N-1 internally. Bond ``j``
(1-based) joins sites ``j`` and ``j+1``; ``couplings[j-1]`` stores its hopping
strength. Occupation patterns are ordered by ascending integer value with
site 1 as the least significant bit.

The Hamiltonian is::

    H = -sum_j kappa_j (s+_j s-_{j+1} + h.c.)
        + sum_j g_j (s+_j s-_{j+2} + h.c.)
        - sum_j mu_j n_j
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .exceptions import DimensionMismatch, InvalidParameter
from .units import angular_to_mhz, mhz_to_angular


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MetricSpec:
    """Static metric ``ds^2 = f(x) dt^2 - 2 dt dx`` sampled on a lattice.

    ``kind`` is ``"tanh"`` (``f = beta*tanh(eta*x)/eta``, horizon at x=0) or
    ``"tabulated"`` (cubic interpolation through ``xs``, ``fs``).
    Positions are measured so that site ``j`` sits at ``x_j = (j - j_h)*d``.
    """

    kind: str
    d: float = 1.0
    j_h: int = 1
    beta: float = 0.0
    eta: float = 0.0
    xs: Optional[np.ndarray] = None
    fs: Optional[np.ndarray] = None
    _spline: Optional[CubicSpline] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.d <= 0:
            raise InvalidParameter("lattice constant d must be positive")
        if self.kind == "tanh":
            if self.beta <= 0 or self.eta <= 0:
                raise InvalidParameter("tanh metric needs beta > 0 and eta > 0")
        elif self.kind == "tabulated":
            if self.xs is None or self.fs is None:
                raise InvalidParameter("tabulated metric needs xs and fs")
            xs = _frozen(self.xs)
            fs = _frozen(self.fs)
            if xs.shape != fs.shape or xs.size < 4:
                raise InvalidParameter("xs and fs must be equal-length with at least 4 samples")
            if np.any(np.diff(xs) <= 0):
                raise InvalidParameter("xs must be strictly increasing")
            nonzero = np.sign(fs[fs != 0])
            changes = np.count_nonzero(np.diff(nonzero))
            if changes != 1 or nonzero[0] > 0:
                raise InvalidParameter("f must change sign exactly once, from negative to positive")
            object.__setattr__(self, "xs", xs)
            object.__setattr__(self, "fs", fs)
            object.__setattr__(self, "_spline", CubicSpline(xs, fs))
        else:
            raise InvalidParameter(f"unknown metric kind {self.kind!r}")

    @classmethod
    def tanh(cls, beta: float, eta_d: float, j_h: int, d: float = 1.0) -> "MetricSpec":
        """tanh metric from the dimensionless product ``eta*d``."""
        return cls(kind="tanh", beta=beta, eta=eta_d / d, d=d, j_h=j_h)

    @classmethod
    def tabulated(cls, xs, fs, j_h: int, d: float = 1.0) -> "MetricSpec":
        return cls(kind="tabulated", xs=xs, fs=fs, d=d, j_h=j_h)

    def f(self, x):
        if self.kind == "tanh":
            return self.beta * np.tanh(self.eta * np.asarray(x, dtype=float)) / self.eta
        x = np.asarray(x, dtype=float)
        lo, hi = self.xs[0], self.xs[-1]
        tol = 1e-12 * max(1.0, abs(lo), abs(hi))
        if np.any(x < lo - tol) or np.any(x > hi + tol):
            raise InvalidParameter(f"tabulated metric covers [{lo}, {hi}], requested outside it")
        return self._spline(x)

    def horizon(self) -> float:
        """Position x_h of the root of f."""
        if self.kind == "tanh":
            return 0.0
        i = int(np.flatnonzero((self.fs[:-1] < 0) & (self.fs[1:] >= 0))[0])
        if self.fs[i + 1] == 0:
            return float(self.xs[i + 1])
        return float(brentq(self._spline, self.xs[i], self.xs[i + 1], xtol=1e-14))


@dataclass(frozen=True)
class CouplingProfile:
    """Bond hoppings ``couplings`` (N-1) and site potentials ``onsite`` (N), rad/ns."""

    couplings: np.ndarray
    onsite: np.ndarray

    def __post_init__(self):
        c = _frozen(self.couplings)
        mu = _frozen(self.onsite)
        if c.ndim != 1 or mu.ndim != 1 or mu.size < 2 or c.size != mu.size - 1:
            raise InvalidParameter("need N >= 2 sites with N-1 couplings")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(mu))):
            raise InvalidParameter("couplings and potentials must be finite")
        object.__setattr__(self, "couplings", c)
        object.__setattr__(self, "onsite", mu)

    @property
    def site_count(self) -> int:
        return self.onsite.size

    @classmethod
    def from_couplings(cls, couplings) -> "CouplingProfile":
        couplings = np.asarray(couplings, dtype=float)
        return cls(couplings, np.zeros(couplings.size + 1))

    def with_signs(self, signs) -> "CouplingProfile":
        return CouplingProfile(self.couplings * np.asarray(signs, dtype=float), self.onsite)

    def __eq__(self, other):
        if not isinstance(other, CouplingProfile):
            return NotImplemented
        return np.array_equal(self.couplings, other.couplings) and np.array_equal(self.onsite, other.onsite)

    def __hash__(self):
        return hash((self.couplings.tobytes(), self.onsite.tobytes()))


@dataclass(frozen=True)
class HamiltonianSpec:
    profile: CouplingProfile
    nnn_couplings: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.nnn_couplings is not None:
            g = _frozen(self.nnn_couplings)
            if g.shape != (max(self.n - 2, 0),) or not np.all(np.isfinite(g)):
                raise InvalidParameter("next-nearest-neighbour couplings must be N-2 finite values")
            object.__setattr__(self, "nnn_couplings", g)

    @property
    def n(self) -> int:
        return self.profile.site_count

    def __eq__(self, other):
        if not isinstance(other, HamiltonianSpec):
            return NotImplemented
        a, b = self.nnn_couplings, other.nnn_couplings
        same_nnn = (a is None and b is None) or (a is not None and b is not None and np.array_equal(a, b))
        return self.profile == other.profile and same_nnn

    def __hash__(self):
        nnn = None if self.nnn_couplings is None else self.nnn_couplings.tobytes()
        return hash((self.profile, nnn))


def _check_bond_count(n: int, minimum: int = 2):
    if int(n) != n or n < minimum:
        raise InvalidParameter(f"need at least {minimum} sites, got {n}")


def tanh_profile(beta: float, eta_d: float, j_h: int, n: int) -> CouplingProfile:
    """``kappa_j = beta*tanh((j - j_h + 1/2)*eta_d) / (4*eta_d)`` for j = 1..n-1."""
    _check_bond_count(n)
    if beta <= 0 or eta_d <= 0:
        raise InvalidParameter("beta and eta_d must be positive")
    if not 1 <= j_h <= n:
        raise InvalidParameter(f"horizon index {j_h} outside 1..{n}")
    j = np.arange(1, n)
    return CouplingProfile.from_couplings(beta * np.tanh((j - j_h + 0.5) * eta_d) / (4 * eta_d))


def flat_profile(kappa: float, n: int) -> CouplingProfile:
    _check_bond_count(n)
    if not math.isfinite(kappa):
        raise InvalidParameter("kappa must be finite")
    return CouplingProfile.from_couplings(np.full(n - 1, float(kappa)))


def centered_profile(beta: float, eta_d: float, n: int = 10) -> CouplingProfile:
    """Black hole in the middle of the chain, horizons at sites 4 and 7.

    ``kappa_j = beta*(tanh((j-13/2)*eta_d) - tanh((j-7/2)*eta_d) + 1) / (4*eta_d)``,
    negative on the interior bonds 4..6 and positive outside.
    """
    _check_bond_count(n, 8)
    if beta <= 0 or eta_d <= 0:
        raise InvalidParameter("beta and eta_d must be positive")
    j = np.arange(1, n)
    bracket = np.tanh((j - 6.5) * eta_d) - np.tanh((j - 3.5) * eta_d) + 1.0
    return CouplingProfile.from_couplings(beta * bracket / (4 * eta_d))


def profile_from_metric(metric: MetricSpec, n: int) -> CouplingProfile:
    """Bond average ``kappa_j = (f(x_{j+1}) + f(x_j)) / (8d)`` with ``x_j = (j - j_h)*d``."""
    _check_bond_count(n)
    x = (np.arange(1, n + 1) - metric.j_h) * metric.d
    f = metric.f(x)
    return CouplingProfile.from_couplings((f[1:] + f[:-1]) / (8 * metric.d))


def disorder_hamiltonian(profile: CouplingProfile, w_nnn: float, w_mu: float, seed: int) -> HamiltonianSpec:
    """Add uniform next-nearest-neighbour hoppings and on-site shifts.

    Stream: ``numpy.random.Generator(PCG64(seed))`` draws N-2 values from
    ``U[-w_nnn, w_nnn]`` then N values from ``U[-w_mu, w_mu]``. Both draws
    always happen so the mu stream does not depend on ``w_nnn``; a zero
    width yields exact zeros (no NNN term when ``w_nnn = 0``).
    """
    if w_nnn < 0 or w_mu < 0:
        raise InvalidParameter("disorder widths must be nonnegative")
    n = profile.site_count
    rng = np.random.Generator(np.random.PCG64(seed))
    g = rng.uniform(-w_nnn, w_nnn, size=max(n - 2, 0))
    mu = rng.uniform(-w_mu, w_mu, size=n)
    if w_mu == 0:
        mu = np.zeros(n)
    # zero width: no NNN term at all, so the clean Hamiltonian is reproduced exactly
    return HamiltonianSpec(CouplingProfile(profile.couplings, profile.onsite + mu), g if w_nnn else None)


@lru_cache(maxsize=128)
def _basis(n: int, k: int) -> tuple:
    combos = sorted(combinations(range(n), k), key=lambda c: c[::-1])
    occ = np.array(combos, dtype=np.int64).reshape(len(combos), k)
    masks = tuple(sum(1 << s for s in c) for c in combos)
    occ.setflags(write=False)
    return occ, masks


def sector_basis(n: int, k: int) -> np.ndarray:
    """Occupied sites (0-based) of each k-excitation pattern, ascending bit value."""
    if not 0 <= k <= n:
        raise InvalidParameter(f"excitation number {k} outside 0..{n}")
    return _basis(n, k)[0]


def sector_masks(n: int, k: int) -> tuple:
    """Integer bit patterns of the k-excitation basis in canonical order."""
    if not 0 <= k <= n:
        raise InvalidParameter(f"excitation number {k} outside 0..{n}")
    return _basis(n, k)[1]


def _hops(h: HamiltonianSpec):
    yield from ((j, j + 1, -c) for j, c in enumerate(h.profile.couplings))
    if h.nnn_couplings is not None:
        yield from ((j, j + 2, g) for j, g in enumerate(h.nnn_couplings))


def single_particle_matrix(h: HamiltonianSpec) -> np.ndarray:
    n = h.n
    m = np.diag(-h.profile.onsite)
    for a, b, amp in _hops(h):
        m[a, b] = m[b, a] = amp
    return m


def sector_matrix(h: HamiltonianSpec, k: int) -> np.ndarray:
    """Real symmetric block of H on the k-excitation sector."""
    n = h.n
    if not 0 <= k <= n:
        raise InvalidParameter(f"excitation number {k} outside 0..{n}")
    if k == 1:
        return single_particle_matrix(h)
    occ, masks = _basis(n, k)
    index = {m: i for i, m in enumerate(masks)}
    dim = len(masks)
    mat = np.zeros((dim, dim))
    if k > 0:
        mat[np.diag_indices(dim)] = -h.profile.onsite[occ].sum(axis=1)
    hops = list(_hops(h))
    for i, m in enumerate(masks):
        for a, b, amp in hops:
            if ((m >> a) ^ (m >> b)) & 1:
                mat[index[m ^ ((1 << a) | (1 << b))], i] = amp
    return mat


def full_matrix(h: HamiltonianSpec) -> np.ndarray:
    """Dense 2^N operator assembled from the sector blocks (small N only)."""
    n = h.n
    if n > 14:
        raise InvalidParameter("dense assembly limited to N <= 14")
    out = np.zeros((2**n, 2**n))
    for k in range(n + 1):
        idx = np.array(sector_masks(n, k))
        out[np.ix_(idx, idx)] = sector_matrix(h, k)
    return out


def write_profile_table(profile: CouplingProfile, path) -> None:
    """Two-column text table: bond index, kappa/(2 pi) in MHz."""
    lines = ["bond\tkappa_mhz"]
    lines += [f"{j}\t{float(angular_to_mhz(c))!r}" for j, c in enumerate(profile.couplings, start=1)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_profile_table(path) -> CouplingProfile:
    rows = np.loadtxt(path, delimiter="\t", skiprows=1, ndmin=2)
    bonds = rows[:, 0].astype(int)
    if not np.array_equal(bonds, np.arange(1, bonds.size + 1)):
        raise DimensionMismatch("bond indices must run 1..N-1 in order")
    return CouplingProfile.from_couplings(mhz_to_angular(rows[:, 1]))
