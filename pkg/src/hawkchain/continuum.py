"""Wave packets on a long chain in the continuum limit.

Lattice points sit at ``x_n = x_left + n d``. For a metric function ``f``
the bond between ``x_n`` and ``x_{n+1}`` carries
``kappa = (f(x_n) + f(x_{n+1})) / (8 d)`` and amplitudes obey::

    -i dpsi_n/dt = kappa_n psi_{n-1} + kappa_{n+1} psi_{n+1} + mu psi_n

(the bond ``kappa_n`` joins ``n-1`` and ``n``). This is ``i dpsi/dt = H psi``
for the chain Hamiltonian of :mod:`hawkchain.lattice` restricted to one
excitation, so the two descriptions agree site by site.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sl
from scipy.integrate import solve_ivp

from .exceptions import InvalidParameter, NumericalFailure
from .lattice import MetricSpec
from .tables import write_keyvalue, write_table

RTOL = 1e-10
ATOL = 1e-12
ESCAPE_TOL = 1e-6
EDGE_SITES = 20
TRAP_RADIUS = 5  # in lattice constants


class BoundaryEscape(NumericalFailure):
    """Packet weight reached the chain ends."""


@dataclass(frozen=True)
class PacketConfig:
    n: int
    d: float
    alpha: float
    k: float
    delta: float
    x0: float
    mu: float = 0.0
    x_left: float = 0.0

    def __post_init__(self):
        if self.d <= 0 or self.delta <= 0:
            raise InvalidParameter("d and delta must be positive")
        if self.n < 2:
            raise InvalidParameter("need at least two sites")
        # |psi|^2 has standard deviation delta/2
        lo, hi = self.x0 - 2.5 * self.delta, self.x0 + 2.5 * self.delta
        if lo < self.x_left or hi > self.x_right:
            raise InvalidParameter(
                f"packet support [{lo}, {hi}] exceeds chain [{self.x_left}, {self.x_right}]"
            )

    @classmethod
    def spanning(cls, x_min: float, x_max: float, d: float, **kw) -> "PacketConfig":
        """Chain covering ``[x_min, x_max]`` with spacing ``d``."""
        n = int(round((x_max - x_min) / d)) + 1
        return cls(n=n, d=d, x_left=x_min, **kw)

    @property
    def x_right(self) -> float:
        return self.x_left + (self.n - 1) * self.d

    def positions(self) -> np.ndarray:
        return self.x_left + self.d * np.arange(self.n)


@dataclass(frozen=True, eq=False)
class PacketTrajectory:
    times: np.ndarray
    x: np.ndarray
    prob: np.ndarray  # shape (len(times), n)
    norm_error: float
    edge_weight: float

    def center(self) -> np.ndarray:
        """``sum_n x_n |psi_n|^2`` at each time."""
        return self.prob @ self.x


def dispersion(k, d: float):
    """``omega_k = sin(2 k d) / (2 d)``."""
    if d <= 0:
        raise InvalidParameter("d must be positive")
    return np.sin(2 * np.asarray(k, dtype=float) * d) / (2 * d)


def _edge_weight(prob: np.ndarray) -> float:
    m = min(EDGE_SITES, prob.shape[-1] // 2)
    return float(np.max(prob[..., :m].sum(-1) + prob[..., -m:].sum(-1)))


def gaussian_packet(cfg: PacketConfig) -> np.ndarray:
    """Normalized ``exp(-(x-x0)^2/delta^2) exp(2i x (k - pi/(4d)))``."""
    x = cfg.positions()
    psi = np.exp(-((x - cfg.x0) ** 2) / cfg.delta**2) * np.exp(2j * x * (cfg.k - math.pi / (4 * cfg.d)))
    psi /= np.linalg.norm(psi)
    if _edge_weight(np.abs(psi) ** 2) > ESCAPE_TOL:
        raise BoundaryEscape("initial packet has weight at the chain ends")
    return psi


def metric_bonds(f, x: np.ndarray, d: float) -> np.ndarray:
    """Bond couplings ``(f(x_n) + f(x_{n+1})) / (8 d)``; ``f`` is a callable or :class:`MetricSpec`."""
    fx = np.asarray(f.f(x) if isinstance(f, MetricSpec) else f(x), dtype=float)
    if fx.shape != x.shape:
        fx = np.broadcast_to(fx, x.shape)
    return (fx[1:] + fx[:-1]) / (8 * d)


def integrate_chain(bonds, psi0, t_grid, mu: float = 0.0, gauged: bool = False) -> np.ndarray:
    """Adaptive Runge-Kutta (DOP853) integration; returns amplitudes, shape ``(len(t_grid), n)``.

    ``gauged=True`` integrates the real form ``dphi_n/dt = -kappa_n phi_{n-1}
    + kappa_{n+1} phi_{n+1} + i mu phi_n`` obtained with ``phi_n = i^n psi_n``.
    """
    kap = np.asarray(bonds, dtype=float)
    psi0 = np.asarray(psi0, dtype=complex)
    if kap.shape != (psi0.size - 1,):
        raise InvalidParameter("need one bond per neighbouring pair")
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or np.any(np.diff(t) < 0) or t[0] < 0:
        raise InvalidParameter("t_grid must be nondecreasing and start at t >= 0")
    lo_sign = -1.0 if gauged else 1j

    def rhs(_t, y):
        out = 1j * mu * y
        out[1:] += lo_sign * kap * y[:-1]
        out[:-1] += (1.0 if gauged else 1j) * kap * y[1:]
        return out

    if t[-1] == 0:
        return np.tile(psi0, (t.size, 1))
    sol = solve_ivp(rhs, (0.0, t[-1]), psi0, method="DOP853", t_eval=t, rtol=RTOL, atol=ATOL)
    if not sol.success:
        raise NumericalFailure(f"integration failed: {sol.message}")
    return sol.y.T


def exact_chain(bonds, psi0, t_grid, mu: float = 0.0) -> np.ndarray:
    """Same dynamics as :func:`integrate_chain` via a tridiagonal eigensolve."""
    kap = np.asarray(bonds, dtype=float)
    e, v = sl.eigh_tridiagonal(np.full(kap.size + 1, mu), kap)
    c0 = v.T @ np.asarray(psi0, dtype=complex)
    t = np.asarray(t_grid, dtype=float).reshape(-1)
    return (np.exp(1j * np.outer(t, e)) * c0) @ v.T


def evolve_packet(cfg: PacketConfig, f, t_grid, gauged: bool = False, check_escape: bool = True) -> PacketTrajectory:
    """Propagate the Gaussian packet of ``cfg`` through the metric ``f``."""
    x = cfg.positions()
    psi0 = gaussian_packet(cfg)
    if gauged:
        psi0 = psi0 * 1j ** np.arange(cfg.n)
    amps = integrate_chain(metric_bonds(f, x, cfg.d), psi0, t_grid, cfg.mu, gauged)
    prob = np.abs(amps) ** 2
    norm_error = float(np.max(np.abs(prob.sum(1) - 1.0)))
    edge = _edge_weight(prob)
    if check_escape and edge > ESCAPE_TOL:
        raise BoundaryEscape(f"weight {edge:.3g} reached the chain ends")
    return PacketTrajectory(np.asarray(t_grid, dtype=float), x, prob, norm_error, edge)


def center_speed(traj: PacketTrajectory) -> float:
    """Least-squares slope of the center of mass against time."""
    return float(np.polyfit(traj.times, traj.center(), 1)[0])


def radius_crossings(traj: PacketTrajectory, radius: float) -> np.ndarray:
    """Times where ``|x_c|`` crosses ``radius``, linearly interpolated between samples."""
    a = np.abs(traj.center()) - radius
    t = traj.times
    i = np.flatnonzero(np.sign(a[:-1]) != np.sign(a[1:]))
    return t[i] - a[i] * (t[i + 1] - t[i]) / (a[i + 1] - a[i])


def trapping_interval(traj: PacketTrajectory, radius: float) -> tuple:
    """First entry into ``|x_c| < radius`` and the first exit after it.

    Either entry may be ``None``. A packet has escaped when both are set.
    """
    if abs(traj.center()[0]) < radius:
        raise InvalidParameter("packet starts inside the trapping region")
    cr = radius_crossings(traj, radius)
    t_in = float(cr[0]) if cr.size else None
    t_out = float(cr[1]) if cr.size > 1 else None
    return t_in, t_out


def trapping_time(traj: PacketTrajectory, radius: float) -> float:
    """Time from first entry into ``|x_c| < radius`` to the exit, or to the window end."""
    t_in, t_out = trapping_interval(traj, radius)
    if t_in is None:
        return 0.0
    return (t_out if t_out is not None else float(traj.times[-1])) - t_in


def crosses_horizon(traj: PacketTrajectory, x_h: float = 0.0) -> bool:
    c = traj.center() - x_h
    return bool(np.any(np.sign(c) != np.sign(c[0])))


def _flag(v: float) -> str:
    if v <= 0.25:
        return "satisfied"
    return "marginal" if v < 1 else "violated"


def validity_report(cfg: PacketConfig) -> dict:
    """Dimensionless products of the continuum regime with a flag each."""
    vals = {
        "kd": abs(cfg.k) * cfg.d,
        "d_alpha": cfg.d * abs(cfg.alpha),
        "delta_alpha": cfg.delta * abs(cfg.alpha),
        "d_over_delta": cfg.d / cfg.delta,
    }
    return {name: (v, _flag(v)) for name, v in vals.items()}


def write_validity_report(path, cfg: PacketConfig) -> None:
    rep = validity_report(cfg)
    items = {}
    for name, (v, flag) in rep.items():
        items[name] = v
        items[name + "_flag"] = flag
    items["trap_radius"] = TRAP_RADIUS * cfg.d
    write_keyvalue(path, {"validity": items})


def write_heatmap(path, traj: PacketTrajectory, site_stride: int = 1) -> None:
    """Rows ``(t, n, |psi_n|^2)`` with 1-based site index."""
    idx = np.arange(0, traj.x.size, site_stride)
    rows = ((float(t), int(j) + 1, float(traj.prob[i, j])) for i, t in enumerate(traj.times) for j in idx)
    write_table(path, ("t", "n", "prob"), rows)


def scan(configs, f, t_grid, threads: int = 1) -> list:
    """Independent packet runs in parallel; results keep the input order."""
    configs = list(configs)
    if threads <= 1:
        return [evolve_packet(c, f, t_grid) for c in configs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda c: evolve_packet(c, f, t_grid), configs))
