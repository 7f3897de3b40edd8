"""Hawking spectrum of the lattice black hole.

Pipeline: take the exterior reduced state, pad the interior and horizon
sites with |0>, project onto energy eigenstates of the 0- and 1-excitation
sectors, average equal positive energies and fit ``ln P = c - E/T_H``.
Also the closed-form tunneling rate, occupations and unit conversions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sl

from .dynamics import SectorState, reduced_density_matrix, single_particle_eig
from .exceptions import DimensionMismatch, InvalidParameter
from .lattice import HamiltonianSpec, MetricSpec, single_particle_matrix
from .observables import DensityMatrix
from .tables import write_keyvalue, write_table
from .units import BOLTZMANN, PLANCK, TWO_PI, angular_to_mhz, mhz_to_angular

DEFAULT_E_TOL = mhz_to_angular(1e-3)
SOLAR_MASS_KELVIN = 6.4e-8
SPECTRUM_TOL = 1e-8
ZERO_ENERGY = 1e-12  # rad/ns; odd chains have an exact zero mode that round-off can push either way


@dataclass(frozen=True, eq=False)
class RadiationSpectrum:
    """Energies (rad/ns), probabilities and sector label of each eigenstate."""

    energies: np.ndarray
    probabilities: np.ndarray
    sectors: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if np.any(p < -SPECTRUM_TOL) or np.any(p > 1 + SPECTRUM_TOL) or p.sum() > 1 + SPECTRUM_TOL:
            raise InvalidParameter("radiation probabilities outside [0, 1]")

    @property
    def total(self) -> float:
        return float(np.sum(self.probabilities))


@dataclass(frozen=True)
class TemperatureFit:
    slope: float
    intercept: float
    t_h: float
    t_h_mhz: float
    t_kelvin: float
    slope_stderr: float
    intercept_stderr: float
    t_h_stderr: float
    n_points: int
    degenerate: bool


def embed_exterior(rho_ext: DensityMatrix, n: int, interior) -> DensityMatrix:
    """``|0..0><0..0|`` on ``interior`` (every non-exterior site) tensored with ``rho_ext``."""
    interior = set(int(s) for s in interior)
    exterior = set(range(1, n + 1)) - interior
    if set(rho_ext.sites) != exterior or not interior <= set(range(1, n + 1)):
        raise DimensionMismatch(f"exterior sites {rho_ext.sites} are not the complement of {sorted(interior)}")
    if n > 14:
        raise InvalidParameter("dense embedding limited to N <= 14")
    sub = np.arange(rho_ext.dim)
    glob = np.zeros_like(sub)
    for i, site in enumerate(rho_ext.sites):
        glob |= ((sub >> i) & 1) << (site - 1)
    out = np.zeros((2**n, 2**n), dtype=complex)
    out[np.ix_(glob, glob)] = rho_ext.data
    return DensityMatrix(out, tuple(range(1, n + 1)))


def radiation_probabilities(h: HamiltonianSpec, rho_out: DensityMatrix, metadata: dict | None = None) -> RadiationSpectrum:
    """``P_n = <E_n|rho_out|E_n>`` over the vacuum and single-excitation eigenstates."""
    n = h.n
    if rho_out.sites != tuple(range(1, n + 1)):
        raise DimensionMismatch("rho_out must cover the whole chain in site order")
    idx = np.array([0] + [1 << j for j in range(n)])
    block = rho_out.data[np.ix_(idx, idx)]
    e1, v1 = sl.eigh(single_particle_matrix(h))
    p1 = np.einsum("in,ij,jn->n", v1.conj(), block[1:, 1:], v1).real
    return RadiationSpectrum(
        energies=np.concatenate([[0.0], e1]),
        probabilities=np.concatenate([[block[0, 0].real], p1]),
        sectors=np.array([0] + [1] * n),
        metadata=dict(metadata or {}),
    )


def exterior_spectrum(h: HamiltonianSpec, state: SectorState, j_h: int, metadata: dict | None = None) -> RadiationSpectrum:
    """Exact partial trace onto sites ``j_h+1..N``, embedding and projection."""
    n = h.n
    if not 1 <= j_h < n:
        raise InvalidParameter(f"horizon index {j_h} must leave at least one exterior site")
    rho_ext = reduced_density_matrix(state, range(j_h + 1, n + 1))
    rho_out = embed_exterior(rho_ext, n, range(1, j_h + 1))
    return radiation_probabilities(h, rho_out, metadata)


def single_excitation_spectrum(h: HamiltonianSpec, psi, j_h: int, metadata: dict | None = None) -> RadiationSpectrum:
    """Same projection for a pure one-excitation state given by site amplitudes ``psi``.

    The embedded exterior state is then ``w |0><0| + |psi_ext><psi_ext|`` with
    ``w`` the interior weight, so no 2^N matrix is needed.
    """
    psi = np.asarray(psi, dtype=complex)
    n = h.n
    if psi.shape != (n,):
        raise DimensionMismatch("amplitude vector must have N entries")
    if not 1 <= j_h < n:
        raise InvalidParameter(f"horizon index {j_h} must leave at least one exterior site")
    ext = psi.copy()
    ext[:j_h] = 0
    e1, v1 = single_particle_eig(h)
    p1 = np.abs(v1.T @ ext) ** 2
    vac = float(np.sum(np.abs(psi[:j_h]) ** 2))
    return RadiationSpectrum(
        energies=np.concatenate([[0.0], e1]),
        probabilities=np.concatenate([[vac], p1]),
        sectors=np.array([0] + [1] * n),
        metadata=dict(metadata or {}),
    )


def average_positive(spec: RadiationSpectrum, e_tol: float = DEFAULT_E_TOL) -> np.ndarray:
    """Mean probability per positive energy level, as rows ``(E_bar, P_bar)``.

    Energies closer than ``e_tol`` to their sorted neighbour share a group.
    Levels within ``ZERO_ENERGY`` of zero count as zero, not positive.
    """
    if e_tol < 0:
        raise InvalidParameter("e_tol must be nonnegative")
    e = np.asarray(spec.energies)
    mask = e > ZERO_ENERGY
    if not mask.any():
        raise InvalidParameter("spectrum has no positive energies")
    order = np.argsort(e[mask], kind="stable")
    es = e[mask][order]
    ps = np.asarray(spec.probabilities)[mask][order]
    breaks = np.flatnonzero(np.diff(es) > e_tol) + 1
    return np.array([(g_e.mean(), g_p.mean()) for g_e, g_p in zip(np.split(es, breaks), np.split(ps, breaks))])


def fit_temperature(points, e_max: float | None = None) -> TemperatureFit:
    """Unweighted least squares of ``ln P_bar`` against ``E_bar``; ``T_H = -1/slope``.

    ``e_max`` drops points above a cutoff energy (rad/ns).
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    keep = pts[:, 1] > 0
    if e_max is not None:
        keep &= pts[:, 0] <= e_max
    x, y = pts[keep, 0], np.log(pts[keep, 1])
    m = x.size
    if m < 2:
        raise InvalidParameter(f"need at least 2 points with P > 0, got {m}")
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx == 0:
        raise InvalidParameter("all fit energies coincide")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    if m > 2:
        s2 = np.sum((y - intercept - slope * x) ** 2) / (m - 2)
        se_slope = float(math.sqrt(s2 / sxx))
        se_int = float(math.sqrt(s2 * (1 / m + xm**2 / sxx)))
    else:
        se_slope = se_int = math.nan
    degenerate = slope >= 0
    if degenerate:
        t_h = t_err = math.nan
    else:
        t_h = -1.0 / slope
        t_err = se_slope / slope**2
    return TemperatureFit(
        slope=slope,
        intercept=intercept,
        t_h=t_h,
        t_h_mhz=angular_to_mhz(t_h),
        t_kelvin=kelvin(t_h) if not degenerate else math.nan,
        slope_stderr=se_slope,
        intercept_stderr=se_int,
        t_h_stderr=t_err,
        n_points=m,
        degenerate=degenerate,
    )


def surface_gravity(metric: MetricSpec) -> float:
    """``f'(x_h)/2``; analytic for tanh metrics, centered difference (step d/100) otherwise."""
    if metric.kind == "tanh":
        return metric.beta / 2
    x_h = metric.horizon()
    step = metric.d / 100
    slope = float((metric.f(x_h + step) - metric.f(x_h - step)) / (2 * step))
    if slope <= 0:
        raise InvalidParameter("metric has no horizon with f'(x_h) > 0")
    return slope / 2


def hawking_temperature(metric: MetricSpec) -> float:
    """``T_H = g_h / (2 pi)`` in rad/ns."""
    return surface_gravity(metric) / TWO_PI


def kelvin(t_angular: float) -> float:
    """Temperature in K of an energy given as angular frequency in rad/ns."""
    if t_angular < 0:
        raise InvalidParameter("temperature must be nonnegative")
    nu_hz = t_angular / TWO_PI * 1e9
    return PLANCK * nu_hz / BOLTZMANN


def equivalent_mass(t_kelvin: float) -> float:
    """Schwarzschild mass (solar masses) with the same Hawking temperature."""
    if t_kelvin <= 0:
        raise InvalidParameter("temperature must be positive")
    return SOLAR_MASS_KELVIN / t_kelvin


def tunneling_rate(omega, g_h: float):
    if g_h <= 0:
        raise InvalidParameter("surface gravity must be positive")
    return np.exp(-TWO_PI * np.asarray(omega, dtype=float) / g_h)


def occupation(omega, g_h: float, statistics: str = "fermi"):
    """Mean occupation of a mode of energy ``omega``: Bose-Einstein or Fermi-Dirac."""
    if g_h <= 0:
        raise InvalidParameter("surface gravity must be positive")
    x = TWO_PI * np.asarray(omega, dtype=float) / g_h
    if statistics == "bose":
        if np.any(np.asarray(omega) <= 0):
            raise InvalidParameter("Bose occupation needs omega > 0")
        return 1.0 / np.expm1(x)
    if statistics == "fermi":
        return 1.0 / (np.exp(x) + 1.0)
    raise InvalidParameter(f"unknown statistics {statistics!r}")


def write_spectrum(path, spec: RadiationSpectrum) -> None:
    rows = zip(angular_to_mhz(spec.energies), spec.probabilities, spec.sectors)
    write_table(path, ("E_over_2pi_MHz", "P_n", "sector"), ((float(e), float(p), int(s)) for e, p, s in rows))


def write_fit_summary(path, fit: TemperatureFit, theory_mhz: float | None = None) -> None:
    items = {
        "slope": fit.slope,
        "intercept": fit.intercept,
        "T_H_MHz": fit.t_h_mhz,
        "T_kelvin": fit.t_kelvin,
        "mass_ratio": equivalent_mass(fit.t_kelvin) if not fit.degenerate else math.nan,
        "stderr_slope": fit.slope_stderr,
        "stderr_intercept": fit.intercept_stderr,
        "stderr_T_H_MHz": angular_to_mhz(fit.t_h_stderr),
        "n_points": fit.n_points,
        "degenerate": fit.degenerate,
    }
    if theory_mhz is not None:
        items["theory_T_H_MHz"] = theory_mhz
    write_keyvalue(path, {"fit": items})
