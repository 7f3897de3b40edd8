"""Tunable-coupler device model.

Transmon frequency against flux bias (Zpa), coupler-mediated effective
couplings, two- and three-mode spectra, swap oscillations, and a least-squares
fit of the coupler spectroscopy.

Units: mode frequencies and transmon energies in GHz (/2pi), couplings and
detunings in MHz (/2pi), times in ns.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit, minimize

from .exceptions import InvalidParameter, NumericalFailure
from .tables import read_keyvalue, write_keyvalue
from .units import TWO_PI

DISPERSIVE_RATIO = 0.25

# Reported device: idle frequency (GHz), E_C (MHz), E_JJ (GHz) per qubit.
DEVICE_QUBITS = (
    (5.300, 195.8, 20.69),
    (4.760, 194.5, 19.88),
    (5.330, 195.4, 19.78),
    (4.805, 198.4, 18.55),
    (5.278, 197.0, 19.30),
    (4.830, 196.2, 19.52),
    (5.231, 195.7, 19.39),
    (4.705, 201.8, 17.66),
    (5.180, 199.7, 18.64),
    (4.655, 203.2, 18.00),
)
# g_qc, g_q2c, g_qq (MHz) per coupler.
DEVICE_COUPLERS = (
    (98.07, 85.72, 10.41),
    (84.13, 96.68, 10.06),
    (98.88, 88.64, 10.05),
    (85.96, 97.46, 9.73),
    (96.46, 85.36, 9.56),
    (87.50, 96.78, 9.97),
    (96.00, 85.89, 9.55),
    (85.63, 97.40, 9.64),
    (96.02, 83.36, 9.82),
)


@dataclass(frozen=True)
class TransmonParams:
    E_JJ: float
    E_C: float
    delta: float = 0.0
    A: float = 1.0
    phi: float = 0.0

    def __post_init__(self):
        if self.E_JJ <= 0 or self.E_C <= 0:
            raise InvalidParameter("E_JJ and E_C must be positive")
        if not 0 <= self.delta < 1:
            raise InvalidParameter("junction asymmetry must lie in [0, 1)")
        if self.A == 0:
            raise InvalidParameter("A must be nonzero")

    @property
    def omega_max(self) -> float:
        return math.sqrt(8 * self.E_JJ * self.E_C * math.sqrt(self.delta**2 + 1)) - self.E_C

    @property
    def omega_min(self) -> float:
        return math.sqrt(8 * self.E_JJ * self.E_C * self.delta) - self.E_C


# Coupler used when no calibration constants are known: tops out near 6.73 GHz.
SYNTHETIC_COUPLER = TransmonParams(E_JJ=30.0, E_C=0.2, delta=0.0, A=1.2, phi=0.1)


@dataclass(frozen=True)
class CouplerTriple:
    """Two qubits and the coupler between them."""

    g_qc: float
    g_q2c: float
    g_qq: float
    omega_q: float
    omega_q2: float
    coupler: TransmonParams = SYNTHETIC_COUPLER
    anharmonicities: tuple = (-200.0, -200.0)

    @classmethod
    def from_device(cls, j: int, omega: float | None = None, coupler: TransmonParams = SYNTHETIC_COUPLER) -> "CouplerTriple":
        """Coupler ``j`` (1-based) of the reported device.

        Qubits sit at their idle frequencies unless ``omega`` puts both on resonance.
        """
        if not 1 <= j <= len(DEVICE_COUPLERS):
            raise InvalidParameter(f"coupler index {j} outside 1..{len(DEVICE_COUPLERS)}")
        g_qc, g_q2c, g_qq = DEVICE_COUPLERS[j - 1]
        q1, q2 = DEVICE_QUBITS[j - 1], DEVICE_QUBITS[j]
        w1, w2 = (q1[0], q2[0]) if omega is None else (omega, omega)
        return cls(g_qc, g_q2c, g_qq, w1, w2, coupler, (-q1[1], -q2[1]))

    def dispersive_ratio(self, omega_c: float) -> float:
        """Largest ``g / |detuning|`` of the two qubit-coupler pairs."""
        d1 = abs(self.omega_q - omega_c) * 1e3
        d2 = abs(self.omega_q2 - omega_c) * 1e3
        return max(self.g_qc / d1 if d1 else math.inf, self.g_q2c / d2 if d2 else math.inf)


def freq_from_zpa(p: TransmonParams, zpa):
    """``sqrt(8 E_JJ E_C sqrt(delta^2 + cos^2(A zpa + phi))) - E_C`` in GHz."""
    c = np.cos(p.A * np.asarray(zpa, dtype=float) + p.phi)
    return np.sqrt(8 * p.E_JJ * p.E_C * np.sqrt(p.delta**2 + c**2)) - p.E_C


def zpa_from_freq(p: TransmonParams, omega, branch: int = 1):
    """Inverse of :func:`freq_from_zpa`; ``branch=+1`` has ``A zpa + phi`` in [0, pi/2]."""
    if branch not in (1, -1):
        raise InvalidParameter("branch must be +1 or -1")
    w = np.asarray(omega, dtype=float)
    tol = 1e-12
    if np.any(w > p.omega_max + tol) or np.any(w < p.omega_min - tol):
        raise InvalidParameter(f"frequency outside band [{p.omega_min}, {p.omega_max}] GHz")
    c2 = (w + p.E_C) ** 4 / (8 * p.E_JJ * p.E_C) ** 2 - p.delta**2
    c = np.sqrt(np.clip(c2, 0.0, 1.0))
    return (np.arccos(branch * c) - p.phi) / p.A


def _detuning_mhz(omega_q, omega_c):
    d = (np.asarray(omega_q, dtype=float) - np.asarray(omega_c, dtype=float)) * 1e3
    if np.any(d == 0):
        raise InvalidParameter("qubit and coupler are resonant")
    return d


def effective_coupling(t: CouplerTriple, omega_c):
    """``g_qq + g_qc g_q2c / Lambda`` (MHz), ``Lambda`` the harmonic mean of ``omega_q - omega_c``."""
    d1 = _detuning_mhz(t.omega_q, omega_c)
    d2 = _detuning_mhz(t.omega_q2, omega_c)
    lam = 2.0 / (1.0 / d1 + 1.0 / d2)
    return t.g_qq + t.g_qc * t.g_q2c / lam


def dressed_frequency(omega_q: float, position: str, left=None, right=None) -> float:
    """Qubit frequency (GHz) shifted by ``g^2/(omega_q - omega_c)`` per neighbouring coupler.

    ``left``/``right`` are ``(g_MHz, omega_c_GHz)`` of the adjacent couplers;
    a chain's first qubit only has ``right``, the last only ``left``.
    """
    need = {"first": ("right",), "last": ("left",), "middle": ("left", "right")}
    if position not in need:
        raise InvalidParameter(f"position must be one of {sorted(need)}")
    given = {"left": left, "right": right}
    shift = 0.0
    for side in need[position]:
        if given[side] is None:
            raise InvalidParameter(f"{position} qubit needs the {side} coupler")
        g, omega_c = given[side]
        shift += g**2 / float(_detuning_mhz(omega_q, omega_c))
    return omega_q + shift * 1e-3


def coupler_freq_for_coupling(t: CouplerTriple, g_target: float) -> float:
    """Coupler frequency (GHz) at which :func:`effective_coupling` equals ``g_target``.

    Targets below ``g_qq`` need the coupler above both qubits, targets above
    it need the coupler below.
    """
    if g_target == t.g_qq:
        raise InvalidParameter("g_target = g_qq needs infinite detuning")
    lam = t.g_qc * t.g_q2c / (g_target - t.g_qq)
    a, b = t.omega_q * 1e3, t.omega_q2 * 1e3
    if a == b:
        u = a - lam
    else:
        roots = np.roots([2.0, 2 * lam - 2 * (a + b), 2 * a * b - lam * (a + b)])
        roots = roots[np.isreal(roots)].real
        side = roots > max(a, b) if lam < 0 else roots < min(a, b)
        if not side.any():
            raise InvalidParameter(f"coupling {g_target} MHz unreachable")
        u = float(roots[side][0])
    return u * 1e-3


def zpa_from_target_coupling(t: CouplerTriple, g_target: float, branch: int = 1) -> float:
    omega_c = coupler_freq_for_coupling(t, g_target)
    try:
        return float(zpa_from_freq(t.coupler, omega_c, branch))
    except InvalidParameter as exc:
        raise InvalidParameter(f"coupling {g_target} MHz needs coupler at {omega_c:.4f} GHz: {exc}") from None


def chain_zpa(kappa_mhz, omega: float = 5.1, coupler: TransmonParams = SYNTHETIC_COUPLER, branch: int = 1) -> np.ndarray:
    """Coupler Zpa per bond realizing ``kappa_j`` (``g = -kappa``) with all qubits at ``omega``."""
    kappa = np.asarray(kappa_mhz, dtype=float)
    if kappa.size > len(DEVICE_COUPLERS):
        raise InvalidParameter("more bonds than device couplers")
    return np.array([
        zpa_from_target_coupling(CouplerTriple.from_device(j + 1, omega, coupler), -k, branch)
        for j, k in enumerate(kappa)
    ])


def anticrossing_branches(g: float, omega_q, omega_c):
    """Upper and lower eigenfrequencies (GHz) of a qubit-coupler pair."""
    if g <= 0:
        raise InvalidParameter("g must be positive")
    wq = np.asarray(omega_q, dtype=float)
    wc = np.asarray(omega_c, dtype=float)
    mid = (wq + wc) / 2
    half = np.sqrt((g * 1e-3) ** 2 + (wq - wc) ** 2 / 4)
    return mid + half, mid - half


def swap_probability(g_eff: float, detuning: float, t):
    """``P01 = cos(sqrt(4 g^2 + detuning^2) t)/2 + 1/2`` with MHz inputs and t in ns."""
    rate = TWO_PI * 1e-3 * math.sqrt(4 * g_eff**2 + detuning**2)
    return 0.5 * np.cos(rate * np.asarray(t, dtype=float)) + 0.5


def coupling_from_swap(times, p01) -> float:
    """``|g|`` (MHz) as half the oscillation frequency of a resonant swap trace.

    The FFT peak of the zero-padded trace seeds a sinusoid fit.
    """
    t = np.asarray(times, dtype=float)
    p = np.asarray(p01, dtype=float)
    if t.size < 8 or t.shape != p.shape:
        raise InvalidParameter("need a sampled trace with at least 8 points")
    dt = np.diff(t)
    if not np.allclose(dt, dt[0]):
        raise InvalidParameter("trace must be uniformly sampled")
    y = p - p.mean()
    if not np.any(y):
        raise InvalidParameter("trace has no oscillation")
    pad = 16 * t.size
    spec = np.abs(np.fft.rfft(y, pad))
    freqs = np.fft.rfftfreq(pad, dt[0])
    k = int(np.argmax(spec[1:])) + 1
    nu0 = freqs[k]

    def model(tt, amp, nu, ph, off):
        return amp * np.cos(TWO_PI * nu * tt + ph) + off

    amp0 = (p.max() - p.min()) / 2
    try:
        with warnings.catch_warnings():
            # exact traces leave no residual to estimate a covariance from; it is unused
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, _ = curve_fit(model, t, p, p0=(amp0, nu0, 0.0, p.mean()), maxfev=20000)
    except RuntimeError as exc:
        raise NumericalFailure(f"swap fit failed: {exc}") from None
    return abs(popt[1]) * 1e3 / 2  # cycles/ns -> MHz, halved


def three_body_spectrum(t: CouplerTriple, omega_c):
    """Ascending single-excitation eigenfrequencies (GHz) of qubit-coupler-qubit.

    Shape ``(..., 3)`` for array ``omega_c``.
    """
    wc = np.asarray(omega_c, dtype=float)
    h = np.zeros(wc.shape + (3, 3))
    h[..., 0, 0] = t.omega_q
    h[..., 1, 1] = wc
    h[..., 2, 2] = t.omega_q2
    h[..., 0, 1] = h[..., 1, 0] = t.g_qc * 1e-3
    h[..., 1, 2] = h[..., 2, 1] = t.g_q2c * 1e-3
    h[..., 0, 2] = h[..., 2, 0] = t.g_qq * 1e-3
    return np.linalg.eigvalsh(h)


@dataclass(frozen=True)
class SpectroscopyData:
    """Observed ``(zpa, frequency)`` points of the three-body and both two-body scans."""

    three_body: tuple
    left: tuple
    right: tuple

    def __post_init__(self):
        for name in ("three_body", "left", "right"):
            z, w = (np.asarray(a, dtype=float) for a in getattr(self, name))
            if z.shape != w.shape or z.ndim != 1:
                raise InvalidParameter(f"{name}: zpa and frequency arrays differ in shape")
            if z.size < 5:
                raise InvalidParameter(f"{name}: need at least 5 points")
            if np.ptp(w) == 0:
                raise InvalidParameter(f"{name}: constant spectrum carries no information")
            object.__setattr__(self, name, (z, w))


@dataclass(frozen=True)
class SpectroscopyFit:
    g_qc: float
    g_q2c: float
    coupler: TransmonParams
    residual: float
    rms: dict = field(default_factory=dict)
    iterations: int = 0


FIT_NAMES = ("g_qc", "g_q2c", "E_JJ", "A", "phi")


def _unpack(x, scale, base: CouplerTriple) -> CouplerTriple:
    g_qc, g_q2c, e_jj, a, phi = x * scale
    coupler = replace(base.coupler, E_JJ=abs(e_jj), A=a, phi=phi)
    return replace(base, g_qc=g_qc, g_q2c=g_q2c, coupler=coupler)


def _nearest(pred, obs):
    return np.min(np.abs(pred - obs[:, None]), axis=1)


def spectroscopy_residuals(t: CouplerTriple, data: SpectroscopyData) -> dict:
    """Distance (GHz) from each observed point to the nearest model branch."""
    out = {}
    z, w = data.three_body
    out["three_body"] = _nearest(three_body_spectrum(t, freq_from_zpa(t.coupler, z)), w)
    for name, g, wq in (("left", t.g_qc, t.omega_q), ("right", t.g_q2c, t.omega_q2)):
        z, w = getattr(data, name)
        up, lo = anticrossing_branches(abs(g), wq, freq_from_zpa(t.coupler, z))
        out[name] = _nearest(np.stack([up, lo], axis=-1), w)
    return out


def fit_spectroscopy(data: SpectroscopyData, init: CouplerTriple, seed: int = 0, restarts: int = 3,
                     max_iter: int = 20000) -> SpectroscopyFit:
    """Fit ``g_qc, g_q2c, E_JJ, A, phi`` to all three scans at once.

    Qubit frequencies, ``E_C``, ``delta`` and ``g_qq`` are held at their values
    in ``init``. Nelder-Mead runs on parameters scaled by the initial guess,
    first from the guess and then from ``restarts`` seeded perturbations of it;
    the best run wins.
    """
    scale = np.array([init.g_qc, init.g_q2c, init.coupler.E_JJ, init.coupler.A, init.coupler.phi or 1.0])
    if np.any(scale == 0):
        raise InvalidParameter("initial couplings, E_JJ and A must be nonzero")

    def cost(x):
        try:
            res = spectroscopy_residuals(_unpack(x, scale, init), data)
        except InvalidParameter:
            return 1e6
        return float(sum(np.sum(r**2) for r in res.values())) * 1e6  # MHz^2

    x0 = np.array([1.0, 1.0, 1.0, 1.0, init.coupler.phi / scale[4]])
    rng = np.random.default_rng(seed)
    starts = [x0] + [x0 * (1 + 0.02 * rng.standard_normal(5)) for _ in range(restarts)]
    best = None
    iters = 0
    for start in starts:
        r = minimize(cost, start, method="Nelder-Mead",
                     options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": max_iter, "maxfev": 2 * max_iter})
        # polish from the simplex optimum; cost tolerance relative to the noise floor
        r = minimize(cost, r.x, method="Nelder-Mead",
                     options={"xatol": 1e-10, "fatol": 1e-12 * max(1.0, r.fun), "maxiter": max_iter,
                              "maxfev": 2 * max_iter})
        iters += r.nit
        if best is None or r.fun < best.fun:
            best = r
    if not np.isfinite(best.fun) or best.nit >= max_iter:
        raise NumericalFailure("spectroscopy fit did not converge")
    fitted = _unpack(best.x, scale, init)
    res = spectroscopy_residuals(fitted, data)
    return SpectroscopyFit(
        g_qc=float(fitted.g_qc),
        g_q2c=float(fitted.g_q2c),
        coupler=fitted.coupler,
        residual=float(best.fun),
        rms={k: float(np.sqrt(np.mean(v**2)) * 1e3) for k, v in res.items()},
        iterations=iters,
    )


def synthetic_spectroscopy(t: CouplerTriple, zpa, noise_mhz: float = 0.0, seed: int = 0) -> SpectroscopyData:
    """Model spectra sampled at ``zpa``, optionally with Gaussian frequency noise.

    The three-body scan records all three levels at each bias, each two-body
    scan both branches.
    """
    z = np.asarray(zpa, dtype=float)
    rng = np.random.default_rng(seed)
    wc = freq_from_zpa(t.coupler, z)

    def noisy(w):
        return w + rng.normal(0.0, noise_mhz * 1e-3, w.shape) if noise_mhz else w

    three = three_body_spectrum(t, wc)
    up_l, lo_l = anticrossing_branches(t.g_qc, t.omega_q, wc)
    up_r, lo_r = anticrossing_branches(t.g_q2c, t.omega_q2, wc)
    return SpectroscopyData(
        three_body=(np.repeat(z, 3), noisy(three.ravel())),
        left=(np.concatenate([z, z]), noisy(np.concatenate([up_l, lo_l]))),
        right=(np.concatenate([z, z]), noisy(np.concatenate([up_r, lo_r]))),
    )


def write_device_file(path, qubits=DEVICE_QUBITS, couplers=DEVICE_COUPLERS) -> None:
    sections = {}
    for j, (w, ec, ejj) in enumerate(qubits, 1):
        sections[f"Q{j}"] = {"omega_ghz": w, "E_C_mhz": ec, "E_JJ_ghz": ejj}
    for j, (gqc, gq2c, gqq) in enumerate(couplers, 1):
        sections[f"C{j}"] = {"g_qc_mhz": gqc, "g_q2c_mhz": gq2c, "g_qq_mhz": gqq}
    write_keyvalue(path, sections)


def read_device_file(path) -> tuple:
    doc = read_keyvalue(path)
    try:
        qubits = tuple(
            (float(s["omega_ghz"]), float(s["E_C_mhz"]), float(s["E_JJ_ghz"]))
            for name, s in sorted(doc.items(), key=lambda kv: int(kv[0][1:])) if name.startswith("Q")
        )
        couplers = tuple(
            (float(s["g_qc_mhz"]), float(s["g_q2c_mhz"]), float(s["g_qq_mhz"]))
            for name, s in sorted(doc.items(), key=lambda kv: int(kv[0][1:])) if name.startswith("C")
        )
    except (KeyError, ValueError) as exc:
        raise InvalidParameter(f"malformed device file: {exc}") from None
    return qubits, couplers


def write_fit_report(path, fit: SpectroscopyFit) -> None:
    write_keyvalue(path, {
        "parameters": {
            "g_qc_mhz": fit.g_qc,
            "g_q2c_mhz": fit.g_q2c,
            "E_JJ_ghz": fit.coupler.E_JJ,
            "E_C_ghz": fit.coupler.E_C,
            "delta": fit.coupler.delta,
            "A": fit.coupler.A,
            "phi": fit.coupler.phi,
        },
        "residuals": {"total_mhz2": fit.residual, "iterations": fit.iterations,
                      **{f"rms_{k}_mhz": v for k, v in fit.rms.items()}},
    })
