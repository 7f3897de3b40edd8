"""Scalar diagnostics: Bhattacharyya fidelity, exterior population,
von Neumann entropy (bits) and Wootters concurrence."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sl

from .exceptions import DimensionMismatch, InvalidParameter

HERMITIAN_TOL = 1e-12
EIG_TOL = 1e-10
TRACE_TOL = 1e-10

_SY = np.array([[0, -1j], [1j, 0]])
_SYSY = np.kron(_SY, _SY)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Density operator on the 1-based ``sites`` of a chain.

    Basis index bit ``i`` is the occupation of ``sites[i]`` (first listed
    site least significant), matching the global ordering convention.
    """

    data: np.ndarray
    sites: tuple

    def __post_init__(self):
        rho = np.array(self.data, dtype=complex)
        sites = tuple(int(s) for s in self.sites)
        if rho.shape != (2 ** len(sites),) * 2:
            raise DimensionMismatch(f"matrix shape {rho.shape} does not match {len(sites)} sites")
        if len(set(sites)) != len(sites):
            raise InvalidParameter("sites must be distinct")
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise InvalidParameter("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > TRACE_TOL:
            raise InvalidParameter(f"trace {np.trace(rho).real!r} differs from 1")
        rho.setflags(write=False)
        object.__setattr__(self, "data", rho)
        object.__setattr__(self, "sites", sites)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return sl.eigvalsh(self.data)

    def check_positive(self) -> None:
        lo = self.eigenvalues()[0]
        if lo < -EIG_TOL:
            raise InvalidParameter(f"density matrix has eigenvalue {lo!r} < 0")


def _as_matrix(rho) -> np.ndarray:
    return rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def bhattacharyya_fidelity(p, q) -> float:
    """``sum_j sqrt(p_j q_j)`` after scaling each distribution to unit sum.

    Occupation vectors of k-excitation states sum to k; dividing by the
    excitation number keeps the result in [0, 1].
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionMismatch("distributions have different lengths")
    if np.any(p < 0) or np.any(q < 0):
        raise InvalidParameter("distributions must be nonnegative")
    sp, sq = p.sum(), q.sum()
    if sp == 0 or sq == 0:
        raise InvalidParameter("distribution has zero total weight")
    return float(min(1.0, np.sum(np.sqrt(p / sp * q / sq))))


def p_out(p, j_h: int) -> float:
    """Total population on sites ``j > j_h`` (1-based)."""
    return float(np.sum(np.asarray(p, dtype=float)[j_h:]))


def von_neumann_entropy(rho) -> float:
    """Entropy in bits; eigenvalues are clipped at zero."""
    m = _as_matrix(rho)
    if isinstance(rho, DensityMatrix):
        rho.check_positive()
    lam = sl.eigvalsh(m)
    if lam[0] < -EIG_TOL:
        raise InvalidParameter("negative eigenvalue in density matrix")
    lam = lam[lam > 0]
    return float(max(0.0, -np.sum(lam * np.log2(lam))))


def concurrence_eigenvalues(rho) -> np.ndarray:
    """Square roots of the eigenvalues of ``rho @ rho_tilde``, descending.

    ``sqrt(rho) rho_tilde sqrt(rho) = M M^dagger`` with
    ``M = sqrt(rho) (sy x sy) sqrt(rho)^*``, so the wanted values are the
    singular values of ``M``. This avoids square roots of round-off sized
    eigenvalues and keeps full precision for pure states.
    """
    m = _as_matrix(rho)
    if m.shape != (4, 4):
        raise DimensionMismatch("concurrence needs a two-qubit (4x4) density matrix")
    w, v = sl.eigh(m)
    if w[0] < -EIG_TOL:
        raise InvalidParameter("negative eigenvalue in density matrix")
    root = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    return sl.svdvals(root @ _SYSY @ root.conj())


def concurrence(rho) -> float:
    lam = concurrence_eigenvalues(rho)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))
