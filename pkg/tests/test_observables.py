import numpy as np
import pytest
import scipy.linalg as sl
from hypothesis import given, settings, strategies as st

from hawkchain.dynamics import SectorState, reduced_density_matrix
from hawkchain.exceptions import DimensionMismatch, InvalidParameter
from hawkchain.lattice import sector_masks
from hawkchain.observables import (
    DensityMatrix,
    bhattacharyya_fidelity,
    concurrence,
    concurrence_eigenvalues,
    p_out,
    von_neumann_entropy,
)

PHI_PLUS = np.array([1, 0, 0, 1]) / np.sqrt(2)


def werner(p):
    return p * np.outer(PHI_PLUS, PHI_PLUS) + (1 - p) * np.eye(4) / 4


def random_unitary(rng, n=2):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_rho(rng, rank=4):
    a = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def wootters_reference(rho):
    """Direct non-Hermitian eigensolve of rho @ rho_tilde."""
    sy = np.array([[0, -1j], [1j, 0]])
    yy = np.kron(sy, sy)
    ev = np.linalg.eigvals(rho @ yy @ rho.conj() @ yy)
    lam = np.sort(np.sqrt(np.clip(ev.real, 0, None)))[::-1]
    return max(0.0, lam[0] - lam[1] - lam[2] - lam[3])


def test_fidelity_examples():
    assert bhattacharyya_fidelity([0.2, 0.3, 0.5], [0.2, 0.3, 0.5]) == pytest.approx(1.0)
    assert bhattacharyya_fidelity([1, 0], [0, 1]) == 0.0
    assert bhattacharyya_fidelity([1, 0], [0.5, 0.5]) == pytest.approx(1 / np.sqrt(2), rel=1e-15)


def test_fidelity_normalizes_by_excitation_number():
    p = np.array([1.0, 1.0, 0.0])  # two excitations
    assert bhattacharyya_fidelity(p, p) == pytest.approx(1.0)
    assert bhattacharyya_fidelity(p, p / 2) == pytest.approx(1.0)


def test_fidelity_errors():
    with pytest.raises(InvalidParameter):
        bhattacharyya_fidelity([-0.1, 1.1], [0.5, 0.5])
    with pytest.raises(DimensionMismatch):
        bhattacharyya_fidelity([1.0], [0.5, 0.5])
    with pytest.raises(InvalidParameter):
        bhattacharyya_fidelity([0.0, 0.0], [0.5, 0.5])


@given(p=st.lists(st.floats(0, 1), min_size=3, max_size=8), q=st.lists(st.floats(0, 1), min_size=8, max_size=8))
def test_fidelity_bounded_with_equality_only_for_equal(p, q):
    n = len(p)
    p, q = np.array(p), np.array(q[:n])
    if p.sum() < 1e-6 or q.sum() < 1e-6:
        return
    f = bhattacharyya_fidelity(p, q)
    assert 0.0 <= f <= 1.0
    if f == 1.0:
        np.testing.assert_allclose(p / p.sum(), q / q.sum(), atol=1e-6)


def test_p_out():
    p = np.eye(10)[0]
    assert p_out(p, 3) == 0.0
    assert p_out(np.full(10, 0.1), 3) == pytest.approx(0.7)


def test_entropy_examples():
    pure = DensityMatrix(np.outer(PHI_PLUS, PHI_PLUS), (1, 2))
    assert von_neumann_entropy(pure) == pytest.approx(0.0, abs=1e-12)
    assert von_neumann_entropy(DensityMatrix(np.eye(4) / 4, (1, 2))) == pytest.approx(2.0)
    assert von_neumann_entropy(DensityMatrix(np.eye(2) / 2, (1,))) == pytest.approx(1.0)


def test_entropy_rejects_invalid():
    with pytest.raises(InvalidParameter):
        von_neumann_entropy(DensityMatrix(np.diag([1.5, -0.5]), (1,)))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), cut=st.integers(1, 5))
def test_entropy_of_subset_equals_complement(seed, cut):
    rng = np.random.default_rng(seed)
    n = 6
    sectors = {k: rng.normal(size=len(sector_masks(n, k))) + 1j * rng.normal(size=len(sector_masks(n, k))) for k in (0, 1, 2, 3)}
    norm = np.sqrt(sum(np.vdot(a, a).real for a in sectors.values()))
    s = SectorState(n, {k: a / norm for k, a in sectors.items()})
    sites = rng.permutation(np.arange(1, n + 1))
    a, b = sorted(sites[:cut]), sorted(sites[cut:])
    sa = von_neumann_entropy(reduced_density_matrix(s, a))
    sb = von_neumann_entropy(reduced_density_matrix(s, b))
    assert sa == pytest.approx(sb, abs=1e-8)


def test_concurrence_examples():
    assert concurrence(np.outer(PHI_PLUS, PHI_PLUS)) == pytest.approx(1.0, abs=1e-14)
    assert concurrence(np.diag([1.0, 0, 0, 0])) == 0.0
    assert concurrence(werner(1 / 3)) == pytest.approx(0.0, abs=1e-12)
    assert concurrence(werner(1.0)) == pytest.approx(1.0, abs=1e-12)


@given(p=st.floats(0, 1))
def test_concurrence_werner_formula(p):
    rho = werner(p)
    expected = max(0.0, (3 * p - 1) / 2)
    assert concurrence(rho) == pytest.approx(expected, abs=1e-12)
    assert concurrence(rho) == pytest.approx(wootters_reference(rho), abs=1e-7)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), rank=st.integers(1, 4))
def test_concurrence_local_unitary_invariance(seed, rank):
    rng = np.random.default_rng(seed)
    rho = random_rho(rng, rank)
    u = np.kron(random_unitary(rng), random_unitary(rng))
    assert concurrence(u @ rho @ u.conj().T) == pytest.approx(concurrence(rho), abs=1e-9)
    lam = concurrence_eigenvalues(rho)
    assert np.all(lam >= -1e-10) and np.all(np.diff(lam) <= 1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_concurrence_matches_direct_eigensolve(seed):
    rho = random_rho(np.random.default_rng(seed), 4)
    assert concurrence(rho) == pytest.approx(wootters_reference(rho), abs=1e-8)


def test_concurrence_errors():
    with pytest.raises(DimensionMismatch):
        concurrence(np.eye(2) / 2)
    with pytest.raises(InvalidParameter):
        concurrence(np.diag([1.2, -0.2, 0, 0]))


def test_density_matrix_validation():
    with pytest.raises(DimensionMismatch):
        DensityMatrix(np.eye(2) / 2, (1, 2))
    with pytest.raises(InvalidParameter):
        DensityMatrix(np.array([[0.5, 0.1], [0.2, 0.5]]), (1,))
    with pytest.raises(InvalidParameter):
        DensityMatrix(np.eye(2), (1,))
    with pytest.raises(InvalidParameter):
        DensityMatrix(np.eye(4) / 4, (1, 1))
    with pytest.raises(InvalidParameter):
        DensityMatrix(np.diag([1.5, -0.5]), (1,)).check_positive()
    rho = DensityMatrix(sl.expm(np.zeros((2, 2))) / 2, (3,))
    assert rho.sites == (3,) and rho.dim == 2
