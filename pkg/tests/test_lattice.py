import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hawkchain.exceptions import DimensionMismatch, InvalidParameter
from hawkchain.lattice import (
    CouplingProfile,
    HamiltonianSpec,
    MetricSpec,
    centered_profile,
    disorder_hamiltonian,
    flat_profile,
    full_matrix,
    profile_from_metric,
    read_profile_table,
    sector_masks,
    sector_matrix,
    tanh_profile,
    write_profile_table,
)
from hawkchain.units import angular_to_mhz, mhz_to_angular

from oracles import dense_hamiltonian

BETA = mhz_to_angular(4.39)
KAPPA = mhz_to_angular(2.94)


def device_profile():
    return tanh_profile(BETA, 0.35, 3, 10)


def test_tanh_profile_horizon_bond_is_about_054_mhz():
    k = angular_to_mhz(device_profile().couplings)
    assert k[2] == pytest.approx(0.5432, abs=5e-4)
    assert round(k[2], 2) == 0.54


def test_tanh_profile_odd_about_horizon():
    k = device_profile().couplings
    assert k[1] == pytest.approx(-k[2], rel=1e-14)


def test_tanh_profile_far_bond():
    # direct evaluation at j = 9: 4.39 * tanh(6.5 * 0.35) / 1.4
    expected = 4.39 * math.tanh(6.5 * 0.35) / (4 * 0.35)
    assert angular_to_mhz(device_profile().couplings[8]) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(3.070, abs=1e-3)


def test_tanh_profile_onsite_zero_and_length():
    p = device_profile()
    assert p.site_count == 10 and p.couplings.size == 9
    assert not p.onsite.any()


@pytest.mark.parametrize("args", [(0.0, 0.35, 3, 10), (BETA, -1.0, 3, 10), (BETA, 0.35, 0, 10), (BETA, 0.35, 11, 10)])
def test_tanh_profile_rejects_bad_parameters(args):
    with pytest.raises(InvalidParameter):
        tanh_profile(*args)


@given(j_h=st.integers(2, 12), n_extra=st.integers(0, 10), eta_d=st.floats(0.05, 2.0))
def test_tanh_profile_odd_symmetry(j_h, n_extra, eta_d):
    n = 2 * j_h + n_extra
    k = tanh_profile(BETA, eta_d, j_h, n).couplings
    for m in range(1, j_h):
        # bond j_h - 1 + m mirrors bond j_h - m
        assert k[j_h - 2 + m] == pytest.approx(-k[j_h - m - 1], abs=1e-14)


def test_flat_profile():
    p = flat_profile(KAPPA, 10)
    assert np.all(p.couplings == KAPPA) and p.couplings.size == 9
    assert angular_to_mhz(p.couplings[0]) == pytest.approx(2.94)
    zero = HamiltonianSpec(flat_profile(0.0, 4))
    assert not full_matrix(zero).any()
    assert flat_profile(mhz_to_angular(1.0), 2).couplings.size == 1
    with pytest.raises(InvalidParameter):
        flat_profile(KAPPA, 1)


def test_centered_profile_horizons_at_sites_4_and_7():
    beta = mhz_to_angular(13.2)
    k = centered_profile(beta, 1.0, 10).couplings
    sign = np.sign(k)
    assert list(sign) == [1, 1, 1, -1, -1, -1, 1, 1, 1]
    # bonds change sign entering site 4 and leaving site 7
    assert np.flatnonzero(np.diff(sign)).tolist() == [2, 5]


def test_centered_profile_values():
    beta = mhz_to_angular(13.2)
    got = centered_profile(beta, 1.0, 10).couplings
    ref = [beta * (math.tanh(j - 6.5) - math.tanh(j - 3.5) + 1) / 4 for j in range(1, 10)]
    np.testing.assert_allclose(got, ref, rtol=1e-14)


def test_centered_profile_deep_interior_tends_to_minus_one():
    k = centered_profile(4.0, 40.0, 10).couplings
    assert k[4] * 4 * 40.0 / 4.0 == pytest.approx(-1.0, abs=1e-12)
    with pytest.raises(InvalidParameter):
        centered_profile(4.0, 1.0, 7)


def test_metric_profile_matches_tanh_profile_within_one_percent():
    # literal target; the bond average sits 1.14% (max norm) from the midpoint values here
    metric = MetricSpec.tanh(BETA, 0.35, j_h=3)
    exact = profile_from_metric(metric, 10).couplings
    mid = device_profile().couplings
    assert np.array_equal(np.sign(exact), np.sign(mid))
    assert np.max(np.abs(exact - mid)) / np.max(np.abs(mid)) < 0.01


# |(f(a) + f(b))/2 - f((a+b)/2)| <= (b-a)^2 max|f''| / 8, and max|f''| = 4 beta eta / (3 sqrt 3) for the tanh metric
@given(eta_d=st.floats(0.01, 2.0), d=st.floats(0.1, 3.0), j_h=st.integers(1, 10))
def test_metric_profile_midpoint_error_bound(eta_d, d, j_h):
    metric = MetricSpec.tanh(BETA, eta_d, j_h=j_h, d=d)
    exact = profile_from_metric(metric, 12).couplings
    mid = tanh_profile(BETA, eta_d, j_h, 12).couplings
    f2 = 4 * BETA * (eta_d / d) / (3 * math.sqrt(3))
    assert np.all(np.abs(exact - mid) <= d * f2 / 32 * (1 + 1e-12))


def test_metric_constant_gives_uniform_bonds():
    xs = np.linspace(-10, 10, 41)
    c = 3.0
    # a constant f has no horizon, so feed the bond formula through a callable-free path
    fs = np.where(xs < 0, -c, c)
    metric = MetricSpec.tabulated(xs, fs, j_h=1, d=1.0)
    k = profile_from_metric(metric, 6).couplings[1:]
    # samples to the right of the step are all c
    np.testing.assert_allclose(k[1:], c / 4, rtol=1e-12)


def test_tabulated_metric_sign_change_bond():
    xs = np.linspace(-5, 5, 101)
    metric = MetricSpec.tabulated(xs, xs - 0.3, j_h=3, d=1.0)
    assert metric.horizon() == pytest.approx(0.3, abs=1e-12)
    k = profile_from_metric(metric, 6).couplings
    assert np.flatnonzero(np.diff(np.sign(k))).tolist() == [1]


def test_tabulated_metric_range_and_shape_errors():
    xs = np.linspace(-2, 2, 21)
    metric = MetricSpec.tabulated(xs, xs, j_h=1)
    with pytest.raises(InvalidParameter):
        profile_from_metric(metric, 10)
    with pytest.raises(InvalidParameter):
        MetricSpec.tabulated(xs, np.cos(xs), j_h=1)
    with pytest.raises(InvalidParameter):
        MetricSpec.tabulated(xs, -xs, j_h=1)
    with pytest.raises(InvalidParameter):
        MetricSpec.tanh(-1.0, 0.3, 1)


def test_disorder_zero_width_is_clean():
    p = device_profile()
    h = disorder_hamiltonian(p, 0.0, 0.0, 99)
    assert h == HamiltonianSpec(p)
    assert h.nnn_couplings is None


def test_disorder_reproducible_and_bounded():
    p = device_profile()
    w_nnn, w_mu = mhz_to_angular(0.1), mhz_to_angular(0.2)
    a = disorder_hamiltonian(p, w_nnn, w_mu, 7)
    b = disorder_hamiltonian(p, w_nnn, w_mu, 7)
    c = disorder_hamiltonian(p, w_nnn, w_mu, 8)
    assert a == b and a != c
    assert a.nnn_couplings.tobytes() == b.nnn_couplings.tobytes()
    assert np.all(np.abs(a.nnn_couplings) <= w_nnn) and np.all(np.abs(a.profile.onsite) <= w_mu)
    assert angular_to_mhz(np.max(np.abs(a.profile.onsite))) < 0.2
    assert np.array_equal(a.profile.couplings, p.couplings)
    with pytest.raises(InvalidParameter):
        disorder_hamiltonian(p, -1.0, 0.0, 0)


def test_disorder_mu_stream_independent_of_nnn_width():
    p = device_profile()
    a = disorder_hamiltonian(p, 0.0, 1.0, 3)
    b = disorder_hamiltonian(p, 0.5, 1.0, 3)
    assert np.array_equal(a.profile.onsite, b.profile.onsite)


def test_sector_matrix_small_cases():
    h = HamiltonianSpec(device_profile())
    assert sector_matrix(h, 0).tolist() == [[0.0]]
    m1 = sector_matrix(h, 1)
    np.testing.assert_array_equal(np.diag(m1, 1), -h.profile.couplings)
    assert not np.triu(m1, 2).any()
    with pytest.raises(InvalidParameter):
        sector_matrix(h, 11)


def test_sector_matrix_with_nnn_and_onsite():
    p = CouplingProfile([1.0, 2.0, 3.0], [0.1, 0.2, 0.3, 0.4])
    h = HamiltonianSpec(p, [0.5, 0.7])
    m1 = sector_matrix(h, 1)
    np.testing.assert_array_equal(np.diag(m1), -p.onsite)
    np.testing.assert_array_equal(np.diag(m1, 2), [0.5, 0.7])


def test_two_excitation_block_is_projection_of_full_operator():
    rng = np.random.default_rng(0)
    p = CouplingProfile(rng.normal(size=3), rng.normal(size=4))
    h = HamiltonianSpec(p, rng.normal(size=2))
    full = dense_hamiltonian(p.couplings, p.onsite, h.nnn_couplings)
    idx = list(sector_masks(4, 2))
    assert sector_matrix(h, 2).shape == (6, 6)
    np.testing.assert_allclose(sector_matrix(h, 2), full[np.ix_(idx, idx)], atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 6), seed=st.integers(0, 2**32 - 1), with_nnn=st.booleans())
def test_sectors_assemble_to_dense_operator(n, seed, with_nnn):
    rng = np.random.default_rng(seed)
    p = CouplingProfile(rng.normal(size=n - 1), rng.normal(size=n))
    nnn = rng.normal(size=n - 2) if with_nnn and n > 2 else None
    h = HamiltonianSpec(p, nnn)
    full = full_matrix(h)
    np.testing.assert_allclose(full, dense_hamiltonian(p.couplings, p.onsite, nnn), atol=1e-14, rtol=0)
    for k in range(n + 1):
        m = sector_matrix(h, k)
        assert np.array_equal(m, m.T)


def test_profile_validation():
    with pytest.raises(InvalidParameter):
        CouplingProfile([1.0], [0.0, 0.0, 0.0])
    with pytest.raises(InvalidParameter):
        CouplingProfile([np.nan], [0.0, 0.0])
    with pytest.raises(InvalidParameter):
        HamiltonianSpec(device_profile(), np.zeros(3))


def test_profile_table_round_trip(tmp_path):
    p = device_profile()
    path = tmp_path / "profile.tsv"
    write_profile_table(p, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "bond\tkappa_mhz" and len(lines) == 10
    np.testing.assert_allclose(read_profile_table(path).couplings, p.couplings, rtol=1e-14)
    path.write_text("bond\tkappa_mhz\n2\t1.0\n1\t1.0\n")
    with pytest.raises(DimensionMismatch):
        read_profile_table(path)
