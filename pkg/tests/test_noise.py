import numpy as np
import pytest

from wickfield.errors import WickfieldError
from wickfield.grid import GridSpec, forward_fft, RealField, wavenumber_table
from wickfield.noise import (
    KIND_LATTICE_3D,
    KIND_SPECTRAL_2D,
    InitialCondition,
    SeedSpec,
    coarsen_noise_path,
    cosine_basis,
    gaussian_integrals,
    initial_white_field,
    iter_noise_increments,
    sample_noise_path,
    scalar_channels,
)


@pytest.fixture
def grid2d():
    return GridSpec(2, 16, 2.0 * np.pi)


@pytest.fixture
def grid3d():
    return GridSpec(3, 8, 1.0)


def test_seed_spec_validation():
    with pytest.raises(WickfieldError):
        SeedSpec(2**64, 0)
    with pytest.raises(WickfieldError):
        SeedSpec(0, -1)


def test_determinism_bit_exact(grid2d):
    a = sample_noise_path(SeedSpec(10, 3), grid2d, 32, 1e-3, KIND_SPECTRAL_2D, cutoff=4)
    b = sample_noise_path(SeedSpec(10, 3), grid2d, 32, 1e-3, KIND_SPECTRAL_2D, cutoff=4)
    assert np.array_equal(a.increments, b.increments)
    c = sample_noise_path(SeedSpec(10, 4), grid2d, 32, 1e-3, KIND_SPECTRAL_2D, cutoff=4)
    assert not np.array_equal(a.increments, c.increments)


def test_streaming_matches_eager(grid3d):
    seed = SeedSpec(77, 1)
    eager = sample_noise_path(seed, grid3d, 50, 1e-3, KIND_LATTICE_3D)
    for chunk in (1, 7, 64):
        streamed = np.stack(
            list(iter_noise_increments(seed, grid3d, 50, 1e-3, KIND_LATTICE_3D, chunk=chunk))
        )
        assert np.array_equal(streamed, eager.increments)


def test_empty_path(grid2d):
    p = sample_noise_path(SeedSpec(1, 0), grid2d, 0, 1e-3, KIND_SPECTRAL_2D, cutoff=4)
    assert p.increments.shape == (0, 16, 16)


def test_lattice_3d_site_variance():
    # per-site variance dt * eps^-3 within 2% over >= 1e5 samples
    g = GridSpec(3, 8, 1.0)
    dt = 1e-3
    p = sample_noise_path(SeedSpec(42, 0), g, 200, dt, KIND_LATTICE_3D)
    target = dt / g.spacing**3
    sample_var = p.increments.var()
    assert p.increments.size >= 100_000
    assert abs(sample_var - target) / target < 0.02


def test_spectral_2d_support_and_mode_variance(grid2d):
    cutoff = 4
    p = sample_noise_path(SeedSpec(8, 0), grid2d, 400, 1e-3, KIND_SPECTRAL_2D, cutoff=cutoff)
    table = wavenumber_table(grid2d)
    coeffs = np.fft.rfftn(p.increments, axes=(-2, -1))
    outside = table.inf_norm > cutoff
    assert np.max(np.abs(coeffs[:, outside])) < 1e-12
    # complex pair modes: E|c|^2 = dt in orthonormal units c = coeff * L / n^2
    n2, L = grid2d.n_per_axis**2, grid2d.domain_length
    c = coeffs[:, 2, 1] * L / n2
    var = np.mean(np.abs(c) ** 2)
    assert abs(var - p.dt) / p.dt < 0.25  # 400 samples, loose bound
    # zero mode is real with variance dt in the same units
    c0 = coeffs[:, 0, 0].real * L / n2
    assert abs(c0.var() - p.dt) / p.dt < 0.25


def test_moment_sanity_large_sample():
    g = GridSpec(3, 16, 1.0)
    p = sample_noise_path(SeedSpec(314, 0), g, 256, 1e-3, KIND_LATTICE_3D)
    x = p.increments.ravel()
    assert x.size >= 1_000_000
    z = (x - x.mean()) / x.std()
    skew = np.mean(z**3)
    kurt = np.mean(z**4) - 3.0
    assert abs(skew) < 0.05
    assert abs(kurt) < 0.1


def test_cross_trajectory_independence(grid2d):
    a = sample_noise_path(SeedSpec(5, 0), grid2d, 500, 1e-3, KIND_SPECTRAL_2D, cutoff=4)
    b = sample_noise_path(SeedSpec(5, 1), grid2d, 500, 1e-3, KIND_SPECTRAL_2D, cutoff=4)
    x, y = a.increments.ravel(), b.increments.ravel()
    corr = np.corrcoef(x, y)[0, 1]
    # pooled increments are weakly dependent within a path; 3/sqrt(n) is generous
    assert abs(corr) < 3.0 / np.sqrt(x.size / 16)


def test_validation_errors(grid2d, grid3d):
    with pytest.raises(WickfieldError):
        sample_noise_path(SeedSpec(1, 0), grid2d, 8, -1.0, KIND_SPECTRAL_2D, cutoff=4)
    with pytest.raises(WickfieldError):
        sample_noise_path(SeedSpec(1, 0), grid2d, 8, 1e-3, KIND_SPECTRAL_2D, cutoff=99)
    with pytest.raises(WickfieldError):
        sample_noise_path(SeedSpec(1, 0), grid2d, 8, 1e-3, KIND_LATTICE_3D)
    with pytest.raises(WickfieldError):
        sample_noise_path(SeedSpec(1, 0), grid3d, 8, 1e-3, "bogus")


def test_cosine_basis_orthonormal():
    T = 2.0
    n = 4000
    times = (np.arange(n) + 0.5) * (T / n)  # midpoint rule for the pure quadrature check
    e = cosine_basis(5, T, times)
    gram = e @ e.T * (T / n)
    assert np.allclose(gram, np.eye(5), atol=1e-4)


def test_gaussian_integrals_zero_path(grid2d):
    p = sample_noise_path(SeedSpec(2, 0), grid2d, 64, 1e-3, KIND_SPECTRAL_2D, cutoff=4)
    p.increments[:] = 0.0
    xi = gaussian_integrals(p, J=4)
    assert np.array_equal(xi, np.zeros(4))


def test_gaussian_integrals_variance_unit():
    # Var(xi_11) = 1: e_1 = T^(-1/2) so xi_11 = W_T / sqrt(T)
    g = GridSpec(2, 8, 2.0 * np.pi)
    vals = []
    for k in range(3000):
        p = sample_noise_path(SeedSpec(1000, k), g, 32, 1e-2, KIND_SPECTRAL_2D, cutoff=2)
        vals.append(gaussian_integrals(p, J=1)[0])
    vals = np.asarray(vals)
    se = np.sqrt(2.0 / len(vals))
    assert abs(vals.var() - 1.0) < 3.0 * se


def test_gaussian_integrals_covariance_identity():
    g = GridSpec(2, 4, 1.0)
    J = 3
    n_paths = 30_000
    xs = np.empty((n_paths, J))
    for k in range(n_paths):
        p = sample_noise_path(SeedSpec(2000, k), g, 128, 1.0 / 128, KIND_SPECTRAL_2D, cutoff=1)
        xs[k] = gaussian_integrals(p, J=J)
    cov = xs.T @ xs / n_paths
    for a in range(J):
        for b in range(a, J):
            prods = xs[:, a] * xs[:, b]
            se = prods.std(ddof=1) / np.sqrt(n_paths)
            target = 1.0 if a == b else 0.0
            assert abs(prods.mean() - target) <= 3.0 * se, (a, b, cov)


def test_gaussian_integrals_resolvability_guard(grid2d):
    p = sample_noise_path(SeedSpec(3, 0), grid2d, 16, 1e-3, KIND_SPECTRAL_2D, cutoff=4)
    with pytest.raises(WickfieldError):
        gaussian_integrals(p, J=5)  # 16 steps resolve at most J = 4


def test_low_mode_channels_unit_rate(grid2d):
    p = sample_noise_path(SeedSpec(21, 0), grid2d, 2000, 1e-3, KIND_SPECTRAL_2D, cutoff=4)
    w = scalar_channels(p, I=5, channels="low-modes")
    assert w.shape == (5, 2000)
    rates = w.var(axis=1) / p.dt
    assert np.all(np.abs(rates - 1.0) < 0.2)


def test_coarsen_aggregates_brownian_increments(grid2d):
    p = sample_noise_path(SeedSpec(9, 0), grid2d, 64, 1e-3, KIND_SPECTRAL_2D, cutoff=4)
    c = coarsen_noise_path(p, 4)
    assert c.n_steps == 16 and c.dt == pytest.approx(4e-3)
    assert np.allclose(c.increments[0], p.increments[:4].sum(axis=0))
    assert np.allclose(c.increments.sum(axis=0), p.increments.sum(axis=0))
    with pytest.raises(WickfieldError):
        coarsen_noise_path(p, 7)


def test_initial_conditions(grid2d):
    seed = SeedSpec(4, 0)
    assert np.all(InitialCondition("zero").realize(seed, grid2d) == 0.0)
    assert np.all(InitialCondition("constant", value=2.5).realize(seed, grid2d) == 2.5)
    smooth = InitialCondition("random-smooth", amplitude=0.7, max_mode=2)
    f = smooth.realize(seed, grid2d)
    assert np.sqrt(np.mean(f**2)) == pytest.approx(0.7)
    coeffs = forward_fft(RealField(grid2d, f)).coeffs
    table = wavenumber_table(grid2d)
    assert np.max(np.abs(coeffs[table.inf_norm > 2])) < 1e-9
    g3 = GridSpec(3, 8, 1.0)
    w = initial_white_field(SeedSpec(4, 1), g3)
    assert abs(w.var() - 1.0 / g3.spacing**3) / (1.0 / g3.spacing**3) < 0.05
    mode = InitialCondition("cosine-mode", amplitude=2.0, mode=3).realize(seed, grid2d)
    x = grid2d.axis_coordinates()
    assert np.allclose(mode[:, 0], 2.0 * np.cos(3.0 * x))
    rt = InitialCondition.from_dict(smooth.to_dict())
    assert rt == smooth
