import numpy as np
import pytest

from wickfield.errors import BlowupError, WickfieldError
from wickfield.grid import GridSpec, RealField, wavenumber_table
from wickfield.noise import (
    KIND_LATTICE_3D,
    InitialCondition,
    SeedSpec,
    iter_noise_increments,
    sample_noise_path,
)
from wickfield.phi43 import (
    Counterterms,
    Phi43Config,
    compute_C0,
    compute_C11,
    compute_counterterms,
    phi43_step,
    run_phi43,
    solve_phi43,
    solve_phi43_path,
)
from wickfield.verify import _brute_force_C0

GRID = GridSpec(3, 8, 2.0 * np.pi)


def test_config_validation():
    with pytest.raises(WickfieldError):
        Phi43Config(GridSpec(2, 8, 1.0))
    with pytest.raises(WickfieldError):
        Phi43Config(GRID, T=1.0, dt=1e-3, n_save=7)


def test_C0_matches_brute_force_sum():
    g = GridSpec(3, 4, 2.0 * np.pi)
    got = compute_C0(g)
    want = _brute_force_C0(4, g.domain_length)
    assert abs(got - want) <= 1e-12 * want


def test_C0_scaling_and_monotonicity():
    values = [compute_C0(GridSpec(3, n, 2.0 * np.pi)) for n in (8, 16, 32)]
    assert values[0] < values[1] < values[2]
    # halving eps roughly doubles C0 (Green function UV behavior)
    for coarse, fine in zip(values, values[1:]):
        ratio = fine / coarse
        assert abs(ratio - 2.0) / 2.0 < 0.15


def test_C11_positive_and_refinement_monotone():
    c4 = compute_C11(GridSpec(3, 4, 2.0 * np.pi), 129)
    c8 = compute_C11(GridSpec(3, 8, 2.0 * np.pi), 129)
    c16 = compute_C11(GridSpec(3, 16, 2.0 * np.pi), 129)
    assert 0.0 < c4 < c8 < c16


def test_C11_quadrature_self_convergence():
    fine = compute_C11(GRID, 256)
    coarse = compute_C11(GRID, 128)
    assert abs(fine - coarse) / fine < 0.01


def test_C11_rejects_too_few_points():
    with pytest.raises(WickfieldError):
        compute_C11(GRID, 8)


def test_counterterm_signs_and_determinism():
    ct1 = compute_counterterms(Phi43Config(GRID))
    ct2 = compute_counterterms(Phi43Config(GRID))
    assert ct1 == ct2
    assert ct1.C0 > 0 and ct1.C11 > 0 and ct1.C12 == 0.0
    assert ct1.mass_shift == 3.0 * ct1.C0 - 9.0 * ct1.C11
    ct3 = Counterterms(ct1.C0, ct1.C11, C12=0.5)
    assert ct3.mass_shift == pytest.approx(ct1.mass_shift - 4.5)


def test_step_zero_fixed_point():
    ct = Counterterms(0.0, 0.0)
    state = RealField(GRID, np.zeros(GRID.shape))
    out = phi43_step(state, ct, 1e-3, np.zeros(GRID.shape))
    assert np.all(out.values == 0.0)


def test_step_linear_multiplier():
    cfg = Phi43Config(GRID, T=0.02, dt=1e-3, n_save=1, linear_only=True)
    ct = Counterterms(0.0, 0.0)
    mode = InitialCondition("cosine-mode", amplitude=1.0, mode=3).realize(SeedSpec(0, 0), GRID)
    _, snaps = solve_phi43(cfg, mode, np.zeros((cfg.n_steps,) + GRID.shape), ct)
    lam = wavenumber_table(GRID).discrete[3, 0, 0]
    mult = (1.0 / (1.0 + cfg.dt * lam)) ** cfg.n_steps
    got = np.fft.rfftn(snaps[-1])[3, 0, 0].real
    want = np.fft.rfftn(mode)[3, 0, 0].real * mult
    assert abs(got - want) <= 1e-12 * abs(want)


def test_mass_shift_enters_with_plus_sign():
    # tiny field, zero noise: zero mode grows by (1 + dt m) per step
    cfg = Phi43Config(GRID, T=0.02, dt=1e-3, n_save=1)
    ct = Counterterms(C0=1.0, C11=0.0)  # m = 3
    tiny = np.full(GRID.shape, 1e-8)
    _, snaps = solve_phi43(cfg, tiny, np.zeros((cfg.n_steps,) + GRID.shape), ct)
    growth = snaps[-1].mean() / 1e-8
    assert growth == pytest.approx((1.0 + cfg.dt * 3.0) ** cfg.n_steps, rel=1e-9)


@pytest.mark.filterwarnings("ignore:overflow")
@pytest.mark.filterwarnings("ignore:invalid value")
def test_blowup_aborts_with_step():
    cfg = Phi43Config(GRID, T=0.01, dt=1e-3, n_save=1)
    ct = Counterterms(0.0, 0.0)
    huge = np.full(GRID.shape, 1e30)
    with pytest.raises(BlowupError) as err:
        solve_phi43(cfg, huge, np.zeros((cfg.n_steps,) + GRID.shape), ct)
    assert err.value.step is not None


def test_streamed_equals_eager_path():
    cfg = Phi43Config(GRID, T=0.02, dt=1e-3, n_save=2)
    ct = Counterterms(0.1, 0.01)
    seed = SeedSpec(77, 2)
    initial = cfg.u0.realize(seed, GRID)
    path = sample_noise_path(seed, GRID, cfg.n_steps, cfg.dt, KIND_LATTICE_3D)
    _, eager = solve_phi43_path(cfg, path, ct, initial)
    stream = iter_noise_increments(seed, GRID, cfg.n_steps, cfg.dt, KIND_LATTICE_3D, chunk=7)
    _, streamed = solve_phi43(cfg, initial, stream, ct)
    assert np.array_equal(eager, streamed)


def test_run_deterministic_with_white_noise_start():
    cfg = Phi43Config(GRID, T=0.05, dt=1e-3, n_save=1)
    ct = compute_counterterms(cfg)
    t1 = run_phi43(cfg, SeedSpec(9, 0), ct)
    t2 = run_phi43(cfg, SeedSpec(9, 0), ct)
    assert np.array_equal(t1.phi, t2.phi)
    assert np.array_equal(t1.wick.values, t2.wick.values)
    ic_var = t1.phi[0].var()
    target = 1.0 / cfg.grid.spacing**3
    assert abs(ic_var - target) / target < 0.25
    assert t1.wick.values[0] == 1.0


def test_short_run_bounded_statistics():
    grid = GridSpec(3, 16, 2.0 * np.pi)
    cfg = Phi43Config(grid, T=0.5, dt=2e-4, n_save=2)
    traj = run_phi43(cfg, SeedSpec(31, 0))
    assert np.all(np.isfinite(traj.phi))
    ratio = traj.phi[2].var() / traj.phi[1].var()
    assert 0.1 < ratio < 10.0
