"""Renormalized 3-d lattice quartic model: counterterms and the first-order
semi-implicit Euler scheme.

The dynamics on the periodic lattice with spacing eps is

    dPhi = (Lap_eps Phi - Phi^3 + m Phi) dt + dW,
    m = 3 C0 - 9 (C11 + C12),

driven by i.i.d. site noise of variance dt * eps^-3. One step is

    R^n    = Phi^n + dt (-(Phi^n)^3 + m Phi^n) + dW^n        (physical space)
    Phi^{n+1}(k) = R^n(k) / (1 + dt lam_eps(k))               (Fourier space)

with the cube dealiased by the 1/2 rule and the division taken over the
half-spectrum. The implicit multiplier satisfies |1/(1 + dt lam)| <= 1
for every dt, so the stiff linear part is unconditionally stable.

Counterterms (both strictly positive, divergent under lattice refinement):

* C0 — pointwise variance of the stationary free lattice field,
      (1/L^3) sum_{k != 0} 1 / (2 lam_eps(k)),
  summed over every nonzero lattice mode. Pinned by a Monte Carlo
  stationary-variance oracle rather than trusted from the convention.
* C11 — principal second-order (sunset-type) constant,
      integral_0^inf  eps^3 sum_x p_s(x) q_s(x)^2  ds,
  where p_s is the lattice heat kernel e^(s Lap_eps) and q_s the
  stationary two-time correlation of the free field,
  q_s(x) = (1/L^3) sum_{k != 0} e^(-s lam_eps(k)) / (2 lam_eps(k))
  e^(i k x). This is the constant produced by one Duhamel iteration of
  the squared Wick power: E[X^w2(t) X^w2(s)] = 2 q_{t-s}^2, propagated by
  the heat semigroup and integrated over the auxiliary time s. Both
  kernels are synthesized by FFT at each node of a log-spaced composite
  Simpson rule; the rule self-checks by halving the node count. The bare
  heat-kernel cube integral is not used: it grows like eps^-4 (the mass
  shift it implies overwhelms the explicit part of the stepper under
  refinement), whereas p q^2 carries the known logarithmic second-order
  divergence.
* C12 — bounded sideband correction, fixed to zero here; exposed as a
  config override so completing the counterterm is a data change.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .chaos import ChaosBasisSpec, WickFeatureVector, wick_features
from .errors import BlowupError, QuadratureError, WickfieldError
from .grid import GridSpec, RealField, projection_mask, wavenumber_table
from .noise import (
    KIND_LATTICE_3D,
    InitialCondition,
    NoisePath,
    SeedSpec,
    integrals_from_channels,
    iter_noise_increments,
)


@dataclass(frozen=True)
class Phi43Config:
    grid: GridSpec
    T: float = 1.0
    dt: float = 1e-4
    n_save: int = 2
    u0: InitialCondition = field(default_factory=lambda: InitialCondition("white-noise"))
    chaos: ChaosBasisSpec = field(default_factory=lambda: ChaosBasisSpec(1, 4, 3))
    c12: float = 0.0
    quadrature_points: int = 257
    linear_only: bool = False

    def __post_init__(self) -> None:
        if self.grid.dim != 3:
            raise WickfieldError("Phi43Config requires a 3-d grid")
        if not (0 < self.dt <= self.T):
            raise WickfieldError("need 0 < dt <= T")
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-8 * steps:
            raise WickfieldError("T must be an integer multiple of dt")
        if self.n_save < 1 or round(steps) % self.n_save != 0:
            raise WickfieldError("n_save must divide the step count evenly")

    @property
    def n_steps(self) -> int:
        return round(self.T / self.dt)

    @property
    def save_times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_save + 1)


@dataclass(frozen=True)
class Counterterms:
    C0: float
    C11: float
    C12: float = 0.0

    @property
    def mass_shift(self) -> float:
        return 3.0 * self.C0 - 9.0 * (self.C11 + self.C12)


@dataclass
class Phi43Trajectory:
    config: Phi43Config
    seed: SeedSpec
    times: np.ndarray
    phi: np.ndarray  # (n_save + 1, n, n, n)
    counterterms: Counterterms
    xi: np.ndarray
    wick: WickFeatureVector


def _full_lattice_symbols(grid: GridSpec) -> np.ndarray:
    """Discrete symbols of every nonzero lattice mode (full spectrum)."""
    n = grid.n_per_axis
    ints = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
    axes = np.meshgrid(*([ints] * grid.dim), indexing="ij")
    eps = grid.spacing
    lam = np.zeros(grid.shape)
    for m in axes:
        lam = lam + (4.0 / eps**2) * np.sin(np.pi * m / n) ** 2
    nonzero = np.ones(grid.shape, dtype=bool)
    nonzero[(0,) * grid.dim] = False
    return lam[nonzero]


def compute_C0(grid: GridSpec) -> float:
    """Stationary variance-per-site of the free lattice field."""
    if grid.dim != 3:
        raise WickfieldError("C0 is defined for 3-d grids")
    lam = _full_lattice_symbols(grid)
    return float(np.sum(1.0 / (2.0 * lam)) / grid.domain_length**3)


def _sunset_integrand(grid: GridSpec, weights: np.ndarray, s_nodes: np.ndarray) -> np.ndarray:
    """eps^3 sum_x p_s(x) q_s(x)^2 at each s, kernels synthesized via FFT."""
    lam_half = wavenumber_table(grid).discrete
    scale = grid.n_per_axis**grid.dim / grid.domain_length**3
    out = np.empty(len(s_nodes))
    for i, s in enumerate(s_nodes):
        damp = np.exp(-s * lam_half)
        heat = np.fft.irfftn(damp * scale, s=grid.shape, axes=(-3, -2, -1))
        corr = np.fft.irfftn(damp * weights * scale, s=grid.shape, axes=(-3, -2, -1))
        out[i] = grid.spacing**3 * np.sum(heat * corr**2)
    return out


def _free_spectral_weights(grid: GridSpec) -> np.ndarray:
    lam_half = wavenumber_table(grid).discrete
    with np.errstate(divide="ignore"):
        w = 1.0 / (2.0 * lam_half)
    w[(0,) * grid.dim] = 0.0  # zero mode removed; it never equilibrates
    return w


def _simpson_log_axis(f, u_lo: float, u_hi: float, points: int) -> float:
    if points % 2 == 0:
        points += 1
    u = np.linspace(u_lo, u_hi, points)
    s = np.exp(u)
    vals = f(s) * s  # ds = s du
    h = (u_hi - u_lo) / (points - 1)
    w = np.ones(points)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float(h / 3.0 * np.sum(w * vals))


def c11_quadrature_bounds(grid: GridSpec) -> tuple[float, float]:
    """(s_min, s_max) of the auxiliary-time integral.

    The integrand decays like e^(-2 lam_min s) at large s and is bounded
    at s = 0 by the lattice cutoff, so the omitted head strip contributes
    O(s_min). Exposed so independent oracle evaluations can share the
    exact quadrature nodes.
    """
    lam_min = float(_full_lattice_symbols(grid).min())
    return 1e-10 * grid.spacing**2, 30.0 / lam_min


def compute_C11(grid: GridSpec, quadrature_points: int = 257) -> float:
    """Second-order counterterm by log-axis Simpson quadrature in s.

    Deterministic given (grid, quadrature_points). The node count is
    internally halved and the two results compared; disagreement above 1%
    raises QuadratureError instead of returning a silently wrong constant.
    """
    if grid.dim != 3:
        raise WickfieldError("C11 is defined for 3-d grids")
    if quadrature_points < 16:
        raise WickfieldError("quadrature_points must be at least 16")
    weights = _free_spectral_weights(grid)
    s_min, s_max = c11_quadrature_bounds(grid)

    def f(s_nodes: np.ndarray) -> np.ndarray:
        return _sunset_integrand(grid, weights, s_nodes)

    fine = _simpson_log_axis(f, np.log(s_min), np.log(s_max), quadrature_points)
    coarse = _simpson_log_axis(f, np.log(s_min), np.log(s_max), quadrature_points // 2)
    if abs(fine - coarse) > 0.01 * abs(fine):
        raise QuadratureError(
            f"C11 quadrature not converged: {coarse:.6e} vs {fine:.6e} "
            f"at {quadrature_points} points"
        )
    return fine


def compute_counterterms(cfg: Phi43Config) -> Counterterms:
    return Counterterms(
        C0=compute_C0(cfg.grid),
        C11=compute_C11(cfg.grid, cfg.quadrature_points),
        C12=cfg.c12,
    )


class _Phi43Stepper:
    """Precomputed implicit multipliers and dealias masks for one (grid, dt)."""

    def __init__(self, grid: GridSpec, dt: float, counterterms: Counterterms,
                 linear_only: bool = False):
        self.grid = grid
        self.dt = dt
        self.mass = counterterms.mass_shift
        self.linear_only = linear_only
        self.implicit = 1.0 / (1.0 + dt * wavenumber_table(grid).discrete)
        self.dealias_mask = projection_mask(grid, grid.dealias_cutoff)

    def step_hat(self, phihat: np.ndarray, increment: np.ndarray, step: int) -> np.ndarray:
        shape = self.grid.shape
        if self.linear_only:
            rhat = phihat * (1.0 + self.dt * self.mass)
        else:
            phi_d = np.fft.irfftn(self.dealias_mask * phihat, s=shape, axes=(-3, -2, -1))
            cube_hat = np.fft.rfftn(phi_d**3)
            cube_hat *= self.dealias_mask
            rhat = phihat + self.dt * (-cube_hat + self.mass * phihat)
        rhat = rhat + np.fft.rfftn(increment)
        out = rhat * self.implicit
        if not np.all(np.isfinite(out)):
            raise BlowupError(
                f"lattice field became non-finite at step {step} (t = {step * self.dt:.6g})",
                step=step,
                time=step * self.dt,
            )
        return out


def phi43_step(
    state: RealField,
    counterterms: Counterterms,
    dt: float,
    noise_increment: np.ndarray,
) -> RealField:
    """One semi-implicit update of the lattice field (single-shot surface).

    Long runs should use solve_phi43/run_phi43, which reuse the
    precomputed multipliers across steps.
    """
    stepper = _Phi43Stepper(state.grid, dt, counterterms)
    phihat = np.fft.rfftn(state.values)
    out = stepper.step_hat(phihat, np.asarray(noise_increment, dtype=np.float64), 1)
    return RealField(state.grid, np.fft.irfftn(out, s=state.grid.shape, axes=(-3, -2, -1)))


def solve_phi43(
    cfg: Phi43Config,
    initial: np.ndarray,
    increments: Iterable[np.ndarray],
    counterterms: Counterterms,
) -> tuple[np.ndarray, np.ndarray]:
    """Drive the stepper over a stream of noise increments."""
    stepper = _Phi43Stepper(cfg.grid, cfg.dt, counterterms, cfg.linear_only)
    stride = cfg.n_steps // cfg.n_save
    phihat = np.fft.rfftn(np.asarray(initial, dtype=np.float64))
    snaps = np.empty((cfg.n_save + 1,) + cfg.grid.shape)
    snaps[0] = initial
    out = 1
    n = 0
    for increment in increments:
        phihat = stepper.step_hat(phihat, increment, n + 1)
        n += 1
        if n % stride == 0:
            snaps[out] = np.fft.irfftn(phihat, s=cfg.grid.shape, axes=(-3, -2, -1))
            out += 1
    if n != cfg.n_steps:
        raise WickfieldError(f"expected {cfg.n_steps} increments, consumed {n}")
    return cfg.save_times, snaps


def solve_phi43_path(
    cfg: Phi43Config, path: NoisePath, counterterms: Counterterms, initial: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """solve_phi43 over an eagerly stored path (dt-refinement studies)."""
    if path.kind != KIND_LATTICE_3D or path.grid != cfg.grid:
        raise WickfieldError("noise path does not match the configuration")
    if path.n_steps != cfg.n_steps or abs(path.dt - cfg.dt) > 1e-12 * cfg.dt:
        raise WickfieldError("noise path discretization does not match the configuration")
    return solve_phi43(cfg, initial, path.increments, counterterms)


def run_phi43(
    cfg: Phi43Config, seed: SeedSpec, counterterms: Counterterms | None = None
) -> Phi43Trajectory:
    """Full trajectory with streamed noise (the increment record of a 3-d run
    at production resolution would not fit in memory). The scalar noise
    channel feeding the Wick features is accumulated on the fly."""
    if counterterms is None:
        counterterms = compute_counterterms(cfg)
    initial = cfg.u0.realize(seed, cfg.grid)
    stream = iter_noise_increments(
        seed, cfg.grid, cfg.n_steps, cfg.dt, KIND_LATTICE_3D
    )
    means = np.empty(cfg.n_steps)

    def observed(source):
        for n, increment in enumerate(source):
            means[n] = increment.mean()
            yield increment

    times, snaps = solve_phi43(cfg, initial, observed(stream), counterterms)
    channel = means[None, :] * cfg.grid.domain_length ** (cfg.grid.dim / 2.0)
    xi = integrals_from_channels(channel, cfg.dt, cfg.chaos.J)
    wick = wick_features(xi, cfg.chaos)
    return Phi43Trajectory(cfg, seed, times, snaps, counterterms, xi, wick)
