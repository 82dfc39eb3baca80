"""Reproducible driving-noise generation and scalar Gaussian integrals.

Reproducibility contract: every random draw comes from a Philox
counter-based stream derived as

    SeedSequence(master_seed, spawn_key=(traj_lo, traj_hi, channel))

so a (master_seed, trajectory_index) pair determines the whole noise path
bit-exactly, independent of how trajectories are scheduled across
workers. Within a trajectory the draw order is fixed: channel 0 yields
the step increments in step order (site order row-major within a step),
channel 1 the initial condition. Chunked and step-by-step generation
consume the stream identically, so streaming solvers and eagerly stored
paths see the same increments.

Two noise kinds are produced:

* ``spectral-truncated-2d`` — space-time white noise restricted to the
  band |k|_inf <= cutoff. Sampled as i.i.d. site noise of variance
  dt * (n/L)^2 and spectrally projected; the retained modes then carry
  independent Gaussian increments with variance dt per real degree of
  freedom (before any sigma scaling, which is left to the solvers).
* ``lattice-white-3d`` — i.i.d. per-site increments of variance
  dt * eps^-3, the lattice white noise of the 3-d model.

The scalar integrals xi_ij = int e_j(s) dW^(i)(s) are approximated by
Ito-Riemann sums against an orthonormal cosine basis of L^2([0, T]).
The default scalar channel W^(1) is the spatial mean of the noise,
rescaled by L^(d/2) to unit quadratic-variation rate; low spatial Fourier
modes are available as additional channels behind ``channels="low-modes"``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import WickfieldError
from .grid import GridSpec, projection_mask

KIND_SPECTRAL_2D = "spectral-truncated-2d"
KIND_LATTICE_3D = "lattice-white-3d"

_CHANNEL_STEPS = 0
_CHANNEL_INITIAL = 1

# Temporal modes beyond n_steps/4 are not resolvable by the Riemann sum.
BASIS_RESOLUTION_FACTOR = 4


@dataclass(frozen=True)
class SeedSpec:
    """(master_seed, trajectory_index) — the complete identity of one path."""

    master_seed: int
    trajectory_index: int

    def __post_init__(self) -> None:
        if not (0 <= self.master_seed < 2**64):
            raise WickfieldError("master_seed must fit in 64 bits")
        if self.trajectory_index < 0:
            raise WickfieldError("trajectory_index must be non-negative")


@dataclass
class NoisePath:
    """Seeded record of per-step driving-noise increments for one trajectory."""

    seed: SeedSpec
    grid: GridSpec
    n_steps: int
    dt: float
    kind: str
    sigma: float
    cutoff: int | None
    increments: np.ndarray  # (n_steps, *grid.shape), unscaled by sigma

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt


def _stream(seed: SeedSpec, channel: int) -> np.random.Generator:
    traj = seed.trajectory_index
    key = np.random.SeedSequence(
        seed.master_seed,
        spawn_key=(traj & 0xFFFFFFFF, traj >> 32, channel),
    )
    return np.random.Generator(np.random.Philox(key))


def _site_scale(grid: GridSpec, dt: float, kind: str) -> float:
    # Both kinds are lattice white noise with per-site variance dt / eps^dim;
    # the 2-d kind is additionally band-limited afterwards.
    return np.sqrt(dt) * grid.spacing ** (-grid.dim / 2.0)


def _validate(grid: GridSpec, dt: float, kind: str, cutoff: int | None) -> None:
    if dt <= 0:
        raise WickfieldError("dt must be positive")
    if kind == KIND_SPECTRAL_2D:
        if grid.dim != 2:
            raise WickfieldError(f"{kind} requires a 2-d grid")
        if cutoff is None or cutoff < 0 or cutoff > grid.nyquist:
            raise WickfieldError(f"cutoff {cutoff} invalid for n={grid.n_per_axis}")
    elif kind == KIND_LATTICE_3D:
        if grid.dim != 3:
            raise WickfieldError(f"{kind} requires a 3-d grid")
    else:
        raise WickfieldError(f"unknown noise kind {kind!r}")


def _draw_steps(
    rng: np.random.Generator,
    grid: GridSpec,
    n: int,
    dt: float,
    kind: str,
    cutoff: int | None,
) -> np.ndarray:
    raw = rng.standard_normal((n,) + grid.shape) * _site_scale(grid, dt, kind)
    if kind == KIND_SPECTRAL_2D and n > 0:
        axes = (-2, -1)
        coeffs = np.fft.rfftn(raw, axes=axes)
        coeffs *= projection_mask(grid, cutoff)
        raw = np.fft.irfftn(coeffs, s=grid.shape, axes=axes)
    return raw


def sample_noise_path(
    seed: SeedSpec,
    grid: GridSpec,
    n_steps: int,
    dt: float,
    kind: str,
    cutoff: int | None = None,
    sigma: float = 1.0,
) -> NoisePath:
    """Generate the full increment record for one trajectory."""
    _validate(grid, dt, kind, cutoff)
    if n_steps < 0:
        raise WickfieldError("n_steps must be non-negative")
    rng = _stream(seed, _CHANNEL_STEPS)
    increments = _draw_steps(rng, grid, n_steps, dt, kind, cutoff)
    return NoisePath(seed, grid, n_steps, dt, kind, sigma, cutoff, increments)


def iter_noise_increments(
    seed: SeedSpec,
    grid: GridSpec,
    n_steps: int,
    dt: float,
    kind: str,
    cutoff: int | None = None,
    chunk: int = 64,
) -> Iterator[np.ndarray]:
    """Stream the same increments as sample_noise_path without storing them.

    Intended for large 3-d runs where the eager record would not fit in
    memory. Yields one (grid.shape) array per step.
    """
    _validate(grid, dt, kind, cutoff)
    rng = _stream(seed, _CHANNEL_STEPS)
    done = 0
    while done < n_steps:
        block = min(chunk, n_steps - done)
        batch = _draw_steps(rng, grid, block, dt, kind, cutoff)
        yield from batch
        done += block


def initial_white_field(seed: SeedSpec, grid: GridSpec) -> np.ndarray:
    """I.i.d. N(0, eps^-dim) per site, from the initial-condition channel."""
    rng = _stream(seed, _CHANNEL_INITIAL)
    return rng.standard_normal(grid.shape) * grid.spacing ** (-grid.dim / 2.0)


def initial_smooth_field(
    seed: SeedSpec, grid: GridSpec, amplitude: float, max_mode: int
) -> np.ndarray:
    """Random band-limited field with RMS equal to ``amplitude``."""
    rng = _stream(seed, _CHANNEL_INITIAL)
    raw = rng.standard_normal(grid.shape)
    coeffs = np.fft.rfftn(raw)
    coeffs *= projection_mask(grid, max_mode)
    field = np.fft.irfftn(coeffs, s=grid.shape, axes=tuple(range(-grid.dim, 0)))
    rms = np.sqrt(np.mean(field**2))
    if rms == 0.0:
        return field
    return field * (amplitude / rms)


@dataclass(frozen=True)
class InitialCondition:
    """Declarative initial-condition spec, reproducible from the trajectory seed.

    kinds: ``zero``; ``constant`` (uses ``value``); ``cosine-mode``
    (deterministic cos(2 pi m x1 / L) of the given ``mode`` index and
    ``amplitude``, for linear-regime and refinement studies);
    ``random-smooth`` (band-limited Gaussian field, RMS ``amplitude``,
    modes within ``max_mode``); ``white-noise`` (i.i.d. N(0, eps^-dim)
    per site).
    """

    kind: str = "zero"
    value: float = 0.0
    amplitude: float = 1.0
    max_mode: int = 2
    mode: int = 1

    def __post_init__(self) -> None:
        if self.kind not in ("zero", "constant", "cosine-mode", "random-smooth", "white-noise"):
            raise WickfieldError(f"unknown initial condition kind {self.kind!r}")

    def realize(self, seed: SeedSpec, grid: GridSpec) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(grid.shape)
        if self.kind == "constant":
            return np.full(grid.shape, float(self.value))
        if self.kind == "cosine-mode":
            x = grid.axis_coordinates()
            profile = self.amplitude * np.cos(2.0 * np.pi * self.mode * x / grid.domain_length)
            shape = (-1,) + (1,) * (grid.dim - 1)
            return profile.reshape(shape) * np.ones(grid.shape)
        if self.kind == "random-smooth":
            return initial_smooth_field(seed, grid, self.amplitude, self.max_mode)
        return initial_white_field(seed, grid)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "constant":
            out["value"] = self.value
        elif self.kind == "cosine-mode":
            out["amplitude"] = self.amplitude
            out["mode"] = self.mode
        elif self.kind == "random-smooth":
            out["amplitude"] = self.amplitude
            out["max_mode"] = self.max_mode
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "InitialCondition":
        return cls(**data)


def coarsen_noise_path(path: NoisePath, factor: int) -> NoisePath:
    """Aggregate consecutive increments: the same Brownian path on a coarser grid.

    Needed for dt-refinement studies on fixed noise — resampling at a
    coarser dt would draw a different realization.
    """
    if factor < 1 or path.n_steps % factor != 0:
        raise WickfieldError(f"factor {factor} does not divide n_steps {path.n_steps}")
    n_coarse = path.n_steps // factor
    agg = path.increments.reshape((n_coarse, factor) + path.grid.shape).sum(axis=1)
    return NoisePath(
        path.seed, path.grid, n_coarse, path.dt * factor, path.kind, path.sigma,
        path.cutoff, agg,
    )


def cosine_basis(J: int, horizon: float, times: np.ndarray) -> np.ndarray:
    """Orthonormal cosine basis of L^2([0, T]) evaluated at ``times``; shape (J, len(times))."""
    out = np.empty((J, len(times)))
    out[0] = horizon ** (-0.5)
    for j in range(2, J + 1):
        out[j - 1] = np.sqrt(2.0 / horizon) * np.cos((j - 1) * np.pi * times / horizon)
    return out


def _low_mode_channels(I: int) -> list[tuple[tuple[int, int], str]]:
    # Zero mode first, then conjugate-independent low modes, real part before
    # imaginary. (1, 0) precedes (0, 1) to match the axis order convention.
    base = [((0, 0), "re")]
    for mode in [(1, 0), (0, 1), (1, 1)]:
        base.append((mode, "re"))
        base.append((mode, "im"))
    if I > len(base):
        raise WickfieldError(f"at most {len(base)} low-mode channels available")
    return base[:I]


def scalar_channels(path: NoisePath, I: int = 1, channels: str = "zero-mode") -> np.ndarray:
    """Per-step scalar increments of the I noise channels, shape (I, n_steps).

    Each channel is normalized to unit quadratic-variation rate so the
    Gaussian integrals against an orthonormal basis have unit variance.
    """
    grid = path.grid
    L = grid.domain_length
    if channels == "zero-mode":
        if I != 1:
            raise WickfieldError("zero-mode channel extraction implies I = 1")
        means = path.increments.mean(axis=tuple(range(-grid.dim, 0)))
        return means[None, :] * L ** (grid.dim / 2.0)
    if channels == "low-modes":
        if grid.dim != 2:
            raise WickfieldError("low-mode channels are defined for 2-d noise")
        coeffs = np.fft.rfftn(path.increments, axes=(-2, -1))
        n2 = grid.n_per_axis**2
        rows = []
        for (kx, ky), part in _low_mode_channels(I):
            c = coeffs[:, kx, ky]
            if (kx, ky) == (0, 0):
                rows.append(np.real(c) * L / n2)
            else:
                comp = np.real(c) if part == "re" else np.imag(c)
                rows.append(comp * np.sqrt(2.0) * L / n2)
        return np.stack(rows)
    raise WickfieldError(f"unknown channel mode {channels!r}")


def integrals_from_channels(
    channel_increments: np.ndarray, dt: float, J: int, basis: str = "cosine"
) -> np.ndarray:
    """Ito-Riemann sums of (I, n_steps) unit-rate channel increments."""
    w = np.atleast_2d(np.asarray(channel_increments, dtype=np.float64))
    n_steps = w.shape[1]
    if J < 1:
        raise WickfieldError("J must be at least 1")
    if n_steps == 0:
        raise WickfieldError("cannot integrate against an empty path")
    if J > n_steps // BASIS_RESOLUTION_FACTOR:
        raise WickfieldError(
            f"J={J} not resolvable with {n_steps} steps "
            f"(maximum n_steps/{BASIS_RESOLUTION_FACTOR})"
        )
    if basis != "cosine":
        raise WickfieldError(f"unknown temporal basis {basis!r}")
    times = np.arange(n_steps) * dt  # left endpoints (Ito)
    e = cosine_basis(J, n_steps * dt, times)
    return np.einsum("jn,in->ij", e, w).reshape(-1)


def gaussian_integrals(
    path: NoisePath,
    J: int,
    basis: str = "cosine",
    I: int = 1,
    channels: str = "zero-mode",
) -> np.ndarray:
    """xi_ij = sum_n e_j(t_n) dW^(i)_n, flattened row-major over (i, j)."""
    w = scalar_channels(path, I=I, channels=channels)
    return integrals_from_channels(w, path.dt, J, basis=basis)
