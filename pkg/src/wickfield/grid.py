"""Periodic lattice geometry and spectral transforms.

All fields live on a uniform periodic grid with ``n_per_axis`` points per
axis on a torus of side ``domain_length``. Arrays are row-major with the
axis order fixed (x1, x2[, x3]) and the last axis contiguous.

FFT convention, fixed project-wide: the forward transform is the unscaled
real-input DFT (``numpy.fft.rfftn``), the inverse carries the 1/n_total
factor (``numpy.fft.irfftn``). Spectral arrays therefore hold the
half-spectrum of the last axis only; Hermitian symmetry is implied by the
layout.

Two Laplacian symbols are tabulated per retained mode k:

* continuous: ``|2 pi k / L|^2`` (spectral Galerkin in dimension 2),
* discrete:   ``(4 / eps^2) sum_j sin^2(k_j eps / 2)``, the exact Fourier
  symbol of the nearest-neighbour lattice Laplacian (dimension 3).

Dealiasing follows the 1/2 rule for cubic nonlinearities: modes with
max-norm index above ``n_per_axis // 4`` are zeroed before and after the
pointwise cube. It is applied inside nonlinear evaluations only, never to
the evolving state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteFieldError, WickfieldError


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid in dimension 2 or 3."""

    dim: int
    n_per_axis: int
    domain_length: float

    def __post_init__(self) -> None:
        if self.dim not in (2, 3):
            raise WickfieldError(f"dim must be 2 or 3, got {self.dim}")
        n = self.n_per_axis
        if n < 4 or n % 2 != 0:
            raise WickfieldError(f"n_per_axis must be even and >= 4, got {n}")
        if not (self.domain_length > 0):
            raise WickfieldError("domain_length must be positive")

    @property
    def spacing(self) -> float:
        return self.domain_length / self.n_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_per_axis,) * self.dim

    @property
    def rfft_shape(self) -> tuple[int, ...]:
        return (self.n_per_axis,) * (self.dim - 1) + (self.n_per_axis // 2 + 1,)

    @property
    def n_total(self) -> int:
        return self.n_per_axis**self.dim

    @property
    def nyquist(self) -> int:
        return self.n_per_axis // 2

    @property
    def dealias_cutoff(self) -> int:
        # 1/2 rule: the nonlinearity is cubic, so triple products of modes
        # within n/4 cannot alias back into the retained band.
        return self.n_per_axis // 4

    def axis_coordinates(self) -> np.ndarray:
        return np.arange(self.n_per_axis) * self.spacing

    def mode_indices(self) -> tuple[np.ndarray, ...]:
        """Integer mode vectors per axis, broadcastable over rfft_shape."""
        n = self.n_per_axis
        full = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
        half = np.arange(n // 2 + 1, dtype=np.int64)
        axes = [full] * (self.dim - 1) + [half]
        return tuple(np.meshgrid(*axes, indexing="ij", sparse=True))


@dataclass
class RealField:
    """Scalar field sampled on the grid; values must be finite."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise WickfieldError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteFieldError("field contains non-finite values")


@dataclass
class SpectralField:
    """Half-spectrum coefficients of a real field under the project convention."""

    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.shape != self.grid.rfft_shape:
            raise WickfieldError(
                f"coefficient shape {self.coeffs.shape} does not match "
                f"half-spectrum layout {self.grid.rfft_shape}"
            )


@dataclass(frozen=True)
class WavenumberTable:
    """Per-mode bookkeeping over the half-spectrum layout.

    ``modes`` stacks the integer mode vectors along axis 0;
    ``continuous`` holds |2 pi k / L|^2 and ``discrete`` the lattice symbol
    lambda_eps(k). Both symbols vanish exactly at k = 0.
    """

    grid: GridSpec
    modes: np.ndarray
    continuous: np.ndarray
    discrete: np.ndarray
    inf_norm: np.ndarray


def wavenumber_table(grid: GridSpec) -> WavenumberTable:
    """Tabulate integer modes and both Laplacian symbols for the grid."""
    idx = grid.mode_indices()
    modes = np.stack(np.broadcast_arrays(*idx))
    L = grid.domain_length
    n = grid.n_per_axis
    eps = grid.spacing
    continuous = np.zeros(grid.rfft_shape)
    discrete = np.zeros(grid.rfft_shape)
    for m in idx:
        continuous = continuous + (2.0 * np.pi * m / L) ** 2
        # k_j eps / 2 with k_j = 2 pi m / L reduces to pi m / n.
        discrete = discrete + (4.0 / eps**2) * np.sin(np.pi * m / n) ** 2
    inf_norm = np.max(np.abs(modes), axis=0)
    return WavenumberTable(grid, modes, continuous, discrete, inf_norm)


def forward_fft(f: RealField) -> SpectralField:
    """Unscaled forward real FFT of a finite field."""
    if not np.all(np.isfinite(f.values)):
        raise NonFiniteFieldError("forward_fft input contains non-finite values")
    return SpectralField(f.grid, np.fft.rfftn(f.values))


def inverse_fft(f: SpectralField) -> RealField:
    """Inverse of forward_fft (carries the 1/n_total normalization)."""
    return RealField(f.grid, np.fft.irfftn(f.coeffs, s=f.grid.shape, axes=tuple(range(-f.grid.dim, 0))))


def mode_inf_norm(grid: GridSpec) -> np.ndarray:
    idx = grid.mode_indices()
    return np.max(np.abs(np.stack(np.broadcast_arrays(*idx))), axis=0)


def projection_mask(grid: GridSpec, cutoff: int) -> np.ndarray:
    """Boolean mask retaining modes with max-norm index <= cutoff."""
    if cutoff < 0 or cutoff > grid.nyquist:
        raise WickfieldError(
            f"cutoff {cutoff} outside valid range [0, {grid.nyquist}]"
        )
    return mode_inf_norm(grid) <= cutoff

def spectral_project(f: SpectralField, cutoff: int) -> SpectralField:
    """Zero all modes above the max-norm cutoff; retained modes unchanged."""
    mask = projection_mask(f.grid, cutoff)
    return SpectralField(f.grid, np.where(mask, f.coeffs, 0.0))


def project_values(values: np.ndarray, grid: GridSpec, cutoff: int) -> np.ndarray:
    """spectral_project applied to raw physical-space arrays.

    Accepts stacked fields (leading axes are broadcast); used on hot paths
    where wrapper objects would be wasteful.
    """
    mask = projection_mask(grid, cutoff)
    coeffs = np.fft.rfftn(values, axes=tuple(range(-grid.dim, 0)))
    coeffs *= mask
    return np.fft.irfftn(coeffs, s=grid.shape, axes=tuple(range(-grid.dim, 0)))


def dealias_cubic(f: RealField) -> RealField:
    """Pointwise cube with 1/2-rule dealiasing applied before and after."""
    out = cube_dealiased(f.values, f.grid)
    if not np.all(np.isfinite(out)):
        raise NonFiniteFieldError("dealiased cube produced non-finite values")
    return RealField(f.grid, out)


def cube_dealiased(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Raw-array core of dealias_cubic (leading axes broadcast)."""
    cut = grid.dealias_cutoff
    truncated = project_values(values, grid, cut)
    return project_values(truncated**3, grid, cut)
