"""Simulation and Wick-chaos feature toolkit for renormalized phi^4 dynamics
on periodic lattices in dimensions 2 and 3."""

from .chaos import (
    ChaosBasisSpec,
    WickFeatureVector,
    enumerate_indices,
    hermite,
    ordering_digest,
    wick_features,
)
from .dataset import DatasetManifest, TrajectoryRecord, read_dataset, write_dataset
from .errors import (
    BlowupError,
    ChecksumError,
    DatasetError,
    NonFiniteFieldError,
    QuadratureError,
    WickfieldError,
)
from .grid import (
    GridSpec,
    RealField,
    SpectralField,
    WavenumberTable,
    dealias_cubic,
    forward_fft,
    inverse_fft,
    spectral_project,
    wavenumber_table,
)
from .noise import (
    InitialCondition,
    NoisePath,
    SeedSpec,
    coarsen_noise_path,
    gaussian_integrals,
    sample_noise_path,
)
from .phi42 import (
    Phi42Config,
    Phi42Trajectory,
    RenormConstant,
    renorm_constant,
    run_phi42,
    solve_direct_renormalized,
    solve_shift_equation,
    stochastic_convolution,
    wick_cube,
    wick_square,
)
from .phi43 import (
    Counterterms,
    Phi43Config,
    Phi43Trajectory,
    compute_C0,
    compute_C11,
    phi43_step,
    run_phi43,
)
from .pipeline import generate_dataset, regenerate_dataset

__version__ = "0.1.0"
