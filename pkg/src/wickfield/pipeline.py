"""Dataset generation: config schema, trajectory workers, reproducibility.

Config files and dataset manifests share one JSON schema; a run's manifest
is itself a valid config for regeneration. Top level::

    {
      "equation": "phi42" | "phi43",
      "master_seed": <uint64>,
      "n_trajectories": <int>,
      "config": { ... equation-specific, see below ... }
    }

The equation config carries the grid, time discretization, chaos
truncation, temporal basis tag, and initial-condition spec. Manifests add
``save_times`` and the file inventory.

Generation is embarrassingly parallel across trajectories; the
counter-based RNG keying makes results independent of worker scheduling,
so a parallel run is byte-identical to a serial one.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable

import numpy as np

from .chaos import ChaosBasisSpec, ordering_digest
from .dataset import DatasetManifest, TrajectoryRecord, write_dataset
from .errors import WickfieldError
from .grid import GridSpec
from .noise import InitialCondition, SeedSpec
from .phi42 import Phi42Config, run_phi42
from .phi43 import Counterterms, Phi43Config, compute_counterterms, run_phi43


def grid_to_dict(grid: GridSpec) -> dict:
    return {
        "dim": grid.dim,
        "n_per_axis": grid.n_per_axis,
        "domain_length": grid.domain_length,
    }


def grid_from_dict(data: dict) -> GridSpec:
    return GridSpec(
        dim=int(data["dim"]),
        n_per_axis=int(data["n_per_axis"]),
        domain_length=float(data["domain_length"]),
    )


def chaos_to_dict(spec: ChaosBasisSpec) -> dict:
    return {"I": spec.I, "J": spec.J, "K": spec.K}


def chaos_from_dict(data: dict) -> ChaosBasisSpec:
    return ChaosBasisSpec(int(data["I"]), int(data["J"]), int(data["K"]))


def phi42_config_to_dict(cfg: Phi42Config, save_noise: bool = False) -> dict:
    return {
        "grid": grid_to_dict(cfg.grid),
        "cutoff": cfg.cutoff,
        "sigma": cfg.sigma,
        "T": cfg.T,
        "dt": cfg.dt,
        "n_save": cfg.n_save,
        "chaos": chaos_to_dict(cfg.chaos),
        "temporal_basis": "cosine",
        "u0": cfg.u0.to_dict(),
        "save_noise": save_noise,
        "save_times": list(cfg.save_times),
    }


def phi42_config_from_dict(data: dict) -> Phi42Config:
    return Phi42Config(
        grid=grid_from_dict(data["grid"]),
        cutoff=int(data["cutoff"]),
        sigma=float(data.get("sigma", 1.0)),
        T=float(data["T"]),
        dt=float(data["dt"]),
        n_save=int(data["n_save"]),
        u0=InitialCondition.from_dict(data.get("u0", {"kind": "zero"})),
        chaos=chaos_from_dict(data.get("chaos", {"I": 1, "J": 4, "K": 3})),
    )


def phi43_config_to_dict(cfg: Phi43Config) -> dict:
    return {
        "grid": grid_to_dict(cfg.grid),
        "T": cfg.T,
        "dt": cfg.dt,
        "n_save": cfg.n_save,
        "chaos": chaos_to_dict(cfg.chaos),
        "temporal_basis": "cosine",
        "u0": cfg.u0.to_dict(),
        "c12": cfg.c12,
        "quadrature_points": cfg.quadrature_points,
        "save_times": list(cfg.save_times),
    }


def phi43_config_from_dict(data: dict) -> Phi43Config:
    return Phi43Config(
        grid=grid_from_dict(data["grid"]),
        T=float(data["T"]),
        dt=float(data["dt"]),
        n_save=int(data["n_save"]),
        u0=InitialCondition.from_dict(data.get("u0", {"kind": "white-noise"})),
        chaos=chaos_from_dict(data.get("chaos", {"I": 1, "J": 4, "K": 3})),
        c12=float(data.get("c12", 0.0)),
        quadrature_points=int(data.get("quadrature_points", 257)),
    )


def _phi42_record(cfg: Phi42Config, master_seed: int, index: int, save_noise: bool) -> TrajectoryRecord:
    traj = run_phi42(cfg, SeedSpec(master_seed, index))
    return TrajectoryRecord(
        trajectory_index=index,
        seed=traj.seed,
        wick_values=traj.wick.values,
        snapshots={"u": traj.u, "v": traj.v, "X": traj.X},
        a_eps=traj.renorm.a_values,
        noise=None,
    )


def _phi43_record(cfg: Phi43Config, master_seed: int, index: int, ct: Counterterms) -> TrajectoryRecord:
    traj = run_phi43(cfg, SeedSpec(master_seed, index), counterterms=ct)
    return TrajectoryRecord(
        trajectory_index=index,
        seed=traj.seed,
        wick_values=traj.wick.values,
        snapshots={"phi": traj.phi},
        a_eps=None,
        noise=None,
    )


def _map_trajectories(worker: Callable, indices: range, workers: int) -> list:
    if workers <= 1 or len(indices) <= 1:
        return [worker(i) for i in indices]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, indices, chunksize=max(1, len(indices) // (4 * workers))))


class _Phi42Worker:
    def __init__(self, cfg: Phi42Config, master_seed: int, save_noise: bool):
        self.cfg = cfg
        self.master_seed = master_seed
        self.save_noise = save_noise

    def __call__(self, index: int) -> TrajectoryRecord:
        return _phi42_record(self.cfg, self.master_seed, index, self.save_noise)


class _Phi43Worker:
    def __init__(self, cfg: Phi43Config, master_seed: int, ct: Counterterms):
        self.cfg = cfg
        self.master_seed = master_seed
        self.ct = ct

    def __call__(self, index: int) -> TrajectoryRecord:
        return _phi43_record(self.cfg, self.master_seed, index, self.ct)


def generate_dataset(
    equation: str,
    config: dict,
    master_seed: int,
    n_trajectories: int,
    destination,
    workers: int = 1,
) -> tuple[DatasetManifest, dict]:
    """Simulate n_trajectories and write them as a dataset directory."""
    if n_trajectories < 0:
        raise WickfieldError("n_trajectories must be non-negative")
    if equation == "phi42":
        cfg = phi42_config_from_dict(config)
        save_noise = bool(config.get("save_noise", False))
        worker: Callable = _Phi42Worker(cfg, master_seed, save_noise)
        config_out = phi42_config_to_dict(cfg, save_noise)
        chaos = cfg.chaos
        extra = {}
    elif equation == "phi43":
        cfg = phi43_config_from_dict(config)
        ct = compute_counterterms(cfg)
        worker = _Phi43Worker(cfg, master_seed, ct)
        config_out = phi43_config_to_dict(cfg)
        chaos = cfg.chaos
        extra = {"C0": ct.C0, "C11": ct.C11, "C12": ct.C12, "mass_shift": ct.mass_shift}
    else:
        raise WickfieldError(f"unknown equation tag {equation!r}")

    records = _map_trajectories(worker, range(n_trajectories), workers) if n_trajectories else []
    config_out.update(extra)
    manifest = DatasetManifest(
        equation=equation,
        config=config_out,
        master_seed=int(master_seed),
        n_trajectories=n_trajectories,
        chaos_ordering_digest=ordering_digest(chaos),
    )
    summary = write_dataset(records, manifest, destination)
    return manifest, summary


def regenerate_dataset(manifest: DatasetManifest, destination, workers: int = 1):
    """Re-run generation from a manifest; output must be byte-identical."""
    return generate_dataset(
        manifest.equation,
        manifest.config,
        manifest.master_seed,
        manifest.n_trajectories,
        destination,
        workers=workers,
    )
