"""Standalone reader for the simulator's dataset wire format.

Implements the documented contract directly (32-byte-header tensor files,
CRC-32-checked JSON manifest, canonical Wick-feature ordering) without
importing the simulator package: the dataset directory is the only
coupling between the two codebases.

Model inputs are assembled per scheme:

* ``w``     — Wick feature channels (each scalar broadcast over the grid)
              plus normalized coordinate channels and a constant time
              channel; the initial condition is fixed across the dataset.
* ``w-u0``  — the same plus the t = 0 snapshot as an extra channel.

The renormalization constant is never assembled into the input. Feature
channel order is pinned by the manifest's chaos-ordering digest, which is
recomputed here and must match before anything is loaded.
"""

from __future__ import annotations

import hashlib
import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

_MAGIC = b"WCF1"
_HEADER_LEN = 32
_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}


class DataFormatError(RuntimeError):
    pass


def read_tensor(path: Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER_LEN or blob[:4] != _MAGIC:
        raise DataFormatError(f"{path}: not a WCF1 tensor")
    code, rank = blob[4], blob[5]
    if code not in _DTYPES:
        raise DataFormatError(f"{path}: unknown dtype code {code}")
    dims_end = _HEADER_LEN + 8 * rank
    shape = struct.unpack(f"<{rank}Q", blob[_HEADER_LEN:dims_end])
    dtype = _DTYPES[code]
    expected = dims_end + int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(blob) != expected:
        raise DataFormatError(f"{path}: length {len(blob)} != header-implied {expected}")
    return np.frombuffer(blob[dims_end:], dtype=dtype).reshape(shape).copy()


def canonical_ordering(I: int, J: int, K: int) -> list[tuple[int, ...]]:
    """Graded-lex multi-index ordering, the documented feature-column order."""
    n = I * J

    def compositions(total: int, slots: int):
        if slots == 1:
            yield (total,)
            return
        for first in range(total + 1):
            for rest in compositions(total - first, slots - 1):
                yield (first,) + rest

    out: list[tuple[int, ...]] = []
    for level in range(K + 1):
        out.extend(compositions(level, n))
    return out


def ordering_digest(I: int, J: int, K: int) -> str:
    payload = f"I={I};J={J};K={K};" + ";".join(
        ",".join(map(str, alpha)) for alpha in canonical_ordering(I, J, K)
    )
    return hashlib.sha256(payload.encode("ascii")).hexdigest()


@dataclass
class FieldDataset:
    """One dataset directory, fully loaded: features, snapshots, metadata."""

    manifest: dict
    features: np.ndarray  # (n_traj, F) float64
    u0: np.ndarray  # (n_traj, n, n) float32
    target: np.ndarray  # (n_traj, n, n) float32, final-time snapshot
    grid_n: int
    horizon: float
    chaos: tuple[int, int, int]

    @property
    def n_trajectories(self) -> int:
        return self.features.shape[0]


def load_dataset(directory) -> FieldDataset:
    root = Path(directory)
    manifest = json.loads((root / "manifest.json").read_text())
    if manifest.get("format_version") != 1:
        raise DataFormatError(f"unsupported format_version {manifest.get('format_version')}")
    if manifest.get("equation") != "phi42":
        raise DataFormatError("model datasets must come from the 2-d pipeline")
    for entry in manifest["files"]:
        blob = (root / entry["name"]).read_bytes()
        if len(blob) != entry["bytes"] or zlib.crc32(blob) != entry["crc32"]:
            raise DataFormatError(f"{entry['name']}: checksum or length mismatch")
    cfg = manifest["config"]
    chaos = (cfg["chaos"]["I"], cfg["chaos"]["J"], cfg["chaos"]["K"])
    expected = ordering_digest(*chaos)
    if manifest["chaos_ordering_digest"] != expected:
        raise DataFormatError(
            "chaos ordering digest mismatch: feature columns are not in the "
            "canonical order this model assumes"
        )
    n_traj = manifest["n_trajectories"]
    if n_traj == 0:
        raise DataFormatError("dataset is empty")
    features = read_tensor(root / "wick_features.wcf")
    u_all = [read_tensor(root / f"traj{i:05d}_u.wcf") for i in range(n_traj)]
    u0 = np.stack([u[0] for u in u_all])
    target = np.stack([u[-1] for u in u_all])
    return FieldDataset(
        manifest=manifest,
        features=features,
        u0=u0,
        target=target,
        grid_n=cfg["grid"]["n_per_axis"],
        horizon=float(cfg["T"]),
        chaos=chaos,
    )


SCHEMES = ("w", "w-u0")


def assemble_inputs(ds: FieldDataset, scheme: str, dtype=torch.float32) -> torch.Tensor:
    """Input tensor (n_traj, C, n, n): feature channels, coords, time[, u0]."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    n = ds.grid_n
    B, F = ds.features.shape
    channels = [
        np.broadcast_to(
            ds.features.astype(np.float32)[:, :, None, None], (B, F, n, n)
        )
    ]
    axis = np.linspace(0.0, 1.0, n, endpoint=False, dtype=np.float32)
    x1, x2 = np.meshgrid(axis, axis, indexing="ij")
    coords = np.broadcast_to(np.stack([x1, x2])[None], (B, 2, n, n))
    channels.append(coords)
    channels.append(np.full((B, 1, n, n), ds.horizon, dtype=np.float32))
    if scheme == "w-u0":
        channels.append(ds.u0[:, None].astype(np.float32))
    stacked = np.concatenate(channels, axis=1)
    return torch.from_numpy(stacked.copy()).to(dtype)


def input_channels(chaos: tuple[int, int, int], scheme: str) -> int:
    import math

    I, J, K = chaos
    n_features = math.comb(I * J + K, K)
    return n_features + 3 + (1 if scheme == "w-u0" else 0)


def targets_tensor(ds: FieldDataset, dtype=torch.float32) -> torch.Tensor:
    return torch.from_numpy(ds.target.copy()).to(dtype)
