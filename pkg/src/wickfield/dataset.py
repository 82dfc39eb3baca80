"""Bit-exact dataset serialization: minimal tensor container plus manifest.

Wire format (the cross-language contract; field names and byte layout are
frozen at format_version 1):

* one binary file per tensor, layout::

      bytes 0..3    magic "WCF1"
      byte  4       dtype code (1 = little-endian float32, 2 = float64)
      byte  5       rank
      bytes 6..31   reserved, zero
      then          rank x 8 bytes of u64-le dimension sizes
      then          raw row-major data

* ``manifest.json`` — human-readable structured text carrying the format
  version, equation tag, full generation config, master seed, trajectory
  count, the canonical chaos-ordering digest, and a per-file inventory of
  byte lengths and CRC-32 checksums.

A manifest plus the binaries fully determines deserialization, and the
manifest doubles as a generation config, so regeneration from
(master_seed, config) reproduces every tensor bit-exactly. Readers verify
checksums and declared sizes before returning anything.

Field snapshots are stored as float32; Wick features, renormalization
constants, and time stamps as float64.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ChecksumError, DatasetError
from .noise import SeedSpec

FORMAT_VERSION = 1
_MAGIC = b"WCF1"
_HEADER_LEN = 32
_DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODE_FOR_KIND = {"float32": 1, "float64": 2}


def write_tensor(path: Path, array: np.ndarray) -> None:
    array = np.ascontiguousarray(array)
    code = _CODE_FOR_KIND.get(array.dtype.name)
    if code is None:
        raise DatasetError(f"unsupported dtype {array.dtype} for {path}")
    header = _MAGIC + bytes([code, array.ndim]) + b"\x00" * (_HEADER_LEN - 6)
    dims = struct.pack(f"<{array.ndim}Q", *array.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(dims)
        fh.write(array.astype(_DTYPE_CODES[code], copy=False).tobytes(order="C"))


def read_tensor(path: Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER_LEN or blob[:4] != _MAGIC:
        raise DatasetError(f"{path}: not a WCF1 tensor file")
    code, rank = blob[4], blob[5]
    if code not in _DTYPE_CODES:
        raise DatasetError(f"{path}: unknown dtype code {code}")
    if any(blob[6:_HEADER_LEN]):
        raise DatasetError(f"{path}: reserved header bytes not zero")
    dims_end = _HEADER_LEN + 8 * rank
    if len(blob) < dims_end:
        raise DatasetError(f"{path}: truncated dimension block")
    shape = struct.unpack(f"<{rank}Q", blob[_HEADER_LEN:dims_end])
    dtype = _DTYPE_CODES[code]
    expected = dims_end + int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(blob) != expected:
        raise DatasetError(
            f"{path}: file length {len(blob)} disagrees with header-implied {expected}"
        )
    return np.frombuffer(blob[dims_end:], dtype=dtype).reshape(shape).copy()


@dataclass
class TrajectoryRecord:
    """One sample: identity, Wick features, constants, and field snapshots."""

    trajectory_index: int
    seed: SeedSpec
    wick_values: np.ndarray
    snapshots: dict[str, np.ndarray]
    a_eps: np.ndarray | None = None
    noise: np.ndarray | None = None


@dataclass
class DatasetManifest:
    equation: str
    config: dict
    master_seed: int
    n_trajectories: int
    chaos_ordering_digest: str
    format_version: int = FORMAT_VERSION
    files: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        payload = {
            "format_version": self.format_version,
            "equation": self.equation,
            "master_seed": self.master_seed,
            "n_trajectories": self.n_trajectories,
            "chaos_ordering_digest": self.chaos_ordering_digest,
            "config": self.config,
            "files": self.files,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        data = json.loads(text)
        version = data.get("format_version")
        if version != FORMAT_VERSION:
            raise DatasetError(f"unsupported format_version {version!r}")
        return cls(
            equation=data["equation"],
            config=data["config"],
            master_seed=data["master_seed"],
            n_trajectories=data["n_trajectories"],
            chaos_ordering_digest=data["chaos_ordering_digest"],
            format_version=version,
            files=data["files"],
        )


def _field_names(equation: str) -> tuple[str, ...]:
    if equation == "phi42":
        return ("u", "v", "X")
    if equation == "phi43":
        return ("phi",)
    raise DatasetError(f"unknown equation tag {equation!r}")


def _traj_file(index: int, name: str) -> str:
    return f"traj{index:05d}_{name}.wcf"


def write_dataset(
    records: list[TrajectoryRecord], manifest: DatasetManifest, destination
) -> dict:
    """Write tensors plus manifest; returns a {files, bytes} summary."""
    dest = Path(destination)
    dest.mkdir(parents=True, exist_ok=True)
    if len(records) != manifest.n_trajectories:
        raise DatasetError(
            f"{len(records)} records but manifest declares {manifest.n_trajectories}"
        )
    names = _field_names(manifest.equation)
    written: list[str] = []

    def emit(name: str, array: np.ndarray) -> None:
        write_tensor(dest / name, array)
        written.append(name)

    if records:
        times = np.asarray(manifest.config["save_times"], dtype=np.float64)
        emit("times.wcf", times)
        feats = np.stack([r.wick_values for r in records]).astype(np.float64)
        emit("wick_features.wcf", feats)
        if manifest.equation == "phi42":
            a = np.stack([r.a_eps for r in records]).astype(np.float64)
            emit("a_eps.wcf", a)
        for rec in records:
            for name in names:
                snap = rec.snapshots[name]
                if snap.shape[0] != len(times):
                    raise DatasetError(
                        f"trajectory {rec.trajectory_index}: snapshot count "
                        f"{snap.shape[0]} does not match manifest"
                    )
                emit(_traj_file(rec.trajectory_index, name), snap.astype(np.float32))
            if rec.noise is not None:
                emit(_traj_file(rec.trajectory_index, "noise"), rec.noise.astype(np.float32))

    manifest.files = []
    total = 0
    for name in written:
        blob = (dest / name).read_bytes()
        manifest.files.append(
            {"name": name, "bytes": len(blob), "crc32": zlib.crc32(blob)}
        )
        total += len(blob)
    (dest / "manifest.json").write_text(manifest.to_json())
    return {"files": len(written) + 1, "bytes": total}


def read_dataset(source) -> tuple[list[TrajectoryRecord], DatasetManifest]:
    """Inverse of write_dataset; checksum verification is mandatory."""
    src = Path(source)
    manifest_path = src / "manifest.json"
    if not manifest_path.exists():
        raise DatasetError(f"{src}: no manifest.json")
    manifest = DatasetManifest.from_json(manifest_path.read_text())
    tensors: dict[str, np.ndarray] = {}
    for entry in manifest.files:
        path = src / entry["name"]
        if not path.exists():
            raise DatasetError(f"{path}: listed in manifest but missing")
        blob = path.read_bytes()
        if len(blob) != entry["bytes"]:
            raise DatasetError(
                f"{path}: byte length {len(blob)} != manifest {entry['bytes']}"
            )
        if zlib.crc32(blob) != entry["crc32"]:
            raise ChecksumError(f"{path}: checksum mismatch")
        tensors[entry["name"]] = read_tensor(path)

    records: list[TrajectoryRecord] = []
    names = _field_names(manifest.equation)
    if manifest.n_trajectories > 0:
        feats = tensors["wick_features.wcf"]
        a_all = tensors.get("a_eps.wcf")
        for i in range(manifest.n_trajectories):
            snapshots = {}
            for name in names:
                key = _traj_file(i, name)
                if key not in tensors:
                    raise DatasetError(f"missing tensor {key}")
                snapshots[name] = tensors[key]
            noise = tensors.get(_traj_file(i, "noise"))
            records.append(
                TrajectoryRecord(
                    trajectory_index=i,
                    seed=SeedSpec(manifest.master_seed, i),
                    wick_values=feats[i],
                    snapshots=snapshots,
                    a_eps=None if a_all is None else a_all[i],
                    noise=noise,
                )
            )
    return records, manifest
