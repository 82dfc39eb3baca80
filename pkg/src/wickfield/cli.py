"""Command-line surface: simulation runs, verification suites, snapshot export.

stdout carries machine-parseable key=value lines; diagnostics go to
stderr. Exit codes: 0 success, 1 verification failure, 2 config parse
error, 3 trajectory blow-up, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .dataset import read_dataset
from .errors import BlowupError, DatasetError, WickfieldError
from .pipeline import generate_dataset

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_IO = 4


def _emit(**kv) -> None:
    for key, value in kv.items():
        print(f"{key}={value}")


def _load_config(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise SystemExit(_fail(EXIT_IO, f"cannot read config: {exc}"))
    except json.JSONDecodeError as exc:
        raise SystemExit(_fail(EXIT_CONFIG, f"config is not valid JSON: {exc}"))
    if not isinstance(data, dict) or "config" not in data:
        raise SystemExit(_fail(EXIT_CONFIG, "config must be an object with a 'config' field"))
    return data


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _default_threads() -> int:
    env = os.environ.get("WICKFIELD_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _cmd_simulate(args, equation: str) -> int:
    data = _load_config(args.config)
    if data.get("equation", equation) != equation:
        return _fail(EXIT_CONFIG, f"config is tagged {data.get('equation')!r}, expected {equation!r}")
    master_seed = args.master_seed if args.master_seed is not None else data.get("master_seed")
    n_traj = (
        args.n_trajectories
        if args.n_trajectories is not None
        else data.get("n_trajectories")
    )
    if master_seed is None or n_traj is None:
        return _fail(EXIT_CONFIG, "master seed and trajectory count required (flag or config)")
    started = time.time()
    try:
        manifest, summary = generate_dataset(
            equation, data["config"], int(master_seed), int(n_traj), args.out,
            workers=args.threads,
        )
    except BlowupError as exc:
        return _fail(EXIT_BLOWUP, f"trajectory blow-up: {exc}")
    except (WickfieldError, ValueError, KeyError, TypeError) as exc:
        return _fail(EXIT_CONFIG, f"bad configuration: {exc}")
    except OSError as exc:
        return _fail(EXIT_IO, f"write failed: {exc}")
    elapsed = time.time() - started
    _emit(
        equation=equation,
        out=args.out,
        master_seed=master_seed,
        n_trajectories=n_traj,
        files=summary["files"],
        bytes=summary["bytes"],
        seconds=f"{elapsed:.2f}",
        trajectories_per_second=f"{(int(n_traj) / elapsed if elapsed > 0 else 0):.2f}",
    )
    if equation == "phi43":
        _emit(
            C0=manifest.config["C0"],
            C11=manifest.config["C11"],
            C12=manifest.config["C12"],
            mass_shift=manifest.config["mass_shift"],
        )
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .verify import run_suite

    try:
        results = run_suite(args.suite)
    except KeyError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    width = max(len(r.name) for r in results)
    ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status}  {r.name:<{width}}  {r.detail}")
        ok &= r.passed
    _emit(suite=args.suite, checks=len(results), passed=sum(r.passed for r in results))
    return EXIT_OK if ok else EXIT_VERIFY


def _slice_2d(field: np.ndarray, z_index: int) -> np.ndarray:
    if field.ndim == 2:
        return field
    return field[:, :, z_index]


def _cmd_export(args) -> int:
    try:
        records, manifest = read_dataset(args.dataset)
    except DatasetError as exc:
        return _fail(EXIT_IO, f"cannot read dataset: {exc}")
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))
    if args.trajectory < 0 or args.trajectory >= len(records):
        return _fail(EXIT_CONFIG, f"trajectory {args.trajectory} not in dataset (0..{len(records)-1})")
    record = records[args.trajectory]
    field_name = "u" if manifest.equation == "phi42" else "phi"
    snaps = record.snapshots[field_name]
    save_times = np.asarray(manifest.config["save_times"])
    wanted = [float(t) for t in args.times.split(",")]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = 0
    for t in wanted:
        hits = np.nonzero(np.isclose(save_times, t, rtol=0, atol=1e-9))[0]
        if len(hits) == 0:
            return _fail(EXIT_CONFIG, f"time {t} not among saved times {list(save_times)}")
        plane = _slice_2d(snaps[hits[0]], args.z_index)
        stem = f"traj{args.trajectory:05d}_t{t:g}"
        if args.format == "csv":
            path = out_dir / f"{stem}.csv"
            np.savetxt(path, plane, delimiter=",", fmt="%.9g")
        else:
            path = out_dir / f"{stem}.pgm"
            lo, hi = float(plane.min()), float(plane.max())
            span = hi - lo if hi > lo else 1.0
            pixels = np.round((plane - lo) / span * 255.0).astype(np.uint8)
            header = f"P5\n{plane.shape[1]} {plane.shape[0]}\n255\n".encode("ascii")
            path.write_bytes(header + pixels.tobytes())
            sidecar = {"min": lo, "max": hi, "time": t, "trajectory": args.trajectory}
            (out_dir / f"{stem}.json").write_text(json.dumps(sidecar, indent=2))
        _emit(written=str(path))
        written += 1
    _emit(n_exported=written, resolution=plane.shape[0])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wickfield",
        description="Simulate renormalized phi^4 dynamics and extract Wick-chaos features.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for eq in ("phi42", "phi43"):
        p = sub.add_parser(f"simulate-{eq}", help=f"generate a {eq} dataset")
        p.add_argument("config", help="JSON config file (a dataset manifest also works)")
        p.add_argument("--master-seed", type=int, default=None)
        p.add_argument("--n-trajectories", type=int, default=None)
        p.add_argument("--out", required=True, help="destination dataset directory")
        p.add_argument("--threads", type=int, default=_default_threads(),
                       help="trajectory-parallel worker count (env WICKFIELD_THREADS)")
        p.set_defaults(func=lambda a, eq=eq: _cmd_simulate(a, eq))

    p = sub.add_parser("verify", help="run an oracle suite")
    p.add_argument("--suite", required=True, choices=["chaos", "phi42", "phi43", "io"])
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("export-snapshots", help="export 2-d slices as CSV or PGM")
    p.add_argument("dataset", help="dataset directory")
    p.add_argument("--trajectory", type=int, default=0)
    p.add_argument("--times", required=True, help="comma-separated saved times")
    p.add_argument("--format", choices=["csv", "pgm"], default="csv")
    p.add_argument("--z-index", type=int, default=0, help="z-plane for 3-d fields")
    p.add_argument("--out", default="snapshots")
    p.set_defaults(func=_cmd_export)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    code = args.func(args)
    return code


if __name__ == "__main__":
    sys.exit(main())
