"""Training and evaluation on simulator datasets.

The loss is the mean relative L2 error over the batch. Determinism
contract: with a fixed seed and single-threaded torch, two runs produce
identical reports and checkpoints.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import torch

from .data import FieldDataset, assemble_inputs, load_dataset, targets_tensor
from .model import ModelConfig, WceFilmNo


def relative_l2(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean over the batch of ||pred - target|| / ||target||."""
    flat_p = pred.reshape(pred.shape[0], -1)
    flat_t = target.reshape(target.shape[0], -1)
    num = torch.linalg.vector_norm(flat_p - flat_t, dim=1)
    den = torch.linalg.vector_norm(flat_t, dim=1)
    return (num / den).mean()


@dataclass
class TrainReport:
    config: dict
    digest: str
    train_curve: list[float]
    val_curve: list[float]
    final_train: float
    final_val: float
    seconds: float

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2)


def _split(ds_inputs, ds_targets, val_fraction: float):
    n = ds_inputs.shape[0]
    n_val = int(round(n * val_fraction))
    if n_val == 0:
        return (ds_inputs, ds_targets), (None, None)
    return (
        (ds_inputs[:-n_val], ds_targets[:-n_val]),
        (ds_inputs[-n_val:], ds_targets[-n_val:]),
    )


def train(
    dataset_dir,
    config: ModelConfig,
    seed: int = 0,
    deterministic: bool = True,
    dataset: FieldDataset | None = None,
) -> tuple[WceFilmNo, TrainReport]:
    if deterministic:
        torch.set_num_threads(1)
    torch.manual_seed(seed)
    ds = dataset if dataset is not None else load_dataset(dataset_dir)
    if tuple(ds.chaos) != tuple(config.chaos):
        raise ValueError(f"dataset chaos {ds.chaos} != model config {config.chaos}")
    inputs = assemble_inputs(ds, config.scheme)
    targets = targets_tensor(ds)
    (x_tr, y_tr), (x_val, y_val) = _split(inputs, targets, config.val_fraction)

    model = WceFilmNo(config)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)
    n = x_tr.shape[0]
    batch = min(config.batch_size, n)
    started = time.time()
    train_curve, val_curve = [], []
    for _epoch in range(config.epochs):
        model.train()
        perm = torch.randperm(n)
        for lo in range(0, n, batch):
            idx = perm[lo : lo + batch]
            optimizer.zero_grad()
            loss = relative_l2(model(x_tr[idx]), y_tr[idx])
            loss.backward()
            optimizer.step()
        model.eval()
        with torch.no_grad():
            train_curve.append(float(relative_l2(model(x_tr), y_tr)))
            val_curve.append(
                float(relative_l2(model(x_val), y_val)) if x_val is not None else float("nan")
            )
    report = TrainReport(
        config=config.to_dict(),
        digest=ds.manifest["chaos_ordering_digest"],
        train_curve=train_curve,
        val_curve=val_curve,
        final_train=train_curve[-1],
        final_val=val_curve[-1],
        seconds=time.time() - started,
    )
    return model, report


def save_checkpoint(model: WceFilmNo, report: TrainReport, path) -> None:
    torch.save(
        {
            "state_dict": model.state_dict(),
            "config": model.config.to_dict(),
            "digest": report.digest,
        },
        path,
    )


def load_checkpoint(path) -> tuple[WceFilmNo, str]:
    payload = torch.load(path, weights_only=True)
    config = ModelConfig.from_dict(payload["config"])
    model = WceFilmNo(config)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload["digest"]


def evaluate(model: WceFilmNo, dataset_dir, expected_digest: str | None = None) -> float:
    """Mean relative L2 of the model over one dataset."""
    ds = load_dataset(dataset_dir)
    if expected_digest is not None and ds.manifest["chaos_ordering_digest"] != expected_digest:
        raise ValueError("dataset chaos ordering does not match the checkpoint")
    inputs = assemble_inputs(ds, model.config.scheme)
    targets = targets_tensor(ds)
    model.eval()
    with torch.no_grad():
        return float(relative_l2(model(inputs), targets))


def cross_table(checkpoints: dict[str, str], datasets: dict[str, str]) -> dict:
    """(train-set x test-set) relative L2 table, one row per checkpoint."""
    table: dict[str, dict[str, float]] = {}
    for train_name, ckpt_path in checkpoints.items():
        model, digest = load_checkpoint(ckpt_path)
        table[train_name] = {
            test_name: evaluate(model, test_dir, expected_digest=digest)
            for test_name, test_dir in datasets.items()
        }
    return table


def write_table(table: dict, path) -> None:
    Path(path).write_text(json.dumps(table, indent=2, sort_keys=True))
