"""Bound regression: a small dense network trained with gradient descent.

Two independent models are trained, one per bound.  The network is
input -> tanh hidden -> tanh hidden -> linear output, fit by seeded
(mini-batch) gradient descent on mean-squared error.  Nothing here is
stochastic beyond the named seed: identical inputs give bit-identical
weights, predictions and files.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .bounds import BenefitVector, value_range
from .informer import InformerRecord
from .model import CellKey

__all__ = [
    "Hyperparams",
    "Model",
    "PredictionRow",
    "train",
    "predict",
    "predict_all",
    "evaluate",
    "loss_and_gradients",
    "save_model",
    "load_model",
    "write_predictions_csv",
    "read_predictions_csv",
]

PREDICTIONS_HEADER = ["cell_id", "pred_lower", "pred_upper", "repaired"]

_SHUFFLE_SALT = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class Hyperparams:
    hidden_width: int = 128
    epochs: int = 600
    learning_rate: float = 0.01
    seed: int = 0
    batch_size: int | None = None  # None = full batch

    def __post_init__(self) -> None:
        if self.hidden_width < 1 or self.epochs < 1:
            raise ValueError("hidden_width and epochs must be positive")
        if not self.learning_rate > 0.0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be positive when given")


@dataclass(frozen=True, eq=False)
class Model:
    """Trained network weights plus the training-loss trajectory.

    loss_history has epochs + 1 entries: the loss before any update, then one
    entry per epoch.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    hyperparams: Hyperparams
    loss_history: tuple[float, ...]

    def __post_init__(self) -> None:
        n_in, h = self.w1.shape
        if self.w2.shape != (h, h) or self.w3.shape != (h, 1):
            raise ValueError("inconsistent layer shapes")
        if self.b1.shape != (h,) or self.b2.shape != (h,) or self.b3.shape != (1,):
            raise ValueError("inconsistent bias shapes")
        for arr in (self.w1, self.b1, self.w2, self.b2, self.w3, self.b3):
            if not np.isfinite(arr).all():
                raise ValueError("non-finite weights")

    @property
    def n_inputs(self) -> int:
        return self.w1.shape[0]


def _forward(
    params: Sequence[np.ndarray], x: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    w1, b1, w2, b2, w3, b3 = params
    a1 = np.tanh(x @ w1 + b1)
    a2 = np.tanh(a1 @ w2 + b2)
    return a1, a2, a2 @ w3 + b3


def _loss_and_grads(
    params: Sequence[np.ndarray], x: np.ndarray, t: np.ndarray
) -> tuple[float, list[np.ndarray]]:
    w1, b1, w2, b2, w3, b3 = params
    a1, a2, out = _forward(params, x)
    resid = out - t
    loss = float(np.mean(resid**2))
    d_out = 2.0 * resid / len(x)
    g_w3 = a2.T @ d_out
    g_b3 = d_out.sum(axis=0)
    d_a2 = d_out @ w3.T
    d_z2 = d_a2 * (1.0 - a2**2)
    g_w2 = a1.T @ d_z2
    g_b2 = d_z2.sum(axis=0)
    d_a1 = d_z2 @ w2.T
    d_z1 = d_a1 * (1.0 - a1**2)
    g_w1 = x.T @ d_z1
    g_b1 = d_z1.sum(axis=0)
    return loss, [g_w1, g_b1, g_w2, g_b2, g_w3, g_b3]


def _init_params(n_in: int, hp: Hyperparams) -> list[np.ndarray]:
    rng = np.random.Generator(np.random.Philox(key=hp.seed))
    h = hp.hidden_width

    def glorot(fan_in: int, fan_out: int) -> np.ndarray:
        lim = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-lim, lim, size=(fan_in, fan_out))

    return [
        glorot(n_in, h),
        np.zeros(h),
        glorot(h, h),
        np.zeros(h),
        glorot(h, 1),
        np.zeros((1,)),
    ]


def _as_features(features: Sequence[Sequence[int]] | np.ndarray) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("features must be a 2-D array of bit vectors")
    return x


def train(
    features: Sequence[Sequence[int]] | np.ndarray,
    targets: Sequence[float] | np.ndarray,
    hp: Hyperparams,
) -> Model:
    """Fit the network to (features, targets) by seeded gradient descent."""
    x = _as_features(features)
    t = np.asarray(targets, dtype=np.float64).reshape(-1, 1)
    if len(x) == 0:
        raise ValueError("no training data")
    if len(x) != len(t):
        raise ValueError("features and targets differ in length")
    if not np.isfinite(t).all():
        raise ValueError("non-finite training target")

    params = _init_params(x.shape[1], hp)
    # Separate key keeps batch shuffles independent of the init draws.
    shuffle_rng = np.random.Generator(
        np.random.Philox(key=(hp.seed ^ _SHUFFLE_SALT) & (1 << 64) - 1)
    )

    history = [_loss_and_grads(params, x, t)[0]]
    batch = hp.batch_size if hp.batch_size is not None else len(x)
    for _ in range(hp.epochs):
        if batch >= len(x):
            _, grads = _loss_and_grads(params, x, t)
            for p, g in zip(params, grads):
                p -= hp.learning_rate * g
        else:
            order = shuffle_rng.permutation(len(x))
            for start in range(0, len(x), batch):
                idx = order[start : start + batch]
                _, grads = _loss_and_grads(params, x[idx], t[idx])
                for p, g in zip(params, grads):
                    p -= hp.learning_rate * g
        history.append(_loss_and_grads(params, x, t)[0])

    w1, b1, w2, b2, w3, b3 = params
    return Model(w1, b1, w2, b2, w3, b3, hp, tuple(history))


def loss_and_gradients(
    model: Model, features: Sequence[Sequence[int]] | np.ndarray, targets: Sequence[float]
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean-squared-error loss and its analytic gradients at the model's
    current weights.  Exists so the gradients can be checked against finite
    differences."""
    x = _as_features(features)
    t = np.asarray(targets, dtype=np.float64).reshape(-1, 1)
    params = [model.w1, model.b1, model.w2, model.b2, model.w3, model.b3]
    loss, grads = _loss_and_grads(params, x, t)
    names = ["w1", "b1", "w2", "b2", "w3", "b3"]
    return loss, dict(zip(names, grads))


def _raw_outputs(model: Model, x: np.ndarray) -> np.ndarray:
    return _forward(
        [model.w1, model.b1, model.w2, model.b2, model.w3, model.b3], x
    )[2][:, 0]


def predict(model: Model, cell: CellKey, v: BenefitVector) -> float:
    """Forward pass for one cell, clamped to the benefit vector's value range."""
    if len(cell.bits) != model.n_inputs:
        raise ValueError(
            f"cell has {len(cell.bits)} bits, model expects {model.n_inputs}"
        )
    lo, hi = value_range(v)
    raw = float(_raw_outputs(model, np.asarray([cell.bits], dtype=np.float64))[0])
    return min(max(raw, lo), hi)


@dataclass(frozen=True)
class PredictionRow:
    cell_id: int
    pred_lower: float
    pred_upper: float
    repaired: bool


def predict_all(
    model_lower: Model, model_upper: Model, n_observed: int, v: BenefitVector
) -> list[PredictionRow]:
    """Clamped predictions for every cell id, in order; crossed pairs are
    repaired to their midpoint."""
    if model_lower.n_inputs != n_observed or model_upper.n_inputs != n_observed:
        raise ValueError("model input width does not match n_observed")
    n_cells = 1 << n_observed
    bits = ((np.arange(n_cells)[:, None] >> np.arange(n_observed)[None, :]) & 1).astype(
        np.float64
    )
    lo, hi = value_range(v)
    lower = np.clip(_raw_outputs(model_lower, bits), lo, hi)
    upper = np.clip(_raw_outputs(model_upper, bits), lo, hi)
    crossed = lower > upper
    mid = 0.5 * (lower + upper)
    rows = []
    for cid in range(n_cells):
        if crossed[cid]:
            rows.append(PredictionRow(cid, float(mid[cid]), float(mid[cid]), True))
        else:
            rows.append(PredictionRow(cid, float(lower[cid]), float(upper[cid]), False))
    return rows


def sample_cell_ids(n_cells: int, sample_n: int, seed: int) -> np.ndarray:
    """The seeded evaluation sample: sample_n distinct cell ids."""
    if sample_n > n_cells:
        raise ValueError(f"cannot sample {sample_n} of {n_cells} cells")
    rng = np.random.Generator(np.random.Philox(key=seed))
    return np.sort(rng.choice(n_cells, size=sample_n, replace=False))


def evaluate(
    preds: Sequence[PredictionRow],
    truth: Sequence[InformerRecord],
    sample_n: int = 200,
    seed: int = 0,
) -> dict[str, float | int]:
    """Mean absolute error of each bound over a seeded sample of cells."""
    if len(preds) != len(truth):
        raise ValueError("prediction and truth tables cover different cell spaces")
    by_id: Mapping[int, InformerRecord] = {rec.cell.id: rec for rec in truth}
    pred_by_id = {row.cell_id: row for row in preds}
    if set(by_id) != set(pred_by_id):
        raise ValueError("prediction and truth tables cover different cell spaces")
    ids = sample_cell_ids(len(preds), sample_n, seed)
    err_lower = [abs(pred_by_id[i].pred_lower - by_id[i].true_lower) for i in ids]
    err_upper = [abs(pred_by_id[i].pred_upper - by_id[i].true_upper) for i in ids]
    return {
        "mae_lower": float(np.mean(err_lower)),
        "mae_upper": float(np.mean(err_upper)),
        "n": int(sample_n),
        "seed": int(seed),
    }


def save_model(model: Model, path: str | Path) -> None:
    hp = model.hyperparams
    doc = {
        "arch": {"n_inputs": model.n_inputs, "hidden_width": hp.hidden_width},
        "hyperparams": {
            "hidden_width": hp.hidden_width,
            "epochs": hp.epochs,
            "learning_rate": hp.learning_rate,
            "seed": hp.seed,
            "batch_size": hp.batch_size,
        },
        "weights": {
            "w1": model.w1.ravel().tolist(),
            "b1": model.b1.tolist(),
            "w2": model.w2.ravel().tolist(),
            "b2": model.b2.tolist(),
            "w3": model.w3.ravel().tolist(),
            "b3": model.b3.tolist(),
        },
        "loss_history": list(model.loss_history),
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_model(path: str | Path) -> Model:
    with open(path, "r", encoding="ascii") as fh:
        doc = json.load(fh)
    try:
        n_in = doc["arch"]["n_inputs"]
        h = doc["arch"]["hidden_width"]
        w = doc["weights"]
        return Model(
            w1=np.asarray(w["w1"]).reshape(n_in, h),
            b1=np.asarray(w["b1"]),
            w2=np.asarray(w["w2"]).reshape(h, h),
            b2=np.asarray(w["b2"]),
            w3=np.asarray(w["w3"]).reshape(h, 1),
            b3=np.asarray(w["b3"]),
            hyperparams=Hyperparams(**doc["hyperparams"]),
            loss_history=tuple(doc["loss_history"]),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed model file {path}: {exc}") from None


def write_predictions_csv(rows: Sequence[PredictionRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(PREDICTIONS_HEADER)
        for row in rows:
            writer.writerow(
                [
                    row.cell_id,
                    format(row.pred_lower, ".12g"),
                    format(row.pred_upper, ".12g"),
                    int(row.repaired),
                ]
            )


def read_predictions_csv(path: str | Path) -> list[PredictionRow]:
    rows: list[PredictionRow] = []
    with open(path, "r", newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != PREDICTIONS_HEADER:
            raise ValueError(f"unexpected predictions header in {path}")
        for row in reader:
            rows.append(
                PredictionRow(
                    cell_id=int(row[0]),
                    pred_lower=float(row[1]),
                    pred_upper=float(row[2]),
                    repaired=bool(int(row[3])),
                )
            )
    return rows
