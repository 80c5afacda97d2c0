"""ADAM training of circuit parameters against the per-example loss ``-<Z_y>``."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .encoding import ImageGrid, build_sampling, encode, encode_flat
from .errors import DimensionError, NonFiniteGradient, RotiqError
from .model import ModelConfig, build_circuit, class_qubits, init_params
from .sim import Circuit, run, shift_rule_occurrences, z_expectations

CHECKPOINT_VERSION = 1
# cap on simultaneously simulated amplitudes in one shifted batch
_MAX_BATCH_AMPLITUDES = 1 << 22


@dataclass(frozen=True)
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    learning_rate: float = 1e-3

    @classmethod
    def zeros(cls, n: int, learning_rate: float = 1e-3, **kw) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0, learning_rate=learning_rate, **kw)

    def to_dict(self) -> dict:
        return {"first_moment": self.first_moment.tolist(), "second_moment": self.second_moment.tolist(),
                "step_count": self.step_count, "beta1": self.beta1, "beta2": self.beta2,
                "epsilon": self.epsilon, "learning_rate": self.learning_rate}

    @classmethod
    def from_dict(cls, d: dict) -> "AdamState":
        return cls(np.array(d["first_moment"], dtype=float), np.array(d["second_moment"], dtype=float),
                   int(d["step_count"]), d["beta1"], d["beta2"], d["epsilon"], d["learning_rate"])


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray) -> tuple[AdamState, np.ndarray]:
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if params.shape != grads.shape or params.shape != state.first_moment.shape:
        raise DimensionError(f"shape mismatch: params {params.shape}, grads {grads.shape}, "
                             f"moments {state.first_moment.shape}")
    if not np.all(np.isfinite(grads)):
        raise NonFiniteGradient("gradient contains non-finite entries; step rejected")
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1 - state.beta1) * grads
    v = state.beta2 * state.second_moment + (1 - state.beta2) * grads ** 2
    m_hat = m / (1 - state.beta1 ** t)
    v_hat = v / (1 - state.beta2 ** t)
    new_params = params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return replace(state, first_moment=m, second_moment=v, step_count=t), new_params


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    shuffle_seed: int = 0
    eval_every: int = 0  # steps between evaluations; 0 evaluates at epoch ends only
    learning_rate: float = 1e-3

    def __post_init__(self):
        if self.epochs < 0:
            raise RotiqError("epochs must be non-negative")
        if self.batch_size < 1:
            raise RotiqError("batch_size must be at least 1")
        if self.eval_every < 0:
            raise RotiqError("eval_every must be non-negative")


@dataclass(frozen=True)
class MetricRow:
    epoch: int
    step: int
    loss: float
    val_acc: float
    repeat: int = 0


@dataclass
class Metrics:
    rows: list[MetricRow] = field(default_factory=list)

    def final_accuracy(self) -> float:
        return self.rows[-1].val_acc

    def write_csv(self, path: str | Path) -> None:
        write_metrics_csv(path, self.rows)


def write_metrics_csv(path: str | Path, rows: Sequence[MetricRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "step", "loss", "val_acc", "repeat"])
        for r in rows:
            w.writerow([r.epoch, r.step, format(r.loss, ".17g"), format(r.val_acc, ".17g"), r.repeat])


@dataclass
class TrainResult:
    params: np.ndarray
    metrics: Metrics
    adam: AdamState
    checkpoints: list[Path]


def prepare_states(config: ModelConfig, images: np.ndarray) -> np.ndarray:
    """Encode a stack of images ``(N, h, w)`` into circuit inputs ``(N, 2^n)``."""
    images = np.asarray(images, dtype=float)
    if config.full_image:
        if images.shape[1] * images.shape[2] != 1 << config.n_qubits:
            raise DimensionError(f"full-image encoding needs {1 << config.n_qubits} pixels per image")
        return np.stack([encode_flat(ImageGrid.from_array(img)) for img in images])
    sampling = build_sampling(config.n_rad, config.n_orb, images.shape[2], images.shape[1])
    return np.stack([encode(ImageGrid.from_array(img), sampling) for img in images])


def batch_loss_and_grad(circuit: Circuit, states: np.ndarray, labels: np.ndarray,
                        params: np.ndarray, n_classes: int) -> tuple[float, np.ndarray]:
    """Batch-mean loss and its parameter-shift gradient."""
    labels = np.asarray(labels, dtype=int)
    qubits = list(range(n_classes))
    m = len(circuit.slots)
    chunk = max(1, _MAX_BATCH_AMPLITUDES // ((2 * m + 1) * states.shape[-1]))
    total_loss = 0.0
    per_occ = np.zeros(m)
    for lo in range(0, len(states), chunk):
        s, y = states[lo:lo + chunk], labels[lo:lo + chunk] - 1
        pick = np.arange(len(y))
        out = z_expectations(run(circuit, s, params), qubits)
        total_loss -= out[pick, y].sum()
        diff = shift_rule_occurrences(circuit, s, params, lambda st: z_expectations(st, qubits))
        per_occ -= diff[:, pick, y].sum(axis=1)
    grad = np.zeros(circuit.n_params)
    np.add.at(grad, circuit.slots, per_occ)
    return total_loss / len(states), grad / len(states)


def evaluate(config: ModelConfig, circuit: Circuit, params: np.ndarray,
             states: np.ndarray, labels: np.ndarray) -> float:
    if len(states) == 0:
        raise RotiqError("cannot evaluate on an empty split")
    values = z_expectations(run(circuit, states, params), class_qubits(config))
    preds = np.argmax(values, axis=-1) + 1
    return float(np.mean(preds == np.asarray(labels)))


def save_checkpoint(path: str | Path, config: ModelConfig, params: np.ndarray, adam: AdamState,
                    epoch: int, step: int, seeds: dict) -> Path:
    path = Path(path)
    payload = {"format_version": CHECKPOINT_VERSION, "model_config": config.to_dict(),
               "params": [float(p) for p in params], "adam": adam.to_dict(),
               "epoch": epoch, "step": step, "seeds": seeds}
    path.write_text(json.dumps(payload, indent=1) + "\n")
    return path


def load_checkpoint(path: str | Path) -> tuple[ModelConfig, np.ndarray, AdamState, dict]:
    raw = json.loads(Path(path).read_text())
    if raw.get("format_version") != CHECKPOINT_VERSION:
        raise RotiqError(f"checkpoint version {raw.get('format_version')!r} unsupported")
    return (ModelConfig.from_dict(raw["model_config"]), np.array(raw["params"], dtype=float),
            AdamState.from_dict(raw["adam"]), raw)


def train(config: ModelConfig, train_states: np.ndarray, train_labels: np.ndarray,
          val_states: np.ndarray, val_labels: np.ndarray, tconfig: TrainConfig,
          repeat: int = 0, out_dir: str | Path | None = None,
          params: np.ndarray | None = None) -> TrainResult:
    """Mini-batch ADAM on the parameter-shift gradient.

    The model is initialised from the substream ``(config.seed, repeat)`` and
    batches are drawn from ``(shuffle_seed, repeat, epoch)``.  Validation
    accuracy is logged before training, every ``eval_every`` steps and at the
    end of every epoch; a checkpoint is written per epoch when ``out_dir`` is
    given.
    """
    train_labels = np.asarray(train_labels, dtype=int)
    if train_labels.size and (train_labels.min() < 1 or train_labels.max() > config.n_classes):
        raise RotiqError(f"dataset labels exceed the model's {config.n_classes} classes")
    circuit = build_circuit(config)
    if params is None:
        params = init_params(config, np.random.default_rng([config.seed, repeat]))
    params = np.array(params, dtype=float)
    adam = AdamState.zeros(config.n_params, tconfig.learning_rate)
    metrics = Metrics()
    checkpoints: list[Path] = []
    seeds = {"model_seed": config.seed, "shuffle_seed": tconfig.shuffle_seed, "repeat": repeat}
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    def log(epoch: int, step: int, losses: list[float]) -> None:
        acc = evaluate(config, circuit, params, val_states, val_labels)
        mean_loss = float(np.mean(losses)) if losses else float("nan")
        metrics.rows.append(MetricRow(epoch, step, mean_loss, acc, repeat))

    step = 0
    log(0, 0, [])
    n = len(train_states)
    for epoch in range(1, tconfig.epochs + 1):
        order = np.random.default_rng([tconfig.shuffle_seed, repeat, epoch]).permutation(n)
        losses: list[float] = []
        for lo in range(0, n, tconfig.batch_size):
            idx = order[lo:lo + tconfig.batch_size]
            batch_loss, grad = batch_loss_and_grad(circuit, train_states[idx], train_labels[idx],
                                                   params, config.n_classes)
            adam, params = adam_step(adam, params, grad)
            losses.append(batch_loss)
            step += 1
            if tconfig.eval_every and step % tconfig.eval_every == 0 and lo + tconfig.batch_size < n:
                log(epoch, step, losses)
                losses = []
        log(epoch, step, losses)
        if out is not None:
            checkpoints.append(save_checkpoint(out / f"checkpoint_r{repeat}_e{epoch}.json", config,
                                               params, adam, epoch, step, seeds))
    return TrainResult(params, metrics, adam, checkpoints)
