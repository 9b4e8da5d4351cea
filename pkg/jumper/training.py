from __future__ import annotations

import logging
import sys
import time
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from tqdm.auto import tqdm

from jumper.evaluation import Decoding, evaluate, xent_first_prediction
from jumper.exceptions import EmptyInput, NonFiniteGradient
from jumper.metrics import classification_accuracy, macro_f1
from jumper.model import EpisodeTrace, JumperModel
from jumper.nn import log_softmax_grad
from jumper.optim import AdaDeltaState, adadelta_update
from jumper.rewards import RewardConfig, cumulative_reward, reward_to_go
from jumper.text_data import Paragraph
from jumper.types import FloatArray, TrainingMode

__all__ = [
    "BatchResult",
    "EpochRecord",
    "TrainConfig",
    "TrainingReport",
    "reinforce_batch_gradient",
    "train",
    "train_xent",
    "xent_batch_gradient",
    "xent_first_prediction",
    "xent_loss",
]

logger = logging.getLogger(__name__)

ImprovementCallback = Callable[[int, JumperModel], None]


@dataclass
class TrainConfig:
    batch_size: int = 50
    max_epochs: int = 30
    patience: int = 5
    seed: int = 0
    mode: TrainingMode = "reinforce"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1: {self.batch_size}")
        if self.max_epochs < 0 or self.patience < 1:
            raise ValueError("max_epochs must be >= 0 and patience >= 1")
        if self.mode not in ("reinforce", "cross_entropy"):
            raise ValueError(f"Unknown training mode: {self.mode}")

    @property
    def decoding(self) -> Decoding:
        return "jumper" if self.mode == "reinforce" else "xent"


@dataclass
class BatchResult:
    grads: dict[str, FloatArray]
    mean_reward: float | None = None
    loss: float | None = None


@dataclass
class EpochRecord:
    epoch: int
    train_reward_mean: float | None
    train_loss: float | None
    dev_CA: float
    dev_F1: float
    elapsed_s: float

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class TrainingReport:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int | None = None
    best_dev_CA: float | None = None


def _checked_grads(model: JumperModel) -> dict[str, FloatArray]:
    grads = {}
    for name, tensor in model.params.items():
        if not np.all(np.isfinite(tensor.grad)):
            raise NonFiniteGradient(name)
        grads[name] = tensor.grad.copy()
    return grads


def policy_logit_grads(
    trace: EpisodeTrace,
    slot: str,
    advantages: FloatArray,
    scale: float,
) -> dict[tuple[int, str], FloatArray]:
    """Gradients of -scale * sum_t A_t log pi(a_t) with respect to the logits, t <= T_jump"""
    grads = {}
    for t, advantage in enumerate(advantages, start=1):
        if advantage == 0.0:
            continue
        step = trace.step(t)
        grads[(t, slot)] = -scale * advantage * log_softmax_grad(
            step.dists[slot], step.actions[slot]
        )
    return grads


def reinforce_batch_gradient(
    model: JumperModel,
    batch: Sequence[Paragraph],
    reward_cfg: RewardConfig,
    rng: np.random.Generator,
) -> BatchResult:
    """REINFORCE gradient of a batch with an M-rollout mean baseline

    Sentences are encoded once per paragraph and the M sampled rollouts share them.
    The first rollout carries the gradient; all M set the per-slot baseline (none when
    M = 1). Negative advantages are clamped to 0 with `truncate_negative`.
    """
    if not batch:
        raise EmptyInput("Empty batch.")
    num_examples = len(batch)
    model.params.zero_grad()

    returns_from_start = []
    for paragraph in batch:
        encodings = model.encode_paragraph(paragraph, train_mode=True, rng=rng)
        traces = [
            model.rollout(encodings, mode="sample", epsilon=reward_cfg.epsilon, rng=rng)
            for _ in range(reward_cfg.baseline_samples)
        ]
        trace = traces[0]
        scale = 1.0 / (num_examples * trace.T)

        logit_grads = {}
        for slot in model.slot_names:
            gold = paragraph.gold_index(model.schema, slot)
            returns = reward_to_go(trace, slot, gold, reward_cfg)
            returns_from_start.append(returns[0])

            baseline = 0.0
            if len(traces) > 1:
                baseline = float(
                    np.mean([cumulative_reward(tr, slot, 1, gold, reward_cfg) for tr in traces])
                )
            advantages = returns - baseline
            if reward_cfg.truncate_negative:
                advantages = np.maximum(advantages, 0.0)
            logit_grads.update(policy_logit_grads(trace, slot, advantages, scale))

        model.backward(trace, logit_grads)

    return BatchResult(_checked_grads(model), mean_reward=float(np.mean(returns_from_start)))


def xent_loss(
    model: JumperModel,
    batch: Sequence[Paragraph],
    backward: bool = False,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> float:
    """Mean over the batch of the summed per-slot cross-entropy of the last step's policy"""
    if not batch:
        raise EmptyInput("Empty batch.")
    num_examples = len(batch)

    total = 0.0
    for paragraph in batch:
        encodings = model.encode_paragraph(paragraph, train_mode=train_mode, rng=rng)
        trace = model.rollout(encodings, forced_actions=model.none_actions(len(encodings)))
        last = trace.steps[-1]

        logit_grads = {}
        for slot in model.slot_names:
            gold = paragraph.gold_index(model.schema, slot)
            dist = last.dists[slot]
            total -= float(np.log(max(float(dist[gold]), np.finfo(np.float64).tiny)))
            logit_grads[(trace.T, slot)] = -log_softmax_grad(dist, gold) / num_examples
        if backward:
            model.backward(trace, logit_grads)

    return total / num_examples


def xent_batch_gradient(
    model: JumperModel, batch: Sequence[Paragraph], rng: np.random.Generator
) -> BatchResult:
    model.params.zero_grad()
    loss = xent_loss(model, batch, backward=True, train_mode=True, rng=rng)
    return BatchResult(_checked_grads(model), loss=loss)


def _dev_scores(
    model: JumperModel, dev: Sequence[Paragraph], decoding: Decoding
) -> tuple[float, float]:
    records = evaluate(model, dev, decoding)
    return classification_accuracy(records), macro_f1(records)


def train(
    model: JumperModel,
    dataset: Sequence[Paragraph],
    dev: Sequence[Paragraph],
    train_cfg: TrainConfig,
    reward_cfg: RewardConfig | None = None,
    optimizer: AdaDeltaState | None = None,
    on_improvement: ImprovementCallback | None = None,
) -> TrainingReport:
    """Shuffled mini-batch training with early stopping on dev accuracy

    The parameters of the best dev epoch are restored at the end. When `dev` is empty
    the training set stands in for it.
    """
    if not dataset:
        raise EmptyInput("Cannot train on an empty dataset.")
    reward_cfg = reward_cfg if reward_cfg is not None else RewardConfig()
    optimizer = optimizer if optimizer is not None else AdaDeltaState()
    if not dev:
        logger.warning("No development data; early stopping uses the training set.")
        dev = dataset

    rng = np.random.default_rng(train_cfg.seed)
    report = TrainingReport()
    best_params = None
    epochs_without_improvement = 0

    logger.info(
        f"Training ({train_cfg.mode}) on {len(dataset)} paragraphs, "
        f"{model.params.num_parameters()} parameters"
    )
    for epoch in range(1, train_cfg.max_epochs + 1):
        start = time.perf_counter()
        order = rng.permutation(len(dataset))
        batches = [
            order[i : i + train_cfg.batch_size] for i in range(0, len(order), train_cfg.batch_size)
        ]

        batch_values = []
        for indices in tqdm(batches, desc=f"Epoch {epoch}", file=sys.stderr, leave=False):
            batch = [dataset[i] for i in indices]
            if train_cfg.mode == "reinforce":
                result = reinforce_batch_gradient(model, batch, reward_cfg, rng)
                batch_values.append(result.mean_reward)
            else:
                result = xent_batch_gradient(model, batch, rng)
                batch_values.append(result.loss)
            adadelta_update(optimizer, model.params, result.grads)

        dev_ca, dev_f1 = _dev_scores(model, dev, train_cfg.decoding)
        mean_value = float(np.mean(batch_values))
        record = EpochRecord(
            epoch=epoch,
            train_reward_mean=mean_value if train_cfg.mode == "reinforce" else None,
            train_loss=mean_value if train_cfg.mode == "cross_entropy" else None,
            dev_CA=dev_ca,
            dev_F1=dev_f1,
            elapsed_s=time.perf_counter() - start,
        )
        report.epochs.append(record)
        logger.info(
            f"Epoch {epoch}: train {'reward' if train_cfg.mode == 'reinforce' else 'loss'} "
            f"{mean_value:.4f}, dev CA {dev_ca:.4f}, dev F1 {dev_f1:.4f}"
        )

        if report.best_dev_CA is None or dev_ca > report.best_dev_CA:
            report.best_epoch, report.best_dev_CA = epoch, dev_ca
            best_params = model.params.snapshot()
            epochs_without_improvement = 0
            if on_improvement is not None:
                on_improvement(epoch, model)
        else:
            epochs_without_improvement += 1
            if epochs_without_improvement >= train_cfg.patience:
                logger.info(f"Early stopping after epoch {epoch} (best epoch {report.best_epoch})")
                break

    if best_params is not None:
        model.params.load_snapshot(best_params)

    return report


def train_xent(
    model: JumperModel,
    dataset: Sequence[Paragraph],
    dev: Sequence[Paragraph],
    train_cfg: TrainConfig,
    optimizer: AdaDeltaState | None = None,
    on_improvement: ImprovementCallback | None = None,
) -> TrainingReport:
    """Train the same network as a plain hierarchical classifier on the last step's policy"""
    if train_cfg.mode != "cross_entropy":
        train_cfg = TrainConfig(**{**asdict(train_cfg), "mode": "cross_entropy"})
    return train(
        model, dataset, dev, train_cfg, optimizer=optimizer, on_improvement=on_improvement
    )
