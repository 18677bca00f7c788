"""Mini-batch training of the steering network on a recorded dataset.

Training is single-threaded and fully deterministic: the same dataset,
architecture, config and seed produce bit-identical checkpoints. Batch
gradients are the mean of per-sample gradients; one Adam step per batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nn, steer
from .data import (DatasetRecorder, Manifest, SplitSpec, augment_flip,
                   load_images, record_run, split)
from .errors import ContractError
from .sim import (CameraSpec, DEFAULT_DT, DEFAULT_GAINS, ExpertGains, Track,
                  car_step, expert_policy, render_camera, start_state, track_frame)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 8
    adam: nn.AdamConfig = field(default_factory=nn.AdamConfig)
    split: SplitSpec | None = None  # None: 80/20 with the training seed
    shuffle_each_epoch: bool = True
    augment: bool = False
    loss: str = "mse"  # or "cross_entropy"

    def __post_init__(self):
        if self.epochs < 1:
            raise ContractError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ContractError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.loss not in ("mse", "cross_entropy"):
            raise ContractError(f"loss must be 'mse' or 'cross_entropy', got {self.loss!r}")


@dataclass
class TrainReport:
    epoch_losses: list
    train_accuracy: float
    test_accuracy: float
    class_counts: dict


@dataclass
class EvalResult:
    accuracy: float
    confusion: np.ndarray  # 3x3, rows = true label, columns = predicted

    @property
    def total(self) -> int:
        return int(self.confusion.sum())


@dataclass
class DaggerReport:
    steps_recorded: int
    truncated: bool


def make_batches(items, batch_size: int, epoch_seed: int | None):
    """Seeded shuffle of `items` chopped into contiguous batches.

    The final short batch is kept; epoch_seed=None keeps the given order.
    """
    if batch_size < 1:
        raise ContractError(f"batch_size must be >= 1, got {batch_size}")
    items = list(items)
    if epoch_seed is not None:
        order = np.random.default_rng(int(epoch_seed)).permutation(len(items))
        items = [items[i] for i in order]
    return [items[i:i + batch_size] for i in range(0, len(items), batch_size)]


def predict_class(params: nn.NetworkParams, frame: np.ndarray) -> int:
    """Argmax class of the network on one frame; ties resolve toward -1."""
    probs, _ = nn.forward(params, frame)
    return steer.from_index(int(np.argmax(probs)))


def _accuracy_and_confusion(params, images, labels) -> EvalResult:
    confusion = np.zeros((3, 3), dtype=np.int64)
    for frame, label in zip(images, labels):
        predicted = predict_class(params, frame)
        confusion[steer.to_index(label), steer.to_index(predicted)] += 1
    correct = int(np.trace(confusion))
    return EvalResult(accuracy=correct / len(labels), confusion=confusion)


def evaluate(params: nn.NetworkParams, manifest: Manifest) -> EvalResult:
    """Accuracy and 3x3 confusion matrix of argmax predictions."""
    if not manifest.samples:
        raise ContractError("cannot evaluate an empty manifest")
    images = load_images(manifest)
    labels = [sample.label for sample in manifest.samples]
    return _accuracy_and_confusion(params, images, labels)


def train(dataset: Manifest, arch: nn.ArchitectureConfig, cfg: TrainConfig, seed: int):
    """Split, train for cfg.epochs and report.

    Returns (params, TrainReport). Final weights are rounded through the
    checkpoint's 32-bit storage precision so the in-memory model and its
    saved checkpoint predict identically.
    """
    if len(dataset.samples) < 2:
        raise ContractError(f"need at least 2 samples to train, got {len(dataset.samples)}")
    split_spec = cfg.split if cfg.split is not None else SplitSpec(shuffle_seed=seed)
    train_manifest, test_manifest = split(dataset, split_spec)
    if not train_manifest.samples or not test_manifest.samples:
        raise ContractError("split produced an empty train or test set")

    # Only the training half's pixels are ever read before the final report.
    train_images = load_images(train_manifest)
    if train_images.shape[1:] != (arch.input_height, arch.input_width):
        raise ContractError(
            f"dataset frames are {train_images.shape[1]}x{train_images.shape[2]} "
            f"but the architecture expects {arch.input_height}x{arch.input_width}")
    train_labels = [sample.label for sample in train_manifest.samples]
    if cfg.augment:
        flipped = [augment_flip(frame, label)
                   for frame, label in zip(train_images, train_labels)]
        train_images = np.concatenate([train_images, np.stack([f for f, _ in flipped])])
        train_labels = train_labels + [label for _, label in flipped]
    targets = np.stack([steer.one_hot(label) for label in train_labels])

    params = nn.init_params(arch, seed)
    loss_fn = nn.mse_loss if cfg.loss == "mse" else nn.cross_entropy_loss
    epoch_seeds = np.random.SeedSequence(seed).generate_state(cfg.epochs)

    n = len(train_labels)
    epoch_losses = []
    for epoch in range(cfg.epochs):
        epoch_seed = int(epoch_seeds[epoch]) if cfg.shuffle_each_epoch else None
        batches = make_batches(range(n), cfg.batch_size, epoch_seed)
        total_loss = 0.0
        for batch in batches:
            grad_sum = None
            for i in batch:
                probs, cache = nn.forward(params, train_images[i])
                loss, dprobs = loss_fn(probs, targets[i])
                total_loss += loss
                grads = nn.backward(params, cache, dprobs)
                if grad_sum is None:
                    grad_sum = grads
                else:
                    for name in nn.PARAM_FIELDS:
                        grad_sum[name] += grads[name]
            mean_grads = {name: grad_sum[name] / len(batch) for name in nn.PARAM_FIELDS}
            params = nn.adam_step(params, mean_grads, cfg.adam)
        epoch_losses.append(total_loss / n)

    params = nn.quantize_params(params)
    train_eval = _accuracy_and_confusion(
        params, train_images[:len(train_manifest.samples)],
        [s.label for s in train_manifest.samples])
    test_eval = evaluate(params, test_manifest)
    report = TrainReport(
        epoch_losses=epoch_losses,
        train_accuracy=train_eval.accuracy,
        test_accuracy=test_eval.accuracy,
        class_counts=dataset.class_counts(),
    )
    return params, report


def write_train_report(report: TrainReport, path) -> None:
    """Plain-text report: per-epoch loss lines, then the two accuracies."""
    lines = [f"epoch,{i + 1},loss,{loss!r}" for i, loss in enumerate(report.epoch_losses)]
    lines.append(f"train_acc,{report.train_accuracy!r}")
    lines.append(f"test_acc,{report.test_accuracy!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def dagger_round(params: nn.NetworkParams, track: Track, gains: ExpertGains,
                 steps: int, out_dir, *, camera: CameraSpec | None = None,
                 dt: float = DEFAULT_DT, start=None):
    """One dataset-aggregation pass: the learner drives, the expert labels.

    Rolls the learner out for `steps` steps from `start`, records every
    visited frame with the expert's corrective label, and appends to the
    dataset already recorded in out_dir (image numbering continues).
    If the car strays beyond 5 track widths of the centerline the rollout
    is truncated and the partial data kept.

    Returns (aggregated_manifest, DaggerReport).
    """
    camera = camera if camera is not None else CameraSpec()
    state = start if start is not None else start_state(track)
    recorded = 0
    truncated = False
    with DatasetRecorder(out_dir, append=True) as recorder:
        for _ in range(steps):
            error, _, _ = track_frame(track, (state.x, state.y))
            if abs(error) > 5.0 * track.width:
                truncated = True
                break
            frame = render_camera(track, state, camera)
            recorder.add(frame, expert_policy(track, state, gains))
            recorded += 1
            state = car_step(state, predict_class(params, frame), dt)
        manifest = recorder.manifest
    return manifest, DaggerReport(steps_recorded=recorded, truncated=truncated)


def collect_expert_run(track: Track, steps: int, out_dir, *,
                       camera: CameraSpec | None = None, gains: ExpertGains = DEFAULT_GAINS,
                       dt: float = DEFAULT_DT, start=None) -> Manifest:
    """Record `steps` frames of the scripted expert driving the track."""
    camera = camera if camera is not None else CameraSpec()
    state = start if start is not None else start_state(track)

    def stream():
        nonlocal state
        for _ in range(steps):
            frame = render_camera(track, state, camera)
            label = expert_policy(track, state, gains)
            yield frame, label
            state = car_step(state, label, dt)

    return record_run(stream(), out_dir)
