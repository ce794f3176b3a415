"""Stage-one supernet training, supernet evaluation, and the retrain oracle.

Training draws one genome and one mini-batch per step and applies one SGD
step to that genome's path. The uniform sampler treats every architecture
equally; the strict-fair sampler walks fresh per-block permutations so every
(block, choice) receives exactly equal update counts per round.

`retrain_from_scratch` is the ground-truth oracle: it trains a standalone
network with the genome's topology and reports its validation accuracy.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import DatasetError, ShapeError, SpaceError
from .nncore import (
    LayerSpec,
    accuracy,
    chain_backward,
    chain_forward,
    glorot_dense,
    sgd_step,
    softmax_cross_entropy,
)
from .space import Genome, SearchSpace, format_genome, sample_uniform
from .supernet import Supernet, apply_update, backward_path, forward_path

SAMPLERS = ("uniform", "strict_fair")


@dataclass
class TrainConfig:
    steps: int = 5000
    batch_size: int = 64
    lr: float = 0.05
    seed: int = 0
    sampler: str = "uniform"
    lr_decay: bool = False

    def __post_init__(self):
        if self.steps < 1:
            raise SpaceError(f"steps must be >= 1, got {self.steps}")
        if self.batch_size < 1:
            raise SpaceError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr <= 0:
            raise SpaceError(f"lr must be positive, got {self.lr}")
        if self.sampler not in SAMPLERS:
            raise SpaceError(f"sampler must be one of {SAMPLERS}, got {self.sampler!r}")


@dataclass
class EvalResult:
    genome: Genome
    accuracy: float
    loss: float
    at_step: int


@dataclass
class TrainLog:
    entries: list = field(default_factory=list)  # (step, genome, loss)

    def append(self, step: int, genome: Genome, loss: float) -> None:
        self.entries.append((step, genome, loss))

    def write_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            fh.write("step,genome,loss\n")
            for step, genome, loss in self.entries:
                fh.write(f"{step},{format_genome(genome)},{loss!r}\n")


def _require_split(dataset: Dataset, split: str) -> None:
    if len(dataset.splits[split]) == 0:
        raise DatasetError(f"dataset {dataset.name!r} has an empty {split} split")


def draw_batch(dataset: Dataset, split: str, batch_size: int, rng: np.random.Generator):
    """One seeded mini-batch (with replacement) from the given split."""
    idx = dataset.splits[split]
    pick = idx[rng.integers(0, len(idx), size=batch_size)]
    return dataset.features[pick], dataset.labels[pick]


def _step_lr(cfg: TrainConfig, step: int) -> float:
    if not cfg.lr_decay:
        return cfg.lr
    return cfg.lr * (1.0 - step / cfg.steps)


def _train_step(net: Supernet, genome: Genome, x, y, lr: float) -> float:
    logits, cache = forward_path(net, genome, x)
    loss, grad = softmax_cross_entropy(logits, y)
    grads = backward_path(net, genome, cache, grad)
    apply_update(net, grads, lr, normalizer=1)
    return loss


def train_uniform(net: Supernet, dataset: Dataset, cfg: TrainConfig):
    """Uniform-sampling supernet training; genome and batch share one stream."""
    if cfg.sampler != "uniform":
        raise SpaceError(f"train_uniform requires sampler='uniform', got {cfg.sampler!r}")
    _require_split(dataset, "train")
    if dataset.input_dim != net.space.input_dim:
        raise ShapeError(
            f"dataset dim {dataset.input_dim} != space input_dim {net.space.input_dim}"
        )
    rng = np.random.default_rng(cfg.seed)
    log = TrainLog()
    for step in range(cfg.steps):
        genome = sample_uniform(net.space, rng)
        x, y = draw_batch(dataset, "train", cfg.batch_size, rng)
        loss = _train_step(net, genome, x, y, _step_lr(cfg, step))
        log.append(step, genome, loss)
    return net, log


def train_strict_fair(net: Supernet, dataset: Dataset, cfg: TrainConfig):
    """Strict-fairness training: rounds of fresh per-block permutations.

    Requires all blocks to offer the same choice count C. Step r*C+j uses
    the j-th entry of each block's round-r permutation, so per-(block,choice)
    update counts are exactly equal at every round boundary.
    """
    counts = {len(block) for block in net.space.blocks}
    if len(counts) != 1:
        raise SpaceError(
            f"strict_fair needs equal choice counts per block, got {sorted(counts)}"
        )
    _require_split(dataset, "train")
    c = counts.pop()
    rng = np.random.default_rng(cfg.seed)
    log = TrainLog()
    perms: list[np.ndarray] = []
    for step in range(cfg.steps):
        j = step % c
        if j == 0:
            perms = [rng.permutation(c) for _ in range(net.space.num_blocks)]
        genome = tuple(int(perm[j]) for perm in perms)
        x, y = draw_batch(dataset, "train", cfg.batch_size, rng)
        loss = _train_step(net, genome, x, y, _step_lr(cfg, step))
        log.append(step, genome, loss)
    return net, log


def train_supernet(net: Supernet, dataset: Dataset, cfg: TrainConfig):
    if cfg.sampler == "strict_fair":
        return train_strict_fair(net, dataset, cfg)
    return train_uniform(net, dataset, cfg)


def evaluate_arch(
    net: Supernet,
    genome: Genome,
    dataset: Dataset,
    eval_batches: int,
    seed: int,
    batch_size: int = 64,
) -> EvalResult:
    """Validation accuracy of a genome on the supernet; never mutates weights.

    eval_batches == 0 evaluates the full validation split; otherwise a fixed
    seeded subset of eval_batches * batch_size rows (without replacement,
    capped at the split size) is used.
    """
    _require_split(dataset, "val")
    idx = dataset.splits["val"]
    if eval_batches > 0:
        rng = np.random.default_rng(seed)
        take = min(eval_batches * batch_size, len(idx))
        idx = np.sort(rng.choice(idx, size=take, replace=False))
    x, y = dataset.features[idx], dataset.labels[idx]
    logits, _ = forward_path(net, genome, x)
    loss, _ = softmax_cross_entropy(logits, y)
    return EvalResult(
        genome=genome,
        accuracy=accuracy(logits, y),
        loss=loss,
        at_step=net.train_steps,
    )


def build_standalone(space: SearchSpace, genome: Genome, rng: np.random.Generator):
    """Fresh (specs, params) chain with a genome's topology."""
    space.validate_genome(genome)
    specs = [LayerSpec("dense", space.input_dim, space.hidden_dim, "none")]
    for b, c in enumerate(genome):
        specs.extend(space.blocks[b][c].layers)
    specs.append(LayerSpec("dense", space.hidden_dim, space.num_classes, "none"))
    params = [
        glorot_dense(spec.in_dim, spec.out_dim, rng) if spec.kind == "dense" else None
        for spec in specs
    ]
    return specs, params


def retrain_from_scratch(
    space: SearchSpace, genome: Genome, dataset: Dataset, cfg: TrainConfig
) -> EvalResult:
    """Ground-truth oracle: train the genome's standalone network from scratch."""
    _require_split(dataset, "train")
    _require_split(dataset, "val")
    rng = np.random.default_rng(cfg.seed)
    specs, params = build_standalone(space, genome, rng)
    for step in range(cfg.steps):
        x, y = draw_batch(dataset, "train", cfg.batch_size, rng)
        out, caches = chain_forward(specs, params, x)
        _, grad = softmax_cross_entropy(out, y)
        _, grads = chain_backward(specs, params, caches, grad)
        lr = _step_lr(cfg, step)
        params = [
            sgd_step(p, g, lr) if g is not None else p for p, g in zip(params, grads)
        ]
    vx, vy = dataset.split_arrays("val")
    logits, _ = chain_forward(specs, params, vx)
    loss, _ = softmax_cross_entropy(logits, vy)
    return EvalResult(
        genome=genome, accuracy=accuracy(logits, vy), loss=loss, at_step=cfg.steps
    )
