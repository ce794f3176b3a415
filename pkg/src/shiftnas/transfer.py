"""Supernet transfer: reuse a pretrained feature extractor on a new task.

The prediction head is re-initialized (and the stem too, when the new
input width differs) and the evolutionary search fine-tunes the net as it
samples. Unlike the plain shifting schedule, transfer applies each sampled
candidate's fine-tuning steps immediately, so later candidates in the same
iteration already see the adapted weights. Candidates are still evaluated
before their own fine-tuning step.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import SpaceError
from .evosearch import (
    EAConfig,
    HistoryEvent,
    SearchResult,
    SearchState,
    _bootstrap,
    _finalize,
    generate_candidates,
    search,
    update_top_t,
)
from .nncore import softmax_cross_entropy
from .seeds import derive_seed
from .space import Genome, sample_uniform
from .supernet import (
    PathGrads,
    Supernet,
    apply_update,
    backward_path,
    forward_path,
    reset_head,
)
from .training import draw_batch, evaluate_arch

MODES = ("finetune_all", "freeze_features")


@dataclass
class TransferConfig:
    ea: EAConfig = field(default_factory=EAConfig)
    mode: str = "finetune_all"
    head_seed: int = 0
    immediate_updates: bool = True
    finetune_batches_per_candidate: int = 10

    def __post_init__(self):
        if self.mode not in MODES:
            raise SpaceError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.finetune_batches_per_candidate < 1:
            raise SpaceError("finetune_batches_per_candidate must be >= 1")


def _filter_frozen(grads: PathGrads, stem_trainable: bool) -> PathGrads:
    """Keep only head (and stem when it was re-initialized) gradients."""
    return PathGrads(
        stem=grads.stem if stem_trainable else None,
        head=grads.head,
        blocks={},
    )


def prepare_net(pretrained: Supernet, new_dataset: Dataset, tcfg: TransferConfig) -> Supernet:
    """Head-reset copy of the pretrained net matched to the new dataset."""
    return reset_head(
        pretrained,
        new_num_classes=new_dataset.num_classes,
        seed=tcfg.head_seed,
        new_input_dim=new_dataset.input_dim,
    )


def transfer_search(
    pretrained: Supernet,
    new_dataset: Dataset,
    tcfg: TransferConfig,
    probes: list | None = None,
    snapshot_iters=(),
) -> SearchResult:
    """Search on the new dataset while fine-tuning the transferred net.

    With immediate_updates off this is exactly a plain search on the
    head-reset net. In freeze_features mode the choice-block parameters are
    never touched (only head, plus stem if it had to be re-initialized).
    """
    net = prepare_net(pretrained, new_dataset, tcfg)
    cfg = tcfg.ea
    if not tcfg.immediate_updates:
        return search(net, net.space, new_dataset, cfg, probes, snapshot_iters)

    stem_trainable = tcfg.mode == "finetune_all" or bool(
        net.meta.get("stem_reinitialized")
    )
    state = SearchState(
        supernet=net,
        space=net.space,
        rng_cand=np.random.default_rng(derive_seed(cfg.seed, "candidates")),
        rng_shift=np.random.default_rng(derive_seed(cfg.seed, "shift")),
        eval_seed=derive_seed(cfg.seed, "eval"),
    )

    def finetune(genome: Genome) -> None:
        for _ in range(tcfg.finetune_batches_per_candidate):
            x, y = draw_batch(new_dataset, "train", cfg.shift_batch_size, state.rng_shift)
            logits, cache = forward_path(net, genome, x)
            _, grad = softmax_cross_entropy(logits, y)
            grads = backward_path(net, genome, cache, grad)
            if tcfg.mode == "freeze_features":
                grads = _filter_frozen(grads, stem_trainable)
            apply_update(net, grads, cfg.shift_lr, normalizer=1)

    def score_then_finetune(genome: Genome):
        ev = evaluate_arch(
            net, genome, new_dataset, cfg.eval_batches, state.eval_seed, cfg.eval_batch_size
        )
        finetune(genome)
        return ev.accuracy, ev

    trajectory: list = []
    snapshots: dict = {}

    def record(iteration: int) -> None:
        if probes:
            for g in probes:
                ev = evaluate_arch(
                    net, g, new_dataset, cfg.eval_batches, state.eval_seed, cfg.eval_batch_size
                )
                trajectory.append((iteration, g, ev.accuracy))
        if iteration in set(snapshot_iters):
            snapshots[iteration] = net.clone()

    record(0)
    _bootstrap(state, cfg, score_then_finetune)
    for it in range(1, cfg.iterations + 1):
        candidates = generate_candidates(state.top_t, cfg, state.rng_cand, state.space)
        scores = []
        evals = []
        for cand in candidates:
            score, ev = score_then_finetune(cand)
            scores.append(score)
            evals.append(ev)
            state.history.append(
                HistoryEvent(it, cand, score, state.space.flops(cand), "ea")
            )
        state.top_t = update_top_t(state.top_t, candidates, scores, cfg, state.space, evals)
        record(it)

    def full_eval(genome: Genome):
        ev = evaluate_arch(net, genome, new_dataset, 0, state.eval_seed)
        return ev.accuracy, ev

    best, pareto = _finalize(state, cfg, full_eval, cfg.iterations)
    return SearchResult(
        best_genome=best.genome,
        best_score=best.score,
        best_flops=best.flops,
        best_eval=best.eval,
        pareto=pareto,
        state=state,
        trajectory=trajectory,
        snapshots=snapshots,
    )


def probe_mean_accuracy(
    net: Supernet,
    probes: list,
    dataset: Dataset,
    eval_batches: int,
    eval_seed: int,
    eval_batch_size: int = 64,
) -> float:
    """Mean supernet accuracy of a probe genome set (read-only)."""
    if not probes:
        raise SpaceError("probe set is empty")
    accs = [
        evaluate_arch(net, g, dataset, eval_batches, eval_seed, eval_batch_size).accuracy
        for g in probes
    ]
    return float(np.mean(accs))


@dataclass
class GapRow:
    iteration: int
    transfer_acc: float
    reference_acc: float

    @property
    def gap(self) -> float:
        return self.reference_acc - self.transfer_acc


def transfer_convergence_probe(
    pretrained: Supernet,
    new_dataset: Dataset,
    tcfg: TransferConfig,
    reference: Supernet,
    probes: list | None = None,
    probe_count: int = 10,
):
    """Per-iteration accuracy gap between a transferring net and a reference
    net trained from scratch on the new dataset.

    Returns (gap rows, transfer SearchResult). Row 0 is measured before any
    transfer fine-tuning, i.e. the raw head-reset gap.
    """
    cfg = tcfg.ea
    if probes is None:
        rng = np.random.default_rng(derive_seed(cfg.seed, "probes"))
        probes = [sample_uniform(reference.space, rng) for _ in range(probe_count)]
    if not probes:
        raise SpaceError("probe set is empty")
    result = transfer_search(pretrained, new_dataset, tcfg, probes=probes)
    eval_seed = derive_seed(cfg.seed, "eval")
    reference_acc = probe_mean_accuracy(
        reference, probes, new_dataset, cfg.eval_batches, eval_seed, cfg.eval_batch_size
    )
    by_iter: dict[int, list[float]] = {}
    for iteration, _, score in result.trajectory:
        by_iter.setdefault(iteration, []).append(score)
    rows = [
        GapRow(
            iteration=it,
            transfer_acc=float(np.mean(scores)),
            reference_acc=reference_acc,
        )
        for it, scores in sorted(by_iter.items())
    ]
    return rows, result


def write_gap_csv(rows, path, header_comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write("iteration,transfer_acc,reference_acc,gap\n")
        for row in rows:
            fh.write(
                f"{row.iteration},{row.transfer_acc!r},{row.reference_acc!r},{row.gap!r}\n"
            )
