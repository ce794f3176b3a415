"""Order-preserving diagnostics.

Global order-preserving ability: can an estimator separate a known-good set
of genomes from poor ones (top-k hit count)? Local: can it rank the good
ones among themselves (Kendall's tau against retrain ground truth)? The
order experiment measures both across a sequence of supernet checkpoints.
"""
from __future__ import annotations

from dataclasses import dataclass

from .data import Dataset
from .errors import DegenerateRankingError, SpaceError
from .space import format_genome
from .training import TrainConfig, evaluate_arch, retrain_from_scratch


@dataclass(frozen=True)
class RankedPair:
    id: str
    estimated: float
    truth: float


@dataclass
class OrderReport:
    label: str
    global_hits: int
    global_k: int
    local_tau: float
    n_good: int
    n_poor: int


def kendall_tau(xs, ys) -> float:
    """Kendall's tau-b over two equal-length score sequences.

    tau-b = (C - D) / sqrt((C + D + Tx)(C + D + Ty)) where Tx/Ty count pairs
    tied only in x / only in y; with no ties this is plain tau-a. A sequence
    with all values tied leaves the statistic undefined.
    """
    xs = [float(v) for v in xs]
    ys = [float(v) for v in ys]
    if len(xs) != len(ys):
        raise DegenerateRankingError(f"length mismatch: {len(xs)} vs {len(ys)}")
    n = len(xs)
    if n < 2:
        raise DegenerateRankingError(f"need at least 2 items, got {n}")
    if len(set(xs)) == 1 or len(set(ys)) == 1:
        raise DegenerateRankingError("tau undefined: one input is entirely tied")
    concordant = discordant = tied_x = tied_y = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            dx = xs[i] - xs[j]
            dy = ys[i] - ys[j]
            prod = dx * dy
            if prod > 0:
                concordant += 1
            elif prod < 0:
                discordant += 1
            elif dx == 0 and dy != 0:
                tied_x += 1
            elif dy == 0 and dx != 0:
                tied_y += 1
            # pairs tied in both contribute to neither factor
    denom = (concordant + discordant + tied_x) * (concordant + discordant + tied_y)
    if denom == 0:
        raise DegenerateRankingError("tau undefined: no comparable pairs")
    return (concordant - discordant) / denom**0.5


def global_topk_hits(pairs, good_ids, k: int) -> int:
    """How many designated-good ids land in the estimator's top k.

    Ties in the estimated score are broken by id so reports replay exactly.
    """
    pairs = list(pairs)
    if k > len(pairs):
        raise SpaceError(f"k={k} exceeds {len(pairs)} pairs")
    known = {p.id for p in pairs}
    unknown = set(good_ids) - known
    if unknown:
        raise SpaceError(f"good ids not present in pairs: {sorted(unknown)}")
    ranked = sorted(pairs, key=lambda p: (-p.estimated, p.id))
    top = {p.id for p in ranked[:k]}
    return len(top & set(good_ids))


def sampling_fitness_correlation(history, truth) -> float:
    """Kendall tau between per-genome sample counts and true scores.

    `history` is any iterable of events with a .genome attribute (or raw
    genomes); `truth` maps genome -> score. Embodies the check that search
    sampling frequency correlates positively with architecture quality.
    """
    counts: dict = {}
    for event in history:
        genome = getattr(event, "genome", event)
        counts[genome] = counts.get(genome, 0) + 1
    if len(counts) < 2:
        raise DegenerateRankingError(
            f"need at least 2 distinct sampled genomes, got {len(counts)}"
        )
    genomes = sorted(counts)
    xs = [counts[g] for g in genomes]
    ys = [float(truth[g]) for g in genomes]
    return kendall_tau(xs, ys)


def cross_task_rank(pairs_a, pairs_b, k: int) -> dict:
    """Compare two tasks' truth rankings over the same genome universe.

    global_overlap: fraction of task A's top-k ids that are also in task
    B's top-k. local_tau: Kendall's tau of the shared top-k subset's truth
    scores across the two tasks.
    """
    a = {p.id: p for p in pairs_a}
    b = {p.id: p for p in pairs_b}
    if set(a) != set(b):
        raise SpaceError("the two tasks rank different id universes")
    if k > len(a) or k < 1:
        raise SpaceError(f"k={k} out of range for {len(a)} ids")
    top_a = [p.id for p in sorted(a.values(), key=lambda p: (-p.truth, p.id))[:k]]
    top_b = [p.id for p in sorted(b.values(), key=lambda p: (-p.truth, p.id))[:k]]
    shared = sorted(set(top_a) & set(top_b))
    overlap = len(shared) / k
    if len(shared) < 2:
        raise DegenerateRankingError(
            f"shared top-{k} subset has {len(shared)} ids; tau undefined"
        )
    tau = kendall_tau([a[i].truth for i in shared], [b[i].truth for i in shared])
    return {"global_overlap": overlap, "local_tau": tau}


def order_experiment(
    checkpoints,
    good,
    poor,
    dataset: Dataset,
    retrain_cfg: TrainConfig,
    labels=None,
    eval_batches: int = 0,
    eval_seed: int = 0,
) -> list[OrderReport]:
    """Evaluate good+poor genomes on each supernet checkpoint.

    Precondition (verified by retraining every genome from scratch): all
    good genomes strictly outperform all poor genomes. Each checkpoint then
    yields the good-set hit count among the estimator's top-|good| and
    Kendall's tau of the good genomes against retrain truth.
    """
    checkpoints = list(checkpoints)
    good = [tuple(g) for g in good]
    poor = [tuple(g) for g in poor]
    if not checkpoints:
        raise SpaceError("no checkpoints supplied")
    if labels is None:
        labels = [str(i) for i in range(len(checkpoints))]
    if len(labels) != len(checkpoints):
        raise SpaceError("labels do not align with checkpoints")
    overlap = set(good) & set(poor)
    if overlap:
        raise SpaceError(f"genomes listed as both good and poor: {sorted(overlap)}")
    space = checkpoints[0].space

    truth = {
        g: retrain_from_scratch(space, g, dataset, retrain_cfg).accuracy
        for g in good + poor
    }
    worst_good = min(good, key=lambda g: (truth[g], g))
    best_poor = max(poor, key=lambda g: (truth[g], g))
    if truth[worst_good] <= truth[best_poor]:
        raise SpaceError(
            "precondition violated: good genome "
            f"{format_genome(worst_good)} (retrain {truth[worst_good]:.4f}) does not beat "
            f"poor genome {format_genome(best_poor)} (retrain {truth[best_poor]:.4f})"
        )

    reports = []
    for label, net in zip(labels, checkpoints):
        est = {
            g: evaluate_arch(net, g, dataset, eval_batches, eval_seed).accuracy
            for g in good + poor
        }
        pairs = [
            RankedPair(id=format_genome(g), estimated=est[g], truth=truth[g])
            for g in good + poor
        ]
        hits = global_topk_hits(pairs, {format_genome(g) for g in good}, k=len(good))
        tau = kendall_tau([est[g] for g in good], [truth[g] for g in good])
        reports.append(
            OrderReport(
                label=str(label),
                global_hits=hits,
                global_k=len(good),
                local_tau=tau,
                n_good=len(good),
                n_poor=len(poor),
            )
        )
    return reports


def write_order_csv(reports, path, header_comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write("iteration,global_hits,local_tau\n")
        for rep in reports:
            fh.write(f"{rep.label},{rep.global_hits},{rep.local_tau!r}\n")
