"""Evolutionary architecture search with supernet shifting.

Each iteration generates a population by crossover/mutation of the retained
top-T genomes, evaluates every candidate on the *current* supernet weights,
accumulates fine-tuning gradients through the sampled paths, and applies a
single mean-gradient update at the iteration boundary. Because the search
resamples genomes it already saw, a genome's stored accuracy is always the
latest measurement, and the top-T is re-ranked after every iteration.

The surrogate mode swaps the supernet evaluation for a cheap seeded fitness
table (no weights involved) so sampling-bias statistics can be measured over
many seeds in seconds.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import CheckpointError, SearchError, SpaceError
from .nncore import softmax_cross_entropy
from .seeds import derive_seed
from .space import Genome, SearchSpace, crossover, format_genome, mutate, sample_uniform
from .supernet import (
    Supernet,
    accumulate_grads,
    apply_update,
    backward_path,
    forward_path,
)
from .training import EvalResult, draw_batch, evaluate_arch

MODES = ("single_objective", "bi_objective")


@dataclass
class EAConfig:
    population_t: int = 50
    iterations: int = 20
    mutation_prob: float = 0.1
    crossover_fraction: float = 0.5
    shift_lr: float = 1e-4
    shift_samples_per_iter: int = 640
    flops_budget: int | None = None
    mode: str = "single_objective"
    shifting: bool = True
    max_resample_attempts: int = 100
    elitism: bool = True
    eval_batches: int = 8
    eval_batch_size: int = 64
    shift_batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.population_t < 2:
            raise SpaceError(f"population_t must be >= 2, got {self.population_t}")
        if self.iterations < 0:
            raise SpaceError(f"iterations must be >= 0, got {self.iterations}")
        if not 0.0 <= self.mutation_prob <= 1.0:
            raise SpaceError(f"mutation_prob {self.mutation_prob} outside [0, 1]")
        if not 0.0 <= self.crossover_fraction <= 1.0:
            raise SpaceError(
                f"crossover_fraction {self.crossover_fraction} outside [0, 1]"
            )
        if self.shift_lr < 0.0:
            raise SpaceError(f"shift_lr must be >= 0, got {self.shift_lr}")
        if self.shift_samples_per_iter < 1:
            raise SpaceError(
                f"shift_samples_per_iter must be >= 1, got {self.shift_samples_per_iter}"
            )
        if self.max_resample_attempts < 1:
            raise SpaceError(
                f"max_resample_attempts must be >= 1, got {self.max_resample_attempts}"
            )
        if self.mode not in MODES:
            raise SpaceError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.eval_batches < 0 or self.eval_batch_size < 1 or self.shift_batch_size < 1:
            raise SpaceError("eval/shift batch settings out of range")

    @property
    def shift_batches_per_candidate(self) -> int:
        return max(1, self.shift_samples_per_iter // self.population_t)


@dataclass
class TopEntry:
    genome: Genome
    score: float
    flops: int
    eval: EvalResult | None = None


@dataclass
class HistoryEvent:
    iteration: int
    genome: Genome
    score: float
    flops: int
    phase: str  # bootstrap | ea | final


@dataclass
class SearchState:
    supernet: Supernet | None
    space: SearchSpace
    top_t: list = field(default_factory=list)
    history: list = field(default_factory=list)
    rng_cand: np.random.Generator | None = None
    rng_shift: np.random.Generator | None = None
    eval_seed: int = 0


@dataclass
class SearchResult:
    best_genome: Genome
    best_score: float
    best_flops: int
    best_eval: EvalResult | None
    pareto: list | None
    state: SearchState
    trajectory: list = field(default_factory=list)  # (iteration, genome, score)
    snapshots: dict = field(default_factory=dict)  # iteration -> Supernet


def _budget(cfg: EAConfig, space: SearchSpace) -> int | None:
    return cfg.flops_budget if cfg.flops_budget is not None else space.flops_budget


def generate_candidates(
    top_t: list, cfg: EAConfig, rng: np.random.Generator, space: SearchSpace
) -> list[Genome]:
    """Produce population_t feasible genomes from the retained population.

    With an empty top_t every candidate is a uniform feasible sample. An
    infeasible offspring is redrawn up to max_resample_attempts times, then
    replaced by a feasible uniform sample. Duplicates are allowed.
    """
    budget = _budget(cfg, space)

    def feasible(g: Genome) -> bool:
        return budget is None or space.flops(g) <= budget

    def feasible_uniform() -> Genome:
        for _ in range(cfg.max_resample_attempts):
            g = sample_uniform(space, rng)
            if feasible(g):
                return g
        raise SearchError(
            f"no feasible genome after {cfg.max_resample_attempts} uniform draws "
            f"(budget={budget})"
        )

    if not top_t:
        return [feasible_uniform() for _ in range(cfg.population_t)]

    parents = [entry.genome for entry in top_t]
    n_cross = int(round(cfg.crossover_fraction * cfg.population_t)) if len(parents) >= 2 else 0
    out: list[Genome] = []
    for i in range(cfg.population_t):
        child: Genome | None = None
        for _ in range(cfg.max_resample_attempts):
            if i < n_cross:
                ia = int(rng.integers(len(parents)))
                ib = int(rng.integers(len(parents) - 1))
                if ib >= ia:
                    ib += 1
                cand = crossover(parents[ia], parents[ib], rng)
            else:
                cand = parents[int(rng.integers(len(parents)))]
            cand = mutate(cand, cfg.mutation_prob, rng, space)
            if feasible(cand):
                child = cand
                break
        out.append(child if child is not None else feasible_uniform())
    return out


def update_top_t(
    top_t: list,
    candidates: list[Genome],
    scores: list[float],
    cfg: EAConfig,
    space: SearchSpace,
    evals: list | None = None,
) -> list:
    """Merge candidates into the population; latest score wins per genome.

    Single-objective mode sorts by score descending with (flops, genome) as
    the deterministic tie-break. Bi-objective mode ranks by nondominated
    front, then crowding distance. Output is deduplicated and truncated to
    population_t.
    """
    new_entries = {}
    for i, (genome, score) in enumerate(zip(candidates, scores)):
        new_entries[genome] = TopEntry(
            genome=genome,
            score=float(score),
            flops=space.flops(genome),
            eval=None if evals is None else evals[i],
        )

    if not cfg.elitism:
        merged = list(new_entries.values())
        return merged[: cfg.population_t]

    merged_map = {entry.genome: entry for entry in top_t}
    merged_map.update(new_entries)
    entries = list(merged_map.values())

    if cfg.mode == "single_objective":
        entries.sort(key=lambda e: (-e.score, e.flops, e.genome))
        return entries[: cfg.population_t]

    points = [(e.score, space.cost(e.genome)) for e in entries]
    fronts = nondominated_sort(points)
    out: list[TopEntry] = []
    for front in fronts:
        if len(out) >= cfg.population_t:
            break
        dists = crowding_distance([points[i] for i in front])
        ranked = sorted(
            zip(front, dists),
            key=lambda t: (-t[1], entries[t[0]].flops, entries[t[0]].genome),
        )
        for idx, _ in ranked:
            if len(out) >= cfg.population_t:
                break
            out.append(entries[idx])
    return out


def ea_iteration(state: SearchState, dataset: Dataset, cfg: EAConfig, iteration: int) -> None:
    """One search iteration per the shifting schedule.

    Every candidate is evaluated on the pre-update weights; shift gradients
    are accumulated per candidate and applied once at the end with mean
    semantics (normalizer = number of contributing mini-batches).
    """
    net = state.supernet
    candidates = generate_candidates(state.top_t, cfg, state.rng_cand, state.space)
    scores: list[float] = []
    evals: list[EvalResult] = []
    agg = None
    total_batches = 0
    k = cfg.shift_batches_per_candidate
    for cand in candidates:
        ev = evaluate_arch(
            net, cand, dataset, cfg.eval_batches, state.eval_seed, cfg.eval_batch_size
        )
        scores.append(ev.accuracy)
        evals.append(ev)
        state.history.append(
            HistoryEvent(iteration, cand, ev.accuracy, state.space.flops(cand), "ea")
        )
        if cfg.shifting:
            for _ in range(k):
                x, y = draw_batch(dataset, "train", cfg.shift_batch_size, state.rng_shift)
                logits, cache = forward_path(net, cand, x)
                _, grad = softmax_cross_entropy(logits, y)
                agg = accumulate_grads(agg, backward_path(net, cand, cache, grad))
                total_batches += 1
    if cfg.shifting:
        apply_update(net, agg, cfg.shift_lr, normalizer=total_batches)
    state.top_t = update_top_t(state.top_t, candidates, scores, cfg, state.space, evals)


def _bootstrap(state: SearchState, cfg: EAConfig, score_fn) -> None:
    candidates = generate_candidates([], cfg, state.rng_cand, state.space)
    scores = []
    evals = []
    for cand in candidates:
        score, ev = score_fn(cand)
        scores.append(score)
        evals.append(ev)
        state.history.append(
            HistoryEvent(0, cand, score, state.space.flops(cand), "bootstrap")
        )
    state.top_t = update_top_t([], candidates, scores, cfg, state.space, evals)


def _finalize(
    state: SearchState, cfg: EAConfig, score_fn, iteration: int
) -> tuple[TopEntry, list | None]:
    """Re-score the final population and pick the winner (or Pareto front)."""
    rescored: list[TopEntry] = []
    for entry in state.top_t:
        score, ev = score_fn(entry.genome)
        rescored.append(TopEntry(entry.genome, score, entry.flops, ev))
        state.history.append(
            HistoryEvent(iteration, entry.genome, score, entry.flops, "final")
        )
    rescored.sort(key=lambda e: (-e.score, e.flops, e.genome))
    if cfg.mode == "single_objective":
        return rescored[0], None
    points = [(e.score, state.space.cost(e.genome)) for e in rescored]
    front = nondominated_sort(points)[0]
    pareto = [rescored[i] for i in front]
    return pareto[0], pareto


def search(
    net: Supernet,
    space: SearchSpace,
    dataset: Dataset,
    cfg: EAConfig,
    probes: list | None = None,
    snapshot_iters=(),
) -> SearchResult:
    """Full stage-two search on a trained supernet.

    `probes` are genomes whose supernet accuracy is recorded at iteration 0
    and after every iteration (the shifting trajectory). `snapshot_iters`
    selects iterations whose weights are cloned into the result.
    """
    if net.space != space:
        raise CheckpointError("supernet space descriptor does not match the search space")
    state = SearchState(
        supernet=net,
        space=space,
        rng_cand=np.random.default_rng(derive_seed(cfg.seed, "candidates")),
        rng_shift=np.random.default_rng(derive_seed(cfg.seed, "shift")),
        eval_seed=derive_seed(cfg.seed, "eval"),
    )

    def supernet_score(genome: Genome, eval_batches: int | None = None):
        ev = evaluate_arch(
            net,
            genome,
            dataset,
            cfg.eval_batches if eval_batches is None else eval_batches,
            state.eval_seed,
            cfg.eval_batch_size,
        )
        return ev.accuracy, ev

    trajectory: list = []
    snapshots: dict = {}

    def record(iteration: int) -> None:
        if probes:
            for g in probes:
                score, _ = supernet_score(g)
                trajectory.append((iteration, g, score))
        if iteration in set(snapshot_iters):
            snapshots[iteration] = net.clone()

    record(0)
    _bootstrap(state, cfg, supernet_score)
    for it in range(1, cfg.iterations + 1):
        ea_iteration(state, dataset, cfg, it)
        record(it)

    # Final ranking re-evaluates the retained population on the final
    # weights over the full validation split.
    best, pareto = _finalize(
        state, cfg, lambda g: supernet_score(g, eval_batches=0), cfg.iterations
    )
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


@dataclass
class SurrogateConfig:
    """Seeded synthetic fitness over a space: per-choice table plus a
    pairwise interaction between neighboring blocks, with optional
    estimator noise."""

    seed: int = 0
    noise_sigma: float = 0.0
    interaction_strength: float = 0.3


class SurrogateFitness:
    """Deterministic fitness f(g) = sum_b main[b][g_b] + sum_b inter[b][g_b][g_{b+1}]."""

    def __init__(self, space: SearchSpace, cfg: SurrogateConfig):
        rng = np.random.default_rng(cfg.seed)
        self.space = space
        self.main = [rng.normal(0.0, 1.0, size=len(block)) for block in space.blocks]
        self.inter = [
            rng.normal(
                0.0,
                cfg.interaction_strength,
                size=(len(space.blocks[b]), len(space.blocks[b + 1])),
            )
            for b in range(space.num_blocks - 1)
        ]

    def __call__(self, g: Genome) -> float:
        self.space.validate_genome(g)
        total = sum(self.main[b][c] for b, c in enumerate(g))
        total += sum(self.inter[b][g[b], g[b + 1]] for b in range(len(g) - 1))
        return float(total)


def surrogate_search(
    space: SearchSpace,
    surrogate_cfg: SurrogateConfig,
    cfg: EAConfig,
    probes: list | None = None,
) -> SearchResult:
    """The same EA machinery with evaluation replaced by a seeded fitness.

    Shifting is a no-op (there are no weights); the history still records
    every sample event, which is what the sampling-bias statistics consume.
    """
    fitness = SurrogateFitness(space, surrogate_cfg)
    rng_noise = np.random.default_rng(derive_seed(surrogate_cfg.seed, "noise"))
    state = SearchState(
        supernet=None,
        space=space,
        rng_cand=np.random.default_rng(derive_seed(cfg.seed, "candidates")),
        rng_shift=None,
        eval_seed=derive_seed(cfg.seed, "eval"),
    )

    def score_fn(genome: Genome):
        value = fitness(genome)
        if surrogate_cfg.noise_sigma > 0.0:
            value += float(rng_noise.normal(0.0, surrogate_cfg.noise_sigma))
        return value, None

    trajectory: list = []

    def record(iteration: int) -> None:
        if probes:
            for g in probes:
                trajectory.append((iteration, g, fitness(g)))

    record(0)
    _bootstrap(state, cfg, score_fn)
    for it in range(1, cfg.iterations + 1):
        candidates = generate_candidates(state.top_t, cfg, state.rng_cand, space)
        scores = []
        for cand in candidates:
            score, _ = score_fn(cand)
            scores.append(score)
            state.history.append(
                HistoryEvent(it, cand, score, space.flops(cand), "ea")
            )
        state.top_t = update_top_t(state.top_t, candidates, scores, cfg, space)
        record(it)

    best, pareto = _finalize(state, cfg, score_fn, cfg.iterations)
    return SearchResult(
        best_genome=best.genome,
        best_score=best.score,
        best_flops=best.flops,
        best_eval=None,
        pareto=pareto,
        state=state,
        trajectory=trajectory,
        snapshots={},
    )


def nondominated_sort(points) -> list[list[int]]:
    """Pareto fronts over (accuracy, cost): maximize the first, minimize the
    second. Returns lists of input indices, front 0 first."""
    pts = [(float(a), float(c)) for a, c in points]
    n = len(pts)

    def dominates(p, q) -> bool:
        return p[0] >= q[0] and p[1] <= q[1] and (p[0] > q[0] or p[1] < q[1])

    dominated_count = [0] * n
    dominates_idx: list[list[int]] = [[] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if dominates(pts[i], pts[j]):
                dominates_idx[i].append(j)
            elif dominates(pts[j], pts[i]):
                dominated_count[i] += 1
    fronts: list[list[int]] = []
    current = [i for i in range(n) if dominated_count[i] == 0]
    while current:
        fronts.append(current)
        nxt: list[int] = []
        for i in current:
            for j in dominates_idx[i]:
                dominated_count[j] -= 1
                if dominated_count[j] == 0:
                    nxt.append(j)
        current = sorted(nxt)
    return fronts


def crowding_distance(front_points) -> list[float]:
    """NSGA-II crowding distance for one front, aligned with input order.

    Boundary points per objective get +inf; interior points accumulate the
    normalized gap between their neighbors. Ties sort by the other
    objective's value so the result is independent of input order.
    """
    pts = [(float(a), float(c)) for a, c in front_points]
    n = len(pts)
    if n == 0:
        raise SpaceError("crowding_distance needs a nonempty front")
    dist = [0.0] * n
    for obj in (0, 1):
        order = sorted(range(n), key=lambda i: (pts[i][obj], pts[i][1 - obj]))
        lo = pts[order[0]][obj]
        hi = pts[order[-1]][obj]
        dist[order[0]] = float("inf")
        dist[order[-1]] = float("inf")
        if hi == lo:
            continue
        for k in range(1, n - 1):
            i = order[k]
            if dist[i] == float("inf"):
                continue
            gap = pts[order[k + 1]][obj] - pts[order[k - 1]][obj]
            dist[i] += gap / (hi - lo)
    return dist


def write_history_csv(history, path, header_comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write("iteration,genome,acc,flops,phase\n")
        for ev in history:
            fh.write(
                f"{ev.iteration},{format_genome(ev.genome)},{ev.score!r},{ev.flops},{ev.phase}\n"
            )


def write_trajectory_csv(trajectory, path, header_comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write("iteration,probe_genome,acc\n")
        for iteration, genome, score in trajectory:
            fh.write(f"{iteration},{format_genome(genome)},{score!r}\n")
