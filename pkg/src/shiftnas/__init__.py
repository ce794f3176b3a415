"""Desk-scale one-shot neural architecture search.

Train a single-path weight-sharing supernet on small tabular tasks, search
it with an evolutionary algorithm that fine-tunes ("shifts") the supernet
toward the architectures it samples, audit how well supernet rankings match
retrain-from-scratch ground truth, and transfer a trained supernet to a new
task by resetting its prediction head.
"""

from .data import Dataset, generate_synthetic, load_csv, save_csv
from .errors import (
    CheckpointError,
    ConfigError,
    DatasetError,
    DegenerateRankingError,
    SearchError,
    ShapeError,
    ShiftNasError,
    SpaceError,
)
from .evosearch import (
    EAConfig,
    SearchResult,
    SurrogateConfig,
    SurrogateFitness,
    crowding_distance,
    generate_candidates,
    nondominated_sort,
    search,
    surrogate_search,
    update_top_t,
)
from .metrics import (
    OrderReport,
    RankedPair,
    cross_task_rank,
    global_topk_hits,
    kendall_tau,
    order_experiment,
    sampling_fitness_correlation,
)
from .space import (
    ArchGenome,
    SearchSpace,
    build_space,
    crossover,
    default_space,
    enumerate_genomes,
    format_genome,
    mutate,
    parse_genome,
    sample_uniform,
)
from .supernet import (
    Supernet,
    apply_update,
    backward_path,
    forward_path,
    init_supernet,
    load_checkpoint,
    reset_head,
    save_checkpoint,
)
from .training import (
    EvalResult,
    TrainConfig,
    evaluate_arch,
    retrain_from_scratch,
    train_strict_fair,
    train_supernet,
    train_uniform,
)
from .transfer import TransferConfig, transfer_convergence_probe, transfer_search

__version__ = "0.1.0"
