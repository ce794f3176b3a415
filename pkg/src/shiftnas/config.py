"""Run configuration: one JSON document drives a whole pipeline.

Schema (unknown keys anywhere are errors, guarding against silent typos):

    {
      "master_seed": 1234,
      "output_dir": "runs/demo",
      "space": {"preset": "standard"} | {"inline": {...descriptor...}},
      "dataset": {"preset": "blobs-easy"} | {"csv": "path.csv"},
      "train": {"steps": ..., "batch_size": ..., "lr": ..., "sampler": ...,
                 "lr_decay": ...},
      "retrain": {... same keys; defaults to "train" ...},
      "ea": {"population_t": ..., "iterations": ..., ...},
      "transfer": {"mode": ..., "immediate_updates": ...,
                    "finetune_batches_per_candidate": ..., "ea": {...}}
    }

Sub-seeds are never written in the config; every component derives its own
from (master_seed, purpose-label), so e.g. changing the EA settings cannot
perturb the training stream. The environment variable SHIFTNAS_SEED
overrides master_seed (the override is recorded in artifact headers).
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

from .data import SYNTHETIC_PRESETS, Dataset, generate_synthetic, load_csv
from .errors import ConfigError
from .evosearch import EAConfig
from .seeds import derive_seed
from .space import SearchSpace, default_space
from .training import TrainConfig
from .transfer import TransferConfig

SEED_ENV_VAR = "SHIFTNAS_SEED"

_SPACE_KEYS = {"preset", "inline", "input_dim", "hidden_dim", "num_classes", "flops_budget"}
_DATASET_KEYS = {"preset", "csv"}
_TRAIN_KEYS = {"steps", "batch_size", "lr", "sampler", "lr_decay"}
_EA_KEYS = {
    "population_t",
    "iterations",
    "mutation_prob",
    "crossover_fraction",
    "shift_lr",
    "shift_samples_per_iter",
    "flops_budget",
    "mode",
    "shifting",
    "max_resample_attempts",
    "elitism",
    "eval_batches",
    "eval_batch_size",
    "shift_batch_size",
}
_TRANSFER_KEYS = {"mode", "immediate_updates", "finetune_batches_per_candidate", "ea"}
_TOP_KEYS = {"master_seed", "output_dir", "space", "dataset", "train", "retrain", "ea", "transfer"}


def _check_keys(doc: dict, allowed: set, where: str) -> None:
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object, got {type(doc).__name__}")
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def config_hash(doc: dict) -> str:
    """Stable hash of the raw config document (canonical JSON)."""
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


@dataclass
class RunConfig:
    master_seed: int
    output_dir: str
    space_spec: dict
    dataset_spec: dict
    train: TrainConfig
    retrain: TrainConfig
    ea: EAConfig
    transfer: TransferConfig | None
    raw: dict
    seed_source: str = "config"

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    def artifact_header(self) -> str:
        return f"config_hash={self.hash} master_seed={self.master_seed}"

    def build_space(self) -> SearchSpace:
        spec = self.space_spec
        if "inline" in spec:
            return SearchSpace.from_json_dict(spec["inline"])
        return default_space(
            spec["preset"],
            input_dim=spec.get("input_dim"),
            hidden_dim=spec.get("hidden_dim"),
            num_classes=spec.get("num_classes"),
            flops_budget=spec.get("flops_budget"),
        )

    def build_dataset(self, spec: dict | None = None) -> Dataset:
        spec = self.dataset_spec if spec is None else spec
        if "csv" in spec:
            return load_csv(spec["csv"], seed=derive_seed(self.master_seed, "dataset"))
        return generate_synthetic(spec["preset"], seed=derive_seed(self.master_seed, "dataset"))


def _train_config(doc: dict, master_seed: int, purpose: str, where: str) -> TrainConfig:
    _check_keys(doc, _TRAIN_KEYS, where)
    try:
        return TrainConfig(seed=derive_seed(master_seed, purpose), **doc)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _ea_config(doc: dict, master_seed: int, purpose: str, where: str) -> EAConfig:
    _check_keys(doc, _EA_KEYS, where)
    try:
        return EAConfig(seed=derive_seed(master_seed, purpose), **doc)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_run_config(doc: dict, env: dict | None = None) -> RunConfig:
    env = os.environ if env is None else env
    _check_keys(doc, _TOP_KEYS, "config")
    for key in ("master_seed", "output_dir", "space", "dataset"):
        if key not in doc:
            raise ConfigError(f"config: missing required key {key!r}")

    seed_source = "config"
    master_seed = doc["master_seed"]
    if not isinstance(master_seed, int):
        raise ConfigError("config: master_seed must be an integer")
    if env.get(SEED_ENV_VAR):
        try:
            master_seed = int(env[SEED_ENV_VAR])
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer") from exc
        seed_source = f"env:{SEED_ENV_VAR}"

    space_spec = doc["space"]
    _check_keys(space_spec, _SPACE_KEYS, "config.space")
    if ("preset" in space_spec) == ("inline" in space_spec):
        raise ConfigError("config.space: give exactly one of 'preset' or 'inline'")

    dataset_spec = doc["dataset"]
    _check_keys(dataset_spec, _DATASET_KEYS, "config.dataset")
    if ("preset" in dataset_spec) == ("csv" in dataset_spec):
        raise ConfigError("config.dataset: give exactly one of 'preset' or 'csv'")
    if "preset" in dataset_spec and dataset_spec["preset"] not in SYNTHETIC_PRESETS:
        raise ConfigError(
            f"config.dataset: unknown preset {dataset_spec['preset']!r}"
        )

    train = _train_config(doc.get("train", {}), master_seed, "train", "config.train")
    retrain_doc = doc.get("retrain", doc.get("train", {}))
    retrain = _train_config(retrain_doc, master_seed, "retrain", "config.retrain")
    ea = _ea_config(doc.get("ea", {}), master_seed, "search", "config.ea")

    transfer = None
    if "transfer" in doc:
        tdoc = dict(doc["transfer"])
        _check_keys(tdoc, _TRANSFER_KEYS, "config.transfer")
        tea_doc = tdoc.pop("ea", doc.get("ea", {}))
        try:
            transfer = TransferConfig(
                ea=_ea_config(tea_doc, master_seed, "transfer-search", "config.transfer.ea"),
                head_seed=derive_seed(master_seed, "transfer-head"),
                **tdoc,
            )
        except TypeError as exc:
            raise ConfigError(f"config.transfer: {exc}") from exc

    raw = dict(doc)
    raw["master_seed"] = master_seed
    return RunConfig(
        master_seed=master_seed,
        output_dir=doc["output_dir"],
        space_spec=space_spec,
        dataset_spec=dataset_spec,
        train=train,
        retrain=retrain,
        ea=ea,
        transfer=transfer,
        raw=raw,
        seed_source=seed_source,
    )


def load_run_config(path, env: dict | None = None) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return parse_run_config(doc, env=env)
