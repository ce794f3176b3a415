"""Command-line pipeline driver.

Subcommands: train, search, retrain, order-audit, transfer, report. Each
run writes into the config's output directory:

    <output_dir>/
      config.json        echo of the resolved config (+ hash, seed source)
      checkpoints/       supernet checkpoints (shiftnas-ckpt-v1)
      logs/              delimited outputs (train log, history, trajectory,
                         order report, gap table)
      results/           result JSON documents, consolidated report
      figures/           PNGs rendered by `report`

Every artifact names the producing config hash and master seed. Errors exit
nonzero with a machine-readable JSON line on stderr.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .config import RunConfig, load_run_config
from .errors import CheckpointError, ConfigError, ShiftNasError
from .evosearch import write_history_csv, write_trajectory_csv
from .metrics import order_experiment, write_order_csv
from .report import write_report
from .seeds import derive_seed
from .space import format_genome, parse_genome
from .supernet import init_supernet, load_checkpoint, save_checkpoint
from .training import retrain_from_scratch, train_supernet
from .transfer import (
    TransferConfig,
    transfer_convergence_probe,
    transfer_search,
    write_gap_csv,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(
            json.dumps({"error": "ArgumentError", "message": message}),
            file=sys.stderr,
        )
        raise SystemExit(2)


def _ensure_run_dirs(cfg: RunConfig) -> None:
    for sub in ("checkpoints", "logs", "results"):
        os.makedirs(os.path.join(cfg.output_dir, sub), exist_ok=True)
    echo = dict(cfg.raw)
    echo["config_hash"] = cfg.hash
    echo["seed_source"] = cfg.seed_source
    with open(os.path.join(cfg.output_dir, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(echo, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_json(cfg: RunConfig, rel_path: str, doc: dict) -> None:
    doc = dict(doc)
    doc["config_hash"] = cfg.hash
    doc["master_seed"] = cfg.master_seed
    doc["seed_source"] = cfg.seed_source
    path = os.path.join(cfg.output_dir, rel_path)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_probes(path) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        return [parse_genome(line) for line in fh if line.strip()]


def _search_result_doc(result, cfg: RunConfig, ea_cfg) -> dict:
    doc = {
        "best_genome": format_genome(result.best_genome),
        "best_accuracy": result.best_score,
        "best_flops": result.best_flops,
        "seed": ea_cfg.seed,
        "shifting": ea_cfg.shifting,
        "iterations": ea_cfg.iterations,
        "population_t": ea_cfg.population_t,
        "mode": ea_cfg.mode,
        "config": cfg.raw,
    }
    if result.pareto is not None:
        doc["pareto_front"] = [
            {
                "genome": format_genome(e.genome),
                "accuracy": e.score,
                "flops": e.flops,
            }
            for e in result.pareto
        ]
    return doc


def cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    _ensure_run_dirs(cfg)
    space = cfg.build_space()
    dataset = cfg.build_dataset()
    net = init_supernet(space, seed=derive_seed(cfg.master_seed, "supernet-init"))
    net, log = train_supernet(net, dataset, cfg.train)
    ckpt = os.path.join(cfg.output_dir, "checkpoints", "supernet.ckpt")
    save_checkpoint(net, ckpt)
    log.write_csv(
        os.path.join(cfg.output_dir, "logs", "train_log.csv"), cfg.artifact_header()
    )
    print(f"trained {cfg.train.steps} steps ({cfg.train.sampler}) -> {ckpt}")
    return 0


def _load_net_for(cfg: RunConfig, path):
    net = load_checkpoint(path)
    expected = cfg.build_space()
    if net.space != expected:
        raise CheckpointError(
            f"checkpoint {path} was built for a different space than the config"
        )
    return net


def cmd_search(args) -> int:
    from .evosearch import search

    cfg = load_run_config(args.config)
    _ensure_run_dirs(cfg)
    dataset = cfg.build_dataset()
    net = _load_net_for(cfg, args.checkpoint)
    ea_cfg = cfg.ea
    if args.no_shifting:
        ea_cfg = dataclasses.replace(ea_cfg, shifting=False)
    probes = _load_probes(args.probes) if args.probes else None
    snapshot_iters = (
        tuple(int(tok) for tok in args.snapshot_iters.split(",") if tok != "")
        if args.snapshot_iters
        else ()
    )
    result = search(net, net.space, dataset, ea_cfg, probes, snapshot_iters)
    header = cfg.artifact_header()
    write_history_csv(
        result.state.history,
        os.path.join(cfg.output_dir, "logs", "search_history.csv"),
        header,
    )
    if probes:
        write_trajectory_csv(
            result.trajectory,
            os.path.join(cfg.output_dir, "logs", "search_trajectory.csv"),
            header,
        )
    for it, snap in sorted(result.snapshots.items()):
        save_checkpoint(
            snap, os.path.join(cfg.output_dir, "checkpoints", f"ckpt_iter_{it}.ckpt")
        )
    _write_json(cfg, "results/search_result.json", _search_result_doc(result, cfg, ea_cfg))
    print(
        f"best {format_genome(result.best_genome)} "
        f"acc {result.best_score:.4f} flops {result.best_flops}"
    )
    return 0


def _retrain_one(task):
    space, genome, dataset, train_cfg = task
    return retrain_from_scratch(space, genome, dataset, train_cfg)


def cmd_retrain(args) -> int:
    cfg = load_run_config(args.config)
    _ensure_run_dirs(cfg)
    space = cfg.build_space()
    dataset = cfg.build_dataset()
    genomes = [parse_genome(g) for g in args.genome]
    for g in genomes:
        space.validate_genome(g)
    tasks = [(space, g, dataset, cfg.retrain) for g in genomes]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_retrain_one, tasks))
    else:
        results = [_retrain_one(t) for t in tasks]
    for g, ev in zip(genomes, results):
        name = f"retrain_{format_genome(g)}.json"
        _write_json(
            cfg,
            f"results/{name}",
            {
                "genome": format_genome(g),
                "accuracy": ev.accuracy,
                "loss": ev.loss,
                "steps": cfg.retrain.steps,
                "flops": space.flops(g),
            },
        )
        print(f"retrain {format_genome(g)}: acc {ev.accuracy:.4f}")
    return 0


def _checkpoint_label(path, ordinal: int) -> str:
    stem = os.path.splitext(os.path.basename(str(path)))[0]
    digits = ""
    for ch in reversed(stem):
        if ch.isdigit():
            digits = ch + digits
        elif digits:
            break
    return digits if digits else str(ordinal)


def cmd_order_audit(args) -> int:
    cfg = load_run_config(args.config)
    _ensure_run_dirs(cfg)
    dataset = cfg.build_dataset()
    paths = [p for p in args.checkpoints.split(",") if p]
    nets = [_load_net_for(cfg, p) for p in paths]
    labels = [_checkpoint_label(p, i) for i, p in enumerate(paths)]
    good = _load_probes(args.good)
    poor = _load_probes(args.poor)
    reports = order_experiment(
        nets,
        good,
        poor,
        dataset,
        cfg.retrain,
        labels=labels,
        eval_batches=0,
        eval_seed=derive_seed(cfg.master_seed, "order-eval"),
    )
    header = cfg.artifact_header()
    write_order_csv(
        reports, os.path.join(cfg.output_dir, "logs", "order_report.csv"), header
    )
    _write_json(
        cfg,
        "results/order_report.json",
        {
            "checkpoints": paths,
            "reports": [
                {
                    "iteration": r.label,
                    "global_hits": r.global_hits,
                    "global_k": r.global_k,
                    "local_tau": r.local_tau,
                }
                for r in reports
            ],
        },
    )
    for r in reports:
        print(f"checkpoint {r.label}: hits {r.global_hits}/{r.global_k} tau {r.local_tau:.4f}")
    return 0


def cmd_transfer(args) -> int:
    cfg = load_run_config(args.config)
    _ensure_run_dirs(cfg)
    pretrained = load_checkpoint(args.checkpoint)
    spec = {"csv": args.dataset} if args.dataset.endswith(".csv") else {"preset": args.dataset}
    new_dataset = cfg.build_dataset(spec)
    tcfg = cfg.transfer
    if tcfg is None:
        tcfg = TransferConfig(
            ea=dataclasses.replace(cfg.ea, seed=derive_seed(cfg.master_seed, "transfer-search")),
            head_seed=derive_seed(cfg.master_seed, "transfer-head"),
        )
    header = cfg.artifact_header()
    if args.reference:
        reference = load_checkpoint(args.reference)
        rows, result = transfer_convergence_probe(pretrained, new_dataset, tcfg, reference)
        write_gap_csv(rows, os.path.join(cfg.output_dir, "logs", "gap_table.csv"), header)
    else:
        result = transfer_search(pretrained, new_dataset, tcfg)
    write_history_csv(
        result.state.history,
        os.path.join(cfg.output_dir, "logs", "transfer_history.csv"),
        header,
    )
    if result.trajectory:
        write_trajectory_csv(
            result.trajectory,
            os.path.join(cfg.output_dir, "logs", "transfer_trajectory.csv"),
            header,
        )
    doc = _search_result_doc(result, cfg, tcfg.ea)
    doc["transfer_mode"] = tcfg.mode
    doc["immediate_updates"] = tcfg.immediate_updates
    doc["dataset"] = args.dataset
    _write_json(cfg, "results/transfer_result.json", doc)
    print(
        f"transfer best {format_genome(result.best_genome)} acc {result.best_score:.4f}"
    )
    return 0


def cmd_report(args) -> int:
    report = write_report(args.run_dir)
    print(json.dumps({"run_dir": args.run_dir, "figures": report["figures"]}))
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="shiftnas", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="stage-one supernet training")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("search", help="evolutionary search with supernet shifting")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--no-shifting", action="store_true", help="frozen-supernet baseline")
    p.add_argument("--probes", help="file with one probe genome per line")
    p.add_argument("--snapshot-iters", help="comma-separated iterations to checkpoint")
    p.set_defaults(fn=cmd_search)

    p = sub.add_parser("retrain", help="ground-truth retrain of specific genomes")
    p.add_argument("--config", required=True)
    p.add_argument("--genome", action="append", required=True, help="e.g. 1-2-0-3 (repeatable)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_retrain)

    p = sub.add_parser("order-audit", help="order-preserving audit over checkpoints")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoints", required=True, help="comma-separated checkpoint paths")
    p.add_argument("--good", required=True, help="file of known-good genomes")
    p.add_argument("--poor", required=True, help="file of poor genomes")
    p.set_defaults(fn=cmd_order_audit)

    p = sub.add_parser("transfer", help="transfer a pretrained supernet to a new dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True, help="synthetic preset name or csv path")
    p.add_argument("--reference", help="checkpoint of a from-scratch net for the gap table")
    p.set_defaults(fn=cmd_transfer)

    p = sub.add_parser("report", help="consolidate a run directory and render figures")
    p.add_argument("--run-dir", required=True)
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ShiftNasError as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 2
    except FileNotFoundError as exc:
        print(
            json.dumps({"error": "FileNotFoundError", "message": str(exc)}),
            file=sys.stderr,
        )
        return 2


if __name__ == "__main__":
    sys.exit(main())
