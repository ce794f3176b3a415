"""Run-directory reporting: consolidated JSON plus rendered figures.

`report` walks a run directory produced by the CLI, cross-checks that every
artifact was written by the same (config hash, master seed), summarizes the
results, and renders the delimited outputs as PNG figures: training loss,
the shifting trajectory of probe genomes, the order-preserving audit, and
the transfer convergence gap.
"""
from __future__ import annotations

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def _read_header_comment(path):
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
    if not first.startswith("# "):
        return {}
    out = {}
    for token in first[2:].strip().split():
        if "=" in token:
            key, value = token.split("=", 1)
            out[key] = value
    return out


def _read_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    return list(reader)


def _plot_train_loss(rows, out_path):
    steps = [int(r["step"]) for r in rows]
    losses = [float(r["loss"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(steps, losses, lw=0.6, color="tab:blue")
    ax.set_xlabel("step")
    ax.set_ylabel("training loss")
    ax.set_title("supernet training")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def _plot_trajectory(rows, out_path):
    by_probe: dict = {}
    for r in rows:
        by_probe.setdefault(r["probe_genome"], []).append(
            (int(r["iteration"]), float(r["acc"]))
        )
    fig, ax = plt.subplots(figsize=(6, 4))
    for genome, pts in sorted(by_probe.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3, label=genome)
    ax.set_xlabel("search iteration")
    ax.set_ylabel("supernet accuracy")
    ax.set_title("probe trajectory during shifting")
    if len(by_probe) <= 12:
        ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def _plot_order(rows, out_path):
    iters = [r["iteration"] for r in rows]
    hits = [int(r["global_hits"]) for r in rows]
    taus = [float(r["local_tau"]) for r in rows]
    fig, ax1 = plt.subplots(figsize=(6, 4))
    ax1.plot(iters, hits, marker="s", color="tab:blue", label="top-k hits")
    ax1.set_xlabel("checkpoint")
    ax1.set_ylabel("good genomes in top-k", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.plot(iters, taus, marker="o", color="tab:red", label="local tau")
    ax2.set_ylabel("Kendall tau (good subset)", color="tab:red")
    ax1.set_title("order-preserving audit")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def _plot_gap(rows, out_path):
    iters = [int(r["iteration"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(iters, [float(r["transfer_acc"]) for r in rows], marker="o", label="transfer")
    ax.plot(iters, [float(r["reference_acc"]) for r in rows], ls="--", label="reference")
    ax.plot(iters, [float(r["gap"]) for r in rows], marker="x", label="gap")
    ax.set_xlabel("search iteration")
    ax.set_ylabel("mean probe accuracy")
    ax.set_title("transfer convergence")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


_FIGURES = {
    "train_log.csv": ("train_loss.png", _plot_train_loss),
    "search_history.csv": (None, None),  # summarized, not plotted
    "search_trajectory.csv": ("trajectory.png", _plot_trajectory),
    "transfer_trajectory.csv": ("transfer_trajectory.png", _plot_trajectory),
    "order_report.csv": ("order.png", _plot_order),
    "gap_table.csv": ("transfer_gap.png", _plot_gap),
}


def write_report(run_dir) -> dict:
    """Consolidate a run directory; returns the report document."""
    run_dir = str(run_dir)
    report: dict = {
        "run_dir": run_dir,
        "artifacts": {},
        "results": {},
        "figures": [],
        "consistent": True,
    }
    stamps = set()

    for sub in ("logs", "results", "checkpoints"):
        folder = os.path.join(run_dir, sub)
        if not os.path.isdir(folder):
            continue
        for name in sorted(os.listdir(folder)):
            path = os.path.join(folder, name)
            rel = f"{sub}/{name}"
            entry: dict = {"path": rel}
            if name.endswith(".csv"):
                header = _read_header_comment(path)
                entry.update(header)
                if "config_hash" in header:
                    stamps.add((header.get("config_hash"), header.get("master_seed")))
            elif name.endswith(".json"):
                with open(path, "r", encoding="utf-8") as fh:
                    doc = json.load(fh)
                if "config_hash" in doc:
                    stamps.add((str(doc["config_hash"]), str(doc["master_seed"])))
                    entry["config_hash"] = doc["config_hash"]
                report["results"][name] = {
                    k: doc[k]
                    for k in ("best_genome", "best_accuracy", "best_flops", "accuracy", "loss")
                    if k in doc
                }
            report["artifacts"][rel] = entry

    if len(stamps) > 1:
        report["consistent"] = False
        report["stamp_conflicts"] = sorted(map(list, stamps))

    fig_dir = os.path.join(run_dir, "figures")
    logs_dir = os.path.join(run_dir, "logs")
    if os.path.isdir(logs_dir):
        os.makedirs(fig_dir, exist_ok=True)
        for name, (fig_name, plot_fn) in _FIGURES.items():
            src = os.path.join(logs_dir, name)
            if fig_name is None or not os.path.isfile(src):
                continue
            rows = _read_csv(src)
            if not rows:
                continue
            out_path = os.path.join(fig_dir, fig_name)
            plot_fn(rows, out_path)
            report["figures"].append(f"figures/{fig_name}")

    out_json = os.path.join(run_dir, "results", "report.json")
    os.makedirs(os.path.dirname(out_json), exist_ok=True)
    with open(out_json, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report
