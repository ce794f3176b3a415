"""Single-path weight-sharing supernet.

One parameter set per (block, choice) plus a linear stem and head. A genome
selects one choice per block; forward/backward touch only the selected path,
so weight sharing between genomes that agree on a choice is literal aliasing
through the net's parameter store.

Checkpoint format ("shiftnas-ckpt-v1"): a single JSON header line holding the
space descriptor, counters and an array manifest, followed by the raw
little-endian float64 array payload in canonical order (stem, blocks in
(block, choice, layer) order, head; weights before biases). The header also
carries a SHA-256 of the payload, so round-trips are bit-exact and corruption
is detected on load.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CheckpointError, ShapeError, SpaceError
from .nncore import DenseParams, LayerSpec, chain_backward, chain_forward, glorot_dense, sgd_step
from .space import Genome, SearchSpace

CHECKPOINT_VERSION = "shiftnas-ckpt-v1"


@dataclass
class Supernet:
    space: SearchSpace
    stem: DenseParams
    blocks: list  # blocks[b][c] -> list of DenseParams | None per layer
    head: DenseParams
    train_steps: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def stem_spec(self) -> LayerSpec:
        return LayerSpec("dense", self.space.input_dim, self.space.hidden_dim, "none")

    @property
    def head_spec(self) -> LayerSpec:
        return LayerSpec("dense", self.space.hidden_dim, self.space.num_classes, "none")

    def clone(self) -> "Supernet":
        return Supernet(
            space=self.space,
            stem=self.stem.copy(),
            blocks=[
                [[p.copy() if p is not None else None for p in choice] for choice in block]
                for block in self.blocks
            ],
            head=self.head.copy(),
            train_steps=self.train_steps,
            meta=dict(self.meta),
        )


@dataclass
class PathView:
    """A genome's resolved layer chain through the supernet."""

    genome: Genome
    specs: list
    params: list
    segments: list  # "stem" | "head" | (block, choice, layer_index)


@dataclass
class PathCache:
    genome: Genome
    layer_caches: list
    batch: int


@dataclass
class PathGrads:
    """Gradients for a path (or an aggregate of paths).

    Block entries exist only for selected choices that carry parameters, so
    non-selected choices are structurally absent rather than zero.
    """

    stem: DenseParams | None = None
    head: DenseParams | None = None
    blocks: dict = field(default_factory=dict)  # (block, choice) -> [DenseParams | None]

    def is_empty(self) -> bool:
        return self.stem is None and self.head is None and not self.blocks


def init_supernet(space: SearchSpace, seed: int) -> Supernet:
    """Glorot-uniform weights, zero biases, deterministic in (space, seed)."""
    rng = np.random.default_rng(seed)
    stem = glorot_dense(space.input_dim, space.hidden_dim, rng)
    blocks = []
    for block in space.blocks:
        per_choice = []
        for choice in block:
            per_choice.append(
                [
                    glorot_dense(layer.in_dim, layer.out_dim, rng)
                    if layer.kind == "dense"
                    else None
                    for layer in choice.layers
                ]
            )
        blocks.append(per_choice)
    head = glorot_dense(space.hidden_dim, space.num_classes, rng)
    return Supernet(space=space, stem=stem, blocks=blocks, head=head)


def path_view(net: Supernet, g: Genome) -> PathView:
    """Resolve the ordered (spec, params) chain for a genome."""
    net.space.validate_genome(g)
    specs = [net.stem_spec]
    params = [net.stem]
    segments: list = ["stem"]
    for b, c in enumerate(g):
        choice = net.space.blocks[b][c]
        choice_params = net.blocks[b][c]
        for li, layer in enumerate(choice.layers):
            specs.append(layer)
            params.append(choice_params[li])
            segments.append((b, c, li))
    specs.append(net.head_spec)
    params.append(net.head)
    segments.append("head")
    return PathView(genome=g, specs=specs, params=params, segments=segments)


def forward_path(net: Supernet, g: Genome, x: np.ndarray):
    """Logits for inputs x through the path selected by g."""
    view = path_view(net, g)
    logits, caches = chain_forward(view.specs, view.params, x)
    return logits, PathCache(genome=g, layer_caches=caches, batch=x.shape[0])


def backward_path(net: Supernet, g: Genome, cache: PathCache, grad_logits: np.ndarray) -> PathGrads:
    """Parameter gradients along g's path, given dL/dlogits."""
    if cache.genome != g:
        raise ShapeError(
            f"cache was built for genome {cache.genome}, not {g}"
        )
    if grad_logits.shape[0] != cache.batch:
        raise ShapeError(
            f"grad batch {grad_logits.shape[0]} does not match cached batch {cache.batch}"
        )
    view = path_view(net, g)
    _, layer_grads = chain_backward(view.specs, view.params, cache.layer_caches, grad_logits)
    out = PathGrads()
    block_accum: dict = {}
    for seg, grad in zip(view.segments, layer_grads):
        if seg == "stem":
            out.stem = grad
        elif seg == "head":
            out.head = grad
        else:
            b, c, li = seg
            key = (b, c)
            if key not in block_accum:
                block_accum[key] = [None] * len(net.space.blocks[b][c].layers)
            block_accum[key][li] = grad
    for key, grads in block_accum.items():
        if any(gr is not None for gr in grads):
            out.blocks[key] = grads
    return out


def accumulate_grads(agg: PathGrads | None, pg: PathGrads) -> PathGrads:
    """Merge a path's gradients into a running aggregate (elementwise sum)."""
    if agg is None:
        agg = PathGrads()

    def add(a: DenseParams | None, b: DenseParams | None):
        if b is None:
            return a
        if a is None:
            return b.copy()
        return DenseParams(a.W + b.W, a.b + b.b)

    agg.stem = add(agg.stem, pg.stem)
    agg.head = add(agg.head, pg.head)
    for key, grads in pg.blocks.items():
        if key not in agg.blocks:
            agg.blocks[key] = [None] * len(grads)
        agg.blocks[key] = [add(a, b) for a, b in zip(agg.blocks[key], grads)]
    return agg


def apply_update(net: Supernet, agg: PathGrads | None, lr: float, normalizer: int) -> Supernet:
    """One SGD step with gradient = aggregate / normalizer; bumps train_steps.

    Parameters without a contribution in the aggregate are left untouched.
    """
    if normalizer < 1:
        raise ShapeError(f"normalizer must be >= 1, got {normalizer}")
    scale = 1.0 / normalizer
    if agg is not None and not agg.is_empty():
        if agg.stem is not None:
            net.stem = sgd_step(net.stem, DenseParams(agg.stem.W * scale, agg.stem.b * scale), lr)
        if agg.head is not None:
            net.head = sgd_step(net.head, DenseParams(agg.head.W * scale, agg.head.b * scale), lr)
        for (b, c), grads in agg.blocks.items():
            for li, grad in enumerate(grads):
                if grad is None:
                    continue
                cur = net.blocks[b][c][li]
                net.blocks[b][c][li] = sgd_step(
                    cur, DenseParams(grad.W * scale, grad.b * scale), lr
                )
    net.train_steps += 1
    return net


def reset_head(
    net: Supernet,
    new_num_classes: int,
    seed: int,
    new_input_dim: int | None = None,
) -> Supernet:
    """Copy the net with a freshly initialized head for a new class count.

    Feature (block) parameters are preserved bitwise. The stem is preserved
    when the input width matches and re-initialized otherwise; the returned
    net's meta records which happened.
    """
    if new_num_classes < 2:
        raise SpaceError(f"need at least 2 classes, got {new_num_classes}")
    input_dim = net.space.input_dim if new_input_dim is None else new_input_dim
    stem_reset = input_dim != net.space.input_dim
    new_space = dataclasses.replace(
        net.space, input_dim=input_dim, num_classes=new_num_classes
    )
    rng = np.random.default_rng(seed)
    head = glorot_dense(new_space.hidden_dim, new_num_classes, rng)
    stem = (
        glorot_dense(input_dim, new_space.hidden_dim, rng) if stem_reset else net.stem.copy()
    )
    out = Supernet(
        space=new_space,
        stem=stem,
        blocks=[
            [[p.copy() if p is not None else None for p in choice] for choice in block]
            for block in net.blocks
        ],
        head=head,
        train_steps=net.train_steps,
        meta=dict(net.meta),
    )
    out.meta["stem_reinitialized"] = stem_reset
    return out


def _array_layout(space: SearchSpace) -> list[tuple[str, int, int]]:
    """Canonical (name, rows, cols) manifest for checkpoint serialization."""
    layout = [
        ("stem.W", space.input_dim, space.hidden_dim),
        ("stem.b", 1, space.hidden_dim),
    ]
    for b, block in enumerate(space.blocks):
        for c, choice in enumerate(block):
            for li, layer in enumerate(choice.layers):
                if layer.kind != "dense":
                    continue
                layout.append((f"block.{b}.{c}.{li}.W", layer.in_dim, layer.out_dim))
                layout.append((f"block.{b}.{c}.{li}.b", 1, layer.out_dim))
    layout.append(("head.W", space.hidden_dim, space.num_classes))
    layout.append(("head.b", 1, space.num_classes))
    return layout


def iter_arrays(net: Supernet):
    """Yield (name, array) in the canonical checkpoint order."""
    yield "stem.W", net.stem.W
    yield "stem.b", net.stem.b
    for b, block in enumerate(net.space.blocks):
        for c, choice in enumerate(block):
            for li, layer in enumerate(choice.layers):
                if layer.kind != "dense":
                    continue
                p = net.blocks[b][c][li]
                yield f"block.{b}.{c}.{li}.W", p.W
                yield f"block.{b}.{c}.{li}.b", p.b
    yield "head.W", net.head.W
    yield "head.b", net.head.b


def _payload_bytes(net: Supernet) -> bytes:
    chunks = []
    for _, arr in iter_arrays(net):
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(chunks)


def params_checksum(net: Supernet) -> str:
    """SHA-256 over all parameters in canonical order."""
    return hashlib.sha256(_payload_bytes(net)).hexdigest()


def save_checkpoint(net: Supernet, path) -> None:
    payload = _payload_bytes(net)
    header = {
        "format_version": CHECKPOINT_VERSION,
        "space": net.space.to_json_dict(),
        "train_steps": net.train_steps,
        "meta": net.meta,
        "arrays": [list(entry) for entry in _array_layout(net.space)],
        "payload_bytes": len(payload),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    header_line = json.dumps(header, sort_keys=True, separators=(",", ":"))
    with open(path, "wb") as fh:
        fh.write(header_line.encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload)


def load_checkpoint(path) -> Supernet:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    sep = blob.find(b"\n")
    if sep < 0:
        raise CheckpointError(f"{path}: missing header line")
    try:
        header = json.loads(blob[:sep].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: header is not valid JSON: {exc}") from exc
    if header.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: format version {header.get('format_version')!r} "
            f"!= {CHECKPOINT_VERSION!r}"
        )
    payload = blob[sep + 1 :]
    if len(payload) != header["payload_bytes"]:
        raise CheckpointError(
            f"{path}: payload is {len(payload)} bytes, header says {header['payload_bytes']}"
        )
    digest = hashlib.sha256(payload).hexdigest()
    if digest != header["payload_sha256"]:
        raise CheckpointError(f"{path}: payload checksum mismatch")
    try:
        space = SearchSpace.from_json_dict(header["space"])
    except SpaceError as exc:
        raise CheckpointError(f"{path}: {exc}") from exc
    expected = [list(entry) for entry in _array_layout(space)]
    if header["arrays"] != expected:
        raise CheckpointError(f"{path}: array manifest does not match space descriptor")
    arrays = {}
    offset = 0
    for name, rows, cols in expected:
        nbytes = rows * cols * 8
        raw = payload[offset : offset + nbytes]
        arrays[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(rows, cols)
        offset += nbytes
    if offset != len(payload):
        raise CheckpointError(f"{path}: payload has {len(payload) - offset} trailing bytes")

    def dense(prefix: str) -> DenseParams:
        return DenseParams(arrays[f"{prefix}.W"].copy(), arrays[f"{prefix}.b"].reshape(-1).copy())

    blocks = []
    for b, block in enumerate(space.blocks):
        per_choice = []
        for c, choice in enumerate(block):
            per_choice.append(
                [
                    dense(f"block.{b}.{c}.{li}") if layer.kind == "dense" else None
                    for li, layer in enumerate(choice.layers)
                ]
            )
        blocks.append(per_choice)
    return Supernet(
        space=space,
        stem=dense("stem"),
        blocks=blocks,
        head=dense("head"),
        train_steps=int(header["train_steps"]),
        meta=dict(header.get("meta", {})),
    )
