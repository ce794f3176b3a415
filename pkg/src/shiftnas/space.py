"""Discrete architecture search space: choice catalog, genomes, genetic ops.

A genome is a tuple of per-block choice indices. Each block offers the same
four choices (identity, wide relu, bottleneck relu, wide tanh) so the space
size is choices^blocks. FLOPs follow the multiply-accumulate convention:
2 x weight-matrix element count along the selected path, biases excluded.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SpaceError
from .nncore import LayerSpec

Genome = tuple[int, ...]
ArchGenome = Genome

ENUMERATION_CAP = 1_000_000


@dataclass(frozen=True)
class ChoiceSpec:
    """One selectable sub-module: a shape-consistent chain of layers."""

    name: str
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        if not self.layers:
            raise SpaceError(f"choice {self.name!r} has no layers")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise SpaceError(
                    f"choice {self.name!r} chain breaks: {a.out_dim} -> {b.in_dim}"
                )
        if self.layers[0].in_dim != self.layers[-1].out_dim:
            raise SpaceError(
                f"choice {self.name!r} must preserve width "
                f"({self.layers[0].in_dim} != {self.layers[-1].out_dim})"
            )

    @property
    def weight_elements(self) -> int:
        return sum(layer.weight_elements for layer in self.layers)


@dataclass(frozen=True)
class SearchSpace:
    """Block/choice catalog plus dims, optional FLOPs budget and cost table."""

    input_dim: int
    hidden_dim: int
    num_classes: int
    blocks: tuple[tuple[ChoiceSpec, ...], ...]
    flops_budget: int | None = None
    cost_table: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        if self.input_dim < 1 or self.hidden_dim < 1 or self.num_classes < 2:
            raise SpaceError(
                f"bad dims input={self.input_dim} hidden={self.hidden_dim} "
                f"classes={self.num_classes}"
            )
        if not self.blocks or any(len(b) == 0 for b in self.blocks):
            raise SpaceError("every block needs at least one choice")
        for bi, block in enumerate(self.blocks):
            for choice in block:
                if choice.layers[0].in_dim != self.hidden_dim:
                    raise SpaceError(
                        f"block {bi} choice {choice.name!r} width "
                        f"{choice.layers[0].in_dim} != hidden_dim {self.hidden_dim}"
                    )
        if self.cost_table is not None:
            if len(self.cost_table) != len(self.blocks) or any(
                len(row) != len(block)
                for row, block in zip(self.cost_table, self.blocks)
            ):
                raise SpaceError("cost_table shape does not match blocks")
        if self.flops_budget is not None:
            cheapest = tuple(
                min(range(len(block)), key=lambda c: block[c].weight_elements)
                for block in self.blocks
            )
            if self.flops(cheapest) > self.flops_budget:
                raise SpaceError(
                    f"flops_budget {self.flops_budget} admits no genome "
                    f"(minimum is {self.flops(cheapest)})"
                )

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    @property
    def size(self) -> int:
        return math.prod(len(block) for block in self.blocks)

    def validate_genome(self, g: Genome) -> None:
        if len(g) != self.num_blocks:
            raise SpaceError(
                f"genome length {len(g)} != {self.num_blocks} blocks"
            )
        for b, c in enumerate(g):
            if not 0 <= c < len(self.blocks[b]):
                raise SpaceError(f"genome[{b}]={c} out of range for block {b}")

    def choice(self, block: int, idx: int) -> ChoiceSpec:
        return self.blocks[block][idx]

    def flops(self, g: Genome) -> int:
        """2 x weight elements along the path, stem and head included."""
        self.validate_genome(g)
        elements = self.input_dim * self.hidden_dim
        elements += self.hidden_dim * self.num_classes
        for b, c in enumerate(g):
            elements += self.blocks[b][c].weight_elements
        return 2 * elements

    def cost(self, g: Genome) -> float:
        """Search cost of a genome: user cost table if present, else FLOPs."""
        if self.cost_table is None:
            return float(self.flops(g))
        self.validate_genome(g)
        return float(sum(self.cost_table[b][c] for b, c in enumerate(g)))

    def to_json_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_dim": self.hidden_dim,
            "num_classes": self.num_classes,
            "flops_budget": self.flops_budget,
            "cost_table": None
            if self.cost_table is None
            else [list(row) for row in self.cost_table],
            "blocks": [
                [
                    {
                        "name": choice.name,
                        "layers": [
                            {
                                "kind": layer.kind,
                                "in_dim": layer.in_dim,
                                "out_dim": layer.out_dim,
                                "activation": layer.activation,
                            }
                            for layer in choice.layers
                        ],
                    }
                    for choice in block
                ]
                for block in self.blocks
            ],
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "SearchSpace":
        try:
            blocks = tuple(
                tuple(
                    ChoiceSpec(
                        name=choice["name"],
                        layers=tuple(
                            LayerSpec(
                                kind=layer["kind"],
                                in_dim=layer["in_dim"],
                                out_dim=layer["out_dim"],
                                activation=layer["activation"],
                            )
                            for layer in choice["layers"]
                        ),
                    )
                    for choice in block
                )
                for block in doc["blocks"]
            )
            cost_table = doc.get("cost_table")
            return SearchSpace(
                input_dim=doc["input_dim"],
                hidden_dim=doc["hidden_dim"],
                num_classes=doc["num_classes"],
                blocks=blocks,
                flops_budget=doc.get("flops_budget"),
                cost_table=None
                if cost_table is None
                else tuple(tuple(float(v) for v in row) for row in cost_table),
            )
        except (KeyError, TypeError) as exc:
            raise SpaceError(f"malformed space descriptor: {exc}") from exc


def format_genome(g: Genome) -> str:
    """Render a genome as dash-joined indices, e.g. '1-2-0-3'."""
    return "-".join(str(c) for c in g)


def parse_genome(text: str) -> Genome:
    try:
        return tuple(int(tok) for tok in text.strip().split("-"))
    except ValueError as exc:
        raise SpaceError(f"cannot parse genome {text!r}") from exc


def block_choices(hidden_dim: int) -> tuple[ChoiceSpec, ...]:
    """The per-block choice catalog used by all presets."""
    h = hidden_dim
    half = max(1, h // 2)
    return (
        ChoiceSpec("identity", (LayerSpec("identity", h, h),)),
        ChoiceSpec("dense_relu", (LayerSpec("dense", h, h, "relu"),)),
        ChoiceSpec(
            "bottleneck_relu",
            (LayerSpec("dense", h, half, "relu"), LayerSpec("dense", half, h, "none")),
        ),
        ChoiceSpec("dense_tanh", (LayerSpec("dense", h, h, "tanh"),)),
    )


def build_space(
    num_blocks: int,
    input_dim: int,
    hidden_dim: int,
    num_classes: int,
    flops_budget: int | None = None,
    cost_table=None,
) -> SearchSpace:
    """Assemble a space with `num_blocks` copies of the standard catalog."""
    if num_blocks < 1:
        raise SpaceError("need at least one block")
    catalog = block_choices(hidden_dim)
    return SearchSpace(
        input_dim=input_dim,
        hidden_dim=hidden_dim,
        num_classes=num_classes,
        blocks=tuple(catalog for _ in range(num_blocks)),
        flops_budget=flops_budget,
        cost_table=None
        if cost_table is None
        else tuple(tuple(float(v) for v in row) for row in cost_table),
    )


_PRESETS = {
    # name -> (blocks, input_dim, hidden_dim, num_classes)
    "tiny": (4, 16, 16, 4),
    "standard": (8, 16, 16, 10),
}


def default_space(
    preset: str,
    *,
    input_dim: int | None = None,
    hidden_dim: int | None = None,
    num_classes: int | None = None,
    flops_budget: int | None = None,
) -> SearchSpace:
    """Build a preset space; dims may be overridden for a specific dataset."""
    if preset not in _PRESETS:
        raise SpaceError(f"unknown preset {preset!r}; choose from {sorted(_PRESETS)}")
    blocks, d, h, k = _PRESETS[preset]
    return build_space(
        num_blocks=blocks,
        input_dim=d if input_dim is None else input_dim,
        hidden_dim=h if hidden_dim is None else hidden_dim,
        num_classes=k if num_classes is None else num_classes,
        flops_budget=flops_budget,
    )


def sample_uniform(space: SearchSpace, rng: np.random.Generator) -> Genome:
    """Draw each block's choice independently and uniformly."""
    return tuple(int(rng.integers(len(block))) for block in space.blocks)


def mutate(
    g: Genome, per_block_prob: float, rng: np.random.Generator, space: SearchSpace
) -> Genome:
    """Resample each position (to a *different* choice) with the given prob.

    Blocks with a single choice never change. The draw order is fixed so a
    seeded rng replays exactly.
    """
    if not 0.0 <= per_block_prob <= 1.0:
        raise SpaceError(f"mutation prob {per_block_prob} outside [0, 1]")
    space.validate_genome(g)
    out = list(g)
    for b in range(space.num_blocks):
        n = len(space.blocks[b])
        if rng.random() < per_block_prob and n > 1:
            shift = int(rng.integers(1, n))
            out[b] = (g[b] + shift) % n
    return tuple(out)


def crossover(a: Genome, b: Genome, rng: np.random.Generator) -> Genome:
    """Uniform crossover: each position copied from either parent, p=1/2."""
    if len(a) != len(b):
        raise SpaceError(f"parent lengths differ: {len(a)} vs {len(b)}")
    picks = rng.random(len(a)) < 0.5
    return tuple(a[i] if picks[i] else b[i] for i in range(len(a)))


def enumerate_genomes(space: SearchSpace, cap: int = ENUMERATION_CAP) -> list[Genome]:
    """All genomes in lexicographic order; refuses spaces larger than `cap`."""
    if space.size > cap:
        raise SpaceError(f"space size {space.size} exceeds enumeration cap {cap}")
    sizes = [len(block) for block in space.blocks]
    out: list[Genome] = []
    genome = [0] * len(sizes)
    while True:
        out.append(tuple(genome))
        for b in range(len(sizes) - 1, -1, -1):
            genome[b] += 1
            if genome[b] < sizes[b]:
                break
            genome[b] = 0
        else:
            return out
