"""Builders for the hand-designed networks and the multimodal searched
assembly.

Branch naming is fixed: ACC, EDA, BVP, TEMP carry 2D filter-bank images
(ACC as a 3-channel stack of its axes), MIXED carries the 36-entry
statistics vector. Classification heads end in Softmax; the node before it
provides logits for the loss.
"""

from dataclasses import dataclass

from . import nas
from .engine import (
    Add,
    BatchNorm,
    Concat,
    Conv2D,
    Dense,
    GlobalAvgPool,
    Network,
    ReLU,
    Softmax,
)
from .errors import ConfigError

BRANCH_ORDER = ("ACC", "EDA", "BVP", "TEMP", "MIXED")
FB_BRANCHES = ("ACC", "EDA", "BVP", "TEMP")

MLP_HIDDEN = (256, 128)
CONV_CHANNELS = (8, 16, 32)
MIXED_HIDDEN = 32


def parse_combination(spec) -> tuple:
    """Normalize 'EDA+BVP+TEMP+MIXED' or an iterable into canonical order."""
    if isinstance(spec, str):
        parts = [p.strip() for p in spec.replace(",", "+").split("+") if p.strip()]
    else:
        parts = list(spec)
    unknown = [p for p in parts if p not in BRANCH_ORDER]
    if unknown:
        raise ConfigError(f"unknown branches {unknown}; valid: {BRANCH_ORDER}")
    if not parts:
        raise ConfigError("sensor combination must not be empty")
    if len(set(parts)) != len(parts):
        raise ConfigError("duplicate branches in combination")
    return tuple(b for b in BRANCH_ORDER if b in parts)


def _classifier_head(net: Network, src: str, in_dim: int, n_classes: int):
    fc = net.add("head.fc", Dense(in_dim, n_classes), src)
    sm = net.add("head.softmax", Softmax(), fc)
    net.set_output(sm, logits=fc)
    return net


def build_mlp(input_dim: int, n_classes: int, hidden=MLP_HIDDEN) -> Network:
    """Three fully connected layers, ReLU between, Softmax on top. Takes
    the flattened concatenation of the selected branch features."""
    net = Network({"flat": (input_dim,)})
    cur, d = "flat", input_dim
    for i, h in enumerate(hidden):
        cur = net.add(f"fc{i}", Dense(d, h), cur)
        cur = net.add(f"relu{i}", ReLU(), cur)
        d = h
    return _classifier_head(net, cur, d, n_classes)


def build_fcn(branch_shapes: dict, n_classes: int) -> Network:
    """Per-branch 3x(3x3 conv + ReLU) then GAP; features concatenated into
    a linear classifier."""
    _check_fb_branches(branch_shapes)
    net = Network({b: tuple(s) for b, s in branch_shapes.items()})
    feats = []
    for b in _ordered(branch_shapes):
        ch = branch_shapes[b][0]
        cur = b
        for i, out_ch in enumerate(CONV_CHANNELS):
            cur = net.add(f"{b}.conv{i}", Conv2D(ch, out_ch, 3, padding="same"), cur)
            cur = net.add(f"{b}.relu{i}", ReLU(), cur)
            ch = out_ch
        feats.append(net.add(f"{b}.gap", GlobalAvgPool(), cur))
    merged = _merge(net, feats)
    return _classifier_head(net, merged, CONV_CHANNELS[-1] * len(feats), n_classes)


def residual_block(net: Network, prefix: str, src: str, in_ch: int, out_ch: int):
    """Four conv-BN-ReLU layers with the skip joined before the last ReLU;
    a 1x1 projection aligns channels when they change."""
    cur, ch = src, in_ch
    for i in range(4):
        cur = net.add(f"{prefix}.conv{i}", Conv2D(ch, out_ch, 3, padding="same"), cur)
        cur = net.add(f"{prefix}.bn{i}", BatchNorm(out_ch), cur)
        if i < 3:
            cur = net.add(f"{prefix}.relu{i}", ReLU(), cur)
        ch = out_ch
    skip = src
    if in_ch != out_ch:
        skip = net.add(
            f"{prefix}.proj", Conv2D(in_ch, out_ch, 1, padding="valid"), src
        )
    joined = net.add(f"{prefix}.add", Add(), [cur, skip])
    return net.add(f"{prefix}.relu_out", ReLU(), joined)


def build_resnet(branch_shapes: dict, n_classes: int) -> Network:
    """Per-branch stack of three residual blocks then GAP, concatenated
    into a linear classifier."""
    _check_fb_branches(branch_shapes)
    net = Network({b: tuple(s) for b, s in branch_shapes.items()})
    feats = []
    for b in _ordered(branch_shapes):
        cur, ch = b, branch_shapes[b][0]
        for i, out_ch in enumerate(CONV_CHANNELS):
            cur = residual_block(net, f"{b}.block{i}", cur, ch, out_ch)
            ch = out_ch
        feats.append(net.add(f"{b}.gap", GlobalAvgPool(), cur))
    merged = _merge(net, feats)
    return _classifier_head(net, merged, CONV_CHANNELS[-1] * len(feats), n_classes)


def build_mixed_branch(net: Network, input_name: str, in_dim: int) -> str:
    """Fixed small MLP for the statistics vector (not searched: the cell
    space is 2D convolutional and this input is a flat vector)."""
    fc1 = net.add("MIXED.fc1", Dense(in_dim, MIXED_HIDDEN), input_name)
    r1 = net.add("MIXED.relu1", ReLU(), fc1)
    fc2 = net.add("MIXED.fc2", Dense(MIXED_HIDDEN, MIXED_HIDDEN), r1)
    return net.add("MIXED.relu2", ReLU(), fc2)


def build_stressnas(
    branch_shapes: dict,
    genotypes: dict,
    macro: nas.MacroConfig,
    n_classes: int,
    space: nas.CellSpace = nas.FULL_SPACE,
) -> Network:
    """Searched backbone per filter-bank branch plus the fixed MIXED MLP,
    features concatenated into a linear classifier.

    branch_shapes maps branch -> input shape, including MIXED -> (36,) when
    present; genotypes maps every filter-bank branch to its cell genotype.
    """
    net = Network({b: tuple(s) for b, s in branch_shapes.items()})
    feats, dims = [], []
    for b in _ordered(branch_shapes):
        if b == "MIXED":
            feats.append(build_mixed_branch(net, b, branch_shapes[b][0]))
            dims.append(MIXED_HIDDEN)
            continue
        if b not in genotypes:
            raise ConfigError(f"no genotype supplied for branch {b}")
        feats.append(
            nas.build_backbone(net, b, b, genotypes[b], macro, space)
        )
        dims.append(macro.feature_dim)
    merged = _merge(net, feats)
    return _classifier_head(net, merged, sum(dims), n_classes)


def _ordered(branch_shapes: dict) -> list:
    bad = [b for b in branch_shapes if b not in BRANCH_ORDER]
    if bad:
        raise ConfigError(f"unknown branches {bad}")
    return [b for b in BRANCH_ORDER if b in branch_shapes]


def _check_fb_branches(branch_shapes: dict) -> None:
    if not branch_shapes:
        raise ConfigError("at least one branch required")
    for b, s in branch_shapes.items():
        if b not in FB_BRANCHES:
            raise ConfigError(f"{b} is not a filter-bank branch")
        if len(s) != 3:
            raise ConfigError(f"branch {b} expects (C, H, W), got {s}")


def _merge(net: Network, feats: list) -> str:
    if len(feats) == 1:
        return feats[0]
    return net.add("concat", Concat(), feats)


def mlp_param_count(input_dim: int, n_classes: int, hidden=MLP_HIDDEN) -> int:
    dims = (input_dim, *hidden, n_classes)
    return sum(a * b + b for a, b in zip(dims[:-1], dims[1:]))


@dataclass(frozen=True)
class ModelSpec:
    """Serializable description sufficient to rebuild a network."""

    family: str
    n_classes: int
    branch_shapes: dict
    input_dim: int | None = None          # MLP only
    genotypes: dict | None = None         # STRESSNAS only
    macro: nas.MacroConfig | None = None
    space_nodes: int = 4

    def build(self) -> Network:
        fam = self.family.upper()
        if fam == "MLP":
            return build_mlp(self.input_dim, self.n_classes)
        if fam == "FCN":
            return build_fcn(self.branch_shapes, self.n_classes)
        if fam == "RESNET":
            return build_resnet(self.branch_shapes, self.n_classes)
        if fam == "STRESSNAS":
            return build_stressnas(
                self.branch_shapes,
                {b: tuple(g) for b, g in self.genotypes.items()},
                self.macro,
                self.n_classes,
                nas.CellSpace(self.space_nodes),
            )
        raise ConfigError(f"unknown model family {self.family!r}")

    def to_json(self) -> dict:
        out = {
            "family": self.family,
            "n_classes": self.n_classes,
            "branch_shapes": {b: list(s) for b, s in self.branch_shapes.items()},
            "space_nodes": self.space_nodes,
        }
        if self.input_dim is not None:
            out["input_dim"] = self.input_dim
        if self.genotypes is not None:
            out["genotypes"] = {b: list(g) for b, g in self.genotypes.items()}
        if self.macro is not None:
            out["macro"] = {
                "stem_channels": self.macro.stem_channels,
                "cells_per_stage": self.macro.cells_per_stage,
            }
        return out

    @staticmethod
    def from_json(d: dict) -> "ModelSpec":
        macro = None
        if "macro" in d:
            macro = nas.MacroConfig(**d["macro"])
        return ModelSpec(
            family=d["family"],
            n_classes=d["n_classes"],
            branch_shapes={b: tuple(s) for b, s in d["branch_shapes"].items()},
            input_dim=d.get("input_dim"),
            genotypes={b: tuple(g) for b, g in d.get("genotypes", {}).items()}
            if "genotypes" in d
            else None,
            macro=macro,
            space_nodes=d.get("space_nodes", 4),
        )
