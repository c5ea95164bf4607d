"""Cell search space, genotype codec, candidate networks, and the
training-free gradient-covariance score.

A cell is a DAG on n nodes where node j sums one operation per incoming
edge (i, j), i < j. Edges are ordered (0,1), (0,2), (1,2), (0,3), ... and
a genotype picks one of five operations per edge, giving 5^edges points
(15625 for the 4-node space, 125 for the reduced 3-node space used in
desk-scale studies).

Candidates are ranked without training: run a batch through the freshly
initialized network, take per-sample gradients of the summed logits with
respect to the inputs, and score the spectrum of their correlation matrix.
Flat-gradient candidates (for example the all-'none' genotype) are legal
and rank last via a -inf sentinel instead of raising.
"""

from dataclasses import dataclass

import numpy as np

from .engine import (
    Add,
    AvgPool,
    BatchNorm,
    Conv2D,
    Dense,
    GlobalAvgPool,
    Network,
    ReLU,
    Softmax,
    Zeroize,
)
from .errors import ConfigError, NumericalError

PRIMITIVES = ("none", "skip_connect", "conv_1x1", "conv_3x3", "avg_pool_3x3")

SCORE_EPS_DEFAULT = 1e-5
DEGENERATE_DIAG_TOL = 1e-12


@dataclass(frozen=True)
class CellSpace:
    """n_nodes includes the cell input node; edges = all (i, j), i < j."""

    n_nodes: int = 4

    @property
    def edges(self) -> tuple:
        return tuple(
            (i, j) for j in range(1, self.n_nodes) for i in range(j)
        )

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def size(self) -> int:
        return len(PRIMITIVES) ** self.n_edges


FULL_SPACE = CellSpace(n_nodes=4)
REDUCED_SPACE = CellSpace(n_nodes=3)


def encode(genotype, space: CellSpace = FULL_SPACE) -> int:
    """Base-5 positional code, edge 0 least significant."""
    genotype = tuple(genotype)
    if len(genotype) != space.n_edges:
        raise ConfigError(
            f"genotype length {len(genotype)} != {space.n_edges} edges"
        )
    idx = 0
    for pos, op in enumerate(genotype):
        if not 0 <= op < len(PRIMITIVES):
            raise ConfigError(f"operation index {op} outside 0..4")
        idx += op * len(PRIMITIVES) ** pos
    return idx


def decode(index: int, space: CellSpace = FULL_SPACE) -> tuple:
    if not 0 <= index < space.size:
        raise ConfigError(f"index {index} outside 0..{space.size - 1}")
    ops = []
    for _ in range(space.n_edges):
        index, op = divmod(index, len(PRIMITIVES))
        ops.append(op)
    return tuple(ops)


def sample_genotypes(n: int, seed: int, space: CellSpace = FULL_SPACE) -> list:
    """n distinct genotypes, uniform without replacement, in draw order."""
    if n > space.size:
        raise ConfigError(f"cannot draw {n} distinct genotypes from {space.size}")
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    picks = rng.permutation(space.size)[:n]
    return [decode(int(i), space) for i in picks]


@dataclass(frozen=True)
class MacroConfig:
    stem_channels: int = 8
    cells_per_stage: int = 1

    def validate(self) -> None:
        if self.stem_channels < 1 or self.cells_per_stage < 1:
            raise ConfigError("stem_channels and cells_per_stage must be >= 1")

    @property
    def feature_dim(self) -> int:
        return 4 * self.stem_channels


def _conv_bn(net, prefix, src, in_ch, out_ch, kernel, stride):
    """ReLU -> Conv -> BatchNorm, the composition used on cell conv edges."""
    r = net.add(f"{prefix}.relu", ReLU(), src)
    c = net.add(
        f"{prefix}.conv",
        Conv2D(in_ch, out_ch, kernel, stride=stride, padding="same"),
        r,
    )
    return net.add(f"{prefix}.bn", BatchNorm(out_ch), c)


def _edge_op(net, prefix, src, op_idx, ch):
    name = PRIMITIVES[op_idx]
    if name == "none":
        return net.add(f"{prefix}.none", Zeroize(), src)
    if name == "skip_connect":
        return src
    if name == "conv_1x1":
        return _conv_bn(net, f"{prefix}.c1", src, ch, ch, 1, 1)
    if name == "conv_3x3":
        return _conv_bn(net, f"{prefix}.c3", src, ch, ch, 3, 1)
    if name == "avg_pool_3x3":
        return net.add(
            f"{prefix}.pool", AvgPool(3, stride=1, padding="same"), src
        )
    raise ConfigError(f"unknown operation index {op_idx}")


def build_cell(net, prefix, src, genotype, ch, space: CellSpace):
    """One cell; every op maps ch -> ch at stride 1. Returns the last node."""
    genotype = tuple(genotype)
    if len(genotype) != space.n_edges:
        raise ConfigError("genotype does not match the cell space")
    node_names = [src]
    for j in range(1, space.n_nodes):
        summands = []
        for e, (i, jj) in enumerate(space.edges):
            if jj != j:
                continue
            summands.append(
                _edge_op(net, f"{prefix}.e{i}{j}", node_names[i], genotype[e], ch)
            )
        node_names.append(net.add(f"{prefix}.n{j}", Add(), summands))
    return node_names[-1]


def _reduction(net, prefix, src, in_ch, out_ch):
    """Stride-2 residual reduction doubling channels."""
    a = _conv_bn(net, f"{prefix}.a", src, in_ch, out_ch, 3, 2)
    b = _conv_bn(net, f"{prefix}.b", a, out_ch, out_ch, 3, 1)
    pool = net.add(
        f"{prefix}.short.pool", AvgPool(2, stride=2, padding="same"), src
    )
    proj = net.add(
        f"{prefix}.short.proj",
        Conv2D(in_ch, out_ch, 1, stride=1, padding="valid"),
        pool,
    )
    return net.add(f"{prefix}.add", Add(), [b, proj])


def build_backbone(
    net: Network,
    prefix: str,
    input_name: str,
    genotype,
    macro: MacroConfig,
    space: CellSpace = FULL_SPACE,
) -> str:
    """Stem -> 3 cell stages with 2 reductions -> GAP. Returns the feature
    node (dimension 4 * stem_channels)."""
    macro.validate()
    in_ch = net.shape_of(input_name)[0]
    C = macro.stem_channels
    stem = net.add(
        f"{prefix}.stem.conv", Conv2D(in_ch, C, 3, padding="same"), input_name
    )
    cur = net.add(f"{prefix}.stem.bn", BatchNorm(C), stem)
    ch = C
    for stage in range(3):
        if stage > 0:
            cur = _reduction(net, f"{prefix}.red{stage}", cur, ch, ch * 2)
            ch *= 2
        for ci in range(macro.cells_per_stage):
            cur = build_cell(
                net, f"{prefix}.s{stage}.cell{ci}", cur, genotype, ch, space
            )
    return net.add(f"{prefix}.gap", GlobalAvgPool(), cur)


def instantiate(
    genotype,
    macro: MacroConfig,
    input_shape,
    head: str = "classifier",
    n_classes: int | None = None,
    space: CellSpace = FULL_SPACE,
    input_name: str = "x",
) -> Network:
    """Standalone candidate network for one modality."""
    net = Network({input_name: tuple(input_shape)})
    feat = build_backbone(net, "bb", input_name, genotype, macro, space)
    if head == "features":
        net.set_output(feat)
        return net
    if head != "classifier":
        raise ConfigError(f"unknown head {head!r}")
    if n_classes is None or n_classes < 2:
        raise ConfigError("classifier head needs n_classes >= 2")
    fc = net.add("head.fc", Dense(macro.feature_dim, n_classes), feat)
    sm = net.add("head.softmax", Softmax(), fc)
    net.set_output(sm, logits=fc)
    return net


@dataclass(frozen=True)
class ScoreConfig:
    seed: int
    batch_size: int = 32
    eps: float = SCORE_EPS_DEFAULT

    def validate(self) -> None:
        if self.batch_size < 2:
            raise ConfigError("scoring batch must hold at least 2 samples")


@dataclass(frozen=True)
class ScoredCandidate:
    genotype: tuple
    index: int
    score: float
    seed: int
    batch_id: str = ""

    @property
    def degenerate(self) -> bool:
        return not np.isfinite(self.score)


def score_from_jacobian(J: np.ndarray, eps: float = SCORE_EPS_DEFAULT) -> float:
    """Spectrum score of the per-sample gradient correlation matrix.

    Rows are centered; C = J Jt; M = C normalized to unit diagonal;
    s = -sum(log(lam + eps) + 1/(lam + eps)) over eigenvalues of M.
    Rows with vanishing variance make the candidate degenerate (-inf).
    """
    J = np.asarray(J, dtype=np.float64)
    Jc = J - J.mean(axis=1, keepdims=True)
    C = Jc @ Jc.T
    d = np.diag(C)
    if np.any(d < DEGENERATE_DIAG_TOL):
        return float("-inf")
    M = C / np.sqrt(np.outer(d, d))
    M = 0.5 * (M + M.T)  # exact symmetry helps the eigensolver
    try:
        lam = np.linalg.eigvalsh(M)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"eigen-solver failed on score matrix: {e}") from e
    return float(-np.sum(np.log(lam + eps) + 1.0 / (lam + eps)))


def input_jacobian(net: Network, inputs: dict) -> np.ndarray:
    """Rows J_n = d(sum of logits over the batch) / d x_n, flattened.

    One forward (training-mode statistics) and one backward seeded with
    ones at the logits node.
    """
    ctx = net.forward(inputs, training=True)
    logits = net.logits(ctx)
    _, igrads = net.backward(ctx, np.ones_like(logits), at=net.logits_name)
    parts = [
        igrads[name].reshape(igrads[name].shape[0], -1)
        for name in sorted(igrads)
    ]
    return np.concatenate(parts, axis=1)


def naswot_score(net: Network, inputs: dict, cfg: ScoreConfig) -> float:
    """Training-free score for a freshly initialized candidate. Higher is
    better; -inf flags a degenerate (flat-gradient) candidate."""
    cfg.validate()
    J = input_jacobian(net, inputs)
    if J.shape[0] < 2:
        raise ConfigError("scoring needs at least 2 samples")
    return score_from_jacobian(J, cfg.eps)


def rank_candidates(scored: list, k: int) -> list:
    """Top-k by descending score; ties and degenerates resolve by ascending
    genotype index so rankings are reproducible."""
    if k > len(scored):
        raise ConfigError(f"k={k} exceeds {len(scored)} candidates")
    ordered = sorted(scored, key=lambda c: (-c.score, c.index))
    return ordered[:k]
