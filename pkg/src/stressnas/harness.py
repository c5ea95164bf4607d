"""Experiment orchestration: feature preparation, training with inner
validation, LOSO evaluation, and the per-fold search for the assembled
model.

Every stochastic step draws its seed from the master seed through a stable
hash of (purpose, fold, ...), so reruns reproduce results exactly and
folds can run in any order. The held-out subject never feeds training
batches, inner validation, or scoring batches; this is asserted on every
index set.
"""

import hashlib
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import featbank, io, models, nas
from .dataset import (
    SynthConfig,
    TaskMode,
    WindowConfig,
    load_dataset,
    loso_folds,
    segment_all,
    synth_dataset,
)
from .engine import TrainConfig, cross_entropy, sgd_step
from .engine.optim import init_velocity
from .errors import ConfigError, DataError, NumericalError

FAMILIES = ("MLP", "FCN", "RESNET", "STRESSNAS")


def derive_seed(master: int, *parts) -> int:
    """Stable 63-bit stream seed from the master seed and a purpose tag."""
    text = json.dumps([master, *[str(p) for p in parts]])
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "little") & (2**63 - 1)


# -- feature preparation ----------------------------------------------------


@dataclass
class FeatureSet:
    """Per-window branch tensors plus alignment metadata."""

    inputs: dict                 # branch -> (n, ...) float64
    labels: np.ndarray           # (n,)
    subjects: np.ndarray         # (n,)
    start_times: np.ndarray      # (n,)

    @property
    def n(self) -> int:
        return self.labels.size

    def branch_shapes(self) -> dict:
        return {b: a.shape[1:] for b, a in self.inputs.items()}


def extract_features(windows, fb_cfg: featbank.FilterBankConfig, branches) -> FeatureSet:
    """Filter-bank images (ACC stacked per axis) and the statistics vector
    for every window."""
    if not windows:
        raise DataError("no windows to extract features from")
    branches = models.parse_combination(branches)
    per_branch = {b: [] for b in branches}
    for w in windows:
        for b in branches:
            if b == "MIXED":
                per_branch[b].append(featbank.mixed_features(w.channels))
            elif b == "ACC":
                axes = [
                    featbank.compute_filterbank(
                        w.channels[ax][1], w.channels[ax][0], fb_cfg, ax
                    ).values
                    for ax in ("ACC_x", "ACC_y", "ACC_z")
                ]
                per_branch[b].append(np.stack(axes, axis=0))
            else:
                rate, x = w.channels[b]
                img = featbank.compute_filterbank(x, rate, fb_cfg, b).values
                per_branch[b].append(img[None, :, :])
    return FeatureSet(
        inputs={b: np.stack(v) for b, v in per_branch.items()},
        labels=np.array([w.class_label for w in windows], dtype=np.int64),
        subjects=np.array([w.subject_id for w in windows], dtype=np.int64),
        start_times=np.array([w.start_time_s for w in windows]),
    )


def model_inputs(feat: FeatureSet, family: str) -> dict:
    """Arrays keyed the way the family's network names its inputs."""
    if family.upper() == "MLP":
        flat = np.concatenate(
            [feat.inputs[b].reshape(feat.n, -1) for b in sorted(feat.inputs,
             key=models.BRANCH_ORDER.index)],
            axis=1,
        )
        return {"flat": flat}
    return dict(feat.inputs)


_FEATURE_TAGS = {"labels": "u8", "subjects": "i32le", "start_times": "f64le"}


def save_features(feat: FeatureSet, out_dir: str) -> None:
    """Persist per-window feature tensors in the binary+manifest format."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for b in sorted(feat.inputs):
        fname = f"feat_{b}.bin"
        io.write_array(os.path.join(out_dir, fname), feat.inputs[b], "f32le")
        entries.append(
            {"name": b, "file": fname, "dtype": "f32le",
             "shape": list(feat.inputs[b].shape)}
        )
    side = {}
    for name, tag in _FEATURE_TAGS.items():
        arr = getattr(feat, name)
        fname = f"{name}.bin"
        io.write_array(os.path.join(out_dir, fname), arr, tag)
        side[name] = {"file": fname, "dtype": tag, "shape": list(arr.shape)}
    io.write_manifest(
        os.path.join(out_dir, "features.json"),
        {"branches": entries, "arrays": side},
    )


def load_features(in_dir: str) -> FeatureSet:
    man = io.read_manifest(os.path.join(in_dir, "features.json"))
    inputs = {}
    for ent in man["branches"]:
        n = int(np.prod(ent["shape"]))
        flat = io.read_array(os.path.join(in_dir, ent["file"]), ent["dtype"], n)
        inputs[ent["name"]] = flat.reshape(ent["shape"]).astype(np.float64)
    side = {}
    for name, ent in man["arrays"].items():
        n = int(np.prod(ent["shape"]))
        side[name] = io.read_array(
            os.path.join(in_dir, ent["file"]), ent["dtype"], n
        )
    return FeatureSet(
        inputs=inputs,
        labels=side["labels"].astype(np.int64),
        subjects=side["subjects"].astype(np.int64),
        start_times=side["start_times"].astype(np.float64),
    )


def _take(inputs: dict, idx) -> dict:
    return {k: v[idx] for k, v in inputs.items()}


# -- training and evaluation -------------------------------------------------


def train(net, inputs: dict, labels, train_idx, val_idx, cfg: TrainConfig):
    """SGD with per-epoch seeded shuffles; restores the parameters from the
    epoch with the best inner-validation accuracy. Returns the history."""
    cfg.validate()
    if len(train_idx) == 0:
        raise ConfigError("empty training set")
    best = {"acc": -1.0, "snapshot": net.snapshot(), "epoch": -1}
    history = []
    velocity = init_velocity(net.params)
    for epoch in range(cfg.epochs):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, epoch]))
        order = np.asarray(train_idx)[rng.permutation(len(train_idx))]
        losses = []
        for s in range(0, len(order), cfg.batch_size):
            sel = order[s : s + cfg.batch_size]
            ctx = net.forward(_take(inputs, sel), training=True)
            logits = net.logits(ctx)
            loss, gl = cross_entropy(logits, labels[sel])
            if not np.isfinite(loss):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch}, step {s // cfg.batch_size}"
                )
            pgrads, _ = net.backward(ctx, gl, at=net.logits_name)
            sgd_step(net.params, pgrads, velocity, cfg, epoch)
            losses.append(loss)
        val_acc = (
            accuracy(net, inputs, labels, val_idx) if len(val_idx) else float("nan")
        )
        history.append(
            {"epoch": epoch, "loss": float(np.mean(losses)), "val_acc": val_acc}
        )
        if len(val_idx) and val_acc > best["acc"]:
            best = {"acc": val_acc, "snapshot": net.snapshot(), "epoch": epoch}
    if cfg.epochs > 0 and len(val_idx):
        net.set_flat(best["snapshot"])
    return {"history": history, "best_epoch": best["epoch"], "best_val_acc": best["acc"]}


def predict(net, inputs: dict, idx, batch: int = 256) -> np.ndarray:
    """Argmax class per sample; exact logit ties go to the lower index."""
    idx = np.asarray(idx)
    preds = np.empty(len(idx), dtype=np.int64)
    for s in range(0, len(idx), batch):
        sel = idx[s : s + batch]
        ctx = net.forward(_take(inputs, sel), training=False)
        preds[s : s + len(sel)] = np.argmax(net.logits(ctx), axis=1)
    return preds


def evaluate(net, inputs: dict, labels, idx, n_classes: int) -> np.ndarray:
    """Confusion matrix with rows = true class."""
    preds = predict(net, inputs, idx)
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (labels[np.asarray(idx)], preds), 1)
    return cm


def accuracy(net, inputs, labels, idx) -> float:
    preds = predict(net, inputs, idx)
    return float(np.mean(preds == labels[np.asarray(idx)]))


def subject_accuracy(cm: np.ndarray) -> float:
    total = cm.sum()
    if total == 0:
        raise ConfigError("empty confusion matrix")
    return float(np.trace(cm) / total)


def macro_recall(cm: np.ndarray) -> float:
    """Mean per-class recall over classes with nonzero support."""
    support = cm.sum(axis=1)
    if cm.sum() == 0:
        raise ConfigError("empty confusion matrix")
    mask = support > 0
    recalls = np.diag(cm)[mask] / support[mask]
    return float(recalls.mean())


# -- experiment configuration -------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    family: str = "STRESSNAS"
    task: TaskMode = TaskMode.THREE_STATE
    combination: tuple = ("EDA", "BVP", "TEMP", "MIXED")
    profile: str = "desk"
    master_seed: int = 0
    data_dir: str | None = None
    interp_nan: bool = False
    synth: SynthConfig | None = None
    window: WindowConfig = WindowConfig()
    fb: featbank.FilterBankConfig = featbank.FilterBankConfig()
    macro: nas.MacroConfig = nas.MacroConfig(stem_channels=8, cells_per_stage=1)
    space_nodes: int = 3
    search_n: int = 125
    top_k: int = 3
    score_batch: int = 32
    score_eps: float = nas.SCORE_EPS_DEFAULT
    epochs: int = 10
    batch_size: int = 64
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 5e-4
    inner_val_fraction: float = 0.1

    @property
    def space(self) -> nas.CellSpace:
        return nas.CellSpace(self.space_nodes)

    def validate(self) -> None:
        if self.family.upper() not in FAMILIES:
            raise ConfigError(f"family must be one of {FAMILIES}")
        models.parse_combination(self.combination)
        self.window.validate()
        self.fb.validate()
        self.macro.validate()
        if not 0 < self.inner_val_fraction < 1:
            raise ConfigError("inner_val_fraction must be in (0, 1)")
        if self.search_n > self.space.size:
            raise ConfigError(
                f"search_n={self.search_n} exceeds space size {self.space.size}"
            )
        if self.top_k > self.search_n:
            raise ConfigError("top_k cannot exceed search_n")
        if self.data_dir is None and self.synth is None:
            raise ConfigError("either data_dir or a synthetic config is required")

    @staticmethod
    def desk(**overrides) -> "ExperimentConfig":
        """Synthetic data, reduced space, small nets: minutes on a CPU.

        The window shift and frame shift are coarser than the full profile
        so the whole pipeline stays CPU-friendly; the feature recipe itself
        is unchanged.
        """
        base = dict(
            profile="desk",
            synth=SynthConfig(n_subjects=5, duration_s=300.0, block_len_s=100.0),
            window=WindowConfig(window_len_s=60.0, shift_s=2.0),
            fb=featbank.FilterBankConfig(frame_shift_s=4.0),
            space_nodes=3,
            search_n=125,
            top_k=3,
            epochs=12,
            batch_size=16,
            lr=0.03,
            macro=nas.MacroConfig(stem_channels=8, cells_per_stage=1),
        )
        base.update(overrides)
        return ExperimentConfig(**base)

    @staticmethod
    def full(**overrides) -> "ExperimentConfig":
        """Converted real dataset, full space and candidate count. This is
        the multi-GPU-hour reproduction profile; expect days on CPU."""
        base = dict(
            profile="full",
            window=WindowConfig(window_len_s=60.0, shift_s=0.25),
            space_nodes=4,
            search_n=10000,
            top_k=10,
            epochs=50,
            macro=nas.MacroConfig(stem_channels=16, cells_per_stage=5),
        )
        base.update(overrides)
        return ExperimentConfig(**base)

    def to_json(self) -> dict:
        d = {
            "family": self.family,
            "task": self.task.value,
            "combination": list(self.combination),
            "profile": self.profile,
            "master_seed": self.master_seed,
            "data_dir": self.data_dir,
            "interp_nan": self.interp_nan,
            "window": {
                "window_len_s": self.window.window_len_s,
                "shift_s": self.window.shift_s,
                "label_rule": self.window.label_rule,
            },
            "fb": {
                "pre_emphasis_alpha": self.fb.pre_emphasis_alpha,
                "frame_len_s": self.fb.frame_len_s,
                "frame_shift_s": self.fb.frame_shift_s,
                "nfft": self.fb.nfft,
                "n_filters": self.fb.n_filters,
                "mean_normalize": self.fb.mean_normalize,
            },
            "macro": {
                "stem_channels": self.macro.stem_channels,
                "cells_per_stage": self.macro.cells_per_stage,
            },
            "space_nodes": self.space_nodes,
            "search_n": self.search_n,
            "top_k": self.top_k,
            "score_batch": self.score_batch,
            "score_eps": self.score_eps,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "momentum": self.momentum,
            "weight_decay": self.weight_decay,
            "inner_val_fraction": self.inner_val_fraction,
        }
        if self.synth is not None:
            d["synth"] = {
                "n_subjects": self.synth.n_subjects,
                "duration_s": self.synth.duration_s,
                "block_len_s": self.synth.block_len_s,
                "seed": self.synth.seed,
            }
        return d

    @staticmethod
    def from_json(d: dict) -> "ExperimentConfig":
        kw = dict(d)
        if "task" in kw:
            kw["task"] = TaskMode(kw["task"])
        if "combination" in kw:
            kw["combination"] = models.parse_combination(kw["combination"])
        if "window" in kw:
            kw["window"] = WindowConfig(**kw["window"])
        if "fb" in kw:
            kw["fb"] = featbank.FilterBankConfig(**kw["fb"])
        if "macro" in kw:
            kw["macro"] = nas.MacroConfig(**kw["macro"])
        if "synth" in kw and kw["synth"] is not None:
            kw["synth"] = SynthConfig(**kw["synth"])
        try:
            return ExperimentConfig(**kw)
        except TypeError as e:
            raise ConfigError(f"bad experiment config: {e}") from e

    def config_hash(self) -> str:
        text = json.dumps(self.to_json(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:12]

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            seed=seed,
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            momentum=self.momentum,
            weight_decay=self.weight_decay,
        )


# -- results ------------------------------------------------------------------


@dataclass(frozen=True)
class FoldResult:
    held_out_subject: int
    confusion: np.ndarray
    accuracy: float
    macro_recall: float
    n_test: int
    chosen_rank: int | None = None


@dataclass
class ReportTable:
    rows: list
    mean_accuracy: float
    std_accuracy: float
    mean_macro_recall: float
    std_macro_recall: float
    metadata: dict = field(default_factory=dict)

    @staticmethod
    def from_rows(rows, metadata) -> "ReportTable":
        accs = np.array([r.accuracy for r in rows])
        macs = np.array([r.macro_recall for r in rows])
        return ReportTable(
            rows=list(rows),
            mean_accuracy=float(accs.mean()),
            std_accuracy=float(accs.std()),
            mean_macro_recall=float(macs.mean()),
            std_macro_recall=float(macs.std()),
            metadata=dict(metadata),
        )

    def to_json(self) -> dict:
        return {
            "rows": [
                {
                    "held_out_subject": r.held_out_subject,
                    "confusion": r.confusion.tolist(),
                    "accuracy": r.accuracy,
                    "macro_recall": r.macro_recall,
                    "n_test": r.n_test,
                    "chosen_rank": r.chosen_rank,
                }
                for r in self.rows
            ],
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "mean_macro_recall": self.mean_macro_recall,
            "std_macro_recall": self.std_macro_recall,
            "metadata": self.metadata,
        }

    @staticmethod
    def from_json(d: dict) -> "ReportTable":
        rows = [
            FoldResult(
                held_out_subject=r["held_out_subject"],
                confusion=np.array(r["confusion"], dtype=np.int64),
                accuracy=r["accuracy"],
                macro_recall=r["macro_recall"],
                n_test=r["n_test"],
                chosen_rank=r.get("chosen_rank"),
            )
            for r in d["rows"]
        ]
        return ReportTable(
            rows=rows,
            mean_accuracy=d["mean_accuracy"],
            std_accuracy=d["std_accuracy"],
            mean_macro_recall=d["mean_macro_recall"],
            std_macro_recall=d["std_macro_recall"],
            metadata=d.get("metadata", {}),
        )


# -- search -------------------------------------------------------------------


def score_candidates(
    images: np.ndarray,
    genotypes,
    macro: nas.MacroConfig,
    space: nas.CellSpace,
    n_classes: int,
    score_cfg: nas.ScoreConfig,
    batch_id: str = "",
) -> list:
    """Score every genotype on one shared batch drawn from the image pool."""
    score_cfg.validate()
    if images.shape[0] < 2:
        raise DataError("need at least 2 images to draw a scoring batch")
    rng = np.random.default_rng(np.random.SeedSequence([score_cfg.seed, 0xBA7C4]))
    n_batch = min(score_cfg.batch_size, images.shape[0])
    batch = images[rng.choice(images.shape[0], size=n_batch, replace=False)]
    scored = []
    for genotype in genotypes:
        idx = nas.encode(genotype, space)
        net = nas.instantiate(
            genotype,
            macro,
            images.shape[1:],
            head="classifier",
            n_classes=n_classes,
            space=space,
        )
        net.init_params(derive_seed(score_cfg.seed, "cand-init", idx))
        s = nas.naswot_score(net, {"x": batch}, score_cfg)
        scored.append(
            nas.ScoredCandidate(
                genotype=tuple(genotype), index=idx, score=s,
                seed=score_cfg.seed, batch_id=batch_id,
            )
        )
    return scored


def search_branch(
    pool_images: np.ndarray,
    cfg: ExperimentConfig,
    seed: int,
    batch_id: str,
) -> list:
    """Sample candidates, score them on the pool, return the ranked top-k."""
    space = cfg.space
    if cfg.search_n >= space.size:
        genotypes = [nas.decode(i, space) for i in range(space.size)]
    else:
        genotypes = nas.sample_genotypes(cfg.search_n, seed, space)
    score_cfg = nas.ScoreConfig(
        seed=seed, batch_size=cfg.score_batch, eps=cfg.score_eps
    )
    scored = score_candidates(
        pool_images, genotypes, cfg.macro, space,
        cfg.task.n_classes, score_cfg, batch_id,
    )
    return nas.rank_candidates(scored, cfg.top_k)


# -- LOSO ----------------------------------------------------------------------


def inner_val_split(subjects, pool_idx, fraction, seed):
    """Per-subject seeded split; every training subject keeps windows on
    both sides so no subject vanishes from training."""
    pool_idx = np.asarray(pool_idx)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x1A11]))
    val = []
    for sid in np.unique(subjects[pool_idx]):
        mine = pool_idx[subjects[pool_idx] == sid]
        n_val = max(1, int(round(fraction * len(mine)))) if len(mine) > 1 else 0
        val.extend(rng.permutation(mine)[:n_val].tolist())
    val = np.array(sorted(val), dtype=np.int64)
    train = np.setdiff1d(pool_idx, val)
    return train, val


def load_or_synth(cfg: ExperimentConfig):
    if cfg.data_dir is not None:
        return load_dataset(cfg.data_dir, interp_nan=cfg.interp_nan)
    return synth_dataset(cfg.synth)


def run_fold(cfg, feat, net_inputs, fold, log=None):
    held = fold.held_out_subject_id
    say = log or (lambda msg: None)
    test_idx = np.flatnonzero(feat.subjects == held)
    pool_idx = np.flatnonzero(feat.subjects != held)
    if len(test_idx) == 0 or len(pool_idx) == 0:
        raise DataError(f"fold {held}: empty train or test window set")
    train_idx, val_idx = inner_val_split(
        feat.subjects, pool_idx, cfg.inner_val_fraction,
        derive_seed(cfg.master_seed, "val-split", held),
    )
    # leakage guard: the held-out subject must not appear on any train side
    for name, idx in (("train", train_idx), ("inner-val", val_idx)):
        if np.any(feat.subjects[idx] == held):
            raise ConfigError(f"fold {held}: held-out windows leaked into {name}")

    fam = cfg.family.upper()
    n_classes = cfg.task.n_classes
    shapes = feat.branch_shapes()
    chosen_rank = None
    if fam == "STRESSNAS":
        fb_branches = [b for b in cfg.combination if b != "MIXED"]
        ranked = {}
        for b in fb_branches:
            ranked[b] = search_branch(
                feat.inputs[b][pool_idx],
                cfg,
                derive_seed(cfg.master_seed, "search", held, b),
                batch_id=f"fold{held}:{b}",
            )
            say(f"  fold {held}: search {b} best score "
                f"{ranked[b][0].score:.4f} (idx {ranked[b][0].index})")
        best = None
        for rank_i in range(cfg.top_k):
            genos = {b: ranked[b][rank_i].genotype for b in fb_branches}
            net = models.build_stressnas(
                shapes, genos, cfg.macro, n_classes, cfg.space
            )
            net.init_params(derive_seed(cfg.master_seed, "init", held, rank_i))
            tr = train(
                net, net_inputs, feat.labels, train_idx, val_idx,
                cfg.train_config(derive_seed(cfg.master_seed, "train", held, rank_i)),
            )
            say(f"  fold {held}: assembly rank {rank_i} val acc {tr['best_val_acc']:.3f}")
            if best is None or tr["best_val_acc"] > best[1]:
                best = (rank_i, tr["best_val_acc"], net, genos)
        chosen_rank, _, net, genos = best
        spec = models.ModelSpec(
            family=fam, n_classes=n_classes, branch_shapes=shapes,
            genotypes=genos, macro=cfg.macro, space_nodes=cfg.space_nodes,
        )
    else:
        if fam == "MLP":
            net = models.build_mlp(net_inputs["flat"].shape[1], n_classes)
            spec = models.ModelSpec(
                family=fam, n_classes=n_classes, branch_shapes=shapes,
                input_dim=net_inputs["flat"].shape[1],
            )
        elif fam in ("FCN", "RESNET"):
            fb_shapes = {b: shapes[b] for b in cfg.combination if b != "MIXED"}
            builder = models.build_fcn if fam == "FCN" else models.build_resnet
            net = builder(fb_shapes, n_classes)
            spec = models.ModelSpec(
                family=fam, n_classes=n_classes, branch_shapes=fb_shapes
            )
        else:
            raise ConfigError(f"unknown family {cfg.family!r}")
        net.init_params(derive_seed(cfg.master_seed, "init", held))
        train(
            net, net_inputs, feat.labels, train_idx, val_idx,
            cfg.train_config(derive_seed(cfg.master_seed, "train", held)),
        )
    cm = evaluate(net, net_inputs, feat.labels, test_idx, n_classes)
    row = FoldResult(
        held_out_subject=held,
        confusion=cm,
        accuracy=subject_accuracy(cm),
        macro_recall=macro_recall(cm),
        n_test=len(test_idx),
        chosen_rank=chosen_rank,
    )
    return row, net, spec


def prepare_data(cfg: ExperimentConfig, recordings=None):
    """Recordings -> windows -> features -> network input arrays."""
    recs = recordings if recordings is not None else load_or_synth(cfg)
    windows = segment_all(recs, cfg.window, cfg.task)
    if not windows:
        raise DataError("windowing produced no usable windows")
    feat = extract_features(windows, cfg.fb, cfg.combination)
    net_inputs = model_inputs(feat, cfg.family)
    return recs, feat, net_inputs


def run_loso(cfg: ExperimentConfig, recordings=None, log=None) -> ReportTable:
    """Full protocol: one fold per subject, summary over subjects."""
    cfg.validate()
    say = log or (lambda msg: None)
    recs, feat, net_inputs = prepare_data(cfg, recordings)
    folds = loso_folds(sorted({r.subject_id for r in recs}))
    say(f"{feat.n} windows, {len(folds)} folds, family {cfg.family}")
    rows = []
    for fold in folds:
        t0 = time.time()
        try:
            row, _, _ = run_fold(cfg, feat, net_inputs, fold, log=say)
        except (ConfigError, DataError, NumericalError) as e:
            raise type(e)(
                f"fold {fold.held_out_subject_id} failed: {e}"
            ) from e
        say(
            f"fold {fold.held_out_subject_id}: acc {row.accuracy:.3f} "
            f"macro {row.macro_recall:.3f} ({time.time() - t0:.1f}s)"
        )
        rows.append(row)
    metadata = {
        "config_hash": cfg.config_hash(),
        "master_seed": cfg.master_seed,
        "family": cfg.family,
        "task": cfg.task.value,
        "combination": "+".join(cfg.combination),
        "profile": cfg.profile,
        "n_windows": feat.n,
        "class_names": list(cfg.task.class_names),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    return ReportTable.from_rows(rows, metadata)
