"""Command-line interface.

Subcommands: synth, features, search, train, loso, report. Exit codes:
0 success, 1 configuration error, 2 data error, 3 numerical failure.
"""

import argparse
import json
import os
import sys

from . import harness, io, models, nas, report
from .dataset import SynthConfig, TaskMode, WindowConfig, synth_dataset, write_recording
from .errors import ConfigError, DataError, NumericalError


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; remap onto the config-error path
    def error(self, message):
        raise ConfigError(message)


def _base_config(args) -> harness.ExperimentConfig:
    overrides = {}
    if getattr(args, "config", None):
        with open(args.config) as f:
            overrides.update(json.load(f))
    for key in ("family", "task", "combination", "data_dir", "master_seed",
                "search_n", "top_k", "epochs"):
        v = getattr(args, key, None)
        if v is not None:
            overrides[key] = v
    if getattr(args, "interp_nan", False):
        overrides["interp_nan"] = True
    profile = overrides.pop("profile", None) or getattr(args, "profile", "desk")
    if profile == "desk":
        cfg = harness.ExperimentConfig.desk()
    elif profile == "full":
        cfg = harness.ExperimentConfig.full()
    else:
        raise ConfigError(f"unknown profile {profile!r}")
    merged = cfg.to_json()
    merged.update(overrides)
    merged["profile"] = profile
    if merged.get("data_dir"):
        merged.pop("synth", None)
    return harness.ExperimentConfig.from_json(merged)


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        n_subjects=args.subjects,
        duration_s=args.duration,
        block_len_s=args.block,
        seed=args.seed,
    )
    recs = synth_dataset(cfg)
    for rec in recs:
        write_recording(rec, os.path.join(args.out, f"S{rec.subject_id}"))
    print(f"wrote {len(recs)} synthetic subjects to {args.out}")
    return 0


def cmd_features(args) -> int:
    cfg = _base_config(args)
    _, feat, _ = harness.prepare_data(cfg)
    harness.save_features(feat, args.out)
    report.plot_feature_preview(feat, os.path.join(args.out, "features_preview.png"))
    print(f"{feat.n} windows -> {args.out}")
    for b, a in sorted(feat.inputs.items()):
        print(f"  {b}: shape {a.shape}")
    return 0


def cmd_search(args) -> int:
    cfg = _base_config(args)
    branch = args.modality.upper()
    if branch not in models.FB_BRANCHES:
        raise ConfigError(f"modality must be one of {models.FB_BRANCHES}")
    cfg = harness.ExperimentConfig.from_json(
        {**cfg.to_json(), "combination": [branch]}
    )
    _, feat, _ = harness.prepare_data(cfg)
    space = cfg.space
    n = args.n if args.n is not None else cfg.search_n
    if n >= space.size:
        genotypes = [nas.decode(i, space) for i in range(space.size)]
    else:
        genotypes = nas.sample_genotypes(n, cfg.master_seed, space)
    score_cfg = nas.ScoreConfig(
        seed=harness.derive_seed(cfg.master_seed, "cli-search", branch),
        batch_size=cfg.score_batch,
        eps=cfg.score_eps,
    )
    scored = harness.score_candidates(
        feat.inputs[branch], genotypes, cfg.macro, space,
        cfg.task.n_classes, score_cfg, batch_id=f"cli:{branch}",
    )
    ranked = nas.rank_candidates(scored, len(scored))
    if args.out.endswith(".csv"):
        out_dir = os.path.dirname(args.out) or "."
        os.makedirs(out_dir, exist_ok=True)
        report.write_scores_csv(ranked, args.out)
        report.plot_score_distribution(
            scored, os.path.join(out_dir, "score_distribution.png")
        )
    else:
        report.emit_search_report(scored, ranked, args.out)
    k = min(args.k, len(ranked))
    print(f"scored {len(scored)} candidates on {branch}; top {k}:")
    for c in ranked[:k]:
        print(f"  idx {c.index:6d} score {c.score:.6g}")
    return 0


def cmd_train(args) -> int:
    cfg = _base_config(args)
    recs, feat, net_inputs = harness.prepare_data(cfg)
    subjects = sorted({r.subject_id for r in recs})
    if args.holdout not in subjects:
        raise ConfigError(f"holdout {args.holdout} not among subjects {subjects}")
    fold = next(
        f for f in harness.loso_folds(subjects)
        if f.held_out_subject_id == args.holdout
    )
    row, net, spec = harness.run_fold(cfg, feat, net_inputs, fold, log=print)
    os.makedirs(args.out, exist_ok=True)
    io.save_tensors(os.path.join(args.out, "checkpoint"), net.get_flat())
    with open(os.path.join(args.out, "model_spec.json"), "w") as f:
        json.dump(spec.to_json(), f, indent=2, sort_keys=True)
        f.write("\n")
    metrics = {
        "held_out_subject": row.held_out_subject,
        "accuracy": row.accuracy,
        "macro_recall": row.macro_recall,
        "n_test": row.n_test,
        "chosen_rank": row.chosen_rank,
        "confusion": row.confusion.tolist(),
        "config_hash": cfg.config_hash(),
    }
    with open(os.path.join(args.out, "metrics.json"), "w") as f:
        json.dump(metrics, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"holdout {row.held_out_subject}: accuracy {row.accuracy:.4f}, "
          f"macro recall {row.macro_recall:.4f}")
    return 0


def cmd_loso(args) -> int:
    cfg = _base_config(args)
    table = harness.run_loso(cfg, log=print)
    written = report.emit_report(table, args.out)
    print(f"mean accuracy {table.mean_accuracy:.4f} ± {table.std_accuracy:.4f}")
    for name, path in sorted(written.items()):
        print(f"  {name}: {path}")
    return 0


def cmd_report(args) -> int:
    table = report.read_results_json(args.results)
    formats = tuple(f.strip() for f in args.format.split(",") if f.strip())
    written = report.emit_report(table, args.out, formats=formats)
    for name, path in sorted(written.items()):
        print(f"  {name}: {path}")
    return 0


def _add_experiment_flags(p, with_family=True):
    p.add_argument("--config", help="JSON file with experiment config fields")
    p.add_argument("--profile", choices=("desk", "full"), default="desk")
    p.add_argument("--data", dest="data_dir", help="converted dataset directory")
    p.add_argument("--interp-nan", dest="interp_nan", action="store_true",
                   help="linearly interpolate interior NaNs instead of failing")
    if with_family:
        p.add_argument("--family", choices=harness.FAMILIES)
    p.add_argument("--task", choices=tuple(t.value for t in TaskMode))
    p.add_argument("--combination", help="branches, e.g. EDA+BVP+TEMP+MIXED")
    p.add_argument("--seed", dest="master_seed", type=int)
    p.add_argument("--search-n", dest="search_n", type=int)
    p.add_argument("--top-k", dest="top_k", type=int)
    p.add_argument("--epochs", type=int)


def build_parser() -> _Parser:
    parser = _Parser(prog="stressnas", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--subjects", type=int, default=5)
    p.add_argument("--duration", type=float, default=300.0)
    p.add_argument("--block", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", help="extract per-window feature tensors")
    _add_experiment_flags(p, with_family=False)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("search", help="score and rank cell genotypes")
    _add_experiment_flags(p, with_family=False)
    p.add_argument("--modality", required=True, help="ACC, EDA, BVP, or TEMP")
    p.add_argument("--n", type=int, help="candidates to draw")
    p.add_argument("--k", type=int, default=10, help="top entries to echo")
    p.add_argument("--out", required=True, help="scores.csv path or directory")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("train", help="train and evaluate a single fold")
    _add_experiment_flags(p)
    p.add_argument("--holdout", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("loso", help="leave-one-subject-out evaluation")
    _add_experiment_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_loso)

    p = sub.add_parser("report", help="re-emit tables and figures")
    p.add_argument("--results", required=True, help="results.json path")
    p.add_argument("--format", default="csv,markdown")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
