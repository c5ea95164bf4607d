"""Result tables and figures.

Every report path writes delimited output (CSV) and, where a grid is
involved, a markdown table; figures are rendered to PNG files next to the
tables. Timestamps live only in the JSON metadata sidecar so the CSV and
markdown stay byte-identical across reruns with the same seed.
"""

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

import numpy as np

from .errors import ConfigError
from .harness import ReportTable

FOLD_COLUMNS = (
    "held_out_subject",
    "accuracy",
    "macro_recall",
    "n_test",
    "chosen_rank",
)


def write_results_json(table: ReportTable, path: str) -> None:
    with open(path, "w") as f:
        json.dump(table.to_json(), f, indent=2, sort_keys=True)
        f.write("\n")


def read_results_json(path: str) -> ReportTable:
    with open(path) as f:
        return ReportTable.from_json(json.load(f))


def write_fold_csv(table: ReportTable, path: str) -> None:
    """Per-fold rows plus one summary row (subject column = 'summary')."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(FOLD_COLUMNS)
        for r in table.rows:
            w.writerow(
                [
                    r.held_out_subject,
                    f"{r.accuracy:.6f}",
                    f"{r.macro_recall:.6f}",
                    r.n_test,
                    "" if r.chosen_rank is None else r.chosen_rank,
                ]
            )
        w.writerow(
            [
                "summary",
                f"{table.mean_accuracy:.6f}",
                f"{table.mean_macro_recall:.6f}",
                sum(r.n_test for r in table.rows),
                "",
            ]
        )


def write_fold_markdown(table: ReportTable, path: str) -> None:
    meta = table.metadata
    lines = [
        f"# LOSO report: {meta.get('family', '?')} on "
        f"{meta.get('combination', '?')} ({meta.get('task', '?')})",
        "",
        f"- config hash: `{meta.get('config_hash', '?')}`",
        f"- master seed: {meta.get('master_seed', '?')}",
        f"- profile: {meta.get('profile', '?')}, windows: {meta.get('n_windows', '?')}",
        "",
        "| held-out subject | accuracy | macro recall | test windows | chosen rank |",
        "|---|---|---|---|---|",
    ]
    for r in table.rows:
        rank = "-" if r.chosen_rank is None else str(r.chosen_rank)
        lines.append(
            f"| {r.held_out_subject} | {r.accuracy:.4f} | "
            f"{r.macro_recall:.4f} | {r.n_test} | {rank} |"
        )
    lines += [
        "",
        f"mean accuracy {table.mean_accuracy:.4f} ± {table.std_accuracy:.4f}; "
        f"mean macro recall {table.mean_macro_recall:.4f} ± "
        f"{table.std_macro_recall:.4f}",
        "",
    ]
    with open(path, "w") as f:
        f.write("\n".join(lines))


def plot_subject_accuracy(table: ReportTable, path: str) -> None:
    subjects = [str(r.held_out_subject) for r in table.rows]
    accs = [r.accuracy for r in table.rows]
    fig, ax = plt.subplots(figsize=(max(6, 0.5 * len(subjects)), 4))
    ax.bar(subjects, accs, color="#4878a8")
    ax.axhline(table.mean_accuracy, color="#b04030", ls="--", lw=1,
               label=f"mean {table.mean_accuracy:.3f}")
    ax.set_xlabel("held-out subject")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.02)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_confusion(table: ReportTable, path: str) -> None:
    total = np.sum([r.confusion for r in table.rows], axis=0)
    names = table.metadata.get(
        "class_names", [str(i) for i in range(total.shape[0])]
    )
    fig, ax = plt.subplots(figsize=(4.5, 4))
    im = ax.imshow(total, cmap="Blues")
    for i in range(total.shape[0]):
        for j in range(total.shape[1]):
            ax.text(j, i, str(total[i, j]), ha="center", va="center",
                    color="black", fontsize=9)
    ax.set_xticks(range(len(names)), names, rotation=30, ha="right")
    ax.set_yticks(range(len(names)), names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def emit_report(table: ReportTable, out_dir: str, formats=("csv", "markdown"),
                figures: bool = True) -> dict:
    """Write the fold table in the requested formats, the JSON sidecar, and
    the figures. Returns a name -> path map of everything written."""
    os.makedirs(out_dir, exist_ok=True)
    written = {}
    for fmt in formats:
        if fmt == "csv":
            p = os.path.join(out_dir, "report.csv")
            write_fold_csv(table, p)
            written["csv"] = p
        elif fmt == "markdown":
            p = os.path.join(out_dir, "report.md")
            write_fold_markdown(table, p)
            written["markdown"] = p
        else:
            raise ConfigError(f"unknown report format {fmt!r}")
    p = os.path.join(out_dir, "results.json")
    write_results_json(table, p)
    written["json"] = p
    if figures:
        p = os.path.join(out_dir, "accuracy_by_subject.png")
        plot_subject_accuracy(table, p)
        written["accuracy_figure"] = p
        p = os.path.join(out_dir, "confusion_matrix.png")
        plot_confusion(table, p)
        written["confusion_figure"] = p
    return written


def plot_feature_preview(feat, path: str) -> None:
    """First window of every branch: images as heatmaps, vectors as bars."""
    branches = sorted(feat.inputs)
    fig, axes = plt.subplots(1, len(branches), figsize=(4 * len(branches), 3.2))
    if len(branches) == 1:
        axes = [axes]
    for ax, b in zip(axes, branches):
        sample = feat.inputs[b][0]
        if sample.ndim == 3:
            im = ax.imshow(sample[0].T, aspect="auto", origin="lower",
                           cmap="magma")
            ax.set_xlabel("frame")
            ax.set_ylabel("filter")
            fig.colorbar(im, ax=ax, shrink=0.8)
        else:
            ax.bar(range(sample.size), sample, color="#4878a8")
            ax.set_xlabel("feature")
        ax.set_title(b)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


# -- search reports -----------------------------------------------------------


def write_scores_csv(ranked, path: str) -> None:
    """(genotype_index, score, degenerate_flag) rows in rank order."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["genotype_index", "score", "degenerate"])
        for c in ranked:
            score = "-inf" if not np.isfinite(c.score) else f"{c.score:.8g}"
            w.writerow([c.index, score, int(c.degenerate)])


def plot_score_distribution(scored, path: str) -> None:
    finite = [c.score for c in scored if np.isfinite(c.score)]
    n_degen = sum(1 for c in scored if not np.isfinite(c.score))
    fig, ax = plt.subplots(figsize=(6, 4))
    if finite:
        ax.hist(finite, bins=min(50, max(10, len(finite) // 10)),
                color="#4878a8")
    ax.set_xlabel("score")
    ax.set_ylabel("candidates")
    ax.set_title(f"{len(finite)} finite scores, {n_degen} degenerate")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def emit_search_report(scored, ranked, out_dir: str) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    written = {}
    p = os.path.join(out_dir, "scores.csv")
    write_scores_csv(ranked, p)
    written["csv"] = p
    p = os.path.join(out_dir, "score_distribution.png")
    plot_score_distribution(scored, p)
    written["figure"] = p
    return written


# -- rank study ----------------------------------------------------------------


def emit_rank_study(records, spearman: float, out_dir: str) -> dict:
    """records: iterable of dicts with genotype_index, score, accuracy."""
    os.makedirs(out_dir, exist_ok=True)
    written = {}
    p = os.path.join(out_dir, "rank_study.csv")
    with open(p, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["genotype_index", "score", "trained_accuracy"])
        for r in records:
            score = "-inf" if not np.isfinite(r["score"]) else f"{r['score']:.8g}"
            w.writerow([r["genotype_index"], score, f"{r['accuracy']:.6f}"])
    written["csv"] = p
    xs = [r["score"] for r in records if np.isfinite(r["score"])]
    ys = [r["accuracy"] for r in records if np.isfinite(r["score"])]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.scatter(xs, ys, s=14, alpha=0.7, color="#4878a8")
    ax.set_xlabel("training-free score")
    ax.set_ylabel("trained accuracy")
    ax.set_title(f"Spearman rho = {spearman:.3f}")
    fig.tight_layout()
    p = os.path.join(out_dir, "score_vs_accuracy.png")
    fig.savefig(p, dpi=120)
    plt.close(fig)
    written["figure"] = p
    return written


# -- experiment grid -------------------------------------------------------------


def emit_grid(results: dict, out_dir: str) -> dict:
    """results: (combination_label, family) -> ReportTable. Emits a matrix
    of mean accuracies, combinations as rows and families as columns."""
    os.makedirs(out_dir, exist_ok=True)
    combos = sorted({k[0] for k in results}, key=_combo_sort_key)
    families = [f for f in ("MLP", "FCN", "RESNET", "STRESSNAS")
                if any(k[1] == f for k in results)]
    written = {}
    p = os.path.join(out_dir, "grid.csv")
    with open(p, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["combination", *families])
        for combo in combos:
            row = [combo]
            for fam in families:
                t = results.get((combo, fam))
                row.append("" if t is None else f"{t.mean_accuracy:.4f}")
            w.writerow(row)
    written["csv"] = p
    lines = ["# Mean LOSO accuracy by sensor combination and model", "",
             "| combination | " + " | ".join(families) + " |",
             "|---" * (len(families) + 1) + "|"]
    for combo in combos:
        cells = []
        for fam in families:
            t = results.get((combo, fam))
            cells.append("-" if t is None else f"{t.mean_accuracy:.4f}")
        lines.append(f"| {combo} | " + " | ".join(cells) + " |")
    lines.append("")
    p = os.path.join(out_dir, "grid.md")
    with open(p, "w") as f:
        f.write("\n".join(lines))
    written["markdown"] = p

    acc = np.full((len(combos), len(families)), np.nan)
    for (combo, fam), t in results.items():
        acc[combos.index(combo), families.index(fam)] = t.mean_accuracy
    fig, ax = plt.subplots(figsize=(1.6 * len(families) + 3, 0.6 * len(combos) + 2))
    im = ax.imshow(acc, cmap="viridis", vmin=0, vmax=1)
    ax.set_xticks(range(len(families)), families)
    ax.set_yticks(range(len(combos)), combos)
    for i in range(len(combos)):
        for j in range(len(families)):
            if np.isfinite(acc[i, j]):
                ax.text(j, i, f"{acc[i, j]:.3f}", ha="center", va="center",
                        color="white", fontsize=8)
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    p = os.path.join(out_dir, "grid_accuracy.png")
    fig.savefig(p, dpi=120)
    plt.close(fig)
    written["figure"] = p
    return written


def _combo_sort_key(label: str):
    # multi-sensor rows first (widest first), then singles alphabetically
    n = label.count("+") + 1
    return (-n, label)
