import csv
import json
import os

import numpy as np
import pytest

from stressnas import cli, harness, nas, report
from stressnas.dataset import SynthConfig


def tiny_table(seed=5):
    cfg = harness.ExperimentConfig.desk(
        family="MLP",
        combination=("EDA",),
        master_seed=seed,
        epochs=3,
        synth=SynthConfig(n_subjects=3, duration_s=130.0, block_len_s=65.0, seed=2),
    )
    return cfg, harness.run_loso(cfg)


@pytest.fixture(scope="module")
def table_pair():
    return tiny_table()


class TestReport:
    def test_emit_writes_all_artifacts(self, table_pair, tmp_path):
        _, table = table_pair
        written = report.emit_report(table, str(tmp_path))
        for key in ("csv", "markdown", "json", "accuracy_figure", "confusion_figure"):
            assert os.path.isfile(written[key]), key

    def test_csv_rows_and_roundtrip(self, table_pair, tmp_path):
        _, table = table_pair
        path = str(tmp_path / "report.csv")
        report.write_fold_csv(table, path)
        with open(path) as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == len(table.rows) + 1  # folds + summary
        for parsed, row in zip(rows, table.rows):
            assert int(parsed["held_out_subject"]) == row.held_out_subject
            assert float(parsed["accuracy"]) == pytest.approx(row.accuracy, abs=1e-6)
            assert float(parsed["macro_recall"]) == pytest.approx(
                row.macro_recall, abs=1e-6
            )
            assert int(parsed["n_test"]) == row.n_test
        summary = rows[-1]
        assert summary["held_out_subject"] == "summary"
        assert float(summary["accuracy"]) == pytest.approx(
            table.mean_accuracy, abs=1e-6
        )

    def test_markdown_structure(self, table_pair, tmp_path):
        cfg, table = table_pair
        path = str(tmp_path / "report.md")
        report.write_fold_markdown(table, path)
        text = open(path).read()
        assert cfg.config_hash() in text
        data_lines = [l for l in text.splitlines()
                      if l.startswith("|") and "---" not in l and "held-out" not in l]
        assert len(data_lines) == len(table.rows)

    def test_results_json_roundtrip(self, table_pair, tmp_path):
        _, table = table_pair
        path = str(tmp_path / "results.json")
        report.write_results_json(table, path)
        back = report.read_results_json(path)
        assert back.mean_accuracy == table.mean_accuracy
        assert back.metadata == table.metadata

    def test_identical_seed_identical_bytes(self, tmp_path):
        paths = []
        for run in range(2):
            _, table = tiny_table(seed=9)
            out = tmp_path / f"run{run}"
            report.emit_report(table, str(out), figures=False)
            paths.append(out)
        a = (paths[0] / "report.csv").read_bytes()
        b = (paths[1] / "report.csv").read_bytes()
        assert a == b
        a = (paths[0] / "report.md").read_bytes()
        b = (paths[1] / "report.md").read_bytes()
        assert a == b

    def test_scores_csv(self, tmp_path):
        scored = [
            nas.ScoredCandidate(genotype=nas.decode(i), index=i,
                                score=float(-i), seed=0)
            for i in range(5)
        ]
        scored.append(
            nas.ScoredCandidate(genotype=nas.decode(9), index=9,
                                score=float("-inf"), seed=0)
        )
        ranked = nas.rank_candidates(scored, len(scored))
        path = str(tmp_path / "scores.csv")
        report.write_scores_csv(ranked, path)
        with open(path) as f:
            rows = list(csv.DictReader(f))
        assert [r["genotype_index"] for r in rows] == ["0", "1", "2", "3", "4", "9"]
        assert rows[-1]["score"] == "-inf"
        assert rows[-1]["degenerate"] == "1"

    def test_grid_markdown(self, table_pair, tmp_path):
        _, table = table_pair
        results = {
            ("EDA+TEMP", "MLP"): table,
            ("EDA+TEMP", "FCN"): table,
            ("EDA", "MLP"): table,
        }
        written = report.emit_grid(results, str(tmp_path))
        text = open(written["markdown"]).read()
        assert "| EDA+TEMP |" in text
        assert "MLP" in text and "FCN" in text
        with open(written["csv"]) as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["combination", "MLP", "FCN"]
        assert os.path.isfile(written["figure"])

    def test_full_grid_is_24_cells(self, table_pair, tmp_path):
        _, table = table_pair
        combos = ("ACC+EDA+BVP+TEMP", "EDA+BVP+TEMP", "ACC", "EDA", "BVP", "TEMP")
        families = ("MLP", "FCN", "RESNET", "STRESSNAS")
        results = {(c, f): table for c in combos for f in families}
        written = report.emit_grid(results, str(tmp_path / "grid24"))
        with open(written["csv"]) as f:
            rows = list(csv.reader(f))
        assert len(rows) == 1 + 6
        assert all(len(r) == 1 + 4 for r in rows)
        cells = [v for r in rows[1:] for v in r[1:]]
        assert len(cells) == 24 and all(cells)


class TestCli:
    def test_synth_and_features_and_search(self, tmp_path):
        data = str(tmp_path / "data")
        rc = cli.main(["synth", "--subjects", "3", "--duration", "130",
                       "--block", "65", "--seed", "3", "--out", data])
        assert rc == 0
        assert sorted(os.listdir(data)) == ["S2", "S3", "S4"]

        feats = str(tmp_path / "feats")
        rc = cli.main(["features", "--data", data, "--combination", "EDA+MIXED",
                       "--out", feats])
        assert rc == 0
        loaded = harness.load_features(feats)
        assert set(loaded.inputs) == {"EDA", "MIXED"}
        assert os.path.isfile(os.path.join(feats, "features_preview.png"))

        scores = str(tmp_path / "scores.csv")
        rc = cli.main(["search", "--data", data, "--modality", "EDA",
                       "--n", "10", "--k", "3", "--seed", "1", "--out", scores])
        assert rc == 0
        with open(scores) as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 10

    def test_loso_train_report(self, tmp_path):
        data = str(tmp_path / "data")
        cli.main(["synth", "--subjects", "3", "--duration", "130",
                  "--block", "65", "--seed", "3", "--out", data])
        out = str(tmp_path / "loso")
        rc = cli.main(["loso", "--data", data, "--family", "MLP",
                       "--combination", "EDA", "--epochs", "2",
                       "--seed", "1", "--out", out])
        assert rc == 0
        assert os.path.isfile(os.path.join(out, "report.csv"))
        assert os.path.isfile(os.path.join(out, "accuracy_by_subject.png"))

        out2 = str(tmp_path / "re")
        rc = cli.main(["report", "--results", os.path.join(out, "results.json"),
                       "--out", out2, "--format", "markdown"])
        assert rc == 0
        assert os.path.isfile(os.path.join(out2, "report.md"))

        tr = str(tmp_path / "train")
        rc = cli.main(["train", "--data", data, "--family", "MLP",
                       "--combination", "EDA", "--epochs", "2",
                       "--holdout", "2", "--seed", "1", "--out", tr])
        assert rc == 0
        metrics = json.load(open(os.path.join(tr, "metrics.json")))
        assert metrics["held_out_subject"] == 2
        spec = json.load(open(os.path.join(tr, "model_spec.json")))
        assert spec["family"] == "MLP"
        from stressnas import io, models

        net = models.ModelSpec.from_json(spec).build()
        net.init_params(0)
        net.set_flat(io.load_tensors(os.path.join(tr, "checkpoint")))

    def test_exit_codes(self, tmp_path):
        assert cli.main(["loso", "--family", "NOPE", "--out", "x"]) == 1
        assert cli.main(["nonsense"]) == 1
        missing = str(tmp_path / "missing")
        assert cli.main(["loso", "--data", missing, "--family", "MLP",
                        "--combination", "EDA", "--out",
                        str(tmp_path / "o")]) == 2

    def test_interp_nan_flag(self, tmp_path):
        data = str(tmp_path / "data")
        cli.main(["synth", "--subjects", "3", "--duration", "130",
                  "--block", "65", "--seed", "3", "--out", data])
        eda = np.fromfile(os.path.join(data, "S2", "EDA.bin"), dtype="<f4")
        eda[40] = np.nan
        eda.tofile(os.path.join(data, "S2", "EDA.bin"))
        out = str(tmp_path / "out")
        args = ["loso", "--data", data, "--family", "MLP", "--combination",
                "EDA", "--epochs", "1", "--seed", "1", "--out", out]
        assert cli.main(args) == 2  # NaN is fatal by default
        assert cli.main(args + ["--interp-nan"]) == 0

    def test_config_file_merge(self, tmp_path):
        data = str(tmp_path / "data")
        cli.main(["synth", "--subjects", "3", "--duration", "130",
                  "--block", "65", "--seed", "3", "--out", data])
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({
            "family": "MLP", "combination": ["EDA"], "epochs": 1,
            "data_dir": data,
        }))
        out = str(tmp_path / "out")
        rc = cli.main(["loso", "--config", str(cfg_path), "--seed", "2",
                       "--out", out])
        assert rc == 0
        meta = json.load(open(os.path.join(out, "results.json")))["metadata"]
        assert meta["family"] == "MLP"
        assert meta["master_seed"] == 2
