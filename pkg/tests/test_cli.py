"""Command-line interface, exercised through main() with temp files.

Exit convention: 0 success, 1 usage problem, 2 unreadable or invalid data.
"""

import numpy as np
import pytest
import yaml

from strent import (
    Partition,
    RandomPartition,
    StructuredGradientBoostingClassifier,
    circular_structure,
    coarsened_accuracy,
    make_circular_dataset,
    save_dataset_csv,
    structured_entropy,
)
from strent.cli import main, write_structure_file


@pytest.fixture
def circ_csv(tmp_path):
    X, y = make_circular_dataset(240, num_classes=6, random_state=0)
    path = tmp_path / "train.csv"
    save_dataset_csv(path, X, y)
    return path


@pytest.fixture
def test_csv(tmp_path):
    X, y = make_circular_dataset(120, num_classes=6, random_state=1)
    path = tmp_path / "test.csv"
    save_dataset_csv(path, X, y)
    return path


def metric_table(text):
    """Parse 'metric,value' CSV output into a dict of floats."""
    out = {}
    for line in text.strip().splitlines()[1:]:
        name, value = line.split(",")
        out[name] = float(value)
    return out


def sweep_table(text):
    """Parse sweep output into (header, rows), skipping comments."""
    lines = [l for l in text.strip().splitlines() if not l.startswith("#")]
    header = lines[0].split(",")
    rows = [l.split(",") for l in lines[1:]]
    return header, rows


class TestTrainEval:
    def test_round_trip_reproduces_final_train_loss(
        self, tmp_path, circ_csv, capsys
    ):
        model_path = tmp_path / "m.json"
        code = main([
            "train", "--data", str(circ_csv), "--circular", "6,2",
            "--p0", "0.5", "--rounds", "30", "--seed", "7",
            "--out", str(model_path),
        ])
        assert code == 0
        out = capsys.readouterr().out
        final = float(out.split("final_train_log_loss: ")[1].splitlines()[0])

        code = main(["eval", str(model_path), "--data", str(circ_csv)])
        assert code == 0
        report = metric_table(capsys.readouterr().out)
        np.testing.assert_allclose(report["log_loss"], final, atol=1e-12)
        assert 0.0 <= report["accuracy"] <= 1.0

    def test_same_seed_gives_identical_files(self, tmp_path, circ_csv):
        paths = [tmp_path / "a.json", tmp_path / "b.json"]
        for p in paths:
            assert main([
                "train", "--data", str(circ_csv), "--rounds", "10",
                "--seed", "42", "--out", str(p),
            ]) == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()
        metrics = [p.with_suffix(".metrics.csv") for p in paths]
        assert metrics[0].read_text() == metrics[1].read_text()

    def test_metrics_file_layout(self, tmp_path, circ_csv, test_csv):
        model_path = tmp_path / "m.json"
        assert main([
            "train", "--data", str(circ_csv), "--test-data", str(test_csv),
            "--rounds", "8", "--seed", "3", "--out", str(model_path),
        ]) == 0
        lines = model_path.with_suffix(".metrics.csv").read_text().splitlines()
        assert lines[0] == "# seed: 3"
        assert lines[1] == "round,train_log_loss,test_log_loss"
        assert len(lines) == 10
        assert lines[2].split(",")[0] == "1"
        assert lines[-1].split(",")[0] == "8"

    def test_eval_with_structure_flags(self, tmp_path, circ_csv, capsys):
        model_path = tmp_path / "m.json"
        assert main([
            "train", "--data", str(circ_csv), "--rounds", "10",
            "--seed", "5", "--out", str(model_path),
        ]) == 0
        capsys.readouterr()
        assert main([
            "eval", str(model_path), "--data", str(circ_csv),
            "--circular", "6,2", "--p0", "0.4",
        ]) == 0
        report = metric_table(capsys.readouterr().out)
        assert "structured_log_loss" in report
        assert {"coarsened_accuracy_0", "coarsened_accuracy_1",
                "coarsened_accuracy_2"} <= set(report)

        # cross-check one coarsened accuracy against the library
        model = StructuredGradientBoostingClassifier.load(model_path)
        X, y = make_circular_dataset(240, num_classes=6, random_state=0)
        rp = circular_structure(6, 2, 0.4)
        parts = [p for p, _ in rp]
        probs = model.predict_proba(X)
        np.testing.assert_allclose(
            report["coarsened_accuracy_1"],
            coarsened_accuracy(probs, y, parts[1]),
            atol=1e-12,
        )

    def test_eval_out_mirrors_stdout(self, tmp_path, circ_csv, capsys):
        model_path = tmp_path / "m.json"
        assert main([
            "train", "--data", str(circ_csv), "--rounds", "5",
            "--seed", "1", "--out", str(model_path),
        ]) == 0
        capsys.readouterr()
        report_path = tmp_path / "report.csv"
        assert main([
            "eval", str(model_path), "--data", str(circ_csv),
            "--out", str(report_path),
        ]) == 0
        assert report_path.read_text() == capsys.readouterr().out


class TestExitCodes:
    def test_missing_label_column_is_data_error(self, tmp_path, capsys):
        path = tmp_path / "d.csv"
        path.write_text("a,b\n1.0,2.0\n")
        code = main([
            "train", "--data", str(path), "--out", str(tmp_path / "m.json"),
        ])
        assert code == 2
        assert "label" in capsys.readouterr().err

    def test_missing_file_is_data_error(self, tmp_path):
        assert main([
            "train", "--data", str(tmp_path / "none.csv"),
            "--out", str(tmp_path / "m.json"),
        ]) == 2

    def test_unreadable_model_is_data_error(self, tmp_path, circ_csv):
        bad = tmp_path / "bad.json"
        bad.write_text("{}")
        assert main(["eval", str(bad), "--data", str(circ_csv)]) == 2

    def test_conflicting_sources_usage_error(self, tmp_path, circ_csv, capsys):
        code = main([
            "train", "--data", str(circ_csv), "--circular", "6,2",
            "--hierarchy", str(tmp_path / "h.csv"),
            "--out", str(tmp_path / "m.json"),
        ])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_bad_circular_spec_usage_error(self, tmp_path, circ_csv):
        assert main([
            "train", "--data", str(circ_csv), "--circular", "6",
            "--out", str(tmp_path / "m.json"),
        ]) == 1

    def test_sweep_without_test_data_usage_error(self, circ_csv):
        assert main(["sweep", "--data", str(circ_csv)]) == 1

    def test_bad_rounds_usage_error(self, tmp_path, circ_csv):
        assert main([
            "train", "--data", str(circ_csv), "--rounds", "0",
            "--out", str(tmp_path / "m.json"),
        ]) == 1

    def test_missing_subcommand(self):
        assert main([]) == 1

    def test_unknown_flag(self, circ_csv):
        assert main(["train", "--data", str(circ_csv), "--bogus"]) == 1

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        capsys.readouterr()


class TestEntropyCommand:
    def test_dist_with_structure_file(self, tmp_path, capsys):
        rp = RandomPartition(
            (
                Partition(((0,), (1,), (2,)), 3),
                Partition(((0, 1), (2,)), 3),
            ),
            (0.5, 0.5),
        )
        spath = tmp_path / "s.yaml"
        with open(spath, "w") as fh:
            write_structure_file(fh, rp)
        assert main([
            "entropy", "--dist", "0.25,0.25,0.5", "--structure", str(spath),
        ]) == 0
        report = yaml.safe_load(capsys.readouterr().out)
        np.testing.assert_allclose(report["structured_entropy_bits"], 1.25)
        np.testing.assert_allclose(report["shannon_entropy_bits"], 1.5)
        probs = {
            tuple(e["block"]): e["prob"] for e in report["random_block_dist"]
        }
        np.testing.assert_allclose(probs[(0, 1)], 0.25)
        np.testing.assert_allclose(probs[(2,)], 0.5)
        np.testing.assert_allclose(sum(probs.values()), 1.0)

    def test_dist_without_structure_matches_shannon(self, capsys):
        assert main(["entropy", "--dist", "0.2,0.3,0.5"]) == 0
        report = yaml.safe_load(capsys.readouterr().out)
        np.testing.assert_allclose(
            report["structured_entropy_nats"], report["shannon_entropy_nats"]
        )

    def test_one_hot_dist_is_zero(self, capsys):
        assert main(["entropy", "--dist", "1,0,0"]) == 0
        report = yaml.safe_load(capsys.readouterr().out)
        assert report["shannon_entropy_nats"] == 0.0
        assert report["structured_entropy_nats"] == 0.0

    def test_data_uses_label_frequencies(self, tmp_path, circ_csv, capsys):
        assert main([
            "entropy", "--data", str(circ_csv), "--circular", "6,2",
            "--p0", "0.5",
        ]) == 0
        report = yaml.safe_load(capsys.readouterr().out)
        _, y = make_circular_dataset(240, num_classes=6, random_state=0)
        dist = np.bincount(y, minlength=6) / len(y)
        expected = structured_entropy(dist, circular_structure(6, 2, 0.5))
        np.testing.assert_allclose(report["structured_entropy_nats"], expected)

    def test_dist_not_normalized_usage_error(self):
        assert main(["entropy", "--dist", "0.5,0.6"]) == 1

    def test_both_dist_and_data_usage_error(self, circ_csv):
        assert main([
            "entropy", "--dist", "0.5,0.5", "--data", str(circ_csv),
        ]) == 1

    def test_neither_dist_nor_data_usage_error(self):
        assert main(["entropy"]) == 1


class TestGenStructure:
    def test_circular_structure_file(self, tmp_path, capsys):
        out = tmp_path / "s.yaml"
        assert main([
            "gen-structure", "--circular", "6,2", "--p0", "0.5",
            "--out", str(out),
        ]) == 0
        capsys.readouterr()
        doc = yaml.safe_load(out.read_text())
        assert doc["format"] == "strent-structure"
        assert doc["version"] == 1
        np.testing.assert_allclose(doc["weights"], [0.5, 0.25, 0.25])
        assert len(doc["partitions"]) == 3

    def test_output_usable_as_structure_input(
        self, tmp_path, circ_csv, capsys
    ):
        spath = tmp_path / "s.yaml"
        assert main([
            "gen-structure", "--circular", "6,2", "--p0", "0.5",
            "--out", str(spath),
        ]) == 0
        capsys.readouterr()
        model_path = tmp_path / "m.json"
        assert main([
            "train", "--data", str(circ_csv), "--structure", str(spath),
            "--rounds", "5", "--seed", "2", "--out", str(model_path),
        ]) == 0
        model = StructuredGradientBoostingClassifier.load(model_path)
        assert model.structure == circular_structure(6, 2, 0.5)

    def test_graph_sampling_is_seeded(self, tmp_path, capsys):
        gpath = tmp_path / "g.txt"
        gpath.write_text("6\n0 1\n1 2\n2 3\n3 4\n4 5\n5 0\n")
        texts = []
        for _ in range(2):
            assert main([
                "gen-structure", "--graph", str(gpath),
                "--partition-size", "3", "--seed", "9",
            ]) == 0
            texts.append(capsys.readouterr().out)
        assert texts[0] == texts[1]
        doc = yaml.safe_load(texts[0])
        assert len(doc["partitions"]) == 2
        assert len(doc["partitions"][1]) == 3

    def test_without_source_usage_error(self):
        assert main(["gen-structure"]) == 1


class TestSweep:
    def test_table_shape_and_composition(
        self, tmp_path, circ_csv, test_csv, capsys
    ):
        assert main([
            "sweep", "--data", str(circ_csv), "--test-data", str(test_csv),
            "--circular", "6,2", "--p0", "0.3,0.5",
            "--train-sizes", "60,240", "--trials", "1", "--rounds", "5",
            "--seed", "3",
        ]) == 0
        header, rows = sweep_table(capsys.readouterr().out)
        assert header == ["train_size", "standard", "p0=0.3", "p0=0.5"]
        assert [r[0] for r in rows] == ["60", "240"]

        # trials=1, full pool: the standard cell is one plain fit
        X, y = make_circular_dataset(240, num_classes=6, random_state=0)
        Xt, yt = make_circular_dataset(120, num_classes=6, random_state=1)
        model = StructuredGradientBoostingClassifier(
            n_estimators=5, learning_rate=0.1, max_depth=3,
            l2_regularization=1.0, random_state=3,
        ).fit(X, y)
        expected = model.evaluate(Xt, yt)["log_loss"]
        np.testing.assert_allclose(float(rows[1][1]), expected, atol=1e-12)

        # subsampled cell reproduces with the documented row picker
        picker = np.random.default_rng([3, 60])
        idx = np.sort(picker.choice(240, 60, replace=False))
        model = StructuredGradientBoostingClassifier(
            n_estimators=5, learning_rate=0.1, max_depth=3,
            l2_regularization=1.0, random_state=3,
        ).fit(X[idx], y[idx])
        expected = model.evaluate(Xt, yt)["log_loss"]
        np.testing.assert_allclose(float(rows[0][1]), expected, atol=1e-12)

    def test_nine_p0_grid_plus_standard(
        self, tmp_path, circ_csv, test_csv, capsys
    ):
        p0s = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9"
        assert main([
            "sweep", "--data", str(circ_csv), "--test-data", str(test_csv),
            "--circular", "6,2", "--p0", p0s, "--train-sizes", "30",
            "--trials", "1", "--rounds", "1", "--seed", "0",
        ]) == 0
        header, rows = sweep_table(capsys.readouterr().out)
        assert len(header) == 11
        assert header[1] == "standard"
        assert header[2:] == [f"p0=0.{d}" for d in range(1, 10)]
        assert len(rows) == 1
        assert all(float(c) > 0 for c in rows[0][1:])

    def test_oversized_train_size_usage_error(self, circ_csv, test_csv):
        assert main([
            "sweep", "--data", str(circ_csv), "--test-data", str(test_csv),
            "--train-sizes", "9999", "--trials", "1",
        ]) == 1

    def test_graph_grid_config_names(
        self, tmp_path, circ_csv, test_csv, capsys
    ):
        gpath = tmp_path / "g.txt"
        gpath.write_text("6\n0 1\n1 2\n2 3\n3 4\n4 5\n5 0\n")
        assert main([
            "sweep", "--data", str(circ_csv), "--test-data", str(test_csv),
            "--graph", str(gpath), "--partition-size", "2,3",
            "--p0", "0.5", "--train-sizes", "30", "--trials", "1",
            "--rounds", "1", "--seed", "0",
        ]) == 0
        header, _ = sweep_table(capsys.readouterr().out)
        assert header == ["train_size", "standard", "m=2 p0=0.5", "m=3 p0=0.5"]
