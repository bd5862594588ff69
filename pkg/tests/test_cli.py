import json
from decimal import Decimal

import numpy as np
import pytest

from staticbert.cli import main
from staticbert.distill import load_matrix, load_word_vectors


def run_cli(*argv) -> int:
    try:
        return main(list(argv))
    except SystemExit as exit_info:  # argparse usage errors
        return int(exit_info.code)


@pytest.fixture()
def reference_run_dirs(tmp_path):
    """Fixture run directories encoding the five reference baseline/static
    pairs, in the exact on-disk layout the report command reads."""
    rows = {
        "cnn_attention": ((74.41, 75.15, 74.92, 74.35, 80.35),
                          (77.52, 77.96, 77.89, 77.69, 79.62)),
        "cnn_lstm": ((72.13, 72.94, 73.47, 72.4, 76.65),
                     (76.04, 76.66, 77.20, 76.18, 79.43)),
        "lstm": ((72.85, 73.43, 73.37, 72.97, 76.44),
                 (79.08, 79.36, 79.38, 79.37, 79.49)),
        "bilstm": ((76.85, 77.45, 77.99, 77.10, 79.66),
                   (79.71, 80.15, 80.37, 79.76, 83.03)),
        "bilstm_attention": ((76.80, 77.34, 77.76, 77.00, 79.63),
                             (78.52, 79.16, 79.67, 78.58, 83.00)),
    }
    dirs = []
    for arch, (baseline, static) in rows.items():
        for tag, values in (("word_vectors", baseline), ("static_be", static)):
            run_dir = tmp_path / f"{arch}-{tag}"
            run_dir.mkdir()
            f1, acc, prec, rec, spec = values
            payload = {"f1": f1, "accuracy": acc, "precision": prec,
                       "recall": rec, "specificity": spec,
                       "confusion": {"tp": 0, "tn": 0, "fp": 0, "fn": 0}}
            (run_dir / "aggregate-metrics").write_text(json.dumps(payload))
            (run_dir / "resolved-config").write_text(
                f"architecture = {arch}\nembedding_source = {tag}\n"
            )
            dirs.append(str(run_dir))
    return dirs


class TestBalance:
    def test_ethos_fixture(self, ethos_csv, capsys):
        assert run_cli("balance", "--corpus", str(ethos_csv)) == 0
        out = capsys.readouterr().out
        assert "class 0: 565" in out
        assert "class 1: 433" in out
        balance_line = [l for l in out.splitlines() if l.startswith("balance:")][0]
        # decimal comparison: the printed value must lie in [0.985, 0.987]
        printed = Decimal(balance_line.split(":")[1].strip())
        assert abs(printed - Decimal("0.986")) <= Decimal("0.001")

    def test_synthetic_balanced_file(self, tmp_path, capsys):
        path = tmp_path / "even.csv"
        rows = "\n".join(f"text {i};{i % 2}" for i in range(100))
        path.write_text("comment;isHate\n" + rows + "\n")
        assert run_cli("balance", "--corpus", str(path)) == 0
        assert "balance: 1.000" in capsys.readouterr().out

    def test_single_class_file_fails(self, tmp_path, capsys):
        path = tmp_path / "one.csv"
        path.write_text("comment;isHate\nalways hate;1\nstill hate;0.9\n")
        assert run_cli("balance", "--corpus", str(path)) == 1
        assert "single class" in capsys.readouterr().err

    def test_missing_file_fails(self, tmp_path):
        assert run_cli("balance", "--corpus", str(tmp_path / "nope.csv")) == 1


class TestDistill:
    def test_three_occurrence_golden_bytes(self, tmp_path, capsys):
        # offline mean of (1,2), (2,3), (3,4) is exactly (2, 3)
        ceb = tmp_path / "w.ceb"
        ceb.write_text("CEB 1 2\nw\t1.0 2.0\nw\t2.0 3.0\nw\t3.0 4.0\n")
        out_dir = tmp_path / "out"
        assert run_cli("distill", "--ceb", str(ceb), "--out", str(out_dir)) == 0
        golden = "w 2.00000000 3.00000000\n"
        assert (out_dir / "static-table.txt").read_text() == golden
        printed = capsys.readouterr().out
        assert "words: 1" in printed
        assert "dim: 2" in printed

    def test_empty_body_fails(self, tmp_path, capsys):
        ceb = tmp_path / "empty.ceb"
        ceb.write_text("CEB 1 4\n")
        assert run_cli("distill", "--ceb", str(ceb), "--out", str(tmp_path / "o")) == 1
        assert "no occurrences" in capsys.readouterr().err

    def test_dim_mismatch_names_line(self, tmp_path, capsys):
        ceb = tmp_path / "bad.ceb"
        ceb.write_text("CEB 1 2\nw\t1.0 2.0\nw\t1.0\n")
        assert run_cli("distill", "--ceb", str(ceb), "--out", str(tmp_path / "o")) == 1
        assert "line 3" in capsys.readouterr().err

    def test_manifest_written(self, tmp_path):
        ceb = tmp_path / "w.ceb"
        ceb.write_text("CEB 1 1\nw\t5.0\n")
        out_dir = tmp_path / "out"
        run_cli("distill", "--ceb", str(ceb), "--out", str(out_dir))
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert manifest["subcommand"] == "distill"
        assert manifest["inputs"]["ceb"] == str(ceb)
        assert manifest["tool_version"]


class TestBuildMatrix:
    def test_dump_round_trip(self, smoke_csv, smoke_table, tmp_path, capsys):
        out_dir = tmp_path / "m"
        assert run_cli("build-matrix", "--corpus", str(smoke_csv),
                       "--table", str(smoke_table), "--out", str(out_dir), "--seed", "3") == 0
        printed = capsys.readouterr().out
        assert "coverage:" in printed
        matrix = load_matrix(out_dir / "embedding-matrix.bin")
        table = load_word_vectors(smoke_table)
        assert matrix.dim == table.dim
        np.testing.assert_array_equal(matrix.rows[0], np.zeros(table.dim))


class TestKfold:
    ARGS = ("kfold", "--arch", "lstm", "--folds", "2", "--epochs", "2",
            "--max-len", "12", "--hidden", "6", "--batch-size", "16")

    def test_smoke_fixture_completes_with_layout(self, smoke_csv, smoke_table, tmp_path, capsys):
        out_dir = tmp_path / "run"
        code = run_cli(*self.ARGS, "--corpus", str(smoke_csv),
                       "--table", str(smoke_table), "--out", str(out_dir), "--seed", "5")
        assert code == 0
        for name in ("manifest.json", "resolved-config", "aggregate-metrics",
                     "report.md", "report.csv"):
            assert (out_dir / name).is_file(), name
        for fold in range(2):
            assert (out_dir / f"fold-{fold}" / "checkpoint").is_file()
            assert (out_dir / f"fold-{fold}" / "metrics").is_file()
        printed = capsys.readouterr().out
        assert "lstm+static_be (micro):" in printed

    def test_unknown_architecture_lists_valid_names(self, smoke_csv, smoke_table, tmp_path, capsys):
        code = run_cli("kfold", "--arch", "transformer", "--corpus", str(smoke_csv),
                       "--table", str(smoke_table), "--out", str(tmp_path / "x"))
        assert code == 2  # argparse rejects outside the choices list
        err = capsys.readouterr().err
        assert "bilstm_attention" in err and "gru" in err

    def test_identical_invocations_are_byte_identical(self, smoke_csv, smoke_table, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            assert run_cli(*self.ARGS, "--corpus", str(smoke_csv),
                           "--table", str(smoke_table), "--out", str(out), "--seed", "9") == 0
        assert (out_a / "aggregate-metrics").read_bytes() == (out_b / "aggregate-metrics").read_bytes()
        assert (out_a / "report.csv").read_bytes() == (out_b / "report.csv").read_bytes()
        for fold in range(2):
            assert (out_a / f"fold-{fold}" / "checkpoint").read_bytes() == \
                   (out_b / f"fold-{fold}" / "checkpoint").read_bytes()

    def test_two_tables_concatenate(self, smoke_csv, smoke_table, tmp_path):
        second = tmp_path / "extra.txt"
        words = [line.split(" ", 1)[0] for line in open(smoke_table, encoding="utf-8")]
        second.write_text("".join(f"{w} 0.1 0.2\n" for w in words[:10]))
        out_dir = tmp_path / "run"
        code = run_cli(*self.ARGS, "--corpus", str(smoke_csv), "--table", str(smoke_table),
                       "--table", str(second), "--out", str(out_dir))
        assert code == 0
        config = (out_dir / "resolved-config").read_text()
        assert "embedding_source = concat" in config


class TestReport:
    def test_reference_runs_reproduce_average_increases(self, reference_run_dirs, tmp_path, capsys):
        out_dir = tmp_path / "report"
        assert run_cli("report", *reference_run_dirs, "--out", str(out_dir)) == 0
        csv_text = (out_dir / "report.csv").read_text()
        avg = [line for line in csv_text.splitlines() if line.startswith("average_delta")][0]
        f1, acc, prec, rec, spec = (float(x) for x in avg.split(",")[4:])
        assert f1 == pytest.approx(3.56, abs=0.01)
        assert acc == pytest.approx(3.39, abs=0.01)
        assert prec == pytest.approx(3.40, abs=0.01)
        assert rec == pytest.approx(3.55, abs=0.01)
        assert spec == pytest.approx(2.37, abs=0.01)
        markdown = (out_dir / "report.md").read_text()
        assert "**83.03**" in markdown

    def test_mismatched_schema_fails(self, reference_run_dirs, tmp_path, capsys):
        broken = tmp_path / "broken-run"
        broken.mkdir()
        (broken / "aggregate-metrics").write_text('{"f1": 10.0}')
        (broken / "resolved-config").write_text("architecture = lstm\n")
        code = run_cli("report", reference_run_dirs[0], str(broken), "--out", str(tmp_path / "r"))
        assert code == 1
        assert "mismatched" in capsys.readouterr().err

    def test_not_a_run_dir_fails(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert run_cli("report", str(empty), "--out", str(tmp_path / "r")) == 1
        assert "not a run directory" in capsys.readouterr().err


class TestGradcheck:
    @pytest.mark.parametrize("arch", ["lstm", "bilstm_attention"])
    def test_architectures_pass(self, arch, capsys):
        assert run_cli("gradcheck", "--arch", arch) == 0
        assert "PASS" in capsys.readouterr().out

    def test_corrupted_gradient_fails(self, capsys):
        assert run_cli("gradcheck", "--arch", "lstm", "--corrupt") == 1
        assert "FAIL" in capsys.readouterr().out

    def test_length_one_sequence(self, capsys):
        assert run_cli("gradcheck", "--arch", "cnn_attention", "--max-len", "1") == 0
        assert "PASS" in capsys.readouterr().out
