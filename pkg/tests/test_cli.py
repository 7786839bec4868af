import json

import numpy as np
import pytest

from otranks import cli, nulldist, qmc
from otranks.errors import DataError


def write_csv(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")
    return str(path)


@pytest.fixture
def xy_files(tmp_path):
    rng = np.random.default_rng(0)
    x = write_csv(tmp_path / "x.csv", rng.normal(size=(12, 2)))
    y = write_csv(tmp_path / "y.csv", rng.normal(size=(12, 2)))
    return x, y


class TestParseCsv:
    def test_basic(self, tmp_path):
        path = write_csv(tmp_path / "d.csv", [[1.0, 2.0], [3.0, 4.0]])
        cloud = cli.parse_csv(path)
        assert cloud.rows.tolist() == [[1.0, 2.0], [3.0, 4.0]]

    def test_header_skipped(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b\n1,2\n")
        cloud = cli.parse_csv(str(path), has_header=True)
        assert cloud.rows.tolist() == [[1.0, 2.0]]

    def test_ragged_names_row(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1,2\n3\n")
        with pytest.raises(DataError, match="row 2"):
            cli.parse_csv(str(path))

    def test_non_finite_rejected(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("nan,1\n")
        with pytest.raises(DataError, match="non-finite"):
            cli.parse_csv(str(path))

    def test_text_rejected_with_location(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1,2\n3,zebra\n")
        with pytest.raises(DataError, match="row 2, column 2"):
            cli.parse_csv(str(path))


class TestRanksCommand:
    def test_output_is_permutation_of_grid(self, tmp_path, capsys):
        rng = np.random.default_rng(1)
        x = write_csv(tmp_path / "x.csv", rng.normal(size=(9, 2)))
        out = tmp_path / "ranks.csv"
        assert cli.main(["ranks", "--x", x, "--out", str(out)]) == 0
        emitted = np.array(
            [[float(f) for f in line.split(",")] for line in out.read_text().splitlines()]
        )
        grid = qmc.halton_grid(9, 2)
        assert np.array_equal(
            np.sort(emitted, axis=0), np.sort(grid.points, axis=0)
        )


class TestIndepCommand:
    def test_deterministic_json(self, xy_files, tmp_path, capsys):
        x, y = xy_files
        argv = ["indep-test", "--x", x, "--y", y, "--b", "99", "--seed", "7"]
        assert cli.main(argv) == 0
        first = capsys.readouterr().out
        assert cli.main(argv) == 0
        second = capsys.readouterr().out
        assert first == second
        doc = json.loads(first)
        assert doc["test_kind"] == "rdcov"
        assert doc["b"] == 99 and doc["seed"] == 7

    def test_rejection_is_not_an_error_exit(self, tmp_path, capsys):
        rng = np.random.default_rng(2)
        base = rng.normal(size=(30, 1))
        x = write_csv(tmp_path / "x.csv", base)
        y = write_csv(tmp_path / "y.csv", base * 2 + 1)
        code = cli.main(["indep-test", "--x", x, "--y", y, "--b", "200", "--seed", "3"])
        doc = json.loads(capsys.readouterr().out)
        assert code == 0
        assert doc["reject"] is True

    def test_missing_seed_prints_one(self, xy_files, capsys):
        x, y = xy_files
        assert cli.main(["indep-test", "--x", x, "--y", y, "--b", "20"]) == 0
        err = capsys.readouterr().err
        assert "entropy seed" in err


class TestTwoSampleCommand:
    def test_singleton_hand_value(self, tmp_path, capsys):
        x = write_csv(tmp_path / "x.csv", [[0.0]])
        y = write_csv(tmp_path / "y.csv", [[5.0]])
        assert cli.main(["two-sample", "--x", x, "--y", y, "--b", "25", "--seed", "1"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["statistic_scaled"] == pytest.approx(0.5)


class TestKCommands:
    def test_k_indep(self, tmp_path, capsys):
        rng = np.random.default_rng(3)
        x = write_csv(tmp_path / "x.csv", rng.normal(size=(10, 3)))
        code = cli.main(
            ["k-indep", "--x", x, "--blocks", "1,2", "--b", "50", "--seed", "2"]
        )
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["test_kind"] == "k_indep"
        assert doc["dims"] == [1, 2]

    def test_k_sample(self, tmp_path, capsys):
        rng = np.random.default_rng(4)
        paths = [
            write_csv(tmp_path / f"s{k}.csv", rng.normal(size=(5, 2))) for k in range(3)
        ]
        code = cli.main(
            ["k-sample", "--inputs", ",".join(paths), "--b", "40", "--seed", "5"]
        )
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["counts"] == [5, 5, 5]


class TestSymmetryCommand:
    def test_runs(self, tmp_path, capsys):
        rng = np.random.default_rng(5)
        x = write_csv(tmp_path / "x.csv", rng.normal(size=(8, 2)))
        assert cli.main(["symmetry", "--x", x, "--b", "30", "--seed", "6"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["test_kind"] == "symmetry"


class TestNullTableCommand:
    def test_generate_then_reuse(self, tmp_path, capsys):
        rng = np.random.default_rng(6)
        table_path = tmp_path / "t.nulltab"
        code = cli.main(
            ["null-table", "--mode", "rdcov", "--n", "10", "--dims", "2,2",
             "--b", "64", "--seed", "9", "--out", str(table_path)]
        )
        assert code == 0
        table = nulldist.load_table(table_path)
        assert table.b == 64
        x = write_csv(tmp_path / "x.csv", rng.normal(size=(10, 2)))
        y = write_csv(tmp_path / "y.csv", rng.normal(size=(10, 2)))
        code = cli.main(
            ["indep-test", "--x", x, "--y", y, "--b", "64", "--seed", "9",
             "--table", str(table_path)]
        )
        assert code == 0
        json.loads(capsys.readouterr().out)

    def test_wrong_table_is_data_error(self, tmp_path, capsys):
        rng = np.random.default_rng(7)
        table_path = tmp_path / "t.nulltab"
        cli.main(
            ["null-table", "--mode", "rdcov", "--n", "9", "--dims", "2,2",
             "--b", "64", "--seed", "9", "--out", str(table_path)]
        )
        x = write_csv(tmp_path / "x.csv", rng.normal(size=(10, 2)))
        y = write_csv(tmp_path / "y.csv", rng.normal(size=(10, 2)))
        code = cli.main(
            ["indep-test", "--x", x, "--y", y, "--b", "64", "--seed", "9",
             "--table", str(table_path)]
        )
        assert code == cli.EXIT_DATA


class TestThresholdsCommand:
    def test_smoke_value(self, capsys):
        code = cli.main(
            ["thresholds", "--mode", "rdcov", "--alpha", "0.05", "--n", "30",
             "--dims", "2,2", "--b", "500", "--seed", "3"]
        )
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert 0.1 < doc["critical_value"] < 1.0

    def test_csv_rows(self, tmp_path, capsys):
        csv_path = tmp_path / "rows.csv"
        code = cli.main(
            ["thresholds", "--mode", "re", "--n", "10", "--m", "10",
             "--dims", "1", "--dims", "2", "--b", "200", "--seed", "4",
             "--csv", str(csv_path)]
        )
        assert code == 0
        lines = csv_path.read_text().splitlines()
        assert lines[0].startswith("mode,")
        assert len(lines) == 3


class TestSimulateCommand:
    def test_smoke(self, capsys):
        code = cli.main(
            ["simulate", "--setting", "IND_V8", "--reps", "5", "--n", "25",
             "--b", "100", "--seed", "8"]
        )
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["setting"] == "IND_V8"
        assert doc["replicates"] == 5


class TestJitterAndGrids:
    def test_jitter_recorded_in_warnings(self, tmp_path, capsys):
        x = write_csv(tmp_path / "x.csv", [[1.0], [1.0], [2.0]])
        y = write_csv(tmp_path / "y.csv", [[0.0], [1.0], [2.0]])
        code = cli.main(
            ["indep-test", "--x", x, "--y", y, "--b", "20", "--seed", "4",
             "--jitter", "1e-6"]
        )
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert any("jitter applied" in w for w in doc["warnings"])
        # jitter breaks the duplicate rows, so no tie warning remains
        assert not any("duplicate" in w for w in doc["warnings"])

    def test_custom_grid_file(self, tmp_path, capsys):
        grid = qmc.halton_grid(4, 2)
        gpath = tmp_path / "grid.csv"
        qmc.save_grid_csv(grid, gpath)
        rng = np.random.default_rng(9)
        x = write_csv(tmp_path / "x.csv", rng.normal(size=(4, 2)))
        code = cli.main(
            ["ranks", "--x", x, "--grid-file", str(gpath)]
        )
        assert code == 0
        emitted = np.array(
            [[float(f) for f in line.split(",")]
             for line in capsys.readouterr().out.strip().splitlines()]
        )
        assert np.array_equal(np.sort(emitted, axis=0), np.sort(grid.points, axis=0))


class TestExitCodes:
    def test_usage_error(self, tmp_path, capsys):
        x = write_csv(tmp_path / "x.csv", [[1.0]])
        code = cli.main(
            ["indep-test", "--x", x, "--y", x, "--alpha", "2.0", "--b", "10"]
        )
        assert code == cli.EXIT_USAGE

    def test_data_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,2\n3\n")
        code = cli.main(["indep-test", "--x", str(bad), "--y", str(bad), "--b", "10", "--seed", "1"])
        assert code == cli.EXIT_DATA

    def test_argparse_usage_exit(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["indep-test"])  # missing required arguments
        assert exc.value.code == 2
