"""CLI contract: exit codes, output files, reproducibility, summary line."""

import json
import re

import pytest

from psm_workbench.cli import main

from conftest import basic_schema_dict, confounded_dataset, write_dataset


@pytest.fixture
def inputs(tmp_path):
    """A confounded dataset on disk plus a small manifest."""
    ds = confounded_dataset(n=200, seed=9)
    csv_path = tmp_path / "data.csv"
    schema_path = tmp_path / "schema.json"
    ds.save(csv_path, schema_path)
    manifest = {
        "seed": 7,
        "treatment": {"column": "d"},
        "bootstrap": {"n_samples": 12, "alpha": 0.9},
    }
    manifest_path = tmp_path / "manifest.json"
    manifest_path.write_text(json.dumps(manifest))
    return csv_path, schema_path, manifest_path


class TestValidate:
    def test_ok(self, inputs, capsys):
        csv_path, schema_path, manifest_path = inputs
        code = main(["validate", "--data", str(csv_path), "--schema", str(schema_path),
                     "--manifest", str(manifest_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "dataset OK" in out and "manifest OK" in out

    def test_duplicate_id_exit_1(self, tmp_path, capsys):
        csv_path, schema_path = write_dataset(
            tmp_path,
            ["unit_id", "y", "d", "age"],
            [["u1", "1", "1", "30"], ["u1", "2", "0", "40"]],
            basic_schema_dict(),
        )
        code = main(["validate", "--data", str(csv_path), "--schema", str(schema_path)])
        assert code == 1
        assert "'u1'" in capsys.readouterr().err

    def test_bad_manifest_exit_1(self, inputs, tmp_path, capsys):
        csv_path, schema_path, _ = inputs
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"treatment": {"column": "d"}}))
        code = main(["validate", "--data", str(csv_path), "--schema", str(schema_path),
                     "--manifest", str(bad)])
        assert code == 1
        assert "seed" in capsys.readouterr().err


class TestRun:
    def test_reproducible_bytes_and_summary(self, inputs, tmp_path, capsys):
        csv_path, schema_path, manifest_path = inputs
        args = ["run", "--manifest", str(manifest_path), "--data", str(csv_path),
                "--schema", str(schema_path), "--seed", "7"]
        assert main(args + ["--out", str(tmp_path / "r1")]) == 0
        line1 = capsys.readouterr().out.strip().splitlines()[-1]
        assert main(args + ["--out", str(tmp_path / "r2")]) == 0

        b1 = (tmp_path / "r1" / "results.json").read_bytes()
        b2 = (tmp_path / "r2" / "results.json").read_bytes()
        assert b1 == b2
        assert (tmp_path / "r1" / "diagnostics.json").is_file()
        assert re.fullmatch(
            r"ATT=-?\d+(\.\d+)?(e-?\d+)? CI90=\[-?\d+(\.\d+)?(e-?\d+)?,-?\d+(\.\d+)?(e-?\d+)?\] "
            r"n_treated=\d+ n_matched=\d+", line1)

    def test_threads_do_not_change_bytes(self, inputs, tmp_path):
        csv_path, schema_path, manifest_path = inputs
        base = ["run", "--manifest", str(manifest_path), "--data", str(csv_path),
                "--schema", str(schema_path)]
        assert main(base + ["--out", str(tmp_path / "t1"), "--threads", "1"]) == 0
        assert main(base + ["--out", str(tmp_path / "t8"), "--threads", "8"]) == 0
        assert (tmp_path / "t1" / "results.json").read_bytes() == \
            (tmp_path / "t8" / "results.json").read_bytes()

    def test_seed_override_changes_results(self, inputs, tmp_path):
        csv_path, schema_path, manifest_path = inputs
        base = ["run", "--manifest", str(manifest_path), "--data", str(csv_path),
                "--schema", str(schema_path)]
        main(base + ["--out", str(tmp_path / "s7"), "--seed", "7"])
        main(base + ["--out", str(tmp_path / "s8"), "--seed", "8"])
        assert (tmp_path / "s7" / "results.json").read_bytes() != \
            (tmp_path / "s8" / "results.json").read_bytes()

    def test_runtime_failure_exit_2(self, inputs, tmp_path, capsys):
        csv_path, schema_path, _ = inputs
        manifest = {"seed": 1, "treatment": {"expression": "x < 99999"},
                    "bootstrap": {"n_samples": 4}}
        mpath = tmp_path / "m.json"
        mpath.write_text(json.dumps(manifest))
        code = main(["run", "--manifest", str(mpath), "--data", str(csv_path),
                     "--schema", str(schema_path), "--out", str(tmp_path / "rf")])
        assert code == 2
        assert "assigning_treatment" in capsys.readouterr().err


class TestSensitivity:
    def test_writes_sweep_json(self, inputs, tmp_path):
        csv_path, schema_path, _ = inputs
        manifest = {"seed": 5, "treatment": {"column": "d"},
                    "sensitivity": {"enabled": True, "replicates_per_w": 1}}
        mpath = tmp_path / "m.json"
        mpath.write_text(json.dumps(manifest))
        code = main(["sensitivity", "--manifest", str(mpath), "--data", str(csv_path),
                     "--schema", str(schema_path), "--out", str(tmp_path / "sw")])
        assert code == 0
        doc = json.loads((tmp_path / "sw" / "sweep.json").read_text())
        assert [row["w"] for row in doc["summary"]] == [i / 10 for i in range(11)]


class TestUsage:
    def test_missing_subcommand_exit_64(self, capsys):
        with pytest.raises(SystemExit) as e:
            main([])
        assert e.value.code == 64
        assert "usage" in capsys.readouterr().err

    def test_unknown_flag_exit_64(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["run", "--bogus"])
        assert e.value.code == 64

    def test_env_thread_fallback(self, inputs, tmp_path, monkeypatch):
        csv_path, schema_path, manifest_path = inputs
        monkeypatch.setenv("PSMW_THREADS", "3")
        code = main(["run", "--manifest", str(manifest_path), "--data", str(csv_path),
                     "--schema", str(schema_path), "--out", str(tmp_path / "env")])
        assert code == 0
