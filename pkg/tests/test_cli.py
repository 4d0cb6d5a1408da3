"""End-to-end CLI flows on tiny configurations."""

import json

import pytest

from selfeval.cli import main
from selfeval.datasets import read_manifest, read_task_file


@pytest.fixture(scope="module")
def gaussian_data(tmp_path_factory):
    out = tmp_path_factory.mktemp("gdata")
    rc = main([
        "generate", "--out", str(out), "--world", "gaussian", "--seed", "11",
        "--suite-size", "6", "--winoground-size", "4", "--train-size", "5",
    ])
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def micro_data(tmp_path_factory):
    out = tmp_path_factory.mktemp("mdata")
    rc = main([
        "generate", "--out", str(out), "--seed", "7",
        "--suite-size", "4", "--winoground-size", "3", "--train-size", "40",
    ])
    assert rc == 0
    return out


class TestGenerate:
    def test_emits_expected_files(self, micro_data):
        names = {p.relative_to(micro_data).as_posix() for p in micro_data.rglob("*") if p.is_file()}
        expected_tasks = {
            f"tasks/{t}.jsonl"
            for t in ("attributeBinding", "color", "count", "shape", "spatial",
                      "textCorruption")
        }
        assert expected_tasks <= names
        assert "winoground.jsonl" in names
        assert "train.jsonl" in names
        assert "manifest.json" in names

    def test_three_suite_seeds_per_task(self, micro_data):
        suites = read_task_file(micro_data / "tasks" / "color.jsonl")
        assert sorted(suites) == [7, 8, 9]
        assert all(len(v) == 4 for v in suites.values())

    def test_regeneration_byte_identical(self, tmp_path):
        args = ["generate", "--seed", "3", "--suite-size", "2",
                "--winoground-size", "2", "--train-size", "2"]
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        for rel in ["tasks/color.jsonl", "winoground.jsonl", "train.jsonl",
                    "manifest.json"]:
            assert (a / rel).read_bytes() == (b / rel).read_bytes()

    def test_manifest_hash_consistent(self, micro_data):
        manifest = read_manifest(micro_data)
        from selfeval.config import RunConfig

        cfg = RunConfig.from_json_dict(manifest["config"])
        assert cfg.config_hash() == manifest["configHash"]


@pytest.fixture(scope="module")
def checkpoint(micro_data, tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "model.ckpt"
    rc = main([
        "train", "--data", str(micro_data), "--out", str(path),
        "--epochs", "2",
    ])
    assert rc == 0
    return path


class TestTrainEvaluate:
    def test_training_curve_written(self, checkpoint):
        curve = checkpoint.with_suffix(".curve.csv").read_text().splitlines()
        assert curve[0] == "epoch,meanEpsMse"
        assert len(curve) == 4  # header + initial + 2 epochs

    def test_resume_zero_epochs_identical(self, micro_data, checkpoint, tmp_path):
        out = tmp_path / "resumed.ckpt"
        rc = main([
            "train", "--data", str(micro_data), "--out", str(out),
            "--epochs", "0", "--resume", str(checkpoint),
        ])
        assert rc == 0
        assert out.read_bytes() == checkpoint.read_bytes()

    def test_corrupt_checkpoint_data_error(self, micro_data, checkpoint, tmp_path):
        bad = tmp_path / "bad.ckpt"
        data = bytearray(checkpoint.read_bytes())
        data[:4] = b"ZZZZ"
        bad.write_bytes(bytes(data))
        rc = main([
            "evaluate", "--data", str(micro_data), "--out", str(tmp_path / "r"),
            "--checkpoint", str(bad), "--trials", "1", "--timesteps", "4",
        ])
        assert rc == 2

    def test_evaluate_with_checkpoint(self, micro_data, checkpoint, tmp_path):
        out = tmp_path / "report"
        rc = main([
            "evaluate", "--data", str(micro_data), "--out", str(out),
            "--checkpoint", str(checkpoint), "--trials", "2",
            "--timesteps", "6", "--workers", "2",
        ])
        assert rc == 0
        report = json.loads((out / "report.json").read_text())
        assert len(report["tasks"]) == 6
        assert "winoground" in report
        assert (out / "estimates.jsonl").exists()
        assert (out / "tasks.csv").exists()

    def test_dimension_mismatch_names_field(self, gaussian_data, checkpoint, tmp_path, capsys):
        rc = main([
            "evaluate", "--data", str(gaussian_data), "--out", str(tmp_path / "x"),
            "--checkpoint", str(checkpoint), "--force",
        ])
        assert rc == 2
        assert "dim" in capsys.readouterr().err

    def test_config_hash_mismatch_requires_force(self, micro_data, tmp_path, checkpoint):
        # retrain against a differently-seeded dataset -> hash mismatch
        other = tmp_path / "other"
        main(["generate", "--out", str(other), "--seed", "99",
              "--suite-size", "2", "--winoground-size", "2", "--train-size", "30"])
        rc = main([
            "evaluate", "--data", str(other), "--out", str(tmp_path / "r2"),
            "--checkpoint", str(checkpoint), "--trials", "1", "--timesteps", "4",
        ])
        assert rc == 2
        rc_forced = main([
            "evaluate", "--data", str(other), "--out", str(tmp_path / "r3"),
            "--checkpoint", str(checkpoint), "--trials", "1", "--timesteps", "4",
            "--force",
        ])
        assert rc_forced == 0


class TestOracleEvaluate:
    def test_oracle_run(self, gaussian_data, tmp_path):
        out = tmp_path / "oracle-report"
        rc = main([
            "evaluate", "--data", str(gaussian_data), "--out", str(out),
            "--oracle", "--trials", "3", "--timesteps", "8",
            "--aggregation", "logSumExp",
        ])
        assert rc == 0
        report = json.loads((out / "report.json").read_text())
        for task in report["tasks"]:
            assert task["deltaPct"] >= 30.0

    def test_oracle_requires_gaussian_world(self, micro_data, tmp_path):
        rc = main([
            "evaluate", "--data", str(micro_data), "--out", str(tmp_path / "y"),
            "--oracle",
        ])
        assert rc == 2

    def test_zero_baseline_near_chance(self, gaussian_data, tmp_path):
        out = tmp_path / "zero-report"
        rc = main([
            "evaluate", "--data", str(gaussian_data), "--out", str(out),
            "--zero", "--trials", "1", "--timesteps", "4",
        ])
        assert rc == 0

    def test_winoground_subcommand(self, gaussian_data, capsys):
        rc = main([
            "winoground", "--data", str(gaussian_data), "--oracle",
            "--trials", "2", "--timesteps", "6", "--scorer", "elbo",
        ])
        assert rc == 0
        assert "imageScore" in capsys.readouterr().out

    def test_ablate_subcommand(self, gaussian_data, tmp_path):
        out = tmp_path / "ablate"
        rc = main([
            "ablate", "--data", str(gaussian_data), "--out", str(out),
            "--oracle", "--axis", "N", "--values", "1,2",
            "--timesteps", "6", "--trials", "2",
        ])
        assert rc == 0
        rows = json.loads((out / "report.json").read_text())["ablations"]
        assert {r["value"] for r in rows} == {1, 2}
        assert (out / "ablations.csv").exists()

    def test_report_subcommand(self, gaussian_data, tmp_path, capsys):
        out = tmp_path / "rep"
        main([
            "evaluate", "--data", str(gaussian_data), "--out", str(out),
            "--oracle", "--trials", "1", "--timesteps", "4",
        ])
        capsys.readouterr()
        rc = main(["report", "--report", str(out / "report.json")])
        assert rc == 0
        assert "configHash" in capsys.readouterr().out


class TestUsageErrors:
    def test_unknown_subcommand_exit_1(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1

    def test_workers_env_default(self, monkeypatch):
        from selfeval.cli import build_parser

        monkeypatch.setenv("SELFEVAL_WORKERS", "6")
        args = build_parser().parse_args(["evaluate", "--data", "d", "--out", "o"])
        assert args.workers == 6
        monkeypatch.setenv("SELFEVAL_WORKERS", "3")
        args = build_parser().parse_args(
            ["evaluate", "--data", "d", "--out", "o", "--workers", "2"]
        )
        assert args.workers == 2

    def test_missing_model_source_exit_1(self, gaussian_data, tmp_path):
        rc = main([
            "evaluate", "--data", str(gaussian_data), "--out", str(tmp_path / "z"),
        ])
        assert rc == 1

    def test_missing_data_dir_exit_2(self, tmp_path):
        rc = main([
            "evaluate", "--data", str(tmp_path / "nope"), "--out",
            str(tmp_path / "w"), "--oracle",
        ])
        assert rc == 2
