"""Dataset files, checkpoints, config hashing and reports."""

import json
import hashlib

import numpy as np
import pytest

from selfeval import datasets
from selfeval.benchmark import build_task_suite, build_winoground_pairs, build_training_set
from selfeval.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from selfeval.conditions import vocabulary_json
from selfeval.config import RunConfig
from selfeval.denoisers import MlpDenoiser
from selfeval.errors import DataError
from selfeval.metrics import TaskResult
from selfeval.report import EvalReport, load_report, make_run_id
from selfeval.schedule import build_schedule


class TestDatasetRoundTrip:
    def test_itm_suite_round_trip(self, tmp_path):
        suites = {
            1: build_task_suite("color", 3, seed=1),
            2: build_task_suite("color", 3, seed=2),
        }
        path = tmp_path / "color.jsonl"
        datasets.write_task_file(path, suites)
        loaded = datasets.read_task_file(path)
        assert sorted(loaded) == [1, 2]
        for seed in (1, 2):
            for orig, back in zip(suites[seed], loaded[seed]):
                assert orig.example_id == back.example_id
                assert orig.candidates == back.candidates
                assert orig.correct_index == back.correct_index
                np.testing.assert_array_equal(orig.scene.image, back.scene.image)

    def test_pairs_round_trip(self, tmp_path):
        pairs = build_winoground_pairs(4, seed=3)
        path = tmp_path / "pairs.jsonl"
        datasets.write_pairs_file(path, pairs)
        loaded = datasets.read_pairs_file(path)
        for orig, back in zip(pairs, loaded):
            assert orig.pair_id == back.pair_id
            assert orig.condition_a == back.condition_a
            np.testing.assert_array_equal(orig.scene_b.image, back.scene_b.image)

    def test_training_round_trip(self, tmp_path):
        samples = build_training_set(5, seed=4)
        path = tmp_path / "train.jsonl"
        datasets.write_training_file(path, samples)
        loaded = datasets.read_training_file(path)
        for orig, back in zip(samples, loaded):
            assert orig.condition == back.condition
            np.testing.assert_allclose(orig.x0, back.x0, atol=1e-7)

    def test_byte_identical_rewrites(self, tmp_path):
        suites = {1: build_task_suite("shape", 2, seed=5)}
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        datasets.write_task_file(p1, suites)
        datasets.write_task_file(p2, suites)
        assert p1.read_bytes() == p2.read_bytes()

    def test_manifest_hashes_match_external_tool(self, tmp_path):
        suites = {1: build_task_suite("shape", 2, seed=5)}
        datasets.write_task_file(tmp_path / "tasks" / "shape.jsonl", suites)
        cfg = RunConfig()
        datasets.write_manifest(
            tmp_path, cfg.config_hash(), cfg.to_json_dict(), ["tasks/shape.jsonl"]
        )
        manifest = datasets.read_manifest(tmp_path)
        # independent recomputation with hashlib directly
        expected = hashlib.sha256(
            (tmp_path / "tasks" / "shape.jsonl").read_bytes()
        ).hexdigest()
        assert manifest["files"]["tasks/shape.jsonl"] == expected

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(DataError):
            datasets.read_manifest(tmp_path)


class TestCheckpoint:
    def _save_one(self, path):
        model = MlpDenoiser(dim=12, hidden=(8, 8), seed=3)
        sched = build_schedule("linear", 5, 0.02, 0.2)
        save_checkpoint(path, model, sched, vocabulary_json(),
                        extra={"configHash": "abc123"})
        return model, sched

    def test_round_trip_bit_exact(self, tmp_path):
        path = tmp_path / "model.ckpt"
        model, sched = self._save_one(path)
        loaded, loaded_sched, header = load_checkpoint(path)
        for p, q in zip(model.parameters(), loaded.parameters()):
            np.testing.assert_array_equal(p, q)
        assert loaded_sched.to_json_dict() == sched.to_json_dict()
        assert header["configHash"] == "abc123"
        # resave reproduces the file bytes exactly
        path2 = tmp_path / "model2.ckpt"
        save_checkpoint(path2, loaded, loaded_sched, vocabulary_json(),
                        extra={"configHash": "abc123"})
        assert path.read_bytes() == path2.read_bytes()

    def test_corrupt_magic_clean_error(self, tmp_path):
        path = tmp_path / "model.ckpt"
        self._save_one(path)
        data = bytearray(path.read_bytes())
        data[:4] = b"XXXX"
        path.write_bytes(bytes(data))
        with pytest.raises(DataError, match="magic"):
            load_checkpoint(path)

    def test_truncated_blob_rejected(self, tmp_path):
        path = tmp_path / "model.ckpt"
        self._save_one(path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) - 40])
        with pytest.raises(DataError):
            load_checkpoint(path)

    def test_magic_prefix(self, tmp_path):
        path = tmp_path / "model.ckpt"
        self._save_one(path)
        assert path.read_bytes().startswith(MAGIC)


class TestRunConfig:
    def test_hash_stable_and_sensitive(self):
        cfg = RunConfig()
        assert cfg.config_hash() == RunConfig().config_hash()
        assert cfg.config_hash() != cfg.with_overrides(master_seed=2).config_hash()

    def test_json_round_trip(self):
        cfg = RunConfig(master_seed=9, world="gaussian", suite_size=50)
        again = RunConfig.from_json_dict(cfg.to_json_dict())
        assert again == cfg
        assert again.config_hash() == cfg.config_hash()

    def test_suite_seeds_protocol(self):
        assert RunConfig(master_seed=5).suite_seeds == (5, 6, 7)

    def test_estimator_config(self):
        est = RunConfig(master_seed=3, n_trials=4, t_count=7).estimator_config()
        assert (est.n_trials, est.t_count, est.seed) == (4, 7, 3)

    def test_invalid_world(self):
        from selfeval.errors import ParameterError

        with pytest.raises(ParameterError):
            RunConfig(world="real")


class TestReport:
    def _report(self):
        tasks = [
            TaskResult.from_accuracies("color", [85.2, 84.9, 85.4], 25.0, [1, 2, 3]),
            TaskResult.from_accuracies("count", [22.8], 25.0, [1]),
        ]
        return EvalReport(
            run_id=make_run_id("deadbeef", timestamp="20260101T000000.000000Z"),
            config_hash="deadbeef",
            tasks=tasks,
            winoground={"imageScore": 7.25, "textScore": 22.75, "groupScore": 3.5},
        )

    def test_paper_fixture_round_trip(self, tmp_path):
        """Table-2-style image/text scores survive serialization exactly."""
        report = self._report()
        path = report.write(tmp_path)
        loaded = load_report(path)
        assert loaded.winoground["imageScore"] == 7.25
        assert loaded.winoground["textScore"] == 22.75
        assert loaded.config_hash == "deadbeef"

    def test_csv_mirrors_written(self, tmp_path):
        report = self._report()
        report.write(tmp_path)
        tasks_csv = (tmp_path / "tasks.csv").read_text()
        assert "85.17" in tasks_csv  # mean of 85.2/84.9/85.4 to 2 decimals
        assert (tmp_path / "winoground.csv").exists()
        chart = json.loads((tmp_path / "chartdata.json").read_text())
        assert chart["x"] == ["color", "count"]
        assert chart["y"] == [60.17, -2.2]

    def test_two_decimal_formatting(self, tmp_path):
        report = self._report()
        obj = report.to_json_dict()
        assert obj["tasks"][0]["accuracyMeanPct"] == 85.17
        assert obj["tasks"][1]["deltaPct"] == -2.2

    def test_deterministic_serialization(self, tmp_path):
        a = self._report().to_json()
        b = self._report().to_json()
        assert a == b

    def test_votes_and_schedule_round_trip(self, tmp_path):
        from selfeval.metrics import VoteTally
        from selfeval.schedule import build_schedule

        report = self._report()
        report.votes = VoteTally(only_a=3, only_b=1, both=10, neither=2).to_json_dict()
        report.schedule = build_schedule("linear", 4, 0.1, 0.2).to_json_dict()
        path = report.write(tmp_path)
        loaded = load_report(path)
        assert loaded.votes == {"onlyA": 3, "onlyB": 1, "both": 10, "neither": 2}
        assert loaded.schedule["T"] == 4
        assert len(loaded.schedule["betas"]) == 4
