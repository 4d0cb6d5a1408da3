"""JSON-lines dataset files and the run manifest.

Records keep a stable field order and encode arrays as base64 of
little-endian float32 bytes, so files hash reproducibly and round-trip
without loss.
"""

from __future__ import annotations

import base64
import hashlib
import json
from pathlib import Path

import numpy as np

from .benchmark import ItmExample, MicroScene, WinogroundPair
from .conditions import Condition
from .errors import DataError
from .training import ConditionedSample


def _encode_array(arr: np.ndarray) -> str:
    return base64.b64encode(
        np.ascontiguousarray(arr, dtype="<f4").tobytes()
    ).decode("ascii")


def _decode_array(text: str, shape) -> np.ndarray:
    data = np.frombuffer(base64.b64decode(text), dtype="<f4")
    return data.reshape(tuple(shape))


def write_jsonl(path, records) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")


def read_jsonl(path):
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


# -- ITM suites -------------------------------------------------------------


def itm_to_record(example: ItmExample, suite_seed: int) -> dict:
    return {
        "id": example.example_id,
        "task": example.task,
        "suiteSeed": suite_seed,
        "conditions": [c.to_json_dict() for c in example.candidates],
        "correctIndex": example.correct_index,
        "image": _encode_array(example.scene.image),
        "imageShape": list(example.scene.image.shape),
        "renderSeed": example.scene.render_seed,
    }


def record_to_itm(record: dict) -> tuple[ItmExample, int]:
    candidates = tuple(Condition.from_json_dict(c) for c in record["conditions"])
    correct = candidates[record["correctIndex"]]
    scene = MicroScene(
        condition=correct,
        image=_decode_array(record["image"], record["imageShape"]),
        render_seed=record["renderSeed"],
    )
    example = ItmExample(
        example_id=record["id"],
        task=record["task"],
        scene=scene,
        candidates=candidates,
        correct_index=record["correctIndex"],
    )
    return example, record["suiteSeed"]


def write_task_file(path, suites: dict) -> None:
    """``suites`` maps suite seed -> list of examples (one task per file)."""
    records = []
    for seed in sorted(suites):
        records.extend(itm_to_record(ex, seed) for ex in suites[seed])
    write_jsonl(path, records)


def read_task_file(path) -> dict:
    suites: dict = {}
    for record in read_jsonl(path):
        example, seed = record_to_itm(record)
        suites.setdefault(seed, []).append(example)
    return suites


# -- Winoground pairs -------------------------------------------------------


def pair_to_record(pair: WinogroundPair) -> dict:
    return {
        "id": pair.pair_id,
        "conditionA": pair.condition_a.to_json_dict(),
        "conditionB": pair.condition_b.to_json_dict(),
        "imageA": _encode_array(pair.scene_a.image),
        "imageB": _encode_array(pair.scene_b.image),
        "imageShape": list(pair.scene_a.image.shape),
        "renderSeedA": pair.scene_a.render_seed,
        "renderSeedB": pair.scene_b.render_seed,
    }


def record_to_pair(record: dict) -> WinogroundPair:
    shape = record["imageShape"]
    return WinogroundPair(
        pair_id=record["id"],
        scene_a=MicroScene(
            condition=Condition.from_json_dict(record["conditionA"]),
            image=_decode_array(record["imageA"], shape),
            render_seed=record["renderSeedA"],
        ),
        scene_b=MicroScene(
            condition=Condition.from_json_dict(record["conditionB"]),
            image=_decode_array(record["imageB"], shape),
            render_seed=record["renderSeedB"],
        ),
    )


def write_pairs_file(path, pairs) -> None:
    write_jsonl(path, [pair_to_record(p) for p in pairs])


def read_pairs_file(path):
    return [record_to_pair(r) for r in read_jsonl(path)]


# -- Training samples -------------------------------------------------------


def sample_to_record(sample: ConditionedSample, sample_id: str) -> dict:
    return {
        "id": sample_id,
        "condition": sample.condition.to_json_dict(),
        "x0": _encode_array(sample.x0),
        "dim": int(sample.x0.size),
    }


def record_to_sample(record: dict) -> ConditionedSample:
    return ConditionedSample(
        x0=_decode_array(record["x0"], (record["dim"],)).astype(np.float64),
        condition=Condition.from_json_dict(record["condition"]),
    )


def write_training_file(path, samples) -> None:
    write_jsonl(
        path,
        [sample_to_record(s, f"train-{i:06d}") for i, s in enumerate(samples)],
    )


def read_training_file(path):
    return [record_to_sample(r) for r in read_jsonl(path)]


# -- Manifest ----------------------------------------------------------------


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir, config_hash: str, config_json: dict, files) -> Path:
    out_dir = Path(out_dir)
    manifest = {
        "configHash": config_hash,
        "config": config_json,
        "files": {
            str(name): sha256_file(out_dir / name) for name in sorted(map(str, files))
        },
    }
    path = out_dir / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_manifest(out_dir) -> dict:
    path = Path(out_dir) / "manifest.json"
    if not path.exists():
        raise DataError(f"missing manifest: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
