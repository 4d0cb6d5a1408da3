"""Evaluation report: JSON schema, CSV mirrors and bar-chart data.

All percentages are formatted to two decimals; apart from the ``runId``
timestamp the serialized report is a pure function of the inputs.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .metrics import TaskResult


def make_run_id(config_hash: str, timestamp: str | None = None) -> str:
    if timestamp is None:
        timestamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S.%fZ")
    return f"{timestamp}-{config_hash[:8]}"


def _round2(value: float) -> float:
    return round(float(value), 2)


@dataclass
class EvalReport:
    run_id: str
    config_hash: str
    tasks: list = field(default_factory=list)
    winoground: dict | None = None
    votes: dict | None = None
    ablations: list | None = None
    schedule: dict | None = None

    def to_json_dict(self) -> dict:
        out = {
            "runId": self.run_id,
            "configHash": self.config_hash,
            "tasks": [t.to_json_dict() for t in self.tasks],
        }
        if self.schedule is not None:
            out["schedule"] = self.schedule
        if self.winoground is not None:
            out["winoground"] = {k: _round2(v) for k, v in sorted(self.winoground.items())}
        if self.votes is not None:
            out["votes"] = self.votes
        if self.ablations is not None:
            out["ablations"] = self.ablations
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json_dict(cls, obj: dict) -> "EvalReport":
        tasks = [
            TaskResult(
                task=t["task"],
                accuracy_mean_pct=t["accuracyMeanPct"],
                accuracy_std_pct=t["accuracyStdPct"],
                chance_pct=t["chancePct"],
                delta_pct=t["accuracyMeanPct"] - t["chancePct"],
                seeds=tuple(t["seeds"]),
            )
            for t in obj.get("tasks", [])
        ]
        return cls(
            run_id=obj["runId"],
            config_hash=obj["configHash"],
            tasks=tasks,
            winoground=obj.get("winoground"),
            votes=obj.get("votes"),
            ablations=obj.get("ablations"),
            schedule=obj.get("schedule"),
        )

    def write(self, out_dir) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        report_path = out_dir / "report.json"
        report_path.write_text(self.to_json(), encoding="utf-8")
        self._write_tasks_csv(out_dir / "tasks.csv")
        if self.winoground is not None:
            self._write_winoground_csv(out_dir / "winoground.csv")
        if self.ablations is not None:
            self._write_ablations_csv(out_dir / "ablations.csv")
        self._write_chart_data(out_dir / "chartdata.json")
        return report_path

    def _write_tasks_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["task", "accuracyMeanPct", "accuracyStdPct", "chancePct", "deltaPct"]
            )
            for t in self.tasks:
                d = t.to_json_dict()
                writer.writerow(
                    [
                        d["task"],
                        f"{d['accuracyMeanPct']:.2f}",
                        f"{d['accuracyStdPct']:.2f}",
                        f"{d['chancePct']:.2f}",
                        f"{d['deltaPct']:.2f}",
                    ]
                )

    def _write_winoground_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["metric", "valuePct"])
            for key in sorted(self.winoground):
                writer.writerow([key, f"{self.winoground[key]:.2f}"])

    def _write_ablations_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["axis", "value", "task", "accuracyMeanPct", "deltaPct"])
            for row in self.ablations:
                writer.writerow(
                    [
                        row["axis"],
                        row["value"],
                        row["task"],
                        f"{row['accuracyMeanPct']:.2f}",
                        f"{row['deltaPct']:.2f}",
                    ]
                )

    def _write_chart_data(self, path) -> None:
        data = {
            "x": [t.task for t in self.tasks],
            "y": [_round2(t.delta_pct) for t in self.tasks],
        }
        path.write_text(
            json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def load_report(path) -> EvalReport:
    with open(path, "r", encoding="utf-8") as fh:
        return EvalReport.from_json_dict(json.load(fh))
