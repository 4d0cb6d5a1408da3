"""Run configuration with a canonical, platform-stable hash.

Every artifact (dataset, checkpoint, report) embeds ``configHash`` so
mismatched inputs are caught instead of silently mixed.  The hash covers
the semantic fields only; execution details like worker count and output
paths stay outside it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace

from .benchmark import TASK_NAMES
from .errors import ParameterError
from .estimator import AGGREGATIONS, LATENT_MODES, EstimatorConfig
from .schedule import NoiseSchedule, build_schedule


@dataclass(frozen=True)
class RunConfig:
    master_seed: int = 1
    # noise schedule
    schedule_kind: str = "linear"
    beta_min: float = 1e-4
    beta_max: float = 0.06
    # estimator
    n_trials: int = 10
    t_count: int = 100
    latent_mode: str = "forwardAnchored"
    aggregation: str = "jensenSum"
    # benchmark
    world: str = "micro"
    image_size: int = 16
    suite_size: int = 1000
    suite_repeats: int = 3
    tasks: tuple = TASK_NAMES
    winoground_size: int = 200
    train_size: int = 9000
    # oracle world
    oracle_dim: int = 24
    oracle_scale: float = 6.0
    oracle_class_var: float = 1.0
    # trainer
    epochs: int = 150
    lr: float = 0.03
    momentum: float = 0.9
    batch_size: int = 128
    hidden: tuple = (256, 256)

    def __post_init__(self):
        if self.world not in ("micro", "gaussian"):
            raise ParameterError("world must be 'micro' or 'gaussian'")
        if self.latent_mode not in LATENT_MODES:
            raise ParameterError(f"latent_mode must be one of {LATENT_MODES}")
        if self.aggregation not in AGGREGATIONS:
            raise ParameterError(f"aggregation must be one of {AGGREGATIONS}")
        unknown = [t for t in self.tasks if t not in TASK_NAMES]
        if unknown:
            raise ParameterError(f"unknown tasks: {unknown}")
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def suite_seeds(self) -> tuple:
        """Repeat-protocol seeds {s, s+1, s+2} derived from the master seed."""
        return tuple(self.master_seed + k for k in range(self.suite_repeats))

    def schedule(self) -> NoiseSchedule:
        return build_schedule(
            self.schedule_kind, self.t_count, self.beta_min, self.beta_max
        )

    def estimator_config(self, seed: int | None = None) -> EstimatorConfig:
        return EstimatorConfig(
            n_trials=self.n_trials,
            t_count=self.t_count,
            seed=self.master_seed if seed is None else seed,
            latent_mode=self.latent_mode,
            aggregation=self.aggregation,
        )

    def to_json_dict(self) -> dict:
        return {
            "masterSeed": self.master_seed,
            "schedule": {
                "kind": self.schedule_kind,
                "betaMin": self.beta_min,
                "betaMax": self.beta_max,
                "T": self.t_count,
            },
            "estimator": {
                "N": self.n_trials,
                "T": self.t_count,
                "latentMode": self.latent_mode,
                "aggregation": self.aggregation,
            },
            "benchmark": {
                "world": self.world,
                "imageSize": self.image_size,
                "suiteSize": self.suite_size,
                "suiteRepeats": self.suite_repeats,
                "tasks": list(self.tasks),
                "winogroundSize": self.winoground_size,
                "trainSize": self.train_size,
            },
            "oracleWorld": {
                "dim": self.oracle_dim,
                "scale": self.oracle_scale,
                "classVar": self.oracle_class_var,
            },
            "trainer": {
                "epochs": self.epochs,
                "lr": self.lr,
                "momentum": self.momentum,
                "batchSize": self.batch_size,
                "hidden": list(self.hidden),
            },
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "RunConfig":
        sched = obj["schedule"]
        est = obj["estimator"]
        bench = obj["benchmark"]
        world = obj["oracleWorld"]
        trainer = obj["trainer"]
        return cls(
            master_seed=obj["masterSeed"],
            schedule_kind=sched["kind"],
            beta_min=sched["betaMin"],
            beta_max=sched["betaMax"],
            t_count=sched["T"],
            n_trials=est["N"],
            latent_mode=est["latentMode"],
            aggregation=est["aggregation"],
            world=bench["world"],
            image_size=bench["imageSize"],
            suite_size=bench["suiteSize"],
            suite_repeats=bench["suiteRepeats"],
            tasks=tuple(bench["tasks"]),
            winoground_size=bench["winogroundSize"],
            train_size=bench["trainSize"],
            oracle_dim=world["dim"],
            oracle_scale=world["scale"],
            oracle_class_var=world["classVar"],
            epochs=trainer["epochs"],
            lr=trainer["lr"],
            momentum=trainer["momentum"],
            batch_size=trainer["batchSize"],
            hidden=tuple(trainer["hidden"]),
        )

    def canonical_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()[:16]

    def with_overrides(self, **kwargs) -> "RunConfig":
        return replace(self, **kwargs)
