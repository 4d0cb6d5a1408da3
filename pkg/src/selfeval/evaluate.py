"""Suite evaluation engine: classification runs, reports, ablations.

Work is partitioned over examples; each example's computation is a pure
function of (example, model, schedule, config), with the noise streams
keyed by a seed derived from the master seed and the example id.  BLAS
threading is pinned inside the per-chunk worker, so a run with N workers
is bit-identical to the serial run.
"""

from __future__ import annotations

import hashlib
import multiprocessing as mp
from dataclasses import dataclass, replace

import numpy as np
from threadpoolctl import threadpool_limits

from .benchmark import TASKS
from .errors import ParameterError
from .estimator import EstimatorConfig, classify, image_text_scores
from .metrics import TaskResult, accuracy
from .rng import derive_seed
from .schedule import NoiseSchedule, build_schedule


@dataclass(frozen=True)
class ExampleResult:
    """Outcome of classifying one example."""

    example_id: str
    task: str
    suite_seed: int
    predicted_index: int
    correct_index: int
    candidate_ids: tuple
    log_likelihoods: tuple
    per_trial_logs: tuple  # (candidates, trials)
    seed: int

    @property
    def is_correct(self) -> bool:
        return self.predicted_index == self.correct_index


def example_seed(base_seed: int, example_id: str) -> int:
    """Stable per-example stream seed mixing the run seed and the id."""
    digest = hashlib.sha256(example_id.encode("utf-8")).digest()
    return derive_seed(base_seed, int.from_bytes(digest[:8], "little"), 0)


def _classify_one(example, model, sched, cfg: EstimatorConfig, suite_seed: int):
    ex_cfg = replace(cfg, seed=example_seed(cfg.seed, example.example_id))
    posterior = classify(
        example.scene.flat_x0(), list(example.candidates), model, sched, ex_cfg
    )
    return ExampleResult(
        example_id=example.example_id,
        task=example.task,
        suite_seed=suite_seed,
        predicted_index=posterior.argmax_index,
        correct_index=example.correct_index,
        candidate_ids=posterior.candidate_ids,
        log_likelihoods=tuple(float(v) for v in posterior.log_likelihoods),
        per_trial_logs=tuple(
            tuple(float(v) for v in est.per_trial_logs) for est in posterior.estimates
        ),
        seed=ex_cfg.seed,
    )


def _evaluate_chunk(args):
    examples, model, sched, cfg, suite_seed = args
    with threadpool_limits(limits=1):
        return [_classify_one(ex, model, sched, cfg, suite_seed) for ex in examples]


def _run_chunks(chunk_args, workers: int):
    if workers <= 1 or len(chunk_args) <= 1:
        return [_evaluate_chunk(a) for a in chunk_args]
    # Pin BLAS threads while forking so worker processes start cleanly.
    with threadpool_limits(limits=1):
        with mp.get_context("fork").Pool(processes=workers) as pool:
            return pool.map(_evaluate_chunk, chunk_args)


def evaluate_examples(
    examples,
    model,
    sched: NoiseSchedule,
    cfg: EstimatorConfig,
    workers: int = 1,
    suite_seed: int = 0,
):
    """Classify every example; results follow the input order."""
    examples = list(examples)
    if not examples:
        return []
    n_chunks = max(1, min(len(examples), workers if workers > 1 else 1))
    bounds = np.linspace(0, len(examples), n_chunks + 1).astype(int)
    chunk_args = [
        (examples[lo:hi], model, sched, cfg, suite_seed)
        for lo, hi in zip(bounds[:-1], bounds[1:])
        if hi > lo
    ]
    results = []
    for chunk in _run_chunks(chunk_args, workers):
        results.extend(chunk)
    return results


def evaluate_task_suites(
    suites: dict,
    sched: NoiseSchedule,
    cfg: EstimatorConfig,
    workers: int = 1,
):
    """Evaluate ``suites[task][suite_seed] = (examples, model)`` into TaskResults.

    Returns (task_results, all_example_results); tasks are reported in
    deterministic (sorted) order.
    """
    task_results = []
    all_results = []
    for task in sorted(suites):
        per_seed_acc = []
        seeds = sorted(suites[task])
        for suite_seed in seeds:
            examples, model = suites[task][suite_seed]
            results = evaluate_examples(
                examples, model, sched, cfg, workers=workers, suite_seed=suite_seed
            )
            all_results.extend(results)
            per_seed_acc.append(
                accuracy(
                    [r.predicted_index for r in results],
                    [r.correct_index for r in results],
                )
            )
        task_results.append(
            TaskResult.from_accuracies(
                task, per_seed_acc, TASKS[task].chance_pct, seeds
            )
        )
    return task_results, all_results


def estimate_records(results, config_hash: str):
    """Flatten example results into per-(example, candidate) JSONL records."""
    records = []
    for r in results:
        for cand_id, loglik, trials in zip(
            r.candidate_ids, r.log_likelihoods, r.per_trial_logs
        ):
            records.append(
                {
                    "exampleId": r.example_id,
                    "candidateId": cand_id,
                    "logLikelihood": loglik,
                    "perTrialLogs": list(trials),
                    "seed": r.seed,
                    "configHash": config_hash,
                }
            )
    return records


def winoground_eval(
    pairs,
    model,
    sched: NoiseSchedule,
    cfg: EstimatorConfig,
    scorer: str = "selfeval",
) -> dict:
    """Score minimal-contrast pairs; seeds derive from the pair ids."""
    tuples = []
    for pair in pairs:
        seed_a = example_seed(cfg.seed, pair.pair_id + "/a")
        seed_b = example_seed(cfg.seed, pair.pair_id + "/b")
        tuples.append(
            (
                pair.scene_a.flat_x0(),
                pair.scene_b.flat_x0(),
                pair.condition_a,
                pair.condition_b,
                seed_a,
                seed_b,
            )
        )
    with threadpool_limits(limits=1):
        return image_text_scores(tuples, scorer, model, sched, cfg)


ABLATION_AXES = ("T", "N", "seed")


def ablation_sweep(
    axis: str,
    values,
    suites: dict,
    cfg: EstimatorConfig,
    schedule_params: dict | None = None,
    workers: int = 1,
):
    """Re-evaluate the suites for each value of T, N, or seed.

    Returns rows {axis, value, task, accuracyMeanPct, accuracyStdPct,
    deltaPct} in sweep order.  The T axis rebuilds the schedule at each
    length using ``schedule_params`` (kind, betaMin, betaMax).
    """
    if axis not in ABLATION_AXES:
        raise ParameterError(f"axis must be one of {ABLATION_AXES}")
    values = list(values)
    if not values:
        raise ParameterError("values must be non-empty")
    params = schedule_params or {"kind": "linear", "betaMin": 1e-4, "betaMax": 0.06}
    rows = []
    for value in values:
        if axis == "T":
            run_cfg = replace(cfg, t_count=int(value))
        elif axis == "N":
            run_cfg = replace(cfg, n_trials=int(value))
        else:
            run_cfg = replace(cfg, seed=int(value))
        sched = build_schedule(
            params["kind"], run_cfg.t_count, params["betaMin"], params["betaMax"]
        )
        task_results, _ = evaluate_task_suites(suites, sched, run_cfg, workers=workers)
        for tr in task_results:
            rows.append(
                {
                    "axis": axis,
                    "value": value,
                    "task": tr.task,
                    "accuracyMeanPct": round(tr.accuracy_mean_pct, 2),
                    "accuracyStdPct": round(tr.accuracy_std_pct, 2),
                    "deltaPct": round(tr.delta_pct, 2),
                }
            )
    return rows
