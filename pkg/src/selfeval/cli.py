"""``selfeval`` command line: generate, train, evaluate, winoground, ablate, report.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

from . import benchmark, datasets, oracle
from .checkpoint import load_checkpoint, save_checkpoint
from .conditions import vocabulary_json
from .config import RunConfig
from .denoisers import ZeroEpsDenoiser
from .errors import DataError, NumericalError, ParameterError, SelfEvalError
from .evaluate import (
    ablation_sweep,
    estimate_records,
    evaluate_task_suites,
    winoground_eval,
)
from .report import EvalReport, load_report, make_run_id
from .rng import derive_seed
from .training import train_mlp


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _workers_default() -> int:
    env = os.environ.get("SELFEVAL_WORKERS")
    return int(env) if env else 1


def _add_estimator_flags(p):
    p.add_argument("--trials", type=int, help="Monte-Carlo trials N")
    p.add_argument("--timesteps", type=int, help="diffusion steps T")
    p.add_argument("--seed", type=int, help="estimator master seed")
    p.add_argument("--latent-mode", choices=["forwardAnchored", "reverseAnchored"])
    p.add_argument("--aggregation", choices=["jensenSum", "logSumExp"])


def _effective_config(cfg: RunConfig, args) -> RunConfig:
    overrides = {}
    if getattr(args, "trials", None) is not None:
        overrides["n_trials"] = args.trials
    if getattr(args, "timesteps", None) is not None:
        overrides["t_count"] = args.timesteps
    if getattr(args, "seed", None) is not None:
        overrides["master_seed"] = args.seed
    if getattr(args, "latent_mode", None) is not None:
        overrides["latent_mode"] = args.latent_mode
    if getattr(args, "aggregation", None) is not None:
        overrides["aggregation"] = args.aggregation
    return cfg.with_overrides(**overrides) if overrides else cfg


def _load_data_config(data_dir) -> tuple[RunConfig, dict]:
    manifest = datasets.read_manifest(data_dir)
    cfg = RunConfig.from_json_dict(manifest["config"])
    if cfg.config_hash() != manifest["configHash"]:
        raise DataError("manifest configHash does not match its config block")
    return cfg, manifest


def _gaussian_world(cfg: RunConfig):
    return oracle.build_gaussian_world(
        dim=cfg.oracle_dim,
        scale=cfg.oracle_scale,
        class_var=cfg.oracle_class_var,
        seed=cfg.master_seed,
    )


def _load_suites(data_dir, cfg: RunConfig, model_source, checkpoint_model):
    """Build ``suites[task][seed] = (examples, model)`` from dataset files."""
    suites = {}
    world = _gaussian_world(cfg) if model_source == "oracle" else None
    for task in cfg.tasks:
        path = Path(data_dir) / "tasks" / f"{task}.jsonl"
        if not path.exists():
            raise DataError(f"missing task file: {path}")
        by_seed = datasets.read_task_file(path)
        suites[task] = {}
        for seed, examples in by_seed.items():
            dim = examples[0].scene.flat_x0().size
            if model_source == "checkpoint":
                if checkpoint_model.dim != dim:
                    raise DataError(
                        f"dimension mismatch: checkpoint dim {checkpoint_model.dim} "
                        f"vs dataset dim {dim} (field: arch.dim)"
                    )
                model = checkpoint_model
            elif model_source == "oracle":
                conditions = [c for ex in examples for c in ex.candidates]
                model = world.class_model(conditions)
            else:
                model = ZeroEpsDenoiser(dim)
            suites[task][seed] = (examples, model)
    return suites


def _model_source(args):
    picked = [
        name
        for name, flag in (
            ("checkpoint", getattr(args, "checkpoint", None) is not None),
            ("oracle", getattr(args, "oracle", False)),
            ("zero", getattr(args, "zero", False)),
        )
        if flag
    ]
    if len(picked) != 1:
        raise ParameterError(
            "exactly one of --checkpoint, --oracle, --zero must be given"
        )
    return picked[0]


def _load_model(args, cfg: RunConfig, data_hash: str, force: bool):
    source = _model_source(args)
    if source == "checkpoint":
        model, _, header = load_checkpoint(args.checkpoint)
        ckpt_hash = header.get("configHash")
        if ckpt_hash != data_hash and not force:
            raise DataError(
                f"checkpoint configHash {ckpt_hash} does not match dataset "
                f"configHash {data_hash}; pass --force to override"
            )
        return source, model
    if source == "oracle" and cfg.world != "gaussian":
        raise DataError("--oracle requires datasets generated with world=gaussian")
    return source, None


# -- subcommands -------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = RunConfig(
        master_seed=args.seed,
        world=args.world,
        image_size=args.image_size,
        suite_size=args.suite_size,
        winoground_size=args.winoground_size,
        train_size=args.train_size,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    world = _gaussian_world(cfg) if cfg.world == "gaussian" else None
    for task in cfg.tasks:
        by_seed = {}
        for seed in cfg.suite_seeds:
            if cfg.world == "micro":
                by_seed[seed] = benchmark.build_task_suite(
                    task, cfg.suite_size, seed, cfg.image_size
                )
            else:
                examples, _ = oracle.build_gaussian_task_suite(
                    task, cfg.suite_size, seed, world
                )
                by_seed[seed] = examples
        rel = Path("tasks") / f"{task}.jsonl"
        datasets.write_task_file(out / rel, by_seed)
        files.append(rel)
    if cfg.world == "micro":
        pairs = benchmark.build_winoground_pairs(
            cfg.winoground_size, cfg.master_seed, cfg.image_size
        )
    else:
        pairs, _ = oracle.build_gaussian_pairs(cfg.winoground_size, cfg.master_seed, world)
    datasets.write_pairs_file(out / "winoground.jsonl", pairs)
    files.append("winoground.jsonl")
    if cfg.world == "micro":
        train_seed = derive_seed(cfg.master_seed, 0, 30)
        samples = benchmark.build_training_set(cfg.train_size, train_seed, cfg.image_size)
        datasets.write_training_file(out / "train.jsonl", samples)
        files.append("train.jsonl")
    datasets.write_manifest(out, cfg.config_hash(), cfg.to_json_dict(), files)
    print(f"wrote {len(files)} dataset files + manifest to {out}")
    return 0


def cmd_train(args) -> int:
    cfg, manifest = _load_data_config(args.data)
    train_path = Path(args.data) / "train.jsonl"
    if not train_path.exists():
        raise DataError(f"missing training dataset: {train_path}")
    samples = datasets.read_training_file(train_path)
    if args.epochs is not None:
        cfg = cfg.with_overrides(epochs=args.epochs)
    if args.lr is not None:
        cfg = cfg.with_overrides(lr=args.lr)
    sched = cfg.schedule()
    resume_model = None
    if args.resume:
        resume_model, resume_sched, _ = load_checkpoint(args.resume)
        if resume_sched.to_json_dict() != sched.to_json_dict():
            raise DataError("resume checkpoint was trained with a different schedule")
    model, log = train_mlp(
        samples,
        sched,
        epochs=cfg.epochs,
        lr=cfg.lr,
        seed=derive_seed(cfg.master_seed, 0, 31),
        hidden=cfg.hidden,
        momentum=cfg.momentum,
        batch_size=cfg.batch_size,
        model=resume_model,
    )
    out = Path(args.out)
    save_checkpoint(
        out,
        model,
        sched,
        vocabulary_json(),
        extra={"configHash": manifest["configHash"]},
    )
    curve_path = out.with_suffix(".curve.csv")
    with open(curve_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "meanEpsMse"])
        for epoch, mse in enumerate(log.epoch_mse):
            writer.writerow([epoch, f"{mse:.8f}"])
    print(
        f"trained {cfg.epochs} epochs: eps-MSE {log.initial_mse:.4f} -> "
        f"{log.final_mse:.4f}; checkpoint at {out}"
    )
    return 0


def cmd_evaluate(args) -> int:
    data_cfg, manifest = _load_data_config(args.data)
    source, model = _load_model(args, data_cfg, manifest["configHash"], args.force)
    cfg = _effective_config(data_cfg, args)
    sched = cfg.schedule()
    est_cfg = cfg.estimator_config()
    suites = _load_suites(args.data, data_cfg, source, model)
    suites = {t: s for t, s in suites.items() if t in cfg.tasks}
    task_results, example_results = evaluate_task_suites(
        suites, sched, est_cfg, workers=args.workers
    )
    pairs_path = Path(args.data) / "winoground.jsonl"
    winoground = None
    if pairs_path.exists():
        pairs = datasets.read_pairs_file(pairs_path)
        pair_model = model
        if source == "oracle":
            world = _gaussian_world(data_cfg)
            pair_model = world.class_model(
                [c for p in pairs for c in (p.condition_a, p.condition_b)]
            )
        elif source == "zero":
            pair_model = ZeroEpsDenoiser(pairs[0].scene_a.flat_x0().size)
        winoground = winoground_eval(pairs, pair_model, sched, est_cfg, scorer=args.scorer)
    report = EvalReport(
        run_id=make_run_id(cfg.config_hash()),
        config_hash=cfg.config_hash(),
        tasks=task_results,
        winoground=winoground,
        schedule=sched.to_json_dict(),
    )
    out = Path(args.out)
    report.write(out)
    datasets.write_jsonl(
        out / "estimates.jsonl", estimate_records(example_results, cfg.config_hash())
    )
    for tr in task_results:
        print(
            f"{tr.task:>16}: acc {tr.accuracy_mean_pct:6.2f} ± {tr.accuracy_std_pct:.2f} "
            f"(chance {tr.chance_pct:.2f}, delta {tr.delta_pct:+.2f})"
        )
    if winoground:
        print(
            f"      winoground: image {winoground['imageScore']:.2f} "
            f"text {winoground['textScore']:.2f} group {winoground['groupScore']:.2f}"
        )
    print(f"report written to {out / 'report.json'}")
    return 0


def cmd_winoground(args) -> int:
    data_cfg, manifest = _load_data_config(args.data)
    source, model = _load_model(args, data_cfg, manifest["configHash"], args.force)
    cfg = _effective_config(data_cfg, args)
    sched = cfg.schedule()
    est_cfg = cfg.estimator_config()
    pairs = datasets.read_pairs_file(Path(args.data) / "winoground.jsonl")
    if source == "oracle":
        world = _gaussian_world(data_cfg)
        model = world.class_model(
            [c for p in pairs for c in (p.condition_a, p.condition_b)]
        )
    elif source == "zero":
        model = ZeroEpsDenoiser(pairs[0].scene_a.flat_x0().size)
    scores = winoground_eval(pairs, model, sched, est_cfg, scorer=args.scorer)
    for key in sorted(scores):
        print(f"{key}: {scores[key]:.2f}")
    if args.out:
        report = EvalReport(
            run_id=make_run_id(cfg.config_hash()),
            config_hash=cfg.config_hash(),
            winoground=scores,
        )
        report.write(Path(args.out))
    return 0


def cmd_ablate(args) -> int:
    data_cfg, manifest = _load_data_config(args.data)
    source, model = _load_model(args, data_cfg, manifest["configHash"], args.force)
    cfg = _effective_config(data_cfg, args)
    est_cfg = cfg.estimator_config()
    suites = _load_suites(args.data, data_cfg, source, model)
    values = [int(v) for v in args.values.split(",")]
    rows = ablation_sweep(
        args.axis,
        values,
        suites,
        est_cfg,
        schedule_params={
            "kind": cfg.schedule_kind,
            "betaMin": cfg.beta_min,
            "betaMax": cfg.beta_max,
        },
        workers=args.workers,
    )
    report = EvalReport(
        run_id=make_run_id(cfg.config_hash()),
        config_hash=cfg.config_hash(),
        ablations=rows,
    )
    report.write(Path(args.out))
    for row in rows:
        print(
            f"{row['axis']}={row['value']:<6} {row['task']:>16}: "
            f"acc {row['accuracyMeanPct']:6.2f} (delta {row['deltaPct']:+.2f})"
        )
    return 0


def cmd_report(args) -> int:
    report = load_report(args.report)
    print(f"runId: {report.run_id}\nconfigHash: {report.config_hash}")
    for tr in report.tasks:
        print(
            f"{tr.task:>16}: acc {tr.accuracy_mean_pct:6.2f} ± {tr.accuracy_std_pct:.2f} "
            f"(chance {tr.chance_pct:.2f}, delta {tr.delta_pct:+.2f})"
        )
    if report.winoground:
        for key in sorted(report.winoground):
            print(f"{key}: {report.winoground[key]:.2f}")
    if args.out:
        report.write(Path(args.out))
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="selfeval", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write benchmark dataset files")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--world", choices=["micro", "gaussian"], default="micro")
    p.add_argument("--image-size", type=int, default=16)
    p.add_argument("--suite-size", type=int, default=1000)
    p.add_argument("--winoground-size", type=int, default=200)
    p.add_argument("--train-size", type=int, default=6000)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train the MLP denoiser")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--resume")
    p.set_defaults(func=cmd_train)

    for name, func in (("evaluate", cmd_evaluate), ("winoground", cmd_winoground)):
        p = sub.add_parser(name, help=f"{name} a model on generated datasets")
        p.add_argument("--data", required=True)
        p.add_argument("--out", required=(name == "evaluate"))
        p.add_argument("--checkpoint")
        p.add_argument("--oracle", action="store_true")
        p.add_argument("--zero", action="store_true",
                       help="condition-ignoring baseline denoiser")
        p.add_argument("--scorer", choices=["selfeval", "elbo"], default="selfeval")
        p.add_argument("--workers", type=int, default=_workers_default())
        p.add_argument("--force", action="store_true")
        _add_estimator_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("ablate", help="sweep T, N, or seed over the suites")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--axis", choices=["T", "N", "seed"], required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--checkpoint")
    p.add_argument("--oracle", action="store_true")
    p.add_argument("--zero", action="store_true")
    p.add_argument("--workers", type=int, default=_workers_default())
    p.add_argument("--force", action="store_true")
    _add_estimator_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="pretty-print an existing report")
    p.add_argument("--report", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"selfeval: usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError, OSError) as exc:
        print(f"selfeval: data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"selfeval: numerical failure: {exc}", file=sys.stderr)
        return 3
    except SelfEvalError as exc:
        print(f"selfeval: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
