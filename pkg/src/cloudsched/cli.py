"""Command-line entry point: reproducible experiments end to end.

Subcommands:
  run     train (if needed), simulate every configured policy, write artifacts
  train   fit and save the task classifier for a config
  oracle  brute-force optimum dispatch set for a desk-scale instance
  report  rebuild comparison table and per-task series from saved reports
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Optional

from . import baselines, genetic, network, report, scheduler, sim, weighting, workload
from .config import ConfigError, ExperimentConfig, load_config
from .oracle import brute_force

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def build_workload(cfg: ExperimentConfig, limit: Optional[int] = None) -> workload.TaskSet:
    if cfg.trace_path is not None:
        ts = workload.load_trace(cfg.trace_path, limit=limit)
    else:
        ts = workload.synth_workload(cfg.workload_seed, cfg.synth_n, cfg.synth_ranges)
        if limit is not None:
            ts = workload.TaskSet(tasks=ts.tasks[:limit], normalized=False)
    return workload.normalize(ts)


def _cache_key(ds: network.LabeledDataset, cfg: ExperimentConfig) -> str:
    h = hashlib.sha256()
    payload = {
        "features": ds.features.tolist(),
        "labels": ds.labels.tolist(),
        "train": {
            "max_epochs": cfg.train.max_epochs,
            "performance_goal": cfg.train.performance_goal,
            "min_gradient": cfg.train.min_gradient,
            "val_fail_limit": cfg.train.val_fail_limit,
            "seed": cfg.train.seed,
            "hidden": cfg.train.hidden,
        },
    }
    h.update(json.dumps(payload, sort_keys=True).encode())
    return h.hexdigest()


def get_model(ts: workload.TaskSet, cfg: ExperimentConfig, out_dir: Path) -> network.NeuralModel:
    """Train the classifier, or reuse the cached model when inputs match."""
    assignments, _ = weighting.label_tasks(ts, cfg.wp, seed=cfg.train.seed, epsilon=cfg.epsilon)
    ds = network.LabeledDataset.from_assignments(ts, assignments)
    key = _cache_key(ds, cfg)
    model_path = out_dir / "model.json"
    if model_path.exists():
        cached = json.loads(model_path.read_text(encoding="utf-8"))
        if cached.get("cache_key") == key:
            return network.model_from_dict(cached)
    model = network.train(ds, cfg.train)
    d = network.model_to_dict(model)
    d["cache_key"] = key
    model_path.write_text(
        json.dumps(d, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return model


def make_policy(name: str, cfg: ExperimentConfig, model: Optional[network.NeuralModel]):
    if name == baselines.PolicyId.FIFO.value:
        return baselines.FifoPolicy()
    if name == baselines.PolicyId.SJF.value:
        return baselines.SjfPolicy()
    if name == baselines.PolicyId.ROULETTE_GA.value:
        return baselines.RouletteGaPolicy(cfg.ga)
    if name == baselines.PolicyId.PROPOSED.value:
        if model is None:
            raise ValueError("the proposed policy needs a trained model")
        return scheduler.ProposedPolicy(model, cfg.ga)
    raise ValueError(f"unknown policy {name!r}")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_fitness_traces(plans, path: Path) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("round,generation,best_fitness\n")
        for p in plans:
            for gen, fit in enumerate(p.fitness_trace):
                fh.write(f"{p.round_index},{gen},{fit!r}\n")


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args.seed, args.out, args.policy or None)
    ts = build_workload(cfg)
    out_dir = cfg.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    workload.save_trace(ts, out_dir / "workload.csv")

    model = None
    if baselines.PolicyId.PROPOSED.value in cfg.policies:
        model = get_model(ts, cfg, out_dir)

    reports: dict[str, sim.SimReport] = {}
    for name in cfg.policies:
        policy = make_policy(name, cfg, model)
        rep = sim.run(ts, policy, cfg.env)
        reports[name] = rep
        _write_json(out_dir / f"report_{name}.json", sim.report_to_dict(rep))
        sim.write_event_log(rep.events, out_dir / f"events_{name}.csv")
        for metric in report.SERIES_METRICS:
            report.write_series_csv(
                report.per_task_series(rep, metric),
                out_dir / f"series_{name}_{metric}.csv",
            )
        if isinstance(policy, scheduler.ProposedPolicy):
            scheduler.write_round_log(policy.round_log, out_dir / "rounds_proposed.jsonl")
            _write_fitness_traces(policy.round_log, out_dir / "fitness_traces_proposed.csv")
        agg = sim.report_to_dict(rep)["aggregates"]
        print(
            f"{name}: {len(rep.records)} tasks in {rep.rounds} rounds | "
            f"mean exec {agg['mean_exec']:.4f}, mean cost {agg['mean_cost']:.4f}, "
            f"mean response {agg['mean_response']:.4f}, "
            f"utilization {agg['utilization']:.4f}"
        )

    if len(reports) >= 2:
        table = report.compare(reports)
        report.write_comparison_csv(table, out_dir / "comparison.csv")
        print(f"comparison table -> {out_dir / 'comparison.csv'}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args.seed, args.out, None)
    ts = build_workload(cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    model = get_model(ts, cfg, cfg.out_dir)
    assert model.log is not None
    last = model.log.records[-1]
    print(
        f"trained {model.layers} net: {model.log.epochs_run} epochs, "
        f"stop reason '{model.log.stop_reason}', final train MSE {last.train_perf:.6f}"
    )
    print(f"model -> {cfg.out_dir / 'model.json'}")
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args.seed, args.out, None)
    ts = build_workload(cfg, limit=args.limit)
    tasks = ts.by_id()
    optimum, subset = brute_force(
        candidates=list(tasks),
        tasks=tasks,
        chrom_len=cfg.ga.chrom_len,
        fairness_factor=cfg.ga.fairness_factor,
        fairness_mode=cfg.ga.fairness_mode,
    )
    print(json.dumps({"optimum_fitness": optimum, "subset": list(subset)}))
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    out_dir = Path(args.out or "out")
    paths = sorted(out_dir.glob("report_*.json"))
    if not paths:
        raise FileNotFoundError(f"no report_*.json files under {out_dir}")
    reports = {}
    for p in paths:
        rep = sim.report_from_dict(json.loads(p.read_text(encoding="utf-8")))
        reports[rep.policy] = rep
        for metric in report.SERIES_METRICS:
            report.write_series_csv(
                report.per_task_series(rep, metric),
                out_dir / f"series_{rep.policy}_{metric}.csv",
            )
    if len(reports) >= 2:
        table = report.compare(reports)
        report.write_comparison_csv(table, out_dir / "comparison.csv")
        print(f"comparison table -> {out_dir / 'comparison.csv'}")
    else:
        print(f"found a single report ({next(iter(reports))}); nothing to compare")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cloudsched",
        description="Deterministic cloud task-scheduling experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
        if config_required:
            p.add_argument("--config", required=True, help="TOML experiment file")
        p.add_argument("--policy", action="append", help="override configured policies")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--out", help="override the output directory")

    p_run = sub.add_parser("run", help="run every configured policy and write artifacts")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_train = sub.add_parser("train", help="train and save the task classifier")
    common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_oracle = sub.add_parser("oracle", help="brute-force optimum dispatch set")
    common(p_oracle)
    p_oracle.add_argument("--limit", type=int, help="cap the instance to the first N tasks")
    p_oracle.set_defaults(func=cmd_oracle)

    p_report = sub.add_parser("report", help="rebuild comparison outputs from saved reports")
    common(p_report, config_required=False)
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"error in {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
