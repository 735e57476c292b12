"""Command-line entry points for the full pipeline:
collect -> label -> train -> fly / bench, plus serve and validate."""

from __future__ import annotations

import asyncio
import json
import sys
from pathlib import Path

import click
import numpy as np

from ..baselines import DepthPolicyConfig
from ..bench import (
    BenchArtifacts,
    MethodKind,
    TrialSpec,
    run_benchmark,
    run_trial,
    table_to_json,
    table_to_text,
)
from ..collect import (
    ArchiveError,
    CollectConfig,
    collect_random,
    collect_with_policy,
    read_trajectories,
    write_trajectories,
)
from ..floorplans import SHIPPED_PLANS, load_plan
from ..label import LabelConfig, build_dataset, read_dataset, write_dataset
from ..learn import (
    CheckpointError,
    TrainConfig,
    default_net_spec,
    load_params,
    save_params,
    train,
)
from ..policy import PolicyConfig, learned_policy_fn
from ..world import FloorPlanError, load_floorplan_file
from .serve import DATA_DIR_ENV, SessionHost, default_data_dir, serve as serve_async


@click.group()
@click.option("--data-dir", type=click.Path(path_type=Path), default=None,
              help=f"Artifact directory (default ${DATA_DIR_ENV} or ./data).")
@click.pass_context
def main(ctx, data_dir):
    ctx.obj = data_dir if data_dir is not None else default_data_dir()


def _resolve_plan(name_or_path: str):
    if name_or_path in SHIPPED_PLANS:
        return name_or_path, load_plan(name_or_path)
    plan = load_floorplan_file(name_or_path)
    return plan.name, plan


@main.command()
@click.option("--plan", "plan_name", required=True,
              help="Shipped plan name or floorplan file path.")
@click.option("--n", "n_env_trial", type=int, default=200, show_default=True)
@click.option("--mode", type=click.Choice(["random", "policy"]), default="random",
              show_default=True)
@click.option("--checkpoint", type=click.Path(exists=True, path_type=Path),
              default=None, help="Required for --mode policy.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def collect(plan_name, n_env_trial, mode, checkpoint, seed, out):
    """Collect crash trajectories in a floorplan."""
    name, plan = _resolve_plan(plan_name)
    cfg = CollectConfig(n_env_trial=n_env_trial, seed=seed)
    tallies = {}
    if mode == "policy":
        if checkpoint is None:
            raise click.UsageError("--mode policy needs --checkpoint")
        policy = learned_policy_fn(load_params(checkpoint))
        trajs = collect_with_policy(plan, cfg, policy, tallies=tallies)
    else:
        trajs = collect_random(plan, cfg, tallies=tallies)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_trajectories(trajs, out, seed_note=f"seed={seed}")
    click.echo(f"seed: {seed}")
    click.echo(f"wrote {len(trajs)} trajectories from {name} to {out} "
               f"(tallies: {tallies})")


@main.command()
@click.option("--archive", "archives", multiple=True, required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--n-plus", type=int, default=30, show_default=True)
@click.option("--n-minus", type=int, default=20, show_default=True)
@click.option("--threshold", type=float, default=4.0, show_default=True)
@click.option("--val-fraction", type=float, default=0.2, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def label(archives, n_plus, n_minus, threshold, val_fraction, seed, out):
    """Segment trajectory archives into a labeled dataset."""
    trajs = []
    for path in archives:
        trajs.extend(read_trajectories(path))
    cfg = LabelConfig(n_plus=n_plus, n_minus=n_minus, accel_threshold=threshold)
    tallies = {}
    ds = build_dataset(trajs, cfg, val_fraction=val_fraction, seed=seed,
                       tallies=tallies)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_dataset(ds, out)
    counts = {lab.name: n for lab, n in ds.class_counts.items()}
    click.echo(f"seed: {seed}")
    click.echo(f"wrote {len(ds.samples)} samples to {out} "
               f"(classes: {counts}, tallies: {tallies})")


@main.command()
@click.option("--dataset", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--lr", type=float, default=0.01, show_default=True)
@click.option("--batch-size", type=int, default=64, show_default=True)
@click.option("--epochs", type=int, default=30, show_default=True)
@click.option("--momentum", type=float, default=0.9, show_default=True)
@click.option("--decay", type=float, default=1e-4, show_default=True)
@click.option("--patience", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def train_cmd(dataset, lr, batch_size, epochs, momentum, decay, patience, seed, out):
    """Train the go-straight classifier on a labeled dataset."""
    ds = read_dataset(dataset)
    cfg = TrainConfig(learning_rate=lr, batch_size=batch_size, epochs=epochs,
                      momentum=momentum, l2_weight_decay=decay, seed=seed,
                      early_stop_patience=patience)
    params, report = train(ds, default_net_spec(), cfg)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_params(params, out)
    click.echo(f"seed: {seed}")
    click.echo(f"best epoch {report.best_epoch}: "
               f"val accuracy {report.val_accuracy[report.best_epoch]:.3f}; "
               f"checkpoint at {out}")


main.add_command(train_cmd, name="train")


@main.command()
@click.option("--checkpoint", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--plan", "plan_name", required=True)
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--max-time", type=float, default=300.0, show_default=True)
def fly(checkpoint, plan_name, seed, max_time):
    """Run one headless learned-policy trial and report the outcome."""
    name, plan = _resolve_plan(plan_name)
    params = load_params(checkpoint)
    spec = TrialSpec(plan_name=name, method=MethodKind.LEARNED, seed=seed,
                     max_time=max_time)
    result = run_trial(spec, BenchArtifacts(plan=plan, params=params))
    click.echo(f"seed: {seed}")
    click.echo(f"{name}: {result.distance_before_collision:.1f} m in "
               f"{result.time_before_collision:.1f} s "
               f"({result.termination.value})")


@main.command()
@click.option("--checkpoint", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--plan", "plan_names", multiple=True,
              help="Defaults to all shipped plans.")
@click.option("--seeds", default="1,2,3,4,5", show_default=True)
@click.option("--max-time", type=float, default=300.0, show_default=True)
@click.option("--out-json", type=click.Path(path_type=Path), required=True)
@click.option("--out-text", type=click.Path(path_type=Path), default=None)
def bench(checkpoint, plan_names, seeds, max_time, out_json, out_text):
    """Benchmark learned vs depth-oracle vs best-straight over seeded trials."""
    names = list(plan_names) or sorted(SHIPPED_PLANS)
    params = load_params(checkpoint)
    plans = {}
    artifacts = {}
    for n in names:
        name, plan = _resolve_plan(n)
        plans[name] = plan
        artifacts[name] = BenchArtifacts(plan=plan, params=params)
    seed_tuple = tuple(int(s) for s in seeds.split(","))
    table = run_benchmark(
        plans,
        [MethodKind.LEARNED, MethodKind.DEPTH_ORACLE, MethodKind.BEST_STRAIGHT],
        artifacts, seeds=seed_tuple, max_time=max_time,
    )
    out_json.parent.mkdir(parents=True, exist_ok=True)
    out_json.write_text(table_to_json(table))
    text = table_to_text(table)
    if out_text is not None:
        Path(out_text).write_text(text)
    click.echo(f"seed: {seeds}")
    click.echo(text)


@main.command()
@click.option("--plan", "plan_names", multiple=True,
              help="Plans to offer (default: all shipped).")
@click.option("--mode", type=click.Choice(["human", "spectate"]), default="human",
              show_default=True)
@click.option("--checkpoint", type=click.Path(exists=True, path_type=Path),
              default=None, help="Required for spectate mode.")
@click.option("--port", type=int, default=8765, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_obj
def serve(data_dir, plan_names, mode, checkpoint, port, seed):
    """Host live teleop / spectate sessions over a websocket."""
    names = list(plan_names) or sorted(SHIPPED_PLANS)
    plans = {}
    for n in names:
        name, plan = _resolve_plan(n)
        plans[name] = plan
    params = load_params(checkpoint) if checkpoint is not None else None
    if mode == "spectate" and params is None:
        raise click.UsageError("spectate mode needs --checkpoint")
    host = SessionHost(plans, params=params, results_dir=data_dir / "results",
                       seed=seed)
    click.echo(f"seed: {seed}")
    click.echo(f"serving {mode} sessions on ws://127.0.0.1:{port}")
    asyncio.run(serve_async(host, port))


@main.command()
@click.argument("paths", nargs=-1, required=True,
                type=click.Path(exists=True, path_type=Path))
def validate(paths):
    """Round-trip every artifact format and report integrity."""
    failures = 0
    for path in paths:
        kind, err = _validate_one(path)
        if err is None:
            click.echo(f"{path}: ok ({kind})")
        else:
            failures += 1
            click.echo(f"{path}: FAIL ({kind}): {err}", err=True)
    click.echo("seed: n/a")
    if failures:
        sys.exit(1)


def _validate_one(path: Path):
    head = path.open("rb").read(8)
    try:
        if head.startswith(b"CRASHNAV"):
            read_trajectories(path)
            return "trajectory archive", None
        if head.startswith(b"CRASHDST"):
            read_dataset(path)
            return "dataset", None
        if head.startswith(b"PK"):
            load_params(path)
            return "checkpoint", None
        doc = json.loads(path.read_text())
        if "segments" in doc:
            load_floorplan_file(path)
            return "floorplan", None
        if "cells" in doc or "runs_per_cell" in doc:
            return "results table", None
        return "json", "unrecognized document"
    except (ArchiveError, CheckpointError, FloorPlanError, ValueError) as exc:
        return "artifact", str(exc)


if __name__ == "__main__":
    main()
