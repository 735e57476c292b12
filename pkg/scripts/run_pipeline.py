"""Full desk-scale pipeline: collect -> label -> train -> bench.

Writes all artifacts (archives, dataset, checkpoint, result tables, manifest)
under --data-dir and prints stage timings.  The acceptance suite runs the
same stages with its own fixed seeds; this script is the standalone entry
point for producing a full artifact set.
"""

from __future__ import annotations

import argparse
import json
import time
from pathlib import Path

from crashnav.bench import (
    BenchArtifacts,
    MethodKind,
    ordering_report,
    run_benchmark,
    table_to_json,
    table_to_text,
)
from crashnav.collect import CollectConfig, collect_random, write_trajectories
from crashnav.floorplans import SHIPPED_PLANS, load_plan
from crashnav.gateway.manifest import RunManifest
from crashnav.label import LabelConfig, build_dataset, write_dataset
from crashnav.learn import TrainConfig, default_net_spec, save_params, train


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--data-dir", type=Path, default=Path("data"))
    ap.add_argument("--n-crashes", type=int, default=200)
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--skip-bench", action="store_true")
    args = ap.parse_args()

    data = args.data_dir
    data.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest()
    t_start = time.time()

    # --- collect ---------------------------------------------------------
    all_trajs = []
    for i, name in enumerate(sorted(SHIPPED_PLANS)):
        t0 = time.time()
        plan = load_plan(name)
        seed = args.seed * 1000 + i
        cfg = CollectConfig(n_env_trial=args.n_crashes, seed=seed)
        tallies = {}
        trajs = collect_random(plan, cfg, tallies=tallies)
        path = data / f"crashes_{name}.bin"
        write_trajectories(trajs, path, seed_note=f"seed={seed}")
        manifest.add(f"archive_{name}", path, seed)
        all_trajs.extend(trajs)
        print(f"collect {name}: {len(trajs)} trajectories in "
              f"{time.time() - t0:.1f}s (tallies {tallies})", flush=True)

    # --- label -----------------------------------------------------------
    t0 = time.time()
    tallies = {}
    ds = build_dataset(all_trajs, LabelConfig(), val_fraction=0.2,
                       seed=args.seed + 17, tallies=tallies)
    ds_path = data / "dataset.bin"
    write_dataset(ds, ds_path)
    manifest.add("dataset", ds_path, args.seed + 17)
    counts = {lab.name: n for lab, n in ds.class_counts.items()}
    print(f"label: {len(ds.samples)} samples {counts} in "
          f"{time.time() - t0:.1f}s (tallies {tallies})", flush=True)

    # --- train -----------------------------------------------------------
    t0 = time.time()
    cfg = TrainConfig(epochs=args.epochs, seed=args.seed)
    params, report = train(ds, default_net_spec(), cfg)
    ckpt = data / "checkpoint.npz"
    save_params(params, ckpt)
    manifest.add("checkpoint", ckpt, args.seed)
    best = report.best_epoch
    print(f"train: best epoch {best}, val accuracy "
          f"{report.val_accuracy[best]:.4f}, {len(report.val_accuracy)} epochs, "
          f"{time.time() - t0:.1f}s", flush=True)
    (data / "train_report.json").write_text(json.dumps({
        "train_loss": report.train_loss,
        "val_loss": report.val_loss,
        "val_accuracy": report.val_accuracy,
        "best_epoch": report.best_epoch,
    }, indent=2))

    # --- bench -----------------------------------------------------------
    if not args.skip_bench:
        t0 = time.time()
        plans = {name: load_plan(name) for name in sorted(SHIPPED_PLANS)}
        artifacts = {name: BenchArtifacts(plan=plan, params=params)
                     for name, plan in plans.items()}
        table = run_benchmark(
            plans,
            [MethodKind.LEARNED, MethodKind.DEPTH_ORACLE, MethodKind.BEST_STRAIGHT],
            artifacts,
        )
        (data / "results.json").write_text(table_to_json(table))
        (data / "results.txt").write_text(table_to_text(table))
        manifest.add("results", data / "results.json", 1)
        print(table_to_text(table), flush=True)
        print("ordering:", ordering_report(table), flush=True)
        print(f"bench: {time.time() - t0:.1f}s", flush=True)

    manifest.write(data / "manifest.json")
    print(f"total: {time.time() - t_start:.1f}s")


if __name__ == "__main__":
    main()
