"""Command-line pipeline: data generation, training, prediction, evaluation.

Every run directory carries a ``run.json`` manifest with the config
snapshot, stage timings, and artifact paths so results can be reproduced
from the recorded seeds alone.

Exit codes: 0 success, 2 invalid config, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import json
import sys
import time
import uuid
from pathlib import Path

import click
import numpy as np
import pandas as pd

from . import maskopt, metrics, nnpredict, phantom, recon
from .core import LineMask
from .errors import DataError, InvalidInputError, NumericalError, ScanmaskError

MASK_SOURCES = ("vdrs", "nn", "oracle-icd", "population")


@click.group()
def cli():
    """Scan-adaptive MRI sampling mask learning pipeline."""


@cli.command("gen-data")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--train", "n_train", default=40, show_default=True)
@click.option("--test", "n_test", default=10, show_default=True)
@click.option("--size", nargs=2, type=int, default=(64, 64), show_default=True)
@click.option("--coils", default=4, show_default=True)
@click.option("--noise", default=0.005, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--force", is_flag=True, help="Overwrite a nonempty output directory.")
def gen_data(out_dir, n_train, n_test, size, coils, noise, seed, force):
    """Generate a synthetic train/test scan corpus."""
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()) and not force:
        raise InvalidInputError(f"output directory {out} is not empty (use --force)")
    h, w = size
    index = phantom.generate_corpus(out, n_train, n_test, h, w, coils, noise, seed)
    click.echo(f"wrote {len(index['train'])} train + {len(index['test'])} test bundles to {out}")


def _write_run_manifest(run_dir: Path, config: dict, timings: dict, artifacts: dict):
    manifest = {
        "run_id": uuid.uuid4().hex,
        "config": config,
        "stage_timings_s": timings,
        "artifacts": artifacts,
    }
    (run_dir / "run.json").write_text(json.dumps(manifest, indent=2))
    for rel in artifacts.values():
        if not (run_dir / rel).exists():
            raise DataError(f"run artifact missing: {rel}")


@cli.command("train")
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "run_dir", required=True, type=click.Path())
@click.option("--budget", default=16, show_default=True)
@click.option("--lowfreq", default=6, show_default=True)
@click.option("--icd-iters", default=1, show_default=True)
@click.option(
    "--recon",
    "recon_kind",
    default="zero-filled",
    type=click.Choice(recon.RECON_KINDS),
    show_default=True,
)
@click.option("--seed", default=0, show_default=True)
@click.option("--jobs", default=1, show_default=True)
@click.option("--population", is_flag=True, help="Also fit a population-adaptive greedy mask.")
def train(data_dir, run_dir, budget, lowfreq, icd_iters, recon_kind, seed, jobs, population):
    """Run the alternating mask/reconstructor training on the train split."""
    t0 = time.perf_counter()
    train_bundles, _ = phantom.load_corpus(data_dir)
    t_load = time.perf_counter() - t0

    config = maskopt.OptimConfig(budget=budget, n_lowfreq=lowfreq, n_icd_iters=icd_iters)
    schedule = maskopt.TrainSchedule(
        optim=config, recon_kind=recon_kind, seed=seed, jobs=jobs
    )
    t0 = time.perf_counter()
    result = maskopt.alternate_train(train_bundles, schedule)
    t_train = time.perf_counter() - t0

    run = Path(run_dir)
    (run / "masks").mkdir(parents=True, exist_ok=True)
    for bundle, mask in zip(train_bundles, result.masks):
        (run / "masks" / f"{bundle.scan_id}.json").write_text(
            json.dumps(mask.to_json_dict(), indent=2)
        )
    (run / "recon_params.json").write_text(
        json.dumps(result.recon.to_json_dict(), indent=2)
    )
    pd.DataFrame(
        [(r.stage, r.scan_id, r.loss) for r in result.audit],
        columns=["stage", "scan_id", "loss"],
    ).to_csv(run / "stage_audit.csv", index=False)

    t0 = time.perf_counter()
    fixed = frozenset(maskopt.central_lines(train_bundles[0].shape[1], lowfreq))
    library = nnpredict.build_library(list(zip(train_bundles, result.masks)), fixed)
    nnpredict.save_library(library, run / "library")
    t_library = time.perf_counter() - t0

    artifacts = {
        "recon_params": "recon_params.json",
        "stage_audit": "stage_audit.csv",
        "masks": "masks",
        "library": "library",
    }
    if population:
        pop = maskopt.population_greedy(train_bundles, result.recon, config)
        (run / "population_mask.json").write_text(
            json.dumps(pop.mask.to_json_dict(), indent=2)
        )
        artifacts["population_mask"] = "population_mask.json"

    _write_run_manifest(
        run,
        config={
            "data": str(data_dir),
            "budget": budget,
            "n_lowfreq": lowfreq,
            "n_icd_iters": icd_iters,
            "recon_kind": recon_kind,
            "seed": seed,
            "jobs": jobs,
        },
        timings={"load": t_load, "train": t_train, "library": t_library},
        artifacts=artifacts,
    )
    means = result.stage_means()
    for stage in ("vdrs", "greedy", "greedy-retuned", "icd", "icd-retuned"):
        click.echo(f"stage {stage:15s} mean NMSE {means[stage]:.6f}")


@cli.command("predict")
@click.option("--library", "run_dir", required=True, type=click.Path(exists=True))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_file", required=True, type=click.Path())
def predict(run_dir, data_dir, out_file):
    """Predict a mask for every test scan by nearest-neighbor search."""
    lib_dir = Path(run_dir) / "library"
    if not lib_dir.exists():
        raise DataError(f"missing library under {run_dir}")
    library = nnpredict.load_library(lib_dir)
    _, test_bundles = phantom.load_corpus(data_dir)
    results = {}
    for bundle in test_bundles:
        mask, neighbor, dist = nnpredict.predict_mask(bundle.kspace, bundle.smaps, library)
        results[bundle.scan_id] = {
            "mask": mask.to_json_dict(),
            "neighbor": neighbor,
            "distance": dist,
        }
    Path(out_file).write_text(json.dumps(results, indent=2))
    click.echo(f"predicted masks for {len(results)} scans -> {out_file}")


def _load_run_config(run_dir: Path) -> tuple[maskopt.OptimConfig, recon.ReconParams]:
    manifest = json.loads((run_dir / "run.json").read_text())
    cfg = manifest["config"]
    optim = maskopt.OptimConfig(
        budget=cfg["budget"], n_lowfreq=cfg["n_lowfreq"], n_icd_iters=cfg["n_icd_iters"]
    )
    params = recon.ReconParams.from_json_dict(
        json.loads((run_dir / "recon_params.json").read_text())
    )
    return optim, params


def _resolve_recon(spec: str) -> recon.ReconParams:
    path = Path(spec)
    if path.exists():
        return recon.ReconParams.from_json_dict(json.loads(path.read_text()))
    if spec in recon.RECON_KINDS:
        return recon.with_kind_defaults(spec)
    raise InvalidInputError(f"--recon {spec!r} is neither a params file nor a kind")


def _oracle_task(args):
    bundle, params, config = args
    greedy = maskopt.greedy_optimize(bundle, params, config)
    return maskopt.icd_optimize(bundle, greedy.mask, params, config).mask


def _masks_for_source(src: str, test_bundles, budget, lowfreq, seed, eval_params, jobs=1):
    """Per-scan masks for one mask source spec ("name" or "name:RUNDIR")."""
    name, _, run_spec = src.partition(":")
    if name not in MASK_SOURCES:
        raise InvalidInputError(f"unknown mask source {name!r}")
    run_dir = Path(run_spec) if run_spec else None
    width = test_bundles[0].shape[1]

    if name == "vdrs":
        if run_dir is not None:
            config, _ = _load_run_config(run_dir)
        else:
            config = maskopt.OptimConfig(budget=budget, n_lowfreq=lowfreq)
        return [
            maskopt.make_vdrs_mask(width, config, 2.0, seed + 17 * i)
            for i in range(len(test_bundles))
        ]
    if run_dir is None:
        raise InvalidInputError(f"mask source {name!r} needs a run dir: {name}:RUN")
    if name == "nn":
        library = nnpredict.load_library(run_dir / "library")
        return [
            nnpredict.predict_mask(b.kspace, b.smaps, library)[0] for b in test_bundles
        ]
    if name == "population":
        mask_file = run_dir / "population_mask.json"
        if not mask_file.exists():
            raise DataError(f"run {run_dir} has no population mask (train --population)")
        mask = LineMask.from_json_dict(json.loads(mask_file.read_text()))
        return [mask] * len(test_bundles)
    # oracle-icd: optimize directly on each test scan, searching with a
    # cheapened version of the evaluation reconstructor
    config, _ = _load_run_config(run_dir)
    search = recon.search_params(eval_params)
    tasks = [(b, search, config) for b in test_bundles]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_oracle_task, tasks))
    return [_oracle_task(t) for t in tasks]


@cli.command("eval")
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--masks", "mask_sources", required=True, multiple=True)
@click.option("--recon", "recon_spec", required=True)
@click.option("--out", "out_csv", required=True, type=click.Path())
@click.option("--budget", default=16, show_default=True)
@click.option("--lowfreq", default=6, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--jobs", default=1, show_default=True)
@click.option("--crop", "crop_fraction", default=None, type=float)
def eval_cmd(
    data_dir, mask_sources, recon_spec, out_csv, budget, lowfreq, seed, jobs, crop_fraction
):
    """Reconstruct each test scan under each mask source and emit metrics."""
    _, test_bundles = phantom.load_corpus(data_dir)
    if not test_bundles:
        raise DataError(f"no test scans listed in {data_dir}")
    params = _resolve_recon(recon_spec)
    rows = []
    for src in mask_sources:
        masks = _masks_for_source(src, test_bundles, budget, lowfreq, seed, params, jobs)
        name = src.partition(":")[0]
        for bundle, mask in zip(test_bundles, masks):
            if mask.width != bundle.shape[1]:
                raise InvalidInputError(
                    f"mask width {mask.width} != scan width {bundle.shape[1]}"
                )
            rec = recon.reconstruct(bundle.kspace, bundle.smaps, mask, params)
            report = metrics.evaluate(bundle.gt, rec, crop_fraction)
            rows.append(
                {
                    "scan_id": bundle.scan_id,
                    "mask_kind": name,
                    "recon_kind": params.kind,
                    "nmse": report.nmse,
                    "ssim": report.ssim,
                    "hfen": report.hfen,
                }
            )
    metrics.write_metric_csv(out_csv, rows)
    click.echo(f"wrote {len(rows)} metric rows -> {out_csv}")


@cli.command("report")
@click.option("--runs", "csv_files", required=True, multiple=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def report(csv_files, out_dir):
    """Aggregate metric CSVs into a summary table and bar plots."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    df = pd.concat([pd.read_csv(f) for f in csv_files], ignore_index=True)
    summary = (
        df.groupby(["mask_kind", "recon_kind"])[["nmse", "ssim", "hfen"]]
        .agg(["mean", "median"])
        .reset_index()
    )
    summary.columns = ["_".join(c).strip("_") for c in summary.columns]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary.to_csv(out / "summary.csv", index=False)

    for metric in ("nmse", "ssim", "hfen"):
        fig, ax = plt.subplots(figsize=(6, 4))
        pivot = df.groupby(["mask_kind", "recon_kind"])[metric].mean().unstack()
        pivot.plot.bar(ax=ax)
        ax.set_ylabel(f"mean {metric.upper()}")
        ax.set_title(f"Mean {metric.upper()} by mask source")
        fig.tight_layout()
        fig.savefig(out / f"{metric}_means.png", dpi=120)
        plt.close(fig)
    click.echo(f"report written to {out}")


def main():
    try:
        cli(standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(1)
    except click.ClickException as e:
        e.show()
        sys.exit(2)
    except InvalidInputError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)
    except DataError as e:
        click.echo(f"data error: {e}", err=True)
        sys.exit(3)
    except NumericalError as e:
        click.echo(f"numerical failure: {e}", err=True)
        sys.exit(4)
    except ScanmaskError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    main()
