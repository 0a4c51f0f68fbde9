"""Command-line surface: synth | scores | frontier | final | eval | report."""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click
import numpy as np
import pandas as pd

from . import data as data_mod
from .acquisition import AcquisitionConfig
from .driver import MopolConfig, fit_final, run_mopol
from .errors import MopolError
from .pareto import (
    WeightVector,
    default_reference_point,
    frontier_to_frame,
    frontier_to_json,
)
from .trees import (
    TreeFitConfig,
    evaluate_outcomes,
    export_tree,
    tree_from_dict,
    tree_to_dict,
)
from . import plots

EXIT_VALIDATION = 2
EXIT_PARTIAL = 3


def _fail_on_validation(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except MopolError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)

    return wrapper


@click.group()
@click.option("--verbose", is_flag=True, help="Log per-iteration progress.")
def main(verbose):
    """Learn treatment-allocation trees and map their Pareto frontier."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _load_inputs(data_path, schema_path, scores_path):
    schema = data_mod.load_schema(schema_path)
    dataset = data_mod.load_dataset(data_path, schema)
    scores = data_mod.load_scores(scores_path)
    if scores.n != dataset.n:
        raise MopolError("score file row count does not match the dataset")
    return dataset, scores


def _parse_lambda(text: str, n_outcomes: int) -> WeightVector:
    parts = [float(x) for x in text.split(",") if x.strip() != ""]
    if len(parts) == 1 and n_outcomes == 2:
        parts = [parts[0], 1.0 - parts[0]]
    return WeightVector(np.array(parts))


def _build_config(config_path, **overrides) -> MopolConfig:
    raw = {}
    if config_path is not None:
        with open(config_path) as fh:
            raw = json.load(fh)
    tree_raw = dict(raw.get("tree", {}))
    acq_raw = dict(raw.get("acquisition", {}))
    for key in ("fitter", "depth"):
        if overrides.get(key) is not None:
            tree_raw["kind" if key == "fitter" else key] = overrides[key]
    tree_raw.setdefault("kind", "greedy")
    tree_raw.setdefault("depth", 2)
    cfg_kwargs = {
        "tree": TreeFitConfig(**tree_raw),
        "acquisition": AcquisitionConfig(**acq_raw),
    }
    for key in ("replicates", "budget_iters", "budget_seconds", "se_mode", "seed"):
        if overrides.get(key) is not None:
            cfg_kwargs[key] = overrides[key]
        elif key in raw:
            cfg_kwargs[key] = raw[key]
    return MopolConfig(**cfg_kwargs)


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_fail_on_validation
def synth(spec_path, seed, out_dir):
    """Generate a synthetic dataset with oracle nuisances and scores."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = data_mod.DGPSpec.from_json(spec_path)
    dataset, nuisance, scores = data_mod.synth_generate(spec, seed)
    schema = data_mod.save_dataset(dataset, out / "dataset.csv")
    data_mod.save_schema(schema, out / "schema.json")
    data_mod.save_nuisance(nuisance, out / "nuisance_mhat.csv", out / "nuisance_ehat.csv")
    data_mod.save_scores(scores, out / "scores.csv")
    click.echo(f"wrote dataset, nuisances, and oracle scores to {out}")


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--schema", "schema_path", required=True, type=click.Path(exists=True))
@click.option("--nuisance-mhat", required=True, type=click.Path(exists=True))
@click.option("--nuisance-ehat", required=True, type=click.Path(exists=True))
@click.option("--propensity-floor", default=1e-3, show_default=True, type=float)
@click.option("--out", "out_path", required=True, type=click.Path())
@_fail_on_validation
def scores(data_path, schema_path, nuisance_mhat, nuisance_ehat, propensity_floor, out_path):
    """Build doubly robust scores from nuisance prediction files."""
    schema = data_mod.load_schema(schema_path)
    dataset = data_mod.load_dataset(data_path, schema)
    nuisance = data_mod.load_nuisance(nuisance_mhat, nuisance_ehat)
    result = data_mod.aipw_scores(dataset, nuisance, propensity_floor=propensity_floor)
    data_mod.save_scores(result, out_path)
    click.echo(f"wrote scores to {out_path}")


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--schema", "schema_path", required=True, type=click.Path(exists=True))
@click.option("--scores", "scores_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--fitter", type=click.Choice(["greedy", "hybrid", "optimal"]))
@click.option("--depth", type=int)
@click.option("--replicates", type=int)
@click.option("--budget-iters", type=int)
@click.option("--budget-seconds", type=float)
@click.option("--se-mode", type=click.Choice(["conventional", "alg1-literal"]))
@click.option("--seed", type=int)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_fail_on_validation
def frontier(data_path, schema_path, scores_path, config_path, fitter, depth, replicates,
             budget_iters, budget_seconds, se_mode, seed, out_dir):
    """Run the frontier search and write frontier, trace, and curve files."""
    dataset, score_mat = _load_inputs(data_path, schema_path, scores_path)
    cfg = _build_config(
        config_path, fitter=fitter, depth=depth, replicates=replicates,
        budget_iters=budget_iters, budget_seconds=budget_seconds,
        se_mode=se_mode, seed=seed,
    )
    pset, trace = run_mopol(score_mat, dataset.covariates, cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ref = trace.reference_point
    (out / "frontier.json").write_text(frontier_to_json(pset, ref))
    frontier_to_frame(pset).to_csv(out / "frontier.csv", index=False)
    trace_frame = trace.to_frame()
    trace_frame.to_csv(out / "trace.csv", index=False)
    curve_cols = [c for c in trace_frame.columns
                  if c.startswith(("lambda_", "value_", "se_"))]
    trace_frame[curve_cols].sort_values("lambda_0").to_csv(
        out / "value_curve.csv", index=False
    )
    click.echo(
        f"evaluated {len(trace.records)} weightings; frontier has {len(pset)} members"
    )
    if trace.partial:
        click.echo("budget exhausted before initialization completed", err=True)
        sys.exit(EXIT_PARTIAL)


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--schema", "schema_path", required=True, type=click.Path(exists=True))
@click.option("--scores", "scores_path", required=True, type=click.Path(exists=True))
@click.option("--lambda", "lambda_text", required=True)
@click.option("--depth", default=2, show_default=True, type=int)
@click.option("--fitter", default="greedy", show_default=True,
              type=click.Choice(["greedy", "hybrid", "optimal"]))
@click.option("--split", default=0.5, show_default=True, type=float)
@click.option("--replicates", default=100, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_fail_on_validation
def final(data_path, schema_path, scores_path, lambda_text, depth, fitter, split,
          replicates, seed, out_dir):
    """Fit a final tree at a chosen weighting with held-out evaluation."""
    dataset, score_mat = _load_inputs(data_path, schema_path, scores_path)
    lam = _parse_lambda(lambda_text, score_mat.n_outcomes)
    cfg = MopolConfig(
        tree=TreeFitConfig(kind=fitter, depth=depth),
        replicates=replicates,
        budget_iters=1,
        seed=seed,
    )
    report = fit_final(score_mat, dataset.covariates, lam, split, cfg,
                       treatments=dataset.treatments)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = dataset.provenance.get("covariate_names") or [
        f"x{j}" for j in range(dataset.p)
    ]
    payload = report.to_dict(feature_names=names)
    (out / "final_report.json").write_text(json.dumps(payload, indent=2) + "\n")
    (out / "tree.txt").write_text(export_tree(report.tree, names, "text"))
    (out / "tree.dot").write_text(export_tree(report.tree, names, "dot"))
    (out / "tree.json").write_text(json.dumps(tree_to_dict(report.tree), indent=2) + "\n")
    click.echo(
        f"train values {np.round(report.train_values, 4).tolist()}, "
        f"test values {np.round(report.test_values, 4).tolist()}"
    )


@main.command(name="eval")
@click.option("--tree", "tree_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--schema", "schema_path", required=True, type=click.Path(exists=True))
@click.option("--scores", "scores_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path())
@_fail_on_validation
def eval_cmd(tree_path, data_path, schema_path, scores_path, out_path):
    """Value an existing (possibly handpicked) tree on every outcome."""
    dataset, score_mat = _load_inputs(data_path, schema_path, scores_path)
    with open(tree_path) as fh:
        tree = tree_from_dict(json.load(fh))
    values = evaluate_outcomes(tree, score_mat, dataset.covariates)
    payload = {"values": values.tolist()}
    text = json.dumps(payload, indent=2) + "\n"
    if out_path:
        Path(out_path).write_text(text)
    click.echo(text.rstrip())


@main.command()
@click.option("--runs", "run_dirs", required=True, multiple=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_fail_on_validation
def report(run_dirs, out_dir):
    """Aggregate frontier-run traces into comparison tables and figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    traces, frontiers, summary = {}, {}, []
    for run in run_dirs:
        run = Path(run)
        trace_path = run / "trace.csv"
        if not trace_path.exists():
            raise MopolError(f"{run} has no trace.csv")
        frame = pd.read_csv(trace_path)
        traces[run.name] = frame
        front_path = run / "frontier.csv"
        if front_path.exists():
            frontiers[run.name] = pd.read_csv(front_path)
        summary.append(
            {
                "run": run.name,
                "iterations": len(frame),
                "final_hypervolume": frame["hypervolume"].iloc[-1],
                "total_fit_seconds": frame["fit_seconds"].sum(),
                "total_acq_seconds": frame["acq_seconds"].sum(),
                "mean_iteration_seconds": (
                    frame["fit_seconds"] + frame["acq_seconds"]
                ).mean(),
            }
        )
    pd.DataFrame(summary).to_csv(out / "summary.csv", index=False)
    plots.save_figure(plots.hypervolume_figure(traces), out / "hypervolume.png")
    plots.save_figure(plots.iteration_time_figure(traces), out / "iteration_time.png")
    if frontiers:
        plots.save_figure(plots.frontier_figure(frontiers), out / "frontier.png")
    first = next(iter(traces.values()))
    if "lambda_0" in first.columns:
        curves = {
            name: frame.sort_values("lambda_0") for name, frame in traces.items()
        }
        plots.save_figure(
            plots.value_curve_figure(next(iter(curves.values()))), out / "value_curve.png"
        )
    click.echo(f"wrote summary and figures to {out}")


if __name__ == "__main__":
    main()
