"""Command-line frontend: simulate, train, segment, evaluate, report.

Configuration precedence is defaults < JSON config file < explicit flags. The
config file mirrors the parameter dataclasses: {"seg": {...}, "phantom": {...}};
unknown keys anywhere are rejected.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click

from .density import TargetModel
from .engine import SegParams, default_init, segment, train_model
from .evaluation import dice as dice_metric
from .evaluation import nmse as nmse_metric
from .evaluation import run_table1
from .fields import ScalarField
from .fileio import (contour_pixels, read_grd1, read_mask_pgm, write_grd1,
                     write_mask_pgm, write_overlay_ppm)
from .filters import SradParams
from .phantom import PhantomSpec, generate_dataset, read_dataset, write_dataset


def _field_names(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)}


def _load_config(path) -> dict:
    if path is None:
        return {}
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise click.ClickException("config file must hold a JSON object")
    unknown = set(doc) - {"seg", "phantom"}
    if unknown:
        raise click.ClickException(
            f"unknown config sections: {sorted(unknown)} (expected 'seg', 'phantom')"
        )
    for section, cls in (("seg", SegParams), ("phantom", PhantomSpec)):
        sub = doc.get(section, {})
        allowed = _field_names(cls)
        bad = set(sub) - allowed
        if bad:
            raise click.ClickException(
                f"unknown keys in config '{section}': {sorted(bad)}"
            )
        if section == "seg" and isinstance(sub.get("srad"), dict):
            bad = set(sub["srad"]) - _field_names(SradParams)
            if bad:
                raise click.ClickException(
                    f"unknown keys in config 'seg.srad': {sorted(bad)}"
                )
    return doc


def _seg_params(config: dict, **flags) -> SegParams:
    doc = dict(config.get("seg", {}))
    if isinstance(doc.get("srad"), dict):
        doc["srad"] = SradParams(**doc["srad"])
    doc.update({k: v for k, v in flags.items() if v is not None})
    try:
        return SegParams(**doc)
    except (TypeError, ValueError) as exc:
        raise click.ClickException(f"invalid segmentation parameters: {exc}")


def _phantom_spec(config: dict, **flags) -> PhantomSpec:
    doc = dict(config.get("phantom", {}))
    if "semi_axes" in doc:
        doc["semi_axes"] = tuple(doc["semi_axes"])
    doc.update({k: v for k, v in flags.items() if v is not None})
    try:
        return PhantomSpec(**doc)
    except (TypeError, ValueError) as exc:
        raise click.ClickException(f"invalid phantom parameters: {exc}")


_CONFIG_OPT = click.option(
    "--config", type=click.Path(exists=True, dir_okay=False), default=None,
    help="JSON config file; flags override its values.",
)


@click.group()
def main():
    """Distribution-tracking level-set segmentation toolkit."""


@main.command()
@_CONFIG_OPT
@click.option("--contrast", type=float, default=None,
              help="Inside:outside reflectivity variance ratio (> 1). [default: 3.0]")
@click.option("--n", "n_samples", type=int, default=40, show_default=True,
              help="Number of samples (training split comes first).")
@click.option("--split", type=float, default=0.5, show_default=True,
              help="Training fraction of the dataset.")
@click.option("--seed", type=int, default=None,
              help="Base RNG seed; sample i uses seed + i. [default: 0]")
@click.option("--rows", type=int, default=None, help="Image rows. [default: 128]")
@click.option("--cols", type=int, default=None, help="Image cols. [default: 128]")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True,
              help="Output dataset directory.")
def simulate(config, contrast, n_samples, split, seed, rows, cols, out_dir):
    """Generate a synthetic ultrasound phantom dataset."""
    cfg = _load_config(config)
    spec = _phantom_spec(cfg, contrast_ratio=contrast, seed=seed, rows=rows,
                         cols=cols)
    try:
        train, test = generate_dataset(spec, n_samples, split)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    write_dataset(out_dir, spec, train, test)
    click.echo(f"wrote {len(train)} training + {len(test)} test samples to {out_dir}")


@main.command()
@_CONFIG_OPT
@click.option("--dataset", "dataset_dir", required=True,
              type=click.Path(exists=True, file_okay=False),
              help="Dataset directory from `simulate`.")
@click.option("--out", "model_path", type=click.Path(dir_okay=False), required=True,
              help="Output model JSON file.")
def train(config, dataset_dir, model_path):
    """Train a target model from the training split of a dataset."""
    cfg = _load_config(config)
    params = _seg_params(cfg)
    _spec, train_pairs, _test = read_dataset(dataset_dir)
    if not train_pairs:
        raise click.ClickException("dataset has no training samples")
    model = train_model(train_pairs, params)
    model.save(model_path)
    click.echo(f"trained on {len(train_pairs)} images; d={model.d} features")
    for name, pdf in zip(model.feature_names, model.feature_pdfs):
        click.echo(f"  {name}: {pdf.n_bins} bins on [{pdf.z_min:.4g}, {pdf.z_max:.4g}]")
    pdf = model.curvature_pdf
    click.echo(f"  curvature: {pdf.n_bins} bins on [{pdf.z_min:.4g}, {pdf.z_max:.4g}]")
    click.echo(f"model written to {model_path}")


def _seg_flag_options(fn):
    for name, kind, text in [
        ("alpha", float, "Photometric velocity weight."),
        ("beta", float, "Shape-prior weight."),
        ("dt", float, "Explicit velocity step."),
        ("aos-dt", float, "Implicit geodesic step."),
        ("conv-tol", float, "Convergence threshold."),
        ("max-iters", int, "Iteration cap."),
    ]:
        fn = click.option(f"--{name}", type=kind, default=None, help=text)(fn)
    return fn


@main.command(name="segment")
@_CONFIG_OPT
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Model JSON file.")
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Envelope image (GRD1).")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True,
              help="Output directory (mask.pgm, phi.grd1, trace.csv, overlay.ppm).")
@click.option("--no-shape-prior", is_flag=True, default=False,
              help="Disable the curvature prior (sets beta to 0).")
@_seg_flag_options
def segment_cmd(config, model_path, input_path, out_dir, no_shape_prior,
                alpha, beta, dt, aos_dt, conv_tol, max_iters):
    """Segment one envelope image with a trained model."""
    cfg = _load_config(config)
    params = _seg_params(cfg, alpha=alpha, beta=beta, dt=dt, aos_dt=aos_dt,
                         conv_tol=conv_tol, max_iters=max_iters)
    if no_shape_prior:
        params = params.with_overrides(beta=0.0)
    model = TargetModel.load(model_path)
    u = read_grd1(input_path)
    result = segment(u, model, default_init(u), params)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_mask_pgm(out / "mask.pgm", result.mask)
    write_grd1(out / "phi.grd1", result.levelset.phi)
    with open(out / "trace.csv", "w", encoding="utf-8") as fh:
        fh.write("iter,B,B_kappa,delta,area\n")
        for row in result.trace:
            fh.write(f"{row.iteration},{row.B:.17g},{row.B_kappa:.17g},"
                     f"{row.delta:.17g},{row.area:.17g}\n")
    write_overlay_ppm(out / "overlay.ppm", u,
                      contour_pixels(result.levelset.phi.data))
    if result.failed:
        raise click.ClickException(f"segmentation failed: {result.failure_reason}")
    state = "converged" if result.converged else "iteration cap reached"
    click.echo(f"{state} after {result.iterations} iterations; outputs in {out_dir}")


@main.command()
@click.option("--truth", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Ground-truth mask (PGM).")
@click.option("--estimate", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Estimated mask (PGM).")
def evaluate(truth, estimate):
    """NMSE and Dice between two binary masks."""
    t = read_mask_pgm(truth)
    e = read_mask_pgm(estimate)
    try:
        click.echo(f"nmse {nmse_metric(t, e):.6f}")
        click.echo(f"dice {dice_metric(t, e):.6f}")
    except ValueError as exc:
        raise click.ClickException(str(exc))


@main.command()
@_CONFIG_OPT
@click.option("--dataset", "dataset_dirs", multiple=True, required=True,
              type=click.Path(file_okay=False),
              help="Dataset directory; repeat once per contrast.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True,
              help="Report output directory.")
@click.option("--only-with-priors", is_flag=True, default=False,
              help="Skip the beta=0 comparison runs.")
@_seg_flag_options
def report(config, dataset_dirs, out_dir, only_with_priors,
           alpha, beta, dt, aos_dt, conv_tol, max_iters):
    """Multi-contrast NMSE benchmark with and without the shape prior."""
    cfg = _load_config(config)
    params = _seg_params(cfg, alpha=alpha, beta=beta, dt=dt, aos_dt=aos_dt,
                         conv_tol=conv_tol, max_iters=max_iters)

    missing = [d for d in dataset_dirs
               if not (Path(d) / "manifest.json").is_file()]
    if missing:
        raise click.ClickException(f"missing dataset manifests: {missing}")

    datasets = {}
    models = {}
    for d in dataset_dirs:
        spec, train_pairs, test_pairs = read_dataset(d)
        c = spec.contrast_ratio
        if c in datasets:
            raise click.ClickException(f"duplicate contrast {c:g} in --dataset list")
        if not train_pairs or not test_pairs:
            raise click.ClickException(f"{d}: needs both training and test samples")
        datasets[c] = test_pairs
        model_file = Path(d) / "model.json"
        if model_file.is_file():
            models[c] = TargetModel.load(model_file)
        else:
            click.echo(f"training model for contrast {c:g} "
                       f"({len(train_pairs)} images)...")
            models[c] = train_model(train_pairs, params)
            models[c].save(model_file)

    rep = run_table1(datasets, models, params, with_priors_only=only_with_priors)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(rep.to_csv(), encoding="utf-8")
    (out / "report.json").write_text(rep.to_json(), encoding="utf-8")
    table = rep.to_table()
    (out / "report.txt").write_text(table, encoding="utf-8")
    for key, trace in rep.traces.items():
        with open(out / f"trace_{key}.csv", "w", encoding="utf-8") as fh:
            fh.write("iter,B,B_kappa\n")
            for row in trace:
                fh.write(f"{row.iteration},{row.B:.17g},{row.B_kappa:.17g}\n")
    click.echo(table, nl=False)
    click.echo(f"report written to {out_dir}")


if __name__ == "__main__":
    main()
