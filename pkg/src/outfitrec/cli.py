"""Command-line entry point: gen, train, eval, score, gradcheck."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .data import SyntheticSpec, generate_synthetic, load_dataset, save_dataset
from .diagnostics import full_loss_grad_check
from .errors import UnseenTypePairError
from .evaluation import evaluate
from .model import FUSION_KINDS, load_model, save_model
from .compatibility import pair_score
from .training import TrainConfig, train_ensemble


@click.group()
def main():
    """Multimodal outfit compatibility: data generation, training, evaluation."""


@main.command()
@click.option("--out", required=True, type=click.Path(), help="output directory")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--num-types", default=8, show_default=True, type=int)
@click.option("--num-styles", default=6, show_default=True, type=int)
@click.option("--train-outfits", default=500, show_default=True, type=int)
@click.option("--valid-outfits", default=100, show_default=True, type=int)
@click.option("--fc-questions", default=2000, show_default=True, type=int)
@click.option("--fitb-questions", default=1000, show_default=True, type=int)
@click.option("--outfit-size", default=4, show_default=True, type=int)
@click.option("--num-regions", default=8, show_default=True, type=int)
@click.option("--num-words", default=6, show_default=True, type=int)
@click.option("--region-dim", default=16, show_default=True, type=int)
@click.option("--word-dim", default=16, show_default=True, type=int)
@click.option("--signal-rows", default=2, show_default=True, type=int)
@click.option("--signal-amplitude", default=3.0, show_default=True, type=float)
@click.option("--noise-scale", default=1.0, show_default=True, type=float)
@click.option("--undescribed-frac", default=0.0, show_default=True, type=float)
def gen(out, seed, **kwargs):
    """Generate a synthetic planted-signal dataset with FC/FITB questions."""
    spec = SyntheticSpec(**kwargs)
    dataset = generate_synthetic(spec, seed)
    manifest = save_dataset(dataset, out)
    click.echo(f"wrote {manifest} ({len(dataset.items)} items, "
               f"{sum(len(v) for v in dataset.outfits.values())} outfits, "
               f"{len(dataset.fc_questions)} FC / "
               f"{len(dataset.fitb_questions)} FITB questions)")


def _load_config(config_path, overrides) -> TrainConfig:
    raw = {}
    if config_path:
        raw = json.loads(Path(config_path).read_text())
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig.from_dict(raw)


@main.command(name="train")
@click.option("--data", required=True, type=click.Path(exists=True),
              help="dataset manifest path")
@click.option("--config", type=click.Path(exists=True),
              help="JSON training config (TrainConfig keys)")
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--fusion", type=click.Choice(FUSION_KINDS), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--runs", type=int, default=None)
@click.option("--epochs", type=int, default=None)
def train_cmd(data, config, out_dir, **overrides):
    """Train `runs` models and write checkpoints plus a metrics log."""
    cfg = _load_config(config, overrides)
    dataset = load_dataset(data)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(
        json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    results = train_ensemble(dataset, cfg)
    with open(out / "metrics.jsonl", "w") as fh:
        for run, (model, history) in enumerate(results):
            save_model(model, out / f"run{run}.ckpt")
            for stats in history:
                fh.write(json.dumps({
                    "run": run, "epoch": stats.epoch,
                    "mean_loss": stats.mean_loss,
                    "valid_auc": stats.valid_auc,
                    "skipped_pairs": stats.skipped_pairs,
                }, sort_keys=True) + "\n")
    click.echo(f"trained {len(results)} run(s) into {out}")


@main.command(name="eval")
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--checkpoints", required=True, type=click.Path(exists=True),
              help="checkpoint file or directory of run*.ckpt files")
@click.option("--report", required=True, type=click.Path())
def eval_cmd(data, checkpoints, report):
    """Evaluate checkpoints on the dataset's FC and FITB questions."""
    dataset = load_dataset(data)
    path = Path(checkpoints)
    files = sorted(path.glob("run*.ckpt")) if path.is_dir() else [path]
    if not files:
        raise click.ClickException(f"no checkpoints found under {path}")
    models = [load_model(f) for f in files]
    result = evaluate(dataset, models)
    Path(report).write_text(
        json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n")
    click.echo(f"FC AUC mean {result.fc_auc_mean:.4f} | "
               f"FITB accuracy mean {result.fitb_accuracy_mean:.4f} "
               f"(vote {result.fitb_accuracy_vote:.4f})")


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("-a", "item_a", required=True, help="first item id")
@click.option("-b", "item_b", required=True, help="second item id")
def score(data, checkpoint, item_a, item_b):
    """Print the compatibility score of two items."""
    dataset = load_dataset(data)
    model = load_model(checkpoint)
    for item_id in (item_a, item_b):
        if item_id not in dataset.items:
            raise click.ClickException(f"unknown item id {item_id!r}")
        if not dataset.items[item_id].described:
            raise click.ClickException(
                f"item {item_id!r} has no description and cannot be scored")
    try:
        value = pair_score(model, dataset.items[item_a], dataset.items[item_b])
    except UnseenTypePairError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"{value:.6f}")


@main.command()
@click.option("--fusion", default="all",
              type=click.Choice(FUSION_KINDS + ("all",)), show_default=True)
@click.option("--d-g", default=8, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--rel-tol", default=1e-4, show_default=True, type=float)
def gradcheck(fusion, d_g, seed, rel_tol):
    """Finite-difference check of the full training-loss gradient."""
    kinds = FUSION_KINDS if fusion == "all" else (fusion,)
    failed = False
    for kind in kinds:
        report = full_loss_grad_check(kind, d_g=d_g, d_c=d_g, h=d_g,
                                      seed=seed, rel_tol=rel_tol)
        status = "PASS" if report.passed else "FAIL"
        click.echo(f"{kind}: max rel err {report.max_rel_error:.3e} [{status}]")
        failed = failed or not report.passed
    if failed:
        sys.exit(1)


if __name__ == "__main__":
    main()
