"""Training/export command line: train, export-detector."""

import json
import logging
import sys

import click

from .export import export_classifier, export_detector
from .train import TrainConfig, train_classifier

logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")


@click.group()
def main():
    """Train the gesture classifier and export runtime model files."""


@main.command("train")
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--epochs", type=int, default=20, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--batch-size", type=int, default=32, show_default=True)
@click.option("--lr", "learning_rate", type=float, default=1e-3, show_default=True)
@click.option("--pretrained", is_flag=True, default=False,
              help="Start from ImageNet backbone weights (needs download access).")
def train_command(data_dir, epochs, out_dir, batch_size, learning_rate, pretrained):
    """Train the classifier and export classifier.pt + references.json."""
    try:
        config = TrainConfig(
            data_dir=data_dir,
            epochs=epochs,
            batch_size=batch_size,
            learning_rate=learning_rate,
            pretrained=pretrained,
        )
        model, metrics = train_classifier(config)
        model_path, references_path = export_classifier(model, out_dir, dataset_dir=data_dir)
    except Exception as exc:
        raise click.ClickException(str(exc))
    click.echo(json.dumps(metrics, indent=2))
    click.echo(f"wrote {model_path} and {references_path}")


@main.command("export-detector")
@click.option("--ckpt", "checkpoint", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def export_detector_command(checkpoint, out_dir):
    """Convert a hand-SSD checkpoint to the runtime detector contract."""
    try:
        path = export_detector(checkpoint, out_dir)
    except Exception as exc:
        raise click.ClickException(str(exc))
    click.echo(f"wrote {path}")


if __name__ == "__main__":
    sys.exit(main())
