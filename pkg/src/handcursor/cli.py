"""Command line interface: run, record, calibrate, eval."""

import json
import logging
import sys

import click

from . import evaluation, pipeline
from .references import save_references
from .runtime import find_model_file, load_model

logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
logger = logging.getLogger(__name__)


@click.group()
def main():
    """Hand-gesture cursor control pipeline."""


@main.command("run")
@click.option("--models", "models_dir", required=True, type=click.Path(exists=True))
@click.option("--references", "references_path", required=True, type=click.Path(exists=True))
@click.option("--camera", "camera_index", type=int, default=None, help="Camera index.")
@click.option("--replay", "replay_dir", type=click.Path(exists=True), default=None)
@click.option("--dry-run", is_flag=True, default=False)
@click.option("--min-score", type=float, default=0.5, show_default=True)
@click.option("--mirror/--no-mirror", "mirror_x", default=True, show_default=True)
@click.option("--alpha", type=float, default=0.6, show_default=True)
@click.option("--debounce", "debounce_frames", type=int, default=3, show_default=True)
@click.option("--cooldown", "cooldown_ms", type=float, default=700.0, show_default=True)
@click.option("--serve", "serve_port", type=int, default=None, help="Telemetry port.")
@click.option("--strict-agreement", is_flag=True, default=False)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Flat JSON config; explicit flags override it.")
@click.option("--screen", "screen", default=None, help="Screen size as WxH.")
@click.option("--fps-cap", "target_fps", type=float, default=None)
@click.option("--max-frames", type=int, default=None)
@click.option("--command-log", "command_log_path", type=click.Path(), default=None,
              help="Write the simulated-backend command log here.")
@click.option("--static-dir", type=click.Path(exists=True), default=None,
              help="Serve these files (the dashboard) on the telemetry port.")
def run_command(config_path, screen, command_log_path, **flags):
    """Run the live or replayed cursor-control loop."""
    if screen:
        width, _, height = screen.partition("x")
        flags["screen_width"] = int(width)
        flags["screen_height"] = int(height)
    if config_path:
        # Only non-default flags should win over the file; click exposes that
        # through the parameter source.
        ctx = click.get_current_context()
        file_config = json.load(open(config_path, "r", encoding="utf-8"))
        for key, value in flags.items():
            source = ctx.get_parameter_source(key)
            if source is not None and source.name == "DEFAULT" and key in file_config:
                flags[key] = file_config[key]
        unknown = set(file_config) - set(flags)
        if unknown:
            raise click.UsageError(f"unknown config keys: {sorted(unknown)}")
    config = pipeline.PipelineConfig(**flags)
    try:
        summary = pipeline.run(config)
    except Exception as exc:
        raise click.ClickException(str(exc))
    if command_log_path:
        with open(command_log_path, "w", encoding="utf-8") as fh:
            fh.write(summary.command_log)
    click.echo(
        f"frames={summary.frames} commands={summary.commands} "
        f"(moves={summary.moves} clicks={summary.clicks} right_clicks={summary.right_clicks}) "
        f"skipped={summary.skipped_no_detection} rejected={summary.rejected_unknown} "
        f"mean_fps={summary.mean_fps and round(summary.mean_fps, 2)}"
    )


@main.command("record")
@click.option("--out", "output_dir", required=True, type=click.Path())
@click.option("--seconds", type=float, required=True)
@click.option("--camera", "camera_index", type=int, default=0, show_default=True)
def record_command(output_dir, seconds, camera_index):
    """Capture webcam frames into a replayable recording."""
    try:
        recording = pipeline.record(output_dir, seconds, camera_index)
    except Exception as exc:
        raise click.ClickException(str(exc))
    click.echo(f"recorded {recording.frame_count} frames to {output_dir}")


@main.command("calibrate")
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True))
@click.option("--models", "models_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "output_path", required=True, type=click.Path())
def calibrate_command(dataset_dir, models_dir, output_path):
    """Build reference vectors and thresholds from a labeled dataset."""
    try:
        dataset = evaluation.load_dataset(dataset_dir)
        model = load_model(find_model_file(models_dir, "classifier"))
        refs = pipeline.calibrate_from_dataset(dataset, model)
        save_references(refs, output_path)
    except Exception as exc:
        raise click.ClickException(str(exc))
    click.echo(
        f"wrote {output_path}: dim={refs.embedding_dim} "
        f"samples={sum(refs.sample_counts)}"
    )


@main.command("eval")
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True))
@click.option("--models", "models_dir", required=True, type=click.Path(exists=True))
@click.option("--references", "references_path", type=click.Path(exists=True), default=None)
@click.option("--report", "report_path", required=True, type=click.Path())
@click.option("--split", default="test", show_default=True)
@click.option("--strict-agreement", is_flag=True, default=False)
def eval_command(dataset_dir, models_dir, references_path, report_path, split, strict_agreement):
    """Evaluate classification accuracy and the mode confusion matrix."""
    from .references import load_references

    try:
        dataset = evaluation.load_dataset(dataset_dir)
        model = load_model(find_model_file(models_dir, "classifier"))
        refs = load_references(references_path) if references_path else None
        report = evaluation.evaluate_dataset(
            dataset, model, refs, split=split, strict_agreement=strict_agreement
        )
        evaluation.render_report(report, report_path)
    except Exception as exc:
        raise click.ClickException(str(exc))
    click.echo(evaluation.format_confusion_table(report.matrix))
    click.echo(f"aggregate accuracy: {report.aggregate_accuracy:.4f}")
    click.echo(f"classifier accuracy: {report.classifier_accuracy:.4f}")
    if report.gated_accuracy is not None:
        click.echo(f"gated accuracy: {report.gated_accuracy:.4f}")
    click.echo(f"report written to {report_path}")


if __name__ == "__main__":
    sys.exit(main())
