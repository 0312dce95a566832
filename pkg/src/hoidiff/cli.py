"""
Command-line interface for the HOI image diffusion toolkit, built on Typer and Rich.

Every command loads a layered run configuration (TOML file, then ``--ablation``
toggles, then ``--set`` overrides, then ``--seed``), echoes the resolved config
into its output directory and exits with 0 on success, 1 on a runtime failure
and 2 on a configuration or usage error.
"""

from __future__ import annotations

from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import structlog
import typer
from pydantic import ValidationError
from rich import print as rprint
from rich.console import Console
from rich.panel import Panel
from rich.progress import BarColumn
from rich.progress import Progress
from rich.progress import SpinnerColumn
from rich.progress import TextColumn
from rich.table import Table

from . import __version__
from .builders import EvaluationPayload
from .builders import build_artifact
from .builders import get_supported_formats
from .config import RESOLVED_CONFIG_NAME
from .config import Settings
from .config import example_config_text
from .config import load_run_config
from .config import write_resolved_config
from .denoiser import Denoiser
from .denoiser import DenoiserConfig
from .denoiser import count_parameters
from .denoiser import load_checkpoint
from .diffusion import create_process
from .diffusion import run_diagnostics
from .diffusion import schedule_from_config
from .errors import ConfigError
from .errors import HoiDiffError
from .errors import MissingPairError
from .experiments import ABLATIONS
from .experiments import ablation_overrides
from .inference import DenoiserPredictor
from .inference import OraclePredictor
from .inference import evaluate
from .inference import initial_images
from .inference import postprocess
from .inference import predict_pairs
from .inference import reverse_sample_batch
from .log import configure_logging
from .models import InitMode
from .models import PairSample
from .models import RunConfig
from .rng import STREAM_INFERENCE
from .rng import derive_rng
from .training import train as run_training
from .world import SyntheticDataset
from .world import generate_dataset
from .world import read_dataset
from .world import write_dataset

console = Console()
logger = structlog.get_logger(__name__)

app = typer.Typer(
    name="hoidiff",
    help="🧩 HOI image diffusion: synthetic benchmark, denoiser training and evaluation",
    add_completion=False,
    rich_markup_mode="rich",
)

DIAGNOSTICS_FILE = "diagnostics.txt"

# Shared options
ConfigOption = typer.Option(None, "--config", "-c", help="Run configuration TOML file")
SetOption = typer.Option(
    None, "--set", "-s", help="Override a config value: section.key=value (repeatable)"
)
AblationOption = typer.Option(
    None, "--ablation", "-a", help=f"Ablation toggle (repeatable): {', '.join(ABLATIONS)}"
)
SeedOption = typer.Option(None, "--seed", help="Master seed (overrides the config file)")


def version_callback(show_version: bool) -> None:
    """Show version information."""
    if show_version:
        rprint(f"[bold blue]hoidiff[/bold blue] v{__version__}")
        rprint("[dim]Multinomial diffusion over HOI images[/dim]")
        raise typer.Exit()


@contextmanager
def cli_errors() -> Iterator[None]:
    """Map library failures onto exit codes: 2 for configuration, 1 otherwise."""
    try:
        yield
    except ConfigError as e:
        console.print(f"❌ [bold red]Configuration error:[/bold red] {e}")
        raise typer.Exit(2) from e
    except HoiDiffError as e:
        console.print(f"❌ [bold red]{type(e).__name__}:[/bold red] {e}")
        raise typer.Exit(1) from e


def resolve_config(
    config_file: Path | None,
    overrides: list[str] | None,
    ablations: list[str] | None,
    seed: int | None,
) -> RunConfig:
    """Layer the config file, ablations, ``--set`` assignments and ``--seed``."""
    assignments = ablation_overrides(ablations or []) + list(overrides or [])
    if seed is not None:
        assignments.append(f"seed={seed}")
    return load_run_config(config_file, assignments)


def settings_from(ctx: typer.Context) -> Settings:
    return ctx.obj if isinstance(ctx.obj, Settings) else Settings()


def adopt_dataset_world(cfg: RunConfig, dataset: SyntheticDataset) -> RunConfig:
    """Take H, W and D_a (and the rest of the world section) from the dataset header."""
    if cfg.world != dataset.config:
        logger.info("world_from_dataset", h=dataset.config.h, w=dataset.config.w)
    return cfg.model_copy(update={"world": dataset.config})


def check_compatible(model: Denoiser, cfg: RunConfig) -> None:
    """A checkpoint must match the dataset shape and the schedule length."""
    mc = model.config
    expected = (cfg.world.h, cfg.world.w, cfg.world.d_a, cfg.schedule.steps)
    if (mc.h, mc.w, mc.d_a, mc.steps) != expected:
        raise ConfigError(
            f"checkpoint expects (H, W, d_a, K) = {(mc.h, mc.w, mc.d_a, mc.steps)}, "
            f"config gives {expected}"
        )


def checkpoint_config_file(config_file: Path | None, checkpoint: Path) -> Path | None:
    """Default to the resolved config saved next to a checkpoint."""
    if config_file is not None:
        return config_file
    saved = checkpoint.parent / RESOLVED_CONFIG_NAME
    return saved if saved.exists() else None


@app.callback()
def main(
    ctx: typer.Context,
    version: bool | None = typer.Option(
        None,
        "--version",
        "-v",
        callback=version_callback,
        is_eager=True,
        help="Show version and exit",
    ),
    verbose: bool = typer.Option(False, "--verbose", help="Log at DEBUG level"),
) -> None:
    """
    🧩 HOI image diffusion toolkit

    Generate a synthetic human-object interaction benchmark, train a slice-patchified
    denoiser on it, and evaluate the reverse diffusion process.
    """
    try:
        settings = Settings()
    except ValidationError as e:
        console.print(f"❌ [bold red]Invalid environment settings:[/bold red] {e}")
        raise typer.Exit(2) from e
    if verbose:
        settings = settings.model_copy(update={"log_level": "DEBUG"})
    configure_logging(settings)
    ctx.obj = settings


@app.command()
def init(
    path: Path = typer.Argument(Path("hoidiff.toml"), help="Where to write the config"),
    force: bool = typer.Option(False, "--force", help="Overwrite an existing file"),
) -> None:
    """🚀 Write an example run configuration with every default spelled out."""
    if path.exists() and not force:
        console.print(f"❌ [bold red]{path} already exists[/bold red] (use --force)")
        raise typer.Exit(2)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(example_config_text(), encoding="utf-8")
    console.print(f"✅ Created {path}")

    panel = Panel(
        f"""[bold]Next Steps:[/bold]

1. Generate data: [cyan]hoidiff gen --config {path} --out data/[/cyan]
2. Train: [cyan]hoidiff train --config {path} --data data/ --out runs/main[/cyan]
3. Evaluate: [cyan]hoidiff eval --checkpoint runs/main/model.hidf --data data/ --out runs/main/eval[/cyan]
4. Check the forward process: [cyan]hoidiff diag --config {path}[/cyan]

[dim]For help: hoidiff --help[/dim]""",
        title="🎯 Getting Started",
        border_style="green",
    )
    console.print(panel)


@app.command()
def status(
    ctx: typer.Context,
    config_file: Path | None = ConfigOption,
    overrides: list[str] | None = SetOption,
    ablations: list[str] | None = AblationOption,
    seed: int | None = SeedOption,
) -> None:
    """📊 Show the resolved configuration and the denoiser size."""
    settings = settings_from(ctx)
    with cli_errors():
        cfg = resolve_config(config_file, overrides, ablations, seed)
        n_params = count_parameters(DenoiserConfig.from_run_config(cfg))

    table = Table(title="Resolved Configuration", show_header=True, header_style="bold magenta")
    table.add_column("Section", style="cyan", width=12)
    table.add_column("Key", style="bright_white")
    table.add_column("Value", style="dim")

    table.add_row("", "seed", str(cfg.seed))
    for section, values in cfg.model_dump(mode="json", exclude={"seed"}).items():
        for key, value in values.items():
            table.add_row(section, key, str(value))
            section = ""
    console.print(table)

    console.print(f"\n[bold]Denoiser parameters:[/bold] {n_params:,}")
    console.print(f"[bold]Worker threads:[/bold] {settings.threads}")
    console.print(f"[bold]Artifact formats:[/bold] {', '.join(get_supported_formats())}")


@app.command()
def gen(
    ctx: typer.Context,
    out: Path = typer.Option(Path("data"), "--out", "-o", help="Dataset directory"),
    config_file: Path | None = ConfigOption,
    overrides: list[str] | None = SetOption,
    ablations: list[str] | None = AblationOption,
    seed: int | None = SeedOption,
) -> None:
    """🌍 Generate the synthetic benchmark (train/test splits plus header)."""
    settings = settings_from(ctx)
    with cli_errors():
        cfg = resolve_config(config_file, overrides, ablations, seed)
        with console.status("[bold green]Generating scenes..."):
            dataset = generate_dataset(cfg.world, threads=settings.threads)
            header = write_dataset(dataset, out)
            write_resolved_config(cfg, out)

    table = Table(title="Synthetic Dataset", show_header=False)
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="bold")
    table.add_row("Train pairs", str(len(dataset.train)))
    table.add_row("Test pairs", str(len(dataset.test)))
    table.add_row("Rare combinations", str(len(dataset.rare_combos)))
    table.add_row("Content SHA-256", header["content_sha256"])
    console.print(table)
    console.print(f"\n📁 Output directory: {out}")


@app.command()
def train(
    data: Path = typer.Option(Path("data"), "--data", "-d", help="Dataset directory"),
    out: Path = typer.Option(Path("runs/train"), "--out", "-o", help="Run directory"),
    resume: bool = typer.Option(False, "--resume", help="Continue from the run directory"),
    config_file: Path | None = ConfigOption,
    overrides: list[str] | None = SetOption,
    ablations: list[str] | None = AblationOption,
    seed: int | None = SeedOption,
) -> None:
    """🏋️ Train the denoiser on the training split."""
    with cli_errors():
        cfg = resolve_config(config_file, overrides, ablations, seed)
        dataset = read_dataset(data)
        cfg = adopt_dataset_world(cfg, dataset)

        with Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            TextColumn("{task.completed}/{task.total}"),
            console=console,
        ) as progress:
            task = progress.add_task("Training...", total=None)

            def report(step: int, total: int, loss: float) -> None:
                progress.update(
                    task, completed=step, total=total, description=f"Training (loss {loss:.3e})"
                )

            result = run_training(dataset.train, cfg, out, resume=resume, progress=report)

    if result.interrupted:
        console.print("\n⏸️  [bold yellow]Training interrupted; resumable checkpoint saved[/bold yellow]")
    else:
        console.print("\n✅ [bold green]Training completed[/bold green]")

    table = Table(title="Training Run", show_header=False)
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="bold")
    table.add_row("Steps", str(result.steps))
    table.add_row("Epochs", str(result.epochs))
    table.add_row("Final loss", f"{result.final_loss:.6g}")
    table.add_row("Checkpoint", str(result.checkpoint))
    table.add_row("Metrics log", str(result.metrics_path))
    console.print(table)


def _sample_detections(
    cfg: RunConfig,
    pairs: list[PairSample],
    checkpoint: Path | None,
    oracle: bool,
    threads: int,
) -> np.ndarray:
    process = create_process(cfg.schedule.process, schedule_from_config(cfg.schedule))
    if oracle:
        predictor = OraclePredictor.for_pairs(pairs, cfg.world.w)
    else:
        if checkpoint is None:
            raise ConfigError("eval needs --checkpoint unless --oracle is given")
        model = load_checkpoint(checkpoint)
        check_compatible(model, cfg)
        predictor = DenoiserPredictor(model)
    logger.debug("sampling_started", pairs=len(pairs), threads=threads)
    return predict_pairs(
        pairs,
        predictor,
        process,
        w=cfg.world.w,
        init_mode=cfg.inference.init_mode,
        mode=cfg.inference.mode,
        batch_size=cfg.inference.batch_size,
        seed=cfg.seed,
        threads=threads,
    )


@app.command("eval")
def evaluate_command(
    ctx: typer.Context,
    data: Path = typer.Option(Path("data"), "--data", "-d", help="Dataset directory"),
    out: Path = typer.Option(Path("runs/eval"), "--out", "-o", help="Metrics directory"),
    checkpoint: Path | None = typer.Option(None, "--checkpoint", help="Trained model.hidf"),
    oracle: bool = typer.Option(
        False, "--oracle", help="Use ground-truth clean images instead of a model"
    ),
    split: str = typer.Option("test", "--split", help="Split to evaluate"),
    config_file: Path | None = ConfigOption,
    overrides: list[str] | None = SetOption,
    ablations: list[str] | None = AblationOption,
    seed: int | None = SeedOption,
) -> None:
    """📏 Reverse-sample, post-process and score a split; writes metrics and results."""
    settings = settings_from(ctx)
    with cli_errors():
        if checkpoint is not None:
            config_file = checkpoint_config_file(config_file, checkpoint)
        cfg = resolve_config(config_file, overrides, ablations, seed)
        dataset = read_dataset(data)
        cfg = adopt_dataset_world(cfg, dataset)
        if split not in ("train", "test"):
            raise ConfigError(f"unknown split {split!r}; use train or test")
        pairs = dataset.split(split)
        w = cfg.world.w

        with console.status("[bold green]Running the reverse process...") as status_line:
            predicted = _sample_detections(cfg, pairs, checkpoint, oracle, settings.threads)
            status_line.update("[bold green]Post-processing...")
            result = postprocess(
                list(zip(pairs, predicted, strict=True)), score_mode=cfg.inference.score_mode
            )
            baseline = postprocess(
                list(zip(pairs, initial_images(pairs, w, InitMode.PRIOR), strict=True)),
                score_mode=cfg.inference.score_mode,
            )
            status_line.update("[bold green]Scoring...")
            rare = dataset.rare_set
            reports = {
                "oracle" if oracle else "model": evaluate(result, pairs, w, rare),
                "prior_only": evaluate(baseline, pairs, w, rare),
            }
            payload = EvaluationPayload(
                reports=reports,
                meta={
                    "split": split,
                    "predictor": "oracle" if oracle else str(checkpoint),
                    "process": cfg.schedule.process.value,
                    "mode": cfg.inference.mode.value,
                    "init_mode": cfg.inference.init_mode.value,
                    "score_mode": cfg.inference.score_mode.value,
                },
            )
            written = [
                build_artifact("table", payload, out),
                build_artifact("kv", payload, out),
                build_artifact("results", result, out),
                write_resolved_config(cfg, out),
            ]

    table = Table(title="Evaluation", show_header=True, header_style="bold magenta")
    table.add_column("Metric", style="cyan")
    for name in reports:
        table.add_column(name, justify="right")
    keys = ("object_accuracy", "triplet_f1", "map", "map_rare", "map_non_rare", "map_known_object")
    for key in keys:
        table.add_row(key, *(f"{reports[name].summary()[key]:.4f}" for name in reports))
    console.print(table)
    for path in written:
        console.print(f"📄 {path}")


@app.command()
def diag(
    out: Path = typer.Option(Path("runs/diag"), "--out", "-o", help="Report directory"),
    config_file: Path | None = ConfigOption,
    overrides: list[str] | None = SetOption,
    ablations: list[str] | None = AblationOption,
    seed: int | None = SeedOption,
) -> None:
    """🔬 Run the forward-process statistical checks; exits 1 if any check fails."""
    with cli_errors():
        cfg = resolve_config(config_file, overrides, ablations, seed)
        schedule = schedule_from_config(cfg.schedule)
        with console.status("[bold green]Simulating forward chains..."):
            results = run_diagnostics(schedule, cfg.diagnostics, seed=cfg.seed)
        out.mkdir(parents=True, exist_ok=True)
        report = out / DIAGNOSTICS_FILE
        report.write_text("".join(f"{r.as_line()}\n" for r in results), encoding="utf-8")
        write_resolved_config(cfg, out)

    table = Table(title="Forward-Process Diagnostics", show_header=True, header_style="bold magenta")
    table.add_column("Check", style="cyan")
    table.add_column("Status", width=8)
    table.add_column("Measured", justify="right")
    table.add_column("Threshold", justify="right")
    table.add_column("Margin", justify="right", style="dim")
    for r in results:
        table.add_row(
            r.name,
            "✅ PASS" if r.passed else "❌ FAIL",
            f"{r.measured:.4g}",
            f"{r.threshold:.4g}",
            f"{r.margin:.4g}",
        )
    console.print(table)
    console.print(f"\n📄 {report}")

    if not all(r.passed for r in results):
        raise typer.Exit(1)


@app.command("export-trajectory")
def export_trajectory(
    checkpoint: Path = typer.Option(..., "--checkpoint", help="Trained model.hidf"),
    pair_id: int = typer.Option(..., "--pair", "-p", help="pair_id to trace"),
    data: Path = typer.Option(Path("data"), "--data", "-d", help="Dataset directory"),
    out: Path = typer.Option(Path("runs/trajectory"), "--out", "-o", help="Output directory"),
    split: str = typer.Option("test", "--split", help="Split holding the pair"),
    config_file: Path | None = ConfigOption,
    overrides: list[str] | None = SetOption,
    ablations: list[str] | None = AblationOption,
    seed: int | None = SeedOption,
) -> None:
    """🎞️ Export every reverse step of one pair as P6 pixmaps plus a CSV value dump."""
    with cli_errors():
        cfg = resolve_config(checkpoint_config_file(config_file, checkpoint), overrides, ablations, seed)
        dataset = read_dataset(data)
        cfg = adopt_dataset_world(cfg, dataset)
        if split not in ("train", "test"):
            raise ConfigError(f"unknown split {split!r}; use train or test")
        pair = next((p for p in dataset.split(split) if p.pair_id == pair_id), None)
        if pair is None:
            raise MissingPairError(f"pair {pair_id} is not in the {split} split", pair_id=pair_id)

        model = load_checkpoint(checkpoint)
        check_compatible(model, cfg)
        process = create_process(cfg.schedule.process, schedule_from_config(cfg.schedule))
        with console.status("[bold green]Tracing the reverse process..."):
            _, trajectories = reverse_sample_batch(
                initial_images([pair], cfg.world.w, cfg.inference.init_mode),
                pair.appearance_array[None],
                DenoiserPredictor(model),
                process,
                mode=cfg.inference.mode,
                rng=derive_rng(cfg.seed, STREAM_INFERENCE, pair_id),
                record=True,
            )
            trajectory = trajectories[0]
            build_artifact("ppm", trajectory, out)
            values = build_artifact("values", trajectory, out)
            write_resolved_config(cfg, out)

    console.print(
        f"✅ [bold green]Exported {len(trajectory)} steps[/bold green] of pair {pair_id}"
    )
    console.print(f"📄 {values}")
    console.print(f"📁 Output directory: {out}")


if __name__ == "__main__":
    app()
