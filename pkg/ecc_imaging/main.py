"""
CLI interface for the coded-imaging simulator.
"""

import math
from pathlib import Path
from typing import Optional

import typer
from dotenv import load_dotenv
from pydantic import ValidationError

from .bpdecoder import decode
from .channel import read_measurements
from .errors import EccImagingError
from .harness import encode_cell, load_config, run_sweep
from .ltcode import load_graph
from .models import BinaryScene, BpConfig, PatternName, RemapMode
from .remap import remap_record
from .scene import make_test_pattern, write_image
from .settings import get_settings
from .utils import setup_logging
from .workflow import CellWorkflow

# Load environment variables
load_dotenv()

settings = get_settings()

# Setup logging
setup_logging(settings.log_level)

CONFIG_KEYS_HELP = (
    "Config keys: scene, width, height, block_count, shots, degree_distribution, snr_grid, seeds, "
    "master_seed, decoder_mode, hard_llr_magnitude, bp.max_iterations, bp.message_clamp, "
    "bp.stop_on_syndrome, methods, gi_probability, gp_iterations, gp_tolerance, y0_mean, noiseless, "
    "workers, output_dir, write_images, trace_bp, dump_remap."
)

app = typer.Typer(
    name="ecc-imaging",
    help="LT-coded single-pixel imaging simulator with uncoded ghost-imaging baselines",
    add_completion=False,
    no_args_is_help=True,
)


def _fail(message: str, code: int = 1) -> None:
    typer.echo(f"❌ Error: {message}", err=True)
    raise typer.Exit(code=code)


def _settings_defaults() -> dict:
    return {"workers": settings.workers, "output_dir": settings.output_dir}


@app.command(help="Run an SNR x seed sweep described by CONFIG (JSON or key = value). " + CONFIG_KEYS_HELP)
def run(
    config: Path = typer.Argument(..., help="Experiment config file"),
    output_dir: Optional[str] = typer.Option(None, "--output", "-o", help="Directory for results and images"),
    workers: Optional[int] = typer.Option(None, "--workers", "-w", help="Parallel cells"),
    trace_bp: bool = typer.Option(False, "--trace-bp", help="Write per-iteration BP traces"),
    dump_remap: bool = typer.Option(False, "--dump-remap", help="Write per-shot remap dumps"),
    visualize: bool = typer.Option(False, "--visualize", "-v", help="Write the cell pipeline as workflow.mmd"),
):
    try:
        cfg = load_config(
            config,
            defaults=_settings_defaults(),
            output_dir=output_dir,
            workers=workers,
            trace_bp=trace_bp or None,
            dump_remap=dump_remap or None,
        )
        if visualize:
            CellWorkflow(cfg).visualize(str(Path(cfg.output_dir) / "workflow.mmd"))
        result = run_sweep(cfg)
    except (EccImagingError, ValidationError, OSError) as e:
        _fail(str(e))

    typer.echo(f"\n{'='*80}")
    typer.echo(f"✅ Sweep complete: {len(result.rows)} rows")
    typer.echo(f"{'='*80}")
    typer.echo(f"Results: {result.results_path}")
    typer.echo(f"Summary: {result.summary_path}")
    if result.failures:
        typer.echo(f"\n⚠️  {len(result.failures)} cell(s) failed:", err=True)
        for failure in result.failures:
            typer.echo(f"  ✗ {failure.snr_db:g} dB, seed {failure.seed}: {failure.stage}: {failure.error}", err=True)
    raise typer.Exit(code=result.exit_code)


@app.command(name="decode")
def decode_command(
    graph_file: Path = typer.Argument(..., help="Graph file written by the encode command"),
    measurements: Path = typer.Argument(..., help="Measurement CSV written by the encode command"),
    mode: RemapMode = typer.Option(RemapMode.SOFT, "--mode", "-m", help="Remapping of readings to GF(2)"),
    width: Optional[int] = typer.Option(None, "--width", help="Image width (default: square)"),
    height: Optional[int] = typer.Option(None, "--height", help="Image height (default: square)"),
    max_iterations: int = typer.Option(50, "--max-iterations", help="BP iteration limit"),
    hard_llr_magnitude: float = typer.Option(20.0, "--hard-llr", help="LLR magnitude for hard decisions"),
    output: Path = typer.Option(Path("decoded.pbm"), "--output", "-o", help="Decoded PBM image"),
):
    """
    Decode one block from its graph file and measurement CSV into a PBM image.

    Example:
        ecc-imaging decode graph.txt measurements.csv --mode soft -o decoded.pbm
    """
    try:
        graph = load_graph(graph_file.read_text(encoding="utf-8"))
        record = read_measurements(measurements.read_text(encoding="utf-8"))
        if width is None or height is None:
            side = math.isqrt(graph.pixel_count)
            if side * side != graph.pixel_count:
                _fail(f"K={graph.pixel_count} is not square; pass --width and --height")
            width, height = side, side
        if width * height != graph.pixel_count:
            _fail(f"{width}x{height} does not match K={graph.pixel_count}")

        remapped = remap_record(record, graph, mode)
        result = decode(
            remapped.channel_llrs(hard_llr_magnitude), graph, BpConfig(max_iterations=max_iterations)
        )
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_bytes(write_image(BinaryScene(width=width, height=height, pixels=result.decoded)))
    except (EccImagingError, ValidationError, OSError) as e:
        _fail(str(e))

    status = "converged" if result.converged else "not converged"
    typer.echo(f"✅ Decoded {graph.pixel_count} pixels ({status} after {result.iterations_used} iterations)")
    typer.echo(f"Uncovered pixels: {result.uncovered.size}")
    typer.echo(f"💾 Image saved to: {output}")


@app.command(name="gen-pattern")
def gen_pattern(
    name: PatternName = typer.Argument(..., help="Test pattern"),
    width: int = typer.Option(64, "--width", help="Width in pixels"),
    height: int = typer.Option(64, "--height", help="Height in pixels"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="PBM path (default: NAME.pbm)"),
):
    """Write a built-in test scene as plain PBM."""
    output = output or Path(f"{name.value}.pbm")
    try:
        scene = make_test_pattern(name, width, height)
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_bytes(write_image(scene))
    except (EccImagingError, OSError) as e:
        _fail(str(e))
    typer.echo(f"💾 Pattern saved to: {output}")


@app.command()
def encode(
    config: Path = typer.Argument(..., help="Experiment config file"),
    seed: int = typer.Option(..., "--seed", "-s", help="Seed label of the cell"),
    snr: Optional[float] = typer.Option(None, "--snr", help="SNR in dB (default: first grid point)"),
    output_dir: Path = typer.Option(..., "--output-dir", "-o", help="Directory for graph and measurement files"),
):
    """
    Write the graph file(s) and measurement CSV(s) of one coded cell.

    Example:
        ecc-imaging encode experiment.json --seed 0 --snr -3 -o replay/
    """
    try:
        cfg = load_config(config, defaults=_settings_defaults())
        written = encode_cell(cfg, seed, cfg.snr_grid[0] if snr is None else snr, output_dir)
    except (EccImagingError, ValidationError, OSError) as e:
        _fail(str(e))
    for path in written:
        typer.echo(f"💾 {path}")


if __name__ == "__main__":
    app()
