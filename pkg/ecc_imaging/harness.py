"""
Experiment orchestration: config loading, single cells and SNR x seed sweeps.
"""

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import ValidationError

from .channel import write_measurements
from .errors import ConfigurationError, EccImagingError, StageError
from .ltcode import dump_graph
from .metrics import render_report, sort_rows, write_failures, write_results, write_summary
from .models import CellFailure, CellOutput, ExperimentConfig, ScoreRow, SweepResult
from .scene import load_scene, partition
from .workflow import CellWorkflow, coded_acquisition

logger = logging.getLogger(__name__)

LIST_KEYS = {"snr_grid", "seeds", "methods"}


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        pass
    if "," in raw:
        return [_parse_value(item.strip()) for item in raw.split(",") if item.strip()]
    return raw


def parse_flat_config(text: str) -> Dict[str, Any]:
    """
    Parse a flat `key = value` document.

    Values are JSON literals when they parse as such, comma-separated lists
    otherwise bare strings. Dotted keys (bp.max_iterations) fill nested sections.
    """
    data: Dict[str, Any] = {}
    for number, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"line {number}: expected 'key = value'")
        key, value = key.strip(), _parse_value(raw.strip())
        if key in LIST_KEYS and not isinstance(value, list):
            value = [value]
        section, _, field = key.partition(".")
        if field:
            data.setdefault(section, {})[field] = value
        else:
            data[key] = value
    return data


def load_config(
    path: Union[str, Path],
    defaults: Optional[Dict[str, Any]] = None,
    **overrides: Any,
) -> ExperimentConfig:
    """
    Load an ExperimentConfig from a JSON document or a flat key = value file.

    Args:
        path: Config file
        defaults: Field values used when the file leaves them out
        overrides: Field values replacing the file's (None values are ignored)

    Raises:
        ConfigurationError: Unreadable file, syntax error, unknown key or invalid value
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"cannot read config {path}: {e}") from e

    if path.suffix == ".json" or text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"invalid JSON in {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigurationError("config document must be a JSON object")
    else:
        data = parse_flat_config(text)

    data = {**(defaults or {}), **data}
    data.update({key: value for key, value in overrides.items() if value is not None})
    try:
        return ExperimentConfig(**data)
    except ValidationError as e:
        raise ConfigurationError(f"invalid experiment config: {e}") from e


def write_artifacts(output: CellOutput, output_dir: Union[str, Path]) -> None:
    root = Path(output_dir)
    for relative, content in output.artifacts.items():
        target = root / relative
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(content)


def run_cell(
    cfg: ExperimentConfig,
    snr_db: float,
    seed: int,
    output_dir: Optional[Union[str, Path]] = None,
) -> List[ScoreRow]:
    """
    Run every enabled method at one (snr, seed) point and write its images.

    Args:
        cfg: Experiment configuration
        snr_db: Received SNR
        seed: Seed label of the cell
        output_dir: Artifact root; defaults to cfg.output_dir

    Returns:
        One ScoreRow per enabled method

    Raises:
        StageError: A pipeline stage failed
    """
    output = CellWorkflow(cfg).run(snr_db, seed)
    write_artifacts(output, output_dir if output_dir is not None else cfg.output_dir)
    return output.rows


def _run_cell_safe(cfg: ExperimentConfig, snr_db: float, seed: int) -> Tuple[List[ScoreRow], Optional[CellFailure]]:
    """Worker entry point: converts a failed cell into a CellFailure."""
    try:
        output = CellWorkflow(cfg).run(snr_db, seed)
    except StageError as e:
        logger.error("Cell (%g dB, seed %d) failed in %s: %s", snr_db, seed, e.stage, e.cause)
        return [], CellFailure(snr_db=snr_db, seed=seed, stage=e.stage, error=str(e.cause))
    except EccImagingError as e:
        logger.error("Cell (%g dB, seed %d) failed: %s", snr_db, seed, e)
        return [], CellFailure(snr_db=snr_db, seed=seed, stage="cell", error=str(e))

    try:
        write_artifacts(output, cfg.output_dir)
    except OSError as e:
        logger.error("Cell (%g dB, seed %d) could not write its images: %s", snr_db, seed, e)
        return [], CellFailure(snr_db=snr_db, seed=seed, stage="write_artifacts", error=f"{type(e).__name__}: {e}")
    return output.rows, None


def run_sweep(cfg: ExperimentConfig) -> SweepResult:
    """
    Run the SNR x seed grid and write results.csv, summary.csv and report.md
    (plus failures.csv when cells failed) under cfg.output_dir.

    Failed cells are recorded and the sweep carries on. Rows are sorted by
    (method, snr, seed) before writing, so the output does not depend on
    worker scheduling.
    """
    cells = [(snr, seed) for seed in cfg.seeds for snr in cfg.snr_grid]
    output_dir = Path(cfg.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    logger.info("=" * 80)
    logger.info("Starting sweep: %d SNR points x %d seeds", len(cfg.snr_grid), len(cfg.seeds))
    logger.info("Methods: %s", ", ".join(m.value for m in cfg.methods))
    logger.info("=" * 80)

    rows: List[ScoreRow] = []
    failures: List[CellFailure] = []
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_run_cell_safe, cfg, snr, seed) for snr, seed in cells]
            outcomes = [future.result() for future in futures]
    else:
        outcomes = [_run_cell_safe(cfg, snr, seed) for snr, seed in cells]

    for cell_rows, failure in outcomes:
        rows.extend(cell_rows)
        if failure is not None:
            failures.append(failure)
    rows = sort_rows(rows)

    results_path = output_dir / "results.csv"
    summary_path = output_dir / "summary.csv"
    results_path.write_text(write_results(rows), encoding="utf-8")
    summary_path.write_text(write_summary(rows), encoding="utf-8")
    (output_dir / "report.md").write_text(render_report(cfg, rows, failures), encoding="utf-8")
    if failures:
        (output_dir / "failures.csv").write_text(write_failures(failures), encoding="utf-8")

    logger.info("=" * 80)
    logger.info("Sweep complete: %d rows, %d failed cells", len(rows), len(failures))
    logger.info("=" * 80)

    return SweepResult(
        rows=rows,
        failures=failures,
        results_path=str(results_path),
        summary_path=str(summary_path),
    )


def encode_cell(
    cfg: ExperimentConfig,
    seed: int,
    snr_db: float,
    output_dir: Union[str, Path],
) -> List[Path]:
    """
    Write the graph file and measurement CSV of every block of one cell,
    for replay through the decode command.

    Returns:
        Paths written, graph then measurements per block
    """
    scene = load_scene(cfg.scene, cfg.width, cfg.height)
    blocks = partition(scene, cfg.block_count)
    graphs, records = coded_acquisition(cfg, scene, blocks, seed, snr_db)

    root = Path(output_dir)
    root.mkdir(parents=True, exist_ok=True)
    written = []
    for b, (graph, record) in enumerate(zip(graphs, records)):
        suffix = "" if blocks.block_count == 1 else f"_block{b}"
        graph_path = root / f"graph{suffix}.txt"
        measurement_path = root / f"measurements{suffix}.csv"
        graph_path.write_text(dump_graph(graph), encoding="utf-8")
        measurement_path.write_text(write_measurements(record), encoding="utf-8")
        written.extend([graph_path, measurement_path])
    logger.info("Wrote %d files to %s", len(written), root)
    return written
