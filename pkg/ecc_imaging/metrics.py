"""
Scoring and sweep reporting: MSE, SNR, results/summary CSVs and the markdown report.
"""

import csv
import io
import logging
import math
from collections import defaultdict
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from .errors import CalibrationError, ConfigurationError
from .models import SCORE_COLUMNS, BinaryScene, CellFailure, ExperimentConfig, Method, ScoreRow

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ("method", "snr_db", "mean_mse", "cells")
FAILURE_COLUMNS = ("snr_db", "seed", "stage", "error")


def mse(estimate: np.ndarray, truth: Union[BinaryScene, np.ndarray]) -> float:
    """
    Mean squared per-pixel error, (1/K) sum_j (I_j - I'_j)^2.

    Args:
        estimate: Decoded bits or a normalized analog image (any shape, K values)
        truth: Ground-truth scene or its pixel vector

    Raises:
        ConfigurationError: The two inputs hold a different number of pixels
    """
    truth_values = truth.pixels if isinstance(truth, BinaryScene) else np.asarray(truth)
    estimate = np.asarray(estimate, dtype=np.float64).ravel()
    truth_values = truth_values.astype(np.float64).ravel()
    if estimate.size != truth_values.size:
        raise ConfigurationError(f"estimate has {estimate.size} pixels, truth has {truth_values.size}")
    if estimate.size == 0:
        raise ConfigurationError("cannot score an empty image")
    return float(np.mean(np.square(estimate - truth_values)))


def snr_of(signal_power: float, noise_power: float) -> float:
    """
    10 * log10((P_s - P_n) / P_n) in dB.

    Raises:
        CalibrationError: P_n <= 0 or P_s <= P_n
    """
    if noise_power <= 0:
        raise CalibrationError("SNR is undefined for non-positive noise power")
    if signal_power <= noise_power:
        raise CalibrationError(
            f"SNR is undefined when signal power ({signal_power}) does not exceed noise power ({noise_power})"
        )
    return 10.0 * math.log10((signal_power - noise_power) / noise_power)


def sort_rows(rows: Iterable[ScoreRow]) -> List[ScoreRow]:
    return sorted(rows, key=lambda row: (row.method.value, row.snr_db, row.seed))


def write_results(rows: Iterable[ScoreRow]) -> str:
    """results.csv content: header plus one line per row, sorted by (method, snr, seed)."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SCORE_COLUMNS)
    for row in sort_rows(rows):
        writer.writerow([
            row.method.value,
            repr(float(row.snr_db)),
            row.seed,
            repr(float(row.mse)),
            row.iterations,
            repr(float(row.coverage_gap)),
        ])
    return buffer.getvalue()


def read_results(text: str) -> List[ScoreRow]:
    """Parse results.csv back into score rows."""
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != SCORE_COLUMNS:
        raise ConfigurationError(f"results header must be {','.join(SCORE_COLUMNS)}")
    try:
        return [
            ScoreRow(
                method=Method(record["method"]),
                snr_db=float(record["snr_db"]),
                seed=int(record["seed"]),
                mse=float(record["mse"]),
                iterations=int(record["iterations"]),
                coverage_gap=float(record["coverage_gap"]),
            )
            for record in reader
        ]
    except (KeyError, ValueError) as e:
        raise ConfigurationError(f"malformed results row: {e}") from e


def summarize(rows: Iterable[ScoreRow]) -> List[Dict[str, object]]:
    """Per-(method, SNR) mean MSE over seeds, sorted by method then SNR."""
    groups: Dict[tuple, List[float]] = defaultdict(list)
    for row in rows:
        groups[(row.method.value, row.snr_db)].append(row.mse)
    return [
        {"method": method, "snr_db": snr, "mean_mse": math.fsum(values) / len(values), "cells": len(values)}
        for (method, snr), values in sorted(groups.items())
    ]


def write_summary(rows: Iterable[ScoreRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for entry in summarize(rows):
        writer.writerow([entry["method"], repr(float(entry["snr_db"])), repr(entry["mean_mse"]), entry["cells"]])
    return buffer.getvalue()


def write_failures(failures: Iterable[CellFailure]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(FAILURE_COLUMNS)
    for failure in sorted(failures, key=lambda f: (f.snr_db, f.seed)):
        writer.writerow([repr(float(failure.snr_db)), failure.seed, failure.stage, failure.error])
    return buffer.getvalue()


def render_report(
    cfg: ExperimentConfig,
    rows: Sequence[ScoreRow],
    failures: Optional[Sequence[CellFailure]] = None,
) -> str:
    """Markdown report: experiment parameters and a mean-MSE table (SNR x method)."""
    failures = failures or []
    summary = summarize(rows)
    methods = sorted({entry["method"] for entry in summary})
    snrs = sorted({entry["snr_db"] for entry in summary}, reverse=True)
    table = {(entry["method"], entry["snr_db"]): entry["mean_mse"] for entry in summary}

    parts = [
        "# Coded Imaging Sweep Report",
        "",
        f"**Scene:** {cfg.scene} ({cfg.width}x{cfg.height}, {cfg.block_count} block(s))",
        f"**Shots per block:** {cfg.shots}",
        f"**Decoder mode:** {cfg.decoder_mode.value}",
        f"**Seeds:** {', '.join(str(s) for s in cfg.seeds)} (master seed {cfg.master_seed})",
        f"**Rows:** {len(rows)}",
        "",
        "## Mean MSE",
        "",
        "| SNR (dB) | " + " | ".join(methods) + " |",
        "|---|" + "---|" * len(methods),
    ]
    for snr in snrs:
        cells = [f"{table[(m, snr)]:.6f}" if (m, snr) in table else "-" for m in methods]
        parts.append(f"| {snr:g} | " + " | ".join(cells) + " |")
    if Method.GI_GP.value in methods:
        parts.extend(["", "gi-gp is box-constrained least squares in [0, 1] with no sparsity term."])

    if failures:
        parts.extend(["", "## Failed Cells", ""])
        for failure in failures:
            parts.append(f"  - SNR {failure.snr_db:g} dB, seed {failure.seed}: {failure.stage}: {failure.error}")
    parts.append("")
    return "\n".join(parts)
