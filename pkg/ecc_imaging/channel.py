"""
Bucket-detector measurement simulation.

A shot's reading is the arithmetic sum of light passed by the illuminated
1-valued pixels (m * y0) plus additive white Gaussian receiver noise.
"""

import csv
import io
import logging
import math
from typing import Optional, Union

import numpy as np

from .errors import CalibrationError, ConfigurationError
from .models import BinaryScene, ChannelParams, EncodingGraph, MeasurementRecord

logger = logging.getLogger(__name__)

PixelsLike = Union[BinaryScene, np.ndarray]


def _pixels(scene: PixelsLike) -> np.ndarray:
    return scene.pixels if isinstance(scene, BinaryScene) else np.asarray(scene)


def bucket_sum(scene: PixelsLike, pattern: np.ndarray, params: ChannelParams) -> float:
    """
    Noiseless reading of one shot: m * y0, with m the count of pixels that
    are both illuminated and transmissive.

    Raises:
        ConfigurationError: Pattern and scene lengths differ
    """
    pixels = _pixels(scene)
    pattern = np.asarray(pattern)
    if pattern.size != pixels.size:
        raise ConfigurationError(f"pattern covers {pattern.size} pixels, scene has {pixels.size}")
    m = np.count_nonzero(pixels.astype(bool) & pattern.astype(bool))
    return float(m * params.y0_mean)


def noiseless_sums(scene: PixelsLike, graph: EncodingGraph, params: ChannelParams) -> np.ndarray:
    """bucket_sum for every shot of the graph at once."""
    pixels = _pixels(scene)
    if pixels.size != graph.pixel_count:
        raise ConfigurationError(
            f"graph spans {graph.pixel_count} pixels, scene/block has {pixels.size}"
        )
    weights = pixels.astype(np.float64)[graph.edge_pixel]
    counts = np.bincount(graph.edge_signal, weights=weights, minlength=graph.shot_count)
    return counts * params.y0_mean


def add_awgn(clean: np.ndarray, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """Add independent N(0, sigma2) noise to every value; sigma2 = 0 is the identity."""
    if sigma2 < 0:
        raise ConfigurationError("noise variance must be >= 0")
    clean = np.asarray(clean, dtype=np.float64)
    if sigma2 == 0:
        return clean.copy()
    return clean + rng.normal(0.0, math.sqrt(sigma2), size=clean.shape)


def calibrate_sigma(clean: np.ndarray, snr_db: float) -> float:
    """
    Noise variance that puts the received signal at `snr_db`.

    With P_n = sigma2 and P_s = mean(clean^2) + sigma2, the returned variance
    satisfies 10*log10((P_s - P_n) / P_n) = snr_db.

    Raises:
        CalibrationError: The noiseless signal is identically zero
    """
    if not math.isfinite(snr_db):
        raise ConfigurationError(f"SNR must be finite, got {snr_db}")
    power = float(np.mean(np.square(np.asarray(clean, dtype=np.float64))))
    if power == 0.0:
        raise CalibrationError("cannot calibrate noise against an all-zero signal")
    return power / 10 ** (snr_db / 10)


def measure_all(
    scene: PixelsLike,
    graph: EncodingGraph,
    params: ChannelParams,
    rng: np.random.Generator,
    noise_seed: Optional[int] = None,
) -> MeasurementRecord:
    """
    Simulate the full encoded imaging sequence of one block.

    Args:
        scene: Block pixels (length K) or a scene whose size equals K
        graph: Encoding graph of the block
        params: Detector response and noise variance
        rng: Noise stream; each shot gets an independent draw
        noise_seed: Provenance recorded on the record

    Returns:
        MeasurementRecord with N noisy readings
    """
    clean = noiseless_sums(scene, graph, params)
    values = add_awgn(clean, params.sigma2, rng)
    return MeasurementRecord(
        values=values, params=params, graph_seed=graph.seed, noise_seed=noise_seed
    )


def write_measurements(record: MeasurementRecord) -> str:
    """CSV with '# key=value' header lines carrying the channel parameters and seeds."""
    buffer = io.StringIO()
    buffer.write(f"# y0_mean={record.params.y0_mean!r}\n")
    buffer.write(f"# sigma2={record.params.sigma2!r}\n")
    buffer.write(f"# graph_seed={record.graph_seed}\n")
    buffer.write(f"# noise_seed={record.noise_seed}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["shot_index", "y_value"])
    for index, value in enumerate(record.values):
        writer.writerow([index, repr(float(value))])
    return buffer.getvalue()


def _optional_int(value: str) -> Optional[int]:
    return None if value in ("", "None", "none") else int(value)


def read_measurements(text: str) -> MeasurementRecord:
    """Parse the format written by write_measurements."""
    header = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            header[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)

    try:
        params = ChannelParams(
            y0_mean=float(header.get("y0_mean", 1.0)),
            sigma2=float(header.get("sigma2", 0.0)),
        )
        rows = list(csv.DictReader(body))
        indices = [int(row["shot_index"]) for row in rows]
        values = [float(row["y_value"]) for row in rows]
    except (KeyError, ValueError) as e:
        raise ConfigurationError(f"malformed measurement CSV: {e}") from e
    if indices != list(range(len(indices))):
        raise ConfigurationError("shot_index column must run 0..N-1 in order")

    return MeasurementRecord(
        values=values,
        params=params,
        graph_seed=_optional_int(header.get("graph_seed", "")),
        noise_seed=_optional_int(header.get("noise_seed", "")),
    )
