"""
Utility functions for the imaging simulator.
"""

import logging
import time
from typing import Optional

import numpy as np

# Stream tags used when splitting the master seed.
STREAM_GRAPH = 0
STREAM_CODED_NOISE = 1
STREAM_GI_PATTERNS = 2
STREAM_GI_NOISE = 3


def setup_logging(level: str = "INFO") -> logging.Logger:
    """
    Set up logging configuration.

    Args:
        level: Logging level (DEBUG, INFO, WARNING, ERROR)

    Returns:
        Configured logger
    """
    logging.basicConfig(
        level=getattr(logging, level.upper()),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    return logging.getLogger("ecc_imaging")


def derive_seed(master_seed: int, *key: int) -> int:
    """
    Derive an independent 63-bit seed from the master seed and a cell key.

    The key is passed as the spawn key of a numpy SeedSequence, so
    (master_seed, key) -> seed is fixed across runs, platforms and
    worker layouts, and distinct keys give statistically independent streams.

    Args:
        master_seed: Experiment-wide seed
        key: Non-negative integers locating the stream (seed, stream tag, SNR index...)

    Returns:
        Integer seed suitable for numpy.random.default_rng
    """
    sequence = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(int(k) for k in key))
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def snr_key(snr_db: float) -> int:
    """Seed-key component for an SNR point: the IEEE-754 bit pattern of the value."""
    return int(np.array(float(snr_db), dtype=np.float64).view(np.uint64))


def make_rng(seed: Optional[int]) -> np.random.Generator:
    return np.random.default_rng(seed)


def stage_trace(stage: str, start_time: float, **details) -> dict:
    """Build a trace entry for a finished pipeline stage."""
    return {
        "stage": stage,
        "elapsed_time": round(time.time() - start_time, 6),
        **details,
    }
