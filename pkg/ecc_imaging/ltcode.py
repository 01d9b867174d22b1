"""
LT-code degree sampling and construction of the illumination graph.
"""

import logging
from typing import Optional

import numpy as np

from .errors import ConfigurationError
from .models import DegreeDistribution, EncodingGraph
from .utils import make_rng

logger = logging.getLogger(__name__)


def omega_paper() -> DegreeDistribution:
    """
    Degree distribution used for the reference experiment.

    Degrees 1..10; d = 1 and d = 2 each with probability 0.30, every other
    degree with probability 0.05.
    """
    table = {1: 0.30, 2: 0.30}
    table.update({d: 0.05 for d in range(3, 11)})
    return DegreeDistribution.from_table(table)


def sample_degree(dist: DegreeDistribution, rng: np.random.Generator) -> int:
    """Draw one shot degree d ~ dist."""
    return int(rng.choice(dist.support, p=dist.mass))


def sample_degrees(dist: DegreeDistribution, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw `size` independent shot degrees."""
    return rng.choice(np.asarray(dist.support, dtype=np.int64), size=size, p=dist.mass)


def build_graph(
    pixel_count: int,
    shot_count: int,
    dist: DegreeDistribution,
    seed: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> EncodingGraph:
    """
    Build the LT encoding graph for one block.

    Each shot draws d ~ dist and then d distinct pixels uniformly without
    replacement. Draws come from `rng` when given, otherwise from a fresh
    stream seeded with `seed`. The seed is recorded on the graph so it can
    be regenerated; pass the seed that produced `rng` to keep that true.

    Args:
        pixel_count: K, pixels in the block
        shot_count: N, number of illuminations
        dist: Degree distribution
        seed: Seed for the graph's random stream, kept on the graph for provenance
        rng: Stream to draw from; defaults to make_rng(seed)

    Returns:
        EncodingGraph with N shots over K pixels
    """
    if shot_count < 1:
        raise ConfigurationError("at least one shot is required")
    if dist.max_degree > pixel_count:
        raise ConfigurationError(
            f"degree {dist.max_degree} exceeds the {pixel_count} pixels of a block"
        )

    if rng is None:
        rng = make_rng(seed)
    degrees = sample_degrees(dist, rng, shot_count)
    shots = [np.sort(rng.choice(pixel_count, size=int(d), replace=False)) for d in degrees]
    offsets = np.concatenate(([0], np.cumsum(degrees)))

    graph = EncodingGraph(
        pixel_count=pixel_count,
        shot_offsets=offsets,
        shot_pixels=np.concatenate(shots),
        seed=seed,
    )
    logger.debug(
        "Built graph K=%d N=%d edges=%d uncovered=%d",
        pixel_count, shot_count, graph.edge_count, graph.uncovered_pixels().size,
    )
    return graph


def pattern_of(graph: EncodingGraph, index: int) -> np.ndarray:
    """Boolean illumination mask over the block's K pixels for shot `index`."""
    mask = np.zeros(graph.pixel_count, dtype=bool)
    mask[graph.shot(index)] = True
    return mask


def dump_graph(graph: EncodingGraph) -> str:
    """
    Serialize a graph: a "K N seed" header, then one line of pixel indices per shot.
    """
    seed = "none" if graph.seed is None else str(graph.seed)
    lines = [f"{graph.pixel_count} {graph.shot_count} {seed}"]
    lines.extend(" ".join(str(j) for j in graph.shot(i)) for i in range(graph.shot_count))
    return "\n".join(lines) + "\n"


def load_graph(text: str) -> EncodingGraph:
    """Parse the format written by dump_graph."""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ConfigurationError("empty graph file")
    header = lines[0].split()
    if len(header) != 3:
        raise ConfigurationError("graph header must be 'K N seed'")
    try:
        pixel_count, shot_count = int(header[0]), int(header[1])
        seed = None if header[2] == "none" else int(header[2])
        shots = [[int(tok) for tok in line.split()] for line in lines[1:]]
    except ValueError as e:
        raise ConfigurationError(f"malformed graph file: {e}") from e
    if len(shots) != shot_count:
        raise ConfigurationError(f"graph header declares {shot_count} shots, found {len(shots)}")
    return EncodingGraph.from_shots(pixel_count, shots, seed=seed)
