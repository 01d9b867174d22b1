"""
LangGraph pipeline for one (SNR, seed) cell of a sweep.
"""

import logging
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, TypedDict

import numpy as np
from langgraph.graph import END, StateGraph

from .bpdecoder import decode, peel_decode, write_trace
from .channel import calibrate_sigma, measure_all, noiseless_sums
from .errors import StageError
from .gibaseline import (
    GradientProjectionSolver,
    bernoulli_patterns,
    gi_clean_sums,
    measure_gi,
    normalize,
    reconstruct_correlation,
)
from .ltcode import build_graph, omega_paper
from .metrics import mse
from .models import (
    AnalogImage,
    BinaryScene,
    BlockPartition,
    CellOutput,
    ChannelParams,
    DegreeDistribution,
    EncodingGraph,
    ExperimentConfig,
    GiMeasurement,
    MeasurementRecord,
    Method,
    RemapMode,
    ScoreRow,
)
from .remap import remap_record, write_remap_dump
from .scene import load_scene, partition, write_image, write_pgm
from .utils import (
    STREAM_CODED_NOISE,
    STREAM_GI_NOISE,
    STREAM_GI_PATTERNS,
    STREAM_GRAPH,
    derive_seed,
    make_rng,
    snr_key,
    stage_trace,
)

logger = logging.getLogger(__name__)

CODED_METHODS = (Method.LT_BP, Method.LT_PEEL)
GI_METHODS = (Method.GI_CORRELATION, Method.GI_GP)


class CellState(TypedDict):
    """State for the LangGraph cell pipeline."""
    snr_db: float
    seed: int
    scene: Optional[BinaryScene]
    blocks: Optional[BlockPartition]
    graphs: List[EncodingGraph]
    records: List[MeasurementRecord]
    gi_measurements: List[GiMeasurement]
    estimates: Dict[str, dict]
    rows: List[ScoreRow]
    artifacts: Dict[str, bytes]
    traces: list


def resolve_distribution(cfg: ExperimentConfig) -> DegreeDistribution:
    """The configured degree distribution: "paper" or an explicit {degree: mass} table."""
    if cfg.degree_distribution == "paper":
        return omega_paper()
    return DegreeDistribution.from_table(cfg.degree_distribution)


def cell_directory(method: Method, snr_db: float, seed: int) -> str:
    """Relative artifact directory of one method in one cell."""
    return f"{method.value}/snr_{snr_db:g}/seed_{seed}"


def _block_file(stem: str, suffix: str, block: int, block_count: int) -> str:
    return f"{stem}{suffix}" if block_count == 1 else f"{stem}_block{block}{suffix}"


def coded_acquisition(
    cfg: ExperimentConfig,
    scene: BinaryScene,
    blocks: BlockPartition,
    seed: int,
    snr_db: float,
) -> Tuple[List[EncodingGraph], List[MeasurementRecord]]:
    """
    Build one LT graph per block and simulate its noisy readings.

    The graphs depend only on (master_seed, seed, block), so every SNR point
    of a seed reuses them; the noise variance is calibrated once over the
    noiseless sums of all blocks.
    """
    dist = resolve_distribution(cfg)
    block_pixels = blocks.extract(scene.pixels)
    graph_seeds = [derive_seed(cfg.master_seed, seed, STREAM_GRAPH, b) for b in range(blocks.block_count)]
    graphs = [
        build_graph(blocks.block_size, cfg.shots, dist, seed=s, rng=make_rng(s))
        for s in graph_seeds
    ]

    clean_params = ChannelParams(y0_mean=cfg.y0_mean)
    clean = np.concatenate([noiseless_sums(p, g, clean_params) for p, g in zip(block_pixels, graphs)])
    sigma2 = 0.0 if cfg.noiseless else calibrate_sigma(clean, snr_db)
    params = ChannelParams(y0_mean=cfg.y0_mean, sigma2=sigma2)

    noise_seed = derive_seed(cfg.master_seed, seed, STREAM_CODED_NOISE, snr_key(snr_db))
    rng = make_rng(noise_seed)
    records = [measure_all(p, g, params, rng, noise_seed=noise_seed) for p, g in zip(block_pixels, graphs)]
    return graphs, records


def gi_acquisition(
    cfg: ExperimentConfig,
    scene: BinaryScene,
    blocks: BlockPartition,
    seed: int,
    snr_db: float,
) -> List[GiMeasurement]:
    """Bernoulli patterns per block (shared across SNR points of a seed) and their noisy readings."""
    block_pixels = blocks.extract(scene.pixels)
    patterns = [
        bernoulli_patterns(
            blocks.block_size,
            cfg.shots,
            cfg.gi_probability,
            make_rng(derive_seed(cfg.master_seed, seed, STREAM_GI_PATTERNS, b)),
        )
        for b in range(blocks.block_count)
    ]

    clean_params = ChannelParams(y0_mean=cfg.y0_mean)
    clean = np.concatenate([gi_clean_sums(p, a, clean_params) for p, a in zip(block_pixels, patterns)])
    sigma2 = 0.0 if cfg.noiseless else calibrate_sigma(clean, snr_db)
    params = ChannelParams(y0_mean=cfg.y0_mean, sigma2=sigma2)

    rng = make_rng(derive_seed(cfg.master_seed, seed, STREAM_GI_NOISE, snr_key(snr_db)))
    return [measure_gi(p, a, params, rng) for p, a in zip(block_pixels, patterns)]


class CellWorkflow:
    """LangGraph-based pipeline: scene -> coded path and/or GI baselines -> scores."""

    def __init__(self, cfg: ExperimentConfig):
        """
        Args:
            cfg: Validated experiment configuration
        """
        self.cfg = cfg
        self.coded_methods = [m for m in CODED_METHODS if m in cfg.methods]
        self.gi_methods = [m for m in GI_METHODS if m in cfg.methods]
        self.graph = self._build_graph()

    def _stage(self, name: str, node: Callable[[CellState], CellState]) -> Callable[[CellState], CellState]:
        """Time a node and wrap any failure in a StageError naming it."""
        def run(state: CellState) -> CellState:
            start = time.time()
            try:
                state = node(state)
            except StageError:
                raise
            except Exception as e:
                raise StageError(name, e) from e
            trace = stage_trace(name, start)
            logger.debug("Stage %s finished in %.3fs", name, trace["elapsed_time"])
            state["traces"].append(trace)
            return state
        return run

    def _load_scene(self, state: CellState) -> CellState:
        """Node: Load the ground-truth scene and tile it."""
        cfg = self.cfg
        scene = load_scene(cfg.scene, cfg.width, cfg.height)
        state["scene"] = scene
        state["blocks"] = partition(scene, cfg.block_count)
        return state

    def _measure_coded(self, state: CellState) -> CellState:
        """Node: Build LT graphs and simulate the coded acquisition."""
        logger.debug("Coded acquisition at %g dB, seed %d", state["snr_db"], state["seed"])
        graphs, records = coded_acquisition(
            self.cfg, state["scene"], state["blocks"], state["seed"], state["snr_db"]
        )
        state["graphs"] = graphs
        state["records"] = records
        return state

    def _decode_coded(self, state: CellState) -> CellState:
        """Node: Remap readings to GF(2) and decode every block."""
        cfg = self.cfg
        blocks = state["blocks"]
        count = blocks.block_count
        uncovered = sum(g.uncovered_pixels().size for g in state["graphs"])
        coverage_gap = uncovered / blocks.pixel_count

        if Method.LT_BP in self.coded_methods:
            directory = cell_directory(Method.LT_BP, state["snr_db"], state["seed"])
            decoded, iterations = [], 0
            for b, (graph, record) in enumerate(zip(state["graphs"], state["records"])):
                remapped = remap_record(record, graph, cfg.decoder_mode)
                result = decode(remapped.channel_llrs(cfg.hard_llr_magnitude), graph, cfg.bp)
                decoded.append(result.decoded)
                iterations = max(iterations, result.iterations_used)
                if cfg.trace_bp:
                    path = f"{directory}/{_block_file('bp_trace', '.csv', b, count)}"
                    state["artifacts"][path] = write_trace(result).encode("utf-8")
                if cfg.dump_remap:
                    path = f"{directory}/{_block_file('remap', '.csv', b, count)}"
                    state["artifacts"][path] = write_remap_dump(record, remapped).encode("utf-8")
            state["estimates"][Method.LT_BP.value] = {
                "values": blocks.assemble(decoded),
                "binary": True,
                "iterations": iterations,
                "coverage_gap": coverage_gap,
            }

        if Method.LT_PEEL in self.coded_methods:
            decoded = []
            for graph, record in zip(state["graphs"], state["records"]):
                remapped = remap_record(record, graph, RemapMode.HARD)
                result = peel_decode(remapped.channel_llrs(cfg.hard_llr_magnitude), graph)
                if result.conflicts:
                    logger.debug("Peeling met %d conflicting shots", result.conflicts)
                decoded.append(result.decoded())
            state["estimates"][Method.LT_PEEL.value] = {
                "values": blocks.assemble(decoded),
                "binary": True,
                "iterations": 0,
                "coverage_gap": coverage_gap,
            }
        return state

    def _measure_gi(self, state: CellState) -> CellState:
        """Node: Draw Bernoulli patterns and simulate the uncoded acquisition."""
        state["gi_measurements"] = gi_acquisition(
            self.cfg, state["scene"], state["blocks"], state["seed"], state["snr_db"]
        )
        return state

    def _reconstruct_gi(self, state: CellState) -> CellState:
        """Node: Correlation and gradient-projection reconstructions."""
        cfg = self.cfg
        blocks = state["blocks"]
        measurements = state["gi_measurements"]

        if Method.GI_CORRELATION in self.gi_methods:
            values = blocks.assemble([reconstruct_correlation(m).values for m in measurements])
            state["estimates"][Method.GI_CORRELATION.value] = {
                "values": values, "binary": False, "iterations": 0, "coverage_gap": 0.0,
            }

        if Method.GI_GP in self.gi_methods:
            solutions, iterations = [], 0
            for meas in measurements:
                solver = GradientProjectionSolver(meas, cfg.gp_iterations, cfg.gp_tolerance)
                solutions.append(solver.solve())
                iterations = max(iterations, solver.iterations_used)
            state["estimates"][Method.GI_GP.value] = {
                "values": blocks.assemble(solutions), "binary": False, "iterations": iterations, "coverage_gap": 0.0,
            }
        return state

    def _score(self, state: CellState) -> CellState:
        """Node: Score every estimate against the truth and render its image."""
        scene = state["scene"]
        for method in Method:
            estimate = state["estimates"].get(method.value)
            if estimate is None:
                continue
            directory = cell_directory(method, state["snr_db"], state["seed"])
            if estimate["binary"]:
                values = estimate["values"].astype(np.uint8)
                image_path = f"{directory}/reconstruction.pbm"
                image = write_image(BinaryScene(width=scene.width, height=scene.height, pixels=values))
            else:
                analog = normalize(AnalogImage(width=scene.width, height=scene.height, values=estimate["values"]))
                values = analog.values
                image_path = f"{directory}/reconstruction.pgm"
                image = write_pgm(analog)
            if self.cfg.write_images:
                state["artifacts"][image_path] = image

            row = ScoreRow(
                method=method,
                snr_db=state["snr_db"],
                seed=state["seed"],
                mse=mse(values, scene),
                iterations=estimate["iterations"],
                coverage_gap=estimate["coverage_gap"],
            )
            logger.debug("%s at %g dB seed %d: MSE %.6f", method.value, row.snr_db, row.seed, row.mse)
            state["rows"].append(row)
        return state

    def _after_scene(self, state: CellState) -> str:
        return "measure_coded" if self.coded_methods else "measure_gi"

    def _after_coded(self, state: CellState) -> str:
        return "measure_gi" if self.gi_methods else "score"

    def _build_graph(self) -> StateGraph:
        """Build the LangGraph workflow."""
        workflow = StateGraph(CellState)

        # Add nodes
        workflow.add_node("load_scene", self._stage("load_scene", self._load_scene))
        workflow.add_node("measure_coded", self._stage("measure_coded", self._measure_coded))
        workflow.add_node("decode_coded", self._stage("decode_coded", self._decode_coded))
        workflow.add_node("measure_gi", self._stage("measure_gi", self._measure_gi))
        workflow.add_node("reconstruct_gi", self._stage("reconstruct_gi", self._reconstruct_gi))
        workflow.add_node("score", self._stage("score", self._score))

        # Define edges
        workflow.set_entry_point("load_scene")
        workflow.add_conditional_edges(
            "load_scene", self._after_scene, {"measure_coded": "measure_coded", "measure_gi": "measure_gi"}
        )
        workflow.add_edge("measure_coded", "decode_coded")
        workflow.add_conditional_edges(
            "decode_coded", self._after_coded, {"measure_gi": "measure_gi", "score": "score"}
        )
        workflow.add_edge("measure_gi", "reconstruct_gi")
        workflow.add_edge("reconstruct_gi", "score")
        workflow.add_edge("score", END)

        return workflow.compile()

    def run(self, snr_db: float, seed: int) -> CellOutput:
        """
        Run one sweep cell.

        Args:
            snr_db: Received SNR of the cell
            seed: Seed label; graphs and patterns depend on it, noise on (seed, snr_db)

        Returns:
            CellOutput with one score row per enabled method and the cell's artifacts

        Raises:
            StageError: A pipeline stage failed
        """
        initial_state: CellState = {
            "snr_db": float(snr_db),
            "seed": int(seed),
            "scene": None,
            "blocks": None,
            "graphs": [],
            "records": [],
            "gi_measurements": [],
            "estimates": {},
            "rows": [],
            "artifacts": {},
            "traces": [],
        }
        final_state = self.graph.invoke(initial_state)
        return CellOutput(
            snr_db=float(snr_db),
            seed=int(seed),
            rows=final_state["rows"],
            artifacts=final_state["artifacts"],
            traces=final_state["traces"],
        )

    def visualize(self, output_path: str = "workflow.mmd") -> Optional[str]:
        """
        Write the pipeline as a Mermaid diagram.

        Args:
            output_path: Path of the .mmd file

        Returns:
            The Mermaid source, or None when it could not be produced
        """
        try:
            diagram = self.graph.get_graph().draw_mermaid()
            path = Path(output_path)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(diagram, encoding="utf-8")
            logger.info("Workflow diagram saved to %s", path)
            return diagram
        except Exception as e:
            logger.warning("Could not generate workflow diagram: %s", e)
            return None
