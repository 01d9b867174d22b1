"""
Pixel recovery from remapped GF(2) LLRs.

LLR sign convention at the API: positive favours bit/parity 1, so
I_j = 1 iff L_j >= 0. Internally messages use the conventional
"positive favours 0" domain, where the check rule is the plain tanh product;
inputs are negated on entry and posteriors negated on exit.

Role assignment: the tanh-product (with the channel term) runs at signal
nodes and the sum runs at pixel nodes, the standard Tanner-graph reading.
"""

import csv
import io
import logging
from collections import deque
from typing import List, Optional, Tuple

import numpy as np

from .errors import DecodeInputError
from .models import BpConfig, BpTraceRow, EncodingGraph, PeelResult, ReconstructionResult

logger = logging.getLogger(__name__)


def _check_llrs(llrs: np.ndarray, graph: EncodingGraph) -> np.ndarray:
    llrs = np.asarray(llrs, dtype=np.float64).ravel()
    if llrs.size != graph.shot_count:
        raise DecodeInputError(f"{llrs.size} LLRs for a graph with {graph.shot_count} shots")
    if not np.all(np.isfinite(llrs)):
        raise DecodeInputError("channel LLRs must be finite")
    return llrs


def _parity_mismatch(decoded: np.ndarray, llrs: np.ndarray, graph: EncodingGraph) -> np.ndarray:
    lit = np.bincount(graph.edge_signal, weights=decoded[graph.edge_pixel], minlength=graph.shot_count)
    parity = lit.astype(np.int64) % 2
    return parity != (llrs >= 0)


def syndrome_ok(decoded: np.ndarray, llrs: np.ndarray, graph: EncodingGraph) -> bool:
    """
    True iff every shot's parity of decoded pixels equals the hard sign of
    its channel LLR ([L_i >= 0]). Vacuously true for a graph with no shots.
    """
    decoded = np.asarray(decoded).ravel()
    llrs = np.asarray(llrs, dtype=np.float64).ravel()
    if decoded.size != graph.pixel_count or llrs.size != graph.shot_count:
        raise DecodeInputError("decoded bits or LLRs do not match the graph")
    return not np.any(_parity_mismatch(decoded, llrs, graph))


class BeliefPropagationDecoder:
    """Flooding sum-product decoder bound to one encoding graph."""

    def __init__(self, graph: EncodingGraph, config: Optional[BpConfig] = None):
        """
        Args:
            graph: Encoding graph of the block
            config: Iteration limit, message clamp and stopping rule
        """
        self.graph = graph
        self.config = config or BpConfig()
        self._product_limit = np.tanh(self.config.message_clamp / 2.0)

    def _signal_update(self, to_signal: np.ndarray, channel: np.ndarray) -> np.ndarray:
        """m_{i->j} = 2 atanh(tanh(ch_i/2) * prod_{j' != j} tanh(m_{j'->i}/2))."""
        graph = self.graph
        shots = graph.shot_count
        edge_signal = graph.edge_signal

        factors = np.tanh(to_signal / 2.0)
        channel_factors = np.tanh(channel / 2.0)

        # Exclusive products via log-magnitudes, zero counts and sign counts,
        # so a zero factor on one edge does not poison the others.
        is_zero = factors == 0
        log_abs = np.log(np.where(is_zero, 1.0, np.abs(factors)))
        channel_zero = channel_factors == 0
        channel_log = np.log(np.where(channel_zero, 1.0, np.abs(channel_factors)))

        total_log = np.bincount(edge_signal, weights=log_abs, minlength=shots) + channel_log
        total_zero = np.bincount(edge_signal[is_zero], minlength=shots) + channel_zero
        total_neg = np.bincount(edge_signal[factors < 0], minlength=shots) + (channel_factors < 0)

        other_zero = total_zero[edge_signal] - is_zero
        other_neg = total_neg[edge_signal] - (factors < 0)
        magnitude = np.where(other_zero > 0, 0.0, np.exp(total_log[edge_signal] - log_abs))
        product = np.where(other_neg % 2 == 1, -magnitude, magnitude)
        product = np.clip(product, -self._product_limit, self._product_limit)

        clamp = self.config.message_clamp
        return np.clip(2.0 * np.arctanh(product), -clamp, clamp)

    def _pixel_update(self, to_pixel: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """m_{j->i} = sum_{i' != i} m_{i'->j}; also returns the per-pixel totals."""
        graph = self.graph
        totals = np.bincount(graph.edge_pixel, weights=to_pixel, minlength=graph.pixel_count)
        clamp = self.config.message_clamp
        return np.clip(totals[graph.edge_pixel] - to_pixel, -clamp, clamp), totals

    def decode(self, llrs: np.ndarray) -> ReconstructionResult:
        """
        Run belief propagation on channel LLRs L_i^GF(2).

        Iteration 0 is the channel initialization: pixel-to-signal messages
        are zero, so only degree-1 shots inform their pixel. Each further
        iteration updates pixel messages, then signal messages, then the
        posteriors L_j and S_i.

        Raises:
            DecodeInputError: Wrong length or non-finite LLRs
        """
        graph = self.graph
        config = self.config
        llrs = _check_llrs(llrs, graph)
        channel = -llrs

        to_signal = np.zeros(graph.edge_count)
        to_pixel = self._signal_update(to_signal, channel)
        totals = np.bincount(graph.edge_pixel, weights=to_pixel, minlength=graph.pixel_count)

        trace: List[BpTraceRow] = []
        iteration = 0
        while True:
            pixel_llrs = 0.0 - totals
            decoded = (pixel_llrs >= 0).astype(np.uint8)
            unsatisfied = int(np.count_nonzero(_parity_mismatch(decoded, llrs, graph)))
            trace.append(BpTraceRow(
                iteration=iteration,
                unsatisfied=unsatisfied,
                mean_abs_llr=float(np.mean(np.abs(pixel_llrs))),
            ))
            converged = unsatisfied == 0
            if (converged and config.stop_on_syndrome) or iteration >= config.max_iterations:
                break
            iteration += 1
            to_signal, _ = self._pixel_update(to_pixel)
            to_pixel = self._signal_update(to_signal, channel)
            totals = np.bincount(graph.edge_pixel, weights=to_pixel, minlength=graph.pixel_count)

        signal_llrs = llrs - np.bincount(graph.edge_signal, weights=to_signal, minlength=graph.shot_count)
        uncovered = graph.uncovered_pixels()
        if uncovered.size:
            logger.debug("%d pixels are not covered by any shot", uncovered.size)

        return ReconstructionResult(
            decoded=decoded,
            pixel_llrs=pixel_llrs,
            signal_llrs=signal_llrs,
            iterations_used=iteration,
            converged=converged,
            uncovered=uncovered,
            trace=trace,
        )


def decode(llrs: np.ndarray, graph: EncodingGraph, config: Optional[BpConfig] = None) -> ReconstructionResult:
    """Belief-propagation decode of one block; see BeliefPropagationDecoder.decode."""
    return BeliefPropagationDecoder(graph, config).decode(llrs)


def peel_decode(llrs: np.ndarray, graph: EncodingGraph) -> PeelResult:
    """
    Hard-decision LT peeling.

    Channel bits are [L_i >= 0]. Degree-1 shots resolve their remaining
    pixel; the value is substituted into every other shot covering that
    pixel, which may in turn drop to degree 1. Shots left with no unknown
    pixels and a non-zero residual are counted as conflicts; the first
    resolution of a pixel wins.
    """
    llrs = _check_llrs(llrs, graph)
    residual = (llrs >= 0).astype(np.int64).tolist()
    unknown = graph.degrees.tolist()
    shot_pixels = [shot.tolist() for shot in graph.signal_nodes]
    covering = [shots.tolist() for shots in graph.pixel_adjacency]
    assigned = [-1] * graph.pixel_count
    conflicts = 0

    ripple = deque(i for i, degree in enumerate(unknown) if degree == 1)
    while ripple:
        shot = ripple.popleft()
        if unknown[shot] != 1:
            continue
        pixel = next(j for j in shot_pixels[shot] if assigned[j] < 0)
        value = residual[shot]
        assigned[pixel] = value
        for other in covering[pixel]:
            if unknown[other] == 0:
                continue
            unknown[other] -= 1
            residual[other] ^= value
            if unknown[other] == 1:
                ripple.append(other)
            elif unknown[other] == 0 and residual[other] != 0:
                conflicts += 1

    result = PeelResult(assigned=assigned, conflicts=conflicts)
    logger.debug(
        "Peeling resolved %d/%d pixels (%d conflicts)",
        result.resolved_count, graph.pixel_count, conflicts,
    )
    return result


def write_trace(result: ReconstructionResult) -> str:
    """Per-iteration CSV: iteration, unsatisfied parity count, mean |L_j|."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["iteration", "unsatisfied", "mean_abs_llr"])
    for row in result.trace:
        writer.writerow([row.iteration, row.unsatisfied, repr(row.mean_abs_llr)])
    return buffer.getvalue()
