"""
Remapping of analog bucket readings into GF(2).

Hard path: nearest integer count (clamped to [0, M]) then modulo 2.
Soft path: LLRs of every integer hypothesis against m = 0, then the gap
between the best and second-best hypothesis, signed by the parity of the best.
Exact path: parity LLR marginalized over all counts with equiprobable pixels.
"""

import csv
import io
import logging

import numpy as np
from scipy.special import gammaln, logsumexp
from scipy.stats import norm

from .errors import ChannelMisuseError, DecodeInputError
from .models import ChannelParams, EncodingGraph, MeasurementRecord, RemapMode, RemappedRecord, RemappedSignal

logger = logging.getLogger(__name__)


def _require_noise(params: ChannelParams) -> None:
    if params.sigma2 <= 0:
        raise ChannelMisuseError("soft remapping needs sigma2 > 0; use the hard path for a noiseless channel")


def integer_llr(y: float, m: int, params: ChannelParams) -> float:
    """
    ln f(y | m*y0) / f(y | 0) for the Gaussian reading model.

    Returns (2y - m*y0) * m*y0 / (2*sigma2); exactly 0 for m = 0.
    """
    _require_noise(params)
    if m == 0:
        return 0.0
    level = m * params.y0_mean
    return (2.0 * y - level) * level / (2.0 * params.sigma2)


def _llr_table(values: np.ndarray, degrees: np.ndarray, params: ChannelParams) -> np.ndarray:
    counts = np.arange(int(degrees.max()) + 1)
    levels = counts * params.y0_mean
    table = (2.0 * values[:, None] - levels[None, :]) * levels[None, :] / (2.0 * params.sigma2)
    table[counts[None, :] > degrees[:, None]] = -np.inf
    return table


def _remap_hard(values: np.ndarray, degrees: np.ndarray, params: ChannelParams) -> RemappedRecord:
    # np.rint rounds half-integers to the even neighbour
    m_star = np.clip(np.rint(values / params.y0_mean), 0, degrees).astype(np.int64)
    zeros = np.zeros(values.size)
    return RemappedRecord(mode=RemapMode.HARD, llr=zeros, bit=m_star % 2, m_star=m_star, delta_l=zeros)


def collapse_llr_table(table: np.ndarray) -> RemappedRecord:
    """
    Collapse per-hypothesis LLR rows (column m = hypothesis count m) into
    GF(2) LLRs: +/-(best - second best), positive when the best count is odd.
    Ties give 0. Impossible hypotheses must be -inf.
    """
    table = np.atleast_2d(np.asarray(table, dtype=np.float64))
    m_star = np.argmax(table, axis=1)
    ranked = np.sort(table, axis=1)
    delta_l = ranked[:, -1] - ranked[:, -2]
    llr = np.where(m_star % 2 == 1, delta_l, -delta_l)
    llr[delta_l == 0] = 0.0
    return RemappedRecord(mode=RemapMode.SOFT, llr=llr, bit=m_star % 2, m_star=m_star, delta_l=delta_l)


def _remap_soft(values: np.ndarray, degrees: np.ndarray, params: ChannelParams) -> RemappedRecord:
    return collapse_llr_table(_llr_table(values, degrees, params))


def _remap_exact(values: np.ndarray, degrees: np.ndarray, params: ChannelParams) -> RemappedRecord:
    counts = np.arange(int(degrees.max()) + 1)
    log_prior = (
        gammaln(degrees[:, None] + 1.0)
        - gammaln(counts[None, :] + 1.0)
        - gammaln(np.maximum(degrees[:, None] - counts[None, :], 0) + 1.0)
    )
    residual = values[:, None] - counts[None, :] * params.y0_mean
    log_joint = log_prior - residual ** 2 / (2.0 * params.sigma2)
    log_joint[counts[None, :] > degrees[:, None]] = -np.inf

    odd = counts % 2 == 1
    llr = logsumexp(np.where(odd, log_joint, -np.inf), axis=1) - logsumexp(
        np.where(~odd, log_joint, -np.inf), axis=1
    )
    m_star = np.argmax(_llr_table(values, degrees, params), axis=1)
    return RemappedRecord(mode=RemapMode.EXACT, llr=llr, bit=m_star % 2, m_star=m_star, delta_l=np.abs(llr))


def remap_values(
    values: np.ndarray,
    degrees: np.ndarray,
    params: ChannelParams,
    mode: RemapMode,
) -> RemappedRecord:
    """Remap readings shot by shot, each against its own degree M_i."""
    mode = RemapMode(mode)
    values = np.asarray(values, dtype=np.float64).ravel()
    degrees = np.asarray(degrees, dtype=np.int64).ravel()
    if values.size != degrees.size:
        raise DecodeInputError(f"{values.size} readings for {degrees.size} shots")
    if degrees.size and degrees.min() < 1:
        raise DecodeInputError("shot degrees must be >= 1")
    if values.size == 0:
        empty = np.zeros(0)
        return RemappedRecord(mode=mode, llr=empty, bit=empty, m_star=empty, delta_l=empty)

    if mode == RemapMode.HARD:
        return _remap_hard(values, degrees, params)
    _require_noise(params)
    if mode == RemapMode.SOFT:
        return _remap_soft(values, degrees, params)
    return _remap_exact(values, degrees, params)


def remap_hard(y: float, params: ChannelParams, degree: int) -> RemappedSignal:
    """Nearest-integer decision on y/y0, clamped to [0, degree], then parity."""
    return remap_values(np.array([y]), np.array([degree]), params, RemapMode.HARD)[0]


def remap_soft(y: float, params: ChannelParams, degree: int) -> RemappedSignal:
    """
    Soft GF(2) LLR of a single reading.

    Raises:
        ChannelMisuseError: sigma2 = 0
    """
    return remap_values(np.array([y]), np.array([degree]), params, RemapMode.SOFT)[0]


def remap_exact(y: float, params: ChannelParams, degree: int) -> RemappedSignal:
    return remap_values(np.array([y]), np.array([degree]), params, RemapMode.EXACT)[0]


def remap_record(record: MeasurementRecord, graph: EncodingGraph, mode: RemapMode) -> RemappedRecord:
    """
    Remap every reading of a record; shot i uses M_i = |A_i|.

    Raises:
        DecodeInputError: Record and graph disagree on N
    """
    if record.shot_count != graph.shot_count:
        raise DecodeInputError(
            f"record has {record.shot_count} readings, graph has {graph.shot_count} shots"
        )
    return remap_values(record.values, graph.degrees, record.params, mode)


def hard_parity_error_rate(degree: int, params: ChannelParams, m_true=None) -> float:
    """
    Analytic probability that the hard remap returns the wrong parity.

    Args:
        degree: Shot degree M
        params: Channel parameters
        m_true: True count of lit pixels; None averages over the binomial
            count distribution of equiprobable pixels

    Returns:
        Probability mass of the Gaussian falling in decision regions of
        opposite parity
    """
    if params.sigma2 == 0:
        return 0.0
    sigma = np.sqrt(params.sigma2)
    decisions = np.arange(degree + 1)
    lower = np.where(decisions == 0, -np.inf, (decisions - 0.5) * params.y0_mean)
    upper = np.where(decisions == degree, np.inf, (decisions + 0.5) * params.y0_mean)

    def error_for(m: int) -> float:
        level = m * params.y0_mean
        mass = norm.cdf((upper - level) / sigma) - norm.cdf((lower - level) / sigma)
        return float(mass[decisions % 2 != m % 2].sum())

    if m_true is not None:
        return error_for(int(m_true))
    weights = np.exp(
        gammaln(degree + 1.0) - gammaln(decisions + 1.0) - gammaln(degree - decisions + 1.0)
        - degree * np.log(2.0)
    )
    return float(sum(w * error_for(int(m)) for w, m in zip(weights, decisions)))


def write_remap_dump(record: MeasurementRecord, remapped: RemappedRecord) -> str:
    """Debug CSV: shot, y, m_star, delta_l, llr."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["shot", "y", "m_star", "delta_l", "llr"])
    for i in range(len(remapped)):
        writer.writerow([
            i,
            repr(float(record.values[i])),
            int(remapped.m_star[i]),
            repr(float(remapped.delta_l[i])),
            repr(float(remapped.llr[i])),
        ])
    return buffer.getvalue()
