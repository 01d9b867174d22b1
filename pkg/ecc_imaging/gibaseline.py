"""
Uncoded ghost-imaging baselines: Bernoulli illumination, mutual-correlation
and gradient-projection reconstructions.

The gradient-projection baseline is plain box-constrained least squares
(no sparsity or total-variation term).
"""

import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from .channel import add_awgn
from .errors import ConfigurationError
from .models import AnalogImage, ChannelParams, GiMeasurement

logger = logging.getLogger(__name__)

ROW_CHUNK = 1024
POWER_ITERATIONS = 50
DENSE_FLOAT64_LIMIT = 1 << 22  # entries; larger sensing matrices are held in float32


def _image_shape(pixel_count: int, width: Optional[int], height: Optional[int]) -> Tuple[int, int]:
    if width is not None and height is not None:
        return width, height
    side = math.isqrt(pixel_count)
    return (side, side) if side * side == pixel_count else (pixel_count, 1)


def bernoulli_patterns(
    pixel_count: int,
    shot_count: int,
    probability: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    N x K matrix of i.i.d. Bernoulli(probability) illumination bits.

    Rows are drawn in fixed-size chunks so the result depends only on the
    arguments, never on available memory.
    """
    if not 0 < probability < 1:
        raise ConfigurationError("Bernoulli probability must lie in (0, 1)")
    patterns = np.empty((shot_count, pixel_count), dtype=np.uint8)
    for start in range(0, shot_count, ROW_CHUNK):
        stop = min(start + ROW_CHUNK, shot_count)
        patterns[start:stop] = rng.random((stop - start, pixel_count)) < probability
    return patterns


def _matvec(patterns: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.empty(patterns.shape[0])
    for start in range(0, patterns.shape[0], ROW_CHUNK):
        out[start:start + ROW_CHUNK] = patterns[start:start + ROW_CHUNK].astype(np.float64) @ x
    return out


def _rmatvec(patterns: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.zeros(patterns.shape[1])
    for start in range(0, patterns.shape[0], ROW_CHUNK):
        out += patterns[start:start + ROW_CHUNK].astype(np.float64).T @ y[start:start + ROW_CHUNK]
    return out


def gi_clean_sums(pixels: np.ndarray, patterns: np.ndarray, params: ChannelParams) -> np.ndarray:
    """Noiseless bucket readings of every Bernoulli pattern."""
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.size != patterns.shape[1]:
        raise ConfigurationError(f"patterns span {patterns.shape[1]} pixels, scene has {pixels.size}")
    return _matvec(patterns, pixels) * params.y0_mean


def measure_gi(
    pixels: np.ndarray,
    patterns: np.ndarray,
    params: ChannelParams,
    rng: np.random.Generator,
) -> GiMeasurement:
    """Bucket readings of the Bernoulli patterns with AWGN of variance params.sigma2."""
    values = add_awgn(gi_clean_sums(pixels, patterns, params), params.sigma2, rng)
    return GiMeasurement(patterns=patterns, values=values, params=params)


def reconstruct_correlation(
    meas: GiMeasurement,
    width: Optional[int] = None,
    height: Optional[int] = None,
) -> AnalogImage:
    """
    Mutual-correlation image: the sample covariance of the bucket value with
    the pattern bit at each pixel, (1/N) sum_i y_i a_ij - mean(y) * mean(a_j).
    """
    if meas.shot_count < 2:
        raise ConfigurationError("correlation imaging needs at least two shots")
    n = meas.shot_count
    values = meas.values
    pattern_means = _rmatvec(meas.patterns, np.ones(n)) / n
    image = _rmatvec(meas.patterns, values) / n - values.mean() * pattern_means
    w, h = _image_shape(meas.pixel_count, width, height)
    return AnalogImage(width=w, height=h, values=image)


class GradientProjectionSolver:
    """
    Projected gradient descent for min 1/2 ||A x - y/y0||^2 over x in [0, 1]^K.

    Fixed step 1/lambda_max(A^T A), lambda_max from power iteration; start at
    x = 0.5; stop at the iteration cap or when the relative objective
    decrease falls below the tolerance.
    """

    def __init__(self, meas: GiMeasurement, iterations: int = 200, tolerance: float = 1e-6):
        if iterations < 1:
            raise ConfigurationError("gradient projection needs at least one iteration")
        self.meas = meas
        self.iterations = iterations
        self.tolerance = tolerance
        dtype = np.float64 if meas.patterns.size <= DENSE_FLOAT64_LIMIT else np.float32
        self._matrix = meas.patterns.astype(dtype)
        self._target = (meas.values / meas.params.y0_mean).astype(dtype)
        self.history: List[float] = []
        self.iterations_used = 0

    def objective(self, x: np.ndarray) -> float:
        residual = self._matrix @ x - self._target
        return 0.5 * float(np.dot(residual.astype(np.float64), residual.astype(np.float64)))

    def lipschitz(self) -> float:
        """Largest eigenvalue of A^T A by power iteration."""
        vector = np.ones(self._matrix.shape[1], dtype=self._matrix.dtype)
        vector /= np.linalg.norm(vector)
        estimate = 0.0
        for _ in range(POWER_ITERATIONS):
            image = self._matrix.T @ (self._matrix @ vector)
            norm = float(np.linalg.norm(image))
            if norm == 0.0:
                return 0.0
            estimate = float(np.dot(vector, image))
            vector = image / norm
        return estimate

    def solve(self) -> np.ndarray:
        x = np.full(self._matrix.shape[1], 0.5, dtype=self._matrix.dtype)
        current = self.objective(x)
        self.history = [current]
        lam = self.lipschitz()
        if lam <= 0.0:
            logger.warning("Sensing matrix is zero; returning the starting point")
            return x.astype(np.float64)

        step = 1.0 / lam
        for iteration in range(1, self.iterations + 1):
            gradient = self._matrix.T @ (self._matrix @ x - self._target)
            x = np.clip(x - step * gradient, 0.0, 1.0).astype(self._matrix.dtype)
            previous, current = current, self.objective(x)
            self.history.append(current)
            self.iterations_used = iteration
            if current == 0.0 or (previous - current) < self.tolerance * previous:
                break
        return x.astype(np.float64)


def reconstruct_gp(
    meas: GiMeasurement,
    iterations: int = 200,
    tolerance: float = 1e-6,
    width: Optional[int] = None,
    height: Optional[int] = None,
) -> AnalogImage:
    """Box-constrained least-squares image in [0, 1]^K (see GradientProjectionSolver)."""
    solver = GradientProjectionSolver(meas, iterations, tolerance)
    x = solver.solve()
    logger.debug("GP stopped after %d iterations, objective %.6g", solver.iterations_used, solver.history[-1])
    w, h = _image_shape(meas.pixel_count, width, height)
    return AnalogImage(width=w, height=h, values=x)


def normalize(image: AnalogImage) -> AnalogImage:
    """Min-max rescale to [0, 1]; a constant image maps to 0.5 everywhere."""
    low, high = float(image.values.min()), float(image.values.max())
    if high == low:
        values = np.full(image.values.size, 0.5)
    else:
        values = (image.values - low) / (high - low)
    return AnalogImage(width=image.width, height=image.height, values=values)
