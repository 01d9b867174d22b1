"""
Data models for the coded-imaging simulator.

Array-valued fields hold read-only numpy arrays so that every model is
immutable after construction and can be shared between threads.
"""

import math
from enum import Enum
from typing import Dict, Iterable, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator


def _readonly(values, dtype) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.flags.writeable = False
    return array


def _is_binary(array: np.ndarray) -> bool:
    return bool(np.isin(array, (0, 1)).all())


class PatternName(str, Enum):
    """Built-in test scenes."""
    GLYPH_GI = "glyph-GI"
    CHECKERBOARD = "checkerboard"
    SOLID = "solid"
    BLANK = "blank"


class RemapMode(str, Enum):
    """How analog bucket readings are mapped to GF(2)."""
    HARD = "hard"
    SOFT = "soft"
    EXACT = "exact"  # full parity marginalization


class Method(str, Enum):
    """Reconstruction methods compared by the harness."""
    LT_BP = "lt-bp"
    LT_PEEL = "lt-peel"
    GI_CORRELATION = "gi-correlation"
    GI_GP = "gi-gp"


class _ArrayModel(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class BinaryScene(_ArrayModel):
    """Ground-truth binary image, row-major from the top-left pixel."""
    width: int = Field(ge=1)
    height: int = Field(ge=1)
    pixels: np.ndarray  # 1 = transmissive, 0 = opaque

    @field_validator("pixels", mode="before")
    @classmethod
    def _check_pixels(cls, value):
        array = np.asarray(value)
        if array.size and not _is_binary(array):
            raise ValueError("scene pixels must be 0 or 1")
        return _readonly(array.ravel(), np.uint8)

    @model_validator(mode="after")
    def _check_size(self) -> "BinaryScene":
        if self.pixels.size != self.width * self.height:
            raise ValueError(
                f"{self.pixels.size} pixels do not fill a {self.width}x{self.height} scene"
            )
        return self

    @property
    def pixel_count(self) -> int:
        return self.width * self.height

    def grid(self) -> np.ndarray:
        return self.pixels.reshape(self.height, self.width)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryScene):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.pixels, other.pixels)
        )

    __hash__ = None


class BlockPartition(_ArrayModel):
    """Disjoint square tiles covering a scene; each tile lists flat pixel indices."""
    pixel_count: int = Field(ge=1)
    block_size: int = Field(ge=1)
    blocks: Tuple[np.ndarray, ...]

    @field_validator("blocks", mode="before")
    @classmethod
    def _freeze_blocks(cls, value):
        return tuple(_readonly(block, np.int64) for block in value)

    @model_validator(mode="after")
    def _check_cover(self) -> "BlockPartition":
        if any(block.size != self.block_size for block in self.blocks):
            raise ValueError("every block must hold block_size pixels")
        covered = np.sort(np.concatenate(self.blocks)) if self.blocks else np.empty(0)
        if not np.array_equal(covered, np.arange(self.pixel_count)):
            raise ValueError("blocks must be disjoint and cover every pixel")
        return self

    @property
    def block_count(self) -> int:
        return len(self.blocks)

    def extract(self, pixels: np.ndarray) -> List[np.ndarray]:
        """Split a flat image into per-block value arrays."""
        return [np.asarray(pixels)[block] for block in self.blocks]

    def assemble(self, block_values: Sequence[np.ndarray]) -> np.ndarray:
        """Inverse of extract: scatter per-block values back into a flat image."""
        if len(block_values) != self.block_count:
            raise ValueError("one value array per block is required")
        out = np.empty(self.pixel_count, dtype=np.result_type(*block_values))
        for block, values in zip(self.blocks, block_values):
            out[block] = values
        return out


class DegreeDistribution(BaseModel):
    """Probability mass over the number of pixels illuminated per shot."""
    model_config = ConfigDict(frozen=True)

    support: Tuple[int, ...]
    mass: Tuple[float, ...]

    @model_validator(mode="after")
    def _check_mass(self) -> "DegreeDistribution":
        if not self.support or len(self.support) != len(self.mass):
            raise ValueError("support and mass must be non-empty and of equal length")
        if len(set(self.support)) != len(self.support):
            raise ValueError("degrees must be distinct")
        if min(self.support) < 1:
            raise ValueError("degrees must be >= 1")
        if min(self.mass) < 0:
            raise ValueError("probabilities must be >= 0")
        if abs(math.fsum(self.mass) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {math.fsum(self.mass)!r}, not 1")
        return self

    @classmethod
    def from_table(cls, table: Mapping[Union[int, str], float]) -> "DegreeDistribution":
        items = sorted((int(d), float(p)) for d, p in table.items())
        return cls(support=tuple(d for d, _ in items), mass=tuple(p for _, p in items))

    @property
    def max_degree(self) -> int:
        return max(self.support)

    @property
    def mean_degree(self) -> float:
        return math.fsum(d * p for d, p in zip(self.support, self.mass))

    def probability(self, degree: int) -> float:
        table = dict(zip(self.support, self.mass))
        return table.get(degree, 0.0)


class EncodingGraph(_ArrayModel):
    """
    Bipartite illumination graph of one block.

    Shot i illuminates the pixels shot_pixels[shot_offsets[i]:shot_offsets[i+1]]
    (the set A_i). The pixel-side adjacency B_j is derived as the exact transpose.
    """
    pixel_count: int = Field(ge=1)
    shot_offsets: np.ndarray
    shot_pixels: np.ndarray
    seed: Optional[int] = None

    _edge_signal: np.ndarray = PrivateAttr()
    _pixel_offsets: np.ndarray = PrivateAttr()
    _pixel_signals: np.ndarray = PrivateAttr()

    @field_validator("shot_offsets", "shot_pixels", mode="before")
    @classmethod
    def _freeze_index_arrays(cls, value):
        return _readonly(np.asarray(value).ravel(), np.int64)

    @model_validator(mode="after")
    def _check_shots(self) -> "EncodingGraph":
        offsets, pixels = self.shot_offsets, self.shot_pixels
        if offsets.size == 0 or offsets[0] != 0 or offsets[-1] != pixels.size:
            raise ValueError("shot_offsets must start at 0 and end at len(shot_pixels)")
        if np.any(np.diff(offsets) < 1):
            raise ValueError("every shot must illuminate at least one pixel")
        if pixels.size and (pixels.min() < 0 or pixels.max() >= self.pixel_count):
            raise ValueError("pixel index outside [0, pixel_count)")
        signal = np.repeat(np.arange(offsets.size - 1), np.diff(offsets))
        order = np.lexsort((pixels, signal))
        keyed = np.stack((signal[order], pixels[order]))
        if pixels.size > 1 and np.any(np.all(np.diff(keyed, axis=1) == 0, axis=0)):
            raise ValueError("a shot lists the same pixel twice")
        return self

    def model_post_init(self, __context) -> None:
        degrees = np.diff(self.shot_offsets)
        self._edge_signal = _readonly(np.repeat(np.arange(degrees.size), degrees), np.int64)
        order = np.argsort(self.shot_pixels, kind="stable")
        self._pixel_signals = _readonly(self._edge_signal[order], np.int64)
        counts = np.bincount(self.shot_pixels, minlength=self.pixel_count)
        self._pixel_offsets = _readonly(np.concatenate(([0], np.cumsum(counts))), np.int64)

    @classmethod
    def from_shots(
        cls,
        pixel_count: int,
        shots: Sequence[Iterable[int]],
        seed: Optional[int] = None,
    ) -> "EncodingGraph":
        """Build a graph from explicit pixel sets, one per shot."""
        rows = [sorted(int(j) for j in shot) for shot in shots]
        offsets = np.concatenate(([0], np.cumsum([len(row) for row in rows], dtype=np.int64)))
        flat = [j for row in rows for j in row]
        return cls(pixel_count=pixel_count, shot_offsets=offsets, shot_pixels=flat, seed=seed)

    @property
    def shot_count(self) -> int:
        return self.shot_offsets.size - 1

    @property
    def edge_count(self) -> int:
        return self.shot_pixels.size

    @property
    def degrees(self) -> np.ndarray:
        """M_i for every shot."""
        return np.diff(self.shot_offsets)

    @property
    def edge_signal(self) -> np.ndarray:
        return self._edge_signal

    @property
    def edge_pixel(self) -> np.ndarray:
        return self.shot_pixels

    @property
    def pixel_degrees(self) -> np.ndarray:
        return np.diff(self._pixel_offsets)

    def shot(self, index: int) -> np.ndarray:
        if not 0 <= index < self.shot_count:
            raise IndexError(f"shot {index} out of range [0, {self.shot_count})")
        return self.shot_pixels[self.shot_offsets[index]:self.shot_offsets[index + 1]]

    def covering_shots(self, pixel: int) -> np.ndarray:
        """B_j: shots that illuminate the given pixel."""
        if not 0 <= pixel < self.pixel_count:
            raise IndexError(f"pixel {pixel} out of range [0, {self.pixel_count})")
        return self._pixel_signals[self._pixel_offsets[pixel]:self._pixel_offsets[pixel + 1]]

    @property
    def signal_nodes(self) -> List[np.ndarray]:
        return [self.shot(i) for i in range(self.shot_count)]

    @property
    def pixel_adjacency(self) -> List[np.ndarray]:
        return [self.covering_shots(j) for j in range(self.pixel_count)]

    def uncovered_pixels(self) -> np.ndarray:
        return np.flatnonzero(self.pixel_degrees == 0)


class ChannelParams(BaseModel):
    """Bucket-detector response per bright pixel and receiver noise variance."""
    model_config = ConfigDict(frozen=True)

    y0_mean: float = Field(1.0, gt=0, allow_inf_nan=False)
    sigma2: float = Field(0.0, ge=0, allow_inf_nan=False)


class MeasurementRecord(_ArrayModel):
    """Analog bucket readings y_i for every shot of one graph."""
    values: np.ndarray
    params: ChannelParams
    graph_seed: Optional[int] = None
    noise_seed: Optional[int] = None

    @field_validator("values", mode="before")
    @classmethod
    def _freeze_values(cls, value):
        return _readonly(np.asarray(value).ravel(), np.float64)

    @property
    def shot_count(self) -> int:
        return self.values.size


class RemappedSignal(BaseModel):
    """GF(2) information extracted from one bucket reading."""
    model_config = ConfigDict(frozen=True)

    llr: float
    bit: int = Field(ge=0, le=1)
    m_star: int = Field(ge=0)
    delta_l: float = Field(ge=0)
    mode: RemapMode = RemapMode.SOFT

    @model_validator(mode="after")
    def _check_parity(self) -> "RemappedSignal":
        if self.bit != self.m_star % 2:
            raise ValueError("bit must equal m_star mod 2")
        if self.mode == RemapMode.SOFT:
            if abs(abs(self.llr) - self.delta_l) > 1e-12:
                raise ValueError("|llr| must equal delta_l")
            if self.delta_l > 0 and (self.llr > 0) != (self.m_star % 2 == 1):
                raise ValueError("llr sign must follow the parity of m_star")
        return self


class RemappedRecord(_ArrayModel):
    """Vectorized remapping of a whole measurement record."""
    mode: RemapMode
    llr: np.ndarray
    bit: np.ndarray
    m_star: np.ndarray
    delta_l: np.ndarray

    @field_validator("llr", "delta_l", mode="before")
    @classmethod
    def _freeze_real(cls, value):
        return _readonly(value, np.float64)

    @field_validator("bit", "m_star", mode="before")
    @classmethod
    def _freeze_int(cls, value):
        return _readonly(value, np.int64)

    def __len__(self) -> int:
        return self.llr.size

    def __getitem__(self, index: int) -> RemappedSignal:
        return RemappedSignal(
            llr=float(self.llr[index]),
            bit=int(self.bit[index]),
            m_star=int(self.m_star[index]),
            delta_l=float(self.delta_l[index]),
            mode=self.mode,
        )

    def channel_llrs(self, hard_magnitude: float = 20.0) -> np.ndarray:
        """GF(2) LLRs fed to the decoder; positive favours parity 1."""
        if self.mode == RemapMode.HARD:
            return np.where(self.bit == 1, hard_magnitude, -hard_magnitude).astype(np.float64)
        return np.array(self.llr)


class BpConfig(BaseModel):
    """Belief-propagation settings."""
    model_config = ConfigDict(frozen=True)

    max_iterations: int = Field(50, ge=0)
    message_clamp: float = Field(30.0, gt=0, allow_inf_nan=False)
    stop_on_syndrome: bool = True


class BpTraceRow(BaseModel):
    """Decoder state after one iteration."""
    iteration: int
    unsatisfied: int
    mean_abs_llr: float


class ReconstructionResult(_ArrayModel):
    """Decoded block with posteriors and run diagnostics."""
    decoded: np.ndarray
    pixel_llrs: np.ndarray
    signal_llrs: np.ndarray
    iterations_used: int = Field(ge=0)
    converged: bool
    uncovered: np.ndarray = Field(default_factory=lambda: np.empty(0, dtype=np.int64))
    trace: List[BpTraceRow] = Field(default_factory=list)

    @field_validator("decoded", mode="before")
    @classmethod
    def _freeze_bits(cls, value):
        return _readonly(value, np.uint8)

    @field_validator("pixel_llrs", "signal_llrs", mode="before")
    @classmethod
    def _freeze_llrs(cls, value):
        return _readonly(value, np.float64)

    @field_validator("uncovered", mode="before")
    @classmethod
    def _freeze_uncovered(cls, value):
        return _readonly(value, np.int64)

    @model_validator(mode="after")
    def _check_decision(self) -> "ReconstructionResult":
        if not np.array_equal(self.decoded, (self.pixel_llrs >= 0).astype(np.uint8)):
            raise ValueError("decoded[j] must be 1 exactly when pixel_llrs[j] >= 0")
        return self

    @property
    def coverage_gap(self) -> float:
        return self.uncovered.size / self.decoded.size if self.decoded.size else 0.0


class PeelResult(_ArrayModel):
    """Outcome of hard-decision peeling: -1 marks an unresolved pixel."""
    assigned: np.ndarray
    conflicts: int = 0

    @field_validator("assigned", mode="before")
    @classmethod
    def _freeze_assigned(cls, value):
        return _readonly(value, np.int8)

    @property
    def unresolved(self) -> np.ndarray:
        return np.flatnonzero(self.assigned < 0)

    @property
    def resolved_count(self) -> int:
        return int(np.count_nonzero(self.assigned >= 0))

    def decoded(self) -> np.ndarray:
        """Unresolved pixels take the tie value 1."""
        return np.where(self.assigned < 0, 1, self.assigned).astype(np.uint8)


class GiMeasurement(_ArrayModel):
    """Uncoded ghost-imaging acquisition: N x K Bernoulli patterns and bucket values."""
    patterns: np.ndarray
    values: np.ndarray
    params: ChannelParams

    @field_validator("patterns", mode="before")
    @classmethod
    def _freeze_patterns(cls, value):
        array = np.asarray(value)
        if array.ndim != 2:
            raise ValueError("patterns must be an N x K matrix")
        if array.size and not _is_binary(array):
            raise ValueError("pattern entries must be 0 or 1")
        return _readonly(array, np.uint8)

    @field_validator("values", mode="before")
    @classmethod
    def _freeze_values(cls, value):
        return _readonly(np.asarray(value).ravel(), np.float64)

    @model_validator(mode="after")
    def _check_shape(self) -> "GiMeasurement":
        if self.values.size != self.patterns.shape[0]:
            raise ValueError("one bucket value per pattern is required")
        return self

    @property
    def shot_count(self) -> int:
        return self.patterns.shape[0]

    @property
    def pixel_count(self) -> int:
        return self.patterns.shape[1]


class AnalogImage(_ArrayModel):
    """Real-valued reconstruction, row-major."""
    width: int = Field(ge=1)
    height: int = Field(ge=1)
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _freeze_values(cls, value):
        array = np.asarray(value, dtype=np.float64).ravel()
        if not np.all(np.isfinite(array)):
            raise ValueError("image values must be finite")
        return _readonly(array, np.float64)

    @model_validator(mode="after")
    def _check_size(self) -> "AnalogImage":
        if self.values.size != self.width * self.height:
            raise ValueError("values do not fill the image")
        return self


class ScoreRow(BaseModel):
    """One scored reconstruction (one method at one SNR and seed)."""
    model_config = ConfigDict(frozen=True)

    method: Method
    snr_db: float
    seed: int
    mse: float = Field(ge=0, le=1)
    iterations: int = Field(0, ge=0)
    coverage_gap: float = Field(0.0, ge=0, le=1)


SCORE_COLUMNS = ("method", "snr_db", "seed", "mse", "iterations", "coverage_gap")


class CellFailure(BaseModel):
    """A sweep cell that aborted."""
    snr_db: float
    seed: int
    stage: str
    error: str


class CellOutput(BaseModel):
    """Everything one (snr, seed) cell produced."""
    snr_db: float
    seed: int
    rows: List[ScoreRow] = Field(default_factory=list)
    artifacts: Dict[str, bytes] = Field(default_factory=dict)  # relative path -> file content
    traces: List[dict] = Field(default_factory=list)


class ExperimentConfig(BaseModel):
    """Everything needed to reproduce a sweep."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    scene: str = PatternName.GLYPH_GI.value  # pattern name or path to a PBM file
    width: int = Field(64, ge=8)
    height: int = Field(64, ge=8)
    block_count: int = Field(1, ge=1)
    shots: int = Field(8192, ge=1)
    degree_distribution: Union[Literal["paper"], Dict[int, float]] = "paper"
    snr_grid: List[float] = Field(default_factory=lambda: [2.0, 1.0, 0.0, -1.0, -2.0, -3.0, -4.0, -5.0])
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2])
    master_seed: int = Field(20170705, ge=0)
    decoder_mode: RemapMode = RemapMode.SOFT
    hard_llr_magnitude: float = Field(20.0, gt=0)
    bp: BpConfig = Field(default_factory=BpConfig)
    methods: List[Method] = Field(
        default_factory=lambda: [Method.LT_BP, Method.GI_CORRELATION, Method.GI_GP]
    )
    gi_probability: float = Field(0.5, gt=0, lt=1)
    gp_iterations: int = Field(200, ge=1)
    gp_tolerance: float = Field(1e-6, ge=0)
    y0_mean: float = Field(1.0, gt=0)
    noiseless: bool = False
    workers: int = Field(1, ge=1)
    output_dir: str = "outputs"
    write_images: bool = True
    trace_bp: bool = False
    dump_remap: bool = False

    @model_validator(mode="after")
    def _check_grid(self) -> "ExperimentConfig":
        if not self.snr_grid:
            raise ValueError("snr_grid must not be empty")
        if not self.seeds:
            raise ValueError("seeds must not be empty")
        if len(set(self.seeds)) != len(self.seeds) or min(self.seeds) < 0:
            raise ValueError("seeds must be distinct non-negative integers")
        if len(set(self.snr_grid)) != len(self.snr_grid):
            raise ValueError("snr_grid values must be distinct")
        if not all(math.isfinite(s) for s in self.snr_grid):
            raise ValueError("snr_grid values must be finite")
        if not self.methods:
            raise ValueError("at least one method must be enabled")
        if self.noiseless and self.decoder_mode != RemapMode.HARD and Method.LT_BP in self.methods:
            raise ValueError("a noiseless channel needs decoder_mode 'hard'")
        return self


class SweepResult(BaseModel):
    """Aggregated output of a sweep."""
    rows: List[ScoreRow] = Field(default_factory=list)
    failures: List[CellFailure] = Field(default_factory=list)
    results_path: Optional[str] = None
    summary_path: Optional[str] = None

    @property
    def exit_code(self) -> int:
        return 2 if self.failures else 0
