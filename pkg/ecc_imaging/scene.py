"""
Binary scenes: built-in test patterns, square block partitioning and
plain-text netpbm I/O (PBM P1 for binary scenes, PGM P2 for analog images).
"""

import logging
import math
import re
from pathlib import Path
from typing import Iterator, List, Tuple, Union

import numpy as np

from .errors import ConfigurationError, ImageParseError
from .models import AnalogImage, BinaryScene, BlockPartition, PatternName

logger = logging.getLogger(__name__)

MIN_PATTERN_SIZE = 8
PGM_MAXVAL = 255
MAX_LINE_VALUES = 17  # keeps P1/P2 lines under 70 characters

_GLYPH_G = (".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".###.")
_GLYPH_I = ("###", ".#.", ".#.", ".#.", ".#.", ".#.", "###")

_TOKEN = re.compile(rb"#[^\n]*|\S+")


def _glyph_cells() -> np.ndarray:
    """The letters "GI" on an 11 x 9 cell grid with a one-cell margin."""
    blank = "." * 11
    rows = [blank] + ["." + g + "." + i + "." for g, i in zip(_GLYPH_G, _GLYPH_I)] + [blank]
    return np.array([[cell == "#" for cell in row] for row in rows], dtype=np.uint8)


def make_test_pattern(name: Union[str, PatternName], width: int, height: int) -> BinaryScene:
    """
    Render a deterministic test scene.

    Args:
        name: One of glyph-GI, checkerboard, solid, blank
        width: Scene width in pixels (>= 8 for glyph-GI and checkerboard)
        height: Scene height in pixels (>= 8 for glyph-GI and checkerboard)

    Returns:
        BinaryScene with 1-valued (transmissive) foreground

    Raises:
        ConfigurationError: Unknown pattern name or scene too small
    """
    try:
        pattern = PatternName(name)
    except ValueError:
        known = ", ".join(p.value for p in PatternName)
        raise ConfigurationError(f"unknown test pattern {name!r} (expected one of {known})") from None
    if width < 1 or height < 1:
        raise ConfigurationError("scene dimensions must be positive")
    structured = pattern in (PatternName.GLYPH_GI, PatternName.CHECKERBOARD)
    if structured and (width < MIN_PATTERN_SIZE or height < MIN_PATTERN_SIZE):
        raise ConfigurationError(f"{pattern.value} needs at least {MIN_PATTERN_SIZE}x{MIN_PATTERN_SIZE} pixels")

    if pattern == PatternName.SOLID:
        grid = np.ones((height, width), dtype=np.uint8)
    elif pattern == PatternName.BLANK:
        grid = np.zeros((height, width), dtype=np.uint8)
    elif pattern == PatternName.CHECKERBOARD:
        square = max(1, min(width, height) // 8)
        rows, cols = np.indices((height, width))
        grid = ((rows // square + cols // square) % 2).astype(np.uint8)
    else:
        cells = _glyph_cells()
        row_index = (np.arange(height) * cells.shape[0]) // height
        col_index = (np.arange(width) * cells.shape[1]) // width
        grid = cells[np.ix_(row_index, col_index)]

    return BinaryScene(width=width, height=height, pixels=grid)


def partition(scene: BinaryScene, block_count: int) -> BlockPartition:
    """
    Split a scene into Q square tiles in raster order.

    Tiles have side sqrt(P/Q) and must divide both the width and the height,
    so rectangular scenes tile as long as the squares fit exactly (16x8 with
    Q=2 gives two 8x8 tiles). Indices inside a tile are flat scene indices
    listed row-major within the tile. Q = 1 always yields the whole image as
    a single block.

    Raises:
        ConfigurationError: Q does not tile the scene into equal squares
    """
    total = scene.pixel_count
    if block_count == 1:
        return BlockPartition(pixel_count=total, block_size=total, blocks=[np.arange(total)])

    if block_count < 1 or total % block_count:
        raise ConfigurationError(f"Q={block_count} does not divide the {total} pixels of the scene")
    tile = math.isqrt(total // block_count)
    if tile * tile != total // block_count or scene.width % tile or scene.height % tile:
        raise ConfigurationError(
            f"Q={block_count} does not tile a {scene.width}x{scene.height} scene into squares"
        )

    index = np.arange(total).reshape(scene.height, scene.width)
    blocks = [
        index[r:r + tile, c:c + tile].ravel()
        for r in range(0, scene.height, tile)
        for c in range(0, scene.width, tile)
    ]
    return BlockPartition(pixel_count=total, block_size=tile * tile, blocks=blocks)


def _tokens(payload: bytes) -> Iterator[Tuple[bytes, int]]:
    for match in _TOKEN.finditer(payload):
        token = match.group()
        if not token.startswith(b"#"):
            yield token, match.start()


def _header_int(tokens: List[Tuple[bytes, int]], index: int, what: str, end: int) -> int:
    if index >= len(tokens):
        raise ImageParseError(f"missing {what}", end)
    token, offset = tokens[index]
    if not token.isdigit() or int(token) < 1:
        raise ImageParseError(f"invalid {what} {token.decode(errors='replace')!r}", offset)
    return int(token)


def _split_header(payload: Union[bytes, str], magic: bytes) -> Tuple[List[Tuple[bytes, int]], bytes]:
    if isinstance(payload, str):
        payload = payload.encode("ascii")
    tokens = list(_tokens(payload))
    if not tokens or tokens[0][0] != magic:
        offset = tokens[0][1] if tokens else 0
        raise ImageParseError(f"expected {magic.decode()} magic number", offset)
    return tokens, payload


def read_image(payload: Union[bytes, str]) -> BinaryScene:
    """
    Parse a plain PBM (P1) payload.

    Raises:
        ImageParseError: Malformed header, non-binary token or wrong pixel count
    """
    tokens, payload = _split_header(payload, b"P1")
    width = _header_int(tokens, 1, "width", len(payload))
    height = _header_int(tokens, 2, "height", len(payload))
    expected = width * height

    bits: List[int] = []
    for token, offset in tokens[3:]:
        # P1 allows pixels without separating whitespace
        for position, char in enumerate(token):
            if char not in (0x30, 0x31):
                raise ImageParseError(f"invalid pixel value {chr(char)!r}", offset + position)
            if len(bits) == expected:
                raise ImageParseError(f"more than {expected} pixel values", offset + position)
            bits.append(char - 0x30)

    if len(bits) != expected:
        raise ImageParseError(f"expected {expected} pixel values, found {len(bits)}", len(payload))
    return BinaryScene(width=width, height=height, pixels=bits)


def _rows_to_lines(grid: np.ndarray) -> List[str]:
    lines = []
    for row in grid:
        for start in range(0, row.size, MAX_LINE_VALUES):
            lines.append(" ".join(str(int(v)) for v in row[start:start + MAX_LINE_VALUES]))
    return lines


def write_image(scene: BinaryScene) -> bytes:
    """Serialize a scene as plain PBM (P1)."""
    lines = ["P1", f"{scene.width} {scene.height}"] + _rows_to_lines(scene.grid())
    return ("\n".join(lines) + "\n").encode("ascii")


def to_pgm_levels(values: np.ndarray) -> np.ndarray:
    """Map [0, 1] values to 0..255 grey levels, rounding half up."""
    return np.floor(np.clip(values, 0.0, 1.0) * PGM_MAXVAL + 0.5).astype(np.int64)


def write_pgm(image: AnalogImage) -> bytes:
    """Serialize an analog image with values in [0, 1] as plain PGM (P2, maxval 255)."""
    levels = to_pgm_levels(image.values).reshape(image.height, image.width)
    lines = ["P2", f"{image.width} {image.height}", str(PGM_MAXVAL)] + _rows_to_lines(levels)
    return ("\n".join(lines) + "\n").encode("ascii")


def read_pgm(payload: Union[bytes, str]) -> AnalogImage:
    """
    Parse a plain PGM (P2) payload into values scaled to [0, 1].

    Raises:
        ImageParseError: Malformed header, bad sample or wrong sample count
    """
    tokens, payload = _split_header(payload, b"P2")
    width = _header_int(tokens, 1, "width", len(payload))
    height = _header_int(tokens, 2, "height", len(payload))
    maxval = _header_int(tokens, 3, "maxval", len(payload))
    expected = width * height

    samples = tokens[4:]
    if len(samples) != expected:
        offset = samples[expected][1] if len(samples) > expected else len(payload)
        raise ImageParseError(f"expected {expected} samples, found {len(samples)}", offset)
    levels = []
    for token, offset in samples:
        if not token.isdigit() or int(token) > maxval:
            raise ImageParseError(f"invalid sample {token.decode(errors='replace')!r}", offset)
        levels.append(int(token))
    return AnalogImage(width=width, height=height, values=np.array(levels, dtype=np.float64) / maxval)


def load_scene(source: str, width: int, height: int) -> BinaryScene:
    """Resolve a scene source: a built-in pattern name or a path to a PBM file."""
    if source in {p.value for p in PatternName}:
        return make_test_pattern(source, width, height)
    path = Path(source)
    if not path.is_file():
        raise ConfigurationError(f"scene {source!r} is neither a test pattern nor a PBM file")
    logger.info("Loading scene from %s", path)
    return read_image(path.read_bytes())
