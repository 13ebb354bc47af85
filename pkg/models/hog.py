import logging
import math
from dataclasses import dataclass, asdict
from typing import List, Tuple

import numpy as np

from models.exceptions import (BoundsError, EmptyPyramidError,
                               PreconditionError)
from models.image_buffer import ImageBuffer, resize

logger = logging.getLogger(__name__)

HOG_BINS = 9
HOG_NORMALIZATIONS = 4
HOG_DIM = HOG_BINS * HOG_NORMALIZATIONS


@dataclass(frozen=True)
class HogConfig:
    """
    Feature and pyramid settings. Plate crops are first resized to
    canonical_height before the pyramid is built.
    """
    cell_size: int = 4
    bins: int = HOG_BINS
    clamp: float = 0.2
    eps: float = 1e-4
    levels: int = 8
    scale_step: float = 2.0 ** -0.25
    canonical_height: int = 64

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


class HogCellGrid:
    """
    Grid of per-cell HOG descriptors. Features are stored as a read-only
    (cells_y, cells_x, dim) array; (x, y) addresses column x of row y.
    """
    def __init__(self, features: np.ndarray, cell_size: int):
        array = np.asarray(features, dtype=np.float64)
        if array.ndim != 3:
            raise PreconditionError("HOG features must be a 3-D array")
        if not array.flags.writeable:
            self._features = array
        else:
            array = array.copy()
            array.setflags(write=False)
            self._features = array
        self.cell_size = cell_size

    @property
    def features(self) -> np.ndarray:
        return self._features

    @property
    def cells_x(self) -> int:
        return self._features.shape[1]

    @property
    def cells_y(self) -> int:
        return self._features.shape[0]

    @property
    def dim(self) -> int:
        return self._features.shape[2]

    def window(self, x: int, y: int, w: int, h: int) -> "HogCellGrid":
        if x < 0 or y < 0 or x + w > self.cells_x or y + h > self.cells_y:
            raise BoundsError(f"window ({x}, {y}, {w}, {h}) exceeds "
                              f"{self.cells_x}x{self.cells_y} grid")
        sub = np.array(self._features[y:y + h, x:x + w, :])
        sub.setflags(write=False)
        return HogCellGrid(sub, self.cell_size)


class HogPyramid:
    """
    Multi-scale feature pyramid, level 0 is the finest. scales holds the
    nominal factor scale_step ** k, level_sizes the (width, height) in
    pixels of the resampled image each level was computed from.
    """
    def __init__(self,
                 levels: List[HogCellGrid],
                 scales: List[float],
                 level_sizes: List[Tuple[int, int]],
                 source_size: Tuple[int, int]):
        self.levels = levels
        self.scales = scales
        self.level_sizes = level_sizes
        self.source_width, self.source_height = source_size

    def __len__(self):
        return len(self.levels)

    def pixel_scale(self, level: int) -> Tuple[float, float]:
        """ Factors mapping level pixels back to source pixels. """
        width, height = self.level_sizes[level]
        return self.source_width / width, self.source_height / height


def compute_gradients(img: ImageBuffer) -> Tuple[np.ndarray, np.ndarray]:
    """
    Central-difference gradients, one-sided on the border.
    :return: (magnitude, orientation) with orientation folded to [0, pi)
    """
    if img.channels != 1:
        raise PreconditionError("gradients need a 1-channel image")
    if img.width < 3 or img.height < 3:
        raise PreconditionError(f"image {img.width}x{img.height} is smaller "
                                f"than 3x3")
    plane = img.plane(0)
    grad_y, grad_x = np.gradient(plane)
    magnitude = np.hypot(grad_x, grad_y)
    orientation = np.mod(np.arctan2(grad_y, grad_x), np.pi)
    # mod can return pi itself for tiny negative angles
    orientation[orientation >= np.pi] = 0.0
    return magnitude, orientation


def orientation_histograms(img: ImageBuffer, cell_size: int,
                           bins: int = HOG_BINS) -> np.ndarray:
    """
    Unnormalized cell histograms, (cells_y, cells_x, bins). Every pixel votes
    its gradient magnitude bilinearly into the two nearest orientation bins
    and the four nearest cell centers.
    """
    if img.width < 2 * cell_size or img.height < 2 * cell_size:
        raise PreconditionError(f"image {img.width}x{img.height} is smaller "
                                f"than two cells of {cell_size} px")
    magnitude, orientation = compute_gradients(img)
    height, width = magnitude.shape
    cells_y, cells_x = height // cell_size, width // cell_size

    ys, xs = np.mgrid[0:height, 0:width]
    fx = (xs + 0.5) / cell_size - 0.5
    fy = (ys + 0.5) / cell_size - 0.5
    x0 = np.floor(fx).astype(np.int64)
    y0 = np.floor(fy).astype(np.int64)
    wx1 = fx - x0
    wy1 = fy - y0

    fo = orientation / (np.pi / bins) - 0.5
    o0 = np.floor(fo).astype(np.int64)
    wo1 = fo - o0
    o0 = np.mod(o0, bins)
    o1 = np.mod(o0 + 1, bins)

    total = cells_y * cells_x * bins
    histogram = np.zeros(total, dtype=np.float64)
    for dy, wy in ((0, 1.0 - wy1), (1, wy1)):
        for dx, wx in ((0, 1.0 - wx1), (1, wx1)):
            cy = y0 + dy
            cx = x0 + dx
            inside = (cy >= 0) & (cy < cells_y) & (cx >= 0) & (cx < cells_x)
            spatial = magnitude * wy * wx
            for ob, wo in ((o0, 1.0 - wo1), (o1, wo1)):
                index = (cy * cells_x + cx) * bins + ob
                histogram += np.bincount(index[inside],
                                         weights=(spatial * wo)[inside],
                                         minlength=total)
    return histogram.reshape(cells_y, cells_x, bins)


def normalize_histograms(histogram: np.ndarray, clamp: float = 0.2,
                         eps: float = 1e-4) -> np.ndarray:
    """
    Normalize each cell by the energy of the four 2x2 blocks containing it
    (zero outside the grid) and truncate at clamp.
    :return: (cells_y, cells_x, bins * 4)
    """
    energy = np.sum(histogram * histogram, axis=2)
    padded = np.pad(energy, 1)
    blocks = padded[:-1, :-1] + padded[1:, :-1] + padded[:-1, 1:] \
        + padded[1:, 1:]
    norms = (blocks[:-1, :-1], blocks[1:, :-1], blocks[:-1, 1:],
             blocks[1:, 1:])
    parts = [np.minimum(histogram / np.sqrt(norm + eps)[:, :, np.newaxis],
                        clamp)
             for norm in norms]
    return np.concatenate(parts, axis=2)


def hog_cells(img: ImageBuffer, cell_size: int = 4,
              config: HogConfig = HogConfig()) -> HogCellGrid:
    histogram = orientation_histograms(img, cell_size, config.bins)
    features = normalize_histograms(histogram, config.clamp, config.eps)
    return HogCellGrid(features, cell_size)


def build_pyramid(img: ImageBuffer,
                  levels: int = 8,
                  scale_step: float = 2.0 ** -0.25,
                  cell_size: int = 4,
                  min_cells: Tuple[int, int] = (1, 1),
                  config: HogConfig = HogConfig()) -> HogPyramid:
    """
    Compute HOG grids of img resized by scale_step ** k, k = 0..levels-1.
    Levels whose grid cannot hold a min_cells (w, h) filter are dropped.
    """
    if not 0.0 < scale_step < 1.0:
        raise PreconditionError(f"scale_step must lie in (0, 1), got "
                                f"{scale_step}")
    if levels < 1:
        raise PreconditionError("a pyramid needs at least one level")
    if img.channels != 1:
        raise PreconditionError("pyramids are built on 1-channel images")
    min_w = max(3, 2 * cell_size, min_cells[0] * cell_size)
    min_h = max(3, 2 * cell_size, min_cells[1] * cell_size)

    grids, scales, sizes = [], [], []
    for k in range(levels):
        scale = scale_step ** k
        width = int(math.floor(img.width * scale + 0.5))
        height = int(math.floor(img.height * scale + 0.5))
        if width < min_w or height < min_h:
            logger.debug("pyramid level %d (%dx%d) dropped", k, width,
                         height)
            break
        level_img = img if k == 0 else resize(img, width, height)
        grids.append(hog_cells(level_img, cell_size, config))
        scales.append(scale)
        sizes.append((width, height))
    if not grids:
        raise EmptyPyramidError(f"{img.width}x{img.height} image too small "
                                f"for a {min_cells} cell filter")
    return HogPyramid(grids, scales, sizes, (img.width, img.height))
