"""
Dynamic-programming inference over tree models and dense character
detection on plate crops.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from models.distance_transform import distance_transform_message
from models.exceptions import EmptyPyramidError, PreconditionError
from models.hog import HogCellGrid, HogConfig, HogPyramid, build_pyramid
from models.image_buffer import (BoundingBox, ImageBuffer, resize,
                                 to_grayscale)
from models.part_model import (CharacterMixtureSet, CharacterTreeModel,
                               Detection, PartPlacement, appearance_response,
                               appearance_responses)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LevelScores:
    """
    DP result of one model on one pyramid level. root_map[y, x] is the best
    total score (bias included) with the root at cell (x, y); argmaps maps a
    child part index to the (qx, qy) of that child per parent position.
    """
    level: int
    root_map: np.ndarray
    argmaps: Dict[int, np.ndarray]


@dataclass(frozen=True, eq=False)
class InferenceResult:
    score: float
    placement: PartPlacement
    root_maps: List[Optional[np.ndarray]]


def _fits(model: CharacterTreeModel, grid: HogCellGrid) -> bool:
    return all(part.h_cells <= grid.cells_y and part.w_cells <= grid.cells_x
               for part in model.parts)


def score_level(model: CharacterTreeModel, grid: HogCellGrid, level: int = 0,
                responses: Optional[Sequence[np.ndarray]] = None) \
        -> Optional[LevelScores]:
    """
    Leaf to root message passing on one grid. responses, when given, holds
    the precomputed appearance map of every part.
    :return: LevelScores, or None when a part does not fit on the grid
    """
    if not _fits(model, grid):
        return None
    model.check_concave()
    if responses is None:
        responses = [appearance_response(part, grid) for part in model.parts]
    subtree, argmaps = {}, {}
    for i in model.postorder():
        total = np.array(responses[i], dtype=np.float64)
        for child, params in model.children(i):
            message, argmax = distance_transform_message(
                subtree[child], params, model.parts[child].anchor,
                out_shape=total.shape)
            total += message
            argmaps[child] = argmax
        subtree[i] = total
    root_map = subtree[model.root] + model.bias
    return LevelScores(level, root_map, argmaps)


def score_levels(model: CharacterTreeModel, pyramid: HogPyramid,
                 responses: Optional[Sequence[Sequence[np.ndarray]]] = None) \
        -> List[Optional[LevelScores]]:
    return [score_level(model, grid, k,
                        None if responses is None else responses[k])
            for k, grid in enumerate(pyramid.levels)]


def backtrack(model: CharacterTreeModel, scores: LevelScores, x: int, y: int) \
        -> PartPlacement:
    """ Recover every part position from the root at cell (x, y). """
    positions = {model.root: (int(x), int(y))}
    for i in reversed(model.postorder()):
        px, py = positions[i]
        for child, _ in model.children(i):
            qx, qy = scores.argmaps[child][py, px]
            positions[child] = (int(qx), int(qy))
    return PartPlacement(scores.level,
                         tuple(positions[i] for i in range(len(model.parts))))


def best_root(root_map: np.ndarray) -> Tuple[float, int, int]:
    """ Max of a root map; ties keep the smallest y, then the smallest x. """
    index = int(np.argmax(root_map))
    y, x = divmod(index, root_map.shape[1])
    return float(root_map[y, x]), x, y


def infer_best(model: CharacterTreeModel, pyramid: HogPyramid) \
        -> InferenceResult:
    """
    Best configuration over all levels and root positions. Ties keep the
    lowest level, then the smallest y, then the smallest x.
    """
    if len(pyramid) == 0:
        raise EmptyPyramidError("cannot run inference on an empty pyramid")
    levels = score_levels(model, pyramid)
    best = None
    for scores in levels:
        if scores is None:
            continue
        score, x, y = best_root(scores.root_map)
        if best is None or score > best[0]:
            best = (score, scores, x, y)
    if best is None:
        raise EmptyPyramidError(f"no pyramid level fits model "
                                f"'{model.label}'")
    score, scores, x, y = best
    return InferenceResult(score, backtrack(model, scores, x, y),
                           [None if s is None else s.root_map
                            for s in levels])


def bank_responses(models: Sequence[CharacterTreeModel], grid: HogCellGrid) \
        -> List[List[Optional[np.ndarray]]]:
    """
    Appearance maps of every part of every model, one matrix product per
    distinct filter shape. Entries are None for parts that do not fit.
    """
    groups: Dict[Tuple[int, int], List[Tuple[int, int]]] = {}
    for m, model in enumerate(models):
        for p, part in enumerate(model.parts):
            groups.setdefault((part.h_cells, part.w_cells), []).append((m, p))
    result = [[None] * len(model.parts) for model in models]
    for (h_cells, w_cells), members in groups.items():
        if h_cells > grid.cells_y or w_cells > grid.cells_x:
            continue
        maps = appearance_responses(
            [models[m].parts[p].weights for m, p in members], grid)
        for (m, p), response in zip(members, maps):
            result[m][p] = response
    return result


def local_peaks(root_map: np.ndarray, radius: int) -> np.ndarray:
    """ True where a cell is the maximum of its (2 radius + 1)^2 window. """
    if radius == 0:
        return np.ones(root_map.shape, dtype=bool)
    neighbourhood = ndimage.maximum_filter(root_map, size=2 * radius + 1,
                                           mode="constant", cval=-np.inf)
    return root_map >= neighbourhood


def non_max_suppression(detections: Sequence[Detection],
                        iou_threshold: float = 0.5,
                        overlap_threshold: float = 1.0) -> List[Detection]:
    """
    Greedy per-class suppression: a detection survives when, against every
    stronger kept detection of the same label, its IoU is at most
    iou_threshold and its intersection covers at most overlap_threshold of
    the smaller box.
    """
    ordered = sorted(detections,
                     key=lambda d: (-d.score, d.label, d.box.x, d.box.y))
    kept: Dict[str, List[Detection]] = {}
    result = []
    for detection in ordered:
        same_label = kept.setdefault(detection.label, [])
        if all(detection.box.iou(other.box) <= iou_threshold
               and detection.box.overlap_min_ratio(other.box)
               <= overlap_threshold for other in same_label):
            same_label.append(detection)
            result.append(detection)
    return result


def canonical_resize(plate: ImageBuffer, hog: HogConfig) -> ImageBuffer:
    """ Grayscale plate resized to the canonical height, aspect preserved. """
    min_side = 2 * hog.cell_size
    if plate.width < min_side or plate.height < min_side:
        raise PreconditionError(f"plate {plate.width}x{plate.height} is "
                                f"smaller than {min_side}x{min_side}")
    height = hog.canonical_height
    width = max(1, int(round(plate.width * height / plate.height)))
    return resize(to_grayscale(plate), width, height)


def canonical_plate(plate: ImageBuffer, mixtures: CharacterMixtureSet) \
        -> ImageBuffer:
    hog = mixtures.hog_config
    canonical = canonical_resize(plate, hog)
    widest = max(model.root_filter.w_cells for _, _, model in
                 mixtures.models()) * hog.cell_size
    if canonical.width < widest:
        raise PreconditionError(f"plate aspect too narrow: "
                                f"{canonical.width} px wide at canonical "
                                f"height, root filters need {widest}")
    return canonical


def plate_pyramid(plate: ImageBuffer, mixtures: CharacterMixtureSet) \
        -> Tuple[ImageBuffer, HogPyramid]:
    hog = mixtures.hog_config
    canonical = canonical_plate(plate, mixtures)
    roots = [model.root_filter for _, _, model in mixtures.models()]
    min_cells = (min(r.w_cells for r in roots), min(r.h_cells for r in roots))
    pyramid = build_pyramid(canonical, hog.levels, hog.scale_step,
                            hog.cell_size, min_cells, hog)
    return canonical, pyramid


def root_box(pyramid: HogPyramid, level: int, x: int, y: int,
             w_cells: int, h_cells: int, factor: Tuple[float, float],
             width: int, height: int) -> BoundingBox:
    """ Map a root placement on a level back to plate pixels. """
    cell = pyramid.levels[level].cell_size
    sx, sy = pyramid.pixel_scale(level)
    fx, fy = sx * factor[0], sy * factor[1]
    return BoundingBox.from_corners(x * cell * fx, y * cell * fy,
                                    (x + w_cells) * cell * fx,
                                    (y + h_cells) * cell * fy, width, height)


def detect_characters(mixtures: CharacterMixtureSet, plate: ImageBuffer,
                      threshold: Optional[float] = None) -> List[Detection]:
    """
    Dense detection of every class on a plate crop. Root positions that
    score above threshold and peak in their neighbourhood become
    detections, capped per class, suppressed per class and sorted by score
    descending, then label, then x.
    """
    config = mixtures.detector_config
    if threshold is None:
        threshold = config.threshold
    canonical, pyramid = plate_pyramid(plate, mixtures)
    factor = (plate.width / canonical.width, plate.height / canonical.height)
    entries = list(mixtures.models())
    models = [model for _, _, model in entries]
    responses = [bank_responses(models, grid) if config.scans_level(k)
                 else None for k, grid in enumerate(pyramid.levels)]

    candidates: Dict[str, List[Tuple[float, int, int, int, int]]] = {}
    for index, (label, mixture, model) in enumerate(entries):
        found = candidates.setdefault(label, [])
        for k, grid in enumerate(pyramid.levels):
            if responses[k] is None:
                continue
            level_responses = responses[k][index]
            if any(r is None for r in level_responses):
                continue
            scores = score_level(model, grid, k, level_responses)
            peaks = local_peaks(scores.root_map, config.peak_radius)
            ys, xs = np.nonzero((scores.root_map > threshold) & peaks)
            for y, x in zip(ys, xs):
                found.append((float(scores.root_map[y, x]), k, int(y),
                              int(x), index))

    detections = []
    for label, found in candidates.items():
        found.sort(key=lambda c: (-c[0], c[1], c[2], c[3], c[4]))
        class_detections = []
        for score, k, y, x, index in found[:config.max_candidates_per_class]:
            root = models[index].root_filter
            box = root_box(pyramid, k, x, y, root.w_cells, root.h_cells,
                           factor, plate.width, plate.height)
            class_detections.append(Detection(box, label, score))
        detections.extend(non_max_suppression(class_detections,
                                              config.nms_iou,
                                              config.nms_overlap))
    detections.sort(key=lambda d: (-d.score, d.label, d.box.x))
    logger.debug("%d detections above %.3f on %dx%d plate", len(detections),
                 threshold, plate.width, plate.height)
    return detections
