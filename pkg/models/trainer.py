"""
Latent-SVM training of the character mixtures.

Each class alternates three steps: latent relabeling of its positives
inside a one-cell radius of the annotation, hard-negative mining on plates
without the class, and SGD epochs on the L2-regularized hinge loss with the
decaying learning rate lambda_{i+1} = decay * lambda_i.
"""
import logging
import os.path
import threading
from dataclasses import dataclass, asdict, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from models.exceptions import (MissingClassError, ParameterError,
                               PreconditionError, TrainingDivergenceError)
from models.hog import (HOG_NORMALIZATIONS, HogCellGrid, HogConfig,
                        HogPyramid, build_pyramid)
from models.image_buffer import BoundingBox, ImageBuffer, crop, load_image
from models.inference import (LevelScores, backtrack, best_root,
                              canonical_resize, score_level)
from models.part_model import (ALPHABET, CharacterMixtureSet,
                               CharacterTreeModel, DeformationParams,
                               DetectorConfig, Edge, PartFilter,
                               PartPlacement, check_placement,
                               default_topology)
from models.plate_synth import read_manifest

logger = logging.getLogger(__name__)

# candidates kept per level before overlap suppression during mining
MINING_CANDIDATES_PER_LEVEL = 32
# levels scanned at detection beyond those the positives were found on
LEVEL_SLACK = 1


@dataclass(frozen=True)
class TrainingConfig:
    lambda0: float = 0.0003
    decay: float = 0.9
    epochs: int = 10
    reg_c: float = 0.01
    negatives_per_positive: int = 5
    rng_seed: int = 0
    latent_rounds: int = 3
    mixtures_per_class: int = 1
    max_positives_per_class: int = 300
    negative_pool_size: int = 120
    latent_radius: int = 1
    alphabet: str = ALPHABET
    root_cells: Tuple[int, int] = (4, 8)
    part_cells: Tuple[int, int] = (4, 4)

    def __post_init__(self):
        object.__setattr__(self, "root_cells", tuple(self.root_cells))
        object.__setattr__(self, "part_cells", tuple(self.part_cells))
        if self.lambda0 <= 0.0:
            raise ParameterError(f"lambda0 must be positive, got "
                                 f"{self.lambda0}")
        if not 0.0 < self.decay <= 1.0:
            raise ParameterError(f"decay must lie in (0, 1], got "
                                 f"{self.decay}")
        if self.epochs < 0 or self.latent_rounds < 1:
            raise ParameterError("epochs must be >= 0 and latent_rounds >= 1")
        if self.mixtures_per_class < 1:
            raise ParameterError("each class needs at least one mixture")
        if self.reg_c < 0.0 or self.latent_radius < 0:
            raise ParameterError("reg_c and latent_radius must be >= 0")
        if len(set(self.alphabet)) != len(self.alphabet) or not self.alphabet:
            raise ParameterError("alphabet must be non-empty without repeats")

    def to_dict(self):
        data = asdict(self)
        data["root_cells"] = list(self.root_cells)
        data["part_cells"] = list(self.part_cells)
        return data

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


@dataclass(frozen=True)
class TrainingSample:
    """
    A positive names one character (label and box in image pixels) of the
    plate at plate_box; a negative stands for the whole plate as background.
    """
    image_id: str
    image_path: str
    plate_box: BoundingBox
    label: Optional[str] = None
    box: Optional[BoundingBox] = None
    positive: bool = True

    def __post_init__(self):
        if self.positive and (self.label is None or self.box is None):
            raise PreconditionError("a positive sample needs a label and box")
        if not self.positive and (self.label is not None
                                  or self.box is not None):
            raise PreconditionError("a negative sample carries no label")

    @property
    def plate_key(self) -> Tuple[str, str, Tuple[int, int, int, int]]:
        return self.image_id, self.image_path, tuple(self.plate_box.to_list())

    def box_in_plate(self) -> BoundingBox:
        return BoundingBox(self.box.x - self.plate_box.x,
                           self.box.y - self.plate_box.y,
                           self.box.w, self.box.h)


@dataclass(frozen=True)
class TrainingLogEntry:
    label: str
    mixture: int
    round: int
    epoch: int
    lr: float
    loss: float
    negatives: int

    def line(self) -> str:
        return (f"class={self.label} mixture={self.mixture} "
                f"round={self.round} epoch={self.epoch} lr={self.lr:.6g} "
                f"loss={self.loss:.6f} negatives={self.negatives}")


class TrainingLog:
    def __init__(self):
        self.entries: List[TrainingLogEntry] = []
        self._lock = threading.Lock()

    def extend(self, entries: Sequence[TrainingLogEntry]):
        with self._lock:
            self.entries.extend(entries)

    def lines(self) -> List[str]:
        return [entry.line() for entry in self.entries]

    def write(self, path: str):
        with open(path, 'w', encoding='utf-8') as file:
            for line in self.lines():
                file.write(line + "\n")


@dataclass(frozen=True, eq=False)
class PlateFeatures:
    """ Canonical pyramid of one plate; scale maps plate to canonical px. """
    pyramid: HogPyramid
    scale: Tuple[float, float]


@dataclass(frozen=True, eq=False)
class LatentWindow:
    """
    A positive on one pyramid level. Root positions are restricted to the
    inclusive range roots = (x_min, y_min, x_max, y_max) around the
    annotation's nominal root cell; the other parts may go anywhere on the
    level grid, which is shared by every window of the same plate and level.
    """
    level: int
    roots: Tuple[int, int, int, int]
    nominal: Tuple[int, int]
    grid: HogCellGrid
    aspect: float


def lr_schedule(config: TrainingConfig, epoch: int) -> float:
    """ lambda0 * decay ** epoch, evaluated as repeated decay steps. """
    if epoch < 0:
        raise PreconditionError(f"epoch must be >= 0, got {epoch}")
    lr = config.lambda0
    for _ in range(epoch):
        lr = lr * config.decay
    return lr


def plate_features(plate: ImageBuffer, hog: HogConfig,
                   min_cells: Tuple[int, int]) -> PlateFeatures:
    canonical = canonical_resize(plate, hog)
    pyramid = build_pyramid(canonical, hog.levels, hog.scale_step,
                            hog.cell_size, min_cells, hog)
    return PlateFeatures(pyramid, (canonical.width / plate.width,
                                   canonical.height / plate.height))


def positive_window(features: PlateFeatures, box: BoundingBox,
                    root_cells: Tuple[int, int], radius: int = 1) \
        -> Optional[LatentWindow]:
    """
    Root range around a plate-relative box at the level whose scale brings
    the box height closest to the root filter height.
    """
    pyramid = features.pyramid
    root_w, root_h = root_cells
    cell = pyramid.levels[0].cell_size
    best_level, best_gap = 0, None
    for k in range(len(pyramid)):
        _, sy = pyramid.pixel_scale(k)
        gap = abs(box.h * features.scale[1] / sy - root_h * cell)
        if best_gap is None or gap < best_gap:
            best_level, best_gap = k, gap
    grid = pyramid.levels[best_level]
    sx, sy = pyramid.pixel_scale(best_level)
    cx = (box.x + box.w / 2.0) * features.scale[0] / sx
    cy = (box.y + box.h / 2.0) * features.scale[1] / sy
    nominal_x = int(np.floor(cx / cell - root_w / 2.0 + 0.5))
    nominal_y = int(np.floor(cy / cell - root_h / 2.0 + 0.5))
    x_min, y_min = max(0, nominal_x - radius), max(0, nominal_y - radius)
    x_max = min(grid.cells_x - root_w, nominal_x + radius)
    y_max = min(grid.cells_y - root_h, nominal_y + radius)
    if x_min > x_max or y_min > y_max:
        return None
    nominal = (min(max(nominal_x, x_min), x_max),
               min(max(nominal_y, y_min), y_max))
    return LatentWindow(best_level, (x_min, y_min, x_max, y_max), nominal,
                        grid, box.w / float(box.h))


def feature_vector(model: CharacterTreeModel, grid: HogCellGrid,
                   placement: PartPlacement) -> np.ndarray:
    """
    Phi(L): part features in part order, then (dx^2, dy^2, dx, dy) per edge,
    then 1 for the bias, so S(I, L) = model_to_vector(model) . Phi(L).
    """
    check_placement(model, grid, placement)
    positions = placement.positions
    chunks = []
    for part, (x, y) in zip(model.parts, positions):
        chunks.append(grid.features[y:y + part.h_cells,
                                    x:x + part.w_cells, :].ravel())
    for edge in model.edges:
        px, py = positions[edge.parent]
        cx, cy = positions[edge.child]
        ax, ay = model.parts[edge.child].anchor
        dx, dy = cx - px - ax, cy - py - ay
        chunks.append(np.array([dx * dx, dy * dy, dx, dy], dtype=np.float64))
    chunks.append(np.ones(1))
    return np.concatenate(chunks)


def model_to_vector(model: CharacterTreeModel) -> np.ndarray:
    chunks = [part.weights.ravel() for part in model.parts]
    chunks.extend(edge.params.as_array() for edge in model.edges)
    chunks.append(np.array([model.bias]))
    return np.concatenate(chunks)


def vector_to_model(model: CharacterTreeModel, vector: np.ndarray) \
        -> CharacterTreeModel:
    """ Same topology and anchors as model, parameters taken from vector. """
    vector = np.asarray(vector, dtype=np.float64)
    offset, parts = 0, []
    for part in model.parts:
        size = part.weights.size
        weights = vector[offset:offset + size].reshape(part.weights.shape)
        parts.append(PartFilter(weights.copy(), part.anchor))
        offset += size
    edges = []
    for edge in model.edges:
        a, b, c, d = vector[offset:offset + 4]
        edges.append(Edge(edge.parent, edge.child,
                          DeformationParams(float(a), float(b), float(c),
                                            float(d))))
        offset += 4
    if offset + 1 != vector.size:
        raise PreconditionError(f"vector of {vector.size} values does not "
                                f"match the model layout")
    return CharacterTreeModel(parts, edges, model.root, float(vector[offset]),
                              model.label)


def regularization_mask(model: CharacterTreeModel) -> np.ndarray:
    """ 1 for every regularized coordinate; the bias is not. """
    mask = np.ones(model_to_vector(model).size)
    mask[-1] = 0.0
    return mask


def project_deformation(model: CharacterTreeModel) -> CharacterTreeModel:
    edges = [Edge(e.parent, e.child, e.params.projected())
             for e in model.edges]
    return CharacterTreeModel(model.parts, edges, model.root, model.bias,
                              model.label)


def hinge_objective(w: np.ndarray, X: np.ndarray, y: np.ndarray,
                    reg_c: float, mask: Optional[np.ndarray] = None) -> float:
    """ reg_c / 2 |w|^2 + mean(max(0, 1 - y X w)). """
    mask = np.ones_like(w) if mask is None else mask
    regular = 0.5 * reg_c * float(np.sum((w * mask) ** 2))
    if len(y) == 0:
        return regular
    margins = y * (X @ w)
    return regular + float(np.mean(np.maximum(0.0, 1.0 - margins)))


def full_batch_step(w: np.ndarray, X: np.ndarray, y: np.ndarray, lr: float,
                    reg_c: float, mask: Optional[np.ndarray] = None) \
        -> np.ndarray:
    """ One subgradient step on hinge_objective over the whole batch. """
    mask = np.ones_like(w) if mask is None else mask
    gradient = reg_c * mask * w
    if len(y):
        active = y * (X @ w) < 1.0
        gradient = gradient - (y[active, np.newaxis] * X[active]).sum(axis=0) \
            / len(y)
    return w - lr * gradient


def _training_matrix(positives, negatives, size: int) \
        -> Tuple[np.ndarray, np.ndarray]:
    pos = np.asarray(positives, dtype=np.float64).reshape(-1, size)
    neg = np.asarray(negatives, dtype=np.float64).reshape(-1, size)
    X = np.vstack([pos, neg])
    y = np.concatenate([np.ones(len(pos)), -np.ones(len(neg))])
    return X, y


def sgd_hinge_epoch(model: CharacterTreeModel, positives, negatives,
                    lr: float, reg_c: float,
                    rng: Optional[np.random.Generator] = None) \
        -> CharacterTreeModel:
    """
    One SGD pass over positives then negatives (shuffled when rng is given),
    followed by projection of the deformation quadratics to <= -1e-3.
    """
    w = model_to_vector(model)
    mask = regularization_mask(model)
    X, y = _training_matrix(positives, negatives, w.size)
    order = rng.permutation(len(y)) if rng is not None else range(len(y))
    for i in order:
        gradient = reg_c * mask * w
        if y[i] * float(X[i] @ w) < 1.0:
            gradient = gradient - y[i] * X[i]
        w = w - lr * gradient
    return project_deformation(vector_to_model(model, w))


def _relabel(model: CharacterTreeModel, window: LatentWindow,
             cache: Optional[Dict[int, Optional[LevelScores]]] = None) \
        -> Optional[Tuple[float, PartPlacement, np.ndarray]]:
    """
    Best placement on the full level grid with the root inside the window's
    root range. cache maps id(grid) to the model's scores on that grid.
    """
    key = id(window.grid)
    if cache is not None and key in cache:
        scores = cache[key]
    else:
        scores = score_level(model, window.grid, window.level)
        if cache is not None:
            cache[key] = scores
    if scores is None:
        return None
    x_min, y_min, x_max, y_max = window.roots
    score, x, y = best_root(scores.root_map[y_min:y_max + 1,
                                            x_min:x_max + 1])
    placement = backtrack(model, scores, x + x_min, y + y_min)
    return score, placement, feature_vector(model, window.grid, placement)


def latent_positive_relabel(model: CharacterTreeModel,
                            sample: TrainingSample,
                            features: PlateFeatures,
                            radius: int = 1) -> Optional[PartPlacement]:
    """
    argmax of S(I, L) over placements whose root lies within radius cells
    of the annotation at its best-matching level, in level coordinates.
    The other parts are not restricted.
    :return: the placement, or None when the sample has to be skipped
    """
    if not sample.positive:
        raise PreconditionError("latent relabeling needs a positive sample")
    root = model.root_filter
    window = positive_window(features, sample.box_in_plate(),
                             (root.w_cells, root.h_cells), radius)
    if window is None:
        return None
    found = _relabel(model, window)
    return None if found is None else found[1]


def mine_hard_negatives(model: CharacterTreeModel,
                        backgrounds: Sequence[Union[ImageBuffer, HogPyramid]],
                        k: int, hog: HogConfig = HogConfig()) \
        -> List[Tuple[np.ndarray, PartPlacement]]:
    """
    Top-k scoring placements over the backgrounds, overlapping roots on the
    same level suppressed. Order: score descending, then background index,
    level, y, x.
    """
    if not backgrounds:
        raise PreconditionError("hard-negative mining needs backgrounds")
    if k <= 0:
        return []
    root = model.root_filter
    candidates = []
    grids = []
    for b, background in enumerate(backgrounds):
        if isinstance(background, ImageBuffer):
            background = plate_features(background, hog,
                                        (root.w_cells, root.h_cells)).pyramid
        for level, grid in enumerate(background.levels):
            scores = score_level(model, grid, level)
            if scores is None:
                continue
            flat = scores.root_map.ravel()
            order = np.lexsort((np.arange(flat.size), -flat))
            kept: List[BoundingBox] = []
            width = scores.root_map.shape[1]
            for index in order[:MINING_CANDIDATES_PER_LEVEL]:
                y, x = divmod(int(index), width)
                box = BoundingBox(x, y, root.w_cells, root.h_cells)
                if any(box.iou(other) > 0.5 for other in kept):
                    continue
                kept.append(box)
                candidates.append((-float(flat[index]), b, level, y, x,
                                   len(grids)))
            grids.append((grid, scores))
    candidates.sort(key=lambda c: c[:5])
    mined = []
    for _, _, _, y, x, ref in candidates[:k]:
        grid, scores = grids[ref]
        placement = backtrack(model, scores, x, y)
        mined.append((feature_vector(model, grid, placement), placement))
    return mined


def initial_component(label: str, windows: Sequence[LatentWindow],
                      config: TrainingConfig, dim: int) -> CharacterTreeModel:
    """
    Root from the centered mean of positive features at the nominal
    placement; children copy the matching halves; all weights halved.
    """
    template = default_topology(label, dim, config.root_cells,
                                config.part_cells)
    root_w, root_h = config.root_cells
    patches = [w.grid.features[w.nominal[1]:w.nominal[1] + root_h,
                               w.nominal[0]:w.nominal[0] + root_w, :]
               for w in windows]
    mean = np.mean(patches, axis=0)
    centered = 0.5 * (mean - mean.mean())
    parts = []
    for part in template.parts:
        ax, ay = part.anchor
        parts.append(PartFilter(centered[ay:ay + part.h_cells,
                                         ax:ax + part.w_cells, :].copy(),
                                part.anchor))
    return CharacterTreeModel(parts, template.edges, template.root, 0.0,
                              label)


def _split_by_aspect(windows: Sequence[LatentWindow], n_mixtures: int) \
        -> List[List[LatentWindow]]:
    if n_mixtures == 1:
        return [list(windows)]
    aspects = np.array([w.aspect for w in windows])
    cuts = np.quantile(aspects, np.linspace(0.0, 1.0, n_mixtures + 1)[1:-1])
    groups = [[] for _ in range(n_mixtures)]
    for window, group in zip(windows, np.searchsorted(cuts, aspects,
                                                      side='right')):
        groups[int(group)].append(window)
    return [group if group else list(windows) for group in groups]


def _calibrate_bias(model: CharacterTreeModel,
                    windows: Sequence[LatentWindow],
                    backgrounds: Sequence[HogPyramid], k: int) \
        -> CharacterTreeModel:
    """ Put the threshold 0 halfway between positive and negative means. """
    cache = {}
    positive = [found[0] for found in (_relabel(model, w, cache)
                                       for w in windows)
                if found is not None]
    negative = []
    if backgrounds:
        negative = [float(phi @ model_to_vector(model))
                    for phi, _ in mine_hard_negatives(model, backgrounds, k)]
    mean_pos = float(np.mean(positive)) if positive else 0.0
    mean_neg = float(np.mean(negative)) if negative else 0.0
    bias = model.bias - (mean_pos + mean_neg) / 2.0
    return CharacterTreeModel(model.parts, model.edges, model.root, bias,
                              model.label)


def train_class(label: str, class_index: int,
                windows: Sequence[LatentWindow],
                backgrounds: Sequence[HogPyramid],
                config: TrainingConfig, dim: int) \
        -> Tuple[List[CharacterTreeModel], List[TrainingLogEntry]]:
    rng = np.random.default_rng([config.rng_seed, class_index])
    if not backgrounds:
        logger.warning("class %s: no background plate without it, "
                       "training without negatives", label)
    groups = _split_by_aspect(windows, config.mixtures_per_class)
    k_init = config.negatives_per_positive * max(1, len(windows)
                                                 // len(groups))
    components = [_calibrate_bias(initial_component(label, group, config,
                                                    dim),
                                  group, backgrounds, k_init)
                  for group in groups]
    entries = []
    if config.epochs == 0:
        return components, entries

    for round_index in range(config.latent_rounds):
        assigned = [[] for _ in components]
        caches = [{} for _ in components]
        for window in windows:
            best = None
            for m, component in enumerate(components):
                found = _relabel(component, window, caches[m])
                if found is not None and (best is None or found[0] > best[1]):
                    best = (m, found[0], found[2])
            if best is not None:
                assigned[best[0]].append(best[2])
        for m, component in enumerate(components):
            positives = assigned[m]
            if not positives:
                continue
            k = config.negatives_per_positive * len(positives)
            negatives = [phi for phi, _ in
                         mine_hard_negatives(component, backgrounds, k)] \
                if backgrounds else []
            mask = regularization_mask(component)
            X, y = _training_matrix(positives, negatives, mask.size)
            for epoch in range(config.epochs):
                lr = lr_schedule(config,
                                 round_index * config.epochs + epoch)
                component = sgd_hinge_epoch(component, positives, negatives,
                                            lr, config.reg_c, rng)
                loss = hinge_objective(model_to_vector(component), X, y,
                                       config.reg_c, mask)
                if not np.isfinite(loss):
                    raise TrainingDivergenceError(
                        f"class {label} mixture {m}: loss {loss} at round "
                        f"{round_index} epoch {epoch}")
                entry = TrainingLogEntry(label, m, round_index, epoch, lr,
                                         loss, len(negatives))
                logger.info(entry.line())
                entries.append(entry)
            components[m] = component
    return components, entries


def load_plate(sample: TrainingSample) -> ImageBuffer:
    return crop(load_image(sample.image_path), sample.plate_box)


def samples_from_manifest(path: str, split: Optional[str] = "train") \
        -> List[TrainingSample]:
    """
    One positive per annotated character and one background negative per
    plate, for the records of the requested split (None: all records).
    """
    _, records = read_manifest(path)
    root = os.path.dirname(os.path.abspath(path))
    samples = []
    for record in records:
        if split is not None and record.split != split:
            continue
        image_path = record.image_path(root)
        for label, box in record.chars:
            samples.append(TrainingSample(record.record_id, image_path,
                                          record.plate_box, label, box))
        samples.append(TrainingSample(record.record_id, image_path,
                                      record.plate_box, positive=False))
    return samples


def detection_levels(detector: DetectorConfig,
                     windows: Dict[str, Sequence[Tuple[int, LatentWindow]]]) \
        -> DetectorConfig:
    """
    Restrict detection to the levels the positives were found on, widened
    by LEVEL_SLACK. An explicit max_level is kept.
    """
    levels = [window.level for pairs in windows.values()
              for _, window in pairs]
    if not levels or detector.max_level is not None:
        return detector
    restricted = replace(detector,
                         min_level=max(0, min(levels) - LEVEL_SLACK),
                         max_level=max(levels) + LEVEL_SLACK)
    logger.info("detection scans levels %d..%d", restricted.min_level,
                restricted.max_level)
    return restricted


def train_character_models(dataset: Sequence[TrainingSample],
                           config: TrainingConfig = TrainingConfig(),
                           hog: HogConfig = HogConfig(),
                           detector: DetectorConfig = DetectorConfig(),
                           executor=None,
                           log: Optional[TrainingLog] = None) \
        -> CharacterMixtureSet:
    """
    Train every class of config.alphabet.
    :param executor: optional concurrent.futures executor; classes train
    independently with their own seeded generator
    :param log: receives the per-epoch entries in alphabet order
    """
    by_label: Dict[str, List[TrainingSample]] = {c: [] for c in config.alphabet}
    plate_labels: Dict[tuple, set] = {}
    for sample in dataset:
        labels = plate_labels.setdefault(sample.plate_key, set())
        if sample.positive:
            labels.add(sample.label)
            if sample.label in by_label:
                by_label[sample.label].append(sample)
    for label in config.alphabet:
        if not by_label[label]:
            raise MissingClassError(label)

    chosen: Dict[tuple, List[Tuple[int, TrainingSample]]] = {}
    for class_index, label in enumerate(config.alphabet):
        samples = by_label[label]
        if len(samples) > config.max_positives_per_class:
            rng = np.random.default_rng([config.rng_seed, class_index])
            picks = sorted(rng.permutation(len(samples))
                           [:config.max_positives_per_class])
            samples = [samples[i] for i in picks]
        for order, sample in enumerate(samples):
            chosen.setdefault(sample.plate_key, []).append(
                (class_index * len(dataset) + order, sample))

    windows: Dict[str, List[Tuple[int, LatentWindow]]] = \
        {c: [] for c in config.alphabet}
    for key in sorted(chosen):
        entries = chosen[key]
        features = plate_features(load_plate(entries[0][1]), hog,
                                  config.root_cells)
        for order, sample in entries:
            window = positive_window(features, sample.box_in_plate(),
                                     config.root_cells, config.latent_radius)
            if window is None:
                logger.debug("skipping %s '%s': no feasible window",
                             sample.image_id, sample.label)
                continue
            windows[sample.label].append((order, window))
    logger.info("extracted positive windows from %d plates", len(chosen))
    detector = detection_levels(detector, windows)

    pool_rng = np.random.default_rng(config.rng_seed)
    keys = sorted(plate_labels)
    pool = [keys[i] for i in
            sorted(pool_rng.permutation(len(keys))[:config.negative_pool_size])]
    pool_keys = set(pool)
    plates = {}
    for sample in dataset:
        if sample.plate_key in pool_keys and sample.plate_key not in plates:
            plates[sample.plate_key] = sample
    pool_features = {key: plate_features(load_plate(plates[key]), hog,
                                         config.root_cells).pyramid
                     for key in pool}

    def run(item):
        class_index, label = item
        ordered = [w for _, w in sorted(windows[label], key=lambda t: t[0])]
        if not ordered:
            raise MissingClassError(label)
        backgrounds = [pool_features[key] for key in pool
                       if label not in plate_labels[key]]
        return train_class(label, class_index, ordered, backgrounds, config,
                           hog.bins * HOG_NORMALIZATIONS)

    items = list(enumerate(config.alphabet))
    results = list(executor.map(run, items)) if executor is not None \
        else [run(item) for item in items]
    mixtures = {}
    for (_, label), (components, entries) in zip(items, results):
        mixtures[label] = components
        if log is not None:
            log.extend(entries)
    return CharacterMixtureSet(config.alphabet, mixtures, hog, detector)
